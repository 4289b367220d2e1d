use super::*;
use crate::game::{compile_loose, play, Stall, Strategy, TaskStatus};
use crate::logic::parse::parse_formula;
use crate::oracle::{Bound, Oracle, Policy};

fn f(t: &Theory, s: &str) -> Formula {
    parse_formula(s, &t.signature).unwrap()
}

fn graph_oracle() -> Oracle {
    Oracle::with_defaults(Theory::graphs())
}

fn statuses(s: &TaskStrategy) -> Vec<TaskStatus> {
    s.ledger().into_iter().map(|e| e.status).collect()
}

#[test]
fn empty_schedules_stall() {
    let o = graph_oracle();
    let root = o.root();
    let mut strategies = [enforce_extra_canonical(&[]),
        enforce_universal(&Theory::new("empty", Signature::graphs(), vec![]).unwrap(), 4, &[2]).unwrap(),
        enforce_supjoininf(&o.theory, &[], vec![], 3, &[2]).unwrap(),
        enforce_finite_generic(vec![]).unwrap(),
        enforce_eatomic(Arc::new(ClassicalProbe::new(1, SearchBounds::new(3, 0))), vec![])];
    for s in strategies.iter_mut() {
        assert_eq!(s.advance(&o, root.clone()), root, "{}", s.name());
    }
}

#[test]
fn extra_canonical_places_copies() {
    let o = Oracle::new(Theory::metric(), SearchBounds::new(8, 4), Policy::Strict);
    let mut s = enforce_extra_canonical(&[Density { center: 0, k: 2, copies: 2 }]);
    let t = play(&o, &mut Stall, &mut s, 2);
    let near = |c: u32| Bound::new(Formula::dist(Term::c(c), Term::c(0)), Dyadic::pow2_inv(2));
    assert!(t.last().contains(&near(1)) && t.last().contains(&near(2)));
    assert!(s.all_done() && s.unverified(t.last()).is_empty());
}

#[test]
fn universal_instances() {
    let th = Theory::graphs();
    let o = graph_oracle();
    let mut s = enforce_universal(&th, 1, &[2]).unwrap();
    let q = s.advance(&o, o.root());
    assert!(q.contains(&Bound::new(f(&th, "~E(c0,c0)"), Dyadic::pow2_inv(1))));
    let mut full = enforce_universal(&th, 4, &[2]).unwrap();
    let mut q = o.root();
    while !full.all_done() {
        q = full.advance(&o, q);
    }
    let w = q.witness().unwrap();
    assert!(th.is_model(w) && w.constants.len() == 4);
    assert!(enforce_universal(&th, 2, &[3]).is_err());
}

#[test]
fn ec_witness_and_no_extension() {
    let th = Theory::graphs();
    let o = graph_oracle();
    let half = Dyadic::pow2_inv(1);
    let items = vec![
        EcItem { phi: f(&th, "inf x1 . E(x0,x1)"), tuple: vec![0], r: half },
        EcItem { phi: f(&th, "inf x1 . E(x1,x1)"), tuple: vec![], r: half },
    ];
    let mut s = enforce_ec(items).unwrap();
    let q = s.advance(&o, o.root());
    let q = s.advance(&o, q);
    assert!(q.bounds.iter().any(|b| b.formula.to_string().starts_with("E(c0,") && b.bound == half));
    let st = statuses(&s);
    assert!(st[0].is_done());
    assert!(matches!(&st[1], TaskStatus::Done(d) if d.starts_with("no extension")));
    assert!(s.unverified(&q).is_empty());
    assert!(enforce_ec(vec![EcItem { phi: f(&th, "sup x1 . E(x0,x1)"), tuple: vec![0], r: half }]).is_err());
}

#[test]
fn extension_axiom_family_size() {
    assert_eq!(extension_axioms(6, 3).len(), 232);
    assert!(extension_axioms(6, 3).iter().all(|i| i.phi.is_sentence()));
}

fn triangle() -> FiniteStructure {
    let sig = Signature::graphs();
    let mut s = FiniteStructure::point(&sig, 0);
    s.universe = 3;
    s.metric = (0..9).map(|i| if i % 4 == 0 { Dyadic::ZERO } else { Dyadic::ONE }).collect();
    s.predicates.insert("E".into(), (0..9).map(|i| if i % 4 == 0 { Dyadic::ONE } else { Dyadic::ZERO }).collect());
    s
}

#[test]
fn supjoininf_from_triangle() {
    let th = Theory::graphs();
    let o = graph_oracle();
    let phi = f(&th, "sup x0 . join{inf x1 . E(x0,x1); inf x1 . inf x2 . E(x0,x1) (+) E(x0,x2) (+) E(x1,x2)}");
    let mut s = enforce_supjoininf(&th, std::slice::from_ref(&phi), vec![triangle()], 2, &[2]).unwrap();
    let mut q = o.root();
    while s.ledger().iter().any(|e| e.status.is_pending()) {
        q = s.advance(&o, q);
    }
    assert!(s.all_done(), "{:?}", statuses(&s));
    assert!(q.bounds.iter().any(|b| b.formula.to_string().starts_with("E(c0,")));
    let point = {
        let mut p = FiniteStructure::point(&th.signature, 0);
        p.predicates.insert("E".into(), vec![Dyadic::ONE]);
        p
    };
    assert!(matches!(
        enforce_supjoininf(&th, &[phi], vec![point], 2, &[2]),
        Err(EnforcerError::Reference { index: 0, .. })
    ));
}

#[test]
fn finite_generic_pins_atom() {
    let th = Theory::graphs();
    let o = graph_oracle();
    let eps = Dyadic::pow2_inv(3);
    let mut s = enforce_finite_generic(vec![(f(&th, "E(c0,c1)"), eps)]).unwrap();
    let q = s.advance(&o, o.root());
    assert!(s.all_done());
    assert!(crate::forcing::bound_interval(&q, &f(&th, "E(c0,c1)")).width() < eps);
}

struct Unknown;

impl IsolationProbe for Unknown {
    fn depth(&self) -> usize {
        1
    }

    fn isolate(&self, _: &Theory, _: &ETypeApprox, _: Dyadic) -> Isolation {
        Isolation::Unknown { reason: "test".into() }
    }
}

#[test]
fn eatomic_graph_and_unknown() {
    let o = graph_oracle();
    let probe = Arc::new(ClassicalProbe::new(1, SearchBounds::new(4, 0)));
    let delta = Dyadic::pow2_inv(1);
    let mut s = enforce_eatomic(probe, vec![(vec![0], delta), (vec![1], delta)]);
    let mut q = o.root();
    for _ in 0..4 {
        q = s.advance(&o, q);
    }
    assert!(s.all_done(), "{:?}", statuses(&s));
    let mut u = enforce_eatomic(Arc::new(Unknown), vec![(vec![0], delta)]);
    let q0 = o.certify(&o.root(), &[Bound::new(f(&o.theory, "E(c0,c1)"), delta)]).unwrap().unwrap();
    assert_eq!(u.advance(&o, q0.clone()), q0);
    assert!(matches!(&statuses(&u)[0], TaskStatus::Flagged(r) if r.starts_with("probe unknown")));
}

#[test]
fn backforth_identity() {
    let th = Theory::graphs();
    let o = graph_oracle();
    let adds: Vec<Bound> = ["E(c0,c1)", "~E(c1,c2)", "E(c2,c3)"]
        .iter()
        .map(|s| Bound::new(f(&th, s), Dyadic::pow2_inv(1)))
        .collect();
    let q = o.certify(&o.root(), &adds).unwrap().unwrap();
    let c = compile_loose(&q, &[], Dyadic::ZERO).unwrap();
    let chain = backforth_compare(&c, &c, &th.signature, 4, Dyadic::ZERO).unwrap();
    assert!(chain.maps.windows(2).all(|w| w[1].extends(&w[0])));
    assert!(chain.last().pairs.iter().all(|(a, b)| a == b));
}

#[test]
fn config_round_trip() {
    let cfg = EnforcerConfig::canonical_ec();
    let text = serde_json::to_string(&cfg).unwrap();
    assert_eq!(serde_json::from_str::<EnforcerConfig>(&text).unwrap(), cfg);
    let s = cfg.build(&Theory::graphs()).unwrap();
    assert!(!s.tasks().is_empty());
}
