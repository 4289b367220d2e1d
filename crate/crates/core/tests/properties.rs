use std::collections::BTreeMap;
use std::sync::OnceLock;

use proptest::prelude::*;

use forcegame::dyadic::Dyadic;
use forcegame::forcing::Interval;
use forcegame::game::{audit, play, replay_json, RandomLegal, Stall};
use forcegame::logic::enumerate::formulas;
use forcegame::logic::{eval_sentence, parse_formula, Formula};
use forcegame::oracle::{bounds_hold, Bound, Oracle, Policy, PoolBudget, Theory, Verdict};
use forcegame::verify::forcing::instances;

const SCALE: u32 = 12;

fn dy() -> impl Strategy<Value = Dyadic> {
    (0u64..=1 << SCALE).prop_map(|k| Dyadic::new(k, SCALE))
}

/// Scaled integer image; every value here lies on the 2^-12 grid, or 2^-13 after halving.
fn int(d: Dyadic) -> u64 {
    d.numerator() << (SCALE + 1 - d.exponent())
}

const ONE: u64 = 1 << (SCALE + 1);

fn interval() -> impl Strategy<Value = (Interval, Dyadic)> {
    (dy(), dy(), 0u64..=64).prop_map(|(a, b, t)| {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        // A point inside, on the same grid.
        let span = int(hi) - int(lo);
        let inner = Dyadic::new((int(lo) + span * t / 64) & !1, SCALE + 1);
        (Interval::new(lo, hi), inner)
    })
}

fn graph_sentences() -> &'static Vec<Formula> {
    static S: OnceLock<Vec<Formula>> = OnceLock::new();
    S.get_or_init(|| formulas(&Theory::graphs().signature, &[0, 1, 2], 2, 1))
}

fn metric_sentences() -> &'static Vec<Formula> {
    static S: OnceLock<Vec<Formula>> = OnceLock::new();
    S.get_or_init(|| formulas(&Theory::metric().signature, &[0, 1], 2, 2))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn connectives_match_integer_arithmetic(a in dy(), b in dy()) {
        prop_assert_eq!(int(a.one_minus()), ONE - int(a));
        prop_assert_eq!(int(a.half()), int(a) / 2);
        prop_assert_eq!(int(a.dot_plus(b)), (int(a) + int(b)).min(ONE));
        prop_assert_eq!(int(a.sub_sat(b)), int(a).saturating_sub(int(b)));
        prop_assert_eq!(int(a.abs_diff(b)), int(a).abs_diff(int(b)));
        prop_assert_eq!(a.cmp(&b), int(a).cmp(&int(b)));
        prop_assert_eq!(a.one_minus().one_minus(), a);
    }

    #[test]
    fn interval_ops_contain_pointwise_values((i, v) in interval(), (j, w) in interval()) {
        prop_assert!(i.contains(v) && j.contains(w));
        prop_assert!(i.neg().contains(v.one_minus()));
        prop_assert!(i.half().contains(v.half()));
        prop_assert!(i.dot_plus(&j).contains(v.dot_plus(w)));
        prop_assert!(Interval::min(&i, &j).contains(v.min(w)));
        prop_assert!(Interval::max(&i, &j).contains(v.max(w)));
        prop_assert_eq!(i.width(), i.hi.sub_sat(i.lo));
    }

    #[test]
    fn formulas_print_and_parse_back(k in any::<prop::sample::Index>(), metric in any::<bool>()) {
        let (sig, fs) = if metric {
            (Theory::metric().signature, metric_sentences())
        } else {
            (Theory::graphs().signature, graph_sentences())
        };
        let f = k.get(fs);
        let back = parse_formula(&f.to_string(), &sig).unwrap();
        prop_assert_eq!(&back, f);
        prop_assert_eq!(back.to_string(), f.to_string());
    }

    #[test]
    fn renaming_round_trips(k in any::<prop::sample::Index>(), shift in 1u32..20) {
        let f = k.get(graph_sentences());
        let there = f.rename_witnesses(&|c| c + shift);
        prop_assert_eq!(there.witnesses().len(), f.witnesses().len());
        prop_assert_eq!(there.rename_witnesses(&|c| c - shift), f.clone());
        prop_assert_eq!(there.depth(), f.depth());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sat_witnesses_satisfy_every_subset(ks in prop::collection::vec(any::<prop::sample::Index>(), 1..4), r in 1u64..=16) {
        let oracle = Oracle::with_defaults(Theory::graphs());
        let qf: Vec<Formula> = formulas(&oracle.theory.signature, &[0, 1, 2], 1, 0);
        let bounds: Vec<Bound> = ks.iter().map(|k| Bound::new(k.get(&qf).clone(), Dyadic::new(r, 4))).collect();
        if let Verdict::Sat(w) = oracle.check(&bounds).unwrap() {
            prop_assert!(oracle.theory.is_model(&w));
            for cut in 0..bounds.len() {
                prop_assert!(bounds_hold(&bounds[..cut], &oracle.search, &w));
                // Witnessed bounds are strict with room to spare.
                let v = eval_sentence(&bounds[cut].formula, &w).unwrap();
                prop_assert!(v < bounds[cut].bound);
            }
        }
    }

    #[test]
    fn played_transcripts_chain_audit_and_replay(seed in 0u64..1000, rounds in 1usize..5) {
        let oracle = Oracle::with_defaults(Theory::graphs());
        let mut forall = RandomLegal::new(seed, PoolBudget::new(4, vec![Dyadic::HALF], 1, 16).with_fresh(1));
        let t = play(&oracle, &mut forall, &mut Stall, rounds);
        prop_assert!(t.forfeit.is_none());
        prop_assert_eq!(t.len(), 2 * rounds);
        for w in t.moves.windows(2) {
            prop_assert!(w[1].condition.extends(&w[0].condition));
        }
        prop_assert!(audit(&oracle, &t).is_ok());
        let text = t.to_json("graphs", Policy::Strict);
        let back = replay_json(&oracle, &text).unwrap();
        prop_assert_eq!(back.to_json("graphs", Policy::Strict), text);

        // Renaming every witness keeps the transcript legal.
        let used: Vec<u32> = t.last().constants().into_iter().collect();
        let map: BTreeMap<u32, u32> = used.iter().map(|&c| (c, c + 10)).collect();
        prop_assert!(audit(&oracle, &t.rename_witnesses(&map)).is_ok());
    }

    #[test]
    fn game_values_shrink_along_extensions(seed in 0u64..500) {
        for inst in instances(seed, 2) {
            let w = inst.world();
            let rounds = inst.budget.depth.max(1);
            let top = w.game(0, &inst.phi, rounds);
            for &j in w.extensions(0) {
                prop_assert!(w.game(j, &inst.phi, rounds) <= top, "{}", inst.describe());
                prop_assert!(w.member(j).extends(w.member(0)));
            }
            prop_assert_eq!(top, w.weak(0, &inst.phi));
        }
    }
}
