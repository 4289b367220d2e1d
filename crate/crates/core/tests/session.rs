use forcegame::dyadic::Dyadic;
use forcegame::forcing::{Interval, Kind};
use forcegame::oracle::WireBound;
use forcegame::session::{AnalyzeRequest, MoveRequest, Session, SessionConfig};

fn wire(f: &str, b: &str) -> WireBound {
    WireBound { formula: f.into(), bound: b.parse().unwrap() }
}

fn analyze(s: &mut Session, f: &str) -> Interval {
    s.analyze(&AnalyzeRequest { formula: f.into(), kind: Kind::Weak, budget: None }).unwrap().report.interval
}

#[test]
fn fresh_graph_session_analysis() {
    let mut s = Session::create("s1".into(), SessionConfig::new("graphs")).unwrap();
    // The root forces nothing about an unmentioned edge: ∀ can always refute it.
    assert_eq!(analyze(&mut s, "E(c0,c1)"), Interval::point(Dyadic::ONE));
    assert_eq!(analyze(&mut s, "E(c0,c1)"), Interval::point(Dyadic::ONE));
    assert_eq!(s.view().analyses.len(), 2);

    let r = s.play(&MoveRequest { additions: Some(vec![wire("E(c0,c1)", "1/2")]), condition: None }).unwrap();
    assert!(r.accepted);
    // Values are read off bounds: the pool only offers threshold 1/2, so `E(c0,c1) < 1/2` is
    // the tightest bound any extension carries.
    assert_eq!(analyze(&mut s, "E(c0,c1)"), Interval::point(Dyadic::HALF));
    let view = s.view();
    assert_eq!(view.analyses.last().unwrap().length, 2);
    assert!(view.compiled.is_some());
    assert!(view.ledger.entries.iter().any(|e| e.activations > 0));
}

#[test]
fn analysis_rejects_open_formulas() {
    let mut s = Session::create("s1".into(), SessionConfig::new("metric")).unwrap();
    let open = AnalyzeRequest { formula: "d(x0,c0)".into(), kind: Kind::Game, budget: None };
    assert!(s.analyze(&open).is_err());
    assert!(s.view().analyses.is_empty());
}

#[test]
fn config_rejects_unknown_fields() {
    assert!(serde_json::from_str::<SessionConfig>(r#"{"theory":"graphs","seed":3}"#).is_err());
    let c: SessionConfig = serde_json::from_str(r#"{"theory":"graphs","human":"exists"}"#).unwrap();
    assert!(Session::create("s2".into(), c).is_ok());
}
