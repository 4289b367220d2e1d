use std::path::PathBuf;

use forcegame_cli::commands::{cmd_eval, cmd_parse, cmd_play, cmd_sat, cmd_verify, Adversary, CliError, ConditionArgs, TheoryArgs};
use serde_json::Value;

fn graphs() -> TheoryArgs {
    TheoryArgs { theory: "graphs".into(), bounds: None, policy: Default::default() }
}

fn bounds(items: &[&str]) -> ConditionArgs {
    ConditionArgs { condition: None, bound: items.iter().map(|s| s.to_string()).collect() }
}

fn tmp(name: &str) -> PathBuf {
    std::env::temp_dir().join(format!("forcegame-cli-{}-{name}", std::process::id()))
}

#[test]
fn parse_prints_canonical_text() {
    let r = cmd_parse("sup  x0 .  E( x0 , c0 )", &graphs()).unwrap();
    let v: Value = serde_json::from_str(&r.body).unwrap();
    assert_eq!(v["formula"], "sup x0 . E(x0,c0)");
    assert_eq!(v["classification"]["universal"], true);
}

#[test]
fn malformed_input_is_a_usage_error() {
    assert!(matches!(cmd_parse("E(c0", &graphs()), Err(CliError::Usage(_))));
    assert!(matches!(cmd_sat(&graphs(), &bounds(&["E(c0,c1) 1/2"])), Err(e) if e.code() == 2));
    let missing = TheoryArgs { theory: "/nonexistent/pack.json".into(), ..graphs() };
    assert_eq!(cmd_parse("E(c0,c1)", &missing).err().unwrap().code(), 2);
    assert_eq!(cmd_verify("nope", 1).err().unwrap().code(), 2);
}

#[test]
fn sat_reports_witness_or_refutation() {
    let yes = cmd_sat(&graphs(), &bounds(&["E(c0,c1) < 1/2"])).unwrap();
    assert!(yes.passed);
    assert!(serde_json::from_str::<Value>(&yes.body).unwrap()["witness"].is_object());
    let no = cmd_sat(&graphs(), &bounds(&["E(c0,c1) < 1/2", "~E(c0,c1) < 1/2"])).unwrap();
    assert!(!no.passed);
    assert_eq!(serde_json::from_str::<Value>(&no.body).unwrap()["verdict"], "unsat_at_bound");
}

#[test]
fn eval_reads_witness_files() {
    let yes = cmd_sat(&graphs(), &bounds(&["~E(c0,c1) < 1/2"])).unwrap();
    let w = serde_json::from_str::<Value>(&yes.body).unwrap()["witness"].clone();
    let path = tmp("witness.json");
    std::fs::write(&path, w.to_string()).unwrap();
    let r = cmd_eval(&path, "E(c0,c1)", &graphs()).unwrap();
    std::fs::remove_file(&path).unwrap();
    // 0 means "holds": ~E < 1/2 forces an edge.
    assert_eq!(serde_json::from_str::<Value>(&r.body).unwrap()["value"], "1/2^0");
}

#[test]
fn played_transcripts_replay_and_audit() {
    let out = tmp("play.json");
    let r = cmd_play(&graphs(), 4, 7, None, Adversary::RandomLegal, None, Some(&out)).unwrap();
    assert!(r.passed, "{}", r.body);
    let replayed = cmd_play(&graphs(), 0, 0, None, Adversary::Stall, Some(&out), None).unwrap();
    assert!(replayed.passed, "{}", replayed.body);
    let v: Value = serde_json::from_str(&replayed.body).unwrap();
    assert_eq!(v["replayed"], 8);

    // Tampering with a witnessed bound breaks the replay.
    let text = std::fs::read_to_string(&out).unwrap();
    let tampered = text.replacen("\"1/2^1\"", "\"0/2^0\"", 1);
    assert_ne!(text, tampered);
    std::fs::write(&out, tampered).unwrap();
    let bad = cmd_play(&graphs(), 0, 0, None, Adversary::Stall, Some(&out), None);
    std::fs::remove_file(&out).unwrap();
    assert!(matches!(bad, Err(CliError::Failure(_))) || matches!(bad, Ok(ref r) if !r.passed));
}

#[test]
fn verify_runs_a_named_suite() {
    let r = cmd_verify("coincidence", 1).unwrap();
    assert!(r.passed, "{}", r.body);
    let v: Value = serde_json::from_str(&r.body).unwrap();
    assert_eq!(v[0]["suite"], "coincidence");
}

#[test]
fn service_and_cli_force_reports_are_byte_identical() {
    use forcegame::forcing::Kind;
    use forcegame::session::{AnalyzeRequest, Session, SessionConfig};
    use forcegame_cli::commands::{cmd_force, to_json, BudgetArgs};

    let mut s = Session::create("s1".into(), SessionConfig::new("graphs")).unwrap();
    let phi = "sup x0 . ~E(x0,c0)";
    let entry = s.analyze(&AnalyzeRequest { formula: phi.into(), kind: Kind::Game, budget: None }).unwrap();
    let cli = cmd_force(Kind::Game, phi, &graphs(), &ConditionArgs::default(), &BudgetArgs::default()).unwrap();
    assert_eq!(to_json(&entry.report), cli.body);
}
