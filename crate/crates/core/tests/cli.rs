use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use stochgame::model::{parse_game, serialize_strategy, Distribution, FiniteMemoryStrategy, Player};

fn games() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("games")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stochgame")).args(args).output().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn solve_g1_reports_yes() {
    let g1 = games().join("g1.json");
    let out = run(&["solve", "--game", path(&g1), "--objective", "reach"]);
    assert_eq!(out.status.code(), Some(0));
    let report = stdout_json(&out);
    assert_eq!(report["verdict"], "yes");
    assert_eq!(report["objective"], "reach");
    assert_eq!(report["witness"]["owner"], "eve");
    assert_eq!(report["candidates_checked"], 7);
    assert_eq!(report["config"]["max_candidates"], 10_000_000);

    let stderr = String::from_utf8(out.stderr).unwrap();
    let records: Vec<&str> = stderr.lines().collect();
    assert_eq!(records.len(), 1);
    let record: Value = serde_json::from_str(records[0]).unwrap();
    assert_eq!(record["command"], "solve");
    assert_eq!(record["exit_code"], 0);
}

#[test]
fn solve_g2_reports_no_for_both_objectives() {
    let g2 = games().join("g2.json");
    for objective in ["reach", "buchi"] {
        let out = run(&["solve", "--game", path(&g2), "--objective", objective]);
        assert_eq!(out.status.code(), Some(0));
        let report = stdout_json(&out);
        assert_eq!(report["verdict"], "no");
        assert!(report["witness"].is_null());
    }
}

#[test]
fn debug_candidates_lists_every_candidate() {
    let g1 = games().join("g1.json");
    let out = run(&["solve", "--game", path(&g1), "--objective", "reach", "--debug-candidates"]);
    let report = stdout_json(&out);
    let rows = report["candidates"].as_array().unwrap();
    assert_eq!(rows.len(), 9);
    assert_eq!(rows[6]["eve_wins"], true);
    assert_eq!(rows[0]["eve_wins"], false);
}

#[test]
fn invalid_inputs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"states\": [").unwrap();
    assert_eq!(run(&["solve", "--game", path(&bad), "--objective", "reach"]).status.code(), Some(2));

    let missing = dir.path().join("missing.json");
    assert_eq!(run(&["solve", "--game", path(&missing), "--objective", "reach"]).status.code(), Some(2));

    let g1 = games().join("g1.json");
    assert_eq!(run(&["solve", "--game", path(&g1), "--objective", "safety"]).status.code(), Some(2));
    assert_eq!(run(&["solve", "--game", path(&g1)]).status.code(), Some(2));
}

#[test]
fn candidate_cap_exits_3_with_partial_report() {
    let g1 = games().join("g1.json");
    let out = run(&["solve", "--game", path(&g1), "--objective", "reach", "--max-candidates", "1"]);
    assert_eq!(out.status.code(), Some(3));
    let report = stdout_json(&out);
    assert!(report["verdict"].is_null());
    assert_eq!(report["candidates_checked"], 0);
    assert!(report["error"].as_str().unwrap().contains("candidates"));
}

#[test]
fn belief_cap_exits_3() {
    let g1 = games().join("g1.json");
    let out = run(&["solve", "--game", path(&g1), "--objective", "reach", "--max-beliefs", "1"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn solve_is_deterministic_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let game = dir.path().join("g.json");
    let gen = run(&["gen", "--seed", "17", "--states", "4", "--eve-blocks", "1", "--out", path(&game)]);
    assert_eq!(gen.status.code(), Some(0));
    let strip = |out: Output| {
        let mut v = stdout_json(&out);
        let obj = v.as_object_mut().unwrap();
        obj.remove("elapsed_ms");
        obj.remove("config");
        v
    };
    let one = strip(run(&["solve", "--game", path(&game), "--objective", "buchi", "--threads", "1"]));
    let many = strip(run(&["solve", "--game", path(&game), "--objective", "buchi", "--threads", "4"]));
    assert_eq!(one, many);
}

fn write_pair(dir: &Path) -> (PathBuf, PathBuf) {
    let g1 = parse_game(include_str!("../games/g1.json")).unwrap();
    let eve = FiniteMemoryStrategy::constant(&g1, Player::Eve, Distribution::uniform([0, 1]));
    let adam = FiniteMemoryStrategy::constant(&g1, Player::Adam, Distribution::point(0));
    let e = dir.join("eve.json");
    let a = dir.join("adam.json");
    std::fs::write(&e, serialize_strategy(&g1, &eve)).unwrap();
    std::fs::write(&a, serialize_strategy(&g1, &adam)).unwrap();
    (e, a)
}

#[test]
fn eval_g1_pair_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let (e, a) = write_pair(dir.path());
    let g1 = games().join("g1.json");
    let out = run(&["eval", "--game", path(&g1), "--eve", path(&e), "--adam", path(&a), "--objective", "reach"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["probability"], "1/1");
    assert_eq!(v["method"], "exact");

    let out = run(&["eval", "--game", path(&g1), "--eve", path(&a), "--adam", path(&e), "--objective", "reach"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (e, a) = write_pair(dir.path());
    let g1 = games().join("g1.json");
    let args = [
        "simulate", "--game", path(&g1), "--eve", path(&e), "--adam", path(&a), "--objective", "buchi", "--samples", "300",
        "--horizon", "40", "--seed", "9",
    ];
    let first = run(&args);
    let second = run(&args);
    assert_eq!(first.status.code(), Some(0));
    assert_eq!(first.stdout, second.stdout);
    let v = stdout_json(&first);
    assert_eq!(v["method"], "monte_carlo");
    assert_eq!(v["generator"], "chacha8");
    assert_eq!(v["approximate"], true);
    assert_eq!(v["window"], 4);
}

#[test]
fn knowledge_dump_on_perfect_information_has_singletons() {
    let g1 = games().join("g1.json");
    let out = run(&["knowledge", "--game", path(&g1), "--dump"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let (doc, census) = text.rsplit_once('}').unwrap();
    assert!(census.trim().starts_with("census: knowledge_states="));
    let doc: Value = serde_json::from_str(&format!("{doc}}}")).unwrap();
    for name in doc["states"].as_array().unwrap() {
        let know = name.as_str().unwrap().split('|').nth(1).unwrap();
        assert!(!know.contains(','), "{know}");
    }
}

#[test]
fn gen_is_byte_identical_for_a_seed() {
    let a = run(&["gen", "--seed", "1"]);
    let b = run(&["gen", "--seed", "1"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let c = run(&["gen", "--seed", "2"]);
    assert_ne!(a.stdout, c.stdout);
    parse_game(std::str::from_utf8(&a.stdout).unwrap()).unwrap();
    assert_eq!(run(&["gen", "--eve-blocks", "9"]).status.code(), Some(2));
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("game.json");
    let out = run(&["gen", "--seed", "3", "--out", path(&target)]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    parse_game(&std::fs::read_to_string(&target).unwrap()).unwrap();
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
}
