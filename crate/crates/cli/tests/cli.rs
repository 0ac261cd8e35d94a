use std::path::Path;
use std::process::{Command, Output};

use tspcc::tsp::{order_length, parse_tsplib, validate_permutation, TourFile};
use tspcc::DistanceMode;

fn tspcc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tspcc"))
        .env("TSPCC_OUT_DIR", dir)
        .args(args)
        .output()
        .expect("run tspcc")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let o = tspcc(dir, args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn value(out: &str, key: &str) -> f64 {
    out.lines()
        .find_map(|l| l.strip_prefix(key).map(|v| v.split_whitespace().next().unwrap().parse().unwrap()))
        .unwrap_or_else(|| panic!("no {key} in {out}"))
}

const SQUARE: &str = "NAME : square4\nTYPE : TSP\nDIMENSION : 4\nEDGE_WEIGHT_TYPE : EUC_2D\nNODE_COORD_SECTION\n1 0 0\n2 1 1\n3 1 0\n4 0 1\nEOF\n";

#[test]
fn untrained_checkpoint_loads() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["train", "--preset", "reduced", "--steps", "0", "--hidden", "8", "--out", "m.ckpt"]);
    let ck = tspcc::train::load_checkpoint(&d.path().join("m.ckpt")).unwrap();
    assert_eq!(ck.step, 0);
    assert_eq!(ck.actor.config.hidden, 8);
    assert!(d.path().join("train_log.csv").is_file());
}

#[test]
fn training_logs_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = [
        "train", "--steps", "12", "--seed", "1", "--hidden", "8", "--batch", "4", "--cities", "6", "--eval-every", "4",
        "--out", "m.ckpt",
    ];
    ok(a.path(), &args);
    ok(b.path(), &args);
    let la = std::fs::read(a.path().join("train_log.csv")).unwrap();
    assert_eq!(la, std::fs::read(b.path().join("train_log.csv")).unwrap());
    assert_eq!(String::from_utf8(la).unwrap().lines().count(), 5);
    assert_eq!(
        std::fs::read(a.path().join("m.ckpt")).unwrap(),
        std::fs::read(b.path().join("m.ckpt")).unwrap()
    );
}

#[test]
fn ga_solves_the_square() {
    let d = tempfile::tempdir().unwrap();
    let inst = d.path().join("square4.tsp");
    std::fs::write(&inst, SQUARE).unwrap();
    std::fs::write(d.path().join("opt.txt"), "square4 4\n").unwrap();
    let out = ok(
        d.path(),
        &["solve", "--alg", "ga", "--inst", inst.to_str().unwrap(), "--opt", d.path().join("opt.txt").to_str().unwrap()],
    );
    assert_eq!(value(&out, "final "), 4.0);
    assert_eq!(value(&out, "ratio to optimum "), 1.0);
    let tour = TourFile::parse(&std::fs::read_to_string(d.path().join("square4.ga.tour")).unwrap()).unwrap();
    validate_permutation(&tour.order, 4).unwrap();
    let curve = std::fs::read_to_string(d.path().join("square4.ga.curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 502);
}

#[test]
fn seeded_ga_keeps_its_elite() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["generate", "--n", "60", "--seed", "5", "--out", "u60.tsp"]);
    let path = d.path().join("u60.tsp");
    let out = ok(
        d.path(),
        &["solve", "--alg", "ccpnrl-ga", "--subsolver", "held-karp", "--k", "10", "--iters", "100", "--inst",
            path.to_str().unwrap()],
    );
    let elite = value(&out, "elite ");
    assert!(value(&out, "final ") <= elite);
    let inst = parse_tsplib(&std::fs::read(&path).unwrap()).unwrap();
    let tour = TourFile::parse(&std::fs::read_to_string(d.path().join("uniform60_s5.ccpnrl-ga.tour")).unwrap()).unwrap();
    validate_permutation(&tour.order, 60).unwrap();
    assert!(order_length(inst.cities(), &tour.order, DistanceMode::EuclideanExact) <= elite);
}

#[test]
fn seeded_start_is_far_better_than_random_start() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["train", "--steps", "0", "--hidden", "16", "--out", "m.ckpt"]);
    let ck = d.path().join("m.ckpt");
    let common = ["--inst", "uniform:1000:3", "--iters", "0", "--seed", "4"];
    let mut a = vec!["solve", "--alg", "ccpnrl-ga", "--ckpt", ck.to_str().unwrap()];
    a.extend(common);
    let mut b = vec!["solve", "--alg", "ga"];
    b.extend(common);
    let seeded = value(&ok(d.path(), &a), "initial best ");
    let plain = value(&ok(d.path(), &b), "initial best ");
    assert!(seeded < 0.6 * plain, "{seeded} vs {plain}");
}

#[test]
fn bench_and_check() {
    let d = tempfile::tempdir().unwrap();
    let out = ok(
        d.path(),
        &["bench", "--inst", "uniform:40:1", "--alg", "ga", "pso", "--trials", "2", "--pop", "10", "--iters", "5",
            "--workers", "1"],
    );
    assert!(out.contains("uniform40_s1,ga,2,2,"));
    assert!(d.path().join("summary.csv").is_file());
    assert!(d.path().join("curves/uniform40_s1/pso/trial_001.csv").is_file());
    assert_eq!(ok(d.path(), &["check"]).trim(), "ok");
}

#[test]
fn usage_errors_exit_nonzero() {
    let d = tempfile::tempdir().unwrap();
    assert!(!tspcc(d.path(), &["solve", "--alg", "sa", "--inst", "uniform:10:1"]).status.success());
    assert!(!tspcc(d.path(), &["train", "--preset", "huge"]).status.success());
    let o = tspcc(d.path(), &["solve", "--alg", "ccpnrl-ga", "--inst", "uniform:30:1", "--ckpt", "nope.ckpt"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope.ckpt"));
    let o = tspcc(d.path(), &["solve", "--alg", "ga", "--inst", "missing.tsp"]);
    assert!(!o.status.success());
    let o = tspcc(d.path(), &["bench", "--inst", "uniform:10:1", "--trials", "0", "--alg", "ga"]);
    assert!(!o.status.success());
}
