use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use statattr::attractor::{decompose, minimal_alpha_attractor, profiles, BasinConfig};
use statattr::bowen::{run_cycles, LedgerOptions, Regime, SaddleParams};
use statattr::dynamics::{lebesgue_starts, run_orbits, MapSystem, OrbitTrace, Schedule};
use statattr::space::Grid;

fn statattr(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_statattr"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn ok(args: &[&str], out: &Path) {
    let o = statattr(args, out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn cells(v: &Value) -> Vec<usize> {
    v.as_array().unwrap().iter().map(|c| c.as_u64().unwrap() as usize).collect()
}

fn library_traces(map: &str, grid: usize, ics: usize, seed: u64, steps: u64) -> (Grid, Vec<OrbitTrace>) {
    let sys = MapSystem::from_name(map, &BTreeMap::new()).unwrap();
    let grid = Grid::new(sys.space(), grid).unwrap();
    let starts = lebesgue_starts(&grid, ics, seed).unwrap();
    (grid, run_orbits(&sys, &starts, steps, &grid, &Schedule::default()).unwrap())
}

#[test]
fn orbit_counts_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        &["simulate", "--map", "doubling", "--grid", "64", "--ics", "3", "--seed", "9", "--steps", "20000"],
        dir.path(),
    );
    let (_, traces) = library_traces("doubling", 64, 3, 9, 20_000);

    let mut rebuilt: BTreeMap<(usize, u64), Vec<u64>> = BTreeMap::new();
    let mut r = csv::Reader::from_path(dir.path().join("orbits.csv")).unwrap();
    for rec in r.records() {
        let rec = rec.unwrap();
        let id: usize = rec[0].parse().unwrap();
        let n: u64 = rec[1].parse().unwrap();
        let cell: usize = rec[2].parse().unwrap();
        let count: u64 = rec[3].parse().unwrap();
        rebuilt.entry((id, n)).or_insert_with(|| vec![0; 64])[cell] = count;
    }
    let mut expected = BTreeMap::new();
    for (id, t) in traces.iter().enumerate() {
        for acc in t.checkpoints() {
            expected.insert((id, acc.total()), acc.counts().to_vec());
        }
    }
    assert_eq!(rebuilt, expected);
    for ((_, n), counts) in &rebuilt {
        assert_eq!(counts.iter().sum::<u64>(), *n);
    }

    let mut r = csv::Reader::from_path(dir.path().join("snapshots.csv")).unwrap();
    let mut rows = 0;
    for rec in r.records() {
        let rec = rec.unwrap();
        let d: f64 = rec[2].parse().unwrap();
        assert!((0.0..=1.0).contains(&d));
        rows += 1;
    }
    assert_eq!(rows, expected.len());
}

#[test]
fn ledger_floats_round_trip_exactly() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["bowen", "--sigma1", "2", "--sigma2", "4", "--regime", "B", "--cycles", "300"], dir.path());
    let ledger = run_cycles(
        &SaddleParams::new(2.0, 4.0).unwrap(),
        Regime::B,
        300,
        &LedgerOptions::default(),
    )
    .unwrap();
    let mut r = csv::Reader::from_path(dir.path().join("ledger.csv")).unwrap();
    let rows: Vec<_> = r.records().map(|x| x.unwrap()).collect();
    assert_eq!(rows.len(), ledger.samples.len());
    for (rec, s) in rows.iter().zip(&ledger.samples) {
        assert_eq!(rec[0].parse::<usize>().unwrap(), s.visit);
        assert_eq!(rec[1].parse::<f64>().unwrap(), s.ln_n);
        assert_eq!(rec[2].parse::<f64>().unwrap(), s.omega_u1);
        assert_eq!(rec[3].parse::<f64>().unwrap(), s.omega_u2);
    }
}

#[test]
fn attractor_and_decomposition_match_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let base = ["--map", "two_basin", "--grid", "1024", "--ics", "40", "--seed", "3", "--steps", "50000"];
    ok(&[&["attractor"][..], &base, &["--alpha", "0.4"]].concat(), dir.path());
    ok(&[&["decompose"][..], &base, &["--alpha", "0.4"]].concat(), dir.path());

    let (grid, traces) = library_traces("two_basin", 1024, 40, 3, 50_000);
    let ps = profiles(&traces).unwrap();
    let cfg = BasinConfig::for_grid(&grid);

    let a = json(&dir.path().join("attractor.json"));
    let rep = minimal_alpha_attractor(&ps, 0.4, &cfg).unwrap();
    assert_eq!(cells(&a["cells"]), rep.cells.cells());
    assert_eq!(a["basin_fraction"].as_f64().unwrap(), rep.basin_fraction);
    assert_eq!(a["removals"].as_array().unwrap().len(), rep.removals.len());

    let d = json(&dir.path().join("decomposition.json"));
    let dec = decompose(&ps, 0.4, &cfg).unwrap();
    let entries = d["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 2);
    assert_eq!(entries.len(), dec.entries.len());
    for (e, x) in entries.iter().zip(&dec.entries) {
        assert_eq!(cells(&e["cells"]), x.cells.cells());
        assert_eq!(e["basin_fraction"].as_f64().unwrap(), x.basin_fraction);
    }
    assert_eq!(d["covered"].as_f64().unwrap(), dec.covered);
}

#[test]
fn contraction_has_a_single_cell_attractor() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        &["attractor", "--map", "contraction", "--grid", "1024", "--ics", "20", "--steps", "20000", "--alpha", "1"],
        dir.path(),
    );
    assert_eq!(cells(&json(&dir.path().join("attractor.json"))["cells"]), vec![0]);
}

#[test]
fn regime_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["bowen", "--sigma1", "2", "--sigma2", "4", "--regime", "B", "--cycles", "10000"], dir.path());
    let v = json(&dir.path().join("verdict.json"));
    assert_eq!(v["classification"], "convergent_mix");
    assert!((v["t_hat"].as_f64().unwrap() - 2.0 / 3.0).abs() < 0.01);

    ok(&["bowen", "--sigma1", "2", "--sigma2", "2", "--regime", "A", "--cycles", "1000"], dir.path());
    assert_eq!(json(&dir.path().join("verdict.json"))["classification"], "convergent_to_x2");

    ok(&["bowen", "--sigma1", "2", "--sigma2", "2", "--regime", "C", "--cycles", "10"], dir.path());
    let v = json(&dir.path().join("verdict.json"));
    assert_eq!(v["classification"], "oscillatory");
    assert!(v["hi"].as_f64().unwrap() - v["lo"].as_f64().unwrap() > 0.9);
}

#[test]
fn limits_classify_every_initial_condition() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        &["limits", "--map", "two_basin", "--grid", "256", "--ics", "12", "--steps", "100000"],
        dir.path(),
    );
    let v = json(&dir.path().join("srb_like.json"));
    assert_eq!(v["classes"].as_array().unwrap().len(), 12);
    let reps = v["representatives"].as_array().unwrap();
    assert_eq!(reps.len(), 2);
    let weight: f64 = reps.iter().map(|r| r["weight"].as_f64().unwrap()).sum();
    assert!((weight - 1.0).abs() < 1e-12);
}

#[test]
fn run_conf_reproduces_the_run() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    ok(
        &["attractor", "--map", "rotation", "--param", "theta=0.1", "--grid", "128", "--ics", "6", "--steps", "20000", "--alpha", "0.5"],
        a.path(),
    );
    let conf = a.path().join("run.conf");
    ok(&["attractor", "--config", conf.to_str().unwrap()], b.path());
    for f in ["attractor.json", "run.conf"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| statattr(args, dir.path()).status.code().unwrap();
    assert_eq!(code(&["attractor", "--alpha", "1.5"]), 2);
    assert_eq!(code(&["simulate", "--map", "tent"]), 2);
    assert_eq!(code(&["simulate", "--grid", "1000"]), 2);
    assert_eq!(code(&["simulate", "--bogus", "1"]), 2);
    assert_eq!(code(&["bowen", "--regime", "C", "--cycles", "50", "--log-cap", "inf"]), 3);

    let file = dir.path().join("plain");
    std::fs::write(&file, "x").unwrap();
    let o = statattr(&["simulate", "--ics", "1", "--steps", "10"], &file);
    assert_eq!(o.status.code(), Some(2));
}
