//! Acceptance suite: one PASS/FAIL line per criterion, each checked at its
//! stated tolerance and time budget.

use std::cell::Cell;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRng, TestRunner};

use statattr::attractor::{
    decompose, in_basin, minimal_alpha_attractor, profiles, BasinConfig,
    TailProfile,
};
use statattr::bowen::{
    classify_regime, predicted_t, run_cycles, LedgerOptions, RatioChoice, Regime, RegimeVerdict,
    SaddleParams,
};
use statattr::dynamics::{lebesgue_starts, run_orbits, MapSystem, OrbitTrace, Schedule};
use statattr::empirical::{
    limit_set_classify, srb_like_estimate, visit_frequency, weakstar_dist, EmpiricalAccumulator,
    GriddedMeasure, LimitShape, LimitThresholds,
};
use statattr::space::{CellSet, Grid};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let rng = TestRng::deterministic_rng(config.rng_algorithm);
    TestRunner::new_with_rng(config, rng)
}

fn ensemble(sys: &MapSystem, grid: &Grid, ics: usize, steps: u64, seed: u64) -> Vec<OrbitTrace> {
    let starts = lebesgue_starts(grid, ics, seed).unwrap();
    run_orbits(sys, &starts, steps, grid, &Schedule::default()).unwrap()
}

fn weak_regime(s1: f64, s2: f64) -> Outcome {
    let p = SaddleParams::new(s1, s2).map_err(e2s)?;
    let ledger = run_cycles(&p, Regime::B, 10_000, &LedgerOptions::default()).map_err(e2s)?;
    let oracle = s2.ln() / (s1.ln() + s2.ln());
    let tail = ledger.last_omega_u1().unwrap();
    let formula = predicted_t(s1, s2).map_err(e2s)?;
    ensure((formula - oracle).abs() < 1e-12, format!("closed form {formula} vs {oracle}"))?;
    ensure(
        (tail - oracle).abs() < 0.01,
        format!("({s1},{s2}): tail ω(U₁) {tail:.5} vs {oracle:.5}"),
    )?;
    Ok(format!("({s1},{s2}) ω={tail:.4} t={oracle:.4}"))
}

fn criterion_1() -> Outcome {
    let mut parts = Vec::new();
    for (s1, s2) in [(2.0, 4.0), (3.0, 3.0), (1.5, 8.0)] {
        let t0 = Instant::now();
        parts.push(weak_regime(s1, s2)?);
        ensure(t0.elapsed() < Duration::from_secs(5), format!("({s1},{s2}) over 5 s"))?;
    }
    Ok(parts.join("; "))
}

fn criterion_2() -> Outcome {
    let worst = Cell::new(0.0f64);
    runner(100)
        .run(&(1.0001f64..100.0, 1.0001f64..100.0), |(s1, s2)| {
            let (l1, l2) = (s1.ln(), s2.ln());
            let err = (1.0 / (1.0 + l1 / l2) + 1.0 / (1.0 + l2 / l1) - 1.0).abs();
            worst.set(worst.get().max(err));
            prop_assert!(err < 1e-12, "σ=({}, {}) err {}", s1, s2, err);
            Ok(())
        })
        .map_err(e2s)?;
    Ok(format!("100 pairs, worst {:.1e}", worst.get()))
}

fn criterion_3() -> Outcome {
    let p = SaddleParams::new(2.0, 2.0).map_err(e2s)?;
    let ledger = run_cycles(&p, Regime::A, 1000, &LedgerOptions::default()).map_err(e2s)?;
    let last = ledger.last_omega_u1().unwrap();
    ensure(last < 0.01, format!("final ω(U₁) {last}"))?;
    let ends = ledger.cycle_end_omega_u1();
    let half = &ends[ends.len() / 2..];
    ensure(
        half.windows(2).all(|w| w[1] <= w[0]),
        "cycle-end ω(U₁) not decreasing over the second half",
    )?;
    ensure(
        classify_regime(&ledger).map_err(e2s)? == RegimeVerdict::ConvergentToX2,
        "not classified as convergent to x₂",
    )?;
    Ok(format!("final ω(U₁)={last:.5}"))
}

fn criterion_4() -> Outcome {
    let p = SaddleParams::new(2.0, 2.0).map_err(e2s)?;
    let ledger = run_cycles(&p, Regime::C, 10, &LedgerOptions::default()).map_err(e2s)?;
    ensure(ledger.stays.iter().all(|s| s.cycle <= 10), "more than 10 cycles")?;
    let w: Vec<f64> = ledger.samples.iter().map(|s| s.omega_u1).collect();
    let hi = w.iter().copied().fold(f64::MIN, f64::max);
    let lo = w.iter().copied().fold(f64::MAX, f64::min);
    ensure(hi > 0.95 && lo < 0.05, format!("ω(U₁) spans only [{lo}, {hi}]"))?;
    let class = limit_set_classify(&ledger.tail_measures(), &LimitThresholds::default()).map_err(e2s)?;
    ensure(
        matches!(class.shape, LimitShape::Segment { .. }),
        format!("classified {}", class.shape.name()),
    )?;
    Ok(format!(
        "{} stays, max {hi:.3}, min {lo:.1e}, segment of length {:.3}",
        ledger.stays.len(),
        class.diameter
    ))
}

fn criterion_5() -> Outcome {
    let grid = Grid::interval(1024).map_err(e2s)?;
    let traces = ensemble(&MapSystem::contraction(), &grid, 100, 100_000, 5);
    let ps = profiles(&traces).map_err(e2s)?;
    let cfg = BasinConfig::for_grid(&grid);
    let report = minimal_alpha_attractor(&ps, 1.0, &cfg).map_err(e2s)?;
    let zero = grid.cell_of(0.0);
    ensure(report.cells.cells() == vec![zero], format!("K = {:?}", report.cells.cells()))?;
    let th = LimitThresholds::default();
    let classes = ps.iter().map(|p| p.classify(&th)).collect::<Result<Vec<_>, _>>().map_err(e2s)?;
    let reps = srb_like_estimate(&classes, th.point).map_err(e2s)?;
    ensure(reps.len() == 1, format!("{} representatives", reps.len()))?;
    let delta = GriddedMeasure::point_mass(grid, zero).map_err(e2s)?;
    let d = weakstar_dist(&reps[0].measure, &delta).map_err(e2s)?;
    ensure(d < 0.01, format!("representative at distance {d}"))?;
    Ok(format!("K={{cell {zero}}}, one representative at distance {d:.1e}"))
}

fn criterion_6() -> Outcome {
    let grid = Grid::circle(1024).map_err(e2s)?;
    let sys = MapSystem::two_basin(0.5).map_err(e2s)?;
    let traces = ensemble(&sys, &grid, 200, 1_000_000, 6);
    let ps = profiles(&traces).map_err(e2s)?;
    let d = decompose(&ps, 0.4, &BasinConfig::for_grid(&grid)).map_err(e2s)?;
    ensure(d.entries.len() == 2, format!("{} attractors", d.entries.len()))?;
    ensure(d.covered >= 0.99, format!("covered {}", d.covered))?;
    for e in &d.entries {
        ensure(
            (0.4..=0.6).contains(&e.basin_fraction),
            format!("basin fraction {}", e.basin_fraction),
        )?;
    }
    let desc: Vec<String> = d
        .entries
        .iter()
        .map(|e| format!("{:?}:{:.2}", e.cells.cells(), e.basin_fraction))
        .collect();
    Ok(format!("{} covering {:.3}", desc.join(" "), d.covered))
}

fn criterion_7() -> Outcome {
    let grid = Grid::circle(1024).map_err(e2s)?;
    let traces = ensemble(&MapSystem::doubling(), &grid, 16, 1_000_000, 7);
    let uniform = GriddedMeasure::uniform(grid);
    let instants: Vec<u64> = traces[0].instants();
    let mut mean = vec![0.0; instants.len()];
    for t in &traces {
        for (m, acc) in mean.iter_mut().zip(t.checkpoints()) {
            *m += weakstar_dist(&acc.snapshot().map_err(e2s)?, &uniform).map_err(e2s)? / 16.0;
        }
    }
    let last = *mean.last().unwrap();
    ensure(last < 0.01, format!("mean distance {last} at n = 10⁶"))?;
    // Instants of the form ⌈1000·1.5^k⌉; the appended run end is not one of them.
    let geometric: Vec<u64> = (0..)
        .map(|k| (1000.0 * 1.5f64.powi(k)).ceil() as u64)
        .take_while(|&n| n <= 1_000_000)
        .collect();
    let on_ladder: Vec<f64> = instants
        .iter()
        .zip(&mean)
        .filter(|(n, _)| geometric.contains(n))
        .map(|(_, m)| *m)
        .collect();
    ensure(on_ladder.len() == geometric.len(), "schedule misses geometric instants")?;
    ensure(
        on_ladder.windows(2).all(|w| w[1] < w[0]),
        format!("not decreasing: {on_ladder:?}"),
    )?;
    let ps = profiles(&traces).map_err(e2s)?;
    let report = minimal_alpha_attractor(&ps, 1.0, &BasinConfig::for_grid(&grid)).map_err(e2s)?;
    ensure(report.cells.len() == 1024, format!("{} cells retained", report.cells.len()))?;
    Ok(format!(
        "mean distance {last:.2e} at n = 10⁶, decreasing over {} geometric checkpoints; all 1024 cells retained",
        on_ladder.len()
    ))
}

fn criterion_8() -> Outcome {
    let grid = Grid::interval(1024).map_err(e2s)?;
    let sys = MapSystem::intermittent(1.5).map_err(e2s)?;
    let traces = ensemble(&sys, &grid, 32, 10_000_000, 8);
    let zero = CellSet::from_cells(grid, [grid.cell_of(0.0)]).map_err(e2s)?;
    let mut freqs = traces
        .iter()
        .map(|t| visit_frequency(t, &zero, 0.05).map(|v| v.last().unwrap().1))
        .collect::<Result<Vec<_>, _>>()
        .map_err(e2s)?;
    freqs.sort_by(f64::total_cmp);
    let median = 0.5 * (freqs[15] + freqs[16]);
    ensure(median > 0.9, format!("median {median}"))?;
    Ok(format!("median {median:.4}, min {:.4}", freqs[0]))
}

fn accumulator(grid: Grid, counts: &[u64]) -> EmpiricalAccumulator {
    EmpiricalAccumulator::from_counts(grid, counts.to_vec()).unwrap()
}

/// A trace with checkpoints every `every` steps through `cells`.
fn trace_of(grid: Grid, cells: &[usize], every: usize) -> OrbitTrace {
    let mut acc = EmpiricalAccumulator::new(grid);
    let mut cps = Vec::new();
    for (i, &c) in cells.iter().enumerate() {
        acc.record_cell(c);
        if (i + 1) % every == 0 {
            cps.push(acc.clone());
        }
    }
    OrbitTrace::from_parts(0.5.into(), grid, cps).unwrap()
}

fn cell_set(grid: Grid, mask: &[bool]) -> CellSet {
    CellSet::from_cells(grid, (0..mask.len()).filter(|&i| mask[i])).unwrap()
}

/// Exact totals of the reduced model with integer staying times.
fn exact_totals(s1: f64, s2: f64, l0: f64, k: u64, r: f64, regime: Regime, m: usize) -> [u128; 3] {
    let mut l1 = l0;
    let mut t = [0u128; 3];
    for _ in 0..m {
        t[0] += (l1 / s1.ln()).ceil().max(1.0) as u128;
        t[2] += k as u128;
        let l2 = match regime {
            Regime::A | Regime::C => l1 * l1 + r.ln(),
            Regime::B => l1 + r.ln(),
        };
        t[1] += (l2 / s2.ln()).ceil().max(1.0) as u128;
        t[2] += k as u128;
        l1 = match regime {
            Regime::A => l1 + r.ln(),
            Regime::B => l2 + r.ln(),
            Regime::C => l2 * l2 + r.ln(),
        };
    }
    t
}

fn criterion_9() -> Outcome {
    let g16 = Grid::interval(16).unwrap();
    let counts = || prop::collection::vec(0u64..1000, 16);

    runner(200)
        .run(&(counts(), counts(), counts()), |(a, b, c)| {
            let (a, b, c) = (accumulator(g16, &a), accumulator(g16, &b), accumulator(g16, &c));
            let e = EmpiricalAccumulator::new(g16);
            prop_assert_eq!(a.merge(&e).unwrap(), a.clone());
            prop_assert_eq!(e.merge(&a).unwrap(), a.clone());
            prop_assert_eq!(
                a.merge(&b).unwrap().merge(&c).unwrap(),
                a.merge(&b.merge(&c).unwrap()).unwrap()
            );
            prop_assert_eq!(a.merge(&b).unwrap(), b.merge(&a).unwrap());
            Ok(())
        })
        .map_err(|e| format!("merge laws: {e}"))?;

    runner(200)
        .run(&prop::collection::vec(0usize..16, 1..300), |cells| {
            let mut acc = EmpiricalAccumulator::new(g16);
            for &c in &cells {
                let before = acc.clone();
                acc.record_cell(c);
                let n = acc.total();
                prop_assert_eq!(n, before.total() + 1);
                for j in 0..16 {
                    prop_assert_eq!(acc.counts()[j], before.counts()[j] + u64::from(j == c));
                }
                let nu = acc.snapshot().unwrap();
                for j in 0..16 {
                    prop_assert_eq!(nu.weights()[j], acc.counts()[j] as f64 / n as f64);
                }
            }
            Ok(())
        })
        .map_err(|e| format!("snapshot recursion: {e}"))?;

    let g64 = Grid::circle(64).unwrap();
    let measure = || prop::collection::vec(0u32..100, 64).prop_filter("nonzero", |w| w.iter().any(|&x| x > 0));
    runner(100)
        .run(&(measure(), measure(), measure()), |(a, b, c)| {
            let m = |w: &Vec<u32>| {
                let s: u32 = w.iter().sum();
                GriddedMeasure::from_weights(g64, w.iter().map(|&x| x as f64 / s as f64).collect()).unwrap()
            };
            let (a, b, c) = (m(&a), m(&b), m(&c));
            let d = |x: &GriddedMeasure, y: &GriddedMeasure| weakstar_dist(x, y).unwrap();
            prop_assert!(d(&a, &a).abs() < 1e-12);
            prop_assert!((d(&a, &b) - d(&b, &a)).abs() < 1e-12);
            prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12);
            if a != b {
                prop_assert!(d(&a, &b) > 0.0);
            }
            Ok(())
        })
        .map_err(|e| format!("metric axioms: {e}"))?;

    let g32 = Grid::circle(32).unwrap();
    runner(100)
        .run(
            &(
                prop::collection::vec(0usize..32, 40..400),
                prop::collection::vec(any::<bool>(), 32),
                0.01f64..0.5,
                0.01f64..0.5,
            ),
            |(cells, mask, e1, e2)| {
                prop_assume!(mask.iter().any(|&b| b));
                let t = trace_of(g32, &cells, 20);
                let k = cell_set(g32, &mask);
                let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
                let a = visit_frequency(&t, &k, lo).unwrap();
                let b = visit_frequency(&t, &k, hi).unwrap();
                for ((_, x), (_, y)) in a.iter().zip(&b) {
                    prop_assert!(x <= y);
                }
                Ok(())
            },
        )
        .map_err(|e| format!("ε-monotonicity: {e}"))?;

    let cfg = BasinConfig {
        ladder: vec![0.2, 0.1, 2.0 / 32.0],
        delta_tol: 0.2,
        resolution_tol: Some(0.2),
    };
    let biased = prop_oneof![8 => 10usize..14, 1 => 0usize..32];
    let positive = Cell::new(0u32);
    runner(300)
        .run(
            &(
                prop::collection::vec(biased, 100..400),
                prop::collection::vec(prop::bool::weighted(0.8), 32),
                prop::collection::vec(prop::bool::weighted(0.8), 32),
            ),
            |(cells, m1, m2)| {
                let p = TailProfile::from_trace(&trace_of(g32, &cells, 20)).unwrap();
                let both: Vec<bool> = m1.iter().zip(&m2).map(|(a, b)| *a && *b).collect();
                prop_assume!(both.iter().any(|&b| b));
                let (k1, k2, k12) = (cell_set(g32, &m1), cell_set(g32, &m2), cell_set(g32, &both));
                let v = |k: &CellSet| in_basin(&p, k, &cfg).unwrap().member;
                if v(&k12) {
                    positive.set(positive.get() + 1);
                    prop_assert!(v(&k1) && v(&k2), "intersection law");
                }
                let union = k1.union(&k2).unwrap();
                if v(&k1) {
                    prop_assert!(v(&union), "monotonicity");
                }
                Ok(())
            },
        )
        .map_err(|e| format!("basin laws: {e}"))?;
    let positive = positive.get();
    ensure(positive > 0, "basin laws never exercised a positive verdict")?;

    let grid_c = Grid::circle(256).unwrap();
    let grid_i = Grid::interval(256).unwrap();
    let maps = [
        (MapSystem::doubling(), grid_c),
        (MapSystem::rotation(statattr::dynamics::GOLDEN_ROTATION).unwrap(), grid_c),
        (MapSystem::contraction(), grid_i),
        (MapSystem::intermittent(1.5).unwrap(), grid_i),
        (MapSystem::two_basin(0.5).unwrap(), grid_c),
    ];
    let mut runs = 0;
    for (sys, grid) in &maps {
        let ps = profiles(&ensemble(sys, grid, 24, 20_000, 9)).unwrap();
        let cfg = BasinConfig::for_grid(grid);
        for alpha in [0.15, 0.25, 0.3, 0.4, 0.5, 0.7, 1.0] {
            let d = decompose(&ps, alpha, &cfg).map_err(e2s)?;
            let budget = (1.0 / alpha).floor() as usize + 1;
            ensure(
                d.entries.len() <= budget,
                format!("{} α={alpha}: {} attractors", sys.name(), d.entries.len()),
            )?;
            runs += 1;
        }
    }

    let worst = Cell::new(0.0f64);
    runner(200)
        .run(
            &(1usize..=20, 1.2f64..8.0, 1.2f64..8.0, 2.0f64..=3.0, 0u64..20, 1.0f64..5.0, any::<bool>()),
            |(m, s1, s2, r, k, l0, weak)| {
                let regime = if weak { Regime::B } else { Regime::A };
                let exact = exact_totals(s1, s2, l0, k, r, regime, m);
                prop_assume!(exact.iter().all(|&t| t < 1_000_000 * 40));
                let params = SaddleParams {
                    sigma1: s1,
                    sigma2: s2,
                    initial_log_distance: l0,
                    transit_steps: k,
                    ratio: Some(RatioChoice::Fixed { r }),
                };
                let opts = LedgerOptions {
                    stay_fractions: vec![],
                    ladder: None,
                    ..LedgerOptions::default()
                };
                let l = run_cycles(&params, regime, m, &opts).unwrap();
                for (ln_t, t) in [l.ln_time_u1, l.ln_time_u2, l.ln_time_transit].iter().zip(exact) {
                    if t == 0 {
                        prop_assert_eq!(*ln_t, f64::NEG_INFINITY);
                        continue;
                    }
                    let rel = (ln_t.exp() - t as f64).abs() / t as f64;
                    worst.set(worst.get().max(rel));
                    if rel >= 1e-10 {
                        return Err(TestCaseError::fail(format!("relative error {rel}")));
                    }
                }
                Ok(())
            },
        )
        .map_err(|e| format!("ledger sums: {e}"))?;

    Ok(format!(
        "6 suites; {positive} positive basin cases; {runs} decompositions; ledger worst {:.1e}",
        worst.get()
    ))
}

fn statattr(args: &[&str], out: &Path, workers: usize) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_statattr"))
        .args(args)
        .arg("--out")
        .arg(out)
        .arg("--workers")
        .arg(workers.to_string())
        .status()
        .map_err(e2s)?;
    ensure(status.success(), format!("{args:?} exited with {status}"))
}

fn files_of(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

fn criterion_10() -> Outcome {
    let tmp = tempfile::tempdir().map_err(e2s)?;
    let conf = tmp.path().join("run.conf");
    std::fs::write(&conf, "map = intermittent\nparam.gamma = 1.2\ngrid = 128\nics = 6\nsteps = 20000\nseed = 3\n")
        .map_err(e2s)?;
    let conf = conf.to_string_lossy().into_owned();
    let runs: Vec<Vec<&str>> = vec![
        vec!["simulate", "--map", "doubling", "--grid", "256", "--ics", "8", "--steps", "20000", "--seed", "1"],
        vec!["simulate", "--config", &conf],
        vec!["bowen", "--regime", "B", "--cycles", "2000"],
        vec!["bowen", "--regime", "A", "--cycles", "500", "--ratio-sampled", "true", "--seed", "4"],
        vec!["bowen", "--regime", "C", "--cycles", "10"],
        vec!["attractor", "--map", "contraction", "--grid", "256", "--ics", "20", "--steps", "20000"],
        vec!["attractor", "--config", &conf, "--alpha", "0.5"],
        vec!["decompose", "--map", "two-basin", "--alpha", "0.4", "--grid", "256", "--ics", "40", "--steps", "20000"],
        vec!["limits", "--map", "rotation", "--grid", "256", "--ics", "8", "--steps", "20000"],
    ];
    let mut files = 0;
    for (i, args) in runs.iter().enumerate() {
        let dirs: Vec<_> = [1, 4, 4]
            .iter()
            .enumerate()
            .map(|(j, &w)| {
                let d = tmp.path().join(format!("run{i}-{j}"));
                statattr(args, &d, w).map(|_| d)
            })
            .collect::<Result<_, _>>()?;
        let reference = files_of(&dirs[0]);
        ensure(reference.len() >= 2, format!("{args:?} wrote {} files", reference.len()))?;
        for d in &dirs[1..] {
            let other = files_of(d);
            ensure(reference == other, format!("{args:?}: outputs differ between reruns"))?;
        }
        files += reference.len();
    }
    Ok(format!("{} commands, {files} files byte-identical across worker counts 1/4/4", runs.len()))
}

fn main() {
    let criteria: [(u32, &str, u64, fn() -> Outcome); 10] = [
        (1, "weak regime frequency limit", 15, criterion_1),
        (2, "frequency identity", 1, criterion_2),
        (3, "hyper-dissipative regime A", 5, criterion_3),
        (4, "oscillating regime C", 5, criterion_4),
        (5, "contraction attractor and physical measure", 30, criterion_5),
        (6, "two-basin decomposition", 120, criterion_6),
        (7, "doubling map statistics", 120, criterion_7),
        (8, "intermittent map", 300, criterion_8),
        (9, "property suites", 60, criterion_9),
        (10, "CLI determinism", 60, criterion_10),
    ];
    let mut failed = 0;
    for (n, name, budget, check) in criteria {
        let t0 = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t0.elapsed().as_secs_f64();
        let outcome = match outcome {
            Ok(_) if secs > budget as f64 => Err(format!("took {secs:.1} s, budget {budget} s")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("criterion {n:>2} PASS  {name}: {detail} [{secs:.1} s]"),
            Err(why) => {
                failed += 1;
                println!("criterion {n:>2} FAIL  {name}: {why} [{secs:.1} s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}
