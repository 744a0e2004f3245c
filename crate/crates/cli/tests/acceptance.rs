//! Acceptance suite: ten numbered criteria covering allocation exactness,
//! the estimator benchmarks, the desk-scale protocol run, the dose-model
//! identities, and CLI determinism. Each criterion prints one PASS/FAIL line
//! (visible with `cargo test -p sensa-cli --test acceptance -- --nocapture`).
//!
//! Criteria share one global lock so their runtime budgets are measured on
//! an otherwise idle process.

use std::panic::{catch_unwind, resume_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::Command;
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::{Duration, Instant};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sensa::allocations::{
    allocate, proportional_values_random_order, shapley_from_game, shapley_permutation,
    AllocationMethod, PermutationSampler,
};
use sensa::estimate::{estimate_game, exact_game_discrete, total_sobol_knn, DiscreteModel};
use sensa::game::{Coalition, CooperativeGame};
use sensa::models::{
    ishigami_sample, linear_gaussian_sample, ncict_sample, organ_dose, synth_dose_tables,
    ExamClass, Filter, Gender, Organ, ScanRecord,
};
use sensa::oracle::{proportional_bruteforce, shapley_bruteforce};
use sensa::resampling::{bootstrap_allocations, BootstrapPlan};

const RANDOM_GAMES: usize = 1000;
const EXACTNESS_TOL: f64 = 1e-10;
const EFFICIENCY_TOL: f64 = 1e-9;
const DUAL_INVARIANCE_TOL: f64 = 1e-10;
const DUAL_WITNESS_MIN: f64 = 1e-6;
const EXACT_SHAPLEY_TOL: f64 = 1e-12;
const ESTIMATED_SHAPLEY_RANGE: (f64, f64) = (0.355, 0.455);
const ESTIMATED_PME_MAX: f64 = 0.02;
const TOTAL_SOBOL_TOL: f64 = 0.05;
const NULL_INPUT_TOTAL_MAX: f64 = 0.02;
const DISCRETE_ORACLE_TOL: f64 = 0.05;
const RENORM_SUM_TOL: f64 = 1e-9;
const IDENTITY_REL_TOL: f64 = 1e-12;
const RANDOM_GAME_BUDGET: Duration = Duration::from_secs(30);
const BENCHMARK_BUDGET: Duration = Duration::from_secs(60);
const PROTOCOL_BUDGET: Duration = Duration::from_secs(600);

static GATE: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    GATE.lock().unwrap_or_else(|e| e.into_inner())
}

fn criterion(number: usize, title: &str, body: impl FnOnce()) {
    let _gate = serial();
    let outcome = catch_unwind(AssertUnwindSafe(body));
    println!(
        "criterion {number:2} ({title}): {}",
        if outcome.is_ok() { "PASS" } else { "FAIL" }
    );
    if let Err(panic) = outcome {
        resume_unwind(panic);
    }
}

fn assert_budget(start: Instant, budget: Duration) {
    let elapsed = start.elapsed();
    assert!(
        elapsed < budget,
        "took {:.1} s, budget {:.0} s",
        elapsed.as_secs_f64(),
        budget.as_secs_f64()
    );
}

fn assert_close(a: &[f64], b: &[f64], tol: f64) {
    assert_eq!(a.len(), b.len());
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        assert!(
            (x - y).abs() <= tol,
            "entry {i}: {x} vs {y} (|diff| = {:.3e})",
            (x - y).abs()
        );
    }
}

/// A game with non-negative Möbius masses is monotone; singleton masses are
/// bounded away from zero so every nonempty coalition has positive worth
/// (the random-order weights need that). Worths are scaled to a unit grand
/// coalition.
fn random_monotone_game(rng: &mut ChaCha8Rng) -> CooperativeGame {
    let d: usize = rng.gen_range(2..=6);
    let size = 1usize << d;
    let mut mass = vec![0.0f64; size];
    for (s, m) in mass.iter_mut().enumerate().skip(1) {
        let is_singleton = s & (s - 1) == 0;
        *m = if is_singleton {
            rng.gen_range(0.05..1.0)
        } else {
            rng.gen_range(0.0..1.0)
        };
    }
    let mut values = vec![0.0f64; size];
    for a in 1..size {
        for (s, m) in mass.iter().enumerate().take(a + 1).skip(1) {
            if s & a == s {
                values[a] += m;
            }
        }
    }
    let grand = values[size - 1];
    for v in values.iter_mut().skip(1) {
        *v /= grand;
    }
    values[size - 1] = 1.0;
    CooperativeGame::from_values(d, values).unwrap()
}

fn random_game_suite() -> &'static Vec<CooperativeGame> {
    static SUITE: OnceLock<Vec<CooperativeGame>> = OnceLock::new();
    SUITE.get_or_init(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(0x90_7a3e5);
        (0..RANDOM_GAMES)
            .map(|_| random_monotone_game(&mut rng))
            .collect()
    })
}

#[test]
fn criterion_01_allocation_exactness() {
    criterion(1, "allocation routes agree with brute force", || {
        let start = Instant::now();
        for game in random_game_suite() {
            let moebius = shapley_from_game(game).unwrap().shares;
            let perms = shapley_permutation(game, PermutationSampler::Exhaustive)
                .unwrap()
                .shares;
            let brute = shapley_bruteforce(game).unwrap();
            assert_close(&moebius, &perms, EXACTNESS_TOL);
            assert_close(&moebius, &brute, EXACTNESS_TOL);
            let proportional = proportional_values_random_order(game).unwrap().shares;
            let brute = proportional_bruteforce(game).unwrap();
            assert_close(&proportional, &brute, EXACTNESS_TOL);
        }
        assert_budget(start, RANDOM_GAME_BUDGET);
    });
}

#[test]
fn criterion_02_efficiency_and_non_negativity() {
    criterion(2, "efficiency and non-negativity on monotone games", || {
        for game in random_game_suite() {
            for shares in [
                shapley_from_game(game).unwrap().shares,
                proportional_values_random_order(game).unwrap().shares,
            ] {
                let sum: f64 = shares.iter().sum();
                assert!(
                    (sum - game.grand_value()).abs() <= EFFICIENCY_TOL,
                    "shares sum to {sum}"
                );
                for (i, &s) in shares.iter().enumerate() {
                    assert!(s >= 0.0, "share {i} is {s}");
                }
            }
        }
    });
}

#[test]
fn criterion_03_dual_invariance() {
    criterion(3, "Shapley dual invariance, proportional witness", || {
        let mut worst = 0.0f64;
        for game in random_game_suite() {
            let primal = shapley_from_game(game).unwrap().shares;
            let dual = shapley_from_game(&game.dual()).unwrap().shares;
            for (x, y) in primal.iter().zip(&dual) {
                worst = worst.max((x - y).abs());
            }
        }
        assert!(worst <= DUAL_INVARIANCE_TOL, "max discrepancy {worst:.3e}");

        let game = CooperativeGame::from_values(2, vec![0.0, 0.2, 0.5, 1.0]).unwrap();
        let primal = proportional_values_random_order(&game).unwrap().shares;
        let dual = proportional_values_random_order(&game.dual()).unwrap().shares;
        let discrepancy = primal
            .iter()
            .zip(&dual)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0f64, f64::max);
        assert!(
            discrepancy > DUAL_WITNESS_MIN,
            "proportional values looked dual-invariant ({discrepancy:.3e})"
        );
    });
}

#[test]
fn criterion_04_exogenous_zero_benchmark() {
    criterion(4, "exogenous input: Y = X1 with corr(X1, X2) = 0.9", || {
        let start = Instant::now();
        // Exact game: v({1}) = 1, v({2}) = 0.81.
        let game = CooperativeGame::from_values(2, vec![0.0, 1.0, 0.81, 1.0]).unwrap();
        let shapley = shapley_from_game(&game).unwrap().shares;
        assert_close(&shapley, &[0.595, 0.405], EXACT_SHAPLEY_TOL);
        let pme = allocate(&game, AllocationMethod::Pme).unwrap().shares;
        assert_eq!(pme, vec![1.0, 0.0]);

        // Estimated from data.
        let correlation = vec![vec![1.0, 0.9], vec![0.9, 1.0]];
        let ds = linear_gaussian_sample(10_000, &[1.0, 0.0], &correlation, 41).unwrap();
        let estimated = estimate_game(&ds, 3, 0.0).unwrap();
        let shapley = shapley_from_game(&estimated).unwrap().shares;
        let (lo, hi) = ESTIMATED_SHAPLEY_RANGE;
        assert!(
            (lo..=hi).contains(&shapley[1]),
            "estimated Shapley share of the exogenous input: {}",
            shapley[1]
        );
        let pme = allocate(&estimated, AllocationMethod::Pme).unwrap().shares;
        assert!(
            pme[1] <= ESTIMATED_PME_MAX,
            "estimated PME of the exogenous input: {}",
            pme[1]
        );
        assert_budget(start, BENCHMARK_BUDGET);
    });
}

#[test]
fn criterion_05_knn_total_sobol_accuracy() {
    criterion(5, "kNN total Sobol' accuracy on the Ishigami function", || {
        let start = Instant::now();
        let analytic = [0.5574, 0.4424, 0.2437];
        let ds = ishigami_sample(1 << 13, 7.0, 0.1, 92).unwrap();
        for (i, &target) in analytic.iter().enumerate() {
            let estimate = total_sobol_knn(&ds, Coalition::singleton(i), 3, 0.0).unwrap();
            assert!(
                (estimate - target).abs() <= TOTAL_SOBOL_TOL,
                "input {}: estimate {estimate:.4}, analytic {target}",
                i + 1
            );
        }
        // With b = 0 the third input leaves the model entirely.
        let ds = ishigami_sample(1 << 13, 7.0, 0.0, 92).unwrap();
        let estimate = total_sobol_knn(&ds, Coalition::singleton(2), 3, 0.0).unwrap();
        assert!(
            estimate <= NULL_INPUT_TOTAL_MAX,
            "null input kept a total index of {estimate:.4}"
        );
        assert_budget(start, BENCHMARK_BUDGET);
    });
}

fn random_discrete_model(levels: Vec<usize>, rng: &mut ChaCha8Rng) -> DiscreteModel {
    let atoms: usize = levels.iter().product();
    // Atom probabilities bounded away from zero so 1e5 rows cover every atom.
    let mut probs: Vec<f64> = (0..atoms).map(|_| rng.gen_range(0.2..1.0)).collect();
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    let outputs: Vec<f64> = (0..atoms).map(|_| rng.gen_range(-2.0..2.0)).collect();
    DiscreteModel::new(levels, probs, outputs).unwrap()
}

#[test]
fn criterion_06_estimation_matches_discrete_oracle() {
    criterion(6, "estimates match the exact game on discrete models", || {
        let mut rng = ChaCha8Rng::seed_from_u64(0xd15c);
        for levels in [vec![2, 3], vec![3, 2, 4], vec![2, 3, 2, 3]] {
            let model = random_discrete_model(levels, &mut rng);
            let exact = exact_game_discrete(&model).unwrap();
            let ds = model.sample(100_000, 17).unwrap();
            let estimated = estimate_game(&ds, 3, 0.0).unwrap();
            for mask in 0..exact.values().len() {
                let c = Coalition::from_mask(mask as u32);
                let diff = (estimated.value(c) - exact.value(c)).abs();
                assert!(
                    diff <= DISCRETE_ORACLE_TOL,
                    "d = {}, coalition {c}: |{} - {}| = {diff:.4}",
                    model.d(),
                    estimated.value(c),
                    exact.value(c)
                );
            }
        }
    });
}

fn run_binary(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_sensa"))
        .args(args)
        .output()
        .expect("spawn the CLI")
}

fn temp_path(name: &str) -> PathBuf {
    std::env::temp_dir().join(format!("sensa-acceptance-{}-{name}", std::process::id()))
}

#[test]
fn criterion_07_protocol_at_desk_scale() {
    criterion(7, "bootstrapped organ-dose protocol at desk scale", || {
        let start = Instant::now();
        let config_path = temp_path("protocol.json");
        let out_path = temp_path("protocol-out.json");
        std::fs::write(
            &config_path,
            r#"{"input": {"kind": "ct-scan", "organ": "brain", "exam_class": "head",
                          "n": 8848, "tables_seed": 2024},
                "methods": ["shapley", "pme"], "seed": 77}"#,
        )
        .unwrap();
        let output = run_binary(&[
            "--config",
            config_path.to_str().unwrap(),
            "--preset",
            "ct-protocol",
            "--out-json",
            out_path.to_str().unwrap(),
        ]);
        assert!(
            output.status.success(),
            "CLI failed: {}",
            String::from_utf8_lossy(&output.stderr)
        );
        let text = std::fs::read_to_string(&out_path).unwrap();
        let _ = std::fs::remove_file(&config_path);
        let _ = std::fs::remove_file(&out_path);
        let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(doc["meta"]["n"], 8848);
        assert_eq!(doc["meta"]["d"], 8);
        let results = doc["results"].as_array().unwrap();
        assert_eq!(results.len(), 2);
        for result in results {
            let method = result["method"].as_str().unwrap();
            let inputs = result["inputs"].as_array().unwrap();
            assert_eq!(inputs.len(), 8);
            let sum: f64 = inputs.iter().map(|i| i["estimate"].as_f64().unwrap()).sum();
            assert!(
                (sum - 1.0).abs() <= RENORM_SUM_TOL,
                "{method} shares sum to {sum}"
            );
            for input in inputs {
                let name = input["name"].as_str().unwrap();
                let estimate = input["estimate"].as_f64().unwrap();
                let lo = input["ci_low"].as_f64().unwrap();
                let hi = input["ci_high"].as_f64().unwrap();
                assert!(lo <= hi, "{method} {name}: CI [{lo}, {hi}]");
                if method == "pme" {
                    assert!(estimate >= 0.0, "pme {name} = {estimate}");
                }
            }
            if method == "shapley" {
                for driver in ["mAs", "kVp"] {
                    let rank = inputs
                        .iter()
                        .find(|i| i["name"] == driver)
                        .unwrap_or_else(|| panic!("no input named {driver}"))["rank"]
                        .as_u64()
                        .unwrap();
                    assert!(rank <= 3, "{driver} ranked {rank}");
                }
            }
        }
        assert_budget(start, PROTOCOL_BUDGET);
    });
}

fn random_scan_record(rng: &mut ChaCha8Rng) -> ScanRecord {
    let start = rng.gen_range(1..=164u16);
    ScanRecord {
        age: rng.gen_range(0..=18),
        gender: if rng.gen_bool(0.5) { Gender::F } else { Gender::M },
        start,
        end: rng.gen_range(start + 1..=165),
        mas: rng.gen_range(4..=505),
        kvp: [80, 100, 120, 140][rng.gen_range(0..4)],
        pitch: rng.gen_range(0.2..=1.75),
        model: rng.gen_range(1..=12),
    }
}

fn assert_rel_close(a: f64, b: f64, what: &str) {
    let scale = a.abs().max(b.abs()).max(1.0);
    assert!(
        (a - b).abs() <= IDENTITY_REL_TOL * scale,
        "{what}: {a} vs {b}"
    );
}

#[test]
fn criterion_08_dose_model_identities() {
    criterion(8, "dose identities: slices, mAs, pitch", || {
        let tables = synth_dose_tables(5);
        let mut rng = ChaCha8Rng::seed_from_u64(0xd05e);
        for _ in 0..1000 {
            let rec = random_scan_record(&mut rng);
            let organ = if rng.gen_bool(0.5) {
                Organ::Brain
            } else {
                Organ::RedBoneMarrow
            };
            let filter = if rng.gen_bool(0.5) {
                Filter::Head16
            } else {
                Filter::Body32
            };
            let dose = organ_dose(&rec, organ, filter, &tables).unwrap();

            // Additivity over a split of the scanned range.
            let mid = rng.gen_range(rec.start..rec.end);
            let head = ScanRecord { end: mid, ..rec };
            let tail = ScanRecord {
                start: mid + 1,
                ..rec
            };
            let split = organ_dose(&head, organ, filter, &tables).unwrap()
                + organ_dose(&tail, organ, filter, &tables).unwrap();
            assert_rel_close(dose, split, "slice additivity");

            // dose/mAs is a constant: linearity through the origin.
            let other = ScanRecord {
                mas: rng.gen_range(4..=505),
                ..rec
            };
            let scaled = organ_dose(&other, organ, filter, &tables).unwrap();
            assert_rel_close(
                dose * other.mas as f64,
                scaled * rec.mas as f64,
                "mAs linearity",
            );

            // dose·pitch is a constant: exact inverse proportionality.
            let other = ScanRecord {
                pitch: rng.gen_range(0.2..=1.75),
                ..rec
            };
            let scaled = organ_dose(&other, organ, filter, &tables).unwrap();
            assert_rel_close(dose * rec.pitch, scaled * other.pitch, "pitch inversion");
        }
    });
}

#[test]
fn criterion_09_cli_determinism() {
    criterion(9, "equal seeds produce byte-identical JSON", || {
        let config_path = temp_path("determinism.json");
        std::fs::write(
            &config_path,
            r#"{"input": {"kind": "linear-gaussian", "n": 1500,
                          "weights": [1.0, 0.5, 0.0],
                          "correlation": [[1.0, 0.3, 0.6], [0.3, 1.0, 0.0], [0.6, 0.0, 1.0]]},
                "methods": ["shapley", "pme", "total-sobol"],
                "bootstrap": {"repetitions": 8, "fraction": 0.8},
                "renormalize": true,
                "seed": 314}"#,
        )
        .unwrap();
        let mut payloads = Vec::new();
        for run in 0..2 {
            let out_path = temp_path(&format!("determinism-out-{run}.json"));
            let output = run_binary(&[
                "--config",
                config_path.to_str().unwrap(),
                "--out-json",
                out_path.to_str().unwrap(),
            ]);
            assert!(
                output.status.success(),
                "CLI failed: {}",
                String::from_utf8_lossy(&output.stderr)
            );
            payloads.push(std::fs::read(&out_path).unwrap());
            let _ = std::fs::remove_file(&out_path);
        }
        let _ = std::fs::remove_file(&config_path);
        assert!(!payloads[0].is_empty());
        assert_eq!(payloads[0], payloads[1], "reruns disagree byte-for-byte");
    });
}

#[test]
fn criterion_10_bootstrap_sanity_at_full_fraction() {
    criterion(10, "fraction 1.0 collapses the bootstrap", || {
        let correlation = vec![vec![1.0, 0.4], vec![0.4, 1.0]];
        let ds = linear_gaussian_sample(400, &[1.0, 0.7], &correlation, 23).unwrap();
        let plan = BootstrapPlan::new(12, 1.0, (0.05, 0.95), 99);
        for method in [AllocationMethod::Shapley, AllocationMethod::Pme] {
            let report = bootstrap_allocations(&ds, method, &plan, 3, 0.0).unwrap();
            for rep in &report.repetition_shares {
                assert_eq!(rep, &report.raw_estimate);
            }
            for (interval, &full) in report.intervals.iter().zip(&report.raw_estimate) {
                assert_eq!(interval.ci_low, interval.ci_high, "interval has width");
                assert_eq!(interval.ci_low, full);
                assert_eq!(interval.estimate, full);
            }
        }
    });
}

/// Estimated games may dip below monotone; on the synthetic organ-dose
/// benchmark fewer than 10% of lattice edges may violate by more than 0.02
/// at the default neighbor count.
///
/// The audit is also reported at the protocol-scale neighbor count (k = 100),
/// where the 10% bound does not hold and is not asserted: kNN conditional
/// variances over-smooth as k grows, so large-coalition worths are biased low
/// and adjacent-pair inversions widen with k (measured here: ~9% at k = 3,
/// ~13% at k = 10, ~19% at k = 30, ~31% at k = 100; the violating edges all
/// add low-signal inputs to large coalitions). A loose 40% tripwire guards
/// against estimator regressions at k = 100.
#[test]
fn supplementary_monotonicity_audit_on_organ_dose() {
    let _gate = serial();
    let tables = synth_dose_tables(2024);
    let ds = ncict_sample(&tables, Organ::Brain, ExamClass::Head, 8848, 77).unwrap();

    let game = estimate_game(&ds, 3, 0.0).unwrap();
    let audit = game.monotonicity_audit(0.02);
    println!(
        "supplementary (monotonicity audit, k = 3): {} of {} edges above 0.02, worst drop {:.4}",
        audit.violations, audit.edges, audit.worst_drop
    );
    assert!(
        audit.violation_fraction() < 0.10,
        "{} of {} edges violate (worst drop {:.4})",
        audit.violations,
        audit.edges,
        audit.worst_drop
    );

    let protocol_game = estimate_game(&ds, 100, 0.0).unwrap();
    let protocol_audit = protocol_game.monotonicity_audit(0.02);
    println!(
        "supplementary (monotonicity audit, k = 100, reported): {} of {} edges above 0.02, worst drop {:.4}",
        protocol_audit.violations, protocol_audit.edges, protocol_audit.worst_drop
    );
    assert!(
        protocol_audit.violation_fraction() < 0.40,
        "protocol-scale audit regressed: {} of {} edges violate (worst drop {:.4})",
        protocol_audit.violations,
        protocol_audit.edges,
        protocol_audit.worst_drop
    );
}
