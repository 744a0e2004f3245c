//! Ignored timing probe for game estimation at protocol scale
//! (n ≈ 8848, d = 8, k = 100). Run manually:
//!
//! `cargo test -p sensa --release --test protocol_scale -- --ignored --nocapture`

use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sensa::dataset::{ColumnData, ColumnKind, ColumnSpec, Dataset};
use sensa::estimate::estimate_game;

fn synthetic_scan_dataset(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut age = Vec::with_capacity(n);
    let mut gender = Vec::with_capacity(n);
    let mut start = Vec::with_capacity(n);
    let mut end = Vec::with_capacity(n);
    let mut mas = Vec::with_capacity(n);
    let mut kvp = Vec::with_capacity(n);
    let mut pitch = Vec::with_capacity(n);
    let mut model = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let a = rng.gen_range(0..=18i64);
        let g = rng.gen_range(0..2u32);
        let s = rng.gen_range(1..=120i64);
        let e = s + rng.gen_range(1..=45i64);
        let m = rng.gen_range(4..=505i64);
        let kv = [80i64, 100, 120, 140][rng.gen_range(0..4)];
        let p: f64 = rng.gen_range(0.2..1.75);
        let mo = rng.gen_range(0..12u32);
        let dose = (m as f64 / 100.0) * (kv as f64 / 120.0).powi(2) / p
            * ((e - s) as f64 / 30.0)
            * (1.0 + 0.02 * a as f64)
            * (1.0 + 0.05 * g as f64)
            * (1.0 + 0.01 * mo as f64);
        age.push(a);
        gender.push(g);
        start.push(s);
        end.push(e);
        mas.push(m);
        kvp.push(kv);
        pitch.push(p);
        model.push(mo);
        y.push(dose);
    }
    Dataset::from_parts(
        vec![
            ColumnSpec::input("age", ColumnKind::integer_range(0, 18)),
            ColumnSpec::input("gender", ColumnKind::categorical(&["F", "M"])),
            ColumnSpec::input("start", ColumnKind::integer_range(1, 165)),
            ColumnSpec::input("end", ColumnKind::integer_range(1, 165)),
            ColumnSpec::input("mas", ColumnKind::integer_range(4, 505)),
            ColumnSpec::input("kvp", ColumnKind::integer_set(&[80, 100, 120, 140])),
            ColumnSpec::input("pitch", ColumnKind::numeric_range(0.2, 1.75)),
            ColumnSpec::input(
                "model",
                ColumnKind::categorical(&[
                    "m1", "m2", "m3", "m4", "m5", "m6", "m7", "m8", "m9", "m10", "m11", "m12",
                ]),
            ),
        ],
        vec![
            ColumnData::Integer(age),
            ColumnData::Categorical(gender),
            ColumnData::Integer(start),
            ColumnData::Integer(end),
            ColumnData::Integer(mas),
            ColumnData::Integer(kvp),
            ColumnData::Numeric(pitch),
            ColumnData::Categorical(model),
        ],
        "dose",
        y,
    )
    .unwrap()
}

#[test]
#[ignore]
fn time_full_game_at_protocol_scale() {
    let ds = synthetic_scan_dataset(8848, 99);
    for eps in [0.0f64, 0.5, 1.0, 2.0] {
        let t = Instant::now();
        let game = estimate_game(&ds, 100, eps).unwrap();
        let secs = t.elapsed().as_secs_f64();
        let v_sing: Vec<f64> = (0..8)
            .map(|i| game.value(sensa::game::Coalition::singleton(i)))
            .collect();
        println!("eps = {eps:>4}: {secs:7.2}s  singletons = {v_sing:.4?}");
    }
}

#[test]
#[ignore]
fn time_full_bootstrap_via_resampled_games() {
    use sensa::dataset::subsample_rows;
    use sensa::estimate::estimate_games_resampled;

    let ds = synthetic_scan_dataset(8848, 99);
    let n = ds.n();
    let mut sets: Vec<Vec<usize>> = vec![(0..n).collect()];
    for r in 0..200u64 {
        sets.push(subsample_rows(n, 0.9, 424242 ^ r).unwrap());
    }
    let t = Instant::now();
    let games = estimate_games_resampled(&ds, 100, 0.0, &sets).unwrap();
    let secs = t.elapsed().as_secs_f64();
    println!("201 games (1 full + 200 reps at 0.9): {secs:.1}s");
    let full = &games[0];
    let v_sing: Vec<f64> = (0..8)
        .map(|i| full.value(sensa::game::Coalition::singleton(i)))
        .collect();
    println!("full-data singletons = {v_sing:.4?}");
}

#[test]
#[ignore]
fn ncict_head_brain_allocation_ranking() {
    use sensa::allocations::{allocate, AllocationMethod};
    use sensa::models::{ncict_sample, synth_dose_tables, ExamClass, Organ};

    let tables = synth_dose_tables(2024);
    let ds = ncict_sample(&tables, Organ::Brain, ExamClass::Head, 8848, 77).unwrap();
    let t = Instant::now();
    let game = estimate_game(&ds, 100, 0.0).unwrap();
    println!("game: {:.1}s", t.elapsed().as_secs_f64());
    let names = ds.input_names();
    let dual = game.dual();
    let totals: Vec<f64> = (0..8)
        .map(|i| dual.value(sensa::game::Coalition::singleton(i)))
        .collect();
    println!("total effects (dual singletons):");
    for (n, v) in names.iter().zip(&totals) {
        println!("  {n:>7}: {v:.5}");
    }
    for method in [AllocationMethod::Shapley, AllocationMethod::Pme] {
        let alloc = allocate(&game, method).unwrap();
        let mut order: Vec<usize> = (0..8).collect();
        order.sort_by(|&a, &b| alloc.shares[b].total_cmp(&alloc.shares[a]));
        println!("{:?} ranking:", method);
        for &i in &order {
            println!("  {:>7}: {:.4}", names[i], alloc.shares[i]);
        }
    }
}
