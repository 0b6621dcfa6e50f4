//! Acceptance criteria. Run with `cargo test --test acceptance`; prints one
//! PASS/FAIL line per criterion and exits non-zero if any fails.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use hwfatigue::cli::{cmd_analyze, cmd_synth, DataSource, GeneratorArgs, RunConfig, SynthArgs};
use hwfatigue::features::{extract_features, first_difference, saturation_ratio, FeatureOptions};
use hwfatigue::hwdata::{load_dataset, DeviceProfile};
use hwfatigue::report::{
    aggregate, render_fig_data, render_table1, render_table2, FeatureSelector,
};
use hwfatigue::stats::{
    pairwise_session_tests, ranksum, ranksum_exact, ranksum_normal, DEFAULT_EXACT_THRESHOLD,
};
use hwfatigue::synth::{generate_dataset, SynthConfig};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let elapsed = start.elapsed();
    o.detail = format!("{} [{:.2?}]", o.detail, elapsed);
    if let Some(limit) = limit {
        if elapsed > limit {
            o.passed = false;
            o.detail = format!("{} exceeds {:?}", o.detail, limit);
        }
    }
    o
}

fn saturation_oracle() -> Outcome {
    let mut rng = StdRng::seed_from_u64(1);
    let mut mismatches = 0;
    for _ in 0..10_000 {
        let len = rng.random_range(1..=5000);
        let v: Vec<u32> = (0..len).map(|_| rng.random_range(0..=1023)).collect();
        if saturation_ratio(&v, 1023).unwrap() != common::count_saturated(&v, 1023) {
            mismatches += 1;
        }
    }
    outcome(
        mismatches == 0,
        format!("{mismatches} mismatches in 10000 vectors"),
    )
}

fn exact_oracle() -> Outcome {
    let pairs: Vec<(usize, usize)> = (1..=8).flat_map(|a| (1..=8).map(move |b| (a, b))).collect();
    let worst = pairs
        .par_iter()
        .map(|&(na, nb)| {
            let mut rng = StdRng::seed_from_u64((na * 100 + nb) as u64);
            let mut worst: f64 = 0.0;
            for _ in 0..200 {
                // Few distinct levels so most instances carry ties.
                let levels = rng.random_range(2..=5);
                let mut draw = |n| -> Vec<f64> {
                    (0..n)
                        .map(|_| f64::from(rng.random_range(0..levels)))
                        .collect()
                };
                let a = draw(na);
                let b = draw(nb);
                let got = ranksum_exact(&a, &b).unwrap().p_value;
                worst = worst.max((got - common::enumerate_exact_p(&a, &b)).abs());
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    outcome(
        worst < 1e-12,
        format!("max |exact - enumeration| = {worst:e} over 64 size pairs x 200"),
    )
}

fn approximation_quality() -> Outcome {
    let mut rng = StdRng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let shift = f64::from(i % 10) * 0.1;
        let a: Vec<f64> = (0..12).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..12).map(|_| rng.random::<f64>() + shift).collect();
        let d = ranksum_exact(&a, &b).unwrap().p_value - ranksum_normal(&a, &b).unwrap().p_value;
        worst = worst.max(d.abs());
    }
    outcome(
        worst < 0.02,
        format!("max |exact - normal| = {worst:.5} at n=12+12"),
    )
}

fn null_calibration() -> Outcome {
    let mut rng = StdRng::seed_from_u64(4);
    let mut rejections = 0;
    for _ in 0..1000 {
        let a: Vec<f64> = (0..21).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..21).map(|_| rng.random::<f64>()).collect();
        if ranksum(&a, &b).unwrap().p_value < 0.05 {
            rejections += 1;
        }
    }
    let rate = f64::from(rejections) / 1000.0;
    outcome(
        (0.03..=0.07).contains(&rate),
        format!("fraction p < 0.05 = {rate:.3}"),
    )
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn table2_p(table2: &serde_json::Value, task: usize, column: usize) -> f64 {
    table2["table2"]["rows"][task - 1]["cells"][column]["p_value"]
        .as_f64()
        .expect("populated cell")
}

fn analyze_config(source: DataSource, output: PathBuf) -> RunConfig {
    RunConfig {
        source,
        output,
        device: DeviceProfile::default(),
        options: FeatureOptions::default(),
        feature: FeatureSelector::SaturationRatio,
        exact_threshold: DEFAULT_EXACT_THRESHOLD,
        alpha: 0.05,
    }
}

fn paper_finding() -> Outcome {
    const S1_S2: usize = 0;
    const S1_S4: usize = 2;
    let seeds = 100;
    let tmp = tempfile::tempdir().unwrap();
    let mut significant: BTreeMap<usize, usize> = BTreeMap::new();
    let mut null_kept: BTreeMap<usize, usize> = BTreeMap::new();
    let mut joint = 0;
    for seed in 0..seeds {
        let out = tmp.path().join(format!("seed{seed}"));
        let config = analyze_config(
            DataSource::Synth(Box::new(SynthConfig {
                seed,
                ..SynthConfig::default()
            })),
            out.clone(),
        );
        cmd_analyze(&config, &mut Vec::new(), &mut Vec::new()).unwrap();
        let t2 = read_json(&out.join("table2.json"));
        let mut all = true;
        for task in [1, 2, 3, 5] {
            let hit = table2_p(&t2, task, S1_S4) < 0.05;
            all &= hit;
            *significant.entry(task).or_default() += usize::from(hit);
        }
        joint += usize::from(all);
        for task in [4, 6, 7, 8, 9] {
            *null_kept.entry(task).or_default() += usize::from(table2_p(&t2, task, S1_S2) >= 0.05);
        }
    }
    let seeds = seeds as usize;
    let sig_ok = significant.values().all(|&c| c * 100 >= 90 * seeds);
    let null_ok = null_kept.values().all(|&c| c * 100 >= 85 * seeds);
    outcome(
        sig_ok && null_ok,
        format!(
            "S1-S4 p<0.05 per task {significant:?} (all four jointly {joint}/{seeds}); \
             S1-S2 p>=0.05 per task {null_kept:?}"
        ),
    )
}

fn derivative_checks() -> Outcome {
    let mut rng = StdRng::seed_from_u64(6);
    let mut worst_tele: f64 = 0.0;
    let mut worst_lin: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(2..=500);
        let f: Vec<f64> = (0..n).map(|_| rng.random_range(-1000.0..1000.0)).collect();
        let g: Vec<f64> = (0..n).map(|_| rng.random_range(-1000.0..1000.0)).collect();
        let (a, b) = (rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0));
        let df = first_difference(&f).unwrap();
        let dg = first_difference(&g).unwrap();
        let tele = df.iter().sum::<f64>() - (f[n - 1] - f[0]);
        worst_tele = worst_tele.max(tele.abs());
        let combo: Vec<f64> = f.iter().zip(&g).map(|(x, y)| a * x + b * y).collect();
        let dc = first_difference(&combo).unwrap();
        for i in 0..n - 1 {
            worst_lin = worst_lin.max((dc[i] - (a * df[i] + b * dg[i])).abs());
        }
    }
    let paper = first_difference(&[1.0, 3.0, 6.0]).unwrap() == vec![2.0, 3.0];
    outcome(
        worst_tele < 1e-9 && worst_lin < 1e-9 && paper,
        format!("telescoping {worst_tele:e}, linearity {worst_lin:e}, [1,3,6] -> [2,3]: {paper}"),
    )
}

fn round_trip() -> Outcome {
    let mut failures = Vec::new();
    for seed in 0..10 {
        let config = SynthConfig {
            seed,
            ..SynthConfig::default()
        };
        let ds = generate_dataset(&config).unwrap();
        let dir = tempfile::tempdir().unwrap();
        ds.write_to(dir.path()).unwrap();
        let loaded = load_dataset(dir.path(), &config.device).unwrap();
        let same = loaded.len() == ds.len()
            && ds.recordings().all(|r| {
                loaded
                    .get(&r.key())
                    .is_some_and(|l| extract_features(l).unwrap() == extract_features(r).unwrap())
            });
        if !same {
            failures.push(seed);
        }
    }
    outcome(
        failures.is_empty(),
        format!("feature mismatches for seeds {failures:?} of 10"),
    )
}

fn table_shapes() -> Outcome {
    let ds = generate_dataset(&SynthConfig {
        seed: 8,
        ..SynthConfig::default()
    })
    .unwrap();
    let pressure = aggregate(&ds, FeatureSelector::MeanPressure).unwrap();
    let saturation = aggregate(&ds, FeatureSelector::SaturationRatio).unwrap();
    let tests =
        pairwise_session_tests(&saturation.session_values(), DEFAULT_EXACT_THRESHOLD).unwrap();
    let t1 = render_table1(&pressure);
    let t2 = render_table2(&tests.results, 0.05);

    let t2_csv = t2.to_csv();
    let t2_lines: Vec<Vec<&str>> = t2_csv.lines().map(|l| l.split(',').collect()).collect();
    let t2_shape = t2_lines.len() == 10
        && t2_lines[0][1..11]
            == [
                "S1-S2", "S1-S3", "S1-S4", "S1-S5", "S2-S3", "S2-S4", "S2-S5", "S3-S4", "S3-S5",
                "S4-S5",
            ]
        && t2_lines.iter().all(|r| r.len() == 12);
    let t1_csv = t1.to_csv();
    let t1_lines: Vec<Vec<&str>> = t1_csv.lines().map(|l| l.split(',').collect()).collect();
    let t1_shape = t1_lines.len() == 6 && t1_lines.iter().all(|r| r.len() == 10);

    // Recompute every JSON number from the raw per-subject values.
    let mut worst: f64 = 0.0;
    let j1: serde_json::Value = serde_json::from_str(&t1.to_json()).unwrap();
    for s in 1..=5u8 {
        for t in 1..=9u8 {
            let stored = j1["table1"]["rows"][usize::from(s - 1)]["std"][usize::from(t - 1)]
                .as_f64()
                .unwrap();
            let raw = &pressure.get(t, s).values;
            worst = worst.max((stored - common::sample_std(raw)).abs());
        }
    }
    let j2: serde_json::Value = serde_json::from_str(&t2.to_json()).unwrap();
    let pairs = [
        (1, 2),
        (1, 3),
        (1, 4),
        (1, 5),
        (2, 3),
        (2, 4),
        (2, 5),
        (3, 4),
        (3, 5),
        (4, 5),
    ];
    for t in 1..=9u8 {
        for (col, &(a, b)) in pairs.iter().enumerate() {
            let stored = j2["table2"]["rows"][usize::from(t - 1)]["cells"][col]["p_value"]
                .as_f64()
                .unwrap();
            let p = ranksum(&saturation.get(t, a).values, &saturation.get(t, b).values)
                .unwrap()
                .p_value;
            worst = worst.max((stored - p).abs());
        }
    }
    let fig = render_fig_data(&saturation);
    let jf: serde_json::Value = serde_json::from_str(&fig.to_json()).unwrap();
    for (i, row) in jf["figure_data"]["rows"]
        .as_array()
        .unwrap()
        .iter()
        .enumerate()
    {
        let cell = &saturation.cells()[i];
        let mean = cell.values.iter().sum::<f64>() / cell.values.len() as f64;
        worst = worst.max((row["mean"].as_f64().unwrap() - mean).abs());
    }
    let fig_rows = fig.rows.len() == 45;
    outcome(
        t2_shape && t1_shape && fig_rows && worst < 1e-9,
        format!(
            "table2 9x10: {t2_shape}, table1 5x9: {t1_shape}, fig 45 rows: {fig_rows}, \
             max JSON recompute error {worst:e}"
        ),
    )
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.insert(
                    path.strip_prefix(root).unwrap().to_path_buf(),
                    fs::read(&path).unwrap(),
                );
            }
        }
    }
    files
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let synth = |name: &str| {
        let args = SynthArgs {
            output: tmp.path().join(name),
            generator: GeneratorArgs {
                seed: 17,
                ..GeneratorArgs::default()
            },
        };
        let mut stdout = Vec::new();
        cmd_synth(&args, &mut stdout).unwrap();
        (tree(&args.output), stdout)
    };
    let (a, out_a) = synth("a");
    let (b, out_b) = synth("b");
    let synth_same = a == b && out_a == out_b && a.len() == 945;

    let analyze = |name: &str| {
        let out = tmp.path().join(name);
        let config = analyze_config(DataSource::Input(tmp.path().join("a")), out.clone());
        let mut stdout = Vec::new();
        cmd_analyze(&config, &mut stdout, &mut Vec::new()).unwrap();
        (tree(&out), stdout)
    };
    let (x, sx) = analyze("out1");
    let (y, sy) = analyze("out2");
    let analyze_same = x == y && sx == sy && x.len() == 6;
    outcome(
        synth_same && analyze_same,
        format!(
            "synth byte-identical ({} files): {synth_same}, analyze byte-identical: {analyze_same}",
            a.len()
        ),
    )
}

type Criterion = (&'static str, Option<Duration>, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: Vec<Criterion> = vec![
        (
            "1 saturation oracle equivalence",
            Some(Duration::from_secs(5)),
            saturation_oracle,
        ),
        (
            "2 exact rank-sum vs enumeration",
            Some(Duration::from_secs(60)),
            exact_oracle,
        ),
        (
            "3 normal approximation quality",
            None,
            approximation_quality,
        ),
        ("4 null calibration n=21", None, null_calibration),
        (
            "5 synthetic fatigue finding",
            Some(Duration::from_secs(300)),
            paper_finding,
        ),
        ("6 first-difference invariants", None, derivative_checks),
        ("7 file round-trip features", None, round_trip),
        ("8 table shapes and precision", None, table_shapes),
        ("9 determinism", None, determinism),
    ];
    let mut failed = 0;
    for (name, limit, check) in criteria {
        let o = timed(limit, check);
        println!(
            "{} criterion {name}: {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail
        );
        failed += usize::from(!o.passed);
    }
    if failed == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}
