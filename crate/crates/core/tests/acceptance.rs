//! Acceptance run: one PASS/FAIL line per criterion, then a single assertion.
//!
//! Run alone with `cargo test --test acceptance -- --nocapture` to see the
//! measured values. Criteria 8 to 10 train four full-length policies through
//! the `cdiff` binary, so the whole target takes a while.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use composable_diffusion::compose::{compose_cfg, CompositionEntry, CompositionSpec};
use composable_diffusion::models::{
    denoiser_backward, denoiser_loss, Activation, Demonstration, DenoiserArch, DenoiserNet, GaussianDataScore,
    MixtureComponent, MixtureDataScore, QuadraticEnergy, ScoreModel, TrainingSample,
};
use composable_diffusion::sampler::{
    histogram_tv, langevin_ebm_sample, reverse_density_1d, sample_composed, sample_single, DensityGrid,
    LangevinConfig, SamplerConfig,
};
use composable_diffusion::schedule::NoiseSchedule;
use composable_diffusion::trajectory::{Condition, TrajShape, Trajectory};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde_json::Value;

struct Verdict {
    id: u32,
    passed: bool,
    detail: String,
}

fn cdiff(args: &[String]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_cdiff")).args(args).output().expect("spawn cdiff");
    let stderr = String::from_utf8_lossy(&out.stderr);
    if !out.status.success() {
        eprintln!("cdiff {args:?} failed:\n{stderr}");
    }
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into_owned())
}

fn argv(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

/// Reads a samples CSV without going through the library's reader.
fn read_columns(path: &Path) -> Vec<Vec<f64>> {
    let text = fs::read_to_string(path).expect("samples csv");
    let mut lines = text.lines();
    let header = lines.next().expect("header");
    let dims = header.split(',').count() - 1;
    let mut cols = vec![Vec::new(); dims];
    for line in lines {
        for (d, v) in line.split(',').skip(1).enumerate() {
            cols[d].push(v.parse::<f64>().expect("number"));
        }
    }
    cols
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

fn gauss(mean: &[f64], std: f64) -> Arc<dyn ScoreModel> {
    Arc::new(GaussianDataScore::new(mean.to_vec(), std, NoiseSchedule::default()).unwrap())
}

fn sample_two_gaussians(dir: &Path, w1: f64) -> (i32, PathBuf) {
    let w2 = ((1.0 - w1) * 1e10).round() / 1e10;
    let out = dir.join(format!("w1_{w1}"));
    let (code, _) = cdiff(&[
        "sample".into(),
        "--model".into(),
        "gauss:-1,0:0.2".into(),
        "--model".into(),
        "gauss:1,0:0.2".into(),
        "--weights".into(),
        format!("{w1},{w2}"),
        "--chains".into(),
        "10000".into(),
        "--seed".into(),
        "0".into(),
        "--out-dir".into(),
        out.display().to_string(),
    ]);
    (code, out.join("samples.csv"))
}

fn criterion_1(dir: &Path) -> Verdict {
    let t0 = Instant::now();
    let (code, csv) = sample_two_gaussians(dir, 0.5);
    let secs = t0.elapsed().as_secs_f64();
    if code != 0 {
        return Verdict { id: 1, passed: false, detail: format!("cdiff sample exited {code}") };
    }
    let cols = read_columns(&csv);
    let (mx, sx) = mean_std(&cols[0]);
    let (my, sy) = mean_std(&cols[1]);
    let passed = mx.abs() < 0.02 && my.abs() < 0.02 && (sx - 0.2).abs() < 0.05 && (sy - 0.2).abs() < 0.05 && secs < 30.0;
    Verdict {
        id: 1,
        passed,
        detail: format!("mean ({mx:+.4}, {my:+.4}) std ({sx:.4}, {sy:.4}) in {secs:.1}s; tol mean 0.02, std 0.05, 30s"),
    }
}

fn criterion_2(dir: &Path) -> Verdict {
    let t0 = Instant::now();
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for k in 1..=9 {
        let w1 = k as f64 / 10.0;
        let (code, csv) = sample_two_gaussians(dir, w1);
        if code != 0 {
            return Verdict { id: 2, passed: false, detail: format!("cdiff sample exited {code} at w1={w1}") };
        }
        let (mx, _) = mean_std(&read_columns(&csv)[0]);
        let target = w1 * -1.0 + (1.0 - w1) * 1.0;
        worst = worst.max((mx - target).abs());
        parts.push(format!("{mx:+.3}"));
    }
    let secs = t0.elapsed().as_secs_f64();
    Verdict {
        id: 2,
        passed: worst < 0.03 && secs < 180.0,
        detail: format!("x means [{}], worst gap {worst:.4} in {secs:.1}s; tol 0.03, 180s", parts.join(" ")),
    }
}

fn criterion_3() -> Verdict {
    let model = gauss(&[0.3, -0.7], 0.4);
    let mut identical = true;
    for seed in [0u64, 1, 42, 0xdead_beef] {
        let config = SamplerConfig::new(NoiseSchedule::default(), seed, 100);
        let spec = CompositionSpec::mcdp(vec![CompositionEntry::new(model.clone(), None, 1.0)]);
        let composed = sample_composed(&spec, &config).unwrap();
        let single = sample_single(model.as_ref(), None, &config).unwrap();
        identical &= composed.len() == 100
            && composed.iter().zip(&single).all(|(a, b)| {
                a.values().iter().zip(b.values()).all(|(x, y)| x.to_bits() == y.to_bits())
            });
    }
    Verdict { id: 3, passed: identical, detail: "100 chains x 4 seeds, compared bit patterns".into() }
}

fn criterion_4() -> Verdict {
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let u: Vec<f64> = (0..16).map(|_| rng.random_range(-3.0..3.0)).collect();
        let c: Vec<f64> = (0..16).map(|_| rng.random_range(-3.0..3.0)).collect();
        let one = compose_cfg(&u, &[c.clone()], &[1.0]).unwrap();
        let zero = compose_cfg(&u, &[c.clone(), c.clone()], &[0.0, 0.0]).unwrap();
        for i in 0..16 {
            worst = worst.max((one[i] - c[i]).abs()).max((zero[i] - u[i]).abs());
        }
    }
    Verdict { id: 4, passed: worst <= 1e-12, detail: format!("max deviation {worst:e}; tol 1e-12") }
}

fn criterion_5() -> Verdict {
    let t0 = Instant::now();
    let s = NoiseSchedule::default();
    let mixture: Arc<dyn ScoreModel> = Arc::new(
        MixtureDataScore::new(
            vec![
                MixtureComponent { weight: 0.5, mean: vec![-1.0], std: 0.2 },
                MixtureComponent { weight: 0.5, mean: vec![1.0], std: 0.2 },
            ],
            s.clone(),
        )
        .unwrap(),
    );
    let (left, right) = (gauss(&[-1.0], 0.2), gauss(&[1.0], 0.2));
    let mut specs = vec![("gaussian".to_string(), CompositionSpec::single(gauss(&[0.3], 0.2), None))];
    for w in [0.3, 0.5, 0.7] {
        specs.push((
            format!("mcdp w={w}"),
            CompositionSpec::mcdp(vec![
                CompositionEntry::new(left.clone(), None, w),
                CompositionEntry::new(right.clone(), None, 1.0 - w),
            ]),
        ));
    }
    specs.push(("mixture".into(), CompositionSpec::single(mixture, None)));
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (i, (name, spec)) in specs.iter().enumerate() {
        let oracle = reverse_density_1d(spec, &s, &DensityGrid::default()).unwrap();
        let config = SamplerConfig::new(s.clone(), 500 + i as u64, 50_000);
        let xs: Vec<f64> = sample_composed(spec, &config).unwrap().iter().map(|t| t.values()[0]).collect();
        let tv = histogram_tv(&xs, &oracle, 50).unwrap();
        worst = worst.max(tv);
        parts.push(format!("{name} {tv:.4}"));
    }
    let secs = t0.elapsed().as_secs_f64();
    Verdict {
        id: 5,
        passed: worst < 0.05 && secs < 300.0,
        detail: format!("TV [{}] in {secs:.1}s; tol 0.05, 300s", parts.join(", ")),
    }
}

fn criterion_6() -> Verdict {
    let t0 = Instant::now();
    let (lambda, mu_a, mu_b) = (4.0, [-1.0, 0.5], [1.0, 1.5]);
    let energies = [QuadraticEnergy::new(mu_a.to_vec(), lambda).unwrap(), QuadraticEnergy::new(mu_b.to_vec(), lambda).unwrap()];
    let gamma = 0.01;
    let config = SamplerConfig::new(NoiseSchedule::default(), 6, 10_000);
    let xs = langevin_ebm_sample(&energies, &LangevinConfig::new(gamma, 1000), &config).unwrap();
    let precision = 2.0 * lambda;
    let target_var = 2.0 / (precision * (2.0 - gamma * precision));
    let mut ok = true;
    let mut parts = Vec::new();
    for d in 0..2 {
        let target_mean = (lambda * mu_a[d] + lambda * mu_b[d]) / precision;
        let col: Vec<f64> = xs.iter().map(|x| x[d]).collect();
        let (m, s) = mean_std(&col);
        let v = s * s;
        ok &= (m - target_mean).abs() < 0.02 && ((v - target_var) / target_var).abs() < 0.10;
        parts.push(format!("dim {d}: mean {m:+.4} (target {target_mean:+.2}) var {v:.4} (target {target_var:.4})"));
    }
    let secs = t0.elapsed().as_secs_f64();
    Verdict {
        id: 6,
        passed: ok && secs < 60.0,
        detail: format!("{} in {secs:.1}s; tol mean 0.02, var 10%, 60s", parts.join("; ")),
    }
}

fn criterion_7() -> Verdict {
    let t0 = Instant::now();
    let s = NoiseSchedule::default();
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    let mut params = 0;
    for cfg in 0..3 {
        let arch = DenoiserArch {
            horizon: rng.random_range(1..=3),
            action_dim: rng.random_range(1..=2),
            cond_dim: rng.random_range(0..=2),
            hidden: (0..rng.random_range(1..=2)).map(|_| rng.random_range(3..=6)).collect(),
            freqs: rng.random_range(1..=3),
            activation: Activation::Silu,
        };
        let mut net = DenoiserNet::init(arch.clone(), 70 + cfg);
        for p in net.params_mut() {
            *p += rng.random_range(-0.3..0.3);
        }
        let shape = TrajShape::new(arch.horizon, arch.action_dim);
        let normal = |rng: &mut ChaCha20Rng, n: usize| (0..n).map(|_| rng.random_range(-1.5..1.5)).collect::<Vec<f64>>();
        let demos: Vec<Demonstration> = (0..3)
            .map(|_| Demonstration {
                trajectory: Trajectory::new(normal(&mut rng, shape.len()), shape).unwrap(),
                condition: Condition::new("A", normal(&mut rng, arch.cond_dim)).unwrap(),
            })
            .collect();
        let batch: Vec<TrainingSample<'_>> = demos
            .iter()
            .map(|demo| TrainingSample { demo, t: rng.random_range(1..=100), noise: normal(&mut rng, shape.len()) })
            .collect();
        let analytic = denoiser_backward(&net, &s, &batch).unwrap().1.flat();
        let h = 1e-5;
        for k in 0..analytic.len() {
            let shifted = |delta: f64| {
                let mut n = net.clone();
                *n.params_mut().nth(k).unwrap() += delta;
                denoiser_loss(&n, &s, &batch).unwrap()
            };
            let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
            let scale = analytic[k].abs().max(fd.abs()).max(1e-6);
            worst = worst.max((analytic[k] - fd).abs() / scale);
        }
        params += analytic.len();
    }
    let secs = t0.elapsed().as_secs_f64();
    Verdict {
        id: 7,
        passed: worst < 1e-4 && secs < 60.0,
        detail: format!("{params} parameters, worst relative error {worst:.2e} in {secs:.1}s; tol 1e-4, 60s"),
    }
}

struct Sweep {
    grid: Vec<f64>,
    dp1: f64,
    dp2: f64,
    composed: Vec<f64>,
    /// Per-axis RMSE of each unimodal policy's final waypoint, from the episode records.
    rmse: [[f64; 2]; 2],
}

fn train_and_sweep(dir: &Path, family: &str) -> Option<(Sweep, f64)> {
    let t0 = Instant::now();
    let out_dir = dir.display().to_string();
    for m in ["A", "B"] {
        let args = argv(&[
            "train", "--family", family, "--modality", m, "--seed", "0", "--steps", "20000", "--out",
            &format!("{family}_{m}.ckpt"), "--out-dir", &out_dir,
        ]);
        if cdiff(&args).0 != 0 {
            return None;
        }
    }
    let sweep_dir = dir.join(format!("sweep_{family}"));
    let args = argv(&[
        "sweep", "--family", family,
        "--ckpt1", &dir.join(format!("{family}_A.ckpt")).display().to_string(),
        "--ckpt2", &dir.join(format!("{family}_B.ckpt")).display().to_string(),
        "--episodes", "100", "--seeds", "0,1,2,3,4", "--out-dir", &sweep_dir.display().to_string(),
    ]);
    let (code, table) = cdiff(&args);
    if code != 0 {
        return None;
    }
    print!("{table}");
    let sweep: Value = serde_json::from_str(&fs::read_to_string(sweep_dir.join("sweep.json")).ok()?).ok()?;
    let records: Vec<Value> = serde_json::from_str(&fs::read_to_string(sweep_dir.join("episodes.json")).ok()?).ok()?;
    let floats = |v: &Value| v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect::<Vec<_>>();
    let mut sq = [[0.0; 2]; 2];
    for r in &records {
        let goal = floats(&r["goal"]);
        for (p, key) in ["dp1_final", "dp2_final"].iter().enumerate() {
            let fin = floats(&r[*key]);
            for a in 0..2 {
                sq[p][a] += (fin[a] - goal[a]).powi(2);
            }
        }
    }
    let n = records.len() as f64;
    let rmse = sq.map(|axes| axes.map(|s| (s / n).sqrt()));
    Some((
        Sweep {
            grid: floats(&sweep["weight_grid"]),
            dp1: sweep["success_dp1"].as_f64()?,
            dp2: sweep["success_dp2"].as_f64()?,
            composed: floats(&sweep["success_composed"]),
            rmse,
        },
        t0.elapsed().as_secs_f64(),
    ))
}

fn criterion_8(s: &Sweep, secs: f64) -> Verdict {
    let best_uni = s.dp1.max(s.dp2);
    let (k, best) = s.composed.iter().copied().enumerate().fold((0, f64::MIN), |a, (k, r)| if r > a.1 { (k, r) } else { a });
    Verdict {
        id: 8,
        passed: best >= best_uni + 0.10 - 1e-12,
        detail: format!(
            "dp1 {:.3} dp2 {:.3}; best composed {best:.3} at w1={} (gain {:+.3}); train+sweep {secs:.0}s; need gain >= 0.10",
            s.dp1,
            s.dp2,
            s.grid[k],
            best - best_uni
        ),
    }
}

fn criterion_9(s: &Sweep) -> Verdict {
    let best_uni = s.dp1.max(s.dp2);
    // B is the noise modality; weight on it is 1 - w1.
    let noisy: Vec<(f64, f64)> = s.grid.iter().zip(&s.composed).filter(|(w, _)| 1.0 - **w >= 0.9 - 1e-9).map(|(w, r)| (*w, *r)).collect();
    let passed = !noisy.is_empty() && noisy.iter().all(|(_, r)| *r <= best_uni - 0.20 + 1e-12);
    Verdict {
        id: 9,
        passed,
        detail: format!(
            "dp1 {:.3} dp2 {:.3}; composed with >= 0.9 on B: {:?}; need <= best unimodal - 0.20",
            s.dp1, s.dp2, noisy
        ),
    }
}

fn criterion_10(s: &Sweep) -> Verdict {
    let axis = if s.rmse[0][0].min(s.rmse[1][0]) >= s.rmse[0][1].min(s.rmse[1][1]) { 0 } else { 1 };
    let stronger = if s.rmse[0][axis] <= s.rmse[1][axis] { 0 } else { 1 };
    let best = s.composed.iter().copied().fold(f64::MIN, f64::max);
    let argmax: Vec<f64> = s.grid.iter().zip(&s.composed).filter(|(_, r)| **r == best).map(|(w, _)| *w).collect();
    let weight_on = |w1: f64| if stronger == 0 { w1 } else { 1.0 - w1 };
    let passed = argmax.iter().all(|&w| weight_on(w) > 0.5);
    Verdict {
        id: 10,
        passed,
        detail: format!(
            "binding axis {}, stronger there DP{} (rmse {:.3} vs {:.3}); argmax w1 {:?} gives it {:?}; need > 0.5 (seed-sensitive)",
            ["x", "y"][axis],
            stronger + 1,
            s.rmse[stronger][axis],
            s.rmse[1 - stronger][axis],
            argmax,
            argmax.iter().map(|&w| ((weight_on(w)) * 1e10).round() / 1e10).collect::<Vec<_>>()
        ),
    }
}

/// Reruns every manifest under `root` with its recorded arguments and compares output bytes.
fn criterion_11(root: &Path) -> Verdict {
    let mut manifests = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap().flatten() {
            let p = e.path();
            if p.is_dir() {
                stack.push(p);
            } else if p.to_string_lossy().ends_with("manifest.json") {
                manifests.push(p);
            }
        }
    }
    manifests.sort();
    let mut files = 0;
    let mut mismatches = Vec::new();
    for m in &manifests {
        let v: Value = serde_json::from_str(&fs::read_to_string(m).unwrap()).unwrap();
        let args: Vec<String> = v["args"].as_array().unwrap().iter().map(|a| a.as_str().unwrap().to_string()).collect();
        let outputs: Vec<PathBuf> = v["outputs"].as_array().unwrap().iter().map(|o| PathBuf::from(o.as_str().unwrap())).collect();
        let before: BTreeMap<&PathBuf, Vec<u8>> = outputs.iter().map(|o| (o, fs::read(o).unwrap())).collect();
        for o in &outputs {
            fs::remove_file(o).unwrap();
        }
        if cdiff(&args).0 != 0 {
            mismatches.push(format!("{} did not rerun", m.display()));
            continue;
        }
        for (o, bytes) in &before {
            files += 1;
            if fs::read(o).ok().as_ref() != Some(bytes) {
                mismatches.push(o.display().to_string());
            }
        }
    }
    Verdict {
        id: 11,
        passed: mismatches.is_empty() && !manifests.is_empty(),
        detail: format!("{} manifests rerun, {files} files compared, {} differ {:?}", manifests.len(), mismatches.len(), mismatches),
    }
}

#[test]
fn acceptance() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let mut verdicts = vec![
        criterion_1(root),
        criterion_2(root),
        criterion_3(),
        criterion_4(),
        criterion_5(),
        criterion_6(),
        criterion_7(),
    ];
    match train_and_sweep(root, "reach2d_complementary") {
        Some((sweep, secs)) => {
            verdicts.push(criterion_8(&sweep, secs));
            verdicts.push(criterion_10(&sweep));
        }
        None => {
            verdicts.push(Verdict { id: 8, passed: false, detail: "training or sweep failed".into() });
            verdicts.push(Verdict { id: 10, passed: false, detail: "training or sweep failed".into() });
        }
    }
    match train_and_sweep(root, "reach2d_noisyB") {
        Some((sweep, _)) => verdicts.push(criterion_9(&sweep)),
        None => verdicts.push(Verdict { id: 9, passed: false, detail: "training or sweep failed".into() }),
    }
    let report_dir = root.join("report");
    let (code, _) = cdiff(&argv(&[
        "report",
        "--sweep-dir",
        &root.join("sweep_reach2d_complementary").display().to_string(),
        "--out-dir",
        &report_dir.display().to_string(),
    ]));
    assert_eq!(code, 0, "report over the complementary sweep");
    verdicts.push(criterion_11(root));

    verdicts.sort_by_key(|v| v.id);
    // Written past the test harness's capture so the verdicts show in a plain `cargo test`.
    let mut out = std::io::stdout().lock();
    writeln!(out).unwrap();
    for v in &verdicts {
        writeln!(out, "criterion {:>2}: {}  {}", v.id, if v.passed { "PASS" } else { "FAIL" }, v.detail).unwrap();
    }
    drop(out);
    let failed: Vec<u32> = verdicts.iter().filter(|v| !v.passed).map(|v| v.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
