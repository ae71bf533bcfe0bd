//! Acceptance suite. Every test prints one `criterion N PASS|FAIL: ...` line
//! before asserting, so `cargo test --test acceptance -- --nocapture` gives
//! a complete scorecard.

use std::process::Command;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stdec::data::{generate_synthetic, prepare, PlantedDrop, SyntheticSpec, WindowedDataset, STEPS_PER_DAY};
use stdec::dec::{
    anomaly_distance, evaluate_heads, kl_row, soft_assign, target_distribution, train, ClusterHead, JointBatch,
    LossWeights, SpatialBatch, TrainConfig, TrainedModel, Variant,
};
use stdec::dtw::{dtw, dtw_bruteforce, DtwConfig, PointCost};
use stdec::metrics::{
    connectivity, disconnectivity, evaluate_run, spearman, welch_t_test, ClusterReport, RunInput,
};
use stdec::nn::{
    central_difference, finite_diff_check, relative_error, Architecture, LossEval, Matrix, Network,
};
use stdec::spatial::{line_lambda, one_hot, SpatialWeights};

fn report(n: usize, pass: bool, details: String) {
    println!("criterion {n} {}: {details}", if pass { "PASS" } else { "FAIL" });
}

fn windows(sensors: usize, days: usize, regions: usize, seed: u64, drops: Vec<PlantedDrop>) -> WindowedDataset {
    let mut spec = SyntheticSpec::with_regions(sensors, days, regions, 0.05, seed).unwrap();
    spec.anomalies = drops;
    let (raw, _) = generate_synthetic(&spec).unwrap();
    prepare(&raw, 12, None).unwrap().train
}

// ---------------------------------------------------------------- 1

const W: usize = 12;
const S: usize = 6;
const K: usize = 5;

struct GradCase {
    net: Network,
    inputs: Matrix,
    targets: Matrix,
    head: ClusterHead,
    p: Matrix,
    snapshot: Matrix,
    points: Vec<(usize, usize)>,
    lambda: SpatialWeights,
}

fn grad_case(seed: u64) -> GradCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Network::from_architecture(&Architecture::traffic_default(W + S, W), seed).unwrap();
    for layer in &mut net.layers {
        for b in &mut layer.bias {
            *b = rng.random_range(-0.5..0.5);
        }
    }
    let timestamps = 2;
    let rows = timestamps * S;
    let mut inputs = Matrix::zeros(rows, W + S);
    let mut targets = Matrix::zeros(rows, W);
    let mut points = Vec::with_capacity(rows);
    for r in 0..rows {
        let (t, i) = (r / S, r % S);
        let x: Vec<f64> = (0..W).map(|_| rng.random_range(-0.5..0.5)).collect();
        inputs.row_mut(r)[..W].copy_from_slice(&x);
        inputs.row_mut(r)[W..].copy_from_slice(&one_hot(i, S).unwrap());
        targets.row_mut(r).copy_from_slice(&x);
        points.push((i, t));
    }
    let latent = net.encode(&inputs).unwrap();
    let scale = latent.as_slice().iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(0.1);
    let centroids: Vec<f64> = (0..K * 4).map(|_| rng.random_range(0.0..scale)).collect();
    let head = ClusterHead::new(Matrix::from_vec(K, 4, centroids).unwrap()).unwrap();
    let p = target_distribution(&soft_assign(&latent, &head).unwrap()).unwrap();
    let snap: Vec<f64> = (0..rows * 4).map(|_| rng.random_range(0.0..scale)).collect();
    GradCase {
        net,
        inputs,
        targets,
        head,
        p,
        snapshot: Matrix::from_vec(rows, 4, snap).unwrap(),
        points,
        lambda: line_lambda(S).unwrap(),
    }
}

impl GradCase {
    fn batch(&self) -> JointBatch<'_> {
        JointBatch {
            inputs: &self.inputs,
            targets: &self.targets,
            p: Some(&self.p),
            spatial: Some(SpatialBatch {
                weights: &self.lambda,
                snapshot: &self.snapshot,
                points: &self.points,
            }),
        }
    }

    fn network_error(&self, weights: &LossWeights) -> f64 {
        let batch = self.batch();
        let objective = |latent: &Matrix, output: &Matrix| {
            let e = evaluate_heads(latent, output, &self.head, &batch, weights)?;
            Ok(LossEval { loss: e.parts.total, output_grad: e.output_grad, latent_grad: e.latent_grad })
        };
        finite_diff_check(&self.net, &objective, &self.inputs, 1e-4).unwrap().max_rel_err
    }

    fn centroid_error(&self, weights: &LossWeights) -> f64 {
        let batch = self.batch();
        let latent = self.net.encode(&self.inputs).unwrap();
        let output = self.net.forward(&self.inputs, stdec::nn::Mode::Eval).unwrap().output;
        let analytic = evaluate_heads(&latent, &output, &self.head, &batch, weights).unwrap().centroid_grad;
        let numeric = central_difference(
            |c| {
                let head = ClusterHead::new(Matrix::from_vec(K, 4, c.to_vec()).unwrap()).unwrap();
                evaluate_heads(&latent, &output, &head, &batch, weights).unwrap().parts.total
            },
            self.head.centroids.as_slice(),
        );
        analytic
            .as_slice()
            .iter()
            .zip(&numeric)
            .map(|(a, n)| relative_error(*a, *n))
            .fold(0.0, f64::max)
    }
}

#[test]
fn gradients_match_finite_differences() {
    let started = std::time::Instant::now();
    let objectives = [
        ("reconstruction", LossWeights::AUTOENCODER),
        ("kl", LossWeights::new(0.0, 1.0, 0.0).unwrap()),
        ("spatial", LossWeights::new(1.0, 0.0, 0.0).unwrap()),
        ("combined", LossWeights::SPATIAL_DEC),
    ];
    let mut worst = vec![0.0_f64; objectives.len()];
    let mut worst_centroid = 0.0_f64;
    for seed in 0..3 {
        let case = grad_case(seed);
        for (slot, (_, w)) in worst.iter_mut().zip(&objectives) {
            *slot = slot.max(case.network_error(w));
        }
        worst_centroid = worst_centroid
            .max(case.centroid_error(&objectives[1].1))
            .max(case.centroid_error(&objectives[3].1));
    }
    let secs = started.elapsed().as_secs_f64();
    let max = worst.iter().copied().fold(worst_centroid, f64::max);
    let pass = max < 1e-4 && secs < 60.0;
    let detail: Vec<String> = objectives.iter().zip(&worst).map(|((n, _), e)| format!("{n} {e:.1e}")).collect();
    report(
        1,
        pass,
        format!("max rel err {} centroids {worst_centroid:.1e} (< 1e-4) in {secs:.1}s (< 60s)", detail.join(", ")),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 2

#[test]
fn formula_hand_values() {
    let head = ClusterHead::new(Matrix::from_rows(&[[0.0], [1.0]]).unwrap()).unwrap();
    let q = soft_assign(&Matrix::from_rows(&[[0.0]]).unwrap(), &head).unwrap();
    let q_err = (q.row(0)[0] - 2.0 / 3.0).abs().max((q.row(0)[1] - 1.0 / 3.0).abs());

    let p = target_distribution(&Matrix::from_rows(&[[0.6, 0.4], [0.2, 0.8]]).unwrap()).unwrap();
    let expect = [[0.7714, 0.2286], [0.0857, 0.9143]];
    let p_err = (0..2)
        .flat_map(|r| (0..2).map(move |c| (r, c)))
        .map(|(r, c)| (p.row(r)[c] - expect[r][c]).abs())
        .fold(0.0, f64::max);

    let kl_self = kl_row(&[0.3, 0.7], &[0.3, 0.7]).abs();
    let kl_err = (kl_row(&[1.0, 0.0], &[0.5, 0.5]) - std::f64::consts::LN_2).abs();

    let pass = q_err <= 1e-12 && p_err <= 1e-4 && kl_self <= 1e-9 && kl_err <= 1e-9;
    report(
        2,
        pass,
        format!("soft assign err {q_err:.1e}, target err {p_err:.1e}, KL(P,P) {kl_self:.1e}, KL ln2 err {kl_err:.1e}"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 3

#[test]
fn dtw_matches_exhaustive_paths() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut mismatches, mut non_monotone, mut asymmetric, mut compared) = (0, 0, 0, 0);
    for _ in 0..1000 {
        let a: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        for cost in [PointCost::SquaredDiff, PointCost::AbsDiff] {
            let mut previous = f64::INFINITY;
            for band in 1..=6 {
                let cfg = DtwConfig::new(band, cost);
                let fast = dtw(&a, &b, &cfg).unwrap();
                if fast.to_bits() != dtw_bruteforce(&a, &b, &cfg).unwrap().to_bits() {
                    mismatches += 1;
                }
                if fast > previous {
                    non_monotone += 1;
                }
                if fast.to_bits() != dtw(&b, &a, &cfg).unwrap().to_bits() {
                    asymmetric += 1;
                }
                previous = fast;
                compared += 1;
            }
        }
    }
    let pass = mismatches == 0 && non_monotone == 0 && asymmetric == 0;
    report(
        3,
        pass,
        format!("{compared} comparisons: {mismatches} differ from brute force, {non_monotone} band violations, {asymmetric} asymmetric"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 4

fn brute_force_scores(grid: &[Vec<usize>]) -> (usize, usize) {
    let (mut s_c, mut s_d) = (0, 0);
    for row in grid {
        for i in 0..row.len() {
            let mut lo = i;
            while lo > 0 && row[lo - 1] == row[i] {
                lo -= 1;
            }
            let mut hi = i;
            while hi + 1 < row.len() && row[hi + 1] == row[i] {
                hi += 1;
            }
            s_c += hi - lo + 1;
            s_d += (0..row.len()).filter(|&j| (j < lo || j > hi) && row[j] == row[i]).count();
        }
    }
    (s_c, s_d)
}

#[test]
fn connectivity_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let s = rng.random_range(1..=10);
        let t = rng.random_range(1..=6);
        let labels = rng.random_range(1..=4);
        let grid: Vec<Vec<usize>> = (0..t).map(|_| (0..s).map(|_| rng.random_range(0..labels)).collect()).collect();
        if (connectivity(&grid).unwrap(), disconnectivity(&grid).unwrap()) != brute_force_scores(&grid) {
            mismatches += 1;
        }
    }
    let s_c = connectivity(&[vec![0, 0, 1, 1, 1]]).unwrap();
    let s_d = disconnectivity(&[vec![0, 1, 0]]).unwrap();
    let pass = mismatches == 0 && s_c == 13 && s_d == 2;
    report(4, pass, format!("{mismatches}/1000 grids differ; s_c([A,A,B,B,B]) = {s_c}, s_d([A,B,A]) = {s_d}"));
    assert!(pass);
}

// ---------------------------------------------------------------- 5

#[test]
fn line_weights_reference_rows() {
    let printed = [
        [0.0, 0.71, 0.42, 0.14, -0.14, -0.42],
        [0.71, 0.0, 0.71, 0.42, 0.14, -0.14],
    ];
    let l = line_lambda(6).unwrap();
    let err = (0..2)
        .flat_map(|r| (0..6).map(move |c| (r, c)))
        .map(|(r, c)| (l.get(r, c) - printed[r][c]).abs())
        .fold(0.0, f64::max);
    let pass = err <= 0.005;
    report(5, pass, format!("rows {:?} / {:?}, max deviation {err:.4} (<= 0.005)", round(l.row(0)), round(l.row(1))));
    assert!(pass);
}

fn round(row: &[f64]) -> Vec<f64> {
    row.iter().map(|v| (v * 1e4).round() / 1e4).collect()
}

// ---------------------------------------------------------------- 6

fn location_ordering(model: &TrainedModel, lambda: &SpatialWeights) -> Option<f64> {
    let s = lambda.sensors();
    let d = model.latents.cols();
    let mut centroids = vec![vec![0.0; d]; s];
    for (r, z) in model.latents.iter_rows().enumerate() {
        for (c, v) in centroids[r % s].iter_mut().zip(z) {
            *c += v;
        }
    }
    let (mut dist, mut dissimilarity) = (Vec::new(), Vec::new());
    for i in 0..s {
        for k in i + 1..s {
            let sq: f64 = centroids[i].iter().zip(&centroids[k]).map(|(a, b)| (a - b).powi(2)).sum();
            dist.push(sq.sqrt());
            dissimilarity.push(1.0 - lambda.get(i, k));
        }
    }
    spearman(&dist, &dissimilarity).ok()
}

#[test]
fn spatial_weight_orders_location_centroids() {
    let started = std::time::Instant::now();
    let data = windows(6, 7, 1, 7, Vec::new());
    let lambda = line_lambda(6).unwrap();
    let rho = |variant, weights, seed| {
        let cfg = TrainConfig { k: 6, weights, seed, ..TrainConfig::default() };
        let model = train(&data, Some(&lambda), &cfg, variant).unwrap();
        location_ordering(&model, &lambda)
    };
    let (mut with, mut without) = (Vec::new(), Vec::new());
    for seed in 0..3 {
        with.push(rho(Variant::Sdec, LossWeights::new(10.0, 0.2, 1.0).unwrap(), seed));
        without.push(rho(Variant::Dec, LossWeights::DEC, seed));
    }
    // an undefined correlation (identical centroids) carries no ordering
    let mean = |v: &[Option<f64>]| v.iter().map(|r| r.unwrap_or(0.0)).sum::<f64>() / v.len() as f64;
    let (m_with, m_without) = (mean(&with), mean(&without));
    let secs = started.elapsed().as_secs_f64();
    let pass = m_with > 0.8 && m_without < 0.5 && secs < 600.0;
    report(
        6,
        pass,
        format!(
            "spearman alpha0=10 {with:.3?} mean {m_with:.3} (> 0.8); alpha0=0 {without:.3?} mean {m_without:.3} (< 0.5); {secs:.0}s (< 600s)"
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 7, 8

struct Directional {
    dec: Vec<ClusterReport>,
    sdec: Vec<ClusterReport>,
    secs: f64,
}

fn directional() -> &'static Directional {
    static RUNS: OnceLock<Directional> = OnceLock::new();
    RUNS.get_or_init(|| {
        let started = std::time::Instant::now();
        let data = windows(12, 14, 3, 7, Vec::new());
        let lambda = line_lambda(12).unwrap();
        let evaluate = |variant, weights, seed| {
            let cfg = TrainConfig { k: 6, weights, seed, ..TrainConfig::default() };
            let model = train(&data, Some(&lambda), &cfg, variant).unwrap();
            let run = RunInput {
                model: variant.name().to_string(),
                fingerprint: None,
                labels: &model.assignments.hard,
                k: 6,
                sensors: 12,
                windows: data.series(),
                latents: &model.latents,
                window_len: 12,
            };
            evaluate_run(&run, &DtwConfig::default()).unwrap()
        };
        let mut out = Directional { dec: Vec::new(), sdec: Vec::new(), secs: 0.0 };
        for seed in 0..3 {
            out.dec.push(evaluate(Variant::Dec, LossWeights::DEC, seed));
            out.sdec.push(evaluate(Variant::Sdec, LossWeights::SPATIAL_DEC, seed));
        }
        out.secs = started.elapsed().as_secs_f64();
        out
    })
}

fn mean_of(reports: &[ClusterReport], f: impl Fn(&ClusterReport) -> f64) -> f64 {
    reports.iter().map(f).sum::<f64>() / reports.len() as f64
}

#[test]
fn spatial_model_improves_connectivity() {
    let runs = directional();
    let conn = |r: &ClusterReport| r.connectivity_normalized;
    let disc = |r: &ClusterReport| r.disconnectivity_normalized;
    let comp = |r: &ClusterReport| r.compactness_normalized;
    let (c_dec, c_sdec) = (mean_of(&runs.dec, conn), mean_of(&runs.sdec, conn));
    let (d_dec, d_sdec) = (mean_of(&runs.dec, disc), mean_of(&runs.sdec, disc));
    let (m_dec, m_sdec) = (mean_of(&runs.dec, comp), mean_of(&runs.sdec, comp));
    let pass = c_sdec > c_dec && d_sdec < d_dec && m_sdec <= 1.15 * m_dec && runs.secs < 1200.0;
    report(
        7,
        pass,
        format!(
            "connectivity sdec {c_sdec:.3} vs dec {c_dec:.3}; dis-connectivity sdec {d_sdec:.3} vs dec {d_dec:.3}; \
             compactness sdec {m_sdec:.4} vs 1.15 x dec {:.4}; {:.0}s (< 1200s)",
            1.15 * m_dec,
            runs.secs
        ),
    );
    assert!(pass);
}

#[test]
fn spatial_metric_difference_is_significant() {
    let textbook = welch_t_test(&[0.0, 1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
    let textbook_ok =
        (textbook.t + 1.0).abs() < 1e-12 && (textbook.df - 8.0).abs() < 1e-9 && (textbook.p - 0.347).abs() < 1e-3;

    let runs = directional();
    let pooled = |reports: &[ClusterReport]| -> Vec<f64> {
        reports.iter().flat_map(|r| r.spatial_metric_series.iter().copied()).collect()
    };
    let test = welch_t_test(&pooled(&runs.sdec), &pooled(&runs.dec)).ok();
    let significant = test.is_some_and(|t| t.p < 0.05);
    let pass = textbook_ok && significant;
    let observed = match test {
        Some(t) => format!("t = {:.3}, df = {:.0}, p = {:.3e}", t.t, t.df, t.p),
        None => "undefined (both series constant)".to_string(),
    };
    report(
        8,
        pass,
        format!(
            "sdec vs dec s_m over 3 seeds: {observed} (< 0.05); textbook t = {:.3}, df = {:.3}, p = {:.4}",
            textbook.t, textbook.df, textbook.p
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 9

#[test]
fn training_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_stdec"))
            .args(["train", "--synthetic", "sensors=6,days=2,regions=2,noise=0.05,seed=7"])
            .args(["--variant", "sdec", "--k", "6", "--seed", "11", "--out"])
            .arg(&out)
            .env_remove("STDEC_SEED")
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        std::fs::read(out.join("assignments.csv")).unwrap()
    };
    let (a, b) = (run("a"), run("b"));
    let pass = !a.is_empty() && a == b;
    report(9, pass, format!("assignment files of {} and {} bytes identical: {}", a.len(), b.len(), a == b));
    assert!(pass);
}

// ---------------------------------------------------------------- 10

#[test]
fn planted_drop_ranks_high() {
    let (sensor, start, len) = (4, 2 * STEPS_PER_DAY + 120, 12);
    let drop = PlantedDrop { sensor, start, len, factor: 0.2 };
    let data = windows(12, 14, 3, 7, vec![drop]);
    let cfg = TrainConfig { k: 6, seed: 0, ..TrainConfig::default() };
    let model = train(&data, Some(&line_lambda(12).unwrap()), &cfg, Variant::Sdec).unwrap();
    let grid = anomaly_distance(&model.assignments, &model.latents, &model.head, 12).unwrap();

    // every window that contains a dropped timestamp
    let first = start + 1 - data.window();
    let cells: Vec<f64> = (first..start + len).map(|t| grid.row(t)[sensor]).collect();
    let all = grid.as_slice();
    let top_share = |v: f64| all.iter().filter(|&&x| x > v).count() as f64 / all.len() as f64;
    let ranks: Vec<f64> = cells.iter().map(|&v| top_share(v)).collect();
    let in_top = ranks.iter().filter(|&&r| r < 0.05).count();
    let pass = in_top == cells.len();
    report(
        10,
        pass,
        format!(
            "{in_top}/{} drop cells in the top 5% of {} grid values; best {:.2}%, worst {:.2}% from the top",
            cells.len(),
            all.len(),
            100.0 * ranks.iter().copied().fold(1.0, f64::min),
            100.0 * ranks.iter().copied().fold(0.0, f64::max)
        ),
    );
    assert!(pass);
}
