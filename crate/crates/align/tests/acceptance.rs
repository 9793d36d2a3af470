//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! Runs without the libtest harness so the verdict lines are always printed.
//! Criteria 8 and 11 drive the real binary on the standard seeded fixture.

// the small dense solvers read more clearly with explicit indices
#![allow(clippy::needless_range_loop)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use salience_core::emphasis::{emphasis_proportion, BBox};
use salience_core::lrp::{lrp, Rule};
use salience_core::metrics::{cosine_slices, spearman_slices};
use salience_core::nn::{
    glorot_dense, mse_gradient, mse_loss, train_head_from, Conv2d, Dense, DriveLabel, Layer, MaxPool2d, ModelSpec,
    Padding, TrainConfig,
};
use salience_core::spectral::{spectral_residual, SpectralParams};
use salience_core::stats::{anova_oneway, attn_ratio, mann_whitney_two_sided, Computation};
use salience_core::{Heatmap, Shape, Tensor3};
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_salience-align");
const FIXTURE_SEED: &str = "7";
/// Slack allowed below 1 for the random regime's attentive/inattentive ratio.
const RANDOM_RATIO_MARGIN: f64 = 0.02;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- LRP

fn random_cnn(rng: &mut ChaCha8Rng) -> ModelSpec {
    loop {
        let (h, w, c) = (rng.gen_range(4..=16), rng.gen_range(4..=16), rng.gen_range(1..=3));
        let kernel = rng.gen_range(1..=3);
        let padding = if rng.gen_bool(0.5) { Padding::Same } else { Padding::Valid };
        let mut layers = vec![
            Layer::Conv2d(Conv2d::zeros(kernel, kernel, c, rng.gen_range(1..=4), rng.gen_range(1..=2), padding)),
            Layer::Relu,
        ];
        if rng.gen_bool(0.5) {
            layers.push(Layer::MaxPool2d(MaxPool2d { size_h: 2, size_w: 2, stride: 2 }));
        }
        layers.push(if rng.gen_bool(0.5) { Layer::GlobalAveragePool } else { Layer::Flatten });
        let Ok(probe) = ModelSpec::new("probe", Shape::spatial(h, w, c), None, layers.clone()) else {
            continue;
        };
        layers.push(Layer::Dense(Dense::zeros(probe.output_len(), rng.gen_range(1..=3))));
        assert!(layers.len() <= 5);
        let model = ModelSpec::new("toy", Shape::spatial(h, w, c), None, layers).unwrap();
        return model.with_random_weights(rng.gen()).without_bias();
    }
}

fn lrp_conservation() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut checked, mut worst) = (0, 0.0f64);
    while checked < 100 {
        let model = random_cnn(&mut rng);
        let Shape::Spatial { height, width, channels } = model.input_shape() else { unreachable!() };
        let values = (0..height * width * channels).map(|_| rng.gen_range(0.0..1.0)).collect();
        let input = Tensor3::new(height, width, channels, values).unwrap();
        let r = lrp(&model, &input, &vec![1.0; model.output_len()], Rule::Z).map_err(|e| e.to_string())?;
        let seed = r.seed().sum();
        if seed.abs() < 1e-6 {
            continue;
        }
        for layer in &r.per_layer {
            worst = worst.max((layer.sum() - seed).abs() / seed.abs());
        }
        checked += 1;
    }
    let t = start.elapsed();
    check(
        worst <= 1e-6 && t < Duration::from_secs(30),
        format!("{checked} networks, worst relative drift {worst:.2e}, {t:.2?}"),
    )
}

fn lrp_closed_form() -> Outcome {
    let mut d = Dense::zeros(2, 1);
    d.weights = vec![1.0, 3.0];
    let model = ModelSpec::new("dense", Shape::spatial(1, 1, 2), None, vec![Layer::Flatten, Layer::Dense(d)])
        .map_err(|e| e.to_string())?;
    let input = Tensor3::new(1, 1, 2, vec![1.0, 2.0]).unwrap();
    let r = lrp(&model, &input, &[1.0], Rule::Z).map_err(|e| e.to_string())?;
    let got = r.input_relevance().values().to_vec();
    // z_j = 1*1 + 2*3 = 7, R_i = a_i w_i / z_j * 7
    let want = [1.0 * 1.0 / 7.0 * 7.0, 2.0 * 3.0 / 7.0 * 7.0];
    let err = got.iter().zip(want).map(|(g, w)| (g - w).abs()).fold(0.0, f64::max);
    check(err <= 1e-12, format!("input relevance {got:?}, expected [1, 6]"))
}

// ---------------------------------------------------------------- metrics

fn cosine_oracle(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// 2 * #less + #equal + 1 for every value, so tied ranks stay integral.
fn doubled_ranks(v: &[f64]) -> Vec<i128> {
    let mut sorted = v.to_vec();
    sorted.sort_by(f64::total_cmp);
    v.iter()
        .map(|&x| {
            let less = sorted.partition_point(|&y| y < x);
            let not_greater = sorted.partition_point(|&y| y <= x);
            (2 * less + (not_greater - less) + 1) as i128
        })
        .collect()
}

fn spearman_oracle(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (doubled_ranks(a), doubled_ranks(b));
    let n = a.len() as i128;
    let (sa, sb): (i128, i128) = (ra.iter().sum(), rb.iter().sum());
    let cov = n * ra.iter().zip(&rb).map(|(x, y)| x * y).sum::<i128>() - sa * sb;
    let va = n * ra.iter().map(|x| x * x).sum::<i128>() - sa * sa;
    let vb = n * rb.iter().map(|y| y * y).sum::<i128>() - sb * sb;
    cov as f64 / ((va as f64).sqrt() * (vb as f64).sqrt())
}

fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let (mut worst_cos, mut worst_sp, mut min_ties) = (0.0f64, 0.0f64, 1.0f64);
    let mut pairs = 0;
    while pairs < 1000 {
        let len = rng.gen_range(3..=10_000);
        let a: Vec<f64> = (0..len).map(|_| rng.gen_range(0.0..255.0)).collect();
        let b: Vec<f64> = (0..len).map(|_| rng.gen_range(0.0..255.0)).collect();
        let c = cosine_slices(&a, &b).map_err(|e| e.to_string())?;
        worst_cos = worst_cos.max((c - cosine_oracle(&a, &b)).abs());

        // at most 70% distinct values guarantees a 30% tie share
        let levels = rng.gen_range(2..=20).min(len * 7 / 10);
        let ta: Vec<f64> = (0..len).map(|_| rng.gen_range(0..levels) as f64).collect();
        let tb: Vec<f64> = (0..len).map(|_| rng.gen_range(0..levels) as f64).collect();
        let mut distinct = ta.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        let Ok(s) = spearman_slices(&ta, &tb) else { continue };
        min_ties = min_ties.min(1.0 - distinct.len() as f64 / len as f64);
        worst_sp = worst_sp.max((s - spearman_oracle(&ta, &tb)).abs());
        pairs += 1;
    }
    let ten_fourteenths = cosine_slices(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).map_err(|e| e.to_string())?;
    let tie_case = spearman_slices(&[1.0, 2.0, 2.0, 4.0], &[1.0, 2.0, 3.0, 4.0]).map_err(|e| e.to_string())?;
    let examples = (ten_fourteenths - 10.0 / 14.0).abs() < 1e-15 && (tie_case - 3.0 / 10f64.sqrt()).abs() < 1e-15;
    check(
        worst_cos <= 1e-10 && worst_sp <= 1e-10 && min_ties >= 0.3 && examples,
        format!(
            "{pairs} pairs, cosine err {worst_cos:.1e}, spearman err {worst_sp:.1e}, min tie share {min_ties:.2}, worked examples {}",
            if examples { "exact" } else { "off" }
        ),
    )
}

// ---------------------------------------------------------------- statistics

fn enumerated_p(x: &[f64], y: &[f64]) -> f64 {
    let (n, total) = (x.len(), x.len() + y.len());
    let u_of = |mask: u32| -> usize {
        (0..total)
            .filter(|i| mask & (1 << i) != 0)
            .map(|a| (0..a).filter(|b| mask & (1 << b) == 0).count())
            .sum()
    };
    let mut pooled: Vec<(f64, bool)> = x.iter().map(|&v| (v, true)).chain(y.iter().map(|&v| (v, false))).collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
    let observed = u_of(pooled.iter().enumerate().filter(|(_, p)| p.1).fold(0, |m, (i, _)| m | (1 << i)));
    let (mut le, mut ge, mut count) = (0usize, 0usize, 0usize);
    for mask in (0u32..1 << total).filter(|m| m.count_ones() as usize == n) {
        let u = u_of(mask);
        count += 1;
        le += usize::from(u <= observed);
        ge += usize::from(u >= observed);
    }
    (2.0 * le.min(ge) as f64 / count as f64).min(1.0)
}

fn mann_whitney_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let (mut cases, mut worst_p, mut worst_log) = (0, 0.0f64, 0.0f64);
    let mut u_sums_ok = true;
    for _ in 0..400 {
        let n = rng.gen_range(1..=9);
        let m = rng.gen_range(1..=10 - n);
        let mut pool: Vec<f64> = (0..n + m).map(|i| 0.1 + i as f64 * 1.3 + rng.gen_range(0.0..1.0)).collect();
        pool.shuffle(&mut rng);
        let y = pool.split_off(n);
        let r = mann_whitney_two_sided(&pool, &y).map_err(|e| e.to_string())?;
        if r.test.method != Computation::Exact {
            return Err(format!("n={n} m={m} used {:?}", r.test.method));
        }
        worst_p = worst_p.max((r.test.p_value - enumerated_p(&pool, &y)).abs());
        u_sums_ok &= r.u_x + r.u_y == (n * m) as f64;
        let lx: Vec<f64> = pool.iter().map(|v| v.ln()).collect();
        let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
        let logged = mann_whitney_two_sided(&lx, &ly).map_err(|e| e.to_string())?;
        worst_log = worst_log.max((logged.test.p_value - r.test.p_value).abs());
        cases += 1;
    }
    for _ in 0..200 {
        let x: Vec<f64> = (0..rng.gen_range(1..60)).map(|_| (rng.gen_range(1..40) as f64) * 0.25).collect();
        let y: Vec<f64> = (0..rng.gen_range(1..60)).map(|_| (rng.gen_range(1..40) as f64) * 0.25).collect();
        let r = mann_whitney_two_sided(&x, &y).map_err(|e| e.to_string())?;
        u_sums_ok &= r.u_x + r.u_y == (x.len() * y.len()) as f64;
        let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
        let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
        let logged = mann_whitney_two_sided(&lx, &ly).map_err(|e| e.to_string())?;
        worst_log = worst_log.max((logged.test.p_value - r.test.p_value).abs());
    }
    check(
        worst_p == 0.0 && u_sums_ok && worst_log <= 1e-12,
        format!("{cases} exact cases, max |p - enumeration| {worst_p:.1e}, U sums ok {u_sums_ok}, log drift {worst_log:.1e}"),
    )
}

fn anova() -> Outcome {
    let r = anova_oneway(&[vec![1.0, 2.0, 3.0], vec![2.0, 3.0, 4.0], vec![6.0, 7.0, 8.0]]).map_err(|e| e.to_string())?;
    let f_err = (r.test.statistic - 21.0).abs();
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let (mut worst, mut p_ok) = (0.0f64, (0.0..=1.0).contains(&r.test.p_value));
    for _ in 0..100 {
        let a: Vec<f64> = (0..rng.gen_range(2..30)).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let b: Vec<f64> = (0..rng.gen_range(2..30)).map(|_| rng.gen_range(-4.0..6.0)).collect();
        let f = anova_oneway(&[a.clone(), b.clone()]).map_err(|e| e.to_string())?;
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let ss = |v: &[f64]| v.iter().map(|x| (x - mean(v)).powi(2)).sum::<f64>();
        let (na, nb) = (a.len() as f64, b.len() as f64);
        let pooled = (ss(&a) + ss(&b)) / (na + nb - 2.0);
        let t = (mean(&a) - mean(&b)) / (pooled * (1.0 / na + 1.0 / nb)).sqrt();
        worst = worst.max((f.test.statistic - t * t).abs() / (t * t).max(1.0));
        p_ok &= (0.0..=1.0).contains(&f.test.p_value);
    }
    check(
        f_err <= 1e-9 && worst <= 1e-9 && p_ok,
        format!("F = {} (hand value 21), worst |F - t^2| {worst:.1e}, p in [0,1] {p_ok}", r.test.statistic),
    )
}

// ---------------------------------------------------------------- spectral residual

fn gray(side: usize, mut f: impl FnMut(usize, usize) -> f64) -> Tensor3 {
    Tensor3::new(side, side, 1, (0..side * side).map(|i| f(i % side, i / side)).collect()).unwrap()
}

fn spectral_properties() -> Outcome {
    let start = Instant::now();
    let params = SpectralParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let mut worst_dist = 0.0f64;
    for _ in 0..20 {
        let (px, py) = (rng.gen_range(0..64), rng.gen_range(0..64));
        let s = spectral_residual(&gray(64, |x, y| if (x, y) == (px, py) { 255.0 } else { 0.0 }), &params)
            .map_err(|e| e.to_string())?;
        let (ax, ay) = s.argmax();
        let d = |a: usize, b: usize| a.abs_diff(b).min(64 - a.abs_diff(b)) as f64;
        worst_dist = worst_dist.max(d(ax, px).hypot(d(ay, py)));
    }
    let mut worst_ratio = f64::INFINITY;
    for _ in 0..20 {
        let (bx, by) = (8 * rng.gen_range(0..6), rng.gen_range(0..52));
        let inside = move |x: usize, y: usize| (bx..bx + 12).contains(&x) && (by..by + 12).contains(&y);
        let img = gray(64, |x, y| {
            let shift = if inside(x, y) { 4 } else { 0 };
            (if (x + shift) % 8 < 4 { 200.0 } else { 50.0 }) + rng.gen_range(-3.0..3.0)
        });
        let s = spectral_residual(&img, &params).map_err(|e| e.to_string())?;
        let (mut si, mut ni, mut so, mut no) = (0.0, 0, 0.0, 0);
        for y in 0..64 {
            for x in 0..64 {
                if inside(x, y) {
                    si += s.get(x, y);
                    ni += 1;
                } else {
                    so += s.get(x, y);
                    no += 1;
                }
            }
        }
        worst_ratio = worst_ratio.min((si / ni as f64) / (so / no as f64));
    }
    let mut worst_gain = 0.0f64;
    for _ in 0..20 {
        let side = rng.gen_range(40..100);
        let img = gray(side, |_, _| rng.gen_range(0.0..255.0));
        let k = rng.gen_range(0.1..10.0);
        let scaled = Tensor3::new(side, side, 1, img.values().iter().map(|v| v * k).collect()).unwrap();
        let a = spectral_residual(&img, &params).map_err(|e| e.to_string())?;
        let b = spectral_residual(&scaled, &params).map_err(|e| e.to_string())?;
        worst_gain = a.values().iter().zip(b.values()).map(|(p, q)| (p - q).abs()).fold(worst_gain, f64::max);
    }
    let t = start.elapsed();
    check(
        worst_dist <= 3.0 && worst_ratio >= 2.0 && worst_gain <= 1e-6 && t < Duration::from_secs(10),
        format!("impulse offset {worst_dist:.2} px, defect contrast {worst_ratio:.2}, gain drift {worst_gain:.1e}, {t:.2?}"),
    )
}

// ---------------------------------------------------------------- head trainer

fn solve(mut a: Vec<Vec<f64>>, mut r: Vec<f64>) -> Vec<f64> {
    let n = r.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        r.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            r[row] -= f * r[col];
        }
    }
    let mut z = vec![0.0; n];
    for i in (0..n).rev() {
        z[i] = (r[i] - (i + 1..n).map(|k| a[i][k] * z[k]).sum::<f64>()) / a[i][i];
    }
    z
}

fn head_trainer() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    let (dim, n) = (32, 512);
    let w: Vec<f64> = (0..dim * 2).map(|_| rng.gen_range(-0.4..0.4) / dim as f64).collect();
    let bias = [rng.gen_range(0.4..0.6), rng.gen_range(0.4..0.6)];
    let features: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let targets: Vec<DriveLabel> = features
        .iter()
        .map(|x| {
            let y = |o: usize| bias[o] + (0..dim).map(|i| x[i] * w[i * 2 + o]).sum::<f64>();
            DriveLabel::new(y(0), y(1)).unwrap()
        })
        .collect();
    let aug = |x: &[f64], i: usize| if i < dim { x[i] } else { 1.0 };
    let mut gram = vec![vec![0.0; dim + 1]; dim + 1];
    for x in &features {
        for i in 0..=dim {
            for j in 0..=dim {
                gram[i][j] += aug(x, i) * aug(x, j);
            }
        }
    }
    let config = TrainConfig { epochs: 3000, batch_size: n, learning_rate: 1.0, seed: 1, dropout: None };
    let out = train_head_from(Dense::zeros(dim, 2), &features, &targets, &config).map_err(|e| e.to_string())?;
    let mut weight_err = 0.0f64;
    for o in 0..2 {
        let rhs: Vec<f64> = (0..=dim)
            .map(|i| features.iter().zip(&targets).map(|(x, t)| aug(x, i) * t.as_array()[o]).sum())
            .collect();
        let z = solve(gram.clone(), rhs);
        for i in 0..dim {
            weight_err = weight_err.max((out.head.weights[i * 2 + o] - z[i]).abs());
        }
        weight_err = weight_err.max((out.head.bias[o] - z[dim]).abs());
    }
    // once the exact fit is reached the loss sits at rounding level (~1e-32) and jitters there
    let floor = f64::EPSILON * out.loss_trace[0];
    let mut monotone = out.loss_trace.windows(2).all(|p| p[1] <= p[0] + floor);
    let noisy_x: Vec<Vec<f64>> = (0..100).map(|_| (0..6).map(|_| rng.gen_range(0.0..3.0)).collect()).collect();
    let noisy_t: Vec<DriveLabel> = (0..100).map(|_| DriveLabel::new(rng.gen(), rng.gen()).unwrap()).collect();
    let noisy_config = TrainConfig { epochs: 200, batch_size: 100, learning_rate: 0.05, seed: 3, dropout: None };
    let noisy = train_head_from(glorot_dense(6, 2, &mut rng), &noisy_x, &noisy_t, &noisy_config).map_err(|e| e.to_string())?;
    monotone &= noisy.loss_trace.windows(2).all(|p| p[1] <= p[0]);

    let mut worst_fd = 0.0f64;
    for _ in 0..10 {
        let (d, m) = (rng.gen_range(1..10), rng.gen_range(1..30));
        let xs: Vec<Vec<f64>> = (0..m).map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
        let ts: Vec<DriveLabel> = (0..m).map(|_| DriveLabel::new(rng.gen(), rng.gen()).unwrap()).collect();
        let head = glorot_dense(d, 2, &mut rng);
        let all: Vec<usize> = (0..m).collect();
        let grad = mse_gradient(&head, &xs, &ts, &all);
        for (idx, g) in grad.weights.iter().enumerate() {
            let (mut plus, mut minus) = (head.clone(), head.clone());
            plus.weights[idx] += 1e-4;
            minus.weights[idx] -= 1e-4;
            let fd = (mse_loss(&plus, &xs, &ts) - mse_loss(&minus, &xs, &ts)) / 2e-4;
            worst_fd = worst_fd.max((g - fd).abs() / g.abs().max(1e-3));
        }
    }
    check(
        weight_err <= 1e-3 && monotone && worst_fd <= 1e-4,
        format!("max |w - normal equations| {weight_err:.1e}, loss non-increasing {monotone}, gradient check {worst_fd:.1e}"),
    )
}

// ---------------------------------------------------------------- emphasis and ratios

fn emphasis_complement() -> Result<f64, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(109);
    let mut worst = 0.0f64;
    let mut pairs = 0;
    while pairs < 1000 {
        let (w, h) = (rng.gen_range(2..48), rng.gen_range(2..48));
        let values: Vec<f64> = (0..w * h).map(|_| rng.gen_range(0.0..255.0)).collect();
        let hm = Heatmap::new(w, h, values).unwrap();
        let b = BBox::new(rng.gen_range(0.0..w as f64), rng.gen_range(0.0..h as f64), rng.gen_range(0.5..w as f64), rng.gen_range(0.5..h as f64));
        let Ok(inside) = emphasis_proportion(&hm, &b) else { continue };
        let mut outside = 0.0;
        for y in 0..h {
            for x in 0..w {
                let (cx, cy) = (x as f64 + 0.5, y as f64 + 0.5);
                if !(b.x <= cx && cx < b.x + b.w && b.y <= cy && cy < b.y + b.h) {
                    outside += hm.get(x, y);
                }
            }
        }
        worst = worst.max((inside + outside / hm.sum() - 1.0).abs());
        pairs += 1;
    }
    Ok(worst)
}

fn ratio_arithmetic() -> Outcome {
    let a = attn_ratio(0.01337, 0.01297).map_err(|e| e.to_string())?;
    let b = attn_ratio(0.01319, 0.01422).map_err(|e| e.to_string())?;
    check(
        (a - 1.03069).abs() <= 1e-3 && (b - 0.92707).abs() <= 1e-3,
        format!("{a:.5} vs printed 1.03069, {b:.5} vs printed 0.92707"),
    )
}

// ---------------------------------------------------------------- end to end

fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn cli(args: &[&str]) -> Result<String, String> {
    let out = Command::new(BIN).args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?} exited {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr)));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

struct EndToEnd {
    report: Value,
    elapsed: Duration,
    first: BTreeMap<PathBuf, Vec<u8>>,
    second: BTreeMap<PathBuf, Vec<u8>>,
}

/// Generates the standard fixture, runs it with one worker, then again with four.
fn end_to_end(root: &Path) -> Result<EndToEnd, String> {
    let start = Instant::now();
    let fx = root.join("fixture");
    cli(&["fixtures", "--seed", FIXTURE_SEED, "--out", fx.to_str().unwrap()])?;
    let cfg = fx.join("fixture.cfg");
    cli(&["run", "--config", cfg.to_str().unwrap(), "--threads", "1"])?;
    let elapsed = start.elapsed();
    let out_dir = fx.join("report");
    let first = snapshot(&out_dir);
    let text = fs::read_to_string(out_dir.join("report.json")).map_err(|e| e.to_string())?;
    let report: Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    fs::remove_dir_all(&out_dir).map_err(|e| e.to_string())?;
    cli(&["run", "--config", cfg.to_str().unwrap(), "--threads", "4"])?;
    let second = snapshot(&out_dir);
    Ok(EndToEnd { report, elapsed, first, second })
}

fn method<'a>(report: &'a Value, name: &str) -> Result<&'a Value, String> {
    report["summaries"]
        .as_array()
        .and_then(|s| s.iter().find(|m| m["method"] == name))
        .ok_or_else(|| format!("no {name} row in report"))
}

fn qualitative_ordering(run: &EndToEnd) -> Outcome {
    let r = &run.report;
    let frames = r["n_records"].as_u64().unwrap_or(0);
    let driving = method(r, "lrp_driving")?;
    let random = method(r, "lrp_random")?;
    let num = |v: &Value| v.as_f64().ok_or_else(|| format!("missing value in {v}"));
    let (d_med, r_med) = (num(&driving["cosine"]["all"])?, num(&random["cosine"]["all"])?);
    let (d_ratio, r_ratio) = (num(&driving["cosine"]["ratio"])?, num(&random["cosine"]["ratio"])?);
    let p = num(&driving["mann_whitney"]["result"]["p_value"])?;
    let ok = frames >= 500
        && d_med > r_med
        && d_ratio > 1.0
        && 1.0 > r_ratio - RANDOM_RATIO_MARGIN
        && p < 0.05
        && run.elapsed < Duration::from_secs(300);
    check(
        ok,
        format!(
            "{frames} frames; median cosine driving {d_med:.4} vs random {r_med:.4}; ratio driving {d_ratio:.3}, random {r_ratio:.3}; p = {p:.2e}; {:.1?}",
            run.elapsed
        ),
    )
}

fn emphasis_analysis(run: &EndToEnd) -> Outcome {
    let worst = emphasis_complement()?;
    let pair = run.report["emphasis"]
        .as_array()
        .and_then(|e| e.iter().find(|p| p["minuend"] == "lrp_driving" && p["subtrahend"] == "lrp_imagenet"))
        .ok_or("no lrp_driving - lrp_imagenet emphasis in report")?;
    let ranking: Vec<&str> = pair["classes"]
        .as_array()
        .map(|c| c.iter().filter_map(|x| x["class_name"].as_str()).collect())
        .unwrap_or_default();
    check(
        worst <= 1e-9 && ranking.first() == Some(&"traffic light"),
        format!("1000 pairs, worst |inside + outside - 1| {worst:.1e}; driving - imagenet ranking {ranking:?}"),
    )
}

fn determinism(run: &EndToEnd) -> Outcome {
    let differing: Vec<_> = run
        .first
        .keys()
        .chain(run.second.keys())
        .filter(|k| run.first.get(*k) != run.second.get(*k))
        .map(|k| k.display().to_string())
        .collect();
    check(
        differing.is_empty() && run.first.contains_key(Path::new("report.json")),
        format!("{} report files, 1 worker vs 4 workers, differing {differing:?}", run.first.len()),
    )
}

fn main() {
    let root = tempfile::tempdir().expect("temp dir");
    let mut results: Vec<(u8, &str, Outcome)> = vec![
        (1, "LRP conservation", lrp_conservation()),
        (2, "LRP closed form", lrp_closed_form()),
        (3, "metric oracles", metric_oracles()),
        (4, "Mann-Whitney exactness", mann_whitney_exactness()),
        (5, "ANOVA", anova()),
        (6, "spectral residual properties", spectral_properties()),
        (7, "head trainer", head_trainer()),
    ];
    match end_to_end(root.path()) {
        Ok(run) => {
            results.push((8, "end-to-end ordering", qualitative_ordering(&run)));
            results.push((9, "emphasis analysis", emphasis_analysis(&run)));
            results.push((10, "ratio arithmetic", ratio_arithmetic()));
            results.push((11, "determinism", determinism(&run)));
        }
        Err(e) => {
            results.push((8, "end-to-end ordering", Err(e.clone())));
            results.push((9, "emphasis analysis", Err(e.clone())));
            results.push((10, "ratio arithmetic", ratio_arithmetic()));
            results.push((11, "determinism", Err(e)));
        }
    }
    results.sort_by_key(|r| r.0);
    let mut failed = 0;
    for (n, name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("PASS criterion {n}: {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {n}: {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
