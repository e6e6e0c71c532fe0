//! Checks shared by the property suite and the acceptance run.
#![allow(dead_code)]

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use rand::seq::SliceRandom;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use normnet::datasets::{generate_group_set, generate_pearson_style_set, GenSpec, LabeledDataset};
use normnet::distributions::{DistributionSpec, Group};
use normnet::evaluation::{confusion_metrics, optimal_threshold, reliability, roc};
use normnet::exec::Exec;
use normnet::features::descriptor;
use normnet::normality::{
    ad_modified, anderson_darling, cramer_von_mises, fssd_test, jarque_bera, lilliefors, lilliefors_statistic,
    shapiro_wilk, EdfConvention, FssdConfig, LillieforsConfig,
};
use normnet::rng::RandomStream;

type Check = Result<(), TestCaseError>;

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

pub fn sample(min: usize, max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0..50.0f64, min..=max)
}

pub fn affine() -> impl Strategy<Value = (f64, f64)> {
    (0.01..100.0f64, -1000.0..1000.0f64)
}

fn map(x: &[f64], a: f64, b: f64) -> Vec<f64> {
    x.iter().map(|v| a * v + b).collect()
}

pub fn statistics_affine(x: &[f64], a: f64, b: f64) -> Check {
    let y = map(x, a, b);
    let tol = 1e-9;
    let sw = (shapiro_wilk(x).unwrap().statistic, shapiro_wilk(&y).unwrap().statistic);
    prop_assert!(rel_close(sw.0, sw.1, tol), "SW {:?}", sw);
    for c in [EdfConvention::Classical, EdfConvention::Literal] {
        let lf = (lilliefors_statistic(x, c).unwrap(), lilliefors_statistic(&y, c).unwrap());
        prop_assert!(rel_close(lf.0, lf.1, tol), "LF {:?}", lf);
    }
    let ad = (anderson_darling(x).unwrap().statistic, anderson_darling(&y).unwrap().statistic);
    prop_assert!(rel_close(ad.0, ad.1, tol), "AD {:?}", ad);
    let n = x.len();
    prop_assert!(rel_close(ad_modified(ad.0, n), ad_modified(ad.1, n), tol));
    let cvm = (cramer_von_mises(x).unwrap(), cramer_von_mises(&y).unwrap());
    prop_assert!(rel_close(cvm.0, cvm.1, tol), "CVM {:?}", cvm);
    for adjusted in [false, true] {
        let jb = (jarque_bera(x, adjusted).unwrap().statistic, jarque_bera(&y, adjusted).unwrap().statistic);
        prop_assert!(rel_close(jb.0, jb.1, tol), "JB {:?}", jb);
    }
    Ok(())
}

pub fn descriptor_affine(x: &[f64], a: f64, b: f64, q: f64) -> Check {
    prop_assume!(x.len() as f64 >= 1.0 / q / 10.0);
    let dx = descriptor(x, q).unwrap();
    let dy = descriptor(&map(x, a, b), q).unwrap();
    for (u, v) in dx.quantiles.iter().zip(&dy.quantiles) {
        prop_assert!(rel_close(*u, *v, 1e-9), "{} vs {}", u, v);
    }
    Ok(())
}

/// FSSD at a fixed seed: the p-value is unchanged and the statistic carries
/// the inverse squared scale.
pub fn fssd_affine(x: &[f64], a: f64, b: f64, seed: u64) -> Check {
    let cfg = FssdConfig { null_sims: 100, ..FssdConfig::default() };
    let px = fssd_test(x, &cfg, &mut RandomStream::new(seed)).unwrap();
    let py = fssd_test(&map(x, a, b), &cfg, &mut RandomStream::new(seed)).unwrap();
    prop_assert_eq!(px.p_value, py.p_value);
    prop_assert!(rel_close(px.statistic, py.statistic * a * a, 1e-9));
    Ok(())
}

pub fn mann_whitney_points() -> impl Strategy<Value = Vec<(u8, bool, bool)>> {
    prop::collection::vec((0u8..25, any::<bool>(), any::<bool>()), 2..1000)
}

pub fn auroc_mann_whitney(points: &[(u8, bool, bool)]) -> Check {
    // Half the scores come from a coarse grid so ties are common.
    let scores: Vec<f64> = points
        .iter()
        .enumerate()
        .map(|(i, &(s, _, coarse))| if coarse { s as f64 } else { s as f64 + (i as f64 * 0.618_034).fract() })
        .collect();
    let labels: Vec<u8> = points.iter().map(|&(_, l, _)| l as u8).collect();
    let pos: Vec<f64> = scores.iter().zip(&labels).filter(|(_, &l)| l == 1).map(|(s, _)| *s).collect();
    let neg: Vec<f64> = scores.iter().zip(&labels).filter(|(_, &l)| l == 0).map(|(s, _)| *s).collect();
    prop_assume!(!pos.is_empty() && !neg.is_empty());
    let mut u = 0.0;
    for p in &pos {
        for q in &neg {
            u += if p > q { 1.0 } else if p == q { 0.5 } else { 0.0 };
        }
    }
    let oracle = u / (pos.len() * neg.len()) as f64;
    let auroc = roc(&scores, &labels).unwrap().auroc;
    prop_assert!((auroc - oracle).abs() < 1e-10, "{} vs {}", auroc, oracle);
    Ok(())
}

pub fn threshold_points() -> impl Strategy<Value = Vec<(f64, bool)>> {
    prop::collection::vec((0.0..1.0f64, any::<bool>()), 2..400)
}

pub fn optimal_threshold_minimal(points: &[(f64, bool)]) -> Check {
    let scores: Vec<f64> = points.iter().map(|p| (p.0 * 20.0).round() / 20.0).collect();
    let labels: Vec<u8> = points.iter().map(|p| p.1 as u8).collect();
    prop_assume!(labels.contains(&0) && labels.contains(&1));
    let curve = roc(&scores, &labels).unwrap();
    let best = optimal_threshold(&curve);
    let d = |fpr: f64, tpr: f64| fpr.hypot(1.0 - tpr);
    prop_assert!(curve.points.contains(&best));
    for p in &curve.points {
        prop_assert!(d(best.fpr, best.tpr) <= d(p.fpr, p.tpr));
    }
    Ok(())
}

pub fn metrics_order_free(pairs: &[(u8, u8)], seed: u64) -> Check {
    let (pred, lab): (Vec<u8>, Vec<u8>) = pairs.iter().copied().unzip();
    let mut shuffled = pairs.to_vec();
    shuffled.shuffle(&mut RandomStream::new(seed));
    let (pred2, lab2): (Vec<u8>, Vec<u8>) = shuffled.into_iter().unzip();
    prop_assert_eq!(confusion_metrics(&pred, &lab).unwrap(), confusion_metrics(&pred2, &lab2).unwrap());
    Ok(())
}

pub fn reliability_partition(points: &[(f64, u8)], bins: usize) -> Check {
    prop_assume!(points.len() >= bins);
    let (probs, labels): (Vec<f64>, Vec<u8>) = points.iter().copied().unzip();
    let diagram = reliability(&probs, &labels, bins).unwrap();
    prop_assert_eq!(diagram.bins.len(), bins);
    let counts: Vec<usize> = diagram.bins.iter().map(|b| b.count).collect();
    prop_assert_eq!(counts.iter().sum::<usize>(), probs.len());
    prop_assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
    let positives: f64 = diagram.bins.iter().map(|b| b.empirical_positive_rate * b.count as f64).sum();
    let expected = labels.iter().filter(|&&l| l == 1).count() as f64;
    prop_assert!((positives - expected).abs() < 1e-6);
    Ok(())
}

fn standardized_moments(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for x in xs {
        let d = x - m;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    (m3 / m2.powf(1.5), m4 / (m2 * m2))
}

fn sd(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Standardized Pearson coefficients: `f'(z)/f(z) = -(z + w1) / (w0 + w1 z + w2 z^2)`.
fn pearson_coefficients(skew: f64, kurt: f64) -> (f64, f64, f64) {
    let s2 = skew * skew;
    let d = 10.0 * kurt - 12.0 * s2 - 18.0;
    ((4.0 * kurt - 3.0 * s2) / d, skew * (kurt + 3.0) / d, (2.0 * kurt - 3.0 * s2 - 6.0) / d)
}

/// CDF of the standardized law when the quadratic has no real root, built by
/// integrating the closed-form log-density on a fine grid.
fn pearson_cdf_oracle(w0: f64, w1: f64, w2: f64) -> impl Fn(f64) -> f64 {
    let disc = (4.0 * w0 * w2 - w1 * w1).sqrt();
    let log_f = |z: f64| {
        let q = w0 + w1 * z + w2 * z * z;
        let at = 2.0 / disc * ((2.0 * w2 * z + w1) / disc).atan();
        -(q.ln() / (2.0 * w2) + (w1 - w1 / (2.0 * w2)) * at)
    };
    let (lo, h, steps) = (-80.0, 1e-3, 160_000usize);
    let dens: Vec<f64> = (0..=steps).map(|i| log_f(lo + i as f64 * h).exp()).collect();
    let mut cdf = vec![0.0; steps + 1];
    for i in 1..=steps {
        cdf[i] = cdf[i - 1] + 0.5 * h * (dens[i] + dens[i - 1]);
    }
    let total = cdf[steps];
    move |z: f64| {
        let t = ((z - lo) / h).clamp(0.0, steps as f64);
        let i = (t.floor() as usize).min(steps - 1);
        (cdf[i] + (t - i as f64) * (cdf[i + 1] - cdf[i])) / total
    }
}

fn ks_distance(xs: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted.iter().enumerate().fold(0.0, |d: f64, (i, &x)| {
        let f = cdf(x);
        d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
    })
}

/// Sample moments of 10^6 draws against the targets on the grid
/// skew {0, 1, 2} x kurt {3.5, 6, 10}, with the estimator sd taken from 100
/// batches. The batch sd only estimates something when the eighth moment
/// exists (bounded support, or tail exponent 1/w2 > 9). Heavier-tailed cells
/// are checked against the density itself with a Kolmogorov-Smirnov bound.
/// Returns `(moment cells, KS cells)`.
pub fn pearson_moments() -> Result<(usize, usize), String> {
    const DRAWS: usize = 1_000_000;
    const BATCHES: usize = 100;
    let (mut moment_cells, mut ks_cells) = (0, 0);
    for (i, (skew, kurt)) in [0.0, 1.0, 2.0].into_iter().flat_map(|s| [3.5, 6.0, 10.0].map(|k| (s, k))).enumerate() {
        let Ok(spec) = DistributionSpec::pearson(0.0, 1.0, skew, kurt) else {
            if kurt > skew * skew + 1.0 {
                return Err(format!("({skew}, {kurt}) should be feasible"));
            }
            continue;
        };
        let xs = spec.sample(DRAWS, &mut RandomStream::derive(0x9e, i as u64)).map_err(|e| e.to_string())?;
        let (w0, w1, w2) = pearson_coefficients(skew, kurt);
        let unbounded = 10.0 * kurt - 12.0 * skew * skew - 18.0 > 0.0 && w2 > 0.0;
        if !unbounded || w2 < 1.0 / 9.0 {
            let (s, k) = standardized_moments(&xs);
            let per_batch: Vec<(f64, f64)> = xs.chunks(DRAWS / BATCHES).map(standardized_moments).collect();
            let root = (BATCHES as f64).sqrt();
            let se_s = sd(&per_batch.iter().map(|p| p.0).collect::<Vec<_>>()) / root;
            let se_k = sd(&per_batch.iter().map(|p| p.1).collect::<Vec<_>>()) / root;
            if (s - skew).abs() > 5.0 * se_s || (k - kurt).abs() > 5.0 * se_k {
                return Err(format!("({skew}, {kurt}): skew {s} (se {se_s}), kurt {k} (se {se_k})"));
            }
            moment_cells += 1;
        } else {
            if w1 * w1 >= 4.0 * w0 * w2 {
                return Err(format!("({skew}, {kurt}) has a bounded side"));
            }
            let d = ks_distance(&xs, pearson_cdf_oracle(w0, w1, w2));
            // 0.1% critical value of the one-sample KS statistic.
            if d >= 1.95 / (DRAWS as f64).sqrt() {
                return Err(format!("({skew}, {kurt}): KS distance {d}"));
            }
            ks_cells += 1;
        }
    }
    Ok((moment_cells, ks_cells))
}

fn hex_sha256(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn hash(data: &LabeledDataset) -> String {
    let mut buf = Vec::new();
    data.write_to(&mut buf).unwrap();
    hex_sha256(&buf)
}

/// Same seed gives the same bytes whatever the execution mode, and a saved
/// file hashes like the in-memory set.
pub fn regeneration_is_hash_stable() -> Result<(), String> {
    let spec = GenSpec::set_a(200, 11);
    let a = generate_pearson_style_set(&spec, Exec::Sequential).unwrap();
    let b = generate_pearson_style_set(&spec, Exec::Parallel).unwrap();
    if hash(&a) != hash(&b) {
        return Err("set A differs between execution modes".into());
    }
    if hash(&a) == hash(&generate_pearson_style_set(&GenSpec::set_a(200, 12), Exec::Parallel).unwrap()) {
        return Err("different seeds gave the same set".into());
    }
    let g = generate_group_set(Group::G2, &[10, 20], 20, 3, Exec::Sequential).unwrap();
    if hash(&g) != hash(&generate_group_set(Group::G2, &[10, 20], 20, 3, Exec::Parallel).unwrap()) {
        return Err("group set differs between execution modes".into());
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.jsonl");
    a.save(&path).unwrap();
    if hash(&LabeledDataset::load(&path).unwrap()) != hash(&a) {
        return Err("reload changed the set".into());
    }
    if hex_sha256(&std::fs::read(&path).unwrap()) != hash(&a) {
        return Err("file bytes differ from the serialized set".into());
    }
    Ok(())
}

#[derive(Deserialize)]
struct Corpus {
    lf_null_sims: usize,
    samples: Vec<GoldenRecord>,
}

#[derive(Deserialize)]
struct GoldenRecord {
    id: usize,
    x: Vec<f64>,
    sw: [f64; 2],
    lf: [f64; 2],
    ad: [f64; 2],
    ad_modified: f64,
    jb: [f64; 2],
    ajb: [f64; 2],
}

/// Every statistic and p-value of the frozen corpus against the reference
/// values. Returns the number of samples.
pub fn golden_corpus() -> Result<usize, String> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/golden.json");
    let c: Corpus = serde_json::from_str(&std::fs::read_to_string(path).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let close = |what: &str, id: usize, ours: f64, reference: f64, tol: f64| {
        if (ours - reference).abs() <= tol {
            Ok(())
        } else {
            Err(format!("sample {id} {what}: {ours} vs {reference}"))
        }
    };
    let sims = LillieforsConfig::default().sims as f64;
    for r in &c.samples {
        let (id, x) = (r.id, &r.x);
        let sw = shapiro_wilk(x).map_err(|e| e.to_string())?;
        close("W", id, sw.statistic, r.sw[0], 1e-6)?;
        close("SW p", id, sw.p_value, r.sw[1], 1e-3)?;
        let lf = lilliefors(x).map_err(|e| e.to_string())?;
        close("D", id, lf.statistic, r.lf[0], 1e-6)?;
        let p = r.lf[1];
        let sigma = (p * (1.0 - p) * (1.0 / sims + 1.0 / c.lf_null_sims as f64)).sqrt().max(1.0 / sims);
        close("LF p", id, lf.p_value, p, 3.0 * sigma)?;
        let ad = anderson_darling(x).map_err(|e| e.to_string())?;
        close("A", id, ad.statistic, r.ad[0], 1e-6)?;
        close("A*", id, ad_modified(ad.statistic, x.len()), r.ad_modified, 1e-6)?;
        close("AD p", id, ad.p_value, r.ad[1], 1e-3)?;
        if x.len() >= 7 {
            for (adjusted, reference) in [(false, r.jb), (true, r.ajb)] {
                let t = jarque_bera(x, adjusted).map_err(|e| e.to_string())?;
                close("JB", id, t.statistic, reference[0], 1e-6)?;
                close("JB p", id, t.p_value, reference[1], 1e-3)?;
            }
        }
    }
    Ok(c.samples.len())
}
