//! Grid-search cross-validation and learning curves.

use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{train, Network, NetworkConfig};
use crate::datasets::{stratified_folds, LabeledDataset};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::features::FeatureMap;
use crate::rng::{mix_seed, RandomStream};

const FOLD_STREAM: u64 = 0xF01D;
const CELL_STREAM: u64 = 0xCE11;
const CURVE_STREAM: u64 = 0xC0;

/// Hyperparameter values to cross.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub features: Vec<FeatureMap>,
    pub architectures: Vec<Vec<usize>>,
    pub reg_c: Vec<f64>,
}

impl Grid {
    /// q in {0.05, 0.1}, architectures [100, 10] and [1000], c in {0.1, 1, 10}.
    pub fn full() -> Self {
        Grid {
            features: vec![FeatureMap::Descriptor { q: 0.05 }, FeatureMap::Descriptor { q: 0.1 }],
            architectures: vec![vec![100, 10], vec![1000]],
            reg_c: vec![0.1, 1.0, 10.0],
        }
    }

    /// Every combination, features outermost, on top of `base`.
    pub fn configs(&self, base: &NetworkConfig) -> Vec<NetworkConfig> {
        let mut out = Vec::new();
        for f in &self.features {
            for a in &self.architectures {
                for &c in &self.reg_c {
                    out.push(NetworkConfig { features: *f, hidden_layers: a.clone(), reg_c: c, ..base.clone() });
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvCell {
    pub config: NetworkConfig,
    pub accuracies: Vec<f64>,
    pub fit_times: Vec<f64>,
    pub mean_accuracy: f64,
    /// Population standard deviation over folds.
    pub sd_accuracy: f64,
    pub mean_fit_time: f64,
    pub sd_fit_time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: usize,
    pub cells: Vec<CvCell>,
    /// Index of the selected cell.
    pub best: usize,
}

impl CvReport {
    pub fn best_config(&self) -> &NetworkConfig {
        &self.cells[self.best].config
    }
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt())
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Share of correct decisions at the network's threshold.
pub(crate) fn accuracy(net: &Network, x: &[Vec<f64>], y: &[u8]) -> Result<f64> {
    let p = net.forward_batch(x)?;
    Ok(p.iter().zip(y).filter(|(p, &l)| net.classify(**p) == l).count() as f64 / y.len() as f64)
}

/// Feature vectors of every record for each distinct map.
fn extract_all(data: &LabeledDataset, maps: &[FeatureMap], exec: Exec) -> Result<Vec<Vec<Vec<f64>>>> {
    maps.iter()
        .map(|m| exec.try_map(data.len(), |i| m.extract(&data.records[i].sample)))
        .collect()
}

fn distinct_maps(configs: &[NetworkConfig]) -> (Vec<FeatureMap>, Vec<usize>) {
    let mut maps: Vec<FeatureMap> = Vec::new();
    let which = configs
        .iter()
        .map(|c| match maps.iter().position(|m| *m == c.features) {
            Some(i) => i,
            None => {
                maps.push(c.features);
                maps.len() - 1
            }
        })
        .collect();
    (maps, which)
}

fn pick(x: &[Vec<f64>], y: &[u8], idx: &[usize]) -> (Vec<Vec<f64>>, Vec<u8>) {
    (idx.iter().map(|&i| x[i].clone()).collect(), idx.iter().map(|&i| y[i]).collect())
}

/// k-fold cross-validation of every grid cell. Folds are stratified by label
/// and shared by all cells; each (cell, fold) fit gets its own seed.
///
/// The selected cell has the highest mean accuracy; ties go to fewer
/// parameters, then to the larger `reg_c`.
pub fn grid_search_cv(
    data: &LabeledDataset,
    grid: &Grid,
    base: &NetworkConfig,
    k: usize,
    seed: u64,
    exec: Exec,
) -> Result<CvReport> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 folds, got {k}")));
    }
    let configs = grid.configs(base);
    if configs.is_empty() {
        return Err(Error::InvalidParameter("empty grid".into()));
    }
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for c in &configs {
        c.validate()?;
    }
    let y = data.labels();
    let fold = stratified_folds(&y, k, mix_seed(seed, FOLD_STREAM));
    let (maps, which) = distinct_maps(&configs);
    let features = extract_all(data, &maps, exec)?;

    let cell_seed = mix_seed(seed, CELL_STREAM);
    let jobs = configs.len() * k;
    let results = exec.try_map(jobs, |j| -> Result<(f64, f64)> {
        let (c, f) = (j / k, j % k);
        let x = &features[which[c]];
        let (train_idx, test_idx): (Vec<usize>, Vec<usize>) = (0..y.len()).partition(|&i| fold[i] != f);
        let (xt, yt) = pick(x, &y, &train_idx);
        let (xv, yv) = pick(x, &y, &test_idx);
        let cfg = NetworkConfig { seed: mix_seed(cell_seed, j as u64), ..configs[c].clone() };
        let started = Instant::now();
        let (net, _) = train(&cfg, &xt, &yt)?;
        let secs = started.elapsed().as_secs_f64();
        Ok((accuracy(&net, &xv, &yv)?, secs))
    })?;

    let mut cells = Vec::with_capacity(configs.len());
    for (c, config) in configs.into_iter().enumerate() {
        let accuracies: Vec<f64> = (0..k).map(|f| results[c * k + f].0).collect();
        let fit_times: Vec<f64> = (0..k).map(|f| results[c * k + f].1).collect();
        let (mean_accuracy, sd_accuracy) = mean_sd(&accuracies);
        let (mean_fit_time, sd_fit_time) = mean_sd(&fit_times);
        log::info!(
            "cv {:?} {:?} c={}: {mean_accuracy:.4} ± {sd_accuracy:.4}",
            config.features,
            config.hidden_layers,
            config.reg_c
        );
        cells.push(CvCell { config, accuracies, fit_times, mean_accuracy, sd_accuracy, mean_fit_time, sd_fit_time });
    }
    let dims: Vec<usize> = which.iter().map(|&m| features[m].first().map_or(0, Vec::len)).collect();
    let best = select_best(&cells, &dims);
    Ok(CvReport { folds: k, cells, best })
}

/// Highest mean accuracy, then fewer parameters, then larger `reg_c`.
fn select_best(cells: &[CvCell], dims: &[usize]) -> usize {
    (0..cells.len())
        .min_by(|&a, &b| {
            let (ca, cb) = (&cells[a], &cells[b]);
            cb.mean_accuracy
                .total_cmp(&ca.mean_accuracy)
                .then(ca.config.parameter_count(dims[a]).cmp(&cb.config.parameter_count(dims[b])))
                .then(cb.config.reg_c.total_cmp(&ca.config.reg_c))
        })
        .expect("non-empty grid")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearningPoint {
    pub fraction: f64,
    /// Training examples per fit.
    pub train_size: usize,
    pub train_accuracies: Vec<f64>,
    pub test_accuracies: Vec<f64>,
    pub fit_times: Vec<f64>,
    pub median_train_accuracy: f64,
    pub median_test_accuracy: f64,
    pub median_fit_time: f64,
}

/// For each fraction and fold: train on that fraction of the other folds
/// (stratified, nested across fractions), record train and test accuracy and
/// the fit time. Medians over folds are reported.
pub fn learning_curve(
    data: &LabeledDataset,
    fractions: &[f64],
    folds: usize,
    cfg: &NetworkConfig,
    seed: u64,
    exec: Exec,
) -> Result<Vec<LearningPoint>> {
    if folds < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 folds, got {folds}")));
    }
    if let Some(&f) = fractions.iter().find(|&&f| !(f > 0.0 && f <= 1.0)) {
        return Err(Error::InvalidParameter(format!("fraction {f} outside (0, 1]")));
    }
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let y = data.labels();
    let x = extract_all(data, &[cfg.features], exec)?.pop().expect("one map");
    let fold = stratified_folds(&y, folds, mix_seed(seed, FOLD_STREAM));

    // Per fold, a class-wise shuffled order of its training part; fractions
    // take prefixes so smaller training sets are nested in larger ones.
    let orders: Vec<[Vec<usize>; 2]> = (0..folds)
        .map(|f| {
            let mut rng = RandomStream::derive(mix_seed(seed, CURVE_STREAM), f as u64);
            [0u8, 1].map(|class| {
                let mut idx: Vec<usize> = (0..y.len()).filter(|&i| fold[i] != f && y[i] == class).collect();
                idx.shuffle(&mut rng);
                idx
            })
        })
        .collect();

    let jobs = fractions.len() * folds;
    let results = exec.try_map(jobs, |j| -> Result<(usize, f64, f64, f64)> {
        let (fi, f) = (j / folds, j % folds);
        let mut train_idx: Vec<usize> = orders[f]
            .iter()
            .flat_map(|idx| idx[..((fractions[fi] * idx.len() as f64).ceil() as usize).min(idx.len())].iter().copied())
            .collect();
        train_idx.sort_unstable();
        let test_idx: Vec<usize> = (0..y.len()).filter(|&i| fold[i] == f).collect();
        let (xt, yt) = pick(&x, &y, &train_idx);
        let (xv, yv) = pick(&x, &y, &test_idx);
        let run_cfg = NetworkConfig { seed: mix_seed(cfg.seed, j as u64), ..cfg.clone() };
        let started = Instant::now();
        let (net, _) = train(&run_cfg, &xt, &yt)?;
        let secs = started.elapsed().as_secs_f64();
        Ok((train_idx.len(), accuracy(&net, &xt, &yt)?, accuracy(&net, &xv, &yv)?, secs))
    })?;

    Ok(fractions
        .iter()
        .enumerate()
        .map(|(fi, &fraction)| {
            let runs = &results[fi * folds..(fi + 1) * folds];
            let train_accuracies: Vec<f64> = runs.iter().map(|r| r.1).collect();
            let test_accuracies: Vec<f64> = runs.iter().map(|r| r.2).collect();
            let fit_times: Vec<f64> = runs.iter().map(|r| r.3).collect();
            LearningPoint {
                fraction,
                train_size: runs[0].0,
                median_train_accuracy: median(&train_accuracies),
                median_test_accuracy: median(&test_accuracies),
                median_fit_time: median(&fit_times),
                train_accuracies,
                test_accuracies,
                fit_times,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{generate_pearson_style_set, GenSpec};

    fn quick(base_epochs: usize) -> NetworkConfig {
        NetworkConfig { hidden_layers: vec![8], max_epochs: base_epochs, batch_size: 16, ..Default::default() }
    }

    #[test]
    fn tiny_grid_runs() {
        let data = generate_pearson_style_set(&GenSpec::set_a(5, 1), Exec::default()).unwrap();
        assert_eq!(data.len(), 10);
        let grid = Grid { features: vec![FeatureMap::Descriptor { q: 0.25 }], architectures: vec![vec![4]], reg_c: vec![0.1, 1.0] };
        let r = grid_search_cv(&data, &grid, &quick(3), 2, 7, Exec::default()).unwrap();
        assert_eq!(r.cells.len(), 2);
        assert!(r.cells.iter().all(|c| c.accuracies.len() == 2));
        let again = grid_search_cv(&data, &grid, &quick(3), 2, 7, Exec::Sequential).unwrap();
        let acc = |r: &CvReport| r.cells.iter().map(|c| c.accuracies.clone()).collect::<Vec<_>>();
        assert_eq!(acc(&r), acc(&again));
        assert_eq!(r.best, again.best);
    }

    #[test]
    fn tie_break_prefers_small_then_large_c() {
        let configs = Grid::full().configs(&NetworkConfig::default());
        assert_eq!(configs.len(), 12);
        let cell = |c: &NetworkConfig, acc: f64| CvCell {
            config: c.clone(),
            accuracies: vec![acc],
            fit_times: vec![1.0],
            mean_accuracy: acc,
            sd_accuracy: 0.0,
            mean_fit_time: 1.0,
            sd_fit_time: 0.0,
        };
        // configs[1] is [100, 10] with c = 1, configs[4] is [1000] with c = 1,
        // configs[2] is [100, 10] with c = 10.
        let dims = vec![26; 3];
        let cells = vec![cell(&configs[4], 0.9), cell(&configs[1], 0.9), cell(&configs[2], 0.9)];
        assert_eq!(select_best(&cells, &dims), 2);
        let cells = vec![cell(&configs[4], 0.91), cell(&configs[1], 0.9), cell(&configs[2], 0.9)];
        assert_eq!(select_best(&cells, &dims), 0);
    }

    #[test]
    fn learning_curve_shapes() {
        let data = generate_pearson_style_set(&GenSpec::set_a(100, 2), Exec::default()).unwrap();
        let pts = learning_curve(&data, &[0.5, 1.0], 2, &quick(5), 3, Exec::default()).unwrap();
        assert_eq!(pts.len(), 2);
        assert!(pts[0].train_size < pts[1].train_size);
        assert_eq!(pts[1].train_size, 100);
        assert!(pts.iter().all(|p| p.test_accuracies.len() == 2));
    }
}
