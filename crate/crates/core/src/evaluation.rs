//! Classification metrics, ROC analysis, reliability diagrams and per-size
//! reports shared by the networks and the statistical tests.
//!
//! Label 1 is "normal" throughout. Scores are oriented so that higher means
//! more normal: a network's score is its class-1 probability and a test's
//! score is its p-value.

use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::datasets::LabeledDataset;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::neuralnet::Network;
use crate::normality::{lilliefors_null, Method, TestSuite};
use crate::rng::RandomStream;

/// Raw confusion-matrix counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fn_: usize,
    pub tn: usize,
    pub fp: usize,
}

impl Counts {
    pub fn from_predictions(predictions: &[u8], labels: &[u8]) -> Result<Counts> {
        check_lengths(predictions.len(), labels.len())?;
        let mut c = Counts::default();
        for (&p, &l) in predictions.iter().zip(labels) {
            match (l == 1, p == 1) {
                (true, true) => c.tp += 1,
                (true, false) => c.fn_ += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fp += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fn_ + self.tn + self.fp
    }

    pub fn metrics(&self) -> Metrics {
        let ratio = |a: usize, b: usize| (b > 0).then(|| a as f64 / b as f64);
        let tpr = ratio(self.tp, self.tp + self.fn_);
        let ppv = ratio(self.tp, self.tp + self.fp);
        let f1 = match (tpr, ppv) {
            (Some(r), Some(p)) if r + p > 0.0 => Some(2.0 * r * p / (r + p)),
            _ => None,
        };
        Metrics {
            a: ratio(self.tp + self.tn, self.total()),
            tpr,
            ppv,
            tnr: ratio(self.tn, self.tn + self.fp),
            npv: ratio(self.tn, self.tn + self.fn_),
            f1,
        }
    }
}

impl std::ops::Add for Counts {
    type Output = Counts;
    fn add(self, o: Counts) -> Counts {
        Counts { tp: self.tp + o.tp, fn_: self.fn_ + o.fn_, tn: self.tn + o.tn, fp: self.fp + o.fp }
    }
}

/// Accuracy, recall, precision and their class-0 counterparts. A field is
/// `None` when its denominator is zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub a: Option<f64>,
    pub tpr: Option<f64>,
    pub ppv: Option<f64>,
    pub tnr: Option<f64>,
    pub npv: Option<f64>,
    pub f1: Option<f64>,
}

fn check_lengths(left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(Error::LengthMismatch { left, right });
    }
    if left == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(())
}

pub fn confusion_metrics(predictions: &[u8], labels: &[u8]) -> Result<Metrics> {
    Ok(Counts::from_predictions(predictions, labels)?.metrics())
}

/// One operating point: records with `score >= threshold` are called normal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// Points run from `(0, 0)` (threshold `+inf`) to `(1, 1)` (the lowest
/// score), thresholds strictly decreasing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auroc: f64,
}

pub fn roc(scores: &[f64], labels: &[u8]) -> Result<RocCurve> {
    check_lengths(scores.len(), labels.len())?;
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::NonFinite { index: i });
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClassLabels);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]));

    let mut points = vec![RocPoint { threshold: f64::INFINITY, fpr: 0.0, tpr: 0.0 }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auroc = 0.0;
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        while k < order.len() && scores[order[k]] == s {
            if labels[order[k]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        let prev = points[points.len() - 1];
        let p = RocPoint { threshold: s, fpr: fp as f64 / neg as f64, tpr: tp as f64 / pos as f64 };
        auroc += (p.fpr - prev.fpr) * (p.tpr + prev.tpr) / 2.0;
        points.push(p);
    }
    Ok(RocCurve { points, auroc })
}

/// Plot-ready form of a curve. The leading `+inf` threshold is written as
/// `null` in JSON.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RocDump {
    pub thresholds: Vec<f64>,
    pub fpr: Vec<f64>,
    pub tpr: Vec<f64>,
    pub auroc: f64,
}

impl RocCurve {
    pub fn dump(&self) -> RocDump {
        RocDump {
            thresholds: self.points.iter().map(|p| p.threshold).collect(),
            fpr: self.points.iter().map(|p| p.fpr).collect(),
            tpr: self.points.iter().map(|p| p.tpr).collect(),
            auroc: self.auroc,
        }
    }
}

/// The point closest to `(0, 1)`; on ties the one with the higher threshold.
pub fn optimal_threshold(curve: &RocCurve) -> RocPoint {
    let dist = |p: &RocPoint| p.fpr.hypot(1.0 - p.tpr);
    let mut best = curve.points[0];
    for p in &curve.points[1..] {
        if dist(p) < dist(&best) {
            best = *p;
        }
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityBin {
    pub mean_predicted: f64,
    pub empirical_positive_rate: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityDiagram {
    pub bins: Vec<ReliabilityBin>,
}

/// Sorts by probability and cuts into `n_bins` bins whose sizes differ by at
/// most one.
pub fn reliability(probabilities: &[f64], labels: &[u8], n_bins: usize) -> Result<ReliabilityDiagram> {
    if probabilities.len() != labels.len() {
        return Err(Error::LengthMismatch { left: probabilities.len(), right: labels.len() });
    }
    if n_bins < 2 {
        return Err(Error::InvalidParameter("at least two bins are needed".into()));
    }
    let total = probabilities.len();
    if total < n_bins {
        return Err(Error::TooFewPoints { got: total, bins: n_bins });
    }
    if let Some(i) = probabilities.iter().position(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::InvalidProbability(probabilities[i]));
    }
    let mut order: Vec<usize> = (0..total).collect();
    order.sort_by(|&i, &j| probabilities[i].total_cmp(&probabilities[j]));
    let bins = (0..n_bins)
        .map(|b| {
            let idx = &order[b * total / n_bins..(b + 1) * total / n_bins];
            let count = idx.len();
            let mean_predicted = idx.iter().map(|&i| probabilities[i]).sum::<f64>() / count as f64;
            let positives = idx.iter().filter(|&&i| labels[i] == 1).count();
            ReliabilityBin { mean_predicted, empirical_positive_rate: positives as f64 / count as f64, count }
        })
        .collect();
    Ok(ReliabilityDiagram { bins })
}

/// Diagrams of `subsets` random subsets of `size` points each, drawn without
/// replacement within a subset.
pub fn reliability_subsampled(
    probabilities: &[f64],
    labels: &[u8],
    n_bins: usize,
    subsets: usize,
    size: usize,
    seed: u64,
) -> Result<Vec<ReliabilityDiagram>> {
    if size > probabilities.len() {
        return Err(Error::TooFewPoints { got: probabilities.len(), bins: n_bins });
    }
    (0..subsets)
        .map(|s| {
            let mut rng = RandomStream::derive(seed, s as u64);
            let idx = index::sample(&mut rng, probabilities.len(), size);
            let p: Vec<f64> = idx.iter().map(|i| probabilities[i]).collect();
            let l: Vec<u8> = idx.iter().map(|i| labels[i]).collect();
            reliability(&p, &l, n_bins)
        })
        .collect()
}

/// Metrics for one sample size, or for all records pooled (`n = None`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeRow {
    pub n: Option<usize>,
    pub counts: Counts,
    pub metrics: Metrics,
    /// Absent when the group holds a single class.
    pub auroc: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeReport {
    pub method: String,
    /// Per size in increasing order, then the pooled row.
    pub rows: Vec<SizeRow>,
}

fn size_row(n: Option<usize>, idx: &[usize], labels: &[u8], scores: &[f64], predictions: &[u8]) -> Result<SizeRow> {
    let l: Vec<u8> = idx.iter().map(|&i| labels[i]).collect();
    let s: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
    let p: Vec<u8> = idx.iter().map(|&i| predictions[i]).collect();
    let counts = Counts::from_predictions(&p, &l)?;
    let auroc = match roc(&s, &l) {
        Ok(c) => Some(c.auroc),
        Err(Error::SingleClassLabels) => None,
        Err(e) => return Err(e),
    };
    Ok(SizeRow { n, counts, metrics: counts.metrics(), auroc })
}

/// Groups records by sample size. The pooled row recomputes everything from
/// all records rather than averaging the rows.
pub fn per_size_report(
    method: &str,
    sizes: &[usize],
    labels: &[u8],
    scores: &[f64],
    predictions: &[u8],
) -> Result<SizeReport> {
    check_lengths(sizes.len(), labels.len())?;
    check_lengths(scores.len(), labels.len())?;
    check_lengths(predictions.len(), labels.len())?;
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &n) in sizes.iter().enumerate() {
        groups.entry(n).or_default().push(i);
    }
    let mut rows = groups
        .iter()
        .map(|(&n, idx)| size_row(Some(n), idx, labels, scores, predictions))
        .collect::<Result<Vec<_>>>()?;
    let all: Vec<usize> = (0..labels.len()).collect();
    rows.push(size_row(None, &all, labels, scores, predictions)?);
    Ok(SizeReport { method: method.to_string(), rows })
}

impl SizeReport {
    pub fn overall(&self) -> &SizeRow {
        self.rows.last().expect("report has a pooled row")
    }

    pub fn row(&self, n: usize) -> Option<&SizeRow> {
        self.rows.iter().find(|r| r.n == Some(n))
    }
}

pub const REPORT_HEADER: [&str; 15] =
    ["method", "alpha", "n", "count", "tp", "fn", "tn", "fp", "A", "TPR", "PPV", "TNR", "NPV", "F1", "AUROC"];

/// Writes reports as CSV, one line per row, with empty cells for absent
/// values. `alpha` labels the rows of each report (empty for networks).
pub fn write_reports_csv<W: Write>(w: W, reports: &[(Option<f64>, &SizeReport)]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(REPORT_HEADER).map_err(csv_err)?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for (alpha, rep) in reports {
        for r in &rep.rows {
            let m = r.metrics;
            let c = r.counts;
            out.write_record([
                rep.method.clone(),
                opt(*alpha),
                r.n.map_or("overall".to_string(), |n| n.to_string()),
                c.total().to_string(),
                c.tp.to_string(),
                c.fn_.to_string(),
                c.tn.to_string(),
                c.fp.to_string(),
                opt(m.a),
                opt(m.tpr),
                opt(m.ppv),
                opt(m.tnr),
                opt(m.npv),
                opt(m.f1),
                opt(r.auroc),
            ])
            .map_err(csv_err)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => Error::InvalidParameter(format!("{kind:?}")),
    }
}

/// Class-1 probabilities of a network for every record.
pub fn network_scores(net: &Network, data: &LabeledDataset, exec: Exec) -> Result<Vec<f64>> {
    let features = exec.try_map(data.len(), |i| net.config.features.extract(&data.records[i].sample))?;
    net.forward_batch(&features)
}

/// P-values of one test over a dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct TestScores {
    pub p_values: Vec<f64>,
    /// Records where the test failed on degenerate data (ties, zero
    /// bandwidth, ...); they are scored `p = 0`.
    pub degenerate: Vec<usize>,
}

/// P-values of one test for every record. Lilliefors null tables for every
/// size are built up front so the parallel pass only reads the cache.
///
/// A numeric failure only happens on samples with heavy ties, which a
/// continuous normal sample never has, so it counts as a rejection. Any other
/// failure aborts.
pub fn test_scores(suite: &TestSuite, method: Method, data: &LabeledDataset, exec: Exec) -> Result<TestScores> {
    if method == Method::LF {
        for n in data.sizes() {
            lilliefors_null(n, &suite.lilliefors)?;
        }
    }
    let results = exec.map(data.len(), |i| {
        let r = &data.records[i];
        suite.run(method, &r.sample, r.provenance.index).map(|t| t.p_value)
    });
    let mut out = TestScores { p_values: Vec::with_capacity(data.len()), degenerate: Vec::new() };
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(p) => out.p_values.push(p),
            Err(e) if e.is_numeric() => {
                out.p_values.push(0.0);
                out.degenerate.push(i);
            }
            Err(e) => return Err(e),
        }
    }
    if !out.degenerate.is_empty() {
        log::warn!("{method}: {} degenerate samples scored as rejections", out.degenerate.len());
    }
    Ok(out)
}

/// Label 1 iff the test does not reject at `alpha`.
pub fn test_predictions(p_values: &[f64], alpha: f64) -> Vec<u8> {
    p_values.iter().map(|&p| u8::from(p >= alpha)).collect()
}

pub fn network_report(net: &Network, data: &LabeledDataset, name: &str, exec: Exec) -> Result<(SizeReport, Vec<f64>)> {
    let scores = network_scores(net, data, exec)?;
    let pred: Vec<u8> = scores.iter().map(|&p| net.classify(p)).collect();
    let sizes: Vec<usize> = data.records.iter().map(|r| r.sample.len()).collect();
    Ok((per_size_report(name, &sizes, &data.labels(), &scores, &pred)?, scores))
}

/// Reports of one test at each level in `alphas`, plus its scores.
pub fn test_reports(
    suite: &TestSuite,
    method: Method,
    data: &LabeledDataset,
    alphas: &[f64],
    exec: Exec,
) -> Result<(Vec<SizeReport>, TestScores)> {
    let t = test_scores(suite, method, data, exec)?;
    let sizes: Vec<usize> = data.records.iter().map(|r| r.sample.len()).collect();
    let labels = data.labels();
    let reports = alphas
        .iter()
        .map(|&a| per_size_report(method.name(), &sizes, &labels, &t.p_values, &test_predictions(&t.p_values, a)))
        .collect::<Result<_>>()?;
    Ok((reports, t))
}

/// Per-size optimal thresholds (closest ROC point to `(0, 1)`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRow {
    pub n: usize,
    pub threshold: f64,
    pub auroc: f64,
    pub default_metrics: Metrics,
    pub optimized_metrics: Metrics,
}

pub fn optimize_thresholds(sizes: &[usize], labels: &[u8], scores: &[f64], default_threshold: f64) -> Result<Vec<ThresholdRow>> {
    check_lengths(sizes.len(), labels.len())?;
    check_lengths(scores.len(), labels.len())?;
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &n) in sizes.iter().enumerate() {
        groups.entry(n).or_default().push(i);
    }
    groups
        .into_iter()
        .map(|(n, idx)| {
            let l: Vec<u8> = idx.iter().map(|&i| labels[i]).collect();
            let s: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
            let curve = roc(&s, &l)?;
            let best = optimal_threshold(&curve);
            let at = |t: f64| -> Result<Metrics> {
                let p: Vec<u8> = s.iter().map(|&v| u8::from(v >= t)).collect();
                confusion_metrics(&p, &l)
            };
            Ok(ThresholdRow {
                n,
                threshold: best.threshold,
                auroc: curve.auroc,
                default_metrics: at(default_threshold)?,
                optimized_metrics: at(best.threshold)?,
            })
        })
        .collect()
}
