//! Labeled sample collections: synthetic generation, stratified splits,
//! ingestion of real-world CSV files and a line-delimited JSON file format.
//!
//! File layout: the first line is `{"format_version": 1, "metadata": {...}}`,
//! every following line is one record
//! `{"sample": [...], "label": 0|1, "provenance": {...}}`.

mod ingest;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use ingest::{ingest_height_csv, ingest_magnitude_csv, HeightWindows};

use crate::distributions::{group_distributions, pearson_feasible, DistributionSpec, Group, PearsonType, Sampler};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::rng::{mix_seed, RandomStream};

pub const DATASET_FORMAT_VERSION: u32 = 1;

const GRID_STREAM: u64 = 0x6121D;
const RECORD_STREAM: u64 = 0x5EC0;
const SPLIT_STREAM: u64 = 0x5B117;

/// Where a sample came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// Distribution family, or the data source for real-world samples.
    pub family: String,
    pub params: Vec<f64>,
    /// `[mean, sd, skew, kurt]` targets of Pearson samples.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moments: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pearson_type: Option<PearsonType>,
    /// Substream index the sample was drawn from.
    pub index: u64,
}

impl Provenance {
    pub fn from_spec(spec: &DistributionSpec, index: u64) -> Self {
        let (moments, pearson_type) = match spec {
            DistributionSpec::Pearson(p) => (Some([p.mean, p.sd, p.skew, p.kurt]), Some(p.pearson_type)),
            _ => (None, None),
        };
        Provenance { family: spec.family().to_string(), params: spec.params(), moments, pearson_type, index }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub sample: Vec<f64>,
    pub label: u8,
    pub provenance: Provenance,
}

/// Number of records with a given label and sample size.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeCount {
    pub label: u8,
    pub n: usize,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub name: String,
    pub master_seed: u64,
    pub counts: Vec<SizeCount>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    pub metadata: Metadata,
    pub records: Vec<Record>,
}

fn count_sizes(records: &[Record]) -> Vec<SizeCount> {
    let mut m: BTreeMap<(u8, usize), usize> = BTreeMap::new();
    for r in records {
        *m.entry((r.label, r.sample.len())).or_default() += 1;
    }
    m.into_iter().map(|((label, n), count)| SizeCount { label, n, count }).collect()
}

impl LabeledDataset {
    pub fn new(name: impl Into<String>, master_seed: u64, records: Vec<Record>) -> Self {
        let counts = count_sizes(&records);
        LabeledDataset { metadata: Metadata { name: name.into(), master_seed, counts }, records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.records.iter().map(|r| r.label).collect()
    }

    pub fn samples(&self) -> Vec<&[f64]> {
        self.records.iter().map(|r| r.sample.as_slice()).collect()
    }

    /// Distinct sample sizes in increasing order.
    pub fn sizes(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.records.iter().map(|r| r.sample.len()).collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    /// Records at `indices`, in that order, as a new dataset.
    pub fn subset(&self, name: impl Into<String>, indices: &[usize]) -> Self {
        let records = indices.iter().map(|&i| self.records[i].clone()).collect();
        LabeledDataset::new(name, self.metadata.master_seed, records)
    }

    /// Checks the stored counts against the records.
    pub fn check_counts(&self) -> Result<()> {
        if self.metadata.counts != count_sizes(&self.records) {
            return Err(Error::InvalidParameter(format!(
                "metadata counts of `{}` disagree with its records",
                self.metadata.name
            )));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        serde_json::to_writer(&mut *w, &Header { format_version: DATASET_FORMAT_VERSION, metadata: self.metadata.clone() })?;
        w.write_all(b"\n")?;
        for r in &self.records {
            serde_json::to_writer(&mut *w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let malformed = |message: String| Error::MalformedFile { path: path.to_path_buf(), message };
        let mut lines = BufReader::new(File::open(path)?).lines();
        let first = lines.next().ok_or_else(|| malformed("empty file".into()))??;
        let version: VersionOnly = serde_json::from_str(&first).map_err(|e| malformed(format!("header: {e}")))?;
        if version.format_version != DATASET_FORMAT_VERSION {
            return Err(Error::FormatVersionMismatch { found: version.format_version, expected: DATASET_FORMAT_VERSION });
        }
        let header: Header = serde_json::from_str(&first).map_err(|e| malformed(format!("header: {e}")))?;
        let mut records = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str(&line).map_err(|e| malformed(format!("line {}: {e}", i + 2)))?);
        }
        let data = LabeledDataset { metadata: header.metadata, records };
        data.check_counts().map_err(|e| malformed(e.to_string()))?;
        Ok(data)
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    metadata: Metadata,
}

#[derive(Deserialize)]
struct VersionOnly {
    format_version: u32,
}

/// Recipe for a balanced normal / Pearson dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub name: String,
    pub sizes: Vec<usize>,
    /// Records per class; split as evenly as possible across sizes.
    pub per_class_total: usize,
    pub mean_range: [f64; 2],
    pub sd_range: [f64; 2],
    /// `[low, high, step]` of the skewness grid.
    pub skew_grid: [f64; 3],
    /// `[low, high, step]` of the kurtosis grid.
    pub kurt_grid: [f64; 3],
    pub master_seed: u64,
    #[serde(default)]
    pub nonnormal_scale: ScaleDraw,
}

/// How the number drawn from `sd_range` sets the spread of non-normal records.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleDraw {
    /// The draw is the standard deviation, as for normal records.
    #[default]
    Sd,
    /// The draw is the variance. Non-normal spreads then shrink to
    /// `sqrt(sd_range)`, which makes the raw-scale descriptor fields
    /// informative about the label.
    Variance,
}

impl GenSpec {
    fn base(name: &str, sizes: Vec<usize>, per_class_total: usize, master_seed: u64) -> Self {
        GenSpec {
            name: name.to_string(),
            sizes,
            per_class_total,
            mean_range: [-100.0, 100.0],
            sd_range: [1.0, 20.0],
            skew_grid: [-30.0, 30.0, 0.5],
            kurt_grid: [0.0, 40.0, 0.5],
            master_seed,
            nonnormal_scale: ScaleDraw::Sd,
        }
    }

    /// Sizes 10, 20, ..., 100.
    pub fn set_a(per_class_total: usize, master_seed: u64) -> Self {
        Self::base("A", (1..=10).map(|k| 10 * k).collect(), per_class_total, master_seed)
    }

    /// Sizes 5, 15, ..., 95.
    pub fn set_b(per_class_total: usize, master_seed: u64) -> Self {
        Self::base("B", (0..10).map(|k| 5 + 10 * k).collect(), per_class_total, master_seed)
    }

    /// Same sizes as set A, drawn independently.
    pub fn set_d(per_class_total: usize, master_seed: u64) -> Self {
        Self { name: "D".into(), ..Self::set_a(per_class_total, master_seed) }
    }

    /// Sizes 250, 500 and 1000.
    pub fn large(per_class_total: usize, master_seed: u64) -> Self {
        Self::base("large", vec![250, 500, 1000], per_class_total, master_seed)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if self.sizes.is_empty() || self.sizes.iter().any(|&n| n < 3) {
            return bad("sizes must be non-empty and at least 3");
        }
        if !(self.mean_range[0] <= self.mean_range[1]) || !(self.sd_range[0] > 0.0 && self.sd_range[0] <= self.sd_range[1])
        {
            return bad("invalid mean or sd range");
        }
        for g in [self.skew_grid, self.kurt_grid] {
            if !(g[2] > 0.0 && g[0] <= g[1]) {
                return bad("grid needs low <= high and a positive step");
            }
        }
        Ok(())
    }

    /// Records per class for each entry of `sizes`.
    pub fn quotas(&self) -> Vec<usize> {
        let k = self.sizes.len();
        (0..k).map(|i| self.per_class_total / k + usize::from(i < self.per_class_total % k)).collect()
    }
}

fn grid_points(g: [f64; 3]) -> Vec<f64> {
    let count = ((g[1] - g[0]) / g[2] + 1e-9).floor() as usize;
    (0..=count).map(|i| g[0] + i as f64 * g[2]).collect()
}

/// Feasible non-normal `(skew, kurt)` grid pairs with a well-defined Pearson
/// spec, in grid order.
pub fn feasible_pairs(spec: &GenSpec) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for &s in &grid_points(spec.skew_grid) {
        for &k in &grid_points(spec.kurt_grid) {
            if pearson_feasible(s, k)
                && !(s == 0.0 && k == 3.0)
                && DistributionSpec::pearson(0.0, 1.0, s, k).is_ok()
            {
                out.push((s, k));
            }
        }
    }
    out
}

/// Draws until the sample has two distinct values. Extreme grid points put
/// nearly all mass within one ulp of the mode, so a small sample can round to
/// a constant.
fn draw_non_constant(n: usize, rng: &mut RandomStream, mut draw: impl FnMut(&mut RandomStream) -> f64) -> Result<Vec<f64>> {
    for _ in 0..1000 {
        let x: Vec<f64> = (0..n).map(|_| draw(rng)).collect();
        if x.iter().any(|&v| v != x[0]) {
            return Ok(x);
        }
    }
    Err(Error::ConstantSample)
}

/// Balanced normal / non-normal dataset. Normal records get a random mean and
/// sd; non-normal records cycle over the shuffled feasible grid, each visit
/// with a fresh random mean and sd.
pub fn generate_pearson_style_set(spec: &GenSpec, exec: Exec) -> Result<LabeledDataset> {
    spec.validate()?;
    let mut pairs = feasible_pairs(spec);
    if pairs.is_empty() {
        return Err(Error::InfeasibleSpec);
    }
    pairs.shuffle(&mut RandomStream::new(mix_seed(spec.master_seed, GRID_STREAM)));

    // Plan: per size, `quota` normal records then `quota` non-normal ones.
    let mut plan: Vec<(usize, Option<usize>)> = Vec::with_capacity(2 * spec.per_class_total);
    let mut visits = 0;
    for (&n, &quota) in spec.sizes.iter().zip(&spec.quotas()) {
        plan.extend(std::iter::repeat_n((n, None), quota));
        for _ in 0..quota {
            plan.push((n, Some(visits % pairs.len())));
            visits += 1;
        }
    }

    // One standardized sampler per grid pair in use; records rescale it.
    let used = visits.min(pairs.len());
    let samplers: Vec<Sampler> =
        exec.try_map(used, |i| DistributionSpec::pearson(0.0, 1.0, pairs[i].0, pairs[i].1)?.sampler())?;

    let seed = mix_seed(spec.master_seed, RECORD_STREAM);
    let records = exec.try_map(plan.len(), |r| -> Result<Record> {
        let (n, pair) = plan[r];
        let mut rng = RandomStream::derive(seed, r as u64);
        let mu = rng.random_range(spec.mean_range[0]..=spec.mean_range[1]);
        let sigma = rng.random_range(spec.sd_range[0]..=spec.sd_range[1]);
        let (dist, sample) = match pair {
            None => {
                let d = DistributionSpec::Normal { mu, sigma };
                let x = d.sample(n, &mut rng)?;
                (d, x)
            }
            Some(p) => {
                let (s, k) = pairs[p];
                let sigma = match spec.nonnormal_scale {
                    ScaleDraw::Sd => sigma,
                    ScaleDraw::Variance => sigma.sqrt(),
                };
                let d = DistributionSpec::pearson(mu, sigma, s, k)?;
                let x = draw_non_constant(n, &mut rng, |r| mu + sigma * samplers[p].draw(r))?;
                (d, x)
            }
        };
        let label = u8::from(pair.is_none());
        Ok(Record { sample, label, provenance: Provenance::from_spec(&dist, r as u64) })
    })?;
    Ok(LabeledDataset::new(spec.name.clone(), spec.master_seed, records))
}

/// Non-normal samples from one group's alternatives: for every size,
/// `per_size` samples cycling over the group's distributions.
pub fn generate_group_set(group: Group, sizes: &[usize], per_size: usize, master_seed: u64, exec: Exec) -> Result<LabeledDataset> {
    if per_size == 0 || sizes.is_empty() {
        return Err(Error::InvalidParameter("need at least one size and one sample per size".into()));
    }
    let dists = group_distributions(group);
    let samplers: Vec<Sampler> = dists.iter().map(DistributionSpec::sampler).collect::<Result<_>>()?;
    let seed = mix_seed(master_seed, RECORD_STREAM ^ (group as u64 + 1));
    let total = sizes.len() * per_size;
    let records = exec.map(total, |r| {
        let (n, j) = (sizes[r / per_size], r % per_size);
        let d = j % dists.len();
        let mut rng = RandomStream::derive(seed, r as u64);
        let sample = (0..n).map(|_| samplers[d].draw(&mut rng)).collect();
        Record { sample, label: 0, provenance: Provenance::from_spec(&dists[d], r as u64) }
    });
    Ok(LabeledDataset::new(group.to_string(), master_seed, records))
}

/// Stratified split by `(label, size)`: the first part gets
/// `round(cv_fraction * count)` records of every stratum. Both parts keep the
/// input order.
pub fn split_cv_test(data: &LabeledDataset, cv_fraction: f64, seed: u64) -> Result<(LabeledDataset, LabeledDataset)> {
    if !(cv_fraction > 0.0 && cv_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!("cv fraction {cv_fraction} outside (0, 1)")));
    }
    let mut strata: BTreeMap<(u8, usize), Vec<usize>> = BTreeMap::new();
    for (i, r) in data.records.iter().enumerate() {
        strata.entry((r.label, r.sample.len())).or_default().push(i);
    }
    let mut rng = RandomStream::new(mix_seed(seed, SPLIT_STREAM));
    let (mut first, mut second) = (Vec::new(), Vec::new());
    for idx in strata.values_mut() {
        idx.shuffle(&mut rng);
        let k = (cv_fraction * idx.len() as f64).round() as usize;
        first.extend_from_slice(&idx[..k]);
        second.extend_from_slice(&idx[k..]);
    }
    first.sort_unstable();
    second.sort_unstable();
    let name = &data.metadata.name;
    Ok((data.subset(format!("{name}_cv"), &first), data.subset(format!("{name}_test"), &second)))
}

/// Class-stratified k-fold assignment: `fold[i]` in `0..k` for each label.
pub fn stratified_folds(labels: &[u8], k: usize, seed: u64) -> Vec<usize> {
    let mut fold = vec![0; labels.len()];
    let mut rng = RandomStream::new(seed);
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        for (j, &i) in idx.iter().enumerate() {
            fold[i] = j % k;
        }
    }
    fold
}
