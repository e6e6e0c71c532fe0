use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::{json, Value};

use normnet::datasets::{
    generate_group_set, generate_pearson_style_set, ingest_height_csv, ingest_magnitude_csv, split_cv_test, GenSpec,
    HeightWindows, LabeledDataset, ScaleDraw,
};
use normnet::distributions::Group;
use normnet::evaluation::{
    optimize_thresholds, per_size_report, reliability, reliability_subsampled, roc, test_reports, write_reports_csv,
    Metrics, ReliabilityDiagram, SizeReport,
};
use normnet::exec::Exec;
use normnet::features::FeatureMap;
use normnet::neuralnet::{self, grid_search_cv, Grid, Network, NetworkConfig};
use normnet::normality::{lilliefors_null, FssdConfig, LillieforsConfig, Method, TestSuite};
use normnet::rng::mix_seed;

use crate::args::*;
use crate::manifest::{manifest_path, sibling, Recorder};
use crate::UsageError;

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

fn load(path: &Path) -> Result<LabeledDataset> {
    LabeledDataset::load(path).with_context(|| format!("loading dataset {}", path.display()))
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(d) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
    }
    Ok(())
}

/// `dir/stem{suffix}.ext` for `dir/stem.ext`.
fn suffixed(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}{suffix}.{}", ext.to_string_lossy()),
        None => format!("{stem}{suffix}"),
    };
    path.with_file_name(name)
}

/// Per-set seed, so equal `--seed` values still give independent sets.
fn set_seed(seed: u64, set: SetName) -> u64 {
    let tag = match set {
        SetName::A => 0xA,
        SetName::B => 0xB,
        SetName::C => 0xC,
        SetName::D => 0xD,
        SetName::Large => 0x1A,
    };
    mix_seed(seed, tag)
}

pub fn generate(a: GenerateArgs) -> Result<()> {
    let mut rec = Recorder::new("generate", &a, a.seed)?;
    let exec = Exec::default();
    let seed = set_seed(a.seed, a.set);
    if a.set == SetName::C {
        if a.per_class.is_some() || a.cv_fraction.is_some() {
            return Err(usage("set C takes --per-size, not --per-class or --cv-fraction"));
        }
        let per = a.per_size.unwrap_or(1000);
        let sizes = a.sizes.clone().unwrap_or_else(|| (1..=10).map(|k| 10 * k).collect());
        fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
        for g in Group::ALL {
            let d = generate_group_set(g, &sizes, per, seed, exec)?;
            let path = a.out.join(format!("{g}.jsonl"));
            d.save(&path)?;
            rec.output(&path)?;
        }
        rec.finish(&a.out.join("manifest.json"))?;
        return Ok(());
    }
    if a.per_size.is_some() {
        return Err(usage("--per-size applies to set C only"));
    }
    let per = a.per_class.unwrap_or(2000);
    let mut spec = match a.set {
        SetName::A => GenSpec::set_a(per, seed),
        SetName::B => GenSpec::set_b(per, seed),
        SetName::D => GenSpec::set_d(per, seed),
        SetName::Large => GenSpec::large(per, seed),
        SetName::C => unreachable!(),
    };
    if let Some(s) = &a.sizes {
        spec.sizes = s.clone();
    }
    spec.nonnormal_scale = match a.nonnormal_scale {
        ScaleArg::Sd => ScaleDraw::Sd,
        ScaleArg::Variance => ScaleDraw::Variance,
    };
    let data = generate_pearson_style_set(&spec, exec)?;
    create_parent(&a.out)?;
    data.save(&a.out)?;
    rec.output(&a.out)?;
    if let Some(f) = a.cv_fraction {
        if !(f > 0.0 && f < 1.0) {
            return Err(usage("--cv-fraction must lie in (0, 1)"));
        }
        let (cv, test) = split_cv_test(&data, f, seed)?;
        for (d, suffix) in [(cv, "_cv"), (test, "_test")] {
            let p = suffixed(&a.out, suffix);
            d.save(&p)?;
            rec.output(&p)?;
        }
    }
    rec.finish(&manifest_path(&a.out))?;
    eprintln!("wrote {} records to {}", data.len(), a.out.display());
    Ok(())
}

pub fn ingest(a: IngestArgs) -> Result<()> {
    let mut rec = Recorder::new("ingest", &a, a.seed)?;
    rec.input(&a.csv)?;
    let data = match a.kind {
        IngestKind::Height => {
            let w = HeightWindows { width: a.window, min_size: a.min_size, ..HeightWindows::default() };
            ingest_height_csv(&a.csv, &w)?
        }
        IngestKind::Magnitude => ingest_magnitude_csv(&a.csv, &a.sizes, a.per_size, a.seed)?,
    };
    create_parent(&a.out)?;
    data.save(&a.out)?;
    rec.output(&a.out)?;
    rec.finish(&manifest_path(&a.out))?;
    eprintln!("wrote {} samples to {}", data.len(), a.out.display());
    Ok(())
}

fn net_config(n: &NetArgs) -> Result<NetworkConfig> {
    let mut cfg = NetworkConfig {
        hidden_layers: n.arch.clone(),
        features: match n.mode {
            Mode::Dbnn => FeatureMap::Descriptor { q: n.q },
            Mode::Sbnn => FeatureMap::Statistics,
        },
        reg_c: n.c,
        max_epochs: n.epochs,
        batch_size: n.batch_size,
        seed: n.seed,
        ..NetworkConfig::default()
    };
    cfg.adam.step = n.learning_rate;
    cfg.early_stop.patience = n.patience;
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

/// Network inputs for every record. SBNN inputs are undefined for short
/// samples and for samples with tied spacings; in that mode such records are
/// skipped with a warning. Any other failure aborts.
fn network_inputs(data: LabeledDataset, features: &FeatureMap) -> Result<(LabeledDataset, Vec<Vec<f64>>)> {
    use normnet::error::Error;
    let rows = Exec::default().map(data.len(), |i| features.extract(&data.records[i].sample));
    let (mut keep, mut x) = (Vec::new(), Vec::new());
    for (i, r) in rows.into_iter().enumerate() {
        match r {
            Ok(v) => {
                keep.push(i);
                x.push(v);
            }
            Err(Error::SampleTooSmall { .. } | Error::ZeroSpacing) if *features == FeatureMap::Statistics => {}
            Err(e) => return Err(anyhow::Error::new(e).context(format!("record {i}"))),
        }
    }
    if keep.len() == data.len() {
        return Ok((data, x));
    }
    log::warn!("skipping {} of {} records without a statistic vector", data.len() - keep.len(), data.len());
    Ok((data.subset(data.metadata.name.clone(), &keep), x))
}

pub fn train(a: TrainArgs) -> Result<()> {
    let cfg = net_config(&a.net)?;
    let mut rec = Recorder::new("train", &a, a.net.seed)?;
    let (data, x) = network_inputs(load(&a.data)?, &cfg.features)?;
    rec.input(&a.data)?;
    let (net, mut report) = neuralnet::train(&cfg, &x, &data.labels())?;
    let wall = report.wall_time_seconds;
    // Wall time lives in the manifest so the report is reproducible byte for byte.
    report.wall_time_seconds = 0.0;
    create_parent(&a.out)?;
    net.save(&a.out)?;
    rec.output(&a.out)?;
    let report_path = sibling(&a.out, "report.json");
    fs::write(&report_path, serde_json::to_string_pretty(&report)? + "\n")?;
    rec.output(&report_path)?;
    rec.finish(&manifest_path(&a.out))?;
    eprintln!(
        "trained on {} records: {} epochs, kept epoch {}, validation log-loss {:.4}, {:.1}s",
        report.n_train + report.n_validation,
        report.epochs_run,
        report.best_epoch,
        report.val_loss_history[report.best_epoch - 1],
        wall
    );
    Ok(())
}

fn suite(s: &SuiteArgs, seed: u64) -> TestSuite {
    TestSuite {
        lilliefors: LillieforsConfig { sims: s.lf_sims, ..LillieforsConfig::default() },
        fssd: FssdConfig { null_sims: s.fssd_sims, ..FssdConfig::default() },
        seed,
    }
}

fn methods(s: &SuiteArgs) -> Result<Vec<Method>> {
    s.tests
        .iter()
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            let m: Method = t.trim().parse().map_err(|e: normnet::error::Error| usage(e.to_string()))?;
            if m == Method::CVM {
                return Err(usage("CVM has no p-value; choose from SW, LF, AD, JB, AJB, FSSD"));
            }
            Ok(m)
        })
        .collect()
}

fn parse_sample(line: &str) -> std::result::Result<Vec<f64>, String> {
    line.split([',', ';'])
        .map(str::trim)
        .filter(|c| !c.is_empty())
        .map(|c| c.parse::<f64>().map_err(|_| format!("`{c}` is not a number")))
        .collect()
}

pub fn test(a: TestArgs) -> Result<()> {
    let ms = methods(&a.suite)?;
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(usage("--alpha must lie in (0, 1)"));
    }
    let mut rec = Recorder::new("test", &a, a.seed)?;
    let lines: Vec<String> = match (&a.input, &a.sample) {
        (Some(p), None) => {
            rec.input(p)?;
            fs::read_to_string(p)
                .with_context(|| format!("reading {}", p.display()))?
                .lines()
                .filter(|l| !l.trim().is_empty())
                .map(str::to_string)
                .collect()
        }
        (None, Some(s)) => vec![s.clone()],
        _ => return Err(usage("give either --input or --sample")),
    };
    let net = match &a.model {
        Some(p) => {
            rec.input(p)?;
            Some(Network::load(p).with_context(|| format!("loading model {}", p.display()))?)
        }
        None => None,
    };
    let suite = suite(&a.suite, a.seed);
    let samples: Vec<std::result::Result<Vec<f64>, String>> = lines.iter().map(|l| parse_sample(l)).collect();
    if ms.contains(&Method::LF) {
        let mut sizes: Vec<usize> = samples.iter().flatten().map(Vec::len).filter(|&n| n >= 4).collect();
        sizes.sort_unstable();
        sizes.dedup();
        for n in sizes {
            lilliefors_null(n, &suite.lilliefors)?;
        }
    }
    let rows = Exec::default().map(samples.len(), |i| {
        let x = match &samples[i] {
            Ok(x) => x,
            Err(e) => return json!({ "index": i, "error": e }),
        };
        let network = net.as_ref().map(|net| match net.predict_sample(x) {
            Ok(p1) => json!({ "p1": p1, "label": net.classify(p1) }),
            Err(e) => json!({ "error": e.to_string() }),
        });
        let tests: Vec<Value> = ms
            .iter()
            .map(|&m| match suite.run(m, x, i as u64) {
                Ok(r) => serde_json::to_value(r.decide(a.alpha)).expect("outcome serializes"),
                Err(e) => json!({ "method": m, "error": e.to_string() }),
            })
            .collect();
        let mut row = json!({ "index": i, "n": x.len(), "tests": tests });
        if let Some(n) = network {
            row["network"] = n;
        }
        row
    });
    let mut text = String::new();
    for r in &rows {
        text.push_str(&serde_json::to_string(r)?);
        text.push('\n');
    }
    match &a.out {
        Some(p) => {
            create_parent(p)?;
            fs::write(p, &text)?;
            rec.output(p)?;
            rec.finish(&manifest_path(p))?;
        }
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn fmt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.3}"))
}

fn write_reliability(path: &Path, diagrams: &[(String, ReliabilityDiagram)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["subset", "bin", "mean_predicted", "empirical_positive_rate", "count"])?;
    for (name, d) in diagrams {
        for (b, bin) in d.bins.iter().enumerate() {
            w.write_record([
                name.clone(),
                b.to_string(),
                bin.mean_predicted.to_string(),
                bin.empirical_positive_rate.to_string(),
                bin.count.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn metric_cells(m: &Metrics) -> [String; 6] {
    let o = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    [o(m.a), o(m.tpr), o(m.ppv), o(m.tnr), o(m.npv), o(m.f1)]
}

pub fn evaluate(a: EvaluateArgs) -> Result<()> {
    let ms = if a.no_tests { Vec::new() } else { methods(&a.suite)? };
    if a.alpha.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
        return Err(usage("every --alpha must lie in (0, 1)"));
    }
    if a.model.is_none() && (a.optimize_threshold || a.reliability) {
        return Err(usage("--optimize-threshold and --reliability need --model"));
    }
    if a.model.is_none() && ms.is_empty() {
        return Err(usage("nothing to evaluate: give --model or tests"));
    }
    let mut rec = Recorder::new("evaluate", &a, a.seed)?;
    let data = load(&a.data)?;
    rec.input(&a.data)?;
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let exec = Exec::default();
    let mut reports: Vec<(Option<f64>, SizeReport)> = Vec::new();
    let mut rocs = serde_json::Map::new();

    if let Some(p) = &a.model {
        rec.input(p)?;
        let net = Network::load(p).with_context(|| format!("loading model {}", p.display()))?;
        let name = match net.config.features {
            FeatureMap::Descriptor { .. } => "DBNN",
            FeatureMap::Statistics => "SBNN",
        };
        let (covered, x) = network_inputs(data.clone(), &net.config.features)?;
        let scores = net.forward_batch(&x)?;
        let labels = covered.labels();
        let sizes: Vec<usize> = covered.records.iter().map(|r| r.sample.len()).collect();
        let pred: Vec<u8> = scores.iter().map(|&p| net.classify(p)).collect();
        reports.push((None, per_size_report(name, &sizes, &labels, &scores, &pred)?));
        if let Ok(c) = roc(&scores, &labels) {
            rocs.insert(name.to_string(), serde_json::to_value(c.dump())?);
        }
        if a.optimize_threshold {
            let rows = optimize_thresholds(&sizes, &labels, &scores, net.threshold)?;
            let path = a.out_dir.join("thresholds.csv");
            let mut w = csv::Writer::from_path(&path)?;
            let mut header = vec!["n".to_string(), "threshold".into(), "auroc".into()];
            for prefix in ["default", "optimized"] {
                header.extend(["A", "TPR", "PPV", "TNR", "NPV", "F1"].map(|m| format!("{prefix}_{m}")));
            }
            w.write_record(&header)?;
            for r in &rows {
                let mut cells = vec![r.n.to_string(), r.threshold.to_string(), r.auroc.to_string()];
                cells.extend(metric_cells(&r.default_metrics));
                cells.extend(metric_cells(&r.optimized_metrics));
                w.write_record(&cells)?;
                println!(
                    "n={:<5} threshold {:.4}  AUROC {:.3}  TPR {} -> {}  TNR {} -> {}",
                    r.n,
                    r.threshold,
                    r.auroc,
                    fmt(r.default_metrics.tpr),
                    fmt(r.optimized_metrics.tpr),
                    fmt(r.default_metrics.tnr),
                    fmt(r.optimized_metrics.tnr)
                );
            }
            w.flush()?;
            rec.output(&path)?;
        }
        if a.reliability {
            let mut diagrams = vec![("all".to_string(), reliability(&scores, &labels, a.bins)?)];
            if a.reliability_subsets > 0 {
                let subs =
                    reliability_subsampled(&scores, &labels, a.bins, a.reliability_subsets, a.subset_size, a.seed)?;
                diagrams.extend(subs.into_iter().enumerate().map(|(i, d)| (i.to_string(), d)));
            }
            let path = a.out_dir.join("reliability.csv");
            write_reliability(&path, &diagrams)?;
            rec.output(&path)?;
        }
    }

    let suite = suite(&a.suite, a.seed);
    for &m in &ms {
        let keep: Vec<usize> = (0..data.len()).filter(|&i| data.records[i].sample.len() >= m.min_size()).collect();
        if keep.len() < data.len() {
            eprintln!("{m}: skipping {} samples with fewer than {} values", data.len() - keep.len(), m.min_size());
        }
        let subset = data.subset(data.metadata.name.clone(), &keep);
        let labels = subset.labels();
        let (reps, t) = test_reports(&suite, m, &subset, &a.alpha, exec)?;
        if !t.degenerate.is_empty() {
            eprintln!("{m}: {} degenerate samples scored as rejections", t.degenerate.len());
        }
        if let Ok(c) = roc(&t.p_values, &labels) {
            rocs.insert(m.name().to_string(), serde_json::to_value(c.dump())?);
        }
        reports.extend(a.alpha.iter().copied().map(Some).zip(reps));
    }

    let path = a.out_dir.join("metrics.csv");
    let refs: Vec<(Option<f64>, &SizeReport)> = reports.iter().map(|(al, r)| (*al, r)).collect();
    write_reports_csv(BufWriter::new(fs::File::create(&path)?), &refs)?;
    rec.output(&path)?;
    if !rocs.is_empty() {
        let path = a.out_dir.join("roc.json");
        fs::write(&path, serde_json::to_string(&Value::Object(rocs))? + "\n")?;
        rec.output(&path)?;
    }
    rec.finish(&a.out_dir.join("manifest.json"))?;

    println!("{:<6} {:>6} {:>6} {:>6} {:>6} {:>6}", "method", "alpha", "A", "TPR", "TNR", "AUROC");
    for (al, r) in &reports {
        let o = r.overall();
        let alpha = al.map_or_else(|| "-".to_string(), |x| x.to_string());
        println!(
            "{:<6} {:>6} {:>6} {:>6} {:>6} {:>6}",
            r.method,
            alpha,
            fmt(o.metrics.a),
            fmt(o.metrics.tpr),
            fmt(o.metrics.tnr),
            fmt(o.auroc)
        );
    }
    Ok(())
}

fn parse_archs(s: &str) -> Result<Vec<Vec<usize>>> {
    s.split(';')
        .map(|a| {
            a.split(',')
                .map(|n| n.trim().parse::<usize>().map_err(|_| usage(format!("bad layer size `{n}` in --archs"))))
                .collect()
        })
        .collect()
}

fn arch_label(layers: &[usize]) -> String {
    layers.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

pub fn crossval(a: CrossvalArgs) -> Result<()> {
    let grid = Grid {
        features: a.q.iter().map(|&q| FeatureMap::Descriptor { q }).collect(),
        architectures: parse_archs(&a.archs)?,
        reg_c: a.c.clone(),
    };
    let base = NetworkConfig { max_epochs: a.epochs, batch_size: a.batch_size, seed: a.seed, ..NetworkConfig::default() };
    for cfg in grid.configs(&base) {
        cfg.validate().map_err(|e| usage(e.to_string()))?;
    }
    let mut rec = Recorder::new("crossval", &a, a.seed)?;
    let data = load(&a.data)?;
    rec.input(&a.data)?;
    let report = grid_search_cv(&data, &grid, &base, a.folds, a.seed, Exec::default())?;

    create_parent(&a.out)?;
    let mut w = csv::Writer::from_path(&a.out)?;
    w.write_record(["q", "architecture", "c", "mean_accuracy", "sd_accuracy", "mean_time", "sd_time", "best"])?;
    for (i, cell) in report.cells.iter().enumerate() {
        let q = match cell.config.features {
            FeatureMap::Descriptor { q } => q.to_string(),
            FeatureMap::Statistics => String::new(),
        };
        let arch = arch_label(&cell.config.hidden_layers);
        let best = if i == report.best { "  (best)" } else { "" };
        println!(
            "q={q:<5} arch={arch:<8} c={:<5} accuracy {:.3} ± {:.3}  time {:.2}s ± {:.2}{best}",
            cell.config.reg_c, cell.mean_accuracy, cell.sd_accuracy, cell.mean_fit_time, cell.sd_fit_time
        );
        w.write_record([
            q,
            arch,
            cell.config.reg_c.to_string(),
            cell.mean_accuracy.to_string(),
            cell.sd_accuracy.to_string(),
            cell.mean_fit_time.to_string(),
            cell.sd_fit_time.to_string(),
            u8::from(i == report.best).to_string(),
        ])?;
    }
    w.flush()?;
    rec.output(&a.out)?;
    let json_path = sibling(&a.out, "report.json");
    fs::write(&json_path, serde_json::to_string_pretty(&report)? + "\n")?;
    rec.output(&json_path)?;
    rec.finish(&manifest_path(&a.out))?;
    Ok(())
}

pub fn learning_curve(a: LearningCurveArgs) -> Result<()> {
    let cfg = net_config(&a.net)?;
    let mut rec = Recorder::new("learning-curve", &a, a.net.seed)?;
    let data = load(&a.data)?;
    rec.input(&a.data)?;
    let points = neuralnet::learning_curve(&data, &a.fractions, a.folds, &cfg, a.net.seed, Exec::default())?;
    create_parent(&a.out)?;
    let mut w = csv::Writer::from_path(&a.out)?;
    w.write_record(["fraction", "train_size", "median_train_accuracy", "median_test_accuracy", "median_fit_time"])?;
    for p in &points {
        w.write_record([
            p.fraction.to_string(),
            p.train_size.to_string(),
            p.median_train_accuracy.to_string(),
            p.median_test_accuracy.to_string(),
            p.median_fit_time.to_string(),
        ])?;
        println!("train size {:<7} median test accuracy {:.3}", p.train_size, p.median_test_accuracy);
    }
    w.flush()?;
    rec.output(&a.out)?;
    let json_path = sibling(&a.out, "folds.json");
    fs::write(&json_path, serde_json::to_string_pretty(&points)? + "\n")?;
    rec.output(&json_path)?;
    rec.finish(&manifest_path(&a.out))?;
    Ok(())
}
