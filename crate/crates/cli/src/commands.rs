//! Subcommand implementations.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use gaussrot::distributions::random_unit_vector;
use gaussrot::experiments::{
    self, find_spurious_projection, medians_by_dim, random_baseline, run_gaussian_experiment, run_parallel,
    run_toy_experiment, standard_normal_f32, EntropyMethod, GaussianExperimentConfig, SpuriousConfig,
    ToyExperimentConfig, DEFAULT_LOSS_RATIO,
};
use gaussrot::theory::gaussianization_required_layers;
use gaussrot::{
    BimodalTarget, ConvergenceRecord, Histogram, RateMethod, RngSeed, SpectrumCase, SplineConfig, TheoryBound,
    ToyCase,
};

use crate::config::{ConfigFile, List};
use crate::svg::{self, Series, Style, PALETTE};
use crate::{Common, Format, GaussianArgs, PlotArgs, SpuriousArgs, TheoryArgs, ToyArgs, UsageError};

const SPURIOUS_TAG: u64 = 0x7370_7572;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RateArg(pub RateMethod);

impl FromStr for RateArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "last-two" | "last_two" => Ok(Self(RateMethod::LastTwo)),
            "full" => Ok(Self(RateMethod::Full)),
            _ => Err(format!("unknown rate method `{s}` (expected last-two or full)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyArg(pub EntropyMethod);

impl FromStr for EntropyArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "curve" => Ok(Self(EntropyMethod::CurveSamples)),
            "exact" => Ok(Self(EntropyMethod::Exact)),
            _ => match s.strip_prefix("mc:").map(str::parse::<usize>) {
                Some(Ok(n)) if n > 0 => Ok(Self(EntropyMethod::MonteCarlo(n))),
                _ => Err(format!("unknown entropy method `{s}` (expected curve, exact or mc:<n>)")),
            },
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Full,
    Ci,
}

impl FromStr for Scale {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        <Self as ValueEnum>::from_str(s, true)
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        <Self as ValueEnum>::from_str(s, true)
    }
}

const COMMON_KEYS: [&str; 3] = ["seed", "jobs", "format"];

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

struct Shared {
    seed: u64,
    jobs: usize,
    out: Option<PathBuf>,
}

fn load_config(common: &Common, keys: &[&str]) -> Result<(ConfigFile, Shared)> {
    let cfg = ConfigFile::load(common.config.as_deref())?;
    let mut allowed: Vec<&str> = COMMON_KEYS.to_vec();
    allowed.extend_from_slice(keys);
    cfg.check_keys(&allowed)?;
    let jobs: u64 = cfg.resolve("jobs", common.jobs, experiments::default_jobs() as u64)?;
    if jobs == 0 {
        return Err(usage("jobs must be at least 1"));
    }
    let shared = Shared {
        seed: cfg.resolve("seed", common.seed, 0)?,
        jobs: jobs as usize,
        out: common.out.clone(),
    };
    Ok((cfg, shared))
}

fn resolve_format(cfg: &ConfigFile, common: &Common, default: Format) -> Result<Format> {
    Ok(cfg.resolve("format", common.format, default)?)
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn check_ratio(ratio: f64) -> Result<()> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(usage(format!("ratio must lie in (0, 1), got {ratio}")));
    }
    Ok(())
}

fn write_records(records: &[ConvergenceRecord], format: Format, out: Option<&Path>) -> Result<()> {
    let mut w = output(out)?;
    match format {
        Format::Csv => experiments::write_csv(records, &mut w)?,
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, records)?;
            writeln!(w)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn theory(args: TheoryArgs) -> Result<()> {
    let (cfg, shared) = load_config(&args.common, &["dim", "k", "ratio", "loss"])?;
    let format = resolve_format(&cfg, &args.common, Format::Csv)?;
    let dim: u64 = cfg.resolve("dim", args.dim, 128)?;
    if dim == 0 {
        return Err(usage("dim must be at least 1"));
    }
    let k: f64 = cfg.resolve("k", args.k, 1.0)?;
    let ratio: f64 = cfg.resolve("ratio", args.ratio, DEFAULT_LOSS_RATIO)?;
    check_ratio(ratio)?;
    let loss: Option<f64> = cfg.resolve_opt("loss", args.loss)?;
    if let Some(l) = loss {
        if !(l > 0.0) {
            return Err(usage(format!("loss must be positive, got {l}")));
        }
    }
    let bounds = TheoryBound::all(dim as usize, k, ratio, loss)?;
    let mut w = output(shared.out.as_deref())?;
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, &bounds)?;
            writeln!(w)?;
        }
        Format::Csv => {
            writeln!(w, "bound,value")?;
            for b in &bounds {
                writeln!(w, "{},{}", b.name(), experiments::format_f64(b.value()))?;
                match *b {
                    TheoryBound::IterativeRate { rate, linearized, .. } => {
                        writeln!(w, "iterative-rate-factor,{}", experiments::format_f64(rate))?;
                        writeln!(w, "iterative-rate-linearized,{}", experiments::format_f64(linearized))?;
                    }
                    TheoryBound::CouplingRate { required_layers, .. } => {
                        writeln!(w, "coupling-required-layers,{}", experiments::format_f64(required_layers))?;
                    }
                    _ => {}
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn parse_cases<T>(list: List<u8>, from_index: impl Fn(u8) -> gaussrot::Result<T>) -> Result<Vec<T>> {
    list.0
        .into_iter()
        .map(|i| from_index(i).map_err(|e| usage(e.to_string())))
        .collect()
}

fn report_status(label: &str, result: Result<usize, &gaussrot::Error>) {
    match result {
        Ok(n) => eprintln!("ok      {label} ({n} runs)"),
        Err(e) => eprintln!("failed  {label}: {e}"),
    }
}

/// Nonzero exit unless every tuple completed. Output of the completed tuples
/// is written before this is checked.
fn finish_partial(failed: usize, total: usize) -> Result<()> {
    if failed > 0 {
        bail!("{failed} of {total} tuples failed; see the status lines above");
    }
    Ok(())
}

const GAUSSIAN_KEYS: [&str; 10] = [
    "dims",
    "cases",
    "rotations",
    "layers_factor",
    "measure_at",
    "alphas_per_side",
    "random_draws",
    "rate_method",
    "ratio",
    "summary_only",
];

pub fn simulate_gaussian(args: GaussianArgs) -> Result<()> {
    let (cfg, shared) = load_config(&args.common, &GAUSSIAN_KEYS)?;
    let format = resolve_format(&cfg, &args.common, Format::Csv)?;
    let defaults = GaussianExperimentConfig::default();
    let dims = cfg.resolve("dims", args.dims, List(defaults.dims.clone()))?.0;
    let cases = match cfg.resolve_opt("cases", args.cases)? {
        Some(l) => parse_cases(l, SpectrumCase::from_index)?,
        None => defaults.cases.clone(),
    };
    let summary_only = args.summary_only || cfg.resolve("summary_only", None, false)?;
    let base = GaussianExperimentConfig {
        dims: dims.clone(),
        cases: cases.clone(),
        alphas_per_side: cfg.resolve("alphas_per_side", args.alphas_per_side, defaults.alphas_per_side)?,
        random_draws: cfg.resolve("random_draws", args.random_draws, defaults.random_draws)?,
        rotations: cfg.resolve("rotations", args.rotations, defaults.rotations)?,
        layers_factor: cfg.resolve("layers_factor", args.layers_factor, defaults.layers_factor)?,
        measure_at: cfg.resolve_opt("measure_at", args.measure_at)?,
        rate_method: cfg.resolve("rate_method", args.rate_method, RateArg(defaults.rate_method))?.0,
        loss_ratio: cfg.resolve("ratio", args.ratio, defaults.loss_ratio)?,
        lambda_min: defaults.lambda_min,
        seed: RngSeed(shared.seed),
        jobs: 1,
        per_layer_records: !summary_only,
    };
    check_ratio(base.loss_ratio)?;
    if dims.iter().any(|&d| d < 2) {
        return Err(usage("every dimension must be at least 2"));
    }
    if base.rotations == 0 {
        return Err(usage("rotations must be at least 1"));
    }

    // One tuple per (dimension, case); every run keys its own stream, so the
    // split does not change any number.
    let tuples: Vec<(usize, SpectrumCase)> =
        dims.iter().flat_map(|&d| cases.iter().map(move |&c| (d, c))).collect();
    let results = run_parallel(&tuples, shared.jobs, |&(dim, case)| {
        let config = GaussianExperimentConfig {
            dims: vec![dim],
            cases: vec![case],
            ..base.clone()
        };
        run_gaussian_experiment(&config)
    })?;
    let mut records = Vec::new();
    let mut failed = 0;
    for (&(dim, case), result) in tuples.iter().zip(results) {
        let label = format!("gaussian case={} D={dim}", case.index());
        report_status(&label, result.as_ref().map(Vec::len));
        match result {
            Ok(runs) => records.extend(runs.iter().flat_map(|r| r.records(base.per_layer_records))),
            Err(_) => failed += 1,
        }
    }
    write_records(&records, format, shared.out.as_deref())?;
    if let Some(path) = &args.svg {
        write_file(path, &scaling_plot(&records, Some(base.loss_ratio), "Exact Gaussian sweep"))?;
    }
    finish_partial(failed, tuples.len())
}

const TOY_KEYS: [&str; 14] = [
    "cases",
    "dims",
    "core",
    "seeds",
    "samples",
    "layers",
    "bins",
    "alpha",
    "alpha_tail",
    "eval_samples",
    "entropy",
    "ratio",
    "rate_method",
    "summary_only",
];

pub fn train_toy(args: ToyArgs) -> Result<()> {
    let (cfg, shared) = load_config(&args.common, &TOY_KEYS)?;
    let format = resolve_format(&cfg, &args.common, Format::Csv)?;
    let defaults = ToyExperimentConfig::default();
    let cases = match cfg.resolve_opt("cases", args.cases)? {
        Some(l) => parse_cases(l, ToyCase::from_index)?,
        None => defaults.cases.clone(),
    };
    let dims = cfg.resolve("dims", args.dims, List(defaults.dims.clone()))?.0;
    let seeds = cfg.resolve("seeds", args.seeds, List(defaults.seeds.clone()))?.0;
    let spline = SplineConfig {
        bins: cfg.resolve("bins", args.bins, defaults.train.spline.bins)?,
        alpha_inner: cfg.resolve("alpha", args.alpha, defaults.train.spline.alpha_inner)?,
        alpha_tail: cfg.resolve("alpha_tail", args.alpha_tail, defaults.train.spline.alpha_tail)?,
        ..defaults.train.spline
    };
    spline.validate().map_err(|e| usage(e.to_string()))?;
    let summary_only = args.summary_only || cfg.resolve("summary_only", None, false)?;
    let base = ToyExperimentConfig {
        cases: cases.clone(),
        dims: dims.clone(),
        core: cfg.resolve("core", args.core, defaults.core)?,
        seeds: seeds.clone(),
        samples: cfg.resolve("samples", args.samples, defaults.samples)?,
        eval_samples: cfg.resolve("eval_samples", args.eval_samples, defaults.eval_samples)?,
        layers: cfg.resolve("layers", args.layers, defaults.layers)?,
        train: gaussrot::TrainConfig {
            spline,
            ..defaults.train.clone()
        },
        entropy: cfg.resolve("entropy", args.entropy, EntropyArg(defaults.entropy))?.0,
        rate_method: cfg.resolve("rate_method", None, RateArg(defaults.rate_method))?.0,
        loss_ratio: cfg.resolve("ratio", args.ratio, defaults.loss_ratio)?,
        master_seed: RngSeed(shared.seed),
        jobs: 1,
        per_layer_records: !summary_only,
        keep_models: args.save_models.is_some(),
    };
    check_ratio(base.loss_ratio)?;
    if base.layers == 0 {
        return Err(usage("layers must be at least 1"));
    }
    if let Some(dir) = &args.save_models {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }

    let mut tuples: Vec<(ToyCase, usize, u64)> = Vec::new();
    for &c in &cases {
        for &d in &dims {
            tuples.extend(seeds.iter().map(|&s| (c, d, s)));
        }
    }
    let results = run_parallel(&tuples, shared.jobs, |&(case, dim, seed)| {
        let config = ToyExperimentConfig {
            cases: vec![case],
            dims: vec![dim],
            seeds: vec![seed],
            ..base.clone()
        };
        run_toy_experiment(&config)
    })?;
    let mut records = Vec::new();
    let mut failed = 0;
    for (&(case, dim, seed), result) in tuples.iter().zip(results) {
        let label = format!("toy case={} D={dim} seed={seed}", case.index());
        report_status(&label, result.as_ref().map(Vec::len));
        match result {
            Ok(runs) => {
                for run in runs {
                    records.extend(run.records(base.per_layer_records));
                    if let (Some(dir), Some(model)) = (&args.save_models, &run.model) {
                        let path = dir.join(format!("toy-case{}-d{dim}-seed{seed}.gzn", case.index()));
                        model.save(&path).with_context(|| format!("cannot save {}", path.display()))?;
                    }
                }
            }
            Err(_) => failed += 1,
        }
    }
    write_records(&records, format, shared.out.as_deref())?;
    if let Some(path) = &args.svg {
        write_file(path, &scaling_plot(&records, None, "Toy Gaussianization"))?;
    }
    finish_partial(failed, tuples.len())
}

#[derive(Debug, Serialize)]
struct SpuriousReport {
    n: usize,
    dim: usize,
    seed: u64,
    steps: usize,
    lr: f64,
    momentum: f64,
    target_spread: f64,
    target_sigma: f64,
    w2_initial: f64,
    w2_final: f64,
    w2_final_rms: f64,
    w2_random_median: f64,
    w2_random_median_rms: f64,
    baseline_count: usize,
    trajectory: Vec<f64>,
    histogram_optimized: Histogram,
    histogram_random: Histogram,
}

const SPURIOUS_KEYS: [&str; 9] =
    ["scale", "dim", "samples", "steps", "lr", "momentum", "baseline_count", "bins", "target_sigma"];

pub fn spurious(args: SpuriousArgs) -> Result<()> {
    let (cfg, shared) = load_config(&args.common, &SPURIOUS_KEYS)?;
    let format = resolve_format(&cfg, &args.common, Format::Json)?;
    let scale = cfg.resolve("scale", args.scale, Scale::Full)?;
    let (n0, d0) = match scale {
        Scale::Full => (60_000, 3072),
        Scale::Ci => (10_000, 512),
    };
    let n: usize = cfg.resolve("samples", args.samples, n0)?;
    let dim: usize = cfg.resolve("dim", args.dim, d0)?;
    if n < 2 || dim < 1 {
        return Err(usage("spurious search needs at least 2 samples and 1 dimension"));
    }
    let defaults = SpuriousConfig::default();
    let config = SpuriousConfig {
        steps: cfg.resolve("steps", args.steps, defaults.steps)?,
        lr: cfg.resolve("lr", args.lr, defaults.lr)?,
        momentum: cfg.resolve("momentum", args.momentum, defaults.momentum)?,
    };
    if !(config.lr > 0.0) || !(0.0..1.0).contains(&config.momentum) {
        return Err(usage("lr must be positive and momentum must lie in [0, 1)"));
    }
    let baseline_count: usize = cfg.resolve("baseline_count", args.baseline_count, 16)?;
    let bins: usize = cfg.resolve("bins", args.bins, 70)?;
    if baseline_count == 0 || bins == 0 {
        return Err(usage("baseline count and bins must be positive"));
    }
    let target = BimodalTarget::default();
    let seed = RngSeed(shared.seed);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(shared.jobs)
        .build()
        .map_err(|e| anyhow!("thread pool: {e}"))?;
    let report = pool.install(|| -> Result<SpuriousReport> {
        let data = standard_normal_f32(n, dim, &mut seed.keyed(&[SPURIOUS_TAG, 0]))?;
        let (result, y) = find_spurious_projection(&data, &target, &config, &mut seed.keyed(&[SPURIOUS_TAG, 1]))?;
        let baseline = random_baseline(&data, &y, baseline_count, &mut seed.keyed(&[SPURIOUS_TAG, 2]))?;
        let w_random = random_unit_vector(dim, &mut seed.keyed(&[SPURIOUS_TAG, 3]));
        let optimized = data.project(&result.w);
        let random = data.project(w_random.as_slice());
        Ok(SpuriousReport {
            n,
            dim,
            seed: shared.seed,
            steps: config.steps,
            lr: config.lr,
            momentum: config.momentum,
            target_spread: target.spread,
            target_sigma: target.sigma,
            w2_initial: result.w2_initial,
            w2_final: result.w2_final,
            w2_final_rms: result.w2_final_rms(),
            w2_random_median: baseline,
            w2_random_median_rms: baseline.sqrt(),
            baseline_count,
            trajectory: result.trajectory.clone(),
            histogram_optimized: Histogram::from_values(&optimized, bins)?,
            histogram_random: Histogram::from_values(&random, bins)?,
        })
    })?;
    eprintln!(
        "W2 (mean square): optimized {:.4e}, random median {:.4e}",
        report.w2_final, report.w2_random_median
    );

    let mut w = output(shared.out.as_deref())?;
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, &report)?;
            writeln!(w)?;
        }
        Format::Csv => {
            writeln!(w, "step,w2_mean_square")?;
            for (k, v) in report.trajectory.iter().enumerate() {
                writeln!(w, "{k},{}", experiments::format_f64(*v))?;
            }
        }
    }
    w.flush()?;
    if let Some(path) = &args.svg {
        let bimodal = density_curve(&report.histogram_optimized, |x| {
            let s = target.sigma;
            let g = |m: f64| (-(x - m).powi(2) / (2.0 * s * s)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt());
            0.5 * g(-target.spread / 2.0) + 0.5 * g(target.spread / 2.0)
        });
        let normal = density_curve(&report.histogram_random, |x| {
            (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
        });
        let panels = [
            (
                format!("optimized direction, W2 = {:.3e}", report.w2_final),
                &report.histogram_optimized,
                Some(bimodal),
            ),
            (
                format!("random direction, W2 = {:.3e}", report.w2_random_median),
                &report.histogram_random,
                Some(normal),
            ),
        ];
        write_file(path, &svg::histogram_panels(&panels))?;
    }
    Ok(())
}

fn density_curve(hist: &Histogram, f: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
    let (lo, hi) = (hist.edges[0], *hist.edges.last().expect("histogram has edges"));
    (0..=200)
        .map(|k| {
            let x = lo + (hi - lo) * k as f64 / 200.0;
            (x, f(x))
        })
        .collect()
}

/// CSV row as written by the experiment commands.
#[derive(Debug, Deserialize)]
struct CsvRecord {
    experiment: String,
    case: String,
    dim: usize,
    seed: u64,
    layer: i64,
    loss: f64,
    gamma: Option<f64>,
    required_layers: Option<f64>,
}

fn read_records(path: &Path) -> Result<Vec<ConvergenceRecord>> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    reader
        .deserialize::<CsvRecord>()
        .map(|row| {
            let r = row.with_context(|| format!("malformed record in {}", path.display()))?;
            Ok(ConvergenceRecord {
                experiment: r.experiment,
                case: r.case,
                dim: r.dim,
                seed: r.seed,
                layer: r.layer,
                loss: r.loss,
                gamma: r.gamma,
                required_layers: r.required_layers,
            })
        })
        .collect()
}

/// Case family of a record label: `3:all-but-one-shifted/alpha=0.1` → `3:all-but-one-shifted`.
fn family(case: &str) -> &str {
    case.split('/').next().unwrap_or(case)
}

/// Per-dimension medians of required layers per case family and overall,
/// the overall power-law fit and optionally the theory curve.
fn scaling_plot(records: &[ConvergenceRecord], theory_ratio: Option<f64>, title: &str) -> String {
    let summaries: Vec<&ConvergenceRecord> = records.iter().filter(|r| r.is_summary()).collect();
    let mut families: Vec<&str> = summaries.iter().map(|r| family(&r.case)).collect();
    families.sort_unstable();
    families.dedup();
    let mut series = Vec::new();
    for (k, fam) in families.iter().enumerate() {
        let points: Vec<(usize, f64)> = summaries
            .iter()
            .filter(|r| family(&r.case) == *fam)
            .filter_map(|r| r.required_layers.map(|v| (r.dim, v)))
            .collect();
        series.push(Series {
            name: fam.to_string(),
            color: PALETTE[k % PALETTE.len()],
            style: Style::Points,
            points: medians_by_dim(&points).into_iter().map(|(d, v)| (d as f64, v)).collect(),
        });
    }
    let all: Vec<(usize, f64)> = summaries
        .iter()
        .filter_map(|r| r.required_layers.map(|v| (r.dim, v)))
        .collect();
    let dims: Vec<f64> = medians_by_dim(&all).into_iter().map(|(d, _)| d as f64).collect();
    if let Ok(fit) = experiments::fit_scaling_exponent(&all) {
        series.push(Series {
            name: format!("fit D^{:.2}", fit.exponent),
            color: "black",
            style: Style::Line,
            points: dims.iter().map(|&d| (d, fit.predict(d))).collect(),
        });
    }
    if let Some(ratio) = theory_ratio {
        let points: Vec<(f64, f64)> = dims
            .iter()
            .filter_map(|&d| gaussianization_required_layers(d as usize, ratio).ok().map(|l| (d, l.exact)))
            .collect();
        if !points.is_empty() {
            series.push(Series {
                name: "theory (exact rate)".into(),
                color: "#444444",
                style: Style::Dashed,
                points,
            });
        }
    }
    svg::loglog_plot(title, "dimension D", "layers to reach ratio", &series)
}

pub fn plot(args: PlotArgs) -> Result<()> {
    let (cfg, shared) = load_config(&args.common, &["ratio", "title"])?;
    let records = read_records(&args.input)?;
    if !records.iter().any(ConvergenceRecord::is_summary) {
        return Err(usage(format!("{} holds no summary rows", args.input.display())));
    }
    let ratio: f64 = cfg.resolve("ratio", args.ratio, DEFAULT_LOSS_RATIO)?;
    check_ratio(ratio)?;
    let title: String = cfg.resolve("title", args.title, "Required layers vs dimension".to_string())?;
    let theory_ratio = (!args.no_theory && records.iter().any(|r| r.experiment == "gaussian")).then_some(ratio);
    let svg_text = scaling_plot(&records, theory_ratio, &title);
    match &shared.out {
        Some(p) => write_file(p, &svg_text)?,
        None => io::stdout().write_all(svg_text.as_bytes())?,
    }
    if let Ok(fit) = experiments::fit_records(&records) {
        eprintln!(
            "fit: required ≈ {:.4} · D^{:.4} (r² = {:.4})",
            fit.intercept.exp(),
            fit.exponent,
            fit.r_squared
        );
    }
    Ok(())
}
