use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use slim::comparison::compare_models;
use slim::datagen::{GeneratorSpec, GroundTruthModel};
use slim::io::{read_csv, read_json, to_csv, ArtifactWriter};
use slim::metrics::ThresholdPolicy;
use slim::pipeline::{run_workflow, DagReport, DataSource, ModelKind, RunConfig};
use slim::{HyperparameterOverrides, SlimError};

#[derive(Parser)]
#[command(
    name = "slim",
    version,
    about = "Sparse linear identifiable multivariate modeling"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a synthetic dataset and its ground truth.
    Generate {
        /// e.g. "lingam-suite d=5 N=500"
        spec: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full workflow for one model kind.
    Fit(FitArgs),
    /// Compare models from a CSV of per-sweep test log-likelihoods.
    Compare {
        /// Columns are models; an `index` column is ignored.
        loglik: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Structure metrics of a fitted DAG report against a ground truth.
    Metrics {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, value_enum)]
        threshold: Option<Threshold>,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Threshold {
    Bound,
    Half,
}

impl From<Threshold> for ThresholdPolicy {
    fn from(t: Threshold) -> Self {
        match t {
            Threshold::Bound => ThresholdPolicy::RejectionBound,
            Threshold::Half => ThresholdPolicy::Half,
        }
    }
}

#[derive(Args)]
struct FitArgs {
    #[arg(long, value_enum, default_value = "dag")]
    model: ModelKind,
    /// CSV file (observations as rows) or a generator spec prefixed `gen:`.
    #[arg(long)]
    data: String,
    #[arg(long, default_value_t = 0.1)]
    test_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    burnin: Option<usize>,
    #[arg(long)]
    m_top: Option<usize>,
    #[arg(long)]
    beta_m: Option<f64>,
    #[arg(long, default_value_t = 1)]
    latents: usize,
    #[arg(long, default_value_t = 1)]
    fm_chains: usize,
    #[arg(long)]
    dense_prior: bool,
    #[arg(long, value_enum, default_value = "bound")]
    threshold: Threshold,
    /// JSON file of further hyperparameter overrides.
    #[arg(long)]
    hyper: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn fit(a: FitArgs) -> Result<serde_json::Value, SlimError> {
    let data = match a.data.strip_prefix("gen:") {
        Some(spec) => DataSource::Generator(GeneratorSpec::parse(spec)?),
        None => DataSource::Csv(PathBuf::from(&a.data)),
    };
    let mut cfg = RunConfig::new(a.model, data, a.out);
    cfg.seed = a.seed;
    cfg.test_fraction = a.test_fraction;
    cfg.latents = a.latents;
    cfg.fm_chains = a.fm_chains;
    cfg.dense_prior = a.dense_prior;
    cfg.threshold = a.threshold.into();
    let mut o: HyperparameterOverrides = match &a.hyper {
        Some(p) => read_json(p)?,
        None => HyperparameterOverrides::default(),
    };
    o.n_samples = a.samples.or(o.n_samples);
    o.n_burnin = a.burnin.or(o.n_burnin);
    o.m_top = a.m_top.or(o.m_top);
    o.beta_m = a.beta_m.or(o.beta_m);
    cfg.overrides = o;
    let r = run_workflow(&cfg)?;
    Ok(json!({
        "out": cfg.out,
        "selected": r.comparison.selected_label,
        "median_log_ratio": r.comparison.median_log_ratio,
        "metrics": r.metrics,
    }))
}

fn run(cli: Cli) -> Result<serde_json::Value, SlimError> {
    match cli.cmd {
        Cmd::Generate { spec, seed, out } => {
            let (data, truth) = GeneratorSpec::parse(&spec)?.generate(seed)?;
            let mut w = ArtifactWriter::create(&out)?;
            w.begin_step("generate");
            w.write_text("data.csv", &to_csv(&data)?)?;
            w.write_json("truth.json", &truth)?;
            w.finish()?;
            Ok(json!({ "out": out, "d": data.d(), "n": data.n(), "edges": truth.edge_count() }))
        }
        Cmd::Fit(a) => fit(a),
        Cmd::Compare { loglik, out } => {
            let table = read_csv(&loglik)?;
            let models: Vec<(String, Vec<f64>)> = (0..table.d())
                .filter(|&i| table.names()[i] != "index")
                .map(|i| {
                    let v = (0..table.n())
                        .filter(|&t| table.is_observed(i, t))
                        .map(|t| table.values()[i][t])
                        .collect();
                    (table.names()[i].clone(), v)
                })
                .collect();
            let report = compare_models(&models)?;
            if let Some(dir) = out {
                let mut w = ArtifactWriter::create(&dir)?;
                w.begin_step("compare");
                w.write_json("comparison.json", &report)?;
                w.finish()?;
            }
            Ok(json!({
                "selected": report.selected_label,
                "tie": report.tie,
                "median_log_ratio": report.median_log_ratio,
                "medians": report.models.iter().map(|m| (m.label.clone(), m.summary.median)).collect::<Vec<_>>(),
            }))
        }
        Cmd::Metrics {
            report,
            truth,
            threshold,
        } => {
            let mut r: DagReport = read_json(&report)?;
            if let Some(t) = threshold {
                r.threshold = t.into();
            }
            let t: GroundTruthModel = read_json(&truth)?;
            Ok(serde_json::to_value(r.metrics(&t)?)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(v) => {
            println!("{}", serde_json::to_string_pretty(&v).expect("json value"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", json!({ "error": e.kind(), "message": e.to_string() }));
            ExitCode::FAILURE
        }
    }
}
