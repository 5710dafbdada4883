//! End-to-end workflow: partition, factor model with ordering search,
//! candidate orderings, one DAG per candidate, and the held-out comparison.
//!
//! Chains run on a rayon pool sized by `SLIM_WORKERS` (default: all cores).
//! Every chain owns an RNG stream derived from the seed and its index, so
//! results do not depend on the worker count.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::comparison::{compare_models, ComparisonReport};
use crate::dag::{run_dag_chain_with, DagChain, DagConfig, DagSummary, EdgeReport, ParentKind};
use crate::data::{Dataset, Standardization};
use crate::datagen::{GeneratorSpec, GroundTruthModel, TruthKind};
use crate::error::{Result, SlimError};
use crate::factor::{run_factor_chain_with, FactorChain, FactorConfig, FactorMode, FactorSummary};
use crate::gp::{
    run_cslim_chain, run_snim_chain, snim_orderings, GpHyperState, SNIM_MAX_ENUMERATION,
};
use crate::hyper::{HyperparameterOverrides, Hyperparameters, PriorMode};
use crate::io::{columns_to_csv, read_csv, ArtifactWriter, Manifest};
use crate::metrics::{structure_metrics, StructureMetrics, ThresholdPolicy};
use crate::order::PermutationCandidateSet;
use crate::permutation::Permutation;
use crate::rng::RngStream;

pub const WORKERS_ENV: &str = "SLIM_WORKERS";

const STREAM_FM: u64 = 0x100;
const STREAM_DAG: u64 = 0x200;
const STREAM_GP: u64 = 0x300;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Fm,
    #[default]
    Dag,
    DagLatent,
    Cslim,
    Snim,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Csv(PathBuf),
    Generator(GeneratorSpec),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelKind,
    pub data: DataSource,
    pub seed: u64,
    /// Fraction of observations held out (of entries, for CSLIM).
    pub test_fraction: f64,
    /// Factor-model chains whose candidate tallies are pooled.
    pub fm_chains: usize,
    /// Latents of `dag-latent`.
    pub latents: usize,
    /// Dense DAG prior (`β_m = 0.99`) instead of the sparse one.
    pub dense_prior: bool,
    pub threshold: ThresholdPolicy,
    /// SNIM ordering enumeration bound.
    pub snim_max_d: usize,
    pub overrides: HyperparameterOverrides,
    pub out: PathBuf,
}

impl RunConfig {
    pub fn new(model: ModelKind, data: DataSource, out: PathBuf) -> Self {
        Self {
            model,
            data,
            seed: 0,
            test_fraction: 0.1,
            fm_chains: 1,
            latents: 1,
            dense_prior: false,
            threshold: ThresholdPolicy::RejectionBound,
            snim_max_d: SNIM_MAX_ENUMERATION,
            overrides: HyperparameterOverrides::default(),
            out,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(SlimError::InvalidArgument(format!(
                "test fraction must lie in (0, 1), got {}",
                self.test_fraction
            )));
        }
        if self.fm_chains == 0 {
            return Err(SlimError::InvalidArgument(
                "need at least one factor-model chain".into(),
            ));
        }
        if self.model == ModelKind::DagLatent && self.latents == 0 {
            return Err(SlimError::InvalidArgument(
                "dag-latent needs at least one latent".into(),
            ));
        }
        Ok(())
    }

    fn dag_latents(&self) -> usize {
        if self.model == ModelKind::DagLatent {
            self.latents
        } else {
            0
        }
    }

    pub fn factor_hyper(&self) -> Result<Hyperparameters> {
        self.overrides.resolve(PriorMode::Factor)
    }

    pub fn dag_hyper(&self) -> Result<Hyperparameters> {
        self.overrides.resolve(PriorMode::Dag {
            dense: self.dense_prior,
            latents: self.dag_latents() > 0,
        })
    }
}

/// Worker count from `SLIM_WORKERS`, if set and positive.
pub fn workers_from_env() -> Option<usize> {
    std::env::var(WORKERS_ENV)
        .ok()?
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
}

/// Load or generate the data; the truth comes with generated data.
pub fn load_data(source: &DataSource, seed: u64) -> Result<(Dataset, Option<GroundTruthModel>)> {
    match source {
        DataSource::Csv(p) => Ok((read_csv(p)?, None)),
        DataSource::Generator(g) => g.generate(seed).map(|(d, t)| (d, Some(t))),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PartitionReport {
    pub n_train: usize,
    pub n_test: usize,
    pub names: Vec<String>,
    pub standardization: Standardization,
}

/// One exported DAG fit.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DagReport {
    pub label: String,
    pub alpha_m: f64,
    pub threshold: ThresholdPolicy,
    pub summary: DagSummary,
    pub edges: Vec<EdgeReport>,
}

impl DagReport {
    fn new(
        label: String,
        chain: &DagChain,
        hp: &Hyperparameters,
        threshold: ThresholdPolicy,
    ) -> Result<Self> {
        let summary = chain.summary()?;
        let edges = summary.edges(hp.alpha_m, threshold);
        Ok(Self {
            label,
            alpha_m: hp.alpha_m,
            threshold,
            summary,
            edges,
        })
    }

    pub fn adjacency(&self) -> Vec<Vec<bool>> {
        self.summary
            .edge_estimate(self.alpha_m)
            .adjacency(self.threshold)
    }

    pub fn metrics(&self, truth: &GroundTruthModel) -> Result<StructureMetrics> {
        structure_metrics(
            &self.summary.edge_estimate(self.alpha_m),
            &truth.r,
            self.threshold,
        )
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FactorReport {
    pub summary: FactorSummary,
    pub acceptance: Vec<f64>,
    pub candidates: PermutationCandidateSet,
    pub top: Vec<Permutation>,
}

#[derive(Clone, Debug)]
pub struct WorkflowResult {
    pub comparison: ComparisonReport,
    pub candidates: Vec<Permutation>,
    pub dags: Vec<DagReport>,
    /// Index into `dags` of the DAG with the highest median test likelihood.
    pub best_dag: Option<usize>,
    pub metrics: Option<StructureMetrics>,
    pub manifest: Manifest,
}

/// Run the workflow on a pool sized by `SLIM_WORKERS`.
pub fn run_workflow(cfg: &RunConfig) -> Result<WorkflowResult> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers_from_env() {
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| SlimError::InvalidArgument(format!("worker pool: {e}")))?;
    pool.install(|| run_workflow_inner(cfg))
}

fn run_workflow_inner(cfg: &RunConfig) -> Result<WorkflowResult> {
    cfg.validate()?;
    let (data, truth) = load_data(&cfg.data, cfg.seed)?;
    let mut w = ArtifactWriter::create(&cfg.out)?;
    w.write_json("config.json", cfg)?;
    if let Some(t) = &truth {
        w.write_json("truth.json", t)?;
    }
    match cfg.model {
        ModelKind::Fm | ModelKind::Dag | ModelKind::DagLatent => {
            linear_workflow(cfg, &data, truth.as_ref(), w)
        }
        ModelKind::Cslim => cslim_workflow(cfg, &data, w),
        ModelKind::Snim => snim_workflow(cfg, &data, truth.as_ref(), w),
    }
}

/// Standardize the training part and apply its statistics to the test part.
fn partition(
    cfg: &RunConfig,
    data: &Dataset,
    w: &mut ArtifactWriter,
) -> Result<(Dataset, Dataset)> {
    w.begin_step("partition");
    let (train, test) = data.partition(cfg.test_fraction, cfg.seed)?;
    let (train, stats) = train.standardize_with_stats()?;
    let test = stats.apply(&test)?;
    w.write_json(
        "partition.json",
        &PartitionReport {
            n_train: train.n(),
            n_test: test.n(),
            names: data.names().to_vec(),
            standardization: stats,
        },
    )?;
    Ok((train, test))
}

fn loglik_columns(cmp: &ComparisonReport) -> Vec<(String, Vec<f64>)> {
    cmp.models
        .iter()
        .map(|m| (m.label.clone(), m.samples.clone()))
        .collect()
}

fn linear_workflow(
    cfg: &RunConfig,
    data: &Dataset,
    truth: Option<&GroundTruthModel>,
    mut w: ArtifactWriter,
) -> Result<WorkflowResult> {
    let (train, test) = partition(cfg, data, &mut w)?;
    let fm_hp = cfg.factor_hyper()?;

    w.begin_step("factor_model");
    // latent columns sit past the triangular block during order search
    let fm_cfg = FactorConfig {
        factors: Some(train.d() + cfg.dag_latents()),
        ..FactorConfig::default()
    };
    let fm: Vec<FactorChain> = (0..cfg.fm_chains)
        .into_par_iter()
        .map(|c| {
            let mut rng = RngStream::new(cfg.seed, STREAM_FM + c as u64);
            let mode = if cfg.model == ModelKind::Fm {
                FactorMode::Plain
            } else {
                FactorMode::OrderSearch
            };
            run_factor_chain_with(&train, Some(&test), &fm_hp, mode, &fm_cfg, &mut rng)
        })
        .collect::<Result<_>>()?;
    // sweep-paired samples pooled over chains
    let fm_ll: Vec<f64> = fm
        .iter()
        .flat_map(|c| c.test_loglik.iter().copied())
        .collect();

    w.begin_step("factor_summary");
    let mut pooled = PermutationCandidateSet::new();
    for c in &fm {
        pooled.merge(&c.candidates);
    }
    let top = if cfg.model == ModelKind::Fm {
        Vec::new()
    } else {
        pooled.top_candidates(fm_hp.m_top)?
    };
    w.write_json(
        "fm_summary.json",
        &FactorReport {
            summary: fm[0].summary()?,
            acceptance: fm.iter().map(|c| c.acceptance).collect(),
            candidates: pooled,
            top: top.clone(),
        },
    )?;

    w.begin_step("candidates");
    w.write_json("candidates.json", &top)?;

    w.begin_step("dag_inference");
    let dag_hp = cfg.dag_hyper()?;
    let dcfg = DagConfig::with_latents(cfg.dag_latents());
    let chains: Vec<DagChain> = top
        .par_iter()
        .enumerate()
        .map(|(k, p)| {
            let mut rng = RngStream::new(cfg.seed, STREAM_DAG + k as u64);
            run_dag_chain_with(&train, Some(&test), p, &dag_hp, &dcfg, &mut rng)
        })
        .collect::<Result<_>>()?;

    w.begin_step("dag_summary");
    let mut dags = Vec::with_capacity(chains.len());
    let mut models = vec![("fm".to_string(), fm_ll)];
    for (k, c) in chains.iter().enumerate() {
        let label = format!("dag_{k}");
        let r = DagReport::new(label.clone(), c, &dag_hp, cfg.threshold)?;
        w.write_json(&format!("{label}.json"), &r)?;
        dags.push(r);
        models.push((label, c.test_loglik.clone()));
    }
    finish(cfg, truth, w, models, top, dags)
}

fn finish(
    _cfg: &RunConfig,
    truth: Option<&GroundTruthModel>,
    mut w: ArtifactWriter,
    models: Vec<(String, Vec<f64>)>,
    candidates: Vec<Permutation>,
    dags: Vec<DagReport>,
) -> Result<WorkflowResult> {
    let comparison = if models.len() >= 2 {
        compare_models(&models)?
    } else {
        // a factor model alone is trivially selected
        let m = &models[0];
        ComparisonReport {
            models: vec![crate::comparison::ModelEntry {
                label: m.0.clone(),
                samples: m.1.clone(),
                summary: crate::summary::Quantiles::of(&m.1)?,
            }],
            selected: 0,
            selected_label: m.0.clone(),
            tie: false,
            log_ratio: None,
            median_log_ratio: None,
        }
    };
    w.write_text(
        "test_loglik.csv",
        &columns_to_csv(&loglik_columns(&comparison))?,
    )?;
    w.write_json("comparison.json", &comparison)?;
    let best_dag = comparison
        .models
        .iter()
        .filter_map(|m| {
            dags.iter()
                .position(|d| d.label == m.label)
                .map(|k| (k, m.summary.median))
        })
        .fold(None::<(usize, f64)>, |acc, (k, v)| match acc {
            Some((_, b)) if b >= v => acc,
            _ => Some((k, v)),
        })
        .map(|(k, _)| k);
    let metrics = match (truth, best_dag) {
        (Some(t), Some(k)) if t.kind == TruthKind::Dag => {
            let m = dags[k].metrics(t)?;
            w.write_json("metrics.json", &m)?;
            Some(m)
        }
        _ => None,
    };
    let manifest = w.finish()?;
    Ok(WorkflowResult {
        comparison,
        candidates,
        dags,
        best_dag,
        metrics,
        manifest,
    })
}

fn cslim_workflow(
    cfg: &RunConfig,
    data: &Dataset,
    mut w: ArtifactWriter,
) -> Result<WorkflowResult> {
    w.begin_step("partition");
    let data = data.standardize()?;
    let masked = data.mask_random(cfg.test_fraction, cfg.seed)?;
    w.write_json(
        "partition.json",
        &serde_json::json!({ "masked_fraction": cfg.test_fraction, "n": data.n() }),
    )?;
    let hp = cfg.factor_hyper()?;
    let fcfg = FactorConfig::default();

    w.begin_step("factor_model");
    let runs: Vec<(String, FactorChain)> = [false, true]
        .into_par_iter()
        .map(|gp| {
            let mut rng = RngStream::new(cfg.seed, STREAM_GP + gp as u64);
            let chain = if gp {
                run_cslim_chain(&masked, &hp, &fcfg, &mut rng)
            } else {
                run_factor_chain_with(
                    &masked,
                    None,
                    &hp,
                    FactorMode::MissingValues,
                    &fcfg,
                    &mut rng,
                )
            }?;
            Ok((if gp { "cslim" } else { "fm" }.to_string(), chain))
        })
        .collect::<Result<_>>()?;

    w.begin_step("factor_summary");
    for (label, c) in &runs {
        w.write_json(&format!("{label}_summary.json"), &c.summary()?)?;
    }
    w.write_json("cslim_hyper.json", &GpHyperState::of(&runs[1].1.state))?;
    let models = runs
        .iter()
        .map(|(l, c)| (l.clone(), c.missing_loglik.clone()))
        .collect();
    finish(cfg, None, w, models, Vec::new(), Vec::new())
}

fn snim_workflow(
    cfg: &RunConfig,
    data: &Dataset,
    truth: Option<&GroundTruthModel>,
    mut w: ArtifactWriter,
) -> Result<WorkflowResult> {
    let orders = snim_orderings(data.d(), cfg.snim_max_d)?;
    let (train, test) = partition(cfg, data, &mut w)?;
    w.begin_step("candidates");
    w.write_json("candidates.json", &orders)?;

    w.begin_step("dag_inference");
    let hp = cfg.dag_hyper()?;
    let dcfg = DagConfig {
        parents: ParentKind::GpPerParent,
        ..DagConfig::default()
    };
    let chains: Vec<DagChain> = orders
        .par_iter()
        .enumerate()
        .map(|(k, p)| {
            let mut rng = RngStream::new(cfg.seed, STREAM_GP + 0x10 + k as u64);
            run_snim_chain(&train, Some(&test), p, &hp, &dcfg, &mut rng)
        })
        .collect::<Result<_>>()?;

    w.begin_step("dag_summary");
    let mut dags = Vec::new();
    let mut models = Vec::new();
    for (k, c) in chains.iter().enumerate() {
        let label = format!("snim_{k}");
        let r = DagReport::new(label.clone(), c, &hp, cfg.threshold)?;
        w.write_json(&format!("{label}.json"), &r)?;
        dags.push(r);
        models.push((label, c.test_loglik.clone()));
    }
    finish(cfg, truth, w, models, orders, dags)
}
