//! The mixture and heavy-tail experiments at desk or full scale.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::diagnostics::{self, DiagnosticsError};
use super::output::{write_dat, write_json, write_samples_csv};
use super::programs;
use super::reference::{MixtureModel, ReferencePosterior};
use crate::compiler::{compile_source, CompileError, CompiledProgram};
use crate::inference::{sample_program, ChainOutput, ChainStats, Engine, InferenceError, SamplerConfig};

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error("{0}")]
    Setup(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Desk,
    Full,
}

impl std::str::FromStr for Scale {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "desk" => Ok(Scale::Desk),
            "full" => Ok(Scale::Full),
            other => Err(format!("unknown scale '{other}' (expected desk or full)")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub mse_vs_reference: Option<f64>,
    pub wmae: Option<f64>,
    pub acceptance: f64,
    pub crossings: u64,
    pub ess: BTreeMap<String, f64>,
}

/// Everything needed to repeat a run, plus what it produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub program_path: String,
    pub config: SamplerConfig,
    pub output_path: String,
    pub diagnostics: Vec<Diagnostics>,
}

fn ess_by_name(chain: &ChainOutput<f64>) -> BTreeMap<String, f64> {
    chain
        .names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.clone(), diagnostics::ess(&chain.samples.iter().map(|s| s[i]).collect::<Vec<_>>())))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmSettings {
    pub samples: usize,
    pub burn_in: usize,
    pub epsilon: f64,
    pub steps: usize,
    pub grid_resolution: usize,
    pub mse_window: usize,
}

impl GmmSettings {
    pub fn for_scale(scale: Scale) -> Self {
        let (samples, burn_in) = match scale {
            Scale::Desk => (20_000, 2_000),
            Scale::Full => (100_000, 10_000),
        };
        GmmSettings { samples, burn_in, epsilon: 0.1, steps: 10, grid_resolution: 400, mse_window: 1_000 }
    }

    pub fn config(&self, seed: u64) -> SamplerConfig {
        SamplerConfig {
            engine: Engine::Dhmc,
            epsilon: self.epsilon,
            steps: self.steps,
            num_samples: self.samples,
            burn_in: self.burn_in,
            seed,
            masses: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmReport {
    pub settings: GmmSettings,
    pub seed: u64,
    /// sampled variables standing for `mu1` and `mu2`
    pub mean_variables: [String; 2],
    pub reference: ReferencePosterior,
    /// canonically ordered posterior means
    pub posterior_means: [f64; 2],
    pub abs_errors: [f64; 2],
    pub windowed_mse: Vec<f64>,
    pub mse_non_increasing: bool,
    pub stats: ChainStats,
    pub ess: BTreeMap<String, f64>,
}

pub struct GmmRun {
    pub report: GmmReport,
    pub chain: ChainOutput<f64>,
    pub mse_curve: Vec<f64>,
}

pub fn compile_gmm() -> Result<(CompiledProgram, [String; 2]), ExperimentError> {
    let c = compile_source(programs::GMM, "gmm.lfppl", &BTreeMap::new())?;
    let var = |b: &str| {
        c.variable_for(b).map(str::to_string).ok_or_else(|| ExperimentError::Setup(format!("no sample bound to '{b}'")))
    };
    let names = [var("mu1")?, var("mu2")?];
    Ok((c, names))
}

pub fn run_gmm(settings: &GmmSettings, seed: u64) -> Result<GmmRun, ExperimentError> {
    let (c, vars) = compile_gmm()?;
    let reference = MixtureModel::benchmark_data().grid_reference(settings.grid_resolution, -6.0, 6.0);
    let chain = sample_program(&c, &settings.config(seed))?;
    let column = |v: &str| chain.column(v).ok_or_else(|| ExperimentError::Setup(format!("no column '{v}'")));
    let ordered = diagnostics::canonical_order(&[column(&vars[0])?, column(&vars[1])?])?;
    let posterior_means = [diagnostics::mean(&ordered[0]), diagnostics::mean(&ordered[1])];
    let mse_curve = diagnostics::running_mse(&ordered, &reference.means)?;
    let windowed_mse = diagnostics::window_means(&mse_curve, settings.mse_window);
    let report = GmmReport {
        settings: settings.clone(),
        seed,
        abs_errors: [0, 1].map(|k| (posterior_means[k] - reference.means[k]).abs()),
        mse_non_increasing: diagnostics::is_non_increasing(&windowed_mse),
        windowed_mse,
        posterior_means,
        mean_variables: vars,
        reference,
        stats: chain.stats.clone(),
        ess: ess_by_name(&chain),
    };
    Ok(GmmRun { report, chain, mse_curve })
}

pub fn write_gmm(dir: &Path, run: &GmmRun) -> Result<RunManifest, ExperimentError> {
    std::fs::create_dir_all(dir)?;
    write_samples_csv(&run.chain, std::fs::File::create(dir.join("samples.csv"))?)?;
    write_json(&dir.join("report.json"), &run.report)?;
    let rows: Vec<Vec<f64>> = run.mse_curve.iter().enumerate().map(|(i, m)| vec![(i + 1) as f64, *m]).collect();
    write_dat(&dir.join("mse.dat"), &["samples", "mse"], &rows)?;
    write_json(&dir.join("timing.json"), &serde_json::json!({ "wall_clock_secs": run.chain.stats.wall_clock_secs }))?;
    let manifest = RunManifest {
        program_path: "fixtures/gmm.lfppl".into(),
        config: run.report.settings.config(run.report.seed),
        output_path: dir.display().to_string(),
        diagnostics: vec![Diagnostics {
            mse_vs_reference: run.mse_curve.last().copied(),
            wmae: None,
            acceptance: run.chain.stats.acceptance_rate,
            crossings: run.chain.stats.crossings,
            ess: run.report.ess.clone(),
        }],
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeavyTailSettings {
    pub dims: usize,
    pub runs: usize,
    pub samples: usize,
    pub burn_in: usize,
    pub epsilon: f64,
    pub steps: usize,
    pub checkpoints: usize,
}

impl HeavyTailSettings {
    pub fn for_scale(scale: Scale, dims: usize) -> Self {
        let samples = match scale {
            Scale::Desk => 10_000,
            Scale::Full => 100_000,
        };
        HeavyTailSettings { dims, runs: 20, samples, burn_in: 1_000, epsilon: 0.3, steps: 20, checkpoints: 20 }
    }

    pub fn config(&self, engine: Engine, seed: u64) -> SamplerConfig {
        SamplerConfig {
            engine,
            epsilon: self.epsilon,
            steps: self.steps,
            num_samples: self.samples,
            burn_in: self.burn_in,
            seed,
            masses: BTreeMap::new(),
        }
    }

    pub fn checkpoint_counts(&self) -> Vec<usize> {
        let k = self.checkpoints.clamp(1, self.samples.max(1));
        (1..=k).map(|i| i * self.samples / k).filter(|&n| n > 0).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineSummary {
    pub engine: Engine,
    /// per run, at the final checkpoint
    pub wmae: Vec<f64>,
    pub acceptance: Vec<f64>,
    pub median_wmae: f64,
    pub mean_acceptance: f64,
    /// median over runs at each checkpoint
    pub median_wmae_curve: Vec<f64>,
    #[serde(skip)]
    pub median_seconds_curve: Vec<f64>,
    #[serde(skip)]
    pub manifest: Vec<Diagnostics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeavyTailReport {
    pub settings: HeavyTailSettings,
    pub seed: u64,
    pub checkpoints: Vec<usize>,
    pub dhmc: EngineSummary,
    pub hmc: EngineSummary,
}

struct RunResult {
    wmae_curve: Vec<f64>,
    seconds_curve: Vec<f64>,
    diagnostics: Diagnostics,
}

fn heavytail_run(
    c: &CompiledProgram,
    settings: &HeavyTailSettings,
    engine: Engine,
    seed: u64,
    checkpoints: &[usize],
) -> Result<RunResult, ExperimentError> {
    let chain = sample_program(c, &settings.config(engine, seed))?;
    let columns: Vec<Vec<f64>> = (0..chain.names.len()).map(|i| chain.samples.iter().map(|s| s[i]).collect()).collect();
    let wmae_curve = diagnostics::wmae_curve(&columns, checkpoints)?;
    let per_iter = chain.stats.wall_clock_secs / chain.stats.iterations.max(1) as f64;
    let seconds_curve = checkpoints.iter().map(|&n| (settings.burn_in + n) as f64 * per_iter).collect();
    let diagnostics = Diagnostics {
        mse_vs_reference: None,
        wmae: wmae_curve.last().copied(),
        acceptance: chain.stats.acceptance_rate,
        crossings: chain.stats.crossings,
        ess: ess_by_name(&chain),
    };
    Ok(RunResult { wmae_curve, seconds_curve, diagnostics })
}

fn summarize(engine: Engine, runs: Vec<RunResult>, checkpoints: usize) -> EngineSummary {
    let median_at = |f: &dyn Fn(&RunResult) -> f64| diagnostics::median(&runs.iter().map(f).collect::<Vec<_>>());
    let median_wmae_curve = (0..checkpoints).map(|k| median_at(&|r| r.wmae_curve[k])).collect();
    let median_seconds_curve = (0..checkpoints).map(|k| median_at(&|r| r.seconds_curve[k])).collect();
    let wmae: Vec<f64> = runs.iter().map(|r| r.diagnostics.wmae.unwrap_or(f64::NAN)).collect();
    let acceptance: Vec<f64> = runs.iter().map(|r| r.diagnostics.acceptance).collect();
    EngineSummary {
        engine,
        median_wmae: diagnostics::median(&wmae),
        mean_acceptance: diagnostics::mean(&acceptance),
        wmae,
        acceptance,
        median_wmae_curve,
        median_seconds_curve,
        manifest: runs.into_iter().map(|r| r.diagnostics).collect(),
    }
}

/// Seed of run `r`; both engines share it.
pub fn run_seed(seed: u64, r: usize) -> u64 {
    seed.wrapping_add(r as u64)
}

pub fn run_heavytail(settings: &HeavyTailSettings, seed: u64) -> Result<HeavyTailReport, ExperimentError> {
    let src = programs::heavytail_source(settings.dims, None).map_err(ExperimentError::Setup)?;
    let c = compile_source(&src, "heavytail", &BTreeMap::new())?;
    let checkpoints = settings.checkpoint_counts();
    let jobs: Vec<(Engine, usize)> =
        [Engine::Dhmc, Engine::Hmc].into_iter().flat_map(|e| (0..settings.runs).map(move |r| (e, r))).collect();
    let results: Vec<RunResult> = jobs
        .par_iter()
        .map(|&(e, r)| heavytail_run(&c, settings, e, run_seed(seed, r), &checkpoints))
        .collect::<Result<_, _>>()?;
    let mut results = results.into_iter();
    let dhmc: Vec<RunResult> = results.by_ref().take(settings.runs).collect();
    let hmc: Vec<RunResult> = results.collect();
    Ok(HeavyTailReport {
        settings: settings.clone(),
        seed,
        dhmc: summarize(Engine::Dhmc, dhmc, checkpoints.len()),
        hmc: summarize(Engine::Hmc, hmc, checkpoints.len()),
        checkpoints,
    })
}

pub fn write_heavytail(dir: &Path, report: &HeavyTailReport) -> Result<Vec<PathBuf>, ExperimentError> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: &str| {
        let p = dir.join(name);
        written.push(p.clone());
        p
    };
    write_json(&put("report.json"), report)?;
    let (d, h) = (&report.dhmc, &report.hmc);
    let sample_rows: Vec<Vec<f64>> = (0..report.checkpoints.len())
        .map(|k| vec![report.checkpoints[k] as f64, d.median_wmae_curve[k], h.median_wmae_curve[k]])
        .collect();
    write_dat(&put("wmae_samples.dat"), &["samples", "dhmc", "hmc"], &sample_rows)?;
    let time_rows: Vec<Vec<f64>> = (0..report.checkpoints.len())
        .map(|k| vec![d.median_seconds_curve[k], d.median_wmae_curve[k], h.median_seconds_curve[k], h.median_wmae_curve[k]])
        .collect();
    write_dat(&put("wmae_time.dat"), &["dhmc_seconds", "dhmc_wmae", "hmc_seconds", "hmc_wmae"], &time_rows)?;
    for s in [d, h] {
        let name = format!("manifest_{}.json", if s.engine == Engine::Dhmc { "dhmc" } else { "hmc" });
        let manifest = RunManifest {
            program_path: format!("<generated heavy-tail program, {} dims>", report.settings.dims),
            config: report.settings.config(s.engine, report.seed),
            output_path: dir.display().to_string(),
            diagnostics: s.manifest.clone(),
        };
        write_json(&put(&name), &manifest)?;
    }
    Ok(written)
}
