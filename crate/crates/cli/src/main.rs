use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use lfppl::compiler::dump::to_json;
use lfppl::harness::output::{write_json, write_samples_csv};
use lfppl::harness::{self, GmmSettings, HeavyTailSettings, Scale};
use lfppl::inference::{sample_program, Engine, SamplerConfig};
use lfppl::CompiledProgram;

#[derive(Parser)]
#[command(name = "lfppl", version, about = "Compile LF-PPL programs and sample them with HMC or DHMC")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the compiled quadruple as JSON.
    Compile {
        file: PathBuf,
        /// bind a free variable, e.g. `--const q=0.5`
        #[arg(long = "const", value_name = "NAME=VALUE", value_parser = parse_binding)]
        consts: Vec<(String, f64)>,
    },
    /// Run a chain and write samples as CSV plus a stats JSON alongside.
    Sample {
        file: PathBuf,
        #[arg(long, value_enum)]
        engine: EngineArg,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        steps: usize,
        #[arg(long, default_value_t = 1000)]
        num_samples: usize,
        #[arg(long, default_value_t = 100)]
        burn_in: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// mass of a discontinuous variable, by sampled or `let` name
        #[arg(long = "mass", value_name = "NAME=VALUE", value_parser = parse_binding)]
        masses: Vec<(String, f64)>,
        #[arg(long = "const", value_name = "NAME=VALUE", value_parser = parse_binding)]
        consts: Vec<(String, f64)>,
    },
    /// Reproduce one of the two experiments.
    Experiment {
        #[arg(value_enum)]
        name: ExperimentArg,
        #[arg(long, default_value_t = 10)]
        dims: usize,
        #[arg(long, value_enum, default_value_t = ScaleArg::Desk)]
        scale: ScaleArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Hmc,
    Dhmc,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExperimentArg {
    Gmm,
    Heavytail,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    Desk,
    Full,
}

fn parse_binding(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s.split_once('=').ok_or_else(|| format!("expected NAME=VALUE, got '{s}'"))?;
    let v: f64 = value.trim().parse().map_err(|e| format!("bad value in '{s}': {e}"))?;
    Ok((name.trim().to_string(), v))
}

enum Failure {
    Usage(String),
    Compile(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Compile(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Compile(m) | Failure::Runtime(m) => m,
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn load(file: &Path, consts: &[(String, f64)]) -> Result<CompiledProgram, Failure> {
    let src = std::fs::read_to_string(file).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", file.display())))?;
    let consts: BTreeMap<String, f64> = consts.iter().cloned().collect();
    let name = file.display().to_string();
    lfppl::compile_source(&src, &name, &consts).map_err(|e| Failure::Compile(format!("{name}: {e}")))
}

fn sample(
    file: &Path,
    cfg: SamplerConfig,
    masses: &[(String, f64)],
    consts: &[(String, f64)],
    out: &Path,
) -> Result<(), Failure> {
    let c = load(file, consts)?;
    let mut cfg = cfg;
    for (name, m) in masses {
        let var = c.variable_for(name).unwrap_or(name);
        cfg.masses.insert(var.to_string(), *m);
    }
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let chain = sample_program(&c, &cfg).map_err(runtime)?;
    let f = std::fs::File::create(out).map_err(runtime)?;
    write_samples_csv(&chain, f).map_err(runtime)?;
    let stats = serde_json::json!({ "config": cfg, "stats": chain.stats });
    write_json(&out.with_extension("stats.json"), &stats).map_err(runtime)?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Compile { file, consts } => {
            let c = load(&file, &consts)?;
            let json = serde_json::to_string_pretty(&to_json(&c.quadruple)).map_err(runtime)?;
            println!("{json}");
            Ok(())
        }
        Command::Sample { file, engine, epsilon, steps, num_samples, burn_in, seed, out, masses, consts } => {
            let engine = match engine {
                EngineArg::Hmc => Engine::Hmc,
                EngineArg::Dhmc => Engine::Dhmc,
            };
            let cfg = SamplerConfig { engine, epsilon, steps, num_samples, burn_in, seed, masses: BTreeMap::new() };
            sample(&file, cfg, &masses, &consts, &out)
        }
        Command::Experiment { name, dims, scale, seed, out } => {
            let scale = match scale {
                ScaleArg::Desk => Scale::Desk,
                ScaleArg::Full => Scale::Full,
            };
            match name {
                ExperimentArg::Gmm => {
                    let run = harness::run_gmm(&GmmSettings::for_scale(scale), seed).map_err(runtime)?;
                    harness::write_gmm(&out, &run).map_err(runtime)?;
                    let r = &run.report;
                    println!(
                        "gmm: posterior means ({:.4}, {:.4}), reference ({:.4}, {:.4}), acceptance {:.3}",
                        r.posterior_means[0], r.posterior_means[1], r.reference.means[0], r.reference.means[1], r.stats.acceptance_rate
                    );
                }
                ExperimentArg::Heavytail => {
                    if dims == 0 {
                        return Err(Failure::Usage("--dims must be at least 1".into()));
                    }
                    let report =
                        harness::run_heavytail(&HeavyTailSettings::for_scale(scale, dims), seed).map_err(runtime)?;
                    harness::write_heavytail(&out, &report).map_err(runtime)?;
                    println!(
                        "heavytail D={dims}: median WMAE dhmc {:.4} hmc {:.4}; mean acceptance dhmc {:.3} hmc {:.3}",
                        report.dhmc.median_wmae, report.hmc.median_wmae, report.dhmc.mean_acceptance, report.hmc.mean_acceptance
                    );
                }
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
