mod commands;
mod input;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::anyhow;
use clap::{Args, Parser, Subcommand};
use posform::pricing_form::ImpliedFormOptions;
use posform::stochvol::McConfig;

use commands::{Classify, Failure, Run, EXIT_DETECTED, EXIT_OK, EXIT_USAGE};
use output::{manifest_path, write_json, RunManifest, SCHEMA_VERSION};

/// Arbitrage-free pricing with positive linear forms.
#[derive(Debug, Parser)]
#[command(name = "posform", version)]
struct Cli {
    /// Directory for result files and manifests.
    #[arg(long, global = true, env = "POSFORM_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Static-arbitrage check of a call curve (exit 2 on violation).
    ValidateCurve(ValidateCurveArgs),
    /// Pricing form implied by a call curve.
    ImpliedForm(ImpliedFormArgs),
    /// Price a payoff under a stored form.
    Price(PriceArgs),
    /// Sub/super-replication bounds in a finite market (exit 2 on arbitrage).
    Bounds(BoundsArgs),
    /// Generator and propagator checks for a pricing-kernel scenario.
    KernelCheck(KernelCheckArgs),
    /// Naive vs conditioned martingality estimators (exit 2 on a defect).
    Martingality(MartingalityArgs),
    /// Barrier/step-count sweep of the survival estimate (exit 2 on a defect).
    BarrierSweep(BarrierSweepArgs),
    /// Rerun a stored manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
struct ValidateCurveArgs {
    #[arg(long)]
    curve: PathBuf,
    #[arg(long)]
    spot: f64,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Result file; relative paths resolve against --out-dir.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ImpliedFormArgs {
    #[arg(long)]
    curve: PathBuf,
    #[arg(long)]
    spot: f64,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PriceArgs {
    #[arg(long)]
    form: PathBuf,
    #[arg(long)]
    payoff: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BoundsArgs {
    #[arg(long)]
    market: PathBuf,
    #[arg(long)]
    target: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct KernelCheckArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct McArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 100_000)]
    paths: usize,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
}

impl McArgs {
    fn config(&self) -> McConfig {
        McConfig {
            paths: self.paths,
            seed: self.seed,
            workers: self.workers,
        }
    }
}

#[derive(Debug, Args)]
struct MartingalityArgs {
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    mc: McArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BarrierSweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated barrier levels.
    #[arg(long, value_delimiter = ',', required = true)]
    barriers: Vec<f64>,
    /// Comma-separated step counts.
    #[arg(long, value_delimiter = ',', required = true)]
    steps: Vec<usize>,
    #[command(flatten)]
    mc: McArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReplayArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Overrides the stored worker count.
    #[arg(long)]
    workers: Option<usize>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::ValidateCurve(_) => "validate-curve",
            Command::ImpliedForm(_) => "implied-form",
            Command::Price(_) => "price",
            Command::Bounds(_) => "bounds",
            Command::KernelCheck(_) => "kernel-check",
            Command::Martingality(_) => "martingality",
            Command::BarrierSweep(_) => "barrier-sweep",
            Command::Replay(_) => "replay",
        }
    }

    /// Canonical arguments for the manifest: absolute input paths, no
    /// `--out-dir` and no `--workers`.
    fn manifest_args(&self) -> Vec<String> {
        fn path(flag: &str, p: &Path, out: &mut Vec<String>) {
            let abs = std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf());
            out.push(flag.into());
            out.push(abs.display().to_string());
        }
        fn val(flag: &str, v: impl ToString, out: &mut Vec<String>) {
            out.push(flag.into());
            out.push(v.to_string());
        }
        fn out_flag(o: &Option<PathBuf>, out: &mut Vec<String>) {
            if let Some(o) = o {
                val("--out", o.display(), out);
            }
        }
        fn mc(m: &McArgs, out: &mut Vec<String>) {
            val("--seed", m.seed, out);
            val("--paths", m.paths, out);
        }
        fn list<T: ToString>(xs: &[T]) -> String {
            xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
        }

        let mut a = Vec::new();
        match self {
            Command::ValidateCurve(c) => {
                path("--curve", &c.curve, &mut a);
                val("--spot", c.spot, &mut a);
                val("--tol", c.tol, &mut a);
                out_flag(&c.out, &mut a);
            }
            Command::ImpliedForm(c) => {
                path("--curve", &c.curve, &mut a);
                val("--spot", c.spot, &mut a);
                val("--tol", c.tol, &mut a);
                out_flag(&c.out, &mut a);
            }
            Command::Price(c) => {
                path("--form", &c.form, &mut a);
                path("--payoff", &c.payoff, &mut a);
                out_flag(&c.out, &mut a);
            }
            Command::Bounds(c) => {
                path("--market", &c.market, &mut a);
                path("--target", &c.target, &mut a);
                out_flag(&c.out, &mut a);
            }
            Command::KernelCheck(c) => {
                path("--scenario", &c.scenario, &mut a);
                out_flag(&c.out, &mut a);
            }
            Command::Martingality(c) => {
                path("--config", &c.config, &mut a);
                mc(&c.mc, &mut a);
                out_flag(&c.out, &mut a);
            }
            Command::BarrierSweep(c) => {
                path("--config", &c.config, &mut a);
                val("--barriers", list(&c.barriers), &mut a);
                val("--steps", list(&c.steps), &mut a);
                mc(&c.mc, &mut a);
                out_flag(&c.out, &mut a);
            }
            Command::Replay(_) => {}
        }
        a
    }
}

fn resolve_out(out_dir: &Path, out: &Option<PathBuf>, name: &str) -> PathBuf {
    match out {
        Some(p) if p.is_absolute() => p.clone(),
        Some(p) => out_dir.join(p),
        None => out_dir.join(format!("{name}.json")),
    }
}

fn dispatch(cmd: &Command, out_dir: &Path) -> Result<Run, Failure> {
    let out = |o: &Option<PathBuf>| resolve_out(out_dir, o, cmd.name());
    match cmd {
        Command::ValidateCurve(c) => commands::validate_curve(&c.curve, c.spot, c.tol, out(&c.out)),
        Command::ImpliedForm(c) => {
            let opts = ImpliedFormOptions {
                curve_tol: c.tol,
                ..ImpliedFormOptions::default()
            };
            commands::implied_form(&c.curve, c.spot, &opts, out(&c.out))
        }
        Command::Price(c) => commands::price(&c.form, &c.payoff, out(&c.out)),
        Command::Bounds(c) => commands::bounds(&c.market, &c.target, out(&c.out)),
        Command::KernelCheck(c) => commands::kernel_check(&c.scenario, out(&c.out)),
        Command::Martingality(c) => commands::martingality(&c.config, c.mc.config(), out(&c.out)),
        Command::BarrierSweep(c) => {
            commands::barrier_sweep(&c.config, &c.barriers, &c.steps, c.mc.config(), out(&c.out))
        }
        Command::Replay(_) => unreachable!("replay is resolved before dispatch"),
    }
}

/// Turns a replay request into the stored command, with an optional
/// worker override.
fn replay_command(r: &ReplayArgs) -> Result<Command, Failure> {
    let m = RunManifest::read(&r.manifest).usage()?;
    let mut argv = vec!["posform".to_string(), m.subcommand.clone()];
    argv.extend(m.args.iter().cloned());
    if let Some(w) = r.workers.or(m.workers) {
        argv.push("--workers".into());
        argv.push(w.to_string());
    }
    let cli = Cli::try_parse_from(&argv).map_err(|e| Failure {
        code: EXIT_USAGE,
        error: anyhow!("manifest arguments do not parse: {e}"),
    })?;
    match cli.command {
        Command::Replay(_) => Err(anyhow!("a manifest cannot replay a replay")).usage(),
        c => Ok(c),
    }
}

fn execute(cli: Cli) -> Result<i32, Failure> {
    let started = Instant::now();
    let cmd = match &cli.command {
        Command::Replay(r) => replay_command(r)?,
        _ => cli.command,
    };
    let run = dispatch(&cmd, &cli.out_dir)?;
    let code = if run.detected { EXIT_DETECTED } else { EXIT_OK };
    let primary = run
        .outputs
        .first()
        .ok_or_else(|| anyhow!("no output written"))
        .numeric()?;
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        tool: "posform".into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        subcommand: cmd.name().into(),
        args: cmd.manifest_args(),
        inputs: run
            .inputs
            .iter()
            .map(|p| std::path::absolute(p).unwrap_or_else(|_| p.clone()))
            .collect(),
        seed: run.seed,
        workers: run.workers,
        outputs: run.outputs.clone(),
        exit_code: code,
        elapsed_seconds: started.elapsed().as_secs_f64(),
    };
    write_json(&manifest_path(primary), &manifest).numeric()?;
    println!("{}", run.summary);
    Ok(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code as u8)
        }
    }
}
