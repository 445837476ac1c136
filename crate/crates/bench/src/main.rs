use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use proxvr_bench::config::{parse_alpha_grid, ExperimentConfig, ExperimentKind, LossName};
use proxvr_bench::experiments::{prepare, replay, run_experiment, Report};
use proxvr_bench::io::write_problem_dir;
use proxvr_bench::verify::exit_code;
use proxvr_bench::BenchError;

#[derive(Parser)]
#[command(name = "proxvr", version, about = "Variance-reduced stochastic proximal point experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// SPPA, SVRP and SAPA on a normalized stage axis; writes curves.csv.
    CompareProx(Overrides),
    /// SAPA vs SAGA iterations to accuracy over a stepsize grid; writes sweep.csv.
    SweepSapaSaga(Overrides),
    /// SVRP vs SVRG oracle calls to accuracy over a stepsize grid; writes sweep.csv.
    SweepSvrpSvrg(Overrides),
    /// Run the acceptance suite on small presets; writes verify.json.
    Verify(Overrides),
    /// Re-run an experiment from its manifest and compare artifact hashes.
    Replay {
        manifest: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Write a synthetic problem directory (design.csv, labels.csv, meta.json).
    Generate(Overrides),
}

#[derive(Args, Default)]
struct Overrides {
    /// TOML file mirroring the experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    /// Ratio of the extreme nonzero singular values of the design.
    #[arg(long)]
    cond: Option<f64>,
    #[arg(long)]
    loss: Option<LossName>,
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long)]
    master_seed: Option<u64>,
    /// Stepsize in units of 1/L.
    #[arg(long)]
    alpha: Option<f64>,
    /// `lo:hi:per_decade` or a comma-separated list, in units of 1/L.
    #[arg(long)]
    alpha_grid: Option<String>,
    #[arg(long)]
    m: Option<u64>,
    #[arg(long)]
    outer: Option<u64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    cap: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    record_every: Option<u64>,
}

impl Overrides {
    fn resolve(self, kind: ExperimentKind, any_kind: bool) -> Result<ExperimentConfig, BenchError> {
        let mut c = match &self.config {
            Some(path) => {
                let c = ExperimentConfig::load(path)?;
                if c.kind != kind && !any_kind {
                    return Err(BenchError::config(format!("config file is for '{}', not '{}'", c.kind.name(), kind.name())));
                }
                c
            }
            None => ExperimentConfig::preset(kind),
        };
        if let Some(v) = self.n {
            c.problem.n = v;
        }
        if let Some(v) = self.d {
            c.problem.d = v;
        }
        if let Some(v) = self.cond {
            c.problem.cond = v;
        }
        if let Some(v) = self.loss {
            c.problem.loss = v;
        }
        if let Some(v) = self.seeds {
            c.seeds.count = v;
        }
        if let Some(v) = self.master_seed {
            c.seeds.master = v;
        }
        if let Some(v) = self.alpha {
            c.method.alpha = Some(v);
        }
        if let Some(v) = &self.alpha_grid {
            c.method.alpha_grid = Some(parse_alpha_grid(v)?);
        }
        if let Some(v) = self.m {
            c.method.m = Some(v);
        }
        if let Some(v) = self.outer {
            c.method.outer = Some(v);
        }
        if let Some(v) = self.p {
            c.method.p = Some(v);
        }
        if let Some(v) = self.cap {
            c.method.cap = Some(v);
        }
        if let Some(v) = self.out_dir {
            c.out_dir = v;
        }
        if let Some(v) = self.workers {
            c.workers = v;
        }
        if let Some(v) = self.record_every {
            c.method.record_every = Some(v);
        }
        c.validate()?;
        Ok(c)
    }
}

fn experiment(kind: ExperimentKind, o: Overrides) -> Result<i32, BenchError> {
    let config = o.resolve(kind, false)?;
    let outcome = run_experiment(&config)?;
    match &outcome.report {
        Report::Verify(results) => {
            for r in results {
                println!("{}", r.line());
            }
            Ok(exit_code(results))
        }
        _ => {
            for a in &outcome.manifest.artifacts {
                println!("{}  {}", a.sha256, outcome.out_dir.join(&a.path).display());
            }
            println!("manifest: {}", outcome.out_dir.join(proxvr_bench::manifest::MANIFEST_FILE).display());
            Ok(0)
        }
    }
}

fn run(cli: Cli) -> Result<i32, BenchError> {
    match cli.command {
        Command::CompareProx(o) => experiment(ExperimentKind::CompareProx, o),
        Command::SweepSapaSaga(o) => experiment(ExperimentKind::SweepSapaSaga, o),
        Command::SweepSvrpSvrg(o) => experiment(ExperimentKind::SweepSvrpSvrg, o),
        Command::Verify(o) => experiment(ExperimentKind::Verify, o),
        Command::Replay { manifest, out_dir } => {
            let (_, mismatched) = replay(&manifest, &out_dir)?;
            for m in &mismatched {
                println!("mismatch: {}", m.display());
            }
            println!("{} mismatched artifacts", mismatched.len());
            Ok(if mismatched.is_empty() { 0 } else { 1 })
        }
        Command::Generate(o) => {
            let config = o.resolve(ExperimentKind::CompareProx, true)?;
            let prepared = prepare(&config)?;
            for p in write_problem_dir(&config.out_dir, &prepared.instance.problem, Some(prepared.meta))? {
                println!("{}", p.display());
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
