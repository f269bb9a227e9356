use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use eqm_cli::config::{JobConfig, Mode, QSpec, SeedSpec};
use eqm_cli::run::{exit, Job};

#[derive(Parser)]
#[command(name = "eqm", version, about = "Equilibrium measures, critical graphs and phase maps for polynomial external fields")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the endpoint equations and write solve.json.
    Solve(Common),
    /// Check every cut count and write classify.json.
    Classify(Common),
    /// Trace the critical graph and write graph.json (and graph.svg).
    Graph(Common),
    /// Classify a grid of parameters and write scan.csv and scan.json.
    Scan(Common),
}

#[derive(Args)]
struct Common {
    /// Job configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Cut count, or "auto" to classify first.
    #[arg(long)]
    q: Option<QSpec>,
    /// Also write an SVG picture.
    #[arg(long)]
    svg: bool,
    /// Shade the stable lands in graph pictures.
    #[arg(long)]
    mask: bool,
    /// Worker threads for scans.
    #[arg(long, env = "EQM_THREADS")]
    threads: Option<usize>,
    /// Seed cache file, read if present and updated afterwards.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// "symmetric", "cache" or inline JSON {"a": [[re, im], ...], "b": [...]}.
    #[arg(long)]
    seed: Option<SeedSpec>,
    #[arg(long)]
    newton_tol: Option<f64>,
    #[arg(long)]
    quad_tol: Option<f64>,
    #[arg(long)]
    traj_tol: Option<f64>,
    #[arg(long)]
    mask_resolution: Option<usize>,
}

impl Common {
    fn job(self, mode: Mode) -> Result<Job, eqm_cli::config::ConfigError> {
        let mut cfg = JobConfig::load(&self.config)?;
        if let Some(q) = self.q {
            cfg.q = q;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg.output.svg |= self.svg;
        cfg.output.mask |= self.mask;
        if self.cache.is_some() {
            cfg.output.cache = self.cache;
        }
        let t = &mut cfg.tolerances;
        t.newton_tol = self.newton_tol.or(t.newton_tol);
        t.quad_tol = self.quad_tol.or(t.quad_tol);
        t.traj_tol = self.traj_tol.or(t.traj_tol);
        t.mask_resolution = self.mask_resolution.or(t.mask_resolution);
        Job::new(mode, cfg, self.out, self.threads)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, common) = match cli.command {
        Command::Solve(c) => (Mode::Solve, c),
        Command::Classify(c) => (Mode::Classify, c),
        Command::Graph(c) => (Mode::Graph, c),
        Command::Scan(c) => (Mode::Scan, c),
    };
    let code = match common.job(mode) {
        Err(e) => {
            eprintln!("eqm: {e}");
            exit::CONFIG
        }
        Ok(job) => match job.run() {
            Ok(code) => code,
            Err(e) => {
                eprintln!("eqm: {e}");
                e.code()
            }
        },
    };
    ExitCode::from(code as u8)
}
