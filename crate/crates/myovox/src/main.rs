use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use myovox::config::{Overrides, SceneConfig};
use myovox::manifest::Manifest;
use myovox::pipeline;
use myovox::{Error, Result};

/// Curve-driven muscle modelling on tetrahedral meshes.
#[derive(Parser)]
#[command(name = "myovox", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the tissue fields.
    Solve(Common),
    /// Solve and extract per-tissue meshes.
    Extract(Common),
    /// Solve, extract and compute fiber directions.
    Fibers(Common),
    /// Solve and ray-cast the configured views.
    Render(Common),
    /// Run the authoring service.
    Serve {
        #[command(flatten)]
        common: Common,
        /// Listen address, overriding the config.
        #[arg(long)]
        addr: Option<String>,
    },
}

#[derive(Args)]
struct Common {
    /// Scene configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    #[arg(long = "d-fat", allow_negative_numbers = true)]
    d_fat: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    eps: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<SceneConfig> {
        let mut cfg = SceneConfig::load(&self.config)?;
        cfg.apply(&Overrides { alpha: self.alpha, d_fat: self.d_fat, eps: self.eps, out: self.out.clone() });
        Ok(cfg)
    }
}

fn report(m: Manifest) {
    log::info!("{}: wrote {} files", m.scene, m.files.len() + 1);
}

fn serve(common: &Common, addr: Option<String>) -> Result<()> {
    let cfg = common.load()?;
    let addr = addr.unwrap_or(cfg.serve.addr.clone());
    let dir = cfg.serve.journal.clone().unwrap_or_else(|| cfg.output.join("sessions"));
    if let Ok(n) = std::env::var(pipeline::THREADS_ENV) {
        let n: usize = n.trim().parse().map_err(|_| Error::Config(format!("{} must be a positive integer", pipeline::THREADS_ENV)))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    let rt = tokio::runtime::Runtime::new().map_err(|e| Error::io(&dir, e))?;
    rt.block_on(myovox::service::serve(&addr, &dir)).map_err(|e| Error::io(&dir, e))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Solve(c) => report(pipeline::cmd_solve(&c.load()?)?),
        Command::Extract(c) => report(pipeline::cmd_extract(&c.load()?)?),
        Command::Fibers(c) => report(pipeline::cmd_fibers(&c.load()?)?),
        Command::Render(c) => report(pipeline::cmd_render(&c.load()?)?),
        Command::Serve { common, addr } => serve(&common, addr)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
