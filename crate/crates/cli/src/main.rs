use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use logdist_cli::casestudy::cmd_casestudy;
use logdist_cli::commands::{
    cmd_boundary, cmd_cluster, cmd_dimred, cmd_distmat, cmd_extract, cmd_project,
};
use logdist_cli::config::PipelineConfig;
use logdist_cli::files::{Classify, CmdResult};

#[derive(Parser)]
#[command(name = "logdist", version, about = "Logic-respecting distances between time series")]
struct Cli {
    /// TOML pipeline configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Target width of distance intervals.
    #[arg(long, global = true)]
    delta: Option<f64>,
    /// Tolerance of the diagonal bisection.
    #[arg(long, global = true)]
    eta: Option<f64>,
    /// Parametric specification file.
    #[arg(long, global = true)]
    spec: Option<PathBuf>,
    /// Directory of `<id>.csv` traces.
    #[arg(long, global = true)]
    traces: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Approximate one trace's validity-domain boundary.
    Boundary {
        #[arg(long)]
        trace: String,
        /// Largest allowed rectangle edge.
        #[arg(long)]
        precision: Option<f64>,
    },
    /// Pairwise distance intervals of every trace.
    Distmat,
    /// Agglomerative clustering of the distance matrix.
    Cluster,
    /// Pick the projection line that best separates the labels.
    Project,
    /// Write one specification per label from the chosen projection.
    Extract,
    /// Project every trace onto one line and histogram the positions.
    Dimred,
    /// Run the highway slow-down study on generated traces.
    CasestudySynthetic,
}

fn config(cli: &Cli) -> CmdResult<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p).input()?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(d) = &cli.out_dir {
        cfg.output_dir = d.clone();
    }
    if let Some(d) = cli.delta {
        cfg.delta = d;
    }
    if let Some(e) = cli.eta {
        cfg.eta = e;
    }
    if let Some(s) = &cli.spec {
        cfg.spec_path = Some(s.clone());
    }
    if let Some(t) = &cli.traces {
        cfg.trace_dir = t.clone();
    }
    cfg.validate().input()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> CmdResult<()> {
    let cfg = config(cli)?;
    match &cli.command {
        Command::Boundary { trace, precision } => {
            let path = cmd_boundary(&cfg, trace, *precision)?;
            println!("{}", path.display());
        }
        Command::Distmat => {
            let m = cmd_distmat(&cfg)?;
            println!("{} pairs", m.pairs().count());
        }
        Command::Cluster => {
            let l = cmd_cluster(&cfg)?;
            for (k, g) in l.groups().iter().enumerate() {
                let ids: Vec<&str> = g.iter().map(|&i| l.ids()[i].as_str()).collect();
                println!("{k}: {}", ids.join(" "));
            }
        }
        Command::Project => {
            let p = cmd_project(&cfg)?;
            for c in &p.lines {
                println!("line {} score {}", c.index, c.score);
            }
        }
        Command::Extract => {
            for e in cmd_extract(&cfg)? {
                println!("{}: {}", e.label, e.rendered);
            }
        }
        Command::Dimred => {
            let d = cmd_dimred(&cfg)?;
            println!("{} positions, {} absent", d.positions.len(), d.absent);
        }
        Command::CasestudySynthetic => {
            let r = cmd_casestudy(&cfg)?;
            print!("{}", r.render());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
