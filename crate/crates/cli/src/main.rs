use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use dimc::channel::build_taps;
use dimc::config::{parse_config, render, ExperimentConfig, OptParam};
use dimc::equalization::derivative_taps;
use dimc::harness::{optimize_parameter, sweep};
use dimc::modulation::scheme_grid;
use dimc::presets::{load_preset, preset_ids};
use dimc::results::{emit_results, format_params};
use dimc::{Error, Result};

#[derive(Parser)]
#[command(name = "dimc", version, about = "Diffusive molecular communication link simulator")]
struct Cli {
    /// Worker threads (defaults to DIMC_THREADS, then the number of CPUs).
    #[arg(long, global = true, env = "DIMC_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a BER sweep and write the results as CSV.
    Run {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Fill the runtime_s column (makes the file run-dependent).
        #[arg(long)]
        timing: bool,
    },
    /// Tune one parameter per link at every sweep point.
    Optimize {
        #[command(flatten)]
        source: Source,
        /// gamma, alpha, m or ab.
        #[arg(long)]
        param: OptParam,
        /// Only tune the link with this label.
        #[arg(long)]
        link: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the tap vector and its first derivatives as a table.
    Taps {
        #[command(flatten)]
        source: Source,
        /// Highest derivative order.
        #[arg(long, default_value_t = 2)]
        m: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the available preset ids.
    ListPresets,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
}

impl Source {
    fn load(&self) -> Result<ExperimentConfig> {
        match (&self.config, &self.preset) {
            (Some(path), _) => {
                let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                parse_config(&text)
            }
            (None, Some(id)) => load_preset(id),
            (None, None) => Err(Error::Usage("give --config or --preset".into())),
        }
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn sidecar(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".config.toml");
    PathBuf::from(name)
}

fn load_with_seed(source: &Source, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg = source.load()?;
    if let Some(s) = seed {
        cfg.sim.seed = s;
        cfg.validate()?;
    }
    Ok(cfg)
}

fn echo_config(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let text = render(cfg);
    eprint!("{text}");
    write(&sidecar(out), &text)
}

fn run(cli: Cli) -> Result<()> {
    if let Some(k) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| Error::Usage(format!("cannot start {k} threads: {e}")))?;
    }
    match cli.command {
        Command::Run { source, seed, out, timing } => {
            let cfg = load_with_seed(&source, seed)?;
            echo_config(&cfg, &out)?;
            info!("running '{}': {} links", cfg.name, cfg.links.len());
            let reports = sweep(&cfg)?;
            write(&out, &emit_results(&reports, timing)?)?;
            info!("wrote {}", out.display());
        }
        Command::Optimize { source, param, link, seed, out } => {
            let cfg = load_with_seed(&source, seed)?;
            let indices: Vec<usize> = match &link {
                Some(label) => vec![cfg
                    .links
                    .iter()
                    .position(|l| &l.label == label)
                    .ok_or_else(|| Error::Usage(format!("no link labelled '{label}'")))?],
                None => (0..cfg.links.len()).collect(),
            };
            echo_config(&cfg, &out)?;
            let mut text = String::from("sweep_var,sweep_value,link,params,training_bits,training_errors,training_ber\n");
            for &v in &cfg.sweep.values {
                let point = cfg.at(cfg.sweep.var, v);
                for &i in &indices {
                    info!("optimizing {} for '{}' at {}={v}", param, cfg.links[i].label, cfg.sweep.var);
                    let t = optimize_parameter(&point, i, param)?;
                    text.push_str(&format!(
                        "{},{v},{},{},{},{},{}\n",
                        cfg.sweep.var,
                        cfg.links[i].label,
                        format_params(&t.params()),
                        t.training_bits,
                        t.training_errors,
                        t.training_ber()
                    ));
                }
            }
            write(&out, &text)?;
        }
        Command::Taps { source, m, out } => {
            let cfg = source.load()?;
            let grid = scheme_grid(&cfg.links[0].scheme, cfg.t_b, cfg.samples_per_slot, cfg.memory, cfg.tau)?;
            let h = build_taps(&cfg.geometry, &grid)?;
            let cols: Vec<Vec<f64>> = (0..=m).map(|j| derivative_taps(&h, j)).collect();
            let mut text = String::from("t");
            for j in 0..=m {
                text.push_str(&format!(",value_m{j}"));
            }
            text.push('\n');
            let ts = grid.t_s();
            for k in 0..h.len() {
                text.push_str(&format!("{}", (k + 1) as f64 * ts));
                for c in &cols {
                    text.push_str(&format!(",{:e}", c[k]));
                }
                text.push('\n');
            }
            write(&out, &text)?;
        }
        Command::ListPresets => {
            for id in preset_ids() {
                println!("{id}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            ExitCode::from(match e {
                Error::Config { .. } | Error::Usage(_) => 2,
                _ => 1,
            })
        }
    }
}
