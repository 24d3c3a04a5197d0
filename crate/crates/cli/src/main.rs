use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use ordprior::study::{self, StudyConfig};
use ordprior::SamplerConfig;

#[derive(Parser)]
#[command(name = "ordprior", version, about = "Prior sensitivity of Bayesian proportional-odds models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// 200 replicates, 2 chains of 1000 + 1000 iterations, J in {4, 10}.
    Desk,
}

#[derive(Subcommand)]
enum Command {
    /// Run the simulation grid described by a TOML config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        preset: Option<Preset>,
        /// Restrict the grid, e.g. `J=4,10`, `shape=skewed`, `design=fixed`,
        /// `or=1.5`, `n=100`. Repeatable.
        #[arg(long = "filter", value_name = "KEY=VALUES")]
        filters: Vec<String>,
        #[arg(long)]
        exclude_divergent: bool,
        #[arg(long)]
        workers: Option<usize>,
        /// Reuse finished cells from the journal of an interrupted run.
        #[arg(long)]
        resume: bool,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Fit one dataset under several priors.
    Fit {
        /// CSV with header `arm,category`.
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated priors: beta ids, cut-point ids, `beta/cut` pairs,
        /// `sweeps` or `cross`.
        #[arg(long)]
        priors: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Number of categories when the highest ones are unobserved.
        #[arg(long)]
        categories: Option<usize>,
        #[arg(long)]
        chains: Option<usize>,
        #[arg(long)]
        warmup: Option<usize>,
        #[arg(long)]
        iter: Option<usize>,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reshape a results table into long format for plotting.
    Plotdata {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn simulate(
    config: PathBuf,
    preset: Option<Preset>,
    filters: Vec<String>,
    exclude_divergent: bool,
    workers: Option<usize>,
    resume: bool,
    out_dir: Option<PathBuf>,
) -> Result<()> {
    let text = fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
    let mut cfg = StudyConfig::from_toml_str(&text).with_context(|| format!("parsing {}", config.display()))?;
    for f in &filters {
        cfg.filter.apply_assignment(f)?;
    }
    if let Some(Preset::Desk) = preset {
        cfg.apply_desk_preset();
    }
    if exclude_divergent {
        cfg.exclude_divergent = true;
    }
    if let Some(w) = workers {
        cfg.workers = w;
    }
    if let Some(dir) = out_dir {
        cfg.output_dir = dir;
    }
    cfg.validate()?;
    let cells = study::plan_cells(&cfg)?;
    eprintln!("running {} cells with {} workers into {}", cells.len(), cfg.workers, cfg.output_dir.display());
    let report = study::run_study(&cfg, resume)?;
    eprintln!(
        "done: {} cells ({} resumed); results in {}",
        report.records.len(),
        report.resumed,
        report.results_path().display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn fit(
    data: PathBuf,
    priors: String,
    seed: u64,
    categories: Option<usize>,
    chains: Option<usize>,
    warmup: Option<usize>,
    iter: Option<usize>,
    out: Option<PathBuf>,
) -> Result<()> {
    let file = File::open(&data).with_context(|| format!("opening {}", data.display()))?;
    let dataset = study::read_fit_input(file, categories).with_context(|| format!("reading {}", data.display()))?;
    let pairs = study::parse_prior_list(&priors)?;
    let mut sampler = SamplerConfig::default();
    sampler.chains = chains.unwrap_or(sampler.chains);
    sampler.warmup_iters = warmup.unwrap_or(sampler.warmup_iters);
    sampler.sampling_iters = iter.unwrap_or(sampler.sampling_iters);
    sampler.validate()?;
    let fits = study::fit_priors(&dataset, &pairs, &sampler, seed)?;
    match out {
        Some(path) => {
            let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            study::write_fit_table(BufWriter::new(f), &fits)?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            study::write_fit_table(&mut lock, &fits)?;
            lock.flush()?;
        }
    }
    Ok(())
}

fn plotdata(input: PathBuf, out: PathBuf) -> Result<()> {
    let src = File::open(&input).with_context(|| format!("opening {}", input.display()))?;
    let dst = File::create(&out).with_context(|| format!("creating {}", out.display()))?;
    let rows = study::results_to_long(src, BufWriter::new(dst)).with_context(|| format!("reshaping {}", input.display()))?;
    eprintln!("wrote {rows} rows to {}", out.display());
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate { config, preset, filters, exclude_divergent, workers, resume, out_dir } => {
            simulate(config, preset, filters, exclude_divergent, workers, resume, out_dir)
        }
        Command::Fit { data, priors, seed, categories, chains, warmup, iter, out } => {
            fit(data, priors, seed, categories, chains, warmup, iter, out)
        }
        Command::Plotdata { input, out } => plotdata(input, out),
    }
}
