use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use gridldp::Dataset;
use gridldp_bench::config::{parse_bbox, DatasetArgs, ExperimentConfig, Method};
use gridldp_bench::harness::{with_workers, AnswerRecord, Harness, RunOutput, ScoredWorkload};
use gridldp_bench::results::{emit_results, format_summary, summarize, write_results};

#[derive(Parser)]
#[command(
    name = "gridldp",
    version,
    about = "Grid-based LDP range query experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate N x N uniform grids for every configured N.
    SweepUniform(RunArgs),
    /// Compare UG, PrivAG and AAG on shared query workloads.
    Compare(RunArgs),
    /// Report adaptive grid cell counts without answering queries.
    Gridinfo(RunArgs),
    /// Write a dataset to a lon,lat CSV file.
    Synth(SynthArgs),
}

#[derive(Args)]
struct DataOpts {
    /// clustered, uniform, gowalla:PATH, porto:PATH, foursquare:PATH or a CSV path.
    #[arg(long)]
    dataset: Option<String>,
    /// Bounding box as minlon,minlat,maxlon,maxlat.
    #[arg(long)]
    bbox: Option<String>,
    /// Number of synthetic users.
    #[arg(long)]
    users: Option<usize>,
    /// Seed for synthetic data.
    #[arg(long)]
    data_seed: Option<u64>,
}

impl DataOpts {
    fn to_args(&self) -> anyhow::Result<DatasetArgs> {
        Ok(DatasetArgs {
            name: self.dataset.clone(),
            bbox: self.bbox.as_deref().map(parse_bbox).transpose()?,
            users: self.users,
            seed: self.data_seed,
        })
    }
}

#[derive(Args)]
struct RunArgs {
    /// Flat key = value configuration file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    data: DataOpts,
    /// Method to run (ug, privag, aag). Repeatable.
    #[arg(long = "method")]
    methods: Vec<Method>,
    /// Privacy budget. Repeatable.
    #[arg(long = "epsilon")]
    epsilons: Vec<f64>,
    /// Query size as a fraction of the domain area. Repeatable.
    #[arg(long = "rho")]
    rhos: Vec<f64>,
    /// Uniform grid side length. Repeatable.
    #[arg(long = "n")]
    sizes: Vec<usize>,
    #[arg(long)]
    reps: Option<usize>,
    /// Queries per workload.
    #[arg(long)]
    gamma: Option<usize>,
    /// Second-level α for both adaptive methods; PrivAG also uses it for the first level.
    #[arg(long)]
    alpha: Option<f64>,
    /// Phase-1 user fraction for both adaptive methods.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Results CSV. Defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    dump_workload: Option<PathBuf>,
    #[arg(long)]
    dump_answers: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Record wall-clock time per run.
    #[arg(long)]
    timing: bool,
}

impl RunArgs {
    fn config(&self) -> anyhow::Result<ExperimentConfig> {
        let mut c = ExperimentConfig::default();
        if let Some(path) = &self.config {
            c.apply_file(path)?;
        }
        c.set_dataset(self.data.to_args()?)?;
        if !self.methods.is_empty() {
            c.methods = self.methods.clone();
        }
        if !self.epsilons.is_empty() {
            c.epsilons = self.epsilons.clone();
        }
        if !self.rhos.is_empty() {
            c.rhos = self.rhos.clone();
        }
        if !self.sizes.is_empty() {
            c.ug_sizes = self.sizes.clone();
        }
        if let Some(r) = self.reps {
            c.reps = r;
        }
        if let Some(g) = self.gamma {
            c.gamma = g;
        }
        if let Some(a) = self.alpha {
            c.privag.alpha = Some(a);
            c.aag.alpha = Some(a);
        }
        if let Some(s) = self.sigma {
            c.privag.sigma = Some(s);
            c.aag.sigma = Some(s);
        }
        if let Some(s) = self.seed {
            c.master_seed = s;
        }
        if self.out.is_some() {
            c.out = self.out.clone();
        }
        if self.dump_workload.is_some() {
            c.dump_workload = self.dump_workload.clone();
        }
        if self.dump_answers.is_some() {
            c.dump_answers = self.dump_answers.clone();
        }
        if self.workers.is_some() {
            c.workers = self.workers;
        }
        c.timing |= self.timing;
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    data: DataOpts,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy)]
enum Mode {
    Sweep,
    Compare,
    Gridinfo,
}

fn load(config: &ExperimentConfig) -> anyhow::Result<Dataset> {
    let (dataset, stats) = config
        .dataset
        .load_with_stats()
        .with_context(|| format!("loading dataset '{}'", config.dataset.name))?;
    if let Some(s) = stats {
        eprintln!(
            "{}: kept {} rows, dropped {} outside the bounding box",
            config.dataset.name, s.kept, s.dropped
        );
    }
    Ok(dataset)
}

fn run(args: &RunArgs, mode: Mode) -> anyhow::Result<()> {
    let config = args.config()?;
    if matches!(mode, Mode::Gridinfo) && args.methods.is_empty() {
        // Only the adaptive methods have cell counts worth reporting.
        let mut c = config.clone();
        c.methods.retain(|m| m.adaptive().is_some());
        return execute(&c, mode);
    }
    execute(&config, mode)
}

fn execute(config: &ExperimentConfig, mode: Mode) -> anyhow::Result<()> {
    let dataset = load(config)?;
    let output = with_workers(config.workers, || {
        let harness = Harness::new(config, &dataset)?;
        match mode {
            Mode::Sweep => harness.run_uniform_sweep(),
            Mode::Compare => harness.run_comparison(),
            Mode::Gridinfo => harness.run_gridinfo(),
        }
    })?;
    for c in &output.ug_choices {
        match c.holdout_aqe {
            Some(a) => eprintln!(
                "ug: epsilon {} uses N = {} (holdout AQE {a:.6})",
                c.epsilon, c.n
            ),
            None => eprintln!("ug: epsilon {} uses N = {}", c.epsilon, c.n),
        }
    }
    write_outputs(config, &output)?;
    eprint!("{}", format_summary(&summarize(&output.rows)));
    Ok(())
}

fn create(path: &Path) -> anyhow::Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))
}

fn write_workloads(path: &Path, workloads: &[(usize, ScoredWorkload)]) -> anyhow::Result<()> {
    let mut w = create(path)?;
    w.write_record([
        "rep", "rho", "query", "min_lon", "min_lat", "max_lon", "max_lat",
    ])?;
    for (rep, sw) in workloads {
        for (i, q) in sw.workload.queries.iter().enumerate() {
            let r = &q.rect;
            w.write_record([
                rep.to_string(),
                sw.workload.rho.to_string(),
                i.to_string(),
                r.min_lon.to_string(),
                r.min_lat.to_string(),
                r.max_lon.to_string(),
                r.max_lat.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_answers(path: &Path, answers: &[AnswerRecord]) -> anyhow::Result<()> {
    let mut w = create(path)?;
    w.write_record([
        "method", "epsilon", "rho", "N", "rep", "query", "truth", "answer",
    ])?;
    for a in answers {
        w.write_record([
            a.method.to_string(),
            a.epsilon.to_string(),
            a.rho.to_string(),
            a.n.map(|n| n.to_string()).unwrap_or_default(),
            a.rep.to_string(),
            a.query.to_string(),
            a.truth.to_string(),
            a.answer.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_outputs(config: &ExperimentConfig, output: &RunOutput) -> anyhow::Result<()> {
    match &config.out {
        Some(path) => emit_results(&output.rows, path)?,
        None => {
            let stdout = std::io::stdout();
            write_results(&output.rows, stdout.lock())?;
        }
    }
    if let Some(path) = &config.dump_workload {
        write_workloads(path, &output.workloads)?;
    }
    if let Some(path) = &config.dump_answers {
        write_answers(path, &output.answers)?;
    }
    Ok(())
}

fn synth(args: &SynthArgs) -> anyhow::Result<()> {
    let mut c = ExperimentConfig::default();
    c.set_dataset(args.data.to_args()?)?;
    let dataset = load(&c)?;
    if dataset.is_empty() {
        bail!("dataset is empty");
    }
    let file = std::fs::File::create(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    w.write_record(["lon", "lat"])?;
    for l in dataset.locations() {
        w.write_record([l.lon.to_string(), l.lat.to_string()])?;
    }
    w.flush()?;
    eprintln!("wrote {} points to {}", dataset.len(), args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::SweepUniform(a) => run(a, Mode::Sweep),
        Command::Compare(a) => run(a, Mode::Compare),
        Command::Gridinfo(a) => run(a, Mode::Gridinfo),
        Command::Synth(a) => synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
