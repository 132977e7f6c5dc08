//! Command-line front end.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, ValueEnum};

use crate::design::{default_design_size, read_start_points, DesignKind};
use crate::driver::{optimize, DriverOptions, RunResult};
use crate::error::{Error, Result};
use crate::problem::{load_problem, EvaluationRecord};
use crate::sampling::SamplingKind;
use crate::surrogate::SurrogateKind;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_OBJECTIVE: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

fn tag<T: FromStr<Err = Error>>(s: &str) -> std::result::Result<T, String> {
    s.parse().map_err(|e: Error| match e {
        Error::Config(msg) => msg,
        e => e.to_string(),
    })
}

#[derive(Parser, Debug)]
#[command(name = "surropt", version, about = "Surrogate-model optimization of expensive black-box functions")]
struct Args {
    /// Problem description file (TOML)
    #[arg(long)]
    problem: PathBuf,

    /// Total number of objective evaluations
    #[arg(long, default_value_t = 400)]
    max_evals: usize,

    /// Surrogate model: RBFcub, RBFtps, RBFlin, MARS, POLYlin, POLYquad, POLYquadr,
    /// POLYcub, POLYcubr, MIX_RcM, MIX_RcPc, MIX_RcPcr, MIX_RcPq, MIX_RcPqr, MIX_RcPcM
    #[arg(long, default_value = "MIX_RcM", value_parser = tag::<SurrogateKind>)]
    surrogate: SurrogateKind,

    /// Sampling strategy: CANDloc, CANDglob, SurfMin
    #[arg(long, default_value = "CANDglob", value_parser = tag::<SamplingKind>)]
    sampling: SamplingKind,

    /// Initial design: CORNER, SLHD, lhd
    #[arg(long, default_value = "SLHD", value_parser = tag::<DesignKind>)]
    design: DesignKind,

    /// Initial design size [default: max(2(d+1), fewest points the surrogate needs)]
    #[arg(long)]
    design_size: Option<usize>,

    /// File of extra start points, one per line
    #[arg(long)]
    start_points: Option<PathBuf>,

    /// Points selected and evaluated per iteration
    #[arg(long, default_value_t = 1)]
    batch: usize,

    #[arg(long, env = "SURROPT_SEED", default_value_t = 0)]
    seed: u64,

    /// Maximum number of concurrent evaluations
    #[arg(long, default_value_t = 1)]
    workers: usize,

    /// History file [default: history.csv or history.json]
    #[arg(long)]
    output: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,

    /// Also write per-iteration sampler state as JSON lines
    #[arg(long)]
    trace: Option<PathBuf>,
}

/// Validated command-line configuration.
#[derive(Clone, Debug)]
pub struct CliConfig {
    pub problem_path: PathBuf,
    pub max_evals: usize,
    pub surrogate: SurrogateKind,
    pub sampling: SamplingKind,
    pub design: DesignKind,
    pub design_size: Option<usize>,
    pub start_points: Option<PathBuf>,
    pub batch: usize,
    pub seed: u64,
    pub workers: usize,
    pub output: PathBuf,
    pub format: Format,
    pub trace: Option<PathBuf>,
}

impl From<Args> for CliConfig {
    fn from(a: Args) -> Self {
        let output = a.output.unwrap_or_else(|| match a.format {
            Format::Csv => "history.csv".into(),
            Format::Json => "history.json".into(),
        });
        CliConfig {
            problem_path: a.problem,
            max_evals: a.max_evals,
            surrogate: a.surrogate,
            sampling: a.sampling,
            design: a.design,
            design_size: a.design_size,
            start_points: a.start_points,
            batch: a.batch,
            seed: a.seed,
            workers: a.workers,
            output,
            format: a.format,
            trace: a.trace,
        }
    }
}

/// Parses a full argument vector (program name first).
pub fn parse_args<I, T>(argv: I) -> std::result::Result<CliConfig, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    Args::try_parse_from(argv).map(CliConfig::from)
}

/// Exit status for an error class.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Objective { .. } => EXIT_OBJECTIVE,
        Error::Numerical(_) => EXIT_NUMERICAL,
        _ => EXIT_CONFIG,
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV text of a history: header, then one row per evaluation.
pub fn history_csv(records: &[EvaluationRecord]) -> String {
    let d = records.first().map_or(0, |r| r.point.len());
    let mut out = String::from("eval_index,epoch");
    for i in 1..=d {
        write!(out, ",x{i}").unwrap();
    }
    out.push_str(",value,best_so_far,w_r,sigma\n");
    for r in records {
        write!(out, "{},{}", r.eval_index, r.epoch).unwrap();
        for v in &r.point {
            write!(out, ",{}", num(*v)).unwrap();
        }
        let w = r.w_r.map(num).unwrap_or_default();
        writeln!(out, ",{},{},{w},{}", num(r.value), num(r.best_so_far), num(r.sigma)).unwrap();
    }
    out
}

pub fn write_history(records: &[EvaluationRecord], format: Format, path: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(Error::config("no evaluations to write"));
    }
    let text = match format {
        Format::Csv => history_csv(records),
        Format::Json => serde_json::to_string_pretty(records).expect("records serialize") + "\n",
    };
    std::fs::write(path, text).map_err(io_err(path))
}

fn write_trace(result: &RunResult, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err(path))?);
    for e in &result.epochs {
        writeln!(f, "{}", serde_json::json!({ "epoch_start": e })).map_err(io_err(path))?;
    }
    for t in &result.state_trace {
        writeln!(f, "{}", serde_json::to_string(t).expect("trace serializes")).map_err(io_err(path))?;
    }
    f.flush().map_err(io_err(path))
}

/// Loads the problem, runs the optimizer and writes the outputs.
pub fn execute(cfg: &CliConfig) -> Result<RunResult> {
    let spec = load_problem(&cfg.problem_path)?;
    let mut opts = DriverOptions::new(&spec, cfg.max_evals);
    opts.surrogate = cfg.surrogate;
    opts.sampling = cfg.sampling;
    opts.design = cfg.design;
    opts.design_size = cfg.design_size.unwrap_or_else(|| default_design_size(cfg.surrogate, spec.dim()));
    opts.batch = cfg.batch;
    opts.seed = cfg.seed;
    opts.workers = cfg.workers;
    if let Some(p) = &cfg.start_points {
        opts.start_points = read_start_points(p, &spec)?;
    }
    eprintln!(
        "problem {} (d={}), surrogate={}, sampling={}, design={} (n={}), batch={}, max_evals={}, seed={}",
        spec.name(),
        spec.dim(),
        opts.surrogate,
        opts.sampling,
        opts.design,
        opts.design_size,
        opts.batch,
        opts.max_evals,
        opts.seed
    );
    let result = optimize(&spec, &opts)?;
    write_history(&result.history, cfg.format, &cfg.output)?;
    if let Some(t) = &cfg.trace {
        write_trace(&result, t)?;
    }
    Ok(result)
}

/// Runs the command and returns the process exit status.
pub fn run(cfg: &CliConfig) -> i32 {
    match execute(cfg) {
        Ok(r) => {
            let point: Vec<String> = r.best_point.iter().map(|v| format!("{v}")).collect();
            println!("best value:  {}", r.best_value);
            println!("best point:  [{}]", point.join(", "));
            println!("evaluations: {}", r.history.len());
            println!("restarts:    {}", r.restarts());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = parse_args(["surropt", "--problem", "p.cfg"]).unwrap();
        assert_eq!(c.surrogate, SurrogateKind::MixRcM);
        assert_eq!(c.sampling, SamplingKind::CandGlob);
        assert_eq!(c.design, DesignKind::Slhd);
        assert_eq!(c.batch, 1);
        assert_eq!(c.workers, 1);
        assert_eq!(c.format, Format::Csv);
        assert_eq!(c.output, PathBuf::from("history.csv"));
    }

    #[test]
    fn tags_set() {
        let c = parse_args(["surropt", "--problem", "p.cfg", "--surrogate", "RBFcub", "--sampling", "SurfMin"]).unwrap();
        assert_eq!(c.surrogate, SurrogateKind::RbfCub);
        assert_eq!(c.sampling, SamplingKind::SurfMin);
        let c = parse_args(["surropt", "--problem", "p", "--design", "lhd", "--format", "json"]).unwrap();
        assert_eq!(c.design, DesignKind::Lhd);
        assert_eq!(c.output, PathBuf::from("history.json"));
    }

    #[test]
    fn bad_tag_lists_vocabulary() {
        let e = parse_args(["surropt", "--surrogate", "RBFfancy", "--problem", "p"]).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("RBFcub") && msg.contains("MIX_RcPcM"), "{msg}");
        assert_eq!(e.exit_code(), EXIT_CONFIG);
    }

    #[test]
    fn missing_problem_and_bad_budget() {
        assert!(parse_args(["surropt"]).is_err());
        assert!(parse_args(["surropt", "--problem", "p", "--max-evals", "many"]).is_err());
    }

    #[test]
    fn csv_layout() {
        let r = EvaluationRecord {
            eval_index: 1,
            epoch: 0,
            point: vec![0.5, -1.0],
            value: 2.0,
            best_so_far: 2.0,
            w_r: None,
            sigma: 1.0,
            wall_time: 0.0,
        };
        let text = history_csv(&[r]);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], "eval_index,epoch,x1,x2,value,best_so_far,w_r,sigma");
        let cells: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(cells[6], "");
        assert_eq!(cells[2].parse::<f64>().unwrap(), 0.5);
    }

    #[test]
    fn error_classes() {
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        assert_eq!(exit_code(&Error::Objective { point: vec![], reason: "x".into() }), 3);
        assert_eq!(exit_code(&Error::Numerical("x".into())), 4);
    }
}
