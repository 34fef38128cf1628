//! `steadyscan` command-line front end.
//!
//! Exit codes: 0 success, 1 usage or I/O error, 2 model/formula parse error,
//! 3 inconsistent model (a conflict report is printed), 4 sampling budget
//! exhausted before the target was reached.

mod svg;

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use steadyscan::explain::{min_conflict_sets, ConflictReport, ExplainOptions};
use steadyscan::interval::{BoxUnion, IntervalBox};
use steadyscan::iron::{bound_spec, cutoff_response, model_by_name};
use steadyscan::model::{Model, ModelError};
use steadyscan::ode::{simulate, stability_check, steady_state_vector, SimOptions};
use steadyscan::propagate::{
    box_to_json, pave, propagate_fixpoint, read_union_jsonl, write_union_jsonl, PaveOptions, DEFAULT_MAX_BOXES,
    DEFAULT_PRECISION, DEFAULT_TOL,
};
use steadyscan::sampler::{read_solutions_jsonl, sample_steady_states, write_solutions_jsonl, SamplerOptions, Solution};
use steadyscan::stl::{StlError, StlFormula};
use steadyscan::trace::Trace;

const ENV_PREFIX: &str = "STEADYSCAN_";
const DEFAULT_T_END: f64 = 4e5;

#[derive(Parser)]
#[command(name = "steadyscan", version, about = "Interval contraction, steady-state sampling and STL checks for ODE models")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Contract the model's domains by constraint propagation and print the box.
    Contract {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        tol: Option<f64>,
        /// Also write the box as one JSON line.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Split and contract into a union of boxes (JSON lines).
    Pave {
        #[command(flatten)]
        model: ModelArg,
        #[command(flatten)]
        pave: PaveArgs,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Report the smallest sets of constraints whose removal restores consistency.
    Explain {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long, default_value_t = 16)]
        max_sets: usize,
    },
    /// Draw steady-state solutions.
    Sample {
        #[command(flatten)]
        model: ModelArg,
        #[command(flatten)]
        sample: SampleArgs,
        /// Paving to sample from; the contracted domain box when omitted.
        #[arg(long)]
        union: Option<PathBuf>,
        /// Solutions file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        stats: Option<PathBuf>,
    },
    /// Simulate from one solution's steady state through the model's events.
    Simulate {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        solutions: PathBuf,
        /// Line of the solutions file to use (0-based).
        #[arg(long, default_value_t = 0)]
        index: usize,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Monitor an STL formula on a trace and print the verdict and robustness.
    Check {
        /// Trace file (.csv or .json).
        #[arg(long)]
        trace: PathBuf,
        /// File holding the formula.
        #[arg(long)]
        stl: PathBuf,
        /// Model whose unknowns the formula may mention (with --solutions).
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        solutions: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        index: usize,
    },
    /// contract, pave, sample, simulate and check in one go; stops with a
    /// conflict report when the model is inconsistent.
    Pipeline {
        #[command(flatten)]
        model: ModelArg,
        #[command(flatten)]
        pave: PaveArgs,
        #[command(flatten)]
        sample: SampleArgs,
        /// Number of solutions to simulate and check.
        #[arg(long)]
        simulate: Option<usize>,
        #[arg(long, default_value = "steadyscan-out")]
        out_dir: PathBuf,
    },
}

#[derive(Args)]
struct ModelArg {
    /// Model file, or a built-in model name (iron_v2, pre_revision).
    model: String,
}

#[derive(Args)]
struct PaveArgs {
    #[arg(long)]
    precision: Option<f64>,
    #[arg(long)]
    max_boxes: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct SampleArgs {
    /// Random seed; required so that every run can be replayed.
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    target: Option<usize>,
    #[arg(long)]
    max_attempts: Option<u64>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Parse(String),
    Inconsistent,
    Budget,
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Parse(_) => 2,
            Failure::Inconsistent => 3,
            Failure::Budget => 4,
        }
    }
}

type Res<T> = Result<T, Failure>;

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Usage(format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Usage(m) | Failure::Parse(m) => eprintln!("error: {m}"),
                Failure::Inconsistent => eprintln!("the model is inconsistent"),
                Failure::Budget => eprintln!("sampling budget exhausted before reaching the target"),
            }
            ExitCode::from(f.code())
        }
    }
}

fn load_model(arg: &str) -> Res<Model> {
    let path = Path::new(arg);
    if path.exists() {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        return Model::parse(&text).map_err(|e| match e {
            ModelError::Parse(p) => Failure::Parse(format!("{arg}: {p}")),
            other => Failure::Parse(format!("{arg}: {other}")),
        });
    }
    model_by_name(arg).ok_or_else(|| usage(format!("no model file or built-in model named `{arg}`")))
}

/// Flag, then `STEADYSCAN_<KEY>`, then the model's `[options]`, then the default.
fn setting<T: std::str::FromStr + FromF64>(flag: Option<T>, key: &str, model: Option<&Model>, default: T) -> Res<T> {
    if let Some(v) = flag {
        return Ok(v);
    }
    let var = format!("{ENV_PREFIX}{}", key.to_uppercase());
    if let Ok(s) = std::env::var(&var) {
        return s.trim().parse().map_err(|_| usage(format!("cannot parse {var}={s}")));
    }
    if let Some(v) = model.and_then(|m| m.option(key)) {
        return T::from_f64(v).ok_or_else(|| usage(format!("model option `{key}` = {v} is out of range")));
    }
    Ok(default)
}

trait FromF64: Sized {
    fn from_f64(v: f64) -> Option<Self>;
}

impl FromF64 for f64 {
    fn from_f64(v: f64) -> Option<f64> {
        Some(v)
    }
}

impl FromF64 for usize {
    fn from_f64(v: f64) -> Option<usize> {
        (v >= 0.0 && v.fract() == 0.0 && v < 1e15).then_some(v as usize)
    }
}

impl FromF64 for u64 {
    fn from_f64(v: f64) -> Option<u64> {
        (v >= 0.0 && v.fract() == 0.0 && v < 1e15).then_some(v as u64)
    }
}

fn create(path: &Path) -> Res<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| io_err(path, e))
}

fn write_text(path: &Path, text: &str) -> Res<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).map_err(|e| io_err(path, e))
}

fn pave_options(a: &PaveArgs, m: &Model) -> Res<PaveOptions> {
    Ok(PaveOptions {
        precision: setting(a.precision, "precision", Some(m), DEFAULT_PRECISION)?,
        max_boxes: setting(a.max_boxes, "max_boxes", Some(m), DEFAULT_MAX_BOXES)?,
        tol: setting(a.tol, "tol", Some(m), DEFAULT_TOL)?,
        jobs: setting(a.jobs, "jobs", Some(m), 1)?,
    })
}

fn sampler_options(a: &SampleArgs, jobs: usize, m: &Model) -> Res<SamplerOptions> {
    let d = SamplerOptions::default();
    Ok(SamplerOptions {
        seed: a.seed,
        target: setting(a.target, "target", Some(m), d.target)?,
        max_attempts: setting(a.max_attempts, "max_attempts", Some(m), d.max_attempts)?,
        jobs,
        ..d
    })
}

fn explain_and_report(m: &Model, out: Option<&Path>) -> Res<ConflictReport> {
    let report = min_conflict_sets(m.constraints(), &m.domain_box(), &ExplainOptions::default());
    print!("{}", report.table());
    if let Some(p) = out {
        let json = serde_json::to_string_pretty(&report).map_err(usage)?;
        write_text(p, &(json + "\n"))?;
    }
    Ok(report)
}

fn read_solution(m: &Model, path: &Path, index: usize) -> Res<Solution> {
    let f = File::open(path).map_err(|e| io_err(path, e))?;
    let sols = read_solutions_jsonl(BufReader::new(f), m.unknown_names()).map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))?;
    let n = sols.len();
    sols.into_iter()
        .nth(index)
        .ok_or_else(|| usage(format!("{}: no solution at index {index} ({n} available)", path.display())))
}

fn read_trace(path: &Path) -> Res<Trace> {
    let f = File::open(path).map_err(|e| io_err(path, e))?;
    let r = if path.extension().is_some_and(|e| e == "json") {
        Trace::read_json(f)
    } else {
        Trace::read_csv(f)
    };
    r.map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))
}

fn print_box(b: &IntervalBox) {
    print!("{b}");
    if !format!("{b}").ends_with('\n') {
        println!();
    }
}

fn run(cli: Cli) -> Res<()> {
    match cli.cmd {
        Cmd::Contract { model, tol, out } => {
            let m = load_model(&model.model)?;
            let tol = setting(tol, "tol", Some(&m), DEFAULT_TOL)?;
            let b = propagate_fixpoint(m.constraints(), &m.domain_box(), tol);
            if b.dims().iter().any(|d| d.is_empty()) {
                println!("propagation proves the model inconsistent");
                explain_and_report(&m, None)?;
                return Err(Failure::Inconsistent);
            }
            print_box(&b);
            if let Some(p) = out {
                write_text(&p, &(box_to_json(&b) + "\n"))?;
            }
            Ok(())
        }
        Cmd::Pave { model, pave: pa, out } => {
            let m = load_model(&model.model)?;
            let opts = pave_options(&pa, &m)?;
            let paving = pave(m.constraints(), &m.domain_box(), &opts);
            eprintln!(
                "{} boxes ({} unsplit{})",
                paving.union.len(),
                paving.unsplit_count(),
                if paving.truncated() { ", box budget reached" } else { "" }
            );
            if paving.union.is_empty() {
                explain_and_report(&m, None)?;
                return Err(Failure::Inconsistent);
            }
            match out {
                Some(p) => {
                    let w = create(&p)?;
                    write_union_jsonl(&paving.union, w).map_err(|e| io_err(&p, e))
                }
                None => write_union_jsonl(&paving.union, io::stdout().lock()).map_err(usage),
            }
        }
        Cmd::Explain { model, json, max_sets } => {
            let m = load_model(&model.model)?;
            let opts = ExplainOptions {
                max_sets,
                ..Default::default()
            };
            let report = min_conflict_sets(m.constraints(), &m.domain_box(), &opts);
            print!("{}", report.table());
            if let Some(p) = json {
                let text = serde_json::to_string_pretty(&report).map_err(usage)?;
                write_text(&p, &(text + "\n"))?;
            }
            if report.is_empty() {
                Ok(())
            } else {
                Err(Failure::Inconsistent)
            }
        }
        Cmd::Sample {
            model,
            sample,
            union,
            out,
            stats,
        } => {
            let m = load_model(&model.model)?;
            let jobs = setting(None, "jobs", Some(&m), 1)?;
            let u = match union {
                Some(p) => {
                    let f = File::open(&p).map_err(|e| io_err(&p, e))?;
                    read_union_jsonl(BufReader::new(f), m.unknown_names()).map_err(|e| Failure::Parse(format!("{}: {e}", p.display())))?
                }
                None => {
                    let b = propagate_fixpoint(m.constraints(), &m.domain_box(), DEFAULT_TOL);
                    if b.dims().iter().any(|d| d.is_empty()) {
                        explain_and_report(&m, None)?;
                        return Err(Failure::Inconsistent);
                    }
                    BoxUnion::single(b)
                }
            };
            let opts = sampler_options(&sample, jobs, &m)?;
            run_sampling(&m, &u, &opts, out.as_deref(), stats.as_deref()).map(|_| ())
        }
        Cmd::Simulate {
            model,
            solutions,
            index,
            t_end,
            csv,
            json,
            svg: svg_out,
        } => {
            let m = load_model(&model.model)?;
            let sol = read_solution(&m, &solutions, index)?;
            let horizon = bound_spec(&m, &sol.assignment).map(|f| f.horizon()).unwrap_or(DEFAULT_T_END);
            let t_end = setting(t_end, "t_end", Some(&m), horizon.max(1.0))?;
            let y0 = steady_state_vector(&m, &sol.assignment).map_err(usage)?;
            let stab = stability_check(&m, &sol.assignment, &y0).map_err(usage)?;
            eprintln!("steady state: {:?} (max real part {:e})", stab.class, stab.max_real);
            let sim = simulate(&m, &sol.assignment, &y0, t_end, &SimOptions::default()).map_err(usage)?;
            for w in &sim.warnings {
                eprintln!("warning: {w}");
            }
            let mut wrote = false;
            if let Some(p) = &csv {
                sim.trace.write_csv(create(p)?).map_err(|e| io_err(p, e))?;
                wrote = true;
            }
            if let Some(p) = &json {
                sim.trace.write_json(create(p)?).map_err(|e| io_err(p, e))?;
                wrote = true;
            }
            if let Some(p) = &svg_out {
                write_text(p, &svg::render(&sim.trace, &format!("solution {index}")))?;
                wrote = true;
            }
            if !wrote {
                sim.trace.write_csv(io::stdout().lock()).map_err(usage)?;
            }
            Ok(())
        }
        Cmd::Check {
            trace,
            stl,
            model,
            solutions,
            index,
        } => {
            let tr = read_trace(&trace)?;
            let text = fs::read_to_string(&stl).map_err(|e| io_err(&stl, e))?;
            let signals: Vec<&str> = tr.names.iter().map(String::as_str).collect();
            let formula = match (&model, &solutions) {
                (Some(mm), Some(sp)) => {
                    let m = load_model(mm)?;
                    let sol = read_solution(&m, sp, index)?;
                    let params: Vec<&str> = m.unknown_names().iter().map(String::as_str).collect();
                    let f = StlFormula::parse_with_params(&text, &signals, &params)
                        .map_err(|e| Failure::Parse(format!("{}: {e}", stl.display())))?;
                    let vals: Vec<(&str, f64)> = f.params().iter().filter_map(|p| sol.get(p).map(|v| (p.as_str(), v))).collect();
                    f.bind(vals)
                }
                (None, None) => StlFormula::parse(&text, &signals)
                    .map_err(|e| Failure::Parse(format!("{}: {e}", stl.display())))?,
                _ => return Err(usage("--model and --solutions go together")),
            };
            let v = formula.satisfies(&tr).map_err(|e| match e {
                StlError::Parse(p) => Failure::Parse(p.to_string()),
                other => usage(other),
            })?;
            println!("satisfied: {}", v.satisfied);
            println!("robustness: {:e}", v.robustness);
            if v.marginal {
                println!("note: robustness is within rounding of zero");
            }
            Ok(())
        }
        Cmd::Pipeline {
            model,
            pave: pa,
            sample,
            simulate: n_sim,
            out_dir,
        } => pipeline(&model.model, &pa, &sample, n_sim, &out_dir),
    }
}

fn run_sampling(m: &Model, u: &BoxUnion, opts: &SamplerOptions, out: Option<&Path>, stats: Option<&Path>) -> Res<Vec<Solution>> {
    let run = sample_steady_states(m, u, opts).map_err(usage)?;
    match out {
        Some(p) => write_solutions_jsonl(&run.solutions, create(p)?).map_err(|e| io_err(p, e))?,
        None => write_solutions_jsonl(&run.solutions, io::stdout().lock()).map_err(usage)?,
    }
    if let Some(p) = stats {
        let text = serde_json::to_string_pretty(&run.stats).map_err(usage)?;
        write_text(p, &(text + "\n"))?;
    }
    eprintln!(
        "{} solutions from {} attempts in {:.2} s",
        run.solutions.len(),
        run.stats.attempts,
        run.stats.wall_time_s
    );
    if run.solutions.len() < opts.target {
        return Err(Failure::Budget);
    }
    Ok(run.solutions)
}

fn pipeline(model: &str, pa: &PaveArgs, sa: &SampleArgs, n_sim: Option<usize>, dir: &Path) -> Res<()> {
    let m = load_model(model)?;
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let popts = pave_options(pa, &m)?;

    let contracted = propagate_fixpoint(m.constraints(), &m.domain_box(), popts.tol);
    if contracted.dims().iter().any(|d| d.is_empty()) {
        println!("propagation proves the model inconsistent");
        explain_and_report(&m, Some(&dir.join("conflicts.json")))?;
        return Err(Failure::Inconsistent);
    }
    write_text(&dir.join("contracted.json"), &(box_to_json(&contracted) + "\n"))?;

    let paving = pave(m.constraints(), &contracted, &popts);
    eprintln!(
        "paving: {} boxes ({} unsplit{})",
        paving.union.len(),
        paving.unsplit_count(),
        if paving.truncated() { ", box budget reached" } else { "" }
    );
    if paving.union.is_empty() {
        println!("paving finds no solution box");
        explain_and_report(&m, Some(&dir.join("conflicts.json")))?;
        return Err(Failure::Inconsistent);
    }
    let up = dir.join("union.jsonl");
    write_union_jsonl(&paving.union, create(&up)?).map_err(|e| io_err(&up, e))?;

    let sopts = sampler_options(sa, popts.jobs, &m)?;
    let sols = run_sampling(&m, &paving.union, &sopts, Some(&dir.join("solutions.jsonl")), Some(&dir.join("stats.json")))?;

    let n_sim = setting(n_sim, "simulate", Some(&m), 10)?;
    let mut checks = Vec::new();
    let (mut stable, mut satisfied) = (0usize, 0usize);
    for (k, s) in sols.iter().take(n_sim).enumerate() {
        let entry = match cutoff_response(&m, &s.assignment, &SimOptions::default()) {
            Ok(r) => {
                let base = dir.join("traces").join(format!("solution_{k}"));
                r.simulation
                    .trace
                    .write_csv(create(&base.with_extension("csv"))?)
                    .map_err(|e| io_err(&base, e))?;
                write_text(&base.with_extension("svg"), &svg::render(&r.simulation.trace, &format!("solution {k}")))?;
                let is_stable = r.stability.class == steadyscan::ode::Stability::Stable;
                stable += is_stable as usize;
                satisfied += (is_stable && r.verdict.satisfied) as usize;
                serde_json::json!({
                    "index": k,
                    "stability": r.stability.class,
                    "max_real_eigenvalue": r.stability.max_real,
                    "satisfied": r.verdict.satisfied,
                    "robustness": r.verdict.robustness,
                    "marginal": r.verdict.marginal,
                    "warnings": r.simulation.warnings,
                })
            }
            Err(steadyscan::iron::ResponseError::NoSpec) => break,
            Err(e) => serde_json::json!({ "index": k, "error": e.to_string() }),
        };
        checks.push(entry);
    }
    if !checks.is_empty() {
        let text = serde_json::to_string_pretty(&checks).map_err(usage)?;
        write_text(&dir.join("checks.json"), &(text + "\n"))?;
        println!("dynamics: {satisfied} of {stable} stable solutions satisfy the specification ({} simulated)", checks.len());
    }
    println!("{} solutions written to {}", sols.len(), dir.join("solutions.jsonl").display());
    Ok(())
}
