//! Command-line front end: `analyze` for single files, `batch` for directories.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::analysis::{analyze_with, AnalysisConfig, AnalysisResult, CfrMode};
use crate::bound::AsymptoticClass;
use crate::program::parse_program;
use crate::solver::{InProcessBackend, SmtLibBackend, Solver};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARSE: i32 = 1;
pub const EXIT_INTERNAL: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "phaserank", version, about = "Worst-case runtime bounds for integer transition systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Analyze one or more programs.
    Analyze {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[command(flatten)]
        opts: Options,
        #[arg(long, value_enum, default_value_t = Report::Bound)]
        report: Report,
        /// One JSON object per line instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Analyze every `.koat` file of a directory and print a summary table.
    Batch {
        dir: PathBuf,
        #[command(flatten)]
        opts: Options,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Leave out timings so the output is reproducible.
        #[arg(long)]
        no_timings: bool,
    },
}

#[derive(Args, Debug, Clone)]
pub struct Options {
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u32).range(1..=10))]
    pub mdepth: u32,
    #[arg(long, default_value = "sub-scc", value_parser = parse_cfr)]
    pub cfr: CfrMode,
    /// Global timeout in seconds.
    #[arg(long, default_value_t = 300)]
    pub timeout: u64,
    /// Strengthen guards with interval invariants.
    #[arg(long)]
    pub invariants: bool,
    #[arg(long, value_enum, default_value_t = SolverChoice::Inprocess)]
    pub solver: SolverChoice,
}

fn parse_cfr(s: &str) -> Result<CfrMode, String> {
    s.parse()
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Report {
    Class,
    Bound,
    Full,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverChoice {
    Inprocess,
    Z3,
}

impl Options {
    pub fn config(&self) -> AnalysisConfig {
        AnalysisConfig {
            mdepth: self.mdepth as usize,
            cfr: self.cfr,
            timeout: Duration::from_secs(self.timeout),
            invariants: self.invariants,
        }
    }

    pub fn solver(&self) -> Result<Solver, String> {
        match self.solver {
            SolverChoice::Inprocess => Ok(Solver::new(Arc::new(InProcessBackend::default()))),
            SolverChoice::Z3 => SmtLibBackend::locate()
                .map(|b| Solver::new(Arc::new(b)))
                .ok_or_else(|| "z3 not found on PATH".to_string()),
        }
    }
}

/// One analyzed file, as printed with `--json`.
#[derive(Serialize, Debug, Clone)]
pub struct Record {
    pub file: String,
    pub overall: String,
    pub class: String,
    pub rb: BTreeMap<String, String>,
    pub sb: BTreeMap<String, String>,
    pub proof_log: Vec<String>,
    pub timeout: bool,
    pub time_ms: u128,
}

impl Record {
    fn new(file: &str, r: &AnalysisResult, elapsed: Duration) -> Self {
        Record {
            file: file.to_string(),
            overall: r.overall.to_string(),
            class: class_label(r),
            rb: r.rb.iter().map(|(t, b)| (t.to_string(), b.to_string())).collect(),
            sb: r.sb.iter().map(|((t, v), b)| (format!("{t},{v}"), b.to_string())).collect(),
            proof_log: r.proof_log.clone(),
            timeout: r.timeout,
            time_ms: elapsed.as_millis(),
        }
    }
}

/// `INF?` marks an infinite result caused by the timeout.
pub fn class_label(r: &AnalysisResult) -> String {
    if r.timeout && r.class == AsymptoticClass::Infinite {
        "INF?".to_string()
    } else {
        r.class.to_string()
    }
}

/// Outcome of analyzing one file.
pub enum Outcome {
    Done(Box<AnalysisResult>, Duration),
    ParseError(String),
    Internal(String),
}

pub fn analyze_file(path: &Path, cfg: &AnalysisConfig, solver: &Solver) -> Outcome {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return Outcome::ParseError(format!("{}: {e}", path.display())),
    };
    let p = match parse_program(&text) {
        Ok(p) => p,
        Err(e) => return Outcome::ParseError(format!("{}:{e}", path.display())),
    };
    let start = Instant::now();
    match catch_unwind(AssertUnwindSafe(|| analyze_with(&p, cfg, solver))) {
        Ok(r) => Outcome::Done(Box::new(r), start.elapsed()),
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Outcome::Internal(format!("{}: internal error: {msg}", path.display()))
        }
    }
}

fn text_record(out: &mut String, file: &str, r: &AnalysisResult, elapsed: Duration, report: Report, prefix: bool) {
    if prefix {
        write!(out, "{file}: ").unwrap();
    }
    match report {
        Report::Class => writeln!(out, "{}", class_label(r)).unwrap(),
        Report::Bound | Report::Full => {
            writeln!(out, "{} {} [{} ms]", class_label(r), r.overall, elapsed.as_millis()).unwrap();
        }
    }
    if report == Report::Full {
        write!(out, "{}", r.rb).unwrap();
        write!(out, "{}", r.sb).unwrap();
        for l in &r.proof_log {
            writeln!(out, "{l}").unwrap();
        }
    }
}

/// Runs `analyze`; returns the text to print and the exit code.
pub fn run_analyze(files: &[PathBuf], opts: &Options, report: Report, json: bool) -> (String, String, i32) {
    let cfg = opts.config();
    let solver = match opts.solver() {
        Ok(s) => s,
        Err(e) => return (String::new(), format!("{e}\n"), EXIT_INTERNAL),
    };
    let (mut out, mut err, mut code) = (String::new(), String::new(), EXIT_OK);
    for f in files {
        let name = f.display().to_string();
        match analyze_file(f, &cfg, &solver) {
            Outcome::Done(r, elapsed) => {
                if json {
                    writeln!(out, "{}", serde_json::to_string(&Record::new(&name, &r, elapsed)).unwrap()).unwrap();
                } else {
                    text_record(&mut out, &name, &r, elapsed, report, files.len() > 1);
                }
            }
            Outcome::ParseError(e) => {
                writeln!(err, "{e}").unwrap();
                code = code.max(EXIT_PARSE);
            }
            Outcome::Internal(e) => {
                writeln!(err, "{e}").unwrap();
                code = code.max(EXIT_INTERNAL);
            }
        }
    }
    (out, err, code)
}

/// Summary counts per asymptotic class.
#[derive(Default, Debug, Clone, PartialEq, Eq)]
pub struct Summary {
    pub constant: usize,
    pub linear: usize,
    pub quadratic: usize,
    pub higher: usize,
    pub exponential: usize,
    pub infinite: usize,
    pub errors: Vec<String>,
    pub finite_ms: Vec<u128>,
}

impl Summary {
    fn add(&mut self, class: AsymptoticClass, ms: u128) {
        match class {
            AsymptoticClass::Polynomial(0) => self.constant += 1,
            AsymptoticClass::Polynomial(1) => self.linear += 1,
            AsymptoticClass::Polynomial(2) => self.quadratic += 1,
            AsymptoticClass::Polynomial(_) => self.higher += 1,
            AsymptoticClass::Exponential => self.exponential += 1,
            AsymptoticClass::Infinite => self.infinite += 1,
        }
        if class.is_finite() {
            self.finite_ms.push(ms);
        }
    }

    pub fn finite(&self) -> usize {
        self.constant + self.linear + self.quadratic + self.higher + self.exponential
    }

    pub fn table(&self, timings: bool) -> String {
        let mut s = String::new();
        write!(s, "{:>6} {:>6} {:>7} {:>8} {:>7} {:>5} {:>5} {:>7}", "O(1)", "O(n)", "O(n^2)", "O(n^>2)", "O(EXP)", "<INF", "INF", "errors").unwrap();
        if timings {
            write!(s, " {:>10}", "avg_ms").unwrap();
        }
        s.push('\n');
        write!(
            s,
            "{:>6} {:>6} {:>7} {:>8} {:>7} {:>5} {:>5} {:>7}",
            self.constant,
            self.linear,
            self.quadratic,
            self.higher,
            self.exponential,
            self.finite(),
            self.infinite,
            self.errors.len()
        )
        .unwrap();
        if timings {
            let avg = if self.finite_ms.is_empty() { 0.0 } else { self.finite_ms.iter().sum::<u128>() as f64 / self.finite_ms.len() as f64 };
            write!(s, " {avg:>10.1}").unwrap();
        }
        s.push('\n');
        s
    }
}

/// Runs `batch`; per-file lines in name order followed by the summary table.
pub fn run_batch(dir: &Path, opts: &Options, jobs: usize, timings: bool) -> (String, String, i32) {
    let cfg = opts.config();
    let solver = match opts.solver() {
        Ok(s) => s,
        Err(e) => return (String::new(), format!("{e}\n"), EXIT_INTERNAL),
    };
    let mut files: Vec<PathBuf> = match std::fs::read_dir(dir) {
        Ok(rd) => rd.filter_map(|e| e.ok()).map(|e| e.path()).filter(|p| p.extension().is_some_and(|x| x == "koat")).collect(),
        Err(e) => return (String::new(), format!("{}: {e}\n", dir.display()), EXIT_PARSE),
    };
    files.sort();
    let results: Mutex<Vec<Option<Outcome>>> = Mutex::new((0..files.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..jobs.max(1) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= files.len() {
                    break;
                }
                let o = analyze_file(&files[i], &cfg, &solver);
                results.lock().unwrap()[i] = Some(o);
            });
        }
    });
    let mut out = String::new();
    let mut summary = Summary::default();
    for (f, o) in files.iter().zip(results.into_inner().unwrap()) {
        let name = f.file_name().unwrap().to_string_lossy().to_string();
        match o.expect("analyzed") {
            Outcome::Done(r, elapsed) => {
                summary.add(r.class, elapsed.as_millis());
                if timings {
                    writeln!(out, "{name}: {} {} [{} ms]", class_label(&r), r.overall, elapsed.as_millis()).unwrap();
                } else {
                    writeln!(out, "{name}: {} {}", class_label(&r), r.overall).unwrap();
                }
            }
            Outcome::ParseError(e) | Outcome::Internal(e) => {
                writeln!(out, "{name}: error").unwrap();
                summary.errors.push(e);
            }
        }
    }
    out.push_str(&summary.table(timings));
    let err: String = summary.errors.iter().map(|e| format!("{e}\n")).collect();
    (out, err, EXIT_OK)
}

/// Entry point shared by the binary and tests.
pub fn run<I, T>(args: I) -> (String, String, i32)
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        // Help and version requests are not errors.
        Err(e) if !e.use_stderr() => return (e.to_string(), String::new(), EXIT_OK),
        Err(e) => return (String::new(), e.to_string(), EXIT_PARSE),
    };
    match &cli.command {
        Command::Analyze { files, opts, report, json } => run_analyze(files, opts, *report, *json),
        Command::Batch { dir, opts, jobs, no_timings } => run_batch(dir, opts, *jobs, !*no_timings),
    }
}
