use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use magstab::certify::{self, CertificateReport, Verdict};
use magstab::charts::{self, ChartSettings};
use magstab::dynamics::IntegrationSettings;
use magstab::harness::{self, corpus, run, ProblemDefinition, SweepSettings};
use magstab::par::Execution;
use serde::Serialize;

const EXIT_OK: u8 = 0;
const EXIT_MISMATCH: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(name = "magstab", version, about = "Instability certificates and escape experiments for magnetic Lagrangian systems")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Write reports into this directory instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for shell sampling.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true)]
    tol_abs: Option<f64>,
    #[arg(long, global = true)]
    tol_rel: Option<f64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Disable data parallelism.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Probe the potential and magnetic growth conditions on potential shells.
    Certify {
        problem: PathBuf,
        #[arg(long)]
        radius: Option<f64>,
        /// Shell exponents `a:b`, i.e. δ from 10^a to 10^b.
        #[arg(long, value_parser = parse_shells, allow_hyphen_values = true)]
        shells: Option<(i32, i32)>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Integrate the rescaled dynamics for every ε.
    Sweep {
        problem: PathBuf,
        /// Comma-separated, strictly decreasing ε values.
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
        #[arg(long = "T")]
        horizon: Option<f64>,
    },
    /// Sweep and decide whether the trajectories escape.
    Escape {
        problem: PathBuf,
        /// Escape level M (default: maximum of the finest curve).
        #[arg(long)]
        level: Option<f64>,
    },
    /// Build and verify the adapted chart of the problem.
    Chart {
        problem: PathBuf,
        /// Use the multi-function chart.
        #[arg(long)]
        multi: bool,
    },
    /// Built-in examples.
    Corpus {
        #[command(subcommand)]
        action: CorpusAction,
    },
}

#[derive(Subcommand)]
enum CorpusAction {
    List,
    Show { name: String },
    RunAll,
}

fn parse_shells(s: &str) -> Result<(i32, i32), String> {
    let (a, b) = s.split_once(':').ok_or("expected a:b")?;
    let a: i32 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b: i32 = b.trim().parse().map_err(|e| format!("{e}"))?;
    if a >= b {
        return Err("need a < b".into());
    }
    Ok((a, b))
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn validation(message: impl std::fmt::Display) -> Self {
        Failure { code: EXIT_VALIDATION, message: message.to_string() }
    }

    fn numerical(message: impl std::fmt::Display) -> Self {
        Failure { code: EXIT_NUMERICAL, message: message.to_string() }
    }
}

impl Global {
    fn execution(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }

    fn options(&self) -> run::RunOptions {
        run::RunOptions { seed: self.seed, execution: self.execution(), ..Default::default() }
    }

    fn apply(&self, def: &mut ProblemDefinition) -> Result<(), Failure> {
        if let Some(a) = self.tol_abs {
            def.tolerances.abs = a;
        }
        if let Some(r) = self.tol_rel {
            def.tolerances.rel = r;
        }
        if !(def.tolerances.abs > 0.0 && def.tolerances.rel > 0.0) {
            return Err(Failure::validation("tolerances must be positive"));
        }
        Ok(())
    }

    fn emit(&self, stem: &str, text: &str) -> Result<(), Failure> {
        match &self.out {
            None => {
                use std::io::Write;
                let mut stdout = std::io::stdout().lock();
                let nl = if text.ends_with('\n') { "" } else { "\n" };
                // A closed pipe (e.g. `| head`) is not an error.
                match write!(stdout, "{text}{nl}").and_then(|_| stdout.flush()) {
                    Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Failure::validation(format!("stdout: {e}"))),
                    _ => Ok(()),
                }
            }
            Some(dir) => {
                std::fs::create_dir_all(dir).map_err(|e| Failure::validation(format!("{}: {e}", dir.display())))?;
                let ext = match self.format {
                    Format::Json => "json",
                    Format::Csv => "csv",
                };
                let path = dir.join(format!("{stem}.{ext}"));
                std::fs::write(&path, text).map_err(|e| Failure::validation(format!("{}: {e}", path.display())))?;
                eprintln!("wrote {}", path.display());
                Ok(())
            }
        }
    }

    fn emit_json<T: Serialize>(&self, stem: &str, value: &T) -> Result<(), Failure> {
        let text = serde_json::to_string_pretty(value).map_err(Failure::numerical)?;
        self.emit(stem, &text)
    }
}

fn load(path: &Path, global: &Global) -> Result<ProblemDefinition, Failure> {
    let mut def = harness::load_problem(path).map_err(Failure::validation)?;
    global.apply(&mut def)?;
    Ok(def)
}

fn shells_csv(reports: &[&CertificateReport]) -> String {
    let mut out = String::from("condition,delta,samples,attempts,min_ratio,mean_ratio,max_ratio\n");
    for r in reports {
        let cond = serde_json::to_value(r.condition).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        for s in &r.shells {
            let _ = writeln!(out, "{cond},{:e},{},{},{:e},{:e},{:e}", s.delta, s.samples, s.attempts, s.min_ratio, s.mean_ratio, s.max_ratio);
        }
    }
    out
}

fn cmd_certify(global: &Global, path: &Path, radius: Option<f64>, shells: Option<(i32, i32)>, samples: Option<usize>) -> Result<u8, Failure> {
    let mut def = load(path, global)?;
    if let Some(r) = radius {
        def.probe.radius = r;
    }
    if let Some((a, b)) = shells {
        def.probe.delta_min = 10f64.powi(a);
        def.probe.delta_max = 10f64.powi(b);
    }
    if let Some(n) = samples {
        def.probe.samples = n;
    }
    def.probe.validate().map_err(Failure::validation)?;
    let section = run::run_certification(&def, &global.options());
    let potential = match &section.potential {
        run::Outcome::Ok(r) => r,
        run::Outcome::Error(e) => return Err(Failure::numerical(e)),
    };
    let magnetic = match &section.magnetic {
        run::Outcome::Ok(r) => r,
        run::Outcome::Error(e) => return Err(Failure::numerical(e)),
    };
    match global.format {
        Format::Json => global.emit_json(&format!("{}-certify", def.name), &section)?,
        Format::Csv => global.emit(&format!("{}-certify", def.name), &shells_csv(&[potential, magnetic]))?,
    }
    let mismatch = |want: Option<Verdict>, got: &CertificateReport| want.is_some_and(|w| w != got.verdict);
    let quasi_failed = section.quasi_homogeneous.as_ref().is_some_and(|q| q.ok().is_none_or(|r| r.verdict != Verdict::Certified));
    Ok(if mismatch(def.expect_certify.potential, potential) || mismatch(def.expect_certify.magnetic, magnetic) || quasi_failed {
        EXIT_MISMATCH
    } else {
        EXIT_OK
    })
}

fn sweep_settings(def: &ProblemDefinition, global: &Global) -> SweepSettings {
    SweepSettings {
        integration: IntegrationSettings { tol: def.tolerances, ..Default::default() },
        execution: global.execution(),
        consistency_check: true,
    }
}

fn cmd_sweep(global: &Global, path: &Path, eps: Option<Vec<f64>>, horizon: Option<f64>) -> Result<u8, Failure> {
    let def = load(path, global)?;
    let mut file = def.source.clone();
    if let Some(e) = eps {
        file.epsilons = e;
    }
    if let Some(t) = horizon {
        file.horizon = t;
    }
    let mut def = ProblemDefinition::from_file(file, &def.name).map_err(Failure::validation)?;
    global.apply(&mut def)?;
    let report = harness::run_epsilon_sweep(&def, &sweep_settings(&def, global));
    match global.format {
        Format::Json => global.emit_json(&format!("{}-sweep", def.name), &report)?,
        Format::Csv => {
            for run in &report.runs {
                if let Some(t) = &run.trajectory {
                    global.emit(&format!("{}-eps{:e}", def.name, run.epsilon), &t.to_csv())?;
                }
            }
        }
    }
    if let Some(e) = report.runs.iter().find_map(|r| r.error.as_ref()) {
        return Err(Failure::numerical(e));
    }
    let invariants_hold = report.runs.iter().all(|r| {
        r.initial_drift_error <= harness::sweep::INITIAL_DRIFT_TOLERANCE
            && r.lemma1.is_some_and(|l| l.pass)
            && r.consistency.as_ref().is_none_or(|c| c.pass)
    });
    Ok(if invariants_hold { EXIT_OK } else { EXIT_MISMATCH })
}

fn cmd_escape(global: &Global, path: &Path, level: Option<f64>) -> Result<u8, Failure> {
    let def = load(path, global)?;
    let report = harness::run_epsilon_sweep(&def, &sweep_settings(&def, global));
    if let Some(e) = report.runs.iter().find_map(|r| r.error.as_ref()) {
        return Err(Failure::numerical(e));
    }
    let outcome = match harness::detect_escape(&report, level) {
        Ok(v) => run::EscapeOutcome::Verdict(v),
        Err(e) => run::EscapeOutcome::NoEscape(e),
    };
    #[derive(Serialize)]
    struct Out<'a> {
        name: &'a str,
        expected: Option<harness::Expected>,
        limit_drift: Option<f64>,
        sup_distances: &'a [harness::sweep::SupDistance],
        escape: &'a run::EscapeOutcome,
    }
    let out = Out { name: &def.name, expected: def.expected, limit_drift: report.limit_drift, sup_distances: &report.sup_distances, escape: &outcome };
    global.emit_json(&format!("{}-escape", def.name), &out)?;
    let met = match (def.expected, &outcome) {
        (None, _) => true,
        (Some(harness::Expected::Unstable), run::EscapeOutcome::Verdict(v)) => v.demonstrated,
        (Some(harness::Expected::Stable), run::EscapeOutcome::NoEscape(harness::EscapeError::NoPositiveDrift { .. })) => true,
        _ => false,
    };
    Ok(if met { EXIT_OK } else { EXIT_MISMATCH })
}

fn cmd_chart(global: &Global, path: &Path, multi: bool) -> Result<u8, Failure> {
    let def = load(path, global)?;
    let spec = def.chart.as_ref().ok_or_else(|| Failure::validation("problem has no chart specification"))?;
    let settings = ChartSettings { grid: spec.grid, execution: global.execution(), ..Default::default() };
    let report = if multi {
        let m = spec.multi.as_ref().ok_or_else(|| Failure::validation("problem has no multi chart"))?;
        let points = certify::sample_box(&def.center, def.probe.radius, run::ORTHOGONALITY_POINTS, global.seed);
        let ortho = certify::check_orthogonal_commuting(&def.metric, &m.fields, &points).map_err(Failure::numerical)?;
        if ortho.verdict != Verdict::Certified {
            global.emit_json(&format!("{}-chart", def.name), &ortho)?;
            return Ok(EXIT_MISMATCH);
        }
        charts::build_multi_chart(&def.metric, &m.fields, m.base.clone(), m.r_box.clone(), m.y_box.clone(), settings)
    } else {
        let s = spec.single.as_ref().ok_or_else(|| Failure::validation("problem has no single chart"))?;
        charts::build_chart(&def.metric, &def.f, s.base.clone(), s.z_range, s.y_box.clone(), settings)
    };
    let (_, report) = report.map_err(Failure::numerical)?;
    global.emit_json(&format!("{}-chart", def.name), &report)?;
    Ok(if report.pass { EXIT_OK } else { EXIT_MISMATCH })
}

fn cmd_corpus(global: &Global, action: &CorpusAction) -> Result<u8, Failure> {
    match action {
        CorpusAction::List => {
            #[derive(Serialize)]
            struct Entry {
                name: String,
                description: Option<String>,
                expected: Option<harness::Expected>,
            }
            let entries: Vec<Entry> = corpus::corpus()
                .into_iter()
                .map(|d| Entry { name: d.name, description: d.description, expected: d.expected })
                .collect();
            global.emit_json("corpus", &entries)?;
            Ok(EXIT_OK)
        }
        CorpusAction::Show { name } => {
            let text = corpus::source(name).ok_or_else(|| Failure::validation(format!("unknown corpus entry {name:?}")))?;
            global.emit(name, text)?;
            Ok(EXIT_OK)
        }
        CorpusAction::RunAll => {
            let mut defs = corpus::corpus();
            for d in &mut defs {
                global.apply(d)?;
            }
            let report = run::run_all(&defs, &global.options());
            global.emit_json("run-all", &report)?;
            Ok(if report.numerical_failure {
                EXIT_NUMERICAL
            } else if report.all_expected {
                EXIT_OK
            } else {
                EXIT_MISMATCH
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let g = &cli.global;
    let result = match &cli.command {
        Command::Certify { problem, radius, shells, samples } => cmd_certify(g, problem, *radius, *shells, *samples),
        Command::Sweep { problem, eps, horizon } => cmd_sweep(g, problem, eps.clone(), *horizon),
        Command::Escape { problem, level } => cmd_escape(g, problem, *level),
        Command::Chart { problem, multi } => cmd_chart(g, problem, *multi),
        Command::Corpus { action } => cmd_corpus(g, action),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
