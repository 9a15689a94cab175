//! Command-line front end for the lexicographic GP solver.
//!
//! Exit status: 0 on success, 1 when a solver stage fails, 2 on bad input.
//! Reports go to the output stream, diagnostics to the error stream.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use lexgp::oracle::{sample_feasible_points, solve_primal_log_space, OracleOptions};
use lexgp::{
    carry_constraint, degree_of_difficulty, exponent_matrix, rank, solve_lexicographic, Constraint,
    DualOptions, GpStage, LexError, LexGpProblem, LexMode, LexOptions, LexSolution, StageSolution,
};

pub mod problem_file;
pub mod report;

pub use problem_file::{parse_problem, InputError, ProblemFile};
pub use report::{
    CheckDocument, CheckStage, DualDocument, OracleRecord, ReportDocument, StageRecord,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_SOLVER: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

const ORACLE_SAMPLES: usize = 200;

#[derive(Debug, Parser)]
#[command(
    name = "lexgp",
    version,
    about = "Lexicographic posynomial geometric programming"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// How earlier objectives constrain later stages.
    #[arg(long, value_enum, default_value_t = Mode::Strict, global = true)]
    pub mode: Mode,
    /// Relative slack on carried bounds.
    #[arg(long, default_value_t = lexgp::lex_driver::DEFAULT_CARRY_EPS, global = true)]
    pub carry_eps: f64,
    /// Optimality tolerance for the dual ascent and the oracle.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Table, global = true)]
    pub format: Format,
    /// Seed for the oracle's feasible-point sampler.
    #[arg(long, default_value_t = 42, global = true)]
    pub seed: u64,
    /// Cross-check every stage with the independent primal solver.
    #[arg(long, global = true)]
    pub oracle: bool,
    /// Suppress warnings on the error stream.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every stage in priority order.
    Solve { file: PathBuf },
    /// Report a single stage (earlier stages are solved for their bounds in strict mode).
    Stage {
        file: PathBuf,
        #[arg(long)]
        index: usize,
    },
    /// Emit the dual program of a stage without solving it.
    Dual {
        file: PathBuf,
        #[arg(long)]
        index: usize,
    },
    /// Validate the file and report rank and degree of difficulty per stage.
    Check { file: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Strict,
    Independent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Table,
}

impl Mode {
    fn lex(self) -> LexMode {
        match self {
            Mode::Strict => LexMode::Strict,
            Mode::Independent => LexMode::Independent,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Mode::Strict => "strict",
            Mode::Independent => "independent",
        }
    }
}

/// Parse `args` (program name first) and execute.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = err.write_all(text.as_bytes());
                EXIT_INPUT
            } else {
                let _ = out.write_all(text.as_bytes());
                EXIT_OK
            };
        }
    };
    execute(&cli, out, err)
}

pub fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let mut session = Session { cli, err };
    match session.dispatch(out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(session.err, "error: {e}");
            EXIT_INPUT
        }
    }
}

struct Session<'a> {
    cli: &'a Cli,
    err: &'a mut dyn Write,
}

impl Session<'_> {
    fn dispatch(&mut self, out: &mut dyn Write) -> Result<i32, InputError> {
        let cli = self.cli;
        if !(cli.carry_eps >= 0.0 && cli.carry_eps.is_finite()) {
            return Err(bad_flag(
                "--carry-eps",
                "must be a finite nonnegative number",
            ));
        }
        if let Some(tol) = cli.tol {
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(bad_flag("--tol", "must be a finite positive number"));
            }
        }
        match &cli.command {
            Command::Solve { file } => {
                let f = load(file)?;
                Ok(self.solve(&f, None, out))
            }
            Command::Stage { file, index } => {
                let f = load(file)?;
                let k = check_index(*index, &f)?;
                Ok(self.solve(&f, Some(k), out))
            }
            Command::Dual { file, index } => {
                let f = load(file)?;
                let k = check_index(*index, &f)?;
                Ok(self.dual(&f, k, out))
            }
            Command::Check { file } => {
                let f = load(file)?;
                self.check(&f, out);
                Ok(EXIT_OK)
            }
        }
    }

    fn lex_options(&self) -> LexOptions {
        let mut dual = DualOptions::default();
        if let Some(tol) = self.cli.tol {
            dual.optimality_tol = tol;
        }
        LexOptions {
            carry_eps: self.cli.carry_eps,
            dual,
            ..LexOptions::default()
        }
    }

    fn warn(&mut self, msg: &str) {
        if !self.cli.quiet {
            let _ = writeln!(self.err, "warning: {msg}");
        }
    }

    /// Full run, or stages `0..=k` with only stage `k` reported.
    fn solve(&mut self, f: &ProblemFile, only: Option<usize>, out: &mut dyn Write) -> i32 {
        let cli = self.cli;
        let p = match only {
            Some(k) => truncated(&f.problem, k),
            None => f.problem.clone(),
        };
        let (stages, failure, tail) =
            match solve_lexicographic(&p, cli.mode.lex(), &self.lex_options()) {
                Ok(LexSolution {
                    stages,
                    final_x,
                    objective_vector,
                }) => (stages, None, Some((final_x, objective_vector))),
                Err(LexError {
                    stage,
                    source,
                    partial,
                }) => (
                    partial,
                    Some(format!("stage {}: {source}", stage + 1)),
                    None,
                ),
            };
        let first = only.unwrap_or(0);
        let mut records = Vec::new();
        for sol in stages.iter().filter(|s| s.stage_index >= first) {
            let k = sol.stage_index;
            let carried = carried_constraints(&f.problem, &stages[..k]);
            let stage = f.problem.stage(k, &carried);
            if !sol.primal.unique {
                self.warn(&format!(
                    "stage {}: optimum is not unique (optimal set dimension {}); reporting the minimum-norm point",
                    k + 1,
                    sol.primal.optimal_set_dimension
                ));
            }
            let oracle = cli.oracle.then(|| self.cross_check(&stage, sol));
            records.push(StageRecord::new(
                &stage,
                sol,
                &f.objective_names[k],
                carried.len(),
                oracle,
            ));
        }
        // A single stage reports the objectives up to its own level.
        let (final_x, objective_vector) = match tail {
            Some((x, v)) => (Some(report::sig9_all(&x)), Some(report::sig9_all(&v))),
            None => (None, None),
        };
        let doc = ReportDocument {
            command: match only {
                Some(k) => format!("stage {}", k + 1),
                None => "solve".into(),
            },
            mode: cli.mode.name().into(),
            carry_eps: report::sig9(cli.carry_eps),
            variables: f.problem.variable_names().to_vec(),
            aggregate_degree_of_difficulty: f.problem.aggregate_degree_of_difficulty(),
            stages: records,
            final_x,
            objective_vector,
            failure: failure.clone(),
        };
        self.emit(out, &doc, report::report_table);
        match failure {
            Some(msg) => {
                let _ = writeln!(self.err, "error: {msg}");
                EXIT_SOLVER
            }
            None => EXIT_OK,
        }
    }

    fn cross_check(&mut self, stage: &GpStage, sol: &StageSolution) -> OracleRecord {
        let mut opts = OracleOptions::default();
        if let Some(tol) = self.cli.tol {
            opts.tol = tol;
        }
        let result = solve_primal_log_space(stage, &opts);
        let points = match sample_feasible_points(stage, ORACLE_SAMPLES, self.cli.seed) {
            Ok(points) => points,
            Err(e) => e.points,
        };
        let v = sol.dual.value;
        let violations = points
            .iter()
            .filter(|x| {
                stage
                    .objective()
                    .eval(x)
                    .is_ok_and(|g| g < v * (1.0 - 1e-9))
            })
            .count();
        let record = OracleRecord::new(&result, v, self.cli.seed, points.len(), violations);
        if record.relative_difference > 1e-3 {
            self.warn(&format!(
                "stage {}: oracle value {} differs from the dual value {} by {} relative",
                sol.stage_index + 1,
                record.value,
                report::sig9(v),
                record.relative_difference
            ));
        }
        record
    }

    fn dual(&mut self, f: &ProblemFile, k: usize, out: &mut dyn Write) -> i32 {
        let cli = self.cli;
        let mut bounds = Vec::new();
        if cli.mode == Mode::Strict && k > 0 {
            match solve_lexicographic(
                &truncated(&f.problem, k - 1),
                LexMode::Strict,
                &self.lex_options(),
            ) {
                Ok(sol) => bounds = sol.stages.iter().filter_map(|s| s.carried_bound).collect(),
                Err(e) => {
                    let _ = writeln!(self.err, "error: {e}");
                    return EXIT_SOLVER;
                }
            }
        }
        let carried = bounds_to_constraints(&f.problem, &bounds);
        let stage = f.problem.stage(k, &carried);
        let doc = DualDocument::new(
            &stage,
            k + 1,
            &f.objective_names[k],
            cli.mode.name(),
            f.problem.variable_names(),
            &bounds,
        );
        self.emit(out, &doc, report::dual_table);
        EXIT_OK
    }

    fn check(&mut self, f: &ProblemFile, out: &mut dyn Write) {
        let p = &f.problem;
        let stages = (0..p.objectives().len())
            .map(|k| {
                // Carried bounds do not change exponents, so unit bounds give the structure.
                let carried: Vec<Constraint> = match self.cli.mode {
                    Mode::Strict => bounds_to_constraints(p, &vec![1.0; k]),
                    Mode::Independent => Vec::new(),
                };
                let s = p.stage(k, &carried);
                CheckStage {
                    index: k + 1,
                    objective: f.objective_names[k].clone(),
                    terms: s.term_count(),
                    carried_constraints: carried.len(),
                    rank: rank(&exponent_matrix(&s), lexgp::posy_core::DEFAULT_RANK_TOL),
                    degree_of_difficulty: degree_of_difficulty(&s),
                }
            })
            .collect();
        let doc = CheckDocument {
            mode: self.cli.mode.name().into(),
            variables: p.variable_names().to_vec(),
            objectives: p.objectives().len(),
            constraints: p.constraints().len(),
            aggregate_degree_of_difficulty: p.aggregate_degree_of_difficulty(),
            stages,
        };
        self.emit(out, &doc, report::check_table);
    }

    fn emit<T: serde::Serialize>(&mut self, out: &mut dyn Write, doc: &T, table: fn(&T) -> String) {
        let text = match self.cli.format {
            Format::Json => report::to_json(doc),
            Format::Table => table(doc),
        };
        if let Err(e) = out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
            let _ = writeln!(self.err, "error: cannot write report: {e}");
        }
    }
}

fn bad_flag(flag: &str, message: &str) -> InputError {
    InputError::MalformedDocument {
        field: flag.into(),
        message: message.into(),
    }
}

fn load(path: &Path) -> Result<ProblemFile, InputError> {
    let text = std::fs::read_to_string(path).map_err(|e| InputError::MalformedDocument {
        field: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_problem(&text).map_err(|e| match e {
        InputError::MalformedDocument { field, message } => InputError::MalformedDocument {
            field: format!("{}: {field}", path.display()),
            message,
        },
        other => other,
    })
}

/// Converts a 1-based `--index` to a stage position.
fn check_index(index: usize, f: &ProblemFile) -> Result<usize, InputError> {
    let p = f.problem.objectives().len();
    if index == 0 || index > p {
        return Err(bad_flag(
            "--index",
            &format!("must be between 1 and {p}, got {index}"),
        ));
    }
    Ok(index - 1)
}

/// The problem restricted to objectives `0..=k`.
fn truncated(p: &LexGpProblem, k: usize) -> LexGpProblem {
    LexGpProblem::new(
        p.variable_names().to_vec(),
        p.objectives()[..=k].to_vec(),
        p.constraints().to_vec(),
    )
    .expect("a prefix of a valid problem is valid")
}

fn carried_constraints(p: &LexGpProblem, earlier: &[StageSolution]) -> Vec<Constraint> {
    let bounds: Vec<f64> = earlier.iter().filter_map(|s| s.carried_bound).collect();
    bounds_to_constraints(p, &bounds)
}

fn bounds_to_constraints(p: &LexGpProblem, bounds: &[f64]) -> Vec<Constraint> {
    bounds
        .iter()
        .zip(p.objectives())
        .map(|(&b, g)| carry_constraint(g, b, 0.0).expect("carried bounds are positive"))
        .collect()
}
