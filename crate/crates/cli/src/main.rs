//! `qki`: decompose sources, print rate regions, simulate codes, estimate
//! the converse functionals and audit the converse chains from the shell.
//!
//! The primary artifact of every command goes to `--out` (or stdout when
//! absent); the human summary goes to stdout when `--out` is given and to
//! stderr otherwise, so stdout always stays machine-readable.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qki::bounds::{self, Budget, Which};
use qki::ki::io::{decomposition_from_json, decomposition_to_json};
use qki::ki::{ki_decompose_with, KiDecomposition, KiOptions, Tolerances};
use qki::qcore::io::{fmt_f17, state_from_json};
use qki::qcore::random::default_seed;
use qki::rates::{rate_region, region_boundary_csv, schumacher_gap};
use qki::sim::audit::{audit_converse_chain, SLACK_TOL};
use qki::sim::protocol::{assisted_code, cq_code, reports_csv, run_assisted_ki, run_unassisted_ki, CodeInstance, Mode};
use qki::Error;

#[derive(Parser, Debug)]
#[command(name = "qki", version, about = "Koashi-Imoto source compression toolkit")]
struct Cli {
    /// Numerical tolerance (decomposition checks; audit slack)
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// RNG seed (default: $QKI_SEED, else 0)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file for the primary artifact (default: stdout)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decompose a source state and write the decomposition JSON
    Decompose {
        /// State JSON on systems A and R
        input: PathBuf,
    },
    /// Rate-region summary and boundary CSV
    Rates {
        /// Decomposition JSON (a state JSON is decomposed first)
        input: PathBuf,
        /// Number of boundary points
        #[arg(long, default_value_t = 101)]
        samples: usize,
    },
    /// Simulate codes over a grid of block lengths and rates
    Simulate {
        input: PathBuf,
        /// Block lengths, e.g. `2,4,6,8`
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        #[command(flatten)]
        code: CodeArgs,
    },
    /// Feasible lower bounds on the converse functionals
    Bounds {
        input: PathBuf,
        /// Sorted infidelity targets, e.g. `0,0.05,0.1`
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        epsilons: Vec<f64>,
        #[arg(long, default_value_t = 6)]
        restarts: usize,
        /// Evaluations per restart
        #[arg(long, default_value_t = 300)]
        iters: usize,
        /// Environment dimension (default: min(|CNQ|², 64))
        #[arg(long)]
        env: Option<usize>,
        /// Also write the optimal isometries as JSON lines
        #[arg(long)]
        ansatz_out: Option<PathBuf>,
    },
    /// Evaluate every step of both converse chains on a simulated code
    Audit {
        input: PathBuf,
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        code: CodeArgs,
        /// Infidelity used for the continuity term (default: 1 − F)
        #[arg(long)]
        epsilon: Option<f64>,
    },
}

#[derive(Args, Debug, Clone)]
struct CodeArgs {
    /// Qubit rates (numbers or `full`); default S(CQ) + slack
    #[arg(long, value_delimiter = ',')]
    rate: Vec<String>,
    #[arg(long, default_value_t = Mode::Unassisted)]
    mode: Mode,
    /// Rate margin above the entropy
    #[arg(long, default_value_t = 0.25)]
    slack: f64,
}

/// CLI failure with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::VerificationFailed(_)
            | Error::SingularAverage
            | Error::DegenerateCenterSplit { .. }
            | Error::IrreducibilityFailure { .. }
            | Error::NoFeasiblePoint => 3,
            Error::DimTooLarge { .. } | Error::BlockLengthTooLarge { .. } => 4,
            Error::SlackViolation { .. } => 5,
            _ => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn input_error(message: String) -> Failure {
    Failure { code: 2, message }
}

type CliResult<T> = std::result::Result<T, Failure>;

struct Ctx {
    tol: Option<f64>,
    seed: u64,
    out: Option<PathBuf>,
}

impl Ctx {
    fn tolerances(&self) -> Tolerances {
        match self.tol {
            Some(t) => Tolerances {
                fidelity: t,
                structure: t,
                isometry: t,
            },
            None => Tolerances::default(),
        }
    }

    /// Write the artifact, then the summary on the channel not used by it.
    fn emit(&self, artifact: &str, summary: &str) -> CliResult<()> {
        match &self.out {
            Some(path) => {
                fs::write(path, artifact).map_err(|e| input_error(format!("cannot write {}: {e}", path.display())))?;
                print!("{summary}");
            }
            None => {
                eprint!("{summary}");
                print!("{artifact}");
            }
        }
        Ok(())
    }
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| input_error(format!("cannot read {}: {e}", path.display())))
}

/// A decomposition file is recognized by its `blocks` field; anything else
/// is parsed as a state and decomposed.
fn load_ki(path: &Path, ctx: &Ctx) -> CliResult<KiDecomposition> {
    let text = read(path)?;
    let is_decomposition = serde_json::from_str::<serde_json::Value>(&text)
        .ok()
        .and_then(|v| v.as_object().map(|o| o.contains_key("blocks")))
        .unwrap_or(false);
    if is_decomposition {
        return Ok(decomposition_from_json(&text)?);
    }
    let state = state_from_json(&text)?;
    let opts = KiOptions {
        seed: ctx.seed,
        povm: None,
        tolerances: ctx.tolerances(),
    };
    Ok(ki_decompose_with(&state, &opts)?)
}

fn block_table(ki: &KiDecomposition) -> String {
    let mut s = format!(
        "{} block{}, |A| = {}, |R| = {}\n",
        ki.num_blocks(),
        if ki.num_blocks() == 1 { "" } else { "s" },
        ki.dim_a,
        ki.dim_r
    );
    s.push_str("j\tp_j\tdQ\tmN\n");
    for (j, b) in ki.blocks.iter().enumerate() {
        s.push_str(&format!("{j}\t{}\t{}\t{}\n", fmt_f17(b.p), b.q_dim, b.n_dim));
    }
    s.push_str(&format!(
        "reconstruction fidelity {}\n",
        fmt_f17(ki.verification.reconstruction_fidelity)
    ));
    s
}

/// `full` is the lossless rate `log₂|C||Q|` of the letter alphabet.
fn parse_rate(text: &str, ki: &KiDecomposition) -> CliResult<f64> {
    if text.eq_ignore_ascii_case("full") {
        let (c, _, q) = ki.padded_dims();
        return Ok(((c * q) as f64).log2());
    }
    let r: f64 = text
        .parse()
        .map_err(|_| input_error(format!("--rate: `{text}` is not a number or `full`")))?;
    if !r.is_finite() || r < 0.0 {
        return Err(input_error(format!("--rate: {r} must be finite and nonnegative")));
    }
    Ok(r)
}

fn rates_for(args: &CodeArgs, ki: &KiDecomposition) -> CliResult<Vec<f64>> {
    if args.rate.is_empty() {
        return Ok(vec![rate_region(ki)?.s_cq + args.slack]);
    }
    args.rate.iter().map(|r| parse_rate(r, ki)).collect()
}

fn check_slack(slack: f64) -> CliResult<()> {
    if !slack.is_finite() || slack < 0.0 {
        return Err(input_error(format!("--slack: {slack} must be finite and nonnegative")));
    }
    Ok(())
}

fn cmd_decompose(ctx: &Ctx, input: &Path) -> CliResult<()> {
    let ki = load_ki(input, ctx)?;
    ctx.emit(&decomposition_to_json(&ki), &block_table(&ki))
}

fn cmd_rates(ctx: &Ctx, input: &Path, samples: usize) -> CliResult<()> {
    let ki = load_ki(input, ctx)?;
    let r = rate_region(&ki)?;
    let csv = region_boundary_csv(&r, samples)?;
    let summary = format!(
        "S(C) = {}\nS(CQ) = {}\nunassisted corner (E, Q) = ({}, {})\nassisted corner (E, Q) = ({}, {})\nSchumacher gap = {}\n",
        fmt_f17(r.s_c),
        fmt_f17(r.s_cq),
        fmt_f17(r.corner_unassisted.e),
        fmt_f17(r.corner_unassisted.q),
        fmt_f17(r.corner_assisted.e),
        fmt_f17(r.corner_assisted.q),
        fmt_f17(schumacher_gap(&ki)?),
    );
    ctx.emit(&csv, &summary)
}

fn cmd_simulate(ctx: &Ctx, input: &Path, ns: &[usize], args: &CodeArgs) -> CliResult<()> {
    check_slack(args.slack)?;
    if ns.contains(&0) {
        return Err(input_error("--n: block lengths must be positive".into()));
    }
    let ki = load_ki(input, ctx)?;
    let mut rows = Vec::new();
    match args.mode {
        Mode::Unassisted => {
            let rates = rates_for(args, &ki)?;
            for &n in ns {
                for &rate in &rates {
                    rows.push(run_unassisted_ki(&ki, n, rate)?);
                }
            }
        }
        Mode::Assisted => {
            for &n in ns {
                rows.push(run_assisted_ki(&ki, n, args.slack)?);
            }
        }
    }
    ctx.emit(&reports_csv(&rows), &format!("{} row(s)\n", rows.len()))
}

fn cmd_bounds(ctx: &Ctx, input: &Path, epsilons: &[f64], budget: &Budget, ansatz_out: Option<&Path>) -> CliResult<()> {
    if let Some(e) = epsilons.iter().find(|e| !(0.0..=1.0).contains(*e)) {
        return Err(input_error(format!("--epsilons: {e} outside [0, 1]")));
    }
    if epsilons.windows(2).any(|w| w[0] > w[1]) {
        return Err(input_error("--epsilons: list must be sorted ascending".into()));
    }
    let ki = load_ki(input, ctx)?;
    let j = bounds::envelope(&ki, epsilons, Which::J, budget, ctx.seed)?;
    let z = bounds::envelope(&ki, epsilons, Which::Z, budget, ctx.seed)?;
    if let Some(path) = ansatz_out {
        let lines: String = j
            .estimates
            .iter()
            .chain(&z.estimates)
            .map(|e| e.ansatz.to_json() + "\n")
            .collect();
        fs::write(path, lines).map_err(|e| input_error(format!("cannot write {}: {e}", path.display())))?;
    }
    let s = rate_region(&ki)?.s_n_given_c;
    ctx.emit(
        &bounds::bounds_csv(&j, &z),
        &format!("{} epsilon(s); S(N|C) = {}\n", epsilons.len(), fmt_f17(s)),
    )
}

fn cmd_audit(ctx: &Ctx, input: &Path, n: usize, args: &CodeArgs, epsilon: Option<f64>) -> CliResult<()> {
    check_slack(args.slack)?;
    if n == 0 {
        return Err(input_error("--n: block length must be positive".into()));
    }
    let ki = load_ki(input, ctx)?;
    let code: CodeInstance = match args.mode {
        Mode::Unassisted => {
            let rates = rates_for(args, &ki)?;
            if rates.len() != 1 {
                return Err(input_error("--rate: audit takes a single rate".into()));
            }
            cq_code(&ki, n, rates[0])?
        }
        Mode::Assisted => assisted_code(&ki, n, args.slack)?,
    };
    let report = audit_converse_chain(&code, &ki, epsilon)?;
    let summary = format!(
        "n = {}, rate {}, fidelity {}, delta {}, min slack {}\n",
        report.n,
        fmt_f17(report.rate_q),
        fmt_f17(report.fidelity),
        fmt_f17(report.delta),
        fmt_f17(report.min_slack())
    );
    ctx.emit(&report.to_csv(), &summary)?;
    report.check(ctx.tol.unwrap_or(SLACK_TOL))?;
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(t) = cli.tol {
        if !(t.is_finite() && t > 0.0) {
            return Err(input_error(format!("--tol: {t} must be positive")));
        }
    }
    let ctx = Ctx {
        tol: cli.tol,
        seed: cli.seed.unwrap_or_else(default_seed),
        out: cli.out,
    };
    match cli.command {
        Command::Decompose { input } => cmd_decompose(&ctx, &input),
        Command::Rates { input, samples } => cmd_rates(&ctx, &input, samples),
        Command::Simulate { input, n, code } => cmd_simulate(&ctx, &input, &n, &code),
        Command::Bounds {
            input,
            epsilons,
            restarts,
            iters,
            env,
            ansatz_out,
        } => {
            let budget = Budget {
                restarts,
                iterations: iters,
                env,
            };
            cmd_bounds(&ctx, &input, &epsilons, &budget, ansatz_out.as_deref())
        }
        Command::Audit {
            input,
            n,
            code,
            epsilon,
        } => cmd_audit(&ctx, &input, n, &code, epsilon),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
