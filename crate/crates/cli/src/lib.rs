//! Runner for closed-form and Monte Carlo averages of functionals over ℓᵖ
//! balls. Each run writes a CSV table and prints a one-line JSON summary.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::ffi::OsString;
use std::io::Write;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::config::Params;
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "lpavg", version, about = "Averages of functionals over l^p balls")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the finite-n and limiting coordinate densities on a grid.
    Density(DensityArgs),
    /// Emit uniform sample points of the discretised ball.
    Sample(SampleArgs),
    /// Closed-form average value (single, multi, blocks, time-weighted,
    /// annulus or radius sweep).
    Average(AverageArgs),
    /// One Monte Carlo estimate of E[Y_n] next to its closed form.
    Mc(McArgs),
    /// Sweep n and report the decay of Var[Y_n].
    Converge(ConvergeArgs),
    /// Gap between the sample mean of h(Y_n) and h(EY).
    Exchange(ExchangeArgs),
    /// Finite-n kernel integrals against their limit.
    Kernel(KernelArgs),
}

#[derive(Args)]
struct Common {
    /// Config file of `key = value` lines; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV path (default: $LPAVG_OUT_DIR/<command>.csv).
    #[arg(long)]
    out: Option<String>,
    /// Exponent, as an integer, `p0/q0` or a decimal.
    #[arg(long)]
    p: Option<String>,
    /// Ball radius.
    #[arg(long = "R")]
    radius: Option<String>,
    /// `full` or `positive` (default: full when p has an even numerator).
    #[arg(long)]
    quadrant: Option<String>,
    #[arg(long)]
    abs_tol: Option<String>,
    #[arg(long)]
    rel_tol: Option<String>,
    #[arg(long)]
    tail_tol: Option<String>,
    #[arg(long)]
    max_subdivisions: Option<String>,
}

impl Common {
    fn pairs(&self) -> Vec<(&'static str, Option<String>)> {
        vec![
            ("out", self.out.clone()),
            ("p", self.p.clone()),
            ("R", self.radius.clone()),
            ("quadrant", self.quadrant.clone()),
            ("abs-tol", self.abs_tol.clone()),
            ("rel-tol", self.rel_tol.clone()),
            ("tail-tol", self.tail_tol.clone()),
            ("max-subdivisions", self.max_subdivisions.clone()),
        ]
    }
}

#[derive(Args)]
struct Sampling {
    #[arg(long)]
    samples: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Stream index under the root seed.
    #[arg(long)]
    stream: Option<String>,
    /// Worker threads (default 1).
    #[arg(long)]
    threads: Option<String>,
}

impl Sampling {
    fn pairs(&self) -> Vec<(&'static str, Option<String>)> {
        vec![
            ("samples", self.samples.clone()),
            ("seed", self.seed.clone()),
            ("stream", self.stream.clone()),
            ("threads", self.threads.clone()),
        ]
    }
}

#[derive(Args)]
struct FunctionalArgs {
    /// Integrand in `x` (or `x1..xm` when m > 1).
    #[arg(long)]
    g: Option<String>,
    /// Number of time variables of the functional.
    #[arg(long)]
    m: Option<String>,
    /// Time intervals as `a:b;a:b;...`, one per variable.
    #[arg(long)]
    intervals: Option<String>,
    /// Time weight in `t` (or `t1..tm`).
    #[arg(long)]
    a: Option<String>,
    /// Manual growth certificate `C,k` or `C,k,rate` for |g| <= C(1+|x|)^k e^{rate|x|}.
    #[arg(long)]
    growth: Option<String>,
}

impl FunctionalArgs {
    fn pairs(&self) -> Vec<(&'static str, Option<String>)> {
        vec![
            ("g", self.g.clone()),
            ("m", self.m.clone()),
            ("intervals", self.intervals.clone()),
            ("a", self.a.clone()),
            ("growth", self.growth.clone()),
        ]
    }
}

#[derive(Args)]
struct DensityArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated dimensions.
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    x_min: Option<String>,
    #[arg(long)]
    x_max: Option<String>,
    #[arg(long)]
    points: Option<String>,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    sampling: Sampling,
    #[arg(long)]
    n: Option<String>,
    /// Cell widths Δt_k (comma-separated, summing to 1) for the weighted ball.
    #[arg(long)]
    weights: Option<String>,
}

#[derive(Args)]
struct AverageArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    functional: FunctionalArgs,
    /// single | multi | blocks | time-weighted | annulus | sweep (inferred when omitted).
    #[arg(long)]
    mode: Option<String>,
    /// Block scheme `(s,r);(s,r);...`.
    #[arg(long)]
    blocks: Option<String>,
    /// Inner radius of the annulus.
    #[arg(long)]
    r: Option<String>,
    /// Dimension for the reported annulus volume ratio.
    #[arg(long)]
    n: Option<String>,
    /// Increasing radii for the sweep.
    #[arg(long)]
    radii: Option<String>,
    /// Outer function in `y`; adds h(EY) to the output.
    #[arg(long)]
    h: Option<String>,
}

#[derive(Args)]
struct McArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    sampling: Sampling,
    #[command(flatten)]
    functional: FunctionalArgs,
    #[arg(long)]
    n: Option<String>,
    /// Block scheme `(s,r);(s,r);...` for the weighted discretisation.
    #[arg(long)]
    blocks: Option<String>,
    /// Inner radius; compares annulus and ball estimates.
    #[arg(long)]
    r: Option<String>,
}

#[derive(Args)]
struct ConvergeArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    sampling: Sampling,
    #[command(flatten)]
    functional: FunctionalArgs,
    /// Comma-separated increasing dimensions.
    #[arg(long)]
    n: Option<String>,
}

#[derive(Args)]
struct ExchangeArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    sampling: Sampling,
    #[command(flatten)]
    functional: FunctionalArgs,
    /// Outer function in `y`.
    #[arg(long)]
    h: Option<String>,
    #[arg(long)]
    n: Option<String>,
}

#[derive(Args)]
struct KernelArgs {
    #[command(flatten)]
    common: Common,
    /// Integrand in `x`.
    #[arg(long)]
    f: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    n0: Option<String>,
    #[arg(long)]
    growth: Option<String>,
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit code. The JSON summary goes to standard output.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with_output(args, &mut std::io::stdout().lock())
}

/// As [`run`], writing the JSON summary line to `out`.
pub fn run_with_output<I, T>(args: I, out: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code() as u8;
        }
    };
    let (name, config_path, flags) = flags_of(&cli.command);
    let mut params = match Params::resolve(config_path.as_deref(), flags) {
        Ok(p) => p,
        Err(e) => return fail(out, name, None, e),
    };
    let result = match &cli.command {
        Command::Density(_) => commands::density(&mut params),
        Command::Sample(_) => commands::sample(&mut params),
        Command::Average(_) => commands::average(&mut params),
        Command::Mc(_) => commands::mc(&mut params),
        Command::Converge(_) => commands::converge(&mut params),
        Command::Exchange(_) => commands::exchange(&mut params),
        Command::Kernel(_) => commands::kernel(&mut params),
    };
    let outcome = match result {
        Ok(o) => o,
        Err(e) => return fail(out, name, Some(&params), e),
    };
    let path = output::output_path(params.raw("out"), name);
    if let Err(e) = outcome.table.write(&path) {
        return fail(out, name, Some(&params), e);
    }
    let summary = json!({
        "command": name,
        "status": "ok",
        "csv": path.display().to_string(),
        "rows": outcome.table.len(),
        "config": params.to_json(),
        "result": outcome.summary,
    });
    if writeln!(out, "{summary}").is_err() {
        return 1;
    }
    0
}

fn flags_of(command: &Command) -> (&'static str, Option<PathBuf>, Vec<(&'static str, Option<String>)>) {
    fn join(parts: Vec<Vec<(&'static str, Option<String>)>>) -> Vec<(&'static str, Option<String>)> {
        parts.into_iter().flatten().collect()
    }
    match command {
        Command::Density(a) => (
            "density",
            a.common.config.clone(),
            join(vec![
                a.common.pairs(),
                vec![
                    ("n", a.n.clone()),
                    ("x-min", a.x_min.clone()),
                    ("x-max", a.x_max.clone()),
                    ("points", a.points.clone()),
                ],
            ]),
        ),
        Command::Sample(a) => (
            "sample",
            a.common.config.clone(),
            join(vec![
                a.common.pairs(),
                a.sampling.pairs(),
                vec![("n", a.n.clone()), ("weights", a.weights.clone())],
            ]),
        ),
        Command::Average(a) => (
            "average",
            a.common.config.clone(),
            join(vec![
                a.common.pairs(),
                a.functional.pairs(),
                vec![
                    ("mode", a.mode.clone()),
                    ("blocks", a.blocks.clone()),
                    ("r", a.r.clone()),
                    ("n", a.n.clone()),
                    ("radii", a.radii.clone()),
                    ("h", a.h.clone()),
                ],
            ]),
        ),
        Command::Mc(a) => (
            "mc",
            a.common.config.clone(),
            join(vec![
                a.common.pairs(),
                a.sampling.pairs(),
                a.functional.pairs(),
                vec![("n", a.n.clone()), ("blocks", a.blocks.clone()), ("r", a.r.clone())],
            ]),
        ),
        Command::Converge(a) => (
            "converge",
            a.common.config.clone(),
            join(vec![
                a.common.pairs(),
                a.sampling.pairs(),
                a.functional.pairs(),
                vec![("n", a.n.clone())],
            ]),
        ),
        Command::Exchange(a) => (
            "exchange",
            a.common.config.clone(),
            join(vec![
                a.common.pairs(),
                a.sampling.pairs(),
                a.functional.pairs(),
                vec![("h", a.h.clone()), ("n", a.n.clone())],
            ]),
        ),
        Command::Kernel(a) => (
            "kernel",
            a.common.config.clone(),
            join(vec![
                a.common.pairs(),
                vec![
                    ("f", a.f.clone()),
                    ("n", a.n.clone()),
                    ("n0", a.n0.clone()),
                    ("growth", a.growth.clone()),
                ],
            ]),
        ),
    }
}

fn fail(out: &mut dyn Write, command: &str, params: Option<&Params>, err: CliError) -> u8 {
    eprintln!("lpavg {command}: {err}");
    let mut summary = json!({
        "command": command,
        "status": err.kind(),
        "message": err.to_string(),
    });
    if let CliError::Accuracy { estimate, error_bound, subdivisions } = err {
        summary["best_estimate"] = json!(estimate);
        summary["error_bound"] = json!(error_bound);
        summary["subdivisions"] = json!(subdivisions);
    }
    if let Some(p) = params {
        summary["config"] = p.to_json();
    }
    let _ = writeln!(out, "{summary}");
    err.exit_code() as u8
}
