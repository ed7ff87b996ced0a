//! Subcommand runners. Each resolves its parameters, computes a table and
//! returns it with a JSON summary.

use lpavg_core::averages::{
    annulus_average, average_blocks, average_functional, average_multivariate,
    average_subinterval, average_time_weighted, whole_space_sweep, BlockScheme, Functional,
    FunctionalSpec, Interval, SweepCriteria, TimeWeight,
};
use lpavg_core::densities::{coordinate_density_finite, coordinate_density_limit};
use lpavg_core::expr::{parse, Expr};
use lpavg_core::mc::{
    kernel_limit_report, mc_annulus, mc_block_scheme, mc_exchange_gap, mc_functional_average,
    mc_variance_decay, MonteCarlo,
};
use lpavg_core::quadrature::{GrowthBound, QuadratureSettings};
use lpavg_core::sampler::{BallSampler, SeedSpec, WeightedBallSampler};
use lpavg_core::{BallSpec, PExponent, Quadrant};
use serde_json::{json, Value};

use crate::config::Params;
use crate::error::CliError;
use crate::output::{Cell, Table};

pub struct Outcome {
    pub table: Table,
    pub summary: Value,
}

type Run = Result<Outcome, CliError>;

// ---------------------------------------------------------------------------
// Shared parameter readers

fn ball(params: &mut Params) -> Result<BallSpec, CliError> {
    let p: PExponent = params.get_or("p", "2")?;
    let radius: f64 = params.get_or("R", "1")?;
    let quadrant: Quadrant = params.get_or("quadrant", p.natural_quadrant().as_str())?;
    Ok(BallSpec::new(p, radius, quadrant)?)
}

fn settings(params: &mut Params) -> Result<QuadratureSettings, CliError> {
    let d = QuadratureSettings::default();
    let s = QuadratureSettings {
        abs_tol: params.get_or("abs-tol", &format!("{:?}", d.abs_tol))?,
        rel_tol: params.get_or("rel-tol", &format!("{:?}", d.rel_tol))?,
        tail_cutoff_tol: params.get_or("tail-tol", &format!("{:?}", d.tail_cutoff_tol))?,
        max_subdivisions: params.get_or("max-subdivisions", &d.max_subdivisions.to_string())?,
        ..d
    };
    s.validate()?;
    Ok(s)
}

fn monte_carlo(params: &mut Params, default_samples: &str) -> Result<MonteCarlo, CliError> {
    let samples: usize = params.get_or("samples", default_samples)?;
    let seed: u64 = params.get_or("seed", "0")?;
    let stream: u64 = params.get_or("stream", "0")?;
    let threads: usize = params.get_or("threads", "1")?;
    if threads == 0 {
        return Err(CliError::Config("threads must be at least 1".into()));
    }
    Ok(MonteCarlo::new(samples, SeedSpec::new(seed, stream)).with_threads(threads))
}

fn var_names(prefix: &str, m: usize) -> Vec<String> {
    if m == 1 {
        vec![prefix.to_string()]
    } else {
        (1..=m).map(|i| format!("{prefix}{i}")).collect()
    }
}

fn parse_expr(params: &Params, key: &str, vars: &[String]) -> Result<Expr, CliError> {
    let source: String = params.get(key)?;
    let names: Vec<&str> = vars.iter().map(String::as_str).collect();
    parse(&source, &names).map_err(|e| CliError::Config(format!("in `{key}`: {e}")))
}

fn growth_override(params: &Params) -> Result<Option<GrowthBound>, CliError> {
    let Some(raw) = params.raw("growth") else {
        return Ok(None);
    };
    let parts: Vec<f64> = params.list("growth")?;
    match parts[..] {
        [c, k] => Ok(Some(GrowthBound::polynomial(c, k))),
        [c, k, rate] => Ok(Some(GrowthBound::exponential(c, k, rate))),
        _ => Err(CliError::Config(format!("growth `{raw}` should be C,k or C,k,rate"))),
    }
}

fn functional_from(params: &Params, key: &str, vars: &[String]) -> Result<Functional, CliError> {
    let e = parse_expr(params, key, vars)?;
    Ok(match growth_override(params)? {
        Some(g) => Functional::from_expr_with_growth(&e, g)?,
        None => Functional::from_expr(&e)?,
    })
}

fn intervals(params: &Params) -> Result<Option<Vec<Interval>>, CliError> {
    let Some(raw) = params.raw("intervals") else {
        return Ok(None);
    };
    raw.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<Interval>().map_err(CliError::from))
        .collect::<Result<Vec<_>, _>>()
        .map(Some)
}

fn functional_spec(params: &mut Params) -> Result<FunctionalSpec, CliError> {
    let given = intervals(params)?;
    let default_m = given.as_ref().map_or(1, Vec::len).to_string();
    let m: usize = params.get_or("m", &default_m)?;
    if m == 0 {
        return Err(CliError::Config("m must be at least 1".into()));
    }
    let g = functional_from(params, "g", &var_names("x", m))?;
    let ivs = given.unwrap_or_else(|| vec![Interval::unit(); m]);
    let weight = if params.has("a") {
        Some(TimeWeight::from_expr(&parse_expr(params, "a", &var_names("t", m))?))
    } else {
        None
    };
    Ok(FunctionalSpec::new(g, ivs, weight)?)
}

fn outer_function(params: &Params) -> Result<impl Fn(f64) -> f64 + Sync, CliError> {
    let h = parse_expr(params, "h", &["y".to_string()])?;
    Ok(move |y: f64| h.eval_or_nan(&[y]))
}

// ---------------------------------------------------------------------------

pub fn density(params: &mut Params) -> Run {
    let spec = ball(params)?;
    let ns: Vec<usize> = params.list_or("n", "100,1000,10000")?;
    let r = spec.radius;
    let lo_default = if spec.is_full() { -4.0 * r } else { 0.0 };
    let x_min: f64 = params.get_or("x-min", &format!("{lo_default:?}"))?;
    let x_max: f64 = params.get_or("x-max", &format!("{:?}", 4.0 * r))?;
    let points: usize = params.get_or("points", "101")?;
    if points < 2 || x_max <= x_min {
        return Err(CliError::Config("need points >= 2 and x-max > x-min".into()));
    }
    let mut table = Table::new(&["x", "n", "rho_n", "rho_limit", "abs_diff"]);
    let mut sup = Vec::new();
    for &n in &ns {
        let mut worst: f64 = 0.0;
        for i in 0..points {
            let x = x_min + (x_max - x_min) * i as f64 / (points - 1) as f64;
            let finite = coordinate_density_finite(x, n, &spec)?;
            let limit = coordinate_density_limit(x, &spec);
            let diff = (finite - limit).abs();
            worst = worst.max(diff);
            table.push(vec![x.into(), n.into(), finite.into(), limit.into(), diff.into()]);
        }
        sup.push(json!({"n": n, "sup_abs_diff": worst}));
    }
    Ok(Outcome { table, summary: json!({ "sup_gaps": sup }) })
}

pub fn sample(params: &mut Params) -> Run {
    let spec = ball(params)?;
    let mc = monte_carlo(params, "10")?;
    let mut table = Table::new(&["sample", "k", "value"]);
    let mut rng = mc.seed.stream();
    let (n, draw): (usize, Box<dyn FnMut() -> Vec<f64>>) = if params.has("weights") {
        let weights: Vec<f64> = params.list("weights")?;
        let sampler = WeightedBallSampler::new(spec, &weights)?;
        (weights.len(), Box::new(move || sampler.sample(&mut rng).coords))
    } else {
        let n: usize = params.get_or("n", "8")?;
        let sampler = BallSampler::new(n, spec)?;
        (n, Box::new(move || sampler.sample(&mut rng).coords))
    };
    let mut draw = draw;
    for s in 0..mc.samples {
        for (k, v) in draw().into_iter().enumerate() {
            table.push(vec![s.into(), (k + 1).into(), v.into()]);
        }
    }
    Ok(Outcome { table, summary: json!({ "n": n, "samples": mc.samples }) })
}

fn infer_mode(params: &Params) -> &'static str {
    if params.has("blocks") {
        "blocks"
    } else if params.has("radii") {
        "sweep"
    } else if params.has("r") {
        "annulus"
    } else if params.has("a") {
        "time-weighted"
    } else if params.raw("m").is_some_and(|m| m.trim() != "1")
        || params.raw("intervals").is_some_and(|s| s.contains(';'))
    {
        "multi"
    } else {
        "single"
    }
}

pub fn average(params: &mut Params) -> Run {
    let spec = ball(params)?;
    let s = settings(params)?;
    let mode: String = params.get_or("mode", infer_mode(params))?;
    let mut table = Table::new(&["quantity", "value", "abs_error"]);
    let mut summary = json!({ "mode": mode });
    let ey = match mode.as_str() {
        "single" => {
            let g = functional_from(params, "g", &var_names("x", 1))?;
            let iv = match intervals(params)? {
                None => Interval::unit(),
                Some(v) if v.len() == 1 => v[0],
                Some(_) => return Err(CliError::Config("single mode takes one interval".into())),
            };
            average_subinterval(&g, iv, &spec, &s)?
        }
        "multi" => {
            let f = functional_spec(params)?;
            average_multivariate(&f.functional, &f.intervals, &spec, &s)?
        }
        "time-weighted" => {
            let f = functional_spec(params)?;
            match &f.time_weight {
                Some(a) if f.intervals.iter().all(|i| *i == Interval::unit()) => {
                    average_time_weighted(a, &f.functional, &spec, &s)?
                }
                Some(_) => average_functional(&f, &spec, &s)?,
                None => return Err(CliError::Config("time-weighted mode needs `a`".into())),
            }
        }
        "blocks" => {
            let g = functional_from(params, "g", &var_names("x", 1))?;
            let scheme: BlockScheme = params.get("blocks")?;
            let uniform = average_blocks(&g, &BlockScheme::uniform(), &spec, &s)?;
            let est = average_blocks(&g, &scheme, &spec, &s)?;
            table.push(vec!["EY_uniform".into(), uniform.value.into(), uniform.abs_error.into()]);
            summary["uniform_value"] = json!(uniform.value);
            est
        }
        "annulus" => {
            let g = functional_from(params, "g", &var_names("x", 1))?;
            let r: f64 = params.get("r")?;
            let n: usize = params.get_or("n", "200")?;
            let ann = annulus_average(&g, r, &spec, n, &s)?;
            table.push(vec!["volume_ratio".into(), ann.volume_ratio.into(), 0.0.into()]);
            summary["volume_ratio"] = json!(ann.volume_ratio);
            ann.value
        }
        "sweep" => return sweep(params, spec, &s),
        other => {
            return Err(CliError::Config(format!(
                "unknown mode `{other}` (single, multi, blocks, time-weighted, annulus, sweep)"
            )))
        }
    };
    table.push(vec!["EY".into(), ey.value.into(), ey.abs_error.into()]);
    table.push(vec!["DY".into(), 0.0.into(), 0.0.into()]);
    summary["value"] = json!(ey.value);
    summary["abs_error"] = json!(ey.abs_error);
    summary["stochastic"] = json!(ey.stochastic);
    if params.has("h") {
        let h = outer_function(params)?;
        let hv = h(ey.value);
        table.push(vec!["h_EY".into(), hv.into(), Cell::Float(f64::NAN)]);
        summary["h_EY"] = json!(hv);
    }
    Ok(Outcome { table, summary })
}

fn sweep(params: &mut Params, spec: BallSpec, s: &QuadratureSettings) -> Run {
    let g = functional_from(params, "g", &var_names("x", 1))?;
    let radii: Vec<f64> = params.list_or("radii", "1,2,4,8")?;
    let result = whole_space_sweep(&g, &spec, &radii, &SweepCriteria::default(), s)?;
    let mut table = Table::new(&["R", "EY", "increment"]);
    let mut prev = f64::NAN;
    for (r, est) in &result.points {
        table.push(vec![(*r).into(), est.value.into(), (est.value - prev).into()]);
        prev = est.value;
    }
    let values: Vec<f64> = result.points.iter().map(|p| p.1.value).collect();
    Ok(Outcome {
        table,
        summary: json!({ "mode": "sweep", "verdict": result.verdict.as_str(), "values": values }),
    })
}

pub fn mc(params: &mut Params) -> Run {
    let spec = ball(params)?;
    let s = settings(params)?;
    let run = monte_carlo(params, "10000")?;
    let n: usize = params.get_or("n", "256")?;
    let mut table = Table::new(&["n", "samples", "mean", "var_Yn", "stderr", "closed_form", "gap"]);
    let row = |est: &lpavg_core::mc::MCEstimate, closed: f64| -> Vec<Cell> {
        vec![
            est.n.into(),
            est.samples.into(),
            est.mean.into(),
            est.variance.into(),
            est.stderr.into(),
            closed.into(),
            (est.mean - closed).abs().into(),
        ]
    };
    if params.has("blocks") {
        let g = functional_from(params, "g", &var_names("x", 1))?;
        let scheme: BlockScheme = params.get("blocks")?;
        let closed = average_blocks(&g, &scheme, &spec, &s)?.value;
        let est = mc_block_scheme(&g, &scheme, n, &spec, &run)?;
        table.push(row(&est, closed));
        return Ok(Outcome { table, summary: mc_summary(&est, closed) });
    }
    let f = functional_spec(params)?;
    let closed = average_functional(&f, &spec, &s)?.value;
    if params.has("r") {
        let r: f64 = params.get("r")?;
        let rep = mc_annulus(&f, r, &spec, n, &run)?;
        table.push(row(&rep.annulus, closed));
        table.push(row(&rep.ball, closed));
        let mut summary = mc_summary(&rep.annulus, closed);
        summary["rows"] = json!(["annulus", "ball"]);
        summary["ball_mean"] = json!(rep.ball.mean);
        summary["ball_stderr"] = json!(rep.ball.stderr);
        summary["volume_ratio"] = json!(rep.volume_ratio);
        summary["rejections"] = json!(rep.rejections);
        return Ok(Outcome { table, summary });
    }
    let est = mc_functional_average(&f, n, &spec, &run)?;
    table.push(row(&est, closed));
    Ok(Outcome { table, summary: mc_summary(&est, closed) })
}

fn mc_summary(est: &lpavg_core::mc::MCEstimate, closed: f64) -> Value {
    json!({
        "n": est.n,
        "samples": est.samples,
        "mean": est.mean,
        "var_Yn": est.variance,
        "stderr": est.stderr,
        "closed_form": closed,
        "z": est.z_score(closed),
    })
}

pub fn converge(params: &mut Params) -> Run {
    let spec = ball(params)?;
    let s = settings(params)?;
    let run = monte_carlo(params, "10000")?;
    let ns: Vec<usize> = params.list_or("n", "100,200,400")?;
    let f = functional_spec(params)?;
    let rec = mc_variance_decay(&f, &ns, &spec, &run, &s)?;
    let mut table = Table::new(&["n", "mean", "var_Yn", "stderr", "closed_form", "gap"]);
    for (n, est) in &rec.entries {
        table.push(vec![
            (*n).into(),
            est.mean.into(),
            est.variance.into(),
            est.stderr.into(),
            rec.target.into(),
            (est.mean - rec.target).abs().into(),
        ]);
    }
    Ok(Outcome {
        table,
        summary: json!({ "closed_form": rec.target, "decay_exponent": rec.decay_exponent }),
    })
}

pub fn exchange(params: &mut Params) -> Run {
    let spec = ball(params)?;
    let s = settings(params)?;
    let run = monte_carlo(params, "10000")?;
    let ns: Vec<usize> = params.list_or("n", "25,100,400")?;
    let f = functional_spec(params)?;
    let h = outer_function(params)?;
    let rows = mc_exchange_gap(h, &f, &ns, &spec, &run, &s)?;
    let mut table = Table::new(&["n", "mean_hY", "stderr", "h_EY", "gap"]);
    for r in &rows {
        table.push(vec![r.n.into(), r.mean_h.into(), r.stderr.into(), r.h_of_mean.into(), r.gap.into()]);
    }
    let gaps: Vec<f64> = rows.iter().map(|r| r.gap).collect();
    Ok(Outcome {
        table,
        summary: json!({ "h_EY": rows.first().map(|r| r.h_of_mean), "gaps": gaps }),
    })
}

pub fn kernel(params: &mut Params) -> Run {
    let s = settings(params)?;
    let p: PExponent = params.get_or("p", "2")?;
    let ns: Vec<u64> = params.list_or("n", "10,100,1000")?;
    let n0: i64 = params.get_or("n0", "0")?;
    let _: String = params.get_or("f", "1")?;
    let f = functional_from(params, "f", &var_names("x", 1))?;
    let rows = kernel_limit_report(|x| f.eval(&[x]), f.growth(), p, n0, &ns, &s)?;
    let mut table = Table::new(&["n", "kernel", "limit", "gap"]);
    for r in &rows {
        table.push(vec![r.n.into(), r.kernel.into(), r.limit.into(), r.gap.into()]);
    }
    let monotone = rows.windows(2).all(|w| w[1].gap < w[0].gap);
    Ok(Outcome {
        table,
        summary: json!({
            "limit": rows.first().map(|r| r.limit),
            "gaps_decreasing": monotone,
        }),
    })
}
