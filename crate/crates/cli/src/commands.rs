//! Subcommand bodies: build the objective, call the library, write JSON and CSV.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use minimax_lab::classifier::{classify_with, gda_stability_blocks, infinity_gda_with, Tolerances};
use minimax_lab::dynamics::{run_flow, run_gda, sample_basins, Trajectory};
use minimax_lab::mixed::{augmented_maximin, augmented_minimax, mixed_gap};
use minimax_lab::oracle::{default_lambda, max_oracle_in, moreau_envelope, rate_study, run_max_oracle_gd, PhiSpec};
use minimax_lab::problems::{catalog_entries, catalog_with_param, gradient_at, hessian_at, ExprObjective, Objective, Point};
use minimax_lab::verify::{
    boundary_candidates, certify_candidates, certify_local_minimax, check_global_not_local, evtushenko_check,
    grid_global_minimax, scan_for_local_nash, CertificateVerdict, GridSpec,
};
use minimax_lab::{export, BoxDomain64, Error};
use serde::Serialize;
use serde_json::json;

use crate::config;
use crate::{
    CatalogArgs, ClassifyArgs, Cli, Command, EvtushenkoArgs, FunctionArgs, GridArgs, MixedArgs, OracleArgs,
    SimulateArgs, VerifyCommand, VerifyGlobalArgs, VerifyPointArgs, VerifyScanArgs,
};

type Obj = Box<dyn Objective<f64>>;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Analysis(Error),
}

impl CliError {
    /// 1 for usage and input errors, 2 for failures inside an analysis.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Analysis(Error::UnknownName(_) | Error::Parse { .. }) => 1,
            CliError::Analysis(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Analysis(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Analysis(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Analysis(Error::Io(e))
    }
}

type Res<T> = std::result::Result<T, CliError>;

fn usage<T>(m: impl Into<String>) -> Res<T> {
    Err(CliError::Usage(m.into()))
}

pub fn run(cli: &Cli) -> Res<()> {
    if cli.emit_config {
        let text = match &cli.command {
            Command::Classify(a) => emit("classify", a, cli),
            Command::Simulate(a) => emit("simulate", a, cli),
            Command::Oracle(a) => emit("oracle", a, cli),
            Command::Verify(v) => match v {
                VerifyCommand::GlobalVsLocal(a) => emit("verify global-vs-local", a, cli),
                VerifyCommand::Certify(a) => emit("verify certify", a, cli),
                VerifyCommand::BoundaryScan(a) => emit("verify boundary-scan", a, cli),
                VerifyCommand::Evtushenko(a) => emit("verify evtushenko", a, cli),
                VerifyCommand::ScanNash(a) => emit("verify scan-nash", a, cli),
                VerifyCommand::Global(a) => emit("verify global", a, cli),
            },
            Command::Mixed(a) => emit("mixed", a, cli),
            Command::Catalog(a) => emit("catalog", a, cli),
        };
        print!("{text}");
        return Ok(());
    }
    let out = Output { dir: cli.out.as_deref() };
    match &cli.command {
        Command::Classify(a) => classify(a, &out),
        Command::Simulate(a) => simulate(a, &out),
        Command::Oracle(a) => oracle(a, &out),
        Command::Verify(v) => match v {
            VerifyCommand::GlobalVsLocal(a) => verify_global_vs_local(a, &out),
            VerifyCommand::Certify(a) => verify_certify(a, &out),
            VerifyCommand::BoundaryScan(a) => verify_boundary(a, &out),
            VerifyCommand::Evtushenko(a) => verify_evtushenko(a, &out),
            VerifyCommand::ScanNash(a) => verify_scan(a, &out, false),
            VerifyCommand::Global(a) => verify_scan(a, &out, true),
        },
        Command::Mixed(a) => mixed(a, &out),
        Command::Catalog(a) => catalog(a, &out),
    }
}

/// Config text for `args`, plus the output directory when one was given.
fn emit<S: Serialize>(sub: &str, args: &S, cli: &Cli) -> String {
    let mut text = config::emit(&format!("minimax-lab {sub}"), args);
    if let Some(dir) = &cli.out {
        text.push_str(&format!("out = {}\n", dir.display()));
    }
    text
}

/// One writer for everything a command produces.
struct Output<'a> {
    dir: Option<&'a Path>,
}

impl Output<'_> {
    fn json<B: Serialize>(&self, kind: &str, body: &B) -> Res<()> {
        let text = export::to_json(kind, body)?;
        match self.dir {
            Some(d) => {
                fs::create_dir_all(d)?;
                fs::write(d.join(format!("{kind}.json")), text)?;
            }
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout.write_all(text.as_bytes())?;
                stdout.flush()?;
            }
        }
        Ok(())
    }

    /// CSV files are only written when an output directory is set.
    fn csv(&self, name: &str, write: impl FnOnce(fs::File) -> minimax_lab::Result<()>) -> Res<()> {
        if let Some(d) = self.dir {
            fs::create_dir_all(d)?;
            write(fs::File::create(d.join(name))?)?;
        }
        Ok(())
    }
}

fn intervals(v: &[f64], what: &str) -> Res<BoxDomain64> {
    if v.is_empty() || !v.len().is_multiple_of(2) {
        return usage(format!("{what} needs pairs l1,u1,l2,u2,... (got {} numbers)", v.len()));
    }
    let pairs: Vec<(f64, f64)> = v.chunks(2).map(|c| (c[0], c[1])).collect();
    if let Some((l, u)) = pairs.iter().find(|(l, u)| !(l <= u)) {
        return usage(format!("{what} has an empty interval [{l}, {u}]"));
    }
    Ok(BoxDomain64::from_intervals(&pairs))
}

fn objective(a: &FunctionArgs) -> Res<Obj> {
    match (&a.name, &a.expr) {
        (Some(name), None) => {
            if a.domain.is_some() {
                return usage("--domain applies to --expr only");
            }
            Ok(catalog_with_param::<f64>(name, a.param.unwrap_or(1.0))?)
        }
        (None, Some(src)) => {
            let e = ExprObjective::<f64>::parse(src)?;
            match &a.domain {
                Some(d) => Ok(Box::new(e.with_domain(intervals(d, "--domain")?)?)),
                None => Ok(Box::new(e)),
            }
        }
        (None, None) => usage("one of --fn or --expr is required"),
        (Some(_), Some(_)) => usage("--fn and --expr are mutually exclusive"),
    }
}

fn stacked_point(f: &dyn Objective<f64>, z: &[f64], flag: &str) -> Res<Point<f64>> {
    let n = f.dim_x() + f.dim_y();
    if z.len() != n {
        return usage(format!("{flag} needs {n} coordinates for {}, got {}", f.name(), z.len()));
    }
    Ok(Point::from_stacked(z, f.dim_x()))
}

fn grid(f: &dyn Objective<f64>, g: &GridArgs) -> Res<GridSpec<f64>> {
    match &g.bounds {
        Some(b) => {
            let b = intervals(b, "--box")?;
            if b.dim() != f.dim_x() + f.dim_y() {
                return usage(format!("--box needs {} intervals", f.dim_x() + f.dim_y()));
            }
            Ok(GridSpec::new(b, g.resolution)?)
        }
        None => Ok(GridSpec::new(clipped_domain(f), g.resolution)?),
    }
}

/// Half-width used for unbounded domain axes when no `--box` is given.
pub const DEFAULT_GRID_HALF_WIDTH: f64 = 3.0;

fn clipped_domain(f: &dyn Objective<f64>) -> BoxDomain64 {
    let mut d = f.domain();
    for k in 0..d.dim() {
        if !d.lower[k].is_finite() {
            d.lower[k] = -DEFAULT_GRID_HALF_WIDTH;
        }
        if !d.upper[k].is_finite() {
            d.upper[k] = DEFAULT_GRID_HALF_WIDTH;
        }
    }
    d
}

fn classify(a: &ClassifyArgs, out: &Output) -> Res<()> {
    let f = objective(&a.function)?;
    let p = stacked_point(f.as_ref(), &a.point, "--point")?;
    let tol = Tolerances {
        station: a.tol_station,
        strict: a.tol_strict,
        sing: a.tol_sing,
    };
    let classification = classify_with(f.as_ref(), &p, &tol)?;
    let h = hessian_at(f.as_ref(), &p)?;
    let stability = gda_stability_blocks(&h, a.gamma, a.tol_strict)?;
    let grad = gradient_at(f.as_ref(), &p)?;
    let infinity = if grad.norm() <= tol.station {
        Some(infinity_gda_with(f.as_ref(), &p, &a.gamma_ladder, &tol)?)
    } else {
        None
    };
    out.json(
        "classify",
        &json!({
            "function": f.name(),
            "point": p,
            "tolerances": tol,
            "classification": classification,
            "gamma": a.gamma,
            "stability": stability,
            "infinityGda": infinity,
        }),
    )
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct TrajectorySummary<'a> {
    mode: &'a minimax_lab::dynamics::Mode,
    step_size: f64,
    gamma: f64,
    steps: usize,
    limit_class: &'static str,
    limit: &'a minimax_lab::dynamics::Limit<f64>,
    last: Option<&'a Point<f64>>,
    warnings: &'a [String],
}

fn summary(t: &Trajectory<f64>) -> TrajectorySummary<'_> {
    TrajectorySummary {
        mode: &t.mode,
        step_size: t.step_size,
        gamma: t.gamma,
        steps: t.points.len().saturating_sub(1),
        limit_class: t.limit.class(),
        limit: &t.limit,
        last: t.points.last(),
        warnings: &t.warnings,
    }
}

fn simulate(a: &SimulateArgs, out: &Output) -> Res<()> {
    let f = objective(&a.function)?;
    if a.basins {
        let Some(region) = &a.region else {
            return usage("--basins needs --region");
        };
        let region = intervals(region, "--region")?;
        let sample = sample_basins(f.as_ref(), &region, a.n, a.eta, a.gamma, a.steps, a.seed)?;
        return out.json(
            "basins",
            &json!({
                "function": f.name(),
                "eta": a.eta,
                "gamma": a.gamma,
                "n": a.n,
                "seed": a.seed,
                "region": region,
                "tally": sample.tally,
                "inits": sample.inits,
                "limits": sample.limits,
            }),
        );
    }
    let Some(init) = &a.init else {
        return usage("simulate needs --init or --basins");
    };
    let p0 = stacked_point(f.as_ref(), init, "--init")?;
    let traj = if a.flow {
        run_flow(f.as_ref(), &p0, a.gamma, a.horizon, a.dt)?
    } else {
        run_gda(f.as_ref(), &p0, a.eta, a.gamma, a.steps)?
    };
    out.csv("trajectory.csv", |file| export::write_trajectory_csv(file, f.as_ref(), &traj))?;
    out.json(
        "simulate",
        &json!({
            "function": f.name(),
            "init": p0,
            "trajectory": summary(&traj),
        }),
    )
}

/// Points per axis for the x-grid behind the envelope-gap estimate.
const GAP_GRID_POINTS: usize = 4096;

/// `φ_λ(x0) − min φ` with `min φ` replaced by the smallest value seen on an
/// x-grid and along the iterates. The estimate never exceeds the true gap,
/// so the bound it feeds is conservative.
fn estimate_envelope_gap(phi: &PhiSpec<'_, f64>, x0: &[f64], iterate_min: f64, eps: f64) -> Res<f64> {
    let f = phi.f;
    let lambda = default_lambda(f)?;
    let at_x0 = moreau_envelope(phi, x0, lambda)?.envelope_value;
    let mut best = iterate_min;
    let xbox = f.x_box();
    if xbox.is_bounded() {
        let d = f.dim_x();
        let per_axis = ((GAP_GRID_POINTS as f64).powf(1.0 / d as f64).floor() as usize).max(2);
        let grid = GridSpec::new(xbox, per_axis)?;
        for x in grid.points(0..d) {
            best = best.min(max_oracle_in(f, &x, &phi.y_box, eps, &phi.oracle)?.value);
        }
    }
    Ok((at_x0 - best).max(0.0))
}

fn oracle(a: &OracleArgs, out: &Output) -> Res<()> {
    let f = objective(&a.function)?;
    let phi = PhiSpec::new(f.as_ref())?;
    let x0 = match &a.x0 {
        Some(x) if x.len() != f.dim_x() => return usage(format!("--x0 needs {} coordinates", f.dim_x())),
        Some(x) => x.clone(),
        None => vec![1.0; f.dim_x()],
    };
    if a.seeds == 0 {
        return usage("--seeds must be at least 1");
    }
    let run = run_max_oracle_gd(&phi, &x0, a.t, a.eps, a.gamma_param, 0)?;
    let iterate_min = run.iterates.iter().map(|it| it.phi).fold(f64::INFINITY, f64::min);
    let (gap, estimated) = match a.envelope_gap {
        Some(g) => (g, false),
        None => (estimate_envelope_gap(&phi, &x0, iterate_min, a.eps)?, true),
    };
    let budgets = a.budgets.clone().unwrap_or_else(|| vec![a.t]);
    let study = rate_study(&phi, &x0, &budgets, a.eps, a.gamma_param, a.seeds, gap)?;
    out.csv("oracle.csv", |file| export::write_oracle_csv(file, &run))?;
    out.json(
        "oracle",
        &json!({
            "function": f.name(),
            "x0": x0,
            "params": run.params,
            "envelopeGap": gap,
            "envelopeGapEstimated": estimated,
            "seeds": a.seeds,
            "rate": study,
            "run": {
                "chosenIndex": run.chosen_index,
                "xBar": run.x_bar,
                "moreau": run.moreau,
            },
        }),
    )
}

fn verdict_name(v: &CertificateVerdict<f64>) -> &'static str {
    match v {
        CertificateVerdict::ConsistentWithLocalMinimax => "ConsistentWithLocalMinimax",
        CertificateVerdict::RefutedAtDelta { .. } => "RefutedAtDelta",
        CertificateVerdict::Inconclusive => "Inconclusive",
    }
}

fn verify_global_vs_local(a: &VerifyGlobalArgs, out: &Output) -> Res<()> {
    let f = objective(&a.function)?;
    let g = grid(f.as_ref(), &a.grid)?;
    let report = check_global_not_local(f.as_ref(), &g, &a.ladder.ladder)?;
    let tau = f.lipschitz().gradient.map(|_| report.global.tau_grid);
    let nonstationary = report
        .points
        .iter()
        .filter(|r| r.gradient_norm > minimax_lab::classifier::DEFAULT_STATION_TOLERANCE)
        .count();
    let certified = report.points.iter().filter(|r| r.certificate.is_consistent()).count();
    out.json(
        "global-vs-local",
        &json!({
            "function": f.name(),
            "grid": g,
            "tauGrid": tau,
            "globalPoints": report.points.len(),
            "nonstationary": nonstationary,
            "consistentWithLocalMinimax": certified,
            "report": report,
        }),
    )
}

fn verify_certify(a: &VerifyPointArgs, out: &Output) -> Res<()> {
    let f = objective(&a.function)?;
    let g = grid(f.as_ref(), &a.grid)?;
    let p = stacked_point(f.as_ref(), &a.point, "--point")?;
    let cert = certify_local_minimax(f.as_ref(), &p, &g, &a.ladder.ladder)?;
    out.json(
        "certify",
        &json!({ "function": f.name(), "grid": g, "verdict": verdict_name(&cert.verdict), "certificate": cert }),
    )
}

fn verify_boundary(a: &VerifyGlobalArgs, out: &Output) -> Res<()> {
    let f = objective(&a.function)?;
    let g = grid(f.as_ref(), &a.grid)?;
    let candidates = boundary_candidates(f.as_ref(), &g);
    let certs = certify_candidates(f.as_ref(), &g, &candidates, &a.ladder.ladder)?;
    let count = |name: &str| certs.iter().filter(|c| verdict_name(&c.verdict) == name).count();
    out.json(
        "boundary-scan",
        &json!({
            "function": f.name(),
            "grid": g,
            "candidates": certs.len(),
            "consistent": count("ConsistentWithLocalMinimax"),
            "refuted": count("RefutedAtDelta"),
            "inconclusive": count("Inconclusive"),
            "certificates": certs,
        }),
    )
}

fn verify_evtushenko(a: &EvtushenkoArgs, out: &Output) -> Res<()> {
    let f = objective(&a.function)?;
    let p = stacked_point(f.as_ref(), &a.point, "--point")?;
    let window = match &a.window {
        Some(w) => intervals(w, "--window")?,
        None => f.domain(),
    };
    if !window.is_bounded() {
        return usage("evtushenko needs a bounded --window");
    }
    let report = evtushenko_check(f.as_ref(), &p, &window, a.resolution)?;
    out.json(
        "evtushenko",
        &json!({ "function": f.name(), "point": p, "window": window, "report": report }),
    )
}

fn verify_scan(a: &VerifyScanArgs, out: &Output, global_only: bool) -> Res<()> {
    let f = objective(&a.function)?;
    let g = grid(f.as_ref(), &a.grid)?;
    if global_only {
        let global = grid_global_minimax(f.as_ref(), &g)?;
        return out.json("global", &json!({ "function": f.name(), "grid": g, "global": global }));
    }
    let scan = scan_for_local_nash(f.as_ref(), &g)?;
    let nash = scan.stationary.iter().filter(|(_, c)| c.is_strict_nash()).count();
    out.json(
        "scan-nash",
        &json!({ "function": f.name(), "grid": g, "strictNash": nash, "scan": scan }),
    )
}

fn mixed(a: &MixedArgs, out: &Output) -> Res<()> {
    let f = objective(&a.function)?;
    let g = grid(
        f.as_ref(),
        &GridArgs {
            resolution: a.resolution,
            bounds: a.bounds.clone(),
        },
    )?;
    let minimax = augmented_minimax(f.as_ref(), a.atoms, &g, a.restarts, a.seed)?;
    let maximin = augmented_maximin(f.as_ref(), a.atoms, &g, a.restarts, a.seed)?;
    let gap = mixed_gap(f.as_ref(), &minimax.strategy, &maximin.strategy, &g)?;
    out.json(
        "mixed",
        &json!({
            "function": f.name(),
            "N": a.atoms,
            "grid": g,
            "minimax": minimax,
            "maximin": maximin,
            "gap": gap,
        }),
    )
}

fn catalog(_: &CatalogArgs, out: &Output) -> Res<()> {
    out.json("catalog", &json!({ "entries": catalog_entries() }))
}
