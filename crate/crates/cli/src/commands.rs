//! One function per subcommand. Each returns a [`Report`] and writes its
//! artifacts through an [`OutDir`].

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::path::Path;
use std::time::Instant;

use lclt_core::groups::{covolume, RealInterval, RealSet};
use lclt_core::montecarlo::{
    band_set, estimate_correlation, estimate_lclt, estimate_mlclt, HistogramSpec, McConfig, MlcltTarget, ProductSet, Window,
};
use lclt_core::predict::{mixing_classify, predict, snap_to_lattice, FlowMLCLTParams, Marginal, MixingClass, PredictionRequest};
use lclt_core::renewal_exact::{counterexample_scan, dp_distribution, extrapolate_inv_sqrt, StartMode};
use lclt_core::spectral::{eigen_curve, expansion_fit, fit_grid, infer_group_1d, unit_modulus_scan, Components, TwistedOperatorModel};
use lclt_core::systems::spec::SystemSpec;
use lclt_core::{CaseLabel, QuadScalar};
use serde_json::json;

use crate::artifacts::{gnuplot_script, num, Manifest, OutDir, Report, Table, RUN_INFO};
use crate::error::CliError;
use crate::system::{
    flow_sigma, format_line_group, generator_group, load_classify_input, load_system, parse_time, system_case, system_group,
    system_hash, system_roof_group, with_system, ClassifyInput,
};
use crate::{
    ClassifyArgs, Command, ComponentArg, CorrelateArgs, PredictArgs, RenewalArgs, RunConfig, SimulateArgs, SpectralArgs,
    VerifyArgs,
};

/// Monte Carlo comparisons use k standard errors plus a relative bias
/// allowance, both multiplied by the tolerance scale.
const SE_BAND: f64 = 3.0;
const BIAS_ALLOWANCE: f64 = 0.10;

pub struct Outcome {
    pub report: Report,
    /// Set when a verification row failed.
    pub failure: Option<String>,
}

fn ok(report: Report) -> Outcome {
    Outcome { report, failure: None }
}

pub fn execute(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let mut dir = OutDir::create(out)?;
    let started = Instant::now();
    let outcome = match &cfg.command {
        Command::Classify(a) => ok(classify(a)?),
        Command::Predict(a) => ok(predict_cmd(cfg, a)?),
        Command::Verify(a) => verify(cfg, a, &mut dir)?,
        Command::Simulate(a) => ok(simulate(cfg, a, &mut dir)?),
        Command::Spectral(a) => ok(spectral(a, &mut dir)?),
        Command::Renewal(a) => ok(renewal(a, &mut dir)?),
        Command::Correlate(a) => ok(correlate(cfg, a, &mut dir)?),
        Command::Replay(_) => unreachable!("replay is dispatched separately"),
    };
    if let Some(spec) = spec_of(&cfg.command) {
        let sys = load_system(spec)?;
        let info = json!({
            "seed": cfg.global.seed,
            "system_hash": system_hash(&sys),
            "git_describe": env!("LCLT_GIT_DESCRIBE"),
            "wall_time_s": started.elapsed().as_secs_f64(),
        });
        dir.write_unrecorded(RUN_INFO, &(serde_json::to_string_pretty(&info).expect("json") + "\n"))?;
    }
    dir.write(Report::file_name(cfg.global.format), &outcome.report.render(cfg.global.format))?;
    dir.finish(cfg)?;
    Ok(outcome)
}

/// Spec path of the Monte Carlo commands, which also get a run-info file.
fn spec_of(cmd: &Command) -> Option<&Path> {
    match cmd {
        Command::Verify(a) => Some(&a.spec),
        Command::Simulate(a) => Some(&a.spec),
        Command::Correlate(a) => Some(&a.spec),
        _ => None,
    }
}

fn mc_config(cfg: &RunConfig, n: u64) -> McConfig {
    McConfig::new(n, cfg.global.seed).workers(cfg.global.workers)
}

fn mixing_words(c: MixingClass) -> (&'static str, &'static str) {
    match c {
        MixingClass::Mixing => ("yes", "mixing"),
        MixingClass::NotWeaklyMixing => ("no", "not weakly mixing"),
    }
}

pub fn classify(a: &ClassifyArgs) -> Result<Report, CliError> {
    let input = load_classify_input(&a.spec)?;
    let (case, group) = if a.full_support {
        (CaseLabel::A, None)
    } else {
        let g = match &input {
            ClassifyInput::System(s) => system_group(s)?,
            ClassifyInput::Generators { gens, shift } => generator_group(gens, shift)?,
        };
        (lclt_core::classify_case(&g)?, Some(g))
    };
    let mixing = match &input {
        ClassifyInput::System(_) if a.full_support => Some(MixingClass::Mixing),
        ClassifyInput::System(s) => Some(mixing_classify(&system_roof_group(s)?)),
        ClassifyInput::Generators { .. } => None,
    };
    let cov = covolume(&case).ok();
    let line = match (&case, mixing) {
        (CaseLabel::Degenerate(_), Some(m)) => format!("{case} / {}", mixing_words(m).1),
        (CaseLabel::Degenerate(_), None) => case.to_string(),
        (_, m) => {
            let mut s = case.to_string();
            if let Some(c) = &cov {
                s += &format!(", covolume {c}");
            }
            if let Some(m) = m {
                s += &format!(", flow mixing: {}", mixing_words(m).0);
            }
            s
        }
    };
    let data = json!({
        "case": case.letter(),
        "label": case.to_string(),
        "covolume": cov.map(|c| c.to_string()),
        "mixing": mixing.map(|m| mixing_words(m).1),
        "group": group.as_ref().map(lclt_core::groups::json::group_to_json),
    });
    Ok(Report { lines: vec![line], table: None, data })
}

fn full_marginal(spec: &SystemSpec, nu_tau: f64) -> Marginal {
    match spec {
        SystemSpec::Renewal(b) => Marginal::renewal_full(b),
        _ => Marginal::product(nu_tau, 0.0, 1.0),
    }
}

/// Lattice spacing a of the first coordinate in case D.
fn case_d_spacing(case: &CaseLabel) -> Option<f64> {
    match case {
        CaseLabel::D { a, .. } => Some(a.to_f64().abs()),
        _ => None,
    }
}

struct Setup {
    spec: SystemSpec,
    case: CaseLabel,
    sigma: f64,
    sigma_method: &'static str,
    nu_tau: f64,
}

fn setup(cfg: &RunConfig, spec: &Path, nonlattice: bool, sigma: Option<f64>) -> Result<Setup, CliError> {
    let sys = load_system(spec)?;
    let case = system_case(&sys, nonlattice)?;
    let info = flow_sigma(&sys, cfg.global.seed, cfg.global.workers)?;
    let (sigma, sigma_method) = match sigma {
        Some(s) => (s, "override"),
        None => (info.sigma, info.method),
    };
    Ok(Setup { spec: sys, case, sigma, sigma_method, nu_tau: info.nu_tau })
}

fn request(s: &Setup, t: f64, w: f64, l: i64, lo: f64, hi: f64) -> PredictionRequest {
    let raw = w * t.sqrt();
    let w_of_t = case_d_spacing(&s.case).map_or(raw, |a| snap_to_lattice(raw, a, 0.0));
    let full = full_marginal(&s.spec, s.nu_tau);
    PredictionRequest {
        t,
        w_of_t,
        w,
        l,
        start: full.clone(),
        end: full,
        target: RealSet::interval(RealInterval::half_open(lo, hi)),
    }
}

pub fn predict_cmd(cfg: &RunConfig, a: &PredictArgs) -> Result<Report, CliError> {
    let t = parse_time(&a.t)?.to_f64();
    let s = setup(cfg, &a.spec, a.nonlattice, a.sigma)?;
    let params = FlowMLCLTParams::minimal(s.case.clone(), s.sigma, s.nu_tau);
    if matches!(s.case, CaseLabel::D { .. } | CaseLabel::E { .. }) && !matches!(s.spec, SystemSpec::Renewal(_)) {
        return Err(CliError::Math("discrete-case predictions need a renewal system".into()));
    }
    let p = predict(&params, &request(&s, t, a.w, a.l, a.lo, a.hi))?;
    let line = format!(
        "{} at t = {}: √t·P = {:.6} (gauss {:.6}, haar {:.6}, marginals {:.6}; Σ = {:.6} by {})",
        s.case, a.t, p.value, p.gauss, p.haar, p.marginals, s.sigma, s.sigma_method
    );
    let mut data = p.to_json();
    data["sigma"] = json!(s.sigma);
    data["sigma_method"] = json!(s.sigma_method);
    Ok(Report { lines: vec![line], table: None, data })
}

fn verify(cfg: &RunConfig, a: &VerifyArgs, dir: &mut OutDir) -> Result<Outcome, CliError> {
    let t_exact = parse_time(&a.t)?;
    let t = t_exact.to_f64();
    let s = setup(cfg, &a.spec, a.nonlattice, a.sigma)?;
    let params = FlowMLCLTParams::minimal(s.case.clone(), s.sigma, s.nu_tau);
    let (k, rel) = (SE_BAND * cfg.global.tolerance_scale, BIAS_ALLOWANCE * cfg.global.tolerance_scale);
    let mut table = Table::new(&["window", "prediction", "estimate", "std_error", "n", "oracle", "verdict"]);
    let mut failed = Vec::new();
    match (&s.case, &s.spec) {
        (CaseLabel::A, _) => {
            let h = a.half_width;
            let windows: Vec<Window> = a.windows.iter().map(|&w| Window { w, lo: -h, hi: h }).collect();
            let est = with_system!(&s.spec, sys => estimate_lclt(sys, &HistogramSpec::new(t, windows)?, &mc_config(cfg, a.n))?);
            for (&w, e) in a.windows.iter().zip(&est) {
                let pred = predict(&params, &request(&s, t, w, 0, -h, h))?.value;
                let pass = e.agrees(pred, k, rel);
                if !pass {
                    failed.push(format!("w = {w}"));
                }
                table.push(vec![num(w), num(pred), num(e.point), num(e.std_error), e.n_samples.to_string(), "n/a".into(), verdict(pass)]);
            }
        }
        (CaseLabel::D { .. }, SystemSpec::Renewal(base)) => {
            let spacing = case_d_spacing(&s.case).expect("case D");
            for &w in &a.windows {
                let req = request(&s, t, w, a.l, 0.0, 0.0);
                let pred = predict(&params, &req)?.value;
                let everything = ProductSet::full();
                let target = MlcltTarget::Fiber { l: a.l, spacing };
                let e = estimate_mlclt(base, &everything, &everything, &target, t, req.w_of_t, &mc_config(cfg, a.n))?.estimate;
                let oracle = fiber_oracle(base, &t_exact, spacing, req.w_of_t, a.l)?;
                let pass = e.agrees(pred, k, rel) && oracle.is_none_or(|o| e.agrees(o, k, 0.0));
                if !pass {
                    failed.push(format!("w = {w}"));
                }
                let oracle = oracle.map_or("n/a".to_string(), num);
                table.push(vec![num(w), num(pred), num(e.point), num(e.std_error), e.n_samples.to_string(), oracle, verdict(pass)]);
            }
        }
        (other, _) => {
            return Err(CliError::Math(format!(
                "verify covers case A systems and case D renewal systems, got {}",
                other.letter()
            )))
        }
    }
    dir.write("verify.csv", &table.to_csv())?;
    let lines = vec![format!(
        "{} at t = {}, N = {}; Σ = {:.6} by {}; tolerance {k} SE + {:.0}%",
        s.case,
        a.t,
        a.n,
        s.sigma,
        s.sigma_method,
        rel * 100.0
    )];
    let data = json!({"case": s.case.to_string(), "t": t, "sigma": s.sigma, "all_pass": failed.is_empty()});
    let failure = (!failed.is_empty()).then(|| format!("FAIL at {}", failed.join(", ")));
    Ok(Outcome { report: Report { lines, table: Some(table), data }, failure })
}

fn verdict(pass: bool) -> String {
    if pass { "PASS" } else { "FAIL" }.to_string()
}

/// √t·P(fiber l) from the exact stationary-start distribution, when the
/// fiber is an integer index of the exact DP.
fn fiber_oracle(
    base: &lclt_core::RenewalBase,
    t: &QuadScalar,
    spacing: f64,
    w_of_t: f64,
    l: i64,
) -> Result<Option<f64>, CliError> {
    if base.exact_atoms().is_none() || spacing != 1.0 {
        return Ok(None);
    }
    let index = w_of_t.round() as i64 + l;
    let dist = dp_distribution(base, t, StartMode::Stationary)?;
    Ok(Some(dist.prob(index).to_f64() * t.to_f64().sqrt()))
}

fn simulate(cfg: &RunConfig, a: &SimulateArgs, dir: &mut OutDir) -> Result<Report, CliError> {
    let t = parse_time(&a.t)?.to_f64();
    let sys = load_system(&a.spec)?;
    let h = a.half_width;
    let windows: Vec<Window> = a.windows.iter().map(|&w| Window { w, lo: -h, hi: h }).collect();
    let est = with_system!(&sys, s => estimate_lclt(s, &HistogramSpec::new(t, windows)?, &mc_config(cfg, a.n))?);
    let mut table = Table::new(&["window", "estimate", "std_error", "n"]);
    for (&w, e) in a.windows.iter().zip(&est) {
        table.push(vec![num(w), num(e.point), num(e.std_error), e.n_samples.to_string()]);
    }
    dir.write("lclt.csv", &table.to_csv())?;
    dir.write(
        "lclt.gp",
        &gnuplot_script("lclt.csv", "w", "sqrt(t) P(window)", &["using 1:2:3 with yerrorbars title 'estimate'"]),
    )?;
    let lines = vec![format!("{} system, t = {}, N = {}, windows [w√t − {h}, w√t + {h}]", sys.kind(), a.t, a.n)];
    Ok(Report { lines, table: Some(table), data: json!({"system": sys.kind(), "t": t, "n": a.n}) })
}

fn spectral(a: &SpectralArgs, dir: &mut OutDir) -> Result<Report, CliError> {
    let SystemSpec::Markov(base) = load_system(&a.spec)? else {
        return Err(CliError::Math("the spectral pipeline needs a Markov system".into()));
    };
    if a.points < 2 {
        return Err(CliError::Math("need at least two grid points".into()));
    }
    let comps = match a.component {
        ComponentArg::Phi => Components::Phi,
        ComponentArg::Tau => Components::Tau,
        ComponentArg::Phitau => Components::PhiTau,
    };
    let model = TwistedOperatorModel::from_markov(&base, comps);
    let dim = model.dim();
    let params: Vec<f64> = (0..a.points).map(|k| -PI + TAU * k as f64 / (a.points - 1) as f64).collect();
    let grid: Vec<Vec<f64>> = params
        .iter()
        .map(|&s| if dim == 1 { vec![s] } else { vec![s * a.direction.cos(), s * a.direction.sin()] })
        .collect();
    let curve = eigen_curve(&model, &grid);
    let mut table = Table::new(&["t", "re_lambda", "im_lambda", "abs_lambda", "gap"]);
    for (s, p) in params.iter().zip(&curve.points) {
        table.push(vec![num(*s), num(p.lambda.re), num(p.lambda.im), num(p.lambda.norm()), num(p.gap)]);
    }
    dir.write("lambda_curve.csv", &table.to_csv())?;
    dir.write(
        "lambda_curve.gp",
        &gnuplot_script(
            "lambda_curve.csv",
            "t",
            "lambda",
            &["using 1:2 with lines title 'Re'", "using 1:3 with lines title 'Im'", "using 1:4 with lines title '|lambda|'"],
        ),
    )?;
    let fit = expansion_fit(&eigen_curve(&model, &fit_grid(dim, 8)), &model.mean())?;
    let mut lines = vec![
        format!("drift {:?}, m {:?}, residual slope {:.3}", fit.drift, fit.m, fit.residual_order),
        format!("drift error against ν(f): {:.3e}", fit.drift_error),
    ];
    let detections = unit_modulus_scan(&model, &grid);
    let inferred = if dim == 1 { infer_group_1d(&detections).ok().map(|g| format_line_group(&g)) } else { None };
    if let Some(g) = &inferred {
        lines.push(format!("unit-modulus points: {}; inferred {g}", detections.len()));
    }
    let data = json!({
        "drift": fit.drift,
        "m": fit.m,
        "residual_order": fit.residual_order,
        "drift_error": fit.drift_error,
        "unit_modulus_points": detections.len(),
        "inferred_group": inferred,
    });
    dir.write("fit.json", &(serde_json::to_string_pretty(&data).expect("json") + "\n"))?;
    Ok(Report { lines, table: None, data })
}

fn renewal(a: &RenewalArgs, dir: &mut OutDir) -> Result<Report, CliError> {
    let times = a.times.iter().map(|s| parse_time(s)).collect::<Result<Vec<_>, _>>()?;
    let rows = counterexample_scan(&times)?;
    let mut table = Table::new(&["t", "frac_cell", "sqrt_t_times_p", "pruned_mass"]);
    let mut cells: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    for r in &rows {
        table.push(vec![num(r.t.to_f64()), r.frac_cell.to_string(), num(r.sqrt_t_times_p), num(r.pruned_mass)]);
        cells.entry(r.frac_cell).or_default().push((r.t.to_f64(), r.sqrt_t_times_p));
    }
    dir.write("scan.csv", &table.to_csv())?;
    dir.write(
        "scan.gp",
        &gnuplot_script("scan.csv", "t", "sqrt(t) P(S = 0)", &["using 1:3:2 with points palette pt 7 title 'scan'"]),
    )?;
    let limits: Vec<(usize, f64)> = cells.iter().map(|(c, pts)| (*c, extrapolate_inv_sqrt(pts))).collect();
    let mut lines: Vec<String> = limits.iter().map(|(c, l)| format!("cell {c}: limit {l:.6}")).collect();
    if let Some(&(_, first)) = limits.first() {
        let ratios: Vec<String> = limits.iter().map(|(_, l)| format!("{:.4}", l / first)).collect();
        lines.push(format!("ratios {}", ratios.join(" : ")));
    }
    let data = json!({"limits": limits.iter().map(|(c, l)| json!({"cell": c, "limit": l})).collect::<Vec<_>>()});
    Ok(Report { lines, table: Some(table), data })
}

fn correlate(cfg: &RunConfig, a: &CorrelateArgs, dir: &mut OutDir) -> Result<Report, CliError> {
    if !(a.dt > 0.0 && a.t1 >= a.t0) {
        return Err(CliError::Math("need dt > 0 and t1 ≥ t0".into()));
    }
    let sys = load_system(&a.spec)?;
    let steps = ((a.t1 - a.t0) / a.dt + 1e-9).floor() as usize;
    let grid: Vec<f64> = (0..=steps).map(|k| a.t0 + a.dt * k as f64).collect();
    let series = with_system!(&sys, s => {
        let band = band_set(a.delta);
        estimate_correlation(s, &band, &band, &grid, &mc_config(cfg, a.n))?
    });
    let mut table = Table::new(&["t", "corr", "std_error", "joint"]);
    for p in &series {
        table.push(vec![num(p.t), num(p.corr), num(p.std_error), num(p.joint)]);
    }
    dir.write("correlation.csv", &table.to_csv())?;
    dir.write(
        "correlation.gp",
        &gnuplot_script("correlation.csv", "t", "correlation", &["using 1:2:3 with yerrorlines title 'corr'"]),
    )?;
    let max = series.iter().map(|p| p.corr.abs()).fold(0.0, f64::max);
    let lines = vec![format!("{} system, bands of width {}, max |corr| {max:.6}", sys.kind(), a.delta)];
    Ok(Report { lines, table: Some(table), data: json!({"max_abs_corr": max}) })
}

/// Re-run a manifest into `out` and compare every recorded checksum.
pub fn replay(manifest: &Path, out: &Path) -> Result<Report, CliError> {
    let m = Manifest::load(manifest)?;
    if crate::artifacts::config_hash(&m.config) != m.config_hash {
        return Err(CliError::Parse("manifest config does not match its config hash".into()));
    }
    execute(&m.config, out)?;
    let fresh = Manifest::load(&out.join(crate::artifacts::MANIFEST))?;
    let mut table = Table::new(&["path", "sha256", "verdict"]);
    let mut bad = Vec::new();
    for rec in &m.outputs {
        let same = fresh.outputs.iter().any(|r| r == rec);
        if !same {
            bad.push(rec.path.clone());
        }
        table.push(vec![rec.path.clone(), rec.sha256.clone(), if same { "identical" } else { "DIFFERS" }.into()]);
    }
    if !bad.is_empty() {
        return Err(CliError::Verify(format!("outputs differ: {}", bad.join(", "))));
    }
    let lines = vec![format!("replayed {} ({}): {} outputs identical", m.command, m.config_hash, m.outputs.len())];
    Ok(Report { lines, table: Some(table), data: json!({"command": m.command, "identical": m.outputs.len()}) })
}
