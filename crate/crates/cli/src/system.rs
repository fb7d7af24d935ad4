//! Loading system specs and the per-system quantities every pipeline needs.

use std::path::Path;

use lclt_core::groups::{json::vec_from_json, minimal_group, LineGroup, LineGroupWithShift};
use lclt_core::montecarlo::estimate_sigma;
use lclt_core::predict::{flow_variance, roof_group};
use lclt_core::spectral::{eigen_curve, expansion_fit, fit_grid, Components, TwistedOperatorModel};
use lclt_core::systems::spec::SystemSpec;
use lclt_core::{classify_case, closure_of_group, CaseLabel, GroupWithShift, QVec, QuadScalar, SuspensionSystem};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Run `$body` with `$s` bound to the concrete system inside a [`SystemSpec`].
macro_rules! with_system {
    ($spec:expr, $s:ident => $body:expr) => {
        match $spec {
            lclt_core::systems::spec::SystemSpec::Renewal($s) => $body,
            lclt_core::systems::spec::SystemSpec::Markov($s) => $body,
            lclt_core::systems::spec::SystemSpec::Pm($s) => $body,
        }
    };
}
pub(crate) use with_system;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn read_json(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

pub fn load_system(path: &Path) -> Result<SystemSpec, CliError> {
    Ok(SystemSpec::from_json(&read_json(path)?)?)
}

pub fn system_hash(spec: &SystemSpec) -> String {
    sha256_hex(with_system!(spec, s => s.describe()).as_bytes())
}

pub fn parse_time(text: &str) -> Result<QuadScalar, CliError> {
    let t = QuadScalar::parse(text).ok_or_else(|| CliError::Parse(format!("cannot read time {text:?}")))?;
    if t <= QuadScalar::zero() {
        return Err(CliError::Math(format!("time must be positive, got {t}")));
    }
    Ok(t)
}

/// What `classify` works on: a dynamical system or a bare generator set.
pub enum ClassifyInput {
    System(SystemSpec),
    Generators { gens: Vec<QVec>, shift: QVec },
}

pub fn load_classify_input(path: &Path) -> Result<ClassifyInput, CliError> {
    let v = read_json(path)?;
    let Some(gens) = v.get("generators") else {
        return Ok(ClassifyInput::System(SystemSpec::from_json(&v)?));
    };
    let d = v.get("D").and_then(Value::as_i64).unwrap_or(2);
    let gens = gens
        .as_array()
        .ok_or_else(|| CliError::Parse("generators must be an array".into()))?
        .iter()
        .map(|g| vec_from_json(g, d))
        .collect::<Result<Vec<_>, _>>()?;
    let shift = match v.get("shift") {
        None | Some(Value::Null) => [QuadScalar::zero(), QuadScalar::zero()],
        Some(s) => vec_from_json(s, d)?,
    };
    Ok(ClassifyInput::Generators { gens, shift })
}

fn no_exact_values(spec: &SystemSpec) -> CliError {
    CliError::Math(format!(
        "the {} system has no exact (φ̌, τ) values; pass --nonlattice to assume the non-lattice case",
        spec.kind()
    ))
}

/// Minimal closed group of the exact support points of (φ̌, τ).
pub fn system_group(spec: &SystemSpec) -> Result<GroupWithShift, CliError> {
    let cycles = spec.cycles().ok_or_else(|| no_exact_values(spec))?;
    Ok(minimal_group(&cycles)?)
}

pub fn generator_group(gens: &[QVec], shift: &QVec) -> Result<GroupWithShift, CliError> {
    Ok(closure_of_group(gens, shift)?)
}

/// (M(τ), r(τ)) of the roof alone.
pub fn system_roof_group(spec: &SystemSpec) -> Result<LineGroupWithShift, CliError> {
    let cycles = spec.cycles().ok_or_else(|| no_exact_values(spec))?;
    let taus: Vec<(QuadScalar, i64)> = cycles.into_iter().map(|(v, n)| (v[1].clone(), n)).collect();
    Ok(roof_group(&taus)?)
}

/// Case label of the system, or case A when the caller asserts a
/// non-lattice system without exact values.
pub fn system_case(spec: &SystemSpec, nonlattice: bool) -> Result<CaseLabel, CliError> {
    match spec.cycles() {
        Some(_) => Ok(classify_case(&system_group(spec)?)?),
        None if nonlattice => Ok(CaseLabel::A),
        None => Err(no_exact_values(spec)),
    }
}

pub fn format_line_group(g: &LineGroupWithShift) -> String {
    let m = match &g.group {
        LineGroup::Zero => "{0}".to_string(),
        LineGroup::Lattice(a) => format!("({a})Z"),
        LineGroup::Real => "R".to_string(),
    };
    format!("M = {m}, r = {}", g.shift)
}

/// Flow variance Σ together with ν(τ) and the method used.
pub struct SigmaInfo {
    pub sigma: f64,
    pub nu_tau: f64,
    pub method: &'static str,
}

pub fn flow_sigma(spec: &SystemSpec, seed: u64, workers: usize) -> Result<SigmaInfo, CliError> {
    Ok(match spec {
        SystemSpec::Renewal(b) => SigmaInfo {
            sigma: flow_variance(&b.covariance(), b.nu_tau())?,
            nu_tau: b.nu_tau(),
            method: "exact covariance",
        },
        SystemSpec::Markov(m) => {
            let model = TwistedOperatorModel::from_markov(m, Components::PhiTau);
            let fit = expansion_fit(&eigen_curve(&model, &fit_grid(2, 8)), &model.mean())?;
            let cov = [[2.0 * fit.m[0][0], 2.0 * fit.m[0][1]], [2.0 * fit.m[1][0], 2.0 * fit.m[1][1]]];
            SigmaInfo { sigma: flow_variance(&cov, m.nu_tau())?, nu_tau: m.nu_tau(), method: "eigenvalue expansion" }
        }
        SystemSpec::Pm(p) => {
            let est = estimate_sigma(p, 4000, 1000, seed, workers)?;
            SigmaInfo { sigma: est.flow_variance(), nu_tau: est.mean[1], method: "batch means" }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn times_parse_exactly() {
        assert_eq!(parse_time("100.3").unwrap(), QuadScalar::ratio(1003, 10));
        assert_eq!(parse_time("1+√2").unwrap(), QuadScalar::from_ints(1, 1, 2));
        assert!(matches!(parse_time("abc"), Err(CliError::Parse(_))));
        assert!(matches!(parse_time("-1"), Err(CliError::Math(_))));
    }

    #[test]
    fn hashes_are_stable_hex() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn renewal_sigma_is_exact() {
        let spec = SystemSpec::Renewal(lclt_core::RenewalBase::counterexample());
        let info = flow_sigma(&spec, 1, 1).unwrap();
        assert!((info.sigma - 1.0).abs() < 1e-12);
        assert_eq!(info.method, "exact covariance");
    }
}
