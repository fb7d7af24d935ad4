//! Closed-form limits of t^{1/2}-scaled joint probabilities for suspension
//! flows, in each of the cases A–E, and the mixing criterion for the roof.

use serde_json::{json, Value};
use thiserror::Error;

use crate::groups::{
    haar_mass, minimal_group, shear_reduce, CaseLabel, GroupError, LineGroup, LineGroupWithShift, QuadScalar, RealSet,
};
use crate::systems::RenewalBase;

const LATTICE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PredictError {
    #[error("covariance is not positive definite")]
    SingularCovariance,
    #[error("mean roof value must be positive, got {0}")]
    NonPositiveNuTau(f64),
    #[error("expected case {expected}, got case {got}")]
    CaseMismatch { expected: String, got: String },
    #[error("nonzero transfer-function tables are not supported here")]
    TableNotSupported,
    #[error("W(t) is off the lattice: {0}")]
    LatticeViolation(String),
    #[error(transparent)]
    Group(#[from] GroupError),
}

/// Centered Gaussian in dimension 1 or 2.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSpec {
    dim: usize,
    cov: [[f64; 2]; 2],
    inv: [[f64; 2]; 2],
    det: f64,
}

impl GaussianSpec {
    pub fn new_1d(var: f64) -> Result<Self, PredictError> {
        if !(var > 0.0 && var.is_finite()) {
            return Err(PredictError::SingularCovariance);
        }
        Ok(GaussianSpec { dim: 1, cov: [[var, 0.0], [0.0, 0.0]], inv: [[1.0 / var, 0.0], [0.0, 0.0]], det: var })
    }

    pub fn new_2d(cov: [[f64; 2]; 2]) -> Result<Self, PredictError> {
        let det = cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0];
        if (cov[0][1] - cov[1][0]).abs() > 1e-12 * (cov[0][1].abs() + 1.0) || !(cov[0][0] > 0.0) || !(det > 0.0) {
            return Err(PredictError::SingularCovariance);
        }
        let inv = [[cov[1][1] / det, -cov[0][1] / det], [-cov[1][0] / det, cov[0][0] / det]];
        Ok(GaussianSpec { dim: 2, cov, inv, det })
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn covariance(&self) -> [[f64; 2]; 2] {
        self.cov
    }

    pub fn density(&self, w: &[f64]) -> f64 {
        assert_eq!(w.len(), self.dim, "dimension mismatch");
        let two_pi = std::f64::consts::TAU;
        match self.dim {
            1 => (-0.5 * w[0] * w[0] * self.inv[0][0]).exp() / (two_pi * self.det).sqrt(),
            _ => {
                let q = w[0] * (self.inv[0][0] * w[0] + self.inv[0][1] * w[1]) + w[1] * (self.inv[1][0] * w[0] + self.inv[1][1] * w[1]);
                (-0.5 * q).exp() / (two_pi * self.det.sqrt())
            }
        }
    }
}

pub fn gaussian_density(g: &GaussianSpec, w: &[f64]) -> f64 {
    g.density(w)
}

/// Σ(φ) = Σ(φ̌, τ)₁₁ / ν(τ).
pub fn flow_variance(sigma_base: &[[f64; 2]; 2], nu_tau: f64) -> Result<f64, PredictError> {
    if !(nu_tau > 0.0) {
        return Err(PredictError::NonPositiveNuTau(nu_tau));
    }
    Ok(sigma_base[0][0] / nu_tau)
}

/// One product piece A×I of a start or end set: base mass `weight` with
/// fiber interval [lo, hi). `state` indexes the transfer-function table.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberPiece {
    pub weight: f64,
    pub lo: f64,
    pub hi: f64,
    pub state: Option<usize>,
}

/// A finite union of product pieces.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginal {
    pub pieces: Vec<FiberPiece>,
}

impl Marginal {
    pub fn product(nu_a: f64, lo: f64, hi: f64) -> Self {
        Marginal { pieces: vec![FiberPiece { weight: nu_a, lo, hi, state: None }] }
    }

    /// The whole phase space of a flow with constant roof c.
    pub fn constant_roof(c: f64) -> Self {
        Self::product(1.0, 0.0, c)
    }

    /// The whole phase space of a renewal flow: one full fiber per atom.
    pub fn renewal_full(base: &RenewalBase) -> Self {
        Marginal {
            pieces: (0..base.len())
                .map(|i| {
                    let (_, y, p) = base.atom(i);
                    FiberPiece { weight: p, lo: 0.0, hi: y, state: Some(i) }
                })
                .collect(),
        }
    }

    /// Flow measure μ of the set.
    pub fn mass(&self, nu_tau: f64) -> f64 {
        self.pieces.iter().map(|p| p.weight * (p.hi - p.lo).max(0.0)).sum::<f64>() / nu_tau
    }

    pub fn scaled(&self, k: f64) -> Self {
        Marginal { pieces: self.pieces.iter().map(|p| FiberPiece { weight: p.weight * k, ..p.clone() }).collect() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowMLCLTParams {
    pub case: CaseLabel,
    pub sigma_flow: f64,
    pub nu_tau: f64,
    /// h_τ by state index; absent means identically zero.
    pub h_tau_table: Option<Vec<f64>>,
    /// h by state index; absent means identically zero.
    pub h_table: Option<Vec<f64>>,
}

impl FlowMLCLTParams {
    pub fn minimal(case: CaseLabel, sigma_flow: f64, nu_tau: f64) -> Self {
        FlowMLCLTParams { case, sigma_flow, nu_tau, h_tau_table: None, h_table: None }
    }

    fn check(&self) -> Result<GaussianSpec, PredictError> {
        if !(self.nu_tau > 0.0) {
            return Err(PredictError::NonPositiveNuTau(self.nu_tau));
        }
        GaussianSpec::new_1d(self.sigma_flow)
    }

    fn h_tau(&self, state: Option<usize>) -> f64 {
        match (&self.h_tau_table, state) {
            (Some(tab), Some(i)) => tab.get(i).copied().unwrap_or(0.0),
            _ => 0.0,
        }
    }
}

fn table_is_zero(t: &Option<Vec<f64>>) -> bool {
    t.as_ref().is_none_or(|v| v.iter().all(|x| *x == 0.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRequest {
    pub t: f64,
    pub w_of_t: f64,
    /// lim W(t)/√t.
    pub w: f64,
    pub l: i64,
    pub start: Marginal,
    pub end: Marginal,
    /// Target window ℋ (cases A–C).
    pub target: RealSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub case: String,
    pub t: f64,
    pub w_of_t: f64,
    pub l: i64,
    pub value: f64,
    pub gauss: f64,
    pub haar: f64,
    pub marginals: f64,
}

impl Prediction {
    pub fn to_json(&self) -> Value {
        json!({
            "case": self.case,
            "t": self.t,
            "W": self.w_of_t,
            "l": self.l,
            "value": self.value,
            "breakdown": {"gauss": self.gauss, "haar": self.haar, "marginals": self.marginals},
        })
    }
}

fn mismatch(expected: &str, got: &CaseLabel) -> PredictError {
    PredictError::CaseMismatch { expected: expected.into(), got: got.letter().into() }
}

/// 𝔤_Σ(w)·μ(A×I)·u_V(ℋ)·μ(B×J) with V = R, aZ or (β/α)Z.
pub fn predict_flow_limit_abc(params: &FlowMLCLTParams, req: &PredictionRequest) -> Result<Prediction, PredictError> {
    let g = params.check()?;
    if !table_is_zero(&params.h_table) || !table_is_zero(&params.h_tau_table) {
        return Err(PredictError::TableNotSupported);
    }
    let v = match &params.case {
        CaseLabel::A => LineGroup::Real,
        CaseLabel::B { a } => LineGroup::Lattice(a.abs()),
        c @ CaseLabel::C { .. } => match shear_reduce(c)?.0 {
            CaseLabel::B { a } => LineGroup::Lattice(a),
            _ => unreachable!("case C shears to case B"),
        },
        other => return Err(mismatch("A, B or C", other)),
    };
    let gauss = g.density(&[req.w]);
    let haar = haar_mass(&v, &req.target)?;
    let marginals = req.start.mass(params.nu_tau) * req.end.mass(params.nu_tau);
    Ok(Prediction {
        case: params.case.letter().into(),
        t: req.t,
        w_of_t: req.w_of_t,
        l: req.l,
        value: gauss * haar * marginals,
        gauss,
        haar,
        marginals,
    })
}

fn lattice_index(w: f64, a: f64) -> Result<f64, PredictError> {
    let k = w / a;
    if (k - k.round()).abs() > LATTICE_TOL * (1.0 + k.abs()) {
        return Err(PredictError::LatticeViolation(format!("W(t)/a = {k} is not an integer")));
    }
    Ok(k.round())
}

/// ρ = s + t − (W(t)/a + l)·b reduced into [0, d).
pub fn rho_of_t(a: f64, b: f64, d: f64, t: f64, s: f64, w_of_t: f64, l: i64) -> Result<f64, PredictError> {
    let k = lattice_index(w_of_t, a)?;
    let r = (s + t - (k + l as f64) * b).rem_euclid(d.abs());
    Ok(if r >= d.abs() { 0.0 } else { r })
}

/// Exact ρ in Q(√D).
pub fn rho_of_t_exact(
    a: &QuadScalar,
    b: &QuadScalar,
    d: &QuadScalar,
    t: &QuadScalar,
    s: &QuadScalar,
    w_of_t: &QuadScalar,
    l: i64,
) -> Result<QuadScalar, PredictError> {
    let k = w_of_t / a;
    if !k.is_rational() || !k.p().is_integer() {
        return Err(PredictError::LatticeViolation(format!("W(t)/a = {k} is not an integer")));
    }
    let raw = &(s + t) - &(&(&k + &QuadScalar::int(l)) * b);
    Ok(raw.rem_euclid(&d.abs()))
}

/// The case-E ρ: W(t) is first moved by −(c′/d′)t onto aZ with
/// a = a′ − b′c′/d′.
pub fn rho_of_t_case_e(case: &CaseLabel, t: f64, s: f64, w_of_t: f64, l: i64) -> Result<f64, PredictError> {
    let (reduced, shift) = match case {
        CaseLabel::E { .. } => shear_reduce(case)?,
        other => return Err(mismatch("E", other)),
    };
    let CaseLabel::D { a, b, d } = reduced else { unreachable!("case E shears to case D") };
    rho_of_t(a.to_f64(), b.to_f64(), d.to_f64(), t, s, w_of_t - shift.to_f64() * t, l)
}

/// Σ_m |[i0, i1) ∩ ([j0, j1) − ρ − md)| = ∫_I Card(m : s + ρ + md ∈ J) ds.
pub fn card_integral(i: (f64, f64), j: (f64, f64), rho: f64, d: f64) -> f64 {
    let d = d.abs();
    if i.1 <= i.0 || j.1 <= j.0 {
        return 0.0;
    }
    let m_lo = ((j.0 - rho - i.1) / d).floor() as i64 - 1;
    let m_hi = ((j.1 - rho - i.0) / d).ceil() as i64 + 1;
    let mut acc = 0.0;
    for m in m_lo..=m_hi {
        let shift = rho + m as f64 * d;
        let lo = i.0.max(j.0 - shift);
        let hi = i.1.min(j.1 - shift);
        if hi > lo {
            acc += hi - lo;
        }
    }
    acc
}

fn predict_d_core(
    params: &FlowMLCLTParams,
    (a, b, d): (f64, f64, f64),
    req: &PredictionRequest,
    w_of_t: f64,
    case_name: &str,
) -> Result<Prediction, PredictError> {
    let g = params.check()?;
    let rho0 = rho_of_t(a, b, d, req.t, 0.0, w_of_t, req.l)?;
    let gauss = g.density(&[req.w]);
    let nu = params.nu_tau;
    let mut integral = 0.0;
    for p in &req.start.pieces {
        for q in &req.end.pieces {
            let h = params.h_tau(p.state) - params.h_tau(q.state);
            integral += p.weight * q.weight * card_integral((p.lo, p.hi), (q.lo, q.hi), (rho0 + h).rem_euclid(d.abs()), d);
        }
    }
    let value = gauss * a.abs() * d.abs() * integral / (nu * nu);
    let marginals = req.start.mass(nu) * req.end.mass(nu);
    Ok(Prediction {
        case: case_name.into(),
        t: req.t,
        w_of_t: req.w_of_t,
        l: req.l,
        value,
        gauss,
        haar: if marginals > 0.0 { value / (gauss * marginals) } else { 0.0 },
        marginals,
    })
}

/// (ν(A)/ν(τ))·𝔤_Σ(w)·a·d·∫_I Card(m : ρ(s, t) + md ∈ J) ds·(ν(B)/ν(τ)),
/// summed over the product pieces of the start and end sets.
pub fn predict_case_d(params: &FlowMLCLTParams, req: &PredictionRequest) -> Result<Prediction, PredictError> {
    let CaseLabel::D { a, b, d } = &params.case else {
        return Err(mismatch("D", &params.case));
    };
    predict_d_core(params, (a.to_f64(), b.to_f64(), d.to_f64()), req, req.w_of_t, "D")
}

/// Case E through the shear to case D.
pub fn predict_case_e(params: &FlowMLCLTParams, req: &PredictionRequest) -> Result<Prediction, PredictError> {
    if !matches!(params.case, CaseLabel::E { .. }) {
        return Err(mismatch("E", &params.case));
    }
    let (reduced, shift) = shear_reduce(&params.case)?;
    let CaseLabel::D { a, b, d } = reduced else { unreachable!("case E shears to case D") };
    let w_shifted = req.w_of_t - shift.to_f64() * req.t;
    predict_d_core(params, (a.to_f64(), b.to_f64(), d.to_f64()), req, w_shifted, "E")
}

/// Dispatch on the case label.
pub fn predict(params: &FlowMLCLTParams, req: &PredictionRequest) -> Result<Prediction, PredictError> {
    match params.case {
        CaseLabel::A | CaseLabel::B { .. } | CaseLabel::C { .. } => predict_flow_limit_abc(params, req),
        CaseLabel::D { .. } => predict_case_d(params, req),
        CaseLabel::E { .. } => predict_case_e(params, req),
        CaseLabel::Degenerate(_) => Err(mismatch("A-E", &params.case)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixingClass {
    Mixing,
    NotWeaklyMixing,
}

/// Mixing iff M(τ) = R, or M(τ) = αZ with r(τ)/α irrational.
pub fn mixing_classify(g: &LineGroupWithShift) -> MixingClass {
    match &g.group {
        LineGroup::Real => MixingClass::Mixing,
        LineGroup::Zero => MixingClass::NotWeaklyMixing,
        LineGroup::Lattice(alpha) => {
            if (&g.shift / alpha).is_rational() {
                MixingClass::NotWeaklyMixing
            } else {
                MixingClass::Mixing
            }
        }
    }
}

/// (M(τ), r(τ)) from closed walks: each entry is the roof sum along a walk
/// and the walk length.
pub fn roof_group(cycles: &[(QuadScalar, i64)]) -> Result<LineGroupWithShift, PredictError> {
    let embedded: Vec<_> = cycles.iter().map(|(v, n)| ([v.clone(), QuadScalar::zero()], *n)).collect();
    let g = minimal_group(&embedded)?;
    let m = g.group.as_line_group()?;
    Ok(LineGroupWithShift::new(m, g.shift[0].clone()))
}

/// The point of aZ + offset nearest to `target`.
pub fn snap_to_lattice(target: f64, a: f64, offset: f64) -> f64 {
    offset + ((target - offset) / a).round() * a
}
