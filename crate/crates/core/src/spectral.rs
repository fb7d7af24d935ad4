//! Twisted transfer operators of finite Markov shifts.
//!
//! For values f(i, j) ∈ R^d on transitions, P_t is the n×n matrix with
//! (P_t)_{ji} = P(i, j)·exp(i⟨t, f(i, j)⟩), so that E_π exp(i⟨t, S_n⟩) =
//! 1ᵀ P_tⁿ π.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::groups::{LineGroup, LineGroupWithShift, QuadScalar};
use crate::quadrature::integrate_panels;
use crate::systems::{MarkovChain, MarkovShiftBase, SystemError};

const GAP_TIE: f64 = 1e-8;
const UNIT_TOL: f64 = 1e-8;
const MAX_DEPTH: u32 = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("no spectral gap at t = {t:?}: |λ₁| = {m1}, |λ₂| = {m2}")]
    NoGap { t: Vec<f64>, lambda: Complex64, m1: f64, m2: f64 },
    #[error("fit design matrix has condition number {0:e}")]
    IllConditionedFit(f64),
    #[error("adaptive quadrature did not converge within depth {0}")]
    QuadratureFailure(u32),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    System(#[from] SystemError),
}

/// Which transition values enter f.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Components {
    Phi,
    Tau,
    PhiTau,
}

#[derive(Debug, Clone)]
pub struct TwistedOperatorModel {
    p: Vec<Vec<f64>>,
    pi: Vec<f64>,
    f: Vec<Vec<Vec<f64>>>,
    dim: usize,
}

impl TwistedOperatorModel {
    pub fn new(p: Vec<Vec<f64>>, f: Vec<Vec<Vec<f64>>>) -> Result<Self, SpectralError> {
        let chain = MarkovChain::new(p)?;
        let n = chain.n_states();
        let dim = f.first().and_then(|r| r.first()).map_or(0, Vec::len);
        if !(1..=2).contains(&dim) {
            return Err(SpectralError::Invalid("values must have dimension 1 or 2".into()));
        }
        if f.len() != n || f.iter().any(|r| r.len() != n || r.iter().any(|v| v.len() != dim)) {
            return Err(SpectralError::Invalid("value table does not match the chain".into()));
        }
        Ok(TwistedOperatorModel { p: chain.matrix().to_vec(), pi: chain.pi().to_vec(), f, dim })
    }

    pub fn from_markov(base: &MarkovShiftBase, comps: Components) -> Self {
        let f = base
            .values()
            .iter()
            .map(|row| {
                row.iter()
                    .map(|v| match comps {
                        Components::Phi => vec![v[0]],
                        Components::Tau => vec![v[1]],
                        Components::PhiTau => vec![v[0], v[1]],
                    })
                    .collect()
            })
            .collect();
        let chain = base.chain();
        TwistedOperatorModel {
            p: chain.matrix().to_vec(),
            pi: chain.pi().to_vec(),
            f,
            dim: if comps == Components::PhiTau { 2 } else { 1 },
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_states(&self) -> usize {
        self.p.len()
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    /// ν(f) = Σ π_i P(i, j) f(i, j).
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for (i, row) in self.f.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                for k in 0..self.dim {
                    m[k] += self.pi[i] * self.p[i][j] * v[k];
                }
            }
        }
        m
    }

    fn max_abs(&self) -> Vec<f64> {
        let mut m = vec![0.0f64; self.dim];
        for (i, row) in self.f.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if self.p[i][j] > 0.0 {
                    for k in 0..self.dim {
                        m[k] = m[k].max(v[k].abs());
                    }
                }
            }
        }
        m
    }

    fn check_t(&self, t: &[f64]) {
        assert_eq!(t.len(), self.dim, "frequency has the wrong dimension");
    }

    pub fn twisted_matrix(&self, t: &[f64]) -> DMatrix<Complex64> {
        self.check_t(t);
        let n = self.n_states();
        DMatrix::from_fn(n, n, |j, i| {
            let phase: f64 = t.iter().zip(&self.f[i][j]).map(|(a, b)| a * b).sum();
            Complex64::from_polar(self.p[i][j], phase)
        })
    }

    /// E_π exp(i⟨t, S_n⟩) = 1ᵀ P_tⁿ π.
    pub fn characteristic(&self, t: &[f64], n: usize) -> Complex64 {
        let m = self.twisted_matrix(t);
        let mut x = DVector::from_iterator(self.n_states(), self.pi.iter().map(|&p| Complex64::new(p, 0.0)));
        for _ in 0..n {
            x = &m * x;
        }
        x.sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeadingEigen {
    pub lambda: Complex64,
    pub vector: DVector<Complex64>,
    /// |λ₁| − |λ₂|.
    pub gap: f64,
    pub residual: f64,
}

fn sorted_eigenvalues(m: &DMatrix<Complex64>) -> Vec<Complex64> {
    let mut ev: Vec<Complex64> = m.clone().schur().eigenvalues().expect("complex Schur form").iter().cloned().collect();
    ev.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    ev
}

/// Maximal-modulus eigenpair, refined by shifted inverse iteration until
/// ‖P v − λ v‖ ≤ 10⁻¹² with ‖v‖ = 1.
pub fn leading_eigenvalue(m: &DMatrix<Complex64>) -> Result<LeadingEigen, SpectralError> {
    let ev = sorted_eigenvalues(m);
    let l1 = ev[0];
    let m2 = ev.get(1).map_or(0.0, |z| z.norm());
    if l1.norm() - m2 < GAP_TIE {
        return Err(SpectralError::NoGap { t: vec![], lambda: l1, m1: l1.norm(), m2 });
    }
    let n = m.nrows();
    let mut lambda = l1;
    let mut v = DVector::from_element(n, Complex64::new(1.0, 0.0)).normalize();
    let mut residual = f64::INFINITY;
    for _ in 0..12 {
        let shift = lambda + Complex64::new(1e-13 * (1.0 + lambda.norm()), 0.0);
        let a = m - DMatrix::identity(n, n) * shift;
        match a.lu().solve(&v) {
            Some(w) if w.norm() > 0.0 && w.norm().is_finite() => v = w.normalize(),
            _ => {}
        }
        let mv = m * &v;
        lambda = v.dotc(&mv) / v.dotc(&v);
        residual = (mv - &v * lambda).norm();
        if residual <= 1e-12 {
            break;
        }
    }
    let (k, _) = v.iter().enumerate().fold((0, 0.0), |acc, (k, z)| if z.norm() > acc.1 { (k, z.norm()) } else { acc });
    let phase = v[k].conj() / v[k].norm();
    v *= phase;
    Ok(LeadingEigen { lambda, vector: v, gap: lambda.norm() - m2, residual })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub t: Vec<f64>,
    pub lambda: Complex64,
    pub gap: f64,
    pub vector: Option<DVector<Complex64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenCurve {
    pub points: Vec<CurvePoint>,
}

/// λ_t over a grid, computed in parallel and returned in grid order.
pub fn eigen_curve(model: &TwistedOperatorModel, grid: &[Vec<f64>]) -> EigenCurve {
    let points = grid
        .par_iter()
        .map(|t| {
            let m = model.twisted_matrix(t);
            match leading_eigenvalue(&m) {
                Ok(e) => CurvePoint { t: t.clone(), lambda: e.lambda, gap: e.gap, vector: Some(e.vector) },
                Err(SpectralError::NoGap { lambda, .. }) => CurvePoint { t: t.clone(), lambda, gap: 0.0, vector: None },
                Err(e) => unreachable!("{e}"),
            }
        })
        .collect();
    EigenCurve { points }
}

/// Frequencies with |t| log-spaced over [10⁻³, 10⁻¹], in both signs (d = 1)
/// or 24 directions (d = 2).
pub fn fit_grid(dim: usize, per_decade: usize) -> Vec<Vec<f64>> {
    let k = 2 * per_decade;
    let radii: Vec<f64> = (0..=k).map(|i| 10f64.powf(-3.0 + 2.0 * i as f64 / k as f64)).collect();
    let mut out = Vec::new();
    for r in radii {
        if dim == 1 {
            out.push(vec![r]);
            out.push(vec![-r]);
        } else {
            for a in 0..24 {
                let th = a as f64 * std::f64::consts::TAU / 24.0;
                out.push(vec![r * th.cos(), r * th.sin()]);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionFit {
    pub drift: Vec<f64>,
    /// log λ_t ≈ i⟨drift, t⟩ − tᵀ m t.
    pub m: Vec<Vec<f64>>,
    /// Log–log slope of |log λ_t − i⟨drift, t⟩ + tᵀ m t| against |t|.
    pub residual_order: f64,
    /// max_k |drift_k − ν(f)_k|.
    pub drift_error: f64,
}

/// Exponent tuples of all monomials of the given degree in `dim` variables.
fn monomials(dim: usize, degree: u32) -> Vec<Vec<u32>> {
    if dim == 1 {
        vec![vec![degree]]
    } else {
        (0..=degree).rev().map(|a| vec![a, degree - a]).collect()
    }
}

fn eval_mono(t: &[f64], e: &[u32]) -> f64 {
    t.iter().zip(e).map(|(x, k)| x.powi(*k as i32)).product()
}

fn lstsq(rows: &[Vec<f64>], rhs: &[f64]) -> Result<Vec<f64>, SpectralError> {
    let (n, k) = (rows.len(), rows[0].len());
    let mut a = DMatrix::from_fn(n, k, |i, j| rows[i][j]);
    let scales: Vec<f64> = (0..k).map(|j| a.column(j).norm().max(f64::MIN_POSITIVE)).collect();
    for (j, s) in scales.iter().enumerate() {
        a.column_mut(j).scale_mut(1.0 / s);
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let cond = smax / smin;
    if !(cond <= 1e8) {
        return Err(SpectralError::IllConditionedFit(cond));
    }
    let x = svd.solve(&DVector::from_column_slice(rhs), 0.0).map_err(|e| SpectralError::Invalid(e.into()))?;
    Ok(x.iter().zip(&scales).map(|(v, s)| v / s).collect())
}

/// Least-squares fit of log λ_t: the imaginary part against odd monomials of
/// degree 1, 3, 5 and the real part against even monomials of degree 2, 4, 6.
pub fn expansion_fit(curve: &EigenCurve, nu_f: &[f64]) -> Result<ExpansionFit, SpectralError> {
    let dim = nu_f.len();
    let pts: Vec<&CurvePoint> = curve
        .points
        .iter()
        .filter(|p| p.t.iter().any(|x| *x != 0.0) && p.lambda.norm() > 0.0)
        .collect();
    if pts.len() < 12 {
        return Err(SpectralError::Invalid("too few nonzero samples to fit".into()));
    }
    let odd: Vec<Vec<u32>> = [1, 3, 5].iter().flat_map(|&d| monomials(dim, d)).collect();
    let even: Vec<Vec<u32>> = [2, 4, 6].iter().flat_map(|&d| monomials(dim, d)).collect();
    let logs: Vec<Complex64> = pts.iter().map(|p| p.lambda.ln()).collect();
    let odd_rows: Vec<Vec<f64>> = pts.iter().map(|p| odd.iter().map(|e| eval_mono(&p.t, e)).collect()).collect();
    let even_rows: Vec<Vec<f64>> = pts.iter().map(|p| even.iter().map(|e| eval_mono(&p.t, e)).collect()).collect();
    let c_odd = lstsq(&odd_rows, &logs.iter().map(|z| z.im).collect::<Vec<_>>())?;
    let c_even = lstsq(&even_rows, &logs.iter().map(|z| z.re).collect::<Vec<_>>())?;
    let drift: Vec<f64> = c_odd[..dim].to_vec();
    let m = if dim == 1 {
        vec![vec![-c_even[0]]]
    } else {
        // −(m11 t1² + 2 m12 t1 t2 + m22 t2²)
        vec![vec![-c_even[0], -0.5 * c_even[1]], vec![-0.5 * c_even[1], -c_even[2]]]
    };
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (p, z) in pts.iter().zip(&logs) {
        let lin: f64 = p.t.iter().zip(&drift).map(|(a, b)| a * b).sum();
        let quad: f64 = (0..dim).flat_map(|a| (0..dim).map(move |b| (a, b))).map(|(a, b)| p.t[a] * m[a][b] * p.t[b]).sum();
        let r = (z - Complex64::new(-quad, lin)).norm();
        if r > 0.0 {
            xs.push(p.t.iter().map(|x| x * x).sum::<f64>().sqrt().ln());
            ys.push(r.ln());
        }
    }
    let residual_order = slope(&xs, &ys);
    let drift_error = drift.iter().zip(nu_f).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(ExpansionFit { drift, m, residual_order, drift_error })
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FourierMode {
    /// f takes values in (spacing·Z)^d; returns P(S_n − nν(f) = v).
    LatticeExact { spacing: f64 },
    /// E h_d(S_n − nν(f) − v) for the Fejér-type kernel with frequency
    /// cutoff ε.
    Smoothed { eps: f64 },
}

/// h₁(z) = (1 − cos εz)/(π ε² z²), whose transform is supported on |t| < ε.
pub fn fejer_kernel(z: f64, eps: f64) -> f64 {
    let x = eps * z;
    if x.abs() < 1e-4 {
        (1.0 - x * x / 12.0) / (2.0 * std::f64::consts::PI)
    } else {
        (1.0 - x.cos()) / (std::f64::consts::PI * x * x)
    }
}

fn fejer_hat(t: f64, eps: f64) -> f64 {
    if t.abs() < eps {
        1.0 / eps - t.abs() / (eps * eps)
    } else {
        0.0
    }
}

/// Fourier inversion of the characteristic function 1ᵀ P_tⁿ π.
pub fn fourier_lclt(model: &TwistedOperatorModel, n: usize, v: &[f64], mode: FourierMode) -> Result<f64, SpectralError> {
    let dim = model.dim();
    if v.len() != dim {
        return Err(SpectralError::Invalid("target has the wrong dimension".into()));
    }
    let mean = model.mean();
    let center: Vec<f64> = (0..dim).map(|k| n as f64 * mean[k] + v[k]).collect();
    let amp = model.max_abs();
    let (half, weight): (f64, Box<dyn Fn(&[f64]) -> f64 + Sync>) = match mode {
        FourierMode::LatticeExact { spacing } => {
            if !(spacing > 0.0) {
                return Err(SpectralError::Invalid("lattice spacing must be positive".into()));
            }
            for row in &model.f {
                for val in row.iter().flatten() {
                    let k = val / spacing;
                    if (k - k.round()).abs() > 1e-9 {
                        return Err(SpectralError::Invalid(format!("value {val} is off the lattice {spacing}Z")));
                    }
                }
            }
            let norm = (spacing / std::f64::consts::TAU).powi(dim as i32);
            (std::f64::consts::PI / spacing, Box::new(move |_: &[f64]| norm))
        }
        FourierMode::Smoothed { eps } => {
            if !(eps > 0.0) {
                return Err(SpectralError::Invalid("ε must be positive".into()));
            }
            let norm = std::f64::consts::TAU.recip().powi(dim as i32);
            (eps, Box::new(move |t: &[f64]| norm * t.iter().map(|x| fejer_hat(*x, eps)).product::<f64>()))
        }
    };
    let integrand = |t: &[f64]| -> f64 {
        let phase: f64 = t.iter().zip(&center).map(|(a, b)| a * b).sum();
        let w = weight(t);
        if w == 0.0 {
            return 0.0;
        }
        w * (model.characteristic(t, n) * Complex64::from_polar(1.0, -phase)).re
    };
    let panels = |k: usize| -> usize {
        let rate = n as f64 * amp[k] + center[k].abs() + 1.0;
        ((rate * 2.0 * half) / std::f64::consts::FRAC_PI_2).ceil().max(1.0) as usize
    };
    let tol = 1e-12;
    let out = if dim == 1 {
        integrate_panels(|x| integrand(&[x]), -half, half, panels(0), tol, MAX_DEPTH)
    } else {
        let failed = std::cell::Cell::new(false);
        let res = integrate_panels(
            |x| match integrate_panels(|y| integrand(&[x, y]), -half, half, panels(1), tol, MAX_DEPTH) {
                Some(v) => v,
                None => {
                    failed.set(true);
                    0.0
                }
            },
            -half,
            half,
            panels(0),
            tol,
            MAX_DEPTH,
        );
        if failed.get() {
            None
        } else {
            res
        }
    };
    out.ok_or(SpectralError::QuadratureFailure(MAX_DEPTH))
}

/// Grid points whose leading eigenvalue has modulus within 10⁻⁸ of 1.
pub fn unit_modulus_scan(model: &TwistedOperatorModel, grid: &[Vec<f64>]) -> Vec<(Vec<f64>, Complex64)> {
    let hits: Vec<Option<(Vec<f64>, Complex64)>> = grid
        .par_iter()
        .map(|t| {
            let l = sorted_eigenvalues(&model.twisted_matrix(t))[0];
            ((l.norm() - 1.0).abs() <= UNIT_TOL).then(|| (t.clone(), l))
        })
        .collect();
    hits.into_iter().flatten().collect()
}

/// Best rational approximation with denominator at most `max_den`, if it is
/// within `tol`.
pub fn snap_rational(x: f64, max_den: i64, tol: f64) -> Option<(i64, i64)> {
    let (mut h0, mut h1, mut k0, mut k1) = (0i64, 1i64, 1i64, 0i64);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        let (h2, k2) = (a as i64 * h1 + h0, a as i64 * k1 + k0);
        if k2 > max_den {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if (x - h1 as f64 / k1 as f64).abs() <= tol {
            return Some((h1, k1));
        }
        let frac = r - a;
        if frac.abs() < 1e-15 {
            break;
        }
        r = 1.0 / frac;
    }
    None
}

/// Minimal group of a one-dimensional f read off a unit-modulus scan: no
/// nonzero detections give M = R; detections at t*Z give M = (2π/t*)Z with
/// shift arg λ(t*)/t*.
pub fn infer_group_1d(detections: &[(Vec<f64>, Complex64)]) -> Result<LineGroupWithShift, SpectralError> {
    let nonzero: Vec<&(Vec<f64>, Complex64)> = detections.iter().filter(|d| d.0[0].abs() > 1e-12).collect();
    let Some(first) = nonzero.iter().min_by(|a, b| a.0[0].abs().total_cmp(&b.0[0].abs())) else {
        return Ok(LineGroupWithShift::new(LineGroup::Real, QuadScalar::zero()));
    };
    let tstar = first.0[0].abs();
    for d in &nonzero {
        let k = d.0[0] / tstar;
        if (k - k.round()).abs() > 1e-6 {
            return Err(SpectralError::Invalid(format!("detections at {} and {} are not commensurate", tstar, d.0[0])));
        }
    }
    let spacing = std::f64::consts::TAU / tstar;
    let (sp, sq) = snap_rational(spacing, 1000, 1e-6)
        .ok_or_else(|| SpectralError::Invalid(format!("lattice spacing {spacing} is not a small rational")))?;
    let lambda = if first.0[0] > 0.0 { first.1 } else { first.1.conj() };
    let r = (lambda.arg() / tstar).rem_euclid(spacing);
    let (rp, rq) = snap_rational(r, 1000, 1e-6).ok_or_else(|| SpectralError::Invalid(format!("shift {r} is not a small rational")))?;
    Ok(LineGroupWithShift::new(LineGroup::Lattice(QuadScalar::ratio(sp, sq)), QuadScalar::ratio(rp, rq)))
}

/// Floating description of a closed subgroup of R² inferred from a
/// two-dimensional scan.
#[derive(Debug, Clone, PartialEq)]
pub struct InferredGroup2 {
    pub linear_dirs: Vec<[f64; 2]>,
    pub lattice: Vec<[f64; 2]>,
}

pub fn infer_group_2d(detections: &[(Vec<f64>, Complex64)]) -> InferredGroup2 {
    let mut nonzero: Vec<[f64; 2]> = detections
        .iter()
        .map(|d| [d.0[0], d.0[1]])
        .filter(|t| t[0].hypot(t[1]) > 1e-12)
        .collect();
    nonzero.sort_by(|a, b| a[0].hypot(a[1]).total_cmp(&b[0].hypot(b[1])));
    let Some(t1) = nonzero.first().copied() else {
        return InferredGroup2 { linear_dirs: vec![[1.0, 0.0], [0.0, 1.0]], lattice: vec![] };
    };
    let t2 = nonzero.iter().find(|t| (t1[0] * t[1] - t1[1] * t[0]).abs() > 1e-6 * t1[0].hypot(t1[1]) * t[0].hypot(t[1]));
    let tau = std::f64::consts::TAU;
    match t2 {
        None => {
            let n = t1[0].hypot(t1[1]);
            let u = [t1[0] / n, t1[1] / n];
            InferredGroup2 { linear_dirs: vec![[-u[1], u[0]]], lattice: vec![[tau / n * u[0], tau / n * u[1]]] }
        }
        Some(t2) => {
            let det = t1[0] * t2[1] - t1[1] * t2[0];
            // columns of 2π·B^{-T} with B = [t1 t2]
            let b1 = [tau * t2[1] / det, -tau * t2[0] / det];
            let b2 = [-tau * t1[1] / det, tau * t1[0] / det];
            InferredGroup2 { linear_dirs: vec![], lattice: vec![b1, b2] }
        }
    }
}
