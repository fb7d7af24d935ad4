use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::Rng;

use super::{FlowPoint, ObservableProfile, SuspensionSystem, SystemError};
use crate::groups::{QVec, QuadScalar};
use crate::rng::SimRng;

/// One atom of the joint law of (X, Y): reward x, duration y.
#[derive(Debug, Clone, PartialEq)]
pub struct RenewalAtom {
    pub x: QuadScalar,
    pub y: QuadScalar,
    pub prob: BigRational,
}

/// iid reward renewal: the base is the full shift over the atoms, the roof
/// is the duration and φ̌ the reward.
#[derive(Debug, Clone)]
pub struct RenewalBase {
    exact: Option<Vec<RenewalAtom>>,
    x: Vec<f64>,
    y: Vec<f64>,
    p: Vec<f64>,
    cum: Vec<f64>,
    cum_biased: Vec<f64>,
    nu_tau: f64,
    inf_tau: f64,
    profile: ObservableProfile,
}

fn cumulative(w: &[f64]) -> Vec<f64> {
    let total: f64 = w.iter().sum();
    let mut acc = 0.0;
    let mut out: Vec<f64> = w
        .iter()
        .map(|v| {
            acc += v / total;
            acc
        })
        .collect();
    if let Some(last) = out.last_mut() {
        *last = 1.0;
    }
    out
}

fn pick(cum: &[f64], u: f64) -> usize {
    cum.iter().position(|&c| u < c).unwrap_or(cum.len() - 1)
}

impl RenewalBase {
    /// Exact atoms: probabilities must sum to 1, durations must be positive
    /// and the mean reward must vanish.
    pub fn new(atoms: Vec<RenewalAtom>) -> Result<Self, SystemError> {
        if atoms.is_empty() {
            return Err(SystemError::Invalid("no atoms".into()));
        }
        let total: BigRational = atoms.iter().map(|a| a.prob.clone()).sum();
        if total != BigRational::from_integer(1.into()) {
            return Err(SystemError::Invalid(format!("probabilities sum to {total}, not 1")));
        }
        if atoms.iter().any(|a| !a.y.is_positive() || a.prob <= BigRational::zero()) {
            return Err(SystemError::Invalid("durations and probabilities must be positive".into()));
        }
        let mean = atoms
            .iter()
            .fold(QuadScalar::zero(), |acc, a| &acc + &(&a.x * &QuadScalar::rational(a.prob.clone())));
        if !mean.is_zero() {
            return Err(SystemError::Invalid(format!("mean reward is {mean}, not 0")));
        }
        let f: Vec<(f64, f64, f64)> = atoms
            .iter()
            .map(|a| (a.x.to_f64(), a.y.to_f64(), a.prob.to_f64().unwrap()))
            .collect();
        let mut base = Self::build(f)?;
        base.exact = Some(atoms);
        Ok(base)
    }

    /// Atoms given as floating (x, y, p) triples; the mean reward must vanish
    /// to 1e-12.
    pub fn from_f64(atoms: &[(f64, f64, f64)]) -> Result<Self, SystemError> {
        let ptot: f64 = atoms.iter().map(|a| a.2).sum();
        if (ptot - 1.0).abs() > 1e-12 {
            return Err(SystemError::Invalid(format!("probabilities sum to {ptot}")));
        }
        let mean: f64 = atoms.iter().map(|a| a.0 * a.2).sum();
        if mean.abs() > 1e-12 {
            return Err(SystemError::Invalid(format!("mean reward is {mean}, not 0")));
        }
        Self::build(atoms.to_vec())
    }

    fn build(atoms: Vec<(f64, f64, f64)>) -> Result<Self, SystemError> {
        if atoms.is_empty() || atoms.iter().any(|a| !(a.1 > 0.0) || !(a.2 > 0.0)) {
            return Err(SystemError::Invalid("durations and probabilities must be positive".into()));
        }
        let x: Vec<f64> = atoms.iter().map(|a| a.0).collect();
        let y: Vec<f64> = atoms.iter().map(|a| a.1).collect();
        let p: Vec<f64> = atoms.iter().map(|a| a.2).collect();
        let nu_tau = y.iter().zip(&p).map(|(y, p)| y * p).sum();
        let biased: Vec<f64> = y.iter().zip(&p).map(|(y, p)| y * p).collect();
        Ok(RenewalBase {
            exact: None,
            cum: cumulative(&p),
            cum_biased: cumulative(&biased),
            inf_tau: y.iter().cloned().fold(f64::INFINITY, f64::min),
            nu_tau,
            x,
            y,
            p,
            profile: ObservableProfile::ConstantRate,
        })
    }

    pub fn with_profile(mut self, profile: ObservableProfile) -> Self {
        self.profile = profile;
        self
    }

    /// The three atoms (−1, 2−√2), (0, 1), (1, √2−1), each with probability 1/3.
    pub fn counterexample() -> Self {
        let q = |p: i64, s: i64| QuadScalar::from_ints(p, s, 2);
        let third = BigRational::new(1.into(), 3.into());
        Self::new(vec![
            RenewalAtom { x: q(-1, 0), y: q(2, -1), prob: third.clone() },
            RenewalAtom { x: q(0, 0), y: q(1, 0), prob: third.clone() },
            RenewalAtom { x: q(1, 0), y: q(-1, 1), prob: third },
        ])
        .expect("valid atoms")
    }

    /// Atoms (−1, 1), (0, √2), (1, √3) with probability 1/3 each.
    pub fn non_arithmetic() -> Self {
        let t = 1.0 / 3.0;
        Self::from_f64(&[(-1.0, 1.0, t), (0.0, 2f64.sqrt(), t), (1.0, 3f64.sqrt(), t)]).expect("valid atoms")
    }

    pub fn exact_atoms(&self) -> Option<&[RenewalAtom]> {
        self.exact.as_deref()
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn atom(&self, i: usize) -> (f64, f64, f64) {
        (self.x[i], self.y[i], self.p[i])
    }

    pub fn nu_tau(&self) -> f64 {
        self.nu_tau
    }

    /// Exact covariance of (X, Y) as floats.
    pub fn covariance(&self) -> [[f64; 2]; 2] {
        let mx: f64 = self.x.iter().zip(&self.p).map(|(x, p)| x * p).sum();
        let my = self.nu_tau;
        let mut c = [[0.0; 2]; 2];
        for i in 0..self.len() {
            let dx = self.x[i] - mx;
            let dy = self.y[i] - my;
            c[0][0] += self.p[i] * dx * dx;
            c[0][1] += self.p[i] * dx * dy;
            c[1][1] += self.p[i] * dy * dy;
        }
        c[1][0] = c[0][1];
        c
    }

    /// Closed walks for the minimal-group computation: each atom is a cycle
    /// of length one.
    pub fn cycles(&self) -> Option<Vec<(QVec, i64)>> {
        self.exact.as_ref().map(|atoms| atoms.iter().map(|a| ([a.x.clone(), a.y.clone()], 1)).collect())
    }

    /// Exact τ values, for the mixing criterion.
    pub fn tau_values(&self) -> Option<Vec<QuadScalar>> {
        self.exact.as_ref().map(|atoms| atoms.iter().map(|a| a.y.clone()).collect())
    }

    pub fn draw(&self, rng: &mut SimRng) -> usize {
        pick(&self.cum, rng.random::<f64>())
    }
}

impl SuspensionSystem for RenewalBase {
    type State = usize;
    type Chunk = ();

    fn roof(&self, state: &usize) -> f64 {
        self.y[*state]
    }

    fn phi_check(&self, state: &usize) -> f64 {
        self.x[*state]
    }

    fn inf_roof(&self) -> f64 {
        self.inf_tau
    }

    fn profile(&self) -> &ObservableProfile {
        &self.profile
    }

    fn step_base(&self, _state: &usize, rng: &mut SimRng) -> Result<usize, SystemError> {
        Ok(self.draw(rng))
    }

    fn begin_chunk(&self, _rng: &mut SimRng) -> Result<(), SystemError> {
        Ok(())
    }

    fn sample_base(&self, _chunk: &mut (), rng: &mut SimRng) -> Result<usize, SystemError> {
        Ok(self.draw(rng))
    }

    fn sample_stationary(&self, _chunk: &mut (), rng: &mut SimRng) -> Result<FlowPoint<usize>, SystemError> {
        let i = pick(&self.cum_biased, rng.random::<f64>());
        let s = rng.random::<f64>() * self.y[i];
        Ok(FlowPoint { base: i, s })
    }

    fn describe(&self) -> String {
        let atoms: Vec<String> = (0..self.len())
            .map(|i| format!("({:.17e},{:.17e},{:.17e})", self.x[i], self.y[i], self.p[i]))
            .collect();
        format!("renewal[{}] profile={:?}", atoms.join(","), self.profile)
    }
}
