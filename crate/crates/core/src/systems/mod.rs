//! Suspension flows over three kinds of base dynamics: iid reward renewal,
//! finite Markov shifts and the Pomeau–Manneville first-return map.

mod markov;
mod pm;
mod renewal;
pub mod spec;

use thiserror::Error;

pub use markov::{MarkovChain, MarkovShiftBase, MarkovState};
pub use pm::{
    induced_observable, pm_first_return, pm_map, pm_tail_counts, tail_slope, PMTowerBase, PmChunk, PmObservable, PmRoof,
    PmState,
};
pub use renewal::{RenewalAtom, RenewalBase};

use crate::rng::SimRng;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SystemError {
    #[error("first return from x = {x} exceeded {cap} iterations")]
    ReturnTimeOverflow { x: f64, cap: u64 },
    #[error("invalid system: {0}")]
    Invalid(String),
    #[error("malformed system spec: {0}")]
    Parse(String),
}

/// A point (x, s) of the suspension space, 0 ≤ s < τ(x).
#[derive(Debug, Clone, PartialEq)]
pub struct FlowPoint<S> {
    pub base: S,
    pub s: f64,
}

/// How φ̌(x) is spread over the fiber [0, τ(x)).
#[derive(Debug, Clone, PartialEq)]
pub enum ObservableProfile {
    ConstantRate,
    /// Piecewise-constant shape on equal sub-intervals of the fiber,
    /// rescaled to mean 1.
    Tabulated(Vec<f64>),
}

impl ObservableProfile {
    pub fn tabulated(samples: Vec<f64>) -> Result<Self, SystemError> {
        let mean = samples.iter().sum::<f64>() / samples.len().max(1) as f64;
        if samples.is_empty() || !mean.is_finite() || mean == 0.0 {
            return Err(SystemError::Invalid("profile samples must have nonzero finite mean".into()));
        }
        Ok(ObservableProfile::Tabulated(samples.iter().map(|w| w / mean).collect()))
    }

    /// ∫_a^b φ(x, u) du for a cell with section value `phi` and height `tau`.
    pub fn partial(&self, phi: f64, tau: f64, a: f64, b: f64) -> f64 {
        match self {
            ObservableProfile::ConstantRate => phi * (b - a) / tau,
            ObservableProfile::Tabulated(w) => phi * (cumulative(w, b / tau) - cumulative(w, a / tau)),
        }
    }
}

fn cumulative(w: &[f64], v: f64) -> f64 {
    let k = w.len() as f64;
    let v = v.clamp(0.0, 1.0);
    let pos = v * k;
    let full = (pos.floor() as usize).min(w.len());
    let mut acc: f64 = w[..full].iter().sum();
    if full < w.len() {
        acc += w[full] * (pos - full as f64);
    }
    acc / k
}

/// A suspension flow: base dynamics, roof τ and section observable φ̌.
pub trait SuspensionSystem: Send + Sync {
    type State: Clone + Send + Sync + std::fmt::Debug;
    /// Per-worker mutable sampling state (an orbit for deterministic bases).
    type Chunk: Send;

    fn roof(&self, state: &Self::State) -> f64;
    fn phi_check(&self, state: &Self::State) -> f64;
    fn inf_roof(&self) -> f64;
    fn profile(&self) -> &ObservableProfile;
    fn step_base(&self, state: &Self::State, rng: &mut SimRng) -> Result<Self::State, SystemError>;
    fn begin_chunk(&self, rng: &mut SimRng) -> Result<Self::Chunk, SystemError>;
    /// A base point distributed by ν.
    fn sample_base(&self, chunk: &mut Self::Chunk, rng: &mut SimRng) -> Result<Self::State, SystemError>;
    /// A point distributed by μ = ν ⊗ Leb / ν(τ).
    fn sample_stationary(
        &self,
        chunk: &mut Self::Chunk,
        rng: &mut SimRng,
    ) -> Result<FlowPoint<Self::State>, SystemError>;
    fn end_trajectory(&self, _chunk: &mut Self::Chunk, _end: &FlowPoint<Self::State>) {}
    /// Stable textual description used for hashing run configurations.
    fn describe(&self) -> String;
}

/// One-off stationary sample with a fresh chunk.
pub fn sample_stationary<S: SuspensionSystem>(sys: &S, rng: &mut SimRng) -> Result<FlowPoint<S::State>, SystemError> {
    let mut chunk = sys.begin_chunk(rng)?;
    sys.sample_stationary(&mut chunk, rng)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowOutcome<S> {
    /// ∫₀ᵗ φ(Φ^u(start)) du.
    pub integral: f64,
    /// S_φ̌(N, x): section values of all cells completed before t + s.
    pub completed_sum: f64,
    pub end: FlowPoint<S>,
    /// N = N_{t+s}(x), the number of roof crossings.
    pub n_crossings: u64,
}

impl<S> FlowOutcome<S> {
    /// Integral with the partial-cell contributions removed at both ends.
    pub fn cell_sum(&self) -> f64 {
        self.completed_sum
    }
}

pub fn flow_integrate<S: SuspensionSystem>(
    sys: &S,
    start: &FlowPoint<S::State>,
    t: f64,
    rng: &mut SimRng,
) -> Result<FlowOutcome<S::State>, SystemError> {
    assert!(t >= 0.0, "negative flow time");
    let profile = sys.profile();
    let target = start.s + t;
    let mut state = start.base.clone();
    let mut tau = sys.roof(&state);
    let mut phi = sys.phi_check(&state);
    let head = profile.partial(phi, tau, 0.0, start.s);
    let inf = sys.inf_roof();
    let mut origin = 0.0;
    let mut completed = 0.0;
    let mut n = 0u64;
    while origin + tau <= target {
        completed += phi;
        origin += tau;
        n += 1;
        state = sys.step_base(&state, rng)?;
        tau = sys.roof(&state);
        phi = sys.phi_check(&state);
        assert!(tau >= inf, "roof value {tau} below its infimum {inf}");
    }
    let s_end = target - origin;
    assert!(origin <= target && target < origin + tau);
    let tail = profile.partial(phi, tau, 0.0, s_end);
    Ok(FlowOutcome {
        integral: completed + tail - head,
        completed_sum: completed,
        end: FlowPoint { base: state, s: s_end },
        n_crossings: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tabulated_profile_integrates_to_section_value() {
        let p = ObservableProfile::tabulated(vec![1.0, 3.0, 0.5, 2.0, 0.0]).unwrap();
        for (phi, tau) in [(1.0, 1.0), (-2.5, 0.3), (7.0, 4.2)] {
            assert!((p.partial(phi, tau, 0.0, tau) - phi).abs() < 1e-10);
            let split = p.partial(phi, tau, 0.0, 0.37 * tau) + p.partial(phi, tau, 0.37 * tau, tau);
            assert!((split - phi).abs() < 1e-10);
        }
        assert!((ObservableProfile::ConstantRate.partial(3.0, 2.0, 0.0, 2.0) - 3.0).abs() < 1e-15);
    }
}
