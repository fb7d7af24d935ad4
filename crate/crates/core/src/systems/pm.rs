use rand::Rng;

use super::{FlowPoint, ObservableProfile, SuspensionSystem, SystemError};
use crate::rng::{substream, SimRng};

const RETURN_CAP: u64 = 1_000_000;
const BURN_IN: usize = 10_000;
const STRIDE: usize = 16;
const CENTERING_STEPS: usize = 4_000_000;
const CENTERING_SEED: u64 = 0x5eed_0f_9a11;

/// The Pomeau–Manneville map F on [0, 1].
pub fn pm_map(x: f64, alpha: f64) -> f64 {
    if x <= 0.5 {
        x * (1.0 + (2.0 * x).powf(alpha))
    } else {
        2.0 * x - 1.0
    }
}

/// Walks the excursion of x ∈ (1/2, 1] until it re-enters (1/2, 1],
/// feeding every visited point (x included, the landing point excluded) to
/// `visit`.
fn excursion(x: f64, alpha: f64, mut visit: impl FnMut(f64)) -> Result<(f64, u64), SystemError> {
    if !(x > 0.5 && x <= 1.0) {
        return Err(SystemError::Invalid(format!("{x} is outside (1/2, 1]")));
    }
    visit(x);
    let mut y = 2.0 * x - 1.0;
    let mut r = 1u64;
    while y <= 0.5 {
        if r >= RETURN_CAP || y <= 0.0 {
            return Err(SystemError::ReturnTimeOverflow { x, cap: RETURN_CAP });
        }
        visit(y);
        y = pm_map(y, alpha);
        r += 1;
    }
    Ok((y, r))
}

/// First return to (1/2, 1]: the landing point and the return time.
pub fn pm_first_return(x: f64, alpha: f64) -> Result<(f64, u64), SystemError> {
    excursion(x, alpha, |_| {})
}

/// Σ_{i<r(x)} f(Fⁱx).
pub fn induced_observable(alpha: f64, f: impl Fn(f64) -> f64, x: f64) -> Result<f64, SystemError> {
    let mut acc = 0.0;
    excursion(x, alpha, |y| acc += f(y))?;
    Ok(acc)
}

/// Ambient roof functions υ on [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PmRoof {
    Unit,
    Affine,
}

impl PmRoof {
    pub fn from_id(id: &str) -> Result<Self, SystemError> {
        match id {
            "unit" => Ok(PmRoof::Unit),
            "affine" => Ok(PmRoof::Affine),
            _ => Err(SystemError::Parse(format!("unknown roof {id:?} (expected unit or affine)"))),
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            PmRoof::Unit => "unit",
            PmRoof::Affine => "affine",
        }
    }

    pub fn eval(&self, y: f64) -> f64 {
        match self {
            PmRoof::Unit => 1.0,
            PmRoof::Affine => 1.0 + 0.5 * y,
        }
    }
}

/// Ambient observables g on [0, 1]; all but `Zero` are centered so that the
/// induced sum has ν-mean zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PmObservable {
    Zero,
    IdentityCentered,
    Cos2piCentered,
    SquareCentered,
}

impl PmObservable {
    pub fn from_id(id: &str) -> Result<Self, SystemError> {
        match id {
            "zero" => Ok(PmObservable::Zero),
            "identity_centered" => Ok(PmObservable::IdentityCentered),
            "cos2pi_centered" => Ok(PmObservable::Cos2piCentered),
            "square_centered" => Ok(PmObservable::SquareCentered),
            _ => Err(SystemError::Parse(format!(
                "unknown observable {id:?} (expected zero, identity_centered, cos2pi_centered or square_centered)"
            ))),
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            PmObservable::Zero => "zero",
            PmObservable::IdentityCentered => "identity_centered",
            PmObservable::Cos2piCentered => "cos2pi_centered",
            PmObservable::SquareCentered => "square_centered",
        }
    }

    /// The uncentered function.
    pub fn raw(&self, y: f64) -> f64 {
        match self {
            PmObservable::Zero => 0.0,
            PmObservable::IdentityCentered => y,
            PmObservable::Cos2piCentered => (std::f64::consts::TAU * y).cos(),
            PmObservable::SquareCentered => y * y,
        }
    }
}

/// One cell of the induced tower: base point, its image, return time and
/// the induced roof and observable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmState {
    pub x: f64,
    pub tx: f64,
    pub r: u64,
    pub tau: f64,
    pub phi: f64,
}

/// A worker's private orbit of the induced map.
#[derive(Debug, Clone)]
pub struct PmChunk {
    current: PmState,
    /// Flow coordinate inside `current`.
    s: f64,
}

#[derive(Debug, Clone)]
pub struct PMTowerBase {
    alpha: f64,
    roof: PmRoof,
    obs: PmObservable,
    center: f64,
    inf_tau: f64,
    profile: ObservableProfile,
}

impl PMTowerBase {
    /// Builds the tower and estimates the centering constant
    /// ν(Σ g)/ν(r) from a fixed-seed orbit.
    pub fn new(alpha: f64, roof: PmRoof, obs: PmObservable) -> Result<Self, SystemError> {
        if !(alpha > 0.0 && alpha < 0.5) {
            return Err(SystemError::Invalid(format!("alpha = {alpha} must lie in (0, 1/2)")));
        }
        let mut sys = PMTowerBase { alpha, roof, obs, center: 0.0, inf_tau: 1.0, profile: ObservableProfile::ConstantRate };
        if obs != PmObservable::Zero {
            let mut rng = substream(CENTERING_SEED, 0);
            let mut chunk = sys.begin_chunk(&mut rng)?;
            let (mut g, mut r) = (0.0, 0u64);
            for _ in 0..CENTERING_STEPS {
                let st = sys.advance(&mut chunk, &mut rng)?;
                g += induced_observable(alpha, |y| obs.raw(y), st.x)?;
                r += st.r;
            }
            sys.center = g / r as f64;
        }
        Ok(sys)
    }

    pub fn with_profile(mut self, profile: ObservableProfile) -> Self {
        self.profile = profile;
        self
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn roof_id(&self) -> PmRoof {
        self.roof
    }

    pub fn observable_id(&self) -> PmObservable {
        self.obs
    }

    /// Full cell data for a base point x ∈ (1/2, 1].
    pub fn cell(&self, x: f64) -> Result<PmState, SystemError> {
        let (mut tau, mut phi) = (0.0, 0.0);
        let (roof, obs, c) = (self.roof, self.obs, self.center);
        let (tx, r) = excursion(x, self.alpha, |y| {
            tau += roof.eval(y);
            phi += obs.raw(y) - c;
        })?;
        Ok(PmState { x, tx, r, tau, phi })
    }

    fn fresh(&self, rng: &mut SimRng) -> Result<PmState, SystemError> {
        loop {
            let x = 1.0 - 0.5 * rng.random::<f64>();
            if let Ok(st) = self.cell(x) {
                if st.tx < 1.0 {
                    return Ok(st);
                }
            }
        }
    }

    /// Next cell along the orbit, restarting from a fresh point if the
    /// floating-point orbit hits the fixed point 1 or escapes the cap.
    fn next_cell(&self, st: &PmState, rng: &mut SimRng) -> Result<PmState, SystemError> {
        if st.tx >= 1.0 {
            return self.fresh(rng);
        }
        match self.cell(st.tx) {
            Ok(next) => Ok(next),
            Err(SystemError::ReturnTimeOverflow { .. }) => self.fresh(rng),
            Err(e) => Err(e),
        }
    }

    fn advance(&self, chunk: &mut PmChunk, rng: &mut SimRng) -> Result<PmState, SystemError> {
        let next = self.next_cell(&chunk.current, rng)?;
        chunk.current = next;
        Ok(next)
    }
}

impl SuspensionSystem for PMTowerBase {
    type State = PmState;
    type Chunk = PmChunk;

    fn roof(&self, s: &PmState) -> f64 {
        s.tau
    }

    fn phi_check(&self, s: &PmState) -> f64 {
        s.phi
    }

    fn inf_roof(&self) -> f64 {
        self.inf_tau
    }

    fn profile(&self) -> &ObservableProfile {
        &self.profile
    }

    fn step_base(&self, s: &PmState, rng: &mut SimRng) -> Result<PmState, SystemError> {
        self.next_cell(s, rng)
    }

    fn begin_chunk(&self, rng: &mut SimRng) -> Result<PmChunk, SystemError> {
        let mut chunk = PmChunk { current: self.fresh(rng)?, s: 0.0 };
        for _ in 0..BURN_IN {
            self.advance(&mut chunk, rng)?;
        }
        chunk.s = rng.random::<f64>() * chunk.current.tau;
        Ok(chunk)
    }

    fn sample_base(&self, chunk: &mut PmChunk, rng: &mut SimRng) -> Result<PmState, SystemError> {
        for _ in 0..STRIDE {
            self.advance(chunk, rng)?;
        }
        chunk.s = 0.0;
        Ok(chunk.current)
    }

    /// Flows the orbit forward by a time uniform on [STRIDE, 2·STRIDE),
    /// drawn independently of the orbit, so a μ-distributed point stays
    /// μ-distributed.
    fn sample_stationary(&self, chunk: &mut PmChunk, rng: &mut SimRng) -> Result<FlowPoint<PmState>, SystemError> {
        let mut s = chunk.s + STRIDE as f64 * (1.0 + rng.random::<f64>());
        while s >= chunk.current.tau {
            s -= chunk.current.tau;
            self.advance(chunk, rng)?;
        }
        chunk.s = s;
        Ok(FlowPoint { base: chunk.current, s })
    }

    fn end_trajectory(&self, chunk: &mut PmChunk, end: &FlowPoint<PmState>) {
        chunk.current = end.base;
        chunk.s = end.s;
    }

    fn describe(&self) -> String {
        format!(
            "pm alpha={:.17e} roof={} phi={} center={:.17e} profile={:?}",
            self.alpha,
            self.roof.id(),
            self.obs.id(),
            self.center,
            self.profile
        )
    }
}

/// counts[n] = #{samples with r > n} for n = 0..=n_max, over `n_samples`
/// points of a burned-in orbit of the induced map.
pub fn pm_tail_counts(alpha: f64, n_samples: u64, n_max: usize, seed: u64) -> Result<Vec<u64>, SystemError> {
    let sys = PMTowerBase::new(alpha, PmRoof::Unit, PmObservable::Zero)?;
    let mut rng = substream(seed, 0);
    let mut chunk = sys.begin_chunk(&mut rng)?;
    let mut hist = vec![0u64; n_max + 2];
    for _ in 0..n_samples {
        let st = sys.advance(&mut chunk, &mut rng)?;
        hist[(st.r as usize).min(n_max + 1)] += 1;
    }
    let mut counts = vec![0u64; n_max + 1];
    let mut above = 0u64;
    for n in (0..=n_max).rev() {
        above += hist[n + 1];
        counts[n] = above;
    }
    Ok(counts)
}

/// Least-squares slope of log(counts[n]) against log n over n ∈ [lo, hi],
/// skipping empty bins.
pub fn tail_slope(counts: &[u64], lo: usize, hi: usize) -> f64 {
    let pts: Vec<(f64, f64)> = (lo.max(1)..=hi.min(counts.len() - 1))
        .filter(|&n| counts[n] > 0)
        .map(|n| ((n as f64).ln(), (counts[n] as f64).ln()))
        .collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_return_examples() {
        assert_eq!(pm_first_return(1.0, 0.25).unwrap(), (1.0, 1));
        let (tx, r) = pm_first_return(0.75, 0.25).unwrap();
        assert_eq!(r, 2);
        assert!((tx - 1.0).abs() < 1e-15);
        let (tx, r) = pm_first_return(0.9, 0.25).unwrap();
        assert_eq!(r, 1);
        assert!((tx - 0.8).abs() < 1e-15);
        assert!(pm_first_return(0.4, 0.25).is_err());
    }

    #[test]
    fn induced_sums() {
        assert!((induced_observable(0.25, |y| y, 0.75).unwrap() - 1.25).abs() < 1e-15);
        for x in [0.51, 0.6, 0.7501, 0.99] {
            let (_, r) = pm_first_return(x, 0.3).unwrap();
            assert_eq!(induced_observable(0.3, |_| 1.0, x).unwrap(), r as f64);
        }
    }

    #[test]
    fn long_excursion_near_half() {
        let (tx, r) = pm_first_return(0.5 + 1e-9, 0.25).unwrap();
        assert!(r > 100 && tx > 0.5);
    }

    #[test]
    fn step_from_point_nine() {
        let sys = PMTowerBase::new(0.25, PmRoof::Unit, PmObservable::Zero).unwrap();
        let st = sys.cell(0.9).unwrap();
        let next = sys.step_base(&st, &mut substream(0, 0)).unwrap();
        assert!((next.x - 0.8).abs() < 1e-15);
        assert_eq!(st.tau, 1.0);
    }

    #[test]
    fn centered_observable_has_small_mean() {
        let sys = PMTowerBase::new(0.25, PmRoof::Affine, PmObservable::Cos2piCentered).unwrap();
        let mut rng = substream(77, 0);
        let mut chunk = sys.begin_chunk(&mut rng).unwrap();
        let (mut phi, mut tau) = (0.0, 0.0);
        let n = 400_000;
        for _ in 0..n {
            let st = sys.advance(&mut chunk, &mut rng).unwrap();
            phi += st.phi;
            tau += st.tau;
            assert!(st.tau >= sys.inf_roof());
        }
        assert!((phi / n as f64).abs() < 0.01, "{}", phi / n as f64);
        assert!(tau / n as f64 > 1.0);
    }

    #[test]
    fn tail_counts_are_monotone() {
        let c = pm_tail_counts(0.25, 20_000, 40, 1).unwrap();
        assert_eq!(c[0], 20_000);
        assert!(c.windows(2).all(|w| w[0] >= w[1]));
    }
}
