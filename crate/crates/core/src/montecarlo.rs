//! Seeded parallel Monte Carlo for flow integrals.
//!
//! Samples are grouped into chunks of `chunk_size`; chunk c draws from
//! `substream(seed, c)` and tallies are merged in chunk order, so outputs
//! depend on (seed, n, chunk_size) but not on the number of workers.

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::rng::{substream, SimRng};
use crate::systems::{flow_integrate, FlowPoint, SuspensionSystem, SystemError};

pub const DEFAULT_CHUNK: u64 = 256;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum McError {
    #[error(transparent)]
    System(#[from] SystemError),
    #[error("{0}")]
    Invalid(String),
    #[error("thread pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    pub n: u64,
    pub seed: u64,
    pub workers: usize,
    pub chunk_size: u64,
}

impl McConfig {
    pub fn new(n: u64, seed: u64) -> Self {
        McConfig { n, seed, workers: 1, chunk_size: DEFAULT_CHUNK }
    }

    pub fn workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    fn chunks(&self) -> u64 {
        self.n.div_ceil(self.chunk_size.max(1))
    }

    fn chunk_len(&self, c: u64) -> u64 {
        let k = self.chunk_size.max(1);
        k.min(self.n - c * k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateWithCI {
    pub point: f64,
    pub std_error: f64,
    pub n_samples: u64,
    pub seed: u64,
}

impl EstimateWithCI {
    /// Scaled Bernoulli tally: point = scale·k/n, SE = scale·√(p(1−p)/n).
    pub fn bernoulli(hits: u64, n: u64, scale: f64, seed: u64) -> Self {
        let p = if n == 0 { 0.0 } else { hits as f64 / n as f64 };
        let se = if n == 0 { 0.0 } else { (p * (1.0 - p) / n as f64).sqrt() };
        EstimateWithCI { point: scale * p, std_error: scale * se, n_samples: n, seed }
    }

    /// |point − target| ≤ k·SE + rel·|target|.
    pub fn agrees(&self, target: f64, k: f64, rel: f64) -> bool {
        (self.point - target).abs() <= k * self.std_error + rel * target.abs()
    }
}

/// Runs `f` once per chunk and returns the results in chunk order.
pub fn map_chunks<S, A, F>(sys: &S, cfg: &McConfig, f: F) -> Result<Vec<A>, McError>
where
    S: SuspensionSystem,
    A: Send,
    F: Fn(&mut S::Chunk, &mut SimRng, u64) -> Result<A, SystemError> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| McError::Pool(e.to_string()))?;
    let run = |c: u64| -> Result<A, SystemError> {
        let mut rng = substream(cfg.seed, c);
        let mut chunk = sys.begin_chunk(&mut rng)?;
        f(&mut chunk, &mut rng, cfg.chunk_len(c))
    };
    let out = pool.install(|| (0..cfg.chunks()).into_par_iter().map(run).collect::<Result<Vec<A>, SystemError>>())?;
    Ok(out)
}

/// Window w√t + [lo, hi] for the flow integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub w: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramSpec {
    pub t: f64,
    pub windows: Vec<Window>,
}

impl HistogramSpec {
    pub fn new(t: f64, windows: Vec<Window>) -> Result<Self, McError> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(McError::Invalid(format!("flow time {t} must be finite and non-negative")));
        }
        for w in &windows {
            if !(w.lo.is_finite() && w.hi.is_finite() && w.w.is_finite() && w.lo <= w.hi) {
                return Err(McError::Invalid(format!("window {w:?} is not a finite interval")));
            }
        }
        let rt = t.sqrt();
        let mut spans: Vec<(f64, f64)> = windows.iter().map(|w| (w.w * rt + w.lo, w.w * rt + w.hi)).collect();
        spans.sort_by(|a, b| a.0.total_cmp(&b.0));
        if spans.windows(2).any(|p| p[1].0 <= p[0].1) {
            return Err(McError::Invalid("windows overlap after centering".into()));
        }
        Ok(HistogramSpec { t, windows })
    }
}

/// Flow integrals ∫₀ᵗ φ(Φ^s x) ds from N stationary starts, in sample order.
pub fn sample_integrals<S: SuspensionSystem>(sys: &S, t: f64, cfg: &McConfig) -> Result<Vec<f64>, McError> {
    let parts = map_chunks(sys, cfg, |chunk, rng, len| {
        let mut out = Vec::with_capacity(len as usize);
        for _ in 0..len {
            let start = sys.sample_stationary(chunk, rng)?;
            let o = flow_integrate(sys, &start, t, rng)?;
            sys.end_trajectory(chunk, &o.end);
            out.push(o.integral);
        }
        Ok(out)
    })?;
    Ok(parts.concat())
}

/// √t × fraction of stationary trajectories whose integral lands in each
/// window.
pub fn estimate_lclt<S: SuspensionSystem>(sys: &S, spec: &HistogramSpec, cfg: &McConfig) -> Result<Vec<EstimateWithCI>, McError> {
    let rt = spec.t.sqrt();
    let spans: Vec<(f64, f64)> = spec.windows.iter().map(|w| (w.w * rt + w.lo, w.w * rt + w.hi)).collect();
    let parts = map_chunks(sys, cfg, |chunk, rng, len| {
        let mut hits = vec![0u64; spans.len()];
        for _ in 0..len {
            let start = sys.sample_stationary(chunk, rng)?;
            let o = flow_integrate(sys, &start, spec.t, rng)?;
            sys.end_trajectory(chunk, &o.end);
            if let Some(k) = spans.iter().position(|(a, b)| *a <= o.integral && o.integral <= *b) {
                hits[k] += 1;
            }
        }
        Ok(hits)
    })?;
    let mut hits = vec![0u64; spans.len()];
    for p in parts {
        for (h, x) in hits.iter_mut().zip(p) {
            *h += x;
        }
    }
    Ok(hits.into_iter().map(|h| EstimateWithCI::bernoulli(h, cfg.n, rt, cfg.seed)).collect())
}

pub type BasePredicate<'a, St> = &'a (dyn Fn(&St) -> bool + Sync);

/// A × I: base predicate (None for the whole base) and fiber range
/// lo ≤ s < hi.
pub struct ProductSet<'a, St> {
    pub base: Option<BasePredicate<'a, St>>,
    pub lo: f64,
    pub hi: f64,
}

impl<St> Clone for ProductSet<'_, St> {
    fn clone(&self) -> Self {
        ProductSet { base: self.base, lo: self.lo, hi: self.hi }
    }
}

impl<'a, St> ProductSet<'a, St> {
    pub fn full() -> Self {
        ProductSet { base: None, lo: 0.0, hi: f64::INFINITY }
    }

    pub fn fiber(lo: f64, hi: f64) -> Self {
        ProductSet { base: None, lo, hi }
    }

    pub fn new(base: BasePredicate<'a, St>, lo: f64, hi: f64) -> Self {
        ProductSet { base: Some(base), lo, hi }
    }

    pub fn contains(&self, p: &FlowPoint<St>) -> bool {
        self.lo <= p.s && p.s < self.hi && self.base.is_none_or(|f| f(&p.base))
    }

    fn contains_base(&self, st: &St) -> bool {
        self.base.is_none_or(|f| f(st))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MlcltTarget {
    /// Flow integral − W(t) in a union of closed intervals.
    Set(Vec<(f64, f64)>),
    /// Section sum over completed cells − W(t) equal to l·spacing.
    Fiber { l: i64, spacing: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum McWarning {
    /// The empirical mass of the named set is below 10/N.
    EmptySet { which: &'static str, mass: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlcltEstimate {
    pub estimate: EstimateWithCI,
    pub warnings: Vec<McWarning>,
}

/// √t × P(start ∈ A×I, Φᵗ(start) ∈ B×J, integral − W(t) ∈ target).
pub fn estimate_mlclt<S: SuspensionSystem>(
    sys: &S,
    a: &ProductSet<'_, S::State>,
    b: &ProductSet<'_, S::State>,
    target: &MlcltTarget,
    t: f64,
    w_of_t: f64,
    cfg: &McConfig,
) -> Result<MlcltEstimate, McError> {
    let parts = map_chunks(sys, cfg, |chunk, rng, len| {
        let (mut hits, mut in_a, mut in_b) = (0u64, 0u64, 0u64);
        for _ in 0..len {
            let start = sys.sample_stationary(chunk, rng)?;
            let o = flow_integrate(sys, &start, t, rng)?;
            sys.end_trajectory(chunk, &o.end);
            let sa = a.contains_base(&start.base);
            let sb = b.contains_base(&o.end.base);
            in_a += sa as u64;
            in_b += sb as u64;
            if !(sa && sb && a.contains(&start) && b.contains(&o.end)) {
                continue;
            }
            let ok = match target {
                MlcltTarget::Set(iv) => {
                    let v = o.integral - w_of_t;
                    iv.iter().any(|(lo, hi)| *lo <= v && v <= *hi)
                }
                MlcltTarget::Fiber { l, spacing } => {
                    let v = o.completed_sum - w_of_t - *l as f64 * spacing;
                    v.abs() <= 1e-9 * (1.0 + o.completed_sum.abs())
                }
            };
            hits += ok as u64;
        }
        Ok((hits, in_a, in_b))
    })?;
    let (hits, in_a, in_b) = parts.into_iter().fold((0, 0, 0), |acc, p| (acc.0 + p.0, acc.1 + p.1, acc.2 + p.2));
    let mut warnings = Vec::new();
    let floor = 10.0 / cfg.n.max(1) as f64;
    for (which, count) in [("A", in_a), ("B", in_b)] {
        let mass = count as f64 / cfg.n.max(1) as f64;
        if mass < floor {
            warnings.push(McWarning::EmptySet { which, mass });
        }
    }
    Ok(MlcltEstimate { estimate: EstimateWithCI::bernoulli(hits, cfg.n, t.sqrt(), cfg.seed), warnings })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaEstimate {
    /// Covariance of (φ̌, τ) block sums divided by the block length.
    pub cov: [[f64; 2]; 2],
    pub std_error: [[f64; 2]; 2],
    pub mean: [f64; 2],
    pub n_blocks: u64,
    pub block_len: u64,
}

impl SigmaEstimate {
    /// Σ(φ) = Σ₁₁ / ν(τ) using the sampled mean of τ.
    pub fn flow_variance(&self) -> f64 {
        self.cov[0][0] / self.mean[1]
    }
}

/// Batch means: each chunk runs one base orbit from ν and cuts it into
/// consecutive blocks of `block_len` steps.
pub fn estimate_sigma<S: SuspensionSystem>(sys: &S, n_blocks: u64, block_len: u64, seed: u64, workers: usize) -> Result<SigmaEstimate, McError> {
    if n_blocks < 2 || block_len == 0 {
        return Err(McError::Invalid("need at least two blocks of positive length".into()));
    }
    let cfg = McConfig { n: n_blocks, seed, workers, chunk_size: DEFAULT_CHUNK };
    let parts = map_chunks(sys, &cfg, |chunk, rng, len| {
        let mut out = Vec::with_capacity(len as usize);
        let mut x = sys.sample_base(chunk, rng)?;
        for _ in 0..len {
            let mut s = [0.0f64; 2];
            for _ in 0..block_len {
                s[0] += sys.phi_check(&x);
                s[1] += sys.roof(&x);
                x = sys.step_base(&x, rng)?;
            }
            out.push(s);
        }
        Ok(out)
    })?;
    let sums: Vec<[f64; 2]> = parts.concat();
    let n = sums.len() as f64;
    let mean_block = [sums.iter().map(|s| s[0]).sum::<f64>() / n, sums.iter().map(|s| s[1]).sum::<f64>() / n];
    let l = block_len as f64;
    let mut cov = [[0.0; 2]; 2];
    let mut se = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let y: Vec<f64> = sums.iter().map(|s| (s[i] - mean_block[i]) * (s[j] - mean_block[j]) / l).collect();
            let m = y.iter().sum::<f64>() / (n - 1.0);
            let my = y.iter().sum::<f64>() / n;
            let v = y.iter().map(|v| (v - my) * (v - my)).sum::<f64>() / (n - 1.0);
            cov[i][j] = m;
            se[i][j] = (v / n).sqrt();
        }
    }
    Ok(SigmaEstimate { cov, std_error: se, mean: [mean_block[0] / l, mean_block[1] / l], n_blocks, block_len })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationPoint {
    pub t: f64,
    /// μ̂(A ∩ Φ^{−t}B) − μ̂(A)μ̂(B).
    pub corr: f64,
    pub std_error: f64,
    pub joint: f64,
    pub mu_a: f64,
    pub mu_b: f64,
}

/// Correlation series along an increasing grid; each trajectory is flowed
/// through the grid once.
pub fn estimate_correlation<S: SuspensionSystem>(
    sys: &S,
    a: &ProductSet<'_, S::State>,
    b: &ProductSet<'_, S::State>,
    t_grid: &[f64],
    cfg: &McConfig,
) -> Result<Vec<CorrelationPoint>, McError> {
    if t_grid.windows(2).any(|p| p[1] <= p[0]) || t_grid.first().is_some_and(|t| *t < 0.0) {
        return Err(McError::Invalid("t grid must be increasing and non-negative".into()));
    }
    let k = t_grid.len();
    let parts = map_chunks(sys, cfg, |chunk, rng, len| {
        let mut n_a = 0u64;
        let mut n_b = vec![0u64; k];
        let mut n_ab = vec![0u64; k];
        for _ in 0..len {
            let start = sys.sample_stationary(chunk, rng)?;
            let in_a = a.contains(&start);
            n_a += in_a as u64;
            let mut p = start;
            let mut now = 0.0;
            for (idx, &t) in t_grid.iter().enumerate() {
                let o = flow_integrate(sys, &p, t - now, rng)?;
                p = o.end;
                now = t;
                let in_b = b.contains(&p);
                n_b[idx] += in_b as u64;
                n_ab[idx] += (in_a && in_b) as u64;
            }
            sys.end_trajectory(chunk, &p);
        }
        Ok((n_a, n_b, n_ab))
    })?;
    let mut n_a = 0u64;
    let mut n_b = vec![0u64; k];
    let mut n_ab = vec![0u64; k];
    for (x, y, z) in parts {
        n_a += x;
        for i in 0..k {
            n_b[i] += y[i];
            n_ab[i] += z[i];
        }
    }
    let n = cfg.n as f64;
    Ok((0..k)
        .map(|i| {
            let pa = n_a as f64 / n;
            let pb = n_b[i] as f64 / n;
            let pab = n_ab[i] as f64 / n;
            // influence function Z = 1_{AB} − p_B 1_A − p_A 1_B
            let ez = pab - 2.0 * pa * pb;
            let ez2 = pab * (1.0 - pa - pb).powi(2) + (pa - pab) * pb * pb + (pb - pab) * pa * pa;
            CorrelationPoint {
                t: t_grid[i],
                corr: pab - pa * pb,
                std_error: ((ez2 - ez * ez).max(0.0) / n).sqrt(),
                joint: pab,
                mu_a: pa,
                mu_b: pb,
            }
        })
        .collect())
}

/// The set C_δ = {(x, s): 0 ≤ s < δ} for a roof with h_τ = 0.
pub fn band_set<'a, St>(delta: f64) -> ProductSet<'a, St> {
    ProductSet::fiber(0.0, delta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MdComponents {
    /// f = τ, ball of radius R around wν(τ).
    Tau,
    /// f = (φ̌, τ), ball around (wν(φ̌), wν(τ)), sum scaled by √w.
    PhiTau,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MdRow {
    pub w: f64,
    pub k: f64,
    pub value: f64,
    pub std_error: f64,
    /// Largest n inspected.
    pub truncation: u64,
}

/// Σ over n with |n − w| > K√w of ν̂(S_f(n) ∈ B(wν(f), R)), for n up to
/// 10·w/ν(τ). Orbits stop early once S_τ(n) has passed every ball, since
/// τ > 0.
pub fn moderate_dev_diagnostic<S: SuspensionSystem>(
    sys: &S,
    comps: MdComponents,
    w_list: &[f64],
    k_list: &[f64],
    r: f64,
    nu: [f64; 2],
    cfg: &McConfig,
) -> Result<Vec<MdRow>, McError> {
    if !(r > 0.0) || nu[1] <= 0.0 {
        return Err(McError::Invalid("need R > 0 and ν(τ) > 0".into()));
    }
    let trunc: Vec<u64> = w_list.iter().map(|w| (10.0 * w / nu[1] - 1e-9).ceil() as u64).collect();
    let n_max = trunc.iter().copied().max().unwrap_or(0);
    let top = w_list.iter().map(|w| w * nu[1] + r).fold(f64::NEG_INFINITY, f64::max);
    let cells = w_list.len() * k_list.len();
    let parts = map_chunks(sys, cfg, |chunk, rng, len| {
        let mut sum = vec![0.0f64; cells];
        let mut sumsq = vec![0.0f64; cells];
        let mut contrib = vec![0.0f64; cells];
        for _ in 0..len {
            contrib.iter_mut().for_each(|c| *c = 0.0);
            let mut x = sys.sample_base(chunk, rng)?;
            let (mut sp, mut st) = (0.0f64, 0.0f64);
            for n in 1..=n_max {
                sp += sys.phi_check(&x);
                st += sys.roof(&x);
                x = sys.step_base(&x, rng)?;
                for (iw, &w) in w_list.iter().enumerate() {
                    if n > trunc[iw] {
                        continue;
                    }
                    let dt = st - w * nu[1];
                    let hit = match comps {
                        MdComponents::Tau => dt.abs() <= r,
                        MdComponents::PhiTau => (sp - w * nu[0]).hypot(dt) <= r,
                    };
                    if !hit {
                        continue;
                    }
                    let scale = if comps == MdComponents::PhiTau { w.sqrt() } else { 1.0 };
                    for (ik, &k) in k_list.iter().enumerate() {
                        if (n as f64 - w).abs() > k * w.sqrt() {
                            contrib[iw * k_list.len() + ik] += scale;
                        }
                    }
                }
                if st > top {
                    break;
                }
            }
            for c in 0..cells {
                sum[c] += contrib[c];
                sumsq[c] += contrib[c] * contrib[c];
            }
        }
        Ok((sum, sumsq))
    })?;
    let mut sum = vec![0.0f64; cells];
    let mut sumsq = vec![0.0f64; cells];
    for (s, q) in parts {
        for c in 0..cells {
            sum[c] += s[c];
            sumsq[c] += q[c];
        }
    }
    let n = cfg.n as f64;
    let mut rows = Vec::with_capacity(cells);
    for (iw, &w) in w_list.iter().enumerate() {
        for (ik, &k) in k_list.iter().enumerate() {
            let c = iw * k_list.len() + ik;
            let m = sum[c] / n;
            let v = (sumsq[c] / n - m * m).max(0.0);
            rows.push(MdRow { w, k, value: m, std_error: (v / n).sqrt(), truncation: trunc[iw] });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AndersonDarling {
    /// A² for a fully specified normal law.
    pub statistic: f64,
    pub critical_1pct: f64,
    pub n: usize,
}

impl AndersonDarling {
    pub fn passes(&self) -> bool {
        self.statistic < self.critical_1pct
    }
}

/// A² of the sample against N(mean, var); the 1% critical value for a
/// fully specified continuous law is 3.857.
pub fn anderson_darling_normal(xs: &[f64], mean: f64, var: f64) -> Result<AndersonDarling, McError> {
    let law = Normal::new(mean, var.sqrt()).map_err(|e| McError::Invalid(e.to_string()))?;
    let mut u: Vec<f64> = xs.iter().map(|x| law.cdf(*x).clamp(1e-300, 1.0 - 1e-16)).collect();
    u.sort_by(f64::total_cmp);
    let n = u.len();
    if n < 8 {
        return Err(McError::Invalid("Anderson–Darling needs at least 8 points".into()));
    }
    let nf = n as f64;
    let s: f64 = (0..n)
        .map(|i| (2 * i + 1) as f64 * (u[i].ln() + (1.0 - u[n - 1 - i]).ln()))
        .sum();
    Ok(AndersonDarling { statistic: -nf - s / nf, critical_1pct: 3.857, n })
}
