use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::{FlowPoint, ObservableProfile, SuspensionSystem, SystemError};
use crate::groups::{linalg, QVec, QuadScalar};
use crate::rng::SimRng;

/// A primitive row-stochastic matrix with its stationary vector.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovChain {
    p: Vec<Vec<f64>>,
    pi: Vec<f64>,
}

impl MarkovChain {
    pub fn new(p: Vec<Vec<f64>>) -> Result<Self, SystemError> {
        let n = p.len();
        if n == 0 || p.iter().any(|r| r.len() != n) {
            return Err(SystemError::Invalid("transition matrix must be square and nonempty".into()));
        }
        for (i, row) in p.iter().enumerate() {
            if row.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
                return Err(SystemError::Invalid(format!("row {i} has entries outside [0, 1]")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(SystemError::Invalid(format!("row {i} sums to {s}")));
            }
        }
        if !is_primitive(&p) {
            return Err(SystemError::Invalid("chain is not irreducible and aperiodic".into()));
        }
        let pi = stationary(&p);
        let chain = MarkovChain { p, pi };
        let resid = (0..n)
            .map(|j| ((0..n).map(|i| chain.pi[i] * chain.p[i][j]).sum::<f64>() - chain.pi[j]).abs())
            .fold(0.0, f64::max);
        if resid > 1e-12 {
            return Err(SystemError::Invalid(format!("stationary vector residual {resid}")));
        }
        Ok(chain)
    }

    pub fn n_states(&self) -> usize {
        self.p.len()
    }

    pub fn p(&self, i: usize, j: usize) -> f64 {
        self.p[i][j]
    }

    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.p
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }
}

/// Some power of the zero pattern is strictly positive (Wielandt bound).
fn is_primitive(p: &[Vec<f64>]) -> bool {
    let n = p.len();
    let a: Vec<Vec<bool>> = p.iter().map(|r| r.iter().map(|&x| x > 0.0).collect()).collect();
    let mut cur = a.clone();
    for _ in 0..(n * n).saturating_sub(2 * n) + 2 {
        if cur.iter().all(|r| r.iter().all(|&b| b)) {
            return true;
        }
        let mut next = vec![vec![false; n]; n];
        for i in 0..n {
            for k in 0..n {
                if cur[i][k] {
                    for j in 0..n {
                        next[i][j] |= a[k][j];
                    }
                }
            }
        }
        cur = next;
    }
    cur.iter().all(|r| r.iter().all(|&b| b))
}

fn stationary(p: &[Vec<f64>]) -> Vec<f64> {
    let n = p.len();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(j, i)] = p[i][j] - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..n {
        m[(n - 1, j)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(n);
    rhs[n - 1] = 1.0;
    let mut pi = m.lu().solve(&rhs).expect("primitive chain has a unique stationary vector");
    // one refinement step against round-off
    for _ in 0..3 {
        let next: Vec<f64> = (0..n).map(|j| (0..n).map(|i| pi[i] * p[i][j]).sum()).collect();
        let s: f64 = next.iter().sum();
        pi = DVector::from_iterator(n, next.into_iter().map(|x| x / s));
    }
    pi.iter().cloned().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MarkovState {
    pub from: usize,
    pub to: usize,
}

/// Markov shift whose section observables live on transitions: the state is
/// the transition (i, j) and f(i, j) = (φ̌, τ).
#[derive(Debug, Clone)]
pub struct MarkovShiftBase {
    chain: MarkovChain,
    f: Vec<Vec<[f64; 2]>>,
    exact: Option<Vec<Vec<QVec>>>,
    row_cum: Vec<Vec<f64>>,
    base_cum: Vec<f64>,
    biased_cum: Vec<f64>,
    nu_tau: f64,
    inf_tau: f64,
    profile: ObservableProfile,
}

fn cum(w: &[f64]) -> Vec<f64> {
    let total: f64 = w.iter().sum();
    let mut acc = 0.0;
    let mut out: Vec<f64> = w
        .iter()
        .map(|v| {
            acc += v / total;
            acc
        })
        .collect();
    if let Some(l) = out.last_mut() {
        *l = 1.0;
    }
    out
}

fn pick(c: &[f64], u: f64) -> usize {
    c.iter().position(|&x| u < x).unwrap_or(c.len() - 1)
}

impl MarkovShiftBase {
    /// `f[i][j] = [φ̌, τ]`; τ must be positive on allowed transitions and φ̌
    /// must have stationary mean zero to 1e-9.
    pub fn new(chain: MarkovChain, f: Vec<Vec<[f64; 2]>>) -> Result<Self, SystemError> {
        let n = chain.n_states();
        if f.len() != n || f.iter().any(|r| r.len() != n) {
            return Err(SystemError::Invalid("value table must match the chain size".into()));
        }
        let mut base_w = Vec::with_capacity(n * n);
        let mut biased_w = Vec::with_capacity(n * n);
        let mut inf_tau = f64::INFINITY;
        let mut mean_phi = 0.0;
        for i in 0..n {
            for j in 0..n {
                let w = chain.pi[i] * chain.p[i][j];
                if chain.p[i][j] > 0.0 {
                    if !(f[i][j][1] > 0.0) {
                        return Err(SystemError::Invalid(format!("roof on ({i},{j}) is not positive")));
                    }
                    inf_tau = inf_tau.min(f[i][j][1]);
                }
                mean_phi += w * f[i][j][0];
                base_w.push(w);
                biased_w.push(w * f[i][j][1]);
            }
        }
        if mean_phi.abs() > 1e-9 {
            return Err(SystemError::Invalid(format!("stationary mean of the observable is {mean_phi}")));
        }
        let nu_tau = biased_w.iter().sum();
        Ok(MarkovShiftBase {
            row_cum: chain.p.iter().map(|r| cum(r)).collect(),
            base_cum: cum(&base_w),
            biased_cum: cum(&biased_w),
            chain,
            f,
            exact: None,
            nu_tau,
            inf_tau,
            profile: ObservableProfile::ConstantRate,
        })
    }

    pub fn new_exact(chain: MarkovChain, f: Vec<Vec<QVec>>) -> Result<Self, SystemError> {
        let ff = f.iter().map(|r| r.iter().map(|v| [v[0].to_f64(), v[1].to_f64()]).collect()).collect();
        let mut base = Self::new(chain, ff)?;
        base.exact = Some(f);
        Ok(base)
    }

    pub fn with_profile(mut self, profile: ObservableProfile) -> Self {
        self.profile = profile;
        self
    }

    /// Two states, all transitions 1/2, φ̌ = +1 into state 0 and −1 into
    /// state 1, unit roof.
    pub fn fair_coin() -> Self {
        let chain = MarkovChain::new(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let q = QuadScalar::int;
        let f = vec![vec![[q(1), q(1)], [q(-1), q(1)]], vec![[q(1), q(1)], [q(-1), q(1)]]];
        Self::new_exact(chain, f).unwrap()
    }

    /// A fixed three-state chain with non-lattice (φ̌, τ).
    pub fn pinned_three_state() -> Self {
        let chain = pinned_chain();
        let raw = pinned_raw_values();
        let pi = chain.pi().to_vec();
        let mean: f64 = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| pi[i] * chain.p(i, j) * raw[i][j][0]).sum();
        let f = raw.iter().map(|r| r.iter().map(|v| [v[0] - mean, v[1]]).collect()).collect();
        Self::new(chain, f).unwrap()
    }

    pub fn chain(&self) -> &MarkovChain {
        &self.chain
    }

    pub fn values(&self) -> &[Vec<[f64; 2]>] {
        &self.f
    }

    pub fn exact_values(&self) -> Option<&[Vec<QVec>]> {
        self.exact.as_deref()
    }

    pub fn nu_tau(&self) -> f64 {
        self.nu_tau
    }

    /// Closed walks from state 0 generating all closed-walk data: for every
    /// allowed edge i→j the walk out(0→i)·(i→j)·in(j→0), and for every state
    /// j the walk out(0→j)·in(j→0).
    pub fn cycles(&self) -> Option<Vec<(QVec, i64)>> {
        let vals = self.exact.as_ref()?;
        let n = self.chain.n_states();
        let edge = |i: usize, j: usize| self.chain.p[i][j] > 0.0;
        let out = bfs_paths(n, 0, |a, b| edge(a, b));
        let inn = bfs_paths(n, 0, |a, b| edge(b, a));
        let walk_sum = |path: &[usize]| -> QVec {
            path.windows(2).fold(linalg::zero_vec(), |acc, w| linalg::add(&acc, &vals[w[0]][w[1]]))
        };
        let out_path = |j: usize| -> Vec<usize> { out[j].clone() };
        let in_path = |j: usize| -> Vec<usize> {
            let mut p = inn[j].clone();
            p.reverse();
            p
        };
        let mut cycles = Vec::new();
        for j in 0..n {
            let mut w = out_path(j);
            w.extend_from_slice(&in_path(j)[1..]);
            cycles.push((walk_sum(&w), (w.len() - 1) as i64));
        }
        for i in 0..n {
            for j in 0..n {
                if edge(i, j) {
                    let mut w = out_path(i);
                    w.extend(in_path(j));
                    cycles.push((walk_sum(&w), (w.len() - 1) as i64));
                }
            }
        }
        cycles.retain(|c| c.1 > 0);
        Some(cycles)
    }

    fn draw_row(&self, i: usize, rng: &mut SimRng) -> usize {
        pick(&self.row_cum[i], rng.random::<f64>())
    }

    fn pair(&self, k: usize) -> MarkovState {
        let n = self.chain.n_states();
        MarkovState { from: k / n, to: k % n }
    }
}

/// Shortest paths from `root` as explicit vertex lists (root first).
fn bfs_paths(n: usize, root: usize, edge: impl Fn(usize, usize) -> bool) -> Vec<Vec<usize>> {
    let mut parent = vec![usize::MAX; n];
    parent[root] = root;
    let mut q = VecDeque::from([root]);
    while let Some(a) = q.pop_front() {
        for b in 0..n {
            if parent[b] == usize::MAX && edge(a, b) {
                parent[b] = a;
                q.push_back(b);
            }
        }
    }
    (0..n)
        .map(|v| {
            let mut path = vec![v];
            let mut cur = v;
            while cur != root {
                cur = parent[cur];
                path.push(cur);
            }
            path.reverse();
            path
        })
        .collect()
}

pub(crate) fn pinned_chain() -> MarkovChain {
    MarkovChain::new(vec![vec![0.2, 0.5, 0.3], vec![0.4, 0.1, 0.5], vec![0.3, 0.3, 0.4]]).unwrap()
}

pub(crate) fn pinned_raw_values() -> Vec<Vec<[f64; 2]>> {
    (0..3)
        .map(|i| {
            (0..3)
                .map(|j| {
                    let (a, b) = (i as f64, j as f64);
                    [0.9 * a - 0.55 * b + 0.3 * (a * b).sin(), 1.0 + 0.25 * a + 0.15 * b + 0.1 * ((i * j) % 2) as f64]
                })
                .collect()
        })
        .collect()
}

impl SuspensionSystem for MarkovShiftBase {
    type State = MarkovState;
    type Chunk = ();

    fn roof(&self, s: &MarkovState) -> f64 {
        self.f[s.from][s.to][1]
    }

    fn phi_check(&self, s: &MarkovState) -> f64 {
        self.f[s.from][s.to][0]
    }

    fn inf_roof(&self) -> f64 {
        self.inf_tau
    }

    fn profile(&self) -> &ObservableProfile {
        &self.profile
    }

    fn step_base(&self, s: &MarkovState, rng: &mut SimRng) -> Result<MarkovState, SystemError> {
        Ok(MarkovState { from: s.to, to: self.draw_row(s.to, rng) })
    }

    fn begin_chunk(&self, _rng: &mut SimRng) -> Result<(), SystemError> {
        Ok(())
    }

    fn sample_base(&self, _c: &mut (), rng: &mut SimRng) -> Result<MarkovState, SystemError> {
        Ok(self.pair(pick(&self.base_cum, rng.random::<f64>())))
    }

    fn sample_stationary(&self, _c: &mut (), rng: &mut SimRng) -> Result<FlowPoint<MarkovState>, SystemError> {
        let st = self.pair(pick(&self.biased_cum, rng.random::<f64>()));
        let s = rng.random::<f64>() * self.roof(&st);
        Ok(FlowPoint { base: st, s })
    }

    fn describe(&self) -> String {
        format!("markov P={:?} f={:?} profile={:?}", self.chain.p, self.f, self.profile)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    #[test]
    fn rejects_periodic_chain() {
        assert!(MarkovChain::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).is_err());
    }

    #[test]
    fn transition_frequencies_and_measure_preservation() {
        let sys = MarkovShiftBase::pinned_three_state();
        let mut rng = substream(3, 0);
        let mut st = sys.sample_base(&mut (), &mut rng).unwrap();
        let n = 1_000_000;
        let mut visits = [0u64; 3];
        let mut trans = [[0u64; 3]; 3];
        for _ in 0..n {
            let next = sys.step_base(&st, &mut rng).unwrap();
            visits[next.from] += 1;
            trans[next.from][next.to] += 1;
            st = next;
        }
        let pi = sys.chain().pi();
        for i in 0..3 {
            let f = visits[i] as f64 / n as f64;
            // Markov samples are correlated; the 3σ band uses a generous
            // variance inflation factor.
            let se = (pi[i] * (1.0 - pi[i]) / n as f64).sqrt() * 3.0;
            assert!((f - pi[i]).abs() < 3.0 * se, "state {i}: {f} vs {}", pi[i]);
            for j in 0..3 {
                let p = sys.chain().p(i, j);
                let m = visits[i] as f64;
                let fr = trans[i][j] as f64 / m;
                let se = (p * (1.0 - p) / m).sqrt();
                assert!((fr - p).abs() < 3.0 * se, "({i},{j}) {fr} vs {p}");
            }
        }
    }

    #[test]
    fn coin_cycles() {
        let c = MarkovShiftBase::fair_coin().cycles().unwrap();
        assert!(c.iter().any(|(_, n)| *n == 1));
    }
}
