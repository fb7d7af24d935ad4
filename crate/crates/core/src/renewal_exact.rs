//! Exact law of the reward sum at the last renewal before t, for renewal
//! processes with integer rewards and durations in a quadratic ring.
//!
//! The renewal measure U(S, z) = Σₙ P(Sₙ = S, tₙ = z) is computed over all
//! ring points z ≤ t by the recursion U(z) = 1{z = 0} + Σᵢ pᵢ U(z − yᵢ),
//! and then P(S_{N_t} = S, t_{N_t} = z) = U(S, z)·P(Y > t − z).

use std::collections::{BTreeMap, HashMap, VecDeque};

use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

use crate::groups::QuadScalar;
use crate::systems::RenewalBase;

pub const STATE_CAP: usize = 100_000_000;
pub const PATH_CAP: u64 = 10_000_000;
const PRUNE_MASS: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RenewalError {
    #[error("live states exceeded {cap}")]
    StateExplosion { cap: usize },
    #[error("more than {cap} paths to enumerate")]
    PathExplosion { cap: u64 },
    #[error("{0}")]
    NotIntegral(String),
    #[error("the renewal system carries no exact atoms")]
    MissingExact,
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StartMode {
    /// A renewal at time 0.
    Palm,
    /// Start distributed by the stationary flow measure.
    Stationary,
}

/// Fiber window [lo, hi); `hi = None` means unbounded.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberWindow {
    pub lo: QuadScalar,
    pub hi: Option<QuadScalar>,
}

impl FiberWindow {
    pub fn full() -> Self {
        FiberWindow { lo: QuadScalar::zero(), hi: None }
    }

    pub fn new(lo: QuadScalar, hi: QuadScalar) -> Self {
        FiberWindow { lo, hi: Some(hi) }
    }

    /// The window intersected with [0, y).
    fn clip(&self, y: &QuadScalar) -> (QuadScalar, QuadScalar) {
        let lo = self.lo.clone().max(QuadScalar::zero());
        let hi = match &self.hi {
            Some(h) => h.clone().min(y.clone()),
            None => y.clone(),
        };
        (lo, hi)
    }
}

fn overlap(a: &(QuadScalar, QuadScalar), b: &(QuadScalar, QuadScalar)) -> QuadScalar {
    let lo = (&a.0).max(&b.0);
    let hi = (&a.1).min(&b.1);
    if hi > lo {
        hi - lo
    } else {
        QuadScalar::zero()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactDistribution {
    pub mode: StartMode,
    pub t: QuadScalar,
    /// Palm start only: (S_{N_t}, t − t_{N_t}) ↦ probability.
    pub joint: BTreeMap<(i64, QuadScalar), QuadScalar>,
    /// S_{N_t} ↦ probability.
    pub marginal: BTreeMap<i64, QuadScalar>,
    /// Exact mass of paths dropped by the |S| pruning.
    pub pruned_mass: QuadScalar,
    pub n_states: usize,
}

impl ExactDistribution {
    pub fn prob(&self, s: i64) -> QuadScalar {
        self.marginal.get(&s).cloned().unwrap_or_else(QuadScalar::zero)
    }

    pub fn total(&self) -> QuadScalar {
        self.marginal.values().fold(QuadScalar::zero(), |acc, v| &acc + v)
    }
}

type Key = (i64, i64, i64);

/// Atoms in integer coordinates: y = (a + b√D)/scale.
#[derive(Debug, Clone)]
struct RingAtoms {
    d: i64,
    scale: i64,
    x: Vec<i64>,
    y: Vec<(i64, i64)>,
    yq: Vec<QuadScalar>,
    p: Vec<BigRational>,
    nu: QuadScalar,
    sqrt_d: f64,
}

fn small(r: &BigRational, what: &str) -> Result<i64, RenewalError> {
    if !r.is_integer() {
        return Err(RenewalError::NotIntegral(format!("{what} = {r} is not an integer")));
    }
    r.to_integer().to_i64().ok_or_else(|| RenewalError::NotIntegral(format!("{what} overflows i64")))
}

impl RingAtoms {
    fn new(base: &RenewalBase, t: &QuadScalar) -> Result<Self, RenewalError> {
        let atoms = base.exact_atoms().ok_or(RenewalError::MissingExact)?;
        let mut d = None;
        for r in atoms.iter().map(|a| a.y.ring()).chain(atoms.iter().map(|a| a.x.ring())).chain([t.ring()]) {
            match (d, r) {
                (_, None) => {}
                (None, Some(r)) => d = Some(r),
                (Some(a), Some(b)) if a != b => {
                    return Err(RenewalError::Invalid(format!("values mix Q(√{a}) and Q(√{b})")));
                }
                _ => {}
            }
        }
        let d = d.unwrap_or(2);
        let mut scale = BigRational::one().to_integer();
        for a in atoms {
            scale = scale.lcm(a.y.p().denom()).lcm(a.y.q().denom());
        }
        let scale_r = BigRational::from_integer(scale.clone());
        let mut x = Vec::new();
        let mut y = Vec::new();
        for a in atoms {
            if !a.x.is_rational() {
                return Err(RenewalError::NotIntegral(format!("reward {} is not an integer", a.x)));
            }
            x.push(small(a.x.p(), "reward")?);
            y.push((small(&(a.y.p() * &scale_r), "duration")?, small(&(a.y.q() * &scale_r), "duration")?));
        }
        let yq: Vec<QuadScalar> = atoms.iter().map(|a| a.y.clone().with_radicand(d)).collect();
        let p: Vec<BigRational> = atoms.iter().map(|a| a.prob.clone()).collect();
        let nu = yq.iter().zip(&p).fold(QuadScalar::zero(), |acc, (y, p)| &acc + &(y * &QuadScalar::rational(p.clone())));
        Ok(RingAtoms {
            d,
            scale: scale.to_i64().ok_or_else(|| RenewalError::NotIntegral("duration denominators overflow".into()))?,
            x,
            y,
            yq,
            p,
            nu,
            sqrt_d: (d as f64).sqrt(),
        })
    }

    fn value(&self, a: i64, b: i64) -> QuadScalar {
        QuadScalar::new(BigRational::new(a.into(), self.scale.into()), BigRational::new(b.into(), self.scale.into()), self.d)
    }

    fn value_f64(&self, a: i64, b: i64) -> f64 {
        (a as f64 + b as f64 * self.sqrt_d) / self.scale as f64
    }

    /// a + b√D over scale ≤ t, exactly.
    fn le(&self, a: i64, b: i64, t: &QuadScalar, tf: f64) -> bool {
        let v = self.value_f64(a, b);
        if (v - tf).abs() > 1e-9 * (1.0 + tf.abs()) {
            v < tf
        } else {
            self.value(a, b) <= *t
        }
    }

    /// P(Y > w).
    fn survival(&self, w: &QuadScalar) -> BigRational {
        let wf = w.to_f64();
        let mut acc = BigRational::zero();
        for (i, y) in self.yq.iter().enumerate() {
            let yf = y.to_f64();
            let above = if (yf - wf).abs() > 1e-9 * (1.0 + wf.abs()) { yf > wf } else { y > w };
            if above {
                acc += &self.p[i];
            }
        }
        acc
    }

    fn max_y(&self) -> f64 {
        self.yq.iter().map(QuadScalar::to_f64).fold(0.0, f64::max)
    }
}

/// The renewal measure on all states with z ≤ t, in increasing z order.
struct RenewalMeasure {
    states: Vec<Key>,
    u: Vec<BigRational>,
}

fn renewal_measure(atoms: &RingAtoms, t: &QuadScalar, bound: Option<i64>) -> Result<RenewalMeasure, RenewalError> {
    let tf = t.to_f64();
    let mut seen: HashMap<Key, ()> = HashMap::new();
    let mut queue = VecDeque::from([(0i64, 0i64, 0i64)]);
    seen.insert((0, 0, 0), ());
    while let Some((s, a, b)) = queue.pop_front() {
        for i in 0..atoms.x.len() {
            let next = (s + atoms.x[i], a + atoms.y[i].0, b + atoms.y[i].1);
            if bound.is_some_and(|m| next.0.abs() > m) || seen.contains_key(&next) {
                continue;
            }
            if atoms.le(next.1, next.2, t, tf) {
                seen.insert(next, ());
                if seen.len() > STATE_CAP {
                    return Err(RenewalError::StateExplosion { cap: STATE_CAP });
                }
                queue.push_back(next);
            }
        }
    }
    let mut states: Vec<Key> = seen.into_keys().collect();
    states.sort_by(|p, q| {
        atoms.value_f64(p.1, p.2).total_cmp(&atoms.value_f64(q.1, q.2)).then_with(|| p.cmp(q))
    });
    let index: HashMap<Key, usize> = states.iter().enumerate().map(|(k, z)| (*z, k)).collect();
    let mut u: Vec<BigRational> = Vec::with_capacity(states.len());
    for z in &states {
        let mut acc = if *z == (0, 0, 0) { BigRational::one() } else { BigRational::zero() };
        for i in 0..atoms.x.len() {
            let prev = (z.0 - atoms.x[i], z.1 - atoms.y[i].0, z.2 - atoms.y[i].1);
            if let Some(&k) = index.get(&prev) {
                debug_assert!(k < u.len(), "predecessor out of order");
                acc += &atoms.p[i] * &u[k];
            }
        }
        u.push(acc);
    }
    Ok(RenewalMeasure { states, u })
}

fn prune_bound(atoms: &RingAtoms, t: &QuadScalar) -> i64 {
    (12.0 * (t.to_f64().max(1.0) / atoms.nu.to_f64()).sqrt()).ceil() as i64
}

fn check_time(t: &QuadScalar) -> Result<(), RenewalError> {
    if t.is_negative() {
        return Err(RenewalError::Invalid(format!("t = {t} is negative")));
    }
    Ok(())
}

/// Exact distribution of S_{N_t}, N_t = max{n : Y₁ + … + Yₙ ≤ t}.
pub fn dp_distribution(base: &RenewalBase, t: &QuadScalar, mode: StartMode) -> Result<ExactDistribution, RenewalError> {
    match mode {
        StartMode::Palm => palm(base, t, true),
        StartMode::Stationary => stationary_window(base, t, &FiberWindow::full(), &FiberWindow::full()),
    }
}

fn palm(base: &RenewalBase, t: &QuadScalar, prune: bool) -> Result<ExactDistribution, RenewalError> {
    check_time(t)?;
    let atoms = RingAtoms::new(base, t)?;
    let bound = prune.then(|| prune_bound(&atoms, t));
    let m = renewal_measure(&atoms, t, bound)?;
    let reach = t.to_f64() - atoms.max_y() - 1e-9;
    let mut joint = BTreeMap::new();
    let mut marginal: BTreeMap<i64, QuadScalar> = BTreeMap::new();
    let mut total = BigRational::zero();
    for (z, u) in m.states.iter().zip(&m.u) {
        if atoms.value_f64(z.1, z.2) < reach {
            continue;
        }
        let elapsed = t - &atoms.value(z.1, z.2);
        let g = atoms.survival(&elapsed);
        if g.is_zero() {
            continue;
        }
        let mass = u * &g;
        total += &mass;
        let q = QuadScalar::rational(mass);
        let e = marginal.entry(z.0).or_insert_with(QuadScalar::zero);
        *e = &*e + &q;
        let e = joint.entry((z.0, elapsed)).or_insert_with(QuadScalar::zero);
        *e = &*e + &q;
    }
    let pruned = QuadScalar::rational(BigRational::one() - total);
    if prune && pruned.to_f64() >= PRUNE_MASS {
        return palm(base, t, false);
    }
    assert!(prune || pruned.is_zero(), "mass not conserved: {pruned}");
    Ok(ExactDistribution { mode: StartMode::Palm, t: t.clone(), joint, marginal, pruned_mass: pruned, n_states: m.states.len() })
}

/// Stationary start restricted to initial fiber height in `i_win` and final
/// fiber height in `j_win`; the marginal holds
/// μ(s ∈ I, S_{N_{t+s}} = σ, final height ∈ J) for each σ.
pub fn stationary_window(
    base: &RenewalBase,
    t: &QuadScalar,
    i_win: &FiberWindow,
    j_win: &FiberWindow,
) -> Result<ExactDistribution, RenewalError> {
    check_time(t)?;
    let atoms = RingAtoms::new(base, t)?;
    if i_win != &FiberWindow::full() || j_win != &FiberWindow::full() {
        return stationary_inner(&atoms, t, i_win, j_win, None);
    }
    let mut out = stationary_inner(&atoms, t, i_win, j_win, Some(prune_bound(&atoms, t)))?;
    let pruned = &QuadScalar::one() - &out.total();
    if pruned.to_f64() >= PRUNE_MASS {
        out = stationary_inner(&atoms, t, i_win, j_win, None)?;
        assert_eq!(out.total(), QuadScalar::one(), "mass not conserved");
    } else {
        out.pruned_mass = pruned;
    }
    Ok(out)
}

fn stationary_inner(
    atoms: &RingAtoms,
    t: &QuadScalar,
    i_win: &FiberWindow,
    j_win: &FiberWindow,
    bound: Option<i64>,
) -> Result<ExactDistribution, RenewalError> {
    let tf = t.to_f64();
    let m = renewal_measure(atoms, t, bound)?;
    let nu_inv = atoms.nu.recip().expect("positive mean duration");
    let n = atoms.x.len();
    let yf: Vec<f64> = atoms.yq.iter().map(QuadScalar::to_f64).collect();
    let mut marginal: BTreeMap<i64, QuadScalar> = BTreeMap::new();
    let mut add = |s: i64, v: QuadScalar| {
        if !v.is_zero() {
            let e = marginal.entry(s).or_insert_with(QuadScalar::zero);
            *e = &*e + &v;
        }
    };
    for i in 0..n {
        let wi = &nu_inv * &QuadScalar::rational(atoms.p[i].clone());
        let ii = i_win.clip(&atoms.yq[i]);
        // No crossing: the start cell survives past t.
        let stay_hi = &atoms.yq[i] - t;
        if stay_hi.is_positive() {
            let (jlo, jhi) = match &j_win.hi {
                Some(h) => (&j_win.lo - t, h - t),
                None => (&j_win.lo - t, stay_hi.clone()),
            };
            let lo = (&ii.0).max(&jlo).clone();
            let hi = (&ii.1).min(&stay_hi).min(&jhi).clone();
            if hi > lo {
                add(0, &wi * &(hi - lo));
            }
        }
        for (z, u) in m.states.iter().zip(&m.u) {
            let ef = atoms.value_f64(z.1, z.2);
            let cf = tf - yf[i] - ef;
            if cf <= -yf[i] - 1e-9 {
                continue;
            }
            let mut c: Option<QuadScalar> = None;
            for j in 0..n {
                if cf >= yf[j] + 1e-9 {
                    continue;
                }
                let c = c.get_or_insert_with(|| &(t - &atoms.yq[i]) - &atoms.value(z.1, z.2));
                let jj = j_win.clip(&atoms.yq[j]);
                let shifted = (&jj.0 - &*c, &jj.1 - &*c);
                let len = overlap(&ii, &shifted);
                if !len.is_zero() {
                    let w = QuadScalar::rational(u * &atoms.p[j]);
                    add(atoms.x[i] + z.0, &(&wi * &w) * &len);
                }
            }
        }
    }
    Ok(ExactDistribution {
        mode: StartMode::Stationary,
        t: t.clone(),
        joint: BTreeMap::new(),
        marginal,
        pruned_mass: QuadScalar::zero(),
        n_states: m.states.len(),
    })
}

/// Palm distribution by listing every path up to its first overshoot.
pub fn brute_force_enumerate(base: &RenewalBase, t: &QuadScalar) -> Result<ExactDistribution, RenewalError> {
    check_time(t)?;
    let atoms = RingAtoms::new(base, t)?;
    let tf = t.to_f64();
    let mut joint: BTreeMap<(i64, QuadScalar), QuadScalar> = BTreeMap::new();
    let mut paths = 0u64;
    let mut stack = vec![(0i64, 0i64, 0i64, BigRational::one())];
    while let Some((s, a, b, prob)) = stack.pop() {
        for j in 0..atoms.x.len() {
            let (na, nb) = (a + atoms.y[j].0, b + atoms.y[j].1);
            let pj = &prob * &atoms.p[j];
            if atoms.le(na, nb, t, tf) {
                stack.push((s + atoms.x[j], na, nb, pj));
            } else {
                paths += 1;
                if paths > PATH_CAP {
                    return Err(RenewalError::PathExplosion { cap: PATH_CAP });
                }
                let key = (s, t - &atoms.value(a, b));
                let e = joint.entry(key).or_insert_with(QuadScalar::zero);
                *e = &*e + &QuadScalar::rational(pj);
            }
        }
    }
    let mut marginal: BTreeMap<i64, QuadScalar> = BTreeMap::new();
    for ((s, _), v) in &joint {
        let e = marginal.entry(*s).or_insert_with(QuadScalar::zero);
        *e = &*e + v;
    }
    Ok(ExactDistribution {
        mode: StartMode::Palm,
        t: t.clone(),
        joint,
        marginal,
        pruned_mass: QuadScalar::zero(),
        n_states: paths as usize,
    })
}

/// Index of frac(t) in the partition [0, √2−1), [√2−1, 2−√2), [2−√2, 1).
pub fn frac_cell(t: &QuadScalar) -> usize {
    let f = t - &QuadScalar::from_bigint(t.floor());
    if f < QuadScalar::from_ints(-1, 1, 2) {
        0
    } else if f < QuadScalar::from_ints(2, -1, 2) {
        1
    } else {
        2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub t: QuadScalar,
    pub frac_cell: usize,
    pub p_zero: QuadScalar,
    pub sqrt_t_times_p: f64,
    pub pruned_mass: f64,
}

/// √t·P(S_{N_t} = 0) for the three-atom counterexample under Palm start.
///
/// Every state with S = 0 sits at an integer time, so only the renewal at
/// ⌊t⌋ can be the last one; the row value is checked against
/// U(0, ⌊t⌋)·P(Y > frac t).
pub fn counterexample_scan(t_values: &[QuadScalar]) -> Result<Vec<ScanRow>, RenewalError> {
    let base = RenewalBase::counterexample();
    let mut rows = Vec::with_capacity(t_values.len());
    for t in t_values {
        if t < &QuadScalar::one() {
            return Err(RenewalError::Invalid(format!("scan times must be at least 1, got {t}")));
        }
        let atoms = RingAtoms::new(&base, t)?;
        let dist = palm(&base, t, true)?;
        let m = renewal_measure(&atoms, t, Some(prune_bound(&atoms, t)))?;
        let floor = t.floor().to_i64().expect("moderate t");
        let mut at_floor = BigRational::zero();
        for (z, u) in m.states.iter().zip(&m.u) {
            if z.0 == 0 {
                assert!(z.2 == 0 && z.1 % atoms.scale == 0, "S = 0 reached at a non-integer time");
                if z.1 / atoms.scale == floor {
                    at_floor = u.clone();
                }
            }
        }
        let frac = t - &QuadScalar::int(floor);
        let p0 = dist.prob(0);
        if dist.pruned_mass.is_zero() {
            assert_eq!(p0, QuadScalar::rational(at_floor * atoms.survival(&frac)), "last renewal is not at ⌊t⌋");
        }
        rows.push(ScanRow {
            t: t.clone(),
            frac_cell: frac_cell(t),
            sqrt_t_times_p: t.to_f64().sqrt() * p0.to_f64(),
            p_zero: p0,
            pruned_mass: dist.pruned_mass.to_f64(),
        });
    }
    Ok(rows)
}

/// Value at h = 0 of the polynomial in h = 1/√t through the given points
/// (degree = number of points − 1).
pub fn extrapolate_inv_sqrt(points: &[(f64, f64)]) -> f64 {
    let hs: Vec<f64> = points.iter().map(|p| 1.0 / p.0.sqrt()).collect();
    let mut acc = 0.0;
    for (k, p) in points.iter().enumerate() {
        let mut w = 1.0;
        for (m, h) in hs.iter().enumerate() {
            if m != k {
                w *= h / (h - hs[k]);
            }
        }
        acc += w * p.1;
    }
    acc
}
