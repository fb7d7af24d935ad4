
use super::linalg::rational_gcd;
use super::{GroupError, QuadScalar};

/// A closed subgroup of R.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LineGroup {
    Zero,
    Lattice(QuadScalar),
    Real,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineGroupWithShift {
    pub group: LineGroup,
    pub shift: QuadScalar,
}

impl LineGroupWithShift {
    /// Shift reduced into [0, a) for lattices, to 0 for R.
    pub fn new(group: LineGroup, shift: QuadScalar) -> Self {
        let shift = match &group {
            LineGroup::Zero => shift,
            LineGroup::Lattice(a) => shift.rem_euclid(a),
            LineGroup::Real => QuadScalar::zero(),
        };
        LineGroupWithShift { group, shift }
    }
}

/// Closure of the subgroup of R generated by `values`.
pub fn closure_1d(values: &[QuadScalar]) -> LineGroup {
    let nonzero: Vec<&QuadScalar> = values.iter().filter(|v| !v.is_zero()).collect();
    let Some(z0) = nonzero.first() else {
        return LineGroup::Zero;
    };
    let mut ratios = Vec::with_capacity(nonzero.len());
    for z in &nonzero {
        let r = *z / *z0;
        if !r.is_rational() {
            return LineGroup::Real;
        }
        ratios.push(r.p().clone());
    }
    let g = rational_gcd(&ratios).expect("nonzero ratios");
    LineGroup::Lattice((&QuadScalar::rational(g) * *z0).abs())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Endpoint {
    Open,
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealInterval {
    pub lo: f64,
    pub hi: f64,
    pub lo_end: Endpoint,
    pub hi_end: Endpoint,
}

impl RealInterval {
    pub fn closed(lo: f64, hi: f64) -> Self {
        RealInterval { lo, hi, lo_end: Endpoint::Closed, hi_end: Endpoint::Closed }
    }

    pub fn half_open(lo: f64, hi: f64) -> Self {
        RealInterval { lo, hi, lo_end: Endpoint::Closed, hi_end: Endpoint::Open }
    }

    pub fn point(x: f64) -> Self {
        Self::closed(x, x)
    }

    pub fn len(&self) -> f64 {
        (self.hi - self.lo).max(0.0)
    }

    pub fn is_empty(&self) -> bool {
        self.hi < self.lo
            || (self.hi == self.lo && (self.lo_end == Endpoint::Open || self.hi_end == Endpoint::Open))
    }

    pub fn contains(&self, x: f64) -> bool {
        let lo_ok = match self.lo_end {
            Endpoint::Closed => x >= self.lo,
            Endpoint::Open => x > self.lo,
        };
        let hi_ok = match self.hi_end {
            Endpoint::Closed => x <= self.hi,
            Endpoint::Open => x < self.hi,
        };
        lo_ok && hi_ok
    }

    pub fn shifted(&self, by: f64) -> Self {
        RealInterval { lo: self.lo + by, hi: self.hi + by, ..*self }
    }

    /// Number of points of aZ in the interval.
    pub fn count_lattice(&self, a: f64) -> u64 {
        if self.is_empty() {
            return 0;
        }
        let lo = self.lo / a;
        let hi = self.hi / a;
        let kmin = match self.lo_end {
            Endpoint::Closed => lo.ceil(),
            Endpoint::Open => lo.floor() + 1.0,
        };
        let kmax = match self.hi_end {
            Endpoint::Closed => hi.floor(),
            Endpoint::Open => hi.ceil() - 1.0,
        };
        if kmax < kmin {
            0
        } else {
            (kmax - kmin) as u64 + 1
        }
    }
}

/// Finite union of pairwise disjoint intervals and points.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RealSet {
    pub parts: Vec<RealInterval>,
}

impl RealSet {
    pub fn new(parts: Vec<RealInterval>) -> Self {
        RealSet { parts }
    }

    pub fn interval(iv: RealInterval) -> Self {
        RealSet { parts: vec![iv] }
    }

    pub fn lebesgue(&self) -> f64 {
        self.parts.iter().map(|p| p.len()).sum()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.parts.iter().any(|p| p.contains(x))
    }

    pub fn shifted(&self, by: f64) -> Self {
        RealSet { parts: self.parts.iter().map(|p| p.shifted(by)).collect() }
    }
}

/// Haar measure u_V(set), normalized so that large balls carry their
/// Lebesgue mass.
pub fn haar_mass(v: &LineGroup, set: &RealSet) -> Result<f64, GroupError> {
    match v {
        LineGroup::Real => Ok(set.lebesgue()),
        LineGroup::Lattice(a) => {
            let af = a.to_f64();
            let count: u64 = set.parts.iter().map(|p| p.count_lattice(af)).sum();
            Ok(af * count as f64)
        }
        LineGroup::Zero => Err(GroupError::UnsupportedGroup("Haar measure on {0} has no Lebesgue normalization".into())),
    }
}

/// (1/N) Σ_{n=1..N} u_M(set + κ_n) with κ_n = −n·r mod M.
pub fn weyl_average(m: &LineGroup, r: &QuadScalar, n: u64, set: &RealSet) -> Result<f64, GroupError> {
    assert!(n >= 1, "weyl_average needs N >= 1");
    match m {
        LineGroup::Real => haar_mass(m, set),
        LineGroup::Zero => Err(GroupError::UnsupportedGroup("M = {0}".into())),
        LineGroup::Lattice(a) => {
            let step = (-r).rem_euclid(a);
            let mut kappa = QuadScalar::zero();
            let mut total = 0.0;
            for _ in 0..n {
                kappa = (&kappa + &step).rem_euclid(a);
                total += haar_mass(m, &set.shifted(kappa.to_f64()))?;
            }
            Ok(total / n as f64)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn haar_examples() {
        let two = LineGroup::Lattice(QuadScalar::int(2));
        let ball = RealSet::interval(RealInterval::closed(-5.0, 5.0));
        assert_eq!(haar_mass(&two, &ball).unwrap(), 10.0);
        let unit = RealSet::interval(RealInterval::closed(0.0, 2.0));
        assert_eq!(haar_mass(&LineGroup::Real, &unit).unwrap(), 2.0);
        let origin = RealSet::interval(RealInterval::point(0.0));
        assert_eq!(haar_mass(&LineGroup::Lattice(QuadScalar::one()), &origin).unwrap(), 1.0);
    }

    #[test]
    fn haar_normalization_on_large_balls() {
        for a in [QuadScalar::ratio(1, 3), QuadScalar::sqrt(2), QuadScalar::int(7)] {
            let af = a.to_f64();
            let r = 1000.0 * af;
            let m = haar_mass(&LineGroup::Lattice(a), &RealSet::interval(RealInterval::closed(-r, r))).unwrap();
            let ratio = m / (2.0 * r);
            assert!((0.999..=1.001).contains(&ratio), "{ratio}");
        }
    }

    #[test]
    fn closure_in_one_dimension() {
        let vals = [QuadScalar::ratio(3, 4), QuadScalar::ratio(1, 2)];
        assert_eq!(closure_1d(&vals), LineGroup::Lattice(QuadScalar::ratio(1, 4)));
        let vals = [QuadScalar::one(), QuadScalar::sqrt(2)];
        assert_eq!(closure_1d(&vals), LineGroup::Real);
        assert_eq!(closure_1d(&[QuadScalar::zero()]), LineGroup::Zero);
    }

    #[test]
    fn weyl_rational_orbit() {
        let set = RealSet::interval(RealInterval::half_open(0.0, 0.1));
        let z = LineGroup::Lattice(QuadScalar::one());
        let avg = weyl_average(&z, &QuadScalar::ratio(1, 3), 3000, &set).unwrap();
        // orbit {2/3, 1/3, 0}: only κ = 0 puts a lattice point in [κ, κ + 0.1)
        assert!((avg - 1.0 / 3.0).abs() < 1e-12);
        let avg0 = weyl_average(&z, &QuadScalar::zero(), 17, &set).unwrap();
        assert_eq!(avg0, haar_mass(&z, &set).unwrap());
    }
}
