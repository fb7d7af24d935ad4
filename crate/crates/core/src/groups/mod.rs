//! Closed subgroups of R² with entries in a real quadratic field.
//!
//! Closures are computed exactly: the generators are lifted to Q⁴ (rational
//! and √D parts), the kernel of the evaluation map picks out the directions
//! along which the group becomes dense, and the remaining discrete part is
//! reduced with an integer echelon form.

mod case;
pub mod json;
mod line;
pub mod linalg;
pub mod quad;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed};
use thiserror::Error;

pub use case::{classify_case, classify_group, covolume, group_of_case, shear_reduce, shear_vec, CaseLabel, DegenerateReason};
pub use line::{closure_1d, haar_mass, weyl_average, Endpoint, LineGroup, LineGroupWithShift, RealInterval, RealSet};
pub use quad::QuadScalar;

use linalg::{det, dot, scale, span_basis, sub};

/// A point of R² with coordinates in Q(√D).
pub type QVec = [QuadScalar; 2];

pub fn qvec(x: QuadScalar, y: QuadScalar) -> QVec {
    [x, y]
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GroupError {
    #[error("generators mix the quadratic rings Q(√{0}) and Q(√{1})")]
    MixedRing(i64, i64),
    #[error("more than two independent linear directions: {0}")]
    Rank(String),
    #[error("invalid generator set: {0}")]
    InvalidGenerators(String),
    #[error("case {0} cannot be sheared")]
    NotShearable(String),
    #[error("unsupported group: {0}")]
    UnsupportedGroup(String),
    #[error("case {0} has infinite covolume")]
    InfiniteCovolume(String),
    #[error("malformed group description: {0}")]
    Parse(String),
}

/// A closed subgroup Y ⊕ L of R²: a linear subspace Y plus a lattice L
/// transverse to it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClosedSubgroup2 {
    radicand: i64,
    linear_dirs: Vec<QVec>,
    lattice_basis: Vec<QVec>,
    canonical: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupWithShift {
    pub group: ClosedSubgroup2,
    pub shift: QVec,
}

impl ClosedSubgroup2 {
    pub fn full(radicand: i64) -> Self {
        ClosedSubgroup2 {
            radicand,
            linear_dirs: vec![unit(0), unit(1)],
            lattice_basis: vec![],
            canonical: true,
        }
    }

    pub fn trivial(radicand: i64) -> Self {
        ClosedSubgroup2 { radicand, linear_dirs: vec![], lattice_basis: vec![], canonical: true }
    }

    /// Build from explicit parts and canonicalize. Fails if the parts are
    /// not independent.
    pub fn from_parts(radicand: i64, linear_dirs: Vec<QVec>, lattice_basis: Vec<QVec>) -> Result<Self, GroupError> {
        let mut all = linear_dirs.clone();
        all.extend(lattice_basis.iter().cloned());
        if all.len() > 2 || span_basis(&all).len() != all.len() {
            return Err(GroupError::Rank(format!(
                "{} directions and {} lattice vectors are not independent",
                linear_dirs.len(),
                lattice_basis.len()
            )));
        }
        closure_core(radicand, linear_dirs, lattice_basis)
    }

    pub fn radicand(&self) -> i64 {
        self.radicand
    }

    pub fn dim_linear(&self) -> usize {
        self.linear_dirs.len()
    }

    pub fn linear_dirs(&self) -> &[QVec] {
        &self.linear_dirs
    }

    pub fn lattice_basis(&self) -> &[QVec] {
        &self.lattice_basis
    }

    pub fn is_canonical(&self) -> bool {
        self.canonical
    }

    pub fn rank(&self) -> usize {
        self.linear_dirs.len() + self.lattice_basis.len()
    }

    /// Reduce `v` into the fundamental domain: coordinates along linear
    /// directions are dropped, lattice coordinates are taken in [0, 1), and
    /// any component transverse to the group is kept.
    pub fn reduce(&self, v: &QVec) -> QVec {
        let basis: Vec<(&QVec, bool)> = self
            .linear_dirs
            .iter()
            .map(|b| (b, true))
            .chain(self.lattice_basis.iter().map(|b| (b, false)))
            .collect();
        let fold = |c: QuadScalar, linear: bool| if linear { QuadScalar::zero() } else { frac(&c) };
        match basis.len() {
            0 => v.clone(),
            1 => {
                let (b, lin) = basis[0];
                let c = &dot(v, b) / &dot(b, b);
                let rest = sub(v, &scale(&c, b));
                linalg::add(&rest, &scale(&fold(c, lin), b))
            }
            _ => {
                let (b0, l0) = basis[0];
                let (b1, l1) = basis[1];
                let dt = det(b0, b1);
                let x = &det(v, b1) / &dt;
                let y = &det(b0, v) / &dt;
                linalg::add(&scale(&fold(x, l0), b0), &scale(&fold(y, l1), b1))
            }
        }
    }

    pub fn contains(&self, v: &QVec) -> bool {
        linalg::is_zero(&self.reduce(v))
    }

    /// Restriction to a subgroup of the first coordinate axis.
    pub fn as_line_group(&self) -> Result<LineGroup, GroupError> {
        let on_axis = |v: &QVec| v[1].is_zero();
        if !self.linear_dirs.iter().chain(&self.lattice_basis).all(on_axis) {
            return Err(GroupError::UnsupportedGroup("not contained in R×{0}".into()));
        }
        Ok(match (self.linear_dirs.len(), self.lattice_basis.first()) {
            (0, None) => LineGroup::Zero,
            (0, Some(b)) => LineGroup::Lattice(b[0].abs()),
            _ => LineGroup::Real,
        })
    }
}

fn unit(i: usize) -> QVec {
    let mut v = linalg::zero_vec();
    v[i] = QuadScalar::one();
    v
}

fn frac(c: &QuadScalar) -> QuadScalar {
    c - &QuadScalar::from_bigint(c.floor())
}

fn common_radicand(vs: &[&QVec]) -> Result<i64, GroupError> {
    common_radicand_or(vs, 2)
}

fn common_radicand_or(vs: &[&QVec], default: i64) -> Result<i64, GroupError> {
    let mut ring: Option<i64> = None;
    for v in vs {
        for x in v.iter() {
            if let Some(d) = x.ring() {
                match ring {
                    Some(r) if r != d => return Err(GroupError::MixedRing(r, d)),
                    _ => ring = Some(d),
                }
            }
        }
    }
    Ok(ring.unwrap_or(default))
}

/// Closure of the subgroup generated by `generators`, with `shift` reduced
/// modulo it.
pub fn closure_of_group(generators: &[QVec], shift: &QVec) -> Result<GroupWithShift, GroupError> {
    if generators.is_empty() || generators.len() > 4 {
        return Err(GroupError::InvalidGenerators(format!(
            "expected 1 to 4 generators, got {}",
            generators.len()
        )));
    }
    let all: Vec<&QVec> = generators.iter().chain(std::iter::once(shift)).collect();
    let d = common_radicand(&all)?;
    let group = closure_core(d, vec![], generators.to_vec())?;
    let shift = normalize_vec(group.reduce(shift), d);
    Ok(GroupWithShift { group, shift })
}

/// Closure of the group generated by `M` and its shift, i.e. V̂.
pub fn linearized_group(g: &GroupWithShift) -> Result<ClosedSubgroup2, GroupError> {
    let mut vs: Vec<&QVec> = g.group.linear_dirs.iter().chain(&g.group.lattice_basis).collect();
    vs.push(&g.shift);
    let d = common_radicand_or(&vs, g.group.radicand)?;
    let mut gens = g.group.lattice_basis.clone();
    gens.push(g.shift.clone());
    closure_core(d, g.group.linear_dirs.clone(), gens)
}

/// Closure of `lines` (real spans) plus the Z-span of `gens`.
pub(crate) fn closure_core(radicand: i64, lines: Vec<QVec>, gens: Vec<QVec>) -> Result<ClosedSubgroup2, GroupError> {
    let gens: Vec<QVec> = gens.into_iter().filter(|g| !linalg::is_zero(g)).collect();
    let mut y = span_basis(&lines);
    if y.is_empty() && !gens.is_empty() {
        let mut dense = Vec::new();
        for c in linalg::nullspace(&gens) {
            let rational = c.iter().map(|x| QuadScalar::rational(x.p().clone()));
            let irrational = c.iter().map(|x| QuadScalar::rational(x.q().clone()));
            for coeffs in [rational.collect::<Vec<_>>(), irrational.collect::<Vec<_>>()] {
                let mut acc = linalg::zero_vec();
                for (k, g) in coeffs.iter().zip(&gens) {
                    acc = linalg::add(&acc, &scale(k, g));
                }
                dense.push(acc);
            }
        }
        y = span_basis(&dense);
    }
    let group = match y.len() {
        2 => ClosedSubgroup2::full(radicand),
        1 => {
            let dir = normalize_dir(&y[0]);
            let values: Vec<QuadScalar> = gens.iter().map(|g| det(&dir, g)).collect();
            match closure_1d(&values) {
                LineGroup::Real => ClosedSubgroup2::full(radicand),
                LineGroup::Zero => ClosedSubgroup2 {
                    radicand,
                    linear_dirs: vec![dir],
                    lattice_basis: vec![],
                    canonical: true,
                },
                LineGroup::Lattice(gap) => {
                    let v = if dir[0].is_zero() {
                        [gap, QuadScalar::zero()]
                    } else {
                        [QuadScalar::zero(), gap]
                    };
                    ClosedSubgroup2 { radicand, linear_dirs: vec![dir], lattice_basis: vec![v], canonical: true }
                }
            }
        }
        _ => ClosedSubgroup2 {
            radicand,
            linear_dirs: vec![],
            lattice_basis: discrete_basis(&gens)?,
            canonical: true,
        },
    };
    Ok(normalize_group(group))
}

fn normalize_vec(v: QVec, d: i64) -> QVec {
    let [a, b] = v;
    [a.with_radicand_lenient(d), b.with_radicand_lenient(d)]
}

fn normalize_group(mut g: ClosedSubgroup2) -> ClosedSubgroup2 {
    let d = g.radicand;
    g.linear_dirs = g.linear_dirs.into_iter().map(|v| normalize_vec(v, d)).collect();
    g.lattice_basis = g.lattice_basis.into_iter().map(|v| normalize_vec(v, d)).collect();
    g
}

impl QuadScalar {
    fn with_radicand_lenient(self, d: i64) -> QuadScalar {
        if self.is_rational() {
            self.with_radicand(d)
        } else {
            self
        }
    }
}

/// (1, α) when the first coordinate is nonzero, otherwise (0, 1).
fn normalize_dir(v: &QVec) -> QVec {
    if v[0].is_zero() {
        unit(1)
    } else {
        [QuadScalar::one(), &v[1] / &v[0]]
    }
}

/// Lattice basis of the group generated by `gens`, assuming the evaluation
/// map from their rational span is injective.
fn discrete_basis(gens: &[QVec]) -> Result<Vec<QVec>, GroupError> {
    if gens.is_empty() {
        return Ok(vec![]);
    }
    let parts: Vec<[&BigRational; 4]> = gens.iter().map(|g| [g[0].p(), g[1].p(), g[0].q(), g[1].q()]).collect();
    let flat: Vec<&BigRational> = parts.iter().flat_map(|r| r.iter().copied()).collect();
    let den = linalg::lcm_den(&flat);
    let den_r = BigRational::from_integer(den.clone());
    let rows: Vec<Vec<BigInt>> = parts
        .iter()
        .map(|r| r.iter().map(|x| (*x * &den_r).to_integer()).collect())
        .collect();
    let d = common_radicand(&gens.iter().collect::<Vec<_>>())?;
    let ech = linalg::hermite_form(rows);
    if ech.len() > 2 {
        return Err(GroupError::Rank(format!("discrete part has rank {}", ech.len())));
    }
    let basis: Vec<QVec> = ech
        .iter()
        .map(|r| {
            let c = |i: usize| BigRational::new(r[i].clone(), den.clone());
            [QuadScalar::new(c(0), c(2), d), QuadScalar::new(c(1), c(3), d)]
        })
        .collect();
    Ok(basis)
}

pub(crate) fn int(n: BigInt) -> QuadScalar {
    QuadScalar::from_bigint(n)
}

/// Minimal group and shift from closed-walk data: each entry is the
/// cumulative value of a closed walk and its length. The walk lengths must
/// have gcd 1.
pub fn minimal_group(cycles: &[(QVec, i64)]) -> Result<GroupWithShift, GroupError> {
    if cycles.is_empty() {
        return Err(GroupError::InvalidGenerators("no cycles".into()));
    }
    let d = common_radicand(&cycles.iter().map(|c| &c.0).collect::<Vec<_>>())?;
    let mut acc_vec = cycles[0].0.clone();
    let mut acc_len = BigInt::from(cycles[0].1);
    for (v, n) in &cycles[1..] {
        let eg = num_integer::Integer::extended_gcd(&acc_len, &BigInt::from(*n));
        acc_vec = linalg::add(&scale(&int(eg.x.clone()), &acc_vec), &scale(&int(eg.y.clone()), v));
        acc_len = eg.gcd;
    }
    if acc_len.is_negative() {
        acc_len = -acc_len;
        acc_vec = linalg::neg(&acc_vec);
    }
    if !acc_len.is_one() {
        return Err(GroupError::InvalidGenerators(format!("cycle lengths have gcd {acc_len}")));
    }
    let r = acc_vec;
    let gens: Vec<QVec> = cycles
        .iter()
        .map(|(v, n)| sub(v, &scale(&QuadScalar::int(*n), &r)))
        .collect();
    let group = closure_core(d, vec![], gens)?;
    let shift = normalize_vec(group.reduce(&r), d);
    Ok(GroupWithShift { group, shift })
}
