use std::fmt;

use num_integer::Integer;

use super::linalg::{self, det, dot, scale, sub};
use super::{int, linearized_group, ClosedSubgroup2, GroupError, GroupWithShift, QVec, QuadScalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DegenerateReason {
    /// The projection of V̂ to the second coordinate is discrete.
    SecondProjectionDiscrete,
    /// V̂ does not span R² as a group (rank below two).
    NotFullRank,
}

/// Shape of the linearized group V̂. The E parameters are a′, b′, c′, d′:
/// V̂ is generated by (a′, b′) and (c′, d′).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CaseLabel {
    A,
    B { a: QuadScalar },
    C { alpha: QuadScalar, beta: QuadScalar },
    D { a: QuadScalar, b: QuadScalar, d: QuadScalar },
    E { a: QuadScalar, b: QuadScalar, c: QuadScalar, d: QuadScalar },
    Degenerate(DegenerateReason),
}

impl CaseLabel {
    pub fn letter(&self) -> &'static str {
        match self {
            CaseLabel::A => "A",
            CaseLabel::B { .. } => "B",
            CaseLabel::C { .. } => "C",
            CaseLabel::D { .. } => "D",
            CaseLabel::E { .. } => "E",
            CaseLabel::Degenerate(_) => "Degenerate",
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, CaseLabel::D { .. } | CaseLabel::E { .. })
    }
}

impl fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CaseLabel::A => write!(f, "Case A"),
            CaseLabel::B { a } => write!(f, "Case B, a={a}"),
            CaseLabel::C { alpha, beta } => write!(f, "Case C, alpha={alpha}, beta={beta}"),
            CaseLabel::D { a, b, d } => write!(f, "Case D, a={a}, b={b}, d={d}"),
            CaseLabel::E { a, b, c, d } => write!(f, "Case E, a'={a}, b'={b}, c'={c}, d'={d}"),
            CaseLabel::Degenerate(DegenerateReason::SecondProjectionDiscrete) => {
                write!(f, "Degenerate (second projection discrete)")
            }
            CaseLabel::Degenerate(DegenerateReason::NotFullRank) => write!(f, "Degenerate (rank below two)"),
        }
    }
}

/// Unimodular split of a rank-2 lattice whose `axis` coordinates are
/// commensurable: returns (w, z) with z[axis] = 0.
pub(crate) fn split_on_axis(u: &QVec, v: &QVec, axis: usize) -> Option<(QVec, QVec)> {
    let (x, y) = (&u[axis], &v[axis]);
    if x.is_zero() {
        return Some((v.clone(), u.clone()));
    }
    if y.is_zero() {
        return Some((u.clone(), v.clone()));
    }
    let ratio = x / y;
    if !ratio.is_rational() {
        return None;
    }
    let p = ratio.p().numer().clone();
    let q = ratio.p().denom().clone();
    let eg = p.extended_gcd(&q);
    let w = linalg::add(&scale(&int(eg.x), u), &scale(&int(eg.y), v));
    let z = sub(&scale(&int(q), u), &scale(&int(p), v));
    Some((w, z))
}

fn gauss_reduce(u: &QVec, v: &QVec) -> (QVec, QVec) {
    let (mut a, mut b) = (u.clone(), v.clone());
    loop {
        if dot(&b, &b) < dot(&a, &a) {
            std::mem::swap(&mut a, &mut b);
        }
        let mu = (&dot(&a, &b) / &dot(&a, &a)).round();
        if num_traits::Zero::is_zero(&mu) {
            break;
        }
        b = sub(&b, &scale(&int(mu), &a));
    }
    (a, b)
}

/// Read the case off a closed subgroup (taken to be V̂).
pub fn classify_group(v: &ClosedSubgroup2) -> CaseLabel {
    use DegenerateReason::*;
    match v.dim_linear() {
        2 => CaseLabel::A,
        1 => {
            let dir = &v.linear_dirs()[0];
            let lattice = v.lattice_basis().first();
            if dir[0].is_zero() {
                match lattice {
                    Some(l) => CaseLabel::B { a: l[0].abs() },
                    None => CaseLabel::Degenerate(NotFullRank),
                }
            } else if dir[1].is_zero() {
                CaseLabel::Degenerate(SecondProjectionDiscrete)
            } else {
                match lattice {
                    Some(l) => CaseLabel::C { alpha: dir[1].clone(), beta: l[1].abs() },
                    None => CaseLabel::Degenerate(NotFullRank),
                }
            }
        }
        _ => {
            let basis = v.lattice_basis();
            if basis.len() < 2 {
                return CaseLabel::Degenerate(NotFullRank);
            }
            if let Some((w, z)) = split_on_axis(&basis[0], &basis[1], 0) {
                let w = if w[0].is_negative() { linalg::neg(&w) } else { w };
                let d = z[1].abs();
                let b = w[1].clone();
                if (&b / &d).is_rational() {
                    return CaseLabel::Degenerate(SecondProjectionDiscrete);
                }
                return CaseLabel::D { a: w[0].clone(), b, d };
            }
            if split_on_axis(&basis[0], &basis[1], 1).is_some() {
                return CaseLabel::Degenerate(SecondProjectionDiscrete);
            }
            let (mut p, mut q) = gauss_reduce(&basis[0], &basis[1]);
            if p[1].is_negative() {
                p = linalg::neg(&p);
            }
            if q[1].is_negative() {
                q = linalg::neg(&q);
            }
            if det(&p, &q).is_negative() {
                std::mem::swap(&mut p, &mut q);
            }
            let [a, b] = p;
            let [c, d] = q;
            CaseLabel::E { a, b, c, d }
        }
    }
}

/// Case label of V̂, the closure of the group generated by `g.group` and
/// `g.shift`.
pub fn classify_case(g: &GroupWithShift) -> Result<CaseLabel, GroupError> {
    if linalg::is_zero(&g.shift) {
        Ok(classify_group(&g.group))
    } else {
        Ok(classify_group(&linearized_group(g)?))
    }
}

/// Image of `x` under [[1, −v], [0, 1]].
pub fn shear_vec(v: &QuadScalar, x: &QVec) -> QVec {
    [&x[0] - &(v * &x[1]), x[1].clone()]
}

pub fn shear_reduce(c: &CaseLabel) -> Result<(CaseLabel, QuadScalar), GroupError> {
    match c {
        CaseLabel::C { alpha, beta } => {
            let v = alpha.recip().expect("case C has alpha != 0");
            Ok((CaseLabel::B { a: (beta / alpha).abs() }, v))
        }
        CaseLabel::E { a, b, c, d } => {
            let v = c / d;
            let a_new = a - &(&(b * c) / d);
            Ok((CaseLabel::D { a: a_new, b: b.clone(), d: d.clone() }, v))
        }
        other => Err(GroupError::NotShearable(other.letter().to_string())),
    }
}

/// The closed subgroup described by a case label.
pub fn group_of_case(c: &CaseLabel, radicand: i64) -> Result<ClosedSubgroup2, GroupError> {
    let z = QuadScalar::zero;
    let o = QuadScalar::one;
    match c {
        CaseLabel::A => Ok(ClosedSubgroup2::full(radicand)),
        CaseLabel::B { a } => ClosedSubgroup2::from_parts(radicand, vec![[z(), o()]], vec![[a.clone(), z()]]),
        CaseLabel::C { alpha, beta } => {
            ClosedSubgroup2::from_parts(radicand, vec![[o(), alpha.clone()]], vec![[z(), beta.clone()]])
        }
        CaseLabel::D { a, b, d } => {
            ClosedSubgroup2::from_parts(radicand, vec![], vec![[a.clone(), b.clone()], [z(), d.clone()]])
        }
        CaseLabel::E { a, b, c, d } => {
            ClosedSubgroup2::from_parts(radicand, vec![], vec![[a.clone(), b.clone()], [c.clone(), d.clone()]])
        }
        CaseLabel::Degenerate(_) => Err(GroupError::UnsupportedGroup("degenerate case has no parameters".into())),
    }
}

pub fn covolume(c: &CaseLabel) -> Result<QuadScalar, GroupError> {
    match c {
        CaseLabel::D { a, d, .. } => Ok((a * d).abs()),
        CaseLabel::E { a, b, c, d } => Ok((&(a * d) - &(b * c)).abs()),
        other => Err(GroupError::InfiniteCovolume(other.letter().to_string())),
    }
}
