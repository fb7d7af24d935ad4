use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::quad::QuadScalar;
use super::QVec;

pub fn det(u: &QVec, v: &QVec) -> QuadScalar {
    &u[0] * &v[1] - &u[1] * &v[0]
}

pub fn dot(u: &QVec, v: &QVec) -> QuadScalar {
    &u[0] * &v[0] + &u[1] * &v[1]
}

pub fn add(u: &QVec, v: &QVec) -> QVec {
    [&u[0] + &v[0], &u[1] + &v[1]]
}

pub fn sub(u: &QVec, v: &QVec) -> QVec {
    [&u[0] - &v[0], &u[1] - &v[1]]
}

pub fn scale(k: &QuadScalar, v: &QVec) -> QVec {
    [k * &v[0], k * &v[1]]
}

pub fn neg(v: &QVec) -> QVec {
    [-&v[0], -&v[1]]
}

pub fn is_zero(v: &QVec) -> bool {
    v[0].is_zero() && v[1].is_zero()
}

pub fn zero_vec() -> QVec {
    [QuadScalar::zero(), QuadScalar::zero()]
}

/// A maximal linearly independent subset (at most two vectors).
pub fn span_basis(vs: &[QVec]) -> Vec<QVec> {
    let mut out: Vec<QVec> = Vec::new();
    for v in vs {
        if is_zero(v) {
            continue;
        }
        match out.len() {
            0 => out.push(v.clone()),
            1 => {
                if !det(&out[0], v).is_zero() {
                    out.push(v.clone());
                    break;
                }
            }
            _ => break,
        }
    }
    out
}

/// Basis of the kernel of the 2×m matrix whose columns are `cols`, over Q(√D).
pub fn nullspace(cols: &[QVec]) -> Vec<Vec<QuadScalar>> {
    let m = cols.len();
    let mut rows: Vec<Vec<QuadScalar>> = (0..2)
        .map(|r| cols.iter().map(|c| c[r].clone()).collect())
        .collect();
    let mut pivots = Vec::new();
    let mut r = 0;
    for col in 0..m {
        if r == rows.len() {
            break;
        }
        let Some(pr) = (r..rows.len()).find(|&i| !rows[i][col].is_zero()) else {
            continue;
        };
        rows.swap(r, pr);
        let inv = rows[r][col].recip().unwrap();
        for x in rows[r].iter_mut() {
            *x = &*x * &inv;
        }
        for i in 0..rows.len() {
            if i != r && !rows[i][col].is_zero() {
                let f = rows[i][col].clone();
                for j in 0..m {
                    let delta = &f * &rows[r][j];
                    rows[i][j] = &rows[i][j] - &delta;
                }
            }
        }
        pivots.push(col);
        r += 1;
    }
    let mut basis = Vec::new();
    for free in (0..m).filter(|c| !pivots.contains(c)) {
        let mut v = vec![QuadScalar::zero(); m];
        v[free] = QuadScalar::one();
        for (i, &pc) in pivots.iter().enumerate() {
            v[pc] = -&rows[i][free];
        }
        basis.push(v);
    }
    basis
}

pub fn lcm_den(xs: &[&BigRational]) -> BigInt {
    xs.iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()))
}

/// Row echelon form over Z; returns the nonzero rows.
pub fn integer_echelon(mut rows: Vec<Vec<BigInt>>) -> Vec<Vec<BigInt>> {
    let ncols = rows.first().map_or(0, |r| r.len());
    let mut r = 0;
    for col in 0..ncols {
        loop {
            let live: Vec<usize> = (r..rows.len()).filter(|&i| !rows[i][col].is_zero()).collect();
            if live.is_empty() {
                break;
            }
            let best = *live.iter().min_by_key(|&&i| rows[i][col].abs()).unwrap();
            rows.swap(r, best);
            let mut done = true;
            for i in r + 1..rows.len() {
                if rows[i][col].is_zero() {
                    continue;
                }
                let q = rows[i][col].div_floor(&rows[r][col]);
                for j in 0..ncols {
                    let delta = &q * &rows[r][j];
                    rows[i][j] -= delta;
                }
                if !rows[i][col].is_zero() {
                    done = false;
                }
            }
            if done {
                if rows[r][col].is_negative() {
                    for x in rows[r].iter_mut() {
                        *x = -&*x;
                    }
                }
                r += 1;
                break;
            }
        }
        if r == rows.len() {
            break;
        }
    }
    rows.truncate(r);
    rows
}

/// Fully reduced Hermite form: echelon with positive pivots and entries
/// above each pivot in [0, pivot).
pub fn hermite_form(rows: Vec<Vec<BigInt>>) -> Vec<Vec<BigInt>> {
    let mut rows = integer_echelon(rows);
    for r in 0..rows.len() {
        let c = rows[r].iter().position(|x| !x.is_zero()).unwrap();
        for i in 0..r {
            let q = rows[i][c].div_floor(&rows[r][c]);
            if q.is_zero() {
                continue;
            }
            let pivot_row = rows[r].clone();
            for (x, y) in rows[i].iter_mut().zip(&pivot_row) {
                *x -= &q * y;
            }
        }
    }
    rows
}

/// gcd of a list of rationals: the positive generator of the group they span.
pub fn rational_gcd(xs: &[BigRational]) -> Option<BigRational> {
    let mut num = BigInt::zero();
    let mut den = BigInt::one();
    let mut any = false;
    for x in xs.iter().filter(|x| !x.is_zero()) {
        any = true;
        num = num.gcd(x.numer());
        den = den.lcm(x.denom());
    }
    any.then(|| BigRational::new(num, den))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(v: &[i64]) -> Vec<BigInt> {
        v.iter().map(|&x| BigInt::from(x)).collect()
    }

    #[test]
    fn echelon_of_dependent_rows() {
        let rows = vec![b(&[2, 4, 0, 0]), b(&[3, 6, 0, 0]), b(&[0, 0, 5, 0])];
        let e = integer_echelon(rows);
        assert_eq!(e, vec![b(&[1, 2, 0, 0]), b(&[0, 0, 5, 0])]);
    }

    #[test]
    fn kernel_of_irrational_row() {
        let cols = vec![
            [QuadScalar::one(), QuadScalar::zero()],
            [QuadScalar::sqrt(2), QuadScalar::zero()],
            [QuadScalar::zero(), QuadScalar::one()],
        ];
        let k = nullspace(&cols);
        assert_eq!(k.len(), 1);
        assert_eq!(k[0][0], -QuadScalar::sqrt(2));
        assert_eq!(k[0][1], QuadScalar::one());
    }

    #[test]
    fn gcd_of_rationals() {
        let g = rational_gcd(&[
            BigRational::new(3.into(), 4.into()),
            BigRational::new(1.into(), 2.into()),
        ])
        .unwrap();
        assert_eq!(g, BigRational::new(1.into(), 4.into()));
    }
}
