//! JSON interchange for groups.
//!
//! A rational is `[num, den]` (a bare integer is accepted on input), a
//! scalar is `[p, q]` meaning p + q√D, and a vector is a pair of scalars:
//!
//! ```json
//! {"dim_linear": 0, "linear_dirs": [], "D": 2,
//!  "lattice_basis": [[[[1,1],[0,1]], [[0,1],[1,1]]], [[[0,1],[0,1]], [[1,1],[0,1]]]],
//!  "shift": [[[0,1],[0,1]], [[0,1],[0,1]]]}
//! ```

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde_json::{json, Value};

use super::{closure_core, linalg, ClosedSubgroup2, GroupError, GroupWithShift, QVec, QuadScalar};

fn perr(msg: impl Into<String>) -> GroupError {
    GroupError::Parse(msg.into())
}

fn int_to_json(n: &BigInt) -> Value {
    match n.to_i64() {
        Some(v) => json!(v),
        None => json!(n.to_string()),
    }
}

fn int_from_json(v: &Value) -> Result<BigInt, GroupError> {
    match v {
        Value::Number(n) => n
            .as_i64()
            .map(BigInt::from)
            .ok_or_else(|| perr(format!("{n} is not an integer"))),
        Value::String(s) => s.parse().map_err(|_| perr(format!("{s:?} is not an integer"))),
        other => Err(perr(format!("expected integer, got {other}"))),
    }
}

pub fn rational_to_json(r: &BigRational) -> Value {
    json!([int_to_json(r.numer()), int_to_json(r.denom())])
}

pub fn rational_from_json(v: &Value) -> Result<BigRational, GroupError> {
    match v {
        Value::Array(a) if a.len() == 2 => {
            let n = int_from_json(&a[0])?;
            let d = int_from_json(&a[1])?;
            if d.is_zero() {
                return Err(perr("zero denominator"));
            }
            Ok(BigRational::new(n, d))
        }
        Value::Number(_) | Value::String(_) => Ok(BigRational::from_integer(int_from_json(v)?)),
        other => Err(perr(format!("expected [num, den], got {other}"))),
    }
}

pub fn scalar_to_json(x: &QuadScalar) -> Value {
    json!([rational_to_json(x.p()), rational_to_json(x.q())])
}

pub fn scalar_from_json(v: &Value, d: i64) -> Result<QuadScalar, GroupError> {
    match v {
        Value::Array(a) if a.len() == 2 && a.iter().all(|x| x.is_array()) => {
            let p = rational_from_json(&a[0])?;
            let q = rational_from_json(&a[1])?;
            QuadScalar::try_new(p, q, d).ok_or_else(|| perr(format!("D = {d} is not square-free")))
        }
        other => Ok(QuadScalar::rational(rational_from_json(other)?)),
    }
}

pub fn vec_to_json(v: &QVec) -> Value {
    json!([scalar_to_json(&v[0]), scalar_to_json(&v[1])])
}

pub fn vec_from_json(v: &Value, d: i64) -> Result<QVec, GroupError> {
    match v {
        Value::Array(a) if a.len() == 2 => Ok([scalar_from_json(&a[0], d)?, scalar_from_json(&a[1], d)?]),
        other => Err(perr(format!("expected a pair of scalars, got {other}"))),
    }
}

fn vecs_from_json(v: Option<&Value>, d: i64) -> Result<Vec<QVec>, GroupError> {
    match v {
        None | Some(Value::Null) => Ok(vec![]),
        Some(Value::Array(a)) => a.iter().map(|x| vec_from_json(x, d)).collect(),
        Some(other) => Err(perr(format!("expected a list of vectors, got {other}"))),
    }
}

pub fn group_to_json(g: &GroupWithShift) -> Value {
    json!({
        "dim_linear": g.group.dim_linear(),
        "linear_dirs": g.group.linear_dirs().iter().map(vec_to_json).collect::<Vec<_>>(),
        "lattice_basis": g.group.lattice_basis().iter().map(vec_to_json).collect::<Vec<_>>(),
        "D": g.group.radicand(),
        "shift": vec_to_json(&g.shift),
    })
}

/// Parse and re-canonicalize a group description.
pub fn group_from_json(v: &Value) -> Result<GroupWithShift, GroupError> {
    let d = v.get("D").and_then(Value::as_i64).unwrap_or(2);
    let lines = vecs_from_json(v.get("linear_dirs"), d)?;
    let lattice = vecs_from_json(v.get("lattice_basis"), d)?;
    if let Some(dim) = v.get("dim_linear").and_then(Value::as_u64) {
        if dim as usize != lines.len() {
            return Err(perr(format!("dim_linear = {dim} but {} directions given", lines.len())));
        }
    }
    let shift = match v.get("shift") {
        None | Some(Value::Null) => linalg::zero_vec(),
        Some(s) => vec_from_json(s, d)?,
    };
    let group: ClosedSubgroup2 = closure_core(d, lines, lattice)?;
    let shift = group.reduce(&shift);
    Ok(GroupWithShift { group, shift })
}
