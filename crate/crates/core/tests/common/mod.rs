//! Floating-point oracle for the case classification: fold many integer
//! combinations of the generators into a fundamental cell and read the
//! closure off the cluster of points near the origin.

#![allow(dead_code)]

use lclt_core::{QVec, QuadScalar};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn cross(u: [f64; 2], v: [f64; 2]) -> f64 {
    u[0] * v[1] - u[1] * v[0]
}

fn norm(u: [f64; 2]) -> f64 {
    u[0].hypot(u[1])
}

fn combos(gens: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let k: i64 = match gens.len() {
        1 => 2000,
        2 => 200,
        3 => 40,
        _ => 12,
    };
    let mut pts = vec![[0.0, 0.0]];
    for g in gens {
        let mut next = Vec::with_capacity(pts.len() * (2 * k as usize + 1));
        for p in &pts {
            for c in -k..=k {
                next.push([p[0] + c as f64 * g[0], p[1] + c as f64 * g[1]]);
            }
        }
        pts = next;
    }
    pts
}

/// Lagrange-reduced basis of the lattice spanned by u and v.
fn reduce(mut u: [f64; 2], mut v: [f64; 2]) -> ([f64; 2], [f64; 2]) {
    loop {
        if norm(v) < norm(u) {
            std::mem::swap(&mut u, &mut v);
        }
        let k = ((u[0] * v[0] + u[1] * v[1]) / (u[0] * u[0] + u[1] * u[1])).round();
        let w = [v[0] - k * u[0], v[1] - k * u[1]];
        if k == 0.0 || norm(w) >= norm(v) * (1.0 - 1e-12) {
            return (u, v);
        }
        v = w;
    }
}

/// Small nonzero group elements found by folding multiples of the extra
/// generators into the fundamental cell of the lattice spanned by the two
/// most independent generators; coordinates are relative to that basis.
fn folded_small_points(gens: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let (mut bi, mut bj, mut best) = (0, 1, 0.0);
    for i in 0..gens.len() {
        for j in i + 1..gens.len() {
            let d = cross(gens[i], gens[j]).abs();
            if d > best {
                (bi, bj, best) = (i, j, d);
            }
        }
    }
    let (b1, b2) = reduce(gens[bi], gens[bj]);
    let det = cross(b1, b2);
    let extra: Vec<[f64; 2]> = (0..gens.len()).filter(|k| *k != bi && *k != bj).map(|k| gens[k]).collect();
    let k: i64 = if extra.len() == 1 { 100_000 } else { 400 };
    let eps = 0.002;
    let mut out = Vec::new();
    let mut visit = |v: [f64; 2]| {
        let c = [cross(v, b2) / det, cross(b1, v) / det];
        let r = [c[0] - c[0].round(), c[1] - c[1].round()];
        if r[0].abs().max(r[1].abs()) < eps && r[0].abs().max(r[1].abs()) > 1e-9 {
            out.push([r[0] * b1[0] + r[1] * b2[0], r[0] * b1[1] + r[1] * b2[1]]);
        }
    };
    match extra.as_slice() {
        [] => {}
        [h] => (1..=k).for_each(|n| visit([n as f64 * h[0], n as f64 * h[1]])),
        [h, g] => {
            for n in -k..=k {
                for m in 0..=k {
                    visit([n as f64 * h[0] + m as f64 * g[0], n as f64 * h[1] + m as f64 * g[1]]);
                }
            }
        }
        _ => panic!("at most four generators"),
    }
    out
}

/// Case letter ("A".."E" or "Degenerate") of the closure of the group
/// generated by `gens`.
pub fn oracle_letter(gens: &[[f64; 2]]) -> &'static str {
    let scale = gens.iter().map(|g| norm(*g)).fold(0.0, f64::max);
    let tiny = 1e-9 * scale;
    let first = *gens.iter().find(|g| norm(**g) > tiny).expect("nonzero generator");
    if gens.iter().all(|g| cross(first, *g).abs() <= 1e-9 * norm(first) * norm(*g)) {
        return "Degenerate";
    }
    let small = folded_small_points(gens);
    if small.is_empty() {
        let pts: Vec<[f64; 2]> = combos(gens).into_iter().filter(|p| norm(*p) > tiny).collect();
        let min_y = pts.iter().map(|p| p[1].abs()).filter(|y| *y > tiny).fold(f64::INFINITY, f64::min);
        if min_y > 1e-2 * scale {
            return "Degenerate";
        }
        let vertical = pts.iter().any(|p| p[0].abs() <= tiny);
        return if vertical { "D" } else { "E" };
    }
    let u = small.iter().copied().min_by(|a, b| norm(*a).total_cmp(&norm(*b))).expect("small point");
    let u = [u[0] / norm(u), u[1] / norm(u)];
    if !small.iter().all(|p| cross(u, *p).abs() <= 1e-4 * norm(*p)) {
        return "A";
    }
    if u[0].abs() < 1e-6 {
        "B"
    } else if u[1].abs() < 1e-6 {
        "Degenerate"
    } else {
        "C"
    }
}

fn rand_quad(rng: &mut ChaCha8Rng) -> QuadScalar {
    QuadScalar::from_ints(rng.random_range(-3..=3), rng.random_range(-3..=3), 2)
}

fn rand_vec(rng: &mut ChaCha8Rng) -> QVec {
    loop {
        let v = [rand_quad(rng), rand_quad(rng)];
        if !(v[0].is_zero() && v[1].is_zero()) {
            return v;
        }
    }
}

/// Generator sets over Q(√2) of several shapes: two free vectors, a pair
/// with an axis vector, a vector with a √2 multiple of it, or three free
/// vectors.
pub fn random_generator_set(rng: &mut ChaCha8Rng) -> Vec<QVec> {
    let s2 = QuadScalar::sqrt(2);
    match rng.random_range(0..4) {
        0 => vec![rand_vec(rng), rand_vec(rng)],
        1 => vec![[QuadScalar::zero(), QuadScalar::from_ints(rng.random_range(1..=3), 0, 2)], rand_vec(rng)],
        2 => {
            let v = rand_vec(rng);
            let w = [&v[0] * &s2, &v[1] * &s2];
            vec![v, w, rand_vec(rng)]
        }
        _ => vec![rand_vec(rng), rand_vec(rng), rand_vec(rng)],
    }
}

pub fn to_f64(gens: &[QVec]) -> Vec<[f64; 2]> {
    gens.iter().map(|g| [g[0].to_f64(), g[1].to_f64()]).collect()
}
