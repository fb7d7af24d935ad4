//! Adaptive Gauss–Legendre quadrature.

const NODES: [f64; 5] = [0.0, 0.538_469_310_105_683_1, -0.538_469_310_105_683_1, 0.906_179_845_938_664, -0.906_179_845_938_664];
const WEIGHTS: [f64; 5] = [
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_47,
    0.478_628_670_499_366_47,
    0.236_926_885_056_189_08,
    0.236_926_885_056_189_08,
];

fn gl5(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> f64 {
    let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
    NODES.iter().zip(WEIGHTS).map(|(x, w)| w * f(m + h * x)).sum::<f64>() * h
}

fn refine(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let left = gl5(f, a, m);
    let right = gl5(f, m, b);
    if depth == 0 || (left + right - whole).abs() <= tol {
        return left + right;
    }
    refine(f, a, m, left, 0.5 * tol, depth - 1) + refine(f, m, b, right, 0.5 * tol, depth - 1)
}

/// ∫ₐᵇ f to absolute tolerance `tol` (best effort past 40 bisections).
pub fn integrate(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let whole = gl5(&mut f, a, b);
    refine(&mut f, a, b, whole, tol, 40)
}

/// Like [`integrate`] but split into `panels` equal panels first, each
/// refined to `tol / panels`; `None` if some panel still disagrees with its
/// halves after `max_depth` bisections.
pub fn integrate_panels(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, panels: usize, tol: f64, max_depth: u32) -> Option<f64> {
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    let ptol = tol / panels as f64;
    let mut total = 0.0;
    for k in 0..panels {
        let (lo, hi) = (a + h * k as f64, if k + 1 == panels { b } else { a + h * (k + 1) as f64 });
        let whole = gl5(&mut f, lo, hi);
        total += refine_checked(&mut f, lo, hi, whole, ptol, max_depth)?;
    }
    Some(total)
}

fn refine_checked(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> Option<f64> {
    let m = 0.5 * (a + b);
    let left = gl5(f, a, m);
    let right = gl5(f, m, b);
    if (left + right - whole).abs() <= tol.max(1e-15 * (left + right).abs()) {
        return Some(left + right);
    }
    if depth == 0 {
        return None;
    }
    Some(refine_checked(f, a, m, left, 0.5 * tol, depth - 1)? + refine_checked(f, m, b, right, 0.5 * tol, depth - 1)?)
}

/// ∫ over [x0, x1] × [y0, y1] by nesting the one-dimensional rule.
pub fn integrate_2d(f: impl Fn(f64, f64) -> f64, x: (f64, f64), y: (f64, f64), tol: f64) -> f64 {
    let inner_tol = tol / (2.0 * (x.1 - x.0).abs().max(1.0));
    integrate(|u| integrate(|v| f(u, v), y.0, y.1, inner_tol), x.0, x.1, tol)
}
