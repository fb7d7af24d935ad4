use lclt_core::spectral::{fourier_lclt, Components, FourierMode, TwistedOperatorModel};
use lclt_core::MarkovShiftBase;
use num_complex::Complex64;

fn binomial(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[test]
fn coin_walk_point_masses_match_binomial_counts() {
    let coin = TwistedOperatorModel::from_markov(&MarkovShiftBase::fair_coin(), Components::Phi);
    for n in 1..=14u64 {
        for v in -(n as i64)..=(n as i64) {
            let p = fourier_lclt(&coin, n as usize, &[v as f64], FourierMode::LatticeExact { spacing: 1.0 }).unwrap();
            let want = if (n as i64 + v) % 2 == 0 { binomial(n, ((n as i64 + v) / 2) as u64) / 2f64.powi(n as i32) } else { 0.0 };
            assert!((p - want).abs() < 1e-12, "n = {n}, v = {v}: {p} vs {want}");
        }
    }
}

/// E_π exp(i⟨t, S_n⟩) by summing over all paths of length n.
fn by_paths(p: &[Vec<f64>], f: &[Vec<Vec<f64>>], pi: &[f64], t: &[f64], n: usize) -> Complex64 {
    fn walk(p: &[Vec<f64>], f: &[Vec<Vec<f64>>], t: &[f64], i: usize, left: usize) -> Complex64 {
        if left == 0 {
            return Complex64::new(1.0, 0.0);
        }
        (0..p.len())
            .filter(|&j| p[i][j] > 0.0)
            .map(|j| {
                let phase: f64 = t.iter().zip(&f[i][j]).map(|(a, b)| a * b).sum();
                Complex64::from_polar(p[i][j], phase) * walk(p, f, t, j, left - 1)
            })
            .sum()
    }
    (0..p.len()).map(|i| pi[i] * walk(p, f, t, i, n)).sum()
}

#[test]
fn characteristic_function_matches_path_enumeration() {
    let p = vec![vec![0.2, 0.5, 0.3], vec![0.6, 0.0, 0.4], vec![0.1, 0.7, 0.2]];
    let f = vec![
        vec![vec![1.0, 0.5], vec![-2.0, 1.5], vec![0.5, 1.0]],
        vec![vec![0.0, 2.0], vec![0.0, 1.0], vec![-1.0, 0.7]],
        vec![vec![3.0, 1.1], vec![0.25, 0.9], vec![-0.5, 1.3]],
    ];
    let model = TwistedOperatorModel::new(p.clone(), f.clone()).unwrap();
    for t in [[0.3, -0.2], [1.1, 0.4], [-2.0, 2.5]] {
        for n in [1, 3, 6] {
            let got = model.characteristic(&t, n);
            let want = by_paths(&p, &f, model.pi(), &t, n);
            assert!((got - want).norm() < 1e-12, "t = {t:?}, n = {n}: {got} vs {want}");
        }
    }
}
