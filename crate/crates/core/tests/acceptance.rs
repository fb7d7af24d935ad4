//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

mod common;

use std::f64::consts::PI;
use std::time::Instant;

use lclt_core::groups::{
    classify_case, closure_of_group, group_of_case, minimal_group, shear_reduce, shear_vec, weyl_average, LineGroup,
    LineGroupWithShift, RealInterval, RealSet,
};
use lclt_core::montecarlo::{
    anderson_darling_normal, band_set, estimate_correlation, estimate_lclt, estimate_mlclt, estimate_sigma,
    moderate_dev_diagnostic, sample_integrals, HistogramSpec, McConfig, MdComponents, MlcltTarget, ProductSet, Window,
};
use lclt_core::predict::{
    flow_variance, mixing_classify, predict_case_d, roof_group, FlowMLCLTParams, Marginal, MixingClass, PredictionRequest,
};
use lclt_core::renewal_exact::{brute_force_enumerate, counterexample_scan, dp_distribution, extrapolate_inv_sqrt, StartMode};
use lclt_core::spectral::{eigen_curve, expansion_fit, fit_grid, fourier_lclt, Components, FourierMode, TwistedOperatorModel};
use lclt_core::systems::{pm_tail_counts, tail_slope, PmObservable, PmRoof};
use lclt_core::{CaseLabel, MarkovShiftBase, PMTowerBase, QuadScalar, RenewalBase};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Outcome = (bool, String);

fn q(s: &str) -> QuadScalar {
    QuadScalar::parse(s).expect("literal")
}

fn gauss0(var: f64) -> f64 {
    1.0 / (2.0 * PI * var).sqrt()
}

fn c1() -> Outcome {
    let fracs = ["0.2", "0.5", "0.9"];
    let ks = [20, 30, 40];
    let ts: Vec<QuadScalar> = fracs.iter().flat_map(|f| ks.iter().map(move |k| q(&format!("{k}{}", &f[1..])))).collect();
    let rows = counterexample_scan(&ts).expect("scan");
    let limits: Vec<f64> = rows
        .chunks(3)
        .map(|c| extrapolate_inv_sqrt(&c.iter().map(|r| (r.t.to_f64(), r.sqrt_t_times_p)).collect::<Vec<_>>()))
        .collect();
    let cells: Vec<usize> = rows.chunks(3).map(|c| c[0].frac_cell).collect();
    let r1 = limits[1] / limits[0];
    let r2 = limits[2] / limits[0];
    let distinct = cells[0] != cells[1] && cells[1] != cells[2] && cells[0] != cells[2];
    let ok = distinct && (r1 - 2.0 / 3.0).abs() <= 0.05 * 2.0 / 3.0 && (r2 - 1.0 / 3.0).abs() <= 0.05 / 3.0;
    (ok, format!("limits {:.5} {:.5} {:.5}, ratios 1 : {r1:.4} : {r2:.4}, cells {cells:?}", limits[0], limits[1], limits[2]))
}

fn c2() -> Outcome {
    let coin = TwistedOperatorModel::from_markov(&MarkovShiftBase::fair_coin(), Components::Phi);
    let p = fourier_lclt(&coin, 10, &[0.0], FourierMode::LatticeExact { spacing: 1.0 }).expect("fourier");
    let err = (p - 252.0 / 1024.0).abs();
    let base = RenewalBase::counterexample();
    let mut mismatches = Vec::new();
    let times = ["0.5", "1", "1.4", "2", "2.7", "3", "3.3", "4", "4.6", "5", "5.2", "6"];
    for t in times {
        let t = q(t);
        let dp = dp_distribution(&base, &t, StartMode::Palm).expect("dp");
        let bf = brute_force_enumerate(&base, &t).expect("enumeration");
        if dp.marginal != bf.marginal || dp.joint != bf.joint {
            mismatches.push(t.to_string());
        }
    }
    let ok = err <= 1e-10 && mismatches.is_empty();
    (ok, format!("|fourier − 252/1024| = {err:.2e}; DP = enumeration at {} times, mismatches {mismatches:?}", times.len()))
}

fn c3() -> Outcome {
    let pinned = MarkovShiftBase::pinned_three_state();
    let model = TwistedOperatorModel::from_markov(&pinned, Components::PhiTau);
    let target = [0.0, pinned.nu_tau()];
    let fit = expansion_fit(&eigen_curve(&model, &fit_grid(2, 8)), &target).expect("fit");
    let coin = TwistedOperatorModel::from_markov(&MarkovShiftBase::fair_coin(), Components::Phi);
    let coin_fit = expansion_fit(&eigen_curve(&coin, &fit_grid(1, 8)), &coin.mean()).expect("coin fit");
    let m = coin_fit.m[0][0];
    let ok = fit.drift_error <= 1e-8 && (m - 0.5).abs() <= 1e-6 && fit.residual_order >= 2.9;
    (
        ok,
        format!(
            "drift ({:.3e}, {:.10}) vs (0, {:.10}), error {:.2e}; coin m = {m:.9}; residual slope {:.3}",
            fit.drift[0], fit.drift[1], target[1], fit.drift_error, fit.residual_order
        ),
    )
}

fn c4() -> Outcome {
    let sys = RenewalBase::non_arithmetic();
    let sig = estimate_sigma(&sys, 20_000, 100, 41, 1).expect("sigma");
    let s = sig.flow_variance();
    let t = 400.0;
    let w = |w| Window { w, lo: -0.5, hi: 0.5 };
    let spec = HistogramSpec::new(t, vec![w(-1.0), w(0.0), w(1.0)]).expect("spec");
    let est = estimate_lclt(&sys, &spec, &McConfig::new(1_000_000, 42)).expect("lclt");
    let pred = gauss0(s);
    let center_ok = est[1].agrees(pred, 3.0, 0.10);
    let ratio = (-1.0 / (2.0 * s)).exp();
    let mut side_ok = true;
    let mut side = Vec::new();
    for e in [est[0], est[2]] {
        let r = e.point / est[1].point;
        let se = r * ((e.std_error / e.point).powi(2) + (est[1].std_error / est[1].point).powi(2)).sqrt();
        side_ok &= (r - ratio).abs() <= 3.0 * se;
        side.push(format!("{r:.4}±{se:.4}"));
    }
    (
        center_ok && side_ok,
        format!(
            "Σ = {s:.4}; √t·P̂(w=0) = {:.4}±{:.4} vs 𝔤(0) = {pred:.4}; side ratios {} vs {ratio:.4}",
            est[1].point,
            est[1].std_error,
            side.join(", ")
        ),
    )
}

fn c5() -> Outcome {
    let base = RenewalBase::counterexample();
    let t_exact = q("100.3");
    let t = t_exact.to_f64();
    let group = minimal_group(&base.cycles().expect("exact atoms")).expect("group");
    let case = classify_case(&group).expect("case");
    let sigma = flow_variance(&base.covariance(), base.nu_tau()).expect("Σ");
    let params = FlowMLCLTParams::minimal(case.clone(), sigma, base.nu_tau());
    let full = Marginal::renewal_full(&base);
    let req = PredictionRequest {
        t,
        w_of_t: 0.0,
        w: 0.0,
        l: 0,
        start: full.clone(),
        end: full,
        target: RealSet::interval(RealInterval::point(0.0)),
    };
    let pred = predict_case_d(&params, &req).expect("prediction").value;
    let dp = dp_distribution(&base, &t_exact, StartMode::Stationary).expect("dp").prob(0).to_f64() * t.sqrt();
    let everything = ProductSet::full();
    let mc = estimate_mlclt(
        &base,
        &everything,
        &everything,
        &MlcltTarget::Fiber { l: 0, spacing: 1.0 },
        t,
        0.0,
        &McConfig::new(10_000_000, 51),
    )
    .expect("mc")
    .estimate;
    let ok = matches!(case, CaseLabel::D { .. }) && mc.agrees(pred, 3.0, 0.10) && mc.agrees(dp, 3.0, 0.0);
    (ok, format!("{case}; MC {:.5}±{:.5}, predict {pred:.5}, exact DP {dp:.5}", mc.point, mc.std_error))
}

fn c6() -> Outcome {
    let one = QuadScalar::one();
    let classes = [
        mixing_classify(&LineGroupWithShift::new(LineGroup::Lattice(one.clone()), QuadScalar::sqrt(2))),
        mixing_classify(&LineGroupWithShift::new(LineGroup::Real, QuadScalar::zero())),
        mixing_classify(&LineGroupWithShift::new(LineGroup::Lattice(one.clone()), QuadScalar::ratio(1, 2))),
        mixing_classify(&roof_group(&[(QuadScalar::int(3), 1)]).expect("constant roof")),
    ];
    let expected = [MixingClass::Mixing, MixingClass::Mixing, MixingClass::NotWeaklyMixing, MixingClass::NotWeaklyMixing];
    let band_sys = RenewalBase::from_f64(&[(0.0, 1.0, 0.5), (0.0, 2.0, 0.5)]).expect("band system");
    let c = band_set(0.1);
    let period: Vec<f64> = (0..=20).map(|k| 50.0 + 0.05 * k as f64).collect();
    let band = estimate_correlation(&band_sys, &c, &c, &period, &McConfig::new(1_000_000, 61)).expect("band");
    let band_max = band.iter().map(|p| p.corr.abs()).fold(0.0, f64::max);
    let inner_min = band.iter().filter(|p| p.t > 50.1 && p.t < 50.9).map(|p| p.joint).fold(f64::INFINITY, f64::min);
    let mix_sys = MarkovShiftBase::pinned_three_state();
    let c2 = band_set(0.1);
    let grid: Vec<f64> = (0..=20).map(|k| 50.0 + 0.5 * k as f64).collect();
    let mix = estimate_correlation(&mix_sys, &c2, &c2, &grid, &McConfig::new(1_000_000, 62)).expect("mixing");
    let mix_max = mix.iter().map(|p| p.corr.abs()).fold(0.0, f64::max);
    let ok = classes == expected && band_max >= 10.0 * mix_max;
    (
        ok,
        format!(
            "classes {classes:?}; band max |corr| {band_max:.5} (min joint inside the gap {inner_min:.1e}), mixing max |corr| {mix_max:.5}"
        ),
    )
}

fn c7() -> Outcome {
    let counts = pm_tail_counts(0.25, 10_000_000, 64, 71).expect("tail");
    let slope = tail_slope(&counts, 16, 64);
    let short = tail_slope(&counts, 2, 30);
    let pm = PMTowerBase::new(0.25, PmRoof::Affine, PmObservable::SquareCentered).expect("pm");
    let sig = estimate_sigma(&pm, 4000, 1000, 72, 1).expect("sigma");
    let s = sig.flow_variance();
    let t = 200.0;
    let mut independent = McConfig::new(2000, 73);
    independent.chunk_size = 1;
    let xs = sample_integrals(&pm, t, &independent).expect("integrals");
    let ad = anderson_darling_normal(&xs, 0.0, s * t).expect("AD");
    let spec = HistogramSpec::new(t, vec![Window { w: 0.0, lo: -0.5, hi: 0.5 }]).expect("spec");
    let est = estimate_lclt(&pm, &spec, &McConfig::new(1_000_000, 74)).expect("lclt")[0];
    let pred = gauss0(s);
    let ok = (slope + 4.0).abs() <= 0.5 && ad.passes() && (est.point - pred).abs() <= 0.15 * pred;
    (
        ok,
        format!(
            "tail slope {slope:.3} on [16,64] ([2,30]: {short:.3}); AD A² = {:.3} (1% crit {}); √t·P̂ = {:.4}±{:.4} vs {pred:.4} (Σ = {s:.4})",
            ad.statistic, ad.critical_1pct, est.point, est.std_error
        ),
    )
}

fn c8() -> Outcome {
    let z = QuadScalar::zero;
    let gens = [[z(), QuadScalar::one()], [QuadScalar::one(), QuadScalar::sqrt(2)]];
    let g = closure_of_group(&gens, &[z(), z()]).expect("closure");
    let case = classify_case(&g).expect("case");
    let want = CaseLabel::D { a: QuadScalar::one(), b: QuadScalar::sqrt(2), d: QuadScalar::one() };
    let case_ok = case == want;

    let mut rng = ChaCha8Rng::seed_from_u64(81);
    let mut agree = 0;
    let mut seen = Vec::new();
    for _ in 0..40 {
        let set = common::random_generator_set(&mut rng);
        let exact = classify_case(&closure_of_group(&set, &[z(), z()]).expect("closure")).expect("case");
        let oracle = common::oracle_letter(&common::to_f64(&set));
        if exact.letter() == oracle {
            agree += 1;
        }
        seen.push(exact.letter());
    }

    let c = CaseLabel::C { alpha: QuadScalar::sqrt(2), beta: QuadScalar::int(3) };
    let (b, v) = shear_reduce(&c).expect("shear");
    let sheared = group_of_case(&c, 2).expect("group");
    let image: Vec<_> = sheared.lattice_basis().iter().chain(sheared.linear_dirs()).map(|x| shear_vec(&v, x)).collect();
    let shear_ok = b == (CaseLabel::B { a: QuadScalar::from_ints(0, 3, 2) / QuadScalar::int(2) })
        && image.iter().any(|x| x[0].is_zero())
        && v == QuadScalar::from_ints(0, 1, 2) / QuadScalar::int(2);

    let set = RealSet::interval(RealInterval::half_open(0.0, 0.37));
    let avg = weyl_average(&LineGroup::Lattice(QuadScalar::one()), &QuadScalar::sqrt(2), 100_000, &set).expect("weyl");
    let weyl_ok = (avg - 0.37).abs() <= 0.02;
    let ok = case_ok && agree == 40 && shear_ok && weyl_ok;
    (ok, format!("{case}; oracle agreement {agree}/40 over {seen:?}; shear C → {b}; weyl average {avg:.5} vs 0.37"))
}

fn c9() -> Outcome {
    let base = RenewalBase::counterexample();
    let ks = [0.0, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 10.0];
    let rows = moderate_dev_diagnostic(&base, MdComponents::Tau, &[400.0], &ks, 10.0, [0.0, base.nu_tau()], &McConfig::new(100_000, 91))
        .expect("table");
    let monotone = rows.windows(2).all(|p| p[1].value <= p[0].value + 2.0 * p[0].std_error.max(p[1].std_error));
    let at = |k: f64| rows.iter().find(|r| r.k == k).expect("row");
    let (v2, v10) = (at(2.0), at(10.0));
    let unit = RenewalBase::from_f64(&[(-1.0, 1.0, 0.5), (1.0, 1.0, 0.5)]).expect("unit roof");
    let flat = moderate_dev_diagnostic(&unit, MdComponents::Tau, &[400.0], &[1.0, 2.0], 10.0, [0.0, 1.0], &McConfig::new(1000, 92))
        .expect("unit table");
    let ok = monotone && v2.value > 0.0 && v10.value * 5.0 <= v2.value && flat.iter().all(|r| r.value == 0.0);
    let table: Vec<String> = rows.iter().map(|r| format!("K={}:{:.2e}", r.k, r.value)).collect();
    (ok, format!("w=400, R=10, n ≤ {}: {}", rows[0].truncation, table.join(" ")))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] =
        [("C1", c1), ("C2", c2), ("C3", c3), ("C4", c4), ("C5", c5), ("C6", c6), ("C7", c7), ("C8", c8), ("C9", c9)];
    let mut failed = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let (ok, detail) = f();
        if !ok {
            failed += 1;
        }
        println!("{name} {} [{:.1}s] {detail}", if ok { "PASS" } else { "FAIL" }, start.elapsed().as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
