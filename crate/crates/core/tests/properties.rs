use num_complex::Complex64;
use proptest::prelude::*;

use superres::certificate::{
    bound_functions, build_interpolation_system, kernel_eval, solve_certificate,
    certificate_modulus_on_grid, CertificateProblem, KernelKind, KernelSpec,
};
use superres::gabor::{
    adjoint_pairing_check, anti_diagonal_residual, forward_stft, DualVariable, Measurements,
    WindowSpec,
};
use superres::measure::{
    min_wraparound_distance, random_instance, support_error, tv_norm, wrap_distance,
    InstanceSpec, SpikeTrain,
};
use superres::recover::estimate_amplitudes;
use superres::sdpsolve::{hermitian_eig, project_psd, HermitianMatrix};

fn complex() -> impl Strategy<Value = Complex64> {
    (-10.0..10.0f64, -10.0..10.0f64).prop_map(|(a, b)| Complex64::new(a, b))
}

/// Spike train with at most `max` points, separated by at least 0.01.
fn spike_train(max: usize) -> impl Strategy<Value = SpikeTrain> {
    prop::collection::vec((0.0..1.0f64, complex()), 1..=max).prop_map(|pts| {
        let mut kept: Vec<(f64, Complex64)> = Vec::new();
        for (t, a) in pts {
            let a = if a.norm() < 1e-3 { Complex64::new(1.0, 0.0) } else { a };
            if kept.iter().all(|(s, _)| wrap_distance(*s, t) > 0.01) {
                kept.push((t, a));
            }
        }
        let (t, a): (Vec<f64>, Vec<Complex64>) = kept.into_iter().unzip();
        SpikeTrain::new(t, a).unwrap()
    })
}

fn hermitian(dim: usize) -> impl Strategy<Value = HermitianMatrix> {
    prop::collection::vec(-1.0..1.0f64, dim * dim * 2).prop_map(move |v| {
        HermitianMatrix::from_fn(dim, |i, j| {
            let (a, b) = (i.min(j), i.max(j));
            let re = v[2 * (a * dim + b)];
            let im = if a == b { 0.0 } else { v[2 * (a * dim + b) + 1] };
            if i <= j {
                Complex64::new(re, im)
            } else {
                Complex64::new(re, -im)
            }
        })
        .unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn adjoint_pairing_holds(
        m in spike_train(6),
        k in 1usize..12,
        n in 0usize..8,
        sigma in 0.02..0.3f64,
        seed in any::<u64>(),
    ) {
        let w = WindowSpec::new(sigma, n).unwrap();
        let mut c = DualVariable::zeros(k, n);
        let mut s = seed | 1;
        for v in c.c.iter_mut() {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            let re = (s % 2001) as f64 / 1000.0 - 1.0;
            let im = ((s >> 20) % 2001) as f64 / 1000.0 - 1.0;
            *v = Complex64::new(re, im);
        }
        let y = forward_stft(&m, &w, k);
        let diff = adjoint_pairing_check(&m, &c, &w, k).unwrap();
        let scale = y.frobenius_norm() * c.frobenius_norm();
        prop_assert!(diff <= 1e-10 * scale.max(1e-300));
    }

    #[test]
    fn measurements_are_anti_diagonal_consistent(
        m in spike_train(6),
        k in 1usize..12,
        n in 0usize..10,
        sigma in 0.02..0.3f64,
    ) {
        let w = WindowSpec::new(sigma, n).unwrap();
        let y = forward_stft(&m, &w, k);
        prop_assert!(anti_diagonal_residual(&y, &w, 1e-8) <= 1e-12);
    }

    #[test]
    fn measurements_json_round_trip(m in spike_train(4), k in 0usize..5, n in 0usize..4) {
        let w = WindowSpec::new(0.1, n).unwrap();
        let y = forward_stft(&m, &w, k);
        let back = Measurements::from_json(&y.to_json().unwrap()).unwrap();
        prop_assert_eq!(back, y);
    }

    #[test]
    fn psd_projection_is_idempotent(a in hermitian(7)) {
        let p = project_psd(&a);
        let pp = project_psd(&p);
        prop_assert!(pp.distance(&p) <= 1e-10 * p.frobenius_norm().max(1.0));
        let e = hermitian_eig(&p);
        prop_assert!(e.values.iter().all(|&l| l >= -1e-12 * a.frobenius_norm()));
    }

    #[test]
    fn eig_reconstructs(a in hermitian(9)) {
        let e = hermitian_eig(&a);
        let r = e.reconstruct(|l| l);
        prop_assert!(r.distance(&a) <= 1e-10 * a.frobenius_norm());
    }

    #[test]
    fn kernel_derivatives_match_differences(
        fc in 1.0..10.0f64,
        width in 0.5..2.0f64,
        t in -0.5..0.5f64,
    ) {
        let sigma = width / (4.0 * fc);
        let ks = KernelSpec::line(sigma, fc).unwrap();
        let h = 1e-5;
        let b = 2.0 * std::f64::consts::PI * fc + ks.curvature().sqrt();
        let pairs = [
            (KernelKind::U, KernelKind::DU, b),
            (KernelKind::DU, KernelKind::D2U, b * b),
            (KernelKind::V, KernelKind::DV, ks.curvature()),
            (KernelKind::DV, KernelKind::D2V, ks.curvature() * b),
        ];
        for (f, df, scale) in pairs {
            let fd = (kernel_eval(&ks, f, t + h) - kernel_eval(&ks, f, t - h)) / (2.0 * h);
            let exact = kernel_eval(&ks, df, t);
            prop_assert!(
                (fd - exact).abs() <= 1e-6 * exact.abs().max(scale),
                "{:?} at t = {}: {} vs {}", df, t, fd, exact
            );
        }
    }

    #[test]
    fn support_error_is_zero_on_self_and_shift_invariant(m in spike_train(5), s in -0.3..0.3f64) {
        if m.points().iter().map(|t| t * t).sum::<f64>() > 0.0 {
            prop_assert_eq!(support_error(&m, &m).unwrap(), 0.0);
        }
        let c = Complex64::new(0.0, 2.5);
        let scaled = m.scaled(c).unwrap();
        prop_assert!((tv_norm(&scaled) - 2.5 * tv_norm(&m)).abs() <= 1e-12 * tv_norm(&scaled));
        let shifted = m.shifted(s).unwrap();
        if m.len() >= 2 {
            let a = min_wraparound_distance(&m).unwrap();
            let b = min_wraparound_distance(&shifted).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn spike_train_json_round_trip(m in spike_train(6)) {
        let back = SpikeTrain::from_json(&m.to_json().unwrap()).unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn random_instances_respect_separation(delta in 0.005..0.45f64, seed in any::<u64>()) {
        let m = random_instance(&InstanceSpec::new(delta, seed)).unwrap();
        prop_assert!(!m.is_empty());
        if m.len() >= 2 {
            prop_assert!(min_wraparound_distance(&m).unwrap() >= delta * (1.0 - 1e-12));
        }
        prop_assert!(m.weights().iter().all(|a| a.norm() <= 1000.0 * 2f64.sqrt()));
        prop_assert_eq!(random_instance(&InstanceSpec::new(delta, seed)).unwrap(), m);
    }

    #[test]
    fn amplitudes_are_recovered_on_true_support(m in spike_train(5), k in 6usize..10) {
        if m.len() == 1 || min_wraparound_distance(&m).unwrap() > 0.05 {
            let w = WindowSpec::new(0.05, 6).unwrap();
            let y = forward_stft(&m, &w, k);
            let a = estimate_amplitudes(m.points(), &y, &w).unwrap();
            for (x, t) in a.iter().zip(m.weights()) {
                prop_assert!((x - t).norm() <= 1e-8 * tv_norm(&m));
            }
        }
    }

    #[test]
    fn bound_functions_are_positive_and_decreasing(x in 0.2..4.0f64, dx in 0.01..1.0f64) {
        let a = bound_functions(x).unwrap();
        let b = bound_functions(x + dx).unwrap();
        for (p, q) in [
            (a.phi, b.phi), (a.xi, b.xi), (a.rho, b.rho),
            (a.psi, b.psi), (a.eta, b.eta), (a.gamma_cap, b.gamma_cap),
        ] {
            prop_assert!(p > 0.0 && q > 0.0);
            if x >= 0.8 {
                prop_assert!(q <= p);
            }
        }
        prop_assert!(b.phi <= a.phi && b.xi <= a.xi && b.gamma_cap <= a.gamma_cap);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(30))]

    #[test]
    fn certificates_interpolate(
        fc_k in 5usize..30,
        gaps in prop::collection::vec(1.05..2.0f64, 2..8),
        phases in prop::collection::vec(0.0..6.28f64, 8),
    ) {
        let ks = KernelSpec::torus(1.0 / (4.0 * (fc_k as f64 + 0.5)), fc_k).unwrap();
        let mut t = 0.0;
        let mut support = Vec::new();
        for g in &gaps {
            t += g / ks.fc;
            support.push(t);
        }
        if t + 1.05 / ks.fc < 1.0 + support[0] {
            let signs: Vec<Complex64> = (0..support.len()).map(|i| Complex64::cis(phases[i])).collect();
            let prob = CertificateProblem::new(support, signs, ks).unwrap();
            let r = solve_certificate(&prob).unwrap();
            prop_assert!(r.interp_residual <= 1e-10);
            prop_assert!(r.deriv_residual <= 1e-8 * ks.curvature());
            prop_assert!(r.off_support_max < 1.0);
        }
    }

    #[test]
    fn u0_deviation_respects_bound(
        fc in 5.0..40.0f64,
        gaps in prop::collection::vec(1.0..3.0f64, 1..10),
    ) {
        let ks = KernelSpec::line(1.0 / (4.0 * fc), fc).unwrap();
        let mut support = vec![0.0];
        for g in &gaps {
            let last = support[support.len() - 1];
            support.push(last + g / fc);
        }
        let n = support.len();
        let prob = CertificateProblem::new(support, vec![Complex64::new(1.0, 0.0); n], ks).unwrap();
        let sys = build_interpolation_system(&prob);
        let mut dev: f64 = 0.0;
        for i in 0..n {
            let row: f64 = (0..n)
                .map(|j| (sys.u0[i * n + j] - if i == j { 1.0 } else { 0.0 }).abs())
                .sum();
            dev = dev.max(row);
        }
        let phi2 = bound_functions(2.0).unwrap().phi;
        prop_assert!(dev <= phi2 / std::f64::consts::PI + 1e-12);
    }
}

#[test]
fn symmetric_support_gives_symmetric_modulus() {
    let fc = 8.0;
    let ks = KernelSpec::line(1.0 / (4.0 * fc), fc).unwrap();
    let support = vec![-0.3, -0.15, 0.0, 0.15, 0.3];
    let signs: Vec<Complex64> = [1.0, -1.0, 1.0, -1.0, 1.0]
        .iter()
        .map(|&s| Complex64::new(s, 0.0))
        .collect();
    let prob = CertificateProblem::new(support, signs, ks).unwrap();
    let r = solve_certificate(&prob).unwrap();
    // The grid is symmetric about the centroid 0 when its size is odd.
    let g = (1 << 12) + 1;
    let vals = certificate_modulus_on_grid(&r, &prob, g);
    let grid = superres::certificate::verification_grid(&prob, g);
    let lo = grid[0];
    let hi = grid[g - 1] + (grid[1] - grid[0]);
    assert!((lo + hi).abs() < 1e-12);
    for j in 1..g {
        let k = g - j;
        assert!((vals[j] - vals[k]).abs() <= 1e-10, "{j}");
    }
}

#[test]
fn torus_and_line_certificates_agree_away_from_the_wrap() {
    let k = 60;
    let sigma = 0.004;
    let fc = k as f64 + 0.5;
    let support = vec![0.3, 0.42, 0.55, 0.7];
    let signs: Vec<Complex64> = [0.3, 2.0, -1.0, 4.0].iter().map(|&p| Complex64::cis(p)).collect();
    let torus = CertificateProblem::new(support.clone(), signs.clone(), KernelSpec::torus(sigma, k).unwrap())
        .unwrap();
    let line = CertificateProblem::new(support, signs, KernelSpec::line(sigma, fc).unwrap()).unwrap();
    let rt = solve_certificate(&torus).unwrap();
    let rl = solve_certificate(&line).unwrap();
    for j in 0..=400 {
        let t = 0.3 + 0.4 * j as f64 / 400.0;
        let a = superres::certificate::certificate_value(&rt, &torus, t)[0];
        let b = superres::certificate::certificate_value(&rl, &line, t)[0];
        assert!((a - b).norm() <= 1e-10, "t = {t}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn forward_stft_is_linear(a in spike_train(4), b in spike_train(4), k in 1usize..8, n in 0usize..6) {
        let w = WindowSpec::new(0.07, n).unwrap();
        let pts: Vec<f64> = a.points().iter().chain(b.points()).copied().collect();
        let wts: Vec<Complex64> = a.weights().iter().chain(b.weights()).copied().collect();
        if let Ok(sum) = SpikeTrain::new(pts, wts) {
            let ya = forward_stft(&a, &w, k);
            let yb = forward_stft(&b, &w, k);
            let ys = forward_stft(&sum, &w, k);
            for i in 0..ys.y.len() {
                let expect = ya.y[i] + yb.y[i];
                prop_assert!((ys.y[i] - expect).norm() <= 1e-12 * ys.frobenius_norm().max(1.0));
            }
        }
    }

    #[test]
    fn dual_polynomial_matches_brute_force(
        k in 0usize..=6,
        n in 0usize..=6,
        sigma in 0.03..0.3f64,
        vals in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 169),
        t in 0.0..1.0f64,
    ) {
        let w = WindowSpec::new(sigma, n).unwrap();
        let g = w.coeffs();
        let mut c = DualVariable::zeros(k, n);
        for (i, v) in c.c.iter_mut().enumerate() {
            *v = Complex64::new(vals[i].0, vals[i].1);
        }
        let p = superres::gabor::dual_poly_from_c(&c, &w).unwrap();
        let mut brute = Complex64::new(0.0, 0.0);
        for kk in -(k as i64)..=k as i64 {
            for nn in -(n as i64)..=n as i64 {
                let cv = c.get(kk, nn);
                let phase = 2.0 * std::f64::consts::PI * ((kk + nn) as f64) * t;
                brute += g[(nn + n as i64) as usize] * cv * Complex64::cis(phase);
            }
        }
        prop_assert!((p.eval(t) - brute).norm() <= 1e-12 * (1.0 + brute.norm()));
    }

    #[test]
    fn window_coefficients_decay(sigma in 0.005..0.5f64, n in 0usize..40) {
        let g = WindowSpec::new(sigma, n).unwrap().coeffs();
        for i in 0..=n {
            prop_assert!(g[n + i] > 0.0 || (g[n + i] == 0.0 && i > 0));
            prop_assert_eq!(g[n + i], g[n - i]);
            if i > 0 {
                prop_assert!(g[n + i] <= g[n + i - 1]);
            }
        }
    }
}
