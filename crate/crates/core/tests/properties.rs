use bpforge_core::interference::{
    fit_dip, hom_signal_idler, purity_from_dip, reference_dip_width, DipParameters,
};
use bpforge_core::measurement::{
    deconvolve_width, g2_background, g2_background_correct, klyshko, mean_n_high_gain, BrightnessModel,
    EfficiencyRecord,
};
use bpforge_core::numeric::linspace;
use bpforge_core::schmidt::{
    g2_from_k, jsi_schmidt_lower_bound, k_from_g2, purity_from_k, reduced_density_matrix, schmidt_decompose,
    schmidt_number,
};
use bpforge_core::spectra::{build_pump, compose_jsa, sigma_to_nm_fwhm, Beam, FWHM_PER_STD};
use bpforge_core::{Axis, FrequencyGrid, GaussianSourceModel, GridSpec, JointSpectralAmplitude};
use num_complex::Complex64;
use proptest::prelude::*;

fn model_strategy() -> impl Strategy<Value = GaussianSourceModel> {
    // angles near −45° make the JSA non-normalizable
    let angle = prop_oneof![-85.0..-55.0, -35.0..85.0];
    (0.3..6.0f64, angle, 0.5..10.0f64)
        .prop_map(|(pump, angle, pm)| GaussianSourceModel::new(pump, angle, pm).expect("valid sampled model"))
}

fn composed(model: &GaussianSourceModel, n: usize) -> JointSpectralAmplitude {
    let grid = GridSpec::new(n, 5.0).build(model).unwrap();
    compose_jsa(model, &grid).unwrap()
}

/// Chirped correlated Gaussian `exp(−(a x² + 2b xy + c y²)/2 + i(κ xy + η x²))`.
fn chirped(a: f64, b: f64, c: f64, kappa: f64, eta: f64) -> JointSpectralAmplitude {
    let grid = FrequencyGrid::square(Axis::uniform(7.0, 128, 1536.0).unwrap());
    JointSpectralAmplitude::from_fn(grid, |x, y| {
        Complex64::from_polar(
            (-0.5 * (a * x * x + 2.0 * b * x * y + c * y * y)).exp(),
            kappa * x * y + eta * x * x,
        )
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn composed_jsa_is_normalized(model in model_strategy()) {
        let jsa = composed(&model, 128);
        prop_assert!((jsa.norm_sq() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn pump_ridge_is_flat_along_energy_conservation(pump in 0.1..10.0f64, nu in -50.0..50.0f64) {
        let model = GaussianSourceModel::new(pump, 59.0, 2.0).unwrap();
        let grid = GridSpec::default().build(&model).unwrap();
        let alpha = build_pump(&model, &grid).unwrap();
        prop_assert_eq!(alpha.eval(nu, -nu), alpha.eval(0.0, 0.0));
    }

    #[test]
    fn consistency_triangle(model in model_strategy()) {
        let jsa = composed(&model, 128);
        let k = schmidt_number(&jsa).unwrap();
        for beam in [Beam::Signal, Beam::Idler] {
            let rho = reduced_density_matrix(&jsa, beam, false);
            let tr2 = rho.purity();
            prop_assert!((tr2 - 1.0 / k).abs() <= 1e-6);
            prop_assert!((g2_from_k(k).unwrap() - (1.0 + tr2)).abs() <= 1e-6);
            prop_assert!(rho.hermiticity_error() <= 1e-9);
            prop_assert!((rho.trace() - 1.0).abs() <= 1e-9);
            prop_assert!(tr2 > 0.0 && tr2 <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn schmidt_modes_rebuild_the_jsa(model in model_strategy()) {
        let jsa = composed(&model, 96);
        let s = schmidt_decompose(&jsa).unwrap();
        let sum_sq: f64 = s.coefficients.iter().map(|c| c * c).sum();
        prop_assert!((sum_sq - 1.0).abs() < 1e-12);
        prop_assert!(s.coefficients.windows(2).all(|w| w[0] >= w[1]));
        let diff = s.reconstruct() - jsa.values();
        let err = diff.iter().map(|v| v.norm_sqr()).sum::<f64>() * jsa.grid().cell_area();
        prop_assert!(err.sqrt() <= 1e-6, "relative L2 error {}", err.sqrt());
    }

    #[test]
    fn gaussian_axes_give_the_purity(model in model_strategy()) {
        let jsa = composed(&model, 256);
        let rho = reduced_density_matrix(&jsa, Beam::Signal, true);
        let axes = rho.gaussian_axes.expect("Gaussian states fit");
        prop_assert!((axes.purity() / rho.purity() - 1.0).abs() < 0.01,
            "axes {} vs Tr rho^2 {}", axes.purity(), rho.purity());
    }

    #[test]
    fn intensity_bound_never_exceeds_true_k(
        a in 0.5..2.0f64,
        c in 0.5..2.0f64,
        r in -0.8..0.8f64,
        kappa in -1.0..1.0f64,
        eta in -0.5..0.5f64,
    ) {
        let jsa = chirped(a, r * (a * c).sqrt(), c, kappa, eta);
        let k = schmidt_number(&jsa).unwrap();
        let bound = jsi_schmidt_lower_bound(&jsa.intensity()).unwrap();
        prop_assert!(bound <= k + 1e-9, "bound {bound} > K {k}");
    }

    #[test]
    fn global_phase_and_transmission_leave_k_and_visibility(model in model_strategy(), phase in 0.0..6.3f64, t in 0.05..1.0f64) {
        let jsa = composed(&model, 96);
        let v = hom_signal_idler(&jsa, (-1.0, 1.0), 21, true).unwrap().visibility;
        let factor = Complex64::from_polar(t, phase);
        let lossy = jsa.scaled(factor);
        // unnormalized: the overlap term scales with |t|², as does the normalization
        let lossy_v = hom_signal_idler(&lossy, (-1.0, 1.0), 21, true).unwrap().visibility;
        prop_assert!((lossy_v / lossy.norm_sq() - v).abs() < 1e-9);
        let renormalized = JointSpectralAmplitude::from_values(lossy.grid().clone(), lossy.values().clone()).unwrap();
        let (k_r, k_0) = (schmidt_number(&renormalized).unwrap(), schmidt_number(&jsa).unwrap());
        prop_assert!((k_r - k_0).abs() < 1e-9 * k_0);
    }

    #[test]
    fn hom_trace_is_even_and_bounded(model in model_strategy()) {
        let jsa = composed(&model, 96);
        let trace = hom_signal_idler(&jsa, (-3.0, 3.0), 41, true).unwrap();
        let p = &trace.probability;
        for k in 0..p.len() {
            prop_assert!((p[k] - p[p.len() - 1 - k]).abs() <= 1e-9);
        }
        let p0 = p[p.len() / 2];
        prop_assert!((-1e-12..=0.5 + 1e-12).contains(&p0));
    }

    #[test]
    fn dip_width_inversion_round_trip(sigma2 in 0.3..3.0f64, beta in 0.5..5.0f64, extra in 1.0..3.0f64) {
        let sigma1_nm = sigma_to_nm_fwhm(sigma2 * extra, 1536.0);
        let beta_nm = sigma_to_nm_fwhm(beta, 1536.0);
        let fwhm = reference_dip_width(sigma2, beta).unwrap() * FWHM_PER_STD;
        let p = purity_from_dip(fwhm, beta_nm, sigma1_nm, 1536.0).unwrap();
        prop_assert!((p.purity - 1.0 / extra).abs() < 1e-9);
    }

    #[test]
    fn noiseless_dips_are_recovered(
        baseline in 10.0..5000.0f64,
        visibility in 0.05..1.0f64,
        center in -1.0..1.0f64,
        width in 0.3..1.5f64,
    ) {
        let truth = DipParameters { baseline, visibility, center_ps: center, width_ps: width };
        let data: Vec<(f64, f64)> = linspace(-6.0, 6.0, 121).into_iter().map(|t| (t, truth.eval(t))).collect();
        let fit = fit_dip(&data).unwrap();
        prop_assert!((fit.params.visibility - visibility).abs() < 1e-6);
        prop_assert!((fit.params.width_ps - width).abs() < 1e-6);
        prop_assert!((fit.params.center_ps - center).abs() < 1e-6);
        prop_assert!((fit.params.baseline / baseline - 1.0).abs() < 1e-6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn g2_and_k_are_inverse(k in 1.0..1e3f64) {
        prop_assert!((k_from_g2(g2_from_k(k).unwrap()).unwrap() / k - 1.0).abs() < 1e-12);
        prop_assert!((purity_from_k(k).unwrap() - 1.0 / k).abs() < 1e-15);
    }

    #[test]
    fn background_round_trip(g_true in 1.0..2.0f64, beta in 0.0..0.999f64) {
        let g = g2_background(g_true, beta).unwrap();
        let back = g2_background_correct(g, beta).unwrap();
        prop_assert!((g2_background(back.g2_true, beta).unwrap() - g).abs() <= 1e-12);
        prop_assert!(!back.model_inconsistent || back.g2_true > 1.0 - 1e-9);
    }

    #[test]
    fn background_only_lowers_g2(g_true in 1.0..2.0f64, beta in 0.0..0.999f64) {
        let g = g2_background(g_true, beta).unwrap();
        prop_assert!(g <= g_true + 1e-15 && g >= 1.0 - 1e-15);
    }

    #[test]
    fn klyshko_is_scale_invariant(
        coinc in 1.0..1e4f64,
        extra_s in 1.0..20.0f64,
        extra_i in 1.0..20.0f64,
        scale in 1e-3..1e3f64,
        det in 0.1..1.0f64,
    ) {
        let rec = EfficiencyRecord {
            coincidences: coinc,
            singles_s: coinc * extra_s,
            singles_i: coinc * extra_i,
            eta_det_s: det,
            eta_det_i: det,
        };
        let scaled = EfficiencyRecord {
            coincidences: coinc * scale,
            singles_s: rec.singles_s * scale,
            singles_i: rec.singles_i * scale,
            ..rec
        };
        let a = klyshko(&rec).unwrap();
        let b = klyshko(&scaled).unwrap();
        prop_assert!((a.eta_s_corrected - b.eta_s_corrected).abs() < 1e-12);
        prop_assert!((a.eta_i_corrected - b.eta_i_corrected).abs() < 1e-12);
    }

    #[test]
    fn high_gain_reduces_to_linear(x in 1e-4..0.1f64) {
        let b = BrightnessModel::default();
        let energy = x * x / b.pairs_per_joule;
        let n = mean_n_high_gain(energy, &b).unwrap();
        let linear = b.pairs_per_joule * energy;
        prop_assert!((n - linear).abs() / n < 0.01);
    }

    #[test]
    fn high_gain_is_increasing(e in 1e-13..1e-8f64, f in 1.0001..3.0f64) {
        let b = BrightnessModel::default();
        prop_assert!(mean_n_high_gain(e * f, &b).unwrap() > mean_n_high_gain(e, &b).unwrap());
    }

    #[test]
    fn deconvolution_inverts_quadrature_sum(true_w in 0.1..20.0f64, res in 0.0..10.0f64) {
        let measured = (true_w * true_w + res * res).sqrt();
        prop_assume!(measured > res);
        prop_assert!((deconvolve_width(measured, res).unwrap() - true_w).abs() < 1e-9 * measured);
    }
}
