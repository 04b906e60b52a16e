//! Invariants checked on random inputs.

use std::f64::consts::PI;

use approx::assert_relative_eq;
use hitchin_glue::algebra::{bracket, exp_traceless, log_positive_unimodular, m_phi, m_phi_kernel_dim, Mat2, MatSL2, C64};
use hitchin_glue::geometry::{coord_cyl_to_z, coord_z_to_cyl, NeckField, PlumbingConfig, Side};
use hitchin_glue::linearized::{assemble_l, dirac_mode_kernel_sectors, energy_identity, Background};
use hitchin_glue::model::ModelParams;
use hitchin_glue::report::{format_float, to_csv, to_json, Row};
use hitchin_glue::rng::{stream_rng, substream, Stream};
use proptest::prelude::*;
use rand::RngCore;

fn complex() -> impl Strategy<Value = C64> {
    (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(re, im)| C64::new(re, im))
}

fn traceless() -> impl Strategy<Value = Mat2> {
    (complex(), complex(), complex()).prop_map(|(a, b, c)| Mat2::from_entries([a, b, c, -a]))
}

fn hermitian() -> impl Strategy<Value = Mat2> {
    prop::array::uniform3(-2.0..2.0f64).prop_map(Mat2::from_herm_coords)
}

fn model_params() -> impl Strategy<Value = ModelParams> {
    (-2.0..2.0f64, 0.05..2.0f64, 0.0..2.0 * PI)
        .prop_map(|(alpha, modulus, arg)| ModelParams::new(alpha, C64::from_polar(modulus, arg), Side::Plus).unwrap())
}

proptest! {
    #[test]
    fn m_phi_pairing_is_twice_the_bracket_norm(phi in traceless(), gamma in hermitian()) {
        let lhs = m_phi(&phi, &gamma).inner(&gamma);
        let rhs = 2.0 * bracket(&phi, &gamma).norm_sqr();
        prop_assert!(lhs >= -1e-12);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1.0));
    }

    #[test]
    fn kernel_of_m_phi_is_one_dimensional_for_nonzero_normal_phi(lam in complex(), x in hermitian()) {
        prop_assume!(lam.norm() > 1e-3 && x.norm() > 1e-3);
        let u = exp_traceless(&x.scale(C64::i()));
        let phi = u * Mat2::diag_traceless(lam) * u.adjoint();
        prop_assert_eq!(m_phi_kernel_dim(&MatSL2::new(phi).unwrap()), 1);
    }

    #[test]
    fn kernel_of_m_phi_is_trivial_for_nilpotent_phi(b in complex()) {
        prop_assume!(b.norm() > 1e-3);
        let phi = MatSL2::from_entries(C64::from(0.0), b, C64::from(0.0), C64::from(0.0)).unwrap();
        prop_assert_eq!(m_phi_kernel_dim(&phi), 0);
    }

    #[test]
    fn exponential_of_hermitian_is_positive_unimodular(gamma in hermitian()) {
        let g = exp_traceless(&gamma);
        prop_assert!(g.hermitian_defect() <= 1e-12 * g.norm());
        assert_relative_eq!(g.det().re, 1.0, max_relative = 1e-10);
        prop_assert!(g.trace().re > 0.0);
        let back = log_positive_unimodular(&g);
        prop_assert!((back - gamma).max_abs() <= 1e-9 * (1.0 + gamma.norm()));
    }

    #[test]
    fn mode_kernel_law_holds(params in model_params(), j in -20i64..=20) {
        let k = dirac_mode_kernel_sectors(j, &params);
        prop_assert_eq!(k.diagonal, if j == 0 { 2 } else { 0 });
        prop_assert_eq!(k.off_diagonal, 0);
    }

    #[test]
    fn cylinder_coordinates_round_trip(tau in -10.0..10.0f64, theta in 0.0..2.0 * PI) {
        let (t, th) = coord_z_to_cyl(coord_cyl_to_z(tau, theta)).unwrap();
        prop_assert!((t - tau).abs() <= 1e-12);
        let wrapped = (th - theta).rem_euclid(2.0 * PI);
        prop_assert!(wrapped.min(2.0 * PI - wrapped) <= 1e-12);
    }

    #[test]
    fn floats_round_trip_through_reports(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        prop_assert_eq!(format_float(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        let text = to_json(&[Row::new().with("x", x)]);
        let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(parsed[0]["x"].as_f64().unwrap().to_bits(), x.to_bits());
    }

    #[test]
    fn csv_has_one_line_per_row(values in prop::collection::vec(-1e3..1e3f64, 1..20)) {
        let rows: Vec<Row> = values.iter().map(|&v| Row::new().with("v", v).with("label", "a,b")).collect();
        prop_assert_eq!(to_csv(&rows).lines().count(), rows.len() + 1);
    }

    #[test]
    fn streams_are_reproducible_and_distinct(seed in any::<u64>(), index in 0u64..1000) {
        prop_assert_eq!(stream_rng(seed, Stream::Spectrum).next_u64(), stream_rng(seed, Stream::Spectrum).next_u64());
        prop_assert_ne!(stream_rng(seed, Stream::Spectrum).next_u64(), stream_rng(seed, Stream::Corrector).next_u64());
        prop_assert_ne!(substream(seed, Stream::Poisson, index).next_u64(), substream(seed, Stream::Poisson, index + 1).next_u64());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn linearized_operator_satisfies_energy_identity(
        params in model_params(),
        coeffs in prop::collection::vec(-1.0..1.0f64, 9),
    ) {
        let cfg = PlumbingConfig::new(0.2, 40, 4).unwrap();
        let grid = cfg.grid();
        let pair = Background::Model(params).pair(&cfg, &grid).unwrap();
        let op = assemble_l(&pair, &grid).unwrap();
        let gamma = NeckField::from_fn(&grid, |tau, th| {
            let basis = [tau.sin(), (th + tau).cos(), (2.0 * th).sin()];
            Mat2::from_herm_coords([0, 1, 2].map(|a| (0..3).map(|b| coeffs[3 * a + b] * basis[b]).sum()))
        });
        let check = energy_identity(&op, &pair, &grid, &gamma).unwrap();
        prop_assert!(check.quadratic_form >= -1e-12);
        prop_assert!(check.relative_gap <= 1e-9, "{:?}", check);
    }
}
