//! The numerical gauge pipeline (diagonalize, normalize, transport, cutoff glue) against the
//! closed form of the fixtures.

use hitchin_glue::studies::{build_approx, float, FixtureKind, FixtureSpec, GlueGrid};

fn grid() -> GlueGrid {
    GlueGrid { n_tau: 401, ..Default::default() }
}

fn check_fixture(spec: FixtureSpec) {
    let mut sups = Vec::new();
    for r in [0.3, 0.1] {
        let row = build_approx(&spec, &grid(), r).unwrap().row;
        assert!(float(&row, "generator_error") <= 1e-10, "generator error at R = {r}");
        assert!(float(&row, "closed_form_difference") <= 1e-9, "closed form at R = {r}");
        assert!(float(&row, "sup_outside_annulus") <= 1e-10, "residual outside the annulus at R = {r}");
        assert!(float(&row, "seam_jump") <= 1e-8, "seam jump at R = {r}");
        assert_eq!(float(&row, "second_equation_sup"), 0.0);
        let (jet, discrete) = (float(&row, "sup_residual"), float(&row, "sup_residual_discrete"));
        approx::assert_relative_eq!(jet, discrete, max_relative = 1e-3);
        sups.push(jet);
    }
    assert!(sups[1] < sups[0], "cutoff error shrinks with R: {sups:?}");
}

#[test]
fn radial_fixture_pipeline_matches_closed_form() {
    check_fixture(FixtureSpec::default());
}

#[test]
fn wolf_fixture_pipeline_matches_closed_form() {
    check_fixture(FixtureSpec { kind: FixtureKind::Wolf, ..Default::default() });
}

#[test]
fn too_small_radius_is_a_config_error() {
    let err = build_approx(&FixtureSpec::default(), &grid(), 1e-12).unwrap_err();
    assert!(err.is_config(), "{err}");
}
