//! End-to-end studies behind the CLI subcommands and the acceptance suite. Each study returns
//! report rows carrying the grid metadata needed to reproduce them and `*_pass` flags.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;

use crate::algebra::{bracket, m_phi, m_phi_kernel_dim, Mat2, C64};
use crate::corrector::{correct, corrector_operator, expansion_defect, CorrectorOptions, CorrectorState, GraphNormConfig};
use crate::error::{Error, Result};
use crate::fixtures::RadialFixture;
use crate::gauge::{
    build_approximate, error_profile, generator_on_neck, jet_error_profile, normalize, seam_jump, CutoffProfile,
    CUTOFF_INNER_RATIO,
};
use crate::geometry::{ComponentTag, Field2D, NeckField, NeckGrid, PlumbingConfig, Side};
use crate::linearized::{centered_residuals, dirac_mode_kernel_sectors, scaling_study, Background, SpectrumConfig, SpectrumReport};
use crate::model::{det_higgs, glue_models, wolf_frame, wolf_jet, wolf_pair, ModelParams, WolfParams};
use crate::pair::{first_equation, second_equation, HiggsPair};
use crate::poisson::{mode_residual, solve_mode_j, weighted_norm, Measure, RadialFunction, RadialGrid, WeightConfig};
use crate::report::{Row, Value};
use crate::rng::{stream_rng, substream, Stream};

/// Tolerance for identities checked pointwise in the algebra suite.
pub const ALGEBRA_TOL: f64 = 1e-10;
/// Largest allowed relative Poisson mode residual.
pub const POISSON_RESIDUAL_TOL: f64 = 1e-7;
/// Smallest accepted refinement order of the Wolf residual.
pub const MIN_RESIDUAL_ORDER: f64 = 1.9;
/// Allowed relative deviation of a fitted decay slope from its exponent.
pub const WOLF_SLOPE_TOL: f64 = 0.15;
pub const APPROX_SLOPE_TOL: f64 = 0.2;
/// Residual that counts as zero outside the cutoff annulus.
pub const OUTSIDE_ANNULUS_TOL: f64 = 1e-10;
/// Required drop of the first-equation residual under the corrector.
pub const RESIDUAL_DROP: f64 = 1e3;
/// Tolerance of the expansion identity.
pub const EXPANSION_TOL: f64 = 1e-8;
/// Radius at which Wolf's unit circle is placed on the neck, keeping the profile inside its domain.
pub const WOLF_OUTER_RADIUS: f64 = 10.0;

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn complex_row(z: C64) -> Row {
    Row::new().with("re", z.re).with("im", z.im)
}

fn model_row(p: &ModelParams) -> Row {
    Row::new().with("alpha", p.alpha).with("C", complex_row(p.c))
}

fn random_sl2(rng: &mut impl Rng) -> Mat2 {
    let mut z = || C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let (a, b, c) = (z(), z(), z());
    Mat2::new(a, b, c, -a)
}

fn random_unitary(rng: &mut impl Rng) -> Mat2 {
    let (t, p, q) = (rng.gen_range(0.0..PI), rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..2.0 * PI));
    let a = C64::from_polar(t.cos(), p);
    let b = C64::from_polar(t.sin(), q);
    Mat2::new(a, b, -b.conj(), a.conj())
}

/// `<M_phi gamma, gamma> = 2 |[phi, gamma]|^2` and the kernel-dimension law on random samples.
/// A third of the samples are normal (unitarily diagonalizable) so every branch of the law is hit.
pub fn algebra_suite(samples: usize, seed: u64) -> Row {
    let mut rng = stream_rng(seed, Stream::Algebra);
    let mut positivity: f64 = 0.0;
    let mut mismatches = 0usize;
    let mut normal_count = 0usize;
    for idx in 0..samples {
        let phi = if idx % 3 == 0 {
            normal_count += 1;
            let u = random_unitary(&mut rng);
            let lam = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            u * Mat2::diag_traceless(lam) * u.adjoint()
        } else {
            random_sl2(&mut rng)
        };
        let gamma = Mat2::from_herm_coords([rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
        let lhs = m_phi(&phi, &gamma).inner(&gamma);
        let rhs = 2.0 * bracket(&phi, &gamma).norm_sqr();
        positivity = positivity.max((lhs - rhs).abs() / rhs.max(1.0));
        let normality = bracket(&phi, &phi.adjoint()).norm() / phi.norm_sqr().max(f64::MIN_POSITIVE);
        let expected = if phi.norm() == 0.0 {
            3
        } else if normality < 1e-8 {
            1
        } else {
            0
        };
        let sl2 = crate::algebra::MatSL2::new(phi).expect("samples are trace-free");
        if m_phi_kernel_dim(&sl2) != expected {
            mismatches += 1;
        }
    }
    let zero_kernel = m_phi_kernel_dim(&crate::algebra::MatSL2::zero());
    Row::new()
        .with("samples", samples)
        .with("normal_samples", normal_count)
        .with("seed", seed as i64)
        .with("max_positivity_error", positivity)
        .with("kernel_mismatches", mismatches)
        .with("zero_field_kernel", zero_kernel)
        .with("pass", positivity <= ALGEBRA_TOL && mismatches == 0 && zero_kernel == 3)
}

/// Random right-hand side `sum_k c_k r^(p_k) (1 + a_k sin(w_k r))` with every `p_k > delta`,
/// so it lies in the weighted space of the source and is a clean power law at the node.
pub fn random_rhs(grid: &RadialGrid, delta: f64, rng: &mut impl Rng) -> RadialFunction {
    let terms: Vec<(C64, f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                delta + rng.gen_range(0.05..3.0),
                rng.gen_range(-0.9..0.9),
                rng.gen_range(0.0..4.0),
            )
        })
        .collect();
    grid.sample(|r| terms.iter().map(|(c, p, a, w)| c * r.powf(*p) * (1.0 + a * (w * r).sin())).sum())
}

/// Operator-norm samples of the mode kernels `K_j`, `j = 1..=modes`, against `4/j^2`.
pub fn poisson_study(w: &WeightConfig, modes: usize, samples: usize, grid: &RadialGrid, seed: u64) -> Result<Vec<Row>> {
    if modes == 0 || samples == 0 {
        return Err(Error::Config("poisson study needs at least one mode and one sample".into()));
    }
    (1..=modes as i64)
        .into_par_iter()
        .map(|j| {
            let mut rng = substream(seed, Stream::Poisson, j as u64);
            let (mut ratio, mut residual): (f64, f64) = (0.0, 0.0);
            for _ in 0..samples {
                let h = random_rhs(grid, w.delta, &mut rng);
                let u = solve_mode_j(j, &h)?.u;
                residual = residual.max(mode_residual(j, &u, &h));
                let nh = weighted_norm(&h, w.delta, Measure::RInvDr).value;
                let nu = weighted_norm(&u, w.delta_prime, Measure::RInvDr).value;
                ratio = ratio.max(nu / nh);
            }
            let bound = 4.0 / (j * j) as f64;
            Ok(Row::new()
                .with("mode", j)
                .with("samples", samples)
                .with("max_norm_ratio", ratio)
                .with("schur_bound", bound)
                .with("max_residual", residual)
                .with("delta", w.delta)
                .with("delta_prime", w.delta_prime)
                .with("r_min", grid.r_min)
                .with("radial_nodes", grid.len())
                .with("pass", ratio <= bound && residual <= POISSON_RESIDUAL_TOL))
        })
        .collect()
}

/// Glued model on the neck: discrete residuals, pointwise residuals at random points, the
/// seam jump and `det Phi = -C^2`.
pub fn model_check(plus: &ModelParams, cfg: &PlumbingConfig, samples: usize, seed: u64) -> Result<Row> {
    let grid = cfg.grid();
    let glued = glue_models(plus, &plus.matching_partner(), &grid)?;
    let (first, second) = centered_residuals(&glued.pair, &grid);
    let discrete = first.sup_norm().max(second.sup_norm());
    let mut rng = stream_rng(seed, Stream::Harness);
    let mut pointwise: f64 = 0.0;
    for _ in 0..samples {
        let tau = rng.gen_range(-cfg.half_extent()..cfg.half_extent());
        let params = if tau > 0.0 { plus.matching_partner() } else { *plus };
        let jet = params.neck_jet();
        pointwise = pointwise.max(first_equation(&jet).max_abs()).max(second_equation(&jet).max_abs());
    }
    let phi_field = Field2D::from_physical(&glued.pair.phi, ComponentTag::HiggsDzOverZ);
    let det = det_higgs(&phi_field)?.to_physical();
    let target = -(plus.c * plus.c);
    let det_defect = det.values.iter().map(|m| (m.a - target).norm()).fold(0.0, f64::max);
    let max_residual = discrete.max(pointwise);
    Ok(Row::new()
        .with("params", model_row(plus))
        .with("max_residual", max_residual)
        .with("slopes", Row::new())
        .with("pointwise_samples", samples)
        .with("seam_jump", glued.seam_jump)
        .with("det_defect", det_defect)
        .with("R", cfg.cutoff_radius)
        .with("n_tau", cfg.n_tau)
        .with("n_theta_modes", cfg.n_theta_modes)
        .with("pass", max_residual <= 1e-13 && det_defect <= 1e-13))
}

/// Options for the Wolf validation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WolfOptions {
    /// Nodes of the coarsest grid; each refinement halves the spacing.
    pub n_tau: usize,
    pub refinements: usize,
    /// `tau` range of the half-cylinder `|zeta| = e^-tau`.
    pub tau_range: (f64, f64),
    /// `|zeta|` range of the distance fit.
    pub distance_range: (f64, f64),
    pub distance_samples: usize,
}

impl Default for WolfOptions {
    fn default() -> Self {
        Self { n_tau: 257, refinements: 3, tau_range: (0.5, 6.5), distance_range: (1e-8, 1e-4), distance_samples: 17 }
    }
}

/// Wolf pair sampled on a uniform `tau` grid of the half-cylinder.
pub fn wolf_on_grid(wolf: &WolfParams, n_tau: usize, tau_range: (f64, f64)) -> Result<(HiggsPair, NeckGrid)> {
    let (lo, hi) = tau_range;
    let half = 0.5 * (hi - lo);
    let shift = 0.5 * (hi + lo);
    let grid = NeckGrid::new(half, n_tau, 1);
    let mut values = Vec::with_capacity(n_tau * grid.n_theta);
    for &tau in &grid.tau_nodes {
        let v = wolf_jet(wolf, tau + shift)?.value;
        values.extend(std::iter::repeat_n(v, grid.n_theta));
    }
    Ok((HiggsPair::from_values(&grid, &values), grid))
}

/// Refinement order of the discrete residual of the Wolf pair, the exact-jet residual, and
/// the decay of the Higgs field towards the model after the frame change.
pub fn wolf_validate(ell: f64, opts: &WolfOptions) -> Result<Row> {
    let wolf = WolfParams::new(ell)?;
    if opts.refinements == 0 || opts.n_tau < 8 {
        return Err(Error::Config("wolf validation needs n_tau >= 8 and at least one refinement".into()));
    }
    let mut grids = Vec::new();
    let mut residuals = Vec::new();
    let mut jet_residual: f64 = 0.0;
    for level in 0..=opts.refinements {
        let n = (opts.n_tau - 1) * (1 << level) + 1;
        let (pair, grid) = wolf_on_grid(&wolf, n, opts.tau_range)?;
        let (first, second) = centered_residuals(&pair, &grid);
        residuals.push(first.sup_norm().max(second.sup_norm()));
        grids.push(n);
        let shift = 0.5 * (opts.tau_range.0 + opts.tau_range.1);
        for &tau in &grid.tau_nodes {
            let jet = wolf_jet(&wolf, tau + shift)?;
            jet_residual = jet_residual.max(first_equation(&jet).max_abs()).max(second_equation(&jet).max_abs());
        }
    }
    let orders: Vec<f64> = residuals.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let min_order = orders.iter().cloned().fold(f64::INFINITY, f64::min);

    let frame = wolf_frame();
    let model = wolf.limiting_model().higgs_dz_over_z();
    let (lo, hi) = opts.distance_range;
    let radii: Vec<f64> = (0..opts.distance_samples)
        .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (opts.distance_samples - 1) as f64).exp())
        .collect();
    let mut higgs_distance = Vec::new();
    let mut connection_size = Vec::new();
    for &r in &radii {
        let (a, phi) = wolf_pair(&wolf, C64::new(r, 0.0))?;
        let rotated = frame.adjoint() * *phi.mat() * frame;
        higgs_distance.push((rotated - model).norm());
        connection_size.push(a.mat().norm());
    }
    let distance_slope = log_log_slope(&radii, &higgs_distance);
    let connection_slope = log_log_slope(&radii, &connection_size);
    let order_pass = min_order >= MIN_RESIDUAL_ORDER;
    let distance_pass = (distance_slope - ell).abs() <= WOLF_SLOPE_TOL * ell;
    Ok(Row::new()
        .with("params", Row::new().with("ell", ell))
        .with("max_residual", jet_residual)
        .with(
            "slopes",
            Row::new()
                .with("residual_order", min_order)
                .with("residual_orders", orders)
                .with("higgs_distance_slope", distance_slope)
                .with("connection_decay_slope", connection_slope),
        )
        .with("grids", grids)
        .with("discrete_residuals", residuals)
        .with("tau_range", vec![opts.tau_range.0, opts.tau_range.1])
        .with("distance_range", vec![lo, hi])
        .with("order_pass", order_pass)
        .with("distance_pass", distance_pass)
        .with("pass", order_pass && distance_pass))
}

/// Which exact input the gluing starts from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FixtureKind {
    /// Radial fixture with `alpha = 0` and `C = -i delta/4`.
    Radial,
    /// Wolf's solution.
    Wolf,
}

impl FixtureKind {
    pub fn name(self) -> &'static str {
        match self {
            FixtureKind::Radial => "radial",
            FixtureKind::Wolf => "wolf",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixtureSpec {
    pub kind: FixtureKind,
    /// Decay exponent of the radial fixture.
    pub delta: f64,
    /// Amplitude of the radial fixture.
    pub amplitude: f64,
    /// Parameter of the Wolf fixture.
    pub ell: f64,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        Self { kind: FixtureKind::Radial, delta: 0.5, amplitude: 0.3, ell: 0.5 }
    }
}

impl FixtureSpec {
    pub fn build(&self) -> Result<RadialFixture> {
        match self.kind {
            FixtureKind::Radial => RadialFixture::with_decay(self.delta, self.amplitude),
            FixtureKind::Wolf => RadialFixture::from_wolf(&WolfParams::new(self.ell)?, WOLF_OUTER_RADIUS),
        }
    }

    fn row(&self) -> Row {
        let row = Row::new().with("fixture", self.kind.name());
        match self.kind {
            FixtureKind::Radial => row.with("delta", self.delta).with("amplitude", self.amplitude),
            FixtureKind::Wolf => row.with("ell", self.ell).with("outer_radius", WOLF_OUTER_RADIUS),
        }
    }
}

/// Resolution and weights of a gluing run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GlueGrid {
    pub n_tau: usize,
    pub n_theta_modes: usize,
    pub cap_length: f64,
    pub delta_prime: f64,
    pub delta_dprime: f64,
}

impl Default for GlueGrid {
    fn default() -> Self {
        Self { n_tau: 801, n_theta_modes: 4, cap_length: crate::geometry::DEFAULT_CAP_LENGTH, delta_prime: 0.4, delta_dprime: 0.35 }
    }
}

/// Output of the approximate-solution pipeline at one `R`.
#[derive(Clone, Debug)]
pub struct ApproxRun {
    pub cfg: PlumbingConfig,
    pub grid: NeckGrid,
    pub fixture: RadialFixture,
    pub approximate: HiggsPair,
    pub row: Row,
}

/// Normalize the exact input on both disks, transport the gauge to the neck and glue with the
/// cutoff. The row records the residual of the result, its agreement with the closed form,
/// and the exact-derivative residual outside the annulus `3R/4 <= r <= R`.
pub fn build_approx(spec: &FixtureSpec, gg: &GlueGrid, r: f64) -> Result<ApproxRun> {
    let cfg = PlumbingConfig::new(r, gg.n_tau, gg.n_theta_modes)?.with_cap_length(gg.cap_length)?;
    let grid = cfg.grid();
    let fixture = spec.build()?;
    let w = WeightConfig::new(fixture.delta(), gg.delta_prime, gg.delta_dprime)?;
    let disk = RadialGrid::default_grid();
    if disk.r_min >= cfg.seam_radius() {
        return Err(Error::Config(format!("R = {r} is too small for the disk grid")));
    }
    let plus = normalize(&fixture.disk_input(Side::Plus, disk.clone(), gg.n_theta_modes)?, &w)?;
    let minus = normalize(&fixture.disk_input(Side::Minus, disk, gg.n_theta_modes)?, &w)?;
    let gamma = generator_on_neck(&plus, &minus, &cfg, &grid)?;
    let cutoff = CutoffProfile::new(r)?;
    let exact = fixture.exact_pair(&cfg, &grid)?;
    let approximate = build_approximate(&exact, &gamma, &cutoff, &cfg, &grid)?;
    let closed_form = fixture.approximate_pair(&cfg, &cutoff, &grid)?;

    let mut generator_error: f64 = 0.0;
    for (i, &tau) in grid.tau_nodes.iter().enumerate() {
        if cfg.radius_at(tau) <= r {
            for k in 0..grid.n_theta {
                let expected = fixture.gauge_generator(&cfg, tau, grid.theta(k));
                generator_error = generator_error.max((gamma.at(i, k) - expected).max_abs());
            }
        }
    }
    let discrete = error_profile(&approximate, &grid);
    let exact_profile = jet_error_profile(&grid, |tau, th| fixture.approximate_jet(&cfg, &cutoff, tau, th));
    let outside = exact_profile.sup_outside(&cfg, &grid, CUTOFF_INNER_RATIO * r, r);
    let row = Row::new()
        .with("R", r)
        .with("T", cfg.neck_length())
        .with("sup_residual", exact_profile.sup)
        .with("sup_residual_discrete", discrete.sup)
        .with("sup_outside_annulus", outside)
        .with("closed_form_difference", approximate.max_difference(&closed_form))
        .with("generator_error", generator_error)
        .with("seam_jump", seam_jump(&approximate, &grid))
        .with("second_equation_sup", exact_profile.second_equation_sup)
        .with("n_tau", gg.n_tau)
        .with("n_theta_modes", gg.n_theta_modes)
        .with("cap_length", gg.cap_length)
        .with("delta_prime", gg.delta_prime)
        .with("delta_dprime", gg.delta_dprime);
    let mut full = spec.row();
    for (k, v) in row.entries() {
        full.insert(k, v.clone());
    }
    Ok(ApproxRun { cfg, grid, fixture, approximate, row: full })
}

/// `build_approx` over a list of radii, each row carrying the log-log slope of the sup
/// residual against `R` fitted over the radii so far.
pub fn approx_sweep(spec: &FixtureSpec, gg: &GlueGrid, radii: &[f64]) -> Result<(Vec<ApproxRun>, f64)> {
    if radii.is_empty() {
        return Err(Error::InsufficientSweep { needed: 1, got: 0 });
    }
    let mut runs: Vec<ApproxRun> = radii.par_iter().map(|&r| build_approx(spec, gg, r)).collect::<Result<_>>()?;
    let mut slope = f64::NAN;
    for idx in 0..runs.len() {
        let xs: Vec<f64> = radii[..=idx].to_vec();
        let ys: Vec<f64> = runs[..=idx].iter().map(|run| float(&run.row, "sup_residual")).collect();
        let so_far = (idx > 0).then(|| log_log_slope(&xs, &ys));
        if let Some(s) = so_far {
            slope = s;
        }
        let run = &mut runs[idx];
        run.row.insert("slope_so_far", so_far);
        let outside_pass = float(&run.row, "sup_outside_annulus") <= OUTSIDE_ANNULUS_TOL;
        run.row.insert("outside_pass", outside_pass);
        if let Some(s) = so_far {
            run.row.insert("slope_pass", (s - gg.delta_dprime).abs() <= APPROX_SLOPE_TOL * gg.delta_dprime);
        }
    }
    Ok((runs, slope))
}

/// Look up a float entry of a row; missing or non-float entries read as NaN.
pub fn float(row: &Row, key: &str) -> f64 {
    match row.get(key) {
        Some(Value::Float(x)) => *x,
        Some(Value::Int(i)) => *i as f64,
        _ => f64::NAN,
    }
}

/// Background of a spectral sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BackgroundKind {
    Model(ModelParams),
    Wolf(f64),
    Approx(FixtureSpec),
    Flat,
}

impl BackgroundKind {
    pub fn name(&self) -> &'static str {
        match self {
            BackgroundKind::Model(_) => "model",
            BackgroundKind::Wolf(_) => "wolf",
            BackgroundKind::Approx(_) => "approx",
            BackgroundKind::Flat => "flat",
        }
    }

    pub fn background(&self) -> Result<Background> {
        Ok(match self {
            BackgroundKind::Model(p) => Background::Model(*p),
            BackgroundKind::Wolf(ell) => {
                Background::Approximate(FixtureSpec { kind: FixtureKind::Wolf, ell: *ell, ..Default::default() }.build()?)
            }
            BackgroundKind::Approx(spec) => Background::Approximate(spec.build()?),
            BackgroundKind::Flat => Background::Flat,
        })
    }
}

/// Spectral sweep with one row per `R`, merged in sweep order.
pub fn spectrum_study(radii: &[f64], kind: &BackgroundKind, sc: &SpectrumConfig, seed: u64) -> Result<(SpectrumReport, Vec<Row>)> {
    let report = scaling_study(radii, &kind.background()?, sc, seed)?;
    let rows = report
        .points
        .iter()
        .map(|p| {
            Row::new()
                .with("R", p.r)
                .with("T", p.t)
                .with("lambda1", p.lambda1)
                .with("lambda1_T2", p.lambda1_t2)
                .with("sigma_min", p.sigma_min)
                .with("sigma_min_T", p.sigma_min_t)
                .with("dirichlet_reference", p.dirichlet_reference)
                .with("lambda2", p.smallest.get(1).copied())
                .with("small_eigenvalue_free", p.small_eigenvalue_free)
                .with("background", kind.name())
                .with("n_tau", sc.n_tau)
                .with("n_theta_modes", sc.n_theta_modes)
                .with("cap_length", sc.cap_length)
                .with("product_spread", report.product_spread)
                .with("spans_two_decades", report.spans_two_decades)
                .with("flat", report.flat)
                .with("flat_pass", report.flat || !report.spans_two_decades)
        })
        .collect();
    Ok((report, rows))
}

/// Mode-kernel law on random `(alpha, C)`: 2 on the diagonal sector at `j = 0`, 0 elsewhere.
pub fn mode_kernel_study(samples: usize, max_mode: i64, seed: u64) -> Result<Row> {
    let mut rng = stream_rng(seed, Stream::Algebra);
    let mut violations = 0usize;
    let mut checked = 0usize;
    for _ in 0..samples {
        let alpha = rng.gen_range(-2.0..2.0);
        let c = C64::from_polar(rng.gen_range(0.05..2.0), rng.gen_range(0.0..2.0 * PI));
        let params = ModelParams::new(alpha, c, Side::Plus)?;
        for j in -max_mode..=max_mode {
            let k = dirac_mode_kernel_sectors(j, &params);
            let expected_diag = if j == 0 { 2 } else { 0 };
            if k.diagonal != expected_diag || k.off_diagonal != 0 {
                violations += 1;
            }
            checked += 1;
        }
    }
    Ok(Row::new()
        .with("samples", samples)
        .with("max_mode", max_mode)
        .with("checked", checked)
        .with("violations", violations)
        .with("pass", violations == 0))
}

/// Output of the full gluing run.
#[derive(Clone, Debug)]
pub struct GlueRun {
    pub approx: ApproxRun,
    pub corrected: HiggsPair,
    pub state: CorrectorState,
    pub row: Row,
}

/// Build the approximate pair and correct it; the row records the corrector summary, the
/// expansion identity at the final and half-final `gamma`, and the acceptance flags.
pub fn glue(spec: &FixtureSpec, gg: &GlueGrid, r: f64, opts: &CorrectorOptions, seed: u64) -> Result<GlueRun> {
    let approx = build_approx(spec, gg, r)?;
    let norm = GraphNormConfig::from_model(&approx.fixture.model);
    let mut rng = stream_rng(seed, Stream::Corrector);
    let (corrected, state) = correct(&approx.approximate, &approx.cfg, &approx.grid, &norm, opts, &mut rng)?;
    let op = corrector_operator(&approx.approximate, &approx.grid)?;
    let gamma = state.gamma.to_physical();
    let half: NeckField = gamma.map(|m| m.scale_re(0.5));
    let expansion = expansion_defect(&approx.approximate, &gamma, &approx.grid, &op)
        .max(expansion_defect(&approx.approximate, &half, &approx.grid, &op));
    let s = &state.summary;
    let contracts = s.contraction_factors.iter().all(|&q| q < 1.0);
    let drop = s.residual_before / s.residual_after.max(f64::MIN_POSITIVE);
    let row = spec
        .row()
        .with("R", r)
        .with("T", s.t)
        .with("residual_before", s.residual_before)
        .with("residual_after", s.residual_after)
        .with("residual_after_fourth_order", s.residual_after_fourth_order)
        .with("discretization_estimate", s.discretization_estimate)
        .with("stop_tol", s.stop_tol)
        .with("iterations", s.iterations)
        .with("residual_history", s.residual_history.clone())
        .with("contraction_factors", s.contraction_factors.clone())
        .with("lambda1", s.lambda1)
        .with("constant_C", s.constant_c)
        .with("sigma_R", s.sigma_r)
        .with("gamma_H2", s.gamma_h2)
        .with("expansion_defect", expansion)
        .with("residual_drop", drop)
        .with("n_tau", gg.n_tau)
        .with("n_theta_modes", gg.n_theta_modes)
        .with("cap_length", gg.cap_length)
        .with("seed", seed as i64)
        .with("contraction_pass", contracts && !s.contraction_factors.is_empty())
        .with("trust_region_pass", s.within_trust_region)
        .with("residual_drop_pass", drop >= RESIDUAL_DROP)
        .with("expansion_pass", expansion <= EXPANSION_TOL);
    Ok(GlueRun { approx, corrected, state, row })
}
