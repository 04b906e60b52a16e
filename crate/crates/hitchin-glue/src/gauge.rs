//! Approximate solutions near a node: diagonalizing gauge, gauge to the model through the
//! scalar Poisson equation, cutoff interpolation and the resulting Hitchin error.
//!
//! Disk data use `x = log r` and the disk angle `theta`. Since `w = x + i theta` is a
//! holomorphic coordinate with `dw = dz/z`, a disk pair is stored like a neck pair with
//! components `(r A_r, A_theta, Phi per dz/z)` and the same pointwise equations apply.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{exp_traceless, exp_traceless_with_derivatives, log_positive_unimodular, Mat2, C64};
use crate::error::{Error, Result};
use crate::geometry::{ComponentTag, Field2D, FourierPlan, NeckField, NeckGrid, PlumbingConfig, Side};
use crate::model::ModelParams;
use crate::pair::{first_equation, second_equation, HiggsPair, PairJet, PairValue};
use crate::poisson::{mode_residual_abs, solve_poisson_modes, PoissonSolution, RadialFunction, RadialGrid, WeightConfig};

/// Ratio of the inner to the outer radius of the cutoff annulus.
pub const CUTOFF_INNER_RATIO: f64 = 0.75;

/// Tolerance on `2 C phi_0 + phi_0^2 + phi_1 phi_2` for det-exact inputs.
pub const DET_RELATION_TOL: f64 = 1e-10;

/// Relative size below which an angular mode of the Poisson source is treated as zero.
pub const MODE_NOISE_FLOOR: f64 = 1e-13;

/// Absolute size below which a Poisson source sample is treated as zero.
pub const SOURCE_NOISE_FLOOR: f64 = 1e-10;

/// Smallest admissible `|2C + phi_0| / |C|`.
pub const DENOMINATOR_FLOOR: f64 = 0.1;

/// Value and first two log-radial derivatives of a radial profile.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RadialJet {
    pub value: f64,
    pub r_d: f64,
    pub r_d2: f64,
}

/// Quintic smoothstep clamped to `[0, 1]`, with two derivatives.
fn smoothstep(s: f64) -> (f64, f64, f64) {
    if s <= 0.0 {
        (0.0, 0.0, 0.0)
    } else if s >= 1.0 {
        (1.0, 0.0, 0.0)
    } else {
        let s2 = s * s;
        (
            s2 * s * (10.0 - 15.0 * s + 6.0 * s2),
            30.0 * s2 * (1.0 - s) * (1.0 - s),
            60.0 * s * (1.0 - s) * (1.0 - 2.0 * s),
        )
    }
}

/// `chi_R(r) = psi(log(r/R) / log(3/4))`: one on `r <= 3R/4`, zero on `r >= R`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffProfile {
    pub radius: f64,
}

impl CutoffProfile {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius < 1.0) {
            return Err(Error::Config(format!("cutoff radius R = {radius} must lie in (0, 1)")));
        }
        Ok(Self { radius })
    }

    pub fn value(&self, r: f64) -> f64 {
        self.jet(r).value
    }

    pub fn jet(&self, r: f64) -> RadialJet {
        let scale = CUTOFF_INNER_RATIO.ln();
        let (psi, d_psi, d2_psi) = smoothstep((r / self.radius).ln() / scale);
        RadialJet { value: psi, r_d: d_psi / scale, r_d2: d2_psi / (scale * scale) }
    }

    /// Sampled `sup |r chi'| + |(r d/dr)^2 chi|` over the transition annulus.
    pub fn derivative_constant(&self) -> f64 {
        let n = 4001;
        let (lo, hi) = ((0.7 * self.radius).ln(), (1.05 * self.radius).ln());
        (0..n)
            .map(|i| {
                let jet = self.jet((lo + (hi - lo) * i as f64 / (n - 1) as f64).exp());
                jet.r_d.abs() + jet.r_d2.abs()
            })
            .fold(0.0, f64::max)
    }

    /// The transition annulus must lie inside the neck.
    pub fn check_support(&self, cfg: &PlumbingConfig) -> Result<()> {
        let outer = cfg.radius_at(cfg.half_extent());
        if self.radius >= outer {
            return Err(Error::CutoffSupport(self.radius));
        }
        Ok(())
    }
}

/// A pair on a disk around one preimage of the node, written as the model plus a perturbation.
#[derive(Clone, Debug)]
pub struct PerturbedInput {
    pub base: ModelParams,
    pub grid: RadialGrid,
    pub n_theta_modes: usize,
    /// Disk components at `(r_i, theta_k)`, node-major.
    pub pair: HiggsPair,
    pub det_exact: bool,
}

impl PerturbedInput {
    /// Sample `f(r, theta)` on the disk grid.
    pub fn from_fn(
        base: ModelParams,
        grid: RadialGrid,
        n_theta_modes: usize,
        det_exact: bool,
        f: impl Fn(f64, f64) -> PairValue,
    ) -> Result<Self> {
        let n_theta = 2 * n_theta_modes + 1;
        let mut values = Vec::with_capacity(grid.len() * n_theta);
        for i in 0..grid.len() {
            let r = grid.radius(i);
            for k in 0..n_theta {
                values.push(f(r, disk_angle(k, n_theta)));
            }
        }
        let pair = HiggsPair::from_values_sized(grid.len(), n_theta, &values);
        let input = Self { base, grid, n_theta_modes, pair, det_exact };
        input.validate()?;
        Ok(input)
    }

    /// Model connection with `Phi = Phi^mod + [[phi_0, phi_1], [phi_2, -phi_0]]`, the
    /// scalar components given as `scalar_section` fields on the radial grid.
    pub fn from_perturbation(base: ModelParams, grid: RadialGrid, phi: [&Field2D; 3], det_exact: bool) -> Result<Self> {
        let n_modes = phi[0].n_theta_modes;
        for f in phi {
            f.expect_tag(ComponentTag::ScalarSection)?;
            if f.n_tau != grid.len() || f.n_theta_modes != n_modes {
                return Err(Error::Config("perturbation fields must share the radial grid and mode count".into()));
            }
        }
        let [p0, p1, p2] = phi.map(|f| f.to_physical());
        let model_a = base.connection_dtheta();
        let model_phi = base.higgs_dz_over_z();
        let values: Vec<PairValue> = (0..p0.values.len())
            .map(|idx| {
                let (a, b, c) = (p0.values[idx].a, p1.values[idx].a, p2.values[idx].a);
                PairValue { a_tau: Mat2::zero(), a_theta: model_a, phi: model_phi + Mat2::new(a, b, c, -a) }
            })
            .collect();
        let pair = HiggsPair::from_values_sized(grid.len(), 2 * n_modes + 1, &values);
        let input = Self { base, grid, n_theta_modes: n_modes, pair, det_exact };
        input.validate()?;
        Ok(input)
    }

    pub fn n_theta(&self) -> usize {
        2 * self.n_theta_modes + 1
    }

    /// `(phi_0, phi_1, phi_2)` at a sample.
    pub fn components(&self, idx: usize) -> [C64; 3] {
        let phi = self.pair.phi.values[idx];
        [phi.a - self.base.c, phi.b, phi.c]
    }

    /// `sup |2 C phi_0 + phi_0^2 + phi_1 phi_2|`.
    pub fn det_residual(&self) -> f64 {
        let c = self.base.c;
        (0..self.pair.len())
            .map(|idx| {
                let [p0, p1, p2] = self.components(idx);
                (2.0 * c * p0 + p0 * p0 + p1 * p2).norm()
            })
            .fold(0.0, f64::max)
    }

    fn validate(&self) -> Result<()> {
        if self.det_exact {
            let residual = self.det_residual();
            if residual > DET_RELATION_TOL {
                return Err(Error::Structure(format!(
                    "input flagged det-exact violates the determinant relation by {residual:e}"
                )));
            }
        }
        Ok(())
    }
}

fn disk_angle(k: usize, n_theta: usize) -> f64 {
    2.0 * std::f64::consts::PI * k as f64 / n_theta as f64
}

/// Output of the diagonalizing gauge and the radial gauge fix.
#[derive(Clone, Debug)]
pub struct DiagonalGauge {
    /// `g_p` at the disk samples.
    pub gauge: NeckField,
    /// `diag(beta, -beta)`, the diagonal connection perturbation in radial gauge.
    pub beta: NeckField,
    /// `diag(h, -h)` with `h = -2 r d(beta)/dr`.
    pub source: NeckField,
    pub det_defect: f64,
    pub conjugation_defect: f64,
    /// Largest off-diagonal entry of the gauged connection (zero for a holomorphic pair).
    pub off_diagonal_defect: f64,
}

impl DiagonalGauge {
    pub fn gauge_field(&self) -> Field2D {
        Field2D::from_physical(&self.gauge, ComponentTag::ScalarSection)
    }

    pub fn beta_field(&self) -> Field2D {
        Field2D::from_physical(&self.beta, ComponentTag::ScalarSection)
    }

    pub fn source_field(&self) -> Field2D {
        Field2D::from_physical(&self.source, ComponentTag::ScalarSection)
    }
}

/// `g_p = (1 + d_0)^(-1/2) [[1, d_1], [d_2, 1]]` with `d_0 = -phi_0/(2C + phi_0)`,
/// `d_1 = -phi_1/(2C + phi_0)` and `d_2 = phi_2/(2C + phi_0)`.
pub fn diagonalizing_gauge(c: C64, phi: [C64; 3]) -> Result<Mat2> {
    let [p0, p1, p2] = phi;
    let denom = 2.0 * c + p0;
    let bound = DENOMINATOR_FLOOR * c.norm();
    if denom.norm() < bound {
        return Err(Error::NearSingularDenominator { value: denom.norm(), bound });
    }
    let (d0, d1, d2) = (-p0 / denom, -p1 / denom, p2 / denom);
    let s = (1.0 + d0).sqrt().inv();
    Ok(Mat2::new(s, s * d1, s * d2, s))
}

pub fn diagonalize_higgs(input: &PerturbedInput) -> Result<DiagonalGauge> {
    let n_r = input.grid.len();
    let n_theta = input.n_theta();
    let plan = FourierPlan::new(n_theta);
    let h = input.grid.spacing();
    let c = input.base.c;
    let model_phi = input.base.higgs_dz_over_z();

    let gauges = (0..input.pair.len())
        .map(|idx| diagonalizing_gauge(c, input.components(idx)))
        .collect::<Result<Vec<_>>>()?;
    let gauge = NeckField { n_tau: n_r, n_theta, values: gauges };
    let g_x = gauge.d_tau4(h);
    let g_theta = gauge.d_theta(&plan);

    let mut det_defect: f64 = 0.0;
    let mut conjugation_defect: f64 = 0.0;
    let mut off_diagonal_defect: f64 = 0.0;
    let mut p = NeckField::zeros(n_r, n_theta);
    let mut q = NeckField::zeros(n_r, n_theta);
    for idx in 0..input.pair.len() {
        let g = gauge.values[idx];
        det_defect = det_defect.max((g.det() - 1.0).norm());
        let gauged = input.pair.value(idx).gauge(&g, &g_x.values[idx], &g_theta.values[idx]);
        conjugation_defect = conjugation_defect.max((gauged.phi - model_phi).max_abs());
        off_diagonal_defect = off_diagonal_defect
            .max(gauged.a_tau.b.norm().max(gauged.a_tau.c.norm()))
            .max(gauged.a_theta.b.norm().max(gauged.a_theta.c.norm()));
        // The gauged connection is i sigma_3 (p dx + q dtheta).
        p.values[idx] = Mat2::diag_traceless(C64::from(gauged.a_tau.a.im));
        q.values[idx] = Mat2::diag_traceless(C64::from(gauged.a_theta.a.im));
    }

    // Unitary gauge exp(i kappa sigma_3) removing the dx component: kappa = -int_{-inf}^x p.
    let mut kappa = NeckField::zeros(n_r, n_theta);
    for k in 0..n_theta {
        let column: Vec<C64> = (0..n_r).map(|i| p.at(i, k).a).collect();
        let mut acc = -power_law_tail(&column, h);
        *kappa.at_mut(0, k) = Mat2::diag_traceless(acc);
        for i in 0..n_r - 1 {
            acc -= input.grid.cell_integral(&column, i);
            *kappa.at_mut(i + 1, k) = Mat2::diag_traceless(acc);
        }
    }
    let alpha = Mat2::diag_traceless(C64::from(input.base.alpha));
    let beta = q.zip_map(&kappa.d_theta(&plan), |q, dk| (*q + *dk).scale_re(0.5) - alpha);
    // -2 d(beta)/dx equals the curvature -(dq/dx - dp/dtheta), which avoids differentiating kappa.
    let dq = q.d_tau4(h);
    let dp = p.d_theta(&plan);
    let source = dq.zip_map(&dp, |dq, dp| *dp - *dq);

    Ok(DiagonalGauge { gauge, beta, source, det_defect, conjugation_defect, off_diagonal_defect })
}

/// `int_{-inf}^{x_0} f dx` for `f` continued as a power of `r` below the first node.
fn power_law_tail(f: &[C64], h: f64) -> C64 {
    let (f0, f1) = (f[0].norm(), f[1].norm());
    if f0 == 0.0 || f1 == 0.0 {
        return C64::default();
    }
    let s = (f1 / f0).ln() / h;
    if s <= 1e-3 {
        return C64::default();
    }
    f[0] / s
}

/// Split the scalar part `diag(u, -u)` of a disk field into angular modes.
fn scalar_modes(field: &NeckField, grid: &RadialGrid) -> (Vec<i64>, Vec<RadialFunction>) {
    let f = Field2D::from_physical(field, ComponentTag::ScalarSection);
    let n = f.n_theta_modes as i64;
    let modes: Vec<i64> = (-n..=n).collect();
    let values = modes
        .iter()
        .map(|&j| RadialFunction { grid: grid.clone(), values: (0..f.n_tau).map(|i| f.coefficient(j, i).a).collect() })
        .collect();
    (modes, values)
}

fn scalar_field(modes: &[i64], values: &[RadialFunction], n_theta_modes: usize) -> Field2D {
    let mut f = Field2D::zeros(values[0].values.len(), n_theta_modes, ComponentTag::ScalarSection);
    for (&j, v) in modes.iter().zip(values) {
        for (i, z) in v.values.iter().enumerate() {
            *f.coefficient_mut(j, i) = Mat2::diag_traceless(*z);
        }
    }
    f
}

/// Result of the Poisson gauge. The solver's `Delta_0` is the positive Laplacian
/// `-(r d/dr)^2 - d^2/dtheta^2`, so with `a -> g^-1 a g + g^-1 dbar g` the gauge that
/// flattens `A_1` is `exp(-u sigma_3)`.
#[derive(Clone, Debug)]
pub struct ModelGauge {
    pub u: Field2D,
    pub solution: PoissonSolution,
    /// `sup |Delta_0 u - h|`, the curvature left after gauging.
    pub curvature_residual: f64,
}

/// Solve `Delta_0 u = h` with `h = -2 r d(beta)/dr`, one angular mode at a time.
pub fn gauge_to_model(beta: &Field2D, grid: &RadialGrid, w: &WeightConfig) -> Result<ModelGauge> {
    beta.expect_tag(ComponentTag::ScalarSection)?;
    if beta.n_tau != grid.len() {
        return Err(Error::Config(format!("beta has {} radial nodes, grid has {}", beta.n_tau, grid.len())));
    }
    let beta_field = beta.to_physical();
    let source = beta_field.d_tau4(grid.spacing()).map(|m| m.scale_re(-2.0));
    solve_source(&source, grid, w, beta.n_theta_modes)
}

fn solve_source(source: &NeckField, grid: &RadialGrid, w: &WeightConfig, n_theta_modes: usize) -> Result<ModelGauge> {
    let (modes, mut h) = scalar_modes(source, grid);
    // Round-off from differentiating the gauge would spoil the endpoint power-law fit.
    let scale = h.iter().map(RadialFunction::sup_norm).fold(0.0, f64::max);
    for f in &mut h {
        if f.sup_norm() <= MODE_NOISE_FLOOR * scale {
            f.values.iter_mut().for_each(|v| *v = C64::default());
        }
        for v in f.values.iter_mut().filter(|v| v.norm() < SOURCE_NOISE_FLOOR) {
            *v = C64::default();
        }
    }
    let solution = solve_poisson_modes(&h, &modes, w)?;
    let curvature_residual = modes
        .par_iter()
        .zip(&solution.u)
        .zip(&h)
        .map(|((&j, u), hj)| mode_residual_abs(j, u, hj, grid.r_min))
        .reduce(|| 0.0, f64::max);
    Ok(ModelGauge { u: scalar_field(&modes, &solution.u, n_theta_modes), solution, curvature_residual })
}

/// Diagonalizing gauge, radial gauge and Poisson gauge, composed into `gamma` with
/// `exp(gamma)^*(pair)` unitarily equivalent to the model.
#[derive(Clone, Debug)]
pub struct NormalForm {
    pub diagonal: DiagonalGauge,
    pub model_gauge: ModelGauge,
    /// `gamma = log(g e^(-2u sigma_3) g^*)/2` at the disk samples.
    pub gamma: NeckField,
    pub grid: RadialGrid,
}

pub fn normalize(input: &PerturbedInput, w: &WeightConfig) -> Result<NormalForm> {
    let diagonal = diagonalize_higgs(input)?;
    let model_gauge = solve_source(&diagonal.source, &input.grid, w, input.n_theta_modes)?;
    let u = model_gauge.u.to_physical();
    let gamma = diagonal.gauge.zip_map(&u, |g, u| {
        let e = exp_traceless(&u.scale_re(-2.0));
        log_positive_unimodular(&(*g * e * g.adjoint())).scale_re(0.5)
    });
    Ok(NormalForm { diagonal, model_gauge, gamma, grid: input.grid.clone() })
}

impl NormalForm {
    /// Cubic interpolation in `log r` at angular sample `k`.
    pub fn gamma_at(&self, r: f64, k: usize) -> Mat2 {
        let x = r.ln();
        let h = self.grid.spacing();
        let n = self.grid.len();
        let s = (x - self.grid.x[0]) / h;
        let base = (s.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
        let mut acc = Mat2::zero();
        for a in 0..4 {
            let mut weight = 1.0;
            for b in 0..4 {
                if a != b {
                    weight *= (s - (base + b) as f64) / (a as f64 - b as f64);
                }
            }
            acc += self.gamma.at(base + a, k).scale_re(weight);
        }
        acc
    }
}

/// Transport the disk generators onto the neck, zero outside the unit disks. On the z-side
/// the neck angle is `-theta`; on the w-side it is `theta`.
pub fn generator_on_neck(plus: &NormalForm, minus: &NormalForm, cfg: &PlumbingConfig, grid: &NeckGrid) -> Result<NeckField> {
    for nf in [plus, minus] {
        if nf.gamma.n_theta != grid.n_theta {
            return Err(Error::Config("disk and neck angular resolutions differ".into()));
        }
        if nf.grid.r_min > cfg.seam_radius() {
            return Err(Error::Config("disk grid does not reach the seam".into()));
        }
    }
    let n = grid.n_theta;
    let mut out = NeckField::zeros(grid.n_tau(), n);
    for (i, &tau) in grid.tau_nodes.iter().enumerate() {
        let r = cfg.radius_at(tau);
        if r > 1.0 {
            continue;
        }
        for k in 0..n {
            *out.at_mut(i, k) = match Side::of_tau(tau) {
                Side::Plus => plus.gamma_at(r, (n - k) % n),
                Side::Minus => minus.gamma_at(r, k),
            };
        }
    }
    Ok(out)
}

/// `exp(chi_R gamma)^*(pair)` on the neck.
pub fn build_approximate(
    exact: &HiggsPair,
    gamma: &NeckField,
    cutoff: &CutoffProfile,
    cfg: &PlumbingConfig,
    grid: &NeckGrid,
) -> Result<HiggsPair> {
    cutoff.check_support(cfg)?;
    // The cutoff is differentiated exactly; only gamma is differenced.
    let chi: Vec<(f64, f64)> = grid
        .tau_nodes
        .iter()
        .map(|&tau| {
            let jet = cutoff.jet(cfg.radius_at(tau));
            (jet.value, Side::of_tau(tau).radial_sign() * jet.r_d)
        })
        .collect();
    let gamma_tau = gamma.d_tau4_split(grid.spacing(), grid.seam_split());
    let gamma_theta = gamma.d_theta(grid.fourier());
    let mut s = gamma.clone();
    let mut s_tau = gamma.clone();
    let mut s_theta = gamma.clone();
    for i in 0..grid.n_tau() {
        let (c, dc) = chi[i];
        for k in 0..grid.n_theta {
            *s.at_mut(i, k) = gamma.at(i, k).scale_re(c);
            *s_tau.at_mut(i, k) = gamma.at(i, k).scale_re(dc) + gamma_tau.at(i, k).scale_re(c);
            *s_theta.at_mut(i, k) = gamma_theta.at(i, k).scale_re(c);
        }
    }
    let values: Vec<PairValue> = (0..exact.len())
        .into_par_iter()
        .map(|idx| {
            let (g, [g_tau, g_theta]) = exp_traceless_with_derivatives(&s.values[idx], &[s_tau.values[idx], s_theta.values[idx]]);
            exact.value(idx).gauge(&g, &g_tau, &g_theta)
        })
        .collect();
    Ok(HiggsPair::from_values(grid, &values))
}

/// Largest coefficient jump across `tau = 0`, comparing cubic extrapolations from each side.
pub fn seam_jump(pair: &HiggsPair, grid: &NeckGrid) -> f64 {
    let left: Vec<usize> = (0..grid.n_tau()).filter(|&i| grid.tau_nodes[i] <= 0.0).rev().take(4).collect();
    let right: Vec<usize> = (0..grid.n_tau()).filter(|&i| grid.tau_nodes[i] > 0.0).take(4).collect();
    let extrapolate = |field: &NeckField, nodes: &[usize], k: usize| {
        let mut acc = Mat2::zero();
        for &a in nodes {
            let mut weight = 1.0;
            for &b in nodes {
                if a != b {
                    weight *= grid.tau_nodes[b] / (grid.tau_nodes[b] - grid.tau_nodes[a]);
                }
            }
            acc += field.at(a, k).scale_re(weight);
        }
        acc
    };
    let mut jump: f64 = 0.0;
    for field in [&pair.a_tau, &pair.a_theta, &pair.phi] {
        for k in 0..grid.n_theta {
            jump = jump.max((extrapolate(field, &left, k) - extrapolate(field, &right, k)).max_abs());
        }
    }
    jump
}

/// Discrete first and second Hitchin residuals, with fourth-order `tau` differences taken
/// on each side of the seam and spectral `vartheta` derivatives.
pub fn discrete_residuals(pair: &HiggsPair, grid: &NeckGrid) -> (NeckField, NeckField) {
    let (h, split) = (grid.spacing(), grid.seam_split());
    let plan = grid.fourier();
    let d_tau = HiggsPair {
        a_tau: pair.a_tau.d_tau4_split(h, split),
        a_theta: pair.a_theta.d_tau4_split(h, split),
        phi: pair.phi.d_tau4_split(h, split),
    };
    let d_theta = HiggsPair {
        a_tau: pair.a_tau.d_theta(plan),
        a_theta: pair.a_theta.d_theta(plan),
        phi: pair.phi.d_theta(plan),
    };
    let (first, second): (Vec<Mat2>, Vec<Mat2>) = (0..pair.len())
        .into_par_iter()
        .map(|idx| {
            let jet = PairJet { value: pair.value(idx), d_tau: d_tau.value(idx), d_theta: d_theta.value(idx) };
            (first_equation(&jet), second_equation(&jet))
        })
        .unzip();
    let wrap = |values| NeckField { n_tau: grid.n_tau(), n_theta: grid.n_theta, values };
    (wrap(first), wrap(second))
}

/// Sup-norm of the first-equation residual per `tau` node and overall.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorProfile {
    pub per_node: Vec<f64>,
    pub sup: f64,
    pub second_equation_sup: f64,
}

impl ErrorProfile {
    fn from_fields(first: &NeckField, second: &NeckField) -> Self {
        let per_node: Vec<f64> =
            (0..first.n_tau).map(|i| (0..first.n_theta).map(|k| first.at(i, k).norm()).fold(0.0, f64::max)).collect();
        let sup = per_node.iter().copied().fold(0.0, f64::max);
        Self { per_node, sup, second_equation_sup: second.sup_norm() }
    }

    /// Largest residual at nodes whose radius lies outside `[lo, hi]`.
    pub fn sup_outside(&self, cfg: &PlumbingConfig, grid: &NeckGrid, lo: f64, hi: f64) -> f64 {
        grid.tau_nodes
            .iter()
            .zip(&self.per_node)
            .filter(|(&tau, _)| {
                let r = cfg.radius_at(tau);
                r < lo || r > hi
            })
            .map(|(_, e)| *e)
            .fold(0.0, f64::max)
    }
}

pub fn error_profile(pair: &HiggsPair, grid: &NeckGrid) -> ErrorProfile {
    let (first, second) = discrete_residuals(pair, grid);
    ErrorProfile::from_fields(&first, &second)
}

/// Residual profile of a pair known through exact jets.
pub fn jet_error_profile(grid: &NeckGrid, jet: impl Fn(f64, f64) -> PairJet + Sync) -> ErrorProfile {
    let samples: Vec<(Mat2, Mat2)> = (0..grid.n_tau() * grid.n_theta)
        .into_par_iter()
        .map(|idx| {
            let j = jet(grid.tau_nodes[idx / grid.n_theta], grid.theta(idx % grid.n_theta));
            (first_equation(&j), second_equation(&j))
        })
        .collect();
    let wrap = |values: Vec<Mat2>| NeckField { n_tau: grid.n_tau(), n_theta: grid.n_theta, values };
    let (first, second): (Vec<Mat2>, Vec<Mat2>) = samples.into_iter().unzip();
    ErrorProfile::from_fields(&wrap(first), &wrap(second))
}

/// Sup-norm of the discrete first-equation residual.
pub fn hitchin_error(pair: &HiggsPair, grid: &NeckGrid) -> f64 {
    error_profile(pair, grid).sup
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::I;

    fn plus_model(c: C64) -> ModelParams {
        ModelParams::new(0.0, c, Side::Plus).unwrap()
    }

    #[test]
    fn cutoff_profile_shape() {
        let cut = CutoffProfile::new(0.2).unwrap();
        assert_eq!(cut.value(0.1), 1.0);
        assert_eq!(cut.value(0.15), 1.0);
        assert_eq!(cut.value(0.2), 0.0);
        assert!(cut.value(0.17) > 0.0 && cut.value(0.17) < 1.0);
    }

    #[test]
    fn gauge_for_upper_triangular_perturbation() {
        let c = C64::from(1.0);
        for r in [1e-4f64, 0.01, 0.5] {
            let phi1 = C64::from(r.sqrt());
            let g = diagonalizing_gauge(c, [C64::default(), phi1, C64::default()]).unwrap();
            let expected = Mat2::new(C64::from(1.0), -phi1 / 2.0, C64::default(), C64::from(1.0));
            assert!((g - expected).max_abs() < 1e-15);
            let phi = Mat2::new(c, phi1, C64::default(), -c);
            assert!((g.inverse() * phi * g - Mat2::diag_traceless(c)).max_abs() < 1e-12);
        }
    }

    #[test]
    fn gauge_for_full_perturbation() {
        let c = C64::from(1.0);
        for r in [1e-3, 0.1, 0.4] {
            let p0 = C64::from(r);
            let p1 = C64::new(0.3, 0.2);
            let p2 = C64::from(-2.0 * r - r * r) / p1;
            let g = diagonalizing_gauge(c, [p0, p1, p2]).unwrap();
            assert!((g.det() - 1.0).norm() < 1e-10);
            let phi = Mat2::new(c + p0, p1, p2, -c - p0);
            assert!((g.inverse() * phi * g - Mat2::diag_traceless(c)).max_abs() < 1e-9);
        }
    }

    #[test]
    fn near_singular_denominator() {
        let err = diagonalizing_gauge(C64::from(1.0), [C64::from(-1.95), C64::default(), C64::default()]);
        assert!(matches!(err, Err(Error::NearSingularDenominator { .. })));
    }

    #[test]
    fn zero_perturbation_gives_identity_gauge() {
        let grid = RadialGrid::new(1e-4, 201).unwrap();
        let model = plus_model(C64::new(0.0, -0.125));
        let input = PerturbedInput::from_fn(model, grid, 4, true, |_, _| PairValue {
            a_tau: Mat2::zero(),
            a_theta: model.connection_dtheta(),
            phi: model.higgs_dz_over_z(),
        })
        .unwrap();
        let d = diagonalize_higgs(&input).unwrap();
        assert!(d.gauge.values.iter().all(|g| (*g - Mat2::identity()).max_abs() < 1e-15));
        assert!(d.beta.sup_norm() < 1e-12);
    }

    #[test]
    fn det_exact_flag_is_checked() {
        let grid = RadialGrid::new(1e-4, 201).unwrap();
        let model = plus_model(C64::from(1.0));
        let bad = PerturbedInput::from_fn(model, grid, 4, true, |r, _| PairValue {
            a_tau: Mat2::zero(),
            a_theta: Mat2::zero(),
            phi: Mat2::new(C64::from(1.0 + r), C64::default(), C64::default(), C64::from(-1.0 - r)),
        });
        assert!(matches!(bad, Err(Error::Structure(_))));
    }

    #[test]
    fn constant_imaginary_generator_is_hermitian() {
        let g = exp_traceless(&Mat2::sigma3().scale(I));
        assert!((g * g.adjoint() - Mat2::identity()).max_abs() < 1e-15);
    }
}
