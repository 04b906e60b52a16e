//! Fixed-point corrector: perturb an approximate pair within its complex gauge orbit to an
//! exact solution of the discrete first equation.
//!
//! The discrete gauge action uses `g = exp(gamma)` with `d g` taken by the chain rule along
//! the zero-padded centered difference of `gamma` and its spectral `vartheta` derivative.
//! With this choice the centered-stencil `L` is exactly the derivative of the centered
//! residual, so `E(exp(gamma)^* P) = E(P) + L gamma + Q(gamma)` holds to round-off, and the
//! frozen map `gamma -> -G (E(P) + Q(gamma))` has exact discrete solutions as fixed points.

use nalgebra::DVector;
use nalgebra_sparse::factorization::CscCholesky;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{bracket, exp_traceless_with_derivatives, Mat2, I};
use crate::error::{Error, Result};
use crate::gauge::discrete_residuals;
use crate::geometry::{ComponentTag, Field2D, NeckField, NeckGrid, PlumbingConfig};
use crate::linearized::{
    assemble_l_with, centered_residuals, coords_to_section, factor, section_to_coords, smallest_eigenpairs,
    AssemblyOptions, Angular, LinearOperatorHandle, Stencil, EIGEN_TOL,
};
use crate::model::ModelParams;
use crate::pair::{HiggsPair, PairValue};

pub const MAX_ITERATIONS: usize = 50;
/// Slack `epsilon` in `sigma_R = C^-1 T^(-2 - epsilon)`.
pub const SIGMA_EPSILON: f64 = 0.1;
/// Absolute floor of the stopping tolerance.
pub const RESIDUAL_FLOOR: f64 = 1e-10;
/// Fraction of the discretization-error estimate used as the stopping tolerance.
pub const DISCRETIZATION_FRACTION: f64 = 0.01;
/// Relative residual allowed when applying `G`.
pub const SOLVE_TOL: f64 = 1e-9;
/// Smallest eigenvalue below which `L` is treated as singular.
pub const SINGULAR_EIGENVALUE: f64 = 1e-14;
/// Consecutive non-contracting steps that abort the iteration.
pub const STALL_LIMIT: usize = 3;

/// Set the end nodes of a section to zero.
pub fn with_dirichlet_ends(gamma: &NeckField) -> NeckField {
    let mut out = gamma.clone();
    for k in 0..out.n_theta {
        *out.at_mut(0, k) = Mat2::zero();
        *out.at_mut(out.n_tau - 1, k) = Mat2::zero();
    }
    out
}

fn zero_ends(mut f: NeckField) -> NeckField {
    for k in 0..f.n_theta {
        *f.at_mut(0, k) = Mat2::zero();
        *f.at_mut(f.n_tau - 1, k) = Mat2::zero();
    }
    f
}

/// Discrete derivatives of a section: zero-padded centered in `tau`, spectral in `vartheta`.
fn section_derivatives(gamma: &NeckField, grid: &NeckGrid) -> (NeckField, NeckField) {
    (gamma.d_tau_zero_padded(grid.spacing()), gamma.d_theta(grid.fourier()))
}

/// `g = exp(gamma)` with its discrete derivatives, per sample.
fn gauge_fields(gamma: &NeckField, grid: &NeckGrid) -> Vec<(Mat2, Mat2, Mat2)> {
    let (d_tau, d_theta) = section_derivatives(gamma, grid);
    (0..gamma.values.len())
        .map(|idx| {
            let (g, [g_tau, g_theta]) =
                exp_traceless_with_derivatives(&gamma.values[idx], &[d_tau.values[idx], d_theta.values[idx]]);
            (g, g_tau, g_theta)
        })
        .collect()
}

/// `exp(gamma)^* P` under the discrete gauge action. `gamma` is taken to vanish at the ends.
pub fn gauge_pair(pair: &HiggsPair, gamma: &NeckField, grid: &NeckGrid) -> HiggsPair {
    let gamma = with_dirichlet_ends(gamma);
    let values: Vec<PairValue> = gauge_fields(&gamma, grid)
        .iter()
        .enumerate()
        .map(|(idx, (g, g_tau, g_theta))| pair.value(idx).gauge(g, g_tau, g_theta))
        .collect();
    HiggsPair::from_values(grid, &values)
}

/// The linear parts `(dbar_A - d_A) gamma` (as `dtau`, `dvartheta` coefficients) and
/// `[Phi ^ gamma]` (as a `dzeta` coefficient).
pub fn linear_terms(pair: &HiggsPair, gamma: &NeckField, grid: &NeckGrid) -> (NeckField, NeckField, NeckField) {
    let gamma = with_dirichlet_ends(gamma);
    let (d_tau, d_theta) = section_derivatives(&gamma, grid);
    let mut x_tau = NeckField::zeros(gamma.n_tau, gamma.n_theta);
    let mut x_theta = NeckField::zeros(gamma.n_tau, gamma.n_theta);
    let mut p = NeckField::zeros(gamma.n_tau, gamma.n_theta);
    for idx in 0..gamma.values.len() {
        let g = gamma.values[idx];
        let nabla_tau = d_tau.values[idx] + bracket(&pair.a_tau.values[idx], &g);
        let nabla_theta = d_theta.values[idx] + bracket(&pair.a_theta.values[idx], &g);
        x_tau.values[idx] = nabla_theta.scale(I);
        x_theta.values[idx] = nabla_tau.scale(-I);
        p.values[idx] = bracket(&pair.phi.values[idx], &g);
    }
    (x_tau, x_theta, p)
}

/// Remainders of the gauge action beyond first order.
#[derive(Clone, Debug)]
pub struct RemainderTerms {
    pub r_a_tau: NeckField,
    pub r_a_theta: NeckField,
    pub r_phi: NeckField,
}

impl RemainderTerms {
    pub fn sup_norm(&self) -> f64 {
        self.r_a_tau.sup_norm().max(self.r_a_theta.sup_norm()).max(self.r_phi.sup_norm())
    }

    pub fn to_fields(&self) -> [Field2D; 3] {
        HiggsPair { a_tau: self.r_a_tau.clone(), a_theta: self.r_a_theta.clone(), phi: self.r_phi.clone() }.to_fields()
    }
}

/// `R_A = e^-gamma (dbar_A e^gamma) - (d_A e^gamma) e^-gamma - (dbar_A - d_A) gamma` and
/// `R_Phi = e^-gamma Phi e^gamma - [Phi ^ gamma] - Phi`.
pub fn remainder_terms(pair: &HiggsPair, gamma: &NeckField, grid: &NeckGrid) -> RemainderTerms {
    let gamma = with_dirichlet_ends(gamma);
    let (x_tau, x_theta, p) = linear_terms(pair, &gamma, grid);
    let gauge = gauge_fields(&gamma, grid);
    let n = gamma.values.len();
    let mut out = RemainderTerms {
        r_a_tau: NeckField::zeros(gamma.n_tau, gamma.n_theta),
        r_a_theta: NeckField::zeros(gamma.n_tau, gamma.n_theta),
        r_phi: NeckField::zeros(gamma.n_tau, gamma.n_theta),
    };
    for idx in 0..n {
        let v = pair.value(idx);
        let (g, g_tau, g_theta) = gauge[idx];
        let g_inv = g.inverse();
        let a = v.a01();
        let dbar = (g_tau + g_theta.scale(I)).scale_re(0.5) + bracket(&a, &g);
        let d = (g_tau - g_theta.scale(I)).scale_re(0.5) - bracket(&a.adjoint(), &g);
        // u dzetabar + w dzeta = (u + w) dtau + i (w - u) dvartheta.
        let u = g_inv * dbar;
        let w = -(d * g_inv);
        out.r_a_tau.values[idx] = u + w - x_tau.values[idx];
        out.r_a_theta.values[idx] = (w - u).scale(I) - x_theta.values[idx];
        out.r_phi.values[idx] = g_inv * v.phi * g - p.values[idx] - v.phi;
    }
    out
}

/// The quadratic tail `Q(gamma)` of the first equation, assembled from the remainder terms,
/// in the normalization of the hermitian residual `-i * (F + [Phi ^ Phi^*])`. Rows at the end
/// nodes are zero.
pub fn q_term(pair: &HiggsPair, gamma: &NeckField, grid: &NeckGrid) -> NeckField {
    let gamma = with_dirichlet_ends(gamma);
    let (x_tau, x_theta, p) = linear_terms(pair, &gamma, grid);
    let rem = remainder_terms(pair, &gamma, grid);
    let d_tau_r = rem.r_a_theta.d_tau(grid.spacing());
    let d_theta_r = rem.r_a_tau.d_theta(grid.fourier());
    let mut q = NeckField::zeros(gamma.n_tau, gamma.n_theta);
    for idx in 0..gamma.values.len() {
        let v = pair.value(idx);
        let (r_tau, r_theta, r_phi) = (rem.r_a_tau.values[idx], rem.r_a_theta.values[idx], rem.r_phi.values[idx]);
        // d_A R_A.
        let d_a = d_tau_r.values[idx] + bracket(&v.a_tau, &r_theta) - d_theta_r.values[idx] - bracket(&v.a_theta, &r_tau);
        // (1/2)[Y ^ Y] for the full first-order change Y.
        let y_tau = x_tau.values[idx] + r_tau;
        let y_theta = x_theta.values[idx] + r_theta;
        let quadratic_a = bracket(&y_tau, &y_theta);
        // dzeta ^ dzetabar = -2i dtau ^ dvartheta.
        let w = p.values[idx] + r_phi;
        let higgs = bracket(&r_phi, &v.phi.adjoint()) + bracket(&v.phi, &r_phi.adjoint()) + bracket(&w, &w.adjoint());
        q.values[idx] = (d_a + quadratic_a).scale(-I) - higgs.scale_re(2.0);
    }
    zero_ends(q)
}

/// `L gamma` from an assembled physical-layout operator.
pub fn apply_l(op: &LinearOperatorHandle, gamma: &NeckField) -> NeckField {
    let x = section_to_coords(gamma);
    coords_to_section(&op.apply(&x), op.n_tau, op.n_theta)
}

/// `E(exp(gamma)^* P) - E(P) - L gamma` by direct evaluation of the centered residual.
pub fn direct_q(pair: &HiggsPair, gamma: &NeckField, grid: &NeckGrid, op: &LinearOperatorHandle) -> NeckField {
    let gamma = with_dirichlet_ends(gamma);
    let (e0, _) = centered_residuals(pair, grid);
    let (e1, _) = centered_residuals(&gauge_pair(pair, &gamma, grid), grid);
    let l = apply_l(op, &gamma);
    let mut out = NeckField::zeros(gamma.n_tau, gamma.n_theta);
    for idx in 0..out.values.len() {
        out.values[idx] = e1.values[idx] - e0.values[idx] - l.values[idx];
    }
    zero_ends(out)
}

/// The centered `L` used by the corrector.
pub fn corrector_operator(pair: &HiggsPair, grid: &NeckGrid) -> Result<LinearOperatorHandle> {
    assemble_l_with(
        pair,
        grid,
        &AssemblyOptions { angular: Angular::Physical, stencil: Stencil::Centered, include_mass: true },
    )
}

/// `sup |E(exp(gamma)^* P) - E(P) - L gamma - Q(gamma)|` relative to `sup |Q(gamma)|`.
pub fn expansion_defect(pair: &HiggsPair, gamma: &NeckField, grid: &NeckGrid, op: &LinearOperatorHandle) -> f64 {
    let direct = direct_q(pair, gamma, grid, op);
    let formula = q_term(pair, gamma, grid);
    let diff = direct.zip_map(&formula, |a, b| *a - *b).sup_norm();
    diff / formula.sup_norm().max(f64::MIN_POSITIVE)
}

/// Reference connection and order of the graph norm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphNormConfig {
    /// `dvartheta` coefficient of the `tau`-invariant reference connection `B` (its `dtau` part is 0).
    pub b_theta: Mat2,
    /// 1 or 2.
    pub order: usize,
}

impl GraphNormConfig {
    pub fn from_model(params: &ModelParams) -> Self {
        Self { b_theta: params.neck_value().a_theta, order: 2 }
    }

    fn nabla(&self, f: &NeckField, grid: &NeckGrid) -> (NeckField, NeckField) {
        let tau = f.d_tau(grid.spacing());
        let theta = f.d_theta(grid.fourier()).zip_map(f, |d, v| *d + bracket(&self.b_theta, v));
        (tau, theta)
    }

    /// `(sum of quadrature of |gamma|^2 + |nabla_B gamma|^2 + |nabla_B^2 gamma|^2)^(1/2)`.
    pub fn norm(&self, gamma: &NeckField, grid: &NeckGrid) -> f64 {
        let l2 = |f: &NeckField| {
            let n = f.l2_norm(grid);
            n * n
        };
        let mut total = l2(gamma);
        if self.order >= 1 {
            let (t, th) = self.nabla(gamma, grid);
            total += l2(&t) + l2(&th);
            if self.order >= 2 {
                let (tt, t_th) = self.nabla(&t, grid);
                let (th_t, thth) = self.nabla(&th, grid);
                total += l2(&tt) + l2(&t_th) + l2(&th_t) + l2(&thth);
            }
        }
        total.sqrt()
    }
}

/// `G = L^-1` through a sparse Cholesky factor, with the smallest eigenvalue of `L`.
pub struct GreenOperator {
    pub op: LinearOperatorHandle,
    chol: CscCholesky<f64>,
    pub lambda1: f64,
    /// Eigenvector of `lambda1` as a section.
    pub ground_state: NeckField,
}

/// Result of one application of `G`.
#[derive(Clone, Debug)]
pub struct GApplication {
    pub gamma: NeckField,
    /// `|L (G rhs) - rhs| / |rhs|` in coordinates.
    pub relative_residual: f64,
}

impl GreenOperator {
    pub fn new(op: LinearOperatorHandle, rng: &mut impl Rng) -> Result<Self> {
        if op.angular != Angular::Physical {
            return Err(Error::Config("G needs a physical-layout operator".into()));
        }
        let eig = smallest_eigenpairs(&op.matrix, 1, EIGEN_TOL, rng)?;
        let lambda1 = eig.values[0];
        if lambda1 < SINGULAR_EIGENVALUE {
            return Err(Error::SingularOperator(format!("smallest eigenvalue {lambda1:e}")));
        }
        let chol = factor(&op.matrix)?;
        let ground_state = coords_to_section(&eig.vectors.column(0).into_owned(), op.n_tau, op.n_theta);
        Ok(Self { op, chol, lambda1, ground_state })
    }

    /// `G rhs` with the residual check; rows of `rhs` at the end nodes are ignored.
    pub fn apply(&self, rhs: &NeckField) -> Result<GApplication> {
        let b = section_to_coords(rhs);
        let x: DVector<f64> = self.chol.solve(&b).column(0).into_owned();
        let residual = (self.op.apply(&x) - &b).norm();
        let relative_residual = residual / b.norm().max(f64::MIN_POSITIVE);
        if relative_residual > SOLVE_TOL && b.norm() > 0.0 {
            return Err(Error::SingularOperator(format!("solve residual {relative_residual:e} exceeds {SOLVE_TOL:e}")));
        }
        Ok(GApplication { gamma: coords_to_section(&x, self.op.n_tau, self.op.n_theta), relative_residual })
    }

    /// `G rhs` for a hermitian `Field2D`.
    pub fn apply_field(&self, rhs: &Field2D) -> Result<Field2D> {
        rhs.expect_tag(ComponentTag::ScalarSection)?;
        let out = self.apply(&rhs.to_physical())?;
        Ok(Field2D::from_physical(&out.gamma, ComponentTag::ScalarSection))
    }

    /// `|G rhs|_{H^2_B} / |rhs|_{L^2}`.
    pub fn amplification(&self, rhs: &NeckField, norm: &GraphNormConfig, grid: &NeckGrid) -> Result<f64> {
        let rhs = zero_ends(rhs.clone());
        let out = self.apply(&rhs)?;
        Ok(norm.norm(&out.gamma, grid) / rhs.l2_norm(grid).max(f64::MIN_POSITIVE))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrectorOptions {
    pub max_iterations: usize,
    pub epsilon: f64,
    /// Overrides the stopping tolerance derived from the discretization estimate.
    pub tol: Option<f64>,
}

impl Default for CorrectorOptions {
    fn default() -> Self {
        Self { max_iterations: MAX_ITERATIONS, epsilon: SIGMA_EPSILON, tol: None }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CorrectorSummary {
    pub r: f64,
    pub t: f64,
    pub residual_before: f64,
    pub residual_after: f64,
    /// Residual of the output pair with fourth-order `tau` differences.
    pub residual_after_fourth_order: f64,
    pub discretization_estimate: f64,
    pub stop_tol: f64,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub contraction_factors: Vec<f64>,
    pub lambda1: f64,
    /// `C` in `|G v|_{H^2_B} <= C T^2 |v|_{L^2}`, estimated on the ground state and on `E(P)`.
    pub constant_c: f64,
    pub sigma_r: f64,
    pub gamma_h2: f64,
    pub within_trust_region: bool,
}

/// Iterate state of the corrector.
#[derive(Clone, Debug)]
pub struct CorrectorState {
    pub gamma: Field2D,
    pub residual_history: Vec<f64>,
    pub sigma_r: f64,
    pub summary: CorrectorSummary,
}

fn interior_sup(f: &NeckField) -> f64 {
    f.sup_norm_on(1..f.n_tau - 1)
}

/// Run the frozen fixed-point map `gamma -> -G (E(P) + Q(gamma))` from `gamma = 0`.
pub fn correct(
    pair: &HiggsPair,
    cfg: &PlumbingConfig,
    grid: &NeckGrid,
    norm: &GraphNormConfig,
    opts: &CorrectorOptions,
    rng: &mut impl Rng,
) -> Result<(HiggsPair, CorrectorState)> {
    if opts.max_iterations == 0 {
        return Err(Error::Config("the corrector needs at least one iteration".into()));
    }
    if !(opts.epsilon.is_finite() && opts.epsilon >= 0.0) {
        return Err(Error::Config(format!("epsilon = {} must be finite and nonnegative", opts.epsilon)));
    }
    if opts.tol.is_some_and(|tol| !(tol.is_finite() && tol > 0.0)) {
        return Err(Error::Config("tol must be finite and positive".into()));
    }
    let t = cfg.neck_length();
    let op = corrector_operator(pair, grid)?;
    let green = GreenOperator::new(op, rng)?;
    let (e0, _) = centered_residuals(pair, grid);
    let e0 = zero_ends(e0);
    let residual_before = interior_sup(&e0);
    let (fourth, _) = discrete_residuals(pair, grid);
    let discretization_estimate = interior_sup(&zero_ends(e0.zip_map(&fourth, |a, b| *a - *b)));
    let stop_tol = opts.tol.unwrap_or(RESIDUAL_FLOOR.max(DISCRETIZATION_FRACTION * discretization_estimate));

    let mut constant_c = green.amplification(&green.ground_state, norm, grid)? / (t * t);
    if residual_before > 0.0 {
        constant_c = constant_c.max(green.amplification(&e0, norm, grid)? / (t * t));
    }
    let sigma_r = 1.0 / (constant_c * t.powf(2.0 + opts.epsilon));

    let mut gamma = NeckField::zeros(grid.n_tau(), grid.n_theta);
    let mut current;
    let mut residual_history = vec![residual_before];
    let mut contraction_factors = Vec::new();
    let mut previous_step: Option<f64> = None;
    let mut stalled = 0;
    let mut residual = e0;
    let mut iterations = 0;
    loop {
        if iterations >= opts.max_iterations {
            return Err(Error::NonConvergence(iterations));
        }
        // gamma_{n+1} = -G (E(0) + Q(gamma_n)) = gamma_n - G E(gamma_n).
        let step = green.apply(&residual)?.gamma;
        gamma = gamma.zip_map(&step, |g, s| *g - *s);
        iterations += 1;
        let step_norm = step.l2_norm(grid);
        if let Some(prev) = previous_step {
            let ratio = if prev > 0.0 { step_norm / prev } else { 0.0 };
            contraction_factors.push(ratio);
            stalled = if ratio >= 1.0 || !ratio.is_finite() { stalled + 1 } else { 0 };
            if stalled >= STALL_LIMIT {
                return Err(Error::ContractionFailure(contraction_factors));
            }
        }
        previous_step = Some(step_norm);
        current = gauge_pair(pair, &gamma, grid);
        residual = zero_ends(centered_residuals(&current, grid).0);
        let sup = interior_sup(&residual);
        if !sup.is_finite() {
            return Err(Error::ContractionFailure(contraction_factors));
        }
        residual_history.push(sup);
        if sup <= stop_tol {
            break;
        }
    }
    let gamma_h2 = norm.norm(&gamma, grid);
    let (fourth_after, _) = discrete_residuals(&current, grid);
    let summary = CorrectorSummary {
        r: cfg.cutoff_radius,
        t,
        residual_before,
        residual_after: *residual_history.last().unwrap_or(&residual_before),
        residual_after_fourth_order: interior_sup(&zero_ends(fourth_after)),
        discretization_estimate,
        stop_tol,
        iterations,
        residual_history: residual_history.clone(),
        contraction_factors,
        lambda1: green.lambda1,
        constant_c,
        sigma_r,
        gamma_h2,
        within_trust_region: gamma_h2 <= sigma_r,
    };
    let state = CorrectorState {
        gamma: Field2D::from_physical(&gamma, ComponentTag::ScalarSection),
        residual_history,
        sigma_r,
        summary,
    };
    Ok((current, state))
}
