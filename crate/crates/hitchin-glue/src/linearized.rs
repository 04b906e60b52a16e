//! The linearized Hitchin operator, the Dirac-type operator, and their smallest eigenvalues.
//!
//! Unknowns are hermitian trace-free sections on the neck with Dirichlet conditions at both
//! ends, stored in the fixed basis (sigma3, sigma1, sigma2). With discretized covariant
//! derivatives `G_tau`, `G_theta` the operator is assembled as
//! `L = G_tau^T G_tau + G_theta^T G_theta + 2 M_phi`, which is symmetric and nonnegative by
//! construction and reproduces `<L gamma, gamma> = |d_A gamma|^2 + 2 |[Phi ^ gamma]|^2` exactly.
//!
//! Two `tau` stencils are offered. `Compact` differences neighbouring nodes onto midpoints and
//! is used for spectra. `Centered` uses the zero-padded centered difference; its `L` is the
//! exact Jacobian of the centered discrete Hitchin residual under the discrete gauge action,
//! which is what the corrector needs.
//!
//! Multiplying by `i` identifies hermitian sections with `su(2)`-valued ones, so the same
//! matrices describe the operator on either; no runtime transform is applied.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen};
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{bracket, herm_basis, m_phi, m_phi_matrix, numerical_kernel_dim, Mat2, C64, I};
use crate::error::{Error, Result};
use crate::fixtures::RadialFixture;
use crate::gauge::CutoffProfile;
use crate::geometry::{ComponentTag, Field2D, FourierPlan, NeckField, NeckGrid, PlumbingConfig};
use crate::model::{glue_models, ModelParams};
use crate::pair::HiggsPair;
use crate::rng::{substream, Stream};

/// Relative tolerance for the symmetry of assembled operators.
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Relative tolerance of the energy identity.
pub const ENERGY_TOL: f64 = 1e-8;
/// Default relative eigenvalue tolerance `|d lambda| / lambda`.
pub const EIGEN_TOL: f64 = 1e-8;
pub const MAX_EIGEN_ITERATIONS: usize = 2000;
/// Largest allowed spread `max/min` of `lambda_1 T^2` over a sweep.
pub const FLATNESS_BOUND: f64 = 1.5;
/// An eigenvalue below this fraction of the Dirichlet reference counts as small.
pub const SMALL_EIGENVALUE_FACTOR: f64 = 0.1;
/// Tolerance for recognizing a background as independent of `vartheta`.
const THETA_INDEPENDENCE_TOL: f64 = 1e-12;
/// Below this size eigenproblems are solved densely.
const DENSE_LIMIT: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    LFull,
    DeltaA,
    DiracL1L2,
    /// `L_full` restricted to one angular mode.
    ModeBlock(i64),
}

/// How the angular direction is represented.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Angular {
    /// All `2N + 1` samples, spectral derivative.
    Physical,
    /// One Fourier mode of a `vartheta`-independent background.
    Mode(i64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stencil {
    Compact,
    Centered,
}

/// An assembled sparse operator together with its layout.
#[derive(Clone, Debug)]
pub struct LinearOperatorHandle {
    pub kind: OperatorKind,
    pub angular: Angular,
    pub stencil: Stencil,
    pub n_tau: usize,
    pub n_theta: usize,
    pub spacing: f64,
    /// Unknowns per interior node.
    pub node_dim: usize,
    /// Square symmetric matrix for `L` and `Delta_A`; the rectangular operator for Dirac.
    pub matrix: CscMatrix<f64>,
}

impl LinearOperatorHandle {
    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    /// The symmetric matrix whose spectrum is studied: `D^T D` for the Dirac operator.
    pub fn normal_matrix(&self) -> CscMatrix<f64> {
        match self.kind {
            OperatorKind::DiracL1L2 => &self.matrix.transpose() * &self.matrix,
            _ => self.matrix.clone(),
        }
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.matrix * x
    }

    /// `max |L - L^T| / max |L|`.
    pub fn symmetry_defect(&self) -> f64 {
        let dense = dense_of(&self.normal_matrix());
        let scale = dense.amax().max(f64::MIN_POSITIVE);
        (&dense - dense.transpose()).amax() / scale
    }

    /// The 1-D Dirichlet Laplacian `-d^2/dx^2` on `[0, length]` with `n_nodes` nodes.
    pub fn dirichlet_laplacian_1d(length: f64, n_nodes: usize) -> Result<Self> {
        if n_nodes < 3 || !(length > 0.0) {
            return Err(Error::Config("Dirichlet Laplacian needs three nodes and a positive length".into()));
        }
        let h = length / (n_nodes - 1) as f64;
        let zero = vec![DMatrix::zeros(1, 1); n_nodes];
        let g = assemble_tau(n_nodes, 1, h, 1.0, Stencil::Compact, &zero);
        Ok(Self {
            kind: OperatorKind::DeltaA,
            angular: Angular::Physical,
            stencil: Stencil::Compact,
            n_tau: n_nodes,
            n_theta: 1,
            spacing: h,
            node_dim: 1,
            matrix: &g.transpose() * &g,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            kind: OperatorKind::DeltaA,
            angular: Angular::Physical,
            stencil: Stencil::Compact,
            n_tau: n + 2,
            n_theta: 1,
            spacing: 1.0,
            node_dim: 1,
            matrix: CscMatrix::identity(n),
        }
    }
}

/// Dense copy of a sparse matrix.
fn dense_of(m: &CscMatrix<f64>) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(m.nrows(), m.ncols());
    for (i, j, v) in m.triplet_iter() {
        d[(i, j)] += *v;
    }
    d
}

fn push_block(coo: &mut CooMatrix<f64>, row0: usize, col0: usize, block: &DMatrix<f64>) {
    for c in 0..block.ncols() {
        for r in 0..block.nrows() {
            let v = block[(r, c)];
            if v != 0.0 {
                coo.push(row0 + r, col0 + c, v);
            }
        }
    }
}

/// `tau` part of a first-order operator with zeroth-order node blocks, mapping interior
/// unknowns to midpoint rows (`Compact`) or to rows at every node (`Centered`).
fn assemble_tau(n: usize, m: usize, h: f64, scale: f64, stencil: Stencil, blocks: &[DMatrix<f64>]) -> CscMatrix<f64> {
    let interior = |i: usize| i >= 1 && i + 1 < n;
    let col = |i: usize| (i - 1) * m;
    let identity = DMatrix::<f64>::identity(m, m);
    let mut coo = match stencil {
        Stencil::Compact => CooMatrix::new((n - 1) * m, (n - 2) * m),
        Stencil::Centered => CooMatrix::new(n * m, (n - 2) * m),
    };
    match stencil {
        Stencil::Compact => {
            for p in 0..n - 1 {
                for (q, sign) in [(p, -1.0), (p + 1, 1.0)] {
                    if interior(q) {
                        let block = &identity * (sign * scale / h) + &blocks[q] * 0.5;
                        push_block(&mut coo, p * m, col(q), &block);
                    }
                }
            }
        }
        Stencil::Centered => {
            for i in 0..n {
                if i + 1 < n && interior(i + 1) {
                    push_block(&mut coo, i * m, col(i + 1), &(&identity * (0.5 * scale / h)));
                }
                if i >= 1 && interior(i - 1) {
                    push_block(&mut coo, i * m, col(i - 1), &(&identity * (-0.5 * scale / h)));
                }
                if interior(i) {
                    push_block(&mut coo, i * m, col(i), &blocks[i]);
                }
            }
        }
    }
    CscMatrix::from(&coo)
}

/// Block-diagonal operator on interior nodes.
fn assemble_nodes(n: usize, m: usize, blocks: &[DMatrix<f64>]) -> CscMatrix<f64> {
    let mut coo = CooMatrix::new((n - 2) * m, (n - 2) * m);
    for i in 1..n - 1 {
        push_block(&mut coo, (i - 1) * m, (i - 1) * m, &blocks[i]);
    }
    CscMatrix::from(&coo)
}

/// Matrix in hermitian coordinates of a real-linear map of hermitian trace-free matrices.
fn herm_map_matrix(f: impl Fn(&Mat2) -> Mat2) -> Matrix3<f64> {
    let mut out = Matrix3::zeros();
    for (col, e) in herm_basis().iter().enumerate() {
        let image = f(e).herm_coords();
        for row in 0..3 {
            out[(row, col)] = image[row];
        }
    }
    out
}

/// `gamma -> [a, gamma]` for anti-hermitian `a`; antisymmetric in the hermitian basis.
pub fn ad_matrix(a: &Mat2) -> Matrix3<f64> {
    herm_map_matrix(|e| bracket(a, e))
}

fn block_diag(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(n, n);
    let mut off = 0;
    for b in blocks {
        out.view_mut((off, off), (b.nrows(), b.ncols())).copy_from(b);
        off += b.nrows();
    }
    out
}

fn dyn3(m: &Matrix3<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(3, 3, |r, c| m[(r, c)])
}

/// `kron(d, e)` for a dense angular matrix `d` and a local block `e`.
fn kron(d: &[Vec<f64>], e: &DMatrix<f64>) -> DMatrix<f64> {
    let n = d.len();
    let (r, c) = (e.nrows(), e.ncols());
    let mut out = DMatrix::zeros(n * r, n * c);
    for a in 0..n {
        for b in 0..n {
            if d[a][b] != 0.0 {
                out.view_mut((a * r, b * c), (r, c)).copy_from(&(e * d[a][b]));
            }
        }
    }
    out
}

/// Background values at node `i` for each angular sample that enters the assembly.
fn node_samples(pair: &HiggsPair, angular: Angular, i: usize) -> Vec<(Mat2, Mat2, Mat2)> {
    let n_theta = pair.phi.n_theta;
    let ks: Vec<usize> = match angular {
        Angular::Physical => (0..n_theta).collect(),
        Angular::Mode(_) => vec![0],
    };
    ks.into_iter().map(|k| (pair.a_tau.at(i, k), pair.a_theta.at(i, k), pair.phi.at(i, k))).collect()
}

fn check_layout(pair: &HiggsPair, grid: &NeckGrid, angular: Angular) -> Result<()> {
    if pair.phi.n_tau != grid.n_tau() || pair.phi.n_theta != grid.n_theta {
        return Err(Error::Config("pair and grid have different sizes".into()));
    }
    if let Angular::Mode(j) = angular {
        if !pair.is_theta_independent(THETA_INDEPENDENCE_TOL) {
            return Err(Error::Structure("mode blocks need a vartheta-independent background".into()));
        }
        if j.unsigned_abs() as usize > grid.n_modes() {
            return Err(Error::Config(format!("mode {j} exceeds the angular resolution {}", grid.n_modes())));
        }
    }
    Ok(())
}

struct LBlocks {
    k_tau: DMatrix<f64>,
    g_theta: DMatrix<f64>,
    mass: DMatrix<f64>,
}

fn l_blocks(pair: &HiggsPair, angular: Angular, theta_derivative: &[Vec<f64>], i: usize) -> LBlocks {
    let samples = node_samples(pair, angular, i);
    let ad_tau: Vec<DMatrix<f64>> = samples.iter().map(|s| dyn3(&ad_matrix(&s.0))).collect();
    let ad_theta: Vec<DMatrix<f64>> = samples.iter().map(|s| dyn3(&ad_matrix(&s.1))).collect();
    let mass: Vec<DMatrix<f64>> = samples.iter().map(|s| dyn3(&m_phi_matrix(&s.2))).collect();
    match angular {
        Angular::Physical => LBlocks {
            k_tau: block_diag(&ad_tau),
            g_theta: kron(theta_derivative, &DMatrix::identity(3, 3)) + block_diag(&ad_theta),
            mass: block_diag(&mass),
        },
        Angular::Mode(0) => LBlocks { k_tau: ad_tau[0].clone(), g_theta: ad_theta[0].clone(), mass: mass[0].clone() },
        Angular::Mode(j) => {
            // gamma = x cos(j th) + y sin(j th), so d/dth maps (x, y) to (j y, -j x).
            let j = j.unsigned_abs() as f64;
            let twice = |b: &DMatrix<f64>| block_diag(&[b.clone(), b.clone()]);
            let mut g_theta = twice(&ad_theta[0]);
            for c in 0..3 {
                g_theta[(c, 3 + c)] += j;
                g_theta[(3 + c, c)] -= j;
            }
            LBlocks { k_tau: twice(&ad_tau[0]), g_theta, mass: twice(&mass[0]) }
        }
    }
}

fn l_node_dim(angular: Angular, n_theta: usize) -> usize {
    match angular {
        Angular::Physical => 3 * n_theta,
        Angular::Mode(0) => 3,
        Angular::Mode(_) => 6,
    }
}

/// Options for [`assemble_l_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AssemblyOptions {
    pub angular: Angular,
    pub stencil: Stencil,
    pub include_mass: bool,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self { angular: Angular::Physical, stencil: Stencil::Compact, include_mass: true }
    }
}

/// The two first-order pieces `G_tau`, `G_theta` and the mass term.
pub struct LFactors {
    pub g_tau: CscMatrix<f64>,
    pub g_theta: CscMatrix<f64>,
    pub mass: CscMatrix<f64>,
}

pub fn l_factors(pair: &HiggsPair, grid: &NeckGrid, opts: &AssemblyOptions) -> Result<LFactors> {
    check_layout(pair, grid, opts.angular)?;
    let n = grid.n_tau();
    let m = l_node_dim(opts.angular, grid.n_theta);
    let d = grid.fourier().derivative_matrix();
    let blocks: Vec<LBlocks> = (0..n).map(|i| l_blocks(pair, opts.angular, &d, i)).collect();
    let k_tau: Vec<DMatrix<f64>> = blocks.iter().map(|b| b.k_tau.clone()).collect();
    let g_theta: Vec<DMatrix<f64>> = blocks.iter().map(|b| b.g_theta.clone()).collect();
    let mass: Vec<DMatrix<f64>> = blocks.iter().map(|b| &b.mass * 2.0).collect();
    Ok(LFactors {
        g_tau: assemble_tau(n, m, grid.spacing(), 1.0, opts.stencil, &k_tau),
        g_theta: assemble_nodes(n, m, &g_theta),
        mass: assemble_nodes(n, m, &mass),
    })
}

pub fn assemble_l_with(pair: &HiggsPair, grid: &NeckGrid, opts: &AssemblyOptions) -> Result<LinearOperatorHandle> {
    let f = l_factors(pair, grid, opts)?;
    let mut matrix = &(&f.g_tau.transpose() * &f.g_tau) + &(&f.g_theta.transpose() * &f.g_theta);
    if opts.include_mass {
        matrix = &matrix + &f.mass;
    }
    let kind = match (opts.include_mass, opts.angular) {
        (false, _) => OperatorKind::DeltaA,
        (true, Angular::Physical) => OperatorKind::LFull,
        (true, Angular::Mode(j)) => OperatorKind::ModeBlock(j),
    };
    Ok(LinearOperatorHandle {
        kind,
        angular: opts.angular,
        stencil: opts.stencil,
        n_tau: grid.n_tau(),
        n_theta: grid.n_theta,
        spacing: grid.spacing(),
        node_dim: l_node_dim(opts.angular, grid.n_theta),
        matrix,
    })
}

/// `L = Delta_A - i * M_Phi` on all angular samples with the compact stencil.
pub fn assemble_l(pair: &HiggsPair, grid: &NeckGrid) -> Result<LinearOperatorHandle> {
    assemble_l_with(pair, grid, &AssemblyOptions::default())
}

/// `L` from `Field2D` components in the z-disk conventions.
pub fn assemble_l_fields(fields: &[Field2D; 3], cfg: &PlumbingConfig) -> Result<LinearOperatorHandle> {
    let grid = cfg.grid();
    check_field_size(fields, &grid)?;
    assemble_l(&HiggsPair::from_fields(fields)?, &grid)
}

pub fn assemble_delta_a(pair: &HiggsPair, grid: &NeckGrid) -> Result<LinearOperatorHandle> {
    assemble_l_with(pair, grid, &AssemblyOptions { include_mass: false, ..Default::default() })
}

fn check_field_size(fields: &[Field2D; 3], grid: &NeckGrid) -> Result<()> {
    for f in fields {
        if f.n_tau != grid.n_tau() || f.n_modes_total() != grid.n_theta {
            return Err(Error::Config(format!(
                "field of size {} x {} does not match the grid {} x {}",
                f.n_tau,
                f.n_modes_total(),
                grid.n_tau(),
                grid.n_theta
            )));
        }
    }
    Ok(())
}

/// Coordinates of a hermitian section at interior nodes, in the physical layout.
pub fn section_to_coords(gamma: &NeckField) -> DVector<f64> {
    let (n, nt) = (gamma.n_tau, gamma.n_theta);
    let mut x = DVector::zeros((n - 2) * nt * 3);
    for i in 1..n - 1 {
        for k in 0..nt {
            let c = gamma.at(i, k).herm_coords();
            for (e, v) in c.iter().enumerate() {
                x[((i - 1) * nt + k) * 3 + e] = *v;
            }
        }
    }
    x
}

/// Inverse of [`section_to_coords`]; the end nodes are zero.
pub fn coords_to_section(x: &DVector<f64>, n_tau: usize, n_theta: usize) -> NeckField {
    let mut out = NeckField::zeros(n_tau, n_theta);
    for i in 1..n_tau - 1 {
        for k in 0..n_theta {
            let off = ((i - 1) * n_theta + k) * 3;
            *out.at_mut(i, k) = Mat2::from_herm_coords([x[off], x[off + 1], x[off + 2]]);
        }
    }
    out
}

/// Both sides of the energy identity for one section.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EnergyCheck {
    /// `<L gamma, gamma>` from the assembled matrix.
    pub quadratic_form: f64,
    /// `|d_A gamma|^2 + 2 |[Phi ^ gamma]|^2` by direct quadrature.
    pub energy: f64,
    pub relative_gap: f64,
}

/// Energy identity for a physical-layout `L` assembled on `pair`. The section is evaluated
/// with Dirichlet ends.
pub fn energy_identity(op: &LinearOperatorHandle, pair: &HiggsPair, grid: &NeckGrid, gamma: &NeckField) -> Result<EnergyCheck> {
    if op.angular != Angular::Physical || !matches!(op.kind, OperatorKind::LFull | OperatorKind::DeltaA) {
        return Err(Error::Config("energy identity needs a physical-layout L".into()));
    }
    let x = section_to_coords(gamma);
    let gamma = coords_to_section(&x, grid.n_tau(), grid.n_theta);
    let cell = grid.spacing() * 2.0 * PI / grid.n_theta as f64;
    // The coordinate inner product is half the Frobenius one.
    let quadratic_form = 2.0 * cell * x.dot(&op.apply(&x));

    let n = grid.n_tau();
    let h = grid.spacing();
    let with_mass = op.kind == OperatorKind::LFull;
    let d_theta = gamma.d_theta(grid.fourier());
    let mut energy = 0.0;
    match op.stencil {
        Stencil::Compact => {
            for p in 0..n - 1 {
                for k in 0..grid.n_theta {
                    let (g0, g1) = (gamma.at(p, k), gamma.at(p + 1, k));
                    let cov = (g1 - g0).scale_re(1.0 / h)
                        + (bracket(&pair.a_tau.at(p, k), &g0) + bracket(&pair.a_tau.at(p + 1, k), &g1)).scale_re(0.5);
                    energy += cell * cov.norm_sqr();
                }
            }
        }
        Stencil::Centered => {
            let d_tau = gamma.d_tau_zero_padded(h);
            for i in 0..n {
                for k in 0..grid.n_theta {
                    let cov = d_tau.at(i, k) + bracket(&pair.a_tau.at(i, k), &gamma.at(i, k));
                    energy += cell * cov.norm_sqr();
                }
            }
        }
    }
    for i in 1..n - 1 {
        for k in 0..grid.n_theta {
            let g = gamma.at(i, k);
            let cov = d_theta.at(i, k) + bracket(&pair.a_theta.at(i, k), &g);
            energy += cell * cov.norm_sqr();
            if with_mass {
                // |[Phi ^ gamma]|^2 = |dzeta|^2 |[phi, gamma]|^2 with |dzeta|^2 = 2.
                energy += cell * 2.0 * 2.0 * bracket(&pair.phi.at(i, k), &g).norm_sqr();
            }
        }
    }
    let relative_gap = (quadratic_form - energy).abs() / energy.abs().max(f64::MIN_POSITIVE);
    Ok(EnergyCheck { quadratic_form, energy, relative_gap })
}

/// Smallest eigenpairs of a symmetric positive definite matrix.
#[derive(Clone, Debug)]
pub struct EigenResult {
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns.
    pub vectors: DMatrix<f64>,
    pub iterations: usize,
}

pub fn factor(matrix: &CscMatrix<f64>) -> Result<CscCholesky<f64>> {
    CscCholesky::factor(matrix).map_err(|e| Error::SingularOperator(format!("Cholesky factorization failed: {e:?}")))
}

fn sorted_eigen(h: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Smallest `count` eigenpairs by block inverse iteration with a sparse Cholesky factor
/// (shift 0) and Rayleigh-Ritz, stopping when every tracked `|d lambda| / lambda <= tol`.
pub fn smallest_eigenpairs(matrix: &CscMatrix<f64>, count: usize, tol: f64, rng: &mut impl Rng) -> Result<EigenResult> {
    let n = matrix.nrows();
    if n == 0 || count == 0 {
        return Err(Error::Config("eigenproblem needs a nonempty matrix and count".into()));
    }
    let count = count.min(n);
    if n <= DENSE_LIMIT {
        let (values, vectors) = sorted_eigen(dense_of(matrix));
        let vectors = vectors.columns(0, count).into_owned();
        return Ok(EigenResult { values: values[..count].to_vec(), vectors, iterations: 0 });
    }
    let chol = factor(matrix)?;
    let p = (count + 4).min(n);
    let mut x = DMatrix::from_fn(n, p, |_, _| rng.gen::<f64>() - 0.5);
    let mut previous: Option<Vec<f64>> = None;
    for iteration in 1..=MAX_EIGEN_ITERATIONS {
        let y = chol.solve(&x);
        let q = y.qr().q();
        let lq: DMatrix<f64> = matrix * &q;
        let h = q.transpose() * &lq;
        let (values, v) = sorted_eigen((&h + h.transpose()) * 0.5);
        x = &q * v;
        if let Some(prev) = &previous {
            let converged = (0..count).all(|i| (values[i] - prev[i]).abs() <= tol * values[i].abs());
            if converged {
                return Ok(EigenResult {
                    values: values[..count].to_vec(),
                    vectors: x.columns(0, count).into_owned(),
                    iterations: iteration,
                });
            }
        }
        previous = Some(values);
    }
    Err(Error::NonConvergence(MAX_EIGEN_ITERATIONS))
}

/// Smallest eigenvalue of the operator's symmetric matrix (`D^T D` for Dirac), seeded from
/// the spectrum stream of seed 0.
pub fn smallest_eigenvalue(op: &LinearOperatorHandle, tol: f64) -> Result<f64> {
    let mut rng = substream(0, Stream::Spectrum, 0);
    Ok(smallest_eigenpairs(&op.normal_matrix(), 1, tol, &mut rng)?.values[0])
}

/// Smallest Rayleigh quotient over random vectors, a semidefiniteness probe.
pub fn min_rayleigh_quotient(op: &LinearOperatorHandle, samples: usize, rng: &mut impl Rng) -> f64 {
    let m = op.normal_matrix();
    let n = m.ncols();
    (0..samples)
        .map(|_| {
            let x = DVector::from_fn(n, |_, _| rng.gen::<f64>() - 0.5);
            x.dot(&(&m * &x)) / x.norm_squared()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Real coordinates of a trace-free complex matrix in the orthonormal basis
/// `sigma_c / sqrt 2`, `i sigma_c / sqrt 2`, interleaved per `c`.
fn sl2_coords(m: &Mat2) -> [f64; 6] {
    let mut out = [0.0; 6];
    for (c, s) in herm_basis().iter().enumerate() {
        let z = (*s * *m).trace() * std::f64::consts::FRAC_1_SQRT_2;
        out[2 * c] = z.re;
        out[2 * c + 1] = z.im;
    }
    out
}

fn sl2_basis(idx: usize) -> Mat2 {
    let s = herm_basis()[idx / 2].scale_re(std::f64::consts::FRAC_1_SQRT_2);
    if idx.is_multiple_of(2) {
        s
    } else {
        s.scale(I)
    }
}

/// Real 12x12 matrix of a real-linear map on pairs `(psi_1, psi_2)`.
fn pair_map_matrix(f: impl Fn(&Mat2, &Mat2) -> (Mat2, Mat2)) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(12, 12);
    for col in 0..12 {
        let (p1, p2) = if col < 6 { (sl2_basis(col), Mat2::zero()) } else { (Mat2::zero(), sl2_basis(col - 6)) };
        let (q1, q2) = f(&p1, &p2);
        for (r, v) in sl2_coords(&q1).iter().chain(sl2_coords(&q2).iter()).enumerate() {
            out[(r, col)] = *v;
        }
    }
    out
}

/// Zeroth-order part of `L_1 + L_2^*` at a point, with `d/dvartheta` replaced by `i omega`.
fn dirac_local(a_tau: &Mat2, a_theta: &Mat2, phi: &Mat2, omega: f64) -> DMatrix<f64> {
    let a = (*a_tau + a_theta.scale(I)).scale_re(0.5);
    let minus_a_adj = -a.adjoint();
    let phi_adj = phi.adjoint();
    pair_map_matrix(|p1, p2| {
        (
            p1.scale_re(-0.5 * omega) + bracket(&a, p1) + bracket(&phi_adj, p2),
            p2.scale_re(0.5 * omega) + bracket(&minus_a_adj, p2) + bracket(phi, p1),
        )
    })
}

/// `(psi_1, psi_2) -> (i psi_1 / 2, -i psi_2 / 2)`, the coefficient of `d/dvartheta`.
fn dirac_theta_coefficient() -> DMatrix<f64> {
    pair_map_matrix(|p1, p2| (p1.scale(I * 0.5), p2.scale(-I * 0.5)))
}

/// The Dirac-type operator `(psi_1, psi_2) -> (dbar_A psi_1 + [Phi^* ^ psi_2], d_A psi_2 + [Phi ^ psi_1])`
/// in neck coordinates, with `sl(2, C)`-valued `psi` and Dirichlet ends. Box scheme: forward
/// differences onto midpoints, zeroth-order and angular terms averaged.
pub fn assemble_dirac(pair: &HiggsPair, grid: &NeckGrid, angular: Angular) -> Result<LinearOperatorHandle> {
    check_layout(pair, grid, angular)?;
    let n = grid.n_tau();
    let d = grid.fourier().derivative_matrix();
    let theta_coeff = dirac_theta_coefficient();
    let blocks: Vec<DMatrix<f64>> = (0..n)
        .map(|i| {
            let samples = node_samples(pair, angular, i);
            match angular {
                Angular::Physical => {
                    let local: Vec<DMatrix<f64>> = samples.iter().map(|s| dirac_local(&s.0, &s.1, &s.2, 0.0)).collect();
                    block_diag(&local) + kron(&d, &theta_coeff)
                }
                Angular::Mode(j) => dirac_local(&samples[0].0, &samples[0].1, &samples[0].2, j as f64),
            }
        })
        .collect();
    let node_dim = blocks[0].nrows();
    let matrix = assemble_tau(n, node_dim, grid.spacing(), 0.5, Stencil::Compact, &blocks);
    Ok(LinearOperatorHandle {
        kind: OperatorKind::DiracL1L2,
        angular,
        stencil: Stencil::Compact,
        n_tau: n,
        n_theta: grid.n_theta,
        spacing: grid.spacing(),
        node_dim,
        matrix,
    })
}

/// Smallest singular value of a Dirac handle.
pub fn sigma_min(op: &LinearOperatorHandle, tol: f64) -> Result<f64> {
    if op.kind != OperatorKind::DiracL1L2 {
        return Err(Error::Config("sigma_min needs a Dirac operator".into()));
    }
    Ok(smallest_eigenvalue(op, tol)?.max(0.0).sqrt())
}

/// Kernel dimensions of the per-mode system on the two invariant sectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeKernel {
    pub diagonal: usize,
    pub off_diagonal: usize,
}

impl ModeKernel {
    pub fn total(&self) -> usize {
        self.diagonal + self.off_diagonal
    }
}

/// The constant-coefficient system for `(psi_1, psi_2) e^{i j vartheta}` against the model,
/// `-(j/2) psi_1 + [beta, psi_1] - [phi^*, psi_2] = 0`, `(j/2) psi_2 - [beta, psi_2] - [phi, psi_1] = 0`,
/// with `beta = diag(alpha, -alpha)` and `phi = diag(C, -C)`. Complex dimensions per sector.
pub fn dirac_mode_kernel_sectors(j: i64, params: &ModelParams) -> ModeKernel {
    let beta = Mat2::diag_traceless(C64::from(params.alpha));
    let phi = Mat2::diag_traceless(params.c);
    let phi_adj = phi.adjoint();
    let half_j = 0.5 * j as f64;
    let apply = |p1: &Mat2, p2: &Mat2| {
        (
            p1.scale_re(-half_j) + bracket(&beta, p1) - bracket(&phi_adj, p2),
            p2.scale_re(half_j) - bracket(&beta, p2) - bracket(&phi, p1),
        )
    };
    // Complex basis per psi: sigma3 (diagonal), E12, E21 (off-diagonal).
    let one = C64::from(1.0);
    let zero = C64::default();
    let basis = [
        Mat2::diag_traceless(one),
        Mat2::new(zero, one, zero, zero),
        Mat2::new(zero, zero, one, zero),
    ];
    let coords = |m: &Mat2| [0.5 * (m.a - m.d), m.b, m.c];
    let mut full = DMatrix::<Complex64>::zeros(6, 6);
    for col in 0..6 {
        let (p1, p2) = if col < 3 { (basis[col], Mat2::zero()) } else { (Mat2::zero(), basis[col - 3]) };
        let (q1, q2) = apply(&p1, &p2);
        for (r, z) in coords(&q1).iter().chain(coords(&q2).iter()).enumerate() {
            full[(r, col)] = *z;
        }
    }
    let kernel = |idx: &[usize]| {
        let sub = DMatrix::from_fn(idx.len(), idx.len(), |r, c| full[(idx[r], idx[c])]);
        let sv = sub.singular_values();
        // Relative to the operator scale so the zero block counts as kernel.
        let scale = 1.0 + half_j.abs() + params.alpha.abs() + params.c.norm();
        sv.iter().filter(|&&s| s <= crate::algebra::KERNEL_THRESHOLD * scale).count()
    };
    ModeKernel { diagonal: kernel(&[0, 3]), off_diagonal: kernel(&[1, 2, 4, 5]) }
}

/// Total complex kernel dimension of the mode-`j` system.
pub fn dirac_mode_kernel(j: i64, params: &ModelParams) -> usize {
    dirac_mode_kernel_sectors(j, params).total()
}

/// Numerical kernel dimension of a dense real matrix, for diagnostics.
pub fn dense_kernel_dim(m: &DMatrix<f64>) -> usize {
    numerical_kernel_dim(m.singular_values().as_slice())
}

/// Centered discrete Hitchin residuals: second-order `tau` differences (one-sided at the
/// ends) and spectral `vartheta` derivatives.
pub fn centered_residuals(pair: &HiggsPair, grid: &NeckGrid) -> (NeckField, NeckField) {
    let h = grid.spacing();
    let plan = grid.fourier();
    let d_tau_theta = pair.a_theta.d_tau(h);
    let d_theta_tau = pair.a_tau.d_theta(plan);
    let d_tau_phi = pair.phi.d_tau(h);
    let d_theta_phi = pair.phi.d_theta(plan);
    let mut first = NeckField::zeros(grid.n_tau(), grid.n_theta);
    let mut second = NeckField::zeros(grid.n_tau(), grid.n_theta);
    for idx in 0..pair.len() {
        let v = pair.value(idx);
        let curvature = d_tau_theta.values[idx] - d_theta_tau.values[idx] + bracket(&v.a_tau, &v.a_theta);
        first.values[idx] = curvature.scale(-I) - bracket(&v.phi, &v.phi.adjoint()).scale_re(2.0);
        second.values[idx] =
            (d_tau_phi.values[idx] + d_theta_phi.values[idx].scale(I)).scale_re(0.5) + bracket(&v.a01(), &v.phi);
    }
    (first, second)
}

/// Residual fields with their norms.
#[derive(Clone, Debug)]
pub struct HitchinResidual {
    pub first: Field2D,
    pub second: Field2D,
    pub first_sup: f64,
    pub first_l2: f64,
    pub second_sup: f64,
    pub second_l2: f64,
}

/// Both Hitchin residuals of a pair given by its `Field2D` components.
pub fn hitchin_residual(fields: &[Field2D; 3], grid: &NeckGrid) -> Result<HitchinResidual> {
    check_field_size(fields, grid)?;
    let pair = HiggsPair::from_fields(fields)?;
    let (first, second) = centered_residuals(&pair, grid);
    Ok(HitchinResidual {
        first_sup: first.sup_norm(),
        first_l2: first.l2_norm(grid),
        second_sup: second.sup_norm(),
        second_l2: second.l2_norm(grid),
        first: Field2D::from_physical(&first, ComponentTag::ScalarSection),
        second: Field2D::from_physical(&second, ComponentTag::ScalarSection),
    })
}

/// Smallest `count` eigenvalues of `L` on a `vartheta`-independent background, merged over
/// the mode blocks `j = 0..=N`. Each entry is `(mode, eigenvalue)`.
pub fn mode_spectrum(pair: &HiggsPair, grid: &NeckGrid, count: usize, tol: f64, rng: &mut impl Rng) -> Result<Vec<(i64, f64)>> {
    let mut all = Vec::new();
    for j in 0..=grid.n_modes() as i64 {
        let op = assemble_l_with(pair, grid, &AssemblyOptions { angular: Angular::Mode(j), ..Default::default() })?;
        for v in smallest_eigenpairs(&op.matrix, count, tol, rng)?.values {
            all.push((j, v));
        }
    }
    all.sort_by(|a, b| a.1.total_cmp(&b.1));
    all.truncate(count);
    Ok(all)
}

/// Smallest singular value of the Dirac operator over the complex mode blocks `|j| <= N`.
pub fn mode_sigma_min(pair: &HiggsPair, grid: &NeckGrid, tol: f64, rng: &mut impl Rng) -> Result<f64> {
    let n = grid.n_modes() as i64;
    let mut best = f64::INFINITY;
    for j in -n..=n {
        let op = assemble_dirac(pair, grid, Angular::Mode(j))?;
        let lambda = smallest_eigenpairs(&op.normal_matrix(), 1, tol, rng)?.values[0];
        best = best.min(lambda.max(0.0).sqrt());
    }
    Ok(best)
}

/// Background used in a spectral sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Background {
    /// Glued model with the plus-side parameters given.
    Model(ModelParams),
    /// `A = 0`, `Phi = 0`.
    Flat,
    /// Cutoff-glued approximate pair of a radial fixture.
    Approximate(RadialFixture),
}

impl Background {
    pub fn pair(&self, cfg: &PlumbingConfig, grid: &NeckGrid) -> Result<HiggsPair> {
        match self {
            Background::Model(p) => Ok(glue_models(p, &p.matching_partner(), grid)?.pair),
            Background::Flat => Ok(HiggsPair::from_fn(grid, |_, _| Default::default())),
            Background::Approximate(f) => {
                let cutoff = CutoffProfile::new(cfg.cutoff_radius)?;
                f.approximate_pair(cfg, &cutoff, grid)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumConfig {
    pub n_tau: usize,
    pub n_theta_modes: usize,
    pub cap_length: f64,
    /// Eigenvalues reported per `R`.
    pub eigen_count: usize,
    pub tol: f64,
    pub with_dirac: bool,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            n_tau: 257,
            n_theta_modes: 4,
            cap_length: crate::geometry::DEFAULT_CAP_LENGTH,
            eigen_count: 4,
            tol: EIGEN_TOL,
            with_dirac: true,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectrumPoint {
    pub r: f64,
    /// `T = -log R`.
    pub t: f64,
    /// `T + L`.
    pub half_extent: f64,
    pub lambda1: f64,
    pub lambda1_t2: f64,
    /// Inverse-norm estimate `M_R = 1 / lambda_1`.
    pub inverse_norm: f64,
    /// Dirichlet reference `(pi / (2 (T + L)))^2`.
    pub dirichlet_reference: f64,
    pub smallest: Vec<f64>,
    pub small_eigenvalue_free: bool,
    pub sigma_min: Option<f64>,
    pub sigma_min_t: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub points: Vec<SpectrumPoint>,
    /// `max/min` of `lambda_1 T^2` over the sweep.
    pub product_spread: f64,
    pub sigma_spread: Option<f64>,
    pub flat: bool,
    pub small_eigenvalue_free: bool,
    /// Whether the sweep has at least four radii spanning two decades, as the scaling law needs.
    pub spans_two_decades: bool,
}

fn spread(values: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = values.fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    hi / lo
}

/// One sweep point.
pub fn spectrum_point(r: f64, background: &Background, sc: &SpectrumConfig, rng: &mut impl Rng) -> Result<SpectrumPoint> {
    let cfg = PlumbingConfig::new(r, sc.n_tau, sc.n_theta_modes)?.with_cap_length(sc.cap_length)?;
    let grid = cfg.grid();
    let pair = background.pair(&cfg, &grid)?;
    let smallest: Vec<f64> = if pair.is_theta_independent(THETA_INDEPENDENCE_TOL) {
        mode_spectrum(&pair, &grid, sc.eigen_count, sc.tol, rng)?.into_iter().map(|(_, v)| v).collect()
    } else {
        smallest_eigenpairs(&assemble_l(&pair, &grid)?.matrix, sc.eigen_count, sc.tol, rng)?.values
    };
    let lambda1 = smallest[0];
    let t = cfg.neck_length();
    let x = cfg.half_extent();
    let dirichlet_reference = (PI / (2.0 * x)).powi(2);
    let sigma = if sc.with_dirac {
        Some(if pair.is_theta_independent(THETA_INDEPENDENCE_TOL) {
            mode_sigma_min(&pair, &grid, sc.tol, rng)?
        } else {
            let op = assemble_dirac(&pair, &grid, Angular::Physical)?;
            smallest_eigenpairs(&op.normal_matrix(), 1, sc.tol, rng)?.values[0].max(0.0).sqrt()
        })
    } else {
        None
    };
    Ok(SpectrumPoint {
        r,
        t,
        half_extent: x,
        lambda1,
        lambda1_t2: lambda1 * t * t,
        inverse_norm: 1.0 / lambda1,
        dirichlet_reference,
        small_eigenvalue_free: lambda1 >= SMALL_EIGENVALUE_FACTOR * dirichlet_reference,
        smallest,
        sigma_min: sigma,
        sigma_min_t: sigma.map(|s| s * t),
    })
}

/// Sweep over `radii`, which must have at least four values spanning two decades. Points
/// run concurrently, each on its own substream of `seed`; results are ordered as given.
pub fn scaling_study(radii: &[f64], background: &Background, sc: &SpectrumConfig, seed: u64) -> Result<SpectrumReport> {
    let lo = radii.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = radii.iter().cloned().fold(0.0, f64::max);
    if radii.len() < 2 {
        return Err(Error::InsufficientSweep { needed: 2, got: radii.len() });
    }
    if let Some(bad) = radii.iter().find(|r| !(**r > 0.0 && **r < 1.0)) {
        return Err(Error::Config(format!("sweep radius {bad} must lie in (0, 1)")));
    }
    let points: Vec<SpectrumPoint> = radii
        .par_iter()
        .enumerate()
        .map(|(idx, &r)| spectrum_point(r, background, sc, &mut substream(seed, Stream::Spectrum, idx as u64)))
        .collect::<Result<_>>()?;
    let product_spread = spread(points.iter().map(|p| p.lambda1_t2));
    let sigma_spread = sc.with_dirac.then(|| spread(points.iter().filter_map(|p| p.sigma_min_t)));
    Ok(SpectrumReport {
        flat: product_spread <= FLATNESS_BOUND,
        small_eigenvalue_free: points.iter().all(|p| p.small_eigenvalue_free),
        spans_two_decades: radii.len() >= 4 && hi / lo >= 100.0 * (1.0 - 1e-9),
        product_spread,
        sigma_spread,
        points,
    })
}

/// Pointwise `M_phi` on a field, for diagnostics and tests.
pub fn m_phi_field(phi: &NeckField, gamma: &NeckField) -> NeckField {
    phi.zip_map(gamma, m_phi)
}

/// Spectral derivative matrix of `n` angular samples.
pub fn angular_derivative(n: usize) -> Vec<Vec<f64>> {
    FourierPlan::new(n).derivative_matrix()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Side;
    use crate::rng::stream_rng;

    fn model() -> ModelParams {
        ModelParams::new(0.25, C64::new(0.3, -0.4), Side::Plus).unwrap()
    }

    fn random_section(grid: &NeckGrid, rng: &mut impl Rng) -> NeckField {
        NeckField::from_fn(grid, |_, _| Mat2::from_herm_coords([0, 1, 2].map(|_| rng.gen::<f64>() - 0.5)))
    }

    #[test]
    fn identity_and_dirichlet_laplacian() {
        let id = LinearOperatorHandle::identity(300);
        assert!((smallest_eigenvalue(&id, 1e-12).unwrap() - 1.0).abs() < 1e-14);
        let lap = LinearOperatorHandle::dirichlet_laplacian_1d(PI, 512).unwrap();
        assert!((smallest_eigenvalue(&lap, 1e-10).unwrap() - 1.0).abs() < 1e-4);
    }

    #[test]
    fn first_eigenvalue_scales_like_inverse_square_neck_length() {
        let lambda = |t: f64| {
            let cfg = PlumbingConfig::new((-t).exp(), 201, 4).unwrap().with_cap_length(0.0).unwrap();
            let grid = cfg.grid();
            let pair = Background::Model(model()).pair(&cfg, &grid).unwrap();
            smallest_eigenvalue(&assemble_l(&pair, &grid).unwrap(), 1e-9).unwrap()
        };
        let ratio = lambda(5.0) / lambda(10.0);
        assert!((ratio / 4.0 - 1.0).abs() < 0.15, "{ratio}");
    }

    #[test]
    fn flat_background_gives_dirichlet_value() {
        let cfg = PlumbingConfig::new(0.05, 256, 4).unwrap();
        let grid = cfg.grid();
        let pair = Background::Flat.pair(&cfg, &grid).unwrap();
        let op = assemble_l(&pair, &grid).unwrap();
        let lambda = smallest_eigenvalue(&op, 1e-9).unwrap();
        let oracle = (PI / (2.0 * cfg.half_extent())).powi(2);
        assert!((lambda / oracle - 1.0).abs() < 0.02, "{lambda} vs {oracle}");
    }

    #[test]
    fn l_is_symmetric_and_satisfies_energy_identity() {
        let cfg = PlumbingConfig::new(0.2, 40, 4).unwrap();
        let grid = cfg.grid();
        let fixture = RadialFixture::new(model(), 0.02).unwrap();
        let pair = Background::Approximate(fixture).pair(&cfg, &grid).unwrap();
        let mut rng = stream_rng(1, Stream::Spectrum);
        for stencil in [Stencil::Compact, Stencil::Centered] {
            let op = assemble_l_with(&pair, &grid, &AssemblyOptions { stencil, ..Default::default() }).unwrap();
            assert!(op.symmetry_defect() < SYMMETRY_TOL);
            for _ in 0..5 {
                let gamma = random_section(&grid, &mut rng);
                let check = energy_identity(&op, &pair, &grid, &gamma).unwrap();
                assert!(check.relative_gap < ENERGY_TOL, "{check:?}");
            }
        }
    }

    #[test]
    fn diagonal_section_has_no_mass_term() {
        let cfg = PlumbingConfig::new(0.2, 40, 4).unwrap();
        let grid = cfg.grid();
        let pair = Background::Model(model()).pair(&cfg, &grid).unwrap();
        let full = assemble_l(&pair, &grid).unwrap();
        let lap = assemble_delta_a(&pair, &grid).unwrap();
        let gamma = NeckField::from_fn(&grid, |tau, th| Mat2::diag_traceless(C64::from(tau.sin() + th.cos())));
        let x = section_to_coords(&gamma);
        let a = x.dot(&full.apply(&x));
        let b = x.dot(&lap.apply(&x));
        assert!((a - b).abs() <= 1e-12 * a.abs());
    }

    #[test]
    fn mode_blocks_reproduce_physical_spectrum() {
        let cfg = PlumbingConfig::new(0.2, 60, 4).unwrap();
        let grid = cfg.grid();
        let pair = Background::Model(model()).pair(&cfg, &grid).unwrap();
        let mut rng = stream_rng(2, Stream::Spectrum);
        let physical = smallest_eigenpairs(&assemble_l(&pair, &grid).unwrap().matrix, 6, 1e-10, &mut rng).unwrap();
        let modes = mode_spectrum(&pair, &grid, 6, 1e-10, &mut rng).unwrap();
        for (p, (_, m)) in physical.values.iter().zip(&modes) {
            assert!((p - m).abs() < 1e-8 * p.abs(), "{p} vs {m}");
        }
    }

    #[test]
    fn dirac_kernel_law() {
        let p = ModelParams::new(0.3, C64::new(1.0, 0.0), Side::Plus).unwrap();
        assert_eq!(dirac_mode_kernel_sectors(0, &p), ModeKernel { diagonal: 2, off_diagonal: 0 });
        assert_eq!(dirac_mode_kernel(1, &p), 0);
        let resonant = ModelParams::new(0.25, C64::new(1.0, 0.0), Side::Plus).unwrap();
        assert_eq!(dirac_mode_kernel(1, &resonant), 0);
    }

    #[test]
    fn dirac_annihilates_constant_diagonal_up_to_tau_term() {
        let cfg = PlumbingConfig::new(0.2, 30, 4).unwrap();
        let grid = cfg.grid();
        let pair = Background::Model(model()).pair(&cfg, &grid).unwrap();
        let op = assemble_dirac(&pair, &grid, Angular::Mode(0)).unwrap();
        // psi_1 = psi_2 = sigma3 / sqrt 2 at interior nodes: only the boundary midpoints see it.
        let mut x = DVector::zeros(op.dim());
        for i in 0..grid.n_tau() - 2 {
            x[i * 12] = 1.0;
            x[i * 12 + 6] = 1.0;
        }
        let y = op.apply(&x);
        let m = op.node_dim;
        for p in 1..grid.n_tau() - 2 {
            assert!(y.rows(p * m, m).amax() < 1e-12);
        }
        assert!(y.rows(0, m).amax() > 0.1);
    }
}
