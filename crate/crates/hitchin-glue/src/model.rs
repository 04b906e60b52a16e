//! Singular model solutions, their gluing across the neck, and the Wolf family.

use serde::{Deserialize, Serialize};

use crate::algebra::{Mat2, MatSL2, C64, I};
use crate::error::{Error, Result};
use crate::geometry::{ComponentTag, Field2D, NeckGrid, Side};
use crate::pair::{HiggsPair, PairJet, PairValue};

/// Tolerance for the matching condition across the seam.
pub const MATCHING_TOL: f64 = 1e-12;

/// Model parameters at one preimage of the node.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub alpha: f64,
    pub c: C64,
    pub side: Side,
}

impl ModelParams {
    pub fn new(alpha: f64, c: C64, side: Side) -> Result<Self> {
        if c.norm() == 0.0 || !c.norm().is_finite() || !alpha.is_finite() {
            return Err(Error::Config(format!("model constant C = {c} must be finite and nonzero")));
        }
        Ok(Self { alpha, c, side })
    }

    /// The parameters the other side must carry to glue.
    pub fn matching_partner(&self) -> Self {
        let side = match self.side {
            Side::Plus => Side::Minus,
            Side::Minus => Side::Plus,
        };
        Self { alpha: -self.alpha, c: -self.c, side }
    }

    /// Connection coefficient of `dtheta` in the side's own disk coordinate.
    pub fn connection_dtheta(&self) -> Mat2 {
        Mat2::diag_traceless(C64::new(0.0, 2.0 * self.alpha))
    }

    /// Higgs coefficient of `dz/z` in the side's own disk coordinate.
    pub fn higgs_dz_over_z(&self) -> Mat2 {
        Mat2::diag_traceless(self.c)
    }

    /// The model pair in global neck coordinates. On the z-side `dvartheta = -dtheta` and
    /// `dzeta = -dz/z`; on the w-side both orientation flips cancel.
    pub fn neck_value(&self) -> PairValue {
        let sign = match self.side {
            Side::Plus => -1.0,
            Side::Minus => 1.0,
        };
        PairValue {
            a_tau: Mat2::zero(),
            a_theta: self.connection_dtheta().scale_re(sign),
            phi: self.higgs_dz_over_z().scale_re(sign),
        }
    }

    pub fn neck_jet(&self) -> PairJet {
        PairJet { value: self.neck_value(), ..Default::default() }
    }
}

/// Model pair at a point: `(A per dtheta, Phi per dz/z)`. Both are constant.
pub fn model_pair(params: &ModelParams, _point: (f64, f64)) -> (MatSL2, MatSL2) {
    let a = MatSL2::new(params.connection_dtheta()).expect("diagonal model is trace-free");
    let phi = MatSL2::new(params.higgs_dz_over_z()).expect("diagonal model is trace-free");
    (a, phi)
}

/// Check `alpha_- = -alpha_+` and `C_- = -C_+`.
pub fn check_matching(plus: &ModelParams, minus: &ModelParams) -> Result<()> {
    if plus.side != Side::Plus || minus.side != Side::Minus {
        return Err(Error::Config("glue_models expects a plus-side and a minus-side parameter set".into()));
    }
    let alpha_gap = (plus.alpha + minus.alpha).abs();
    let c_gap = (plus.c + minus.c).norm();
    if alpha_gap > MATCHING_TOL || c_gap > MATCHING_TOL {
        return Err(Error::MatchingViolation(format!(
            "alpha_+ + alpha_- = {:e}, |C_+ + C_-| = {:e}",
            plus.alpha + minus.alpha,
            c_gap
        )));
    }
    Ok(())
}

/// Glued model pair on the whole neck together with the coefficient jump at the seam.
#[derive(Clone, Debug)]
pub struct GluedModel {
    pub pair: HiggsPair,
    pub seam_jump: f64,
}

pub fn glue_models(plus: &ModelParams, minus: &ModelParams, grid: &NeckGrid) -> Result<GluedModel> {
    check_matching(plus, minus)?;
    let left = plus.neck_value();
    let right = minus.neck_value();
    let seam_jump = right.sub(&left).max_abs();
    let pair = HiggsPair::from_fn(grid, |tau, _| if tau > 0.0 { right } else { left });
    Ok(GluedModel { pair, seam_jump })
}

/// Pointwise determinant of a `dz/z` Higgs coefficient, stored as `diag(q, -q)`.
pub fn det_higgs(phi: &Field2D) -> Result<Field2D> {
    phi.expect_tag(ComponentTag::HiggsDzOverZ)?;
    let physical = phi.to_physical().map(|m| Mat2::diag_traceless(m.det()));
    Ok(Field2D::from_physical(&physical, ComponentTag::ScalarSection))
}

/// Wolf's one-parameter family of harmonic maps on the punctured disk.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WolfParams {
    pub ell: f64,
}

impl WolfParams {
    pub fn new(ell: f64) -> Result<Self> {
        if !(ell > 0.0 && ell < 1.0) {
            return Err(Error::Config(format!("ell = {ell} must lie in (0, 1)")));
        }
        Ok(Self { ell })
    }

    /// `B_ell(y) = (1 - ell)/(1 + ell) exp(2 ell (1 - y))` on the half-cylinder.
    pub fn b_of_y(&self, y: f64) -> f64 {
        let l = self.ell;
        (1.0 - l) / (1.0 + l) * (2.0 * l * (1.0 - y)).exp()
    }

    /// `B_ell` as a function of `|zeta| = e^{-y}`.
    pub fn b_of_radius(&self, r: f64) -> f64 {
        self.b_of_y(-r.ln())
    }

    /// `sqrt(B_ell) = kappa |zeta|^ell` with this `kappa`.
    pub fn amplitude(&self) -> f64 {
        let l = self.ell;
        ((1.0 - l) / (1.0 + l)).sqrt() * l.exp()
    }

    /// `h_{1,ell} = (2/ell)(1 - sqrt B)/(1 + sqrt B)`.
    pub fn h1(&self, r: f64) -> f64 {
        let sb = self.b_of_radius(r).sqrt();
        2.0 / self.ell * (1.0 - sb) / (1.0 + sb)
    }

    pub fn u_ell(&self, _x: f64, y: f64) -> f64 {
        let b = self.b_of_y(y);
        ((1.0 - b) / (1.0 + b)).asin() / self.ell
    }

    pub fn v_ell(&self, x: f64, _y: f64) -> f64 {
        x
    }

    /// Largest `|zeta|` with `B_ell < 1`.
    pub fn domain_radius(&self) -> f64 {
        self.amplitude().powf(-1.0 / self.ell)
    }

    /// Model the Higgs field tends to after the frame change, `C = ell/(4i)`.
    pub fn limiting_model(&self) -> ModelParams {
        ModelParams { alpha: 0.0, c: C64::new(0.0, -self.ell / 4.0), side: Side::Plus }
    }

    fn check_domain(&self, r: f64) -> Result<()> {
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::OutOfDomain(format!("|zeta| = {r} must lie in (0, 1)")));
        }
        if self.b_of_radius(r) >= 1.0 {
            return Err(Error::OutOfDomain(format!("B_ell(|zeta| = {r}) >= 1")));
        }
        Ok(())
    }
}

/// Constant unitary frame change taking the Wolf Higgs field towards diagonal form.
pub fn wolf_frame() -> Mat2 {
    Mat2::real(1.0, 1.0, 1.0, -1.0).scale_re(std::f64::consts::FRAC_1_SQRT_2)
}

/// Wolf solution at `zeta`: `(A per dtheta, Phi per dzeta/zeta)`.
///
/// The pair is normalized so it solves the self-duality equations in the convention used
/// throughout: relative to the displayed `(A_{1,ell}, Phi_{1,ell})` the connection carries the
/// opposite sign and the Higgs field a factor 1/2.
pub fn wolf_pair(params: &WolfParams, zeta: C64) -> Result<(MatSL2, MatSL2)> {
    let r = zeta.norm();
    params.check_domain(r)?;
    let l = params.ell;
    let b = params.b_of_radius(r).sqrt();
    let a = Mat2::sigma3().scale(C64::new(0.0, -l * b / (1.0 - b * b)));
    let h = params.h1(r);
    let phi = Mat2::new(C64::default(), (l * l / 4.0 * h).into(), (1.0 / h).into(), C64::default())
        .scale(-0.5 * I);
    Ok((MatSL2::new(a)?, MatSL2::new(phi)?))
}

/// Wolf solution with exact derivatives in the neck coordinates of its own disk,
/// `tau = -log|zeta|`, `vartheta = -arg zeta`.
pub fn wolf_jet(params: &WolfParams, tau: f64) -> Result<PairJet> {
    params.check_domain((-tau).exp())?;
    let l = params.ell;
    let b = params.amplitude() * (-l * tau).exp();
    let db = -l * b;
    let one_minus = 1.0 - b * b;
    let a_theta = Mat2::sigma3().scale(C64::new(0.0, l * b / one_minus));
    let d_a_theta = Mat2::sigma3().scale(C64::new(0.0, l * (1.0 + b * b) / (one_minus * one_minus) * db));
    let h = 2.0 / l * (1.0 - b) / (1.0 + b);
    let dh = -4.0 / l / ((1.0 + b) * (1.0 + b)) * db;
    let higgs = |upper: f64, lower: f64| {
        Mat2::new(C64::default(), upper.into(), lower.into(), C64::default()).scale(0.5 * I)
    };
    let value = PairValue { a_tau: Mat2::zero(), a_theta, phi: higgs(l * l / 4.0 * h, 1.0 / h) };
    let d_tau = PairValue { a_tau: Mat2::zero(), a_theta: d_a_theta, phi: higgs(l * l / 4.0 * dh, -dh / (h * h)) };
    Ok(PairJet { value, d_tau, d_theta: PairValue::default() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pair::{first_equation, second_equation};

    #[test]
    fn model_pair_example() {
        let p = ModelParams::new(1.0, I, Side::Plus).unwrap();
        let (a, phi) = model_pair(&p, (0.3, 1.0));
        assert_eq!(*a.mat(), Mat2::diag_traceless(C64::new(0.0, 2.0)));
        assert_eq!(*phi.mat(), Mat2::diag_traceless(I));
        assert!((phi.mat().det() + I * I).norm() < 1e-15);
    }

    #[test]
    fn rejects_zero_c() {
        assert!(ModelParams::new(0.3, C64::default(), Side::Plus).is_err());
    }

    #[test]
    fn matching() {
        let grid = NeckGrid::new(3.0, 32, 4);
        let plus = ModelParams::new(1.0, I, Side::Plus).unwrap();
        let glued = glue_models(&plus, &plus.matching_partner(), &grid).unwrap();
        assert_eq!(glued.seam_jump, 0.0);
        let bad = ModelParams::new(-1.0, I, Side::Minus).unwrap();
        assert!(matches!(glue_models(&plus, &bad, &grid), Err(Error::MatchingViolation(_))));
    }

    #[test]
    fn wolf_b_example() {
        let w = WolfParams::new(0.5).unwrap();
        let b = w.b_of_radius(0.1);
        let oracle = (1.0 / 3.0) * std::f64::consts::E * 0.1;
        assert!((b - oracle).abs() < 1e-15);
        assert!((oracle - 0.090_609_394_281_968_1).abs() < 1e-15);
    }

    #[test]
    fn wolf_jet_is_exact() {
        let w = WolfParams::new(0.5).unwrap();
        for tau in [0.2, 1.0, 4.0] {
            let jet = wolf_jet(&w, tau).unwrap();
            assert!(first_equation(&jet).max_abs() < 1e-13);
            assert!(second_equation(&jet).max_abs() < 1e-13);
        }
    }

    #[test]
    fn wolf_domain() {
        let w = WolfParams::new(0.5).unwrap();
        assert!(wolf_pair(&w, C64::default()).is_err());
        assert!(wolf_pair(&w, C64::new(0.5, 0.0)).is_ok());
        assert!(wolf_pair(&w, C64::new(0.0, 1.5)).is_err());
        assert!(w.domain_radius() > 1.0);
    }
}
