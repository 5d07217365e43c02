//! Reduction of an even 6-jet to `(a/2) p² + (ν₁/2) q² + (ν₂/4) q⁴ + (b/6) q⁶`.
//!
//! The quadratic part is diagonalised by a rotation; the remaining degree-4
//! and degree-6 monomials other than `q⁴`, `q⁶` are removed by two Lie-series
//! transforms whose generators solve the homological equation
//! `{F, H₂} = -(non-normal part)` in the least-norm sense.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jets::{Jet, SymplecticMap2};
use crate::models::Model;

/// Largest eliminated coefficient accepted after normalization, relative to
/// `max(1, largest coefficient)`.
pub const RESIDUAL_TOL: f64 = 1e-9;
/// Relative singular-value floor of the homological operator.
const RANK_TOL: f64 = 1e-12;
/// Odd coefficients above this reject the jet as not Z2-symmetric.
const ODD_TOL: f64 = 1e-10;
pub const SADDLE_NODE_TOL: f64 = 1e-6;
pub const CONCAVITY_TOL: f64 = 1e-6;

/// Which coefficient plays the role of `b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BConvention {
    /// `b` multiplies `q⁶/6`, i.e. `(4b/3) u³` with `u = q²/2`.
    Sextic,
    /// `b` is the bare coefficient of `u³`.
    CubicU,
}

impl BConvention {
    pub fn describe(self) -> &'static str {
        match self {
            BConvention::Sextic => "b = coefficient of q^6/6",
            BConvention::CubicU => "b = coefficient of u^3 (u = q^2/2)",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalFormCoefficients {
    pub a: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub u3_coeff: f64,
    /// `b` in the `q⁶/6` convention, `(3/4) u3_coeff`.
    pub b_sextic: f64,
    /// `b` in the `u³` convention, equal to `u3_coeff`.
    pub b_u3: f64,
    pub residual: f64,
}

impl NormalFormCoefficients {
    fn from_jet(jet: &Jet, residual: f64) -> NormalFormCoefficients {
        let u3 = 8.0 * jet.coeff(6, 0);
        NormalFormCoefficients {
            a: 2.0 * jet.coeff(0, 2),
            nu1: 2.0 * jet.coeff(2, 0),
            nu2: 4.0 * jet.coeff(4, 0),
            u3_coeff: u3,
            b_sextic: 6.0 * jet.coeff(6, 0),
            b_u3: u3,
            residual,
        }
    }

    pub fn b(&self, convention: BConvention) -> f64 {
        match convention {
            BConvention::Sextic => self.b_sextic,
            BConvention::CubicU => self.b_u3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagonalization {
    pub map: SymplecticMap2,
    pub a: f64,
    pub nu1: f64,
}

/// Rotate `(q, p)` so the quadratic part of `jet` loses its `qp` term.
///
/// A quadratic part that is already diagonal keeps the identity. Otherwise the
/// eigen-direction of larger magnitude becomes the `p` axis, so `a` is the
/// dominant coefficient and `ν₁` the one that may vanish.
pub fn diagonalize_quadratic(jet: &Jet) -> Result<Diagonalization> {
    let (cqq, cqp, cpp) = (jet.coeff(2, 0), jet.coeff(1, 1), jet.coeff(0, 2));
    if cqq == 0.0 && cqp == 0.0 && cpp == 0.0 {
        return Err(Error::DegenerateInput(
            "quadratic part of the jet is identically zero".into(),
        ));
    }
    if cqp == 0.0 {
        return Ok(Diagonalization {
            map: SymplecticMap2::identity(),
            a: 2.0 * cpp,
            nu1: 2.0 * cqq,
        });
    }
    let mean = 0.5 * (cqq + cpp);
    let rad = (0.25 * (cqq - cpp) * (cqq - cpp) + 0.25 * cqp * cqp).sqrt();
    let (lam_p, lam_q) = if mean >= 0.0 {
        (mean + rad, mean - rad)
    } else {
        (mean - rad, mean + rad)
    };
    // eigenvector of [[cqq, cqp/2], [cqp/2, cpp]] for lam_p, from the better-conditioned row
    let v1 = (0.5 * cqp, lam_p - cqq);
    let v2 = (lam_p - cpp, 0.5 * cqp);
    let (mut ex, mut ey) = if v1.0.hypot(v1.1) >= v2.0.hypot(v2.1) {
        v1
    } else {
        v2
    };
    let norm = ex.hypot(ey);
    ex /= norm;
    ey /= norm;
    if ey < 0.0 || (ey == 0.0 && ex < 0.0) {
        ex = -ex;
        ey = -ey;
    }
    // columns (e_q, e_p) with e_q = (ey, -ex) give det = 1
    let map = SymplecticMap2::new([[ey, ex], [-ex, ey]])?;
    Ok(Diagonalization {
        map,
        a: 2.0 * lam_p,
        nu1: 2.0 * lam_q,
    })
}

/// Result of [`normalize`].
#[derive(Debug, Clone)]
pub struct Normalization {
    pub coefficients: NormalFormCoefficients,
    /// Degree-4 generator.
    pub f2: Jet,
    /// Degree-6 generator.
    pub f3: Jet,
    pub map: SymplecticMap2,
    /// The jet after all three transformations.
    pub jet: Jet,
}

/// Solve `{F, H₂}_T = -rhs_T` for every degree-`d` monomial `T` except `q^d`,
/// with `F` homogeneous of degree `d`, least-norm.
fn homological_generator(h2: &Jet, current: &Jet, degree: usize) -> Result<Jet> {
    let cap = current.cap();
    let unknowns = degree + 1;
    let rows = degree; // monomials q^{d-k} p^k for k = 1..=d
    let mut op = DMatrix::<f64>::zeros(rows, unknowns);
    for col in 0..unknowns {
        let basis = Jet::monomial(cap, degree - col, col, 1.0)?;
        let image = basis.poisson_bracket(h2)?;
        for k in 1..=degree {
            op[(k - 1, col)] = image.coeff(degree - k, k);
        }
    }
    let rhs = DVector::from_iterator(rows, (1..=degree).map(|k| -current.coeff(degree - k, k)));
    let singular = op.singular_values();
    let smax = singular.max();
    let smin = singular.min();
    if !(smax > 0.0) || smin <= RANK_TOL * smax {
        return Err(Error::NormalizationFailure {
            j: f64::NAN,
            t: f64::NAN,
            residual: rhs.amax(),
            reason: format!(
                "degree-{degree} homological operator is rank deficient (singular values {smin:e}..{smax:e})"
            ),
        });
    }
    // least-norm solution Aᵀ(AAᵀ)⁻¹ b; AAᵀ is positive definite once the rank check passed
    let gram = &op * op.transpose();
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Usage("homological Gram matrix is not positive definite".into()))?;
    let coeffs = op.transpose() * chol.solve(&rhs);
    let terms: Vec<_> = (0..unknowns)
        .map(|col| (degree - col, col, coeffs[col]))
        .collect();
    Jet::from_terms(cap, &terms)
}

/// Largest coefficient that the normal form should not contain, with its monomial.
fn eliminated_residual(jet: &Jet) -> (f64, usize, usize) {
    jet.terms()
        .filter(|&(m, n, _)| {
            let d = m + n;
            d % 2 == 1 || (d == 2 && n != 2 && m != 2) || ((d == 4 || d == 6) && n != 0)
        })
        .fold((0.0, 0, 0), |acc, (m, n, c)| if c.abs() > acc.0 { (c.abs(), m, n) } else { acc })
}

/// Bring an even jet into normal form and read off its coefficients.
pub fn normalize(jet: &Jet) -> Result<Normalization> {
    let scale = jet.max_abs().max(1.0);
    if jet.max_abs_odd() > ODD_TOL * scale {
        return Err(Error::Precondition(format!(
            "jet is not Z2-symmetric: odd coefficient {:e}",
            jet.max_abs_odd()
        )));
    }
    let diag = diagonalize_quadratic(jet)?;
    if diag.a == 0.0 {
        return Err(Error::NormalizationFailure {
            j: f64::NAN,
            t: f64::NAN,
            residual: 0.0,
            reason: "coefficient a vanishes".into(),
        });
    }
    let cap = jet.cap();
    let mut current = jet.even_part().substitute_linear(&diag.map)?;
    current.set(2, 0, diag.nu1 / 2.0)?;
    current.set(1, 1, 0.0)?;
    current.set(0, 2, diag.a / 2.0)?;
    let h2 = current.homogeneous(2);

    let f2 = if cap >= 4 {
        homological_generator(&h2, &current, 4)?
    } else {
        Jet::zero(cap)?
    };
    if !f2.is_zero() {
        current = current.lie_transform(&f2)?;
    }
    let f3 = if cap >= 6 {
        homological_generator(&h2, &current, 6)?
    } else {
        Jet::zero(cap)?
    };
    if !f3.is_zero() {
        current = current.lie_transform(&f3)?;
    }
    let current = current.even_part();
    let (residual, m, n) = eliminated_residual(&current);
    if !(residual <= RESIDUAL_TOL * current.max_abs().max(1.0)) {
        return Err(Error::NormalizationFailure {
            j: f64::NAN,
            t: f64::NAN,
            residual,
            reason: format!("the q^{m} p^{n} coefficient survives the transform"),
        });
    }
    Ok(Normalization {
        coefficients: NormalFormCoefficients::from_jet(&current, residual),
        f2,
        f3,
        map: diag.map,
        jet: current,
    })
}

/// Expand `model` at `(j, t)` and normalize, tagging failures with the point.
pub fn normalize_model(model: &Model, j: f64, t: f64, cap: usize) -> Result<NormalFormCoefficients> {
    model
        .reduced_jet(j, t, cap)
        .and_then(|jet| normalize(&jet))
        .map(|n| n.coefficients)
        .map_err(|e| e.at_point(j, t))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdOptions {
    /// Step in `j`; defaults to `1e-4 max(1, |j|)`.
    pub step_j: Option<f64>,
    /// Step in `t`; defaults to `1e-4 max(1, |t|)`.
    pub step_t: Option<f64>,
    /// Combine steps `h` and `2h` by one Richardson extrapolation.
    pub richardson: bool,
    pub degree_cap: usize,
}

impl Default for FdOptions {
    fn default() -> Self {
        FdOptions {
            step_j: None,
            step_t: None,
            richardson: false,
            degree_cap: crate::jets::DEFAULT_DEGREE_CAP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NuDerivatives {
    pub j: f64,
    pub t: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub d_nu1_dj: f64,
    pub d2_nu1_dj2: f64,
    pub d_nu1_dt: f64,
    pub d_nu2_dj: f64,
    pub step_j: f64,
    pub step_t: f64,
}

/// Central finite differences of `ν₁`, `ν₂` around `(j, t)`.
pub fn nu_derivatives(model: &Model, j: f64, t: f64, opts: &FdOptions) -> Result<NuDerivatives> {
    let hj = opts.step_j.unwrap_or(1e-4 * j.abs().max(1.0));
    let ht = opts.step_t.unwrap_or(1e-4 * t.abs().max(1.0));
    if !(hj > 0.0 && ht > 0.0) {
        return Err(Error::Usage(format!(
            "finite-difference steps must be positive (got {hj}, {ht})"
        )));
    }
    let points = [
        (j - 2.0 * hj, t),
        (j - hj, t),
        (j, t),
        (j + hj, t),
        (j + 2.0 * hj, t),
        (j, t - ht),
        (j, t + ht),
        (j, t - 2.0 * ht),
        (j, t + 2.0 * ht),
    ];
    let cap = opts.degree_cap;
    let values: Vec<NormalFormCoefficients> = points
        .par_iter()
        .map(|&(jj, tt)| normalize_model(model, jj, tt, cap))
        .collect::<Result<_>>()?;
    let nu1: Vec<f64> = values.iter().map(|c| c.nu1).collect();
    let nu2: Vec<f64> = values.iter().map(|c| c.nu2).collect();

    let first = |m1: f64, p1: f64, h: f64| (p1 - m1) / (2.0 * h);
    let second = |m1: f64, c: f64, p1: f64, h: f64| (p1 - 2.0 * c + m1) / (h * h);
    let rich = |fine: f64, coarse: f64| {
        if opts.richardson {
            (4.0 * fine - coarse) / 3.0
        } else {
            fine
        }
    };
    Ok(NuDerivatives {
        j,
        t,
        nu1: nu1[2],
        nu2: nu2[2],
        d_nu1_dj: rich(first(nu1[1], nu1[3], hj), first(nu1[0], nu1[4], 2.0 * hj)),
        d2_nu1_dj2: rich(
            second(nu1[1], nu1[2], nu1[3], hj),
            second(nu1[0], nu1[2], nu1[4], 2.0 * hj),
        ),
        d_nu1_dt: rich(first(nu1[5], nu1[6], ht), first(nu1[7], nu1[8], 2.0 * ht)),
        d_nu2_dj: rich(first(nu2[1], nu2[3], hj), first(nu2[0], nu2[4], 2.0 * hj)),
        step_j: hj,
        step_t: ht,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaddleNodeReport {
    pub nu1: f64,
    pub d_nu1_dj: f64,
    pub d2_nu1_dj2: f64,
    pub d_nu1_dt: f64,
    pub nu1_vanishes: bool,
    pub slope_vanishes: bool,
    pub curvature_nonzero: bool,
    pub drift_nonzero: bool,
    pub passed: bool,
}

/// `ν₁ = ∂ν₁/∂j = 0`, `∂²ν₁/∂j² ≠ 0`, `∂ν₁/∂t ≠ 0`, each at tolerance `1e-6`.
pub fn check_saddle_node(d: &NuDerivatives, nu1_at_base: f64) -> SaddleNodeReport {
    let nu1_vanishes = nu1_at_base.abs() <= SADDLE_NODE_TOL;
    let slope_vanishes = d.d_nu1_dj.abs() <= SADDLE_NODE_TOL;
    let curvature_nonzero = d.d2_nu1_dj2.abs() >= SADDLE_NODE_TOL;
    let drift_nonzero = d.d_nu1_dt.abs() >= SADDLE_NODE_TOL;
    SaddleNodeReport {
        nu1: nu1_at_base,
        d_nu1_dj: d.d_nu1_dj,
        d2_nu1_dj2: d.d2_nu1_dj2,
        d_nu1_dt: d.d_nu1_dt,
        nu1_vanishes,
        slope_vanishes,
        curvature_nonzero,
        drift_nonzero,
        passed: nu1_vanishes && slope_vanishes && curvature_nonzero && drift_nonzero,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Concavity {
    SameDirection,
    OppositeDirection,
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcavityReport {
    pub ratio: f64,
    pub verdict: Concavity,
    pub b: f64,
    pub b_convention: BConvention,
}

/// Compare the concavity of the `ν₁ = 0` and `disc_b = 0` saddle-node curves.
pub fn concavity_report(d: &NuDerivatives, b: f64, convention: BConvention) -> Result<ConcavityReport> {
    if d.d2_nu1_dj2 == 0.0 || !d.d2_nu1_dj2.is_finite() {
        return Err(Error::Precondition(
            "concavity undefined: second j-derivative of nu1 vanishes".into(),
        ));
    }
    if b == 0.0 || !b.is_finite() {
        return Err(Error::Precondition("concavity undefined: b vanishes".into()));
    }
    let ratio = d.d_nu2_dj * d.d_nu2_dj / (2.0 * b * d.d2_nu1_dj2);
    let verdict = if (ratio - 1.0).abs() <= CONCAVITY_TOL {
        Concavity::Degenerate
    } else if ratio < 1.0 {
        Concavity::SameDirection
    } else {
        Concavity::OppositeDirection
    };
    Ok(ConcavityReport {
        ratio,
        verdict,
        b,
        b_convention: convention,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DoubleFlipVerdict {
    /// Saddle-node conditions hold and the bifurcation is non-degenerate.
    Affirmed,
    /// Saddle-node conditions hold but the concavity ratio equals one.
    Degenerate,
    NotAffirmed,
}

impl DoubleFlipVerdict {
    pub fn decide(saddle: &SaddleNodeReport, concavity: Option<&ConcavityReport>) -> DoubleFlipVerdict {
        match (saddle.passed, concavity.map(|c| c.verdict)) {
            (true, Some(Concavity::Degenerate)) => DoubleFlipVerdict::Degenerate,
            (true, Some(_)) => DoubleFlipVerdict::Affirmed,
            _ => DoubleFlipVerdict::NotAffirmed,
        }
    }
}

/// Everything the `normalize` command reports for one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointAnalysis {
    pub coefficients: NormalFormCoefficients,
    pub derivatives: NuDerivatives,
    pub saddle_node: SaddleNodeReport,
    pub concavity: Option<ConcavityReport>,
    pub verdict: DoubleFlipVerdict,
}

pub fn analyze_point(
    model: &Model,
    j: f64,
    t: f64,
    opts: &FdOptions,
    convention: BConvention,
) -> Result<PointAnalysis> {
    let coefficients = normalize_model(model, j, t, opts.degree_cap)?;
    let derivatives = nu_derivatives(model, j, t, opts)?;
    let saddle_node = check_saddle_node(&derivatives, coefficients.nu1);
    let concavity = concavity_report(&derivatives, coefficients.b(convention), convention).ok();
    let verdict = DoubleFlipVerdict::decide(&saddle_node, concavity.as_ref());
    Ok(PointAnalysis {
        coefficients,
        derivatives,
        saddle_node,
        concavity,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ModelId, ModelParams, NuSpec};
    use rand::{Rng, SeedableRng};

    fn nf_jet(a: f64, b: f64, nu1: f64, nu2: f64) -> Jet {
        Jet::from_terms(
            6,
            &[
                (0, 2, a / 2.0),
                (6, 0, b / 6.0),
                (2, 0, nu1 / 2.0),
                (4, 0, nu2 / 4.0),
            ],
        )
        .unwrap()
    }

    fn osc() -> Model {
        Model::new(ModelId::Oscillator12, ModelParams::default()).unwrap()
    }

    fn hirz() -> Model {
        Model::new(ModelId::Hirzebruch, ModelParams::default()).unwrap()
    }

    fn nf_model(nu1: &str, nu2: &str) -> Model {
        Model::new(
            ModelId::NormalForm,
            ModelParams {
                nu1: nu1.parse().unwrap(),
                nu2: nu2.parse().unwrap(),
                ..Default::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn diagonal_quadratic_keeps_identity() {
        let jet = Jet::from_terms(6, &[(0, 2, 2.0), (2, 0, 3.0)]).unwrap();
        let d = diagonalize_quadratic(&jet).unwrap();
        assert_eq!(d.map, SymplecticMap2::identity());
        assert_eq!((d.a, d.nu1), (4.0, 6.0));
    }

    #[test]
    fn sum_square_quadratic_gets_the_paper_rotation() {
        let eps = 0.3;
        let c = 2.0 / (1.0 + 8.0 * eps);
        let jet = Jet::from_terms(6, &[(2, 0, c), (1, 1, 2.0 * c), (0, 2, c)]).unwrap();
        let d = diagonalize_quadratic(&jet).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let expected = [[r, r], [-r, r]];
        for i in 0..2 {
            for k in 0..2 {
                assert!((d.map.entries()[i][k] - expected[i][k]).abs() < 1e-15);
            }
        }
        assert!((d.a - 4.0 * c).abs() < 1e-14);
        assert!(d.nu1.abs() < 1e-14);
        let rotated = jet.substitute_linear(&d.map).unwrap();
        assert!((rotated.coeff(0, 2) - 2.0 * c).abs() < 1e-14);
        assert!(rotated.coeff(1, 1).abs() < 1e-14);
    }

    #[test]
    fn zero_quadratic_is_degenerate() {
        let jet = Jet::monomial(6, 4, 0, 1.0).unwrap();
        assert!(matches!(
            diagonalize_quadratic(&jet),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn diagonalization_preserves_determinant() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let (x, y, z) = (
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
            );
            let jet = Jet::from_terms(6, &[(2, 0, x), (1, 1, y), (0, 2, z)]).unwrap();
            let d = diagonalize_quadratic(&jet).unwrap();
            let det = x * z - 0.25 * y * y;
            assert!((d.a * d.nu1 - 4.0 * det).abs() < 1e-10 * (1.0 + det.abs()));
            assert!(d.a.abs() >= d.nu1.abs() - 1e-12);
            let rotated = jet.substitute_linear(&d.map).unwrap();
            assert!(rotated.coeff(1, 1).abs() < 1e-12);
            assert!((2.0 * rotated.coeff(0, 2) - d.a).abs() < 1e-12);
        }
    }

    #[test]
    fn normal_form_is_a_fixed_point() {
        let jet = nf_jet(1.0, 1.0, 0.3, -0.2);
        let n = normalize(&jet).unwrap();
        assert!(n.f2.is_zero() && n.f3.is_zero());
        assert_eq!(n.coefficients.residual, 0.0);
        assert_eq!(n.jet, jet);
        let c = n.coefficients;
        assert_eq!((c.a, c.nu1, c.nu2, c.b_sextic), (1.0, 0.3, -0.2, 1.0));
        assert!((c.u3_coeff - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn odd_jets_rejected() {
        let mut jet = nf_jet(1.0, 1.0, 0.3, -0.2);
        jet.set(3, 0, 0.1).unwrap();
        assert!(matches!(normalize(&jet), Err(Error::Precondition(_))));
    }

    #[test]
    fn vanishing_a_is_a_normalization_failure() {
        // a = ν₁ = 0 leaves no quadratic part at all
        let jet = Jet::from_terms(6, &[(4, 0, 1.0), (2, 2, 1.0)]).unwrap();
        assert!(normalize(&jet).is_err());
        // a = 0, ν₁ ≠ 0: the operator loses rank
        let jet = Jet::from_terms(6, &[(2, 0, 0.5), (2, 2, 1.0)]).unwrap();
        let err = normalize(&jet).unwrap_err();
        assert!(matches!(err, Error::NormalizationFailure { .. }), "{err:?}");
    }

    #[test]
    fn oscillator_at_candidate() {
        let jet = osc().reduced_jet(-4.0, 0.5, 6).unwrap();
        let n = normalize(&jet).unwrap();
        let c = n.coefficients;
        assert!((c.a - 4.0).abs() < 1e-12, "{c:?}");
        assert!(c.nu1.abs() < 1e-12 && c.nu2.abs() < 1e-12, "{c:?}");
        // exact value 1/64 from a symbolic computation of the same transform
        assert!((c.u3_coeff - 1.0 / 64.0).abs() < 1e-14, "{c:?}");
        assert!((c.b_sextic - 3.0 / 256.0).abs() < 1e-14);
        assert!(c.residual < 1e-12);
        // degree-2 part untouched by the Lie transforms
        assert_eq!(n.jet.coeff(0, 2), c.a / 2.0);
    }

    #[test]
    fn hirzebruch_at_candidate() {
        let c = normalize_model(&hirz(), 2.0, 0.2, 6).unwrap();
        assert!((c.a + 0.8).abs() < 1e-12, "{c:?}");
        assert!(c.nu1.abs() < 1e-12 && c.nu2.abs() < 1e-12);
        assert!((c.b_sextic + 0.15).abs() < 1e-12, "{c:?}");
        assert!((c.u3_coeff + 0.2).abs() < 1e-12);
    }

    #[test]
    fn normal_form_models_echo_their_specs() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let params = ModelParams {
                a: rng.random_range(0.2..2.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 },
                b: rng.random_range(0.2..2.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 },
                nu1: NuSpec::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), -1.0),
                nu2: NuSpec::new(0.0, rng.random_range(-3.0..3.0), -1.0),
                ..Default::default()
            };
            let m = Model::new(ModelId::NormalForm, params).unwrap();
            let (j, t) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let c = normalize_model(&m, j, t, 6).unwrap();
            assert!((c.a - params.a).abs() <= 1e-12);
            assert!((c.nu1 - params.nu1.eval(j, t)).abs() <= 1e-12);
            assert!((c.nu2 - params.nu2.eval(j, t)).abs() <= 1e-12);
            assert!((c.u3_coeff - 4.0 * params.b / 3.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn residual_small_on_grids_around_candidates() {
        let cubic = Model::new(
            ModelId::Oscillator12Cubic,
            ModelParams {
                epsilon: 9.0 / 256.0,
                ..Default::default()
            },
        )
        .unwrap();
        for m in [osc(), cubic, hirz()] {
            let (j0, t0) = m.candidate();
            let (dj, dt) = if m.id() == ModelId::Hirzebruch { (0.1, 0.05) } else { (0.2 * j0.abs(), 0.05) };
            for a in -4..=4 {
                for b in -4..=4 {
                    let j = j0 + dj * a as f64 / 4.0;
                    let t = t0 + dt * b as f64 / 4.0;
                    let c = normalize_model(&m, j, t, 6).unwrap();
                    assert!(c.residual <= 1e-9, "{:?} at ({j}, {t}): {}", m.id(), c.residual);
                    let diag = diagonalize_quadratic(&m.reduced_jet(j, t, 6).unwrap()).unwrap();
                    assert_eq!(c.nu1, diag.nu1);
                }
            }
        }
    }

    #[test]
    fn polynomial_spec_derivatives() {
        let d = nu_derivatives(&nf_model("j2-t", "3j-t"), 0.0, 0.0, &FdOptions::default()).unwrap();
        assert!(d.d_nu1_dj.abs() < 1e-10);
        assert!((d.d2_nu1_dj2 - 2.0).abs() < 1e-6);
        assert!((d.d_nu1_dt + 1.0).abs() < 1e-10);
        assert!((d.d_nu2_dj - 3.0).abs() < 1e-10);
    }

    #[test]
    fn oscillator_derivatives_converge_quadratically() {
        // closed forms: ∂²ν₁/∂j² = (t/2)(-j)^{-3/2}, ∂ν₁/∂t = -2 - 2(√-j + 2jε)
        let m = osc();
        let exact_dd = 0.25 / 8.0;
        let exact_dt = -4.0;
        let mut prev: Option<f64> = None;
        for h in [0.2, 0.1, 0.05] {
            let opts = FdOptions {
                step_j: Some(h),
                step_t: Some(h / 20.0),
                ..Default::default()
            };
            let d = nu_derivatives(&m, -4.0, 0.5, &opts).unwrap();
            let err = (d.d2_nu1_dj2 - exact_dd).abs();
            if let Some(p) = prev {
                let ratio = p / err;
                assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
            }
            prev = Some(err);
            assert!((d.d_nu1_dt - exact_dt).abs() < 1e-6);
        }
    }

    #[test]
    fn richardson_improves_accuracy() {
        let m = osc();
        let base = FdOptions {
            step_j: Some(0.1),
            step_t: Some(0.01),
            ..Default::default()
        };
        let plain = nu_derivatives(&m, -4.0, 0.5, &base).unwrap();
        let rich = nu_derivatives(&m, -4.0, 0.5, &FdOptions { richardson: true, ..base }).unwrap();
        let exact = 1.0 / 32.0;
        assert!((rich.d2_nu1_dj2 - exact).abs() < 0.05 * (plain.d2_nu1_dj2 - exact).abs());
    }

    #[test]
    fn saddle_node_checks() {
        let d = nu_derivatives(&osc(), -4.0, 0.5, &FdOptions::default()).unwrap();
        assert!(check_saddle_node(&d, d.nu1).passed);
        let d = nu_derivatives(&hirz(), 2.0, 0.2, &FdOptions::default()).unwrap();
        assert!(check_saddle_node(&d, d.nu1).passed);
        let d = nu_derivatives(&nf_model("j-t", "3j-t"), 0.0, 0.0, &FdOptions::default()).unwrap();
        let report = check_saddle_node(&d, d.nu1);
        assert!(!report.passed && !report.slope_vanishes);
    }

    fn synthetic(dd1: f64, d2j: f64) -> NuDerivatives {
        NuDerivatives {
            j: 0.0,
            t: 0.0,
            nu1: 0.0,
            nu2: 0.0,
            d_nu1_dj: 0.0,
            d2_nu1_dj2: dd1,
            d_nu1_dt: -1.0,
            d_nu2_dj: d2j,
            step_j: 1e-4,
            step_t: 1e-4,
        }
    }

    #[test]
    fn concavity_verdicts() {
        let r = concavity_report(&synthetic(2.0, 3.0), 1.0, BConvention::Sextic).unwrap();
        assert!((r.ratio - 2.25).abs() < 1e-15);
        assert_eq!(r.verdict, Concavity::OppositeDirection);
        let r = concavity_report(&synthetic(2.0, 2.0), 1.0, BConvention::Sextic).unwrap();
        assert_eq!(r.verdict, Concavity::Degenerate);
        let r = concavity_report(&synthetic(2.0, 1.0), 1.0, BConvention::Sextic).unwrap();
        assert_eq!(r.verdict, Concavity::SameDirection);
        assert!(concavity_report(&synthetic(0.0, 1.0), 1.0, BConvention::Sextic).is_err());
        assert!(concavity_report(&synthetic(2.0, 1.0), 0.0, BConvention::Sextic).is_err());
    }

    #[test]
    fn oscillator_concavity_is_four_thirds() {
        let a = analyze_point(&osc(), -4.0, 0.5, &FdOptions::default(), BConvention::Sextic).unwrap();
        let c = a.concavity.unwrap();
        assert!((c.ratio - 4.0 / 3.0).abs() < 1e-4, "{c:?}");
        assert_eq!(c.verdict, Concavity::OppositeDirection);
        assert_eq!(a.verdict, DoubleFlipVerdict::Affirmed);
    }
}
