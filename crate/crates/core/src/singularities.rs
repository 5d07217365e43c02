//! Critical points of the reduced Hamiltonian and their linear type.
//!
//! [`critical_points_nf`] uses the closed forms for the normal form;
//! [`numeric_critical_points`] finds zeros of the gradient of any model by
//! Newton iteration and serves as an independent check of the closed forms.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Model, ModelId};

/// Base tolerance for calling `λ²` zero, before scaling.
pub const DEGENERATE_TOL: f64 = 1e-9;
/// Critical points closer than this are the same point.
pub const MERGE_RADIUS: f64 = 1e-7;
/// Degenerate points this close (relative to the seed box) with equal `h` are one point.
const FLAT_RADIUS: f64 = 1e-2;
/// Seeds per axis of the Newton grid.
pub const SEED_GRID: usize = 41;
// enough for the linear convergence at a quintic zero of the gradient
const NEWTON_MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Branch {
    Q1,
    Q2Minus,
    Q2Plus,
    Numeric(usize),
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Branch::Q1 => f.write_str("Q1"),
            Branch::Q2Minus => f.write_str("Q2Minus"),
            Branch::Q2Plus => f.write_str("Q2Plus"),
            Branch::Numeric(i) => write!(f, "N{i}"),
        }
    }
}

impl FromStr for Branch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Branch> {
        match s {
            "Q1" => Ok(Branch::Q1),
            "Q2Minus" => Ok(Branch::Q2Minus),
            "Q2Plus" => Ok(Branch::Q2Plus),
            _ => s
                .strip_prefix('N')
                .and_then(|n| n.parse().ok())
                .map(Branch::Numeric)
                .ok_or_else(|| Error::Parse(format!("unknown branch label '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Class {
    Centre,
    Saddle,
    Degenerate,
}

impl Class {
    /// Classify `λ²` against `DEGENERATE_TOL · max(1, scale)`.
    pub fn from_lambda_squared(lambda_squared: f64, scale: f64) -> Class {
        let tol = DEGENERATE_TOL * scale.abs().max(1.0);
        if lambda_squared < -tol {
            Class::Centre
        } else if lambda_squared > tol {
            Class::Saddle
        } else {
            Class::Degenerate
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Class::Centre => "centre",
            Class::Saddle => "saddle",
            Class::Degenerate => "degenerate",
        }
    }
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Class {
    type Err = Error;

    fn from_str(s: &str) -> Result<Class> {
        match s {
            "centre" => Ok(Class::Centre),
            "saddle" => Ok(Class::Saddle),
            "degenerate" => Ok(Class::Degenerate),
            _ => Err(Error::Parse(format!("unknown class '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub q: f64,
    pub p: f64,
    pub branch: Branch,
    /// Squared eigenvalue of the linearised field: negative for a centre.
    pub lambda_squared: f64,
    /// Critical value.
    pub h: f64,
    pub class: Class,
}

/// `ν₂² - 4bν₁`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Discriminant {
    pub value: f64,
}

pub fn disc_b(nu1: f64, nu2: f64, b: f64) -> Discriminant {
    Discriminant {
        value: nu2 * nu2 - 4.0 * b * nu1,
    }
}

fn nf_value(b: f64, nu1: f64, nu2: f64, q: f64) -> f64 {
    let q2 = q * q;
    q2 * (nu1 / 2.0 + q2 * (nu2 / 4.0 + q2 * b / 6.0))
}

fn nf_scale(a: f64, nu1: f64, disc: f64) -> f64 {
    (a * nu1).abs().max(disc.abs())
}

/// `q²` of the outer branch, if real and non-negative.
fn q2_squared(branch: Branch, b: f64, nu2: f64, disc: f64) -> Option<f64> {
    if disc < 0.0 {
        return None;
    }
    let root = disc.sqrt();
    let num = match branch {
        Branch::Q2Minus => -nu2 - root,
        Branch::Q2Plus => -nu2 + root,
        _ => return None,
    };
    let q2 = num / (2.0 * b);
    (q2 >= 0.0).then_some(q2)
}

/// `λ²` on `branch` from the closed forms.
pub fn eigenvalue_nf(branch: Branch, a: f64, b: f64, nu1: f64, nu2: f64) -> Result<f64> {
    let disc = disc_b(nu1, nu2, b).value;
    match branch {
        Branch::Q1 => Ok(-a * nu1),
        Branch::Q2Minus | Branch::Q2Plus => {
            if q2_squared(branch, b, nu2, disc).is_none() {
                return Err(Error::Precondition(format!(
                    "branch {branch} does not exist at nu1 = {nu1}, nu2 = {nu2}, b = {b}"
                )));
            }
            let root = disc.sqrt();
            let inner = if branch == Branch::Q2Minus {
                4.0 * b * nu1 - nu2 * (root + nu2)
            } else {
                4.0 * b * nu1 + nu2 * (root - nu2)
            };
            Ok(a / b * inner)
        }
        Branch::Numeric(_) => Err(Error::Precondition(
            "closed-form eigenvalues exist only for normal-form branches".into(),
        )),
    }
}

/// Normal-form critical points with `q ≥ 0`, without merging coinciding
/// outer points; an outer point within [`MERGE_RADIUS`] of its partner is
/// marked degenerate. Outer points that coincide with the origin are dropped.
pub(crate) fn nf_branch_points(a: f64, b: f64, nu1: f64, nu2: f64) -> Result<Vec<CriticalPoint>> {
    if a == 0.0 || b == 0.0 {
        return Err(Error::Precondition("normal form needs a != 0 and b != 0".into()));
    }
    let disc = disc_b(nu1, nu2, b).value;
    let scale = nf_scale(a, nu1, disc);
    let lambda_q1 = -a * nu1;
    let mut points = vec![CriticalPoint {
        q: 0.0,
        p: 0.0,
        branch: Branch::Q1,
        lambda_squared: lambda_q1,
        h: 0.0,
        class: Class::from_lambda_squared(lambda_q1, scale),
    }];
    for branch in [Branch::Q2Minus, Branch::Q2Plus] {
        let Some(q2) = q2_squared(branch, b, nu2, disc) else {
            continue;
        };
        let q = q2.sqrt();
        if q < MERGE_RADIUS {
            continue;
        }
        let lambda_squared = eigenvalue_nf(branch, a, b, nu1, nu2)?;
        points.push(CriticalPoint {
            q,
            p: 0.0,
            branch,
            lambda_squared,
            h: nf_value(b, nu1, nu2, q),
            class: Class::from_lambda_squared(lambda_squared, scale),
        });
    }
    if let [_, m, p] = points.as_mut_slice() {
        if (m.q - p.q).abs() < MERGE_RADIUS {
            m.class = Class::Degenerate;
            p.class = Class::Degenerate;
        }
    }
    Ok(points)
}

/// Critical points of the normal form with `q ≥ 0`.
///
/// Outer points that coincide with the origin are dropped; coinciding outer
/// points are merged into one degenerate `Q2Minus` point.
pub fn critical_points_nf(a: f64, b: f64, nu1: f64, nu2: f64) -> Result<Vec<CriticalPoint>> {
    let mut points = nf_branch_points(a, b, nu1, nu2)?;
    if points.len() == 3 && (points[1].q - points[2].q).abs() < MERGE_RADIUS {
        points.pop();
    }
    Ok(points)
}

/// Output of [`numeric_critical_points`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericCriticalPoints {
    /// Points with `q > 0`, or `q = 0` and `p ≥ 0`, sorted by `(q, p)`.
    pub points: Vec<CriticalPoint>,
    /// Set when no seed converged.
    pub warning: Option<String>,
}

/// Half-width of the square seed box.
fn seed_box(model: &Model, j: f64, t: f64) -> f64 {
    match model.id() {
        ModelId::NormalForm => {
            let pr = model.params();
            let (nu1, nu2) = (pr.nu1.eval(j, t), pr.nu2.eval(j, t));
            let disc = disc_b(nu1, nu2, pr.b).value;
            let largest = [Branch::Q2Minus, Branch::Q2Plus]
                .into_iter()
                .filter_map(|br| q2_squared(br, pr.b, nu2, disc))
                .fold(0.0f64, |m, q2| m.max(q2.sqrt()));
            1.5 * largest.max(1.0)
        }
        _ => model.phase_scale(j),
    }
}

/// Gradient and Hessian at `(q, p)`.
fn local_derivatives(model: &Model, q: f64, p: f64, j: f64, t: f64) -> Result<([f64; 2], [[f64; 2]; 2])> {
    let jet = model.local_jet(q, p, j, t, 2)?;
    let grad = [jet.coeff(1, 0), jet.coeff(0, 1)];
    let hess = [
        [2.0 * jet.coeff(2, 0), jet.coeff(1, 1)],
        [jet.coeff(1, 1), 2.0 * jet.coeff(0, 2)],
    ];
    Ok((grad, hess))
}

fn newton(model: &Model, seed: (f64, f64), j: f64, t: f64, limit: f64) -> Option<(f64, f64)> {
    let (mut q, mut p) = seed;
    for _ in 0..NEWTON_MAX_ITER {
        let (g, h) = local_derivatives(model, q, p, j, t).ok()?;
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        let gnorm = g[0].abs().max(g[1].abs());
        if det == 0.0 || !det.is_finite() {
            return (gnorm == 0.0).then_some((q, p));
        }
        let dq = -(h[1][1] * g[0] - h[0][1] * g[1]) / det;
        let dp = -(-h[1][0] * g[0] + h[0][0] * g[1]) / det;
        q += dq;
        p += dp;
        if !(q.abs() <= limit && p.abs() <= limit) {
            return None;
        }
        let step = dq.abs().max(dp.abs());
        if step <= 1e-14 * q.abs().max(p.abs()).max(1.0) {
            return Some((q, p));
        }
    }
    None
}

/// Representative of the Z₂ orbit `{(q, p), (-q, -p)}`.
fn canonical(q: f64, p: f64) -> (f64, f64) {
    if q < -MERGE_RADIUS || (q.abs() <= MERGE_RADIUS && p < 0.0) {
        (-q, -p)
    } else {
        (q, p)
    }
}

/// Zeros of the gradient of the reduced Hamiltonian, found by Newton
/// iteration from a 41×41 grid of seeds.
pub fn numeric_critical_points(model: &Model, j: f64, t: f64) -> Result<NumericCriticalPoints> {
    let half = seed_box(model, j, t);
    let limit = 4.0 * half;
    let seeds: Vec<(f64, f64)> = (0..SEED_GRID)
        .flat_map(|i| {
            (0..SEED_GRID).map(move |k| {
                let s = |n: usize| -half + 2.0 * half * n as f64 / (SEED_GRID - 1) as f64;
                (s(i), s(k))
            })
        })
        .collect();
    let roots: Vec<Option<(f64, f64)>> = seeds
        .par_iter()
        .map(|&seed| newton(model, seed, j, t, limit))
        .collect();

    let mut found: Vec<(f64, f64)> = Vec::new();
    for (q, p) in roots.into_iter().flatten() {
        let (q, p) = canonical(q, p);
        if !found
            .iter()
            .any(|&(a, b)| (a - q).hypot(b - p) < MERGE_RADIUS)
        {
            found.push((q, p));
        }
    }
    found.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));

    let warning = found
        .is_empty()
        .then(|| format!("Newton iteration did not converge from any seed at (j, t) = ({j}, {t})"));
    let mut points: Vec<CriticalPoint> = Vec::with_capacity(found.len());
    for (q, p) in found {
        let c = numeric_point(model, q, p, j, t, Branch::Numeric(0))?;
        // at a highly degenerate zero the gradient underflows on a whole patch
        let flat = points.iter_mut().find(|o| {
            c.class == Class::Degenerate
                && o.class == Class::Degenerate
                && (o.q - c.q).hypot(o.p - c.p) <= FLAT_RADIUS * half
                && (o.h - c.h).abs() <= 1e-12 * c.h.abs().max(1.0)
        });
        match flat {
            Some(o) if c.q.hypot(c.p) < o.q.hypot(o.p) => *o = c,
            Some(_) => {}
            None => points.push(c),
        }
    }
    for (i, c) in points.iter_mut().enumerate() {
        c.branch = Branch::Numeric(i);
    }
    Ok(NumericCriticalPoints { points, warning })
}

fn numeric_point(model: &Model, q: f64, p: f64, j: f64, t: f64, branch: Branch) -> Result<CriticalPoint> {
    let (_, h) = local_derivatives(model, q, p, j, t)?;
    let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
    let lambda_squared = -det;
    let scale = (h[0][0] * h[1][1]).abs().max(h[0][1] * h[0][1]);
    Ok(CriticalPoint {
        q,
        p,
        branch,
        lambda_squared,
        h: model.evaluate_reduced(q, p, j, t)?,
        class: Class::from_lambda_squared(lambda_squared, scale),
    })
}

/// Newton iteration from a single seed; `None` if it does not converge.
pub fn refine_critical_point(model: &Model, seed: (f64, f64), j: f64, t: f64) -> Result<Option<CriticalPoint>> {
    let limit = 4.0 * seed_box(model, j, t).max(seed.0.abs()).max(seed.1.abs());
    match newton(model, seed, j, t, limit) {
        Some((q, p)) => {
            let (q, p) = canonical(q, p);
            numeric_point(model, q, p, j, t, Branch::Numeric(0)).map(Some)
        }
        None => Ok(None),
    }
}

/// Critical points by the closed forms for normal-form models, numerically otherwise.
pub fn critical_points(model: &Model, j: f64, t: f64) -> Result<Vec<CriticalPoint>> {
    match model.id() {
        ModelId::NormalForm => {
            let pr = model.params();
            critical_points_nf(pr.a, pr.b, pr.nu1.eval(j, t), pr.nu2.eval(j, t))
        }
        _ => Ok(numeric_critical_points(model, j, t)?.points),
    }
}

impl From<Branch> for String {
    fn from(v: Branch) -> String {
        v.to_string()
    }
}

impl TryFrom<String> for Branch {
    type Error = Error;

    fn try_from(s: String) -> Result<Branch> {
        s.parse()
    }
}

impl From<Class> for String {
    fn from(v: Class) -> String {
        v.to_string()
    }
}

impl TryFrom<String> for Class {
    type Error = Error;

    fn try_from(s: String) -> Result<Class> {
        s.parse()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ModelParams, NuSpec};
    use rand::{Rng, SeedableRng};

    fn nf_model(a: f64, b: f64, nu1: f64, nu2: f64) -> Model {
        Model::new(
            ModelId::NormalForm,
            ModelParams {
                a,
                b,
                nu1: NuSpec::new(0.0, 0.0, nu1),
                nu2: NuSpec::new(0.0, 0.0, nu2),
                ..Default::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn discriminant_formula() {
        assert_eq!(disc_b(0.0, 0.0, 1.0).value, 0.0);
        assert_eq!(disc_b(-1.0, 0.0, 1.0).value, 4.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let (n1, n2, b) = (
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            );
            let d = disc_b(n1, n2, b).value;
            assert_eq!(d, n2 * n2 - 4.0 * b * n1);
        }
    }

    #[test]
    fn symmetric_origin_is_single_degenerate_point() {
        let pts = critical_points_nf(1.0, 1.0, 0.0, 0.0).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].branch, Branch::Q1);
        assert_eq!(pts[0].class, Class::Degenerate);
    }

    #[test]
    fn negative_nu1_gives_saddle_and_outer_centre() {
        let pts = critical_points_nf(1.0, 1.0, -1.0, 0.0).unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!((pts[0].branch, pts[0].class), (Branch::Q1, Class::Saddle));
        assert_eq!(pts[0].lambda_squared, 1.0);
        assert_eq!(pts[1].branch, Branch::Q2Plus);
        assert!((pts[1].q - 1.0).abs() < 1e-15);
        assert!((pts[1].lambda_squared + 4.0).abs() < 1e-15);
        assert_eq!(pts[1].class, Class::Centre);
        assert!(eigenvalue_nf(Branch::Q2Minus, 1.0, 1.0, -1.0, 0.0).is_err());
    }

    #[test]
    fn positive_nu1_without_outer_points() {
        let pts = critical_points_nf(1.0, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].class, Class::Centre);
    }

    #[test]
    fn eigenvalues_vanish_on_the_discriminant() {
        // ν₂ = -2, b = 1, ν₁ = 1: disc = 4 - 4 = 0
        for br in [Branch::Q2Minus, Branch::Q2Plus] {
            assert_eq!(eigenvalue_nf(br, 1.3, 1.0, 1.0, -2.0).unwrap(), 0.0);
        }
        let pts = critical_points_nf(1.3, 1.0, 1.0, -2.0).unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[1].class, Class::Degenerate);
        assert!((pts[1].q - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sign_laws() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let a = rng.random_range(0.1..2.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let b = rng.random_range(0.1..2.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let (n1, n2) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            for pt in critical_points_nf(a, b, n1, n2).unwrap() {
                if pt.class == Class::Degenerate {
                    continue;
                }
                // for b > 0 this is the sign(ab) law; for b < 0 the existence
                // condition on q² reverses, and only sign(a) survives
                let expected = match (pt.branch, a > 0.0) {
                    (Branch::Q1, _) => if a * n1 > 0.0 { Class::Centre } else { Class::Saddle },
                    (Branch::Q2Minus, true) | (Branch::Q2Plus, false) => Class::Saddle,
                    _ => Class::Centre,
                };
                assert_eq!(pt.class, expected, "{pt:?} a={a} b={b} nu=({n1},{n2})");
            }
        }
    }

    #[test]
    fn branch_labels_round_trip() {
        for br in [Branch::Q1, Branch::Q2Minus, Branch::Q2Plus, Branch::Numeric(7)] {
            assert_eq!(br.to_string().parse::<Branch>().unwrap(), br);
        }
        assert!("Q3".parse::<Branch>().is_err());
    }

    #[test]
    fn numeric_matches_closed_form_example() {
        let m = nf_model(1.0, 1.0, -1.0, 0.0);
        let num = numeric_critical_points(&m, 0.0, 1.0).unwrap();
        assert!(num.warning.is_none());
        let exact = critical_points_nf(1.0, 1.0, -1.0, 0.0).unwrap();
        assert_eq!(num.points.len(), exact.len());
        for (n, e) in num.points.iter().zip(&exact) {
            assert!((n.q - e.q).abs() < 1e-8 && n.p.abs() < 1e-8);
            assert!((n.lambda_squared - e.lambda_squared).abs() < 1e-8);
            assert_eq!(n.class, e.class);
        }
    }

    #[test]
    fn oscillator_origin_is_centre_before_the_bifurcation() {
        let m = Model::new(ModelId::Oscillator12, ModelParams::default()).unwrap();
        let num = numeric_critical_points(&m, -4.0, 0.4).unwrap();
        let origin = num
            .points
            .iter()
            .find(|c| c.q.abs() < 1e-9 && c.p.abs() < 1e-9)
            .expect("origin");
        assert_eq!(origin.class, Class::Centre);
    }

    #[test]
    fn hirzebruch_origin_degenerate_at_candidate() {
        let m = Model::new(ModelId::Hirzebruch, ModelParams::default()).unwrap();
        let num = numeric_critical_points(&m, 2.0, 0.2).unwrap();
        let origin = num
            .points
            .iter()
            .find(|c| c.q.abs() < 1e-6 && c.p.abs() < 1e-6)
            .expect("origin");
        assert!(origin.lambda_squared.abs() <= 1e-8);
        // printed radical: λ² = (-16j²t² + 64jt² - 49t² + 2t - 1)/4
        for (j, t) in [(1.5, 0.3), (2.2, 0.1), (2.7, 0.6)] {
            let printed = (-16.0 * j * j * t * t + 64.0 * j * t * t - 49.0 * t * t + 2.0 * t - 1.0) / 4.0;
            let (_, h) = local_derivatives(&m, 0.0, 0.0, j, t).unwrap();
            let lambda2 = -(h[0][0] * h[1][1] - h[0][1] * h[1][0]);
            assert!((lambda2 - printed).abs() < 1e-12, "{lambda2} vs {printed}");
        }
    }

    #[test]
    fn numeric_points_are_z2_canonical_and_sorted() {
        let m = nf_model(1.0, 1.0, 0.5, -2.0);
        let num = numeric_critical_points(&m, 0.0, 1.0).unwrap();
        assert_eq!(num.points.len(), 3);
        for w in num.points.windows(2) {
            assert!(w[0].q < w[1].q);
        }
        assert!(num.points.iter().all(|c| c.q >= 0.0));
    }
}
