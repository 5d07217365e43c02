//! Flip and dual flip bifurcations along the roots of `ν₁(·, t)`.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{DomainWindow, Model};
use crate::normalform::{normalize_model, NormalFormCoefficients};

/// `|a ν₂|` at or below this leaves the kind undetermined.
pub const FLIP_TOL: f64 = 1e-8;
/// Bisection stops once `|ν₁|` is this small.
pub const ROOT_TOL: f64 = 1e-10;
/// Samples of the root scan.
pub const SCAN_SAMPLES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlipKind {
    Flip,
    DualFlip,
    Undetermined,
}

impl fmt::Display for FlipKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            FlipKind::Flip => "flip",
            FlipKind::DualFlip => "dual-flip",
            FlipKind::Undetermined => "undetermined",
        })
    }
}

/// Which root of `ν₁(·, t)`: ascending `j`, the first is `Minus`.
/// `Double` marks a root where `ν₁` touches zero without changing sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlipSide {
    Minus,
    Plus,
    Double,
}

impl fmt::Display for FlipSide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            FlipSide::Minus => "minus",
            FlipSide::Plus => "plus",
            FlipSide::Double => "double",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlipEvent {
    pub j0: f64,
    pub t: f64,
    pub side: FlipSide,
    pub a: f64,
    pub nu1_at: f64,
    pub nu2_at: f64,
    pub kind: FlipKind,
}

/// Sign rule: `a ν₂ < 0` is dual.
pub fn flip_type(a: f64, nu2: f64) -> FlipKind {
    let s = a * nu2;
    if s < -FLIP_TOL {
        FlipKind::DualFlip
    } else if s > FLIP_TOL {
        FlipKind::Flip
    } else {
        FlipKind::Undetermined
    }
}

/// Shape of the level set through the apex of the reduced phase space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeTangency {
    /// `∂v_h/∂u` at the apex, `-ν₁/a`.
    pub slope: f64,
    /// `∂²v₀/∂u²` at the apex, `-2ν₂/a`.
    pub curvature: f64,
}

pub fn cone_tangency(a: f64, nu1: f64, nu2: f64) -> Result<ConeTangency> {
    if a == 0.0 {
        return Err(Error::Precondition("cone tangency needs a != 0".into()));
    }
    Ok(ConeTangency {
        slope: -nu1 / a,
        curvature: -2.0 * nu2 / a,
    })
}

fn event(c: &NormalFormCoefficients, j0: f64, t: f64, side: FlipSide) -> FlipEvent {
    FlipEvent {
        j0,
        t,
        side,
        a: c.a,
        nu1_at: c.nu1,
        nu2_at: c.nu2,
        kind: flip_type(c.a, c.nu2),
    }
}

fn bisect(model: &Model, t: f64, mut lo: f64, mut hi: f64, f_lo: f64, cap: usize) -> Result<(f64, NormalFormCoefficients)> {
    let lo_positive = f_lo > 0.0;
    loop {
        let mid = 0.5 * (lo + hi);
        let c = normalize_model(model, mid, t, cap)?;
        if c.nu1.abs() <= ROOT_TOL || mid == lo || mid == hi {
            return Ok((mid, c));
        }
        if (c.nu1 > 0.0) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

/// Golden-section search for the minimum of `|ν₁|` on `[lo, hi]`.
fn touch_minimum(model: &Model, t: f64, mut lo: f64, mut hi: f64, cap: usize) -> Result<(f64, NormalFormCoefficients)> {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let f = |j: f64| normalize_model(model, j, t, cap).map(|c| (c.nu1.abs(), c));
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut c1) = f(x1)?;
    let (mut f2, mut c2) = f(x2)?;
    for _ in 0..100 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            c2 = c1;
            x1 = hi - g * (hi - lo);
            (f1, c1) = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            c1 = c2;
            x2 = lo + g * (hi - lo);
            (f2, c2) = f(x2)?;
        }
        if hi - lo <= 1e-15 * hi.abs().max(1.0) {
            break;
        }
    }
    Ok(if f1 <= f2 { (x1, c1) } else { (x2, c2) })
}

/// Roots of `j ↦ ν₁(j, t)` in `window`, each classified by [`flip_type`].
pub fn solve_flip_locus(model: &Model, t: f64, window: &DomainWindow, cap: usize) -> Result<Vec<FlipEvent>> {
    let js = window.samples(SCAN_SAMPLES);
    let coeffs: Vec<NormalFormCoefficients> = js
        .par_iter()
        .map(|&j| normalize_model(model, j, t, cap))
        .collect::<Result<_>>()?;
    let nu: Vec<f64> = coeffs.iter().map(|c| c.nu1).collect();

    let mut roots: Vec<(f64, NormalFormCoefficients, bool)> = Vec::new();
    for i in 0..js.len() {
        if nu[i] == 0.0 {
            roots.push((js[i], coeffs[i], false));
            continue;
        }
        if i + 1 < js.len() && nu[i + 1] != 0.0 && (nu[i] > 0.0) != (nu[i + 1] > 0.0) {
            let (j, c) = bisect(model, t, js[i], js[i + 1], nu[i], cap)?;
            roots.push((j, c, false));
        }
        // interior local minimum of |ν₁| without a sign change
        if i > 0 && i + 1 < js.len() && nu[i - 1] != 0.0 && nu[i + 1] != 0.0 {
            let same = (nu[i - 1] > 0.0) == (nu[i] > 0.0) && (nu[i] > 0.0) == (nu[i + 1] > 0.0);
            if same && nu[i].abs() <= nu[i - 1].abs() && nu[i].abs() < nu[i + 1].abs() {
                let (j, c) = touch_minimum(model, t, js[i - 1], js[i + 1], cap)?;
                if c.nu1.abs() <= ROOT_TOL {
                    roots.push((j, c, true));
                }
            }
        }
    }
    roots.sort_by(|x, y| x.0.total_cmp(&y.0));
    roots.dedup_by(|x, y| (x.0 - y.0).abs() <= 1e-12 * x.0.abs().max(1.0));

    let mut seen_simple = false;
    Ok(roots
        .into_iter()
        .map(|(j, c, touch)| {
            let side = if touch {
                FlipSide::Double
            } else if seen_simple {
                FlipSide::Plus
            } else {
                seen_simple = true;
                FlipSide::Minus
            };
            let mut ev = event(&c, j, t, side);
            if touch {
                // the sign rule needs a simple root of ν₁
                ev.kind = FlipKind::Undetermined;
            }
            ev
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ModelId, ModelParams};

    fn osc() -> Model {
        Model::new(ModelId::Oscillator12, ModelParams::default()).unwrap()
    }

    fn osc_roots(eps: f64, t: f64) -> (f64, f64) {
        let disc = (t * (8.0 * eps + 1.0) - 8.0 * eps).sqrt();
        let base = 4.0 * eps - t * (4.0 * eps + 1.0);
        let d = t.sqrt() * disc;
        ((base - d) / (8.0 * t * eps * eps), (base + d) / (8.0 * t * eps * eps))
    }

    #[test]
    fn sign_rule() {
        assert_eq!(flip_type(4.0, 1.0), FlipKind::Flip);
        assert_eq!(flip_type(-0.8, -1.0), FlipKind::Flip);
        assert_eq!(flip_type(4.0, -1.0), FlipKind::DualFlip);
        assert_eq!(flip_type(4.0, 0.0), FlipKind::Undetermined);
        assert_eq!(flip_type(1.0, 1e-9), FlipKind::Undetermined);
    }

    #[test]
    fn tangency_quantities() {
        assert_eq!(cone_tangency(4.0, 0.0, 1.0).unwrap().slope, 0.0);
        assert_eq!(cone_tangency(4.0, 0.0, 1.0).unwrap().curvature, -0.5);
        assert_eq!(cone_tangency(4.0, 0.0, -1.0).unwrap().curvature, 0.5);
        assert!(cone_tangency(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn curvature_sign_agrees_with_kind() {
        for a in [-2.0, -0.5, 0.5, 3.0] {
            for nu2 in [-1.5, -0.1, 0.2, 2.0] {
                let c = cone_tangency(a, 0.0, nu2).unwrap().curvature;
                let expected = if c > 0.0 { FlipKind::DualFlip } else { FlipKind::Flip };
                assert_eq!(flip_type(a, nu2), expected);
            }
        }
    }

    #[test]
    fn no_roots_before_the_bifurcation() {
        let m = osc();
        let ev = solve_flip_locus(&m, 0.4, &m.default_window(), 6).unwrap();
        assert!(ev.is_empty(), "{ev:?}");
    }

    #[test]
    fn oscillator_roots_after_the_bifurcation() {
        let m = osc();
        let ev = solve_flip_locus(&m, 0.6, &m.default_window(), 6).unwrap();
        assert_eq!(ev.len(), 2);
        let (lo, hi) = osc_roots(0.125, 0.6);
        assert!((ev[0].j0 - lo).abs() < 1e-8 * lo.abs());
        assert!((ev[1].j0 - hi).abs() < 1e-8 * hi.abs());
        assert!((ev[0].j0 + 9.9521).abs() < 1e-4 && (ev[1].j0 + 0.7145).abs() < 1e-4);
        assert_eq!((ev[0].side, ev[0].kind), (FlipSide::Minus, FlipKind::Flip));
        assert_eq!((ev[1].side, ev[1].kind), (FlipSide::Plus, FlipKind::DualFlip));
    }

    #[test]
    fn double_root_at_the_candidate() {
        let m = osc();
        let ev = solve_flip_locus(&m, 0.5, &m.default_window(), 6).unwrap();
        assert_eq!(ev.len(), 1, "{ev:?}");
        assert_eq!(ev[0].side, FlipSide::Double);
        assert!((ev[0].j0 + 4.0).abs() < 1e-3);
        assert_eq!(ev[0].kind, FlipKind::Undetermined);
    }

    #[test]
    fn loci_merge_as_t_decreases_to_t0() {
        let m = osc();
        let mut prev = f64::INFINITY;
        for k in 3..=10 {
            let t = 0.5 + 2f64.powi(-k);
            let ev = solve_flip_locus(&m, t, &m.default_window(), 6).unwrap();
            let simple: Vec<_> = ev.iter().filter(|e| e.side != FlipSide::Double).collect();
            assert_eq!(simple.len(), 2, "t = {t}: {ev:?}");
            let gap = simple[1].j0 - simple[0].j0;
            assert!(gap > 0.0 && gap < prev);
            prev = gap;
        }
    }
}
