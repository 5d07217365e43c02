//! Truncated bivariate Taylor expansions in the canonical pair `(q, p)`.
//!
//! A [`Jet`] stores every coefficient of `q^m p^n` with `m + n <= cap` in a
//! dense triangular array. Products, brackets and substitutions truncate to
//! the cap; nothing ever raises it.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

pub const DEFAULT_DEGREE_CAP: usize = 6;
pub const MAX_DEGREE_CAP: usize = 12;

const UNIMODULAR_TOL: f64 = 1e-12;

#[inline]
fn index(m: usize, n: usize) -> usize {
    let d = m + n;
    d * (d + 1) / 2 + n
}

#[inline]
fn len_for(cap: usize) -> usize {
    (cap + 1) * (cap + 2) / 2
}

#[derive(Clone, PartialEq)]
pub struct Jet {
    cap: usize,
    coeffs: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut list = f.debug_map();
        for (m, n, c) in self.terms() {
            if c != 0.0 {
                list.entry(&format_args!("q^{m} p^{n}"), &c);
            }
        }
        list.finish()?;
        write!(f, " (cap {})", self.cap)
    }
}

impl Jet {
    pub fn zero(cap: usize) -> Result<Jet> {
        if !(2..=MAX_DEGREE_CAP).contains(&cap) {
            return Err(Error::Usage(format!(
                "degree cap {cap} outside supported range 2..={MAX_DEGREE_CAP}"
            )));
        }
        Ok(Jet {
            cap,
            coeffs: vec![0.0; len_for(cap)],
        })
    }

    pub fn constant(cap: usize, value: f64) -> Result<Jet> {
        let mut jet = Jet::zero(cap)?;
        jet.coeffs[0] = value;
        Ok(jet)
    }

    pub fn monomial(cap: usize, m: usize, n: usize, coeff: f64) -> Result<Jet> {
        let mut jet = Jet::zero(cap)?;
        jet.set(m, n, coeff)?;
        Ok(jet)
    }

    /// `q0 + q` as a jet: the position coordinate expanded about `q0`.
    pub fn var_q(cap: usize, q0: f64) -> Result<Jet> {
        let mut jet = Jet::constant(cap, q0)?;
        jet.coeffs[index(1, 0)] = 1.0;
        Ok(jet)
    }

    pub fn var_p(cap: usize, p0: f64) -> Result<Jet> {
        let mut jet = Jet::constant(cap, p0)?;
        jet.coeffs[index(0, 1)] = 1.0;
        Ok(jet)
    }

    /// Build a jet from `(m, n, coeff)` triples; repeated exponents accumulate.
    pub fn from_terms(cap: usize, terms: &[(usize, usize, f64)]) -> Result<Jet> {
        let mut jet = Jet::zero(cap)?;
        for &(m, n, c) in terms {
            if m + n > cap {
                return Err(Error::Usage(format!(
                    "monomial q^{m} p^{n} exceeds degree cap {cap}"
                )));
            }
            jet.coeffs[index(m, n)] += c;
        }
        Ok(jet)
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    /// Coefficient of `q^m p^n`; zero above the cap.
    pub fn coeff(&self, m: usize, n: usize) -> f64 {
        if m + n > self.cap {
            0.0
        } else {
            self.coeffs[index(m, n)]
        }
    }

    pub fn set(&mut self, m: usize, n: usize, value: f64) -> Result<()> {
        if m + n > self.cap {
            return Err(Error::Usage(format!(
                "monomial q^{m} p^{n} exceeds degree cap {}",
                self.cap
            )));
        }
        self.coeffs[index(m, n)] = value;
        Ok(())
    }

    pub fn constant_term(&self) -> f64 {
        self.coeffs[0]
    }

    /// All `(m, n, coeff)` triples in graded order.
    pub fn terms(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..=self.cap).flat_map(move |d| {
            (0..=d).map(move |n| {
                let m = d - n;
                (m, n, self.coeffs[index(m, n)])
            })
        })
    }

    /// Degree-`d` homogeneous part, keeping the cap.
    pub fn homogeneous(&self, d: usize) -> Jet {
        let mut out = Jet {
            cap: self.cap,
            coeffs: vec![0.0; self.coeffs.len()],
        };
        if d <= self.cap {
            for n in 0..=d {
                let k = index(d - n, n);
                out.coeffs[k] = self.coeffs[k];
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |acc, c| acc.max(c.abs()))
    }

    pub fn max_abs_odd(&self) -> f64 {
        self.terms()
            .filter(|(m, n, _)| (m + n) % 2 == 1)
            .fold(0.0, |acc, (_, _, c)| acc.max(c.abs()))
    }

    /// Zero every odd-degree coefficient (projection onto Z2-invariant jets).
    pub fn even_part(&self) -> Jet {
        let mut out = self.clone();
        for (m, n, _) in self.terms().collect::<Vec<_>>() {
            if (m + n) % 2 == 1 {
                out.coeffs[index(m, n)] = 0.0;
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    /// Evaluate the truncated polynomial at `(q, p)`.
    pub fn eval(&self, q: f64, p: f64) -> f64 {
        let mut qpow = vec![1.0; self.cap + 1];
        let mut ppow = vec![1.0; self.cap + 1];
        for k in 1..=self.cap {
            qpow[k] = qpow[k - 1] * q;
            ppow[k] = ppow[k - 1] * p;
        }
        self.terms().map(|(m, n, c)| c * qpow[m] * ppow[n]).sum()
    }

    fn check_cap(&self, other: &Jet, op: &str) -> Result<()> {
        if self.cap != other.cap {
            Err(Error::Usage(format!(
                "{op}: mismatched degree caps {} and {}",
                self.cap, other.cap
            )))
        } else {
            Ok(())
        }
    }

    pub fn try_add(&self, other: &Jet) -> Result<Jet> {
        self.check_cap(other, "add")?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Jet {
            cap: self.cap,
            coeffs,
        })
    }

    pub fn try_sub(&self, other: &Jet) -> Result<Jet> {
        self.check_cap(other, "sub")?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Jet {
            cap: self.cap,
            coeffs,
        })
    }

    /// Truncated product (coefficient convolution).
    pub fn try_mul(&self, other: &Jet) -> Result<Jet> {
        self.check_cap(other, "mul")?;
        let cap = self.cap;
        let mut out = vec![0.0; self.coeffs.len()];
        for d1 in 0..=cap {
            for n1 in 0..=d1 {
                let a = self.coeffs[index(d1 - n1, n1)];
                if a == 0.0 {
                    continue;
                }
                for d2 in 0..=(cap - d1) {
                    for n2 in 0..=d2 {
                        let b = other.coeffs[index(d2 - n2, n2)];
                        if b != 0.0 {
                            out[index(d1 - n1 + d2 - n2, n1 + n2)] += a * b;
                        }
                    }
                }
            }
        }
        Ok(Jet { cap, coeffs: out })
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet {
            cap: self.cap,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn add_constant(&self, c: f64) -> Jet {
        let mut out = self.clone();
        out.coeffs[0] += c;
        out
    }

    /// Canonical Poisson bracket `{F, G} = F_q G_p - F_p G_q`, truncated.
    pub fn poisson_bracket(&self, other: &Jet) -> Result<Jet> {
        self.check_cap(other, "poisson_bracket")?;
        let cap = self.cap;
        let mut out = vec![0.0; self.coeffs.len()];
        let lhs: Vec<_> = self.terms().filter(|t| t.2 != 0.0).collect();
        let rhs: Vec<_> = other.terms().filter(|t| t.2 != 0.0).collect();
        for &(m1, n1, c1) in &lhs {
            for &(m2, n2, c2) in &rhs {
                let weight = (m1 * n2) as f64 - (n1 * m2) as f64;
                if weight == 0.0 {
                    continue;
                }
                // m1 + m2 >= 1 and n1 + n2 >= 1 whenever weight != 0
                let (m, n) = (m1 + m2 - 1, n1 + n2 - 1);
                if m + n <= cap {
                    out[index(m, n)] += weight * c1 * c2;
                }
            }
        }
        Ok(Jet { cap, coeffs: out })
    }

    /// Reciprocal series; requires a nonzero constant term.
    pub fn recip(&self) -> Result<Jet> {
        let a0 = self.coeffs[0];
        if a0 == 0.0 || !a0.is_finite() {
            return Err(Error::Domain(format!(
                "reciprocal of a jet with constant term {a0}"
            )));
        }
        // 1/(a0 (1 + n)) = (1/a0) sum (-n)^k, n nilpotent of order cap + 1
        let mut nil = self.scale(1.0 / a0);
        nil.coeffs[0] = 0.0;
        let neg = nil.scale(-1.0);
        let mut sum = Jet::constant(self.cap, 1.0)?;
        let mut power = Jet::constant(self.cap, 1.0)?;
        for _ in 0..self.cap {
            power = power.try_mul(&neg)?;
            sum = sum.try_add(&power)?;
        }
        Ok(sum.scale(1.0 / a0))
    }

    pub fn try_div(&self, other: &Jet) -> Result<Jet> {
        self.try_mul(&other.recip()?)
    }

    /// Principal square root via Newton's iteration `S <- (S + A/S) / 2`.
    pub fn sqrt(&self) -> Result<Jet> {
        let a0 = self.coeffs[0];
        if !(a0 > 0.0) {
            return Err(Error::Domain(format!(
                "square root of a jet with nonpositive constant term {a0}"
            )));
        }
        let mut s = Jet::constant(self.cap, a0.sqrt())?;
        // each step doubles the number of correct orders
        let min_steps = (usize::BITS - self.cap.leading_zeros()) as usize + 1;
        for step in 0..(4 * self.cap + 8) {
            let next = s.try_add(&self.try_div(&s)?)?.scale(0.5);
            let delta = next.try_sub(&s)?.max_abs();
            s = next;
            if step >= min_steps && delta <= 4.0 * f64::EPSILON * s.max_abs() {
                break;
            }
        }
        Ok(s)
    }

    /// `A ∘ M`: substitute `(q, p) -> M (q, p)`.
    pub fn substitute_linear(&self, map: &SymplecticMap2) -> Result<Jet> {
        map.check()?;
        let cap = self.cap;
        let [[m00, m01], [m10, m11]] = map.entries;
        let lin_q = Jet::from_terms(cap, &[(1, 0, m00), (0, 1, m01)])?;
        let lin_p = Jet::from_terms(cap, &[(1, 0, m10), (0, 1, m11)])?;
        let mut qpow = vec![Jet::constant(cap, 1.0)?];
        let mut ppow = vec![Jet::constant(cap, 1.0)?];
        for k in 1..=cap {
            qpow.push(qpow[k - 1].try_mul(&lin_q)?);
            ppow.push(ppow[k - 1].try_mul(&lin_p)?);
        }
        let mut out = Jet::zero(cap)?;
        for (m, n, c) in self.terms() {
            if c != 0.0 {
                let term = qpow[m].try_mul(&ppow[n])?.scale(c);
                out = out.try_add(&term)?;
            }
        }
        Ok(out)
    }

    /// Lie series `exp(ad_F) H = H + {F, H} + {F, {F, H}}/2 + ...`, truncated.
    ///
    /// `self` is `H`, `generator` is `F`. `F` must have no linear part.
    pub fn lie_transform(&self, generator: &Jet) -> Result<Jet> {
        self.check_cap(generator, "lie_transform")?;
        if generator.coeff(1, 0) != 0.0 || generator.coeff(0, 1) != 0.0 {
            return Err(Error::Usage(
                "lie_transform: generator has a nonzero linear part".into(),
            ));
        }
        let quadratic = !generator.homogeneous(2).is_zero();
        // Without a quadratic part ad_F raises degree by at least one, so the
        // series terminates after `cap` brackets. A quadratic part preserves
        // degree and the series is summed until the terms underflow.
        let max_terms = if quadratic { 200 } else { self.cap + 1 };
        let mut out = self.clone();
        let mut term = self.clone();
        for k in 1..=max_terms {
            term = generator.poisson_bracket(&term)?.scale(1.0 / k as f64);
            if term.is_zero() {
                break;
            }
            out = out.try_add(&term)?;
            if quadratic && term.max_abs() <= f64::EPSILON * 1e-3 * out.max_abs() {
                break;
            }
        }
        Ok(out)
    }
}

macro_rules! jet_binop {
    ($trait:ident, $method:ident, $call:ident) => {
        impl $trait<&Jet> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                self.$call(rhs).expect("jet operands must share a degree cap")
            }
        }
        impl $trait<Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                (&self).$method(rhs)
            }
        }
        impl $trait<Jet> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                self.$method(&rhs)
            }
        }
    };
}

jet_binop!(Add, add, try_add);
jet_binop!(Sub, sub, try_sub);
jet_binop!(Mul, mul, try_mul);

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Mul<f64> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(self, rhs: f64) -> Jet {
        self.add_constant(rhs)
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(self, rhs: f64) -> Jet {
        self.add_constant(-rhs)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

/// A 2×2 matrix with unit determinant acting on `(q, p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymplecticMap2 {
    entries: [[f64; 2]; 2],
}

impl SymplecticMap2 {
    pub fn new(entries: [[f64; 2]; 2]) -> Result<SymplecticMap2> {
        let map = SymplecticMap2 { entries };
        map.check()?;
        Ok(map)
    }

    pub fn identity() -> SymplecticMap2 {
        SymplecticMap2 {
            entries: [[1.0, 0.0], [0.0, 1.0]],
        }
    }

    /// Rotation taking `(q, p)` to `(cos θ q + sin θ p, -sin θ q + cos θ p)`.
    pub fn rotation(theta: f64) -> SymplecticMap2 {
        let (s, c) = theta.sin_cos();
        SymplecticMap2 {
            entries: [[c, s], [-s, c]],
        }
    }

    pub fn entries(&self) -> [[f64; 2]; 2] {
        self.entries
    }

    pub fn det(&self) -> f64 {
        let [[a, b], [c, d]] = self.entries;
        a * d - b * c
    }

    fn check(&self) -> Result<()> {
        let det = self.det();
        if (det - 1.0).abs() > UNIMODULAR_TOL || !det.is_finite() {
            Err(Error::Usage(format!(
                "linear map is not symplectic: det = {det}"
            )))
        } else {
            Ok(())
        }
    }

    pub fn compose(&self, rhs: &SymplecticMap2) -> SymplecticMap2 {
        let a = self.entries;
        let b = rhs.entries;
        let mut out = [[0.0; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (k, cell) in row.iter_mut().enumerate() {
                *cell = a[i][0] * b[0][k] + a[i][1] * b[1][k];
            }
        }
        SymplecticMap2 { entries: out }
    }

    pub fn apply(&self, q: f64, p: f64) -> (f64, f64) {
        let [[a, b], [c, d]] = self.entries;
        (a * q + b * p, c * q + d * p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(cap: usize) -> Jet {
        Jet::var_q(cap, 0.0).unwrap()
    }
    fn p(cap: usize) -> Jet {
        Jet::var_p(cap, 0.0).unwrap()
    }

    fn assert_close(a: &Jet, b: &Jet, tol: f64) {
        assert_eq!(a.cap(), b.cap());
        for ((m, n, x), (_, _, y)) in a.terms().zip(b.terms()) {
            assert!((x - y).abs() <= tol, "q^{m} p^{n}: {x} vs {y}");
        }
    }

    fn arb_jet(cap: usize, max_deg: usize) -> impl Strategy<Value = Jet> {
        let len = len_for(cap);
        prop::collection::vec(-2.0f64..2.0, len).prop_map(move |v| {
            let mut jet = Jet::zero(cap).unwrap();
            for (m, n, _) in jet.clone().terms() {
                if m + n <= max_deg {
                    jet.set(m, n, v[index(m, n)]).unwrap();
                }
            }
            jet
        })
    }

    #[test]
    fn monomial_product() {
        let qp = q(6) * p(6);
        assert_eq!(qp.coeff(1, 1), 1.0);
        assert_eq!(qp.terms().filter(|t| t.2 != 0.0).count(), 1);
    }

    #[test]
    fn products_truncate_to_cap() {
        let q2 = Jet::monomial(6, 2, 0, 1.0).unwrap();
        let q6 = &(&q2 * &q2) * &q2;
        assert_eq!(q6.coeff(6, 0), 1.0);
        let q2 = Jet::monomial(4, 2, 0, 1.0).unwrap();
        assert!((&(&q2 * &q2) * &q2).is_zero());
    }

    #[test]
    fn mismatched_caps_are_usage_errors() {
        let a = Jet::constant(4, 1.0).unwrap();
        let b = Jet::constant(6, 1.0).unwrap();
        assert!(matches!(a.try_mul(&b), Err(Error::Usage(_))));
        assert!(matches!(a.poisson_bracket(&b), Err(Error::Usage(_))));
        assert!(matches!(Jet::zero(1), Err(Error::Usage(_))));
    }

    #[test]
    fn canonical_brackets() {
        let one = q(6).poisson_bracket(&p(6)).unwrap();
        assert_close(&one, &Jet::constant(6, 1.0).unwrap(), 0.0);
        let u = Jet::monomial(6, 2, 0, 0.5).unwrap();
        let v = Jet::monomial(6, 0, 2, 0.5).unwrap();
        let w = Jet::monomial(6, 1, 1, 1.0).unwrap();
        assert_close(&u.poisson_bracket(&v).unwrap(), &w, 0.0);
    }

    #[test]
    fn sqrt_of_constant() {
        let s = Jet::constant(6, 4.0).unwrap().sqrt().unwrap();
        assert_close(&s, &Jet::constant(6, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn sqrt_matches_binomial_series() {
        // sqrt(1 + x) = sum binom(1/2, k) x^k with x = q^2
        let a = Jet::from_terms(6, &[(0, 0, 1.0), (2, 0, 1.0)]).unwrap();
        let s = a.sqrt().unwrap();
        let mut binom = 1.0;
        let mut expected = Jet::zero(6).unwrap();
        for k in 0..=3usize {
            expected.set(2 * k, 0, binom).unwrap();
            binom *= (0.5 - k as f64) / (k as f64 + 1.0);
        }
        assert_close(&s, &expected, 1e-15);
        assert!((s.coeff(2, 0) - 0.5).abs() < 1e-15);
        assert!((s.coeff(4, 0) + 0.125).abs() < 1e-15);
        assert!((s.coeff(6, 0) - 0.0625).abs() < 1e-15);
    }

    #[test]
    fn sqrt_rejects_nonpositive_constant() {
        let a = Jet::from_terms(6, &[(0, 0, 0.0), (2, 0, 1.0)]).unwrap();
        assert!(matches!(a.sqrt(), Err(Error::Domain(_))));
        assert!(matches!(
            Jet::constant(6, -1.0).unwrap().sqrt(),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn substitution_by_quarter_turn_rotation() {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let m = SymplecticMap2::new([[r, r], [-r, r]]).unwrap();
        let qp = q(6) + p(6);
        let sq = &qp * &qp;
        let out = sq.substitute_linear(&m).unwrap();
        let expected = Jet::monomial(6, 0, 2, 2.0).unwrap();
        assert_close(&out, &expected, 1e-15);
        let same = sq.substitute_linear(&SymplecticMap2::identity()).unwrap();
        assert_eq!(same, sq);
    }

    #[test]
    fn non_unimodular_map_rejected() {
        assert!(matches!(
            SymplecticMap2::new([[2.0, 0.0], [0.0, 1.0]]),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn lie_transform_identity_and_single_bracket() {
        let h = Jet::from_terms(6, &[(0, 0, 3.0), (0, 2, 1.5), (4, 0, 0.25)]).unwrap();
        assert_eq!(h.lie_transform(&Jet::zero(6).unwrap()).unwrap(), h);

        // H = (a/2) p^2, F = q^4: exp(ad_F) H = H + 4a q^3 p (next term has degree 6 -> q^6)
        let a = 3.0;
        let h = Jet::monomial(6, 0, 2, a / 2.0).unwrap();
        let f = Jet::monomial(6, 4, 0, 1.0).unwrap();
        let single = h.try_add(&f.poisson_bracket(&h).unwrap()).unwrap();
        assert!((single.coeff(3, 1) - 4.0 * a).abs() < 1e-15);
        let full = h.lie_transform(&f).unwrap();
        assert!((full.coeff(3, 1) - 4.0 * a).abs() < 1e-15);
        // ½ {q^4, 4a q^3 p} = ½ · 4 q^3 · 4a q^3 = 8a q^6
        assert!((full.coeff(6, 0) - 8.0 * a).abs() < 1e-12);
    }

    #[test]
    fn lie_transform_rejects_linear_generator() {
        let h = Jet::monomial(6, 0, 2, 1.0).unwrap();
        let f = Jet::monomial(6, 1, 0, 1.0).unwrap();
        assert!(matches!(h.lie_transform(&f), Err(Error::Usage(_))));
    }

    #[test]
    fn lie_transform_with_quadratic_generator_is_a_rotation() {
        // F = θ (q^2 + p^2)/2 generates a rotation; the flow preserves q^2 + p^2
        let theta = 0.3;
        let f = Jet::from_terms(6, &[(2, 0, theta / 2.0), (0, 2, theta / 2.0)]).unwrap();
        let r2 = Jet::from_terms(6, &[(2, 0, 1.0), (0, 2, 1.0)]).unwrap();
        let out = r2.lie_transform(&f).unwrap();
        assert_close(&out, &r2, 1e-14);
        let q_img = q(6).lie_transform(&f).unwrap();
        let expected = q(6)
            .substitute_linear(&SymplecticMap2::rotation(theta))
            .unwrap();
        let flipped = q(6)
            .substitute_linear(&SymplecticMap2::rotation(-theta))
            .unwrap();
        let d1 = q_img.try_sub(&expected).unwrap().max_abs();
        let d2 = q_img.try_sub(&flipped).unwrap().max_abs();
        assert!(d1.min(d2) < 1e-14);
    }

    #[test]
    fn brute_force_convolution_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let mut ta = Vec::new();
            let mut tb = Vec::new();
            for m in 0..=3 {
                for n in 0..=(3 - m) {
                    ta.push((m, n, rng.random_range(-1.0..1.0)));
                    tb.push((m, n, rng.random_range(-1.0..1.0)));
                }
            }
            let a = Jet::from_terms(6, &ta).unwrap();
            let b = Jet::from_terms(6, &tb).unwrap();
            let prod = a.try_mul(&b).unwrap();
            let mut expected = [[0.0f64; 7]; 7];
            for &(m1, n1, c1) in &ta {
                for &(m2, n2, c2) in &tb {
                    expected[m1 + m2][n1 + n2] += c1 * c2;
                }
            }
            for (m, n, c) in prod.terms() {
                assert!((c - expected[m][n]).abs() < 1e-14);
            }
        }
    }

    proptest! {
        #[test]
        fn bracket_is_antisymmetric(f in arb_jet(6, 6), g in arb_jet(6, 6)) {
            let fg = f.poisson_bracket(&g).unwrap();
            let gf = g.poisson_bracket(&f).unwrap();
            let scale = fg.max_abs().max(1.0);
            prop_assert!(fg.try_add(&gf).unwrap().max_abs() <= 1e-14 * scale);
            prop_assert!(f.poisson_bracket(&f).unwrap().max_abs() <= 1e-14 * scale);
        }

        #[test]
        fn jacobi_identity_below_cap(f in arb_jet(8, 3), g in arb_jet(8, 3), h in arb_jet(8, 3)) {
            // nested brackets of cubic jets reach degree 5 <= 8, so truncation never bites
            let a = f.poisson_bracket(&g.poisson_bracket(&h).unwrap()).unwrap();
            let b = g.poisson_bracket(&h.poisson_bracket(&f).unwrap()).unwrap();
            let c = h.poisson_bracket(&f.poisson_bracket(&g).unwrap()).unwrap();
            let sum = a.try_add(&b).unwrap().try_add(&c).unwrap();
            prop_assert!(sum.max_abs() < 1e-12);
        }

        #[test]
        fn product_commutes_and_associates(a in arb_jet(6, 6), b in arb_jet(6, 6), c in arb_jet(6, 6)) {
            let ab = a.try_mul(&b).unwrap();
            let scale = ab.max_abs().max(1.0);
            prop_assert!(ab.try_sub(&b.try_mul(&a).unwrap()).unwrap().max_abs() <= 1e-14 * scale);
            let left = ab.try_mul(&c).unwrap();
            let right = a.try_mul(&b.try_mul(&c).unwrap()).unwrap();
            let scale = left.max_abs().max(1.0);
            prop_assert!(left.try_sub(&right).unwrap().max_abs() <= 1e-14 * scale * 10.0);
        }

        #[test]
        fn sqrt_squares_back(a in arb_jet(6, 6)) {
            let mut a = a;
            a.set(0, 0, 2.0).unwrap();
            let s = a.sqrt().unwrap();
            prop_assert!((s.constant_term() - 2f64.sqrt()).abs() < 1e-15);
            prop_assert!(s.try_mul(&s).unwrap().try_sub(&a).unwrap().max_abs() < 1e-12);
        }

        #[test]
        fn substitution_preserves_brackets(a in arb_jet(6, 4), b in arb_jet(6, 4), theta in -3.0f64..3.0, shear in -2.0f64..2.0) {
            let m = SymplecticMap2::rotation(theta)
                .compose(&SymplecticMap2::new([[1.0, shear], [0.0, 1.0]]).unwrap());
            let lhs = a.substitute_linear(&m).unwrap()
                .poisson_bracket(&b.substitute_linear(&m).unwrap()).unwrap();
            let rhs = a.poisson_bracket(&b).unwrap().substitute_linear(&m).unwrap();
            let scale = rhs.max_abs().max(1.0);
            prop_assert!(lhs.try_sub(&rhs).unwrap().max_abs() < 1e-11 * scale);
        }

        #[test]
        fn substitution_composes(a in arb_jet(6, 6), t1 in -3.0f64..3.0, t2 in -3.0f64..3.0, s in -1.0f64..1.0) {
            let m1 = SymplecticMap2::rotation(t1);
            let m2 = SymplecticMap2::new([[1.0, 0.0], [s, 1.0]]).unwrap().compose(&SymplecticMap2::rotation(t2));
            let seq = a.substitute_linear(&m1).unwrap().substitute_linear(&m2).unwrap();
            let once = a.substitute_linear(&m1.compose(&m2)).unwrap();
            let scale = once.max_abs().max(1.0);
            prop_assert!(seq.try_sub(&once).unwrap().max_abs() < 1e-12 * scale);
        }

        #[test]
        fn lie_transform_keeps_constant_term(h in arb_jet(6, 6), f in arb_jet(6, 6)) {
            let mut f = f;
            f.set(1, 0, 0.0).unwrap();
            f.set(0, 1, 0.0).unwrap();
            f.set(2, 0, 0.0).unwrap();
            f.set(1, 1, 0.0).unwrap();
            f.set(0, 2, 0.0).unwrap();
            let out = h.lie_transform(&f).unwrap();
            prop_assert_eq!(out.constant_term(), h.constant_term());
        }

        #[test]
        fn quartic_generator_leaves_quadratic_part(h in arb_jet(6, 6), f in arb_jet(6, 6)) {
            let f4 = f.homogeneous(4);
            let out = h.lie_transform(&f4).unwrap();
            for d in 0..=2 {
                prop_assert_eq!(out.homogeneous(d), h.homogeneous(d));
            }
        }
    }
}
