//! Built-in two-parameter families of reduced one-degree-of-freedom Hamiltonians.
//!
//! Every model is written once, generically over [`Scalar`], so the same code
//! path produces point values (`f64`) and Taylor jets ([`Jet`]).

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jets::Jet;

/// Arithmetic needed to evaluate a reduced Hamiltonian.
pub trait Scalar:
    Clone
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Mul<f64, Output = Self>
    + Add<f64, Output = Self>
    + Neg<Output = Self>
{
    /// Square root, failing with a domain error naming the radicand.
    fn checked_sqrt(&self, radicand: &str) -> Result<Self>;
}

impl Scalar for f64 {
    fn checked_sqrt(&self, radicand: &str) -> Result<f64> {
        if *self > 0.0 {
            Ok(self.sqrt())
        } else {
            Err(Error::Domain(format!(
                "square root of {radicand} has nonpositive radicand {self}"
            )))
        }
    }
}

impl Scalar for Jet {
    fn checked_sqrt(&self, radicand: &str) -> Result<Jet> {
        self.sqrt().map_err(|_| {
            Error::Domain(format!(
                "square root of {radicand} has nonpositive radicand {}",
                self.constant_term()
            ))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum ModelId {
    NormalForm,
    Oscillator12,
    Oscillator12Cubic,
    Hirzebruch,
}

impl ModelId {
    pub const ALL: [ModelId; 4] = [
        ModelId::NormalForm,
        ModelId::Oscillator12,
        ModelId::Oscillator12Cubic,
        ModelId::Hirzebruch,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelId::NormalForm => "normal-form",
            ModelId::Oscillator12 => "osc12",
            ModelId::Oscillator12Cubic => "osc12-cubic",
            ModelId::Hirzebruch => "hirzebruch",
        }
    }

    pub fn is_oscillator(self) -> bool {
        matches!(self, ModelId::Oscillator12 | ModelId::Oscillator12Cubic)
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for ModelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<ModelId> {
        ModelId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| {
                Error::Parse(format!(
                    "unknown model {s:?} (expected normal-form, osc12, osc12-cubic or hirzebruch)"
                ))
            })
    }
}

/// `ν(j, t) = c_jj j² + c_j j + c_t t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NuSpec {
    pub c_jj: f64,
    pub c_j: f64,
    pub c_t: f64,
}

impl NuSpec {
    pub const fn new(c_jj: f64, c_j: f64, c_t: f64) -> NuSpec {
        NuSpec { c_jj, c_j, c_t }
    }

    pub fn eval(&self, j: f64, t: f64) -> f64 {
        self.c_jj * j * j + self.c_j * j + self.c_t * t
    }
}

impl FromStr for NuSpec {
    type Err = Error;

    /// Parses sums of `j2`, `j` and `t` terms with optional numeric factors,
    /// e.g. `j2-t`, `3j-t`, `-j2+t`, `0.5j2+2j-t`.
    fn from_str(s: &str) -> Result<NuSpec> {
        let bad = || Error::Parse(format!("cannot parse ν expression {s:?}"));
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return Err(bad());
        }
        let mut spec = NuSpec::new(0.0, 0.0, 0.0);
        let mut rest = compact.as_str();
        while !rest.is_empty() {
            let (sign, body) = match rest.as_bytes()[0] {
                b'+' => (1.0, &rest[1..]),
                b'-' => (-1.0, &rest[1..]),
                _ => (1.0, rest),
            };
            let end = body.find(['+', '-']).unwrap_or(body.len());
            let (term, tail) = body.split_at(end);
            rest = tail;
            let var_at = term.find(['j', 't']).ok_or_else(bad)?;
            let (factor, var) = term.split_at(var_at);
            let factor = match factor.trim_end_matches('*') {
                "" => 1.0,
                f => f.parse::<f64>().map_err(|_| bad())?,
            };
            let slot = match var {
                "j2" | "j^2" => &mut spec.c_jj,
                "j" => &mut spec.c_j,
                "t" => &mut spec.c_t,
                _ => return Err(bad()),
            };
            *slot += sign * factor;
        }
        Ok(spec)
    }
}

impl fmt::Display for NuSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (c, var) in [(self.c_jj, "j2"), (self.c_j, "j"), (self.c_t, "t")] {
            if c == 0.0 {
                continue;
            }
            let sign = if c < 0.0 {
                "-"
            } else if first {
                ""
            } else {
                "+"
            };
            let mag = c.abs();
            if mag == 1.0 {
                write!(f, "{sign}{var}")?;
            } else {
                write!(f, "{sign}{mag}{var}")?;
            }
            first = false;
        }
        if first {
            f.write_str("0j")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Oscillator coupling.
    pub epsilon: f64,
    /// Normal-form coefficient of `p²/2`.
    pub a: f64,
    /// Normal-form coefficient of `q⁶/6`.
    pub b: f64,
    pub nu1: NuSpec,
    pub nu2: NuSpec,
    /// Sign of the eliminated coordinate in the reductions (`q₂` or `x₄`).
    pub branch_sign: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            epsilon: 0.125,
            a: 1.0,
            b: 1.0,
            nu1: NuSpec::new(1.0, 0.0, -1.0),
            nu2: NuSpec::new(0.0, 3.0, -1.0),
            branch_sign: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainWindow {
    pub j_min: f64,
    pub j_max: f64,
}

impl DomainWindow {
    pub fn new(j_min: f64, j_max: f64) -> Result<DomainWindow> {
        if !(j_min < j_max) || !j_min.is_finite() || !j_max.is_finite() {
            return Err(Error::Usage(format!(
                "empty j-window [{j_min}, {j_max}]"
            )));
        }
        Ok(DomainWindow { j_min, j_max })
    }

    /// `n` evenly spaced samples including both ends.
    pub fn samples(&self, n: usize) -> Vec<f64> {
        let span = self.j_max - self.j_min;
        (0..n)
            .map(|i| {
                if i + 1 == n {
                    self.j_max
                } else {
                    self.j_min + span * i as f64 / (n - 1) as f64
                }
            })
            .collect()
    }
}

/// A validated model: identifier plus constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Model {
    id: ModelId,
    params: ModelParams,
}

impl Model {
    pub fn new(id: ModelId, params: ModelParams) -> Result<Model> {
        let mut problems = Vec::new();
        match id {
            ModelId::NormalForm => {
                if params.a == 0.0 || !params.a.is_finite() {
                    problems.push("normal-form coefficient a must be nonzero");
                }
                if params.b == 0.0 || !params.b.is_finite() {
                    problems.push("normal-form coefficient b must be nonzero");
                }
            }
            ModelId::Oscillator12 | ModelId::Oscillator12Cubic => {
                if !(params.epsilon > 0.0) || !params.epsilon.is_finite() {
                    problems.push("epsilon must be positive");
                }
            }
            ModelId::Hirzebruch => {}
        }
        if params.branch_sign != 1.0 && params.branch_sign != -1.0 {
            problems.push("branch sign must be +1 or -1");
        }
        if problems.is_empty() {
            Ok(Model { id, params })
        } else {
            Err(Error::Usage(problems.join("; ")))
        }
    }

    pub fn id(&self) -> ModelId {
        self.id
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Reduced Hamiltonian at `(q, p)` on the level `J = j`.
    pub fn evaluate_reduced(&self, q: f64, p: f64, j: f64, t: f64) -> Result<f64> {
        self.hamiltonian(q, p, j, t)
    }

    /// Taylor jet of the reduced Hamiltonian about `(q0, p0)`, in the shifted
    /// variables `(q - q0, p - p0)`.
    pub fn local_jet(&self, q0: f64, p0: f64, j: f64, t: f64, cap: usize) -> Result<Jet> {
        let q = Jet::var_q(cap, q0)?;
        let p = Jet::var_p(cap, p0)?;
        self.hamiltonian(q, p, j, t)
    }

    /// Jet of the reduced Hamiltonian at the origin; odd orders are dropped.
    pub fn reduced_jet(&self, j: f64, t: f64, cap: usize) -> Result<Jet> {
        let jet = self.local_jet(0.0, 0.0, j, t, cap)?;
        debug_assert!(jet.max_abs_odd() <= 1e-12 * jet.max_abs().max(1.0));
        Ok(jet.even_part())
    }

    /// Candidate double-flip point `(j₀, t₀)`.
    pub fn candidate(&self) -> (f64, f64) {
        let eps = self.params.epsilon;
        match self.id {
            ModelId::NormalForm => (0.0, 0.0),
            ModelId::Oscillator12 => (-1.0 / (16.0 * eps * eps), 8.0 * eps / (8.0 * eps + 1.0)),
            ModelId::Oscillator12Cubic => {
                // ν₁ = 2(1-t) + 6tεj² - 2t√-j; ∂ν₁/∂j = 0 gives (-j)^{3/2} = 1/(12ε)
                let s = (12.0 * eps).powf(-1.0 / 3.0);
                (-s * s, 4.0 / (4.0 + 3.0 * s))
            }
            ModelId::Hirzebruch => (2.0, 0.2),
        }
    }

    /// Admissible j-range bracketing the candidate and both flip loci.
    pub fn default_window(&self) -> DomainWindow {
        match self.id {
            ModelId::NormalForm => DomainWindow {
                j_min: -1.0,
                j_max: 1.0,
            },
            ModelId::Oscillator12 | ModelId::Oscillator12Cubic => DomainWindow {
                j_min: 4.0 * self.candidate().0,
                j_max: -1e-3,
            },
            ModelId::Hirzebruch => DomainWindow {
                j_min: 1.0 + 1e-4,
                j_max: 3.0 - 1e-4,
            },
        }
    }

    /// Whether the origin of the reduced phase space lies inside the model domain.
    pub fn origin_admissible(&self, j: f64) -> bool {
        match self.id {
            ModelId::NormalForm => j.is_finite(),
            ModelId::Oscillator12 | ModelId::Oscillator12Cubic => j < 0.0,
            ModelId::Hirzebruch => j > 1.0 && j < 3.0,
        }
    }

    /// Typical size of the (q, p) region holding the critical points near the origin.
    pub fn phase_scale(&self, j: f64) -> f64 {
        match self.id {
            ModelId::NormalForm => 2.0,
            ModelId::Oscillator12 | ModelId::Oscillator12Cubic => (-2.0 * j).max(0.0).sqrt().min(2.0).max(0.05),
            // x₄² ≤ 2 bounds q² + p² by 2(3 - j)
            ModelId::Hirzebruch => (6.0 - 2.0 * j).max(0.0).sqrt().min(2.0).max(0.05),
        }
    }

    fn hamiltonian<S: Scalar>(&self, q: S, p: S, j: f64, t: f64) -> Result<S> {
        let pr = &self.params;
        let q2 = q.clone() * q.clone();
        let p2 = p.clone() * p.clone();
        match self.id {
            ModelId::NormalForm => {
                let nu1 = pr.nu1.eval(j, t);
                let nu2 = pr.nu2.eval(j, t);
                let q4 = q2.clone() * q2.clone();
                let q6 = q4.clone() * q2.clone();
                Ok(p2 * (pr.a / 2.0) + q6 * (pr.b / 6.0) + q2 * (nu1 / 2.0) + q4 * (nu2 / 4.0))
            }
            ModelId::Oscillator12 | ModelId::Oscillator12Cubic => {
                // J = j with p₂ = 0 fixes q₂² = (q² + p² - 2j)/2
                let r = q2 + p2;
                let q2_sq = (r.clone() + (-2.0 * j)) * 0.5;
                let q2_coord = q2_sq.checked_sqrt("q2² = (q² + p² - 2j)/2")? * pr.branch_sign;
                let big_x = q.clone() * p.clone() * q2_coord * 2.0;
                let big_r = r + (-j);
                let power = if self.id == ModelId::Oscillator12 {
                    big_r.clone() * big_r.clone()
                } else {
                    big_r.clone() * big_r.clone() * big_r.clone()
                };
                Ok(big_r * (1.0 - t) + (big_x + power * pr.epsilon) * t)
            }
            ModelId::Hirzebruch => {
                // chart U₂,₃ with y₄ = 0 and J = j fixing x₄² = j - 1 + (x₁² + y₁²)/2
                let r = q2.clone() + p2.clone();
                let x4_sq = r * 0.5 + (j - 1.0);
                let x4 = x4_sq.checked_sqrt("x4² = j - 1 + (x1² + y1²)/2")? * pr.branch_sign;
                let x3_sq = -x4_sq.clone() + 2.0;
                let x3 = x3_sq.checked_sqrt("x3² = 2 - x4²")?;
                let big_r = (-x4_sq * 0.5) + 1.0;
                let big_x = x3 * x4 * (q2 - p2);
                Ok(big_r * (1.0 - t) + big_x * t)
            }
        }
    }
}

impl From<ModelId> for String {
    fn from(v: ModelId) -> String {
        v.to_string()
    }
}

impl TryFrom<String> for ModelId {
    type Error = Error;

    fn try_from(s: String) -> Result<ModelId> {
        s.parse()
    }
}
