//! Reproduction of the published reference values, as an expected-vs-computed table.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::error::Result;
use crate::flip::{solve_flip_locus, FlipKind, FlipSide};
use crate::models::{Model, ModelId, ModelParams};
use crate::normalform::{analyze_point, BConvention, FdOptions, RESIDUAL_TOL};

/// How a computed value is compared with its reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Tolerance {
    Absolute(f64),
    Relative(f64),
    Exact,
}

impl Tolerance {
    fn admits(self, expected: f64, computed: f64) -> bool {
        match self {
            Tolerance::Absolute(tol) => (computed - expected).abs() <= tol,
            Tolerance::Relative(tol) => (computed - expected).abs() <= tol * expected.abs(),
            Tolerance::Exact => computed == expected,
        }
    }

    fn describe(self) -> String {
        match self {
            Tolerance::Absolute(t) => format!("abs {t:.0e}"),
            Tolerance::Relative(t) => format!("rel {t:.0e}"),
            Tolerance::Exact => "exact".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    /// Acceptance criterion the row belongs to.
    pub criterion: u8,
    pub name: String,
    pub expected: String,
    pub computed: String,
    pub tolerance: String,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SelftestReport {
    pub checks: Vec<Check>,
    pub elapsed: Duration,
}

impl SelftestReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// Fixed-width table, one row per check and a closing summary line.
    pub fn table(&self) -> String {
        let widths = [4, 44, 24, 24, 10];
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<w0$} {:<w1$} {:<w2$} {:<w3$} {:<w4$} RESULT",
            "CRIT",
            "CHECK",
            "EXPECTED",
            "COMPUTED",
            "TOLERANCE",
            w0 = widths[0],
            w1 = widths[1],
            w2 = widths[2],
            w3 = widths[3],
            w4 = widths[4]
        );
        for c in &self.checks {
            let _ = writeln!(
                out,
                "{:<w0$} {:<w1$} {:<w2$} {:<w3$} {:<w4$} {}",
                c.criterion,
                c.name,
                c.expected,
                c.computed,
                c.tolerance,
                if c.passed { "PASS" } else { "FAIL" },
                w0 = widths[0],
                w1 = widths[1],
                w2 = widths[2],
                w3 = widths[3],
                w4 = widths[4]
            );
        }
        let failed = self.failures().count();
        let _ = writeln!(
            out,
            "{} checks, {} passed, {} failed in {:.2} s",
            self.checks.len(),
            self.checks.len() - failed,
            failed,
            self.elapsed.as_secs_f64()
        );
        out
    }
}

fn show(x: f64) -> String {
    if x != 0.0 && x.abs() < 1e-3 {
        format!("{x:.4e}")
    } else {
        format!("{x:.10}")
    }
}

struct Table(Vec<Check>);

impl Table {
    fn value(&mut self, criterion: u8, name: &str, expected: f64, computed: f64, tol: Tolerance) {
        self.0.push(Check {
            criterion,
            name: name.into(),
            expected: show(expected),
            computed: show(computed),
            tolerance: tol.describe(),
            passed: tol.admits(expected, computed),
        });
    }

    fn label(&mut self, criterion: u8, name: &str, expected: &str, computed: &str) {
        self.0.push(Check {
            criterion,
            name: name.into(),
            expected: expected.into(),
            computed: computed.into(),
            tolerance: "exact".into(),
            passed: expected == computed,
        });
    }
}

fn model(id: ModelId, epsilon: f64) -> Result<Model> {
    Model::new(id, ModelParams { epsilon, ..Default::default() })
}

/// Hirzebruch flip loci `(8t ± √((5t-1)(3t+1)))/(4t)`.
pub fn hirzebruch_loci(t: f64) -> (f64, f64) {
    let r = ((5.0 * t - 1.0) * (3.0 * t + 1.0)).sqrt();
    ((8.0 * t - r) / (4.0 * t), (8.0 * t + r) / (4.0 * t))
}

/// Oscillator flip loci `(4ε - t(4ε+1) ± √t √(t(8ε+1) - 8ε))/(8tε²)`.
pub fn oscillator_loci(eps: f64, t: f64) -> (f64, f64) {
    let base = 4.0 * eps - t * (4.0 * eps + 1.0);
    let r = t.sqrt() * (t * (8.0 * eps + 1.0) - 8.0 * eps).sqrt();
    let d = 8.0 * t * eps * eps;
    ((base - r) / d, (base + r) / d)
}

/// `count` values of `t` evenly spaced in `(lo, hi]`.
pub fn post_bifurcation_ts(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (1..=count).map(|k| lo + (hi - lo) * k as f64 / count as f64).collect()
}

fn flip_rows(table: &mut Table, label: &str, m: &Model, ts: &[f64], loci: impl Fn(f64) -> (f64, f64)) -> Result<()> {
    let window = m.default_window();
    let mut kinds = [Vec::new(), Vec::new()];
    let mut worst: f64 = 0.0;
    let mut count_ok = true;
    for &t in ts {
        let events = solve_flip_locus(m, t, &window, 6)?;
        let simple: Vec<_> = events.iter().filter(|e| e.side != FlipSide::Double).collect();
        if simple.len() != 2 {
            count_ok = false;
            continue;
        }
        let (lo, hi) = loci(t);
        worst = worst
            .max((simple[0].j0 - lo).abs() / lo.abs())
            .max((simple[1].j0 - hi).abs() / hi.abs());
        kinds[0].push(simple[0].kind);
        kinds[1].push(simple[1].kind);
    }
    table.label(5, &format!("{label} two simple loci per t ({} values)", ts.len()), "true", &count_ok.to_string());
    table.value(5, &format!("{label} loci vs closed form, max rel err"), 0.0, worst, Tolerance::Absolute(1e-6));
    for (side, want, got) in [("minus", FlipKind::Flip, &kinds[0]), ("plus", FlipKind::DualFlip, &kinds[1])] {
        let flips = got.iter().filter(|&&k| k == FlipKind::Flip).count();
        let duals = got.iter().filter(|&&k| k == FlipKind::DualFlip).count();
        let summary = match (flips, duals) {
            (n, 0) if n == got.len() => FlipKind::Flip.to_string(),
            (0, n) if n == got.len() => FlipKind::DualFlip.to_string(),
            _ => format!("{flips} flip / {duals} dual"),
        };
        table.label(5, &format!("{label} {side} locus kind"), &want.to_string(), &summary);
    }
    Ok(())
}

/// Runs every check; model or numerical errors surface as `Err`.
pub fn run_selftest() -> Result<SelftestReport> {
    let start = Instant::now();
    let mut table = Table(Vec::new());
    let opts = FdOptions::default();

    // oscillator at ε = 1/8, candidate (-4, 1/2)
    let osc = model(ModelId::Oscillator12, 0.125)?;
    let (j0, t0) = osc.candidate();
    table.value(1, "osc12 candidate j0 = -1/(16 eps^2)", -4.0, j0, Tolerance::Relative(1e-12));
    table.value(1, "osc12 candidate t0 = 8 eps/(8 eps+1)", 0.5, t0, Tolerance::Relative(1e-12));
    let clock = Instant::now();
    let p = analyze_point(&osc, j0, t0, &opts, BConvention::Sextic)?;
    let point_time = clock.elapsed().as_secs_f64();
    let c = p.coefficients;
    table.value(1, "osc12 a = 8/(8 eps+1)", 4.0, c.a, Tolerance::Relative(1e-6));
    table.value(1, "osc12 |nu1| at candidate", 0.0, c.nu1, Tolerance::Absolute(1e-8));
    table.value(1, "osc12 |nu2| at candidate", 0.0, c.nu2, Tolerance::Absolute(1e-8));
    table.value(1, "osc12 b = 96 eps^4/(8 eps+1) (sextic)", 3.0 / 256.0, c.b_sextic, Tolerance::Relative(1e-6));
    table.value(1, "osc12 point analysis seconds", 0.0, point_time, Tolerance::Absolute(1.0));
    let d = p.derivatives;
    table.value(2, "osc12 d2nu1/dj2", 1.0 / 32.0, d.d2_nu1_dj2, Tolerance::Relative(1e-4));
    table.value(2, "osc12 dnu1/dt", -4.0, d.d_nu1_dt, Tolerance::Relative(1e-4));
    table.value(2, "osc12 dnu2/dj", -1.0 / 32.0, d.d_nu2_dj, Tolerance::Relative(1e-4));
    table.label(2, "osc12 saddle-node conditions", "true", &p.saddle_node.passed.to_string());
    let conc = p.concavity.map(|k| (k.ratio, k.verdict));
    table.value(3, "osc12 concavity ratio (sextic b)", 4.0 / 3.0, conc.map_or(f64::NAN, |k| k.0), Tolerance::Absolute(1e-4));
    table.label(3, "osc12 concavity verdict", "OppositeDirection", &conc.map_or("none".into(), |k| format!("{:?}", k.1)));

    // Hirzebruch at (2, 1/5)
    let hirz = model(ModelId::Hirzebruch, 0.125)?;
    let (j0, t0) = hirz.candidate();
    let p = analyze_point(&hirz, j0, t0, &opts, BConvention::Sextic)?;
    let c = p.coefficients;
    let d = p.derivatives;
    table.value(4, "hirzebruch a", -0.8, c.a, Tolerance::Absolute(1e-4));
    table.value(4, "hirzebruch d2nu1/dj2", -0.4, d.d2_nu1_dj2, Tolerance::Absolute(1e-4));
    table.value(4, "hirzebruch dnu1/dt", 0.4, d.d_nu1_dt, Tolerance::Absolute(1e-4));
    table.value(4, "hirzebruch dnu2/dj", -0.4, d.d_nu2_dj, Tolerance::Absolute(1e-4));
    table.value(4, "hirzebruch origin lambda^2 = -a nu1", 0.0, -c.a * c.nu1, Tolerance::Absolute(1e-8));
    table.value(3, "hirzebruch b (sextic)", -0.15, c.b_sextic, Tolerance::Relative(1e-6));
    let ratio = d.d_nu2_dj * d.d_nu2_dj / (2.0 * -0.15 * d.d2_nu1_dj2);
    table.value(3, "hirzebruch concavity ratio (b = -3/20)", 4.0 / 3.0, ratio, Tolerance::Absolute(1e-4));
    let verdict = p.concavity.map_or("none".into(), |k| format!("{:?}", k.verdict));
    table.label(3, "hirzebruch concavity verdict", "OppositeDirection", &verdict);

    // flip classification along both examples
    flip_rows(&mut table, "osc12", &osc, &post_bifurcation_ts(0.5, 0.9, 20), |t| oscillator_loci(0.125, t))?;
    flip_rows(&mut table, "hirzebruch", &hirz, &post_bifurcation_ts(0.2, 0.8, 20), hirzebruch_loci)?;

    // modified oscillator at ε = 9/256
    let cubic = model(ModelId::Oscillator12Cubic, 9.0 / 256.0)?;
    let (j0, t0) = cubic.candidate();
    table.value(6, "osc12-cubic candidate j0", -16.0 / 9.0, j0, Tolerance::Relative(1e-12));
    table.value(6, "osc12-cubic candidate t0", 0.5, t0, Tolerance::Relative(1e-12));
    let p = analyze_point(&cubic, j0, t0, &opts, BConvention::Sextic)?;
    table.label(6, "osc12-cubic saddle-node conditions", "true", &p.saddle_node.passed.to_string());
    table.label(6, "osc12-cubic double flip verdict", "Affirmed", &format!("{:?}", p.verdict));
    table.value(6, "osc12-cubic normalization residual", 0.0, p.coefficients.residual, Tolerance::Absolute(RESIDUAL_TOL));

    // degenerate normal-form example
    let nf = Model::new(
        ModelId::NormalForm,
        ModelParams {
            nu1: "j2-t".parse()?,
            nu2: "2j-t".parse()?,
            ..Default::default()
        },
    )?;
    let p = analyze_point(&nf, 0.0, 0.0, &opts, BConvention::Sextic)?;
    table.value(8, "normal form nu2 = 2j-t concavity ratio", 1.0, p.concavity.map_or(f64::NAN, |k| k.ratio), Tolerance::Absolute(1e-8));
    table.label(
        8,
        "normal form nu2 = 2j-t concavity verdict",
        "Degenerate",
        &p.concavity.map_or("none".into(), |k| format!("{:?}", k.verdict)),
    );
    table.label(8, "normal form nu2 = 2j-t double flip", "Degenerate", &format!("{:?}", p.verdict));

    Ok(SelftestReport {
        checks: table.0,
        elapsed: start.elapsed(),
    })
}
