//! Command-line front end: flag and config-file parsing, validation and the five commands.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::diagram::{
    emit_csv, emit_locus_csv, emit_locus_svg, emit_svg, format_float, sample_diagram, trace_locus,
    DiagramDocument, LocusDocument, LocusWindow, SvgStyle, DEFAULT_LOCUS_GRID,
};
use crate::error::{Error, Result};
use crate::flip::{solve_flip_locus, FlipEvent};
use crate::jets::{DEFAULT_DEGREE_CAP, MAX_DEGREE_CAP};
use crate::models::{DomainWindow, Model, ModelId, ModelParams, NuSpec};
use crate::normalform::{
    analyze_point, concavity_report, BConvention, ConcavityReport, DoubleFlipVerdict, FdOptions, PointAnalysis,
};
use crate::selftest::run_selftest;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NEGATIVE: i32 = 2;
pub const DEFAULT_DIAGRAM_SAMPLES: usize = 201;

#[derive(Debug, Parser)]
#[command(
    name = "biflip",
    version,
    about = "Normal forms, flip classification and bifurcation diagrams near a double flip bifurcation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: CommandName,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum CommandName {
    /// Normal form, ν derivatives, saddle-node and concavity tests at one point.
    Normalize,
    /// Flip and dual flip events along the roots of ν₁ at fixed t.
    Flip,
    /// Bifurcation diagram (critical values against j) at fixed t.
    Diagram,
    /// Zero sets of ν₁ and disc_b in the (j, t) plane.
    Locus,
    /// Reproduce the reference values and print a pass/fail table.
    Selftest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Format {
    Text,
    Csv,
    Svg,
    Json,
}

/// Every flag is optional here so that config-file values can fill the gaps.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// normal-form, osc12, osc12-cubic or hirzebruch.
    #[arg(long, global = true)]
    pub model: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub epsilon: Option<f64>,
    /// Normal-form coefficient of p²/2.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub a: Option<f64>,
    /// Normal-form coefficient of q⁶/6.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub b: Option<f64>,
    /// ν₁(j, t) as a sum of j2, j and t terms, e.g. `j2-t`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub nu1: Option<String>,
    /// ν₂(j, t), e.g. `3j-t`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub nu2: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub j: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub t: Option<f64>,
    /// Use the model's double-flip candidate (j₀, t₀).
    #[arg(long, global = true)]
    pub at_candidate: bool,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub j_min: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub j_max: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub t_min: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub t_max: Option<f64>,
    /// Samples along j (diagram) or grid size per axis (locus).
    #[arg(long, global = true)]
    pub n: Option<usize>,
    #[arg(long, global = true)]
    pub degree_cap: Option<usize>,
    /// Finite-difference step in both j and t.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub fd_step: Option<f64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Plot h + j instead of h in SVG diagrams.
    #[arg(long, global = true)]
    pub shift_by_j: bool,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// File of `key = value` lines; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

/// Validated settings for one command.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: &'static str,
    pub model: Model,
    pub j: Option<f64>,
    pub t: Option<f64>,
    pub j_window: DomainWindow,
    pub t_window: Option<(f64, f64)>,
    pub n: usize,
    pub degree_cap: usize,
    pub fd_step: Option<f64>,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub shift_by_j: bool,
    pub threads: Option<usize>,
}

const CONFIG_KEYS: [&str; 20] = [
    "model", "epsilon", "a", "b", "nu1", "nu2", "j", "t", "at-candidate", "j-min", "j-max", "t-min", "t-max",
    "n", "degree-cap", "fd-step", "out", "format", "shift-by-j", "threads",
];

/// Parse `key = value` lines; `#` starts a comment, `_` and `-` are interchangeable in keys.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    let mut problems = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            problems.push(format!("line {}: expected key = value", n + 1));
            continue;
        };
        let key = key.trim().replace('_', "-");
        if !CONFIG_KEYS.contains(&key.as_str()) {
            problems.push(format!("line {}: unknown key '{key}'", n + 1));
            continue;
        }
        map.insert(key, value.trim().to_string());
    }
    if problems.is_empty() {
        Ok(map)
    } else {
        Err(Error::Parse(format!("config: {}", problems.join("; "))))
    }
}

struct Merge<'a> {
    file: &'a BTreeMap<String, String>,
    problems: Vec<String>,
}

impl Merge<'_> {
    fn value<T: std::str::FromStr>(&mut self, flag: Option<T>, key: &str) -> Option<T> {
        if flag.is_some() {
            return flag;
        }
        let raw = self.file.get(key)?;
        match raw.parse() {
            Ok(v) => Some(v),
            Err(_) => {
                self.problems.push(format!("config value for {key} is invalid: '{raw}'"));
                None
            }
        }
    }

    fn switch(&mut self, flag: bool, key: &str) -> bool {
        flag || self.value::<bool>(None, key).unwrap_or(false)
    }
}

impl Flags {
    /// Merge with the config file and validate everything at once.
    pub fn resolve(self, command: CommandName) -> Result<RunConfig> {
        let file = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Io(format!("cannot read config {}: {e}", path.display())))?;
                parse_config(&text)?
            }
            None => BTreeMap::new(),
        };
        let mut m = Merge { file: &file, problems: Vec::new() };
        let model_name = m.value(self.model, "model");
        let epsilon = m.value(self.epsilon, "epsilon");
        let a = m.value(self.a, "a");
        let b = m.value(self.b, "b");
        let nu1 = m.value(self.nu1, "nu1");
        let nu2 = m.value(self.nu2, "nu2");
        let j = m.value(self.j, "j");
        let t = m.value(self.t, "t");
        let at_candidate = m.switch(self.at_candidate, "at-candidate");
        let j_min = m.value(self.j_min, "j-min");
        let j_max = m.value(self.j_max, "j-max");
        let t_min = m.value(self.t_min, "t-min");
        let t_max = m.value(self.t_max, "t-max");
        let n = m.value(self.n, "n");
        let degree_cap = m.value(self.degree_cap, "degree-cap").unwrap_or(DEFAULT_DEGREE_CAP);
        let fd_step = m.value(self.fd_step, "fd-step");
        let out: Option<PathBuf> = m.value(self.out, "out");
        let format_raw = match self.format {
            Some(f) => Some(f),
            None => file.get("format").and_then(|raw| match Format::from_str(raw, true) {
                Ok(f) => Some(f),
                Err(_) => {
                    m.problems.push(format!("config value for format is invalid: '{raw}'"));
                    None
                }
            }),
        };
        let shift_by_j = m.switch(self.shift_by_j, "shift-by-j");
        let threads = m.value(self.threads, "threads");
        let mut problems = m.problems;

        let id = match model_name.as_deref() {
            Some(name) => name.parse::<ModelId>().map_err(|e| problems.push(e.to_string())).ok(),
            None if command == CommandName::Selftest => Some(ModelId::NormalForm),
            None => {
                problems.push("--model is required".into());
                None
            }
        };
        let mut params = ModelParams::default();
        if let Some(id) = id {
            let normal_form_only = [("--a", a.is_some()), ("--b", b.is_some()), ("--nu1", nu1.is_some()), ("--nu2", nu2.is_some())];
            if id != ModelId::NormalForm {
                for (flag, given) in normal_form_only {
                    if given {
                        problems.push(format!("{flag} only applies to the normal-form model, not {id}"));
                    }
                }
            }
            if epsilon.is_some() && !id.is_oscillator() {
                problems.push(format!("--epsilon only applies to the oscillator models, not {id}"));
            }
        }
        params.epsilon = epsilon.unwrap_or(params.epsilon);
        params.a = a.unwrap_or(params.a);
        params.b = b.unwrap_or(params.b);
        for (text, slot, flag) in [(&nu1, &mut params.nu1, "--nu1"), (&nu2, &mut params.nu2, "--nu2")] {
            if let Some(text) = text {
                match text.parse::<NuSpec>() {
                    Ok(spec) => *slot = spec,
                    Err(e) => problems.push(format!("{flag}: {e}")),
                }
            }
        }
        let model = id.and_then(|id| Model::new(id, params).map_err(|e| problems.push(e.to_string())).ok());

        let (j, t) = match (at_candidate, model) {
            (true, Some(model)) => {
                if j.is_some() || t.is_some() {
                    problems.push("--at-candidate cannot be combined with --j or --t".into());
                }
                let (j0, t0) = model.candidate();
                (Some(j0), Some(t0))
            }
            _ => (j, t),
        };
        match command {
            CommandName::Normalize if j.is_none() || t.is_none() => {
                problems.push("normalize needs --j and --t, or --at-candidate".into())
            }
            CommandName::Flip | CommandName::Diagram if t.is_none() => {
                problems.push(format!("{} needs --t (or --at-candidate)", command_name(command)))
            }
            _ => {}
        }

        let format = format_raw.unwrap_or_else(|| default_format(command, out.as_deref()));
        let allowed: &[Format] = match command {
            CommandName::Normalize | CommandName::Selftest => &[Format::Text, Format::Json],
            CommandName::Flip => &[Format::Text, Format::Csv, Format::Json],
            CommandName::Diagram | CommandName::Locus => &[Format::Csv, Format::Svg, Format::Json],
        };
        if !allowed.contains(&format) {
            problems.push(format!(
                "--format {} is not available for {}",
                format_name(format),
                command_name(command)
            ));
        }
        let n = n.unwrap_or(if command == CommandName::Locus { DEFAULT_LOCUS_GRID } else { DEFAULT_DIAGRAM_SAMPLES });
        if n < 2 {
            problems.push(format!("--n must be at least 2, got {n}"));
        }
        if !(DEFAULT_DEGREE_CAP..=MAX_DEGREE_CAP).contains(&degree_cap) {
            problems.push(format!("--degree-cap must lie in {DEFAULT_DEGREE_CAP}..={MAX_DEGREE_CAP}, got {degree_cap}"));
        }
        if let Some(h) = fd_step {
            if !(h > 0.0 && h.is_finite()) {
                problems.push(format!("--fd-step must be positive, got {h}"));
            }
        }
        if threads == Some(0) {
            problems.push("--threads must be at least 1".into());
        }
        for (name, v) in [("--j", j), ("--t", t), ("--j-min", j_min), ("--j-max", j_max), ("--t-min", t_min), ("--t-max", t_max)] {
            if v.is_some_and(|v| !v.is_finite()) {
                problems.push(format!("{name} must be finite"));
            }
        }

        let mut j_window = None;
        let mut t_window = None;
        if let Some(model) = model {
            let default = model.default_window();
            let (lo, hi) = (j_min.unwrap_or(default.j_min), j_max.unwrap_or(default.j_max));
            if lo < hi {
                j_window = Some(DomainWindow { j_min: lo, j_max: hi });
                for (name, v) in [("--j-min", lo), ("--j-max", hi)] {
                    if command != CommandName::Normalize && !model.origin_admissible(v) {
                        problems.push(format!("{name} = {v} lies outside the domain of {}", model.id()));
                    }
                }
            } else {
                problems.push(format!("j window is empty: [{lo}, {hi}]"));
            }
            let (t_lo, t_hi) = default_t_window(&model);
            let (t_lo, t_hi) = (t_min.unwrap_or(t_lo), t_max.unwrap_or(t_hi));
            if t_lo < t_hi {
                t_window = Some((t_lo, t_hi));
            } else {
                problems.push(format!("t window is empty: [{t_lo}, {t_hi}]"));
            }
        }

        if !problems.is_empty() {
            return Err(Error::Usage(problems.join("; ")));
        }
        Ok(RunConfig {
            command: command_name(command),
            model: model.expect("validated"),
            j,
            t,
            j_window: j_window.expect("validated"),
            t_window,
            n,
            degree_cap,
            fd_step,
            out,
            format,
            shift_by_j,
            threads,
        })
    }
}

fn command_name(c: CommandName) -> &'static str {
    match c {
        CommandName::Normalize => "normalize",
        CommandName::Flip => "flip",
        CommandName::Diagram => "diagram",
        CommandName::Locus => "locus",
        CommandName::Selftest => "selftest",
    }
}

fn format_name(f: Format) -> &'static str {
    match f {
        Format::Text => "text",
        Format::Csv => "csv",
        Format::Svg => "svg",
        Format::Json => "json",
    }
}

fn default_format(command: CommandName, out: Option<&Path>) -> Format {
    let by_extension = out
        .and_then(|p| p.extension())
        .and_then(|e| e.to_str())
        .and_then(|e| Format::from_str(e, true).ok());
    match command {
        CommandName::Diagram | CommandName::Locus => by_extension.unwrap_or(Format::Csv),
        _ => by_extension.filter(|f| *f != Format::Svg).unwrap_or(Format::Text),
    }
}

/// `t`-range for loci: a band around the candidate.
fn default_t_window(model: &Model) -> (f64, f64) {
    match model.id() {
        ModelId::NormalForm => (-0.5, 0.5),
        _ => {
            let t0 = model.candidate().1;
            (t0 - 0.15, t0 + 0.15)
        }
    }
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Output of one command: text for stdout plus the exit code.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub stdout: String,
    pub exit_code: i32,
}

fn deliver(cfg: &RunConfig, body: String, summary: String) -> Result<String> {
    match &cfg.out {
        Some(path) => {
            std::fs::write(path, body).map_err(|e| Error::Io(format!("cannot write {}: {e}", path.display())))?;
            Ok(format!("{summary} -> {}\n", path.display()))
        }
        None => Ok(body),
    }
}

#[derive(Serialize)]
struct NormalizeDocument<'a> {
    model: ModelId,
    params: &'a ModelParams,
    j: f64,
    t: f64,
    analysis: &'a PointAnalysis,
    concavity_by_convention: Vec<ConcavityReport>,
}

fn verdict_exit(v: DoubleFlipVerdict) -> i32 {
    match v {
        DoubleFlipVerdict::Affirmed => EXIT_OK,
        DoubleFlipVerdict::Degenerate | DoubleFlipVerdict::NotAffirmed => EXIT_NEGATIVE,
    }
}

pub fn cmd_normalize(cfg: &RunConfig) -> Result<Outcome> {
    let (j, t) = (cfg.j.expect("validated"), cfg.t.expect("validated"));
    let opts = FdOptions {
        step_j: cfg.fd_step,
        step_t: cfg.fd_step,
        richardson: false,
        degree_cap: cfg.degree_cap,
    };
    let p = analyze_point(&cfg.model, j, t, &opts, BConvention::Sextic)?;
    let c = &p.coefficients;
    let conventions: Vec<ConcavityReport> = [BConvention::Sextic, BConvention::CubicU]
        .into_iter()
        .filter_map(|conv| concavity_report(&p.derivatives, c.b(conv), conv).ok())
        .collect();
    let body = match cfg.format {
        Format::Json => json(&NormalizeDocument {
            model: cfg.model.id(),
            params: cfg.model.params(),
            j,
            t,
            analysis: &p,
            concavity_by_convention: conventions,
        })?,
        _ => {
            let d = &p.derivatives;
            let s = &p.saddle_node;
            let mut o = String::new();
            let _ = writeln!(o, "model          {}", describe_model(&cfg.model));
            let _ = writeln!(o, "point          j = {j}, t = {t}");
            let _ = writeln!(o, "a              {}", format_float(c.a));
            let _ = writeln!(o, "nu1            {}", format_float(c.nu1));
            let _ = writeln!(o, "nu2            {}", format_float(c.nu2));
            let _ = writeln!(o, "b (sextic)     {}   [{}]", format_float(c.b_sextic), BConvention::Sextic.describe());
            let _ = writeln!(o, "b (u^3)        {}   [{}]", format_float(c.b_u3), BConvention::CubicU.describe());
            let _ = writeln!(o, "residual       {:.3e}", c.residual);
            let _ = writeln!(o, "dnu1/dj        {}", format_float(d.d_nu1_dj));
            let _ = writeln!(o, "d2nu1/dj2      {}", format_float(d.d2_nu1_dj2));
            let _ = writeln!(o, "dnu1/dt        {}", format_float(d.d_nu1_dt));
            let _ = writeln!(o, "dnu2/dj        {}", format_float(d.d_nu2_dj));
            let _ = writeln!(o, "fd steps       h_j = {:e}, h_t = {:e}", d.step_j, d.step_t);
            let mark = |ok: bool| if ok { "yes" } else { "no" };
            let _ = writeln!(
                o,
                "saddle-node    {} (nu1 = 0: {}, dnu1/dj = 0: {}, d2nu1/dj2 != 0: {}, dnu1/dt != 0: {})",
                if s.passed { "passed" } else { "failed" },
                mark(s.nu1_vanishes),
                mark(s.slope_vanishes),
                mark(s.curvature_nonzero),
                mark(s.drift_nonzero)
            );
            if conventions.is_empty() {
                let _ = writeln!(o, "concavity      undefined");
            }
            for k in &conventions {
                let tag = match k.b_convention {
                    BConvention::Sextic => "sextic",
                    BConvention::CubicU => "u^3",
                };
                let _ = writeln!(o, "concavity      ratio {:.10} with {tag} b: {:?}", k.ratio, k.verdict);
            }
            let _ = writeln!(o, "verdict        {:?}", p.verdict);
            o
        }
    };
    Ok(Outcome {
        stdout: deliver(cfg, body, "wrote normal form report".into())?,
        exit_code: verdict_exit(p.verdict),
    })
}

fn describe_model(m: &Model) -> String {
    let p = m.params();
    match m.id() {
        ModelId::NormalForm => format!("normal-form (a = {}, b = {}, nu1 = {}, nu2 = {})", p.a, p.b, p.nu1, p.nu2),
        id if id.is_oscillator() => format!("{id} (epsilon = {})", p.epsilon),
        id => id.to_string(),
    }
}

#[derive(Serialize)]
struct FlipDocument<'a> {
    model: ModelId,
    t: f64,
    window: DomainWindow,
    events: &'a [FlipEvent],
}

pub fn cmd_flip(cfg: &RunConfig) -> Result<Outcome> {
    let t = cfg.t.expect("validated");
    let events = solve_flip_locus(&cfg.model, t, &cfg.j_window, cfg.degree_cap)?;
    let body = match cfg.format {
        Format::Json => json(&FlipDocument {
            model: cfg.model.id(),
            t,
            window: cfg.j_window,
            events: &events,
        })?,
        Format::Csv => {
            let mut o = String::from("model,t,side,kind,j0,a,nu1,nu2\n");
            for e in &events {
                let _ = writeln!(
                    o,
                    "{},{},{},{},{},{},{},{}",
                    cfg.model.id(),
                    format_float(t),
                    e.side,
                    e.kind,
                    format_float(e.j0),
                    format_float(e.a),
                    format_float(e.nu1_at),
                    format_float(e.nu2_at)
                );
            }
            o
        }
        _ => {
            let mut o = format!(
                "{} events for {} at t = {t} in j in [{}, {}]\n",
                events.len(),
                describe_model(&cfg.model),
                cfg.j_window.j_min,
                cfg.j_window.j_max
            );
            for e in &events {
                let _ = writeln!(
                    o,
                    "  {:<6} j0 = {:<24} {:<12} (a = {:.6}, nu2 = {:.6e})",
                    e.side,
                    format_float(e.j0),
                    e.kind,
                    e.a,
                    e.nu2_at
                );
            }
            o
        }
    };
    Ok(Outcome {
        stdout: deliver(cfg, body, format!("wrote {} flip events", events.len()))?,
        exit_code: EXIT_OK,
    })
}

pub fn cmd_diagram(cfg: &RunConfig) -> Result<Outcome> {
    let t = cfg.t.expect("validated");
    let curves = sample_diagram(&cfg.model, t, &cfg.j_window, cfg.n)?;
    let body = match cfg.format {
        Format::Svg => emit_svg(
            &curves,
            &SvgStyle {
                title: format!(
                    "{}, t = {t}, j in [{}, {}]",
                    describe_model(&cfg.model),
                    cfg.j_window.j_min,
                    cfg.j_window.j_max
                ),
                shift_by_j: cfg.shift_by_j,
            },
        ),
        Format::Json => json(&DiagramDocument {
            model: cfg.model.id(),
            t,
            window: cfg.j_window,
            samples_requested: cfg.n,
            shift_by_j: cfg.shift_by_j,
            curves: curves.clone(),
        })?,
        _ => emit_csv(cfg.model.id(), t, &curves),
    };
    let samples: usize = curves.iter().map(|c| c.samples.len()).sum();
    Ok(Outcome {
        stdout: deliver(cfg, body, format!("wrote {} curves, {samples} samples", curves.len()))?,
        exit_code: EXIT_OK,
    })
}

pub fn cmd_locus(cfg: &RunConfig) -> Result<Outcome> {
    let (t_min, t_max) = cfg.t_window.expect("validated");
    let window = LocusWindow::new(cfg.j_window.j_min, cfg.j_window.j_max, t_min, t_max)?;
    let curves = trace_locus(&cfg.model, &window, cfg.n, cfg.degree_cap)?;
    let body = match cfg.format {
        Format::Svg => emit_locus_svg(
            &curves,
            &format!(
                "{}: nu1 = 0 (solid), disc_b = 0 (dashed), j in [{}, {}], t in [{t_min}, {t_max}]",
                describe_model(&cfg.model),
                window.j_min,
                window.j_max
            ),
        ),
        Format::Json => json(&LocusDocument {
            model: cfg.model.id(),
            window,
            grid: cfg.n,
            curves: curves.clone(),
        })?,
        _ => emit_locus_csv(cfg.model.id(), &curves),
    };
    Ok(Outcome {
        stdout: deliver(cfg, body, format!("wrote {} locus curves", curves.len()))?,
        exit_code: EXIT_OK,
    })
}

pub fn cmd_selftest(cfg: &RunConfig) -> Result<Outcome> {
    let report = run_selftest()?;
    let body = match cfg.format {
        Format::Json => json(&report)?,
        _ => report.table(),
    };
    Ok(Outcome {
        stdout: deliver(cfg, body, "wrote selftest report".into())?,
        exit_code: if report.all_passed() { EXIT_OK } else { EXIT_NEGATIVE },
    })
}

fn dispatch(command: CommandName, cfg: &RunConfig) -> Result<Outcome> {
    match command {
        CommandName::Normalize => cmd_normalize(cfg),
        CommandName::Flip => cmd_flip(cfg),
        CommandName::Diagram => cmd_diagram(cfg),
        CommandName::Locus => cmd_locus(cfg),
        CommandName::Selftest => cmd_selftest(cfg),
    }
}

/// Parse, run and report; returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = write!(stdout, "{e}");
                return if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand { EXIT_ERROR } else { EXIT_OK };
            }
            let msg = e.to_string();
            let first = msg
                .lines()
                .map(|l| l.trim_start_matches("error: ").trim())
                .find(|l| !l.is_empty())
                .unwrap_or("invalid arguments")
                .to_string();
            let _ = writeln!(stderr, "error[usage]: {first}");
            return EXIT_ERROR;
        }
    };
    let command = cli.command;
    let result = cli.flags.resolve(command).and_then(|cfg| match cfg.threads {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::Usage(format!("cannot start {k} threads: {e}")))?
            .install(|| dispatch(command, &cfg)),
        None => dispatch(command, &cfg),
    });
    match result {
        Ok(outcome) => {
            let _ = stdout.write_all(outcome.stdout.as_bytes());
            outcome.exit_code
        }
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            let _ = writeln!(stderr, "error[{}]: {msg}", e.code());
            EXIT_ERROR
        }
    }
}
