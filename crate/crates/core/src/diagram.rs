//! Bifurcation diagrams at fixed `t` and degenerate loci in the `(j, t)` plane,
//! with CSV, JSON and SVG output.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{DomainWindow, Model, ModelId};
use crate::normalform::normalize_model;
use crate::singularities::{
    disc_b, nf_branch_points, numeric_critical_points, refine_critical_point, Branch, Class,
    CriticalPoint, MERGE_RADIUS,
};

pub const DIAGRAM_HEADER: &str = "model,t,branch,j,h,class";
pub const LOCUS_HEADER: &str = "model,kind,j,t";
pub const DEFAULT_LOCUS_GRID: usize = 201;
const REFINE_STEPS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagramSample {
    pub j: f64,
    pub h: f64,
    pub class: Class,
}

/// One branch of critical values, ordered by `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagramCurve {
    pub branch: Branch,
    pub samples: Vec<DiagramSample>,
}

/// Critical point plus the data continuation needs.
#[derive(Debug, Clone, Copy)]
struct Tracked {
    j: f64,
    q: f64,
    p: f64,
    lambda_squared: f64,
    point: CriticalPoint,
}

impl Tracked {
    fn new(j: f64, point: CriticalPoint) -> Tracked {
        Tracked {
            j,
            q: point.q,
            p: point.p,
            lambda_squared: point.lambda_squared,
            point,
        }
    }

    fn sample(&self) -> DiagramSample {
        DiagramSample {
            j: self.j,
            h: self.point.h,
            class: self.point.class,
        }
    }
}

/// Points at one `j`, labelled `Q1`, `Q2Minus`, `Q2Plus` for the normal form;
/// for other models the origin is `Q1` and the rest are left for continuation.
fn points_at(model: &Model, j: f64, t: f64) -> Result<Vec<CriticalPoint>> {
    match model.id() {
        ModelId::NormalForm => {
            let pr = model.params();
            nf_branch_points(pr.a, pr.b, pr.nu1.eval(j, t), pr.nu2.eval(j, t))
        }
        _ => {
            let found = numeric_critical_points(model, j, t)?;
            Ok(found
                .points
                .into_iter()
                .map(|mut c| {
                    if c.q.abs() < MERGE_RADIUS && c.p.abs() < MERGE_RADIUS {
                        c.branch = Branch::Q1;
                    }
                    c
                })
                .collect())
        }
    }
}

/// The point of `branch` at `j`, continued from `seed` for numeric branches.
fn branch_point(model: &Model, branch: Branch, seed: (f64, f64), j: f64, t: f64) -> Result<Option<CriticalPoint>> {
    match (model.id(), branch) {
        (ModelId::NormalForm, _) => Ok(points_at(model, j, t)?.into_iter().find(|c| c.branch == branch)),
        (_, Branch::Q1) => Ok(refine_critical_point(model, (0.0, 0.0), j, t)?.map(|mut c| {
            c.branch = Branch::Q1;
            c
        })),
        _ => {
            let found = refine_critical_point(model, seed, j, t)?;
            // a continuation that slid onto another branch is not this branch
            Ok(found.filter(|c| (c.q - seed.0).hypot(c.p - seed.1) <= 10.0 * seed.0.hypot(seed.1).max(1e-3)))
        }
    }
}

/// Greedy nearest-neighbour continuation of unlabelled points.
fn continue_numeric(columns: &[Vec<Tracked>], spacing: f64) -> Vec<Vec<(usize, Tracked)>> {
    let mut curves: Vec<Vec<(usize, Tracked)>> = Vec::new();
    let mut active: Vec<usize> = Vec::new();
    for (col, points) in columns.iter().enumerate() {
        let mut pairs = Vec::new();
        for (ci, &curve) in active.iter().enumerate() {
            let tail = curves[curve].last().unwrap().1;
            let step = curves[curve]
                .len()
                .checked_sub(2)
                .map(|k| {
                    let prev = curves[curve][k].1;
                    (tail.q - prev.q).hypot(tail.p - prev.p).hypot(tail.point.h - prev.point.h)
                })
                .unwrap_or(0.0);
            let threshold = 10.0 * spacing.max(step);
            for (pi, pt) in points.iter().enumerate() {
                let d = (pt.q - tail.q).hypot(pt.p - tail.p).hypot(pt.point.h - tail.point.h);
                if d <= threshold {
                    pairs.push((d, ci, pi));
                }
            }
        }
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
        let mut curve_taken = vec![false; active.len()];
        let mut point_taken = vec![false; points.len()];
        let mut next_active = Vec::new();
        for (_, ci, pi) in pairs {
            if curve_taken[ci] || point_taken[pi] {
                continue;
            }
            curve_taken[ci] = true;
            point_taken[pi] = true;
            curves[active[ci]].push((col, points[pi]));
            next_active.push(active[ci]);
        }
        for (pi, pt) in points.iter().enumerate() {
            if !point_taken[pi] {
                curves.push(vec![(col, *pt)]);
                next_active.push(curves.len() - 1);
            }
        }
        next_active.sort_unstable();
        active = next_active;
    }
    curves
}

/// Insert the zero of `λ²` between two samples of opposite type, the minimum
/// of `|λ²|` at a touch, and the end point where a normal-form branch is born or dies.
fn refine_curve(model: &Model, branch: Branch, t: f64, tracked: &[(usize, Tracked)], n: usize) -> Result<Vec<Tracked>> {
    let eval = |j: f64, seed: &Tracked| branch_point(model, branch, (seed.q, seed.p), j, t);
    let mut out: Vec<Tracked> = Vec::with_capacity(tracked.len() + 4);
    for (k, &(col, cur)) in tracked.iter().enumerate() {
        if k > 0 {
            let (pcol, prev) = tracked[k - 1];
            if pcol + 1 == col {
                let opposite = matches!(
                    (prev.point.class, cur.point.class),
                    (Class::Centre, Class::Saddle) | (Class::Saddle, Class::Centre)
                );
                if opposite {
                    let (mut lo, mut hi) = (prev, cur);
                    for _ in 0..REFINE_STEPS {
                        let mid_j = 0.5 * (lo.j + hi.j);
                        if mid_j == lo.j || mid_j == hi.j {
                            break;
                        }
                        let Some(mid) = eval(mid_j, &lo)? else { break };
                        let mid = Tracked::new(mid_j, mid);
                        if (mid.lambda_squared > 0.0) == (lo.lambda_squared > 0.0) {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    let best = if lo.lambda_squared.abs() <= hi.lambda_squared.abs() { lo } else { hi };
                    if best.point.class == Class::Degenerate && best.j > prev.j && best.j < cur.j {
                        out.push(best);
                    }
                }
            }
        }
        out.push(cur);
        // touch: local minimum of |λ²| between same-type neighbours
        if k > 0 && k + 1 < tracked.len() {
            let (pc, prev) = tracked[k - 1];
            let (nc, next) = tracked[k + 1];
            let same = prev.point.class == cur.point.class && cur.point.class == next.point.class;
            let a = cur.lambda_squared.abs();
            if pc + 1 == col && col + 1 == nc && same && cur.point.class != Class::Degenerate
                && a <= prev.lambda_squared.abs() && a < next.lambda_squared.abs()
            {
                if let Some(best) = golden_touch(&eval, prev, next)? {
                    if best.point.class == Class::Degenerate && best.j != cur.j {
                        let pos = out.len() - usize::from(best.j < cur.j);
                        out.insert(pos, best);
                    }
                }
            }
        }
    }
    if model.id() == ModelId::NormalForm && branch != Branch::Q1 {
        if let (Some(&(first_col, first)), Some(&(last_col, last))) = (tracked.first(), tracked.last()) {
            let step = |col: usize| -> f64 { first.j + (col as f64 - first_col as f64) * spacing_of(tracked) };
            if first_col > 0 {
                if let Some(b) = boundary(&eval, first, step(first_col - 1))? {
                    out.insert(0, b);
                }
            }
            if last_col + 1 < n {
                if let Some(b) = boundary(&eval, last, step(last_col + 1))? {
                    out.push(b);
                }
            }
            for pair in tracked.windows(2) {
                let ((c0, a), (c1, b)) = (pair[0], pair[1]);
                if c1 > c0 + 1 {
                    if let Some(x) = boundary(&eval, a, step(c0 + 1))? {
                        out.push(x);
                    }
                    if let Some(x) = boundary(&eval, b, step(c1 - 1))? {
                        out.push(x);
                    }
                }
            }
        }
    }
    out.sort_by(|x, y| x.j.total_cmp(&y.j));
    out.dedup_by(|x, y| x.j == y.j);
    Ok(out)
}

fn spacing_of(tracked: &[(usize, Tracked)]) -> f64 {
    match tracked {
        [(c0, a), .., (c1, b)] if c1 > c0 => (b.j - a.j) / (*c1 - *c0) as f64,
        _ => 0.0,
    }
}

fn golden_touch<F>(eval: &F, lo: Tracked, hi: Tracked) -> Result<Option<Tracked>>
where
    F: Fn(f64, &Tracked) -> Result<Option<CriticalPoint>>,
{
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo.j, hi.j);
    let probe = |j: f64| -> Result<Option<Tracked>> { Ok(eval(j, &lo)?.map(|c| Tracked::new(j, c))) };
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (Some(mut p1), Some(mut p2)) = (probe(x1)?, probe(x2)?) else {
        return Ok(None);
    };
    for _ in 0..REFINE_STEPS + 20 {
        if p1.lambda_squared.abs() <= p2.lambda_squared.abs() {
            b = x2;
            x2 = x1;
            p2 = p1;
            x1 = b - g * (b - a);
            let Some(p) = probe(x1)? else { return Ok(None) };
            p1 = p;
        } else {
            a = x1;
            x1 = x2;
            p1 = p2;
            x2 = a + g * (b - a);
            let Some(p) = probe(x2)? else { return Ok(None) };
            p2 = p;
        }
        if b - a <= 1e-15 * b.abs().max(1.0) {
            break;
        }
    }
    Ok(Some(if p1.lambda_squared.abs() <= p2.lambda_squared.abs() { p1 } else { p2 }))
}

/// Bisect between a sample where the branch exists and a `j` where it does not.
fn boundary<F>(eval: &F, inside: Tracked, outside_j: f64) -> Result<Option<Tracked>>
where
    F: Fn(f64, &Tracked) -> Result<Option<CriticalPoint>>,
{
    let mut good = inside;
    let mut bad = outside_j;
    for _ in 0..REFINE_STEPS {
        let mid = 0.5 * (good.j + bad);
        if mid == good.j || mid == bad {
            break;
        }
        match eval(mid, &good)? {
            Some(c) => good = Tracked::new(mid, c),
            None => bad = mid,
        }
    }
    Ok((good.j != inside.j).then_some(good))
}

/// Critical values over `n` uniform samples of `window` at fixed `t`.
pub fn sample_diagram(model: &Model, t: f64, window: &DomainWindow, n: usize) -> Result<Vec<DiagramCurve>> {
    if n < 2 {
        return Err(Error::Usage(format!("need at least 2 samples, got {n}")));
    }
    for j in [window.j_min, window.j_max] {
        if !model.origin_admissible(j) {
            return Err(Error::Domain(format!(
                "j = {j} lies outside the domain of model {}",
                model.id()
            )));
        }
    }
    let js = window.samples(n);
    let spacing = (window.j_max - window.j_min) / (n - 1) as f64;
    let columns: Vec<Vec<CriticalPoint>> = js
        .par_iter()
        .map(|&j| points_at(model, j, t).map_err(|e| e.at_point(j, t)))
        .collect::<Result<_>>()?;

    let mut labelled: BTreeMap<Branch, Vec<(usize, Tracked)>> = BTreeMap::new();
    let mut free: Vec<Vec<Tracked>> = vec![Vec::new(); n];
    for (col, (points, &j)) in columns.iter().zip(&js).enumerate() {
        for &c in points {
            match c.branch {
                Branch::Numeric(_) => free[col].push(Tracked::new(j, c)),
                b => labelled.entry(b).or_default().push((col, Tracked::new(j, c))),
            }
        }
    }
    let mut groups: Vec<(Branch, Vec<(usize, Tracked)>)> = labelled.into_iter().collect();
    for (i, curve) in continue_numeric(&free, spacing).into_iter().enumerate() {
        groups.push((Branch::Numeric(i), curve));
    }

    let refined: Vec<Result<DiagramCurve>> = groups
        .par_iter()
        .map(|(branch, tracked)| {
            let samples = refine_curve(model, *branch, t, tracked, n)?;
            Ok(DiagramCurve {
                branch: *branch,
                samples: samples.iter().map(Tracked::sample).collect(),
            })
        })
        .collect();
    refined.into_iter().collect()
}

/// Which degenerate locus a curve belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LocusKind {
    Nu1Zero,
    DiscZero,
}

impl LocusKind {
    pub fn name(self) -> &'static str {
        match self {
            LocusKind::Nu1Zero => "Nu1Zero",
            LocusKind::DiscZero => "DiscZero",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocusCurve {
    pub kind: LocusKind,
    /// `(j, t)` along the curve.
    pub points: Vec<(f64, f64)>,
}

/// Rectangle in the `(j, t)` plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocusWindow {
    pub j_min: f64,
    pub j_max: f64,
    pub t_min: f64,
    pub t_max: f64,
}

impl LocusWindow {
    pub fn new(j_min: f64, j_max: f64, t_min: f64, t_max: f64) -> Result<LocusWindow> {
        if !(j_min < j_max && t_min < t_max) || ![j_min, j_max, t_min, t_max].iter().all(|v| v.is_finite()) {
            return Err(Error::Usage(format!(
                "empty (j, t) window [{j_min}, {j_max}] x [{t_min}, {t_max}]"
            )));
        }
        Ok(LocusWindow { j_min, j_max, t_min, t_max })
    }
}

/// `ν₁`, `disc_b` and the branch-existence quantity `-ν₂/(2b)` at a node.
#[derive(Debug, Clone, Copy)]
struct Fields {
    nu1: f64,
    disc: f64,
    existence: f64,
}

fn fields_at(model: &Model, j: f64, t: f64, cap: usize) -> Result<Fields> {
    let c = normalize_model(model, j, t, cap)?;
    Ok(Fields {
        nu1: c.nu1,
        disc: disc_b(c.nu1, c.nu2, c.b_sextic).value,
        existence: -c.nu2 / (2.0 * c.b_sextic),
    })
}

/// Grid edge: horizontal edges join `(i, k)` to `(i + 1, k)`, vertical ones `(i, k)` to `(i, k + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum Edge {
    H(usize, usize),
    V(usize, usize),
}

/// Zero contours of a grid field as chains of edges.
fn marching_squares(values: &[Vec<f64>]) -> Vec<Vec<Edge>> {
    let ni = values.len();
    let nk = values[0].len();
    let pos = |v: f64| v >= 0.0;
    let crosses = |a: f64, b: f64| a.is_finite() && b.is_finite() && pos(a) != pos(b);
    let mut adjacency: BTreeMap<Edge, Vec<Edge>> = BTreeMap::new();
    let mut link = |a: Edge, b: Edge| {
        adjacency.entry(a).or_default().push(b);
        adjacency.entry(b).or_default().push(a);
    };
    for i in 0..ni - 1 {
        for k in 0..nk - 1 {
            let v = [values[i][k], values[i + 1][k], values[i + 1][k + 1], values[i][k + 1]];
            if v.iter().any(|x| !x.is_finite()) {
                continue;
            }
            // edges in cyclic order: bottom, right, top, left
            let edges = [Edge::H(i, k), Edge::V(i + 1, k), Edge::H(i, k + 1), Edge::V(i, k)];
            let cut: Vec<Edge> = (0..4)
                .filter(|&e| crosses(v[e], v[(e + 1) % 4]))
                .map(|e| edges[e])
                .collect();
            match cut.len() {
                2 => link(cut[0], cut[1]),
                4 => {
                    let centre = 0.25 * (v[0] + v[1] + v[2] + v[3]);
                    // pair edges around the corner whose sign differs from the centre
                    if pos(centre) == pos(v[0]) {
                        link(cut[0], cut[1]);
                        link(cut[2], cut[3]);
                    } else {
                        link(cut[3], cut[0]);
                        link(cut[1], cut[2]);
                    }
                }
                _ => {}
            }
        }
    }
    let mut visited: BTreeMap<Edge, bool> = adjacency.keys().map(|&e| (e, false)).collect();
    let mut chains = Vec::new();
    let walk = |start: Edge, visited: &mut BTreeMap<Edge, bool>| {
        let mut chain = vec![start];
        visited.insert(start, true);
        let mut cur = start;
        loop {
            let next = adjacency[&cur].iter().copied().find(|e| !visited[e]);
            match next {
                Some(e) => {
                    visited.insert(e, true);
                    chain.push(e);
                    cur = e;
                }
                None => break,
            }
        }
        // close loops
        if chain.len() > 2 && adjacency[&cur].contains(&start) {
            chain.push(start);
        }
        chain
    };
    let ends: Vec<Edge> = adjacency
        .iter()
        .filter(|(_, n)| n.len() == 1)
        .map(|(&e, _)| e)
        .collect();
    for e in ends {
        if !visited[&e] {
            chains.push(walk(e, &mut visited));
        }
    }
    let rest: Vec<Edge> = adjacency.keys().copied().collect();
    for e in rest {
        if !visited[&e] {
            chains.push(walk(e, &mut visited));
        }
    }
    chains
}

/// Zero contours of `ν₁` and `disc_b` on an `n × n` grid; crossing points are
/// refined on their grid edge, and `disc_b` points need `-ν₂/(2b) ≥ 0`.
pub fn trace_locus(model: &Model, window: &LocusWindow, n: usize, cap: usize) -> Result<Vec<LocusCurve>> {
    if n < 2 {
        return Err(Error::Usage(format!("need at least a 2 x 2 grid, got {n}")));
    }
    let js = DomainWindow::new(window.j_min, window.j_max)?.samples(n);
    let ts = DomainWindow::new(window.t_min, window.t_max)?.samples(n);
    let nodes: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |k| (i, k))).collect();
    let evaluated: Vec<Result<Fields>> = nodes
        .par_iter()
        .map(|&(i, k)| fields_at(model, js[i], ts[k], cap))
        .collect();
    let mut failed = Vec::new();
    let mut grid = vec![vec![None; n]; n];
    for (&(i, k), r) in nodes.iter().zip(evaluated) {
        match r {
            Ok(f) => grid[i][k] = Some(f),
            Err(_) => failed.push((js[i], ts[k])),
        }
    }
    if failed.len() * 10 > nodes.len() {
        let shown: Vec<String> = failed.iter().take(20).map(|(j, t)| format!("({j}, {t})")).collect();
        let more = failed.len().saturating_sub(shown.len());
        return Err(Error::NormalizationFailure {
            j: failed[0].0,
            t: failed[0].1,
            residual: f64::NAN,
            reason: format!(
                "{} of {} grid nodes failed: {}{}",
                failed.len(),
                nodes.len(),
                shown.join(", "),
                if more > 0 { format!(" and {more} more") } else { String::new() }
            ),
        });
    }

    let mut curves = Vec::new();
    for kind in [LocusKind::Nu1Zero, LocusKind::DiscZero] {
        let pick = |f: &Fields| match kind {
            LocusKind::Nu1Zero => f.nu1,
            LocusKind::DiscZero => f.disc,
        };
        let values: Vec<Vec<f64>> = grid
            .iter()
            .map(|col| col.iter().map(|f| f.as_ref().map_or(f64::NAN, pick)).collect())
            .collect();
        let chains = marching_squares(&values);
        // refine every crossing point once, in parallel
        let edges: Vec<Edge> = {
            let mut all: Vec<Edge> = chains.iter().flatten().copied().collect();
            all.sort_unstable();
            all.dedup();
            all
        };
        let located: Vec<Result<(f64, f64, f64)>> = edges
            .par_iter()
            .map(|&e| {
                let ((i0, k0), (i1, k1)) = match e {
                    Edge::H(i, k) => ((i, k), (i + 1, k)),
                    Edge::V(i, k) => ((i, k), (i, k + 1)),
                };
                refine_edge(model, cap, kind, (js[i0], ts[k0]), (js[i1], ts[k1]), values[i0][k0], values[i1][k1])
            })
            .collect();
        let mut at: BTreeMap<Edge, (f64, f64, f64)> = BTreeMap::new();
        for (e, r) in edges.into_iter().zip(located) {
            at.insert(e, r?);
        }
        for chain in chains {
            let mut current = Vec::new();
            for e in chain {
                let (j, t, existence) = at[&e];
                if kind == LocusKind::DiscZero && existence < 0.0 {
                    if current.len() > 1 {
                        curves.push(LocusCurve { kind, points: std::mem::take(&mut current) });
                    }
                    current.clear();
                    continue;
                }
                current.push((j, t));
            }
            if current.len() > 1 {
                curves.push(LocusCurve { kind, points: current });
            }
        }
    }
    Ok(curves)
}

/// Root of the field along a grid edge by the Illinois variant of regula falsi.
fn refine_edge(
    model: &Model,
    cap: usize,
    kind: LocusKind,
    a: (f64, f64),
    b: (f64, f64),
    fa: f64,
    fb: f64,
) -> Result<(f64, f64, f64)> {
    let point = |s: f64| (a.0 + s * (b.0 - a.0), a.1 + s * (b.1 - a.1));
    let field = |s: f64| -> Result<Fields> {
        let (j, t) = point(s);
        fields_at(model, j, t, cap)
    };
    let pick = |f: &Fields| match kind {
        LocusKind::Nu1Zero => f.nu1,
        LocusKind::DiscZero => f.disc,
    };
    let (mut s0, mut s1, mut f0, mut f1) = (0.0f64, 1.0f64, fa, fb);
    let scale = fa.abs().max(fb.abs()).max(1.0);
    let mut side = 0i8;
    let mut best = (if fa.abs() <= fb.abs() { 0.0 } else { 1.0 }, field(if fa.abs() <= fb.abs() { 0.0 } else { 1.0 })?);
    for _ in 0..REFINE_STEPS {
        let s = (s0 * f1 - s1 * f0) / (f1 - f0);
        let s = if s.is_finite() && s > s0.min(s1) && s < s0.max(s1) { s } else { 0.5 * (s0 + s1) };
        let fs = field(s)?;
        let v = pick(&fs);
        if v.abs() <= pick(&best.1).abs() {
            best = (s, fs);
        }
        if v.abs() <= 1e-13 * scale || (s1 - s0).abs() <= 1e-15 {
            break;
        }
        if (v >= 0.0) == (f0 >= 0.0) {
            s0 = s;
            f0 = v;
            if side == -1 {
                f1 *= 0.5;
            }
            side = -1;
        } else {
            s1 = s;
            f1 = v;
            if side == 1 {
                f0 *= 0.5;
            }
            side = 1;
        }
    }
    let (j, t) = point(best.0);
    Ok((j, t, best.1.existence))
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Diagram rows sorted by `(branch, j)`.
pub fn emit_csv(model: ModelId, t: f64, curves: &[DiagramCurve]) -> String {
    let mut rows: Vec<(Branch, f64, String)> = Vec::new();
    for c in curves {
        for s in &c.samples {
            rows.push((
                c.branch,
                s.j,
                format!(
                    "{},{},{},{},{},{}\n",
                    model.name(),
                    format_float(t),
                    c.branch,
                    format_float(s.j),
                    format_float(s.h),
                    s.class
                ),
            ));
        }
    }
    rows.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)));
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(DIAGRAM_HEADER);
    out.push('\n');
    for (_, _, row) in rows {
        out.push_str(&row);
    }
    out
}

fn parse_float(field: &str, line: usize) -> Result<f64> {
    field
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: '{field}' is not a number")))
}

/// Inverse of [`emit_csv`]: one curve per branch label, in label order.
pub fn parse_csv(text: &str) -> Result<Vec<DiagramCurve>> {
    let mut lines = text.split('\n');
    match lines.next() {
        Some(DIAGRAM_HEADER) => {}
        other => {
            return Err(Error::Parse(format!(
                "expected header '{DIAGRAM_HEADER}', found '{}'",
                other.unwrap_or("")
            )))
        }
    }
    let mut by_branch: BTreeMap<Branch, Vec<DiagramSample>> = BTreeMap::new();
    for (n, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::Parse(format!("line {}: expected 6 fields, found {}", n + 2, fields.len())));
        }
        fields[0].parse::<ModelId>()?;
        parse_float(fields[1], n + 2)?;
        let branch: Branch = fields[2].parse()?;
        by_branch.entry(branch).or_default().push(DiagramSample {
            j: parse_float(fields[3], n + 2)?,
            h: parse_float(fields[4], n + 2)?,
            class: fields[5].parse()?,
        });
    }
    Ok(by_branch
        .into_iter()
        .map(|(branch, samples)| DiagramCurve { branch, samples })
        .collect())
}

/// Locus rows, curve by curve in tracing order.
pub fn emit_locus_csv(model: ModelId, curves: &[LocusCurve]) -> String {
    let mut out = String::from(LOCUS_HEADER);
    out.push('\n');
    let mut sorted: Vec<&LocusCurve> = curves.iter().collect();
    sorted.sort_by_key(|c| c.kind);
    for c in sorted {
        for &(j, t) in &c.points {
            let _ = writeln!(out, "{},{},{},{}", model.name(), c.kind.name(), format_float(j), format_float(t));
        }
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagramDocument {
    pub model: ModelId,
    pub t: f64,
    pub window: DomainWindow,
    pub samples_requested: usize,
    /// Whether plots use `h + j` as ordinate; `h` values here are never shifted.
    pub shift_by_j: bool,
    pub curves: Vec<DiagramCurve>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocusDocument {
    pub model: ModelId,
    pub window: LocusWindow,
    pub grid: usize,
    pub curves: Vec<LocusCurve>,
}

/// Presentation options for [`emit_svg`].
#[derive(Debug, Clone)]
pub struct SvgStyle {
    pub title: String,
    pub shift_by_j: bool,
}

pub const SVG_WIDTH: f64 = 800.0;
pub const SVG_HEIGHT: f64 = 600.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;

fn class_colour(class: Class) -> &'static str {
    match class {
        Class::Centre => "#1f5fbf",
        Class::Saddle => "#c62828",
        Class::Degenerate => "#555555",
    }
}

fn dash(branch: Branch) -> Option<&'static str> {
    match branch {
        Branch::Q1 => None,
        Branch::Q2Minus => Some("8,4"),
        Branch::Q2Plus => Some("8,4,2,4"),
        Branch::Numeric(_) => Some("2,3"),
    }
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new(xs: impl Iterator<Item = f64>, ys: impl Iterator<Item = f64>) -> Frame {
        let span = |it: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi - lo <= 1e-12 * lo.abs().max(1.0) {
                (lo - 0.5, hi + 0.5)
            } else {
                let pad = 0.05 * (hi - lo);
                (lo - pad, hi + pad)
            }
        };
        let (x0, x1) = span(&mut xs.into_iter());
        let (y0, y1) = span(&mut ys.into_iter());
        Frame { x0, x1, y0, y1 }
    }

    fn x(&self, v: f64) -> f64 {
        MARGIN_LEFT + (v - self.x0) / (self.x1 - self.x0) * (SVG_WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn y(&self, v: f64) -> f64 {
        SVG_HEIGHT - MARGIN_BOTTOM - (v - self.y0) / (self.y1 - self.y0) * (SVG_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }
}

fn svg_open(out: &mut String, title: &str, frame: &Frame, x_label: &str, y_label: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
        w = SVG_WIDTH,
        h = SVG_HEIGHT
    );
    let _ = writeln!(out, "<title>{}</title>", escape(title));
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (left, right) = (MARGIN_LEFT, SVG_WIDTH - MARGIN_RIGHT);
    let (top, bottom) = (MARGIN_TOP, SVG_HEIGHT - MARGIN_BOTTOM);
    let _ = writeln!(
        out,
        r#"<g id="axes" stroke="black" stroke-width="1" fill="none"><rect x="{left:.2}" y="{top:.2}" width="{:.2}" height="{:.2}"/></g>"#,
        right - left,
        bottom - top
    );
    let _ = writeln!(out, r#"<g id="ticks" font-family="sans-serif" font-size="12" fill="black">"#);
    for i in 0..=4 {
        let xv = frame.x0 + (frame.x1 - frame.x0) * i as f64 / 4.0;
        let yv = frame.y0 + (frame.y1 - frame.y0) * i as f64 / 4.0;
        let (px, py) = (frame.x(xv), frame.y(yv));
        let _ = writeln!(
            out,
            r#"<line x1="{px:.2}" y1="{bottom:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            bottom + 5.0,
            bottom + 20.0,
            tick_label(xv)
        );
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{py:.2}" x2="{left:.2}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            left - 5.0,
            left - 8.0,
            py + 4.0,
            tick_label(yv)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        0.5 * (left + right),
        SVG_HEIGHT - 10.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="15" y="{:.2}" text-anchor="middle" transform="rotate(-90 15 {:.2})">{}</text>"#,
        0.5 * (top + bottom),
        0.5 * (top + bottom),
        escape(y_label)
    );
    let _ = writeln!(out, "</g>");
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.3}");
    if s == "-0.000" { "0.000".into() } else { s }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Split a curve into polylines of one type, breaking at sampling gaps.
/// Degenerate samples end one run and start the next.
fn runs(samples: &[DiagramSample]) -> Vec<(Class, Vec<DiagramSample>)> {
    let mut steps: Vec<f64> = samples.windows(2).map(|w| w[1].j - w[0].j).collect();
    steps.sort_by(f64::total_cmp);
    let typical = steps.get(steps.len() / 2).copied().unwrap_or(0.0);
    let mut out: Vec<(Class, Vec<DiagramSample>)> = Vec::new();
    let mut cur: Vec<DiagramSample> = Vec::new();
    let mut cls = Class::Degenerate;
    for (i, s) in samples.iter().enumerate() {
        let gap = i > 0 && typical > 0.0 && s.j - samples[i - 1].j > 1.5 * typical;
        if gap {
            if !cur.is_empty() {
                out.push((cls, std::mem::take(&mut cur)));
            }
            cls = Class::Degenerate;
        }
        if s.class != Class::Degenerate && cls != Class::Degenerate && s.class != cls {
            // type change without a degenerate sample in between: split here
            let last = *cur.last().unwrap();
            out.push((cls, std::mem::take(&mut cur)));
            cur.push(last);
            cls = s.class;
        }
        if s.class == Class::Degenerate && cls != Class::Degenerate {
            cur.push(*s);
            out.push((cls, std::mem::take(&mut cur)));
            cur.push(*s);
            cls = Class::Degenerate;
            continue;
        }
        if cls == Class::Degenerate {
            cls = s.class;
        }
        cur.push(*s);
    }
    if cur.len() > 1 || (cur.len() == 1 && out.is_empty()) {
        out.push((cls, cur));
    }
    out
}

/// Standalone SVG of a bifurcation diagram.
pub fn emit_svg(curves: &[DiagramCurve], style: &SvgStyle) -> String {
    let ord = |s: &DiagramSample| if style.shift_by_j { s.h + s.j } else { s.h };
    let frame = Frame::new(
        curves.iter().flat_map(|c| c.samples.iter().map(|s| s.j)),
        curves.iter().flat_map(|c| c.samples.iter().map(ord)),
    );
    let mut out = String::new();
    let y_label = if style.shift_by_j { "h + j" } else { "h" };
    svg_open(&mut out, &style.title, &frame, "j", y_label);
    let _ = writeln!(out, r#"<g id="curves" fill="none" stroke-width="2">"#);
    for c in curves {
        for (class, run) in runs(&c.samples) {
            let pts: Vec<String> = run
                .iter()
                .map(|s| format!("{:.2},{:.2}", frame.x(s.j), frame.y(ord(s))))
                .collect();
            let dash_attr = dash(c.branch)
                .map(|d| format!(r#" stroke-dasharray="{d}""#))
                .unwrap_or_default();
            let _ = writeln!(
                out,
                r#"<polyline data-branch="{}" data-class="{}" stroke="{}"{} points="{}"/>"#,
                c.branch,
                class,
                class_colour(class),
                dash_attr,
                pts.join(" ")
            );
        }
    }
    let _ = writeln!(out, "</g>");
    let _ = writeln!(out, r#"<g id="degenerate" fill="black">"#);
    for c in curves {
        for s in c.samples.iter().filter(|s| s.class == Class::Degenerate) {
            let _ = writeln!(
                out,
                r#"<circle data-branch="{}" cx="{:.2}" cy="{:.2}" r="3.5"/>"#,
                c.branch,
                frame.x(s.j),
                frame.y(ord(s))
            );
        }
    }
    let _ = writeln!(out, "</g>");
    out.push_str("</svg>\n");
    out
}

/// Standalone SVG of degenerate loci: `ν₁ = 0` solid, `disc_b = 0` dashed.
pub fn emit_locus_svg(curves: &[LocusCurve], title: &str) -> String {
    let frame = Frame::new(
        curves.iter().flat_map(|c| c.points.iter().map(|p| p.0)),
        curves.iter().flat_map(|c| c.points.iter().map(|p| p.1)),
    );
    let mut out = String::new();
    svg_open(&mut out, title, &frame, "j", "t");
    let _ = writeln!(out, r#"<g id="loci" fill="none" stroke="black" stroke-width="2">"#);
    for c in curves {
        let pts: Vec<String> = c
            .points
            .iter()
            .map(|&(j, t)| format!("{:.2},{:.2}", frame.x(j), frame.y(t)))
            .collect();
        let dash_attr = match c.kind {
            LocusKind::Nu1Zero => "",
            LocusKind::DiscZero => r#" stroke-dasharray="8,4""#,
        };
        let _ = writeln!(
            out,
            r#"<polyline data-kind="{}"{dash_attr} points="{}"/>"#,
            c.kind.name(),
            pts.join(" ")
        );
    }
    let _ = writeln!(out, "</g>");
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ModelParams, NuSpec};

    fn fig(nu1: &str, nu2: &str) -> Model {
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

    fn win(a: f64, b: f64) -> DomainWindow {
        DomainWindow::new(a, b).unwrap()
    }

    #[test]
    fn before_the_bifurcation_the_origin_is_a_centre() {
        let curves = sample_diagram(&fig("j2-t", "3j-t"), -0.1, &win(-1.0, 1.0), 101).unwrap();
        assert_eq!(curves[0].branch, Branch::Q1);
        assert_eq!(curves[0].samples.len(), 101);
        assert!(curves[0].samples.iter().all(|s| s.class == Class::Centre));
        // q⁴ + ν₂q² + ν₁ has positive roots in q² once 5j² + 0.6j - 0.39 > 0 and ν₂ < 0
        let edge = (-0.6 - (0.36f64 + 4.0 * 5.0 * 0.39).sqrt()) / 10.0;
        for c in &curves[1..] {
            assert!(c.samples.iter().all(|s| s.j <= edge + 1e-9), "{:?}", c.branch);
            assert!((c.samples.last().unwrap().j - edge).abs() < 1e-9);
        }
        let only_origin = sample_diagram(&fig("j2-t", "3j-t"), -0.1, &win(-0.3, 1.0), 51).unwrap();
        assert_eq!(only_origin.len(), 1);
    }

    #[test]
    fn after_the_bifurcation_the_origin_has_a_saddle_segment() {
        let curves = sample_diagram(&fig("j2-t", "3j-t"), 0.1, &win(-1.0, 1.0), 201).unwrap();
        let q1 = curves.iter().find(|c| c.branch == Branch::Q1).unwrap();
        let degenerate: Vec<f64> = q1
            .samples
            .iter()
            .filter(|s| s.class == Class::Degenerate)
            .map(|s| s.j)
            .collect();
        assert_eq!(degenerate.len(), 2, "{degenerate:?}");
        let r = 0.1f64.sqrt();
        assert!((degenerate[0] + r).abs() < 1e-9 && (degenerate[1] - r).abs() < 1e-9);
        for s in &q1.samples {
            if s.class == Class::Saddle {
                assert!(s.j.abs() < r);
            }
        }
        assert!(curves.iter().any(|c| c.branch == Branch::Q2Minus));
        assert!(curves.iter().any(|c| c.branch == Branch::Q2Plus));
        for c in &curves {
            for w in c.samples.windows(2) {
                assert!(w[0].j < w[1].j);
            }
        }
    }

    #[test]
    fn class_changes_only_across_degenerate_samples() {
        for (nu1, nu2, t) in [("j2-t", "3j-t", 0.1), ("j2-t", "j-t", 0.3), ("-j2+t", "j-t", 0.5)] {
            for c in sample_diagram(&fig(nu1, nu2), t, &win(-1.0, 1.0), 151).unwrap() {
                for w in c.samples.windows(2) {
                    let pair = (w[0].class, w[1].class);
                    assert!(
                        !matches!(pair, (Class::Centre, Class::Saddle) | (Class::Saddle, Class::Centre)),
                        "{nu1} {nu2} {:?} at j = {}",
                        c.branch,
                        w[0].j
                    );
                }
            }
        }
    }

    #[test]
    fn csv_round_trip_and_shape() {
        let curves = sample_diagram(&fig("j2-t", "3j-t"), 0.1, &win(-1.0, 1.0), 41).unwrap();
        let text = emit_csv(ModelId::NormalForm, 0.1, &curves);
        assert!(text.starts_with("model,t,branch,j,h,class\n"));
        assert!(!text.contains('\r'));
        assert_eq!(parse_csv(&text).unwrap(), curves);
        assert_eq!(emit_csv(ModelId::NormalForm, 0.0, &[]), "model,t,branch,j,h,class\n");
        let two = vec![DiagramCurve {
            branch: Branch::Q1,
            samples: vec![
                DiagramSample { j: 0.5, h: -0.0, class: Class::Centre },
                DiagramSample { j: -0.5, h: 1e-300, class: Class::Saddle },
            ],
        }];
        let text = emit_csv(ModelId::NormalForm, 0.0, &two);
        let rows: Vec<&str> = text.lines().skip(1).collect();
        assert_eq!(rows.len(), 2);
        assert!(rows[0].contains("-5.0000000000000000e-1"));
        let back = parse_csv(&text).unwrap();
        assert_eq!(back[0].samples[1].h.to_bits(), (-0.0f64).to_bits());
    }

    #[test]
    fn parse_rejects_bad_input() {
        assert!(parse_csv("model,t,j\n").is_err());
        assert!(parse_csv("model,t,branch,j,h,class\nnormal-form,0,Q1,x,0,centre\n").is_err());
        assert!(parse_csv("model,t,branch,j,h,class\nnormal-form,0,Q1,0,0,hot\n").is_err());
    }

    #[test]
    fn svg_structure() {
        let empty = emit_svg(&[], &SvgStyle { title: "empty".into(), shift_by_j: false });
        assert!(empty.starts_with("<svg") && empty.trim_end().ends_with("</svg>"));
        assert!(empty.contains(r#"width="800" height="600""#));
        assert_eq!(empty.matches("<polyline").count(), 0);

        let one = sample_diagram(&fig("j2-t", "3j-t"), -0.1, &win(-0.3, 1.0), 21).unwrap();
        let svg = emit_svg(&one, &SvgStyle { title: "t = -0.1".into(), shift_by_j: false });
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(!svg.contains("stroke-dasharray"));

        let three = sample_diagram(&fig("j2-t", "3j-t"), 0.1, &win(-1.0, 1.0), 101).unwrap();
        let svg = emit_svg(&three, &SvgStyle { title: "t = 0.1".into(), shift_by_j: false });
        assert!(svg.contains(r#"data-branch="Q1""#));
        assert!(svg.contains(r#"stroke-dasharray="8,4""#));
        assert!(svg.contains(r#"stroke-dasharray="8,4,2,4""#));
        assert!(svg.contains("<circle"));
    }

    #[test]
    fn locus_of_a_parabola() {
        let m = fig("j2-t", "3j-t");
        let w = LocusWindow::new(-1.0, 1.0, -0.5, 0.5).unwrap();
        let loci = trace_locus(&m, &w, 41, 6).unwrap();
        let nu1: Vec<_> = loci.iter().filter(|c| c.kind == LocusKind::Nu1Zero).collect();
        assert_eq!(nu1.len(), 1);
        for &(j, t) in &nu1[0].points {
            assert!((t - j * j).abs() < 1e-10, "({j}, {t})");
        }
    }

    #[test]
    fn disc_locus_points_are_zeros_and_admissible() {
        let m = fig("j2-t", "2j-t");
        let w = LocusWindow::new(-1.0, 1.0, -0.5, 0.5).unwrap();
        let loci = trace_locus(&m, &w, 61, 6).unwrap();
        let disc: Vec<_> = loci.iter().filter(|c| c.kind == LocusKind::DiscZero).collect();
        assert!(!disc.is_empty());
        for c in disc {
            for &(j, t) in &c.points {
                let (n1, n2) = (j * j - t, 2.0 * j - t);
                assert!(disc_b(n1, n2, 1.0).value.abs() <= 1e-6);
                assert!(-n2 / 2.0 >= -1e-9);
            }
        }
    }

    #[test]
    fn failing_nodes_are_reported() {
        let m = Model::new(ModelId::Hirzebruch, ModelParams::default()).unwrap();
        let w = LocusWindow::new(0.0, 4.0, 0.1, 0.5).unwrap();
        let err = trace_locus(&m, &w, 11, 6).unwrap_err();
        assert!(err.to_string().contains("grid nodes failed"), "{err}");
    }

    #[test]
    fn nu_strings_parse() {
        let m = fig("j2-t", "3j-t");
        assert_eq!(m.params().nu1, NuSpec::new(1.0, 0.0, -1.0));
    }

    #[test]
    fn oscillator_touch_at_the_candidate() {
        let m = Model::new(ModelId::Oscillator12, ModelParams::default()).unwrap();
        let curves = sample_diagram(&m, 0.5, &win(-8.0, -0.01), 81).unwrap();
        let q1 = curves.iter().find(|c| c.branch == Branch::Q1).unwrap();
        let near: Vec<f64> = q1
            .samples
            .iter()
            .filter(|s| s.class == Class::Degenerate)
            .map(|s| s.j)
            .collect();
        assert!(near.iter().any(|j| (j + 4.0).abs() < 1e-3), "{near:?}");
    }
}
