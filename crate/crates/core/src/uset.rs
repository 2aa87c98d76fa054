//! Confidence-level uncertainty sets: shortest intervals whose worst-case
//! coverage reaches a level α, computed on piecewise-linear approximations
//! (PLA) of the band envelopes.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ambiguity::{BandSet, CdfBand, Cdf};
use crate::milp::{self, LinExpr, MilpError, MilpModel, Sense, SolveParams, SolveStatus};

/// Default number of equal-width PLA segments across a band span.
pub const DEFAULT_SEGMENTS: usize = 51;

/// Resolution of α keys: α values are identified by `round(α / ALPHA_TICK)`.
pub const ALPHA_TICK: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum UsetError {
    #[error("need at least two breakpoints")]
    TooFewBreakpoints,
    #[error("breakpoints not strictly ascending at index {0}")]
    DuplicateBreakpoints(usize),
    #[error("coverage {alpha} unattainable (at most {max})")]
    Unattainable { alpha: f64, max: f64 },
    #[error("alpha {0} outside [0, 1]")]
    InvalidAlpha(f64),
    #[error("no band for {source_id} at hour {hour}")]
    MissingBand { source_id: String, hour: usize },
    #[error("interval model for {0} not solved to optimality")]
    NotOptimal(String),
    #[error(transparent)]
    Solver(#[from] MilpError),
}

/// Continuous piecewise-linear CDF through `(o_s, F(o_s))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaApprox {
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
    pub slopes: Vec<f64>,
    pub intercepts: Vec<f64>,
}

impl PlaApprox {
    pub fn segments(&self) -> usize {
        self.slopes.len()
    }

    pub fn lo(&self) -> f64 {
        self.breakpoints[0]
    }

    pub fn hi(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    /// Smallest `x` in the domain with `F(x) >= y`.
    pub fn inverse_min(&self, y: f64) -> Option<f64> {
        let v = &self.values;
        let j = v.partition_point(|&f| f < y);
        if j == v.len() {
            return None;
        }
        if j == 0 {
            return Some(self.breakpoints[0]);
        }
        let (o0, o1) = (self.breakpoints[j - 1], self.breakpoints[j]);
        let t = (y - v[j - 1]) / (v[j] - v[j - 1]);
        Some((o0 + t * (o1 - o0)).min(o1))
    }

    /// Largest `x` in the domain with `F(x) <= y`.
    pub fn inverse_max(&self, y: f64) -> Option<f64> {
        let v = &self.values;
        let j = v.partition_point(|&f| f <= y);
        if j == 0 {
            return None;
        }
        if j == v.len() {
            return Some(self.hi());
        }
        let (o0, o1) = (self.breakpoints[j - 1], self.breakpoints[j]);
        let t = (y - v[j - 1]) / (v[j] - v[j - 1]);
        Some((o0 + t * (o1 - o0)).max(o0))
    }
}

impl Cdf for PlaApprox {
    fn eval(&self, x: f64) -> f64 {
        let o = &self.breakpoints;
        if x < o[0] {
            return 0.0;
        }
        if x > self.hi() {
            return 1.0;
        }
        let s = (o.partition_point(|&p| p <= x) - 1).min(self.segments() - 1);
        if x == o[s] {
            return self.values[s];
        }
        self.slopes[s] * x + self.intercepts[s]
    }

    fn integral(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let o = &self.breakpoints;
        let mut total = 0.0;
        if b > self.hi() {
            total += b - a.max(self.hi());
        }
        for s in 0..self.segments() {
            let lo = a.max(o[s]);
            let hi = b.min(o[s + 1]);
            if hi > lo {
                let f = |x: f64| self.slopes[s] * x + self.intercepts[s];
                total += 0.5 * (f(lo) + f(hi)) * (hi - lo);
            }
        }
        total
    }

    fn domain_max(&self) -> f64 {
        self.hi()
    }
}

/// Slopes `ω_s` and intercepts `β_s` of the chords of `cdf` between
/// consecutive breakpoints.
pub fn pla_coefficients(cdf: &dyn Cdf, breakpoints: &[f64]) -> Result<PlaApprox, UsetError> {
    if breakpoints.len() < 2 {
        return Err(UsetError::TooFewBreakpoints);
    }
    if let Some(i) = (1..breakpoints.len()).find(|&i| !(breakpoints[i] > breakpoints[i - 1])) {
        return Err(UsetError::DuplicateBreakpoints(i));
    }
    let values: Vec<f64> = breakpoints.iter().map(|&o| cdf.eval(o)).collect();
    Ok(pla_from_values(breakpoints.to_vec(), values))
}

fn pla_from_values(breakpoints: Vec<f64>, values: Vec<f64>) -> PlaApprox {
    let (slopes, intercepts) = breakpoints
        .windows(2)
        .zip(values.windows(2))
        .map(|(o, f)| {
            let w = (f[1] - f[0]) / (o[1] - o[0]);
            (w, -w * o[0] + f[0])
        })
        .unzip();
    PlaApprox {
        breakpoints,
        values,
        slopes,
        intercepts,
    }
}

/// Equal-width breakpoints over the band span, plus one anchor one spacing
/// to the left where both CDFs vanish. The anchor lets intervals cover an
/// atom at the left end of the span.
pub fn band_breakpoints(band: &CdfBand, segments: usize) -> Vec<f64> {
    let lo = band.grid[0];
    let mut hi = *band.grid.last().unwrap();
    if hi <= lo {
        hi = lo + 1.0;
    }
    let h = (hi - lo) / segments as f64;
    let mut out = Vec::with_capacity(segments + 2);
    out.push(lo - h);
    out.extend((0..segments).map(|s| lo + s as f64 * h));
    out.push(hi);
    out
}

/// PLA of both worst-case CDFs of one band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaPair {
    /// Upper CDF, evaluated at the left end of an interval.
    pub upper: PlaApprox,
    /// Lower CDF, evaluated at the right end of an interval.
    pub lower: PlaApprox,
    pub mode: f64,
}

impl PlaPair {
    pub fn from_band(band: &CdfBand, segments: usize) -> PlaPair {
        let o = band_breakpoints(band, segments);
        PlaPair {
            upper: pla_coefficients(&band.upper_cdf(), &o).expect("ascending breakpoints"),
            lower: pla_coefficients(&band.lower_cdf(), &o).expect("ascending breakpoints"),
            mode: band.mode,
        }
    }

    /// Build directly from breakpoint values of both envelopes.
    pub fn from_values(breakpoints: Vec<f64>, upper: Vec<f64>, lower: Vec<f64>, mode: f64) -> PlaPair {
        PlaPair {
            upper: pla_from_values(breakpoints.clone(), upper),
            lower: pla_from_values(breakpoints, lower),
            mode,
        }
    }

    /// Worst-case coverage `F_lower(hi) - F_upper(lo)`.
    pub fn coverage(&self, lo: f64, hi: f64) -> f64 {
        self.lower.eval(hi) - self.upper.eval(lo)
    }

    /// Largest coverage any interval on the span can reach.
    pub fn max_coverage(&self) -> f64 {
        self.lower.values.last().unwrap() - self.upper.values[0]
    }

    fn span(&self) -> f64 {
        self.upper.hi() - self.upper.lo()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

fn check_alpha(alpha: f64) -> Result<(), UsetError> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(UsetError::InvalidAlpha(alpha))
    }
}

/// How the shortest-interval sub-problem is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntervalMethod {
    /// Scan the vertices of the sub-problem: every optimum has one endpoint
    /// on a breakpoint (or at the mode, among ties).
    #[default]
    Enumeration,
    /// Segment-selection MILP.
    Milp,
}

/// Minimal-width interval with worst-case coverage at least `alpha`, by the
/// segment-selection MILP with one binary per PLA segment for each endpoint.
///
/// Among intervals of the optimal width, one containing the mode is
/// preferred, then the leftmost. `alpha = 0` gives the point at the mode.
pub fn shortest_interval(pair: &PlaPair, alpha: f64, params: &SolveParams) -> Result<Interval, UsetError> {
    shortest_interval_with(pair, alpha, IntervalMethod::Milp, params)
}

pub fn shortest_interval_with(
    pair: &PlaPair,
    alpha: f64,
    method: IntervalMethod,
    params: &SolveParams,
) -> Result<Interval, UsetError> {
    check_alpha(alpha)?;
    if alpha == 0.0 {
        return Ok(Interval {
            lo: pair.mode,
            hi: pair.mode,
        });
    }
    let max = pair.max_coverage();
    if alpha > max {
        return Err(UsetError::Unattainable { alpha, max });
    }
    match method {
        IntervalMethod::Enumeration => {
            let best = vertex_candidates(pair, alpha)
                .min_by(|p, q| p.width().total_cmp(&q.width()))
                .expect("attainable coverage has a vertex solution");
            Ok(break_ties(pair, alpha, best))
        }
        IntervalMethod::Milp => {
            let (model, a, b) = interval_model(pair, alpha);
            let sol = milp::solve(&model, params)?;
            if sol.status != SolveStatus::Optimal {
                return Err(UsetError::NotOptimal(format!("alpha {alpha}")));
            }
            debug_assert!(milp::check_solution(&model, &sol).is_empty());
            let raw = Interval {
                lo: sol.eval(&a),
                hi: sol.eval(&b),
            };
            Ok(polish(pair, alpha, raw))
        }
    }
}

/// Single-entry segment-selection model with its endpoint expressions.
pub fn interval_model(pair: &PlaPair, alpha: f64) -> (MilpModel, LinExpr, LinExpr) {
    let mut m = MilpModel::new("shortest_interval");
    let o = &pair.upper.breakpoints;
    let nseg = pair.upper.segments();
    let mut a = LinExpr::new();
    let mut b = LinExpr::new();
    let mut fa = LinExpr::new();
    let mut fb = LinExpr::new();
    let mut pick_a = LinExpr::new();
    let mut pick_b = LinExpr::new();
    for s in 0..nseg {
        let (o0, o1) = (o[s], o[s + 1]);
        let ya = m.binary(format!("ya{s}"));
        let xa = m.free(format!("xa{s}"));
        m.ge(format!("a_lo{s}"), xa, ya * o0);
        m.le(format!("a_hi{s}"), xa, ya * o1);
        a += xa;
        fa.add_term(xa, pair.upper.slopes[s]).add_term(ya, pair.upper.intercepts[s]);
        pick_a += ya;

        let yb = m.binary(format!("yb{s}"));
        let xb = m.free(format!("xb{s}"));
        m.ge(format!("b_lo{s}"), xb, yb * o0);
        m.le(format!("b_hi{s}"), xb, yb * o1);
        b += xb;
        fb.add_term(xb, pair.lower.slopes[s]).add_term(yb, pair.lower.intercepts[s]);
        pick_b += yb;
    }
    m.eq("one_seg_a", pick_a, 1.0);
    m.eq("one_seg_b", pick_b, 1.0);
    m.ge("ordered", b.clone() - a.clone(), 0.0);
    m.ge("coverage", fb - fa, alpha);
    m.set_objective(Sense::Minimize, b.clone() - a.clone());
    (m, a, b)
}

fn from_left(pair: &PlaPair, alpha: f64, lo: f64) -> Option<Interval> {
    pair.lower
        .inverse_min(alpha + pair.upper.eval(lo))
        .map(|hi| Interval { lo, hi })
        .filter(|iv| valid(pair, alpha, iv))
}

fn from_right(pair: &PlaPair, alpha: f64, hi: f64) -> Option<Interval> {
    pair.upper
        .inverse_max(pair.lower.eval(hi) - alpha)
        .map(|lo| Interval { lo, hi })
        .filter(|iv| valid(pair, alpha, iv))
}

fn valid(pair: &PlaPair, alpha: f64, iv: &Interval) -> bool {
    iv.hi >= iv.lo && pair.coverage(iv.lo, iv.hi) >= alpha - 1e-12
}

/// Tightest intervals with one endpoint pinned to a breakpoint or the mode.
fn vertex_candidates<'a>(pair: &'a PlaPair, alpha: f64) -> impl Iterator<Item = Interval> + 'a {
    pair.upper
        .breakpoints
        .iter()
        .chain(std::iter::once(&pair.mode))
        .flat_map(move |&p| [from_left(pair, alpha, p), from_right(pair, alpha, p)])
        .flatten()
}

/// Among vertex intervals as wide as `best`, prefer the mode, then the left.
fn break_ties(pair: &PlaPair, alpha: f64, best: Interval) -> Interval {
    let tol = 1e-9 * pair.span().max(1.0);
    let w = best.width();
    vertex_candidates(pair, alpha)
        .filter(|iv| (iv.width() - w).abs() <= tol)
        .chain(std::iter::once(best))
        .min_by(|p, q| {
            q.contains(pair.mode)
                .cmp(&p.contains(pair.mode))
                .then(p.lo.total_cmp(&q.lo))
        })
        .unwrap()
}

/// Move a MILP solution onto the exact vertex it approximates.
fn polish(pair: &PlaPair, alpha: f64, raw: Interval) -> Interval {
    let o = &pair.upper.breakpoints;
    let snap = |x: f64| {
        let j = o.partition_point(|&p| p < x);
        let near = [j.saturating_sub(1), j.min(o.len() - 1)]
            .into_iter()
            .min_by(|&p, &q| (o[p] - x).abs().total_cmp(&(o[q] - x).abs()))
            .unwrap();
        if (o[near] - x).abs() <= 1e-6 * pair.span().max(1.0) {
            o[near]
        } else {
            x
        }
    };
    let best = [from_left(pair, alpha, snap(raw.lo)), from_right(pair, alpha, snap(raw.hi))]
        .into_iter()
        .flatten()
        .min_by(|p, q| p.width().total_cmp(&q.width()));
    match best {
        Some(best) => break_ties(pair, alpha, best),
        None => raw,
    }
}

/// PLA pairs for every `(source, hour)` band of a study.
#[derive(Debug, Clone, Default)]
pub struct PairSet {
    entries: Vec<(String, usize, PlaPair)>,
    index: HashMap<(String, usize), usize>,
}

impl PairSet {
    pub fn from_bands(bands: &BandSet, segments: usize) -> PairSet {
        let entries = bands
            .entries()
            .par_iter()
            .map(|e| (e.source.clone(), e.hour, PlaPair::from_band(&e.band, segments)))
            .collect();
        PairSet::new(entries)
    }

    pub fn new(entries: Vec<(String, usize, PlaPair)>) -> PairSet {
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, (s, h, _))| ((s.clone(), *h), i))
            .collect();
        PairSet { entries, index }
    }

    pub fn get(&self, source: &str, hour: usize) -> Option<&PlaPair> {
        self.index
            .get(&(source.to_string(), hour))
            .map(|&i| &self.entries[i].2)
    }

    pub fn entries(&self) -> &[(String, usize, PlaPair)] {
        &self.entries
    }

    /// Largest α every entry can reach.
    pub fn max_alpha(&self) -> f64 {
        self.entries
            .iter()
            .map(|(_, _, p)| p.max_coverage())
            .fold(1.0, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetEntry {
    pub source: String,
    pub hour: usize,
    pub lo: f64,
    pub hi: f64,
}

/// Per-entry intervals sharing one confidence level.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceSet {
    pub alpha: f64,
    entries: Vec<SetEntry>,
    index: HashMap<(String, usize), usize>,
}

impl ConfidenceSet {
    pub fn new(alpha: f64, entries: Vec<SetEntry>) -> ConfidenceSet {
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, e)| ((e.source.clone(), e.hour), i))
            .collect();
        ConfidenceSet { alpha, entries, index }
    }

    pub fn get(&self, source: &str, hour: usize) -> Option<Interval> {
        self.index.get(&(source.to_string(), hour)).map(|&i| {
            let e = &self.entries[i];
            Interval { lo: e.lo, hi: e.hi }
        })
    }

    pub fn entries(&self) -> &[SetEntry] {
        &self.entries
    }

    /// `true` when every interval of `self` lies inside the matching one of `other`.
    pub fn is_within(&self, other: &ConfidenceSet) -> bool {
        self.entries.iter().all(|e| {
            other
                .get(&e.source, e.hour)
                .is_some_and(|iv| iv.lo <= e.lo && e.hi <= iv.hi)
        })
    }
}

/// Shortest interval for every entry at one shared α.
pub fn build_confidence_set(
    pairs: &PairSet,
    alpha: f64,
    method: IntervalMethod,
    params: &SolveParams,
) -> Result<ConfidenceSet, UsetError> {
    check_alpha(alpha)?;
    let entries = pairs
        .entries()
        .par_iter()
        .map(|(source, hour, pair)| {
            let iv = shortest_interval_with(pair, alpha, method, params)?;
            Ok(SetEntry {
                source: source.clone(),
                hour: *hour,
                lo: iv.lo,
                hi: iv.hi,
            })
        })
        .collect::<Result<Vec<_>, UsetError>>()?;
    Ok(ConfidenceSet::new(alpha, entries))
}

/// Replace each set by the running envelope over ascending α: lower ends
/// take the running minimum, upper ends the running maximum.
pub fn nested_envelope(sets: &[ConfidenceSet]) -> Vec<ConfidenceSet> {
    let mut out: Vec<ConfidenceSet> = Vec::with_capacity(sets.len());
    for set in sets {
        let entries = set
            .entries
            .iter()
            .map(|e| match out.last().and_then(|prev| prev.get(&e.source, e.hour)) {
                Some(p) => SetEntry {
                    lo: e.lo.min(p.lo),
                    hi: e.hi.max(p.hi),
                    ..e.clone()
                },
                None => e.clone(),
            })
            .collect();
        out.push(ConfidenceSet::new(set.alpha, entries));
    }
    out
}

pub fn alpha_ticks(alpha: f64) -> i64 {
    (alpha / ALPHA_TICK).round() as i64
}

/// Cache-file key: at least two decimals, trailing zeros trimmed.
pub fn alpha_key(alpha: f64) -> String {
    let s = format!("{alpha:.8}");
    let trimmed = s.trim_end_matches('0');
    let decimals = trimmed.len() - trimmed.find('.').unwrap() - 1;
    if decimals < 2 {
        format!("{alpha:.2}")
    } else {
        trimmed.to_string()
    }
}

/// Enveloped sets on an ascending α grid.
#[derive(Debug, Clone)]
pub struct AlphaGrid {
    pub alphas: Vec<f64>,
    pub sets: Vec<ConfidenceSet>,
    /// First requested α that no entry set could reach, if any; the grid
    /// stops before it.
    pub truncated_at: Option<f64>,
}

impl AlphaGrid {
    pub fn set_at(&self, alpha: f64) -> Option<&ConfidenceSet> {
        let t = alpha_ticks(alpha);
        self.alphas
            .iter()
            .position(|&a| alpha_ticks(a) == t)
            .map(|i| &self.sets[i])
    }
}

/// Raw (un-enveloped) sets keyed by α, reusable across calls.
#[derive(Debug, Clone, Default)]
pub struct SetCache {
    pub method: IntervalMethod,
    raw: BTreeMap<i64, Option<ConfidenceSet>>,
}

impl SetCache {
    pub fn new(method: IntervalMethod) -> Self {
        Self {
            method,
            raw: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    /// Raw set at `alpha`, or `None` when some entry cannot reach it.
    pub fn raw_set(&mut self, pairs: &PairSet, alpha: f64, params: &SolveParams) -> Result<Option<ConfidenceSet>, UsetError> {
        let key = alpha_ticks(alpha);
        if let Some(hit) = self.raw.get(&key) {
            return Ok(hit.clone());
        }
        let set = match build_confidence_set(pairs, alpha, self.method, params) {
            Ok(s) => Some(s),
            Err(UsetError::Unattainable { .. }) => None,
            Err(e) => return Err(e),
        };
        self.raw.insert(key, set.clone());
        Ok(set)
    }

    /// JSON object keyed by α string, each value an array of entries.
    pub fn to_json(&self) -> serde_json::Result<String> {
        let map: BTreeMap<String, &[SetEntry]> = self
            .raw
            .iter()
            .filter_map(|(&t, s)| s.as_ref().map(|s| (alpha_key(t as f64 * ALPHA_TICK), s.entries())))
            .collect();
        serde_json::to_string_pretty(&map)
    }

    pub fn from_json(text: &str, method: IntervalMethod) -> Result<SetCache, String> {
        let map: BTreeMap<String, Vec<SetEntry>> = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let mut raw = BTreeMap::new();
        for (k, entries) in map {
            let alpha: f64 = k.parse().map_err(|_| format!("bad alpha key {k:?}"))?;
            raw.insert(alpha_ticks(alpha), Some(ConfidenceSet::new(alpha, entries)));
        }
        Ok(SetCache { method, raw })
    }
}

/// Sets for each α of an ascending grid, with nested-envelope
/// post-processing. Stops at the first unreachable α.
pub fn tabulate_alpha_grid(
    pairs: &PairSet,
    grid: &[f64],
    method: IntervalMethod,
    params: &SolveParams,
) -> Result<AlphaGrid, UsetError> {
    tabulate_with_cache(pairs, grid, params, &mut SetCache::new(method))
}

pub fn tabulate_with_cache(
    pairs: &PairSet,
    grid: &[f64],
    params: &SolveParams,
    cache: &mut SetCache,
) -> Result<AlphaGrid, UsetError> {
    let mut alphas = Vec::new();
    let mut raw = Vec::new();
    let mut truncated_at = None;
    for &alpha in grid {
        check_alpha(alpha)?;
        match cache.raw_set(pairs, alpha, params)? {
            Some(s) => {
                alphas.push(alpha);
                raw.push(s);
            }
            None => {
                truncated_at = Some(alpha);
                break;
            }
        }
    }
    Ok(AlphaGrid {
        alphas,
        sets: nested_envelope(&raw),
        truncated_at,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambiguity::{StepCdf, StepRule};

    fn params() -> SolveParams {
        SolveParams::default()
    }

    #[test]
    fn pla_slopes_and_intercepts() {
        let f = pla_from_values(vec![0.0, 0.5, 1.0], vec![0.0, 0.8, 1.0]);
        assert!((f.slopes[0] - 1.6).abs() < 1e-12 && (f.slopes[1] - 0.4).abs() < 1e-12);
        assert!(f.intercepts[0].abs() < 1e-12 && (f.intercepts[1] - 0.6).abs() < 1e-12);
        assert!((f.eval(0.25) - 0.4).abs() < 1e-12);
        let left = f.slopes[0] * 0.5 + f.intercepts[0];
        let right = f.slopes[1] * 0.5 + f.intercepts[1];
        assert!((left - 0.8).abs() < 1e-12 && (right - 0.8).abs() < 1e-12);
    }

    #[test]
    fn pla_reproduces_breakpoint_values() {
        let step = StepCdf {
            grid: vec![0.0, 1.0, 3.0],
            values: vec![0.2, 0.5, 1.0],
            rule: StepRule::CarryForward,
        };
        let o = [0.0, 0.5, 1.0, 2.0, 3.0];
        let p = pla_coefficients(&step, &o).unwrap();
        for &x in &o {
            assert_eq!(p.eval(x), step.eval(x));
        }
        assert!(matches!(
            pla_coefficients(&step, &[0.0, 1.0, 1.0]),
            Err(UsetError::DuplicateBreakpoints(2))
        ));
        assert!(matches!(pla_coefficients(&step, &[0.0]), Err(UsetError::TooFewBreakpoints)));
    }

    #[test]
    fn pla_risk_of_uniform() {
        let f = pla_from_values(vec![0.0, 1.0], vec![0.0, 1.0]);
        let d = crate::ambiguity::downside_risk(&f, 0.5).unwrap();
        assert!((d - 0.125).abs() < 1e-15);
    }

    #[test]
    fn inverses() {
        let f = pla_from_values(vec![0.0, 1.0, 2.0], vec![0.0, 0.5, 0.5]);
        assert_eq!(f.inverse_min(0.25), Some(0.5));
        assert_eq!(f.inverse_min(0.5), Some(1.0));
        assert_eq!(f.inverse_max(0.5), Some(2.0));
        assert_eq!(f.inverse_max(0.25), Some(0.5));
        assert_eq!(f.inverse_min(0.75), None);
    }

    #[test]
    fn exact_cdf_example_interval() {
        // exact CDF on support 0..3, left anchor at -1
        let o = vec![-1.0, 0.0, 1.0, 2.0, 3.0];
        let f = vec![0.0, 0.1, 0.6, 0.9, 1.0];
        let pair = PlaPair::from_values(o, f.clone(), f, 1.0);
        let iv = shortest_interval(&pair, 0.8, &params()).unwrap();
        assert!((iv.lo - 0.0).abs() < 1e-9 && (iv.hi - 2.0).abs() < 1e-9, "{iv:?}");
    }

    #[test]
    fn zero_alpha_is_mode_point() {
        let pair = PlaPair::from_values(vec![0.0, 1.0, 2.0], vec![0.0, 0.5, 1.0], vec![0.0, 0.5, 1.0], 1.5);
        let iv = shortest_interval(&pair, 0.0, &params()).unwrap();
        assert_eq!((iv.lo, iv.hi), (1.5, 1.5));
    }

    #[test]
    fn unattainable_alpha() {
        let pair = PlaPair::from_values(vec![0.0, 1.0, 2.0], vec![0.0, 0.6, 1.0], vec![0.0, 0.3, 0.9], 1.0);
        assert!(matches!(
            shortest_interval(&pair, 0.95, &params()),
            Err(UsetError::Unattainable { .. })
        ));
    }

    #[test]
    fn ties_prefer_mode_then_left() {
        // uniform density: every width-1 window covers 0.25
        let o: Vec<f64> = (0..=4).map(|i| i as f64).collect();
        let f: Vec<f64> = (0..=4).map(|i| i as f64 / 4.0).collect();
        let pair = PlaPair::from_values(o.clone(), f.clone(), f.clone(), 2.5);
        let iv = shortest_interval(&pair, 0.25, &params()).unwrap();
        assert!((iv.lo - 1.5).abs() < 1e-9 && (iv.hi - 2.5).abs() < 1e-9, "{iv:?}");
        let pair = PlaPair::from_values(o, f.clone(), f, 10.0);
        let iv = shortest_interval(&pair, 0.25, &params()).unwrap();
        assert!(iv.lo.abs() < 1e-9, "{iv:?}");
    }

    #[test]
    fn envelope_is_running_extreme() {
        let mk = |alpha, lo, hi| {
            ConfidenceSet::new(
                alpha,
                vec![SetEntry {
                    source: "load:2".into(),
                    hour: 0,
                    lo,
                    hi,
                }],
            )
        };
        let out = nested_envelope(&[mk(0.6, 3.0, 7.0), mk(0.7, 3.5, 6.5)]);
        let iv = out[1].get("load:2", 0).unwrap();
        assert_eq!((iv.lo, iv.hi), (3.0, 7.0));
        assert!(out[0].is_within(&out[1]));
    }

    #[test]
    fn alpha_keys() {
        assert_eq!(alpha_key(0.6), "0.60");
        assert_eq!(alpha_key(0.0), "0.00");
        assert_eq!(alpha_key(0.6651), "0.6651");
        assert_eq!(alpha_ticks(0.1 + 0.2), alpha_ticks(0.3));
    }

    #[test]
    fn cache_json_roundtrip() {
        let pair = PlaPair::from_values(vec![0.0, 1.0, 2.0], vec![0.0, 0.5, 1.0], vec![0.0, 0.5, 1.0], 1.0);
        let pairs = PairSet::new(vec![("pv:14".into(), 12, pair)]);
        let mut cache = SetCache::new(IntervalMethod::Milp);
        let s = cache.raw_set(&pairs, 0.6, &params()).unwrap().unwrap();
        let text = cache.to_json().unwrap();
        assert!(text.contains("\"0.60\""));
        let mut back = SetCache::from_json(&text, IntervalMethod::Milp).unwrap();
        assert_eq!(back.raw_set(&pairs, 0.6, &params()).unwrap().unwrap().entries(), s.entries());
    }
}
