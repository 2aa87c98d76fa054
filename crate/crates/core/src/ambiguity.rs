//! Ambiguity sets for one uncertain quantity at one hour: imprecise
//! Dirichlet model (IDM) credible bands over the empirical support, and the
//! worst-case CDF pair drawn from them.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta_reg, ln_beta};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AmbiguityError {
    #[error("no samples")]
    Empty,
    #[error("non-finite sample {0}")]
    NonFinite(f64),
    #[error("negative sample {0}")]
    Negative(f64),
    #[error("total count is zero")]
    ZeroTotal,
    #[error("count {n_k} exceeds total {n}")]
    CountExceedsTotal { n_k: u64, n: u64 },
    #[error("invalid IDM parameters: lambda={lambda}, gamma={gamma}")]
    InvalidParams { lambda: f64, gamma: f64 },
    #[error("probability {0} outside (0, 1)")]
    ProbabilityOutOfRange(f64),
    #[error("invalid Beta shape ({a}, {b})")]
    InvalidShape { a: f64, b: f64 },
    #[error("cutoff {cutoff} outside [0, {max}]")]
    CutoffOutOfRange { cutoff: f64, max: f64 },
    #[error("invalid bin width {0}")]
    InvalidBinWidth(f64),
}

/// Counts of distinct (possibly binned) sample values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalHistogram {
    pub support: Vec<f64>,
    pub counts: Vec<u64>,
    pub n: u64,
}

impl EmpiricalHistogram {
    /// Support point with the largest count, leftmost on ties.
    pub fn mode(&self) -> f64 {
        let mut best = 0;
        for k in 1..self.counts.len() {
            if self.counts[k] > self.counts[best] {
                best = k;
            }
        }
        self.support[best]
    }

    pub fn cumulative(&self) -> Vec<u64> {
        self.counts
            .iter()
            .scan(0u64, |acc, &c| {
                *acc += c;
                Some(*acc)
            })
            .collect()
    }
}

/// Above this many distinct values, automatic binning switches to fixed bins.
pub const AUTO_RAW_LIMIT: usize = 200;
/// Bin count used by automatic binning.
pub const AUTO_BINS: usize = 50;

/// How samples are grouped into support points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Binning {
    /// Raw distinct values when there are at most 200 of them, else 50
    /// equal-width bins over the sample range.
    Auto,
    /// Raw distinct values.
    Raw,
    /// Equal-width bins anchored at the sample minimum; support points are
    /// the centers of non-empty bins.
    Width(f64),
}

impl Binning {
    /// `0` means raw values.
    pub fn from_width(w: f64) -> Binning {
        if w == 0.0 {
            Binning::Raw
        } else {
            Binning::Width(w)
        }
    }
}

pub fn histogram_from_samples(samples: &[f64], binning: Binning) -> Result<EmpiricalHistogram, AmbiguityError> {
    if samples.is_empty() {
        return Err(AmbiguityError::Empty);
    }
    for &s in samples {
        if !s.is_finite() {
            return Err(AmbiguityError::NonFinite(s));
        }
        if s < 0.0 {
            return Err(AmbiguityError::Negative(s));
        }
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let raw = || {
        let mut support: Vec<f64> = Vec::new();
        let mut counts: Vec<u64> = Vec::new();
        for &s in &sorted {
            if support.last() == Some(&s) {
                *counts.last_mut().unwrap() += 1;
            } else {
                support.push(s);
                counts.push(1);
            }
        }
        (support, counts)
    };
    let (support, counts) = match binning {
        Binning::Raw => raw(),
        Binning::Auto => {
            let (support, counts) = raw();
            if support.len() <= AUTO_RAW_LIMIT {
                (support, counts)
            } else {
                let w = (sorted[sorted.len() - 1] - sorted[0]) / AUTO_BINS as f64;
                bin(&sorted, w, AUTO_BINS)
            }
        }
        Binning::Width(w) => {
            if !(w.is_finite() && w > 0.0) {
                return Err(AmbiguityError::InvalidBinWidth(w));
            }
            let nbins = (((sorted[sorted.len() - 1] - sorted[0]) / w).floor() as usize) + 1;
            bin(&sorted, w, nbins)
        }
    };
    Ok(EmpiricalHistogram {
        n: samples.len() as u64,
        support,
        counts,
    })
}

fn bin(sorted: &[f64], w: f64, nbins: usize) -> (Vec<f64>, Vec<u64>) {
    let lo = sorted[0];
    let mut counts = vec![0u64; nbins];
    for &s in sorted {
        let k = (((s - lo) / w).floor() as usize).min(nbins - 1);
        counts[k] += 1;
    }
    counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(k, &c)| (lo + (k as f64 + 0.5) * w, c))
        .unzip()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdmParams {
    pub lambda: f64,
    pub gamma: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            gamma: 0.95,
        }
    }
}

impl IdmParams {
    pub fn validate(&self) -> Result<(), AmbiguityError> {
        if self.lambda > 0.0 && self.lambda.is_finite() && self.gamma > 0.0 && self.gamma < 1.0 {
            Ok(())
        } else {
            Err(AmbiguityError::InvalidParams {
                lambda: self.lambda,
                gamma: self.gamma,
            })
        }
    }
}

/// Posterior probability interval `[n_k/(n+λ), (n_k+λ)/(n+λ)]`.
pub fn idm_probability_interval(n_k: u64, n: u64, lambda: f64) -> Result<(f64, f64), AmbiguityError> {
    if n == 0 {
        return Err(AmbiguityError::ZeroTotal);
    }
    if n_k > n {
        return Err(AmbiguityError::CountExceedsTotal { n_k, n });
    }
    if !(lambda > 0.0) {
        return Err(AmbiguityError::InvalidParams { lambda, gamma: f64::NAN });
    }
    let d = n as f64 + lambda;
    Ok((n_k as f64 / d, (n_k as f64 + lambda) / d))
}

/// Quantile of Beta(a, b): the `x` with `I_x(a, b) = p`.
pub fn beta_inverse_cdf(p: f64, a: f64, b: f64) -> Result<f64, AmbiguityError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(AmbiguityError::ProbabilityOutOfRange(p));
    }
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(AmbiguityError::InvalidShape { a, b });
    }
    Ok(beta_quantile_from(p, a, b, a / (a + b)))
}

/// Safeguarded Newton from the start `x0` in (0, 1).
fn beta_quantile_from(p: f64, a: f64, b: f64, x0: f64) -> f64 {
    let ln_b = ln_beta(a, b);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut x = x0;
    for _ in 0..300 {
        let f = beta_reg(a, b, x) - p;
        if f == 0.0 {
            return x;
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= 1e-15 * hi.max(1e-300) {
            break;
        }
        let ln_pdf = (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() - ln_b;
        let pdf = ln_pdf.exp();
        let newton = x - f / pdf;
        x = if pdf.is_finite() && pdf > 0.0 && newton > lo && newton < hi {
            // one-sided convergence never collapses the bracket
            if (newton - x).abs() <= 1e-12 * x {
                return newton;
            }
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    x
}

/// Piecewise-constant interpolation between grid points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepRule {
    /// `F(x) = v_k` on `[g_k, g_{k+1})`.
    CarryForward,
    /// `F(x) = v_{k+1}` on `(g_k, g_{k+1}]`.
    CarryBackward,
}

/// A CDF that can be evaluated and integrated exactly.
pub trait Cdf {
    fn eval(&self, x: f64) -> f64;
    /// Exact `∫_a^b F(x) dx` for `a ≤ b`.
    fn integral(&self, a: f64, b: f64) -> f64;
    /// Right end of the domain where the CDF is tabulated.
    fn domain_max(&self) -> f64;
}

/// Step CDF defined on a grid; 0 below the first grid point, 1 above the last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepCdf {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub rule: StepRule,
}

impl StepCdf {
    /// Value on the open piece `(g_k, g_{k+1})`.
    fn piece(&self, k: usize) -> f64 {
        match self.rule {
            StepRule::CarryForward => self.values[k],
            StepRule::CarryBackward => self.values[k + 1],
        }
    }
}

impl Cdf for StepCdf {
    fn eval(&self, x: f64) -> f64 {
        let g = &self.grid;
        let last = g.len() - 1;
        if x < g[0] {
            return 0.0;
        }
        if x > g[last] {
            return 1.0;
        }
        // number of grid points <= x
        let upto = g.partition_point(|&p| p <= x);
        match self.rule {
            StepRule::CarryForward => self.values[upto - 1],
            StepRule::CarryBackward => {
                if g[upto - 1] == x {
                    self.values[upto - 1]
                } else {
                    self.values[upto]
                }
            }
        }
    }

    fn integral(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let g = &self.grid;
        let last = g.len() - 1;
        let mut total = 0.0;
        // above the grid the CDF is 1
        if b > g[last] {
            total += b - a.max(g[last]);
        }
        for k in 0..last {
            let lo = a.max(g[k]);
            let hi = b.min(g[k + 1]);
            if hi > lo {
                total += (hi - lo) * self.piece(k);
            }
        }
        total
    }

    fn domain_max(&self) -> f64 {
        *self.grid.last().unwrap()
    }
}

/// Lower and upper CDF envelopes of an IDM ambiguity set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfBand {
    pub grid: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub params: IdmParams,
    pub n: u64,
    /// Empirical mode of the underlying samples.
    pub mode: f64,
}

impl CdfBand {
    pub fn lower_cdf(&self) -> StepCdf {
        StepCdf {
            grid: self.grid.clone(),
            values: self.lower.clone(),
            rule: StepRule::CarryForward,
        }
    }

    pub fn upper_cdf(&self) -> StepCdf {
        StepCdf {
            grid: self.grid.clone(),
            values: self.upper.clone(),
            rule: StepRule::CarryBackward,
        }
    }

    /// Mean of `upper - lower` over the grid points.
    pub fn mean_width(&self) -> f64 {
        let s: f64 = self.upper.iter().zip(&self.lower).map(|(u, l)| u - l).sum();
        s / self.grid.len() as f64
    }

    /// Structural violations; empty for a valid band.
    pub fn check(&self) -> Vec<String> {
        let mut out = Vec::new();
        let m = self.grid.len();
        if m == 0 || self.lower.len() != m || self.upper.len() != m {
            out.push("length mismatch".to_string());
            return out;
        }
        for k in 0..m {
            let (l, u) = (self.lower[k], self.upper[k]);
            if !(0.0 <= l && l <= u + 1e-12 && u <= 1.0) {
                out.push(format!("point {k}: lower {l} upper {u} not ordered in [0, 1]"));
            }
            if k > 0 {
                if self.grid[k] <= self.grid[k - 1] {
                    out.push(format!("grid not ascending at {k}"));
                }
                if self.lower[k] < self.lower[k - 1] || self.upper[k] < self.upper[k - 1] {
                    out.push(format!("envelope decreasing at {k}"));
                }
            }
        }
        if self.upper[m - 1] != 1.0 {
            out.push("upper CDF below 1 at the last grid point".to_string());
        }
        out
    }
}

/// Credible band from cumulative counts, optionally extended to `span`.
///
/// Extension points below the sample support have cumulative count 0,
/// points above it have count `n`.
pub fn idm_credible_band(
    hist: &EmpiricalHistogram,
    params: &IdmParams,
    span: Option<(f64, f64)>,
) -> Result<CdfBand, AmbiguityError> {
    params.validate()?;
    if hist.n == 0 {
        return Err(AmbiguityError::ZeroTotal);
    }
    let n = hist.n;
    let cum = hist.cumulative();
    let mut grid = Vec::with_capacity(hist.support.len() + 2);
    let mut counts = Vec::with_capacity(hist.support.len() + 2);
    if let Some((lo, _)) = span {
        if lo < hist.support[0] {
            grid.push(lo);
            counts.push(0);
        }
    }
    grid.extend_from_slice(&hist.support);
    counts.extend_from_slice(&cum);
    if let Some((_, hi)) = span {
        if hi > *hist.support.last().unwrap() {
            grid.push(hi);
            counts.push(n);
        }
    }
    let lam = params.lambda;
    let nf = n as f64;
    let mut lower = Vec::with_capacity(grid.len());
    let mut upper = Vec::with_capacity(grid.len());
    // neighbouring quantiles are close, so each solve starts from the last one
    let (mut lo_start, mut hi_start) = (None, None);
    let start = |prev: Option<f64>, a: f64, b: f64| prev.filter(|&x| x > 0.0 && x < 1.0).unwrap_or(a / (a + b));
    for (k, &c) in counts.iter().enumerate() {
        if k > 0 && counts[k - 1] == c {
            lower.push(lower[k - 1]);
            upper.push(upper[k - 1]);
            continue;
        }
        let cf = c as f64;
        let lo = if c == 0 {
            0.0
        } else {
            let (a, b) = (cf, lam + nf - cf);
            let x = beta_quantile_from((1.0 - params.gamma) / 2.0, a, b, start(lo_start, a, b));
            lo_start = Some(x);
            x
        };
        let hi = if c == n {
            1.0
        } else {
            let (a, b) = (lam + cf, nf - cf);
            let x = beta_quantile_from((1.0 + params.gamma) / 2.0, a, b, start(hi_start, a, b));
            hi_start = Some(x);
            x
        };
        lower.push(lo);
        upper.push(hi);
    }
    let band = CdfBand {
        grid,
        lower,
        upper,
        params: *params,
        n,
        mode: hist.mode(),
    };
    debug_assert!(band.check().is_empty(), "{:?}", band.check());
    Ok(band)
}

/// Upper CDF (worst downside) and lower CDF (worst upside) of a band.
#[derive(Debug, Clone, PartialEq)]
pub struct WorstCasePair {
    pub downside: StepCdf,
    pub upside: StepCdf,
}

pub fn worst_case_cdfs(band: &CdfBand) -> WorstCasePair {
    WorstCasePair {
        downside: band.upper_cdf(),
        upside: band.lower_cdf(),
    }
}

/// `∫_0^lb F(x) dx`.
pub fn downside_risk(cdf: &dyn Cdf, lb: f64) -> Result<f64, AmbiguityError> {
    let max = cdf.domain_max();
    if !(lb >= 0.0 && lb <= max) {
        return Err(AmbiguityError::CutoffOutOfRange { cutoff: lb, max });
    }
    Ok(cdf.integral(0.0, lb))
}

/// `∫_ub^max (1 - F(x)) dx`.
pub fn upside_risk(cdf: &dyn Cdf, ub: f64) -> Result<f64, AmbiguityError> {
    let max = cdf.domain_max();
    if !(ub >= 0.0 && ub <= max) {
        return Err(AmbiguityError::CutoffOutOfRange { cutoff: ub, max });
    }
    Ok((max - ub) - cdf.integral(ub, max))
}

/// Multiplier on the largest observed load that sets the load band span.
pub const LOAD_SPAN_FACTOR: f64 = 1.5;

/// Kind of an uncertain source, from its id prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceKind {
    Pv,
    Load,
}

impl SourceKind {
    pub fn of(source: &str) -> SourceKind {
        if source.starts_with("pv:") {
            SourceKind::Pv
        } else {
            SourceKind::Load
        }
    }
}

/// Grid span for a source: `[0, pv_cap]` for PV, `[0, 1.5 max]` for loads.
pub fn band_span(source: &str, samples: &[f64], pv_cap: f64) -> (f64, f64) {
    match SourceKind::of(source) {
        SourceKind::Pv => (0.0, pv_cap),
        SourceKind::Load => {
            let max = samples.iter().cloned().fold(0.0, f64::max);
            (0.0, LOAD_SPAN_FACTOR * max)
        }
    }
}

/// Band for one `(source, hour)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceBand {
    pub source: String,
    pub hour: usize,
    #[serde(flatten)]
    pub band: CdfBand,
}

/// All bands of a study, keyed by `(source, hour)`.
#[derive(Debug, Clone, Default)]
pub struct BandSet {
    entries: Vec<SourceBand>,
    index: HashMap<(String, usize), usize>,
}

impl BandSet {
    pub fn new(mut entries: Vec<SourceBand>) -> Self {
        entries.sort_by(|a, b| (&a.source, a.hour).cmp(&(&b.source, b.hour)));
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, e)| ((e.source.clone(), e.hour), i))
            .collect();
        Self { entries, index }
    }

    pub fn get(&self, source: &str, hour: usize) -> Option<&CdfBand> {
        self.index
            .get(&(source.to_string(), hour))
            .map(|&i| &self.entries[i].band)
    }

    pub fn entries(&self) -> &[SourceBand] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(&self.entries)
    }

    pub fn from_json(text: &str) -> serde_json::Result<BandSet> {
        Ok(BandSet::new(serde_json::from_str(text)?))
    }
}

/// Build one band per `(source, hour)` pool, in parallel.
pub fn build_bands(
    pools: &BTreeMap<(String, usize), Vec<f64>>,
    params: &IdmParams,
    binning: Binning,
    pv_cap: f64,
) -> Result<BandSet, AmbiguityError> {
    params.validate()?;
    let items: Vec<(&(String, usize), &Vec<f64>)> = pools.iter().collect();
    let entries = items
        .par_iter()
        .map(|((source, hour), samples)| {
            let hist = histogram_from_samples(samples, binning)?;
            let span = band_span(source, samples, pv_cap);
            Ok(SourceBand {
                source: source.clone(),
                hour: *hour,
                band: idm_credible_band(&hist, params, Some(span))?,
            })
        })
        .collect::<Result<Vec<_>, AmbiguityError>>()?;
    Ok(BandSet::new(entries))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn raw_histogram() {
        let h = histogram_from_samples(&[1.0, 1.0, 2.0, 3.0], Binning::Raw).unwrap();
        assert_eq!(h.support, vec![1.0, 2.0, 3.0]);
        assert_eq!(h.counts, vec![2, 1, 1]);
        assert_eq!(h.n, 4);
        assert_eq!(h.mode(), 1.0);
    }

    #[test]
    fn constant_samples_single_point() {
        let h = histogram_from_samples(&[5.0; 7], Binning::from_width(0.0)).unwrap();
        assert_eq!(h.support, vec![5.0]);
        assert_eq!(h.counts, vec![7]);
    }

    #[test]
    fn histogram_errors() {
        assert_eq!(histogram_from_samples(&[], Binning::Auto), Err(AmbiguityError::Empty));
        assert_eq!(
            histogram_from_samples(&[1.0, -0.5], Binning::Auto),
            Err(AmbiguityError::Negative(-0.5))
        );
    }

    #[test]
    fn auto_binning_switches_above_limit() {
        let many: Vec<f64> = (0..500).map(|i| i as f64 * 0.37).collect();
        let h = histogram_from_samples(&many, Binning::Auto).unwrap();
        assert_eq!(h.support.len(), AUTO_BINS);
        assert_eq!(h.counts.iter().sum::<u64>(), 500);
        let few: Vec<f64> = (0..150).map(|i| i as f64).collect();
        assert_eq!(histogram_from_samples(&few, Binning::Auto).unwrap().support.len(), 150);
    }

    #[test]
    fn fixed_width_bins_use_centers() {
        let h = histogram_from_samples(&[0.0, 0.4, 1.1, 2.9], Binning::Width(1.0)).unwrap();
        assert_eq!(h.support, vec![0.5, 1.5, 2.5]);
        assert_eq!(h.counts, vec![2, 1, 1]);
    }

    #[test]
    fn idm_interval_examples() {
        assert_eq!(idm_probability_interval(3, 10, 1.0).unwrap(), (3.0 / 11.0, 4.0 / 11.0));
        assert_eq!(idm_probability_interval(0, 10, 1.0).unwrap(), (0.0, 1.0 / 11.0));
        assert_eq!(idm_probability_interval(10, 10, 1.0).unwrap(), (10.0 / 11.0, 1.0));
        assert_eq!(idm_probability_interval(1, 0, 1.0), Err(AmbiguityError::ZeroTotal));
    }

    #[test]
    fn beta_quantile_closed_forms() {
        assert!((beta_inverse_cdf(0.5, 1.0, 1.0).unwrap() - 0.5).abs() < 1e-12);
        assert!((beta_inverse_cdf(0.25, 2.0, 1.0).unwrap() - 0.5).abs() < 1e-12);
        assert!(beta_inverse_cdf(0.0, 1.0, 1.0).is_err());
        assert!(beta_inverse_cdf(1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn band_end_conditions() {
        let h = histogram_from_samples(&[1.0, 2.0, 2.0, 3.0], Binning::Raw).unwrap();
        let b = idm_credible_band(&h, &IdmParams::default(), Some((0.0, 5.0))).unwrap();
        assert_eq!(b.grid, vec![0.0, 1.0, 2.0, 3.0, 5.0]);
        assert_eq!(b.lower[0], 0.0);
        assert_eq!(b.upper[3], 1.0);
        assert_eq!(b.upper[4], 1.0);
        assert!(b.check().is_empty());
    }

    #[test]
    fn step_rules() {
        let b = CdfBand {
            grid: vec![0.0, 1.0, 2.0],
            lower: vec![0.1, 0.4, 0.8],
            upper: vec![0.3, 0.7, 1.0],
            params: IdmParams::default(),
            n: 1,
            mode: 0.0,
        };
        let (lo, up) = (b.lower_cdf(), b.upper_cdf());
        assert_eq!(lo.eval(0.5), 0.1);
        assert_eq!(up.eval(0.5), 0.7);
        assert_eq!(lo.eval(1.0), 0.4);
        assert_eq!(up.eval(1.0), 0.7);
        assert_eq!(lo.eval(-1.0), 0.0);
        assert_eq!(up.eval(2.5), 1.0);
        let pair = worst_case_cdfs(&b);
        assert_eq!(pair.downside, up);
        assert_eq!(pair.upside, lo);
    }

    #[test]
    fn degenerate_band_pair_members_agree_in_value() {
        let b = CdfBand {
            grid: vec![0.0, 1.0, 2.0],
            lower: vec![0.2, 0.5, 1.0],
            upper: vec![0.2, 0.5, 1.0],
            params: IdmParams::default(),
            n: 1,
            mode: 0.0,
        };
        let p = worst_case_cdfs(&b);
        for x in [0.0, 1.0, 2.0] {
            assert_eq!(p.downside.eval(x), p.upside.eval(x));
        }
    }

    #[test]
    fn risk_integrals() {
        let f = StepCdf {
            grid: vec![0.0, 1.0, 2.0],
            values: vec![0.25, 0.5, 1.0],
            rule: StepRule::CarryForward,
        };
        assert_eq!(downside_risk(&f, 0.0).unwrap(), 0.0);
        assert!((downside_risk(&f, 1.5).unwrap() - (0.25 + 0.25)).abs() < 1e-15);
        assert!((upside_risk(&f, 0.5).unwrap() - (0.5 * 0.75 + 0.5)).abs() < 1e-15);
        assert!(downside_risk(&f, 3.0).is_err());
        assert!(upside_risk(&f, -1.0).is_err());
    }

    #[test]
    fn band_json_roundtrip() {
        let h = histogram_from_samples(&[1.0, 2.0, 2.5], Binning::Raw).unwrap();
        let band = idm_credible_band(&h, &IdmParams::default(), Some((0.0, 4.0))).unwrap();
        let set = BandSet::new(vec![SourceBand {
            source: "pv:14".into(),
            hour: 12,
            band,
        }]);
        let text = set.to_json().unwrap();
        for key in ["\"source\"", "\"hour\"", "\"grid\"", "\"lower\"", "\"upper\"", "\"lambda\"", "\"gamma\"", "\"n\""] {
            assert!(text.contains(key), "{key}");
        }
        let back = BandSet::from_json(&text).unwrap();
        assert_eq!(back.entries(), set.entries());
        assert!(back.get("pv:14", 12).is_some());
    }

    proptest! {
        #[test]
        fn interval_width_law(n in 1u64..10_000, frac in 0.0f64..=1.0, lambda in 0.01f64..50.0) {
            let n_k = ((n as f64) * frac).floor() as u64;
            let (lo, hi) = idm_probability_interval(n_k, n, lambda).unwrap();
            prop_assert!(((hi - lo) - lambda / (n as f64 + lambda)).abs() < 1e-15);
            let emp = n_k as f64 / n as f64;
            prop_assert!(lo <= emp + 1e-15 && emp <= hi + 1e-15);
        }

        #[test]
        fn bands_are_monotone(samples in prop::collection::vec(0.0f64..100.0, 1..300),
                              lambda in 0.1f64..5.0, gamma in 0.5f64..0.99) {
            let h = histogram_from_samples(&samples, Binning::Auto).unwrap();
            let b = idm_credible_band(&h, &IdmParams { lambda, gamma }, Some((0.0, 150.0))).unwrap();
            prop_assert!(b.check().is_empty(), "{:?}", b.check());
        }

        #[test]
        fn downside_dominance(cut in 0.0f64..150.0, samples in prop::collection::vec(0.0f64..100.0, 1..100)) {
            let h = histogram_from_samples(&samples, Binning::Raw).unwrap();
            let b = idm_credible_band(&h, &IdmParams::default(), Some((0.0, 150.0))).unwrap();
            let p = worst_case_cdfs(&b);
            let d = downside_risk(&p.downside, cut).unwrap();
            let u = downside_risk(&p.upside, cut).unwrap();
            prop_assert!(d >= u - 1e-12);
            prop_assert!(upside_risk(&p.upside, cut).unwrap() >= upside_risk(&p.downside, cut).unwrap() - 1e-12);
        }
    }
}
