//! Historical PV/load series: CSV I/O, per-hour sample pools, mean
//! forecasts, and a seeded synthetic generator.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, LogNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ambiguity::SourceKind;
use crate::dispatch::{load_source, pv_source};
use crate::netmodel::{NetworkCase, Scenario, IEEE33_LOADS, IEEE33_PV_BUSES, IEEE33_PV_CAP};

pub const HOURS: usize = 24;
/// Seed and length of the shipped synthetic IEEE 33-bus history.
pub const IEEE33_SEED: u64 = 2024;
pub const IEEE33_DAYS: u32 = 365;
/// Fraction of trailing days held out for out-of-sample evaluation.
pub const HOLDOUT_FRACTION: f64 = 0.2;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("duplicate record for day {day}, hour {hour}, source {source_id}")]
    Duplicate { day: u32, hour: usize, source_id: String },
    #[error("negative value {value} for {source_id} at day {day}, hour {hour}")]
    Negative { day: u32, hour: usize, source_id: String, value: f64 },
    #[error("non-finite value for {source_id} at day {day}, hour {hour}")]
    NonFinite { day: u32, hour: usize, source_id: String },
    #[error("hour {0} outside 0..24")]
    Hour(usize),
    #[error("bad source id {0:?}; expected pv:<bus> or load:<bus>")]
    SourceId(String),
    #[error("no samples for {source_id} at hour {hour}")]
    MissingCell { source_id: String, hour: usize },
    #[error("history has no records")]
    Empty,
    #[error("invalid synthetic spec: {0}")]
    Spec(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub day: u32,
    pub hour: usize,
    pub source: String,
    pub value_kw: f64,
}

/// Validated history, keyed by `(source, hour)` then day.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HistoryTable {
    cells: BTreeMap<(String, usize), BTreeMap<u32, f64>>,
}

fn check_source(s: &str) -> Result<(), IngestError> {
    let ok = s
        .split_once(':')
        .is_some_and(|(k, id)| (k == "pv" || k == "load") && id.parse::<usize>().is_ok());
    if ok {
        Ok(())
    } else {
        Err(IngestError::SourceId(s.to_string()))
    }
}

impl HistoryTable {
    pub fn from_records(records: impl IntoIterator<Item = HistoryRecord>) -> Result<Self, IngestError> {
        let mut t = HistoryTable::default();
        for r in records {
            t.insert(r)?;
        }
        Ok(t)
    }

    pub fn insert(&mut self, r: HistoryRecord) -> Result<(), IngestError> {
        if r.hour >= HOURS {
            return Err(IngestError::Hour(r.hour));
        }
        check_source(&r.source)?;
        if !r.value_kw.is_finite() {
            return Err(IngestError::NonFinite {
                day: r.day,
                hour: r.hour,
                source_id: r.source,
            });
        }
        if r.value_kw < 0.0 {
            return Err(IngestError::Negative {
                day: r.day,
                hour: r.hour,
                source_id: r.source,
                value: r.value_kw,
            });
        }
        let cell = self.cells.entry((r.source.clone(), r.hour)).or_default();
        if cell.insert(r.day, r.value_kw).is_some() {
            return Err(IngestError::Duplicate {
                day: r.day,
                hour: r.hour,
                source_id: r.source,
            });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.cells.values().map(|c| c.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn sources(&self) -> BTreeSet<String> {
        self.cells.keys().map(|(s, _)| s.clone()).collect()
    }

    pub fn days(&self) -> BTreeSet<u32> {
        self.cells.values().flat_map(|c| c.keys().copied()).collect()
    }

    pub fn value(&self, source: &str, hour: usize, day: u32) -> Option<f64> {
        self.cells.get(&(source.to_string(), hour))?.get(&day).copied()
    }

    /// Samples of one `(source, hour)` cell in day order.
    pub fn pool(&self, source: &str, hour: usize) -> Vec<f64> {
        self.cells
            .get(&(source.to_string(), hour))
            .map(|c| c.values().copied().collect())
            .unwrap_or_default()
    }

    pub fn pools(&self) -> BTreeMap<(String, usize), Vec<f64>> {
        self.cells
            .iter()
            .map(|(k, c)| (k.clone(), c.values().copied().collect()))
            .collect()
    }

    pub fn records(&self) -> impl Iterator<Item = HistoryRecord> + '_ {
        self.cells.iter().flat_map(|((s, h), c)| {
            c.iter().map(move |(&day, &v)| HistoryRecord {
                day,
                hour: *h,
                source: s.clone(),
                value_kw: v,
            })
        })
    }

    /// Keep only the given days.
    pub fn select_days(&self, keep: &BTreeSet<u32>) -> HistoryTable {
        let cells = self
            .cells
            .iter()
            .map(|(k, c)| {
                let c: BTreeMap<u32, f64> = c.iter().filter(|(d, _)| keep.contains(d)).map(|(&d, &v)| (d, v)).collect();
                (k.clone(), c)
            })
            .filter(|(_, c)| !c.is_empty())
            .collect();
        HistoryTable { cells }
    }

    /// Split by day: the last `holdout_fraction` of days (rounded) form the
    /// holdout.
    pub fn split_holdout(&self, holdout_fraction: f64) -> (HistoryTable, HistoryTable) {
        let days: Vec<u32> = self.days().into_iter().collect();
        let n_hold = ((days.len() as f64) * holdout_fraction).round() as usize;
        let cut = days.len() - n_hold.min(days.len());
        let train: BTreeSet<u32> = days[..cut].iter().copied().collect();
        let hold: BTreeSet<u32> = days[cut..].iter().copied().collect();
        (self.select_days(&train), self.select_days(&hold))
    }

    /// All values of one day as a scenario over `case`; missing cells are 0.
    pub fn day_scenario(&self, case: &NetworkCase, day: u32) -> Scenario {
        let mut s = Scenario::zeros(case.buses.len(), case.steps());
        for (i, bus) in case.buses.iter().enumerate() {
            for t in 0..case.steps() {
                let h = t % HOURS;
                s.load[i][t] = self.value(&load_source(bus.id), h, day).unwrap_or(0.0);
                if bus.has_pv {
                    s.pv[i][t] = self.value(&pv_source(bus.id), h, day).unwrap_or(0.0);
                }
            }
        }
        s
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), IngestError> {
        let mut wr = csv::Writer::from_writer(w);
        let mut recs: Vec<HistoryRecord> = self.records().collect();
        recs.sort_by(|a, b| (a.day, a.hour, &a.source).cmp(&(b.day, b.hour, &b.source)));
        for r in recs {
            wr.serialize(r)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), IngestError> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Parse a history CSV with header `day,hour,source,value_kw`.
pub fn read_history<R: Read>(r: R) -> Result<HistoryTable, IngestError> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let headers = rd.headers()?.clone();
    let want = ["day", "hour", "source", "value_kw"];
    if headers.iter().collect::<Vec<_>>() != want {
        return Err(IngestError::Csv(csv::Error::from(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            format!("expected header {}", want.join(",")),
        ))));
    }
    let mut t = HistoryTable::default();
    for rec in rd.deserialize::<HistoryRecord>() {
        t.insert(rec?)?;
    }
    if t.is_empty() {
        return Err(IngestError::Empty);
    }
    Ok(t)
}

pub fn load_history(path: impl AsRef<Path>) -> Result<HistoryTable, IngestError> {
    read_history(std::fs::File::open(path)?)
}

/// Expected value per `(source, hour)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastSet {
    values: BTreeMap<String, Vec<f64>>,
}

impl ForecastSet {
    pub fn get(&self, source: &str, hour: usize) -> Option<f64> {
        self.values.get(source).and_then(|v| v.get(hour)).copied()
    }

    pub fn sources(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(|s| s.as_str())
    }

    /// Forecast scenario for `case`. Buses without a load source get zero
    /// load; PV buses without a PV source get zero PV.
    pub fn to_scenario(&self, case: &NetworkCase) -> Scenario {
        let mut s = Scenario::zeros(case.buses.len(), case.steps());
        for (i, bus) in case.buses.iter().enumerate() {
            for t in 0..case.steps() {
                let h = t % HOURS;
                s.load[i][t] = self.get(&load_source(bus.id), h).unwrap_or(0.0);
                if bus.has_pv {
                    s.pv[i][t] = self.get(&pv_source(bus.id), h).unwrap_or(0.0).min(case.pv_cap);
                }
            }
        }
        s
    }
}

/// Hourly sample mean of every source; every source must cover all 24 hours.
pub fn make_forecast(history: &HistoryTable) -> Result<ForecastSet, IngestError> {
    if history.is_empty() {
        return Err(IngestError::Empty);
    }
    let mut values = BTreeMap::new();
    for s in history.sources() {
        let mut row = Vec::with_capacity(HOURS);
        for h in 0..HOURS {
            let pool = history.pool(&s, h);
            if pool.is_empty() {
                return Err(IngestError::MissingCell { source_id: s, hour: h });
            }
            row.push(pool.iter().sum::<f64>() / pool.len() as f64);
        }
        values.insert(s, row);
    }
    Ok(ForecastSet { values })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadSpec {
    pub source: String,
    pub base_kw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PvSpec {
    pub source: String,
    pub cap_kw: f64,
}

/// Distribution parameters of the synthetic history.
///
/// Load: `base * profile[h] * LogNormal(-s²/2, s)`, so the hourly mean is
/// `base * profile[h]` with a right tail.
/// PV: zero with probability `pv_zero_prob[h]`, otherwise
/// `cap * pv_shape[h] * Beta(a, b)`; night hours have `pv_shape = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub loads: Vec<LoadSpec>,
    pub load_profile: Vec<f64>,
    pub load_sigma: f64,
    pub pv: Vec<PvSpec>,
    pub pv_shape: Vec<f64>,
    pub pv_zero_prob: Vec<f64>,
    pub pv_beta: (f64, f64),
}

/// Daily load shape, peak 1.0 at 19:00.
pub const DEFAULT_LOAD_PROFILE: [f64; 24] = [
    0.55, 0.50, 0.48, 0.47, 0.48, 0.52, 0.60, 0.70, 0.78, 0.82, 0.84, 0.85, 0.84, 0.82, 0.80, 0.80, 0.83, 0.90, 0.97,
    1.00, 0.98, 0.90, 0.78, 0.65,
];

/// Clear-sky PV shape (fraction of capacity).
pub const DEFAULT_PV_SHAPE: [f64; 24] = [
    0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.05, 0.20, 0.42, 0.63, 0.80, 0.92, 0.96, 0.92, 0.80, 0.63, 0.42, 0.20, 0.05, 0.0,
    0.0, 0.0, 0.0, 0.0,
];

impl SyntheticSpec {
    /// Default spec for the bundled 33-bus feeder.
    pub fn ieee33() -> Self {
        let loads = IEEE33_LOADS
            .iter()
            .filter(|(_, p, _)| *p > 0.0)
            .map(|&(bus, p, _)| LoadSpec {
                source: load_source(bus),
                base_kw: p,
            })
            .collect();
        let pv = IEEE33_PV_BUSES
            .iter()
            .map(|&b| PvSpec {
                source: pv_source(b),
                cap_kw: IEEE33_PV_CAP,
            })
            .collect();
        SyntheticSpec {
            loads,
            load_profile: DEFAULT_LOAD_PROFILE.to_vec(),
            load_sigma: 0.25,
            pv,
            pv_shape: DEFAULT_PV_SHAPE.to_vec(),
            pv_zero_prob: DEFAULT_PV_SHAPE.iter().map(|&s| if s > 0.0 { 0.25 } else { 1.0 }).collect(),
            pv_beta: (1.2, 2.5),
        }
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        let bad = |m: &str| Err(IngestError::Spec(m.to_string()));
        if self.load_profile.len() != HOURS || self.pv_shape.len() != HOURS || self.pv_zero_prob.len() != HOURS {
            return bad("hourly vectors must have 24 entries");
        }
        if !(self.load_sigma >= 0.0 && self.load_sigma.is_finite()) {
            return bad("load_sigma must be finite and >= 0");
        }
        if self.load_profile.iter().chain(&self.pv_shape).any(|&v| !(v >= 0.0 && v.is_finite())) {
            return bad("profiles must be finite and >= 0");
        }
        if self.pv_shape.iter().any(|&v| v > 1.0) {
            return bad("pv_shape must not exceed 1");
        }
        if self.pv_zero_prob.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return bad("pv_zero_prob must lie in [0, 1]");
        }
        if !(self.pv_beta.0 > 0.0 && self.pv_beta.1 > 0.0) {
            return bad("pv_beta shapes must be positive");
        }
        for s in self.loads.iter().map(|l| &l.source).chain(self.pv.iter().map(|p| &p.source)) {
            check_source(s)?;
        }
        if self.loads.iter().any(|l| !(l.base_kw >= 0.0)) || self.pv.iter().any(|p| !(p.cap_kw >= 0.0)) {
            return bad("base loads and capacities must be >= 0");
        }
        Ok(())
    }

    /// Population mean of a cell, if the source exists.
    pub fn hourly_mean(&self, source: &str, hour: usize) -> Option<f64> {
        if let Some(l) = self.loads.iter().find(|l| l.source == source) {
            return Some(l.base_kw * self.load_profile[hour]);
        }
        let p = self.pv.iter().find(|p| p.source == source)?;
        let (a, b) = self.pv_beta;
        Some(p.cap_kw * self.pv_shape[hour] * (1.0 - self.pv_zero_prob[hour]) * a / (a + b))
    }
}

/// Seeded synthetic history of `days` days.
pub fn generate_synthetic(spec: &SyntheticSpec, days: u32, seed: u64) -> Result<HistoryTable, IngestError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = spec.load_sigma;
    let noise = LogNormal::new(-0.5 * s * s, s).map_err(|e| IngestError::Spec(e.to_string()))?;
    let cloud = Beta::new(spec.pv_beta.0, spec.pv_beta.1).map_err(|e| IngestError::Spec(e.to_string()))?;
    let mut t = HistoryTable::default();
    for day in 0..days {
        for h in 0..HOURS {
            for l in &spec.loads {
                let v = l.base_kw * spec.load_profile[h] * noise.sample(&mut rng);
                t.insert(HistoryRecord {
                    day,
                    hour: h,
                    source: l.source.clone(),
                    value_kw: v,
                })?;
            }
            for p in &spec.pv {
                let zero = rng.random::<f64>() < spec.pv_zero_prob[h];
                let c: f64 = cloud.sample(&mut rng);
                let v = if zero || spec.pv_shape[h] == 0.0 {
                    0.0
                } else {
                    (p.cap_kw * spec.pv_shape[h] * c).min(p.cap_kw)
                };
                t.insert(HistoryRecord {
                    day,
                    hour: h,
                    source: p.source.clone(),
                    value_kw: v,
                })?;
            }
        }
    }
    Ok(t)
}

/// Whether a source id denotes PV.
pub fn is_pv(source: &str) -> bool {
    SourceKind::of(source) == SourceKind::Pv
}
