//! Out-of-sample post-evaluation of first-stage schedules and σ sweeps.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dispatch::{evaluate_recourse, DispatchError, FirstStageSchedule};
use crate::ingest::HistoryTable;
use crate::milp::SolveParams;
use crate::netmodel::{NetworkCase, Scenario};
use crate::robust::{solve_cl_digdt, solve_igdt, BudgetSpec, RobustError, RobustOptions};
use crate::uset::{PairSet, SetCache};

pub const DEFAULT_SCENARIOS: usize = 50;
pub const NOISE: f64 = 0.05;
/// Seed of the committed out-of-sample draw.
pub const OOS_SEED: u64 = 7;
const MAX_DRAWS: usize = 1000;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("holdout history is empty")]
    EmptyHoldout,
    #[error("could not draw a scenario distinct from the training days")]
    NoDistinctScenario,
    #[error("sigma values must be ascending and >= 0")]
    SigmaOrder,
    #[error(transparent)]
    Dispatch(#[from] DispatchError),
    #[error(transparent)]
    Robust(#[from] RobustError),
}

/// Seeded scenarios from holdout days with uniform ±5% multiplicative noise
/// per entry. PV is clipped to `[0, pv_cap]`. A draw equal to some training
/// day is rejected.
pub fn sample_oos_scenarios(
    case: &NetworkCase,
    holdout: &HistoryTable,
    train: &HistoryTable,
    n: usize,
    seed: u64,
) -> Result<Vec<Scenario>, EvalError> {
    let days: Vec<u32> = holdout.days().into_iter().collect();
    if days.is_empty() {
        return Err(EvalError::EmptyHoldout);
    }
    let base: Vec<Scenario> = days.iter().map(|&d| holdout.day_scenario(case, d)).collect();
    let training: Vec<Scenario> = train.days().into_iter().map(|d| train.day_scenario(case, d)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let mut draws = 0;
        let s = loop {
            draws += 1;
            if draws > MAX_DRAWS {
                return Err(EvalError::NoDistinctScenario);
            }
            let mut s = base[rng.random_range(0..base.len())].clone();
            for row in s.load.iter_mut() {
                for v in row.iter_mut() {
                    *v = (*v * rng.random_range(1.0 - NOISE..=1.0 + NOISE)).max(0.0);
                }
            }
            for row in s.pv.iter_mut() {
                for v in row.iter_mut() {
                    *v = (*v * rng.random_range(1.0 - NOISE..=1.0 + NOISE)).clamp(0.0, case.pv_cap);
                }
            }
            if !training.contains(&s) {
                break s;
            }
        };
        out.push(s);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: String,
    pub first_stage_cost: f64,
    /// Recourse cost per scenario, `None` when infeasible.
    pub recourse: Vec<Option<f64>>,
    /// `None` when no scenario is feasible for every method.
    pub epb: Option<f64>,
    pub reliability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub methods: Vec<MethodReport>,
    /// Indices of scenarios feasible under all methods.
    pub common: Vec<usize>,
}

impl EvaluationReport {
    pub fn nf(&self) -> usize {
        self.common.len()
    }

    pub fn method(&self, name: &str) -> Option<&MethodReport> {
        self.methods.iter().find(|m| m.method == name)
    }

    /// One row per (method, scenario).
    pub fn detail_csv(&self) -> String {
        let mut s = String::from("method,scenario,feasible,recourse_cost\n");
        for m in &self.methods {
            for (k, r) in m.recourse.iter().enumerate() {
                match r {
                    Some(c) => writeln!(s, "{},{k},true,{c}", m.method).unwrap(),
                    None => writeln!(s, "{},{k},false,", m.method).unwrap(),
                }
            }
        }
        s
    }

    pub fn summary_csv(&self) -> String {
        let mut s = String::from("method,first_stage_cost,epb,reliability,nf\n");
        for m in &self.methods {
            let epb = m.epb.map(|v| v.to_string()).unwrap_or_default();
            writeln!(s, "{},{},{epb},{},{}", m.method, m.first_stage_cost, m.reliability, self.nf()).unwrap();
        }
        s
    }
}

/// Assemble a report from first-stage costs and per-scenario recourse
/// outcomes (all rows of equal length).
pub fn summarize(rows: Vec<(String, f64, Vec<Option<f64>>)>) -> EvaluationReport {
    let n = rows.first().map_or(0, |r| r.2.len());
    let common: Vec<usize> = (0..n).filter(|&k| rows.iter().all(|r| r.2[k].is_some())).collect();
    let methods = rows
        .into_iter()
        .map(|(method, first, recourse)| {
            let epb = if common.is_empty() {
                None
            } else {
                let sum: f64 = common.iter().map(|&k| recourse[k].unwrap()).sum();
                Some(first + sum / common.len() as f64)
            };
            let feasible = recourse.iter().filter(|r| r.is_some()).count();
            let reliability = if n == 0 { 0.0 } else { feasible as f64 / n as f64 };
            MethodReport {
                method,
                first_stage_cost: first,
                recourse,
                epb,
                reliability,
            }
        })
        .collect();
    EvaluationReport { methods, common }
}

/// Recourse of every schedule on every scenario; EPB over the scenarios
/// feasible for all methods.
pub fn post_evaluate(
    case: &NetworkCase,
    schedules: &BTreeMap<String, FirstStageSchedule>,
    scenarios: &[Scenario],
    params: &SolveParams,
) -> Result<EvaluationReport, EvalError> {
    let mut rows = Vec::new();
    for (name, sched) in schedules {
        let recourse = scenarios
            .par_iter()
            .map(|s| evaluate_recourse(case, sched, s, params).map(|r| r.cost))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push((name.clone(), sched.cost(case), recourse));
    }
    Ok(summarize(rows))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityPoint {
    pub sigma: f64,
    pub delta_star: Option<f64>,
    pub alpha_star: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityCurve {
    pub points: Vec<SensitivityPoint>,
}

impl SensitivityCurve {
    pub fn csv(&self) -> String {
        let mut s = String::from("sigma,delta_star,alpha_star\n");
        for p in &self.points {
            let f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            writeln!(s, "{},{},{}", p.sigma, f(p.delta_star), f(p.alpha_star)).unwrap();
        }
        s
    }

    pub fn deltas(&self) -> Vec<Option<f64>> {
        self.points.iter().map(|p| p.delta_star).collect()
    }

    pub fn alphas(&self) -> Vec<Option<f64>> {
        self.points.iter().map(|p| p.alpha_star).collect()
    }
}

/// Whether present values never decrease (beyond `tol`).
pub fn non_decreasing(values: &[Option<f64>], tol: f64) -> bool {
    let v: Vec<f64> = values.iter().flatten().copied().collect();
    v.windows(2).all(|w| w[1] >= w[0] - tol)
}

/// Index where a trailing run of equal values (within `tol`) of length at
/// least 2 starts, if any.
pub fn plateau_start(values: &[f64], tol: f64) -> Option<usize> {
    let last = *values.last()?;
    let mut start = values.len() - 1;
    while start > 0 && (values[start - 1] - last).abs() <= tol {
        start -= 1;
    }
    (values.len() - start >= 2).then_some(start)
}

/// IGDT and CL-DIGDT at each σ. Infeasible σ values leave gaps.
#[allow(clippy::too_many_arguments)]
pub fn sigma_sweep(
    case: &NetworkCase,
    forecast: &Scenario,
    pairs: &PairSet,
    lambda0: f64,
    sigmas: &[f64],
    epsilon: f64,
    cache: &mut SetCache,
    opts: &RobustOptions,
) -> Result<SensitivityCurve, EvalError> {
    if sigmas.windows(2).any(|w| w[1] < w[0]) || sigmas.iter().any(|&s| !(s >= 0.0)) {
        return Err(EvalError::SigmaOrder);
    }
    let mut points = Vec::new();
    for &sigma in sigmas {
        let b = BudgetSpec::new(lambda0, sigma)?;
        let delta_star = gap(solve_igdt(case, forecast, &b, opts).map(|r| r.delta_star))?;
        let alpha_star = gap(solve_cl_digdt(case, forecast, pairs, &b, epsilon, cache, opts).map(|r| r.alpha_star))?;
        points.push(SensitivityPoint {
            sigma,
            delta_star,
            alpha_star,
        });
    }
    Ok(SensitivityCurve { points })
}

fn gap(r: Result<f64, RobustError>) -> Result<Option<f64>, EvalError> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(RobustError::BudgetInfeasible { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}
