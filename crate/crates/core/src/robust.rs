//! Robust dispatch: the classic IGDT benchmark and CL-DIGDT.
//!
//! Both reduce the two-level worst-case problem to a single MILP whose
//! second stage sits at the extreme scenario of the uncertainty set (loads at
//! their upper bounds, PV at its lower bounds).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ambiguity::SourceKind;
use crate::dispatch::{
    self, best_case_scenario, build_first_stage, build_second_stage, extract_first_stage, worst_case_scenario,
    DispatchError, FirstStage, FirstStageSchedule, FirstStageVars, ScenarioExpr, SecondStageVars,
};
use crate::milp::{self, ConstraintRef, LinExpr, MilpError, MilpModel, Sense, SolveParams, SolveStatus, VarRef};
use crate::netmodel::{NetworkCase, Scenario};
use crate::uset::{alpha_ticks, ConfidenceSet, PairSet, SetCache, SetEntry, UsetError, ALPHA_TICK};

/// Relative slack on the budget row, absorbing solver round-off when the
/// budget equals Λ₀ exactly.
pub const BUDGET_SLACK: f64 = 1e-9;
/// Margin on per-entry big-M values.
pub const BIG_M_MARGIN: f64 = 0.1;
pub const DEFAULT_EPSILON: f64 = 1e-4;
/// Upper bound on δ: beyond it PV would go negative.
pub const DELTA_MAX: f64 = 1.0;
const CANDIDATES: i64 = 10;

#[derive(Debug, Error)]
pub enum RobustError {
    #[error("budget {budget} is infeasible even at zero uncertainty")]
    BudgetInfeasible { budget: f64 },
    #[error("epsilon {0} must lie in [1e-8, 1)")]
    InvalidEpsilon(f64),
    #[error("sigma {0} must be finite and >= 0")]
    InvalidSigma(f64),
    #[error("big-M too small for entry {source_id}@{hour}")]
    BigMTooSmall { source_id: String, hour: usize },
    #[error("solver stopped without an optimal solution ({0:?})")]
    NotOptimal(SolveStatus),
    #[error(transparent)]
    Dispatch(#[from] DispatchError),
    #[error(transparent)]
    Uset(#[from] UsetError),
    #[error(transparent)]
    Solver(#[from] MilpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetSpec {
    pub lambda0: f64,
    pub sigma: f64,
}

impl BudgetSpec {
    pub fn new(lambda0: f64, sigma: f64) -> Result<Self, RobustError> {
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(RobustError::InvalidSigma(sigma));
        }
        Ok(Self { lambda0, sigma })
    }

    pub fn budget(&self) -> f64 {
        (1.0 + self.sigma) * self.lambda0
    }

    fn limit(&self) -> f64 {
        self.budget() + BUDGET_SLACK * self.lambda0.abs()
    }

    /// `cost` respects the budget up to `1e-6 Λ₀`.
    pub fn satisfied_by(&self, cost: f64) -> bool {
        cost <= self.budget() + 1e-6 * self.lambda0.abs()
    }
}

/// Options shared by the robust solvers.
#[derive(Debug, Clone, Default)]
pub struct RobustOptions {
    /// Also require recourse feasibility at the opposite corner (max PV,
    /// min load). Cost at that corner is not budgeted.
    pub enforce_corners: bool,
    pub solve: SolveParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IgdtResult {
    pub delta_star: f64,
    pub budget: BudgetSpec,
    pub schedule: FirstStageSchedule,
    pub first_stage_cost: f64,
    pub worst_case_cost: f64,
}

/// Scenario at uncertainty extent δ: loads scaled by `1 + δ`, PV by `1 - δ`.
pub fn igdt_scenario(forecast: &Scenario, delta: f64) -> Scenario {
    let scale = |m: &Vec<Vec<f64>>, f: f64| m.iter().map(|r| r.iter().map(|v| v * f).collect()).collect();
    Scenario {
        pv: scale(&forecast.pv, 1.0 - delta),
        load: scale(&forecast.load, 1.0 + delta),
    }
}

fn delta_expr(forecast: &Scenario, delta: VarRef, sign_load: f64) -> ScenarioExpr {
    let affine = |m: &Vec<Vec<f64>>, s: f64| {
        m.iter()
            .map(|r| {
                r.iter()
                    .map(|&v| {
                        let mut e = LinExpr::constant(v);
                        if v != 0.0 {
                            e.add_term(delta, s * v);
                        }
                        e
                    })
                    .collect()
            })
            .collect()
    };
    ScenarioExpr {
        pv: affine(&forecast.pv, -sign_load),
        load: affine(&forecast.load, sign_load),
    }
}

/// Solver settings for the robust models. HiGHS presolve weakens the root
/// bound of these models enough that branch-and-bound stalls short of the
/// 1e-6 gap, while the unpresolved root LP is already tight.
fn master_params(p: &SolveParams) -> SolveParams {
    SolveParams {
        presolve: false,
        ..p.clone()
    }
}

fn require_optimal(sol: &milp::Solution, budget: &BudgetSpec) -> Result<(), RobustError> {
    match sol.status {
        SolveStatus::Optimal => Ok(()),
        SolveStatus::Infeasible => Err(RobustError::BudgetInfeasible { budget: budget.budget() }),
        s => Err(RobustError::NotOptimal(s)),
    }
}

/// Maximize a shared δ subject to the budget at the δ-extreme scenario.
///
/// A second solve fixes δ at its optimum and minimizes the worst-case cost,
/// so the returned schedule is the cheapest one achieving δ*.
pub fn solve_igdt(
    case: &NetworkCase,
    forecast: &Scenario,
    budget: &BudgetSpec,
    opts: &RobustOptions,
) -> Result<IgdtResult, RobustError> {
    let mut m = MilpModel::new("igdt");
    let delta = m.continuous(0.0, DELTA_MAX, "delta");
    let first = build_first_stage(case, forecast, &mut m)?;
    let fs = FirstStage::Vars(&first);
    let second = build_second_stage(case, &fs, &delta_expr(forecast, delta, 1.0), &mut m, "w_")?;
    if opts.enforce_corners {
        build_second_stage(case, &fs, &delta_expr(forecast, delta, -1.0), &mut m, "c_")?;
    }
    let cost = first.cost.clone() + second.cost.clone();
    let budget_row = m.le("budget", cost.clone(), budget.limit());
    m.set_objective(Sense::Maximize, delta);
    let sol = milp::solve(&m, &master_params(&opts.solve))?;
    require_optimal(&sol, budget)?;
    let delta_star = sol.value(delta);

    // The minimum cost at δ* cannot exceed the first solve's, so the budget
    // row is dropped; with it the fixed-δ problem is nearly infeasible and slow.
    m.set_bounds(delta, delta_star, delta_star);
    m.set_rhs(budget_row, f64::INFINITY);
    m.set_objective(Sense::Minimize, cost.clone());
    let mut sol2 = milp::solve(&m, &master_params(&opts.solve))?;
    if !sol2.is_optimal() {
        // round-off at the fixed δ; fall back to the first solution
        sol2 = sol;
    }
    Ok(IgdtResult {
        delta_star,
        budget: *budget,
        schedule: extract_first_stage(case, &sol2, &first),
        first_stage_cost: sol2.eval(&first.cost),
        worst_case_cost: sol2.eval(&cost),
    })
}

/// Where an uncertainty entry enters the scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Slot {
    kind: SourceKind,
    bus: usize,
    hour: usize,
}

fn slot_of(case: &NetworkCase, source: &str, hour: usize) -> Option<Slot> {
    let kind = SourceKind::of(source);
    let id: usize = source.split_once(':')?.1.parse().ok()?;
    let bus = case.bus_index(id)?;
    if hour >= case.steps() || (kind == SourceKind::Pv && !case.buses[bus].has_pv) {
        return None;
    }
    Some(Slot { kind, bus, hour })
}

/// Point set at the forecast, used as U(0).
pub fn forecast_set(case: &NetworkCase, forecast: &Scenario, like: &ConfidenceSet) -> ConfidenceSet {
    let entries = like
        .entries()
        .iter()
        .map(|e| {
            let v = match slot_of(case, &e.source, e.hour) {
                Some(s) if s.kind == SourceKind::Pv => forecast.pv[s.bus][s.hour],
                Some(s) => forecast.load[s.bus][s.hour],
                None => 0.5 * (e.lo + e.hi),
            };
            SetEntry { lo: v, hi: v, ..e.clone() }
        })
        .collect();
    ConfidenceSet::new(0.0, entries)
}

/// Running envelope of `raw` starting from `base`.
fn envelope_from(base: &ConfidenceSet, raw: &ConfidenceSet) -> ConfidenceSet {
    let entries = raw
        .entries()
        .iter()
        .map(|e| match base.get(&e.source, e.hour) {
            Some(b) => SetEntry {
                lo: e.lo.min(b.lo),
                hi: e.hi.max(b.hi),
                ..e.clone()
            },
            None => e.clone(),
        })
        .collect();
    ConfidenceSet::new(raw.alpha, entries)
}

/// One candidate set inside an iteration.
#[derive(Debug, Clone)]
pub struct Candidate {
    /// Lower endpoint of the sub-interval; the set is tabulated here.
    pub alpha: f64,
    /// Upper endpoint of the sub-interval.
    pub alpha_hi: f64,
    pub set: ConfidenceSet,
}

/// Handles produced by [`embed_alpha_choice`].
#[derive(Debug, Clone)]
pub struct AlphaChoice {
    pub u: Vec<VarRef>,
    pub alpha: LinExpr,
    /// Per entry: slot, selected value expression, per-candidate bounds, M.
    entries: Vec<PinnedEntry>,
}

#[derive(Debug, Clone)]
struct PinnedEntry {
    source: String,
    hour: usize,
    value: LinExpr,
    bounds: Vec<f64>,
    big_m: f64,
}

/// Per-entry big-M: maximal spread of the entry over the candidate sets plus
/// a 10% margin.
pub fn entry_big_m(cands: &[Candidate], source: &str, hour: usize) -> f64 {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for c in cands {
        if let Some(iv) = c.set.get(source, hour) {
            lo = lo.min(iv.lo);
            hi = hi.max(iv.hi);
        }
    }
    (1.0 + BIG_M_MARGIN) * (hi - lo).max(0.0)
}

fn extreme(case: &NetworkCase, kind: SourceKind, lo: f64, hi: f64, worst: bool) -> f64 {
    match (kind, worst) {
        (SourceKind::Load, true) => hi.max(0.0),
        (SourceKind::Load, false) => lo.max(0.0),
        (SourceKind::Pv, true) => lo.clamp(0.0, case.pv_cap),
        (SourceKind::Pv, false) => hi.clamp(0.0, case.pv_cap),
    }
}

/// Add selection binaries `u_m` (exactly one active), the α expression, and
/// big-M pins of every uncertain entry to the extreme bound of the selected
/// candidate set. Returns the scenario expression and the handles.
///
/// `worst = false` pins the opposite corner instead; pass the `u` of an
/// earlier call through `shared_u` to reuse the same selection.
pub fn embed_alpha_choice(
    case: &NetworkCase,
    forecast: &Scenario,
    cands: &[Candidate],
    m: &mut MilpModel,
    worst: bool,
    shared_u: Option<&[VarRef]>,
) -> (ScenarioExpr, AlphaChoice) {
    let tag = if worst { "w" } else { "c" };
    let u: Vec<VarRef> = match shared_u {
        Some(u) => u.to_vec(),
        None => {
            let u: Vec<VarRef> = (0..cands.len()).map(|k| m.binary(format!("u[{k}]"))).collect();
            let mut sum = LinExpr::new();
            for &v in &u {
                sum.add_term(v, 1.0);
            }
            m.eq("one_alpha", sum, 1.0);
            u
        }
    };
    let mut alpha = LinExpr::new();
    if shared_u.is_none() {
        for (k, c) in cands.iter().enumerate() {
            let a = m.continuous(0.0, c.alpha_hi, format!("alpha[{k}]"));
            m.ge(format!("alpha_lo[{k}]"), a, u[k] * c.alpha);
            m.le(format!("alpha_hi[{k}]"), a, u[k] * c.alpha_hi);
            alpha.add_term(a, 1.0);
        }
    }

    let mut scen = ScenarioExpr::constant(forecast);
    let mut entries = Vec::new();
    for e in cands[0].set.entries() {
        let Some(slot) = slot_of(case, &e.source, e.hour) else { continue };
        let bounds: Vec<f64> = cands
            .iter()
            .map(|c| {
                let iv = c.set.get(&e.source, e.hour).expect("candidate sets share entries");
                extreme(case, slot.kind, iv.lo, iv.hi, worst)
            })
            .collect();
        let (bmin, bmax) = bounds
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let big_m = entry_big_m(cands, &e.source, e.hour);
        let value: LinExpr = if bmax - bmin <= 0.0 {
            bmin.into()
        } else {
            let x = m.continuous(bmin, bmax, format!("{tag}xi[{}@{}]", e.source, e.hour));
            for (k, &b) in bounds.iter().enumerate() {
                let slack = (LinExpr::constant(1.0) - u[k]) * big_m;
                m.ge(format!("{tag}pin_lo[{}@{},{k}]", e.source, e.hour), x, slack.clone() * -1.0 + b);
                m.le(format!("{tag}pin_hi[{}@{},{k}]", e.source, e.hour), x, slack + b);
            }
            x.into()
        };
        match slot.kind {
            SourceKind::Pv => scen.pv[slot.bus][slot.hour] = value.clone(),
            SourceKind::Load => scen.load[slot.bus][slot.hour] = value.clone(),
        }
        entries.push(PinnedEntry {
            source: e.source.clone(),
            hour: e.hour,
            value,
            bounds,
            big_m,
        });
    }
    (scen, AlphaChoice { u, alpha, entries })
}

impl AlphaChoice {
    /// Index of the active candidate in a solution.
    pub fn selected(&self, sol: &milp::Solution) -> usize {
        self.u
            .iter()
            .enumerate()
            .max_by(|a, b| sol.value(*a.1).total_cmp(&sol.value(*b.1)))
            .map(|(k, _)| k)
            .unwrap_or(0)
    }

    /// A posteriori check: every entry sits on its selected bound, and no
    /// inactive pin comes within solver tolerance of its big-M.
    pub fn check_slack(&self, sol: &milp::Solution) -> Result<(), RobustError> {
        let k = self.selected(sol);
        for e in &self.entries {
            let x = sol.eval(&e.value);
            let tol = milp::FEAS_TOL * (1.0 + x.abs());
            let off = (x - e.bounds[k]).abs() > tol;
            let tight = e
                .bounds
                .iter()
                .enumerate()
                .any(|(j, &b)| j != k && e.big_m > 0.0 && (x - b).abs() >= e.big_m - tol);
            if off || tight {
                return Err(RobustError::BigMTooSmall {
                    source_id: e.source.clone(),
                    hour: e.hour,
                });
            }
        }
        Ok(())
    }
}

/// The master MILP of one iteration.
pub struct ClMaster {
    pub model: MilpModel,
    pub first: FirstStageVars,
    pub second: SecondStageVars,
    pub choice: AlphaChoice,
    pub cost: LinExpr,
    pub budget_row: ConstraintRef,
}

pub fn build_cl_master(
    case: &NetworkCase,
    forecast: &Scenario,
    cands: &[Candidate],
    budget: &BudgetSpec,
    enforce_corners: bool,
) -> Result<ClMaster, RobustError> {
    let mut m = MilpModel::new("cl_digdt");
    let first = build_first_stage(case, forecast, &mut m)?;
    let (scen, choice) = embed_alpha_choice(case, forecast, cands, &mut m, true, None);
    let fs = FirstStage::Vars(&first);
    let second = build_second_stage(case, &fs, &scen, &mut m, "w_")?;
    if enforce_corners {
        let (corner, _) = embed_alpha_choice(case, forecast, cands, &mut m, false, Some(&choice.u));
        build_second_stage(case, &fs, &corner, &mut m, "c_")?;
    }
    let cost = first.cost.clone() + second.cost.clone();
    let budget_row = m.le("budget", cost.clone(), budget.limit());
    m.set_objective(Sense::Maximize, choice.alpha.clone());
    Ok(ClMaster {
        model: m,
        first,
        second,
        choice,
        cost,
        budget_row,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub incumbent_alpha: f64,
    pub lb: f64,
    pub ub: f64,
    pub worst_case_cost: f64,
    pub first_stage_cost: f64,
    pub candidates: Vec<f64>,
    pub node_count: i64,
    pub wall_time_s: f64,
    pub schedule: FirstStageSchedule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClDigdtResult {
    pub alpha_star: f64,
    pub lb: f64,
    pub ub: f64,
    pub sigma: f64,
    pub budget: f64,
    pub lambda0: f64,
    pub worst_case_cost: f64,
    pub first_stage_cost: f64,
    pub iterations: Vec<IterationRecord>,
    pub schedule: FirstStageSchedule,
    /// The enveloped set at α*.
    pub set: Vec<SetEntry>,
}

impl ClDigdtResult {
    pub fn set_at_alpha_star(&self) -> ConfidenceSet {
        ConfidenceSet::new(self.alpha_star, self.set.clone())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }
}

/// Number of refinement iterations for accuracy `epsilon`.
pub fn iterations_for(epsilon: f64) -> Result<usize, RobustError> {
    if !(ALPHA_TICK..1.0).contains(&epsilon) {
        return Err(RobustError::InvalidEpsilon(epsilon));
    }
    let mut k = 0;
    let mut width = 1.0_f64;
    while width > epsilon * (1.0 + 1e-9) {
        width /= 10.0;
        k += 1;
    }
    Ok(k)
}

/// Enveloped sets reachable by the refinement, indexed by α ticks.
///
/// `E(0)` is the forecast point; `E(α)` extends the envelope of the largest
/// earlier α kept here by the raw set at α.
struct EnvelopeChain {
    sets: BTreeMap<i64, ConfidenceSet>,
}

impl EnvelopeChain {
    fn below(&self, ticks: i64) -> &ConfidenceSet {
        self.sets.range(..ticks).next_back().expect("chain starts at 0").1
    }
}

/// Iterative grid-and-refine CL-DIGDT.
///
/// Each iteration tabulates sets at the ten sub-interval lower endpoints of
/// the current bracket (and its upper endpoint), solves one MILP selecting
/// the largest budget-feasible candidate, and narrows the bracket to that
/// sub-interval.
pub fn solve_cl_digdt(
    case: &NetworkCase,
    forecast: &Scenario,
    pairs: &PairSet,
    budget: &BudgetSpec,
    epsilon: f64,
    cache: &mut SetCache,
    opts: &RobustOptions,
) -> Result<ClDigdtResult, RobustError> {
    let iters = iterations_for(epsilon)?;
    let template = match cache.raw_set(pairs, 0.0, &opts.solve)? {
        Some(s) => s,
        None => unreachable!("alpha = 0 is always attainable"),
    };
    let mut chain = EnvelopeChain {
        sets: BTreeMap::from([(0, forecast_set(case, forecast, &template))]),
    };
    let one = alpha_ticks(1.0);
    let (mut lb, mut width) = (0_i64, one);
    let mut trace = Vec::new();
    let mut last = None;

    for it in 1..=iters {
        let step = width / CANDIDATES;
        let mut cands = Vec::new();
        for k in 0..=CANDIDATES {
            let t = lb + k * step;
            let a = t as f64 * ALPHA_TICK;
            if t > one {
                break;
            }
            if !chain.sets.contains_key(&t) {
                match cache.raw_set(pairs, a, &opts.solve)? {
                    Some(raw) => {
                        let env = envelope_from(chain.below(t), &raw);
                        chain.sets.insert(t, env);
                    }
                    None => break,
                }
            }
            if k < CANDIDATES {
                cands.push(Candidate {
                    alpha: a,
                    alpha_hi: (t + step) as f64 * ALPHA_TICK,
                    set: chain.sets[&t].clone(),
                });
            }
        }

        let mut master = build_cl_master(case, forecast, &cands, budget, opts.enforce_corners)?;
        let sol = milp::solve(&master.model, &master_params(&opts.solve))?;
        require_optimal(&sol, budget)?;
        master.choice.check_slack(&sol)?;
        let k = master.choice.selected(&sol);

        // cheapest schedule at the chosen set
        for (j, &u) in master.choice.u.iter().enumerate() {
            let v = if j == k { 1.0 } else { 0.0 };
            master.model.set_bounds(u, v, v);
        }
        master.model.set_rhs(master.budget_row, f64::INFINITY);
        master.model.set_objective(Sense::Minimize, master.cost.clone());
        let sol2 = milp::solve(&master.model, &master_params(&opts.solve))?;
        let sol = if sol2.is_optimal() { sol2 } else { sol };

        lb += k as i64 * step;
        width = step;
        let record = IterationRecord {
            iteration: it,
            incumbent_alpha: lb as f64 * ALPHA_TICK,
            lb: lb as f64 * ALPHA_TICK,
            ub: (lb + width) as f64 * ALPHA_TICK,
            worst_case_cost: sol.eval(&master.cost),
            first_stage_cost: sol.eval(&master.first.cost),
            candidates: cands.iter().map(|c| c.alpha).collect(),
            node_count: sol.stats.node_count,
            wall_time_s: sol.stats.wall_time_s,
            schedule: extract_first_stage(case, &sol, &master.first),
        };
        trace.push(record);
        last = Some(cands[k].set.clone());
    }

    let rec = trace.last().expect("at least one iteration").clone();
    let set = last.expect("at least one iteration");
    Ok(ClDigdtResult {
        alpha_star: rec.incumbent_alpha,
        lb: rec.lb,
        ub: rec.ub,
        sigma: budget.sigma,
        budget: budget.budget(),
        lambda0: budget.lambda0,
        worst_case_cost: rec.worst_case_cost,
        first_stage_cost: rec.first_stage_cost,
        schedule: rec.schedule.clone(),
        iterations: trace,
        set: set.entries().to_vec(),
    })
}

/// Worst-case cost `Λ₁ + Λ₂(ξ*)` of a fixed schedule, by an independent
/// second-stage solve at the extreme scenario; `None` when the recourse is
/// infeasible there.
pub fn worst_case_cost(
    case: &NetworkCase,
    forecast: &Scenario,
    schedule: &FirstStageSchedule,
    set: &ConfidenceSet,
    params: &SolveParams,
) -> Result<Option<f64>, RobustError> {
    let xi = worst_case_scenario(case, set, forecast);
    let r = dispatch::evaluate_recourse(case, schedule, &xi, params)?;
    Ok(r.cost.map(|c| c + schedule.cost(case)))
}

/// Minimal worst-case cost over first-stage schedules for a fixed set, or
/// `None` if no schedule has a feasible recourse at the extreme scenario.
pub fn min_worst_case_cost(
    case: &NetworkCase,
    forecast: &Scenario,
    set: &ConfidenceSet,
    enforce_corners: bool,
    params: &SolveParams,
) -> Result<Option<f64>, RobustError> {
    let mut m = MilpModel::new("min_worst_case");
    let first = build_first_stage(case, forecast, &mut m)?;
    let fs = FirstStage::Vars(&first);
    let xi = worst_case_scenario(case, set, forecast);
    let second = build_second_stage(case, &fs, &ScenarioExpr::constant(&xi), &mut m, "w_")?;
    if enforce_corners {
        let c = best_case_scenario(case, set, forecast);
        build_second_stage(case, &fs, &ScenarioExpr::constant(&c), &mut m, "c_")?;
    }
    m.set_objective(Sense::Minimize, first.cost.clone() + second.cost.clone());
    let sol = milp::solve(&m, &master_params(params))?;
    match sol.status {
        SolveStatus::Optimal => Ok(Some(sol.objective)),
        SolveStatus::Infeasible => Ok(None),
        s => Err(RobustError::NotOptimal(s)),
    }
}
