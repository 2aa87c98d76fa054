//! Two-stage dispatch model: a first-stage economic dispatch on forecast
//! inputs and a second-stage recourse with linearized (lossy DistFlow) power
//! flow and voltage limits.
//!
//! Sign convention used in every balance row: for bus `i` at step `t`,
//! `outflow - inflow = injection`, where injection is DG output plus PV plus
//! ESS discharge plus substation import, minus load and ESS charge.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::milp::{self, LinExpr, MilpError, MilpModel, Sense, SolveParams, SolveStatus, VarRef};
use crate::netmodel::{NetworkCase, Scenario};
use crate::uset::ConfidenceSet;

#[derive(Debug, Error)]
pub enum DispatchError {
    #[error("scenario dimensions do not match the case")]
    Dimension,
    #[error("model is infeasible")]
    Infeasible,
    #[error("solver stopped without an optimal solution ({0:?})")]
    NotOptimal(SolveStatus),
    #[error(transparent)]
    Solver(#[from] MilpError),
}

/// Source id of the load at a bus, as used in histories and sets.
pub fn load_source(bus: usize) -> String {
    format!("load:{bus}")
}

/// Source id of the PV plant at a bus.
pub fn pv_source(bus: usize) -> String {
    format!("pv:{bus}")
}

/// Index data shared by both stages.
#[derive(Debug, Clone)]
pub struct Topology {
    pub line_from: Vec<usize>,
    pub line_to: Vec<usize>,
    pub dg_pos: Vec<usize>,
    pub ess_pos: Vec<usize>,
    pub substation: usize,
    /// Lines leaving / entering each bus position.
    pub out_lines: Vec<Vec<usize>>,
    pub in_lines: Vec<Vec<usize>>,
}

impl Topology {
    pub fn new(case: &NetworkCase) -> Topology {
        let pos: BTreeMap<usize, usize> = case.bus_positions();
        let n = case.buses.len();
        let line_from: Vec<usize> = case.lines.iter().map(|l| pos[&l.from]).collect();
        let line_to: Vec<usize> = case.lines.iter().map(|l| pos[&l.to]).collect();
        let mut out_lines = vec![Vec::new(); n];
        let mut in_lines = vec![Vec::new(); n];
        for (k, (&f, &t)) in line_from.iter().zip(&line_to).enumerate() {
            out_lines[f].push(k);
            in_lines[t].push(k);
        }
        Topology {
            line_from,
            line_to,
            dg_pos: case.dgs.iter().map(|g| pos[&g.bus]).collect(),
            ess_pos: case.esss.iter().map(|e| pos[&e.bus]).collect(),
            substation: case.substation_index(),
            out_lines,
            in_lines,
        }
    }

    /// `outflow - inflow` at bus `i` for per-line expressions `flow`.
    fn net_outflow(&self, i: usize, flow: &[LinExpr]) -> LinExpr {
        let mut e = LinExpr::new();
        for &k in &self.out_lines[i] {
            e += flow[k].clone();
        }
        for &k in &self.in_lines[i] {
            e -= flow[k].clone();
        }
        e
    }
}

/// Uncertain inputs as affine expressions, indexed `[bus position][t]`.
#[derive(Debug, Clone)]
pub struct ScenarioExpr {
    pub pv: Vec<Vec<LinExpr>>,
    pub load: Vec<Vec<LinExpr>>,
}

impl ScenarioExpr {
    pub fn constant(s: &Scenario) -> ScenarioExpr {
        let conv = |m: &Vec<Vec<f64>>| {
            m.iter()
                .map(|row| row.iter().map(|&v| LinExpr::constant(v)).collect())
                .collect()
        };
        ScenarioExpr {
            pv: conv(&s.pv),
            load: conv(&s.load),
        }
    }

    fn dims_ok(&self, case: &NetworkCase) -> bool {
        let (n, t) = (case.buses.len(), case.steps());
        self.pv.len() == n
            && self.load.len() == n
            && self.pv.iter().all(|r| r.len() == t)
            && self.load.iter().all(|r| r.len() == t)
    }
}

/// Handles to first-stage variables, indexed `[asset][t]` or `[t]`.
#[derive(Debug, Clone)]
pub struct FirstStageVars {
    pub dg_power: Vec<Vec<VarRef>>,
    pub ess_charge: Vec<Vec<VarRef>>,
    pub ess_discharge: Vec<Vec<VarRef>>,
    pub ess_mode: Vec<Vec<VarRef>>,
    pub ess_energy: Vec<Vec<VarRef>>,
    pub purchase: Vec<VarRef>,
    pub flow: Vec<Vec<VarRef>>,
    /// Λ₁ as an expression.
    pub cost: LinExpr,
}

/// Here-and-now decisions, indexed like [`FirstStageVars`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstStageSchedule {
    pub dg_buses: Vec<usize>,
    pub ess_buses: Vec<usize>,
    pub dg_power: Vec<Vec<f64>>,
    pub ess_charge: Vec<Vec<f64>>,
    pub ess_discharge: Vec<Vec<f64>>,
    pub ess_mode: Vec<Vec<bool>>,
    pub ess_energy: Vec<Vec<f64>>,
    pub purchase: Vec<f64>,
    pub flow: Vec<Vec<f64>>,
}

impl FirstStageSchedule {
    /// `cᵀx`: DG fuel cost plus purchase cost.
    pub fn cost(&self, case: &NetworkCase) -> f64 {
        let mut c = 0.0;
        for (g, row) in case.dgs.iter().zip(&self.dg_power) {
            c += g.cost * row.iter().sum::<f64>();
        }
        c + case
            .prices
            .d
            .iter()
            .zip(&self.purchase)
            .map(|(d, p)| d * p)
            .sum::<f64>()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schedule serializes")
    }
}

/// First-stage quantities as seen by the second stage.
#[derive(Debug, Clone)]
pub enum FirstStage<'a> {
    Vars(&'a FirstStageVars),
    Fixed(&'a FirstStageSchedule),
}

struct FirstTerms {
    dg_power: Vec<Vec<LinExpr>>,
    ess_charge: Vec<Vec<LinExpr>>,
    ess_discharge: Vec<Vec<LinExpr>>,
    purchase: Vec<LinExpr>,
}

impl FirstStage<'_> {
    fn terms(&self) -> FirstTerms {
        fn vars(m: &[Vec<VarRef>]) -> Vec<Vec<LinExpr>> {
            m.iter().map(|r| r.iter().map(|&v| v.into()).collect()).collect()
        }
        fn consts(m: &[Vec<f64>]) -> Vec<Vec<LinExpr>> {
            m.iter().map(|r| r.iter().map(|&v| v.into()).collect()).collect()
        }
        match self {
            FirstStage::Vars(v) => FirstTerms {
                dg_power: vars(&v.dg_power),
                ess_charge: vars(&v.ess_charge),
                ess_discharge: vars(&v.ess_discharge),
                purchase: v.purchase.iter().map(|&p| p.into()).collect(),
            },
            FirstStage::Fixed(s) => FirstTerms {
                dg_power: consts(&s.dg_power),
                ess_charge: consts(&s.ess_charge),
                ess_discharge: consts(&s.ess_discharge),
                purchase: s.purchase.iter().map(|&p| p.into()).collect(),
            },
        }
    }
}

/// Handles to second-stage variables.
#[derive(Debug, Clone)]
pub struct SecondStageVars {
    pub dg_recourse: Vec<Vec<VarRef>>,
    pub dg_reactive: Vec<Vec<VarRef>>,
    pub purchase: Vec<VarRef>,
    pub substation_reactive: Vec<VarRef>,
    pub flow_p: Vec<Vec<VarRef>>,
    pub flow_q: Vec<Vec<VarRef>>,
    pub voltage_sq: Vec<Vec<VarRef>>,
    /// Λ₂ as an expression.
    pub cost: LinExpr,
    dg_total: Vec<Vec<LinExpr>>,
}

/// Wait-and-see decisions after uncertainty is revealed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondStageDecision {
    pub dg_recourse: Vec<Vec<f64>>,
    pub dg_total: Vec<Vec<f64>>,
    pub dg_reactive: Vec<Vec<f64>>,
    pub purchase: Vec<f64>,
    pub substation_reactive: Vec<f64>,
    pub flow_p: Vec<Vec<f64>>,
    pub flow_q: Vec<Vec<f64>>,
    pub voltage_sq: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub first_stage: f64,
    pub second_stage: f64,
    pub total: f64,
}

impl CostBreakdown {
    pub fn new(first_stage: f64, second_stage: f64) -> Self {
        Self {
            first_stage,
            second_stage,
            total: first_stage + second_stage,
        }
    }

    pub const CSV_HEADER: &'static str = "first_stage,second_stage,total";

    pub fn csv_row(&self) -> String {
        format!("{},{},{}", self.first_stage, self.second_stage, self.total)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecourseResult {
    pub feasible: bool,
    pub decision: Option<SecondStageDecision>,
    pub cost: Option<f64>,
}

/// Add first-stage variables, constraints and Λ₁ for the forecast scenario.
pub fn build_first_stage(
    case: &NetworkCase,
    forecast: &Scenario,
    m: &mut MilpModel,
) -> Result<FirstStageVars, DispatchError> {
    if !forecast.check_dims(case) {
        return Err(DispatchError::Dimension);
    }
    let topo = Topology::new(case);
    let steps = case.steps();
    let dt = case.time.dt_hours;
    let mut cost = LinExpr::new();

    let mut dg_power = Vec::with_capacity(case.dgs.len());
    for (g, dg) in case.dgs.iter().enumerate() {
        let row: Vec<VarRef> = (0..steps)
            .map(|t| m.continuous(dg.p_min, dg.p_max, format!("pg[{g},{t}]")))
            .collect();
        for t in 1..steps {
            m.le(format!("ramp_up[{g},{t}]"), row[t] - row[t - 1], dg.ramp_up);
            m.le(format!("ramp_dn[{g},{t}]"), row[t - 1] - row[t], dg.ramp_down);
        }
        for &v in &row {
            cost.add_term(v, dg.cost);
        }
        dg_power.push(row);
    }

    let mut ess_charge = Vec::new();
    let mut ess_discharge = Vec::new();
    let mut ess_mode = Vec::new();
    let mut ess_energy = Vec::new();
    for (b, ess) in case.esss.iter().enumerate() {
        let mut ch = Vec::with_capacity(steps);
        let mut dis = Vec::with_capacity(steps);
        let mut mode = Vec::with_capacity(steps);
        let mut en: Vec<VarRef> = Vec::with_capacity(steps);
        for t in 0..steps {
            let c = m.continuous(0.0, ess.charge_max, format!("pbc[{b},{t}]"));
            let d = m.continuous(0.0, ess.discharge_max, format!("pbd[{b},{t}]"));
            let z = m.binary(format!("z[{b},{t}]"));
            let e = m.continuous(ess.energy_min, ess.energy_max, format!("e[{b},{t}]"));
            m.ge(format!("ch_lo[{b},{t}]"), c, z * ess.charge_min);
            m.le(format!("ch_hi[{b},{t}]"), c, z * ess.charge_max);
            m.ge(
                format!("dis_lo[{b},{t}]"),
                d,
                (LinExpr::constant(1.0) - z) * ess.discharge_min,
            );
            m.le(
                format!("dis_hi[{b},{t}]"),
                d,
                (LinExpr::constant(1.0) - z) * ess.discharge_max,
            );
            let prev: LinExpr = if t == 0 {
                ess.initial_energy.into()
            } else {
                en[t - 1].into()
            };
            m.eq(
                format!("energy[{b},{t}]"),
                e,
                prev + c * (ess.efficiency * dt) - d * (dt / ess.efficiency),
            );
            ch.push(c);
            dis.push(d);
            mode.push(z);
            en.push(e);
        }
        ess_charge.push(ch);
        ess_discharge.push(dis);
        ess_mode.push(mode);
        ess_energy.push(en);
    }

    let purchase: Vec<VarRef> = (0..steps).map(|t| m.continuous(0.0, f64::INFINITY, format!("ps[{t}]"))).collect();
    for (t, &p) in purchase.iter().enumerate() {
        cost.add_term(p, case.prices.d[t]);
    }
    let flow: Vec<Vec<VarRef>> = case
        .lines
        .iter()
        .enumerate()
        .map(|(k, l)| {
            (0..steps)
                .map(|t| m.continuous(-l.p_max, l.p_max, format!("p[{k},{t}]")))
                .collect()
        })
        .collect();

    for t in 0..steps {
        let flows: Vec<LinExpr> = flow.iter().map(|r| r[t].into()).collect();
        let mut injection: Vec<LinExpr> = (0..case.buses.len())
            .map(|i| LinExpr::constant(forecast.pv[i][t] - forecast.load[i][t]))
            .collect();
        for (g, &i) in topo.dg_pos.iter().enumerate() {
            injection[i].add_term(dg_power[g][t], 1.0);
        }
        for (b, &i) in topo.ess_pos.iter().enumerate() {
            injection[i].add_term(ess_discharge[b][t], 1.0).add_term(ess_charge[b][t], -1.0);
        }
        injection[topo.substation].add_term(purchase[t], 1.0);
        for (i, inj) in injection.into_iter().enumerate() {
            m.eq(format!("bal1[{i},{t}]"), topo.net_outflow(i, &flows), inj);
        }
    }

    Ok(FirstStageVars {
        dg_power,
        ess_charge,
        ess_discharge,
        ess_mode,
        ess_energy,
        purchase,
        flow,
        cost,
    })
}

/// Add second-stage variables, constraints and Λ₂ for one scenario.
///
/// `tag` distinguishes several second-stage copies in one model.
pub fn build_second_stage(
    case: &NetworkCase,
    first: &FirstStage,
    scenario: &ScenarioExpr,
    m: &mut MilpModel,
    tag: &str,
) -> Result<SecondStageVars, DispatchError> {
    if !scenario.dims_ok(case) {
        return Err(DispatchError::Dimension);
    }
    let topo = Topology::new(case);
    let steps = case.steps();
    let ft = first.terms();
    let mut cost = LinExpr::new();

    let mut dg_recourse = Vec::new();
    let mut dg_reactive = Vec::new();
    let mut dg_total = Vec::new();
    for (g, dg) in case.dgs.iter().enumerate() {
        let rec: Vec<VarRef> = (0..steps)
            .map(|t| m.continuous(dg.recourse_p_min, dg.recourse_p_max, format!("{tag}rec[{g},{t}]")))
            .collect();
        let q: Vec<VarRef> = (0..steps)
            .map(|t| m.continuous(dg.q_min, dg.q_max, format!("{tag}qg[{g},{t}]")))
            .collect();
        let total: Vec<LinExpr> = (0..steps).map(|t| ft.dg_power[g][t].clone() + rec[t]).collect();
        for t in 1..steps {
            m.le(
                format!("{tag}ramp_up[{g},{t}]"),
                total[t].clone() - total[t - 1].clone(),
                dg.ramp_up,
            );
            m.le(
                format!("{tag}ramp_dn[{g},{t}]"),
                total[t - 1].clone() - total[t].clone(),
                dg.ramp_down,
            );
        }
        for &r in &rec {
            cost.add_term(r, dg.recourse_cost);
        }
        dg_recourse.push(rec);
        dg_reactive.push(q);
        dg_total.push(total);
    }

    let purchase: Vec<VarRef> = (0..steps).map(|t| m.continuous(0.0, f64::INFINITY, format!("{tag}ps[{t}]"))).collect();
    let substation_reactive: Vec<VarRef> = (0..steps).map(|t| m.free(format!("{tag}qs[{t}]"))).collect();
    for (t, &p) in purchase.iter().enumerate() {
        let d_hat = case.prices.d_hat[t];
        cost.add_term(p, d_hat);
        cost.add_scaled(&ft.purchase[t], -d_hat);
    }

    let n = case.buses.len();
    let (vmin, vmax) = (case.voltage.v_min_sq, case.voltage.v_max_sq);
    let voltage_sq: Vec<Vec<VarRef>> = (0..n)
        .map(|i| {
            (0..steps)
                .map(|t| {
                    if i == topo.substation {
                        m.continuous(1.0, 1.0, format!("{tag}v[{i},{t}]"))
                    } else {
                        m.continuous(vmin, vmax, format!("{tag}v[{i},{t}]"))
                    }
                })
                .collect()
        })
        .collect();
    let flow_p: Vec<Vec<VarRef>> = case
        .lines
        .iter()
        .enumerate()
        .map(|(k, l)| {
            (0..steps)
                .map(|t| m.continuous(-l.p_max, l.p_max, format!("{tag}p[{k},{t}]")))
                .collect()
        })
        .collect();
    let flow_q: Vec<Vec<VarRef>> = (0..case.lines.len())
        .map(|k| (0..steps).map(|t| m.free(format!("{tag}q[{k},{t}]"))).collect())
        .collect();

    for t in 0..steps {
        let fp: Vec<LinExpr> = flow_p.iter().map(|r| r[t].into()).collect();
        let fq: Vec<LinExpr> = flow_q.iter().map(|r| r[t].into()).collect();
        let mut p_inj: Vec<LinExpr> = (0..n)
            .map(|i| scenario.pv[i][t].clone() - scenario.load[i][t].clone())
            .collect();
        let mut q_inj: Vec<LinExpr> = (0..n)
            .map(|i| scenario.load[i][t].clone() * -case.buses[i].pf_angle.at(t).tan())
            .collect();
        for (g, &i) in topo.dg_pos.iter().enumerate() {
            p_inj[i] += dg_total[g][t].clone();
            q_inj[i].add_term(dg_reactive[g][t], 1.0);
        }
        for (b, &i) in topo.ess_pos.iter().enumerate() {
            p_inj[i] += ft.ess_discharge[b][t].clone();
            p_inj[i] -= ft.ess_charge[b][t].clone();
        }
        p_inj[topo.substation].add_term(purchase[t], 1.0);
        q_inj[topo.substation].add_term(substation_reactive[t], 1.0);
        for i in 0..n {
            m.eq(format!("{tag}balp[{i},{t}]"), topo.net_outflow(i, &fp), p_inj[i].clone());
            m.eq(format!("{tag}balq[{i},{t}]"), topo.net_outflow(i, &fq), q_inj[i].clone());
        }
        for (k, l) in case.lines.iter().enumerate() {
            let (i, j) = (topo.line_from[k], topo.line_to[k]);
            let s = 1.0 / (1.0 - l.phi);
            m.eq(
                format!("{tag}vdrop[{k},{t}]"),
                voltage_sq[i][t] - voltage_sq[j][t],
                flow_p[k][t] * (l.r * s) + flow_q[k][t] * (l.x * s),
            );
        }
    }

    Ok(SecondStageVars {
        dg_recourse,
        dg_reactive,
        purchase,
        substation_reactive,
        flow_p,
        flow_q,
        voltage_sq,
        cost,
        dg_total,
    })
}

fn values(sol: &milp::Solution, m: &[Vec<VarRef>]) -> Vec<Vec<f64>> {
    m.iter().map(|r| r.iter().map(|&v| sol.value(v)).collect()).collect()
}

/// Read a first-stage schedule out of a solved model.
pub fn extract_first_stage(case: &NetworkCase, sol: &milp::Solution, v: &FirstStageVars) -> FirstStageSchedule {
    FirstStageSchedule {
        dg_buses: case.dgs.iter().map(|g| g.bus).collect(),
        ess_buses: case.esss.iter().map(|e| e.bus).collect(),
        dg_power: values(sol, &v.dg_power),
        ess_charge: values(sol, &v.ess_charge),
        ess_discharge: values(sol, &v.ess_discharge),
        ess_mode: v
            .ess_mode
            .iter()
            .map(|r| r.iter().map(|&z| sol.flag(z)).collect())
            .collect(),
        ess_energy: values(sol, &v.ess_energy),
        purchase: v.purchase.iter().map(|&p| sol.value(p)).collect(),
        flow: values(sol, &v.flow),
    }
}

/// Read a second-stage decision out of a solved model.
pub fn extract_second_stage(sol: &milp::Solution, v: &SecondStageVars) -> SecondStageDecision {
    SecondStageDecision {
        dg_recourse: values(sol, &v.dg_recourse),
        dg_total: v
            .dg_total
            .iter()
            .map(|r| r.iter().map(|e| sol.eval(e)).collect())
            .collect(),
        dg_reactive: values(sol, &v.dg_reactive),
        purchase: v.purchase.iter().map(|&p| sol.value(p)).collect(),
        substation_reactive: v.substation_reactive.iter().map(|&p| sol.value(p)).collect(),
        flow_p: values(sol, &v.flow_p),
        flow_q: values(sol, &v.flow_q),
        voltage_sq: values(sol, &v.voltage_sq),
    }
}

/// Output of [`solve_deterministic`].
#[derive(Debug, Clone)]
pub struct DeterministicResult {
    pub schedule: FirstStageSchedule,
    pub decision: SecondStageDecision,
    pub cost: CostBreakdown,
    pub solution: milp::Solution,
    pub model: MilpModel,
}

/// Jointly minimize Λ₁ + Λ₂ with both stages at the forecast.
pub fn solve_deterministic(
    case: &NetworkCase,
    forecast: &Scenario,
    params: &SolveParams,
) -> Result<DeterministicResult, DispatchError> {
    let mut m = MilpModel::new("deterministic");
    let first = build_first_stage(case, forecast, &mut m)?;
    let second = build_second_stage(case, &FirstStage::Vars(&first), &ScenarioExpr::constant(forecast), &mut m, "s_")?;
    m.set_objective(Sense::Minimize, first.cost.clone() + second.cost.clone());
    let sol = milp::solve(&m, params)?;
    match sol.status {
        SolveStatus::Optimal => {}
        SolveStatus::Infeasible => return Err(DispatchError::Infeasible),
        s => return Err(DispatchError::NotOptimal(s)),
    }
    let cost = CostBreakdown::new(sol.eval(&first.cost), sol.eval(&second.cost));
    Ok(DeterministicResult {
        schedule: extract_first_stage(case, &sol, &first),
        decision: extract_second_stage(&sol, &second),
        cost,
        solution: sol,
        model: m,
    })
}

/// Second stage alone with the first stage fixed to `schedule`.
pub fn evaluate_recourse(
    case: &NetworkCase,
    schedule: &FirstStageSchedule,
    scenario: &Scenario,
    params: &SolveParams,
) -> Result<RecourseResult, DispatchError> {
    if !scenario.check_dims(case) {
        return Err(DispatchError::Dimension);
    }
    let mut m = MilpModel::new("recourse");
    let second = build_second_stage(case, &FirstStage::Fixed(schedule), &ScenarioExpr::constant(scenario), &mut m, "")?;
    m.set_objective(Sense::Minimize, second.cost.clone());
    let sol = milp::solve(&m, params)?;
    match sol.status {
        SolveStatus::Optimal => {
            debug_assert!(milp::check_solution(&m, &sol).is_empty());
            Ok(RecourseResult {
                feasible: true,
                cost: Some(sol.objective),
                decision: Some(extract_second_stage(&sol, &second)),
            })
        }
        SolveStatus::Infeasible => Ok(RecourseResult {
            feasible: false,
            decision: None,
            cost: None,
        }),
        s => Err(DispatchError::NotOptimal(s)),
    }
}

/// Extreme scenario of a set: loads at upper bounds, PV at lower bounds.
///
/// Entries missing from the set keep their forecast value. PV is clipped to
/// `[0, pv_cap]` and loads to `>= 0`.
pub fn worst_case_scenario(case: &NetworkCase, uset: &ConfidenceSet, forecast: &Scenario) -> Scenario {
    let mut s = forecast.clone();
    for (i, bus) in case.buses.iter().enumerate() {
        for t in 0..case.steps() {
            if let Some(iv) = uset.get(&load_source(bus.id), t) {
                s.load[i][t] = iv.hi.max(0.0);
            }
            if bus.has_pv {
                if let Some(iv) = uset.get(&pv_source(bus.id), t) {
                    s.pv[i][t] = iv.lo.clamp(0.0, case.pv_cap);
                }
            }
        }
    }
    s
}

/// Opposite corner of a set: loads at lower bounds, PV at upper bounds.
pub fn best_case_scenario(case: &NetworkCase, uset: &ConfidenceSet, forecast: &Scenario) -> Scenario {
    let mut s = forecast.clone();
    for (i, bus) in case.buses.iter().enumerate() {
        for t in 0..case.steps() {
            if let Some(iv) = uset.get(&load_source(bus.id), t) {
                s.load[i][t] = iv.lo.max(0.0);
            }
            if bus.has_pv {
                if let Some(iv) = uset.get(&pv_source(bus.id), t) {
                    s.pv[i][t] = iv.hi.clamp(0.0, case.pv_cap);
                }
            }
        }
    }
    s
}
