//! A small, backend-agnostic mixed-integer linear programming layer.
//!
//! Models are assembled from [`VarRef`] handles and [`LinExpr`] expressions,
//! then handed to [`solve`], which currently delegates to HiGHS. Every
//! optimal [`Solution`] can be re-verified independently of the backend with
//! [`check_solution`].

use std::collections::BTreeMap;
use std::ffi::CString;
use std::fmt;
use std::io::{self, Write};
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use highs::{HighsModelStatus, RowProblem};
use thiserror::Error;

/// Absolute feasibility/integrality tolerance used by the solver and by
/// [`check_solution`].
pub const FEAS_TOL: f64 = 1e-6;
/// Relative MIP gap for every solve.
pub const MIP_REL_GAP: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum MilpError {
    #[error("malformed model: {0}")]
    Malformed(String),
    #[error("solver backend failure: {0}")]
    Backend(String),
}

/// Handle to a decision variable of one [`MilpModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarRef(usize);

impl VarRef {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone)]
pub struct VarInfo {
    pub kind: VarKind,
    pub lo: f64,
    pub hi: f64,
    pub name: String,
}

/// Affine expression `sum(coef * var) + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    terms: Vec<(VarRef, f64)>,
    constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn term(v: VarRef, coef: f64) -> Self {
        Self {
            terms: vec![(v, coef)],
            constant: 0.0,
        }
    }

    pub fn add_term(&mut self, v: VarRef, coef: f64) -> &mut Self {
        self.terms.push((v, coef));
        self
    }

    pub fn add_constant(&mut self, c: f64) -> &mut Self {
        self.constant += c;
        self
    }

    /// Add `scale * other` in place.
    pub fn add_scaled(&mut self, other: &LinExpr, scale: f64) -> &mut Self {
        self.terms
            .extend(other.terms.iter().map(|&(v, c)| (v, c * scale)));
        self.constant += other.constant * scale;
        self
    }

    pub fn constant_part(&self) -> f64 {
        self.constant
    }

    pub fn terms(&self) -> &[(VarRef, f64)] {
        &self.terms
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|&(_, c)| c == 0.0)
    }

    /// Merge duplicate variables and drop zero coefficients.
    pub fn normalized(&self) -> LinExpr {
        let mut merged: BTreeMap<VarRef, f64> = BTreeMap::new();
        for &(v, c) in &self.terms {
            *merged.entry(v).or_insert(0.0) += c;
        }
        LinExpr {
            terms: merged.into_iter().filter(|&(_, c)| c != 0.0).collect(),
            constant: self.constant,
        }
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|&(v, c)| c * values[v.0])
            .sum::<f64>()
            + self.constant
    }
}

impl From<VarRef> for LinExpr {
    fn from(v: VarRef) -> Self {
        LinExpr::term(v, 1.0)
    }
}

impl From<f64> for LinExpr {
    fn from(c: f64) -> Self {
        LinExpr::constant(c)
    }
}

impl<T: Into<LinExpr>> Add<T> for LinExpr {
    type Output = LinExpr;
    fn add(mut self, rhs: T) -> LinExpr {
        self += rhs;
        self
    }
}

impl<T: Into<LinExpr>> AddAssign<T> for LinExpr {
    fn add_assign(&mut self, rhs: T) {
        let rhs = rhs.into();
        self.terms.extend(rhs.terms);
        self.constant += rhs.constant;
    }
}

impl<T: Into<LinExpr>> Sub<T> for LinExpr {
    type Output = LinExpr;
    fn sub(mut self, rhs: T) -> LinExpr {
        self -= rhs;
        self
    }
}

impl<T: Into<LinExpr>> SubAssign<T> for LinExpr {
    fn sub_assign(&mut self, rhs: T) {
        self.add_scaled(&rhs.into(), -1.0);
    }
}

impl Mul<f64> for LinExpr {
    type Output = LinExpr;
    fn mul(mut self, k: f64) -> LinExpr {
        self.terms.iter_mut().for_each(|(_, c)| *c *= k);
        self.constant *= k;
        self
    }
}

impl Mul<f64> for VarRef {
    type Output = LinExpr;
    fn mul(self, k: f64) -> LinExpr {
        LinExpr::term(self, k)
    }
}

impl Neg for LinExpr {
    type Output = LinExpr;
    fn neg(self) -> LinExpr {
        self * -1.0
    }
}

impl<T: Into<LinExpr>> Add<T> for VarRef {
    type Output = LinExpr;
    fn add(self, rhs: T) -> LinExpr {
        LinExpr::from(self) + rhs
    }
}

impl<T: Into<LinExpr>> Sub<T> for VarRef {
    type Output = LinExpr;
    fn sub(self, rhs: T) -> LinExpr {
        LinExpr::from(self) - rhs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        })
    }
}

/// `expr relation rhs`, with every constant moved to `rhs`.
#[derive(Debug, Clone)]
pub struct Constraint {
    pub name: String,
    pub expr: LinExpr,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    /// Signed violation; zero or negative means satisfied.
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.expr.eval(values);
        match self.relation {
            Relation::Le => lhs - self.rhs,
            Relation::Ge => self.rhs - lhs,
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConstraintRef(usize);

#[derive(Debug, Clone)]
pub struct MilpModel {
    pub name: String,
    vars: Vec<VarInfo>,
    constraints: Vec<Constraint>,
    objective: LinExpr,
    sense: Sense,
}

impl MilpModel {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            vars: Vec::new(),
            constraints: Vec::new(),
            objective: LinExpr::new(),
            sense: Sense::Minimize,
        }
    }

    pub fn add_var(&mut self, kind: VarKind, lo: f64, hi: f64, name: impl Into<String>) -> VarRef {
        self.vars.push(VarInfo {
            kind,
            lo,
            hi,
            name: name.into(),
        });
        VarRef(self.vars.len() - 1)
    }

    pub fn continuous(&mut self, lo: f64, hi: f64, name: impl Into<String>) -> VarRef {
        self.add_var(VarKind::Continuous, lo, hi, name)
    }

    pub fn free(&mut self, name: impl Into<String>) -> VarRef {
        self.continuous(f64::NEG_INFINITY, f64::INFINITY, name)
    }

    pub fn binary(&mut self, name: impl Into<String>) -> VarRef {
        self.add_var(VarKind::Binary, 0.0, 1.0, name)
    }

    pub fn set_bounds(&mut self, v: VarRef, lo: f64, hi: f64) {
        let info = &mut self.vars[v.0];
        info.lo = lo;
        info.hi = hi;
    }

    pub fn var(&self, v: VarRef) -> &VarInfo {
        &self.vars[v.0]
    }

    pub fn vars(&self) -> &[VarInfo] {
        &self.vars
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    /// Replace the right-hand side of a constraint; `±inf` drops the row in effect.
    pub fn set_rhs(&mut self, c: ConstraintRef, rhs: f64) {
        self.constraints[c.0].rhs = rhs;
    }

    pub fn constraint(&self, c: ConstraintRef) -> &Constraint {
        &self.constraints[c.0]
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_binaries(&self) -> usize {
        self.vars.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    /// Add `lhs relation rhs`.
    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        lhs: impl Into<LinExpr>,
        relation: Relation,
        rhs: impl Into<LinExpr>,
    ) -> ConstraintRef {
        let mut expr = lhs.into();
        expr -= rhs.into();
        let expr = expr.normalized();
        let rhs = 0.0 - expr.constant;
        self.constraints.push(Constraint {
            name: name.into(),
            expr: LinExpr {
                terms: expr.terms,
                constant: 0.0,
            },
            relation,
            rhs,
        });
        ConstraintRef(self.constraints.len() - 1)
    }

    pub fn le(&mut self, name: impl Into<String>, lhs: impl Into<LinExpr>, rhs: impl Into<LinExpr>) -> ConstraintRef {
        self.add_constraint(name, lhs, Relation::Le, rhs)
    }

    pub fn ge(&mut self, name: impl Into<String>, lhs: impl Into<LinExpr>, rhs: impl Into<LinExpr>) -> ConstraintRef {
        self.add_constraint(name, lhs, Relation::Ge, rhs)
    }

    pub fn eq(&mut self, name: impl Into<String>, lhs: impl Into<LinExpr>, rhs: impl Into<LinExpr>) -> ConstraintRef {
        self.add_constraint(name, lhs, Relation::Eq, rhs)
    }

    pub fn set_objective(&mut self, sense: Sense, expr: impl Into<LinExpr>) {
        self.sense = sense;
        self.objective = expr.into().normalized();
    }

    pub fn objective(&self) -> &LinExpr {
        &self.objective
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    /// Structural checks run before every solve.
    pub fn validate(&self) -> Result<(), MilpError> {
        for (i, v) in self.vars.iter().enumerate() {
            if v.lo.is_nan() || v.hi.is_nan() || v.lo > v.hi {
                return Err(MilpError::Malformed(format!(
                    "variable {} ({}) has bounds [{}, {}]",
                    i, v.name, v.lo, v.hi
                )));
            }
            if v.kind == VarKind::Binary && (v.lo < 0.0 || v.hi > 1.0) {
                return Err(MilpError::Malformed(format!(
                    "binary variable {} ({}) has bounds outside [0, 1]",
                    i, v.name
                )));
            }
        }
        let n = self.vars.len();
        let bad = |e: &LinExpr| e.terms.iter().any(|&(v, c)| v.0 >= n || !c.is_finite());
        if bad(&self.objective) || !self.objective.constant.is_finite() {
            return Err(MilpError::Malformed("objective references unknown variable or non-finite coefficient".into()));
        }
        for c in &self.constraints {
            if bad(&c.expr) || c.rhs.is_nan() {
                return Err(MilpError::Malformed(format!(
                    "constraint {} references unknown variable or non-finite coefficient",
                    c.name
                )));
            }
        }
        Ok(())
    }

    /// Write the model in CPLEX LP format.
    pub fn write_lp<W: Write>(&self, mut w: W) -> io::Result<()> {
        let name = |v: VarRef| format!("x{}", v.0);
        let fmt_expr = |e: &LinExpr| -> String {
            if e.terms.is_empty() {
                return "0 x0".to_string();
            }
            let mut s = String::new();
            for (k, &(v, c)) in e.terms.iter().enumerate() {
                if k == 0 {
                    s.push_str(&format!("{} {}", c, name(v)));
                } else if c < 0.0 {
                    s.push_str(&format!(" - {} {}", -c, name(v)));
                } else {
                    s.push_str(&format!(" + {} {}", c, name(v)));
                }
            }
            s
        };
        writeln!(w, "\\ {}", self.name)?;
        for (i, v) in self.vars.iter().enumerate() {
            writeln!(w, "\\ x{} = {}", i, v.name)?;
        }
        writeln!(
            w,
            "{}",
            match self.sense {
                Sense::Minimize => "Minimize",
                Sense::Maximize => "Maximize",
            }
        )?;
        writeln!(w, " obj: {}", fmt_expr(&self.objective))?;
        writeln!(w, "Subject To")?;
        for (i, c) in self.constraints.iter().enumerate() {
            writeln!(w, " c{}: {} {} {}", i, fmt_expr(&c.expr), c.relation, c.rhs)?;
        }
        writeln!(w, "Bounds")?;
        for (i, v) in self.vars.iter().enumerate() {
            let lo = if v.lo.is_finite() { v.lo.to_string() } else { "-inf".into() };
            let hi = if v.hi.is_finite() { v.hi.to_string() } else { "+inf".into() };
            writeln!(w, " {} <= x{} <= {}", lo, i, hi)?;
        }
        let bins: Vec<String> = self
            .vars
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind == VarKind::Binary)
            .map(|(i, _)| format!("x{i}"))
            .collect();
        if !bins.is_empty() {
            writeln!(w, "Binaries")?;
            for chunk in bins.chunks(10) {
                writeln!(w, " {}", chunk.join(" "))?;
            }
        }
        writeln!(w, "End")
    }
}

#[derive(Debug, Clone)]
pub struct SolveParams {
    pub feasibility_tol: f64,
    pub mip_rel_gap: f64,
    pub time_limit: Option<f64>,
    pub threads: Option<u32>,
    pub seed: i32,
    /// Run the backend's presolve.
    pub presolve: bool,
}

impl Default for SolveParams {
    fn default() -> Self {
        Self {
            feasibility_tol: FEAS_TOL,
            mip_rel_gap: MIP_REL_GAP,
            time_limit: None,
            threads: None,
            seed: 0,
            presolve: true,
        }
    }
}

impl SolveParams {
    /// Defaults, with the thread cap read from `CLDIGDT_SOLVER_THREADS`.
    pub fn from_env() -> Self {
        let threads = std::env::var("CLDIGDT_SOLVER_THREADS")
            .ok()
            .and_then(|s| s.parse().ok())
            .filter(|&n: &u32| n > 0);
        Self {
            threads,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    Limit,
}

#[derive(Debug, Clone, Default)]
pub struct SolveStats {
    pub wall_time_s: f64,
    pub node_count: i64,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub status: SolveStatus,
    /// Objective value reported by the backend (including the constant term).
    pub objective: f64,
    /// Variable values; present iff `status == Optimal`.
    pub values: Option<Vec<f64>>,
    pub stats: SolveStats,
}

impl Solution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    /// Value of a variable. Panics when the solve was not optimal.
    pub fn value(&self, v: VarRef) -> f64 {
        self.values.as_ref().expect("solution has values")[v.0]
    }

    pub fn eval(&self, e: &LinExpr) -> f64 {
        e.eval(self.values.as_ref().expect("solution has values"))
    }

    /// Binary value rounded to the nearest integer.
    pub fn flag(&self, v: VarRef) -> bool {
        self.value(v) > 0.5
    }
}

static AUDIT_ON: AtomicBool = AtomicBool::new(false);
static AUDIT_CHECKED: AtomicU64 = AtomicU64::new(0);
static AUDIT_FAILURES: Mutex<Vec<String>> = Mutex::new(Vec::new());

/// Process-wide tally of optimal solutions re-verified by [`check_solution`].
#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub checked: u64,
    /// Model name and first issue of each failing solution.
    pub failures: Vec<String>,
}

/// Turn re-verification of every optimal solution returned by [`solve`] on
/// or off. Off by default.
pub fn set_audit(on: bool) {
    AUDIT_ON.store(on, Ordering::SeqCst);
}

pub fn audit_report() -> AuditReport {
    AuditReport {
        checked: AUDIT_CHECKED.load(Ordering::SeqCst),
        failures: AUDIT_FAILURES.lock().map(|f| f.clone()).unwrap_or_default(),
    }
}

fn audit(model: &MilpModel, sol: &Solution) {
    if !AUDIT_ON.load(Ordering::Relaxed) || !sol.is_optimal() {
        return;
    }
    AUDIT_CHECKED.fetch_add(1, Ordering::SeqCst);
    if let Some(issue) = check_solution(model, sol).first() {
        if let Ok(mut f) = AUDIT_FAILURES.lock() {
            f.push(format!("{}: {issue:?}", model.name));
        }
    }
}

/// Solve a model with HiGHS.
pub fn solve(model: &MilpModel, params: &SolveParams) -> Result<Solution, MilpError> {
    model.validate()?;
    let (mut sol, ambiguous) = run_highs(model, params, params.presolve)?;
    if ambiguous && params.presolve {
        // Presolve may report "unbounded or infeasible"; rerun without it to
        // obtain a definite status.
        sol = run_highs(model, params, false)?.0;
    }
    audit(model, &sol);
    Ok(sol)
}

/// Returns the solution and whether the backend could not tell unbounded
/// from infeasible.
fn run_highs(model: &MilpModel, params: &SolveParams, presolve: bool) -> Result<(Solution, bool), MilpError> {
    let start = Instant::now();
    let mut pb = RowProblem::default();
    let mut cost = vec![0.0; model.vars.len()];
    for &(v, c) in &model.objective.terms {
        cost[v.0] += c;
    }
    let cols: Vec<highs::Col> = model
        .vars
        .iter()
        .zip(&cost)
        .map(|(v, &c)| {
            pb.add_column_with_integrality(c, v.lo..=v.hi, v.kind == VarKind::Binary)
        })
        .collect();
    for c in &model.constraints {
        let row: Vec<(highs::Col, f64)> = c.expr.terms.iter().map(|&(v, k)| (cols[v.0], k)).collect();
        match c.relation {
            Relation::Le => pb.add_row(..=c.rhs, row),
            Relation::Ge => pb.add_row(c.rhs.., row),
            Relation::Eq => pb.add_row(c.rhs..=c.rhs, row),
        }
    }
    let sense = match model.sense {
        Sense::Minimize => highs::Sense::Minimise,
        Sense::Maximize => highs::Sense::Maximise,
    };
    let mut hm = pb
        .try_optimise(sense)
        .map_err(|s| MilpError::Backend(format!("model rejected: {s:?}")))?;
    if std::env::var_os("CLDIGDT_SOLVER_LOG").is_some() {
        set_option(&mut hm, "output_flag", true)?;
        set_option(&mut hm, "log_to_console", true)?;
    } else {
        hm.make_quiet();
    }
    let tol = params.feasibility_tol * 0.1;
    set_option(&mut hm, "primal_feasibility_tolerance", tol)?;
    set_option(&mut hm, "mip_feasibility_tolerance", tol)?;
    set_option(&mut hm, "mip_rel_gap", params.mip_rel_gap)?;
    set_option(&mut hm, "random_seed", params.seed)?;
    // The feasibility-jump heuristic costs more than it saves on these small models.
    set_option(&mut hm, "mip_heuristic_run_feasibility_jump", false)?;
    if !presolve {
        set_option(&mut hm, "presolve", "off")?;
    }
    if let Some(t) = params.time_limit {
        set_option(&mut hm, "time_limit", t)?;
    }
    if let Some(th) = params.threads {
        set_option(&mut hm, "threads", th as i32)?;
    }
    let solved = hm
        .try_solve()
        .map_err(|s| MilpError::Backend(format!("solve failed: {s:?}")))?;
    let raw = solved.status();
    let status = match raw {
        HighsModelStatus::Optimal => SolveStatus::Optimal,
        HighsModelStatus::Infeasible => SolveStatus::Infeasible,
        HighsModelStatus::Unbounded => SolveStatus::Unbounded,
        HighsModelStatus::ModelEmpty => SolveStatus::Optimal,
        HighsModelStatus::UnboundedOrInfeasible if !presolve => SolveStatus::Infeasible,
        HighsModelStatus::UnboundedOrInfeasible
        | HighsModelStatus::ReachedTimeLimit
        | HighsModelStatus::ReachedIterationLimit
        | HighsModelStatus::ReachedSolutionLimit
        | HighsModelStatus::ReachedInterrupt
        | HighsModelStatus::ReachedMemoryLimit
        | HighsModelStatus::ObjectiveBound
        | HighsModelStatus::ObjectiveTarget => SolveStatus::Limit,
        other => return Err(MilpError::Backend(format!("unexpected model status {other:?}"))),
    };
    let node_count = mip_node_count(&solved);
    let (objective, values) = if status == SolveStatus::Optimal {
        let values = if model.vars.is_empty() {
            Vec::new()
        } else {
            solved.get_solution().columns().to_vec()
        };
        let obj = if model.vars.is_empty() {
            0.0
        } else {
            solved.objective_value()
        };
        (obj + model.objective.constant, Some(values))
    } else {
        (f64::NAN, None)
    };
    let sol = Solution {
        status,
        objective,
        values,
        stats: SolveStats {
            wall_time_s: start.elapsed().as_secs_f64(),
            node_count,
        },
    };
    Ok((sol, raw == HighsModelStatus::UnboundedOrInfeasible))
}

fn set_option<V: highs::HighsOptionValue>(hm: &mut highs::Model, key: &str, value: V) -> Result<(), MilpError> {
    hm.try_set_option(key, value)
        .map_err(|_| MilpError::Backend(format!("option {key} rejected")))
}

fn mip_node_count(solved: &highs::SolvedModel) -> i64 {
    let key = CString::new("mip_node_count").expect("static key");
    let mut out: i64 = 0;
    // SAFETY: the pointer comes from a live SolvedModel and `key`/`out`
    // outlive the call.
    let status = unsafe {
        highs_sys::Highs_getInt64InfoValue(solved.as_ptr(), key.as_ptr(), &mut out as *mut i64)
    };
    if status == highs_sys::STATUS_OK {
        out
    } else {
        0
    }
}

/// A problem found by [`check_solution`].
#[derive(Debug, Clone, PartialEq)]
pub enum SolutionIssue {
    NotOptimal,
    ConstraintViolated { index: usize, name: String, violation: f64 },
    BoundViolated { var: usize, name: String, value: f64 },
    NotIntegral { var: usize, name: String, value: f64 },
    ObjectiveMismatch { reported: f64, recomputed: f64 },
}

/// Re-verify a solution against the model, without trusting the backend.
///
/// Constraint residuals and bounds are checked to 1e-6 absolute (scaled up
/// for rows whose terms are large), binaries to 1e-6 from {0, 1}, and the
/// reported objective against the recomputed one to 1e-6 relative.
pub fn check_solution(model: &MilpModel, sol: &Solution) -> Vec<SolutionIssue> {
    let Some(values) = sol.values.as_ref().filter(|_| sol.is_optimal()) else {
        return vec![SolutionIssue::NotOptimal];
    };
    let mut issues = Vec::new();
    for (i, c) in model.constraints.iter().enumerate() {
        let scale = c
            .expr
            .terms
            .iter()
            .map(|&(v, k)| (k * values[v.0]).abs())
            .fold(c.rhs.abs(), f64::max)
            .max(1.0);
        let viol = c.violation(values);
        if viol > FEAS_TOL * scale.min(1e3) {
            issues.push(SolutionIssue::ConstraintViolated {
                index: i,
                name: c.name.clone(),
                violation: viol,
            });
        }
    }
    for (i, (v, &x)) in model.vars.iter().zip(values).enumerate() {
        let slack = FEAS_TOL * x.abs().clamp(1.0, 1e3);
        if x < v.lo - slack || x > v.hi + slack {
            issues.push(SolutionIssue::BoundViolated {
                var: i,
                name: v.name.clone(),
                value: x,
            });
        }
        if v.kind == VarKind::Binary && (x - x.round()).abs() > FEAS_TOL {
            issues.push(SolutionIssue::NotIntegral {
                var: i,
                name: v.name.clone(),
                value: x,
            });
        }
    }
    let recomputed = model.objective.eval(values);
    if (recomputed - sol.objective).abs() > FEAS_TOL * recomputed.abs().max(1.0) {
        issues.push(SolutionIssue::ObjectiveMismatch {
            reported: sol.objective,
            recomputed,
        });
    }
    issues
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve_ok(m: &MilpModel) -> Solution {
        let s = solve(m, &SolveParams::default()).unwrap();
        assert!(s.is_optimal());
        assert!(check_solution(m, &s).is_empty(), "{:?}", check_solution(m, &s));
        s
    }

    #[test]
    fn lower_bound_minimum() {
        let mut m = MilpModel::new("t");
        let x = m.free("x");
        m.ge("lb", x, 3.0);
        m.set_objective(Sense::Minimize, x);
        let s = solve_ok(&m);
        assert!((s.objective - 3.0).abs() < 1e-9);
    }

    #[test]
    fn contradictory_bounds_infeasible() {
        let mut m = MilpModel::new("t");
        let x = m.free("x");
        m.ge("a", x, 1.0);
        m.le("b", x, 0.0);
        m.set_objective(Sense::Minimize, x);
        let s = solve(&m, &SolveParams::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Infeasible);
        assert!(s.values.is_none());
    }

    #[test]
    fn unbounded_reported() {
        let mut m = MilpModel::new("t");
        let x = m.free("x");
        m.le("a", x, 1.0);
        m.set_objective(Sense::Minimize, x);
        let s = solve(&m, &SolveParams::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Unbounded);
    }

    #[test]
    fn binary_cover() {
        let mut m = MilpModel::new("t");
        let a = m.binary("a");
        let b = m.binary("b");
        m.ge("cover", a + b, 1.0);
        m.set_objective(Sense::Minimize, a * 2.0 + b);
        let s = solve_ok(&m);
        assert!((s.objective - 1.0).abs() < 1e-9);
        assert!(!s.flag(a));
        assert!(s.flag(b));
    }

    #[test]
    fn objective_constant_is_reported() {
        let mut m = MilpModel::new("t");
        let x = m.continuous(0.0, 5.0, "x");
        m.set_objective(Sense::Maximize, LinExpr::from(x) + 10.0);
        let s = solve_ok(&m);
        assert!((s.objective - 15.0).abs() < 1e-9);
    }

    #[test]
    fn perturbed_value_flags_constraint() {
        let mut m = MilpModel::new("t");
        let x = m.free("x");
        let y = m.free("y");
        m.ge("tight", x + y, 4.0);
        m.le("loose", x, 100.0);
        m.set_objective(Sense::Minimize, x * 2.0 + y * 3.0);
        let mut s = solve_ok(&m);
        let v = s.values.as_mut().unwrap();
        v[x.index()] -= 1.0;
        let issues = check_solution(&m, &s);
        assert!(issues.iter().any(|i| matches!(i, SolutionIssue::ConstraintViolated { name, .. } if name == "tight")));
        assert!(!issues.iter().any(|i| matches!(i, SolutionIssue::ConstraintViolated { name, .. } if name == "loose")));
    }

    #[test]
    fn objective_mismatch_flagged() {
        let mut m = MilpModel::new("t");
        let x = m.continuous(1.0, 2.0, "x");
        m.set_objective(Sense::Minimize, x);
        let mut s = solve_ok(&m);
        s.objective += 1e-3;
        assert!(check_solution(&m, &s)
            .iter()
            .any(|i| matches!(i, SolutionIssue::ObjectiveMismatch { .. })));
    }

    #[test]
    fn malformed_bounds_rejected() {
        let mut m = MilpModel::new("t");
        m.continuous(2.0, 1.0, "bad");
        assert!(matches!(solve(&m, &SolveParams::default()), Err(MilpError::Malformed(_))));
        let mut m = MilpModel::new("t");
        m.add_var(VarKind::Binary, 0.0, 2.0, "bad");
        assert!(matches!(solve(&m, &SolveParams::default()), Err(MilpError::Malformed(_))));
    }

    #[test]
    fn duplicate_terms_merge() {
        let e = (LinExpr::term(VarRef(0), 1.0) + VarRef(0) * 2.0 + VarRef(1) * 0.0).normalized();
        assert_eq!(e.terms(), &[(VarRef(0), 3.0)]);
    }

    #[test]
    fn repeated_solves_match() {
        let mut m = MilpModel::new("knap");
        let w = [3.0, 4.0, 5.0, 7.0, 2.0, 6.0];
        let v = [4.0, 5.0, 7.0, 9.0, 2.0, 8.0];
        let xs: Vec<VarRef> = (0..6).map(|i| m.binary(format!("x{i}"))).collect();
        let mut cap = LinExpr::new();
        let mut obj = LinExpr::new();
        for i in 0..6 {
            cap.add_term(xs[i], w[i]);
            obj.add_term(xs[i], v[i]);
        }
        m.le("cap", cap, 13.0);
        m.set_objective(Sense::Maximize, obj);
        let a = solve_ok(&m);
        let b = solve_ok(&m);
        assert_eq!(a.status, b.status);
        assert!((a.objective - b.objective).abs() < 1e-9);
        assert!((a.objective - 17.0).abs() < 1e-9);
    }

    #[test]
    fn lp_export_lists_sections() {
        let mut m = MilpModel::new("t");
        let x = m.continuous(0.0, 4.0, "x");
        let z = m.binary("z");
        m.le("link", LinExpr::from(x) - z * 4.0, 0.0);
        m.set_objective(Sense::Maximize, x);
        let mut buf = Vec::new();
        m.write_lp(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        for section in ["Maximize", "Subject To", "Bounds", "Binaries", "End"] {
            assert!(text.contains(section), "{text}");
        }
        assert!(text.contains("c0: 1 x0 - 4 x1 <= 0"));
    }
}
