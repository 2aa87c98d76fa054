//! Subcommand pipelines. Each reads its inputs, runs the core modules and
//! writes artifacts into the run directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use cldigdt::ambiguity::{build_bands, BandSet, Binning, IdmParams};
use cldigdt::dispatch::{solve_deterministic, FirstStageSchedule};
use cldigdt::evaluate::{post_evaluate, sample_oos_scenarios, sigma_sweep, EvaluationReport};
use cldigdt::ingest::{generate_synthetic, load_history, make_forecast, HistoryTable, SyntheticSpec};
use cldigdt::milp::SolveParams;
use cldigdt::netmodel::{ieee33_case, load_network_case, NetworkCase, Scenario};
use cldigdt::robust::{solve_cl_digdt, solve_igdt, BudgetSpec, ClDigdtResult, IgdtResult, RobustOptions};
use cldigdt::uset::{IntervalMethod, PairSet, SetCache};

use crate::config::{HistorySource, RunConfig};
use crate::rundir::RunDir;

pub const HISTORY_CSV: &str = "history.csv";
pub const FORECAST_JSON: &str = "forecast.json";
pub const BANDS_JSON: &str = "bands.json";
pub const LAMBDA0_JSON: &str = "lambda0.json";
pub const DT_SCHEDULE_JSON: &str = "dt_schedule.json";
pub const IGDT_JSON: &str = "igdt_result.json";
pub const CLDIGDT_JSON: &str = "cldigdt_result.json";
pub const ALPHA_CACHE_JSON: &str = "alpha_cache.json";
pub const ALPHA_CACHE_KEY: &str = "alpha_cache.key";
pub const EVAL_SUMMARY_CSV: &str = "evaluation_summary.csv";
pub const EVAL_DETAIL_CSV: &str = "evaluation_detail.csv";
pub const EVAL_ITERATIONS_CSV: &str = "evaluation_iterations.csv";
pub const SENSITIVITY_CSV: &str = "sensitivity.csv";

/// Case, train/holdout split and forecast shared by every command.
pub struct Inputs {
    pub case: NetworkCase,
    pub history: HistoryTable,
    pub train: HistoryTable,
    pub holdout: HistoryTable,
    pub forecast: Scenario,
}

impl Inputs {
    pub fn load(cfg: &RunConfig) -> Result<Inputs> {
        let case = match &cfg.case {
            Some(p) => load_network_case(p).with_context(|| format!("loading case {}", p.display()))?,
            None => ieee33_case(),
        };
        let history = match &cfg.history {
            HistorySource::File(p) => load_history(p).with_context(|| format!("loading history {}", p.display()))?,
            HistorySource::Synthetic(spec) => {
                let spec = match spec {
                    Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)
                        .with_context(|| format!("parsing synthetic spec {}", p.display()))?,
                    None => SyntheticSpec::ieee33(),
                };
                generate_synthetic(&spec, cfg.days, cfg.seed)?
            }
        };
        let (train, holdout) = history.split_holdout(cfg.holdout);
        let forecast = make_forecast(&train)?.to_scenario(&case);
        Ok(Inputs {
            case,
            history,
            train,
            holdout,
            forecast,
        })
    }

    pub fn bands(&self, cfg: &RunConfig) -> Result<BandSet> {
        let idm = IdmParams {
            lambda: cfg.lambda,
            gamma: cfg.gamma,
        };
        Ok(build_bands(&self.train.pools(), &idm, Binning::Auto, self.case.pv_cap)?)
    }
}

fn options(cfg: &RunConfig) -> RobustOptions {
    RobustOptions {
        enforce_corners: cfg.enforce_corners,
        solve: SolveParams::from_env(),
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Lambda0 {
    pub lambda0: f64,
    pub first_stage: f64,
    pub second_stage: f64,
}

pub fn ingest(cfg: &RunConfig, dir: &RunDir) -> Result<()> {
    let inp = Inputs::load(cfg)?;
    inp.history.write_csv(dir.create(HISTORY_CSV)?)?;
    dir.write_json(FORECAST_JSON, &inp.forecast)?;
    println!(
        "{} records, {} days ({} train, {} holdout), {} sources",
        inp.history.len(),
        inp.history.days().len(),
        inp.train.days().len(),
        inp.holdout.days().len(),
        inp.history.sources().len()
    );
    Ok(())
}

pub fn build_bands_cmd(cfg: &RunConfig, dir: &RunDir) -> Result<()> {
    let inp = Inputs::load(cfg)?;
    let bands = inp.bands(cfg)?;
    dir.write(BANDS_JSON, &bands.to_json()?)?;
    println!("{} bands", bands.len());
    Ok(())
}

fn deterministic(inp: &Inputs) -> Result<(Lambda0, FirstStageSchedule)> {
    let det = solve_deterministic(&inp.case, &inp.forecast, &SolveParams::from_env())?;
    let l = Lambda0 {
        lambda0: det.cost.total,
        first_stage: det.cost.first_stage,
        second_stage: det.cost.second_stage,
    };
    Ok((l, det.schedule))
}

pub fn solve_dt(cfg: &RunConfig, dir: &RunDir) -> Result<()> {
    let inp = Inputs::load(cfg)?;
    let (l, sched) = deterministic(&inp)?;
    dir.write_json(LAMBDA0_JSON, &l)?;
    dir.write(DT_SCHEDULE_JSON, &sched.to_json())?;
    println!("lambda0 = {}", l.lambda0);
    Ok(())
}

pub fn solve_igdt_cmd(cfg: &RunConfig, dir: &RunDir) -> Result<()> {
    let inp = Inputs::load(cfg)?;
    let (l, _) = deterministic(&inp)?;
    let budget = BudgetSpec::new(l.lambda0, cfg.sigma)?;
    let r = solve_igdt(&inp.case, &inp.forecast, &budget, &options(cfg))?;
    dir.write_json(IGDT_JSON, &r)?;
    println!("delta* = {} (worst-case cost {}, budget {})", r.delta_star, r.worst_case_cost, budget.budget());
    Ok(())
}

/// Identifies everything the cached sets depend on.
fn cache_key(cfg: &RunConfig) -> String {
    let key = serde_json::json!({
        "case": cfg.case, "history": cfg.history, "days": cfg.days, "seed": cfg.seed,
        "holdout": cfg.holdout, "gamma": cfg.gamma, "lambda": cfg.lambda, "grid": cfg.grid,
    });
    Sha256::digest(key.to_string().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

fn load_cache(cfg: &RunConfig, dir: &RunDir) -> Result<SetCache> {
    let method = IntervalMethod::Enumeration;
    if dir.exists(ALPHA_CACHE_JSON) && dir.exists(ALPHA_CACHE_KEY) && dir.read(ALPHA_CACHE_KEY)?.trim() == cache_key(cfg) {
        return SetCache::from_json(&dir.read(ALPHA_CACHE_JSON)?, method).map_err(anyhow::Error::msg);
    }
    Ok(SetCache::new(method))
}

fn save_cache(cfg: &RunConfig, dir: &RunDir, cache: &SetCache) -> Result<()> {
    dir.write(ALPHA_CACHE_JSON, &cache.to_json()?)?;
    dir.write(ALPHA_CACHE_KEY, &cache_key(cfg))
}

pub fn solve_cldigdt_cmd(cfg: &RunConfig, dir: &RunDir) -> Result<()> {
    let inp = Inputs::load(cfg)?;
    let (l, _) = deterministic(&inp)?;
    let budget = BudgetSpec::new(l.lambda0, cfg.sigma)?;
    let pairs = PairSet::from_bands(&inp.bands(cfg)?, cfg.grid);
    let mut cache = load_cache(cfg, dir)?;
    let r = solve_cl_digdt(&inp.case, &inp.forecast, &pairs, &budget, cfg.epsilon, &mut cache, &options(cfg));
    save_cache(cfg, dir, &cache)?;
    let r = r?;
    dir.write(CLDIGDT_JSON, &r.to_json())?;
    for it in &r.iterations {
        println!(
            "iteration {}: alpha = {}, bracket [{}, {}], width {:.0e}, worst-case cost {}",
            it.iteration,
            it.incumbent_alpha,
            it.lb,
            it.ub,
            it.ub - it.lb,
            it.worst_case_cost
        );
    }
    println!("alpha* = {}", r.alpha_star);
    Ok(())
}

/// Iteration label used in the accuracy table.
fn iteration_label(k: usize) -> String {
    format!("CL-DIGDT@{k}")
}

pub fn evaluate_cmd(cfg: &RunConfig, dir: &RunDir) -> Result<()> {
    dir.require(&[DT_SCHEDULE_JSON, IGDT_JSON, CLDIGDT_JSON])?;
    let inp = Inputs::load(cfg)?;
    let dt: FirstStageSchedule = dir.read_json(DT_SCHEDULE_JSON)?;
    let igdt: IgdtResult = dir.read_json(IGDT_JSON)?;
    let cl: ClDigdtResult = dir.read_json(CLDIGDT_JSON)?;
    let scenarios = sample_oos_scenarios(&inp.case, &inp.holdout, &inp.train, cfg.scenarios, cfg.eval_seed)?;
    let params = SolveParams::from_env();

    let mut schedules = BTreeMap::new();
    schedules.insert("DT".to_string(), dt);
    schedules.insert("IGDT".to_string(), igdt.schedule);
    schedules.insert("CL-DIGDT".to_string(), cl.schedule.clone());
    let report = post_evaluate(&inp.case, &schedules, &scenarios, &params)?;
    dir.write(EVAL_SUMMARY_CSV, &report.summary_csv())?;
    dir.write(EVAL_DETAIL_CSV, &report.detail_csv())?;

    let iters: BTreeMap<String, FirstStageSchedule> =
        cl.iterations.iter().map(|it| (iteration_label(it.iteration), it.schedule.clone())).collect();
    let it_report = post_evaluate(&inp.case, &iters, &scenarios, &params)?;
    dir.write(EVAL_ITERATIONS_CSV, &iterations_csv(&cl, &it_report))?;
    print!("{}", report.summary_csv());
    Ok(())
}

fn iterations_csv(cl: &ClDigdtResult, report: &EvaluationReport) -> String {
    let mut s = String::from("iteration,incumbent_alpha,lb,ub,first_stage_cost,epb,reliability,nf\n");
    for it in &cl.iterations {
        let m = report.method(&iteration_label(it.iteration)).expect("every iteration evaluated");
        let epb = m.epb.map(|v| v.to_string()).unwrap_or_default();
        writeln!(
            s,
            "{},{},{},{},{},{epb},{},{}",
            it.iteration,
            it.incumbent_alpha,
            it.lb,
            it.ub,
            m.first_stage_cost,
            m.reliability,
            report.nf()
        )
        .unwrap();
    }
    s
}

pub fn sweep_sigma(cfg: &RunConfig, dir: &RunDir) -> Result<()> {
    let inp = Inputs::load(cfg)?;
    let (l, _) = deterministic(&inp)?;
    let pairs = PairSet::from_bands(&inp.bands(cfg)?, cfg.grid);
    let mut cache = load_cache(cfg, dir)?;
    let curve = sigma_sweep(&inp.case, &inp.forecast, &pairs, l.lambda0, &cfg.sigmas, cfg.epsilon, &mut cache, &options(cfg));
    save_cache(cfg, dir, &cache)?;
    let curve = curve?;
    dir.write(SENSITIVITY_CSV, &curve.csv())?;
    print!("{}", curve.csv());
    Ok(())
}
