//! Acceptance suite: runs criteria 1-9 in order and prints one line each.
//!
//! `cargo test -p cldigdt-core --test acceptance -- --nocapture`

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cldigdt::ambiguity::{
    beta_inverse_cdf, build_bands, histogram_from_samples, idm_credible_band, idm_probability_interval, Binning,
    CdfBand, EmpiricalHistogram, IdmParams,
};
use cldigdt::dispatch::solve_deterministic;
use cldigdt::evaluate::{non_decreasing, plateau_start, post_evaluate, sample_oos_scenarios, sigma_sweep, OOS_SEED};
use cldigdt::ingest::{generate_synthetic, SyntheticSpec};
use cldigdt::milp::{self, SolveParams};
use cldigdt::robust::{solve_cl_digdt, solve_igdt, worst_case_cost, BudgetSpec, ClDigdtResult, RobustOptions};
use cldigdt::uset::{shortest_interval_with, IntervalMethod, PlaPair, SetCache, DEFAULT_SEGMENTS};

use common::{beta_quantile_oracle, brute_shortest_width, shipped, toy_feeder, toy_load, Shipped};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

struct Ctx {
    data: Shipped,
    lambda0: f64,
    cache: SetCache,
    cl_at_03: Option<ClDigdtResult>,
    opts: RobustOptions,
}

impl Ctx {
    fn new() -> Ctx {
        let data = shipped();
        let opts = RobustOptions::default();
        let lambda0 = solve_deterministic(&data.case, &data.forecast, &opts.solve)
            .expect("deterministic dispatch solves")
            .cost
            .total;
        Ctx {
            data,
            lambda0,
            cache: SetCache::new(IntervalMethod::Enumeration),
            cl_at_03: None,
            opts,
        }
    }

    fn cl_at_03(&mut self) -> Result<&ClDigdtResult, String> {
        if self.cl_at_03.is_none() {
            let b = BudgetSpec::new(self.lambda0, 0.3).map_err(|e| e.to_string())?;
            let d = &self.data;
            let r = solve_cl_digdt(&d.case, &d.forecast, &d.pairs, &b, 1e-4, &mut self.cache, &self.opts)
                .map_err(|e| e.to_string())?;
            self.cl_at_03 = Some(r);
        }
        Ok(self.cl_at_03.as_ref().unwrap())
    }
}

fn c1_idm_closed_form(_: &mut Ctx) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let n: u64 = rng.random_range(1..=1_000_000);
        let n_k: u64 = rng.random_range(0..=n);
        let lambda: f64 = rng.random_range(0.01..=10.0);
        let (lo, hi) = idm_probability_interval(n_k, n, lambda).map_err(|e| e.to_string())?;
        let d = n as f64 + lambda;
        ensure(lo == n_k as f64 / d && hi == (n_k as f64 + lambda) / d, || {
            format!("({n_k}, {n}, {lambda}) gave [{lo}, {hi}]")
        })?;
        let w = lambda / d;
        ensure(((hi - lo) - w).abs() <= 4.0 * f64::EPSILON, || {
            format!("width {} vs {w} at ({n_k}, {n}, {lambda})", hi - lo)
        })?;
    }
    Ok("1000 triples".into())
}

fn c2_band_structure(_: &mut Ctx) -> Outcome {
    let params = IdmParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let two_point = |a: u64, b: u64| EmpiricalHistogram {
        support: vec![1.0, 2.0],
        counts: vec![a, b],
        n: a + b,
    };
    // end conditions
    let b = idm_credible_band(&two_point(0, 7), &params, None).map_err(|e| e.to_string())?;
    ensure(b.lower[0] == 0.0 && b.upper[1] == 1.0, || format!("ends {:?} {:?}", b.lower, b.upper))?;
    let mut worst_sym = 0.0f64;
    for _ in 0..100 {
        let n: u64 = rng.random_range(1..=500);
        let c: u64 = rng.random_range(0..=n);
        let b = idm_credible_band(&two_point(c, n - c), &params, None).map_err(|e| e.to_string())?;
        let m = idm_credible_band(&two_point(n - c, c), &params, None).map_err(|e| e.to_string())?;
        let err = (b.lower[0] - (1.0 - m.upper[0])).abs();
        worst_sym = worst_sym.max(err);
        ensure(err <= 1e-8, || format!("symmetry off by {err} at n={n}, c={c}"))?;
    }
    let mut worst_q = 0.0f64;
    for _ in 0..40 {
        let a = rng.random_range(1..=200) as f64;
        let bb = rng.random_range(1..=200) as f64;
        let p: f64 = rng.random_range(0.01..0.99);
        let got = beta_inverse_cdf(p, a, bb).map_err(|e| e.to_string())?;
        let want = beta_quantile_oracle(p, a, bb);
        let err = (got - want).abs();
        worst_q = worst_q.max(err);
        ensure(err <= 1e-8, || format!("Beta({a}, {bb}) quantile {p}: {got} vs oracle {want}"))?;
    }
    Ok(format!("symmetry err {worst_sym:.1e}, quantile err {worst_q:.1e}"))
}

fn random_band(rng: &mut ChaCha8Rng) -> CdfBand {
    let len = rng.random_range(5..60);
    let scale: f64 = rng.random_range(1.0..100.0);
    let samples: Vec<f64> = (0..len).map(|_| (rng.random::<f64>() * scale * 4.0).round() / 4.0).collect();
    let hist = histogram_from_samples(&samples, Binning::Raw).unwrap();
    let lambda = rng.random_range(0.5..3.0);
    let gamma = rng.random_range(0.5..0.99);
    idm_credible_band(&hist, &IdmParams { lambda, gamma }, Some((0.0, scale * 1.2))).unwrap()
}

fn c3_interval_oracles(_: &mut Ctx) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let params = SolveParams::default();
    let mut worst = 0.0f64;
    for i in 0..100 {
        let band = random_band(&mut rng);
        let pair = PlaPair::from_band(&band, rng.random_range(4..16));
        let alpha = rng.random_range(0.01..1.0) * pair.max_coverage();
        let milp = shortest_interval_with(&pair, alpha, IntervalMethod::Milp, &params).map_err(|e| e.to_string())?;
        let scan = shortest_interval_with(&pair, alpha, IntervalMethod::Enumeration, &params).map_err(|e| e.to_string())?;
        let brute = brute_shortest_width(&pair, alpha);
        let tol = 1e-9 * (pair.upper.hi() - pair.upper.lo()).max(1.0);
        let err = (milp.width() - scan.width()).abs().max((scan.width() - brute).abs());
        worst = worst.max(err);
        ensure(err <= tol, || {
            format!("band {i} alpha {alpha}: milp {} scan {} brute {brute}", milp.width(), scan.width())
        })?;
    }
    Ok(format!("100 bands, max width gap {worst:.1e}"))
}

fn c4_band_shrinkage(ctx: &mut Ctx) -> Outcome {
    let spec = SyntheticSpec::ieee33();
    let params = IdmParams::default();
    let mut gaps = Vec::new();
    for seed in 0..20u64 {
        let full = generate_synthetic(&spec, 2000, 100 + seed).map_err(|e| e.to_string())?;
        let first: BTreeSet<u32> = full.days().into_iter().take(200).collect();
        let small = full.select_days(&first);
        let mean = |t: &cldigdt::ingest::HistoryTable| -> Result<f64, String> {
            let bands = build_bands(&t.pools(), &params, Binning::Auto, ctx.data.case.pv_cap).map_err(|e| e.to_string())?;
            let e = bands.entries();
            Ok(e.iter().map(|b| b.band.mean_width()).sum::<f64>() / e.len() as f64)
        };
        let (w_full, w_small) = (mean(&full)?, mean(&small)?);
        ensure(w_full < w_small, || format!("seed {seed}: n=2000 width {w_full} >= n=200 width {w_small}"))?;
        gaps.push(w_small - w_full);
    }
    let min = gaps.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(format!("20 seeds, smallest width reduction {min:.4}"))
}

fn c5_iteration_bracket(ctx: &mut Ctx) -> Outcome {
    let budget = (1.0 + 0.3) * ctx.lambda0;
    let params = ctx.opts.solve.clone();
    let r = ctx.cl_at_03()?.clone();
    ensure(r.iterations.len() == 4, || format!("{} iterations", r.iterations.len()))?;
    let mut prev = (0.0, 1.0);
    for (k, it) in r.iterations.iter().enumerate() {
        let want = 10f64.powi(-(k as i32 + 1));
        let w = it.ub - it.lb;
        ensure((w - want).abs() <= 1e-12, || format!("iteration {} bracket width {w}", k + 1))?;
        ensure(it.lb >= prev.0 - 1e-12 && it.ub <= prev.1 + 1e-12, || {
            format!("bracket [{}, {}] leaves [{}, {}]", it.lb, it.ub, prev.0, prev.1)
        })?;
        prev = (it.lb, it.ub);
    }
    let set = r.set_at_alpha_star();
    let d = &ctx.data;
    let wc = worst_case_cost(&d.case, &d.forecast, &r.schedule, &set, &params)
        .map_err(|e| e.to_string())?
        .ok_or("recourse infeasible at the worst case of the final set")?;
    ensure(wc <= budget * (1.0 + 1e-6), || format!("re-solved worst case {wc} over budget {budget}"))?;
    Ok(format!("alpha* {:.4}, worst case {wc:.2} <= budget {budget:.2}", r.alpha_star))
}

fn c6_degenerate(ctx: &mut Ctx) -> Outcome {
    let b = BudgetSpec::new(ctx.lambda0, 0.0).map_err(|e| e.to_string())?;
    let d = &ctx.data;
    let ig = solve_igdt(&d.case, &d.forecast, &b, &ctx.opts).map_err(|e| e.to_string())?;
    ensure(ig.delta_star <= 1e-6, || format!("delta* {} at sigma 0", ig.delta_star))?;
    let cl = solve_cl_digdt(&d.case, &d.forecast, &d.pairs, &b, 1e-4, &mut ctx.cache, &ctx.opts)
        .map_err(|e| e.to_string())?;
    ensure(cl.alpha_star == 0.0, || format!("alpha* {} at sigma 0", cl.alpha_star))?;

    // triangular CDF on [0, 10], both envelopes equal
    let o: Vec<f64> = (0..=DEFAULT_SEGMENTS).map(|i| 10.0 * i as f64 / DEFAULT_SEGMENTS as f64).collect();
    let f: Vec<f64> = o
        .iter()
        .map(|&x| if x <= 5.0 { x * x / 50.0 } else { 1.0 - (10.0 - x) * (10.0 - x) / 50.0 })
        .collect();
    let pair = PlaPair::from_values(o, f.clone(), f, 5.0);
    let o = &pair.upper.breakpoints;
    let spacing = o.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let mut worst = 0.0f64;
    for i in 1..20 {
        let alpha = i as f64 * 0.05;
        let iv = shortest_interval_with(&pair, alpha, IntervalMethod::Enumeration, &ctx.opts.solve)
            .map_err(|e| e.to_string())?;
        let off = ((iv.lo + iv.hi) / 2.0 - 5.0).abs();
        worst = worst.max(off);
        ensure(off <= spacing, || format!("alpha {alpha}: [{}, {}] off center by {off}", iv.lo, iv.hi))?;
    }
    Ok(format!(
        "delta* {:.1e}, alpha* 0, max center offset {worst:.3} <= spacing {spacing:.3}",
        ig.delta_star
    ))
}

fn c7_monotone(ctx: &mut Ctx) -> Outcome {
    let sigmas = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5];
    let d = &ctx.data;
    let curve = sigma_sweep(&d.case, &d.forecast, &d.pairs, ctx.lambda0, &sigmas, 1e-4, &mut ctx.cache, &ctx.opts)
        .map_err(|e| e.to_string())?;
    let (deltas, alphas) = (curve.deltas(), curve.alphas());
    ensure(deltas.iter().chain(&alphas).all(Option::is_some), || format!("gaps in sweep: {}", curve.csv()))?;
    let dv: Vec<f64> = deltas.iter().flatten().copied().collect();
    let av: Vec<f64> = alphas.iter().flatten().copied().collect();
    ensure(non_decreasing(&deltas, 1e-7), || format!("delta* not monotone: {dv:?}"))?;
    ensure(non_decreasing(&alphas, 1e-9), || format!("alpha* not monotone: {av:?}"))?;
    let pd = plateau_start(&dv, 1e-7).ok_or_else(|| format!("no delta* plateau: {dv:?}"))?;
    let pa = plateau_start(&av, 1e-9).ok_or_else(|| format!("no alpha* plateau: {av:?}"))?;
    Ok(format!(
        "delta* {dv:.4?} plateau from sigma {}, alpha* {av:.4?} plateau from sigma {}",
        sigmas[pd], sigmas[pa]
    ))
}

fn c8_post_evaluation(ctx: &mut Ctx) -> Outcome {
    let params = ctx.opts.solve.clone();
    // toy oracle: 10 kW bought ahead at price 1; real-time price 2
    let toy = toy_feeder();
    let dt = solve_deterministic(&toy, &toy_load(10.0), &params).map_err(|e| e.to_string())?;
    let scen: Vec<_> = [10.5, 9.0, 12.0].iter().map(|&l| toy_load(l)).collect();
    let rep = post_evaluate(&toy, &BTreeMap::from([("DT".to_string(), dt.schedule)]), &scen, &params)
        .map_err(|e| e.to_string())?;
    let m = rep.method("DT").unwrap();
    // 12 kW exceeds the 11 kW line; EPB = 10 + (0.5*2 - 1*2)/2
    let epb = m.epb.ok_or("toy EPB missing")?;
    ensure((epb - 9.5).abs() <= 1e-6 && m.reliability == 2.0 / 3.0 && rep.nf() == 2, || {
        format!("toy EPB {epb}, reliability {}, NF {}", m.reliability, rep.nf())
    })?;

    let b = BudgetSpec::new(ctx.lambda0, 0.3).map_err(|e| e.to_string())?;
    let cl = ctx.cl_at_03()?.schedule.clone();
    let d = &ctx.data;
    let ig = solve_igdt(&d.case, &d.forecast, &b, &ctx.opts).map_err(|e| e.to_string())?;
    let dt = solve_deterministic(&d.case, &d.forecast, &params).map_err(|e| e.to_string())?;
    let scenarios = sample_oos_scenarios(&d.case, &d.holdout, &d.train, 50, OOS_SEED).map_err(|e| e.to_string())?;
    let schedules = BTreeMap::from([
        ("DT".to_string(), dt.schedule),
        ("IGDT".to_string(), ig.schedule),
        ("CL-DIGDT".to_string(), cl),
    ]);
    let rep = post_evaluate(&d.case, &schedules, &scenarios, &params).map_err(|e| e.to_string())?;
    let get = |n: &str| rep.method(n).unwrap();
    let (r_dt, r_ig, r_cl) = (get("DT").reliability, get("IGDT").reliability, get("CL-DIGDT").reliability);
    let (e_ig, e_cl) = (get("IGDT").epb, get("CL-DIGDT").epb);
    let summary = format!(
        "reliability DT {r_dt:.2} IGDT {r_ig:.2} CL {r_cl:.2}; EPB DT {:.2?} IGDT {e_ig:.2?} CL {e_cl:.2?}; NF {}",
        get("DT").epb,
        rep.nf()
    );
    ensure(r_dt <= r_ig && r_ig <= r_cl, || format!("reliability ordering fails: {summary}"))?;
    match (e_cl, e_ig) {
        (Some(c), Some(i)) if c <= i => Ok(summary),
        _ => Err(format!("EPB(CL-DIGDT) <= EPB(IGDT) fails: {summary}")),
    }
}

fn c9_solver_hygiene(_: &mut Ctx) -> Outcome {
    let r = milp::audit_report();
    ensure(r.checked > 0, || "no optimal solutions were audited".into())?;
    ensure(r.failures.is_empty(), || {
        format!("{} of {} failed: {:?}", r.failures.len(), r.checked, &r.failures[..r.failures.len().min(5)])
    })?;
    Ok(format!("{} optimal solutions checked", r.checked))
}

type Criterion = (u32, &'static str, Duration, fn(&mut Ctx) -> Outcome);

#[test]
fn acceptance() {
    milp::set_audit(true);
    let mut ctx = Ctx::new();
    let criteria: [Criterion; 9] = [
        (1, "IDM closed form", Duration::from_secs(1), c1_idm_closed_form),
        (2, "credible-band structure", Duration::from_secs(10), c2_band_structure),
        (3, "shortest-interval oracles", Duration::from_secs(60), c3_interval_oracles),
        (4, "band shrinkage", Duration::from_secs(60), c4_band_shrinkage),
        (5, "iteration bracket", Duration::from_secs(600), c5_iteration_bracket),
        (6, "degenerate reductions", Duration::from_secs(120), c6_degenerate),
        (7, "monotonicities", Duration::from_secs(1800), c7_monotone),
        (8, "post-evaluation ordering", Duration::from_secs(600), c8_post_evaluation),
        (9, "solver hygiene", Duration::from_secs(60), c9_solver_hygiene),
    ];
    let mut failed = Vec::new();
    for (id, name, limit, f) in criteria {
        let t = Instant::now();
        let out = catch_unwind(AssertUnwindSafe(|| f(&mut ctx)))
            .unwrap_or_else(|p| Err(p.downcast_ref::<String>().cloned().unwrap_or_else(|| "panicked".into())));
        let secs = t.elapsed();
        let out = match out {
            Ok(_) if secs > limit => Err(format!("took {:.1}s, limit {}s", secs.as_secs_f64(), limit.as_secs())),
            o => o,
        };
        match &out {
            Ok(detail) => println!("criterion {id} [{name}]: PASS ({detail}; {:.1}s)", secs.as_secs_f64()),
            Err(why) => {
                println!("criterion {id} [{name}]: FAIL ({why}; {:.1}s)", secs.as_secs_f64());
                failed.push(id);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
