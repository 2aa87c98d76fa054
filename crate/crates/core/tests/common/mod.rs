//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use cldigdt::ambiguity::Cdf;
use cldigdt::ambiguity::{build_bands, Binning, IdmParams};
use cldigdt::ingest::{generate_synthetic, make_forecast, HistoryTable, SyntheticSpec, HOLDOUT_FRACTION, IEEE33_DAYS, IEEE33_SEED};
use cldigdt::netmodel::{load_network_case, parse_network_case, NetworkCase, Scenario};
use cldigdt::uset::{PairSet, PlaPair, DEFAULT_SEGMENTS};

pub fn data_path(name: &str) -> String {
    format!("{}/data/{name}", env!("CARGO_MANIFEST_DIR"))
}

/// ln Γ(x) by the Lanczos approximation (g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return (std::f64::consts::PI / (std::f64::consts::PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + 7.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Beta(a, b) CDF at `x` by composite Simpson quadrature of the density.
/// Intended for `a, b >= 1`, where the density is bounded.
pub fn beta_cdf_simpson(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_b = ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
    let f = |t: f64| {
        if t <= 0.0 || t >= 1.0 {
            let edge = if t <= 0.0 { a } else { b };
            return if edge == 1.0 { (-ln_b).exp() } else { 0.0 };
        }
        ((a - 1.0) * t.ln() + (b - 1.0) * (1.0 - t).ln() - ln_b).exp()
    };
    let n = 20_000;
    let h = x / n as f64;
    let mut s = f(0.0) + f(x);
    for k in 1..n {
        s += f(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Beta quantile by bisection on [`beta_cdf_simpson`].
pub fn beta_quantile_oracle(p: f64, a: f64, b: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if beta_cdf_simpson(mid, a, b) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Smallest `x` with `F(x) >= y` for a continuous nondecreasing PLA, found by
/// walking the segments.
fn pla_first_reach(pair_f: &cldigdt::uset::PlaApprox, y: f64) -> Option<f64> {
    let (o, v) = (&pair_f.breakpoints, &pair_f.values);
    if v[0] >= y {
        return Some(o[0]);
    }
    for s in 0..o.len() - 1 {
        if v[s + 1] >= y {
            let t = (y - v[s]) / (v[s + 1] - v[s]);
            return Some(o[s] + t * (o[s + 1] - o[s]));
        }
    }
    None
}

/// Largest `x` with `F(x) <= y`.
fn pla_last_below(pair_f: &cldigdt::uset::PlaApprox, y: f64) -> Option<f64> {
    let (o, v) = (&pair_f.breakpoints, &pair_f.values);
    let m = o.len() - 1;
    if v[m] <= y {
        return Some(o[m]);
    }
    for s in (0..m).rev() {
        if v[s] <= y {
            let t = (y - v[s]) / (v[s + 1] - v[s]);
            return Some(o[s] + t * (o[s + 1] - o[s]));
        }
    }
    None
}

/// Minimal width of an interval `[l, u]` with `lower(u) - upper(l) >= alpha`,
/// by brute force over every breakpoint as either endpoint.
pub fn brute_shortest_width(pair: &PlaPair, alpha: f64) -> f64 {
    let mut best = f64::INFINITY;
    for &l in &pair.upper.breakpoints {
        if let Some(u) = pla_first_reach(&pair.lower, pair.upper.eval(l) + alpha) {
            if u >= l {
                best = best.min(u - l);
            }
        }
    }
    for &u in &pair.lower.breakpoints {
        if let Some(l) = pla_last_below(&pair.upper, pair.lower.eval(u) - alpha) {
            if u >= l {
                best = best.min(u - l);
            }
        }
    }
    best
}

/// The shipped case, generator spec and the data derived from them.
pub struct Shipped {
    pub case: NetworkCase,
    pub train: HistoryTable,
    pub holdout: HistoryTable,
    pub forecast: Scenario,
    pub pairs: PairSet,
}

pub fn shipped() -> Shipped {
    let case = load_network_case(data_path("ieee33.json")).expect("shipped case loads");
    let spec: SyntheticSpec =
        serde_json::from_str(&std::fs::read_to_string(data_path("ieee33_synthetic.json")).unwrap()).unwrap();
    let hist = generate_synthetic(&spec, IEEE33_DAYS, IEEE33_SEED).unwrap();
    let (train, holdout) = hist.split_holdout(HOLDOUT_FRACTION);
    let forecast = make_forecast(&train).unwrap().to_scenario(&case);
    let bands = build_bands(&train.pools(), &IdmParams::default(), Binning::Auto, case.pv_cap).unwrap();
    let pairs = PairSet::from_bands(&bands, DEFAULT_SEGMENTS);
    Shipped {
        case,
        train,
        holdout,
        forecast,
        pairs,
    }
}

/// Substation bus 1 feeding bus 2 over one line; purchase only, one step.
/// First-stage price 1, second-stage price 2.
pub const TOY_FEEDER: &str = r#"{
  "buses": [{"id": 1, "has_pv": false, "pf_angle": 0.0}, {"id": 2, "has_pv": false, "pf_angle": 0.0}],
  "lines": [{"from": 1, "to": 2, "r": 1e-5, "x": 1e-5, "p_max": 11.0, "phi": 0.02}],
  "time": {"steps": 1, "dt_hours": 1.0},
  "prices": {"d": [1.0], "d_hat": [2.0]},
  "substation": 1,
  "pv_cap": 1.0
}"#;

pub fn toy_feeder() -> NetworkCase {
    parse_network_case(TOY_FEEDER).expect("toy case parses")
}

/// Scenario for [`toy_feeder`] with `load` kW at bus 2.
pub fn toy_load(load: f64) -> Scenario {
    Scenario {
        pv: vec![vec![0.0], vec![0.0]],
        load: vec![vec![0.0], vec![load]],
    }
}
