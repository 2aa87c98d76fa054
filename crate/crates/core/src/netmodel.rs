//! Physical data model of a radial distribution network.
//!
//! A [`NetworkCase`] is loaded from JSON (see [`load_network_case`]) or built
//! from the bundled 33-bus feeder ([`ieee33_case`]). Cases are immutable once
//! validated and can be shared freely between threads.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default squared-voltage band, per-unit squared.
pub const DEFAULT_V_MIN_SQ: f64 = 0.95 * 0.95;
pub const DEFAULT_V_MAX_SQ: f64 = 1.05 * 1.05;
/// Loss factor applied to lines that do not specify one.
pub const DEFAULT_LOSS_FACTOR: f64 = 0.02;
/// Load power-factor angle (radians) used when a bus does not specify one.
pub const DEFAULT_PF_ANGLE: f64 = 0.3;

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("case file {path} not found")]
    NotFound { path: String },
    #[error("failed to read case file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed case JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("case failed validation:\n{}", format_violations(.0))]
    Invalid(Vec<Violation>),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| format!("  - {x}"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Load power-factor angle of a bus, either fixed or given per time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PfAngle {
    Constant(f64),
    PerStep(Vec<f64>),
}

impl Default for PfAngle {
    fn default() -> Self {
        PfAngle::Constant(DEFAULT_PF_ANGLE)
    }
}

impl PfAngle {
    pub fn at(&self, t: usize) -> f64 {
        match self {
            PfAngle::Constant(a) => *a,
            PfAngle::PerStep(v) => v[t],
        }
    }

    fn values(&self) -> Vec<f64> {
        match self {
            PfAngle::Constant(a) => vec![*a],
            PfAngle::PerStep(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: usize,
    #[serde(default)]
    pub has_pv: bool,
    #[serde(default)]
    pub pf_angle: PfAngle,
}

/// A branch of the feeder.
///
/// `r` and `x` are expressed as squared-voltage drop coefficients, i.e. the
/// per-unit-squared drop produced by one kW (kvar) of flow, so the lossy
/// DistFlow drop is `(r p + x q) / (1 - phi)` with flows in kW/kvar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub from: usize,
    pub to: usize,
    pub r: f64,
    pub x: f64,
    pub p_max: f64,
    #[serde(default = "default_phi")]
    pub phi: f64,
}

fn default_phi() -> f64 {
    DEFAULT_LOSS_FACTOR
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgUnit {
    pub bus: usize,
    pub p_max: f64,
    pub p_min: f64,
    pub ramp_up: f64,
    pub ramp_down: f64,
    pub recourse_p_max: f64,
    pub recourse_p_min: f64,
    pub q_max: f64,
    pub q_min: f64,
    /// First-stage cost, $/kW.
    pub cost: f64,
    /// Recourse cost, $/kW.
    pub recourse_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EssUnit {
    pub bus: usize,
    pub charge_max: f64,
    pub charge_min: f64,
    pub discharge_max: f64,
    pub discharge_min: f64,
    pub energy_max: f64,
    pub energy_min: f64,
    pub efficiency: f64,
    pub initial_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub steps: usize,
    pub dt_hours: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prices {
    /// First-stage purchase price per step, $/kW.
    pub d: Vec<f64>,
    /// Second-stage (balancing) purchase price per step, $/kW.
    pub d_hat: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoltageLimits {
    pub v_min_sq: f64,
    pub v_max_sq: f64,
}

impl Default for VoltageLimits {
    fn default() -> Self {
        Self {
            v_min_sq: DEFAULT_V_MIN_SQ,
            v_max_sq: DEFAULT_V_MAX_SQ,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkCase {
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    #[serde(default)]
    pub dgs: Vec<DgUnit>,
    #[serde(default)]
    pub esss: Vec<EssUnit>,
    pub time: TimeGrid,
    pub prices: Prices,
    #[serde(default)]
    pub voltage: VoltageLimits,
    pub substation: usize,
    /// Rated PV capacity per PV bus, kW.
    pub pv_cap: f64,
}

/// Realised (or forecast) uncertain inputs, indexed `[bus position][time]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub pv: Vec<Vec<f64>>,
    pub load: Vec<Vec<f64>>,
}

impl Scenario {
    pub fn zeros(buses: usize, steps: usize) -> Self {
        Self {
            pv: vec![vec![0.0; steps]; buses],
            load: vec![vec![0.0; steps]; buses],
        }
    }

    pub fn check_dims(&self, case: &NetworkCase) -> bool {
        let n = case.buses.len();
        let t = case.time.steps;
        self.pv.len() == n
            && self.load.len() == n
            && self.pv.iter().all(|r| r.len() == t)
            && self.load.iter().all(|r| r.len() == t)
    }

    /// Net load `load - pv` summed over buses at step `t`.
    pub fn net_load(&self, t: usize) -> f64 {
        self.load.iter().map(|r| r[t]).sum::<f64>() - self.pv.iter().map(|r| r[t]).sum::<f64>()
    }
}

/// One failed invariant found by [`validate_case`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub subject: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.subject, self.message)
    }
}

impl NetworkCase {
    /// Position of a bus id in `buses`.
    pub fn bus_index(&self, id: usize) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn substation_index(&self) -> usize {
        self.bus_index(self.substation)
            .expect("validated case has a substation bus")
    }

    /// Map from bus id to position, for hot loops.
    pub fn bus_positions(&self) -> BTreeMap<usize, usize> {
        self.buses
            .iter()
            .enumerate()
            .map(|(i, b)| (b.id, i))
            .collect()
    }

    pub fn steps(&self) -> usize {
        self.time.steps
    }

    pub fn pv_buses(&self) -> impl Iterator<Item = &Bus> {
        self.buses.iter().filter(|b| b.has_pv)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("case serializes")
    }

    /// Multiply every cost and price by `factor`.
    pub fn scaled_prices(&self, factor: f64) -> NetworkCase {
        let mut c = self.clone();
        c.prices.d.iter_mut().for_each(|p| *p *= factor);
        c.prices.d_hat.iter_mut().for_each(|p| *p *= factor);
        for g in &mut c.dgs {
            g.cost *= factor;
            g.recourse_cost *= factor;
        }
        c
    }
}

/// Read and validate a case from a JSON file.
pub fn load_network_case(path: impl AsRef<Path>) -> Result<NetworkCase, CaseError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            CaseError::NotFound {
                path: path.display().to_string(),
            }
        } else {
            CaseError::Io {
                path: path.display().to_string(),
                source: e,
            }
        }
    })?;
    parse_network_case(&text)
}

pub fn parse_network_case(text: &str) -> Result<NetworkCase, CaseError> {
    let case: NetworkCase = serde_json::from_str(text)?;
    let report = validate_case(&case);
    if report.is_empty() {
        Ok(case)
    } else {
        Err(CaseError::Invalid(report))
    }
}

/// Check every structural and physical invariant of a case.
///
/// Returns an empty list for a well-formed case. Violations are data, never
/// panics, so callers can print all problems at once.
pub fn validate_case(case: &NetworkCase) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |subject: String, message: &str| {
        out.push(Violation {
            subject,
            message: message.to_string(),
        })
    };
    let steps = case.time.steps;

    if steps == 0 {
        push("time".into(), "time grid has no steps");
    }
    if !(case.time.dt_hours > 0.0) {
        push("time".into(), "non-positive step length");
    }

    let mut ids = BTreeSet::new();
    for b in &case.buses {
        if !ids.insert(b.id) {
            push(format!("bus {}", b.id), "duplicate bus id");
        }
        let angles = b.pf_angle.values();
        if let PfAngle::PerStep(v) = &b.pf_angle {
            if v.len() != steps {
                push(format!("bus {}", b.id), "power-factor angle series length differs from time steps");
            }
        }
        if angles
            .iter()
            .any(|a| !(a.abs() < std::f64::consts::FRAC_PI_2))
        {
            push(format!("bus {}", b.id), "power-factor angle outside (-pi/2, pi/2)");
        }
    }
    if !ids.contains(&case.substation) {
        push("substation".into(), "substation bus does not exist");
    }

    for (k, l) in case.lines.iter().enumerate() {
        let s = format!("line {k} ({}-{})", l.from, l.to);
        if !ids.contains(&l.from) || !ids.contains(&l.to) {
            push(s.clone(), "endpoint is not a known bus");
        }
        if l.from == l.to {
            push(s.clone(), "self loop");
        }
        if l.r < 0.0 {
            push(s.clone(), "negative resistance");
        }
        if l.x < 0.0 {
            push(s.clone(), "negative reactance");
        }
        if !(l.p_max > 0.0) {
            push(s.clone(), "non-positive flow limit");
        }
        if !(0.0..1.0).contains(&l.phi) {
            push(s.clone(), "loss factor outside [0, 1)");
        }
    }

    if !case.buses.is_empty() && case.lines.len() + 1 != case.buses.len() {
        push(
            "topology".into(),
            "not radial: line count must equal bus count minus one",
        );
    } else if ids.contains(&case.substation) && !is_connected(case) {
        push("topology".into(), "not radial: network is disconnected");
    }

    for (k, g) in case.dgs.iter().enumerate() {
        let s = format!("dg {k} (bus {})", g.bus);
        if !ids.contains(&g.bus) {
            push(s.clone(), "DG bus does not exist");
        }
        if g.p_min > g.p_max {
            push(s.clone(), "active power bounds inverted");
        }
        if g.recourse_p_min > g.recourse_p_max {
            push(s.clone(), "recourse bounds inverted");
        }
        if g.q_min > g.q_max {
            push(s.clone(), "reactive bounds inverted");
        }
        if g.ramp_up < 0.0 || g.ramp_down < 0.0 {
            push(s.clone(), "negative ramp limit");
        }
        if g.cost < 0.0 || g.recourse_cost < 0.0 {
            push(s.clone(), "negative cost");
        }
    }

    for (k, e) in case.esss.iter().enumerate() {
        let s = format!("ess {k} (bus {})", e.bus);
        if !ids.contains(&e.bus) {
            push(s.clone(), "ESS bus does not exist");
        }
        if !(e.efficiency > 0.0 && e.efficiency <= 1.0) {
            push(s.clone(), "efficiency outside (0, 1]");
        }
        if e.energy_min > e.energy_max {
            push(s.clone(), "energy bounds inverted");
        } else if e.initial_energy < e.energy_min || e.initial_energy > e.energy_max {
            push(s.clone(), "initial energy outside energy bounds");
        }
        if [e.charge_max, e.charge_min, e.discharge_max, e.discharge_min]
            .iter()
            .any(|p| *p < 0.0)
        {
            push(s.clone(), "negative power bound");
        }
        if e.charge_min > e.charge_max || e.discharge_min > e.discharge_max {
            push(s.clone(), "power bounds inverted");
        }
    }

    if !(case.voltage.v_min_sq < case.voltage.v_max_sq) {
        push("voltage".into(), "voltage bounds inverted");
    }
    if case.prices.d.len() != steps || case.prices.d_hat.len() != steps {
        push("prices".into(), "price series length differs from time steps");
    }
    if case
        .prices
        .d
        .iter()
        .chain(case.prices.d_hat.iter())
        .any(|p| *p < 0.0)
    {
        push("prices".into(), "negative price");
    }
    if case.pv_cap < 0.0 {
        push("pv_cap".into(), "negative PV capacity");
    }
    out
}

/// Breadth-first reachability from the substation over undirected lines.
fn is_connected(case: &NetworkCase) -> bool {
    let mut adj: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for l in &case.lines {
        adj.entry(l.from).or_default().push(l.to);
        adj.entry(l.to).or_default().push(l.from);
    }
    let mut seen = BTreeSet::from([case.substation]);
    let mut queue = VecDeque::from([case.substation]);
    while let Some(b) = queue.pop_front() {
        for &n in adj.get(&b).into_iter().flatten() {
            if seen.insert(n) {
                queue.push_back(n);
            }
        }
    }
    seen.len() == case.buses.len()
}

// Baran & Wu 33-bus feeder: (from, to, r ohm, x ohm).
const IEEE33_BRANCHES: [(usize, usize, f64, f64); 32] = [
    (1, 2, 0.0922, 0.0470),
    (2, 3, 0.4930, 0.2511),
    (3, 4, 0.3660, 0.1864),
    (4, 5, 0.3811, 0.1941),
    (5, 6, 0.8190, 0.7070),
    (6, 7, 0.1872, 0.6188),
    (7, 8, 0.7114, 0.2351),
    (8, 9, 1.0300, 0.7400),
    (9, 10, 1.0440, 0.7400),
    (10, 11, 0.1966, 0.0650),
    (11, 12, 0.3744, 0.1238),
    (12, 13, 1.4680, 1.1550),
    (13, 14, 0.5416, 0.7129),
    (14, 15, 0.5910, 0.5260),
    (15, 16, 0.7463, 0.5450),
    (16, 17, 1.2890, 1.7210),
    (17, 18, 0.7320, 0.5740),
    (2, 19, 0.1640, 0.1565),
    (19, 20, 1.5042, 1.3554),
    (20, 21, 0.4095, 0.4784),
    (21, 22, 0.7089, 0.9373),
    (3, 23, 0.4512, 0.3083),
    (23, 24, 0.8980, 0.7091),
    (24, 25, 0.8960, 0.7011),
    (6, 26, 0.2030, 0.1034),
    (26, 27, 0.2842, 0.1447),
    (27, 28, 1.0590, 0.9337),
    (28, 29, 0.8042, 0.7006),
    (29, 30, 0.5075, 0.2585),
    (30, 31, 0.9744, 0.9630),
    (31, 32, 0.3105, 0.3619),
    (32, 33, 0.3410, 0.5302),
];

/// Nominal peak demand of the 33-bus feeder: (bus, kW, kvar).
pub const IEEE33_LOADS: [(usize, f64, f64); 32] = [
    (2, 100.0, 60.0),
    (3, 90.0, 40.0),
    (4, 120.0, 80.0),
    (5, 60.0, 30.0),
    (6, 60.0, 20.0),
    (7, 200.0, 100.0),
    (8, 200.0, 100.0),
    (9, 60.0, 20.0),
    (10, 60.0, 20.0),
    (11, 45.0, 30.0),
    (12, 60.0, 35.0),
    (13, 60.0, 35.0),
    (14, 120.0, 80.0),
    (15, 60.0, 10.0),
    (16, 60.0, 20.0),
    (17, 60.0, 20.0),
    (18, 90.0, 40.0),
    (19, 90.0, 40.0),
    (20, 90.0, 40.0),
    (21, 90.0, 40.0),
    (22, 90.0, 40.0),
    (23, 90.0, 50.0),
    (24, 420.0, 200.0),
    (25, 420.0, 200.0),
    (26, 60.0, 25.0),
    (27, 60.0, 25.0),
    (28, 60.0, 20.0),
    (29, 120.0, 70.0),
    (30, 200.0, 600.0),
    (31, 150.0, 70.0),
    (32, 210.0, 100.0),
    (33, 60.0, 40.0),
];

pub const IEEE33_BASE_KV: f64 = 12.66;
pub const IEEE33_PV_BUSES: [usize; 2] = [14, 31];
pub const IEEE33_PV_CAP: f64 = 400.0;

/// Converts a series impedance in ohm into the squared-voltage drop per kW
/// at the feeder base voltage: `2 * Z * 1e3 / V_base^2`.
fn drop_coefficient(ohm: f64) -> f64 {
    2.0 * ohm * 1e3 / (IEEE33_BASE_KV * 1e3).powi(2)
}

/// Time-of-use purchase price, $/kW, for hour `h`.
fn tou_price(h: usize) -> f64 {
    match h {
        0..=6 => 2.0,
        7..=10 => 3.0,
        11..=16 => 3.5,
        17..=21 => 4.5,
        _ => 2.5,
    }
}

/// The bundled 33-bus test feeder with four DGs, four ESSs and two PV sites.
///
/// DG and ESS ratings follow the published tables for this study system.
/// Recourse ranges, recourse costs, flow limits and the siting of assets are
/// not published and are fixed here (documented in the repository README).
pub fn ieee33_case() -> NetworkCase {
    let steps = 24;
    let buses = (1..=33)
        .map(|id| {
            let angle = IEEE33_LOADS
                .iter()
                .find(|(b, _, _)| *b == id)
                .map(|(_, p, q)| (q / p).atan())
                .unwrap_or(DEFAULT_PF_ANGLE);
            Bus {
                id,
                has_pv: IEEE33_PV_BUSES.contains(&id),
                pf_angle: PfAngle::Constant(angle),
            }
        })
        .collect();
    let lines = IEEE33_BRANCHES
        .iter()
        .map(|&(from, to, r, x)| Line {
            from,
            to,
            r: drop_coefficient(r),
            x: drop_coefficient(x),
            p_max: if to <= 6 { 5000.0 } else { 2500.0 },
            phi: DEFAULT_LOSS_FACTOR,
        })
        .collect();
    // (bus, p_max, p_min, ramp, q_max, q_min, cost)
    let dg_table = [
        (25, 600.0, 100.0, 100.0, 500.0, -400.0, 4.0),
        (18, 400.0, 100.0, 90.0, 300.0, -200.0, 3.5),
        (33, 250.0, 80.0, 60.0, 200.0, -150.0, 2.5),
        (22, 50.0, 10.0, 15.0, 40.0, -25.0, 2.0),
    ];
    let dgs = dg_table
        .iter()
        .map(|&(bus, p_max, p_min, ramp, q_max, q_min, cost)| DgUnit {
            bus,
            p_max,
            p_min,
            ramp_up: ramp,
            ramp_down: ramp,
            recourse_p_max: 0.25 * p_max,
            recourse_p_min: 0.0,
            q_max,
            q_min,
            cost,
            recourse_cost: 6.0,
        })
        .collect();
    // (bus, power, e_max, e_min, efficiency)
    let ess_table = [
        (30, 120.0, 600.0, 120.0, 0.9),
        (14, 40.0, 200.0, 40.0, 0.9),
        (8, 60.0, 300.0, 60.0, 0.9),
        (29, 80.0, 400.0, 80.0, 0.9),
    ];
    let esss = ess_table
        .iter()
        .map(|&(bus, power, e_max, e_min, eta)| EssUnit {
            bus,
            charge_max: power,
            charge_min: 0.0,
            discharge_max: power,
            discharge_min: 0.0,
            energy_max: e_max,
            energy_min: e_min,
            efficiency: eta,
            initial_energy: 0.5 * (e_max + e_min),
        })
        .collect();
    let d: Vec<f64> = (0..steps).map(tou_price).collect();
    let d_hat = d.iter().map(|p| 1.25 * p).collect();
    NetworkCase {
        buses,
        lines,
        dgs,
        esss,
        time: TimeGrid {
            steps,
            dt_hours: 1.0,
        },
        prices: Prices { d, d_hat },
        voltage: VoltageLimits::default(),
        substation: 1,
        pv_cap: IEEE33_PV_CAP,
    }
}
