//! 1D stationary incompressible isothermal model of the closed hydraulic
//! loop.
//!
//! The loop is reduced to dimensionless head-loss coefficients: piping
//! sections 1, 2 and 3 in series with a parallel exchanger/valve branch,
//! pressurized by a tank and driven by a quadratic pump curve. The operating
//! point is the intersection of the pump curve (total head vs. flow) with
//! the network loss curve (pressure drop vs. flow); node pressures follow by
//! walking the loop from the tank reference.
//!
//! All operations are pure functions of their arguments and safe to call
//! concurrently.

use std::path::Path;

use thiserror::Error;

use crate::config::{format_full, ConfigError, KvFile};

/// Actuator setpoints, both in percent: pump speed and regulation valve
/// opening.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlVector {
    /// Pump speed, percent of rated speed, 0..=100.
    pub pump_speed: f64,
    /// Regulation valve opening, percent, 0..=100.
    pub valve_opening: f64,
}

impl ControlVector {
    pub fn new(pump_speed: f64, valve_opening: f64) -> Self {
        Self {
            pump_speed,
            valve_opening,
        }
    }

    pub fn is_valid(&self) -> bool {
        (0.0..=100.0).contains(&self.pump_speed) && (0.0..=100.0).contains(&self.valve_opening)
    }
}

/// Internal loop parameters. They cannot be measured directly; a drift in
/// any one of them away from nominal is a fault.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComponentVector {
    /// Head-loss coefficient of piping section 1 (dimensionless).
    pub loss1: f64,
    /// Head-loss coefficient of piping section 3 (dimensionless).
    pub loss3: f64,
    /// Head-loss coefficient of the heat exchanger (dimensionless).
    pub lossx: f64,
    /// Tank pressure, bar absolute.
    pub tank_pressure: f64,
    /// Pump rated head, m.
    pub rated_head: f64,
    /// Pump rated flow, m³/h.
    pub rated_flow: f64,
}

/// Number of component parameters the fault machinery can address.
pub const COMPONENT_COUNT: usize = 6;

impl ComponentVector {
    /// Design values of the six parameters.
    pub const NOMINAL: Self = Self {
        loss1: 4.5,
        loss3: 1.17,
        lossx: 10.35,
        tank_pressure: 3.0,
        rated_head: 229.0,
        rated_flow: 15.3,
    };

    /// Component by 1-based index, the ordering used everywhere a parameter
    /// is addressed by number.
    ///
    /// Panics if `index` is outside 1..=6.
    pub fn component(&self, index: usize) -> f64 {
        match index {
            1 => self.loss1,
            2 => self.loss3,
            3 => self.lossx,
            4 => self.tank_pressure,
            5 => self.rated_head,
            6 => self.rated_flow,
            _ => panic!("component index {index} outside 1..=6"),
        }
    }

    /// Copy with one component replaced. Panics if `index` is outside 1..=6.
    pub fn with_component(&self, index: usize, value: f64) -> Self {
        let mut out = *self;
        match index {
            1 => out.loss1 = value,
            2 => out.loss3 = value,
            3 => out.lossx = value,
            4 => out.tank_pressure = value,
            5 => out.rated_head = value,
            6 => out.rated_flow = value,
            _ => panic!("component index {index} outside 1..=6"),
        }
        out
    }

    pub fn all_positive(&self) -> bool {
        (1..=COMPONENT_COUNT).all(|i| self.component(i) > 0.0)
    }
}

/// The five observables: four node pressures and the loop flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcessVector {
    /// Pump outlet pressure, bar.
    pub p1: f64,
    /// Pump inlet pressure, bar.
    pub p2: f64,
    /// Exchanger inlet pressure, bar.
    pub p3: f64,
    /// Exchanger outlet pressure, bar.
    pub p4: f64,
    /// Loop flow, m³/h.
    pub flow: f64,
}

impl ProcessVector {
    /// Fixed observable order (p1, p2, p3, p4, fl) used by residual vectors,
    /// dataset columns and feature vectors.
    pub fn as_array(&self) -> [f64; 5] {
        [self.p1, self.p2, self.p3, self.p4, self.flow]
    }
}

/// Reconstruction constants of the loop model: fixed geometry, the valve
/// characteristic and the pump-curve shape factors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopConfig {
    /// Pipe inner diameter, m (one diameter for the whole loop).
    pub pipe_diameter: f64,
    /// Fixed head-loss coefficient of piping section 2 (not a fault target).
    pub k_section2: f64,
    /// Valve coefficient at full opening; K_valve = kv100 / (opening/100)².
    pub kv100: f64,
    /// Pump shutoff-head factor: H(0, s) = rated_head · pump_c0 · s².
    pub pump_c0: f64,
    /// Pump curve droop factor on (q / rated_flow)².
    pub pump_c2: f64,
    /// Fluid density, kg/m³.
    pub rho: f64,
    /// Gravitational acceleration, m/s².
    pub g: f64,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            pipe_diameter: 0.025,
            k_section2: 0.5,
            kv100: 2.0,
            pump_c0: 1.25,
            pump_c2: 0.25,
            rho: 1000.0,
            g: 9.81,
        }
    }
}

const LOOP_CONFIG_KEYS: &[&str] = &[
    "pipe_diameter",
    "k_section2",
    "kv100",
    "pump_c0",
    "pump_c2",
    "rho",
    "g",
];

impl LoopConfig {
    /// Duct cross-section area, m².
    pub fn flow_area(&self) -> f64 {
        std::f64::consts::PI * self.pipe_diameter * self.pipe_diameter / 4.0
    }

    /// Velocity head v²/(2g) in m for a flow in m³/h.
    pub fn velocity_head(&self, flow_m3h: f64) -> f64 {
        let v = (flow_m3h / 3600.0) / self.flow_area();
        v * v / (2.0 * self.g)
    }

    /// Conversion factor from meters of head to bar.
    pub fn bar_per_meter(&self) -> f64 {
        self.rho * self.g / 1e5
    }

    /// The rated point must lie on the pump curve: H(rated_flow, s=1) =
    /// rated_head, which requires pump_c0 − pump_c2 = 1 exactly.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let all = [
            ("pipe_diameter", self.pipe_diameter),
            ("k_section2", self.k_section2),
            ("kv100", self.kv100),
            ("pump_c0", self.pump_c0),
            ("pump_c2", self.pump_c2),
            ("rho", self.rho),
            ("g", self.g),
        ];
        for (name, v) in all {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ConfigError::Value {
                    line: 0,
                    key: name.to_string(),
                    message: format!("must be strictly positive, got {v}"),
                });
            }
        }
        if self.pump_c0 - self.pump_c2 != 1.0 {
            return Err(ConfigError::Value {
                line: 0,
                key: "pump_c0".to_string(),
                message: format!(
                    "pump_c0 - pump_c2 must equal 1 exactly (rated point on the curve), got {}",
                    self.pump_c0 - self.pump_c2
                ),
            });
        }
        Ok(())
    }

    pub fn from_kv(kv: &KvFile) -> Result<Self, ConfigError> {
        kv.check_known_keys(LOOP_CONFIG_KEYS)?;
        let d = Self::default();
        let cfg = Self {
            pipe_diameter: kv.get_f64("pipe_diameter")?.unwrap_or(d.pipe_diameter),
            k_section2: kv.get_f64("k_section2")?.unwrap_or(d.k_section2),
            kv100: kv.get_f64("kv100")?.unwrap_or(d.kv100),
            pump_c0: kv.get_f64("pump_c0")?.unwrap_or(d.pump_c0),
            pump_c2: kv.get_f64("pump_c2")?.unwrap_or(d.pump_c2),
            rho: kv.get_f64("rho")?.unwrap_or(d.rho),
            g: kv.get_f64("g")?.unwrap_or(d.g),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        Self::from_kv(&KvFile::load(path)?)
    }

    /// Dump in the config dialect; reloading reproduces the config exactly.
    pub fn to_kv_string(&self) -> String {
        let mut out = String::from("# closed-loop model constants\n");
        for (k, v) in [
            ("pipe_diameter", self.pipe_diameter),
            ("k_section2", self.k_section2),
            ("kv100", self.kv100),
            ("pump_c0", self.pump_c0),
            ("pump_c2", self.pump_c2),
            ("rho", self.rho),
            ("g", self.g),
        ] {
            out.push_str(&format!("{} = {}\n", k, format_full(v)));
        }
        out
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum SolveError {
    /// Bracketing/bisection budget exhausted — signals a malformed
    /// configuration (non-finite constants, empty bracket).
    #[error("operating-point solve did not converge within {0} iterations")]
    NoConvergence(usize),
}

/// Bisection budget for the operating-point solve.
pub const SOLVE_MAX_ITERATIONS: usize = 200;

/// Head residual below which the bisection stops, m. Far tighter than the
/// 1e-6 m contract so that the pressure-walk loop closure stays under
/// 1e-9 bar.
pub const SOLVE_HEAD_TOLERANCE: f64 = 1e-12;

/// Total head delivered by the pump at flow `q` (m³/h) and speed fraction
/// `s` in [0, 1]: H = rated_head · (c0·s² − c2·(q/rated_flow)²). May be
/// negative past the zero-head flow; the operating-point solve never lands
/// there.
pub fn pump_head(q: f64, s: f64, theta: &ComponentVector, cfg: &LoopConfig) -> f64 {
    let ratio = q / theta.rated_flow;
    theta.rated_head * (cfg.pump_c0 * s * s - cfg.pump_c2 * ratio * ratio)
}

/// Loss coefficient of the exchanger/valve parallel branch at a valve
/// opening in percent. A closed valve leaves the exchanger branch only.
pub fn parallel_branch_coefficient(valve_opening: f64, theta: &ComponentVector, cfg: &LoopConfig) -> f64 {
    if valve_opening <= 0.0 {
        return theta.lossx;
    }
    let opening = valve_opening / 100.0;
    let k_valve = cfg.kv100 / (opening * opening);
    let inv_sqrt = 1.0 / theta.lossx.sqrt() + 1.0 / k_valve.sqrt();
    1.0 / (inv_sqrt * inv_sqrt)
}

/// Network head loss at flow `q` (m³/h): ΔH = K_total · v²/(2g) with the
/// series sections plus the parallel exchanger/valve branch.
pub fn network_head_loss(q: f64, valve_opening: f64, theta: &ComponentVector, cfg: &LoopConfig) -> f64 {
    let k_total = theta.loss1
        + cfg.k_section2
        + theta.loss3
        + parallel_branch_coefficient(valve_opening, theta, cfg);
    k_total * cfg.velocity_head(q)
}

/// Flow at the intersection of the pump curve with the network curve, m³/h.
///
/// The residual H_pump(q) − H_loss(q) is strictly decreasing for s > 0, so
/// the root in [0, zero-head flow] is unique; bracketed bisection finds it
/// without derivatives. Returns 0 when the pump is off.
pub fn solve_operating_point(
    u: &ControlVector,
    theta: &ComponentVector,
    cfg: &LoopConfig,
) -> Result<f64, SolveError> {
    if u.pump_speed <= 0.0 {
        return Ok(0.0);
    }
    let s = u.pump_speed / 100.0;
    let residual = |q: f64| {
        pump_head(q, s, theta, cfg) - network_head_loss(q, u.valve_opening, theta, cfg)
    };

    // Pump head is zero at q_hi, where the network loss is strictly positive.
    let mut lo = 0.0f64;
    let mut hi = theta.rated_flow * s * (cfg.pump_c0 / cfg.pump_c2).sqrt();
    if !residual(lo).is_finite() || !(residual(lo) > 0.0) || !(residual(hi) < 0.0) {
        return Err(SolveError::NoConvergence(0));
    }

    for _ in 0..SOLVE_MAX_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        let r = residual(mid);
        if !r.is_finite() {
            return Err(SolveError::NoConvergence(SOLVE_MAX_ITERATIONS));
        }
        if r.abs() < SOLVE_HEAD_TOLERANCE {
            return Ok(mid);
        }
        if r > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi.max(1.0) {
            // Interval exhausted at f64 granularity; the residual here is
            // bounded by slope × ulp, well inside the 1e-6 m contract.
            return Ok(0.5 * (lo + hi));
        }
    }
    Err(SolveError::NoConvergence(SOLVE_MAX_ITERATIONS))
}

/// Full steady state: solve the flow, then walk node pressures from the
/// tank reference. Loop closure p4 − bar(k_section2·v²/2g) = tank_pressure
/// holds to the solver tolerance by construction.
pub fn simulate(
    u: &ControlVector,
    theta: &ComponentVector,
    cfg: &LoopConfig,
) -> Result<ProcessVector, SolveError> {
    let q = solve_operating_point(u, theta, cfg)?;
    let s = u.pump_speed / 100.0;
    let vh = cfg.velocity_head(q);
    let to_bar = cfg.bar_per_meter();
    let k_par = parallel_branch_coefficient(u.valve_opening, theta, cfg);

    let p2 = theta.tank_pressure - to_bar * (theta.loss3 * vh);
    let p1 = p2 + to_bar * pump_head(q, s, theta, cfg);
    let p3 = p1 - to_bar * (theta.loss1 * vh);
    let p4 = p3 - to_bar * (k_par * vh);
    Ok(ProcessVector {
        p1,
        p2,
        p3,
        p4,
        flow: q,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn nominal() -> ComponentVector {
        ComponentVector::NOMINAL
    }

    #[test]
    fn nominal_values_match_design_table() {
        let t = nominal();
        assert_eq!(
            [
                t.loss1,
                t.loss3,
                t.lossx,
                t.tank_pressure,
                t.rated_head,
                t.rated_flow
            ],
            [4.5, 1.17, 10.35, 3.0, 229.0, 15.3]
        );
    }

    #[test]
    fn pump_head_at_rated_point_is_rated_head() {
        // c0 - c2 = 1 puts the rated point on the curve by construction.
        let cfg = LoopConfig::default();
        let h = pump_head(15.3, 1.0, &nominal(), &cfg);
        assert_relative_eq!(h, 229.0, max_relative = 1e-15);
    }

    #[test]
    fn pump_head_vanishes_at_rest() {
        let cfg = LoopConfig::default();
        assert_eq!(pump_head(0.0, 0.0, &nominal(), &cfg), 0.0);
    }

    #[test]
    fn pump_head_half_speed_formula() {
        let cfg = LoopConfig::default(); // c0 = 1.25, c2 = 0.25
        let h = pump_head(15.3, 0.5, &nominal(), &cfg);
        assert_relative_eq!(h, 229.0 * (0.3125 - 0.25), max_relative = 1e-15);
        assert_relative_eq!(h, 14.3125, max_relative = 1e-15);
    }

    #[test]
    fn network_loss_is_zero_at_zero_flow() {
        let cfg = LoopConfig::default();
        assert_eq!(network_head_loss(0.0, 50.0, &nominal(), &cfg), 0.0);
    }

    #[test]
    fn closed_valve_leaves_exchanger_branch() {
        let cfg = LoopConfig::default();
        let theta = nominal();
        assert_eq!(parallel_branch_coefficient(0.0, &theta, &cfg), theta.lossx);
        // K_total = loss1 + k2 + loss3 + lossx in the closed-valve limit.
        let q = 10.0;
        let expected = (4.5 + 0.5 + 1.17 + 10.35) * cfg.velocity_head(q);
        assert_relative_eq!(
            network_head_loss(q, 0.0, &theta, &cfg),
            expected,
            max_relative = 1e-15
        );
    }

    #[test]
    fn parallel_combination_hand_check() {
        // (1/sqrt(10.35) + 1/sqrt(2))^-2 evaluated by hand.
        let cfg = LoopConfig::default();
        let k = parallel_branch_coefficient(100.0, &nominal(), &cfg);
        let hand = {
            let s = 1.0 / 10.35f64.sqrt() + 1.0 / 2.0f64.sqrt();
            1.0 / (s * s)
        };
        assert_relative_eq!(k, hand, max_relative = 1e-15);
        assert_relative_eq!(k, 0.965, max_relative = 1e-3);
    }

    #[test]
    fn pump_off_gives_zero_flow_and_tank_pressure_everywhere() {
        let cfg = LoopConfig::default();
        let y = simulate(&ControlVector::new(0.0, 50.0), &nominal(), &cfg).unwrap();
        assert_eq!(y.flow, 0.0);
        for p in [y.p1, y.p2, y.p3, y.p4] {
            assert_eq!(p, 3.0);
        }
    }

    #[test]
    fn tank_pressure_is_a_pure_reference_shift() {
        let cfg = LoopConfig::default();
        let theta = nominal().with_component(4, 3.5);
        let y = simulate(&ControlVector::new(0.0, 50.0), &theta, &cfg).unwrap();
        for p in [y.p1, y.p2, y.p3, y.p4] {
            assert_eq!(p, 3.5);
        }
    }

    #[test]
    fn solver_residual_is_tiny_at_solution() {
        let cfg = LoopConfig::default();
        let theta = nominal();
        let u = ControlVector::new(54.0, 100.0);
        let q = solve_operating_point(&u, &theta, &cfg).unwrap();
        let r = pump_head(q, 0.54, &theta, &cfg) - network_head_loss(q, 100.0, &theta, &cfg);
        assert!(r.abs() < 1e-6, "head residual {r}");
    }

    #[test]
    fn operating_point_matches_frozen_oracle_value() {
        // Frozen from the dense grid-scan + bisection oracle in
        // tests/common: q at u = (54, 100), nominal components, defaults.
        let cfg = LoopConfig::default();
        let q = solve_operating_point(
            &ControlVector::new(54.0, 100.0),
            &nominal(),
            &cfg,
        )
        .unwrap();
        assert!((q - 15.205550314018).abs() < 1e-4, "q = {q}");
    }

    #[test]
    fn pressure_walk_matches_frozen_oracle_values() {
        // Frozen from the oracle flow plus a hand pressure walk at
        // u = (54, 100), nominal components, defaults.
        let cfg = LoopConfig::default();
        let y = simulate(&ControlVector::new(54.0, 100.0), &nominal(), &cfg).unwrap();
        assert_relative_eq!(y.p1, 5.208229890352, max_relative = 1e-9);
        assert_relative_eq!(y.p2, 2.566872905279, max_relative = 1e-9);
        assert_relative_eq!(y.p3, 3.542356449118, max_relative = 1e-9);
        assert_relative_eq!(y.p4, 3.185097049026, max_relative = 1e-9);
    }

    #[test]
    fn flow_rises_with_pump_speed() {
        let cfg = LoopConfig::default();
        let theta = nominal();
        let q40 = solve_operating_point(&ControlVector::new(40.0, 50.0), &theta, &cfg).unwrap();
        let q80 = solve_operating_point(&ControlVector::new(80.0, 50.0), &theta, &cfg).unwrap();
        assert!(q80 > q40, "q(u1=80)={q80} should exceed q(u1=40)={q40}");
    }

    #[test]
    fn simulate_orders_pressures_and_closes_loop() {
        let cfg = LoopConfig::default();
        let theta = nominal();
        let y = simulate(&ControlVector::new(54.0, 100.0), &theta, &cfg).unwrap();
        assert!(y.flow > 0.0);
        assert!(y.p1 > y.p3 && y.p3 > y.p4, "losses are dissipative: {y:?}");
        assert!(y.p1 > y.p2);
        let closure =
            y.p4 - cfg.bar_per_meter() * cfg.k_section2 * cfg.velocity_head(y.flow) - 3.0;
        assert!(closure.abs() < 1e-9, "loop closure {closure} bar");
    }

    #[test]
    fn residual_sign_structure_over_flow_grid() {
        // Strictly decreasing residual: positive before the root, negative
        // after, no second crossing.
        let cfg = LoopConfig::default();
        let theta = nominal();
        let u = ControlVector::new(70.0, 60.0);
        let q_star = solve_operating_point(&u, &theta, &cfg).unwrap();
        let q_hi = theta.rated_flow * 0.7 * (cfg.pump_c0 / cfg.pump_c2).sqrt();
        let mut last = f64::INFINITY;
        for i in 0..=400 {
            let q = q_hi * i as f64 / 400.0;
            let r = pump_head(q, 0.7, &theta, &cfg) - network_head_loss(q, 60.0, &theta, &cfg);
            assert!(r < last, "residual must strictly decrease");
            if q < q_star {
                assert!(r > 0.0);
            }
            if q > q_star {
                assert!(r < 0.0);
            }
            last = r;
        }
    }

    #[test]
    fn config_round_trips_through_dialect() {
        let cfg = LoopConfig::default();
        let kv = KvFile::parse(&cfg.to_kv_string()).unwrap();
        let back = LoopConfig::from_kv(&kv).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn config_rejects_broken_pump_curve() {
        let cfg = LoopConfig {
            pump_c0: 1.3,
            ..LoopConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn malformed_config_reports_no_convergence() {
        let cfg = LoopConfig {
            pipe_diameter: f64::NAN,
            ..LoopConfig::default()
        };
        let err = solve_operating_point(&ControlVector::new(50.0, 50.0), &nominal(), &cfg);
        assert_eq!(err, Err(SolveError::NoConvergence(0)));
    }

    #[test]
    fn component_indexing_round_trip() {
        let t = nominal();
        for i in 1..=COMPONENT_COUNT {
            let changed = t.with_component(i, t.component(i) * 2.0);
            assert_eq!(changed.component(i), t.component(i) * 2.0);
            for j in (1..=COMPONENT_COUNT).filter(|&j| j != i) {
                assert_eq!(changed.component(j), t.component(j));
            }
        }
    }
}
