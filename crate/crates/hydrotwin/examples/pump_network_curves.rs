//! Print the pump curve and the network loss curve over a flow sweep and
//! locate their intersection — the operating point the solver returns.
//!
//! ```bash
//! cargo run --release -p hydrotwin --example pump_network_curves
//! ```

use hydrotwin::hydronet::{
    network_head_loss, pump_head, solve_operating_point, ComponentVector, ControlVector,
    LoopConfig,
};

fn main() {
    let cfg = LoopConfig::default();
    let theta = ComponentVector::NOMINAL;
    let u = ControlVector::new(54.0, 100.0);
    let s = u.pump_speed / 100.0;

    let q_star = solve_operating_point(&u, &theta, &cfg).unwrap();
    println!(
        "Pump at {:.0}% speed, valve at {:.0}%: operating point {q_star:.4} m3/h",
        u.pump_speed, u.valve_opening
    );
    println!();
    println!("{:>8} {:>12} {:>12} {:>12}", "q m3/h", "pump m", "network m", "residual m");
    let q_max = theta.rated_flow * s * (cfg.pump_c0 / cfg.pump_c2).sqrt();
    let n = 20;
    for i in 0..=n {
        let q = q_max * i as f64 / n as f64;
        let hp = pump_head(q, s, &theta, &cfg);
        let hl = network_head_loss(q, u.valve_opening, &theta, &cfg);
        let marker = if (q - q_star).abs() < q_max / (2.0 * n as f64) {
            "  <- crossing"
        } else {
            ""
        };
        println!("{q:>8.3} {hp:>12.4} {hl:>12.4} {:>12.4}{marker}", hp - hl);
    }

    println!();
    println!("Flow rises with pump speed at a fixed valve opening:");
    for u1 in [20.0, 40.0, 60.0, 80.0, 100.0] {
        let q = solve_operating_point(&ControlVector::new(u1, 50.0), &theta, &cfg).unwrap();
        println!("  u1 = {u1:>5.0}% -> q = {q:>8.4} m3/h");
    }
    println!("and with valve opening at a fixed speed:");
    for u2 in [0.0, 25.0, 50.0, 75.0, 100.0] {
        let q = solve_operating_point(&ControlVector::new(54.0, u2), &theta, &cfg).unwrap();
        println!("  u2 = {u2:>5.0}% -> q = {q:>8.4} m3/h");
    }
}
