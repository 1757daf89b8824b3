//! Solve one steady state of the loop and walk through what the simulator
//! returns: the operating-point flow plus the four node pressures.
//!
//! ```bash
//! cargo run --release -p hydrotwin --example simulate_point
//! ```

use hydrotwin::hydronet::{simulate, solve_operating_point, ComponentVector, ControlVector, LoopConfig};

fn main() {
    let cfg = LoopConfig::default();
    let nominal = ComponentVector::NOMINAL;

    println!("Loop constants:");
    print!("{}", cfg.to_kv_string());
    println!();

    let u = ControlVector::new(54.0, 100.0);
    println!(
        "Setpoints: pump speed {:.0}%, valve opening {:.0}%",
        u.pump_speed, u.valve_opening
    );

    let flow = solve_operating_point(&u, &nominal, &cfg).unwrap();
    println!("Operating-point flow: {flow:.6} m3/h");

    let y = simulate(&u, &nominal, &cfg).unwrap();
    println!("Process vector:");
    println!("  p1 (pump outlet)      = {:.6} bar", y.p1);
    println!("  p2 (pump inlet)       = {:.6} bar", y.p2);
    println!("  p3 (exchanger inlet)  = {:.6} bar", y.p3);
    println!("  p4 (exchanger outlet) = {:.6} bar", y.p4);
    println!("  fl (loop flow)        = {:.6} m3/h", y.flow);

    // Closing the loop back to the tank recovers the reference pressure.
    let closure = y.p4 - cfg.bar_per_meter() * cfg.k_section2 * cfg.velocity_head(y.flow);
    println!(
        "Loop closure: p4 - section-2 drop = {closure:.12} bar (tank at {} bar)",
        nominal.tank_pressure
    );

    // A drifted component changes the picture; here the exchanger fouls by
    // 40%.
    let fouled = nominal.with_component(3, nominal.lossx * 1.4);
    let y_fouled = simulate(&u, &fouled, &cfg).unwrap();
    println!();
    println!("Same setpoints with the exchanger loss +40%:");
    println!(
        "  flow {:.4} -> {:.4} m3/h, p4 {:.4} -> {:.4} bar",
        y.flow, y_fouled.flow, y.p4, y_fouled.p4
    );
}
