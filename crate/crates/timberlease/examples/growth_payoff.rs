//! Biological growth curve and instant harvesting revenue across stand ages.
//!
//! Run with: `cargo run --release --example growth_payoff`

use timberlease::{payoff, EconomicParams, GrowthCurve, StateVec};

fn main() {
    let growth = GrowthCurve::default();
    let econ = EconomicParams::reference();
    let price = 600.0;

    println!("stand age vs merchantable volume and harvesting payoff at P = ${}/1000 bf", price);
    println!("{:>6} {:>14} {:>16}", "age", "volume m3/ha", "payoff $/ha");
    for age in [0.0, 25.0, 49.0, 50.0, 55.0, 64.0, 70.0, 85.0, 103.0, 120.0, 150.0] {
        let v = growth.volume(age);
        let s = payoff(age, &StateVec::new(0.0, price), &econ, &growth);
        println!("{:>6.0} {:>14.3} {:>16.2}", age, v, s);
    }
    println!();
    println!(
        "the curve is zero before age {}, rises to {:.1} m3/ha, and is constant after age {}",
        growth.lower_knot,
        growth.volume(growth.upper_knot),
        growth.upper_knot
    );
    println!(
        "before age {} harvesting pays -K = {:.2}: the option to wait is never exercised there",
        econ.grace_age, -econ.harvest_cost
    );
}
