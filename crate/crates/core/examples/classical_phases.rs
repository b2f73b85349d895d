//! Closed-form phase diagram of the classical PWR2 chain.
//!
//! ```text
//! cargo run --example classical_phases -- 64
//! ```

use pwr2lab::classical::{analytic_gap, phase_boundaries};

fn main() -> pwr2lab::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(32);
    let b = phase_boundaries(n)?;
    println!("n = {n}");
    println!("  s1 = {:?}  s2 = {:?}  s3 = {:.6}  s4 = {:?}", b.s1, b.s2, b.s3, b.s4);

    println!("{:>6}  {:<14} {:>12} {:>14}  ground", "s", "phase", "gap", "E0");
    for k in -12..=12 {
        let s = 0.5 * k as f64;
        let p = analytic_gap(n, s, 1.0)?;
        println!(
            "{s:>6.2}  {:<14} {:>12.6e} {:>14.6}  {:?}",
            p.phase.as_str(),
            p.gap,
            p.ground_energy,
            p.ground_family
        );
    }

    // s1 creeps toward -2 as the chain grows
    for m in [16, 64, 256, 1024] {
        println!("n = {m:>5}: s1 = {:.5}", phase_boundaries(m)?.s1.unwrap_or(f64::NAN));
    }
    Ok(())
}
