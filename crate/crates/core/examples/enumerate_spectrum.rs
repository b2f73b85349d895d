//! Exhaustive Gray-code enumeration and comparison with the closed form.

use std::time::Instant;

use pwr2lab::classical::{analytic_gap, enumerate_spectrum, SpectrumOptions};
use pwr2lab::graph::build_pwr2_couplings;

fn main() -> pwr2lab::Result<()> {
    let n = 16;
    for s in [-4.0, -1.0, 0.0, 0.5, 2.0] {
        let g = build_pwr2_couplings(n, s, 1.0)?;
        let t = Instant::now();
        let spec = enumerate_spectrum(&g, SpectrumOptions::default())?;
        let exact = spec.gap().unwrap_or(f64::NAN);
        let closed = analytic_gap(n, s, 1.0)?;
        println!(
            "s = {s:>5}: E0 = {:>10.6}  deg = {:>3}  gap = {:.9}  closed form = {:.9} ({})  [{:?}]",
            spec.ground_energy(),
            spec.ground_degeneracy(),
            exact,
            closed.gap,
            closed.phase.as_str(),
            t.elapsed()
        );
        println!("         ground representative {:?}", spec.representative(0));
    }

    // only the two lowest levels are kept for larger rings
    let g = build_pwr2_couplings(16, -3.0, 1.0)?;
    let low = enumerate_spectrum(&g, SpectrumOptions { max_levels: Some(2), ..Default::default() })?;
    println!("truncated: {} levels, gap {:?}", low.levels.len(), low.gap());
    Ok(())
}
