//! Metropolis estimate of the classical gap checked against enumeration.

use pwr2lab::classical::{enumerate_spectrum, SpectrumOptions};
use pwr2lab::graph::build_pwr2_couplings;
use pwr2lab::mcmc::{estimate_low_spectrum, McmcPlan};

fn main() -> pwr2lab::Result<()> {
    let n = 16;
    let plan = McmcPlan { sweeps: 4000, burn_in: 400, ..McmcPlan::default_for(n) }.with_seed(11);
    println!("beta = {}, {} chains x {} sweeps", plan.beta, plan.chains, plan.sweeps);
    for s in [-5.0, -3.0, -1.0, 0.5, 2.0] {
        let g = build_pwr2_couplings(n, s, 1.0)?;
        let est = estimate_low_spectrum(&g, &plan)?;
        let exact = enumerate_spectrum(&g, SpectrumOptions { max_levels: Some(2), ..Default::default() })?;
        println!(
            "s = {s:>4}: e0 = {:>10.6} (exact {:>10.6})  gap = {:.6} (exact {:.6})  hits = {:>2}  converged = {}",
            est.e0,
            exact.ground_energy(),
            est.gap,
            exact.gap().unwrap_or(f64::NAN),
            est.e0_hits,
            est.converged
        );
    }
    Ok(())
}
