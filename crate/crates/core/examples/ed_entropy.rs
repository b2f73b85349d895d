//! Sparse exact diagonalization: gap, entanglement in Euclidean and Monna
//! orderings, and the structure factor.

use std::time::Instant;

use pwr2lab::fss::lowest_gap;
use pwr2lab::graph::build_pwr2_couplings;
use pwr2lab::quantum::{
    connected_structure_factor, correlations, entanglement_entropy, ground_state, momentum_grid,
    second_moment_xi, HamiltonianSpec, LanczosOptions, SiteOrdering,
};

fn main() -> pwr2lab::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(16);
    let opts = LanczosOptions::default();
    println!("n = {n}, B = 0.1");
    println!("{:>5} {:>12} {:>10} {:>10} {:>10}", "s", "E0", "gap", "S_euc", "S_monna");
    for s in [-5.0, -2.0, 0.0, 1.0, 5.0] {
        let t = Instant::now();
        let spec = HamiltonianSpec::new(build_pwr2_couplings(n, s, 1.0)?, 0.1);
        let (e0, psi) = ground_state(&spec, &opts)?;
        let gap = lowest_gap(&spec, &opts)?;
        let se = entanglement_entropy(&psi, n / 2, SiteOrdering::Euclidean)?;
        let sm = entanglement_entropy(&psi, n / 2, SiteOrdering::Monna)?;
        println!("{s:>5} {e0:>12.6} {gap:>10.6} {se:>10.5} {sm:>10.5}   [{:?}]", t.elapsed());
    }

    let spec = HamiltonianSpec::new(build_pwr2_couplings(n, -3.0, 1.0)?, 0.3);
    let (_, psi) = ground_state(&spec, &opts)?;
    let corr = correlations(&psi)?;
    println!("\nS(q) at s = -3, B = 0.3");
    for q in momentum_grid(n) {
        println!("  q = {q:.4}  S = {:.6}", connected_structure_factor(&corr, q)?);
    }
    println!("xi(pi) = {:?}", second_moment_xi(&corr, std::f64::consts::PI)?);
    Ok(())
}
