//! Pairwise finite-size scaling on the nearest-neighbour transverse-field
//! chain: crossing, nu, z and the central charge.

use pwr2lab::fss::{central_charge_fit, find_crossing, lowest_gap, pairwise_scaling, phi_curve, FssOptions, ModelFamily};
use pwr2lab::quantum::{entropy_profile, ground_state, LanczosOptions, SiteOrdering};

fn main() -> pwr2lab::Result<()> {
    let family = ModelFamily::nearest_neighbour_chain();
    let opts = LanczosOptions::default();
    let grid: Vec<f64> = (0..=16).map(|k| 0.42 + 0.01 * k as f64).collect();

    let small = phi_curve(&family, 8, &grid, &opts)?;
    let large = phi_curve(&family, 16, &grid, &opts)?;
    for (b, (p8, p16)) in grid.iter().zip(small.phi.iter().zip(&large.phi)) {
        println!("B = {b:.2}  phi(8) = {p8:.5}  phi(16) = {p16:.5}");
    }

    let cross = find_crossing(&small, &large)?;
    println!("crossing B_x = {:.5} +- {:.1e}", cross.value, cross.sigma);

    let est = pairwise_scaling(&small, &large, None, &FssOptions::default())?;
    println!("nu = {:.4} +- {:.4}", est.nu.value, est.nu.sigma);

    let at = |n| family.hamiltonian_spec(n, cross.value);
    let (g8, g16) = (lowest_gap(&at(8)?, &opts)?, lowest_gap(&at(16)?, &opts)?);
    println!("gaps {g8:.6} {g16:.6}  z = {:.4}", -(g16 / g8).log2());

    let (_, psi) = ground_state(&at(16)?, &opts)?;
    let prof = entropy_profile(&psi, SiteOrdering::Euclidean)?;
    let c = central_charge_fit(&prof, 16, None)?;
    println!("c = {:.4} +- {:.4} on l in {:?}", c.c, c.delta_c, c.window);
    Ok(())
}
