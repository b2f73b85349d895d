//! Dual-species tambourine layout and its Rydberg couplings.

use pwr2lab::graph::ring_distance;
use pwr2lab::rydgeo::{rydberg_couplings, species_pattern, tambourine_positions};

fn main() -> pwr2lab::Result<()> {
    let (n, h) = (16, 1.2);
    let pos = tambourine_positions(n, h)?;
    let species = species_pattern(n)?;
    println!("i,x,y,z,species");
    for (i, p) in pos.iter().enumerate() {
        println!("{i},{:.6},{:.6},{:.6},{}", p[0], p[1], p[2], species.pattern[i].as_str());
    }

    let single = rydberg_couplings(&pos, None)?;
    let dual = rydberg_couplings(&pos, Some(&species))?;
    println!("\nbond  V_single   V_dual(0,d)");
    for d in [1, 2, 3, 4, 8] {
        println!("{d:>4}  {:.6e}  {:.6e}", single.coupling(0, d), dual.coupling(0, d));
    }
    println!("ring distance of (0, {}) = {}", n - 1, ring_distance(n, 0, n - 1));
    Ok(())
}
