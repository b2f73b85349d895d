//! Mean local intrinsic dimensionality across the exponent `s`.

use pwr2lab::graph::build_pwr2_couplings;
use pwr2lab::lid::{mean_lid, mean_lid_with, LidOptions};

fn main() -> pwr2lab::Result<()> {
    let sizes = [256, 512, 1024];
    print!("{:>6}", "s");
    for n in sizes {
        print!("  {:>10}", format!("n={n}"));
    }
    println!();
    for k in -8..=8 {
        let s = 0.5 * k as f64;
        print!("{s:>6.2}");
        for n in sizes {
            let r = mean_lid(&build_pwr2_couplings(n, s, 1.0)?)?;
            print!("  {:>10.4}", r.mean);
        }
        println!();
    }

    // square-root edge lengths move the departure from the ring metric
    let mut opts = LidOptions::default();
    opts.metric.exponent = 0.5;
    for s in [-4.0, -2.0, -1.0] {
        let r = mean_lid_with(&build_pwr2_couplings(256, s, 1.0)?, &opts)?;
        println!("exponent 1/2, n=256, s={s}: {:.4} (k={})", r.mean, r.k);
    }
    Ok(())
}
