//! Effective PWR2 exponent of the tambourine geometry and the residual of
//! the mapping.

use pwr2lab::rydgeo::s_of_h;

fn main() -> pwr2lab::Result<()> {
    let n = 256;
    println!("{:>5} {:>9} {:>9} {:>9} {:>9} {:>9}", "h", "s2", "s4", "s8", "s_eff", "resid");
    for k in 0..=12 {
        let h = 0.25 * k as f64;
        let m = s_of_h(n, h)?;
        println!(
            "{h:>5.2} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
            m.s_at(2).unwrap(),
            m.s_at(4).unwrap(),
            m.s_at(8).unwrap(),
            m.s_eff,
            m.residual()
        );
    }

    // the height where the average exponent reaches -2
    let (mut lo, mut hi) = (0.0, 3.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if s_of_h(n, mid)?.s_eff < -2.0 { lo = mid } else { hi = mid }
    }
    println!("s_eff = -2 at h = {:.5}", 0.5 * (lo + hi));
    Ok(())
}
