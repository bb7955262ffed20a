//! Transverse eigenvalues and barrier weights for a few couplings, checked
//! against a finite-difference solve of the same cross-section.

use leakyguide::oracle::transverse_fd_extrapolated;
use leakyguide::{Geometry, ModeBasis};

fn main() -> leakyguide::Result<()> {
    let g = Geometry::new(1.0, 2.0)?;
    for alpha0 in [-2.0, 0.0, 3.0, 50.0] {
        let basis = ModeBasis::solve(g, alpha0, 5)?;
        let fd = transverse_fd_extrapolated(&g, alpha0, 0.01, 5)?;
        println!("alpha0 = {alpha0}");
        println!(
            "{:>3} {:>22} {:>22} {:>12}",
            "n", "nu_n", "nu_n (fd)", "chi_n(0)^2"
        );
        for (m, (v, _)) in basis.modes.iter().zip(&fd) {
            println!(
                "{:>3} {:>22.15e} {:>22.15e} {:>12.6}",
                m.n, m.nu, v, m.chi0_sq
            );
        }
    }
    Ok(())
}
