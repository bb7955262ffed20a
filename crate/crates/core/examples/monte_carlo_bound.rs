//! Rank-one-corrected count bound for a smooth well, by deterministic
//! quadrature and by seeded Monte Carlo sampling.

use leakyguide::bounds::{skn_bound_general, Strategy};
use leakyguide::{CouplingProfile, Geometry, ModeBasis};

fn main() -> leakyguide::Result<()> {
    let g = Geometry::new(1.0, 1.0)?;
    let basis = ModeBasis::solve(g, 0.0, 400)?;
    let p = CouplingProfile::sampled(0.0, 2.0, |x| -1.5 * (1.0 - (x / 2.0).powi(2)).max(0.0))?;
    let q = skn_bound_general(&p, &basis, Strategy::Quadrature)?;
    println!("quadrature   {:.8} +- {:.1e}", q.value, q.error);
    for seed in [1, 2, 3] {
        let mc = skn_bound_general(
            &p,
            &basis,
            Strategy::MonteCarlo {
                samples: 200_000,
                seed,
            },
        )?;
        println!(
            "monte carlo  {:.8} +- {:.1e}  (seed {seed})",
            mc.value, mc.error
        );
    }
    Ok(())
}
