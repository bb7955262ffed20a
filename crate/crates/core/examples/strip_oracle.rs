//! Birman-Schwinger energies against a finite-difference solve of the
//! truncated strip with Richardson extrapolation over three grids.

use leakyguide::oracle::{strip_fd, FdConfig};
use leakyguide::spectrum::{basis_for, extrapolated_bound_states, SolverOptions};
use leakyguide::{CouplingProfile, Geometry};

fn main() -> leakyguide::Result<()> {
    let g = Geometry::new(1.0, 1.0)?;
    let p = CouplingProfile::rect_well(0.0, 1.0, -1.0)?;
    let opts = SolverOptions {
        n_cells: 200,
        ..Default::default()
    };
    let basis = basis_for(&p, g, &opts)?;
    let states = extrapolated_bound_states(&p, &basis, &opts)?;
    let kappa = states.first().map_or(0.5, |s| s.0.point.kappa1);
    let fd = strip_fd(&p, &g, &FdConfig::for_profile(&p, 0.1, kappa), states.len())?;
    println!(
        "threshold {:.10}  counts: BS {} FD {}",
        fd.threshold,
        states.len(),
        fd.count
    );
    for ((s, err), (e, fe)) in states.iter().zip(fd.eigenvalues.iter().zip(&fd.errors)) {
        println!(
            "E_bs {:.10} (+-{err:.1e})  E_fd {e:.10} (+-{fe:.1e})",
            s.point.energy
        );
    }
    for level in &fd.levels {
        println!(
            "hx {:.4} hy {:.4}: {:?}",
            level.hx, level.hy, level.eigenvalues
        );
    }
    Ok(())
}
