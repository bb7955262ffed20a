//! Discrete spectrum of a rectangular well, with Richardson-extrapolated
//! energies and Schatten norms of the Birman-Schwinger operator.

use leakyguide::spectrum::{
    basis_for, extrapolated_bound_states, find_bound_states, SolverOptions,
};
use leakyguide::{CouplingProfile, Geometry};

fn main() -> leakyguide::Result<()> {
    let g = Geometry::new(1.0, 1.0)?;
    let p = CouplingProfile::rect_well(0.0, 2.0, -2.0)?;
    let opts = SolverOptions {
        n_cells: 200,
        ..Default::default()
    };
    let basis = basis_for(&p, g, &opts)?;
    let report = find_bound_states(&p, &basis, &opts)?;
    println!("threshold nu_1 = {:.12}", basis.nu1());
    println!("{} bound state(s)", report.count());
    for (state, err) in extrapolated_bound_states(&p, &basis, &opts)? {
        println!(
            "E = {:.12}  kappa1 = {:.10}  multiplicity {}  error {:.1e}",
            state.point.energy, state.point.kappa1, state.multiplicity, err
        );
    }
    for (q, v) in &report.schatten_p_norms {
        println!("||K||_{q}^{q} at the ground state: {v:.6}");
    }
    Ok(())
}
