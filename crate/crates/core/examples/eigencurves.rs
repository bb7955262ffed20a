//! Eigencurves of the Birman-Schwinger operator: each crossing of -1 is a
//! bound state. Prints whitespace columns suitable for plotting.

use leakyguide::spectrum::{basis_for, bs_eigencurves, SolverOptions};
use leakyguide::{CouplingProfile, Geometry};

fn main() -> leakyguide::Result<()> {
    let g = Geometry::new(1.0, 1.0)?;
    let p = CouplingProfile::rect_well(0.0, 2.0, -2.0)?;
    let opts = SolverOptions {
        n_cells: 120,
        ..Default::default()
    };
    let basis = basis_for(&p, g, &opts)?;
    let kappas: Vec<f64> = (1..=40).map(|i| 0.05 * i as f64).collect();
    let curves = bs_eigencurves(&p, &basis, &kappas, 3, &opts)?;
    println!("# kappa1 mu_1 mu_2 mu_3");
    for (k, mu) in kappas.iter().zip(&curves) {
        let cols: Vec<String> = mu.iter().map(|m| format!("{m:.8e}")).collect();
        println!("{k:.3} {}", cols.join(" "));
    }
    Ok(())
}
