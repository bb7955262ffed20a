//! Expansion in the width scale sigma of a shallow well, the implicit
//! ground-state equation, and the trend toward the Dirichlet limit.

use leakyguide::asymptotics::{dirichlet_probe, loglog_slope, scaled_expansion};
use leakyguide::spectrum::{
    basis_for, extrapolated_ground_state, solve_implicit_ground_state, ImplicitMode, SolverOptions,
};
use leakyguide::{CouplingProfile, Geometry};

fn main() -> leakyguide::Result<()> {
    let g = Geometry::new(1.0, 1.0)?;
    let opts = SolverOptions {
        n_cells: 200,
        ..Default::default()
    };
    let mut remainders = Vec::new();
    for sigma in [0.2, 0.1, 0.05] {
        let p = CouplingProfile::rect_well(0.0, 1.0, -0.25)?.with_sigma(sigma);
        let basis = basis_for(&p, g, &opts)?;
        let k = extrapolated_ground_state(&p, &basis, &opts)?
            .expect("bound state")
            .point
            .kappa1;
        let c = scaled_expansion(&p, &basis, sigma)?;
        let pred = c.predict_sigma().unwrap();
        let implicit = solve_implicit_ground_state(&p, &basis, ImplicitMode::ScaledSigma, &opts)?
            .map(|s| s.kappa1)
            .unwrap_or(f64::NAN);
        println!("sigma {sigma:<5} kappa1 {k:.12}  implicit {implicit:.12}  expansion {pred:.12}");
        remainders.push((sigma, (k - pred).abs()));
    }
    println!("remainder slope {:.3}", loglog_slope(&remainders).unwrap());

    let p = CouplingProfile::rect_well(0.0, 1.0, -1.0)?;
    println!("# alpha0 nu1 chi1^2 first second");
    for row in dirichlet_probe(g, &p, &[0.0, 5.0, 50.0, 500.0], 0.1, 400)? {
        println!(
            "{} {:.8} {:.6e} {:.6e} {:.6e}",
            row.alpha0, row.nu1, row.chi1_sq, row.first, row.second
        );
    }
    Ok(())
}
