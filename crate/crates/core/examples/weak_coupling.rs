//! Weak-coupling expansion of the ground state against the solver, plus the
//! existence criterion for several perturbation shapes.

use leakyguide::asymptotics::{existence_criterion, loglog_slope, weak_coupling_expansion};
use leakyguide::spectrum::{basis_for, extrapolated_ground_state, SolverOptions};
use leakyguide::{CouplingProfile, Geometry};

fn main() -> leakyguide::Result<()> {
    let g = Geometry::new(1.0, 1.0)?;
    let base = CouplingProfile::rect_well(0.0, 1.0, -1.0)?;
    let opts = SolverOptions {
        n_cells: 200,
        ..Default::default()
    };
    let basis = basis_for(&base, g, &opts)?;
    let c = weak_coupling_expansion(&base, &basis)?;
    println!("c1 = {:.10}  c2 = {:.10}", c.c1_lambda, c.c2_lambda);
    let mut remainders = Vec::new();
    for lambda in [0.08, 0.04, 0.02, 0.01] {
        let p = base.clone().with_lambda(lambda);
        let k = extrapolated_ground_state(&p, &basis, &opts)?
            .expect("bound state")
            .point
            .kappa1;
        let r = (k - c.predict_lambda(lambda)).abs();
        println!(
            "lambda {lambda:<5} kappa1 {k:.12}  expansion {:.12}  remainder {r:.2e}",
            c.predict_lambda(lambda)
        );
        remainders.push((lambda, r));
    }
    println!("remainder slope {:.3}", loglog_slope(&remainders).unwrap());

    let shapes = [
        ("well", CouplingProfile::rect_well(0.0, 1.0, -1.0)?),
        ("bump", CouplingProfile::rect_well(0.0, 1.0, 1.0)?),
        (
            "dipole",
            CouplingProfile::piecewise(0.0, vec![-1.0, 0.0, 1.0], vec![1.0, -1.0])?,
        ),
    ];
    for (name, p) in shapes {
        let e = existence_criterion(&p);
        println!(
            "{name:<7} integral {:+.3}  weakly bound: {}  borderline: {}",
            e.integral, e.exists, e.borderline
        );
    }
    Ok(())
}
