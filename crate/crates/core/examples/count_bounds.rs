//! Bound-state counts of rectangular wells against the bracketing,
//! rank-one-corrected and trace-ideal upper bounds.

use leakyguide::bounds::rect_well_bounds;
use leakyguide::spectrum::{basis_for, find_bound_states, SolverOptions};
use leakyguide::{CouplingProfile, Geometry, ModeBasis};

fn main() -> leakyguide::Result<()> {
    let g = Geometry::new(1.0, 1.0)?;
    let opts = SolverOptions {
        n_cells: 200,
        ..Default::default()
    };
    let skn_basis = ModeBasis::solve(g, 0.0, 2000)?;
    println!(
        "{:>5} {:>3} {:>9} {:>12} {:>12} {:>12} {:>12}",
        "a", "N", "brackets", "skn", "skn closed", "||K||_1", "||K||_2^2"
    );
    for a in [0.25, 0.5, 1.0, 2.0, 4.0] {
        let p = CouplingProfile::rect_well(0.0, a, -2.0)?;
        let basis = basis_for(&p, g, &opts)?;
        let n = find_bound_states(&p, &basis, &opts)?.count();
        let b = rect_well_bounds(a, -2.0, &skn_basis, &opts)?;
        let s1 = b
            .schatten
            .iter()
            .find(|x| x.0 == 1)
            .map_or(f64::NAN, |x| x.1);
        let s2 = b
            .schatten
            .iter()
            .find(|x| x.0 == 2)
            .map_or(f64::NAN, |x| x.1);
        println!(
            "{a:>5} {n:>3} {:>9} {:>12.5} {:>12.5} {s1:>12.4} {s2:>12.4}",
            format!("[{},{}]", b.bracketing_lower, b.bracketing_upper),
            b.skn_general.unwrap().value,
            b.skn_rectwell.unwrap(),
        );
    }
    Ok(())
}
