//! Decomposition of the Birman-Schwinger kernel into rank-one and regular
//! parts, and the Hilbert-Schmidt scaling of the regular parts.

use leakyguide::asymptotics::loglog_slope;
use leakyguide::spectrum::{basis_for, SolverOptions};
use leakyguide::{assemble, CouplingProfile, Geometry, Grid, OperatorKind};

fn main() -> leakyguide::Result<()> {
    let g = Geometry::new(1.0, 1.0)?;
    let opts = SolverOptions {
        n_cells: 200,
        ..Default::default()
    };
    let kappa = 0.5;
    let mut m_pts = Vec::new();
    let mut n_pts = Vec::new();
    println!(
        "{:>6} {:>12} {:>12} {:>14}",
        "sigma", "||M||_2^2", "||N||_2^2", "|K-(L+M+N)|"
    );
    for sigma in [0.4, 0.2, 0.1, 0.05] {
        let p = CouplingProfile::rect_well(0.0, 1.0, -1.0)?.with_sigma(sigma);
        let basis = basis_for(&p, g, &opts)?;
        let grid = Grid::for_profile(&p, opts.n_cells)?;
        let op = |k| assemble(k, kappa, &basis, &grid);
        let (k, l, m, n) = (
            op(OperatorKind::FullK)?,
            op(OperatorKind::L)?,
            op(OperatorKind::M)?,
            op(OperatorKind::N)?,
        );
        let resid = (&k.matrix - (&l.matrix + &m.matrix + &n.matrix)).amax();
        let (hm, hn) = (m.hs_norm().powi(2), n.hs_norm().powi(2));
        println!("{sigma:>6} {hm:>12.4e} {hn:>12.4e} {resid:>14.2e}");
        m_pts.push((sigma, hm));
        n_pts.push((sigma, hn));
    }
    println!(
        "slopes: M {:.3}  N {:.3}",
        loglog_slope(&m_pts).unwrap(),
        loglog_slope(&n_pts).unwrap()
    );
    Ok(())
}
