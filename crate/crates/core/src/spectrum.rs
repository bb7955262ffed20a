//! Bound states below the threshold through the Birman–Schwinger principle:
//! `k^2 < nu_1` is an eigenvalue iff `-1` is an eigenvalue of `K(k)`, with
//! equal multiplicities.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::grid::Grid;
use crate::kernel::{assemble, avg_exp_abs, kappa1_of, OperatorKind};
use crate::profile::CouplingProfile;
use crate::transverse::ModeBasis;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPoint {
    pub energy: f64,
    pub kappa1: f64,
    pub k_sq: f64,
}

impl SpectralPoint {
    pub fn from_kappa1(kappa1: f64, nu1: f64) -> Self {
        let energy = nu1 - kappa1 * kappa1;
        Self {
            energy,
            kappa1,
            k_sq: energy,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundState {
    pub point: SpectralPoint,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, Default)]
pub struct SpectralReport {
    /// Bound states sorted by energy.
    pub eigenvalues: Vec<BoundState>,
    pub ground_state: Option<SpectralPoint>,
    /// `(kappa1, lowest eigenvalue of K)` on the search grid.
    pub bs_eigencurve: Vec<(f64, f64)>,
    /// `(p, ||K||_p^p)` at the ground state, for `p = 1, 2`.
    pub schatten_p_norms: Vec<(u32, f64)>,
}

impl SpectralReport {
    /// Number of bound states counted with multiplicity.
    pub fn count(&self) -> usize {
        self.eigenvalues.iter().map(|b| b.multiplicity).sum()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Approximate number of cells on the support.
    pub n_cells: usize,
    /// Bisection tolerance in `kappa1`.
    pub tol: f64,
    /// Number of geometric samples of the eigencurves.
    pub samples: usize,
    /// Smallest sampled `kappa1`.
    pub kappa_floor: f64,
    /// Eigenvalues within this distance of `-1` add to the multiplicity.
    pub multiplicity_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            n_cells: 400,
            tol: 1e-10,
            samples: 48,
            kappa_floor: 1e-6,
            multiplicity_tol: 1e-6,
        }
    }
}

/// Mode basis with enough modes for the grid the solver will build.
pub fn basis_for(
    profile: &CouplingProfile,
    geometry: crate::transverse::Geometry,
    opts: &SolverOptions,
) -> Result<ModeBasis> {
    let grid = Grid::for_profile(profile, opts.n_cells)?;
    let n = if grid.is_empty() {
        64
    } else {
        ModeBasis::required_modes(&geometry, grid.min_width())
    };
    ModeBasis::solve(geometry, profile.alpha0, n)
}

fn check_basis(profile: &CouplingProfile, basis: &ModeBasis) -> Result<()> {
    if (profile.alpha0 - basis.alpha0).abs() > 1e-14 * basis.alpha0.abs().max(1.0) {
        return domain("mode basis and profile disagree on alpha0");
    }
    Ok(())
}

/// Largest `kappa1` a bound state can have: the spectrum lies above
/// `nu_1(alpha0 + min delta)`.
pub fn kappa_max(profile: &CouplingProfile, basis: &ModeBasis) -> Result<f64> {
    let (lo, _) = profile.range();
    if lo >= 0.0 {
        return Ok(0.0);
    }
    let deep = ModeBasis::solve(basis.geometry, basis.alpha0 + lo, 2)?;
    Ok((basis.nu1() - deep.nu1()).max(0.0).sqrt())
}

fn eigenvalues_at(kappa1: f64, basis: &ModeBasis, grid: &Grid) -> Result<Vec<f64>> {
    Ok(assemble(OperatorKind::FullK, kappa1, basis, grid)?.eigenvalues())
}

fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let r = (hi / lo).ln() / (n - 1) as f64;
    (0..n).map(|i| lo * (r * i as f64).exp()).collect()
}

/// `n_curves` lowest eigenvalues of `K` at each `kappa1` in the grid.
pub fn bs_eigencurves(
    profile: &CouplingProfile,
    basis: &ModeBasis,
    kappa1_grid: &[f64],
    n_curves: usize,
    opts: &SolverOptions,
) -> Result<Vec<Vec<f64>>> {
    check_basis(profile, basis)?;
    if kappa1_grid.iter().any(|&k| !(k > 0.0)) {
        return domain("eigencurves are sampled at kappa1 > 0 only");
    }
    let grid = Grid::for_profile(profile, opts.n_cells)?;
    kappa1_grid
        .par_iter()
        .map(|&k| {
            if grid.is_empty() {
                return Ok(vec![0.0; n_curves]);
            }
            let mut ev = eigenvalues_at(k, basis, &grid)?;
            ev.resize(n_curves, 0.0);
            Ok(ev)
        })
        .collect()
}

/// Root of a continuous `f` bracketed by `[a, b]` (Illinois variant of
/// regula falsi, with a bisection fallback).
pub(crate) fn solve_bracketed<F>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut fa, mut fb) = (f(a)?, f(b)?);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Bracketing(format!("no sign change on [{a}, {b}]")));
    }
    let mut side = 0;
    for it in 0..200 {
        let mut c = (a * fb - b * fa) / (fb - fa);
        if it % 4 == 3 || !(c > a.min(b) && c < a.max(b)) {
            c = 0.5 * (a + b);
        }
        let fc = f(c)?;
        if fc == 0.0 {
            return Ok(c);
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
        if (b - a).abs() <= tol {
            return Ok(0.5 * (a + b));
        }
    }
    Ok(0.5 * (a + b))
}

/// All bound states with `kappa1` above `opts.kappa_floor`.
pub fn find_bound_states(
    profile: &CouplingProfile,
    basis: &ModeBasis,
    opts: &SolverOptions,
) -> Result<SpectralReport> {
    check_basis(profile, basis)?;
    profile.check_integrability()?;
    let mut report = SpectralReport::default();
    let kmax = kappa_max(profile, basis)?;
    let grid = Grid::for_profile(profile, opts.n_cells)?;
    if grid.is_empty() || kmax <= opts.kappa_floor {
        return Ok(report);
    }
    let kappas = geometric_grid(opts.kappa_floor, kmax, opts.samples.max(4));
    let curves: Vec<Vec<f64>> = kappas
        .par_iter()
        .map(|&k| eigenvalues_at(k, basis, &grid))
        .collect::<Result<_>>()?;
    report.bs_eigencurve = kappas
        .iter()
        .zip(&curves)
        .map(|(k, ev)| (*k, ev[0]))
        .collect();

    let below = |ev: &[f64]| ev.iter().take_while(|&&v| v <= -1.0).count();
    let n_states = below(&curves[0]);
    let mut crossings: Vec<f64> = Vec::with_capacity(n_states);
    for j in 0..n_states {
        // last sample with mu_j <= -1
        let i = (0..kappas.len())
            .rev()
            .find(|&i| curves[i][j] <= -1.0)
            .unwrap();
        if i + 1 == kappas.len() {
            return Err(Error::Bracketing(format!(
                "eigencurve {j} stays below -1 up to kappa_max = {kmax}"
            )));
        }
        let k = solve_bracketed(
            |k| Ok(eigenvalues_at(k, basis, &grid)?[j] + 1.0),
            kappas[i],
            kappas[i + 1],
            opts.tol,
        )?;
        crossings.push(k);
    }

    let nu1 = basis.nu1();
    let mut states: Vec<BoundState> = Vec::new();
    // crossings run from the lowest curve (largest kappa1) upwards; a group of
    // curves meeting -1 together is one eigenvalue with multiplicity
    let mut idx = 0;
    while idx < crossings.len() {
        let k = crossings[idx];
        let ev = eigenvalues_at(k, basis, &grid)?;
        let multiplicity = ev
            .iter()
            .filter(|v| (**v + 1.0).abs() < opts.multiplicity_tol)
            .count()
            .clamp(1, crossings.len() - idx);
        states.push(BoundState {
            point: SpectralPoint::from_kappa1(k, nu1),
            multiplicity,
        });
        idx += multiplicity;
    }
    states.sort_by(|a, b| a.point.energy.total_cmp(&b.point.energy));
    report.ground_state = states.first().map(|s| s.point);
    if let Some(g) = report.ground_state {
        let ev = eigenvalues_at(g.kappa1, basis, &grid)?;
        report.schatten_p_norms = vec![
            (1, ev.iter().map(|v| v.abs()).sum()),
            (2, ev.iter().map(|v| v * v).sum()),
        ];
    }
    report.eigenvalues = states;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtrapolatedPoint {
    pub point: SpectralPoint,
    /// Estimated absolute error in the energy.
    pub energy_error: f64,
}

/// Ground state from grids of `n_cells / 2` and `n_cells` cells, combined
/// by Richardson extrapolation for the second-order Galerkin error. The
/// basis must resolve the finer grid.
pub fn extrapolated_ground_state(
    profile: &CouplingProfile,
    basis: &ModeBasis,
    opts: &SolverOptions,
) -> Result<Option<ExtrapolatedPoint>> {
    let coarse_opts = SolverOptions {
        n_cells: (opts.n_cells / 2).max(2),
        ..*opts
    };
    let Some(coarse) = find_bound_states(profile, basis, &coarse_opts)?.ground_state else {
        return Ok(None);
    };
    let grid = Grid::for_profile(profile, opts.n_cells)?;
    let f = |k: f64| Ok(eigenvalues_at(k, basis, &grid)?[0] + 1.0);
    let kmax = kappa_max(profile, basis)?;
    let kc = coarse.kappa1;
    let mut width = 1e-3 * kc;
    let (lo, hi) = loop {
        let (lo, hi) = ((kc - width).max(opts.kappa_floor), (kc + width).min(kmax));
        // the lowest eigenvalue increases with kappa1
        if f(lo)? <= 0.0 && f(hi)? >= 0.0 {
            break (lo, hi);
        }
        if lo == opts.kappa_floor && hi == kmax {
            return Err(Error::Bracketing(
                "refined ground state not bracketed".into(),
            ));
        }
        width *= 4.0;
    };
    let kf = solve_bracketed(f, lo, hi, opts.tol)?;
    let k = kf + (kf - kc) / 3.0;
    let nu1 = basis.nu1();
    let point = SpectralPoint::from_kappa1(k, nu1);
    let energy_error = (point.energy - SpectralPoint::from_kappa1(kf, nu1).energy).abs();
    Ok(Some(ExtrapolatedPoint {
        point,
        energy_error,
    }))
}

/// Every bound state from grids of `n_cells / 2` and `n_cells` cells with
/// Richardson extrapolation. States only the finer grid resolves get an
/// infinite error.
pub fn extrapolated_bound_states(
    profile: &CouplingProfile,
    basis: &ModeBasis,
    opts: &SolverOptions,
) -> Result<Vec<(BoundState, f64)>> {
    let coarse_opts = SolverOptions {
        n_cells: (opts.n_cells / 2).max(2),
        ..*opts
    };
    let coarse = find_bound_states(profile, basis, &coarse_opts)?.eigenvalues;
    let fine = find_bound_states(profile, basis, opts)?.eigenvalues;
    let nu1 = basis.nu1();
    Ok(fine
        .iter()
        .enumerate()
        .map(|(i, f)| match coarse.get(i) {
            Some(c) if c.multiplicity == f.multiplicity => {
                let (kf, kc) = (f.point.kappa1, c.point.kappa1);
                let point = SpectralPoint::from_kappa1(kf + (kf - kc) / 3.0, nu1);
                let err = (point.energy - f.point.energy).abs();
                (BoundState { point, ..*f }, err)
            }
            _ => (*f, f64::INFINITY),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountBelow {
    pub count: usize,
    /// `||K||_1` of the attractive operator (trace norm).
    pub trace_norm: f64,
    /// `||K||_2^2` (squared Hilbert–Schmidt norm).
    pub hs_sq: f64,
}

/// Eigenvalues below `energy` of the operator with perturbation replaced by
/// its negative part `-gamma`, with the trace-ideal bounds
/// `N_E <= ||K||_1` and `N_E <= ||K||_2^2`.
pub fn count_below(
    energy: f64,
    profile: &CouplingProfile,
    basis: &ModeBasis,
    opts: &SolverOptions,
) -> Result<CountBelow> {
    check_basis(profile, basis)?;
    let kappa1 = kappa1_of(energy, basis)?;
    if kappa1 == 0.0 {
        return Err(Error::AboveThreshold {
            k_sq: energy,
            nu1: basis.nu1(),
        });
    }
    let attractive = profile.negative_part();
    let grid = Grid::for_profile(&attractive, opts.n_cells)?;
    if grid.is_empty() {
        return Ok(CountBelow {
            count: 0,
            trace_norm: 0.0,
            hs_sq: 0.0,
        });
    }
    let ev = eigenvalues_at(kappa1, basis, &grid)?;
    Ok(CountBelow {
        count: ev.iter().filter(|&&v| v <= -1.0).count(),
        trace_norm: ev.iter().map(|v| v.abs()).sum(),
        hs_sq: ev.iter().map(|v| v * v).sum(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImplicitMode {
    /// `K = Q + (A + N)`, rank-one part built on `e^{-kappa1 |x|}`.
    WeakLambda,
    /// `K = L + (M + N)`, rank-one part built on constants.
    ScaledSigma,
}

/// Right-hand side `G(kappa1)` of the implicit equation `kappa1 = G(kappa1)`
/// together with `||P||_2`.
fn implicit_rhs(
    kappa1: f64,
    mode: ImplicitMode,
    basis: &ModeBasis,
    grid: &Grid,
) -> Result<(f64, f64)> {
    let (kind, use_exp) = match mode {
        ImplicitMode::WeakLambda => (OperatorKind::A, true),
        ImplicitMode::ScaledSigma => (OperatorKind::M, false),
    };
    let p = &assemble(kind, kappa1, basis, grid)?.matrix
        + &assemble(OperatorKind::N, kappa1, basis, grid)?.matrix;
    let norm = p.clone().singular_values().max();
    let n = grid.len();
    let u = DVector::from_iterator(
        n,
        grid.cells.iter().map(|c| {
            let e = if use_exp { avg_exp_abs(c, kappa1) } else { 1.0 };
            c.weight() * e
        }),
    );
    let v = DVector::from_iterator(n, grid.cells.iter().zip(&u).map(|(c, ui)| c.sign() * ui));
    let m = DMatrix::identity(n, n) + p;
    let x = m.lu().solve(&u).ok_or(Error::NotPerturbative { norm })?;
    Ok((-0.5 * basis.chi1_sq() * v.dot(&x), norm))
}

/// Solves the implicit ground-state equation `kappa1 = G(kappa1)` of the
/// perturbative regime. Returns `None` when there is no positive root.
pub fn solve_implicit_ground_state(
    profile: &CouplingProfile,
    basis: &ModeBasis,
    mode: ImplicitMode,
    opts: &SolverOptions,
) -> Result<Option<SpectralPoint>> {
    check_basis(profile, basis)?;
    if profile.is_trivial() {
        return Ok(None);
    }
    let grid = Grid::for_profile(profile, opts.n_cells)?;
    let kmax = kappa_max(profile, basis)?;
    if grid.is_empty() || kmax == 0.0 {
        return Ok(None);
    }
    let (g0, norm) = implicit_rhs(opts.kappa_floor, mode, basis, &grid)?;
    if norm >= 1.0 {
        return Err(Error::NotPerturbative { norm });
    }
    if g0 <= opts.kappa_floor {
        return Ok(None);
    }
    let f = |k: f64| -> Result<f64> { Ok(k - implicit_rhs(k, mode, basis, &grid)?.0) };
    let kappas = geometric_grid(opts.kappa_floor, kmax, opts.samples.max(4));
    let mut prev = kappas[0];
    for &k in &kappas[1..] {
        if f(k)? >= 0.0 {
            let root = solve_bracketed(f, prev, k, opts.tol)?;
            return Ok(Some(SpectralPoint::from_kappa1(root, basis.nu1())));
        }
        prev = k;
    }
    Err(Error::Bracketing(
        "implicit equation has no root below kappa_max".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transverse::Geometry;

    fn opts(n: usize) -> SolverOptions {
        SolverOptions {
            n_cells: n,
            ..Default::default()
        }
    }

    fn well(alpha1: f64) -> (CouplingProfile, ModeBasis) {
        let p = CouplingProfile::rect_well(0.0, 1.0, alpha1).unwrap();
        let b = basis_for(&p, Geometry::new(1.0, 1.0).unwrap(), &opts(100)).unwrap();
        (p, b)
    }

    #[test]
    fn spectral_point_identity() {
        let p = SpectralPoint::from_kappa1(0.3, 2.0);
        assert_eq!(p.energy, 2.0 - 0.09);
        assert_eq!(p.k_sq, p.energy);
    }

    #[test]
    fn unperturbed_guide_has_no_bound_states() {
        let (_, b) = well(-1.0);
        let p = CouplingProfile::rect_well(0.0, 1.0, 0.0).unwrap();
        let r = find_bound_states(&p, &b, &opts(100)).unwrap();
        assert!(r.eigenvalues.is_empty());
        let c = count_below(b.nu1() - 0.1, &p, &b, &opts(100)).unwrap();
        assert_eq!(c.count, 0);
        let curves = bs_eigencurves(&p, &b, &[0.1, 0.2], 3, &opts(100)).unwrap();
        assert!(curves.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn attractive_well_ground_state_is_a_crossing() {
        let (p, b) = well(-1.0);
        let r = find_bound_states(&p, &b, &opts(100)).unwrap();
        let g = r.ground_state.unwrap();
        assert!(g.energy < b.nu1());
        let grid = Grid::for_profile(&p, 100).unwrap();
        let ev = eigenvalues_at(g.kappa1, &b, &grid).unwrap();
        assert!((ev[0] + 1.0).abs() < 1e-8);
        let (n1, n2) = (r.schatten_p_norms[0].1, r.schatten_p_norms[1].1);
        assert!(r.count() as f64 <= n2 && n2 <= n1 * n1);
    }

    #[test]
    fn implicit_solver_matches_crossing() {
        let (p, b) = well(-1.0);
        let p = p.with_lambda(0.05);
        let o = opts(100);
        let r = find_bound_states(&p, &b, &o).unwrap();
        let g = solve_implicit_ground_state(&p, &b, ImplicitMode::WeakLambda, &o)
            .unwrap()
            .unwrap();
        let h = solve_implicit_ground_state(&p, &b, ImplicitMode::ScaledSigma, &o)
            .unwrap()
            .unwrap();
        let k = r.ground_state.unwrap().kappa1;
        assert!((g.kappa1 - k).abs() < 1e-8, "{} {}", g.kappa1, k);
        assert!((h.kappa1 - k).abs() < 1e-8, "{} {}", h.kappa1, k);
        let zero = p.clone().with_lambda(0.0);
        assert!(
            solve_implicit_ground_state(&zero, &b, ImplicitMode::WeakLambda, &o)
                .unwrap()
                .is_none()
        );
    }

    #[test]
    fn strong_coupling_is_not_perturbative() {
        let (p, b) = well(-40.0);
        let e = solve_implicit_ground_state(&p, &b, ImplicitMode::WeakLambda, &opts(60));
        assert!(matches!(e, Err(Error::NotPerturbative { .. })));
    }

    #[test]
    fn count_below_threshold_domain() {
        let (p, b) = well(-1.0);
        assert!(count_below(b.nu1(), &p, &b, &opts(50)).is_err());
        assert!(count_below(b.nu1() + 1.0, &p, &b, &opts(50)).is_err());
    }
}
