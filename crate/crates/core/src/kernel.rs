//! Discretized Birman–Schwinger operators.
//!
//! Every operator is a Galerkin compression onto the normalized cell
//! indicators of a [`Grid`]: entry `(i, j)` is
//! `w_i * avg_{cell i x cell j} kernel * w_j * s_j` with `w = sqrt(h |delta|)`
//! and `s = sgn(delta)`. All exponential kernels are averaged in closed form,
//! so the logarithmic diagonal singularity of the higher-mode sum needs no
//! special quadrature. Modes beyond the truncation enter through a tail
//! model fitted to the computed modes (only cell pairs with zero gap need it).
//!
//! `K` itself is not symmetric for sign-changing perturbations, but
//! `K = B S` with `B = W G W` positive semidefinite, so `K` is similar to
//! `B^{1/2} S B^{1/2}` and its spectrum is real.

use std::collections::HashMap;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::grid::{Cell, Grid};
use crate::profile::CouplingProfile;
use crate::quad::{ln_phi1, phi1, phi2, sinhc};
use crate::transverse::ModeBasis;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OperatorKind {
    FullK,
    Q,
    A,
    N,
    L,
    M,
    A0,
    M0,
    N0Beta(f64),
}

impl OperatorKind {
    fn singular_at_threshold(&self) -> bool {
        matches!(self, Self::FullK | Self::Q | Self::L)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::FullK => "K",
            Self::Q => "Q",
            Self::A => "A",
            Self::N => "N",
            Self::L => "L",
            Self::M => "M",
            Self::A0 => "A0",
            Self::M0 => "M0",
            Self::N0Beta(_) => "N0beta",
        }
    }
}

#[derive(Debug, Clone)]
pub struct DiscretizedOperator {
    pub matrix: DMatrix<f64>,
    pub kind: OperatorKind,
    pub k_sq: f64,
    pub kappa1: f64,
    pub signs: Vec<f64>,
}

impl DiscretizedOperator {
    /// Frobenius norm of the compressed operator.
    pub fn hs_norm(&self) -> f64 {
        self.matrix.norm()
    }

    pub fn singular_values(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self
            .matrix
            .clone()
            .singular_values()
            .iter()
            .copied()
            .collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }

    pub fn spectral_norm(&self) -> f64 {
        if self.matrix.is_empty() {
            return 0.0;
        }
        self.singular_values()[0]
    }

    /// Eigenvalues in ascending order. Only meaningful for kinds of the form
    /// `W G W S` with positive semidefinite `G` (K, N, N0beta).
    pub fn eigenvalues(&self) -> Vec<f64> {
        bs_eigenvalues(&self.matrix, &self.signs)
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.nrows() == 0
    }
}

/// Real spectrum of `R = B S` where `B = R S` is symmetric positive semidefinite.
pub fn bs_eigenvalues(raw: &DMatrix<f64>, signs: &[f64]) -> Vec<f64> {
    let n = raw.nrows();
    if n == 0 {
        return Vec::new();
    }
    let mut b = raw.clone();
    for j in 0..n {
        let s = signs[j];
        for i in 0..n {
            b[(i, j)] *= s;
        }
    }
    let b = (&b + b.transpose()) * 0.5;
    let mut vals: Vec<f64> = if signs.iter().all(|&s| s == signs[0]) {
        let s = signs[0];
        b.symmetric_eigenvalues().iter().map(|v| s * v).collect()
    } else {
        let eig = SymmetricEigen::new(b);
        let root = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
        let v = &eig.eigenvectors;
        // B^{1/2} S B^{1/2} = V D^{1/2} (V^T S V) D^{1/2} V^T, similar to D^{1/2} V^T S V D^{1/2}
        let mut vs = v.clone();
        for i in 0..n {
            let s = signs[i];
            for j in 0..n {
                vs[(i, j)] *= s;
            }
        }
        let mut c = v.transpose() * vs;
        for i in 0..n {
            for j in 0..n {
                c[(i, j)] *= root[i] * root[j];
            }
        }
        let c = (&c + c.transpose()) * 0.5;
        c.symmetric_eigenvalues().iter().copied().collect()
    };
    vals.sort_by(|a, b| a.total_cmp(b));
    vals
}

/// `kappa_1` for the spectral parameter `k^2`.
pub fn kappa1_of(k_sq: f64, basis: &ModeBasis) -> Result<f64> {
    let nu1 = basis.nu1();
    if k_sq > nu1 {
        return Err(Error::AboveThreshold { k_sq, nu1 });
    }
    Ok((nu1 - k_sq).sqrt())
}

/// Point value of the full kernel `K(x, x'; k)` for `x != x'`, summed over
/// the modes of `basis`. The neglected tail is bounded by
/// `sum_{n > N} chi_n^2 / (2 kappa_n) e^{-kappa_n |x - x'|}`, which decays
/// like `e^{-kappa_N |x - x'|}`.
pub fn kernel_full(
    x: f64,
    xp: f64,
    k_sq: f64,
    basis: &ModeBasis,
    profile: &CouplingProfile,
) -> Result<f64> {
    let nu1 = basis.nu1();
    if k_sq >= nu1 {
        return Err(Error::Domain(format!(
            "spectral parameter above threshold: k^2 = {k_sq} >= nu_1 = {nu1}"
        )));
    }
    if x == xp {
        return domain("kernel_full is evaluated off the diagonal only");
    }
    let (dx, dxp) = (profile.delta(x), profile.delta(xp));
    if dx == 0.0 || dxp == 0.0 {
        return Ok(0.0);
    }
    let s = (x - xp).abs();
    let g: f64 = basis
        .modes
        .iter()
        .map(|m| {
            let kappa = (m.nu - k_sq).sqrt();
            m.chi0_sq / (2.0 * kappa) * (-kappa * s).exp()
        })
        .sum();
    Ok(dx.abs().sqrt() * g * dxp.abs().sqrt() * dxp.signum())
}

/// Cell average of `e^{-kappa |x|}` over `c`.
pub(crate) fn avg_exp_abs(c: &Cell, kappa: f64) -> f64 {
    let h = c.width();
    if c.lo >= 0.0 {
        (-kappa * c.lo).exp() * phi1(kappa * h)
    } else if c.hi <= 0.0 {
        (kappa * c.hi).exp() * phi1(kappa * h)
    } else {
        (-c.lo * phi1(-kappa * c.lo) + c.hi * phi1(kappa * c.hi)) / h
    }
}

/// Cell-pair average of `e^{-kappa |x - x'|}`.
fn avg_exp_dist(ci: &Cell, cj: &Cell, same: bool, kappa: f64) -> f64 {
    if same {
        2.0 * phi2(kappa * ci.width())
    } else {
        let gap = gap(ci, cj);
        (-kappa * gap).exp() * phi1(kappa * ci.width()) * phi1(kappa * cj.width())
    }
}

/// Cell-pair average of `e^{-kappa |x - x'|} - 1`, free of cancellation.
fn avg_exp_dist_m1(ci: &Cell, cj: &Cell, same: bool, kappa: f64) -> f64 {
    if same {
        let t = kappa * ci.width();
        if t < 1e-2 {
            -t / 3.0 + t * t / 12.0 - t * t * t / 60.0 + t.powi(4) / 360.0
        } else {
            2.0 * phi2(t) - 1.0
        }
    } else {
        let e = -kappa * gap(ci, cj) + ln_phi1(kappa * ci.width()) + ln_phi1(kappa * cj.width());
        e.exp_m1()
    }
}

fn gap(ci: &Cell, cj: &Cell) -> f64 {
    if ci.hi <= cj.lo {
        cj.lo - ci.hi
    } else {
        ci.lo - cj.hi
    }
    .max(0.0)
}

fn same_side(ci: &Cell, cj: &Cell) -> bool {
    (ci.lo >= 0.0 && cj.lo >= 0.0) || (ci.hi <= 0.0 && cj.hi <= 0.0)
}

/// Cell-pair average of `|x|_<`.
fn avg_min_abs(ci: &Cell, cj: &Cell, same: bool) -> f64 {
    if !same_side(ci, cj) {
        return 0.0;
    }
    if same {
        ci.center().abs() - ci.width() / 6.0
    } else {
        ci.center().abs().min(cj.center().abs())
    }
}

/// Cell-pair average of `|x - x'|`.
fn avg_abs_dist(ci: &Cell, cj: &Cell, same: bool) -> f64 {
    if same {
        ci.width() / 3.0
    } else {
        (ci.center() - cj.center()).abs()
    }
}

/// Cell-pair averages of a higher-mode sum
/// `sum_{n >= 2} chi_n^2 / (2 r_n) e^{-r_n |x - x'|}` with rates `r_n`.
pub(crate) struct ModeSumTable {
    values: HashMap<(i64, i64, i64), f64>,
}

fn pair_key(ci: &Cell, cj: &Cell, same: bool) -> (i64, i64, i64) {
    let q = |v: f64| (v * 1e12).round() as i64;
    let (a, b) = (q(ci.width()), q(cj.width()));
    let g = if same { -1 } else { q(gap(ci, cj)) };
    (g, a.min(b), a.max(b))
}

impl ModeSumTable {
    pub(crate) fn build(grid: &Grid, basis: &ModeBasis, rates: &[f64]) -> Self {
        let cells = &grid.cells;
        let mut keys: HashMap<(i64, i64, i64), (Cell, Cell, bool)> = HashMap::new();
        for (i, ci) in cells.iter().enumerate() {
            for (j, cj) in cells.iter().enumerate().skip(i) {
                let same = i == j;
                keys.entry(pair_key(ci, cj, same))
                    .or_insert((*ci, *cj, same));
            }
        }
        let tail = basis.tail(rates);
        let s2 = tail.inverse_power_sum(2.0);
        let s3 = tail.inverse_power_sum(3.0);
        let modes = &basis.modes[1..];
        let rates = &rates[1..];
        let entries: Vec<_> = keys.into_iter().collect();
        let values = entries
            .into_par_iter()
            .map(|(key, (ci, cj, same))| {
                let mut sum = 0.0;
                for (m, &r) in modes.iter().zip(rates) {
                    if m.chi0_sq == 0.0 {
                        continue;
                    }
                    sum += m.chi0_sq / (2.0 * r) * avg_exp_dist(&ci, &cj, same, r);
                }
                if same {
                    let h = ci.width();
                    sum += s2 / h - s3 / (h * h);
                } else if gap(&ci, &cj) == 0.0 {
                    sum += s3 / (2.0 * ci.width() * cj.width());
                }
                (key, sum)
            })
            .collect();
        Self { values }
    }

    fn get(&self, ci: &Cell, cj: &Cell, same: bool) -> f64 {
        self.values[&pair_key(ci, cj, same)]
    }
}

/// Assembles `kind` at `kappa1 = sqrt(nu_1 - k^2)`.
pub fn assemble(
    kind: OperatorKind,
    kappa1: f64,
    basis: &ModeBasis,
    grid: &Grid,
) -> Result<DiscretizedOperator> {
    if !(kappa1 >= 0.0) || !kappa1.is_finite() {
        return domain(format!(
            "kappa1 must be finite and non-negative, got {kappa1}"
        ));
    }
    if kappa1 == 0.0 && kind.singular_at_threshold() {
        return Err(Error::RankOneDiverges(kind.name()));
    }
    if let OperatorKind::N0Beta(beta) = kind {
        if !(beta > 0.0) {
            return domain("beta must be positive");
        }
    }
    let cells = &grid.cells;
    let n = cells.len();
    let chi1 = basis.chi1_sq();
    let kt = basis.kappa_tilde();

    let table = match kind {
        OperatorKind::FullK | OperatorKind::N => {
            let rates: Vec<f64> = kt
                .iter()
                .map(|k| (k * k + kappa1 * kappa1).sqrt())
                .collect();
            Some(ModeSumTable::build(grid, basis, &rates))
        }
        OperatorKind::N0Beta(beta) => {
            let rates: Vec<f64> = kt.iter().map(|k| beta * k).collect();
            Some(ModeSumTable::build(grid, basis, &rates))
        }
        _ => None,
    };
    let e_avg: Vec<f64> = cells.iter().map(|c| avg_exp_abs(c, kappa1)).collect();
    let q_pref = chi1 / (2.0 * kappa1);

    let kernel = |i: usize, j: usize| -> f64 {
        let (ci, cj) = (&cells[i], &cells[j]);
        let same = i == j;
        match kind {
            OperatorKind::FullK => {
                q_pref * avg_exp_dist(ci, cj, same, kappa1)
                    + table.as_ref().unwrap().get(ci, cj, same)
            }
            OperatorKind::N | OperatorKind::N0Beta(_) => table.as_ref().unwrap().get(ci, cj, same),
            OperatorKind::Q => q_pref * e_avg[i] * e_avg[j],
            OperatorKind::A => a_avg(ci, cj, same, kappa1, chi1, e_avg[i], e_avg[j]),
            OperatorKind::L => q_pref,
            OperatorKind::M => {
                if kappa1 == 0.0 {
                    -0.5 * chi1 * avg_abs_dist(ci, cj, same)
                } else {
                    q_pref * avg_exp_dist_m1(ci, cj, same, kappa1)
                }
            }
            OperatorKind::A0 => chi1 * avg_min_abs(ci, cj, same),
            OperatorKind::M0 => -0.5 * chi1 * avg_abs_dist(ci, cj, same),
        }
    };

    let mut matrix = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let g = kernel(i, j);
            matrix[(i, j)] = g;
            matrix[(j, i)] = g;
        }
    }
    let w: Vec<f64> = cells.iter().map(Cell::weight).collect();
    let signs = grid.signs();
    for j in 0..n {
        for i in 0..n {
            matrix[(i, j)] *= w[i] * w[j] * signs[j];
        }
    }
    Ok(DiscretizedOperator {
        matrix,
        kind,
        k_sq: basis.nu1() - kappa1 * kappa1,
        kappa1,
        signs,
    })
}

/// Cell-pair average of `A(x, x') = chi_1^2 / kappa_1 e^{-kappa_1 |x|_>} sinh(kappa_1 |x|_<)`.
fn a_avg(ci: &Cell, cj: &Cell, same: bool, kappa: f64, chi1: f64, ei: f64, ej: f64) -> f64 {
    if !same_side(ci, cj) {
        return 0.0;
    }
    if same {
        if kappa == 0.0 {
            return chi1 * avg_min_abs(ci, cj, true);
        }
        // A = K_1 - Q pointwise
        let pref = chi1 / (2.0 * kappa);
        return pref * (avg_exp_dist(ci, cj, true, kappa) - ei * ej);
    }
    let (inner, e_outer) = if ci.center().abs() < cj.center().abs() {
        (ci, ej)
    } else {
        (cj, ei)
    };
    // avg sinh(kappa |x|) / kappa over the inner cell
    let c = inner.center().abs();
    let sinh_avg = c * sinhc(kappa * c) * sinhc(0.5 * kappa * inner.width());
    chi1 * e_outer * sinh_avg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transverse::{Geometry, ModeBasis};

    fn setup(n_cells: usize) -> (ModeBasis, CouplingProfile, Grid) {
        let g = Geometry::new(1.0, 1.0).unwrap();
        let p = CouplingProfile::rect_well(0.0, 1.0, -1.0).unwrap();
        let grid = Grid::for_profile(&p, n_cells).unwrap();
        let n = ModeBasis::required_modes(&g, grid.min_width());
        (ModeBasis::solve(g, 0.0, n).unwrap(), p, grid)
    }

    #[test]
    fn vanishing_perturbation_gives_zero_kernel() {
        let g = Geometry::new(1.0, 1.0).unwrap();
        let b = ModeBasis::solve(g, 0.5, 50).unwrap();
        let p = CouplingProfile::rect_well(0.5, 1.0, 0.5).unwrap();
        for (x, y) in [(0.1, -0.1), (0.3, 0.9), (2.0, 0.0)] {
            assert_eq!(kernel_full(x, y, b.nu1() - 0.1, &b, &p).unwrap(), 0.0);
        }
        let grid = Grid::for_profile(&p, 10).unwrap();
        assert!(grid.is_empty());
    }

    #[test]
    fn kernel_full_domain_errors() {
        let (b, p, _) = setup(10);
        assert!(kernel_full(0.1, 0.2, b.nu1(), &b, &p).is_err());
        assert!(kernel_full(0.1, 0.1, 0.0, &b, &p).is_err());
    }

    #[test]
    fn rank_one_kinds_diverge_at_threshold() {
        let (b, _, grid) = setup(10);
        for kind in [OperatorKind::Q, OperatorKind::L, OperatorKind::FullK] {
            assert!(matches!(
                assemble(kind, 0.0, &b, &grid),
                Err(Error::RankOneDiverges(_))
            ));
        }
        assert!(assemble(OperatorKind::N0Beta(0.0), 0.1, &b, &grid).is_err());
        assert!(assemble(OperatorKind::A, 0.0, &b, &grid).is_ok());
    }

    #[test]
    fn a_closed_form_matches_difference() {
        let (b, _, grid) = setup(40);
        let kappa = 0.7;
        let k1: DMatrix<f64> = {
            let q = assemble(OperatorKind::Q, kappa, &b, &grid).unwrap();
            let a = assemble(OperatorKind::A, kappa, &b, &grid).unwrap();
            &q.matrix + &a.matrix
        };
        let l = assemble(OperatorKind::L, kappa, &b, &grid).unwrap();
        let m = assemble(OperatorKind::M, kappa, &b, &grid).unwrap();
        let diff = (&k1 - (&l.matrix + &m.matrix)).abs().max();
        assert!(diff < 1e-13, "{diff}");
    }

    #[test]
    fn attractive_kernel_is_negative() {
        let (b, _, grid) = setup(40);
        let k = assemble(OperatorKind::FullK, 0.5, &b, &grid).unwrap();
        assert!(k.eigenvalues().iter().all(|&v| v <= 1e-12));
    }

    #[test]
    fn sign_changing_spectrum_is_similarity_invariant() {
        let g = Geometry::new(1.0, 1.0).unwrap();
        let p = CouplingProfile::piecewise(0.0, vec![-1.0, 0.0, 1.0], vec![1.0, -2.0]).unwrap();
        let grid = Grid::for_profile(&p, 16).unwrap();
        let b = ModeBasis::solve(g, 0.0, 400).unwrap();
        let k = assemble(OperatorKind::FullK, 0.8, &b, &grid).unwrap();
        let ev = k.eigenvalues();
        // compare trace and trace of square against the raw matrix
        let tr: f64 = ev.iter().sum();
        let tr2: f64 = ev.iter().map(|v| v * v).sum();
        let m2 = &k.matrix * &k.matrix;
        assert!((tr - k.matrix.trace()).abs() < 1e-10 * tr.abs().max(1.0));
        assert!((tr2 - m2.trace()).abs() < 1e-10 * tr2.abs().max(1.0));
    }

    #[test]
    fn comparison_kernels_dominate_entrywise() {
        let (b, _, grid) = setup(40);
        let a0 = assemble(OperatorKind::A0, 0.3, &b, &grid).unwrap().matrix;
        let a = assemble(OperatorKind::A, 0.3, &b, &grid).unwrap().matrix;
        assert!(a
            .iter()
            .zip(a0.iter())
            .all(|(x, y)| x.abs() <= y.abs() + 1e-14));
        let m0 = assemble(OperatorKind::M0, 0.3, &b, &grid).unwrap().matrix;
        let m = assemble(OperatorKind::M, 0.3, &b, &grid).unwrap().matrix;
        assert!(m
            .iter()
            .zip(m0.iter())
            .all(|(x, y)| x.abs() <= y.abs() + 1e-14));
    }

    #[test]
    fn threshold_limits_are_approached_at_first_order() {
        let (b, _, grid) = setup(40);
        let diff = |kind, reference, kappa| {
            let x = assemble(kind, kappa, &b, &grid).unwrap().matrix;
            let y = assemble(reference, kappa, &b, &grid).unwrap().matrix;
            (x - y).norm()
        };
        let ka = [0.1, 0.05, 0.025];
        let da: Vec<f64> = ka
            .iter()
            .map(|&k| diff(OperatorKind::A, OperatorKind::A0, k))
            .collect();
        let dn: Vec<f64> = ka
            .iter()
            .map(|&k| diff(OperatorKind::N, OperatorKind::N0Beta(1.0), k))
            .collect();
        for d in [&da, &dn] {
            assert!(d.windows(2).all(|w| w[1] < w[0]), "{d:?}");
            // first order is approached from below as kappa1 shrinks
            let orders: Vec<f64> = d.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
            assert!(orders[1] >= orders[0] - 1e-9 && orders[1] >= 0.95, "{d:?}");
        }
    }

    #[test]
    fn kernel_decays_at_the_threshold_rate() {
        let g = Geometry::new(1.0, 1.0).unwrap();
        let b = ModeBasis::solve(g, 0.0, 60).unwrap();
        let p = CouplingProfile::rect_well(0.0, 20.0, -1.0).unwrap();
        let kappa = 0.3;
        let k_sq = b.nu1() - kappa * kappa;
        let k10 = kernel_full(0.0, 10.0, k_sq, &b, &p).unwrap();
        let k15 = kernel_full(0.0, 15.0, k_sq, &b, &p).unwrap();
        let rate = (k10 / k15).ln() / 5.0;
        assert!((rate - kappa).abs() <= 0.02 * kappa, "{rate}");
    }

    #[test]
    fn hs_norm_converges_under_refinement() {
        let hs: Vec<f64> = [25, 50, 100]
            .iter()
            .map(|&n| {
                let (b, _, grid) = setup(n);
                assemble(OperatorKind::FullK, 0.5, &b, &grid)
                    .unwrap()
                    .hs_norm()
            })
            .collect();
        let (d1, d2) = ((hs[1] - hs[0]).abs(), (hs[2] - hs[1]).abs());
        // the logarithmic diagonal limits the rate to about first order
        assert!(d2 < 0.6 * d1, "{hs:?}");
    }
}
