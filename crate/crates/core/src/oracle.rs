//! Finite-difference reference solvers.
//!
//! The transverse problem is a tridiagonal matrix with `alpha0 / hy` added on
//! the row of `y = 0`; eigenvalues come from Sturm counts. The strip problem
//! uses the 5-point stencil on `[-X, X] x [-d2, d1]` with `alpha(x_i) / hy` on
//! the `y = 0` row and Dirichlet data on the whole boundary. Its spectrum is
//! sliced with the inertia of a banded `L D L^T` factorization of `H - s`,
//! and isolated eigenvalues are polished by shifted inverse iteration.

use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::profile::CouplingProfile;
use crate::quad;
use crate::transverse::Geometry;

/// Number of grid steps of width `h` in `len`, if `h` divides `len`.
fn steps(len: f64, h: f64) -> Result<usize> {
    let m = (len / h).round();
    if m < 1.0 || (m * h - len).abs() > 1e-12 * len.max(1.0) {
        return domain(format!("step {h} does not divide length {len}"));
    }
    Ok(m as usize)
}

/// Transverse grid: interior node count and the index of `y = 0`.
fn transverse_grid(geometry: &Geometry, hy: f64) -> Result<(usize, usize)> {
    let m1 = steps(geometry.d1, hy)?;
    let m2 = steps(geometry.d2, hy)?;
    if m1 < 2 || m2 < 2 {
        return domain("hy must resolve both sides of the barrier");
    }
    Ok((m1 + m2 - 1, m2 - 1))
}

/// Number of eigenvalues below `s` of the symmetric tridiagonal matrix.
fn sturm_count(diag: &[f64], off: f64, s: f64) -> usize {
    let mut count = 0;
    let mut d = 1.0;
    for (i, &a) in diag.iter().enumerate() {
        let prev = if i == 0 { 0.0 } else { off * off / d };
        d = a - s - prev;
        if d == 0.0 {
            d = -f64::EPSILON * (a.abs() + off.abs());
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// Lowest `n_want` eigenvalues of the 1D transverse finite-difference operator.
pub fn transverse_fd(geometry: &Geometry, alpha0: f64, hy: f64, n_want: usize) -> Result<Vec<f64>> {
    let (n, j0) = transverse_grid(geometry, hy)?;
    if n_want > n {
        return domain("more eigenvalues requested than grid nodes");
    }
    let inv = 1.0 / (hy * hy);
    let mut diag = vec![2.0 * inv; n];
    diag[j0] += alpha0 / hy;
    let off = -inv;
    let lo = diag.iter().cloned().fold(f64::INFINITY, f64::min) - 2.0 * inv;
    let hi = diag.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 2.0 * inv;
    Ok((0..n_want)
        .map(|k| {
            let (mut a, mut b) = (lo, hi);
            while b - a > 4.0 * f64::EPSILON * a.abs().max(b.abs()).max(1e-300) {
                let m = 0.5 * (a + b);
                if m <= a || m >= b {
                    break;
                }
                if sturm_count(&diag, off, m) > k {
                    b = m;
                } else {
                    a = m;
                }
            }
            0.5 * (a + b)
        })
        .collect())
}

/// Richardson extrapolation of values computed at `h, h/2, h/4, ...` with an
/// error expansion in even powers of `h`. Returns the extrapolated value and
/// the difference to the next-best extrapolant.
pub fn richardson(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::INFINITY);
    }
    let mut table = vec![values.to_vec()];
    for k in 1..n {
        let prev = &table[k - 1];
        let f = 4f64.powi(k as i32);
        let row: Vec<f64> = (1..prev.len())
            .map(|l| prev[l] + (prev[l] - prev[l - 1]) / (f - 1.0))
            .collect();
        table.push(row);
    }
    let best = table[n - 1][0];
    let err = if n == 1 {
        f64::INFINITY
    } else {
        (best - *table[n - 2].last().unwrap()).abs()
    };
    (best, err)
}

/// Transverse eigenvalues extrapolated over `hy, hy/2, hy/4`, with error estimates.
pub fn transverse_fd_extrapolated(
    geometry: &Geometry,
    alpha0: f64,
    hy: f64,
    n_want: usize,
) -> Result<Vec<(f64, f64)>> {
    let levels: Vec<Vec<f64>> = (0..3)
        .into_par_iter()
        .map(|l| transverse_fd(geometry, alpha0, hy / f64::from(1u32 << l), n_want))
        .collect::<Result<_>>()?;
    Ok((0..n_want)
        .map(|k| richardson(&levels.iter().map(|v| v[k]).collect::<Vec<_>>()))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdConfig {
    pub hx: f64,
    pub hy: f64,
    /// Half-length `X` of the truncated strip.
    pub x_half: f64,
    /// Number of refinement levels `h, h/2, ...` for extrapolation.
    pub levels: usize,
    /// Largest tolerated eigenvalue shift when `X` grows by half.
    pub x_tol: f64,
    /// States are counted below `nu_1 - margin`.
    pub margin: f64,
}

impl FdConfig {
    /// Uniform spacing `h`, and a window reaching `12 / kappa_hint` beyond the support.
    pub fn for_profile(profile: &CouplingProfile, h: f64, kappa_hint: f64) -> Self {
        let (lo, hi) = profile.support();
        Self {
            hx: h,
            hy: h,
            x_half: lo.abs().max(hi.abs()) + 12.0 / kappa_hint,
            levels: 3,
            x_tol: 1e-4,
            margin: 1e-6,
        }
    }
}

/// Five-point strip operator stored as a band of half-width `ny`.
struct StripOperator {
    nx: usize,
    ny: usize,
    inv_x: f64,
    inv_y: f64,
    /// Diagonal entries, `x`-major with `y` running fastest.
    diag: Vec<f64>,
}

impl StripOperator {
    fn new(
        profile: &CouplingProfile,
        geometry: &Geometry,
        hx: f64,
        hy: f64,
        x_half: f64,
    ) -> Result<Self> {
        let (ny, j0) = transverse_grid(geometry, hy)?;
        // an odd number of cells puts the nodes at half-integer multiples of
        // hx, so jumps on the hx lattice fall between nodes
        let cells = 2 * (x_half / hx).ceil() as usize + 1;
        let x0 = -(cells as f64) * hx / 2.0;
        let nx = cells - 1;
        let (inv_x, inv_y) = (1.0 / (hx * hx), 1.0 / (hy * hy));
        let mut diag = vec![2.0 * inv_x + 2.0 * inv_y; nx * ny];
        for i in 0..nx {
            let xi = x0 + (i + 1) as f64 * hx;
            diag[i * ny + j0] += cell_average_alpha(profile, xi - 0.5 * hx, xi + 0.5 * hx) / hy;
        }
        Ok(Self {
            nx,
            ny,
            inv_x,
            inv_y,
            diag,
        })
    }

    fn len(&self) -> usize {
        self.nx * self.ny
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        let ny = self.ny;
        for i in 0..self.nx {
            for j in 0..ny {
                let k = i * ny + j;
                let mut s = self.diag[k] * v[k];
                if j > 0 {
                    s -= self.inv_y * v[k - 1];
                }
                if j + 1 < ny {
                    s -= self.inv_y * v[k + 1];
                }
                if i > 0 {
                    s -= self.inv_x * v[k - ny];
                }
                if i + 1 < self.nx {
                    s -= self.inv_x * v[k + ny];
                }
                out[k] = s;
            }
        }
    }

    /// `L D L^T` of `H - shift` without pivoting.
    fn factor(&self, shift: f64) -> BandLdl {
        let n = self.len();
        let b = self.ny;
        let w = b + 1;
        // l[i * w + k] holds L(i, i - k) for k >= 1
        let mut l = vec![0.0; n * w];
        let mut d = vec![0.0; n];
        let mut row = vec![0.0; w];
        for i in 0..n {
            let first = i.saturating_sub(b);
            // entries of row i of H - shift inside the band
            for v in row.iter_mut() {
                *v = 0.0;
            }
            if i % b > 0 {
                row[1] = -self.inv_y;
            }
            if i >= b {
                row[b] = -self.inv_x;
            }
            for j in first..i {
                let k = i - j;
                let mut s = row[k];
                let lo = j.saturating_sub(b).max(first);
                for m in lo..j {
                    s -= l[i * w + (i - m)] * d[m] * l[j * w + (j - m)];
                }
                l[i * w + k] = s / d[j];
            }
            let mut s = self.diag[i] - shift;
            for m in first..i {
                let lim = l[i * w + (i - m)];
                s -= lim * lim * d[m];
            }
            if s == 0.0 {
                s = -f64::EPSILON * self.diag[i].abs().max(1.0);
            }
            d[i] = s;
        }
        BandLdl { l, d, b }
    }

    /// Number of eigenvalues below `shift`.
    fn count_below(&self, shift: f64) -> usize {
        self.factor(shift).d.iter().filter(|&&v| v < 0.0).count()
    }
}

struct BandLdl {
    l: Vec<f64>,
    d: Vec<f64>,
    b: usize,
}

impl BandLdl {
    fn solve(&self, rhs: &mut [f64]) {
        let n = self.d.len();
        let (b, w) = (self.b, self.b + 1);
        for i in 0..n {
            let mut s = rhs[i];
            for m in i.saturating_sub(b)..i {
                s -= self.l[i * w + (i - m)] * rhs[m];
            }
            rhs[i] = s;
        }
        for i in 0..n {
            rhs[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            let v = rhs[i];
            for m in i.saturating_sub(b)..i {
                rhs[m] -= self.l[i * w + (i - m)] * v;
            }
        }
    }
}

/// Average of `alpha` over `[lo, hi]`, exact for piecewise-constant profiles.
fn cell_average_alpha(profile: &CouplingProfile, lo: f64, hi: f64) -> f64 {
    let h = hi - lo;
    let delta = match profile.pieces() {
        Some(pieces) => {
            pieces
                .iter()
                .map(|p| (p.hi.min(hi) - p.lo.max(lo)).max(0.0) * p.value)
                .sum::<f64>()
                / h
        }
        None => {
            let (x, w) = quad::gauss_legendre(8);
            x.iter()
                .zip(&w)
                .map(|(x, w)| 0.5 * w * profile.delta(lo + 0.5 * h * (x + 1.0)))
                .sum()
        }
    };
    profile.alpha0 + delta
}

/// Eigenvalues below `threshold` of one discretization level.
fn level_spectrum(
    op: &StripOperator,
    lower: f64,
    threshold: f64,
    n_want: usize,
) -> (Vec<f64>, usize) {
    let count = op.count_below(threshold);
    let want = count.min(n_want);
    let mut out = Vec::with_capacity(want);
    // isolate eigenvalue k in [a, b] with count(a) <= k < count(b)
    let scale = threshold.abs().max(lower.abs()).max(1.0);
    for k in 0..want {
        let (mut a, mut b) = (out.last().copied().unwrap_or(lower), threshold);
        let (mut ca, mut cb) = (op.count_below(a), count);
        while !(ca == k && cb == k + 1) && b - a > 1e-12 * scale {
            let m = 0.5 * (a + b);
            let c = op.count_below(m);
            if c > k {
                b = m;
                cb = c;
            } else {
                a = m;
                ca = c;
            }
        }
        // narrow the bracket so inverse iteration contracts quickly
        while b - a > 1e-4 * scale {
            let m = 0.5 * (a + b);
            if op.count_below(m) > k {
                b = m;
            } else {
                a = m;
            }
        }
        out.push(polish(op, a, b, 1e-13 * scale));
    }
    (out, count)
}

/// Shifted inverse iteration on an isolating interval `[a, b]`, with
/// bisection as fallback when the iteration leaves the interval.
fn polish(op: &StripOperator, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let n = op.len();
    let mut v: Vec<f64> = (0..n)
        .map(|k| 1.0 + 0.1 * ((k * 7919) % 13) as f64)
        .collect();
    let mut hv = vec![0.0; n];
    for _ in 0..4 {
        let shift = 0.5 * (a + b);
        let f = op.factor(shift);
        let mut rho = shift;
        for it in 0..30 {
            f.solve(&mut v);
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
            op.apply(&v, &mut hv);
            let next: f64 = v.iter().zip(&hv).map(|(x, y)| x * y).sum();
            let done = it >= 2 && (next - rho).abs() <= tol;
            rho = next;
            if done {
                break;
            }
        }
        if rho > a && rho < b {
            return rho;
        }
        // the target is not the eigenvalue closest to the shift; shrink
        let m = 0.5 * (a + b);
        let below_a = op.count_below(a);
        if op.count_below(m) > below_a {
            b = m;
        } else {
            a = m;
        }
    }
    while b - a > tol {
        let m = 0.5 * (a + b);
        let below_a = op.count_below(a);
        if op.count_below(m) > below_a {
            b = m;
        } else {
            a = m;
        }
    }
    0.5 * (a + b)
}

#[derive(Debug, Clone)]
pub struct StripLevel {
    pub hx: f64,
    pub hy: f64,
    pub threshold: f64,
    pub eigenvalues: Vec<f64>,
    pub count: usize,
}

#[derive(Debug, Clone)]
pub struct StripSpectrum {
    /// Extrapolated eigenvalues below the threshold, ascending.
    pub eigenvalues: Vec<f64>,
    /// Error estimate of each extrapolated eigenvalue (including the
    /// window-size sensitivity).
    pub errors: Vec<f64>,
    /// Number of eigenvalues below `nu_1 - margin` on the finest level.
    pub count: usize,
    /// Extrapolated threshold `nu_1`.
    pub threshold: f64,
    pub levels: Vec<StripLevel>,
}

fn solve_level(
    profile: &CouplingProfile,
    geometry: &Geometry,
    hx: f64,
    hy: f64,
    x_half: f64,
    margin: f64,
    n_want: usize,
) -> Result<StripLevel> {
    let op = StripOperator::new(profile, geometry, hx, hy, x_half)?;
    let nu1 = transverse_fd(geometry, profile.alpha0, hy, 1)?[0];
    let (lo, _) = profile.range();
    let lower = transverse_fd(geometry, profile.alpha0 + lo.min(0.0), hy, 1)?[0]
        - 1e-9 * nu1.abs().max(1.0);
    let (eigenvalues, count) = level_spectrum(&op, lower, nu1 - margin, n_want);
    Ok(StripLevel {
        hx,
        hy,
        threshold: nu1,
        eigenvalues,
        count,
    })
}

/// Eigenvalues of the truncated strip below the threshold, extrapolated over
/// `fd.levels` halvings of the grid spacing.
pub fn strip_fd(
    profile: &CouplingProfile,
    geometry: &Geometry,
    fd: &FdConfig,
    n_want: usize,
) -> Result<StripSpectrum> {
    if !(fd.hx > 0.0 && fd.hy > 0.0 && fd.x_half > 0.0 && fd.levels >= 1) {
        return domain("finite-difference spacings, window and levels must be positive");
    }
    let (lo, hi) = profile.support();
    if fd.x_half <= lo.abs().max(hi.abs()) {
        return domain("window must contain the support of the perturbation");
    }
    let specs: Vec<(f64, f64, f64)> = (0..fd.levels)
        .map(|l| {
            let f = f64::from(1u32 << l);
            (fd.hx / f, fd.hy / f, fd.x_half)
        })
        .chain(std::iter::once((fd.hx, fd.hy, 1.5 * fd.x_half)))
        .collect();
    let mut levels: Vec<StripLevel> = specs
        .par_iter()
        .map(|&(hx, hy, x)| solve_level(profile, geometry, hx, hy, x, fd.margin, n_want))
        .collect::<Result<_>>()?;
    let wide = levels.pop().unwrap();
    let base = &levels[0];
    if wide.count != base.count {
        return Err(Error::TruncationDominated(format!(
            "count changes from {} to {} when X grows to {}; increase X",
            base.count,
            wide.count,
            1.5 * fd.x_half
        )));
    }
    let x_shift: Vec<f64> = base
        .eigenvalues
        .iter()
        .zip(&wide.eigenvalues)
        .map(|(a, b)| (a - b).abs())
        .collect();
    if let Some(&s) = x_shift.iter().find(|&&s| s > fd.x_tol) {
        return Err(Error::TruncationDominated(format!(
            "eigenvalue moves by {s:e} when X grows to {}; increase X",
            1.5 * fd.x_half
        )));
    }
    let common = levels
        .iter()
        .map(|l| l.eigenvalues.len())
        .min()
        .unwrap_or(0);
    let mut eigenvalues = Vec::with_capacity(common);
    let mut errors = Vec::with_capacity(common);
    for k in 0..common {
        let (v, e) = richardson(&levels.iter().map(|l| l.eigenvalues[k]).collect::<Vec<_>>());
        eigenvalues.push(v);
        errors.push(e + x_shift[k]);
    }
    let (threshold, _) = richardson(&levels.iter().map(|l| l.threshold).collect::<Vec<_>>());
    Ok(StripSpectrum {
        eigenvalues,
        errors,
        count: levels.last().unwrap().count,
        threshold,
        levels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn free_transverse_converges_at_second_order() {
        let g = Geometry::new(1.0, 1.0).unwrap();
        let err = |h: f64| (transverse_fd(&g, 0.0, h, 1).unwrap()[0] - PI * PI / 4.0).abs();
        let slope = (err(0.02) / err(0.01)).log2();
        assert!((slope - 2.0).abs() < 0.05, "{slope}");
        let ex = transverse_fd_extrapolated(&g, 0.0, 0.02, 3).unwrap();
        for (n, (v, _)) in ex.iter().enumerate() {
            let exact = (PI * (n + 1) as f64 / 2.0).powi(2);
            assert!((v - exact).abs() < 1e-8 * exact);
        }
    }

    #[test]
    fn dirichlet_limit() {
        let g = Geometry::new(1.0, 1.0).unwrap();
        let nu = transverse_fd(&g, 1e4, 0.005, 1).unwrap()[0];
        assert!((nu - PI * PI).abs() < 0.01 * PI * PI);
    }

    #[test]
    fn spacing_must_divide_widths() {
        let g = Geometry::new(1.0, 1.0).unwrap();
        assert!(transverse_fd(&g, 0.0, 0.3, 1).is_err());
    }

    #[test]
    fn richardson_removes_even_powers() {
        let f = |h: f64| 1.0 + 3.0 * h * h - 2.0 * h.powi(4);
        let (v, e) = richardson(&[f(0.1), f(0.05), f(0.025)]);
        assert!((v - 1.0).abs() < 1e-14 && e < 1e-5);
    }

    #[test]
    fn band_factorization_counts_and_solves() {
        let g = Geometry::new(0.5, 0.5).unwrap();
        let p = CouplingProfile::rect_well(0.0, 0.5, -3.0).unwrap();
        let op = StripOperator::new(&p, &g, 0.125, 0.125, 1.0).unwrap();
        let n = op.len();
        // dense reference
        let mut dense = nalgebra::DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            op.apply(&e, &mut col);
            for i in 0..n {
                dense[(i, j)] = col[i];
            }
        }
        let ev = dense.symmetric_eigenvalues();
        for s in [-5.0, 10.0, 40.0, 100.0] {
            let c = ev.iter().filter(|&&v| v < s).count();
            assert_eq!(op.count_below(s), c);
        }
        let rhs: Vec<f64> = (0..n).map(|k| (k as f64).sin()).collect();
        let mut x = rhs.clone();
        op.factor(3.3).solve(&mut x);
        op.apply(&x, &mut col);
        for k in 0..n {
            assert!((col[k] - 3.3 * x[k] - rhs[k]).abs() < 1e-9);
        }
        let mut sorted: Vec<f64> = ev.iter().copied().collect();
        sorted.sort_by(f64::total_cmp);
        let (vals, _) = level_spectrum(&op, sorted[0] - 1.0, sorted[3] + 1e-3, 3);
        for k in 0..3 {
            assert!(
                (vals[k] - sorted[k]).abs() < 1e-9 * sorted[k].abs().max(1.0),
                "{vals:?} {:?}",
                &sorted[..4]
            );
        }
    }

    #[test]
    fn unperturbed_strip_has_no_bound_states() {
        let g = Geometry::new(1.0, 1.0).unwrap();
        let p = CouplingProfile::rect_well(0.0, 1.0, 0.0).unwrap();
        let fd = FdConfig {
            hx: 0.1,
            hy: 0.1,
            x_half: 4.0,
            levels: 2,
            x_tol: 1e-4,
            margin: 1e-6,
        };
        let s = strip_fd(&p, &g, &fd, 4).unwrap();
        assert_eq!(s.count, 0);
        assert!(s.eigenvalues.is_empty());
    }
}
