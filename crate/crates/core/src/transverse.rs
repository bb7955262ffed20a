//! Transverse eigenproblem of the unperturbed double guide.
//!
//! The cross-section is `(-d2, d1)` with Dirichlet walls and a point
//! interaction of strength `alpha0` at `y = 0`. An eigenfunction with
//! wavenumber `u` has the form `A sin(u (d1 - y))` above the barrier and
//! `B sin(u (y + d2))` below it; continuity at zero plus the derivative jump
//! `chi'(0+) - chi'(0-) = alpha0 chi(0)` give the secular equation
//!
//! ```text
//! f(u) = u sin(u D) + alpha0 sin(u d1) sin(u d2) = 0,   D = d1 + d2.
//! ```
//!
//! Dividing by `sin(u d1) sin(u d2)` gives `g(u) = u (cot u d1 + cot u d2) + alpha0`,
//! which is strictly decreasing between consecutive poles `{m pi / d1} ∪ {m pi / d2}`.
//! Every gap between distinct poles therefore holds exactly one root, and a
//! pole shared by both families is itself an eigenvalue with `chi(0) = 0`.
//! On `(0, p_1)` there is a root iff `1/d1 + 1/d2 + alpha0 > 0`; otherwise the
//! lowest eigenvalue is non-positive and solved on the hyperbolic branch.

use std::f64::consts::PI;

use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    pub d1: f64,
    pub d2: f64,
}

impl Geometry {
    pub fn new(d1: f64, d2: f64) -> Result<Self> {
        if !(d1 > 0.0 && d2 > 0.0 && d1.is_finite() && d2.is_finite()) {
            return domain(format!(
                "half-widths must be positive, got d1={d1}, d2={d2}"
            ));
        }
        Ok(Self { d1, d2 })
    }

    /// Total width `D = d1 + d2`.
    pub fn width(&self) -> f64 {
        self.d1 + self.d2
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransverseMode {
    /// 1-based mode index.
    pub n: usize,
    pub nu: f64,
    /// `chi_n(0)^2` for the L2-normalized eigenfunction.
    pub chi0_sq: f64,
}

impl TransverseMode {
    /// Decay rate `sqrt(nu_n - k^2)`.
    pub fn kappa(&self, k_sq: f64) -> Result<f64> {
        if k_sq >= self.nu {
            return Err(Error::AboveThreshold { k_sq, nu1: self.nu });
        }
        Ok((self.nu - k_sq).sqrt())
    }
}

#[derive(Debug, Clone)]
pub struct ModeBasis {
    pub geometry: Geometry,
    pub alpha0: f64,
    pub modes: Vec<TransverseMode>,
}

/// Asymptotic model of the discarded modes `n > N`: mean `chi_n(0)^2` over the
/// upper half of the computed modes and a linear growth `rate_n ≈ slope * n`.
#[derive(Debug, Clone, Copy)]
pub struct ModeTail {
    pub chi_mean: f64,
    pub slope: f64,
    pub last: usize,
}

impl ModeTail {
    /// Approximates `sum_{n > N} chi_n(0)^2 / rate_n^p` for `p > 1`.
    pub fn inverse_power_sum(&self, p: f64) -> f64 {
        let n = self.last as f64 + 0.5;
        self.chi_mean * self.slope.powf(-p) * n.powf(1.0 - p) / (p - 1.0)
    }
}

impl ModeBasis {
    pub fn solve(geometry: Geometry, alpha0: f64, n_max: usize) -> Result<Self> {
        solve_modes(geometry, alpha0, n_max)
    }

    pub fn nu1(&self) -> f64 {
        self.modes[0].nu
    }

    pub fn chi1_sq(&self) -> f64 {
        self.modes[0].chi0_sq
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// `kappa~_n = sqrt(nu_n - nu_1)` for every mode (zero for n = 1).
    pub fn kappa_tilde(&self) -> Vec<f64> {
        let nu1 = self.nu1();
        self.modes
            .iter()
            .map(|m| (m.nu - nu1).max(0.0).sqrt())
            .collect()
    }

    /// Tail model for a mode sum whose n-th rate is `rates[n-1]`.
    pub fn tail(&self, rates: &[f64]) -> ModeTail {
        let last = self.modes.len();
        let from = last / 2;
        let chi_mean =
            self.modes[from..].iter().map(|m| m.chi0_sq).sum::<f64>() / (last - from) as f64;
        ModeTail {
            chi_mean,
            slope: rates[last - 1] / last as f64,
            last,
        }
    }

    /// `sum_{n > N} chi_n(0)^2 / (scale kt_n)^p` over the modes beyond this
    /// basis, for each `p` in `powers`. Modes up to `factor * N` are solved
    /// explicitly, so the parity pattern of `chi_n(0)^2` is resolved; the mean
    /// model covers the rest.
    pub fn discarded_power_sums(
        &self,
        scale: f64,
        powers: &[f64],
        factor: usize,
    ) -> Result<Vec<f64>> {
        let n = self.modes.len();
        let m = (factor.max(2) * n).min(1 << 21);
        let wide = solve_modes(self.geometry, self.alpha0, m)?;
        let kt = wide.kappa_tilde();
        let tail = wide.tail(&kt);
        Ok(powers
            .iter()
            .map(|&p| {
                let explicit: f64 = wide.modes[n..]
                    .iter()
                    .zip(&kt[n..])
                    .map(|(md, k)| md.chi0_sq / (scale * k).powf(p))
                    .sum();
                explicit + tail.inverse_power_sum(p) * scale.powf(-p)
            })
            .collect())
    }

    /// Smallest truncation order resolving `exp(-kappa_n h)` down to `e^-28`
    /// for the smallest cell gap `h`.
    pub fn required_modes(geometry: &Geometry, h_min: f64) -> usize {
        let n = (28.0 * geometry.width() / (PI * h_min)).ceil() as usize;
        n.clamp(64, 400_000)
    }
}

/// `f(u) = u sin(uD) + alpha0 sin(u d1) sin(u d2)`.
pub fn secular_residual(u: f64, geometry: &Geometry, alpha0: f64) -> Result<f64> {
    if !(u > 0.0) || !u.is_finite() {
        return domain(format!("secular residual needs u > 0, got {u}"));
    }
    let (s1, c1) = (u * geometry.d1).sin_cos();
    let (s2, c2) = (u * geometry.d2).sin_cos();
    Ok(u * (s1 * c2 + c1 * s2) + alpha0 * s1 * s2)
}

/// Boundedness function `h_j(u) = sqrt(u) |sin d_j u| / sqrt(2 d_j u - sin 2 d_j u)`.
///
/// At `u = 0` the limit `sqrt(3 / (4 d_j))` is returned.
pub fn h_bound(u: f64, d: f64) -> Result<f64> {
    if !(u >= 0.0) || !(d > 0.0) {
        return domain(format!("h_bound needs u >= 0 and d > 0, got u={u}, d={d}"));
    }
    if u == 0.0 {
        return Ok((3.0 / (4.0 * d)).sqrt());
    }
    let x = d * u;
    Ok(u.sqrt() * x.sin().abs() / x_minus_sin(2.0 * x).sqrt())
}

/// `x - sin x` without cancellation for small `x`.
pub(crate) fn x_minus_sin(x: f64) -> f64 {
    if x.abs() < 1e-2 {
        let x2 = x * x;
        x * x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0 * (1.0 - x2 / 72.0)))
    } else {
        x - x.sin()
    }
}

fn g_trig(u: f64, geometry: &Geometry, alpha0: f64) -> f64 {
    u * (1.0 / (u * geometry.d1).tan() + 1.0 / (u * geometry.d2).tan()) + alpha0
}

fn g_hyp(t: f64, geometry: &Geometry, alpha0: f64) -> f64 {
    t * (1.0 / (t * geometry.d1).tanh() + 1.0 / (t * geometry.d2).tanh()) + alpha0
}

/// Bisection on a function that is positive at `lo` and negative at `hi`
/// (or the reverse when `decreasing` is false), to machine resolution.
fn bisect(mut lo: f64, mut hi: f64, decreasing: bool, f: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = f(mid);
        if (v > 0.0) == decreasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn trig_mode(n: usize, u: f64, geometry: &Geometry, alpha0: f64) -> TransverseMode {
    let (s1, c1) = (u * geometry.d1).sin_cos();
    let (s2, c2) = (u * geometry.d2).sin_cos();
    // rows of the 2x2 system for (A, B): continuity and derivative jump
    let r1 = [s1, -s2];
    let r2 = [-u * c1 - alpha0 * s1, -u * c2];
    let row = if r1[0].hypot(r1[1]) >= r2[0].hypot(r2[1]) {
        r1
    } else {
        r2
    };
    let (a, b) = (-row[1], row[0]);
    let piece = |d: f64| x_minus_sin(2.0 * u * d) / (4.0 * u);
    let norm_sq = a * a * piece(geometry.d1) + b * b * piece(geometry.d2);
    let chi0 = a * s1;
    TransverseMode {
        n,
        nu: u * u,
        chi0_sq: chi0 * chi0 / norm_sq,
    }
}

fn hyp_mode(t: f64, geometry: &Geometry, alpha0: f64) -> TransverseMode {
    let (s1, c1) = ((t * geometry.d1).sinh(), (t * geometry.d1).cosh());
    let (s2, c2) = ((t * geometry.d2).sinh(), (t * geometry.d2).cosh());
    let r1 = [s1, -s2];
    let r2 = [-t * c1 - alpha0 * s1, -t * c2];
    let row = if r1[0].hypot(r1[1]) >= r2[0].hypot(r2[1]) {
        r1
    } else {
        r2
    };
    let (a, b) = (-row[1], row[0]);
    let piece = |d: f64| {
        let x = 2.0 * t * d;
        // sinh x - x
        let sh = if x < 1e-2 {
            let x2 = x * x;
            x * x2 / 6.0 * (1.0 + x2 / 20.0 * (1.0 + x2 / 42.0))
        } else {
            x.sinh() - x
        };
        sh / (4.0 * t)
    };
    let norm_sq = a * a * piece(geometry.d1) + b * b * piece(geometry.d2);
    let chi0 = a * s1;
    TransverseMode {
        n: 1,
        nu: -t * t,
        chi0_sq: chi0 * chi0 / norm_sq,
    }
}

/// First `n_max` transverse modes, ascending in `nu`.
pub fn solve_modes(geometry: Geometry, alpha0: f64, n_max: usize) -> Result<ModeBasis> {
    if n_max < 2 {
        return domain(format!("n_max must be at least 2, got {n_max}"));
    }
    if !alpha0.is_finite() {
        return domain("alpha0 must be finite");
    }
    let (d1, d2) = (geometry.d1, geometry.d2);
    let mut modes = Vec::with_capacity(n_max);

    let g0 = 1.0 / d1 + 1.0 / d2 + alpha0;
    let scale = 1.0 / d1 + 1.0 / d2 + alpha0.abs();
    let first_pole = (PI / d1).min(PI / d2);
    if g0.abs() <= 1e-13 * scale {
        // zero-energy mode: piecewise linear eigenfunction
        modes.push(TransverseMode {
            n: 1,
            nu: 0.0,
            chi0_sq: 3.0 / geometry.width(),
        });
    } else if g0 < 0.0 {
        let mut hi = 1.0 / geometry.width();
        while g_hyp(hi, &geometry, alpha0) <= 0.0 {
            hi *= 2.0;
            if hi * geometry.width() > 600.0 {
                return domain(format!(
                    "alpha0 = {alpha0} too negative for the hyperbolic branch"
                ));
            }
        }
        let t = bisect(0.0, hi, false, |t| {
            if t == 0.0 {
                g0
            } else {
                g_hyp(t, &geometry, alpha0)
            }
        });
        modes.push(hyp_mode(t, &geometry, alpha0));
    } else {
        let u = bisect(0.0, first_pole, true, |u| {
            if u == 0.0 {
                g0
            } else {
                g_trig(u, &geometry, alpha0)
            }
        });
        modes.push(trig_mode(1, u, &geometry, alpha0));
    }

    // merged pole sequence
    let (mut m1, mut m2) = (1u64, 1u64);
    let mut next_pole = || -> (f64, bool) {
        let p1 = m1 as f64 * PI / d1;
        let p2 = m2 as f64 * PI / d2;
        if (p1 - p2).abs() <= 1e-12 * p1.max(p2) {
            m1 += 1;
            m2 += 1;
            (p1.min(p2), true)
        } else if p1 < p2 {
            m1 += 1;
            (p1, false)
        } else {
            m2 += 1;
            (p2, false)
        }
    };

    let (mut pole, mut common) = next_pole();
    while modes.len() < n_max {
        if common {
            let n = modes.len() + 1;
            modes.push(TransverseMode {
                n,
                nu: pole * pole,
                chi0_sq: 0.0,
            });
            if modes.len() == n_max {
                break;
            }
        }
        let (next, next_common) = next_pole();
        let u = bisect(pole, next, true, |u| g_trig(u, &geometry, alpha0));
        if !(u > pole && u < next) {
            return Err(Error::Bracketing(format!(
                "root escaped bracket ({pole}, {next}) for alpha0 = {alpha0}"
            )));
        }
        let n = modes.len() + 1;
        modes.push(trig_mode(n, u, &geometry, alpha0));
        pole = next;
        common = next_common;
    }

    Ok(ModeBasis {
        geometry,
        alpha0,
        modes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(d1: f64, d2: f64) -> Geometry {
        Geometry::new(d1, d2).unwrap()
    }

    #[test]
    fn free_symmetric_guide() {
        let b = solve_modes(geom(1.0, 1.0), 0.0, 10).unwrap();
        for (i, m) in b.modes.iter().enumerate() {
            let n = (i + 1) as f64;
            let exact = (PI * n / 2.0).powi(2);
            assert!(
                (m.nu - exact).abs() <= 1e-12 * exact,
                "n={n}: {} vs {exact}",
                m.nu
            );
            let chi = if (i + 1) % 2 == 1 { 1.0 } else { 0.0 };
            assert!((m.chi0_sq - chi).abs() < 1e-12);
        }
    }

    #[test]
    fn free_asymmetric_guide() {
        let b = solve_modes(geom(1.0, 2.0), 0.0, 3).unwrap();
        for (i, m) in b.modes.iter().enumerate() {
            let n = (i + 1) as f64;
            assert!((m.nu - (PI * n / 3.0).powi(2)).abs() < 1e-12);
            let chi = 2.0 / 3.0 * (2.0 * PI * n / 3.0).sin().powi(2);
            assert!((m.chi0_sq - chi).abs() < 1e-12);
        }
    }

    #[test]
    fn residual_vanishes_on_free_mode() {
        for (d1, d2) in [(1.0, 1.0), (0.3, 1.7), (2.0, 0.5)] {
            let g = geom(d1, d2);
            let r = secular_residual(PI / g.width(), &g, 0.0).unwrap();
            assert!(r.abs() < 1e-14);
        }
        assert!(secular_residual(0.0, &geom(1.0, 1.0), 1.0).is_err());
        assert!(secular_residual(-1.0, &geom(1.0, 1.0), 1.0).is_err());
    }

    #[test]
    fn roots_are_zeros_of_residual() {
        let g = geom(0.7, 1.3);
        let b = solve_modes(g, 3.5, 30).unwrap();
        for m in &b.modes {
            let u = m.nu.sqrt();
            let h = 1e-7 * u;
            let lo = secular_residual(u - h, &g, 3.5).unwrap();
            let hi = secular_residual(u + h, &g, 3.5).unwrap();
            assert!(lo * hi <= 0.0, "no sign change around mode {}", m.n);
        }
    }

    #[test]
    fn symmetric_guide_has_odd_modes_with_node() {
        let b = solve_modes(geom(1.0, 1.0), 5.0, 8).unwrap();
        for m in b.modes.iter().filter(|m| m.n % 2 == 0) {
            assert!(m.chi0_sq.abs() < 1e-20);
            assert!((m.nu - (PI * m.n as f64 / 2.0).powi(2)).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_energy_threshold_branch() {
        let b = solve_modes(geom(1.0, 1.0), -2.0, 4).unwrap();
        assert_eq!(b.nu1(), 0.0);
        assert!((b.chi1_sq() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn negative_energy_branch() {
        let g = geom(1.0, 1.0);
        let b = solve_modes(g, -4.0, 4).unwrap();
        let t = (-b.nu1()).sqrt();
        assert!(b.nu1() < 0.0);
        assert!(g_hyp(t, &g, -4.0).abs() < 1e-10);
        assert!(b.modes.windows(2).all(|w| w[0].nu < w[1].nu));
    }

    #[test]
    fn h_bound_values() {
        let small = h_bound(1e-6, 1.0).unwrap();
        assert!((small - 0.75f64.sqrt()).abs() < 1e-9);
        assert!((h_bound(0.0, 1.0).unwrap() - 0.75f64.sqrt()).abs() < 1e-15);
        assert!(h_bound(PI, 1.0).unwrap() < 1e-7);
        let v = h_bound(10.0, 1.0).unwrap();
        let direct = 10f64.sqrt() * 10f64.sin().abs() / (20.0 - 20f64.sin()).sqrt();
        assert!(v > 0.0 && v <= 1.0);
        assert!((v - direct).abs() < 1e-15);
        assert!(h_bound(-1.0, 1.0).is_err());
    }

    #[test]
    fn n_max_too_small() {
        assert!(solve_modes(geom(1.0, 1.0), 0.0, 1).is_err());
    }
}
