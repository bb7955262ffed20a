//! Weak-coupling expansions of `kappa1 = sqrt(nu_1 - E)`.
//!
//! For the coupling multiplier,
//! `kappa1 = c1 lambda + c2 lambda^2 + O(lambda^3)` with
//! `c1 = -chi_1^2/2 int d` and
//! `c2 = -1/4 (chi_1^4 int int d d |x - y| - chi_1^2 sum_n chi_n^2 J(kt_n) / kt_n)`,
//! where `J(k) = int int d d e^{-k |x - y|}` and `kt_n = sqrt(nu_n - nu_1)`.
//!
//! For the support scaling `d(x / sigma)`, the first-order term is `sigma c1`
//! and the second-order term `sigma^2 chi_1^2 / 4 sum_n chi_n^2 J(sigma kt_n) / kt_n`
//! keeps the exponential unexpanded and has no `|x - y|` part.

use rayon::prelude::*;

use crate::error::Result;
use crate::pairs::{pair_abs, pair_exp};
use crate::profile::CouplingProfile;
use crate::transverse::{Geometry, ModeBasis};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionCoefficients {
    pub c1_lambda: f64,
    pub c2_lambda: f64,
    pub c1_sigma: f64,
    /// `(sigma, second-order coefficient at sigma)`; the term is `sigma^2` times it.
    pub c2_sigma: Option<(f64, f64)>,
    /// The `c` of `E = nu_1 - c lambda^2 + O(lambda^3)`, when a bound state exists.
    pub c_our_result: Option<f64>,
    /// Number of modes summed explicitly.
    pub n_modes: usize,
    /// Analytic estimate of the discarded part of the mode sum in `c2`.
    pub tail_estimate: f64,
}

impl ExpansionCoefficients {
    /// `c1 lambda + c2 lambda^2`.
    pub fn predict_lambda(&self, lambda: f64) -> f64 {
        self.c1_lambda * lambda + self.c2_lambda * lambda * lambda
    }

    /// `sigma c1 + sigma^2 c2(sigma)`, if the scaled coefficient is available for `sigma`.
    pub fn predict_sigma(&self) -> Option<f64> {
        self.c2_sigma.map(|(s, c2)| self.c1_sigma * s + c2 * s * s)
    }

    /// First-order-only prediction `c1 lambda`.
    pub fn first_order_lambda(&self, lambda: f64) -> f64 {
        self.c1_lambda * lambda
    }
}

/// `sum_{n >= 2} chi_n^2 J(s kt_n) / kt_n` with the estimate of the part
/// beyond the basis.
fn mode_sum(bare: &CouplingProfile, basis: &ModeBasis, s: f64) -> Result<(f64, f64)> {
    let kt = basis.kappa_tilde();
    // collected before summing so the result does not depend on scheduling
    let terms: Vec<f64> = basis.modes[1..]
        .par_iter()
        .zip(&kt[1..])
        .map(|(m, &k)| {
            if m.chi0_sq == 0.0 {
                0.0
            } else {
                m.chi0_sq * pair_exp(bare, s * k) / k
            }
        })
        .collect();
    let explicit: f64 = terms.iter().sum();
    // J(k) = 2 int d^2 / k - sum jumps^2 / k^2 + O(k^-3)
    let t = basis.discarded_power_sums(1.0, &[2.0, 3.0], 32)?;
    let est = 2.0 * bare.l2_sq() / s * t[0] - bare.jump_sq_sum() / (s * s) * t[1];
    Ok((explicit + est, est))
}

/// Coefficients of the expansion in the coupling multiplier. The profile's
/// own `lambda` is ignored (the expansion is in that multiplier).
pub fn weak_coupling_expansion(
    profile: &CouplingProfile,
    basis: &ModeBasis,
) -> Result<ExpansionCoefficients> {
    profile.check_integrability()?;
    let bare = profile.clone().with_lambda(1.0);
    let chi1 = basis.chi1_sq();
    let integral = bare.integral();
    let c1 = -0.5 * chi1 * integral;
    let (sum, tail) = mode_sum(&bare, basis, 1.0)?;
    let c2 = -0.25 * (chi1 * chi1 * pair_abs(&bare) - chi1 * sum);
    Ok(ExpansionCoefficients {
        c1_lambda: c1,
        c2_lambda: c2,
        c1_sigma: c1,
        c2_sigma: None,
        c_our_result: (integral <= 0.0).then_some(c1 * c1),
        n_modes: basis.len(),
        tail_estimate: tail,
    })
}

/// Coefficients of the expansion in the support scale `sigma`, with the
/// second-order term evaluated at the given `sigma`. The profile's own
/// `sigma` is ignored.
pub fn scaled_expansion(
    profile: &CouplingProfile,
    basis: &ModeBasis,
    sigma: f64,
) -> Result<ExpansionCoefficients> {
    if !(sigma > 0.0 && sigma <= 1.0) {
        return crate::error::domain("sigma must lie in (0, 1]");
    }
    let bare = profile.clone().with_sigma(1.0);
    let mut c = weak_coupling_expansion(&bare, basis)?;
    // the sigma expansion keeps the profile's own multiplier
    let chi1 = basis.chi1_sq();
    c.c1_sigma = -0.5 * chi1 * bare.integral();
    let (sum, tail) = mode_sum(&bare, basis, sigma)?;
    c.c2_sigma = Some((sigma, 0.25 * chi1 * sum));
    c.tail_estimate = tail;
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Existence {
    pub exists: bool,
    pub integral: f64,
    /// The integral is within the quadrature tolerance of zero.
    pub borderline: bool,
}

/// Weak-coupling existence criterion: a bound state exists for all small
/// multipliers iff `int (alpha - alpha0) dx <= 0`.
pub fn existence_criterion(profile: &CouplingProfile) -> Existence {
    let integral = profile.clone().with_lambda(1.0).integral();
    let borderline = integral.abs() <= 1e-12;
    Existence {
        exists: integral <= 0.0 || borderline,
        integral,
        borderline,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeRow {
    pub alpha0: f64,
    pub nu1: f64,
    pub chi1_sq: f64,
    pub first: f64,
    pub second: f64,
}

/// First and second terms of the scaled expansion as the base coupling
/// grows toward the Dirichlet limit. The perturbation `alpha - alpha0` is
/// held fixed. Only reports trends.
pub fn dirichlet_probe(
    geometry: Geometry,
    profile: &CouplingProfile,
    alpha0s: &[f64],
    sigma: f64,
    n_modes: usize,
) -> Result<Vec<ProbeRow>> {
    alpha0s
        .iter()
        .map(|&a0| {
            let mut p = profile.clone();
            p.shift_base(a0);
            let basis = ModeBasis::solve(geometry, a0, n_modes)?;
            let c = scaled_expansion(&p, &basis, sigma)?;
            let (_, c2) = c.c2_sigma.unwrap();
            Ok(ProbeRow {
                alpha0: a0,
                nu1: basis.nu1(),
                chi1_sq: basis.chi1_sq(),
                first: c.c1_sigma * sigma,
                second: c2 * sigma * sigma,
            })
        })
        .collect()
}

/// Least-squares slope of `ln y` against `ln x`; `None` with fewer than two
/// usable points.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if logs.len() < 2 {
        return None;
    }
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn free_basis(n: usize) -> ModeBasis {
        ModeBasis::solve(Geometry::new(1.0, 1.0).unwrap(), 0.0, n).unwrap()
    }

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = [0.1, 0.2, 0.4]
            .iter()
            .map(|&x| (x, 3.0 * x * x * x))
            .collect();
        assert!((loglog_slope(&pts).unwrap() - 3.0).abs() < 1e-12);
        assert!(loglog_slope(&pts[..1]).is_none());
    }

    #[test]
    fn rect_well_first_order() {
        let b = free_basis(200);
        let p = CouplingProfile::rect_well(0.0, 1.0, -1.0).unwrap();
        let c = weak_coupling_expansion(&p, &b).unwrap();
        assert!((c.c1_lambda - 1.0).abs() < 1e-12);
        assert_eq!(c.c_our_result, Some(c.c1_lambda * c.c1_lambda));
        assert!(c.c2_lambda < 0.0);
    }

    #[test]
    fn trivial_profile_has_zero_coefficients() {
        let b = free_basis(64);
        let p = CouplingProfile::rect_well(0.0, 1.0, 0.0).unwrap();
        let c = weak_coupling_expansion(&p, &b).unwrap();
        assert_eq!((c.c1_lambda, c.c2_lambda), (0.0, 0.0));
    }

    #[test]
    fn mode_sum_converges_with_truncation() {
        let p = CouplingProfile::rect_well(0.0, 1.0, -1.0).unwrap();
        let a = weak_coupling_expansion(&p, &free_basis(2000))
            .unwrap()
            .c2_lambda;
        let b = weak_coupling_expansion(&p, &free_basis(4000))
            .unwrap()
            .c2_lambda;
        assert!((a - b).abs() < 1e-8, "{a} {b}");
    }

    #[test]
    fn mean_zero_dipole_has_positive_second_order() {
        let b = free_basis(2000);
        let p = CouplingProfile::piecewise(0.0, vec![-1.0, 0.0, 1.0], vec![1.0, -1.0]).unwrap();
        let c = weak_coupling_expansion(&p, &b).unwrap();
        assert!(c.c1_lambda.abs() < 1e-15);
        assert!(c.c2_lambda > 0.0);
        let e = existence_criterion(&p);
        assert!(e.exists && e.borderline);
        assert!(!existence_criterion(&CouplingProfile::rect_well(0.0, 1.0, 0.5).unwrap()).exists);
    }

    #[test]
    fn scaled_first_order_matches_lambda_expansion_at_unit_scale() {
        let b = free_basis(500);
        let p = CouplingProfile::rect_well(0.0, 1.0, -1.0).unwrap();
        let c = scaled_expansion(&p, &b, 1.0).unwrap();
        assert_eq!(c.c1_sigma, c.c1_lambda);
        assert!(scaled_expansion(&p, &b, 0.0).is_err());
    }
}
