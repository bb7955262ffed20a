//! Double integrals `int int d(x) d(y) g(|x - y|) dx dy` of the effective
//! perturbation `d = alpha - alpha0` for the few radial functions `g` the
//! expansions and bounds need. Piecewise-constant profiles use closed forms;
//! sampled profiles use Gauss rules split at `x = y`.

use crate::profile::{CouplingProfile, Piece};
use crate::quad::{self, phi1, phi1_prime, phi2, phi2_prime};

fn nonzero_pieces(profile: &CouplingProfile) -> Option<Vec<Piece>> {
    profile
        .pieces()
        .map(|p| p.into_iter().filter(|p| p.value != 0.0).collect())
}

/// Separation between two disjoint intervals.
fn gap(a: &Piece, b: &Piece) -> f64 {
    if a.hi <= b.lo {
        b.lo - a.hi
    } else {
        (a.lo - b.hi).max(0.0)
    }
}

fn sum_pairs(
    pieces: &[Piece],
    same: impl Fn(&Piece) -> f64,
    distinct: impl Fn(&Piece, &Piece) -> f64,
) -> f64 {
    let mut s = 0.0;
    for (i, a) in pieces.iter().enumerate() {
        s += a.value * a.value * same(a);
        for b in &pieces[i + 1..] {
            s += 2.0 * a.value * b.value * distinct(a, b);
        }
    }
    s
}

/// Outer nodes of the sampled fallback and the inner rule resolution.
const OUTER_PANELS: usize = 64;
const ORDER: usize = 10;

fn sampled_pairs(profile: &CouplingProfile, finest: f64, g: impl Fn(f64) -> f64 + Sync) -> f64 {
    let (lo, hi) = profile.support();
    let outer = quad::composite(lo, hi, OUTER_PANELS, ORDER);
    outer
        .iter()
        .map(|&(x, wx)| {
            let dx = profile.delta(x);
            if dx == 0.0 {
                return 0.0;
            }
            let mut inner = 0.0;
            for (a, b) in [(lo, x), (x, hi)] {
                if b - a <= 0.0 {
                    continue;
                }
                for (y, wy) in quad::graded(a, b, finest.min(b - a), ORDER) {
                    inner += wy * profile.delta(y) * g((x - y).abs());
                }
            }
            wx * dx * inner
        })
        .sum()
}

/// `int int d d e^{-k |x - y|}`.
pub fn pair_exp(profile: &CouplingProfile, k: f64) -> f64 {
    match nonzero_pieces(profile) {
        Some(p) => sum_pairs(
            &p,
            |a| 2.0 * a.len() * a.len() * phi2(k * a.len()),
            |a, b| {
                (-k * gap(a, b)).exp() * a.len() * b.len() * phi1(k * a.len()) * phi1(k * b.len())
            },
        ),
        None => sampled_pairs(profile, (0.1 / k.max(1e-12)).min(1.0), |r| (-k * r).exp()),
    }
}

/// `int int d d |x - y| e^{-k |x - y|}`.
pub fn pair_abs_exp(profile: &CouplingProfile, k: f64) -> f64 {
    match nonzero_pieces(profile) {
        Some(p) => sum_pairs(
            &p,
            |a| -2.0 * a.len().powi(3) * phi2_prime(k * a.len()),
            |a, b| {
                let (l1, l2, g) = (a.len(), b.len(), gap(a, b));
                let (p1, p2) = (phi1(k * l1), phi1(k * l2));
                l1 * l2
                    * (-k * g).exp()
                    * (g * p1 * p2 - l1 * phi1_prime(k * l1) * p2 - l2 * p1 * phi1_prime(k * l2))
            },
        ),
        None => sampled_pairs(profile, (0.1 / k.max(1e-12)).min(1.0), |r| {
            r * (-k * r).exp()
        }),
    }
}

/// `int int d d |x - y|`.
pub fn pair_abs(profile: &CouplingProfile) -> f64 {
    match nonzero_pieces(profile) {
        Some(p) => sum_pairs(
            &p,
            |a| a.len().powi(3) / 3.0,
            |a, b| a.len() * b.len() * (b.mid() - a.mid()).abs(),
        ),
        None => sampled_pairs(profile, 1.0, |r| r),
    }
}

/// `int int d d (x - y)^2`.
pub fn pair_sq(profile: &CouplingProfile) -> f64 {
    match nonzero_pieces(profile) {
        Some(p) => sum_pairs(
            &p,
            |a| a.len().powi(4) / 6.0,
            |a, b| {
                let m = b.mid() - a.mid();
                a.len() * b.len() * (m * m + (a.len().powi(2) + b.len().powi(2)) / 12.0)
            },
        ),
        None => sampled_pairs(profile, 1.0, |r| r * r),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(profile: &CouplingProfile, g: impl Fn(f64) -> f64) -> f64 {
        // midpoint rule on a fine grid, exact at the kink to O(h^2)
        let (lo, hi) = profile.support();
        let n = 1200;
        let h = (hi - lo) / n as f64;
        let xs: Vec<f64> = (0..n).map(|i| lo + (i as f64 + 0.5) * h).collect();
        let mut s = 0.0;
        for &x in &xs {
            for &y in &xs {
                s += profile.delta(x) * profile.delta(y) * g((x - y).abs());
            }
        }
        s * h * h
    }

    fn dipole() -> CouplingProfile {
        CouplingProfile::piecewise(
            0.0,
            vec![-1.0, 0.0, 1.0, 1.5, 2.0],
            vec![1.0, -1.0, 0.0, -0.5],
        )
        .unwrap()
    }

    #[test]
    fn closed_forms_match_brute_force() {
        let p = dipole();
        let k = 1.7;
        let cases: [(f64, f64); 4] = [
            (pair_exp(&p, k), brute(&p, |r| (-k * r).exp())),
            (pair_abs_exp(&p, k), brute(&p, |r| r * (-k * r).exp())),
            (pair_abs(&p), brute(&p, |r| r)),
            (pair_sq(&p), brute(&p, |r| r * r)),
        ];
        for (exact, approx) in cases {
            assert!(
                (exact - approx).abs() < 2e-5 * exact.abs().max(1.0),
                "{exact} {approx}"
            );
        }
    }

    #[test]
    fn derivative_relation() {
        let p = dipole();
        let (k, h) = (0.9, 1e-5);
        let fd = -(pair_exp(&p, k + h) - pair_exp(&p, k - h)) / (2.0 * h);
        assert!((fd - pair_abs_exp(&p, k)).abs() < 1e-8);
        let m = p.integral();
        assert!((pair_exp(&p, 0.0) - m * m).abs() < 1e-14);
    }

    #[test]
    fn sampled_fallback_matches_brute_force() {
        let rect = CouplingProfile::rect_well(0.0, 1.0, -1.0).unwrap();
        let smooth =
            CouplingProfile::sampled(0.0, 1.0, |x: f64| -(1.0 - x * x).max(0.0).powi(2)).unwrap();
        let k = 3.0;
        let b = brute(&smooth, |r| (-k * r).exp());
        assert!((pair_exp(&smooth, k) - b).abs() < 1e-5 * b.abs());
        let b = brute(&smooth, |r| r);
        assert!((pair_abs(&smooth) - b).abs() < 1e-5 * b.abs());
        assert!((pair_abs(&rect) - 8.0 / 3.0).abs() < 1e-14);
    }
}
