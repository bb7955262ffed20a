//! Gauss–Legendre rules and a few stable special functions shared by the
//! closed-form integrals.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Composite Gauss–Legendre rule on `[lo, hi]`: `panels` panels of `order` nodes.
pub fn composite(lo: f64, hi: f64, panels: usize, order: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(order);
    let h = (hi - lo) / panels as f64;
    let mut out = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let a = lo + p as f64 * h;
        for (xi, wi) in x.iter().zip(&w) {
            out.push((a + 0.5 * h * (xi + 1.0), 0.5 * h * wi));
        }
    }
    out
}

/// Rule on `[lo, hi]` with panels graded geometrically toward both ends,
/// resolving boundary layers down to width `finest`.
pub fn graded(lo: f64, hi: f64, finest: f64, order: usize) -> Vec<(f64, f64)> {
    let len = hi - lo;
    let mut breaks = vec![0.0];
    let mut s = finest.min(len / 4.0);
    while s < len / 4.0 {
        breaks.push(s);
        s *= 2.0;
    }
    let half = len / 2.0;
    let mut all: Vec<f64> = breaks.to_vec();
    let interior = 8;
    let last = *breaks.last().unwrap();
    for k in 1..=interior {
        all.push(last + (half - last) * k as f64 / interior as f64);
    }
    let mut pts: Vec<f64> = all.iter().map(|&b| lo + b).collect();
    for &b in all.iter().rev().skip(1) {
        pts.push(hi - b);
    }
    let (x, w) = gauss_legendre(order);
    let mut out = Vec::new();
    for win in pts.windows(2) {
        let (a, b) = (win[0], win[1]);
        if b <= a {
            continue;
        }
        for (xi, wi) in x.iter().zip(&w) {
            out.push((a + 0.5 * (b - a) * (xi + 1.0), 0.5 * (b - a) * wi));
        }
    }
    out
}

/// `(1 - e^{-t}) / t`.
pub fn phi1(t: f64) -> f64 {
    if t.abs() < 1e-4 {
        1.0 - t / 2.0 + t * t / 6.0 - t * t * t / 24.0
    } else {
        -(-t).exp_m1() / t
    }
}

/// `ln phi1(t)`.
pub fn ln_phi1(t: f64) -> f64 {
    if t.abs() < 1e-3 {
        let t2 = t * t;
        -t / 2.0 + t2 / 24.0 - t2 * t2 / 2880.0
    } else {
        phi1(t).ln()
    }
}

/// `phi1'(t) = (e^{-t}(t + 1) - 1) / t^2`.
pub fn phi1_prime(t: f64) -> f64 {
    if t.abs() < 1e-2 {
        -0.5 + t / 3.0 - t * t / 8.0 + t * t * t / 30.0 - t * t * t * t / 144.0
    } else {
        ((-t).exp() * (t + 1.0) - 1.0) / (t * t)
    }
}

/// `(t - 1 + e^{-t}) / t^2`.
pub fn phi2(t: f64) -> f64 {
    if t.abs() < 1e-2 {
        0.5 - t / 6.0 + t * t / 24.0 - t * t * t / 120.0 + t * t * t * t / 720.0
    } else {
        (t + (-t).exp_m1()) / (t * t)
    }
}

/// `phi2'(t) = ((1 - e^{-t}) t - 2 (t - 1 + e^{-t})) / t^3`.
pub fn phi2_prime(t: f64) -> f64 {
    if t.abs() < 1e-2 {
        -1.0 / 6.0 + t / 12.0 - t * t / 40.0 + t * t * t / 180.0 - t * t * t * t / 1008.0
    } else {
        (-(-t).exp_m1() * t - 2.0 * (t + (-t).exp_m1())) / (t * t * t)
    }
}

/// `sinh(t) / t`.
pub fn sinhc(t: f64) -> f64 {
    if t.abs() < 1e-4 {
        1.0 + t * t / 6.0
    } else {
        t.sinh() / t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_integrates_polynomials() {
        let (x, w) = gauss_legendre(8);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((s - 2.0 / 15.0).abs() < 1e-14);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn graded_rule_integrates_boundary_layer() {
        let rule = graded(0.0, 2.0, 1e-4, 12);
        let k = 1000.0;
        let s: f64 = rule.iter().map(|(x, w)| w * (-k * x).exp()).sum();
        let exact = (1.0 - (-2.0 * k).exp()) / k;
        assert!((s - exact).abs() < 1e-12 * exact);
        let len: f64 = rule.iter().map(|p| p.1).sum();
        assert!((len - 2.0).abs() < 1e-13);
    }

    #[test]
    fn series_branches_are_continuous() {
        for f in [phi1, ln_phi1, phi1_prime, phi2, phi2_prime, sinhc] {
            for &t in &[1e-4, 1e-3, 1e-2] {
                let a = f(t * (1.0 - 1e-9));
                let b = f(t * (1.0 + 1e-9));
                assert!((a - b).abs() < 1e-11, "jump at {t}: {a} {b}");
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for &t in &[0.005, 0.3, 2.0, 7.0] {
            let h = 1e-6;
            let fd = (phi1(t + h) - phi1(t - h)) / (2.0 * h);
            assert!((fd - phi1_prime(t)).abs() < 1e-8);
            let fd = (phi2(t + h) - phi2(t - h)) / (2.0 * h);
            assert!((fd - phi2_prime(t)).abs() < 1e-8);
        }
    }
}
