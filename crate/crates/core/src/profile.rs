//! Coupling profiles `alpha(x)` of the barrier.
//!
//! The effective perturbation seen by every solver is
//! `lambda * (alpha(x / sigma) - alpha0)`.

use std::fmt;
use std::sync::Arc;

use crate::error::{domain, Result};
use crate::quad;

pub type DeltaFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Perturbation {
    /// `alpha = alpha1` on `|x| < a`, `alpha0` elsewhere.
    RectWell { a: f64, alpha1: f64 },
    /// `alpha = values[i]` on `(breaks[i], breaks[i+1])`, `alpha0` elsewhere.
    Piecewise { breaks: Vec<f64>, values: Vec<f64> },
    /// `alpha(x) - alpha0` given directly, vanishing outside `[-support, support]`.
    Sampled { delta: DeltaFn, support: f64 },
}

impl fmt::Debug for Perturbation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::RectWell { a, alpha1 } => write!(f, "RectWell {{ a: {a}, alpha1: {alpha1} }}"),
            Self::Piecewise { breaks, values } => {
                write!(f, "Piecewise {{ breaks: {breaks:?}, values: {values:?} }}")
            }
            Self::Sampled { support, .. } => write!(f, "Sampled {{ support: {support} }}"),
        }
    }
}

/// Constant piece of the effective perturbation on `(lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub value: f64,
}

impl Piece {
    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

#[derive(Debug, Clone)]
pub struct CouplingProfile {
    pub alpha0: f64,
    pub shape: Perturbation,
    pub lambda: f64,
    pub sigma: f64,
    /// Exponent of the `L^{1+eps}` integrability assumption; informational.
    pub eps: f64,
}

/// Integrals of `|delta|`, `|x||delta|`, `x^2 |delta|` and `delta`.
#[derive(Debug, Clone, Copy)]
pub struct Moments {
    pub l1: f64,
    pub first: f64,
    pub second: f64,
    pub mean: f64,
}

impl CouplingProfile {
    pub fn new(alpha0: f64, shape: Perturbation) -> Result<Self> {
        match &shape {
            Perturbation::RectWell { a, alpha1 } => {
                if !(*a > 0.0) || !alpha1.is_finite() {
                    return domain(format!("rectangular well needs a > 0, got a={a}"));
                }
            }
            Perturbation::Piecewise { breaks, values } => {
                if breaks.len() != values.len() + 1 || values.is_empty() {
                    return domain("piecewise profile needs len(breaks) = len(values) + 1 >= 2");
                }
                if breaks.windows(2).any(|w| !(w[1] > w[0])) {
                    return domain("piecewise breaks must be strictly increasing");
                }
                if breaks.iter().chain(values).any(|v| !v.is_finite()) {
                    return domain("piecewise profile must be finite");
                }
            }
            Perturbation::Sampled { support, .. } => {
                if !(*support > 0.0 && support.is_finite()) {
                    return domain("sampled profile needs a finite positive support");
                }
            }
        }
        if !alpha0.is_finite() {
            return domain("alpha0 must be finite");
        }
        Ok(Self {
            alpha0,
            shape,
            lambda: 1.0,
            sigma: 1.0,
            eps: 1.0,
        })
    }

    pub fn rect_well(alpha0: f64, a: f64, alpha1: f64) -> Result<Self> {
        Self::new(alpha0, Perturbation::RectWell { a, alpha1 })
    }

    pub fn piecewise(alpha0: f64, breaks: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::new(alpha0, Perturbation::Piecewise { breaks, values })
    }

    pub fn sampled(
        alpha0: f64,
        support: f64,
        delta: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        Self::new(
            alpha0,
            Perturbation::Sampled {
                delta: Arc::new(delta),
                support,
            },
        )
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    /// Moves the base coupling to `alpha0`, keeping `alpha - alpha0` fixed.
    pub fn shift_base(&mut self, alpha0: f64) {
        let d = alpha0 - self.alpha0;
        match &mut self.shape {
            Perturbation::RectWell { alpha1, .. } => *alpha1 += d,
            Perturbation::Piecewise { values, .. } => values.iter_mut().for_each(|v| *v += d),
            Perturbation::Sampled { .. } => {}
        }
        self.alpha0 = alpha0;
    }

    /// Bare `alpha(x) - alpha0`, before scaling.
    pub fn delta_bare(&self, x: f64) -> f64 {
        match &self.shape {
            Perturbation::RectWell { a, alpha1 } => {
                if x.abs() < *a {
                    alpha1 - self.alpha0
                } else {
                    0.0
                }
            }
            Perturbation::Piecewise { breaks, values } => {
                if x <= breaks[0] || x >= *breaks.last().unwrap() {
                    return 0.0;
                }
                let i = breaks.partition_point(|&b| b <= x) - 1;
                values[i.min(values.len() - 1)] - self.alpha0
            }
            Perturbation::Sampled { delta, support } => {
                if x.abs() > *support {
                    0.0
                } else {
                    delta(x)
                }
            }
        }
    }

    /// Effective `lambda (alpha(x / sigma) - alpha0)`.
    pub fn delta(&self, x: f64) -> f64 {
        self.lambda * self.delta_bare(x / self.sigma)
    }

    /// Effective `alpha(x)`.
    pub fn alpha(&self, x: f64) -> f64 {
        self.alpha0 + self.delta(x)
    }

    fn bare_support(&self) -> (f64, f64) {
        match &self.shape {
            Perturbation::RectWell { a, .. } => (-a, *a),
            Perturbation::Piecewise { breaks, .. } => (breaks[0], *breaks.last().unwrap()),
            Perturbation::Sampled { support, .. } => (-support, *support),
        }
    }

    /// Effective support interval.
    pub fn support(&self) -> (f64, f64) {
        let (lo, hi) = self.bare_support();
        (self.sigma * lo, self.sigma * hi)
    }

    /// Constant pieces of the effective perturbation (`None` for sampled profiles).
    pub fn pieces(&self) -> Option<Vec<Piece>> {
        let (lam, sig) = (self.lambda, self.sigma);
        match &self.shape {
            Perturbation::RectWell { a, alpha1 } => Some(vec![Piece {
                lo: -sig * a,
                hi: sig * a,
                value: lam * (alpha1 - self.alpha0),
            }]),
            Perturbation::Piecewise { breaks, values } => Some(
                values
                    .iter()
                    .enumerate()
                    .map(|(i, v)| Piece {
                        lo: sig * breaks[i],
                        hi: sig * breaks[i + 1],
                        value: lam * (v - self.alpha0),
                    })
                    .collect(),
            ),
            Perturbation::Sampled { .. } => None,
        }
    }

    /// Quadrature rule adapted to the effective profile: Gauss nodes per
    /// constant piece, or a composite rule over the sampled support.
    pub fn quadrature(&self, order: usize) -> Vec<(f64, f64)> {
        match self.pieces() {
            Some(pieces) => pieces
                .iter()
                .flat_map(|p| quad::composite(p.lo, p.hi, 1, order))
                .collect(),
            None => {
                let (lo, hi) = self.support();
                quad::composite(lo, hi, 64, order)
            }
        }
    }

    pub fn moments(&self) -> Moments {
        let mut m = Moments {
            l1: 0.0,
            first: 0.0,
            second: 0.0,
            mean: 0.0,
        };
        if let Some(pieces) = self.pieces() {
            for p in pieces {
                let v = p.value;
                m.l1 += v.abs() * p.len();
                m.mean += v * p.len();
                m.first += v.abs() * abs_moment1(p.lo, p.hi);
                m.second += v.abs() * (p.hi.powi(3) - p.lo.powi(3)) / 3.0;
            }
        } else {
            for (x, w) in self.quadrature(8) {
                let v = self.delta(x);
                m.l1 += w * v.abs();
                m.mean += w * v;
                m.first += w * x.abs() * v.abs();
                m.second += w * x * x * v.abs();
            }
        }
        m
    }

    /// `int (alpha - alpha0) dx` of the effective perturbation.
    pub fn integral(&self) -> f64 {
        self.moments().mean
    }

    /// Integrability flags `(a1), (a2), (a2')`: finite L1, first and second moments.
    pub fn check_integrability(&self) -> Result<Moments> {
        let m = self.moments();
        if !(m.l1.is_finite() && m.first.is_finite() && m.second.is_finite()) {
            return domain("perturbation is not integrable with the required moments");
        }
        Ok(m)
    }

    pub fn is_trivial(&self) -> bool {
        self.lambda == 0.0 || self.moments().l1 == 0.0
    }

    /// Extremes of the effective perturbation.
    pub fn range(&self) -> (f64, f64) {
        let vals: Vec<f64> = match self.pieces() {
            Some(p) => p.iter().map(|p| p.value).collect(),
            None => self
                .quadrature(8)
                .iter()
                .map(|(x, _)| self.delta(*x))
                .collect(),
        };
        vals.iter()
            .fold((0.0f64, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Sign-definite attractive replacement with the given map of the effective delta.
    fn mapped(&self, map: fn(f64) -> f64) -> Self {
        let shape = match self.pieces() {
            Some(pieces) => {
                let mut breaks = vec![pieces[0].lo];
                breaks.extend(pieces.iter().map(|p| p.hi));
                Perturbation::Piecewise {
                    breaks,
                    values: pieces.iter().map(|p| self.alpha0 + map(p.value)).collect(),
                }
            }
            None => {
                let this = self.clone();
                let (_, hi) = self.support();
                Perturbation::Sampled {
                    delta: Arc::new(move |x| map(this.delta(x))),
                    support: hi,
                }
            }
        };
        Self {
            alpha0: self.alpha0,
            shape,
            lambda: 1.0,
            sigma: 1.0,
            eps: self.eps,
        }
    }

    /// Profile `alpha0 - gamma` with `gamma = max(0, -(alpha - alpha0))`.
    pub fn negative_part(&self) -> Self {
        self.mapped(|v| v.min(0.0))
    }

    /// Profile `alpha0 - |alpha - alpha0|`.
    pub fn attractive_majorant(&self) -> Self {
        self.mapped(|v| -v.abs())
    }

    /// Sum of squared jumps of the effective perturbation (including the
    /// jumps to zero at the ends of the support).
    pub fn jump_sq_sum(&self) -> f64 {
        match self.pieces() {
            Some(pieces) => {
                let mut s = 0.0;
                let mut prev_hi = f64::NEG_INFINITY;
                let mut prev_val = 0.0;
                for p in &pieces {
                    if (p.lo - prev_hi).abs() > 1e-14 * (1.0 + p.lo.abs()) {
                        s += prev_val * prev_val;
                        prev_val = 0.0;
                    }
                    let j = p.value - prev_val;
                    s += j * j;
                    prev_val = p.value;
                    prev_hi = p.hi;
                }
                s + prev_val * prev_val
            }
            None => {
                let (lo, hi) = self.support();
                let a = self.delta(lo * (1.0 - 1e-12));
                let b = self.delta(hi * (1.0 - 1e-12));
                a * a + b * b
            }
        }
    }

    /// `int delta^2 dx`.
    pub fn l2_sq(&self) -> f64 {
        match self.pieces() {
            Some(p) => p.iter().map(|p| p.value * p.value * p.len()).sum(),
            None => self
                .quadrature(8)
                .iter()
                .map(|(x, w)| w * self.delta(*x).powi(2))
                .sum(),
        }
    }
}

/// `int_lo^hi |x| dx`.
fn abs_moment1(lo: f64, hi: f64) -> f64 {
    let f = |x: f64| 0.5 * x * x.abs();
    f(hi) - f(lo)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rect_well_moments() {
        let p = CouplingProfile::rect_well(0.0, 1.0, -1.0).unwrap();
        let m = p.moments();
        assert_eq!(m.mean, -2.0);
        assert_eq!(m.l1, 2.0);
        assert_eq!(m.first, 1.0);
        assert!((m.second - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(p.jump_sq_sum(), 2.0);
    }

    #[test]
    fn scaling_acts_on_support_and_strength() {
        let p = CouplingProfile::rect_well(1.0, 2.0, 0.0)
            .unwrap()
            .with_lambda(0.5)
            .with_sigma(0.25);
        assert_eq!(p.support(), (-0.5, 0.5));
        assert_eq!(p.delta(0.4), -0.5);
        assert_eq!(p.delta(0.6), 0.0);
        assert!((p.integral() + 0.5).abs() < 1e-15);
    }

    #[test]
    fn dipole_is_mean_zero_and_majorants() {
        let p = CouplingProfile::piecewise(0.0, vec![-1.0, 0.0, 1.0], vec![1.0, -1.0]).unwrap();
        assert_eq!(p.integral(), 0.0);
        assert_eq!(p.jump_sq_sum(), 6.0);
        let g = p.negative_part();
        assert_eq!(g.delta(-0.5), 0.0);
        assert_eq!(g.delta(0.5), -1.0);
        let m = p.attractive_majorant();
        assert_eq!(m.delta(-0.5), -1.0);
        assert_eq!(m.range(), (-1.0, 0.0));
    }

    #[test]
    fn sampled_profile_quadrature() {
        let p = CouplingProfile::sampled(0.0, 1.0, |x| -(1.0 - x * x)).unwrap();
        assert!((p.integral() + 4.0 / 3.0).abs() < 1e-13);
        assert!((p.jump_sq_sum()).abs() < 1e-10);
        assert!((p.l2_sq() - 16.0 / 15.0).abs() < 1e-13);
    }

    #[test]
    fn rejects_malformed() {
        assert!(CouplingProfile::rect_well(0.0, -1.0, 0.0).is_err());
        assert!(CouplingProfile::piecewise(0.0, vec![0.0, 1.0], vec![]).is_err());
        assert!(CouplingProfile::piecewise(0.0, vec![1.0, 0.0], vec![1.0]).is_err());
    }
}
