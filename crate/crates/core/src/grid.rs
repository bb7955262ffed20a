//! Cell grids over the support of the perturbation.
//!
//! Cells never straddle `x = 0` or a jump of the profile, and cells where the
//! perturbation vanishes are dropped: every kernel carries the factor
//! `|alpha - alpha0|^{1/2}` on both sides, so they contribute nothing.

use crate::error::{domain, Result};
use crate::profile::CouplingProfile;
use crate::quad;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub lo: f64,
    pub hi: f64,
    /// Cell average of the effective `alpha - alpha0`.
    pub delta: f64,
}

impl Cell {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    /// `sqrt(width * |delta|)`: the square-root factor times the
    /// normalization of the cell indicator.
    pub fn weight(&self) -> f64 {
        (self.width() * self.delta.abs()).sqrt()
    }

    pub fn sign(&self) -> f64 {
        if self.delta < 0.0 {
            -1.0
        } else {
            1.0
        }
    }
}

#[derive(Debug, Clone)]
pub struct Grid {
    pub cells: Vec<Cell>,
    /// Half-length of the window `[-X, X]` containing the cells.
    pub half_length: f64,
}

impl Grid {
    /// Grid with roughly `n_cells` cells on the nonzero part of the profile.
    pub fn for_profile(profile: &CouplingProfile, n_cells: usize) -> Result<Self> {
        if n_cells < 2 {
            return domain("grid needs at least two cells");
        }
        let (lo, hi) = profile.support();
        let half_length = lo.abs().max(hi.abs());
        let mut cells = Vec::new();
        match profile.pieces() {
            Some(pieces) => {
                let mut segments = Vec::new();
                for p in pieces.iter().filter(|p| p.value != 0.0) {
                    if p.lo < 0.0 && p.hi > 0.0 {
                        segments.push((p.lo, 0.0, p.value));
                        segments.push((0.0, p.hi, p.value));
                    } else {
                        segments.push((p.lo, p.hi, p.value));
                    }
                }
                let total: f64 = segments.iter().map(|s| s.1 - s.0).sum();
                if total == 0.0 {
                    return Ok(Self { cells, half_length });
                }
                let target = total / n_cells as f64;
                for (a, b, v) in segments {
                    let m = ((b - a) / target).round().max(1.0) as usize;
                    let h = (b - a) / m as f64;
                    for k in 0..m {
                        let c_lo = a + k as f64 * h;
                        let c_hi = if k + 1 == m {
                            b
                        } else {
                            a + (k + 1) as f64 * h
                        };
                        cells.push(Cell {
                            lo: c_lo,
                            hi: c_hi,
                            delta: v,
                        });
                    }
                }
            }
            None => {
                let half = n_cells.div_ceil(2);
                let h = half_length / half as f64;
                let (gx, gw) = quad::gauss_legendre(4);
                for k in 0..2 * half {
                    let c_lo = -half_length + k as f64 * h;
                    let c_hi = c_lo + h;
                    let avg: f64 = gx
                        .iter()
                        .zip(&gw)
                        .map(|(x, w)| 0.5 * w * profile.delta(c_lo + 0.5 * h * (x + 1.0)))
                        .sum();
                    if avg != 0.0 {
                        cells.push(Cell {
                            lo: c_lo,
                            hi: c_hi,
                            delta: avg,
                        });
                    }
                }
            }
        }
        Ok(Self { cells, half_length })
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn min_width(&self) -> f64 {
        self.cells
            .iter()
            .map(Cell::width)
            .fold(f64::INFINITY, f64::min)
    }

    /// Sum of cell widths (the base-rule weight total).
    pub fn total_weight(&self) -> f64 {
        self.cells.iter().map(Cell::width).sum()
    }

    pub fn signs(&self) -> Vec<f64> {
        self.cells.iter().map(Cell::sign).collect()
    }

    pub fn is_sign_definite(&self) -> bool {
        self.cells.iter().all(|c| c.delta <= 0.0) || self.cells.iter().all(|c| c.delta >= 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rect_well_grid_is_uniform_and_split_at_zero() {
        let p = CouplingProfile::rect_well(0.0, 1.0, -1.0).unwrap();
        let g = Grid::for_profile(&p, 400).unwrap();
        assert_eq!(g.len(), 400);
        assert!((g.total_weight() - 2.0).abs() < 1e-13);
        assert!(g.cells.iter().all(|c| c.lo >= 0.0 || c.hi <= 0.0));
        assert!(g.cells.iter().all(|c| (c.width() - 0.005).abs() < 1e-14));
    }

    #[test]
    fn zero_pieces_are_dropped() {
        let p = CouplingProfile::piecewise(0.0, vec![-3.0, -2.0, 2.0, 3.0], vec![-1.0, 0.0, -1.0])
            .unwrap();
        let g = Grid::for_profile(&p, 20).unwrap();
        assert_eq!(g.len(), 20);
        assert!(g.cells.iter().all(|c| c.center().abs() > 2.0));
        assert_eq!(g.half_length, 3.0);
    }
}
