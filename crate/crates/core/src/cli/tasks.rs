//! One runner per task. Each evaluates every sweep point in the worker pool
//! and assembles rows in sweep order.

use rayon::prelude::*;

use super::config::{Axis, Resolved, SknStrategy, Task};
use crate::asymptotics::{loglog_slope, scaled_expansion, weak_coupling_expansion};
use crate::bounds::{
    bracketing_bound, skn_bound_general, skn_bound_rectwell, Estimate, Strategy, SCHATTEN_KAPPA1,
};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kernel::{assemble, OperatorKind};
use crate::oracle::{strip_fd, FdConfig};
use crate::profile::{CouplingProfile, Perturbation};
use crate::spectrum::{
    basis_for, count_below, extrapolated_bound_states, extrapolated_ground_state, find_bound_states,
};
use crate::transverse::ModeBasis;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    F(f64),
    I(i64),
    B(bool),
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct TaskResult {
    pub task: Task,
    pub table: Table,
    /// Plot-ready columns; only numeric cells.
    pub plot: Table,
    pub checks: Vec<Check>,
}

fn check(name: &str, passed: bool, detail: impl Into<String>) -> Check {
    Check {
        name: name.into(),
        passed,
        detail: detail.into(),
    }
}

fn columns(axis: Axis, rest: &[&str]) -> Vec<String> {
    std::iter::once(axis.name())
        .chain(rest.iter().copied())
        .map(String::from)
        .collect()
}

fn sweep_cell(r: &Resolved, v: f64) -> Cell {
    match r.axis {
        Axis::None => Cell::I(0),
        _ => Cell::F(v),
    }
}

fn opt(v: Option<f64>) -> Cell {
    v.map(Cell::F).unwrap_or(Cell::Empty)
}

/// Profile at one sweep point.
pub fn point_profile(r: &Resolved, v: f64) -> Result<CouplingProfile> {
    let base = &r.profile;
    let rect = |a: f64, alpha1: f64| -> Result<CouplingProfile> {
        Ok(CouplingProfile::rect_well(base.alpha0, a, alpha1)?
            .with_lambda(base.lambda)
            .with_sigma(base.sigma))
    };
    match (r.axis, r.rect) {
        (Axis::None, _) => Ok(base.clone()),
        (Axis::Lambda, _) => Ok(base.clone().with_lambda(v)),
        (Axis::Sigma, _) => Ok(base.clone().with_sigma(v)),
        (Axis::Alpha0, _) => {
            let mut p = base.clone();
            p.shift_base(v);
            Ok(p)
        }
        (Axis::A, Some((_, alpha1))) => rect(v, alpha1),
        (Axis::Alpha1, Some((a, _))) => rect(a, v),
        _ => Err(Error::Domain(format!(
            "axis {} needs a rectwell profile",
            r.axis.name()
        ))),
    }
}

fn point_basis(r: &Resolved, p: &CouplingProfile) -> Result<ModeBasis> {
    match r.numerics.n_modes {
        Some(n) => ModeBasis::solve(r.geometry, p.alpha0, n),
        None => basis_for(p, r.geometry, &r.numerics.solver()),
    }
}

fn per_point<T: Send>(
    r: &Resolved,
    f: impl Fn(f64, &CouplingProfile) -> Result<T> + Sync,
) -> Result<Vec<(f64, T)>> {
    r.points
        .par_iter()
        .map(|&v| {
            let p = point_profile(r, v)?;
            Ok((v, f(v, &p)?))
        })
        .collect()
}

pub fn run_task(task: Task, r: &Resolved) -> Result<TaskResult> {
    match task {
        Task::Modes => modes(r),
        Task::Spectrum => spectrum(r),
        Task::Asymptotics => asymptotics(r),
        Task::Bounds => bounds(r),
        Task::OracleValidate => oracle_validate(r),
        Task::HsScaling => hs_scaling(r),
    }
}

fn modes(r: &Resolved) -> Result<TaskResult> {
    let out = per_point(r, |_, p| {
        ModeBasis::solve(r.geometry, p.alpha0, r.numerics.report_modes)
    })?;
    let cols = columns(r.axis, &["n", "nu", "chi0_sq"]);
    let mut rows = Vec::new();
    let (mut increasing, mut nonneg) = (true, true);
    for (v, b) in &out {
        increasing &= b.modes.windows(2).all(|w| w[1].nu > w[0].nu);
        nonneg &= b.modes.iter().all(|m| m.chi0_sq >= 0.0);
        for m in &b.modes {
            rows.push(vec![
                sweep_cell(r, *v),
                Cell::I(m.n as i64),
                Cell::F(m.nu),
                Cell::F(m.chi0_sq),
            ]);
        }
    }
    let table = Table {
        columns: cols,
        rows,
    };
    Ok(TaskResult {
        task: Task::Modes,
        plot: table.clone(),
        table,
        checks: vec![
            check(
                "modes.nu_increasing",
                increasing,
                "transverse eigenvalues strictly increase",
            ),
            check("modes.chi_nonnegative", nonneg, "chi_n(0)^2 >= 0"),
        ],
    })
}

fn spectrum(r: &Resolved) -> Result<TaskResult> {
    let opts = r.numerics.solver();
    let out = per_point(r, |_, p| {
        let b = point_basis(r, p)?;
        Ok((find_bound_states(p, &b, &opts)?, b.nu1()))
    })?;
    let mut rows = Vec::new();
    let mut plot = Vec::new();
    let (mut below, mut sorted) = (true, true);
    for (v, (rep, nu1)) in &out {
        below &= rep.eigenvalues.iter().all(|s| s.point.energy < *nu1);
        sorted &= rep
            .eigenvalues
            .windows(2)
            .all(|w| w[0].point.energy <= w[1].point.energy);
        for (i, s) in rep.eigenvalues.iter().enumerate() {
            rows.push(vec![
                sweep_cell(r, *v),
                Cell::I(i as i64 + 1),
                Cell::F(s.point.energy),
                Cell::F(s.point.kappa1),
                Cell::I(s.multiplicity as i64),
                Cell::F(*nu1),
            ]);
        }
        for (k, mu) in &rep.bs_eigencurve {
            plot.push(vec![sweep_cell(r, *v), Cell::F(*k), Cell::F(*mu)]);
        }
    }
    Ok(TaskResult {
        task: Task::Spectrum,
        table: Table {
            columns: columns(
                r.axis,
                &["index", "energy", "kappa1", "multiplicity", "nu1"],
            ),
            rows,
        },
        plot: Table {
            columns: columns(r.axis, &["kappa1", "lowest_bs_eigenvalue"]),
            rows: plot,
        },
        checks: vec![
            check(
                "spectrum.below_threshold",
                below,
                "every bound state lies below nu_1",
            ),
            check("spectrum.sorted", sorted, "bound states ascend in energy"),
        ],
    })
}

struct AsymptoticRow {
    nu1: f64,
    kappa: Option<f64>,
    first: f64,
    second: f64,
}

fn asymptotics(r: &Resolved) -> Result<TaskResult> {
    let opts = r.numerics.solver();
    let out = per_point(r, |_, p| {
        let b = point_basis(r, p)?;
        let (first, second) = match r.axis {
            Axis::Sigma => {
                let c = scaled_expansion(p, &b, p.sigma)?;
                (c.c1_sigma * p.sigma, c.predict_sigma().unwrap_or(f64::NAN))
            }
            _ => {
                let c = weak_coupling_expansion(p, &b)?;
                (c.first_order_lambda(p.lambda), c.predict_lambda(p.lambda))
            }
        };
        let kappa = extrapolated_ground_state(p, &b, &opts)?.map(|g| g.point.kappa1);
        Ok(AsymptoticRow {
            nu1: b.nu1(),
            kappa,
            first,
            second,
        })
    })?;
    let energy = |nu1: f64, k: f64| (k > 0.0).then_some(nu1 - k * k);
    let mut rows = Vec::new();
    let mut fit = Vec::new();
    for (v, a) in &out {
        let remainder = a.kappa.map(|k| (k - a.second).abs());
        if let Some(rem) = remainder {
            fit.push((*v, rem));
        }
        rows.push(vec![
            sweep_cell(r, *v),
            opt(a.kappa.map(|k| a.nu1 - k * k)),
            opt(energy(a.nu1, a.first)),
            opt(energy(a.nu1, a.second)),
            opt(remainder),
            opt(a.kappa),
            Cell::F(a.second),
        ]);
    }
    let mut checks = Vec::new();
    if matches!(r.axis, Axis::Lambda | Axis::Sigma) && fit.len() >= 3 {
        let slope = loglog_slope(&fit).unwrap_or(f64::NAN);
        let tol = r.numerics.slope_tol;
        checks.push(check(
            "asymptotics.remainder_order",
            (slope - 3.0).abs() <= tol,
            format!("log-log slope of the remainder {slope:.4}, expected 3 +- {tol}"),
        ));
    }
    let table = Table {
        columns: columns(
            r.axis,
            &[
                "E_solver",
                "E_expansion_1",
                "E_expansion_2",
                "remainder",
                "kappa_solver",
                "kappa_expansion_2",
            ],
        ),
        rows,
    };
    Ok(TaskResult {
        task: Task::Asymptotics,
        plot: table.clone(),
        table,
        checks,
    })
}

struct BoundsRow {
    count: usize,
    brackets: Option<(usize, usize)>,
    skn: Option<Estimate>,
    closed: Option<f64>,
    schatten: (f64, f64),
}

/// Effective `(a, alpha1)` of a rectangular well after scaling.
fn effective_rect(p: &CouplingProfile) -> Option<(f64, f64)> {
    match p.shape {
        Perturbation::RectWell { a, alpha1 } => {
            Some((a * p.sigma, p.alpha0 + p.lambda * (alpha1 - p.alpha0)))
        }
        _ => None,
    }
}

fn bounds(r: &Resolved) -> Result<TaskResult> {
    let opts = r.numerics.solver();
    let n = &r.numerics;
    let out = per_point(r, |_, p| {
        let b = point_basis(r, p)?;
        let count = find_bound_states(p, &b, &opts)?.count();
        let attractive = !p.negative_part().is_trivial();
        let skn_basis = ModeBasis::solve(r.geometry, p.alpha0, n.skn_modes)?;
        let strategy = match n.skn_strategy {
            SknStrategy::Quadrature => Strategy::Quadrature,
            SknStrategy::Montecarlo => Strategy::MonteCarlo {
                samples: n.mc_samples,
                seed: r.seed,
            },
        };
        let skn = attractive
            .then(|| skn_bound_general(p, &skn_basis, strategy))
            .transpose()?;
        let rect = effective_rect(p).filter(|&(_, alpha1)| alpha1 < p.alpha0);
        let closed = rect
            .map(|(a, alpha1)| skn_bound_rectwell(a, p.alpha0 - alpha1, &skn_basis))
            .transpose()?;
        let brackets = rect
            .map(|(a, alpha1)| bracketing_bound(a, &b, &ModeBasis::solve(r.geometry, alpha1, 2)?))
            .transpose()?;
        let schatten = if attractive {
            let c = count_below(b.nu1() - SCHATTEN_KAPPA1 * SCHATTEN_KAPPA1, p, &b, &opts)?;
            (c.trace_norm, c.hs_sq)
        } else {
            (0.0, 0.0)
        };
        Ok(BoundsRow {
            count,
            brackets,
            skn,
            closed,
            schatten,
        })
    })?;
    let mut rows = Vec::new();
    let mut chain_all = true;
    let mut agree_all = true;
    let mut worst = 0.0f64;
    for (v, b) in &out {
        let nf = b.count as f64;
        let mut chain = match b.skn {
            Some(s) => nf <= s.value + s.error,
            None => b.count == 0,
        };
        if let Some((upper, lower)) = b.brackets {
            chain &= lower <= b.count && b.count <= upper;
        }
        if let (Some(s), Some(c)) = (b.skn, b.closed) {
            // sampled estimates may differ by up to three standard errors
            let sampled = r.numerics.skn_strategy == SknStrategy::Montecarlo;
            let tol = if sampled {
                1e-4_f64.max(3.0 * s.error / c.abs())
            } else {
                1e-4
            };
            let rel = (s.value - c).abs() / c.abs();
            worst = worst.max(rel);
            agree_all &= rel <= tol;
        }
        chain_all &= chain;
        rows.push(vec![
            sweep_cell(r, *v),
            Cell::I(b.count as i64),
            b.brackets
                .map(|x| Cell::I(x.1 as i64))
                .unwrap_or(Cell::Empty),
            b.brackets
                .map(|x| Cell::I(x.0 as i64))
                .unwrap_or(Cell::Empty),
            opt(b.skn.map(|s| s.value)),
            opt(b.skn.map(|s| s.error)),
            opt(b.closed),
            Cell::F(b.schatten.0),
            Cell::F(b.schatten.1),
            Cell::B(chain),
        ]);
    }
    let cols = columns(
        r.axis,
        &[
            "N_computed",
            "brack_lower",
            "brack_upper",
            "skn_bound",
            "skn_error",
            "skn_closed_form",
            "schatten_1",
            "schatten_2_sq",
            "chain_ok",
        ],
    );
    let plot_rows = rows
        .iter()
        .map(|row| {
            row.iter()
                .map(|c| {
                    if let Cell::B(b) = c {
                        Cell::I(*b as i64)
                    } else {
                        *c
                    }
                })
                .collect()
        })
        .collect();
    Ok(TaskResult {
        task: Task::Bounds,
        plot: Table {
            columns: cols.clone(),
            rows: plot_rows,
        },
        table: Table { columns: cols, rows },
        checks: vec![
            check(
                "bounds.chain",
                chain_all,
                "brack_lower <= N <= brack_upper and N <= skn bound at every point",
            ),
            check(
                "bounds.closed_form_agreement",
                agree_all,
                format!("largest relative gap between closed-form and general bound {worst:.3e} (tolerance 1e-4, or three standard errors when sampled)"),
            ),
        ],
    })
}

struct OracleRow {
    states: Vec<(f64, f64)>,
    fd: Vec<(f64, f64)>,
    bs_count: usize,
    fd_count: usize,
}

fn oracle_validate(r: &Resolved) -> Result<TaskResult> {
    let opts = r.numerics.solver();
    let n = &r.numerics;
    // the strip solves are the expensive part; run points one by one and let
    // each solve use the pool
    let out: Vec<(f64, OracleRow)> = r
        .points
        .iter()
        .map(|&v| {
            let p = point_profile(r, v)?;
            let b = point_basis(r, &p)?;
            let states = extrapolated_bound_states(&p, &b, &opts)?;
            let mut fd = FdConfig::for_profile(&p, n.oracle_h, 1.0);
            let hint = states
                .iter()
                .map(|(s, _)| s.point.kappa1)
                .fold(f64::INFINITY, f64::min);
            if hint.is_finite() {
                fd = FdConfig::for_profile(&p, n.oracle_h, hint);
            }
            fd.levels = n.oracle_levels;
            if let Some(x) = n.oracle_x {
                fd.x_half = x;
            }
            let flat: Vec<(f64, f64)> = states
                .iter()
                .flat_map(|(s, e)| std::iter::repeat_n((s.point.energy, *e), s.multiplicity))
                .collect();
            let nu1 = b.nu1();
            let bs_count = flat.iter().filter(|(e, _)| nu1 - e > fd.margin).count();
            let strip = strip_fd(&p, &r.geometry, &fd, flat.len())?;
            let fdv = strip
                .eigenvalues
                .iter()
                .copied()
                .zip(strip.errors.iter().copied())
                .collect();
            Ok((
                v,
                OracleRow {
                    states: flat,
                    fd: fdv,
                    bs_count,
                    fd_count: strip.count,
                },
            ))
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let (mut counts_ok, mut energies_ok) = (true, true);
    for (v, o) in &out {
        counts_ok &= o.bs_count == o.fd_count;
        for (i, (e_bs, bs_err)) in o.states.iter().enumerate() {
            let fd = o.fd.get(i).copied();
            let agree = fd.map(|(e_fd, fd_err)| (e_bs - e_fd).abs() <= fd_err.max(*bs_err));
            energies_ok &= agree.unwrap_or(false);
            rows.push(vec![
                sweep_cell(r, *v),
                Cell::I(i as i64 + 1),
                Cell::F(*e_bs),
                Cell::F(*bs_err),
                opt(fd.map(|x| x.0)),
                opt(fd.map(|x| x.1)),
                agree.map(Cell::B).unwrap_or(Cell::Empty),
                Cell::I(o.bs_count as i64),
                Cell::I(o.fd_count as i64),
            ]);
        }
    }
    let cols = columns(
        r.axis,
        &[
            "index", "E_bs", "bs_error", "E_fd", "fd_error", "agree", "N_bs", "N_fd",
        ],
    );
    let plot_rows = rows
        .iter()
        .map(|row: &Vec<Cell>| {
            row.iter()
                .map(|c| {
                    if let Cell::B(b) = c {
                        Cell::I(*b as i64)
                    } else {
                        *c
                    }
                })
                .collect()
        })
        .collect();
    Ok(TaskResult {
        task: Task::OracleValidate,
        plot: Table {
            columns: cols.clone(),
            rows: plot_rows,
        },
        table: Table {
            columns: cols,
            rows,
        },
        checks: vec![
            check(
                "oracle.count",
                counts_ok,
                "bound-state counts of both methods agree exactly",
            ),
            check(
                "oracle.energies",
                energies_ok,
                "energies agree within the larger self-reported error",
            ),
        ],
    })
}

/// Expected scaling exponents of `||M||_HS^2` and `||N||_HS^2` in `sigma`.
const HS_SLOPES: [(f64, f64); 2] = [(4.0, 0.3), (1.0, 0.2)];

fn hs_scaling(r: &Resolved) -> Result<TaskResult> {
    let kappa = r.numerics.hs_kappa1;
    let out = per_point(r, |_, p| {
        let b = point_basis(r, p)?;
        let grid = Grid::for_profile(p, r.numerics.n_cells)?;
        let m = assemble(OperatorKind::M, kappa, &b, &grid)?.hs_norm();
        let n = assemble(OperatorKind::N, kappa, &b, &grid)?.hs_norm();
        Ok((m * m, n * n))
    })?;
    let slope_m = loglog_slope(&out.iter().map(|(v, (m, _))| (*v, *m)).collect::<Vec<_>>());
    let slope_n = loglog_slope(&out.iter().map(|(v, (_, n))| (*v, *n)).collect::<Vec<_>>());
    let rows: Vec<Vec<Cell>> = out
        .iter()
        .map(|(v, (m, n))| {
            vec![
                sweep_cell(r, *v),
                Cell::F(*m),
                Cell::F(*n),
                opt(slope_m),
                opt(slope_n),
            ]
        })
        .collect();
    let mut checks = Vec::new();
    if r.axis == Axis::Sigma {
        for ((name, slope), (want, tol)) in [("hs.m_slope", slope_m), ("hs.n_slope", slope_n)]
            .into_iter()
            .zip(HS_SLOPES)
        {
            let s = slope.unwrap_or(f64::NAN);
            checks.push(check(
                name,
                (s - want).abs() <= tol,
                format!("fitted slope {s:.4}, expected {want} +- {tol}"),
            ));
        }
    }
    let table = Table {
        columns: columns(r.axis, &["m_hs_sq", "n_hs_sq", "slope_m", "slope_n"]),
        rows,
    };
    Ok(TaskResult {
        task: Task::HsScaling,
        plot: table.clone(),
        table,
        checks,
    })
}
