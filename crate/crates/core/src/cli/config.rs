//! Run configuration: TOML with unknown keys rejected and every semantic
//! error reported at the line of the offending key.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::error::{Error, Result};
use crate::profile::CouplingProfile;
use crate::spectrum::SolverOptions;
use crate::transverse::Geometry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Modes,
    Spectrum,
    Asymptotics,
    Bounds,
    OracleValidate,
    HsScaling,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Self::Modes => "modes",
            Self::Spectrum => "spectrum",
            Self::Asymptotics => "asymptotics",
            Self::Bounds => "bounds",
            Self::OracleValidate => "oracle-validate",
            Self::HsScaling => "hs-scaling",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Self::Modes,
            Self::Spectrum,
            Self::Asymptotics,
            Self::Bounds,
            Self::OracleValidate,
            Self::HsScaling,
        ]
        .into_iter()
        .find(|t| t.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileKind {
    Rectwell,
    Piecewise,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    None,
    Lambda,
    Sigma,
    A,
    Alpha0,
    Alpha1,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Self::None => "point",
            Self::Lambda => "lambda",
            Self::Sigma => "sigma",
            Self::A => "a",
            Self::Alpha0 => "alpha0",
            Self::Alpha1 => "alpha1",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SknStrategy {
    Quadrature,
    Montecarlo,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    pub d1: Spanned<f64>,
    pub d2: Spanned<f64>,
}

/// Profile as a typed variant selected by `kind`; only the keys of that
/// variant are accepted.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    pub kind: Spanned<ProfileKind>,
    pub alpha0: Spanned<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Spanned<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha1: Option<Spanned<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub breaks: Option<Spanned<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Spanned<Vec<f64>>>,
    /// Two whitespace columns `x alpha(x)`, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<Spanned<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Spanned<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Spanned<f64>>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: Spanned<Axis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Spanned<Vec<f64>>>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_cells: Option<Spanned<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_modes: Option<Spanned<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report_modes: Option<Spanned<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<Spanned<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Spanned<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_floor: Option<Spanned<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multiplicity_tol: Option<Spanned<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_h: Option<Spanned<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_levels: Option<Spanned<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_x: Option<Spanned<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hs_kappa1: Option<Spanned<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skn_modes: Option<Spanned<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skn_strategy: Option<Spanned<SknStrategy>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_samples: Option<Spanned<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope_tol: Option<Spanned<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<Spanned<String>>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub tasks: Spanned<Vec<Task>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<Spanned<u64>>,
    pub geometry: GeometrySpec,
    pub profile: ProfileSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub numerics: NumericsSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

/// Numerical settings with defaults filled in.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Numerics {
    pub n_cells: usize,
    pub n_modes: Option<usize>,
    pub report_modes: usize,
    pub tol: f64,
    pub samples: usize,
    pub kappa_floor: f64,
    pub multiplicity_tol: f64,
    pub oracle_h: f64,
    pub oracle_levels: usize,
    pub oracle_x: Option<f64>,
    pub hs_kappa1: f64,
    pub skn_modes: usize,
    pub skn_strategy: SknStrategy,
    pub mc_samples: usize,
    pub slope_tol: f64,
}

impl Numerics {
    pub fn solver(&self) -> SolverOptions {
        SolverOptions {
            n_cells: self.n_cells,
            tol: self.tol,
            samples: self.samples,
            kappa_floor: self.kappa_floor,
            multiplicity_tol: self.multiplicity_tol,
        }
    }
}

/// A validated configuration ready to run.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub tasks: Vec<Task>,
    pub seed: u64,
    pub geometry: Geometry,
    pub profile: CouplingProfile,
    /// `(a, alpha1)` when the profile is a rectangular well.
    pub rect: Option<(f64, f64)>,
    pub axis: Axis,
    pub points: Vec<f64>,
    pub numerics: Numerics,
    pub out_dir: PathBuf,
}

/// 1-based line of a byte offset.
fn line_of(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].matches('\n').count() + 1
}

struct Ctx<'a> {
    src: &'a str,
}

impl Ctx<'_> {
    fn err<T, S>(&self, at: &Spanned<S>, msg: impl Into<String>) -> Result<T> {
        Err(Error::Config {
            line: line_of(self.src, at.span().start),
            msg: msg.into(),
        })
    }

    fn positive(&self, v: &Option<Spanned<f64>>, name: &str, default: f64) -> Result<f64> {
        match v {
            None => Ok(default),
            Some(s) if *s.get_ref() > 0.0 && s.get_ref().is_finite() => Ok(*s.get_ref()),
            Some(s) => self.err(
                s,
                format!("{name} must be positive and finite, got {}", s.get_ref()),
            ),
        }
    }

    fn count(
        &self,
        v: &Option<Spanned<usize>>,
        name: &str,
        default: usize,
        min: usize,
    ) -> Result<usize> {
        match v {
            None => Ok(default),
            Some(s) if *s.get_ref() >= min => Ok(*s.get_ref()),
            Some(s) => self.err(
                s,
                format!("{name} must be at least {min}, got {}", s.get_ref()),
            ),
        }
    }
}

/// Parses and validates `src`; `base` resolves relative table paths.
pub fn parse(src: &str, base: &Path) -> Result<(RunConfig, Resolved)> {
    let cfg: RunConfig = toml::from_str(src).map_err(|e| Error::Config {
        line: e.span().map(|s| line_of(src, s.start)).unwrap_or(1),
        msg: e.message().to_string(),
    })?;
    let resolved = validate(&cfg, src, base)?;
    Ok((cfg, resolved))
}

fn validate(cfg: &RunConfig, src: &str, base: &Path) -> Result<Resolved> {
    let c = Ctx { src };
    if cfg.tasks.get_ref().is_empty() {
        return c.err(&cfg.tasks, "tasks must not be empty");
    }
    let mut tasks = cfg.tasks.get_ref().clone();
    tasks.sort();
    tasks.dedup();

    let d1 = c.positive(&Some(cfg.geometry.d1.clone()), "d1", 1.0)?;
    let d2 = c.positive(&Some(cfg.geometry.d2.clone()), "d2", 1.0)?;
    let geometry = Geometry::new(d1, d2).map_err(|e| Error::Config {
        line: line_of(src, cfg.geometry.d1.span().start),
        msg: e.to_string(),
    })?;

    let (profile, rect) = build_profile(&c, &cfg.profile, base)?;

    let (axis, points) = match &cfg.sweep {
        None => (Axis::None, vec![0.0]),
        Some(s) => {
            let axis = *s.axis.get_ref();
            let points = match (&s.values, axis) {
                (_, Axis::None) => vec![0.0],
                (None, _) => return c.err(&s.axis, "a sweep axis needs values"),
                (Some(v), _) if v.get_ref().is_empty() => {
                    return c.err(v, "sweep values must not be empty")
                }
                (Some(v), _) => {
                    let vals = v.get_ref().clone();
                    if vals.iter().any(|x| !x.is_finite()) {
                        return c.err(v, "sweep values must be finite");
                    }
                    let positive_axis = matches!(axis, Axis::Lambda | Axis::Sigma | Axis::A);
                    if positive_axis && vals.iter().any(|&x| x <= 0.0) {
                        return c.err(v, format!("{} values must be positive", axis.name()));
                    }
                    vals
                }
            };
            if matches!(axis, Axis::A | Axis::Alpha1) && rect.is_none() {
                return c.err(
                    &s.axis,
                    format!("axis {} needs a rectwell profile", axis.name()),
                );
            }
            (axis, points)
        }
    };

    let n = &cfg.numerics;
    let numerics = Numerics {
        n_cells: c.count(&n.n_cells, "n_cells", 400, 4)?,
        n_modes: match &n.n_modes {
            None => None,
            Some(_) => Some(c.count(&n.n_modes, "n_modes", 0, 2)?),
        },
        report_modes: c.count(&n.report_modes, "report_modes", 10, 2)?,
        tol: c.positive(&n.tol, "tol", 1e-10)?,
        samples: c.count(&n.samples, "samples", 48, 4)?,
        kappa_floor: c.positive(&n.kappa_floor, "kappa_floor", 1e-6)?,
        multiplicity_tol: c.positive(&n.multiplicity_tol, "multiplicity_tol", 1e-6)?,
        oracle_h: c.positive(&n.oracle_h, "oracle_h", 0.1)?,
        oracle_levels: c.count(&n.oracle_levels, "oracle_levels", 3, 1)?,
        oracle_x: match &n.oracle_x {
            None => None,
            Some(_) => Some(c.positive(&n.oracle_x, "oracle_x", 0.0)?),
        },
        hs_kappa1: c.positive(&n.hs_kappa1, "hs_kappa1", 0.5)?,
        skn_modes: c.count(&n.skn_modes, "skn_modes", 2000, 2)?,
        skn_strategy: n
            .skn_strategy
            .as_ref()
            .map(|s| *s.get_ref())
            .unwrap_or(SknStrategy::Quadrature),
        mc_samples: c.count(&n.mc_samples, "mc_samples", 1_000_000, 2)?,
        slope_tol: c.positive(&n.slope_tol, "slope_tol", 0.4)?,
    };

    let out_dir = cfg
        .output
        .dir
        .as_ref()
        .map(|d| PathBuf::from(d.get_ref()))
        .unwrap_or_else(|| PathBuf::from("out"));

    Ok(Resolved {
        tasks,
        seed: cfg.seed.as_ref().map(|s| *s.get_ref()).unwrap_or(0),
        geometry,
        profile,
        rect,
        axis,
        points,
        numerics,
        out_dir,
    })
}

fn build_profile(
    c: &Ctx,
    p: &ProfileSpec,
    base: &Path,
) -> Result<(CouplingProfile, Option<(f64, f64)>)> {
    let kind = *p.kind.get_ref();
    let alpha0 = *p.alpha0.get_ref();
    if !alpha0.is_finite() {
        return c.err(&p.alpha0, "alpha0 must be finite");
    }
    // keys that belong to other variants
    let foreign: Vec<(&str, Option<usize>)> = vec![
        ("a", p.a.as_ref().map(|s| s.span().start)),
        ("alpha1", p.alpha1.as_ref().map(|s| s.span().start)),
        ("breaks", p.breaks.as_ref().map(|s| s.span().start)),
        ("values", p.values.as_ref().map(|s| s.span().start)),
        ("file", p.file.as_ref().map(|s| s.span().start)),
    ];
    let allowed: &[&str] = match kind {
        ProfileKind::Rectwell => &["a", "alpha1"],
        ProfileKind::Piecewise => &["breaks", "values"],
        ProfileKind::Table => &["file"],
    };
    for (name, at) in &foreign {
        if let Some(at) = at {
            if !allowed.contains(name) {
                return Err(Error::Config {
                    line: line_of(c.src, *at),
                    msg: format!("key `{name}` does not apply to a {kind:?} profile")
                        .to_lowercase(),
                });
            }
        }
    }
    let missing = |name: &str| {
        c.err::<(CouplingProfile, Option<(f64, f64)>), _>(
            &p.kind,
            format!("{kind:?} profile needs `{name}`").to_lowercase(),
        )
    };
    let to_config = |at: usize, e: Error| Error::Config {
        line: line_of(c.src, at),
        msg: e.to_string(),
    };
    let (profile, rect) = match kind {
        ProfileKind::Rectwell => {
            let (Some(a), Some(alpha1)) = (&p.a, &p.alpha1) else {
                return missing(if p.a.is_none() { "a" } else { "alpha1" });
            };
            let (av, a1) = (*a.get_ref(), *alpha1.get_ref());
            if !(av > 0.0 && av.is_finite()) {
                return c.err(a, format!("a must be positive and finite, got {av}"));
            }
            if !a1.is_finite() {
                return c.err(alpha1, "alpha1 must be finite");
            }
            let prof = CouplingProfile::rect_well(alpha0, av, a1)
                .map_err(|e| to_config(a.span().start, e))?;
            (prof, Some((av, a1)))
        }
        ProfileKind::Piecewise => {
            let (Some(b), Some(v)) = (&p.breaks, &p.values) else {
                return missing(if p.breaks.is_none() {
                    "breaks"
                } else {
                    "values"
                });
            };
            let prof = CouplingProfile::piecewise(alpha0, b.get_ref().clone(), v.get_ref().clone())
                .map_err(|e| to_config(b.span().start, e))?;
            (prof, None)
        }
        ProfileKind::Table => {
            let Some(f) = &p.file else {
                return missing("file");
            };
            let path = base.join(f.get_ref());
            let text = std::fs::read_to_string(&path).map_err(|e| {
                to_config(
                    f.span().start,
                    Error::Domain(format!("cannot read {}: {e}", path.display())),
                )
            })?;
            let prof = table_profile(alpha0, &text).map_err(|e| to_config(f.span().start, e))?;
            (prof, None)
        }
    };
    let lambda = c.positive(&p.lambda, "lambda", 1.0)?;
    let sigma = c.positive(&p.sigma, "sigma", 1.0)?;
    Ok((profile.with_lambda(lambda).with_sigma(sigma), rect))
}

/// Linear interpolation of a tabulated `alpha(x)`, equal to `alpha0` outside the table.
fn table_profile(alpha0: f64, text: &str) -> Result<CouplingProfile> {
    let mut rows: Vec<(f64, f64)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Domain(format!("table line {}: {e}", i + 1)))?;
        if cols.len() != 2 || cols.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "table line {}: expected two finite columns",
                i + 1
            )));
        }
        rows.push((cols[0], cols[1]));
    }
    if rows.len() < 2 || rows.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::Domain(
            "table needs at least two rows with increasing x".into(),
        ));
    }
    let support = rows[0].0.abs().max(rows[rows.len() - 1].0.abs());
    CouplingProfile::sampled(alpha0, support, move |x| {
        let i = rows.partition_point(|r| r.0 <= x);
        if i == 0 || i == rows.len() {
            return 0.0;
        }
        let ((x0, y0), (x1, y1)) = (rows[i - 1], rows[i]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0) - alpha0
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"
tasks = ["modes", "bounds"]
seed = 3

[geometry]
d1 = 1.0
d2 = 1.0

[profile]
kind = "rectwell"
alpha0 = 0.0
a = 1.0
alpha1 = -2.0

[sweep]
axis = "a"
values = [0.5, 1.0]
"#;

    fn line_of_error(src: &str) -> usize {
        match parse(src, Path::new(".")) {
            Err(Error::Config { line, .. }) => line,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn valid_config_resolves() {
        let (_, r) = parse(GOOD, Path::new(".")).unwrap();
        assert_eq!(r.tasks, vec![Task::Modes, Task::Bounds]);
        assert_eq!(r.points, vec![0.5, 1.0]);
        assert_eq!(r.rect, Some((1.0, -2.0)));
        assert_eq!(r.numerics.n_cells, 400);
    }

    #[test]
    fn unknown_key_is_rejected_at_its_line() {
        let src = GOOD.replace("d2 = 1.0", "d2 = 1.0\nwidth = 3.0");
        assert_eq!(line_of_error(&src), 8);
    }

    #[test]
    fn semantic_errors_point_at_the_key() {
        let src = GOOD.replace("d1 = 1.0", "d1 = -1.0");
        assert_eq!(line_of_error(&src), 6);
        let src = GOOD.replace("a = 1.0", "a = 1.0\nbreaks = [0.0, 1.0]");
        assert_eq!(line_of_error(&src), 13);
        let src = GOOD.replace("tasks = [\"modes\", \"bounds\"]", "tasks = []");
        assert_eq!(line_of_error(&src), 2);
        let src = GOOD.replace("[sweep]", "[numerics]\ntol = 0.0\n[sweep]");
        assert_eq!(line_of_error(&src), 16);
    }

    #[test]
    fn echo_revalidates() {
        let (cfg, _) = parse(GOOD, Path::new(".")).unwrap();
        let text = toml::to_string(&cfg).unwrap();
        let (_, again) = parse(&text, Path::new(".")).unwrap();
        assert_eq!(again.points, vec![0.5, 1.0]);
    }

    #[test]
    fn table_profile_interpolates() {
        let p = table_profile(0.0, "# x alpha\n-1 0\n0 -2\n1 0\n").unwrap();
        assert!((p.delta(0.5) + 1.0).abs() < 1e-15);
        assert_eq!(p.delta(2.0), 0.0);
    }
}
