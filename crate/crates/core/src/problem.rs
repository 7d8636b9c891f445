//! Problem instances: the grid, the coefficient fields `p` and `a`, the
//! interaction kernel `f` and the exponents `rho`, `sigma`.
//!
//! Every field is described by a small closed family of generators (or by
//! tabulated data) and sampled pointwise on a uniform grid of interior
//! nodes. Boundary values are never stored: all grid functions vanish at
//! `x = 0` and `x = 1`.

use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("malformed config: {0}")]
    MalformedConfig(String),
    #[error("invalid exponent: {0}")]
    InvalidExponent(String),
    #[error("negative data: {0}")]
    NegativeData(String),
    #[error("tabulated data has {found} values, expected {expected}")]
    ArityMismatch { expected: usize, found: usize },
    #[error("grid needs at least 3 interior nodes, got {0}")]
    GridTooSmall(usize),
    #[error("reading {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

pub type Result<T, E = ProblemError> = std::result::Result<T, E>;

/// Uniform grid of `n` interior nodes `x_j = j / (n + 1)` on `(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    n: usize,
    h: f64,
    nodes: DVector<f64>,
}

impl Grid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(ProblemError::GridTooSmall(n));
        }
        let denom = (n + 1) as f64;
        // j / (n+1) rather than j * h so that refined grids share nodes bitwise.
        let nodes = DVector::from_iterator(n, (1..=n).map(|j| j as f64 / denom));
        Ok(Self {
            n,
            h: 1.0 / denom,
            nodes,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &DVector<f64> {
        &self.nodes
    }

    /// Trapezoid weights; the boundary terms drop out because grid
    /// functions vanish there.
    pub fn weights(&self) -> DVector<f64> {
        DVector::from_element(self.n, self.h)
    }

    /// `h * sum(v)`.
    pub fn integrate(&self, v: &DVector<f64>) -> f64 {
        self.h * v.iter().sum::<f64>()
    }

    /// Samples `sin(k pi x_j)`.
    pub fn sine_mode(&self, k: usize) -> DVector<f64> {
        self.nodes.map(|x| (k as f64 * PI * x).sin())
    }
}

/// Generator for the coefficient fields `p(x)` and `a(x)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CoefficientKind {
    Constant {
        v: f64,
    },
    /// `v0 + v1 * x`
    Affine {
        v0: f64,
        v1: f64,
    },
    /// `c0 + c1 * cos(k pi x)`
    Cosine {
        c0: f64,
        c1: f64,
        k: f64,
    },
    Tabulated {
        values: Vec<f64>,
    },
}

impl CoefficientKind {
    pub fn eval(&self, x: f64) -> Option<f64> {
        match *self {
            Self::Constant { v } => Some(v),
            Self::Affine { v0, v1 } => Some(v0 + v1 * x),
            Self::Cosine { c0, c1, k } => Some(c0 + c1 * (k * PI * x).cos()),
            Self::Tabulated { .. } => None,
        }
    }
}

/// Generator for the kernel `f(x, y)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelKind {
    Constant {
        c: f64,
    },
    /// `c * exp(-alpha |x - y|)`
    ExpDecay {
        c: f64,
        alpha: f64,
    },
    /// `c * exp(-alpha (x - y)^2)`
    Gaussian {
        c: f64,
        alpha: f64,
    },
    /// Row-major `n * n` values, `values[i * n + j] = f(x_i, y_j)`.
    Tabulated {
        values: Vec<f64>,
    },
}

impl KernelKind {
    pub fn eval(&self, x: f64, y: f64) -> Option<f64> {
        match *self {
            Self::Constant { c } => Some(c),
            Self::ExpDecay { c, alpha } => Some(c * (-alpha * (x - y).abs()).exp()),
            Self::Gaussian { c, alpha } => {
                let d = x - y;
                Some(c * (-alpha * d * d).exp())
            }
            Self::Tabulated { .. } => None,
        }
    }
}

/// Samples a coefficient generator at the grid nodes.
pub fn sample_function(kind: &CoefficientKind, grid: &Grid) -> Result<DVector<f64>> {
    match kind {
        CoefficientKind::Tabulated { values } => {
            if values.len() != grid.n() {
                return Err(ProblemError::ArityMismatch {
                    expected: grid.n(),
                    found: values.len(),
                });
            }
            Ok(DVector::from_column_slice(values))
        }
        symbolic => Ok(grid
            .nodes()
            .map(|x| symbolic.eval(x).expect("symbolic kind"))),
    }
}

/// Samples a kernel generator on the tensor grid, `F[(i, j)] = f(x_i, y_j)`.
pub fn sample_kernel(kind: &KernelKind, grid: &Grid) -> Result<DMatrix<f64>> {
    let n = grid.n();
    match kind {
        KernelKind::Tabulated { values } => {
            if values.len() != n * n {
                return Err(ProblemError::ArityMismatch {
                    expected: n * n,
                    found: values.len(),
                });
            }
            Ok(DMatrix::from_row_slice(n, n, values))
        }
        symbolic => {
            let x = grid.nodes();
            Ok(DMatrix::from_fn(n, n, |i, j| {
                symbolic.eval(x[i], x[j]).expect("symbolic kind")
            }))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    kind: CoefficientKind,
    samples: DVector<f64>,
}

impl CoefficientField {
    pub fn new(kind: CoefficientKind, grid: &Grid) -> Result<Self> {
        let samples = sample_function(&kind, grid)?;
        Ok(Self { kind, samples })
    }

    pub fn kind(&self) -> &CoefficientKind {
        &self.kind
    }

    pub fn samples(&self) -> &DVector<f64> {
        &self.samples
    }

    /// True when the field does not depend on `x`.
    pub fn constant_value(&self) -> Option<f64> {
        match self.kind {
            CoefficientKind::Constant { v } => Some(v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelField {
    kind: KernelKind,
    samples: DMatrix<f64>,
}

impl KernelField {
    pub fn new(kind: KernelKind, grid: &Grid) -> Result<Self> {
        let samples = sample_kernel(&kind, grid)?;
        Ok(Self { kind, samples })
    }

    pub fn kind(&self) -> &KernelKind {
        &self.kind
    }

    pub fn samples(&self) -> &DMatrix<f64> {
        &self.samples
    }
}

/// A fully sampled, validated problem instance. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    grid: Grid,
    p: CoefficientField,
    a: CoefficientField,
    f: KernelField,
    rho: f64,
    sigma: f64,
}

impl ProblemSpec {
    pub fn new(
        grid: Grid,
        p: CoefficientKind,
        a: CoefficientKind,
        f: KernelKind,
        rho: f64,
        sigma: f64,
    ) -> Result<Self> {
        if !(rho >= 1.0) || !rho.is_finite() {
            return Err(ProblemError::InvalidExponent(format!(
                "rho must be >= 1, got {rho}"
            )));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(ProblemError::InvalidExponent(format!(
                "sigma must be > 0, got {sigma}"
            )));
        }
        let p = CoefficientField::new(p, &grid)?;
        let a = CoefficientField::new(a, &grid)?;
        let f = KernelField::new(f, &grid)?;

        if let Some((j, v)) = first_bad(a.samples().iter(), |v| v < 0.0) {
            return Err(ProblemError::NegativeData(format!(
                "a({}) = {v} < 0",
                grid.nodes()[j]
            )));
        }
        if let Some((k, v)) = first_bad(f.samples().iter(), |v| v < 0.0) {
            // column-major storage
            let (i, j) = (k % grid.n(), k / grid.n());
            return Err(ProblemError::NegativeData(format!(
                "f({}, {}) = {v} < 0",
                grid.nodes()[i],
                grid.nodes()[j]
            )));
        }
        if let Some((_, v)) = first_bad(p.samples().iter(), |v| !v.is_finite()) {
            return Err(ProblemError::MalformedConfig(format!(
                "p sample {v} is not finite"
            )));
        }
        if let Some((_, v)) = first_bad(a.samples().iter(), |v| !v.is_finite()) {
            return Err(ProblemError::MalformedConfig(format!(
                "a sample {v} is not finite"
            )));
        }
        if let Some((_, v)) = first_bad(f.samples().iter(), |v| !v.is_finite()) {
            return Err(ProblemError::MalformedConfig(format!(
                "f sample {v} is not finite"
            )));
        }

        Ok(Self {
            grid,
            p,
            a,
            f,
            rho,
            sigma,
        })
    }

    /// Same generators sampled on a grid with `n` interior nodes.
    pub fn resampled(&self, n: usize) -> Result<Self> {
        Self::new(
            Grid::new(n)?,
            self.p.kind.clone(),
            self.a.kind.clone(),
            self.f.kind.clone(),
            self.rho,
            self.sigma,
        )
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    pub fn p(&self) -> &CoefficientField {
        &self.p
    }

    pub fn a(&self) -> &CoefficientField {
        &self.a
    }

    pub fn f(&self) -> &KernelField {
        &self.f
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Non-fatal remarks about the instance.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.rho == 1.0 {
            out.push(
                "rho = 1: accepted; the small-amplitude estimate only needs rho + sigma > 1"
                    .to_string(),
            );
        }
        out
    }
}

fn first_bad<'a>(
    values: impl Iterator<Item = &'a f64>,
    bad: impl Fn(f64) -> bool,
) -> Option<(usize, f64)> {
    values.copied().enumerate().find(|&(_, v)| bad(v))
}

/// Field descriptions parsed from a config file, before sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemConfig {
    pub n: Option<usize>,
    pub rho: f64,
    pub sigma: f64,
    pub p: CoefficientKind,
    pub a: CoefficientKind,
    pub f: KernelKind,
}

impl ProblemConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| ProblemError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Parses the flat `key = value` format. `@path` references in
    /// tabulated fields are resolved against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut n = None;
        let mut rho = None;
        let mut sigma = None;
        let mut p = None;
        let mut a = None;
        let mut f = None;

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ProblemError::MalformedConfig(format!(
                    "line {}: expected `key = value`",
                    lineno + 1
                ))
            })?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "n" => {
                    n = Some(value.parse::<usize>().map_err(|e| {
                        ProblemError::MalformedConfig(format!("n = {value:?}: {e}"))
                    })?)
                }
                "rho" => rho = Some(parse_real("rho", value)?),
                "sigma" => sigma = Some(parse_real("sigma", value)?),
                "p" => p = Some(parse_coefficient("p", value, base_dir)?),
                "a" => a = Some(parse_coefficient("a", value, base_dir)?),
                "f" => f = Some(parse_kernel(value, base_dir)?),
                other => {
                    return Err(ProblemError::MalformedConfig(format!(
                        "line {}: unknown key {other:?}",
                        lineno + 1
                    )))
                }
            }
        }

        let missing = |k: &str| ProblemError::MalformedConfig(format!("missing key {k:?}"));
        Ok(Self {
            n,
            rho: rho.ok_or_else(|| missing("rho"))?,
            sigma: sigma.ok_or_else(|| missing("sigma"))?,
            p: p.ok_or_else(|| missing("p"))?,
            a: a.ok_or_else(|| missing("a"))?,
            f: f.ok_or_else(|| missing("f"))?,
        })
    }
}

/// Samples a parsed config on a grid of `n` interior nodes.
pub fn build_problem(config: &ProblemConfig, n: usize) -> Result<ProblemSpec> {
    ProblemSpec::new(
        Grid::new(n)?,
        config.p.clone(),
        config.a.clone(),
        config.f.clone(),
        config.rho,
        config.sigma,
    )
}

fn parse_real(what: &str, s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| ProblemError::MalformedConfig(format!("{what}: {s:?}: {e}")))
}

enum Params {
    Inline(Vec<f64>),
    File(Vec<f64>),
}

fn split_kind<'a>(what: &str, value: &'a str) -> Result<(&'a str, &'a str)> {
    let (kind, params) = value.split_once(':').ok_or_else(|| {
        ProblemError::MalformedConfig(format!("{what}: expected `kind:params`, got {value:?}"))
    })?;
    Ok((kind.trim(), params.trim()))
}

fn parse_params(what: &str, params: &str, base_dir: &Path) -> Result<Params> {
    if let Some(rel) = params.strip_prefix('@') {
        let path = base_dir.join(rel.trim());
        let text = fs::read_to_string(&path).map_err(|source| ProblemError::Io {
            path: path.clone(),
            source,
        })?;
        let values = text
            .split_whitespace()
            .map(|t| parse_real(what, t))
            .collect::<Result<Vec<_>>>()?;
        return Ok(Params::File(values));
    }
    let values = params
        .split(',')
        .map(|t| parse_real(what, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(Params::Inline(values))
}

fn arity(what: &str, kind: &str, values: &[f64], expected: usize) -> Result<()> {
    if values.len() != expected {
        return Err(ProblemError::MalformedConfig(format!(
            "{what}: kind {kind} takes {expected} parameter(s), got {}",
            values.len()
        )));
    }
    Ok(())
}

fn parse_coefficient(what: &str, value: &str, base_dir: &Path) -> Result<CoefficientKind> {
    let (kind, params) = split_kind(what, value)?;
    let values = match (kind, parse_params(what, params, base_dir)?) {
        ("tabulated", Params::Inline(v) | Params::File(v)) => {
            return Ok(CoefficientKind::Tabulated { values: v })
        }
        (_, Params::File(_)) => {
            return Err(ProblemError::MalformedConfig(format!(
                "{what}: @file data is only allowed for tabulated fields"
            )))
        }
        (_, Params::Inline(v)) => v,
    };
    match kind {
        "constant" => {
            arity(what, kind, &values, 1)?;
            Ok(CoefficientKind::Constant { v: values[0] })
        }
        "affine" => {
            arity(what, kind, &values, 2)?;
            Ok(CoefficientKind::Affine {
                v0: values[0],
                v1: values[1],
            })
        }
        "cosine" => {
            arity(what, kind, &values, 3)?;
            Ok(CoefficientKind::Cosine {
                c0: values[0],
                c1: values[1],
                k: values[2],
            })
        }
        other => Err(ProblemError::MalformedConfig(format!(
            "{what}: unknown coefficient kind {other:?}"
        ))),
    }
}

fn parse_kernel(value: &str, base_dir: &Path) -> Result<KernelKind> {
    let what = "f";
    let (kind, params) = split_kind(what, value)?;
    let values = match (kind, parse_params(what, params, base_dir)?) {
        ("tabulated", Params::Inline(v) | Params::File(v)) => {
            return Ok(KernelKind::Tabulated { values: v })
        }
        (_, Params::File(_)) => {
            return Err(ProblemError::MalformedConfig(
                "f: @file data is only allowed for tabulated kernels".into(),
            ))
        }
        (_, Params::Inline(v)) => v,
    };
    match kind {
        "constant" => {
            arity(what, kind, &values, 1)?;
            Ok(KernelKind::Constant { c: values[0] })
        }
        "expdecay" => {
            arity(what, kind, &values, 2)?;
            Ok(KernelKind::ExpDecay {
                c: values[0],
                alpha: values[1],
            })
        }
        "gaussian" => {
            arity(what, kind, &values, 2)?;
            Ok(KernelKind::Gaussian {
                c: values[0],
                alpha: values[1],
            })
        }
        other => Err(ProblemError::MalformedConfig(format!(
            "f: unknown kernel kind {other:?}"
        ))),
    }
}

impl fmt::Display for CoefficientKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant { v } => write!(f, "constant:{v}"),
            Self::Affine { v0, v1 } => write!(f, "affine:{v0},{v1}"),
            Self::Cosine { c0, c1, k } => write!(f, "cosine:{c0},{c1},{k}"),
            Self::Tabulated { values } => write!(f, "tabulated:<{} values>", values.len()),
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant { c } => write!(f, "constant:{c}"),
            Self::ExpDecay { c, alpha } => write!(f, "expdecay:{c},{alpha}"),
            Self::Gaussian { c, alpha } => write!(f, "gaussian:{c},{alpha}"),
            Self::Tabulated { values } => write!(f, "tabulated:<{} values>", values.len()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Grid {
        Grid::new(n).unwrap()
    }

    #[test]
    fn grid_rejects_fewer_than_three_nodes() {
        assert!(matches!(Grid::new(2), Err(ProblemError::GridTooSmall(2))));
        let g = grid(3);
        assert_eq!(g.h(), 0.25);
        assert_eq!(g.nodes().as_slice(), &[0.25, 0.5, 0.75]);
    }

    #[test]
    fn constant_benchmark_samples() {
        let spec = ProblemSpec::new(
            grid(199),
            CoefficientKind::Constant { v: 0.0 },
            CoefficientKind::Constant { v: 100.0 },
            KernelKind::Constant { c: 1.0 },
            1.0,
            2.0,
        )
        .unwrap();
        assert_eq!(spec.grid().h(), 1.0 / 200.0);
        assert!(spec.p().samples().iter().all(|&v| v == 0.0));
        assert!(spec.a().samples().iter().all(|&v| v == 100.0));
        assert!(spec.f().samples().iter().all(|&v| v == 1.0));
        assert_eq!(spec.f().samples().shape(), (199, 199));
        assert_eq!(spec.warnings().len(), 1);
    }

    #[test]
    fn negative_weight_is_rejected() {
        let err = ProblemSpec::new(
            grid(10),
            CoefficientKind::Constant { v: 0.0 },
            CoefficientKind::Constant { v: -1.0 },
            KernelKind::Constant { c: 1.0 },
            1.0,
            2.0,
        )
        .unwrap_err();
        assert!(matches!(err, ProblemError::NegativeData(_)));

        let err = ProblemSpec::new(
            grid(10),
            CoefficientKind::Constant { v: 0.0 },
            CoefficientKind::Constant { v: 1.0 },
            KernelKind::Constant { c: -0.5 },
            1.0,
            2.0,
        )
        .unwrap_err();
        assert!(matches!(err, ProblemError::NegativeData(_)));
    }

    #[test]
    fn exponents_are_validated() {
        let build = |rho, sigma| {
            ProblemSpec::new(
                grid(5),
                CoefficientKind::Constant { v: 0.0 },
                CoefficientKind::Constant { v: 1.0 },
                KernelKind::Constant { c: 1.0 },
                rho,
                sigma,
            )
        };
        assert!(matches!(
            build(0.5, 2.0),
            Err(ProblemError::InvalidExponent(_))
        ));
        assert!(matches!(
            build(1.0, 0.0),
            Err(ProblemError::InvalidExponent(_))
        ));
        assert!(matches!(
            build(f64::NAN, 1.0),
            Err(ProblemError::InvalidExponent(_))
        ));
        let ok = build(2.0, 0.5).unwrap();
        assert!(ok.warnings().is_empty());
    }

    #[test]
    fn cosine_sampling_at_quarter_points() {
        let kind = CoefficientKind::Cosine {
            c0: 1.0,
            c1: 0.5,
            k: 2.0,
        };
        let s = sample_function(&kind, &grid(3)).unwrap();
        let expected = [1.0, 0.5, 1.0];
        for (got, want) in s.iter().zip(expected) {
            assert!((got - want).abs() < 1e-15, "{got} vs {want}");
        }
    }

    #[test]
    fn affine_constant_and_tabulated_sampling() {
        let s = sample_function(&CoefficientKind::Affine { v0: 2.0, v1: -1.0 }, &grid(3)).unwrap();
        assert_eq!(s.as_slice(), &[1.75, 1.5, 1.25]);
        let s = sample_function(&CoefficientKind::Constant { v: 5.0 }, &grid(4)).unwrap();
        assert_eq!(s.as_slice(), &[5.0; 4]);
        let err = sample_function(
            &CoefficientKind::Tabulated {
                values: vec![1.0, 2.0, 3.0],
            },
            &grid(4),
        )
        .unwrap_err();
        assert!(matches!(
            err,
            ProblemError::ArityMismatch {
                expected: 4,
                found: 3
            }
        ));
        let s = sample_function(
            &CoefficientKind::Tabulated {
                values: vec![1.0, 2.0, 3.0],
            },
            &grid(3),
        )
        .unwrap();
        assert_eq!(s.as_slice(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn refined_sampling_matches_on_shared_nodes() {
        let kinds = [
            CoefficientKind::Affine { v0: 0.3, v1: -1.7 },
            CoefficientKind::Cosine {
                c0: 1.0,
                c1: 0.5,
                k: 3.0,
            },
        ];
        for kind in &kinds {
            for n in [3, 7, 50, 199] {
                let coarse = sample_function(kind, &grid(n)).unwrap();
                let fine = sample_function(kind, &grid(2 * n + 1)).unwrap();
                for j in 0..n {
                    assert_eq!(coarse[j].to_bits(), fine[2 * j + 1].to_bits());
                }
            }
        }
    }

    #[test]
    fn symbolic_kernels_are_symmetric() {
        let g = grid(40);
        for kind in [
            KernelKind::ExpDecay { c: 1.0, alpha: 2.0 },
            KernelKind::Gaussian { c: 0.7, alpha: 5.0 },
        ] {
            let f = sample_kernel(&kind, &g).unwrap();
            assert_eq!(f, f.transpose());
        }
    }

    #[test]
    fn parses_config_text() {
        let text = "\
# constant benchmark
n = 199
rho = 1
sigma = 2
p = constant:0
a = cosine:110,10,2
f = expdecay:1.0,2.0
";
        let cfg = ProblemConfig::parse(text, Path::new(".")).unwrap();
        assert_eq!(cfg.n, Some(199));
        assert_eq!(cfg.p, CoefficientKind::Constant { v: 0.0 });
        assert_eq!(
            cfg.a,
            CoefficientKind::Cosine {
                c0: 110.0,
                c1: 10.0,
                k: 2.0
            }
        );
        assert_eq!(cfg.f, KernelKind::ExpDecay { c: 1.0, alpha: 2.0 });
        let spec = build_problem(&cfg, 20).unwrap();
        assert_eq!(spec.n(), 20);
    }

    #[test]
    fn malformed_configs() {
        let base = "rho = 1\nsigma = 2\np = constant:0\na = constant:1\n";
        for bad in [
            format!("{base}f = wobbly:1"),
            format!("{base}f = expdecay:1"),
            format!("{base}f = constant"),
            format!("{base}f = constant:1\nq = 3"),
            format!("{base}f = constant:x"),
            base.to_string(),
        ] {
            let err = ProblemConfig::parse(&bad, Path::new(".")).unwrap_err();
            assert!(
                matches!(err, ProblemError::MalformedConfig(_)),
                "{bad}: {err}"
            );
        }
    }

    #[test]
    fn tabulated_data_from_file() {
        let dir = std::env::temp_dir().join(format!("nlbvp-problem-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        fs::write(dir.join("a.txt"), "1 2\n3\n").unwrap();
        let text = "rho = 1\nsigma = 2\np = constant:0\na = tabulated:@a.txt\nf = constant:1\n";
        let cfg = ProblemConfig::parse(text, &dir).unwrap();
        assert_eq!(
            cfg.a,
            CoefficientKind::Tabulated {
                values: vec![1.0, 2.0, 3.0]
            }
        );
        let spec = build_problem(&cfg, 3).unwrap();
        assert_eq!(spec.a().samples().as_slice(), &[1.0, 2.0, 3.0]);
        assert!(matches!(
            build_problem(&cfg, 4),
            Err(ProblemError::ArityMismatch { .. })
        ));
        let missing =
            "rho = 1\nsigma = 2\np = tabulated:@nope.txt\na = constant:1\nf = constant:1\n";
        assert!(matches!(
            ProblemConfig::parse(missing, &dir),
            Err(ProblemError::Io { .. })
        ));
        fs::remove_dir_all(&dir).ok();
    }
}
