//! Configuration-driven verification suites and their reports.
//!
//! A run reads a JSON configuration, executes one suite (or `all`), and produces a
//! [`Report`] plus CSV tables for the scaling fits. Every check records `lhs`, `rhs`,
//! the `defect` measured between them and the `tolerance` it is held to.
//!
//! Checks come in two kinds. Defect checks compare two quantities that should agree;
//! their tolerance can be overridden per check, per suite or globally (`--tol`). Order
//! checks compare a fitted convergence or growth exponent with its expected value; their
//! tolerance is an absolute band on the exponent and is only changed by a per-check or
//! per-suite override.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::equivariant::{
    bloch_symbol, cell_unitary, equivariant_product_check, equivariant_quantize, equivariant_resolvent, fiber_operator,
    growth_exponent, inverse_zak, sobolev_weight, torus_symbol, zak_at, zak_transform, EquivariantSymbol, GroupAction,
    Lattice, PeriodicField,
};
use crate::error::{Error, Result};
use crate::funcalc::{helffer_sjostrand, parametrix, parametrix_defect, spectral_projection, weight_operator, Profile, Side};
use crate::grid::PhaseGrid;
use crate::linalg::{eigvalsh, hermitian_function, op_norm, small_inverse};
use crate::magnetic::{FieldKind, MagneticData, ScalarField};
use crate::moyal::{derivation, weyl_product_exact, weyl_product_expansion_with, weyl_product_integral, Route};
use crate::quantize::{adjoint_check, commutation_check, gauge_covariance_defect, kernel_map, quantize, wigner, OperatorMatrix};
use crate::seminorm::{PhaseAxis, Scheme};
use crate::stats::order_fit;
use crate::symbol::Symbol;
use crate::trace::{schatten_norm, trace_formula_check};
use crate::C64;

/// Suites in declaration order; `all` runs them in this order.
pub const SUITES: [&str; 11] = [
    "roundtrip",
    "gauge",
    "commutators",
    "product",
    "expansion",
    "parametrix",
    "resolvent",
    "funcalc",
    "trace",
    "zak",
    "equivariant",
];

/// Name of the generator recorded in every report.
pub const PRNG_NAME: &str = "ChaCha8Rng";

// ---------------------------------------------------------------------------
// configuration

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub grid: GridConfig,
    pub params: Params,
    #[serde(default)]
    pub magnetic: MagneticConfig,
    #[serde(default = "default_symbols")]
    pub symbols: Vec<SymbolConfig>,
    #[serde(default)]
    pub lattice: LatticeConfig,
    #[serde(default)]
    pub suites: SuiteConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub d: usize,
    pub n: usize,
    pub x_extent: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub eps: f64,
    pub lambda: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MagneticConfig {
    #[default]
    Zero,
    ConstantPotential { a: [f64; 2] },
    Constant { b: f64 },
    Landau { slope: f64 },
    Polynomial { coeffs: Vec<f64> },
    Wave { amp: f64, k: f64 },
}

impl MagneticConfig {
    pub fn kind(&self) -> FieldKind {
        match self {
            MagneticConfig::Zero => FieldKind::Zero,
            MagneticConfig::ConstantPotential { a } => FieldKind::ConstantPotential { a: *a },
            MagneticConfig::Constant { b } => FieldKind::Constant { b: *b },
            MagneticConfig::Landau { slope } => FieldKind::Landau { slope: *slope },
            MagneticConfig::Polynomial { coeffs } => FieldKind::Polynomial { coeffs: coeffs.clone() },
            MagneticConfig::Wave { amp, k } => FieldKind::Wave { amp: *amp, k: *k },
        }
    }
}

/// Test symbol families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum SymbolConfig {
    /// `C exp(-(|r - center|^2 + |xi - momentum|^2) / (2 width^2))` with a fixed
    /// Hermitian `fiber x fiber` matrix `C`.
    Gaussian {
        #[serde(default = "one")]
        fiber: usize,
        #[serde(default = "unit")]
        width: f64,
        #[serde(default)]
        center: [f64; 2],
        #[serde(default)]
        momentum: [f64; 2],
    },
    /// Sum of `terms` random plane waves `exp(i (pi p . x / L + q . xi dx))`, integer
    /// `|p_j|, |q_j| <= band`, with seeded complex amplitudes, times the envelope
    /// `exp(-|x|^2 / (2 (envelope L)^2))`.
    Random {
        #[serde(default = "one")]
        fiber: usize,
        #[serde(default = "default_terms")]
        terms: usize,
        #[serde(default = "default_band")]
        band: i64,
        #[serde(default = "default_envelope")]
        envelope: f64,
    },
}

impl SymbolConfig {
    pub fn label(&self) -> &'static str {
        match self {
            SymbolConfig::Gaussian { .. } => "gaussian",
            SymbolConfig::Random { .. } => "random",
        }
    }

    fn fiber(&self) -> usize {
        match self {
            SymbolConfig::Gaussian { fiber, .. } | SymbolConfig::Random { fiber, .. } => *fiber,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierTerm {
    pub g: [i64; 2],
    pub amp: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatticeConfig {
    pub d: usize,
    pub a: f64,
    pub n_k: usize,
    pub n_y: usize,
    pub n_c: usize,
    pub modes: usize,
    /// `V(y) = sum amp (e^{i G_g . y} + e^{-i G_g . y})`.
    pub potential: Vec<FourierTerm>,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        Self { d: 1, a: 1.0, n_k: 16, n_y: 5, n_c: 5, modes: 4, potential: vec![FourierTerm { g: [1, 0], amp: 1.0 }] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuiteConfig {
    /// Semiclassical scales for the scaling fits.
    pub eps_list: Vec<f64>,
    /// Overrides keyed by check name or suite name.
    pub tolerances: BTreeMap<String, f64>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self { eps_list: vec![0.2, 0.1, 0.05], tolerances: BTreeMap::new() }
    }
}

fn one() -> usize {
    1
}

fn unit() -> f64 {
    1.0
}

fn default_terms() -> usize {
    8
}

fn default_band() -> i64 {
    4
}

fn default_envelope() -> f64 {
    0.12
}

fn default_symbols() -> Vec<SymbolConfig> {
    vec![
        SymbolConfig::Gaussian { fiber: 1, width: 1.0, center: [0.3, 0.0], momentum: [-0.2, 0.0] },
        SymbolConfig::Gaussian { fiber: 2, width: 1.2, center: [0.0, 0.0], momentum: [0.0, 0.0] },
        SymbolConfig::Random { fiber: 2, terms: 8, band: 4, envelope: 0.12 },
    ]
}

/// A configuration problem, located by field path and, when known, source line.
#[derive(Clone, Debug, PartialEq)]
pub struct SchemaError {
    pub path: String,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl fmt::Display for SchemaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "line {l}, column {c}: ")?,
            (Some(l), None) => write!(f, "line {l}: ")?,
            _ => {}
        }
        if self.path.is_empty() || self.path == "." {
            write!(f, "{}", self.message)
        } else {
            write!(f, "field `{}`: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for SchemaError {}

/// First line mentioning the last component of `path` as a key.
fn locate(text: &str, path: &str) -> Option<usize> {
    let key = path.rsplit('.').next()?.split('[').next()?;
    let needle = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&needle)).map(|i| i + 1)
}

impl Config {
    /// Parses and validates a configuration document.
    pub fn parse(text: &str) -> std::result::Result<Self, SchemaError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Config = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let mut message = inner.to_string();
            if let Some(i) = message.rfind(" at line ") {
                message.truncate(i);
            }
            SchemaError { path, line: Some(inner.line()), column: Some(inner.column()), message }
        })?;
        cfg.validate().map_err(|mut e| {
            e.line = locate(text, &e.path);
            e
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> std::result::Result<Self, SchemaError> {
        let text = std::fs::read_to_string(path).map_err(|e| SchemaError {
            path: String::new(),
            line: None,
            column: None,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::parse(&text)
    }

    /// Semantic checks that the type system does not express.
    pub fn validate(&self) -> std::result::Result<(), SchemaError> {
        let bad = |path: &str, message: String| Err(SchemaError { path: path.into(), line: None, column: None, message });
        let g = &self.grid;
        if !(g.d == 1 || g.d == 2) {
            return bad("grid.d", format!("{} is not 1 or 2", g.d));
        }
        if g.n < 4 || g.n % 2 != 0 {
            return bad("grid.n", format!("{} must be even and at least 4", g.n));
        }
        if !(g.x_extent > 0.0 && g.x_extent.is_finite()) {
            return bad("grid.x_extent", format!("{} must be positive", g.x_extent));
        }
        let p = &self.params;
        if !(p.eps > 0.0 && p.eps <= 1.0) {
            return bad("params.eps", format!("{} must lie in (0, 1]", p.eps));
        }
        if !(p.lambda >= 0.0 && p.lambda.is_finite()) {
            return bad("params.lambda", format!("{} must be non-negative", p.lambda));
        }
        let needs_2d = matches!(self.magnetic, MagneticConfig::Constant { .. } | MagneticConfig::Landau { .. } | MagneticConfig::Polynomial { .. });
        if needs_2d && g.d != 2 {
            return bad("magnetic.kind", "this field kind needs grid.d = 2".into());
        }
        if self.symbols.is_empty() {
            return bad("symbols", "at least one test symbol is required".into());
        }
        for (i, s) in self.symbols.iter().enumerate() {
            let fib = s.fiber();
            if !(1..=9).contains(&fib) {
                return bad(&format!("symbols[{i}].fiber"), format!("{fib} is outside 1..=9"));
            }
            match s {
                SymbolConfig::Gaussian { width, .. } if !(*width > 0.0) => {
                    return bad(&format!("symbols[{i}].width"), format!("{width} must be positive"));
                }
                SymbolConfig::Random { terms, band, envelope, .. } => {
                    if *terms == 0 || *band < 0 {
                        return bad(&format!("symbols[{i}].terms"), "need at least one term and a non-negative band".into());
                    }
                    if !(*envelope > 0.0) {
                        return bad(&format!("symbols[{i}].envelope"), format!("{envelope} must be positive"));
                    }
                }
                _ => {}
            }
        }
        let l = &self.lattice;
        if !(l.d == 1 || l.d == 2) {
            return bad("lattice.d", format!("{} is not 1 or 2", l.d));
        }
        if !(l.a > 0.0) {
            return bad("lattice.a", format!("{} must be positive", l.a));
        }
        if l.n_k < 2 || l.n_k % 2 != 0 {
            return bad("lattice.n_k", format!("{} must be even and at least 2", l.n_k));
        }
        if l.n_y == 0 {
            return bad("lattice.n_y", "must be positive".into());
        }
        if l.n_c < 5 || l.n_c % 2 == 0 {
            return bad("lattice.n_c", format!("{} must be odd and at least 5", l.n_c));
        }
        if l.modes == 0 {
            return bad("lattice.modes", "must be positive".into());
        }
        let s = &self.suites;
        if s.eps_list.len() < 2 || s.eps_list.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
            return bad("suites.eps_list", "need at least two values in (0, 1]".into());
        }
        for (k, v) in &s.tolerances {
            if !(*v >= 0.0 && v.is_finite()) {
                return bad(&format!("suites.tolerances.{k}"), format!("{v} must be non-negative"));
            }
        }
        Ok(())
    }

    fn magnetic_data(&self, eps: f64) -> Result<MagneticData> {
        MagneticData::new(self.grid.d, self.magnetic.kind(), self.params.lambda, eps)
    }

    fn phase_grid(&self) -> Result<PhaseGrid> {
        PhaseGrid::new(self.grid.d, self.grid.n, self.grid.x_extent)
    }

    /// The `i`-th configured test symbol on the configured grid.
    pub fn build_symbol(&self, i: usize) -> Result<Symbol> {
        let grid = self.phase_grid()?;
        let spec = self.symbols.get(i).ok_or_else(|| Error::Schema(format!("no symbol with index {i}")))?;
        Ok(build_symbol(spec, &grid, self.params.eps, self.params.seed, i as u64))
    }
}

/// Command-line overrides; they beat the configuration.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub eps: Option<f64>,
    pub lambda: Option<f64>,
    pub grid: Option<usize>,
    pub tol: Option<f64>,
}

impl Overrides {
    /// Applies the overrides and re-validates.
    pub fn apply(&self, cfg: &Config) -> std::result::Result<Config, SchemaError> {
        let mut c = cfg.clone();
        if let Some(e) = self.eps {
            c.params.eps = e;
        }
        if let Some(l) = self.lambda {
            c.params.lambda = l;
        }
        if let Some(n) = self.grid {
            c.grid.n = n;
        }
        if let Some(t) = self.tol {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(SchemaError { path: "--tol".into(), line: None, column: None, message: format!("{t} must be non-negative") });
            }
        }
        c.validate()?;
        Ok(c)
    }
}

// ---------------------------------------------------------------------------
// symbols

const ZERO: C64 = C64::new(0.0, 0.0);

/// Fixed Hermitian coefficient matrix of the Gaussian family.
fn gaussian_coefficients(n: usize) -> Vec<C64> {
    let mut c = vec![ZERO; n * n];
    for i in 0..n {
        c[i * n + i] = C64::new(1.0 + 0.5 * i as f64, 0.0);
        for j in i + 1..n {
            let v = C64::new(0.3, 0.2) / (1.0 + (j - i) as f64);
            c[i * n + j] = v;
            c[j * n + i] = v.conj();
        }
    }
    c
}

/// `(2 pi eps)^{-d} int tr f` for the Gaussian family, in closed form.
pub fn gaussian_trace(d: usize, fiber: usize, width: f64, eps: f64) -> f64 {
    let c = gaussian_coefficients(fiber);
    let tr: f64 = (0..fiber).map(|i| c[i * fiber + i].re).sum();
    tr * (width * width / eps).powi(d as i32)
}

fn build_symbol(spec: &SymbolConfig, grid: &PhaseGrid, eps: f64, seed: u64, index: u64) -> Symbol {
    let d = grid.d();
    match spec {
        SymbolConfig::Gaussian { fiber, width, center, momentum } => {
            let c = gaussian_coefficients(*fiber);
            Symbol::from_fn(grid, eps, *fiber, *fiber, |r, xi, out| {
                let mut e = 0.0;
                for j in 0..d {
                    e += (r[j] - center[j]).powi(2) + (xi[j] - momentum[j]).powi(2);
                }
                let g = (-e / (2.0 * width * width)).exp();
                for (o, v) in out.iter_mut().zip(&c) {
                    *o = v * g;
                }
            })
        }
        SymbolConfig::Random { fiber, terms, band, envelope } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(index));
            let nf = fiber * fiber;
            let mut waves = Vec::with_capacity(terms * nf);
            for _ in 0..terms * nf {
                let p = [rng.gen_range(-band..=*band), rng.gen_range(-band..=*band)];
                let q = [rng.gen_range(-band..=*band), rng.gen_range(-band..=*band)];
                let a = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) / *terms as f64;
                waves.push((p, q, a));
            }
            let (l, dx) = ([grid.x_extent(0), grid.x_extent(d - 1)], [grid.dx(0), grid.dx(d - 1)]);
            Symbol::from_fn(grid, eps, *fiber, *fiber, |r, xi, out| {
                let mut x2 = 0.0;
                for j in 0..d {
                    x2 += (r[j] / (eps * envelope * l[j])).powi(2);
                }
                let env = (-x2 / 2.0).exp();
                for (e, o) in out.iter_mut().enumerate() {
                    let mut s = ZERO;
                    for (p, q, a) in &waves[e * terms..(e + 1) * terms] {
                        let mut ph = 0.0;
                        for j in 0..d {
                            ph += PI * p[j] as f64 * (r[j] / eps) / l[j] + q[j] as f64 * xi[j] * dx[j];
                        }
                        s += a * C64::from_polar(1.0, ph);
                    }
                    *o = s * env;
                }
            })
        }
    }
}

// ---------------------------------------------------------------------------
// reports

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Defect,
    Order,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub kind: CheckKind,
    pub lhs: f64,
    pub rhs: f64,
    pub defect: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// A CSV table of a scaling study.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| format!("{v}")).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub suite: String,
    pub prng: String,
    pub seed: u64,
    pub pass: bool,
    pub checks: Vec<Check>,
    /// File names of the CSV tables written next to the report.
    pub tables: Vec<String>,
    #[serde(skip)]
    pub table_data: Vec<Table>,
}

impl Report {
    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Writes `report.json` and the CSV tables into `dir`, which must exist.
    pub fn write(&self, dir: &Path) -> Result<()> {
        if !dir.is_dir() {
            return Err(Error::Io(std::io::Error::new(std::io::ErrorKind::NotFound, format!("{} is not a directory", dir.display()))));
        }
        std::fs::write(dir.join("report.json"), self.to_json())?;
        for t in &self.table_data {
            std::fs::write(dir.join(format!("{}.csv", t.name)), t.to_csv())?;
        }
        Ok(())
    }
}

struct Ctx<'a> {
    cfg: &'a Config,
    tol_override: Option<f64>,
    checks: Vec<Check>,
    tables: Vec<Table>,
}

impl Ctx<'_> {
    fn tolerance(&self, name: &str, kind: CheckKind, default: f64) -> f64 {
        let t = &self.cfg.suites.tolerances;
        if let Some(v) = t.get(name) {
            return *v;
        }
        if let (Some(v), CheckKind::Defect) = (self.tol_override, kind) {
            return v;
        }
        let suite = name.split('.').next().unwrap_or(name);
        t.get(suite).copied().unwrap_or(default)
    }

    fn push(&mut self, name: &str, kind: CheckKind, lhs: f64, rhs: f64, defect: f64, default_tol: f64) {
        let tolerance = self.tolerance(name, kind, default_tol);
        let pass = defect.is_finite() && defect <= tolerance;
        self.checks.push(Check { name: name.into(), kind, lhs, rhs, defect, tolerance, pass, error: None });
    }

    /// Defect check; `f` returns `(lhs, rhs, defect)`.
    fn defect(&mut self, name: &str, default_tol: f64, f: impl FnOnce() -> Result<(f64, f64, f64)>) {
        match f() {
            Ok((l, r, d)) => self.push(name, CheckKind::Defect, l, r, d, default_tol),
            Err(e) => self.error(name, CheckKind::Defect, default_tol, e),
        }
    }

    /// Fitted exponent against its expected value.
    fn order(&mut self, name: &str, fitted: f64, expected: f64, band: f64) {
        self.push(name, CheckKind::Order, fitted, expected, (fitted - expected).abs(), band);
    }

    /// One-sided order check: passes when `fitted >= bound`.
    fn order_at_least(&mut self, name: &str, fitted: f64, bound: f64) {
        let d = if fitted.is_nan() { f64::NAN } else { (bound - fitted).max(0.0) };
        self.push(name, CheckKind::Order, fitted, bound, d, 0.0);
    }

    fn error(&mut self, name: &str, kind: CheckKind, default_tol: f64, e: Error) {
        let tolerance = self.tolerance(name, kind, default_tol);
        self.checks.push(Check {
            name: name.into(),
            kind,
            lhs: f64::NAN,
            rhs: f64::NAN,
            defect: f64::NAN,
            tolerance,
            pass: false,
            error: Some(e.to_string()),
        });
    }

    fn table(&mut self, name: &str, columns: &[&str], rows: Vec<Vec<f64>>) {
        self.tables.push(Table { name: name.into(), columns: columns.iter().map(|s| s.to_string()).collect(), rows });
    }
}

/// Caps the dense linear algebra at `MAGWEYL_THREADS` threads (sequential for 1).
pub fn configure_threads() {
    if let Some(n) = std::env::var("MAGWEYL_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        let par = if n <= 1 { faer::Par::Seq } else { faer::Par::rayon(n) };
        faer::set_global_parallelism(par);
    }
}

/// Runs `suite` (one of [`SUITES`] or `all`) on a validated configuration.
pub fn run(cfg: &Config, suite: &str, overrides: &Overrides) -> std::result::Result<Report, SchemaError> {
    let cfg = overrides.apply(cfg)?;
    let selected: Vec<&str> = if suite == "all" {
        SUITES.to_vec()
    } else if SUITES.contains(&suite) {
        vec![suite]
    } else {
        return Err(SchemaError {
            path: "--suite".into(),
            line: None,
            column: None,
            message: format!("unknown suite `{suite}`; expected one of {} or all", SUITES.join(", ")),
        });
    };
    let mut ctx = Ctx { cfg: &cfg, tol_override: overrides.tol, checks: Vec::new(), tables: Vec::new() };
    for s in selected {
        match s {
            "roundtrip" => suite_roundtrip(&mut ctx),
            "gauge" => suite_gauge(&mut ctx),
            "commutators" => suite_commutators(&mut ctx),
            "product" => suite_product(&mut ctx),
            "expansion" => suite_expansion(&mut ctx),
            "parametrix" => suite_parametrix(&mut ctx),
            "resolvent" => suite_resolvent(&mut ctx),
            "funcalc" => suite_funcalc(&mut ctx),
            "trace" => suite_trace(&mut ctx),
            "zak" => suite_zak(&mut ctx),
            "equivariant" => suite_equivariant(&mut ctx),
            _ => unreachable!(),
        }
    }
    let pass = ctx.checks.iter().all(|c| c.pass);
    let tables = ctx.tables.iter().map(|t| format!("{}.csv", t.name)).collect();
    Ok(Report {
        suite: suite.into(),
        prng: PRNG_NAME.into(),
        seed: cfg.params.seed,
        pass,
        checks: ctx.checks,
        tables,
        table_data: ctx.tables,
    })
}

/// Objects that [`export`] can write.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExportObject {
    Symbol,
    Operator,
    Report,
}

/// Writes the first configured symbol, its quantization, or the roundtrip report.
/// Paths ending in `.csv` get CSV, others the binary container (JSON for reports).
pub fn export(cfg: &Config, object: ExportObject, out: &Path) -> Result<()> {
    let parent = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    if !parent.is_dir() {
        return Err(Error::Io(std::io::Error::new(std::io::ErrorKind::NotFound, format!("directory {} does not exist", parent.display()))));
    }
    let csv = out.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let mut buf = Vec::new();
    match object {
        ExportObject::Symbol => {
            let s = cfg.build_symbol(0)?;
            if csv {
                crate::container::write_symbol_csv(&mut buf, &s)?;
            } else {
                crate::container::write_symbol(&mut buf, &s)?;
            }
        }
        ExportObject::Operator => {
            let s = cfg.build_symbol(0)?;
            let op = quantize(&s, &cfg.magnetic_data(cfg.params.eps)?)?;
            if csv {
                crate::container::write_operator_csv(&mut buf, &op)?;
            } else {
                crate::container::write_operator(&mut buf, &op)?;
            }
        }
        ExportObject::Report => {
            let r = run(cfg, "roundtrip", &Overrides::default()).map_err(|e| Error::Schema(e.to_string()))?;
            buf = r.to_json().into_bytes();
        }
    }
    std::fs::write(out, buf)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// helpers shared by the suites

fn rel(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

fn op_rel_diff(a: &Mat<C64>, b: &Mat<C64>) -> f64 {
    rel(op_norm(&(a - b)), op_norm(b))
}

fn configured(ctx: &Ctx) -> Result<(PhaseGrid, MagneticData, Vec<Symbol>)> {
    let grid = ctx.cfg.phase_grid()?;
    let mag = ctx.cfg.magnetic_data(ctx.cfg.params.eps)?;
    let syms = (0..ctx.cfg.symbols.len()).map(|i| ctx.cfg.build_symbol(i)).collect::<Result<Vec<_>>>()?;
    Ok((grid, mag, syms))
}

fn symbol_name(ctx: &Ctx, i: usize) -> String {
    format!("symbol{i}_{}", ctx.cfg.symbols[i].label())
}

fn setup_or_fail<T>(ctx: &mut Ctx, suite: &str, r: Result<T>) -> Option<T> {
    match r {
        Ok(v) => Some(v),
        Err(e) => {
            ctx.error(&format!("{suite}.setup"), CheckKind::Defect, 0.0, e);
            None
        }
    }
}

/// Smooth, decaying 2x2 Hermitian test symbol.
fn matrix_gaussian(g: &PhaseGrid, eps: f64, shift: f64) -> Symbol {
    Symbol::from_fn(g, eps, 2, 2, |r, xi, m| {
        let (x, k) = (r[0] - shift, xi[0] + shift);
        let e = (-(x * x + k * k) / 2.0).exp();
        m[0] = C64::new(e, 0.0);
        m[1] = C64::new(k * e, 0.2 * e);
        m[2] = C64::new(k * e, -0.2 * e);
        m[3] = C64::new(2.0 * e * (0.5 * x).cos(), 0.0);
    })
}

/// Scalar complex Gaussian bump centred at `(c, c)` in every phase-space direction.
fn scalar_gaussian(g: &PhaseGrid, eps: f64, c: f64) -> Symbol {
    Symbol::scalar_fn(g, eps, 1, |r, xi| {
        let r2: f64 = r.iter().map(|v| (v - c) * (v - c)).sum();
        let k2: f64 = xi.iter().map(|v| (v - c) * (v - c)).sum();
        C64::new((-r2 - k2).exp(), 0.3 * (-1.5 * (r2 + k2)).exp())
    })
}

/// `h = r^2 + xi^2` on the grid used by the resolvent and calculus suites.
fn harmonic() -> Result<(Symbol, MagneticData)> {
    let g = PhaseGrid::new(1, 64, 8.0)?;
    let mag = MagneticData::zero(1, 1.0)?;
    let h = Symbol::scalar_fn(&g, 1.0, 1, |r, xi| C64::new(r[0] * r[0] + xi[0] * xi[0], 0.0));
    Ok((h, mag))
}

// ---------------------------------------------------------------------------
// suites

fn suite_roundtrip(ctx: &mut Ctx) {
    let Some((grid, mag, syms)) = setup_or_fail(ctx, "roundtrip", configured(ctx)) else { return };
    ctx.defect("roundtrip.grid_duality", 1e-13, || {
        let (mut worst, mut defect) = (2.0 * PI, 0.0);
        for j in 0..grid.d() {
            let v = grid.n(j) as f64 * grid.dx(j) * grid.dxi(j);
            if (v - 2.0 * PI).abs() >= defect {
                (worst, defect) = (v, (v - 2.0 * PI).abs());
            }
        }
        Ok((worst, 2.0 * PI, defect / (2.0 * PI)))
    });
    for (i, f) in syms.iter().enumerate() {
        let name = format!("roundtrip.{}", symbol_name(ctx, i));
        ctx.defect(&name, 1e-8, || {
            let back = wigner(&kernel_map(f, &mag)?, &mag)?;
            Ok((back.l2_norm(), f.l2_norm(), back.rel_diff(f)?))
        });
    }
    ctx.defect("roundtrip.identity", 1e-12, || {
        let id = quantize(&Symbol::identity(&grid, mag.eps, 1), &mag)?;
        let diff = id.sub(&OperatorMatrix::identity(&grid, mag.eps, 1))?.norm();
        Ok((id.norm(), 1.0, diff))
    });
    let last = syms.last().expect("validated non-empty");
    ctx.defect("roundtrip.adjoint", 1e-10, || {
        let d = adjoint_check(last, &mag)?;
        Ok((d, 0.0, d))
    });
}

fn suite_gauge(ctx: &mut Ctx) {
    let Some((grid, mag, syms)) = setup_or_fail(ctx, "gauge", configured(ctx)) else { return };
    let l = grid.x_extent(0);
    let theta = ScalarField::Sine { amp: 1.0, wave: [PI / (mag.eps * l), 0.0] };
    for (i, f) in syms.iter().enumerate() {
        let name = format!("gauge.{}", symbol_name(ctx, i));
        ctx.defect(&name, 1e-8, || {
            let d = gauge_covariance_defect(f, &mag, &theta)?;
            Ok((d, 0.0, d))
        });
    }
    ctx.defect("gauge.constant_phase", 1e-12, || {
        let d = gauge_covariance_defect(&syms[0], &mag, &ScalarField::Constant(0.7))?;
        Ok((d, 0.0, d))
    });
}

fn suite_commutators(ctx: &mut Ctx) {
    let Some((grid, mag, syms)) = setup_or_fail(ctx, "commutators", configured(ctx)) else { return };
    match commutation_check(&grid, &mag) {
        Ok(rep) => {
            ctx.push("commutators.qq", CheckKind::Defect, rep.qq, 0.0, rep.qq, 1e-12);
            ctx.push("commutators.pq", CheckKind::Defect, rep.pq, 0.0, rep.pq, 1e-8);
            ctx.push("commutators.pp", CheckKind::Defect, rep.pp, 0.0, rep.pp, 1e-6);
        }
        Err(e) => ctx.error("commutators.canonical", CheckKind::Defect, 1e-8, e),
    }
    let eps = ctx.cfg.params.eps;
    let lambda = ctx.cfg.params.lambda;
    ctx.defect("commutators.pp_constant_field", 1e-6, || {
        let g2 = PhaseGrid::new(2, 64, 6.0)?;
        let m2 = MagneticData::new(2, FieldKind::Constant { b: 1.0 }, lambda, eps)?;
        let rep = commutation_check(&g2, &m2)?;
        Ok((rep.pp, 0.0, rep.pp))
    });
    for (i, f) in syms.iter().enumerate() {
        if !matches!(ctx.cfg.symbols[i], SymbolConfig::Gaussian { .. }) {
            continue;
        }
        let name = format!("commutators.ad_x.{}", symbol_name(ctx, i));
        ctx.defect(&name, 1e-7, || {
            let mut worst: f64 = 0.0;
            for j in 0..grid.d() {
                let a = derivation(f, PhaseAxis::Position(j), &mag, Route::Exact)?;
                let b = derivation(f, PhaseAxis::Position(j), &mag, Route::Expanded(Scheme::Spectral))?;
                worst = worst.max(rel(a.sub(&b)?.sup_norm(), b.sup_norm()));
            }
            Ok((worst, 0.0, worst))
        });
    }
    ad_xi_study(ctx);
}

/// Remainder of `ad_xi` against its first-order expansion, `r`-periodic setup in a wave field.
fn ad_xi_study(ctx: &mut Ctx) {
    let epss = ctx.cfg.suites.eps_list.clone();
    let mut defects = [Vec::new(), Vec::new()];
    let mut rows = Vec::new();
    for &eps in &epss {
        let res = (|| -> Result<[f64; 2]> {
            let n1 = 2 * ((7.0 / eps).round() as usize);
            let g = PhaseGrid::anisotropic(&[n1, 8], &[PI / eps, 4.0])?;
            let dx2 = g.dx(1);
            let mag = MagneticData::new(2, FieldKind::Wave { amp: 0.8, k: 1.0 }, 1.0, eps)?;
            let f = Symbol::scalar_fn(&g, eps, 1, |r, xi| {
                let p = 1.0 + 0.5 * r[0].cos() + 0.3 * (2.0 * r[0]).sin();
                C64::new(p * (-xi[0] * xi[0] / 2.0).exp() * (1.0 + 0.4 * (xi[1] * dx2).cos()), 0.2 * r[0].sin() * (-xi[0] * xi[0]).exp())
            });
            let mut out = [0.0; 2];
            for (j, o) in out.iter_mut().enumerate() {
                let a = derivation(&f, PhaseAxis::Momentum(j), &mag, Route::Exact)?;
                let b = derivation(&f, PhaseAxis::Momentum(j), &mag, Route::Expanded(Scheme::Spectral))?;
                *o = a.sub(&b)?.sup_norm();
            }
            Ok(out)
        })();
        match res {
            Ok(d) => {
                for j in 0..2 {
                    defects[j].push(d[j]);
                    rows.push(vec![eps, j as f64, d[j]]);
                }
            }
            Err(e) => {
                ctx.error("commutators.ad_xi_order", CheckKind::Order, 0.3, e);
                return;
            }
        }
    }
    let orders = [order_fit(&epss, &defects[0]), order_fit(&epss, &defects[1])];
    for r in rows.iter_mut() {
        r.push(orders[r[1] as usize]);
    }
    ctx.table("ad_xi_order", &["eps", "axis", "defect", "order"], rows);
    ctx.order("commutators.ad_xi0_order", orders[0], 3.0, 0.3);
    ctx.order("commutators.ad_xi1_order", orders[1], 3.0, 0.3);
}

fn suite_product(ctx: &mut Ctx) {
    let Some((grid, mag, syms)) = setup_or_fail(ctx, "product", configured(ctx)) else { return };
    let eps = mag.eps;
    for (i, f) in syms.iter().enumerate() {
        if !matches!(ctx.cfg.symbols[i], SymbolConfig::Gaussian { .. }) {
            continue;
        }
        let name = format!("product.cross_route.{}", symbol_name(ctx, i));
        ctx.defect(&name, 1e-6, || {
            let g = f.adjoint();
            let a = weyl_product_exact(f, &g, &mag)?;
            let b = weyl_product_integral(f, &g, &mag)?;
            Ok((b.sup_norm(), a.sup_norm(), b.rel_diff(&a)?))
        });
    }
    ctx.defect("product.cross_route.constant_field", 1e-6, || {
        let g = PhaseGrid::new(2, 28, 11.0)?;
        let m = MagneticData::new(2, FieldKind::Constant { b: 0.8 }, 1.0, 0.35)?;
        let f = scalar_gaussian(&g, 0.35, 0.3);
        let h = scalar_gaussian(&g, 0.35, -0.2);
        let a = weyl_product_exact(&f, &h, &m)?;
        let b = weyl_product_integral(&f, &h, &m)?;
        Ok((b.sup_norm(), a.sup_norm(), b.rel_diff(&a)?))
    });
    let f = &syms[0];
    ctx.defect("product.unit", 1e-10, || {
        let id = Symbol::identity(&grid, eps, f.n_out);
        let p = weyl_product_exact(&id, f, &mag)?;
        Ok((p.sup_norm(), f.sup_norm(), p.rel_diff(f)?))
    });
    ctx.defect("product.associativity", 1e-10, || {
        let g = f.adjoint();
        let a = weyl_product_exact(&weyl_product_exact(f, &g, &mag)?, f, &mag)?;
        let b = weyl_product_exact(f, &weyl_product_exact(&g, f, &mag)?, &mag)?;
        Ok((a.sup_norm(), b.sup_norm(), a.rel_diff(&b)?))
    });
    let last = syms.last().expect("validated non-empty");
    ctx.defect("product.adjoint", 1e-10, || {
        let g = last.scale(C64::new(0.5, -0.25));
        let a = weyl_product_exact(last, &g, &mag)?.adjoint();
        let b = weyl_product_exact(&g.adjoint(), &last.adjoint(), &mag)?;
        Ok((a.sup_norm(), b.sup_norm(), a.rel_diff(&b)?))
    });
}

fn suite_expansion(ctx: &mut Ctx) {
    let epss = ctx.cfg.suites.eps_list.clone();
    let mut d = [Vec::new(), Vec::new()];
    let mut meta = Vec::new();
    for &eps in &epss {
        let res = (|| -> Result<(usize, [f64; 2])> {
            let r = 7.0f64;
            let n = ((2.0 * r * r / (PI * eps)) / 2.0).ceil() as usize * 2;
            let g = PhaseGrid::new(1, n, r / eps)?;
            let mag = MagneticData::zero(1, eps)?;
            let f = matrix_gaussian(&g, eps, 0.3);
            let h = matrix_gaussian(&g, eps, -0.4);
            let exact = weyl_product_exact(&f, &h, &mag)?;
            let ser = weyl_product_expansion_with(&f, &h, &mag, 1, Scheme::FiniteDifference)?;
            let e0 = exact.sub(&ser.partial_sum(eps, 0)?)?.sup_norm();
            let e1 = exact.sub(&ser.partial_sum(eps, 1)?)?.sup_norm();
            Ok((n, [e0, e1]))
        })();
        match res {
            Ok((n, e)) => {
                d[0].push(e[0]);
                d[1].push(e[1]);
                meta.push((eps, n));
            }
            Err(e) => {
                ctx.error("expansion.order", CheckKind::Order, 0.2, e);
                return;
            }
        }
    }
    let orders = [order_fit(&epss, &d[0]), order_fit(&epss, &d[1])];
    let mut rows = Vec::new();
    for k in 0..2 {
        for (i, (eps, n)) in meta.iter().enumerate() {
            rows.push(vec![*eps, *n as f64, k as f64, d[k][i], orders[k]]);
        }
    }
    ctx.table("expansion", &["eps", "n", "N", "defect", "order"], rows);
    ctx.order("expansion.order_N0", orders[0], 1.0, 0.2);
    ctx.order("expansion.order_N1", orders[1], 2.0, 0.2);
}

/// `h = 0.8 [[cos r, sin(xi dx)], [sin(xi dx), -cos r]]` on an `r`-periodic box.
fn parametrix_setup(eps: f64, z: C64) -> Result<(Symbol, Symbol, Symbol, MagneticData)> {
    let n = (16.0 / eps).round() as usize;
    let n = n + n % 2;
    let g = PhaseGrid::new(1, n, PI / eps)?;
    let dx = g.dx(0);
    let mag = MagneticData::zero(1, eps)?;
    let h = Symbol::from_fn(&g, eps, 2, 2, |r, xi, m| {
        let s = (xi[0] * dx).sin();
        m[0] = C64::new(0.8 * r[0].cos(), 0.0);
        m[1] = C64::new(0.8 * s, 0.0);
        m[2] = C64::new(0.8 * s, 0.0);
        m[3] = C64::new(-0.8 * r[0].cos(), 0.0);
    });
    let f = h.shift_identity(-z)?;
    let mut g0 = f.clone();
    let mut g1 = f.clone();
    for ix in 0..g.n_states() {
        let r = f.r_point(ix)[0];
        for ik in 0..g.n_states() {
            let v = small_inverse(f.at(ix, ik), 2);
            let w: Vec<C64> = v.iter().map(|c| c * (1.0 + 0.5 * eps * r.cos())).collect();
            g0.at_mut(ix, ik).copy_from_slice(&v);
            g1.at_mut(ix, ik).copy_from_slice(&w);
        }
    }
    Ok((f, g0, g1, mag))
}

fn suite_parametrix(ctx: &mut Ctx) {
    let epss = ctx.cfg.suites.eps_list.clone();
    let z = C64::new(0.0, 1.0);
    let mut left = vec![Vec::new(); 3];
    let mut lr = vec![Vec::new(); 3];
    let mut ns = Vec::new();
    for &eps in &epss {
        let res = (|| -> Result<usize> {
            let (f, g0, g1, mag) = parametrix_setup(eps, z)?;
            let sl = parametrix(&f, &g0, 2, &mag, Side::Left)?;
            let sr = parametrix(&f, &g1, 2, &mag, Side::Right)?;
            for k in 0..3 {
                left[k].push(parametrix_defect(&sl, &f, k, &mag, Side::Left)?);
                let a = quantize(&sl.partial_sum(eps, k)?, &mag)?;
                let b = quantize(&sr.partial_sum(eps, k)?, &mag)?;
                lr[k].push(a.sub(&b)?.norm());
            }
            Ok(f.grid.n(0))
        })();
        match res {
            Ok(n) => ns.push(n),
            Err(e) => {
                ctx.error("parametrix.order", CheckKind::Order, 0.3, e);
                return;
            }
        }
    }
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    for k in 0..3 {
        let (ol, olr) = (order_fit(&epss, &left[k]), order_fit(&epss, &lr[k]));
        fits.push((ol, olr));
        for (i, &eps) in epss.iter().enumerate() {
            rows.push(vec![eps, ns[i] as f64, k as f64, left[k][i], lr[k][i], ol, olr]);
        }
    }
    ctx.table("parametrix", &["eps", "n", "N", "left_defect", "left_right_difference", "left_order", "left_right_order"], rows);
    for (k, (ol, olr)) in fits.into_iter().enumerate() {
        ctx.order(&format!("parametrix.left_order_N{k}"), ol, k as f64 + 1.0, 0.3);
        ctx.order(&format!("parametrix.left_right_order_N{k}"), olr, k as f64 + 1.0, 0.3);
    }
}

fn suite_resolvent(ctx: &mut Ctx) {
    let Some((h, mag)) = setup_or_fail(ctx, "resolvent", harmonic()) else { return };
    let op = match quantize(&h, &mag) {
        Ok(o) => o,
        Err(e) => return ctx.error("resolvent.setup", CheckKind::Defect, 0.0, e),
    };
    let oracle = |z: C64| hermitian_function(&op.m, move |l| C64::new(1.0, 0.0) / (C64::new(l, 0.0) - z));
    ctx.defect("resolvent.ground_level", 1e-8, || {
        let ev = eigvalsh(&op.m);
        Ok((ev[0], 1.0, (ev[0] - 1.0).abs()))
    });
    let z1 = C64::new(-1.0, 0.0);
    let z2 = C64::new(0.5, 1.0);
    ctx.defect("resolvent.oracle", 1e-8, || {
        let r = quantize(&crate::funcalc::moyal_resolvent(&h, z1, &mag)?, &mag)?;
        let want = oracle(z1);
        Ok((op_norm(&r.m), op_norm(&want), op_rel_diff(&r.m, &want)))
    });
    ctx.defect("resolvent.first_identity", 1e-7, || {
        let r1 = crate::funcalc::moyal_resolvent(&h, z1, &mag)?;
        let r2 = crate::funcalc::moyal_resolvent(&h, z2, &mag)?;
        let lhs = r1.sub(&r2)?;
        let rhs = weyl_product_exact(&r1, &r2, &mag)?.scale(z1 - z2);
        Ok((lhs.sup_norm(), rhs.sup_norm(), lhs.rel_diff(&rhs)?))
    });
}

fn suite_funcalc(ctx: &mut Ctx) {
    let Some((h, mag)) = setup_or_fail(ctx, "funcalc", harmonic()) else { return };
    let op = match quantize(&h, &mag) {
        Ok(o) => o,
        Err(e) => return ctx.error("funcalc.setup", CheckKind::Defect, 0.0, e),
    };
    ctx.defect("funcalc.helffer_sjostrand", 1e-4, || {
        let phi = Profile::Gaussian { center: 3.0, width: 1.0 };
        let s = quantize(&helffer_sjostrand(&h, &phi, 3, &mag)?, &mag)?;
        let want = hermitian_function(&op.m, |l| C64::new(phi.value(l), 0.0));
        Ok((op_norm(&s.m), op_norm(&want), op_rel_diff(&s.m, &want)))
    });
    match spectral_projection(&h, (0.0, 2.0), &mag) {
        Ok(p) => {
            ctx.push("funcalc.projection_trace", CheckKind::Defect, p.trace, 1.0, (p.trace - 1.0).abs(), 1e-6);
            ctx.push("funcalc.projection_idempotency", CheckKind::Defect, p.operator_defect, 0.0, p.operator_defect, 1e-8);
        }
        Err(e) => ctx.error("funcalc.projection", CheckKind::Defect, 1e-6, e),
    }
    ctx.defect("funcalc.weight_inverse", 1e-8, || {
        let w = weight_operator(&h.grid, 1.0, 1, 2.0, &mag)?;
        let wi = weight_operator(&h.grid, 1.0, 1, -2.0, &mag)?;
        let p = wi.compose(&w)?;
        let id = OperatorMatrix::identity(&h.grid, 1.0, 1);
        Ok((p.norm(), 1.0, p.sub(&id)?.norm()))
    });
}

fn suite_trace(ctx: &mut Ctx) {
    let Some((_, mag, syms)) = setup_or_fail(ctx, "trace", configured(ctx)) else { return };
    let d = ctx.cfg.grid.d;
    for (i, f) in syms.iter().enumerate() {
        let SymbolConfig::Gaussian { fiber, width, .. } = ctx.cfg.symbols[i].clone() else { continue };
        let name = symbol_name(ctx, i);
        ctx.defect(&format!("trace.formula.{name}"), 1e-6, || {
            let t = trace_formula_check(f, &mag)?;
            Ok((t.lhs.re, t.rhs.re, t.defect))
        });
        ctx.defect(&format!("trace.analytic.{name}"), 1e-6, || {
            let t = trace_formula_check(f, &mag)?;
            let want = gaussian_trace(d, fiber, width, mag.eps);
            Ok((t.lhs.re, want, (t.lhs - want).norm() / want))
        });
        ctx.defect(&format!("trace.hilbert_schmidt.{name}"), 1e-6, || {
            let hs = schatten_norm(&quantize(f, &mag)?, 2.0)?;
            let g = &f.grid;
            let mut w = 1.0;
            for j in 0..g.d() {
                w *= g.dx(j) * g.dxi(j) / (2.0 * PI);
            }
            let want = (w * f.values.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt();
            Ok((hs, want, (hs - want).abs() / want))
        });
    }
    trace_refinement(ctx);
}

/// Trace against the closed form on coarse grids refined by `n -> 2n`, `L -> sqrt(2) L`.
fn trace_refinement(ctx: &mut Ctx) {
    let mut rows = Vec::new();
    let mut dxs = Vec::new();
    let mut defects = [Vec::new(), Vec::new()];
    for level in 0..3 {
        let n = 8usize << level;
        let l = 3.0 * 2f64.sqrt().powi(level);
        let res = (|| -> Result<(f64, [f64; 2])> {
            let g = PhaseGrid::new(1, n, l)?;
            let mag = MagneticData::zero(1, 1.0)?;
            let mut out = [0.0; 2];
            for (k, fiber) in [1usize, 3].into_iter().enumerate() {
                let spec = SymbolConfig::Gaussian { fiber, width: 1.0, center: [0.0; 2], momentum: [0.0; 2] };
                let f = build_symbol(&spec, &g, 1.0, 0, 0);
                let lhs = crate::linalg::trace(&quantize(&f, &mag)?.m);
                let want = gaussian_trace(1, fiber, 1.0, 1.0);
                out[k] = (lhs - want).norm() / want;
            }
            Ok((g.dx(0), out))
        })();
        match res {
            Ok((dx, e)) => {
                dxs.push(dx);
                defects[0].push(e[0]);
                defects[1].push(e[1]);
                rows.push(vec![n as f64, l, dx, e[0], e[1]]);
            }
            Err(e) => return ctx.error("trace.refinement_order", CheckKind::Order, 0.0, e),
        }
    }
    let o = [order_fit(&dxs, &defects[0]), order_fit(&dxs, &defects[1])];
    for r in rows.iter_mut() {
        r.extend_from_slice(&o);
    }
    ctx.table("trace_refinement", &["n", "x_extent", "dx", "defect_scalar", "defect_matrix", "order_scalar", "order_matrix"], rows);
    ctx.order_at_least("trace.refinement_order_scalar", o[0], 2.0);
    ctx.order_at_least("trace.refinement_order_matrix", o[1], 2.0);
}

fn lattice(ctx: &Ctx) -> Result<(Lattice, PeriodicField)> {
    let c = &ctx.cfg.lattice;
    let lat = Lattice::cubic(c.d, c.a, c.n_k, c.n_y, c.n_c)?;
    let mut v = PeriodicField::zero();
    for t in &c.potential {
        v.coeffs.push((t.g, C64::new(t.amp, 0.0)));
        v.coeffs.push(([-t.g[0], -t.g[1]], C64::new(t.amp, 0.0)));
    }
    Ok((lat, v))
}

fn suite_zak(ctx: &mut Ctx) {
    let Some((lat, _)) = setup_or_fail(ctx, "zak", lattice(ctx)) else { return };
    ctx.push("zak.duality", CheckKind::Defect, lat.duality_defect(), 0.0, lat.duality_defect(), 1e-13);
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.cfg.params.seed);
    let psi: Vec<C64> = (0..lat.n_bz() * lat.n_torus()).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let norm = psi.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let z = match zak_transform(&psi, &lat) {
        Ok(z) => z,
        Err(e) => return ctx.error("zak.transform", CheckKind::Defect, 1e-10, e),
    };
    ctx.push("zak.unitarity", CheckKind::Defect, z.norm(), norm, (z.norm() - norm).abs() / norm, 1e-10);
    ctx.defect("zak.inverse", 1e-10, || {
        let back = inverse_zak(&z, &lat)?;
        let diff = back.iter().zip(&psi).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        Ok((diff, 0.0, diff / norm))
    });
    ctx.defect("zak.quasi_periodicity", 1e-10, || {
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        let d = lat.d();
        for kidx in [0, lat.n_bz() / 3, lat.n_bz() - 1] {
            let k = lat.bz_point(kidx);
            let base = zak_at(&psi, &lat, &k[..d])?;
            for j in lat.shifts(2) {
                let g = lat.reciprocal_point(j);
                let shifted = zak_at(&psi, &lat, &[k[0] - g[0], k[1] - g[1]][..d])?;
                for (y, (s, b)) in shifted.iter().zip(&base).enumerate() {
                    let yp = lat.torus_point(y);
                    let phase = C64::from_polar(1.0, g[0] * yp[0] + g[1] * yp[1]);
                    worst = worst.max((s - phase * b).norm());
                    scale = scale.max(b.norm());
                }
            }
        }
        Ok((worst, 0.0, rel(worst, scale)))
    });
}

/// Lowest eigenvalue of `(-i d/dy + k)^2 + V` on `[0, a)` by second-order finite
/// differences on `m` nodes.
fn mathieu_fd(lat: &Lattice, v: &PeriodicField, a: f64, k: f64, m: usize) -> f64 {
    let h = a / m as f64;
    let mat = Mat::<C64>::from_fn(m, m, |i, j| {
        let diag = C64::new(2.0 / (h * h) + k * k + v.value(lat, &[i as f64 * h]).re, 0.0);
        if i == j {
            return diag;
        }
        let up = (j + 1) % m == i; // j = i - 1
        let down = (i + 1) % m == j; // j = i + 1
        // -u'' - 2 i k u' with central differences
        if down {
            C64::new(-1.0 / (h * h), -k / h)
        } else if up {
            C64::new(-1.0 / (h * h), k / h)
        } else {
            ZERO
        }
    });
    eigvalsh(&mat)[0]
}

fn suite_equivariant(ctx: &mut Ctx) {
    let Some((lat, v)) = setup_or_fail(ctx, "equivariant", lattice(ctx)) else { return };
    let c = ctx.cfg.lattice.clone();
    let seed = ctx.cfg.params.seed;
    if c.d == 1 {
        let kmax = lat.dual(0)[0] / 4.0;
        for (label, k) in [("k0", 0.0), ("k_quarter", kmax)] {
            ctx.defect(&format!("equivariant.mathieu_band_{label}"), 1e-6, || {
                let h = fiber_operator(&lat, &v, None, &[k], c.modes)?;
                let nm = (2 * c.modes + 1).pow(c.d as u32);
                let band = eigvalsh(&crate::linalg::from_row_major(nm, nm, &h))[0];
                let coarse = mathieu_fd(&lat, &v, c.a, k, 256);
                let fine = mathieu_fd(&lat, &v, c.a, k, 512);
                let oracle = (4.0 * fine - coarse) / 3.0;
                Ok((band, oracle, (band - oracle).abs()))
            });
        }
    }
    let Some(cover) = setup_or_fail(ctx, "equivariant", lat.cover_grid()) else { return };
    let eps = cover.dxi(0);
    let mag = match MagneticData::zero(c.d, eps) {
        Ok(m) => m,
        Err(e) => return ctx.error("equivariant.setup", CheckKind::Defect, 0.0, e),
    };
    // second harmonic of the cover box in r
    let kappa = 2.0 * PI / (eps * cover.x_extent(0));
    let h = match bloch_symbol(&lat, &v, |r| 0.5 * (kappa * r[0]).cos(), c.modes, eps, 1) {
        Ok(h) => h,
        Err(e) => return ctx.error("equivariant.bloch_symbol", CheckKind::Defect, 1e-8, e),
    };
    ctx.push("equivariant.bloch_defect", CheckKind::Defect, h.defect, 0.0, h.defect, 1e-8);
    ctx.growth_check(&h, &lat, c.modes);
    for m in [0.0, 1.0, 2.0] {
        let name = format!("equivariant.tau_order_m{m}");
        let res = (|| -> Result<f64> {
            let l2 = Lattice::cubic(c.d, c.a, 4, c.n_y, 21)?;
            let t = GroupAction::mode_shift(&l2, 32, 0, 20)?.with_weight(sobolev_weight(&l2, 32, m))?;
            Ok(t.q)
        })();
        match res {
            Ok(q) => ctx.push(&name, CheckKind::Order, q, m, (q - m).abs(), (0.1 * m).max(1e-9)),
            Err(e) => ctx.error(&name, CheckKind::Order, 0.1 * m, e),
        }
    }
    let h2 = match bloch_symbol(&lat, &v.clone(), |r| 0.3 * (kappa * r[0]).sin(), c.modes, eps, 1) {
        Ok(h) => h,
        Err(e) => return ctx.error("equivariant.bloch_symbol", CheckKind::Defect, 1e-8, e),
    };
    ctx.defect("equivariant.product_exact", 1e-8, || {
        let pc = equivariant_product_check(&h, &h2, &mag)?;
        Ok((pc.defect_product, pc.defect_f.max(pc.defect_g), pc.defect_product))
    });
    ctx.defect("equivariant.product_perturbed_ratio", 10.0, || {
        let pc = equivariant_product_check(&perturb(&h, 1e-6)?, &perturb(&h2, 1e-6)?, &mag)?;
        let input = pc.defect_f.max(pc.defect_g);
        Ok((pc.defect_product, input, pc.defect_product / input))
    });
    let nt = lat.n_torus();
    let cmat = periodic_laplacian(nt, c.d);
    let f = match torus_symbol(&lat, &cmat, |r| 0.4 * (kappa * r[0]).cos(), eps) {
        Ok(f) => f,
        Err(e) => return ctx.error("equivariant.torus_symbol", CheckKind::Defect, 1e-8, e),
    };
    let z = C64::new(0.5, 1.0);
    ctx.defect("equivariant.resolvent_exact", 1e-8, || {
        let r = equivariant_resolvent(&f, z, &mag)?;
        Ok((r.defect, f.defect, r.defect))
    });
    ctx.defect("equivariant.resolvent_perturbed_ratio", 10.0, || {
        let fp = perturb(&f, 1e-6)?;
        let r = equivariant_resolvent(&fp, z, &mag)?;
        Ok((r.defect, fp.defect, r.defect / fp.defect))
    });
    ctx.defect("equivariant.intertwining", 1e-8, || {
        let cg: Vec<C64> = cmat.iter().map(|v| v * 0.5 + C64::new(0.3, 0.0)).collect();
        let g = torus_symbol(&lat, &cg, |r| 0.2 * (kappa * r[0]).sin(), eps)?;
        let fg = f.with_symbol(weyl_product_exact(&f.symbol, &g.symbol, &mag)?)?;
        let a = equivariant_quantize(&f, &mag)?.compose(&equivariant_quantize(&g, &mag)?)?;
        let b = equivariant_quantize(&fg, &mag)?;
        Ok((a.norm(), b.norm(), a.rel_diff(&b)?))
    });
    ctx.defect("equivariant.cell_unitary", 1e-12, || {
        let tau = GroupAction::torus_phase(&lat, 2)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
        let psi: Vec<C64> = (0..lat.n_bz() * nt).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let n0 = psi.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let one = [1, 0];
        let two = [if c.d == 2 { 1 } else { -1 }, if c.d == 2 { 1 } else { 0 }];
        let a = cell_unitary(&psi, &tau, one, [0, 0])?;
        let b = cell_unitary(&a, &tau, two, one)?;
        let direct = cell_unitary(&psi, &tau, two, [0, 0])?;
        let na = a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let comp = b.iter().zip(&direct).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
        Ok((na, n0, ((na - n0).abs() + comp) / n0))
    });
}

impl Ctx<'_> {
    fn growth_check(&mut self, h: &EquivariantSymbol, lat: &Lattice, modes: usize) {
        let w = sobolev_weight(lat, modes, 2.0);
        match growth_exponent(h, Some(&w)) {
            Ok(g) => self.order("equivariant.growth_exponent", g.exponent, 2.0, 0.2),
            Err(e) => self.error("equivariant.growth_exponent", CheckKind::Order, 0.2, e),
        }
    }
}

/// Adds `delta sin(2 pi k_0 / K) Id` with `K` the cover length, breaking equivariance by
/// `O(delta)`.
fn perturb(s: &EquivariantSymbol, delta: f64) -> Result<EquivariantSymbol> {
    let mut sym = s.symbol.clone();
    let g = sym.grid.clone();
    let span = g.n(0) as f64 * g.dxi(0);
    let ns = g.n_states();
    let dim = sym.n_out.min(sym.n_in);
    let q = sym.n_in;
    for ix in 0..ns {
        for ik in 0..ns {
            let k = g.xi_point(ik)[0];
            let v = delta * (2.0 * PI * k / span).sin();
            let o = sym.at_mut(ix, ik);
            for i in 0..dim {
                o[i * q + i] += v;
            }
        }
    }
    s.with_symbol(sym)
}

/// `2 d Id` minus nearest-neighbour couplings on the periodic torus nodes.
fn periodic_laplacian(nt: usize, d: usize) -> Vec<C64> {
    let side = if d == 2 { (nt as f64).sqrt().round() as usize } else { nt };
    let idx = |i: usize| if d == 2 { [i / side, i % side] } else { [i, 0] };
    let mut c = vec![ZERO; nt * nt];
    for a in 0..nt {
        c[a * nt + a] = C64::new(2.0 * d as f64, 0.0);
        for b in 0..nt {
            let (ia, ib) = (idx(a), idx(b));
            let mut near = 0;
            for j in 0..d {
                let diff = (ia[j] + side - ib[j]) % side;
                if diff == 1 || diff == side - 1 {
                    near += 1;
                } else if diff != 0 {
                    near = 9;
                }
            }
            if a != b && near == 1 {
                c[a * nt + b] -= C64::new(1.0, 0.0);
            }
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
  "grid": {"d": 1, "n": 32, "x_extent": 8.0},
  "params": {"eps": 1.0, "lambda": 0.5, "seed": 3}
}"#;

    #[test]
    fn missing_field_is_located() {
        let text = r#"{
  "grid": {"d": 1, "x_extent": 8.0},
  "params": {"eps": 1.0, "lambda": 0.5, "seed": 3}
}"#;
        let e = Config::parse(text).unwrap_err();
        assert_eq!(e.path, "grid");
        assert!(e.message.contains("missing field `n`"), "{e}");
        assert!(e.line.is_some());
    }

    #[test]
    fn semantic_errors_name_the_field() {
        let e = Config::parse(&MINIMAL.replace("\"n\": 32", "\"n\": 31")).unwrap_err();
        assert_eq!(e.path, "grid.n");
        assert_eq!(e.line, Some(2));
        let e = Config::parse(&MINIMAL.replace("\"eps\": 1.0", "\"eps\": 1.5")).unwrap_err();
        assert_eq!(e.path, "params.eps");
    }

    #[test]
    fn defaults_fill_optional_sections() {
        let c = Config::parse(MINIMAL).unwrap();
        assert_eq!(c.symbols.len(), 3);
        assert_eq!(c.magnetic, MagneticConfig::Zero);
        assert_eq!(c.suites.eps_list, vec![0.2, 0.1, 0.05]);
    }

    #[test]
    fn random_symbols_follow_the_seed() {
        let c = Config::parse(MINIMAL).unwrap();
        let a = c.build_symbol(2).unwrap();
        assert_eq!(a, c.build_symbol(2).unwrap());
        let mut c2 = c.clone();
        c2.params.seed = 4;
        assert_ne!(a, c2.build_symbol(2).unwrap());
    }

    #[test]
    fn tolerance_precedence() {
        let mut c = Config::parse(MINIMAL).unwrap();
        c.suites.tolerances.insert("gauge".into(), 1e-3);
        c.suites.tolerances.insert("gauge.x".into(), 1e-2);
        let ctx = Ctx { cfg: &c, tol_override: Some(5e-5), checks: vec![], tables: vec![] };
        assert_eq!(ctx.tolerance("gauge.x", CheckKind::Defect, 1.0), 1e-2);
        assert_eq!(ctx.tolerance("gauge.y", CheckKind::Defect, 1.0), 5e-5);
        assert_eq!(ctx.tolerance("gauge.y", CheckKind::Order, 1.0), 1e-3);
        assert_eq!(ctx.tolerance("trace.y", CheckKind::Order, 0.3), 0.3);
    }
}
