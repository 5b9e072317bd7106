//! Configuration-driven check suites.
//!
//! A suite file is line oriented. Top-level `key = value` lines set `seed`,
//! `output` and `format`; each `[check]` header opens a descriptor whose
//! `key=value` tokens may follow on the same line or on later lines. `#`
//! starts a comment. List values are comma separated and sweep the check over
//! every combination; the reported residual is the worst one.

use std::collections::BTreeMap;
use std::fmt;
use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::algebra::{
    casimir_centrality_residual, casimir_rewrite_residual, casimir_scalar_residual, coproduct_casimir_residual,
    coproduct_intertwining_residual, intertwined_pair, intertwining_residual, intertwining_residual_relative,
    kernel_matrix, structure_constants_residual, CasimirVariant, RepSpec,
};
use crate::diffops::{
    bep_casimir_rewrite_residual, bep_tensor_form_residual, bessel_operator_t_residual, change_of_variable_residual,
    continuous_duality_residual, intertwining_residual_continuous, ContinuousFamily, GridSpec, Poly2,
};
use crate::error::{Error, Result};
use crate::processes::{
    algebraic_vs_rate_residual, build_algebraic_generator, build_rate_generator, detailed_balance_residual,
    duality_matrix, enumerate_sector, generator_duality_residual, semigroup_duality_residual, DiscreteFamily, Graph,
    StationaryLaw,
};
use crate::report::{CheckReport, ReportFormat};
use crate::simulate::{bmp_quadrature_duality, empirical_law_tv, mc_duality_with_retry, McSetup, RngStream};
use crate::specfun::{bessel_ode_residual, KernelId};

pub const DEFAULT_SEED: u64 = 42;
pub const SEED_ENV_VAR: &str = "DUALITY_LAB_SEED";
pub const Z_THRESHOLD: f64 = 3.0;
/// The suite shipped with the binary.
pub const DEFAULT_SUITE: &str = include_str!("default_suite.conf");

/// Broad grouping of checks, one per CLI subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CheckClass {
    Algebra,
    Duality,
    Semigroup,
    Continuous,
    MonteCarlo,
}

macro_rules! check_kinds {
    ($($variant:ident => $name:literal, $class:ident, $tol:expr, $anchor:literal;)*) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum CheckKind {
            $($variant,)*
        }

        impl CheckKind {
            pub const ALL: &'static [CheckKind] = &[$(CheckKind::$variant,)*];

            pub fn name(self) -> &'static str {
                match self {
                    $(CheckKind::$variant => $name,)*
                }
            }

            pub fn class(self) -> CheckClass {
                match self {
                    $(CheckKind::$variant => CheckClass::$class,)*
                }
            }

            pub fn default_tolerance(self) -> f64 {
                match self {
                    $(CheckKind::$variant => $tol,)*
                }
            }

            pub fn anchor(self) -> &'static str {
                match self {
                    $(CheckKind::$variant => $anchor,)*
                }
            }
        }
    };
}

check_kinds! {
    Commutation => "commutation", Algebra, 1e-12, "commutation relations of the generators";
    CasimirCentrality => "casimir_centrality", Algebra, 1e-11, "Casimir commutes with H, E, F";
    CasimirScalar => "casimir_scalar", Algebra, 1e-12, "su(2) Casimir equals 2j(j+1)";
    CasimirCoproduct => "casimir_coproduct", Algebra, 1e-11, "coproduct of the Casimir";
    CasimirRewrite => "casimir_rewrite", Algebra, 1e-10, "Casimir as a reverse-symmetric polynomial";
    Intertwining => "intertwining", Algebra, 1e-10, "single-site kernel intertwines the operator pair";
    CoproductIntertwining => "coproduct_intertwining", Algebra, 1e-9, "product kernel intertwines the coproducts";
    AlgebraicGenerator => "algebraic_generator", Algebra, 1e-11, "tensor form of the two-site generator";
    GeneratorDuality => "generator_duality", Duality, 1e-10, "generator self-duality LD = DL^T";
    DetailedBalance => "detailed_balance", Duality, 1e-12, "reversible product measure";
    SemigroupDuality => "semigroup_duality", Semigroup, 1e-9, "semigroup self-duality";
    BmpQuadrature => "bmp_quadrature", Semigroup, 1e-6, "momentum process duality in expectation";
    BmpQuadratureStability => "bmp_quadrature_stability", Semigroup, 1e-8, "quadrature order doubling";
    BesselOde => "bessel_ode", Continuous, 1e-9, "Bessel differential equation";
    BesselT => "bessel_t", Continuous, 1e-9, "Bessel functions are eigenfunctions of T";
    ContinuousIntertwining => "continuous_intertwining", Continuous, 1e-8, "F and -E intertwined by the Bessel kernel";
    ContinuousCasimir => "continuous_casimir", Continuous, 1e-8, "Casimir rewrite on the Bessel kernel";
    ContinuousDuality => "continuous_duality", Continuous, 1e-6, "diffusion generator self-duality";
    ChangeOfVariable => "change_of_variable", Continuous, 1e-10, "momentum generator as conjugated energy generator";
    McDuality => "mc_duality", MonteCarlo, Z_THRESHOLD, "self-duality in expectation by simulation";
    SepLaw => "sep_law", MonteCarlo, 0.02, "Gillespie law against the matrix exponential";
}

impl CheckKind {
    pub fn is_statistical(self) -> bool {
        self == CheckKind::McDuality
    }
}

impl FromStr for CheckKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CheckKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownCheckName(s.to_string()))
    }
}

impl fmt::Display for CheckKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Sep,
    Sip,
    Irw,
    Bep,
    Bmp,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Sep => "SEP",
            Family::Sip => "SIP",
            Family::Irw => "IRW",
            Family::Bep => "BEP",
            Family::Bmp => "BMP",
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "SEP" => Ok(Family::Sep),
            "SIP" => Ok(Family::Sip),
            "IRW" => Ok(Family::Irw),
            "BEP" => Ok(Family::Bep),
            "BMP" => Ok(Family::Bmp),
            _ => Err(Error::BadParam(format!("unknown family `{s}`"))),
        }
    }
}

/// One `[check]` section.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckDescriptor {
    pub check: CheckKind,
    pub family: Option<Family>,
    /// Kernel family when it differs from the dynamics (negative controls).
    pub kernel: Option<Family>,
    pub params: BTreeMap<String, Vec<f64>>,
    pub edges: Option<Vec<(usize, usize)>>,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    pub checks: Vec<CheckDescriptor>,
    pub seed: u64,
    pub output_path: Option<PathBuf>,
    pub format: Option<ReportFormat>,
}

impl SuiteConfig {
    /// Seed precedence: explicit override, then the environment, then the file.
    pub fn resolve_seed(&mut self, cli_seed: Option<u64>) -> Result<()> {
        if let Some(s) = cli_seed {
            self.seed = s;
        } else if let Ok(v) = std::env::var(SEED_ENV_VAR) {
            self.seed = v
                .trim()
                .parse()
                .map_err(|_| Error::BadParamRange(format!("{SEED_ENV_VAR}={v} is not an unsigned integer")))?;
        }
        Ok(())
    }

    pub fn filter_class(mut self, class: CheckClass) -> Self {
        self.checks.retain(|d| d.check.class() == class);
        self
    }
}

const NUMERIC_KEYS: &[&str] = &[
    "j", "p", "k", "c", "lambda", "dim", "t", "totals", "max_total", "vertices", "n_samples", "order", "x0", "y0",
    "dt", "nu", "w", "first", "second", "relative", "max_degree", "kernel.j", "kernel.p", "kernel.k", "kernel.c",
    "kernel.lambda",
];

fn parse_list(line: usize, key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|v| {
            v.trim().parse::<f64>().map_err(|_| Error::Parse { line, message: format!("`{key}` expects numbers, got `{v}`") })
        })
        .collect()
}

fn parse_edges(line: usize, value: &str) -> Result<Vec<(usize, usize)>> {
    value
        .split(',')
        .map(|e| {
            let (a, b) = e
                .split_once('-')
                .ok_or_else(|| Error::Parse { line, message: format!("edge `{e}` is not of the form a-b") })?;
            let parse = |v: &str| {
                v.trim().parse::<usize>().map_err(|_| Error::Parse { line, message: format!("bad vertex `{v}`") })
            };
            Ok((parse(a)?, parse(b)?))
        })
        .collect()
}

fn is_half_integer(v: f64) -> bool {
    (2.0 * v).fract() == 0.0
}

fn check_range(key: &str, values: &[f64]) -> Result<()> {
    let base = key.strip_prefix("kernel.").unwrap_or(key);
    let ok = |v: f64| match base {
        "p" | "c" => v > 0.0 && v < 1.0,
        "j" => v > 0.0 && is_half_integer(v),
        "k" | "lambda" | "dt" => v > 0.0 && v.is_finite(),
        "t" => v >= 0.0 && v.is_finite(),
        "dim" => v >= 4.0 && v.fract() == 0.0,
        "n_samples" => v >= 100.0 && v.fract() == 0.0,
        "order" => v >= 20.0 && v.fract() == 0.0,
        "totals" | "max_total" | "max_degree" => v >= 0.0 && v.fract() == 0.0,
        "vertices" => v >= 1.0 && v.fract() == 0.0,
        "nu" => v > -1.0,
        _ => v.is_finite(),
    };
    match values.iter().find(|&&v| !ok(v)) {
        Some(v) => Err(Error::BadParamRange(format!("{key} = {v}"))),
        None => Ok(()),
    }
}

struct Draft {
    line: usize,
    name: Option<CheckKind>,
    family: Option<Family>,
    kernel: Option<Family>,
    params: BTreeMap<String, Vec<f64>>,
    edges: Option<Vec<(usize, usize)>>,
    tolerance: Option<f64>,
}

impl Draft {
    fn new(line: usize) -> Self {
        Self { line, name: None, family: None, kernel: None, params: BTreeMap::new(), edges: None, tolerance: None }
    }

    fn set(&mut self, line: usize, key: &str, value: &str) -> Result<()> {
        match key {
            "name" => self.name = Some(value.parse()?),
            "family" => self.family = Some(value.parse().map_err(|e: Error| Error::Parse { line, message: e.to_string() })?),
            "kernel" => self.kernel = Some(value.parse().map_err(|e: Error| Error::Parse { line, message: e.to_string() })?),
            "edges" => self.edges = Some(parse_edges(line, value)?),
            "tolerance" => {
                let tol = value
                    .parse::<f64>()
                    .map_err(|_| Error::Parse { line, message: format!("bad tolerance `{value}`") })?;
                if !(tol > 0.0) {
                    return Err(Error::BadParamRange(format!("tolerance = {tol}")));
                }
                self.tolerance = Some(tol);
            }
            _ if NUMERIC_KEYS.contains(&key) => {
                let values = parse_list(line, key, value)?;
                check_range(key, &values)?;
                self.params.insert(key.to_string(), values);
            }
            _ => return Err(Error::Parse { line, message: format!("unknown key `{key}`") }),
        }
        Ok(())
    }

    fn finish(self) -> Result<CheckDescriptor> {
        let check = self.name.ok_or(Error::Parse { line: self.line, message: "check without a name".into() })?;
        Ok(CheckDescriptor {
            check,
            family: self.family,
            kernel: self.kernel,
            params: self.params,
            edges: self.edges,
            tolerance: self.tolerance.unwrap_or_else(|| check.default_tolerance()),
        })
    }
}

/// Splits a line into `key=value` tokens, allowing spaces around `=` and
/// after commas.
fn tokens(line: &str) -> Vec<String> {
    let joined = line.split('=').map(str::trim).collect::<Vec<_>>().join("=");
    let joined = joined.split(',').map(str::trim).collect::<Vec<_>>().join(",");
    joined.split_whitespace().map(str::to_string).collect()
}

pub fn parse_config(text: &str) -> Result<SuiteConfig> {
    let mut config = SuiteConfig { checks: Vec::new(), seed: DEFAULT_SEED, output_path: None, format: None };
    let mut current: Option<Draft> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let rest = if let Some(rest) = content.strip_prefix("[check]") {
            if let Some(done) = current.take() {
                config.checks.push(done.finish()?);
            }
            current = Some(Draft::new(line));
            rest
        } else if content.starts_with('[') {
            return Err(Error::Parse { line, message: format!("unknown section `{content}`") });
        } else {
            content
        };
        for token in tokens(rest) {
            let (key, value) = token
                .split_once('=')
                .filter(|(k, v)| !k.is_empty() && !v.is_empty())
                .ok_or_else(|| Error::Parse { line, message: format!("expected key=value, got `{token}`") })?;
            match current.as_mut() {
                Some(draft) => draft.set(line, key, value)?,
                None => match key {
                    "seed" => {
                        config.seed = value
                            .parse()
                            .map_err(|_| Error::Parse { line, message: format!("bad seed `{value}`") })?
                    }
                    "output" => config.output_path = Some(PathBuf::from(value)),
                    "format" => config.format = Some(value.parse()?),
                    _ => return Err(Error::Parse { line, message: format!("unknown top-level key `{key}`") }),
                },
            }
        }
    }
    if let Some(done) = current.take() {
        config.checks.push(done.finish()?);
    }
    Ok(config)
}

/// The bundled suite.
pub fn default_suite() -> SuiteConfig {
    parse_config(DEFAULT_SUITE).expect("bundled suite parses")
}

/// A family together with one value of each of its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Point {
    family: Family,
    a: f64,
    b: f64,
}

impl Point {
    fn kernel(&self) -> Result<KernelId> {
        match self.family {
            Family::Sep => KernelId::sep(self.a, self.b),
            Family::Sip => KernelId::sip(self.a, self.b),
            Family::Irw => KernelId::irw(self.a),
            Family::Bep => KernelId::bep(self.a),
            Family::Bmp => Ok(KernelId::Bmp),
        }
    }

    fn discrete(&self) -> Result<DiscreteFamily> {
        match self.family {
            Family::Sep => DiscreteFamily::sep(self.a),
            Family::Sip => DiscreteFamily::sip(self.a),
            Family::Irw => Ok(DiscreteFamily::Irw),
            f => Err(Error::NotApplicable(format!("{} is not a particle system", f.name()))),
        }
    }

    fn continuous(&self) -> Result<ContinuousFamily> {
        match self.family {
            Family::Bep => ContinuousFamily::bep(self.a),
            Family::Bmp => Ok(ContinuousFamily::Bmp),
            f => Err(Error::NotApplicable(format!("{} is not a diffusion", f.name()))),
        }
    }

    fn rep(&self, dim: usize) -> Result<RepSpec> {
        match self.family {
            Family::Sep => RepSpec::su2(self.a)?.with_p(self.b),
            Family::Sip => RepSpec::su11(self.a, dim)?.with_c(self.b),
            Family::Irw => RepSpec::heisenberg(self.a, dim),
            f => Err(Error::NotApplicable(format!("{} has no matrix representation", f.name()))),
        }
    }
}

impl CheckDescriptor {
    fn family(&self) -> Result<Family> {
        self.family.ok_or_else(|| Error::MissingParam(format!("{} needs a family", self.check)))
    }

    fn list(&self, key: &str, default: &[f64]) -> Vec<f64> {
        self.params.get(key).cloned().unwrap_or_else(|| default.to_vec())
    }

    fn single(&self, key: &str, default: f64) -> Result<f64> {
        match self.params.get(key).map(Vec::as_slice) {
            None => Ok(default),
            Some([v]) => Ok(*v),
            Some(_) => Err(Error::BadParam(format!("`{key}` takes a single value"))),
        }
    }

    fn usize(&self, key: &str, default: usize) -> Result<usize> {
        Ok(self.single(key, default as f64)? as usize)
    }

    fn points_for(&self, family: Family, prefix: &str) -> Vec<Point> {
        let get = |key: &str, default: &[f64]| self.list(&format!("{prefix}{key}"), default);
        let mut out = Vec::new();
        let (first, second) = match family {
            Family::Sep => (get("j", &[0.5]), get("p", &[0.5])),
            Family::Sip => (get("k", &[0.5]), get("c", &[0.5])),
            Family::Irw => (get("lambda", &[1.0]), vec![0.0]),
            Family::Bep => (get("k", &[0.5]), vec![0.0]),
            Family::Bmp => (vec![0.0], vec![0.0]),
        };
        for &a in &first {
            for &b in &second {
                out.push(Point { family, a, b });
            }
        }
        out
    }

    fn points(&self) -> Result<Vec<Point>> {
        Ok(self.points_for(self.family()?, ""))
    }

    /// Kernel used against the dynamics at `point`; an explicit `kernel=`
    /// takes its parameters from `kernel.*` keys.
    fn kernel_at(&self, point: &Point) -> Result<KernelId> {
        match self.kernel {
            None => point.kernel(),
            Some(f) => self.points_for(f, "kernel.")[0].kernel(),
        }
    }

    fn graphs(&self) -> Result<Vec<Graph>> {
        match &self.edges {
            Some(edges) => {
                let n = edges.iter().map(|&(a, b)| a.max(b) + 1).max().unwrap_or(1);
                Ok(vec![Graph::new(self.usize("vertices", n)?, edges)?])
            }
            None => self.list("vertices", &[2.0]).iter().map(|&n| Graph::path(n as usize)).collect(),
        }
    }

    fn sector_pairs(&self, family: DiscreteFamily, graph: &Graph) -> Result<Vec<(u32, u32)>> {
        if let Some(t) = self.params.get("totals") {
            return match t.as_slice() {
                [a, b] => Ok(vec![(*a as u32, *b as u32)]),
                _ => Err(Error::BadParam("`totals` takes two values".into())),
            };
        }
        let cap = family.capacity().map_or(u32::MAX, |c| c.saturating_mul(graph.n_vertices() as u32));
        let max = (self.usize("max_total", 5)? as u32).min(cap);
        Ok((0..=max).flat_map(|a| (0..=max).map(move |b| (a, b))).collect())
    }

    fn default_dim(&self, family: Family, check: CheckKind) -> usize {
        match (family, check) {
            (Family::Sip, CheckKind::Intertwining) => 16,
            (Family::Irw, CheckKind::Intertwining) => 8,
            (Family::Sip, CheckKind::CoproductIntertwining) => 10,
            (Family::Irw, CheckKind::CoproductIntertwining) => 6,
            (_, CheckKind::CasimirCoproduct) => 12,
            (_, CheckKind::AlgebraicGenerator) => 10,
            _ => 40,
        }
    }

    fn dim(&self, family: Family) -> Result<usize> {
        self.usize("dim", self.default_dim(family, self.check))
    }

    fn grid(&self, family: Family) -> Result<GridSpec> {
        let standard = match family {
            Family::Bmp => GridSpec::standard_bmp(),
            _ => GridSpec::standard_bep(),
        };
        match (self.params.get("first"), self.params.get("second")) {
            (None, None) => Ok(standard),
            (first, second) => {
                let mut g = GridSpec::new(
                    first.cloned().unwrap_or(standard.first.clone()),
                    second.cloned().unwrap_or(standard.second.clone()),
                )?;
                g.exclusion_radius = standard.exclusion_radius;
                Ok(g)
            }
        }
    }

    fn bessel_orders(&self) -> Vec<f64> {
        match self.params.get("nu") {
            Some(nu) => nu.clone(),
            None => self.list("k", &[0.25, 0.5, 1.0]).iter().map(|k| 2.0 * k - 1.0).collect(),
        }
    }

    fn pair(&self, key: &str, default: (f64, f64)) -> Result<(f64, f64)> {
        match self.params.get(key).map(Vec::as_slice) {
            None => Ok(default),
            Some([a, b]) => Ok((*a, *b)),
            Some(_) => Err(Error::BadParam(format!("`{key}` takes two values"))),
        }
    }

    fn configuration(&self, key: &str, default: &[u32]) -> Result<Vec<u32>> {
        match self.params.get(key) {
            None => Ok(default.to_vec()),
            Some(v) if v.iter().all(|x| *x >= 0.0 && x.fract() == 0.0) => Ok(v.iter().map(|&x| x as u32).collect()),
            Some(_) => Err(Error::BadParamRange(format!("`{key}` must hold occupation numbers"))),
        }
    }

    /// Parameters as recorded in the report; list entries get an index suffix.
    pub fn report_params(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        for (key, values) in &self.params {
            if let [v] = values.as_slice() {
                out.insert(key.clone(), *v);
            } else {
                for (i, v) in values.iter().enumerate() {
                    out.insert(format!("{key}.{i}"), *v);
                }
            }
        }
        out
    }

    fn family_label(&self) -> String {
        match (self.family, self.kernel) {
            (Some(f), Some(k)) if f != k => format!("{}/{}", f.name(), k.name()),
            (Some(f), _) => f.name().to_string(),
            (None, _) => String::new(),
        }
    }
}

fn max_over<T>(items: impl IntoIterator<Item = T>, f: impl Fn(T) -> Result<f64>) -> Result<f64> {
    let mut worst = 0.0f64;
    for item in items {
        let r = f(item)?;
        if r.is_nan() {
            return Ok(f64::NAN);
        }
        worst = worst.max(r);
    }
    Ok(worst)
}

const BMP_STARTS: [(f64, f64); 3] = [(1.0, 0.0), (0.5, -0.5), (-0.3, 1.2)];
const BMP_TARGETS: [(f64, f64); 3] = [(0.5, 0.5), (1.0, -1.0), (0.2, 0.7)];

type Pair = (f64, f64);

fn bmp_pairs(d: &CheckDescriptor) -> Result<Vec<(Pair, Pair)>> {
    if d.params.contains_key("x0") || d.params.contains_key("y0") {
        return Ok(vec![(d.pair("x0", BMP_STARTS[0])?, d.pair("y0", BMP_TARGETS[0])?)]);
    }
    Ok(BMP_STARTS.iter().flat_map(|&x| BMP_TARGETS.iter().map(move |&y| (x, y))).collect())
}

fn residual(d: &CheckDescriptor, seed: u64) -> Result<f64> {
    match d.check {
        CheckKind::Commutation => max_over(d.points()?, |pt| {
            structure_constants_residual(&pt.rep(d.dim(pt.family)?)?)
        }),
        CheckKind::CasimirCentrality => max_over(d.points()?, |pt| {
            casimir_centrality_residual(&pt.rep(d.dim(pt.family)?)?)
        }),
        CheckKind::CasimirScalar => max_over(d.points()?, |pt| casimir_scalar_residual(&pt.rep(0)?)),
        CheckKind::CasimirCoproduct => max_over(d.points()?, |pt| {
            coproduct_casimir_residual(&pt.rep(d.dim(pt.family)?)?)
        }),
        CheckKind::CasimirRewrite => max_over(d.points()?, |pt| {
            let variant = match pt.family {
                Family::Sep => CasimirVariant::Sep,
                Family::Sip => CasimirVariant::Sip,
                f => return Err(Error::NotApplicable(format!("no Casimir rewrite for {}", f.name()))),
            };
            casimir_rewrite_residual(&pt.rep(d.dim(pt.family)?)?, variant)
        }),
        CheckKind::Intertwining | CheckKind::CoproductIntertwining => {
            let relative = d.single("relative", 0.0)? != 0.0;
            max_over(d.points()?, |pt| {
                let spec = pt.rep(d.dim(pt.family)?)?;
                let (a, b) = intertwined_pair(&spec)?;
                let k = kernel_matrix(&d.kernel_at(&pt)?, spec.dim)?;
                match (d.check, relative) {
                    (CheckKind::CoproductIntertwining, _) => coproduct_intertwining_residual(&a, &b, &k),
                    (_, true) => intertwining_residual_relative(&a, &b, &k),
                    _ => intertwining_residual(&a, &b, &k),
                }
            })
        }
        CheckKind::AlgebraicGenerator => max_over(d.points()?, |pt| {
            let generator = build_algebraic_generator(pt.discrete()?, pt.a, d.dim(pt.family)?)?;
            let r = algebraic_vs_rate_residual(&generator, pt.discrete()?)?;
            Ok(r.max(generator.alternate_form_residual.unwrap_or(0.0)))
        }),
        CheckKind::GeneratorDuality | CheckKind::SemigroupDuality => {
            let times = d.list("t", &[0.1, 1.0]);
            max_over(d.points()?, |pt| {
                let family = pt.discrete()?;
                let kernel = d.kernel_at(&pt)?;
                max_over(d.graphs()?, |graph| {
                    max_over(d.sector_pairs(family, &graph)?, |(a, b)| {
                        let sx = enumerate_sector(family, &graph, a)?;
                        let sy = enumerate_sector(family, &graph, b)?;
                        let l1 = build_rate_generator(&sx);
                        let l2 = build_rate_generator(&sy);
                        let dm = duality_matrix(&kernel, &sx, &sy)?;
                        if d.check == CheckKind::GeneratorDuality {
                            generator_duality_residual(l1.entries(), &dm, l2.entries())
                        } else {
                            max_over(&times, |&t| semigroup_duality_residual(l1.entries(), &dm, l2.entries(), t))
                        }
                    })
                })
            })
        }
        CheckKind::DetailedBalance => max_over(d.points()?, |pt| {
            let family = pt.discrete()?;
            let law = match family {
                DiscreteFamily::Irw => StationaryLaw::for_family(family, pt.a)?,
                _ => StationaryLaw::for_family(family, d.single("p", 0.5)?)?,
            };
            max_over(d.graphs()?, |graph| {
                let cap = family.capacity().map_or(u32::MAX, |c| c * graph.n_vertices() as u32);
                let max = (d.usize("max_total", 5)? as u32).min(cap);
                max_over(0..=max, |n| detailed_balance_residual(&build_rate_generator(&enumerate_sector(family, &graph, n)?), &law))
            })
        }),
        CheckKind::BesselOde => {
            let us: Vec<f64> = (1..=40).map(|i| 0.25 * f64::from(i)).collect();
            max_over(d.bessel_orders(), |nu| bessel_ode_residual(nu, &us))
        }
        CheckKind::BesselT => {
            let zs = d.list("first", &[0.2, 0.5, 1.0, 2.0, 4.0]);
            let ws = d.list("w", &[0.5, 1.0, 2.0]);
            max_over(d.bessel_orders(), |nu| max_over(&ws, |&w| bessel_operator_t_residual(nu, w, &zs)))
        }
        CheckKind::ContinuousIntertwining => {
            let grid = d.grid(Family::Bep)?;
            max_over(d.list("k", &[0.25, 0.5, 1.0]), |k| intertwining_residual_continuous(k, &grid))
        }
        CheckKind::ContinuousCasimir => {
            let grid = d.grid(Family::Bep)?;
            max_over(d.list("k", &[0.25, 0.5, 1.0]), |k| {
                Ok(bep_casimir_rewrite_residual(k, &grid)?.max(bep_tensor_form_residual(k, &grid)?))
            })
        }
        CheckKind::ContinuousDuality => {
            let family = d.family()?;
            let grid = d.grid(family)?;
            max_over(d.points()?, |pt| continuous_duality_residual(pt.continuous()?, &grid))
        }
        CheckKind::ChangeOfVariable => {
            let max_degree = d.usize("max_degree", 3)? as u32;
            let grid = d.grid(Family::Bmp)?;
            let mut polys: Vec<Poly2> = Vec::new();
            for a in 0..=max_degree {
                for b in 0..=max_degree - a {
                    polys.push(Poly2::new(&[((a, b), 1.0)]));
                }
            }
            polys.push(Poly2::new(&[((0, 0), 0.5), ((1, 0), -1.0), ((1, 1), 2.0), ((0, 2), 0.25)]));
            max_over(&polys, |f| {
                max_over(&grid.first, |&x1| max_over(&grid.second, |&x2| change_of_variable_residual(f, x1, x2)))
            })
        }
        CheckKind::BmpQuadrature | CheckKind::BmpQuadratureStability => {
            let order = d.usize("order", 40)?;
            max_over(d.list("t", &[0.1, 0.5, 1.0]), |t| {
                max_over(bmp_pairs(d)?, |(x, y)| {
                    let (l, r) = bmp_quadrature_duality(x, y, t, order)?;
                    if d.check == CheckKind::BmpQuadrature {
                        return Ok((l - r).abs());
                    }
                    let (l2, r2) = bmp_quadrature_duality(x, y, t, 2 * order)?;
                    Ok((l - l2).abs().max((r - r2).abs()))
                })
            })
        }
        CheckKind::McDuality => {
            let t = d.single("t", 0.5)?;
            let n = d.usize("n_samples", 100_000)?;
            max_over(d.points()?, |pt| {
                let setup = match pt.family {
                    Family::Bep => McSetup::Bep {
                        k: pt.a,
                        z0: d.pair("x0", (0.5, 1.5))?,
                        w0: d.pair("y0", (1.0, 0.8))?,
                        dt: d.single("dt", 1e-3)?,
                    },
                    Family::Bmp => McSetup::Bmp { x0: d.pair("x0", (1.0, 0.0))?, y0: d.pair("y0", (0.5, 0.5))? },
                    _ => McSetup::Discrete {
                        kernel: d.kernel_at(&pt)?,
                        graph: d.graphs()?.remove(0),
                        x0: d.configuration("x0", &[2, 1])?,
                        y0: d.configuration("y0", &[1, 1])?,
                    },
                };
                let (est, seeds) = mc_duality_with_retry(&setup, t, n, seed, Z_THRESHOLD)?;
                log::info!(
                    "{} mc_duality seeds {seeds:?}: left {:.6e} ± {:.2e}, right {:.6e} ± {:.2e}, z = {:.3}",
                    pt.family.name(),
                    est.left.mean,
                    est.left.stderr,
                    est.right.mean,
                    est.right.stderr,
                    est.z_score
                );
                Ok(est.z_score)
            })
        }
        CheckKind::SepLaw => {
            let t = d.single("t", 0.5)?;
            let n = d.usize("n_samples", 100_000)?;
            let graph = d.graphs()?.remove(0);
            let x0 = d.configuration("x0", &[1, 0])?;
            max_over(d.points()?, |pt| empirical_law_tv(pt.discrete()?, &graph, &x0, t, n, RngStream::new(seed, 1)))
        }
    }
}

/// Runs one descriptor. Errors and panics become failed reports.
pub fn run_check(d: &CheckDescriptor, seed: u64) -> CheckReport {
    let start = Instant::now();
    let outcome = panic::catch_unwind(AssertUnwindSafe(|| residual(d, seed)))
        .unwrap_or_else(|payload| {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            Err(Error::DomainError(format!("check panicked: {msg}")))
        });
    let elapsed = start.elapsed();
    let name = d.check.name();
    let family = d.family_label();
    match outcome {
        Ok(r) => CheckReport::from_residual(name, &family, d.report_params(), r, d.tolerance, d.check.anchor(), elapsed),
        Err(e) => {
            let mut report = CheckReport::from_error(name, &family, d.report_params(), d.tolerance, &e, elapsed);
            report.anchor = d.check.anchor().to_string();
            report
        }
    }
}

/// One report per descriptor, in config order.
pub fn run_suite(config: &SuiteConfig) -> Vec<CheckReport> {
    config.checks.par_iter().map(|d| run_check(d, config.seed)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_valid() {
        let c = parse_config("").unwrap();
        assert!(c.checks.is_empty());
        assert_eq!(c.seed, DEFAULT_SEED);
        assert!(run_suite(&c).is_empty());
        let c = parse_config("# only a comment\n\nseed = 7\n").unwrap();
        assert_eq!(c.seed, 7);
    }

    #[test]
    fn single_line_descriptor() {
        let c = parse_config("[check] name=generator_duality family=SEP j=0.5 p=0.5 edges=0-1 totals=1,1").unwrap();
        assert_eq!(c.checks.len(), 1);
        let d = &c.checks[0];
        assert_eq!(d.check, CheckKind::GeneratorDuality);
        assert_eq!(d.family, Some(Family::Sep));
        assert_eq!(d.params["j"], vec![0.5]);
        assert_eq!(d.params["totals"], vec![1.0, 1.0]);
        assert_eq!(d.edges, Some(vec![(0, 1)]));
        assert_eq!(d.tolerance, 1e-10);
    }

    #[test]
    fn multi_line_descriptor_with_spaces() {
        let text = "seed = 9\n[check]\nname = commutation\nfamily = SIP  # su(1,1)\nk = 0.5, 1\ntolerance = 1e-11\n";
        let c = parse_config(text).unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.checks[0].params["k"], vec![0.5, 1.0]);
        assert_eq!(c.checks[0].tolerance, 1e-11);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(parse_config("[check] name=generator_duality p=1.5"), Err(Error::BadParamRange(_))));
        assert!(matches!(parse_config("[check] name=nope"), Err(Error::UnknownCheckName(_))));
        assert!(matches!(parse_config("[check] name=commutation tolerance=-1"), Err(Error::BadParamRange(_))));
        assert!(matches!(parse_config("[check] name=commutation j=0.3"), Err(Error::BadParamRange(_))));
        assert!(matches!(parse_config("\n\n[check] family=SEP"), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(parse_config("[check] name=commutation bogus=1"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_config("[other]"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_config("[check] name=commutation j"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_config("[check] name=commutation edges=0_1"), Err(Error::Parse { .. })));
    }

    #[test]
    fn seed_precedence() {
        let mut c = parse_config("seed=5").unwrap();
        c.resolve_seed(Some(11)).unwrap();
        assert_eq!(c.seed, 11);
    }

    #[test]
    fn check_names_round_trip() {
        for &k in CheckKind::ALL {
            assert_eq!(k.name().parse::<CheckKind>().unwrap(), k);
            assert!(k.default_tolerance() > 0.0);
            assert!(!k.anchor().is_empty());
        }
    }

    #[test]
    fn mismatched_kernel_fails() {
        let c = parse_config("[check] name=generator_duality family=SIP k=0.5 kernel=SEP kernel.j=2 max_total=2")
            .unwrap();
        let r = run_suite(&c);
        assert!(!r[0].passed);
        assert!(r[0].residual >= 1e-3, "{}", r[0]);
        assert_eq!(r[0].family, "SIP/SEP");
    }

    #[test]
    fn errors_become_failed_reports() {
        let c = parse_config("[check] name=casimir_scalar family=IRW\n[check] name=generator_duality family=SEP totals=9,9")
            .unwrap();
        let r = run_suite(&c);
        assert!(r.iter().all(|r| !r.passed && r.error.is_some()));
    }

    #[test]
    fn duplicates_give_identical_reports() {
        let line = "[check] name=generator_duality family=SEP j=0.5 p=0.5 edges=0-1 totals=1,1\n";
        let c = parse_config(&line.repeat(2)).unwrap();
        let mut r = run_suite(&c);
        assert!(r[0].passed);
        r.iter_mut().for_each(|r| r.elapsed_ms = 0.0);
        assert_eq!(r[0], r[1]);
    }

    #[test]
    fn default_suite_parses() {
        let c = default_suite();
        assert!(!c.checks.is_empty());
        for class in [CheckClass::Algebra, CheckClass::Duality, CheckClass::Semigroup, CheckClass::Continuous, CheckClass::MonteCarlo] {
            assert!(c.checks.iter().any(|d| d.check.class() == class));
        }
    }
}
