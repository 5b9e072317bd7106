//! Special functions: Pochhammer symbols, generalized hypergeometric series,
//! the Krawtchouk, Meixner and Charlier families, Bessel functions of the
//! first kind, and the single-site duality kernels built from them.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};

/// Default term budget for non-terminating series.
pub const DEFAULT_MAX_TERMS: usize = 500;
/// Bessel series: tail tolerance and term budget.
pub const BESSEL_TAIL_TOLERANCE: f64 = 1e-16;
pub const BESSEL_MAX_TERMS: usize = 200;
/// Largest argument accepted by the Bessel power series.
pub const BESSEL_MAX_ARG: f64 = 30.0;

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// `ln|Γ(x)|` together with the sign of `Γ(x)`.
pub fn ln_gamma_signed(x: f64) -> (f64, f64) {
    let (lg, sign) = libm::lgamma_r(x);
    (lg, if sign < 0 { -1.0 } else { 1.0 })
}

/// `1/Γ(x)`, which vanishes at the poles `x = 0, -1, -2, ...`.
pub fn recip_gamma(x: f64) -> f64 {
    if is_nonpositive_integer(x) {
        return 0.0;
    }
    let (lg, sign) = ln_gamma_signed(x);
    sign * (-lg).exp()
}

pub(crate) fn is_nonpositive_integer(x: f64) -> bool {
    x <= 0.0 && x == x.round()
}

/// Rising factorial `(a)_m = a (a+1) ... (a+m-1)`.
pub fn pochhammer(a: f64, m: u32) -> f64 {
    (0..m).fold(1.0, |acc, i| acc * (a + f64::from(i)))
}

/// Half-integer spin label `j`, stored as the integer `2j >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Spin(u32);

impl Spin {
    pub fn from_two_j(two_j: u32) -> Result<Self> {
        if two_j == 0 {
            return Err(Error::BadParam("j must be positive".into()));
        }
        Ok(Spin(two_j))
    }

    pub fn new(j: f64) -> Result<Self> {
        let two_j = 2.0 * j;
        if !(two_j >= 1.0) || two_j != two_j.round() || two_j > 1e6 {
            return Err(Error::BadParam(format!("j = {j} is not a positive half-integer")));
        }
        Ok(Spin(two_j as u32))
    }

    pub fn two_j(self) -> u32 {
        self.0
    }

    pub fn j(self) -> f64 {
        f64::from(self.0) / 2.0
    }
}

impl fmt::Display for Spin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_multiple_of(2) {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

/// A generalized hypergeometric series `rFs(a; b; x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperSpec {
    pub numerator_params: Vec<f64>,
    pub denominator_params: Vec<f64>,
    pub argument: f64,
    pub max_terms: usize,
    pub tail_tolerance: f64,
}

impl HyperSpec {
    pub fn new(numerator: &[f64], denominator: &[f64], argument: f64) -> Self {
        Self {
            numerator_params: numerator.to_vec(),
            denominator_params: denominator.to_vec(),
            argument,
            max_terms: DEFAULT_MAX_TERMS,
            tail_tolerance: 1e-16,
        }
    }

    pub fn with_budget(mut self, max_terms: usize, tail_tolerance: f64) -> Self {
        self.max_terms = max_terms;
        self.tail_tolerance = tail_tolerance;
        self
    }

    /// Degree `n` of the polynomial when some numerator parameter equals `-n`.
    pub fn terminating_degree(&self) -> Option<u32> {
        self.numerator_params
            .iter()
            .filter(|a| is_nonpositive_integer(**a))
            .map(|a| (-a) as u32)
            .min()
    }

    fn validate(&self) -> Result<()> {
        if self.max_terms == 0 {
            return Err(Error::BadParam("max_terms must be positive".into()));
        }
        if !(self.tail_tolerance > 0.0) {
            return Err(Error::BadParam("tail_tolerance must be positive".into()));
        }
        let finite = self
            .numerator_params
            .iter()
            .chain(&self.denominator_params)
            .chain(std::iter::once(&self.argument))
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::BadParam("non-finite hypergeometric parameter".into()));
        }
        Ok(())
    }
}

/// Value of a hypergeometric series and the number of terms summed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesSum {
    pub value: f64,
    pub terms: usize,
}

/// Sums the series, reporting how many terms were used.
pub fn hyper_pfq_detailed(spec: &HyperSpec) -> Result<SeriesSum> {
    spec.validate()?;
    let x = spec.argument;
    let ratio = |m: usize| -> Result<f64> {
        let mf = m as f64;
        let mut r = x / (mf + 1.0);
        for a in &spec.numerator_params {
            r *= a + mf;
        }
        for b in &spec.denominator_params {
            let d = b + mf;
            if d == 0.0 {
                return Err(Error::ZeroDenominatorParam { param: *b, term: m + 1 });
            }
            r /= d;
        }
        Ok(r)
    };

    let mut acc = CompensatedSum::new();
    let mut term = 1.0;
    acc.add(term);

    if let Some(n) = spec.terminating_degree() {
        let n = n as usize;
        for m in 0..n {
            term *= ratio(m)?;
            acc.add(term);
        }
        return Ok(SeriesSum { value: acc.value(), terms: n + 1 });
    }

    for m in 0..spec.max_terms.saturating_sub(1) {
        term *= ratio(m)?;
        acc.add(term);
        if term == 0.0 || term.abs() <= spec.tail_tolerance * acc.value().abs() {
            return Ok(SeriesSum { value: acc.value(), terms: m + 2 });
        }
    }
    Err(Error::NonTerminatingDivergence {
        max_terms: spec.max_terms,
        tolerance: spec.tail_tolerance,
    })
}

pub fn hyper_pfq(spec: &HyperSpec) -> Result<f64> {
    hyper_pfq_detailed(spec).map(|s| s.value)
}

fn check_unit_interval(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::OutOfRange(format!("{name} = {v} must lie in (0,1)")))
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::OutOfRange(format!("{name} = {v} must be positive")))
    }
}

/// Symmetric Krawtchouk polynomial `K_n(x) = 2F1(-n, -x; -2j; 1/p)`.
pub fn krawtchouk(n: u32, x: u32, j: Spin, p: f64) -> Result<f64> {
    let two_j = j.two_j();
    if n > two_j || x > two_j {
        return Err(Error::OutOfRange(format!("n = {n}, x = {x} exceed 2j = {two_j}")));
    }
    check_unit_interval("p", p)?;
    hyper_pfq(&HyperSpec::new(
        &[-f64::from(n), -f64::from(x)],
        &[-f64::from(two_j)],
        1.0 / p,
    ))
}

/// Meixner polynomial `M_n(x) = 2F1(-n, -x; 2k; 1 - 1/c)`.
pub fn meixner(n: u32, x: u32, k: f64, c: f64) -> Result<f64> {
    check_positive("k", k)?;
    check_unit_interval("c", c)?;
    hyper_pfq(&HyperSpec::new(
        &[-f64::from(n), -f64::from(x)],
        &[2.0 * k],
        1.0 - 1.0 / c,
    ))
}

/// Charlier polynomial `C_n(x) = 2F0(-n, -x; ; -1/λ)`.
pub fn charlier(n: u32, x: u32, lambda: f64) -> Result<f64> {
    check_positive("lambda", lambda)?;
    hyper_pfq(&HyperSpec::new(&[-f64::from(n), -f64::from(x)], &[], -1.0 / lambda))
}

/// `G_μ(s) = s^{-μ/2} J_μ(√s)`, an entire function of `s`, computed as
/// `2^{-μ}/Γ(μ+1) · 0F1(; μ+1; -s/4)`. Requires `μ > -1`.
///
/// Satisfies `G_μ'(s) = -G_{μ+1}(s)/2`.
pub fn reduced_bessel(mu: f64, s: f64) -> Result<f64> {
    if !(mu > -1.0) {
        return Err(Error::OutOfRange(format!("order {mu} must exceed -1")));
    }
    if s.abs() > BESSEL_MAX_ARG * BESSEL_MAX_ARG {
        return Err(Error::SeriesDivergence { order: mu, arg: s.abs().sqrt() });
    }
    let spec = HyperSpec::new(&[], &[mu + 1.0], -s / 4.0)
        .with_budget(BESSEL_MAX_TERMS, BESSEL_TAIL_TOLERANCE);
    let series = hyper_pfq(&spec).map_err(|_| Error::SeriesDivergence { order: mu, arg: s })?;
    let (lg, sign) = ln_gamma_signed(mu + 1.0);
    Ok(sign * (-mu * std::f64::consts::LN_2 - lg).exp() * series)
}

/// Bessel function of the first kind `J_ν(u)` for `ν > -1`, `0 <= u <= 30`.
pub fn bessel_j(nu: f64, u: f64) -> Result<f64> {
    if !(nu > -1.0) {
        return Err(Error::OutOfRange(format!("order {nu} must exceed -1")));
    }
    if !(u >= 0.0) {
        return Err(Error::DomainError(format!("Bessel argument {u} must be nonnegative")));
    }
    if u > BESSEL_MAX_ARG {
        return Err(Error::SeriesDivergence { order: nu, arg: u });
    }
    if u == 0.0 {
        return if nu == 0.0 {
            Ok(1.0)
        } else if nu > 0.0 {
            Ok(0.0)
        } else {
            Err(Error::DomainError(format!("J_{nu}(0) is unbounded")))
        };
    }
    let spec = HyperSpec::new(&[], &[nu + 1.0], -u * u / 4.0)
        .with_budget(BESSEL_MAX_TERMS, BESSEL_TAIL_TOLERANCE);
    let series = hyper_pfq(&spec).map_err(|_| Error::SeriesDivergence { order: nu, arg: u })?;
    let (lg, sign) = ln_gamma_signed(nu + 1.0);
    let prefactor = sign * (nu * (u / 2.0).ln() - lg).exp();
    Ok(prefactor * series)
}

/// `(J_ν(u), J_ν'(u), J_ν''(u))` by term-wise differentiation of the power
/// series `Σ_m (-1)^m (u/2)^{2m+ν} / (m! Γ(m+ν+1))`. Requires `u > 0`.
pub fn bessel_j_derivatives(nu: f64, u: f64) -> Result<(f64, f64, f64)> {
    if !(nu > -1.0) {
        return Err(Error::OutOfRange(format!("order {nu} must exceed -1")));
    }
    if !(u > 0.0) {
        return Err(Error::DomainError(format!("derivatives need u > 0, got {u}")));
    }
    if u > BESSEL_MAX_ARG {
        return Err(Error::SeriesDivergence { order: nu, arg: u });
    }
    let ln_half = (u / 2.0).ln();
    let (mut s0, mut s1, mut s2) = (CompensatedSum::new(), CompensatedSum::new(), CompensatedSum::new());
    for m in 0..BESSEL_MAX_TERMS {
        let mf = m as f64;
        let power = 2.0 * mf + nu;
        let (lg, gsign) = ln_gamma_signed(mf + nu + 1.0);
        let (lf, _) = ln_gamma_signed(mf + 1.0);
        let sign = if m % 2 == 0 { gsign } else { -gsign };
        let t0 = sign * (power * ln_half - lg - lf).exp();
        let t1 = t0 * power / u;
        let t2 = t1 * (power - 1.0) / u;
        s0.add(t0);
        s1.add(t1);
        s2.add(t2);
        let tol = BESSEL_TAIL_TOLERANCE;
        if m > 0
            && t0.abs() <= tol * s0.value().abs().max(f64::MIN_POSITIVE)
            && t1.abs() <= tol * s1.value().abs().max(f64::MIN_POSITIVE)
            && t2.abs() <= tol * s2.value().abs().max(f64::MIN_POSITIVE)
        {
            return Ok((s0.value(), s1.value(), s2.value()));
        }
        if t0 == 0.0 && t1 == 0.0 && t2 == 0.0 && m > 0 {
            return Ok((s0.value(), s1.value(), s2.value()));
        }
    }
    Err(Error::SeriesDivergence { order: nu, arg: u })
}

/// Largest `|J'' + J'/u + (1 − ν²/u²) J|` over the points `us`.
pub fn bessel_ode_residual(nu: f64, us: &[f64]) -> Result<f64> {
    let mut worst = 0.0f64;
    for &u in us {
        let (j, d1, d2) = bessel_j_derivatives(nu, u)?;
        worst = worst.max((d2 + d1 / u + (1.0 - nu * nu / (u * u)) * j).abs());
    }
    Ok(worst)
}

/// Process family of a duality kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FamilyKind {
    Sep,
    Sip,
    Irw,
    Bep,
    Bmp,
}

impl FamilyKind {
    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::Sep => "SEP",
            FamilyKind::Sip => "SIP",
            FamilyKind::Irw => "IRW",
            FamilyKind::Bep => "BEP",
            FamilyKind::Bmp => "BMP",
        }
    }

    pub fn is_discrete(self) -> bool {
        matches!(self, FamilyKind::Sep | FamilyKind::Sip | FamilyKind::Irw)
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "SEP" => Ok(FamilyKind::Sep),
            "SIP" => Ok(FamilyKind::Sip),
            "IRW" => Ok(FamilyKind::Irw),
            "BEP" => Ok(FamilyKind::Bep),
            "BMP" => Ok(FamilyKind::Bmp),
            other => Err(Error::BadParam(format!("unknown family `{other}`"))),
        }
    }
}

/// A parameterized single-site duality kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelId {
    /// `(p/(1-p))^{(x+n)/2} K_n(x)`
    Sep { j: Spin, p: f64 },
    /// `c^{(x+n)/2} M_n(x; 2k, c)`
    Sip { k: f64, c: f64 },
    /// `C_n(x)`
    Irw { lambda: f64 },
    /// `e^{(z+w)/2} (zw)^{1/2-k} J_{2k-1}(√(zw))`
    Bep { k: f64 },
    /// `e^{(x²+y²)/2} √(2/π) cos(xy)`
    Bmp,
}

impl KernelId {
    pub fn sep(j: f64, p: f64) -> Result<Self> {
        let j = Spin::new(j)?;
        check_unit_interval("p", p).map_err(bad_param)?;
        Ok(KernelId::Sep { j, p })
    }

    pub fn sip(k: f64, c: f64) -> Result<Self> {
        check_positive("k", k).map_err(bad_param)?;
        check_unit_interval("c", c).map_err(bad_param)?;
        Ok(KernelId::Sip { k, c })
    }

    pub fn irw(lambda: f64) -> Result<Self> {
        check_positive("lambda", lambda).map_err(bad_param)?;
        Ok(KernelId::Irw { lambda })
    }

    pub fn bep(k: f64) -> Result<Self> {
        check_positive("k", k).map_err(bad_param)?;
        Ok(KernelId::Bep { k })
    }

    pub fn kind(&self) -> FamilyKind {
        match self {
            KernelId::Sep { .. } => FamilyKind::Sep,
            KernelId::Sip { .. } => FamilyKind::Sip,
            KernelId::Irw { .. } => FamilyKind::Irw,
            KernelId::Bep { .. } => FamilyKind::Bep,
            KernelId::Bmp => FamilyKind::Bmp,
        }
    }

    pub fn params(&self) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        match *self {
            KernelId::Sep { j, p } => {
                m.insert("j".into(), j.j());
                m.insert("p".into(), p);
            }
            KernelId::Sip { k, c } => {
                m.insert("k".into(), k);
                m.insert("c".into(), c);
            }
            KernelId::Irw { lambda } => {
                m.insert("lambda".into(), lambda);
            }
            KernelId::Bep { k } => {
                m.insert("k".into(), k);
            }
            KernelId::Bmp => {}
        }
        m
    }

    /// Kernel value at integer arguments (discrete families only).
    pub fn discrete(&self, x: u32, n: u32) -> Result<f64> {
        let (xf, nf) = (f64::from(x), f64::from(n));
        match *self {
            KernelId::Sep { j, p } => {
                let poly = krawtchouk(n, x, j, p)?;
                Ok((0.5 * (xf + nf) * (p / (1.0 - p)).ln()).exp() * poly)
            }
            KernelId::Sip { k, c } => {
                let poly = meixner(n, x, k, c)?;
                Ok((0.5 * (xf + nf) * c.ln()).exp() * poly)
            }
            KernelId::Irw { lambda } => charlier(n, x, lambda),
            KernelId::Bep { .. } | KernelId::Bmp => Err(Error::DomainError(format!(
                "{} kernel takes real arguments",
                self.kind()
            ))),
        }
    }

    /// Kernel value at real arguments (continuous families only).
    pub fn continuous(&self, a: f64, b: f64) -> Result<f64> {
        match *self {
            KernelId::Bep { k } => {
                if !(a > 0.0 && b > 0.0) {
                    return Err(Error::DomainError(format!(
                        "BEP kernel needs positive arguments, got ({a}, {b})"
                    )));
                }
                let nu = 2.0 * k - 1.0;
                let bessel = bessel_j(nu, (a * b).sqrt())?;
                Ok((0.5 * (a + b) + (0.5 - k) * (a * b).ln()).exp() * bessel)
            }
            KernelId::Bmp => Ok((0.5 * (a * a + b * b)).exp() * (2.0 / PI).sqrt() * (a * b).cos()),
            _ => Err(Error::DomainError(format!("{} kernel takes integer arguments", self.kind()))),
        }
    }

    /// Kernel value with arguments given as reals; discrete families require
    /// nonnegative integral values.
    pub fn kernel_value(&self, a: f64, b: f64) -> Result<f64> {
        if self.kind().is_discrete() {
            let to_int = |v: f64| -> Result<u32> {
                if v >= 0.0 && v == v.round() && v <= f64::from(u32::MAX) {
                    Ok(v as u32)
                } else {
                    Err(Error::DomainError(format!("{v} is not a particle number")))
                }
            };
            self.discrete(to_int(a)?, to_int(b)?)
        } else {
            self.continuous(a, b)
        }
    }
}

fn bad_param(e: Error) -> Error {
    match e {
        Error::OutOfRange(m) => Error::BadParam(m),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binom(n: u32, m: u32) -> f64 {
        (0..m).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
    }

    fn factorial(n: u32) -> f64 {
        (1..=n).fold(1.0, |acc, i| acc * f64::from(i))
    }

    // Independent closed sums, written with binomials rather than Pochhammers.
    fn krawtchouk_oracle(n: u32, x: u32, two_j: u32, p: f64) -> f64 {
        (0..=n.min(x))
            .map(|m| {
                (-1f64).powi(m as i32) * binom(n, m) * binom(x, m) / binom(two_j, m) / p.powi(m as i32)
            })
            .sum()
    }

    fn charlier_oracle(n: u32, x: u32, lambda: f64) -> f64 {
        (0..=n.min(x))
            .map(|m| {
                binom(n, m) * binom(x, m) * factorial(m) * (-1.0 / lambda).powi(m as i32)
            })
            .sum()
    }

    #[test]
    fn pochhammer_examples() {
        assert_eq!(pochhammer(7.3, 0), 1.0);
        assert_eq!(pochhammer(3.0, 2), 12.0);
        assert_eq!(pochhammer(-2.0, 3), 0.0);
        assert_eq!(pochhammer(0.5, 3), 0.5 * 1.5 * 2.5);
    }

    #[test]
    fn hypergeometric_examples() {
        assert_eq!(hyper_pfq(&HyperSpec::new(&[], &[1.0], 0.0)).unwrap(), 1.0);
        let v = hyper_pfq(&HyperSpec::new(&[-1.0, -1.0], &[-1.0], 2.0)).unwrap();
        assert!((v + 1.0).abs() < 1e-15);
        let (x, lambda) = (2.0, 1.0);
        let v = hyper_pfq(&HyperSpec::new(&[-1.0, -x], &[], -1.0 / lambda)).unwrap();
        assert!((v + 1.0).abs() < 1e-15);
    }

    #[test]
    fn hypergeometric_errors() {
        let bad = HyperSpec::new(&[1.0], &[], 2.0).with_budget(50, 1e-16);
        assert!(matches!(hyper_pfq(&bad), Err(Error::NonTerminatingDivergence { .. })));
        let zero = HyperSpec::new(&[-3.0], &[-1.0], 0.5);
        assert!(matches!(hyper_pfq(&zero), Err(Error::ZeroDenominatorParam { .. })));
        let budget = HyperSpec::new(&[1.0], &[], 0.1).with_budget(0, 1e-16);
        assert!(matches!(hyper_pfq(&budget), Err(Error::BadParam(_))));
    }

    #[test]
    fn exponential_series() {
        let v = hyper_pfq(&HyperSpec::new(&[], &[], 1.5)).unwrap();
        assert!((v - 1.5f64.exp()).abs() < 1e-14);
    }

    #[test]
    fn krawtchouk_examples() {
        let half = Spin::new(0.5).unwrap();
        for x in 0..=1 {
            assert_eq!(krawtchouk(0, x, half, 0.5).unwrap(), 1.0);
        }
        assert!((krawtchouk(1, 1, half, 0.5).unwrap() + 1.0).abs() < 1e-15);
        let one = Spin::new(1.0).unwrap();
        let a = krawtchouk(2, 1, one, 0.3).unwrap();
        let b = krawtchouk(1, 2, one, 0.3).unwrap();
        assert!((a - b).abs() < 1e-13);
        assert!(matches!(krawtchouk(3, 0, one, 0.3), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn krawtchouk_matches_binomial_sum() {
        for two_j in 1..=6 {
            let j = Spin::from_two_j(two_j).unwrap();
            for p in [0.2, 0.5, 0.7] {
                for n in 0..=two_j {
                    for x in 0..=two_j {
                        let v = krawtchouk(n, x, j, p).unwrap();
                        let o = krawtchouk_oracle(n, x, two_j, p);
                        assert!((v - o).abs() <= 1e-12 * o.abs().max(1.0), "{n} {x} {two_j} {p}");
                    }
                }
            }
        }
    }

    #[test]
    fn krawtchouk_three_term_recurrence() {
        for two_j in 1..=8u32 {
            let j = Spin::from_two_j(two_j).unwrap();
            let jf = f64::from(two_j);
            for p in [0.3, 0.5, 0.7] {
                for n in 0..=two_j {
                    for x in 0..=two_j {
                        let (nf, xf) = (f64::from(n), f64::from(x));
                        let k = |m: u32| krawtchouk(m, x, j, p).unwrap();
                        let up = if n < two_j { p * (jf - nf) * k(n + 1) } else { 0.0 };
                        let down = if n > 0 { nf * (1.0 - p) * k(n - 1) } else { 0.0 };
                        let mid = (jf * p - 2.0 * nf * p + nf) * k(n);
                        let lhs = -xf * k(n);
                        let scale = lhs.abs() + up.abs() + mid.abs() + down.abs();
                        assert!((lhs - (up - mid + down)).abs() <= 1e-11 * scale.max(1.0));
                    }
                }
            }
        }
    }

    #[test]
    fn meixner_examples_and_recurrence() {
        for x in 0..5 {
            assert_eq!(meixner(0, x, 0.5, 0.5).unwrap(), 1.0);
        }
        assert!(meixner(1, 1, 0.5, 0.5).unwrap().abs() < 1e-15);
        for (k, c) in [(0.5, 0.25), (1.0, 0.5), (0.25, 0.75)] {
            for n in 0..=12u32 {
                for x in 0..=12u32 {
                    let (nf, xf) = (f64::from(n), f64::from(x));
                    let m = |d: u32| meixner(d, x, k, c).unwrap();
                    let lhs = (c - 1.0) * xf * m(n);
                    let up = c * (nf + 2.0 * k) * m(n + 1);
                    let mid = (nf + nf * c + 2.0 * k * c) * m(n);
                    let down = if n > 0 { nf * m(n - 1) } else { 0.0 };
                    let scale = lhs.abs() + up.abs() + mid.abs() + down.abs();
                    assert!((lhs - (up - mid + down)).abs() <= 1e-11 * scale.max(1.0));
                }
            }
        }
        // Named example: (n, x) = (2, 3), 2k = 1, c = 1/4.
        let (k, c) = (0.5, 0.25);
        let m = |d: u32| meixner(d, 3, k, c).unwrap();
        let r = (c - 1.0) * 3.0 * m(2) - (c * 3.0 * m(3) - (2.0 + 2.0 * c + c) * m(2) + 2.0 * m(1));
        assert!(r.abs() < 1e-12);
    }

    #[test]
    fn charlier_examples_and_shift() {
        for n in 0..6 {
            assert_eq!(charlier(n, 0, 1.7).unwrap(), 1.0);
        }
        for x in 0..6 {
            let v = charlier(1, x, 2.5).unwrap();
            assert!((v - (1.0 - f64::from(x) / 2.5)).abs() < 1e-15);
        }
        let lambda = 1.5;
        let c = |n: u32, x: u32| charlier(n, x, lambda).unwrap();
        let r = 3.0 * c(2, 2) - (lambda * c(2, 3) - lambda * c(3, 3));
        assert!(r.abs() < 1e-12);
        for lambda in [0.5, 1.0, 2.0] {
            for n in 0..=12u32 {
                for x in 0..=12u32 {
                    let v = charlier(n, x, lambda).unwrap();
                    let o = charlier_oracle(n, x, lambda);
                    assert!((v - o).abs() <= 1e-12 * o.abs().max(1.0));
                    assert!((v - charlier(x, n, lambda).unwrap()).abs() <= 1e-12 * v.abs().max(1.0));
                    let xf = f64::from(x);
                    let up = lambda * charlier(n + 1, x, lambda).unwrap();
                    let mid = (f64::from(n) + lambda) * v;
                    let down = if n > 0 { f64::from(n) * charlier(n - 1, x, lambda).unwrap() } else { 0.0 };
                    let scale = (xf * v).abs() + up.abs() + mid.abs() + down.abs();
                    assert!((-xf * v - (up - mid + down)).abs() <= 1e-11 * scale.max(1.0));
                }
            }
        }
    }

    #[test]
    fn bessel_examples() {
        assert_eq!(bessel_j(0.0, 0.0).unwrap(), 1.0);
        let u = 1.0f64;
        let v = bessel_j(-0.5, u).unwrap() * (PI * u / 2.0).sqrt();
        assert!((v - u.cos()).abs() < 1e-15);
        let (nu, u) = (1.5, 2.0);
        let (j, d1, d2) = bessel_j_derivatives(nu, u).unwrap();
        let ode = -d2 - d1 / u + nu * nu / (u * u) * j - j;
        assert!(ode.abs() < 1e-9);
        let us: Vec<f64> = (1..=40).map(|i| 0.25 * f64::from(i)).collect();
        for nu in [-0.75, -0.5, 0.0, 0.5, 1.0, 2.5] {
            assert!(bessel_ode_residual(nu, &us).unwrap() < 1e-9);
        }
        // J_{1/2}(u) = √(2/(πu)) sin u
        let v = bessel_j(0.5, 2.3).unwrap();
        assert!((v - (2.0 / (PI * 2.3)).sqrt() * 2.3f64.sin()).abs() < 1e-15);
        assert!(matches!(bessel_j(-1.5, 1.0), Err(Error::OutOfRange(_))));
        assert!(matches!(bessel_j(0.0, 40.0), Err(Error::SeriesDivergence { .. })));
    }

    #[test]
    fn bessel_derivatives_match_closed_form() {
        // ν = -1/2: J = √(2/π) u^{-1/2} cos u
        let c = (2.0 / PI).sqrt();
        for u in [0.3, 1.0, 2.5, 7.0] {
            let (j, d1, d2) = bessel_j_derivatives(-0.5, u).unwrap();
            let f = c * u.powf(-0.5) * u.cos();
            let f1 = c * (-0.5 * u.powf(-1.5) * u.cos() - u.powf(-0.5) * u.sin());
            let f2 = c
                * (0.75 * u.powf(-2.5) * u.cos() + u.powf(-1.5) * u.sin() - u.powf(-0.5) * u.cos());
            assert!((j - f).abs() < 1e-13);
            assert!((d1 - f1).abs() < 1e-12);
            assert!((d2 - f2).abs() < 1e-12);
        }
    }

    #[test]
    fn reduced_bessel_consistency() {
        for mu in [-0.5, 0.0, 0.5, 1.0] {
            for s in [0.25, 1.0, 4.0, 9.0] {
                let g = reduced_bessel(mu, s).unwrap();
                let direct = s.powf(-mu / 2.0) * bessel_j(mu, s.sqrt()).unwrap();
                assert!((g - direct).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn kernel_examples() {
        let sep = KernelId::sep(1.0, 0.5).unwrap();
        let one = Spin::new(1.0).unwrap();
        for x in 0..=2 {
            for n in 0..=2 {
                let k = sep.discrete(x, n).unwrap();
                assert!((k - krawtchouk(n, x, one, 0.5).unwrap()).abs() < 1e-15);
            }
        }
        for x in [0.0, 0.5, 1.3] {
            let v = KernelId::Bmp.continuous(x, 0.0).unwrap();
            assert!((v - (2.0 / PI).sqrt() * (x * x / 2.0).exp()).abs() < 1e-14);
        }
        let irw = KernelId::irw(0.7).unwrap();
        for n in 0..8 {
            assert_eq!(irw.discrete(0, n).unwrap(), 1.0);
        }
        let bep = KernelId::bep(0.5).unwrap();
        assert!(matches!(bep.continuous(0.0, 1.0), Err(Error::DomainError(_))));
        assert!(matches!(KernelId::sep(1.0, 1.5), Err(Error::BadParam(_))));
        assert!(matches!(KernelId::sep(0.7, 0.5), Err(Error::BadParam(_))));
        assert!(KernelId::sip(0.0, 0.5).is_err());
    }

    #[test]
    fn discrete_kernels_are_symmetric() {
        let kernels = [
            KernelId::sep(1.5, 0.3).unwrap(),
            KernelId::sep(2.0, 0.7).unwrap(),
            KernelId::sip(0.5, 0.25).unwrap(),
            KernelId::sip(1.0, 0.5).unwrap(),
            KernelId::irw(0.5).unwrap(),
            KernelId::irw(2.0).unwrap(),
        ];
        for id in kernels {
            let top = match id {
                KernelId::Sep { j, .. } => j.two_j(),
                _ => 12,
            };
            for a in 0..=top {
                for b in 0..=top {
                    let (u, v) = (id.discrete(a, b).unwrap(), id.discrete(b, a).unwrap());
                    assert!((u - v).abs() <= 1e-12 * u.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn bep_quarter_matches_bmp() {
        let bep = KernelId::bep(0.25).unwrap();
        let grid: Vec<f64> = (0..10).map(|i| 0.2 + 0.2 * f64::from(i)).collect();
        for &x in &grid {
            for &y in &grid {
                let a = bep.continuous(x * x, y * y).unwrap();
                let b = KernelId::Bmp.continuous(x, y).unwrap();
                assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0), "{x} {y}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn compensated_sum_recovers_cancellation() {
        let mut s = CompensatedSum::new();
        for v in [1e16, 1.0, -1e16, 1.0] {
            s.add(v);
        }
        assert_eq!(s.value(), 2.0);
    }
}
