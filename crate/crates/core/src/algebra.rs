//! Representation matrices for su(2), the discrete series of su(1,1) and the
//! Heisenberg algebra, together with operator strings and their reversal,
//! tensor products, coproducts and Casimir elements.
//!
//! Infinite-dimensional representations are truncated to a finite dimension.
//! Every [`TruncatedOperator`] carries a validity mask: the rows on which the
//! truncated matrix agrees with the true operator. Products propagate the mask
//! conservatively, so identities checked on valid rows are exact statements.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::report::CheckReport;
use crate::specfun::{KernelId, Spin};

pub type C64 = Complex64;

/// Default truncation for infinite-dimensional representations.
pub const DEFAULT_TRUNCATION: usize = 40;
/// Tolerance attached to the Casimir rewrite check.
pub const CASIMIR_REWRITE_TOLERANCE: f64 = 1e-10;

/// A finite complex matrix acting as `(Af)(n) = Σ_m A[n,m] f(m)`, plus the
/// set of rows unaffected by truncation.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedOperator {
    entries: DMatrix<C64>,
    valid: Vec<bool>,
    label: String,
}

impl TruncatedOperator {
    pub fn new(entries: DMatrix<C64>, valid: Vec<bool>, label: impl Into<String>) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::DimMismatch(format!(
                "operator matrix must be square, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if valid.len() != entries.nrows() {
            return Err(Error::DimMismatch("validity mask length differs from dimension".into()));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::BadParam("operator entries must be finite".into()));
        }
        Ok(Self { entries, valid, label: label.into() })
    }

    /// Operator with every row valid.
    pub fn exact(entries: DMatrix<C64>, label: impl Into<String>) -> Result<Self> {
        let n = entries.nrows();
        Self::new(entries, vec![true; n], label)
    }

    pub fn from_real(entries: &DMatrix<f64>, label: impl Into<String>) -> Result<Self> {
        Self::exact(entries.map(|v| C64::new(v, 0.0)), label)
    }

    pub fn identity(dim: usize) -> Self {
        Self { entries: DMatrix::identity(dim, dim), valid: vec![true; dim], label: "1".into() }
    }

    pub fn zero(dim: usize) -> Self {
        Self { entries: DMatrix::zeros(dim, dim), valid: vec![true; dim], label: "0".into() }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn is_valid(&self, row: usize) -> bool {
        self.valid.get(row).copied().unwrap_or(false)
    }

    pub fn validity(&self) -> &[bool] {
        &self.valid
    }

    pub fn valid_rows(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&r| self.valid[r]).collect()
    }

    pub fn restrict_validity(mut self, keep: impl Fn(usize) -> bool) -> Self {
        for (r, v) in self.valid.iter_mut().enumerate() {
            *v = *v && keep(r);
        }
        self
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimMismatch(format!(
                "`{}` has dimension {}, `{}` has dimension {}",
                self.label,
                self.dim(),
                other.label,
                other.dim()
            )));
        }
        Ok(())
    }

    /// Operator product `self · other`.
    ///
    /// Row `r` of the product is valid only if it is valid for `self` and
    /// every column reached from it indexes a valid row of `other`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        let entries = &self.entries * &other.entries;
        let valid = (0..self.dim())
            .map(|r| {
                self.valid[r]
                    && (0..self.dim())
                        .all(|m| self.entries[(r, m)] == C64::new(0.0, 0.0) || other.valid[m])
            })
            .collect();
        Ok(Self { entries, valid, label: format!("{}{}", self.label, other.label) })
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(Self {
            entries: &self.entries + &other.entries,
            valid: intersect(&self.valid, &other.valid),
            label: format!("({} + {})", self.label, other.label),
        })
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(Self {
            entries: &self.entries - &other.entries,
            valid: intersect(&self.valid, &other.valid),
            label: format!("({} - {})", self.label, other.label),
        })
    }

    pub fn scale(&self, c: impl Into<C64>) -> Self {
        let c = c.into();
        Self { entries: &self.entries * c, valid: self.valid.clone(), label: self.label.clone() }
    }

    pub fn transpose(&self) -> DMatrix<C64> {
        self.entries.transpose()
    }

    /// Largest entry modulus over rows valid in both operators.
    pub fn residual(&self, other: &Self) -> Result<f64> {
        self.check_dim(other)?;
        let mut worst = 0.0f64;
        for r in 0..self.dim() {
            if self.valid[r] && other.valid[r] {
                for c in 0..self.dim() {
                    worst = worst.max((self.entries[(r, c)] - other.entries[(r, c)]).norm());
                }
            }
        }
        Ok(worst)
    }

    /// Largest entry modulus over valid rows.
    pub fn max_abs_on_valid(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in self.valid_rows() {
            for c in 0..self.dim() {
                worst = worst.max(self.entries[(r, c)].norm());
            }
        }
        worst
    }

    pub fn max_imag(&self) -> f64 {
        self.entries.iter().fold(0.0f64, |m, z| m.max(z.im.abs()))
    }

    /// Adjoint with respect to the bilinear form `Σ f(n) g(n) μ(n)`:
    /// `A*[m,n] = μ(n) A[n,m] / μ(m)`.
    pub fn weighted_adjoint(&self, weights: &[f64]) -> Result<Self> {
        if weights.len() != self.dim() {
            return Err(Error::DimMismatch("weight vector length differs from dimension".into()));
        }
        let d = self.dim();
        let entries = DMatrix::from_fn(d, d, |m, n| self.entries[(n, m)] * (weights[n] / weights[m]));
        Ok(Self { entries, valid: vec![true; d], label: format!("{}*", self.label) })
    }
}

fn intersect(a: &[bool], b: &[bool]) -> Vec<bool> {
    a.iter().zip(b).map(|(x, y)| *x && *y).collect()
}

impl fmt::Display for TruncatedOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (dim {}, {} valid rows)", self.label, self.dim(), self.valid_rows().len())
    }
}

// Infix arithmetic panics on dimension mismatch; the `try_*` and `compose`
// methods are the fallible forms.
impl Add for &TruncatedOperator {
    type Output = TruncatedOperator;
    fn add(self, rhs: Self) -> TruncatedOperator {
        self.try_add(rhs).expect("operator dimensions differ")
    }
}

impl Sub for &TruncatedOperator {
    type Output = TruncatedOperator;
    fn sub(self, rhs: Self) -> TruncatedOperator {
        self.try_sub(rhs).expect("operator dimensions differ")
    }
}

impl Mul for &TruncatedOperator {
    type Output = TruncatedOperator;
    fn mul(self, rhs: Self) -> TruncatedOperator {
        self.compose(rhs).expect("operator dimensions differ")
    }
}

impl Mul<f64> for &TruncatedOperator {
    type Output = TruncatedOperator;
    fn mul(self, rhs: f64) -> TruncatedOperator {
        self.scale(rhs)
    }
}

impl Neg for &TruncatedOperator {
    type Output = TruncatedOperator;
    fn neg(self) -> TruncatedOperator {
        self.scale(-1.0)
    }
}

/// `AB - BA`.
pub fn commutator(a: &TruncatedOperator, b: &TruncatedOperator) -> Result<TruncatedOperator> {
    let ab = a.compose(b)?;
    let ba = b.compose(a)?;
    Ok(ab.try_sub(&ba)?.with_label(format!("[{}, {}]", a.label, b.label)))
}

/// Kronecker product with the first factor as the slow index.
pub fn tensor(a: &TruncatedOperator, b: &TruncatedOperator) -> TruncatedOperator {
    let entries = a.entries.kronecker(&b.entries);
    let (da, db) = (a.dim(), b.dim());
    let valid = (0..da * db).map(|i| a.valid[i / db] && b.valid[i % db]).collect();
    TruncatedOperator { entries, valid, label: format!("{}⊗{}", a.label, b.label) }
}

/// `Δ(A) = 1⊗A + A⊗1`.
pub fn coproduct(a: &TruncatedOperator) -> TruncatedOperator {
    let one = TruncatedOperator::identity(a.dim());
    (&tensor(&one, a) + &tensor(a, &one)).with_label(format!("Δ({})", a.label))
}

/// Underlying Lie algebra of a representation, with its parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Algebra {
    Su2 { j: Spin },
    Su11 { k: f64 },
    Heisenberg { lambda: f64 },
}

impl Algebra {
    pub fn name(&self) -> &'static str {
        match self {
            Algebra::Su2 { .. } => "su2",
            Algebra::Su11 { .. } => "su11_discrete",
            Algebra::Heisenberg { .. } => "heisenberg",
        }
    }
}

/// A concrete (possibly truncated) representation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepSpec {
    pub algebra: Algebra,
    pub dim: usize,
    pub p: Option<f64>,
    pub c: Option<f64>,
}

impl RepSpec {
    pub fn su2(j: f64) -> Result<Self> {
        let j = Spin::new(j)?;
        Ok(Self { algebra: Algebra::Su2 { j }, dim: j.two_j() as usize + 1, p: None, c: None })
    }

    pub fn su11(k: f64, dim: usize) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::BadParam(format!("k = {k} must be positive")));
        }
        Self::check_dim(dim)?;
        Ok(Self { algebra: Algebra::Su11 { k }, dim, p: None, c: None })
    }

    pub fn heisenberg(lambda: f64, dim: usize) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::BadParam(format!("lambda = {lambda} must be positive")));
        }
        Self::check_dim(dim)?;
        Ok(Self { algebra: Algebra::Heisenberg { lambda }, dim, p: None, c: None })
    }

    fn check_dim(dim: usize) -> Result<()> {
        if dim < 4 {
            return Err(Error::BadParam(format!("truncation dimension {dim} must be at least 4")));
        }
        Ok(())
    }

    pub fn with_p(mut self, p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::BadParam(format!("p = {p} must lie in (0,1)")));
        }
        self.p = Some(p);
        Ok(self)
    }

    pub fn with_c(mut self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c < 1.0) {
            return Err(Error::BadParam(format!("c = {c} must lie in (0,1)")));
        }
        self.c = Some(c);
        Ok(self)
    }

    /// Weights `μ(n)` of the inner product on which the *-structure is unitary.
    pub fn weights(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim);
        let mut w = 1.0;
        for n in 0..self.dim {
            out.push(w);
            let nf = n as f64;
            w *= match self.algebra {
                Algebra::Su2 { j } => (f64::from(j.two_j()) - nf) / (nf + 1.0),
                Algebra::Su11 { k } => (2.0 * k + nf) / (nf + 1.0),
                Algebra::Heisenberg { lambda } => lambda / (nf + 1.0),
            };
        }
        out
    }

    /// Single-site duality kernel intertwining this representation with its
    /// deformed partner.
    pub fn kernel(&self) -> Result<KernelId> {
        match self.algebra {
            Algebra::Su2 { j } => {
                let p = self.p.ok_or_else(|| Error::MissingParam("p".into()))?;
                Ok(KernelId::Sep { j, p })
            }
            Algebra::Su11 { k } => {
                let c = self.c.ok_or_else(|| Error::MissingParam("c".into()))?;
                KernelId::sip(k, c)
            }
            Algebra::Heisenberg { lambda } => KernelId::irw(lambda),
        }
    }
}

/// Named generators and derived operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Generator {
    H,
    E,
    F,
    A,
    ADagger,
    Z,
    Xp,
    Hp,
    Xc,
    Hc,
    X,
}

impl Generator {
    pub fn symbol(self) -> &'static str {
        match self {
            Generator::H => "H",
            Generator::E => "E",
            Generator::F => "F",
            Generator::A => "a",
            Generator::ADagger => "a_dagger",
            Generator::Z => "Z",
            Generator::Xp => "X_p",
            Generator::Hp => "H_p",
            Generator::Xc => "X_c",
            Generator::Hc => "H_c",
            Generator::X => "X",
        }
    }
}

impl FromStr for Generator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "H" => Generator::H,
            "E" => Generator::E,
            "F" => Generator::F,
            "a" => Generator::A,
            "a_dagger" | "a†" => Generator::ADagger,
            "Z" => Generator::Z,
            "X_p" => Generator::Xp,
            "H_p" => Generator::Hp,
            "X_c" => Generator::Xc,
            "H_c" => Generator::Hc,
            "X" => Generator::X,
            other => return Err(Error::UnknownSymbol(other.to_string())),
        })
    }
}

fn c64(v: f64) -> C64 {
    C64::new(v, 0.0)
}

/// Matrix with entries placed by `f(row) -> Option<(col, value)>` on each
/// row; rows whose target column falls outside the truncation are invalid.
fn shift_matrix(dim: usize, label: &str, f: impl Fn(usize) -> Option<(isize, f64)>) -> TruncatedOperator {
    let mut entries = DMatrix::zeros(dim, dim);
    let mut valid = vec![true; dim];
    for (r, v) in valid.iter_mut().enumerate() {
        if let Some((col, value)) = f(r) {
            if col < 0 {
                continue;
            }
            let col = col as usize;
            if col >= dim {
                if value != 0.0 {
                    *v = false;
                }
                continue;
            }
            entries[(r, col)] = c64(value);
        }
    }
    TruncatedOperator { entries, valid, label: label.to_string() }
}

fn su2_deformation(p: f64) -> (f64, f64) {
    let root = (p * (1.0 - p)).sqrt();
    ((1.0 - 2.0 * p) / (2.0 * root), -2.0 * root)
}

fn su11_deformation(c: f64) -> (f64, f64) {
    let root = c.sqrt();
    ((1.0 + c) / (2.0 * root), 2.0 * root / (c - 1.0))
}

/// Matrix of the generator `name` in the representation `spec`.
pub fn rep_matrix(spec: &RepSpec, name: &str) -> Result<TruncatedOperator> {
    let generator: Generator = name.parse()?;
    let d = spec.dim;
    let unknown = || Error::UnknownSymbol(format!("{name} in {}", spec.algebra.name()));
    let op = match (spec.algebra, generator) {
        (Algebra::Su2 { j }, Generator::H) => {
            let jf = j.j();
            shift_matrix(d, "H", |n| Some((n as isize, 2.0 * (n as f64 - jf))))
        }
        (Algebra::Su2 { j }, Generator::F) => {
            let two_j = f64::from(j.two_j());
            shift_matrix(d, "F", |n| Some((n as isize + 1, two_j - n as f64)))
        }
        (Algebra::Su2 { .. }, Generator::E) => shift_matrix(d, "E", |n| Some((n as isize - 1, n as f64))),
        (Algebra::Su11 { k }, Generator::H) => shift_matrix(d, "H", |n| Some((n as isize, 2.0 * (k + n as f64)))),
        (Algebra::Su11 { k }, Generator::E) => {
            shift_matrix(d, "E", |n| Some((n as isize + 1, 2.0 * k + n as f64)))
        }
        (Algebra::Su11 { .. }, Generator::F) => shift_matrix(d, "F", |n| Some((n as isize - 1, -(n as f64)))),
        (Algebra::Heisenberg { .. }, Generator::A) => shift_matrix(d, "a", |n| Some((n as isize - 1, n as f64))),
        (Algebra::Heisenberg { lambda }, Generator::ADagger) => {
            shift_matrix(d, "a_dagger", |n| Some((n as isize + 1, lambda)))
        }
        (Algebra::Heisenberg { lambda }, Generator::Z) => shift_matrix(d, "Z", |n| Some((n as isize, lambda))),
        (Algebra::Su2 { .. }, Generator::Xp) => {
            let p = spec.p.ok_or_else(|| Error::MissingParam("p".into()))?;
            let (a, _) = su2_deformation(p);
            let (e, f, h) = (rep_matrix(spec, "E")?, rep_matrix(spec, "F")?, rep_matrix(spec, "H")?);
            (&(&e + &f) - &(&h * a)).with_label("X_p")
        }
        (Algebra::Su2 { .. }, Generator::Hp) => {
            let p = spec.p.ok_or_else(|| Error::MissingParam("p".into()))?;
            let (_, scale) = su2_deformation(p);
            (&rep_matrix(spec, "X_p")? * scale).with_label("H_p")
        }
        (Algebra::Su11 { .. }, Generator::Xc) => {
            let c = spec.c.ok_or_else(|| Error::MissingParam("c".into()))?;
            let (a, _) = su11_deformation(c);
            let (e, f, h) = (rep_matrix(spec, "E")?, rep_matrix(spec, "F")?, rep_matrix(spec, "H")?);
            (&(&e - &f) - &(&h * a)).with_label("X_c")
        }
        (Algebra::Su11 { .. }, Generator::Hc) => {
            let c = spec.c.ok_or_else(|| Error::MissingParam("c".into()))?;
            let (_, scale) = su11_deformation(c);
            (&rep_matrix(spec, "X_c")? * scale).with_label("H_c")
        }
        (Algebra::Heisenberg { .. }, Generator::X) => {
            (&rep_matrix(spec, "Z")? - &rep_matrix(spec, "a_dagger")?).with_label("X")
        }
        _ => return Err(unknown()),
    };
    Ok(op)
}

/// `Ω = ½H² + EF + FE`.
pub fn casimir(spec: &RepSpec) -> Result<TruncatedOperator> {
    if let Algebra::Heisenberg { .. } = spec.algebra {
        return Err(Error::NoCasimir);
    }
    let (h, e, f) = (rep_matrix(spec, "H")?, rep_matrix(spec, "E")?, rep_matrix(spec, "F")?);
    let omega = &(&(&(&h * &h) * 0.5) + &(&e * &f)) + &(&f * &e);
    Ok(omega.with_label("Ω"))
}

/// A formal linear combination of strings over a finite alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorPolynomial {
    symbols: Vec<String>,
    terms: Vec<Term>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub coeff: C64,
    /// Letters as indices into the alphabet; the empty word is the identity.
    pub word: Vec<usize>,
}

impl OperatorPolynomial {
    pub fn new(symbols: &[&str]) -> Self {
        Self { symbols: symbols.iter().map(|s| s.to_string()).collect(), terms: Vec::new() }
    }

    /// The polynomial consisting of the single string `word`.
    pub fn monomial(symbols: &[&str], word: &[&str]) -> Result<Self> {
        Self::new(symbols).term(1.0, word)
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn push(&mut self, coeff: impl Into<C64>, word: &[&str]) -> Result<()> {
        let word = word
            .iter()
            .map(|s| {
                self.symbols
                    .iter()
                    .position(|t| t == s)
                    .ok_or_else(|| Error::UnknownSymbol(s.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        self.terms.push(Term { coeff: coeff.into(), word });
        Ok(())
    }

    pub fn term(mut self, coeff: impl Into<C64>, word: &[&str]) -> Result<Self> {
        self.push(coeff, word)?;
        Ok(self)
    }

    pub fn scaled(&self, c: impl Into<C64>) -> Self {
        let c = c.into();
        Self {
            symbols: self.symbols.clone(),
            terms: self.terms.iter().map(|t| Term { coeff: t.coeff * c, word: t.word.clone() }).collect(),
        }
    }

    fn same_alphabet(&self, other: &Self) -> Result<()> {
        if self.symbols != other.symbols {
            return Err(Error::UnknownSymbol(format!(
                "alphabets differ: {:?} vs {:?}",
                self.symbols, other.symbols
            )));
        }
        Ok(())
    }

    pub fn plus(&self, other: &Self) -> Result<Self> {
        self.same_alphabet(other)?;
        let mut out = self.clone();
        out.terms.extend(other.terms.iter().cloned());
        Ok(out)
    }

    pub fn minus(&self, other: &Self) -> Result<Self> {
        self.plus(&other.scaled(-1.0))
    }

    /// Product, concatenating strings.
    pub fn times(&self, other: &Self) -> Result<Self> {
        self.same_alphabet(other)?;
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                let mut word = a.word.clone();
                word.extend_from_slice(&b.word);
                terms.push(Term { coeff: a.coeff * b.coeff, word });
            }
        }
        Ok(Self { symbols: self.symbols.clone(), terms })
    }

    /// `[P, Q] = PQ - QP`.
    pub fn bracket(&self, other: &Self) -> Result<Self> {
        self.times(other)?.minus(&other.times(self)?)
    }

    /// Reverse string: for `S = A^{n1} B^{n2} ... A^{n(k-1)} B^{nk}` this is
    /// `A^{nk} B^{n(k-1)} ... A^{n2} B^{n1}`. Equivalently the word is read
    /// backwards and the first two letters of the alphabet are exchanged;
    /// any further letters are left in place.
    pub fn reverse(&self) -> Self {
        let swap = |i: usize| match i {
            0 if self.symbols.len() >= 2 => 1,
            1 => 0,
            other => other,
        };
        Self {
            symbols: self.symbols.clone(),
            terms: self
                .terms
                .iter()
                .map(|t| Term { coeff: t.coeff, word: t.word.iter().rev().map(|&i| swap(i)).collect() })
                .collect(),
        }
    }

    /// The word read backwards, letters unchanged.
    pub fn reverse_word(&self) -> Self {
        Self {
            symbols: self.symbols.clone(),
            terms: self
                .terms
                .iter()
                .map(|t| Term { coeff: t.coeff, word: t.word.iter().rev().copied().collect() })
                .collect(),
        }
    }

    /// Like terms merged, zero coefficients (below `tol`) dropped, words sorted.
    pub fn canonical(&self, tol: f64) -> Self {
        let mut merged: Vec<Term> = Vec::new();
        for t in &self.terms {
            match merged.iter_mut().find(|m| m.word == t.word) {
                Some(m) => m.coeff += t.coeff,
                None => merged.push(t.clone()),
            }
        }
        merged.retain(|t| t.coeff.norm() > tol);
        merged.sort_by(|a, b| a.word.len().cmp(&b.word.len()).then_with(|| a.word.cmp(&b.word)));
        Self { symbols: self.symbols.clone(), terms: merged }
    }

    /// Whether the two polynomials agree after merging like terms.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        if self.symbols != other.symbols {
            return false;
        }
        let diff = match self.minus(other) {
            Ok(d) => d,
            Err(_) => return false,
        };
        diff.canonical(tol).is_empty()
    }

    pub fn is_self_reverse(&self, tol: f64) -> bool {
        self.approx_eq(&self.reverse(), tol)
    }
}

impl fmt::Display for OperatorPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "({})", t.coeff)?;
            for &l in &t.word {
                write!(f, "·{}", self.symbols[l])?;
            }
        }
        Ok(())
    }
}

/// Evaluates `P` with each symbol replaced by an operator.
pub fn eval_poly(
    poly: &OperatorPolynomial,
    assignment: &HashMap<String, TruncatedOperator>,
) -> Result<TruncatedOperator> {
    let mut ops = Vec::with_capacity(poly.symbols.len());
    for s in &poly.symbols {
        let used = poly.terms.iter().any(|t| t.word.iter().any(|&l| poly.symbols[l] == *s));
        match assignment.get(s) {
            Some(op) => ops.push(Some(op)),
            None if used => return Err(Error::UnassignedSymbol(s.clone())),
            None => ops.push(None),
        }
    }
    let dim = ops
        .iter()
        .flatten()
        .map(|op| op.dim())
        .next()
        .or_else(|| assignment.values().map(|op| op.dim()).next())
        .ok_or_else(|| Error::DimMismatch("no operators assigned; dimension unknown".into()))?;
    if let Some(op) = ops.iter().flatten().find(|op| op.dim() != dim) {
        return Err(Error::DimMismatch(format!("`{}` has dimension {}, expected {dim}", op.label, op.dim())));
    }

    let mut total = TruncatedOperator::zero(dim);
    for t in &poly.terms {
        let mut acc = TruncatedOperator::identity(dim);
        for &l in &t.word {
            let op = ops[l].ok_or_else(|| Error::UnassignedSymbol(poly.symbols[l].clone()))?;
            acc = acc.compose(op)?;
        }
        total = total.try_add(&acc.scale(t.coeff))?;
    }
    Ok(total.with_label(poly.to_string()))
}

/// Which self-duality proof a Casimir rewrite belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CasimirVariant {
    Sep,
    Sip,
    Bep,
}

/// Coefficients `(α, β, γ)` of the Casimir rewrite
/// `Ω = α(H² + H'²) + β(HH' + H'H) + γ[H, H']²`.
pub fn casimir_rewrite_coefficients(variant: CasimirVariant, param: f64) -> Result<(f64, f64, f64)> {
    match variant {
        CasimirVariant::Sep => {
            let p = param;
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::BadParam(format!("p = {p} must lie in (0,1)")));
            }
            let q = p * (1.0 - p);
            Ok((1.0 / (8.0 * q), -(1.0 - 2.0 * p) / (8.0 * q), -1.0 / (32.0 * q)))
        }
        CasimirVariant::Sip => {
            let c = param;
            if !(c > 0.0 && c < 1.0) {
                return Err(Error::BadParam(format!("c = {c} must lie in (0,1)")));
            }
            let s = (c - 1.0) * (c - 1.0);
            Ok((-s / (8.0 * c), (1.0 - c * c) / (8.0 * c), s / (32.0 * c)))
        }
        CasimirVariant::Bep => Err(Error::NotApplicable("the BEP rewrite is a differential-operator identity".into())),
    }
}

fn partner_symbol(variant: CasimirVariant) -> &'static str {
    match variant {
        CasimirVariant::Sep => "H_p",
        _ => "H_c",
    }
}

/// The Casimir as a polynomial `h(H, H')` in `H` and its deformed partner
/// (`H_p` for su(2), `H_c` for su(1,1)).
pub fn casimir_rewrite_polynomial(variant: CasimirVariant, param: f64) -> Result<OperatorPolynomial> {
    let (a, b, g) = casimir_rewrite_coefficients(variant, param)?;
    let partner = partner_symbol(variant);
    let symbols = ["H", partner];
    let h = OperatorPolynomial::monomial(&symbols, &["H"])?;
    let hp = OperatorPolynomial::monomial(&symbols, &[partner])?;
    let squares = OperatorPolynomial::new(&symbols).term(a, &["H", "H"])?.term(a, &[partner, partner])?;
    let mixed = OperatorPolynomial::new(&symbols).term(b, &["H", partner])?.term(b, &[partner, "H"])?;
    let comm = h.bracket(&hp)?;
    let comm_sq = comm.times(&comm)?.scaled(g);
    squares.plus(&mixed)?.plus(&comm_sq)
}

/// Residual `‖h(H, H') - Ω‖` on valid rows.
pub fn casimir_rewrite_residual(spec: &RepSpec, variant: CasimirVariant) -> Result<f64> {
    let (param, partner) = match (variant, spec.algebra) {
        (CasimirVariant::Bep, _) => {
            return Err(Error::NotApplicable("the BEP rewrite is checked on smooth kernels".into()))
        }
        (CasimirVariant::Sep, Algebra::Su2 { .. }) => {
            (spec.p.ok_or_else(|| Error::MissingParam("p".into()))?, partner_symbol(variant))
        }
        (CasimirVariant::Sip, Algebra::Su11 { .. }) => {
            (spec.c.ok_or_else(|| Error::MissingParam("c".into()))?, partner_symbol(variant))
        }
        _ => {
            return Err(Error::NotApplicable(format!(
                "{variant:?} rewrite does not apply to {}",
                spec.algebra.name()
            )))
        }
    };
    let (a, b, g) = casimir_rewrite_coefficients(variant, param)?;
    let h = rep_matrix(spec, "H")?;
    let hp = rep_matrix(spec, partner)?;
    // Forming the commutator before squaring keeps intermediate entries
    // small; the fully expanded words cancel catastrophically at large n.
    let comm = commutator(&h, &hp)?;
    let rewritten = &(&(&(&(&h * &h) + &(&hp * &hp)) * a) + &(&(&(&h * &hp) + &(&hp * &h)) * b)) + &(&(&comm * &comm) * g);
    rewritten.residual(&casimir(spec)?)
}

pub fn check_casimir_rewrite(spec: &RepSpec, variant: CasimirVariant) -> Result<CheckReport> {
    let start = std::time::Instant::now();
    let residual = casimir_rewrite_residual(spec, variant)?;
    let mut params = std::collections::BTreeMap::new();
    match spec.algebra {
        Algebra::Su2 { j } => {
            params.insert("j".to_string(), j.j());
        }
        Algebra::Su11 { k } => {
            params.insert("k".to_string(), k);
        }
        Algebra::Heisenberg { lambda } => {
            params.insert("lambda".to_string(), lambda);
        }
    }
    if let Some(p) = spec.p {
        params.insert("p".into(), p);
    }
    if let Some(c) = spec.c {
        params.insert("c".into(), c);
    }
    params.insert("dim".into(), spec.dim as f64);
    Ok(CheckReport::from_residual(
        "casimir_rewrite",
        match variant {
            CasimirVariant::Sep => "SEP",
            CasimirVariant::Sip => "SIP",
            CasimirVariant::Bep => "BEP",
        },
        params,
        residual,
        CASIMIR_REWRITE_TOLERANCE,
        "Casimir written as a reverse-symmetric polynomial in H and its deformed partner",
        start.elapsed(),
    ))
}

/// Kernel matrix `F[x,n] = kernel(x, n)` for `x, n < dim`.
pub fn kernel_matrix(kernel: &KernelId, dim: usize) -> Result<DMatrix<f64>> {
    let mut m = DMatrix::zeros(dim, dim);
    for x in 0..dim {
        for n in 0..dim {
            m[(x, n)] = kernel.discrete(x as u32, n as u32)?;
        }
    }
    Ok(m)
}

/// `max |(A F)[x,n] - (F Bᵀ)[x,n]|` over `x` valid for `A` and `n` valid for
/// `B`, i.e. `A` acting on the first kernel argument against `B` acting on
/// the second.
pub fn intertwining_residual(a: &TruncatedOperator, b: &TruncatedOperator, kernel: &DMatrix<f64>) -> Result<f64> {
    if a.dim() != kernel.nrows() || b.dim() != kernel.ncols() {
        return Err(Error::DimMismatch(format!(
            "operators of dimension {} and {} against a {}x{} kernel",
            a.dim(),
            b.dim(),
            kernel.nrows(),
            kernel.ncols()
        )));
    }
    let f = kernel.map(c64);
    let left = &a.entries * &f;
    let right = &f * b.entries.transpose();
    let mut worst = 0.0f64;
    for x in a.valid_rows() {
        for n in b.valid_rows() {
            worst = worst.max((left[(x, n)] - right[(x, n)]).norm());
        }
    }
    Ok(worst)
}

/// Like [`intertwining_residual`], with each entry divided by the sum of
/// the moduli of the products that make it up.
pub fn intertwining_residual_relative(
    a: &TruncatedOperator,
    b: &TruncatedOperator,
    kernel: &DMatrix<f64>,
) -> Result<f64> {
    if a.dim() != kernel.nrows() || b.dim() != kernel.ncols() {
        return Err(Error::DimMismatch("operator and kernel dimensions differ".into()));
    }
    let f = kernel.map(c64);
    let left = &a.entries * &f;
    let right = &f * b.entries.transpose();
    let abs_f = kernel.abs();
    let left_scale = a.entries.map(|z| z.norm()) * &abs_f;
    let right_scale = &abs_f * b.entries.map(|z| z.norm()).transpose();
    let mut worst = 0.0f64;
    for x in a.valid_rows() {
        for n in b.valid_rows() {
            let scale = left_scale[(x, n)] + right_scale[(x, n)];
            if scale > 0.0 {
                worst = worst.max((left[(x, n)] - right[(x, n)]).norm() / scale);
            }
        }
    }
    Ok(worst)
}

/// Largest residual of the commutation relations satisfied by the
/// generators: su(2) `[H,E]=2E, [H,F]=−2F, [E,F]=H`; su(1,1)
/// `[H,E]=−2E, [H,F]=2F, [E,F]=−H`; Heisenberg `[a†,a]=Z` with `Z` central.
pub fn structure_constants_residual(spec: &RepSpec) -> Result<f64> {
    let op = |name: &str| rep_matrix(spec, name);
    let relations = match spec.algebra {
        Algebra::Heisenberg { .. } => {
            let (a, ad, z) = (op("a")?, op("a_dagger")?, op("Z")?);
            let zero = TruncatedOperator::zero(spec.dim);
            vec![(commutator(&ad, &a)?, z.clone()), (commutator(&a, &z)?, zero.clone()), (commutator(&ad, &z)?, zero)]
        }
        algebra => {
            let (h, e, f) = (op("H")?, op("E")?, op("F")?);
            let s = if matches!(algebra, Algebra::Su2 { .. }) { 1.0 } else { -1.0 };
            vec![
                (commutator(&h, &e)?, e.scale(2.0 * s)),
                (commutator(&h, &f)?, f.scale(-2.0 * s)),
                (commutator(&e, &f)?, h.scale(s)),
            ]
        }
    };
    relations.iter().try_fold(0.0f64, |worst, (lhs, rhs)| Ok(worst.max(lhs.residual(rhs)?)))
}

/// Largest `|[Ω, X]|` over `X ∈ {H, E, F}` on valid rows.
pub fn casimir_centrality_residual(spec: &RepSpec) -> Result<f64> {
    let omega = casimir(spec)?;
    ["H", "E", "F"].iter().try_fold(0.0f64, |worst, name| {
        Ok(worst.max(commutator(&omega, &rep_matrix(spec, name)?)?.max_abs_on_valid()))
    })
}

/// Distance of the su(2) Casimir from `2j(j+1)·1`.
pub fn casimir_scalar_residual(spec: &RepSpec) -> Result<f64> {
    let Algebra::Su2 { j } = spec.algebra else {
        return Err(Error::NotApplicable("the Casimir is scalar only for su(2)".into()));
    };
    let j = j.j();
    casimir(spec)?.residual(&TruncatedOperator::identity(spec.dim).scale(2.0 * j * (j + 1.0)))
}

/// Residual of `Δ(Ω) = 1⊗Ω + Ω⊗1 + H⊗H + 2F⊗E + 2E⊗F`, with `Δ(Ω)` formed
/// from the coproducts of the generators.
pub fn coproduct_casimir_residual(spec: &RepSpec) -> Result<f64> {
    let omega = casimir(spec)?;
    let (h, e, f) = (rep_matrix(spec, "H")?, rep_matrix(spec, "E")?, rep_matrix(spec, "F")?);
    let (dh, de, df) = (coproduct(&h), coproduct(&e), coproduct(&f));
    let lhs = dh.compose(&dh)?.scale(0.5).try_add(&de.compose(&df)?)?.try_add(&df.compose(&de)?)?;
    let one = TruncatedOperator::identity(spec.dim);
    let rhs = tensor(&one, &omega)
        .try_add(&tensor(&omega, &one))?
        .try_add(&tensor(&h, &h))?
        .try_add(&tensor(&f, &e).scale(2.0))?
        .try_add(&tensor(&e, &f).scale(2.0))?;
    lhs.residual(&rhs)
}

/// The operator pair `(A, B)` intertwined by the representation's kernel:
/// `(H, H_p)`, `(H, H_c)` or `(a, X)`.
pub fn intertwined_pair(spec: &RepSpec) -> Result<(TruncatedOperator, TruncatedOperator)> {
    let (a, b) = match spec.algebra {
        Algebra::Su2 { .. } => ("H", "H_p"),
        Algebra::Su11 { .. } => ("H", "H_c"),
        Algebra::Heisenberg { .. } => ("a", "X"),
    };
    Ok((rep_matrix(spec, a)?, rep_matrix(spec, b)?))
}

/// Intertwining residual of `Δ(A)` and `Δ(B)` against the product kernel
/// `K⊗K`.
pub fn coproduct_intertwining_residual(
    a: &TruncatedOperator,
    b: &TruncatedOperator,
    kernel: &DMatrix<f64>,
) -> Result<f64> {
    intertwining_residual(&coproduct(a), &coproduct(b), &kernel.kronecker(kernel))
}
