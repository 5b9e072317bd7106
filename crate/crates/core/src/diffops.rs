//! Continuous-variable checks for the energy (BEP) and momentum (BMP)
//! diffusions: analytic kernel partials, pointwise generators, two-site
//! duality residuals on grids, the su(1,1) differential representation and
//! the `z = x²` change of variable.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::specfun::{bessel_j, bessel_j_derivatives, reduced_bessel, KernelId};

type C64 = Complex64;

/// Exclusion radius around the coordinate singularity of the energy variables.
pub const BEP_EXCLUSION_RADIUS: f64 = 0.1;

/// The two diffusions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ContinuousFamily {
    Bep { k: f64 },
    Bmp,
}

impl ContinuousFamily {
    pub fn bep(k: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::BadParam(format!("k = {k} must be positive")));
        }
        Ok(ContinuousFamily::Bep { k })
    }

    pub fn kernel(&self) -> KernelId {
        match *self {
            ContinuousFamily::Bep { k } => KernelId::Bep { k },
            ContinuousFamily::Bmp => KernelId::Bmp,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ContinuousFamily::Bep { .. } => "BEP",
            ContinuousFamily::Bmp => "BMP",
        }
    }
}

/// Value and pure second-order partials of a single-site kernel `K(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Partials {
    pub value: f64,
    pub d_a: f64,
    pub d_aa: f64,
    pub d_b: f64,
    pub d_bb: f64,
}

fn check_bep_point(a: f64, b: f64) -> Result<()> {
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::DomainError(format!("BEP kernel needs positive arguments, got ({a}, {b})")));
    }
    Ok(())
}

/// Analytic partials of a continuous kernel.
///
/// The Bessel kernel is written `e^{(a+b)/2} G_ν(ab)` with
/// `G_ν(s) = s^{-ν/2} J_ν(√s)`, `ν = 2k-1`; derivatives use
/// `G_ν' = -G_{ν+1}/2`, so only orders above ν are evaluated.
pub fn kernel_partials(kernel: &KernelId, a: f64, b: f64) -> Result<Partials> {
    match *kernel {
        KernelId::Bep { k } => {
            check_bep_point(a, b)?;
            let nu = 2.0 * k - 1.0;
            let s = a * b;
            let g0 = reduced_bessel(nu, s)?;
            let g1 = -0.5 * reduced_bessel(nu + 1.0, s)?;
            let g2 = 0.25 * reduced_bessel(nu + 2.0, s)?;
            let e = (0.5 * (a + b)).exp();
            Ok(Partials {
                value: e * g0,
                d_a: e * (0.5 * g0 + b * g1),
                d_aa: e * (0.25 * g0 + b * g1 + b * b * g2),
                d_b: e * (0.5 * g0 + a * g1),
                d_bb: e * (0.25 * g0 + a * g1 + a * a * g2),
            })
        }
        KernelId::Bmp => {
            if !(a.is_finite() && b.is_finite()) {
                return Err(Error::DomainError(format!("non-finite point ({a}, {b})")));
            }
            let pre = (2.0 / PI).sqrt() * (0.5 * (a * a + b * b)).exp();
            let (s, c) = (a * b).sin_cos();
            Ok(Partials {
                value: pre * c,
                d_a: pre * (a * c - b * s),
                d_aa: pre * ((1.0 + a * a - b * b) * c - 2.0 * a * b * s),
                d_b: pre * (b * c - a * s),
                d_bb: pre * ((1.0 + b * b - a * a) * c - 2.0 * a * b * s),
            })
        }
        _ => Err(Error::DomainError(format!("{} kernel takes integer arguments", kernel.kind()))),
    }
}

/// `∂_z^m J(z, w)` for `m = 0..=order`, with `J(z,w) = e^{(z+w)/2} G_ν(zw)`.
pub fn bessel_kernel_z_derivatives(k: f64, z: f64, w: f64, order: usize) -> Result<Vec<f64>> {
    check_bep_point(z, w)?;
    let nu = 2.0 * k - 1.0;
    let s = z * w;
    // G^{(r)}(s) = (-1/2)^r G_{ν+r}(s)
    let mut g = Vec::with_capacity(order + 1);
    for r in 0..=order {
        g.push((-0.5f64).powi(r as i32) * reduced_bessel(nu + r as f64, s)?);
    }
    let e = (0.5 * (z + w)).exp();
    Ok((0..=order)
        .map(|n| {
            let mut binom = 1.0;
            let mut total = 0.0;
            for (r, gr) in g.iter().enumerate().take(n + 1) {
                total += binom * 0.5f64.powi((n - r) as i32) * w.powi(r as i32) * gr;
                binom = binom * (n - r) as f64 / (r + 1) as f64;
            }
            e * total
        })
        .collect())
}

/// Value and partials up to second order of a two-variable function.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet2 {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
    pub d11: f64,
    pub d12: f64,
    pub d22: f64,
}

/// A twice-differentiable function of two site variables.
pub trait TwoSiteFunction {
    fn jet(&self, x1: f64, x2: f64) -> Result<Jet2>;
}

/// `L f` at a point: BEP `z₁z₂(∂₁−∂₂)²f − 2k(z₁−z₂)(∂₁−∂₂)f`,
/// BMP `(x₁∂₂ − x₂∂₁)²f`.
pub fn apply_generator(family: ContinuousFamily, f: &dyn TwoSiteFunction, x1: f64, x2: f64) -> Result<f64> {
    if let ContinuousFamily::Bep { .. } = family {
        if !(x1 > 0.0 && x2 > 0.0) {
            return Err(Error::DomainError(format!("BEP generator needs positive energies, got ({x1}, {x2})")));
        }
    }
    let j = f.jet(x1, x2)?;
    Ok(match family {
        ContinuousFamily::Bep { k } => {
            x1 * x2 * (j.d11 - 2.0 * j.d12 + j.d22) - 2.0 * k * (x1 - x2) * (j.d1 - j.d2)
        }
        ContinuousFamily::Bmp => {
            x1 * x1 * j.d22 - 2.0 * x1 * x2 * j.d12 + x2 * x2 * j.d11 - x1 * j.d1 - x2 * j.d2
        }
    })
}

/// Which pair of a two-site kernel the generator differentiates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    First,
    Second,
}

/// `D((a₁,a₂),(b₁,b₂)) = K(a₁,b₁) K(a₂,b₂)` viewed as a function of one pair,
/// the other held fixed.
#[derive(Debug, Clone, Copy)]
pub struct ProductKernel {
    pub kernel: KernelId,
    pub fixed: (f64, f64),
    pub side: Side,
}

impl TwoSiteFunction for ProductKernel {
    fn jet(&self, x1: f64, x2: f64) -> Result<Jet2> {
        let (p, q) = match self.side {
            Side::First => (
                kernel_partials(&self.kernel, x1, self.fixed.0)?,
                kernel_partials(&self.kernel, x2, self.fixed.1)?,
            ),
            Side::Second => {
                let swap = |pt: Partials| Partials { d_a: pt.d_b, d_aa: pt.d_bb, d_b: pt.d_a, d_bb: pt.d_aa, ..pt };
                (
                    swap(kernel_partials(&self.kernel, self.fixed.0, x1)?),
                    swap(kernel_partials(&self.kernel, self.fixed.1, x2)?),
                )
            }
        };
        Ok(Jet2 {
            value: p.value * q.value,
            d1: p.d_a * q.value,
            d2: p.value * q.d_a,
            d11: p.d_aa * q.value,
            d12: p.d_a * q.d_a,
            d22: p.value * q.d_aa,
        })
    }
}

/// Evaluation points for the two arguments of a continuous kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub first: Vec<f64>,
    pub second: Vec<f64>,
    pub exclusion_radius: f64,
}

impl GridSpec {
    pub fn new(first: Vec<f64>, second: Vec<f64>) -> Result<Self> {
        if first.is_empty() || second.is_empty() {
            return Err(Error::BadParam("grid axes must be nonempty".into()));
        }
        if first.iter().chain(&second).any(|v| !v.is_finite()) {
            return Err(Error::BadParam("grid points must be finite".into()));
        }
        Ok(Self { first, second, exclusion_radius: BEP_EXCLUSION_RADIUS })
    }

    /// `n` equally spaced points on `[lo, hi]` for both axes.
    pub fn uniform(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 2 || !(hi > lo) {
            return Err(Error::BadParam(format!("uniform grid needs n >= 2 and lo < hi, got [{lo}, {hi}] x {n}")));
        }
        let pts: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
        Self::new(pts.clone(), pts)
    }

    /// `{0.2, 0.5, 1, 2, 4}` on both axes.
    pub fn standard_bep() -> Self {
        let pts = vec![0.2, 0.5, 1.0, 2.0, 4.0];
        Self { first: pts.clone(), second: pts, exclusion_radius: BEP_EXCLUSION_RADIUS }
    }

    /// `{±0.5, ±1, 1.5}` on both axes.
    pub fn standard_bmp() -> Self {
        let pts = vec![-1.0, -0.5, 0.5, 1.0, 1.5];
        Self { first: pts.clone(), second: pts, exclusion_radius: 0.0 }
    }

    fn check_positive(&self) -> Result<()> {
        if let Some(v) = self.first.iter().chain(&self.second).find(|&&v| v <= self.exclusion_radius) {
            return Err(Error::DomainError(format!(
                "grid point {v} inside the exclusion radius {}",
                self.exclusion_radius
            )));
        }
        Ok(())
    }
}

/// Largest `|L_a D − L_b D|` over all grid quadruples, `D` the two-site
/// product kernel and `L_a`, `L_b` the generator acting on either pair.
pub fn continuous_duality_residual(family: ContinuousFamily, grid: &GridSpec) -> Result<f64> {
    if let ContinuousFamily::Bep { .. } = family {
        grid.check_positive()?;
    }
    let kernel = family.kernel();
    let mut worst = 0.0f64;
    for &a1 in &grid.first {
        for &a2 in &grid.first {
            for &b1 in &grid.second {
                for &b2 in &grid.second {
                    let left = ProductKernel { kernel, fixed: (b1, b2), side: Side::First };
                    let right = ProductKernel { kernel, fixed: (a1, a2), side: Side::Second };
                    let la = apply_generator(family, &left, a1, a2)?;
                    let lb = apply_generator(family, &right, b1, b2)?;
                    worst = worst.max((la - lb).abs());
                }
            }
        }
    }
    Ok(worst)
}

/// Polynomial in one variable with complex coefficients, lowest degree first.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Poly1(pub Vec<C64>);

impl Poly1 {
    pub fn real(coeffs: &[f64]) -> Self {
        Poly1(coeffs.iter().map(|&c| C64::new(c, 0.0)).collect())
    }

    pub fn eval(&self, z: f64) -> C64 {
        self.0.iter().rev().fold(C64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    pub fn derivative(&self) -> Self {
        Poly1(self.0.iter().enumerate().skip(1).map(|(i, &c)| c * i as f64).collect())
    }

    pub fn scale(&self, s: C64) -> Self {
        Poly1(self.0.iter().map(|&c| c * s).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.0.len().max(other.0.len());
        let zero = C64::new(0.0, 0.0);
        Poly1(
            (0..n)
                .map(|i| self.0.get(i).copied().unwrap_or(zero) + other.0.get(i).copied().unwrap_or(zero))
                .collect(),
        )
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.0.is_empty() || other.0.is_empty() {
            return Poly1::default();
        }
        let mut out = vec![C64::new(0.0, 0.0); self.0.len() + other.0.len() - 1];
        for (i, &a) in self.0.iter().enumerate() {
            for (j, &b) in other.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly1(out)
    }
}

/// Differential operator `Σ_m p_m(z) ∂_z^m` with polynomial coefficients.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiffOp {
    coeffs: Vec<Poly1>,
}

impl DiffOp {
    pub fn new(coeffs: Vec<Poly1>) -> Self {
        Self { coeffs }
    }

    pub fn identity() -> Self {
        Self { coeffs: vec![Poly1::real(&[1.0])] }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn coeffs(&self) -> &[Poly1] {
        &self.coeffs
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let empty = Poly1::default();
        Self {
            coeffs: (0..n)
                .map(|m| self.coeffs.get(m).unwrap_or(&empty).add(other.coeffs.get(m).unwrap_or(&empty)))
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { coeffs: self.coeffs.iter().map(|p| p.scale(s)).collect() }
    }

    /// `self ∘ other`, expanding `∂^a q = Σ_r C(a,r) q^{(r)} ∂^{a-r}`.
    pub fn compose(&self, other: &Self) -> Self {
        let mut out = DiffOp::default();
        for (a, p) in self.coeffs.iter().enumerate() {
            for (b, q) in other.coeffs.iter().enumerate() {
                let mut dq = q.clone();
                let mut binom = 1.0;
                for r in 0..=a {
                    let order = a - r + b;
                    let term = p.mul(&dq).scale(C64::new(binom, 0.0));
                    let mut coeffs = vec![Poly1::default(); order + 1];
                    coeffs[order] = term;
                    out = out.add(&DiffOp { coeffs });
                    dq = dq.derivative();
                    binom = binom * (a - r) as f64 / (r + 1) as f64;
                }
            }
        }
        out
    }

    /// `[self, other]`.
    pub fn bracket(&self, other: &Self) -> Self {
        self.compose(other).sub(&other.compose(self))
    }

    /// Applies the operator at `z` given `derivs[m] = f^{(m)}(z)`.
    pub fn apply(&self, z: f64, derivs: &[f64]) -> Result<C64> {
        let mut total = C64::new(0.0, 0.0);
        for (m, p) in self.coeffs.iter().enumerate() {
            let c = p.eval(z);
            if c == C64::new(0.0, 0.0) {
                continue;
            }
            let d = derivs.get(m).ok_or_else(|| {
                Error::DimMismatch(format!("operator of order {} needs derivative {m}", self.order()))
            })?;
            total += c * d;
        }
        Ok(total)
    }
}

/// `(H, E, F)` of the differential su(1,1) representation in the energy
/// variable: `H = −2z∂ − (2k−z)`, `E = −½iz`,
/// `F = −2iz∂² − 2i(2k−z)∂ + ½i(4k−z)`.
pub fn continuous_rep(k: f64) -> (DiffOp, DiffOp, DiffOp) {
    let i = C64::new(0.0, 1.0);
    let h = DiffOp::new(vec![Poly1::real(&[-2.0 * k, 1.0]), Poly1::real(&[0.0, -2.0])]);
    let e = DiffOp::new(vec![Poly1::real(&[0.0, -0.5]).scale(i)]);
    let f = DiffOp::new(vec![
        Poly1::real(&[2.0 * k, -0.5]).scale(i),
        Poly1::real(&[-4.0 * k, 2.0]).scale(i),
        Poly1::real(&[0.0, -2.0]).scale(i),
    ]);
    (h, e, f)
}

fn bep_axis_points(grid: &GridSpec) -> Result<()> {
    grid.check_positive()
}

/// Largest `|(F J(·,w))(z) − ½ i w J(z,w)|` over the grid.
pub fn intertwining_residual_continuous(k: f64, grid: &GridSpec) -> Result<f64> {
    bep_axis_points(grid)?;
    let (_, _, f) = continuous_rep(k);
    let mut worst = 0.0f64;
    for &z in &grid.first {
        for &w in &grid.second {
            let d = bessel_kernel_z_derivatives(k, z, w, 2)?;
            let lhs = f.apply(z, &d)?;
            let rhs = C64::new(0.0, 0.5 * w) * d[0];
            worst = worst.max((lhs - rhs).norm());
        }
    }
    Ok(worst)
}

/// Largest `|Ω J − (½[−E,F]² − (−E)F − F(−E)) J|` over the grid, both
/// operators acting on the first argument of the Bessel kernel.
pub fn bep_casimir_rewrite_residual(k: f64, grid: &GridSpec) -> Result<f64> {
    bep_axis_points(grid)?;
    let (h, e, f) = continuous_rep(k);
    let half = C64::new(0.5, 0.0);
    let omega = h.compose(&h).scale(half).add(&e.compose(&f)).add(&f.compose(&e));
    let minus_e = e.scale(C64::new(-1.0, 0.0));
    let c = minus_e.bracket(&f);
    let rewrite = c.compose(&c).scale(half).sub(&minus_e.compose(&f)).sub(&f.compose(&minus_e));
    let order = omega.order().max(rewrite.order());
    let mut worst = 0.0f64;
    for &z in &grid.first {
        for &w in &grid.second {
            let d = bessel_kernel_z_derivatives(k, z, w, order)?;
            worst = worst.max((omega.apply(z, &d)? - rewrite.apply(z, &d)?).norm());
        }
    }
    Ok(worst)
}

/// Largest disagreement between the BEP generator and
/// `−½(H⊗H + 2F⊗E + 2E⊗F) + 2k²` applied to products of Bessel kernels.
pub fn bep_tensor_form_residual(k: f64, grid: &GridSpec) -> Result<f64> {
    bep_axis_points(grid)?;
    let (h, e, f) = continuous_rep(k);
    let family = ContinuousFamily::bep(k)?;
    let kernel = family.kernel();
    let mut worst = 0.0f64;
    for &z1 in &grid.first {
        for &z2 in &grid.first {
            for &w1 in &grid.second {
                for &w2 in &grid.second {
                    let d1 = bessel_kernel_z_derivatives(k, z1, w1, 2)?;
                    let d2 = bessel_kernel_z_derivatives(k, z2, w2, 2)?;
                    let on = |op: &DiffOp, z: f64, d: &[f64]| op.apply(z, d);
                    let hh = on(&h, z1, &d1)? * on(&h, z2, &d2)?;
                    let fe = on(&f, z1, &d1)? * on(&e, z2, &d2)?;
                    let ef = on(&e, z1, &d1)? * on(&f, z2, &d2)?;
                    let tensor_form = (hh + fe * 2.0 + ef * 2.0) * (-0.5) + 2.0 * k * k * d1[0] * d2[0];
                    let product = ProductKernel { kernel, fixed: (w1, w2), side: Side::First };
                    let direct = apply_generator(family, &product, z1, z2)?;
                    worst = worst.max((tensor_form - direct).norm());
                }
            }
        }
    }
    Ok(worst)
}

/// `max_z |T J_ν(zw) − w² J_ν(zw)|` with `T = −∂_z² − (1/z)∂_z + ν²/z²`.
pub fn bessel_operator_t_residual(nu: f64, w: f64, zs: &[f64]) -> Result<f64> {
    let mut worst = 0.0f64;
    for &z in zs {
        if !(z > 0.0) {
            return Err(Error::DomainError(format!("T is singular at z = {z}")));
        }
        if w == 0.0 {
            // J_ν(0) is finite only for ν ≥ 0, and then T·J_ν(0) = ν²/z²·J_ν(0) = 0.
            let j0 = bessel_j(nu, 0.0)?;
            worst = worst.max((nu * nu / (z * z) * j0).abs());
            continue;
        }
        let u = z * w.abs();
        let (j, dj, ddj) = bessel_j_derivatives(nu, u)?;
        let w2 = w * w;
        let t = -w2 * ddj - w.abs() / z * dj + nu * nu / (z * z) * j;
        worst = worst.max((t - w2 * j).abs());
    }
    Ok(worst)
}

/// Polynomial in two variables, `Σ c_{ij} z₁^i z₂^j`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Poly2 {
    terms: BTreeMap<(u32, u32), f64>,
}

impl Poly2 {
    pub fn new(terms: &[((u32, u32), f64)]) -> Self {
        let mut p = Poly2::default();
        for &(e, c) in terms {
            *p.terms.entry(e).or_insert(0.0) += c;
        }
        p
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|(i, j)| i + j).max().unwrap_or(0)
    }

    pub fn eval(&self, z1: f64, z2: f64) -> f64 {
        self.terms.iter().map(|(&(i, j), &c)| c * z1.powi(i as i32) * z2.powi(j as i32)).sum()
    }

    pub fn d1(&self) -> Self {
        Poly2 {
            terms: self.terms.iter().filter(|(&(i, _), _)| i > 0).map(|(&(i, j), &c)| ((i - 1, j), c * f64::from(i))).collect(),
        }
    }

    pub fn d2(&self) -> Self {
        Poly2 {
            terms: self.terms.iter().filter(|(&(_, j), _)| j > 0).map(|(&(i, j), &c)| ((i, j - 1), c * f64::from(j))).collect(),
        }
    }

    /// `f(x₁², x₂²)`.
    pub fn substitute_squares(&self) -> Self {
        Poly2 { terms: self.terms.iter().map(|(&(i, j), &c)| ((2 * i, 2 * j), c)).collect() }
    }
}

impl TwoSiteFunction for Poly2 {
    fn jet(&self, x1: f64, x2: f64) -> Result<Jet2> {
        let (p1, p2) = (self.d1(), self.d2());
        Ok(Jet2 {
            value: self.eval(x1, x2),
            d1: p1.eval(x1, x2),
            d2: p2.eval(x1, x2),
            d11: p1.d1().eval(x1, x2),
            d12: p1.d2().eval(x1, x2),
            d22: p2.d2().eval(x1, x2),
        })
    }
}

/// Ratio between the momentum generator and the conjugated energy generator:
/// with `z = x²`, `x∂_x = 2z∂_z`, so `L^BMP V = 4 V L^{BEP(1/4)}`.
pub const BMP_TIME_SCALE: f64 = 4.0;

/// `|L^BMP[f(x₁², x₂²)](x₁,x₂) − 4 (L^{BEP(1/4)} f)(x₁², x₂²)|`.
pub fn change_of_variable_residual(f: &Poly2, x1: f64, x2: f64) -> Result<f64> {
    if x1 == 0.0 || x2 == 0.0 {
        return Err(Error::DomainError(format!("change of variable needs nonzero coordinates, got ({x1}, {x2})")));
    }
    let lhs = apply_generator(ContinuousFamily::Bmp, &f.substitute_squares(), x1, x2)?;
    let rhs = apply_generator(ContinuousFamily::Bep { k: 0.25 }, f, x1 * x1, x2 * x2)?;
    Ok((lhs - BMP_TIME_SCALE * rhs).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Richardson-extrapolated central differences.
    fn fd1(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        let d = |h: f64| (f(x + h) - f(x - h)) / (2.0 * h);
        (4.0 * d(h / 2.0) - d(h)) / 3.0
    }

    fn fd2(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        let d = |h: f64| (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
        (4.0 * d(h / 2.0) - d(h)) / 3.0
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-3)
    }

    #[test]
    fn partials_match_finite_differences() {
        let kernels = [KernelId::bep(0.25).unwrap(), KernelId::bep(0.5).unwrap(), KernelId::bep(1.0).unwrap(), KernelId::Bmp];
        let points = [(0.3, 0.7), (1.1, 2.5), (3.0, 0.4), (1.7, 1.9)];
        for kernel in kernels {
            for &(a, b) in &points {
                let p = kernel_partials(&kernel, a, b).unwrap();
                let fa = |x: f64| kernel.continuous(x, b).unwrap();
                let fb = |y: f64| kernel.continuous(a, y).unwrap();
                assert!(rel(p.value, kernel.continuous(a, b).unwrap()) < 1e-14);
                assert!(rel(p.d_a, fd1(fa, a, 1e-2)) < 1e-6, "{kernel:?} d_a at {a},{b}");
                assert!(rel(p.d_b, fd1(fb, b, 1e-2)) < 1e-6);
                assert!(rel(p.d_aa, fd2(fa, a, 1e-2)) < 1e-6, "{kernel:?} d_aa at {a},{b}");
                assert!(rel(p.d_bb, fd2(fb, b, 1e-2)) < 1e-6);
            }
        }
    }

    #[test]
    fn bmp_slope_vanishes_on_axis() {
        for x in [-1.0, 0.3, 2.0] {
            assert_eq!(kernel_partials(&KernelId::Bmp, x, 0.0).unwrap().d_b, 0.0);
        }
    }

    #[test]
    fn bep_quarter_matches_bmp_under_squares() {
        for x in [0.2, 0.9, 2.0] {
            for y in [0.3, 1.4, 2.0] {
                let a = KernelId::bep(0.25).unwrap().continuous(x * x, y * y).unwrap();
                let b = KernelId::Bmp.continuous(x, y).unwrap();
                assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0));
            }
        }
    }

    #[test]
    fn bmp_kernel_is_even() {
        for (x, y) in [(0.4, 1.3), (2.0, 0.7)] {
            let v = KernelId::Bmp.continuous(x, y).unwrap();
            assert_eq!(v, KernelId::Bmp.continuous(-x, y).unwrap());
            assert_eq!(v, KernelId::Bmp.continuous(x, -y).unwrap());
        }
    }

    #[test]
    fn bep_domain_errors() {
        assert!(matches!(kernel_partials(&KernelId::bep(0.5).unwrap(), 0.0, 1.0), Err(Error::DomainError(_))));
        let grid = GridSpec::new(vec![0.05, 1.0], vec![1.0]).unwrap();
        assert!(matches!(
            continuous_duality_residual(ContinuousFamily::bep(0.5).unwrap(), &grid),
            Err(Error::DomainError(_))
        ));
    }

    #[test]
    fn generators_kill_conserved_quantities() {
        let one = Poly2::new(&[((0, 0), 3.0)]);
        let sum = Poly2::new(&[((1, 0), 1.0), ((0, 1), 1.0)]);
        let squares = Poly2::new(&[((2, 0), 1.0), ((0, 2), 1.0)]);
        for (x1, x2) in [(0.3, 2.0), (1.5, 0.7)] {
            assert_eq!(apply_generator(ContinuousFamily::Bep { k: 0.5 }, &one, x1, x2).unwrap(), 0.0);
            assert_eq!(apply_generator(ContinuousFamily::Bmp, &one, x1, x2).unwrap(), 0.0);
            assert!(apply_generator(ContinuousFamily::Bep { k: 0.7 }, &sum, x1, x2).unwrap().abs() < 1e-15);
            assert!(apply_generator(ContinuousFamily::Bmp, &squares, x1, -x2).unwrap().abs() < 1e-14);
        }
    }

    #[test]
    fn duality_residual_examples() {
        let bmp_grid = GridSpec::new(vec![-1.0, -0.5, 0.5, 1.0, 1.5], vec![-1.0, -0.5, 0.5, 1.0, 1.5]).unwrap();
        assert!(continuous_duality_residual(ContinuousFamily::Bmp, &bmp_grid).unwrap() <= 1e-8);
        let bep_grid = GridSpec::uniform(0.2, 4.0, 5).unwrap();
        assert!(continuous_duality_residual(ContinuousFamily::bep(0.5).unwrap(), &bep_grid).unwrap() <= 1e-6);
        let same = GridSpec::new(vec![0.7, 1.3], vec![0.7, 1.3]).unwrap();
        for family in [ContinuousFamily::bep(1.0).unwrap(), ContinuousFamily::Bmp] {
            let kernel = family.kernel();
            let (a1, a2) = (0.7, 1.3);
            let left = ProductKernel { kernel, fixed: (a1, a2), side: Side::First };
            let right = ProductKernel { kernel, fixed: (a1, a2), side: Side::Second };
            let la = apply_generator(family, &left, a1, a2).unwrap();
            let lb = apply_generator(family, &right, a1, a2).unwrap();
            assert_eq!(la, lb);
            assert!(continuous_duality_residual(family, &same).is_ok());
        }
    }

    #[test]
    fn f_eigenfunction_examples() {
        for (k, z, w) in [(0.25, 1.0, 1.0), (1.0, 2.0, 0.5)] {
            let grid = GridSpec::new(vec![z], vec![w]).unwrap();
            assert!(intertwining_residual_continuous(k, &grid).unwrap() <= 1e-8);
        }
        // -E acting on w is multiplication by ½iw, matching the F eigenvalue exactly.
        let (_, e, _) = continuous_rep(0.5);
        let j = 1.7;
        let v = e.scale(C64::new(-1.0, 0.0)).apply(0.9, &[j]).unwrap();
        assert_eq!(v, C64::new(0.0, 0.5 * 0.9) * j);
    }

    #[test]
    fn diffop_composition() {
        // ∂ ∘ z = z∂ + 1
        let d = DiffOp::new(vec![Poly1::default(), Poly1::real(&[1.0])]);
        let z = DiffOp::new(vec![Poly1::real(&[0.0, 1.0])]);
        let dz = d.compose(&z);
        assert_eq!(dz.apply(2.0, &[3.0, 5.0]).unwrap(), C64::new(3.0 + 2.0 * 5.0, 0.0));
        let comm = d.bracket(&z);
        assert_eq!(comm.apply(2.0, &[3.0, 5.0]).unwrap(), C64::new(3.0, 0.0));
    }

    #[test]
    fn continuous_rep_relations() {
        let (h, e, f) = continuous_rep(0.75);
        let test = |op: &DiffOp| {
            // f(z) = e^{z/3}: all derivatives are (1/3)^m f.
            let z: f64 = 1.3;
            let derivs: Vec<f64> = (0..6).map(|m| (z / 3.0).exp() / 3f64.powi(m)).collect();
            op.apply(z, &derivs).unwrap()
        };
        // Same sign pattern as the discrete series: [H,E] = −2E, [H,F] = 2F, [E,F] = −H.
        let he = h.bracket(&e).add(&e.scale(C64::new(2.0, 0.0)));
        let hf = h.bracket(&f).sub(&f.scale(C64::new(2.0, 0.0)));
        let ef = e.bracket(&f).add(&h);
        for op in [he, hf, ef] {
            assert!(test(&op).norm() < 1e-12);
        }
    }

    #[test]
    fn bep_casimir_and_tensor_form() {
        let grid = GridSpec::standard_bep();
        for k in [0.25, 0.5, 1.0] {
            assert!(bep_casimir_rewrite_residual(k, &grid).unwrap() <= 1e-6);
            assert!(bep_tensor_form_residual(k, &GridSpec::new(vec![0.5, 2.0], vec![0.7, 1.5]).unwrap()).unwrap() <= 1e-6);
        }
    }

    #[test]
    fn bessel_t_examples() {
        let zs = [0.3, 1.0, 2.5, 7.0];
        assert!(bessel_operator_t_residual(1.5, 1.0, &zs).unwrap() <= 1e-9);
        assert!(bessel_operator_t_residual(-0.5, 1.3, &zs).unwrap() <= 1e-10);
        assert_eq!(bessel_operator_t_residual(2.0, 0.0, &zs).unwrap(), 0.0);
        assert!(matches!(bessel_operator_t_residual(1.0, 1.0, &[0.0]), Err(Error::DomainError(_))));
    }

    #[test]
    fn bessel_t_closed_cosine_form() {
        // J_{-1/2}(u) = √(2/(πu)) cos u; check T directly from the closed form.
        let w = 1.3;
        for z in [0.4, 1.0, 3.0] {
            let f = |z: f64| (2.0 / (PI * z * w)).sqrt() * (z * w).cos();
            let (d1, d2) = (fd1(f, z, 1e-3), fd2(f, z, 1e-3));
            let t = -d2 - d1 / z + 0.25 / (z * z) * f(z);
            assert!((t - w * w * f(z)).abs() < 1e-6);
        }
    }

    #[test]
    fn change_of_variable_examples() {
        let one = Poly2::new(&[((0, 0), 1.0)]);
        assert_eq!(change_of_variable_residual(&one, 0.4, 1.2).unwrap(), 0.0);
        let z1z2 = Poly2::new(&[((1, 1), 1.0)]);
        assert!(change_of_variable_residual(&z1z2, 1.0, 0.5).unwrap() <= 1e-10);
        let z1sq = Poly2::new(&[((2, 0), 1.0)]);
        assert!(change_of_variable_residual(&z1sq, 0.7, 1.3).unwrap() <= 1e-10);
        // Without the factor 4: L^BMP[x₁²x₂²] = 2x₁⁴ + 2x₂⁴ − 12x₁²x₂² = −0.875 at (1, ½),
        // while L^{BEP(1/4)}[z₁z₂] = −2z₁z₂ + ½(z₁−z₂)² = −0.21875 at (1, ¼).
        let lhs = apply_generator(ContinuousFamily::Bmp, &z1z2.substitute_squares(), 1.0, 0.5).unwrap();
        let rhs = apply_generator(ContinuousFamily::Bep { k: 0.25 }, &z1z2, 1.0, 0.25).unwrap();
        assert!((lhs + 0.875).abs() < 1e-15 && (rhs + 0.21875).abs() < 1e-15);
    }
}
