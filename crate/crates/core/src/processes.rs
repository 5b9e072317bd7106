//! Graphs, conserved-total sectors, rate generators of the discrete particle
//! systems, their algebraic two-site construction, duality matrices and the
//! exact residual checks built on them.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use nalgebra::DMatrix;

use crate::algebra::{rep_matrix, tensor, RepSpec, TruncatedOperator};
use crate::error::{Error, Result};
use crate::linalg::expm;
use crate::specfun::{ln_gamma_signed, KernelId, Spin};

/// Simple undirected connected graph on vertices `0..n_vertices`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Graph {
    n_vertices: usize,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    pub fn new(n_vertices: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n_vertices == 0 {
            return Err(Error::InvalidGraph("graph needs at least one vertex".into()));
        }
        let mut set = BTreeSet::new();
        for &(a, b) in edges {
            if a >= n_vertices || b >= n_vertices {
                return Err(Error::InvalidGraph(format!("edge ({a}, {b}) leaves the vertex set")));
            }
            if a == b {
                return Err(Error::InvalidGraph(format!("self-loop at vertex {a}")));
            }
            if !set.insert((a.min(b), a.max(b))) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({a}, {b})")));
            }
        }
        let graph = Self { n_vertices, edges: set.into_iter().collect() };
        if !graph.is_connected() {
            return Err(Error::InvalidGraph("graph is not connected".into()));
        }
        Ok(graph)
    }

    pub fn path(n_vertices: usize) -> Result<Self> {
        let edges: Vec<_> = (1..n_vertices).map(|i| (i - 1, i)).collect();
        Self::new(n_vertices, &edges)
    }

    pub fn complete(n_vertices: usize) -> Result<Self> {
        let edges: Vec<_> = (0..n_vertices).flat_map(|a| (a + 1..n_vertices).map(move |b| (a, b))).collect();
        Self::new(n_vertices, &edges)
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n_vertices];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &(a, b) in &self.edges {
                let next = if a == v {
                    b
                } else if b == v {
                    a
                } else {
                    continue;
                };
                if !seen[next] {
                    seen[next] = true;
                    stack.push(next);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// The three discrete particle systems, with the parameter entering the rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DiscreteFamily {
    Sep { j: Spin },
    Sip { k: f64 },
    Irw,
}

impl DiscreteFamily {
    pub fn sep(j: f64) -> Result<Self> {
        Ok(DiscreteFamily::Sep { j: Spin::new(j)? })
    }

    pub fn sip(k: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::BadParam(format!("k = {k} must be positive")));
        }
        Ok(DiscreteFamily::Sip { k })
    }

    /// The rate family matching a duality kernel.
    pub fn of_kernel(kernel: &KernelId) -> Result<Self> {
        match *kernel {
            KernelId::Sep { j, .. } => Ok(DiscreteFamily::Sep { j }),
            KernelId::Sip { k, .. } => Ok(DiscreteFamily::Sip { k }),
            KernelId::Irw { .. } => Ok(DiscreteFamily::Irw),
            _ => Err(Error::NotApplicable(format!("{} is not a particle system", kernel.kind()))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DiscreteFamily::Sep { .. } => "SEP",
            DiscreteFamily::Sip { .. } => "SIP",
            DiscreteFamily::Irw => "IRW",
        }
    }

    /// Largest single-site occupation, if bounded.
    pub fn capacity(&self) -> Option<u32> {
        match self {
            DiscreteFamily::Sep { j } => Some(j.two_j()),
            _ => None,
        }
    }

    /// Rate of moving one particle from a site holding `from` particles to
    /// a neighbour holding `to`.
    pub fn jump_rate(&self, from: u32, to: u32) -> f64 {
        let (x, y) = (f64::from(from), f64::from(to));
        match *self {
            DiscreteFamily::Sep { j } => {
                let holes = f64::from(j.two_j()) - y;
                if holes <= 0.0 {
                    0.0
                } else {
                    x * holes
                }
            }
            DiscreteFamily::Sip { k } => x * (2.0 * k + y),
            DiscreteFamily::Irw => x,
        }
    }
}

impl fmt::Display for DiscreteFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiscreteFamily::Sep { j } => write!(f, "SEP(j={j})"),
            DiscreteFamily::Sip { k } => write!(f, "SIP(k={k})"),
            DiscreteFamily::Irw => write!(f, "IRW"),
        }
    }
}

pub type Configuration = Vec<u32>;

/// All configurations on a graph with a fixed particle total.
#[derive(Debug, Clone, PartialEq)]
pub struct Sector {
    family: DiscreteFamily,
    graph: Graph,
    total: u32,
    states: Vec<Configuration>,
    index: HashMap<Configuration, usize>,
}

impl Sector {
    pub fn family(&self) -> DiscreteFamily {
        self.family
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn total(&self) -> u32 {
        self.total
    }

    pub fn states(&self) -> &[Configuration] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn position(&self, config: &[u32]) -> Option<usize> {
        self.index.get(config).copied()
    }
}

/// Configurations with occupation sum `total`, in lexicographic order.
pub fn enumerate_sector(family: DiscreteFamily, graph: &Graph, total: u32) -> Result<Sector> {
    let n = graph.n_vertices();
    let cap = family.capacity().unwrap_or(total);
    let capacity = u64::from(cap) * n as u64;
    if u64::from(total) > capacity {
        return Err(Error::InfeasibleTotal { total, capacity: capacity.min(u64::from(u32::MAX)) as u32 });
    }
    let mut states = Vec::new();
    let mut current = vec![0u32; n];
    fill(&mut current, 0, total, cap, &mut states);
    let index = states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
    Ok(Sector { family, graph: graph.clone(), total, states, index })
}

fn fill(current: &mut Vec<u32>, site: usize, remaining: u32, cap: u32, out: &mut Vec<Configuration>) {
    let n = current.len();
    if site == n - 1 {
        if remaining <= cap {
            current[site] = remaining;
            out.push(current.clone());
        }
        return;
    }
    let rest_capacity = u64::from(cap) * (n - site - 1) as u64;
    for v in 0..=remaining.min(cap) {
        if u64::from(remaining - v) > rest_capacity {
            continue;
        }
        current[site] = v;
        fill(current, site + 1, remaining - v, cap, out);
    }
}

/// Generator restricted to a sector: `(Lf)(x) = Σ_y L[x,y] f(y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrix {
    sector: Sector,
    entries: DMatrix<f64>,
}

impl RateMatrix {
    pub fn sector(&self) -> &Sector {
        &self.sector
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn max_row_sum(&self) -> f64 {
        self.entries.row_iter().map(|r| r.sum().abs()).fold(0.0, f64::max)
    }
}

pub fn build_rate_generator(sector: &Sector) -> RateMatrix {
    let d = sector.len();
    let family = sector.family;
    let mut entries = DMatrix::zeros(d, d);
    for (row, x) in sector.states.iter().enumerate() {
        let mut out_rate = 0.0;
        for &(a, b) in sector.graph.edges() {
            for (from, to) in [(a, b), (b, a)] {
                if x[from] == 0 {
                    continue;
                }
                let rate = family.jump_rate(x[from], x[to]);
                if rate == 0.0 {
                    continue;
                }
                let mut y = x.clone();
                y[from] -= 1;
                y[to] += 1;
                let col = sector.index[&y];
                entries[(row, col)] += rate;
                out_rate += rate;
            }
        }
        entries[(row, row)] -= out_rate;
    }
    RateMatrix { sector: sector.clone(), entries }
}

/// Two-site generator assembled from representation matrices.
#[derive(Debug, Clone)]
pub struct AlgebraicGenerator {
    pub operator: TruncatedOperator,
    pub dim_per_site: usize,
    /// For IRW: residual between the two displayed tensor forms.
    pub alternate_form_residual: Option<f64>,
}

/// `L = F⊗E + E⊗F + ½H⊗H − 2j²` (SEP), `−F⊗E − E⊗F − ½H⊗H + 2k²` (SIP),
/// `(1⊗a − a⊗1)(a†⊗1 − 1⊗a†)/λ` (IRW, also built as
/// `(−X⊗a + 1⊗aX + aX⊗1 − a⊗X)/λ`).
///
/// `dim_per_site` is ignored for SEP, whose site space has dimension 2j+1.
pub fn build_algebraic_generator(
    family: DiscreteFamily,
    lambda: f64,
    dim_per_site: usize,
) -> Result<AlgebraicGenerator> {
    match family {
        DiscreteFamily::Sep { j } => {
            let spec = RepSpec::su2(j.j())?;
            let (h, e, f) = site_ops(&spec)?;
            let d = spec.dim;
            let one = TruncatedOperator::identity(d * d);
            let jj = j.j();
            let op = &(&(&tensor(&f, &e) + &tensor(&e, &f)) + &(&tensor(&h, &h) * 0.5)) - &(&one * (2.0 * jj * jj));
            Ok(AlgebraicGenerator { operator: op.with_label("L_SEP"), dim_per_site: d, alternate_form_residual: None })
        }
        DiscreteFamily::Sip { k } => {
            let spec = RepSpec::su11(k, dim_per_site)?;
            let (h, e, f) = site_ops(&spec)?;
            let d = spec.dim;
            let one = TruncatedOperator::identity(d * d);
            let op = &(&one * (2.0 * k * k))
                - &(&(&tensor(&f, &e) + &tensor(&e, &f)) + &(&tensor(&h, &h) * 0.5));
            Ok(AlgebraicGenerator { operator: op.with_label("L_SIP"), dim_per_site: d, alternate_form_residual: None })
        }
        DiscreteFamily::Irw => {
            let spec = RepSpec::heisenberg(lambda, dim_per_site)?;
            let d = spec.dim;
            let a = rep_matrix(&spec, "a")?;
            let ad = rep_matrix(&spec, "a_dagger")?;
            let x = rep_matrix(&spec, "X")?;
            let one = TruncatedOperator::identity(d);
            let left = &tensor(&one, &a) - &tensor(&a, &one);
            let right = &tensor(&ad, &one) - &tensor(&one, &ad);
            let product = (&left * &right).scale(1.0 / lambda);
            let ax = &a * &x;
            let alt = &(&(&tensor(&one, &ax) + &tensor(&ax, &one)) - &tensor(&x, &a)) - &tensor(&a, &x);
            let alt = alt.scale(1.0 / lambda);
            let residual = product.residual(&alt)?;
            Ok(AlgebraicGenerator {
                operator: product.with_label("L_IRW"),
                dim_per_site: d,
                alternate_form_residual: Some(residual),
            })
        }
    }
}

fn site_ops(spec: &RepSpec) -> Result<(TruncatedOperator, TruncatedOperator, TruncatedOperator)> {
    Ok((rep_matrix(spec, "H")?, rep_matrix(spec, "E")?, rep_matrix(spec, "F")?))
}

/// Largest disagreement between the algebraic two-site generator and the
/// rate matrices of all two-vertex sectors whose rows are unaffected by
/// truncation. Entries leaving a sector must vanish and are included.
pub fn algebraic_vs_rate_residual(generator: &AlgebraicGenerator, family: DiscreteFamily) -> Result<f64> {
    let d = generator.dim_per_site;
    let graph = Graph::path(2)?;
    let op = &generator.operator;
    let max_total = match family {
        DiscreteFamily::Sep { j } => 2 * j.two_j(),
        _ => (d - 2) as u32,
    };
    let mut worst = 0.0f64;
    for total in 0..=max_total {
        let sector = enumerate_sector(family, &graph, total)?;
        let rates = build_rate_generator(&sector);
        let basis: Vec<usize> = sector.states().iter().map(|s| s[0] as usize * d + s[1] as usize).collect();
        for (r, &row) in basis.iter().enumerate() {
            if !op.is_valid(row) {
                return Err(Error::DimMismatch(format!("row {row} of the truncated generator is not exact")));
            }
            for col in 0..d * d {
                let expected = basis.iter().position(|&b| b == col).map_or(0.0, |c| rates.entries()[(r, c)]);
                worst = worst.max((op.entries()[(row, col)] - nalgebra::Complex::new(expected, 0.0)).norm());
            }
        }
    }
    Ok(worst)
}

/// `D[x,y] = ∏_i kernel(x_i, y_i)`.
pub fn duality_matrix(kernel: &KernelId, sx: &Sector, sy: &Sector) -> Result<DMatrix<f64>> {
    if sx.graph != sy.graph {
        return Err(Error::GraphMismatch);
    }
    let n = sx.graph.n_vertices();
    let max_x = sx.states.iter().flatten().copied().max().unwrap_or(0);
    let max_y = sy.states.iter().flatten().copied().max().unwrap_or(0);
    let mut table = DMatrix::zeros(max_x as usize + 1, max_y as usize + 1);
    for a in 0..=max_x {
        for b in 0..=max_y {
            table[(a as usize, b as usize)] = kernel.discrete(a, b)?;
        }
    }
    Ok(DMatrix::from_fn(sx.len(), sy.len(), |r, c| {
        let (x, y) = (&sx.states[r], &sy.states[c]);
        (0..n).map(|i| table[(x[i] as usize, y[i] as usize)]).product()
    }))
}

fn conformable(l1: &DMatrix<f64>, d: &DMatrix<f64>, l2: &DMatrix<f64>) -> Result<()> {
    if l1.ncols() != d.nrows() || l2.ncols() != d.ncols() || !l1.is_square() || !l2.is_square() {
        return Err(Error::DimMismatch(format!(
            "L1 {}x{}, D {}x{}, L2 {}x{}",
            l1.nrows(),
            l1.ncols(),
            d.nrows(),
            d.ncols(),
            l2.nrows(),
            l2.ncols()
        )));
    }
    Ok(())
}

/// `‖L1 D − D L2ᵀ‖_max`.
pub fn generator_duality_residual(l1: &DMatrix<f64>, d: &DMatrix<f64>, l2: &DMatrix<f64>) -> Result<f64> {
    conformable(l1, d, l2)?;
    Ok((l1 * d - d * l2.transpose()).amax())
}

/// `‖exp(tL1) D − D exp(tL2ᵀ)‖_max`.
pub fn semigroup_duality_residual(l1: &DMatrix<f64>, d: &DMatrix<f64>, l2: &DMatrix<f64>, t: f64) -> Result<f64> {
    conformable(l1, d, l2)?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::BadParam(format!("time t = {t} must be nonnegative")));
    }
    let left = expm(&(l1 * t)) * d;
    let right = d * expm(&(l2.transpose() * t));
    Ok((left - right).amax())
}

/// Single-site stationary laws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StationaryLaw {
    /// `C(n,x) p^x (1−p)^{n−x}`.
    Binomial { n: u32, p: f64 },
    /// `C(r+x−1,x) p^x (1−p)^r`.
    NegativeBinomial { r: f64, p: f64 },
    Poisson { lambda: f64 },
    /// Density `z^{shape−1} e^{−z/scale} / (Γ(shape) scale^shape)`.
    Gamma { shape: f64, scale: f64 },
    Normal { mean: f64, variance: f64 },
}

impl StationaryLaw {
    /// Reversible marginal of a particle system (`param` is `p` for SEP and
    /// SIP, `λ` for IRW).
    pub fn for_family(family: DiscreteFamily, param: f64) -> Result<Self> {
        let law = match family {
            DiscreteFamily::Sep { j } => StationaryLaw::Binomial { n: j.two_j(), p: param },
            DiscreteFamily::Sip { k } => StationaryLaw::NegativeBinomial { r: 2.0 * k, p: param },
            DiscreteFamily::Irw => StationaryLaw::Poisson { lambda: param },
        };
        law.validate()?;
        Ok(law)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            StationaryLaw::Binomial { p, .. } => p > 0.0 && p < 1.0,
            StationaryLaw::NegativeBinomial { r, p } => r > 0.0 && p > 0.0 && p < 1.0,
            StationaryLaw::Poisson { lambda } => lambda > 0.0 && lambda.is_finite(),
            StationaryLaw::Gamma { shape, scale } => shape > 0.0 && scale > 0.0,
            StationaryLaw::Normal { variance, mean } => variance > 0.0 && mean.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::BadParam(format!("invalid law {self:?}")))
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(
            self,
            StationaryLaw::Binomial { .. } | StationaryLaw::NegativeBinomial { .. } | StationaryLaw::Poisson { .. }
        )
    }

    pub fn mean(&self) -> f64 {
        match *self {
            StationaryLaw::Binomial { n, p } => f64::from(n) * p,
            StationaryLaw::NegativeBinomial { r, p } => r * p / (1.0 - p),
            StationaryLaw::Poisson { lambda } => lambda,
            StationaryLaw::Gamma { shape, scale } => shape * scale,
            StationaryLaw::Normal { mean, .. } => mean,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            StationaryLaw::Binomial { n, p } => f64::from(n) * p * (1.0 - p),
            StationaryLaw::NegativeBinomial { r, p } => r * p / ((1.0 - p) * (1.0 - p)),
            StationaryLaw::Poisson { lambda } => lambda,
            StationaryLaw::Gamma { shape, scale } => shape * scale * scale,
            StationaryLaw::Normal { variance, .. } => variance,
        }
    }
}

fn ln_factorial(x: u32) -> f64 {
    ln_gamma_signed(f64::from(x) + 1.0).0
}

/// Probability mass at `x` of a discrete law.
pub fn stationary_pmf(law: &StationaryLaw, x: u32) -> Result<f64> {
    law.validate()?;
    let xf = f64::from(x);
    let ln = match *law {
        StationaryLaw::Binomial { n, p } => {
            if x > n {
                return Err(Error::OutOfSupport(x));
            }
            ln_factorial(n) - ln_factorial(x) - ln_factorial(n - x) + xf * p.ln() + f64::from(n - x) * (1.0 - p).ln()
        }
        StationaryLaw::NegativeBinomial { r, p } => {
            ln_gamma_signed(r + xf).0 - ln_gamma_signed(r).0 - ln_factorial(x) + xf * p.ln() + r * (1.0 - p).ln()
        }
        StationaryLaw::Poisson { lambda } => -lambda + xf * lambda.ln() - ln_factorial(x),
        _ => return Err(Error::NotApplicable("continuous law has no mass function".into())),
    };
    Ok(ln.exp())
}

/// `max |μ(x)L[x,y] − μ(y)L[y,x]|` with `μ` the unnormalized product measure.
pub fn detailed_balance_residual(rates: &RateMatrix, law: &StationaryLaw) -> Result<f64> {
    let states = rates.sector.states();
    let mu = states
        .iter()
        .map(|s| s.iter().map(|&x| stationary_pmf(law, x)).product::<Result<f64>>())
        .collect::<Result<Vec<f64>>>()?;
    let l = &rates.entries;
    let mut worst = 0.0f64;
    for x in 0..states.len() {
        for y in x + 1..states.len() {
            worst = worst.max((mu[x] * l[(x, y)] - mu[y] * l[(y, x)]).abs());
        }
    }
    Ok(worst)
}
