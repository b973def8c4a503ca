//! Frequency lattice ℤ^d_L = L⁻¹ℤ^d with a spherical cutoff, the four-wave
//! dispersion function, damping/forcing profiles and weighted sup-norms.

use crate::error::{config, Error, Result};
use crate::numerics::Kahan;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Maximum supported dimension.
pub const MAX_DIM: usize = 3;

pub type Vec3 = [f64; MAX_DIM];

#[inline]
pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm2(a: &Vec3) -> f64 {
    dot(a, a)
}

#[inline]
pub fn add(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale(a: &Vec3, c: f64) -> Vec3 {
    [a[0] * c, a[1] * c, a[2] * c]
}

/// Japanese bracket ⟨s⟩ = (1 + |s|²)^{1/2}.
#[inline]
pub fn bracket(s2: f64) -> f64 {
    (1.0 + s2).sqrt()
}

/// A retained lattice point: integer index n and frequency s = n/L.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mode {
    pub index: [i64; MAX_DIM],
    pub s: Vec3,
}

/// The cut-off lattice. Modes are stored in lexicographic index order.
#[derive(Clone, Debug)]
pub struct LatticeSpec {
    d: usize,
    period: f64,
    cutoff: f64,
    nmax: i64,
    modes: Vec<Mode>,
    lookup: Vec<u32>,
}

const NO_MODE: u32 = u32::MAX;

impl LatticeSpec {
    pub fn new(d: usize, period: f64, cutoff: f64) -> Result<Self> {
        if !(2..=MAX_DIM).contains(&d) {
            return config(format!("dimension must be 2 or 3, got {d}"));
        }
        if !(period >= 1.0) || !period.is_finite() {
            return config(format!("period L must be >= 1, got {period}"));
        }
        if !(cutoff > 0.0) || !cutoff.is_finite() {
            return config(format!("cutoff radius must be positive, got {cutoff}"));
        }
        let rl = cutoff * period;
        let nmax = (rl + 1e-9).floor() as i64;
        let bound = rl * rl * (1.0 + 1e-12);
        let side = (2 * nmax + 1) as usize;
        let cells = side.pow(d as u32);
        if cells > 200_000_000 {
            return Err(Error::Regime(format!(
                "lattice cube of {cells} cells is too large"
            )));
        }
        let mut modes = Vec::new();
        let mut lookup = vec![NO_MODE; cells];
        let mut idx = [0i64; MAX_DIM];
        for cell in 0..cells {
            let mut rem = cell;
            for k in (0..d).rev() {
                idx[k] = (rem % side) as i64 - nmax;
                rem /= side;
            }
            let n2: i64 = idx[..d].iter().map(|v| v * v).sum();
            if (n2 as f64) <= bound {
                let mut s = [0.0; MAX_DIM];
                for k in 0..d {
                    s[k] = idx[k] as f64 / period;
                }
                lookup[cell] = modes.len() as u32;
                modes.push(Mode { index: idx, s });
            }
        }
        Ok(Self {
            d,
            period,
            cutoff,
            nmax,
            modes,
            lookup,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    /// Largest |n_k| among retained modes.
    pub fn nmax(&self) -> i64 {
        self.nmax
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// L^{-d}
    pub fn cell_volume(&self) -> f64 {
        self.period.powi(-(self.d as i32))
    }

    /// Position of the mode with integer index `n`, if retained.
    #[inline]
    pub fn find(&self, n: &[i64; MAX_DIM]) -> Option<usize> {
        let side = 2 * self.nmax + 1;
        let mut cell = 0i64;
        for k in 0..self.d {
            let v = n[k] + self.nmax;
            if v < 0 || v >= side {
                return None;
            }
            cell = cell * side + v;
        }
        match self.lookup[cell as usize] {
            NO_MODE => None,
            i => Some(i as usize),
        }
    }

    /// Position of the zero mode.
    pub fn origin(&self) -> usize {
        self.find(&[0; MAX_DIM]).expect("origin is always retained")
    }
}

/// ω, δ and δ' for a quadruple (s₁, s₂, s₃, s).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResonanceData {
    pub s1: Vec3,
    pub s2: Vec3,
    pub s3: Vec3,
    pub s: Vec3,
    /// |s₁|²+|s₂|²−|s₃|²−|s|²
    pub omega: f64,
    /// 2(s₁−s)·(s−s₂), equal to `omega` whenever δ holds
    pub omega_factored: f64,
    pub kron_delta: bool,
    pub strict_delta: bool,
}

fn same(a: &Vec3, b: &Vec3, tol: f64) -> bool {
    (0..MAX_DIM).all(|k| (a[k] - b[k]).abs() <= tol)
}

/// Dispersion data for arbitrary frequency vectors. δ is decided with a
/// relative tolerance of 1e-12; use [`resonance_on_lattice`] for exact
/// integer arithmetic.
pub fn dispersion_omega(s1: &Vec3, s2: &Vec3, s3: &Vec3, s: &Vec3) -> ResonanceData {
    let omega = norm2(s1) + norm2(s2) - norm2(s3) - norm2(s);
    let omega_factored = 2.0 * dot(&sub(s1, s), &sub(s, s2));
    let scale = 1.0 + [s1, s2, s3, s].iter().map(|v| norm2(v).sqrt()).sum::<f64>();
    let tol = 1e-12 * scale;
    let kron = same(&add(s1, s2), &add(s3, s), tol);
    let pair_eq = (same(s1, s3, tol) && same(s2, s, tol)) || (same(s1, s, tol) && same(s2, s3, tol));
    ResonanceData {
        s1: *s1,
        s2: *s2,
        s3: *s3,
        s: *s,
        omega,
        omega_factored,
        kron_delta: kron,
        strict_delta: kron && !pair_eq,
    }
}

/// Integer form of ω·L² computed both ways, plus δ and δ'.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IntegerResonance {
    pub omega_l2: i64,
    pub omega_l2_factored: i64,
    pub kron_delta: bool,
    pub strict_delta: bool,
}

pub fn resonance_on_lattice(
    n1: &[i64; MAX_DIM],
    n2: &[i64; MAX_DIM],
    n3: &[i64; MAX_DIM],
    n: &[i64; MAX_DIM],
) -> IntegerResonance {
    let sq = |v: &[i64; MAX_DIM]| v.iter().map(|x| x * x).sum::<i64>();
    let omega_l2 = sq(n1) + sq(n2) - sq(n3) - sq(n);
    let omega_l2_factored = 2 * (0..MAX_DIM)
        .map(|k| (n1[k] - n[k]) * (n[k] - n2[k]))
        .sum::<i64>();
    let kron = (0..MAX_DIM).all(|k| n1[k] + n2[k] == n3[k] + n[k]);
    let pair_eq = (n1 == n3 && n2 == n) || (n1 == n && n2 == n3);
    IntegerResonance {
        omega_l2,
        omega_l2_factored,
        kron_delta: kron,
        strict_delta: kron && !pair_eq,
    }
}

/// L^{-d} Σ_s f(s) over retained modes in lexicographic order.
pub fn mod_sum(lattice: &LatticeSpec, mut f: impl FnMut(&Mode) -> f64) -> Result<f64> {
    let mut acc = Kahan::new();
    for m in lattice.modes() {
        acc.add(f(m));
    }
    let v = acc.value() * lattice.cell_volume();
    if !v.is_finite() {
        return Err(Error::Numeric("non-finite lattice sum".into()));
    }
    Ok(v)
}

/// γ⁰: [0, ∞) → [1, ∞), γ_s = γ⁰(|s|²).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DampingProfile {
    /// (1 + y)^{r_*}
    Power { r_star: f64 },
    /// Piecewise-linear table in y = |s|², constant beyond the last knot.
    Table { y: Vec<f64>, gamma: Vec<f64> },
}

impl Default for DampingProfile {
    fn default() -> Self {
        DampingProfile::Power { r_star: 1.0 }
    }
}

impl DampingProfile {
    pub fn validate(&self) -> Result<()> {
        match self {
            DampingProfile::Power { r_star } => {
                if !(*r_star >= 0.0) || !r_star.is_finite() {
                    return config(format!("r_* must be nonnegative, got {r_star}"));
                }
            }
            DampingProfile::Table { y, gamma } => {
                if y.len() < 2 || y.len() != gamma.len() {
                    return config("damping table needs >= 2 matching knots");
                }
                if y[0] != 0.0 {
                    return config("damping table must start at y = 0");
                }
                for w in y.windows(2) {
                    if !(w[1] > w[0]) {
                        return config("damping table knots must increase");
                    }
                }
                for w in gamma.windows(2) {
                    if w[1] < w[0] {
                        return config("damping table must be nondecreasing");
                    }
                }
                if gamma[0] < 1.0 {
                    return config("damping must be >= 1");
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn gamma0(&self, y: f64) -> f64 {
        match self {
            DampingProfile::Power { r_star } => {
                if *r_star == 1.0 {
                    1.0 + y
                } else {
                    (1.0 + y).powf(*r_star)
                }
            }
            DampingProfile::Table { y: ys, gamma } => {
                if y >= ys[ys.len() - 1] {
                    return gamma[gamma.len() - 1];
                }
                let k = ys.partition_point(|&v| v <= y) - 1;
                let t = (y - ys[k]) / (ys[k + 1] - ys[k]);
                gamma[k] + t * (gamma[k + 1] - gamma[k])
            }
        }
    }

    /// Growth exponent used by the derivative envelope check.
    pub fn growth_exponent(&self) -> f64 {
        match self {
            DampingProfile::Power { r_star } => *r_star,
            DampingProfile::Table { .. } => 0.0,
        }
    }

    /// Checks γ⁰ ≥ 1, monotonicity and the envelope
    /// |∂^k γ⁰(y)| ≤ c (1+y)^{r_*−k}, k ≤ 3, on a sample grid.
    pub fn check_envelope(&self, c: f64) -> Result<()> {
        self.validate()?;
        let r = self.growth_exponent();
        let h = 1e-2;
        let mut prev = self.gamma0(0.0);
        for i in 0..400 {
            let y = 0.05 * i as f64 + 2.0 * h;
            let g = self.gamma0(y);
            if g < 1.0 || g + 1e-12 < prev {
                return config(format!("damping fails monotone/lower bound at y = {y}"));
            }
            prev = g;
            if matches!(self, DampingProfile::Power { .. }) {
                let f = |x: f64| self.gamma0(x);
                let d1 = (f(y + h) - f(y - h)) / (2.0 * h);
                let d2 = (f(y + h) - 2.0 * f(y) + f(y - h)) / (h * h);
                let d3 = (f(y + 2.0 * h) - 2.0 * f(y + h) + 2.0 * f(y - h) - f(y - 2.0 * h))
                    / (2.0 * h * h * h);
                for (k, dk) in [(0, g), (1, d1), (2, d2), (3, d3)] {
                    let env = c * (1.0 + y).powf(r - k as f64);
                    if dk.abs() > env + 1e-6 {
                        return config(format!(
                            "damping derivative of order {k} exceeds envelope at y = {y}"
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

/// b(s) = β exp(−|s|²/σ²).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForcingProfile {
    pub beta: f64,
    pub sigma2: f64,
}

impl Default for ForcingProfile {
    fn default() -> Self {
        Self {
            beta: 1.0,
            sigma2: 2.0,
        }
    }
}

impl ForcingProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return config(format!("forcing amplitude must be >= 0, got {}", self.beta));
        }
        if !(self.sigma2 > 0.0) || !self.sigma2.is_finite() {
            return config(format!("forcing width must be > 0, got {}", self.sigma2));
        }
        Ok(())
    }

    #[inline]
    pub fn b(&self, y: f64) -> f64 {
        self.beta * (-y / self.sigma2).exp()
    }

    /// Checks b(s)⟨s⟩^r is bounded on a radial sample grid for each r.
    pub fn check_decay(&self, rs: &[f64]) -> Result<()> {
        for &r in rs {
            let mut tail = 0.0f64;
            for i in 0..=2000 {
                let rad = 0.05 * i as f64;
                let v = self.b(rad * rad) * bracket(rad * rad).powf(r);
                if !v.is_finite() {
                    return config(format!("forcing weighted by <s>^{r} is not finite"));
                }
                if i > 1800 {
                    tail = tail.max(v);
                }
            }
            if tail > 1e-6 * (1.0 + self.beta) {
                return config(format!("forcing does not decay against <s>^{r}"));
            }
        }
        Ok(())
    }
}

/// Damping and forcing together, evaluated on y = |s|².
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Profiles {
    pub damping: DampingProfile,
    pub forcing: ForcingProfile,
}

impl Profiles {
    pub fn validate(&self) -> Result<()> {
        self.damping.validate()?;
        self.forcing.validate()
    }

    #[inline]
    pub fn gamma(&self, y: f64) -> f64 {
        self.damping.gamma0(y)
    }

    #[inline]
    pub fn b(&self, y: f64) -> f64 {
        self.forcing.b(y)
    }

    /// B = b²/γ
    #[inline]
    pub fn big_b(&self, y: f64) -> f64 {
        let b = self.forcing.b(y);
        b * b / self.damping.gamma0(y)
    }

    /// Radius beyond which B < tol·B(0) (upper bound, found by bisection).
    pub fn decay_radius(&self, tol: f64) -> f64 {
        let b0 = self.big_b(0.0).max(f64::MIN_POSITIVE);
        let mut hi = 1.0;
        while self.big_b(hi * hi) > tol * b0 && hi < 1e3 {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.big_b(mid * mid) > tol * b0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }
}

/// Horizon T ∈ (0, ∞].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    Finite(f64),
    Infinite,
}

impl Horizon {
    pub fn is_infinite(&self) -> bool {
        matches!(self, Horizon::Infinite)
    }

    /// Elapsed time τ + T since the start, or ∞.
    pub fn elapsed(&self, tau: f64) -> f64 {
        match self {
            Horizon::Finite(t) => tau + t,
            Horizon::Infinite => f64::INFINITY,
        }
    }
}

/// ν, ε, horizon and the rate exponent ℵ_d.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub nu: f64,
    pub eps: f64,
    pub horizon: Horizon,
    pub aleph: f64,
}

impl PhysicalParams {
    pub fn new(d: usize, nu: f64, eps: f64, horizon: Horizon) -> Result<Self> {
        let p = Self {
            nu,
            eps,
            horizon,
            aleph: default_aleph(d),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu <= 0.5) {
            return config(format!("nu must lie in (0, 1/2], got {}", self.nu));
        }
        if !(self.eps >= 0.0 && self.eps <= 1.0) {
            return config(format!("eps must lie in [0, 1], got {}", self.eps));
        }
        if let Horizon::Finite(t) = self.horizon {
            if !(t >= 0.0) || !t.is_finite() {
                return config(format!("horizon must be >= 0, got {t}"));
            }
        }
        if !(self.aleph >= 0.0 && self.aleph < 1.0) {
            return config(format!("aleph must lie in [0, 1), got {}", self.aleph));
        }
        Ok(())
    }

    /// ρ = √(ε/ν)
    pub fn rho(&self) -> f64 {
        (self.eps / self.nu).sqrt()
    }

    /// λ = νρ = √(νε)
    pub fn lambda(&self) -> f64 {
        self.nu * self.rho()
    }
}

/// ℵ_d default: 0 for d ≥ 3, 0.1 for d = 2.
pub fn default_aleph(d: usize) -> f64 {
    if d == 2 {
        0.1
    } else {
        0.0
    }
}

/// χ_d(ν): ln ν⁻¹ for d = 2 and 1 for d ≥ 3.
pub fn chi_d(d: usize, nu: f64) -> f64 {
    if d == 2 {
        (1.0 / nu).ln()
    } else {
        1.0
    }
}

/// Radial function sampled on a uniform grid in ρ = |s|, interpolated by a
/// cubic spline that is even in ρ; zero beyond the last node.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialDensity {
    dr: f64,
    values: Vec<f64>,
    second: Vec<f64>,
}

impl RadialDensity {
    pub fn from_values(dr: f64, values: Vec<f64>) -> Self {
        let second = spline_second_derivatives(dr, &values);
        Self { dr, values, second }
    }

    pub fn from_fn(dr: f64, n: usize, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..n).map(|i| f(dr * i as f64)).collect();
        Self::from_values(dr, values)
    }

    pub fn spacing(&self) -> f64 {
        self.dr
    }

    pub fn radii(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |i| self.dr * i as f64)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_radius(&self) -> f64 {
        self.dr * (self.values.len() - 1) as f64
    }

    /// Value at |s|² = y.
    #[inline]
    pub fn eval_y(&self, y: f64) -> f64 {
        self.eval(y.sqrt())
    }

    /// Value at radius ρ ≥ 0.
    #[inline]
    pub fn eval(&self, rho: f64) -> f64 {
        let x = rho / self.dr;
        let n = self.values.len();
        if x >= (n - 1) as f64 {
            return if x <= (n - 1) as f64 + 1e-12 {
                self.values[n - 1]
            } else {
                0.0
            };
        }
        let k = x as usize;
        let t = x - k as f64;
        let a = 1.0 - t;
        let h2 = self.dr * self.dr / 6.0;
        a * self.values[k]
            + t * self.values[k + 1]
            + ((a * a * a - a) * self.second[k] + (t * t * t - t) * self.second[k + 1]) * h2
    }

    pub fn map(&self, f: impl Fn(f64, f64) -> f64) -> Self {
        let vals = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| f(self.dr * i as f64, v))
            .collect();
        Self::from_values(self.dr, vals)
    }

    /// sup_k |f(ρ_k)| ⟨ρ_k⟩^r over the nodes.
    pub fn weighted_norm(&self, r: f64) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let rho = self.dr * i as f64;
                v.abs() * bracket(rho * rho).powf(r)
            })
            .fold(0.0, f64::max)
    }
}

/// Second derivatives of the cubic spline with f'(0) = 0 (even extension)
/// and a natural right end.
fn spline_second_derivatives(h: f64, y: &[f64]) -> Vec<f64> {
    let n = y.len();
    if n < 3 {
        return vec![0.0; n];
    }
    // Tridiagonal system; row 0 encodes the clamped condition f'(0) = 0:
    // (2 M0 + M1) h/6 = (y1 - y0)/h
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let mut lower = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    diag[0] = h / 3.0;
    upper[0] = h / 6.0;
    rhs[0] = (y[1] - y[0]) / h;
    for i in 1..n - 1 {
        lower[i] = h / 6.0;
        diag[i] = 2.0 * h / 3.0;
        upper[i] = h / 6.0;
        rhs[i] = (y[i + 1] - 2.0 * y[i] + y[i - 1]) / h;
    }
    diag[n - 1] = 1.0;
    rhs[n - 1] = 0.0;
    for i in 1..n {
        let m = lower[i] / diag[i - 1];
        diag[i] -= m * upper[i - 1];
        rhs[i] -= m * rhs[i - 1];
    }
    let mut out = vec![0.0; n];
    out[n - 1] = rhs[n - 1] / diag[n - 1];
    for i in (0..n - 1).rev() {
        out[i] = (rhs[i] - upper[i] * out[i + 1]) / diag[i];
    }
    out
}

pub type ContinuumFn = Arc<dyn Fn(&Vec3) -> f64 + Send + Sync>;

/// Energy spectra and kinetic states.
#[derive(Clone)]
pub enum SpectralDensity {
    /// Values aligned with `lattice.modes()`.
    Lattice {
        lattice: Arc<LatticeSpec>,
        values: Vec<f64>,
    },
    /// Radial profile.
    Radial(RadialDensity),
    /// Arbitrary evaluator with the probe set used for norms.
    Continuum {
        eval: ContinuumFn,
        probes: Vec<Vec3>,
    },
}

impl std::fmt::Debug for SpectralDensity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SpectralDensity::Lattice { values, .. } => {
                write!(f, "SpectralDensity::Lattice({} values)", values.len())
            }
            SpectralDensity::Radial(r) => write!(f, "SpectralDensity::Radial({:?})", r.values.len()),
            SpectralDensity::Continuum { probes, .. } => {
                write!(f, "SpectralDensity::Continuum({} probes)", probes.len())
            }
        }
    }
}

impl SpectralDensity {
    /// Value at a frequency; lattice form returns 0 off the retained set.
    pub fn eval(&self, s: &Vec3) -> f64 {
        match self {
            SpectralDensity::Lattice { lattice, values } => {
                let l = lattice.period();
                let mut n = [0i64; MAX_DIM];
                for k in 0..lattice.dim() {
                    let v = s[k] * l;
                    let r = v.round();
                    if (v - r).abs() > 1e-9 {
                        return 0.0;
                    }
                    n[k] = r as i64;
                }
                lattice.find(&n).map_or(0.0, |i| values[i])
            }
            SpectralDensity::Radial(r) => r.eval_y(norm2(s)),
            SpectralDensity::Continuum { eval, .. } => eval(s),
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        match self {
            SpectralDensity::Lattice { values, .. } => values.iter().all(|&v| v >= 0.0),
            SpectralDensity::Radial(r) => r.values.iter().all(|&v| v >= 0.0),
            SpectralDensity::Continuum { eval, probes } => probes.iter().all(|p| eval(p) >= 0.0),
        }
    }
}

/// |f|_r = sup |f(s)| ⟨s⟩^r over the lattice, the radial nodes or the probes.
pub fn weighted_norm(f: &SpectralDensity, r: f64) -> Result<f64> {
    match f {
        SpectralDensity::Lattice { lattice, values } => {
            if values.is_empty() {
                return Err(Error::Config("empty probe set".into()));
            }
            Ok(lattice
                .modes()
                .iter()
                .zip(values)
                .map(|(m, v)| v.abs() * bracket(norm2(&m.s)).powf(r))
                .fold(0.0, f64::max))
        }
        SpectralDensity::Radial(rd) => {
            if rd.values.is_empty() {
                return Err(Error::Config("empty probe set".into()));
            }
            Ok(rd.weighted_norm(r))
        }
        SpectralDensity::Continuum { eval, probes } => {
            if probes.is_empty() {
                return Err(Error::Config("empty probe set".into()));
            }
            Ok(probes
                .iter()
                .map(|p| eval(p).abs() * bracket(norm2(p)).powf(r))
                .fold(0.0, f64::max))
        }
    }
}

/// Log-spaced radial probes with ⟨s⟩ up to `bracket_max`, along the first axis.
pub fn radial_probes(n: usize, bracket_max: f64) -> Vec<Vec3> {
    let mut out = vec![[0.0; MAX_DIM]];
    let lmax = bracket_max.ln();
    for i in 1..n {
        let b = (lmax * i as f64 / (n - 1) as f64).exp();
        out.push([(b * b - 1.0).max(0.0).sqrt(), 0.0, 0.0]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn omega_examples() {
        let z = [0.0; 3];
        let r = dispersion_omega(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[1.0, 1.0, 0.0], &z);
        assert_eq!(r.omega, 0.0);
        assert!(r.strict_delta);

        let s = [0.3, -0.2, 0.0];
        let s2 = [0.7, 0.1, 0.0];
        let r = dispersion_omega(&s, &s2, &s2, &s);
        assert!(r.omega.abs() < 1e-15);
        assert!(r.kron_delta && !r.strict_delta);

        let r = dispersion_omega(&[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0], &[2.0, 0.0, 0.0], &z);
        assert_eq!(r.omega, -2.0);
        assert_eq!(r.omega_factored, -2.0);
    }

    #[test]
    fn strict_delta_exhaustive_small_lattice() {
        let lat = LatticeSpec::new(2, 2.0, 1.0).unwrap();
        let modes = lat.modes();
        for a in modes {
            for b in modes {
                for c in modes {
                    for m in modes {
                        let r = resonance_on_lattice(&a.index, &b.index, &c.index, &m.index);
                        if r.kron_delta {
                            assert_eq!(r.omega_l2, r.omega_l2_factored);
                            let shares = a.index == c.index
                                || a.index == m.index
                                || b.index == c.index
                                || b.index == m.index;
                            if shares {
                                assert!(!r.strict_delta);
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn mode_count_and_mod_sum() {
        let lat = LatticeSpec::new(2, 4.0, 1.0).unwrap();
        let count = (-4i64..=4)
            .flat_map(|i| (-4i64..=4).map(move |j| (i, j)))
            .filter(|(i, j)| i * i + j * j <= 16)
            .count();
        assert_eq!(lat.len(), count);
        let v = mod_sum(&lat, |_| 1.0).unwrap();
        assert!((v - count as f64 / 16.0).abs() < 1e-14);
        assert_eq!(mod_sum(&lat, |_| 0.0).unwrap(), 0.0);
    }

    #[test]
    fn mod_sum_gaussian_converges_quadratically() {
        let exact = std::f64::consts::PI;
        let mut errs = Vec::new();
        for &l in &[2.0, 4.0] {
            let lat = LatticeSpec::new(2, l, 6.0).unwrap();
            let v = mod_sum(&lat, |m| (-norm2(&m.s)).exp()).unwrap();
            errs.push((v - exact).abs());
        }
        // The Gaussian Riemann sum is spectrally accurate; error shrinks by
        // far more than 4 per doubling.
        assert!(errs[1] <= errs[0] / 4.0 + 1e-14);
    }

    #[test]
    fn weighted_norm_examples() {
        let lat = Arc::new(LatticeSpec::new(2, 3.0, 2.0).unwrap());
        let r = 2.5;
        let values = lat
            .modes()
            .iter()
            .map(|m| bracket(norm2(&m.s)).powf(-r))
            .collect();
        let f = SpectralDensity::Lattice {
            lattice: lat.clone(),
            values,
        };
        assert!((weighted_norm(&f, r).unwrap() - 1.0).abs() < 1e-14);
        let zero = SpectralDensity::Lattice {
            lattice: lat.clone(),
            values: vec![0.0; lat.len()],
        };
        assert_eq!(weighted_norm(&zero, r).unwrap(), 0.0);
    }

    #[test]
    fn weighted_norm_gaussian_radial_oracle() {
        let g = RadialDensity::from_fn(0.001, 5001, |rho| (-rho * rho).exp());
        let v = weighted_norm(&SpectralDensity::Radial(g), 3.0).unwrap();
        // independent oracle: maximize e^{-y}(1+y)^{3/2}; y* = 1/2
        let oracle = (-0.5f64).exp() * 1.5f64.powf(1.5);
        assert!((v - oracle).abs() < 1e-6);
        let argmax = (0.5f64).sqrt();
        assert!((argmax - 0.7071).abs() < 1e-3);
    }

    #[test]
    fn radial_spline_reproduces_smooth_profile() {
        let f = |rho: f64| (-rho * rho).exp() / (1.0 + rho * rho);
        let g = RadialDensity::from_fn(0.05, 161, f);
        for i in 0..300 {
            let rho = 0.0237 * i as f64;
            assert!((g.eval(rho) - f(rho)).abs() < 2e-6, "rho={rho}");
        }
    }

    #[test]
    fn damping_profiles_validate() {
        let p = Profiles::default();
        p.damping.check_envelope(2.0).unwrap();
        p.forcing.check_decay(&[2.0, 4.0, 8.0]).unwrap();
        assert_eq!(p.gamma(3.0), 4.0);
        let t = DampingProfile::Table {
            y: vec![0.0, 1.0],
            gamma: vec![1.0, 0.5],
        };
        assert!(t.validate().is_err());
    }
}
