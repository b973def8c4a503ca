//! Closed-form second moments of the chaos iterates: Σ_s = E|a⁽¹⁾_s|²,
//! the spectrum correction n⁽²⁾, the 𝒵-kernels and their sums, the
//! oscillating and cross-correlation sums and the n^{≤2} increment
//! prediction. Every quantity is available as a lattice sum and as the
//! corresponding integral over (s₁, s₂) ∈ ℝ^{2d}.

use crate::base_process::n0_spectrum;
use crate::continuum::{integrate_w_lines, LineKernel, WLineRule};
use crate::error::{config, Error, Result};
use crate::kinetic_operator::{k_on_radial, smoothing_factor, KineticConfig};
use crate::numerics::{phi1, phi1_real, tri_exp, Kahan, KahanC};
use crate::spectral_domain::{
    norm2, Horizon, LatticeSpec, PhysicalParams, Profiles, RadialDensity, ResonanceData, Vec3,
    MAX_DIM,
};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentKind {
    SigmaS,
    Z4,
    Zj,
    S1,
    S2,
    S3,
    CZ,
    Qs,
    CrossS,
    NLeq2Increment,
    N2,
    Sigma0,
}

/// Where a moment was evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainTag {
    Lattice { period: f64 },
    Continuum,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentValue {
    pub kind: MomentKind,
    pub value: f64,
    /// Imaginary part for complex-valued sums.
    pub imag: f64,
    pub s: Vec3,
    pub tau: Option<f64>,
    pub tau_prime: Option<f64>,
    pub nu: f64,
    pub domain: DomainTag,
}

/// Summation domain for (s₁, s₂).
#[derive(Clone, Copy, Debug)]
pub enum SumDomain<'a> {
    /// The retained modes of a lattice; s₃ must be retained as well.
    Lattice(&'a LatticeSpec),
    /// All of L⁻¹ℤ^d, pruned to |s₁|² + |s₂|² + |s₃|² ≤ prune².
    Periodic { d: usize, period: f64, prune: f64 },
    /// L = ∞.
    Continuum { d: usize, rule: WLineRule },
}

impl SumDomain<'_> {
    pub fn tag(&self) -> DomainTag {
        match self {
            SumDomain::Lattice(l) => DomainTag::Lattice { period: l.period() },
            SumDomain::Periodic { period, .. } => DomainTag::Lattice { period: *period },
            SumDomain::Continuum { .. } => DomainTag::Continuum,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SumDomain::Lattice(l) => l.dim(),
            SumDomain::Periodic { d, .. } | SumDomain::Continuum { d, .. } => *d,
        }
    }
}

/// Per-frequency data entering every term.
#[derive(Clone, Copy, Debug)]
struct Site {
    gamma: f64,
    big_b: f64,
}

fn site(profiles: &Profiles, y: f64) -> Site {
    Site {
        gamma: profiles.gamma(y),
        big_b: profiles.big_b(y),
    }
}

/// Visits every retained (s₁, s₂) with s₃ = s₁ + s₂ − s retained and δ′,
/// passing (|s₁|², |s₂|², |s₃|², ω). Rows over s₁ run in parallel and are
/// merged in mode order.
fn lattice_pair_fold<T, I, V, M>(lat: &LatticeSpec, s: &Vec3, init: I, visit: V, merge: M) -> T
where
    T: Send,
    I: Fn() -> T + Sync,
    V: Fn(&mut T, f64, f64, f64, f64) + Sync,
    M: Fn(&mut T, T),
{
    let modes = lat.modes();
    let l = lat.period();
    let d = lat.dim();
    let mut ns = [0i64; MAX_DIM];
    let mut on_lattice = true;
    for k in 0..d {
        let v = s[k] * l;
        ns[k] = v.round() as i64;
        if (v - v.round()).abs() > 1e-9 {
            on_lattice = false;
        }
    }
    let ys = norm2(s);
    let rc2 = lat.cutoff() * lat.cutoff();
    let rows: Vec<T> = modes
        .par_iter()
        .map(|m1| {
            let mut acc = init();
            if on_lattice && m1.index == ns {
                return acc;
            }
            for m2 in modes {
                if on_lattice && m2.index == ns {
                    continue;
                }
                let s3: Vec3 = std::array::from_fn(|k| m1.s[k] + m2.s[k] - s[k]);
                if on_lattice {
                    let n3: [i64; MAX_DIM] =
                        std::array::from_fn(|k| m1.index[k] + m2.index[k] - ns[k]);
                    if lat.find(&n3).is_none() {
                        continue;
                    }
                } else if norm2(&s3) > rc2 * (1.0 + 1e-12) {
                    continue;
                }
                let (y1, y2, y3) = (norm2(&m1.s), norm2(&m2.s), norm2(&s3));
                visit(&mut acc, y1, y2, y3, y1 + y2 - y3 - ys);
            }
            acc
        })
        .collect();
    let mut total = init();
    for r in rows {
        merge(&mut total, r);
    }
    total
}

fn lattice_pair_sum<F>(lat: &LatticeSpec, s: &Vec3, f: F) -> f64
where
    F: Fn(f64, f64, f64, f64) -> f64 + Sync,
{
    lattice_pair_fold(
        lat,
        s,
        Kahan::new,
        |acc, y1, y2, y3, w| acc.add(f(y1, y2, y3, w)),
        |t, r| t.add(r.value()),
    )
    .value()
}

/// Σ over (n₁, n₂) ∈ ℤ^d × ℤ^d with n₃ = n₁ + n₂ − n, δ′ and
/// |n₁|² + |n₂|² + |n₃|² ≤ m_max, of f(|n₁|², |n₂|², |n₃|²). For fixed n₁
/// the admissible n₂ fill the ball |n₂ + u/2|² ≤ (m_max − |n₁|² − |u|²/2)/2,
/// u = n₁ − n. Rows are reduced in a fixed order.
fn periodic_pair_sum<F>(d: usize, n: [i64; MAX_DIM], m_max: i64, f: F) -> f64
where
    F: Fn(i64, i64, i64) -> f64 + Sync,
{
    let rmax = (m_max as f64).sqrt().floor() as i64;
    let first = lattice_ball(d, rmax, m_max);
    let rows: Vec<f64> = first
        .par_iter()
        .map(|n1| {
            if *n1 == n {
                return 0.0;
            }
            let m1 = sq(n1);
            let u: [i64; MAX_DIM] = std::array::from_fn(|k| n1[k] - n[k]);
            let r2 = (m_max - m1) as f64 / 2.0 - sq(&u) as f64 / 4.0;
            if r2 < 0.0 {
                return 0.0;
            }
            let c: [f64; MAX_DIM] = std::array::from_fn(|k| -0.5 * u[k] as f64);
            let range = |k: usize, rr: f64| -> (i64, i64) {
                if k >= d || rr < 0.0 {
                    return (0, if k >= d { 0 } else { -1 });
                }
                let r = rr.sqrt() + 1e-9;
                ((c[k] - r).ceil() as i64, (c[k] + r).floor() as i64)
            };
            let mut acc = Kahan::new();
            let (a0, a1) = range(0, r2);
            for a in a0..=a1 {
                let ra = r2 - (a as f64 - c[0]).powi(2);
                let (b0, b1) = range(1, ra);
                for b in b0..=b1 {
                    let rb = ra - (b as f64 - c[1]).powi(2);
                    let (e0, e1) = range(2, rb);
                    let mut row = 0.0;
                    for e in e0..=e1 {
                        let n2 = [a, b, e];
                        if n2 == n {
                            continue;
                        }
                        let m2 = a * a + b * b + e * e;
                        let n3 = [u[0] + a, u[1] + b, u[2] + e];
                        let m3 = sq(&n3);
                        if m1 + m2 + m3 > m_max {
                            continue;
                        }
                        row += f(m1, m2, m3);
                    }
                    acc.add(row);
                }
            }
            acc.value()
        })
        .collect();
    let mut total = Kahan::new();
    for r in rows {
        total.add(r);
    }
    total.value()
}

#[inline]
fn sq(n: &[i64; MAX_DIM]) -> i64 {
    n[0] * n[0] + n[1] * n[1] + n[2] * n[2]
}

fn lattice_ball(d: usize, rmax: i64, m_max: i64) -> Vec<[i64; MAX_DIM]> {
    let mut v = Vec::new();
    let span = |k: usize| if k < d { rmax } else { 0 };
    for a in -span(0)..=span(0) {
        for b in -span(1)..=span(1) {
            for c in -span(2)..=span(2) {
                if a * a + b * b + c * c <= m_max {
                    v.push([a, b, c]);
                }
            }
        }
    }
    v
}

fn integer_point(s: &Vec3, d: usize, period: f64) -> Result<[i64; MAX_DIM]> {
    let mut n = [0i64; MAX_DIM];
    for k in 0..d {
        let v = s[k] * period;
        if (v - v.round()).abs() > 1e-9 {
            return config("periodic sums need s on the lattice");
        }
        n[k] = v.round() as i64;
    }
    Ok(n)
}

/// The lattice average ⨍ = L^{−2d} Σ (1 for the continuum).
fn average_factor(dom: &SumDomain) -> f64 {
    match dom {
        SumDomain::Lattice(l) => l.cell_volume().powi(2),
        SumDomain::Periodic { d, period, .. } => period.powi(-2 * *d as i32),
        SumDomain::Continuum { .. } => 1.0,
    }
}

/// Real-valued pair kernel evaluated on any domain. For the continuum
/// the closure is wrapped as a non-oscillatory line kernel.
fn real_sum<F>(dom: &SumDomain, s: &Vec3, profiles: &Profiles, nu: f64, f: F) -> Result<f64>
where
    F: Fn(Site, Site, Site, f64) -> f64 + Sync,
{
    let fy = |y1: f64, y2: f64, y3: f64, w: f64| {
        f(site(profiles, y1), site(profiles, y2), site(profiles, y3), w)
    };
    let v = match dom {
        SumDomain::Lattice(l) => lattice_pair_sum(l, s, fy),
        SumDomain::Periodic { d, period, prune } => {
            let n = integer_point(s, *d, *period)?;
            let l2 = period * period;
            let m_max = (prune * prune * l2).floor() as i64;
            let ms = sq(&n);
            // per-norm tables
            let tab: Vec<Site> = (0..=m_max.max(ms))
                .map(|m| site(profiles, m as f64 / l2))
                .collect();
            let f = &f;
            periodic_pair_sum(*d, n, m_max, |m1, m2, m3| {
                let w = (m1 + m2 - m3 - ms) as f64 / l2;
                f(tab[m1 as usize], tab[m2 as usize], tab[m3 as usize], w)
            })
        }
        SumDomain::Continuum { d, rule } => {
            let k = RealKernel { f: &fy };
            integrate_w_lines(*d, norm2(s).sqrt(), nu, rule, &k)?[0].re
        }
    };
    Ok(average_factor(dom) * v)
}

struct RealKernel<'a, F> {
    f: &'a F,
}

impl<F: Fn(f64, f64, f64, f64) -> f64 + Sync> LineKernel for RealKernel<'_, F> {
    fn n_out(&self) -> usize {
        1
    }
    fn kappa(&self, _: usize) -> f64 {
        0.0
    }
    fn eval(&self, y1: f64, y2: f64, y3: f64, w: f64, _: &[bool], out: &mut [(C64, C64)]) {
        out[0] = (C64::new((self.f)(y1, y2, y3, w), 0.0), ZERO);
    }
}

/// ν²Γ/(ω² + ν²Γ²).
#[inline]
fn lorentz(w: f64, nu: f64, g: f64) -> f64 {
    let ng = nu * g;
    nu * ng / (w * w + ng * ng)
}

fn moment(kind: MomentKind, value: C64, s: &Vec3, tau: Option<f64>, nu: f64, dom: &SumDomain) -> MomentValue {
    MomentValue {
        kind,
        value: value.re,
        imag: value.im,
        s: *s,
        tau,
        tau_prime: None,
        nu,
        domain: dom.tag(),
    }
}

/// Σ_s = E|a⁽¹⁾_s|² at T = ∞:
/// (2ν²/γ_s) ⨍ δ′ B₁B₂B₃ Γ/(ω² + ν²Γ²), Γ = γ₁ + γ₂ + γ₃ + γ_s.
pub fn sigma_closed_form(s: &Vec3, dom: &SumDomain, profiles: &Profiles, nu: f64) -> Result<MomentValue> {
    let ss = site(profiles, norm2(s));
    let v = real_sum(dom, s, profiles, nu, |a, b, c, w| {
        let g = a.gamma + b.gamma + c.gamma + ss.gamma;
        a.big_b * b.big_b * c.big_b * lorentz(w, nu, g)
    })?;
    Ok(moment(MomentKind::SigmaS, C64::new(2.0 / ss.gamma * v, 0.0), s, None, nu, dom))
}

/// Stationary n⁽²⁾_s (T = ∞):
/// (2ν²/γ_s) ⨍ δ′ Γ/(ω² + ν²Γ²) [B₁B₂B₃ + B_s(B₁B₂ − B₁B₃ − B₂B₃)].
pub fn n2_stationary(s: &Vec3, dom: &SumDomain, profiles: &Profiles, nu: f64) -> Result<MomentValue> {
    let ss = site(profiles, norm2(s));
    let v = real_sum(dom, s, profiles, nu, |a, b, c, w| {
        let g = a.gamma + b.gamma + c.gamma + ss.gamma;
        let br = a.big_b * b.big_b * c.big_b
            + ss.big_b * (a.big_b * b.big_b - a.big_b * c.big_b - b.big_b * c.big_b);
        br * lorentz(w, nu, g)
    })?;
    Ok(moment(MomentKind::N2, C64::new(2.0 / ss.gamma * v, 0.0), s, None, nu, dom))
}

/// The kernels 𝒵⁴ and 𝒵^j, j = 1, 2, 3.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ZKernels {
    pub z4: f64,
    pub zj: [f64; 3],
}

pub fn z_kernels(res: &ResonanceData, gamma_s: f64, gamma_j: [f64; 3], tau: f64, nu: f64) -> Result<ZKernels> {
    z_kernels_omega(res.omega, gamma_s, gamma_j, tau, nu)
}

pub fn z_kernels_omega(omega: f64, gamma_s: f64, gamma_j: [f64; 3], tau: f64, nu: f64) -> Result<ZKernels> {
    if !(0.0..=1.0).contains(&tau) {
        return config(format!("τ = {tau} outside [0, 1]"));
    }
    let th = omega / nu;
    let z4 = z4_value(th, gamma_s, tau);
    let pref = 2.0 * (-(-gamma_s * tau).exp_m1()) / gamma_s;
    let zj = gamma_j.map(|g| pref * g / (g * g + th * th));
    Ok(ZKernels { z4, zj })
}

/// |e^{iθτ} − e^{−γτ}|²/(γ² + θ²), evaluated without cancellation at
/// small θτ and γτ.
#[inline]
fn z4_value(th: f64, g: f64, tau: f64) -> f64 {
    // |e^{iθτ} − e^{−γτ}|² = (1 − e^{−γτ})² + 4e^{−γτ} sin²(θτ/2)
    let a = -(-g * tau).exp_m1();
    let sn = (0.5 * th * tau).sin();
    (a * a + 4.0 * (-g * tau).exp() * sn * sn) / (g * g + th * th)
}

/// 𝒵_s and its parts: returns (𝒵_s, [S¹, S², S³]) with
/// 𝒵_s = 2S¹ + 2S² − 4S³.
pub fn cz_sum(
    s: &Vec3,
    tau: f64,
    dom: &SumDomain,
    profiles: &Profiles,
    params: &PhysicalParams,
) -> Result<(MomentValue, [f64; 3])> {
    if !(0.0..=1.0).contains(&tau) {
        return config(format!("τ = {tau} outside [0, 1]"));
    }
    let nu = params.nu;
    let hz = params.horizon;
    let gs = profiles.gamma(norm2(s));
    let ns = n0_spectrum(norm2(s), 0.0, profiles, hz);
    let pref = 2.0 * (-(-gs * tau).exp_m1()) / gs;
    let parts: [f64; 3] = match dom {
        SumDomain::Continuum { d, rule } => {
            let k = CzKernel { profiles, hz, gs, ns, pref, tau, nu };
            let v = integrate_w_lines(*d, norm2(s).sqrt(), nu, rule, &k)?;
            [v[0].re, v[1].re, v[2].re]
        }
        _ => {
            let mut out = [0.0; 3];
            for (j, o) in out.iter_mut().enumerate() {
                *o = real_sum(dom, s, profiles, nu, |a, b, c, w| {
                    let th = w / nu;
                    let (n1, n2, n3) = (n0_site(a, hz), n0_site(b, hz), n0_site(c, hz));
                    match j {
                        0 => z4_value(th, gs, tau) * n1 * n2 * n3,
                        1 => pref * c.gamma / (c.gamma * c.gamma + th * th) * n1 * n2 * ns,
                        _ => pref * a.gamma / (a.gamma * a.gamma + th * th) * n2 * n3 * ns,
                    }
                })?;
            }
            out
        }
    };
    let total = 2.0 * parts[0] + 2.0 * parts[1] - 4.0 * parts[2];
    Ok((moment(MomentKind::CZ, C64::new(total, 0.0), s, Some(tau), nu, dom), parts))
}

/// n⁽⁰⁾ at τ′ = 0 from a site: B(1 − e^{−2γT}).
#[inline]
fn n0_site(a: Site, hz: Horizon) -> f64 {
    match hz {
        Horizon::Infinite => a.big_b,
        Horizon::Finite(t) => a.big_b * (-(-2.0 * a.gamma * t).exp_m1()),
    }
}

struct CzKernel<'a> {
    profiles: &'a Profiles,
    hz: Horizon,
    gs: f64,
    ns: f64,
    pref: f64,
    tau: f64,
    nu: f64,
}

impl LineKernel for CzKernel<'_> {
    fn n_out(&self) -> usize {
        3
    }
    fn kappa(&self, k: usize) -> f64 {
        if k == 0 {
            self.tau / self.nu
        } else {
            0.0
        }
    }
    fn eval(&self, y1: f64, y2: f64, y3: f64, w: f64, split: &[bool], out: &mut [(C64, C64)]) {
        let (a, b, c) = (site(self.profiles, y1), site(self.profiles, y2), site(self.profiles, y3));
        let (n1, n2, n3) = (n0_site(a, self.hz), n0_site(b, self.hz), n0_site(c, self.hz));
        let th = w / self.nu;
        let g = self.gs;
        let den = g * g + th * th;
        let f1 = n1 * n2 * n3;
        out[0] = if split[0] {
            // (1 + e^{−2γτ})/den − 2e^{−γτ}Re e^{iθτ}/den
            let e = (-g * self.tau).exp();
            (C64::new(f1 * (1.0 + e * e) / den, 0.0), C64::new(-2.0 * e * f1 / den, 0.0))
        } else {
            (C64::new(f1 * z4_value(th, g, self.tau), 0.0), ZERO)
        };
        out[1] = (C64::new(self.pref * c.gamma / (c.gamma * c.gamma + th * th) * n1 * n2 * self.ns, 0.0), ZERO);
        out[2] = (C64::new(self.pref * a.gamma / (a.gamma * a.gamma + th * th) * n2 * n3 * self.ns, 0.0), ZERO);
    }
}

/// Coefficients of the finite-horizon n⁽²⁾ kernel: every term is
/// coef · e^{−2γ_s t}∫₀ᵗdl∫₀ˡdl′ e^{pl + ql′} with the common
/// p = γ_s − G + iθ and q = q_re − iθ, G = γ₁ + γ₂ + γ₃, t = τ + T.
/// The first 8 entries are q_re = G − 2g_S + γ_s over S ⊆ {1, 2, 3}; the
/// other 7 are q_re = G − 2g_S − γ_s over |S| ≤ 2.
fn n2_terms(g: [f64; 3], b: [f64; 3], gs: f64, bs: f64, a1_only: bool) -> ([f64; 15], [f64; 15]) {
    let gg = g[0] + g[1] + g[2];
    let b123 = b[0] * b[1] * b[2];
    let (b12s, b23s, b13s) = if a1_only {
        (0.0, 0.0, 0.0)
    } else {
        (b[0] * b[1] * bs, b[1] * b[2] * bs, b[0] * b[2] * bs)
    };
    let mut qr = [0.0; 15];
    let mut cf = [0.0; 15];
    let mut k = 7;
    for mask in 0..8usize {
        let gsub: f64 = (0..3).filter(|j| mask >> j & 1 == 1).map(|j| g[j]).sum();
        let sign = if mask.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        let in12 = mask & 4 == 0;
        let in23 = mask & 1 == 0;
        let in13 = mask & 2 == 0;
        // K_{a1} + the +γ_s halves of the three a⁽²⁾ pairings
        let mut c = sign * b123;
        if in12 {
            c += sign * b12s;
        }
        if in23 {
            c -= sign * b23s;
        }
        if in13 {
            c -= sign * b13s;
        }
        qr[mask] = gg - 2.0 * gsub + gs;
        cf[mask] = c;
        if mask != 7 {
            k += 1;
            let mut c = 0.0;
            if in12 {
                c -= sign * b12s;
            }
            if in23 {
                c += sign * b23s;
            }
            if in13 {
                c += sign * b13s;
            }
            qr[k] = gg - 2.0 * gsub - gs;
            cf[k] = c;
        }
    }
    (qr, cf)
}

/// The t-independent part of one node of the n⁽²⁾ kernel: coef_k/q_k,
/// σ_k = p + q_k (real) and |q_k|.
struct N2Node {
    p: C64,
    inv_p: C64,
    qr: [f64; 15],
    cf: [f64; 15],
    iq: [C64; 15],
    sig: [f64; 15],
    qn: [f64; 15],
    th: f64,
}

impl N2Node {
    fn new(qr: [f64; 15], cf: [f64; 15], p: C64, th: f64) -> Self {
        let mut iq = [ZERO; 15];
        let mut sig = [0.0; 15];
        let mut qn = [0.0; 15];
        for k in 0..15 {
            let q = C64::new(qr[k], -th);
            qn[k] = q.norm();
            sig[k] = p.re + qr[k];
            if cf[k] != 0.0 && qn[k] > 0.0 {
                iq[k] = cf[k] / q;
            }
        }
        Self { p, inv_p: 1.0 / p, qr, cf, iq, sig, qn, th }
    }

    /// Σ_k coef_k e^{c0}∫₀ᵗ∫₀ˡ e^{pl + q_k l′} with c0 = −2γ_s t and
    /// ec0 = e^{c0}, as one value or split into (smooth, amplitude of
    /// e^{iθt}). Each term is [e^{c0}tφ₁(σ_k t) − e^{c0}tφ₁(pt)]/q_k; terms
    /// with |q_k|t < 1e-3 go through the divided-difference form.
    fn value(&self, t: f64, c0: f64, ec0: f64, split: bool) -> (C64, C64) {
        if t <= 0.0 {
            return (ZERO, ZERO);
        }
        let mut sum = ZERO;
        let mut a = ZERO;
        let mut slow = ZERO;
        for k in 0..15 {
            if self.cf[k] == 0.0 {
                continue;
            }
            if !split && self.qn[k] * t < 1e-3 {
                slow += self.cf[k] * tri_exp(c0, self.p, C64::new(self.qr[k], -self.th), t);
                continue;
            }
            let x = self.sig[k] * t;
            let e = if x.abs() < 1e-3 {
                ec0 * t * phi1_real(x)
            } else {
                ((c0 + x).exp() - ec0) / self.sig[k]
            };
            sum += self.iq[k] * e;
            a += self.iq[k];
        }
        if split {
            let amp = -(c0 + self.p.re * t).exp() * a * self.inv_p;
            return (sum + ec0 * a * self.inv_p, amp);
        }
        let z = self.p * t;
        let ep = if z.norm() < 0.5 {
            ec0 * t * phi1(z)
        } else {
            ((z + c0).exp() - ec0) * self.inv_p
        };
        (sum - a * ep + slow, ZERO)
    }
}

/// Finite-horizon n⁽²⁾_s = E|a⁽¹⁾_s|² + 2Re E a⁽²⁾_s ā⁽⁰⁾_s at the times
/// `taus` (with the horizon T > 0 from `params`). With `a1_only` the
/// result is E|a⁽¹⁾_s|² alone.
pub fn n2_finite(
    s: &Vec3,
    taus: &[f64],
    dom: &SumDomain,
    profiles: &Profiles,
    params: &PhysicalParams,
    a1_only: bool,
) -> Result<Vec<MomentValue>> {
    let t_h = match params.horizon {
        Horizon::Finite(t) => t,
        Horizon::Infinite => return config("finite-horizon kernel needs a finite T"),
    };
    if taus.iter().any(|&tau| tau < -t_h - 1e-12) {
        return config("τ precedes −T");
    }
    let nu = params.nu;
    let ys = norm2(s);
    let ss = site(profiles, ys);
    let ts: Vec<f64> = taus.iter().map(|&tau| (tau + t_h).max(0.0)).collect();
    let ec0 = ts.iter().map(|t| (-2.0 * ss.gamma * t).exp()).collect();
    let kern = N2Kernel { profiles, gs: ss.gamma, bs: ss.big_b, ts: &ts, ec0, nu, a1_only };
    let raw: Vec<C64> = match dom {
        SumDomain::Continuum { d, rule } => integrate_w_lines(*d, ys.sqrt(), nu, rule, &kern)?,
        SumDomain::Lattice(l) => {
            let n = ts.len();
            let nosplit = vec![false; n];
            let acc = lattice_pair_fold(
                l,
                s,
                || (vec![KahanC::new(); n], vec![(ZERO, ZERO); n]),
                |(acc, buf), y1, y2, y3, w| {
                    kern.eval(y1, y2, y3, w, &nosplit, buf);
                    for (a, o) in acc.iter_mut().zip(buf.iter()) {
                        a.add(o.0);
                    }
                },
                |(t, _), (r, _)| {
                    for (a, b) in t.iter_mut().zip(r) {
                        a.add(b.value());
                    }
                },
            );
            acc.0.iter().map(|k| k.value()).collect()
        }
        SumDomain::Periodic { .. } => return config("finite-horizon n2 is not available on pruned periodic sums"),
    };
    let f = average_factor(dom);
    Ok(raw
        .iter()
        .zip(taus)
        .map(|(z, &tau)| {
            // two pairings, and ∫∫ over the square = 2Re ∫∫ over l′ < l
            let v = 4.0 * f * z.re;
            moment(if a1_only { MomentKind::SigmaS } else { MomentKind::N2 }, C64::new(v, 0.0), s, Some(tau), nu, dom)
        })
        .collect())
}

struct N2Kernel<'a> {
    profiles: &'a Profiles,
    gs: f64,
    bs: f64,
    ts: &'a [f64],
    /// e^{−2γ_s t} per output time.
    ec0: Vec<f64>,
    nu: f64,
    a1_only: bool,
}

impl LineKernel for N2Kernel<'_> {
    fn n_out(&self) -> usize {
        self.ts.len()
    }
    fn kappa(&self, k: usize) -> f64 {
        self.ts[k] / self.nu
    }
    fn eval(&self, y1: f64, y2: f64, y3: f64, w: f64, split: &[bool], out: &mut [(C64, C64)]) {
        let a = [y1, y2, y3].map(|y| site(self.profiles, y));
        let g = a.map(|x| x.gamma);
        let b = a.map(|x| x.big_b);
        let (qr, cf) = n2_terms(g, b, self.gs, self.bs, self.a1_only);
        let th = w / self.nu;
        let node = N2Node::new(qr, cf, C64::new(self.gs - g[0] - g[1] - g[2], th), th);
        for (k, &t) in self.ts.iter().enumerate() {
            let c0 = -2.0 * self.gs * t;
            out[k] = node.value(t, c0, self.ec0[k], split[k]);
        }
    }
}

/// Decaying envelope F(s₁, s₂, s₃, s) = amplitude · B₁^{m₁}B₂^{m₂}B₃^{m₃}B_s^{m_s}
/// · e^{−gauss(|s₁|²+|s₂|²+|s₃|²)}.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSpec {
    pub amplitude: f64,
    pub powers: [u32; 4],
    #[serde(default)]
    pub gauss: f64,
}

impl EnvelopeSpec {
    /// B₁B₂B₃.
    pub fn triple_b() -> Self {
        Self { amplitude: 1.0, powers: [1, 1, 1, 0], gauss: 0.0 }
    }

    pub fn validate(&self, profiles: &Profiles) -> Result<()> {
        let decaying = self.powers[..3].iter().filter(|&&m| m > 0).count();
        if decaying < 2 && !(self.gauss > 0.0) {
            return config("envelope must decay in at least two of s₁, s₂, s₃");
        }
        if !(self.gauss >= 0.0) || !self.amplitude.is_finite() {
            return config("envelope parameters must be finite with gauss ≥ 0");
        }
        // decay check on a sample ray: |F| ⟨s⟩^6 stays bounded
        let mut prev = f64::INFINITY;
        for k in 4..12 {
            let y = (k * k) as f64;
            let v = self.eval(y, y, y, 0.0, profiles).abs() * (1.0 + y).powi(3);
            if v > prev * (1.0 + 1e-9) && v > 1e-300 {
                return config("envelope does not decay on the sample grid");
            }
            prev = v;
        }
        Ok(())
    }

    #[inline]
    pub fn eval(&self, y1: f64, y2: f64, y3: f64, ys: f64, profiles: &Profiles) -> f64 {
        let mut v = self.amplitude;
        for (m, y) in self.powers.iter().zip([y1, y2, y3, ys]) {
            if *m > 0 {
                v *= profiles.big_b(y).powi(*m as i32);
            }
        }
        if self.gauss > 0.0 {
            v *= (-self.gauss * (y1 + y2 + y3)).exp();
        }
        v
    }
}

/// Σ⁰_s = ⨍ δ′ F |e^{iν⁻¹ωτ} − e^{−γ_sτ}|²/(γ_s² + (ν⁻¹ω)²).
pub fn oscillating_sum_sigma0(
    s: &Vec3,
    tau: f64,
    env: &EnvelopeSpec,
    dom: &SumDomain,
    profiles: &Profiles,
    nu: f64,
) -> Result<MomentValue> {
    if !(0.0..=1.0).contains(&tau) {
        return config(format!("τ = {tau} outside [0, 1]"));
    }
    env.validate(profiles)?;
    let ys = norm2(s);
    let gs = profiles.gamma(ys);
    let v = match dom {
        SumDomain::Continuum { d, rule } => {
            let k = OscKernel { env, profiles, ys, gs, tau, nu, cross: None };
            integrate_w_lines(*d, ys.sqrt(), nu, rule, &k)?[0]
        }
        _ => C64::new(
            lattice_env_sum(dom, s, |y1, y2, y3, w| {
                env.eval(y1, y2, y3, ys, profiles) * z4_value(w / nu, gs, tau)
            })?,
            0.0,
        ),
    };
    Ok(moment(MomentKind::Sigma0, v, s, Some(tau), nu, dom))
}

/// Lattice sums of an envelope-weighted kernel in (|s₁|², |s₂|², |s₃|², ω),
/// including the ⨍ normalisation.
fn lattice_env_sum<F>(dom: &SumDomain, s: &Vec3, f: F) -> Result<f64>
where
    F: Fn(f64, f64, f64, f64) -> f64 + Sync,
{
    let v = match dom {
        SumDomain::Lattice(l) => lattice_pair_sum(l, s, &f),
        SumDomain::Periodic { d, period, prune } => {
            let n = integer_point(s, *d, *period)?;
            let l2 = period * period;
            let m_max = (prune * prune * l2).floor() as i64;
            let ms = sq(&n);
            periodic_pair_sum(*d, n, m_max, |m1, m2, m3| {
                f(m1 as f64 / l2, m2 as f64 / l2, m3 as f64 / l2, (m1 + m2 - m3 - ms) as f64 / l2)
            })
        }
        SumDomain::Continuum { .. } => return Err(Error::Config("lattice sum requested on the continuum".into())),
    };
    Ok(average_factor(dom) * v)
}

/// S_s = ⨍ δ′ F ∫₀^τ dl ∫_{−∞}^0 dl′ e^{γl′} e^{iν⁻¹(l−l′)ω}
///     = ⨍ δ′ F · τφ₁(iθτ)/(γ − iθ), θ = ω/ν.
pub fn cross_correlation_sum(
    s: &Vec3,
    tau: f64,
    gamma: f64,
    env: &EnvelopeSpec,
    dom: &SumDomain,
    profiles: &Profiles,
    nu: f64,
) -> Result<MomentValue> {
    if !(0.0..=1.0).contains(&tau) {
        return config(format!("τ = {tau} outside [0, 1]"));
    }
    if !(gamma > 0.0) {
        return config("cross-sum rate γ must be positive");
    }
    env.validate(profiles)?;
    let ys = norm2(s);
    let v = match dom {
        SumDomain::Continuum { d, rule } => {
            let k = OscKernel { env, profiles, ys, gs: gamma, tau, nu, cross: Some(gamma) };
            integrate_w_lines(*d, ys.sqrt(), nu, rule, &k)?[0]
        }
        _ => {
            let re = lattice_env_sum(dom, s, |y1, y2, y3, w| {
                env.eval(y1, y2, y3, ys, profiles) * cross_kernel(w / nu, gamma, tau).re
            })?;
            let im = lattice_env_sum(dom, s, |y1, y2, y3, w| {
                env.eval(y1, y2, y3, ys, profiles) * cross_kernel(w / nu, gamma, tau).im
            })?;
            C64::new(re, im)
        }
    };
    Ok(moment(MomentKind::CrossS, v, s, Some(tau), nu, dom))
}

#[inline]
fn cross_kernel(th: f64, gamma: f64, tau: f64) -> C64 {
    tau * phi1(C64::new(0.0, th * tau)) / C64::new(gamma, -th)
}

struct OscKernel<'a> {
    env: &'a EnvelopeSpec,
    profiles: &'a Profiles,
    ys: f64,
    gs: f64,
    tau: f64,
    nu: f64,
    cross: Option<f64>,
}

impl LineKernel for OscKernel<'_> {
    fn n_out(&self) -> usize {
        1
    }
    fn kappa(&self, _: usize) -> f64 {
        self.tau / self.nu
    }
    fn eval(&self, y1: f64, y2: f64, y3: f64, w: f64, split: &[bool], out: &mut [(C64, C64)]) {
        let f = self.env.eval(y1, y2, y3, self.ys, self.profiles);
        let th = w / self.nu;
        out[0] = match (self.cross, split[0]) {
            (None, false) => (C64::new(f * z4_value(th, self.gs, self.tau), 0.0), ZERO),
            (None, true) => {
                let e = (-self.gs * self.tau).exp();
                let den = self.gs * self.gs + th * th;
                (C64::new(f * (1.0 + e * e) / den, 0.0), C64::new(-2.0 * e * f / den, 0.0))
            }
            (Some(g), false) => (f * cross_kernel(th, g, self.tau), ZERO),
            (Some(g), true) => {
                // (e^{iθτ} − 1)/(iθ(γ − iθ))
                let d = C64::new(0.0, th) * C64::new(g, -th);
                (-f / d, f / d)
            }
        };
    }
}

/// n^{≤2} = n⁽⁰⁾ + (ε/ν) n⁽²⁾.
pub fn n_leq2(n0: f64, n2: f64, params: &PhysicalParams) -> f64 {
    n0 + params.eps / params.nu * n2
}

/// Prediction of n^{≤2}(τ′ + τ) from n^{≤2}(τ′) and the structural size of
/// the remainder.
#[derive(Clone, Debug)]
pub struct IncrementPrediction {
    pub prediction: RadialDensity,
    /// ε(ν^{1−ℵ} + ν⁻³L⁻² + τ² + ετ), times `budget_constant`.
    pub budget: f64,
}

/// e^{−τℒ}n + 2∫₀^τ e^{−tℒ}b² dt + εK^τ(n) on the radial nodes of `n_start`.
/// `period` = None stands for L = ∞.
pub fn n_leq2_increment(
    n_start: &RadialDensity,
    tau: f64,
    profiles: &Profiles,
    params: &PhysicalParams,
    period: Option<f64>,
    kcfg: &KineticConfig,
    budget_constant: f64,
) -> Result<IncrementPrediction> {
    if !(tau > 0.0 && tau <= 1.0) {
        return config(format!("increment step τ = {tau} outside (0, 1]"));
    }
    if n_start.values().iter().any(|&v| v < 0.0) {
        return config("starting spectrum must be nonnegative");
    }
    let k = if params.eps > 0.0 {
        Some(k_on_radial(n_start, kcfg)?)
    } else {
        None
    };
    let vals: Vec<f64> = n_start
        .radii()
        .enumerate()
        .map(|(i, rho)| {
            let y = rho * rho;
            let g = profiles.gamma(y);
            let lin = (-2.0 * g * tau).exp() * n_start.values()[i]
                + profiles.big_b(y) * (-(-2.0 * g * tau).exp_m1());
            let kin = k.as_ref().map_or(0.0, |k| params.eps * smoothing_factor(g, tau) * k.values()[i]);
            lin + kin
        })
        .collect();
    Ok(IncrementPrediction {
        prediction: RadialDensity::from_values(n_start.spacing(), vals),
        budget: budget_constant * increment_budget(params, period, tau),
    })
}

/// ε(ν^{1−ℵ} + ν⁻³L⁻² + τ² + ετ).
pub fn increment_budget(params: &PhysicalParams, period: Option<f64>, tau: f64) -> f64 {
    let nu = params.nu;
    let lat = period.map_or(0.0, |l| nu.powi(-3) / (l * l));
    params.eps * (nu.powf(1.0 - params.aleph) + lat + tau * tau + params.eps * tau)
}

/// Number of nonvanishing Wick pairings in E a⁽¹⁾_s a⁽¹⁾_{s′} (`conj` =
/// false) or E a⁽¹⁾_s ā⁽¹⁾_{s′} (`conj` = true), summed over all δ′
/// index choices on the lattice. Each factor is a⁽¹⁾ ∝ Σ a₁a₂ā₃.
pub fn a1_pairing_count(lat: &LatticeSpec, s: usize, s_prime: usize, conj: bool) -> usize {
    let triples = |t: usize| -> Vec<[usize; 3]> {
        let n = lat.modes()[t].index;
        let mut v = Vec::new();
        for (i1, m1) in lat.modes().iter().enumerate() {
            if i1 == t {
                continue;
            }
            for (i2, m2) in lat.modes().iter().enumerate() {
                if i2 == t {
                    continue;
                }
                let n3: [i64; MAX_DIM] = std::array::from_fn(|k| m1.index[k] + m2.index[k] - n[k]);
                if let Some(i3) = lat.find(&n3) {
                    v.push([i1, i2, i3]);
                }
            }
        }
        v
    };
    let ta = triples(s);
    let tb = triples(s_prime);
    let mut count = 0;
    for a in &ta {
        for b in &tb {
            // fields as (mode, conjugated)
            let mut fields = vec![(a[0], false), (a[1], false), (a[2], true)];
            if conj {
                fields.extend([(b[0], true), (b[1], true), (b[2], false)]);
            } else {
                fields.extend([(b[0], false), (b[1], false), (b[2], true)]);
            }
            count += perfect_pairings(&fields);
        }
    }
    count
}

/// Matchings pairing each unconjugated field with a conjugated field of
/// the same mode.
fn perfect_pairings(fields: &[(usize, bool)]) -> usize {
    let plain: Vec<usize> = fields.iter().filter(|f| !f.1).map(|f| f.0).collect();
    let conj: Vec<usize> = fields.iter().filter(|f| f.1).map(|f| f.0).collect();
    if plain.len() != conj.len() {
        return 0;
    }
    fn rec(plain: &[usize], conj: &[usize], used: &mut Vec<bool>) -> usize {
        let Some((&first, rest)) = plain.split_first() else {
            return 1;
        };
        let mut n = 0;
        for j in 0..conj.len() {
            if !used[j] && conj[j] == first {
                used[j] = true;
                n += rec(rest, conj, used);
                used[j] = false;
            }
        }
        n
    }
    rec(&plain, &conj, &mut vec![false; conj.len()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base_process::NoiseStream;
    use crate::chaos_expansion::{mc_spectrum, simulate_ensemble, ChaosIntegrator, DuhamelConfig};
    use crate::numerics::GaussLegendre;
    use crate::resonance_quadric::theorem_a_integral;
    use std::sync::Arc;

    fn lat() -> LatticeSpec {
        LatticeSpec::new(2, 2.0, 1.6).unwrap()
    }

    // ∫∫_{(−T,0]²} e^{γ(l+l′)} e^{−G|l−l′|} cos(θ(l−l′)) dl dl′ by product
    // GL on the two triangles l′ = l − v, v ∈ [0, l + T]
    fn sigma_time_oracle(gs: f64, g: f64, th: f64) -> f64 {
        let gl = GaussLegendre::new(16);
        let t = 40.0 / gs;
        let panels = 160;
        let mut acc = 0.0;
        for a in 0..panels {
            let (l0, l1) = (-t + t * a as f64 / panels as f64, -t + t * (a + 1) as f64 / panels as f64);
            for (l, wl) in gl.mapped(l0, l1) {
                let vmax = l + t;
                let np = ((vmax * (th.abs() + g + gs)).ceil() as usize).clamp(1, 400);
                for b in 0..np {
                    let (v0, v1) = (vmax * b as f64 / np as f64, vmax * (b + 1) as f64 / np as f64);
                    for (v, wv) in gl.mapped(v0, v1) {
                        acc += 2.0 * wl * wv * (gs * (2.0 * l - v)).exp() * (-g * v).exp() * (th * v).cos();
                    }
                }
            }
        }
        acc
    }

    #[test]
    fn sigma_matches_time_quadrature() {
        let lat = LatticeSpec::new(2, 1.0, 1.0).unwrap();
        let pr = Profiles::default();
        let nu = 0.5;
        let s = lat.modes()[lat.origin()].s;
        let sig = sigma_closed_form(&s, &SumDomain::Lattice(&lat), &pr, nu).unwrap();
        assert!(sig.value > 0.0);
        let gs = pr.gamma(0.0);
        let mut oracle = 0.0;
        for m1 in lat.modes() {
            for m2 in lat.modes() {
                if norm2(&m1.s) == 0.0 || norm2(&m2.s) == 0.0 {
                    continue;
                }
                let s3: Vec3 = std::array::from_fn(|k| m1.s[k] + m2.s[k]);
                let n3: [i64; MAX_DIM] = std::array::from_fn(|k| m1.index[k] + m2.index[k]);
                if lat.find(&n3).is_none() {
                    continue;
                }
                let (y1, y2, y3) = (norm2(&m1.s), norm2(&m2.s), norm2(&s3));
                let g = pr.gamma(y1) + pr.gamma(y2) + pr.gamma(y3);
                let w = y1 + y2 - y3;
                oracle += 2.0 * pr.big_b(y1) * pr.big_b(y2) * pr.big_b(y3) * sigma_time_oracle(gs, g, w / nu);
            }
        }
        oracle *= lat.cell_volume().powi(2);
        assert!((sig.value - oracle).abs() < 1e-6 * oracle, "{} vs {oracle}", sig.value);
    }

    #[test]
    fn n2_node_matches_direct_terms() {
        let pr = Profiles::default();
        for (ys, y, th, t) in [(0.3, [0.1, 0.5, 0.9], 7.0, 0.8), (0.0, [0.2, 0.2, 0.4], 0.0, 1.3), (1.0, [2.0, 0.1, 0.3], -40.0, 2.0)] {
            let g = y.map(|v| pr.gamma(v));
            let b = y.map(|v| pr.big_b(v));
            let (gs, bs) = (pr.gamma(ys), pr.big_b(ys));
            let (qr, cf) = n2_terms(g, b, gs, bs, false);
            let p = C64::new(gs - g[0] - g[1] - g[2], th);
            let node = N2Node::new(qr, cf, p, th);
            let c0 = -2.0 * gs * t;
            let mut direct = ZERO;
            for k in 0..15 {
                direct += cf[k] * tri_exp(c0, p, C64::new(qr[k], -th), t);
            }
            let (v, _) = node.value(t, c0, c0.exp(), false);
            assert!((v - direct).norm() < 1e-12 * (1.0 + direct.norm()), "{v} vs {direct}");
            if th != 0.0 {
                let (sm, amp) = node.value(t, c0, c0.exp(), true);
                let tot = sm + amp * C64::new(0.0, th * t).exp();
                assert!((tot - direct).norm() < 1e-10 * (1.0 + direct.norm()));
            }
        }
    }

    #[test]
    fn z_kernel_cases() {
        let z = z_kernels_omega(0.0, 1.3, [1.0, 2.0, 3.0], 0.4, 0.1).unwrap();
        let e = (-1.3f64 * 0.4).exp();
        assert!((z.z4 - (1.0 - e).powi(2) / 1.69).abs() < 1e-15);
        let z0 = z_kernels_omega(0.7, 1.3, [1.0, 2.0, 3.0], 0.0, 0.1).unwrap();
        assert_eq!(z0.z4, 0.0);
        assert!(z0.zj.iter().all(|&v| v == 0.0));
        assert!(z_kernels_omega(0.7, 1.3, [1.0; 3], 1.5, 0.1).is_err());
        // |∫₀^τ e^{−γ(τ−l)} e^{iθl} dl|² by quadrature
        let (g, th, tau) = (1.7, 9.0, 0.8);
        let gl = GaussLegendre::new(20);
        let mut acc = 0.0;
        for a in 0..20 {
            let (l0, l1) = (tau * a as f64 / 20.0, tau * (a + 1) as f64 / 20.0);
            for (l, wl) in gl.mapped(l0, l1) {
                for b in 0..20 {
                    let (m0, m1) = (tau * b as f64 / 20.0, tau * (b + 1) as f64 / 20.0);
                    for (m, wm) in gl.mapped(m0, m1) {
                        acc += wl * wm * (-g * (2.0 * tau - l - m)).exp() * (th * (l - m)).cos();
                    }
                }
            }
        }
        let z = z_kernels_omega(th * 0.05, g, [1.0; 3], tau, 0.05).unwrap();
        assert!((z.z4 - acc).abs() < 1e-8 * acc);
    }

    #[test]
    fn finite_horizon_n2_tends_to_stationary() {
        let lat = lat();
        let pr = Profiles::default();
        let nu = 0.2;
        let dom = SumDomain::Lattice(&lat);
        let pp = PhysicalParams::new(2, nu, 0.05, Horizon::Finite(40.0)).unwrap();
        for s in [[0.0; 3], [0.5, 0.0, 0.0], [0.3, -0.4, 0.0]] {
            let fin = n2_finite(&s, &[0.0], &dom, &pr, &pp, false).unwrap()[0].value;
            let st = n2_stationary(&s, &dom, &pr, nu).unwrap().value;
            assert!((fin - st).abs() < 1e-10 * st.abs().max(1e-3), "{fin} vs {st}");
            let a1 = n2_finite(&s, &[0.0], &dom, &pr, &pp, true).unwrap()[0].value;
            let sg = sigma_closed_form(&s, &dom, &pr, nu).unwrap().value;
            assert!((a1 - sg).abs() < 1e-10 * sg);
        }
    }

    #[test]
    fn finite_horizon_n2_matches_monte_carlo() {
        let lat = Arc::new(lat());
        let pr = Profiles::default();
        let pp = PhysicalParams::new(2, 0.2, 0.05, Horizon::Finite(0.6)).unwrap();
        let mut cfg = DuhamelConfig::for_params(&pp, &pr);
        cfg.h_osc = pp.nu / 20.0;
        let it = ChaosIntegrator::new(lat.clone(), pr.clone(), pp.clone(), cfg).unwrap();
        let subset = vec![lat.origin(), 1, 5];
        let taus = [-0.2, 0.3];
        let ens = simulate_ensemble(&it, &NoiseStream::new(17), 3000, &taus, &subset, true).unwrap();
        let dom = SumDomain::Lattice(&lat);
        for (ti, &tau) in taus.iter().enumerate() {
            let est = mc_spectrum(&ens, ti).unwrap();
            for (q, &j) in subset.iter().enumerate() {
                let s = lat.modes()[j].s;
                let n2 = n2_finite(&s, &[tau], &dom, &pr, &pp, false).unwrap()[0].value;
                let a1 = n2_finite(&s, &[tau], &dom, &pr, &pp, true).unwrap()[0].value;
                let e = &est[q];
                assert!(e.orders[2].within(n2, 3.5), "n2 mode {j} τ {tau}: {:?} vs {n2}", e.orders[2]);
                assert!(e.a1_sq.within(a1, 3.5), "a1 mode {j} τ {tau}: {:?} vs {a1}", e.a1_sq);
            }
        }
    }

    #[test]
    fn continuum_sigma_approaches_quadric_limit() {
        let pr = Profiles::default();
        let s = [0.3, 0.0, 0.0];
        let lim = theorem_a_integral(&s, 2, &pr).unwrap();
        let mut gaps = Vec::new();
        for nu in [0.1, 0.05] {
            let dom = SumDomain::Continuum { d: 2, rule: WLineRule::default() };
            let v = sigma_closed_form(&s, &dom, &pr, nu).unwrap().value / nu;
            gaps.push(nu * (v - lim).abs());
        }
        // |Σ_s − ν·limit| falls faster than linearly in ν
        assert!(gaps[1] < gaps[0] / 2.0, "{gaps:?}");
    }

    #[test]
    fn periodic_enumeration_matches_brute_force() {
        let pr = Profiles::default();
        let (period, prune) = (3.0, 2.2);
        let dom = SumDomain::Periodic { d: 2, period, prune };
        let s = [1.0 / 3.0, 0.0, 0.0];
        let v = sigma_closed_form(&s, &dom, &pr, 0.3).unwrap().value;
        let m_max = (prune * prune * period * period).floor() as i64;
        let gs = pr.gamma(norm2(&s));
        let mut acc = 0.0;
        let r = 8;
        for a in -r..=r {
            for b in -r..=r {
                for c in -r..=r {
                    for e in -r..=r {
                        let n1 = [a, b];
                        let n2 = [c, e];
                        if n1 == [1, 0] || n2 == [1, 0] {
                            continue;
                        }
                        let n3 = [a + c - 1, b + e];
                        let m = |n: [i64; 2]| n[0] * n[0] + n[1] * n[1];
                        if m(n1) + m(n2) + m(n3) > m_max {
                            continue;
                        }
                        let y = |n: [i64; 2]| m(n) as f64 / 9.0;
                        let g = pr.gamma(y(n1)) + pr.gamma(y(n2)) + pr.gamma(y(n3)) + gs;
                        let w = y(n1) + y(n2) - y(n3) - 1.0 / 9.0;
                        acc += pr.big_b(y(n1)) * pr.big_b(y(n2)) * pr.big_b(y(n3)) * 0.09 * g
                            / (w * w + 0.09 * g * g);
                    }
                }
            }
        }
        let oracle = 2.0 / gs * acc / 81.0;
        assert!((v - oracle).abs() < 1e-12 * oracle, "{v} vs {oracle}");
    }

    #[test]
    fn sums_are_symmetric_in_s1_s2() {
        let lat = lat();
        let pr = Profiles::default();
        let dom = SumDomain::Lattice(&lat);
        let s = [0.5, 0.0, 0.0];
        let e1 = EnvelopeSpec { amplitude: 1.0, powers: [2, 1, 1, 0], gauss: 0.0 };
        let e2 = EnvelopeSpec { amplitude: 1.0, powers: [1, 2, 1, 0], gauss: 0.0 };
        let a = cross_correlation_sum(&s, 0.4, 1.2, &e1, &dom, &pr, 0.2).unwrap();
        let b = cross_correlation_sum(&s, 0.4, 1.2, &e2, &dom, &pr, 0.2).unwrap();
        assert!((a.value - b.value).abs() < 1e-13 && (a.imag - b.imag).abs() < 1e-13);
        let zero = EnvelopeSpec { amplitude: 0.0, ..e1 };
        let z = cross_correlation_sum(&s, 0.4, 1.2, &zero, &dom, &pr, 0.2).unwrap();
        assert_eq!((z.value, z.imag), (0.0, 0.0));
        let t0 = oscillating_sum_sigma0(&s, 0.0, &e1, &dom, &pr, 0.2).unwrap();
        assert_eq!(t0.value, 0.0);
        assert!(EnvelopeSpec { amplitude: 1.0, powers: [1, 0, 0, 3], gauss: 0.0 }.validate(&pr).is_err());
    }

    #[test]
    fn cz_vanishes_at_zero_step() {
        let lat = lat();
        let pr = Profiles::default();
        let pp = PhysicalParams::new(2, 0.2, 0.05, Horizon::Infinite).unwrap();
        let (z, parts) = cz_sum(&[0.0; 3], 0.0, &SumDomain::Lattice(&lat), &pr, &pp).unwrap();
        assert_eq!(z.value, 0.0);
        assert!(parts.iter().all(|&p| p == 0.0));
        let (z, _) = cz_sum(&[0.0; 3], 0.3, &SumDomain::Lattice(&lat), &pr, &pp).unwrap();
        assert!(z.value.is_finite() && z.value != 0.0);
    }

    #[test]
    fn wick_pairings_vanish_structurally() {
        let lat = LatticeSpec::new(2, 1.0, 1.5).unwrap();
        let o = lat.origin();
        for j in [o, (o + 1) % lat.len()] {
            assert_eq!(a1_pairing_count(&lat, o, j, false), 0);
        }
        assert_eq!(a1_pairing_count(&lat, o, (o + 1) % lat.len(), true), 0);
        assert!(a1_pairing_count(&lat, o, o, true) > 0);
    }

    #[test]
    fn increment_without_nonlinearity_is_linear_relaxation() {
        let pr = Profiles::default();
        let pp = PhysicalParams::new(2, 0.1, 0.0, Horizon::Infinite).unwrap();
        let n = RadialDensity::from_fn(0.25, 9, |r| 0.3 * (-r * r).exp());
        let kc = KineticConfig::compact(2, 3.0, 5.0);
        let p = n_leq2_increment(&n, 0.5, &pr, &pp, None, &kc, 1.0).unwrap();
        for (i, rho) in n.radii().enumerate() {
            let y = rho * rho;
            let tt = 10.0;
            let before = n0_spectrum(y, -0.5, &pr, Horizon::Finite(tt));
            let after = n0_spectrum(y, 0.0, &pr, Horizon::Finite(tt));
            let one = RadialDensity::from_values(0.25, vec![before; 9]);
            let q = n_leq2_increment(&one, 0.5, &pr, &pp, None, &kc, 1.0).unwrap();
            assert!((q.prediction.values()[i] - after).abs() < 1e-14);
            let g = pr.gamma(y);
            let want = (-g).exp() * n.values()[i] + pr.big_b(y) * (1.0 - (-g).exp());
            assert!((p.prediction.values()[i] - want).abs() < 1e-15);
        }
        assert!(n_leq2_increment(&n, 0.0, &pr, &pp, None, &kc, 1.0).is_err());
    }
}
