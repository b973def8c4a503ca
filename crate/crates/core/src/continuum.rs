//! Integrals over (s₁, s₂) ∈ ℝ^{2d} of kernels that are sharp or
//! oscillatory in the resonance phase ω.
//!
//! With x = s₁ − s and y = s₂ − s one has ω = −2x·y. Writing x = r x̂ and
//! y = p x̂ + q with q ⊥ x̂, the phase is w = −2rp and
//! dx dy = ½ r^{d−2} dr dx̂ dw dq, so every kernel becomes a family of
//! one-dimensional integrals along w. The base point is s = (ρ, 0, 0);
//! radial profiles make that no loss of generality.

use crate::error::{config, Error, Result};
use crate::numerics::{FilonRule, GaussLegendre, KahanC};
use crate::spectral_domain::{dot, norm2, scale, Vec3};
use crate::resonance_quadric::perp_basis;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Quadrature layout for w-line integrals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WLineRule {
    /// The integrand is negligible unless at least two of |s₁|, |s₂|, |s₃|
    /// are at most `reach`.
    pub reach: f64,
    pub r_panel: f64,
    pub r_nodes: usize,
    /// Directions x̂: half-circle midpoints (d = 2) or polar nodes (d = 3).
    pub angles: usize,
    pub q_panel: f64,
    pub q_nodes: usize,
    pub w_nodes: usize,
    /// Width of the first w panel in units of ν; panels then double.
    pub w_first: f64,
    /// Largest w panel, as a width in p = −w/(2r).
    pub p_cap: f64,
}

impl Default for WLineRule {
    fn default() -> Self {
        Self {
            reach: 4.0,
            r_panel: 1.0,
            r_nodes: 8,
            angles: 16,
            q_panel: 1.0,
            q_nodes: 8,
            w_nodes: 10,
            w_first: 0.25,
            p_cap: 0.75,
        }
    }
}

impl WLineRule {
    /// Tighter layout for reference values.
    pub fn fine() -> Self {
        Self {
            reach: 4.5,
            r_panel: 0.5,
            r_nodes: 10,
            angles: 32,
            q_panel: 0.5,
            q_nodes: 10,
            w_nodes: 12,
            w_first: 0.125,
            p_cap: 0.5,
        }
    }

    /// Fewer nodes per panel; about 3e-7 relative on the n⁽²⁾ kernel.
    pub fn coarse() -> Self {
        Self {
            r_nodes: 6,
            angles: 12,
            q_nodes: 6,
            w_nodes: 8,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.reach > 0.0 && self.r_panel > 0.0 && self.q_panel > 0.0) {
            return config("w-line reach and panel widths must be positive");
        }
        if !(self.w_first > 0.0 && self.p_cap > 0.0) {
            return config("w-line panel scales must be positive");
        }
        if self.r_nodes < 2 || self.q_nodes < 2 || self.w_nodes < 2 || self.angles < 1 {
            return config("w-line quadrature orders too small");
        }
        Ok(())
    }
}

/// Integrand along a w-line. Output k carries the oscillation e^{iκ_k w}.
pub trait LineKernel: Sync {
    fn n_out(&self) -> usize;
    /// κ_k; zero for non-oscillatory outputs.
    fn kappa(&self, k: usize) -> f64;
    /// Fills out[k] = (smooth, amplitude) with the integrand
    /// smooth + e^{iκ_k w}·amplitude. When `split[k]` is false the full
    /// value goes in `smooth` and `amplitude` is ignored. Arguments are
    /// |s₁|², |s₂|², |s₃|² and ω.
    fn eval(&self, y1: f64, y2: f64, y3: f64, w: f64, split: &[bool], out: &mut [(C64, C64)]);
}

struct Direction {
    u: Vec3,
    basis: Vec<Vec3>,
    weight: f64,
}

fn directions(d: usize, rho: f64, n: usize) -> Vec<Direction> {
    let mk = |u: Vec3, weight: f64| Direction {
        basis: perp_basis(d, &u),
        u,
        weight,
    };
    if rho == 0.0 {
        let area = if d == 2 { 2.0 * PI } else { 4.0 * PI };
        return vec![mk([1.0, 0.0, 0.0], area)];
    }
    if d == 2 {
        // reflection (a, b) → (a, −b) fixes s: integrate [0, π] twice
        let w = PI / n as f64;
        (0..n)
            .map(|k| {
                let a = w * (k as f64 + 0.5);
                mk([a.cos(), a.sin(), 0.0], 2.0 * w)
            })
            .collect()
    } else {
        // rotations about the s axis: polar angle only
        GaussLegendre::new(n)
            .mapped(-1.0, 1.0)
            .map(|(c, wc)| mk([c, (1.0 - c * c).max(0.0).sqrt(), 0.0], 2.0 * PI * wc))
            .collect()
    }
}

/// Panel edges on [0, wmax]: doubling from `first`, then steps of `cap`.
fn half_edges(first: f64, cap: f64, wmax: f64) -> Vec<f64> {
    let mut e = vec![0.0];
    let mut width = first.min(cap);
    while *e.last().unwrap() < wmax {
        let next = e.last().unwrap() + width;
        e.push(next.min(wmax));
        width = (2.0 * width).min(cap);
    }
    e
}

fn overlaps(a: f64, b: f64, iv: &[(f64, f64)]) -> bool {
    iv.iter().any(|&(lo, hi)| a < hi && b > lo)
}

/// ∫∫ ds₁ ds₂ of the kernel outputs around s = (ρ, 0, 0) in ℝ^d.
pub fn integrate_w_lines<K: LineKernel>(
    d: usize,
    rho: f64,
    nu: f64,
    rule: &WLineRule,
    kernel: &K,
) -> Result<Vec<C64>> {
    rule.validate()?;
    if !(2..=3).contains(&d) {
        return config("continuum integrals need d = 2 or 3");
    }
    if !(nu > 0.0) {
        return config("ν must be positive");
    }
    let n_out = kernel.n_out();
    let kappas: Vec<f64> = (0..n_out).map(|k| kernel.kappa(k)).collect();
    let s = [rho, 0.0, 0.0];
    let reach = rule.reach;
    let r_max = (rho + reach).max(2.0 * reach);
    let gl_r = GaussLegendre::new(rule.r_nodes);
    // after the w integration the r profile has structure on the scale ν
    let r_edges = half_edges(nu * rule.w_first, rule.r_panel, r_max);
    let rnodes: Vec<(f64, f64)> = r_edges
        .windows(2)
        .flat_map(|e| gl_r.mapped(e[0], e[1]).collect::<Vec<_>>())
        .collect();
    let dirs = directions(d, rho, rule.angles);
    let gl_q = GaussLegendre::new(rule.q_nodes);
    let n_qp = (2.0 * reach / rule.q_panel).ceil() as usize;
    let qw = 2.0 * reach / n_qp as f64;
    // offsets from the fiber centre: a segment (d = 2) or a disc (d = 3)
    let qnodes: Vec<([f64; 2], f64)> = if d == 2 {
        (0..n_qp)
            .flat_map(|p| {
                let a = -reach + qw * p as f64;
                gl_q.mapped(a, a + qw).map(|(t, w)| ([t, 0.0], w)).collect::<Vec<_>>()
            })
            .collect()
    } else {
        let na = 2 * rule.angles.max(8);
        let wa = 2.0 * PI / na as f64;
        let half = n_qp.div_ceil(2);
        let hw = reach / half as f64;
        let mut v = Vec::new();
        for p in 0..half {
            for (t, w) in gl_q.mapped(hw * p as f64, hw * (p + 1) as f64) {
                for k in 0..na {
                    let a = wa * (k as f64 + 0.5);
                    v.push(([t * a.cos(), t * a.sin()], w * t * wa));
                }
            }
        }
        v
    };
    let filon = FilonRule::new(rule.w_nodes);
    let parts: Vec<Vec<C64>> = rnodes
        .par_iter()
        .map(|&(r, wr)| {
            let jac = 0.5 * r.powi(d as i32 - 2) * wr;
            let wmax = 2.0 * r * (rho + r + reach);
            let he = half_edges(nu * rule.w_first, 2.0 * r * rule.p_cap, wmax);
            let mut panels: Vec<(f64, f64)> = he.windows(2).map(|e| (-e[1], -e[0])).collect();
            panels.reverse();
            panels.extend(he.windows(2).map(|e| (e[0], e[1])));
            // per panel: split flags and Filon weights for each output
            let mut split = vec![vec![false; n_out]; panels.len()];
            let mut fw: Vec<Vec<Vec<C64>>> = vec![vec![Vec::new(); n_out]; panels.len()];
            for (pi, &(a, b)) in panels.iter().enumerate() {
                let wmin = a.abs().min(b.abs());
                for k in 0..n_out {
                    if kappas[k] != 0.0 && kappas[k] * wmin >= 2.0 {
                        split[pi][k] = true;
                        filon.weights(a, b, kappas[k], &mut fw[pi][k]);
                    }
                }
            }
            let mut acc = vec![KahanC::new(); n_out];
            let mut out = vec![(C64::new(0.0, 0.0), C64::new(0.0, 0.0)); n_out];
            let mut line = vec![C64::new(0.0, 0.0); n_out];
            for dir in &dirs {
                let sp = dot(&s, &dir.u);
                let sperp: Vec<f64> = dir.basis.iter().map(|b| dot(&s, b)).collect();
                for (off, wq) in &qnodes {
                    let h2 = off[0] * off[0] + off[1] * off[1];
                    if h2 > reach * reach {
                        continue;
                    }
                    let hc = (reach * reach - h2).sqrt();
                    // q = centre + off, centre = −s⊥
                    let mut qv = [0.0; 3];
                    for (k, b) in dir.basis.iter().enumerate() {
                        let c = off[k] - sperp[k];
                        for i in 0..3 {
                            qv[i] += c * b[i];
                        }
                    }
                    let ivs = [
                        (2.0 * r * (sp - hc), 2.0 * r * (sp + hc)),
                        (2.0 * r * (r + sp - hc), 2.0 * r * (r + sp + hc)),
                    ];
                    line.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
                    let x = scale(&dir.u, r);
                    let s1 = [x[0] + s[0], x[1] + s[1], x[2] + s[2]];
                    let y1 = norm2(&s1);
                    for (pi, &(a, b)) in panels.iter().enumerate() {
                        if !overlaps(a, b, &ivs) {
                            continue;
                        }
                        for (j, (w, ww)) in filon.gl.mapped(a, b).enumerate() {
                            let p = -w / (2.0 * r);
                            let mut s2 = [0.0; 3];
                            for i in 0..3 {
                                s2[i] = s[i] + p * dir.u[i] + qv[i];
                            }
                            let s3 = [s1[0] + s2[0] - s[0], s1[1] + s2[1] - s[1], s1[2] + s2[2] - s[2]];
                            kernel.eval(y1, norm2(&s2), norm2(&s3), w, &split[pi], &mut out);
                            for k in 0..n_out {
                                line[k] += ww * out[k].0;
                                if split[pi][k] {
                                    line[k] += fw[pi][k][j] * out[k].1;
                                }
                            }
                        }
                    }
                    let wt = jac * dir.weight * wq;
                    for k in 0..n_out {
                        acc[k].add(wt * line[k]);
                    }
                }
            }
            acc.iter().map(|a| a.value()).collect()
        })
        .collect();
    let mut total = vec![KahanC::new(); n_out];
    for p in parts {
        for k in 0..n_out {
            total[k].add(p[k]);
        }
    }
    let v: Vec<C64> = total.iter().map(|t| t.value()).collect();
    if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numeric("non-finite continuum integral".into()));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Gauss3 {
        nu: f64,
    }

    impl LineKernel for Gauss3 {
        fn n_out(&self) -> usize {
            2
        }
        fn kappa(&self, k: usize) -> f64 {
            if k == 0 {
                0.0
            } else {
                1.0 / self.nu
            }
        }
        fn eval(&self, y1: f64, y2: f64, y3: f64, w: f64, split: &[bool], out: &mut [(C64, C64)]) {
            let g = (-(y1 + y2 + y3)).exp();
            out[0] = (C64::new(g, 0.0), C64::new(0.0, 0.0));
            let osc = C64::from_polar(1.0, w / self.nu);
            out[1] = if split[1] {
                (C64::new(0.0, 0.0), C64::new(g, 0.0))
            } else {
                (g * osc, C64::new(0.0, 0.0))
            };
        }
    }

    // ∫∫ e^{−|s₁|²−|s₂|²−|s₃|²} e^{iω/ν} over ℝ⁴ (d = 2): per coordinate
    // the form 2x² + 2y² + 2(1 + i/ν)xy + 4s(x + y) + 3s².
    fn gauss_closed(rho: f64, nu: f64) -> C64 {
        let i = C64::new(0.0, 1.0);
        let b = C64::new(1.0, 0.0) + i / nu;
        let det = C64::new(4.0, 0.0) - b * b;
        // ∫ e^{−zᵀMz + 2jᵀz} = π/√det M · e^{jᵀM⁻¹j}, j = −2(s_k, s_k)
        let mut total = C64::new(1.0, 0.0);
        for k in 0..2 {
            let sk = if k == 0 { rho } else { 0.0 };
            let j = [-2.0 * sk, -2.0 * sk];
            // M⁻¹ = [[2, −b], [−b, 2]]/det
            let q = (2.0 * j[0] * j[0] - 2.0 * b * j[0] * j[1] + 2.0 * j[1] * j[1]) / det;
            total *= PI / det.sqrt() * q.exp();
        }
        total * (-3.0 * rho * rho).exp()
    }

    #[test]
    fn gaussian_integrand_with_phase() {
        for &(rho, nu) in &[(0.0, 0.2), (0.8, 0.2), (0.5, 0.05)] {
            let v = integrate_w_lines(2, rho, nu, &WLineRule::default(), &Gauss3 { nu }).unwrap();
            let exact0 = gauss_closed(rho, 1e12);
            let exact1 = gauss_closed(rho, nu);
            assert!((v[0] - exact0).norm() < 1e-8 * exact0.norm(), "{rho} {nu}: {} vs {}", v[0], exact0);
            assert!((v[1] - exact1).norm() < 1e-6 * exact0.norm(), "{rho} {nu}: {} vs {}", v[1], exact1);
        }
    }
}
