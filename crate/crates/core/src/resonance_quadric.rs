//! Quadrature on the resonance quadric Σ = {x·y = 0} ⊂ ℝ^{2d} with the
//! measure μ^Σ = |x|⁻¹dx d_{x⊥}y, plus the Gaussian stationary-phase
//! evaluator.

use crate::error::{config, Error, Result};
use crate::numerics::{GaussLegendre, Kahan};
use crate::spectral_domain::{dot, norm2, scale, sub, Profiles, Vec3};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Integrand support class.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Support {
    /// Decays at the declared rate; integrated on truncated panels.
    Decaying,
    /// Supported in the ball |z| ≤ radius; the ball is parametrised
    /// exactly (r = R sin φ, fiber radius R cos φ).
    Ball { radius: f64 },
}

/// Panel placement for decaying integrands: graded (log-radial, fibers
/// refined geometrically about their centre) or uniform panels.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PanelLayout {
    #[default]
    Graded,
    Uniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadricMeasure {
    pub d: usize,
    /// Base point s; fibers are centred at the projection of −s.
    pub base: Vec3,
    pub r_max: f64,
    pub radial_panels: usize,
    pub radial_nodes: usize,
    pub angular_nodes: usize,
    pub fiber_max: f64,
    pub fiber_panels: usize,
    pub fiber_nodes: usize,
    /// Declared decay exponent of the integrand in |z|.
    pub decay: f64,
    pub support: Support,
    #[serde(default)]
    pub layout: PanelLayout,
}

impl QuadricMeasure {
    /// Rule for Gaussian-type integrands around a base point.
    pub fn schwartz(d: usize, base: Vec3) -> Self {
        Self {
            d,
            base,
            r_max: 10.0 + norm2(&base).sqrt(),
            radial_panels: 10,
            radial_nodes: 10,
            angular_nodes: if d == 2 { 64 } else { 16 },
            fiber_max: 10.0,
            fiber_panels: 6,
            fiber_nodes: 10,
            decay: f64::INFINITY,
            support: Support::Decaying,
            layout: PanelLayout::Graded,
        }
    }

    /// Rule for integrands decaying like ⟨z⟩^{−rate}.
    pub fn algebraic(d: usize, base: Vec3, rate: f64) -> Self {
        Self {
            d,
            base,
            r_max: 2.0e3,
            radial_panels: 16,
            radial_nodes: 10,
            angular_nodes: if d == 2 { 64 } else { 16 },
            fiber_max: 2.0e3,
            fiber_panels: 14,
            fiber_nodes: 10,
            decay: rate,
            support: Support::Decaying,
            layout: PanelLayout::Graded,
        }
    }

    /// Exact rule for functions supported on a ball about the origin.
    pub fn ball(d: usize, radius: f64) -> Self {
        Self {
            d,
            base: [0.0; 3],
            r_max: radius,
            radial_panels: 1,
            radial_nodes: 24,
            angular_nodes: if d == 2 { 8 } else { 4 },
            fiber_max: radius,
            fiber_panels: 1,
            fiber_nodes: 24,
            decay: f64::INFINITY,
            support: Support::Ball { radius },
            layout: PanelLayout::Graded,
        }
    }

    /// Uniform panels of width ≈ 1 for smooth integrands of unit scale
    /// that are negligible beyond |x| = r_max and |y_⊥ − c| = fiber_max.
    pub fn compact(d: usize, base: Vec3, r_max: f64, fiber_max: f64) -> Self {
        Self {
            d,
            base,
            r_max,
            radial_panels: r_max.ceil().max(1.0) as usize,
            radial_nodes: 8,
            angular_nodes: if d == 2 { 48 } else { 12 },
            fiber_max,
            fiber_panels: fiber_max.ceil().max(1.0) as usize,
            fiber_nodes: 8,
            decay: f64::INFINITY,
            support: Support::Decaying,
            layout: PanelLayout::Uniform,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.d) {
            return config("quadric dimension must be 2 or 3");
        }
        if !(self.r_max > 0.0) || !(self.fiber_max > 0.0) {
            return config("quadric radii must be positive");
        }
        if self.radial_nodes < 2 || self.angular_nodes < 2 || self.fiber_nodes < 2 {
            return config("quadrature orders must be at least 2");
        }
        if self.radial_panels == 0 || self.fiber_panels == 0 {
            return config("panel counts must be positive");
        }
        if matches!(self.support, Support::Decaying) && !(self.decay > 2.0 * self.d as f64 - 2.0) {
            return config(format!(
                "declared decay {} must exceed 2d-2 = {} for convergence",
                self.decay,
                2 * self.d - 2
            ));
        }
        Ok(())
    }
}

/// Unit sphere nodes and weights: uniform angles for d = 2, Gauss–Legendre
/// in cos θ times uniform azimuth for d = 3.
pub fn sphere_rule(d: usize, n: usize) -> Vec<(Vec3, f64)> {
    if d == 2 {
        let w = 2.0 * PI / n as f64;
        (0..n)
            .map(|k| {
                let a = w * (k as f64 + 0.5);
                ([a.cos(), a.sin(), 0.0], w)
            })
            .collect()
    } else {
        let gl = GaussLegendre::new(n);
        let na = 2 * n;
        let wa = 2.0 * PI / na as f64;
        let mut out = Vec::with_capacity(n * na);
        for (c, wc) in gl.mapped(-1.0, 1.0) {
            let st = (1.0 - c * c).max(0.0).sqrt();
            for k in 0..na {
                let a = wa * (k as f64 + 0.5);
                out.push(([st * a.cos(), st * a.sin(), c], wc * wa));
            }
        }
        out
    }
}

/// Orthonormal basis of x⊥: drop the standard vector with the largest
/// |x_k| and Gram–Schmidt the rest against x̂.
pub fn perp_basis(d: usize, xhat: &Vec3) -> Vec<Vec3> {
    let pivot = (0..d)
        .max_by(|&a, &b| xhat[a].abs().total_cmp(&xhat[b].abs()))
        .unwrap_or(0);
    let mut basis: Vec<Vec3> = Vec::with_capacity(d - 1);
    for k in 0..d {
        if k == pivot {
            continue;
        }
        let mut e = [0.0; 3];
        e[k] = 1.0;
        let mut v = sub(&e, &scale(xhat, dot(&e, xhat)));
        for b in &basis {
            v = sub(&v, &scale(b, dot(&v, b)));
        }
        let n = norm2(&v).sqrt();
        basis.push(scale(&v, 1.0 / n));
    }
    basis
}

/// Nodes on [0, max] refined geometrically towards 0: panels
/// [0, max 2^{−P}], [max 2^{−P}, max 2^{1−P}], …, [max/2, max].
pub fn geometric_nodes(max: f64, panels: usize, gl: &GaussLegendre) -> Vec<(f64, f64)> {
    let mut edges = vec![0.0];
    for k in (0..panels).rev() {
        edges.push(max * 0.5f64.powi(k as i32));
    }
    let mut out = Vec::new();
    for w in edges.windows(2) {
        out.extend(gl.mapped(w[0], w[1]));
    }
    out
}

/// Nodes of the fiber x⊥ ≅ ℝ^{d−1} as (coordinates, weight), centred at c.
fn fiber_rule(qm: &QuadricMeasure, center: [f64; 2]) -> Vec<([f64; 2], f64)> {
    let gl = GaussLegendre::new(qm.fiber_nodes);
    let radial: Vec<(f64, f64)> = match qm.layout {
        PanelLayout::Graded => geometric_nodes(qm.fiber_max, qm.fiber_panels, &gl),
        PanelLayout::Uniform => {
            let w = qm.fiber_max / qm.fiber_panels as f64;
            (0..qm.fiber_panels)
                .flat_map(|p| gl.mapped(w * p as f64, w * (p + 1) as f64))
                .collect()
        }
    };
    if qm.d == 2 {
        let mut out = Vec::with_capacity(2 * radial.len());
        for &(t, w) in radial.iter().rev() {
            out.push(([center[0] - t, 0.0], w));
        }
        for &(t, w) in &radial {
            out.push(([center[0] + t, 0.0], w));
        }
        out
    } else {
        let na = 2 * qm.angular_nodes.max(8);
        let wa = 2.0 * PI / na as f64;
        let mut out = Vec::with_capacity(radial.len() * na);
        for &(t, w) in &radial {
            for k in 0..na {
                let a = wa * (k as f64 + 0.5);
                out.push((
                    [center[0] + t * a.cos(), center[1] + t * a.sin()],
                    w * t * wa,
                ));
            }
        }
        out
    }
}

/// ∫ f(base, fiber) |base|⁻¹ d(base) d_{base⊥}(fiber), componentwise.
fn integrate_disintegrated<const N: usize, F>(f: &F, qm: &QuadricMeasure) -> Result<[f64; N]>
where
    F: Fn(&Vec3, &Vec3) -> [f64; N] + Sync,
{
    qm.validate()?;
    let d = qm.d;
    let sphere = sphere_rule(d, qm.angular_nodes);
    let gl_r = GaussLegendre::new(qm.radial_nodes);
    let parts: Vec<[f64; N]> = match qm.support {
        Support::Ball { radius } => {
            // r = R sin φ, fiber radius R cos φ η
            let phis: Vec<(f64, f64)> = gl_r.mapped(0.0, 0.5 * PI).collect();
            let gl_f = GaussLegendre::new(qm.fiber_nodes);
            phis.par_iter()
                .map(|&(phi, wphi)| {
                    let r = radius * phi.sin();
                    let rf = radius * phi.cos();
                    // |x|^{-1} dx = r^{d-2} dr dΩ, dr = R cos φ dφ
                    let wr = wphi * radius * phi.cos() * r.powi(d as i32 - 2);
                    let mut acc = [Kahan::new(); N];
                    for (u, wu) in &sphere {
                        let x = scale(u, r);
                        let basis = perp_basis(d, u);
                        if d == 2 {
                            for (eta, we) in gl_f.mapped(-1.0, 1.0) {
                                let y = scale(&basis[0], rf * eta);
                                let v = f(&x, &y);
                                for k in 0..N {
                                    acc[k].add(wu * we * rf * v[k]);
                                }
                            }
                        } else {
                            let na = 2 * qm.angular_nodes.max(8);
                            let wa = 2.0 * PI / na as f64;
                            for (eta, we) in gl_f.mapped(0.0, 1.0) {
                                for j in 0..na {
                                    let a = wa * (j as f64 + 0.5);
                                    let y = [
                                        rf * eta * (a.cos() * basis[0][0] + a.sin() * basis[1][0]),
                                        rf * eta * (a.cos() * basis[0][1] + a.sin() * basis[1][1]),
                                        rf * eta * (a.cos() * basis[0][2] + a.sin() * basis[1][2]),
                                    ];
                                    let v = f(&x, &y);
                                    for k in 0..N {
                                        acc[k].add(wu * we * wa * rf * rf * eta * v[k]);
                                    }
                                }
                            }
                        }
                    }
                    std::array::from_fn(|k| wr * acc[k].value())
                })
                .collect()
        }
        Support::Decaying => {
            let rnodes = radial_rule(qm, &gl_r);
            let neg_base = scale(&qm.base, -1.0);
            rnodes
                .par_iter()
                .map(|&(r, wr)| {
                    let wr = wr * r.powi(d as i32 - 2);
                    let mut acc = [Kahan::new(); N];
                    for (u, wu) in &sphere {
                        let x = scale(u, r);
                        let basis = perp_basis(d, u);
                        let mut center = [0.0; 2];
                        for (k, b) in basis.iter().enumerate() {
                            center[k] = dot(&neg_base, b);
                        }
                        for (c, wf) in fiber_rule(qm, center) {
                            let mut y = [0.0; 3];
                            for (k, b) in basis.iter().enumerate() {
                                for i in 0..3 {
                                    y[i] += c[k] * b[i];
                                }
                            }
                            let v = f(&x, &y);
                            for k in 0..N {
                                acc[k].add(wu * wf * v[k]);
                            }
                        }
                    }
                    std::array::from_fn(|k| wr * acc[k].value())
                })
                .collect()
        }
    };
    let mut total = [Kahan::new(); N];
    for p in parts {
        for k in 0..N {
            total[k].add(p[k]);
        }
    }
    let out: [f64; N] = std::array::from_fn(|k| total[k].value());
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite quadric integral".into()));
    }
    Ok(out)
}

/// Radial nodes (r, dr-weight) for decaying integrands.
fn radial_rule(qm: &QuadricMeasure, gl_r: &GaussLegendre) -> Vec<(f64, f64)> {
    match qm.layout {
        PanelLayout::Uniform => {
            let w = qm.r_max / qm.radial_panels as f64;
            (0..qm.radial_panels)
                .flat_map(|p| gl_r.mapped(w * p as f64, w * (p + 1) as f64))
                .collect()
        }
        PanelLayout::Graded => {
            let umin = (1e-6 * qm.r_max).ln();
            let umax = qm.r_max.ln();
            let du = (umax - umin) / qm.radial_panels as f64;
            // core [0, r_min] on a plain panel: for d = 2 the weight r^{d-2}
            // does not vanish at the origin
            let mut rnodes: Vec<(f64, f64)> = gl_r.mapped(0.0, umin.exp()).collect();
            for p in 0..qm.radial_panels {
                let a = umin + du * p as f64;
                for (u, w) in gl_r.mapped(a, a + du) {
                    rnodes.push((u.exp(), w * u.exp()));
                }
            }
            rnodes
        }
    }
}

/// ∫ f dμ^Σ via the x-projection: |x|⁻¹dx d_{x⊥}y.
pub fn quadric_integrate<F>(f: F, qm: &QuadricMeasure) -> Result<f64>
where
    F: Fn(&Vec3, &Vec3) -> f64 + Sync,
{
    integrate_disintegrated(&|x: &Vec3, y: &Vec3| [f(x, y)], qm).map(|v| v[0])
}

/// Several integrands against the same nodes in one pass.
pub fn quadric_integrate_many<const N: usize, F>(f: F, qm: &QuadricMeasure) -> Result<[f64; N]>
where
    F: Fn(&Vec3, &Vec3) -> [f64; N] + Sync,
{
    integrate_disintegrated(&f, qm)
}

/// ∫ f dμ^Σ via the y-projection: |y|⁻¹dy d_{y⊥}x.
pub fn quadric_integrate_y_disintegration<F>(f: F, qm: &QuadricMeasure) -> Result<f64>
where
    F: Fn(&Vec3, &Vec3) -> f64 + Sync,
{
    integrate_disintegrated(&|y: &Vec3, x: &Vec3| [f(x, y)], qm).map(|v| v[0])
}

/// (π/γ_s) ∫ B(x+s)B(y+s)B(x+y+s) dμ^Σ: the limit of Σ_s/ν.
pub fn theorem_a_integral(s: &Vec3, d: usize, profiles: &Profiles) -> Result<f64> {
    let qm = QuadricMeasure::schwartz(d, *s);
    let bb = |v: Vec3| profiles.big_b(norm2(&v));
    let v = quadric_integrate(
        |x, y| {
            let s1 = [x[0] + s[0], x[1] + s[1], x[2] + s[2]];
            let s2 = [y[0] + s[0], y[1] + s[1], y[2] + s[2]];
            let s3 = [s1[0] + y[0], s1[1] + y[1], s1[2] + y[2]];
            bb(s1) * bb(s2) * bb(s3)
        },
        &qm,
    )?;
    Ok(PI / profiles.gamma(norm2(s)) * v)
}

/// Eigenvalues of a small symmetric matrix by cyclic Jacobi rotations.
pub fn symmetric_eigenvalues(q: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = q.len();
    if n == 0 || q.iter().any(|r| r.len() != n) {
        return config("matrix must be square and nonempty");
    }
    for i in 0..n {
        for j in 0..n {
            if (q[i][j] - q[j][i]).abs() > 1e-12 * (1.0 + q[i][j].abs()) {
                return config("matrix must be symmetric");
            }
        }
    }
    let mut a: Vec<Vec<f64>> = q.to_vec();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for r in p + 1..n {
                if a[p][r].abs() < 1e-300 {
                    continue;
                }
                let theta = 0.5 * (a[r][r] - a[p][p]) / a[p][r];
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akr) = (a[k][p], a[k][r]);
                    a[k][p] = c * akp - s * akr;
                    a[k][r] = s * akp + c * akr;
                }
                for k in 0..n {
                    let (apk, ark) = (a[p][k], a[r][k]);
                    a[p][k] = c * apk - s * ark;
                    a[r][k] = s * apk + c * ark;
                }
            }
        }
    }
    Ok((0..n).map(|i| a[i][i]).collect())
}

/// Gaussian envelope φ(x) = amplitude · e^{−width|x|²} on ℝⁿ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianEnvelope {
    pub amplitude: f64,
    pub width: f64,
}

impl GaussianEnvelope {
    /// ‖φ̂‖_{L¹} with φ̂(ξ) = ∫e^{−ix·ξ}φ(x)dx; equals |amplitude|(2π)ⁿ.
    pub fn fourier_l1(&self, n: usize) -> f64 {
        self.amplitude.abs() * (2.0 * PI).powi(n as i32)
    }
}

/// (ν/2π)^{n/2}|det Q|^{−1/2}‖φ̂‖₁.
pub fn fresnel_bound(q: &[Vec<f64>], phi_hat_l1: f64, nu: f64) -> Result<f64> {
    let ev = symmetric_eigenvalues(q)?;
    let det: f64 = ev.iter().product();
    let scale_q = ev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if det.abs() <= 1e-14 * scale_q.powi(ev.len() as i32) || det == 0.0 {
        return Err(Error::Config("Q is singular".into()));
    }
    let n = q.len() as i32;
    Ok((nu / (2.0 * PI)).powf(n as f64 / 2.0) * det.abs().powf(-0.5) * phi_hat_l1)
}

/// I(ν) = ∫ e^{iν⁻¹x·Qx/2} conj(φ(x)) dx in closed form for Gaussian φ:
/// amplitude · Π_k √(π / (width − iλ_k/(2ν))).
pub fn gaussian_phase_integral(q: &[Vec<f64>], phi: &GaussianEnvelope, nu: f64) -> Result<C64> {
    let ev = symmetric_eigenvalues(q)?;
    if ev.iter().any(|&l| l == 0.0) {
        return Err(Error::Config("Q is singular".into()));
    }
    if !(phi.width > 0.0) {
        return config("Gaussian width must be positive");
    }
    let mut acc = C64::new(phi.amplitude, 0.0);
    for l in ev {
        let m = C64::new(phi.width, -l / (2.0 * nu));
        acc *= (C64::new(PI, 0.0) / m).sqrt();
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_volumes() {
        for d in [2usize, 3] {
            for r in [0.5, 1.0, 2.0] {
                let qm = QuadricMeasure::ball(d, r);
                let v = quadric_integrate(|_, _| 1.0, &qm).unwrap();
                let exact = PI * PI * r.powi(2 * d as i32 - 2);
                assert!((v / exact - 1.0).abs() < 1e-10, "d={d} R={r} got {v}");
            }
        }
    }

    #[test]
    fn gaussian_closed_form_d2() {
        let qm = QuadricMeasure::schwartz(2, [0.0; 3]);
        let v = quadric_integrate(|x, y| (-norm2(x) - norm2(y)).exp(), &qm).unwrap();
        assert!((v / (PI * PI) - 1.0).abs() < 1e-8, "{v}");
    }

    #[test]
    fn gaussian_closed_form_d3() {
        // (∫|x|⁻¹e^{−|x|²}dx)(∫_{ℝ²}e^{−|y|²}dy) = 2π · π
        let qm = QuadricMeasure::schwartz(3, [0.0; 3]);
        let v = quadric_integrate(|x, y| (-norm2(x) - norm2(y)).exp(), &qm).unwrap();
        assert!((v / (2.0 * PI * PI) - 1.0).abs() < 1e-8, "{v}");
    }

    #[test]
    fn disintegrations_agree_and_symmetries() {
        let s = [0.4, -0.3, 0.0];
        let qm = QuadricMeasure::schwartz(2, s);
        let f = |x: &Vec3, y: &Vec3| {
            (-norm2(&[x[0] + s[0], x[1] + s[1], 0.0]) - 0.5 * norm2(y)).exp() * (1.0 + x[0] * y[1])
        };
        let a = quadric_integrate(f, &qm).unwrap();
        let b = quadric_integrate_y_disintegration(f, &qm).unwrap();
        assert!((a - b).abs() < 1e-6 * a.abs());
        let swapped = quadric_integrate(|x, y| f(y, x), &qm).unwrap();
        assert!((swapped - a).abs() < 1e-6 * a.abs());
        let odd = quadric_integrate(|x, y| x[0] * (-norm2(x) - norm2(y)).exp(), &qm).unwrap();
        assert!(odd.abs() < 1e-12);
    }

    #[test]
    fn theorem_a_rotation_invariance() {
        let pr = Profiles::default();
        let a = theorem_a_integral(&[0.8, 0.0, 0.0], 2, &pr).unwrap();
        let c = (0.7f64).cos();
        let sn = (0.7f64).sin();
        let b = theorem_a_integral(&[0.8 * c, 0.8 * sn, 0.0], 2, &pr).unwrap();
        assert!((a - b).abs() < 1e-6 * a);
    }

    #[test]
    fn undeclared_decay_rejected() {
        let mut qm = QuadricMeasure::algebraic(2, [0.0; 3], 2.0);
        assert!(quadric_integrate(|_, _| 0.0, &qm).is_err());
        qm.decay = 2.5;
        assert_eq!(quadric_integrate(|_, _| 0.0, &qm).unwrap(), 0.0);
    }

    #[test]
    fn stationary_phase_bound() {
        let q = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let phi = GaussianEnvelope {
            amplitude: 1.0,
            width: 1.0,
        };
        let mut ratios = Vec::new();
        for nu in [0.1, 0.05, 0.025] {
            let i = gaussian_phase_integral(&q, &phi, nu).unwrap();
            let b = fresnel_bound(&q, phi.fourier_l1(2), nu).unwrap();
            assert!(i.norm() <= b);
            ratios.push(i.norm() / nu);
        }
        let (lo, hi) = ratios
            .iter()
            .fold((f64::MAX, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
        assert!(hi / lo < 2.0);
        let zero = GaussianEnvelope {
            amplitude: 0.0,
            width: 1.0,
        };
        assert_eq!(gaussian_phase_integral(&q, &zero, 0.1).unwrap().norm(), 0.0);
        assert!(fresnel_bound(&[vec![1.0, 0.0], vec![0.0, 0.0]], 1.0, 0.1).is_err());
    }

    #[test]
    fn gaussian_phase_matches_quadrature() {
        // n = 1, Q = [2]: ∫ e^{i x²/ν} e^{−x²} dx by brute force
        let q = vec![vec![2.0]];
        let phi = GaussianEnvelope {
            amplitude: 1.0,
            width: 1.0,
        };
        let nu = 0.5;
        let gl = GaussLegendre::new(40);
        let mut acc = C64::new(0.0, 0.0);
        for p in 0..40 {
            let a = -8.0 + 0.4 * p as f64;
            for (x, w) in gl.mapped(a, a + 0.4) {
                acc += C64::from_polar(w * (-x * x).exp(), x * x / nu);
            }
        }
        let i = gaussian_phase_integral(&q, &phi, nu).unwrap();
        assert!((i - acc).norm() < 1e-10);
    }
}
