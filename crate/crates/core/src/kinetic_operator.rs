//! The wave kinetic integral
//! K(v)(s) = 2π ∫ μ^Σ [v₁v₂v₃ + v₁v₂v₄ − v₁v₃v₄ − v₂v₃v₄],
//! v₁ = v(x+s), v₂ = v(y+s), v₃ = v(x+y+s), v₄ = v(s), its four signed
//! parts and the time-smoothed form K^τ.

use crate::error::{config, Result};
use crate::resonance_quadric::{quadric_integrate, quadric_integrate_many, QuadricMeasure};
use crate::spectral_domain::{
    bracket, norm2, radial_probes, Profiles, RadialDensity, SpectralDensity, Vec3,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// Signs of K₁..K₄.
pub const SIGMA: [f64; 4] = [-1.0, -1.0, 1.0, 1.0];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KineticRule {
    /// Densities negligible beyond |s| = support (Gaussian-type states).
    Compact { support: f64 },
    /// Densities decaying like ⟨s⟩^{−r}.
    Algebraic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KineticConfig {
    pub d: usize,
    /// Norm index of the input densities; must exceed d.
    pub r: f64,
    pub rule: KineticRule,
}

impl KineticConfig {
    pub fn compact(d: usize, r: f64, support: f64) -> Self {
        Self {
            d,
            r,
            rule: KineticRule::Compact { support },
        }
    }

    pub fn algebraic(d: usize, r: f64) -> Self {
        Self {
            d,
            r,
            rule: KineticRule::Algebraic,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.d) {
            return config("kinetic operator needs d = 2 or 3");
        }
        if !(self.r > self.d as f64) {
            return config(format!("norm index r = {} must exceed d = {}", self.r, self.d));
        }
        if let KineticRule::Compact { support } = self.rule {
            if !(support > 0.0) {
                return config("compact support radius must be positive");
            }
        }
        Ok(())
    }

    /// Quadric rule centred at the output frequency s.
    pub fn measure(&self, s: &Vec3) -> QuadricMeasure {
        match self.rule {
            KineticRule::Compact { support } => {
                let r_max = (norm2(s).sqrt() + support).max(2.0 * support);
                QuadricMeasure::compact(self.d, *s, r_max, support)
            }
            KineticRule::Algebraic => QuadricMeasure::algebraic(self.d, *s, 2.0 * self.r),
        }
    }
}

#[inline]
fn shifted(s: &Vec3, x: &Vec3, y: &Vec3) -> (Vec3, Vec3, Vec3) {
    let s1 = [x[0] + s[0], x[1] + s[1], x[2] + s[2]];
    let s2 = [y[0] + s[0], y[1] + s[1], y[2] + s[2]];
    let s3 = [s1[0] + y[0], s1[1] + y[1], s1[2] + y[2]];
    (s1, s2, s3)
}

/// The bracket v₁v₂v₃ + v₁v₂v₄ − v₁v₃v₄ − v₂v₃v₄.
#[inline]
pub fn kinetic_bracket(v1: f64, v2: f64, v3: f64, v4: f64) -> f64 {
    v1 * v2 * v3 + v1 * v2 * v4 - v1 * v3 * v4 - v2 * v3 * v4
}

/// Pointwise evaluator; lattice densities are rejected.
fn evaluator(v: &SpectralDensity) -> Result<impl Fn(&Vec3) -> f64 + Sync + '_> {
    if let SpectralDensity::Lattice { .. } = v {
        return config("kinetic integrals need a continuum or radial density");
    }
    Ok(move |p: &Vec3| v.eval(p))
}

/// K(v)(s).
pub fn k_apply(v: &SpectralDensity, s: &Vec3, cfg: &KineticConfig) -> Result<f64> {
    cfg.validate()?;
    let f = evaluator(v)?;
    let v4 = f(s);
    let qm = cfg.measure(s);
    let val = quadric_integrate(
        |x, y| {
            let (s1, s2, s3) = shifted(s, x, y);
            kinetic_bracket(f(&s1), f(&s2), f(&s3), v4)
        },
        &qm,
    )?;
    Ok(2.0 * PI * val)
}

/// {K₁, K₂, K₃, K₄} with K_l = 2π σ_l J_l(v, v, v, v). The rule is
/// mirror-symmetric, so K₁ = K₂ holds exactly.
pub fn k_parts(v: &SpectralDensity, s: &Vec3, cfg: &KineticConfig) -> Result<[f64; 4]> {
    let u = [v, v, v, v];
    let j = j_all(u, s, cfg)?;
    Ok(std::array::from_fn(|l| 2.0 * PI * SIGMA[l] * j[l]))
}

fn j_all(u: [&SpectralDensity; 4], s: &Vec3, cfg: &KineticConfig) -> Result<[f64; 4]> {
    cfg.validate()?;
    let f1 = evaluator(u[0])?;
    let f2 = evaluator(u[1])?;
    let f3 = evaluator(u[2])?;
    let u4 = evaluator(u[3])?(s);
    let qm = cfg.measure(s);
    // integrands averaged with their x ↔ y mirror, so the rule is
    // symmetric under s₁ ↔ s₂
    quadric_integrate_many(
        |x, y| {
            let (s1, s2, s3) = shifted(s, x, y);
            let (a, b, c) = (f1(&s1), f2(&s2), f3(&s3));
            let (am, bm) = (f1(&s2), f2(&s1));
            let cu = 0.5 * c * u4;
            let ab = a * b + am * bm;
            [cu * (b + bm), cu * (a + am), 0.5 * u4 * ab, 0.5 * c * ab]
        },
        &qm,
    )
}

/// J_l(u¹, u², u³, u⁴)(s): the integral of Π_{j≠l} u^j, l ∈ {1, 2, 3, 4}.
pub fn j_l(u: [&SpectralDensity; 4], l: usize, s: &Vec3, cfg: &KineticConfig) -> Result<f64> {
    if !(1..=4).contains(&l) {
        return config(format!("J index {l} outside 1..=4"));
    }
    Ok(j_all(u, s, cfg)?[l - 1])
}

/// K(v) on the nodes of a radial profile, the output s running along the
/// first axis.
pub fn k_on_radial(v: &RadialDensity, cfg: &KineticConfig) -> Result<RadialDensity> {
    let dens = SpectralDensity::Radial(v.clone());
    let radii: Vec<f64> = v.radii().collect();
    let vals: Result<Vec<f64>> = radii
        .par_iter()
        .map(|&rho| k_apply(&dens, &[rho, 0.0, 0.0], cfg))
        .collect();
    Ok(RadialDensity::from_values(v.spacing(), vals?))
}

/// K(u) materialised on the grid of u: radial nodes, or lazily for a
/// continuum density (same probe set).
pub fn k_materialize(u: &SpectralDensity, cfg: &KineticConfig) -> Result<SpectralDensity> {
    cfg.validate()?;
    match u {
        SpectralDensity::Radial(r) => Ok(SpectralDensity::Radial(k_on_radial(r, cfg)?)),
        SpectralDensity::Continuum { probes, .. } => {
            let src = u.clone();
            let c = *cfg;
            Ok(SpectralDensity::Continuum {
                eval: Arc::new(move |s: &Vec3| k_apply(&src, s, &c).unwrap_or(f64::NAN)),
                probes: probes.clone(),
            })
        }
        SpectralDensity::Lattice { .. } => config("kinetic integrals need a continuum or radial density"),
    }
}

/// (1 − e^{−2γτ})/(2γ); the τ = ∞ limit is 1/(2γ).
#[inline]
pub fn smoothing_factor(gamma: f64, tau: f64) -> f64 {
    if tau.is_infinite() {
        return 0.5 / gamma;
    }
    -(-2.0 * gamma * tau).exp_m1() / (2.0 * gamma)
}

/// K^τ(u) on the nodes of a radial profile.
pub fn k_tau(
    u: &RadialDensity,
    tau: f64,
    profiles: &Profiles,
    cfg: &KineticConfig,
) -> Result<RadialDensity> {
    if !(tau > 0.0) {
        return config(format!("smoothing time {tau} must be positive"));
    }
    let k = k_on_radial(u, cfg)?;
    Ok(k.map(|rho, v| smoothing_factor(profiles.gamma(rho * rho), tau) * v))
}

/// |K(v)|_{r_out} on `n` log-spaced probes with ⟨s⟩ ≤ 40.
pub fn kinetic_norm(v: &SpectralDensity, r_out: f64, n: usize, cfg: &KineticConfig) -> Result<f64> {
    let probes = radial_probes(n, 40.0);
    let vals: Result<Vec<f64>> = probes
        .par_iter()
        .map(|p| Ok(k_apply(v, p, cfg)?.abs() * bracket(norm2(p)).powf(r_out)))
        .collect();
    Ok(vals?.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::GaussLegendre;

    fn algebraic(c: f64, r: f64) -> SpectralDensity {
        SpectralDensity::Continuum {
            eval: Arc::new(move |s: &Vec3| c * (1.0 + norm2(s)).powf(-0.5 * r)),
            probes: radial_probes(24, 40.0),
        }
    }

    fn gaussian(c: f64, w: f64) -> SpectralDensity {
        SpectralDensity::Continuum {
            eval: Arc::new(move |s: &Vec3| c * (-w * norm2(s)).exp()),
            probes: radial_probes(24, 40.0),
        }
    }

    #[test]
    fn zero_and_homogeneity() {
        let cfg = KineticConfig::compact(2, 3.0, 6.0);
        let s = [0.4, 0.3, 0.0];
        assert_eq!(k_apply(&gaussian(0.0, 1.0), &s, &cfg).unwrap(), 0.0);
        let a = k_apply(&gaussian(1.0, 0.7), &s, &cfg).unwrap();
        let b = k_apply(&gaussian(2.0, 0.7), &s, &cfg).unwrap();
        assert_eq!(b, 8.0 * a);
    }

    #[test]
    fn parts_sum_and_swap() {
        let cfg = KineticConfig::compact(2, 3.0, 6.0);
        let v = gaussian(1.0, 0.5);
        for s in [[0.0, 0.0, 0.0], [1.1, -0.4, 0.0]] {
            let p = k_parts(&v, &s, &cfg).unwrap();
            let k = k_apply(&v, &s, &cfg).unwrap();
            assert!((p.iter().sum::<f64>() - k).abs() < 1e-12 * p[3].abs().max(1.0));
            assert!((p[0] - p[1]).abs() < 1e-10 * p[0].abs());
        }
        let p0 = k_parts(&v, &[0.0; 3], &cfg).unwrap();
        assert!(p0[3] > 0.0 && p0[0] < 0.0);
    }

    #[test]
    fn multilinearity_of_j() {
        let cfg = KineticConfig::compact(2, 3.0, 6.0);
        let g = gaussian(1.0, 0.6);
        let g2 = gaussian(2.0, 0.6);
        let z = gaussian(0.0, 0.6);
        let s = [0.5, 0.0, 0.0];
        let a = j_l([&g, &g, &g, &g], 2, &s, &cfg).unwrap();
        let b = j_l([&g2, &g, &g, &g], 2, &s, &cfg).unwrap();
        assert_eq!(b, 2.0 * a);
        assert_eq!(j_l([&g, &z, &g, &g], 1, &s, &cfg).unwrap(), 0.0);
        assert!(j_l([&g, &g, &g, &g], 5, &s, &cfg).is_err());
    }

    #[test]
    fn rejects_small_r_and_lattice() {
        let cfg = KineticConfig::algebraic(2, 2.0);
        assert!(k_apply(&algebraic(1.0, 3.0), &[0.0; 3], &cfg).is_err());
    }

    // Direct parametrisation of Σ for d = 2: y = ℓ x̂^⊥, μ^Σ = dr dθ dℓ,
    // with r = tan α and ℓ = tan β on open intervals.
    fn surface_oracle(f: &dyn Fn(&Vec3) -> f64, s: &Vec3) -> f64 {
        let gl = GaussLegendre::new(24);
        let panels = 24;
        let mut acc = 0.0;
        let nth = 96;
        for pa in 0..panels {
            let a0 = 0.5 * PI * pa as f64 / panels as f64;
            let a1 = 0.5 * PI * (pa + 1) as f64 / panels as f64;
            for (al, wa) in gl.mapped(a0, a1) {
                let r = al.tan();
                let jr = 1.0 / (al.cos() * al.cos());
                for pb in 0..2 * panels {
                    let b0 = -0.5 * PI + PI * pb as f64 / (2 * panels) as f64;
                    let b1 = -0.5 * PI + PI * (pb + 1) as f64 / (2 * panels) as f64;
                    for (be, wb) in gl.mapped(b0, b1) {
                        let l = be.tan();
                        let jl = 1.0 / (be.cos() * be.cos());
                        for k in 0..nth {
                            let th = 2.0 * PI * (k as f64 + 0.5) / nth as f64;
                            let (c, sn) = (th.cos(), th.sin());
                            let x = [r * c, r * sn, 0.0];
                            let y = [-l * sn, l * c, 0.0];
                            let (s1, s2, s3) = shifted(s, &x, &y);
                            let g = kinetic_bracket(f(&s1), f(&s2), f(&s3), f(s));
                            acc += wa * jr * wb * jl * (2.0 * PI / nth as f64) * g;
                        }
                    }
                }
            }
        }
        2.0 * PI * acc
    }

    #[test]
    fn algebraic_density_matches_surface_oracle() {
        let cfg = KineticConfig::algebraic(2, 3.0);
        let v = algebraic(1.0, 3.0);
        let f = |p: &Vec3| (1.0 + norm2(p)).powf(-1.5);
        for s in [[0.0, 0.0, 0.0], [0.7, 0.0, 0.0]] {
            let k = k_apply(&v, &s, &cfg).unwrap();
            let o = surface_oracle(&f, &s);
            assert!((k - o).abs() < 1e-4 * o.abs(), "s={s:?} k={k} oracle={o}");
        }
    }

    #[test]
    fn k_tau_prefactor() {
        let pr = Profiles::default();
        let cfg = KineticConfig::compact(2, 3.0, 5.0);
        let u = RadialDensity::from_fn(0.25, 17, |r| pr.big_b(r * r));
        let k = k_on_radial(&u, &cfg).unwrap();
        let tau = 1e-4;
        let kt = k_tau(&u, tau, &pr, &cfg).unwrap();
        for (i, rho) in u.radii().enumerate() {
            let g = pr.gamma(rho * rho);
            let rel = (kt.values()[i] / tau - k.values()[i]).abs() / k.values()[i].abs();
            assert!(rel < 2.0 * g * tau);
            // ∫₀^τ e^{−2γt} dt by 20-node quadrature
            let gl = GaussLegendre::new(20);
            let q: f64 = gl.mapped(0.0, 0.7).map(|(t, w)| w * (-2.0 * g * t).exp()).sum();
            assert!((q - smoothing_factor(g, 0.7)).abs() < 1e-10);
        }
        assert_eq!(smoothing_factor(2.0, f64::INFINITY), 0.25);
    }
}
