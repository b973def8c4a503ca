//! The damped/driven wave kinetic equation
//! ṁ_s = −2γ_s m_s + εK(m)(s) + 2b_s² on radial profiles: time stepping,
//! steady states, relaxation rates and the expansion m = u⁰ + εu¹ + O(ε²).

use crate::error::{config, Error, Result};
use crate::kinetic_operator::{k_on_radial, KineticConfig};
use crate::numerics::{line_fit, phi1_real, GaussLegendre};
use crate::spectral_domain::{Horizon, Profiles, RadialDensity};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Exponential Euler with K frozen at the step start.
    #[default]
    ExpEuler,
    /// Two-stage exponential Runge–Kutta (ETD-RK2).
    Etd2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WkeConfig {
    pub profiles: Profiles,
    pub kinetic: KineticConfig,
    /// Radial grid: spacing and node count.
    pub dr: f64,
    pub nodes: usize,
    pub h: f64,
    pub scheme: Scheme,
    pub eps_max: f64,
    /// Norm index r of |·|_r.
    pub norm_r: f64,
}

impl WkeConfig {
    /// h = 0.02, exponential Euler, ε_max = 0.25, grid to ρ = 5.
    pub fn new(profiles: Profiles, d: usize, norm_r: f64) -> Self {
        let support = 5.0;
        Self {
            profiles,
            kinetic: KineticConfig::compact(d, norm_r, support),
            dr: 0.25,
            nodes: 21,
            h: 0.02,
            scheme: Scheme::ExpEuler,
            eps_max: 0.25,
            norm_r,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.profiles.validate()?;
        self.kinetic.validate()?;
        if !(self.h > 0.0) || !(self.dr > 0.0) || self.nodes < 3 {
            return config("WKE step and grid must be positive with at least 3 nodes");
        }
        if !(self.eps_max >= 0.0) {
            return config("eps_max must be nonnegative");
        }
        Ok(())
    }

    fn check_eps(&self, eps: f64) -> Result<()> {
        if !(eps >= 0.0) || eps > self.eps_max {
            return config(format!("ε = {eps} outside [0, ε_max = {}]", self.eps_max));
        }
        Ok(())
    }

    fn radial(&self, f: impl Fn(f64) -> f64) -> RadialDensity {
        RadialDensity::from_fn(self.dr, self.nodes, f)
    }

    /// 2γ_s on the grid.
    fn rate(&self) -> Vec<f64> {
        (0..self.nodes)
            .map(|i| {
                let rho = self.dr * i as f64;
                2.0 * self.profiles.gamma(rho * rho)
            })
            .collect()
    }

    /// f = 2b² on the grid.
    fn forcing(&self) -> Vec<f64> {
        (0..self.nodes)
            .map(|i| {
                let rho = self.dr * i as f64;
                2.0 * self.profiles.b(rho * rho).powi(2)
            })
            .collect()
    }

    fn norm(&self, v: &[f64]) -> f64 {
        RadialDensity::from_values(self.dr, v.to_vec()).weighted_norm(self.norm_r)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WkeState {
    pub m: RadialDensity,
    pub tau: f64,
    pub eps: f64,
}

impl WkeState {
    pub fn zero(cfg: &WkeConfig, tau: f64, eps: f64) -> Self {
        Self {
            m: cfg.radial(|_| 0.0),
            tau,
            eps,
        }
    }
}

/// K(m) on the nodes (zero without nonlinearity).
fn kinetic(m: &[f64], eps: f64, cfg: &WkeConfig) -> Result<Vec<f64>> {
    if eps == 0.0 {
        return Ok(vec![0.0; m.len()]);
    }
    let k = k_on_radial(&RadialDensity::from_values(cfg.dr, m.to_vec()), &cfg.kinetic)?;
    Ok(k.values().to_vec())
}

/// One step of length h.
pub fn wke_step(state: &WkeState, h: f64, cfg: &WkeConfig) -> Result<WkeState> {
    if !(h > 0.0) {
        return config(format!("step {h} must be positive"));
    }
    cfg.check_eps(state.eps)?;
    let m = state.m.values();
    if m.len() != cfg.nodes || (state.m.spacing() - cfg.dr).abs() > 1e-15 {
        return config("state grid differs from the solver grid");
    }
    let c = cfg.rate();
    let f = cfg.forcing();
    let eps = state.eps;
    let k0 = kinetic(m, eps, cfg)?;
    // m ↦ e^{−ch}m + hφ₁(−ch)(f + εK)
    let euler: Vec<f64> = (0..m.len())
        .map(|i| (-c[i] * h).exp() * m[i] + h * phi1_real(-c[i] * h) * (f[i] + eps * k0[i]))
        .collect();
    let next = match cfg.scheme {
        Scheme::ExpEuler => euler,
        Scheme::Etd2 => {
            let k1 = kinetic(&euler, eps, cfg)?;
            (0..m.len())
                .map(|i| euler[i] + h * phi2_real(-c[i] * h) * eps * (k1[i] - k0[i]))
                .collect()
        }
    };
    let n_old = cfg.norm(m);
    let n_new = cfg.norm(&next);
    let scale = cfg.norm(&f.iter().zip(&c).map(|(f, c)| f / c).collect::<Vec<_>>());
    if !n_new.is_finite() || (n_new > 2.0 * n_old && n_new > 2.0 * scale) {
        return Err(Error::Numeric(format!(
            "WKE norm blow-up at τ = {}: {n_old} → {n_new}",
            state.tau + h
        )));
    }
    Ok(WkeState {
        m: RadialDensity::from_values(cfg.dr, next),
        tau: state.tau + h,
        eps,
    })
}

/// φ₂(x) = (eˣ − 1 − x)/x².
fn phi2_real(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        0.5 + x / 6.0 + x * x / 24.0
    } else {
        (x.exp_m1() - x) / (x * x)
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub states: Vec<WkeState>,
    /// max_τ |m(τ)|_r.
    pub max_norm: f64,
    /// Most negative value seen (0 when the solution stayed nonnegative).
    pub min_value: f64,
}

impl Trajectory {
    pub fn last(&self) -> &WkeState {
        self.states.last().expect("trajectory holds the initial state")
    }
}

/// Steps from `initial` to `tau_end` on the grid τ₀ + kh, the last step
/// shortened to land on `tau_end`.
pub fn wke_solve(initial: &WkeState, tau_end: f64, cfg: &WkeConfig) -> Result<Trajectory> {
    cfg.validate()?;
    if tau_end < initial.tau {
        return config("τ_end precedes the initial time");
    }
    let span = tau_end - initial.tau;
    let n = (span / cfg.h - 1e-9).ceil().max(0.0) as usize;
    let mut states = Vec::with_capacity(n + 1);
    states.push(initial.clone());
    let mut max_norm = initial.m.weighted_norm(cfg.norm_r);
    let mut min_value = initial.m.values().iter().copied().fold(0.0, f64::min);
    for k in 0..n {
        let cur = states.last().unwrap();
        let t_next = if k + 1 == n { tau_end } else { initial.tau + (k + 1) as f64 * cfg.h };
        let mut next = wke_step(cur, t_next - cur.tau, cfg)?;
        next.tau = t_next;
        max_norm = max_norm.max(next.m.weighted_norm(cfg.norm_r));
        min_value = next.m.values().iter().copied().fold(min_value, f64::min);
        states.push(next);
    }
    Ok(Trajectory { states, max_norm, min_value })
}

#[derive(Clone, Debug)]
pub struct SteadyState {
    pub m: RadialDensity,
    /// |−ℒm + εK(m) + f|_r at the returned state.
    pub residual: f64,
    pub iterations: usize,
    /// |m − m⁰|_r.
    pub deviation: f64,
}

/// Picard iteration u ↦ ℒ⁻¹(εK(u) + f) from u⁰ = ℒ⁻¹f = b²/γ.
pub fn steady_state(eps: f64, cfg: &WkeConfig, tol: f64) -> Result<SteadyState> {
    cfg.validate()?;
    cfg.check_eps(eps)?;
    let c = cfg.rate();
    let f = cfg.forcing();
    let u0: Vec<f64> = f.iter().zip(&c).map(|(f, c)| f / c).collect();
    let mut u = u0.clone();
    let mut k = kinetic(&u, eps, cfg)?;
    let mut last_gap = f64::INFINITY;
    for it in 0..200 {
        let res: Vec<f64> = (0..u.len()).map(|i| -c[i] * u[i] + eps * k[i] + f[i]).collect();
        let residual = cfg.norm(&res);
        if residual <= tol {
            let dev: Vec<f64> = u.iter().zip(&u0).map(|(a, b)| a - b).collect();
            return Ok(SteadyState {
                deviation: cfg.norm(&dev),
                m: RadialDensity::from_values(cfg.dr, u),
                residual,
                iterations: it,
            });
        }
        let next: Vec<f64> = (0..u.len()).map(|i| (eps * k[i] + f[i]) / c[i]).collect();
        let gap = cfg.norm(&next.iter().zip(&u).map(|(a, b)| a - b).collect::<Vec<_>>());
        if gap > last_gap && it > 1 {
            return Err(Error::Regime(format!(
                "Picard iteration does not contract at ε = {eps}; use a smaller ε"
            )));
        }
        last_gap = gap;
        u = next;
        k = kinetic(&u, eps, cfg)?;
    }
    Err(Error::Regime(format!("Picard iteration did not reach {tol} at ε = {eps}")))
}

#[derive(Clone, Debug, Serialize)]
pub struct RateFit {
    pub rate: f64,
    pub rate_stderr: f64,
    pub taus: Vec<f64>,
    pub log_gaps: Vec<f64>,
}

/// Evolves m^ε + δm to `tau_end` and fits −d/dτ log|m(τ) − m^ε|_r over
/// τ ≥ `fit_from`.
pub fn stability_rate(
    steady: &RadialDensity,
    eps: f64,
    dm: &RadialDensity,
    tau_end: f64,
    fit_from: f64,
    cfg: &WkeConfig,
) -> Result<RateFit> {
    let start = WkeState {
        m: RadialDensity::from_values(
            cfg.dr,
            steady.values().iter().zip(dm.values()).map(|(a, b)| a + b).collect(),
        ),
        tau: 0.0,
        eps,
    };
    let traj = wke_solve(&start, tau_end, cfg)?;
    let mut taus = Vec::new();
    let mut logs = Vec::new();
    for s in &traj.states {
        if s.tau + 1e-12 < fit_from {
            continue;
        }
        let gap: Vec<f64> = s.m.values().iter().zip(steady.values()).map(|(a, b)| a - b).collect();
        let g = cfg.norm(&gap);
        if g > 0.0 {
            taus.push(s.tau);
            logs.push(g.ln());
        }
    }
    if taus.len() < 3 {
        return config("too few points for a rate fit");
    }
    let fit = line_fit(&taus, &logs);
    Ok(RateFit {
        rate: -fit.slope,
        rate_stderr: fit.slope_stderr,
        taus,
        log_gaps: logs,
    })
}

/// u⁰(τ) and u¹(τ) at the requested times.
#[derive(Clone, Debug)]
pub struct EpsExpansion {
    pub taus: Vec<f64>,
    pub u0: Vec<RadialDensity>,
    pub u1: Vec<RadialDensity>,
}

impl EpsExpansion {
    /// u⁰ + εu¹ at time index k.
    pub fn first_order(&self, k: usize, eps: f64) -> RadialDensity {
        let v = self.u0[k]
            .values()
            .iter()
            .zip(self.u1[k].values())
            .map(|(a, b)| a + eps * b)
            .collect();
        RadialDensity::from_values(self.u0[k].spacing(), v)
    }
}

/// u⁰ = n⁽⁰⁾ and u¹(τ) = ∫_{−T}^τ e^{−(τ−l)ℒ} K(u⁰(l)) dl. The Duhamel integral
/// is advanced interval by interval with `nodes`-point Gauss–Legendre.
/// For T = ∞, u⁰ = b²/γ and u¹ = ℒ⁻¹K(u⁰) at every time.
pub fn eps_expansion(taus: &[f64], horizon: Horizon, nodes: usize, cfg: &WkeConfig) -> Result<EpsExpansion> {
    cfg.validate()?;
    if taus.windows(2).any(|w| w[1] < w[0]) {
        return config("expansion times must not decrease");
    }
    let c = cfg.rate();
    let prof = &cfg.profiles;
    let u0_at = |l: f64| -> Vec<f64> {
        (0..cfg.nodes)
            .map(|i| {
                let rho = cfg.dr * i as f64;
                crate::base_process::n0_spectrum(rho * rho, l, prof, horizon)
            })
            .collect()
    };
    let mut out = EpsExpansion { taus: taus.to_vec(), u0: Vec::new(), u1: Vec::new() };
    match horizon {
        Horizon::Infinite => {
            let u0 = u0_at(0.0);
            let k = kinetic(&u0, 1.0, cfg)?;
            let u1: Vec<f64> = k.iter().zip(&c).map(|(k, c)| k / c).collect();
            for _ in taus {
                out.u0.push(RadialDensity::from_values(cfg.dr, u0.clone()));
                out.u1.push(RadialDensity::from_values(cfg.dr, u1.clone()));
            }
        }
        Horizon::Finite(t) => {
            if taus.first().is_some_and(|&v| v < -t) {
                return config("expansion time precedes −T");
            }
            let gl = GaussLegendre::new(nodes.max(2));
            let mut u1 = vec![0.0; cfg.nodes];
            let mut t_prev = -t;
            for &tau in taus {
                if tau > t_prev {
                    for i in 0..cfg.nodes {
                        u1[i] *= (-c[i] * (tau - t_prev)).exp();
                    }
                    // the integrand starts like (l + T)², so two panels suffice
                    for (l, w) in gl.mapped(t_prev, tau) {
                        let k = kinetic(&u0_at(l), 1.0, cfg)?;
                        for i in 0..cfg.nodes {
                            u1[i] += w * (-c[i] * (tau - l)).exp() * k[i];
                        }
                    }
                    t_prev = tau;
                }
                out.u0.push(RadialDensity::from_values(cfg.dr, u0_at(tau)));
                out.u1.push(RadialDensity::from_values(cfg.dr, u1.clone()));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> WkeConfig {
        let mut c = WkeConfig::new(Profiles::default(), 2, 3.0);
        c.dr = 0.3;
        c.nodes = 15;
        c
    }

    #[test]
    fn linear_problem_is_exact() {
        let c = cfg();
        let t = 0.7;
        let traj = wke_solve(&WkeState::zero(&c, -t, 0.0), 0.45, &c).unwrap();
        for s in &traj.states {
            for (i, rho) in s.m.radii().enumerate() {
                let want = crate::base_process::n0_spectrum(rho * rho, s.tau, &c.profiles, Horizon::Finite(t));
                assert!((s.m.values()[i] - want).abs() < 1e-12);
            }
        }
        let st = steady_state(0.0, &c, 1e-12).unwrap();
        for (i, rho) in st.m.radii().enumerate() {
            assert_eq!(st.m.values()[i], c.profiles.b(rho * rho).powi(2) / c.profiles.gamma(rho * rho));
        }
    }

    #[test]
    fn pure_decay_contracts() {
        let c = cfg();
        let m = RadialDensity::from_fn(c.dr, c.nodes, |r| (-r * r).exp());
        let mut c0 = c.clone();
        c0.profiles.forcing.beta = 0.0;
        let traj = wke_solve(&WkeState { m: m.clone(), tau: 0.0, eps: 0.0 }, 1.0, &c0).unwrap();
        let n0 = m.weighted_norm(3.0);
        for s in &traj.states {
            assert!(s.m.weighted_norm(3.0) <= (-2.0 * s.tau).exp() * n0 * (1.0 + 1e-12));
        }
    }

    #[test]
    fn restart_matches_straight_run() {
        let c = cfg();
        let s0 = WkeState::zero(&c, -0.2, 0.1);
        let a = wke_solve(&s0, 0.1, &c).unwrap();
        let mid = wke_solve(&s0, -0.1, &c).unwrap();
        let b = wke_solve(mid.last(), 0.1, &c).unwrap();
        for (x, y) in a.last().m.values().iter().zip(b.last().m.values()) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn steady_state_residual_and_fixed_point() {
        let c = cfg();
        let st = steady_state(0.05, &c, 1e-8).unwrap();
        assert!(st.residual <= 1e-8);
        let next = wke_step(&WkeState { m: st.m.clone(), tau: 0.0, eps: 0.05 }, c.h, &c).unwrap();
        for (a, b) in next.m.values().iter().zip(st.m.values()) {
            assert!((a - b).abs() < 1e-8);
        }
        assert!(steady_state(0.5, &c, 1e-8).is_err());
    }

    #[test]
    fn frozen_k_step_is_first_order() {
        let c = cfg();
        let eps = 0.2;
        let m = RadialDensity::from_fn(c.dr, c.nodes, |r| 0.6 * (-r * r).exp());
        let s = WkeState { m, tau: 0.0, eps };
        let big = 0.2;
        // reference: 4 ETD2 substeps
        let mut rc = c.clone();
        rc.scheme = Scheme::Etd2;
        let mut r = s.clone();
        for _ in 0..4 {
            r = wke_step(&r, big / 4.0, &rc).unwrap();
        }
        let mut defects = Vec::new();
        for h in [big, big / 2.0] {
            let mut x = s.clone();
            let n = (big / h).round() as usize;
            for _ in 0..n {
                x = wke_step(&x, h, &c).unwrap();
            }
            let d: f64 = x.m.values().iter().zip(r.m.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            defects.push(d);
        }
        let ratio = defects[0] / defects[1];
        assert!(ratio > 1.6 && ratio < 2.6, "{defects:?}");
    }

    #[test]
    fn expansion_starts_at_zero_and_matches_linear_part() {
        let c = cfg();
        let e = eps_expansion(&[-0.5, -0.3, 0.0], Horizon::Finite(0.5), 6, &c).unwrap();
        assert!(e.u1[0].values().iter().all(|&v| v == 0.0));
        for (k, &tau) in e.taus.iter().enumerate() {
            for (i, rho) in e.u0[k].radii().enumerate() {
                let want = crate::base_process::n0_spectrum(rho * rho, tau, &c.profiles, Horizon::Finite(0.5));
                assert_eq!(e.u0[k].values()[i], want);
            }
        }
        assert!(e.u1[2].values()[0] != 0.0);
    }
}
