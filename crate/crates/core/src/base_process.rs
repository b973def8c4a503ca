//! The order-zero process a⁽⁰⁾: independent complex Ornstein–Uhlenbeck
//! modes da = −γ_s a dτ + b(s) dβ_s with Re β, Im β standard Wiener.

use crate::error::{config, Result};
use crate::spectral_domain::{norm2, Horizon, LatticeSpec, PhysicalParams, Profiles};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Stream tags used in noise keys.
pub mod part {
    pub const A0_INIT: u64 = 0;
    pub const A0_PATH: u64 = 1;
}

/// Keyed source of independent Gaussian streams. Each key
/// (mode, sample, part) seeds its own ChaCha8 generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NoiseStream {
    pub master_seed: u64,
}

impl NoiseStream {
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed }
    }

    pub fn rng(&self, mode: u64, sample: u64, part: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.master_seed.to_le_bytes());
        key[8..16].copy_from_slice(&mode.to_le_bytes());
        key[16..24].copy_from_slice(&sample.to_le_bytes());
        key[24..].copy_from_slice(&part.to_le_bytes());
        ChaCha8Rng::from_seed(key)
    }
}

/// Complex Gaussian with E|ξ|² = var.
#[inline]
pub fn complex_normal<R: Rng>(rng: &mut R, var: f64) -> C64 {
    let sd = (0.5 * var).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(sd * re, sd * im)
}

/// Exact OU transition over a step h for one mode.
#[derive(Clone, Copy, Debug)]
pub struct OuStep {
    pub decay: f64,
    pub var: f64,
}

impl OuStep {
    pub fn new(gamma: f64, big_b: f64, h: f64) -> Self {
        Self {
            decay: (-gamma * h).exp(),
            var: big_b * (-(-2.0 * gamma * h).exp_m1()),
        }
    }

    #[inline]
    pub fn advance<R: Rng>(&self, a: C64, rng: &mut R) -> C64 {
        a * self.decay + complex_normal(rng, self.var)
    }
}

/// Per-mode paths on a common time grid. `a1`/`a2` are filled by the
/// Duhamel routines in `chaos_expansion`. Layout: `[time][mode]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChaosSample {
    pub sample_id: u64,
    pub times: Vec<f64>,
    pub n_modes: usize,
    pub a0: Vec<C64>,
    pub a1: Option<Vec<C64>>,
    pub a2: Option<Vec<C64>>,
}

impl ChaosSample {
    #[inline]
    pub fn at(path: &[C64], n_modes: usize, k: usize) -> &[C64] {
        &path[k * n_modes..(k + 1) * n_modes]
    }

    pub fn a0_at(&self, k: usize) -> &[C64] {
        Self::at(&self.a0, self.n_modes, k)
    }

    /// Scales every stored path by c^{2n+1} for chaos order n.
    pub fn scale_orders(&mut self, c: f64) {
        for v in &mut self.a0 {
            *v *= c;
        }
        for (path, p) in [(&mut self.a1, 3), (&mut self.a2, 5)] {
            if let Some(v) = path {
                let f = c.powi(p);
                for z in v.iter_mut() {
                    *z *= f;
                }
            }
        }
    }
}

fn check_times(times: &[f64], params: &PhysicalParams) -> Result<()> {
    if times.is_empty() {
        return config("time grid is empty");
    }
    for w in times.windows(2) {
        if !(w[1] > w[0]) {
            return config("times must be strictly increasing");
        }
    }
    if let Horizon::Finite(t) = params.horizon {
        if times[0] < -t - 1e-12 {
            return config(format!("first time {} precedes -T = {}", times[0], -t));
        }
    }
    Ok(())
}

/// Samples a⁽⁰⁾ on `times` for every lattice mode.
///
/// Finite T: the path starts from 0 at −T. Infinite T: the first point is
/// drawn from the stationary law CN(0, B(s)).
pub fn sample_a0(
    lattice: &LatticeSpec,
    profiles: &Profiles,
    params: &PhysicalParams,
    noise: &NoiseStream,
    sample_id: u64,
    times: &[f64],
) -> Result<ChaosSample> {
    check_times(times, params)?;
    let nm = lattice.len();
    let mut a0 = vec![C64::new(0.0, 0.0); nm * times.len()];
    for (j, m) in lattice.modes().iter().enumerate() {
        let y = norm2(&m.s);
        let g = profiles.gamma(y);
        let bb = profiles.big_b(y);
        let mut rng = noise.rng(j as u64, sample_id, part::A0_PATH);
        let mut a = match params.horizon {
            Horizon::Infinite => complex_normal(&mut rng, bb),
            Horizon::Finite(t) => {
                let h = times[0] + t;
                if h > 0.0 {
                    OuStep::new(g, bb, h).advance(C64::new(0.0, 0.0), &mut rng)
                } else {
                    C64::new(0.0, 0.0)
                }
            }
        };
        a0[j] = a;
        for k in 1..times.len() {
            a = OuStep::new(g, bb, times[k] - times[k - 1]).advance(a, &mut rng);
            a0[k * nm + j] = a;
        }
    }
    Ok(ChaosSample {
        sample_id,
        times: times.to_vec(),
        n_modes: nm,
        a0,
        a1: None,
        a2: None,
    })
}

/// E a⁽⁰⁾_s(τ₁) conj(a⁽⁰⁾_{s'}(τ₂)) for a mode pair identified by equality.
pub fn corr_a0(
    same_mode: bool,
    gamma: f64,
    big_b: f64,
    tau1: f64,
    tau2: f64,
    horizon: Horizon,
) -> C64 {
    if !same_mode {
        return C64::new(0.0, 0.0);
    }
    let stat = (-gamma * (tau1 - tau2).abs()).exp();
    let v = match horizon {
        Horizon::Infinite => stat,
        Horizon::Finite(t) => stat - (-gamma * (2.0 * t + tau1 + tau2)).exp(),
    };
    C64::new(big_b * v, 0.0)
}

/// E a⁽⁰⁾ a⁽⁰⁾ without conjugate: identically zero for circular noise.
pub fn corr_a0_unconjugated() -> C64 {
    C64::new(0.0, 0.0)
}

/// n⁽⁰⁾_s(τ) = B(s)(1 − e^{−2γ_s(T+τ)}) for |s|² = y.
pub fn n0_spectrum(y: f64, tau: f64, profiles: &Profiles, horizon: Horizon) -> f64 {
    let bb = profiles.big_b(y);
    match horizon {
        Horizon::Infinite => bb,
        Horizon::Finite(t) => bb * (-(-2.0 * profiles.gamma(y) * (t + tau)).exp_m1()),
    }
}
