//! Duhamel iterates a⁽¹⁾, a⁽²⁾ driven by sampled a⁽⁰⁾ paths, Monte Carlo
//! spectra of the quasisolution A = a⁽⁰⁾ + ρa⁽¹⁾ + ρ²a⁽²⁾, and the
//! diagonal correction Δ¹.
//!
//! Time stepping: each step of length h has its envelope frozen at the
//! midpoint, where a⁽⁰⁾ is sampled exactly. The cubic mode sum is either a
//! circular convolution on a padded FFT grid (interaction frame
//! b_k = a_k e^{i|k|²l/ν}) or an explicit list of δ' triples.

use crate::base_process::{complex_normal, part, ChaosSample, NoiseStream, OuStep};
use crate::error::{config, Error, Result};
use crate::spectral_domain::{norm2, Horizon, LatticeSpec, PhysicalParams, Profiles};
use num_complex::Complex64 as C64;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvolutionMethod {
    Fft,
    Direct,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseRule {
    /// Whole integrand at the step midpoint.
    Midpoint,
    /// Envelope at the midpoint, e^{iν⁻¹ωl} integrated exactly per triple.
    ExactPhase,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DuhamelConfig {
    pub h_osc: f64,
    /// Lower integration limit −T_eff used when T = ∞.
    pub t_eff: f64,
    pub method: ConvolutionMethod,
    pub phase_rule: PhaseRule,
}

impl DuhamelConfig {
    /// h_osc = ν/5, T_eff = 6/min γ.
    pub fn for_params(params: &PhysicalParams, profiles: &Profiles) -> Self {
        Self {
            h_osc: params.nu / 5.0,
            t_eff: 6.0 / profiles.gamma(0.0),
            method: ConvolutionMethod::Fft,
            phase_rule: PhaseRule::Midpoint,
        }
    }

    pub fn validate(&self, params: &PhysicalParams) -> Result<()> {
        if !(self.h_osc > 0.0) || self.h_osc > params.nu / 4.0 + 1e-15 {
            return config(format!(
                "h_osc = {} must lie in (0, nu/4 = {}]",
                self.h_osc,
                params.nu / 4.0
            ));
        }
        if !(self.t_eff > 0.0) || !self.t_eff.is_finite() {
            return config("t_eff must be positive");
        }
        if self.method == ConvolutionMethod::Fft && self.phase_rule == PhaseRule::ExactPhase {
            return config("the exact-phase rule needs the direct summation path");
        }
        Ok(())
    }
}

/// Padded FFT grid evaluating Σ_{n₁+n₂−n₃=n} f g h̄ for all retained n.
pub struct CubicConvolver {
    d: usize,
    m: usize,
    band: usize,
    cells: Vec<usize>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    grid0: Vec<C64>,
    grid1: Vec<C64>,
    line: Vec<C64>,
    scratch: Vec<C64>,
}

impl CubicConvolver {
    pub fn new(lattice: &LatticeSpec) -> Self {
        let d = lattice.dim();
        let band = lattice.nmax() as usize;
        let m = 4 * band + 1;
        let cells = lattice
            .modes()
            .iter()
            .map(|md| {
                (0..d).fold(0usize, |acc, k| {
                    acc * m + md.index[k].rem_euclid(m as i64) as usize
                })
            })
            .collect();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(m);
        let inv = planner.plan_fft_inverse(m);
        let scratch_len = fwd
            .get_inplace_scratch_len()
            .max(inv.get_inplace_scratch_len());
        let total = m.pow(d as u32);
        Self {
            d,
            m,
            band,
            cells,
            fwd,
            inv,
            grid0: vec![ZERO; total],
            grid1: vec![ZERO; total],
            line: vec![ZERO; m],
            scratch: vec![ZERO; scratch_len],
        }
    }

    pub fn grid_size(&self) -> usize {
        self.m
    }

    #[inline]
    fn in_band(&self, c: usize) -> bool {
        c <= self.band || c + self.band >= self.m
    }

    /// Transforms `grid` along every axis. `to_space` runs the inverse
    /// transform starting from band-limited data; otherwise only the band
    /// of the output is guaranteed.
    fn transform(
        d: usize,
        m: usize,
        band: usize,
        grid: &mut [C64],
        line: &mut [C64],
        scratch: &mut [C64],
        plan: &Arc<dyn Fft<f64>>,
        to_space: bool,
    ) {
        let in_band = |c: usize| c <= band || c + band >= m;
        let axes: Vec<usize> = if to_space {
            (0..d).rev().collect()
        } else {
            (0..d).collect()
        };
        for &axis in &axes {
            let stride = m.pow((d - 1 - axis) as u32);
            let n_lines = m.pow((d - 1) as u32);
            for li in 0..n_lines {
                // decompose li into the coordinates of the other axes
                let mut rem = li;
                let mut base = 0usize;
                let mut active = true;
                for k in (0..d).rev() {
                    if k == axis {
                        continue;
                    }
                    let c = rem % m;
                    rem /= m;
                    base += c * m.pow((d - 1 - k) as u32);
                    // inputs vanish, or outputs are discarded, off the band
                    if k < axis && !in_band(c) {
                        active = false;
                    }
                }
                if !active {
                    continue;
                }
                for (t, v) in line.iter_mut().enumerate() {
                    *v = grid[base + t * stride];
                }
                plan.process_with_scratch(line, scratch);
                for (t, v) in line.iter().enumerate() {
                    grid[base + t * stride] = *v;
                }
            }
        }
    }

    fn load(&mut self, which: u8, b: &[C64]) {
        let grid = if which == 0 { &mut self.grid0 } else { &mut self.grid1 };
        grid.iter_mut().for_each(|v| *v = ZERO);
        for (j, &c) in self.cells.iter().enumerate() {
            grid[c] = b[j];
        }
        Self::transform(
            self.d,
            self.m,
            self.band,
            grid,
            &mut self.line,
            &mut self.scratch,
            &self.inv,
            true,
        );
    }

    fn unload(&mut self, out: &mut [C64]) {
        Self::transform(
            self.d,
            self.m,
            self.band,
            &mut self.grid0,
            &mut self.line,
            &mut self.scratch,
            &self.fwd,
            false,
        );
        let norm = 1.0 / (self.m.pow(self.d as u32) as f64);
        for (j, &c) in self.cells.iter().enumerate() {
            out[j] = self.grid0[c] * norm;
        }
    }

    /// out_n = Σ_{n₁+n₂−n₃=n} b₁b₂b̄₃ (no exclusions).
    pub fn cubic(&mut self, b: &[C64], out: &mut [C64]) {
        self.load(0, b);
        for v in self.grid0.iter_mut() {
            *v *= v.norm_sqr();
        }
        self.unload(out);
    }

    /// out_n = Σ 2 f₁g₂ḡ₃ + g₁g₂f̄₃ (f in one slot, g in the other two).
    pub fn cubic_mixed(&mut self, g: &[C64], f: &[C64], out: &mut [C64]) {
        self.load(0, g);
        self.load(1, f);
        for (u0, u1) in self.grid0.iter_mut().zip(self.grid1.iter()) {
            *u0 = 2.0 * u1 * u0.norm_sqr() + *u0 * *u0 * u1.conj();
        }
        self.unload(out);
    }

    pub fn is_in_band(&self, c: usize) -> bool {
        self.in_band(c)
    }
}

/// Explicit δ' triples (i₁, i₂, i₃) for every target mode, with ω.
#[derive(Clone, Debug)]
pub struct DirectSum {
    pub triples: Vec<Vec<(u32, u32, u32, f64)>>,
}

impl DirectSum {
    pub fn new(lattice: &LatticeSpec) -> Self {
        let modes = lattice.modes();
        let l2 = lattice.period() * lattice.period();
        let triples = modes
            .par_iter()
            .map(|ms| {
                let mut v = Vec::new();
                for (i1, m1) in modes.iter().enumerate() {
                    for (i2, m2) in modes.iter().enumerate() {
                        let mut n3 = [0i64; 3];
                        for k in 0..3 {
                            n3[k] = m1.index[k] + m2.index[k] - ms.index[k];
                        }
                        let Some(i3) = lattice.find(&n3) else { continue };
                        let r = crate::spectral_domain::resonance_on_lattice(
                            &m1.index, &m2.index, &n3, &ms.index,
                        );
                        if r.strict_delta {
                            v.push((i1 as u32, i2 as u32, i3 as u32, r.omega_l2 as f64 / l2));
                        }
                    }
                }
                v
            })
            .collect();
        Self { triples }
    }
}

/// Precomputed per-mode data and the configured summation path.
pub struct ChaosIntegrator {
    pub lattice: Arc<LatticeSpec>,
    pub profiles: Profiles,
    pub params: PhysicalParams,
    pub cfg: DuhamelConfig,
    gamma: Vec<f64>,
    big_b: Vec<f64>,
    k2: Vec<f64>,
    cell: f64,
    direct: Option<DirectSum>,
}

/// Per-thread buffers.
pub struct Workspace {
    conv: Option<CubicConvolver>,
    rot: Vec<C64>,
    b0: Vec<C64>,
    b1: Vec<C64>,
    s: Vec<C64>,
}

impl ChaosIntegrator {
    pub fn new(
        lattice: Arc<LatticeSpec>,
        profiles: Profiles,
        params: PhysicalParams,
        cfg: DuhamelConfig,
    ) -> Result<Self> {
        profiles.validate()?;
        params.validate()?;
        cfg.validate(&params)?;
        let mut gamma = Vec::with_capacity(lattice.len());
        let mut big_b = Vec::with_capacity(lattice.len());
        let mut k2 = Vec::with_capacity(lattice.len());
        for m in lattice.modes() {
            let y = norm2(&m.s);
            gamma.push(profiles.gamma(y));
            big_b.push(profiles.big_b(y));
            k2.push(y);
        }
        let direct = match cfg.method {
            ConvolutionMethod::Direct => {
                if lattice.len() > 2000 {
                    return Err(Error::Regime(format!(
                        "direct summation over {} modes is not supported; use the FFT path",
                        lattice.len()
                    )));
                }
                Some(DirectSum::new(&lattice))
            }
            ConvolutionMethod::Fft => None,
        };
        Ok(Self {
            cell: lattice.cell_volume(),
            lattice,
            profiles,
            params,
            cfg,
            gamma,
            big_b,
            k2,
            direct,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.gamma.len()
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn big_b(&self) -> &[f64] {
        &self.big_b
    }

    pub fn workspace(&self) -> Workspace {
        let n = self.n_modes();
        Workspace {
            conv: match self.cfg.method {
                ConvolutionMethod::Fft => Some(CubicConvolver::new(&self.lattice)),
                ConvolutionMethod::Direct => None,
            },
            rot: vec![ZERO; n],
            b0: vec![ZERO; n],
            b1: vec![ZERO; n],
            s: vec![ZERO; n],
        }
    }

    /// Integration start: −T, or −T_eff for T = ∞.
    pub fn start_time(&self) -> f64 {
        match self.params.horizon {
            Horizon::Finite(t) => -t,
            Horizon::Infinite => -self.cfg.t_eff,
        }
    }

    #[inline]
    fn phase_weight(&self, omega: f64, h: f64) -> f64 {
        match self.cfg.phase_rule {
            PhaseRule::Midpoint => 1.0,
            PhaseRule::ExactPhase => {
                let x = 0.5 * omega * h / self.params.nu;
                if x.abs() < 1e-8 {
                    1.0 - x * x / 6.0
                } else {
                    x.sin() / x
                }
            }
        }
    }

    fn set_rotation(&self, ws: &mut Workspace, l: f64) {
        let inv_nu = 1.0 / self.params.nu;
        for (r, &k2) in ws.rot.iter_mut().zip(&self.k2) {
            *r = C64::from_polar(1.0, k2 * l * inv_nu);
        }
    }

    /// Y_s = Σ δ' a₁a₂ā₃ e^{iν⁻¹ωl} (times the phase weight for step h).
    pub fn y1(&self, ws: &mut Workspace, a0: &[C64], l: f64, h: f64, out: &mut [C64]) {
        if let Some(ds) = &self.direct {
            let inv_nu = 1.0 / self.params.nu;
            for (j, tr) in ds.triples.iter().enumerate() {
                let mut acc = ZERO;
                for &(i1, i2, i3, om) in tr {
                    let ph = C64::from_polar(self.phase_weight(om, h), om * l * inv_nu);
                    acc += a0[i1 as usize] * a0[i2 as usize] * a0[i3 as usize].conj() * ph;
                }
                out[j] = acc;
            }
            return;
        }
        self.set_rotation(ws, l);
        let Workspace { conv, rot, b0, s, .. } = ws;
        let conv = conv.as_mut().expect("fft workspace");
        let mut n0 = 0.0;
        for j in 0..a0.len() {
            b0[j] = a0[j] * rot[j];
            n0 += a0[j].norm_sqr();
        }
        conv.cubic(b0, s);
        for j in 0..a0.len() {
            let b = b0[j];
            let v = s[j] - 2.0 * n0 * b + b.norm_sqr() * b;
            out[j] = v * rot[j].conj();
        }
    }

    /// Σ δ' over the three placements of a⁽¹⁾ among the factors.
    pub fn y2(&self, ws: &mut Workspace, a0: &[C64], a1: &[C64], l: f64, h: f64, out: &mut [C64]) {
        if let Some(ds) = &self.direct {
            let inv_nu = 1.0 / self.params.nu;
            for (j, tr) in ds.triples.iter().enumerate() {
                let mut acc = ZERO;
                for &(i1, i2, i3, om) in tr {
                    let (i1, i2, i3) = (i1 as usize, i2 as usize, i3 as usize);
                    let ph = C64::from_polar(self.phase_weight(om, h), om * l * inv_nu);
                    let v = a1[i1] * a0[i2] * a0[i3].conj()
                        + a0[i1] * a1[i2] * a0[i3].conj()
                        + a0[i1] * a0[i2] * a1[i3].conj();
                    acc += v * ph;
                }
                out[j] = acc;
            }
            return;
        }
        self.set_rotation(ws, l);
        let Workspace { conv, rot, b0, b1, s } = ws;
        let conv = conv.as_mut().expect("fft workspace");
        let mut n0 = 0.0;
        let mut p10 = ZERO;
        for j in 0..a0.len() {
            b0[j] = a0[j] * rot[j];
            b1[j] = a1[j] * rot[j];
            n0 += a0[j].norm_sqr();
            p10 += a1[j] * a0[j].conj();
        }
        conv.cubic_mixed(b0, b1, s);
        let p01 = p10.conj();
        for j in 0..a0.len() {
            let (g, f) = (b0[j], b1[j]);
            let corr = -2.0 * p10 * g - 2.0 * n0 * f + 2.0 * g.norm_sqr() * f - 2.0 * p01 * g
                + g * g * f.conj();
            out[j] = (s[j] + corr) * rot[j].conj();
        }
    }

    fn check_path_grid(&self, times: &[f64]) -> Result<()> {
        if times.len() < 3 || times.len() % 2 == 0 {
            return config("path grid needs an odd number (>= 3) of points");
        }
        for k in (0..times.len() - 2).step_by(2) {
            let (a, m, b) = (times[k], times[k + 1], times[k + 2]);
            if (m - 0.5 * (a + b)).abs() > 1e-12 * (1.0 + b.abs()) {
                return config("odd grid points must be step midpoints");
            }
            if b - a > self.cfg.h_osc * (1.0 + 1e-9) {
                return config(format!(
                    "grid step {} exceeds h_osc = {}",
                    b - a,
                    self.cfg.h_osc
                ));
            }
        }
        Ok(())
    }

    /// Grid from `t0` to `t1` with steps ≤ h_osc, midpoints interleaved.
    pub fn path_grid(&self, t0: f64, t1: f64) -> Vec<f64> {
        let n = ((t1 - t0) / self.cfg.h_osc - 1e-9).ceil().max(1.0) as usize;
        let h = (t1 - t0) / n as f64;
        let mut out = Vec::with_capacity(2 * n + 1);
        for k in 0..n {
            out.push(t0 + h * k as f64);
            out.push(t0 + h * (k as f64 + 0.5));
        }
        out.push(t1);
        out
    }

    /// Fills a⁽¹⁾ on a stored path; a⁽¹⁾ vanishes at the first grid time.
    pub fn duhamel_a1(&self, sample: &mut ChaosSample) -> Result<()> {
        self.check_path_grid(&sample.times)?;
        let nm = sample.n_modes;
        let mut ws = self.workspace();
        let mut a1 = vec![ZERO; sample.a0.len()];
        let mut y = vec![ZERO; nm];
        for k in (0..sample.times.len() - 2).step_by(2) {
            let h = sample.times[k + 2] - sample.times[k];
            let lm = sample.times[k + 1];
            self.y1(&mut ws, sample.a0_at(k + 1), lm, h, &mut y);
            for j in 0..nm {
                let (mid, end) = self.a1_update(j, a1[k * nm + j], y[j], h);
                a1[(k + 1) * nm + j] = mid;
                a1[(k + 2) * nm + j] = end;
            }
        }
        sample.a1 = Some(a1);
        Ok(())
    }

    /// Fills a⁽²⁾ on a stored path from a⁽⁰⁾ and a⁽¹⁾.
    pub fn duhamel_a2(&self, sample: &mut ChaosSample) -> Result<()> {
        self.check_path_grid(&sample.times)?;
        let a1 = sample
            .a1
            .as_ref()
            .ok_or_else(|| Error::Config("a1 must be filled before a2".into()))?;
        let nm = sample.n_modes;
        let mut ws = self.workspace();
        let mut a2 = vec![ZERO; sample.a0.len()];
        let mut y = vec![ZERO; nm];
        for k in (0..sample.times.len() - 2).step_by(2) {
            let h = sample.times[k + 2] - sample.times[k];
            let lm = sample.times[k + 1];
            self.y2(
                &mut ws,
                sample.a0_at(k + 1),
                ChaosSample::at(a1, nm, k + 1),
                lm,
                h,
                &mut y,
            );
            for j in 0..nm {
                let (mid, end) = self.a1_update(j, a2[k * nm + j], y[j], h);
                a2[(k + 1) * nm + j] = mid;
                a2[(k + 2) * nm + j] = end;
            }
        }
        sample.a2 = Some(a2);
        Ok(())
    }

    /// One step of a ↦ e^{−γh}a + iL^{−d}h e^{−γh/2}Y; returns (midpoint, end).
    #[inline]
    fn a1_update(&self, j: usize, a: C64, y: C64, h: f64) -> (C64, C64) {
        let g = self.gamma[j];
        let iy = I * y * self.cell;
        let mid = a * (-0.5 * g * h).exp() + iy * (0.5 * h * (-0.25 * g * h).exp());
        let end = a * (-g * h).exp() + iy * (h * (-0.5 * g * h).exp());
        (mid, end)
    }

    /// Streams one sample from the start time through `record_times`,
    /// storing a⁽⁰⁾, a⁽¹⁾ and (optionally) a⁽²⁾ for the modes in `subset`.
    /// The a⁽⁰⁾ draws coincide with `sample_a0` on `path_grid` segments.
    pub fn run_sample(
        &self,
        ws: &mut Workspace,
        noise: &NoiseStream,
        sample_id: u64,
        record_times: &[f64],
        subset: &[usize],
        with_a2: bool,
    ) -> Result<ChaosSample> {
        let t0 = self.start_time();
        if record_times.is_empty() {
            return config("no record times");
        }
        if record_times[0] < t0 - 1e-12 {
            return config(format!(
                "record time {} precedes the integration start {t0}",
                record_times[0]
            ));
        }
        for w in record_times.windows(2) {
            if !(w[1] > w[0]) {
                return config("record times must increase");
            }
        }
        let nm = self.n_modes();
        let mut rngs: Vec<ChaCha8Rng> = (0..nm)
            .map(|j| noise.rng(j as u64, sample_id, part::A0_PATH))
            .collect();
        let mut a0: Vec<C64> = match self.params.horizon {
            Horizon::Infinite => rngs
                .iter_mut()
                .zip(&self.big_b)
                .map(|(r, &bb)| complex_normal(r, bb))
                .collect(),
            Horizon::Finite(_) => vec![ZERO; nm],
        };
        let mut a1 = vec![ZERO; nm];
        let mut a2 = vec![ZERO; nm];
        let mut a1_mid = vec![ZERO; nm];
        let mut a0_mid = vec![ZERO; nm];
        let mut y = vec![ZERO; nm];
        let ns = subset.len();
        let nr = record_times.len();
        let mut rec0 = vec![ZERO; ns * nr];
        let mut rec1 = vec![ZERO; ns * nr];
        let mut rec2 = if with_a2 { vec![ZERO; ns * nr] } else { Vec::new() };
        let mut t = t0;
        for (ri, &tr) in record_times.iter().enumerate() {
            if tr > t + 1e-12 {
                let n = ((tr - t) / self.cfg.h_osc - 1e-9).ceil().max(1.0) as usize;
                let h = (tr - t) / n as f64;
                let ou: Vec<OuStep> = self
                    .gamma
                    .iter()
                    .zip(&self.big_b)
                    .map(|(&g, &bb)| OuStep::new(g, bb, 0.5 * h))
                    .collect();
                for k in 0..n {
                    let lm = t + h * (k as f64 + 0.5);
                    for j in 0..nm {
                        a0_mid[j] = ou[j].advance(a0[j], &mut rngs[j]);
                    }
                    self.y1(ws, &a0_mid, lm, h, &mut y);
                    for j in 0..nm {
                        let (mid, end) = self.a1_update(j, a1[j], y[j], h);
                        a1_mid[j] = mid;
                        a1[j] = end;
                    }
                    if with_a2 {
                        self.y2(ws, &a0_mid, &a1_mid, lm, h, &mut y);
                        for j in 0..nm {
                            a2[j] = self.a1_update(j, a2[j], y[j], h).1;
                        }
                    }
                    for j in 0..nm {
                        a0[j] = ou[j].advance(a0_mid[j], &mut rngs[j]);
                    }
                }
                t = tr;
            }
            for (q, &j) in subset.iter().enumerate() {
                rec0[ri * ns + q] = a0[j];
                rec1[ri * ns + q] = a1[j];
                if with_a2 {
                    rec2[ri * ns + q] = a2[j];
                }
            }
        }
        Ok(ChaosSample {
            sample_id,
            times: record_times.to_vec(),
            n_modes: ns,
            a0: rec0,
            a1: Some(rec1),
            a2: if with_a2 { Some(rec2) } else { None },
        })
    }
}

/// Samples restricted to a mode subset at the record times.
#[derive(Clone, Debug)]
pub struct QuasisolutionEnsemble {
    pub rho: f64,
    pub modes: Vec<usize>,
    pub times: Vec<f64>,
    pub samples: Vec<ChaosSample>,
}

impl QuasisolutionEnsemble {
    /// A_s = a⁽⁰⁾ + ρa⁽¹⁾ + ρ²a⁽²⁾ for sample k, record time ti, subset slot q.
    pub fn amplitude(&self, k: usize, ti: usize, q: usize) -> C64 {
        let s = &self.samples[k];
        let idx = ti * s.n_modes + q;
        let mut a = s.a0[idx];
        if let Some(v) = &s.a1 {
            a += self.rho * v[idx];
        }
        if let Some(v) = &s.a2 {
            a += self.rho * self.rho * v[idx];
        }
        a
    }
}

const BLOCK: usize = 32;

/// Simulates `n_samples` independent samples. Work is split into fixed
/// blocks whose results are concatenated in sample order, so the output is
/// identical for every thread count.
pub fn simulate_ensemble(
    integ: &ChaosIntegrator,
    noise: &NoiseStream,
    n_samples: usize,
    record_times: &[f64],
    subset: &[usize],
    with_a2: bool,
) -> Result<QuasisolutionEnsemble> {
    if n_samples == 0 {
        return config("ensemble needs at least one sample");
    }
    if subset.iter().any(|&j| j >= integ.n_modes()) {
        return config("mode subset out of range");
    }
    let n_blocks = n_samples.div_ceil(BLOCK);
    let blocks: Vec<Result<Vec<ChaosSample>>> = (0..n_blocks)
        .into_par_iter()
        .map_init(
            || integ.workspace(),
            |ws, b| {
                let lo = b * BLOCK;
                let hi = (lo + BLOCK).min(n_samples);
                (lo..hi)
                    .map(|k| integ.run_sample(ws, noise, k as u64, record_times, subset, with_a2))
                    .collect()
            },
        )
        .collect();
    let mut samples = Vec::with_capacity(n_samples);
    for b in blocks {
        samples.extend(b?);
    }
    Ok(QuasisolutionEnsemble {
        rho: integ.params.rho(),
        modes: subset.to_vec(),
        times: record_times.to_vec(),
        samples,
    })
}

/// Mean and standard error of a scalar statistic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    /// Mean with the delete-one jackknife standard error (which for a plain
    /// mean reduces to the sample standard deviation over √n).
    pub fn from_values(v: &[f64]) -> Self {
        let n = v.len() as f64;
        let total: f64 = crate::numerics::kahan_sum(v);
        let mean = total / n;
        if v.len() < 2 {
            return Self { mean, se: f64::NAN };
        }
        let mut acc = 0.0;
        for &x in v {
            let loo = (total - x) / (n - 1.0);
            acc += (loo - mean).powi(2);
        }
        Self {
            mean,
            se: ((n - 1.0) / n * acc).sqrt(),
        }
    }

    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.se
    }
}

/// Per-mode spectrum estimate and its decomposition in powers of ρ.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectrumEstimate {
    pub mode: usize,
    pub total: Estimate,
    /// n⁽⁰⁾…n⁽⁴⁾ with E|A|² = Σ ρ^k n⁽ᵏ⁾.
    pub orders: [Estimate; 5],
    /// E|a⁽¹⁾|² alone.
    pub a1_sq: Estimate,
}

/// Monte Carlo spectrum at record index `ti`.
pub fn mc_spectrum(ens: &QuasisolutionEnsemble, ti: usize) -> Result<Vec<SpectrumEstimate>> {
    let n = ens.samples.len();
    if n < 2 {
        return config("spectrum estimate needs at least two samples");
    }
    if ti >= ens.times.len() {
        return config("record index out of range");
    }
    let mut out = Vec::with_capacity(ens.modes.len());
    for (q, &mode) in ens.modes.iter().enumerate() {
        let mut cols = vec![Vec::with_capacity(n); 7];
        for k in 0..n {
            let s = &ens.samples[k];
            let idx = ti * s.n_modes + q;
            let a0 = s.a0[idx];
            let a1 = s.a1.as_ref().map_or(ZERO, |v| v[idx]);
            let a2 = s.a2.as_ref().map_or(ZERO, |v| v[idx]);
            cols[0].push(a0.norm_sqr());
            cols[1].push(2.0 * (a1 * a0.conj()).re);
            cols[2].push(a1.norm_sqr() + 2.0 * (a2 * a0.conj()).re);
            cols[3].push(2.0 * (a2 * a1.conj()).re);
            cols[4].push(a2.norm_sqr());
            cols[5].push(ens.amplitude(k, ti, q).norm_sqr());
            cols[6].push(a1.norm_sqr());
        }
        let orders = [0, 1, 2, 3, 4].map(|o| Estimate::from_values(&cols[o]));
        out.push(SpectrumEstimate {
            mode,
            total: Estimate::from_values(&cols[5]),
            orders,
            a1_sq: Estimate::from_values(&cols[6]),
        });
    }
    Ok(out)
}

/// Δa⁽ⁱ⁾(τ) = a⁽ⁱ⁾(τ) − e^{−γ_s(τ−τ′)}a⁽ⁱ⁾(τ′) from two record indices.
pub fn increments_delta(
    sample: &ChaosSample,
    gammas: &[f64],
    i_prev: usize,
    i_now: usize,
) -> Result<[Vec<C64>; 3]> {
    if i_now < i_prev || i_now >= sample.times.len() {
        return config("increment requires tau >= tau'");
    }
    let dt = sample.times[i_now] - sample.times[i_prev];
    let nm = sample.n_modes;
    let f = |path: &[C64]| -> Vec<C64> {
        (0..nm)
            .map(|q| path[i_now * nm + q] - (-gammas[q] * dt).exp() * path[i_prev * nm + q])
            .collect()
    };
    let zero = vec![ZERO; nm];
    Ok([
        f(&sample.a0),
        sample.a1.as_deref().map_or(zero.clone(), f),
        sample.a2.as_deref().map_or(zero, f),
    ])
}

/// Restricted Duhamel increments on a stored path: the integrals of the
/// driving terms over [τ′, τ] only, for comparison with `increments_delta`.
pub fn increments_duhamel(
    integ: &ChaosIntegrator,
    sample: &ChaosSample,
    k_prev: usize,
    k_now: usize,
) -> Result<[Vec<C64>; 2]> {
    if k_now < k_prev || k_prev % 2 == 1 || k_now % 2 == 1 {
        return config("increments need even path indices with tau >= tau'");
    }
    let a1 = sample
        .a1
        .as_ref()
        .ok_or_else(|| Error::Config("a1 missing".into()))?;
    let nm = sample.n_modes;
    let mut ws = integ.workspace();
    let mut d1 = vec![ZERO; nm];
    let mut d2 = vec![ZERO; nm];
    let mut y = vec![ZERO; nm];
    for k in (k_prev..k_now).step_by(2) {
        let h = sample.times[k + 2] - sample.times[k];
        let lm = sample.times[k + 1];
        integ.y1(&mut ws, sample.a0_at(k + 1), lm, h, &mut y);
        for j in 0..nm {
            d1[j] = integ.a1_update(j, d1[j], y[j], h).1;
        }
        if sample.a2.is_some() {
            integ.y2(&mut ws, sample.a0_at(k + 1), ChaosSample::at(a1, nm, k + 1), lm, h, &mut y);
            for j in 0..nm {
                d2[j] = integ.a1_update(j, d2[j], y[j], h).1;
            }
        }
    }
    Ok([d1, d2])
}

/// Δ¹_s(τ) = −iL^{−d}∫ e^{−γ_s(τ−l)}|a⁽⁰⁾_s|²a⁽⁰⁾_s dl on a path grid
/// (midpoint rule on each interleaved step), for one mode slot.
pub fn diagonal_correction_delta1(
    sample: &ChaosSample,
    slot: usize,
    gamma: f64,
    cell_volume: f64,
) -> Result<C64> {
    let t = &sample.times;
    if t.len() < 3 || t.len() % 2 == 0 {
        return config("path grid needs an odd number (>= 3) of points");
    }
    let nm = sample.n_modes;
    let mut acc = ZERO;
    for k in (0..t.len() - 2).step_by(2) {
        let h = t[k + 2] - t[k];
        let a = sample.a0[(k + 1) * nm + slot];
        acc = acc * (-gamma * h).exp() + a * a.norm_sqr() * (h * (-0.5 * gamma * h).exp());
    }
    Ok(-I * cell_volume * acc)
}

/// Single-mode Monte Carlo of E|Δ¹_s(τ)|² at T = ∞: the path starts from
/// the stationary law at −t_eff and is integrated up to 0.
pub fn delta1_second_moment_mc(
    gamma: f64,
    big_b: f64,
    cell_volume: f64,
    h: f64,
    t_eff: f64,
    noise: &NoiseStream,
    mode_key: u64,
    n_samples: usize,
) -> Result<Estimate> {
    if n_samples < 2 {
        return config("need at least two samples");
    }
    let n = (t_eff / h).ceil().max(1.0) as usize;
    let hh = t_eff / n as f64;
    let ou = OuStep::new(gamma, big_b, 0.5 * hh);
    let dec = (-gamma * hh).exp();
    let w = hh * (-0.5 * gamma * hh).exp();
    let vals: Vec<f64> = (0..n_samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = noise.rng(mode_key, k as u64, part::A0_PATH);
            let mut a = complex_normal(&mut rng, big_b);
            let mut acc = ZERO;
            for _ in 0..n {
                let am = ou.advance(a, &mut rng);
                acc = acc * dec + am * am.norm_sqr() * w;
                a = ou.advance(am, &mut rng);
            }
            (cell_volume * acc).norm_sqr()
        })
        .collect();
    Ok(Estimate::from_values(&vals))
}

/// Closed form E|Δ¹_s|² = 5B³/(2γ²) L^{−2d} at T = ∞ (sixth Gaussian moment).
pub fn delta1_second_moment_closed(gamma: f64, big_b: f64, cell_volume: f64) -> f64 {
    2.5 * big_b.powi(3) / (gamma * gamma) * cell_volume * cell_volume
}
