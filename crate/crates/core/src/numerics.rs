//! Small numerical kernels shared by the quadrature and moment code:
//! compensated sums, Gauss–Legendre rules, exponential divided differences,
//! triangle integrals of exponentials, spherical Bessel functions and
//! Filon-type weights for oscillatory panels.

use num_complex::Complex64 as C64;
use std::f64::consts::PI;

/// Neumaier-compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Complex version of [`Kahan`].
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanC {
    re: Kahan,
    im: Kahan,
}

impl KahanC {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, z: C64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    #[inline]
    pub fn value(&self) -> C64 {
        C64::new(self.re.value(), self.im.value())
    }
}

/// Compensated sum of a slice, in slice order.
pub fn kahan_sum(xs: &[f64]) -> f64 {
    let mut k = Kahan::new();
    for &x in xs {
        k.add(x);
    }
    k.value()
}

/// Gauss–Legendre rule on [-1, 1].
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped to [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let h = 0.5 * (b - a);
        let c = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(self.weights.iter())
            .map(move |(&x, &w)| (c + h * x, h * w))
    }

    /// Integrate `f` over [a, b].
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let mut acc = Kahan::new();
        for (x, w) in self.mapped(a, b) {
            acc.add(w * f(x));
        }
        acc.value()
    }
}

/// P_n(x) and P_n'(x) by the three-term recurrence.
pub fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = if (1.0 - x * x).abs() < 1e-300 {
        0.5 * (n as f64) * (n as f64 + 1.0) * x.powi(n as i32 + 1)
    } else {
        n as f64 * (x * p1 - p0) / (x * x - 1.0)
    };
    (p1, d)
}

/// φ₁(z) = (e^z − 1)/z, continuous at 0.
pub fn phi1(z: C64) -> C64 {
    if z.norm() < 0.5 {
        let mut term = C64::new(1.0, 0.0);
        let mut sum = term;
        for k in 2..24 {
            term = term * z / k as f64;
            sum += term;
        }
        sum
    } else {
        (z.exp() - 1.0) / z
    }
}

/// Real φ₁.
pub fn phi1_real(x: f64) -> f64 {
    if x.abs() < 1e-5 {
        1.0 + x / 2.0 + x * x / 6.0
    } else {
        x.exp_m1() / x
    }
}

/// e^{c0} · exp[z0, z1, z2], the second divided difference of the
/// exponential, evaluated without overflow or cancellation.
pub fn exp_dd3_scaled(z: [C64; 3], c0: f64) -> C64 {
    let mut im = 0;
    for i in 1..3 {
        if z[i].re > z[im].re {
            im = i;
        }
    }
    let zm = z[im];
    let w = [z[0] - zm, z[1] - zm, z[2] - zm];
    let pref = (zm + c0).exp();
    let d01 = (w[0] - w[1]).norm();
    let d02 = (w[0] - w[2]).norm();
    let d12 = (w[1] - w[2]).norm();
    let maxd = d01.max(d02).max(d12);
    let mind = d01.min(d02).min(d12);
    let val = if maxd < 2.0 {
        let c = (w[0] + w[1] + w[2]) / 3.0;
        let u = [w[0] - c, w[1] - c, w[2] - c];
        // complete homogeneous symmetric polynomials h_m(u0, u1, u2)
        let mut h1 = C64::new(1.0, 0.0);
        let mut h2 = C64::new(1.0, 0.0);
        let mut h3 = C64::new(1.0, 0.0);
        let mut fact = 2.0f64;
        let mut sum = h3 / fact;
        for m in 1..48 {
            h1 *= u[0];
            h2 = h2 * u[1] + h1;
            h3 = h3 * u[2] + h2;
            fact *= (m + 2) as f64;
            let term = h3 / fact;
            sum += term;
            if term.norm() < 1e-18 * sum.norm() && m > 4 {
                break;
            }
        }
        c.exp() * sum
    } else if mind > 0.5 {
        let mut s = C64::new(0.0, 0.0);
        for i in 0..3 {
            let mut den = C64::new(1.0, 0.0);
            for j in 0..3 {
                if j != i {
                    den *= w[i] - w[j];
                }
            }
            s += w[i].exp() / den;
        }
        s
    } else {
        let (a, b, f) = if mind == d01 {
            (w[0], w[1], w[2])
        } else if mind == d02 {
            (w[0], w[2], w[1])
        } else {
            (w[1], w[2], w[0])
        };
        let dab = a.exp() * phi1(b - a);
        let dbf = b.exp() * phi1(f - b);
        (dbf - dab) / (f - a)
    };
    pref * val
}

/// e^{c0} ∫₀ᵗ dl ∫₀ˡ dl' e^{p l + q l'}.
pub fn tri_exp(c0: f64, p: C64, q: C64, t: f64) -> C64 {
    if t <= 0.0 {
        return C64::new(0.0, 0.0);
    }
    let z = [C64::new(0.0, 0.0), p * t, (p + q) * t];
    exp_dd3_scaled(z, c0 + 2.0 * t.ln())
}

/// Split of [`tri_exp`] into a part free of e^{i Im(p) t} and the amplitude
/// multiplying e^{i Im(p) t}: total = n + e^{i Im(p) t} · o.
///
/// Only well conditioned when |p| and |q| are bounded away from zero.
pub fn tri_exp_split(c0: f64, p: C64, q: C64, t: f64) -> (C64, C64) {
    let sigma = p + q;
    let st = sigma * t;
    let e_phi = if st.norm() < 0.5 {
        c0.exp() * phi1(st)
    } else {
        ((st + c0).exp() - c0.exp()) / st
    };
    let n = c0.exp() / (p * q) + e_phi * t / q;
    let o = -(c0 + p.re * t).exp() / (p * q);
    (n, o)
}

/// Spherical Bessel functions j_0..j_{n-1} at x ≥ 0.
pub fn sph_bessel_seq(n: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; n];
    if n == 0 {
        return out;
    }
    if x < 0.5 {
        let y = 0.5 * x * x;
        let mut pref = 1.0; // x^k / (2k+1)!!
        for (k, o) in out.iter_mut().enumerate() {
            if k > 0 {
                pref *= x / (2 * k + 1) as f64;
            }
            let mut term = 1.0;
            let mut sum = 1.0;
            for m in 1..30 {
                term *= -y / (m as f64 * (2 * k + 2 * m + 1) as f64);
                sum += term;
                if term.abs() < 1e-18 {
                    break;
                }
            }
            *o = pref * sum;
        }
        return out;
    }
    let j0 = x.sin() / x;
    let j1 = x.sin() / (x * x) - x.cos() / x;
    if x > n as f64 {
        out[0] = j0;
        if n > 1 {
            out[1] = j1;
        }
        for k in 1..n.saturating_sub(1) {
            out[k + 1] = (2 * k + 1) as f64 / x * out[k] - out[k - 1];
        }
        return out;
    }
    let kstart = n + 20 + x as usize;
    let mut jp1 = 0.0f64;
    let mut jk = 1e-30f64;
    let mut vals = vec![0.0; kstart + 1];
    vals[kstart] = jk;
    for k in (1..=kstart).rev() {
        let jm1 = (2 * k + 1) as f64 / x * jk - jp1;
        jp1 = jk;
        jk = jm1;
        vals[k - 1] = jk;
        if jk.abs() > 1e200 {
            for v in vals.iter_mut().skip(k - 1) {
                *v *= 1e-200;
            }
            jp1 *= 1e-200;
            jk *= 1e-200;
        }
    }
    let scale = if j0.abs() > j1.abs() {
        j0 / vals[0]
    } else {
        j1 / vals[1]
    };
    for k in 0..n {
        out[k] = vals[k] * scale;
    }
    out
}

/// Gauss–Legendre rule augmented with the Legendre table needed for Filon
/// weights.
#[derive(Clone, Debug)]
pub struct FilonRule {
    pub gl: GaussLegendre,
    /// coef[j][k] = (2k+1)/2 · w_j · P_k(x_j)
    coef: Vec<Vec<f64>>,
}

impl FilonRule {
    pub fn new(n: usize) -> Self {
        let gl = GaussLegendre::new(n);
        let mut coef = vec![vec![0.0; n]; n];
        for j in 0..n {
            let x = gl.nodes[j];
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 0..n {
                let pk = if k == 0 {
                    1.0
                } else if k == 1 {
                    x
                } else {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                    p2
                };
                coef[j][k] = 0.5 * (2 * k + 1) as f64 * gl.weights[j] * pk;
            }
        }
        Self { gl, coef }
    }

    /// Complex weights W_j with ∫ₐᵇ e^{iκθ} g(θ) dθ ≈ Σ W_j g(θ_j), exact for
    /// polynomial g of degree < n.
    pub fn weights(&self, a: f64, b: f64, kappa: f64, out: &mut Vec<C64>) {
        let n = self.gl.len();
        let h = 0.5 * (b - a);
        let c = 0.5 * (a + b);
        let om = kappa * h;
        let js = sph_bessel_seq(n, om.abs());
        let mut moments = vec![C64::new(0.0, 0.0); n];
        let mut ik = C64::new(1.0, 0.0);
        let unit = if om >= 0.0 {
            C64::new(0.0, 1.0)
        } else {
            C64::new(0.0, -1.0)
        };
        for k in 0..n {
            moments[k] = 2.0 * ik * js[k];
            ik *= unit;
        }
        let phase = C64::from_polar(h, kappa * c);
        out.clear();
        for j in 0..n {
            let mut s = C64::new(0.0, 0.0);
            for k in 0..n {
                s += self.coef[j][k] * moments[k];
            }
            out.push(phase * s);
        }
    }
}

/// Least-squares line y = a + b·x.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope (0 for exactly two points).
    pub slope_stderr: f64,
    /// Root-mean-square residual.
    pub rms_residual: f64,
}

pub fn line_fit(xs: &[f64], ys: &[f64]) -> LineFit {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut ssr = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let r = y - intercept - slope * x;
        ssr += r * r;
    }
    let slope_stderr = if xs.len() > 2 {
        (ssr / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    LineFit {
        slope,
        intercept,
        slope_stderr,
        rms_residual: (ssr / n).sqrt(),
    }
}
