//! Grids, trapping potentials, interaction kernels and wavefunctions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;

/// Uniform grid on `[-half_width, half_width]` with Dirichlet walls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    n_points: usize,
    half_width: f64,
}

impl Grid1D {
    pub fn new(n_points: usize, half_width: f64) -> Result<Self> {
        if n_points < 16 {
            return Err(Error::invalid("grid.n", format!("need at least 16 points, got {n_points}")));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::invalid("grid.halfwidth", format!("must be positive, got {half_width}")));
        }
        Ok(Self { n_points, half_width })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.n_points - 1) as f64
    }

    /// Grid point `i`, written so that `x(n-1-i) == -x(i)` bit for bit.
    pub fn x(&self, i: usize) -> f64 {
        let twice = 2 * i as i64 - (self.n_points as i64 - 1);
        twice as f64 * (0.5 * self.spacing())
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.x(i)).collect()
    }

    /// Trapezoid weight of point `i`.
    pub fn weight(&self, i: usize) -> f64 {
        let h = self.spacing();
        if i == 0 || i + 1 == self.n_points {
            0.5 * h
        } else {
            h
        }
    }

    /// Trapezoid rule over the whole grid.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.n_points);
        let h = self.spacing();
        let n = f.len();
        h * (f.iter().sum::<f64>() - 0.5 * (f[0] + f[n - 1]))
    }

    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        let h = self.spacing();
        let n = a.len();
        h * (a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() - 0.5 * (a[0] * b[0] + a[n - 1] * b[n - 1]))
    }

    /// Index of the grid point nearest to `x`, clamped into the grid.
    pub fn nearest(&self, x: f64) -> usize {
        let t = (x + self.half_width) / self.spacing();
        (t.round().max(0.0) as usize).min(self.n_points - 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrapKind {
    SingleWell,
    DoubleWell,
}

/// Power-law well `|x - c|^s`, or the minimum of two translates at `±L/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapSpec {
    pub kind: TrapKind,
    pub s: f64,
    pub separation_l: f64,
    pub dimension_d: u8,
    /// Well center for `SingleWell`; unused for `DoubleWell`.
    pub center: f64,
}

impl TrapSpec {
    pub fn single(s: f64) -> Self {
        Self { kind: TrapKind::SingleWell, s, separation_l: 0.0, dimension_d: 1, center: 0.0 }
    }

    pub fn double(s: f64, l: f64) -> Self {
        Self { kind: TrapKind::DoubleWell, s, separation_l: l, dimension_d: 1, center: 0.0 }
    }

    pub fn shifted(mut self, center: f64) -> Self {
        self.center = center;
        self
    }

    pub fn with_dimension(mut self, d: u8) -> Self {
        self.dimension_d = d;
        self
    }

    /// Single well sitting on the right minimum of this double well.
    pub fn right_well(&self) -> Self {
        Self::single(self.s).shifted(0.5 * self.separation_l).with_dimension(self.dimension_d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s.is_finite() && self.s >= 2.0) {
            return Err(Error::invalid("trap.s", format!("exponent must be >= 2, got {}", self.s)));
        }
        if !(1..=3).contains(&self.dimension_d) {
            return Err(Error::invalid("trap.d", format!("dimension must be 1, 2 or 3, got {}", self.dimension_d)));
        }
        if !self.center.is_finite() {
            return Err(Error::invalid("trap.center", "must be finite"));
        }
        if self.kind == TrapKind::DoubleWell && !(self.separation_l.is_finite() && self.separation_l > 0.0) {
            return Err(Error::invalid("trap.L", format!("double well needs L > 0, got {}", self.separation_l)));
        }
        Ok(())
    }

    /// Distance from `x` to the nearest well minimum.
    pub fn distance_to_minimum(&self, x: f64) -> f64 {
        match self.kind {
            TrapKind::SingleWell => (x - self.center).abs(),
            TrapKind::DoubleWell => {
                let a = 0.5 * self.separation_l;
                (x - a).abs().min((x + a).abs())
            }
        }
    }

    pub fn sample(&self, grid: &Grid1D) -> Vec<f64> {
        (0..grid.n_points()).map(|i| eval_potential(self, grid.x(i))).collect()
    }
}

pub fn eval_potential(spec: &TrapSpec, x: f64) -> f64 {
    match spec.kind {
        TrapKind::SingleWell => (x - spec.center).abs().powf(spec.s),
        TrapKind::DoubleWell => {
            let a = 0.5 * spec.separation_l;
            // min of |x-a| and |x+a| computed symmetrically so V(-x) == V(x) exactly
            let r = (x.abs() - a).abs();
            r.powf(spec.s)
        }
    }
}

/// Closed-form Agmon distance `∫₀^r √V` for `V = |x|^s`.
pub fn agmon_distance(r: f64, s: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::invalid("r", format!("must be >= 0, got {r}")));
    }
    if !(s >= 2.0) {
        return Err(Error::invalid("s", format!("must be >= 2, got {s}")));
    }
    Ok(r.powf(1.0 + 0.5 * s) / (1.0 + 0.5 * s))
}

/// `∫₀^r √V` by adaptive Simpson quadrature for any nonnegative `V`.
pub fn agmon_quadrature<F: Fn(f64) -> f64>(v: F, r: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::invalid("r", format!("must be >= 0, got {r}")));
    }
    if r == 0.0 {
        return Ok(0.0);
    }
    let f = |x: f64| v(x).max(0.0).sqrt();
    Ok(adaptive_simpson(&f, 0.0, r, 1e-13 * (1.0 + r), 50))
}

/// Composite Simpson of `√V` over equally spaced samples `v[0..]` from 0 to `r`.
///
/// An even number of intervals uses Simpson throughout; otherwise the last
/// interval falls back to the 3/8 rule.
pub fn agmon_tabulated(v: &[f64], r: f64) -> Result<f64> {
    if v.len() < 4 {
        return Err(Error::invalid("v", "need at least 4 samples"));
    }
    let g: Vec<f64> = v.iter().map(|&x| x.max(0.0).sqrt()).collect();
    let m = g.len() - 1;
    let h = r / m as f64;
    let simpson = |a: usize, b: usize| -> f64 {
        let mut acc = g[a] + g[b];
        for k in (a + 1)..b {
            acc += if (k - a) % 2 == 1 { 4.0 * g[k] } else { 2.0 * g[k] };
        }
        acc * h / 3.0
    };
    if m.is_multiple_of(2) {
        Ok(simpson(0, m))
    } else {
        let tail = 3.0 * h / 8.0 * (g[m - 3] + 3.0 * g[m - 2] + 3.0 * g[m - 1] + g[m]);
        Ok(if m == 3 { tail } else { simpson(0, m - 3) + tail })
    }
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, depth)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelShape {
    /// `w0 · max(0, 1 - |x|/Rw)`.
    Triangle,
    /// Gaussian core of standard deviation `Rw/6`, compactly supported on
    /// `[-Rw, Rw]`. Built as the self-convolution of a Gaussian cut at
    /// `±Rw/2`, which keeps it of positive type.
    TruncatedGaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteractionKernel {
    pub shape: KernelShape,
    pub w0: f64,
    pub range: f64,
}

impl Default for InteractionKernel {
    fn default() -> Self {
        Self::triangle(1.0, 0.5)
    }
}

impl InteractionKernel {
    pub fn triangle(w0: f64, range: f64) -> Self {
        Self { shape: KernelShape::Triangle, w0, range }
    }

    pub fn truncated_gaussian(w0: f64, range: f64) -> Self {
        Self { shape: KernelShape::TruncatedGaussian, w0, range }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.w0.is_finite() && self.w0 > 0.0) {
            return Err(Error::invalid("kernel.w0", format!("must be positive, got {}", self.w0)));
        }
        if !(self.range.is_finite() && self.range > 0.0) {
            return Err(Error::invalid("kernel.Rw", format!("must be positive, got {}", self.range)));
        }
        Ok(())
    }

    pub fn eval(&self, x: f64) -> f64 {
        let a = x.abs();
        if a >= self.range {
            return 0.0;
        }
        match self.shape {
            KernelShape::Triangle => self.w0 * (1.0 - a / self.range),
            KernelShape::TruncatedGaussian => {
                let s = self.range / (6.0 * std::f64::consts::SQRT_2);
                let num = libm::erf((self.range - a) / (2.0 * s));
                let den = libm::erf(self.range / (2.0 * s));
                self.w0 * (-a * a / (4.0 * s * s)).exp() * num / den
            }
        }
    }

    /// `‖w‖_∞`, attained at the origin.
    pub fn sup_norm(&self) -> f64 {
        self.w0
    }

    /// `∫w` on the continuum.
    pub fn integral(&self) -> f64 {
        match self.shape {
            KernelShape::Triangle => self.w0 * self.range,
            KernelShape::TruncatedGaussian => 2.0 * adaptive_simpson(&|x| self.eval(x), 0.0, self.range, 1e-14, 40),
        }
    }

    /// Samples `w(k·h)` for `k = 0..=K` with `K·h < range`.
    pub fn taps(&self, h: f64) -> Vec<f64> {
        let k_max = (self.range / h).floor() as usize;
        (0..=k_max).map(|k| self.eval(k as f64 * h)).collect()
    }
}

/// Real grid amplitude with a target `L²` mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveFunction {
    pub grid: Grid1D,
    pub values: Vec<f64>,
    pub mass: f64,
}

impl WaveFunction {
    pub fn new(grid: Grid1D, values: Vec<f64>, mass: f64) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::GridMismatch);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("u", "values must be finite"));
        }
        if !(mass.is_finite() && mass >= 0.0) {
            return Err(Error::invalid("mass", format!("must be >= 0, got {mass}")));
        }
        Ok(Self { grid, values, mass })
    }

    /// Sample `f` on the grid, zero the walls and scale to `mass`.
    pub fn from_fn<F: Fn(f64) -> f64>(grid: Grid1D, mass: f64, f: F) -> Result<Self> {
        let n = grid.n_points();
        let mut values: Vec<f64> = (0..n).map(|i| f(grid.x(i))).collect();
        values[0] = 0.0;
        values[n - 1] = 0.0;
        let mut u = Self::new(grid, values, mass)?;
        u.normalize();
        Ok(u)
    }

    pub fn norm_sq(&self) -> f64 {
        self.grid.inner(&self.values, &self.values)
    }

    /// Rescale to the target mass. A zero field stays zero.
    pub fn normalize(&mut self) {
        let ns = self.norm_sq();
        if ns > 0.0 {
            let c = (self.mass / ns).sqrt();
            self.values.iter_mut().for_each(|v| *v *= c);
        }
    }

    pub fn density(&self) -> Vec<f64> {
        self.values.iter().map(|v| v * v).collect()
    }

    pub fn reflect(&self) -> Self {
        let mut values = self.values.clone();
        values.reverse();
        Self { grid: self.grid, values, mass: self.mass }
    }
}

/// `(w∗ρ)(x_i) = Σ_j c_j w(x_i - x_j) ρ_j` with trapezoid weights `c_j`.
pub fn convolve_density(w: &InteractionKernel, grid: &Grid1D, rho: &[f64]) -> Result<Vec<f64>> {
    convolve_density_with(w, grid, rho, Exec::default())
}

pub fn convolve_density_with(w: &InteractionKernel, grid: &Grid1D, rho: &[f64], exec: Exec) -> Result<Vec<f64>> {
    if rho.len() != grid.n_points() {
        return Err(Error::GridMismatch);
    }
    let h = grid.spacing();
    if w.range < h {
        return Err(Error::UnresolvedKernel { range: w.range, spacing: h });
    }
    let taps = w.taps(h);
    Ok(convolve_taps(&taps, grid, rho, exec))
}

/// Symmetric windowed convolution with precomputed taps `t[k] = w(k·h)`.
pub(crate) fn convolve_taps(taps: &[f64], grid: &Grid1D, rho: &[f64], exec: Exec) -> Vec<f64> {
    let n = rho.len();
    let h = grid.spacing();
    let k_max = taps.len() - 1;
    let weighted: Vec<f64> = rho.iter().enumerate().map(|(j, r)| grid.weight(j) / h * r).collect();
    let mut out = vec![0.0; n];
    exec.fill(&mut out, |i| {
        let lo = i.saturating_sub(k_max);
        let hi = (i + k_max).min(n - 1);
        let mut acc = 0.0;
        for j in lo..=hi {
            acc += taps[i.abs_diff(j)] * weighted[j];
        }
        h * acc
    });
    out
}

/// Sampled Fourier transform of a kernel and the positive-type verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FourierReport {
    pub min_hat: f64,
    pub hat_zero: f64,
    pub pass: bool,
}

pub fn kernel_fourier_check(w: &InteractionKernel, grid: &Grid1D) -> FourierReport {
    let h = grid.spacing();
    fourier_check_taps(&w.taps(h), h, grid.n_points())
}

/// `ŵ(k_m) = h Σ_j t_|j| cos(k_m j h)` on `k_m = 2πm/(n h)`, `m = 0..=n/2`.
pub fn fourier_check_taps(taps: &[f64], h: f64, n: usize) -> FourierReport {
    let hat = |m: usize| -> f64 {
        let theta = 2.0 * std::f64::consts::PI * m as f64 / n as f64;
        let tail: f64 = taps.iter().enumerate().skip(1).map(|(j, t)| t * (theta * j as f64).cos()).sum();
        h * (taps[0] + 2.0 * tail)
    };
    let hat_zero = hat(0);
    let min_hat = (0..=n / 2).map(hat).fold(f64::INFINITY, f64::min);
    FourierReport { min_hat, hat_zero, pass: min_hat >= -1e-10 * hat_zero.abs() }
}
