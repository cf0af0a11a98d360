//! Exact two-mode Bose-Hubbard model on the Fock basis `|n, N−n⟩`,
//! `n` counting particles in the left well.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::tridiag::SymTridiagonal;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoModeParams {
    pub n: usize,
    pub e_minus: f64,
    pub e_plus: f64,
    pub t: f64,
    pub u: f64,
}

impl TwoModeParams {
    pub fn symmetric(n: usize, t: f64, u: f64) -> Self {
        Self { n, e_minus: 0.0, e_plus: 0.0, t, u }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || !self.n.is_multiple_of(2) {
            return Err(Error::invalid("N", format!("particle number must be even and >= 2, got {}", self.n)));
        }
        if !(self.u.is_finite() && self.u >= 0.0) {
            return Err(Error::invalid("U", format!("must be >= 0, got {}", self.u)));
        }
        for (key, v) in [("T", self.t), ("e_minus", self.e_minus), ("e_plus", self.e_plus)] {
            if !v.is_finite() {
                return Err(Error::invalid(key, "must be finite"));
            }
        }
        Ok(())
    }

    /// `(e₊ + e₋)N/2 + U·N(N−2)/4`, the energy of `|N/2, N/2⟩`.
    pub fn localized_energy(&self) -> f64 {
        let n = self.n as f64;
        0.5 * (self.e_plus + self.e_minus) * n + 0.25 * self.u * n * (n - 2.0)
    }
}

/// `√(n(N−n+1))`, the hopping amplitude between `n−1` and `n`.
fn hop(n: usize, total: usize) -> f64 {
    ((n * (total - n + 1)) as f64).sqrt()
}

pub fn build_hamiltonian(p: &TwoModeParams) -> Result<SymTridiagonal> {
    p.validate()?;
    let total = p.n;
    let diag = (0..=total)
        .map(|n| {
            let (a, b) = (n as f64, (total - n) as f64);
            p.e_minus * a + p.e_plus * b + 0.5 * p.u * (a * (a - 1.0) + b * (b - 1.0))
        })
        .collect();
    let off = (1..=total).map(|n| p.t * hop(n, total)).collect();
    Ok(SymTridiagonal::new(diag, off))
}

/// Normalized amplitudes over `|n, N−n⟩`, `n = 0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoModeState {
    pub coeffs: Vec<Complex64>,
}

impl TwoModeState {
    pub fn particle_number(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    fn normalized(mut coeffs: Vec<Complex64>) -> Self {
        let nrm = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        coeffs.iter_mut().for_each(|c| *c /= nrm);
        Self { coeffs }
    }

    fn from_real(v: Vec<f64>) -> Self {
        Self::normalized(v.into_iter().map(|x| Complex64::new(x, 0.0)).collect())
    }

    /// `max_n |c_n − c_{N−n}|`.
    pub fn exchange_defect(&self) -> f64 {
        let n = self.coeffs.len();
        (0..n).map(|i| (self.coeffs[i] - self.coeffs[n - 1 - i]).norm()).fold(0.0, f64::max)
    }
}

pub fn ground_state(p: &TwoModeParams) -> Result<(f64, TwoModeState)> {
    let h = build_hamiltonian(p)?;
    let (energy, mut v) = h.eigenpairs(0, 1)?.pop().ok_or_else(|| Error::Eigen("empty spectrum".into()))?;
    let mid = v[p.n / 2];
    if mid < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    Ok((energy, TwoModeState::from_real(v)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum StateKind {
    Fock(usize),
    Coherent,
    Gaussian(f64),
    Squeezed { theta: f64, phi: f64 },
}

/// `θ = N^{−α−1/2}` and `φ = arctan N^{α−1/2}`.
pub fn squeezing_angles(n: usize, alpha: f64) -> (f64, f64) {
    let n = n as f64;
    (n.powf(-alpha - 0.5), n.powf(alpha - 0.5).atan())
}

pub fn make_state(kind: StateKind, n: usize) -> Result<TwoModeState> {
    if n == 0 {
        return Err(Error::invalid("N", "need at least one particle"));
    }
    let half = 0.5 * n as f64;
    match kind {
        StateKind::Fock(n0) => {
            if n0 > n {
                return Err(Error::invalid("n0", format!("must lie in [0, {n}], got {n0}")));
            }
            let mut v = vec![0.0; n + 1];
            v[n0] = 1.0;
            Ok(TwoModeState::from_real(v))
        }
        StateKind::Coherent => Ok(TwoModeState::from_real(binomial_amplitudes(n))),
        StateKind::Gaussian(sigma) => {
            if !(sigma.is_finite() && sigma > 0.0) {
                return Err(Error::invalid("sigma", format!("must be positive, got {sigma}")));
            }
            Ok(TwoModeState::from_real((0..=n).map(|k| (-(k as f64 - half).powi(2) / (sigma * sigma)).exp()).collect()))
        }
        StateKind::Squeezed { theta, phi } => {
            if !(theta.is_finite() && phi.is_finite()) {
                return Err(Error::invalid("squeezed", "angles must be finite"));
            }
            let twisted: Vec<Complex64> = binomial_amplitudes(n)
                .into_iter()
                .enumerate()
                .map(|(k, c)| c * Complex64::from_polar(1.0, -theta * (k as f64 - half).powi(2)))
                .collect();
            Ok(TwoModeState::normalized(rotate_jx(&twisted, phi)?))
        }
    }
}

/// `2^{−N/2} √(N choose n)`, the `J_x = N/2` eigenvector.
fn binomial_amplitudes(n: usize) -> Vec<f64> {
    let ln_n = libm::lgamma(n as f64 + 1.0);
    (0..=n)
        .map(|k| {
            let ln_c = ln_n - libm::lgamma(k as f64 + 1.0) - libm::lgamma((n - k) as f64 + 1.0);
            (0.5 * ln_c - 0.5 * n as f64 * std::f64::consts::LN_2).exp()
        })
        .collect()
}

/// The real symmetric tridiagonal `J_x`.
fn jx_matrix(n: usize) -> SymTridiagonal {
    SymTridiagonal::new(vec![0.0; n + 1], (1..=n).map(|k| 0.5 * hop(k, n)).collect())
}

/// `e^{+iφJ_x} c` through the eigendecomposition of `J_x`.
///
/// This sense of rotation carries `J_z` towards `J_y` for positive `φ`, which is
/// what turns the one-axis-twisted state into a number-squeezed one.
pub fn rotate_jx(c: &[Complex64], phi: f64) -> Result<Vec<Complex64>> {
    let n = c.len() - 1;
    let pairs = jx_matrix(n).eigenpairs(0, n + 1)?;
    let mut out = vec![Complex64::new(0.0, 0.0); n + 1];
    for (m, v) in &pairs {
        let proj: Complex64 = v.iter().zip(c).map(|(a, b)| b * a).sum();
        let coef = proj * Complex64::from_polar(1.0, phi * m);
        out.iter_mut().zip(v).for_each(|(o, a)| *o += coef * a);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObservableReport {
    pub mean_n_minus: f64,
    pub var_n_minus: f64,
    pub jx: f64,
    pub jy: f64,
    pub jz: f64,
    pub var_jx: f64,
    pub var_jy: f64,
    pub var_jz: f64,
    /// `⟨Ψ, H Ψ⟩`.
    pub energy: f64,
    /// `2T⟨J_x⟩ + U⟨J_z²⟩ + (e₋ − e₊)⟨J_z⟩` plus the constant `E_loc`.
    pub energy_collective: f64,
    /// `⟨ΔJ_y²⟩⟨ΔJ_z²⟩ − ⟨J_x⟩²/4`.
    pub uncertainty_product_gap: f64,
}

fn apply_jx(c: &[Complex64]) -> Vec<Complex64> {
    let n = c.len() - 1;
    (0..=n)
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            if k > 0 {
                acc += 0.5 * hop(k, n) * c[k - 1];
            }
            if k < n {
                acc += 0.5 * hop(k + 1, n) * c[k + 1];
            }
            acc
        })
        .collect()
}

fn apply_jy(c: &[Complex64]) -> Vec<Complex64> {
    let n = c.len() - 1;
    let i = Complex64::i();
    (0..=n)
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            if k > 0 {
                acc -= 0.5 * i * hop(k, n) * c[k - 1];
            }
            if k < n {
                acc += 0.5 * i * hop(k + 1, n) * c[k + 1];
            }
            acc
        })
        .collect()
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn observables(state: &TwoModeState, p: &TwoModeParams) -> Result<ObservableReport> {
    p.validate()?;
    if state.particle_number() != p.n {
        return Err(Error::invalid("N", format!("state has {} particles, parameters {}", state.particle_number(), p.n)));
    }
    let c = &state.coeffs;
    let half = 0.5 * p.n as f64;
    let probs: Vec<f64> = c.iter().map(|z| z.norm_sqr()).collect();
    let mean_n: f64 = probs.iter().enumerate().map(|(k, q)| k as f64 * q).sum();
    let var_n: f64 = probs.iter().enumerate().map(|(k, q)| (k as f64 - mean_n).powi(2) * q).sum();
    let jz = mean_n - half;

    let jxc = apply_jx(c);
    let jyc = apply_jy(c);
    let jx = dot(c, &jxc).re;
    let jy = dot(c, &jyc).re;
    let var_jx = dot(&jxc, &jxc).re - jx * jx;
    let var_jy = dot(&jyc, &jyc).re - jy * jy;

    let h = build_hamiltonian(p)?;
    let mut energy = 0.0;
    for k in 0..=p.n {
        let mut hc = h.diag[k] * c[k];
        if k > 0 {
            hc += h.off[k - 1] * c[k - 1];
        }
        if k < p.n {
            hc += h.off[k] * c[k + 1];
        }
        energy += (c[k].conj() * hc).re;
    }
    let jz2 = var_n + jz * jz;
    let energy_collective = 2.0 * p.t * jx + p.u * jz2 + (p.e_minus - p.e_plus) * jz + p.localized_energy();
    if (energy - energy_collective).abs() > 1e-8 * (energy.abs() + 1.0) {
        return Err(Error::EnergyMismatch { first: energy, second: energy_collective });
    }
    Ok(ObservableReport {
        mean_n_minus: mean_n,
        var_n_minus: var_n,
        jx,
        jy,
        jz,
        var_jx,
        var_jy,
        var_jz: var_n,
        energy,
        energy_collective,
        uncertainty_product_gap: var_jy * var_n - 0.25 * jx * jx,
    })
}

/// `(U/2)⟨N₋(N₋−1) + N₊(N₊−1)⟩`.
pub fn interaction_energy(state: &TwoModeState, u: f64) -> f64 {
    let total = state.particle_number();
    state
        .coeffs
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let (a, b) = (k as f64, (total - k) as f64);
            0.5 * u * (a * (a - 1.0) + b * (b - 1.0)) * c.norm_sqr()
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianEnergy {
    pub energy: f64,
    /// `3 ≤ σ ≤ √N/3`, where the closed form is meant to hold.
    pub in_window: bool,
}

/// `E_loc + T·N(1 − 1/(2σ²)) + U·σ²/4`.
pub fn gaussian_energy_closed_form(p: &TwoModeParams, sigma: f64) -> Result<GaussianEnergy> {
    p.validate()?;
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::invalid("sigma", format!("must be positive, got {sigma}")));
    }
    let n = p.n as f64;
    let energy = p.localized_energy() + p.t * n * (1.0 - 0.5 / (sigma * sigma)) + 0.25 * p.u * sigma * sigma;
    Ok(GaussianEnergy { energy, in_window: sigma >= 3.0 && sigma <= n.sqrt() / 3.0 })
}

/// `σ* = (2|T|N/U)^{1/4}`, the minimizer of the closed form.
pub fn optimal_sigma(p: &TwoModeParams) -> f64 {
    (2.0 * p.t.abs() * p.n as f64 / p.u).powf(0.25)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    Fock,
    Josephson,
    Rabi,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::Fock => "Fock",
            Regime::Josephson => "Josephson",
            Regime::Rabi => "Rabi",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegimeReport {
    pub regime: Regime,
    /// `ln(|T| / (U/N))`; negative inside the Fock regime.
    pub margin_fock: f64,
    /// `ln(|T| / (U·N))`; positive inside the Rabi regime.
    pub margin_rabi: f64,
}

pub fn classify_regime(p: &TwoModeParams) -> Result<RegimeReport> {
    p.validate()?;
    let n = p.n as f64;
    let t = p.t.abs();
    if p.u == 0.0 {
        return Ok(RegimeReport { regime: Regime::Rabi, margin_fock: f64::INFINITY, margin_rabi: f64::INFINITY });
    }
    let margin_fock = (t / (p.u / n)).ln();
    let margin_rabi = (t / (p.u * n)).ln();
    let regime = if t < p.u / n {
        Regime::Fock
    } else if t > p.u * n {
        Regime::Rabi
    } else {
        Regime::Josephson
    };
    Ok(RegimeReport { regime, margin_fock, margin_rabi })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossoverRow {
    pub t: f64,
    pub ratio_t_over_u: f64,
    pub var_n_minus: f64,
    pub jx: f64,
    pub energy: f64,
    pub regime: Regime,
    pub exchange_defect: f64,
}

pub fn crossover_scan(n: usize, u: f64, t_list: &[f64], exec: Exec) -> Result<Vec<CrossoverRow>> {
    exec.map_slice(t_list, |&t| {
        let p = TwoModeParams::symmetric(n, t, u);
        let (_, state) = ground_state(&p)?;
        let obs = observables(&state, &p)?;
        Ok(CrossoverRow {
            t,
            ratio_t_over_u: t.abs() / u,
            var_n_minus: obs.var_n_minus,
            jx: obs.jx,
            energy: obs.energy,
            regime: classify_regime(&p)?.regime,
            exchange_defect: state.exchange_defect(),
        })
    })
    .into_iter()
    .collect()
}

/// `count` values of `T = −10^x` with `x` evenly spaced over `[log_lo, log_hi]`.
pub fn log_spaced_tunneling(log_lo: f64, log_hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![-10f64.powf(log_lo)],
        _ => (0..count).map(|k| -10f64.powf(log_lo + (log_hi - log_lo) * k as f64 / (count - 1) as f64)).collect(),
    }
}
