//! Overlaps and tunneling energies between the two localized minimizers, the
//! localization criterion, and the IMS splitting identity.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::fit::linear_fit;
use crate::hartree::{apply_mean_field, default_half_width, minimize_hartree, HartreeSolution, SolverOptions};
use crate::model::{agmon_distance, eval_potential, Grid1D, InteractionKernel, TrapKind, TrapSpec, WaveFunction};
use crate::tridiag::SymTridiagonal;

/// `∫u₋u₊` by the grid quadrature.
pub fn overlap_integral(u_left: &WaveFunction, u_right: &WaveFunction) -> Result<f64> {
    if u_left.grid != u_right.grid {
        return Err(Error::GridMismatch);
    }
    Ok(u_left.grid.inner(&u_left.values, &u_right.values))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TunnelingReport {
    pub separation_l: f64,
    pub overlap: f64,
    /// `⟨u₋, (−Δ + V_N) u₊⟩`.
    pub t: f64,
    /// Same quantity through the tunneling potential.
    pub t_potential: f64,
    pub two_route_gap: f64,
    /// `2·A(L/2)`.
    pub agmon_exponent: f64,
    /// `−log(overlap) / (2A(L/2))`.
    pub log_ratio_overlap: f64,
    pub t_negative: bool,
}

fn require_double_well(trap: &TrapSpec) -> Result<()> {
    trap.validate()?;
    if trap.kind != TrapKind::DoubleWell {
        return Err(Error::invalid("trap.kind", "tunneling needs a double well"));
    }
    Ok(())
}

/// Tunneling energy by the kinetic form and by the tunneling-potential form.
///
/// `u_right` must be the minimizer of the well at `+L/2` with chemical
/// potential `mu`; `u_left` its mirror image.
pub fn tunneling_energy(
    u_left: &WaveFunction,
    u_right: &WaveFunction,
    trap: &TrapSpec,
    w: &InteractionKernel,
    lambda: f64,
    mu: f64,
) -> Result<TunnelingReport> {
    require_double_well(trap)?;
    if u_left.grid != u_right.grid {
        return Err(Error::GridMismatch);
    }
    let g = u_left.grid;
    let vn = trap.sample(&g);
    let zero = vec![0.0; g.n_points()];
    let h_right = apply_mean_field(&g, &vn, &zero, 0.0, &u_right.values);
    let h_left = apply_mean_field(&g, &vn, &zero, 0.0, &u_left.values);
    // symmetrized so that swapping the two wells is exact to roundoff
    let t = 0.5 * (g.inner(&u_left.values, &h_right) + g.inner(&u_right.values, &h_left));

    let right = trap.right_well();
    let phi = crate::model::convolve_density(w, &g, &u_right.density())?;
    let vt: Vec<f64> = (0..g.n_points())
        .map(|i| vn[i] - eval_potential(&right, g.x(i)) - lambda * phi[i] + mu)
        .collect();
    let vt_u: Vec<f64> = vt.iter().zip(&u_right.values).map(|(a, b)| a * b).collect();
    let t_potential = g.inner(&u_left.values, &vt_u);

    let gap = (t - t_potential).abs();
    if gap > 1e-10f64.max(1e-3 * t.abs()) {
        return Err(Error::TunnelingMismatch { kinetic: t, potential: t_potential });
    }
    let overlap = overlap_integral(u_left, u_right)?;
    let agmon_exponent = 2.0 * agmon_distance(0.5 * trap.separation_l, trap.s)?;
    Ok(TunnelingReport {
        separation_l: trap.separation_l,
        overlap,
        t,
        t_potential,
        two_route_gap: gap,
        agmon_exponent,
        log_ratio_overlap: -overlap.ln() / agmon_exponent,
        t_negative: t < 0.0,
    })
}

/// Right-well minimizer on the double-well grid and its mirror image.
#[derive(Debug, Clone)]
pub struct WellPair {
    pub right: HartreeSolution,
    pub left: WaveFunction,
}

pub fn solve_well_pair(
    trap: &TrapSpec,
    w: &InteractionKernel,
    lambda: f64,
    grid: &Grid1D,
    opts: &SolverOptions,
) -> Result<WellPair> {
    require_double_well(trap)?;
    let right = minimize_hartree(&trap.right_well(), w, lambda, 1.0, grid, opts)?;
    let left = right.u.reflect();
    Ok(WellPair { right, left })
}

/// Grid for a double-well problem: explicit half-width or the default box rule.
pub fn double_well_grid(trap: &TrapSpec, w: &InteractionKernel, lambda: f64, n: usize, half_width: Option<f64>) -> Result<Grid1D> {
    Grid1D::new(n, half_width.unwrap_or_else(|| default_half_width(trap, w, lambda)))
}

pub fn tunneling_for(
    trap: &TrapSpec,
    w: &InteractionKernel,
    lambda: f64,
    grid: &Grid1D,
    opts: &SolverOptions,
) -> Result<TunnelingReport> {
    let pair = solve_well_pair(trap, w, lambda, grid, opts)?;
    tunneling_energy(&pair.left, &pair.right.u, trap, w, lambda, pair.right.mu)
}

/// Tunneling reports along a list of separations; each point gets its own grid.
pub fn tunneling_sweep(
    separations: &[f64],
    s: f64,
    w: &InteractionKernel,
    lambda: f64,
    grid_n: usize,
    half_width: Option<f64>,
    opts: &SolverOptions,
    exec: Exec,
) -> Vec<Result<TunnelingReport>> {
    exec.map_slice(separations, |&l| {
        let trap = TrapSpec::double(s, l);
        trap.validate()?;
        let grid = double_well_grid(&trap, w, lambda, grid_n, half_width)?;
        tunneling_for(&trap, w, lambda, &grid, opts)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepFit {
    /// Slope of `log|T|` against `−2A(L/2)`.
    pub t_slope: f64,
    /// Slope of `log(overlap)` against `−2A(L/2)`.
    pub overlap_slope: f64,
}

pub fn fit_sweep(reports: &[TunnelingReport]) -> Option<SweepFit> {
    let x: Vec<f64> = reports.iter().map(|r| -r.agmon_exponent).collect();
    let yt: Vec<f64> = reports.iter().map(|r| r.t.abs().ln()).collect();
    let yo: Vec<f64> = reports.iter().map(|r| r.overlap.ln()).collect();
    Some(SweepFit { t_slope: linear_fit(&x, &yt)?.0, overlap_slope: linear_fit(&x, &yo)?.0 })
}

/// `log N ≤ 2(1−ε)A(L/2)`.
pub fn localization_criterion(n: u64, l: f64, s: f64, epsilon: f64) -> Result<bool> {
    if n < 2 {
        return Err(Error::invalid("N", format!("need N >= 2, got {n}")));
    }
    if !(l > 0.0) {
        return Err(Error::invalid("L", format!("must be positive, got {l}")));
    }
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::invalid("epsilon", format!("must lie in [0, 1), got {epsilon}")));
    }
    Ok((n as f64).ln() <= 2.0 * (1.0 - epsilon) * agmon_distance(0.5 * l, s)?)
}

/// Quintic smoothstep, C² with zero first and second derivatives at 0 and 1.
fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
}

fn smoothstep_derivative(t: f64) -> f64 {
    if !(0.0..=1.0).contains(&t) {
        return 0.0;
    }
    30.0 * t * t * (1.0 - t) * (1.0 - t)
}

/// Quadratic partition of unity `χ₋² + χ₊² = 1` switching on `[−ℓ, ℓ]`.
#[derive(Debug, Clone)]
pub struct Partition {
    pub chi_minus: Vec<f64>,
    pub chi_plus: Vec<f64>,
    /// `|χ₋'|² + |χ₊'|²` from the analytic derivative.
    pub grad_sq: Vec<f64>,
}

impl Partition {
    pub fn new(grid: &Grid1D, ell: f64) -> Self {
        let angle = |x: f64| 0.5 * std::f64::consts::PI * smoothstep((x + ell) / (2.0 * ell));
        let xs = grid.points();
        let chi_plus = xs.iter().map(|&x| angle(x).sin()).collect();
        let chi_minus = xs.iter().map(|&x| angle(x).cos()).collect();
        let grad_sq = xs
            .iter()
            .map(|&x| (0.5 * std::f64::consts::PI * smoothstep_derivative((x + ell) / (2.0 * ell)) / (2.0 * ell)).powi(2))
            .collect();
        Self { chi_minus, chi_plus, grad_sq }
    }

    pub fn unity_defect(&self) -> f64 {
        self.chi_minus.iter().zip(&self.chi_plus).map(|(a, b)| (a * a + b * b - 1.0).abs()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImsReport {
    /// `‖LHS − RHS‖_max / ‖LHS‖_max` with the exact grid localization error.
    pub defect: f64,
    /// Same with the diagonal remainder `−|∇χ₋|² − |∇χ₊|²` of the continuum formula.
    pub continuum_form_defect: f64,
    pub partition_defect: f64,
}

/// Assemble `−Δ + V_N` and `χ₋H̃⁻χ₋ + χ₊H̃⁺χ₊` on the grid and compare.
///
/// The modified potentials carry the trapping part `V^± + (V^∓ − V^±)η_±`
/// and the localization error. On a grid that error is the tridiagonal
/// operator with zero diagonal and entries `Σ_k(χ_k(x_{i+1}) − χ_k(x_i))²/(2h²)`,
/// divided edgewise by `Σ_k χ_k(x_i)χ_k(x_{i+1})`; in the continuum it becomes
/// the familiar multiplication by `|∇χ₋|² + |∇χ₊|²`.
pub fn ims_split_residual(trap: &TrapSpec, ell: f64, grid: &Grid1D) -> Result<ImsReport> {
    require_double_well(trap)?;
    let h = grid.spacing();
    if !(ell >= 4.0 * h) {
        return Err(Error::invalid("ell", format!("switching width {ell} is below 4 grid spacings ({})", 4.0 * h)));
    }
    let part = Partition::new(grid, ell);
    let vn = trap.sample(grid);
    let a = 0.5 * trap.separation_l;
    let xs = grid.points();
    let v_plus: Vec<f64> = xs.iter().map(|&x| (x - a).abs().powf(trap.s)).collect();
    let v_minus: Vec<f64> = xs.iter().map(|&x| (x + a).abs().powf(trap.s)).collect();
    // η₊ = 1 on [−ℓ, 0), 0 on [0, ∞), smoothly off below −ℓ; η₋ is its mirror
    let eta_plus: Vec<f64> = xs
        .iter()
        .map(|&x| if x >= 0.0 { 0.0 } else if x >= -ell { 1.0 } else { 1.0 - smoothstep((-x - ell) / ell) })
        .collect();
    let eta_minus: Vec<f64> = eta_plus.iter().rev().copied().collect();
    let vt_plus: Vec<f64> = (0..xs.len()).map(|i| v_plus[i] + (v_minus[i] - v_plus[i]) * eta_plus[i]).collect();
    let vt_minus: Vec<f64> = (0..xs.len()).map(|i| v_minus[i] + (v_plus[i] - v_minus[i]) * eta_minus[i]).collect();

    let lhs = interior_hamiltonian(&vn, h);
    let chis = [part.chi_minus.as_slice(), part.chi_plus.as_slice()];
    let defect = localized_defect(&lhs, chis, [&vt_minus, &vt_plus], h, None);
    let continuum_form_defect = localized_defect(&lhs, chis, [&vt_minus, &vt_plus], h, Some(&part.grad_sq));
    Ok(ImsReport { defect, continuum_form_defect, partition_defect: part.unity_defect() })
}

fn interior_hamiltonian(v: &[f64], h: f64) -> SymTridiagonal {
    let n = v.len();
    let h2 = h * h;
    SymTridiagonal::new((1..n - 1).map(|i| 2.0 / h2 + v[i]).collect(), vec![-1.0 / h2; n - 3])
}

/// Relative max-entry defect of `Σ_k X_k (−Δ_h + Ṽ_k) X_k` against `lhs`.
///
/// With `grad_sq = None` the localization error is the exact grid operator;
/// otherwise it is the diagonal `grad_sq`.
fn localized_defect(lhs: &SymTridiagonal, chis: [&[f64]; 2], vt: [&[f64]; 2], h: f64, grad_sq: Option<&[f64]>) -> f64 {
    let m = lhs.len();
    let h2 = h * h;
    let mut diag = vec![0.0; m];
    let mut off = vec![0.0; m - 1];
    for i in 0..m {
        let p = i + 1;
        for k in 0..2 {
            let c = chis[k][p];
            let local = vt[k][p] - grad_sq.map_or(0.0, |g| g[p]);
            diag[i] += c * c * (2.0 / h2 + local);
        }
        if i + 1 < m {
            let q = p + 1;
            let overlap: f64 = (0..2).map(|k| chis[k][p] * chis[k][q]).sum();
            let g_edge: f64 = (0..2).map(|k| (chis[k][q] - chis[k][p]).powi(2)).sum::<f64>() / (2.0 * h2);
            let g_tilde = if grad_sq.is_some() { 0.0 } else { g_edge / overlap };
            for k in 0..2 {
                off[i] += chis[k][p] * chis[k][q] * (-1.0 / h2 - g_tilde);
            }
        }
    }
    let scale = lhs.diag.iter().chain(&lhs.off).fold(0.0f64, |m, v| m.max(v.abs()));
    let d_diag = lhs.diag.iter().zip(&diag).map(|(a, b)| (a - b).abs());
    let d_off = lhs.off.iter().zip(&off).map(|(a, b)| (a - b).abs());
    d_diag.chain(d_off).fold(0.0, f64::max) / scale
}
