//! Hartree functional, its constrained minimizer and the diagnostics built on it.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::model::{
    agmon_distance, convolve_taps, eval_potential, Grid1D, InteractionKernel, TrapKind, TrapSpec, WaveFunction,
};
use crate::tridiag::SymTridiagonal;

/// Stopping rule and safeguards of the gradient flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Target for `‖(H[u] − μ)u‖ / ‖u‖`.
    pub tol: f64,
    pub max_iter: usize,
    /// Reject minimizers that have not decayed before the walls.
    pub check_box: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 200_000, check_box: true }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::invalid("tol", format!("must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HartreeSolution {
    pub u: WaveFunction,
    pub e_h: f64,
    pub mu: f64,
    pub lambda: f64,
    pub residual: f64,
    pub iterations: usize,
    /// Potential samples the solve used.
    #[serde(skip)]
    pub potential: Vec<f64>,
    #[serde(skip)]
    pub kernel: InteractionKernel,
    /// `∫ρ (w∗ρ)`.
    pub quartic: f64,
}

impl HartreeSolution {
    pub fn grid(&self) -> &Grid1D {
        &self.u.grid
    }

    /// `w∗|u|²` on the grid.
    pub fn mean_field(&self) -> Vec<f64> {
        let taps = self.kernel.taps(self.grid().spacing());
        convolve_taps(&taps, self.grid(), &self.u.density(), Exec::default())
    }
}

/// Pieces of the Hartree functional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyParts {
    pub kinetic: f64,
    pub potential: f64,
    /// `∫ρ (w∗ρ)`, without the `λ/2`.
    pub quartic: f64,
}

impl EnergyParts {
    pub fn total(&self, lambda: f64) -> f64 {
        self.kinetic + self.potential + 0.5 * lambda * self.quartic
    }
}

pub fn kinetic_energy(grid: &Grid1D, u: &[f64]) -> f64 {
    u.windows(2).map(|p| (p[1] - p[0]).powi(2)).sum::<f64>() / grid.spacing()
}

pub fn energy_parts(grid: &Grid1D, u: &[f64], potential: &[f64], w: &InteractionKernel) -> Result<EnergyParts> {
    if u.len() != grid.n_points() || potential.len() != grid.n_points() {
        return Err(Error::GridMismatch);
    }
    let rho: Vec<f64> = u.iter().map(|v| v * v).collect();
    let vrho: Vec<f64> = rho.iter().zip(potential).map(|(r, v)| r * v).collect();
    let h = grid.spacing();
    if w.range < h {
        return Err(Error::UnresolvedKernel { range: w.range, spacing: h });
    }
    let phi = convolve_taps(&w.taps(h), grid, &rho, Exec::default());
    Ok(EnergyParts { kinetic: kinetic_energy(grid, u), potential: grid.integrate(&vrho), quartic: grid.inner(&rho, &phi) })
}

/// Hartree functional `∫|u'|² + V|u|² + (λ/2)∬|u|² w |u|²` on the grid.
pub fn hartree_energy(u: &WaveFunction, trap: &TrapSpec, w: &InteractionKernel, lambda: f64) -> Result<f64> {
    let v = trap.sample(&u.grid);
    Ok(energy_parts(&u.grid, &u.values, &v, w)?.total(lambda))
}

/// Mean-field operator `-Δ_h + V + λφ` on the interior points.
fn mean_field_operator(grid: &Grid1D, potential: &[f64], phi: &[f64], lambda: f64) -> SymTridiagonal {
    let n = grid.n_points();
    let h2 = grid.spacing().powi(2);
    let diag = (1..n - 1).map(|i| 2.0 / h2 + potential[i] + lambda * phi[i]).collect();
    let off = vec![-1.0 / h2; n - 3];
    SymTridiagonal::new(diag, off)
}

/// `(-Δ_h + V + λφ)u` on the full grid, zero at the walls.
pub(crate) fn apply_mean_field(grid: &Grid1D, potential: &[f64], phi: &[f64], lambda: f64, u: &[f64]) -> Vec<f64> {
    let n = u.len();
    let h2 = grid.spacing().powi(2);
    let mut out = vec![0.0; n];
    for i in 1..n - 1 {
        out[i] = (2.0 * u[i] - u[i - 1] - u[i + 1]) / h2 + (potential[i] + lambda * phi[i]) * u[i];
    }
    out
}

/// Box half-width with `V ≥ 50·μ` and Agmon distance at least 30 at the wall.
///
/// The second condition matters for steep wells, where `V = 50μ` is reached
/// while the minimizer is still around `10⁻³` of its peak.
pub fn default_half_width(trap: &TrapSpec, w: &InteractionKernel, lambda: f64) -> f64 {
    let mu_bound = gaussian_ground_bound(trap.s) + lambda * w.sup_norm();
    let by_potential = (50.0 * mu_bound).powf(1.0 / trap.s);
    let by_decay = (30.0 * (1.0 + 0.5 * trap.s)).powf(1.0 / (1.0 + 0.5 * trap.s));
    let mut hw = 1.02 * by_potential.max(by_decay);
    if trap.kind == TrapKind::DoubleWell {
        hw += 0.5 * trap.separation_l;
    }
    hw + trap.center.abs()
}

/// Gaussian variational upper bound on the lowest eigenvalue of `-d² + |x|^s`.
fn gaussian_ground_bound(s: f64) -> f64 {
    // density variance σ²: kinetic 1/(4σ²), ⟨|x|^s⟩ = σ^s 2^{s/2} Γ((s+1)/2)/√π
    let moment = 2f64.powf(0.5 * s) * libm::tgamma(0.5 * (s + 1.0)) / std::f64::consts::PI.sqrt();
    let f = |ls: f64| {
        let sig = ls.exp();
        0.25 / (sig * sig) + moment * sig.powf(s)
    };
    let (mut a, mut b) = (-5.0f64, 3.0f64);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    f(0.5 * (a + b))
}

/// Iterations without a 0.1% residual improvement before the flow gives up.
const STALL_ITERATIONS: usize = 1000;

/// Minimize the Hartree functional in `trap` at the given mass.
pub fn minimize_hartree(
    trap: &TrapSpec,
    w: &InteractionKernel,
    lambda: f64,
    mass: f64,
    grid: &Grid1D,
    opts: &SolverOptions,
) -> Result<HartreeSolution> {
    trap.validate()?;
    let potential = trap.sample(grid);
    let center = match trap.kind {
        TrapKind::SingleWell => trap.center,
        TrapKind::DoubleWell => 0.5 * trap.separation_l,
    };
    minimize_in_potential(potential, w, lambda, mass, grid, center, opts)
}

/// Minimize with tabulated potential samples, starting from a unit Gaussian at `center`.
pub fn minimize_in_potential(
    potential: Vec<f64>,
    w: &InteractionKernel,
    lambda: f64,
    mass: f64,
    grid: &Grid1D,
    center: f64,
    opts: &SolverOptions,
) -> Result<HartreeSolution> {
    w.validate()?;
    opts.validate()?;
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::invalid("lambda", format!("must be >= 0, got {lambda}")));
    }
    if !(mass.is_finite() && mass > 0.0) {
        return Err(Error::invalid("mass", format!("must be positive, got {mass}")));
    }
    if potential.len() != grid.n_points() {
        return Err(Error::GridMismatch);
    }
    let h = grid.spacing();
    if w.range < h {
        return Err(Error::UnresolvedKernel { range: w.range, spacing: h });
    }
    let n = grid.n_points();
    let taps = w.taps(h);
    let exec = Exec::default();

    let mut u = WaveFunction::from_fn(*grid, mass, |x| (-0.5 * (x - center).powi(2)).exp())?;
    let field = |u: &[f64]| -> Vec<f64> {
        let rho: Vec<f64> = u.iter().map(|v| v * v).collect();
        if lambda == 0.0 {
            vec![0.0; n]
        } else {
            convolve_taps(&taps, grid, &rho, exec)
        }
    };
    let energy = |u: &[f64], phi: &[f64]| -> f64 {
        let rho: Vec<f64> = u.iter().map(|v| v * v).collect();
        let vrho: Vec<f64> = rho.iter().zip(&potential).map(|(r, v)| r * v).collect();
        kinetic_energy(grid, u) + grid.integrate(&vrho) + 0.5 * lambda * grid.inner(&rho, phi)
    };

    let mut phi = field(&u.values);
    let mut e = energy(&u.values, &phi);
    let mut tau = 1e3;
    let tau_max = 1e6;
    let mut iterations = 0;
    let mut residual;
    // the residual has a roundoff floor near ε‖H‖; below it the flow only stalls
    let mut best = (f64::INFINITY, 0usize);
    loop {
        let hu = apply_mean_field(grid, &potential, &phi, lambda, &u.values);
        let norm2 = grid.inner(&u.values, &u.values);
        let rq = grid.inner(&u.values, &hu) / norm2;
        let defect: Vec<f64> = hu.iter().zip(&u.values).map(|(a, b)| a - rq * b).collect();
        residual = (grid.inner(&defect, &defect) / norm2).sqrt();
        log::trace!("iter {iterations}: E = {e:.16e}, residual = {residual:e}, tau = {tau:e}");
        if residual <= opts.tol {
            break;
        }
        if residual < (1.0 - 1e-3) * best.0 {
            best = (residual, iterations);
        }
        if iterations >= opts.max_iter || iterations - best.1 > STALL_ITERATIONS {
            return Err(Error::NoConvergence { iterations, residual });
        }
        let op = mean_field_operator(grid, &potential, &phi, lambda);
        loop {
            let mut scaled = op.clone();
            scaled.diag.iter_mut().for_each(|d| *d *= tau);
            scaled.off.iter_mut().for_each(|o| *o *= tau);
            let interior = scaled.solve_shifted(1.0, &u.values[1..n - 1]);
            let mut next = vec![0.0; n];
            next[1..n - 1].copy_from_slice(&interior);
            let mut cand = WaveFunction { grid: *grid, values: next, mass };
            cand.normalize();
            let cand_phi = field(&cand.values);
            let cand_e = energy(&cand.values, &cand_phi);
            if cand_e <= e + 1e-14 * e.abs().max(1.0) {
                if cand_e > e {
                    log::trace!("accepting roundoff-level energy rise {:e}", cand_e - e);
                }
                u = cand;
                phi = cand_phi;
                e = cand_e;
                tau = (2.0 * tau).min(tau_max);
                break;
            }
            tau *= 0.5;
            if tau < 1e-14 {
                return Err(Error::NoConvergence { iterations, residual });
            }
        }
        iterations += 1;
    }

    if u.values.iter().sum::<f64>() < 0.0 {
        u.values.iter_mut().for_each(|v| *v = -*v);
    }
    if opts.check_box {
        check_box(&u, grid)?;
    }
    let rho = u.density();
    let quartic = grid.inner(&rho, &phi);
    let mu = (e + 0.5 * lambda * quartic) / mass;
    let hu = apply_mean_field(grid, &potential, &phi, lambda, &u.values);
    let rayleigh = grid.inner(&u.values, &hu) / grid.inner(&u.values, &u.values);
    if (mu - rayleigh).abs() > 1e-9 * (1.0 + mu.abs()) {
        return Err(Error::ChemicalPotentialMismatch { formula: mu, rayleigh });
    }
    log::debug!("hartree: lambda = {lambda}, mass = {mass}, e_H = {e:.12}, mu = {mu:.12}, {iterations} iterations");
    Ok(HartreeSolution { u, e_h: e, mu, lambda, residual, iterations, potential, kernel: *w, quartic })
}

fn check_box(u: &WaveFunction, grid: &Grid1D) -> Result<()> {
    let n = grid.n_points();
    let edge = (n / 20).max(1);
    let peak = u.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let wall = u.values[..edge].iter().chain(&u.values[n - edge..]).fold(0.0f64, |m, v| m.max(v.abs()));
    let ratio = wall / peak;
    if ratio > 1e-8 {
        return Err(Error::BoxTooSmall { half_width: grid.half_width(), edge_ratio: ratio });
    }
    Ok(())
}

/// `μ = (e_H + (λ/2)∬|u|² w |u|²) / mass`.
pub fn chemical_potential(sol: &HartreeSolution) -> f64 {
    (sol.e_h + 0.5 * sol.lambda * sol.quartic) / sol.u.mass
}

/// Rayleigh quotient of the mean-field operator at the solution.
pub fn rayleigh_quotient(sol: &HartreeSolution) -> f64 {
    let g = sol.grid();
    let hu = apply_mean_field(g, &sol.potential, &sol.mean_field(), sol.lambda, &sol.u.values);
    g.inner(&sol.u.values, &hu) / g.inner(&sol.u.values, &sol.u.values)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MassScaling {
    /// `m · e_H(1, mλ)`.
    pub scaled: f64,
    /// `e_H(m, λ)` from a direct solve.
    pub direct: f64,
}

impl MassScaling {
    pub fn relative_gap(&self) -> f64 {
        (self.scaled - self.direct).abs() / self.direct.abs()
    }
}

/// `e_H(m, λ)` through the scaling identity, with the direct solve alongside.
pub fn mass_scaled_energy(
    m: f64,
    lambda: f64,
    trap: &TrapSpec,
    w: &InteractionKernel,
    grid: &Grid1D,
    opts: &SolverOptions,
) -> Result<MassScaling> {
    if !(m.is_finite() && m > 0.0) {
        return Err(Error::invalid("mass", format!("must be positive, got {m}")));
    }
    let unit = minimize_hartree(trap, w, m * lambda, 1.0, grid, opts)?;
    let direct = minimize_hartree(trap, w, lambda, m, grid, opts)?;
    Ok(MassScaling { scaled: m * unit.e_h, direct: direct.e_h })
}

/// Predicted decay exponent `α` for `V = |x|^s` in dimension `d`.
pub fn decay_alpha(s: f64, d: u8, mu: f64) -> f64 {
    let base = (2.0 * d as f64 - 2.0 + s) / (4.0 * s);
    if s == 2.0 {
        base - mu / (2.0 * s)
    } else {
        base
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    /// Fitted coefficient of `log V`; compare with `-alpha_expected`.
    pub slope_alpha: f64,
    /// Same regression without the subleading WKB term.
    pub plain_slope: f64,
    pub alpha_expected: f64,
    /// Coefficient of determination of the main fit.
    pub r_squared: f64,
    pub points: usize,
}

/// Regress `log u(r) + A(r)` on `log V(r)` over `r ∈ [r_lo, r_hi]` to the right of the well.
///
/// For `s > 2` the regression also carries `r^{1-s/2}`, the next term of the
/// WKB expansion, which otherwise biases the slope at moderate `r`.
pub fn decay_exponent_fit(sol: &HartreeSolution, trap: &TrapSpec, window: (f64, f64)) -> Result<DecayFit> {
    let (r_lo, r_hi) = window;
    if !(r_lo > 0.0 && r_hi > r_lo) {
        return Err(Error::invalid("fit_window", format!("need 0 < r_lo < r_hi, got [{r_lo}, {r_hi}]")));
    }
    let g = sol.grid();
    let n = g.n_points();
    let edge = n / 20;
    let peak = sol.u.values.iter().fold(0.0f64, |m, v| m.max(*v));
    let floor = 1e3 * f64::EPSILON * peak;
    let s = trap.s;
    let center = match trap.kind {
        TrapKind::SingleWell => trap.center,
        TrapKind::DoubleWell => 0.5 * trap.separation_l,
    };
    let mut rows: Vec<(f64, f64, f64)> = Vec::new();
    for i in edge..n - edge {
        let r = g.x(i) - center;
        let u = sol.u.values[i];
        if r < r_lo || r > r_hi || u <= floor {
            continue;
        }
        let y = u.ln() + agmon_distance(r, s)?;
        rows.push((y, s * r.ln(), r.powf(1.0 - 0.5 * s)));
    }
    if rows.len() < 8 {
        return Err(Error::FitWindow { found: rows.len(), needed: 8 });
    }
    let plain = least_squares(&rows, false);
    let main = if s > 2.0 { least_squares(&rows, true) } else { plain };
    Ok(DecayFit {
        slope_alpha: main.0,
        plain_slope: plain.0,
        alpha_expected: decay_alpha(s, trap.dimension_d, sol.mu),
        r_squared: main.1,
        points: rows.len(),
    })
}

/// OLS of `y` on `[1, x1(, x2)]`; returns the `x1` coefficient and R².
fn least_squares(rows: &[(f64, f64, f64)], with_second: bool) -> (f64, f64) {
    let k = if with_second { 3 } else { 2 };
    let m = rows.len();
    let x = nalgebra::DMatrix::from_fn(m, k, |i, j| match j {
        0 => 1.0,
        1 => rows[i].1,
        _ => rows[i].2,
    });
    let y = nalgebra::DVector::from_iterator(m, rows.iter().map(|r| r.0));
    let qr = x.clone().qr();
    let beta = qr.r().solve_upper_triangular(&(qr.q().transpose() * &y)).unwrap_or_else(|| nalgebra::DVector::zeros(k));
    let fit = &x * &beta;
    let mean = y.mean();
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = y.iter().zip(fit.iter()).map(|(a, b)| (a - b).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    (beta[1], r2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanFieldControl {
    pub sup_ratio: f64,
    pub sup_ratio_larger_box: f64,
    pub pass: bool,
}

/// `sup (w∗|u|²)/|u|^{2-η}` away from the walls, and its stability when the box grows by 25%.
pub fn mean_field_control(
    sol: &HartreeSolution,
    trap: &TrapSpec,
    eta: f64,
    opts: &SolverOptions,
) -> Result<MeanFieldControl> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::invalid("eta", format!("must lie in (0, 1), got {eta}")));
    }
    let sup_ratio = sup_mean_field_ratio(sol, eta);
    let g = sol.grid();
    let h = g.spacing();
    let hw = 1.25 * g.half_width();
    let n = (2.0 * hw / h).round() as usize + 1;
    let bigger = Grid1D::new(n, hw)?;
    let resolved = minimize_hartree(trap, &sol.kernel, sol.lambda, sol.u.mass, &bigger, opts)?;
    let sup_ratio_larger_box = sup_mean_field_ratio(&resolved, eta);
    Ok(MeanFieldControl { sup_ratio, sup_ratio_larger_box, pass: sup_ratio_larger_box <= 1.05 * sup_ratio })
}

/// The ratio alone, on the given solution.
pub fn sup_mean_field_ratio(sol: &HartreeSolution, eta: f64) -> f64 {
    let g = sol.grid();
    let n = g.n_points();
    let edge = n / 20;
    let phi = sol.mean_field();
    let peak = sol.u.values.iter().fold(0.0f64, |m, v| m.max(*v));
    let floor = 1e3 * f64::EPSILON * peak;
    (edge..n - edge)
        .filter(|&i| sol.u.values[i] > floor)
        .map(|i| phi[i] / sol.u.values[i].powf(2.0 - eta))
        .fold(0.0, f64::max)
}

/// Potential lowered by a factor `1 - δ` on the strip `|x - center| ≤ ℓ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerturbationSpec {
    pub delta: f64,
    pub strip_center: f64,
    pub strip_halfwidth: f64,
}

impl PerturbationSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta >= 0.0 && self.delta < 1.0) {
            return Err(Error::invalid("perturb.delta", format!("must lie in [0, 1), got {}", self.delta)));
        }
        if !(self.strip_halfwidth > 0.0 && self.strip_halfwidth.is_finite()) {
            return Err(Error::invalid("perturb.ell", format!("must be positive, got {}", self.strip_halfwidth)));
        }
        if !self.strip_center.is_finite() {
            return Err(Error::invalid("perturb.center", "must be finite"));
        }
        Ok(())
    }

    pub fn factor(&self, x: f64) -> f64 {
        if (x - self.strip_center).abs() <= self.strip_halfwidth {
            1.0 - self.delta
        } else {
            1.0
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PerturbedComparison {
    pub perturbed: HartreeSolution,
    pub reference: HartreeSolution,
    /// `e_H − e_{H,δ}`; nonnegative since the potential only decreases.
    pub delta_e: f64,
    pub l2_distance: f64,
}

pub fn solve_perturbed(
    trap: &TrapSpec,
    pert: &PerturbationSpec,
    w: &InteractionKernel,
    lambda: f64,
    grid: &Grid1D,
    opts: &SolverOptions,
) -> Result<PerturbedComparison> {
    trap.validate()?;
    pert.validate()?;
    let edge = pert.strip_center.abs() + pert.strip_halfwidth;
    if edge >= grid.half_width() {
        return Err(Error::invalid("perturb.center", format!("strip reaches {edge}, outside the box")));
    }
    let reference = minimize_hartree(trap, w, lambda, 1.0, grid, opts)?;
    let potential: Vec<f64> = grid.points().iter().map(|&x| eval_potential(trap, x) * pert.factor(x)).collect();
    let perturbed = minimize_in_potential(potential, w, lambda, 1.0, grid, trap.center, opts)?;
    let diff: Vec<f64> = perturbed.u.values.iter().zip(&reference.u.values).map(|(a, b)| a - b).collect();
    Ok(PerturbedComparison {
        delta_e: reference.e_h - perturbed.e_h,
        l2_distance: grid.inner(&diff, &diff).sqrt(),
        perturbed,
        reference,
    })
}
