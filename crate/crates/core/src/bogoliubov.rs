//! Quadratic fluctuation Hamiltonian around the Hartree minimizer, its
//! symplectic diagonalization and the quasi-free ground state.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::fit::log_log_slope;
use crate::hartree::{apply_mean_field, minimize_hartree, HartreeSolution, SolverOptions};
use crate::model::{convolve_taps, Grid1D, InteractionKernel, TrapSpec, WaveFunction};
use crate::tridiag::SymTridiagonal;

pub const DEFAULT_MODES: usize = 32;

/// Condensate plus `M` orthonormal excitation modes orthogonal to it.
#[derive(Debug, Clone)]
pub struct ModeBasis {
    pub condensate: WaveFunction,
    pub excited: Vec<WaveFunction>,
    /// Mean-field eigenvalues of the excited modes.
    pub energies: Vec<f64>,
    /// Mean-field eigenvalue of the condensate mode.
    pub condensate_energy: f64,
    pub potential: Vec<f64>,
    pub mean_field: Vec<f64>,
    pub lambda: f64,
    pub kernel: InteractionKernel,
}

impl ModeBasis {
    pub fn len(&self) -> usize {
        self.excited.len()
    }

    pub fn is_empty(&self) -> bool {
        self.excited.is_empty()
    }

    pub fn grid(&self) -> &Grid1D {
        &self.condensate.grid
    }

    /// Largest deviation of the Gram matrix of `{u₀} ∪ excited` from the identity.
    pub fn gram_defect(&self) -> f64 {
        let g = self.grid();
        let all: Vec<&[f64]> =
            std::iter::once(self.condensate.values.as_slice()).chain(self.excited.iter().map(|e| e.values.as_slice())).collect();
        let mut worst = 0.0f64;
        for i in 0..all.len() {
            for j in i..all.len() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g.inner(all[i], all[j]) - target).abs());
            }
        }
        worst
    }
}

/// Lowest `M` eigenmodes of the mean-field operator projected off the condensate.
pub fn build_mode_basis(sol: &HartreeSolution, modes: usize) -> Result<ModeBasis> {
    let g = *sol.grid();
    let n = g.n_points();
    if modes == 0 {
        return Err(Error::invalid("modes", "need at least one excitation mode"));
    }
    if modes + 1 > n - 2 {
        return Err(Error::invalid("modes", format!("{modes} modes do not fit on {n} grid points")));
    }
    let phi = sol.mean_field();
    let h2 = g.spacing().powi(2);
    let op = SymTridiagonal::new(
        (1..n - 1).map(|i| 2.0 / h2 + sol.potential[i] + sol.lambda * phi[i]).collect(),
        vec![-1.0 / h2; n - 3],
    );
    let pairs = op.eigenpairs(0, modes + 1)?;
    let scale = 1.0 / g.spacing().sqrt();
    let lift = |v: &[f64]| -> Vec<f64> {
        let mut full = vec![0.0; n];
        full[1..n - 1].iter_mut().zip(v).for_each(|(f, x)| *f = x * scale);
        full
    };

    let mut condensate = sol.u.clone();
    condensate.mass = 1.0;
    condensate.normalize();
    let mut basis: Vec<Vec<f64>> = vec![condensate.values.clone()];
    let mut energies = Vec::with_capacity(modes);
    for (eps, v) in pairs.iter().skip(1) {
        let mut f = lift(v);
        for b in &basis {
            let d = g.inner(&f, b);
            f.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
        }
        let nrm = g.inner(&f, &f).sqrt();
        f.iter_mut().for_each(|x| *x /= nrm);
        basis.push(f);
        energies.push(*eps);
    }
    let excited = basis[1..].iter().map(|v| WaveFunction { grid: g, values: v.clone(), mass: 1.0 }).collect();
    let out = ModeBasis {
        condensate,
        excited,
        energies,
        condensate_energy: pairs[0].0,
        potential: sol.potential.clone(),
        mean_field: phi,
        lambda: sol.lambda,
        kernel: sol.kernel,
    };
    let defect = out.gram_defect();
    if defect > 1e-8 {
        return Err(Error::Eigen(format!("mode basis Gram defect {defect:e}")));
    }
    Ok(out)
}

/// The blocks `A`, `B` of the quadratic Hamiltonian, plus the pieces the
/// energy functional needs.
#[derive(Debug, Clone)]
pub struct QuadraticForm {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    /// One-body part `H_mf − μ` in the mode basis.
    pub one_body: DMatrix<f64>,
    /// Pairing part `λK`.
    pub pairing: DMatrix<f64>,
    /// `K_ij = ⟨u_i u₀, w∗(u₀ u_j)⟩`.
    pub k: DMatrix<f64>,
}

impl QuadraticForm {
    /// Form given only by its blocks: `one_body = A − B`, `pairing = B`.
    pub fn from_blocks(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        if a.shape() != b.shape() || a.nrows() != a.ncols() || a.nrows() == 0 {
            return Err(Error::invalid("A", "A and B must be square matrices of the same size"));
        }
        Ok(Self { one_body: &a - &b, pairing: b.clone(), k: b.clone(), a, b })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn check(&self) -> Result<()> {
        let asym = (&self.a - self.a.transpose()).amax();
        let bsym = (&self.b - self.b.transpose()).amax();
        if asym > 1e-10 * (1.0 + self.a.amax()) || bsym > 1e-10 * (1.0 + self.b.amax()) {
            return Err(Error::Eigen(format!("blocks not symmetric (A: {asym:e}, B: {bsym:e})")));
        }
        if (&self.a + &self.b).cholesky().is_none() || (&self.a - &self.b).cholesky().is_none() {
            return Err(Error::NotCoercive);
        }
        Ok(())
    }
}

/// `f_j = u₀u_j` and `w∗f_j` for every excited mode.
fn pair_fields(basis: &ModeBasis, exec: Exec) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let g = basis.grid();
    let taps = basis.kernel.taps(g.spacing());
    let u0 = &basis.condensate.values;
    let f: Vec<Vec<f64>> = basis.excited.iter().map(|e| e.values.iter().zip(u0).map(|(a, b)| a * b).collect()).collect();
    let wf = exec.map_slice(&f, |fj| convolve_taps(&taps, g, fj, Exec::Sequential));
    (f, wf)
}

pub fn build_quadratic_form(basis: &ModeBasis, mu: f64) -> Result<QuadraticForm> {
    build_quadratic_form_with(basis, mu, Exec::default())
}

pub fn build_quadratic_form_with(basis: &ModeBasis, mu: f64, exec: Exec) -> Result<QuadraticForm> {
    let m = basis.len();
    let g = basis.grid();
    let lambda = basis.lambda;
    let (f, wf) = pair_fields(basis, exec);
    let columns = exec.map_range(m, |j| (0..m).map(|i| g.inner(&f[i], &wf[j])).collect::<Vec<f64>>());
    let mut k = DMatrix::from_fn(m, m, |i, j| columns[j][i]);
    let kasym = (&k - k.transpose()).amax();
    if kasym > 1e-10 * (1.0 + k.amax()) {
        return Err(Error::Eigen(format!("K not symmetric ({kasym:e})")));
    }
    k = 0.5 * (&k + k.transpose());

    // ⟨u_i, (−Δ + V + λ w∗|u₀|²) u_j⟩
    let hu = exec.map_slice(&basis.excited, |e| apply_mean_field(g, &basis.potential, &basis.mean_field, lambda, &e.values));
    let mut hmf = DMatrix::from_fn(m, m, |i, j| g.inner(&basis.excited[i].values, &hu[j]));
    hmf = 0.5 * (&hmf + hmf.transpose());

    let id = DMatrix::<f64>::identity(m, m);
    let a = &hmf - mu * &id + lambda * &k;
    let b = lambda * &k;
    let one_body = DMatrix::from_diagonal(&DVector::from_iterator(m, basis.energies.iter().map(|e| e - mu)));
    let form = QuadraticForm { a, b, one_body, pairing: lambda * &k, k };
    form.check()?;
    Ok(form)
}

#[derive(Debug, Clone, Serialize)]
pub struct BogoliubovResult {
    pub frequencies: Vec<f64>,
    pub e_b: f64,
    #[serde(skip)]
    pub gamma: DMatrix<f64>,
    #[serde(skip)]
    pub alpha: DMatrix<f64>,
    #[serde(skip)]
    pub k_matrix: DMatrix<f64>,
    pub tr_gamma: f64,
    /// `‖ααᵀ − γ(1+γ)‖_max / (1 + ‖γ‖_max)`.
    pub quasifree_defect: f64,
}

/// Symplectic diagonalization through `Lᵀ(A−B)L` with `A+B = LLᵀ`.
pub fn diagonalize(form: &QuadraticForm) -> Result<BogoliubovResult> {
    form.check()?;
    let m = form.dim();
    let l = (&form.a + &form.b).cholesky().ok_or(Error::NotCoercive)?.l();
    let s = l.transpose() * (&form.a - &form.b) * &l;
    let s = 0.5 * (&s + s.transpose());
    let (values, w) = accurate_eigen(s)?;
    if values.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::NotCoercive);
    }
    let omega: Vec<f64> = values.iter().map(|v| v.sqrt()).collect();
    let l_inv_t = l.transpose().try_inverse().ok_or(Error::NotCoercive)?;

    let half_omega = DMatrix::from_diagonal(&DVector::from_iterator(m, omega.iter().map(|o| 0.5 * o)));
    let half_inv = DMatrix::from_diagonal(&DVector::from_iterator(m, omega.iter().map(|o| 0.5 / o)));
    let lw = &l_inv_t * &w;
    let q = &lw * half_omega * lw.transpose();
    let rw = &l * &w;
    let p = &rw * half_inv * rw.transpose();
    let id = DMatrix::<f64>::identity(m, m);
    let gamma = 0.5 * (&q + &p - &id);
    let gamma = 0.5 * (&gamma + gamma.transpose());
    let alpha = 0.5 * (&q - &p);
    let alpha = 0.5 * (&alpha + alpha.transpose());

    let e_b = 0.5 * (omega.iter().sum::<f64>() - form.a.trace());
    let constraint = &alpha * alpha.transpose() - &gamma * (&id + &gamma);
    let quasifree_defect = constraint.amax() / (1.0 + gamma.amax());
    if quasifree_defect > 1e-8 {
        return Err(Error::QuasiFree(quasifree_defect));
    }
    Ok(BogoliubovResult {
        frequencies: omega,
        e_b,
        tr_gamma: gamma.trace(),
        gamma,
        alpha,
        k_matrix: form.k.clone(),
        quasifree_defect,
    })
}

/// Ascending eigenvalues and eigenvectors of a symmetric matrix.
///
/// Householder reduction followed by bisection and inverse iteration on the
/// tridiagonal form. The implicit QR path in nalgebra leaves eigenvectors of
/// nearly diagonal matrices with residuals around `10⁻⁵`, which shows up as
/// spurious pairing when `B` vanishes.
fn accurate_eigen(s: DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let m = s.nrows();
    if m == 1 {
        return Ok((vec![s[(0, 0)]], DMatrix::identity(1, 1)));
    }
    let scale = s.amax().max(f64::MIN_POSITIVE);
    let (q, diag, off) = nalgebra::SymmetricTridiagonal::new(s.clone()).unpack();
    let t = SymTridiagonal::new(diag.iter().copied().collect(), off.iter().copied().collect());
    let pairs = t.eigenpairs(0, m)?;
    let values: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let v = DMatrix::from_fn(m, m, |i, j| pairs[j].1[i]);
    let w = q * v;
    let residual = (&s * &w - &w * DMatrix::from_diagonal(&DVector::from_column_slice(&values))).amax();
    if residual > 1e-10 * scale {
        return Err(Error::Eigen(format!("eigenvector residual {residual:e}")));
    }
    Ok((values, w))
}

/// `tr[(H_mf − μ + λK)γ] + λ tr[Kα]`, checked against `e_B`.
pub fn energy_functional_eval(result: &BogoliubovResult, form: &QuadraticForm) -> Result<f64> {
    let first = (&form.one_body + &form.pairing).component_mul(&result.gamma).sum();
    let second = form.pairing.component_mul(&result.alpha).sum();
    let value = first + second;
    if (value - result.e_b).abs() > 1e-6 * (1.0 + result.e_b.abs()) {
        return Err(Error::EnergyMismatch { first: result.e_b, second: value });
    }
    Ok(value)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DensityBound {
    pub tr_v_rho: f64,
    pub tr_gamma: f64,
    pub min_rho: f64,
}

/// `∫Vρ` and `tr γ` for `ρ(x) = Σ γ_ij u_i(x) u_j(x)`.
pub fn trapped_density_bound(result: &BogoliubovResult, basis: &ModeBasis) -> DensityBound {
    let g = basis.grid();
    let n = g.n_points();
    let m = basis.len();
    let mut rho = vec![0.0; n];
    for (x, r) in rho.iter_mut().enumerate() {
        let u: Vec<f64> = basis.excited.iter().map(|e| e.values[x]).collect();
        let mut acc = 0.0;
        for i in 0..m {
            let mut row = 0.0;
            for j in 0..m {
                row += result.gamma[(i, j)] * u[j];
            }
            acc += u[i] * row;
        }
        *r = acc;
    }
    let vrho: Vec<f64> = rho.iter().zip(&basis.potential).map(|(a, b)| a * b).collect();
    DensityBound { tr_v_rho: g.integrate(&vrho), tr_gamma: result.tr_gamma, min_rho: rho.iter().copied().fold(f64::INFINITY, f64::min) }
}

/// Everything the fluctuation calculation produced at one coupling.
#[derive(Debug, Clone)]
pub struct BogoliubovRun {
    pub basis: ModeBasis,
    pub form: QuadraticForm,
    pub result: BogoliubovResult,
    pub functional_energy: f64,
}

pub fn solve_bogoliubov(sol: &HartreeSolution, modes: usize) -> Result<BogoliubovRun> {
    let basis = build_mode_basis(sol, modes)?;
    let form = build_quadratic_form(&basis, sol.mu)?;
    let result = diagonalize(&form)?;
    let functional_energy = energy_functional_eval(&result, &form)?;
    Ok(BogoliubovRun { basis, form, result, functional_energy })
}

/// `e_B` at coupling `lambda` in `trap`, from a fresh Hartree solve.
pub fn fluctuation_energy(
    trap: &TrapSpec,
    w: &InteractionKernel,
    lambda: f64,
    grid: &Grid1D,
    modes: usize,
    opts: &SolverOptions,
) -> Result<f64> {
    if lambda == 0.0 {
        return Ok(0.0);
    }
    let sol = minimize_hartree(trap, w, lambda, 1.0, grid, opts)?;
    Ok(solve_bogoliubov(&sol, modes)?.result.e_b)
}

#[derive(Debug, Clone, Serialize)]
pub struct CouplingScan {
    pub lambdas: Vec<f64>,
    pub e_b: Vec<f64>,
    /// Log-log slope of `|e_B|` against `λ` over the smaller half of the positive couplings.
    pub slope_small_half: Option<f64>,
    /// Same over all positive couplings.
    pub slope_all: Option<f64>,
    /// `max |e_B|/λ²`, the constant in `e_B ≥ −Cλ²`.
    pub lambda2_constant: f64,
}

pub fn coupling_scan(
    lambdas: &[f64],
    trap: &TrapSpec,
    w: &InteractionKernel,
    grid: &Grid1D,
    modes: usize,
    opts: &SolverOptions,
    exec: Exec,
) -> Result<CouplingScan> {
    if lambdas.iter().any(|l| !(*l >= 0.0)) || lambdas.windows(2).any(|p| p[1] < p[0]) {
        return Err(Error::invalid("lambda", "couplings must be nonnegative and ascending"));
    }
    let e_b = exec
        .map_slice(lambdas, |&l| fluctuation_energy(trap, w, l, grid, modes, opts))
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    let pos: Vec<(f64, f64)> = lambdas.iter().zip(&e_b).filter(|(l, _)| **l > 0.0).map(|(l, e)| (*l, *e)).collect();
    let slope = |pts: &[(f64, f64)]| {
        if pts.len() < 2 {
            return None;
        }
        let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
        log_log_slope(&x, &y)
    };
    let half = pos.len().div_ceil(2).max(2).min(pos.len());
    Ok(CouplingScan {
        slope_small_half: slope(&pos[..half]),
        slope_all: slope(&pos),
        lambda2_constant: pos.iter().map(|(l, e)| e.abs() / (l * l)).fold(0.0, f64::max),
        lambdas: lambdas.to_vec(),
        e_b,
    })
}
