//! Split energies, even-split optimality, the leading-order energy formula and
//! the localized-versus-delocalized comparison.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::bogoliubov::fluctuation_energy;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::hartree::{minimize_hartree, SolverOptions};
use crate::model::{Grid1D, InteractionKernel, TrapKind, TrapSpec};
use crate::tunneling::{double_well_grid, localization_criterion, solve_well_pair, tunneling_energy};
use crate::twomode::{classify_regime, make_state, observables, Regime, StateKind, TwoModeParams};

/// Single-well problem shared by every coupling the assembly needs.
#[derive(Debug, Clone, Copy)]
pub struct WellSetup {
    pub trap: TrapSpec,
    pub kernel: InteractionKernel,
    pub grid: Grid1D,
    pub modes: usize,
    pub opts: SolverOptions,
}

impl WellSetup {
    pub fn validate(&self) -> Result<()> {
        self.trap.validate()?;
        self.kernel.validate()?;
        self.opts.validate()?;
        if self.trap.kind != TrapKind::SingleWell {
            return Err(Error::invalid("trap.kind", "split energies are built from a single well"));
        }
        Ok(())
    }

    pub fn hartree_energy(&self, coupling: f64) -> Result<f64> {
        Ok(minimize_hartree(&self.trap, &self.kernel, coupling, 1.0, &self.grid, &self.opts)?.e_h)
    }

    pub fn bogoliubov_energy(&self, coupling: f64) -> Result<f64> {
        fluctuation_energy(&self.trap, &self.kernel, coupling, &self.grid, self.modes, &self.opts)
    }
}

/// `λ·k/(N−1)`, written once so memo keys match bit for bit.
fn coupling(lambda: f64, k: usize, n: usize) -> f64 {
    lambda * k as f64 / (n - 1) as f64
}

/// Monotone piecewise-cubic Hermite interpolant (Fritsch-Carlson).
#[derive(Debug, Clone)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        let n = x.len();
        assert!(n >= 2 && y.len() == n, "need at least two nodes");
        let h: Vec<f64> = x.windows(2).map(|p| p[1] - p[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d = vec![delta[0]; 2];
        } else {
            for i in 1..n - 1 {
                if delta[i - 1] * delta[i] > 0.0 {
                    let w1 = 2.0 * h[i] + h[i - 1];
                    let w2 = h[i] + 2.0 * h[i - 1];
                    d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
                }
            }
            d[0] = Self::end_slope(h[0], h[1], delta[0], delta[1]);
            d[n - 1] = Self::end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Self { x, y, d }
    }

    fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
        let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if s * d0 <= 0.0 {
            0.0
        } else if d0 * d1 <= 0.0 && s.abs() > 3.0 * d0.abs() {
            3.0 * d0
        } else {
            s
        }
    }

    /// Value at `t`, held constant outside the node range.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        if t <= self.x[0] {
            return self.y[0];
        }
        if t >= self.x[n - 1] {
            return self.y[n - 1];
        }
        let i = self.x.partition_point(|&v| v <= t) - 1;
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        h00 * self.y[i] + h10 * h * self.d[i] + h01 * self.y[i + 1] + h11 * h * self.d[i + 1]
    }
}

pub const DEFAULT_EB_NODES: usize = 12;

/// Hartree energies at every coupling `λk/(N−1)` and an interpolant for `e_B`.
///
/// `e_B(c)/c²` is interpolated in `log c`; below the first node it is held
/// constant, so `e_B` vanishes quadratically at zero coupling.
#[derive(Debug, Clone)]
pub struct CouplingMemo {
    pub n: usize,
    pub lambda: f64,
    hartree: BTreeMap<u64, f64>,
    eb_nodes: Vec<(f64, f64)>,
    eb_curve: Option<Pchip>,
}

impl CouplingMemo {
    pub fn build(setup: &WellSetup, n: usize, lambda: f64, eb_nodes: usize, exec: Exec) -> Result<Self> {
        setup.validate()?;
        if n < 2 {
            return Err(Error::invalid("N", format!("need N >= 2, got {n}")));
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::invalid("lambda", format!("must be >= 0, got {lambda}")));
        }
        let couplings: Vec<f64> = (0..n).map(|k| coupling(lambda, k, n)).collect();
        let energies = exec.map_slice(&couplings, |&c| setup.hartree_energy(c)).into_iter().collect::<Result<Vec<f64>>>()?;
        let hartree = couplings.iter().zip(&energies).map(|(c, e)| (c.to_bits(), *e)).collect();

        let (nodes, curve) = if lambda > 0.0 && n > 2 && eb_nodes >= 2 {
            let lo = coupling(lambda, 1, n).ln();
            let hi = lambda.ln();
            let grid: Vec<f64> =
                (0..eb_nodes).map(|k| (lo + (hi - lo) * k as f64 / (eb_nodes - 1) as f64).exp()).collect();
            let eb = exec.map_slice(&grid, |&c| setup.bogoliubov_energy(c)).into_iter().collect::<Result<Vec<f64>>>()?;
            let nodes: Vec<(f64, f64)> = grid.iter().zip(&eb).map(|(c, e)| (*c, *e)).collect();
            let curve = Pchip::new(grid.iter().map(|c| c.ln()).collect(), grid.iter().zip(&eb).map(|(c, e)| e / (c * c)).collect());
            (nodes, Some(curve))
        } else if lambda > 0.0 && n > 2 {
            let c = lambda;
            let e = setup.bogoliubov_energy(c)?;
            (vec![(c, e)], Some(Pchip::new(vec![c.ln() - 1.0, c.ln()], vec![e / (c * c); 2])))
        } else {
            (Vec::new(), None)
        };
        Ok(Self { n, lambda, hartree, eb_nodes: nodes, eb_curve: curve })
    }

    pub fn hartree_at(&self, k: usize) -> f64 {
        self.hartree[&coupling(self.lambda, k, self.n).to_bits()]
    }

    /// Interpolated `e_B` at coupling `c`.
    pub fn bogoliubov_at(&self, c: f64) -> f64 {
        match &self.eb_curve {
            Some(curve) if c > 0.0 => curve.eval(c.ln()) * c * c,
            _ => 0.0,
        }
    }

    pub fn eb_nodes(&self) -> &[(f64, f64)] {
        &self.eb_nodes
    }

    /// `k·e_H(λ(k−1)/(N−1)) + e_B(λ(k−1)/(N−1))` for one well holding `k` particles.
    fn well_term(&self, k: usize) -> f64 {
        if k == 0 {
            return 0.0;
        }
        k as f64 * self.hartree_at(k - 1) + self.bogoliubov_at(coupling(self.lambda, k - 1, self.n))
    }

    /// `E^loc_{n, N−n}`.
    pub fn split_energy(&self, n: usize) -> Result<f64> {
        if n > self.n {
            return Err(Error::invalid("n", format!("must lie in [0, {}], got {n}", self.n)));
        }
        Ok(self.well_term(n) + self.well_term(self.n - n))
    }
}

/// One split energy straight from the solvers.
pub fn split_energy(n: usize, total: usize, lambda: f64, setup: &WellSetup) -> Result<f64> {
    if n > total {
        return Err(Error::invalid("n", format!("must lie in [0, {total}], got {n}")));
    }
    if total < 2 {
        return Err(Error::invalid("N", format!("need N >= 2, got {total}")));
    }
    let term = |k: usize| -> Result<f64> {
        if k == 0 {
            return Ok(0.0);
        }
        let c = coupling(lambda, k - 1, total);
        Ok(k as f64 * setup.hartree_energy(c)? + setup.bogoliubov_energy(c)?)
    };
    Ok(term(n)? + term(total - n)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct SplitEnergyTable {
    pub n: usize,
    pub lambda: f64,
    pub entries: Vec<(usize, f64)>,
    pub argmin_n: usize,
    /// Largest `C` with `E(n) ≥ E(N/2) + (C/N)(n − N/2)²` on the middle 60%.
    pub quadratic_constant: f64,
    /// Smallest `E(n+1) − 2E(n) + E(n−1)` on the middle 60%.
    pub convexity_min: f64,
    /// `max |E(n) − E(N−n)| / |E(N/2)|`.
    pub symmetry_defect: f64,
}

pub fn split_table(memo: &CouplingMemo) -> Result<SplitEnergyTable> {
    let total = memo.n;
    let entries: Vec<(usize, f64)> = (0..=total).map(|n| memo.split_energy(n).map(|e| (n, e))).collect::<Result<_>>()?;
    let e = |n: usize| entries[n].1;
    let lo_half = total / 2;
    let hi_half = total.div_ceil(2);
    let center_e = e(lo_half).min(e(hi_half));
    let scale = center_e.abs().max(f64::MIN_POSITIVE);

    let mut argmin = (0..=total).min_by(|&a, &b| e(a).total_cmp(&e(b))).unwrap_or(lo_half);
    if total.is_multiple_of(2) && (e(lo_half) - e(argmin)).abs() <= 1e-8 * scale {
        argmin = lo_half;
    } else if total % 2 == 1 && [lo_half, hi_half].iter().any(|&c| (e(c) - e(argmin)).abs() <= 1e-8 * scale) {
        argmin = if e(lo_half) <= e(hi_half) { lo_half } else { hi_half };
    }

    let center = 0.5 * total as f64;
    let middle: Vec<usize> = (0..=total).filter(|&n| (n as f64 - center).abs() <= 0.3 * total as f64).collect();
    let quadratic_constant = middle
        .iter()
        .filter(|&&n| (n as f64 - center).abs() >= 1.0)
        .map(|&n| total as f64 * (e(n) - center_e) / (n as f64 - center).powi(2))
        .fold(f64::INFINITY, f64::min);
    let convexity_min = middle
        .iter()
        .filter(|&&n| n > 0 && n < total)
        .map(|&n| e(n + 1) - 2.0 * e(n) + e(n - 1))
        .fold(f64::INFINITY, f64::min);
    let symmetry_defect = (0..=total).map(|n| (e(n) - e(total - n)).abs() / scale).fold(0.0, f64::max);
    Ok(SplitEnergyTable {
        n: total,
        lambda: memo.lambda,
        entries,
        argmin_n: argmin,
        quadratic_constant,
        convexity_min,
        symmetry_defect,
    })
}

/// Full split table with the argmin check for even `N`.
pub fn even_split_check(total: usize, lambda: f64, setup: &WellSetup, exec: Exec) -> Result<SplitEnergyTable> {
    if total < 20 {
        return Err(Error::invalid("N", format!("need N >= 20, got {total}")));
    }
    let memo = CouplingMemo::build(setup, total, lambda, DEFAULT_EB_NODES, exec)?;
    let table = split_table(&memo)?;
    if total.is_multiple_of(2) && table.argmin_n != total / 2 {
        return Err(Error::EvenSplit { argmin: table.argmin_n, expected: total / 2 });
    }
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TheoremReport {
    pub energy_per_particle: f64,
    pub e_h_term: f64,
    pub e_b_term: f64,
    pub delta_n: f64,
    /// `E^loc_{N/2,N/2} / N`.
    pub split_route: f64,
    /// `e_B(λ/2)`.
    pub e_b_half: f64,
    /// `e_B(λ(N/2−1)/(N−1))`.
    pub e_b_split: f64,
    pub route_gap: f64,
    /// `2|e_B(λ(N/2−1)/(N−1)) − e_B(λ/2)|/N + 10⁻⁶`.
    pub route_bound: f64,
}

/// `e_H(Δ_N λ/2) + (2/N) e_B(λ/2)` with `Δ_N = 1 − 1/(N−1)`.
pub fn theorem_energy(total: usize, lambda: f64, setup: &WellSetup) -> Result<TheoremReport> {
    setup.validate()?;
    if total < 2 || !total.is_multiple_of(2) {
        return Err(Error::invalid("N", format!("must be even and >= 2, got {total}")));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::invalid("lambda", format!("must be >= 0, got {lambda}")));
    }
    let nf = total as f64;
    let delta_n = 1.0 - 1.0 / (nf - 1.0);
    let e_h_term = setup.hartree_energy(delta_n * lambda / 2.0)?;
    let e_b_half = setup.bogoliubov_energy(lambda / 2.0)?;
    let e_b_term = 2.0 / nf * e_b_half;
    let c_split = coupling(lambda, total / 2 - 1, total);
    let e_b_split = setup.bogoliubov_energy(c_split)?;
    let split_route = setup.hartree_energy(c_split)? + 2.0 / nf * e_b_split;
    let energy_per_particle = e_h_term + e_b_term;
    Ok(TheoremReport {
        energy_per_particle,
        e_h_term,
        e_b_term,
        delta_n,
        split_route,
        e_b_half,
        e_b_split,
        route_gap: (energy_per_particle - split_route).abs(),
        route_bound: 2.0 * (e_b_split - e_b_half).abs() / nf + 1e-6,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Winner {
    Localized,
    Delocalized,
}

impl std::fmt::Display for Winner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Winner::Localized => "localized",
            Winner::Delocalized => "delocalized",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocDlocReport {
    pub separation_l: f64,
    pub e_loc: f64,
    pub e_dloc: f64,
    pub t: f64,
    pub u: f64,
    pub e_minus: f64,
    pub e_plus: f64,
    pub winner: Winner,
    /// `log N ≤ 2(1−ε)A(L/2)`.
    pub criterion_pass: bool,
    /// Regime of `(T, U, N)` on the unit-constant boundaries.
    pub regime: Regime,
    pub epsilon: f64,
}

/// Double-well inputs of the comparison.
#[derive(Debug, Clone, Copy)]
pub struct CompareSetup {
    pub s: f64,
    pub kernel: InteractionKernel,
    pub grid_n: usize,
    pub half_width: Option<f64>,
    pub opts: SolverOptions,
    pub epsilon: f64,
}

pub const DEFAULT_COMPARE_EPSILON: f64 = 0.5;

/// Energies of `|N/2, N/2⟩` and of the coherent state built on the two
/// localized minimizers at coupling `λ`.
pub fn loc_vs_dloc_report(total: usize, lambda: f64, l: f64, setup: &CompareSetup) -> Result<LocDlocReport> {
    if total < 2 || !total.is_multiple_of(2) {
        return Err(Error::invalid("N", format!("must be even and >= 2, got {total}")));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::invalid("lambda", format!("must be >= 0, got {lambda}")));
    }
    let trap = TrapSpec::double(setup.s, l);
    trap.validate()?;
    let grid = double_well_grid(&trap, &setup.kernel, lambda, setup.grid_n, setup.half_width)?;
    let pair = solve_well_pair(&trap, &setup.kernel, lambda, &grid, &setup.opts)?;
    let tun = tunneling_energy(&pair.left, &pair.right.u, &trap, &setup.kernel, lambda, pair.right.mu)?;
    let vn = trap.sample(&grid);
    let one_body = |u: &[f64]| -> Result<f64> {
        let parts = crate::hartree::energy_parts(&grid, u, &vn, &setup.kernel)?;
        Ok(parts.kinetic + parts.potential)
    };
    let e_plus = one_body(&pair.right.u.values)?;
    let e_minus = one_body(&pair.left.values)?;
    let u = lambda * pair.right.quartic / (total - 1) as f64;
    let p = TwoModeParams { n: total, e_minus, e_plus, t: tun.t, u };
    let e_loc = observables(&make_state(StateKind::Fock(total / 2), total)?, &p)?.energy;
    let e_dloc = observables(&make_state(StateKind::Coherent, total)?, &p)?.energy;
    Ok(LocDlocReport {
        separation_l: l,
        e_loc,
        e_dloc,
        t: tun.t,
        u,
        e_minus,
        e_plus,
        winner: if e_loc < e_dloc { Winner::Localized } else { Winner::Delocalized },
        criterion_pass: localization_criterion(total as u64, l, setup.s, setup.epsilon)?,
        regime: classify_regime(&p)?.regime,
        epsilon: setup.epsilon,
    })
}

pub fn loc_vs_dloc_sweep(
    total: usize,
    lambda: f64,
    separations: &[f64],
    setup: &CompareSetup,
    exec: Exec,
) -> Vec<Result<LocDlocReport>> {
    exec.map_slice(separations, |&l| loc_vs_dloc_report(total, lambda, l, setup))
}

/// Number of sign changes of `E_dloc − E_loc` along a sweep.
pub fn winner_flips(reports: &[LocDlocReport]) -> usize {
    reports.windows(2).filter(|p| p[0].winner != p[1].winner).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pchip_reproduces_linear_data_and_stays_monotone() {
        let x: Vec<f64> = (0..6).map(|k| k as f64).collect();
        let lin = Pchip::new(x.clone(), x.iter().map(|v| 2.0 * v + 1.0).collect());
        assert!((lin.eval(2.3) - 5.6).abs() < 1e-12);
        let step = Pchip::new(x, vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let mut prev = step.eval(0.0);
        for k in 1..=500 {
            let v = step.eval(k as f64 * 0.01);
            assert!(v >= prev - 1e-15 && (-1e-15..=1.0 + 1e-15).contains(&v));
            prev = v;
        }
    }

    #[test]
    fn coupling_keys_agree() {
        assert_eq!(coupling(1.0, 49, 100).to_bits(), coupling(1.0, 49, 100).to_bits());
        assert_eq!(coupling(1.0, 99, 100), 1.0);
    }
}
