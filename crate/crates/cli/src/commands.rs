//! One runner per subcommand, each taking the merged parameter map.

use dw_core::assembly::{
    loc_vs_dloc_report, split_energy, split_table, theorem_energy, CompareSetup, CouplingMemo, WellSetup,
    DEFAULT_COMPARE_EPSILON, DEFAULT_EB_NODES,
};
use dw_core::bogoliubov::{solve_bogoliubov, trapped_density_bound, DEFAULT_MODES};
use dw_core::config::FlatConfig;
use dw_core::hartree::{minimize_hartree, solve_perturbed, PerturbationSpec};
use dw_core::model::kernel_fourier_check;
use dw_core::tunneling::{fit_sweep, tunneling_sweep};
use dw_core::twomode::{
    classify_regime, crossover_scan, gaussian_energy_closed_form, ground_state, interaction_energy, log_spaced_tunneling,
    make_state, observables, optimal_sigma, StateKind, TwoModeParams,
};
use dw_core::{Error, Exec, Result, TrapKind};

use crate::output::{Cell, Report, Table, TableJson};
use crate::params::{grid_for, Params, MODEL_KEYS};

/// Grid size for commands that solve one or two wells.
const FINE_GRID: usize = 4096;
/// Grid size for commands that repeat solves over many couplings.
const COARSE_GRID: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Target {
    Hartree,
    Tunnel,
    Bog,
    Bh,
    #[value(name = "bh-scan")]
    BhScan,
    Split,
    Theorem,
    Compare,
}

impl Target {
    pub fn name(self) -> &'static str {
        match self {
            Target::Hartree => "hartree",
            Target::Tunnel => "tunnel",
            Target::Bog => "bog",
            Target::Bh => "bh",
            Target::BhScan => "bh-scan",
            Target::Split => "split",
            Target::Theorem => "theorem",
            Target::Compare => "compare",
        }
    }

    fn own_keys(self) -> &'static [&'static str] {
        match self {
            Target::Hartree => &["lambda", "mass", "trap", "L", "perturb", "profile"],
            Target::Tunnel => &["lambda", "L"],
            Target::Bog => &["lambda", "modes"],
            Target::Bh => &["N", "e_minus", "e_plus", "T", "U", "state"],
            Target::BhScan => &["N", "U", "T_log_range"],
            Target::Split => &["N", "lambda", "modes", "eb_nodes"],
            Target::Theorem => &["N", "lambda", "modes"],
            Target::Compare => &["N", "lambda", "L", "epsilon"],
        }
    }

    fn uses_model(self) -> bool {
        !matches!(self, Target::Bh | Target::BhScan)
    }

    /// Keys the command reads when run directly.
    pub fn keys(self) -> Vec<&'static str> {
        let mut keys = self.own_keys().to_vec();
        if self.uses_model() {
            keys.extend_from_slice(MODEL_KEYS);
        }
        keys
    }

    /// Keys that may carry a list of values under `sweep`.
    pub fn sweep_keys(self) -> &'static [&'static str] {
        match self {
            Target::Hartree | Target::Bog | Target::Theorem => &["lambda"],
            Target::Tunnel | Target::Compare => &["L", "lambda"],
            Target::Bh => &["T", "sigma", "n"],
            Target::Split => &["lambda", "n"],
            Target::BhScan => &[],
        }
    }

    /// Per-point output columns under `sweep`.
    pub fn record_columns(self) -> &'static [&'static str] {
        match self {
            Target::Hartree => &["e_H", "mu", "residual", "iterations"],
            Target::Tunnel => &["overlap", "T", "two_route_gap", "agmon", "log_ratio"],
            Target::Bog => &["e_B", "functional_energy", "tr_gamma", "tr_V_rho", "quasifree_defect"],
            Target::Bh => &["energy", "mean_Nminus", "var_Nminus", "Jx", "Jy", "Jz", "regime"],
            Target::Split => &["E_loc"],
            Target::Theorem => &["energy_per_particle", "e_H_term", "e_B_term", "Delta_N", "route_gap", "route_bound"],
            Target::Compare => &["E_loc", "E_dloc", "T", "U", "winner", "criterion_pass"],
            Target::BhScan => &[],
        }
    }

    pub fn run(self, cfg: &FlatConfig, exec: Exec) -> Result<Report> {
        let p = Params(cfg);
        match self {
            Target::Hartree => hartree(&p),
            Target::Tunnel => tunnel(&p, exec),
            Target::Bog => bog(&p),
            Target::Bh => bh(&p),
            Target::BhScan => bh_scan(&p, exec),
            Target::Split => split(&p, exec),
            Target::Theorem => theorem(&p),
            Target::Compare => compare(&p),
        }
    }
}

fn invalid(key: &str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { key: key.into(), reason: reason.into() }
}

fn particle_number(p: &Params) -> Result<usize> {
    let n = p.usize_or("N", 100)?;
    if n < 2 {
        return Err(invalid("N", format!("need N >= 2, got {n}")));
    }
    Ok(n)
}

fn hartree(p: &Params) -> Result<Report> {
    let lambda = p.f64_or("lambda", 1.0)?;
    let mass = p.f64_or("mass", 1.0)?;
    let kind = match p.str_or("trap", "single")? {
        "single" => TrapKind::SingleWell,
        "double" => TrapKind::DoubleWell,
        other => return Err(invalid("trap", format!("expected single or double, got `{other}`"))),
    };
    let l = p.f64_or("L", if kind == TrapKind::DoubleWell { 6.0 } else { 0.0 })?;
    let profile = match p.0.get("profile") {
        None => false,
        Some(v) => v.as_bool().ok_or_else(|| invalid("profile", format!("expected true or false, got {v}")))?,
    };
    let model = p.model(kind, l)?;
    let opts = p.solver()?;
    let grid = grid_for(&model, &model.trap, &model.kernel, lambda * mass, FINE_GRID)?;
    let fourier = kernel_fourier_check(&model.kernel, &grid);

    let mut extra = Vec::new();
    let sol = match p.0.get("perturb") {
        None => minimize_hartree(&model.trap, &model.kernel, lambda, mass, &grid, &opts)?,
        Some(_) => {
            let v = p.f64_list("perturb", &[])?;
            let [delta, center, ell] = v[..] else {
                return Err(invalid("perturb", format!("expected delta,center,ell, got {} values", v.len())));
            };
            if mass != 1.0 {
                return Err(invalid("perturb", "perturbed solves use mass 1"));
            }
            let pert = PerturbationSpec { delta, strip_center: center, strip_halfwidth: ell };
            let cmp = solve_perturbed(&model.trap, &pert, &model.kernel, lambda, &grid, &opts)?;
            extra.push(("e_H_reference".to_string(), Cell::Num(cmp.reference.e_h)));
            extra.push(("delta_e".to_string(), Cell::Num(cmp.delta_e)));
            extra.push(("l2_distance".to_string(), Cell::Num(cmp.l2_distance)));
            cmp.perturbed
        }
    };
    let mut report = Report::new("hartree")
        .field("e_H", sol.e_h)
        .field("mu", sol.mu)
        .field("residual", sol.residual)
        .field("iterations", sol.iterations)
        .field("quartic", sol.quartic)
        .field("lambda", lambda)
        .field("mass", mass)
        .field("half_width", grid.half_width())
        .field("grid_n", grid.n_points())
        .field("kernel_fourier_min", fourier.min_hat)
        .field("kernel_positive", fourier.pass);
    report.fields.extend(extra);

    let mut table = Table::new(["x", "u"]);
    table.rows = grid.points().into_iter().zip(&sol.u.values).map(|(x, &u)| vec![Cell::Num(x), Cell::Num(u)]).collect();
    Ok(report.with_table(table, if profile { TableJson::Columns } else { TableJson::Omit }))
}

fn tunnel(p: &Params, exec: Exec) -> Result<Report> {
    let lambda = p.f64_or("lambda", 1.0)?;
    let ls = p.f64_list("L", &[4.0, 5.0, 6.0, 7.0, 8.0])?;
    let model = p.model(TrapKind::DoubleWell, ls.first().copied().unwrap_or(6.0))?;
    let opts = p.solver()?;
    let grid_n = model.grid_n.unwrap_or(FINE_GRID);
    let reports = tunneling_sweep(&ls, model.trap.s, &model.kernel, lambda, grid_n, model.half_width, &opts, exec)
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let mut table = Table::new(["L", "overlap", "T", "two_route_gap", "agmon", "log_ratio"]);
    table.rows = reports
        .iter()
        .map(|r| {
            [r.separation_l, r.overlap, r.t, r.two_route_gap, r.agmon_exponent, r.log_ratio_overlap]
                .into_iter()
                .map(Cell::Num)
                .collect()
        })
        .collect();
    let fit = if reports.len() >= 2 { fit_sweep(&reports) } else { None };
    Ok(Report::new("tunnel")
        .field("s", model.trap.s)
        .field("lambda", lambda)
        .field("all_negative", reports.iter().all(|r| r.t_negative))
        .field("t_slope", fit.map_or(Cell::Null, |f| Cell::Num(f.t_slope)))
        .field("overlap_slope", fit.map_or(Cell::Null, |f| Cell::Num(f.overlap_slope)))
        .with_table(table, TableJson::Rows))
}

fn bog(p: &Params) -> Result<Report> {
    let lambda = p.f64_or("lambda", 1.0)?;
    let modes = p.usize_or("modes", DEFAULT_MODES)?;
    let model = p.model(TrapKind::SingleWell, 0.0)?;
    let opts = p.solver()?;
    let grid = grid_for(&model, &model.trap, &model.kernel, lambda, COARSE_GRID)?;
    let sol = minimize_hartree(&model.trap, &model.kernel, lambda, 1.0, &grid, &opts)?;
    let run = solve_bogoliubov(&sol, modes)?;
    let density = trapped_density_bound(&run.result, &run.basis);

    let mut table = Table::new(["mode", "frequency"]);
    table.rows =
        run.result.frequencies.iter().enumerate().map(|(k, &w)| vec![Cell::from(k), Cell::Num(w)]).collect();
    Ok(Report::new("bog")
        .field("lambda", lambda)
        .field("modes", modes)
        .field("e_B", run.result.e_b)
        .field("functional_energy", run.functional_energy)
        .field("quasifree_defect", run.result.quasifree_defect)
        .field("tr_gamma", run.result.tr_gamma)
        .field("tr_V_rho", density.tr_v_rho)
        .field("min_rho", density.min_rho)
        .field("e_H", sol.e_h)
        .field("mu", sol.mu)
        .field("frequencies", run.result.frequencies.clone())
        .with_table(table, TableJson::Omit))
}

/// `ground`, `fock`, `fock:K`, `coherent`, `gaussian:SIGMA` or `squeezed:THETA:PHI`.
fn parse_state(text: &str, n: usize) -> Result<Option<StateKind>> {
    let bad = || invalid("state", format!("cannot read `{text}`"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let parts: Vec<&str> = text.split(':').collect();
    Ok(Some(match parts.as_slice() {
        ["ground"] => return Ok(None),
        ["fock"] => StateKind::Fock(n / 2),
        ["fock", k] => StateKind::Fock(k.trim().parse().map_err(|_| bad())?),
        ["coherent"] => StateKind::Coherent,
        ["gaussian", sigma] => StateKind::Gaussian(num(sigma)?),
        ["squeezed", theta, phi] => StateKind::Squeezed { theta: num(theta)?, phi: num(phi)? },
        _ => return Err(bad()),
    }))
}

fn bh(p: &Params) -> Result<Report> {
    let params = TwoModeParams {
        n: particle_number(p)?,
        e_minus: p.f64_or("e_minus", 0.0)?,
        e_plus: p.f64_or("e_plus", 0.0)?,
        t: p.f64_or("T", -1.0)?,
        u: p.f64_or("U", 1.0)?,
    };
    params.validate()?;
    let mut label = p.str_or("state", "ground")?.to_string();
    let mut kind = parse_state(&label, params.n)?;
    // sweep keys pick the state family
    let swept = match (p.0.contains_key("n"), p.0.contains_key("sigma")) {
        (true, true) => return Err(invalid("sigma", "cannot be combined with `n`")),
        (true, false) => {
            let n0 = p.usize_or("n", 0)?;
            Some(("n", StateKind::Fock(n0), format!("fock:{n0}")))
        }
        (false, true) => {
            let sigma = p.f64_or("sigma", 0.0)?;
            Some(("sigma", StateKind::Gaussian(sigma), format!("gaussian:{sigma}")))
        }
        (false, false) => None,
    };
    if let Some((key, k, name)) = swept {
        if p.0.contains_key("state") {
            return Err(invalid(key, "cannot be combined with `state`"));
        }
        kind = Some(k);
        label = name;
    }
    let state = match kind {
        None => ground_state(&params)?.1,
        Some(k) => make_state(k, params.n)?,
    };
    let obs = observables(&state, &params)?;
    let regime = classify_regime(&params)?;
    let scale = obs.var_jy * obs.var_jz + 0.25 * obs.jx * obs.jx;
    let mut report = Report::new("bh")
        .field("N", params.n)
        .field("T", params.t)
        .field("U", params.u)
        .field("e_minus", params.e_minus)
        .field("e_plus", params.e_plus)
        .field("state", label)
        .field("energy", obs.energy)
        .field("energy_collective", obs.energy_collective)
        .field("interaction_energy", interaction_energy(&state, params.u))
        .field("localized_energy", params.localized_energy())
        .field("mean_Nminus", obs.mean_n_minus)
        .field("var_Nminus", obs.var_n_minus)
        .field("Jx", obs.jx)
        .field("Jy", obs.jy)
        .field("Jz", obs.jz)
        .field("var_Jx", obs.var_jx)
        .field("var_Jy", obs.var_jy)
        .field("var_Jz", obs.var_jz)
        .field("uncertainty_product_gap", obs.uncertainty_product_gap)
        .field("robertson_holds", obs.uncertainty_product_gap >= -1e-9 * scale.max(1.0))
        .field("exchange_defect", state.exchange_defect())
        .field("regime", regime.regime.to_string())
        .field("margin_fock", regime.margin_fock)
        .field("margin_rabi", regime.margin_rabi);
    if let Some(StateKind::Gaussian(sigma)) = kind {
        let closed = gaussian_energy_closed_form(&params, sigma)?;
        report = report
            .field("closed_form_energy", closed.energy)
            .field("closed_form_in_window", closed.in_window)
            .field("sigma_star", optimal_sigma(&params));
    }
    Ok(report)
}

fn bh_scan(p: &Params, exec: Exec) -> Result<Report> {
    let n = p.usize_or("N", 2000)?;
    let u = p.f64_or("U", 1.0)?;
    TwoModeParams::symmetric(n, -1.0, u).validate()?;
    let nf = n as f64;
    // default span: five decades below U/N to two above U·N
    let default = [(1e-5 * u / nf).log10(), (1e2 * u * nf).log10(), 40.0];
    let range = p.f64_list("T_log_range", &default)?;
    let [lo, hi, steps] = range[..] else {
        return Err(invalid("T_log_range", format!("expected a,b,steps, got {} values", range.len())));
    };
    if !(lo.is_finite() && hi.is_finite()) || steps < 0.0 || steps.fract() != 0.0 {
        return Err(invalid("T_log_range", "bounds must be finite and steps a nonnegative integer"));
    }
    let ts = log_spaced_tunneling(lo, hi, steps as usize);
    let rows = crossover_scan(n, u, &ts, exec)?;
    let mut table = Table::new(["T", "ratio_T_over_U", "var_Nminus", "Jx", "energy", "regime"]);
    table.rows = rows
        .iter()
        .map(|r| {
            vec![
                Cell::Num(r.t),
                Cell::Num(r.ratio_t_over_u),
                Cell::Num(r.var_n_minus),
                Cell::Num(r.jx),
                Cell::Num(r.energy),
                Cell::Str(r.regime.to_string()),
            ]
        })
        .collect();
    let max_defect = rows.iter().map(|r| r.exchange_defect).fold(0.0, f64::max);
    Ok(Report::new("bh-scan")
        .field("N", n)
        .field("U", u)
        .field("max_exchange_defect", max_defect)
        .with_table(table, TableJson::Rows))
}

fn well_setup(p: &Params, lambda: f64) -> Result<WellSetup> {
    let model = p.model(TrapKind::SingleWell, 0.0)?;
    let grid = grid_for(&model, &model.trap, &model.kernel, lambda, COARSE_GRID)?;
    Ok(WellSetup {
        trap: model.trap,
        kernel: model.kernel,
        grid,
        modes: p.usize_or("modes", DEFAULT_MODES)?,
        opts: p.solver()?,
    })
}

fn split(p: &Params, exec: Exec) -> Result<Report> {
    let total = particle_number(p)?;
    let lambda = p.f64_or("lambda", 1.0)?;
    let setup = well_setup(p, lambda)?;
    if p.0.contains_key("n") {
        let n = p.usize_or("n", 0)?;
        if n > total {
            return Err(invalid("n", format!("must lie in [0, {total}], got {n}")));
        }
        return Ok(Report::new("split")
            .field("N", total)
            .field("n", n)
            .field("lambda", lambda)
            .field("E_loc", split_energy(n, total, lambda, &setup)?));
    }
    let nodes = p.usize_or("eb_nodes", DEFAULT_EB_NODES)?;
    let memo = CouplingMemo::build(&setup, total, lambda, nodes, exec)?;
    let t = split_table(&memo)?;
    let mut table = Table::new(["n", "E_loc"]);
    table.rows = t.entries.iter().map(|&(n, e)| vec![Cell::from(n), Cell::Num(e)]).collect();
    Ok(Report::new("split")
        .field("N", total)
        .field("lambda", lambda)
        .field("argmin_n", t.argmin_n)
        .field("even_split", total % 2 == 1 || t.argmin_n == total / 2)
        .field("quadratic_constant", t.quadratic_constant)
        .field("convexity_min", t.convexity_min)
        .field("symmetry_defect", t.symmetry_defect)
        .with_table(table, TableJson::Rows))
}

fn theorem(p: &Params) -> Result<Report> {
    let total = particle_number(p)?;
    let lambda = p.f64_or("lambda", 1.0)?;
    let setup = well_setup(p, lambda)?;
    let r = theorem_energy(total, lambda, &setup)?;
    Ok(Report::new("theorem")
        .field("N", total)
        .field("lambda", lambda)
        .field("energy_per_particle", r.energy_per_particle)
        .field("e_H_term", r.e_h_term)
        .field("e_B_term", r.e_b_term)
        .field("Delta_N", r.delta_n)
        .field("split_route", r.split_route)
        .field("e_B_half", r.e_b_half)
        .field("e_B_split", r.e_b_split)
        .field("route_gap", r.route_gap)
        .field("route_bound", r.route_bound))
}

fn compare(p: &Params) -> Result<Report> {
    let total = particle_number(p)?;
    let lambda = p.f64_or("lambda", 1.0)?;
    let l = p.f64_or("L", 6.0)?;
    let model = p.model(TrapKind::DoubleWell, l)?;
    let setup = CompareSetup {
        s: model.trap.s,
        kernel: model.kernel,
        grid_n: model.grid_n.unwrap_or(COARSE_GRID),
        half_width: model.half_width,
        opts: p.solver()?,
        epsilon: p.f64_or("epsilon", DEFAULT_COMPARE_EPSILON)?,
    };
    if !(setup.epsilon > 0.0 && setup.epsilon < 1.0) {
        return Err(invalid("epsilon", format!("must lie in (0, 1), got {}", setup.epsilon)));
    }
    let r = loc_vs_dloc_report(total, lambda, l, &setup)?;
    Ok(Report::new("compare")
        .field("N", total)
        .field("lambda", lambda)
        .field("L", l)
        .field("E_loc", r.e_loc)
        .field("E_dloc", r.e_dloc)
        .field("T", r.t)
        .field("U", r.u)
        .field("winner", r.winner.to_string())
        .field("criterion_pass", r.criterion_pass)
        .field("e_minus", r.e_minus)
        .field("e_plus", r.e_plus)
        .field("regime", r.regime.to_string())
        .field("epsilon", r.epsilon))
}
