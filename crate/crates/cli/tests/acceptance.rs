//! The twelve acceptance criteria, one PASS/FAIL line each.

use std::collections::BTreeMap;
use std::process::Command;
use std::time::{Duration, Instant};

use dw_core::bogoliubov::solve_bogoliubov;
use dw_core::hartree::{decay_exponent_fit, default_half_width, mass_scaled_energy, minimize_hartree, SolverOptions};
use dw_core::tunneling::ims_split_residual;
use dw_core::twomode::{
    build_hamiltonian, ground_state, interaction_energy, make_state, squeezing_angles, StateKind, TwoModeParams,
};
use dw_core::{Grid1D, InteractionKernel, TrapSpec};
use serde_json::Value;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn dw(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_dw")).args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("dw {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr).trim()));
    }
    String::from_utf8(out.stdout).map_err(|e| e.to_string())
}

fn dw_json(args: &[&str]) -> Result<Value, String> {
    serde_json::from_str(&dw(args)?).map_err(|e| e.to_string())
}

fn num(v: &Value, key: &str) -> Result<f64, String> {
    v[key].as_f64().ok_or_else(|| format!("missing number `{key}`"))
}

/// Rows of a CSV with a header, as maps from column to text.
fn csv_rows(text: &str) -> Vec<BTreeMap<String, String>> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    lines.map(|l| header.iter().zip(l.split(',')).map(|(h, v)| (h.to_string(), v.to_string())).collect()).collect()
}

fn field(row: &BTreeMap<String, String>, key: &str) -> Result<f64, String> {
    row.get(key).and_then(|v| v.parse().ok()).ok_or_else(|| format!("bad `{key}` in {row:?}"))
}

/// Ordinary least-squares slope.
fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn harmonic_oracle() -> Check {
    let v = dw_json(&["hartree", "--s", "2", "--lambda", "0", "--grid-n", "4096", "--profile"])?;
    let (e, mu) = (num(&v, "e_H")?, num(&v, "mu")?);
    ensure((e - 1.0).abs() <= 1e-6 && (mu - 1.0).abs() <= 1e-6, || format!("e_H = {e}, mu = {mu}"))?;
    let xs: Vec<f64> = v["x"].as_array().ok_or("no x")?.iter().filter_map(Value::as_f64).collect();
    let us: Vec<f64> = v["u"].as_array().ok_or("no u")?.iter().filter_map(Value::as_f64).collect();
    let h = xs[1] - xs[0];
    let norm = std::f64::consts::PI.powf(-0.25);
    let sq: Vec<f64> = xs.iter().zip(&us).map(|(x, u)| (u - norm * (-0.5 * x * x).exp()).powi(2)).collect();
    let l2 = (h * (sq.iter().sum::<f64>() - 0.5 * (sq[0] + sq[sq.len() - 1]))).sqrt();
    ensure(l2 <= 1e-5, || format!("L2 distance to the Gaussian {l2:e}"))?;
    Ok(format!("|e_H-1| = {:.1e}, |mu-1| = {:.1e}, L2 = {l2:.1e}", (e - 1.0).abs(), (mu - 1.0).abs()))
}

fn mass_scaling() -> Check {
    let trap = TrapSpec::single(2.0);
    let w = InteractionKernel::default();
    let opts = SolverOptions::default();
    let grid = Grid1D::new(4096, default_half_width(&trap, &w, 1.5)).map_err(|e| e.to_string())?;
    let r = mass_scaled_energy(2.0, 0.5, &trap, &w, &grid, &opts).map_err(|e| e.to_string())?;
    let gap = (r.direct - r.scaled).abs();
    ensure(gap <= 1e-5 * r.direct.abs(), || format!("|e_H(2,0.5) - 2e_H(1,1)| = {gap:e}"))?;
    let e = |m: f64| minimize_hartree(&trap, &w, 1.0, m, &grid, &opts).map(|s| s.e_h).map_err(|e| e.to_string());
    let margin = 0.5 * (e(0.5)? + e(1.5)?) - e(1.0)?;
    ensure(margin > 0.0, || format!("midpoint convexity margin {margin:e}"))?;
    Ok(format!("scaling gap {:.1e} (relative), convexity margin {margin:.3e}", gap / r.direct.abs()))
}

fn decay_exponent() -> Check {
    let mut worst: f64 = 0.0;
    for (s, lambda, hw) in [(2.0, 0.0, 7.5), (2.0, 1.0, 10.0), (4.0, 0.0, 6.0), (4.0, 1.0, 6.0)] {
        let trap = TrapSpec::single(s);
        let g = Grid1D::new(4096, hw).map_err(|e| e.to_string())?;
        let sol = minimize_hartree(&trap, &InteractionKernel::default(), lambda, 1.0, &g, &SolverOptions::default())
            .map_err(|e| e.to_string())?;
        let fit = decay_exponent_fit(&sol, &trap, (2.0, 4.0)).map_err(|e| e.to_string())?;
        let dev = (fit.slope_alpha + fit.alpha_expected).abs();
        ensure(dev <= 0.05, || format!("s={s} lambda={lambda}: slope {} vs {}", fit.slope_alpha, -fit.alpha_expected))?;
        worst = worst.max(dev);
    }
    Ok(format!("max |slope + alpha| = {worst:.3}"))
}

fn tunneling_law() -> Check {
    let rows = csv_rows(&dw(&["tunnel", "--s", "2", "--lambda", "1", "--L-list", "4,5,6,7,8", "--out", "csv"])?);
    ensure(rows.len() == 5, || format!("{} rows", rows.len()))?;
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for r in &rows {
        let (t, gap) = (field(r, "T")?, field(r, "two_route_gap")?);
        ensure(t < 0.0, || format!("T = {t} at L = {}", r["L"]))?;
        ensure(gap <= 1e-10f64.max(1e-3 * t.abs()), || format!("route gap {gap:e} at L = {}", r["L"]))?;
        x.push(-field(r, "agmon")?);
        y.push(t.abs().ln());
    }
    let k = slope(&x, &y);
    ensure((0.8..=1.2).contains(&k), || format!("slope {k}"))?;
    Ok(format!("T < 0 at all 5 points, slope {k:.4}"))
}

fn ims_identity() -> Check {
    let mut worst: f64 = 0.0;
    for (l, ell, n) in [(4.0, 0.5, 1201), (6.0, 1.0, 2001), (8.0, 1.5, 1601)] {
        let g = Grid1D::new(n, 0.5 * l + 6.0).map_err(|e| e.to_string())?;
        let r = ims_split_residual(&TrapSpec::double(2.0, l), ell, &g).map_err(|e| e.to_string())?;
        ensure(r.defect <= 1e-10, || format!("L={l} ell={ell}: defect {:e}", r.defect))?;
        worst = worst.max(r.defect);
    }
    Ok(format!("max relative defect {worst:.1e}"))
}

fn bogoliubov_structure() -> Check {
    let trap = TrapSpec::single(2.0);
    let w = InteractionKernel::default();
    let grid = Grid1D::new(2048, default_half_width(&trap, &w, 1.0)).map_err(|e| e.to_string())?;
    let opts = SolverOptions::default();
    let mut eb = Vec::new();
    let lambdas = [0.125, 0.25, 0.5, 1.0];
    for &lambda in &lambdas {
        let sol = minimize_hartree(&trap, &w, lambda, 1.0, &grid, &opts).map_err(|e| e.to_string())?;
        let run = solve_bogoliubov(&sol, 32).map_err(|e| e.to_string())?;
        let r = &run.result;
        ensure(r.quasifree_defect <= 1e-8, || format!("quasi-free defect {:e}", r.quasifree_defect))?;
        let rel = (run.functional_energy - r.e_b).abs() / r.e_b.abs();
        ensure(rel <= 1e-6, || format!("energy routes differ by {rel:e} at lambda={lambda}"))?;
        ensure(r.e_b <= 0.0, || format!("e_B = {} at lambda={lambda}", r.e_b))?;
        eb.push(r.e_b);
        if lambda == 1.0 {
            let big = solve_bogoliubov(&sol, 48).map_err(|e| e.to_string())?.result.e_b;
            let drift = ((r.e_b - big) / big).abs();
            ensure(drift < 0.01, || format!("M=32 vs 48 drift {drift}"))?;
        }
    }
    let lx: Vec<f64> = lambdas.iter().map(|l| l.ln()).collect();
    let ly: Vec<f64> = eb.iter().map(|e| e.abs().ln()).collect();
    let k = slope(&lx, &ly);
    ensure((k - 2.0).abs() <= 0.3, || format!("log-log slope {k}"))?;
    Ok(format!("e_B(1) = {:.4e}, slope {k:.3}", eb[3]))
}

/// `H|n, N−n⟩` applied term by term with ladder operators.
fn ladder_column(p: &TwoModeParams, n: usize) -> BTreeMap<usize, f64> {
    let total = p.n;
    let mut col = BTreeMap::new();
    let (a, b) = (n as f64, (total - n) as f64);
    *col.entry(n).or_insert(0.0) += p.e_minus * a + p.e_plus * b + 0.5 * p.u * (a * (a - 1.0) + b * (b - 1.0));
    // a₋†a₊ moves one particle left, a₊†a₋ one right
    if n < total {
        *col.entry(n + 1).or_insert(0.0) += p.t * ((a + 1.0) * b).sqrt();
    }
    if n > 0 {
        *col.entry(n - 1).or_insert(0.0) += p.t * (a * (b + 1.0)).sqrt();
    }
    col
}

fn two_mode_exactness() -> Check {
    let p = TwoModeParams { n: 12, e_minus: 0.3, e_plus: -0.7, t: -1.3, u: 0.9 };
    let dense = build_hamiltonian(&p).map_err(|e| e.to_string())?.to_dense();
    let mut worst: f64 = 0.0;
    for n in 0..=12 {
        let col = ladder_column(&p, n);
        for m in 0..=12 {
            worst = worst.max((dense[(m, n)] - col.get(&m).copied().unwrap_or(0.0)).abs());
        }
    }
    ensure(worst <= 1e-12, || format!("entry mismatch {worst:e}"))?;

    let (_, state) = ground_state(&TwoModeParams::symmetric(64, -1.0, 0.0)).map_err(|e| e.to_string())?;
    // binomial amplitudes √(C(64,k)/2⁶⁴) through log-gamma
    let lg = |k: f64| ln_gamma(k + 1.0);
    let phase = state.coeffs[32] / state.coeffs[32].norm();
    let l2 = state
        .coeffs
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let b = (0.5 * (lg(64.0) - lg(k as f64) - lg((64 - k) as f64) - 64.0 * 2f64.ln())).exp();
            (c / phase - b).norm_sqr()
        })
        .sum::<f64>()
        .sqrt();
    ensure(l2 <= 1e-8, || format!("binomial distance {l2:e}"))?;

    let coherent = make_state(StateKind::Coherent, 100).map_err(|e| e.to_string())?;
    let fock = make_state(StateKind::Fock(50), 100).map_err(|e| e.to_string())?;
    let ratio = interaction_energy(&coherent, 1.0) / interaction_energy(&fock, 1.0);
    let expected = 1.0 + 1.0 / 98.0;
    ensure((ratio - expected).abs() <= 1e-8, || format!("interaction ratio {ratio} vs {expected}"))?;
    Ok(format!("entries {worst:.1e}, binomial {l2:.1e}, ratio error {:.1e}", (ratio - expected).abs()))
}

/// `ln Γ(x)` by Stirling's series after shifting `x` above 10.
fn ln_gamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 10.0 {
        acc -= x.ln();
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    acc + (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln()
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)))
}

fn crossover() -> Check {
    let n = 2000.0;
    let v = dw_json(&["bh-scan", "--N", "2000", "--U", "1", "--out", "json"])?;
    let rows = v["rows"].as_array().ok_or("no rows")?;
    ensure(rows.len() == 40, || format!("{} rows", rows.len()))?;
    let t_first = num(&rows[0], "T")?.abs();
    let t_last = num(&rows[39], "T")?.abs();
    ensure(
        (t_first - 1e-5 / n).abs() <= 1e-12 * t_first && (t_last - 1e2 * n).abs() <= 1e-9 * t_last,
        || format!("T range [{t_first:e}, {t_last:e}]"),
    )?;
    let fock_var = num(&rows[0], "var_Nminus")?;
    ensure(fock_var <= 1.0, || format!("deep-Fock variance {fock_var}"))?;
    let rabi = num(&rows[39], "var_Nminus")? / (n / 4.0);
    ensure((0.9..=1.1).contains(&rabi), || format!("deep-Rabi var/(N/4) = {rabi}"))?;
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for r in rows {
        let ratio = num(r, "ratio_T_over_U")?;
        if (0.1..=10.0).contains(&ratio) {
            x.push(num(r, "T")?.abs().ln());
            y.push(num(r, "var_Nminus")?.ln());
        }
    }
    ensure(x.len() >= 5, || format!("{} mid-Josephson points", x.len()))?;
    let k = slope(&x, &y);
    ensure((k - 0.5).abs() <= 0.1, || format!("mid-Josephson slope {k}"))?;
    let defect = num(&v, "max_exchange_defect")?;
    ensure(defect <= 1e-10, || format!("exchange defect {defect:e}"))?;
    Ok(format!("Fock var {fock_var:.2e}, Rabi ratio {rabi:.4}, slope {k:.3}, exchange {defect:.0e}"))
}

fn squeezed_states() -> Check {
    let (n, alpha) = (1000usize, 0.3);
    let nf = n as f64;
    let (theta, phi) = squeezing_angles(n, alpha);
    let state = format!("squeezed:{theta}:{phi}");
    let bh = |state: &str| dw_json(&["bh", "--N", "1000", "--T", "-1", "--U", "1", "--state", state]);
    let v = bh(&state)?;
    let z = num(&v, "var_Jz")? * 4.0 / nf.powf(2.0 * alpha);
    let y = num(&v, "var_Jy")? * 4.0 / nf.powf(2.0 * (1.0 - alpha));
    let jx = num(&v, "Jx")?;
    ensure((0.8..=1.2).contains(&z), || format!("var(Jz) ratio {z}"))?;
    ensure((0.8..=1.2).contains(&y), || format!("var(Jy) ratio {y}"))?;
    ensure(jx >= 0.5 * nf - nf.powf(1.0 - 2.0 * alpha), || format!("<Jx> = {jx}"))?;
    for s in [state.as_str(), "ground", "fock", "fock:400", "coherent", "gaussian:5", "squeezed:0.02:-0.4"] {
        let v = bh(s)?;
        ensure(v["robertson_holds"] == Value::Bool(true), || format!("Robertson bound fails for {s}"))?;
    }
    Ok(format!("var(Jz) ratio {z:.3}, var(Jy) ratio {y:.3}, N/2 - <Jx> = {:.3}", 0.5 * nf - jx))
}

fn even_split() -> Check {
    let v = dw_json(&["split", "--N", "100", "--lambda", "1", "--out", "json"])?;
    ensure(v["argmin_n"] == 50, || format!("argmin at {}", v["argmin_n"]))?;
    let rows = v["rows"].as_array().ok_or("no rows")?;
    let e: Vec<f64> = rows.iter().map(|r| num(r, "E_loc")).collect::<Result<_, _>>()?;
    let argmin = (0..e.len()).min_by(|&a, &b| e[a].total_cmp(&e[b])).unwrap_or(0);
    ensure(argmin == 50 || (e[argmin] - e[50]).abs() <= 1e-12 * e[50].abs(), || format!("table minimum at {argmin}"))?;
    // middle 60%: n in [20, 80]
    let (mut x, mut y) = (Vec::new(), Vec::new());
    let mut convex_min = f64::INFINITY;
    for k in 20..=80 {
        x.push((k as f64 - 50.0).powi(2) / 100.0);
        y.push(e[k] - e[50]);
        convex_min = convex_min.min(e[k + 1] - 2.0 * e[k] + e[k - 1]);
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let c = sxy / sxx;
    ensure(c > 0.0, || format!("fitted C = {c}"))?;
    ensure(convex_min >= 0.0, || format!("second difference {convex_min:e}"))?;
    ensure(num(&v, "quadratic_constant")? > 0.0, || "reported C not positive".into())?;
    Ok(format!("argmin 50, fitted C = {c:.4}, min second difference {convex_min:.3e}"))
}

fn theorem_assembly() -> Check {
    let mut notes = Vec::new();
    for total in [50usize, 100] {
        let n = total.to_string();
        let half = (total / 2).to_string();
        let t = dw_json(&["theorem", "--N", &n, "--lambda", "1"])?;
        let rows = csv_rows(&dw(&["sweep", "split", "--N", &n, "--lambda", "1", "--n", &half, "--out", "csv"])?);
        let row = rows.first().ok_or("empty split sweep")?;
        ensure(row.get("status").map(String::as_str) == Some("ok"), || format!("split point: {row:?}"))?;
        let split = field(row, "E_loc")? / total as f64;
        let bound = 2.0 * (num(&t, "e_B_split")? - num(&t, "e_B_half")?).abs() / total as f64 + 1e-6;
        let gap = (num(&t, "energy_per_particle")? - split).abs();
        ensure(gap <= bound, || format!("N={total}: gap {gap:e} > bound {bound:e}"))?;
        notes.push(format!("N={total}: gap {gap:.1e} <= {bound:.1e}"));
    }
    let ls: Vec<String> = (0..=12).map(|k| format!("{}", 3.0 + 0.5 * k as f64)).collect();
    let rows = csv_rows(&dw(&["sweep", "compare", "--N", "100", "--lambda", "1", "--L", &ls.join(","), "--out", "csv"])?);
    ensure(rows.iter().all(|r| r["status"] == "ok"), || "failed compare points".into())?;
    let winners: Vec<&str> = rows.iter().map(|r| r["winner"].as_str()).collect();
    let flips = winners.windows(2).filter(|w| w[0] != w[1]).count();
    ensure(flips == 1, || format!("{flips} flips: {winners:?}"))?;
    let at = rows.iter().position(|r| r["winner"] == "localized").unwrap_or(0);
    notes.push(format!("one flip, localized from L = {}", rows[at]["L"]));
    Ok(notes.join("; "))
}

/// Data lines sorted after the header, so that sweeps compare by content.
fn sorted_lines(text: &str) -> String {
    let mut lines: Vec<&str> = text.lines().collect();
    if lines.len() > 1 {
        lines[1..].sort_unstable();
    }
    lines.join("\n")
}

fn determinism() -> Check {
    let runs: [(&[&str], bool); 10] = [
        (&["hartree", "--lambda", "1", "--profile"], false),
        (&["tunnel", "--L-list", "4,6,8", "--out", "csv"], false),
        (&["bog", "--lambda", "1", "--modes", "16"], false),
        (&["bh", "--N", "200", "--T", "-0.05", "--state", "ground"], false),
        (&["bh-scan", "--N", "500", "--out", "csv"], false),
        (&["split", "--N", "40", "--lambda", "1"], false),
        (&["theorem", "--N", "40", "--lambda", "1"], false),
        (&["compare", "--N", "100", "--L", "6"], false),
        (&["sweep", "tunnel", "--L", "4,5,6,7,8", "--lambda", "0.5,1"], true),
        (&["sweep", "bh", "--N", "100", "--T", "-1,-0.1,-0.01", "--sigma", "2,3"], true),
    ];
    for (args, is_sweep) in runs {
        let outputs = [
            dw(args)?,
            dw(args)?,
            dw(&[args, &["--jobs", "1"]].concat())?,
            dw(&[args, &["--jobs", "8"]].concat())?,
        ];
        let key = |s: &String| if is_sweep { sorted_lines(s) } else { s.clone() };
        ensure(outputs.iter().all(|o| key(o) == key(&outputs[0])), || format!("outputs differ for {args:?}"))?;
    }
    Ok(format!("{} commands byte-identical over 2 runs and --jobs 1/8", runs.len()))
}

struct Criterion {
    name: &'static str,
    budget: Duration,
    run: fn() -> Check,
}

fn main() {
    let secs = Duration::from_secs;
    let criteria = [
        Criterion { name: "harmonic oracle", budget: secs(5), run: harmonic_oracle },
        Criterion { name: "mass scaling and convexity", budget: secs(30), run: mass_scaling },
        Criterion { name: "decay exponent", budget: secs(60), run: decay_exponent },
        Criterion { name: "tunneling law", budget: secs(120), run: tunneling_law },
        Criterion { name: "IMS identity", budget: secs(10), run: ims_identity },
        Criterion { name: "Bogoliubov structure", budget: secs(300), run: bogoliubov_structure },
        Criterion { name: "two-mode exactness", budget: secs(10), run: two_mode_exactness },
        Criterion { name: "crossover", budget: secs(120), run: crossover },
        Criterion { name: "squeezed states", budget: secs(30), run: squeezed_states },
        Criterion { name: "even split", budget: secs(300), run: even_split },
        Criterion { name: "theorem assembly", budget: secs(300), run: theorem_assembly },
        Criterion { name: "determinism", budget: secs(600), run: determinism },
    ];
    let mut failed = 0;
    for (k, c) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut outcome = (c.run)();
        let elapsed = start.elapsed();
        if outcome.is_ok() && elapsed > c.budget {
            outcome = Err(format!("took {elapsed:.1?}, budget {:?}", c.budget));
        }
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} {:>2} {:<28} {:>8.2?}  {detail}", k + 1, c.name, elapsed);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
