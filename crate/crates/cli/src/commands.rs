use std::fs;

use escape_core::converge::convergence_study;
use escape_core::dpe::{solve_w, DpeOptions, DpeSolution};
use escape_core::game::{
    alpha_by_bisection, competing_queues_value, gradient_feedback, hamiltonian, hamiltonian_integrand,
    inner_min_rates, isaacs_gap, subsolution_scan, RateGrid,
};
use escape_core::mc::{
    compare_policies, lattice_state_of, FeedbackPolicy, GameFeedback, NeverServe, PriorityRule, SimConfig,
    TabulatedPolicy,
};
use escape_core::rng::stream;
use escape_core::skorokhod::{random_path, skorokhod_map, verify_sp_solution, Path};
use escape_core::{control_vertices, validate_model, DomainShape, Model, ModelConfig, Region};
use rand::Rng;

use crate::error::CliError;
use crate::output::{num, OutDir, Table};
use crate::Common;

/// Parsed config before model invariants are checked.
fn load(common: &Common) -> Result<(Model, Region), CliError> {
    let path = common.config.as_ref().ok_or_else(|| CliError::invalid("config", "--config is required"))?;
    let text = fs::read_to_string(path).map_err(|source| CliError::ReadConfig { path: path.clone(), source })?;
    let mut cfg = ModelConfig::from_json(&text)?;
    if let Some(c) = common.c {
        cfg.c = c;
    }
    let model = cfg.model::<f64>()?;
    if let Some(v) = validate_model(&model).first() {
        return Err(CliError::invalid(v.key(), v.to_string()));
    }
    let domain = cfg.domain(&model)?;
    Ok((model, domain))
}

fn dpe_options(common: &Common) -> Result<DpeOptions<f64>, CliError> {
    let tol = common.tol.unwrap_or(1e-10);
    if tol.is_nan() || tol <= 0.0 {
        return Err(CliError::invalid("tol", "must be positive"));
    }
    Ok(DpeOptions { tol, max_iters: common.max_iters, ..DpeOptions::default() })
}

fn scales(common: &Common, default: &[u32]) -> Result<Vec<u32>, CliError> {
    let ns = if common.n.is_empty() { default.to_vec() } else { common.n.clone() };
    if ns.contains(&0) {
        return Err(CliError::invalid("n", "scales must be at least 1"));
    }
    Ok(ns)
}

fn positive(value: Option<usize>, default: usize, key: &str) -> Result<usize, CliError> {
    match value.unwrap_or(default) {
        0 => Err(CliError::invalid(key, "must be at least 1")),
        v => Ok(v),
    }
}

fn served_label(classes: &[usize]) -> String {
    if classes.is_empty() {
        "idle".to_string()
    } else {
        classes.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join("+")
    }
}

pub fn validate(common: &Common) -> Result<(), CliError> {
    let path = common.config.as_ref().ok_or_else(|| CliError::invalid("config", "--config is required"))?;
    let text = fs::read_to_string(path).map_err(|source| CliError::ReadConfig { path: path.clone(), source })?;
    let cfg = ModelConfig::from_json(&text)?;
    let model = cfg.model::<f64>()?;
    let violations = validate_model(&model);

    let out = OutDir::new(&common.out, common.stamp)?;
    let mut table = Table::new(["key", "violation"]);
    for v in &violations {
        table.push(vec![v.key().to_string(), v.to_string()]);
    }
    out.write("validate.csv", &table)?;

    if let Some(first) = violations.first() {
        for v in &violations {
            eprintln!("{}: {v}", v.key());
        }
        return Err(CliError::invalid(first.key(), first.to_string()));
    }
    let domain = cfg.domain(&model)?;
    let shape = match &domain.shape {
        DomainShape::Rect { .. } => "rectangle",
        DomainShape::WeightedCap { .. } => "weighted cap",
    };
    println!(
        "model valid: {} classes, {} servers, {} control vertices, {shape} domain",
        model.classes(),
        model.servers(),
        control_vertices(&model).len()
    );
    Ok(())
}

pub fn sp_check(common: &Common) -> Result<(), CliError> {
    let (model, _) = load(common)?;
    let paths = positive(common.samples, 200, "samples")?;
    let tol = common.tol.unwrap_or(1e-9);
    let drift = vec![-1.0; model.classes()];

    let mut table = Table::new(["path", "grid_points", "max_identity_error", "failures", "passed"]);
    let mut failed = 0;
    for k in 0..paths {
        let mut rng = stream(common.seed, k as u64);
        let psi: Path<f64> = random_path(&mut rng, model.classes(), 20, 0.05, 10, 0.3, &drift);
        let sol = skorokhod_map(&model, &psi).map_err(escape_core::GameError::from)?;
        let report = verify_sp_solution(&model, &psi, &sol.phi, &sol.eta, tol).map_err(escape_core::GameError::from)?;
        if !report.passed() {
            failed += 1;
        }
        table.push(vec![
            k.to_string(),
            psi.len().to_string(),
            num(report.max_identity_error),
            report.failures.len().to_string(),
            report.passed().to_string(),
        ]);
    }
    OutDir::new(&common.out, common.stamp)?.write("sp_check.csv", &table)?;
    println!("{paths} paths checked at tol {tol:e}: {failed} failed");
    if failed > 0 {
        return Err(CliError::Numerical(format!("{failed} of {paths} paths violate the Skorokhod problem")));
    }
    Ok(())
}

pub fn ham_check(common: &Common) -> Result<(), CliError> {
    let (model, _) = load(common)?;
    let count = positive(common.samples, 100, "samples")?;
    let j = model.classes();
    // Keep the per-server product grid near 1e5 points.
    let block = model.serves.iter().map(Vec::len).max().unwrap_or(1) as f64;
    let points = (1e5_f64.powf(1.0 / block).floor() as usize).clamp(11, 201);
    let grid = RateGrid::new(points);

    let mut header: Vec<String> = vec!["index".into()];
    header.extend((1..=j).map(|i| format!("q_{i}")));
    header.extend(
        ["hamiltonian", "plug_back_error", "inf_sup", "gap", "tolerance", "gap_refined"].map(String::from),
    );
    let mut table = Table::new(header);
    let (mut worst_plug, mut outside, mut coarse, mut fine) = (0.0_f64, 0, 0.0, 0.0);
    for k in 0..count {
        let mut rng = stream(common.seed, k as u64);
        let q: Vec<f64> = (0..j).map(|_| rng.gen_range(-2.0..=2.0)).collect();
        let h = hamiltonian(&model, &q);
        let rates = inner_min_rates(&model, &q, None);
        let plug = (hamiltonian_integrand(&model, &q, &gradient_feedback(&model, &q), &rates) - h).abs();
        worst_plug = worst_plug.max(plug / (1.0 + h.abs()));
        let g1 = isaacs_gap(&model, &q, &grid)?;
        let g2 = isaacs_gap(&model, &q, &grid.refined())?;
        if g1.gap.abs() > g1.tolerance || g2.gap.abs() > g2.tolerance {
            outside += 1;
        }
        coarse += g1.gap;
        fine += g2.gap;
        let mut row = vec![k.to_string()];
        row.extend(q.iter().map(|&x| num(x)));
        row.extend([h, plug, g1.inf_sup, g1.gap, g1.tolerance, g2.gap].map(num));
        table.push(row);
    }
    OutDir::new(&common.out, common.stamp)?.write("ham_check.csv", &table)?;
    let ratio = if coarse > 0.0 { fine / coarse } else { 0.0 };
    println!(
        "{count} gradients, {points}-point rate grid: max relative plug-back error {worst_plug:.2e}, \
         {outside} gaps above tolerance, refined/coarse total gap {ratio:.3}"
    );
    if worst_plug > 1e-12 || outside > 0 {
        return Err(CliError::Numerical("Hamiltonian checks failed".into()));
    }
    Ok(())
}

pub fn closed_form(common: &Common) -> Result<(), CliError> {
    let (model, domain) = load(common)?;
    let samples = positive(common.samples, 10_000, "samples")?;
    let value = competing_queues_value(&model, &domain)?;

    let mut table = Table::new(["class", "lambda", "mu", "alpha", "alpha_bisection", "residual"]);
    for i in 0..model.classes() {
        table.push(vec![
            (i + 1).to_string(),
            num(model.lambda[i]),
            num(model.mu[i]),
            num(value.alpha[i]),
            num(alpha_by_bisection(model.lambda[i], model.mu[i], model.c)),
            num(value.residuals()[i]),
        ]);
    }
    let scan = subsolution_scan(&value, &model, samples, common.seed)?;
    let passed = scan.min_h >= -1e-8;
    let mut header = vec!["c".to_string(), "samples".into(), "min_h".into(), "passed".into()];
    header.extend((1..=model.classes()).map(|i| format!("nu_{i}")));
    let mut scan_table = Table::new(header);
    let mut row = vec![num(model.c), scan.samples.to_string(), num(scan.min_h), passed.to_string()];
    row.extend(scan.argmin.iter().map(|&x| num(x)));
    scan_table.push(row);

    let out = OutDir::new(&common.out, common.stamp)?;
    out.write("closed_form.csv", &table)?;
    out.write("scan.csv", &scan_table)?;
    for (i, a) in value.alpha.iter().enumerate() {
        println!("alpha_{} = {a:.10}", i + 1);
    }
    println!(
        "subsolution scan at c = {}: min H = {:.3e} over {} points ({})",
        model.c,
        scan.min_h,
        scan.samples,
        if passed { "passed" } else { "failed" }
    );
    Ok(())
}

fn write_dpe(out: &OutDir, model: &Model, n: u32, sol: &DpeSolution<f64>) -> Result<(), CliError> {
    let j = model.classes();
    let op = escape_core::dpe::LatticeOperator::on_lattice(model, sol.lattice.clone());
    let vertices = control_vertices(model);
    let mut header: Vec<String> = vec!["index".into()];
    header.extend((1..=j).map(|i| format!("k_{i}")));
    header.extend((1..=j).map(|i| format!("x_{i}")));
    header.extend(["W", "V", "vertex", "served"].map(String::from));
    let mut table = Table::new(header);
    for (s, k) in sol.lattice.states().iter().enumerate() {
        let w = sol.w.values[s];
        let (_, vertex) = op.apply_at(&sol.w.values, s);
        let served: Vec<usize> = (0..j).filter(|&i| vertices[vertex].0[i] > 0.0).collect();
        let mut row = vec![s.to_string()];
        row.extend(k.iter().map(|v| v.to_string()));
        row.extend(k.iter().map(|&v| num(v as f64 / n as f64)));
        row.extend([num(w), num(-w.ln() / n as f64), vertex.to_string(), served_label(&served)]);
        table.push(row);
    }
    out.write(&format!("dpe_n{n}.csv"), &table)?;
    Ok(())
}

pub fn solve_dpe(common: &Common) -> Result<(), CliError> {
    let (model, domain) = load(common)?;
    let opts = dpe_options(common)?;
    let out = OutDir::new(&common.out, common.stamp)?;
    let mut unconverged = Vec::new();
    for n in scales(common, &[8])? {
        let sol = solve_w(&model, &domain, n, &opts)?;
        write_dpe(&out, &model, n, &sol)?;
        println!(
            "n = {n}: {} states, {} sweeps, residual {:.2e}{}",
            sol.lattice.len(),
            sol.iterations,
            sol.residual,
            if sol.converged { "" } else { " (not converged)" }
        );
        if !sol.converged {
            unconverged.push(n);
        }
    }
    if !unconverged.is_empty() {
        return Err(CliError::Numerical(format!("value iteration did not converge for n = {unconverged:?}")));
    }
    Ok(())
}

pub fn simulate(common: &Common) -> Result<(), CliError> {
    let (model, domain) = load(common)?;
    let n = scales(common, &[8])?[0];
    let trials = positive(common.trials, 10_000, "trials")?;
    let x0 = if common.x0.is_empty() { vec![0.0; model.classes()] } else { common.x0.clone() };
    if x0.len() != model.classes() {
        return Err(CliError::invalid("x0", format!("expected {} coordinates", model.classes())));
    }
    let k0 = lattice_state_of(&x0, n)
        .filter(|k| domain.contains_lattice(k, n))
        .ok_or_else(|| CliError::invalid("x0", format!("not a point of the lattice at n = {n} inside the domain")))?;

    let sol = solve_w(&model, &domain, n, &dpe_options(common)?)?;
    if !sol.converged {
        return Err(CliError::Numerical(format!("value iteration did not converge at n = {n}")));
    }
    let idx = sol.lattice.index_of(&k0).expect("start checked against the domain");
    let v_dpe = -sol.w.values[idx].ln() / n as f64;
    let field = escape_core::dpe::extract_policy(&model, &domain, n, &sol.w)?;
    let optimal = TabulatedPolicy::new("optimal", &model, sol.lattice.clone(), field);
    let mu_c = PriorityRule::mu_c(&model, None);
    let closed = competing_queues_value(&model, &domain).ok();
    let game = closed.as_ref().map(|v| GameFeedback::new(&model, v));
    let mut policies: Vec<&dyn FeedbackPolicy<f64>> = vec![&optimal, &mu_c, &NeverServe];
    if let Some(g) = &game {
        policies.push(g);
    }

    let config = SimConfig::new(&model, n, trials, common.seed, v_dpe);
    let rows = compare_policies(&model, &domain, &config, &policies, &k0)?;
    let mut table = Table::new(["policy", "trials", "mean", "stderr", "V_hat", "censored_count"]);
    for (name, e) in &rows {
        table.push(vec![
            name.clone(),
            e.trials.to_string(),
            num(e.mean),
            num(e.stderr),
            num(e.v_hat),
            e.censored.to_string(),
        ]);
        println!("{name:<14} V_hat = {:.6}  mean = {:.6e} +- {:.2e}  censored {}", e.v_hat, e.mean, e.stderr, e.censored);
        if e.censored > 0 {
            println!("  censored at horizon {:.3}; mean biased upward by at most {:.2e}", config.horizon_cap, e.bias_bound);
        }
    }
    OutDir::new(&common.out, common.stamp)?.write("simulate.csv", &table)?;
    println!("dynamic programming value V^n(x0) = {v_dpe:.6}");
    Ok(())
}

pub fn converge(common: &Common) -> Result<(), CliError> {
    let (model, domain) = load(common)?;
    let value = competing_queues_value(&model, &domain)?;
    let ns = scales(common, &[8, 16, 32])?;
    let study = convergence_study(&model, &domain, &ns, &dpe_options(common)?, |x| value.value(x))?;

    let mut table = Table::new(["n", "points", "error", "iterations", "converged"]);
    for r in &study.rows {
        table.push(vec![
            r.n.to_string(),
            r.points.to_string(),
            num(r.error),
            r.iterations.to_string(),
            r.converged.to_string(),
        ]);
        println!("n = {:>4}: max error {:.6} over {} points", r.n, r.error, r.points);
    }
    OutDir::new(&common.out, common.stamp)?.write("converge.csv", &table)?;
    println!("errors strictly decreasing: {}", if study.strictly_decreasing() { "yes" } else { "no" });
    if study.shared.is_empty() {
        println!("warning: the requested scales share no interior lattice point");
    }
    let unconverged: Vec<u32> = study.rows.iter().filter(|r| !r.converged).map(|r| r.n).collect();
    if !unconverged.is_empty() {
        return Err(CliError::Numerical(format!("value iteration did not converge for n = {unconverged:?}")));
    }
    Ok(())
}
