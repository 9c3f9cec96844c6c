//! Acceptance suite. Runs every criterion, prints one line per criterion and
//! exits nonzero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use escape_core::converge::convergence_study;
use escape_core::dpe::{extract_policy, extract_v, solve_w, DpeOptions, StopRule};
use escape_core::game::{
    alpha_by_bisection, competing_queues_value, gradient_feedback, hamiltonian, hamiltonian_integrand,
    inner_min_rates, isaacs_gap, subsolution_scan, RateGrid,
};
use escape_core::mc::{estimate_risk_value, NeverServe, SimConfig, TabulatedPolicy};
use escape_core::rng::stream;
use escape_core::skorokhod::{projected_velocity, random_path, skorokhod_map, verify_sp_solution, Path};
use escape_core::{control_vertices, Model, Region};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Outcome);

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

/// One server working through three classes in sequence.
fn reentrant_three() -> Model {
    Model::new(
        vec![vec![0, 1, 2]],
        vec![Some(1), Some(2), None],
        vec![1.0, 0.0, 0.0],
        vec![3.0, 2.5, 4.0],
        1.0,
    )
}

fn tandem() -> Model {
    Model::tandem([1.0, 0.0], [1.5, 2.0], 1.0)
}

fn sp_suite() -> Outcome {
    let start = Instant::now();
    let mut failed = 0;
    let mut worst = 0.0_f64;
    for (tag, model) in [(0u64, tandem()), (1, reentrant_three())] {
        let drift = vec![-1.0; model.classes()];
        for k in 0..100u64 {
            let mut rng = stream(100 + tag, k);
            let psi: Path<f64> = random_path(&mut rng, model.classes(), 20, 0.05, 10, 0.3, &drift);
            let out = skorokhod_map(&model, &psi).expect("valid path");
            let report = verify_sp_solution(&model, &psi, &out.phi, &out.eta, 1e-9).expect("same grid");
            worst = worst.max(report.max_identity_error);
            if !report.passed() {
                failed += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        failed == 0 && elapsed < Duration::from_secs(10),
        format!("200 paths, {failed} failed, max identity error {worst:.1e}, {elapsed:.2?}"),
    )
}

fn projected_velocity_consistency() -> Outcome {
    let delta = 1e-4;
    let steps = 10;
    let mut worst = 0.0_f64;
    let models = [tandem(), reentrant_three()];
    for k in 0..100u64 {
        let model = &models[(k % 2) as usize];
        let j = model.classes();
        let mut rng = stream(200, k);
        let forced = rng.gen_range(0..j);
        let x: Vec<f64> = (0..j)
            .map(|i| if i == forced || rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.2..1.0) })
            .collect();
        let v: Vec<f64> = (0..j).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let times: Vec<f64> = (0..=steps).map(|s| delta * s as f64 / steps as f64).collect();
        let values = times.iter().map(|&t| x.iter().zip(&v).map(|(&a, &b)| a + t * b).collect()).collect();
        let psi = Path::new(times, values).expect("valid path");
        let phi = skorokhod_map(model, &psi).expect("valid path").phi;
        let end = phi.values.last().expect("nonempty");
        let pi = projected_velocity(model, &x, &v).expect("x in orthant");
        for i in 0..j {
            worst = worst.max(((end[i] - x[i]) / delta - pi[i]).abs());
        }
    }
    outcome(worst <= 1e-3, format!("100 points, max |FD - pi| = {worst:.1e}"))
}

fn plug_back() -> Outcome {
    let models = [Model::competing_queues(vec![1.0, 0.5], vec![2.0, 1.5], 3.0), tandem()];
    let mut worst = 0.0_f64;
    for k in 0..1000u64 {
        let model = &models[(k % 2) as usize];
        let mut rng = stream(300, k);
        let q: Vec<f64> = (0..model.classes()).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let m = inner_min_rates(model, &q, None);
        let h = hamiltonian(model, &q);
        let best = control_vertices(model)
            .iter()
            .map(|u| hamiltonian_integrand(model, &q, u, &m))
            .fold(f64::NEG_INFINITY, f64::max);
        let feedback = hamiltonian_integrand(model, &q, &gradient_feedback(model, &q), &m);
        worst = worst.max((best - h).abs()).max((feedback - h).abs());
    }
    outcome(worst <= 1e-12, format!("1000 q, max |integrand - H| = {worst:.1e}"))
}

fn isaacs() -> Outcome {
    let models = [Model::competing_queues(vec![1.0, 1.0], vec![2.0, 2.0], 5.0), tandem()];
    let mut outside = 0;
    let mut ratios = Vec::new();
    for (tag, model) in models.iter().enumerate() {
        let (mut coarse, mut fine) = (0.0, 0.0);
        for k in 0..100u64 {
            let mut rng = stream(400 + tag as u64, k);
            let q: Vec<f64> = (0..model.classes()).map(|_| rng.gen_range(-2.0..=2.0)).collect();
            let grid = RateGrid::new(201);
            let g1 = isaacs_gap(model, &q, &grid).expect("valid grid");
            let g2 = isaacs_gap(model, &q, &grid.refined()).expect("valid grid");
            for g in [&g1, &g2] {
                if g.gap.abs() > g.tolerance {
                    outside += 1;
                }
            }
            coarse += g1.gap;
            fine += g2.gap;
        }
        ratios.push(fine / coarse);
    }
    let halves = ratios.iter().all(|&r| r <= 0.5);
    outcome(
        outside == 0 && halves,
        format!("{outside} gaps above tolerance, refined/coarse total gap {ratios:.3?}"),
    )
}

fn closed_form() -> Outcome {
    let mut worst_f = 0.0_f64;
    let mut worst_h = 0.0_f64;
    for (l, m, c) in [(1.0, 2.0, 3.0), (1.0, 1.0, 2.0), (2.0, 3.0, 10.0)] {
        let model = Model::competing_queues(vec![l], vec![m], c);
        let domain = Region::rect(&model, vec![1.0]).expect("valid rect");
        let v = competing_queues_value(&model, &domain).expect("competing queues");
        worst_f = worst_f.max(v.residuals()[0].abs());
        worst_h = worst_h.max(hamiltonian(&model, &[-v.alpha[0]]).abs());
    }
    let model = Model::competing_queues(vec![1.0], vec![2.0], 3.0);
    let domain = Region::rect(&model, vec![1.0]).expect("valid rect");
    let a = competing_queues_value(&model, &domain).expect("competing queues").alpha[0];
    let oracle = alpha_by_bisection(1.0, 2.0, 3.0);
    let exact = (3.0 + 7.0_f64.sqrt()).ln();
    let err = (a - exact).abs().max((a - oracle).abs());
    outcome(
        worst_f <= 1e-12 && worst_h <= 1e-10 && err <= 1e-10,
        format!("F residual {worst_f:.1e}, H residual {worst_h:.1e}, alpha(1,2,3) = {a:.12} (err {err:.1e})"),
    )
}

/// Smallest `c` in {5, 10, 20} whose scan passes, with the scan minimum.
fn scan_c() -> Option<(f64, f64)> {
    [5.0, 10.0, 20.0].into_iter().find_map(|c| {
        let model = Model::competing_queues(vec![1.0, 1.0], vec![1.0, 1.0], c);
        let domain = Region::rect(&model, vec![1.0, 1.0]).expect("valid rect");
        let v = competing_queues_value(&model, &domain).expect("competing queues");
        let scan = subsolution_scan(&v, &model, 10_000, 0).expect("samples > 0");
        (scan.min_h >= -1e-8).then_some((c, scan.min_h))
    })
}

fn subsolution() -> Outcome {
    match scan_c() {
        Some((c, min_h)) => outcome(true, format!("c = {c}, min H = {min_h:.2e} over 10^4 samples")),
        None => outcome(false, "no c in {5, 10, 20} passes"),
    }
}

fn convergence() -> Outcome {
    let start = Instant::now();
    let Some((c, _)) = scan_c() else {
        return outcome(false, "no admissible c from the scan");
    };
    let model = Model::competing_queues(vec![1.0, 1.0], vec![2.0, 2.0], c);
    let domain = Region::rect(&model, vec![1.0, 1.0]).expect("valid rect");
    let v = competing_queues_value(&model, &domain).expect("competing queues");
    let study = convergence_study(&model, &domain, &[8, 16, 32], &DpeOptions::default(), |x| v.value(x))
        .expect("valid options");
    let e: Vec<f64> = study.rows.iter().map(|r| r.error).collect();
    let converged = study.rows.iter().all(|r| r.converged);
    let elapsed = start.elapsed();
    outcome(
        converged && study.strictly_decreasing() && e[2] <= 0.5 * e[0] && elapsed < Duration::from_secs(60),
        format!("c = {c}, {} shared points, e_n = {e:.4?}, {elapsed:.2?}", study.shared.len()),
    )
}

fn tiny_chain() -> (Model, Region) {
    let model = Model::competing_queues(vec![1.0], vec![1.0], 1.0);
    let domain = Region::rect(&model, vec![2.0]).expect("valid rect");
    (model, domain)
}

fn tight() -> DpeOptions<f64> {
    DpeOptions { tol: 1e-14, stop: StopRule::Absolute, ..DpeOptions::default() }
}

fn dpe_oracle() -> Outcome {
    let (model, domain) = tiny_chain();
    let sol = solve_w(&model, &domain, 1, &tight()).expect("valid options");
    let w = &sol.w.values;
    let err_w = (w[0] - 0.2).abs().max((w[1] - 0.4).abs());
    let v = extract_v(&sol.w, 1).expect("positive W");
    let err_v = (v.values[0] + 0.2_f64.ln()).abs();
    outcome(
        sol.converged && err_w <= 1e-10 && err_v <= 1e-9,
        format!("W = ({:.12}, {:.12}), V(0) error {err_v:.1e}", w[0], w[1]),
    )
}

fn mc_agreement() -> Outcome {
    let start = Instant::now();
    let (model, domain) = tiny_chain();
    let sol = solve_w(&model, &domain, 1, &tight()).expect("valid options");
    let policy = extract_policy(&model, &domain, 1, &sol.w).expect("matching field");
    let optimal = TabulatedPolicy::new("optimal", &model, sol.lattice.clone(), policy);
    let config = SimConfig::new(&model, 1, 100_000, 0, -(0.2_f64.ln()));
    let opt = estimate_risk_value(&model, &domain, &config, &optimal, &[0]).expect("valid config");
    let never = estimate_risk_value(&model, &domain, &config, &NeverServe, &[0]).expect("valid config");
    let elapsed = start.elapsed();
    let z_opt = (opt.mean - 0.2) / opt.stderr;
    let z_never = (never.mean - 0.25) / never.stderr;
    outcome(
        z_opt.abs() <= 3.0 && z_never.abs() <= 3.0 && elapsed < Duration::from_secs(30),
        format!(
            "optimal {:.5} +- {:.5} (z {z_opt:+.2}), never-serve {:.5} +- {:.5} (z {z_never:+.2}), {elapsed:.2?}",
            opt.mean, opt.stderr, never.mean, never.stderr
        ),
    )
}

fn blockable() -> Outcome {
    let n = 16;
    let model = Model::tandem([1.0, 0.0], [1.0, 1.0], 1.0);
    let domain = Region::rect(&model, vec![1.0, 1.0]).expect("valid rect");
    let sol = solve_w(&model, &domain, n, &DpeOptions::default()).expect("valid options");
    let policy = extract_policy(&model, &domain, n, &sol.w).expect("matching field");
    let vertices = control_vertices(&model);
    let top = n as i64;
    let mut checked = 0;
    let mut crossing = 0;
    for (i, state) in sol.lattice.states().iter().enumerate() {
        if state[1] == top {
            checked += 1;
            if state[0] > 0 && vertices[policy.0[i]].0[0] > 0.0 {
                crossing += 1;
            }
        }
    }
    outcome(
        sol.converged && checked > 0 && crossing == 0,
        format!("{checked} states on x_2 = z_2, {crossing} select a crossing service"),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("Skorokhod problem suite", sp_suite),
        ("projected velocity consistency", projected_velocity_consistency),
        ("Hamiltonian plug-back", plug_back),
        ("Isaacs gap", isaacs),
        ("closed-form competing queues", closed_form),
        ("subsolution scan", subsolution),
        ("V^n convergence", convergence),
        ("DPE tiny chain", dpe_oracle),
        ("Monte Carlo agreement", mc_agreement),
        ("blockable boundary", blockable),
    ];
    let mut all = true;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        all &= o.pass;
        println!("criterion {:>2} {:<32} {}  {}", k + 1, name, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
