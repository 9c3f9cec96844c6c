use escape_core::rng::stream;
use escape_core::skorokhod::{
    integrate_constrained_ode, projected_velocity, refine_knots, skorokhod_map, verify_sp_solution, Path,
};
use escape_core::Model;
use proptest::prelude::*;
use rand::Rng;

fn tandem() -> Model {
    Model::tandem([1.0, 0.0], [1.0, 1.0], 1.0)
}

fn reentrant() -> Model {
    Model::new(vec![vec![0, 2], vec![1]], vec![Some(1), Some(2), None], vec![1.0, 0.0, 0.0], vec![1.0; 3], 1.0)
}

fn knots_strategy(dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (prop::collection::vec(0.0..1.0_f64, dim), prop::collection::vec(prop::collection::vec(-0.4..0.3_f64, dim), 3..12))
        .prop_map(|(start, steps)| {
            let mut out = vec![start];
            for s in steps {
                let last = out.last().unwrap().clone();
                out.push(last.iter().zip(&s).map(|(a, b)| a + b).collect());
            }
            out
        })
}

fn sup_distance(a: &Path<f64>, b: &Path<f64>) -> f64 {
    a.sup_distance(b).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reflected_paths_satisfy_the_problem(knots in knots_strategy(3)) {
        let m = reentrant();
        let psi: Path<f64> = refine_knots(&knots, 0.1, 7);
        let out = skorokhod_map(&m, &psi).unwrap();
        let report = verify_sp_solution(&m, &psi, &out.phi, &out.eta, 1e-9).unwrap();
        prop_assert!(report.passed(), "{:?}", report);
        // Complementarity written out: no push while the class is away from zero.
        for j in 0..3 {
            let mut leak = 0.0;
            for k in 1..psi.len() {
                if out.phi.values[k][j] > 1e-9 {
                    leak += out.eta.values[k][j] - out.eta.values[k - 1][j];
                }
            }
            prop_assert!(leak.abs() <= 1e-12);
        }
    }

    #[test]
    fn nonnegative_paths_are_left_alone(knots in knots_strategy(2)) {
        let lifted: Vec<Vec<f64>> = knots.iter().map(|k| k.iter().map(|x| x.abs()).collect()).collect();
        let psi: Path<f64> = refine_knots(&lifted, 0.1, 5);
        let out = skorokhod_map(&tandem(), &psi).unwrap();
        prop_assert_eq!(&out.phi.values, &psi.values);
        prop_assert!(out.eta.values.iter().flatten().all(|&e| e == 0.0));
    }

    #[test]
    fn projected_velocity_keeps_boundary_classes_nonnegative(
        x in prop::collection::vec(prop_oneof![Just(0.0), 0.1..1.0_f64], 3),
        v in prop::collection::vec(-1.0..1.0_f64, 3),
    ) {
        let p = projected_velocity(&reentrant(), &x, &v).unwrap();
        for i in 0..3 {
            if x[i] == 0.0 {
                prop_assert!(p[i] >= 0.0);
            } else {
                // Away from the boundary only upstream pushes can act.
                prop_assert!(p[i] <= v[i] + 1e-15);
            }
        }
    }
}

/// Random knot sequence starting in the orthant with a downward drift.
fn random_knots(rng: &mut impl Rng, dim: usize, count: usize) -> Vec<Vec<f64>> {
    let mut out = vec![(0..dim).map(|_| rng.gen_range(0.0..0.5)).collect::<Vec<f64>>()];
    for _ in 0..count {
        let last = out.last().unwrap().clone();
        out.push(last.iter().map(|x| x + rng.gen_range(-0.3..0.2)).collect());
    }
    out
}

#[test]
fn lipschitz_ratio_is_stable_under_refinement() {
    let m = tandem();
    let ratio_at = |refine: usize| {
        let mut worst = 0.0_f64;
        for k in 0..120u64 {
            let mut rng = stream(11, k);
            let a = random_knots(&mut rng, 2, 10);
            let b: Vec<Vec<f64>> =
                a.iter().map(|p| p.iter().map(|x| x + rng.gen_range(-0.05..0.05)).collect()).collect();
            let b: Vec<Vec<f64>> = b
                .iter()
                .enumerate()
                .map(|(i, p)| if i == 0 { p.iter().map(|x: &f64| x.abs()).collect() } else { p.clone() })
                .collect();
            let (pa, pb): (Path<f64>, Path<f64>) = (refine_knots(&a, 0.1, refine), refine_knots(&b, 0.1, refine));
            let (fa, fb) = (skorokhod_map(&m, &pa).unwrap().phi, skorokhod_map(&m, &pb).unwrap().phi);
            worst = worst.max(sup_distance(&fa, &fb) / sup_distance(&pa, &pb));
        }
        worst
    };
    let coarse = ratio_at(16);
    let fine = ratio_at(32);
    assert!(coarse.is_finite() && coarse > 0.0);
    assert!((fine - coarse).abs() / coarse < 0.02, "{coarse} vs {fine}");
}

#[test]
fn finite_differences_of_the_map_approach_projected_velocity() {
    let m = reentrant();
    for k in 0..100u64 {
        let mut rng = stream(12, k);
        let x: Vec<f64> = (0..3).map(|_| if rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(0.1..1.0) }).collect();
        let v: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let pi = projected_velocity(&m, &x, &v).unwrap();
        for delta in [1e-3, 1e-4] {
            let times = vec![0.0, delta];
            let end: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + delta * b).collect();
            let phi = skorokhod_map(&m, &Path::new(times, vec![x.clone(), end]).unwrap()).unwrap().phi;
            for i in 0..3 {
                let fd = (phi.values[1][i] - x[i]) / delta;
                assert!((fd - pi[i]).abs() <= 10.0 * delta, "x={x:?} v={v:?} delta={delta}");
            }
        }
    }
}

#[test]
fn euler_error_shrinks_linearly_for_smooth_velocity() {
    // Scalar reflection of x' = cos(t) - 0.5 from x = 0.2. The unconstrained
    // solution 0.2 + sin t - t/2 stays positive on [0, 1], so the exact
    // answer is known in closed form.
    let m = Model::competing_queues(vec![1.0], vec![1.0], 1.0);
    let exact = |t: f64| 0.2 + t.sin() - 0.5 * t;
    let err = |dt: f64| {
        let p = integrate_constrained_ode(&m, &[0.2], |t| vec![t.cos() - 0.5], dt, 1.0).unwrap();
        p.times.iter().zip(&p.values).map(|(&t, x)| (x[0] - exact(t)).abs()).fold(0.0, f64::max)
    };
    let (e1, e2) = (err(0.01), err(0.005));
    assert!(e1 < 0.01);
    let ratio = e2 / e1;
    assert!((0.4..0.6).contains(&ratio), "{ratio}");
}
