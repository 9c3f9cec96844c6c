//! Skorokhod reflection on the orthant with re-entrant line directions.
//!
//! The constraint direction of class `j` is `gamma_j = e_j - e_{r(j)}`
//! (`e_0 = 0` for exit). Because routes are acyclic, pushing class `j` back
//! to zero only lowers its downstream class, so one sweep in topological
//! order resolves every violated constraint without fixed-point iteration.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;

use crate::error::PathError;
use crate::network::NetworkModel;
use crate::scalar::Real;

/// Activation tolerance deciding `x_j = 0` for continuum points.
pub const EPS_ACT: f64 = 1e-10;

/// Piecewise-linear path sampled on a strictly increasing grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Path<T> {
    pub times: Vec<T>,
    pub values: Vec<Vec<T>>,
}

impl<T: Real> Path<T> {
    pub fn new(times: Vec<T>, values: Vec<Vec<T>>) -> Result<Self, PathError> {
        if times.is_empty() || times.len() != values.len() {
            return Err(PathError::Empty);
        }
        for k in 1..times.len() {
            if !(times[k] > times[k - 1]) {
                return Err(PathError::NonIncreasing { index: k });
            }
        }
        let dim = values[0].len();
        for (k, v) in values.iter().enumerate() {
            if v.len() != dim || v.iter().any(|x| !x.is_finite()) {
                return Err(PathError::BadValue { index: k });
            }
        }
        Ok(Self { times, values })
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Linear interpolation; constant extrapolation outside the grid.
    pub fn at(&self, t: T) -> Vec<T> {
        let last = self.len() - 1;
        if t <= self.times[0] {
            return self.values[0].clone();
        }
        if t >= self.times[last] {
            return self.values[last].clone();
        }
        let k = self.times.partition_point(|&s| s <= t) - 1;
        let w = (t - self.times[k]) / (self.times[k + 1] - self.times[k]);
        self.values[k]
            .iter()
            .zip(&self.values[k + 1])
            .map(|(&a, &b)| a + w * (b - a))
            .collect()
    }

    /// Sup-norm distance on a shared grid.
    pub fn sup_distance(&self, other: &Self) -> Result<T, PathError> {
        if self.times != other.times {
            return Err(PathError::GridMismatch);
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| (x - y).abs()))
            .fold(T::zero(), T::max))
    }
}

/// Constrained path, pushing process, and the class order used to build them.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionOutput<T> {
    pub phi: Path<T>,
    /// Cumulative push per class; nondecreasing, zero at the start.
    pub eta: Path<T>,
    pub push_order: Vec<usize>,
}

/// Class order in which every class precedes its route successor.
///
/// Ties between ready classes go to the lowest index. Returns `None` when
/// the routing has a cycle.
pub fn topological_order<T: Real>(model: &NetworkModel<T>) -> Option<Vec<usize>> {
    let j = model.classes();
    let mut indegree = vec![0usize; j];
    for next in model.route.iter().flatten() {
        indegree[*next] += 1;
    }
    let mut ready: BinaryHeap<Reverse<usize>> =
        (0..j).filter(|&i| indegree[i] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(j);
    while let Some(Reverse(i)) = ready.pop() {
        order.push(i);
        if let Some(next) = model.route[i] {
            indegree[next] -= 1;
            if indegree[next] == 0 {
                ready.push(Reverse(next));
            }
        }
    }
    (order.len() == j).then_some(order)
}

/// Reflection machinery for one network, caching the topological order.
#[derive(Debug, Clone)]
pub struct Reflector<'a, T> {
    model: &'a NetworkModel<T>,
    order: Vec<usize>,
}

impl<'a, T: Real> Reflector<'a, T> {
    /// Panics on cyclic routing; validate the model first.
    pub fn new(model: &'a NetworkModel<T>) -> Self {
        let order = topological_order(model).expect("routing must be acyclic");
        Self { model, order }
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// One downstream sweep: every class `j` whose value is negative and for
    /// which `active(j)` holds is pushed to zero along `gamma_j`. Push sizes
    /// are written into `push`.
    fn sweep(&self, w: &mut [T], push: &mut [T], active: impl Fn(usize) -> bool) {
        for &j in &self.order {
            if w[j] < T::zero() && active(j) {
                let a = -w[j];
                push[j] = a;
                w[j] = T::zero();
                if let Some(next) = self.model.route[j] {
                    w[next] -= a;
                }
            } else {
                push[j] = T::zero();
            }
        }
    }

    /// Grid step of the Skorokhod map: pushes every negative component of
    /// `y` back to zero, writing the push sizes into `push`.
    pub fn project(&self, y: &mut [T], push: &mut [T]) {
        self.sweep(y, push, |_| true);
    }

    /// Projected velocity `pi(x, v)`.
    pub fn projected_velocity(&self, x: &[T], v: &[T]) -> Result<Vec<T>, PathError> {
        let eps = T::of(EPS_ACT);
        if let Some(i) = x.iter().position(|&xi| xi < -eps) {
            return Err(PathError::NegativeStart { index: i });
        }
        if x.len() != self.model.classes() || v.len() != x.len() {
            return Err(PathError::BadValue { index: 0 });
        }
        let mut w = v.to_vec();
        let mut push = vec![T::zero(); w.len()];
        self.sweep(&mut w, &mut push, |j| x[j] <= eps);
        Ok(w)
    }

    /// Discrete Skorokhod map on the grid of `psi`.
    pub fn map(&self, psi: &Path<T>) -> Result<ReflectionOutput<T>, PathError> {
        let j = self.model.classes();
        if psi.dim() != j {
            return Err(PathError::BadValue { index: 0 });
        }
        if let Some(i) = psi.values[0].iter().position(|&x| x < T::zero()) {
            return Err(PathError::NegativeStart { index: i });
        }
        let mut phi = Vec::with_capacity(psi.len());
        let mut eta = Vec::with_capacity(psi.len());
        phi.push(psi.values[0].clone());
        eta.push(vec![T::zero(); j]);
        let mut push = vec![T::zero(); j];
        for k in 1..psi.len() {
            let mut y: Vec<T> = phi[k - 1]
                .iter()
                .zip(&psi.values[k])
                .zip(&psi.values[k - 1])
                .map(|((&p, &b), &a)| p + (b - a))
                .collect();
            self.sweep(&mut y, &mut push, |_| true);
            let e: Vec<T> = eta[k - 1].iter().zip(&push).map(|(&e, &a)| e + a).collect();
            phi.push(y);
            eta.push(e);
        }
        Ok(ReflectionOutput {
            phi: Path { times: psi.times.clone(), values: phi },
            eta: Path { times: psi.times.clone(), values: eta },
            push_order: self.order.clone(),
        })
    }

    /// `sum_j eta_j gamma_j`.
    pub fn push_displacement(&self, eta: &[T]) -> Vec<T> {
        let mut out = eta.to_vec();
        for (j, &e) in eta.iter().enumerate() {
            if let Some(next) = self.model.route[j] {
                out[next] -= e;
            }
        }
        out
    }
}

/// See [`Reflector::projected_velocity`].
pub fn projected_velocity<T: Real>(
    model: &NetworkModel<T>,
    x: &[T],
    v: &[T],
) -> Result<Vec<T>, PathError> {
    Reflector::new(model).projected_velocity(x, v)
}

/// See [`Reflector::map`].
pub fn skorokhod_map<T: Real>(
    model: &NetworkModel<T>,
    psi: &Path<T>,
) -> Result<ReflectionOutput<T>, PathError> {
    Reflector::new(model).map(psi)
}

/// Uniform time grid `0, dt, 2dt, ...` ending exactly at `horizon`.
pub fn uniform_grid<T: Real>(dt: T, horizon: T) -> Result<Vec<T>, PathError> {
    if !(dt > T::zero()) || !(horizon > T::zero()) {
        return Err(PathError::NonPositiveStep);
    }
    let steps = (horizon / dt).ceil().to_usize().unwrap_or(0).max(1);
    let mut times: Vec<T> = (0..steps).map(|k| T::of_usize(k) * dt).collect();
    // Drop a final sliver created by roundoff in the step count.
    if steps > 1 && horizon - times[steps - 1] < dt * T::of(1e-9) {
        times.pop();
    }
    times.push(horizon);
    Ok(times)
}

/// Solves `phi' = pi(phi, v(t))` as the Skorokhod image of `x0 + int v`.
///
/// `velocity` is sampled at the left end of each step, so a step-function
/// velocity whose jumps fall on the grid is integrated exactly.
pub fn integrate_constrained_ode<T: Real>(
    model: &NetworkModel<T>,
    x0: &[T],
    velocity: impl Fn(T) -> Vec<T>,
    dt: T,
    horizon: T,
) -> Result<Path<T>, PathError> {
    let times = uniform_grid(dt, horizon)?;
    let mut values = Vec::with_capacity(times.len());
    values.push(x0.to_vec());
    for k in 1..times.len() {
        let h = times[k] - times[k - 1];
        let v = velocity(times[k - 1]);
        let next = values[k - 1].iter().zip(&v).map(|(&p, &vi)| p + vi * h).collect();
        values.push(next);
    }
    let psi = Path::new(times, values)?;
    Ok(skorokhod_map(model, &psi)?.phi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpFailure {
    /// `phi != psi + sum eta_j gamma_j` at a grid index.
    Identity { index: usize, error: f64 },
    Nonnegativity { index: usize, class: usize, value: f64 },
    Monotonicity { index: usize, class: usize, decrement: f64 },
    /// Push applied while the class was away from zero.
    Complementarity { index: usize, class: usize, phi: f64 },
    InitialPush { class: usize },
}

impl SpFailure {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Identity { .. } => "identity",
            Self::Nonnegativity { .. } => "nonnegativity",
            Self::Monotonicity { .. } => "monotonicity",
            Self::Complementarity { .. } => "complementarity",
            Self::InitialPush { .. } => "initial push",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SpReport {
    pub failures: Vec<SpFailure>,
    pub max_identity_error: f64,
}

impl SpReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn has(&self, kind: &str) -> bool {
        self.failures.iter().any(|f| f.kind() == kind)
    }
}

/// Checks the discretized Skorokhod problem conditions to tolerance `tol`.
pub fn verify_sp_solution<T: Real>(
    model: &NetworkModel<T>,
    psi: &Path<T>,
    phi: &Path<T>,
    eta: &Path<T>,
    tol: T,
) -> Result<SpReport, PathError> {
    if psi.times != phi.times || psi.times != eta.times {
        return Err(PathError::GridMismatch);
    }
    let j = model.classes();
    if psi.dim() != j || phi.dim() != j || eta.dim() != j {
        return Err(PathError::GridMismatch);
    }
    let mut report = SpReport::default();
    let f = |x: T| x.to_f64_lossy();

    for (class, &e) in eta.values[0].iter().enumerate() {
        if e.abs() > tol {
            report.failures.push(SpFailure::InitialPush { class });
        }
    }
    for k in 0..psi.len() {
        let mut expected = psi.values[k].clone();
        for (jj, &e) in eta.values[k].iter().enumerate() {
            expected[jj] += e;
            if let Some(next) = model.route[jj] {
                expected[next] -= e;
            }
        }
        let err = expected
            .iter()
            .zip(&phi.values[k])
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max);
        report.max_identity_error = report.max_identity_error.max(f(err));
        if err > tol {
            report.failures.push(SpFailure::Identity { index: k, error: f(err) });
        }
        for (class, &p) in phi.values[k].iter().enumerate() {
            if p < -tol {
                report.failures.push(SpFailure::Nonnegativity { index: k, class, value: f(p) });
            }
        }
        if k > 0 {
            for class in 0..j {
                let inc = eta.values[k][class] - eta.values[k - 1][class];
                if inc < -tol {
                    report.failures.push(SpFailure::Monotonicity {
                        index: k,
                        class,
                        decrement: f(-inc),
                    });
                } else if inc > tol && phi.values[k][class] > tol {
                    report.failures.push(SpFailure::Complementarity {
                        index: k,
                        class,
                        phi: f(phi.values[k][class]),
                    });
                }
            }
        }
    }
    Ok(report)
}

/// Random piecewise-linear path starting in the orthant.
///
/// Knots are spaced `knot_dt` apart with i.i.d. uniform increments in
/// `[-scale, scale]` per coordinate plus `drift * knot_dt`; each knot
/// interval is sampled with `refine` grid steps. Roughly a third of the
/// starting coordinates are placed exactly on the boundary.
pub fn random_path<T: Real, R: Rng + ?Sized>(
    rng: &mut R,
    dim: usize,
    knots: usize,
    knot_dt: f64,
    refine: usize,
    scale: f64,
    drift: &[f64],
) -> Path<T> {
    let refine = refine.max(1);
    let mut knot_values: Vec<Vec<f64>> = Vec::with_capacity(knots + 1);
    let start: Vec<f64> = (0..dim)
        .map(|_| if rng.gen_bool(1.0 / 3.0) { 0.0 } else { rng.gen_range(0.0..1.0) })
        .collect();
    knot_values.push(start);
    for k in 0..knots {
        let next = (0..dim)
            .map(|i| {
                let d = drift.get(i).copied().unwrap_or(0.0);
                knot_values[k][i] + rng.gen_range(-scale..=scale) + d * knot_dt
            })
            .collect();
        knot_values.push(next);
    }
    refine_knots(&knot_values, knot_dt, refine)
}

/// Samples the piecewise-linear interpolant of `knots` with `refine` steps
/// per knot interval.
pub fn refine_knots<T: Real>(knots: &[Vec<f64>], knot_dt: f64, refine: usize) -> Path<T> {
    let mut times = Vec::new();
    let mut values = Vec::new();
    for k in 0..knots.len().saturating_sub(1) {
        for s in 0..refine {
            let w = s as f64 / refine as f64;
            times.push(T::of((k as f64 + w) * knot_dt));
            values.push(
                knots[k]
                    .iter()
                    .zip(&knots[k + 1])
                    .map(|(&a, &b)| T::of(a + w * (b - a)))
                    .collect(),
            );
        }
    }
    let last = knots.len() - 1;
    times.push(T::of(last as f64 * knot_dt));
    values.push(knots[last].iter().map(|&x| T::of(x)).collect());
    Path { times, values }
}
