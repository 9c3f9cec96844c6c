//! Prelimit control problem on the lattice `G^n`.
//!
//! `W^n(x) = inf_u E_x e^{-n c sigma^n}` is the fixed point of the
//! uniformized operator
//!
//! ```text
//! (TW)(x) = min_u [ sum_j lambda_j W(x + e_j/n)
//!                 + sum_j u_j mu_j 1{x + v_j/n >= 0} W(x + v_j/n)
//!                 + (L - c - sum_j lambda_j - sum_j u_j mu_j 1{..}) W(x) ] / L
//! ```
//!
//! with `L = sum lambda + sum mu + c`, `v_j = e_{r(j)} - e_j` and `W = 1`
//! off `G^n`. The common factor `n` of all rates cancels. `T` is monotone
//! and a contraction with factor `(L - c) / L`; the minimum over the control
//! polytope is attained at a vertex because the bracket is affine in `u`.
//! Then `V^n = -(1/n) log W^n`.

use rayon::prelude::*;

use crate::error::DpeError;
use crate::network::{control_vertices, Domain, Lattice, NetworkModel};
use crate::scalar::Real;

/// Where a jump from a lattice state lands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Inside(usize),
    /// Leaves `G`; read through the boundary convention `W = 1`.
    Outside,
    /// Service of an empty class: the jump is suppressed.
    Blocked,
}

/// Values on the lattice plus the value assigned off the lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeField<T> {
    pub values: Vec<T>,
    pub off_lattice: T,
}

/// Control vertex index per lattice state, into [`control_vertices`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyField(pub Vec<usize>);

/// How the sweep decides that it has converged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopRule {
    /// `max |W_new - W_old| <= tol`.
    Absolute,
    /// `max |W_new - W_old| / W_new <= tol`, i.e. a uniform bound on the
    /// change of `n V^n`.
    Relative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpeOptions<T> {
    pub tol: T,
    pub max_iters: usize,
    pub stop: StopRule,
    /// In-place sweeps instead of double-buffered Jacobi sweeps.
    pub gauss_seidel: bool,
}

impl<T: Real> Default for DpeOptions<T> {
    fn default() -> Self {
        Self { tol: T::of(1e-10), max_iters: 1_000_000, stop: StopRule::Relative, gauss_seidel: false }
    }
}

/// Uniformized lattice operator with precomputed jump targets.
#[derive(Debug, Clone)]
pub struct LatticeOperator<'a, T> {
    model: &'a NetworkModel<T>,
    lattice: Lattice,
    arrivals: Vec<Vec<Target>>,
    services: Vec<Vec<Target>>,
    /// Served classes of each control vertex.
    vertices: Vec<Vec<usize>>,
    uniform_rate: T,
}

impl<'a, T: Real> LatticeOperator<'a, T> {
    pub fn new(model: &'a NetworkModel<T>, domain: &Domain<T>, n: u32) -> Self {
        Self::on_lattice(model, Lattice::new(domain, n))
    }

    /// Operator on an explicit lattice; states missing from it count as
    /// outside `G`.
    pub fn on_lattice(model: &'a NetworkModel<T>, lattice: Lattice) -> Self {
        let j = model.classes();
        let lookup = |k: &[i64]| -> Target {
            match lattice.index_of(k) {
                Some(i) => Target::Inside(i),
                None => Target::Outside,
            }
        };
        let mut arrivals = Vec::with_capacity(lattice.len());
        let mut services = Vec::with_capacity(lattice.len());
        for s in lattice.states() {
            arrivals.push(
                (0..j)
                    .map(|i| {
                        let mut k = s.to_vec();
                        k[i] += 1;
                        lookup(&k)
                    })
                    .collect(),
            );
            services.push(
                (0..j)
                    .map(|i| {
                        if s[i] == 0 {
                            return Target::Blocked;
                        }
                        let mut k = s.to_vec();
                        k[i] -= 1;
                        if let Some(next) = model.route[i] {
                            k[next] += 1;
                        }
                        lookup(&k)
                    })
                    .collect(),
            );
        }
        let vertices = control_vertices(model)
            .into_iter()
            .map(|u| (0..j).filter(|&i| u.0[i] > T::zero()).collect())
            .collect();
        let uniform_rate = model.total_rate() + model.c;
        Self { model, lattice, arrivals, services, vertices, uniform_rate }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn into_lattice(self) -> Lattice {
        self.lattice
    }

    /// Uniformization constant `L`.
    pub fn uniform_rate(&self) -> T {
        self.uniform_rate
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn arrival_target(&self, state: usize, class: usize) -> Target {
        self.arrivals[state][class]
    }

    pub fn service_target(&self, state: usize, class: usize) -> Target {
        self.services[state][class]
    }

    #[inline]
    fn read(w: &[T], t: Target, here: T) -> T {
        match t {
            Target::Inside(i) => w[i],
            Target::Outside => T::one(),
            Target::Blocked => here,
        }
    }

    /// Idle part of the bracket and the per-class service increments
    /// `mu_i 1{..} (W(x + v_i/n) - W(x))`.
    fn pieces(&self, w: &[T], state: usize) -> (T, Vec<T>) {
        let here = w[state];
        let mut idle = (self.uniform_rate - self.model.c) * here;
        for (i, &t) in self.arrivals[state].iter().enumerate() {
            let lam = self.model.lambda[i];
            idle += lam * (Self::read(w, t, here) - here);
        }
        let deltas = self.services[state]
            .iter()
            .enumerate()
            .map(|(i, &t)| match t {
                Target::Blocked => T::zero(),
                _ => self.model.mu[i] * (Self::read(w, t, here) - here),
            })
            .collect();
        (idle, deltas)
    }

    /// Bracket of the operator at a state for an arbitrary control `u in U`.
    pub fn bracket(&self, w: &[T], state: usize, u: &[T]) -> T {
        let (idle, deltas) = self.pieces(w, state);
        idle + deltas.iter().zip(u).map(|(&d, &ui)| d * ui).sum::<T>()
    }

    /// `(TW)(x)` and the minimizing vertex (lowest index on ties).
    pub fn apply_at(&self, w: &[T], state: usize) -> (T, usize) {
        let (idle, deltas) = self.pieces(w, state);
        let mut best = (T::infinity(), 0);
        for (v, served) in self.vertices.iter().enumerate() {
            let b = idle + served.iter().map(|&i| deltas[i]).sum::<T>();
            if b < best.0 {
                best = (b, v);
            }
        }
        (best.0 / self.uniform_rate, best.1)
    }

    /// Jacobi application of `T` to a whole field.
    pub fn apply(&self, w: &[T]) -> Vec<T> {
        (0..w.len()).into_par_iter().map(|s| self.apply_at(w, s).0).collect()
    }
}

/// Value iteration state, starting from `W = 1`.
#[derive(Debug, Clone)]
pub struct ValueIteration<'a, T> {
    op: LatticeOperator<'a, T>,
    w: Vec<T>,
    gauss_seidel: bool,
}

/// Sup-norm changes of one sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepChange<T> {
    pub absolute: T,
    pub relative: T,
}

impl<'a, T: Real> ValueIteration<'a, T> {
    pub fn new(op: LatticeOperator<'a, T>, gauss_seidel: bool) -> Self {
        let w = vec![T::one(); op.lattice().len()];
        Self { op, w, gauss_seidel }
    }

    pub fn values(&self) -> &[T] {
        &self.w
    }

    pub fn operator(&self) -> &LatticeOperator<'a, T> {
        &self.op
    }

    pub fn sweep(&mut self) -> SweepChange<T> {
        let mut change = SweepChange { absolute: T::zero(), relative: T::zero() };
        let mut record = |old: T, new: T| {
            let d = (new - old).abs();
            change.absolute = change.absolute.max(d);
            if new > T::zero() {
                change.relative = change.relative.max(d / new);
            } else if d > T::zero() {
                change.relative = T::infinity();
            }
        };
        if self.gauss_seidel {
            for s in 0..self.w.len() {
                let new = self.op.apply_at(&self.w, s).0;
                record(self.w[s], new);
                self.w[s] = new;
            }
        } else {
            let next = self.op.apply(&self.w);
            for (&old, &new) in self.w.iter().zip(&next) {
                record(old, new);
            }
            self.w = next;
        }
        change
    }
}

#[derive(Debug, Clone)]
pub struct DpeSolution<T> {
    pub lattice: Lattice,
    pub w: LatticeField<T>,
    pub iterations: usize,
    /// Last sweep change, measured by the configured stop rule.
    pub residual: T,
    pub converged: bool,
}

impl<T: Real> DpeSolution<T> {
    pub fn require_converged(self) -> Result<Self, DpeError> {
        if self.converged {
            Ok(self)
        } else {
            Err(DpeError::NotConverged {
                iterations: self.iterations,
                residual: self.residual.to_f64_lossy(),
            })
        }
    }
}

/// Runs value iteration on `G^n` from `W = 1`.
///
/// Reaching `max_iters` is not an error: the partial field is returned
/// with `converged == false`.
pub fn solve_w<T: Real>(
    model: &NetworkModel<T>,
    domain: &Domain<T>,
    n: u32,
    opts: &DpeOptions<T>,
) -> Result<DpeSolution<T>, DpeError> {
    if !(opts.tol > T::zero()) {
        return Err(DpeError::BadTolerance);
    }
    let op = LatticeOperator::new(model, domain, n);
    let mut vi = ValueIteration::new(op, opts.gauss_seidel);
    let mut iterations = 0;
    let mut residual = T::zero();
    let mut converged = vi.values().is_empty();
    while !converged && iterations < opts.max_iters {
        let change = vi.sweep();
        iterations += 1;
        residual = match opts.stop {
            StopRule::Absolute => change.absolute,
            StopRule::Relative => change.relative,
        };
        converged = residual <= opts.tol;
    }
    let ValueIteration { op, w, .. } = vi;
    Ok(DpeSolution {
        lattice: op.into_lattice(),
        w: LatticeField { values: w, off_lattice: T::one() },
        iterations,
        residual,
        converged,
    })
}

/// `V = -(1/n) log W`; zero off the lattice.
pub fn extract_v<T: Real>(w: &LatticeField<T>, n: u32) -> Result<LatticeField<T>, DpeError> {
    let scale = T::of_usize(n as usize);
    let values = w
        .values
        .iter()
        .enumerate()
        .map(|(i, &x)| if x > T::zero() { Ok(-x.ln() / scale) } else { Err(DpeError::ZeroW { index: i }) })
        .collect::<Result<Vec<T>, _>>()?;
    Ok(LatticeField { values, off_lattice: T::zero() })
}

/// Minimizing control vertex of the operator bracket at every state.
pub fn extract_policy<T: Real>(
    model: &NetworkModel<T>,
    domain: &Domain<T>,
    n: u32,
    w: &LatticeField<T>,
) -> Result<PolicyField, DpeError> {
    let op = LatticeOperator::new(model, domain, n);
    check_len(&op, w)?;
    Ok(PolicyField((0..w.values.len()).map(|s| op.apply_at(&w.values, s).1).collect()))
}

/// `|W(x) - (TW)(x)|` at every lattice state.
pub fn dpe_residual<T: Real>(
    model: &NetworkModel<T>,
    domain: &Domain<T>,
    n: u32,
    w: &LatticeField<T>,
) -> Result<LatticeField<T>, DpeError> {
    let op = LatticeOperator::new(model, domain, n);
    check_len(&op, w)?;
    let tw = op.apply(&w.values);
    let values = w.values.iter().zip(&tw).map(|(&a, &b)| (a - b).abs()).collect();
    Ok(LatticeField { values, off_lattice: T::zero() })
}

fn check_len<T: Real>(op: &LatticeOperator<'_, T>, w: &LatticeField<T>) -> Result<(), DpeError> {
    if w.values.len() != op.lattice().len() {
        return Err(DpeError::FieldLength { expected: op.lattice().len(), found: w.values.len() });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> (NetworkModel<f64>, Domain<f64>) {
        let m = NetworkModel::competing_queues(vec![1.0], vec![1.0], 1.0);
        let d = Domain::rect(&m, vec![2.0]).unwrap();
        (m, d)
    }

    /// Direct linear solve of the two-state chain with `L = 3` for a fixed
    /// action at state 1. State 0 cannot serve: `3 W0 = W1 + W0`. Serving at
    /// state 1: `3 W1 = 1 + W0`; idling there: `3 W1 = 1 + W1`.
    fn chain_oracle(serve: bool) -> (f64, f64) {
        // Rows: [coef W0, coef W1 | rhs]
        let a = [[1.0, -1.0 / 2.0, 0.0], if serve { [-1.0, 3.0, 1.0] } else { [0.0, 2.0, 1.0] }];
        // 2x2 Cramer's rule.
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        let w0 = (a[0][2] * a[1][1] - a[0][1] * a[1][2]) / det;
        let w1 = (a[0][0] * a[1][2] - a[0][2] * a[1][0]) / det;
        (w0, w1)
    }

    #[test]
    fn chain_oracle_values() {
        let (s0, s1) = chain_oracle(true);
        let (i0, i1) = chain_oracle(false);
        assert!((s0 - 0.2).abs() < 1e-15 && (s1 - 0.4).abs() < 1e-15);
        assert!((i0 - 0.25).abs() < 1e-15 && (i1 - 0.5).abs() < 1e-15);
        // The optimal action minimizes W.
        assert!(s1 < i1);
    }

    #[test]
    fn chain_solution() {
        let (m, d) = chain();
        let sol = solve_w(&m, &d, 1, &DpeOptions::default()).unwrap();
        assert!(sol.converged);
        assert!((sol.w.values[0] - 0.2).abs() < 1e-10);
        assert!((sol.w.values[1] - 0.4).abs() < 1e-10);
        let v = extract_v(&sol.w, 1).unwrap();
        assert!((v.values[0] - 5.0_f64.ln()).abs() < 1e-9);
        assert!((v.values[0] - 1.609_438).abs() < 1e-6);
        let pol = extract_policy(&m, &d, 1, &sol.w).unwrap();
        assert_eq!(pol.0, vec![0, 1]);
        let r = dpe_residual(&m, &d, 1, &sol.w).unwrap();
        let lam = 3.0;
        assert!(r.values.iter().all(|&x| x <= 1e-10 * lam));
    }

    #[test]
    fn absolute_and_gauss_seidel_agree() {
        let m = NetworkModel::<f64>::tandem([1.0, 0.2], [1.5, 2.0], 1.0);
        let d = Domain::rect(&m, vec![1.0, 1.0]).unwrap();
        let a = solve_w(&m, &d, 4, &DpeOptions::default()).unwrap();
        let opts = DpeOptions { gauss_seidel: true, stop: StopRule::Absolute, tol: 1e-13, ..DpeOptions::default() };
        let b = solve_w(&m, &d, 4, &opts).unwrap();
        assert!(b.converged);
        for (x, y) in a.w.values.iter().zip(&b.w.values) {
            assert!((x - y).abs() < 1e-11);
        }
    }

    #[test]
    fn unconverged_returns_partial_field() {
        let (m, d) = chain();
        let opts = DpeOptions { max_iters: 3, ..DpeOptions::default() };
        let sol = solve_w(&m, &d, 1, &opts).unwrap();
        assert!(!sol.converged);
        assert_eq!(sol.iterations, 3);
        assert_eq!(sol.w.values.len(), 2);
        assert!(matches!(sol.require_converged(), Err(DpeError::NotConverged { iterations: 3, .. })));
        let bad = DpeOptions { tol: 0.0, ..DpeOptions::default() };
        assert_eq!(solve_w(&m, &d, 1, &bad).unwrap_err(), DpeError::BadTolerance);
    }

    #[test]
    fn empty_lattice_needs_no_iterations() {
        let (m, _) = chain();
        let op = LatticeOperator::on_lattice(&m, Lattice::from_states(1, Vec::new()));
        let mut vi = ValueIteration::new(op, false);
        assert!(vi.values().is_empty());
        assert_eq!(vi.sweep().absolute, 0.0);
    }

    #[test]
    fn extract_v_cases() {
        let w = LatticeField { values: vec![1.0, 1.0], off_lattice: 1.0 };
        assert_eq!(extract_v(&w, 3).unwrap().values, vec![0.0, 0.0]);
        let w = LatticeField { values: vec![0.2_f64], off_lattice: 1.0 };
        let v1 = extract_v(&w, 1).unwrap().values[0];
        let v2 = extract_v(&w, 2).unwrap().values[0];
        assert!((v2 - v1 / 2.0).abs() < 1e-15);
        let w = LatticeField { values: vec![0.5, 0.0], off_lattice: 1.0 };
        assert_eq!(extract_v(&w, 1), Err(DpeError::ZeroW { index: 1 }));
    }

    #[test]
    fn residual_detects_non_fixed_points() {
        let (m, d) = chain();
        let ones = LatticeField { values: vec![1.0, 1.0], off_lattice: 1.0 };
        let r = dpe_residual(&m, &d, 1, &ones).unwrap();
        assert!(r.values.iter().all(|&x| x > 0.0));

        let sol = solve_w(&m, &d, 1, &DpeOptions::default()).unwrap();
        let mut w = sol.w.clone();
        w.values[0] += 0.01;
        let r = dpe_residual(&m, &d, 1, &w).unwrap();
        assert!(r.values.iter().any(|&x| x > 0.001));
        let short = LatticeField { values: vec![1.0], off_lattice: 1.0 };
        assert!(matches!(dpe_residual(&m, &d, 1, &short), Err(DpeError::FieldLength { .. })));
    }

    #[test]
    fn iterates_decrease_monotonically() {
        let m = NetworkModel::competing_queues(vec![1.0, 1.0], vec![2.0, 2.0], 5.0);
        let d = Domain::rect(&m, vec![1.0, 1.0]).unwrap();
        let mut vi = ValueIteration::new(LatticeOperator::new(&m, &d, 8), false);
        let mut prev = vi.values().to_vec();
        for _ in 0..200 {
            vi.sweep();
            let cur = vi.values();
            for (k, (&a, &b)) in cur.iter().zip(&prev).enumerate() {
                assert!(a <= b * (1.0 + 1e-14) && a > 0.0, "state {k}: {a} vs {b}");
            }
            prev = cur.to_vec();
        }
    }
}
