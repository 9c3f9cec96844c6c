//! Convergence of `V^n` to a reference value as the scale grows.
//!
//! Errors are measured only on points that lie in every lattice of the
//! study and are interior to `G`, so all rows compare the same set.

use crate::dpe::{extract_v, solve_w, DpeOptions};
use crate::error::DpeError;
use crate::mc::lattice_state_of;
use crate::network::{BoundaryClass, Domain, Lattice, NetworkModel};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow<T> {
    pub n: u32,
    /// Number of shared interior points the error is taken over.
    pub points: usize,
    /// `max |V^n(x) - V(x)|` over those points.
    pub error: T,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy<T> {
    pub rows: Vec<ConvergenceRow<T>>,
    pub shared: Vec<Vec<T>>,
}

impl<T: Real> ConvergenceStudy<T> {
    /// Errors strictly decrease along the rows.
    pub fn strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].error < w[0].error)
    }
}

/// Points of `G` lying in every `G^n`, `n in ns`, and classified interior.
pub fn shared_interior_points<T: Real>(domain: &Domain<T>, ns: &[u32]) -> Vec<Vec<T>> {
    let Some(&coarsest) = ns.iter().min() else {
        return Vec::new();
    };
    let lattices: Vec<Lattice> = ns.iter().map(|&n| Lattice::new(domain, n)).collect();
    let base = Lattice::new(domain, coarsest);
    (0..base.len())
        .map(|i| base.coords::<T>(i))
        .filter(|x| matches!(domain.classify_point(x), Ok(BoundaryClass::Interior)))
        .filter(|x| {
            lattices.iter().all(|l| lattice_state_of(x, l.n).is_some_and(|k| l.index_of(&k).is_some()))
        })
        .collect()
}

/// Solves the DPE at each `n` and compares against `reference`.
///
/// An unconverged solve is reported in its row rather than raised, so the
/// caller can keep partial results.
pub fn convergence_study<T: Real>(
    model: &NetworkModel<T>,
    domain: &Domain<T>,
    ns: &[u32],
    opts: &DpeOptions<T>,
    reference: impl Fn(&[T]) -> T,
) -> Result<ConvergenceStudy<T>, DpeError> {
    let shared = shared_interior_points(domain, ns);
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let sol = solve_w(model, domain, n, opts)?;
        let v = extract_v(&sol.w, n)?;
        let error = shared
            .iter()
            .map(|x| {
                let k = lattice_state_of(x, n).expect("shared point");
                let idx = sol.lattice.index_of(&k).expect("shared point");
                (v.values[idx] - reference(x)).abs()
            })
            .fold(T::zero(), T::max);
        rows.push(ConvergenceRow { n, points: shared.len(), error, iterations: sol.iterations, converged: sol.converged });
    }
    Ok(ConvergenceStudy { rows, shared })
}
