//! Grid oracle for the inf-sup side of the Isaacs condition.
//!
//! The sup-inf side equals the closed-form [`hamiltonian`]. The inf-sup side
//! is computed without the explicit minimizer: perturbed rates range over a
//! uniform grid on `[0, b]`, and the integrand is maximized over the control
//! vertices at every grid point. The integrand is a sum of per-arrival terms
//! and per-server blocks (the vertices are a product over servers), so the
//! grid search runs block by block, brute force over the product grid of
//! each server's classes.

use crate::error::GameError;
use crate::network::NetworkModel;
use crate::scalar::{entropy_l, Real};

use super::hamiltonian;

/// Uniform grid with `points` nodes on `[0, bound]` per perturbed rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateGrid<T> {
    /// `None` selects [`rate_bound_heuristic`].
    pub bound: Option<T>,
    pub points: usize,
}

impl<T: Real> RateGrid<T> {
    pub fn new(points: usize) -> Self {
        Self { bound: None, points }
    }

    /// Same bound, twice the resolution.
    pub fn refined(&self) -> Self {
        Self { bound: self.bound, points: 2 * (self.points - 1) + 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsaacsGap<T> {
    pub inf_sup: T,
    pub sup_inf: T,
    /// `inf_sup - sup_inf`; nonnegative up to roundoff.
    pub gap: T,
    /// Declared a-priori error bound of the grid minimization.
    pub tolerance: T,
    pub bound: T,
}

/// Rate bound large enough to contain every minimizer for this `q`:
/// `1.5 max(lambda, mu) e^{2 |q|_inf}`.
pub fn rate_bound_heuristic<T: Real>(model: &NetworkModel<T>, q: &[T]) -> T {
    let qmax = q.iter().fold(T::zero(), |a, &b| a.max(b.abs()));
    let rmax = model
        .lambda
        .iter()
        .chain(&model.mu)
        .fold(T::zero(), |a, &b| a.max(b));
    T::of(1.5) * rmax * (T::of(2.0) * qmax).exp()
}

/// One perturbed-rate coordinate: `g(x) = slope x + weight l(x / weight)`.
struct Coordinate<T> {
    values: Vec<T>,
    best: T,
    tolerance: T,
}

fn coordinate<T: Real>(grid: &[T], h: T, weight: T, slope: T) -> Coordinate<T> {
    let values: Vec<T> = grid.iter().map(|&x| slope * x + weight * entropy_l(x / weight)).collect();
    let (arg, best) = values
        .iter()
        .enumerate()
        .fold((0, T::infinity()), |acc, (k, &v)| if v < acc.1 { (k, v) } else { acc });
    // g'' = 1/x. The true minimizer lies within one cell of the grid
    // minimizer and the nearest node within half a cell of it.
    let y = grid[arg];
    let floor = y - T::of(1.5) * h;
    let tolerance = if floor > h {
        h * h / (T::of(8.0) * floor)
    } else {
        // Near zero: bound by the integral of |g'| over [0, 3h].
        let span = T::of(3.0) * h;
        span * ((span / weight).ln().abs() + T::one() + slope.abs())
    };
    Coordinate { values, best, tolerance }
}

/// Inf-sup by grid search against the analytic sup-inf.
pub fn isaacs_gap<T: Real>(
    model: &NetworkModel<T>,
    q: &[T],
    rates: &RateGrid<T>,
) -> Result<IsaacsGap<T>, GameError> {
    let bound = rates.bound.unwrap_or_else(|| rate_bound_heuristic(model, q));
    if rates.points < 2 || !(bound > T::zero()) {
        return Err(GameError::EmptyGrid);
    }
    let cells = T::of_usize(rates.points - 1);
    let h = bound / cells;
    let grid: Vec<T> = (0..rates.points).map(|k| bound * T::of_usize(k) / cells).collect();

    let mut inf_sup = model.c;
    let mut tolerance = T::zero();

    // Arrival coordinates are inactive (pinned at zero) when lambda_j = 0.
    for (&lam, &qj) in model.lambda.iter().zip(q) {
        if lam > T::zero() {
            let c = coordinate(&grid, h, lam, qj);
            inf_sup += c.best;
            tolerance += c.tolerance;
        }
    }

    for classes in &model.serves {
        let coords: Vec<Coordinate<T>> = classes
            .iter()
            .map(|&i| coordinate(&grid, h, model.mu[i], model.service_dot(q, i)))
            .collect();
        // inf over the block's product grid of max(idle, serve i).
        let mut best = T::infinity();
        let mut idx = vec![0usize; coords.len()];
        'grid: loop {
            let mut sup_u = T::zero();
            for (c, &k) in coords.iter().zip(&idx) {
                sup_u = sup_u.max(c.values[k]);
            }
            best = best.min(sup_u);
            let mut axis = coords.len();
            loop {
                if axis == 0 {
                    break 'grid;
                }
                axis -= 1;
                idx[axis] += 1;
                if idx[axis] < rates.points {
                    break;
                }
                idx[axis] = 0;
            }
        }
        inf_sup += best;
        tolerance += coords.iter().map(|c| c.tolerance).fold(T::zero(), T::max);
    }

    let sup_inf = hamiltonian(model, q);
    Ok(IsaacsGap { inf_sup, sup_inf, gap: inf_sup - sup_inf, tolerance, bound })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gap_vanishes_at_zero_gradient() {
        let m = NetworkModel::<f64>::competing_queues(vec![1.0, 1.0], vec![2.0, 2.0], 3.0);
        let g = isaacs_gap(&m, &[0.0, 0.0], &RateGrid::new(201)).unwrap();
        assert!((g.sup_inf - 3.0).abs() < 1e-15);
        assert!(g.gap.abs() <= g.tolerance, "{g:?}");
    }

    #[test]
    fn inf_sup_dominates_sup_inf() {
        let m = NetworkModel::tandem([1.0, 0.0], [1.5, 2.0], 2.0);
        for q in [[0.3, -0.4], [-1.5, 1.0], [2.0, 2.0]] {
            let g = isaacs_gap(&m, &q, &RateGrid::new(301)).unwrap();
            assert!(g.gap >= -1e-12, "{g:?}");
            assert!(g.gap <= g.tolerance, "{g:?}");
        }
    }

    #[test]
    fn degenerate_grid_is_rejected() {
        let m = NetworkModel::competing_queues(vec![1.0], vec![1.0], 1.0);
        assert_eq!(isaacs_gap(&m, &[0.0], &RateGrid::new(1)), Err(GameError::EmptyGrid));
        let rates = RateGrid { bound: Some(0.0), points: 10 };
        assert_eq!(isaacs_gap(&m, &[0.0], &rates), Err(GameError::EmptyGrid));
    }

    #[test]
    fn refined_grid_nests() {
        let g = RateGrid::<f64>::new(11).refined();
        assert_eq!(g.points, 21);
    }
}
