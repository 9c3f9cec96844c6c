//! Limiting differential game: running cost, dynamics and Hamiltonian.
//!
//! The minimizing player perturbs rates `m = (lam_bar, mu_bar)` and pays the
//! relative-entropy cost `rho(u, m)`; the maximizing player picks service
//! effort `u`. For a fixed gradient `q`, the inner minimization over `m` is
//! explicit (`lam_bar_j = lambda_j e^{-q_j}`,
//! `mu_bar_i = mu_i e^{q_i - q_{r(i)}}`), which leaves
//!
//! ```text
//! H(q) = c + sum_j lambda_j (1 - e^{-q_j})
//!          + sum_k max(0, max_{i in C(k)} mu_i (1 - e^{q_i - q_{r(i)}}))
//! ```

mod closed_form;
mod isaacs;
mod trajectory;

pub use closed_form::{
    alpha_by_bisection, alpha_by_quadratic, competing_queues_value, scan_points, subsolution_scan,
    ClosedFormValue, ScanResult,
};
pub use isaacs::{isaacs_gap, rate_bound_heuristic, IsaacsGap, RateGrid};
pub use trajectory::{trajectory_cost, GameCost};

use crate::network::{ControlVector, NetworkModel, RatePerturbation};
use crate::scalar::{entropy_l, Real};

/// `rho(u, m) = sum_i lambda_i l(lam_bar_i / lambda_i) + sum_i u_i mu_i l(mu_bar_i / mu_i)`.
///
/// Returns `+inf` when some class without arrivals is given a positive
/// perturbed arrival rate.
pub fn running_cost<T: Real>(
    model: &NetworkModel<T>,
    u: &ControlVector<T>,
    m: &RatePerturbation<T>,
) -> T {
    let mut total = T::zero();
    for (i, (&lam, &lam_bar)) in model.lambda.iter().zip(&m.lam_bar).enumerate() {
        if lam == T::zero() {
            if lam_bar > T::zero() {
                return T::infinity();
            }
        } else {
            total += lam * entropy_l(lam_bar / lam);
        }
        let ui = u.0[i];
        if ui > T::zero() {
            total += ui * model.mu[i] * entropy_l(m.mu_bar[i] / model.mu[i]);
        }
    }
    total
}

/// `v(u, m) = sum_j lam_bar_j e_j + sum_i u_i mu_bar_i (e_{r(i)} - e_i)`.
pub fn drift<T: Real>(model: &NetworkModel<T>, u: &ControlVector<T>, m: &RatePerturbation<T>) -> Vec<T> {
    let mut v = m.lam_bar.clone();
    for i in 0..model.classes() {
        let flow = u.0[i] * m.mu_bar[i];
        v[i] -= flow;
        if let Some(next) = model.route[i] {
            v[next] += flow;
        }
    }
    v
}

/// Rates minimizing `<q, v(u, m)> + rho(u, m)` for every `u` at once,
/// optionally clamped to `[0, cap]`.
pub fn inner_min_rates<T: Real>(model: &NetworkModel<T>, q: &[T], cap: Option<T>) -> RatePerturbation<T> {
    let clamp = |x: T| match cap {
        Some(b) => x.max(T::zero()).min(b),
        None => x,
    };
    let lam_bar = model
        .lambda
        .iter()
        .zip(q)
        .map(|(&lam, &qj)| clamp(lam * (-qj).exp()))
        .collect();
    let mu_bar = (0..model.classes())
        .map(|i| clamp(model.mu[i] * (-model.service_dot(q, i)).exp()))
        .collect();
    RatePerturbation { lam_bar, mu_bar, cap }
}

/// Per-server service gains `mu_i (1 - e^{q_i - q_{r(i)}})`.
fn service_gain<T: Real>(model: &NetworkModel<T>, q: &[T], i: usize) -> T {
    model.mu[i] * (T::one() - (-model.service_dot(q, i)).exp())
}

/// Game Hamiltonian `H(q)`.
pub fn hamiltonian<T: Real>(model: &NetworkModel<T>, q: &[T]) -> T {
    let arrivals: T = model
        .lambda
        .iter()
        .zip(q)
        .map(|(&lam, &qj)| lam * (T::one() - (-qj).exp()))
        .sum();
    let services: T = model
        .serves
        .iter()
        .map(|classes| {
            classes
                .iter()
                .map(|&i| service_gain(model, q, i))
                .fold(T::zero(), T::max)
        })
        .sum();
    model.c + arrivals + services
}

/// Maximizing vertex of `u -> H(q, u)`: each server serves its class with the
/// largest positive gain, lowest index on ties, and idles if no gain is positive.
pub fn gradient_feedback<T: Real>(model: &NetworkModel<T>, q: &[T]) -> ControlVector<T> {
    let mut u = ControlVector::idle(model.classes());
    for classes in &model.serves {
        let mut sorted = classes.clone();
        sorted.sort_unstable();
        let mut best: Option<(usize, T)> = None;
        for i in sorted {
            let g = service_gain(model, q, i);
            if g > T::zero() && best.is_none_or(|(_, b)| g > b) {
                best = Some((i, g));
            }
        }
        if let Some((i, _)) = best {
            u.0[i] = T::one();
        }
    }
    u
}

/// `c + <q, v(u, m)> + rho(u, m)` for explicit players' choices.
pub fn hamiltonian_integrand<T: Real>(
    model: &NetworkModel<T>,
    q: &[T],
    u: &ControlVector<T>,
    m: &RatePerturbation<T>,
) -> T {
    let v = drift(model, u, m);
    let dot: T = q.iter().zip(&v).map(|(&a, &b)| a * b).sum();
    model.c + dot + running_cost(model, u, m)
}
