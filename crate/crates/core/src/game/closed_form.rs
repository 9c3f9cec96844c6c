//! Explicit value of the competing-queues game.
//!
//! With one server and every class leaving after service, the game value on
//! the rectangle `[0, z)` is `V(x) = min_i alpha_i (z_i - x_i)`, where
//! `alpha_i > 0` solves
//!
//! ```text
//! F_i(alpha) = (lambda_i e^alpha + mu_i e^-alpha) / (lambda_i + mu_i) = 1 + c / (lambda_i + mu_i)
//! ```
//!
//! In `t = e^alpha` this is `lambda t^2 - (lambda + mu + c) t + mu = 0`,
//! whose root above one gives `alpha`.

use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use crate::error::GameError;
use crate::network::{Domain, DomainShape, NetworkModel};
use crate::rng::stream;
use crate::scalar::Real;

use super::hamiltonian;

/// Closed-form competing-queues value `min_i alpha_i (z_i - x_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedFormValue<T> {
    pub alpha: Vec<T>,
    pub z: Vec<T>,
    pub c: T,
    lambda: Vec<T>,
    mu: Vec<T>,
}

/// `F(alpha) = (lambda e^alpha + mu e^-alpha) / (lambda + mu)`.
pub fn f_convex<T: Real>(lambda: T, mu: T, alpha: T) -> T {
    (lambda * alpha.exp() + mu * (-alpha).exp()) / (lambda + mu)
}

/// Root `t > 1` of `lambda t^2 - (lambda + mu + c) t + mu`, returned as `ln t`.
pub fn alpha_by_quadratic<T: Real>(lambda: T, mu: T, c: T) -> T {
    let s = lambda + mu + c;
    let disc = s * s - T::of(4.0) * lambda * mu;
    // Larger root; no cancellation since both terms are positive.
    let t = (s + disc.sqrt()) / (T::of(2.0) * lambda);
    t.ln()
}

/// Bisection for `F(alpha) = 1 + c / (lambda + mu)` on `[1e-8, 50]`.
pub fn alpha_by_bisection<T: Real>(lambda: T, mu: T, c: T) -> T {
    let target = T::one() + c / (lambda + mu);
    let (mut lo, mut hi) = (T::of(1e-8), T::of(50.0));
    for _ in 0..200 {
        let mid = (lo + hi) / T::of(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if f_convex(lambda, mu, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo + hi) / T::of(2.0)
}

/// Builds the closed-form value; the model must be a competing-queues
/// network with arrivals at every class and the domain a rectangle.
pub fn competing_queues_value<T: Real>(
    model: &NetworkModel<T>,
    domain: &Domain<T>,
) -> Result<ClosedFormValue<T>, GameError> {
    if !model.is_competing_queues() {
        return Err(GameError::NotCompetingQueues);
    }
    if model.lambda.iter().any(|&l| !(l > T::zero())) {
        return Err(GameError::MissingArrivals);
    }
    let z = match &domain.shape {
        DomainShape::Rect { z } => z.clone(),
        DomainShape::WeightedCap { .. } => return Err(GameError::NotRectangle),
    };
    let alpha = model
        .lambda
        .iter()
        .zip(&model.mu)
        .map(|(&l, &m)| alpha_by_quadratic(l, m, model.c))
        .collect();
    Ok(ClosedFormValue { alpha, z, c: model.c, lambda: model.lambda.clone(), mu: model.mu.clone() })
}

impl<T: Real> ClosedFormValue<T> {
    pub fn classes(&self) -> usize {
        self.alpha.len()
    }

    /// `(argmin class, V(x))`, lowest class on ties.
    fn active(&self, x: &[T]) -> (usize, T) {
        self.alpha
            .iter()
            .zip(&self.z)
            .zip(x)
            .map(|((&a, &z), &xi)| a * (z - xi))
            .enumerate()
            .fold((0, T::infinity()), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc })
    }

    pub fn value(&self, x: &[T]) -> T {
        self.active(x).1
    }

    /// `DV(x) = -alpha_i e_i` for the minimizing class `i`.
    pub fn gradient(&self, x: &[T]) -> Vec<T> {
        let (i, _) = self.active(x);
        let mut q = vec![T::zero(); self.classes()];
        q[i] = -self.alpha[i];
        q
    }

    /// `F_i(alpha_i) - (1 + c_i)` per class.
    pub fn residuals(&self) -> Vec<T> {
        (0..self.classes())
            .map(|i| {
                let (l, m) = (self.lambda[i], self.mu[i]);
                f_convex(l, m, self.alpha[i]) - (T::one() + self.c / (l + m))
            })
            .collect()
    }

    /// `H(DV(x))` at a point where the gradient exists.
    pub fn pde_residual(&self, model: &NetworkModel<T>, x: &[T]) -> T {
        hamiltonian(model, &self.gradient(x))
    }

    /// `H(-sum_i nu_i alpha_i e_i)`.
    pub fn h_on_simplex(&self, model: &NetworkModel<T>, nu: &[T]) -> T {
        let q: Vec<T> = nu.iter().zip(&self.alpha).map(|(&n, &a)| -n * a).collect();
        hamiltonian(model, &q)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult<T> {
    pub min_h: T,
    pub argmin: Vec<T>,
    pub samples: usize,
}

/// Simplex points for the scan: the origin and each vertex `e_i` first, then
/// uniform samples of `{nu >= 0, sum nu <= 1}` from per-index streams.
pub fn scan_points<T: Real>(
    closed_form: &ClosedFormValue<T>,
    model: &NetworkModel<T>,
    samples: usize,
    seed: u64,
) -> Result<Vec<(Vec<T>, T)>, GameError> {
    if samples == 0 {
        return Err(GameError::NoSamples);
    }
    let j = closed_form.classes();
    let fixed = j + 1;
    let total = samples.max(fixed);
    Ok((0..total)
        .into_par_iter()
        .map(|k| {
            let nu: Vec<T> = if k == 0 {
                vec![T::zero(); j]
            } else if k < fixed {
                (0..j).map(|i| if i + 1 == k { T::one() } else { T::zero() }).collect()
            } else {
                let mut rng = stream(seed, k as u64);
                let e: Vec<f64> = (0..=j).map(|_| rng.sample::<f64, _>(Exp1)).collect();
                let sum: f64 = e.iter().sum();
                e[..j].iter().map(|&x| T::of(x / sum)).collect()
            };
            let h = closed_form.h_on_simplex(model, &nu);
            (nu, h)
        })
        .collect())
}

/// Minimum of `H(-sum nu_i alpha_i e_i)` over the simplex scan.
pub fn subsolution_scan<T: Real>(
    closed_form: &ClosedFormValue<T>,
    model: &NetworkModel<T>,
    samples: usize,
    seed: u64,
) -> Result<ScanResult<T>, GameError> {
    let points = scan_points(closed_form, model, samples, seed)?;
    let n = points.len();
    let (argmin, min_h) = points
        .into_iter()
        .fold((Vec::new(), T::infinity()), |acc, (nu, h)| if h < acc.1 { (nu, h) } else { acc });
    Ok(ScanResult { min_h, argmin, samples: n })
}
