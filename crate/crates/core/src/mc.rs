//! Monte Carlo estimation of `E_x e^{-n c sigma^n}` under feedback policies.
//!
//! The controlled jump process is simulated event by event: in state `x`
//! arrivals of class `j` fire at rate `n lambda_j` and services at rate
//! `n mu_j u_j(x)` when class `j` is nonempty. Exit happens at the first
//! jump that leaves `G`. Each trial draws from its own `(seed, trial)`
//! stream, so estimates are independent of the thread count and different
//! policies see common random numbers.

use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use crate::dpe::PolicyField;
use crate::error::SimError;
use crate::game::{gradient_feedback, ClosedFormValue};
use crate::network::{control_vertices, lattice_coords, ControlVector, Domain, Lattice, NetworkModel};
use crate::rng::stream;
use crate::scalar::{pairwise_sum, Real};

/// State feedback on the lattice `n^{-1} Z_+^J`.
pub trait FeedbackPolicy<T>: Sync {
    fn name(&self) -> &str;
    fn control(&self, state: &[i64], n: u32) -> ControlVector<T>;
}

/// Policy read from a solved lattice field; idle off the lattice.
#[derive(Debug, Clone)]
pub struct TabulatedPolicy<T> {
    name: String,
    lattice: Lattice,
    field: PolicyField,
    vertices: Vec<ControlVector<T>>,
}

impl<T: Real> TabulatedPolicy<T> {
    pub fn new(name: impl Into<String>, model: &NetworkModel<T>, lattice: Lattice, field: PolicyField) -> Self {
        Self { name: name.into(), lattice, field, vertices: control_vertices(model) }
    }
}

impl<T: Real> FeedbackPolicy<T> for TabulatedPolicy<T> {
    fn name(&self) -> &str {
        &self.name
    }

    fn control(&self, state: &[i64], _n: u32) -> ControlVector<T> {
        match self.lattice.index_of(state) {
            Some(i) => self.vertices[self.field.0[i]].clone(),
            None => ControlVector::idle(state.len()),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NeverServe;

impl<T: Real> FeedbackPolicy<T> for NeverServe {
    fn name(&self) -> &str {
        "never-serve"
    }

    fn control(&self, state: &[i64], _n: u32) -> ControlVector<T> {
        ControlVector::idle(state.len())
    }
}

/// Static priority: each server works on its highest-ranked nonempty class.
#[derive(Debug, Clone)]
pub struct PriorityRule {
    name: String,
    /// Per server, classes from highest to lowest priority.
    ranking: Vec<Vec<usize>>,
}

impl PriorityRule {
    pub fn new(name: impl Into<String>, ranking: Vec<Vec<usize>>) -> Self {
        Self { name: name.into(), ranking }
    }

    /// The mu-c rule: rank by `mu_i h_i` (unit holding costs when `None`),
    /// lowest class index first among equals.
    pub fn mu_c<T: Real>(model: &NetworkModel<T>, holding: Option<&[T]>) -> Self {
        let ranking = model
            .serves
            .iter()
            .map(|classes| {
                let mut cls = classes.clone();
                let key = |i: usize| model.mu[i] * holding.map_or(T::one(), |h| h[i]);
                cls.sort_by(|&a, &b| key(b).partial_cmp(&key(a)).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
                cls
            })
            .collect();
        Self::new("mu-c rule", ranking)
    }
}

impl<T: Real> FeedbackPolicy<T> for PriorityRule {
    fn name(&self) -> &str {
        &self.name
    }

    fn control(&self, state: &[i64], _n: u32) -> ControlVector<T> {
        let mut u = ControlVector::idle(state.len());
        for ranked in &self.ranking {
            if let Some(&i) = ranked.iter().find(|&&i| state[i] > 0) {
                u.0[i] = T::one();
            }
        }
        u
    }
}

/// Feedback induced by the gradient of the closed-form game value.
#[derive(Debug, Clone)]
pub struct GameFeedback<'a, T> {
    model: &'a NetworkModel<T>,
    value: &'a ClosedFormValue<T>,
}

impl<'a, T: Real> GameFeedback<'a, T> {
    pub fn new(model: &'a NetworkModel<T>, value: &'a ClosedFormValue<T>) -> Self {
        Self { model, value }
    }
}

impl<T: Real> FeedbackPolicy<T> for GameFeedback<'_, T> {
    fn name(&self) -> &str {
        "game feedback"
    }

    fn control(&self, state: &[i64], n: u32) -> ControlVector<T> {
        let x = lattice_coords::<T>(state, n);
        gradient_feedback(self.model, &self.value.gradient(&x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig<T> {
    pub n: u32,
    pub trials: usize,
    pub seed: u64,
    pub horizon_cap: T,
}

impl<T: Real> SimConfig<T> {
    /// Horizon cap `10 (v_hint + 1) / c`.
    pub fn new(model: &NetworkModel<T>, n: u32, trials: usize, seed: u64, v_hint: T) -> Self {
        let horizon_cap = T::of(10.0) * (v_hint + T::one()) / model.c;
        Self { n, trials, seed, horizon_cap }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Arrival(usize),
    Service(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event<T> {
    pub time: T,
    pub kind: EventKind,
    pub total_rate: T,
}

/// The controlled jump chain, advanced one event at a time.
pub struct JumpChain<'a, T, P: ?Sized> {
    model: &'a NetworkModel<T>,
    domain: &'a Domain<T>,
    policy: &'a P,
    n: u32,
    pub state: Vec<i64>,
    pub time: T,
}

impl<'a, T: Real, P: FeedbackPolicy<T> + ?Sized> JumpChain<'a, T, P> {
    pub fn new(model: &'a NetworkModel<T>, domain: &'a Domain<T>, policy: &'a P, n: u32, x0: Vec<i64>) -> Self {
        Self { model, domain, policy, n, state: x0, time: T::zero() }
    }

    pub fn in_domain(&self) -> bool {
        self.domain.contains_lattice(&self.state, self.n)
    }

    /// Active event rates: arrivals first, then services, per class.
    pub fn rates(&self) -> (Vec<T>, Vec<T>) {
        let scale = T::of_usize(self.n as usize);
        let u = self.policy.control(&self.state, self.n);
        let arr = self.model.lambda.iter().map(|&l| scale * l).collect();
        let svc = (0..self.model.classes())
            .map(|i| {
                if self.state[i] > 0 {
                    scale * self.model.mu[i] * u.0[i]
                } else {
                    T::zero()
                }
            })
            .collect();
        (arr, svc)
    }

    /// Fires the next event, or returns `None` when every rate is zero.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Option<Event<T>> {
        let (arr, svc) = self.rates();
        let total: T = arr.iter().chain(&svc).copied().sum();
        if !(total > T::zero()) {
            return None;
        }
        let wait: f64 = rng.sample(Exp1);
        self.time += T::of(wait) / total;
        let mut pick = T::of(rng.gen::<f64>()) * total;
        let mut kind = None;
        for (i, &r) in arr.iter().chain(&svc).enumerate() {
            if r > T::zero() {
                kind = Some(i);
                if pick < r {
                    break;
                }
                pick -= r;
            }
        }
        let j = self.model.classes();
        let idx = kind.expect("positive total rate");
        let kind = if idx < j {
            self.state[idx] += 1;
            EventKind::Arrival(idx)
        } else {
            let i = idx - j;
            self.state[i] -= 1;
            if let Some(next) = self.model.route[i] {
                self.state[next] += 1;
            }
            EventKind::Service(i)
        };
        Some(Event { time: self.time, kind, total_rate: total })
    }
}

/// Exit time of one trial, or `None` when censored at `horizon_cap`.
pub fn simulate_exit<T: Real, R: Rng + ?Sized>(
    model: &NetworkModel<T>,
    domain: &Domain<T>,
    n: u32,
    policy: &(impl FeedbackPolicy<T> + ?Sized),
    x0: &[i64],
    rng: &mut R,
    horizon_cap: T,
) -> Result<Option<T>, SimError> {
    if !domain.contains_lattice(x0, n) {
        return Err(SimError::StartOffLattice);
    }
    let mut chain = JumpChain::new(model, domain, policy, n, x0.to_vec());
    while chain.step(rng).is_some() {
        if chain.time > horizon_cap {
            return Ok(None);
        }
        if !chain.in_domain() {
            return Ok(Some(chain.time));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate<T> {
    pub trials: usize,
    /// Sample mean of `e^{-n c sigma}`.
    pub mean: T,
    pub stderr: T,
    /// `-(1/n) log mean`.
    pub v_hat: T,
    pub censored: usize,
    /// Upper bound on the upward bias of `mean` caused by censoring:
    /// `censored / trials * e^{-n c cap}`.
    pub bias_bound: T,
    /// Set when the standard error is not defined (a single trial).
    pub degenerate: bool,
}

/// Per-trial risk factors `e^{-n c sigma}`, censored trials contributing
/// `e^{-n c cap}`, in trial order.
fn trial_factors<T: Real>(
    model: &NetworkModel<T>,
    domain: &Domain<T>,
    config: &SimConfig<T>,
    policy: &(impl FeedbackPolicy<T> + ?Sized),
    x0: &[i64],
) -> Result<(Vec<T>, usize), SimError> {
    if config.trials == 0 {
        return Err(SimError::NoTrials);
    }
    if !(config.horizon_cap > T::zero()) {
        return Err(SimError::BadHorizon);
    }
    if !domain.contains_lattice(x0, config.n) {
        return Err(SimError::StartOffLattice);
    }
    let rate = T::of_usize(config.n as usize) * model.c;
    let outcomes: Vec<Option<T>> = (0..config.trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(config.seed, k as u64);
            simulate_exit(model, domain, config.n, policy, x0, &mut rng, config.horizon_cap)
                .expect("start checked above")
        })
        .collect();
    let censored = outcomes.iter().filter(|o| o.is_none()).count();
    let factors = outcomes
        .iter()
        .map(|o| (-rate * o.unwrap_or(config.horizon_cap)).exp())
        .collect();
    Ok((factors, censored))
}

pub fn estimate_risk_value<T: Real>(
    model: &NetworkModel<T>,
    domain: &Domain<T>,
    config: &SimConfig<T>,
    policy: &(impl FeedbackPolicy<T> + ?Sized),
    x0: &[i64],
) -> Result<Estimate<T>, SimError> {
    let (factors, censored) = trial_factors(model, domain, config, policy, x0)?;
    let count = T::of_usize(factors.len());
    let mean = pairwise_sum(&factors) / count;
    let degenerate = factors.len() < 2;
    let stderr = if degenerate {
        T::zero()
    } else {
        let sq: Vec<T> = factors.iter().map(|&f| (f - mean) * (f - mean)).collect();
        let var = pairwise_sum(&sq) / (count - T::one());
        (var / count).sqrt()
    };
    let scale = T::of_usize(config.n as usize);
    let cap_factor = (-scale * model.c * config.horizon_cap).exp();
    Ok(Estimate {
        trials: factors.len(),
        mean,
        stderr,
        v_hat: -mean.ln() / scale,
        censored,
        bias_bound: T::of_usize(censored) / count * cap_factor,
        degenerate,
    })
}

/// Estimates for several policies from the same trial streams.
pub fn compare_policies<T: Real>(
    model: &NetworkModel<T>,
    domain: &Domain<T>,
    config: &SimConfig<T>,
    policies: &[&dyn FeedbackPolicy<T>],
    x0: &[i64],
) -> Result<Vec<(String, Estimate<T>)>, SimError> {
    if policies.is_empty() {
        return Err(SimError::NoPolicies);
    }
    policies
        .iter()
        .map(|p| Ok((p.name().to_string(), estimate_risk_value(model, domain, config, *p, x0)?)))
        .collect()
}

/// Integer lattice coordinates of `x` at scale `n`, if `x` is (within
/// roundoff) a lattice point.
pub fn lattice_state_of<T: Real>(x: &[T], n: u32) -> Option<Vec<i64>> {
    let scale = T::of_usize(n as usize);
    x.iter()
        .map(|&xi| {
            let k = (xi * scale).round();
            let ok = (k / scale - xi).abs() <= T::of(1e-9) * (T::one() + xi.abs()) && k >= T::zero();
            if ok {
                k.to_i64()
            } else {
                None
            }
        })
        .collect()
}
