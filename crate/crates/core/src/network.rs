//! Re-entrant line model, control polytope, escape domain and its lattice.
//!
//! Classes are indexed from `0` internally. A route of `None` means the
//! customer leaves the network after service, so the service direction of
//! that class is `-e_i`.

use std::collections::HashMap;
use std::fmt;

use crate::error::{DomainError, Violation};
use crate::scalar::Real;

/// Tolerance used when classifying continuum points against the boundary.
pub const EPS_GEOM: f64 = 1e-12;

/// Multiclass network with deterministic (re-entrant line) routing.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel<T> {
    /// `serves[k]` lists the classes handled by server `k`.
    pub serves: Vec<Vec<usize>>,
    /// Next class after service, `None` for exit.
    pub route: Vec<Option<usize>>,
    pub lambda: Vec<T>,
    pub mu: Vec<T>,
    /// Risk parameter.
    pub c: T,
}

impl<T: Real> NetworkModel<T> {
    pub fn new(
        serves: Vec<Vec<usize>>,
        route: Vec<Option<usize>>,
        lambda: Vec<T>,
        mu: Vec<T>,
        c: T,
    ) -> Self {
        Self { serves, route, lambda, mu, c }
    }

    /// Validating constructor.
    pub fn checked(
        serves: Vec<Vec<usize>>,
        route: Vec<Option<usize>>,
        lambda: Vec<T>,
        mu: Vec<T>,
        c: T,
    ) -> Result<Self, Vec<Violation>> {
        let model = Self::new(serves, route, lambda, mu, c);
        let report = validate_model(&model);
        if report.is_empty() {
            Ok(model)
        } else {
            Err(report)
        }
    }

    /// Two stations in series: class 0 at server 0 feeds class 1 at server 1.
    pub fn tandem(lambda: [T; 2], mu: [T; 2], c: T) -> Self {
        Self::new(
            vec![vec![0], vec![1]],
            vec![Some(1), None],
            lambda.to_vec(),
            mu.to_vec(),
            c,
        )
    }

    /// One server, every class leaves after a single service.
    pub fn competing_queues(lambda: Vec<T>, mu: Vec<T>, c: T) -> Self {
        let j = lambda.len();
        Self::new(vec![(0..j).collect()], vec![None; j], lambda, mu, c)
    }

    /// Number of classes `J`.
    pub fn classes(&self) -> usize {
        self.lambda.len()
    }

    /// Number of servers `K`.
    pub fn servers(&self) -> usize {
        self.serves.len()
    }

    /// Membership mask of `J_+ = { i : lambda_i > 0 }`.
    pub fn arrival_mask(&self) -> Vec<bool> {
        self.lambda.iter().map(|&l| l > T::zero()).collect()
    }

    /// True for a single server whose classes all exit after service.
    pub fn is_competing_queues(&self) -> bool {
        self.servers() == 1 && self.route.iter().all(Option::is_none)
    }

    /// `<q, e_{r(i)} - e_i>`, the directional change of a service completion.
    #[inline]
    pub fn service_dot(&self, q: &[T], i: usize) -> T {
        match self.route[i] {
            Some(next) => q[next] - q[i],
            None => -q[i],
        }
    }

    /// Total nominal event rate `sum lambda + sum mu`.
    pub fn total_rate(&self) -> T {
        self.lambda.iter().copied().sum::<T>() + self.mu.iter().copied().sum::<T>()
    }
}

/// Returns every violated model invariant; empty iff the model is valid.
pub fn validate_model<T: Real>(model: &NetworkModel<T>) -> Vec<Violation> {
    let mut out = Vec::new();
    let j = model.classes();
    if j == 0 {
        out.push(Violation::NoClasses);
        return out;
    }
    for (field, len) in [("mu", model.mu.len()), ("route", model.route.len())] {
        if len != j {
            out.push(Violation::LengthMismatch { field, expected: j, found: len });
        }
    }
    if !out.is_empty() {
        return out;
    }

    let mut owner: Vec<Option<usize>> = vec![None; j];
    for (k, classes) in model.serves.iter().enumerate() {
        for &i in classes {
            if i >= j {
                out.push(Violation::UnknownClass { server: k, class: i });
            } else if owner[i].is_some() {
                out.push(Violation::ServedTwice { class: i });
            } else {
                owner[i] = Some(k);
            }
        }
    }
    for (i, o) in owner.iter().enumerate() {
        if o.is_none() {
            out.push(Violation::Unserved { class: i });
        }
    }

    let mut route_ok = true;
    for (i, r) in model.route.iter().enumerate() {
        if let Some(next) = *r {
            if next >= j {
                out.push(Violation::RouteOutOfRange { class: i, target: next });
                route_ok = false;
            }
        }
    }
    if route_ok {
        for start in 0..j {
            let mut cur = Some(start);
            let mut steps = 0;
            while let Some(i) = cur {
                if steps > j {
                    out.push(Violation::CyclicRouting { class: start });
                    break;
                }
                cur = model.route[i];
                steps += 1;
            }
            if matches!(out.last(), Some(Violation::CyclicRouting { .. })) {
                // One report per cycle is enough.
                break;
            }
        }
    }

    for i in 0..j {
        let l = model.lambda[i];
        if !l.is_finite() || l < T::zero() {
            out.push(Violation::NegativeArrivalRate { class: i });
        }
        let m = model.mu[i];
        if !m.is_finite() || m <= T::zero() {
            out.push(Violation::NonPositiveServiceRate { class: i });
        }
    }
    if !model.c.is_finite() || model.c <= T::zero() {
        out.push(Violation::NonPositiveRisk);
    }
    out
}

/// Service effort fractions, one per class.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlVector<T>(pub Vec<T>);

impl<T: Real> ControlVector<T> {
    pub fn idle(classes: usize) -> Self {
        Self(vec![T::zero(); classes])
    }

    /// Checks `u >= 0` and the per-server capacity constraint.
    pub fn is_admissible(&self, model: &NetworkModel<T>, tol: T) -> bool {
        self.0.len() == model.classes()
            && self.0.iter().all(|&u| u >= -tol)
            && model
                .serves
                .iter()
                .all(|cls| cls.iter().map(|&i| self.0[i]).sum::<T>() <= T::one() + tol)
    }
}

/// Perturbed arrival and service rates `m = (lam_bar, mu_bar)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RatePerturbation<T> {
    pub lam_bar: Vec<T>,
    pub mu_bar: Vec<T>,
    pub cap: Option<T>,
}

impl<T: Real> RatePerturbation<T> {
    pub fn nominal(model: &NetworkModel<T>) -> Self {
        Self { lam_bar: model.lambda.clone(), mu_bar: model.mu.clone(), cap: None }
    }

    pub fn is_valid(&self) -> bool {
        let ok = |x: &T| *x >= T::zero() && self.cap.is_none_or(|b| *x <= b);
        self.lam_bar.iter().all(ok) && self.mu_bar.iter().all(ok)
    }
}

/// Extreme points of the control polytope `U`.
///
/// Each server is either idle or gives full effort to exactly one of its
/// classes. Vertices are listed in row-major order over servers (server 0
/// varies slowest) and, per server, idle first and then classes in the
/// order given by `serves`. Index 0 is always the all-idle vertex.
pub fn control_vertices<T: Real>(model: &NetworkModel<T>) -> Vec<ControlVector<T>> {
    let j = model.classes();
    let mut out = vec![ControlVector::idle(j)];
    for classes in &model.serves {
        let mut next = Vec::with_capacity(out.len() * (classes.len() + 1));
        for base in &out {
            next.push(base.clone());
            for &i in classes {
                let mut v = base.clone();
                v.0[i] = T::one();
                next.push(v);
            }
        }
        out = next;
    }
    out
}

/// Position of a point relative to the escape domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryClass {
    Interior,
    /// On a face of the orthant, pushed back in by the reflection directions.
    Reflecting,
    /// On a face `x_j = z_j` with `lambda_j = 0`: exit there can be prevented by idling.
    Blockable,
    /// On the part of the boundary not contained in `G`; reaching it ends the game.
    Open,
    Outside,
}

impl fmt::Display for BoundaryClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Interior => "interior",
            Self::Reflecting => "reflecting",
            Self::Blockable => "blockable",
            Self::Open => "open",
            Self::Outside => "outside",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DomainShape<T> {
    /// `0 <= x_i < z_i` on classes with arrivals, `0 <= x_j <= z_j` otherwise.
    Rect { z: Vec<T> },
    /// `sum_i w_i x_i < h`; requires arrivals at every class.
    WeightedCap { w: Vec<T>, h: T },
}

/// Escape domain `G` together with the arrival mask of its owning model.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain<T> {
    pub shape: DomainShape<T>,
    arrivals: Vec<bool>,
}

impl<T: Real> Domain<T> {
    pub fn new(model: &NetworkModel<T>, shape: DomainShape<T>) -> Result<Self, DomainError> {
        let j = model.classes();
        let arrivals = model.arrival_mask();
        match &shape {
            DomainShape::Rect { z } => {
                if z.len() != j {
                    return Err(DomainError::Dimension { expected: j, found: z.len() });
                }
                if let Some(i) = z.iter().position(|&v| !(v > T::zero() && v.is_finite())) {
                    return Err(DomainError::NonPositive { index: i });
                }
            }
            DomainShape::WeightedCap { w, h } => {
                if w.len() != j {
                    return Err(DomainError::Dimension { expected: j, found: w.len() });
                }
                if let Some(i) = w.iter().position(|&v| !(v > T::zero() && v.is_finite())) {
                    return Err(DomainError::NonPositive { index: i });
                }
                if !(*h > T::zero() && h.is_finite()) {
                    return Err(DomainError::NonPositiveCap);
                }
                if let Some(i) = arrivals.iter().position(|a| !a) {
                    return Err(DomainError::CapNeedsArrivals { class: i });
                }
            }
        }
        Ok(Self { shape, arrivals })
    }

    pub fn rect(model: &NetworkModel<T>, z: Vec<T>) -> Result<Self, DomainError> {
        Self::new(model, DomainShape::Rect { z })
    }

    pub fn weighted_cap(model: &NetworkModel<T>, w: Vec<T>, h: T) -> Result<Self, DomainError> {
        Self::new(model, DomainShape::WeightedCap { w, h })
    }

    pub fn dim(&self) -> usize {
        self.arrivals.len()
    }

    pub fn arrivals(&self) -> &[bool] {
        &self.arrivals
    }

    /// Boundary classification with the default continuum tolerance.
    pub fn classify_point(&self, x: &[T]) -> Result<BoundaryClass, DomainError> {
        self.classify_with_tol(x, T::of(EPS_GEOM))
    }

    /// Boundary classification; `tol = 0` gives exact comparisons.
    ///
    /// Precedence: exit faces first (open or outside), then blockable faces,
    /// then orthant faces.
    pub fn classify_with_tol(&self, x: &[T], tol: T) -> Result<BoundaryClass, DomainError> {
        if x.len() != self.dim() {
            return Err(DomainError::Dimension { expected: self.dim(), found: x.len() });
        }
        if let Some(i) = x.iter().position(|&v| v < -tol || v.is_nan()) {
            return Err(DomainError::NegativeCoordinate { index: i });
        }
        match &self.shape {
            DomainShape::Rect { z } => {
                let beyond_closure = x
                    .iter()
                    .zip(z)
                    .any(|(&xi, &zi)| xi > zi + tol);
                let on_exit_face = x
                    .iter()
                    .zip(z)
                    .zip(&self.arrivals)
                    .any(|((&xi, &zi), &a)| a && xi >= zi - tol);
                if beyond_closure {
                    return Ok(BoundaryClass::Outside);
                }
                if on_exit_face {
                    return Ok(BoundaryClass::Open);
                }
                let on_block_face = x
                    .iter()
                    .zip(z)
                    .zip(&self.arrivals)
                    .any(|((&xi, &zi), &a)| !a && xi >= zi - tol);
                if on_block_face {
                    return Ok(BoundaryClass::Blockable);
                }
            }
            DomainShape::WeightedCap { w, h } => {
                let s: T = x.iter().zip(w).map(|(&xi, &wi)| xi * wi).sum();
                if s > *h + tol {
                    return Ok(BoundaryClass::Outside);
                }
                if s >= *h - tol {
                    return Ok(BoundaryClass::Open);
                }
            }
        }
        if x.iter().any(|&v| v <= tol) {
            Ok(BoundaryClass::Reflecting)
        } else {
            Ok(BoundaryClass::Interior)
        }
    }

    /// Membership in `G` with a continuum tolerance on the exit faces.
    pub fn contains(&self, x: &[T]) -> bool {
        matches!(
            self.classify_point(x),
            Ok(BoundaryClass::Interior | BoundaryClass::Reflecting | BoundaryClass::Blockable)
        )
    }

    /// Exact membership of a point of `n^{-1} Z^J`.
    pub fn contains_lattice(&self, k: &[i64], n: u32) -> bool {
        if k.iter().any(|&ki| ki < 0) {
            return false;
        }
        let x = lattice_coords::<T>(k, n);
        match &self.shape {
            DomainShape::Rect { z } => x.iter().zip(z).zip(&self.arrivals).all(|((&xi, &zi), &a)| {
                if a {
                    xi < zi
                } else {
                    xi <= zi
                }
            }),
            DomainShape::WeightedCap { w, h } => {
                x.iter().zip(w).map(|(&xi, &wi)| xi * wi).sum::<T>() < *h
            }
        }
    }

    /// Upper bound on `k_i` along each axis for lattice enumeration.
    fn axis_bounds(&self, n: u32) -> Vec<i64> {
        let nn = T::of_usize(n as usize);
        match &self.shape {
            DomainShape::Rect { z } => z
                .iter()
                .map(|&zi| (zi * nn).floor().to_i64().unwrap_or(i64::MAX) + 1)
                .collect(),
            DomainShape::WeightedCap { w, h } => w
                .iter()
                .map(|&wi| (*h / wi * nn).floor().to_i64().unwrap_or(i64::MAX) + 1)
                .collect(),
        }
    }
}

/// `k / n` componentwise.
pub fn lattice_coords<T: Real>(k: &[i64], n: u32) -> Vec<T> {
    let nn = T::of_usize(n as usize);
    k.iter().map(|&ki| T::of(ki as f64) / nn).collect()
}

/// The finite lattice `G^n = n^{-1} Z_+^J ∩ G`, stored by integer coordinates.
#[derive(Debug, Clone)]
pub struct Lattice {
    pub n: u32,
    states: Vec<Vec<i64>>,
    index: HashMap<Vec<i64>, usize>,
}

impl Lattice {
    /// Enumerates `G^n` in row-major order (last coordinate varies fastest).
    pub fn new<T: Real>(domain: &Domain<T>, n: u32) -> Self {
        assert!(n >= 1, "lattice scale must be at least 1");
        let bounds = domain.axis_bounds(n);
        let j = bounds.len();
        let mut states = Vec::new();
        if bounds.iter().any(|&b| b < 0) {
            return Self { n, states, index: HashMap::new() };
        }
        let mut k = vec![0_i64; j];
        // Odometer over the bounding box, last axis fastest.
        loop {
            if domain.contains_lattice(&k, n) {
                states.push(k.clone());
            }
            let mut axis = j;
            loop {
                if axis == 0 {
                    let index = states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
                    return Self { n, states, index };
                }
                axis -= 1;
                if k[axis] < bounds[axis] {
                    k[axis] += 1;
                    break;
                }
                k[axis] = 0;
            }
        }
    }

    /// Lattice over an explicit list of integer states.
    pub fn from_states(n: u32, states: Vec<Vec<i64>>) -> Self {
        let index = states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Self { n, states, index }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[Vec<i64>] {
        &self.states
    }

    pub fn state(&self, idx: usize) -> &[i64] {
        &self.states[idx]
    }

    pub fn index_of(&self, k: &[i64]) -> Option<usize> {
        self.index.get(k).copied()
    }

    pub fn coords<T: Real>(&self, idx: usize) -> Vec<T> {
        lattice_coords(&self.states[idx], self.n)
    }
}

/// All points of `G^n`, as real coordinates, in row-major order.
pub fn enumerate_lattice<T: Real>(domain: &Domain<T>, n: u32) -> Vec<Vec<T>> {
    let lat = Lattice::new(domain, n);
    (0..lat.len()).map(|i| lat.coords(i)).collect()
}
