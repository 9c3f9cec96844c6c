use crate::error::{DomainError, GameError, PathError};
use crate::network::{BoundaryClass, ControlVector, Domain, NetworkModel, RatePerturbation};
use crate::scalar::Real;
use crate::skorokhod::{uniform_grid, Reflector};

use super::{drift, running_cost};

const EXIT_BISECTIONS: usize = 20;

/// Exit time and accumulated cost `int_0^sigma (c + rho)` of one game path.
#[derive(Debug, Clone, PartialEq)]
pub struct GameCost<T> {
    /// `None` when the path stays in `G` up to the horizon.
    pub sigma: Option<T>,
    pub cost: T,
    pub exited_through: Option<BoundaryClass>,
}

/// Integrates the constrained dynamics under open-loop players until exit.
///
/// Controls and rates are sampled at the left end of each step; the cost
/// uses the left-endpoint rule. The exit instant inside the crossing step
/// is located by bisection on the step's segment.
pub fn trajectory_cost<T: Real>(
    model: &NetworkModel<T>,
    domain: &Domain<T>,
    x0: &[T],
    control: impl Fn(T) -> ControlVector<T>,
    rates: impl Fn(T) -> RatePerturbation<T>,
    dt: T,
    horizon: T,
) -> Result<GameCost<T>, GameError> {
    if !domain.contains(x0) {
        return Err(DomainError::StartOutside.into());
    }
    if !(dt > T::zero()) || !(horizon > T::zero()) {
        return Err(PathError::NonPositiveStep.into());
    }
    let times = uniform_grid(dt, horizon)?;
    let reflector = Reflector::new(model);
    let mut push = vec![T::zero(); model.classes()];
    let mut x = x0.to_vec();
    let mut cost = T::zero();

    for k in 1..times.len() {
        let t = times[k - 1];
        let h = times[k] - t;
        let u = control(t);
        let m = rates(t);
        let v = drift(model, &u, &m);
        let rate = model.c + running_cost(model, &u, &m);

        let mut next: Vec<T> = x.iter().zip(&v).map(|(&p, &vi)| p + vi * h).collect();
        reflector.project(&mut next, &mut push);

        if domain.contains(&next) {
            cost += rate * h;
            x = next;
            continue;
        }

        let segment = |s: T| -> Vec<T> { x.iter().zip(&next).map(|(&a, &b)| a + s * (b - a)).collect() };
        let (mut lo, mut hi) = (T::zero(), T::one());
        for _ in 0..EXIT_BISECTIONS {
            let mid = (lo + hi) / T::of(2.0);
            if domain.contains(&segment(mid)) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let exit_point = segment(hi);
        let slack = segment(lo)
            .iter()
            .zip(&exit_point)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max);
        let class = domain
            .classify_with_tol(&exit_point, slack + T::of(crate::network::EPS_GEOM))
            .unwrap_or(BoundaryClass::Outside);
        cost += rate * h * hi;
        return Ok(GameCost { sigma: Some(t + h * hi), cost, exited_through: Some(class) });
    }
    Ok(GameCost { sigma: None, cost, exited_through: None })
}
