//! Time integration of the nonlinear nonlocal transport equation
//!
//! ```text
//! da/dt + (int_{-pi}^x a) dx_a - a^2 + (1/pi) int_{-pi}^{pi} a^2 = theta(t) a
//! ```
//!
//! on [-pi, pi] with the mean-free constraint, by method of lines with
//! classical fourth-order Runge-Kutta stepping, plus the regularity monitor
//! that bounds the C^3 norm through the time integral of the sup norm.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{self, AccuracyPolicy, GridFunction, IntegralBase};
use crate::trajectory::{FieldTrajectory, RunStatus, SeriesBundle, StepPolicy};

/// Time-stamped solution state.
#[derive(Clone, Debug)]
pub struct PjState {
    pub t: f64,
    pub a: GridFunction,
}

impl PjState {
    pub fn from_trajectory(traj: &FieldTrajectory, k: usize) -> Self {
        Self {
            t: traj.times[k],
            a: traj.state_at(k),
        }
    }
}

/// Optional multiplicative forcing theta(t) * a.
#[derive(Clone, Default)]
pub struct ForcingHook {
    theta: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
}

impl ForcingHook {
    pub fn none() -> Self {
        Self { theta: None }
    }

    pub fn multiplicative(theta: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            theta: Some(Arc::new(theta)),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match &self.theta {
            Some(f) => f(t),
            None => 0.0,
        }
    }

    pub fn is_none(&self) -> bool {
        self.theta.is_none()
    }
}

impl std::fmt::Debug for ForcingHook {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ForcingHook({})", if self.theta.is_some() { "theta(t)" } else { "none" })
    }
}

/// Right-hand side of the evolution equation for a mean-free state.
pub fn pj_rhs(a: &GridFunction, policy: &AccuracyPolicy) -> Result<GridFunction> {
    pj_rhs_with_tol(a, policy, 1e-8)
}

pub fn pj_rhs_with_tol(
    a: &GridFunction,
    policy: &AccuracyPolicy,
    mean_tol: f64,
) -> Result<GridFunction> {
    check_mean_free(a, mean_tol)?;
    Ok(pj_rhs_unchecked(a, policy).0)
}

/// |mean| <= tol, relative to the amplitude for large data where an absolute
/// bound is below the rounding of the quadrature itself.
pub(crate) fn check_mean_free(a: &GridFunction, mean_tol: f64) -> Result<()> {
    let m = grid::mean(a);
    let scale = a.sup_norm().max(1.0);
    if m.abs() > mean_tol * scale {
        return Err(Error::NotMeanFree {
            mean: m,
            tol: mean_tol * scale,
        });
    }
    Ok(())
}

/// RHS plus the max of |int_{-pi}^x a| (the CFL velocity scale).
pub(crate) fn pj_rhs_unchecked(a: &GridFunction, policy: &AccuracyPolicy) -> (GridFunction, f64) {
    let transport = grid::antiderivative_from(a, IntegralBase::LeftEnd, policy);
    let da = grid::derivative(a, 1, policy).expect("stencil fits");
    let sq = GridFunction {
        grid: a.grid.clone(),
        values: a.values.iter().map(|v| v * v).collect(),
    };
    // (1/pi) * int a^2 = 2 * mean(a^2)
    let energy = 2.0 * grid::mean(&sq);
    let vmax = transport.sup_norm();
    let values = a
        .values
        .iter()
        .zip(transport.values.iter().zip(&da.values))
        .map(|(&av, (&tv, &dv))| -tv * dv + av * av - energy)
        .collect();
    (
        GridFunction {
            grid: a.grid.clone(),
            values,
        },
        vmax,
    )
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Evolve mean-free initial data to time `horizon`.
///
/// dt = min(dt_max, cfl*h / max(1, max|int a|), 1/(2 max(1, sup|a|))), the
/// last bound tracking the collapsing time scale of a growing solution. The
/// numerical mean is removed after every step (the flow conserves it
/// exactly). Aborts with `BlowupSuspected` when sup|a| > sup_cap or
/// dt < dt_min, with `NumericalFailure` on NaN/Inf keeping the last valid
/// state.
pub fn evolve_pj(
    a0: &GridFunction,
    horizon: f64,
    policy: &StepPolicy,
    accuracy: &AccuracyPolicy,
    forcing: &ForcingHook,
) -> Result<FieldTrajectory> {
    policy.validate()?;
    if horizon <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    check_mean_free(a0, policy.mean_tol)?;

    let g = a0.grid.clone();
    let mut a = a0.values.clone();
    let mut t = 0.0;
    let mut bkm = 0.0;
    let mut status = RunStatus::Completed;

    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut tendencies = Vec::new();
    let mut series = SeriesBundle::default();

    let gf = |values: Vec<f64>| GridFunction {
        grid: g.clone(),
        values,
    };

    // Stage tendency with forcing folded in and the (quadrature-level) mean
    // of the tendency removed. Projecting at stage level keeps the scheme a
    // plain method-of-lines RK4; projecting the state after the step instead
    // is an operator splitting that costs an order of temporal accuracy.
    let tendency = |state: &Vec<f64>, time: f64| -> (GridFunction, f64) {
        let cur = GridFunction {
            grid: g.clone(),
            values: state.clone(),
        };
        let (mut r, vmax) = pj_rhs_unchecked(&cur, accuracy);
        if !forcing.is_none() {
            let th = forcing.eval(time);
            for (d, v) in r.values.iter_mut().zip(state) {
                *d += th * v;
            }
        }
        let drift = grid::mean(&r);
        for d in r.values.iter_mut() {
            *d -= drift;
        }
        (r, vmax)
    };

    let mut step_index = 0usize;
    loop {
        let (k1, vmax) = tendency(&a, t);
        let sup = max_abs(&a);

        series.push(
            t,
            &[
                ("sup", sup),
                ("mean", grid::mean(&gf(a.clone()))),
                ("bkm", bkm),
                ("dt_velocity", vmax),
            ],
        );
        if step_index % policy.snapshot_stride == 0 || t >= horizon {
            times.push(t);
            states.push(a.clone());
            tendencies.push(k1.values.clone());
        }

        if t >= horizon {
            break;
        }
        if sup > policy.sup_cap {
            status = RunStatus::BlowupSuspected;
            break;
        }

        let mut dt = policy
            .dt_max
            .min(policy.cfl * g.h() / vmax.max(1.0))
            .min(0.5 / sup.max(1.0));
        if dt < policy.dt_min {
            status = RunStatus::BlowupSuspected;
            break;
        }
        if t + dt > horizon {
            dt = horizon - t;
        }

        let stage = |base: &[f64], k: &GridFunction, c: f64| -> Vec<f64> {
            base.iter()
                .zip(&k.values)
                .map(|(b, kv)| b + c * kv)
                .collect()
        };
        let (k2, _) = tendency(&stage(&a, &k1, 0.5 * dt), t + 0.5 * dt);
        let (k3, _) = tendency(&stage(&a, &k2, 0.5 * dt), t + 0.5 * dt);
        let (k4, _) = tendency(&stage(&a, &k3, dt), t + dt);

        let next: Vec<f64> = a
            .iter()
            .enumerate()
            .map(|(j, v)| {
                v + dt / 6.0 * (k1.values[j] + 2.0 * k2.values[j] + 2.0 * k3.values[j] + k4.values[j])
            })
            .collect();

        if !next.iter().all(|v| v.is_finite()) {
            status = RunStatus::NumericalFailure;
            break;
        }

        let mut next = next;
        grid::damp_grid_modes(&mut next, g.center(), policy.filter_strength(dt));
        let sup_next = max_abs(&next);
        bkm += 0.5 * dt * (sup + sup_next);
        a = next;
        t += dt;
        step_index += 1;
    }

    Ok(FieldTrajectory {
        grid: g,
        times,
        states,
        tendencies,
        series,
        status,
    })
}

/// max over derivative orders 0..=k of the sup norm.
pub fn ck_norm(f: &GridFunction, k: usize, policy: &AccuracyPolicy) -> Result<f64> {
    let mut norm = f.sup_norm();
    for m in 1..=k {
        norm = norm.max(grid::derivative(f, m, policy)?.sup_norm());
    }
    Ok(norm)
}

/// Regularity-criterion bound evaluated along a trajectory:
/// (N0 + N0^3)(t+1)^2 exp(C * int_0^t sup|a|), with N0 the initial C^3 norm.
/// Returned at the diagnostic sample times; non-decreasing in t.
pub fn bkm_bound(
    traj: &FieldTrajectory,
    c: f64,
    accuracy: &AccuracyPolicy,
) -> Result<Vec<(f64, f64)>> {
    let acc = traj
        .series
        .get("bkm")
        .ok_or_else(|| Error::InvalidParameter("trajectory lacks the bkm accumulator".into()))?;
    let n0 = ck_norm(&traj.state_at(0), 3, accuracy)?;
    let amp = n0 + n0.powi(3);
    Ok(traj
        .series
        .t
        .iter()
        .zip(acc)
        .map(|(&t, &s)| (t, amp * (t + 1.0).powi(2) * (c * s).exp()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    fn acc() -> AccuracyPolicy {
        AccuracyPolicy::default()
    }

    #[test]
    fn cos_is_stationary_for_the_rhs() {
        let g = Grid::new(512).unwrap();
        let a = GridFunction::sample(&g, |x| x.cos());
        let r = pj_rhs(&a, &acc()).unwrap();
        assert!(r.sup_norm() <= 1e-8, "{}", r.sup_norm());
    }

    #[test]
    fn zero_rhs_is_exactly_zero() {
        let g = Grid::new(64).unwrap();
        let a = GridFunction::zeros(&g);
        let r = pj_rhs(&a, &acc()).unwrap();
        assert!(r.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn half_integer_sine_is_stationary() {
        let g = Grid::new(512).unwrap();
        let a = GridFunction::sample(&g, |x| (0.5 * x).sin());
        let r = pj_rhs(&a, &acc()).unwrap();
        assert!(r.sup_norm() <= 1e-8, "{}", r.sup_norm());
    }

    #[test]
    fn rhs_rejects_non_mean_free_data() {
        let g = Grid::new(64).unwrap();
        let a = GridFunction::sample(&g, |x| 1.0 + x.cos());
        assert!(matches!(
            pj_rhs(&a, &acc()),
            Err(Error::NotMeanFree { .. })
        ));
    }

    #[test]
    fn cos_stays_put_under_evolution() {
        let g = Grid::new(256).unwrap();
        let a0 = GridFunction::sample(&g, |x| x.cos());
        let traj = evolve_pj(&a0, 10.0, &StepPolicy::default(), &acc(), &ForcingHook::none())
            .unwrap();
        assert_eq!(traj.status, RunStatus::Completed);
        assert!(traj.last_state().sup_distance(&a0) <= 1e-6);
    }

    #[test]
    fn zero_data_stays_zero() {
        let g = Grid::new(64).unwrap();
        let a0 = GridFunction::zeros(&g);
        let traj = evolve_pj(&a0, 5.0, &StepPolicy::default(), &acc(), &ForcingHook::none())
            .unwrap();
        for s in &traj.states {
            assert!(s.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn mean_is_conserved_along_runs() {
        let g = Grid::new(256).unwrap();
        let a0 = GridFunction::sample(&g, |x| x.cos() + 0.05 * (2.0 * x).cos());
        let pol = StepPolicy::default();
        let traj = evolve_pj(&a0, 6.0, &pol, &acc(), &ForcingHook::none()).unwrap();
        let means = traj.series.get("mean").unwrap();
        assert!(means.iter().all(|m| m.abs() <= 10.0 * pol.mean_tol));
    }

    #[test]
    fn scaling_symmetry_holds() {
        // evolving a0/2 to time 2t and doubling matches evolving a0 to t
        let g = Grid::new(256).unwrap();
        let a0 = GridFunction::sample(&g, |x| x.cos() + 0.1 * (2.0 * x).cos());
        let pol = StepPolicy::default();
        let t = 2.0;
        let full = evolve_pj(&a0, t, &pol, &acc(), &ForcingHook::none()).unwrap();
        let half = evolve_pj(&a0.scaled(0.5), 2.0 * t, &pol, &acc(), &ForcingHook::none()).unwrap();
        let rescaled = half.last_state().scaled(2.0);
        assert!(
            full.last_state().sup_distance(&rescaled) <= 1e-6,
            "{}",
            full.last_state().sup_distance(&rescaled)
        );
    }

    #[test]
    fn time_stepping_is_fourth_order() {
        let g = Grid::new(64).unwrap();
        let a0 = GridFunction::sample(&g, |x| x.cos() + 0.3 * (2.0 * x).cos());
        let run = |dt_max: f64| {
            // filter off: this measures the bare integrator order
            let pol = StepPolicy {
                dt_max,
                filter_rate: 0.0,
                ..StepPolicy::default()
            };
            evolve_pj(&a0, 1.0, &pol, &acc(), &ForcingHook::none())
                .unwrap()
                .last_state()
        };
        let reference = run(2.5e-4);
        let coarse = run(4e-3).sup_distance(&reference);
        let fine = run(2e-3).sup_distance(&reference);
        assert!(coarse / fine >= 12.0, "ratio {}", coarse / fine);
    }

    #[test]
    fn multiplicative_forcing_damps_the_stationary_state() {
        // with theta = -1 the cos state contracts exactly like e^{-t}
        let g = Grid::new(256).unwrap();
        let a0 = GridFunction::sample(&g, |x| x.cos());
        let forcing = ForcingHook::multiplicative(|_| -1.0);
        let traj = evolve_pj(&a0, 1.0, &StepPolicy::default(), &acc(), &forcing).unwrap();
        let expect = GridFunction::sample(&g, |x| (-1.0f64).exp() * x.cos());
        assert!(traj.last_state().sup_distance(&expect) <= 1e-6);
    }

    #[test]
    fn overflow_is_reported_as_numerical_failure() {
        let g = Grid::new(64).unwrap();
        let a0 = GridFunction::sample(&g, |x| 1e200 * x.cos());
        let pol = StepPolicy {
            sup_cap: 1e300,
            dt_min: 1e-300,
            ..StepPolicy::default()
        };
        let traj = evolve_pj(&a0, 1.0, &pol, &acc(), &ForcingHook::none()).unwrap();
        assert_eq!(traj.status, RunStatus::NumericalFailure);
        assert!(traj.last_state().is_finite());
    }

    #[test]
    fn sup_cap_aborts_as_suspected_blowup() {
        let g = Grid::new(64).unwrap();
        let a0 = GridFunction::sample(&g, |x| 1e200 * x.cos());
        let traj = evolve_pj(&a0, 1.0, &StepPolicy::default(), &acc(), &ForcingHook::none())
            .unwrap();
        assert_eq!(traj.status, RunStatus::BlowupSuspected);
    }

    #[test]
    fn bkm_bound_dominates_the_measured_norm() {
        let g = Grid::new(256).unwrap();
        let a0 = GridFunction::sample(&g, |x| x.cos());
        let traj = evolve_pj(&a0, 3.0, &StepPolicy::default(), &acc(), &ForcingHook::none())
            .unwrap();
        // accumulator is t for the unit-amplitude stationary state
        let acc_series = traj.series.get("bkm").unwrap();
        for (t, s) in traj.series.t.iter().zip(acc_series) {
            assert!((s - t).abs() <= 1e-6 * (1.0 + t));
        }
        let bound = bkm_bound(&traj, 1.0, &acc()).unwrap();
        assert!(bound.windows(2).all(|w| w[1].1 >= w[0].1));
        for (k, snap_t) in traj.times.iter().enumerate() {
            let measured = ck_norm(&traj.state_at(k), 3, &acc()).unwrap();
            let idx = traj
                .series
                .t
                .iter()
                .position(|t| (t - snap_t).abs() < 1e-14)
                .unwrap();
            assert!(measured <= bound[idx].1 + 1e-9);
        }
        // zero trajectory: bound identically zero
        let z = evolve_pj(
            &GridFunction::zeros(&g),
            2.0,
            &StepPolicy::default(),
            &acc(),
            &ForcingHook::none(),
        )
        .unwrap();
        let zb = bkm_bound(&z, 1.0, &acc()).unwrap();
        assert!(zb.iter().all(|(_, b)| *b == 0.0));
    }
}
