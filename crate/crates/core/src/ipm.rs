//! Solver for the reduced porous-medium equation with its time-memory term,
//!
//! ```text
//! db/dtau + (int_{-pi}^x b) dx_b - b^2 + (1/pi) int b^2 = memory(tau) * b,
//! d(memory)/dtau = (1/pi) int_{-pi}^{pi} b^2,
//! ```
//!
//! the algebraic bridge a = b/nu, t = int nu dtau with d(nu)/dtau =
//! nu * memory, blow-up detection with self-similar rate fitting, and the
//! second-order reconstruction of nu from a settled a-trajectory.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{self, AccuracyPolicy, Grid, GridFunction};
use crate::pj;
use crate::trajectory::{FieldTrajectory, RunStatus, SeriesBundle, StepPolicy};

/// Solution state: field, memory integral and the change-of-variables
/// accumulators.
#[derive(Clone, Debug)]
pub struct IpmState {
    pub tau: f64,
    pub b: GridFunction,
    pub memory: f64,
    pub nu: f64,
    pub t_accum: f64,
}

/// Evolution record of an IPM run.
#[derive(Clone, Debug)]
pub struct IpmTrajectory {
    pub grid: Grid,
    pub taus: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub tendencies: Vec<Vec<f64>>,
    pub memory: Vec<f64>,
    pub nu: Vec<f64>,
    pub t_accum: Vec<f64>,
    pub series: SeriesBundle,
    pub status: RunStatus,
}

impl IpmTrajectory {
    pub fn state_at(&self, k: usize) -> IpmState {
        IpmState {
            tau: self.taus[k],
            b: GridFunction {
                grid: self.grid.clone(),
                values: self.states[k].clone(),
            },
            memory: self.memory[k],
            nu: self.nu[k],
            t_accum: self.t_accum[k],
        }
    }

    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }
}

/// Field and memory tendencies for a mean-free state.
pub fn ipm_rhs(
    b: &GridFunction,
    memory: f64,
    policy: &AccuracyPolicy,
) -> Result<(GridFunction, f64)> {
    pj::check_mean_free(b, 1e-8)?;
    Ok(ipm_rhs_unchecked(b, memory, policy).0)
}

fn ipm_rhs_unchecked(
    b: &GridFunction,
    memory: f64,
    policy: &AccuracyPolicy,
) -> ((GridFunction, f64), f64) {
    let (mut rhs, vmax) = pj::pj_rhs_unchecked(b, policy);
    for (d, v) in rhs.values.iter_mut().zip(&b.values) {
        *d += memory * v;
    }
    let sq = GridFunction {
        grid: b.grid.clone(),
        values: b.values.iter().map(|v| v * v).collect(),
    };
    let memory_dot = 2.0 * grid::mean(&sq);
    ((rhs, memory_dot), vmax)
}

/// Curvature scale -d2 b0 at the tracked maximum; the natural default for
/// nu(0) when b0 is close to mu cos(x).
pub fn default_nu0(b0: &GridFunction, policy: &AccuracyPolicy) -> Result<f64> {
    let (x_max, _) = grid::argmax_refined(b0, None, policy);
    let d2 = grid::interpolate_derivative(b0, x_max, 2, policy)?;
    if d2 >= 0.0 {
        return Err(Error::PreparationFailed(format!(
            "second derivative at the maximum must be negative (got {d2:.3e})"
        )));
    }
    Ok(-d2)
}

/// Integrate (b, memory, nu, t_accum) jointly until sup|b| exceeds the cap
/// or tau reaches `horizon`.
pub fn evolve_ipm(
    b0: &GridFunction,
    nu0: f64,
    horizon: f64,
    policy: &StepPolicy,
    accuracy: &AccuracyPolicy,
) -> Result<IpmTrajectory> {
    policy.validate()?;
    if nu0 <= 0.0 {
        return Err(Error::NonPositiveNu(nu0));
    }
    if horizon <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    pj::check_mean_free(b0, policy.mean_tol)?;

    let g = b0.grid.clone();
    let mut b = b0.values.clone();
    let mut memory = 0.0f64;
    let mut nu = nu0;
    let mut t_accum = 0.0f64;
    let mut tau = 0.0f64;
    let mut status = RunStatus::Completed;

    let mut taus = Vec::new();
    let mut states = Vec::new();
    let mut tendencies = Vec::new();
    let mut memory_snap = Vec::new();
    let mut nu_snap = Vec::new();
    let mut t_snap = Vec::new();
    let mut series = SeriesBundle::default();

    // stage tendency with the mean of the field tendency projected out
    let tendency = |bv: &Vec<f64>, mem: f64, nv: f64| -> (Vec<f64>, f64, f64, f64, f64) {
        let bf = GridFunction {
            grid: g.clone(),
            values: bv.clone(),
        };
        let ((mut rhs, mem_dot), vmax) = ipm_rhs_unchecked(&bf, mem, accuracy);
        let drift = grid::mean(&rhs);
        for d in rhs.values.iter_mut() {
            *d -= drift;
        }
        (rhs.values, mem_dot, nv * mem, nv, vmax)
    };

    let mut step = 0usize;
    loop {
        let (k1b, k1m, k1n, k1t, vmax) = tendency(&b, memory, nu);
        let sup = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));

        series.push(
            tau,
            &[
                ("sup", sup),
                ("memory", memory),
                ("nu", nu),
                ("t_accum", t_accum),
                (
                    "mean",
                    grid::mean(&GridFunction {
                        grid: g.clone(),
                        values: b.clone(),
                    }),
                ),
            ],
        );
        if step % policy.snapshot_stride == 0 || tau >= horizon {
            taus.push(tau);
            states.push(b.clone());
            tendencies.push(k1b.clone());
            memory_snap.push(memory);
            nu_snap.push(nu);
            t_snap.push(t_accum);
        }

        if tau >= horizon {
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
        if tau + dt > horizon {
            dt = horizon - tau;
        }

        let ax = |base: &[f64], k: &[f64], c: f64| -> Vec<f64> {
            base.iter().zip(k).map(|(x, kv)| x + c * kv).collect()
        };
        let (k2b, k2m, k2n, k2t, _) = tendency(
            &ax(&b, &k1b, 0.5 * dt),
            memory + 0.5 * dt * k1m,
            nu + 0.5 * dt * k1n,
        );
        let (k3b, k3m, k3n, k3t, _) = tendency(
            &ax(&b, &k2b, 0.5 * dt),
            memory + 0.5 * dt * k2m,
            nu + 0.5 * dt * k2n,
        );
        let (k4b, k4m, k4n, k4t, _) =
            tendency(&ax(&b, &k3b, dt), memory + dt * k3m, nu + dt * k3n);

        let mut next: Vec<f64> = b
            .iter()
            .enumerate()
            .map(|(j, v)| v + dt / 6.0 * (k1b[j] + 2.0 * k2b[j] + 2.0 * k3b[j] + k4b[j]))
            .collect();
        if !next.iter().all(|v| v.is_finite()) {
            status = RunStatus::NumericalFailure;
            break;
        }
        grid::damp_grid_modes(&mut next, g.center(), policy.filter_strength(dt));
        b = next;
        memory += dt / 6.0 * (k1m + 2.0 * k2m + 2.0 * k3m + k4m);
        nu += dt / 6.0 * (k1n + 2.0 * k2n + 2.0 * k3n + k4n);
        t_accum += dt / 6.0 * (k1t + 2.0 * k2t + 2.0 * k3t + k4t);
        tau += dt;
        step += 1;
    }

    Ok(IpmTrajectory {
        grid: g,
        taus,
        states,
        tendencies,
        memory: memory_snap,
        nu: nu_snap,
        t_accum: t_snap,
        series,
        status,
    })
}

/// Algebraic bridge to the rescaled variables: snapshots (t_accum, b/nu)
/// with tendencies converted by da/dt = (db/dtau - memory b) / nu^2.
pub fn to_pj(traj: &IpmTrajectory) -> Result<FieldTrajectory> {
    let mut times = Vec::with_capacity(traj.len());
    let mut states: Vec<Vec<f64>> = Vec::with_capacity(traj.len());
    let mut tendencies: Vec<Vec<f64>> = Vec::with_capacity(traj.len());
    for k in 0..traj.len() {
        let nu = traj.nu[k];
        if nu <= 0.0 {
            return Err(Error::NonPositiveNu(nu));
        }
        times.push(traj.t_accum[k]);
        states.push(traj.states[k].iter().map(|v| v / nu).collect());
        let mem = traj.memory[k];
        tendencies.push(
            traj.tendencies[k]
                .iter()
                .zip(&traj.states[k])
                .map(|(db, b)| (db - mem * b) / (nu * nu))
                .collect(),
        );
    }
    let mut series = SeriesBundle::default();
    for k in 0..traj.len() {
        let sup = states[k]
            .iter()
            .fold(0.0f64, |m: f64, v: &f64| m.max(v.abs()));
        series.push(times[k], &[("sup", sup)]);
    }
    Ok(FieldTrajectory {
        grid: traj.grid.clone(),
        times,
        states,
        tendencies,
        series,
        status: traj.status,
    })
}

/// Reconstruction of nu from a settled a-trajectory: d2 nu/dt2 = c(t) nu
/// with c = (1/pi) int a^2, nu(0) = mu, nu'(0) = 0, plus the log-linear fit
/// of the exponential tail nu ~ nu_star exp(rate t).
#[derive(Clone, Debug, Serialize)]
pub struct NuReconstruction {
    pub t: Vec<f64>,
    pub nu: Vec<f64>,
    /// Fitted exponential rate of the tail (the limit amplitude).
    pub rate: f64,
    /// Fitted prefactor of the tail.
    pub amplitude: f64,
}

pub fn reconstruct_nu(
    a_traj: &FieldTrajectory,
    mu: f64,
    accuracy: &AccuracyPolicy,
) -> Result<NuReconstruction> {
    if a_traj.len() < 8 {
        return Err(Error::TooFewSamples {
            needed: 8,
            found: a_traj.len(),
        });
    }
    // coefficient (1/pi) int a^2 = 2 mean(a^2) at the snapshot times
    let coeff: Vec<f64> = (0..a_traj.len())
        .map(|k| {
            let sq = GridFunction {
                grid: a_traj.grid.clone(),
                values: a_traj.states[k].iter().map(|v| v * v).collect(),
            };
            2.0 * grid::mean(&sq)
        })
        .collect();
    let _ = accuracy;

    let times = &a_traj.times;
    let c_at = |t: f64| -> f64 {
        // piecewise-linear in time; the coefficient settles exponentially
        let k = a_traj.index_at(t).min(times.len() - 2);
        let (t0, t1) = (times[k], times[k + 1]);
        let w = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
        coeff[k] * (1.0 - w) + coeff[k + 1] * w
    };

    let mut nu = mu;
    let mut dnu = 0.0;
    let mut out_nu = vec![nu];
    for k in 1..times.len() {
        let dt = times[k] - times[k - 1];
        let t0 = times[k - 1];
        // RK4 on the first-order system (nu, dnu)
        let f = |t: f64, y: (f64, f64)| (y.1, c_at(t) * y.0);
        let y = (nu, dnu);
        let k1 = f(t0, y);
        let k2 = f(t0 + 0.5 * dt, (y.0 + 0.5 * dt * k1.0, y.1 + 0.5 * dt * k1.1));
        let k3 = f(t0 + 0.5 * dt, (y.0 + 0.5 * dt * k2.0, y.1 + 0.5 * dt * k2.1));
        let k4 = f(t0 + dt, (y.0 + dt * k3.0, y.1 + dt * k3.1));
        nu += dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        dnu += dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        out_nu.push(nu);
    }

    // tail fit on the last 40% of the window
    let t_end = *times.last().unwrap();
    let t_lo = 0.6 * t_end;
    let samples: Vec<(f64, f64)> = times.iter().copied().zip(out_nu.iter().copied()).collect();
    let fit = crate::weights::fit_decay(&samples, (t_lo, t_end + 1e-9), 0.0)?;
    Ok(NuReconstruction {
        t: times.clone(),
        nu: out_nu,
        rate: -fit.rate,
        amplitude: fit.intercept.exp(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BlowupStatus {
    Blowup,
    NoBlowup,
    Inconclusive,
}

/// Blow-up detection summary: fitted time, rate coefficient and profile
/// error series.
#[derive(Clone, Debug, Serialize)]
pub struct BlowupReport {
    pub tau_star: f64,
    /// Fitted c in sup|b| ~ c / (tau* - tau).
    pub rate_coefficient: f64,
    pub status: BlowupStatus,
    /// Relative RMS residual of the 1/sup fit over the refined window.
    pub fit_residual: f64,
    /// (tau, ||(tau*-tau) b - cos(. - x_shift)||_inf) at snapshot times in
    /// the fit window.
    pub profile_error: Vec<(f64, f64)>,
    /// Tracked maximum location at the last resolved snapshot.
    pub x_shift: f64,
    /// Fit window in tau.
    pub window: (f64, f64),
}

/// Estimate tau* by least squares on 1/sup|b| vs tau. The coarse window is
/// sup in [10, cap/10]; the estimate is then refined on the last two decades
/// [cap/1000, cap/10], where 1/sup is affine to within its own cube.
pub fn detect_blowup(
    traj: &IpmTrajectory,
    policy: &StepPolicy,
    accuracy: &AccuracyPolicy,
) -> Result<BlowupReport> {
    let sups = traj
        .series
        .get("sup")
        .ok_or_else(|| Error::InvalidParameter("trajectory lacks the sup series".into()))?;
    let taus = &traj.series.t;

    let last = traj.state_at(traj.len() - 1);
    let (x_shift, _) = grid::argmax_refined(&last.b, None, accuracy);

    if traj.status != RunStatus::BlowupSuspected {
        return Ok(BlowupReport {
            tau_star: f64::INFINITY,
            rate_coefficient: 0.0,
            status: BlowupStatus::NoBlowup,
            fit_residual: 0.0,
            profile_error: Vec::new(),
            x_shift,
            window: (0.0, 0.0),
        });
    }

    let fit_line = |lo: f64, hi: f64| -> Option<(f64, f64, f64, (f64, f64))> {
        let pts: Vec<(f64, f64)> = taus
            .iter()
            .zip(sups)
            .filter(|(_, s)| **s >= lo && **s <= hi)
            .map(|(t, s)| (*t, 1.0 / s))
            .collect();
        if pts.len() < 8 {
            return None;
        }
        let n = pts.len() as f64;
        let (mut st, mut sy, mut stt, mut sty) = (0.0, 0.0, 0.0, 0.0);
        for &(t, y) in &pts {
            st += t;
            sy += y;
            stt += t * t;
            sty += t * y;
        }
        let slope = (n * sty - st * sy) / (n * stt - st * st);
        let icept = (sy - slope * st) / n;
        let mut ss = 0.0;
        for &(t, y) in &pts {
            let r = (icept + slope * t - y) / y;
            ss += r * r;
        }
        let window = (pts[0].0, pts[pts.len() - 1].0);
        Some((slope, icept, (ss / n).sqrt(), window))
    };

    let cap = policy.sup_cap;
    let coarse = fit_line(10.0, cap / 10.0);
    let refined = fit_line(cap / 1e3, cap / 10.0).or(coarse);
    let (slope, icept, residual, window) = match refined {
        Some(f) => f,
        None => {
            return Ok(BlowupReport {
                tau_star: f64::INFINITY,
                rate_coefficient: 0.0,
                status: BlowupStatus::Inconclusive,
                fit_residual: f64::INFINITY,
                profile_error: Vec::new(),
                x_shift,
                window: (0.0, 0.0),
            })
        }
    };

    let tau_star = -icept / slope;
    let rate_coefficient = -1.0 / slope;
    let status = if residual <= 0.05 && slope < 0.0 && tau_star > *taus.last().unwrap() {
        BlowupStatus::Blowup
    } else {
        BlowupStatus::Inconclusive
    };

    // profile error against the rescaled cosine at the tracked maximum
    let mut profile_error = Vec::new();
    for k in 0..traj.len() {
        let sup = traj.states[k]
            .iter()
            .fold(0.0f64, |m: f64, v: &f64| m.max(v.abs()));
        if sup < 10.0 || sup > cap {
            continue;
        }
        let scale = tau_star - traj.taus[k];
        if scale <= 0.0 {
            continue;
        }
        let err = traj
            .grid
            .nodes()
            .iter()
            .zip(&traj.states[k])
            .fold(0.0f64, |m, (&x, &v)| m.max((scale * v - (x - x_shift).cos()).abs()));
        profile_error.push((traj.taus[k], err));
    }

    Ok(BlowupReport {
        tau_star,
        rate_coefficient,
        status,
        fit_residual: residual,
        profile_error,
        x_shift,
        window,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn acc() -> AccuracyPolicy {
        AccuracyPolicy::default()
    }

    #[test]
    fn explicit_solution_is_instantaneously_stationary() {
        let g = Grid::new(512).unwrap();
        let b = GridFunction::sample(&g, |x| x.cos());
        let (rhs, mem_dot) = ipm_rhs(&b, 0.0, &acc()).unwrap();
        assert!(rhs.sup_norm() <= 1e-8, "{}", rhs.sup_norm());
        assert!((mem_dot - 1.0).abs() <= 1e-10);

        let z = GridFunction::zeros(&g);
        let (rhs, mem_dot) = ipm_rhs(&z, 0.0, &acc()).unwrap();
        assert!(rhs.values.iter().all(|&v| v == 0.0));
        assert_eq!(mem_dot, 0.0);
    }

    #[test]
    fn explicit_solution_tracks_the_secant_growth() {
        let g = Grid::new(256).unwrap();
        let b0 = GridFunction::sample(&g, |x| x.cos());
        let traj = evolve_ipm(&b0, 1.0, 1.4, &StepPolicy::default(), &acc()).unwrap();
        assert_eq!(traj.status, RunStatus::Completed);
        for (k, &tau) in traj.taus.iter().enumerate() {
            let sup = traj.states[k]
                .iter()
                .fold(0.0f64, |m: f64, v: &f64| m.max(v.abs()));
            let sec = 1.0 / tau.cos();
            assert!((sup - sec).abs() <= 0.01 * sec, "tau = {tau}");
            assert!((traj.nu[k] - sec).abs() <= 0.01 * sec, "nu at {tau}");
        }
    }

    #[test]
    fn zero_data_is_inert() {
        let g = Grid::new(64).unwrap();
        let traj = evolve_ipm(
            &GridFunction::zeros(&g),
            2.0,
            1.0,
            &StepPolicy::default(),
            &acc(),
        )
        .unwrap();
        for k in 0..traj.len() {
            assert!(traj.states[k].iter().all(|&v| v == 0.0));
            assert_eq!(traj.nu[k], 2.0);
        }
        let report = detect_blowup(&traj, &StepPolicy::default(), &acc()).unwrap();
        assert_eq!(report.status, BlowupStatus::NoBlowup);
    }

    #[test]
    fn memory_and_nu_are_nondecreasing() {
        let g = Grid::new(256).unwrap();
        let b0 = GridFunction::sample(&g, |x| x.cos() + 0.01 * (2.0 * x).cos());
        let traj = evolve_ipm(&b0, 1.0, 10.0, &StepPolicy::default(), &acc()).unwrap();
        assert!(traj.memory.windows(2).all(|w| w[1] >= w[0]));
        assert!(traj.nu.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn blowup_time_matches_the_explicit_family() {
        let g = Grid::new(512).unwrap();
        let pol = StepPolicy::default();
        for (amp, expect) in [(1.0, std::f64::consts::FRAC_PI_2), (2.0, std::f64::consts::FRAC_PI_4)]
        {
            let b0 = GridFunction::sample(&g, |x| amp * x.cos());
            let traj = evolve_ipm(&b0, amp, 10.0, &pol, &acc()).unwrap();
            assert_eq!(traj.status, RunStatus::BlowupSuspected);
            let report = detect_blowup(&traj, &pol, &acc()).unwrap();
            assert_eq!(report.status, BlowupStatus::Blowup);
            assert!(
                (report.tau_star - expect).abs() <= 1e-3,
                "amp {amp}: {} vs {expect}",
                report.tau_star
            );
            assert!(report.tau_star > *traj.taus.last().unwrap());
            // self-similar product within 2% over the fit window
            for (k, &tau) in traj.taus.iter().enumerate() {
                if tau < report.window.0 || tau > report.window.1 {
                    continue;
                }
                let sup = traj.states[k]
                    .iter()
                    .fold(0.0f64, |m: f64, v: &f64| m.max(v.abs()));
                let prod = (report.tau_star - tau) * sup;
                assert!((prod - 1.0).abs() <= 0.02, "tau {tau}: {prod}");
            }
        }
    }

    #[test]
    fn bridge_reproduces_the_stationary_state() {
        let g = Grid::new(256).unwrap();
        let b0 = GridFunction::sample(&g, |x| x.cos());
        let traj = evolve_ipm(&b0, 1.0, 1.4, &StepPolicy::default(), &acc()).unwrap();
        let a_traj = to_pj(&traj).unwrap();
        let cos = GridFunction::sample(&g, |x| x.cos());
        for k in 0..a_traj.len() {
            assert!(a_traj.state_at(k).sup_distance(&cos) <= 0.01);
        }
        // round trip: b = nu * a bit-near-exactly
        for k in 0..traj.len() {
            for (a, b) in a_traj.states[k].iter().zip(&traj.states[k]) {
                assert!((a * traj.nu[k] - b).abs() <= 1e-10 * b.abs().max(1.0));
            }
        }
    }

    #[test]
    fn bridged_trajectory_satisfies_the_target_equation() {
        let g = Grid::new(256).unwrap();
        let b0 = GridFunction::sample(&g, |x| x.cos() + 0.01 * (2.0 * x).cos());
        let traj = evolve_ipm(&b0, 1.0, 1.0, &StepPolicy::default(), &acc()).unwrap();
        let a_traj = to_pj(&traj).unwrap();
        // independent residual: compare pj_rhs against a finite-difference
        // time derivative of the bridged states
        let mut checked = 0;
        for k in (10..a_traj.len() - 10).step_by(37) {
            let (t0, t1, t2) = (a_traj.times[k - 1], a_traj.times[k], a_traj.times[k + 1]);
            let (d0, d1) = (t1 - t0, t2 - t1);
            let rhs = pj::pj_rhs(&a_traj.state_at(k), &acc()).unwrap();
            for j in 0..=g.n() {
                let (y0, y1, y2) = (
                    a_traj.states[k - 1][j],
                    a_traj.states[k][j],
                    a_traj.states[k + 1][j],
                );
                // nonuniform centered difference
                let dadt = (d0 * d0 * y2 - d1 * d1 * y0 + (d1 * d1 - d0 * d0) * y1)
                    / (d0 * d1 * (d0 + d1));
                assert!(
                    (dadt - rhs.values[j]).abs() <= 1e-3,
                    "k {k} j {j}: {} vs {}",
                    dadt,
                    rhs.values[j]
                );
            }
            checked += 1;
        }
        assert!(checked >= 3);
    }

    #[test]
    fn nu_reconstruction_matches_cosh_for_the_stationary_state() {
        let g = Grid::new(128).unwrap();
        let a0 = GridFunction::sample(&g, |x| x.cos());
        let traj = pj::evolve_pj(
            &a0,
            10.0,
            &StepPolicy::default(),
            &acc(),
            &pj::ForcingHook::none(),
        )
        .unwrap();
        let rec = reconstruct_nu(&traj, 1.0, &acc()).unwrap();
        for (t, nu) in rec.t.iter().zip(&rec.nu) {
            assert!((nu - t.cosh()).abs() <= 1e-4 * t.cosh(), "t = {t}");
        }
        assert!((rec.rate - 1.0).abs() <= 1e-2, "rate {}", rec.rate);
        assert!((rec.amplitude - 0.5).abs() <= 1e-2, "amp {}", rec.amplitude);

        // a = 0: nu stays at mu
        let z = pj::evolve_pj(
            &GridFunction::zeros(&g),
            2.0,
            &StepPolicy::default(),
            &acc(),
            &pj::ForcingHook::none(),
        )
        .unwrap();
        let rec = reconstruct_nu(&z, 3.0, &acc()).unwrap();
        assert!(rec.nu.iter().all(|v| (v - 3.0).abs() <= 1e-12));
    }

    #[test]
    fn default_nu0_reads_the_curvature() {
        let g = Grid::new(256).unwrap();
        let b0 = GridFunction::sample(&g, |x| 2.0 * x.cos());
        assert!((default_nu0(&b0, &acc()).unwrap() - 2.0).abs() <= 1e-8);
    }
}
