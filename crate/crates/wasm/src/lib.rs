//! Browser bindings for three interactive experiments: stability of the
//! cosine profile under a mode perturbation, self-similar blow-up of the
//! memory equation, and the low-regularity gap-growth mechanism. Each call
//! runs the solver and returns plot-ready JSON.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use pjipm_core::characteristics::{self, CuspSpec};
use pjipm_core::grid::{AccuracyPolicy, Grid, GridFunction};
use pjipm_core::ipm;
use pjipm_core::modulation;
use pjipm_core::pj::{self, ForcingHook};
use pjipm_core::trajectory::StepPolicy;
use pjipm_core::weights;

fn acc() -> AccuracyPolicy {
    AccuracyPolicy::default()
}

/// Keep at most `cap` evenly spaced samples (plots need no more).
fn thin(series: &[(f64, f64)], cap: usize) -> Vec<(f64, f64)> {
    if series.len() <= cap {
        return series.to_vec();
    }
    let stride = series.len().div_ceil(cap);
    let mut out: Vec<(f64, f64)> = series.iter().copied().step_by(stride).collect();
    if let Some(last) = series.last() {
        if out.last() != Some(last) {
            out.push(*last);
        }
    }
    out
}

#[derive(Serialize)]
struct Profile {
    t: f64,
    x: Vec<f64>,
    values: Vec<f64>,
}

fn profile(traj: &pjipm_core::FieldTrajectory, k: usize, cap: usize) -> Profile {
    let n = traj.grid.len();
    let stride = n.div_ceil(cap).max(1);
    let mut x = Vec::new();
    let mut values = Vec::new();
    for j in (0..n).step_by(stride) {
        x.push(traj.grid.node(j));
        values.push(traj.states[k][j]);
    }
    Profile {
        t: traj.times[k],
        x,
        values,
    }
}

#[derive(Serialize)]
struct StabilityOut {
    mu_star: f64,
    decay_rate: f64,
    error_series: Vec<(f64, f64)>,
    alpha_m1: Vec<(f64, f64)>,
    profiles: Vec<Profile>,
    status: String,
}

#[derive(Serialize)]
struct ErrorOut {
    error: String,
}

fn json_err(e: impl ToString) -> String {
    serde_json::to_string(&ErrorOut {
        error: e.to_string(),
    })
    .unwrap()
}

/// Evolve cos(x) + amplitude cos(mode x) and report the approach to the
/// conserved-curvature cosine state.
pub fn stability_json(amplitude: f64, mode: u32, n: u32, horizon: f64) -> String {
    let run = || -> Result<String, pjipm_core::Error> {
        let g = Grid::new(n as usize)?;
        let m = mode as f64;
        let a0 = GridFunction::sample(&g, move |x| x.cos() + amplitude * (m * x).cos());
        let pol = StepPolicy::default();
        let traj = pj::evolve_pj(&a0, horizon.clamp(1.0, 30.0), &pol, &acc(), &ForcingHook::none())?;

        let frames = modulation::decompose_trajectory(&traj, 8, &acc())?;
        let mu_star = frames.frames[0].mu;
        let target = GridFunction::sample(&g, move |x| mu_star * x.cos());
        let err: Vec<(f64, f64)> = (0..traj.len())
            .map(|k| (traj.times[k], traj.state_at(k).sup_distance(&target)))
            .collect();
        let rate = weights::fit_decay(&err, (horizon / 6.0, horizon * 5.0 / 6.0), 0.0)
            .map(|f| f.rate)
            .unwrap_or(0.0);
        let alpha: Vec<(f64, f64)> = frames
            .frames
            .iter()
            .map(|f| (f.s, f.alpha_m1))
            .collect();
        let picks: Vec<usize> = [0.0, 0.1, 0.25, 0.5, 1.0]
            .iter()
            .map(|f| traj.index_at(f * horizon))
            .collect();
        let out = StabilityOut {
            mu_star,
            decay_rate: rate,
            error_series: thin(&err, 400),
            alpha_m1: thin(&alpha, 400),
            profiles: picks.iter().map(|&k| profile(&traj, k, 257)).collect(),
            status: format!("{:?}", traj.status),
        };
        Ok(serde_json::to_string(&out).unwrap())
    };
    run().unwrap_or_else(json_err)
}

#[derive(Serialize)]
struct BlowupOut {
    tau_star: f64,
    rate_coefficient: f64,
    fit_residual: f64,
    sup_series: Vec<(f64, f64)>,
    inv_sup_series: Vec<(f64, f64)>,
    profile_error: Vec<(f64, f64)>,
    rescaled_profile: Profile,
    status: String,
}

/// Evolve cos(x) + amplitude cos(mode x) under the memory equation until the
/// cap, and fit the blow-up time.
pub fn blowup_json(amplitude: f64, mode: u32, n: u32) -> String {
    let run = || -> Result<String, pjipm_core::Error> {
        let g = Grid::new(n as usize)?;
        let m = mode as f64;
        let b0 = GridFunction::sample(&g, move |x| x.cos() + amplitude * (m * x).cos());
        let pol = StepPolicy {
            sup_cap: 1e6,
            ..StepPolicy::default()
        };
        let traj = ipm::evolve_ipm(&b0, 1.0, 20.0, &pol, &acc())?;
        let report = ipm::detect_blowup(&traj, &pol, &acc())?;

        let sup = traj.series.samples("sup");
        let inv: Vec<(f64, f64)> = sup.iter().map(|&(t, s)| (t, 1.0 / s)).collect();
        // final resolved snapshot, rescaled by (tau* - tau)
        let k_last = traj.len() - 1;
        let scale = (report.tau_star - traj.taus[k_last]).max(0.0);
        let mut resc = profile(
            &ipm::to_pj(&traj)?,
            k_last,
            257,
        );
        let nu = traj.nu[k_last];
        for v in resc.values.iter_mut() {
            *v *= nu * scale;
        }
        let out = BlowupOut {
            tau_star: report.tau_star,
            rate_coefficient: report.rate_coefficient,
            fit_residual: report.fit_residual,
            sup_series: thin(&sup, 400),
            inv_sup_series: thin(&inv, 400),
            profile_error: thin(&report.profile_error, 400),
            rescaled_profile: resc,
            status: format!("{:?}", report.status),
        };
        Ok(serde_json::to_string(&out).unwrap())
    };
    run().unwrap_or_else(json_err)
}

#[derive(Serialize)]
struct InstabilityOut {
    gap_series: Vec<(f64, f64)>,
    identity_residual: f64,
    growth_rate: f64,
    growth_factor: f64,
    horizon_t0: f64,
    initial_profile: Vec<(f64, f64)>,
    status: String,
}

/// Cusp perturbation run: gap growth between the origin and the
/// characteristic from z0.
pub fn instability_json(epsilon: f64, z0: f64, n: u32) -> String {
    let run = || -> Result<String, pjipm_core::Error> {
        let g = Grid::new(n as usize)?;
        let spec = CuspSpec {
            epsilon: epsilon.clamp(0.1, 2.0),
            sigma: 2.0,
            support_radius: 0.05,
        };
        let pol = StepPolicy::default();
        let rep = characteristics::instability_experiment(&spec, z0, &g, &pol, &acc())?;
        let a0 = characteristics::build_cusp_data(&spec, &g, &acc())?;
        // zoomed initial profile near the cusp
        let mut initial = Vec::new();
        for (j, &x) in g.nodes().iter().enumerate() {
            if x.abs() <= 0.3 {
                initial.push((x, a0.values[j]));
            }
        }
        let out = InstabilityOut {
            gap_series: thin(&rep.d_series, 400),
            identity_residual: rep.identity_residual,
            growth_rate: rep.growth_rate,
            growth_factor: rep.growth_factor,
            horizon_t0: rep.horizon_t0,
            initial_profile: thin(&initial, 400),
            status: format!("{:?}", rep.status),
        };
        Ok(serde_json::to_string(&out).unwrap())
    };
    run().unwrap_or_else(json_err)
}

#[wasm_bindgen]
pub fn stability_run(amplitude: f64, mode: u32, n: u32, horizon: f64) -> String {
    stability_json(amplitude, mode, n, horizon)
}

#[wasm_bindgen]
pub fn blowup_run(amplitude: f64, mode: u32, n: u32) -> String {
    blowup_json(amplitude, mode, n)
}

#[wasm_bindgen]
pub fn instability_run(epsilon: f64, z0: f64, n: u32) -> String {
    instability_json(epsilon, z0, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stability_payload_is_well_formed() {
        let s = stability_json(0.01, 2, 128, 6.0);
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert!(v.get("error").is_none(), "{s}");
        assert!((v["mu_star"].as_f64().unwrap() - 1.04).abs() < 1e-6);
        assert!(v["decay_rate"].as_f64().unwrap() > 0.4);
        assert!(v["profiles"].as_array().unwrap().len() >= 4);
    }

    #[test]
    fn blowup_payload_reports_the_explicit_time() {
        let s = blowup_json(0.0, 2, 128);
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert!(v.get("error").is_none(), "{s}");
        let tau_star = v["tau_star"].as_f64().unwrap();
        assert!((tau_star - std::f64::consts::FRAC_PI_2).abs() < 5e-3, "{tau_star}");
    }

    #[test]
    fn instability_payload_grows() {
        let s = instability_json(1.0, 0.05, 512);
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert!(v.get("error").is_none(), "{s}");
        assert!(v["growth_factor"].as_f64().unwrap() > 1.2);
    }

    #[test]
    fn invalid_grids_produce_error_payloads() {
        let s = stability_json(0.01, 2, 15, 6.0);
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert!(v.get("error").is_some());
    }
}
