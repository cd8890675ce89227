//! The verification suite: every headline property of the laboratory as an
//! executable criterion with pinned tolerances. Each criterion returns a
//! pass/fail record with the measured numbers; the CLI `verify` subcommand
//! and the integration tests both run through this module.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::OnceLock;
use std::time::Instant;

use serde::Serialize;

use crate::characteristics::{self, CuspSpec};
use crate::grid::{self, AccuracyPolicy, Grid, GridFunction, IntegralBase};
use crate::ipm::{self, BlowupStatus};
use crate::linear::{self, LinearVariant};
use crate::modulation::{self, FrameEtaSource};
use crate::pj::{self, ForcingHook};
use crate::steady::{self, SteadyFamily};
use crate::trajectory::{FieldTrajectory, StepPolicy};
use crate::weights::{self, WeightSpec};

#[derive(Clone, Debug, Serialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub details: String,
    pub seconds: f64,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "criterion {:2} [{}] {} ({:.1}s): {}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.seconds,
            self.details
        )
    }
}

pub const CRITERIA: [(u32, &str); 12] = [
    (1, "explicit blow-up reproduction"),
    (2, "steady-state drift"),
    (3, "eigen-identities"),
    (4, "asymptotic stability decay"),
    (5, "modulation identities"),
    (6, "transported quantities"),
    (7, "weighted linear damping"),
    (8, "nonlocal contraction"),
    (9, "instability mechanism"),
    (10, "blow-up stability bridge"),
    (11, "nu-ODE consistency"),
    (12, "classification oracle"),
];

fn acc() -> AccuracyPolicy {
    AccuracyPolicy::default()
}

/// Shared fixture: the reference stability run a0 = cos + 0.01 cos 2x,
/// n = 512, T = 12 (used by criteria 4, 5, 6, 7 and 11).
fn stability_fixture() -> &'static FieldTrajectory {
    static FIX: OnceLock<FieldTrajectory> = OnceLock::new();
    FIX.get_or_init(|| {
        let g = Grid::new(512).unwrap();
        let a0 = GridFunction::sample(&g, |x| x.cos() + 0.01 * (2.0 * x).cos());
        pj::evolve_pj(&a0, 12.0, &StepPolicy::default(), &acc(), &ForcingHook::none()).unwrap()
    })
}

/// Shared fixture: the perturbed blow-up run b0 = cos + 0.01 cos 2x,
/// n = 512, nu0 = 1 (criteria 10 and 11).
fn ipm_fixture() -> &'static ipm::IpmTrajectory {
    static FIX: OnceLock<ipm::IpmTrajectory> = OnceLock::new();
    FIX.get_or_init(|| {
        let g = Grid::new(512).unwrap();
        let b0 = GridFunction::sample(&g, |x| x.cos() + 0.01 * (2.0 * x).cos());
        ipm::evolve_ipm(&b0, 1.0, 20.0, &StepPolicy::default(), &acc()).unwrap()
    })
}

fn fixture_frames() -> &'static modulation::FrameSeries {
    static FIX: OnceLock<modulation::FrameSeries> = OnceLock::new();
    FIX.get_or_init(|| modulation::decompose_trajectory(stability_fixture(), 8, &acc()).unwrap())
}

struct Check {
    passed: bool,
    details: Vec<String>,
}

impl Check {
    fn new() -> Self {
        Self {
            passed: true,
            details: Vec::new(),
        }
    }

    fn require(&mut self, ok: bool, what: String) {
        if !ok {
            self.passed = false;
        }
        self.details.push(format!(
            "{}{}",
            if ok { "" } else { "FAILED: " },
            what
        ));
    }
}

fn criterion_1() -> (bool, String) {
    let g = Grid::new(512).unwrap();
    let b0 = GridFunction::sample(&g, |x| x.cos());
    let pol = StepPolicy::default();
    let traj = ipm::evolve_ipm(&b0, 1.0, 10.0, &pol, &acc()).unwrap();
    let report = ipm::detect_blowup(&traj, &pol, &acc()).unwrap();

    let mut c = Check::new();
    c.require(
        report.status == BlowupStatus::Blowup,
        format!("status {:?}", report.status),
    );
    c.require(
        (report.tau_star - FRAC_PI_2).abs() <= 1e-3,
        format!("tau* = {:.6} vs pi/2 (tol 1e-3)", report.tau_star),
    );
    // sup matches sec(tau) within 1% up to tau = 1.4
    let mut worst: f64 = 0.0;
    for (t, s) in traj.series.samples("sup") {
        if t <= 1.4 {
            worst = worst.max((s * t.cos() - 1.0).abs());
        }
    }
    c.require(worst <= 0.01, format!("sec profile error {worst:.2e} (tol 1%)"));
    // (tau* - tau) sup in [0.98, 1.02] over the fit window
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for (t, s) in traj.series.samples("sup") {
        if t >= report.window.0 && t <= report.window.1 {
            let p = (report.tau_star - t) * s;
            lo = lo.min(p);
            hi = hi.max(p);
        }
    }
    c.require(
        lo >= 0.98 && hi <= 1.02,
        format!("(tau*-tau)sup in [{lo:.4}, {hi:.4}] (need [0.98, 1.02])"),
    );
    (c.passed, c.details.join("; "))
}

fn criterion_2() -> (bool, String) {
    let g = Grid::new(512).unwrap();
    let pol = StepPolicy::default();
    let mut c = Check::new();
    let mut cases: Vec<(String, GridFunction)> = Vec::new();
    for k in 1..=3 {
        cases.push((
            format!("cos({k}x)"),
            GridFunction::sample(&g, move |x| (k as f64 * x).cos()),
        ));
    }
    for k in 0..=2 {
        let half = (2 * k + 1) as f64 / 2.0;
        cases.push((
            format!("sin({}x/2)", 2 * k + 1),
            GridFunction::sample(&g, move |x| (half * x).sin()),
        ));
    }
    for (name, a0) in cases {
        let traj = pj::evolve_pj(&a0, 5.0, &pol, &acc(), &ForcingHook::none()).unwrap();
        let drift = traj.last_state().sup_distance(&a0);
        c.require(drift <= 1e-6, format!("{name}: drift {drift:.2e}"));
    }
    (c.passed, c.details.join("; "))
}

fn criterion_3() -> (bool, String) {
    let g = Grid::new(2048).unwrap();
    let pol = acc();
    let mut c = Check::new();

    let check = |c: &mut Check, name: &str, f: GridFunction, df: GridFunction, expect: GridFunction| {
        let out = modulation::apply_l(&f, &df, IntegralBase::Center, true, &pol);
        let err = out.sup_distance(&expect);
        c.require(err <= 1e-6, format!("{name}: {err:.2e}"));
    };
    check(
        &mut c,
        "L(cos) = 0",
        GridFunction::sample(&g, |y| y.cos()),
        GridFunction::sample(&g, |y| -y.sin()),
        GridFunction::zeros(&g),
    );
    check(
        &mut c,
        "L(1) = 2cos + y sin",
        GridFunction::sample(&g, |_| 1.0),
        GridFunction::zeros(&g),
        GridFunction::sample(&g, |y| 2.0 * y.cos() + y * y.sin()),
    );
    check(
        &mut c,
        "L(y sin y) = 1",
        GridFunction::sample(&g, |y| y * y.sin()),
        GridFunction::sample(&g, |y| y.sin() + y * y.cos()),
        GridFunction::sample(&g, |_| 1.0),
    );
    for l in [-1i32, 1] {
        let m = modulation::eigenmode(&g, l).unwrap();
        check(
            &mut c,
            &format!("L(phi_{l}) = {l} phi_{l}"),
            m.values.clone(),
            m.analytic_derivative.clone(),
            m.values.scaled(m.eigenvalue),
        );
    }
    (c.passed, c.details.join("; "))
}

fn criterion_4() -> (bool, String) {
    let traj = stability_fixture();
    let pol = acc();
    let mut c = Check::new();

    // mu* from the conserved curvature at the tracked maximum
    let last = traj.last_state();
    let (x_max, _) = grid::argmax_refined(&last, Some(0.0), &pol);
    let mu_star = -grid::interpolate_derivative(&last, x_max, 2, &pol).unwrap();
    c.require(
        (mu_star - 1.04).abs() <= 1e-3,
        format!("mu* = {mu_star:.6} vs 1.04 (tol 1e-3)"),
    );

    let target = GridFunction::sample(&traj.grid, |x| 1.04 * x.cos());
    let mut sup_series = Vec::new();
    let mut c1_series = Vec::new();
    for k in 0..traj.len() {
        let state = traj.state_at(k);
        let diff = state.sub(&target);
        let sup = diff.sup_norm();
        let c1 = sup.max(grid::derivative(&diff, 1, &pol).unwrap().sup_norm());
        sup_series.push((traj.times[k], sup));
        c1_series.push((traj.times[k], c1));
    }
    let fit_sup = weights::fit_decay(&sup_series, (2.0, 10.0), 0.45).unwrap();
    c.require(
        fit_sup.rate >= 0.45,
        format!("sup decay rate {:.3} (need >= 0.45)", fit_sup.rate),
    );
    let fit_c1 = weights::fit_decay(&c1_series, (2.0, 10.0), 0.40).unwrap();
    c.require(
        fit_c1.rate >= 0.40,
        format!("C1 decay rate {:.3} (need >= 0.40)", fit_c1.rate),
    );
    (c.passed, c.details.join("; "))
}

fn criterion_5() -> (bool, String) {
    let series = fixture_frames();
    let mut c = Check::new();

    let mut mu_drift: f64 = 0.0;
    let mut alpha1_resid: f64 = 0.0;
    for f in &series.frames {
        mu_drift = mu_drift.max(f.eta_origin[2].abs());
        let ixi = grid::integral(&f.xi, &acc());
        alpha1_resid = alpha1_resid.max((f.alpha_1 + ixi / (4.0 * PI)).abs());
    }
    c.require(
        mu_drift <= 1e-3,
        format!("relative mu drift {mu_drift:.2e} (tol 1e-3)"),
    );
    c.require(
        alpha1_resid <= 1e-6,
        format!("alpha_1 mean-identity residual {alpha1_resid:.2e} (tol 1e-6)"),
    );

    let res = modulation::modulation_residuals(series);
    let mut worst_m1: f64 = 0.0;
    let mut worst_1: f64 = 0.0;
    for (_, r_m1, r_1) in res {
        worst_m1 = worst_m1.max(r_m1.abs());
        worst_1 = worst_1.max(r_1.abs());
    }
    c.require(
        worst_m1 <= 1e-3 && worst_1 <= 1e-3,
        format!("modulation-equation residuals ({worst_m1:.2e}, {worst_1:.2e}) (tol 1e-3)"),
    );
    (c.passed, c.details.join("; "))
}

fn criterion_6() -> (bool, String) {
    let traj = stability_fixture();
    let report = characteristics::transported_report(traj, 0.0, &acc()).unwrap();
    let mut c = Check::new();
    c.require(
        report.dxa_drift <= 1e-4,
        format!("dx_a drift {:.2e} (tol 1e-4)", report.dxa_drift),
    );
    c.require(
        report.dxxa_drift <= 1e-3,
        format!("dxx_a drift {:.2e} (tol 1e-3)", report.dxxa_drift),
    );
    let gap = report.argmax_gap.unwrap_or(f64::INFINITY);
    c.require(gap <= 1e-6, format!("argmax gap {gap:.2e} (tol 1e-6)"));
    (c.passed, c.details.join("; "))
}

fn criterion_7() -> (bool, String) {
    let g = Grid::new(512).unwrap();
    let pol = acc();
    let spec = WeightSpec::w_theta(0.3, 12.0).with_default_exclusion(&g);
    let step = StepPolicy::default();
    let mut c = Check::new();

    for x_star_0 in [0.0, 0.05] {
        let u0 = GridFunction::sample(&g, |z| (z - x_star_0).sin().powi(3));
        for (name, variant) in [
            ("L0", LinearVariant::local(x_star_0)),
            ("L", LinearVariant::with_nonlocal(x_star_0)),
        ] {
            let traj = linear::evolve_linear(&variant, &u0, 6.0, &step, &pol, &spec).unwrap();
            let fit =
                weights::fit_decay(&traj.series.samples("weighted_sup"), (0.5, 6.0), 0.7).unwrap();
            c.require(
                fit.rate >= 0.7,
                format!("{name} x*0={x_star_0}: rate {:.3} (need >= 0.7)", fit.rate),
            );
        }
    }

    // quasilinearized problem driven by the reference run's perturbation
    let eta = FrameEtaSource::new(fixture_frames());
    let u0 = GridFunction::sample(&g, |z| z.sin().powi(3));
    let variant = LinearVariant::quasilinear(&eta, 0.0);
    let traj = linear::evolve_linear(&variant, &u0, 8.0, &step, &pol, &spec).unwrap();
    let fit = weights::fit_decay(&traj.series.samples("weighted_sup"), (0.5, 8.0), 0.5).unwrap();
    c.require(
        fit.rate >= 0.5,
        format!("QUASI: rate {:.3} (need >= 0.5)", fit.rate),
    );
    (c.passed, c.details.join("; "))
}

fn criterion_8() -> (bool, String) {
    let g = Grid::new(512).unwrap();
    let theta = 0.3;
    let spec = WeightSpec::w_theta(theta, 12.0).with_default_exclusion(&g);
    let pol = acc();
    let mut c = Check::new();
    let mut worst_ratio: f64 = 0.0;
    let mut all_ok = true;
    for f in weights::cubic_test_corpus(&g, 20) {
        let prim = grid::antiderivative_from(&f, IntegralBase::Center, &pol);
        let nl = GridFunction {
            grid: g.clone(),
            values: g
                .nodes()
                .iter()
                .zip(&prim.values)
                .map(|(&x, &p)| x.sin() * p)
                .collect(),
        };
        let lhs = weights::weighted_sup(&nl, &spec);
        let rhs = theta * weights::weighted_sup(&f, &spec);
        let ratio = lhs / rhs;
        worst_ratio = worst_ratio.max(ratio);
        if lhs > rhs * 1.05 {
            all_ok = false;
        }
    }
    c.require(
        all_ok,
        format!("20-function corpus: worst lhs/(theta rhs) = {worst_ratio:.3} (cap 1.05)"),
    );
    (c.passed, c.details.join("; "))
}

fn criterion_9() -> (bool, String) {
    let spec = CuspSpec {
        epsilon: 1.0,
        sigma: 1.0,
        support_radius: 0.05,
    };
    let pol = StepPolicy::default();
    let mut c = Check::new();

    let g1 = Grid::new(4096).unwrap();
    let main = characteristics::instability_experiment(&spec, 1e-2, &g1, &pol, &acc()).unwrap();
    c.require(
        main.identity_residual <= 1e-3,
        format!(
            "identity residual {:.2e} (tol 1e-3)",
            main.identity_residual
        ),
    );
    c.require(
        main.growth_factor >= 10.0,
        format!("gap growth factor {:.1} (need >= 10)", main.growth_factor),
    );
    c.require(
        main.z_max <= main.kappa0 * 1.001,
        format!("max |z| = {:.3} vs kappa0 = {}", main.z_max, main.kappa0),
    );
    c.require(
        (main.growth_rate - main.mean_gap_velocity).abs()
            <= 0.15 * main.mean_gap_velocity.abs(),
        format!(
            "rate {:.3} vs mean gap velocity {:.3} (15%)",
            main.growth_rate, main.mean_gap_velocity
        ),
    );

    // refinement sensitivity of the fitted rate
    let g2 = Grid::new(8192).unwrap();
    let refined = characteristics::instability_experiment(&spec, 1e-2, &g2, &pol, &acc()).unwrap();
    let delta = (refined.growth_rate - main.growth_rate).abs() / main.growth_rate.abs();
    c.details
        .push(format!("refinement delta {delta:.2e} (reported)"));

    // smaller z0 grows to a larger value at its own horizon; 3e-3 needs
    // 4h <= z0, hence the slightly finer odd-size grid
    let g3 = Grid::new(8400).unwrap();
    let small = characteristics::instability_experiment(&spec, 3e-3, &g3, &pol, &acc()).unwrap();
    c.require(
        small.identity_residual <= 1e-3,
        format!(
            "rerun identity residual {:.2e} (tol 1e-3)",
            small.identity_residual
        ),
    );
    let d_end_main = main.d_series.last().unwrap().1;
    let d_end_small = small.d_series.last().unwrap().1;
    c.require(
        d_end_small > d_end_main,
        format!(
            "gap at horizon grows as z0 shrinks: {d_end_small:.3e} (z0=3e-3) vs {d_end_main:.3e} (z0=1e-2)"
        ),
    );
    (c.passed, c.details.join("; "))
}

fn criterion_10() -> (bool, String) {
    let traj = ipm_fixture();
    let pol = StepPolicy::default();
    let report = ipm::detect_blowup(traj, &pol, &acc()).unwrap();
    let mut c = Check::new();
    c.require(
        report.status == BlowupStatus::Blowup,
        format!(
            "status {:?}, tau* = {:.6}, residual {:.2e}",
            report.status, report.tau_star, report.fit_residual
        ),
    );

    // (tau* - tau) * b at the tracked maximum within [0.97, 1.03]
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for (k, &tau) in traj.taus.iter().enumerate() {
        if tau < report.window.0 || tau > report.window.1 {
            continue;
        }
        let state = traj.state_at(k);
        let (_, peak) = grid::argmax_refined(&state.b, Some(report.x_shift), &acc());
        let p = (report.tau_star - tau) * peak;
        lo = lo.min(p);
        hi = hi.max(p);
    }
    c.require(
        lo >= 0.97 && hi <= 1.03,
        format!("(tau*-tau) b(max) in [{lo:.4}, {hi:.4}] (need [0.97, 1.03])"),
    );

    // Remainder trend over the last decade of resolved times. The measured
    // profile error is U-shaped: the physical remainder decays toward tau*
    // while the uncertainty of the fitted tau* contributes |d tau*| sup|b|,
    // which grows. Times are profile-resolved up to the minimum; the trend
    // is checked on the decade ending there.
    let (tau_min, _) = report
        .profile_error
        .iter()
        .copied()
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .unwrap_or((report.window.1, 0.0));
    let d_min = (report.tau_star - tau_min).max(1e-12);
    let last_decade: Vec<(f64, f64)> = report
        .profile_error
        .iter()
        .filter(|(tau, _)| {
            let d = report.tau_star - tau;
            d >= d_min && d <= 10.0 * d_min
        })
        .map(|&(tau, e)| (tau, e * (report.tau_star - tau).powf(0.75)))
        .collect();
    if last_decade.len() >= 4 {
        let first = last_decade.first().unwrap().1;
        let last = last_decade.last().unwrap().1;
        // least-squares slope
        let n = last_decade.len() as f64;
        let (mut st, mut sy, mut stt, mut sty) = (0.0, 0.0, 0.0, 0.0);
        for &(t, y) in &last_decade {
            st += t;
            sy += y;
            stt += t * t;
            sty += t * y;
        }
        let slope = (n * sty - st * sy) / (n * stt - st * st);
        c.require(
            slope <= 0.0 && last <= first,
            format!(
                "remainder trend: slope {slope:.2e}, endpoints {first:.2e} -> {last:.2e} (non-increasing)"
            ),
        );
    } else {
        c.require(false, "too few profile samples in the last decade".into());
    }
    (c.passed, c.details.join("; "))
}

fn criterion_11() -> (bool, String) {
    let a_traj = stability_fixture();
    let rec = ipm::reconstruct_nu(a_traj, 1.0, &acc()).unwrap();
    let mut c = Check::new();
    c.require(
        (rec.rate - 1.04).abs() <= 1e-2,
        format!("fitted rate {:.4} vs 1.04 (tol 1e-2)", rec.rate),
    );

    // compare against the nu carried by the blow-up run, as a function of
    // the accumulated time
    let traj = ipm_fixture();
    let mut worst: f64 = 0.0;
    let t_max = traj.t_accum.last().copied().unwrap_or(0.0).min(12.0);
    for (k, &t) in rec.t.iter().enumerate() {
        if t > t_max {
            break;
        }
        // locate t in the accumulated-time grid of the blow-up run
        let idx = match traj
            .t_accum
            .binary_search_by(|probe| probe.partial_cmp(&t).unwrap())
        {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1).min(traj.t_accum.len() - 2),
        };
        let (t0, t1) = (traj.t_accum[idx], traj.t_accum[idx + 1]);
        let w = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
        let nu_ipm = traj.nu[idx] * (1.0 - w) + traj.nu[idx + 1] * w;
        worst = worst.max((rec.nu[k] - nu_ipm).abs() / nu_ipm);
    }
    c.require(
        worst <= 0.02,
        format!("max relative nu mismatch {worst:.2e} on the shared window (tol 2%)"),
    );
    (c.passed, c.details.join("; "))
}

fn criterion_12() -> (bool, String) {
    let g = Grid::new(1024).unwrap();
    let pol = acc();
    let mut c = Check::new();

    // 30 true members: both families, k up to 5, three amplitudes
    let corpus = steady::steady_corpus(&g, 5, &[0.1, 1.0, 10.0]);
    assert_eq!(corpus.len(), 30);
    let mut correct = 0;
    for (family, k, mu, f) in &corpus {
        let m = steady::classify_steady(f, 1e-6, &pol).unwrap();
        if m.family == *family && m.k == *k && (m.mu - mu).abs() <= 1e-6 {
            correct += 1;
        }
    }
    c.require(
        correct == corpus.len(),
        format!("{correct}/{} family members classified", corpus.len()),
    );

    // 10 non-steady functions
    let non_steady: Vec<GridFunction> = (0..10)
        .map(|i| {
            let k = 1.0 + (i % 3) as f64;
            let amp = 0.1 + 0.05 * i as f64;
            GridFunction::sample(&g, move |x| {
                x.cos() + amp * ((k + 1.0) * x).cos() + 0.5 * amp * (k * x).sin()
            })
        })
        .collect();
    let mut rejected = 0;
    for f in &non_steady {
        let m = steady::classify_steady(f, 1e-6, &pol).unwrap();
        if m.family == SteadyFamily::NotSteady {
            rejected += 1;
        }
    }
    c.require(
        rejected == non_steady.len(),
        format!("{rejected}/{} non-steady functions rejected", non_steady.len()),
    );
    (c.passed, c.details.join("; "))
}

pub fn run_criterion(id: u32) -> CriterionResult {
    let name = CRITERIA
        .iter()
        .find(|(i, _)| *i == id)
        .map(|(_, n)| *n)
        .unwrap_or("unknown");
    let start = Instant::now();
    let (passed, details) = match id {
        1 => criterion_1(),
        2 => criterion_2(),
        3 => criterion_3(),
        4 => criterion_4(),
        5 => criterion_5(),
        6 => criterion_6(),
        7 => criterion_7(),
        8 => criterion_8(),
        9 => criterion_9(),
        10 => criterion_10(),
        11 => criterion_11(),
        12 => criterion_12(),
        _ => (false, format!("unknown criterion {id}")),
    };
    CriterionResult {
        id,
        name,
        passed,
        details,
        seconds: start.elapsed().as_secs_f64(),
    }
}

pub fn run_all() -> Vec<CriterionResult> {
    CRITERIA.iter().map(|(id, _)| run_criterion(*id)).collect()
}
