//! Numerical oracle for the classification of stationary states: residual
//! evaluation of the stationary equation and matching against the two
//! closed-form families mu cos(k x) and mu sin((2k+1) x / 2).

use serde::Serialize;

use crate::error::Result;
use crate::grid::{AccuracyPolicy, GridFunction};
use crate::pj;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SteadyFamily {
    CosK,
    SinHalfK,
    Zero,
    NotSteady,
}

#[derive(Clone, Debug, Serialize)]
pub struct SteadyMatch {
    pub family: SteadyFamily,
    pub k: usize,
    pub mu: f64,
    pub residual: f64,
    /// Sup distance to the fitted family member.
    pub match_error: f64,
}

/// Sup norm of (int_{-pi}^x a) dx_a - a^2 + (1/pi) int a^2.
pub fn stationary_residual(a: &GridFunction, policy: &AccuracyPolicy) -> Result<f64> {
    pj::check_mean_free(a, 1e-6)?;
    let (rhs, _) = pj::pj_rhs_unchecked(a, policy);
    Ok(rhs.sup_norm())
}

/// Trapezoid inner product; exact for the trigonometric products that arise
/// from the two families.
fn inner(a: &GridFunction, b: impl Fn(f64) -> f64) -> f64 {
    let n = a.grid.n();
    let h = a.grid.h();
    let nodes = a.grid.nodes();
    let mut s = 0.5 * (a.values[0] * b(nodes[0]) + a.values[n] * b(nodes[n]));
    for j in 1..n {
        s += a.values[j] * b(nodes[j]);
    }
    s * h
}

/// Fit (family, k, mu) by maximizing the normalized inner product over both
/// families for k <= n/8, then verify the sup distance and the stationary
/// residual. The residual threshold is scaled by the quadratic amplitude of
/// the data, the natural size of the stationary equation.
pub fn classify_steady(
    a: &GridFunction,
    tol: f64,
    policy: &AccuracyPolicy,
) -> Result<SteadyMatch> {
    pj::check_mean_free(a, 1e-6)?;
    let residual = stationary_residual(a, policy)?;
    let sup = a.sup_norm();
    if sup <= tol {
        return Ok(SteadyMatch {
            family: SteadyFamily::Zero,
            k: 0,
            mu: 0.0,
            residual,
            match_error: sup,
        });
    }

    let a_l2 = {
        let n = a.grid.n();
        let h = a.grid.h();
        let mut s = 0.5 * (a.values[0] * a.values[0] + a.values[n] * a.values[n]);
        for j in 1..n {
            s += a.values[j] * a.values[j];
        }
        (s * h).sqrt()
    };

    const PI_NORM: f64 = std::f64::consts::PI; // both families have L2 norm sqrt(pi)
    let kmax = a.grid.n() / 8;
    let mut best: Option<(SteadyFamily, usize, f64, f64)> = None;
    for k in 1..=kmax {
        let kk = k as f64;
        let ip = inner(a, move |x| (kk * x).cos());
        let corr = ip.abs() / (a_l2 * PI_NORM.sqrt());
        let mu = ip / PI_NORM;
        if best.is_none() || corr > best.as_ref().unwrap().3 {
            best = Some((SteadyFamily::CosK, k, mu, corr));
        }
    }
    for k in 0..=kmax {
        let half = (2 * k + 1) as f64 / 2.0;
        let ip = inner(a, move |x| (half * x).sin());
        let corr = ip.abs() / (a_l2 * PI_NORM.sqrt());
        let mu = ip / PI_NORM;
        if best.is_none() || corr > best.as_ref().unwrap().3 {
            best = Some((SteadyFamily::SinHalfK, k, mu, corr));
        }
    }

    let (family, k, mu, _) = best.expect("kmax >= 2");
    let candidate = match family {
        SteadyFamily::CosK => GridFunction::sample(&a.grid, |x| mu * (k as f64 * x).cos()),
        SteadyFamily::SinHalfK => {
            GridFunction::sample(&a.grid, |x| mu * ((2 * k + 1) as f64 / 2.0 * x).sin())
        }
        _ => unreachable!(),
    };
    let match_error = a.sup_distance(&candidate);
    let scale = sup.powi(2).max(1.0);
    if match_error <= tol && residual <= tol * scale {
        Ok(SteadyMatch {
            family,
            k,
            mu,
            residual,
            match_error,
        })
    } else {
        Ok(SteadyMatch {
            family: SteadyFamily::NotSteady,
            k: 0,
            mu: 0.0,
            residual,
            match_error,
        })
    }
}

/// Deterministic steady corpus: both families, k <= kmax, the given
/// amplitudes.
pub fn steady_corpus(
    grid: &crate::grid::Grid,
    kmax: usize,
    amplitudes: &[f64],
) -> Vec<(SteadyFamily, usize, f64, GridFunction)> {
    let mut out = Vec::new();
    for &mu in amplitudes {
        for k in 1..=kmax {
            out.push((
                SteadyFamily::CosK,
                k,
                mu,
                GridFunction::sample(grid, move |x| mu * (k as f64 * x).cos()),
            ));
        }
        for k in 0..kmax {
            out.push((
                SteadyFamily::SinHalfK,
                k,
                mu,
                GridFunction::sample(grid, move |x| mu * ((2 * k + 1) as f64 / 2.0 * x).sin()),
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    fn acc() -> AccuracyPolicy {
        AccuracyPolicy::default()
    }

    #[test]
    fn residual_examples() {
        let g = Grid::new(512).unwrap();
        let r = stationary_residual(&GridFunction::sample(&g, |x| (2.0 * x).cos()), &acc())
            .unwrap();
        assert!(r <= 1e-8, "{r}");
        let r = stationary_residual(&GridFunction::sample(&g, |x| (0.5 * x).sin()), &acc())
            .unwrap();
        assert!(r <= 1e-8, "{r}");
        let r = stationary_residual(
            &GridFunction::sample(&g, |x| x.cos() + 0.1 * (2.0 * x).sin()),
            &acc(),
        )
        .unwrap();
        assert!(r >= 0.05, "{r}");
    }

    #[test]
    fn classification_examples() {
        let g = Grid::new(512).unwrap();
        let tol = 1e-6;
        let m = classify_steady(
            &GridFunction::sample(&g, |x| 3.0 * (2.0 * x).cos()),
            tol,
            &acc(),
        )
        .unwrap();
        assert_eq!(m.family, SteadyFamily::CosK);
        assert_eq!(m.k, 2);
        assert!((m.mu - 3.0).abs() <= 1e-6);

        let m = classify_steady(
            &GridFunction::sample(&g, |x| -0.5 * (1.5 * x).sin()),
            tol,
            &acc(),
        )
        .unwrap();
        assert_eq!(m.family, SteadyFamily::SinHalfK);
        assert_eq!(m.k, 1);
        assert!((m.mu + 0.5).abs() <= 1e-6);

        let m = classify_steady(
            &GridFunction::sample(&g, |x| x.cos() + 0.2 * (3.0 * x).cos()),
            tol,
            &acc(),
        )
        .unwrap();
        assert_eq!(m.family, SteadyFamily::NotSteady);

        let m = classify_steady(&GridFunction::zeros(&g), tol, &acc()).unwrap();
        assert_eq!(m.family, SteadyFamily::Zero);
    }

    #[test]
    fn completeness_on_the_family_corpus() {
        let g = Grid::new(1024).unwrap();
        for (family, k, mu, f) in steady_corpus(&g, 8, &[0.1, 1.0, 10.0]) {
            let m = classify_steady(&f, 1e-6, &acc()).unwrap();
            assert_eq!(m.family, family, "k={k} mu={mu}");
            assert_eq!(m.k, k, "family {family:?} mu={mu}");
            assert!((m.mu - mu).abs() <= 1e-6, "{} vs {mu}", m.mu);
        }
    }

    #[test]
    fn soundness_on_non_steady_data() {
        let g = Grid::new(512).unwrap();
        let tol = 1e-6;
        let corpus: Vec<GridFunction> = vec![
            GridFunction::sample(&g, |x| x.cos() + 0.1 * (2.0 * x).sin()),
            GridFunction::sample(&g, |x| x.cos() + 0.2 * (3.0 * x).cos()),
            GridFunction::sample(&g, |x| x.sin() + 0.3 * (2.0 * x).sin()),
            GridFunction::sample(&g, |x| (0.5 * x).sin() + 0.2 * x.cos()),
        ];
        for f in corpus {
            let m = classify_steady(&f, tol, &acc()).unwrap();
            let r = stationary_residual(&f, &acc()).unwrap();
            assert!(r > 10.0 * tol);
            assert_eq!(m.family, SteadyFamily::NotSteady);
        }
    }

    #[test]
    fn scaling_covariance() {
        let g = Grid::new(512).unwrap();
        let f = GridFunction::sample(&g, |x| (2.5 * x).sin());
        let m1 = classify_steady(&f, 1e-6, &acc()).unwrap();
        let m2 = classify_steady(&f.scaled(7.0), 1e-6, &acc()).unwrap();
        assert_eq!(m1.family, m2.family);
        assert_eq!(m1.k, m2.k);
        // the inner-product fit is linear in the data (up to FP rounding)
        assert!((m2.mu - 7.0 * m1.mu).abs() <= 1e-14 * m2.mu.abs());
    }
}
