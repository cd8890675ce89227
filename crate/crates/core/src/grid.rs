//! Uniform closed grid on [-pi, pi] with high-order finite differences,
//! cumulative quadrature and local polynomial interpolation.
//!
//! The grid is deliberately non-periodic: both endpoints are stored and all
//! stencils are one-sided near the boundary, so functions with a jump in the
//! periodic extension (e.g. the half-integer sine modes) are handled exactly
//! as functions on the closed interval.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Closed uniform grid x_j = -pi + j*h, j = 0..=n, h = 2*pi/n.
#[derive(Clone, Debug)]
pub struct Grid {
    n: usize,
    h: f64,
    nodes: Arc<[f64]>,
}

impl Grid {
    /// Build a grid with n cells (n even, n >= 16). The endpoints and the
    /// midpoint come out exactly as -pi, pi and 0.
    pub fn new(n: usize) -> Result<Self> {
        if n % 2 != 0 {
            return Err(Error::OddGridSize(n));
        }
        if n < 16 {
            return Err(Error::GridTooCoarse(n));
        }
        let nodes: Vec<f64> = (0..=n)
            .map(|j| PI * (2.0 * j as f64 - n as f64) / n as f64)
            .collect();
        Ok(Self {
            n,
            h: 2.0 * PI / n as f64,
            nodes: nodes.into(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn node(&self, j: usize) -> f64 {
        self.nodes[j]
    }

    /// Number of stored nodes (n + 1).
    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of the node at x = 0.
    pub fn center(&self) -> usize {
        self.n / 2
    }

    pub fn base_index(&self, base: IntegralBase) -> usize {
        match base {
            IntegralBase::LeftEnd => 0,
            IntegralBase::Center => self.center(),
        }
    }

    /// Two grids are compatible when they have the same resolution.
    pub fn same_as(&self, other: &Grid) -> bool {
        self.n == other.n
    }
}

/// Base point for cumulative integrals: x = -pi or x = 0 (both grid nodes).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IntegralBase {
    LeftEnd,
    Center,
}

/// Real samples on a grid.
#[derive(Clone, Debug)]
pub struct GridFunction {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "values length {} does not match grid ({} nodes)",
                values.len(),
                grid.len()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("GridFunction::new"));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![0.0; grid.len()],
        }
    }

    pub fn sample(grid: &Grid, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: grid.clone(),
            values: grid.nodes().iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Nodewise a*x + y, returning a new function on the same grid.
    pub fn axpy(&self, a: f64, y: &GridFunction) -> GridFunction {
        debug_assert!(self.grid.same_as(&y.grid));
        let values = self
            .values
            .iter()
            .zip(&y.values)
            .map(|(u, v)| a * u + v)
            .collect();
        GridFunction {
            grid: self.grid.clone(),
            values,
        }
    }

    pub fn scaled(&self, a: f64) -> GridFunction {
        GridFunction {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| a * v).collect(),
        }
    }

    pub fn sub(&self, other: &GridFunction) -> GridFunction {
        debug_assert!(self.grid.same_as(&other.grid));
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        GridFunction {
            grid: self.grid.clone(),
            values,
        }
    }

    /// Max nodewise distance to another grid function.
    pub fn sup_distance(&self, other: &GridFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Finite-difference / quadrature / interpolation orders.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AccuracyPolicy {
    pub diff_order: usize,
    pub quad_order: usize,
    pub interp_order: usize,
}

impl Default for AccuracyPolicy {
    fn default() -> Self {
        Self {
            diff_order: 6,
            quad_order: 6,
            interp_order: 6,
        }
    }
}

impl AccuracyPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.diff_order != 4 && self.diff_order != 6 {
            return Err(Error::BadAccuracyOrder(self.diff_order));
        }
        if self.quad_order < 4 || self.interp_order < 4 {
            return Err(Error::BadAccuracyOrder(self.quad_order.min(self.interp_order)));
        }
        Ok(())
    }
}

/// Fornberg weights: coefficients w_i such that f^(m)(z) ~ sum_i w_i f(x_i)
/// for arbitrary nodes x_i. Generation of finite difference formulas on
/// arbitrarily spaced grids, Math. Comp. 51 (1988).
fn fd_weights(z: f64, x: &[f64], m: usize) -> Vec<f64> {
    let nd = x.len();
    let cols = m + 1;
    let mut c = vec![0.0f64; nd * cols];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0] = 1.0;
    for i in 1..nd {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i * cols + k] =
                        c1 * (k as f64 * c[(i - 1) * cols + k - 1] - c5 * c[(i - 1) * cols + k]) / c2;
                }
                c[i * cols] = -c1 * c5 * c[(i - 1) * cols] / c2;
            }
            for k in (1..=mn).rev() {
                c[j * cols + k] = (c4 * c[j * cols + k] - k as f64 * c[j * cols + k - 1]) / c3;
            }
            c[j * cols] = c4 * c[j * cols] / c3;
        }
        c1 = c2;
    }
    (0..nd).map(|i| c[i * cols + m]).collect()
}

/// Stencil width for derivative order m at accuracy `acc`.
/// Centered stencils in the interior, one-sided (same order) at the boundary.
fn stencil_width(m: usize, acc: usize) -> usize {
    match m {
        1 => acc + 1,
        2 => acc + 2,
        3 => acc + 3,
        _ => unreachable!(),
    }
}

/// Differentiate a grid function (order 1..=3) with stencils of
/// `policy.diff_order` accuracy. Weights sum to zero exactly, so constants
/// map to exactly zero.
pub fn derivative(f: &GridFunction, m: usize, policy: &AccuracyPolicy) -> Result<GridFunction> {
    if m == 0 || m > 3 {
        return Err(Error::BadDerivativeOrder(m));
    }
    policy.validate()?;
    let grid = &f.grid;
    let n = grid.n();
    if policy.diff_order > n / 4 {
        return Err(Error::StencilTooWide {
            n,
            needed: 4 * policy.diff_order,
        });
    }
    let npts = stencil_width(m, policy.diff_order);
    if npts > grid.len() {
        return Err(Error::StencilTooWide { n, needed: npts });
    }
    let half = (npts - 1) / 2;
    let hm = grid.h().powi(m as i32);

    // Weight vectors depend only on the offset of the node inside its window.
    let mut cache: Vec<Option<Vec<f64>>> = vec![None; npts];
    let mut out = vec![0.0; grid.len()];
    for j in 0..grid.len() {
        let ws = j
            .saturating_sub(half)
            .min(grid.len() - npts);
        let d = j - ws;
        if cache[d].is_none() {
            let offsets: Vec<f64> = (0..npts).map(|k| k as f64 - d as f64).collect();
            cache[d] = Some(fd_weights(0.0, &offsets, m));
        }
        let w = cache[d].as_ref().unwrap();
        // difference form: exact zero for constants, better conditioned
        let fj = f.values[j];
        let mut acc = 0.0;
        for (k, wk) in w.iter().enumerate() {
            acc += wk * (f.values[ws + k] - fj);
        }
        out[j] = acc / hm;
    }
    Ok(GridFunction {
        grid: grid.clone(),
        values: out,
    })
}

/// 5-point Gauss-Legendre rule on [0, 1]; exact for degree <= 9.
const GL5: [(f64, f64); 5] = [
    (0.046_910_077_030_668_02, 0.118_463_442_528_094_54),
    (0.230_765_344_947_158_45, 0.239_314_335_249_683_23),
    (0.5, 0.284_444_444_444_444_44),
    (0.769_234_655_052_841_5, 0.239_314_335_249_683_23),
    (0.953_089_922_969_331_9, 0.118_463_442_528_094_54),
];

/// Integral of the Lagrange basis polynomial through `npts` unit-spaced nodes
/// over the cell [d, d+1], for each basis index.
fn cell_weights(npts: usize, d: usize) -> Vec<f64> {
    let mut w = vec![0.0; npts];
    for &(q, gw) in GL5.iter() {
        let xi = d as f64 + q;
        for (k, wk) in w.iter_mut().enumerate() {
            let mut l = 1.0;
            for i in 0..npts {
                if i != k {
                    l *= (xi - i as f64) / (k as f64 - i as f64);
                }
            }
            *wk += gw * l;
        }
    }
    w
}

/// Per-cell integrals of the degree-(quad_order) interpolant, i.e. a
/// composite interpolatory rule with boundary windows of matching order.
fn cell_integrals(f: &GridFunction, policy: &AccuracyPolicy) -> Vec<f64> {
    let grid = &f.grid;
    let n = grid.n();
    let npts = (policy.quad_order + 1).min(grid.len());
    let mut cache: Vec<Option<Vec<f64>>> = vec![None; npts];
    let mut cells = vec![0.0; n];
    for (j, cell) in cells.iter_mut().enumerate() {
        let ws = j
            .saturating_sub((npts - 2) / 2)
            .min(grid.len() - npts);
        let d = j - ws;
        if cache[d].is_none() {
            cache[d] = Some(cell_weights(npts, d));
        }
        let w = cache[d].as_ref().unwrap();
        let mut acc = 0.0;
        for (k, wk) in w.iter().enumerate() {
            acc += wk * f.values[ws + k];
        }
        *cell = acc * grid.h();
    }
    cells
}

/// Cumulative primitive F with F(base) = 0 and F' ~ f, built in O(n) by
/// accumulating per-cell integrals of `quad_order` accuracy.
pub fn antiderivative_from(
    f: &GridFunction,
    base: IntegralBase,
    policy: &AccuracyPolicy,
) -> GridFunction {
    let grid = &f.grid;
    let cells = cell_integrals(f, policy);
    let mut out = vec![0.0; grid.len()];
    for j in 1..grid.len() {
        out[j] = out[j - 1] + cells[j - 1];
    }
    let b = out[grid.base_index(base)];
    for v in out.iter_mut() {
        *v -= b;
    }
    GridFunction {
        grid: grid.clone(),
        values: out,
    }
}

/// Full-interval integral by the composite interpolatory rule. Preferred for
/// integrands that are not 2*pi-periodic.
pub fn integral(f: &GridFunction, policy: &AccuracyPolicy) -> f64 {
    cell_integrals(f, policy).iter().sum()
}

/// Mean (1/2pi) * int_{-pi}^{pi} f by the closed trapezoid rule.
///
/// On this grid the trapezoid rule integrates every integer trigonometric
/// polynomial of degree < n exactly, which is what the mean-free bookkeeping
/// of the solvers relies on. For non-periodic integrands use `integral`.
pub fn mean(f: &GridFunction) -> f64 {
    let n = f.grid.n();
    let mut s = 0.5 * (f.values[0] + f.values[n]);
    for v in &f.values[1..n] {
        s += v;
    }
    s * f.grid.h() / (2.0 * PI)
}

/// Local polynomial interpolation of `interp_order` at x in [-pi, pi].
/// Reproduces nodal values exactly.
pub fn interpolate(f: &GridFunction, x: f64, policy: &AccuracyPolicy) -> Result<f64> {
    if !(x >= -PI - 1e-12 && x <= PI + 1e-12) {
        return Err(Error::OutOfDomain(x));
    }
    Ok(interpolate_clamped(f, x.clamp(-PI, PI), policy))
}

/// Interpolation helper without the domain check; x must be in [-pi, pi].
pub(crate) fn interpolate_clamped(f: &GridFunction, x: f64, policy: &AccuracyPolicy) -> f64 {
    let grid = &f.grid;
    let h = grid.h();
    let pos = (x + PI) / h;
    let j = (pos.round() as isize).clamp(0, grid.n() as isize) as usize;
    // exact at nodes
    if (x - grid.node(j)).abs() < 1e-13 * (1.0 + x.abs()) {
        return f.values[j];
    }
    let npts = (policy.interp_order + 1).min(grid.len());
    let half = (npts - 1) / 2;
    let ws = (pos.floor() as isize - half as isize)
        .clamp(0, (grid.len() - npts) as isize) as usize;
    // Newton-free Lagrange evaluation over the local window
    let mut acc = 0.0;
    for k in 0..npts {
        let xk = grid.node(ws + k);
        let mut l = 1.0;
        for i in 0..npts {
            if i != k {
                let xi = grid.node(ws + i);
                l *= (x - xi) / (xk - xi);
            }
        }
        acc += l * f.values[ws + k];
    }
    acc
}

/// Interpolate treating f as 2*pi-periodic: the argument is folded into
/// [-pi, pi). Used when a shifted window extends past the stored interval.
pub fn interpolate_periodic(f: &GridFunction, x: f64, policy: &AccuracyPolicy) -> f64 {
    let mut y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y < -PI {
        y = -PI;
    }
    interpolate_clamped(f, y, policy)
}

/// Damp grid-scale oscillations with an 8th-difference filter:
/// u_j -= strength/256 * (delta^8 u)_j. The outermost 4 nodes and a window
/// of 8 nodes around `center` are left untouched (boundary stencils would
/// lose symmetry there, and limited-regularity features are placed at the
/// center by construction). O(h^8) on resolved modes.
pub(crate) fn damp_grid_modes(values: &mut [f64], center: usize, strength: f64) {
    if strength <= 0.0 || values.len() < 17 {
        return;
    }
    const C: [f64; 9] = [1.0, -8.0, 28.0, -56.0, 70.0, -56.0, 28.0, -8.0, 1.0];
    let n = values.len() - 1;
    let old = values.to_vec();
    let s = strength / 256.0;
    for j in 4..=n - 4 {
        if j.abs_diff(center) <= 8 {
            continue;
        }
        let mut d8 = 0.0;
        for (i, c) in C.iter().enumerate() {
            d8 += c * old[j + i - 4];
        }
        values[j] -= s * d8;
    }
}

/// Nodal argmax refined by Newton steps on the interpolated derivative.
/// Returns (location, interpolated value). `near` biases the nodal search to
/// the closest local maximum when provided (for continuity of tracking).
pub fn argmax_refined(f: &GridFunction, near: Option<f64>, policy: &AccuracyPolicy) -> (f64, f64) {
    let grid = &f.grid;
    let j0 = match near {
        None => {
            let mut jm = 0;
            for (j, v) in f.values.iter().enumerate() {
                if *v > f.values[jm] {
                    jm = j;
                }
            }
            jm
        }
        Some(x_prev) => {
            // hill-climb from the node nearest to the previous location
            let mut j = (((x_prev + PI) / grid.h()).round() as isize)
                .clamp(0, grid.n() as isize) as usize;
            loop {
                let up = j < grid.n() && f.values[j + 1] > f.values[j];
                let down = j > 0 && f.values[j - 1] > f.values[j];
                match (up, down) {
                    (true, false) => j += 1,
                    (false, true) => j -= 1,
                    (true, true) => {
                        if f.values[j + 1] >= f.values[j - 1] {
                            j += 1
                        } else {
                            j -= 1
                        }
                    }
                    (false, false) => break,
                }
            }
            j
        }
    };
    let mut x = grid.node(j0);
    if j0 == 0 || j0 == grid.n() {
        return (x, f.values[j0]);
    }
    for _ in 0..3 {
        let d1 = interpolate_derivative(f, x, 1, policy).unwrap_or(0.0);
        let d2 = interpolate_derivative(f, x, 2, policy).unwrap_or(-1.0);
        if d2 >= 0.0 {
            break;
        }
        let step = (d1 / d2).clamp(-grid.h(), grid.h());
        x -= step;
        if step.abs() < 1e-15 {
            break;
        }
    }
    let x = x.clamp(grid.node(j0) - grid.h(), grid.node(j0) + grid.h());
    (x, interpolate_clamped(f, x, policy))
}

/// Derivative of the local interpolant at an off-grid point (same window
/// logic as `interpolate`); m in 1..=2.
pub fn interpolate_derivative(
    f: &GridFunction,
    x: f64,
    m: usize,
    policy: &AccuracyPolicy,
) -> Result<f64> {
    let grid = &f.grid;
    if !(x >= -PI - 1e-12 && x <= PI + 1e-12) {
        return Err(Error::OutOfDomain(x));
    }
    let x = x.clamp(-PI, PI);
    let h = grid.h();
    let npts = (policy.interp_order + 1).min(grid.len());
    let half = (npts - 1) / 2;
    let pos = (x + PI) / h;
    let ws = (pos.floor() as isize - half as isize)
        .clamp(0, (grid.len() - npts) as isize) as usize;
    let offsets: Vec<f64> = (0..npts).map(|k| grid.node(ws + k)).collect();
    let w = fd_weights(x, &offsets, m);
    let mut acc = 0.0;
    for (k, wk) in w.iter().enumerate() {
        acc += wk * f.values[ws + k];
    }
    Ok(acc)
}
