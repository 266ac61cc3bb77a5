//! The three oscillatory kernels of the harmonic dynamics
//!
//! ```text
//! H_t^(m)(x) = (2 pi)^-d  Re|Im  int_{T^d} gamma(k)^m exp(i (k.x - 2 t gamma(k))) dk,   m in {-1, 0, 1}
//! ```
//!
//! (real part for `m = 0`, imaginary part for `m = +-1`), evaluated with the
//! periodic trapezoid rule. On an `N`-point grid the rule is exactly an
//! inverse DFT, so one transform gives every site of a box at once. The grid
//! is doubled until two successive resolutions agree on the whole box.
//!
//! The remaining functions are independent cross-checks: the leading-order
//! stationary-phase asymptotics, the Bessel closed form of the `omega = 0`
//! chain, and the complex-Gaussian integral with a quadratic phase.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftDirection;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fft;
use crate::lattice::{box_index, box_sites, LatticeSite};
use crate::model::ModelParams;

/// Upper limit on the number of grid points of a single transform (256 MiB of
/// complex doubles).
pub const MAX_GRID_POINTS: usize = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureSpec {
    /// Minimum points per dimension; a power of two, at least 16.
    pub base_points: usize,
    /// Absolute stop criterion on the max-norm change between resolutions.
    pub tolerance: f64,
    pub max_doublings: u32,
    /// Grow the starting resolution with `|t|` so the grid resolves the light cone.
    pub auto_scale: bool,
    /// Kernel magnitude on the outermost shell below which a convolution may
    /// be truncated.
    pub truncation_tolerance: f64,
    pub max_truncation_radius: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            base_points: 64,
            tolerance: 1e-12,
            max_doublings: 8,
            auto_scale: true,
            truncation_tolerance: 1e-12,
            max_truncation_radius: 4096,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.base_points < 16 || !self.base_points.is_power_of_two() {
            return Err(Error::InvalidQuadrature(format!(
                "base_points must be a power of two >= 16, got {}",
                self.base_points
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidQuadrature(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_doublings == 0 || self.max_doublings > 12 {
            return Err(Error::InvalidQuadrature(format!(
                "max_doublings must be in 1..=12, got {}",
                self.max_doublings
            )));
        }
        if !(self.truncation_tolerance > 0.0) {
            return Err(Error::InvalidQuadrature(format!(
                "truncation_tolerance must be positive, got {}",
                self.truncation_tolerance
            )));
        }
        Ok(())
    }
}

/// Power `m` of `gamma` in the kernel integrand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum KernelIndex {
    Minus,
    Zero,
    Plus,
}

impl KernelIndex {
    pub const ALL: [KernelIndex; 3] = [KernelIndex::Minus, KernelIndex::Zero, KernelIndex::Plus];

    pub fn order(self) -> i32 {
        match self {
            KernelIndex::Minus => -1,
            KernelIndex::Zero => 0,
            KernelIndex::Plus => 1,
        }
    }

    fn slot(self) -> usize {
        (self.order() + 1) as usize
    }
}

impl TryFrom<i32> for KernelIndex {
    type Error = Error;

    fn try_from(m: i32) -> Result<Self> {
        match m {
            -1 => Ok(KernelIndex::Minus),
            0 => Ok(KernelIndex::Zero),
            1 => Ok(KernelIndex::Plus),
            _ => Err(Error::InvalidInput(format!(
                "kernel index must be -1, 0 or 1, got {m}"
            ))),
        }
    }
}

/// All three kernels on the box `[-radius, radius]^d` at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTable {
    params: ModelParams,
    t: f64,
    radius: usize,
    values: [Vec<f64>; 3],
    resolution: usize,
    est_error: f64,
}

impl KernelTable {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    /// Points per dimension of the grid that produced the values.
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Last inter-resolution max-norm change; infinite for fixed-resolution tables.
    pub fn est_error(&self) -> f64 {
        self.est_error
    }

    /// `H_t^(m)(x)`, or `None` outside the box.
    pub fn get(&self, m: KernelIndex, x: &[i64]) -> Option<f64> {
        box_index(x, self.radius).map(|i| self.values[m.slot()][i])
    }

    /// Like [`get`](Self::get) but zero outside the box.
    pub fn value(&self, m: KernelIndex, x: &[i64]) -> f64 {
        self.get(m, x).unwrap_or(0.0)
    }

    /// Values of one kernel in row-major box order.
    pub fn values(&self, m: KernelIndex) -> &[f64] {
        &self.values[m.slot()]
    }

    pub fn sites(&self) -> impl Iterator<Item = LatticeSite> {
        box_sites(self.params.d(), self.radius)
    }

    /// `sum_m |H_t^(m)(x)|` at box position `i`.
    pub fn abs_sum_at(&self, i: usize) -> f64 {
        self.values.iter().map(|v| v[i].abs()).sum()
    }

    /// Largest `sum_m |H_t^(m)(x)|` over the sites with `|x|_inf = shell`.
    pub fn shell_max(&self, shell: usize) -> f64 {
        self.sites()
            .enumerate()
            .filter(|(_, s)| s.linf_norm() as usize == shell)
            .map(|(i, _)| self.abs_sum_at(i))
            .fold(0.0, f64::max)
    }
}

/// Starting points per dimension for a box of half-width `radius` at time `t`.
///
/// The trapezoid sum on `N` points returns the kernel summed over the images
/// `x + N n`. Beyond the light cone `|x_j| > 2 |t| v` the kernel decays
/// faster than any power, so `N` is chosen to keep the nearest image of every
/// box site at least a cone radius plus an Airy-layer margin away.
pub fn initial_resolution(
    params: &ModelParams,
    t: f64,
    radius: usize,
    spec: &QuadratureSpec,
) -> Result<usize> {
    let d = params.d();
    let fit = 2 * radius + 2;
    let min_fit = fit.next_power_of_two();
    if grid_points(min_fit, d).is_none_or(|p| p > MAX_GRID_POINTS) {
        return Err(Error::BoxTooLarge {
            radius,
            d,
            points: min_fit,
        });
    }
    let mut n = spec.base_points.max(fit);
    if spec.auto_scale {
        let at = t.abs();
        let cone = (2.0 * at * params.max_group_speed()).ceil() as usize;
        let margin = 16 + (8.0 * at.cbrt()).ceil() as usize;
        n = n.max(radius + cone + margin + 1);
    }
    let mut n = n.next_power_of_two();
    while n > min_fit && grid_points(n, d).is_none_or(|p| p > MAX_GRID_POINTS) {
        n /= 2;
    }
    Ok(n)
}

fn grid_points(n: usize, d: usize) -> Option<usize> {
    n.checked_pow(d as u32)
}

fn check_kernel_args(params: &ModelParams, ms: &[KernelIndex], t: f64) -> Result<()> {
    if params.is_massless() && ms.contains(&KernelIndex::Minus) {
        return Err(Error::InvalidKernel);
    }
    if !t.is_finite() {
        return Err(Error::InvalidInput(format!("time must be finite, got {t}")));
    }
    Ok(())
}

/// Trapezoid sums with `n` points per dimension for each requested `m`, on
/// every site of the box. No refinement.
pub(crate) fn trapezoid_box(
    params: &ModelParams,
    t: f64,
    radius: usize,
    n: usize,
    ms: &[KernelIndex],
) -> Result<Vec<Vec<f64>>> {
    check_kernel_args(params, ms, t)?;
    let d = params.d();
    let total = grid_points(n, d)
        .filter(|&p| p <= MAX_GRID_POINTS && n > 2 * radius)
        .ok_or(Error::BoxTooLarge {
            radius,
            d,
            points: n,
        })?;

    // per-axis 4 lambda_j sin^2(k/2) with k = 2 pi i / n
    let axis_terms: Vec<Vec<f64>> = params
        .lambdas()
        .iter()
        .map(|&l| {
            (0..n)
                .map(|i| {
                    let h = (PI * i as f64 / n as f64).sin();
                    4.0 * l * h * h
                })
                .collect()
        })
        .collect();
    let omega2 = params.omega() * params.omega();
    let mut gamma = vec![0.0; total];
    let mut idx = vec![0usize; d];
    for g in gamma.iter_mut() {
        let s: f64 = idx.iter().zip(&axis_terms).map(|(&i, a)| a[i]).sum();
        *g = (omega2 + s).sqrt();
        for j in (0..d).rev() {
            idx[j] += 1;
            if idx[j] < n {
                break;
            }
            idx[j] = 0;
        }
    }

    let scale = 1.0 / total as f64;
    let sites: Vec<LatticeSite> = box_sites(d, radius).collect();
    let mut buf = vec![Complex64::default(); total];
    let mut out = Vec::with_capacity(ms.len());
    for &m in ms {
        for (b, &g) in buf.iter_mut().zip(&gamma) {
            let amp = match m {
                KernelIndex::Minus => 1.0 / g,
                KernelIndex::Zero => 1.0,
                KernelIndex::Plus => g,
            };
            *b = Complex64::from_polar(amp, -2.0 * g * t);
        }
        fft::transform(&mut buf, n, d, FftDirection::Inverse);
        let pick = |s: &LatticeSite| {
            let v = buf[fft::flat_index(s.coords(), n)] * scale;
            if m == KernelIndex::Zero {
                v.re
            } else {
                v.im
            }
        };
        // the exact sum is even in x; average away the round-off asymmetry
        let values = sites
            .iter()
            .map(|s| 0.5 * (pick(s) + pick(&s.negated())))
            .collect();
        out.push(values);
    }
    Ok(out)
}

struct Refined {
    values: Vec<Vec<f64>>,
    resolution: usize,
    est_error: f64,
}

fn refine(
    params: &ModelParams,
    t: f64,
    radius: usize,
    ms: &[KernelIndex],
    spec: &QuadratureSpec,
) -> Result<Refined> {
    spec.validate()?;
    check_kernel_args(params, ms, t)?;
    let d = params.d();
    let mut n = initial_resolution(params, t, radius, spec)?;
    // leave room for at least one comparison
    if grid_points(2 * n, d).is_none_or(|p| p > MAX_GRID_POINTS) && n / 2 > 2 * radius {
        n /= 2;
    }
    let mut prev = trapezoid_box(params, t, radius, n, ms)?;
    let mut delta = f64::INFINITY;
    for _ in 0..spec.max_doublings {
        let next = 2 * n;
        if grid_points(next, d).is_none_or(|p| p > MAX_GRID_POINTS) {
            break;
        }
        let cur = trapezoid_box(params, t, radius, next, ms)?;
        delta = max_abs_diff(&prev, &cur);
        n = next;
        if delta < spec.tolerance {
            return Ok(Refined {
                values: cur,
                resolution: n,
                est_error: delta,
            });
        }
        prev = cur;
    }
    Err(Error::NoConvergence {
        resolution: n,
        delta,
        tolerance: spec.tolerance,
    })
}

fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}

/// `H_t^(m)(x)` by refined periodic quadrature.
///
/// `omega = 0` models are accepted for `m = 0, 1` only.
pub fn kernel_value(
    params: &ModelParams,
    m: KernelIndex,
    t: f64,
    x: &LatticeSite,
    spec: &QuadratureSpec,
) -> Result<f64> {
    check_site(params, x)?;
    let radius = x.linf_norm() as usize;
    let refined = refine(params, t, radius, &[m], spec)?;
    let i = box_index(x.coords(), radius).expect("site lies in its own box");
    Ok(refined.values[0][i])
}

fn check_site(params: &ModelParams, x: &LatticeSite) -> Result<()> {
    if x.dim() == params.d() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected: params.d(),
            found: x.dim(),
        })
    }
}

/// All three kernels on `[-radius, radius]^d`, refined until the whole box
/// changes by less than `spec.tolerance` under one doubling.
pub fn kernel_table(
    params: &ModelParams,
    t: f64,
    radius: usize,
    spec: &QuadratureSpec,
) -> Result<KernelTable> {
    if params.is_massless() {
        return Err(Error::InvalidKernel);
    }
    let refined = refine(params, t, radius, &KernelIndex::ALL, spec)?;
    Ok(table_from(
        params,
        t,
        radius,
        refined.values,
        refined.resolution,
        refined.est_error,
    ))
}

/// Kernel table from a single trapezoid pass at `resolution` points per
/// dimension. This is the periodized kernel of the box of side `resolution`.
pub fn kernel_table_at_resolution(
    params: &ModelParams,
    t: f64,
    radius: usize,
    resolution: usize,
) -> Result<KernelTable> {
    if params.is_massless() {
        return Err(Error::InvalidKernel);
    }
    let values = trapezoid_box(params, t, radius, resolution, &KernelIndex::ALL)?;
    Ok(table_from(
        params,
        t,
        radius,
        values,
        resolution,
        f64::INFINITY,
    ))
}

fn table_from(
    params: &ModelParams,
    t: f64,
    radius: usize,
    values: Vec<Vec<f64>>,
    resolution: usize,
    est_error: f64,
) -> KernelTable {
    let mut it = values.into_iter();
    let mut next = || it.next().expect("three kernels");
    KernelTable {
        params: params.clone(),
        t,
        radius,
        values: [next(), next(), next()],
        resolution,
        est_error,
    }
}

/// Leading-order stationary-phase approximation of `H_t^(m)(x)` from the
/// `2^d` non-degenerate critical points of `gamma`:
///
/// ```text
/// (2 pi)^-d  sum_{k*}  gamma(k*)^m  e^{i k*.x}  (pi / |t|)^{d/2}  |det D^2 gamma(k*)|^{-1/2}
///            exp(-i (2 t gamma(k*) + sgn(t) sig(k*) pi / 4))
/// ```
///
/// followed by the same Re/Im projection as the kernel.
pub fn stationary_phase_estimate(
    params: &ModelParams,
    m: KernelIndex,
    t: f64,
    x: &LatticeSite,
) -> Result<f64> {
    check_site(params, x)?;
    if params.is_massless() {
        return Err(Error::InvalidParams(
            "stationary phase needs omega > 0".into(),
        ));
    }
    if !(t.abs() >= 1.0) {
        return Err(Error::InvalidInput(format!(
            "stationary phase needs |t| >= 1, got {t}"
        )));
    }
    let d = params.d() as i32;
    let sgn = t.signum();
    let scale = (PI / t.abs()).powf(d as f64 / 2.0) / (2.0 * PI).powi(d);
    let mut acc = Complex64::default();
    for cp in params.critical_points()? {
        // e^{i k*.x} is +-1 for k* in {0, pi}^d
        let odd: i64 = cp
            .coords
            .iter()
            .zip(x.coords())
            .filter(|(k, _)| **k != 0.0)
            .map(|(_, xj)| xj.rem_euclid(2))
            .sum();
        let parity = if odd % 2 == 0 { 1.0 } else { -1.0 };
        let amp = cp.gamma_value.powi(m.order()) * parity / cp.hessian_det().abs().sqrt();
        let phase = -(2.0 * t * cp.gamma_value + sgn * cp.signature_sum() as f64 * PI / 4.0);
        acc += Complex64::from_polar(amp, phase);
    }
    let v = acc * scale;
    Ok(if m == KernelIndex::Zero { v.re } else { v.im })
}

/// `H_t^(0)(x)` of the `omega = 0` chain, `gamma(k) = 2 sqrt(lambda) |sin(k/2)|`.
///
/// With `k = 2 theta` the integral becomes
/// `(1/pi) int_0^pi cos(2 x theta) cos(4 sqrt(lambda) t sin theta) d theta`,
/// which is the Bessel function `J_{2|x|}(4 sqrt(lambda) |t|)`.
pub fn bessel_oracle_1d(lambda: f64, t: f64, x: i64) -> f64 {
    assert!(lambda > 0.0, "coupling must be positive");
    let order = 2 * x.unsigned_abs() as usize;
    if t == 0.0 {
        return if order == 0 { 1.0 } else { 0.0 };
    }
    puruspe::Jn(order, 4.0 * lambda.sqrt() * t.abs())
}

/// `int_{R^d} exp(i t Q(y)) exp(-|y|^2) dy` for `Q(y) = sum_j eps_j y_j^2`,
/// as the product of one-dimensional complex Gaussians `sqrt(pi / (1 - i t eps_j))`.
pub fn gaussian_quadratic_integral(signature: &[i8], t: f64) -> Complex64 {
    signature
        .iter()
        .map(|&eps| (Complex64::new(PI, 0.0) / Complex64::new(1.0, -t * eps as f64)).sqrt())
        .product()
}

/// `min(pi^{d/2}, (pi / |t|)^{d/2})`.
pub fn gaussian_quadratic_bound(d: usize, t: f64) -> f64 {
    let half = d as f64 / 2.0;
    if t == 0.0 {
        PI.powf(half)
    } else {
        PI.powf(half).min((PI / t.abs()).powf(half))
    }
}

/// Magnitude of the Gaussian-quadratic integral, `(pi / sqrt(1 + t^2))^{d/2}`
/// for every signature; never above [`gaussian_quadratic_bound`].
pub fn gaussian_quadratic_selftest(d: usize, signature: &[i8], t: f64) -> Result<f64> {
    if d == 0 {
        return Err(Error::InvalidInput("dimension must be at least 1".into()));
    }
    if signature.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: signature.len(),
        });
    }
    if signature.iter().any(|&s| s != 1 && s != -1) {
        return Err(Error::InvalidInput(
            "signature entries must be +1 or -1".into(),
        ));
    }
    let magnitude = gaussian_quadratic_integral(signature, t).norm();
    debug_assert!(magnitude <= gaussian_quadratic_bound(d, t) * (1.0 + 1e-12));
    Ok(magnitude)
}
