//! Harmonic lattice model on `Z^d` and the analytic functions of its
//! dispersion relation
//!
//! ```text
//! gamma(k) = sqrt(omega^2 + 4 * sum_j lambda_j * sin^2(k_j / 2)),   k in (-pi, pi]^d
//! ```

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};

/// On-site energy `omega` and nearest-neighbour couplings `lambda_j`, one per axis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelParams {
    omega: f64,
    lambdas: Vec<f64>,
}

impl ModelParams {
    /// Validated constructor: `omega > 0`, every `lambda_j >= 0`, `d >= 1`.
    pub fn new(omega: f64, lambdas: Vec<f64>) -> Result<Self> {
        if !(omega.is_finite() && omega > 0.0) {
            return Err(Error::InvalidParams(format!(
                "omega must be finite and positive, got {omega}"
            )));
        }
        Self::checked(omega, lambdas)
    }

    /// The `omega = 0` chain. Only the kernel oracles accept it.
    pub fn massless(lambdas: Vec<f64>) -> Result<Self> {
        Self::checked(0.0, lambdas)
    }

    /// Same coupling on every axis.
    pub fn isotropic(d: usize, omega: f64, lambda: f64) -> Result<Self> {
        Self::new(omega, vec![lambda; d])
    }

    fn checked(omega: f64, lambdas: Vec<f64>) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(Error::InvalidParams("dimension must be at least 1".into()));
        }
        if let Some(bad) = lambdas.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
            return Err(Error::InvalidParams(format!(
                "couplings must be finite and non-negative, got {bad}"
            )));
        }
        Ok(Self { omega, lambdas })
    }

    pub fn d(&self) -> usize {
        self.lambdas.len()
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn coupling_sum(&self) -> f64 {
        self.lambdas.iter().sum()
    }

    pub fn is_massless(&self) -> bool {
        self.omega == 0.0
    }

    /// Every coupling strictly positive.
    pub fn is_strict(&self) -> bool {
        self.lambdas.iter().all(|&l| l > 0.0)
    }

    pub fn require_strict(&self) -> Result<()> {
        match self.lambdas.iter().position(|&l| l <= 0.0) {
            Some(axis) => Err(Error::DegenerateModel { axis }),
            None => Ok(()),
        }
    }

    /// Upper bound on `sup_k |d gamma / d k_j|` over all axes.
    ///
    /// `lambda sin(k) / gamma` is bounded by both `lambda / omega` and
    /// `sqrt(lambda) cos(k/2)`.
    pub fn max_group_speed(&self) -> f64 {
        self.lambdas
            .iter()
            .map(|&l| {
                if self.omega > 0.0 {
                    (l / self.omega).min(l.sqrt())
                } else {
                    l.sqrt()
                }
            })
            .fold(0.0, f64::max)
    }

    /// `gamma` at raw (not necessarily canonical) coordinates. Periodic, so
    /// canonicalization does not change the value.
    pub(crate) fn gamma_at(&self, k: &[f64]) -> f64 {
        debug_assert_eq!(k.len(), self.d());
        let s: f64 = self
            .lambdas
            .iter()
            .zip(k)
            .map(|(l, kj)| {
                let h = (kj * 0.5).sin();
                4.0 * l * h * h
            })
            .sum();
        (self.omega * self.omega + s).sqrt()
    }

    fn check_point(&self, k: &TorusPoint) {
        assert_eq!(
            k.dim(),
            self.d(),
            "torus point dimension does not match the model"
        );
    }

    pub fn dispersion(&self, k: &TorusPoint) -> f64 {
        self.check_point(k);
        self.gamma_at(k.coords())
    }

    /// `d gamma / d k_j = lambda_j sin(k_j) / gamma(k)`.
    pub fn dispersion_gradient(&self, k: &TorusPoint) -> Vec<f64> {
        let g = self.dispersion(k);
        self.lambdas
            .iter()
            .zip(k.coords())
            .map(|(l, kj)| l * kj.sin() / g)
            .collect()
    }

    /// Dense symmetric Hessian of `gamma`.
    ///
    /// Diagonal: `(lambda_j w_j cos k_j - lambda_j^2 (1 - cos k_j)^2) / gamma^3`
    /// with `w_j = omega^2 + 4 sum_{i != j} lambda_i sin^2(k_i/2)`;
    /// off-diagonal: `-lambda_i lambda_j sin k_i sin k_j / gamma^3`.
    pub fn dispersion_hessian(&self, k: &TorusPoint) -> Vec<Vec<f64>> {
        self.check_point(k);
        let d = self.d();
        let k = k.coords();
        let g = self.gamma_at(k);
        let g3 = g * g * g;
        let terms: Vec<f64> = self
            .lambdas
            .iter()
            .zip(k)
            .map(|(l, kj)| {
                let h = (kj * 0.5).sin();
                4.0 * l * h * h
            })
            .collect();
        let total: f64 = terms.iter().sum();

        let mut hess = vec![vec![0.0; d]; d];
        for j in 0..d {
            let lj = self.lambdas[j];
            let c = k[j].cos();
            let w_j = self.omega * self.omega + (total - terms[j]);
            hess[j][j] = (lj * w_j * c - lj * lj * (1.0 - c) * (1.0 - c)) / g3;
            for i in (j + 1)..d {
                let v = -lj * self.lambdas[i] * k[j].sin() * k[i].sin() / g3;
                hess[j][i] = v;
                hess[i][j] = v;
            }
        }
        hess
    }

    /// The `2^d` critical points `k in {0, pi}^d`, each with its diagonal
    /// Hessian `lambda_j cos(k_j) / gamma(k)`.
    pub fn critical_points(&self) -> Result<Vec<CriticalPoint>> {
        self.require_strict()?;
        let d = self.d();
        let points = (0..1usize << d)
            .map(|mask| {
                let coords: Vec<f64> = (0..d)
                    .map(|j| if mask >> j & 1 == 1 { PI } else { 0.0 })
                    .collect();
                let gamma_value = self.gamma_at(&coords);
                let hessian_diag: Vec<f64> = self
                    .lambdas
                    .iter()
                    .zip(&coords)
                    .map(|(l, kj)| l * kj.cos() / gamma_value)
                    .collect();
                let signature = hessian_diag
                    .iter()
                    .map(|h| if *h > 0.0 { 1 } else { -1 })
                    .collect();
                CriticalPoint {
                    coords,
                    gamma_value,
                    hessian_diag,
                    signature,
                }
            })
            .collect();
        Ok(points)
    }

    /// `(Gamma_+(k), Gamma_-(k))` with `Gamma_pm = gamma^{-1/2} pm gamma^{1/2}`.
    pub fn bogoliubov_multipliers(&self, k: &TorusPoint) -> (f64, f64) {
        multipliers_from_gamma(self.dispersion(k))
    }
}

pub(crate) fn multipliers_from_gamma(gamma: f64) -> (f64, f64) {
    let r = gamma.sqrt();
    (1.0 / r + r, 1.0 / r - r)
}

/// Quasi-momentum with every component reduced to `(-pi, pi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusPoint(Vec<f64>);

impl TorusPoint {
    pub fn new(coords: Vec<f64>) -> Self {
        Self(coords.into_iter().map(canonical_angle).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn negated(&self) -> Self {
        Self::new(self.0.iter().map(|k| -k).collect())
    }
}

impl From<Vec<f64>> for TorusPoint {
    fn from(coords: Vec<f64>) -> Self {
        Self::new(coords)
    }
}

/// Reduces an angle to `(-pi, pi]`.
pub fn canonical_angle(a: f64) -> f64 {
    let r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalPoint {
    pub coords: Vec<f64>,
    pub gamma_value: f64,
    pub hessian_diag: Vec<f64>,
    pub signature: Vec<i8>,
}

impl CriticalPoint {
    pub fn hessian_det(&self) -> f64 {
        self.hessian_diag.iter().product()
    }

    /// Number of positive minus number of negative Hessian eigenvalues.
    pub fn signature_sum(&self) -> i32 {
        self.signature.iter().map(|&s| s as i32).sum()
    }
}
