//! Decay-rate checks: weighted norms, log-log power-law fits, uniform and
//! fixed-site decay of the kernels, and the light-cone scan of
//! `|| [tau_t(W(delta_0)), W(delta_x)] ||`.

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{norm_from_phase, phase_from_table, reduce_degenerate};
use crate::error::{Error, Result};
use crate::kernels::{kernel_table, KernelIndex, QuadratureSpec};
use crate::lattice::{box_index, LatticeFunction, LatticeSite};
use crate::model::ModelParams;

/// Fits need at least this many points.
pub const MIN_FIT_POINTS: usize = 5;
/// Window length of the sliding-maximum envelope.
pub const ENVELOPE_WINDOW: usize = 5;
/// Uniform decay passes if the rescaled sup-sequence has log-log slope at most this.
pub const UNIFORM_SLOPE_THRESHOLD: f64 = 0.05;
/// Cells below this are outside the light cone.
pub const EXPONENTIAL_THRESHOLD: f64 = 1e-8;
/// Cells above this are order one.
pub const ORDER_ONE_THRESHOLD: f64 = 0.1;

/// `w(x) = (1 + |x|_1)^(d + 3)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct WeightSpec {
    pub d: usize,
}

impl WeightSpec {
    pub fn new(d: usize) -> Self {
        Self { d }
    }

    pub fn exponent(&self) -> i32 {
        self.d as i32 + 3
    }

    pub fn weight(&self, x: &LatticeSite) -> f64 {
        (1.0 + x.l1_norm() as f64).powi(self.exponent())
    }
}

/// `sum_x |f(x)| w(x)`.
pub fn weighted_l1_norm(f: &LatticeFunction, spec: &WeightSpec) -> Result<f64> {
    if f.dim() != spec.d {
        return Err(Error::DimensionMismatch {
            expected: spec.d,
            found: f.dim(),
        });
    }
    Ok(f.iter().map(|(x, v)| v.norm() * spec.weight(x)).sum())
}

/// Least-squares power law `value ~ amplitude * t^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub exponent: f64,
    pub amplitude: f64,
    /// Largest absolute residual in `log(value)`.
    pub residual: f64,
    pub t_range: (f64, f64),
    pub n_points: usize,
}

/// Ordinary least squares of `log(value)` on `log(t)`; returns
/// `(slope, intercept, max |residual|)`.
fn log_log_regression(series: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = series.len() as f64;
    let pts: Vec<(f64, f64)> = series.iter().map(|(t, v)| (t.ln(), v.ln())).collect();
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let residual = pts
        .iter()
        .map(|(x, y)| (y - (intercept + slope * x)).abs())
        .fold(0.0, f64::max);
    (slope, intercept, residual)
}

fn check_series(series: &[(f64, f64)], min_points: usize) -> Result<()> {
    if series.len() < min_points {
        return Err(Error::TooFewPoints {
            needed: min_points,
            got: series.len(),
        });
    }
    if let Some(&(t, value)) = series.iter().find(|(_, v)| !(*v > 0.0)) {
        return Err(Error::NonPositiveValue { t, value });
    }
    if series[0].0 < 1.0 {
        return Err(Error::InvalidInput(format!(
            "fits start at t >= 1, got {}",
            series[0].0
        )));
    }
    if series.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::InvalidInput(
            "times must be strictly increasing".into(),
        ));
    }
    Ok(())
}

pub fn fit_decay(series: &[(f64, f64)]) -> Result<DecayFit> {
    check_series(series, MIN_FIT_POINTS)?;
    let (slope, intercept, residual) = log_log_regression(series);
    Ok(DecayFit {
        exponent: slope,
        amplitude: intercept.exp(),
        residual,
        t_range: (series[0].0, series[series.len() - 1].0),
        n_points: series.len(),
    })
}

/// `n` geometrically spaced times from `t_min` to `t_max` inclusive.
pub fn geometric_samples(t_min: f64, t_max: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![t_min];
    }
    let ratio = (t_max / t_min).ln() / (n - 1) as f64;
    (0..n)
        .map(|i| {
            if i == n - 1 {
                t_max
            } else {
                t_min * (ratio * i as f64).exp()
            }
        })
        .collect()
}

/// Maximum of `|value|` over each run of `window` consecutive samples,
/// placed at the centre sample of the run.
pub fn envelope(series: &[(f64, f64)], window: usize) -> Vec<(f64, f64)> {
    if series.len() < window || window == 0 {
        return Vec::new();
    }
    series
        .windows(window)
        .map(|w| {
            let peak = w.iter().map(|(_, v)| v.abs()).fold(0.0, f64::max);
            (w[window / 2].0, peak)
        })
        .collect()
}

/// Power-law fit of the sliding-window envelope of an oscillating series.
pub fn fit_envelope(series: &[(f64, f64)]) -> Result<DecayFit> {
    fit_decay(&envelope(series, ENVELOPE_WINDOW))
}

fn check_times(t_samples: &[f64]) -> Result<()> {
    if t_samples.is_empty() {
        return Err(Error::TooFewPoints { needed: 1, got: 0 });
    }
    if let Some(t) = t_samples.iter().find(|t| !(**t >= 1.0 && t.is_finite())) {
        return Err(Error::InvalidInput(format!(
            "decay checks need finite t >= 1, got {t}"
        )));
    }
    if t_samples.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput(
            "times must be strictly increasing".into(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UniformDecayRow {
    pub t: f64,
    /// `sup_x sum_m |H_t^(m)(x)|` over the light-cone box.
    pub sup: f64,
    /// `sup * t^rate`.
    pub rescaled: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformDecayReport {
    /// Dimension after dropping zero-coupling axes.
    pub effective_d: usize,
    /// `1/2` for `d >= 2`, `1/3` for `d = 1`.
    pub rate: f64,
    pub rows: Vec<UniformDecayRow>,
    pub max_rescaled: f64,
    /// Log-log slope of the rescaled sequence.
    pub slope: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Half-width of the box standing in for the supremum over `Z^d`.
pub fn uniform_box_radius(params: &ModelParams, t: f64) -> usize {
    (2.0 * t.abs() * params.coupling_sum() / params.omega()).ceil() as usize + 16
}

/// Checks that `sup_x sum_m |H_t^(m)(x)|` decays at least like `t^-1/2`
/// (`d >= 2`) or `t^-1/3` (`d = 1`). Zero couplings are factored out first.
pub fn verify_uniform_decay(
    params: &ModelParams,
    t_samples: &[f64],
    spec: &QuadratureSpec,
) -> Result<UniformDecayReport> {
    check_times(t_samples)?;
    if t_samples.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: t_samples.len(),
        });
    }
    let reduced = reduce_degenerate(params);
    let model = reduced.model.ok_or(Error::DegenerateModel { axis: 0 })?;
    let rate = if model.d() >= 2 { 0.5 } else { 1.0 / 3.0 };

    let rows = t_samples
        .par_iter()
        .map(|&t| {
            let table = kernel_table(&model, t, uniform_box_radius(&model, t), spec)?;
            let sup = (0..table.values(KernelIndex::Zero).len())
                .map(|i| table.abs_sum_at(i))
                .fold(0.0, f64::max);
            Ok(UniformDecayRow {
                t,
                sup,
                rescaled: sup * t.powf(rate),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let series: Vec<(f64, f64)> = rows.iter().map(|r| (r.t, r.rescaled)).collect();
    check_series(&series, 2)?;
    let (slope, _, _) = log_log_regression(&series);
    let max_rescaled = rows.iter().map(|r| r.rescaled).fold(0.0, f64::max);
    Ok(UniformDecayReport {
        effective_d: model.d(),
        rate,
        rows,
        max_rescaled,
        slope,
        threshold: UNIFORM_SLOPE_THRESHOLD,
        pass: slope <= UNIFORM_SLOPE_THRESHOLD,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedXSample {
    pub t: f64,
    pub kernel: f64,
    pub commutator: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedXReport {
    pub x: Vec<i64>,
    pub samples: Vec<FixedXSample>,
    /// Envelope fit of `|H_t^(0)(x)|`.
    pub kernel_fit: DecayFit,
    /// Envelope fit of `|| [tau_t(W(delta_0)), W(delta_x)] ||`.
    pub commutator_fit: DecayFit,
    /// The raw series changes sign, so only the envelope is meaningful.
    pub oscillation_warning: bool,
}

/// Fits the decay of `|H_t^(0)(x)|` and of the `delta_0`/`delta_x`
/// commutator at fixed `x`; the expected exponent is `-d/2`.
pub fn verify_fixed_x_decay(
    params: &ModelParams,
    x: &LatticeSite,
    t_samples: &[f64],
    spec: &QuadratureSpec,
) -> Result<FixedXReport> {
    params.require_strict()?;
    check_times(t_samples)?;
    if x.dim() != params.d() {
        return Err(Error::DimensionMismatch {
            expected: params.d(),
            found: x.dim(),
        });
    }
    let (t_min, t_max) = (t_samples[0], t_samples[t_samples.len() - 1]);
    if t_max < 10.0 * t_min {
        return Err(Error::InvalidInput(format!(
            "samples must span a decade, got [{t_min}, {t_max}]"
        )));
    }
    let f = LatticeFunction::delta(LatticeSite::origin(params.d()));
    let g = LatticeFunction::delta(x.clone());
    let radius = x.linf_norm() as usize;

    let samples = t_samples
        .par_iter()
        .map(|&t| {
            let table = kernel_table(params, t, radius, spec)?;
            Ok(FixedXSample {
                t,
                kernel: table.value(KernelIndex::Zero, x.coords()),
                commutator: norm_from_phase(phase_from_table(&table, &f, &g)),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let kernel_series: Vec<(f64, f64)> = samples.iter().map(|s| (s.t, s.kernel)).collect();
    let comm_series: Vec<(f64, f64)> = samples.iter().map(|s| (s.t, s.commutator)).collect();
    let oscillation_warning = samples
        .windows(2)
        .any(|w| w[0].kernel.signum() != w[1].kernel.signum());
    Ok(FixedXReport {
        x: x.coords().to_vec(),
        kernel_fit: fit_envelope(&kernel_series)?,
        commutator_fit: fit_envelope(&comm_series)?,
        samples,
        oscillation_warning,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Region {
    ExponentiallySmall,
    PowerLaw,
    OrderOne,
}

impl Region {
    pub fn classify(value: f64) -> Self {
        if value < EXPONENTIAL_THRESHOLD {
            Region::ExponentiallySmall
        } else if value > ORDER_ONE_THRESHOLD {
            Region::OrderOne
        } else {
            Region::PowerLaw
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Region::ExponentiallySmall => "exp",
            Region::PowerLaw => "power",
            Region::OrderOne => "order-one",
        }
    }
}

/// `|| [tau_t(W(delta_0)), W(delta_x)] ||` on a `(t, |x|_1)` grid; each cell
/// holds the largest value over the sites of that `l1` shell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConeScan {
    pub model: ModelParams,
    pub t_samples: Vec<f64>,
    pub x_max: usize,
    /// `values[i][r]` at `t_samples[i]` and `|x|_1 = r`.
    pub values: Vec<Vec<f64>>,
    pub f_probe: String,
    pub g_probe: String,
}

impl ConeScan {
    pub fn region(&self, ti: usize, r: usize) -> Region {
        Region::classify(self.values[ti][r])
    }

    /// Largest `|x|_1` per time whose value reaches `EXPONENTIAL_THRESHOLD`.
    pub fn front(&self) -> Vec<(f64, Option<usize>)> {
        self.t_samples
            .iter()
            .zip(&self.values)
            .map(|(&t, row)| (t, row.iter().rposition(|&v| v >= EXPONENTIAL_THRESHOLD)))
            .collect()
    }

    /// Least-squares slope through the origin of `front(t)` against `t`,
    /// over times with a non-empty front.
    pub fn empirical_cone_speed(&self) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .front()
            .into_iter()
            .filter_map(|(t, r)| r.filter(|_| t > 0.0).map(|r| (t, r as f64)))
            .collect();
        let stt: f64 = pts.iter().map(|(t, _)| t * t).sum();
        (stt > 0.0).then(|| pts.iter().map(|(t, r)| t * r).sum::<f64>() / stt)
    }
}

/// Sites of `[-x_max, x_max]^d` grouped by `l1` norm `0..=x_max`.
fn l1_shells(d: usize, x_max: usize) -> Vec<Vec<LatticeSite>> {
    let mut shells = vec![Vec::new(); x_max + 1];
    for s in crate::lattice::box_sites(d, x_max) {
        let r = s.l1_norm() as usize;
        if r <= x_max {
            shells[r].push(s);
        }
    }
    shells
}

pub fn cone_scan(
    params: &ModelParams,
    t_samples: &[f64],
    x_max: usize,
    spec: &QuadratureSpec,
) -> Result<ConeScan> {
    params.require_strict()?;
    if let Some(t) = t_samples.iter().find(|t| !t.is_finite()) {
        return Err(Error::InvalidInput(format!("time must be finite, got {t}")));
    }
    let d = params.d();
    let shells = l1_shells(d, x_max);
    let f = LatticeFunction::delta(LatticeSite::origin(d));
    let values = t_samples
        .par_iter()
        .map(|&t| {
            let table = kernel_table(params, t, x_max, spec)?;
            Ok(shells
                .iter()
                .map(|shell| {
                    shell
                        .iter()
                        .map(|x| {
                            if t == 0.0 {
                                return 0.0;
                            }
                            debug_assert!(box_index(x.coords(), x_max).is_some());
                            let g = LatticeFunction::delta(x.clone());
                            norm_from_phase(phase_from_table(&table, &f, &g))
                        })
                        .fold(0.0, f64::max)
                })
                .collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok(ConeScan {
        model: params.clone(),
        t_samples: t_samples.to_vec(),
        x_max,
        values,
        f_probe: "delta_0".into(),
        g_probe: "delta_x".into(),
    })
}

/// Commutator decay along `|x(t)|_1 = round(t^(1 / (2 (d + 3))))` on the
/// first axis, where the weighted estimate predicts `t^-d/2`.
pub fn boundary_curve_decay(
    params: &ModelParams,
    t_samples: &[f64],
    spec: &QuadratureSpec,
) -> Result<FixedXReportCurve> {
    params.require_strict()?;
    check_times(t_samples)?;
    let d = params.d();
    let f = LatticeFunction::delta(LatticeSite::origin(d));
    let power = 1.0 / (2.0 * (d as f64 + 3.0));
    let samples = t_samples
        .par_iter()
        .map(|&t| {
            let r = t.powf(power).round() as i64;
            let x = LatticeSite::on_axis(d, 0, r);
            let table = kernel_table(params, t, r as usize, spec)?;
            let g = LatticeFunction::delta(x);
            Ok((t, r, norm_from_phase(phase_from_table(&table, &f, &g))))
        })
        .collect::<Result<Vec<_>>>()?;
    let series: Vec<(f64, f64)> = samples.iter().map(|&(t, _, v)| (t, v)).collect();
    Ok(FixedXReportCurve {
        fit: fit_envelope(&series)?,
        samples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedXReportCurve {
    /// `(t, |x(t)|_1, commutator norm)`.
    pub samples: Vec<(f64, i64, f64)>,
    pub fit: DecayFit,
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn site(c: &[i64]) -> LatticeSite {
        LatticeSite::new(c.to_vec())
    }

    #[test]
    fn weighted_norm_examples() {
        for d in 1..=3 {
            let w = WeightSpec::new(d);
            let origin = LatticeFunction::delta(LatticeSite::origin(d));
            assert_eq!(weighted_l1_norm(&origin, &w).unwrap(), 1.0);
            let unit = LatticeFunction::delta(LatticeSite::on_axis(d, 0, -1));
            assert_eq!(
                weighted_l1_norm(&unit, &w).unwrap(),
                2f64.powi(d as i32 + 3)
            );
        }
        let w = WeightSpec::new(2);
        let x = site(&[2, -1]);
        let f = LatticeFunction::from_entries(
            2,
            [
                (site(&[0, 0]), Complex64::new(1.0, 0.0)),
                (x.clone(), Complex64::new(1.0, 0.0)),
            ],
        )
        .unwrap();
        assert_eq!(weighted_l1_norm(&f, &w).unwrap(), 1.0 + w.weight(&x));
        assert!(weighted_l1_norm(&f, &WeightSpec::new(1)).is_err());
    }

    #[test]
    fn weighted_norm_dominates_l1() {
        let f = LatticeFunction::from_entries(
            2,
            [
                (site(&[3, 0]), Complex64::new(0.2, -0.4)),
                (site(&[-1, 1]), Complex64::new(-0.7, 0.1)),
            ],
        )
        .unwrap();
        assert!(weighted_l1_norm(&f, &WeightSpec::new(2)).unwrap() >= f.l1_norm());
    }

    #[test]
    fn fit_exact_power_laws() {
        let ts = geometric_samples(1.0, 100.0, 12);
        let inv: Vec<_> = ts.iter().map(|&t| (t, 1.0 / t)).collect();
        let fit = fit_decay(&inv).unwrap();
        assert!((fit.exponent + 1.0).abs() < 1e-12);
        assert!((fit.amplitude - 1.0).abs() < 1e-12);
        assert!(fit.residual < 1e-12);

        let flat: Vec<_> = ts.iter().map(|&t| (t, 3.5)).collect();
        assert!(fit_decay(&flat).unwrap().exponent.abs() < 1e-12);

        for d in 1..=3 {
            let series: Vec<_> = ts
                .iter()
                .map(|&t| (t, 0.3 * t.powf(-(d as f64) / 2.0)))
                .collect();
            assert!((fit_decay(&series).unwrap().exponent + d as f64 / 2.0).abs() < 1e-6);
        }
    }

    #[test]
    fn fit_noisy_power_law() {
        let ts = geometric_samples(10.0, 1000.0, 50);
        let series: Vec<_> = ts
            .iter()
            .map(|&t| (t, 3.0 * t.powf(-1.5) * (1.0 + 0.01 * t.sin())))
            .collect();
        let fit = fit_decay(&series).unwrap();
        assert!((fit.exponent + 1.5).abs() < 0.02, "{fit:?}");
    }

    #[test]
    fn fit_rejects_bad_series() {
        let short: Vec<_> = (1..5).map(|t| (t as f64, 1.0)).collect();
        assert_eq!(
            fit_decay(&short),
            Err(Error::TooFewPoints { needed: 5, got: 4 })
        );
        let mut bad: Vec<_> = (1..8).map(|t| (t as f64, 1.0)).collect();
        bad[3].1 = 0.0;
        assert_eq!(
            fit_decay(&bad),
            Err(Error::NonPositiveValue { t: 4.0, value: 0.0 })
        );
        let early: Vec<_> = (0..6).map(|t| (0.5 + t as f64, 1.0)).collect();
        assert!(fit_decay(&early).is_err());
    }

    #[test]
    fn envelope_takes_window_maxima() {
        let series: Vec<_> = (1..=7)
            .map(|i| (i as f64, if i % 2 == 0 { -2.0 } else { 1.0 }))
            .collect();
        let env = envelope(&series, 5);
        assert_eq!(env, vec![(3.0, 2.0), (4.0, 2.0), (5.0, 2.0)]);
    }

    #[test]
    fn geometric_samples_endpoints() {
        let ts = geometric_samples(20.0, 200.0, 25);
        assert_eq!(ts.len(), 25);
        assert_eq!(ts[0], 20.0);
        assert_eq!(ts[24], 200.0);
        let r = ts[1] / ts[0];
        assert!(ts.windows(2).all(|w| (w[1] / w[0] - r).abs() < 1e-12));
    }

    #[test]
    fn region_thresholds() {
        assert_eq!(Region::classify(1e-9), Region::ExponentiallySmall);
        assert_eq!(Region::classify(1e-3), Region::PowerLaw);
        assert_eq!(Region::classify(0.5), Region::OrderOne);
    }

    #[test]
    fn cone_scan_time_zero_column_vanishes() {
        let p = ModelParams::new(1.0, vec![1.0, 1.0]).unwrap();
        let scan = cone_scan(&p, &[0.0, 2.0], 6, &QuadratureSpec::default()).unwrap();
        assert!(scan.values[0].iter().all(|&v| v == 0.0));
        for row in &scan.values {
            assert!(row.iter().all(|&v| (0.0..=2.0).contains(&v)));
        }
        assert_eq!(scan.region(1, 6), Region::classify(scan.values[1][6]));
    }

    #[test]
    fn uniform_decay_degenerate_reduces_to_chain() {
        let p = ModelParams::new(1.0, vec![1.0, 0.0]).unwrap();
        let ts = [10.0, 20.0];
        let report = verify_uniform_decay(&p, &ts, &QuadratureSpec::default()).unwrap();
        assert_eq!(report.effective_d, 1);
        assert!((report.rate - 1.0 / 3.0).abs() < 1e-15);
        let chain = ModelParams::new(1.0, vec![1.0]).unwrap();
        let direct = verify_uniform_decay(&chain, &ts, &QuadratureSpec::default()).unwrap();
        assert_eq!(report.rows, direct.rows);
    }

    #[test]
    fn fixed_x_needs_a_decade() {
        let p = ModelParams::new(1.0, vec![1.0]).unwrap();
        let err = verify_fixed_x_decay(
            &p,
            &site(&[0]),
            &[5.0, 10.0, 20.0],
            &QuadratureSpec::default(),
        );
        assert!(err.is_err());
    }
}
