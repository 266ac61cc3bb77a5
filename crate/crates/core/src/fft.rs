//! Unnormalized d-dimensional DFT on a cubic grid, row-major, `n` points per axis.

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

pub(crate) fn transform(data: &mut [Complex64], n: usize, d: usize, direction: FftDirection) {
    assert_eq!(data.len(), n.pow(d as u32));
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft(n, direction);
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];

    // last axis is contiguous
    fft.process_with_scratch(data, &mut scratch);

    let mut line = vec![Complex64::default(); n];
    for axis in 0..d.saturating_sub(1) {
        let stride = n.pow((d - 1 - axis) as u32);
        let block = stride * n;
        for base in (0..data.len()).step_by(block) {
            for offset in 0..stride {
                let start = base + offset;
                for (i, v) in line.iter_mut().enumerate() {
                    *v = data[start + i * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (i, v) in line.iter().enumerate() {
                    data[start + i * stride] = *v;
                }
            }
        }
    }
}

/// Position of lattice coordinate `x` (taken mod `n`) along one axis.
pub(crate) fn wrap(x: i64, n: usize) -> usize {
    x.rem_euclid(n as i64) as usize
}

/// Flat row-major index of a wrapped site.
pub(crate) fn flat_index(site: &[i64], n: usize) -> usize {
    site.iter().fold(0, |acc, &x| acc * n + wrap(x, n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn matches_direct_dft_in_two_dimensions() {
        let n = 6;
        let data: Vec<Complex64> = (0..n * n)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let mut fast = data.clone();
        transform(&mut fast, n, 2, FftDirection::Inverse);
        for a in 0..n {
            for b in 0..n {
                let mut acc = Complex64::default();
                for i in 0..n {
                    for j in 0..n {
                        let phase = 2.0 * PI * ((a * i + b * j) as f64) / n as f64;
                        acc += data[i * n + j] * Complex64::from_polar(1.0, phase);
                    }
                }
                assert!((acc - fast[a * n + b]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn flat_index_wraps_negative_coordinates() {
        assert_eq!(flat_index(&[-1], 8), 7);
        assert_eq!(flat_index(&[1, -2], 4), 4 + 2);
        assert_eq!(flat_index(&[0, 0, 3], 4), 3);
    }
}
