//! Sites of `Z^d` and finitely supported complex functions on them.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LatticeSite(Vec<i64>);

impl LatticeSite {
    pub fn new(coords: Vec<i64>) -> Self {
        Self(coords)
    }

    pub fn origin(d: usize) -> Self {
        Self(vec![0; d])
    }

    /// `x * e_axis`.
    pub fn on_axis(d: usize, axis: usize, x: i64) -> Self {
        let mut coords = vec![0; d];
        coords[axis] = x;
        Self(coords)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn l1_norm(&self) -> u64 {
        self.0.iter().map(|x| x.unsigned_abs()).sum()
    }

    pub fn linf_norm(&self) -> u64 {
        self.0.iter().map(|x| x.unsigned_abs()).max().unwrap_or(0)
    }

    pub fn negated(&self) -> Self {
        Self(self.0.iter().map(|x| -x).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }
}

impl From<Vec<i64>> for LatticeSite {
    fn from(coords: Vec<i64>) -> Self {
        Self(coords)
    }
}

impl fmt::Display for LatticeSite {
    /// Semicolon-joined coordinates, e.g. `3;-2`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{x}")?;
        }
        Ok(())
    }
}

/// Sites of the cube `[-radius, radius]^d` in row-major order.
pub fn box_sites(d: usize, radius: usize) -> impl Iterator<Item = LatticeSite> {
    let side = 2 * radius + 1;
    let r = radius as i64;
    (0..side.pow(d as u32)).map(move |mut idx| {
        let mut coords = vec![0; d];
        for c in coords.iter_mut().rev() {
            *c = (idx % side) as i64 - r;
            idx /= side;
        }
        LatticeSite(coords)
    })
}

/// Row-major position of `site` inside `[-radius, radius]^d`, if it lies there.
pub fn box_index(site: &[i64], radius: usize) -> Option<usize> {
    let side = (2 * radius + 1) as i64;
    let r = radius as i64;
    site.iter().try_fold(0usize, |acc, &x| {
        (x.abs() <= r).then(|| acc * side as usize + (x + r) as usize)
    })
}

/// Finitely supported `f: Z^d -> C` stored without zero entries.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeFunction {
    dim: usize,
    entries: BTreeMap<LatticeSite, Complex64>,
}

impl LatticeFunction {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            entries: BTreeMap::new(),
        }
    }

    pub fn delta(site: LatticeSite) -> Self {
        Self::from_entries(site.dim(), [(site, Complex64::new(1.0, 0.0))])
            .expect("single site has consistent dimension")
    }

    pub fn from_entries(
        dim: usize,
        entries: impl IntoIterator<Item = (LatticeSite, Complex64)>,
    ) -> Result<Self> {
        let mut f = Self::zero(dim);
        for (site, value) in entries {
            f.add_at(site, value)?;
        }
        Ok(f)
    }

    /// Adds `value` at `site`; entries that cancel to zero are removed.
    pub fn add_at(&mut self, site: LatticeSite, value: Complex64) -> Result<()> {
        if site.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: site.dim(),
            });
        }
        if !(value.re.is_finite() && value.im.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite value at {site}")));
        }
        let sum = self.get(&site) + value;
        if sum == Complex64::default() {
            self.entries.remove(&site);
        } else {
            self.entries.insert(site, sum);
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, site: &LatticeSite) -> Complex64 {
        self.entries.get(site).copied().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&LatticeSite, &Complex64)> {
        self.entries.iter()
    }

    pub fn sites(&self) -> impl Iterator<Item = &LatticeSite> {
        self.entries.keys()
    }

    pub fn conj(&self) -> Self {
        Self {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .map(|(s, v)| (s.clone(), v.conj()))
                .collect(),
        }
    }

    pub fn l1_norm(&self) -> f64 {
        self.entries.values().map(|v| v.norm()).sum()
    }

    /// Largest `|x_j|` over the support.
    pub fn extent(&self) -> u64 {
        self.sites().map(LatticeSite::linf_norm).max().unwrap_or(0)
    }

    pub fn is_real(&self) -> bool {
        self.entries.values().all(|v| v.im == 0.0)
    }

    /// `sup_x |self(x) - other(x)|` over the union of supports.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut diff: f64 = 0.0;
        for (s, v) in &self.entries {
            diff = diff.max((v - other.get(s)).norm());
        }
        for (s, v) in &other.entries {
            if !self.entries.contains_key(s) {
                diff = diff.max(v.norm());
            }
        }
        diff
    }

    pub(crate) fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim == other.dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_sites_and_index_agree() {
        for (d, r) in [(1, 3), (2, 2), (3, 1)] {
            for (i, site) in box_sites(d, r).enumerate() {
                assert_eq!(box_index(site.coords(), r), Some(i));
            }
            assert_eq!(box_sites(d, r).count(), (2 * r + 1).pow(d as u32));
        }
        assert_eq!(box_index(&[0, 3], 2), None);
    }

    #[test]
    fn site_display_is_semicolon_joined() {
        assert_eq!(LatticeSite::new(vec![3, -2]).to_string(), "3;-2");
        assert_eq!(LatticeSite::new(vec![0]).to_string(), "0");
    }

    #[test]
    fn cancelling_entries_are_dropped() {
        let s = LatticeSite::new(vec![1, 1]);
        let mut f = LatticeFunction::delta(s.clone());
        f.add_at(s, Complex64::new(-1.0, 0.0)).unwrap();
        assert!(f.is_empty());
    }

    #[test]
    fn dimension_checked_on_insert() {
        let mut f = LatticeFunction::zero(2);
        let err = f.add_at(LatticeSite::new(vec![1]), Complex64::new(1.0, 0.0));
        assert_eq!(
            err,
            Err(Error::DimensionMismatch {
                expected: 2,
                found: 1
            })
        );
    }

    #[test]
    fn norms() {
        let f = LatticeFunction::from_entries(
            1,
            [
                (LatticeSite::new(vec![-4]), Complex64::new(3.0, 4.0)),
                (LatticeSite::new(vec![2]), Complex64::new(0.0, -1.0)),
            ],
        )
        .unwrap();
        assert_eq!(f.l1_norm(), 6.0);
        assert_eq!(f.extent(), 4);
        assert!(!f.is_real());
    }
}
