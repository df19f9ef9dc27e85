//! Discrete non-negative measures on the half-line and the norms used to
//! compare them.
//!
//! The flat (bounded-Lipschitz) norm of a finite signed atom list is the
//! value of the linear program
//!
//! ```text
//! maximise  sum_k w_k * psi_k
//! s.t.      |psi_k| <= 1,  |psi_k - psi_{k+1}| <= x_{k+1} - x_k
//! ```
//!
//! over the values of the test function at the sorted atom locations. In one
//! dimension the adjacent Lipschitz constraints imply all the others, and any
//! feasible vector extends to a 1-Lipschitz function bounded by one by linear
//! interpolation, so this program is exact. It is solved by a forward sweep
//! over concave piecewise-linear value functions (see [`sup_bounded_lipschitz`]).

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("atom {index}: location {location} must be finite and strictly positive")]
    BadLocation { index: usize, location: f64 },
    #[error("atom {index}: mass {mass} must be finite and non-negative")]
    BadMass { index: usize, mass: f64 },
    #[error("atom {index}: locations must be strictly increasing ({previous} then {location})")]
    NotIncreasing {
        index: usize,
        previous: f64,
        location: f64,
    },
    #[error("location and mass slices differ in length ({locations} vs {masses})")]
    LengthMismatch { locations: usize, masses: usize },
    #[error("weighted flat norm needs positive locations, found atom at {0}")]
    NonPositiveWeightLocation(f64),
    #[error("signed atom has non-finite location or mass ({location}, {mass})")]
    NonFiniteAtom { location: f64, mass: f64 },
}

/// A non-negative measure made of finitely many Dirac atoms at strictly
/// increasing, strictly positive locations.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiscreteMeasure {
    locations: Vec<f64>,
    masses: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(atoms: &[(f64, f64)]) -> Result<Self, MeasureError> {
        let (locations, masses) = atoms.iter().copied().unzip();
        Self::from_parts(locations, masses)
    }

    pub fn from_parts(locations: Vec<f64>, masses: Vec<f64>) -> Result<Self, MeasureError> {
        if locations.len() != masses.len() {
            return Err(MeasureError::LengthMismatch {
                locations: locations.len(),
                masses: masses.len(),
            });
        }
        for (index, (&location, &mass)) in locations.iter().zip(&masses).enumerate() {
            if !(location.is_finite() && location > 0.0) {
                return Err(MeasureError::BadLocation { index, location });
            }
            if !(mass.is_finite() && mass >= 0.0) {
                return Err(MeasureError::BadMass { index, mass });
            }
            if index > 0 && location <= locations[index - 1] {
                return Err(MeasureError::NotIncreasing {
                    index,
                    previous: locations[index - 1],
                    location,
                });
            }
        }
        Ok(Self { locations, masses })
    }

    /// Builds a measure on a grid that the caller guarantees is valid
    /// (strictly increasing, positive) with masses already clamped at zero.
    pub(crate) fn from_trusted(locations: Vec<f64>, masses: Vec<f64>) -> Self {
        debug_assert_eq!(locations.len(), masses.len());
        debug_assert!(masses.iter().all(|m| *m >= 0.0));
        Self { locations, masses }
    }

    pub fn locations(&self) -> &[f64] {
        &self.locations
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.locations.iter().copied().zip(self.masses.iter().copied())
    }

    /// Total variation norm. All masses are non-negative, so this is the
    /// total mass.
    pub fn tv_norm(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// `sum_k exp(x_k) m_k`.
    pub fn exp_moment(&self) -> f64 {
        self.atoms().map(|(x, m)| x.exp() * m).sum()
    }

    /// Mass carried by atoms strictly beyond `r0`.
    pub fn tail_mass(&self, r0: f64) -> f64 {
        self.atoms().filter(|(x, _)| *x > r0).map(|(_, m)| m).sum()
    }

    /// `self - other` as a merged signed atom list.
    pub fn difference(&self, other: &DiscreteMeasure) -> SignedAtomList {
        let atoms = self
            .atoms()
            .chain(other.atoms().map(|(x, m)| (x, -m)))
            .collect::<Vec<_>>();
        SignedAtomList::from_sorted_merge(atoms)
    }

    pub fn to_signed(&self) -> SignedAtomList {
        SignedAtomList {
            atoms: self.atoms().collect(),
        }
    }
}

/// Finite signed measure stored as atoms sorted by location with duplicate
/// locations merged.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SignedAtomList {
    atoms: Vec<(f64, f64)>,
}

impl SignedAtomList {
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self, MeasureError> {
        if let Some(&(location, mass)) = atoms
            .iter()
            .find(|(x, m)| !(x.is_finite() && m.is_finite()))
        {
            return Err(MeasureError::NonFiniteAtom { location, mass });
        }
        Ok(Self::from_sorted_merge(atoms))
    }

    fn from_sorted_merge(mut atoms: Vec<(f64, f64)>) -> Self {
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (x, m) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == x => last.1 += m,
                _ => merged.push((x, m)),
            }
        }
        Self { atoms: merged }
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Total variation of the signed measure, `sum_k |w_k|`.
    pub fn total_variation(&self) -> f64 {
        self.atoms.iter().map(|(_, m)| m.abs()).sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            atoms: self.atoms.iter().map(|&(x, m)| (x, m * factor)).collect(),
        }
    }

    pub fn plus(&self, other: &SignedAtomList) -> Self {
        Self::from_sorted_merge(self.atoms.iter().chain(other.atoms()).copied().collect())
    }
}

/// Weight exponent of the weighted flat norm: test functions are divided by
/// `r` or by `r^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightExponent {
    One,
    Two,
}

impl WeightExponent {
    pub fn power(self) -> i32 {
        match self {
            WeightExponent::One => 1,
            WeightExponent::Two => 2,
        }
    }
}

impl TryFrom<u32> for WeightExponent {
    type Error = u32;

    fn try_from(value: u32) -> Result<Self, u32> {
        match value {
            1 => Ok(WeightExponent::One),
            2 => Ok(WeightExponent::Two),
            other => Err(other),
        }
    }
}

pub fn tv_norm(measure: &DiscreteMeasure) -> f64 {
    measure.tv_norm()
}

/// Flat (bounded-Lipschitz dual) norm of a signed atom list.
pub fn flat_norm(diff: &SignedAtomList) -> f64 {
    let (locations, weights): (Vec<f64>, Vec<f64>) = diff.atoms.iter().copied().unzip();
    sup_bounded_lipschitz(&locations, &weights)
}

/// Flat norm of `d / r^e`.
pub fn weighted_flat_norm(
    diff: &SignedAtomList,
    exponent: WeightExponent,
) -> Result<f64, MeasureError> {
    let mut locations = Vec::with_capacity(diff.len());
    let mut weights = Vec::with_capacity(diff.len());
    for &(x, w) in &diff.atoms {
        if x <= 0.0 {
            return Err(MeasureError::NonPositiveWeightLocation(x));
        }
        locations.push(x);
        weights.push(w / x.powi(exponent.power()));
    }
    Ok(sup_bounded_lipschitz(&locations, &weights))
}

/// Flat distance between two non-negative measures.
pub fn flat_distance(a: &DiscreteMeasure, b: &DiscreteMeasure) -> f64 {
    flat_norm(&a.difference(b))
}

/// Weighted flat distance between two non-negative measures (both live on
/// positive locations, so this cannot fail).
pub fn weighted_flat_distance(
    a: &DiscreteMeasure,
    b: &DiscreteMeasure,
    exponent: WeightExponent,
) -> f64 {
    weighted_flat_norm(&a.difference(b), exponent)
        .expect("discrete measures have positive locations")
}

/// Concave piecewise-linear function on a closed interval, stored as its
/// vertices in increasing `x`.
#[derive(Debug, Clone)]
struct ConcavePwl {
    vertices: Vec<(f64, f64)>,
}

impl ConcavePwl {
    fn value_at(points: &[(f64, f64)], x: f64) -> f64 {
        let k = points.partition_point(|p| p.0 < x);
        if k == 0 {
            return points[0].1;
        }
        if k == points.len() {
            return points[k - 1].1;
        }
        let (x0, y0) = points[k - 1];
        let (x1, y1) = points[k];
        if x1 == x0 {
            return y0.max(y1);
        }
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    /// Replaces `g` by `v -> max_{|u - v| <= reach} g(u)` restricted to
    /// `[-1, 1]`.
    fn window_max(&mut self, reach: f64) {
        let v = &self.vertices;
        let peak = v.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        let first = v.iter().position(|p| p.1 == peak).unwrap();
        let last = v.iter().rposition(|p| p.1 == peak).unwrap();

        let mut moved: Vec<(f64, f64)> = Vec::with_capacity(v.len() + 2);
        moved.extend(v[..=first].iter().map(|&(x, y)| (x - reach, y)));
        moved.extend(v[last..].iter().map(|&(x, y)| (x + reach, y)));

        let mut clipped = Vec::with_capacity(moved.len() + 2);
        clipped.push((-1.0, Self::value_at(&moved, -1.0)));
        for &(x, y) in &moved {
            if x > -1.0 && x < 1.0 {
                match clipped.last() {
                    Some(&(px, _)) if px == x => {}
                    _ => clipped.push((x, y)),
                }
            }
        }
        clipped.push((1.0, Self::value_at(&moved, 1.0)));
        self.vertices = clipped;
    }

    fn add_linear(&mut self, slope: f64) {
        for p in &mut self.vertices {
            p.1 += slope * p.0;
        }
    }

    fn max(&self) -> f64 {
        self.vertices.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `sup { sum_k c_k psi(x_k) : |psi| <= 1, Lip(psi) <= 1 }` for sorted,
/// distinct locations.
///
/// Forward sweep: `g_k(v)` is the best partial objective over `psi_1..psi_k`
/// with `psi_k = v`. Each `g_k` is concave and piecewise linear on `[-1, 1]`;
/// moving to the next atom is a window maximum of width `x_{k+1} - x_k`
/// followed by adding `c_{k+1} v`. The window maximum adds at most one vertex,
/// so the whole sweep is `O(n^2)` in the worst case and close to linear for
/// measures on a grid.
pub fn sup_bounded_lipschitz(locations: &[f64], coefficients: &[f64]) -> f64 {
    assert_eq!(locations.len(), coefficients.len());
    if locations.is_empty() {
        return 0.0;
    }
    let mut g = ConcavePwl {
        vertices: vec![(-1.0, 0.0), (1.0, 0.0)],
    };
    g.add_linear(coefficients[0]);
    for k in 1..locations.len() {
        let gap = locations[k] - locations[k - 1];
        debug_assert!(gap >= 0.0, "locations must be sorted");
        g.window_max(gap);
        g.add_linear(coefficients[k]);
    }
    g.max().max(0.0)
}
