//! Random maps from the unit sphere to sparse binary codes, and the overlap
//! score between codes.

mod dct;
mod transform;

use serde::{Deserialize, Serialize};

pub use dct::dct2;
pub use transform::{make_transform, Transform, TransformKind};

use crate::{Error, Result};

/// Tolerance on `| |x|_2 - 1 |` accepted by [`UnitVector::new`].
pub const UNIT_TOLERANCE: f64 = 1e-9;

/// A point on the unit sphere `S^{d-1}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnitVector(Vec<f64>);

impl UnitVector {
    /// Wrap `coords`, which must already have unit length.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::EmptyInput);
        }
        let norm = l2_norm(&coords);
        if !norm.is_finite() || (norm - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::NotUnitNorm(norm));
        }
        Ok(UnitVector(coords))
    }

    /// Scale `raw` to unit length.
    pub fn normalized(raw: Vec<f64>) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::EmptyInput);
        }
        let norm = l2_norm(&raw);
        if !norm.is_finite() {
            return Err(Error::NotUnitNorm(norm));
        }
        if norm == 0.0 {
            return Err(Error::ZeroVector(String::new()));
        }
        Ok(UnitVector(raw.into_iter().map(|v| v / norm).collect()))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &UnitVector) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum())
    }
}

impl<'de> Deserialize<'de> for UnitVector {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let coords = Vec::<f64>::deserialize(de)?;
        UnitVector::new(coords).map_err(serde::de::Error::custom)
    }
}

pub(crate) fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// The `m` real outputs of a transform before thresholding.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionVector(Vec<f64>);

impl ProjectionVector {
    pub fn new(values: Vec<f64>) -> Self {
        ProjectionVector(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|a| a * a).sum()
    }
}

/// The active dimensions of a code of length `m`, strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SparseCode {
    m: usize,
    support: Vec<u32>,
}

impl SparseCode {
    pub fn new(m: usize, support: Vec<u32>) -> Result<Self> {
        if m > u32::MAX as usize + 1 {
            return Err(Error::InvalidCode(format!("m = {m} exceeds u32 range")));
        }
        if let Some(&last) = support.last() {
            if last as usize >= m {
                return Err(Error::InvalidCode(format!("index {last} >= m = {m}")));
            }
        }
        if support.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidCode("support not strictly increasing".into()));
        }
        Ok(SparseCode { m, support })
    }

    pub fn empty(m: usize) -> Self {
        SparseCode {
            m,
            support: Vec::new(),
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of active dimensions.
    pub fn k(&self) -> usize {
        self.support.len()
    }

    pub fn support(&self) -> &[u32] {
        &self.support
    }

    pub fn contains(&self, i: u32) -> bool {
        self.support.binary_search(&i).is_ok()
    }
}

/// Indices whose value is at least `h`. Ties at exactly `h` are active.
pub fn encode(p: &ProjectionVector, h: f64) -> SparseCode {
    let support = p
        .values()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v >= h)
        .map(|(i, _)| i as u32)
        .collect();
    SparseCode { m: p.len(), support }
}

pub fn map_vector(t: &Transform, x: &UnitVector, h: f64) -> Result<SparseCode> {
    if !(h >= 0.0) {
        return Err(Error::InvalidParams(format!("threshold h = {h} must be >= 0")));
    }
    Ok(encode(&t.apply(x)?, h))
}

/// `|support(c1) & support(c2)|`.
pub fn overlap(c1: &SparseCode, c2: &SparseCode) -> Result<usize> {
    if c1.m != c2.m {
        return Err(Error::CodeLengthMismatch(c1.m, c2.m));
    }
    let (a, b) = (&c1.support, &c2.support);
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    Ok(n)
}

/// Overlap score `|support(c1) & support(c2)| / m`.
pub fn score(c1: &SparseCode, c2: &SparseCode) -> Result<f64> {
    Ok(overlap(c1, c2)? as f64 / c1.m as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn code(m: usize, s: &[u32]) -> SparseCode {
        SparseCode::new(m, s.to_vec()).unwrap()
    }

    #[test]
    fn encode_examples() {
        let p = ProjectionVector::new(vec![3.5, 0.2, -1.0]);
        assert_eq!(encode(&p, 3.0).support(), &[0]);
        let p = ProjectionVector::new(vec![0.1, -0.1, 0.0]);
        assert_eq!(encode(&p, 0.0).support(), &[0, 2]);
        let p = ProjectionVector::new(vec![0.1, 0.2]);
        assert_eq!(encode(&p, 1.0).k(), 0);
    }

    #[test]
    fn score_examples() {
        let a = code(100, &[1, 5, 9, 20, 77]);
        assert_eq!(score(&a, &a).unwrap(), 0.05);
        assert_eq!(score(&code(100, &[1, 2]), &code(100, &[3, 4])).unwrap(), 0.0);
        assert_eq!(score(&code(8, &[1, 2, 3]), &code(8, &[2, 3, 5])).unwrap(), 0.25);
        assert!(matches!(
            score(&code(8, &[]), &code(9, &[])),
            Err(Error::CodeLengthMismatch(8, 9))
        ));
    }

    #[test]
    fn code_validation() {
        assert!(SparseCode::new(4, vec![0, 4]).is_err());
        assert!(SparseCode::new(4, vec![2, 2]).is_err());
        assert!(SparseCode::new(4, vec![3, 1]).is_err());
        assert!(SparseCode::new(4, vec![]).is_ok());
    }

    #[test]
    fn unit_vector_checks() {
        assert!(UnitVector::new(vec![0.6, 0.8]).is_ok());
        assert!(matches!(UnitVector::new(vec![0.6, 0.9]), Err(Error::NotUnitNorm(_))));
        assert!(matches!(UnitVector::new(vec![]), Err(Error::EmptyInput)));
        assert!(matches!(
            UnitVector::normalized(vec![0.0, 0.0]),
            Err(Error::ZeroVector(_))
        ));
        let v = UnitVector::normalized(vec![3.0, 4.0]).unwrap();
        assert_eq!(v.coords(), &[0.6, 0.8]);
    }

    #[test]
    fn huge_threshold_gives_empty_code() {
        let t = make_transform(TransformKind::Gaussian, 2, 512, 1).unwrap();
        let x = UnitVector::normalized(vec![1.0, 1.0]).unwrap();
        assert_eq!(map_vector(&t, &x, 1e3).unwrap().k(), 0);
        assert_eq!(map_vector(&t, &x, 1.0).unwrap(), map_vector(&t, &x, 1.0).unwrap());
        assert!(map_vector(&t, &x, -1.0).is_err());
    }

    fn arb_code(m: usize) -> impl Strategy<Value = SparseCode> {
        proptest::collection::btree_set(0..m as u32, 0..m.min(40))
            .prop_map(move |s| SparseCode::new(m, s.into_iter().collect()).unwrap())
    }

    proptest! {
        #[test]
        fn score_symmetric_and_bounded(a in arb_code(64), b in arb_code(64)) {
            let s = score(&a, &b).unwrap();
            prop_assert_eq!(s, score(&b, &a).unwrap());
            prop_assert!(s >= 0.0);
            prop_assert!(s <= a.k().min(b.k()) as f64 / 64.0);
        }

        #[test]
        fn overlap_matches_set_intersection(a in arb_code(50), b in arb_code(50)) {
            let brute = a.support().iter().filter(|i| b.contains(**i)).count();
            prop_assert_eq!(overlap(&a, &b).unwrap(), brute);
        }
    }
}
