use std::fmt;

use rand::{seq::index, Rng as _, RngCore};
use serde::{Deserialize, Serialize};

use super::{dct::dct2_in_place, ProjectionVector, UnitVector};
use crate::rng::{self, Rng};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    /// Dense `m x d` matrix of i.i.d. standard normals.
    Gaussian,
    /// `m/d'` sign-flipped copies of the zero-padded input, then a DCT-II.
    Structured,
    /// One random +-1 per input column at distinct rows, then a DCT-II.
    /// Kept as a negative control: its codes are biased.
    BiasedStructured,
}

impl TransformKind {
    pub fn code(self) -> u8 {
        match self {
            TransformKind::Gaussian => 0,
            TransformKind::Structured => 1,
            TransformKind::BiasedStructured => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(TransformKind::Gaussian),
            1 => Some(TransformKind::Structured),
            2 => Some(TransformKind::BiasedStructured),
            _ => None,
        }
    }
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TransformKind::Gaussian => "gaussian",
            TransformKind::Structured => "structured",
            TransformKind::BiasedStructured => "biased_structured",
        })
    }
}

impl std::str::FromStr for TransformKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "gaussian" => Ok(TransformKind::Gaussian),
            "structured" => Ok(TransformKind::Structured),
            "biased_structured" | "biased" => Ok(TransformKind::BiasedStructured),
            other => Err(Error::InvalidParams(format!("unknown transform kind {other:?}"))),
        }
    }
}

#[derive(Clone, PartialEq)]
enum State {
    /// Entries are regenerated row-major from `seed` unless materialized.
    Gaussian { matrix: Option<Vec<f64>> },
    /// Bit `j` set means row `j` of `D` is negated.
    Structured { padded_d: usize, signs: Vec<u64> },
    /// Column `c` of `D` has its single nonzero `signs[c]` at `rows[c]`.
    Biased { rows: Vec<usize>, signs: Vec<f64> },
}

/// A seeded random linear map from `R^d` to `R^m`.
///
/// Immutable once built and `Sync`, so one transform can be applied from many
/// threads.
#[derive(Clone, PartialEq)]
pub struct Transform {
    kind: TransformKind,
    d: usize,
    m: usize,
    seed: u64,
    state: State,
}

impl fmt::Debug for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Transform")
            .field("kind", &self.kind)
            .field("d", &self.d)
            .field("m", &self.m)
            .field("seed", &self.seed)
            .finish_non_exhaustive()
    }
}

pub fn make_transform(kind: TransformKind, d: usize, m: usize, seed: u64) -> Result<Transform> {
    if d == 0 || m == 0 {
        return Err(Error::InvalidDimensions(format!("d = {d}, m = {m}")));
    }
    let mut g = rng::seeded(seed);
    let state = match kind {
        TransformKind::Gaussian => State::Gaussian { matrix: None },
        TransformKind::Structured | TransformKind::BiasedStructured => {
            if !m.is_power_of_two() {
                return Err(Error::NotPowerOfTwo(m));
            }
            if m < d {
                return Err(Error::InvalidDimensions(format!("m = {m} < d = {d}")));
            }
            if kind == TransformKind::Structured {
                let padded_d = d.next_power_of_two();
                let signs = (0..m.div_ceil(64)).map(|_| g.next_u64()).collect();
                State::Structured { padded_d, signs }
            } else {
                let rows = index::sample(&mut g, m, d).into_vec();
                let signs = (0..d)
                    .map(|_| if g.random::<bool>() { -1.0 } else { 1.0 })
                    .collect();
                State::Biased { rows, signs }
            }
        }
    };
    Ok(Transform {
        kind,
        d,
        m,
        seed,
        state,
    })
}

fn gaussian_rows(seed: u64) -> Rng {
    rng::seeded(seed)
}

impl Transform {
    pub fn kind(&self) -> TransformKind {
        self.kind
    }

    pub fn input_dim(&self) -> usize {
        self.d
    }

    pub fn output_dim(&self) -> usize {
        self.m
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Zero-padded input dimension of the structured map (`d` for the others).
    pub fn padded_dim(&self) -> usize {
        match &self.state {
            State::Structured { padded_d, .. } => *padded_d,
            _ => self.d,
        }
    }

    /// Number of random signs held by the transform (0 for Gaussian).
    pub fn sign_count(&self) -> usize {
        match &self.state {
            State::Gaussian { .. } => 0,
            State::Structured { .. } => self.m,
            State::Biased { signs, .. } => signs.len(),
        }
    }

    /// Store the Gaussian matrix instead of regenerating it on every call.
    /// Outputs are bit-identical either way. No-op for the other kinds.
    pub fn materialize(mut self) -> Self {
        if let State::Gaussian { matrix: None } = self.state {
            let mut g = gaussian_rows(self.seed);
            let entries = (0..self.m * self.d)
                .map(|_| rng::standard_normal(&mut g))
                .collect();
            self.state = State::Gaussian {
                matrix: Some(entries),
            };
        }
        self
    }

    pub fn is_materialized(&self) -> bool {
        matches!(self.state, State::Gaussian { matrix: Some(_) })
    }

    pub fn apply(&self, x: &UnitVector) -> Result<ProjectionVector> {
        Ok(self.apply_batch(&[x])?.pop().expect("one input, one output"))
    }

    /// Apply to several inputs at once; the Gaussian matrix is generated once
    /// for the whole batch.
    pub fn apply_batch(&self, xs: &[&UnitVector]) -> Result<Vec<ProjectionVector>> {
        for x in xs {
            if x.dim() != self.d {
                return Err(Error::DimensionMismatch {
                    expected: self.d,
                    got: x.dim(),
                });
            }
        }
        let outs = match &self.state {
            State::Gaussian { matrix } => self.apply_gaussian(matrix.as_deref(), xs),
            State::Structured { padded_d, signs } => xs
                .iter()
                .map(|x| self.apply_structured(*padded_d, signs, x))
                .collect(),
            State::Biased { rows, signs } => xs
                .iter()
                .map(|x| {
                    let mut u = vec![0.0; self.m];
                    for ((&row, &s), &xi) in rows.iter().zip(signs).zip(x.coords()) {
                        u[row] = s * xi;
                    }
                    // |u| = 1 here, so scale by m to land on |v|^2 = m.
                    dct2_in_place(&mut u, self.m);
                    u
                })
                .collect(),
        };
        Ok(outs.into_iter().map(ProjectionVector::new).collect())
    }

    fn apply_gaussian(&self, matrix: Option<&[f64]>, xs: &[&UnitVector]) -> Vec<Vec<f64>> {
        let d = self.d;
        let mut outs = vec![vec![0.0; self.m]; xs.len()];
        let mut row = vec![0.0; d];
        let mut g = gaussian_rows(self.seed);
        for i in 0..self.m {
            let a = match matrix {
                Some(mat) => &mat[i * d..(i + 1) * d],
                None => {
                    for r in row.iter_mut() {
                        *r = rng::standard_normal(&mut g);
                    }
                    &row[..]
                }
            };
            for (out, x) in outs.iter_mut().zip(xs) {
                out[i] = a.iter().zip(x.coords()).map(|(p, q)| p * q).sum();
            }
        }
        outs
    }

    fn apply_structured(&self, padded_d: usize, signs: &[u64], x: &UnitVector) -> Vec<f64> {
        let mut u = vec![0.0; self.m];
        let coords = x.coords();
        for (j, slot) in u.iter_mut().enumerate() {
            let c = j % padded_d;
            if c < coords.len() {
                let neg = (signs[j / 64] >> (j % 64)) & 1 == 1;
                *slot = if neg { -coords[c] } else { coords[c] };
            }
        }
        dct2_in_place(&mut u, padded_d);
        u
    }
}
