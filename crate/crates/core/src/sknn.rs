// SPDX-License-Identifier: Apache-2.0

//! Secure kNN encryption of real vectors.
//!
//! A document vector `d` is extended to `(d, 1, ε_1..ε_u)` and a query `q`
//! to `(r·q, t, α_1..α_u)`. Both are split in two according to the secret
//! bit vector `s` and multiplied by the secret matrices, so that the sum of
//! the two half inner products equals `r·(d·q) + Σ ε_j·α_j + t` while
//! neither vector is revealed to the evaluator.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const KEYGEN_RETRIES: usize = 16;
const MIN_ABS_DET: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KeyRepr", into = "KeyRepr")]
pub struct SknnKey {
    s: Vec<bool>,
    m1: DMatrix<f64>,
    m2: DMatrix<f64>,
    m1_inv: DMatrix<f64>,
    m2_inv: DMatrix<f64>,
    m: usize,
    u: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncryptedDocVector {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncryptedQueryVector {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

/// How a per-query constant is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Draw {
    Fixed(f64),
    /// Uniform over `[lo, hi)`.
    Uniform { lo: f64, hi: f64 },
}

impl Draw {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Draw::Fixed(v) => v,
            Draw::Uniform { lo, hi } if hi > lo => rng.gen_range(lo..hi),
            Draw::Uniform { lo, .. } => lo,
        }
    }

    fn min(&self) -> f64 {
        match *self {
            Draw::Fixed(v) => v,
            Draw::Uniform { lo, .. } => lo,
        }
    }
}

/// Randomness parameters of the encryption: query scale `r`, query offset
/// `t`, document noise bound and the density of the query dummy bits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SknnParams {
    pub r: Draw,
    pub t: Draw,
    pub epsilon_max: f64,
    pub alpha_density: f64,
}

impl Default for SknnParams {
    fn default() -> Self {
        Self {
            r: Draw::Uniform { lo: 1.0, hi: 10.0 },
            t: Draw::Uniform { lo: -1.0, hi: 1.0 },
            epsilon_max: 0.01,
            alpha_density: 0.5,
        }
    }
}

impl SknnParams {
    /// Noise-free parameters: no document noise, random `r` and `t`.
    pub fn noise_free() -> Self {
        Self { epsilon_max: 0.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.r.min() <= 0.0 {
            return Err(Error::Config("query scale r must be positive".into()));
        }
        if self.epsilon_max.is_nan() || self.epsilon_max < 0.0 {
            return Err(Error::Config("epsilon_max must be nonnegative".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha_density) {
            return Err(Error::Config("alpha_density must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

impl SknnKey {
    /// Full encrypted dimension `m + u + 1`.
    pub fn dim(&self) -> usize {
        self.m + self.u + 1
    }

    /// Dimension of plaintext vectors.
    pub fn plain_dim(&self) -> usize {
        self.m
    }

    pub fn dummy_dims(&self) -> usize {
        self.u
    }

    pub fn split_bits(&self) -> &[bool] {
        &self.s
    }

    pub fn matrices(&self) -> (&DMatrix<f64>, &DMatrix<f64>) {
        (&self.m1, &self.m2)
    }

    /// Builds a key from explicit parts; matrices must be invertible.
    pub fn from_parts(s: Vec<bool>, m1: DMatrix<f64>, m2: DMatrix<f64>, m: usize) -> Result<Self> {
        let dim = s.len();
        if dim < m + 1 {
            return Err(Error::Config("split vector shorter than m + 1".into()));
        }
        for mat in [&m1, &m2] {
            if mat.nrows() != dim || mat.ncols() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: mat.nrows() });
            }
        }
        let m1_inv = invert(&m1).ok_or_else(|| Error::Config("M1 is singular".into()))?;
        let m2_inv = invert(&m2).ok_or_else(|| Error::Config("M2 is singular".into()))?;
        Ok(Self { s, m1, m2, m1_inv, m2_inv, m, u: dim - m - 1 })
    }
}

fn invert(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if m.determinant().abs() <= MIN_ABS_DET {
        return None;
    }
    m.clone().try_inverse()
}

fn random_matrix<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..=1.0))
}

pub fn sknn_keygen<R: Rng + ?Sized>(m: usize, u: usize, rng: &mut R) -> Result<SknnKey> {
    if m == 0 {
        return Err(Error::Config("plaintext dimension must be at least 1".into()));
    }
    let dim = m + u + 1;
    let s: Vec<bool> = (0..dim).map(|_| rng.gen()).collect();
    let mut draw = || -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        for _ in 0..KEYGEN_RETRIES {
            let mat = random_matrix(dim, rng);
            if let Some(inv) = invert(&mat) {
                return Ok((mat, inv));
            }
        }
        Err(Error::Config(format!(
            "no invertible {dim}x{dim} matrix after {KEYGEN_RETRIES} draws"
        )))
    };
    let (m1, m1_inv) = draw()?;
    let (m2, m2_inv) = draw()?;
    Ok(SknnKey { s, m1, m2, m1_inv, m2_inv, m, u })
}

/// `(d, 1, ε_1..ε_u)`.
pub fn extend_doc(d: &[f64], epsilons: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(d.len() + 1 + epsilons.len());
    out.extend_from_slice(d);
    out.push(1.0);
    out.extend_from_slice(epsilons);
    out
}

/// `(r·q, t, α_1..α_u)`.
pub fn extend_query(q: &[f64], r: f64, t: f64, alphas: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(q.len() + 1 + alphas.len());
    out.extend(q.iter().map(|v| r * v));
    out.push(t);
    out.extend_from_slice(alphas);
    out
}

/// Splits `value` into two random shares that sum to it.
fn random_split<R: Rng + ?Sized>(value: f64, rng: &mut R) -> (f64, f64) {
    let spread = value.abs() + 1.0;
    let first = rng.gen_range(-spread..=spread);
    (first, value - first)
}

/// Encrypts an already extended document vector.
pub fn encrypt_extended_doc<R: Rng + ?Sized>(
    key: &SknnKey,
    extended: &[f64],
    rng: &mut R,
) -> Result<EncryptedDocVector> {
    let dim = key.dim();
    if extended.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: extended.len() });
    }
    let mut first = DVector::zeros(dim);
    let mut second = DVector::zeros(dim);
    for (j, &v) in extended.iter().enumerate() {
        if key.s[j] {
            let (x, y) = random_split(v, rng);
            first[j] = x;
            second[j] = y;
        } else {
            first[j] = v;
            second[j] = v;
        }
    }
    Ok(EncryptedDocVector {
        a: key.m1.tr_mul(&first).as_slice().to_vec(),
        b: key.m2.tr_mul(&second).as_slice().to_vec(),
    })
}

/// Encrypts an already extended query vector (complementary split rule).
pub fn encrypt_extended_query<R: Rng + ?Sized>(
    key: &SknnKey,
    extended: &[f64],
    rng: &mut R,
) -> Result<EncryptedQueryVector> {
    let dim = key.dim();
    if extended.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: extended.len() });
    }
    let mut first = DVector::zeros(dim);
    let mut second = DVector::zeros(dim);
    for (j, &v) in extended.iter().enumerate() {
        if key.s[j] {
            first[j] = v;
            second[j] = v;
        } else {
            let (x, y) = random_split(v, rng);
            first[j] = x;
            second[j] = y;
        }
    }
    Ok(EncryptedQueryVector {
        a: (&key.m1_inv * first).as_slice().to_vec(),
        b: (&key.m2_inv * second).as_slice().to_vec(),
    })
}

/// Samples the document noise `ε_j ∈ [0, epsilon_max]`.
pub fn sample_epsilons<R: Rng + ?Sized>(u: usize, params: &SknnParams, rng: &mut R) -> Vec<f64> {
    (0..u)
        .map(|_| {
            if params.epsilon_max > 0.0 {
                rng.gen_range(0.0..=params.epsilon_max)
            } else {
                0.0
            }
        })
        .collect()
}

/// Samples the query dummy bits `α_j ∈ {0, 1}`.
pub fn sample_alphas<R: Rng + ?Sized>(u: usize, params: &SknnParams, rng: &mut R) -> Vec<f64> {
    (0..u)
        .map(|_| if rng.gen_bool(params.alpha_density) { 1.0 } else { 0.0 })
        .collect()
}

/// Encrypts a document vector, returning the extended plaintext as well.
pub fn sknn_enc_doc_traced<R: Rng + ?Sized>(
    key: &SknnKey,
    d: &[f64],
    params: &SknnParams,
    rng: &mut R,
) -> Result<(EncryptedDocVector, Vec<f64>)> {
    if d.len() != key.m {
        return Err(Error::DimensionMismatch { expected: key.m, got: d.len() });
    }
    let eps = sample_epsilons(key.u, params, rng);
    let extended = extend_doc(d, &eps);
    let enc = encrypt_extended_doc(key, &extended, rng)?;
    Ok((enc, extended))
}

pub fn sknn_enc_doc<R: Rng + ?Sized>(
    key: &SknnKey,
    d: &[f64],
    params: &SknnParams,
    rng: &mut R,
) -> Result<EncryptedDocVector> {
    sknn_enc_doc_traced(key, d, params, rng).map(|(enc, _)| enc)
}

/// Encrypts a query vector with caller-chosen `r` and `t`, returning the
/// extended plaintext as well.
pub fn sknn_enc_query_with<R: Rng + ?Sized>(
    key: &SknnKey,
    q: &[f64],
    r: f64,
    t: f64,
    params: &SknnParams,
    rng: &mut R,
) -> Result<(EncryptedQueryVector, Vec<f64>)> {
    if q.len() != key.m {
        return Err(Error::DimensionMismatch { expected: key.m, got: q.len() });
    }
    if r <= 0.0 {
        return Err(Error::Domain("query scale r must be positive".into()));
    }
    let alphas = sample_alphas(key.u, params, rng);
    let extended = extend_query(q, r, t, &alphas);
    let enc = encrypt_extended_query(key, &extended, rng)?;
    Ok((enc, extended))
}

pub fn sknn_enc_query<R: Rng + ?Sized>(
    key: &SknnKey,
    q: &[f64],
    params: &SknnParams,
    rng: &mut R,
) -> Result<EncryptedQueryVector> {
    let r = params.r.sample(rng);
    let t = params.t.sample(rng);
    sknn_enc_query_with(key, q, r, t, params, rng).map(|(enc, _)| enc)
}

#[inline]
pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn sknn_eval(doc: &EncryptedDocVector, qry: &EncryptedQueryVector) -> Result<f64> {
    if doc.a.len() != qry.a.len() || doc.b.len() != qry.b.len() {
        return Err(Error::DimensionMismatch { expected: doc.a.len(), got: qry.a.len() });
    }
    Ok(dot(&doc.a, &qry.a) + dot(&doc.b, &qry.b))
}

#[derive(Serialize, Deserialize)]
struct KeyRepr {
    m: usize,
    u: usize,
    s: Vec<bool>,
    m1: Vec<f64>,
    m2: Vec<f64>,
}

impl From<SknnKey> for KeyRepr {
    fn from(k: SknnKey) -> Self {
        let flat = |m: &DMatrix<f64>| m.transpose().as_slice().to_vec();
        KeyRepr { m: k.m, u: k.u, s: k.s.clone(), m1: flat(&k.m1), m2: flat(&k.m2) }
    }
}

impl TryFrom<KeyRepr> for SknnKey {
    type Error = Error;

    fn try_from(r: KeyRepr) -> Result<Self> {
        let dim = r.m + r.u + 1;
        if r.s.len() != dim || r.m1.len() != dim * dim || r.m2.len() != dim * dim {
            return Err(Error::Format("secure kNN key has inconsistent dimensions".into()));
        }
        let m1 = DMatrix::from_row_slice(dim, dim, &r.m1);
        let m2 = DMatrix::from_row_slice(dim, dim, &r.m2);
        SknnKey::from_parts(r.s, m1, m2, r.m)
    }
}
