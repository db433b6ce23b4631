//! The shallow ReLU network with stable-initialized weights: raw, rescaled,
//! and bounded-activation forward passes plus exact parameter gradients.
//!
//! The activation indicator is strict: a pre-activation of exactly 0
//! contributes nothing to the output, and both gradients use subgradient 0
//! there. Widths m >= 2 are required wherever the `(m ln m)^{1/alpha}`
//! rescaling appears (so the logarithm is positive); the plain forward pass
//! and the bounded variant accept m >= 1.

use crate::error::{Error, Result};
use crate::stable::{StableParams, StableSampler};
use rand_chacha::ChaCha8Rng;

/// Full parameter set: inner weight rows `w_i0` (m x d, row-major) and outer
/// weights `w_i` (length m). All entries finite.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkWeights {
    m: usize,
    d: usize,
    inner: Vec<f64>,
    outer: Vec<f64>,
}

impl NetworkWeights {
    pub fn new(m: usize, d: usize, inner: Vec<f64>, outer: Vec<f64>) -> Result<Self> {
        if m < 1 {
            return Err(Error::WidthTooSmall(m));
        }
        if d < 1 {
            return Err(Error::DegenerateInput);
        }
        if inner.len() != m * d {
            return Err(Error::DimensionMismatch {
                expected: m * d,
                got: inner.len(),
            });
        }
        if outer.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: outer.len(),
            });
        }
        if inner.iter().chain(outer.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network weight"));
        }
        Ok(Self { m, d, inner, outer })
    }

    pub fn width(&self) -> usize {
        self.m
    }

    pub fn input_dim(&self) -> usize {
        self.d
    }

    /// Row-major inner weights, length m*d.
    pub fn inner(&self) -> &[f64] {
        &self.inner
    }

    pub fn inner_row(&self, i: usize) -> &[f64] {
        &self.inner[i * self.d..(i + 1) * self.d]
    }

    pub fn outer(&self) -> &[f64] {
        &self.outer
    }

    pub fn inner_mut(&mut self) -> &mut [f64] {
        &mut self.inner
    }

    pub fn outer_mut(&mut self) -> &mut [f64] {
        &mut self.outer
    }

    /// Frobenius distance over all m*d + m parameters.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        if self.m != other.m || self.d != other.d {
            return Err(Error::DimensionMismatch {
                expected: self.m * self.d + self.m,
                got: other.m * other.d + other.m,
            });
        }
        let mut acc = 0.0;
        for (a, b) in self
            .inner
            .iter()
            .chain(self.outer.iter())
            .zip(other.inner.iter().chain(other.outer.iter()))
        {
            let diff = a - b;
            acc += diff * diff;
        }
        Ok(acc.sqrt())
    }
}

/// The d x k input matrix as k columns. With `unit_norm`, every column has
/// Euclidean norm 1 within 1e-12. [`InputSet::new`] additionally requires the
/// columns to be linearly independent when k <= d;
/// [`InputSet::with_dependent_columns`] skips only that check, for studying
/// rank-deficient kernels on purpose.
#[derive(Debug, Clone, PartialEq)]
pub struct InputSet {
    d: usize,
    columns: Vec<Vec<f64>>,
    unit_norm: bool,
}

impl InputSet {
    pub fn new(columns: Vec<Vec<f64>>, unit_norm: bool) -> Result<Self> {
        let set = Self::with_dependent_columns(columns, unit_norm)?;
        let (k, d) = (set.num_inputs(), set.d);
        if k <= d {
            let mat = nalgebra::DMatrix::from_fn(d, k, |r, c| set.columns[c][r]);
            let rank = mat.rank(1e-10);
            if rank < k {
                return Err(Error::LinearlyDependent { rank, k });
            }
        }
        Ok(set)
    }

    pub fn with_dependent_columns(columns: Vec<Vec<f64>>, unit_norm: bool) -> Result<Self> {
        if columns.is_empty() || columns[0].is_empty() {
            return Err(Error::DegenerateInput);
        }
        let d = columns[0].len();
        for (j, col) in columns.iter().enumerate() {
            if col.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: col.len(),
                });
            }
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("input column"));
            }
            if unit_norm {
                let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
                if (norm - 1.0).abs() > 1e-12 {
                    return Err(Error::ColumnNotUnitNorm { index: j, norm });
                }
            }
        }
        Ok(Self { d, columns, unit_norm })
    }

    pub fn input_dim(&self) -> usize {
        self.d
    }

    pub fn num_inputs(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn unit_norm(&self) -> bool {
        self.unit_norm
    }
}

// ---------------------------------------------------------------------------
// Rescaling conventions
// ---------------------------------------------------------------------------

/// The width-dependent output divisor: `(m ln m)^{1/alpha}` for alpha < 2
/// (natural log, m >= 2), and `sqrt(m)` in the finite-variance baseline
/// alpha = 2 (no log factor).
pub fn rescale_divisor(m: usize, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 2.0) || !alpha.is_finite() {
        return Err(Error::InvalidAlpha(alpha));
    }
    if alpha == 2.0 {
        if m < 1 {
            return Err(Error::WidthTooSmall(m));
        }
        return Ok((m as f64).sqrt());
    }
    if m < 2 {
        return Err(Error::WidthTooSmall(m));
    }
    let m = m as f64;
    Ok((m * m.ln()).powf(1.0 / alpha))
}

fn check_dims(weights: &NetworkWeights, d: usize) -> Result<()> {
    if weights.d != d {
        return Err(Error::DimensionMismatch {
            expected: weights.d,
            got: d,
        });
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

// ---------------------------------------------------------------------------
// Input-set generators
// ---------------------------------------------------------------------------

/// One standard normal via Box-Muller on the raw uniform stream (input
/// generation only; weight initialization goes through the stable sampler).
fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    use rand::Rng;
    let u: f64 = rng.random::<f64>().max(1e-300);
    let v: f64 = rng.random();
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

/// k independent uniform draws from the unit sphere in R^d.
pub fn random_unit_columns(d: usize, k: usize, rng: &mut ChaCha8Rng) -> Result<InputSet> {
    if d < 1 || k < 1 {
        return Err(Error::DegenerateInput);
    }
    let mut columns = Vec::with_capacity(k);
    for _ in 0..k {
        loop {
            let v: Vec<f64> = (0..d).map(|_| standard_normal(rng)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-8 {
                columns.push(v.iter().map(|x| x / norm).collect());
                break;
            }
        }
    }
    InputSet::new(columns, true)
}

/// k orthonormal columns in R^d (k <= d): Gram-Schmidt on fresh Gaussian
/// vectors, redrawing any vector that lands too close to the current span.
pub fn orthonormal_columns(d: usize, k: usize, rng: &mut ChaCha8Rng) -> Result<InputSet> {
    if d < 1 || k < 1 {
        return Err(Error::DegenerateInput);
    }
    if k > d {
        return Err(Error::LinearlyDependent { rank: d, k });
    }
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
    while basis.len() < k {
        let mut v: Vec<f64> = (0..d).map(|_| standard_normal(rng)).collect();
        for b in &basis {
            let proj = dot(&v, b);
            for (x, y) in v.iter_mut().zip(b) {
                *x -= proj * y;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            basis.push(v.iter().map(|x| x / norm).collect());
        }
    }
    InputSet::new(basis, true)
}

/// The first k standard basis vectors of R^d (k <= d).
pub fn axis_aligned_columns(d: usize, k: usize) -> Result<InputSet> {
    if d < 1 || k < 1 {
        return Err(Error::DegenerateInput);
    }
    if k > d {
        return Err(Error::LinearlyDependent { rank: d, k });
    }
    let columns = (0..k)
        .map(|j| {
            let mut e = vec![0.0; d];
            e[j] = 1.0;
            e
        })
        .collect();
    InputSet::new(columns, true)
}

// ---------------------------------------------------------------------------
// Initialization and forward passes
// ---------------------------------------------------------------------------

/// All m*d + m entries i.i.d. symmetric standard stable St(alpha, 1).
pub fn init_weights(
    m: usize,
    d: usize,
    alpha: f64,
    rng: &mut ChaCha8Rng,
) -> Result<NetworkWeights> {
    if m < 2 {
        return Err(Error::WidthTooSmall(m));
    }
    if d < 1 {
        return Err(Error::DegenerateInput);
    }
    let sampler = StableSampler::new(StableParams::symmetric(alpha, 1.0)?);
    let mut inner = vec![0.0; m * d];
    let mut outer = vec![0.0; m];
    sampler.fill(rng, &mut inner);
    sampler.fill(rng, &mut outer);
    NetworkWeights::new(m, d, inner, outer)
}

/// Raw network output per input column:
/// `f(x_j) = sum_i w_i <w_i0, x_j> I(<w_i0, x_j> > 0)`.
pub fn forward_raw(weights: &NetworkWeights, inputs: &InputSet) -> Result<Vec<f64>> {
    check_dims(weights, inputs.d)?;
    let mut out = Vec::with_capacity(inputs.num_inputs());
    for col in &inputs.columns {
        let mut acc = 0.0;
        for i in 0..weights.m {
            let pre = dot(weights.inner_row(i), col);
            if pre > 0.0 {
                acc += weights.outer[i] * pre;
            }
        }
        out.push(acc);
    }
    Ok(out)
}

/// [`forward_raw`] divided by [`rescale_divisor`].
pub fn forward_rescaled(
    weights: &NetworkWeights,
    inputs: &InputSet,
    alpha: f64,
) -> Result<Vec<f64>> {
    let divisor = rescale_divisor(weights.m, alpha)?;
    let mut out = forward_raw(weights, inputs)?;
    for v in &mut out {
        *v /= divisor;
    }
    Ok(out)
}

/// Gradient of the rescaled output at one input with respect to the outer
/// weights: coordinate i is `divisor^{-1} <w_i0, x> I(<w_i0, x> > 0)`.
pub fn grad_outer(weights: &NetworkWeights, x: &[f64], alpha: f64) -> Result<Vec<f64>> {
    check_dims(weights, x.len())?;
    let divisor = rescale_divisor(weights.m, alpha)?;
    let mut g = Vec::with_capacity(weights.m);
    for i in 0..weights.m {
        let pre = dot(weights.inner_row(i), x);
        g.push(if pre > 0.0 { pre / divisor } else { 0.0 });
    }
    Ok(g)
}

/// Gradient of the rescaled output at one input with respect to the inner
/// weights, row-major m x d: row i is `divisor^{-1} w_i x I(<w_i0, x> > 0)`.
pub fn grad_inner(weights: &NetworkWeights, x: &[f64], alpha: f64) -> Result<Vec<f64>> {
    check_dims(weights, x.len())?;
    let divisor = rescale_divisor(weights.m, alpha)?;
    let d = weights.d;
    let mut g = vec![0.0; weights.m * d];
    for i in 0..weights.m {
        let pre = dot(weights.inner_row(i), x);
        if pre > 0.0 {
            let coeff = weights.outer[i] / divisor;
            for (slot, xv) in g[i * d..(i + 1) * d].iter_mut().zip(x) {
                *slot = coeff * xv;
            }
        }
    }
    Ok(g)
}

/// Bounded-activation variant: `m^{-1/alpha} sum_i w_i tanh(<w_i0, x_j>)`.
/// Accepts any m >= 1 (no log factor).
pub fn forward_bounded(
    weights: &NetworkWeights,
    inputs: &InputSet,
    alpha: f64,
) -> Result<Vec<f64>> {
    if !(alpha > 0.0 && alpha <= 2.0) || !alpha.is_finite() {
        return Err(Error::InvalidAlpha(alpha));
    }
    check_dims(weights, inputs.d)?;
    let scale = (weights.m as f64).powf(-1.0 / alpha);
    let mut out = Vec::with_capacity(inputs.num_inputs());
    for col in &inputs.columns {
        let mut acc = 0.0;
        for i in 0..weights.m {
            acc += weights.outer[i] * dot(weights.inner_row(i), col).tanh();
        }
        out.push(scale * acc);
    }
    Ok(out)
}
