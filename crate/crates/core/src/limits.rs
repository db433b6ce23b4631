//! Closed-form infinite-width limit objects: activation regions and their
//! probabilities, the spectral measure of the limiting output process, the
//! two spectral measures of the limiting rescaled kernel, and exact samplers
//! for both limits.
//!
//! The kernel measures carry a selectable prefactor convention
//! ([`PrefactorMode`]): `Nominal` uses `c_alpha(alpha/2)` in front of
//! both measures; `TailConsistent` uses `c_alpha(alpha) / c_alpha(alpha/2)`
//! for the region part and `c_alpha(alpha) / (2 c_alpha(alpha/2))` for the
//! coordinate part. The latter is what the one-summand tail
//! `r^{alpha/2} P(w^2 I(w0 > 0) > r) -> c_alpha / 2` forces, and is the
//! default once calibration against finite-width samples confirms it.

use crate::error::{Error, Result};
use crate::network::InputSet;
use crate::spectral::{sample_discrete_spectral, DiscreteSpectralMeasure};
use crate::stable::{c_alpha, StableParams, StableSampler};
use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;

/// Enumerating activation regions scans all 2^k sign patterns; k is capped
/// so that the scan stays tractable.
pub const MAX_REGION_INPUTS: usize = 16;

// ---------------------------------------------------------------------------
// Activation regions
// ---------------------------------------------------------------------------

/// A sign pattern u in {0,1}^k naming the activation region
/// `B_u = {v : <v,x_j> > 0 if u_j = 1, <v,x_j> <= 0 if u_j = 0}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RegionIndex {
    k: usize,
    bits: u32,
}

impl RegionIndex {
    pub fn from_bits(k: usize, bits: u32) -> Result<Self> {
        if k == 0 || k > MAX_REGION_INPUTS {
            return Err(Error::TooManyRegions { k, max: MAX_REGION_INPUTS });
        }
        if bits >> k != 0 {
            return Err(Error::DimensionMismatch { expected: k, got: 32 - bits.leading_zeros() as usize });
        }
        Ok(Self { k, bits })
    }

    pub fn from_pattern(pattern: &[bool]) -> Result<Self> {
        let mut bits = 0u32;
        for (j, &b) in pattern.iter().enumerate() {
            if b {
                bits |= 1 << j;
            }
        }
        Self::from_bits(pattern.len(), bits)
    }

    /// All 2^k patterns in increasing bit order.
    pub fn all(k: usize) -> Result<impl Iterator<Item = RegionIndex>> {
        if k == 0 || k > MAX_REGION_INPUTS {
            return Err(Error::TooManyRegions { k, max: MAX_REGION_INPUTS });
        }
        Ok((0u32..1 << k).map(move |bits| RegionIndex { k, bits }))
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Is input j on the active side?
    pub fn get(&self, j: usize) -> bool {
        (self.bits >> j) & 1 == 1
    }

    pub fn is_zero(&self) -> bool {
        self.bits == 0
    }
}

impl std::fmt::Display for RegionIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for j in 0..self.k {
            write!(f, "{}", if self.get(j) { '1' } else { '0' })?;
        }
        Ok(())
    }
}

/// The region containing `v`: `u_j = 1` iff `<v, x_j> > 0`; a boundary value
/// of exactly 0 goes to the inactive side.
pub fn region_of(v: &[f64], inputs: &InputSet) -> Result<RegionIndex> {
    if v.len() != inputs.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: inputs.input_dim(),
            got: v.len(),
        });
    }
    let mut bits = 0u32;
    for (j, col) in inputs.columns().iter().enumerate() {
        let dot: f64 = v.iter().zip(col).map(|(a, b)| a * b).sum();
        if dot > 0.0 {
            bits |= 1 << j;
        }
    }
    RegionIndex::from_bits(inputs.num_inputs(), bits)
}

// ---------------------------------------------------------------------------
// Orthant probabilities
// ---------------------------------------------------------------------------

/// A Monte Carlo probability with its binomial standard error; exact results
/// (from the axis-aligned shortcut) carry `se = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrthantEstimate {
    pub p: f64,
    pub se: f64,
}

const MIN_ORTHANT_SAMPLES: usize = 10_000;

/// Columns that each touch exactly one (distinct) coordinate axis: then the
/// region events are independent fair signs and every P(B_u) is exactly 2^-k.
fn axis_aligned_orthogonal(inputs: &InputSet) -> bool {
    let mut used = vec![false; inputs.input_dim()];
    for col in inputs.columns() {
        let nonzero: Vec<usize> = col
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, _)| i)
            .collect();
        match nonzero.as_slice() {
            [axis] if !used[*axis] => used[*axis] = true,
            _ => return false,
        }
    }
    true
}

fn stable_direction_sampler(alpha: f64) -> Result<StableSampler> {
    Ok(StableSampler::new(StableParams::symmetric(alpha, 1.0)?))
}

/// P(B_u) for one region, estimated from `n >= 10^4` i.i.d. vectors with
/// independent symmetric standard stable components (exact 2^-k shortcut for
/// axis-aligned orthogonal inputs).
pub fn orthant_prob(
    inputs: &InputSet,
    u: RegionIndex,
    alpha: f64,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<OrthantEstimate> {
    if u.k() != inputs.num_inputs() {
        return Err(Error::DimensionMismatch {
            expected: inputs.num_inputs(),
            got: u.k(),
        });
    }
    if n < MIN_ORTHANT_SAMPLES {
        return Err(Error::TooFewSamples { need: MIN_ORTHANT_SAMPLES, got: n });
    }
    if axis_aligned_orthogonal(inputs) {
        return Ok(OrthantEstimate {
            p: 0.5f64.powi(inputs.num_inputs() as i32),
            se: 0.0,
        });
    }
    let sampler = stable_direction_sampler(alpha)?;
    let d = inputs.input_dim();
    let mut v = vec![0.0; d];
    let mut count = 0usize;
    for _ in 0..n {
        sampler.fill(rng, &mut v);
        if region_of(&v, inputs)? == u {
            count += 1;
        }
    }
    let p = count as f64 / n as f64;
    Ok(OrthantEstimate {
        p,
        se: (p * (1.0 - p) / n as f64).sqrt(),
    })
}

/// P(B_u) for every u in {0,1}^k at once, indexed by `u.bits()`. One shared
/// sample is classified into regions, so the estimates sum to 1 exactly up
/// to float rounding of the final divisions.
pub fn orthant_probs_all(
    inputs: &InputSet,
    alpha: f64,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<OrthantEstimate>> {
    let k = inputs.num_inputs();
    if k == 0 || k > MAX_REGION_INPUTS {
        return Err(Error::TooManyRegions { k, max: MAX_REGION_INPUTS });
    }
    if n < MIN_ORTHANT_SAMPLES {
        return Err(Error::TooFewSamples { need: MIN_ORTHANT_SAMPLES, got: n });
    }
    if axis_aligned_orthogonal(inputs) {
        let p = 0.5f64.powi(k as i32);
        return Ok(vec![OrthantEstimate { p, se: 0.0 }; 1 << k]);
    }
    let sampler = stable_direction_sampler(alpha)?;
    let d = inputs.input_dim();
    let mut v = vec![0.0; d];
    let mut counts = vec![0usize; 1 << k];
    for _ in 0..n {
        sampler.fill(rng, &mut v);
        counts[region_of(&v, inputs)?.bits() as usize] += 1;
    }
    Ok(counts
        .into_iter()
        .map(|c| {
            let p = c as f64 / n as f64;
            OrthantEstimate {
                p,
                se: (p * (1.0 - p) / n as f64).sqrt(),
            }
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Spectral measure of the limiting output process
// ---------------------------------------------------------------------------

/// Spectral measure of the limiting output process on S^{k-1}:
/// `(c_alpha/4) sum_i [ |p_i|^alpha (delta(p_i/|p_i|) + delta(-p_i/|p_i|))
///                    + |n_i|^alpha (delta(n_i/|n_i|) + delta(-n_i/|n_i|)) ]`
/// where `p_i = [x_{ji} I(x_{ji} > 0)]_j` and `n_i = [x_{ji} I(x_{ji} < 0)]_j`
/// collect the signed parts of coordinate i across the k inputs. Vanishing
/// parts are omitted; coincident directions merge.
pub fn spectral_gamma_x(inputs: &InputSet, alpha: f64) -> Result<DiscreteSpectralMeasure> {
    if !(alpha > 0.0 && alpha < 2.0) || !alpha.is_finite() {
        return Err(Error::AlphaNotStrictlyStable(alpha));
    }
    let k = inputs.num_inputs();
    let d = inputs.input_dim();
    let quarter = c_alpha(alpha)? / 4.0;
    let mut atoms: Vec<(Vec<f64>, f64)> = Vec::new();
    for i in 0..d {
        for keep_positive in [true, false] {
            let part: Vec<f64> = (0..k)
                .map(|j| {
                    let v = inputs.column(j)[i];
                    if (keep_positive && v > 0.0) || (!keep_positive && v < 0.0) {
                        v
                    } else {
                        0.0
                    }
                })
                .collect();
            let norm = part.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                continue;
            }
            let weight = quarter * norm.powf(alpha);
            let dir: Vec<f64> = part.iter().map(|v| v / norm).collect();
            let neg: Vec<f64> = dir.iter().map(|v| -v).collect();
            atoms.push((dir, weight));
            atoms.push((neg, weight));
        }
    }
    if atoms.is_empty() {
        return Err(Error::DegenerateInput);
    }
    DiscreteSpectralMeasure::new(k, atoms)
}

/// One draw from the limiting output process (length-k vector); the law is
/// the symmetric stable law with spectral measure `gamma_x`.
pub fn sample_limit_process(
    gamma_x: &DiscreteSpectralMeasure,
    alpha: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    sample_discrete_spectral(gamma_x, alpha, rng)
}

// ---------------------------------------------------------------------------
// Spectral measures of the limiting kernel
// ---------------------------------------------------------------------------

/// Prefactor convention for the two kernel measures; see the module docs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrefactorMode {
    Nominal,
    TailConsistent,
}

impl PrefactorMode {
    /// Prefactor on the region measure (`gamma_star_1`).
    pub fn region_prefactor(self, alpha: f64) -> Result<f64> {
        match self {
            PrefactorMode::Nominal => c_alpha(alpha / 2.0),
            PrefactorMode::TailConsistent => Ok(c_alpha(alpha)? / c_alpha(alpha / 2.0)?),
        }
    }

    /// Prefactor on the coordinate measure (`gamma_star_2`).
    pub fn coordinate_prefactor(self, alpha: f64) -> Result<f64> {
        match self {
            PrefactorMode::Nominal => c_alpha(alpha / 2.0),
            PrefactorMode::TailConsistent => {
                Ok(c_alpha(alpha)? / (2.0 * c_alpha(alpha / 2.0)?))
            }
        }
    }
}

fn check_strict_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 2.0) || !alpha.is_finite() {
        return Err(Error::AlphaNotStrictlyStable(alpha));
    }
    Ok(())
}

/// Region part of the limit-kernel spectral measure, over flattened k x k
/// matrices: for every nonzero u, the normalized masked Gram matrix
/// `G_u = [<x_j, x_j'> u_j u_j']` is one atom with weight
/// `prefactor * P(B_u) * |G_u|_F^{alpha/2}`.
pub fn gamma_star_1(
    inputs: &InputSet,
    alpha: f64,
    orthant_probs: &[OrthantEstimate],
    mode: PrefactorMode,
) -> Result<DiscreteSpectralMeasure> {
    check_strict_alpha(alpha)?;
    let k = inputs.num_inputs();
    if orthant_probs.len() != 1usize << k {
        return Err(Error::DimensionMismatch {
            expected: 1usize << k,
            got: orthant_probs.len(),
        });
    }
    let prefactor = mode.region_prefactor(alpha)?;
    let gram: Vec<f64> = (0..k * k)
        .map(|idx| {
            let (j, jp) = (idx / k, idx % k);
            inputs
                .column(j)
                .iter()
                .zip(inputs.column(jp))
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect();
    let mut atoms = Vec::new();
    for u in RegionIndex::all(k)? {
        if u.is_zero() {
            continue;
        }
        let masked: Vec<f64> = (0..k * k)
            .map(|idx| {
                let (j, jp) = (idx / k, idx % k);
                if u.get(j) && u.get(jp) {
                    gram[idx]
                } else {
                    0.0
                }
            })
            .collect();
        let fro = masked.iter().map(|v| v * v).sum::<f64>().sqrt();
        if fro == 0.0 {
            continue;
        }
        let weight = prefactor * orthant_probs[u.bits() as usize].p * fro.powf(alpha / 2.0);
        atoms.push((masked.iter().map(|v| v / fro).collect(), weight));
    }
    DiscreteSpectralMeasure::new(k * k, atoms)
}

/// Coordinate part of the limit-kernel spectral measure: for each coordinate
/// i and sign, the region containing `sign * e_i` is `u_j = 1` iff
/// `sign * x_{ji} > 0`; with `v = [x_{ji} u_j]_j` the atom is the rank-1
/// direction `v v^T / |v|^2` with weight `prefactor * |v|^alpha`. At most 2d
/// atoms before pruning; fully deterministic.
pub fn gamma_star_2(
    inputs: &InputSet,
    alpha: f64,
    mode: PrefactorMode,
) -> Result<DiscreteSpectralMeasure> {
    check_strict_alpha(alpha)?;
    let k = inputs.num_inputs();
    if k > MAX_REGION_INPUTS {
        return Err(Error::TooManyRegions { k, max: MAX_REGION_INPUTS });
    }
    let prefactor = mode.coordinate_prefactor(alpha)?;
    let mut atoms = Vec::new();
    for i in 0..inputs.input_dim() {
        for sign in [1.0, -1.0] {
            let v: Vec<f64> = (0..k)
                .map(|j| {
                    let x = inputs.column(j)[i];
                    if sign * x > 0.0 {
                        x
                    } else {
                        0.0
                    }
                })
                .collect();
            let norm_sq: f64 = v.iter().map(|a| a * a).sum();
            if norm_sq == 0.0 {
                continue;
            }
            let direction: Vec<f64> = (0..k * k)
                .map(|idx| v[idx / k] * v[idx % k] / norm_sq)
                .collect();
            atoms.push((direction, prefactor * norm_sq.powf(alpha / 2.0)));
        }
    }
    DiscreteSpectralMeasure::new(k * k, atoms)
}

/// The full limit law of the rescaled kernel: an (alpha/2)-stable law on
/// k x k matrices given by two independent components.
#[derive(Debug, Clone)]
pub struct LimitKernelLaw {
    k: usize,
    alpha_half: f64,
    gamma1: DiscreteSpectralMeasure,
    gamma2: DiscreteSpectralMeasure,
    mode: PrefactorMode,
}

impl LimitKernelLaw {
    /// Builds both measures for `inputs`; `orthant_probs` must cover all 2^k
    /// regions (see [`orthant_probs_all`]).
    pub fn new(
        inputs: &InputSet,
        alpha: f64,
        orthant_probs: &[OrthantEstimate],
        mode: PrefactorMode,
    ) -> Result<Self> {
        let gamma1 = gamma_star_1(inputs, alpha, orthant_probs, mode)?;
        let gamma2 = gamma_star_2(inputs, alpha, mode)?;
        Self::from_measures(inputs.num_inputs(), alpha, gamma1, gamma2, mode)
    }

    /// Assembles a law from prebuilt measures, validating that every atom
    /// direction reshapes to a symmetric PSD matrix (unit Frobenius norm is
    /// already guaranteed by the measure type).
    pub fn from_measures(
        k: usize,
        alpha: f64,
        gamma1: DiscreteSpectralMeasure,
        gamma2: DiscreteSpectralMeasure,
        mode: PrefactorMode,
    ) -> Result<Self> {
        check_strict_alpha(alpha)?;
        for gamma in [&gamma1, &gamma2] {
            if gamma.dim() != k * k {
                return Err(Error::DimensionMismatch {
                    expected: k * k,
                    got: gamma.dim(),
                });
            }
            for (direction, _) in gamma.atoms() {
                let mat = DMatrix::from_row_slice(k, k, direction);
                let asym = (&mat - mat.transpose()).abs().max();
                if asym > 1e-10 {
                    return Err(Error::NotSymmetric(asym));
                }
                let min_eig = mat
                    .clone()
                    .symmetric_eigen()
                    .eigenvalues
                    .iter()
                    .fold(f64::INFINITY, |a, &b| a.min(b));
                if min_eig < -1e-10 {
                    return Err(Error::NonFinite("kernel atom direction is not PSD"));
                }
            }
        }
        Ok(Self {
            k,
            alpha_half: alpha / 2.0,
            gamma1,
            gamma2,
            mode,
        })
    }

    pub fn num_inputs(&self) -> usize {
        self.k
    }

    pub fn alpha_half(&self) -> f64 {
        self.alpha_half
    }

    pub fn region_measure(&self) -> &DiscreteSpectralMeasure {
        &self.gamma1
    }

    pub fn coordinate_measure(&self) -> &DiscreteSpectralMeasure {
        &self.gamma2
    }

    pub fn prefactor_mode(&self) -> PrefactorMode {
        self.mode
    }
}

/// One draw of the limiting kernel: the sum of independent draws from the
/// two component measures at index alpha/2, reshaped to k x k. PSD because
/// every atom direction is PSD and the one-sided coefficients are positive.
pub fn sample_limit_kernel(law: &LimitKernelLaw, rng: &mut ChaCha8Rng) -> Result<DMatrix<f64>> {
    let k = law.k;
    let a = sample_discrete_spectral(&law.gamma1, law.alpha_half, rng)?;
    let b = sample_discrete_spectral(&law.gamma2, law.alpha_half, rng)?;
    Ok(DMatrix::from_row_iterator(
        k,
        k,
        a.iter().zip(&b).map(|(x, y)| x + y),
    ))
}
