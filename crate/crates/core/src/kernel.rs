//! The finite-width tangent kernel: assembly from parameter gradients, the
//! `(ln m)^{2/alpha}` rescaling, the two-part decomposition, and the small
//! dense spectral utilities the eigenvalue statements need.

use crate::error::{Error, Result};
use crate::network::{rescale_divisor, InputSet, NetworkWeights};
use nalgebra::DMatrix;

/// The two rescaled kernel components: `h1` carries the outer-weight factors
/// `w_i^2 <x_j, x_j'> I_j I_j'`, `h2` the pre-activation products
/// `<w_i0,x_j>+ <w_i0,x_j'>+`, both scaled by `m^{-2/alpha}`. Both are
/// symmetric PSD, and their sum is the rescaled full kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelPair {
    h1: DMatrix<f64>,
    h2: DMatrix<f64>,
}

impl KernelPair {
    /// Validates symmetry (1e-10) and positive semi-definiteness
    /// (min eigenvalue >= -1e-10) of both parts.
    pub fn new(h1: DMatrix<f64>, h2: DMatrix<f64>) -> Result<Self> {
        if h1.nrows() != h1.ncols() || h1.shape() != h2.shape() {
            return Err(Error::DimensionMismatch {
                expected: h1.nrows() * h1.nrows(),
                got: h2.nrows() * h2.ncols(),
            });
        }
        for m in [&h1, &h2] {
            let asym = (m - m.transpose()).abs().max();
            if asym > 1e-10 {
                return Err(Error::NotSymmetric(asym));
            }
            if min_eigenvalue(m)? < -1e-10 {
                return Err(Error::NonFinite("kernel part is not PSD"));
            }
        }
        Ok(Self { h1, h2 })
    }

    /// Outer-weight part (`w_i^2` factors).
    pub fn h1(&self) -> &DMatrix<f64> {
        &self.h1
    }

    /// Pre-activation part.
    pub fn h2(&self) -> &DMatrix<f64> {
        &self.h2
    }

    /// `h1 + h2`, i.e. the rescaled full kernel.
    pub fn total(&self) -> DMatrix<f64> {
        &self.h1 + &self.h2
    }
}

/// The factor turning the raw kernel into the rescaled one:
/// `(ln m)^{2/alpha}` for alpha < 2 (m >= 2), and 1 in the alpha = 2
/// baseline, where the `sqrt(m)` output scaling already leaves the kernel
/// order one.
pub fn kernel_rescale(m: usize, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 2.0) || !alpha.is_finite() {
        return Err(Error::InvalidAlpha(alpha));
    }
    if alpha == 2.0 {
        if m < 1 {
            return Err(Error::WidthTooSmall(m));
        }
        return Ok(1.0);
    }
    if m < 2 {
        return Err(Error::WidthTooSmall(m));
    }
    Ok((m as f64).ln().powf(2.0 / alpha))
}

/// Shared per-neuron activation statistics: `pos[i][j] = <w_i0, x_j>+`,
/// `wind[i][j] = w_i I(<w_i0, x_j> > 0)`, and the input Gram matrix.
fn activation_stats(
    weights: &NetworkWeights,
    inputs: &InputSet,
) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    if weights.input_dim() != inputs.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: weights.input_dim(),
            got: inputs.input_dim(),
        });
    }
    let m = weights.width();
    let k = inputs.num_inputs();
    let mut pos = DMatrix::zeros(m, k);
    let mut wind = DMatrix::zeros(m, k);
    for i in 0..m {
        let row = weights.inner_row(i);
        for j in 0..k {
            let pre: f64 = row.iter().zip(inputs.column(j)).map(|(a, b)| a * b).sum();
            if pre > 0.0 {
                pos[(i, j)] = pre;
                wind[(i, j)] = weights.outer()[i];
            }
        }
    }
    let gram = DMatrix::from_fn(k, k, |j, jp| {
        inputs
            .column(j)
            .iter()
            .zip(inputs.column(jp))
            .map(|(a, b)| a * b)
            .sum()
    });
    Ok((pos, wind, gram))
}

/// The raw tangent kernel: the Gram matrix of the full rescaled-output
/// gradients, `H[j,j'] = <grad f(x_j), grad f(x_j')>` over all m*d + m
/// parameters. Symmetric PSD by construction.
pub fn ntk(weights: &NetworkWeights, inputs: &InputSet, alpha: f64) -> Result<DMatrix<f64>> {
    let divisor = rescale_divisor(weights.width(), alpha)?;
    let (pos, wind, gram) = activation_stats(weights, inputs)?;
    let s1 = (wind.transpose() * &wind).component_mul(&gram);
    let s2 = pos.transpose() * pos;
    Ok((s1 + s2) / (divisor * divisor))
}

/// `kernel_rescale(m, alpha) * ntk`: the kernel on the scale where the
/// infinite-width limit is nondegenerate.
pub fn rescaled_ntk(
    weights: &NetworkWeights,
    inputs: &InputSet,
    alpha: f64,
) -> Result<DMatrix<f64>> {
    Ok(ntk(weights, inputs, alpha)? * kernel_rescale(weights.width(), alpha)?)
}

/// The two-part decomposition of the rescaled kernel; `h1 + h2` equals
/// [`rescaled_ntk`] to within float rounding (1e-10 at order-one entries).
pub fn decompose(
    weights: &NetworkWeights,
    inputs: &InputSet,
    alpha: f64,
) -> Result<KernelPair> {
    // validates alpha and m for the same domain as the rescaled kernel
    kernel_rescale(weights.width(), alpha)?;
    let (pos, wind, gram) = activation_stats(weights, inputs)?;
    let factor = (weights.width() as f64).powf(-2.0 / alpha);
    let h1 = (wind.transpose() * &wind).component_mul(&gram) * factor;
    let h2 = pos.transpose() * pos * factor;
    KernelPair::new(h1, h2)
}

/// Smallest eigenvalue of a symmetric matrix. Inputs asymmetric beyond 1e-8
/// are rejected; smaller float noise is absorbed by averaging with the
/// transpose before the dense symmetric decomposition.
pub fn min_eigenvalue(matrix: &DMatrix<f64>) -> Result<f64> {
    if matrix.nrows() != matrix.ncols() {
        return Err(Error::DimensionMismatch {
            expected: matrix.nrows(),
            got: matrix.ncols(),
        });
    }
    let asym = (matrix - matrix.transpose()).abs().max();
    if asym > 1e-8 {
        return Err(Error::NotSymmetric(asym));
    }
    let sym = (matrix + matrix.transpose()) * 0.5;
    Ok(sym
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b)))
}

/// `|A - B|_F` over all entries.
pub fn frobenius_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows() * a.ncols(),
            got: b.nrows() * b.ncols(),
        });
    }
    Ok((a - b).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::init_weights;
    use crate::rng::stream_rng;

    /// Hand configuration: m = 2, second neuron inactive on x = e1.
    fn hand_config() -> (NetworkWeights, InputSet) {
        let w = NetworkWeights::new(2, 2, vec![2.0, 0.0, -1.0, 0.0], vec![1.0, 9.0]).unwrap();
        let x = InputSet::new(vec![vec![1.0, 0.0]], true).unwrap();
        (w, x)
    }

    #[test]
    fn ntk_hand_example() {
        let (w, x) = hand_config();
        let alpha = 1.0;
        let h = ntk(&w, &x, alpha).unwrap();
        let d2 = (2.0 * 2.0f64.ln()).powi(2);
        // active neuron: outer grad 2/D, inner grad (1,0)/D -> H = (4+1)/D^2
        assert!((h[(0, 0)] - 5.0 / d2).abs() < 1e-14);
    }

    #[test]
    fn rescaled_ntk_hand_example() {
        let (w, x) = hand_config();
        let h = rescaled_ntk(&w, &x, 1.0).unwrap();
        // (ln 2)^2 * 5/(2 ln 2)^2 = 5/4
        assert!((h[(0, 0)] - 1.25).abs() < 1e-14);
    }

    #[test]
    fn decompose_hand_example_and_identity() {
        let (w, x) = hand_config();
        let alpha = 1.0;
        let pair = decompose(&w, &x, alpha).unwrap();
        // h1 = m^{-2} w1^2 <x,x> = 1/4; h2 = m^{-2} <w10,x>^2 = 1
        assert!((pair.h1()[(0, 0)] - 0.25).abs() < 1e-15);
        assert!((pair.h2()[(0, 0)] - 1.0).abs() < 1e-15);
        let rescaled = rescaled_ntk(&w, &x, alpha).unwrap();
        assert!((pair.total() - rescaled).abs().max() < 1e-12);
    }

    #[test]
    fn decomposition_identity_random_configs() {
        for rep in 0..50 {
            let mut rng = stream_rng(40, "kernel-ident", rep);
            let alpha: f64 = [0.6, 1.0, 1.5, 2.0][rep as usize % 4];
            let w = init_weights(64, 3, alpha.min(1.9), &mut rng).unwrap();
            let x = InputSet::new(
                vec![
                    vec![1.0, 0.0, 0.0],
                    vec![0.0, 0.6, 0.8],
                    vec![0.6, 0.0, 0.8],
                ],
                true,
            )
            .unwrap();
            let pair = decompose(&w, &x, alpha).unwrap();
            let rescaled = rescaled_ntk(&w, &x, alpha).unwrap();
            let err = (pair.total() - &rescaled).abs().max();
            let scale = rescaled.abs().max().max(1.0);
            assert!(err < 1e-10 * scale, "alpha={alpha} rep={rep}: err {err}");
        }
    }

    #[test]
    fn duplicated_column_gives_rank_deficient_kernel() {
        let mut rng = stream_rng(41, "kernel-dup", 0);
        let w = init_weights(32, 2, 1.5, &mut rng).unwrap();
        let x = InputSet::with_dependent_columns(
            vec![vec![1.0, 0.0], vec![1.0, 0.0]],
            true,
        )
        .unwrap();
        let h = rescaled_ntk(&w, &x, 1.5).unwrap();
        assert!(min_eigenvalue(&h).unwrap().abs() < 1e-10);
    }

    #[test]
    fn zero_weights_give_zero_kernel() {
        let w = NetworkWeights::new(4, 2, vec![0.0; 8], vec![0.0; 4]).unwrap();
        let x = InputSet::new(vec![vec![1.0, 0.0]], true).unwrap();
        assert_eq!(rescaled_ntk(&w, &x, 1.0).unwrap(), DMatrix::zeros(1, 1));
        let pair = decompose(&w, &x, 1.0).unwrap();
        assert_eq!(pair.total(), DMatrix::zeros(1, 1));
    }

    #[test]
    fn outer_scaling_moves_only_h1() {
        let mut rng = stream_rng(42, "kernel-scale", 0);
        let w = init_weights(16, 2, 1.2, &mut rng).unwrap();
        let x = InputSet::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], true).unwrap();
        let base = decompose(&w, &x, 1.2).unwrap();
        let c = 3.0;
        let scaled_w = NetworkWeights::new(
            16,
            2,
            w.inner().to_vec(),
            w.outer().iter().map(|v| c * v).collect(),
        )
        .unwrap();
        let scaled = decompose(&scaled_w, &x, 1.2).unwrap();
        assert!((scaled.h1() - base.h1() * (c * c)).abs().max() < 1e-12);
        assert_eq!(scaled.h2(), base.h2());
    }

    #[test]
    fn all_inactive_gives_zero_parts() {
        // inner rows point away from the single input
        let w = NetworkWeights::new(3, 2, vec![-1.0, 0.0, -2.0, 0.0, -0.5, 0.0], vec![1.0; 3])
            .unwrap();
        let x = InputSet::new(vec![vec![1.0, 0.0]], true).unwrap();
        let pair = decompose(&w, &x, 0.9).unwrap();
        assert_eq!(pair.h1()[(0, 0)], 0.0);
        assert_eq!(pair.h2()[(0, 0)], 0.0);
    }

    #[test]
    fn min_eigenvalue_examples() {
        assert!((min_eigenvalue(&DMatrix::identity(3, 3)).unwrap() - 1.0).abs() < 1e-14);
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 5.0, 0.1]));
        assert!((min_eigenvalue(&d).unwrap() - 0.1).abs() < 1e-14);
        // rank-1 vv^T has eigenvalue 0 with multiplicity k-1
        let v = nalgebra::DVector::from_vec(vec![1.0, 2.0, -1.0]);
        let r1 = &v * v.transpose();
        assert!(min_eigenvalue(&r1).unwrap().abs() < 1e-10);
        // asymmetric input rejected
        let mut bad = DMatrix::identity(2, 2);
        bad[(0, 1)] = 1e-4;
        assert!(matches!(min_eigenvalue(&bad), Err(Error::NotSymmetric(_))));
        // small float asymmetry absorbed by averaging
        let mut ok = DMatrix::identity(2, 2);
        ok[(0, 1)] = 1e-9;
        assert!(min_eigenvalue(&ok).is_ok());
    }

    /// Independent oracle: cyclic Jacobi rotations on a dense symmetric
    /// matrix (no nalgebra), for cross-checking the eigen routine.
    #[allow(clippy::needless_range_loop)] // index pairs (p, q, r) mirror the rotation formulas
    fn jacobi_min_eigenvalue(mut a: Vec<Vec<f64>>) -> f64 {
        let n = a.len();
        for _sweep in 0..60 {
            let mut off = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    off += a[p][q] * a[p][q];
                }
            }
            if off.sqrt() < 1e-15 {
                break;
            }
            for p in 0..n - 1 {
                for q in (p + 1)..n {
                    if a[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for r in 0..n {
                        let (arp, arq) = (a[r][p], a[r][q]);
                        a[r][p] = c * arp - s * arq;
                        a[r][q] = s * arp + c * arq;
                    }
                    for r in 0..n {
                        let (apr, aqr) = (a[p][r], a[q][r]);
                        a[p][r] = c * apr - s * aqr;
                        a[q][r] = s * apr + c * aqr;
                    }
                }
            }
        }
        (0..n).map(|i| a[i][i]).fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn min_eigenvalue_matches_jacobi_oracle() {
        for rep in 0..20 {
            let mut rng = stream_rng(43, "kernel-jacobi", rep);
            let n = 2 + (rep as usize % 5);
            let w = init_weights(n, n, 2.0, &mut rng).unwrap();
            // symmetric matrix from a random square factor
            let f = DMatrix::from_row_slice(n, n, &w.inner()[..n * n]);
            let sym = &f + f.transpose();
            let got = min_eigenvalue(&sym).unwrap();
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|i| (0..n).map(|j| sym[(i, j)]).collect())
                .collect();
            let want = jacobi_min_eigenvalue(rows);
            let scale = sym.abs().max().max(1.0);
            assert!(
                (got - want).abs() < 1e-10 * scale,
                "n={n} rep={rep}: {got} vs jacobi {want}"
            );
        }
    }

    #[test]
    fn weyl_inequality_on_random_psd_pairs() {
        for rep in 0..20 {
            let mut rng = stream_rng(44, "kernel-weyl", rep);
            let n = 3;
            let w = init_weights(4, 2 * n * n, 2.0, &mut rng).unwrap();
            let fa = DMatrix::from_row_slice(n, n, &w.inner()[..n * n]);
            let fb = DMatrix::from_row_slice(n, n, &w.inner()[n * n..2 * n * n]);
            let a = fa.transpose() * &fa;
            let b = fb.transpose() * &fb;
            let lhs = min_eigenvalue(&(&a + &b)).unwrap();
            let rhs = min_eigenvalue(&a).unwrap() + min_eigenvalue(&b).unwrap();
            let scale = (&a + &b).abs().max().max(1.0);
            assert!(lhs >= rhs - 1e-10 * scale, "rep={rep}: {lhs} < {rhs}");
        }
    }

    #[test]
    fn frobenius_distance_examples() {
        let i2 = DMatrix::identity(2, 2);
        assert_eq!(frobenius_distance(&i2, &i2).unwrap(), 0.0);
        let zero = DMatrix::zeros(2, 2);
        assert!((frobenius_distance(&i2, &zero).unwrap() - 2.0f64.sqrt()).abs() < 1e-15);
        // hand value: difference [[1,2],[0,-1]] -> sqrt(1+4+1) = sqrt(6)
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 3.0, 1.0, 0.0]);
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!((frobenius_distance(&a, &b).unwrap() - 6.0f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn ntk_is_neuron_permutation_invariant() {
        let mut rng = stream_rng(45, "kernel-perm", 0);
        let alpha = 1.4;
        let (m, d) = (16, 3);
        let w = init_weights(m, d, alpha, &mut rng).unwrap();
        let x = InputSet::new(vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.6, 0.8]], true).unwrap();
        let base = ntk(&w, &x, alpha).unwrap();
        // reverse the neuron order
        let mut inner = Vec::with_capacity(m * d);
        let mut outer = Vec::with_capacity(m);
        for i in (0..m).rev() {
            inner.extend_from_slice(w.inner_row(i));
            outer.push(w.outer()[i]);
        }
        let perm = NetworkWeights::new(m, d, inner, outer).unwrap();
        let h = ntk(&perm, &x, alpha).unwrap();
        assert!((h - base).abs().max() < 1e-12);
    }

    #[test]
    fn kernel_rescale_conventions() {
        let m = 64;
        assert!(
            (kernel_rescale(m, 1.0).unwrap() - (64f64.ln()).powi(2)).abs() < 1e-12
        );
        assert_eq!(kernel_rescale(m, 2.0).unwrap(), 1.0);
        assert!(kernel_rescale(1, 1.0).is_err());
    }
}
