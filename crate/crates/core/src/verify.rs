//! Statistical verification machinery: empirical characteristic functions,
//! tail-index estimation, two-sample distances, the stable
//! domain-of-attraction tail criterion, width sweeps against the closed-form
//! limit laws, and calibration of the kernel-measure prefactor convention.
//!
//! Every Monte Carlo routine here draws through [`crate::rng::stream_rng`]
//! with a caller-supplied master seed and aggregates in replicate order, so
//! results are byte-identical across worker counts.

use crate::error::{Error, Result};
use crate::kernel::{decompose, min_eigenvalue, KernelPair};
use crate::limits::{
    orthant_probs_all, sample_limit_kernel, spectral_gamma_x, LimitKernelLaw, PrefactorMode,
};
use crate::network::{forward_rescaled, init_weights, InputSet};
use crate::rng::{run_replicates, stream_rng};
use crate::spectral::{cf_symmetric, DiscreteSpectralMeasure};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------------------
// Fixed evaluation grids
// ---------------------------------------------------------------------------

/// 61 equally spaced scalar evaluation points on [-3, 3] (includes 0 and the
/// endpoints), each wrapped as a 1-vector.
pub fn grid_1d() -> Vec<Vec<f64>> {
    (0..61).map(|i| vec![-3.0 + 0.1 * i as f64]).collect()
}

/// 13 x 13 = 169 planar evaluation points: the same [-3, 3] range at stride
/// 0.5 per axis, truncated tensor grid for joint characteristic functions.
pub fn grid_2d() -> Vec<Vec<f64>> {
    let axis: Vec<f64> = (0..13).map(|i| -3.0 + 0.5 * i as f64).collect();
    let mut grid = Vec::with_capacity(axis.len() * axis.len());
    for &a in &axis {
        for &b in &axis {
            grid.push(vec![a, b]);
        }
    }
    grid
}

// ---------------------------------------------------------------------------
// Empirical characteristic functions
// ---------------------------------------------------------------------------

/// Minimum sample count for an ECF comparison.
pub const MIN_ECF_SAMPLES: usize = 100;

/// Empirical vs reference characteristic function on a fixed grid.
#[derive(Debug, Clone)]
pub struct EcfReport {
    grid: Vec<Vec<f64>>,
    empirical: Vec<Complex64>,
    reference: Vec<Complex64>,
    sup_distance: f64,
    num_samples: usize,
}

impl EcfReport {
    pub fn grid(&self) -> &[Vec<f64>] {
        &self.grid
    }

    pub fn empirical(&self) -> &[Complex64] {
        &self.empirical
    }

    pub fn reference(&self) -> &[Complex64] {
        &self.reference
    }

    /// Max over the grid of |empirical - reference|.
    pub fn sup_distance(&self) -> f64 {
        self.sup_distance
    }

    pub fn num_samples(&self) -> usize {
        self.num_samples
    }

    /// Delimited-text export: grid components, then real/imaginary parts of
    /// both functions and the pointwise absolute error.
    pub fn to_table(&self) -> String {
        let dim = self.grid.first().map_or(0, |z| z.len());
        let mut out = String::new();
        for r in 0..dim {
            out.push_str(&format!("z{r} "));
        }
        out.push_str("re_empirical im_empirical re_reference im_reference abs_error\n");
        for (i, z) in self.grid.iter().enumerate() {
            for zr in z {
                out.push_str(&format!("{zr} "));
            }
            let (e, f) = (self.empirical[i], self.reference[i]);
            out.push_str(&format!(
                "{} {} {} {} {}\n",
                e.re,
                e.im,
                f.re,
                f.im,
                (e - f).norm()
            ));
        }
        out
    }
}

/// Empirical characteristic function of `samples` on `grid`, compared
/// pointwise to `reference`. The empirical value at z is the sample mean of
/// `exp(i<z, sample>)`, accumulated in sample order (deterministic given the
/// samples).
pub fn ecf<F>(samples: &[Vec<f64>], grid: &[Vec<f64>], reference: F) -> Result<EcfReport>
where
    F: Fn(&[f64]) -> Result<Complex64>,
{
    if samples.len() < MIN_ECF_SAMPLES {
        return Err(Error::TooFewSamples {
            need: MIN_ECF_SAMPLES,
            got: samples.len(),
        });
    }
    if grid.is_empty() {
        return Err(Error::DegenerateInput);
    }
    let dim = grid[0].len();
    if dim == 0 {
        return Err(Error::DegenerateInput);
    }
    for z in grid {
        if z.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: z.len(),
            });
        }
    }
    for s in samples {
        if s.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: s.len(),
            });
        }
    }
    let n = samples.len() as f64;
    let mut empirical = Vec::with_capacity(grid.len());
    let mut refs = Vec::with_capacity(grid.len());
    let mut sup = 0.0f64;
    for z in grid {
        let mut acc = Complex64::new(0.0, 0.0);
        for s in samples {
            let t: f64 = z.iter().zip(s).map(|(a, b)| a * b).sum();
            acc += Complex64::new(t.cos(), t.sin());
        }
        let emp = acc / n;
        if !emp.re.is_finite() || !emp.im.is_finite() {
            return Err(Error::NonFinite("empirical characteristic function"));
        }
        if emp.norm() > 1.0 + 1e-9 {
            return Err(Error::NonFinite("ecf modulus exceeds 1"));
        }
        let rf = reference(z)?;
        sup = sup.max((emp - rf).norm());
        empirical.push(emp);
        refs.push(rf);
    }
    Ok(EcfReport {
        grid: grid.to_vec(),
        empirical,
        reference: refs,
        sup_distance: sup,
        num_samples: samples.len(),
    })
}

// ---------------------------------------------------------------------------
// Width sweeps
// ---------------------------------------------------------------------------

/// Least-squares slope of y against x (at least two points; ties in x give
/// slope 0).
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            got: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::TooFewSamples { need: 2, got: xs.len() });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Ok(0.0);
    }
    Ok(sxy / sxx)
}

/// A per-width statistic with its convergence-trend regressions.
#[derive(Debug, Clone)]
pub struct SweepResult {
    widths: Vec<usize>,
    stats: Vec<f64>,
    slope_log_width: f64,
    slope_loglog_width: f64,
}

impl SweepResult {
    /// Builds the result and fits ln(stat) against ln(m) and ln(ln(m)).
    /// Widths must be strictly increasing with at least two entries;
    /// statistics must be finite and nonnegative (zeros are floored at
    /// 1e-300 inside the logarithm).
    pub fn new(widths: Vec<usize>, stats: Vec<f64>) -> Result<Self> {
        if widths.len() != stats.len() {
            return Err(Error::DimensionMismatch {
                expected: widths.len(),
                got: stats.len(),
            });
        }
        if widths.len() < 2 {
            return Err(Error::TooFewSamples { need: 2, got: widths.len() });
        }
        for w in widths.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidTrainConfig(format!(
                    "sweep widths must be strictly increasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if widths[0] < 2 {
            return Err(Error::WidthTooSmall(widths[0]));
        }
        for &s in &stats {
            if !s.is_finite() || s < 0.0 {
                return Err(Error::NonFinite("sweep statistic"));
            }
        }
        let ln_stats: Vec<f64> = stats.iter().map(|s| s.max(1e-300).ln()).collect();
        let ln_m: Vec<f64> = widths.iter().map(|&m| (m as f64).ln()).collect();
        let lnln_m: Vec<f64> = ln_m.iter().map(|l| l.ln()).collect();
        let slope_log_width = least_squares_slope(&ln_m, &ln_stats)?;
        let slope_loglog_width = least_squares_slope(&lnln_m, &ln_stats)?;
        Ok(Self {
            widths,
            stats,
            slope_log_width,
            slope_loglog_width,
        })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn stats(&self) -> &[f64] {
        &self.stats
    }

    /// Slope of ln(stat) vs ln(m).
    pub fn slope_log_width(&self) -> f64 {
        self.slope_log_width
    }

    /// Slope of ln(stat) vs ln(ln(m)), for statistics that decay at log
    /// speed.
    pub fn slope_loglog_width(&self) -> f64 {
        self.slope_loglog_width
    }

    /// True if the fitted trend in width is decreasing.
    pub fn is_decreasing(&self) -> bool {
        self.slope_log_width < 0.0
    }

    pub fn to_table(&self) -> String {
        let mut out = String::from("m stat\n");
        for (m, s) in self.widths.iter().zip(&self.stats) {
            out.push_str(&format!("{m} {s}\n"));
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Tail-index estimation
// ---------------------------------------------------------------------------

/// Minimum sample count for tail-index estimation.
pub const MIN_HILL_SAMPLES: usize = 10_000;

/// Hill tail-index estimate with its asymptotic standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HillEstimate {
    pub alpha_hat: f64,
    /// Asymptotic standard error `alpha_hat / sqrt(tail_count)`.
    pub se: f64,
    /// Number of upper order statistics used.
    pub tail_count: usize,
}

/// Hill estimator of the power-law tail index of |samples|, using the
/// largest `floor(n * tail_fraction)` order statistics:
/// `alpha_hat = k / sum_{i=1..k} ln(x_(i) / x_(k+1))`.
pub fn hill_tail_index(samples: &[f64], tail_fraction: f64) -> Result<HillEstimate> {
    if samples.len() < MIN_HILL_SAMPLES {
        return Err(Error::TooFewSamples {
            need: MIN_HILL_SAMPLES,
            got: samples.len(),
        });
    }
    if !tail_fraction.is_finite() || tail_fraction <= 0.0 || tail_fraction > 0.05 {
        return Err(Error::InvalidTailFraction(tail_fraction));
    }
    let mut abs: Vec<f64> = samples.iter().map(|v| v.abs()).collect();
    if abs.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("tail-index samples"));
    }
    abs.sort_by(|a, b| b.total_cmp(a));
    let k = (samples.len() as f64 * tail_fraction).floor() as usize;
    if k < 2 {
        return Err(Error::InsufficientTail(k));
    }
    let pivot = abs[k];
    if pivot <= 0.0 {
        return Err(Error::InsufficientTail(k));
    }
    let log_sum: f64 = abs[..k].iter().map(|v| (v / pivot).ln()).sum();
    if log_sum <= 0.0 {
        return Err(Error::InsufficientTail(k));
    }
    let alpha_hat = k as f64 / log_sum;
    Ok(HillEstimate {
        alpha_hat,
        se: alpha_hat / (k as f64).sqrt(),
        tail_count: k,
    })
}

// ---------------------------------------------------------------------------
// Two-sample distances and rank correlation
// ---------------------------------------------------------------------------

/// Two-sample Kolmogorov-Smirnov distance with an asymptotic p-value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsReport {
    pub distance: f64,
    pub p_value: f64,
}

fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let term = (-2.0 * (j * j) as f64 * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-12 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov-Smirnov test on reals. The p-value uses the
/// asymptotic Kolmogorov distribution with the standard small-sample
/// correction `lambda = (sqrt(ne) + 0.12 + 0.11/sqrt(ne)) * D`,
/// `ne = n_a n_b / (n_a + n_b)`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsReport> {
    const MIN: usize = 5;
    if a.len() < MIN || b.len() < MIN {
        return Err(Error::TooFewSamples {
            need: MIN,
            got: a.len().min(b.len()),
        });
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("two-sample inputs"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let (x, y) = (a[i], b[j]);
        if x <= y {
            i += 1;
        }
        if y <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = na * nb / (na + nb);
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    Ok(KsReport {
        distance: d,
        p_value: kolmogorov_survival(lambda),
    })
}

fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut out = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for t in &idx[i..=j] {
            out[*t] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation (average ranks on ties). Errors if either
/// series is constant.
pub fn rank_correlation(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.len() < 3 {
        return Err(Error::TooFewSamples { need: 3, got: a.len() });
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("rank-correlation inputs"));
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    let mut sab = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
        sab += (x - ma) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::DegenerateInput);
    }
    Ok(sab / (saa * sbb).sqrt())
}

// ---------------------------------------------------------------------------
// Domain-of-attraction tail criterion
// ---------------------------------------------------------------------------

/// A union of spherical caps {s : angle(s, center) <= radius} used as the
/// direction set in the tail criterion.
#[derive(Debug, Clone)]
pub struct DirectionSet {
    dim: usize,
    caps: Vec<(Vec<f64>, f64)>,
}

impl DirectionSet {
    /// Caps are (unit center, angular radius in (0, pi]).
    pub fn new(caps: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        if caps.is_empty() {
            return Err(Error::DegenerateInput);
        }
        let dim = caps[0].0.len();
        for (center, radius) in &caps {
            if center.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: center.len(),
                });
            }
            let norm = center.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-9 {
                return Err(Error::AtomNotUnit(norm));
            }
            if !radius.is_finite() || *radius <= 0.0 || *radius > std::f64::consts::PI {
                return Err(Error::InvalidWeight(*radius));
            }
        }
        Ok(Self { dim, caps })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// True if v / ||v|| lies in some cap. The zero vector is in no cap.
    pub fn contains(&self, v: &[f64]) -> Result<bool> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: v.len(),
            });
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Ok(false);
        }
        for (center, radius) in &self.caps {
            let dot: f64 = center.iter().zip(v).map(|(a, b)| a * b).sum();
            let angle = (dot / norm).clamp(-1.0, 1.0).acos();
            if angle <= radius + 1e-12 {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Total weight of the measure's atoms whose directions lie in the set.
    pub fn mass(&self, measure: &DiscreteSpectralMeasure) -> Result<f64> {
        if measure.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: measure.dim(),
            });
        }
        let mut total = 0.0;
        for (dir, w) in measure.atoms() {
            if self.contains(dir)? {
                total += w;
            }
        }
        Ok(total)
    }
}

/// One grid point of the tail criterion: the scaled exceedance estimate
/// `n * P(||xi|| > n^{1/alpha}, xi/||xi|| in A)` with its binomial standard
/// error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailCheckPoint {
    pub n: usize,
    pub draws: usize,
    pub estimate: f64,
    pub se: f64,
}

/// Tail-criterion estimates across a grid of n values, against a fixed
/// target (the tail constant times the direction-set mass).
#[derive(Debug, Clone)]
pub struct TailCheckReport {
    pub target: f64,
    pub points: Vec<TailCheckPoint>,
}

impl TailCheckReport {
    /// True if every grid point's estimate is within `k_sigma` standard
    /// errors of the target (points with zero standard error must match the
    /// target exactly).
    pub fn within(&self, k_sigma: f64) -> bool {
        self.points.iter().all(|p| {
            if p.se > 0.0 {
                (p.estimate - self.target).abs() <= k_sigma * p.se
            } else {
                p.estimate == self.target
            }
        })
    }

    pub fn to_table(&self) -> String {
        let mut out = String::from("n draws estimate se target\n");
        for p in &self.points {
            out.push_str(&format!(
                "{} {} {} {} {}\n",
                p.n, p.draws, p.estimate, p.se, self.target
            ));
        }
        out
    }
}

/// Estimates `n * P(||xi|| > n^{1/alpha}, xi/||xi|| in set)` for each n in
/// `n_grid` from `draws_scale * n` fresh draws of `sample`, and reports the
/// estimates against `target`. For a law in the domain of attraction of an
/// alpha-stable limit with spectral measure Gamma, the estimates converge to
/// `c_alpha(alpha) * Gamma(set)`.
pub fn levy_tail_check<F>(
    mut sample: F,
    alpha: f64,
    set: &DirectionSet,
    target: f64,
    n_grid: &[usize],
    draws_scale: usize,
    rng: &mut ChaCha8Rng,
) -> Result<TailCheckReport>
where
    F: FnMut(&mut ChaCha8Rng) -> Vec<f64>,
{
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::AlphaNotStrictlyStable(alpha));
    }
    if n_grid.is_empty() || draws_scale == 0 {
        return Err(Error::DegenerateInput);
    }
    if !target.is_finite() || target < 0.0 {
        return Err(Error::InvalidWeight(target));
    }
    let mut points = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        if n < 2 {
            return Err(Error::WidthTooSmall(n));
        }
        let draws = draws_scale * n;
        let threshold = (n as f64).powf(1.0 / alpha);
        let mut hits = 0usize;
        for _ in 0..draws {
            let xi = sample(rng);
            let norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > threshold && set.contains(&xi)? {
                hits += 1;
            }
        }
        let p = hits as f64 / draws as f64;
        points.push(TailCheckPoint {
            n,
            draws,
            estimate: n as f64 * p,
            se: n as f64 * (p * (1.0 - p) / draws as f64).sqrt(),
        });
    }
    Ok(TailCheckReport { target, points })
}

// ---------------------------------------------------------------------------
// Gaussian baseline covariance (alpha = 2)
// ---------------------------------------------------------------------------

/// Covariance of the Gaussian limit of the rescaled network outputs at
/// alpha = 2: `Sigma[i,j] = E[w^2] * E[relu(g_i) relu(g_j)]` with
/// `(g_i, g_j)` the jointly Gaussian preactivations. In closed form,
/// `Sigma[i,j] = (2/pi) ||x_i|| ||x_j|| (sqrt(1-rho^2) + rho (pi/2 + asin
/// rho))` with rho the cosine of the angle between the inputs.
pub fn gaussian_limit_covariance(inputs: &InputSet) -> Result<DMatrix<f64>> {
    let k = inputs.num_inputs();
    let norms: Vec<f64> = inputs
        .columns()
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let mut sigma = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            if norms[i] == 0.0 || norms[j] == 0.0 {
                continue;
            }
            let dot: f64 = inputs.column(i)
                .iter()
                .zip(inputs.column(j))
                .map(|(a, b)| a * b)
                .sum();
            let rho = (dot / (norms[i] * norms[j])).clamp(-1.0, 1.0);
            // E[relu(U) relu(V)] = angular / (2 pi) for unit-variance U, V;
            // preactivation sds are sqrt(2)||x||, and E[w^2] = 2, so the
            // prefactors collapse to 2/pi.
            let angular = (1.0 - rho * rho).sqrt() + rho * (std::f64::consts::FRAC_PI_2 + rho.asin());
            let v = 2.0 / std::f64::consts::PI * norms[i] * norms[j] * angular;
            sigma[(i, j)] = v;
            sigma[(j, i)] = v;
        }
    }
    Ok(sigma)
}

// ---------------------------------------------------------------------------
// Deterministic Monte Carlo sample sources
// ---------------------------------------------------------------------------

fn collect_replicates<T, F>(n: usize, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    run_replicates(n, workers, f).into_iter().collect()
}

/// Rescaled outputs of `n_samples` freshly initialized networks of width m;
/// sample r uses the stream `(master_seed, label, r)`.
pub fn network_output_samples(
    inputs: &InputSet,
    alpha: f64,
    m: usize,
    n_samples: usize,
    master_seed: u64,
    label: &str,
    workers: usize,
) -> Result<Vec<Vec<f64>>> {
    let d = inputs.input_dim();
    collect_replicates(n_samples, workers, |rep| {
        let mut rng = stream_rng(master_seed, label, rep);
        let w = init_weights(m, d, alpha, &mut rng)?;
        forward_rescaled(&w, inputs, alpha)
    })
}

/// Both parts of the rescaled kernel for `n_samples` freshly initialized
/// networks of width m.
pub fn kernel_pair_samples(
    inputs: &InputSet,
    alpha: f64,
    m: usize,
    n_samples: usize,
    master_seed: u64,
    label: &str,
    workers: usize,
) -> Result<Vec<KernelPair>> {
    let d = inputs.input_dim();
    collect_replicates(n_samples, workers, |rep| {
        let mut rng = stream_rng(master_seed, label, rep);
        let w = init_weights(m, d, alpha, &mut rng)?;
        decompose(&w, inputs, alpha)
    })
}

/// Independent draws from the limiting kernel law.
pub fn limit_kernel_draws(
    law: &LimitKernelLaw,
    n_samples: usize,
    master_seed: u64,
    label: &str,
    workers: usize,
) -> Result<Vec<DMatrix<f64>>> {
    collect_replicates(n_samples, workers, |rep| {
        let mut rng = stream_rng(master_seed, label, rep);
        sample_limit_kernel(law, &mut rng)
    })
}

// ---------------------------------------------------------------------------
// Limit-process width sweep
// ---------------------------------------------------------------------------

/// Per-width ECF reports for the rescaled network outputs against the
/// closed-form limit: the alpha-stable law with the explicit input spectral
/// measure for alpha < 2, the closed-form Gaussian covariance at alpha = 2.
#[derive(Debug, Clone)]
pub struct LimitProcessSweep {
    pub sweep: SweepResult,
    pub reports: Vec<EcfReport>,
    /// Raw output vectors at the largest width, kept for tail-index and
    /// projection diagnostics without regenerating the dominant-cost batch.
    pub largest_width_samples: Vec<Vec<f64>>,
}

/// Reference characteristic function `z -> E[exp(i <z, F>)]` of a limit law.
type ReferenceCf = Box<dyn Fn(&[f64]) -> Result<Complex64> + Sync>;

/// For each width m: draw `n_samples` fresh rescaled network outputs and
/// compare their joint ECF on `grid` to the limit characteristic function;
/// the sweep statistic is the sup distance.
pub fn limit_process_sweep(
    inputs: &InputSet,
    alpha: f64,
    widths: &[usize],
    n_samples: usize,
    grid: &[Vec<f64>],
    master_seed: u64,
    workers: usize,
) -> Result<LimitProcessSweep> {
    let reference: ReferenceCf = if alpha < 2.0 {
        let measure = spectral_gamma_x(inputs, alpha)?;
        Box::new(move |z: &[f64]| cf_symmetric(z, &measure, alpha))
    } else {
        let sigma = gaussian_limit_covariance(inputs)?;
        Box::new(move |z: &[f64]| {
            let zv = DMatrix::from_row_slice(1, z.len(), z);
            let quad = (&zv * &sigma * zv.transpose())[(0, 0)];
            Ok(Complex64::new((-0.5 * quad).exp(), 0.0))
        })
    };
    let mut reports = Vec::with_capacity(widths.len());
    let mut stats = Vec::with_capacity(widths.len());
    let mut largest_width_samples = Vec::new();
    for (i, &m) in widths.iter().enumerate() {
        let samples = network_output_samples(
            inputs,
            alpha,
            m,
            n_samples,
            master_seed,
            &format!("limit-process/m{m}"),
            workers,
        )?;
        let report = ecf(&samples, grid, &reference)?;
        stats.push(report.sup_distance());
        reports.push(report);
        if i + 1 == widths.len() {
            largest_width_samples = samples;
        }
    }
    Ok(LimitProcessSweep {
        sweep: SweepResult::new(widths.to_vec(), stats)?,
        reports,
        largest_width_samples,
    })
}

// ---------------------------------------------------------------------------
// Kernel-limit width sweep
// ---------------------------------------------------------------------------

/// Per-width entrywise KS distances between finite-width kernels and draws
/// from the limiting law. The sweep statistic is the maximum entry distance.
#[derive(Debug, Clone)]
pub struct KernelLimitSweep {
    pub sweep: SweepResult,
    /// Per width, the k x k matrix of per-entry KS distances.
    pub entry_distances: Vec<DMatrix<f64>>,
    pub limit_draws: usize,
    /// Kernel parts at the largest width, kept for tail-index and
    /// independence diagnostics without regenerating the dominant-cost batch.
    pub largest_width_pairs: Vec<KernelPair>,
}

/// For each width m: draw `n_samples` kernels at initialization and compare
/// every entry's distribution to `n_limit` draws of the limiting law.
#[allow(clippy::too_many_arguments)] // flat experiment-parameter list, mirrors the other sweeps
pub fn kernel_limit_sweep(
    inputs: &InputSet,
    alpha: f64,
    widths: &[usize],
    n_samples: usize,
    law: &LimitKernelLaw,
    n_limit: usize,
    master_seed: u64,
    workers: usize,
) -> Result<KernelLimitSweep> {
    let k = inputs.num_inputs();
    if law.num_inputs() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: law.num_inputs(),
        });
    }
    let limit = limit_kernel_draws(law, n_limit, master_seed, "kernel-limit/draws", workers)?;
    let mut entry_distances = Vec::with_capacity(widths.len());
    let mut stats = Vec::with_capacity(widths.len());
    let mut largest_width_pairs = Vec::new();
    for &m in widths {
        let pairs = kernel_pair_samples(
            inputs,
            alpha,
            m,
            n_samples,
            master_seed,
            &format!("kernel-limit/m{m}"),
            workers,
        )?;
        let totals: Vec<DMatrix<f64>> = pairs.iter().map(KernelPair::total).collect();
        if m == *widths.iter().max().expect("non-empty widths") {
            largest_width_pairs = pairs;
        }
        let mut dist = DMatrix::zeros(k, k);
        let mut max_d = 0.0f64;
        for i in 0..k {
            for j in i..k {
                let finite: Vec<f64> = totals.iter().map(|h| h[(i, j)]).collect();
                let lim: Vec<f64> = limit.iter().map(|h| h[(i, j)]).collect();
                let d = ks_two_sample(&finite, &lim)?.distance;
                dist[(i, j)] = d;
                dist[(j, i)] = d;
                max_d = max_d.max(d);
            }
        }
        entry_distances.push(dist);
        stats.push(max_d);
    }
    Ok(KernelLimitSweep {
        sweep: SweepResult::new(widths.to_vec(), stats)?,
        entry_distances,
        limit_draws: n_limit,
        largest_width_pairs,
    })
}

// ---------------------------------------------------------------------------
// Prefactor calibration
// ---------------------------------------------------------------------------

/// Minimum width for a calibration run against finite-width data.
pub const MIN_CALIBRATION_WIDTH: usize = 1 << 16;

/// Evidence from comparing kernel samples against both prefactor
/// conventions.
#[derive(Debug, Clone, Copy)]
pub struct CalibrationReport {
    pub selected: PrefactorMode,
    pub distance_tail_consistent: f64,
    pub distance_nominal: f64,
    /// True when the two distances differ by less than `threshold`; the
    /// selection then falls back to the tail-consistent default.
    pub inconclusive: bool,
    /// 95% two-sample KS noise scale at the sample sizes used.
    pub threshold: f64,
}

impl CalibrationReport {
    pub fn to_kv(&self) -> Vec<(String, String)> {
        vec![
            ("selected".into(), format!("{:?}", self.selected)),
            (
                "distance_tail_consistent".into(),
                format!("{}", self.distance_tail_consistent),
            ),
            (
                "distance_nominal".into(),
                format!("{}", self.distance_nominal),
            ),
            ("inconclusive".into(), format!("{}", self.inconclusive)),
            ("threshold".into(), format!("{}", self.threshold)),
        ]
    }
}

/// Compares observed kernel samples entrywise against `n_limit` fresh draws
/// from each convention's limiting law and selects the convention with the
/// smaller maximum entry KS distance. Distances closer than the two-sample
/// KS 95% noise scale are reported as inconclusive, defaulting to
/// tail-consistent.
pub fn calibrate_against_samples(
    observed: &[DMatrix<f64>],
    law_tail_consistent: &LimitKernelLaw,
    law_nominal: &LimitKernelLaw,
    n_limit: usize,
    master_seed: u64,
    workers: usize,
) -> Result<CalibrationReport> {
    if observed.is_empty() {
        return Err(Error::DegenerateInput);
    }
    let k = law_tail_consistent.num_inputs();
    if law_nominal.num_inputs() != k || observed[0].nrows() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: observed[0].nrows(),
        });
    }
    let max_distance = |law: &LimitKernelLaw, label: &str| -> Result<f64> {
        let draws = limit_kernel_draws(law, n_limit, master_seed, label, workers)?;
        let mut max_d = 0.0f64;
        for i in 0..k {
            for j in i..k {
                let obs: Vec<f64> = observed.iter().map(|h| h[(i, j)]).collect();
                let lim: Vec<f64> = draws.iter().map(|h| h[(i, j)]).collect();
                max_d = max_d.max(ks_two_sample(&obs, &lim)?.distance);
            }
        }
        Ok(max_d)
    };
    let d_tc = max_distance(law_tail_consistent, "calibrate/limit-tail-consistent")?;
    let d_nom = max_distance(law_nominal, "calibrate/limit-nominal")?;
    let (n_obs, n_lim) = (observed.len() as f64, n_limit as f64);
    let threshold = 1.36 * ((n_obs + n_lim) / (n_obs * n_lim)).sqrt();
    let inconclusive = (d_tc - d_nom).abs() < threshold;
    let selected = if inconclusive || d_tc <= d_nom {
        PrefactorMode::TailConsistent
    } else {
        PrefactorMode::Nominal
    };
    Ok(CalibrationReport {
        selected,
        distance_tail_consistent: d_tc,
        distance_nominal: d_nom,
        inconclusive,
        threshold,
    })
}

/// Full calibration experiment: builds both conventions' limiting laws for
/// `inputs`, draws `n_samples` finite-width kernels at width `m_large`, and
/// selects the better-fitting convention.
pub fn calibrate_prefactor(
    inputs: &InputSet,
    alpha: f64,
    m_large: usize,
    n_samples: usize,
    master_seed: u64,
    workers: usize,
) -> Result<CalibrationReport> {
    if m_large < MIN_CALIBRATION_WIDTH {
        return Err(Error::WidthTooSmall(m_large));
    }
    let mut rng = stream_rng(master_seed, "calibrate/orthants", 0);
    let probs = orthant_probs_all(inputs, alpha, 100_000, &mut rng)?;
    let law_tc = LimitKernelLaw::new(inputs, alpha, &probs, PrefactorMode::TailConsistent)?;
    let law_nom = LimitKernelLaw::new(inputs, alpha, &probs, PrefactorMode::Nominal)?;
    let pairs = kernel_pair_samples(
        inputs,
        alpha,
        m_large,
        n_samples,
        master_seed,
        "calibrate/kernel",
        workers,
    )?;
    let observed: Vec<DMatrix<f64>> = pairs.iter().map(KernelPair::total).collect();
    calibrate_against_samples(&observed, &law_tc, &law_nom, n_samples, master_seed, workers)
}

// ---------------------------------------------------------------------------
// Minimum-eigenvalue quantiles
// ---------------------------------------------------------------------------

/// Sorted empirical distribution of a statistic across seeds.
#[derive(Debug, Clone)]
pub struct QuantileReport {
    values: Vec<f64>,
}

impl QuantileReport {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::DegenerateInput);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("quantile values"));
        }
        values.sort_by(f64::total_cmp);
        Ok(Self { values })
    }

    /// Sorted values, ascending.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    /// Lower empirical quantile: the ceil(q*n)-th smallest value (the
    /// minimum for q = 0).
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::InvalidWeight(q));
        }
        let n = self.values.len();
        let idx = ((q * n as f64).ceil() as usize).clamp(1, n) - 1;
        Ok(self.values[idx])
    }

    pub fn to_table(&self) -> String {
        let mut out = String::from("rank value\n");
        for (i, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{} {v}\n", i + 1));
        }
        out
    }
}

/// Empirical distribution of the rescaled kernel's minimum eigenvalue at
/// initialization across `n_seeds` networks. Inputs must be unit-norm and
/// linearly independent (duplicated columns are rejected).
pub fn min_eigenvalue_quantiles(
    inputs: &InputSet,
    alpha: f64,
    m: usize,
    n_seeds: usize,
    master_seed: u64,
    workers: usize,
) -> Result<QuantileReport> {
    let k = inputs.num_inputs();
    let d = inputs.input_dim();
    for (j, col) in inputs.columns().iter().enumerate() {
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::ColumnNotUnitNorm { index: j, norm });
        }
    }
    let flat: Vec<f64> = inputs.columns().iter().flatten().copied().collect();
    let rank = DMatrix::from_vec(d, k, flat).rank(1e-10);
    if rank < k {
        return Err(Error::LinearlyDependent { rank, k });
    }
    let values = collect_replicates(n_seeds, workers, |rep| {
        let mut rng = stream_rng(master_seed, "min-eigenvalue", rep);
        let w = init_weights(m, d, alpha, &mut rng)?;
        let h = crate::kernel::rescaled_ntk(&w, inputs, alpha)?;
        min_eigenvalue(&h)
    })?;
    QuantileReport::new(values)
}
