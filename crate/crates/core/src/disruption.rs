//! Correlated camera-availability process.
//!
//! Availability is driven by a latent Gaussian field with AR(1) temporal
//! dynamics. Each epoch the field is pushed through the standard normal CDF
//! and the per-camera Beta quantile function, which yields marginal
//! availability probabilities with exactly the configured Beta distribution
//! while preserving the spatial correlation injected through the factor
//! matrix (a Gaussian copula). Up/down outcomes are then conditionally
//! independent Bernoulli draws given those probabilities.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{Beta, Continuous, ContinuousCDF, Normal};
use thiserror::Error;

use crate::model::{AvailabilityDist, CorrelationMatrix};
use crate::seeds;

/// Largest reconstruction error tolerated from the spectral fallback
/// factorization. Cholesky, when it succeeds, is exact to rounding.
pub const FACTOR_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum DisruptionError {
    #[error("temporal_phi must lie in [0, 1), got {0}")]
    PhiOutOfRange(f64),
    #[error("{marginals} marginal distributions for a {dim}x{dim} correlation matrix")]
    MarginalCountMismatch { marginals: usize, dim: usize },
    #[error(
        "factorization residual {residual:.3e} exceeds {tol:.0e}; \
         correlation matrix is too far from positive semidefinite"
    )]
    FactorResidual { residual: f64, tol: f64 },
}

/// Configuration for the availability process.
///
/// `spatial_rho` is the latent-field correlation. The realized Pearson
/// correlation of the availability probabilities is close to, but not
/// exactly, this matrix (the copula transform is monotone, not linear);
/// [`realized_probability_correlation`] measures the gap.
#[derive(Debug, Clone, PartialEq)]
pub struct DisruptionProcessConfig {
    pub spatial_rho: CorrelationMatrix,
    pub temporal_phi: f64,
    pub marginals: Vec<AvailabilityDist>,
    pub rng_seed: u64,
}

impl DisruptionProcessConfig {
    /// Phi defaults to zero: epochs are temporally independent unless the
    /// scenario opts in to persistence.
    pub fn new(
        spatial_rho: CorrelationMatrix,
        temporal_phi: f64,
        marginals: Vec<AvailabilityDist>,
        rng_seed: u64,
    ) -> Result<Self, DisruptionError> {
        if !(0.0..1.0).contains(&temporal_phi) {
            return Err(DisruptionError::PhiOutOfRange(temporal_phi));
        }
        if marginals.len() != spatial_rho.n() {
            return Err(DisruptionError::MarginalCountMismatch {
                marginals: marginals.len(),
                dim: spatial_rho.n(),
            });
        }
        Ok(Self {
            spatial_rho,
            temporal_phi,
            marginals,
            rng_seed,
        })
    }
}

/// Latent Gaussian state for one replication.
#[derive(Debug, Clone)]
pub struct LatentState {
    pub z: DVector<f64>,
    pub epoch: u64,
}

/// One epoch of availability: the copula-transformed probabilities, the
/// Bernoulli outcomes drawn from them, and the per-camera resolution each
/// outcome delivers (zero whenever the camera is down).
#[derive(Debug, Clone)]
pub struct AvailabilityOutcome {
    pub probabilities: Vec<f64>,
    pub up: Vec<bool>,
    pub delivered_res: Vec<f64>,
}

/// Lower-triangular-ish factor `L` with `L * L^T` reproducing `rho` within
/// [`FACTOR_TOL`] element-wise.
///
/// Cholesky is attempted first. Matrices that are only semidefinite (or
/// carry the tiny negative eigenvalues the validation floor admits) fall
/// back to a spectral square root with negative eigenvalues clamped to
/// zero; the clamp is the best possible approximation, since no factor can
/// reproduce a negative eigenvalue.
pub fn factor_correlation(rho: &CorrelationMatrix) -> Result<DMatrix<f64>, DisruptionError> {
    let m = rho.as_matrix().clone();
    if let Some(chol) = m.clone().cholesky() {
        return Ok(chol.l());
    }
    let eig = m.clone().symmetric_eigen();
    let n = m.nrows();
    let mut factor = eig.eigenvectors.clone();
    for j in 0..n {
        let scale = eig.eigenvalues[j].max(0.0).sqrt();
        for i in 0..n {
            factor[(i, j)] *= scale;
        }
    }
    let residual = (&factor * factor.transpose() - &m).abs().max();
    if residual > FACTOR_TOL {
        return Err(DisruptionError::FactorResidual {
            residual,
            tol: FACTOR_TOL,
        });
    }
    Ok(factor)
}

/// The availability process: precomputed factor plus per-camera quantile
/// functions ready to be stepped through epochs.
pub struct DisruptionProcess {
    config: DisruptionProcessConfig,
    factor: DMatrix<f64>,
    quantiles: Vec<Beta>,
    std_normal: Normal,
}

impl DisruptionProcess {
    pub fn new(config: DisruptionProcessConfig) -> Result<Self, DisruptionError> {
        let factor = factor_correlation(&config.spatial_rho)?;
        let quantiles = config
            .marginals
            .iter()
            .map(|m| {
                Beta::new(m.alpha_shape(), m.beta_shape()).expect("validated marginal parameters")
            })
            .collect();
        let std_normal = Normal::standard();
        Ok(Self {
            config,
            factor,
            quantiles,
            std_normal,
        })
    }

    pub fn dim(&self) -> usize {
        self.config.marginals.len()
    }

    pub fn config(&self) -> &DisruptionProcessConfig {
        &self.config
    }

    /// RNG for one replication, derived from the configured seed. Streams
    /// for distinct replications never overlap.
    pub fn replication_rng(&self, replication: u64) -> ChaCha8Rng {
        seeds::stream(self.config.rng_seed, &[seeds::ROLE_EPOCHS, replication])
    }

    fn correlated_noise(&self, rng: &mut ChaCha8Rng) -> DVector<f64> {
        let eps = DVector::from_fn(self.dim(), |_, _| StandardNormal.sample(rng));
        &self.factor * eps
    }

    /// Stationary initial state: a fresh draw from the field's marginal
    /// distribution, so no burn-in is needed for any phi.
    pub fn init_state(&self, rng: &mut ChaCha8Rng) -> LatentState {
        LatentState {
            z: self.correlated_noise(rng),
            epoch: 0,
        }
    }

    /// AR(1) transition `z' = phi * z + sqrt(1 - phi^2) * L * eps`. The
    /// innovation scaling keeps the stationary variance at one for every
    /// phi, so the marginal law of each epoch never drifts.
    pub fn step(&self, state: &LatentState, rng: &mut ChaCha8Rng) -> LatentState {
        let phi = self.config.temporal_phi;
        let innovation = self.correlated_noise(rng);
        LatentState {
            z: state.z.map(|v| v * phi) + innovation.map(|v| v * (1.0 - phi * phi).sqrt()),
            epoch: state.epoch + 1,
        }
    }

    /// Map the latent field to availability probabilities and draw up/down
    /// outcomes. Draws happen in camera index order, one `random_bool` per
    /// camera, so outcomes are reproducible from the stream position.
    /// `resolutions[i]` is delivered when camera `i` is up, zero otherwise.
    pub fn realize(
        &self,
        state: &LatentState,
        resolutions: &[f64],
        rng: &mut ChaCha8Rng,
    ) -> AvailabilityOutcome {
        debug_assert_eq!(resolutions.len(), self.dim());
        let probabilities: Vec<f64> = (0..self.dim())
            .map(|i| {
                let u = clamp_unit(self.std_normal.cdf(state.z[i]));
                self.quantiles[i].inverse_cdf(u)
            })
            .collect();
        let up: Vec<bool> = probabilities
            .iter()
            .map(|&p| rng.random_bool(p.clamp(0.0, 1.0)))
            .collect();
        let delivered_res = up
            .iter()
            .zip(resolutions)
            .map(|(&u, &r)| if u { r } else { 0.0 })
            .collect();
        AvailabilityOutcome {
            probabilities,
            up,
            delivered_res,
        }
    }
}

/// Quantile function of a Beta availability distribution. Thin wrapper so
/// callers outside this module never touch the distribution type directly.
pub fn beta_quantile(u: f64, dist: &AvailabilityDist) -> f64 {
    let beta =
        Beta::new(dist.alpha_shape(), dist.beta_shape()).expect("validated marginal parameters");
    beta.inverse_cdf(clamp_unit(u))
}

/// CDF counterpart of [`beta_quantile`], used by goodness-of-fit checks.
pub fn beta_cdf(x: f64, dist: &AvailabilityDist) -> f64 {
    let beta =
        Beta::new(dist.alpha_shape(), dist.beta_shape()).expect("validated marginal parameters");
    beta.cdf(x)
}

/// Density counterpart, exposed for the same diagnostics.
pub fn beta_pdf(x: f64, dist: &AvailabilityDist) -> f64 {
    let beta =
        Beta::new(dist.alpha_shape(), dist.beta_shape()).expect("validated marginal parameters");
    beta.pdf(x)
}

fn clamp_unit(u: f64) -> f64 {
    u.clamp(1e-16, 1.0 - 1e-16)
}

/// Mean pairwise Pearson correlation of the availability probabilities over
/// `epochs` fresh draws (phi is ignored; epochs are sampled independently).
/// Reported alongside the configured latent correlation so the gap between
/// the two is visible in run output.
pub fn realized_probability_correlation(
    process: &DisruptionProcess,
    epochs: u64,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let n = process.dim();
    if n < 2 || epochs < 2 {
        return 0.0;
    }
    let mut sum = vec![0.0f64; n];
    let mut sum_sq = vec![0.0f64; n];
    let mut cross = vec![0.0f64; n * n];
    let unit_res = vec![1.0f64; n];
    for _ in 0..epochs {
        let state = process.init_state(rng);
        let out = process.realize(&state, &unit_res, rng);
        for i in 0..n {
            let pi = out.probabilities[i];
            sum[i] += pi;
            sum_sq[i] += pi * pi;
            for j in (i + 1)..n {
                cross[i * n + j] += pi * out.probabilities[j];
            }
        }
    }
    let count = epochs as f64;
    let var: Vec<f64> = (0..n)
        .map(|i| (sum_sq[i] - sum[i] * sum[i] / count) / count)
        .collect();
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            let cov = (cross[i * n + j] - sum[i] * sum[j] / count) / count;
            let denom = (var[i] * var[j]).sqrt();
            if denom > 0.0 {
                total += cov / denom;
                pairs += 1;
            }
        }
    }
    if pairs == 0 {
        0.0
    } else {
        total / pairs as f64
    }
}

/// Average of the off-diagonal entries of a correlation matrix, the
/// configured-side counterpart of [`realized_probability_correlation`].
pub fn mean_offdiagonal(rho: &CorrelationMatrix) -> f64 {
    let n = rho.n();
    if n < 2 {
        return 0.0;
    }
    let m = rho.as_matrix();
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            total += m[(i, j)];
        }
    }
    total / (n * (n - 1) / 2) as f64
}

/// Latent-field spatial correlation built from camera groups: `intra`
/// within a group, `inter` across groups. Group ids are arbitrary labels.
pub fn block_correlation(
    groups: &[usize],
    intra: f64,
    inter: f64,
) -> Result<CorrelationMatrix, crate::model::ModelError> {
    let n = groups.len();
    let mut m = DMatrix::identity(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                m[(i, j)] = if groups[i] == groups[j] { intra } else { inter };
            }
        }
    }
    CorrelationMatrix::new(m)
}

/// Two-sided Kolmogorov-Smirnov p-value via the asymptotic Kolmogorov
/// distribution. Adequate for the sample sizes used by the goodness-of-fit
/// checks here (10^4 and up).
pub fn ks_p_value(distance: f64, n: usize) -> f64 {
    let lambda = (n as f64).sqrt() * distance;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Kolmogorov-Smirnov distance of an ascending-sorted sample against a CDF.
pub fn ks_distance(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        d = d.max((f - lo).abs()).max((hi - f).abs());
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::dmatrix;

    fn corr(m: DMatrix<f64>) -> CorrelationMatrix {
        CorrelationMatrix::new(m).unwrap()
    }

    fn simple_process(rho: CorrelationMatrix, phi: f64, seed: u64) -> DisruptionProcess {
        let n = rho.n();
        let config =
            DisruptionProcessConfig::new(rho, phi, vec![AvailabilityDist::default(); n], seed)
                .unwrap();
        DisruptionProcess::new(config).unwrap()
    }

    #[test]
    fn factor_of_half_correlated_pair() {
        let rho = corr(dmatrix![1.0, 0.5; 0.5, 1.0]);
        let l = factor_correlation(&rho).unwrap();
        assert_abs_diff_eq!(l[(0, 0)], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(l[(0, 1)], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(l[(1, 0)], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(l[(1, 1)], 0.75f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn factor_reconstructs_block_matrix() {
        let rho = block_correlation(&[0, 0, 0, 0, 1, 1, 0], 0.8, 0.1).unwrap();
        let l = factor_correlation(&rho).unwrap();
        let residual = (&l * l.transpose() - rho.as_matrix()).abs().max();
        assert!(residual <= FACTOR_TOL, "residual {residual:e}");
    }

    #[test]
    fn factor_falls_back_on_singular_matrix() {
        // Perfectly correlated pair: rank one, so Cholesky fails and the
        // spectral path must reproduce it.
        let rho = corr(dmatrix![1.0, 1.0; 1.0, 1.0]);
        let l = factor_correlation(&rho).unwrap();
        let residual = (&l * l.transpose() - rho.as_matrix()).abs().max();
        assert!(residual <= FACTOR_TOL, "residual {residual:e}");
    }

    #[test]
    fn config_rejects_phi_out_of_range() {
        let rho = corr(dmatrix![1.0]);
        let marginals = vec![AvailabilityDist::default()];
        assert!(DisruptionProcessConfig::new(rho.clone(), 1.0, marginals.clone(), 0).is_err());
        assert!(DisruptionProcessConfig::new(rho.clone(), -0.1, marginals.clone(), 0).is_err());
        assert!(DisruptionProcessConfig::new(rho, 0.0, marginals, 0).is_ok());
    }

    #[test]
    fn config_rejects_marginal_count_mismatch() {
        let rho = corr(dmatrix![1.0, 0.0; 0.0, 1.0]);
        let err = DisruptionProcessConfig::new(rho, 0.0, vec![AvailabilityDist::default()], 0)
            .unwrap_err();
        assert!(matches!(err, DisruptionError::MarginalCountMismatch { .. }));
    }

    #[test]
    fn zero_latent_state_maps_to_marginal_median() {
        let process = simple_process(corr(dmatrix![1.0, 0.0; 0.0, 1.0]), 0.0, 7);
        let state = LatentState {
            z: DVector::zeros(2),
            epoch: 0,
        };
        let mut rng = process.replication_rng(0);
        let out = process.realize(&state, &[80.0, 120.0], &mut rng);
        // Beta(2,2) is symmetric about one half, so its median is exact.
        assert_abs_diff_eq!(out.probabilities[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(out.probabilities[1], 0.5, epsilon = 1e-12);
        for i in 0..2 {
            let expected = if out.up[i] { [80.0, 120.0][i] } else { 0.0 };
            assert_eq!(out.delivered_res[i], expected);
        }
    }

    #[test]
    // The reference digits are kept verbatim as produced, including ones
    // beyond f64 round-trip precision.
    #[allow(clippy::excessive_precision)]
    fn beta_quantile_matches_reference_values() {
        // Reference values computed with an independent statistics package.
        let b22 = AvailabilityDist::new(2.0, 2.0).unwrap();
        let b52 = AvailabilityDist::new(5.0, 2.0).unwrap();
        let b_half = AvailabilityDist::new(0.5, 0.5).unwrap();
        let cases = [
            (0.01, &b22, 5.890313577819525e-2),
            (0.25, &b22, 3.263518223330697e-1),
            (0.5, &b22, 0.5),
            (0.75, &b22, 6.736481776669303e-1),
            (0.99, &b22, 9.410968642218047e-1),
            (0.001, &b52, 1.813861330808660e-1),
            (0.5, &b52, 7.355500167043399e-1),
            (0.999, &b52, 9.917445072122533e-1),
            (0.01, &b_half, 2.467198171342215e-4),
            (0.75, &b_half, 8.535533905932737e-1),
        ];
        for (u, dist, expected) in cases {
            let got = beta_quantile(u, dist);
            assert!(
                (got - expected).abs() <= 1e-10,
                "quantile({u}) = {got}, expected {expected}"
            );
        }
    }

    #[test]
    fn beta_quantile_saturates_at_unit_interval_edges() {
        let dist = AvailabilityDist::default();
        assert!(beta_quantile(0.0, &dist) >= 0.0);
        assert!(beta_quantile(1.0, &dist) <= 1.0);
        assert!(beta_quantile(0.0, &dist) < 1e-6);
        assert!(beta_quantile(1.0, &dist) > 1.0 - 1e-6);
    }

    #[test]
    fn steps_are_deterministic_for_a_seed() {
        let rho = block_correlation(&[0, 0, 1], 0.8, 0.1).unwrap();
        let process = simple_process(rho, 0.6, 42);
        let mut a = process.replication_rng(3);
        let mut b = process.replication_rng(3);
        let mut sa = process.init_state(&mut a);
        let mut sb = process.init_state(&mut b);
        for _ in 0..50 {
            sa = process.step(&sa, &mut a);
            sb = process.step(&sb, &mut b);
        }
        assert_eq!(sa.z, sb.z);
        assert_eq!(sa.epoch, 50);
        let mut c = process.replication_rng(4);
        let sc = process.init_state(&mut c);
        assert_ne!(sa.z, sc.z);
    }

    #[test]
    fn zero_phi_has_no_memory() {
        let process = simple_process(corr(dmatrix![1.0]), 0.0, 11);
        let mut rng = process.replication_rng(0);
        let mut state = process.init_state(&mut rng);
        let n = 100_000usize;
        let mut prev = state.z[0];
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let mut lag = 0.0;
        for _ in 0..n {
            state = process.step(&state, &mut rng);
            let z = state.z[0];
            sum += z;
            sum_sq += z * z;
            lag += z * prev;
            prev = z;
        }
        let count = n as f64;
        let mean = sum / count;
        let var = sum_sq / count - mean * mean;
        let autocorr = (lag / count - mean * mean) / var;
        assert!(autocorr.abs() < 0.01, "lag-1 autocorrelation {autocorr}");
        assert!((0.97..=1.03).contains(&var), "variance {var}");
    }

    #[test]
    fn high_phi_retains_memory_at_stationary_variance() {
        let process = simple_process(corr(dmatrix![1.0]), 0.9, 12);
        let mut rng = process.replication_rng(0);
        let mut state = process.init_state(&mut rng);
        let n = 100_000usize;
        let mut prev = state.z[0];
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let mut lag = 0.0;
        for _ in 0..n {
            state = process.step(&state, &mut rng);
            let z = state.z[0];
            sum += z;
            sum_sq += z * z;
            lag += z * prev;
            prev = z;
        }
        let count = n as f64;
        let mean = sum / count;
        let var = sum_sq / count - mean * mean;
        let autocorr = (lag / count - mean * mean) / var;
        assert!(
            (0.88..=0.92).contains(&autocorr),
            "lag-1 autocorrelation {autocorr}"
        );
        assert!((0.97..=1.03).contains(&var), "variance {var}");
    }

    #[test]
    fn realized_probabilities_follow_the_marginal() {
        // Smaller sample than the acceptance run, with a correspondingly
        // looser distance bound; the p-value bound is sample-size free.
        let process = simple_process(corr(dmatrix![1.0]), 0.0, 5);
        let mut rng = process.replication_rng(0);
        let n = 100_000usize;
        let mut sample: Vec<f64> = (0..n)
            .map(|_| {
                let state = process.init_state(&mut rng);
                process.realize(&state, &[1.0], &mut rng).probabilities[0]
            })
            .collect();
        sample.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let dist = AvailabilityDist::default();
        let d = ks_distance(&sample, |x| beta_cdf(x, &dist));
        let p = ks_p_value(d, n);
        assert!(p > 0.01, "KS p-value {p}, distance {d}");
        assert!(d < 0.016, "KS distance {d}");
    }

    #[test]
    fn spatially_correlated_latents_correlate_probabilities() {
        let process = simple_process(corr(dmatrix![1.0, 0.8; 0.8, 1.0]), 0.0, 9);
        let mut rng = process.replication_rng(0);
        let realized = realized_probability_correlation(&process, 40_000, &mut rng);
        // The copula transform shrinks latent correlation slightly; 0.8
        // stays within 0.05 for Beta(2,2) marginals.
        assert!(
            (realized - 0.8).abs() < 0.05,
            "realized correlation {realized}"
        );
    }

    #[test]
    fn independent_latents_leave_probabilities_uncorrelated() {
        let process = simple_process(corr(dmatrix![1.0, 0.0; 0.0, 1.0]), 0.0, 10);
        let mut rng = process.replication_rng(0);
        let realized = realized_probability_correlation(&process, 40_000, &mut rng);
        assert!(realized.abs() < 0.02, "realized correlation {realized}");
    }

    #[test]
    fn up_rate_tracks_probability_mean() {
        let process = simple_process(corr(dmatrix![1.0]), 0.0, 13);
        let mut rng = process.replication_rng(0);
        let n = 50_000usize;
        let mut ups = 0usize;
        for _ in 0..n {
            let state = process.init_state(&mut rng);
            if process.realize(&state, &[1.0], &mut rng).up[0] {
                ups += 1;
            }
        }
        // Unconditional up-rate is the Beta mean, one half for Beta(2,2).
        // Var(up) mixes Bernoulli and Beta variance: 0.25 here.
        let rate = ups as f64 / n as f64;
        let se = (0.25f64 / n as f64).sqrt();
        assert!((rate - 0.5).abs() < 3.0 * se, "up rate {rate}");
    }

    #[test]
    fn mean_offdiagonal_averages_upper_triangle() {
        let rho = block_correlation(&[0, 0, 1], 0.8, 0.1).unwrap();
        // Pairs: (0,1)=0.8, (0,2)=0.1, (1,2)=0.1.
        assert_abs_diff_eq!(mean_offdiagonal(&rho), 1.0 / 3.0, epsilon = 1e-12);
    }
}
