//! Finite-dimensional Gaussian vectors and linear-Gaussian conditioning.
//!
//! Every filter update in this crate reduces to [`condition`]: given a prior
//! `N(m, P)` and an observation `v = H ξ + b + ε`, `ε ~ N(0, N)`, the posterior
//! is
//!
//! ```text
//! m+ = m + P Hᵀ S⁺ (v − H m − b),    P+ = P − P Hᵀ S⁺ H P,    S = H P Hᵀ + N
//! ```
//!
//! with `S⁺` the Moore–Penrose pseudoinverse.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{ensure_finite, Error, Result};

/// Relative asymmetry accepted when validating a covariance.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Relative floor below which a negative eigenvalue is a PSD violation.
pub const PSD_TOL: f64 = 1e-10;
/// Relative eigenvalue cutoff of [`pseudoinverse`].
pub const PINV_CUTOFF: f64 = 1e-12;

/// Gaussian random vector `N(mean, cov)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianVector {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl GaussianVector {
    /// Validates dimensions, finiteness, symmetry and positive semidefiniteness.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != cov.ncols() || cov.nrows() != mean.len() {
            return Err(Error::Dimension(format!(
                "mean has length {} but covariance is {}x{}",
                mean.len(),
                cov.nrows(),
                cov.ncols()
            )));
        }
        ensure_finite("gaussian mean", mean.iter())?;
        ensure_finite("gaussian covariance", cov.iter())?;
        check_symmetric(&cov, SYMMETRY_TOL, "covariance")?;
        check_psd(&cov, "covariance")?;
        Ok(Self { mean, cov })
    }

    /// Builds from trusted parts, re-symmetrizing the covariance.
    pub(crate) fn from_parts(mean: DVector<f64>, mut cov: DMatrix<f64>) -> Self {
        symmetrize(&mut cov);
        Self { mean, cov }
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `tr(cov)`, i.e. `E‖ξ − m‖²`.
    pub fn trace(&self) -> f64 {
        self.cov.trace()
    }

    /// Law of `M ξ` for a fixed matrix `M`.
    pub fn push_forward(&self, map: &DMatrix<f64>) -> Result<Self> {
        if map.ncols() != self.dim() {
            return Err(Error::Dimension(format!(
                "push-forward map has {} columns, vector has dimension {}",
                map.ncols(),
                self.dim()
            )));
        }
        Ok(Self::from_parts(
            map * &self.mean,
            map * &self.cov * map.transpose(),
        ))
    }

    pub fn into_parts(self) -> (DVector<f64>, DMatrix<f64>) {
        (self.mean, self.cov)
    }
}

/// Affine observation `v = map · ξ + bias + ε`, `ε ~ N(0, noise_cov)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearObservation {
    pub map: DMatrix<f64>,
    pub noise_cov: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl LinearObservation {
    pub fn new(map: DMatrix<f64>, noise_cov: DMatrix<f64>, bias: DVector<f64>) -> Result<Self> {
        let rows = map.nrows();
        if noise_cov.nrows() != rows || noise_cov.ncols() != rows || bias.len() != rows {
            return Err(Error::Dimension(format!(
                "observation map has {} rows, noise covariance is {}x{}, bias has length {}",
                rows,
                noise_cov.nrows(),
                noise_cov.ncols(),
                bias.len()
            )));
        }
        Ok(Self { map, noise_cov, bias })
    }

    /// Observation without offset.
    pub fn unbiased(map: DMatrix<f64>, noise_cov: DMatrix<f64>) -> Result<Self> {
        let rows = map.nrows();
        Self::new(map, noise_cov, DVector::zeros(rows))
    }

    /// Noise-free read-out of the coordinates `start..start + len` of a `dim`-vector.
    pub fn selector(dim: usize, start: usize, len: usize) -> Self {
        let mut map = DMatrix::zeros(len, dim);
        for i in 0..len {
            map[(i, start + i)] = 1.0;
        }
        Self {
            map,
            noise_cov: DMatrix::zeros(len, len),
            bias: DVector::zeros(len),
        }
    }

    pub fn rows(&self) -> usize {
        self.map.nrows()
    }
}

/// Result of one conditioning step, keeping the quantities of the increment.
#[derive(Debug, Clone)]
pub struct Conditioned {
    pub posterior: GaussianVector,
    /// `Cov(ξ, v)` under the prior.
    pub cross_cov: DMatrix<f64>,
    /// `Cov(v, v)` under the prior.
    pub innovation_cov: DMatrix<f64>,
}

/// Posterior of `prior` after observing `observed_value` through `obs`.
pub fn condition(
    prior: &GaussianVector,
    obs: &LinearObservation,
    observed_value: &DVector<f64>,
) -> Result<GaussianVector> {
    condition_detailed(prior, obs, observed_value).map(|c| c.posterior)
}

/// [`condition`], also returning the cross and innovation covariances.
pub fn condition_detailed(
    prior: &GaussianVector,
    obs: &LinearObservation,
    observed_value: &DVector<f64>,
) -> Result<Conditioned> {
    if obs.map.ncols() != prior.dim() {
        return Err(Error::Dimension(format!(
            "observation map has {} columns, prior has dimension {}",
            obs.map.ncols(),
            prior.dim()
        )));
    }
    if observed_value.len() != obs.rows() {
        return Err(Error::Dimension(format!(
            "observed value has length {}, observation has {} rows",
            observed_value.len(),
            obs.rows()
        )));
    }
    ensure_finite("observation map", obs.map.iter())?;
    ensure_finite("observation noise covariance", obs.noise_cov.iter())?;
    ensure_finite("observation bias", obs.bias.iter())?;
    ensure_finite("observed value", observed_value.iter())?;

    let cross = &prior.cov * obs.map.transpose();
    let mut innovation = &obs.map * &cross + &obs.noise_cov;
    symmetrize(&mut innovation);
    let pinv = pseudoinverse(&innovation)?;
    let gain = &cross * &pinv;
    let residual = observed_value - &obs.map * &prior.mean - &obs.bias;
    let mean = &prior.mean + &gain * residual;
    let cov = &prior.cov - &gain * cross.transpose();
    Ok(Conditioned {
        posterior: GaussianVector::from_parts(mean, cov),
        cross_cov: cross,
        innovation_cov: innovation,
    })
}

/// Moore–Penrose pseudoinverse of a symmetric positive semidefinite matrix.
///
/// Eigenvalues below `PINV_CUTOFF · λ_max` are treated as zero.
pub fn pseudoinverse(s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if s.nrows() != s.ncols() {
        return Err(Error::Dimension(format!(
            "pseudoinverse needs a square matrix, got {}x{}",
            s.nrows(),
            s.ncols()
        )));
    }
    ensure_finite("pseudoinverse input", s.iter())?;
    check_symmetric(s, 1e-10, "pseudoinverse input")?;
    let n = s.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    if n == 1 {
        let v = s[(0, 0)];
        return Ok(DMatrix::from_element(1, 1, if v > 0.0 { 1.0 / v } else { 0.0 }));
    }
    let eig = SymmetricEigen::new(s.clone());
    let max = eig.eigenvalues.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
    if max == 0.0 {
        return Ok(DMatrix::zeros(n, n));
    }
    let cutoff = PINV_CUTOFF * max;
    let inv = eig
        .eigenvalues
        .map(|l| if l > cutoff { 1.0 / l } else { 0.0 });
    let v = &eig.eigenvectors;
    let mut out = v * DMatrix::from_diagonal(&inv) * v.transpose();
    symmetrize(&mut out);
    Ok(out)
}

/// `tr(cross · innovation⁺ · crossᵀ)`: the mean-square size of the estimate
/// increment produced by one conditioning step.
pub fn increment_trace(cross_cov: &DMatrix<f64>, innovation_cov: &DMatrix<f64>) -> Result<f64> {
    if cross_cov.ncols() != innovation_cov.nrows() || innovation_cov.nrows() != innovation_cov.ncols()
    {
        return Err(Error::Dimension(format!(
            "cross covariance has {} columns, innovation covariance is {}x{}",
            cross_cov.ncols(),
            innovation_cov.nrows(),
            innovation_cov.ncols()
        )));
    }
    let mut innovation = innovation_cov.clone();
    symmetrize(&mut innovation);
    let pinv = pseudoinverse(&innovation)?;
    let value = (cross_cov * pinv * cross_cov.transpose()).trace();
    Ok(value.max(0.0))
}

/// Symmetric PSD square root with eigenvalues above the negative floor clipped to zero.
pub fn psd_sqrt(s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_symmetric(s, 1e-10, "square-root input")?;
    let n = s.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let mut sym = s.clone();
    symmetrize(&mut sym);
    let eig = SymmetricEigen::new(sym);
    let max = eig.eigenvalues.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
    if eig.eigenvalues.iter().any(|&l| l < -PSD_TOL * max) {
        return Err(Error::InvalidInput(
            "matrix square root of a non-PSD matrix".into(),
        ));
    }
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let v = &eig.eigenvectors;
    Ok(v * DMatrix::from_diagonal(&roots) * v.transpose())
}

/// Replaces `s` by `(s + sᵀ)/2`.
pub fn symmetrize(s: &mut DMatrix<f64>) {
    let n = s.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (s[(i, j)] + s[(j, i)]);
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
}

fn check_symmetric(s: &DMatrix<f64>, tol: f64, what: &str) -> Result<()> {
    if s.nrows() != s.ncols() {
        return Err(Error::Dimension(format!("{what} is not square")));
    }
    let scale = s.amax().max(f64::MIN_POSITIVE);
    let asym = (s - s.transpose()).amax();
    if asym > tol * scale {
        return Err(Error::InvalidInput(format!(
            "{what} is not symmetric (asymmetry {asym:e})"
        )));
    }
    Ok(())
}

fn check_psd(s: &DMatrix<f64>, what: &str) -> Result<()> {
    if s.nrows() == 0 {
        return Ok(());
    }
    let mut sym = s.clone();
    symmetrize(&mut sym);
    let eig = sym.symmetric_eigenvalues();
    let max = eig.max();
    let min = eig.min();
    if min < -PSD_TOL * max.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::InvalidInput(format!(
            "{what} is not positive semidefinite (eigenvalue {min:e})"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_psd(rng: &mut ChaCha8Rng, n: usize, extra: f64) -> DMatrix<f64> {
        let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        &g * g.transpose() + DMatrix::identity(n, n) * extra
    }

    fn random_prior(rng: &mut ChaCha8Rng, n: usize) -> GaussianVector {
        let mean = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        GaussianVector::new(mean, random_psd(rng, n, 0.1)).unwrap()
    }

    #[test]
    fn exact_observation_of_one_coordinate() {
        let prior = GaussianVector::new(DVector::zeros(2), DMatrix::identity(2, 2)).unwrap();
        let obs = LinearObservation::unbiased(dmatrix![1.0, 0.0], dmatrix![0.0]).unwrap();
        let post = condition(&prior, &obs, &dvector![1.0]).unwrap();
        assert_eq!(post.mean(), &dvector![1.0, 0.0]);
        assert_eq!(post.cov(), &dmatrix![0.0, 0.0; 0.0, 1.0]);
    }

    #[test]
    fn zero_map_leaves_prior_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let prior = random_prior(&mut rng, 3);
        let obs = LinearObservation::unbiased(DMatrix::zeros(2, 3), DMatrix::identity(2, 2) * 0.5)
            .unwrap();
        let post = condition(&prior, &obs, &dvector![3.0, -4.0]).unwrap();
        assert_eq!(post, prior);
    }

    #[test]
    fn matches_blockwise_joint_conditioning() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let prior = random_prior(&mut rng, 3);
            let h = DMatrix::from_fn(2, 3, |_, _| rng.random_range(-1.0..1.0));
            let noise = random_psd(&mut rng, 2, 0.05);
            let bias = dvector![0.3, -0.2];
            let value = dvector![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let obs = LinearObservation::new(h.clone(), noise.clone(), bias.clone()).unwrap();
            let post = condition(&prior, &obs, &value).unwrap();

            // Joint law of (ξ, v) assembled densely, then conditioned blockwise
            // with an ordinary inverse of the observed block.
            let p = prior.cov();
            let mut joint = DMatrix::zeros(5, 5);
            joint.view_mut((0, 0), (3, 3)).copy_from(p);
            let pht = p * h.transpose();
            joint.view_mut((0, 3), (3, 2)).copy_from(&pht);
            joint.view_mut((3, 0), (2, 3)).copy_from(&pht.transpose());
            joint
                .view_mut((3, 3), (2, 2))
                .copy_from(&(&h * p * h.transpose() + &noise));
            let m2 = &h * prior.mean() + &bias;
            let p11 = joint.view((0, 0), (3, 3)).clone_owned();
            let p12 = joint.view((0, 3), (3, 2)).clone_owned();
            let p22 = joint.view((3, 3), (2, 2)).clone_owned();
            let inv = p22.try_inverse().unwrap();
            let mean = prior.mean() + &p12 * &inv * (&value - m2);
            let cov = &p11 - &p12 * &inv * p12.transpose();

            assert!((post.mean() - mean).amax() < 1e-10);
            assert!((post.cov() - cov).amax() < 1e-10);
        }
    }

    #[test]
    fn pseudoinverse_examples() {
        let i3 = DMatrix::<f64>::identity(3, 3);
        assert!((pseudoinverse(&i3).unwrap() - &i3).amax() < 1e-15);
        assert_eq!(pseudoinverse(&DMatrix::zeros(3, 3)).unwrap(), DMatrix::zeros(3, 3));

        // ‖v‖ = 2, so pinv(v vᵀ) = v vᵀ / ‖v‖⁴ = v vᵀ / 16.
        let v = dvector![1.0, 1.0, 1.0, 1.0];
        let s = &v * v.transpose();
        let pinv = pseudoinverse(&s).unwrap();
        assert!((pinv - s / 16.0).amax() < 1e-14);
    }

    #[test]
    fn pseudoinverse_rejects_asymmetric() {
        let s = dmatrix![1.0, 0.5; 0.0, 1.0];
        assert!(matches!(pseudoinverse(&s), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn increment_trace_examples() {
        assert_eq!(
            increment_trace(&DMatrix::zeros(3, 2), &DMatrix::identity(2, 2)).unwrap(),
            0.0
        );
        let v = increment_trace(&dmatrix![3.0], &dmatrix![4.0]).unwrap();
        assert!((v - 9.0 / 4.0).abs() < 1e-15);
        assert!(increment_trace(&DMatrix::zeros(3, 2), &DMatrix::identity(3, 3)).is_err());
    }

    #[test]
    fn increment_trace_matches_increment_covariance() {
        // E[ξ|v] − E[ξ] = G (v − E v) with G = Σ₁₂ Σ₂₂⁻¹, so its covariance is
        // G Σ₂₂ Gᵀ; its trace must agree with tr(Σ₁₂ Σ₂₂⁺ Σ₂₁).
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let cross = DMatrix::from_fn(3, 2, |_, _| rng.random_range(-1.0..1.0));
            let innov = random_psd(&mut rng, 2, 0.2);
            let g = &cross * innov.clone().try_inverse().unwrap();
            let expected = (&g * &innov * g.transpose()).trace();
            let got = increment_trace(&cross, &innov).unwrap();
            assert!((got - expected).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let prior = GaussianVector::new(DVector::zeros(2), DMatrix::identity(2, 2)).unwrap();
        let obs = LinearObservation::unbiased(dmatrix![1.0, 0.0, 0.0], dmatrix![1.0]).unwrap();
        assert!(matches!(
            condition(&prior, &obs, &dvector![1.0]),
            Err(Error::Dimension(_))
        ));
        let obs = LinearObservation::unbiased(dmatrix![1.0, 0.0], dmatrix![1.0]).unwrap();
        assert!(matches!(
            condition(&prior, &obs, &dvector![f64::NAN]),
            Err(Error::NonFinite(_))
        ));
        assert!(LinearObservation::unbiased(dmatrix![1.0, 0.0], dmatrix![1.0, 0.0; 0.0, 1.0]).is_err());
        assert!(GaussianVector::new(dvector![0.0, 0.0], dmatrix![1.0, 0.0; 0.0, -1.0]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn sequential_equals_stacked(seed in any::<u64>(), dim in 1usize..=5, r1 in 1usize..=2, r2 in 1usize..=2) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let prior = random_prior(&mut rng, dim);
            let h1 = DMatrix::from_fn(r1, dim, |_, _| rng.random_range(-1.0..1.0));
            let h2 = DMatrix::from_fn(r2, dim, |_, _| rng.random_range(-1.0..1.0));
            let n1 = random_psd(&mut rng, r1, 0.1);
            let n2 = random_psd(&mut rng, r2, 0.1);
            let v1 = DVector::from_fn(r1, |_, _| rng.random_range(-1.0..1.0));
            let v2 = DVector::from_fn(r2, |_, _| rng.random_range(-1.0..1.0));

            let o1 = LinearObservation::unbiased(h1.clone(), n1.clone()).unwrap();
            let o2 = LinearObservation::unbiased(h2.clone(), n2.clone()).unwrap();
            let two_step = condition(&condition(&prior, &o1, &v1).unwrap(), &o2, &v2).unwrap();

            let mut h = DMatrix::zeros(r1 + r2, dim);
            h.view_mut((0, 0), (r1, dim)).copy_from(&h1);
            h.view_mut((r1, 0), (r2, dim)).copy_from(&h2);
            let mut n = DMatrix::zeros(r1 + r2, r1 + r2);
            n.view_mut((0, 0), (r1, r1)).copy_from(&n1);
            n.view_mut((r1, r1), (r2, r2)).copy_from(&n2);
            let v = DVector::from_iterator(r1 + r2, v1.iter().chain(v2.iter()).copied());
            let stacked = condition(&prior, &LinearObservation::unbiased(h, n).unwrap(), &v).unwrap();

            prop_assert!((two_step.mean() - stacked.mean()).amax() < 1e-9);
            prop_assert!((two_step.cov() - stacked.cov()).amax() < 1e-9);
        }

        #[test]
        fn posterior_shrinks_and_trace_identity_holds(seed in any::<u64>(), dim in 1usize..=5, r in 1usize..=3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let prior = random_prior(&mut rng, dim);
            let h = DMatrix::from_fn(r, dim, |_, _| rng.random_range(-1.0..1.0));
            let noise = random_psd(&mut rng, r, 0.01);
            let v = DVector::from_fn(r, |_, _| rng.random_range(-1.0..1.0));
            let c = condition_detailed(&prior, &LinearObservation::unbiased(h, noise).unwrap(), &v).unwrap();

            let diff = prior.cov() - c.posterior.cov();
            let min_eig = diff.symmetric_eigenvalues().min();
            prop_assert!(min_eig > -1e-10);
            prop_assert!(c.posterior.trace() <= prior.trace() + 1e-12);
            let inc = increment_trace(&c.cross_cov, &c.innovation_cov).unwrap();
            prop_assert!((inc - (prior.trace() - c.posterior.trace())).abs() < 1e-9);
        }

        #[test]
        fn exact_conditioning_is_idempotent(seed in any::<u64>(), dim in 2usize..=5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let prior = random_prior(&mut rng, dim);
            let h = DMatrix::from_fn(1, dim, |_, _| rng.random_range(-1.0..1.0));
            let obs = LinearObservation::unbiased(h, DMatrix::zeros(1, 1)).unwrap();
            let v = DVector::from_element(1, rng.random_range(-1.0..1.0));
            let once = condition(&prior, &obs, &v).unwrap();
            let twice = condition(&once, &obs, &v).unwrap();
            prop_assert!((once.mean() - twice.mean()).amax() < 1e-10);
            prop_assert!((once.cov() - twice.cov()).amax() < 1e-10);
        }
    }
}
