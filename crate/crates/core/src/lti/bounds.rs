use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};

use super::{expm, LtiSystem};

/// Number of uniformly spaced times at which `‖e^{At}‖` is sampled.
pub const MU_GRID_POINTS: usize = 256;
/// Multiplicative safety factor applied to the sampled maximum.
pub const MU_SAFETY: f64 = 1e-6;

/// Grid estimate of `μ ≥ sup_{t∈[0,T]} ‖e^{At}‖₂`.
pub fn mu_bound(sys: &LtiSystem, horizon: f64) -> Result<f64> {
    mu_on_grid(sys.a(), horizon, MU_GRID_POINTS).map(|m| m * (1.0 + MU_SAFETY))
}

pub(crate) fn mu_on_grid(a: &DMatrix<f64>, horizon: f64, points: usize) -> Result<f64> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidInput(format!("horizon must be positive, got {horizon}")));
    }
    let mut best = 1.0_f64;
    for k in 0..points {
        let t = horizon * k as f64 / (points - 1) as f64;
        best = best.max(spectral_norm(&expm(a, t)?));
    }
    Ok(best)
}

pub(crate) fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// Which convergence bound a report instantiates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundVariant {
    /// No input noise, finite dimensions: `M T³ / n²`.
    Noiseless,
    /// Input noise: `M₁ T²/n + M₂ T³/n² + M₃ T⁴/n²`.
    InputNoise,
    /// Smooth initial covariance (`P₀ ∈ L(X, dom A)`): `M T²/n`.
    CovarianceSmooth,
    /// Smooth initial state (`x ∈ dom A`): `M T³/n²`.
    StateSmooth,
}

impl BoundVariant {
    pub fn name(self) -> &'static str {
        match self {
            BoundVariant::Noiseless => "noiseless",
            BoundVariant::InputNoise => "input_noise",
            BoundVariant::CovarianceSmooth => "covariance_smooth",
            BoundVariant::StateSmooth => "state_smooth",
        }
    }
}

impl fmt::Display for BoundVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BoundVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "noiseless" => Ok(BoundVariant::Noiseless),
            "input_noise" => Ok(BoundVariant::InputNoise),
            "covariance_smooth" => Ok(BoundVariant::CovarianceSmooth),
            "state_smooth" => Ok(BoundVariant::StateSmooth),
            other => Err(Error::InvalidInput(format!("unknown bound variant '{other}'"))),
        }
    }
}

/// Evaluated bound constants and bound value at a given `(T, n)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub variant: BoundVariant,
    pub constants: BTreeMap<String, f64>,
    pub bound_value: f64,
    /// A-priori bound on `E‖ẑ_{T,n} − z(T)‖²` substituted into the constants.
    pub a_priori_error: f64,
    pub mu: f64,
    pub mu_grid_points: usize,
    pub mu_safety: f64,
    pub horizon: f64,
    pub n: usize,
    /// Raw quantities the constants were assembled from.
    pub ingredients: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

/// [`bound_constants_with_mu`] with `μ` from [`mu_bound`].
pub fn bound_constants(sys: &LtiSystem, horizon: f64, n: usize, variant: BoundVariant) -> Result<BoundReport> {
    let mu = mu_bound(sys, horizon)?;
    bound_constants_with_mu(sys, horizon, n, variant, mu)
}

/// Closed-form bound constants for a given `μ`.
pub fn bound_constants_with_mu(
    sys: &LtiSystem,
    horizon: f64,
    n: usize,
    variant: BoundVariant,
    mu: f64,
) -> Result<BoundReport> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidInput(format!("horizon must be positive, got {horizon}")));
    }
    if !(mu >= 1.0) || !mu.is_finite() {
        return Err(Error::InvalidInput(format!("mu must be a finite value >= 1, got {mu}")));
    }
    let a = sys.a();
    let bqb = sys.input_covariance();
    let tr_p0 = sys.p0().trace();
    let tr_bqb = bqb.trace();
    let tr_abqba = (a * &bqb * a.transpose()).trace();
    let tr_ap0a = (a * sys.p0() * a.transpose()).trace();
    let norm_a = spectral_norm(a);
    let norm_c = spectral_norm(sys.c());
    let min_eig_r = sys.min_eig_r();
    let p = sys.state_dim();
    let mut stacked = DMatrix::zeros(2 * p, p);
    stacked.view_mut((0, 0), (p, p)).copy_from(sys.p0());
    stacked.view_mut((p, 0), (p, p)).copy_from(&(a * sys.p0()));
    let p0_graph_norm = spectral_norm(&stacked);
    let r_dim = sys.output_dim() as f64;
    let noisy = tr_bqb > 0.0;

    if variant == BoundVariant::Noiseless && noisy {
        return Err(Error::InvalidInput("noiseless bound requested for a system with input noise".into()));
    }
    if variant == BoundVariant::StateSmooth && !tr_ap0a.is_finite() {
        return Err(Error::InvalidInput("state_smooth bound needs finite tr(A P0 Aᵀ)".into()));
    }

    let mu2 = mu * mu;
    let a_priori = if variant == BoundVariant::InputNoise || noisy {
        mu2 * tr_p0 + horizon * mu2 * tr_bqb
    } else {
        mu2 * tr_p0
    };
    let c2 = norm_c * norm_c;
    let t = horizon;
    let nf = n as f64;

    let input_m1 = c2 * tr_bqb * a_priori / min_eig_r;
    let input_m3 = mu2 * c2 * tr_abqba * a_priori / (2.0 * min_eig_r);
    let input_terms = input_m1 * t * t / nf + input_m3 * t.powi(4) / (nf * nf);

    let mut constants = BTreeMap::new();
    let mut notes = Vec::new();
    let bound_value = match variant {
        BoundVariant::Noiseless => {
            let m = mu2 * tr_p0 * a_priori * c2 * norm_a * norm_a / (12.0 * min_eig_r);
            constants.insert("M".to_string(), m);
            m * t.powi(3) / (nf * nf)
        }
        BoundVariant::InputNoise => {
            let m2 = mu2 * norm_a * norm_a * c2 * tr_p0 * a_priori / (12.0 * min_eig_r);
            constants.insert("M1".to_string(), input_m1);
            constants.insert("M2".to_string(), m2);
            constants.insert("M3".to_string(), input_m3);
            input_m1 * t * t / nf + m2 * t.powi(3) / (nf * nf) + input_m3 * t.powi(4) / (nf * nf)
        }
        BoundVariant::CovarianceSmooth => {
            let m = r_dim * mu2 * p0_graph_norm * c2 * a_priori / (2.0 * min_eig_r);
            constants.insert("M".to_string(), m);
            notes.push(
                "graph-norm operator norm of P0 evaluated on the finite-dimensional (Galerkin) model as ‖[P0; A P0]‖₂"
                    .to_string(),
            );
            let mut value = m * t * t / nf;
            if noisy {
                constants.insert("M1".to_string(), input_m1);
                constants.insert("M3".to_string(), input_m3);
                value += input_terms;
            }
            value
        }
        BoundVariant::StateSmooth => {
            let m = mu2 * tr_ap0a * c2 * a_priori / (12.0 * min_eig_r);
            constants.insert("M".to_string(), m);
            let mut value = m * t.powi(3) / (nf * nf);
            if noisy {
                constants.insert("M1".to_string(), input_m1);
                constants.insert("M3".to_string(), input_m3);
                value += input_terms;
            }
            value
        }
    };

    let ingredients = BTreeMap::from([
        ("tr_p0".to_string(), tr_p0),
        ("tr_bqb".to_string(), tr_bqb),
        ("tr_abqba".to_string(), tr_abqba),
        ("tr_ap0a".to_string(), tr_ap0a),
        ("norm_a".to_string(), norm_a),
        ("norm_c".to_string(), norm_c),
        ("min_eig_r".to_string(), min_eig_r),
        ("p0_graph_norm".to_string(), p0_graph_norm),
    ]);
    Ok(BoundReport {
        variant,
        constants,
        bound_value,
        a_priori_error: a_priori,
        mu,
        mu_grid_points: MU_GRID_POINTS,
        mu_safety: MU_SAFETY,
        horizon,
        n,
        ingredients,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rotation_system() -> LtiSystem {
        // Skew-symmetric A with ‖A‖ = 1, ‖C‖ = 1, tr P0 = 1, R = 1.
        LtiSystem::noiseless(
            dmatrix![0.0, 1.0; -1.0, 0.0],
            dmatrix![1.0, 0.0],
            dmatrix![1.0],
            dmatrix![0.5, 0.0; 0.0, 0.5],
            DVector::zeros(2),
        )
        .unwrap()
    }

    #[test]
    fn mu_examples() {
        let zero = LtiSystem::noiseless(DMatrix::zeros(2, 2), dmatrix![1.0, 0.0], dmatrix![1.0], DMatrix::identity(2, 2), DVector::zeros(2)).unwrap();
        assert_eq!(mu_bound(&zero, 3.0).unwrap(), 1.0 + 1e-6);
        let mu = mu_bound(&rotation_system(), 5.0).unwrap();
        assert!((mu - (1.0 + 1e-6)).abs() < 1e-12);
    }

    #[test]
    fn mu_matches_dense_grid() {
        let sys = LtiSystem::noiseless(dmatrix![-1.0, 10.0; 0.0, -1.0], dmatrix![1.0, 0.0], dmatrix![1.0], DMatrix::identity(2, 2), DVector::zeros(2)).unwrap();
        let dense = mu_on_grid(sys.a(), 1.0, 4096).unwrap();
        let mu = mu_bound(&sys, 1.0).unwrap();
        assert!((mu - dense).abs() <= 0.01 * dense);
        assert!(mu > 3.0);
    }

    #[test]
    fn noiseless_unit_substitution() {
        let report = bound_constants_with_mu(&rotation_system(), 2.0, 4, BoundVariant::Noiseless, 1.0).unwrap();
        assert!((report.constants["M"] - 1.0 / 12.0).abs() < 1e-15);
        assert!((report.bound_value - 8.0 / (12.0 * 16.0)).abs() < 1e-15);
        assert_eq!(report.a_priori_error, 1.0);
    }

    #[test]
    fn zero_input_reduces_to_initial_state_term() {
        let sys = rotation_system();
        let report = bound_constants(&sys, 1.5, 3, BoundVariant::InputNoise).unwrap();
        assert_eq!(report.constants["M1"], 0.0);
        assert_eq!(report.constants["M3"], 0.0);
        assert!((report.bound_value - report.constants["M2"] * 1.5f64.powi(3) / 9.0).abs() < 1e-15);
    }

    #[test]
    fn noiseless_variant_rejects_input_noise() {
        let sys = rotation_system().with_input(dmatrix![1.0; 0.0], dmatrix![1.0]).unwrap();
        assert!(bound_constants(&sys, 1.0, 2, BoundVariant::Noiseless).is_err());
    }

    #[test]
    fn bound_decreases_in_n() {
        let sys = rotation_system().with_input(dmatrix![1.0; 1.0], dmatrix![0.3]).unwrap();
        for variant in [BoundVariant::InputNoise, BoundVariant::CovarianceSmooth, BoundVariant::StateSmooth] {
            let values: Vec<f64> = (1..10).map(|n| bound_constants(&sys, 1.0, n, variant).unwrap().bound_value).collect();
            assert!(values.windows(2).all(|w| w[1] < w[0]));
        }
    }

    #[test]
    fn constants_match_independent_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let a = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0));
        let b = DMatrix::from_fn(3, 2, |_, _| rng.random_range(-1.0..1.0));
        let c = DMatrix::from_fn(2, 3, |_, _| rng.random_range(-1.0..1.0));
        let g = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0));
        let p0 = &g * g.transpose();
        let q = dmatrix![0.5, 0.1; 0.1, 0.3];
        let r = dmatrix![0.2, 0.05; 0.05, 0.4];
        let sys = LtiSystem::new(a.clone(), b.clone(), c.clone(), q.clone(), r.clone(), p0.clone(), dvector![0.0, 0.0, 0.0]).unwrap();
        let (t, n, mu) = (1.3, 5usize, 1.7);

        // Raw ingredients via element-wise sums and a power iteration, independent of the module.
        let trace = |m: &DMatrix<f64>| (0..m.nrows()).map(|i| m[(i, i)]).sum::<f64>();
        let op_norm = |m: &DMatrix<f64>| {
            let mtm = m.transpose() * m;
            let mut v = DVector::from_element(mtm.nrows(), 1.0);
            for _ in 0..2000 {
                v = (&mtm * &v).normalize();
            }
            (v.dot(&(&mtm * &v))).sqrt()
        };
        let bqb = &b * &q * b.transpose();
        let lam = {
            let (x, y, z) = (r[(0, 0)], r[(1, 1)], r[(0, 1)]);
            0.5 * (x + y) - (0.25 * (x - y).powi(2) + z * z).sqrt()
        };
        let e = mu * mu * trace(&p0) + t * mu * mu * trace(&bqb);
        let (na, nc) = (op_norm(&a), op_norm(&c));
        let m1 = nc * nc * trace(&bqb) * e / lam;
        let m2 = mu * mu * na * na * nc * nc * trace(&p0) * e / (12.0 * lam);
        let m3 = mu * mu * nc * nc * trace(&(&a * &bqb * a.transpose())) * e / (2.0 * lam);

        let rep = bound_constants_with_mu(&sys, t, n, BoundVariant::InputNoise, mu).unwrap();
        let rel = |x: f64, y: f64| (x - y).abs() / y.abs();
        assert!(rel(rep.constants["M1"], m1) < 1e-12);
        assert!(rel(rep.constants["M2"], m2) < 1e-12);
        assert!(rel(rep.constants["M3"], m3) < 1e-12);
        let nf = n as f64;
        assert!(rel(rep.bound_value, m1 * t * t / nf + m2 * t.powi(3) / (nf * nf) + m3 * t.powi(4) / (nf * nf)) < 1e-12);

        let rep = bound_constants_with_mu(&sys, t, n, BoundVariant::StateSmooth, mu).unwrap();
        let m = mu * mu * trace(&(&a * &p0 * a.transpose())) * nc * nc * e / (12.0 * lam);
        assert!(rel(rep.constants["M"], m) < 1e-12);

        let rep = bound_constants_with_mu(&sys, t, n, BoundVariant::CovarianceSmooth, mu).unwrap();
        let mut stacked = DMatrix::zeros(6, 3);
        stacked.view_mut((0, 0), (3, 3)).copy_from(&p0);
        stacked.view_mut((3, 0), (3, 3)).copy_from(&(&a * &p0));
        let m = 2.0 * mu * mu * op_norm(&stacked) * nc * nc * e / (2.0 * lam);
        assert!(rel(rep.constants["M"], m) < 1e-12);
    }
}
