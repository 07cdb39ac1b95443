//! Random system instances for tests, benchmarks and studies.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::lti::LtiSystem;

/// Shape and scaling of a random instance.
#[derive(Debug, Clone)]
pub struct SystemOptions {
    pub state: usize,
    /// Input dimension; `0` gives a system without input noise.
    pub input: usize,
    pub output: usize,
    /// Shift `A` so that its spectral abscissa equals `-stability_margin`.
    pub stable: bool,
    pub stability_margin: f64,
    /// Scale of the entries of `B`.
    pub input_scale: f64,
    /// Scale of `R`.
    pub output_noise: f64,
}

impl Default for SystemOptions {
    fn default() -> Self {
        Self {
            state: 2,
            input: 0,
            output: 1,
            stable: true,
            stability_margin: 0.3,
            input_scale: 1.0,
            output_noise: 1.0,
        }
    }
}

fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

fn random_spd<R: Rng + ?Sized>(rng: &mut R, n: usize, floor: f64) -> DMatrix<f64> {
    let g = gaussian_matrix(rng, n, n);
    &g * g.transpose() / n as f64 + DMatrix::identity(n, n) * floor
}

/// Draws a random system with the requested shape.
pub fn random_system<R: Rng + ?Sized>(rng: &mut R, opts: &SystemOptions) -> LtiSystem {
    let p = opts.state;
    let mut a = gaussian_matrix(rng, p, p) / (p as f64).sqrt();
    if opts.stable {
        let abscissa = a
            .complex_eigenvalues()
            .iter()
            .map(|l| l.re)
            .fold(f64::NEG_INFINITY, f64::max);
        a -= DMatrix::identity(p, p) * (abscissa + opts.stability_margin);
    }
    let b = gaussian_matrix(rng, p, opts.input) * opts.input_scale;
    let q = if opts.input == 0 { DMatrix::zeros(0, 0) } else { random_spd(rng, opts.input, 0.5) };
    let c = gaussian_matrix(rng, opts.output, p);
    let r = random_spd(rng, opts.output, 0.3) * opts.output_noise;
    let p0 = random_spd(rng, p, 0.2);
    let m = DVector::from_fn(p, |_, _| StandardNormal.sample(rng));
    LtiSystem::new(a, b, c, q, r, p0, m).expect("random instances are valid by construction")
}
