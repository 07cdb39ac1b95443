use nalgebra::{DMatrix, DVector};

use crate::error::{ensure_finite, Error, Result};
use crate::gaussian::GaussianVector;

use super::expm::{expm, integrated_expm};

/// `dz = A z dt + B du`, `dy = C z dt + dw`, `z(0) = x ~ N(m, P0)`, with
/// `u`, `w` Brownian motions of incremental covariances `Q`, `R`.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    p0: DMatrix<f64>,
    m: DVector<f64>,
}

impl LtiSystem {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        q: DMatrix<f64>,
        r: DMatrix<f64>,
        p0: DMatrix<f64>,
        m: DVector<f64>,
    ) -> Result<Self> {
        let p = a.nrows();
        if p == 0 || a.ncols() != p {
            return Err(Error::Dimension(format!("A must be square and non-empty, got {}x{}", a.nrows(), a.ncols())));
        }
        if b.nrows() != p {
            return Err(Error::Dimension(format!("B must have {p} rows, got {}", b.nrows())));
        }
        let qd = b.ncols();
        if q.nrows() != qd || q.ncols() != qd {
            return Err(Error::Dimension(format!("Q must be {qd}x{qd}, got {}x{}", q.nrows(), q.ncols())));
        }
        if c.ncols() != p || c.nrows() == 0 {
            return Err(Error::Dimension(format!("C must be r x {p} with r > 0, got {}x{}", c.nrows(), c.ncols())));
        }
        let r_dim = c.nrows();
        if r.nrows() != r_dim || r.ncols() != r_dim {
            return Err(Error::Dimension(format!("R must be {r_dim}x{r_dim}, got {}x{}", r.nrows(), r.ncols())));
        }
        if p0.nrows() != p || p0.ncols() != p {
            return Err(Error::Dimension(format!("P0 must be {p}x{p}, got {}x{}", p0.nrows(), p0.ncols())));
        }
        if m.len() != p {
            return Err(Error::Dimension(format!("m must have length {p}, got {}", m.len())));
        }
        for (name, mat) in [("A", &a), ("B", &b), ("C", &c), ("Q", &q), ("R", &r), ("P0", &p0)] {
            ensure_finite(name, mat.iter())?;
        }
        ensure_finite("m", m.iter())?;
        for (name, mat) in [("Q", &q), ("R", &r)] {
            if mat.nrows() > 0 {
                check_spd(name, mat)?;
            }
        }
        GaussianVector::new(m.clone(), p0.clone())
            .map_err(|e| Error::InvalidInput(format!("P0: {e}")))?;
        Ok(Self { a, b, c, q, r, p0, m })
    }

    /// System without input noise (`q = 0`).
    pub fn noiseless(
        a: DMatrix<f64>,
        c: DMatrix<f64>,
        r: DMatrix<f64>,
        p0: DMatrix<f64>,
        m: DVector<f64>,
    ) -> Result<Self> {
        let p = a.nrows();
        Self::new(a, DMatrix::zeros(p, 0), c, DMatrix::zeros(0, 0), r, p0, m)
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }
    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }
    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }
    pub fn p0(&self) -> &DMatrix<f64> {
        &self.p0
    }
    pub fn m(&self) -> &DVector<f64> {
        &self.m
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }
    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }
    pub fn output_dim(&self) -> usize {
        self.c.nrows()
    }

    /// `B Q Bᵀ`.
    pub fn input_covariance(&self) -> DMatrix<f64> {
        &self.b * &self.q * self.b.transpose()
    }

    /// True when `B Q Bᵀ` vanishes, i.e. `z(t) = e^{At} x`.
    pub fn is_noiseless(&self) -> bool {
        self.input_covariance().amax() == 0.0
    }

    /// Law of the initial state.
    pub fn initial_law(&self) -> GaussianVector {
        GaussianVector::from_parts(self.m.clone(), self.p0.clone())
    }

    /// Returns a copy with a different output noise covariance.
    pub fn with_output_noise(&self, r: DMatrix<f64>) -> Result<Self> {
        Self::new(self.a.clone(), self.b.clone(), self.c.clone(), self.q.clone(), r, self.p0.clone(), self.m.clone())
    }

    /// Returns a copy with a different input map and input covariance.
    pub fn with_input(&self, b: DMatrix<f64>, q: DMatrix<f64>) -> Result<Self> {
        Self::new(self.a.clone(), b, self.c.clone(), q, self.r.clone(), self.p0.clone(), self.m.clone())
    }

    /// Smallest eigenvalue of `R`.
    pub fn min_eig_r(&self) -> f64 {
        self.r.symmetric_eigenvalues().min()
    }
}

fn check_spd(name: &str, m: &DMatrix<f64>) -> Result<()> {
    let asym = (m - m.transpose()).amax();
    if asym > 1e-12 * m.amax().max(f64::MIN_POSITIVE) {
        return Err(Error::InvalidInput(format!("{name} is not symmetric")));
    }
    let min = m.symmetric_eigenvalues().min();
    if !(min > 0.0) {
        return Err(Error::InvalidInput(format!("{name} is not positive definite (min eigenvalue {min:e})")));
    }
    Ok(())
}

/// Effective observation of an interpolant-differenced output sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationRow {
    pub matrix: DMatrix<f64>,
    pub noise_cov: DMatrix<f64>,
    /// `(t_a, t, t_b)`.
    pub source_times: (f64, f64, f64),
}

/// Observation operator of `ỹ = y(t) − α y(t_a) − β y(t_b)` acting on the
/// initial state, where `α y(t_a) + β y(t_b)` is the linear interpolant of
/// `y` between `t_a` and `t_b` evaluated at `t`.
///
/// `ỹ = C̃ x + w̃` with
/// `C̃ = C [α ∫_{t_a}^{t} e^{As} ds − β ∫_{t}^{t_b} e^{As} ds]` and
/// `w̃ ~ N(0, (t − t_a)(t_b − t)/(t_b − t_a) · R)`.
pub fn c_tilde(sys: &LtiSystem, t_a: f64, t: f64, t_b: f64) -> Result<ObservationRow> {
    if ![t_a, t, t_b].iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("interpolation times".into()));
    }
    if !(0.0 <= t_a && t_a < t && t < t_b) {
        return Err(Error::Ordering(format!("need 0 <= t_a < t < t_b, got ({t_a}, {t}, {t_b})")));
    }
    let span = t_b - t_a;
    let alpha = (t_b - t) / span;
    let beta = (t - t_a) / span;
    let (_, left_psi) = integrated_expm(sys.a(), t - t_a)?;
    let (_, right_psi) = integrated_expm(sys.a(), t_b - t)?;
    let left = expm(sys.a(), t_a)? * left_psi;
    let right = expm(sys.a(), t)? * right_psi;
    let matrix = sys.c() * (left * alpha - right * beta);
    let noise_cov = sys.r() * ((t - t_a) * (t_b - t) / span);
    Ok(ObservationRow { matrix, noise_cov, source_times: (t_a, t, t_b) })
}
