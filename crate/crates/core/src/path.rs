//! Exact simulation of `(x, z, ζ, w, y)` on dyadic grids and the analytic
//! joint law of `(z(T), y(t₁), …, y(t_m))`.
//!
//! Both work with the augmented state `s = (z, ζ)`, `ζ(t) = ∫₀ᵗ z ds`, which
//! obeys `ds = Ā s dt + B̄ du` with `Ā = [[A, 0], [I, 0]]`, `B̄ = [B; 0]`, so
//! that `y(t) = C ζ(t) + w(t)`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::gaussian::{condition_detailed, psd_sqrt, Conditioned, GaussianVector, LinearObservation};
use crate::lti::{transition_moments_raw, LtiSystem, TransitionMoments};

/// Uniform grid on `[0, T]` with `base_n · 2^depth` intervals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DyadicGrid {
    horizon: f64,
    base_n: usize,
    depth: u32,
}

impl DyadicGrid {
    pub fn new(horizon: f64, base_n: usize, depth: u32) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidInput(format!("horizon must be positive, got {horizon}")));
        }
        if base_n == 0 {
            return Err(Error::InvalidInput("base_n must be at least 1".into()));
        }
        if depth > 24 || base_n.checked_shl(depth).is_none_or(|v| v >> depth != base_n || v > 1 << 26) {
            return Err(Error::InvalidInput(format!("grid base_n={base_n}, depth={depth} is too large")));
        }
        Ok(Self { horizon, base_n, depth })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }
    pub fn base_n(&self) -> usize {
        self.base_n
    }
    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// Number of intervals, `base_n · 2^depth`.
    pub fn intervals(&self) -> usize {
        self.base_n << self.depth
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.intervals() as f64
    }

    /// Time of node `i`.
    pub fn time(&self, i: usize) -> f64 {
        self.horizon * i as f64 / self.intervals() as f64
    }

    /// Node index of `t`, if `t` lies on the grid.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let n = self.intervals() as f64;
        let x = t / self.horizon * n;
        let i = x.round();
        if !(0.0..=n).contains(&i) || (x - i).abs() > 1e-9 * n.max(1.0) {
            return Err(Error::OffGrid(t));
        }
        Ok(i as usize)
    }

    /// Node indices `stride, 2·stride, …, intervals` of the uniform `n`-grid.
    pub fn nodes_for(&self, n: usize) -> Result<Vec<usize>> {
        let total = self.intervals();
        if n == 0 || total % n != 0 {
            return Err(Error::InvalidInput(format!(
                "a {n}-point grid is not a subset of the {total}-interval path grid"
            )));
        }
        let stride = total / n;
        Ok((1..=n).map(|i| i * stride).collect())
    }

    /// Nodes added at refinement `level` (1-based) on top of an `n`-grid, left to right.
    pub fn midpoints(&self, n: usize, level: u32) -> Result<Vec<usize>> {
        let fine = n
            .checked_shl(level)
            .filter(|v| v >> level == n)
            .ok_or_else(|| Error::InvalidInput("refinement level overflows".into()))?;
        let total = self.intervals();
        if n == 0 || level == 0 || total % fine != 0 {
            return Err(Error::InvalidInput(format!(
                "refinement level {level} of a {n}-grid exceeds the {total}-interval path grid"
            )));
        }
        let stride = total / fine;
        Ok((0..fine / 2).map(|m| (2 * m + 1) * stride).collect())
    }
}

/// One realization of the system on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    pub grid: DyadicGrid,
    pub seed: u64,
    /// Initial state draw.
    pub x: DVector<f64>,
    pub z: Vec<DVector<f64>>,
    /// Running integral `∫₀ᵗ z ds`.
    pub zeta: Vec<DVector<f64>>,
    /// Output noise Brownian motion.
    pub w: Vec<DVector<f64>>,
    pub y: Vec<DVector<f64>>,
}

impl SamplePath {
    pub fn y_at(&self, t: f64) -> Result<&DVector<f64>> {
        Ok(&self.y[self.grid.index_of(t)?])
    }

    pub fn final_state(&self) -> &DVector<f64> {
        self.z.last().expect("paths have at least two nodes")
    }
}

/// Random-stream channels of [`simulate`].
#[derive(Debug, Clone, Copy)]
#[repr(u64)]
enum Channel {
    Initial = 0,
    Input = 1,
    Output = 2,
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator keyed by `(seed, node, channel)`, independent of draw order.
fn stream(seed: u64, node: usize, channel: Channel) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut state = splitmix(seed);
    for (k, word) in [state, node as u64, channel as u64, 0x5EED].into_iter().enumerate() {
        state = splitmix(state ^ word.wrapping_mul(0xA24B_AED4_963E_E407) ^ k as u64);
        key[8 * k..8 * k + 8].copy_from_slice(&state.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

fn standard_normal(rng: &mut ChaCha8Rng, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| StandardNormal.sample(rng))
}

/// `(Ā, B̄ Q B̄ᵀ)` of the augmented state `(z, ζ)`.
pub(crate) fn augmented(sys: &LtiSystem) -> (DMatrix<f64>, DMatrix<f64>) {
    let p = sys.state_dim();
    let mut a = DMatrix::zeros(2 * p, 2 * p);
    a.view_mut((0, 0), (p, p)).copy_from(sys.a());
    a.view_mut((p, 0), (p, p)).copy_from(&DMatrix::identity(p, p));
    let mut g = DMatrix::zeros(2 * p, 2 * p);
    g.view_mut((0, 0), (p, p)).copy_from(&sys.input_covariance());
    (a, g)
}

/// Exact transition of the augmented state over `delta`.
pub(crate) fn augmented_moments(sys: &LtiSystem, delta: f64) -> Result<TransitionMoments> {
    let (a, g) = augmented(sys);
    transition_moments_raw(&a, &g, delta)
}

/// Samples one path, fully determined by `(sys, grid, seed)`.
pub fn simulate(sys: &LtiSystem, grid: &DyadicGrid, seed: u64) -> Result<SamplePath> {
    let p = sys.state_dim();
    let r = sys.output_dim();
    let nodes = grid.intervals();
    let delta = grid.step();
    let moments = augmented_moments(sys, delta)?;
    let input_root = psd_sqrt(&moments.qd)?;
    let has_input = input_root.amax() > 0.0;
    let output_root = psd_sqrt(&(sys.r() * delta))?;
    let p0_root = psd_sqrt(sys.p0())?;

    let x = sys.m() + &p0_root * standard_normal(&mut stream(seed, 0, Channel::Initial), p);

    let mut z = Vec::with_capacity(nodes + 1);
    let mut zeta = Vec::with_capacity(nodes + 1);
    let mut w = Vec::with_capacity(nodes + 1);
    let mut y = Vec::with_capacity(nodes + 1);
    let mut s = DVector::zeros(2 * p);
    s.rows_mut(0, p).copy_from(&x);
    let mut w_now = DVector::zeros(r);
    z.push(x.clone());
    zeta.push(DVector::zeros(p));
    w.push(w_now.clone());
    y.push(DVector::zeros(r));
    for i in 1..=nodes {
        s = &moments.phi * &s;
        if has_input {
            s += &input_root * standard_normal(&mut stream(seed, i, Channel::Input), 2 * p);
        }
        w_now += &output_root * standard_normal(&mut stream(seed, i, Channel::Output), r);
        let zeta_i = s.rows(p, p).clone_owned();
        y.push(sys.c() * &zeta_i + &w_now);
        z.push(s.rows(0, p).clone_owned());
        zeta.push(zeta_i);
        w.push(w_now.clone());
    }
    Ok(SamplePath { grid: *grid, seed, x, z, zeta, w, y })
}

/// Block of a [`JointGaussian`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlockLabel {
    /// `z(T)`.
    FinalState,
    /// `y(t)`.
    Output { time: f64 },
}

/// Joint Gaussian law of `z(T)` followed by sampled outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct JointGaussian {
    labels: Vec<BlockLabel>,
    offsets: Vec<usize>,
    sizes: Vec<usize>,
    law: GaussianVector,
}

impl JointGaussian {
    pub(crate) fn from_parts(labels: Vec<BlockLabel>, sizes: Vec<usize>, law: GaussianVector) -> Self {
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut acc = 0;
        for &s in &sizes {
            offsets.push(acc);
            acc += s;
        }
        debug_assert_eq!(acc, law.dim());
        Self { labels, offsets, sizes, law }
    }

    pub fn labels(&self) -> &[BlockLabel] {
        &self.labels
    }

    pub fn law(&self) -> &GaussianVector {
        &self.law
    }

    pub fn block_count(&self) -> usize {
        self.labels.len()
    }

    /// `(offset, length)` of block `k` in the stacked vector.
    pub fn block_range(&self, k: usize) -> (usize, usize) {
        (self.offsets[k], self.sizes[k])
    }

    /// Position of the output block at time `t`.
    pub fn output_block(&self, t: f64) -> Option<usize> {
        self.labels
            .iter()
            .position(|l| matches!(l, BlockLabel::Output { time } if (time - t).abs() <= 1e-12 * t.abs().max(1.0)))
    }

    /// Marginal law of block `k`.
    pub fn marginal(&self, k: usize) -> GaussianVector {
        let (o, l) = self.block_range(k);
        GaussianVector::from_parts(
            self.law.mean().rows(o, l).clone_owned(),
            self.law.cov().view((o, o), (l, l)).clone_owned(),
        )
    }

    /// Law of `z(T)`.
    pub fn final_state(&self) -> GaussianVector {
        let k = self
            .labels
            .iter()
            .position(|l| *l == BlockLabel::FinalState)
            .expect("joint laws always carry z(T)");
        self.marginal(k)
    }

    /// Conditions on `value = block_k + bias` and drops block `k`.
    ///
    /// Also returns the cross covariance of `z(T)` with the observation and the
    /// innovation covariance of the step.
    pub fn condition_on_block(
        &self,
        k: usize,
        value: &DVector<f64>,
        bias: &DVector<f64>,
    ) -> Result<(JointGaussian, DMatrix<f64>, DMatrix<f64>)> {
        let (o, l) = self.block_range(k);
        let mut obs = LinearObservation::selector(self.law.dim(), o, l);
        if bias.len() != l {
            return Err(Error::Dimension(format!("bias has length {}, block has {l}", bias.len())));
        }
        obs.bias = bias.clone();
        let Conditioned { posterior, cross_cov, innovation_cov } = condition_detailed(&self.law, &obs, value)?;
        let (fo, fl) = self.block_range(0);
        let target_cross = cross_cov.rows(fo, fl).clone_owned();
        Ok((self.without_block(k, posterior), target_cross, innovation_cov))
    }

    /// Conditions on several output blocks at once and drops them.
    pub fn condition_blocks(&self, blocks: &[usize], values: &[DVector<f64>]) -> Result<JointGaussian> {
        if blocks.len() != values.len() {
            return Err(Error::Dimension("one observed value per block is required".into()));
        }
        if blocks.is_empty() {
            return Ok(self.clone());
        }
        let rows: usize = blocks.iter().map(|&k| self.sizes[k]).sum();
        let dim = self.law.dim();
        let mut map = DMatrix::zeros(rows, dim);
        let mut stacked = DVector::zeros(rows);
        let mut row = 0;
        for (&k, v) in blocks.iter().zip(values) {
            let (o, l) = self.block_range(k);
            if v.len() != l {
                return Err(Error::Dimension(format!("observed value has length {}, block has {l}", v.len())));
            }
            for i in 0..l {
                map[(row + i, o + i)] = 1.0;
            }
            stacked.rows_mut(row, l).copy_from(v);
            row += l;
        }
        let obs = LinearObservation::unbiased(map, DMatrix::zeros(rows, rows))?;
        let post = condition_detailed(&self.law, &obs, &stacked)?.posterior;
        Ok(self.without_blocks(blocks, post))
    }

    /// Law of `z(T)` given the observed values of the listed output blocks.
    pub fn condition_final_state(&self, blocks: &[usize], values: &[DVector<f64>]) -> Result<GaussianVector> {
        Ok(self.condition_blocks(blocks, values)?.final_state())
    }

    fn without_block(&self, k: usize, law: GaussianVector) -> JointGaussian {
        self.without_blocks(&[k], law)
    }

    fn without_blocks(&self, blocks: &[usize], law: GaussianVector) -> JointGaussian {
        let dropped = |i: usize| {
            blocks.iter().any(|&k| {
                let (o, l) = self.block_range(k);
                i >= o && i < o + l
            })
        };
        let (mean, cov) = law.into_parts();
        let keep: Vec<usize> = (0..mean.len()).filter(|&i| !dropped(i)).collect();
        let mean = DVector::from_fn(keep.len(), |i, _| mean[keep[i]]);
        let cov = DMatrix::from_fn(keep.len(), keep.len(), |i, j| cov[(keep[i], keep[j])]);
        let (labels, sizes) = (0..self.labels.len())
            .filter(|k| !blocks.contains(k))
            .map(|k| (self.labels[k], self.sizes[k]))
            .unzip();
        JointGaussian::from_parts(labels, sizes, GaussianVector::from_parts(mean, cov))
    }
}

/// Exact joint law of `(z(T), y(t₁), …, y(t_m))` for `0 < t₁ < … < t_m ≤ T`.
pub fn joint_covariance(sys: &LtiSystem, grid_times: &[f64], horizon: f64) -> Result<JointGaussian> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidInput(format!("horizon must be positive, got {horizon}")));
    }
    for (i, &t) in grid_times.iter().enumerate() {
        if !(t > 0.0 && t <= horizon) {
            return Err(Error::Ordering(format!("time {t} outside (0, {horizon}]")));
        }
        if i > 0 && !(t > grid_times[i - 1]) {
            return Err(Error::Ordering("observation times must be strictly increasing".into()));
        }
    }
    let p = sys.state_dim();
    let r = sys.output_dim();
    let m = grid_times.len();
    let (a_aug, g_aug) = augmented(sys);

    // Union of the observation times with T; T may coincide with the last one.
    let mut times = grid_times.to_vec();
    let target_is_last_obs = times.last().is_some_and(|&t| t == horizon);
    if !target_is_last_obs {
        times.push(horizon);
    }
    let k_target = times.len() - 1;

    // Step transitions, second moments and means at each union time.
    let mut steps: Vec<DMatrix<f64>> = Vec::with_capacity(times.len());
    let mut sigma: Vec<DMatrix<f64>> = Vec::with_capacity(times.len());
    let mut mean: Vec<DVector<f64>> = Vec::with_capacity(times.len());
    let mut sig = DMatrix::zeros(2 * p, 2 * p);
    sig.view_mut((0, 0), (p, p)).copy_from(sys.p0());
    let mut mu = DVector::zeros(2 * p);
    mu.rows_mut(0, p).copy_from(sys.m());
    let mut prev = 0.0;
    for &t in &times {
        let mom = transition_moments_raw(&a_aug, &g_aug, t - prev)?;
        sig = &mom.phi * &sig * mom.phi.transpose() + &mom.qd;
        mu = &mom.phi * &mu;
        steps.push(mom.phi);
        sigma.push(sig.clone());
        mean.push(mu.clone());
        prev = t;
    }

    // cross[i][j] = Cov(s(t_j), s(t_i)) for i <= j.
    let dim = p + r * m;
    let mut cov = DMatrix::zeros(dim, dim);
    let mut joint_mean = DVector::zeros(dim);
    let c = sys.c();
    joint_mean.rows_mut(0, p).copy_from(&mean[k_target].rows(0, p));
    cov.view_mut((0, 0), (p, p)).copy_from(&sigma[k_target].view((0, 0), (p, p)));
    for i in 0..m {
        let oi = p + r * i;
        joint_mean.rows_mut(oi, r).copy_from(&(c * mean[i].rows(p, p)));
        let mut forward = DMatrix::identity(2 * p, 2 * p);
        for j in i..times.len() {
            if j > i {
                forward = &steps[j] * forward;
            }
            let cross = &forward * &sigma[i];
            if j < m {
                let oj = p + r * j;
                let mut block = c * cross.view((p, p), (p, p)) * c.transpose();
                block += sys.r() * times[i].min(times[j]);
                cov.view_mut((oj, oi), (r, r)).copy_from(&block);
                cov.view_mut((oi, oj), (r, r)).copy_from(&block.transpose());
            }
            if j == k_target {
                let block = cross.view((0, p), (p, p)) * c.transpose();
                cov.view_mut((0, oi), (p, r)).copy_from(&block);
                cov.view_mut((oi, 0), (r, p)).copy_from(&block.transpose());
            }
        }
    }

    let mut labels = vec![BlockLabel::FinalState];
    labels.extend(grid_times.iter().map(|&time| BlockLabel::Output { time }));
    let mut sizes = vec![p];
    sizes.extend(std::iter::repeat_n(r, m));
    Ok(JointGaussian::from_parts(labels, sizes, GaussianVector::from_parts(joint_mean, cov)))
}
