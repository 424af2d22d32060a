//! Seeded Gaussian noise, spectral trajectory synthesis `X = W𝒱` and
//! Monte Carlo ensemble statistics.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::basis::CosineBasis;
use crate::error::{FilterError, Result};
use crate::operators::SpectralOperator;
use crate::par::{self, ExecutionMode};

/// Standard normal variates from a ChaCha8 stream (counter based, so each
/// `(seed, stream_id)` pair is an independent, reproducible sequence),
/// transformed by Box–Muller.
#[derive(Debug, Clone)]
pub struct GaussianSource {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl GaussianSource {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self { seed, stream_id, rng, spare: None }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform(); // (0, 1]
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (2.0 * PI * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }

    pub fn fill(&mut self, out: &mut [f64]) {
        for x in out {
            *x = self.next_normal();
        }
    }

    /// The white-noise spectral characteristic `𝒱₀..𝒱_{L−1}`.
    pub fn sample_noise_spectrum(&mut self, order: usize) -> Result<Vec<f64>> {
        if order == 0 {
            return Err(FilterError::InvalidParameter("truncation order must be at least 1".into()));
        }
        let mut v = vec![0.0; order];
        self.fill(&mut v);
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Spectral,
    EulerMaruyama,
    ItoSum,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Spectral => "spectral",
            Method::EulerMaruyama => "euler_maruyama",
            Method::ItoSum => "ito_sum",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleTrajectory {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub method: Method,
    pub seed: u64,
    pub stream_id: u64,
    /// Output spectral characteristic `X`, spectral method only.
    pub coefficients: Option<Vec<f64>>,
}

impl SampleTrajectory {
    pub(crate) fn new(grid: Vec<f64>, values: Vec<f64>, method: Method, source: &GaussianSource) -> Self {
        debug_assert_eq!(grid.len(), values.len());
        Self {
            grid,
            values,
            method,
            seed: source.seed(),
            stream_id: source.stream_id(),
            coefficients: None,
        }
    }
}

/// `t_k = kT/(n − 1)`. Computed as one correctly rounded division so grids
/// of different sizes agree exactly on shared rational times.
pub fn uniform_grid(horizon: f64, points: usize) -> Vec<f64> {
    let denom = (points - 1) as f64;
    (0..points).map(|k| k as f64 * horizon / denom).collect()
}

/// Spectral-form sampler with the basis table for a fixed grid cached.
#[derive(Debug, Clone)]
pub struct SpectralSampler {
    operator: DMatrix<f64>,
    grid: Vec<f64>,
    /// grid × L
    basis_table: DMatrix<f64>,
}

impl SpectralSampler {
    pub fn new(operator: &SpectralOperator, grid_size: usize) -> Result<Self> {
        if grid_size < 2 {
            return Err(FilterError::InvalidParameter("grid needs at least 2 points".into()));
        }
        let grid = uniform_grid(operator.horizon(), grid_size);
        Self::on_grid(operator, grid)
    }

    pub fn on_grid(operator: &SpectralOperator, grid: Vec<f64>) -> Result<Self> {
        let basis = CosineBasis::new(operator.horizon())?;
        let order = operator.order();
        let mut table = DMatrix::zeros(grid.len(), order);
        let mut q = vec![0.0; order];
        for (r, &t) in grid.iter().enumerate() {
            if !(0.0..=operator.horizon()).contains(&t) {
                return Err(FilterError::TimeOutOfRange { t, horizon: operator.horizon() });
            }
            basis.fill_values(t, &mut q);
            for (c, v) in q.iter().enumerate() {
                table[(r, c)] = *v;
            }
        }
        Ok(Self { operator: operator.matrix().clone(), grid, basis_table: table })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn sample(&self, source: &mut GaussianSource) -> SampleTrajectory {
        let v = DVector::from_vec(
            source
                .sample_noise_spectrum(self.operator.ncols())
                .expect("operator order is positive"),
        );
        let x_coeffs = &self.operator * v;
        let values = &self.basis_table * &x_coeffs;
        let mut tr = SampleTrajectory::new(self.grid.clone(), values.as_slice().to_vec(), Method::Spectral, source);
        tr.coefficients = Some(x_coeffs.as_slice().to_vec());
        tr
    }

    /// Exact variance of the truncated process at each grid point, `‖Wᵀq(t)‖²`.
    pub fn variance(&self) -> Vec<f64> {
        let rows = &self.basis_table * &self.operator;
        rows.row_iter().map(|r| r.iter().map(|x| x * x).sum()).collect()
    }
}

/// One spectral-form realization on a uniform grid of `grid_size` points.
pub fn spectral_simulate(operator: &SpectralOperator, source: &mut GaussianSource, grid_size: usize) -> Result<SampleTrajectory> {
    Ok(SpectralSampler::new(operator, grid_size)?.sample(source))
}

/// `‖Wᵀq(t)‖²`, the variance of `x̂(t)` under a truncated operator.
pub fn spectral_variance(operator: &SpectralOperator, t: f64) -> Result<f64> {
    let basis = CosineBasis::new(operator.horizon())?;
    basis.eval(0, t)?;
    let q = DVector::from_vec(basis.values(t, operator.order()));
    let v = operator.matrix().transpose() * q;
    Ok(v.norm_squared())
}

/// Per-time ensemble moments.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleStats {
    pub grid: Vec<f64>,
    pub count: usize,
    pub mean: Vec<f64>,
    /// Unbiased sample variance.
    pub variance: Vec<f64>,
    /// Standard error of the mean, `√(var/N)`.
    pub mean_stderr: Vec<f64>,
    /// Standard error of the sample variance under normality, `var·√(2/(N−1))`.
    pub variance_stderr: Vec<f64>,
}

/// Streaming Welford accumulator over a fixed grid.
#[derive(Debug, Clone)]
pub struct StatsAccumulator {
    grid: Vec<f64>,
    count: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl StatsAccumulator {
    pub fn new(grid: Vec<f64>) -> Self {
        let n = grid.len();
        Self { grid, count: 0, mean: vec![0.0; n], m2: vec![0.0; n] }
    }

    pub fn push(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.grid.len() {
            return Err(FilterError::GridMismatch(format!(
                "trajectory has {} points, ensemble grid has {}",
                values.len(),
                self.grid.len()
            )));
        }
        self.count += 1;
        let n = self.count as f64;
        for ((m, s), &x) in self.mean.iter_mut().zip(&mut self.m2).zip(values) {
            let d = x - *m;
            *m += d / n;
            *s += d * (x - *m);
        }
        Ok(())
    }

    /// Chan et al. pairwise combination.
    pub fn merge(&mut self, other: &StatsAccumulator) -> Result<()> {
        if other.grid != self.grid {
            return Err(FilterError::GridMismatch("accumulators cover different grids".into()));
        }
        if other.count == 0 {
            return Ok(());
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        for k in 0..self.mean.len() {
            let d = other.mean[k] - self.mean[k];
            self.mean[k] += d * nb / n;
            self.m2[k] += other.m2[k] + d * d * na * nb / n;
        }
        self.count += other.count;
        Ok(())
    }

    pub fn finish(&self) -> Result<EnsembleStats> {
        if self.count < 2 {
            return Err(FilterError::InvalidParameter("ensemble statistics need at least 2 trajectories".into()));
        }
        let n = self.count as f64;
        let variance: Vec<f64> = self.m2.iter().map(|s| s / (n - 1.0)).collect();
        Ok(EnsembleStats {
            grid: self.grid.clone(),
            count: self.count,
            mean: self.mean.clone(),
            mean_stderr: variance.iter().map(|v| (v / n).sqrt()).collect(),
            variance_stderr: variance.iter().map(|v| v * (2.0 / (n - 1.0)).sqrt()).collect(),
            variance,
        })
    }
}

pub fn ensemble_stats(trajectories: &[SampleTrajectory]) -> Result<EnsembleStats> {
    let first = trajectories
        .first()
        .ok_or_else(|| FilterError::InvalidParameter("no trajectories".into()))?;
    let mut acc = StatsAccumulator::new(first.grid.clone());
    for tr in trajectories {
        if tr.grid != first.grid {
            return Err(FilterError::GridMismatch("trajectories are on different grids".into()));
        }
        acc.push(&tr.values)?;
    }
    acc.finish()
}

/// Trajectories per work item in [`run_ensemble`]; fixed so the reduction
/// order never depends on the thread pool.
pub const ENSEMBLE_BATCH: usize = 250;

/// Runs `count` independent realizations, realization `k` drawing from
/// `GaussianSource::new(seed, k)`, and reduces them to per-time statistics.
/// Batches may run in parallel; they are merged in batch order, so the
/// result is bitwise reproducible.
pub fn run_ensemble<F>(mode: ExecutionMode, seed: u64, count: usize, sampler: F) -> Result<EnsembleStats>
where
    F: Fn(&mut GaussianSource) -> Result<SampleTrajectory> + Sync + Send,
{
    if count < 2 {
        return Err(FilterError::InvalidParameter("ensemble needs at least 2 trajectories".into()));
    }
    let batches = count.div_ceil(ENSEMBLE_BATCH);
    let partials = par::map_range(mode, batches, |b| -> Result<StatsAccumulator> {
        let lo = b * ENSEMBLE_BATCH;
        let hi = (lo + ENSEMBLE_BATCH).min(count);
        let mut acc: Option<StatsAccumulator> = None;
        for k in lo..hi {
            let mut source = GaussianSource::new(seed, k as u64);
            let tr = sampler(&mut source)?;
            acc.get_or_insert_with(|| StatsAccumulator::new(tr.grid.clone()))
                .push(&tr.values)?;
        }
        Ok(acc.expect("batch is non-empty"))
    });
    let mut iter = partials.into_iter();
    let mut total = iter.next().expect("at least one batch")?;
    for part in iter {
        total.merge(&part?)?;
    }
    total.finish()
}

/// Generates `count` realizations with stream ids `0..count`.
pub fn generate_ensemble<F>(mode: ExecutionMode, seed: u64, count: usize, sampler: F) -> Result<Vec<SampleTrajectory>>
where
    F: Fn(&mut GaussianSource) -> Result<SampleTrajectory> + Sync + Send,
{
    par::map_range(mode, count, |k| sampler(&mut GaussianSource::new(seed, k as u64)))
        .into_iter()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::Provenance;

    #[test]
    fn normal_moments() {
        let mut src = GaussianSource::new(2024, 0);
        let n = 1_000_000;
        let v = src.sample_noise_spectrum(n).unwrap();
        let mean = v.iter().sum::<f64>() / n as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        assert!(mean.abs() < 4e-3, "mean {mean}");
        assert!((var - 1.0).abs() < 6e-3, "var {var}");
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a = GaussianSource::new(7, 3).sample_noise_spectrum(16).unwrap();
        let b = GaussianSource::new(7, 3).sample_noise_spectrum(16).unwrap();
        let c = GaussianSource::new(7, 4).sample_noise_spectrum(16).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(GaussianSource::new(7, 3).sample_noise_spectrum(0).is_err());
    }

    #[test]
    fn zero_operator_gives_zero_path() {
        let w = SpectralOperator::new(DMatrix::zeros(8, 8), 5.0, Provenance::ClosedForm);
        let tr = spectral_simulate(&w, &mut GaussianSource::new(1, 0), 50).unwrap();
        assert!(tr.values.iter().all(|&x| x == 0.0));
        assert!(spectral_simulate(&w, &mut GaussianSource::new(1, 0), 1).is_err());
    }

    #[test]
    fn grid_refinement_resamples_same_realization() {
        let m = DMatrix::from_fn(16, 16, |i, j| 1.0 / (1.0 + i as f64 + 2.0 * j as f64));
        let w = SpectralOperator::new(m, 5.0, Provenance::ClosedForm);
        let coarse = spectral_simulate(&w, &mut GaussianSource::new(11, 0), 100).unwrap();
        let fine = spectral_simulate(&w, &mut GaussianSource::new(11, 0), 1000).unwrap();
        let mut shared = 0;
        for (t, x) in coarse.grid.iter().zip(&coarse.values) {
            if let Some(k) = fine.grid.iter().position(|s| s == t) {
                assert!((fine.values[k] - x).abs() <= 1e-15);
                shared += 1;
            }
        }
        // 99 and 999 share the ninths of T
        assert_eq!(shared, 10);
    }

    #[test]
    fn stats_of_constant_paths() {
        let grid = vec![0.0, 1.0, 2.0];
        let mk = |v: f64| SampleTrajectory {
            grid: grid.clone(),
            values: vec![v; 3],
            method: Method::Spectral,
            seed: 0,
            stream_id: 0,
            coefficients: None,
        };
        let s = ensemble_stats(&[mk(2.0), mk(2.0), mk(2.0)]).unwrap();
        assert_eq!(s.variance, vec![0.0; 3]);
        assert_eq!(s.mean, vec![2.0; 3]);
        let mut bad = mk(1.0);
        bad.grid = vec![0.0, 1.0, 3.0];
        assert!(matches!(ensemble_stats(&[mk(1.0), bad]), Err(FilterError::GridMismatch(_))));
        assert!(ensemble_stats(&[mk(1.0)]).is_err());
    }

    #[test]
    fn merged_accumulators_match_single_pass() {
        let grid = vec![0.0, 1.0];
        let data: Vec<[f64; 2]> = (0..37).map(|k| [k as f64 * 0.3, (k as f64).sin()]).collect();
        let mut one = StatsAccumulator::new(grid.clone());
        let mut a = StatsAccumulator::new(grid.clone());
        let mut b = StatsAccumulator::new(grid.clone());
        for (k, d) in data.iter().enumerate() {
            one.push(d).unwrap();
            if k < 20 { a.push(d).unwrap() } else { b.push(d).unwrap() }
        }
        a.merge(&b).unwrap();
        let (x, y) = (one.finish().unwrap(), a.finish().unwrap());
        for k in 0..2 {
            assert!((x.mean[k] - y.mean[k]).abs() < 1e-13);
            assert!((x.variance[k] - y.variance[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn ensemble_is_mode_independent() {
        let m = DMatrix::from_fn(8, 8, |i, j| if i >= j { 0.1 } else { 0.0 });
        let w = SpectralOperator::new(m, 5.0, Provenance::ClosedForm);
        let sampler = SpectralSampler::new(&w, 11).unwrap();
        let run = |mode| run_ensemble(mode, 5, 600, |src| Ok(sampler.sample(src))).unwrap();
        assert_eq!(run(ExecutionMode::Sequential), run(ExecutionMode::Parallel));
    }
}
