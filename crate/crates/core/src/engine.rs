//! Deterministic Monte Carlo substrate.
//!
//! Every path is a pure function of `(derive_seed(master, index), grid)`, so
//! paths can be produced in any order by any number of workers. Per-path
//! values are stored by index and reduced with a fixed pairwise tree, which
//! makes every estimate independent of the degree of parallelism.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // unused when std is linked in
use num_traits::Float;
use rand_core::SeedableRng;

use crate::error::{Error, Result};
use crate::models::{PathBundle, SigmaModel};

/// Generator used for every simulated path.
pub type PathRng = rand_xoshiro::Xoshiro256PlusPlus;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.96;

/// Uniform grid `t_k = k * t_end / n_steps`, `k = 0..=n_steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_end: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_end: f64, n_steps: usize) -> Result<Self> {
        if !(t_end.is_finite() && t_end > 0.0) {
            return Err(Error::InvalidParameter(format!("t_end must be finite and > 0, got {t_end}")));
        }
        if n_steps == 0 {
            return Err(Error::InvalidParameter("n_steps must be positive".into()));
        }
        Ok(Self { t_end, n_steps })
    }

    /// Grid of step `dt` reaching `t_end`; `t_end / dt` must be (close to) an integer.
    pub fn with_step(t_end: f64, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be finite and > 0, got {dt}")));
        }
        let steps = (t_end / dt).round();
        if steps < 1.0 || ((steps * dt - t_end) / t_end).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("t_end = {t_end} is not a multiple of dt = {dt}")));
        }
        Self::new(t_end, steps as usize)
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_points(&self) -> usize {
        self.n_steps + 1
    }

    pub fn dt(&self) -> f64 {
        self.t_end / self.n_steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.t_end
        } else {
            k as f64 * self.dt()
        }
    }

    /// Index of the grid point at time `t`. Fails when `t` is off the grid by
    /// more than a millionth of a step or outside `[0, t_end]`.
    pub fn index_at(&self, t: f64) -> Result<usize> {
        let dt = self.dt();
        let k = (t / dt).round();
        if !(0.0..=self.n_steps as f64).contains(&k) || (k * dt - t).abs() > 1e-6 * dt {
            return Err(Error::InvalidParameter(format!(
                "time {t} is not a grid point of [0, {}] with dt = {dt}",
                self.t_end
            )));
        }
        Ok(k as usize)
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl McEstimate {
    /// An exactly known value (zero standard error).
    pub fn exact(value: f64) -> Self {
        Self { mean: value, stderr: 0.0, n: 0 }
    }

    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { mean: f64::NAN, stderr: f64::NAN, n };
        }
        let mean = pairwise_sum(values) / n as f64;
        if n < 2 {
            return Self { mean, stderr: f64::NAN, n };
        }
        let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
        let var = pairwise_sum(&sq) / (n - 1) as f64;
        Self { mean, stderr: (var / n as f64).sqrt(), n }
    }

    pub fn ci95(&self) -> (f64, f64) {
        (self.mean - Z95 * self.stderr, self.mean + Z95 * self.stderr)
    }

    pub fn combined_stderr(&self, other: &McEstimate) -> f64 {
        (self.stderr * self.stderr + other.stderr * other.stderr).sqrt()
    }

    /// `|a - b| / sqrt(se_a^2 + se_b^2)`; zero when the means agree exactly.
    pub fn z_score(&self, other: &McEstimate) -> f64 {
        z_score(self.mean - other.mean, self.combined_stderr(other))
    }

    pub fn z_against(&self, target: f64) -> f64 {
        z_score(self.mean - target, self.stderr)
    }

    /// Whether the two 95% intervals intersect.
    pub fn overlaps(&self, other: &McEstimate) -> bool {
        let (lo_a, hi_a) = self.ci95();
        let (lo_b, hi_b) = other.ci95();
        lo_a <= hi_b && lo_b <= hi_a
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { mean: c * self.mean, stderr: c.abs() * self.stderr, n: self.n }
    }
}

fn z_score(diff: f64, se: f64) -> f64 {
    if diff == 0.0 {
        0.0
    } else if se == 0.0 {
        f64::INFINITY
    } else {
        diff.abs() / se
    }
}

/// Pairwise (binary tree) sum. The tree splits at `len / 2` and therefore
/// depends only on the slice length.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 8;
    if values.len() <= LEAF {
        let mut s = 0.0;
        for v in values {
            s += v;
        }
        return s;
    }
    let (lo, hi) = values.split_at(values.len() / 2);
    pairwise_sum(lo) + pairwise_sum(hi)
}

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-path seed. For a fixed master seed the map `path_index -> seed` is a
/// bijection (a composition of bijections on `u64`).
pub fn derive_seed(master: u64, path_index: u64) -> u64 {
    mix64(master ^ mix64(path_index.wrapping_add(0x9e37_79b9_7f4a_7c15)))
}

pub fn path_rng(seed: u64) -> PathRng {
    PathRng::seed_from_u64(seed)
}

/// Work scheduler for per-path jobs.
///
/// `fill_rows` must call `job(i, row_i)` exactly once for every row of `out`
/// (rows are `width` wide). When jobs fail, the error of the lowest failing
/// index is returned so that diagnostics do not depend on scheduling.
pub trait Executor: Sync {
    fn workers(&self) -> usize;

    fn fill_rows(
        &self,
        out: &mut [f64],
        width: usize,
        job: &(dyn Fn(usize, &mut [f64]) -> Result<()> + Sync),
    ) -> Result<()>;
}

/// Runs every job on the calling thread, in index order.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn workers(&self) -> usize {
        1
    }

    fn fill_rows(
        &self,
        out: &mut [f64],
        width: usize,
        job: &(dyn Fn(usize, &mut [f64]) -> Result<()> + Sync),
    ) -> Result<()> {
        for (i, row) in out.chunks_mut(width).enumerate() {
            job(i, row)?;
        }
        Ok(())
    }
}

static SEQUENTIAL: Sequential = Sequential;

/// Per-path evaluator writing `width` values for one path.
pub type MultiEvaluator<'a> = dyn Fn(&PathBundle, &mut [f64]) -> Result<()> + Sync + 'a;

/// A master seed bound to an executor.
#[derive(Clone, Copy)]
pub struct Engine<'e> {
    master_seed: u64,
    executor: &'e dyn Executor,
}

impl core::fmt::Debug for Engine<'_> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Engine")
            .field("master_seed", &self.master_seed)
            .field("workers", &self.executor.workers())
            .finish()
    }
}

impl Engine<'static> {
    pub fn sequential(master_seed: u64) -> Self {
        Self { master_seed, executor: &SEQUENTIAL }
    }
}

impl<'e> Engine<'e> {
    pub fn new(master_seed: u64, executor: &'e dyn Executor) -> Self {
        Self { master_seed, executor }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn executor(&self) -> &'e dyn Executor {
        self.executor
    }

    /// An engine on an independent seed stream, keyed by `tag`.
    pub fn substream(&self, tag: u64) -> Engine<'e> {
        Engine { master_seed: derive_seed(self.master_seed ^ 0x5eed_5eed_5eed_5eed, tag), executor: self.executor }
    }

    pub fn seed_for(&self, path_index: usize) -> u64 {
        derive_seed(self.master_seed, path_index as u64)
    }

    /// Simulates `n_paths` paths and evaluates `width` functionals on each.
    pub fn sample(
        &self,
        model: &SigmaModel,
        grid: &TimeGrid,
        n_paths: usize,
        width: usize,
        evaluator: &MultiEvaluator<'_>,
    ) -> Result<PathValues> {
        if n_paths < 2 {
            return Err(Error::InvalidParameter(format!("n_paths must be >= 2, got {n_paths}")));
        }
        if width == 0 {
            return Err(Error::InvalidParameter("evaluator width must be positive".into()));
        }
        let mut data = vec![0.0; n_paths * width];
        let job = |i: usize, row: &mut [f64]| -> Result<()> {
            let path = model.sample(self.seed_for(i), grid)?;
            evaluator(&path, row).map_err(|e| match e {
                Error::ContractViolation { reason, .. } => Error::ContractViolation { path_index: i, reason },
                Error::NonFinite { .. } => Error::NonFinite { path_index: i },
                other => other,
            })?;
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { path_index: i });
            }
            Ok(())
        };
        self.executor.fill_rows(&mut data, width, &job)?;
        Ok(PathValues { n_paths, width, data })
    }

    /// Monte Carlo estimate of a single path functional.
    pub fn run_mc(
        &self,
        model: &SigmaModel,
        grid: &TimeGrid,
        n_paths: usize,
        evaluator: &(dyn Fn(&PathBundle) -> f64 + Sync),
    ) -> Result<McEstimate> {
        let values = self.sample(model, grid, n_paths, 1, &|p, out| {
            out[0] = evaluator(p);
            Ok(())
        })?;
        Ok(values.estimate(0))
    }
}

/// Row-major table of per-path values (`n_paths` rows, `width` columns).
#[derive(Debug, Clone, PartialEq)]
pub struct PathValues {
    n_paths: usize,
    width: usize,
    data: Vec<f64>,
}

impl PathValues {
    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.data.chunks(self.width).map(|r| r[j]).collect()
    }

    pub fn estimate(&self, j: usize) -> McEstimate {
        McEstimate::from_values(&self.column(j))
    }

    /// Ratio estimator `sum(num) / sum(den)` with a delta-method standard error.
    pub fn ratio(&self, num: usize, den: usize) -> McEstimate {
        ratio_estimate(&self.column(num), &self.column(den))
    }
}

/// `sum(num) / sum(den)` with delta-method standard error
/// `sqrt(sum((num - r den)^2) / (n (n - 1))) / mean(den)`.
pub fn ratio_estimate(num: &[f64], den: &[f64]) -> McEstimate {
    let n = num.len();
    let r = pairwise_sum(num) / pairwise_sum(den);
    let mean_den = pairwise_sum(den) / n as f64;
    let resid: Vec<f64> = num
        .iter()
        .zip(den)
        .map(|(a, b)| {
            let d = a - r * b;
            d * d
        })
        .collect();
    let stderr = if n < 2 { f64::NAN } else { (pairwise_sum(&resid) / (n as f64 * (n - 1) as f64)).sqrt() / mean_den };
    McEstimate { mean: r, stderr, n }
}
