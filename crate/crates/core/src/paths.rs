//! Seeded Brownian path ensembles on uniform time grids.
//!
//! Increments come from a counter-mode ChaCha stream: path `m` reads stream
//! `m` of the generator keyed by `seed`, and the increment for step `n`,
//! coordinate `c` sits at a fixed word position. Any path can therefore be
//! regenerated on its own, in any order, on any thread.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::exec;

#[derive(Debug, Clone, PartialEq)]
pub struct BrownianEnsemble {
    paths: usize,
    steps: usize,
    horizon: f64,
    dim: usize,
    seed: u64,
    /// `[m][n][c]` increments.
    increments: Vec<f64>,
    /// `[m][n][c]` partial sums, `n = 0..=steps`.
    positions: Vec<f64>,
}

/// Standard normal deviate for the counter `(seed, path, slot)`.
fn gaussian_stream(seed: u64, path: usize, count: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng.set_word_pos(0);
    let normal = Normal::standard();
    (0..count)
        .map(|_| {
            let bits = rng.next_u64() >> 11;
            let u = (bits as f64 + 0.5) * (1.0 / (1u64 << 53) as f64);
            normal.inverse_cdf(u)
        })
        .collect()
}

/// Generates `paths` Brownian paths with `steps` increments on `[0, horizon]`.
pub fn sample_brownian(paths: usize, steps: usize, horizon: f64, seed: u64, dim: usize) -> Result<BrownianEnsemble> {
    if dim != 1 && dim != 2 {
        return Err(Error::UnsupportedDimension(dim));
    }
    if paths == 0 {
        return Err(Error::Range {
            name: "paths",
            value: 0.0,
            reason: "need at least one path",
        });
    }
    if steps == 0 {
        return Err(Error::Range {
            name: "steps",
            value: 0.0,
            reason: "need at least one step",
        });
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::Range {
            name: "horizon",
            value: horizon,
            reason: "must be positive",
        });
    }
    let sd = (horizon / steps as f64).sqrt();
    let per_path = steps * dim;
    let rows = exec::map_indexed(paths, |m| {
        let mut inc = gaussian_stream(seed, m, per_path);
        inc.iter_mut().for_each(|z| *z *= sd);
        inc
    });
    let increments: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(BrownianEnsemble::from_increments(paths, steps, horizon, dim, seed, increments))
}

impl BrownianEnsemble {
    fn from_increments(paths: usize, steps: usize, horizon: f64, dim: usize, seed: u64, increments: Vec<f64>) -> Self {
        let mut positions = vec![0.0; paths * (steps + 1) * dim];
        for m in 0..paths {
            let inc = &increments[m * steps * dim..(m + 1) * steps * dim];
            let pos = &mut positions[m * (steps + 1) * dim..(m + 1) * (steps + 1) * dim];
            for n in 0..steps {
                for c in 0..dim {
                    pos[(n + 1) * dim + c] = pos[n * dim + c] + inc[n * dim + c];
                }
            }
        }
        Self {
            paths,
            steps,
            horizon,
            dim,
            seed,
            increments,
            positions,
        }
    }

    pub fn paths(&self) -> usize {
        self.paths
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt()
    }

    /// Step index of time `t`, if `t` lies on the grid (to 1e-9 steps).
    pub fn step_of(&self, t: f64) -> Result<usize> {
        let s = t / self.dt();
        let n = s.round();
        if (s - n).abs() > 1e-9 * n.max(1.0) || n < 0.0 || n as usize > self.steps {
            return Err(Error::Alignment(format!(
                "t = {t} is not a multiple of dt = {} within [0, {}]",
                self.dt(),
                self.horizon
            )));
        }
        Ok(n as usize)
    }

    #[inline]
    pub fn increment(&self, m: usize, n: usize, c: usize) -> f64 {
        self.increments[(m * self.steps + n) * self.dim + c]
    }

    #[inline]
    pub fn position(&self, m: usize, n: usize, c: usize) -> f64 {
        self.positions[(m * (self.steps + 1) + n) * self.dim + c]
    }

    /// All increments of path `m`, step-major.
    pub fn path_increments(&self, m: usize) -> &[f64] {
        let w = self.steps * self.dim;
        &self.increments[m * w..(m + 1) * w]
    }

    /// Coarse ensemble whose increments are exact sums of `factor`
    /// consecutive fine increments.
    pub fn coarsen(&self, factor: usize) -> Result<BrownianEnsemble> {
        if factor == 0 || !self.steps.is_multiple_of(factor) {
            return Err(Error::Alignment(format!(
                "cannot coarsen {} steps by a factor of {factor}",
                self.steps
            )));
        }
        let steps = self.steps / factor;
        let d = self.dim;
        let mut increments = vec![0.0; self.paths * steps * d];
        for m in 0..self.paths {
            for k in 0..steps {
                for c in 0..d {
                    increments[(m * steps + k) * d + c] = (0..factor)
                        .map(|i| self.increment(m, k * factor + i, c))
                        .sum();
                }
            }
        }
        Ok(Self::from_increments(self.paths, steps, self.horizon, d, self.seed, increments))
    }

    /// Ensemble restricted to the first `paths` paths.
    pub fn truncate_paths(&self, paths: usize) -> BrownianEnsemble {
        let paths = paths.clamp(1, self.paths);
        let w = self.steps * self.dim;
        Self::from_increments(
            paths,
            self.steps,
            self.horizon,
            self.dim,
            self.seed,
            self.increments[..paths * w].to_vec(),
        )
    }
}
