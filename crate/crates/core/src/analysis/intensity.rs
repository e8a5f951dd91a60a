//! Empirical jump-intensity measures: counting jump events whose pre-jump
//! effective position lies in a box region, averaging over replications, and
//! differentiating the count curve to estimate the instantaneous intensity.

use crate::error::{Result, SimError};
use crate::hybrid::Trajectory;
use crate::stats::{central_differences, mean_and_se};
use crate::swarm::SwarmTrace;
use serde::{Deserialize, Serialize};

/// Axis-aligned box predicate on the continuous state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Region {
    /// Whole space in dimension `dim`.
    pub fn all(dim: usize) -> Self {
        Region {
            lo: vec![f64::NEG_INFINITY; dim],
            hi: vec![f64::INFINITY; dim],
        }
    }

    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(SimError::DimensionMismatch {
                what: "region bounds",
                expected: lo.len(),
                got: hi.len(),
            });
        }
        Ok(Region { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.lo.len()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    /// True when no point satisfies the predicate.
    pub fn is_empty(&self) -> bool {
        self.lo.iter().zip(&self.hi).any(|(lo, hi)| lo > hi)
    }
}

/// One jump event reduced to the data the intensity measure needs: the time
/// and the pre-jump state tested against the region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpSample {
    pub time: f64,
    pub state: Vec<f64>,
}

/// Pull jump samples out of a swarm trace; the region is tested against the
/// pre-jump effective position.
pub fn jump_samples_from_swarm(trace: &SwarmTrace) -> Vec<JumpSample> {
    trace
        .jumps
        .iter()
        .map(|j| JumpSample {
            time: j.time,
            state: j.pre_z_eff.clone(),
        })
        .collect()
}

/// Pull jump samples out of a single-process trajectory (pre-jump position).
pub fn jump_samples_from_trajectory(traj: &Trajectory) -> Vec<JumpSample> {
    traj.jumps
        .iter()
        .map(|j| JumpSample {
            time: j.time,
            state: j.pre.position.clone(),
        })
        .collect()
}

/// Mean cumulative count Ĵ(t) of region-hitting jumps and its numerical
/// derivative r̂(t), both with across-replication standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityEstimate {
    pub grid: Vec<f64>,
    pub j_hat: Vec<f64>,
    pub j_se: Vec<f64>,
    pub r_hat: Vec<f64>,
    pub r_se: Vec<f64>,
    pub n_reps: usize,
}

/// Estimate the mean jump intensity of region `region` from an ensemble of
/// jump-sample lists (one list per replication) on evaluation grid `grid`.
pub fn mean_jump_intensity(
    ensemble: &[Vec<JumpSample>],
    region: &Region,
    grid: &[f64],
) -> Result<IntensityEstimate> {
    if ensemble.is_empty() {
        return Err(SimError::InvalidSpec(
            "intensity estimate needs at least one replication".into(),
        ));
    }
    if grid.len() < 2 {
        return Err(SimError::InvalidSpec(
            "intensity grid needs at least two points".into(),
        ));
    }
    for w in grid.windows(2) {
        if !(w[1] > w[0]) {
            return Err(SimError::InvalidSpec(
                "intensity grid must be strictly increasing".into(),
            ));
        }
    }

    let n_grid = grid.len();
    let n_reps = ensemble.len();
    // per-replication cumulative counts and their derivatives
    let mut counts = vec![0.0f64; n_reps * n_grid];
    let mut rates = vec![0.0f64; n_reps * n_grid];
    for (rep, samples) in ensemble.iter().enumerate() {
        let row = &mut counts[rep * n_grid..(rep + 1) * n_grid];
        for s in samples {
            if !region.contains(&s.state) {
                continue;
            }
            // first grid index with grid[k] >= s.time
            let k0 = grid.partition_point(|g| *g < s.time);
            for c in row[k0..].iter_mut() {
                *c += 1.0;
            }
        }
        rates[rep * n_grid..(rep + 1) * n_grid].copy_from_slice(&central_differences(grid, row));
    }

    let mut j_hat = Vec::with_capacity(n_grid);
    let mut j_se = Vec::with_capacity(n_grid);
    let mut r_hat = Vec::with_capacity(n_grid);
    let mut r_se = Vec::with_capacity(n_grid);
    let mut column = vec![0.0f64; n_reps];
    for k in 0..n_grid {
        for rep in 0..n_reps {
            column[rep] = counts[rep * n_grid + k];
        }
        let (m, se) = mean_and_se(&column);
        j_hat.push(m);
        j_se.push(se);
        for rep in 0..n_reps {
            column[rep] = rates[rep * n_grid + k];
        }
        let (m, se) = mean_and_se(&column);
        r_hat.push(m);
        r_se.push(se);
    }

    Ok(IntensityEstimate {
        grid: grid.to_vec(),
        j_hat,
        j_se,
        r_hat,
        r_se,
        n_reps,
    })
}
