//! Wall-clock calibration of real nonce search.

use std::time::Instant;

use serde::Serialize;
use spectrust_core::consensus::{mine_with, MiningTarget};
use spectrust_core::hash::sha256_concat;
use spectrust_core::par::Execution;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationRow {
    pub z: u32,
    pub mean_wall_ms: f64,
    pub mean_trials: f64,
}

/// Preimage for run `run` at `z` bits under `seed`.
fn preimage(seed: u64, z: u32, run: u32) -> [u8; 32] {
    sha256_concat(&[b"calibrate", &seed.to_be_bytes(), &z.to_be_bytes(), &run.to_be_bytes()]).0
}

/// Trials of `runs` seeded searches at each `z`.
pub fn trial_counts(zs: &[u32], runs: u32, seed: u64, exec: Execution) -> Vec<Vec<u64>> {
    zs.iter()
        .map(|&z| {
            (0..runs)
                .map(|r| {
                    mine_with(exec, &preimage(seed, z, r), MiningTarget(z), 0, u64::MAX)
                        .expect("unbounded search")
                        .trials
                })
                .collect()
        })
        .collect()
}

pub fn calibrate(max_z: u32, runs: u32, seed: u64, exec: Execution) -> Vec<CalibrationRow> {
    (1..=max_z)
        .map(|z| {
            let mut trials = 0u64;
            let start = Instant::now();
            for r in 0..runs {
                trials += mine_with(exec, &preimage(seed, z, r), MiningTarget(z), 0, u64::MAX)
                    .expect("unbounded search")
                    .trials;
            }
            let wall = start.elapsed().as_secs_f64() * 1e3;
            CalibrationRow {
                z,
                mean_wall_ms: wall / f64::from(runs),
                mean_trials: trials as f64 / f64::from(runs),
            }
        })
        .collect()
}

/// Zero-bit count whose search time is closest to `t0_ms`, extrapolating
/// from the slowest row (doubling per bit) when no row gets there.
pub fn recommended_bits(rows: &[CalibrationRow], t0_ms: f64) -> u32 {
    let last = rows.last().expect("at least one row");
    if last.mean_wall_ms < t0_ms {
        let extra = (t0_ms / last.mean_wall_ms.max(1e-6)).log2().round().max(0.0);
        return (last.z + extra as u32).min(256);
    }
    rows.iter()
        .min_by(|a, b| {
            (a.mean_wall_ms.ln() - t0_ms.ln())
                .abs()
                .total_cmp(&(b.mean_wall_ms.ln() - t0_ms.ln()).abs())
        })
        .map_or(1, |r| r.z)
}

/// Non-decreasing wall time over `lo..=hi`, where a row may dip at most
/// `slack` below the running maximum.
pub fn monotone_within(rows: &[CalibrationRow], lo: u32, hi: u32, slack: f64) -> bool {
    let mut best = 0.0f64;
    for r in rows.iter().filter(|r| (lo..=hi).contains(&r.z)) {
        if r.mean_wall_ms < best * (1.0 - slack) {
            return false;
        }
        best = best.max(r.mean_wall_ms);
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_are_seeded() {
        let a = trial_counts(&[6], 5, 9, Execution::Sequential);
        let b = trial_counts(&[6], 5, 9, Execution::Parallel);
        assert_eq!(a, b);
    }

    #[test]
    fn single_bit_is_instant() {
        let rows = calibrate(1, 20, 1, Execution::Sequential);
        assert!(rows[0].mean_wall_ms < 1.0);
        assert!(rows[0].mean_trials < 4.0);
    }

    #[test]
    fn recommendation_extrapolates() {
        let rows = vec![CalibrationRow {
            z: 10,
            mean_wall_ms: 1.0,
            mean_trials: 1024.0,
        }];
        assert_eq!(recommended_bits(&rows, 1024.0), 20);
    }

    #[test]
    fn monotone_check_tolerates_small_dips() {
        let row = |z, w| CalibrationRow {
            z,
            mean_wall_ms: w,
            mean_trials: 0.0,
        };
        let rows = vec![row(8, 1.0), row(9, 0.9), row(10, 4.0)];
        assert!(monotone_within(&rows, 8, 20, 0.2));
        assert!(!monotone_within(&rows, 8, 20, 0.05));
    }
}
