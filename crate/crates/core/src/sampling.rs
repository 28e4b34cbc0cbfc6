//! Synthetic shot-noise readout of the excited-state population.
//!
//! Each data point is a binomial count of `shots` projective measurements of
//! the electronic state with success probability `σ₂₂`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ElectronicAmplitudes, ModelParams, MotionalSpec};
use crate::propagator::sigma22_series;

/// One synthetic `σ₂₂` data point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub g: f64,
    pub t: f64,
    pub shots: u64,
    pub successes: u64,
    pub p_hat: f64,
}

impl MeasurementRecord {
    pub fn new(g: f64, t: f64, shots: u64, successes: u64) -> Result<Self> {
        if shots == 0 {
            return Err(Error::InvalidParameter("shots must be >= 1".into()));
        }
        if successes > shots {
            return Err(Error::InvalidParameter(format!(
                "successes ({successes}) exceed shots ({shots})"
            )));
        }
        Ok(Self {
            g,
            t,
            shots,
            successes,
            p_hat: successes as f64 / shots as f64,
        })
    }
}

/// Counter-based seeding: the ChaCha key holds `(master_seed, cell)` and the
/// stream id holds `(replicate, point)`, so every record owns an independent
/// stream regardless of generation order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    /// Experiment cell (Fock index, time index, sideband, ...).
    pub cell: u64,
    pub replicate: u32,
}

impl SeedSpec {
    pub fn new(master_seed: u64) -> Self {
        Self {
            master_seed,
            cell: 0,
            replicate: 0,
        }
    }

    pub fn with_cell(self, cell: u64) -> Self {
        Self { cell, ..self }
    }

    pub fn with_replicate(self, replicate: u32) -> Self {
        Self { replicate, ..self }
    }

    /// Generator for the `point`-th record.
    pub fn rng(&self, point: u32) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.master_seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.cell.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream((u64::from(self.replicate) << 32) | u64::from(point));
        rng
    }
}

/// Draws `Binomial(shots, p)` from `rng`.
pub fn draw_successes<R: Rng>(rng: &mut R, shots: u64, p: f64) -> Result<u64> {
    if !p.is_finite() || !(-1e-12..=1.0 + 1e-12).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "probability {p} outside [0, 1]"
        )));
    }
    let p = p.clamp(0.0, 1.0);
    let dist =
        Binomial::new(shots, p).map_err(|e| Error::InvalidParameter(format!("binomial: {e}")))?;
    Ok(dist.sample(rng))
}

/// Simulated readout of `σ₂₂(t)` at each coupling scale of `g_grid`.
pub fn sample_sigma22(
    params: &ModelParams,
    electronic: &ElectronicAmplitudes,
    motional: &MotionalSpec,
    t: f64,
    g_grid: &[f64],
    shots_per_point: u64,
    seed: SeedSpec,
) -> Result<Vec<MeasurementRecord>> {
    let probs = sigma22_series(params, electronic, motional, t, g_grid)?;
    sample_from_probabilities(&probs, g_grid, t, shots_per_point, seed)
}

/// Binomial records for precomputed success probabilities.
pub fn sample_from_probabilities(
    probs: &[f64],
    g_grid: &[f64],
    t: f64,
    shots_per_point: u64,
    seed: SeedSpec,
) -> Result<Vec<MeasurementRecord>> {
    if shots_per_point == 0 {
        return Err(Error::InvalidParameter(
            "shots_per_point must be >= 1".into(),
        ));
    }
    if g_grid.len() > u32::MAX as usize || probs.len() != g_grid.len() {
        return Err(Error::InvalidParameter(
            "grid and probabilities must match in length".into(),
        ));
    }
    probs
        .par_iter()
        .zip(g_grid.par_iter())
        .enumerate()
        .map(|(i, (&p, &g))| {
            let mut rng = seed.rng(i as u32);
            let successes = draw_successes(&mut rng, shots_per_point, p)?;
            MeasurementRecord::new(g, t, shots_per_point, successes)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig1_setup() -> (ModelParams, ElectronicAmplitudes, MotionalSpec) {
        (
            ModelParams::trapped_ion(0).with_fock_cutoff(2),
            ElectronicAmplitudes::quarter_phase_superposition(),
            MotionalSpec::Fock(0),
        )
    }

    #[test]
    fn certain_outcomes_are_exact() {
        let p = ModelParams::trapped_ion(0).with_fock_cutoff(2);
        let recs = sample_sigma22(
            &p,
            &ElectronicAmplitudes::ground(),
            &MotionalSpec::Fock(0),
            10.0,
            &[0.0, 0.0, 0.0],
            1000,
            SeedSpec::new(7),
        )
        .unwrap();
        assert!(recs.iter().all(|r| r.successes == 0 && r.p_hat == 0.0));
    }

    #[test]
    fn same_seed_same_records() {
        let (p, e, m) = fig1_setup();
        let grid: Vec<f64> = (1..=20).map(|i| 0.005 * i as f64).collect();
        let seed = SeedSpec::new(2019).with_cell(3).with_replicate(5);
        let a = sample_sigma22(&p, &e, &m, 10.0, &grid, 1000, seed).unwrap();
        let b = sample_sigma22(&p, &e, &m, 10.0, &grid, 1000, seed).unwrap();
        assert_eq!(a, b);
        let c = sample_sigma22(&p, &e, &m, 10.0, &grid, 1000, seed.with_replicate(6)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn streams_do_not_depend_on_grid_length() {
        let probs = [0.3, 0.4, 0.5, 0.6];
        let g = [0.1, 0.2, 0.3, 0.4];
        let seed = SeedSpec::new(1);
        let long = sample_from_probabilities(&probs, &g, 1.0, 500, seed).unwrap();
        let short = sample_from_probabilities(&probs[..2], &g[..2], 1.0, 500, seed).unwrap();
        assert_eq!(&long[..2], &short[..]);
    }

    #[test]
    fn record_validation() {
        assert!(MeasurementRecord::new(0.1, 1.0, 0, 0).is_err());
        assert!(MeasurementRecord::new(0.1, 1.0, 10, 11).is_err());
        let r = MeasurementRecord::new(0.1, 1.0, 10, 4).unwrap();
        assert_eq!(r.p_hat, 0.4);
        assert!(draw_successes(&mut SeedSpec::new(0).rng(0), 10, 1.5).is_err());
    }

    #[test]
    fn empirical_mean_matches_exact_probability() {
        // fig1 defaults with a single coupling value, 10⁴ replicates.
        let (p, e, m) = fig1_setup();
        let g = 0.1;
        let exact = sigma22_series(&p, &e, &m, 10.0, &[g]).unwrap()[0];
        let shots = 1000u64;
        let replicates = 10_000u32;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for r in 0..replicates {
            let recs = sample_from_probabilities(
                &[exact],
                &[g],
                10.0,
                shots,
                SeedSpec::new(42).with_replicate(r),
            )
            .unwrap();
            sum += recs[0].p_hat;
            sum_sq += recs[0].p_hat * recs[0].p_hat;
        }
        let n = f64::from(replicates);
        let mean = sum / n;
        let var = (sum_sq - n * mean * mean) / (n - 1.0);
        let binomial_var = exact * (1.0 - exact) / shots as f64;
        assert!((mean - exact).abs() < 4.0 * (binomial_var / n).sqrt());
        assert!((var / binomial_var - 1.0).abs() < 0.1);
    }
}
