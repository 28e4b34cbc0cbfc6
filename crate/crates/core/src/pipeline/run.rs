//! The generic `run` command: simulate, sample, fit or analyze.

use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{RunMode, Settings};
use super::figures::components;
use super::output::Table;
use super::PipelineError;
use crate::analytics::h_from_sigma22;
use crate::estimation::{
    coupling_scale, extract_commutator, extract_hamiltonian, fit_parity_polynomial, Estimate,
    FitResult, Observation, Parity,
};
use crate::oracle::hamiltonian_expectation;
use crate::propagator::{evolve, sigma22_exact, sigma22_series};
use crate::sampling::{sample_from_probabilities, SeedSpec};

pub(super) type Outputs = (Vec<Table>, Vec<(String, String)>);

/// `(t, coupling grid, σ₂₂ on the grid)`.
type Scan = (f64, Vec<f64>, Vec<f64>);

pub(super) fn outputs(settings: &Settings) -> Result<Outputs, PipelineError> {
    match settings.mode {
        RunMode::Simulate => Ok((vec![simulate(settings)?], Vec::new())),
        RunMode::Sample => Ok((vec![sample(settings)?], Vec::new())),
        RunMode::Fit => {
            let path = settings
                .records_path
                .as_deref()
                .expect("validated in config");
            fit(settings, path)
        }
        RunMode::Analyze => Ok((vec![analyze(settings)?], Vec::new())),
    }
}

/// `(t, grid, σ₂₂ over the grid)` for every configured time.
fn exact_scans(settings: &Settings) -> crate::Result<Vec<Scan>> {
    let electronic = settings.electronic.amplitudes()?;
    let params = settings.params_for(settings.model.sideband_order, &settings.motional);
    let scale = coupling_scale(&params, &settings.motional)?;
    settings
        .times
        .par_iter()
        .map(|&t| {
            let grid = settings.grid.grid(scale, t);
            let sigma = sigma22_series(&params, &electronic, &settings.motional, t, &grid)?;
            Ok((t, grid, sigma))
        })
        .collect()
}

fn simulate(settings: &Settings) -> Result<Table, PipelineError> {
    let mut table = Table::new("run_sigma22", &["t", "g", "sigma22"]);
    for (t, grid, sigma) in exact_scans(settings)? {
        for (g, s) in grid.iter().zip(&sigma) {
            table.push(vec![t.into(), (*g).into(), (*s).into()]);
        }
    }
    Ok(table)
}

fn sample(settings: &Settings) -> Result<Table, PipelineError> {
    let scans = exact_scans(settings)?;
    let jobs: Vec<(usize, u32)> = (0..scans.len())
        .flat_map(|i| (0..settings.replicates).map(move |r| (i, r)))
        .collect();
    let batches = jobs
        .par_iter()
        .map(|&(i, r)| {
            let (t, grid, probs) = &scans[i];
            let seed = SeedSpec::new(settings.master_seed)
                .with_cell(i as u64)
                .with_replicate(r);
            Ok((
                r,
                sample_from_probabilities(probs, grid, *t, settings.shots_per_point, seed)?,
            ))
        })
        .collect::<crate::Result<Vec<_>>>()?;
    let mut table = Table::new(
        "run_records",
        &["replicate", "g", "t", "shots", "successes", "p_hat"],
    );
    for (r, records) in batches {
        for rec in records {
            table.push(vec![
                r.into(),
                rec.g.into(),
                rec.t.into(),
                rec.shots.into(),
                rec.successes.into(),
                rec.p_hat.into(),
            ]);
        }
    }
    Ok(table)
}

/// One row of an external records file. `replicate` and `t` default to 0;
/// `p_hat` is derived from `successes` when absent.
#[derive(Debug, Deserialize)]
struct InputRecord {
    #[serde(default)]
    replicate: u32,
    g: f64,
    #[serde(default)]
    t: f64,
    shots: u64,
    #[serde(default)]
    successes: Option<u64>,
    #[serde(default)]
    p_hat: Option<f64>,
}

/// Observations grouped by `(replicate, t)` in order of first appearance.
pub fn read_records(path: &Path) -> Result<Vec<(u32, f64, Vec<Observation>)>, PipelineError> {
    let input_error = |line: Option<u64>, message: String| PipelineError::Input {
        path: path.to_path_buf(),
        message: match line {
            Some(l) => format!("line {l}: {message}"),
            None => message,
        },
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(source) => PipelineError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => input_error(None, format!("{other:?}")),
    })?;
    let mut groups: Vec<(u32, f64, Vec<Observation>)> = Vec::new();
    let mut index: HashMap<(u32, u64), usize> = HashMap::new();
    for row in reader.deserialize::<InputRecord>() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line());
            input_error(line, e.to_string())
        })?;
        let p_hat = match (row.p_hat, row.successes) {
            (Some(p), _) => p,
            (None, Some(s)) if row.shots > 0 => s as f64 / row.shots as f64,
            _ => {
                return Err(input_error(
                    None,
                    "each row needs p_hat or successes with shots > 0".into(),
                ))
            }
        };
        if !(0.0..=1.0).contains(&p_hat) || !row.g.is_finite() || row.shots == 0 {
            return Err(input_error(
                None,
                format!(
                    "invalid record g={}, shots={}, p_hat={p_hat}",
                    row.g, row.shots
                ),
            ));
        }
        let key = (row.replicate, row.t.to_bits());
        let slot = *index.entry(key).or_insert_with(|| {
            groups.push((row.replicate, row.t, Vec::new()));
            groups.len() - 1
        });
        groups[slot].2.push(Observation {
            g: row.g,
            p_hat,
            shots: row.shots,
        });
    }
    if groups.is_empty() {
        return Err(input_error(None, "no records".into()));
    }
    Ok(groups)
}

#[derive(Debug, Serialize)]
struct GroupFit {
    replicate: u32,
    t: f64,
    fit: FitResult,
    estimate: Estimate,
}

fn fit(settings: &Settings, path: &Path) -> Result<Outputs, PipelineError> {
    let groups = read_records(path)?;
    let fits = groups
        .par_iter()
        .map(|(replicate, t, obs)| {
            let fit = fit_parity_polynomial(obs, settings.basis, settings.offset)?;
            let estimate = match fit.basis.parity {
                Parity::Odd => extract_hamiltonian(&fit, &settings.model)?,
                Parity::Even => extract_commutator(&fit, &settings.model)?,
            };
            Ok(GroupFit {
                replicate: *replicate,
                t: *t,
                fit,
                estimate,
            })
        })
        .collect::<crate::Result<Vec<_>>>()?;
    let mut table = Table::new(
        "run_estimates",
        &[
            "replicate",
            "t",
            "estimate",
            "std_error",
            "coefficient",
            "coefficient_se",
            "residual_rms",
            "condition_number",
        ],
    );
    for f in &fits {
        table.push(vec![
            f.replicate.into(),
            f.t.into(),
            f.estimate.value.into(),
            f.estimate.std_error.into(),
            f.fit.coefficients[0].into(),
            f.fit.covariance[0].sqrt().into(),
            f.fit.residual_rms.into(),
            f.fit.condition_number.into(),
        ]);
    }
    let mut json = serde_json::to_string_pretty(&fits).expect("fits serialize");
    json.push('\n');
    Ok((vec![table], vec![("run_fits.json".to_string(), json)]))
}

/// Both sides of the `σ₂₂` identity at the configured coupling scale.
fn analyze(settings: &Settings) -> Result<Table, PipelineError> {
    let electronic = settings.electronic.amplitudes()?;
    let params = settings.params_for(settings.model.sideband_order, &settings.motional);
    let states = components(&params, &electronic, &settings.motional)?;
    let sigma0 = sigma22_exact(&params, &electronic, &settings.motional, 0.0)?;
    let rows = settings
        .times
        .par_iter()
        .map(|&t| {
            let sigma = sigma22_exact(&params, &electronic, &settings.motional, t)?;
            let lhs = h_from_sigma22(&params, sigma, sigma0)?;
            let rhs: f64 = states
                .iter()
                .map(|(w, psi)| {
                    let evolved = evolve(&params, psi, t);
                    w * (hamiltonian_expectation(&params, &evolved, t)
                        - hamiltonian_expectation(&params, psi, 0.0))
                })
                .sum();
            Ok((t, sigma, lhs, rhs))
        })
        .collect::<crate::Result<Vec<_>>>()?;
    let mut table = Table::new("run_identity", &["t", "sigma22", "lhs", "rhs", "abs_diff"]);
    for (t, sigma, lhs, rhs) in rows {
        table.push(vec![
            t.into(),
            sigma.into(),
            lhs.into(),
            rhs.into(),
            (lhs - rhs).abs().into(),
        ]);
    }
    Ok(table)
}
