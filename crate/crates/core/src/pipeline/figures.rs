//! The four figure commands: coupling scans at fixed time (`fig1`, `fig3`),
//! a Fock-state scan (`fig2`) and a time scan over sidebands (`fig4`).

use rayon::prelude::*;
use serde::Serialize;

use super::config::{Command, Settings};
use super::output::Table;
use super::PipelineError;
use crate::analytics::{
    commutator_expectation, commutator_expectation_distribution, h_expectation_general,
};
use crate::error::{Error, Result};
use crate::estimation::{
    coupling_scale, extract_commutator, extract_hamiltonian, fit_records, Estimate, FitResult,
    Parity,
};
use crate::model::{
    number_statistics, ElectronicAmplitudes, ModelParams, MotionalSpec, VibronicState,
};
use crate::oracle::{dyson_term, hamiltonian_expectation, DysonOrder};
use crate::propagator::sigma22_series;
use crate::sampling::{sample_from_probabilities, MeasurementRecord, SeedSpec};

/// Relative tolerance of the second-order quadrature used for references
/// without a closed form.
const QUADRATURE_TOL: f64 = 1e-10;

/// Pure components `(weight, state)` of a product input.
pub(super) fn components(
    params: &ModelParams,
    electronic: &ElectronicAmplitudes,
    motional: &MotionalSpec,
) -> Result<Vec<(f64, VibronicState)>> {
    let n_max = params.fock_cutoff;
    match motional {
        MotionalSpec::NumberDistribution(_) => number_statistics(motional, n_max)?
            .into_iter()
            .enumerate()
            .filter(|(_, p)| *p > 0.0)
            .map(|(m, p)| {
                Ok((
                    p,
                    VibronicState::product(electronic, &MotionalSpec::Fock(m), n_max)?,
                ))
            })
            .collect(),
        _ => Ok(vec![(
            1.0,
            VibronicState::product(electronic, motional, n_max)?,
        )]),
    }
}

/// `⟨Ĥ_int,I(t)⟩ − ⟨Ĥ_int,I(0)⟩` on the input state at `|κ| = κ′`: the quantity
/// recovered from the linear coefficient of the odd fit.
pub fn first_order_reference(
    params: &ModelParams,
    electronic: &ElectronicAmplitudes,
    motional: &MotionalSpec,
    t: f64,
) -> Result<f64> {
    let p = params.clone().with_coupling_scale(1.0);
    if p.sideband_order == 0 {
        let probs = number_statistics(motional, p.fock_cutoff)?;
        return Ok(h_expectation_general(&p, electronic, &probs, t)?
            - h_expectation_general(&p, electronic, &probs, 0.0)?);
    }
    Ok(components(&p, electronic, motional)?
        .iter()
        .map(|(w, psi)| {
            w * (hamiltonian_expectation(&p, psi, t) - hamiltonian_expectation(&p, psi, 0.0))
        })
        .sum())
}

/// Partly integrated commutator on the input state at `|κ| = κ′`: the
/// quantity recovered from the quadratic coefficient of the even fit.
pub fn second_order_reference(
    params: &ModelParams,
    electronic: &ElectronicAmplitudes,
    motional: &MotionalSpec,
    t: f64,
) -> Result<f64> {
    let p = params.clone().with_coupling_scale(1.0);
    if electronic.gamma2.norm_sqr() == 0.0 {
        return match motional {
            MotionalSpec::Coherent(alpha) => commutator_expectation(&p, *alpha, t),
            _ => commutator_expectation_distribution(
                &p,
                &number_statistics(motional, p.fock_cutoff)?,
                t,
            ),
        };
    }
    let mut total = 0.0;
    for (w, psi) in components(&p, electronic, motional)? {
        total += w * dyson_term(&p, DysonOrder::Second, &psi, t, QUADRATURE_TOL)?.re;
    }
    Ok(total)
}

fn reference(
    parity: Parity,
    params: &ModelParams,
    el: &ElectronicAmplitudes,
    m: &MotionalSpec,
    t: f64,
) -> Result<f64> {
    match parity {
        Parity::Odd => first_order_reference(params, el, m, t),
        Parity::Even => second_order_reference(params, el, m, t),
    }
}

fn extract(fit: &FitResult, params: &ModelParams) -> Result<Estimate> {
    match fit.basis.parity {
        Parity::Odd => extract_hamiltonian(fit, params),
        Parity::Even => extract_commutator(fit, params),
    }
}

/// Exact inputs shared by every replicate of one `(state, k, t)` cell.
struct Cell {
    params: ModelParams,
    t: f64,
    grid: Vec<f64>,
    probabilities: Vec<f64>,
    reference: f64,
}

impl Cell {
    fn new(
        settings: &Settings,
        k: u32,
        electronic: &ElectronicAmplitudes,
        motional: &MotionalSpec,
        t: f64,
    ) -> Result<Self> {
        let params = settings.params_for(k, motional);
        let grid = settings.grid.grid(coupling_scale(&params, motional)?, t);
        let probabilities = sigma22_series(&params, electronic, motional, t, &grid)?;
        let reference = reference(settings.basis.parity, &params, electronic, motional, t)?;
        Ok(Self {
            params,
            t,
            grid,
            probabilities,
            reference,
        })
    }

    fn sample(&self, settings: &Settings, seed: SeedSpec) -> Result<Vec<MeasurementRecord>> {
        sample_from_probabilities(
            &self.probabilities,
            &self.grid,
            self.t,
            settings.shots_per_point,
            seed,
        )
    }

    fn fit(
        &self,
        settings: &Settings,
        records: &[MeasurementRecord],
    ) -> Result<(FitResult, Estimate)> {
        let fit = fit_records(records, settings.basis, settings.offset)?;
        let estimate = extract(&fit, &self.params)?;
        Ok((fit, estimate))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanReplicate {
    pub replicate: u32,
    pub records: Vec<MeasurementRecord>,
    pub fit: FitResult,
    pub estimate: Estimate,
}

/// Result of `fig1` or `fig3`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanOutput {
    pub command: Command,
    pub t: f64,
    pub grid: Vec<f64>,
    pub exact: Vec<f64>,
    pub reference: f64,
    pub replicates: Vec<ScanReplicate>,
}

/// Coupling scan at a single time, sampled, fitted and extracted per replicate.
pub fn coupling_scan(settings: &Settings) -> Result<ScanOutput> {
    let electronic = settings.electronic.amplitudes()?;
    let cell = Cell::new(
        settings,
        settings.model.sideband_order,
        &electronic,
        &settings.motional,
        settings.times[0],
    )?;
    let replicates = (0..settings.replicates)
        .into_par_iter()
        .map(|r| {
            let records = cell.sample(
                settings,
                SeedSpec::new(settings.master_seed).with_replicate(r),
            )?;
            let (fit, estimate) = cell.fit(settings, &records)?;
            Ok(ScanReplicate {
                replicate: r,
                records,
                fit,
                estimate,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScanOutput {
        command: settings.command,
        t: cell.t,
        grid: cell.grid,
        exact: cell.probabilities,
        reference: cell.reference,
        replicates,
    })
}

impl ScanOutput {
    pub fn tables(&self, curve_points: usize) -> Vec<Table> {
        let prefix = self.command.name();
        let mut records = Table::new(
            format!("{prefix}_records"),
            &["replicate", "g", "t", "shots", "successes", "p_hat"],
        );
        let mut curve = Table::new(
            format!("{prefix}_fit_curve"),
            &["replicate", "g", "sigma22_fit"],
        );
        let mut leading = Table::new(
            format!("{prefix}_leading_term"),
            &["replicate", "g", "offset_plus_leading"],
        );
        let mut estimate = Table::new(
            format!("{prefix}_estimate"),
            &[
                "replicate",
                "t",
                "estimate",
                "std_error",
                "reference",
                "coefficient",
                "coefficient_se",
                "residual_rms",
                "condition_number",
            ],
        );
        let g_max = self.grid.last().copied().unwrap_or(0.0);
        for rep in &self.replicates {
            for rec in &rep.records {
                records.push(vec![
                    rep.replicate.into(),
                    rec.g.into(),
                    rec.t.into(),
                    rec.shots.into(),
                    rec.successes.into(),
                    rec.p_hat.into(),
                ]);
            }
            for i in 0..curve_points {
                let g = g_max * i as f64 / (curve_points - 1) as f64;
                curve.push(vec![
                    rep.replicate.into(),
                    g.into(),
                    rep.fit.evaluate(g).into(),
                ]);
                leading.push(vec![
                    rep.replicate.into(),
                    g.into(),
                    (rep.fit.offset + rep.fit.leading_term(g)).into(),
                ]);
            }
            estimate.push(vec![
                rep.replicate.into(),
                self.t.into(),
                rep.estimate.value.into(),
                rep.estimate.std_error.into(),
                self.reference.into(),
                rep.fit.coefficients[0].into(),
                rep.fit.covariance[0].sqrt().into(),
                rep.fit.residual_rms.into(),
                rep.fit.condition_number.into(),
            ]);
        }
        vec![records, curve, leading, estimate]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FockEstimate {
    pub n: usize,
    pub replicate: u32,
    pub estimate: Estimate,
    pub reference: f64,
}

/// Result of `fig2`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FockScanOutput {
    pub t: f64,
    pub estimates: Vec<FockEstimate>,
    /// `(n, replicate, record)`.
    pub records: Vec<(usize, u32, MeasurementRecord)>,
}

/// One coupling scan per Fock state of `settings.fock_states`.
pub fn fock_scan(settings: &Settings) -> Result<FockScanOutput> {
    let electronic = settings.electronic.amplitudes()?;
    let t = settings.times[0];
    let k = settings.model.sideband_order;
    let cells = settings
        .fock_states
        .par_iter()
        .map(|&n| Cell::new(settings, k, &electronic, &MotionalSpec::Fock(n), t))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, u32)> = (0..cells.len())
        .flat_map(|i| (0..settings.replicates).map(move |r| (i, r)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(i, r)| {
            let n = settings.fock_states[i];
            let seed = SeedSpec::new(settings.master_seed)
                .with_cell(n as u64)
                .with_replicate(r);
            let records = cells[i].sample(settings, seed)?;
            let (_, estimate) = cells[i].fit(settings, &records)?;
            Ok((
                FockEstimate {
                    n,
                    replicate: r,
                    estimate,
                    reference: cells[i].reference,
                },
                records,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = FockScanOutput {
        t,
        estimates: Vec::new(),
        records: Vec::new(),
    };
    for (est, records) in results {
        out.records
            .extend(records.into_iter().map(|rec| (est.n, est.replicate, rec)));
        out.estimates.push(est);
    }
    Ok(out)
}

impl FockScanOutput {
    pub fn tables(&self) -> Vec<Table> {
        let mut est = Table::new(
            "fig2_hamiltonian",
            &["n", "replicate", "t", "estimate", "std_error", "reference"],
        );
        for e in &self.estimates {
            est.push(vec![
                e.n.into(),
                e.replicate.into(),
                self.t.into(),
                e.estimate.value.into(),
                e.estimate.std_error.into(),
                e.reference.into(),
            ]);
        }
        let mut records = Table::new(
            "fig2_records",
            &["n", "replicate", "g", "t", "shots", "successes", "p_hat"],
        );
        for (n, r, rec) in &self.records {
            records.push(vec![
                (*n).into(),
                (*r).into(),
                rec.g.into(),
                rec.t.into(),
                rec.shots.into(),
                rec.successes.into(),
                rec.p_hat.into(),
            ]);
        }
        vec![est, records]
    }

    /// Fraction of `(n, replicate)` cells whose estimate lies within
    /// `sigmas` standard errors of the reference.
    pub fn coverage(&self, sigmas: f64) -> f64 {
        let hits = self
            .estimates
            .iter()
            .filter(|e| e.estimate.covers(e.reference, sigmas))
            .count();
        hits as f64 / self.estimates.len() as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    /// Every record was 0 or 1 (e.g. at `t = 0`); reported as `0 ± 0`.
    Degenerate,
}

impl CellStatus {
    pub fn name(self) -> &'static str {
        match self {
            CellStatus::Ok => "ok",
            CellStatus::Degenerate => "degenerate",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimeEstimate {
    pub k: u32,
    pub time_index: usize,
    pub t: f64,
    pub replicate: u32,
    pub estimate: Estimate,
    pub reference: f64,
    pub status: CellStatus,
}

impl TimeEstimate {
    pub fn covers(&self, sigmas: f64) -> bool {
        self.estimate.covers(self.reference, sigmas)
    }

    /// `|estimate| / std_error`.
    pub fn significance(&self) -> f64 {
        if self.estimate.std_error > 0.0 {
            self.estimate.value.abs() / self.estimate.std_error
        } else {
            0.0
        }
    }
}

/// Result of `fig4`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimeScanOutput {
    pub estimates: Vec<TimeEstimate>,
    /// The same extraction at `Δωt = π`, where the commutator peaks.
    pub certification: Vec<TimeEstimate>,
}

/// Seed cell of the `Δωt = π` certification point.
const CERTIFICATION_INDEX: u64 = u32::MAX as u64;

/// Extraction at every time of `settings.times` for each sideband of
/// `settings.sideband_orders`, plus the `Δωt = π` certification point.
pub fn time_scan(settings: &Settings) -> Result<TimeScanOutput> {
    let electronic = settings.electronic.amplitudes()?;
    let peak = std::f64::consts::PI / settings.model.detuning.abs();
    let mut points: Vec<(u32, u64, f64)> = Vec::new();
    for &k in &settings.sideband_orders {
        for (i, &t) in settings.times.iter().enumerate() {
            points.push((k, i as u64, t));
        }
        points.push((k, CERTIFICATION_INDEX, peak));
    }
    let cells = points
        .par_iter()
        .map(|&(k, _, t)| Cell::new(settings, k, &electronic, &settings.motional, t))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, u32)> = (0..points.len())
        .flat_map(|i| (0..settings.replicates).map(move |r| (i, r)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(i, r)| {
            let (k, index, t) = points[i];
            let seed = SeedSpec::new(settings.master_seed)
                .with_cell((u64::from(k) << 32) | index)
                .with_replicate(r);
            let records = cells[i].sample(settings, seed)?;
            let (estimate, status) = match cells[i].fit(settings, &records) {
                Ok((_, e)) => (e, CellStatus::Ok),
                Err(Error::DegenerateWeights) => (
                    Estimate {
                        value: 0.0,
                        std_error: 0.0,
                    },
                    CellStatus::Degenerate,
                ),
                Err(e) => return Err(e),
            };
            Ok(TimeEstimate {
                k,
                time_index: index as usize,
                t,
                replicate: r,
                estimate,
                reference: cells[i].reference,
                status,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (certification, estimates) = results
        .into_iter()
        .partition(|e| e.time_index as u64 == CERTIFICATION_INDEX);
    Ok(TimeScanOutput {
        estimates,
        certification,
    })
}

impl TimeScanOutput {
    pub fn tables(&self) -> Vec<Table> {
        let mut est = Table::new(
            "fig4_commutator",
            &[
                "k",
                "replicate",
                "t",
                "estimate",
                "std_error",
                "reference",
                "status",
            ],
        );
        for e in &self.estimates {
            est.push(vec![
                e.k.into(),
                e.replicate.into(),
                e.t.into(),
                e.estimate.value.into(),
                e.estimate.std_error.into(),
                e.reference.into(),
                e.status.name().into(),
            ]);
        }
        let mut cert = Table::new(
            "fig4_certification",
            &[
                "k",
                "replicate",
                "t",
                "estimate",
                "std_error",
                "reference",
                "significance",
            ],
        );
        for e in &self.certification {
            cert.push(vec![
                e.k.into(),
                e.replicate.into(),
                e.t.into(),
                e.estimate.value.into(),
                e.estimate.std_error.into(),
                e.reference.into(),
                e.significance().into(),
            ]);
        }
        vec![est, cert]
    }

    pub fn coverage(&self, sigmas: f64) -> f64 {
        let hits = self.estimates.iter().filter(|e| e.covers(sigmas)).count();
        hits as f64 / self.estimates.len() as f64
    }
}

pub(super) fn tables_for(settings: &Settings) -> std::result::Result<Vec<Table>, PipelineError> {
    Ok(match settings.command {
        Command::Fig1 | Command::Fig3 => coupling_scan(settings)?.tables(settings.curve_points),
        Command::Fig2 => fock_scan(settings)?.tables(),
        Command::Fig4 => time_scan(settings)?.tables(),
        Command::Run => unreachable!("run is handled by the run module"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::mode_function;
    use crate::pipeline::config::Overrides;
    use num_complex::Complex64 as C64;

    fn settings(command: Command, json: &str) -> Settings {
        Settings::from_json_str(command, json, Overrides::default()).unwrap()
    }

    #[test]
    fn first_order_reference_matches_state_vector() {
        let el = ElectronicAmplitudes::quarter_phase_superposition();
        let p = ModelParams::trapped_ion(0).with_fock_cutoff(40);
        let alpha = MotionalSpec::Coherent(C64::new(1.2, 0.4));
        let closed = first_order_reference(&p, &el, &alpha, 3.0).unwrap();
        let psi = VibronicState::product(&el, &alpha, 40).unwrap();
        let direct =
            hamiltonian_expectation(&p, &psi, 3.0) - hamiltonian_expectation(&p, &psi, 0.0);
        assert!((closed - direct).abs() < 1e-12);
        let fock0 = first_order_reference(&p, &el, &MotionalSpec::Fock(0), 10.0).unwrap();
        assert!((fock0 - mode_function(&p, 0) * 2f64.sin()).abs() < 1e-15);
    }

    #[test]
    fn second_order_reference_agrees_with_quadrature() {
        let p = ModelParams::trapped_ion(2).with_fock_cutoff(12);
        let mix = MotionalSpec::NumberDistribution(vec![0.0, 0.0, 0.25, 0.5, 0.25]);
        let ground = ElectronicAmplitudes::ground();
        let closed = second_order_reference(&p, &ground, &mix, 9.0).unwrap();
        let mut quad = 0.0;
        for (w, psi) in components(&p, &ground, &mix).unwrap() {
            quad += w * dyson_term(&p, DysonOrder::Second, &psi, 9.0, 1e-12)
                .unwrap()
                .re;
        }
        assert!((closed / quad - 1.0).abs() < 1e-8, "{closed} vs {quad}");
    }

    #[test]
    fn fig1_curve_passes_through_offset() {
        let s = settings(Command::Fig1, "{}");
        let out = coupling_scan(&s).unwrap();
        let fit = &out.replicates[0].fit;
        assert_eq!(fit.evaluate(0.0), 0.5);
        assert_eq!(out.grid.len(), 20);
        assert!((out.reference - 0.891_292_131_415_779_6).abs() < 1e-12);
        let tables = out.tables(s.curve_points);
        assert_eq!(tables.len(), 4);
        assert_eq!(tables[1].rows[0][2], 0.5.into());
    }

    #[test]
    fn fig3_with_first_sideband_degenerates() {
        let s = settings(Command::Fig3, r#"{"model": {"sideband_order": 1}}"#);
        assert_eq!(coupling_scan(&s).unwrap_err(), Error::DegenerateWeights);
    }

    #[test]
    fn fig2_reference_is_independent_of_trap_frequency() {
        let a = fock_scan(&settings(
            Command::Fig2,
            r#"{"input_state": {"fock_states": [0, 1]}}"#,
        ))
        .unwrap();
        let b = fock_scan(&settings(
            Command::Fig2,
            r#"{"model": {"trap_frequency": 1}, "input_state": {"fock_states": [0, 1]}}"#,
        ))
        .unwrap();
        assert_eq!(a, b);
        let ratio = a.estimates[1].reference / a.estimates[0].reference;
        assert!((ratio - 0.96).abs() < 1e-12);
    }

    #[test]
    fn fig4_zero_time_is_degenerate() {
        let s = settings(
            Command::Fig4,
            r#"{"sampling": {"times": [0, 31.41592653589793]}}"#,
        );
        let out = time_scan(&s).unwrap();
        assert_eq!(out.estimates.len(), 4);
        assert_eq!(out.certification.len(), 2);
        for e in &out.estimates {
            if e.t == 0.0 {
                assert_eq!(e.status, CellStatus::Degenerate);
                assert_eq!(e.reference, 0.0);
                assert!(e.covers(3.0));
            } else {
                assert_eq!(e.status, CellStatus::Ok);
            }
        }
        for c in &out.certification {
            assert!(c.significance() > 5.0, "{c:?}");
        }
    }
}
