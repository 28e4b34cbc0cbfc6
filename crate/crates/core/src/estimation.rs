//! Parity-constrained polynomial regression of `σ₂₂` in the coupling scale `g`.
//!
//! With the quarter-phase superposition input, `σ₂₂ − 1/2` is odd in `g` and
//! its linear coefficient carries `⟨Ĥ_int,I(t)⟩`. With the electronic ground
//! state, `σ₂₂` is even in `g` and its quadratic coefficient carries the partly
//! integrated commutator. Both are quoted at `|κ| = κ′`, i.e. `g = 1`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{number_statistics, rabi_weight, ModelParams, MotionalSpec};
use crate::propagator::block_count;
use crate::sampling::MeasurementRecord;

/// Condition numbers above this are treated as singular.
pub const MAX_CONDITION_NUMBER: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Odd,
    Even,
}

impl Parity {
    pub fn name(self) -> &'static str {
        match self {
            Parity::Odd => "odd",
            Parity::Even => "even",
        }
    }

    fn lowest_power(self) -> u32 {
        match self {
            Parity::Odd => 1,
            Parity::Even => 2,
        }
    }
}

/// `{g, g³, …, g^max}` or `{g², g⁴, …, g^max}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitBasis {
    pub parity: Parity,
    pub max_power: u32,
}

impl FitBasis {
    pub fn new(parity: Parity, max_power: u32) -> Result<Self> {
        let lowest = parity.lowest_power();
        if max_power < lowest || !(max_power - lowest).is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "max_power {max_power} is not a valid {} power",
                parity.name()
            )));
        }
        Ok(Self { parity, max_power })
    }

    /// `g, g³, g⁵`.
    pub fn hamiltonian_default() -> Self {
        Self {
            parity: Parity::Odd,
            max_power: 5,
        }
    }

    /// `g², g⁴, g⁶`.
    pub fn commutator_default() -> Self {
        Self {
            parity: Parity::Even,
            max_power: 6,
        }
    }

    pub fn powers(&self) -> Vec<u32> {
        (self.parity.lowest_power()..=self.max_power)
            .step_by(2)
            .collect()
    }

    pub fn len(&self) -> usize {
        ((self.max_power - self.parity.lowest_power()) / 2 + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// A single regression input: observed frequency `p_hat` at coupling `g`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    pub g: f64,
    pub p_hat: f64,
    pub shots: u64,
}

impl From<&MeasurementRecord> for Observation {
    fn from(r: &MeasurementRecord) -> Self {
        Self {
            g: r.g,
            p_hat: r.p_hat,
            shots: r.shots,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub basis: FitBasis,
    pub offset: f64,
    pub coefficients: Vec<f64>,
    /// Row-major, `coefficients.len()` squared.
    pub covariance: Vec<f64>,
    pub residual_rms: f64,
    pub condition_number: f64,
}

impl FitResult {
    fn position(&self, power: u32) -> Option<usize> {
        self.basis.powers().iter().position(|p| *p == power)
    }

    pub fn coefficient(&self, power: u32) -> Option<f64> {
        self.position(power).map(|i| self.coefficients[i])
    }

    pub fn variance(&self, power: u32) -> Option<f64> {
        let n = self.coefficients.len();
        self.position(power).map(|i| self.covariance[i * n + i])
    }

    /// Fitted `σ̃₂₂(g)`, offset included.
    pub fn evaluate(&self, g: f64) -> f64 {
        self.offset
            + self
                .basis
                .powers()
                .iter()
                .zip(&self.coefficients)
                .map(|(p, c)| c * g.powi(*p as i32))
                .sum::<f64>()
    }

    /// The lowest-order term alone, `c₁g` or `c₂g²`.
    pub fn leading_term(&self, g: f64) -> f64 {
        self.coefficients[0] * g.powi(self.basis.parity.lowest_power() as i32)
    }
}

/// Weighted least squares of `y` on the parity basis with fixed weights.
///
/// `y` is the observation with the offset already removed; `offset` is only
/// recorded in the result.
pub fn weighted_parity_fit(
    g: &[f64],
    y: &[f64],
    weights: &[f64],
    basis: FitBasis,
    offset: f64,
) -> Result<FitResult> {
    let rows = g.len();
    if y.len() != rows || weights.len() != rows {
        return Err(Error::InvalidParameter(
            "g, y and weights must have equal length".into(),
        ));
    }
    if weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
        return Err(Error::InvalidParameter(
            "weights must be finite and positive".into(),
        ));
    }
    let powers = basis.powers();
    let cols = powers.len();

    let mut distinct: Vec<f64> = g.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < cols {
        return Err(Error::SingularDesign(format!(
            "{} distinct coupling values for {cols} coefficients",
            distinct.len()
        )));
    }

    let design = DMatrix::from_fn(rows, cols, |i, j| g[i].powi(powers[j] as i32));
    let singular = design.singular_values();
    let condition_number = singular.max() / singular.min();
    if condition_number.is_nan() || condition_number > MAX_CONDITION_NUMBER {
        return Err(Error::SingularDesign(format!(
            "design condition number {condition_number:e} exceeds {MAX_CONDITION_NUMBER:e}"
        )));
    }

    let sqrt_w: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    let scaled = DMatrix::from_fn(rows, cols, |i, j| design[(i, j)] * sqrt_w[i]);
    let rhs = DVector::from_fn(rows, |i, _| y[i] * sqrt_w[i]);
    let svd = scaled.svd(true, true);
    let coefficients = svd
        .solve(&rhs, 0.0)
        .map_err(|e| Error::SingularDesign(e.to_string()))?;
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let inv_sq: Vec<f64> = svd.singular_values.iter().map(|s| 1.0 / (s * s)).collect();
    if inv_sq.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularDesign(
            "weighted design is rank deficient".into(),
        ));
    }
    // (XᵀWX)⁻¹ = V Σ⁻² Vᵀ
    let mut covariance = vec![0.0; cols * cols];
    for a in 0..cols {
        for b in 0..cols {
            covariance[a * cols + b] = (0..cols)
                .map(|s| v_t[(s, a)] * inv_sq[s] * v_t[(s, b)])
                .sum();
        }
    }
    for a in 0..cols {
        for b in 0..a {
            let sym = 0.5 * (covariance[a * cols + b] + covariance[b * cols + a]);
            covariance[a * cols + b] = sym;
            covariance[b * cols + a] = sym;
        }
    }

    let fitted = &design * &coefficients;
    let residual_rms =
        ((0..rows).map(|i| (y[i] - fitted[i]).powi(2)).sum::<f64>() / rows as f64).sqrt();

    Ok(FitResult {
        basis,
        offset,
        coefficients: coefficients.iter().copied().collect(),
        covariance,
        residual_rms,
        condition_number,
    })
}

/// Inverse-variance weight `shots / (p̃(1 − p̃))` with `p̃` clamped to
/// `[1/(2·shots), 1 − 1/(2·shots)]`.
pub fn binomial_weight(p_hat: f64, shots: u64) -> f64 {
    let n = shots as f64;
    let floor = 1.0 / (2.0 * n);
    let p = p_hat.clamp(floor, 1.0 - floor);
    n / (p * (1.0 - p))
}

/// Weighted fit of `p_hat − offset` on the parity basis.
pub fn fit_parity_polynomial(
    observations: &[Observation],
    basis: FitBasis,
    offset: f64,
) -> Result<FitResult> {
    if observations.iter().any(|o| o.shots == 0) {
        return Err(Error::InvalidParameter(
            "every observation needs shots > 0".into(),
        ));
    }
    if !observations.is_empty()
        && observations
            .iter()
            .all(|o| o.p_hat == 0.0 || o.p_hat == 1.0)
    {
        return Err(Error::DegenerateWeights);
    }
    let g: Vec<f64> = observations.iter().map(|o| o.g).collect();
    let y: Vec<f64> = observations.iter().map(|o| o.p_hat - offset).collect();
    let w: Vec<f64> = observations
        .iter()
        .map(|o| binomial_weight(o.p_hat, o.shots))
        .collect();
    weighted_parity_fit(&g, &y, &w, basis, offset)
}

pub fn fit_records(
    records: &[MeasurementRecord],
    basis: FitBasis,
    offset: f64,
) -> Result<FitResult> {
    let obs: Vec<Observation> = records.iter().map(Observation::from).collect();
    fit_parity_polynomial(&obs, basis, offset)
}

/// A physical estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    /// `|value − reference|` in units of the standard error.
    pub fn z_score(&self, reference: f64) -> f64 {
        (self.value - reference).abs() / self.std_error
    }

    pub fn covers(&self, reference: f64, sigmas: f64) -> bool {
        (self.value - reference).abs() <= sigmas * self.std_error
    }
}

fn scaled_leading(fit: &FitResult, params: &ModelParams, parity: Parity) -> Result<Estimate> {
    if fit.basis.parity != parity {
        return Err(Error::WrongBasis {
            expected: parity.name(),
            found: fit.basis.parity.name(),
        });
    }
    if params.detuning == 0.0 {
        return Err(Error::ZeroDetuning);
    }
    let power = parity.lowest_power();
    let c = fit
        .coefficient(power)
        .expect("lowest power is always in the basis");
    let var = fit
        .variance(power)
        .expect("lowest power is always in the basis");
    // g multiplies κ′, so the g = 1 value is the coefficient itself.
    Ok(Estimate {
        value: params.detuning * c,
        std_error: params.detuning.abs() * var.sqrt(),
    })
}

/// `ħΔω c₁`: the expectation of `Ĥ_int,I(t)` at `|κ| = κ′`.
pub fn extract_hamiltonian(fit: &FitResult, params: &ModelParams) -> Result<Estimate> {
    scaled_leading(fit, params, Parity::Odd)
}

/// `ħΔω c₂`: the partly integrated commutator expectation at `|κ| = κ′`.
pub fn extract_commutator(fit: &FitResult, params: &ModelParams) -> Result<Estimate> {
    scaled_leading(fit, params, Parity::Even)
}

/// Minimum population for a Fock level to count towards [`coupling_scale`].
const OCCUPIED: f64 = 1e-4;

/// Largest `|w_n|` among blocks touching an occupied Fock level of `motional`.
pub fn coupling_scale(params: &ModelParams, motional: &MotionalSpec) -> Result<f64> {
    let probs = number_statistics(motional, params.fock_cutoff)?;
    let k = params.sideband_order as usize;
    let blocks = block_count(params);
    let mut scale: f64 = 0.0;
    for (m, p) in probs.iter().enumerate() {
        if *p < OCCUPIED {
            continue;
        }
        if m < blocks {
            scale = scale.max(rabi_weight(params, m).abs());
        }
        if m >= k && m - k < blocks {
            scale = scale.max(rabi_weight(params, m - k).abs());
        }
    }
    Ok(scale)
}

/// Equally spaced coupling grid `g_max/points, …, g_max`.
///
/// Unless fixed, `g_max = min(cap, phase_budget / (|w|_max · t))`: the
/// `σ₂₂` series in `g` is governed by `g |w_n| t`, so the grid shrinks with
/// time to keep the neglected orders below the shot-noise floor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridRule {
    pub points: usize,
    pub cap: f64,
    pub phase_budget: f64,
    pub fixed_max: Option<f64>,
}

impl Default for GridRule {
    fn default() -> Self {
        Self {
            points: 20,
            cap: 0.5,
            phase_budget: 1.0,
            fixed_max: None,
        }
    }
}

impl GridRule {
    pub fn g_max(&self, coupling_scale: f64, t: f64) -> f64 {
        if let Some(g) = self.fixed_max {
            return g;
        }
        let reach = coupling_scale * t.abs();
        if reach > 0.0 {
            self.cap.min(self.phase_budget / reach)
        } else {
            self.cap
        }
    }

    pub fn grid(&self, coupling_scale: f64, t: f64) -> Vec<f64> {
        let g_max = self.g_max(coupling_scale, t);
        (1..=self.points)
            .map(|i| g_max * i as f64 / self.points as f64)
            .collect()
    }
}
