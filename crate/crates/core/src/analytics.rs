//! Closed-form reference values for the interaction Hamiltonian and its
//! partly time-integrated non-equal-time commutator.
//!
//! All energies carry `ħ = 1`; with `base_coupling = 1` they are in units of `ħκ′`.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::model::{
    mode_function, number_statistics, rabi_weight, ElectronicAmplitudes, ModelParams, MotionalSpec,
};

fn require_zeroth_sideband(params: &ModelParams) -> Result<()> {
    if params.sideband_order != 0 {
        return Err(Error::WrongSideband(params.sideband_order));
    }
    Ok(())
}

fn require_detuning(params: &ModelParams) -> Result<()> {
    if params.detuning == 0.0 {
        return Err(Error::ZeroDetuning);
    }
    Ok(())
}

/// `2 Re(e^{−iΔωt + iθ} γ1 γ2*)`, the electronic factor of `⟨Ĥ_int,I(t)⟩`.
fn electronic_factor(params: &ModelParams, electronic: &ElectronicAmplitudes, t: f64) -> f64 {
    let phase = C64::from_polar(1.0, -params.detuning * t + params.laser_phase);
    2.0 * (phase * electronic.gamma1 * electronic.gamma2.conj()).re
}

/// `⟨Ĥ_int,I(0)⟩ = |κ| f_0(n; η) (γ1γ2* + γ2γ1*)` for the zeroth sideband.
pub fn h_expectation_t0(
    params: &ModelParams,
    electronic: &ElectronicAmplitudes,
    n: usize,
) -> Result<f64> {
    h_expectation_fock(params, electronic, n, 0.0)
}

/// `⟨Ĥ_int,I(t)⟩` on `(γ1|1⟩ + γ2|2⟩)|n⟩` without evolution, zeroth sideband.
pub fn h_expectation_fock(
    params: &ModelParams,
    electronic: &ElectronicAmplitudes,
    n: usize,
    t: f64,
) -> Result<f64> {
    require_zeroth_sideband(params)?;
    Ok(params.coupling() * mode_function(params, n) * electronic_factor(params, electronic, t))
}

/// `⟨Ĥ_int,I(t)⟩` for an arbitrary motional state with number statistics `P_n`.
pub fn h_expectation_general(
    params: &ModelParams,
    electronic: &ElectronicAmplitudes,
    number_stats: &[f64],
    t: f64,
) -> Result<f64> {
    require_zeroth_sideband(params)?;
    if number_stats.is_empty() || number_stats.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::InvalidParameter(
            "number statistics must be a non-empty vector of non-negative entries".into(),
        ));
    }
    let weighted: f64 = number_stats
        .iter()
        .enumerate()
        .map(|(n, p)| p * mode_function(params, n))
        .sum();
    Ok(params.coupling() * electronic_factor(params, electronic, t) * weighted)
}

/// `ħΔω [σ₂₂(t) − σ₂₂(0)]`, equal to `⟨Û†Ĥ_int,I Û⟩(t) − ⟨Ĥ_int,I⟩(0)`.
pub fn h_from_sigma22(params: &ModelParams, sigma22_t: f64, sigma22_0: f64) -> Result<f64> {
    require_detuning(params)?;
    Ok(params.detuning * (sigma22_t - sigma22_0))
}

/// `(2|κ|²/Δω)(1 − cos Δωt)`.
fn commutator_envelope(params: &ModelParams, t: f64) -> f64 {
    let kappa = params.coupling();
    2.0 * kappa * kappa / params.detuning * (1.0 - (params.detuning * t).cos())
}

/// Partly integrated commutator `i ∫₀ᵗ dτ ⟨1, α₀| [Ĥ(τ), Ĥ(t)] |1, α₀⟩` in the form
/// `(2|κ|²/Δω)(1 − cos Δωt) Σ_n |f_k(n; η)|² |α₀|^{2(n+k)} e^{−|α₀|²} / n!`.
pub fn commutator_expectation(params: &ModelParams, alpha: C64, t: f64) -> Result<f64> {
    require_detuning(params)?;
    let n_max = params.fock_cutoff;
    // Validates the cutoff against the Poisson tail.
    number_statistics(&MotionalSpec::Coherent(alpha), n_max)?;
    let k = params.sideband_order as usize;
    let mean = alpha.norm_sqr();
    let mut sum = 0.0;
    let mut ln_n_factorial = 0.0;
    for n in 0..=n_max.saturating_sub(k) {
        if n > 0 {
            ln_n_factorial += (n as f64).ln();
        }
        let weight = if mean == 0.0 {
            if n + k == 0 {
                1.0
            } else {
                0.0
            }
        } else {
            ((n + k) as f64 * mean.ln() - ln_n_factorial - mean).exp()
        };
        let f = mode_function(params, n);
        sum += f * f * weight;
    }
    Ok(commutator_envelope(params, t) * sum)
}

/// The same quantity as [`commutator_expectation`], written as
/// `(2|κ|²/Δω)(1 − cos Δωt) Σ_n w_n² P_{n+k}` with Poisson `P`.
pub fn commutator_expectation_weights(params: &ModelParams, alpha: C64, t: f64) -> Result<f64> {
    require_detuning(params)?;
    let probs = number_statistics(&MotionalSpec::Coherent(alpha), params.fock_cutoff)?;
    commutator_expectation_distribution(params, &probs, t)
}

/// `(2|κ|²/Δω)(1 − cos Δωt) Σ_n w_n² P_{n+k}` for the electronic ground state and
/// any motional state with number statistics `P`.
pub fn commutator_expectation_distribution(
    params: &ModelParams,
    number_stats: &[f64],
    t: f64,
) -> Result<f64> {
    require_detuning(params)?;
    let k = params.sideband_order as usize;
    let blocks = params.fock_cutoff + 1 - k.min(params.fock_cutoff + 1);
    let sum: f64 = number_stats
        .iter()
        .skip(k)
        .take(blocks)
        .enumerate()
        .map(|(n, p)| {
            let w = rabi_weight(params, n);
            w * w * p
        })
        .sum();
    Ok(commutator_envelope(params, t) * sum)
}
