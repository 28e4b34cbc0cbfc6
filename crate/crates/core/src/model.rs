//! Parameters, special functions and input states of the detuned nonlinear
//! Jaynes-Cummings model.
//!
//! Units: times are measured in `1/κ′` and energies in `ħκ′` whenever
//! `base_coupling` is left at 1; `ħ = 1` throughout.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest Poisson mass allowed beyond the Fock cutoff.
pub const MAX_TAIL_MASS: f64 = 1e-12;

/// Physical parameters of the driven ion plus the Fock-space truncation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Sideband order `k`.
    pub sideband_order: u32,
    /// Lamb-Dicke parameter `η`.
    pub lamb_dicke: f64,
    /// Laser detuning `Δω` from the k-th sideband.
    pub detuning: f64,
    /// Base coupling `κ′`; sets the time unit.
    pub base_coupling: f64,
    /// Dimensionless coupling scale `g`, so that `|κ| = g κ′`.
    pub coupling_scale: f64,
    /// Laser phase `θ`.
    pub laser_phase: f64,
    /// Trap position relative to the standing wave, `Δφ`.
    pub trap_position_phase: f64,
    /// Trap frequency `ν`. Interaction-picture observables do not depend on it.
    pub trap_frequency: f64,
    /// Highest Fock level kept, `N_max`.
    pub fock_cutoff: usize,
}

impl ModelParams {
    /// Standing-wave drive with `η = 0.2`, `Δω = 0.2 κ′`, `Δφ = θ = 0`,
    /// `ν = 5000 κ′`, `g = 1` and a cutoff of 40.
    pub fn trapped_ion(sideband_order: u32) -> Self {
        Self {
            sideband_order,
            lamb_dicke: 0.2,
            detuning: 0.2,
            base_coupling: 1.0,
            coupling_scale: 1.0,
            laser_phase: 0.0,
            trap_position_phase: 0.0,
            trap_frequency: 5000.0,
            fock_cutoff: 40,
        }
    }

    pub fn with_coupling_scale(mut self, g: f64) -> Self {
        self.coupling_scale = g;
        self
    }

    pub fn with_detuning(mut self, detuning: f64) -> Self {
        self.detuning = detuning;
        self
    }

    pub fn with_fock_cutoff(mut self, n_max: usize) -> Self {
        self.fock_cutoff = n_max;
        self
    }

    /// Effective coupling `|κ| = g κ′`. Negative `g` is allowed for parity checks.
    pub fn coupling(&self) -> f64 {
        self.coupling_scale * self.base_coupling
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.lamb_dicke,
            self.detuning,
            self.base_coupling,
            self.coupling_scale,
            self.laser_phase,
            self.trap_position_phase,
            self.trap_frequency,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter(
                "model parameters must be finite".into(),
            ));
        }
        if self.lamb_dicke <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "lamb_dicke must be > 0, got {}",
                self.lamb_dicke
            )));
        }
        if self.base_coupling <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "base_coupling must be > 0, got {}",
                self.base_coupling
            )));
        }
        if self.fock_cutoff < 1 {
            return Err(Error::InvalidParameter("fock_cutoff must be >= 1".into()));
        }
        Ok(())
    }
}

/// Electronic input `γ1|1⟩ + γ2|2⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElectronicAmplitudes {
    pub gamma1: C64,
    pub gamma2: C64,
}

impl ElectronicAmplitudes {
    pub fn new(gamma1: C64, gamma2: C64) -> Result<Self> {
        let norm = gamma1.norm_sqr() + gamma2.norm_sqr();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "electronic amplitudes must satisfy |γ1|² + |γ2|² = 1, got {norm}"
            )));
        }
        Ok(Self { gamma1, gamma2 })
    }

    pub fn ground() -> Self {
        Self {
            gamma1: C64::new(1.0, 0.0),
            gamma2: C64::new(0.0, 0.0),
        }
    }

    pub fn excited() -> Self {
        Self {
            gamma1: C64::new(0.0, 0.0),
            gamma2: C64::new(1.0, 0.0),
        }
    }

    /// `γ1 = e^{iπ/2}/√2`, `γ2 = 1/√2`: equal populations with a quarter-cycle
    /// relative phase, for which `⟨Ĥ_int(0)⟩ = 0`.
    pub fn quarter_phase_superposition() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            gamma1: C64::new(0.0, h),
            gamma2: C64::new(h, 0.0),
        }
    }

    pub fn excited_population(&self) -> f64 {
        self.gamma2.norm_sqr()
    }
}

/// Motional input state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionalSpec {
    Fock(usize),
    Coherent(C64),
    /// Incoherent mixture of Fock states with the given number statistics.
    NumberDistribution(Vec<f64>),
}

impl MotionalSpec {
    /// Smallest cutoff meeting the coherent-state rule, or 1 for other inputs.
    pub fn suggested_cutoff(&self) -> usize {
        match self {
            MotionalSpec::Coherent(alpha) => coherent_cutoff(alpha.norm()),
            MotionalSpec::Fock(n) => (*n).max(1),
            MotionalSpec::NumberDistribution(p) => p.len().saturating_sub(1).max(1),
        }
    }
}

/// `N_max = ceil(|α|² + 10 √max(|α|², 1) + 20)`.
pub fn coherent_cutoff(alpha_abs: f64) -> usize {
    let mean = alpha_abs * alpha_abs;
    (mean + 10.0 * mean.max(1.0).sqrt() + 20.0).ceil() as usize
}

/// Electronic level label.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Level {
    Ground,
    Excited,
}

/// Pure state on `{|1⟩, |2⟩} ⊗ {|0⟩, …, |N_max⟩}`.
///
/// Storage is level-major: ground amplitudes `0..=N_max` followed by excited
/// amplitudes `0..=N_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct VibronicState {
    n_max: usize,
    amplitudes: Vec<C64>,
}

impl VibronicState {
    pub fn zeros(n_max: usize) -> Self {
        Self {
            n_max,
            amplitudes: vec![C64::new(0.0, 0.0); 2 * (n_max + 1)],
        }
    }

    pub fn from_amplitudes(n_max: usize, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != 2 * (n_max + 1) {
            return Err(Error::InvalidParameter(format!(
                "expected {} amplitudes for N_max = {n_max}, got {}",
                2 * (n_max + 1),
                amplitudes.len()
            )));
        }
        Ok(Self { n_max, amplitudes })
    }

    pub fn basis(n_max: usize, level: Level, n: usize) -> Self {
        let mut state = Self::zeros(n_max);
        *state.amplitude_mut(level, n) = C64::new(1.0, 0.0);
        state
    }

    /// Product of an electronic superposition and a pure motional state.
    /// Mixed number distributions have no state vector and are rejected.
    pub fn product(
        electronic: &ElectronicAmplitudes,
        motional: &MotionalSpec,
        n_max: usize,
    ) -> Result<Self> {
        let motion = motional_amplitudes(motional, n_max)?;
        let mut state = Self::zeros(n_max);
        for (n, c) in motion.iter().enumerate() {
            *state.amplitude_mut(Level::Ground, n) = electronic.gamma1 * c;
            *state.amplitude_mut(Level::Excited, n) = electronic.gamma2 * c;
        }
        Ok(state)
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn index(&self, level: Level, n: usize) -> usize {
        match level {
            Level::Ground => n,
            Level::Excited => self.n_max + 1 + n,
        }
    }

    pub fn amplitude(&self, level: Level, n: usize) -> C64 {
        self.amplitudes[self.index(level, n)]
    }

    pub fn amplitude_mut(&mut self, level: Level, n: usize) -> &mut C64 {
        let i = self.index(level, n);
        &mut self.amplitudes[i]
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amplitudes
    }

    pub fn ground(&self) -> &[C64] {
        &self.amplitudes[..=self.n_max]
    }

    pub fn excited(&self) -> &[C64] {
        &self.amplitudes[self.n_max + 1..]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `σ₂₂ = ⟨Â₂₂⟩`, traced over the motion.
    pub fn excited_population(&self) -> f64 {
        self.excited().iter().map(|a| a.norm_sqr()).sum()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> C64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Generalized Laguerre polynomial `L_n^{(k)}(x)` by the three-term recurrence
/// `(m+1) L_{m+1} = (2m + 1 + k − x) L_m − (m + k) L_{m−1}`.
pub fn laguerre(n: usize, k: u32, x: f64) -> f64 {
    let alpha = f64::from(k);
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut curr = 1.0 + alpha - x;
    for m in 1..n {
        let m = m as f64;
        let next = ((2.0 * m + 1.0 + alpha - x) * curr - (m + alpha) * prev) / (m + 1.0);
        prev = curr;
        curr = next;
    }
    curr
}

/// `n!/(n+k)!` as a product of reciprocals.
pub fn factorial_ratio(n: usize, k: u32) -> f64 {
    (1..=k as usize).map(|j| 1.0 / (n + j) as f64).product()
}

/// `cos(Δφ + πk/2)`, reduced by quadrant so that standing-wave nodes are exact zeros.
pub fn standing_wave_factor(trap_position_phase: f64, k: u32) -> f64 {
    match k % 4 {
        0 => trap_position_phase.cos(),
        1 => -trap_position_phase.sin(),
        2 => -trap_position_phase.cos(),
        _ => trap_position_phase.sin(),
    }
}

fn laguerre_envelope(params: &ModelParams, n: usize) -> f64 {
    let eta = params.lamb_dicke;
    let k = params.sideband_order;
    standing_wave_factor(params.trap_position_phase, k)
        * eta.powi(k as i32)
        * (-eta * eta / 2.0).exp()
        * laguerre(n, k, eta * eta)
}

/// Diagonal Fock-basis value `f_k(n; η) = ⟨n| f̂_k(n̂; η) |n⟩` of the mode function.
pub fn mode_function(params: &ModelParams, n: usize) -> f64 {
    laguerre_envelope(params, n) * factorial_ratio(n, params.sideband_order)
}

/// Rabi weight `w_n`, the coupling between `|2, n⟩` and `|1, n+k⟩` in units of `|κ|`.
pub fn rabi_weight(params: &ModelParams, n: usize) -> f64 {
    laguerre_envelope(params, n) * factorial_ratio(n, params.sideband_order).sqrt()
}

/// Sum of `ln m` for `m = 1..=n`.
fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|m| (m as f64).ln()).sum()
}

fn poisson_ln(mean: f64, n: usize, ln_fact: f64) -> f64 {
    -mean + n as f64 * mean.ln() - ln_fact
}

/// Poisson probabilities `P_0..=P_{N_max}` for mean `|α|²`, unnormalized after
/// truncation, together with the mass beyond the cutoff.
pub fn poisson_with_tail(alpha_abs: f64, n_max: usize) -> (Vec<f64>, f64) {
    let mean = alpha_abs * alpha_abs;
    if mean == 0.0 {
        let mut p = vec![0.0; n_max + 1];
        p[0] = 1.0;
        return (p, 0.0);
    }
    let mut probs = Vec::with_capacity(n_max + 1);
    let mut ln_fact = 0.0;
    for n in 0..=n_max {
        if n > 0 {
            ln_fact += (n as f64).ln();
        }
        probs.push(poisson_ln(mean, n, ln_fact).exp());
    }

    let mut tail = 0.0;
    let mut n = n_max + 1;
    let mut ln_fact_tail = ln_factorial(n);
    loop {
        let term = poisson_ln(mean, n, ln_fact_tail).exp();
        tail += term;
        if n as f64 > mean && term <= tail * 1e-17 {
            break;
        }
        n += 1;
        ln_fact_tail += (n as f64).ln();
    }
    (probs, tail)
}

/// Number statistics `P_n`, `n = 0..=N_max`, of a motional input.
pub fn number_statistics(spec: &MotionalSpec, n_max: usize) -> Result<Vec<f64>> {
    match spec {
        MotionalSpec::Fock(n) => {
            if *n > n_max {
                return Err(Error::InvalidParameter(format!(
                    "Fock state |{n}⟩ exceeds the cutoff N_max = {n_max}"
                )));
            }
            let mut p = vec![0.0; n_max + 1];
            p[*n] = 1.0;
            Ok(p)
        }
        MotionalSpec::Coherent(alpha) => {
            let (p, tail) = poisson_with_tail(alpha.norm(), n_max);
            if tail > MAX_TAIL_MASS {
                return Err(Error::CutoffInsufficient { n_max, tail });
            }
            Ok(p)
        }
        MotionalSpec::NumberDistribution(p) => {
            validate_distribution(p, n_max)?;
            let mut padded = p.clone();
            padded.resize(n_max + 1, 0.0);
            Ok(padded)
        }
    }
}

fn validate_distribution(p: &[f64], n_max: usize) -> Result<()> {
    if p.is_empty() || p.len() > n_max + 1 {
        return Err(Error::InvalidParameter(format!(
            "number distribution has length {}, expected 1..=N_max + 1 = {}",
            p.len(),
            n_max + 1
        )));
    }
    if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidParameter(
            "number distribution entries must be finite and non-negative".into(),
        ));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParameter(format!(
            "number distribution sums to {total}, expected 1"
        )));
    }
    Ok(())
}

/// Fock amplitudes of a pure motional input.
pub fn motional_amplitudes(spec: &MotionalSpec, n_max: usize) -> Result<Vec<C64>> {
    match spec {
        MotionalSpec::Fock(n) => {
            if *n > n_max {
                return Err(Error::InvalidParameter(format!(
                    "Fock state |{n}⟩ exceeds the cutoff N_max = {n_max}"
                )));
            }
            let mut c = vec![C64::new(0.0, 0.0); n_max + 1];
            c[*n] = C64::new(1.0, 0.0);
            Ok(c)
        }
        MotionalSpec::Coherent(alpha) => {
            // Checks the tail before building amplitudes.
            number_statistics(spec, n_max)?;
            let mut c = Vec::with_capacity(n_max + 1);
            let mut current = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
            c.push(current);
            for n in 1..=n_max {
                current = current * alpha / (n as f64).sqrt();
                c.push(current);
            }
            Ok(c)
        }
        MotionalSpec::NumberDistribution(_) => Err(Error::InvalidParameter(
            "a number distribution is a mixed state and has no state vector".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    use num_bigint::BigInt;
    use num_rational::BigRational;
    use num_traits::ToPrimitive;

    /// Explicit finite series `Σ_m (−1)^m C(n+k, n−m) x^m / m!` in exact
    /// rational arithmetic, for rational `x = num/den`.
    fn laguerre_series(n: usize, k: u32, num: i64, den: i64) -> f64 {
        let x = BigRational::new(BigInt::from(num), BigInt::from(den));
        let binom = |a: usize, b: usize| -> BigInt {
            let mut acc = BigInt::from(1);
            for i in 0..b {
                acc = acc * BigInt::from(a - i) / BigInt::from(i + 1);
            }
            acc
        };
        let mut sum = BigRational::from_integer(BigInt::from(0));
        let mut x_pow_over_fact = BigRational::from_integer(BigInt::from(1));
        for m in 0..=n {
            if m > 0 {
                x_pow_over_fact = x_pow_over_fact * &x / BigRational::from_integer(BigInt::from(m));
            }
            let term = BigRational::from_integer(binom(n + k as usize, n - m)) * &x_pow_over_fact;
            if m % 2 == 0 {
                sum += term;
            } else {
                sum -= term;
            }
        }
        sum.to_f64().unwrap()
    }

    #[test]
    fn laguerre_examples() {
        assert_eq!(laguerre(0, 3, 7.5), 1.0);
        assert!((laguerre(1, 0, 0.04) - 0.96).abs() < 1e-15);
        assert!((laguerre(2, 2, 0.04) - 5.8408).abs() < 1e-12);
    }

    #[test]
    fn laguerre_matches_series() {
        for k in 0..=3 {
            for n in 0..=80 {
                for i in 0..=10 {
                    let x = i as f64 / 10.0;
                    let rec = laguerre(n, k, x);
                    let ser = laguerre_series(n, k, i, 10);
                    assert!(
                        (rec - ser).abs() <= 1e-10 * ser.abs(),
                        "n={n} k={k} x={x}: {rec} vs {ser}"
                    );
                }
            }
        }
    }

    #[test]
    fn mode_function_examples() {
        let p0 = ModelParams::trapped_ion(0);
        assert!((mode_function(&p0, 0) - 0.980_198_673_306_755_3).abs() < 1e-15);
        assert!((mode_function(&p0, 1) - 0.940_990_726_374_485_1).abs() < 1e-15);

        let p1 = ModelParams::trapped_ion(1);
        for n in 0..=p1.fock_cutoff {
            assert_eq!(mode_function(&p1, n), 0.0);
            assert_eq!(rabi_weight(&p1, n), 0.0);
        }

        let p2 = ModelParams::trapped_ion(2);
        assert!((mode_function(&p2, 0) + 0.019_603_973_466_135_106).abs() < 1e-15);
        assert!((rabi_weight(&p2, 0) + 0.027_724_205_152_210_56).abs() < 1e-15);
        assert!((rabi_weight(&p0, 0) - 0.980_198_673_306_755_3).abs() < 1e-15);
    }

    #[test]
    fn rabi_weight_relates_to_mode_function() {
        for k in 0..=3 {
            let mut p = ModelParams::trapped_ion(k);
            p.trap_position_phase = 0.3;
            p.fock_cutoff = 80;
            for n in 0..=p.fock_cutoff {
                let w = rabi_weight(&p, n);
                let f = mode_function(&p, n);
                let expected = f * f / factorial_ratio(n, k);
                assert!(
                    (w * w - expected).abs() <= 1e-12 * expected.abs(),
                    "k={k} n={n}"
                );
            }
        }
    }

    #[test]
    fn factorial_ratio_large_n() {
        let r = factorial_ratio(80, 3);
        assert!((r - 1.0 / (81.0 * 82.0 * 83.0)).abs() < 1e-20);
    }

    #[test]
    fn number_statistics_examples() {
        let p = number_statistics(&MotionalSpec::Fock(3), 10).unwrap();
        assert_eq!(p[3], 1.0);
        assert_eq!(p.iter().sum::<f64>(), 1.0);

        let p = number_statistics(&MotionalSpec::Coherent(C64::new(0.0, 0.0)), 5).unwrap();
        assert_eq!(p[0], 1.0);

        let alpha = C64::new(12f64.sqrt(), 0.0);
        let n_max = coherent_cutoff(alpha.norm());
        let p = number_statistics(&MotionalSpec::Coherent(alpha), n_max).unwrap();
        // e^{-12} 12^12 / 12!
        assert!((p[12] - 0.114_367_915_509_446_53).abs() < 1e-14);
        let (_, tail) = poisson_with_tail(alpha.norm(), n_max);
        assert!(tail < MAX_TAIL_MASS);
        assert!((p.iter().sum::<f64>() + tail - 1.0).abs() < 1e-13);
    }

    #[test]
    fn coherent_cutoff_rule() {
        assert_eq!(coherent_cutoff(12f64.sqrt()), 67);
        assert_eq!(coherent_cutoff(0.0), 30);
    }

    #[test]
    fn insufficient_cutoff_is_reported() {
        let alpha = C64::new(12f64.sqrt(), 0.0);
        let err = number_statistics(&MotionalSpec::Coherent(alpha), 20).unwrap_err();
        assert!(matches!(err, Error::CutoffInsufficient { n_max: 20, .. }));
    }

    #[test]
    fn fock_beyond_cutoff_is_rejected() {
        assert!(number_statistics(&MotionalSpec::Fock(11), 10).is_err());
    }

    #[test]
    fn distribution_validation() {
        let ok = MotionalSpec::NumberDistribution(vec![0.5, 0.5, 0.0]);
        assert_eq!(number_statistics(&ok, 2).unwrap(), vec![0.5, 0.5, 0.0]);
        let bad = MotionalSpec::NumberDistribution(vec![0.5, 0.4, 0.0]);
        assert!(number_statistics(&bad, 2).is_err());
        let short = MotionalSpec::NumberDistribution(vec![0.0, 1.0]);
        assert_eq!(number_statistics(&short, 2).unwrap(), vec![0.0, 1.0, 0.0]);
        let long = MotionalSpec::NumberDistribution(vec![0.25; 4]);
        assert!(number_statistics(&long, 2).is_err());
        assert!(number_statistics(&MotionalSpec::NumberDistribution(vec![]), 2).is_err());
    }

    #[test]
    fn electronic_normalization() {
        assert!(ElectronicAmplitudes::new(C64::new(1.0, 0.0), C64::new(1.0, 0.0)).is_err());
        let s = ElectronicAmplitudes::quarter_phase_superposition();
        assert!(ElectronicAmplitudes::new(s.gamma1, s.gamma2).is_ok());
        assert!((s.excited_population() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn product_state_is_normalized() {
        let alpha = C64::new(1.5, -0.7);
        let n_max = coherent_cutoff(alpha.norm());
        let s = VibronicState::product(
            &ElectronicAmplitudes::quarter_phase_superposition(),
            &MotionalSpec::Coherent(alpha),
            n_max,
        )
        .unwrap();
        assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
        assert!((s.excited_population() - 0.5).abs() < 1e-10);
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::trapped_ion(0).validate().is_ok());
        let mut p = ModelParams::trapped_ion(0);
        p.lamb_dicke = 0.0;
        assert!(p.validate().is_err());
        let mut p = ModelParams::trapped_ion(0);
        p.fock_cutoff = 0;
        assert!(p.validate().is_err());
    }
}
