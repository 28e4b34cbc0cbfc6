//! Exact closed-form propagation.
//!
//! The interaction couples `|2, n⟩` only to `|1, n+k⟩`, so `Û_I(t)` is a direct
//! sum of 2×2 blocks plus identities on the spectator levels `|1, q⟩`, `q < k`.
//! Within the truncated space, `|2, n⟩` with `n + k > N_max` has no partner and
//! is left untouched as well.

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::Result;
use crate::model::{
    motional_amplitudes, number_statistics, rabi_weight, ElectronicAmplitudes, Level, ModelParams,
    MotionalSpec, VibronicState,
};

/// Below this value of `|Γ t|`, `sin(Γt)/Γ` is evaluated by its Taylor series.
const SINC_SERIES_THRESHOLD: f64 = 1e-6;

/// Propagator entries of the block `(|2, n⟩, |1, n+k⟩)` at time `t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlockCoefficients {
    pub n: usize,
    pub a: C64,
    pub b: C64,
    /// Generalized Rabi frequency `Γ_n`.
    pub gamma: f64,
    pub w: f64,
}

impl BlockCoefficients {
    /// Applies the block to `(c2, c1) = (⟨2,n|ψ⟩, ⟨1,n+k|ψ⟩)`.
    #[inline]
    pub fn apply(&self, laser_phase: f64, excited: C64, ground: C64) -> (C64, C64) {
        let phase = C64::from_polar(1.0, laser_phase);
        let upper = self.a * excited + self.b * phase * ground;
        let lower = -self.b.conj() * phase.conj() * excited + self.a.conj() * ground;
        (upper, lower)
    }
}

/// `sin(Γt)/Γ`, with the `Γ → 0` limit `t`.
fn sin_over(gamma: f64, t: f64) -> f64 {
    let x = gamma * t;
    if x.abs() < SINC_SERIES_THRESHOLD {
        t * (1.0 - x * x / 6.0)
    } else {
        (gamma * t).sin() / gamma
    }
}

/// Exact `a_n(t)`, `b_n(t)`, `Γ_n` and `w_n`.
pub fn block_coeffs(params: &ModelParams, n: usize, t: f64) -> BlockCoefficients {
    let w = rabi_weight(params, n);
    let omega = params.coupling() * w;
    let half_detuning = params.detuning / 2.0;
    let gamma = (half_detuning * half_detuning + omega * omega).sqrt();
    let s = sin_over(gamma, t);
    let envelope = C64::from_polar(1.0, -half_detuning * t);
    let a = envelope * C64::new((gamma * t).cos(), half_detuning * s);
    // Ω sin(Γt) / (iΓ)
    let b = envelope * C64::new(0.0, -omega * s);
    BlockCoefficients { n, a, b, gamma, w }
}

/// Number of coupled blocks inside the truncated space.
pub fn block_count(params: &ModelParams) -> usize {
    (params.fock_cutoff + 1).saturating_sub(params.sideband_order as usize)
}

/// Applies `Û_I(t)` to `state`.
pub fn evolve(params: &ModelParams, state: &VibronicState, t: f64) -> VibronicState {
    let k = params.sideband_order as usize;
    let mut out = state.clone();
    let blocks = block_count(params).min(state.n_max() + 1);
    for n in 0..blocks {
        let c = block_coeffs(params, n, t);
        let (upper, lower) = c.apply(
            params.laser_phase,
            state.amplitude(Level::Excited, n),
            state.amplitude(Level::Ground, n + k),
        );
        *out.amplitude_mut(Level::Excited, n) = upper;
        *out.amplitude_mut(Level::Ground, n + k) = lower;
    }
    out
}

/// Exact excited-state population `σ₂₂(t)` for a product input.
///
/// Fock and coherent inputs are propagated as pure states, so motional
/// coherences between blocks are retained. A number distribution is treated as
/// the incoherent mixture `Σ_m P_m |m⟩⟨m|`.
pub fn sigma22_exact(
    params: &ModelParams,
    electronic: &ElectronicAmplitudes,
    motional: &MotionalSpec,
    t: f64,
) -> Result<f64> {
    params.validate()?;
    let n_max = params.fock_cutoff;
    match motional {
        MotionalSpec::NumberDistribution(_) => {
            let probs = number_statistics(motional, n_max)?;
            let mut sigma = 0.0;
            for (m, p) in probs.iter().enumerate() {
                if *p == 0.0 {
                    continue;
                }
                sigma += p * fock_sigma22(params, electronic, m, t);
            }
            Ok(sigma)
        }
        _ => {
            let motion = motional_amplitudes(motional, n_max)?;
            Ok(pure_sigma22(params, electronic, &motion, t))
        }
    }
}

fn pure_sigma22(
    params: &ModelParams,
    electronic: &ElectronicAmplitudes,
    motion: &[C64],
    t: f64,
) -> f64 {
    let k = params.sideband_order as usize;
    let blocks = block_count(params);
    let mut sigma = 0.0;
    for (n, c) in motion.iter().enumerate() {
        let excited = electronic.gamma2 * c;
        if n < blocks {
            let ground = electronic.gamma1 * motion[n + k];
            let (upper, _) = block_coeffs(params, n, t).apply(params.laser_phase, excited, ground);
            sigma += upper.norm_sqr();
        } else {
            sigma += excited.norm_sqr();
        }
    }
    sigma
}

/// `σ₂₂` for the pure input `(γ1|1⟩ + γ2|2⟩)|m⟩`.
fn fock_sigma22(params: &ModelParams, electronic: &ElectronicAmplitudes, m: usize, t: f64) -> f64 {
    let k = params.sideband_order as usize;
    let blocks = block_count(params);
    if k == 0 {
        // |2, m⟩ and |1, m⟩ share block m and interfere.
        return if m < blocks {
            let c = block_coeffs(params, m, t);
            c.apply(params.laser_phase, electronic.gamma2, electronic.gamma1)
                .0
                .norm_sqr()
        } else {
            electronic.gamma2.norm_sqr()
        };
    }
    // |2, m⟩ sits in block m, |1, m⟩ in block m − k; their partners are empty.
    let from_excited = if m < blocks {
        block_coeffs(params, m, t).a.norm_sqr()
    } else {
        1.0
    };
    let from_ground = if m >= k && m - k < blocks {
        block_coeffs(params, m - k, t).b.norm_sqr()
    } else {
        0.0
    };
    electronic.gamma2.norm_sqr() * from_excited + electronic.gamma1.norm_sqr() * from_ground
}

/// `σ₂₂(t)` for each coupling scale in `g_grid`, all other parameters fixed.
pub fn sigma22_series(
    params: &ModelParams,
    electronic: &ElectronicAmplitudes,
    motional: &MotionalSpec,
    t: f64,
    g_grid: &[f64],
) -> Result<Vec<f64>> {
    g_grid
        .par_iter()
        .map(|&g| {
            let p = params.clone().with_coupling_scale(g);
            sigma22_exact(&p, electronic, motional, t)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::coherent_cutoff;

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn identity_at_time_zero() {
        for k in 0..3 {
            let p = ModelParams::trapped_ion(k);
            for n in 0..10 {
                let c = block_coeffs(&p, n, 0.0);
                assert!(close(c.a, C64::new(1.0, 0.0), 1e-15));
                assert!(close(c.b, C64::new(0.0, 0.0), 1e-15));
            }
        }
    }

    #[test]
    fn zero_coupling_only_rotates_phases() {
        let p = ModelParams::trapped_ion(0).with_coupling_scale(0.0);
        for t in [0.3, 7.0, 41.0] {
            let c = block_coeffs(&p, 2, t);
            assert!((c.a.norm() - 1.0).abs() < 1e-15);
            assert_eq!(c.b, C64::new(0.0, 0.0));
            assert!((c.gamma - 0.1).abs() < 1e-15);
        }
    }

    #[test]
    fn generalized_rabi_frequency_example() {
        let p = ModelParams::trapped_ion(0);
        let c = block_coeffs(&p, 0, 1.0);
        assert!((c.gamma - 0.985_286_475_677_162_2).abs() < 1e-12);
    }

    #[test]
    fn fully_degenerate_corner() {
        let p = ModelParams::trapped_ion(0)
            .with_coupling_scale(0.0)
            .with_detuning(0.0);
        let c = block_coeffs(&p, 0, 5.0);
        assert_eq!(c.gamma, 0.0);
        assert!(close(c.a, C64::new(1.0, 0.0), 1e-15));
        assert_eq!(c.b, C64::new(0.0, 0.0));
    }

    #[test]
    fn resonant_limit_is_continuous() {
        // Γ → 0 through the series branch agrees with a small but finite Γ.
        let p = ModelParams::trapped_ion(0)
            .with_coupling_scale(1e-9)
            .with_detuning(0.0);
        let c = block_coeffs(&p, 0, 3.0);
        let omega = 1e-9 * rabi_weight(&p, 0);
        assert!((c.b.im + omega * 3.0).abs() < 1e-20);
    }

    #[test]
    fn unitarity_of_blocks() {
        for k in 0..3 {
            let p = ModelParams::trapped_ion(k).with_fock_cutoff(67);
            for n in 0..block_count(&p) {
                for i in 0..100 {
                    let t = 50.0 * i as f64 / 99.0;
                    let c = block_coeffs(&p, n, t);
                    assert!((c.a.norm_sqr() + c.b.norm_sqr() - 1.0).abs() < 1e-12);
                    assert!(c.gamma >= p.detuning.abs() / 2.0);
                }
            }
        }
    }

    #[test]
    fn spectator_levels_are_frozen() {
        let p = ModelParams::trapped_ion(2).with_fock_cutoff(10);
        for q in 0..2 {
            let s = VibronicState::basis(10, Level::Ground, q);
            for t in [0.5, 13.0, 40.0] {
                assert_eq!(evolve(&p, &s, t), s);
            }
        }
    }

    #[test]
    fn evolve_preserves_norm() {
        let alpha = C64::new(2.0, 1.0);
        let n_max = coherent_cutoff(alpha.norm());
        let p = ModelParams::trapped_ion(1).with_fock_cutoff(n_max);
        let mut p = p;
        p.trap_position_phase = 0.4;
        p.laser_phase = 0.9;
        let s = VibronicState::product(
            &ElectronicAmplitudes::quarter_phase_superposition(),
            &MotionalSpec::Coherent(alpha),
            n_max,
        )
        .unwrap();
        let out = evolve(&p, &s, 17.0);
        assert!((out.norm_sqr() - s.norm_sqr()).abs() < 1e-13);
        assert_eq!(evolve(&p, &out, 0.0), out);
    }

    #[test]
    fn sigma22_initial_values() {
        let p = ModelParams::trapped_ion(0);
        let sup = ElectronicAmplitudes::quarter_phase_superposition();
        let s = sigma22_exact(&p, &sup, &MotionalSpec::Fock(0), 0.0).unwrap();
        assert!((s - 0.5).abs() < 1e-15);

        let alpha = C64::new(12f64.sqrt(), 0.0);
        let p = ModelParams::trapped_ion(2).with_fock_cutoff(coherent_cutoff(alpha.norm()));
        let s = sigma22_exact(
            &p,
            &ElectronicAmplitudes::ground(),
            &MotionalSpec::Coherent(alpha),
            0.0,
        )
        .unwrap();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn sigma22_coherent_second_sideband_pinned() {
        // Pinned by an independent high-order ODE integration (rtol 1e-13).
        let alpha = C64::new(12f64.sqrt(), 0.0);
        let p = ModelParams::trapped_ion(2).with_fock_cutoff(coherent_cutoff(alpha.norm()));
        let s = sigma22_exact(
            &p,
            &ElectronicAmplitudes::ground(),
            &MotionalSpec::Coherent(alpha),
            40.0,
        )
        .unwrap();
        assert!((s - 0.382_302_462_184_277_8).abs() < 1e-10, "{s}");
    }

    #[test]
    fn mixture_matches_pure_fock_average() {
        for k in 0..3 {
            let p = ModelParams::trapped_ion(k).with_fock_cutoff(3);
            let sup = ElectronicAmplitudes::quarter_phase_superposition();
            let mix = MotionalSpec::NumberDistribution(vec![0.25, 0.0, 0.5, 0.25]);
            let s = sigma22_exact(&p, &sup, &mix, 6.0).unwrap();
            let s0 = sigma22_exact(&p, &sup, &MotionalSpec::Fock(0), 6.0).unwrap();
            let s2 = sigma22_exact(&p, &sup, &MotionalSpec::Fock(2), 6.0).unwrap();
            let s3 = sigma22_exact(&p, &sup, &MotionalSpec::Fock(3), 6.0).unwrap();
            assert!(
                (s - (0.25 * s0 + 0.5 * s2 + 0.25 * s3)).abs() < 1e-14,
                "k={k}"
            );
        }
    }

    #[test]
    fn pure_sigma22_matches_state_evolution() {
        let alpha = C64::new(1.2, 0.5);
        let n_max = coherent_cutoff(alpha.norm());
        let mut p = ModelParams::trapped_ion(1).with_fock_cutoff(n_max);
        p.trap_position_phase = 0.7;
        let el = ElectronicAmplitudes::new(C64::new(0.6, 0.0), C64::new(0.0, 0.8)).unwrap();
        let m = MotionalSpec::Coherent(alpha);
        let state = VibronicState::product(&el, &m, n_max).unwrap();
        for t in [1.0, 9.0, 33.0] {
            let direct = evolve(&p, &state, t).excited_population();
            let fast = sigma22_exact(&p, &el, &m, t).unwrap();
            assert!((direct - fast).abs() < 1e-14);
        }
    }

    #[test]
    fn series_matches_pointwise() {
        let p = ModelParams::trapped_ion(0).with_fock_cutoff(5);
        let el = ElectronicAmplitudes::quarter_phase_superposition();
        let m = MotionalSpec::Fock(2);
        let grid = [0.0, 0.37, 0.05, 0.37, 0.5];
        let series = sigma22_series(&p, &el, &m, 10.0, &grid).unwrap();
        assert!((series[0] - 0.5).abs() < 1e-15);
        assert_eq!(series[1], series[3]);
        for (g, s) in grid.iter().zip(&series) {
            let q = p.clone().with_coupling_scale(*g);
            assert_eq!(*s, sigma22_exact(&q, &el, &m, 10.0).unwrap());
        }
    }

    #[test]
    fn parity_in_coupling() {
        let p = ModelParams::trapped_ion(0).with_fock_cutoff(4);
        let sup = ElectronicAmplitudes::quarter_phase_superposition();
        let ground = ElectronicAmplitudes::ground();
        for i in 0..=20 {
            let g = 0.5 * i as f64 / 20.0;
            let plus = p.clone().with_coupling_scale(g);
            let minus = p.clone().with_coupling_scale(-g);
            let odd_plus = sigma22_exact(&plus, &sup, &MotionalSpec::Fock(1), 10.0).unwrap() - 0.5;
            let odd_minus =
                sigma22_exact(&minus, &sup, &MotionalSpec::Fock(1), 10.0).unwrap() - 0.5;
            assert!((odd_plus + odd_minus).abs() < 1e-12);
            let even_plus = sigma22_exact(&plus, &ground, &MotionalSpec::Fock(1), 10.0).unwrap();
            let even_minus = sigma22_exact(&minus, &ground, &MotionalSpec::Fock(1), 10.0).unwrap();
            assert!((even_plus - even_minus).abs() < 1e-12);
        }
    }
}
