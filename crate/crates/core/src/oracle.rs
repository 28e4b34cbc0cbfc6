//! Brute-force validators that share no code path with the closed form.
//!
//! The interaction Hamiltonian is applied by composing ladder operators, the
//! mode-function diagonal and the electronic flip in the full truncated basis.
//! Time ordering is enforced by integrating the Schrödinger equation directly
//! with an embedded Runge-Kutta pair, and the commutator term is obtained by
//! adaptive quadrature over matrix elements.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::model::{mode_function, Level, ModelParams, VibronicState};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// `â` on a truncated Fock vector.
fn annihilate(v: &[C64]) -> Vec<C64> {
    let mut out = vec![ZERO; v.len()];
    for m in 0..v.len().saturating_sub(1) {
        out[m] = v[m + 1] * ((m + 1) as f64).sqrt();
    }
    out
}

/// `â†` on a truncated Fock vector; population pushed past `N_max` is dropped.
fn create(v: &[C64]) -> Vec<C64> {
    let mut out = vec![ZERO; v.len()];
    for m in 1..v.len() {
        out[m] = v[m - 1] * (m as f64).sqrt();
    }
    out
}

/// `Ĥ_int,I(t) |ψ⟩` with `ħ = 1`:
/// `|κ| e^{−iΔωt + iθ} Â₂₁ f̂_k â^k + H.c.`
pub fn apply_hamiltonian(params: &ModelParams, t: f64, state: &VibronicState) -> VibronicState {
    let n_max = state.n_max();
    let k = params.sideband_order as usize;
    let kappa = params.coupling();
    let forward = C64::from_polar(kappa, -params.detuning * t + params.laser_phase);
    let mode: Vec<f64> = (0..=n_max).map(|n| mode_function(params, n)).collect();

    // Â₂₁ f̂ â^k acting on the ground manifold.
    let mut lowered = state.ground().to_vec();
    for _ in 0..k {
        lowered = annihilate(&lowered);
    }
    // Â₁₂ â†^k f̂ acting on the excited manifold.
    let mut raised: Vec<C64> = state
        .excited()
        .iter()
        .zip(&mode)
        .map(|(c, f)| c * f)
        .collect();
    for _ in 0..k {
        raised = create(&raised);
    }

    let mut out = VibronicState::zeros(n_max);
    for n in 0..=n_max {
        *out.amplitude_mut(Level::Excited, n) = forward * mode[n] * lowered[n];
        *out.amplitude_mut(Level::Ground, n) = forward.conj() * raised[n];
    }
    out
}

/// `⟨ψ| Ĥ_int,I(t) |ψ⟩` (real up to rounding).
pub fn hamiltonian_expectation(params: &ModelParams, state: &VibronicState, t: f64) -> f64 {
    state.inner(&apply_hamiltonian(params, t, state)).re
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
/// Fifth-order minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// `dψ/dt = −i Ĥ_int,I(t) ψ`.
fn derivative(params: &ModelParams, t: f64, y: &[C64], n_max: usize) -> Vec<C64> {
    let state = VibronicState::from_amplitudes(n_max, y.to_vec()).expect("dimension fixed");
    let mut h = apply_hamiltonian(params, t, &state);
    for v in h.amplitudes_mut() {
        *v = C64::new(v.im, -v.re);
    }
    h.amplitudes().to_vec()
}

fn check_tolerance(tol: f64) -> Result<()> {
    if !(1e-13..=1e-6).contains(&tol) {
        return Err(Error::InvalidParameter(format!(
            "integration tolerance must lie in [1e-13, 1e-6], got {tol:e}"
        )));
    }
    Ok(())
}

/// Integrates `i ∂_t |ψ⟩ = Ĥ_int,I(t) |ψ⟩` from 0 to `t` with adaptive steps.
pub fn integrate_schrodinger(
    params: &ModelParams,
    state0: &VibronicState,
    t: f64,
    tol: f64,
) -> Result<VibronicState> {
    let mut out = integrate_schrodinger_grid(params, state0, &[t], tol)?;
    Ok(out.pop().expect("one time requested"))
}

/// Integrates along one trajectory and returns the state at each time of the
/// non-decreasing, non-negative grid `times`.
pub fn integrate_schrodinger_grid(
    params: &ModelParams,
    state0: &VibronicState,
    times: &[f64],
    tol: f64,
) -> Result<Vec<VibronicState>> {
    check_tolerance(tol)?;
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter(
            "integration times must be finite, non-negative and non-decreasing".into(),
        ));
    }
    let n_max = state0.n_max();
    let dim = state0.amplitudes().len();
    let mut y = state0.amplitudes().to_vec();
    let mut t = 0.0;
    let rate = params.coupling().abs() + params.detuning.abs() + 1e-3;
    let mut h = 0.01 / rate;
    let mut k1 = derivative(params, t, &y, n_max);
    let mut out = Vec::with_capacity(times.len());

    let mut stages: Vec<Vec<C64>> = vec![vec![ZERO; dim]; 7];
    let mut y_stage = vec![ZERO; dim];
    for &target in times {
        while t < target {
            let step = h.min(target - t);
            if step < 1e-14 * t.max(1.0) && target - t > step {
                return Err(Error::StepSizeUnderflow { t, h: step });
            }
            stages[0].clone_from(&k1);
            for s in 1..7 {
                for i in 0..dim {
                    let mut acc = ZERO;
                    for (j, a) in A[s].iter().enumerate().take(s) {
                        if *a != 0.0 {
                            acc += stages[j][i] * *a;
                        }
                    }
                    y_stage[i] = y[i] + acc * step;
                }
                stages[s] = derivative(params, t + C[s] * step, &y_stage, n_max);
            }
            // Stage 7 was evaluated at the fifth-order solution (FSAL).
            let mut err_norm: f64 = 0.0;
            for i in 0..dim {
                let mut err = ZERO;
                for (j, e) in E.iter().enumerate() {
                    if *e != 0.0 {
                        err += stages[j][i] * *e;
                    }
                }
                let scale = tol + tol * y[i].norm().max(y_stage[i].norm());
                err_norm = err_norm.max((err * step).norm() / scale);
            }
            if err_norm <= 1.0 {
                t += step;
                std::mem::swap(&mut y, &mut y_stage);
                k1.clone_from(&stages[6]);
                if target - t < 1e-15 * target.max(1.0) {
                    t = target;
                }
            }
            let factor = if err_norm == 0.0 {
                5.0
            } else {
                0.9 * err_norm.powf(-0.2)
            };
            let new_h = step * factor.clamp(0.2, 5.0);
            // A step clipped at the target is not evidence for a smaller h.
            if err_norm <= 1.0 && step < h {
                h = h.max(new_h);
            } else {
                h = new_h;
            }
            if h < 1e-14 * t.max(1.0) {
                return Err(Error::StepSizeUnderflow { t, h });
            }
        }
        out.push(VibronicState::from_amplitudes(n_max, y.clone())?);
    }
    Ok(out)
}

/// Perturbative order of [`dyson_term`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DysonOrder {
    /// `⟨Ĥ_int,I(t)⟩`, the `O(|κ|)` term of the evolved Hamiltonian.
    First,
    /// `(i/ħ) ∫₀ᵗ dτ ⟨[Ĥ_int,I(τ), Ĥ_int,I(t)]⟩`, the `O(|κ|²)` term.
    Second,
}

/// Expansion term of `⟨Û†(t) Ĥ_int,I(t) Û(t)⟩` on `state0`, by direct
/// evaluation (first order) or adaptive quadrature of commutator matrix
/// elements (second order).
pub fn dyson_term(
    params: &ModelParams,
    order: DysonOrder,
    state0: &VibronicState,
    t: f64,
    quadrature_tol: f64,
) -> Result<C64> {
    if !t.is_finite() || t < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "time must be >= 0, got {t}"
        )));
    }
    if quadrature_tol.is_nan() || quadrature_tol <= 0.0 {
        return Err(Error::InvalidParameter(
            "quadrature tolerance must be > 0".into(),
        ));
    }
    match order {
        DysonOrder::First => Ok(state0.inner(&apply_hamiltonian(params, t, state0))),
        DysonOrder::Second => {
            if t == 0.0 {
                return Ok(ZERO);
            }
            let h_t = apply_hamiltonian(params, t, state0);
            // ⟨ψ|[H(τ), H(t)]|ψ⟩ = ⟨H(τ)ψ|H(t)ψ⟩ − ⟨H(t)ψ|H(τ)ψ⟩
            let integrand = |tau: f64| {
                let h_tau = apply_hamiltonian(params, tau, state0);
                let forward = h_tau.inner(&h_t);
                C64::new(0.0, 1.0) * (forward - forward.conj())
            };
            adaptive_kronrod(integrand, 0.0, t, quadrature_tol)
        }
    }
}

const KRONROD_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const KRONROD_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
/// Seven-point Gauss weights for Kronrod nodes 1, 3, 5 and the centre.
const GAUSS_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

struct Panel {
    a: f64,
    b: f64,
    value: C64,
    abs_value: f64,
    error: f64,
}

fn kronrod_panel<F: Fn(f64) -> C64>(f: &F, a: f64, b: f64) -> Panel {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_centre = f(centre);
    let mut kronrod = f_centre * KRONROD_WEIGHTS[7];
    let mut gauss = f_centre * GAUSS_WEIGHTS[3];
    let mut abs_value = f_centre.norm() * KRONROD_WEIGHTS[7];
    for i in 0..7 {
        let dx = half * KRONROD_NODES[i];
        let (lo, hi) = (f(centre - dx), f(centre + dx));
        kronrod += (lo + hi) * KRONROD_WEIGHTS[i];
        abs_value += (lo.norm() + hi.norm()) * KRONROD_WEIGHTS[i];
        if i % 2 == 1 {
            gauss += (lo + hi) * GAUSS_WEIGHTS[i / 2];
        }
    }
    Panel {
        a,
        b,
        value: kronrod * half,
        abs_value: abs_value * half.abs(),
        error: ((kronrod - gauss) * half).norm(),
    }
}

/// Globally adaptive Gauss-Kronrod (7, 15) quadrature. Converges when the
/// summed error estimate drops below `tol · ∫|f|`.
pub(crate) fn adaptive_kronrod<F: Fn(f64) -> C64>(f: F, a: f64, b: f64, tol: f64) -> Result<C64> {
    const MAX_PANELS: usize = 4096;
    let mut panels = vec![kronrod_panel(&f, a, b)];
    loop {
        let error: f64 = panels.iter().map(|p| p.error).sum();
        let scale: f64 = panels.iter().map(|p| p.abs_value).sum();
        if !error.is_finite() || !scale.is_finite() {
            return Err(Error::QuadratureNotConverged {
                error_estimate: error,
                tolerance: tol * scale,
            });
        }
        if error <= tol * scale || error == 0.0 {
            return Ok(panels.iter().map(|p| p.value).sum());
        }
        if panels.len() >= MAX_PANELS {
            return Err(Error::QuadratureNotConverged {
                error_estimate: error,
                tolerance: tol * scale,
            });
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .expect("non-empty");
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        panels.push(kronrod_panel(&f, p.a, mid));
        panels.push(kronrod_panel(&f, mid, p.b));
    }
}
