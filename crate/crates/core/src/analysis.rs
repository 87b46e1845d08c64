//! Derived observables: gauge-violation measures, cumulative errors and
//! protection efficacy, survival-probability fits, and noise-strength
//! rescaling between system sizes.

use num_complex::Complex64;

use crate::{Error, Result};

/// Normalization constant `k_N = 2 sin(pi/N)` for an order-`N` symmetry
/// generator: the distance from 1 to the nearest other `N`-th root of unity.
pub fn gv_normalization(order: usize) -> f64 {
    2.0 * (std::f64::consts::PI / order as f64).sin()
}

/// Gauge violation `GV = |<Theta> - 1| / k_N` from a measured expectation
/// value of an order-`N` Gauss operator. Zero on the physical sector; equals 1
/// when the state sits entirely in the nearest violated sector.
pub fn gauge_violation_of_expectation(expectation: Complex64, order: usize) -> f64 {
    (expectation - Complex64::new(1.0, 0.0)).norm() / gv_normalization(order)
}

/// GV plateau of the maximally mixed state (`<Theta> = 0` for a fixed-point
/// free permutation): `1 / k_N`, i.e. 1/2 for reflections and `1/sqrt(3)` for
/// rotations of D3.
pub fn mixed_state_plateau(order: usize) -> f64 {
    1.0 / gv_normalization(order)
}

/// Accumulated magnetic-energy error of a run against its noiseless
/// reference: `E = sum_t |<H_B>(t) - <H_B>_ref(t)|`. NaN entries (post-failure
/// DPS slices) are skipped.
pub fn cumulative_error(reference: &[f64], series: &[f64]) -> f64 {
    reference
        .iter()
        .zip(series.iter())
        .filter(|(r, s)| r.is_finite() && s.is_finite())
        .map(|(r, s)| (s - r).abs())
        .sum()
}

/// Protection efficacy `eps = 1 - E_mitigated / E_noisy`; 1 means full
/// recovery of the noiseless signal, 0 means no improvement. Undefined when
/// the unmitigated run shows no error.
pub fn protection_efficacy(e_noisy: f64, e_mitigated: f64) -> Result<f64> {
    if e_noisy == 0.0 || !e_noisy.is_finite() {
        return Err(Error::Numerics(
            "protection efficacy undefined: unmitigated cumulative error vanishes".into(),
        ));
    }
    Ok(1.0 - e_mitigated / e_noisy)
}

/// Result of an exponential decay fit `P(t) = A exp(-rate t)`.
#[derive(Debug, Clone, Copy)]
pub struct ExpFit {
    pub rate: f64,
    pub amplitude: f64,
    pub n_points: usize,
}

/// Unweighted least-squares fit of `ln P` against `t`, restricted to the
/// window `0.05 <= P <= 1`. Requires at least five usable points.
pub fn fit_exponential_decay(times: &[f64], survival: &[f64]) -> Result<ExpFit> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(survival.iter())
        .filter(|&(_, &p)| (0.05..=1.0).contains(&p))
        .map(|(&t, &p)| (t, p.ln()))
        .collect();
    if pts.len() < 5 {
        return Err(Error::Numerics(format!(
            "exponential fit needs >= 5 points inside the window, got {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-30 {
        return Err(Error::Numerics("degenerate time axis in fit".into()));
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    Ok(ExpFit {
        rate: -slope,
        amplitude: intercept.exp(),
        n_points: pts.len(),
    })
}

/// Rescaled time axis `t -> (t/dt) f` used to collapse survival curves for
/// different noise strengths onto a single exponential.
pub fn collapsed_axis(times: &[f64], dt: f64, f: f64) -> Vec<f64> {
    times.iter().map(|&t| t / dt * f).collect()
}

/// Dephasing strength carried from one system size to another so the induced
/// per-step energy-density error is comparable: the magnetic energy scales
/// with the plaquette count, so `gamma` grows by `sqrt(n_to / n_from)`.
pub fn dephasing_gamma_rescale(gamma: f64, n_from: usize, n_to: usize) -> f64 {
    gamma * (n_to as f64 / n_from as f64).sqrt()
}
