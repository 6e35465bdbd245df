//! Local energy per orientation and the noise-compensated total energy map.

use std::f64::consts::PI;

use crate::error::{FilerError, Result};
use crate::filterbank::{amplitude, ResponseStack};
use crate::imagecore::ScalarField;

/// Per-orientation local energy plus the amplitude sums that normalize it.
#[derive(Debug, Clone)]
pub struct OrientedEnergy {
    pub energy: Vec<ScalarField>,
    pub sum_amplitude: ScalarField,
    pub per_orient_amp: Vec<ScalarField>,
}

impl OrientedEnergy {
    pub fn n_orients(&self) -> usize {
        self.energy.len()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.sum_amplitude.dims()
    }
}

/// How `Energy_o - T0` is made non-negative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Rectification {
    /// `max(Energy_o - T0, 0)`: sub-threshold energy is discarded.
    #[default]
    Clamp,
    /// `|Energy_o - T0|`, as the formula is printed.
    Absolute,
}

impl Rectification {
    #[inline]
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Rectification::Clamp => v.max(0.0),
            Rectification::Absolute => v.abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyParams {
    pub k_noise: f64,
    pub spread_cutoff: f64,
    pub spread_gain: f64,
    pub epsilon: f64,
    pub rectification: Rectification,
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self {
            k_noise: 2.0,
            spread_cutoff: 0.5,
            spread_gain: 10.0,
            epsilon: 1e-4,
            rectification: Rectification::Clamp,
        }
    }
}

/// Total energy map with the ingredients that produced it.
#[derive(Debug, Clone)]
pub struct EnergyMaps {
    pub et: ScalarField,
    pub weights: Vec<ScalarField>,
    pub noise_thresholds: Vec<f64>,
    pub epsilon: f64,
}

/// `Energy_o = sqrt((sum_s E_so)^2 + (sum_s O_so)^2)`.
pub fn local_energy(stack: &ResponseStack) -> Result<OrientedEnergy> {
    let (w, h) = stack.dims().ok_or(FilerError::EmptyStack)?;
    let mut energy = Vec::with_capacity(stack.n_orients());
    let mut per_orient_amp = Vec::with_capacity(stack.n_orients());
    let mut sum_amplitude = ScalarField::zeros(w, h);
    for o in 0..stack.n_orients() {
        let mut sum_e = ScalarField::zeros(w, h);
        let mut sum_o = ScalarField::zeros(w, h);
        let mut amp = ScalarField::zeros(w, h);
        for s in 0..stack.n_scales() {
            let e = stack.even(s, o)?;
            let od = stack.odd(s, o)?;
            let a = amplitude(stack, s, o)?;
            for i in 0..w * h {
                sum_e.data_mut()[i] += e.data()[i];
                sum_o.data_mut()[i] += od.data()[i];
                amp.data_mut()[i] += a.data()[i];
            }
        }
        for (acc, &a) in sum_amplitude.data_mut().iter_mut().zip(amp.data()) {
            *acc += a;
        }
        energy.push(sum_e.zip_map(&sum_o, |a, b| (a * a + b * b).sqrt())?);
        per_orient_amp.push(amp);
    }
    Ok(OrientedEnergy {
        energy,
        sum_amplitude,
        per_orient_amp,
    })
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    let mid = v.len() / 2;
    let (_, m, _) = v.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    let upper = *m;
    if v.len() % 2 == 1 {
        upper
    } else {
        let lower = v[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// Noise threshold for one orientation.
///
/// The smallest-scale amplitude of pure noise is Rayleigh distributed; its
/// median gives the Rayleigh parameter `tau = median / sqrt(ln 4)`. Noise
/// amplitude at coarser scales falls off by `1 / scale_mult` per scale, so the
/// parameter of the summed energy is `tau * sum_s scale_mult^-s`. The
/// threshold is the mean plus `k_noise` standard deviations of that Rayleigh.
pub fn estimate_noise_threshold(stack: &ResponseStack, o: usize, k_noise: f64, scale_mult: f64) -> Result<f64> {
    if stack.is_empty() {
        return Err(FilerError::EmptyStack);
    }
    let finest = amplitude(stack, 0, o)?;
    let tau = median(finest.data()) / (4.0f64).ln().sqrt();
    let total_tau: f64 = (0..stack.n_scales()).map(|s| scale_mult.powi(-(s as i32))).sum::<f64>() * tau;
    let mean = total_tau * (PI / 2.0).sqrt();
    let sigma = total_tau * ((4.0 - PI) / 2.0).sqrt();
    Ok((mean + k_noise * sigma).max(0.0))
}

/// Sigmoid weight on the spread of amplitude across scales.
///
/// `spread = sum_s Am / (N_s (max_s Am + eps))`, weight
/// `1 / (1 + exp(gain (cutoff - spread)))`.
pub fn frequency_spread_weight(
    stack: &ResponseStack,
    cutoff: f64,
    gain: f64,
    epsilon: f64,
) -> Result<Vec<ScalarField>> {
    let (w, h) = stack.dims().ok_or(FilerError::EmptyStack)?;
    let n_s = stack.n_scales() as f64;
    let mut weights = Vec::with_capacity(stack.n_orients());
    for o in 0..stack.n_orients() {
        let mut sum = ScalarField::zeros(w, h);
        let mut max = ScalarField::zeros(w, h);
        for s in 0..stack.n_scales() {
            let a = amplitude(stack, s, o)?;
            for (i, &v) in a.data().iter().enumerate() {
                sum.data_mut()[i] += v;
                let m = &mut max.data_mut()[i];
                *m = m.max(v);
            }
        }
        let weight = sum.zip_map(&max, |s, m| {
            let spread = s / (n_s * (m + epsilon));
            1.0 / (1.0 + (gain * (cutoff - spread)).exp())
        })?;
        weights.push(weight);
    }
    Ok(weights)
}

/// `ET = sum_o W_o rect(Energy_o - T0_o) / (sum_s sum_o Am + eps)`.
pub fn total_energy(
    oe: &OrientedEnergy,
    weights: &[ScalarField],
    thresholds: &[f64],
    epsilon: f64,
    rectification: Rectification,
) -> Result<ScalarField> {
    let n_o = oe.n_orients();
    if weights.len() != n_o || thresholds.len() != n_o {
        return Err(FilerError::DimensionMismatch {
            expected: (n_o, n_o),
            actual: (weights.len(), thresholds.len()),
        });
    }
    let (w, h) = oe.dims();
    let mut numer = ScalarField::zeros(w, h);
    for o in 0..n_o {
        oe.sum_amplitude.ensure_same_dims(&weights[o])?;
        oe.sum_amplitude.ensure_same_dims(&oe.energy[o])?;
        let t0 = thresholds[o];
        let wt = weights[o].data();
        let en = oe.energy[o].data();
        for (i, acc) in numer.data_mut().iter_mut().enumerate() {
            *acc += wt[i] * rectification.apply(en[i] - t0);
        }
    }
    numer.zip_map(&oe.sum_amplitude, |n, a| n / (a + epsilon))
}

/// Runs the whole energy stage with the given parameters.
pub fn energy_maps(
    stack: &ResponseStack,
    params: &EnergyParams,
    scale_mult: f64,
) -> Result<(OrientedEnergy, EnergyMaps)> {
    let oe = local_energy(stack)?;
    let weights = frequency_spread_weight(stack, params.spread_cutoff, params.spread_gain, params.epsilon)?;
    let thresholds = (0..stack.n_orients())
        .map(|o| estimate_noise_threshold(stack, o, params.k_noise, scale_mult))
        .collect::<Result<Vec<_>>>()?;
    let et = total_energy(&oe, &weights, &thresholds, params.epsilon, params.rectification)?;
    Ok((
        oe,
        EnergyMaps {
            et,
            weights,
            noise_thresholds: thresholds,
            epsilon: params.epsilon,
        },
    ))
}
