//! Coherence and phase experiments built from calibrated pulses and idle delays.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{fit_curve, FitModel, FitResult};
use super::{propagate_segments, DensityMatrix, QubitParams};
use crate::calibration::CalibratedPulse;
use crate::error::{invalid, Result};
use crate::mixer::{DriveEnvelope, MixerConfig};

/// Upper bound on the integration step during free evolution.
pub const MAX_IDLE_STEP_S: f64 = 20e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ExperimentKind {
    /// π pulse, then delay.
    T1,
    /// π/2, delay, π/2 with the drive raised by `detuning_hz` above the qubit.
    Ramsey { detuning_hz: f64 },
    /// π/2, delay/2, π, delay/2, π/2.
    Echo,
    /// Two π/2 pulses `delay_s` apart, the second with its IF phase shifted by Δθ.
    VzRamsey { delay_s: f64 },
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::T1 => "t1",
            ExperimentKind::Ramsey { .. } => "ramsey",
            ExperimentKind::Echo => "echo",
            ExperimentKind::VzRamsey { .. } => "vz-ramsey",
        }
    }

    /// Column name of the swept variable.
    pub fn x_label(&self) -> &'static str {
        match self {
            ExperimentKind::VzRamsey { .. } => "dtheta_deg",
            _ => "t_s",
        }
    }

    /// Model used to extract the experiment's figure of merit.
    pub fn fit_model(&self) -> FitModel {
        match self {
            ExperimentKind::Ramsey { detuning_hz } if *detuning_hz != 0.0 => FitModel::DampedCosine,
            ExperimentKind::VzRamsey { .. } => FitModel::RabiSinusoid,
            _ => FitModel::ExpDecay,
        }
    }
}

/// One qubit with its mixer and calibrated pulses.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveSetup {
    pub qubit: QubitParams,
    pub mixer: MixerConfig,
    pub half_pi: CalibratedPulse,
    pub pi: CalibratedPulse,
}

impl DriveSetup {
    pub fn new(qubit: QubitParams, mixer: MixerConfig, half_pi: CalibratedPulse, pi: CalibratedPulse) -> Result<Self> {
        let near = |p: &CalibratedPulse, angle: f64| (p.target_angle_rad - angle).abs() < 1e-9;
        if !near(&half_pi, std::f64::consts::FRAC_PI_2) || !near(&pi, std::f64::consts::PI) {
            return Err(invalid("experiments need calibrated π/2 and π pulses"));
        }
        Ok(Self {
            qubit,
            mixer,
            half_pi,
            pi,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentCurve {
    pub kind: ExperimentKind,
    /// Delays in seconds, or Δθ in degrees for the virtual-Z Ramsey.
    pub x: Vec<f64>,
    pub p1: Vec<f64>,
}

impl ExperimentCurve {
    pub fn fit(&self) -> Result<FitResult> {
        fit_curve(self.kind.fit_model(), &self.x, &self.p1)
    }
}

fn idle(carrier_hz: f64, duration_s: f64) -> Option<DriveEnvelope> {
    (duration_s > 0.0).then(|| DriveEnvelope::idle(carrier_hz, 1.0 / duration_s, 1))
}

/// Final excited population of one experiment shot at sweep value `x`.
pub fn run_point(kind: ExperimentKind, setup: &DriveSetup, x: f64) -> Result<f64> {
    let cfg = &setup.mixer;
    let detuning = match kind {
        ExperimentKind::Ramsey { detuning_hz } => detuning_hz,
        _ => 0.0,
    };
    if kind.x_label() == "t_s" && !(x >= 0.0) {
        return Err(invalid(format!("delay must be non-negative, got {x}")));
    }
    let half = setup.half_pi.drive(cfg, 0.0, detuning, true)?;
    let carrier = half.carrier_hz;
    let mut segments = Vec::new();
    match kind {
        ExperimentKind::T1 => {
            segments.push(setup.pi.drive(cfg, 0.0, 0.0, true)?);
            segments.extend(idle(carrier, x));
        }
        ExperimentKind::Ramsey { .. } => {
            segments.push(half.clone());
            segments.extend(idle(carrier, x));
            segments.push(half);
        }
        ExperimentKind::Echo => {
            segments.push(half.clone());
            segments.extend(idle(carrier, x / 2.0));
            segments.push(setup.pi.drive(cfg, 0.0, 0.0, true)?);
            segments.extend(idle(carrier, x / 2.0));
            segments.push(half);
        }
        ExperimentKind::VzRamsey { delay_s } => {
            segments.push(half);
            segments.extend(idle(carrier, delay_s));
            segments.push(setup.half_pi.drive(cfg, x, 0.0, true)?);
        }
    }
    let rho = propagate_segments(&setup.qubit, &segments, &DensityMatrix::ground(), MAX_IDLE_STEP_S)?;
    Ok(rho.p1())
}

/// Runs `kind` over the sweep values `xs`; points are simulated in parallel.
pub fn run_experiment(kind: ExperimentKind, setup: &DriveSetup, xs: &[f64]) -> Result<ExperimentCurve> {
    if xs.is_empty() {
        return Err(invalid("experiment sweep is empty"));
    }
    let p1 = xs
        .par_iter()
        .map(|&x| run_point(kind, setup, x))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentCurve {
        kind,
        x: xs.to_vec(),
        p1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::{calibrate_pulse, Fixed, PulseSetup};
    use crate::demux::ChannelTone;
    use crate::mixer::Nonlinearity;
    use crate::signals::EnvelopeShape;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn setup(q: QubitParams) -> DriveSetup {
        let ch = ChannelTone {
            freq_hz: 8.0e9,
            amp_phi0: 0.5,
            phase_rad: 0.0,
        };
        let cfg = MixerConfig::new(ch, 20e6, 28.5, Nonlinearity::SineSaturating, 60.0).unwrap();
        let closed = QubitParams::closed(q.freq_hz).unwrap();
        let ps = PulseSetup::resonant(&cfg, &q, EnvelopeShape::Flat);
        let half = calibrate_pulse(&closed, &cfg, FRAC_PI_2, Fixed::Duration(25e-9), &ps).unwrap();
        let pi = calibrate_pulse(&closed, &cfg, PI, Fixed::Duration(25e-9), &ps).unwrap();
        DriveSetup::new(q, cfg, half, pi).unwrap()
    }

    #[test]
    fn vz_ramsey_trivial_points() {
        let s = setup(QubitParams::closed(4.53202e9).unwrap());
        let kind = ExperimentKind::VzRamsey { delay_s: 100e-9 };
        let c = run_experiment(kind, &s, &[0.0, 90.0, 180.0]).unwrap();
        assert!((c.p1[0] - 1.0).abs() < 1e-6);
        assert!((c.p1[1] - 0.5).abs() < 1e-6);
        assert!(c.p1[2].abs() < 1e-6);
    }

    #[test]
    fn ramsey_without_dephasing_decays_at_twice_t1() {
        let q = QubitParams::new(4.53202e9, 25.3e-6, f64::INFINITY).unwrap();
        let s = setup(q);
        let xs: Vec<f64> = (0..40).map(|k| k as f64 * 2.5e-6).collect();
        let c = run_experiment(ExperimentKind::Ramsey { detuning_hz: 0.0 }, &s, &xs).unwrap();
        let t2 = c.fit().unwrap().decay_time_s().unwrap();
        assert!((t2 / (2.0 * 25.3e-6) - 1.0).abs() < 0.02, "T2 = {t2}");
    }

    #[test]
    fn t1_curve_starts_excited() {
        let q = QubitParams::new(4.53202e9, 25.3e-6, 30e-6).unwrap();
        let c = run_experiment(ExperimentKind::T1, &setup(q), &[0.0, 25.3e-6]).unwrap();
        assert!(c.p1[0] > 0.99);
        assert!((c.p1[1] - (-1f64).exp()).abs() < 0.01);
    }

    #[test]
    fn rejects_uncalibrated_pulse_set() {
        let s = setup(QubitParams::closed(4.53202e9).unwrap());
        assert!(DriveSetup::new(s.qubit, s.mixer, s.pi.clone(), s.pi.clone()).is_err());
        assert!(run_experiment(ExperimentKind::T1, &s, &[]).is_err());
        assert!(run_experiment(ExperimentKind::T1, &s, &[-1e-6]).is_err());
    }
}
