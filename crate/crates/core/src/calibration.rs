//! Pulse calibration against the simulated qubit.
//!
//! A coarse scan plus bisection brings a single pulse near its target angle,
//! then error amplification (3, 5 and 9 repeated pulses) refines it. A stage
//! is kept only if it lowers the single-pulse angle error.

use std::f64::consts::PI;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mixer::{amplitude_map, baseband_output, BitTimeline, DriveEnvelope, MixerConfig};
use crate::qubit::fit::{fit_curve, FitModel};
use crate::qubit::{auto_dt, evolve, propagate, DensityMatrix, QubitParams};
use crate::signals::{make_if_program, CycleSpec, Envelope, EnvelopeShape, PhaseMode};

/// Largest allowed `|f_lo - f_if - f_qubit|` for a calibrated pulse.
pub const MAX_DETUNING_HZ: f64 = 10e3;
/// Samples per pulse for shaped envelopes (flat pulses use one).
pub const SHAPED_PULSE_SAMPLES: usize = 64;
/// Error-amplification sequence lengths.
pub const AMPLIFICATION_LENGTHS: [usize; 3] = [3, 5, 9];
/// Single-pulse angle error required of a closed-system calibration.
pub const ANGLE_TOLERANCE_RAD: f64 = 1e-4;

const COARSE_POINTS: usize = 41;
const COARSE_BISECTIONS: usize = 10;
const FINE_ITERATIONS: usize = 50;
const ROOT_MODE_MIN_SLOPE: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratedPulse {
    pub f_lo_hz: f64,
    pub f_if_hz: f64,
    pub a_if: f64,
    pub tau_s: f64,
    pub target_angle_rad: f64,
    pub shape: EnvelopeShape,
    /// Single-pulse angle error after each accepted stage.
    #[serde(default)]
    pub history: Vec<f64>,
}

impl CalibratedPulse {
    /// Drive envelope of this pulse at IF phase `theta_if_deg`, with the
    /// carrier raised by `detuning_hz` and the mixer bit set to `bit`.
    pub fn drive(&self, cfg: &MixerConfig, theta_if_deg: f64, detuning_hz: f64, bit: bool) -> Result<DriveEnvelope> {
        if (cfg.channel.freq_hz - self.f_lo_hz).abs() > 1e-3 {
            return Err(invalid(format!(
                "pulse was calibrated for LO {} Hz but the mixer sees {} Hz",
                self.f_lo_hz, cfg.channel.freq_hz
            )));
        }
        pulse_drive(cfg, self.f_if_hz - detuning_hz, self.shape, self.tau_s, self.a_if, theta_if_deg, bit)
    }

    pub fn angle_error_rad(&self) -> Option<f64> {
        self.history.last().copied()
    }
}

/// Single-cycle IF pulse passed through the mixer.
pub fn pulse_drive(
    cfg: &MixerConfig,
    f_if_hz: f64,
    shape: EnvelopeShape,
    tau_s: f64,
    a_if: f64,
    theta_if_deg: f64,
    bit: bool,
) -> Result<DriveEnvelope> {
    let env = Envelope::new(shape, tau_s, a_if)?;
    let prog = make_if_program(f_if_hz, tau_s, vec![CycleSpec::pulse(theta_if_deg, env)], PhaseMode::Free)?;
    let samples = match shape {
        EnvelopeShape::Flat => 1,
        _ => SHAPED_PULSE_SAMPLES,
    };
    baseband_output(cfg, &prog, &BitTimeline::all(bit, 1), samples)
}

/// Applies `drive` `n` times in a row.
pub fn repeat_pulse(q: &QubitParams, drive: &DriveEnvelope, rho0: &DensityMatrix, n: usize) -> Result<DensityMatrix> {
    let dt = auto_dt(q, drive, f64::INFINITY);
    let mut rho = *rho0;
    for _ in 0..n {
        rho = propagate(q, drive, &rho, dt, false)?.final_state;
    }
    Ok(rho)
}

/// Polar angle of the Bloch vector: 0 at `|0⟩`, π at `|1⟩`.
pub fn polar_angle(rho: &DensityMatrix) -> f64 {
    let [x, y, z] = rho.bloch();
    x.hypot(y).atan2(z)
}

/// The pulse parameter held fixed during calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fixed {
    /// Fixed duration in seconds; the amplitude is calibrated.
    Duration(f64),
    /// Fixed amplitude; the duration is calibrated.
    Amplitude(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSetup {
    pub f_if_hz: f64,
    pub shape: EnvelopeShape,
    pub theta_if_deg: f64,
}

impl PulseSetup {
    /// Resonant IF for `q` behind mixer `cfg`.
    pub fn resonant(cfg: &MixerConfig, q: &QubitParams, shape: EnvelopeShape) -> Self {
        Self {
            f_if_hz: cfg.channel.freq_hz - q.freq_hz,
            shape,
            theta_if_deg: 0.0,
        }
    }
}

/// Mean of the envelope over its duration relative to its peak.
fn shape_area(shape: EnvelopeShape) -> f64 {
    match shape {
        EnvelopeShape::Flat => 1.0,
        EnvelopeShape::Triangular => 0.5,
        EnvelopeShape::Gaussian => {
            let env = Envelope::new(shape, 1.0, 1.0).expect("unit envelope");
            let n = 1000;
            (0..n).map(|k| env.value_at((k as f64 + 0.5) / n as f64)).sum::<f64>() / n as f64
        }
    }
}

struct Search<'a> {
    q: &'a QubitParams,
    cfg: &'a MixerConfig,
    setup: &'a PulseSetup,
    fixed: Fixed,
}

impl Search<'_> {
    fn pulse(&self, x: f64) -> Result<DriveEnvelope> {
        let (tau, a) = match self.fixed {
            Fixed::Duration(tau) => (tau, x),
            Fixed::Amplitude(a) => (x, a),
        };
        pulse_drive(self.cfg, self.setup.f_if_hz, self.setup.shape, tau, a, self.setup.theta_if_deg, true)
    }

    fn state(&self, x: f64, n: usize) -> Result<DensityMatrix> {
        if x == 0.0 {
            return Ok(DensityMatrix::ground());
        }
        repeat_pulse(self.q, &self.pulse(x)?, &DensityMatrix::ground(), n)
    }

    fn angle(&self, x: f64) -> Result<f64> {
        Ok(polar_angle(&self.state(x, 1)?))
    }

    fn p1(&self, x: f64, n: usize) -> Result<f64> {
        Ok(self.state(x, n)?.p1())
    }
}

/// Calibrates a pulse of rotation `target_angle_rad ∈ [0, π]`.
pub fn calibrate_pulse(
    q: &QubitParams,
    cfg: &MixerConfig,
    target_angle_rad: f64,
    fixed: Fixed,
    setup: &PulseSetup,
) -> Result<CalibratedPulse> {
    if !(0.0..=PI).contains(&target_angle_rad) {
        return Err(invalid(format!("target angle must be in [0, π], got {target_angle_rad}")));
    }
    let detuning = cfg.channel.freq_hz - setup.f_if_hz - q.freq_hz;
    if detuning.abs() > MAX_DETUNING_HZ {
        return Err(invalid(format!(
            "drive is {detuning} Hz off the qubit; calibration needs a resonant IF"
        )));
    }
    let x_hi = match fixed {
        Fixed::Duration(tau) => {
            if !(tau > 0.0) {
                return Err(invalid("fixed duration must be positive"));
            }
            1.0
        }
        Fixed::Amplitude(a) => {
            if !(a > 0.0 && a <= 1.0) {
                return Err(invalid("fixed amplitude must be in (0, 1]"));
            }
            let rate = cfg.lo_drive_factor() * amplitude_map(cfg, a)? * shape_area(setup.shape);
            if rate <= 0.0 {
                return Err(Error::Unreachable("mixer produces no drive".into()));
            }
            // twice the closed-form estimate of the duration for the target
            2.0 * PI.max(target_angle_rad) / (2.0 * PI * rate)
        }
    };
    let finish = |x: f64, history: Vec<f64>| {
        let (tau, a) = match fixed {
            Fixed::Duration(tau) => (tau, x),
            Fixed::Amplitude(a) => (x, a),
        };
        CalibratedPulse {
            f_lo_hz: cfg.channel.freq_hz,
            f_if_hz: setup.f_if_hz,
            a_if: a,
            tau_s: tau,
            target_angle_rad,
            shape: setup.shape,
            history,
        }
    };
    if target_angle_rad == 0.0 {
        return match fixed {
            Fixed::Duration(_) => Ok(finish(0.0, vec![0.0])),
            Fixed::Amplitude(_) => Err(invalid("a zero rotation has no duration at fixed amplitude")),
        };
    }

    let search = Search { q, cfg, setup, fixed };
    let target = target_angle_rad;
    let near_pi = target > PI - 1e-6;

    // coarse: first crossing of the target angle (or first p1 peak for π)
    let grid: Vec<f64> = (0..COARSE_POINTS)
        .map(|k| x_hi * k as f64 / (COARSE_POINTS - 1) as f64)
        .collect();
    let mut x = if near_pi {
        let p: Vec<f64> = grid.iter().map(|&x| search.p1(x, 1)).collect::<Result<_>>()?;
        let k = (1..COARSE_POINTS)
            .find(|&k| k + 1 == COARSE_POINTS || p[k] >= p[k + 1])
            .unwrap_or(COARSE_POINTS - 1);
        let hi = grid[(k + 1).min(COARSE_POINTS - 1)];
        golden_section(grid[k - 1], hi, 2 * COARSE_BISECTIONS, |x| Ok(-search.p1(x, 1)?))?
    } else {
        let mut prev = 0.0;
        let mut bracket = None;
        for &g in &grid[1..] {
            if search.angle(g)? >= target {
                bracket = Some((prev, g));
                break;
            }
            prev = g;
        }
        let (lo, hi) = bracket.ok_or_else(|| {
            Error::Unreachable(format!("rotation {target} rad needs more than the available drive"))
        })?;
        bisect(lo, hi, COARSE_BISECTIONS, |x| Ok(search.angle(x)? - target))?
    };
    let error = |x: f64| -> Result<f64> { Ok(search.angle(x)? - target) };
    let mut err = error(x)?;
    if near_pi && err.abs() > 0.05 && (x_hi - x) < x_hi / COARSE_POINTS as f64 {
        return Err(Error::Unreachable(format!("rotation {target} rad needs more than the available drive")));
    }
    let mut history = vec![err.abs()];

    // fine: error amplification
    for n in AMPLIFICATION_LENGTHS {
        let total = n as f64 * target;
        let w = x * (PI / 4.0) / total;
        let (lo, hi) = ((x - w).max(0.0), (x + w).min(x_hi));
        let candidate = if total.sin().abs() > ROOT_MODE_MIN_SLOPE {
            let goal = (total / 2.0).sin().powi(2);
            let g = |x: f64| -> Result<f64> { Ok((search.p1(x, n)? - goal) * total.sin().signum()) };
            if g(lo)?.signum() == g(hi)?.signum() {
                break;
            }
            bisect(lo, hi, FINE_ITERATIONS, g)?
        } else if total.cos() < 0.0 {
            golden_section(lo, hi, FINE_ITERATIONS, |x| Ok(-search.p1(x, n)?))?
        } else {
            golden_section(lo, hi, FINE_ITERATIONS, |x| search.p1(x, n))?
        };
        let e = error(candidate)?;
        if e.abs() < err.abs() {
            x = candidate;
            err = e;
            history.push(err.abs());
        } else {
            break;
        }
    }

    if q.is_closed() && err.abs() > ANGLE_TOLERANCE_RAD {
        return Err(Error::NonConvergence(format!(
            "single-pulse angle error {err:e} rad after error amplification"
        )));
    }
    Ok(finish(x, history))
}

/// Root of an increasing-through-zero `f` on `[lo, hi]`.
fn bisect(mut lo: f64, mut hi: f64, iters: usize, f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let f_lo = f(lo)?;
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (f(mid)? < 0.0) == (f_lo < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Minimizer of a unimodal `f` on `[lo, hi]`.
fn golden_section(mut lo: f64, mut hi: f64, iters: usize, f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - r * (hi - lo);
    let mut b = lo + r * (hi - lo);
    let (mut fa, mut fb) = (f(a)?, f(b)?);
    for _ in 0..iters {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - r * (hi - lo);
            fa = f(a)?;
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + r * (hi - lo);
            fb = f(b)?;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Fitted Rabi frequency of a flat drive at amplitude `a_if` with the mixer
/// bit set to `bit`, observed over about three expected periods.
pub fn rabi_frequency(q: &QubitParams, cfg: &MixerConfig, f_if_hz: f64, a_if: f64, bit: bool) -> Result<f64> {
    let expected = cfg.lo_drive_factor() * amplitude_map(cfg, a_if)? * if bit { 1.0 } else { cfg.residual() };
    if expected <= 0.0 {
        return Err(Error::FitFailed("no drive: Rabi frequency is not observable".into()));
    }
    let points = 96;
    let window = 3.0 / expected;
    let probe = pulse_drive(cfg, f_if_hz, EnvelopeShape::Flat, window, a_if, 0.0, bit)?;
    let interval = window / points as f64;
    let drive = DriveEnvelope {
        samples: vec![probe.samples[0]; points],
        rate_hz: 1.0 / interval,
        ..probe
    };
    let dt = auto_dt(q, &drive, f64::INFINITY);
    let traj = evolve(q, &drive, &DensityMatrix::ground(), dt)?;
    let stride = ((interval / dt).round() as usize).max(1);
    let (t, p): (Vec<f64>, Vec<f64>) = traj
        .times
        .iter()
        .zip(&traj.p1)
        .step_by(stride)
        .map(|(t, p)| (*t, *p))
        .unzip();
    let fit = fit_curve(FitModel::RabiSinusoid, &t, &p)?;
    Ok(fit.freq_hz().expect("sinusoid has a frequency"))
}

/// `(A_if, Ω_off/Ω_on)` over `a_grid`. Points whose fits fail are dropped with a warning.
pub fn residual_ratio(q: &QubitParams, cfg: &MixerConfig, f_if_hz: f64, a_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    if let Some(a) = a_grid.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(invalid(format!("IF amplitude {a} outside [0, 1]")));
    }
    let mut out = Vec::with_capacity(a_grid.len());
    for &a in a_grid {
        let on = match rabi_frequency(q, cfg, f_if_hz, a, true) {
            Ok(f) => f,
            Err(e) if e.is_numerical() => {
                warn!("dropping A_if = {a}: on-state fit failed ({e})");
                continue;
            }
            Err(e) => return Err(e),
        };
        if cfg.residual() == 0.0 {
            out.push((a, 0.0));
            continue;
        }
        match rabi_frequency(q, cfg, f_if_hz, a, false) {
            Ok(off) => out.push((a, off / on)),
            Err(e) if e.is_numerical() => warn!("dropping A_if = {a}: off-state fit failed ({e})"),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demux::ChannelTone;
    use crate::mixer::Nonlinearity;

    const F_Q: f64 = 4.53202e9;

    fn mixer(nl: Nonlinearity, gain: f64) -> MixerConfig {
        let ch = ChannelTone {
            freq_hz: 8.0e9,
            amp_phi0: 0.5,
            phase_rad: 0.0,
        };
        MixerConfig::new(ch, gain, 28.5, nl, 60.0).unwrap()
    }

    fn calibrate(nl: Nonlinearity, target: f64) -> CalibratedPulse {
        let q = QubitParams::closed(F_Q).unwrap();
        let cfg = mixer(nl, 20e6);
        let setup = PulseSetup::resonant(&cfg, &q, EnvelopeShape::Flat);
        calibrate_pulse(&q, &cfg, target, Fixed::Duration(25e-9), &setup).unwrap()
    }

    #[test]
    fn linear_half_pi_inverts_in_closed_form() {
        let p = calibrate(Nonlinearity::Linear, PI / 2.0);
        assert!((p.a_if - 0.5).abs() < 1e-4, "a = {}", p.a_if);
        assert!(p.angle_error_rad().unwrap() < ANGLE_TOLERANCE_RAD);
    }

    #[test]
    fn sine_half_pi_inverts_arcsine() {
        let p = calibrate(Nonlinearity::SineSaturating, PI / 2.0);
        let expected = 2.0 / PI * 0.5f64.asin();
        assert!((p.a_if - expected).abs() < 1e-4, "a = {}", p.a_if);
    }

    #[test]
    fn pi_pulse_reaches_excited_state() {
        let p = calibrate(Nonlinearity::SineSaturating, PI);
        assert!(p.angle_error_rad().unwrap() < ANGLE_TOLERANCE_RAD);
    }

    #[test]
    fn zero_target_is_zero_amplitude() {
        assert_eq!(calibrate(Nonlinearity::Linear, 0.0).a_if, 0.0);
    }

    #[test]
    fn unreachable_target() {
        let q = QubitParams::closed(F_Q).unwrap();
        let cfg = mixer(Nonlinearity::Linear, 1e6);
        let setup = PulseSetup::resonant(&cfg, &q, EnvelopeShape::Flat);
        let err = calibrate_pulse(&q, &cfg, PI / 2.0, Fixed::Duration(25e-9), &setup);
        assert!(matches!(err, Err(Error::Unreachable(_))));
    }

    #[test]
    fn fixed_amplitude_calibrates_duration() {
        let q = QubitParams::closed(F_Q).unwrap();
        let cfg = mixer(Nonlinearity::Linear, 20e6);
        let setup = PulseSetup::resonant(&cfg, &q, EnvelopeShape::Flat);
        let p = calibrate_pulse(&q, &cfg, PI / 2.0, Fixed::Amplitude(0.5), &setup).unwrap();
        assert!((p.tau_s - 25e-9).abs() < 1e-12, "tau = {}", p.tau_s);
    }

    #[test]
    fn error_history_decreases() {
        let p = calibrate(Nonlinearity::SineSaturating, PI / 2.0);
        assert!(p.history.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn zero_residual_gives_zero_ratio() {
        let q = QubitParams::closed(F_Q).unwrap();
        let cfg = mixer(Nonlinearity::SineSaturating, 10e6).with_residual(0.0).unwrap();
        let r = residual_ratio(&q, &cfg, 8.0e9 - F_Q, &[0.5, 1.0]).unwrap();
        assert_eq!(r, vec![(0.5, 0.0), (1.0, 0.0)]);
    }

    #[test]
    fn zero_amplitude_point_is_dropped() {
        let q = QubitParams::closed(F_Q).unwrap();
        let cfg = mixer(Nonlinearity::SineSaturating, 10e6).with_residual(0.05).unwrap();
        let r = residual_ratio(&q, &cfg, 8.0e9 - F_Q, &[0.0, 1.0]).unwrap();
        assert_eq!(r.len(), 1);
        assert!((r[0].1 - 0.05).abs() < 5e-3);
    }
}
