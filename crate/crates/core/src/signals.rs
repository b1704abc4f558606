//! LO tones, IF cycle programs and sampled waveforms.
//!
//! Amplitudes on the LO and IF lines are flux amplitudes in units of the flux
//! quantum. Phases are degrees at the API boundary and radians internally.

use std::f64::consts::{FRAC_PI_4, PI, TAU};

use rustfft::{num_complex::Complex64, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Step of the quantized IF phase, in degrees.
pub const PHASE_STEP_DEG: f64 = 45.0;

const QUANTIZATION_TOL_DEG: f64 = 1e-9;

/// Wraps an angle into `[0, 2π)`.
pub fn normalize_phase(rad: f64) -> f64 {
    let r = rad.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Wraps an angle in degrees into `[0, 360)`.
pub fn normalize_deg(deg: f64) -> f64 {
    let d = deg.rem_euclid(360.0);
    if d >= 360.0 {
        0.0
    } else {
        d
    }
}

/// Degrees to radians, exact (up to the representation of π/4) for multiples of 45°.
pub fn deg_to_rad(deg: f64) -> f64 {
    let steps = deg / PHASE_STEP_DEG;
    if (steps - steps.round()).abs() < 1e-12 {
        steps.round() * FRAC_PI_4
    } else {
        deg.to_radians()
    }
}

/// Returns the number of 45° steps if `deg` is a multiple of 45°.
pub fn phase_steps(deg: f64) -> Option<i64> {
    let steps = deg / PHASE_STEP_DEG;
    let rounded = steps.round();
    ((steps - rounded).abs() * PHASE_STEP_DEG < QUANTIZATION_TOL_DEG).then_some(rounded as i64)
}

/// One microwave tone on the LO line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tone {
    pub freq_hz: f64,
    /// Flux amplitude in units of Φ0.
    pub amp_phi0: f64,
    /// Fixed phase in radians, normalized to `[0, 2π)`.
    pub phase_rad: f64,
}

impl Tone {
    pub fn new(freq_hz: f64, amp_phi0: f64, phase_rad: f64) -> Result<Self> {
        if !(freq_hz > 0.0 && freq_hz.is_finite()) {
            return Err(invalid(format!("tone frequency must be positive, got {freq_hz}")));
        }
        if !(0.0..=1.0).contains(&amp_phi0) {
            return Err(invalid(format!("tone amplitude must be in [0, 1] Φ0, got {amp_phi0}")));
        }
        if !phase_rad.is_finite() {
            return Err(invalid("tone phase must be finite"));
        }
        Ok(Self {
            freq_hz,
            amp_phi0,
            phase_rad: normalize_phase(phase_rad),
        })
    }

    pub fn from_degrees(freq_hz: f64, amp_phi0: f64, phase_deg: f64) -> Result<Self> {
        Self::new(freq_hz, amp_phi0, deg_to_rad(phase_deg))
    }
}

/// A set of tones multiplexed on one LO line, sorted by frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiToneLo {
    tones: Vec<Tone>,
}

impl MultiToneLo {
    pub fn new(tones: Vec<Tone>) -> Result<Self> {
        if let Some(w) = tones.windows(2).find(|w| w[1].freq_hz <= w[0].freq_hz) {
            return Err(invalid(format!(
                "LO tone frequencies must be strictly increasing ({} Hz then {} Hz)",
                w[0].freq_hz, w[1].freq_hz
            )));
        }
        Ok(Self { tones })
    }

    pub fn tones(&self) -> &[Tone] {
        &self.tones
    }

    pub fn len(&self) -> usize {
        self.tones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tones.is_empty()
    }

    pub fn max_freq(&self) -> f64 {
        self.tones.iter().map(|t| t.freq_hz).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeShape {
    Flat,
    Triangular,
    Gaussian,
}

/// Amplitude envelope of one IF pulse, starting at the beginning of its cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub shape: EnvelopeShape,
    pub duration_s: f64,
    /// Peak amplitude as a fraction of the maximum IF amplitude.
    pub peak: f64,
}

impl Envelope {
    pub fn new(shape: EnvelopeShape, duration_s: f64, peak: f64) -> Result<Self> {
        if !(duration_s > 0.0 && duration_s.is_finite()) {
            return Err(invalid(format!("envelope duration must be positive, got {duration_s}")));
        }
        if !(0.0..=1.0).contains(&peak) {
            return Err(invalid(format!("envelope peak must be in [0, 1], got {peak}")));
        }
        Ok(Self {
            shape,
            duration_s,
            peak,
        })
    }

    pub fn flat(duration_s: f64, peak: f64) -> Result<Self> {
        Self::new(EnvelopeShape::Flat, duration_s, peak)
    }

    pub fn triangular(duration_s: f64, peak: f64) -> Result<Self> {
        Self::new(EnvelopeShape::Triangular, duration_s, peak)
    }

    /// Envelope value at time `t` measured from the pulse start; zero outside the pulse.
    pub fn value_at(&self, t: f64) -> f64 {
        if t < 0.0 || t > self.duration_s {
            return 0.0;
        }
        let x = t / self.duration_s;
        match self.shape {
            EnvelopeShape::Flat => self.peak,
            EnvelopeShape::Triangular => self.peak * (1.0 - (2.0 * x - 1.0).abs()),
            EnvelopeShape::Gaussian => {
                // σ = duration / 6, truncated at ±3σ
                let u = (x - 0.5) * 6.0;
                self.peak * (-0.5 * u * u).exp()
            }
        }
    }
}

/// Phase discipline of an IF program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseMode {
    /// θ_if restricted to multiples of 45°.
    #[default]
    Quantized,
    Free,
}

/// One control cycle: a global IF phase and an optional pulse envelope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleSpec {
    pub theta_if_deg: f64,
    pub envelope: Option<Envelope>,
}

impl CycleSpec {
    pub fn pulse(theta_if_deg: f64, envelope: Envelope) -> Self {
        Self {
            theta_if_deg,
            envelope: Some(envelope),
        }
    }

    pub fn idle(theta_if_deg: f64) -> Self {
        Self {
            theta_if_deg,
            envelope: None,
        }
    }

    pub fn theta_if_rad(&self) -> f64 {
        deg_to_rad(self.theta_if_deg)
    }
}

/// The shared IF line: one carrier frequency and a per-cycle phase/envelope schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IfProgram {
    pub f_if_hz: f64,
    pub cycle_period_s: f64,
    pub mode: PhaseMode,
    pub cycles: Vec<CycleSpec>,
}

/// Validates and builds an IF program. Cycle `i` starts at `i * cycle_period_s`.
pub fn make_if_program(
    f_if_hz: f64,
    cycle_period_s: f64,
    cycles: Vec<CycleSpec>,
    mode: PhaseMode,
) -> Result<IfProgram> {
    if !(f_if_hz > 0.0 && f_if_hz.is_finite()) {
        return Err(invalid(format!("IF frequency must be positive, got {f_if_hz}")));
    }
    if !(cycle_period_s > 0.0 && cycle_period_s.is_finite()) {
        return Err(invalid(format!("cycle period must be positive, got {cycle_period_s}")));
    }
    for c in &cycles {
        if !c.theta_if_deg.is_finite() {
            return Err(invalid("IF phase must be finite"));
        }
        if mode == PhaseMode::Quantized && phase_steps(c.theta_if_deg).is_none() {
            return Err(Error::UnquantizedPhase {
                theta_deg: c.theta_if_deg,
            });
        }
        if let Some(env) = &c.envelope {
            // relative slack for periods computed as sums of floats
            if env.duration_s > cycle_period_s * (1.0 + 1e-12) {
                return Err(Error::EnvelopeTooLong {
                    duration_s: env.duration_s,
                    period_s: cycle_period_s,
                });
            }
        }
    }
    Ok(IfProgram {
        f_if_hz,
        cycle_period_s,
        mode,
        cycles,
    })
}

impl IfProgram {
    pub fn duration_s(&self) -> f64 {
        self.cycles.len() as f64 * self.cycle_period_s
    }

    /// Index of the cycle active at `t` (cycles are half-open `[start, end)`).
    pub fn cycle_index_at(&self, t: f64) -> Option<usize> {
        if t < 0.0 {
            return None;
        }
        let i = (t / self.cycle_period_s).floor() as usize;
        (i < self.cycles.len()).then_some(i)
    }

    /// θ_if(t) in radians; right-continuous and piecewise constant.
    pub fn theta_at(&self, t: f64) -> Option<f64> {
        self.cycle_index_at(t).map(|i| self.cycles[i].theta_if_rad())
    }

    /// IF envelope A(t) in `[0, 1]`.
    pub fn envelope_at(&self, t: f64) -> f64 {
        match self.cycle_index_at(t) {
            Some(i) => {
                let local = t - i as f64 * self.cycle_period_s;
                self.cycles[i]
                    .envelope
                    .map_or(0.0, |env| env.value_at(local))
            }
            None => 0.0,
        }
    }
}

/// Uniformly sampled real waveform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledWaveform {
    pub sample_rate_hz: f64,
    pub t0_s: f64,
    pub samples: Vec<f64>,
}

impl SampledWaveform {
    /// Builds a waveform, checking that `sample_rate_hz` exceeds twice `max_freq_hz`.
    pub fn new(sample_rate_hz: f64, t0_s: f64, samples: Vec<f64>, max_freq_hz: f64) -> Result<Self> {
        check_nyquist(sample_rate_hz, max_freq_hz)?;
        Ok(Self {
            sample_rate_hz,
            t0_s,
            samples,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time_of(&self, k: usize) -> f64 {
        self.t0_s + k as f64 / self.sample_rate_hz
    }

    /// One-sided power spectrum `(freq_hz, power_db)` normalized so that a unit
    /// amplitude sinusoid centred on a bin reads 0 dB.
    pub fn power_spectrum(&self) -> Vec<(f64, f64)> {
        let n = self.samples.len();
        if n == 0 {
            return Vec::new();
        }
        let mut buf: Vec<Complex64> = self.samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let df = self.sample_rate_hz / n as f64;
        (0..=n / 2)
            .map(|k| {
                let amp = 2.0 * buf[k].norm() / n as f64;
                (k as f64 * df, 20.0 * amp.max(1e-300).log10())
            })
            .collect()
    }

    /// Local maxima of the power spectrum within `range_db` of the strongest bin.
    pub fn spectral_peaks(&self, range_db: f64) -> Vec<(f64, f64)> {
        let spec = self.power_spectrum();
        let top = spec.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        (0..spec.len())
            .filter(|&k| {
                let p = spec[k].1;
                p >= top - range_db
                    && (k == 0 || p > spec[k - 1].1)
                    && (k + 1 == spec.len() || p >= spec[k + 1].1)
            })
            .map(|k| spec[k])
            .collect()
    }
}

pub(crate) fn check_nyquist(rate_hz: f64, max_freq_hz: f64) -> Result<()> {
    if !(rate_hz > 2.0 * max_freq_hz) || !rate_hz.is_finite() {
        return Err(Error::Nyquist {
            rate_hz,
            max_freq_hz,
        });
    }
    Ok(())
}

/// Samples `I_lo(t)` and `I_if(t)` over the program duration.
pub fn synthesize(
    lo: &MultiToneLo,
    prog: &IfProgram,
    rate_hz: f64,
) -> Result<(SampledWaveform, SampledWaveform)> {
    let max_freq = lo.max_freq().max(prog.f_if_hz);
    check_nyquist(rate_hz, max_freq)?;
    let n = (prog.duration_s() * rate_hz).round() as usize;
    let times: Vec<f64> = (0..n).map(|k| k as f64 / rate_hz).collect();

    let lo_samples = times
        .iter()
        .map(|&t| {
            lo.tones()
                .iter()
                .map(|tone| tone.amp_phi0 * (TAU * tone.freq_hz * t + tone.phase_rad).cos())
                .sum()
        })
        .collect();
    let if_samples = times
        .iter()
        .map(|&t| match prog.theta_at(t) {
            Some(theta) => prog.envelope_at(t) * (TAU * prog.f_if_hz * t + theta).cos(),
            None => 0.0,
        })
        .collect();

    Ok((
        SampledWaveform::new(rate_hz, 0.0, lo_samples, max_freq)?,
        SampledWaveform::new(rate_hz, 0.0, if_samples, max_freq)?,
    ))
}

/// Degrees in `[0, 360)` for a radian phase.
pub fn rad_to_deg(rad: f64) -> f64 {
    normalize_deg(rad * 180.0 / PI)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rolling_cycles(n: usize, env: Envelope) -> Vec<CycleSpec> {
        (0..n)
            .map(|i| CycleSpec::pulse(normalize_deg(45.0 * i as f64), env))
            .collect()
    }

    #[test]
    fn rolling_program_over_nine_cycles() {
        let env = Envelope::triangular(15e-9, 1.0).unwrap();
        let prog = make_if_program(3.5e9, 15e-9, rolling_cycles(9, env), PhaseMode::Quantized).unwrap();
        assert_eq!(prog.cycles.len(), 9);
        assert_eq!(prog.cycles[8].theta_if_deg, 0.0);
        assert!((prog.duration_s() - 135e-9).abs() < 1e-20);
        // cycle i starts at i * period
        assert_eq!(prog.cycle_index_at(15e-9), Some(1));
        assert_eq!(prog.cycle_index_at(15e-9 - 1e-15), Some(0));
    }

    #[test]
    fn empty_program_has_zero_duration() {
        let prog = make_if_program(3.5e9, 15e-9, vec![], PhaseMode::Quantized).unwrap();
        assert_eq!(prog.duration_s(), 0.0);
        assert_eq!(prog.theta_at(0.0), None);
    }

    #[test]
    fn quantized_mode_rejects_thirty_degrees() {
        let err = make_if_program(3.5e9, 15e-9, vec![CycleSpec::idle(30.0)], PhaseMode::Quantized);
        assert!(matches!(err, Err(Error::UnquantizedPhase { .. })));
        assert!(make_if_program(3.5e9, 15e-9, vec![CycleSpec::idle(30.0)], PhaseMode::Free).is_ok());
    }

    #[test]
    fn envelope_longer_than_cycle_is_rejected() {
        let env = Envelope::flat(20e-9, 1.0).unwrap();
        let err = make_if_program(3.5e9, 15e-9, vec![CycleSpec::pulse(0.0, env)], PhaseMode::Free);
        assert!(matches!(err, Err(Error::EnvelopeTooLong { .. })));
    }

    #[test]
    fn tone_and_envelope_invariants() {
        assert!(Tone::new(0.0, 0.5, 0.0).is_err());
        assert!(Tone::new(8e9, 1.5, 0.0).is_err());
        let t = Tone::new(8e9, 0.5, -FRAC_PI_4).unwrap();
        assert!((t.phase_rad - 7.0 * FRAC_PI_4).abs() < 1e-15);
        assert!(MultiToneLo::new(vec![t, t]).is_err());
        assert!(Envelope::flat(0.0, 0.5).is_err());
        assert!(Envelope::flat(1e-9, 1.1).is_err());

        let tri = Envelope::triangular(10e-9, 0.8).unwrap();
        assert!((tri.value_at(5e-9) - 0.8).abs() < 1e-15);
        assert!((tri.value_at(2.5e-9) - tri.value_at(7.5e-9)).abs() < 1e-15);
        assert_eq!(tri.value_at(11e-9), 0.0);
        let g = Envelope::new(EnvelopeShape::Gaussian, 10e-9, 1.0).unwrap();
        assert!((g.value_at(5e-9) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn quarter_turn_conversion_is_exact() {
        for k in 0..8 {
            assert_eq!(deg_to_rad(45.0 * k as f64), k as f64 * FRAC_PI_4);
        }
        assert_eq!(phase_steps(135.0), Some(3));
        assert_eq!(phase_steps(30.0), None);
    }

    #[test]
    fn single_tone_peak_sample() {
        let lo = MultiToneLo::new(vec![Tone::new(8e9, 0.5, 0.0).unwrap()]).unwrap();
        let prog = make_if_program(1e9, 1e-9, vec![CycleSpec::idle(0.0)], PhaseMode::Quantized).unwrap();
        let (ilo, _) = synthesize(&lo, &prog, 64e9).unwrap();
        let peak = ilo.samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!((peak - 0.5).abs() < 1e-15);
    }

    #[test]
    fn flat_if_at_ninety_degrees_starts_at_zero() {
        let lo = MultiToneLo::new(vec![Tone::new(8e9, 0.5, 0.0).unwrap()]).unwrap();
        let env = Envelope::flat(10e-9, 1.0).unwrap();
        let prog = make_if_program(3.5e9, 10e-9, vec![CycleSpec::pulse(90.0, env)], PhaseMode::Quantized).unwrap();
        let (_, iif) = synthesize(&lo, &prog, 64e9).unwrap();
        assert!(iif.samples[0].abs() < 1e-15);
    }

    #[test]
    fn synthesize_rejects_undersampling() {
        let lo = MultiToneLo::new(vec![Tone::new(8e9, 0.5, 0.0).unwrap()]).unwrap();
        let prog = make_if_program(3.5e9, 1e-9, vec![CycleSpec::idle(0.0)], PhaseMode::Quantized).unwrap();
        assert!(matches!(synthesize(&lo, &prog, 16e9), Err(Error::Nyquist { .. })));
    }

    #[test]
    fn theta_is_cycle_local() {
        let env = Envelope::flat(15e-9, 1.0).unwrap();
        let mut cycles = rolling_cycles(4, env);
        let prog_a = make_if_program(3.5e9, 15e-9, cycles.clone(), PhaseMode::Quantized).unwrap();
        cycles[2].theta_if_deg = 270.0;
        let prog_b = make_if_program(3.5e9, 15e-9, cycles, PhaseMode::Quantized).unwrap();
        for k in 0..60 {
            let t = k as f64 * 1e-9;
            if prog_a.cycle_index_at(t) != Some(2) {
                assert_eq!(prog_a.theta_at(t), prog_b.theta_at(t));
            }
        }
    }
}
