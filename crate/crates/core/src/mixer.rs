//! Behavioral model of one AQFP mixer.
//!
//! The mixer multiplies its channel LO tone with the shared IF line and keeps
//! the difference product at `f_lo - f_if`, whose phase is `-θ_if` plus the
//! channel LO phase. The digital input selects constructive (on) or
//! destructive (off) interference between the two AQFPs; the off state leaves
//! a coherent residual `ε = 10^(-R/20)`.
//!
//! Drive levels are flux amplitudes in Φ0 up to this module and become Rabi
//! rates (Hz) on the way out.

use std::f64::consts::{FRAC_PI_2, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::demux::ChannelTone;
use crate::error::{invalid, Error, Result};
use crate::signals::{check_nyquist, EnvelopeShape, IfProgram};

/// LO flux at which `gain_hz` is specified.
pub const NOMINAL_LO_FLUX_PHI0: f64 = 0.5;
/// Simulated maximum output power of one mixer at 5 GHz, in watts.
pub const MAX_OUTPUT_POWER_W: f64 = 4.11e-12;
/// The same figure in dBm.
pub const MAX_OUTPUT_POWER_DBM: f64 = -83.9;
/// Logic value of the fixed input `I_fix`.
pub const FIXED_BIT: bool = true;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Nonlinearity {
    Linear,
    #[default]
    SineSaturating,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixerConfig {
    pub channel: ChannelTone,
    /// Peak Rabi rate at `A_if = 1` and nominal LO flux, in Hz.
    pub gain_hz: f64,
    pub on_off_ratio_db: f64,
    pub nonlinearity: Nonlinearity,
    pub bpf_stopband_db: f64,
}

impl MixerConfig {
    pub fn new(
        channel: ChannelTone,
        gain_hz: f64,
        on_off_ratio_db: f64,
        nonlinearity: Nonlinearity,
        bpf_stopband_db: f64,
    ) -> Result<Self> {
        if !(gain_hz > 0.0 && gain_hz.is_finite()) {
            return Err(invalid(format!("mixer gain must be positive, got {gain_hz}")));
        }
        if !(on_off_ratio_db > 0.0) {
            return Err(invalid(format!("on/off ratio must be positive, got {on_off_ratio_db} dB")));
        }
        if !(bpf_stopband_db >= 0.0) {
            return Err(invalid(format!("BPF stopband must be non-negative, got {bpf_stopband_db} dB")));
        }
        if !(channel.freq_hz > 0.0) || !(0.0..=1.0).contains(&channel.amp_phi0) {
            return Err(invalid("mixer channel tone must have positive frequency and amplitude in [0, 1]"));
        }
        Ok(Self {
            channel,
            gain_hz,
            on_off_ratio_db,
            nonlinearity,
            bpf_stopband_db,
        })
    }

    /// Same mixer with the off-state residual set directly (`ε = 0` disables it).
    pub fn with_residual(mut self, eps: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&eps) {
            return Err(invalid(format!("off-state residual must be in [0, 1), got {eps}")));
        }
        self.on_off_ratio_db = if eps == 0.0 {
            f64::INFINITY
        } else {
            -20.0 * eps.log10()
        };
        Ok(self)
    }

    /// Off-state amplitude relative to the on state.
    pub fn residual(&self) -> f64 {
        10f64.powf(-self.on_off_ratio_db / 20.0)
    }

    /// Scale of the output with the channel LO flux; saturates at the nominal flux.
    pub fn lo_drive_factor(&self) -> f64 {
        (self.channel.amp_phi0 / NOMINAL_LO_FLUX_PHI0).min(1.0)
    }

    /// Peak Rabi rate reachable with this channel, in Hz.
    pub fn peak_rabi_hz(&self) -> f64 {
        self.gain_hz * self.lo_drive_factor()
    }

    fn switch_factor(&self, bit: bool) -> f64 {
        if bit == FIXED_BIT {
            1.0
        } else {
            self.residual()
        }
    }
}

/// Per-cycle digital inputs `a_i` of one mixer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitTimeline {
    pub bits: Vec<bool>,
}

impl BitTimeline {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn all(on: bool, n: usize) -> Self {
        Self { bits: vec![on; n] }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

/// Complex baseband drive seen by a qubit, in the frame rotating at `carrier_hz`.
///
/// Sample `k` holds its value over `[t0 + k/rate, t0 + (k+1)/rate)` and is the
/// envelope evaluated at that interval's midpoint. Magnitudes are Rabi rates in Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveEnvelope {
    pub carrier_hz: f64,
    pub samples: Vec<Complex64>,
    pub rate_hz: f64,
    pub t0_s: f64,
}

impl DriveEnvelope {
    /// A drive that is off for `n` samples.
    pub fn idle(carrier_hz: f64, rate_hz: f64, n: usize) -> Self {
        Self {
            carrier_hz,
            samples: vec![Complex64::new(0.0, 0.0); n],
            rate_hz,
            t0_s: 0.0,
        }
    }

    /// A constant drive of Rabi rate `rabi_hz` and phase `phase_rad`.
    pub fn constant(carrier_hz: f64, rabi_hz: f64, phase_rad: f64, rate_hz: f64, n: usize) -> Self {
        Self {
            carrier_hz,
            samples: vec![Complex64::from_polar(rabi_hz, phase_rad); n],
            rate_hz,
            t0_s: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_interval_s(&self) -> f64 {
        1.0 / self.rate_hz
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.rate_hz
    }

    pub fn max_rabi_hz(&self) -> f64 {
        self.samples.iter().map(|s| s.norm()).fold(0.0, f64::max)
    }

    /// Envelope value at absolute time `t` (zero outside the record).
    pub fn value_at(&self, t: f64) -> Complex64 {
        let k = ((t - self.t0_s) * self.rate_hz).floor();
        if k < 0.0 || k as usize >= self.samples.len() {
            Complex64::new(0.0, 0.0)
        } else {
            self.samples[k as usize]
        }
    }
}

/// Rabi rate (Hz) produced at IF amplitude `a_if`, before switching and LO scaling.
pub fn amplitude_map(cfg: &MixerConfig, a_if: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&a_if) {
        return Err(invalid(format!("IF amplitude must be in [0, 1], got {a_if}")));
    }
    Ok(match cfg.nonlinearity {
        Nonlinearity::Linear => cfg.gain_hz * a_if,
        Nonlinearity::SineSaturating => cfg.gain_hz * (FRAC_PI_2 * a_if).sin(),
    })
}

/// Difference frequency `f_lo - f_if`; must be positive.
pub fn carrier_hz(cfg: &MixerConfig, prog: &IfProgram) -> Result<f64> {
    let carrier = cfg.channel.freq_hz - prog.f_if_hz;
    if !(carrier > 0.0) {
        return Err(invalid(format!(
            "IF frequency {} Hz must be below the LO tone {} Hz",
            prog.f_if_hz, cfg.channel.freq_hz
        )));
    }
    Ok(carrier)
}

/// Complex drive envelope produced by the mixer for a gated IF program.
///
/// Each cycle is sampled at `samples_per_cycle` interval midpoints.
pub fn baseband_output(
    cfg: &MixerConfig,
    prog: &IfProgram,
    bits: &BitTimeline,
    samples_per_cycle: usize,
) -> Result<DriveEnvelope> {
    if bits.len() != prog.cycles.len() {
        return Err(Error::LengthMismatch {
            expected: prog.cycles.len(),
            got: bits.len(),
        });
    }
    if samples_per_cycle == 0 {
        return Err(invalid("samples_per_cycle must be at least 1"));
    }
    let carrier = carrier_hz(cfg, prog)?;
    let dt = prog.cycle_period_s / samples_per_cycle as f64;
    let lo = cfg.lo_drive_factor();

    let mut samples = Vec::with_capacity(prog.cycles.len() * samples_per_cycle);
    for (cycle, &bit) in prog.cycles.iter().zip(&bits.bits) {
        let scale = cfg.switch_factor(bit) * lo;
        let phase = -cycle.theta_if_rad() + cfg.channel.phase_rad;
        for j in 0..samples_per_cycle {
            let a = cycle
                .envelope
                .map_or(0.0, |env| env.value_at((j as f64 + 0.5) * dt));
            let rabi = scale * amplitude_map(cfg, a)?;
            samples.push(Complex64::from_polar(rabi, phase));
        }
    }
    Ok(DriveEnvelope {
        carrier_hz: carrier,
        samples,
        rate_hz: 1.0 / dt,
        t0_s: 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToneKind {
    Difference,
    Sum,
    Lo,
    If,
}

impl ToneKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ToneKind::Difference => "difference",
            ToneKind::Sum => "sum",
            ToneKind::Lo => "lo",
            ToneKind::If => "if",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumLine {
    pub kind: ToneKind,
    pub freq_hz: f64,
    /// Power relative to the on-state difference tone, in dB.
    pub power_db: f64,
}

/// Carrier-level CW spectrum of the mixer output at its four characteristic tones.
///
/// The output is synthesized at `rate_hz` (difference and sum products gated by
/// the bits, LO/IF feedthrough ungated, everything except the difference tone
/// attenuated by the BPF stopband) and each tone's amplitude is read back with
/// a Hann-windowed DTFT evaluated at the tone frequency.
pub fn output_spectrum(
    cfg: &MixerConfig,
    prog: &IfProgram,
    bits: &BitTimeline,
    rate_hz: f64,
) -> Result<Vec<SpectrumLine>> {
    if bits.len() != prog.cycles.len() {
        return Err(Error::LengthMismatch {
            expected: prog.cycles.len(),
            got: bits.len(),
        });
    }
    if prog.cycles.is_empty() {
        return Err(invalid("spectrum needs at least one cycle"));
    }
    let mut peak = 0.0f64;
    for c in &prog.cycles {
        match c.envelope {
            Some(env) if env.shape == EnvelopeShape::Flat => peak = peak.max(env.peak),
            Some(_) => return Err(invalid("spectrum analysis requires flat (CW) envelopes")),
            None => {}
        }
    }
    let carrier = carrier_hz(cfg, prog)?;
    let f_lo = cfg.channel.freq_hz;
    let f_if = prog.f_if_hz;
    check_nyquist(rate_hz, f_lo + f_if)?;

    let lo = cfg.lo_drive_factor();
    let reference = lo * amplitude_map(cfg, peak)?;
    if reference <= 0.0 {
        return Err(invalid("spectrum reference is zero (no IF drive or no LO)"));
    }
    let stop = 10f64.powf(-cfg.bpf_stopband_db / 20.0);
    let phi_ch = cfg.channel.phase_rad;

    let n = (prog.duration_s() * rate_hz).round() as usize;
    if n < 16 {
        return Err(invalid("record too short for spectral analysis"));
    }
    let mut signal = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 / rate_hz;
        let i = prog.cycle_index_at(t).unwrap_or(prog.cycles.len() - 1);
        let cycle = &prog.cycles[i];
        let a = prog.envelope_at(t);
        let theta = cycle.theta_if_rad();
        let mixed = cfg.switch_factor(bits.bits[i]) * lo * amplitude_map(cfg, a)?;
        let v = mixed * (TAU * carrier * t - theta + phi_ch).cos()
            + stop * mixed * (TAU * (f_lo + f_if) * t + theta + phi_ch).cos()
            + stop * reference * (TAU * f_lo * t + phi_ch).cos()
            + stop * reference * a * (TAU * f_if * t + theta).cos();
        signal.push(v);
    }

    let window: Vec<f64> = (0..n)
        .map(|k| 0.5 - 0.5 * (TAU * k as f64 / (n - 1) as f64).cos())
        .collect();
    let coherent_gain: f64 = window.iter().sum();
    let amplitude_at = |f: f64| -> f64 {
        let acc = signal
            .iter()
            .zip(&window)
            .enumerate()
            .fold(Complex64::new(0.0, 0.0), |acc, (k, (&x, &w))| {
                let t = k as f64 / rate_hz;
                acc + Complex64::from_polar(w * x, -TAU * f * t)
            });
        2.0 * acc.norm() / coherent_gain
    };

    Ok([
        (ToneKind::Difference, carrier),
        (ToneKind::Sum, f_lo + f_if),
        (ToneKind::Lo, f_lo),
        (ToneKind::If, f_if),
    ]
    .into_iter()
    .map(|(kind, f)| SpectrumLine {
        kind,
        freq_hz: f,
        power_db: 20.0 * (amplitude_at(f) / reference).max(1e-300).log10(),
    })
    .collect())
}

/// Output phase (radians) of the first driven sample of each cycle.
pub fn cycle_phases(env: &DriveEnvelope, samples_per_cycle: usize) -> Vec<Option<f64>> {
    env.samples
        .chunks(samples_per_cycle)
        .map(|chunk| chunk.iter().find(|s| s.norm() > 0.0).map(|s| s.arg()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::{make_if_program, CycleSpec, Envelope, PhaseMode};

    fn channel(freq: f64, phase: f64) -> ChannelTone {
        ChannelTone {
            freq_hz: freq,
            amp_phi0: 0.5,
            phase_rad: phase,
        }
    }

    fn cfg(nl: Nonlinearity, ratio: f64) -> MixerConfig {
        MixerConfig::new(channel(8e9, 0.0), 10e6, ratio, nl, 60.0).unwrap()
    }

    fn flat_prog(theta: f64, f_if: f64, period: f64) -> IfProgram {
        let env = Envelope::flat(period, 1.0).unwrap();
        make_if_program(f_if, period, vec![CycleSpec::pulse(theta, env)], PhaseMode::Free).unwrap()
    }

    #[test]
    fn amplitude_map_points() {
        let c = cfg(Nonlinearity::SineSaturating, 28.5);
        assert_eq!(amplitude_map(&c, 0.0).unwrap(), 0.0);
        assert_eq!(amplitude_map(&c, 1.0).unwrap(), 10e6);
        let half = amplitude_map(&c, 0.5).unwrap();
        assert!((half - 10e6 * std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6);
        assert!(amplitude_map(&c, 1.01).is_err());
        assert!(amplitude_map(&c, -0.01).is_err());
        let lin = cfg(Nonlinearity::Linear, 28.5);
        assert_eq!(amplitude_map(&lin, 0.25).unwrap(), 2.5e6);
    }

    #[test]
    fn on_state_is_constant_gain() {
        let c = cfg(Nonlinearity::SineSaturating, 28.5);
        let env = baseband_output(&c, &flat_prog(0.0, 3.5e9, 10e-9), &BitTimeline::all(true, 1), 8).unwrap();
        assert!((env.carrier_hz - 4.5e9).abs() < 1e-3);
        for s in &env.samples {
            assert!((s.norm() - 10e6).abs() < 1e-6);
            assert!(s.arg().abs() < 1e-15);
        }
    }

    #[test]
    fn off_state_is_scaled_by_residual() {
        let c = cfg(Nonlinearity::SineSaturating, 28.5);
        let prog = flat_prog(0.0, 3.5e9, 10e-9);
        let on = baseband_output(&c, &prog, &BitTimeline::all(true, 1), 4).unwrap();
        let off = baseband_output(&c, &prog, &BitTimeline::all(false, 1), 4).unwrap();
        let ratio = off.samples[0].norm() / on.samples[0].norm();
        assert!((ratio - 0.037_583_740_428_844_4).abs() < 1e-12);
        assert!((20.0 * (on.samples[0].norm() / off.samples[0].norm()).log10() - 28.5).abs() < 1e-12);
        // coherent residual: same phase as the on state
        assert!((off.samples[0].arg() - on.samples[0].arg()).abs() < 1e-15);
    }

    #[test]
    fn phase_follows_minus_theta_plus_channel() {
        let mut c = cfg(Nonlinearity::Linear, 28.5);
        c.channel.phase_rad = 0.3;
        let env = baseband_output(&c, &flat_prog(45.0, 3.5e9, 10e-9), &BitTimeline::all(true, 1), 2).unwrap();
        let expected = -std::f64::consts::FRAC_PI_4 + 0.3;
        assert!((env.samples[0].arg() - expected).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        let c = cfg(Nonlinearity::Linear, 28.5);
        let prog = flat_prog(0.0, 3.5e9, 10e-9);
        assert!(matches!(
            baseband_output(&c, &prog, &BitTimeline::all(true, 2), 4),
            Err(Error::LengthMismatch { .. })
        ));
        let above = flat_prog(0.0, 8.5e9, 10e-9);
        assert!(baseband_output(&c, &above, &BitTimeline::all(true, 1), 4).is_err());
        assert!(MixerConfig::new(channel(8e9, 0.0), 0.0, 28.5, Nonlinearity::Linear, 60.0).is_err());
        assert!(MixerConfig::new(channel(8e9, 0.0), 1e6, 0.0, Nonlinearity::Linear, 60.0).is_err());
    }

    #[test]
    fn cycle_locality() {
        let c = cfg(Nonlinearity::SineSaturating, 28.5);
        let env = Envelope::triangular(15e-9, 0.7).unwrap();
        let mut cycles: Vec<_> = (0..5).map(|i| CycleSpec::pulse(45.0 * i as f64, env)).collect();
        let p1 = make_if_program(3.5e9, 15e-9, cycles.clone(), PhaseMode::Quantized).unwrap();
        cycles[2].theta_if_deg = 315.0;
        let p2 = make_if_program(3.5e9, 15e-9, cycles, PhaseMode::Quantized).unwrap();
        let mut bits = BitTimeline::all(true, 5);
        let a = baseband_output(&c, &p1, &bits, 10).unwrap();
        bits.bits[2] = false;
        let b = baseband_output(&c, &p2, &bits, 10).unwrap();
        for k in 0..50 {
            if k / 10 != 2 {
                assert_eq!(a.samples[k], b.samples[k]);
            }
        }
    }

    #[test]
    fn spectrum_on_and_off() {
        let c = cfg(Nonlinearity::SineSaturating, 45.1);
        let prog = flat_prog(0.0, 3.0e9, 200e-9);
        let on = output_spectrum(&c, &prog, &BitTimeline::all(true, 1), 32e9).unwrap();
        let off = output_spectrum(&c, &prog, &BitTimeline::all(false, 1), 32e9).unwrap();
        assert!(on[0].power_db.abs() < 1e-6);
        assert!((on[1].power_db + 60.0).abs() < 1e-3);
        assert!((off[0].power_db + 45.1).abs() < 1e-3);
        assert!((on[2].power_db + 60.0).abs() < 1e-3);
    }

    #[test]
    fn spectrum_difference_frequency_for_mid_band_channel() {
        let c = MixerConfig::new(channel(7.74225e9, 0.0), 10e6, 28.5, Nonlinearity::SineSaturating, 60.0).unwrap();
        let prog = flat_prog(0.0, 2.98075e9, 100e-9);
        let lines = output_spectrum(&c, &prog, &BitTimeline::all(true, 1), 32e9).unwrap();
        assert!((lines[0].freq_hz - 4.76150e9).abs() < 1e-3);
    }

    #[test]
    fn spectrum_rejects_shaped_envelopes() {
        let c = cfg(Nonlinearity::Linear, 28.5);
        let env = Envelope::triangular(100e-9, 1.0).unwrap();
        let prog = make_if_program(3e9, 100e-9, vec![CycleSpec::pulse(0.0, env)], PhaseMode::Free).unwrap();
        assert!(output_spectrum(&c, &prog, &BitTimeline::all(true, 1), 32e9).is_err());
    }
}
