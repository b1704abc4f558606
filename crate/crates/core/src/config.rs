//! JSON device description: LO tones, resonators, mixers, qubits and IF defaults.

use serde::{Deserialize, Serialize};

use crate::demux::{demux, DemuxOutput, Resonator};
use crate::error::{Error, Result};
use crate::mixer::{MixerConfig, Nonlinearity};
use crate::qubit::QubitParams;
use crate::signals::{EnvelopeShape, MultiToneLo, Tone};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToneConfig {
    pub freq_hz: f64,
    pub amp_phi0: f64,
    #[serde(default)]
    pub phase_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixerSpec {
    pub gain_hz: f64,
    pub on_off_ratio_db: f64,
    #[serde(default)]
    pub nonlinearity: Nonlinearity,
    #[serde(default = "default_stopband")]
    pub bpf_stopband_db: f64,
}

fn default_stopband() -> f64 {
    60.0
}

/// Coherence may be given as `tphi_s` or as a target `t2_s`; omitted times mean none.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QubitSpec {
    pub freq_hz: f64,
    #[serde(default)]
    pub t1_s: Option<f64>,
    #[serde(default)]
    pub tphi_s: Option<f64>,
    #[serde(default)]
    pub t2_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IfDefaults {
    pub f_if_hz: f64,
    pub cycle_period_s: f64,
    #[serde(default = "default_shape")]
    pub shape: EnvelopeShape,
    /// Calibrated pulse length; defaults to one cycle.
    #[serde(default)]
    pub pulse_duration_s: Option<f64>,
}

fn default_shape() -> EnvelopeShape {
    EnvelopeShape::Flat
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceConfig {
    pub lo_tones: Vec<ToneConfig>,
    pub resonators: Vec<Resonator>,
    pub mixers: Vec<MixerSpec>,
    pub qubits: Vec<QubitSpec>,
    pub if_defaults: IfDefaults,
}

/// A validated device with per-qubit mixers fed by the demultiplexed LO.
#[derive(Debug, Clone, PartialEq)]
pub struct Device {
    pub qubits: Vec<QubitParams>,
    pub mixers: Vec<MixerConfig>,
    pub demux: DemuxOutput,
    pub if_defaults: IfDefaults,
}

impl Device {
    pub fn pulse_duration_s(&self) -> f64 {
        self.if_defaults
            .pulse_duration_s
            .unwrap_or(self.if_defaults.cycle_period_s)
    }
}

fn config_err(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

impl DeviceConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// A one-qubit device at the reference operating point.
    pub fn single_qubit() -> Self {
        Self {
            lo_tones: vec![ToneConfig {
                freq_hz: 8.0e9,
                amp_phi0: 0.5,
                phase_deg: 0.0,
            }],
            resonators: vec![Resonator {
                freq_hz: 8.0e9,
                q: 1e4,
            }],
            mixers: vec![MixerSpec {
                gain_hz: 20e6,
                on_off_ratio_db: 28.5,
                nonlinearity: Nonlinearity::SineSaturating,
                bpf_stopband_db: 60.0,
            }],
            qubits: vec![QubitSpec {
                freq_hz: 4.53202e9,
                t1_s: Some(25.3e-6),
                tphi_s: None,
                t2_s: Some(17.0e-6),
            }],
            if_defaults: IfDefaults {
                f_if_hz: 3.46798e9,
                cycle_period_s: 50e-9,
                shape: EnvelopeShape::Flat,
                pulse_duration_s: None,
            },
        }
    }

    pub fn build(&self) -> Result<Device> {
        self.build_inner().map_err(config_err)
    }

    fn build_inner(&self) -> Result<Device> {
        let n = self.qubits.len();
        if n == 0 {
            return Err(Error::Config("device needs at least one qubit".into()));
        }
        if self.resonators.len() != n || self.mixers.len() != n {
            return Err(Error::Config(format!(
                "counts differ: {} resonators, {} mixers, {} qubits",
                self.resonators.len(),
                self.mixers.len(),
                n
            )));
        }
        let tones = self
            .lo_tones
            .iter()
            .map(|t| Tone::from_degrees(t.freq_hz, t.amp_phi0, t.phase_deg))
            .collect::<Result<Vec<_>>>()?;
        let lo = MultiToneLo::new(tones)?;
        if lo.is_empty() {
            return Err(Error::Config("device needs at least one LO tone".into()));
        }
        let resonators = self
            .resonators
            .iter()
            .map(|r| Resonator::new(r.freq_hz, r.q))
            .collect::<Result<Vec<_>>>()?;
        let out = demux(&resonators, &lo)?;

        let mixers = out
            .channels
            .iter()
            .zip(&self.mixers)
            .map(|(ch, m)| {
                let tone = ch.dominant().expect("LO has tones");
                MixerConfig::new(tone, m.gain_hz, m.on_off_ratio_db, m.nonlinearity, m.bpf_stopband_db)
            })
            .collect::<Result<Vec<_>>>()?;

        let qubits = self
            .qubits
            .iter()
            .map(|q| {
                let t1 = q.t1_s.unwrap_or(f64::INFINITY);
                match (q.tphi_s, q.t2_s) {
                    (Some(_), Some(_)) => Err(Error::Config("give tphi_s or t2_s, not both".into())),
                    (None, Some(t2)) => QubitParams::from_t1_t2(q.freq_hz, t1, t2),
                    (tphi, None) => QubitParams::new(q.freq_hz, t1, tphi.unwrap_or(f64::INFINITY)),
                }
            })
            .collect::<Result<Vec<_>>>()?;

        let d = &self.if_defaults;
        if !(d.f_if_hz > 0.0) || !(d.cycle_period_s > 0.0) {
            return Err(Error::Config("IF frequency and cycle period must be positive".into()));
        }
        if let Some(tau) = d.pulse_duration_s {
            if !(tau > 0.0 && tau <= d.cycle_period_s * (1.0 + 1e-12)) {
                return Err(Error::Config("pulse duration must be positive and fit in one cycle".into()));
            }
        }
        Ok(Device {
            qubits,
            mixers,
            demux: out,
            if_defaults: d.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_device_builds() {
        let d = DeviceConfig::single_qubit().build().unwrap();
        assert_eq!(d.qubits.len(), 1);
        assert!((d.qubits[0].t2_s() - 17.0e-6).abs() < 1e-15);
        assert_eq!(d.mixers[0].channel.freq_hz, 8.0e9);
    }

    #[test]
    fn json_round_trip() {
        let c = DeviceConfig::single_qubit();
        let s = serde_json::to_string_pretty(&c).unwrap();
        assert_eq!(DeviceConfig::from_json(&s).unwrap(), c);
    }

    #[test]
    fn count_mismatch_is_a_config_error() {
        let mut c = DeviceConfig::single_qubit();
        c.qubits.push(c.qubits[0].clone());
        assert!(matches!(c.build(), Err(Error::Config(_))));
    }

    #[test]
    fn bad_values_are_config_errors() {
        let mut c = DeviceConfig::single_qubit();
        c.qubits[0].freq_hz = -1.0;
        assert!(matches!(c.build(), Err(Error::Config(_))));
        assert!(matches!(DeviceConfig::from_json("{"), Err(Error::Config(_))));
        assert!(matches!(
            DeviceConfig::from_json(r#"{"lo_tones": [], "extra": 1}"#),
            Err(Error::Config(_))
        ));
    }
}
