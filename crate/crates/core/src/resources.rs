//! Power, multiplexing and cabling estimates for an N-qubit controller.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::mixer::{MAX_OUTPUT_POWER_DBM, MAX_OUTPUT_POWER_W};

/// Mixer standby dissipation, pW.
pub const STANDBY_PW: f64 = 1.92;
/// Mixer peak dissipation, pW.
pub const PEAK_PW: f64 = 220.0;
/// Resonator quality factor assumed for tone spacing.
pub const RESONATOR_Q: f64 = 1e4;
/// Usable LO bandwidth per cable, Hz.
pub const LO_BANDWIDTH_HZ: f64 = 2e9;
/// Reference frequency that sets the linewidth `f_c / Q`, Hz.
pub const REFERENCE_FREQ_HZ: f64 = 5e9;
/// Quantized IF phases per rotation; bounds worst-case parallelism at N/8.
pub const IF_PHASES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerEstimate {
    pub avg_pw_per_qubit: f64,
    pub total_avg_w: f64,
}

/// Average of standby and peak dissipation per qubit, and the total for `n` qubits.
pub fn power_estimate(n: u64, standby_pw: f64, peak_pw: f64) -> Result<PowerEstimate> {
    if n == 0 {
        return Err(invalid("qubit count must be at least 1"));
    }
    if !(standby_pw >= 0.0 && peak_pw >= standby_pw) {
        return Err(invalid(format!(
            "need 0 ≤ standby ≤ peak, got standby {standby_pw} pW and peak {peak_pw} pW"
        )));
    }
    let avg = (standby_pw + peak_pw) / 2.0;
    Ok(PowerEstimate {
        avg_pw_per_qubit: avg,
        total_avg_w: n as f64 * avg * 1e-12,
    })
}

/// Tones that fit in bandwidth `w_hz` at one linewidth `f_c/Q` apart.
pub fn max_tones(q: f64, w_hz: f64, f_c_hz: f64) -> Result<u64> {
    if !(q > 0.0 && w_hz > 0.0 && f_c_hz > 0.0) || !(q * w_hz).is_finite() {
        return Err(invalid("Q, bandwidth and reference frequency must be positive"));
    }
    Ok((w_hz * q / f_c_hz * (1.0 + 1e-12)).floor() as u64)
}

/// LO cables needed for `n` qubits.
pub fn cable_count(n: u64, tones_per_cable: u64) -> Result<u64> {
    if tones_per_cable == 0 {
        return Err(invalid("tones per cable must be at least 1"));
    }
    Ok(n.div_ceil(tones_per_cable))
}

/// Tone frequencies for one cable: `f_c - k·f_c/Q` for `k = 0..n`.
///
/// Each tone sits at least one of its own resonator's linewidths from its
/// neighbours, so adjacent-channel leakage stays at or below `1/(1 + 2²)` in power.
pub fn tone_plan(n: usize, q: f64, f_c_hz: f64) -> Result<Vec<f64>> {
    if !(q > 0.0 && f_c_hz > 0.0) {
        return Err(invalid("Q and reference frequency must be positive"));
    }
    let spacing = f_c_hz / q;
    if n as f64 * spacing >= f_c_hz {
        return Err(invalid(format!("{n} tones do not fit below {f_c_hz} Hz")));
    }
    Ok((0..n).map(|k| f_c_hz - k as f64 * spacing).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResourceParams {
    pub standby_pw: f64,
    pub peak_pw: f64,
    pub q: f64,
    pub bandwidth_hz: f64,
    pub reference_freq_hz: f64,
}

impl Default for ResourceParams {
    fn default() -> Self {
        Self {
            standby_pw: STANDBY_PW,
            peak_pw: PEAK_PW,
            q: RESONATOR_Q,
            bandwidth_hz: LO_BANDWIDTH_HZ,
            reference_freq_hz: REFERENCE_FREQ_HZ,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResourceReport {
    pub n_qubits: u64,
    pub standby_pw_per_qubit: f64,
    pub peak_pw_per_qubit: f64,
    pub avg_pw_per_qubit: f64,
    pub total_avg_w: f64,
    pub max_tones_per_cable: u64,
    pub cable_count: u64,
    /// The whole system shares a single IF cable.
    pub if_cable_count: u64,
    pub parallelism_worst: f64,
    pub parallelism_best: f64,
    pub max_output_power_w: f64,
    pub max_output_power_dbm: f64,
}

pub fn resource_report(n: u64, p: &ResourceParams) -> Result<ResourceReport> {
    let power = power_estimate(n, p.standby_pw, p.peak_pw)?;
    let tones = max_tones(p.q, p.bandwidth_hz, p.reference_freq_hz)?;
    if tones == 0 {
        return Err(invalid("bandwidth is narrower than one resonator linewidth"));
    }
    Ok(ResourceReport {
        n_qubits: n,
        standby_pw_per_qubit: p.standby_pw,
        peak_pw_per_qubit: p.peak_pw,
        avg_pw_per_qubit: power.avg_pw_per_qubit,
        total_avg_w: power.total_avg_w,
        max_tones_per_cable: tones,
        cable_count: cable_count(n, tones)?,
        if_cable_count: 1,
        parallelism_worst: n as f64 / IF_PHASES as f64,
        parallelism_best: n as f64,
        max_output_power_w: MAX_OUTPUT_POWER_W,
        max_output_power_dbm: MAX_OUTPUT_POWER_DBM,
    })
}

impl ResourceReport {
    /// Plain-text summary table.
    pub fn table(&self) -> String {
        let rows = [
            ("Qubits", self.n_qubits.to_string()),
            ("Standby power / qubit", format!("{} pW", self.standby_pw_per_qubit)),
            ("Peak power / qubit", format!("{} pW", self.peak_pw_per_qubit)),
            ("Average power / qubit", format!("{} pW", round6(self.avg_pw_per_qubit))),
            ("Total average power", format!("{} W", self.total_avg_w)),
            ("Max mixer output power", format!("{} pW ({} dBm)", self.max_output_power_w * 1e12, self.max_output_power_dbm)),
            ("Tones per LO cable", self.max_tones_per_cable.to_string()),
            ("LO cables", self.cable_count.to_string()),
            ("IF cables", self.if_cable_count.to_string()),
            ("Parallelism (worst)", format!("{}", self.parallelism_worst)),
            ("Parallelism (best)", format!("{}", self.parallelism_best)),
        ];
        let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
        rows.iter()
            .map(|(k, v)| format!("{k:<width$}  {v}\n"))
            .collect()
    }
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demux::{resonator_gain, Resonator};

    #[test]
    fn default_power() {
        let p = power_estimate(1, STANDBY_PW, PEAK_PW).unwrap();
        assert!((p.avg_pw_per_qubit - 110.96).abs() < 1e-12);
        let m = power_estimate(1_000_000, STANDBY_PW, PEAK_PW).unwrap();
        assert!((m.total_avg_w - 110.96e-6).abs() < 1e-15);
        assert_eq!(power_estimate(5, 0.0, 0.0).unwrap().total_avg_w, 0.0);
        assert!(power_estimate(0, STANDBY_PW, PEAK_PW).is_err());
    }

    #[test]
    fn tone_capacity() {
        assert_eq!(max_tones(1e4, 2e9, 5e9).unwrap(), 4000);
        assert_eq!(max_tones(5e3, 2e9, 5e9).unwrap(), 2000);
        assert_eq!(max_tones(1e4, 5e9 / 1e4, 5e9).unwrap(), 1);
    }

    #[test]
    fn cables() {
        assert_eq!(cable_count(4000, 4000).unwrap(), 1);
        assert_eq!(cable_count(4001, 4000).unwrap(), 2);
        assert_eq!(cable_count(1_000_000, 4000).unwrap(), 250);
        assert!(cable_count(10, 0).is_err());
    }

    #[test]
    fn tone_plan_adjacent_leakage() {
        let tones = tone_plan(4000, 1e4, 5e9).unwrap();
        let bound = 10.0 * (1.0f64 / 5.0).log10();
        for w in tones.windows(2) {
            for (own, other) in [(w[0], w[1]), (w[1], w[0])] {
                let r = Resonator::new(own, 1e4).unwrap();
                let db = 20.0 * resonator_gain(&r, other).norm().log10();
                assert!(db <= bound + 1e-9, "{db} dB at {own} Hz");
            }
        }
    }

    #[test]
    fn report_and_table() {
        let r = resource_report(1_000_000, &ResourceParams::default()).unwrap();
        assert_eq!(r.cable_count, 250);
        assert_eq!(r.parallelism_worst, 125_000.0);
        let t = r.table();
        assert!(t.contains("110.96 pW"));
        assert!(t.contains("LO cables"));
    }
}
