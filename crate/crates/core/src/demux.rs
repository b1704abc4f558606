//! Resonator-array demultiplexer for the multi-tone LO line.
//!
//! Each resonator is a single-pole Lorentzian band-pass; every LO tone leaks
//! into every channel with the resonator's complex gain at that frequency.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::signals::{normalize_phase, MultiToneLo};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resonator {
    pub freq_hz: f64,
    pub q: f64,
}

impl Resonator {
    pub fn new(freq_hz: f64, q: f64) -> Result<Self> {
        if !(freq_hz > 0.0 && freq_hz.is_finite()) {
            return Err(invalid(format!("resonator frequency must be positive, got {freq_hz}")));
        }
        if !(q > 0.0 && q.is_finite()) {
            return Err(invalid(format!("quality factor must be positive, got {q}")));
        }
        Ok(Self { freq_hz, q })
    }

    pub fn linewidth_hz(&self) -> f64 {
        self.freq_hz / self.q
    }
}

/// One LO tone as seen at a mixer after filtering.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelTone {
    pub freq_hz: f64,
    pub amp_phi0: f64,
    pub phase_rad: f64,
}

/// Everything a single resonator passes to its mixer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub resonator: Resonator,
    pub tones: Vec<ChannelTone>,
}

impl Channel {
    /// The strongest tone in the channel: the intended LO drive.
    pub fn dominant(&self) -> Option<ChannelTone> {
        self.tones
            .iter()
            .copied()
            .max_by(|a, b| a.amp_phi0.total_cmp(&b.amp_phi0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemuxOutput {
    pub channels: Vec<Channel>,
    /// `crosstalk_db[k][j]`: |gain| of tone `j` through resonator `k`, in dB.
    pub crosstalk_db: Vec<Vec<f64>>,
}

/// Complex transfer of a resonator at frequency `f`.
pub fn resonator_gain(r: &Resonator, f_hz: f64) -> Complex64 {
    let x = 2.0 * r.q * (f_hz - r.freq_hz) / r.freq_hz;
    Complex64::new(1.0, 0.0) / Complex64::new(1.0, x)
}

/// Splits the LO line into per-resonator channels and reports the crosstalk matrix.
pub fn demux(resonators: &[Resonator], lo: &MultiToneLo) -> Result<DemuxOutput> {
    if resonators.is_empty() {
        return Err(invalid("demultiplexer needs at least one resonator"));
    }
    if resonators.windows(2).any(|w| w[1].freq_hz < w[0].freq_hz) {
        return Err(invalid("resonators must be sorted by frequency"));
    }

    let mut channels = Vec::with_capacity(resonators.len());
    let mut crosstalk_db = Vec::with_capacity(resonators.len());
    for r in resonators {
        let mut tones = Vec::with_capacity(lo.len());
        let mut row = Vec::with_capacity(lo.len());
        for tone in lo.tones() {
            let g = resonator_gain(r, tone.freq_hz);
            tones.push(ChannelTone {
                freq_hz: tone.freq_hz,
                amp_phi0: tone.amp_phi0 * g.norm(),
                phase_rad: normalize_phase(tone.phase_rad + g.arg()),
            });
            row.push(20.0 * g.norm().log10());
        }
        channels.push(Channel {
            resonator: *r,
            tones,
        });
        crosstalk_db.push(row);
    }
    Ok(DemuxOutput {
        channels,
        crosstalk_db,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::Tone;

    const THREE_RESONANCES: [f64; 3] = [7.74225e9, 7.98575e9, 8.23350e9];

    fn lo_at(freqs: &[f64], amp: f64) -> MultiToneLo {
        MultiToneLo::new(freqs.iter().map(|&f| Tone::new(f, amp, 0.0).unwrap()).collect()).unwrap()
    }

    #[test]
    fn on_resonance_gain_is_unity() {
        let r = Resonator::new(7.74225e9, 1e4).unwrap();
        let g = resonator_gain(&r, r.freq_hz);
        assert_eq!(g, Complex64::new(1.0, 0.0));
    }

    #[test]
    fn half_power_point() {
        let r = Resonator::new(5e9, 1e4).unwrap();
        let g = resonator_gain(&r, r.freq_hz * (1.0 + 1.0 / (2.0 * r.q)));
        assert!((g.norm() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
    }

    #[test]
    fn far_detuned_gain_matches_direct_evaluation() {
        let r = Resonator::new(7.74225e9, 1e4).unwrap();
        let f = 7.98575e9;
        // direct evaluation of |1 / (1 + i x)| = 1 / sqrt(1 + x^2)
        let x: f64 = 2.0 * 1e4 * (f - 7.74225e9) / 7.74225e9;
        let expected = 1.0 / (1.0 + x * x).sqrt();
        assert!((resonator_gain(&r, f).norm() - expected).abs() < 1e-15);
        // order of magnitude: f_r / (2 Q Δf)
        let approx = 7.74225e9 / (2.0 * 1e4 * (f - 7.74225e9));
        assert!((expected / approx - 1.0).abs() < 1e-3);
    }

    #[test]
    fn matched_resonators_have_zero_db_diagonal() {
        let rs: Vec<_> = THREE_RESONANCES.iter().map(|&f| Resonator::new(f, 1e4).unwrap()).collect();
        let out = demux(&rs, &lo_at(&THREE_RESONANCES, 0.5)).unwrap();
        for (k, &f) in THREE_RESONANCES.iter().enumerate() {
            assert!(out.crosstalk_db[k][k].abs() < 1e-12);
            assert!((out.channels[k].dominant().unwrap().freq_hz - f).abs() < 1e-3);
            for j in 0..3 {
                if j != k {
                    assert!(out.crosstalk_db[k][j] < -50.0, "crosstalk[{k}][{j}] = {}", out.crosstalk_db[k][j]);
                }
            }
        }
    }

    #[test]
    fn one_linewidth_detuning() {
        let r = Resonator::new(8e9, 1e4).unwrap();
        let f = 8e9 + 8e9 / 1e4;
        let out = demux(&[r], &lo_at(&[f], 0.5)).unwrap();
        let expected = 0.5 * (Complex64::new(1.0, 0.0) / Complex64::new(1.0, 2.0)).norm();
        assert!((out.channels[0].tones[0].amp_phi0 - expected).abs() < 1e-12);
    }

    #[test]
    fn rejects_empty_and_unsorted() {
        let lo = lo_at(&[8e9], 0.5);
        assert!(demux(&[], &lo).is_err());
        let rs = [Resonator::new(8e9, 1e4).unwrap(), Resonator::new(7e9, 1e4).unwrap()];
        assert!(demux(&rs, &lo).is_err());
        assert!(Resonator::new(8e9, 0.0).is_err());
    }

    #[test]
    fn gain_decreases_with_detuning() {
        let r = Resonator::new(6e9, 5e3).unwrap();
        let mut last = 1.0 + 1e-12;
        for k in 0..200 {
            let df = k as f64 * 1e5;
            let up = resonator_gain(&r, r.freq_hz + df).norm();
            let down = resonator_gain(&r, r.freq_hz - df).norm();
            assert!(up < last || k == 0);
            assert!((up - down).abs() < 1e-15);
            last = up;
        }
    }
}
