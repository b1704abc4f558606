//! Rabi chevron: final excited population over (IF frequency, pulse length).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{auto_dt, propagate, DensityMatrix, QubitParams};
use crate::calibration::pulse_drive;
use crate::error::{invalid, Result};
use crate::mixer::MixerConfig;
use crate::signals::EnvelopeShape;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chevron {
    pub f_if_hz: Vec<f64>,
    pub tau_s: Vec<f64>,
    /// `p1[i][j]` at `f_if_hz[i]`, `tau_s[j]`.
    pub p1: Vec<Vec<f64>>,
}

/// Simulates one flat single-cycle pulse per grid point, starting from `|0⟩`.
#[allow(clippy::too_many_arguments)]
pub fn chevron(
    q: &QubitParams,
    cfg: &MixerConfig,
    f_lo_hz: f64,
    a_if: f64,
    f_if_grid: &[f64],
    tau_grid: &[f64],
    mixer_on: bool,
) -> Result<Chevron> {
    if f_if_grid.is_empty() || tau_grid.is_empty() {
        return Err(invalid("chevron grids must be nonempty"));
    }
    if let Some(t) = tau_grid.iter().find(|t| !(**t >= 0.0)) {
        return Err(invalid(format!("pulse length must be non-negative, got {t}")));
    }
    let mut cfg = *cfg;
    cfg.channel.freq_hz = f_lo_hz;

    let points: Vec<(f64, f64)> = f_if_grid
        .iter()
        .flat_map(|&f| tau_grid.iter().map(move |&t| (f, t)))
        .collect();
    let values = points
        .par_iter()
        .map(|&(f_if, tau)| {
            if tau == 0.0 {
                return Ok(0.0);
            }
            let drive = pulse_drive(&cfg, f_if, EnvelopeShape::Flat, tau, a_if, 0.0, mixer_on)?;
            let dt = auto_dt(q, &drive, f64::INFINITY);
            Ok(propagate(q, &drive, &DensityMatrix::ground(), dt, false)?.final_state.p1())
        })
        .collect::<Result<Vec<f64>>>()?;

    Ok(Chevron {
        f_if_hz: f_if_grid.to_vec(),
        tau_s: tau_grid.to_vec(),
        p1: values.chunks(tau_grid.len()).map(<[f64]>::to_vec).collect(),
    })
}

impl Chevron {
    /// IF frequency about which the pattern is most nearly mirror-symmetric.
    ///
    /// Candidate axes sit on grid points and midway between them; each needs
    /// at least a quarter of the grid in mirrored pairs.
    pub fn symmetry_axis_hz(&self) -> Result<f64> {
        let n = self.f_if_hz.len();
        if n < 4 {
            return Err(invalid("symmetry search needs at least 4 frequency points"));
        }
        let step = self.f_if_hz[1] - self.f_if_hz[0];
        let uniform = self
            .f_if_hz
            .windows(2)
            .all(|w| ((w[1] - w[0]) - step).abs() <= 1e-9 * step.abs());
        if !uniform || step <= 0.0 {
            return Err(invalid("symmetry search needs a uniform ascending frequency grid"));
        }
        let min_pairs = (n / 4).max(1);
        let mut best: Option<(f64, usize)> = None;
        for twice_center in 1..(2 * n - 2) {
            let mut cost = 0.0;
            let mut pairs = 0usize;
            let mut i = twice_center.saturating_sub(n - 1);
            while 2 * i < twice_center {
                let j = twice_center - i;
                for (a, b) in self.p1[i].iter().zip(&self.p1[j]) {
                    cost += (a - b).powi(2);
                }
                pairs += 1;
                i += 1;
            }
            if pairs < min_pairs {
                continue;
            }
            let mean = cost / (pairs * self.tau_s.len()) as f64;
            if best.is_none_or(|(c, _)| mean < c) {
                best = Some((mean, twice_center));
            }
        }
        let (_, twice_center) = best.expect("a grid of 4 or more points has a valid axis");
        Ok(self.f_if_hz[0] + step * twice_center as f64 / 2.0)
    }

    /// Peak-to-peak swing of p1 along τ at each frequency.
    pub fn oscillation_amplitude(&self) -> Vec<f64> {
        self.p1
            .iter()
            .map(|row| {
                let (lo, hi) = row
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
                hi - lo
            })
            .collect()
    }
}
