//! Two-level transmon in the frame rotating with the drive carrier.
//!
//! `H = (δ/2)σz + (Ω_re σx + Ω_im σy)/2` with `δ = 2π(carrier - f_qubit)` and
//! `Ω = 2π·envelope`, plus amplitude damping at `1/T1` and pure dephasing that
//! decays coherences at `1/Tφ`. Integrated with fixed-step RK4.

pub mod chevron;
pub mod experiments;
pub mod fit;

use std::f64::consts::TAU;

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mixer::DriveEnvelope;

/// Minimum RK4 steps per period of the fastest rotation in the Hamiltonian.
pub const MIN_STEPS_PER_PERIOD: f64 = 50.0;
/// Steps per period used when the step is chosen automatically.
pub const AUTO_STEPS_PER_PERIOD: f64 = 200.0;

const STATE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitParams {
    pub freq_hz: f64,
    /// Energy relaxation time; `None` in JSON means no relaxation.
    #[serde(with = "infinite_as_none")]
    pub t1_s: f64,
    /// Pure dephasing time; `None` in JSON means no dephasing.
    #[serde(with = "infinite_as_none")]
    pub tphi_s: f64,
}

impl QubitParams {
    pub fn new(freq_hz: f64, t1_s: f64, tphi_s: f64) -> Result<Self> {
        if !(freq_hz > 0.0 && freq_hz.is_finite()) {
            return Err(invalid(format!("qubit frequency must be positive, got {freq_hz}")));
        }
        if !(t1_s > 0.0) || !(tphi_s > 0.0) {
            return Err(invalid("T1 and Tphi must be positive (use infinity for none)"));
        }
        Ok(Self {
            freq_hz,
            t1_s,
            tphi_s,
        })
    }

    /// No decoherence at all.
    pub fn closed(freq_hz: f64) -> Result<Self> {
        Self::new(freq_hz, f64::INFINITY, f64::INFINITY)
    }

    /// Derives Tφ from a target T2: `1/Tφ = 1/T2 - 1/(2 T1)`.
    pub fn from_t1_t2(freq_hz: f64, t1_s: f64, t2_s: f64) -> Result<Self> {
        let rate = 1.0 / t2_s - 0.5 / t1_s;
        if rate < -1e-15 / t2_s {
            return Err(invalid(format!(
                "T2 = {t2_s} s exceeds the 2·T1 limit for T1 = {t1_s} s"
            )));
        }
        let tphi = if rate <= 0.0 { f64::INFINITY } else { 1.0 / rate };
        Self::new(freq_hz, t1_s, tphi)
    }

    pub fn t2_s(&self) -> f64 {
        1.0 / (self.gamma1() / 2.0 + self.gamma_phi())
    }

    pub fn gamma1(&self) -> f64 {
        1.0 / self.t1_s
    }

    pub fn gamma_phi(&self) -> f64 {
        1.0 / self.tphi_s
    }

    pub fn is_closed(&self) -> bool {
        self.t1_s.is_infinite() && self.tphi_s.is_infinite()
    }
}

mod infinite_as_none {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// 2×2 density matrix in the `(|0⟩, |1⟩)` basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix(Matrix2<Complex64>);

impl DensityMatrix {
    /// Validates trace, Hermiticity and positivity.
    pub fn new(m: Matrix2<Complex64>) -> Result<Self> {
        let rho = Self(m);
        if (rho.trace() - 1.0).abs() > STATE_TOL || m.trace().im.abs() > STATE_TOL {
            return Err(Error::InvalidState(format!("trace {} != 1", m.trace())));
        }
        if (m[(0, 1)] - m[(1, 0)].conj()).norm() > STATE_TOL {
            return Err(Error::InvalidState("not Hermitian".into()));
        }
        if rho.min_eigenvalue() < -STATE_TOL {
            return Err(Error::InvalidState("not positive semidefinite".into()));
        }
        Ok(rho)
    }

    pub fn ground() -> Self {
        Self(Matrix2::new(c(1.0), c(0.0), c(0.0), c(0.0)))
    }

    pub fn excited() -> Self {
        Self(Matrix2::new(c(0.0), c(0.0), c(0.0), c(1.0)))
    }

    /// Pure state `α|0⟩ + β|1⟩` (normalized here).
    pub fn pure(alpha: Complex64, beta: Complex64) -> Result<Self> {
        let norm = (alpha.norm_sqr() + beta.norm_sqr()).sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        let (a, b) = (alpha / norm, beta / norm);
        Ok(Self(Matrix2::new(
            a * a.conj(),
            a * b.conj(),
            b * a.conj(),
            b * b.conj(),
        )))
    }

    pub fn matrix(&self) -> &Matrix2<Complex64> {
        &self.0
    }

    pub fn p1(&self) -> f64 {
        self.0[(1, 1)].re
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    /// Bloch vector `(x, y, z)` with `z = +1` for the ground state.
    pub fn bloch(&self) -> [f64; 3] {
        let r01 = self.0[(0, 1)];
        [2.0 * r01.re, -2.0 * r01.im, (self.0[(0, 0)] - self.0[(1, 1)]).re]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let a = self.0[(0, 0)].re;
        let d = self.0[(1, 1)].re;
        let b = self.0[(0, 1)].norm();
        0.5 * (a + d - ((a - d).powi(2) + 4.0 * b * b).sqrt())
    }
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Excited-state population sampled over time.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub p1: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_p1(&self) -> Option<f64> {
        self.p1.last().copied()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evolution {
    pub trajectory: Trajectory,
    pub final_state: DensityMatrix,
}

/// Closed-form excited population for a constant drive from the ground state.
pub fn rabi_analytic(omega: f64, delta: f64, t: f64) -> f64 {
    let w2 = omega * omega + delta * delta;
    if w2 == 0.0 {
        return 0.0;
    }
    let s = (w2.sqrt() * t / 2.0).sin();
    omega * omega / w2 * s * s
}

/// Largest time step allowed for `drive` on `q`.
pub fn step_limit(q: &QubitParams, drive: &DriveEnvelope) -> f64 {
    let detuning_hz = (drive.carrier_hz - q.freq_hz).abs();
    let fastest_hz = drive.max_rabi_hz().max(detuning_hz);
    if fastest_hz == 0.0 {
        f64::INFINITY
    } else {
        1.0 / (MIN_STEPS_PER_PERIOD * fastest_hz)
    }
}

/// Largest step that divides the drive's sample interval with at least
/// [`AUTO_STEPS_PER_PERIOD`] steps per period, further capped at `max_dt`
/// (relevant for idle segments).
pub fn auto_dt(q: &QubitParams, drive: &DriveEnvelope, max_dt: f64) -> f64 {
    let interval = drive.sample_interval_s();
    let limit = (step_limit(q, drive) * MIN_STEPS_PER_PERIOD / AUTO_STEPS_PER_PERIOD).min(max_dt);
    let substeps = (interval / limit).ceil().max(1.0);
    interval / substeps
}

/// RK4 propagation of `rho0` under `drive`, recording `p1` at every step.
pub fn evolve(q: &QubitParams, drive: &DriveEnvelope, rho0: &DensityMatrix, dt: f64) -> Result<Trajectory> {
    Ok(propagate(q, drive, rho0, dt, true)?.trajectory)
}

/// RK4 propagation returning the final state; `record` controls whether the
/// per-step trajectory is kept.
pub fn propagate(
    q: &QubitParams,
    drive: &DriveEnvelope,
    rho0: &DensityMatrix,
    dt: f64,
    record: bool,
) -> Result<Evolution> {
    DensityMatrix::new(rho0.0)?;
    let limit = step_limit(q, drive);
    if !(dt > 0.0) || dt > limit * (1.0 + 1e-9) {
        return Err(Error::StepTooCoarse { dt_s: dt, limit_s: limit });
    }
    let substeps = drive.sample_interval_s() / dt;
    let m = substeps.round();
    if !drive.is_empty() && (m < 1.0 || (substeps - m).abs() > 1e-6 * m) {
        return Err(invalid(format!(
            "time step {dt} s must divide the drive sample interval {} s",
            drive.sample_interval_s()
        )));
    }
    let m = m.max(1.0) as usize;

    let delta = TAU * (drive.carrier_hz - q.freq_hz);
    let g1 = q.gamma1();
    let gphi = q.gamma_phi();

    let mut rho = rho0.0;
    let mut trajectory = Trajectory::default();
    if record {
        trajectory.times.push(drive.t0_s);
        trajectory.p1.push(rho[(1, 1)].re);
    }
    let mut step = 0usize;
    for sample in &drive.samples {
        let omega = *sample * TAU;
        let h = Matrix2::new(
            c(delta / 2.0),
            omega.conj() / 2.0,
            omega / 2.0,
            c(-delta / 2.0),
        );
        for _ in 0..m {
            let k1 = lindblad(&h, g1, gphi, &rho);
            let k2 = lindblad(&h, g1, gphi, &(rho + k1 * c(dt / 2.0)));
            let k3 = lindblad(&h, g1, gphi, &(rho + k2 * c(dt / 2.0)));
            let k4 = lindblad(&h, g1, gphi, &(rho + k3 * c(dt)));
            rho += (k1 + k2 * c(2.0) + k3 * c(2.0) + k4) * c(dt / 6.0);
            step += 1;
            if record {
                trajectory.times.push(drive.t0_s + step as f64 * dt);
                trajectory.p1.push(rho[(1, 1)].re);
            }
        }
    }
    Ok(Evolution {
        trajectory,
        final_state: DensityMatrix(rho),
    })
}

/// Propagates through consecutive drive segments sharing one carrier, each at
/// its automatically chosen step (idle segments capped at `max_idle_dt`).
pub fn propagate_segments(
    q: &QubitParams,
    segments: &[DriveEnvelope],
    rho0: &DensityMatrix,
    max_idle_dt: f64,
) -> Result<DensityMatrix> {
    let mut rho = *rho0;
    for seg in segments {
        if seg.is_empty() {
            continue;
        }
        let dt = auto_dt(q, seg, max_idle_dt);
        rho = propagate(q, seg, &rho, dt, false)?.final_state;
    }
    Ok(rho)
}

fn lindblad(h: &Matrix2<Complex64>, g1: f64, gphi: f64, rho: &Matrix2<Complex64>) -> Matrix2<Complex64> {
    let minus_i = Complex64::new(0.0, -1.0);
    let mut d = (h * rho - rho * h) * minus_i;
    let r11 = rho[(1, 1)];
    let coherence = g1 / 2.0 + gphi;
    d[(0, 0)] += r11 * g1;
    d[(1, 1)] -= r11 * g1;
    d[(0, 1)] -= rho[(0, 1)] * coherence;
    d[(1, 0)] -= rho[(1, 0)] * coherence;
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const F_Q: f64 = 4.53202e9;

    fn flat(carrier: f64, rabi_hz: f64, rate: f64, n: usize) -> DriveEnvelope {
        DriveEnvelope::constant(carrier, rabi_hz, 0.0, rate, n)
    }

    #[test]
    fn free_decay_follows_t1() {
        let q = QubitParams::new(F_Q, 25.3e-6, f64::INFINITY).unwrap();
        let drive = DriveEnvelope::idle(F_Q, 1e8, 5000);
        let traj = evolve(&q, &drive, &DensityMatrix::excited(), 10e-9).unwrap();
        for (t, p) in traj.times.iter().zip(&traj.p1) {
            assert!((p - (-t / 25.3e-6).exp()).abs() < 1e-4);
        }
    }

    #[test]
    fn resonant_pi_pulse() {
        let q = QubitParams::closed(F_Q).unwrap();
        // Ω/2π = 1 MHz for 0.5 µs
        let drive = flat(F_Q, 1e6, 1e9, 500);
        let traj = evolve(&q, &drive, &DensityMatrix::ground(), 1e-9).unwrap();
        assert!((traj.last_p1().unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn detuned_by_rabi_rate_peaks_at_half() {
        let q = QubitParams::closed(F_Q).unwrap();
        let drive = flat(F_Q + 1e6, 1e6, 1e9, 2000);
        let traj = evolve(&q, &drive, &DensityMatrix::ground(), 1e-9).unwrap();
        let max = traj.p1.iter().cloned().fold(0.0, f64::max);
        assert!((max - 0.5).abs() < 1e-5, "max = {max}");
    }

    #[test]
    fn analytic_formula_points() {
        let w = 2.0 * PI * 3e6;
        assert!((rabi_analytic(w, 0.0, PI / w) - 1.0).abs() < 1e-15);
        assert_eq!(rabi_analytic(0.0, 1e6, 1e-6), 0.0);
        assert!((rabi_analytic(w, w, PI / (2f64.sqrt() * w)) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn coarse_step_is_rejected() {
        let q = QubitParams::closed(F_Q).unwrap();
        let drive = flat(F_Q, 10e6, 1e8, 10);
        let err = evolve(&q, &drive, &DensityMatrix::ground(), 1e-8);
        assert!(matches!(err, Err(Error::StepTooCoarse { .. })));
    }

    #[test]
    fn invalid_initial_state_is_rejected() {
        let m = Matrix2::new(c(0.7), c(0.0), c(0.0), c(0.7));
        assert!(DensityMatrix::new(m).is_err());
        let m = Matrix2::new(c(1.2), c(0.0), c(0.0), c(-0.2));
        assert!(DensityMatrix::new(m).is_err());
        let q = QubitParams::closed(F_Q).unwrap();
        let drive = flat(F_Q, 1e6, 1e9, 10);
        let bad = DensityMatrix(Matrix2::new(c(0.5), c(0.0), c(0.0), c(0.6)));
        assert!(evolve(&q, &drive, &bad, 1e-9).is_err());
    }

    #[test]
    fn t2_from_t1_t2_pair() {
        let q = QubitParams::from_t1_t2(F_Q, 25.3e-6, 17.0e-6).unwrap();
        assert!((q.t2_s() - 17.0e-6).abs() < 1e-15);
        assert!(QubitParams::from_t1_t2(F_Q, 10e-6, 25e-6).is_err());
        let limit = QubitParams::from_t1_t2(F_Q, 10e-6, 20e-6).unwrap();
        assert!(limit.tphi_s.is_infinite());
    }

    #[test]
    fn params_json_uses_null_for_infinite_times() {
        let q = QubitParams::closed(F_Q).unwrap();
        let s = serde_json::to_string(&q).unwrap();
        assert!(s.contains("\"t1_s\":null"));
        let back: QubitParams = serde_json::from_str(&s).unwrap();
        assert_eq!(back, q);
    }

    #[test]
    fn bloch_vector_of_pure_states() {
        let plus = DensityMatrix::pure(c(1.0), c(1.0)).unwrap();
        let b = plus.bloch();
        assert!((b[0] - 1.0).abs() < 1e-15 && b[1].abs() < 1e-15 && b[2].abs() < 1e-15);
        assert_eq!(DensityMatrix::ground().bloch()[2], 1.0);
    }
}
