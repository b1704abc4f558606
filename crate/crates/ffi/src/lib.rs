//! C ABI for the qcvz simulator and compiler.
//!
//! Fallible functions return a [`QcvzStatus`]; on failure the message is
//! available from [`qcvz_last_error`] on the same thread. Handles are opaque
//! and must be released with their `_free` function. Strings returned through
//! out-pointers are owned by the caller and released with [`qcvz_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use qcvz_core::calibration::{calibrate_pulse, CalibratedPulse, Fixed, PulseSetup};
use qcvz_core::compiler::{compile, parallelism_stats, Program, Schedule, ScheduleMode, SyncPolicy};
use qcvz_core::config::{Device, DeviceConfig};
use qcvz_core::qubit::experiments::{run_experiment, DriveSetup, ExperimentKind};
use qcvz_core::resources::{resource_report, ResourceParams};
use qcvz_core::Error;

/// Result of a fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QcvzStatus {
    Ok = 0,
    /// Null pointer, bad UTF-8 or out-of-range index.
    InvalidArgument = 1,
    /// Rejected configuration, program or parameter.
    InvalidInput = 2,
    /// Step, fit or calibration failure.
    Numerical = 3,
    Io = 4,
    /// A Rust panic was caught at the boundary.
    Panic = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = CString::new(msg.into().replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(s));
}

struct Failure(QcvzStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io(_) => QcvzStatus::Io,
            e if e.is_numerical() => QcvzStatus::Numerical,
            _ => QcvzStatus::InvalidInput,
        };
        Failure(status, e.to_string())
    }
}

fn arg_err(msg: &str) -> Failure {
    Failure(QcvzStatus::InvalidArgument, msg.to_string())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> QcvzStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QcvzStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            QcvzStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(arg_err(&format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| arg_err(&format!("{name} is not UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| arg_err(&format!("{name} is null")))
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| arg_err("string contains nul"))
}

/// Message of the last failure on this thread, or null. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn qcvz_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn qcvz_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn qcvz_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Closed-form excited population for a constant drive (angular frequencies).
#[no_mangle]
pub extern "C" fn qcvz_rabi_analytic(omega: f64, delta: f64, t: f64) -> f64 {
    qcvz_core::qubit::rabi_analytic(omega, delta, t)
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct QcvzResourceReport {
    pub n_qubits: u64,
    pub avg_pw_per_qubit: f64,
    pub total_avg_w: f64,
    pub max_tones_per_cable: u64,
    pub cable_count: u64,
    pub if_cable_count: u64,
    pub parallelism_worst: f64,
    pub parallelism_best: f64,
}

/// Resource estimate for `n_qubits` with the default parameters.
///
/// # Safety
/// `out` must point to writable memory for one report.
#[no_mangle]
pub unsafe extern "C" fn qcvz_resources(n_qubits: u64, out: *mut QcvzResourceReport) -> QcvzStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let r = resource_report(n_qubits, &ResourceParams::default())?;
        *out = QcvzResourceReport {
            n_qubits: r.n_qubits,
            avg_pw_per_qubit: r.avg_pw_per_qubit,
            total_avg_w: r.total_avg_w,
            max_tones_per_cable: r.max_tones_per_cable,
            cable_count: r.cable_count,
            if_cable_count: r.if_cable_count,
            parallelism_worst: r.parallelism_worst,
            parallelism_best: r.parallelism_best,
        };
        Ok(())
    })
}

/// Compiled TDM schedule.
pub struct QcvzSchedule {
    schedule: Schedule,
}

/// Lowers and schedules a program given as JSON (`{"qubits": [["X90", ...], ...]}`).
/// `mode` is `quantized45`, `rolling45` or `free`; `sync` is `asap` or `layered`.
///
/// # Safety
/// String arguments must be nul-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qcvz_schedule_compile(
    program_json: *const c_char,
    mode: *const c_char,
    sync: *const c_char,
    out: *mut *mut QcvzSchedule,
) -> QcvzStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let program = Program::from_json(str_arg(program_json, "program_json")?)?;
        let mode: ScheduleMode = str_arg(mode, "mode")?.parse()?;
        let sync: SyncPolicy = str_arg(sync, "sync")?.parse()?;
        let (_, schedule) = compile(&program, mode, sync)?;
        *out = Box::into_raw(Box::new(QcvzSchedule { schedule }));
        Ok(())
    })
}

/// # Safety
/// `s` must come from [`qcvz_schedule_compile`] and not have been freed. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn qcvz_schedule_free(s: *mut QcvzSchedule) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Number of control cycles, or 0 for a null handle.
///
/// # Safety
/// `s` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn qcvz_schedule_cycle_count(s: *const QcvzSchedule) -> usize {
    s.as_ref().map_or(0, |s| s.schedule.cycles.len())
}

/// Mean number of qubits fired per cycle, or 0 for a null handle.
///
/// # Safety
/// `s` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn qcvz_schedule_mean_parallelism(s: *const QcvzSchedule) -> f64 {
    s.as_ref().map_or(0.0, |s| parallelism_stats(&s.schedule).mean_fired)
}

/// IF phase (degrees) and rolling-clock slot of cycle `index`.
///
/// # Safety
/// `s` must be a live handle; out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn qcvz_schedule_cycle(
    s: *const QcvzSchedule,
    index: usize,
    theta_if_deg: *mut f64,
    slot: *mut usize,
) -> QcvzStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| arg_err("schedule is null"))?;
        let c = s
            .schedule
            .cycles
            .get(index)
            .ok_or_else(|| arg_err("cycle index out of range"))?;
        *out_arg(theta_if_deg, "theta_if_deg")? = c.theta_if_deg;
        *out_arg(slot, "slot")? = c.slot;
        Ok(())
    })
}

/// Cycle indices in which `qubit` fires. Writes at most `capacity` entries to
/// `cycles` and the total count to `count`.
///
/// # Safety
/// `s` must be a live handle; `cycles` must hold `capacity` entries (may be
/// null when `capacity` is 0); `count` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qcvz_schedule_qubit_cycles(
    s: *const QcvzSchedule,
    qubit: usize,
    cycles: *mut usize,
    capacity: usize,
    count: *mut usize,
) -> QcvzStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| arg_err("schedule is null"))?;
        if qubit >= s.schedule.n_qubits {
            return Err(arg_err("qubit index out of range"));
        }
        let list = s.schedule.cycles_of(qubit);
        *out_arg(count, "count")? = list.len();
        if capacity > 0 {
            if cycles.is_null() {
                return Err(arg_err("cycles is null"));
            }
            let dst = std::slice::from_raw_parts_mut(cycles, capacity);
            for (d, v) in dst.iter_mut().zip(&list) {
                *d = *v;
            }
        }
        Ok(())
    })
}

/// The schedule as JSON; free with [`qcvz_string_free`].
///
/// # Safety
/// `s` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qcvz_schedule_to_json(s: *const QcvzSchedule, out: *mut *mut c_char) -> QcvzStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| arg_err("schedule is null"))?;
        let json = serde_json::to_string(&s.schedule).map_err(Error::from)?;
        *out_arg(out, "out")? = into_c_string(json)?;
        Ok(())
    })
}

/// A validated device with lazily calibrated pulses per qubit.
pub struct QcvzDevice {
    device: Device,
    pulses: Vec<Option<(CalibratedPulse, CalibratedPulse)>>,
}

fn new_device(config: &DeviceConfig) -> Result<*mut QcvzDevice, Failure> {
    let device = config.build()?;
    let n = device.qubits.len();
    Ok(Box::into_raw(Box::new(QcvzDevice {
        device,
        pulses: vec![None; n],
    })))
}

/// Device from a JSON description.
///
/// # Safety
/// `json` must be nul-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qcvz_device_from_json(json: *const c_char, out: *mut *mut QcvzDevice) -> QcvzStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = new_device(&DeviceConfig::from_json(str_arg(json, "json")?)?)?;
        Ok(())
    })
}

/// The built-in one-qubit device.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qcvz_device_default(out: *mut *mut QcvzDevice) -> QcvzStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = new_device(&DeviceConfig::single_qubit())?;
        Ok(())
    })
}

/// # Safety
/// `d` must come from this library and not have been freed. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn qcvz_device_free(d: *mut QcvzDevice) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Number of qubits, or 0 for a null handle.
///
/// # Safety
/// `d` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn qcvz_device_qubit_count(d: *const QcvzDevice) -> usize {
    d.as_ref().map_or(0, |d| d.device.qubits.len())
}

impl QcvzDevice {
    fn drive_setup(&mut self, qubit: usize) -> Result<DriveSetup, Failure> {
        if qubit >= self.device.qubits.len() {
            return Err(arg_err("qubit index out of range"));
        }
        let q = self.device.qubits[qubit];
        let cfg = self.device.mixers[qubit];
        if self.pulses[qubit].is_none() {
            let setup = PulseSetup {
                f_if_hz: self.device.if_defaults.f_if_hz,
                shape: self.device.if_defaults.shape,
                theta_if_deg: 0.0,
            };
            let tau = Fixed::Duration(self.device.pulse_duration_s());
            let half = calibrate_pulse(&q, &cfg, std::f64::consts::FRAC_PI_2, tau, &setup)?;
            let pi = calibrate_pulse(&q, &cfg, std::f64::consts::PI, tau, &setup)?;
            self.pulses[qubit] = Some((half, pi));
        }
        let (half, pi) = self.pulses[qubit].clone().expect("calibrated above");
        Ok(DriveSetup::new(q, cfg, half, pi)?)
    }
}

/// Runs an experiment on `qubit` over `n` sweep values and writes `n`
/// populations to `p1`.
///
/// `kind` is `t1`, `echo`, `ramsey` (with `param` the detuning in Hz) or
/// `vz-ramsey` (with `param` the delay in seconds and `xs` in degrees).
/// Pulses are calibrated on first use and cached in the handle.
///
/// # Safety
/// `d` must be a live handle not used concurrently; `xs` and `p1` must hold `n` values.
#[no_mangle]
pub unsafe extern "C" fn qcvz_device_run_experiment(
    d: *mut QcvzDevice,
    qubit: usize,
    kind: *const c_char,
    param: f64,
    xs: *const f64,
    n: usize,
    p1: *mut f64,
) -> QcvzStatus {
    guard(|| {
        let d = d.as_mut().ok_or_else(|| arg_err("device is null"))?;
        let kind = match str_arg(kind, "kind")? {
            "t1" => ExperimentKind::T1,
            "echo" => ExperimentKind::Echo,
            "ramsey" => ExperimentKind::Ramsey { detuning_hz: param },
            "vz-ramsey" => ExperimentKind::VzRamsey { delay_s: param },
            other => return Err(Failure(QcvzStatus::InvalidInput, format!("unknown experiment `{other}`"))),
        };
        if n == 0 || xs.is_null() || p1.is_null() {
            return Err(arg_err("sweep arrays must be non-null and nonempty"));
        }
        let xs = std::slice::from_raw_parts(xs, n);
        let setup = d.drive_setup(qubit)?;
        let curve = run_experiment(kind, &setup, xs)?;
        std::slice::from_raw_parts_mut(p1, n).copy_from_slice(&curve.p1);
        Ok(())
    })
}
