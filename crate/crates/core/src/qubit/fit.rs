//! Least-squares fits of the experiment curves.
//!
//! Models, with `t` in seconds:
//! - `exp_decay`:     `A·exp(-t/τ) + C`
//! - `damped_cosine`: `A·exp(-γt)·cos(2πft + φ) + C`
//! - `rabi_sinusoid`: `C - A·cos(2πft + φ)`
//!
//! Fits run on time normalized to the record span, from several starting
//! points, and keep the lowest-cost Levenberg–Marquardt solution.

use std::f64::consts::{PI, TAU};

use levenberg_marquardt::{LeastSquaresProblem, LevenbergMarquardt};
use nalgebra::{storage::Owned, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

const POINTS_PER_PARAM: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    ExpDecay,
    DampedCosine,
    RabiSinusoid,
}

impl FitModel {
    pub fn param_names(&self) -> &'static [&'static str] {
        match self {
            FitModel::ExpDecay => &["amplitude", "tau_s", "offset"],
            FitModel::DampedCosine => &["amplitude", "rate_hz", "freq_hz", "phase_rad", "offset"],
            FitModel::RabiSinusoid => &["amplitude", "freq_hz", "phase_rad", "offset"],
        }
    }

    /// Model value at normalized time `x` for normalized parameters `p`.
    fn eval(&self, p: &[f64], x: f64) -> f64 {
        match self {
            FitModel::ExpDecay => p[0] * (-x / p[1]).exp() + p[2],
            FitModel::DampedCosine => p[0] * (-p[1] * x).exp() * (TAU * p[2] * x + p[3]).cos() + p[4],
            FitModel::RabiSinusoid => p[3] - p[0] * (TAU * p[1] * x + p[2]).cos(),
        }
    }

    fn gradient(&self, p: &[f64], x: f64, out: &mut [f64]) {
        match self {
            FitModel::ExpDecay => {
                let e = (-x / p[1]).exp();
                out[0] = e;
                out[1] = p[0] * e * x / (p[1] * p[1]);
                out[2] = 1.0;
            }
            FitModel::DampedCosine => {
                let e = (-p[1] * x).exp();
                let arg = TAU * p[2] * x + p[3];
                let (s, c) = arg.sin_cos();
                out[0] = e * c;
                out[1] = -x * p[0] * e * c;
                out[2] = -p[0] * e * s * TAU * x;
                out[3] = -p[0] * e * s;
                out[4] = 1.0;
            }
            FitModel::RabiSinusoid => {
                let arg = TAU * p[1] * x + p[2];
                let (s, c) = arg.sin_cos();
                out[0] = -c;
                out[1] = p[0] * s * TAU * x;
                out[2] = p[0] * s;
                out[3] = 1.0;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitParam {
    pub name: String,
    pub value: f64,
    /// 1σ uncertainty from the linearized covariance.
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: FitModel,
    pub params: Vec<FitParam>,
    /// Euclidean norm of the residual vector.
    pub residual_norm: f64,
    pub max_abs_residual: f64,
}

impl FitResult {
    pub fn value(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|p| p.name == name).map(|p| p.value)
    }

    pub fn sigma(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|p| p.name == name).map(|p| p.sigma)
    }

    fn get(&self, name: &str) -> f64 {
        self.value(name).expect("parameter exists for this model")
    }

    pub fn amplitude(&self) -> f64 {
        self.get("amplitude")
    }

    pub fn offset(&self) -> f64 {
        self.get("offset")
    }

    /// Decay time: `τ` for exponentials, `1/γ` for damped cosines.
    pub fn decay_time_s(&self) -> Option<f64> {
        match self.model {
            FitModel::ExpDecay => self.value("tau_s"),
            FitModel::DampedCosine => self.value("rate_hz").map(|g| 1.0 / g),
            FitModel::RabiSinusoid => None,
        }
    }

    pub fn freq_hz(&self) -> Option<f64> {
        self.value("freq_hz")
    }

    /// Evaluates the fitted model at `t` seconds.
    pub fn eval(&self, t: f64) -> f64 {
        let p: Vec<f64> = self.params.iter().map(|p| p.value).collect();
        match self.model {
            FitModel::ExpDecay => p[0] * (-t / p[1]).exp() + p[2],
            FitModel::DampedCosine => p[0] * (-p[1] * t).exp() * (TAU * p[2] * t + p[3]).cos() + p[4],
            FitModel::RabiSinusoid => p[3] - p[0] * (TAU * p[1] * t + p[2]).cos(),
        }
    }
}

struct Problem<'a> {
    model: FitModel,
    x: &'a [f64],
    y: &'a [f64],
    p: DVector<f64>,
}

impl LeastSquaresProblem<f64, Dyn, Dyn> for Problem<'_> {
    type ResidualStorage = Owned<f64, Dyn>;
    type JacobianStorage = Owned<f64, Dyn, Dyn>;
    type ParameterStorage = Owned<f64, Dyn>;

    fn set_params(&mut self, p: &DVector<f64>) {
        self.p.copy_from(p);
    }

    fn params(&self) -> DVector<f64> {
        self.p.clone()
    }

    fn residuals(&self) -> Option<DVector<f64>> {
        let p = self.p.as_slice();
        let r = DVector::from_iterator(
            self.x.len(),
            self.x.iter().zip(self.y).map(|(&x, &y)| self.model.eval(p, x) - y),
        );
        r.iter().all(|v| v.is_finite()).then_some(r)
    }

    fn jacobian(&self) -> Option<DMatrix<f64>> {
        let p = self.p.as_slice();
        let n = p.len();
        let mut j = DMatrix::zeros(self.x.len(), n);
        let mut row = vec![0.0; n];
        for (i, &x) in self.x.iter().enumerate() {
            self.model.gradient(p, x, &mut row);
            for (k, v) in row.iter().enumerate() {
                j[(i, k)] = *v;
            }
        }
        j.iter().all(|v| v.is_finite()).then_some(j)
    }
}

struct Solution {
    p: Vec<f64>,
    cost: f64,
    sigma: Vec<f64>,
}

fn solve(model: FitModel, x: &[f64], y: &[f64], start: &[f64]) -> Option<Solution> {
    let problem = Problem {
        model,
        x,
        y,
        p: DVector::from_row_slice(start),
    };
    let (problem, report) = LevenbergMarquardt::new()
        .with_tol(1e-15)
        .with_patience(400)
        .minimize(problem);
    if !report.termination.was_successful() || !report.objective_function.is_finite() {
        return None;
    }
    let r = problem.residuals()?;
    let j = problem.jacobian()?;
    let rss = r.norm_squared();
    let dof = x.len().saturating_sub(start.len()).max(1);
    let s2 = rss / dof as f64;
    let sigma = match (j.transpose() * &j).try_inverse() {
        Some(cov) => (0..start.len()).map(|k| (cov[(k, k)].max(0.0) * s2).sqrt()).collect(),
        None => vec![f64::INFINITY; start.len()],
    };
    Some(Solution {
        p: problem.p.as_slice().to_vec(),
        cost: rss,
        sigma,
    })
}

/// Dominant frequency (cycles per unit `x`) and phase of `y - mean` from a
/// finely scanned periodogram.
fn periodogram_peak(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let span = x[x.len() - 1] - x[0];
    let min_dx = x
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    let f_max = 0.5 / min_dx;
    let f_min = 0.25 / span;
    let steps = (40 * x.len()).min(20_000);
    let mut best = (f_min, 0.0, 0.0);
    for k in 0..=steps {
        let f = f_min + (f_max - f_min) * k as f64 / steps as f64;
        let (mut re, mut im) = (0.0, 0.0);
        for (&xi, &yi) in x.iter().zip(y) {
            let (s, c) = (TAU * f * xi).sin_cos();
            re += (yi - mean) * c;
            im -= (yi - mean) * s;
        }
        let power = re * re + im * im;
        if power > best.2 {
            best = (f, im.atan2(re), power);
        }
    }
    (best.0, best.1, mean)
}

/// Fits `model` to the samples `(t, y)`.
pub fn fit_curve(model: FitModel, t: &[f64], y: &[f64]) -> Result<FitResult> {
    if t.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: t.len(),
            got: y.len(),
        });
    }
    let n_params = model.param_names().len();
    if t.len() < POINTS_PER_PARAM * n_params {
        return Err(invalid(format!(
            "{} points is too few for {n_params} parameters (need {})",
            t.len(),
            POINTS_PER_PARAM * n_params
        )));
    }
    if t.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(invalid("fit data must be finite"));
    }
    if t.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("fit times must be strictly increasing"));
    }

    let scale = t[t.len() - 1].abs().max((t[t.len() - 1] - t[0]).abs());
    let x: Vec<f64> = t.iter().map(|v| v / scale).collect();
    let span = x[x.len() - 1] - x[0];
    let (y_min, y_max) = y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let half_range = 0.5 * (y_max - y_min);

    let starts: Vec<Vec<f64>> = match model {
        FitModel::ExpDecay => {
            let c = y[y.len() - 1];
            let a = y[0] - c;
            [0.1, 0.3, 1.0, 3.0, 10.0]
                .iter()
                .map(|k| vec![a * (x[0] / (k * span)).exp(), k * span, c])
                .collect()
        }
        FitModel::DampedCosine | FitModel::RabiSinusoid => {
            let (f, phase, mean) = periodogram_peak(&x, y);
            let mut s = Vec::new();
            for df in [1.0, 0.97, 1.03] {
                match model {
                    FitModel::DampedCosine => {
                        for rate in [0.0, 0.5 / span, 2.0 / span] {
                            s.push(vec![half_range, rate, f * df, phase, mean]);
                        }
                    }
                    _ => s.push(vec![half_range, f * df, phase + PI, mean]),
                }
            }
            s
        }
    };

    let best = starts
        .iter()
        .filter_map(|start| solve(model, &x, y, start))
        .min_by(|a, b| a.cost.total_cmp(&b.cost))
        .ok_or_else(|| Error::FitFailed(format!("{model:?} did not converge from any starting point")))?;

    let (mut p, mut sigma) = (best.p, best.sigma);
    // back to physical units and canonical signs
    match model {
        FitModel::ExpDecay => {
            if !(p[1] > 0.0) {
                return Err(Error::FitFailed(format!("non-positive decay time {}", p[1] * scale)));
            }
            p[1] *= scale;
            sigma[1] *= scale;
        }
        FitModel::DampedCosine => {
            canonical_sinusoid(&mut p, 0, 2, 3);
            if p[1] < -1e-9 / span {
                return Err(Error::FitFailed(format!("negative damping rate {}", p[1] / scale)));
            }
            p[1] = p[1].max(0.0) / scale;
            sigma[1] /= scale;
            p[2] /= scale;
            sigma[2] /= scale;
        }
        FitModel::RabiSinusoid => {
            canonical_sinusoid(&mut p, 0, 1, 2);
            p[1] /= scale;
            sigma[1] /= scale;
        }
    }

    let result_p: Vec<FitParam> = model
        .param_names()
        .iter()
        .zip(p.iter().zip(&sigma))
        .map(|(name, (&value, &sigma))| FitParam {
            name: (*name).to_string(),
            value,
            sigma,
        })
        .collect();
    let mut result = FitResult {
        model,
        params: result_p,
        residual_norm: 0.0,
        max_abs_residual: 0.0,
    };
    let residuals: Vec<f64> = t.iter().zip(y).map(|(&ti, &yi)| result.eval(ti) - yi).collect();
    result.residual_norm = residuals.iter().map(|r| r * r).sum::<f64>().sqrt();
    result.max_abs_residual = residuals.iter().fold(0.0, |m, r| m.max(r.abs()));
    Ok(result)
}

/// Makes amplitude and frequency non-negative and wraps the phase into `(-π, π]`.
fn canonical_sinusoid(p: &mut [f64], amp: usize, freq: usize, phase: usize) {
    if p[freq] < 0.0 {
        p[freq] = -p[freq];
        p[phase] = -p[phase];
    }
    if p[amp] < 0.0 {
        p[amp] = -p[amp];
        p[phase] += PI;
    }
    p[phase] = PI - (PI - p[phase]).rem_euclid(TAU);
}
