//! Single-qubit gates, their textual form and their ideal matrices.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, PI};
use std::fmt;
use std::str::FromStr;

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Error, Result};

pub type Unitary = Matrix2<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    X90,
    X180,
    /// Z rotation by an angle in `(-π, π]`.
    Z(f64),
    H,
    S,
    Sdg,
    T,
    Tdg,
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(rad: f64) -> f64 {
    if rad > -PI && rad <= PI {
        return rad;
    }
    let r = PI - (PI - rad).rem_euclid(2.0 * PI);
    if r <= -PI {
        r + 2.0 * PI
    } else {
        r
    }
}

impl Gate {
    /// Z rotation; quarter-turn multiples are snapped onto the exact lattice.
    pub fn z(angle_rad: f64) -> Self {
        let k = angle_rad / FRAC_PI_4;
        if (k - k.round()).abs() < 1e-12 {
            Self::z_steps(k.round() as i64)
        } else {
            Gate::Z(wrap_angle(angle_rad))
        }
    }

    /// `Z(k·π/4)` with the angle snapped exactly onto the quarter-turn lattice.
    pub fn z_steps(k: i64) -> Self {
        let k = (k + 3).rem_euclid(8) - 3;
        Gate::Z(k as f64 * FRAC_PI_4)
    }

    /// Standard matrix of the gate.
    pub fn matrix(&self) -> Unitary {
        let h = FRAC_1_SQRT_2;
        match self {
            Gate::X90 => rx(FRAC_PI_2),
            Gate::X180 => rx(PI),
            Gate::Z(phi) => rz(*phi),
            Gate::H => Matrix2::new(c(h), c(h), c(h), c(-h)),
            Gate::S => Matrix2::new(c(1.0), c(0.0), c(0.0), Complex64::i()),
            Gate::Sdg => Matrix2::new(c(1.0), c(0.0), c(0.0), -Complex64::i()),
            Gate::T => Matrix2::new(c(1.0), c(0.0), c(0.0), Complex64::from_polar(1.0, FRAC_PI_4)),
            Gate::Tdg => Matrix2::new(c(1.0), c(0.0), c(0.0), Complex64::from_polar(1.0, -FRAC_PI_4)),
        }
    }
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// `exp(-i θ σx / 2)`.
pub fn rx(theta: f64) -> Unitary {
    rotation(0.0, theta)
}

/// `exp(-i φ σz / 2)`.
pub fn rz(phi: f64) -> Unitary {
    Matrix2::new(
        Complex64::from_polar(1.0, -phi / 2.0),
        c(0.0),
        c(0.0),
        Complex64::from_polar(1.0, phi / 2.0),
    )
}

/// `exp(-i θ (cos φ σx + sin φ σy) / 2)`: rotation by `θ` about an equatorial axis at angle `φ`.
pub fn rotation(phi: f64, theta: f64) -> Unitary {
    let (s, co) = (theta / 2.0).sin_cos();
    let minus_i_s = Complex64::new(0.0, -s);
    Matrix2::new(
        c(co),
        minus_i_s * Complex64::from_polar(1.0, -phi),
        minus_i_s * Complex64::from_polar(1.0, phi),
        c(co),
    )
}

/// Product `G_n ··· G_1` of a time-ordered gate list.
pub fn ideal_unitary(gates: &[Gate]) -> Unitary {
    gates.iter().fold(Unitary::identity(), |u, g| g.matrix() * u)
}

/// Frobenius distance between `u` and `v` after removing the best global phase.
pub fn phase_distance(u: &Unitary, v: &Unitary) -> f64 {
    let overlap = (v.adjoint() * u).trace();
    let alpha = if overlap.norm() > 0.0 { overlap.arg() } else { 0.0 };
    (u - v * Complex64::from_polar(1.0, alpha)).norm()
}

/// True iff `u` equals `v` up to a global phase within `tol` (Frobenius).
pub fn equivalent(u: &Unitary, v: &Unitary, tol: f64) -> bool {
    phase_distance(u, v) < tol
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gate::X90 => f.write_str("X90"),
            Gate::X180 => f.write_str("X180"),
            Gate::H => f.write_str("H"),
            Gate::S => f.write_str("S"),
            Gate::Sdg => f.write_str("Sdg"),
            Gate::T => f.write_str("T"),
            Gate::Tdg => f.write_str("Tdg"),
            Gate::Z(phi) => {
                let k = phi / FRAC_PI_4;
                if (k - k.round()).abs() < 1e-12 {
                    match k.round() as i64 {
                        0 => f.write_str("Z(0)"),
                        4 => f.write_str("Z(pi)"),
                        1 => f.write_str("Z(pi/4)"),
                        -1 => f.write_str("Z(-pi/4)"),
                        2 => f.write_str("Z(pi/2)"),
                        -2 => f.write_str("Z(-pi/2)"),
                        k => write!(f, "Z({k}pi/4)"),
                    }
                } else {
                    write!(f, "Z({phi})")
                }
            }
        }
    }
}

/// Parses an angle: plain radians (`0.3`), degrees (`45deg`) or multiples of
/// π (`pi`, `-pi/4`, `3pi/4`, `3*pi/4`, `pi*0.5`).
pub fn parse_angle(s: &str) -> Result<f64> {
    let s = s.trim().replace(' ', "");
    let bad = || invalid(format!("cannot parse angle '{s}'"));
    if let Some(deg) = s.strip_suffix("deg") {
        let d: f64 = deg.parse().map_err(|_| bad())?;
        return Ok(crate::signals::deg_to_rad(d));
    }
    let Some(pos) = s.find("pi") else {
        return s.parse().map_err(|_| bad());
    };
    let (head, tail) = (&s[..pos], &s[pos + 2..]);
    let coefficient = match head.trim_end_matches('*') {
        "" | "+" => 1.0,
        "-" => -1.0,
        h => h.parse::<f64>().map_err(|_| bad())?,
    };
    let factor = if tail.is_empty() {
        1.0
    } else if let Some(d) = tail.strip_prefix('/') {
        1.0 / d.parse::<f64>().map_err(|_| bad())?
    } else if let Some(m) = tail.strip_prefix('*') {
        m.parse::<f64>().map_err(|_| bad())?
    } else {
        return Err(bad());
    };
    let value = coefficient * factor;
    // exact quarter-turn multiples stay on the lattice
    let k = value * 4.0;
    if (k - k.round()).abs() < 1e-12 {
        Ok(k.round() * FRAC_PI_4)
    } else {
        Ok(value * PI)
    }
}

impl FromStr for Gate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        match t {
            "X90" | "x90" => return Ok(Gate::X90),
            "X180" | "x180" | "X" => return Ok(Gate::X180),
            "H" | "h" => return Ok(Gate::H),
            "S" | "s" => return Ok(Gate::S),
            "Sdg" | "sdg" => return Ok(Gate::Sdg),
            "T" | "t" => return Ok(Gate::T),
            "Tdg" | "tdg" => return Ok(Gate::Tdg),
            _ => {}
        }
        let inner = t
            .strip_prefix("Z(")
            .or_else(|| t.strip_prefix("z("))
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| invalid(format!("unknown gate '{t}'")))?;
        Ok(Gate::z(parse_angle(inner)?))
    }
}

impl Serialize for Gate {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Gate {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_forms() {
        assert_eq!("X90".parse::<Gate>().unwrap(), Gate::X90);
        assert_eq!("Tdg".parse::<Gate>().unwrap(), Gate::Tdg);
        assert_eq!("Z(pi/4)".parse::<Gate>().unwrap(), Gate::Z(FRAC_PI_4));
        assert_eq!("Z(-3pi/4)".parse::<Gate>().unwrap(), Gate::Z(-3.0 * FRAC_PI_4));
        assert_eq!("Z(3*pi/4)".parse::<Gate>().unwrap(), Gate::Z(3.0 * FRAC_PI_4));
        assert_eq!("Z(90deg)".parse::<Gate>().unwrap(), Gate::Z(FRAC_PI_2));
        assert_eq!("Z(0.3)".parse::<Gate>().unwrap(), Gate::Z(0.3));
        assert_eq!("Z(-pi)".parse::<Gate>().unwrap(), Gate::Z(PI));
        assert!("Y90".parse::<Gate>().is_err());
        assert!("Z(pie)".parse::<Gate>().is_err());
    }

    #[test]
    fn display_round_trips() {
        for k in -3..=4 {
            let g = Gate::z_steps(k);
            assert_eq!(g.to_string().parse::<Gate>().unwrap(), g);
        }
        let g = Gate::z(0.123);
        assert_eq!(g.to_string().parse::<Gate>().unwrap(), g);
    }

    #[test]
    fn angles_wrap_into_half_open_interval() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(3.0 * PI / 2.0) + FRAC_PI_2).abs() < 1e-15);
        assert_eq!(Gate::z_steps(-4), Gate::Z(PI));
        assert_eq!(Gate::z_steps(5), Gate::Z(-3.0 * FRAC_PI_4));
    }

    #[test]
    fn ideal_products() {
        let x = ideal_unitary(&[Gate::X90, Gate::X90]);
        let pauli_x = Matrix2::new(c(0.0), c(1.0), c(1.0), c(0.0));
        assert!(equivalent(&x, &pauli_x, 1e-12));
        assert_eq!(ideal_unitary(&[]), Unitary::identity());
        assert!(equivalent(&ideal_unitary(&[Gate::H, Gate::H]), &Unitary::identity(), 1e-12));
        // H = S·X90·S up to global phase
        assert!(equivalent(&ideal_unitary(&[Gate::S, Gate::X90, Gate::S]), &Gate::H.matrix(), 1e-12));
    }

    #[test]
    fn equivalence_examples() {
        let x90 = Gate::X90.matrix();
        assert!(equivalent(&x90, &x90, 1e-12));
        assert!(equivalent(&x90, &(-x90), 1e-12));
        let y90 = rotation(FRAC_PI_2, FRAC_PI_2);
        assert!(!equivalent(&x90, &y90, 1e-6));
    }

    #[test]
    fn gates_serialize_as_strings() {
        let gs = vec![Gate::X90, Gate::T, Gate::z_steps(3)];
        let s = serde_json::to_string(&gs).unwrap();
        assert_eq!(s, r#"["X90","T","Z(3pi/4)"]"#);
        let back: Vec<Gate> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, gs);
    }
}
