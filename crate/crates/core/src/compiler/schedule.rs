//! Time-division scheduling of lowered pulses onto shared-IF control cycles.
//!
//! Every cycle has one global IF phase; a qubit fires in a cycle when its next
//! pulse wants exactly that phase.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::lower::LoweredQubit;
use crate::error::{invalid, Error, Result};
use crate::signals::{normalize_deg, phase_steps};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleMode {
    /// Phases roll 0°, 45°, …, 315°; cycles in which nobody fires are skipped.
    #[default]
    Quantized45,
    /// Phases roll as above and every cycle is emitted, including empty ones.
    Rolling45,
    /// Each cycle takes the phase wanted by the most ready pulses.
    Free,
}

impl FromStr for ScheduleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quantized45" => Ok(Self::Quantized45),
            "rolling45" => Ok(Self::Rolling45),
            "free" => Ok(Self::Free),
            _ => Err(invalid(format!("unknown schedule mode '{s}' (quantized45, rolling45, free)"))),
        }
    }
}

impl fmt::Display for ScheduleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Quantized45 => "quantized45",
            Self::Rolling45 => "rolling45",
            Self::Free => "free",
        })
    }
}

/// When a qubit's next pulse becomes eligible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyncPolicy {
    /// As soon as the qubit's previous pulse has fired.
    #[default]
    Asap,
    /// The k-th pulse waits until every qubit has fired its (k-1)-th pulse.
    Layered,
}

impl FromStr for SyncPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "asap" => Ok(Self::Asap),
            "layered" => Ok(Self::Layered),
            _ => Err(invalid(format!("unknown sync policy '{s}' (asap, layered)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cycle {
    /// Position on the rolling phase clock (equals the cycle index in free mode).
    pub slot: usize,
    #[serde(rename = "theta_if")]
    pub theta_if_deg: f64,
    /// Qubits fired in this cycle, ascending.
    pub fired: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub mode: ScheduleMode,
    pub sync: SyncPolicy,
    pub n_qubits: usize,
    pub cycles: Vec<Cycle>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParallelismStats {
    pub cycles: usize,
    pub mean_fired: f64,
    pub max_fired: usize,
    /// Smallest nonzero fired count; 0 when nothing fires.
    pub min_nonzero_fired: usize,
}

struct Cursor<'a> {
    lowered: &'a [LoweredQubit],
    next: Vec<usize>,
    remaining: usize,
    sync: SyncPolicy,
}

impl Cursor<'_> {
    /// Qubits whose next pulse may fire now.
    fn ready(&self) -> impl Iterator<Item = usize> + '_ {
        let layer = match self.sync {
            SyncPolicy::Asap => usize::MAX,
            SyncPolicy::Layered => (0..self.lowered.len())
                .filter(|&q| self.next[q] < self.lowered[q].pulses.len())
                .map(|q| self.next[q])
                .min()
                .unwrap_or(usize::MAX),
        };
        (0..self.lowered.len()).filter(move |&q| self.next[q] < self.lowered[q].pulses.len() && self.next[q] <= layer)
    }

    fn fire(&mut self, fired: &[usize]) {
        for &q in fired {
            self.next[q] += 1;
        }
        self.remaining -= fired.len();
    }
}

/// Schedules the lowered pulses of all qubits.
pub fn schedule(lowered: &[LoweredQubit], mode: ScheduleMode, sync: SyncPolicy) -> Result<Schedule> {
    let mut cursor = Cursor {
        lowered,
        next: vec![0; lowered.len()],
        remaining: lowered.iter().map(|l| l.pulses.len()).sum(),
        sync,
    };
    let mut cycles = Vec::new();

    match mode {
        ScheduleMode::Quantized45 | ScheduleMode::Rolling45 => {
            let steps: Vec<Vec<i64>> = lowered
                .iter()
                .map(|l| {
                    l.pulses
                        .iter()
                        .map(|&theta| {
                            phase_steps(theta)
                                .map(|k| k.rem_euclid(8))
                                .ok_or(Error::UnquantizedPhase { theta_deg: theta })
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<_>>()?;
            let mut slot = 0usize;
            while cursor.remaining > 0 {
                let phase = (slot % 8) as i64;
                let fired: Vec<usize> = cursor
                    .ready()
                    .filter(|&q| steps[q][cursor.next[q]] == phase)
                    .collect();
                if !fired.is_empty() || mode == ScheduleMode::Rolling45 {
                    cursor.fire(&fired);
                    cycles.push(Cycle {
                        slot,
                        theta_if_deg: 45.0 * phase as f64,
                        fired,
                    });
                }
                slot += 1;
            }
        }
        ScheduleMode::Free => {
            while cursor.remaining > 0 {
                // keyed by the bit pattern of a non-negative angle, which sorts numerically
                let mut groups: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
                for q in cursor.ready() {
                    let theta = normalize_deg(lowered[q].pulses[cursor.next[q]]) + 0.0;
                    groups.entry(theta.to_bits()).or_default().push(q);
                }
                let (bits, fired) = groups
                    .into_iter()
                    .fold(None::<(u64, Vec<usize>)>, |best, (k, v)| match best {
                        Some((bk, bv)) if bv.len() >= v.len() => Some((bk, bv)),
                        _ => Some((k, v)),
                    })
                    .expect("work remains, so some qubit is ready");
                cursor.fire(&fired);
                cycles.push(Cycle {
                    slot: cycles.len(),
                    theta_if_deg: f64::from_bits(bits),
                    fired,
                });
            }
        }
    }
    Ok(Schedule {
        mode,
        sync,
        n_qubits: lowered.len(),
        cycles,
    })
}

impl Schedule {
    /// IF phases of `qubit`'s pulses in firing order.
    pub fn pulses_of(&self, qubit: usize) -> Vec<f64> {
        self.cycles
            .iter()
            .filter(|c| c.fired.contains(&qubit))
            .map(|c| c.theta_if_deg)
            .collect()
    }

    /// Indices of the cycles in which `qubit` fires.
    pub fn cycles_of(&self, qubit: usize) -> Vec<usize> {
        self.cycles
            .iter()
            .enumerate()
            .filter(|(_, c)| c.fired.contains(&qubit))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn total_pulses(&self) -> usize {
        self.cycles.iter().map(|c| c.fired.len()).sum()
    }

    /// CSV rows `cycle,slot,theta_if_deg,qubit`, one per fired pulse.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["cycle", "slot", "theta_if_deg", "qubit"])?;
        for (i, c) in self.cycles.iter().enumerate() {
            for q in &c.fired {
                w.write_record([i.to_string(), c.slot.to_string(), c.theta_if_deg.to_string(), q.to_string()])?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

pub fn parallelism_stats(s: &Schedule) -> ParallelismStats {
    let counts: Vec<usize> = s.cycles.iter().map(|c| c.fired.len()).collect();
    if counts.is_empty() {
        return ParallelismStats {
            cycles: 0,
            mean_fired: 0.0,
            max_fired: 0,
            min_nonzero_fired: 0,
        };
    }
    ParallelismStats {
        cycles: counts.len(),
        mean_fired: counts.iter().sum::<usize>() as f64 / counts.len() as f64,
        max_fired: counts.iter().copied().max().unwrap_or(0),
        min_nonzero_fired: counts.iter().copied().filter(|&c| c > 0).min().unwrap_or(0),
    }
}
