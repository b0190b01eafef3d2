//! Time-stamped states plus the merge/delete event log of one run.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::json::{fmt_f64, to_json_string};
use crate::mass::{ord_unchecked, OrderedMassVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Merge,
    Delete,
}

/// One change of the component state.
///
/// Components are identified by their least vertex index. A merge lists the
/// two merging components and the weight of the result; a deletion lists the
/// deleted component and its weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McldEvent {
    pub time: f64,
    pub kind: EventKind,
    pub components: Vec<usize>,
    pub weight: f64,
}

/// Receives every effective event of a run, in processing order.
pub trait Observer {
    fn on_event(&mut self, event: &McldEvent);
}

impl<F: FnMut(&McldEvent)> Observer for F {
    fn on_event(&mut self, event: &McldEvent) {
        self(event)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub initial: OrderedMassVector,
    pub grid: Vec<f64>,
    pub states: Vec<OrderedMassVector>,
    pub events: Vec<McldEvent>,
    pub horizon: f64,
}

pub(crate) fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid("time grid is empty"));
    }
    if grid.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::invalid("grid times must be finite and nonnegative"));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("time grid must be strictly increasing"));
    }
    Ok(())
}

impl Trajectory {
    /// Φ(t): total weight deleted at times `<= t`.
    pub fn deleted_mass_up_to(&self, t: f64) -> Result<f64> {
        if t > self.horizon {
            return Err(Error::invalid(format!(
                "t = {t} lies beyond the trajectory horizon {}",
                self.horizon
            )));
        }
        Ok(self
            .events
            .iter()
            .filter(|e| e.kind == EventKind::Delete && e.time <= t)
            .fold(0.0, |acc, e| acc + e.weight))
    }

    /// Rebuilds the state at `t` from the initial vector and the event log.
    pub fn replay(&self, t: f64) -> OrderedMassVector {
        let mut comps: BTreeMap<usize, f64> = self
            .initial
            .as_slice()
            .iter()
            .copied()
            .enumerate()
            .collect();
        for e in self.events.iter().take_while(|e| e.time <= t) {
            match e.kind {
                EventKind::Merge => {
                    let (a, b) = (e.components[0], e.components[1]);
                    comps.remove(&b);
                    comps.insert(a.min(b), e.weight);
                    if a > b {
                        comps.remove(&a);
                    }
                }
                EventKind::Delete => {
                    comps.remove(&e.components[0]);
                }
            }
        }
        ord_unchecked(comps.into_values().collect())
    }

    /// CSV with header `time,rank,mass`; ranks start at 1. An empty state has no rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time,rank,mass\n");
        for (t, state) in self.grid.iter().zip(&self.states) {
            for (k, m) in state.as_slice().iter().enumerate() {
                let _ = writeln!(out, "{},{},{}", fmt_f64(*t), k + 1, fmt_f64(*m));
            }
        }
        out
    }

    pub fn events_json(&self) -> String {
        to_json_string(&self.events)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Trajectory {
        Trajectory {
            initial: OrderedMassVector::new(vec![2.0, 1.0, 1.0]).unwrap(),
            grid: vec![0.0, 0.5, 1.0],
            states: vec![
                OrderedMassVector::new(vec![2.0, 1.0, 1.0]).unwrap(),
                OrderedMassVector::new(vec![3.0, 1.0]).unwrap(),
                OrderedMassVector::new(vec![1.0]).unwrap(),
            ],
            events: vec![
                McldEvent { time: 0.2, kind: EventKind::Merge, components: vec![0, 2], weight: 3.0 },
                McldEvent { time: 0.3, kind: EventKind::Delete, components: vec![1], weight: 1.0 },
            ],
            horizon: 1.0,
        }
    }

    #[test]
    fn deleted_mass_steps() {
        let t = sample();
        assert_eq!(t.deleted_mass_up_to(0.25).unwrap(), 0.0);
        assert_eq!(t.deleted_mass_up_to(0.3).unwrap(), 1.0);
        assert!(t.deleted_mass_up_to(1.5).is_err());
    }

    #[test]
    fn replay_follows_log() {
        let t = sample();
        assert_eq!(t.replay(0.1), t.initial);
        assert_eq!(t.replay(0.2).as_slice(), &[3.0, 1.0]);
        assert_eq!(t.replay(0.9).as_slice(), &[3.0]);
    }

    #[test]
    fn csv_and_json_shapes() {
        let t = sample();
        let csv = t.to_csv();
        assert!(csv.starts_with("time,rank,mass\n"));
        assert_eq!(csv.lines().count(), 1 + 3 + 2 + 1);
        let json = t.events_json();
        assert!(json.contains("\"kind\":\"merge\""));
        let back: Vec<McldEvent> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t.events);
    }

    #[test]
    fn grid_validation() {
        assert!(validate_grid(&[0.0, 1.0]).is_ok());
        assert!(validate_grid(&[1.0, 1.0]).is_err());
        assert!(validate_grid(&[]).is_err());
        assert!(validate_grid(&[-1.0]).is_err());
    }
}
