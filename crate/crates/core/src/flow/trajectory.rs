use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::system::FlowSystem;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TerminalEvent {
    Completed,
    Escaped { t: f64 },
    Stopped { t: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorMeta {
    pub scheme: String,
    pub rtol: f64,
    pub atol: f64,
    pub accepted: usize,
    pub rejected: usize,
    pub min_step: f64,
    pub max_step: f64,
    pub max_error_estimate: f64,
}

impl IntegratorMeta {
    pub fn new(scheme: &str, rtol: f64, atol: f64) -> Self {
        IntegratorMeta {
            scheme: scheme.to_string(),
            rtol,
            atol,
            accepted: 0,
            rejected: 0,
            min_step: f64::INFINITY,
            max_step: 0.0,
            max_error_estimate: 0.0,
        }
    }
}

/// Sampled solution curve in the coordinates of the system that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    dim: usize,
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
    energies: Vec<f64>,
    kinetic: Vec<f64>,
    meta: IntegratorMeta,
    event: TerminalEvent,
}

const MAGIC: &[u8; 8] = b"TWHTRAJ\0";
const CACHE_VERSION: u32 = 1;

impl Trajectory {
    pub(crate) fn start(dim: usize, t: f64, y: Vec<f64>, e: f64, k: f64) -> Self {
        Trajectory {
            dim,
            times: vec![t],
            states: vec![y],
            energies: vec![e],
            kinetic: vec![k],
            meta: IntegratorMeta::new("none", 0.0, 0.0),
            event: TerminalEvent::Completed,
        }
    }

    /// Builds a trajectory from samples (e.g. a collocation solution).
    pub fn from_samples(
        times: Vec<f64>,
        states: Vec<Vec<f64>>,
        energies: Vec<f64>,
        kinetic: Vec<f64>,
        meta: IntegratorMeta,
    ) -> Result<Self> {
        let n = times.len();
        if n == 0 || states.len() != n || energies.len() != n || kinetic.len() != n {
            return Err(Error::config("trajectory samples must be non-empty and of equal length"));
        }
        let dim = states[0].len();
        if states.iter().any(|s| s.len() != dim) {
            return Err(Error::config("trajectory states differ in dimension"));
        }
        Ok(Trajectory { dim, times, states, energies, kinetic, meta, event: TerminalEvent::Completed })
    }

    pub(crate) fn push(&mut self, t: f64, y: Vec<f64>, e: f64, k: f64) {
        self.times.push(t);
        self.states.push(y);
        self.energies.push(e);
        self.kinetic.push(k);
    }

    pub(crate) fn finish(&mut self, meta: IntegratorMeta, event: TerminalEvent) {
        self.meta = meta;
        self.event = event;
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// `‖v‖²` per sample.
    pub fn velocity_norms_sq(&self) -> &[f64] {
        &self.kinetic
    }

    pub fn meta(&self) -> &IntegratorMeta {
        &self.meta
    }

    pub fn event(&self) -> TerminalEvent {
        self.event
    }

    pub fn last_state(&self) -> &[f64] {
        self.states.last().expect("trajectory has at least one sample")
    }

    pub fn last_time(&self) -> f64 {
        *self.times.last().expect("trajectory has at least one sample")
    }

    /// Reverses the sample order (for backward integrations).
    pub fn reversed(&self) -> Trajectory {
        let mut t = self.clone();
        t.times.reverse();
        t.states.reverse();
        t.energies.reverse();
        t.kinetic.reverse();
        t
    }

    /// Shifts all sample times by `dt`.
    pub fn shifted(&self, dt: f64) -> Trajectory {
        let mut t = self.clone();
        for x in &mut t.times {
            *x += dt;
        }
        t
    }

    /// Concatenates `other` after `self`, dropping its first sample if it
    /// repeats the last one of `self`.
    pub fn concat(&self, other: &Trajectory) -> Result<Trajectory> {
        if self.dim != other.dim {
            return Err(Error::config("cannot concatenate trajectories of different dimension"));
        }
        let mut t = self.clone();
        let skip = usize::from(other.times.first() == self.times.last());
        for k in skip..other.len() {
            t.push(other.times[k], other.states[k].clone(), other.energies[k], other.kinetic[k]);
        }
        t.meta.accepted += other.meta.accepted;
        t.meta.rejected += other.meta.rejected;
        t.meta.min_step = t.meta.min_step.min(other.meta.min_step);
        t.meta.max_step = t.meta.max_step.max(other.meta.max_step);
        t.meta.max_error_estimate = t.meta.max_error_estimate.max(other.meta.max_error_estimate);
        t.event = other.event;
        Ok(t)
    }

    /// Linear interpolation of the state at time `t` (clamped to the span).
    pub fn state_at(&self, t: f64) -> Vec<f64> {
        let asc = self.times.len() < 2 || self.times[1] >= self.times[0];
        let k = if asc {
            self.times.partition_point(|&x| x <= t)
        } else {
            self.times.partition_point(|&x| x >= t)
        };
        if k == 0 {
            return self.states[0].clone();
        }
        if k >= self.len() {
            return self.last_state().to_vec();
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let w = if t1 == t0 { 0.0 } else { (t - t0) / (t1 - t0) };
        self.states[k - 1].iter().zip(&self.states[k]).map(|(a, b)| a + w * (b - a)).collect()
    }

    /// CSV with columns `t, u1..un, v1..vn, E` on the grid.
    pub fn write_csv(&self, system: &FlowSystem, out: &mut dyn Write) -> Result<()> {
        let n = system.problem().dim();
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("u{i}")));
        header.extend((1..=n).map(|i| format!("v{i}")));
        header.push("E".into());
        writeln!(out, "{}", header.join(","))?;
        for k in 0..self.len() {
            let (u, v) = system.state_to_grid(&self.states[k]);
            let mut line = format!("{:e}", self.times[k]);
            for x in u.iter().chain(&v) {
                line.push_str(&format!(",{x:e}"));
            }
            line.push_str(&format!(",{:e}", self.energies[k]));
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    /// Versioned little-endian binary cache.
    pub fn write_cache(&self, out: &mut dyn Write) -> Result<()> {
        out.write_all(MAGIC)?;
        out.write_all(&CACHE_VERSION.to_le_bytes())?;
        out.write_all(&(self.dim as u64).to_le_bytes())?;
        out.write_all(&(self.len() as u64).to_le_bytes())?;
        let meta = serde_json::to_vec(&(&self.meta, &self.event))?;
        out.write_all(&(meta.len() as u64).to_le_bytes())?;
        out.write_all(&meta)?;
        for k in 0..self.len() {
            out.write_all(&self.times[k].to_le_bytes())?;
            out.write_all(&self.energies[k].to_le_bytes())?;
            out.write_all(&self.kinetic[k].to_le_bytes())?;
            for x in &self.states[k] {
                out.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_cache(input: &mut dyn Read) -> Result<Trajectory> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::config("not a trajectory cache file"));
        }
        let version = read_u32(input)?;
        if version != CACHE_VERSION {
            return Err(Error::config(format!("unsupported trajectory cache version {version}")));
        }
        let dim = read_u64(input)? as usize;
        let len = read_u64(input)? as usize;
        let mlen = read_u64(input)? as usize;
        let mut mbuf = vec![0u8; mlen];
        input.read_exact(&mut mbuf)?;
        let (meta, event): (IntegratorMeta, TerminalEvent) = serde_json::from_slice(&mbuf)?;
        let mut t = Trajectory {
            dim,
            times: Vec::with_capacity(len),
            states: Vec::with_capacity(len),
            energies: Vec::with_capacity(len),
            kinetic: Vec::with_capacity(len),
            meta,
            event,
        };
        for _ in 0..len {
            let time = read_f64(input)?;
            let e = read_f64(input)?;
            let k = read_f64(input)?;
            let s = (0..dim).map(|_| read_f64(input)).collect::<Result<Vec<_>>>()?;
            t.push(time, s, e, k);
        }
        Ok(t)
    }
}

fn read_u32(r: &mut dyn Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut dyn Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut dyn Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{integrate, IntegratorOptions};
    use crate::model::{Nonlinearity, SpatialProblem};

    #[test]
    fn cache_round_trip_and_csv() {
        let sys = FlowSystem::new(&SpatialProblem::point(Nonlinearity::nagumo(0.3), 1.0).unwrap(), None).unwrap();
        let tr = integrate(&sys, &[0.31, 0.0], 0.0, 2.0, &IntegratorOptions::default()).unwrap();
        let mut buf = Vec::new();
        tr.write_cache(&mut buf).unwrap();
        let back = Trajectory::read_cache(&mut buf.as_slice()).unwrap();
        assert_eq!(back, tr);
        buf[9] = 7;
        assert!(Trajectory::read_cache(&mut buf.as_slice()).is_err());

        let mut csv = Vec::new();
        tr.write_csv(&sys, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("t,u1,v1,E\n"));
        assert_eq!(text.lines().count(), tr.len() + 1);
    }

    #[test]
    fn interpolation_in_both_directions() {
        let meta = IntegratorMeta::new("test", 0.0, 0.0);
        let tr = Trajectory::from_samples(vec![0.0, 1.0], vec![vec![0.0], vec![2.0]], vec![0.0; 2], vec![0.0; 2], meta).unwrap();
        assert_eq!(tr.state_at(0.25), vec![0.5]);
        let rev = tr.reversed();
        assert_eq!(rev.state_at(0.25), vec![0.5]);
        assert_eq!(rev.state_at(5.0), vec![2.0]);
        assert_eq!(rev.state_at(-1.0), vec![0.0]);
    }
}
