use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::wrap_angle;
use crate::{Error, Result};

/// Sampled closed-loop response.
///
/// `controls[i]` is the input applied from `times[i]` until the next sample;
/// the last entry repeats the final applied input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    dim: usize,
    times: Vec<f64>,
    states: Vec<f64>,
    controls: Vec<f64>,
}

impl Trajectory {
    pub fn new(dim: usize) -> Self {
        Self { dim, times: Vec::new(), states: Vec::new(), controls: Vec::new() }
    }

    /// Builds a trajectory from rows, checking the ordering and shape invariants.
    pub fn from_parts(times: Vec<f64>, states: Vec<Vec<f64>>, controls: Vec<f64>) -> Result<Self> {
        if times.len() != states.len() || times.len() != controls.len() {
            return Err(Error::InvalidInput("trajectory columns have different lengths".into()));
        }
        let dim = states.first().map_or(0, Vec::len);
        let mut traj = Self::new(dim);
        for ((t, s), u) in times.into_iter().zip(states).zip(controls) {
            if s.len() != dim {
                return Err(Error::InvalidInput("ragged state rows".into()));
            }
            if traj.times.last().is_some_and(|&last| t <= last) {
                return Err(Error::InvalidInput(format!("times not strictly increasing at t = {t}")));
            }
            traj.push(t, &s, u);
        }
        Ok(traj)
    }

    pub(crate) fn push(&mut self, t: f64, state: &[f64], u: f64) {
        debug_assert_eq!(state.len(), self.dim);
        self.times.push(t);
        self.states.extend_from_slice(state);
        self.controls.push(u);
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

    pub fn controls(&self) -> &[f64] {
        &self.controls
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn states(&self) -> impl Iterator<Item = &[f64]> {
        self.states.chunks_exact(self.dim.max(1))
    }

    pub fn last_state(&self) -> Option<&[f64]> {
        (!self.is_empty()).then(|| self.state(self.len() - 1))
    }

    pub fn final_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    /// One state component as a column.
    pub fn channel(&self, index: usize) -> Vec<f64> {
        self.states().map(|s| s[index]).collect()
    }

    /// Copy with the given state components wrapped into `[-pi, pi)`.
    pub fn wrapped(&self, angle_indices: &[usize]) -> Self {
        let mut out = self.clone();
        for row in out.states.chunks_exact_mut(self.dim) {
            for &i in angle_indices {
                row[i] = wrap_angle(row[i]);
            }
        }
        out
    }

    /// Samples from `t0` onwards with their times shifted to start at zero.
    pub fn window_from(&self, t0: f64) -> Self {
        let mut out = Self::new(self.dim);
        for i in 0..self.len() {
            if self.times[i] >= t0 {
                out.push(self.times[i] - t0, self.state(i), self.controls[i]);
            }
        }
        out
    }

    /// Evaluates state component `index` at time `t` by cubic interpolation.
    ///
    /// Times within `1e-9` (relative) of a stored sample return that sample
    /// exactly. Returns `None` outside the recorded span.
    pub fn interpolate(&self, index: usize, t: f64) -> Option<f64> {
        interpolate_cubic(&self.times, |i| self.states[i * self.dim + index], t)
    }

    /// Writes `t,x1,...,xn,u` with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header = String::from("t");
        for i in 1..=self.dim {
            header.push_str(&format!(",x{i}"));
        }
        header.push_str(",u");
        writeln!(w, "{header}")?;
        for i in 0..self.len() {
            let mut line = fmt17(self.times[i]);
            for v in self.state(i) {
                line.push(',');
                line.push_str(&fmt17(*v));
            }
            line.push(',');
            line.push_str(&fmt17(self.controls[i]));
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| Error::InvalidInput("empty trajectory CSV".into()))??;
        let cols: Vec<&str> = header.trim().split(',').collect();
        if cols.len() < 3 || cols[0] != "t" || cols[cols.len() - 1] != "u" {
            return Err(Error::InvalidInput(format!("unexpected trajectory header `{header}`")));
        }
        let dim = cols.len() - 2;
        let (mut times, mut states, mut controls) = (Vec::new(), Vec::new(), Vec::new());
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let vals = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::InvalidInput(format!("line {}: {e}", lineno + 2)))?;
            if vals.len() != dim + 2 {
                return Err(Error::InvalidInput(format!("line {}: wrong column count", lineno + 2)));
            }
            times.push(vals[0]);
            states.push(vals[1..=dim].to_vec());
            controls.push(vals[dim + 1]);
        }
        Self::from_parts(times, states, controls)
    }
}

/// Four-point Lagrange interpolation on a strictly increasing grid.
pub(crate) fn interpolate_cubic(times: &[f64], value: impl Fn(usize) -> f64, t: f64) -> Option<f64> {
    let n = times.len();
    if n == 0 {
        return None;
    }
    let (t0, t1) = (times[0], times[n - 1]);
    let snap = 1e-9 * t1.abs().max(1.0);
    if t < t0 - snap || t > t1 + snap {
        return None;
    }
    let k = times.partition_point(|&s| s < t);
    Some(interpolate_near(times, &value, t, k, snap))
}

/// Interpolates at `t` given `k = first index with times[k] >= t`.
#[inline]
pub(crate) fn interpolate_near(times: &[f64], value: &impl Fn(usize) -> f64, t: f64, k: usize, snap: f64) -> f64 {
    let n = times.len();
    for j in [k.saturating_sub(1), k.min(n - 1)] {
        if (times[j] - t).abs() <= snap {
            return value(j);
        }
    }
    if n < 4 {
        if n == 1 {
            return value(0);
        }
        let k = k.clamp(1, n - 1);
        let (ta, tb) = (times[k - 1], times[k]);
        let w = (t - ta) / (tb - ta);
        return (1.0 - w) * value(k - 1) + w * value(k);
    }
    let start = k.saturating_sub(2).min(n - 4);
    let mut acc = 0.0;
    for a in start..start + 4 {
        let mut basis = 1.0;
        for b in start..start + 4 {
            if a != b {
                basis *= (t - times[b]) / (times[a] - times[b]);
            }
        }
        acc += basis * value(a);
    }
    acc
}

/// Formats with 17 significant digits, enough to round-trip any `f64`.
pub(crate) fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sine_traj(n: usize, dt: f64) -> Trajectory {
        let times: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
        let states = times.iter().map(|t| vec![t.sin(), t.cos()]).collect();
        Trajectory::from_parts(times, states, vec![0.0; n]).unwrap()
    }

    #[test]
    fn rejects_unsorted_times() {
        let r = Trajectory::from_parts(vec![0.0, 0.0], vec![vec![1.0], vec![2.0]], vec![0.0, 0.0]);
        assert!(r.is_err());
        let r = Trajectory::from_parts(vec![0.0], vec![vec![1.0]], vec![0.0, 1.0]);
        assert!(r.is_err());
    }

    #[test]
    fn cubic_interpolation_is_fourth_order() {
        let tr = sine_traj(201, 0.05);
        let mut worst: f64 = 0.0;
        for i in 0..1000 {
            let t = 0.0 + 9.99 * i as f64 / 1000.0;
            worst = worst.max((tr.interpolate(0, t).unwrap() - t.sin()).abs());
        }
        // h^4/24 * max|f''''| bounds the Lagrange remainder
        assert!(worst < 0.05f64.powi(4) / 24.0, "{worst}");
        assert!(tr.interpolate(0, -0.1).is_none());
        assert!(tr.interpolate(0, 10.1).is_none());
    }

    #[test]
    fn knot_hits_are_exact() {
        let tr = sine_traj(11, 0.1);
        assert_eq!(tr.interpolate(1, 0.3), Some(tr.state(3)[1]));
    }

    #[test]
    fn csv_header_and_digits() {
        let tr = Trajectory::from_parts(vec![0.0, 0.05], vec![vec![0.1, 0.2], vec![0.3, 0.4]], vec![1.0, 2.0]).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,x1,x2,u\n"));
        assert!(text.contains("1.0000000000000001e-1"));
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_lossless(vals in prop::collection::vec(-1e6f64..1e6, 1..40)) {
            let times: Vec<f64> = (0..vals.len()).map(|i| i as f64 * 0.05).collect();
            let states = vals.iter().map(|v| vec![*v, v / 3.0]).collect();
            let tr = Trajectory::from_parts(times, states, vals.clone()).unwrap();
            let mut buf = Vec::new();
            tr.write_csv(&mut buf).unwrap();
            let back = Trajectory::read_csv(std::io::Cursor::new(buf)).unwrap();
            prop_assert_eq!(back, tr);
        }
    }
}
