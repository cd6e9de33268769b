//! Time-warp estimation: `min_gamma rms(y1(t) - y2(gamma t))`.

use serde::{Deserialize, Serialize};

use crate::dynamics::{interpolate_near, Trajectory};
use crate::{Error, Result};

/// A scalar channel sampled on a strictly increasing time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl Signal {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() || times.len() < 2 {
            return Err(Error::InvalidInput("signal needs matching times/values with at least two samples".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("signal times must be strictly increasing".into()));
        }
        Ok(Self { times, values })
    }

    pub fn from_trajectory(traj: &Trajectory, index: usize) -> Result<Self> {
        Self::new(traj.times().to_vec(), traj.channel(index))
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        self.values.iter_mut().for_each(|v| *v *= factor);
        self
    }

    fn span(&self) -> f64 {
        self.times[self.times.len() - 1] - self.times[0]
    }

    fn is_constant(&self) -> bool {
        let (lo, hi) = self.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let scale = lo.abs().max(hi.abs()).max(1.0);
        !(hi - lo > 1e-12 * scale)
    }
}

/// Grid-then-golden-section search over the warp factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeScaleSearch {
    pub min_gamma: f64,
    pub max_gamma: f64,
    /// Number of logarithmically spaced grid points.
    pub grid: usize,
    /// Minimum fraction of `y1`'s span that must overlap after warping.
    pub min_support: f64,
    pub refine_iters: usize,
}

impl Default for TimeScaleSearch {
    fn default() -> Self {
        Self { min_gamma: 0.1, max_gamma: 10.0, grid: 200, min_support: 0.3, refine_iters: 80 }
    }
}

impl TimeScaleSearch {
    /// RMS of `y1(t) - y2(gamma t)` over the common support, or `None`
    /// when the overlap is below `min_support`.
    pub fn cost(&self, y1: &Signal, y2: &Signal, gamma: f64) -> Option<f64> {
        let t2_end = y2.times[y2.times.len() - 1];
        let t2_start = y2.times[0];
        let snap = 1e-9 * t2_end.abs().max(1.0);
        let mut k = 0;
        let mut acc = 0.0;
        let mut count = 0usize;
        let mut last_t = y1.times[0];
        let value = |i: usize| y2.values[i];
        for (&t, &v) in y1.times.iter().zip(&y1.values) {
            let tw = gamma * t;
            if tw < t2_start - snap {
                continue;
            }
            if tw > t2_end + snap {
                break;
            }
            while k < y2.times.len() && y2.times[k] < tw {
                k += 1;
            }
            let d = v - interpolate_near(&y2.times, &value, tw, k, snap);
            acc += d * d;
            count += 1;
            last_t = t;
        }
        if count < 2 || (last_t - y1.times[0]) < self.min_support * y1.span() {
            return None;
        }
        Some((acc / count as f64).sqrt())
    }

    /// RMS over several channels sharing one warp; `None` when any channel
    /// lacks overlap.
    pub fn cost_multi(&self, pairs: &[(&Signal, &Signal)], gamma: f64) -> Option<f64> {
        let mut acc = 0.0;
        for (y1, y2) in pairs {
            acc += self.cost(y1, y2, gamma)?.powi(2);
        }
        Some((acc / pairs.len() as f64).sqrt())
    }

    /// Returns the minimising warp and its cost.
    pub fn minimize(&self, y1: &Signal, y2: &Signal) -> Result<(f64, f64)> {
        self.minimize_multi(&[(y1, y2)])
    }

    /// Warp minimising [`Self::cost_multi`] and its cost.
    pub fn minimize_multi(&self, pairs: &[(&Signal, &Signal)]) -> Result<(f64, f64)> {
        if pairs.is_empty() {
            return Err(Error::InvalidInput("no channels to compare".into()));
        }
        if pairs.iter().any(|(a, b)| a.is_constant() || b.is_constant()) {
            return Err(Error::DegenerateSignal("cannot estimate a time scale from a constant signal".into()));
        }
        if !(self.min_gamma > 0.0 && self.max_gamma > self.min_gamma && self.grid >= 3) {
            return Err(Error::InvalidInput("invalid time-scale search range".into()));
        }
        let (llo, lhi) = (self.min_gamma.ln(), self.max_gamma.ln());
        let step = (lhi - llo) / (self.grid - 1) as f64;
        let at = |i: usize| (llo + step * i as f64).exp();
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.grid {
            if let Some(c) = self.cost_multi(pairs, at(i)) {
                if best.is_none_or(|(_, b)| c < b) {
                    best = Some((i, c));
                }
            }
        }
        let (bi, bc) = best.ok_or_else(|| Error::InvalidInput("signals do not overlap for any warp".into()))?;
        // golden-section refinement in log space between the grid neighbours
        let f = |lg: f64| self.cost_multi(pairs, lg.exp()).unwrap_or(f64::INFINITY);
        let (mut a, mut b) = (llo + step * bi.saturating_sub(1) as f64, llo + step * (bi + 1).min(self.grid - 1) as f64);
        let r = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = b - r * (b - a);
        let mut d = a + r * (b - a);
        let (mut fc, mut fd) = (f(c), f(d));
        for _ in 0..self.refine_iters {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - r * (b - a);
                fc = f(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + r * (b - a);
                fd = f(d);
            }
        }
        let (lg, cost) = if fc < fd { (c, fc) } else { (d, fd) };
        Ok(if cost < bc { (lg.exp(), cost) } else { (at(bi), bc) })
    }
}

/// Warp `gamma` minimising `rms(y1(t) - y2(gamma t))` with the default search.
pub fn estimate_time_scale(y1: &Signal, y2: &Signal) -> Result<f64> {
    TimeScaleSearch::default().minimize(y1, y2).map(|(g, _)| g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn response(t: f64) -> f64 {
        (-0.3 * t).exp() * (1.7 * t).cos() + 0.2 * (0.4 * t).sin()
    }

    fn grid(n: usize, dt: f64) -> Vec<f64> {
        (0..n).map(|i| i as f64 * dt).collect()
    }

    #[test]
    fn identical_signals_give_unit_warp() {
        let t = grid(400, 0.05);
        let y = Signal::new(t.clone(), t.iter().map(|&t| response(t)).collect()).unwrap();
        let g = estimate_time_scale(&y, &y).unwrap();
        assert!((g - 1.0).abs() < 1e-6, "{g}");
    }

    #[test]
    fn recovers_double_speed() {
        let t = grid(400, 0.05);
        let y1 = Signal::new(t.clone(), t.iter().map(|&t| response(t)).collect()).unwrap();
        // y2(t) = y1(t / 2) so that y1(t) = y2(2 t)
        let y2 = Signal::new(t.clone(), t.iter().map(|&t| response(t / 2.0)).collect()).unwrap();
        let g = estimate_time_scale(&y1, &y2).unwrap();
        assert!((g - 2.0).abs() < 1e-3, "{g}");
        // and the mirrored construction y2(t) = y1(2t)
        let y2 = Signal::new(t.clone(), t.iter().map(|&t| response(2.0 * t)).collect()).unwrap();
        let g = estimate_time_scale(&y1, &y2).unwrap();
        assert!((g - 0.5).abs() < 1e-3, "{g}");
    }

    #[test]
    fn multi_channel_matches_single_channel_on_copies() {
        let t = grid(400, 0.05);
        let y1 = Signal::new(t.clone(), t.iter().map(|&t| response(t)).collect()).unwrap();
        let y2 = Signal::new(t.clone(), t.iter().map(|&t| response(t / 1.5)).collect()).unwrap();
        let s = TimeScaleSearch::default();
        let single = s.minimize(&y1, &y2).unwrap();
        let multi = s.minimize_multi(&[(&y1, &y2), (&y1, &y2)]).unwrap();
        assert_eq!(single, multi);
        assert!(s.minimize_multi(&[]).is_err());
    }

    #[test]
    fn constant_signal_is_degenerate() {
        let t = grid(50, 0.1);
        let c = Signal::new(t.clone(), vec![1.0; 50]).unwrap();
        let y = Signal::new(t.clone(), t.iter().map(|&t| response(t)).collect()).unwrap();
        assert!(matches!(estimate_time_scale(&c, &y), Err(Error::DegenerateSignal(_))));
    }

    #[test]
    fn independent_noise_stays_above_threshold() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let t = grid(400, 0.05);
        let a = Signal::new(t.clone(), (0..400).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let b = Signal::new(t.clone(), (0..400).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let (_, cost) = TimeScaleSearch::default().minimize(&a, &b).unwrap();
        assert!(cost > 0.1, "{cost}");
    }
}
