use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Resampling rate of the common timeline, Hz.
pub const RESAMPLE_RATE: f64 = 30.0;
/// Largest lag searched, s.
pub const MAX_LAG: f64 = 2.0;
/// Shortest usable overlap, s.
pub const MIN_OVERLAP: f64 = 5.0;

/// One time-stamped velocity/position sample (NED, session clock).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedSample {
    pub t: f64,
    pub velocity: [f64; 3],
    pub position: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwinSyncMetrics {
    /// Delay of the physical trace behind the digital one, s.
    pub lag_estimate: f64,
    /// Per-axis RMS velocity error after shifting by the lag, m/s.
    pub rms_velocity_error: [f64; 3],
    /// Largest position gap at equal session time, m.
    pub max_position_divergence: f64,
    /// Samples on the common timeline.
    pub samples: usize,
}

impl TwinSyncMetrics {
    /// Norm of the per-axis RMS errors.
    pub fn rms_velocity_norm(&self) -> f64 {
        self.rms_velocity_error.iter().map(|e| e * e).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("logs overlap for {overlap:.3} s, need at least {MIN_OVERLAP} s")]
    InsufficientOverlap { overlap: f64 },
    #[error("{log} log: {reason}")]
    BadLog { log: &'static str, reason: String },
}

fn check_log(log: &'static str, samples: &[TimedSample]) -> Result<(), MetricsError> {
    let bad = |reason: String| Err(MetricsError::BadLog { log, reason });
    if samples.len() < 2 {
        return bad(format!("{} samples", samples.len()));
    }
    for (i, s) in samples.iter().enumerate() {
        if !s.t.is_finite() || s.velocity.iter().chain(&s.position).any(|v| !v.is_finite()) {
            return bad(format!("sample {i} is not finite"));
        }
        if i > 0 && s.t <= samples[i - 1].t {
            return bad(format!("time not increasing at sample {i}"));
        }
    }
    Ok(())
}

/// Linear interpolation of one log onto `grid`, which lies inside its span.
fn resample(samples: &[TimedSample], grid: &[f64]) -> Vec<TimedSample> {
    let mut j = 0;
    grid.iter()
        .map(|&t| {
            while j + 2 < samples.len() && samples[j + 1].t < t {
                j += 1;
            }
            let (a, b) = (&samples[j], &samples[j + 1]);
            let w = ((t - a.t) / (b.t - a.t)).clamp(0.0, 1.0);
            let mix = |x: [f64; 3], y: [f64; 3]| std::array::from_fn(|k| x[k] + w * (y[k] - x[k]));
            TimedSample {
                t,
                velocity: mix(a.velocity, b.velocity),
                position: mix(a.position, b.position),
            }
        })
        .collect()
}

/// Normalized cross-correlation of `d[i]` against `p[i + lag]`, pooled over axes.
fn correlation_at(d: &[TimedSample], p: &[TimedSample], lag: usize) -> f64 {
    let n = d.len() - lag;
    let (mut num, mut dd, mut pp) = (0.0, 0.0, 0.0);
    for axis in 0..3 {
        let md = d[..n].iter().map(|s| s.velocity[axis]).sum::<f64>() / n as f64;
        let mp = p[lag..].iter().map(|s| s.velocity[axis]).sum::<f64>() / n as f64;
        for i in 0..n {
            let a = d[i].velocity[axis] - md;
            let b = p[i + lag].velocity[axis] - mp;
            num += a * b;
            dd += a * a;
            pp += b * b;
        }
    }
    let den = (dd * pp).sqrt();
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

pub fn compute_sync_metrics(digital: &[TimedSample], physical: &[TimedSample]) -> Result<TwinSyncMetrics, MetricsError> {
    check_log("digital", digital)?;
    check_log("physical", physical)?;
    let start = digital[0].t.max(physical[0].t);
    let end = digital[digital.len() - 1].t.min(physical[physical.len() - 1].t);
    let overlap = end - start;
    if !(overlap >= MIN_OVERLAP) {
        return Err(MetricsError::InsufficientOverlap { overlap });
    }
    let n = (overlap * RESAMPLE_RATE + 1e-9).floor() as usize + 1;
    let grid: Vec<f64> = (0..n).map(|i| start + i as f64 / RESAMPLE_RATE).collect();
    let d = resample(digital, &grid);
    let p = resample(physical, &grid);

    let max_lag = ((MAX_LAG * RESAMPLE_RATE).round() as usize).min(n - 2);
    let scores: Vec<f64> = (0..=max_lag).map(|k| correlation_at(&d, &p, k)).collect();
    let mut best = 0;
    for (k, &c) in scores.iter().enumerate() {
        if c > scores[best] {
            best = k;
        }
    }
    // Parabolic refinement around an interior peak.
    let mut frac = 0.0;
    if best > 0 && best < max_lag {
        let (a, b, c) = (scores[best - 1], scores[best], scores[best + 1]);
        let curv = a - 2.0 * b + c;
        if curv < 0.0 {
            frac = (0.5 * (a - c) / curv).clamp(-0.5, 0.5);
        }
    }
    let lag_estimate = (best as f64 + frac) / RESAMPLE_RATE;

    let m = n - best;
    let rms_velocity_error = std::array::from_fn(|axis| {
        let sq: f64 = (0..m)
            .map(|i| (p[i + best].velocity[axis] - d[i].velocity[axis]).powi(2))
            .sum();
        (sq / m as f64).sqrt()
    });
    let max_position_divergence = d
        .iter()
        .zip(&p)
        .map(|(a, b)| (0..3).map(|k| (a.position[k] - b.position[k]).powi(2)).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    Ok(TwinSyncMetrics {
        lag_estimate,
        rms_velocity_error,
        max_position_divergence,
        samples: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn trace(rate: f64, duration: f64, delay: f64) -> Vec<TimedSample> {
        let n = (duration * rate) as usize;
        (0..=n)
            .map(|i| {
                let t = i as f64 / rate;
                let s = t - delay;
                TimedSample {
                    t,
                    velocity: [2.0 * (0.7 * s).sin(), 1.5 * (0.45 * s + 0.3).cos(), 0.3 * (1.3 * s).sin()],
                    position: [s, 0.0, -10.0],
                }
            })
            .collect()
    }

    #[test]
    fn identity_has_no_lag() {
        let d = trace(250.0, 20.0, 0.0);
        let m = compute_sync_metrics(&d, &d).unwrap();
        assert_eq!(m.lag_estimate, 0.0);
        assert_eq!(m.rms_velocity_error, [0.0; 3]);
        assert_eq!(m.max_position_divergence, 0.0);
    }

    #[test]
    fn recovers_constructed_delay() {
        let d = trace(250.0, 20.0, 0.0);
        let p = trace(250.0, 20.0, 0.2);
        let m = compute_sync_metrics(&d, &p).unwrap();
        assert!((m.lag_estimate - 0.2).abs() <= 1.0 / 30.0, "{}", m.lag_estimate);
        assert!(m.rms_velocity_norm() < 1e-3, "{:?}", m.rms_velocity_error);
    }

    #[test]
    fn noise_floor_is_reported() {
        let d = trace(30.0, 60.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise = Normal::new(0.0, 0.1).unwrap();
        let p: Vec<TimedSample> = d
            .iter()
            .map(|s| TimedSample {
                velocity: s.velocity.map(|v| v + noise.sample(&mut rng)),
                ..*s
            })
            .collect();
        let m = compute_sync_metrics(&d, &p).unwrap();
        assert!(m.lag_estimate < 1.0 / 30.0);
        for e in m.rms_velocity_error {
            assert!((e - 0.1).abs() < 0.02, "{e}");
        }
    }

    #[test]
    fn short_overlap_is_an_error() {
        let d = trace(30.0, 20.0, 0.0);
        let late: Vec<TimedSample> = d.iter().map(|s| TimedSample { t: s.t + 16.0, ..*s }).collect();
        assert!(matches!(
            compute_sync_metrics(&d, &late),
            Err(MetricsError::InsufficientOverlap { .. })
        ));
    }
}
