//! Digital-to-physical link: wire codec, stream scheduling, offboard
//! watchdog, velocity clamp, transports and twin-sync metrics.

pub mod codec;
mod metrics;
mod transport;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flightsim::Setpoint;

pub use codec::{decode_frame, encode_frame, DecodeError, Frame, Message, SetPositionTarget};
pub use metrics::{compute_sync_metrics, MetricsError, TimedSample, TwinSyncMetrics};
pub use transport::{loopback_pair, LinkFaults, LoopbackEndpoint, Transport, UdpTransport};

#[derive(Debug, Error)]
pub enum BridgeError {
    #[error("invalid bridge configuration: {0}")]
    Config(String),
    #[error("transport: {0}")]
    Io(#[from] std::io::Error),
    #[error("decode: {0}")]
    Decode(#[from] DecodeError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeConfig {
    /// Setpoint stream rate, Hz.
    pub stream_rate: f64,
    /// Velocity clamp, m/s.
    pub velocity_limit: f64,
    pub offboard_timeout_ms: u64,
    pub system_id: u8,
    pub component_id: u8,
}

impl Default for BridgeConfig {
    fn default() -> Self {
        Self {
            stream_rate: 30.0,
            velocity_limit: 3.0,
            offboard_timeout_ms: 500,
            system_id: 1,
            component_id: 1,
        }
    }
}

impl BridgeConfig {
    pub fn validate(&self) -> Result<(), BridgeError> {
        if !(self.stream_rate > 0.0 && self.stream_rate.is_finite()) {
            return Err(BridgeError::Config(format!("stream_rate {} must be positive", self.stream_rate)));
        }
        if !(self.velocity_limit > 0.0 && self.velocity_limit.is_finite()) {
            return Err(BridgeError::Config(format!(
                "velocity_limit {} must be positive",
                self.velocity_limit
            )));
        }
        if self.offboard_timeout_ms == 0 {
            return Err(BridgeError::Config("offboard_timeout_ms must be positive".into()));
        }
        Ok(())
    }
}

/// Limits the setpoint velocity: the horizontal part is scaled down to
/// `limit` keeping its direction, the vertical part is clamped on its own.
/// Returns the clamped setpoint and whether anything changed.
///
/// This is the only clamp in the system; operator commands and the bridge
/// stream both go through it.
pub fn clamp_setpoint(sp: &Setpoint, limit: f64) -> (Setpoint, bool) {
    let mut out = *sp;
    let [vx, vy, vz] = sp.velocity;
    let horizontal = vx.hypot(vy);
    let mut clamped = false;
    if horizontal > limit {
        let k = limit / horizontal;
        out.velocity[0] = vx * k;
        out.velocity[1] = vy * k;
        clamped = true;
    }
    if vz.abs() > limit {
        out.velocity[2] = limit.copysign(vz);
        clamped = true;
    }
    (out, clamped)
}

/// True when the setpoint already satisfies the clamp (with a little
/// slack for the f32 wire rounding).
pub fn within_limit(velocity: [f64; 3], limit: f64) -> bool {
    let slack = 1e-6 * limit.max(1.0);
    velocity[0].hypot(velocity[1]) <= limit + slack && velocity[2].abs() <= limit + slack
}

/// Fixed-rate send clock. Deadlines sit on the grid `start + k / rate`, so
/// rounding never accumulates; deadlines that pass without a poll are
/// skipped and counted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamScheduler {
    period: f64,
    start: f64,
    next_index: u64,
    sent: u64,
    missed: u64,
}

impl StreamScheduler {
    pub fn new(rate: f64, start: f64) -> Self {
        assert!(rate > 0.0, "stream rate must be positive");
        Self {
            period: 1.0 / rate,
            start,
            next_index: 0,
            sent: 0,
            missed: 0,
        }
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// True when a send is due at `now` (seconds).
    pub fn poll(&mut self, now: f64) -> bool {
        let due = self.start + self.next_index as f64 * self.period;
        // Tolerance keeps grid points that land a hair early from slipping a tick.
        if now + 1e-9 < due {
            return false;
        }
        let behind = ((now + 1e-9 - due) / self.period).floor() as u64;
        self.missed += behind;
        self.next_index += behind + 1;
        self.sent += 1;
        true
    }

    pub fn sent(&self) -> u64 {
        self.sent
    }

    pub fn missed(&self) -> u64 {
        self.missed
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OffboardMode {
    Inactive,
    Active,
    Lost,
}

/// Offboard state of the physical twin. Times are in ms on the session clock.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OffboardState {
    pub mode: OffboardMode,
    pub last_setpoint_ms: Option<u64>,
}

impl Default for OffboardState {
    fn default() -> Self {
        Self {
            mode: OffboardMode::Inactive,
            last_setpoint_ms: None,
        }
    }
}

impl OffboardState {
    /// A valid setpoint arrived at `now`.
    pub fn on_setpoint(self, now: u64) -> Self {
        Self {
            mode: OffboardMode::Active,
            last_setpoint_ms: Some(now),
        }
    }
}

pub fn offboard_watchdog(state: OffboardState, now: u64, timeout_ms: u64) -> OffboardState {
    match (state.mode, state.last_setpoint_ms) {
        (OffboardMode::Active, Some(last)) if now.saturating_sub(last) > timeout_ms => OffboardState {
            mode: OffboardMode::Lost,
            ..state
        },
        _ => state,
    }
}

/// Receiver-side accounting of frame sequence numbers.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceTracker {
    last: Option<u8>,
    pub received: u64,
    pub duplicates: u64,
    /// Frames that arrived after a later-numbered frame.
    pub out_of_order: u64,
    /// Frames skipped and not (yet) seen late.
    pub missing: u64,
}

impl SequenceTracker {
    /// Records `seq`; returns false for a duplicate or late frame, which the
    /// receiver should not act on.
    pub fn observe(&mut self, seq: u8) -> bool {
        self.received += 1;
        let Some(last) = self.last else {
            self.last = Some(seq);
            return true;
        };
        let ahead = seq.wrapping_sub(last);
        if ahead == 0 {
            self.duplicates += 1;
            false
        } else if ahead < 128 {
            self.missing += u64::from(ahead - 1);
            self.last = Some(seq);
            true
        } else {
            self.out_of_order += 1;
            self.missing = self.missing.saturating_sub(1);
            false
        }
    }
}
