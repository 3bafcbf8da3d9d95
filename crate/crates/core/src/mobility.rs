//! Node mobility models: static, random waypoint within bounds, and a
//! pre-programmed back-and-forth path.

use serde::{Deserialize, Serialize};

use crate::engine::SimTime;
use crate::radio::Position;
use crate::rng::RandomStream;

/// Axis-aligned movement bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min - 1e-9 && x <= self.x_max + 1e-9 && y >= self.y_min - 1e-9 && y <= self.y_max + 1e-9
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum MobilityModel {
    Static,
    RandomWaypoint {
        bounds: Rect,
        speed_mps: f64,
        pause_us: u64,
    },
    BackAndForth {
        p0: (f64, f64),
        p1: (f64, f64),
        speed_mps: f64,
    },
}

impl MobilityModel {
    pub fn is_static(&self) -> bool {
        matches!(self, MobilityModel::Static)
    }
}

/// Runtime state of one node's mobility.
#[derive(Debug, Clone)]
pub struct MobilityState {
    pub model: MobilityModel,
    waypoint: Option<(f64, f64)>,
    pause_until: SimTime,
    heading_to_p1: bool,
}

impl MobilityState {
    pub fn new(model: MobilityModel) -> Self {
        MobilityState {
            model,
            waypoint: None,
            pause_until: SimTime::ZERO,
            heading_to_p1: true,
        }
    }

    /// Advance `pos` by `dt_us`. Displacement never exceeds `speed * dt`.
    pub fn step(
        &mut self,
        pos: Position,
        dt_us: u64,
        now: SimTime,
        stream: &mut RandomStream,
    ) -> Position {
        let dt_s = dt_us as f64 / 1_000_000.0;
        match self.model {
            MobilityModel::Static => pos,
            MobilityModel::RandomWaypoint {
                bounds,
                speed_mps,
                pause_us,
            } => {
                if now < self.pause_until {
                    return pos;
                }
                let target = match self.waypoint {
                    Some(t) => t,
                    None => {
                        let t = (
                            bounds.x_min + stream.next_f64() * (bounds.x_max - bounds.x_min),
                            bounds.y_min + stream.next_f64() * (bounds.y_max - bounds.y_min),
                        );
                        self.waypoint = Some(t);
                        t
                    }
                };
                let (next, arrived) = move_toward(pos, target, speed_mps * dt_s);
                if arrived {
                    self.waypoint = None;
                    self.pause_until = now.plus_micros(pause_us);
                }
                next
            }
            MobilityModel::BackAndForth { p0, p1, speed_mps } => {
                let target = if self.heading_to_p1 { p1 } else { p0 };
                let (next, arrived) = move_toward(pos, target, speed_mps * dt_s);
                if arrived {
                    self.heading_to_p1 = !self.heading_to_p1;
                }
                next
            }
        }
    }
}

/// Step `pos` toward `target` by at most `max_step` meters; returns the new
/// position and whether the target was reached.
pub fn move_toward(pos: Position, target: (f64, f64), max_step: f64) -> (Position, bool) {
    let dx = target.0 - pos.x;
    let dy = target.1 - pos.y;
    let dist = (dx * dx + dy * dy).sqrt();
    if dist <= max_step {
        (Position::new(target.0, target.1, pos.floor), true)
    } else {
        let scale = max_step / dist;
        (
            Position::new(pos.x + dx * scale, pos.y + dy * scale, pos.floor),
            false,
        )
    }
}
