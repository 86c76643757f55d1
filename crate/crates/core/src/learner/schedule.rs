use serde::{Deserialize, Serialize};

/// Exploration rate decaying geometrically from `start` to `end` over
/// `decay_steps` environment steps, then held at `end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_steps: u64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self {
            start: 0.3,
            end: 0.01,
            decay_steps: 20_000,
        }
    }
}

impl EpsilonSchedule {
    /// `max(end, start * (end / start)^(t / decay_steps))`.
    pub fn epsilon_at(&self, t: u64) -> f64 {
        if t >= self.decay_steps || self.start <= self.end {
            return self.end;
        }
        let frac = t as f64 / self.decay_steps as f64;
        (self.start * (self.end / self.start).powf(frac)).max(self.end)
    }

    pub fn is_valid(&self) -> bool {
        (0.0..=1.0).contains(&self.start) && (0.0..=1.0).contains(&self.end) && self.end > 0.0 && self.decay_steps > 0
    }
}
