use std::sync::atomic::{AtomicU64, Ordering};

use chrono::{DateTime, Duration, Utc};

/// Source of every timestamp the engine writes into a session.
pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// Deterministic clock: the n-th reading is `start + n * step`.
///
/// Every reading is strictly later than the previous one as long as `step`
/// is positive.
#[derive(Debug)]
pub struct ScriptedClock {
    start: DateTime<Utc>,
    step: Duration,
    ticks: AtomicU64,
}

impl ScriptedClock {
    pub fn new(start: DateTime<Utc>, step: Duration) -> Self {
        Self {
            start,
            step,
            ticks: AtomicU64::new(0),
        }
    }

    pub fn ticks(&self) -> u64 {
        self.ticks.load(Ordering::SeqCst)
    }
}

impl Default for ScriptedClock {
    fn default() -> Self {
        let start = DateTime::parse_from_rfc3339("2025-01-01T00:00:00Z")
            .expect("valid literal")
            .with_timezone(&Utc);
        Self::new(start, Duration::seconds(1))
    }
}

impl Clock for ScriptedClock {
    fn now(&self) -> DateTime<Utc> {
        let n = self.ticks.fetch_add(1, Ordering::SeqCst);
        self.start + self.step * (n as i32)
    }
}
