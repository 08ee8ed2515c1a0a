use std::sync::Mutex;

use chrono::{DateTime, Duration, SecondsFormat, Utc};

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// Deterministic clock. With a nonzero step it advances after every read,
/// which keeps "updated" ordering meaningful in tests.
pub struct FixedClock {
    next: Mutex<DateTime<Utc>>,
    step: Duration,
}

impl FixedClock {
    pub fn at(t: DateTime<Utc>) -> Self {
        Self::ticking(t, Duration::zero())
    }

    pub fn ticking(start: DateTime<Utc>, step: Duration) -> Self {
        FixedClock {
            next: Mutex::new(start),
            step,
        }
    }

    /// 2025-01-01T00:00:00Z, no ticking.
    pub fn epoch() -> Self {
        Self::at(DateTime::from_timestamp(1_735_689_600, 0).expect("valid timestamp"))
    }
}

impl Clock for FixedClock {
    fn now(&self) -> DateTime<Utc> {
        let mut next = self.next.lock().unwrap_or_else(|e| e.into_inner());
        let t = *next;
        *next = t + self.step;
        t
    }
}

pub fn rfc3339(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Secs, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticking_clock_advances() {
        let c = FixedClock::ticking(DateTime::from_timestamp(0, 0).unwrap(), Duration::seconds(2));
        assert_eq!(rfc3339(c.now()), "1970-01-01T00:00:00Z");
        assert_eq!(rfc3339(c.now()), "1970-01-01T00:00:02Z");
        let f = FixedClock::epoch();
        assert_eq!(f.now(), f.now());
    }
}
