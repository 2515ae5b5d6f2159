//! Injectable time source for sessions and staleness checks.

use std::sync::Mutex;

use chrono::{DateTime, Duration, FixedOffset, Local, NaiveDate};

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<FixedOffset>;

    fn today(&self) -> NaiveDate {
        self.now().date_naive()
    }
}

/// Wall-clock time in the machine's local offset.
#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<FixedOffset> {
        Local::now().fixed_offset()
    }
}

/// Always returns the same instant.
#[derive(Debug, Clone, Copy)]
pub struct FixedClock(pub DateTime<FixedOffset>);

impl Clock for FixedClock {
    fn now(&self) -> DateTime<FixedOffset> {
        self.0
    }
}

/// Replays a fixed list of instants, then keeps advancing by `step` after
/// the last one. Useful for replaying a known incident timeline.
#[derive(Debug)]
pub struct ScriptedClock {
    state: Mutex<(Vec<DateTime<FixedOffset>>, usize, DateTime<FixedOffset>)>,
    step: Duration,
}

impl ScriptedClock {
    pub fn new(instants: Vec<DateTime<FixedOffset>>, step: Duration) -> Self {
        let last = *instants.last().expect("at least one instant");
        ScriptedClock {
            state: Mutex::new((instants, 0, last)),
            step,
        }
    }

    /// `start`, `start + step`, `start + 2*step`, ...
    pub fn ticking(start: DateTime<FixedOffset>, step: Duration) -> Self {
        ScriptedClock::new(vec![start], step)
    }
}

impl Clock for ScriptedClock {
    fn now(&self) -> DateTime<FixedOffset> {
        let mut guard = self.state.lock().unwrap();
        let (instants, next, last) = &mut *guard;
        if let Some(at) = instants.get(*next) {
            *next += 1;
            *last = *at;
            *at
        } else {
            *last += self.step;
            *last
        }
    }
}
