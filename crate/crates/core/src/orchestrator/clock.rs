use std::time::Instant;

/// Stage timer. Mock adapters charge simulated latency with `advance`;
/// on a wall clock that is a no-op because real work takes real time.
pub trait Clock {
    fn now(&self) -> f64;
    fn advance(&mut self, seconds: f64);
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SimClock {
    t: f64,
}

impl SimClock {
    pub fn new() -> Self {
        SimClock { t: 0.0 }
    }
}

impl Clock for SimClock {
    fn now(&self) -> f64 {
        self.t
    }

    fn advance(&mut self, seconds: f64) {
        debug_assert!(seconds >= 0.0, "time runs forward");
        self.t += seconds.max(0.0);
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MonotonicClock {
    start: Instant,
}

impl MonotonicClock {
    pub fn new() -> Self {
        MonotonicClock {
            start: Instant::now(),
        }
    }
}

impl Default for MonotonicClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for MonotonicClock {
    fn now(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }

    fn advance(&mut self, _seconds: f64) {}
}
