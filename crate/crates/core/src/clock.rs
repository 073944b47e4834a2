//! Injectable engine clock.
//!
//! Both clocks measure elapsed time with `tokio::time`. Under a runtime
//! started with `start_paused(true)` tokio time is virtual and auto-advances
//! when every task is idle, which is what makes [`SimulatedClock`] simulated:
//! sleeps complete instantly in wall time but in exact order on the engine
//! clock. [`SimulatedClock`] also derives wall timestamps from that virtual
//! time so that replayed sessions produce byte-identical logs.

use std::future::Future;
use std::pin::Pin;
use std::time::Duration;

use chrono::{DateTime, TimeZone, Utc};
use tokio::time::Instant;

pub type Sleep = Pin<Box<dyn Future<Output = ()> + Send>>;

pub trait Clock: Send + Sync + 'static {
    /// Monotonic time since the clock was created.
    fn elapsed(&self) -> Duration;
    fn wall_now(&self) -> DateTime<Utc>;
    fn sleep(&self, duration: Duration) -> Sleep;
}

/// Production clock: tokio monotonic time and the system wall clock.
#[derive(Debug, Clone)]
pub struct WallClock {
    origin: Instant,
}

impl WallClock {
    pub fn new() -> Self {
        Self { origin: Instant::now() }
    }
}

impl Default for WallClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for WallClock {
    fn elapsed(&self) -> Duration {
        self.origin.elapsed()
    }

    fn wall_now(&self) -> DateTime<Utc> {
        Utc::now()
    }

    fn sleep(&self, duration: Duration) -> Sleep {
        Box::pin(tokio::time::sleep(duration))
    }
}

/// Test clock for paused tokio runtimes; wall time is `epoch + elapsed`.
#[derive(Debug, Clone)]
pub struct SimulatedClock {
    origin: Instant,
    epoch: DateTime<Utc>,
}

impl SimulatedClock {
    pub fn new() -> Self {
        Self::with_epoch(Utc.with_ymd_and_hms(2025, 1, 1, 0, 0, 0).unwrap())
    }

    pub fn with_epoch(epoch: DateTime<Utc>) -> Self {
        Self { origin: Instant::now(), epoch }
    }
}

impl Default for SimulatedClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for SimulatedClock {
    fn elapsed(&self) -> Duration {
        self.origin.elapsed()
    }

    fn wall_now(&self) -> DateTime<Utc> {
        self.epoch + chrono::Duration::from_std(self.elapsed()).unwrap_or_default()
    }

    fn sleep(&self, duration: Duration) -> Sleep {
        Box::pin(tokio::time::sleep(duration))
    }
}
