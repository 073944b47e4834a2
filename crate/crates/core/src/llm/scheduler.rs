use std::collections::VecDeque;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::Notify;

use crate::clock::Clock;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatePolicy {
    pub max_concurrent: usize,
    pub min_gap_ms: u64,
    pub max_pending: usize,
}

impl Default for RatePolicy {
    fn default() -> Self {
        Self { max_concurrent: 4, min_gap_ms: 0, max_pending: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchedulerError {
    #[error("admission queue full ({0} pending)")]
    QueueFull(usize),
    #[error("invalid rate policy: {0}")]
    InvalidPolicy(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admission {
    RunNow,
    Delay(Duration),
    /// Blocked on a free slot or on earlier tickets.
    WaitForSlot,
}

/// Pure admission state machine over an explicit clock reading.
///
/// Tickets are admitted strictly in submission order. A ticket runs when it is
/// at the head of the queue, fewer than `max_concurrent` requests are in
/// flight, and at least `min_gap_ms` has passed since the previous admission.
#[derive(Debug)]
pub struct Scheduler {
    policy: RatePolicy,
    in_flight: usize,
    queue: VecDeque<u64>,
    next_ticket: u64,
    last_admission: Option<Duration>,
}

impl Scheduler {
    pub fn new(policy: RatePolicy) -> Result<Self, SchedulerError> {
        if policy.max_concurrent == 0 {
            return Err(SchedulerError::InvalidPolicy("max_concurrent must be >= 1"));
        }
        Ok(Self {
            policy,
            in_flight: 0,
            queue: VecDeque::new(),
            next_ticket: 0,
            last_admission: None,
        })
    }

    pub fn policy(&self) -> RatePolicy {
        self.policy
    }

    pub fn in_flight(&self) -> usize {
        self.in_flight
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    pub fn submit(&mut self) -> Result<u64, SchedulerError> {
        if self.queue.len() >= self.policy.max_pending {
            return Err(SchedulerError::QueueFull(self.queue.len()));
        }
        let ticket = self.next_ticket;
        self.next_ticket += 1;
        self.queue.push_back(ticket);
        Ok(ticket)
    }

    /// Decides for `ticket` at time `now`; `RunNow` admits it.
    pub fn poll(&mut self, ticket: u64, now: Duration) -> Admission {
        if self.queue.front() != Some(&ticket) || self.in_flight >= self.policy.max_concurrent {
            return Admission::WaitForSlot;
        }
        if let Some(last) = self.last_admission {
            let gap = Duration::from_millis(self.policy.min_gap_ms);
            let since = now.saturating_sub(last);
            if since < gap {
                return Admission::Delay(gap - since);
            }
        }
        self.queue.pop_front();
        self.in_flight += 1;
        self.last_admission = Some(now);
        Admission::RunNow
    }

    pub fn release(&mut self) {
        self.in_flight = self.in_flight.saturating_sub(1);
    }

    pub fn cancel(&mut self, ticket: u64) {
        self.queue.retain(|t| *t != ticket);
    }
}

/// Async front of [`Scheduler`] shared by every agent of an engine.
pub struct AdmissionQueue {
    state: Mutex<Scheduler>,
    notify: Notify,
    clock: Arc<dyn Clock>,
}

/// Held while a request is in flight; dropping it frees the slot.
pub struct AdmissionPermit {
    queue: Arc<AdmissionQueue>,
}

impl Drop for AdmissionPermit {
    fn drop(&mut self) {
        self.queue.state.lock().expect("scheduler lock").release();
        self.queue.notify.notify_waiters();
    }
}

struct TicketGuard<'a> {
    queue: &'a AdmissionQueue,
    ticket: u64,
    admitted: bool,
}

impl Drop for TicketGuard<'_> {
    fn drop(&mut self) {
        if !self.admitted {
            self.queue.state.lock().expect("scheduler lock").cancel(self.ticket);
            self.queue.notify.notify_waiters();
        }
    }
}

impl AdmissionQueue {
    pub fn new(policy: RatePolicy, clock: Arc<dyn Clock>) -> Result<Arc<Self>, SchedulerError> {
        Ok(Arc::new(Self {
            state: Mutex::new(Scheduler::new(policy)?),
            notify: Notify::new(),
            clock,
        }))
    }

    pub fn in_flight(&self) -> usize {
        self.state.lock().expect("scheduler lock").in_flight()
    }

    /// Waits for admission in FIFO order.
    pub async fn acquire(self: &Arc<Self>) -> Result<AdmissionPermit, SchedulerError> {
        let ticket = self.state.lock().expect("scheduler lock").submit()?;
        let mut guard = TicketGuard { queue: self, ticket, admitted: false };
        loop {
            let notified = self.notify.notified();
            tokio::pin!(notified);
            notified.as_mut().enable();
            let decision = {
                let mut s = self.state.lock().expect("scheduler lock");
                s.poll(ticket, self.clock.elapsed())
            };
            match decision {
                Admission::RunNow => {
                    guard.admitted = true;
                    // The next ticket may be admissible too.
                    self.notify.notify_waiters();
                    return Ok(AdmissionPermit { queue: self.clone() });
                }
                Admission::Delay(d) => self.clock.sleep(d).await,
                Admission::WaitForSlot => notified.await,
            }
        }
    }
}
