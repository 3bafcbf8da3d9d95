//! Discrete-event core: virtual clock, totally ordered event queue, run loop.
//!
//! The queue orders events by `(fire_at, insertion_seq)`, so two events
//! scheduled for the same instant pop in insertion order. All timing is in
//! integer microseconds; there is no floating-point clock anywhere.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

/// Microseconds since simulation start.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);
    /// Sentinel meaning "run until the queue drains".
    pub const FOREVER: SimTime = SimTime(u64::MAX);

    pub const fn from_micros(us: u64) -> Self {
        SimTime(us)
    }

    pub const fn from_millis(ms: u64) -> Self {
        SimTime(ms * 1_000)
    }

    pub const fn from_secs(s: u64) -> Self {
        SimTime(s * 1_000_000)
    }

    pub const fn as_micros(self) -> u64 {
        self.0
    }

    pub const fn plus_micros(self, us: u64) -> Self {
        SimTime(self.0 + us)
    }

    pub fn saturating_sub(self, other: SimTime) -> u64 {
        self.0.saturating_sub(other.0)
    }
}

impl std::fmt::Display for SimTime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}us", self.0)
    }
}

struct Entry<E> {
    at: SimTime,
    seq: u64,
    event: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        self.at == other.at && self.seq == other.seq
    }
}

impl<E> Eq for Entry<E> {}

impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Entry<E> {
    // Reversed so the std max-heap pops the earliest (at, seq) first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .at
            .cmp(&self.at)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Future events in strict `(fire_at, insertion_seq)` order plus the clock.
pub struct EventQueue<E> {
    heap: BinaryHeap<Entry<E>>,
    next_seq: u64,
    clock: SimTime,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        EventQueue {
            heap: BinaryHeap::new(),
            next_seq: 0,
            clock: SimTime::ZERO,
        }
    }

    pub fn clock(&self) -> SimTime {
        self.clock
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Schedule `event` to fire at `at`. Scheduling behind the clock is a
    /// programming fault and aborts the run.
    pub fn schedule(&mut self, at: SimTime, event: E) {
        assert!(
            at >= self.clock,
            "event scheduled in the past: fire_at={} clock={}",
            at,
            self.clock
        );
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Entry { at, seq, event });
    }

    /// Pop the next event with `fire_at <= until`, advancing the clock to it.
    pub fn pop_due(&mut self, until: SimTime) -> Option<(SimTime, E)> {
        match self.heap.peek() {
            Some(entry) if entry.at <= until => {
                let entry = self.heap.pop().expect("peeked entry");
                self.clock = entry.at;
                Some((entry.at, entry.event))
            }
            _ => None,
        }
    }

    /// Advance the clock to the horizon once processing is complete.
    pub fn finish(&mut self, until: SimTime) {
        if until != SimTime::FOREVER && until > self.clock {
            self.clock = until;
        }
    }
}

/// Outcome of one [`run`] call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSummary {
    pub events_processed: u64,
    pub final_clock: SimTime,
}

/// A simulation that owns an event queue and knows how to react to events.
pub trait Simulation {
    type Event;

    fn queue(&mut self) -> &mut EventQueue<Self::Event>;
    fn handle(&mut self, at: SimTime, event: Self::Event);
}

/// Drain all events with `fire_at <= until` in total order.
pub fn run<S: Simulation>(sim: &mut S, until: SimTime) -> RunSummary {
    let mut processed = 0u64;
    while let Some((at, event)) = sim.queue().pop_due(until) {
        sim.handle(at, event);
        processed += 1;
    }
    sim.queue().finish(until);
    RunSummary {
        events_processed: processed,
        final_clock: sim.queue().clock(),
    }
}
