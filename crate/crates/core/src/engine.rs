//! Deterministic discrete-event core: integer picosecond clock, FIFO-stable
//! event queue, fiber channels and per-node random streams.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type NodeId = u32;
pub type TimePs = u64;

pub const PS_PER_S: f64 = 1e12;

pub fn secs_to_ps(s: f64) -> TimePs {
    debug_assert!(s >= 0.0 && s.is_finite(), "time {s} out of range");
    (s * PS_PER_S).round() as TimePs
}

pub fn ps_to_secs(ps: TimePs) -> f64 {
    ps as f64 / PS_PER_S
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event<P> {
    pub time_ps: TimePs,
    pub seq: u64,
    pub target: NodeId,
    pub payload: P,
}

// Reverse (time, seq) so the max-heap pops the earliest event first.
struct Queued<P>(Event<P>);

impl<P> PartialEq for Queued<P> {
    fn eq(&self, other: &Self) -> bool {
        self.0.time_ps == other.0.time_ps && self.0.seq == other.0.seq
    }
}
impl<P> Eq for Queued<P> {}
impl<P> PartialOrd for Queued<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<P> Ord for Queued<P> {
    fn cmp(&self, other: &Self) -> Ordering {
        (other.0.time_ps, other.0.seq).cmp(&(self.0.time_ps, self.0.seq))
    }
}

pub struct Engine<P> {
    now: TimePs,
    next_seq: u64,
    queue: BinaryHeap<Queued<P>>,
    processed: u64,
}

impl<P> Default for Engine<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<P> Engine<P> {
    pub fn new() -> Self {
        Engine {
            now: 0,
            next_seq: 0,
            queue: BinaryHeap::new(),
            processed: 0,
        }
    }

    pub fn now(&self) -> TimePs {
        self.now
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    pub fn processed(&self) -> u64 {
        self.processed
    }

    pub fn schedule(&mut self, time_ps: TimePs, target: NodeId, payload: P) -> Result<()> {
        if time_ps < self.now {
            return Err(Error::Causality {
                now_ps: self.now,
                event_ps: time_ps,
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Queued(Event {
            time_ps,
            seq,
            target,
            payload,
        }));
        Ok(())
    }

    pub fn schedule_in(&mut self, delay_ps: TimePs, target: NodeId, payload: P) -> Result<()> {
        self.schedule(self.now + delay_ps, target, payload)
    }

    /// Puts `payload` on `channel`; it is delivered to the far end after the
    /// propagation delay.
    pub fn send(&mut self, channel: &Channel, payload: P) -> Result<()> {
        self.schedule_in(channel.delay_ps, channel.dst, payload)
    }

    pub fn peek_time(&self) -> Option<TimePs> {
        self.queue.peek().map(|q| q.0.time_ps)
    }

    /// Removes the earliest event and advances the clock to it.
    pub fn pop(&mut self) -> Option<Event<P>> {
        let Queued(ev) = self.queue.pop()?;
        self.now = ev.time_ps;
        self.processed += 1;
        Some(ev)
    }

    /// Processes every event up to and including `until_ps`, then parks the
    /// clock at `until_ps`.
    pub fn run_until_time<F>(&mut self, until_ps: TimePs, mut handler: F) -> Result<TimePs>
    where
        F: FnMut(&mut Self, Event<P>) -> Result<()>,
    {
        while self.peek_time().is_some_and(|t| t <= until_ps) {
            let ev = self.pop().expect("peeked");
            handler(self, ev)?;
        }
        self.now = self.now.max(until_ps);
        Ok(self.now)
    }

    /// Processes events until `done` holds. Running dry first is an error.
    pub fn run_until<D, F>(&mut self, mut done: D, mut handler: F) -> Result<TimePs>
    where
        D: FnMut(&Self) -> bool,
        F: FnMut(&mut Self, Event<P>) -> Result<()>,
    {
        loop {
            if done(self) {
                return Ok(self.now);
            }
            let Some(ev) = self.pop() else {
                return Err(Error::Starvation {
                    now_ps: self.now,
                    diagnostic: format!(
                        "queue empty after {} events with the stop condition unmet",
                        self.processed
                    ),
                });
            };
            handler(self, ev)?;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelKind {
    Classical,
    /// Each carried photon is lost independently with this probability.
    Quantum {
        loss: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Channel {
    pub src: NodeId,
    pub dst: NodeId,
    pub delay_ps: TimePs,
    pub kind: ChannelKind,
}

impl Channel {
    pub fn new(src: NodeId, dst: NodeId, length_km: f64, speed_km_per_s: f64, kind: ChannelKind) -> Self {
        Channel {
            src,
            dst,
            delay_ps: secs_to_ps(length_km / speed_km_per_s),
            kind,
        }
    }

    /// Whether a photon makes it across; classical messages always do.
    pub fn survives<R: Rng + ?Sized>(&self, rng: &mut R) -> bool {
        match self.kind {
            ChannelKind::Classical => true,
            ChannelKind::Quantum { loss } => !rng.gen_bool(loss),
        }
    }
}

/// One independent ChaCha stream per node, all derived from a master seed.
#[derive(Debug, Clone, Copy)]
pub struct RngStreams {
    pub seed: u64,
}

impl RngStreams {
    pub fn new(seed: u64) -> Self {
        RngStreams { seed }
    }

    pub fn node(&self, id: NodeId) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(u64::from(id));
        rng
    }
}

/// SplitMix64 finaliser; used to derive per-point and per-trial seeds.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
