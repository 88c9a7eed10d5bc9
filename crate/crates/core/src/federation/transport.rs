//! In-memory message transport with trace logging.
//!
//! The reference policy delivers messages in send order; the shuffled
//! policy permutes each delivered batch. Protocol phases act as barriers,
//! so any within-phase delivery order must produce bit-identical results —
//! the reorder fuzz test holds the drivers to that.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::message::{PartyMessage, TraceRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeliveryPolicy {
    Sequential,
    Shuffled,
}

#[derive(Debug)]
pub struct Transport {
    queue: Vec<PartyMessage>,
    trace: Vec<TraceRecord>,
    policy: DeliveryPolicy,
    rng: ChaCha20Rng,
    counter: u64,
}

impl Transport {
    pub fn new(policy: DeliveryPolicy, seed: u64) -> Transport {
        Transport {
            queue: Vec::new(),
            trace: Vec::new(),
            policy,
            rng: ChaCha20Rng::seed_from_u64(seed),
            counter: 0,
        }
    }

    /// Stamps, logs and enqueues a message.
    pub fn send(&mut self, mut msg: PartyMessage) {
        self.counter += 1;
        msg.round = self.counter;
        self.trace.push(TraceRecord::of(&msg));
        self.queue.push(msg);
    }

    /// Drains the current batch, reordering it under the shuffled policy.
    pub fn deliver(&mut self) -> Vec<PartyMessage> {
        let mut batch: Vec<PartyMessage> = self.queue.drain(..).collect();
        if self.policy == DeliveryPolicy::Shuffled {
            batch.shuffle(&mut self.rng);
        }
        batch
    }

    /// Injects a raw message without stamping; test hook for out-of-phase
    /// delivery.
    pub fn inject(&mut self, msg: PartyMessage) {
        self.trace.push(TraceRecord::of(&msg));
        self.queue.push(msg);
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    pub fn exchanges(&self) -> u64 {
        self.counter
    }

    /// Newline-delimited JSON records of the full trace.
    pub fn trace_log(&self) -> String {
        let mut out = String::new();
        for rec in &self.trace {
            out.push_str(&serde_json::to_string(rec).expect("trace record serializes"));
            out.push('\n');
        }
        out
    }
}
