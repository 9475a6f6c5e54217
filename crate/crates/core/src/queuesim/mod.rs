//! Discrete-time FIFO single-server queue with generalized feedback.
//!
//! Packet `i` arrives at `a_i`, enters service at `b_i = max(a_i, d_{i-1})`
//! (`d_0 = 0`, the queue starts empty), departs at `d_i = b_i + s_i`, and the
//! transmitter learns `b_i` at time `b_i` and `c_i = min(d_i, b_i + τ)` at
//! time `c_i`. Arrival policies see feedback through a [`FeedbackView`] that
//! records when each value they read was revealed, so that causality can be
//! enforced.

mod enumerate;
mod montecarlo;

pub use enumerate::{exact_departure_law, EnumerableCode, JointLaw, MAX_ATOMS, MAX_MESSAGES, MAX_PACKETS};
pub use montecarlo::{
    plugin_entropy_estimate, reduction_check, trial_rng, PluginEstimate, PmfSampler, ReductionReport, XSchedule,
};

use std::cell::Cell;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dist::Tau;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QueueError {
    #[error("packet {packet}: arrival {arrival} precedes feedback revealed at {revealed}")]
    CausalityViolation { packet: usize, arrival: u64, revealed: u64 },
    #[error("packet {packet}: arrival {arrival} precedes the previous arrival {previous}")]
    NonMonotoneArrival { packet: usize, arrival: u64, previous: u64 },
    #[error("instance too large: {0}")]
    InstanceTooLarge(String),
    #[error("plug-in estimate needs at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("bad input: {0}")]
    Invalid(String),
}

/// Feedback about packets `0..i` available to the policy choosing `a_i`.
/// Indices outside `0..packets()` panic, so later packets cannot be read.
pub struct FeedbackView<'a> {
    b: &'a [u64],
    c: &'a [u64],
    tau: Tau,
    latest: &'a Cell<u64>,
}

impl<'a> FeedbackView<'a> {
    /// Number of earlier packets.
    pub fn packets(&self) -> usize {
        self.b.len()
    }

    /// Service entry of packet `j`, revealed at `b_j`.
    pub fn b(&self, j: usize) -> u64 {
        let v = self.b[j];
        self.reveal(v);
        v
    }

    /// `min(c_j, b_j + τ_view)`, revealed at that time. For a view coarser
    /// than the system's feedback this is the value a `τ_view` transmitter
    /// would see: if `b_j + τ_view < c_j` the packet is known to still be in
    /// service at `b_j + τ_view`.
    pub fn c(&self, j: usize) -> u64 {
        let v = match self.tau {
            Tau::Finite(t) => self.c[j].min(self.b[j] + t),
            Tau::Infinite => self.c[j],
        };
        self.reveal(v);
        v
    }

    /// `c_{j}` for `j = i - 1`, or 0 for the first packet.
    pub fn last_c(&self) -> u64 {
        match self.packets() {
            0 => 0,
            i => self.c(i - 1),
        }
    }

    /// The same feedback seen with parameter `min(τ, tau)`.
    pub fn coarsened(&self, tau: Tau) -> FeedbackView<'a> {
        FeedbackView { b: self.b, c: self.c, tau: self.tau.min(tau), latest: self.latest }
    }

    fn reveal(&self, t: u64) {
        self.latest.set(self.latest.get().max(t));
    }
}

/// Chooses arrival instants from a message index and causal feedback.
pub trait ArrivalPolicy {
    fn arrival(&self, message: usize, packet: usize, feedback: &FeedbackView<'_>) -> u64;
}

impl<P: ArrivalPolicy + ?Sized> ArrivalPolicy for &P {
    fn arrival(&self, message: usize, packet: usize, feedback: &FeedbackView<'_>) -> u64 {
        (**self).arrival(message, packet, feedback)
    }
}

/// Open-loop schedule: `schedule[message][packet]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedSchedule(pub Vec<Vec<u64>>);

impl ArrivalPolicy for FixedSchedule {
    fn arrival(&self, message: usize, packet: usize, _: &FeedbackView<'_>) -> u64 {
        self.0[message][packet]
    }
}

/// Policy given by a closure.
pub struct FnPolicy<F>(pub F);

impl<F: Fn(usize, usize, &FeedbackView<'_>) -> u64> ArrivalPolicy for FnPolicy<F> {
    fn arrival(&self, message: usize, packet: usize, feedback: &FeedbackView<'_>) -> u64 {
        (self.0)(message, packet, feedback)
    }
}

/// Emits `max(a_i, c_{i-1})`.
pub struct NormalizedPolicy<P>(pub P);

impl<P: ArrivalPolicy> ArrivalPolicy for NormalizedPolicy<P> {
    fn arrival(&self, message: usize, packet: usize, feedback: &FeedbackView<'_>) -> u64 {
        self.0.arrival(message, packet, feedback).max(feedback.last_c())
    }
}

pub fn normalize_arrivals<P: ArrivalPolicy>(policy: P) -> NormalizedPolicy<P> {
    NormalizedPolicy(policy)
}

/// Runs a policy designed for feedback parameter `tau1` in a system with
/// richer feedback, handing it `min(b + τ₁, c)` in place of `c`.
pub struct DowngradedPolicy<P> {
    pub inner: P,
    pub tau1: Tau,
}

impl<P: ArrivalPolicy> ArrivalPolicy for DowngradedPolicy<P> {
    fn arrival(&self, message: usize, packet: usize, feedback: &FeedbackView<'_>) -> u64 {
        self.inner.arrival(message, packet, &feedback.coarsened(self.tau1))
    }
}

/// Per-packet times of one run. `w_i = b_i - d_{i-1}` is the server idle
/// time before packet `i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueueTrace {
    pub tau: Tau,
    pub seed: Option<u64>,
    pub a: Vec<u64>,
    pub b: Vec<u64>,
    pub c: Vec<u64>,
    pub d: Vec<u64>,
    pub s: Vec<u64>,
    pub w: Vec<u64>,
}

impl QueueTrace {
    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    /// Checks the queue recursions; returns the first violated relation.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut prev_d = 0;
        for i in 0..self.len() {
            if i > 0 && self.a[i] < self.a[i - 1] {
                return Err(format!("a not nondecreasing at {i}"));
            }
            if self.b[i] != self.a[i].max(prev_d) {
                return Err(format!("b_{i} != max(a_{i}, d_{{i-1}})"));
            }
            if self.d[i] != self.b[i] + self.s[i] {
                return Err(format!("d_{i} != b_{i} + s_{i}"));
            }
            if self.c[i] != self.b[i] + self.tau.clip(self.s[i]) {
                return Err(format!("c_{i} != min(d_{i}, b_{i} + tau)"));
            }
            if self.w[i] != self.b[i] - prev_d {
                return Err(format!("w_{i} != b_{i} - d_{{i-1}}"));
            }
            prev_d = self.d[i];
        }
        Ok(())
    }

    /// Columns `packet,a,b,c,d,s,w` after a `# tau=... seed=...` line.
    pub fn to_csv(&self) -> String {
        let seed = self.seed.map_or_else(|| "none".to_string(), |s| s.to_string());
        let mut out = format!("# tau={} seed={}\npacket,a,b,c,d,s,w\n", self.tau, seed);
        for i in 0..self.len() {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                i + 1,
                self.a[i],
                self.b[i],
                self.c[i],
                self.d[i],
                self.s[i],
                self.w[i]
            ));
        }
        out
    }
}

/// Runs `policy` for `message` against the service times `services`.
pub fn run_trace<P: ArrivalPolicy>(policy: &P, message: usize, services: &[u64], tau: Tau) -> Result<QueueTrace, QueueError> {
    let n = services.len();
    let mut t = QueueTrace {
        tau,
        seed: None,
        a: Vec::with_capacity(n),
        b: Vec::with_capacity(n),
        c: Vec::with_capacity(n),
        d: Vec::with_capacity(n),
        s: services.to_vec(),
        w: Vec::with_capacity(n),
    };
    let mut prev_d = 0;
    for (i, &s) in services.iter().enumerate() {
        let latest = Cell::new(0);
        let view = FeedbackView { b: &t.b, c: &t.c, tau: Tau::Infinite, latest: &latest };
        let a = policy.arrival(message, i, &view);
        if a < latest.get() {
            return Err(QueueError::CausalityViolation { packet: i, arrival: a, revealed: latest.get() });
        }
        if let Some(&prev) = t.a.last() {
            if a < prev {
                return Err(QueueError::NonMonotoneArrival { packet: i, arrival: a, previous: prev });
            }
        }
        let b = a.max(prev_d);
        let d = b + s;
        t.a.push(a);
        t.b.push(b);
        t.c.push(b + tau.clip(s));
        t.d.push(d);
        t.w.push(b - prev_d);
        prev_d = d;
    }
    Ok(t)
}
