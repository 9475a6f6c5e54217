//! Exact departure laws of tiny codes by exhaustive enumeration.

use std::collections::BTreeMap;
use std::fmt::Display;

use num_traits::{Num, Signed};
use serde_json::{json, Value};

use super::{run_trace, ArrivalPolicy, QueueError};
use crate::dist::Tau;

pub const MAX_PACKETS: usize = 3;
pub const MAX_ATOMS: usize = 4;
pub const MAX_MESSAGES: usize = 16;

/// `messages` equiprobable messages, each sent as `packets` arrivals.
pub struct EnumerableCode<P> {
    pub messages: usize,
    pub packets: usize,
    pub policy: P,
}

/// Joint law of `(message, d_1..d_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointLaw<W> {
    pub tau: Tau,
    pub entries: BTreeMap<(usize, Vec<u64>), W>,
}

impl<W: Clone + Num + Signed + PartialOrd> JointLaw<W> {
    pub fn total(&self) -> W {
        self.entries.values().cloned().fold(W::zero(), |a, b| a + b)
    }

    /// `½ Σ |P - Q|` over the union of atoms.
    pub fn total_variation(&self, other: &JointLaw<W>) -> W {
        let mut acc = W::zero();
        for (k, p) in &self.entries {
            let q = other.entries.get(k).cloned().unwrap_or_else(W::zero);
            acc = acc + (p.clone() - q).abs();
        }
        for (k, q) in &other.entries {
            if !self.entries.contains_key(k) {
                acc = acc + q.abs();
            }
        }
        acc / (W::one() + W::one())
    }

    /// Law of `(message, d_1..d_k)`.
    pub fn prefix_marginal(&self, k: usize) -> BTreeMap<(usize, Vec<u64>), W> {
        let mut out: BTreeMap<(usize, Vec<u64>), W> = BTreeMap::new();
        for ((u, d), p) in &self.entries {
            let e = out.entry((*u, d[..k].to_vec())).or_insert_with(W::zero);
            *e = e.clone() + p.clone();
        }
        out
    }
}

impl<W: Display> JointLaw<W> {
    /// `{"tau": .., "entries": [{"message", "departures", "prob"}]}` with
    /// probabilities rendered by `Display` (e.g. `1/8` for exact weights).
    pub fn to_json(&self) -> Value {
        let entries: Vec<Value> = self
            .entries
            .iter()
            .map(|((u, d), p)| json!({"message": u, "departures": d, "prob": p.to_string()}))
            .collect();
        json!({"tau": self.tau, "entries": entries})
    }
}

fn count<W: Num>(k: usize) -> W {
    (0..k).fold(W::zero(), |a, _| a + W::one())
}

/// Enumerates every message and service tuple. `service[k]` is `P(S = k)`
/// in the weight type, so exact rationals give an exact law.
pub fn exact_departure_law<W, P>(code: &EnumerableCode<P>, service: &[W], tau: Tau) -> Result<JointLaw<W>, QueueError>
where
    W: Clone + Num,
    P: ArrivalPolicy,
{
    let atoms: Vec<(u64, W)> = service
        .iter()
        .enumerate()
        .filter(|(_, p)| !p.is_zero())
        .map(|(k, p)| (k as u64, p.clone()))
        .collect();
    if code.packets == 0 || code.packets > MAX_PACKETS {
        return Err(QueueError::InstanceTooLarge(format!("{} packets (max {MAX_PACKETS})", code.packets)));
    }
    if atoms.is_empty() || atoms.len() > MAX_ATOMS {
        return Err(QueueError::InstanceTooLarge(format!("{} service atoms (max {MAX_ATOMS})", atoms.len())));
    }
    if code.messages == 0 || code.messages > MAX_MESSAGES {
        return Err(QueueError::InstanceTooLarge(format!("{} messages (max {MAX_MESSAGES})", code.messages)));
    }
    let pu = W::one() / count::<W>(code.messages);
    let mut entries: BTreeMap<(usize, Vec<u64>), W> = BTreeMap::new();
    let n = code.packets;
    let tuples = atoms.len().pow(n as u32);
    for u in 0..code.messages {
        for idx in 0..tuples {
            let mut rest = idx;
            let mut s = Vec::with_capacity(n);
            let mut w = pu.clone();
            for _ in 0..n {
                let (v, p) = &atoms[rest % atoms.len()];
                rest /= atoms.len();
                s.push(*v);
                w = w * p.clone();
            }
            let trace = run_trace(&code.policy, u, &s, tau)?;
            let e = entries.entry((u, trace.d)).or_insert_with(W::zero);
            *e = e.clone() + w;
        }
    }
    Ok(JointLaw { tau, entries })
}
