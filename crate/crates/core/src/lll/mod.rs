//! Variable-model Lovász Local Lemma instances and constructive solvers.

mod brute;
mod distributed;
mod mt;
mod parallel;

pub use brute::{brute_force_solve, DEFAULT_BRUTE_FORCE_CAP};
pub use distributed::{distributed_moser_tardos, DistributedMt};
pub use mt::{moser_tardos, moser_tardos_run, MtOptions, MtRun};
pub use parallel::{default_rounds_per_instance, parallel_instances_solve, ParallelOutcome};

use std::fmt;
use std::sync::Arc;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Bad-event predicates over the values of the scope variables, in scope order.
#[derive(Clone, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Predicate {
    /// Violated iff the scope values equal one of the tuples.
    Forbidden {
        tuples: Vec<Vec<u32>>,
    },
    /// Values are parts in `[0, parts)`. Violated iff some part count deviates
    /// from `len/parts` by more than `threshold`.
    Discrepancy {
        parts: u32,
        threshold: f64,
    },
    /// Like `Discrepancy`, but part `i` already holds `offsets[i]` fixed
    /// members that count towards both the part and the total.
    OffsetDiscrepancy {
        offsets: Vec<u32>,
        threshold: f64,
    },
    /// Values are buckets. Violated iff some bucket holds more than `cap`.
    Capacity {
        cap: f64,
    },
    Custom(#[serde(serialize_with = "opaque")] CustomPredicate),
}

pub type PredicateFn = dyn Fn(&[u32]) -> bool + Send + Sync;

#[derive(Clone)]
pub struct CustomPredicate(pub Arc<PredicateFn>);

impl fmt::Debug for CustomPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomPredicate(..)")
    }
}

fn opaque<S: Serializer>(_: &CustomPredicate, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str("<opaque>")
}

impl fmt::Debug for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::Forbidden { tuples } => f.debug_struct("Forbidden").field("tuples", tuples).finish(),
            Predicate::Discrepancy { parts, threshold } => {
                f.debug_struct("Discrepancy").field("parts", parts).field("threshold", threshold).finish()
            }
            Predicate::OffsetDiscrepancy { offsets, threshold } => {
                f.debug_struct("OffsetDiscrepancy").field("offsets", offsets).field("threshold", threshold).finish()
            }
            Predicate::Capacity { cap } => f.debug_struct("Capacity").field("cap", cap).finish(),
            Predicate::Custom(c) => c.fmt(f),
        }
    }
}

impl Predicate {
    pub fn custom(f: impl Fn(&[u32]) -> bool + Send + Sync + 'static) -> Self {
        Predicate::Custom(CustomPredicate(Arc::new(f)))
    }

    /// `counts` is scratch space.
    pub fn violated(&self, values: &[u32], counts: &mut Vec<u32>) -> bool {
        match self {
            Predicate::Forbidden { tuples } => tuples.iter().any(|t| t.as_slice() == values),
            Predicate::Discrepancy { parts, threshold } => {
                counts.clear();
                counts.resize(*parts as usize, 0);
                for &v in values {
                    counts[v as usize] += 1;
                }
                discrepancy_exceeds(counts, values.len(), *threshold)
            }
            Predicate::OffsetDiscrepancy { offsets, threshold } => {
                counts.clear();
                counts.extend_from_slice(offsets);
                for &v in values {
                    counts[v as usize] += 1;
                }
                let total = offsets.iter().sum::<u32>() as usize + values.len();
                discrepancy_exceeds(counts, total, *threshold)
            }
            Predicate::Capacity { cap } => {
                counts.clear();
                for &v in values {
                    let v = v as usize;
                    if v >= counts.len() {
                        counts.resize(v + 1, 0);
                    }
                    counts[v] += 1;
                }
                counts.iter().any(|&c| c as f64 > *cap)
            }
            Predicate::Custom(c) => (c.0)(values),
        }
    }
}

/// `|count − total/k| > threshold` for some part, evaluated as
/// `|k·count − total| > k·threshold` so integer data stays exact.
pub fn discrepancy_exceeds(counts: &[u32], total: usize, threshold: f64) -> bool {
    let k = counts.len() as f64;
    counts.iter().any(|&c| ((c as f64) * k - total as f64).abs() > threshold * k)
}

#[derive(Debug, Clone, Serialize)]
pub struct Event {
    pub scope: Vec<u32>,
    pub predicate: Predicate,
    /// Analytic probability bound supplied by the caller.
    pub p: Option<f64>,
    pub host: u32,
}

impl Event {
    pub fn new(scope: Vec<u32>, predicate: Predicate) -> Self {
        Event { scope, predicate, p: None, host: 0 }
    }

    pub fn with_p(mut self, p: f64) -> Self {
        self.p = Some(p);
        self
    }

    pub fn with_host(mut self, host: u32) -> Self {
        self.host = host;
        self
    }
}

/// Variables with finite domains sampled uniformly, and bad events over them.
#[derive(Debug, Clone, Serialize)]
pub struct LllInstance {
    domains: Vec<u32>,
    var_host: Vec<u32>,
    events: Vec<Event>,
    #[serde(skip)]
    var_events: Vec<Vec<u32>>,
}

impl LllInstance {
    pub fn new(domains: Vec<u32>, events: Vec<Event>) -> Result<Self> {
        let var_host = (0..domains.len() as u32).collect();
        Self::with_hosts(domains, var_host, events)
    }

    pub fn with_hosts(domains: Vec<u32>, var_host: Vec<u32>, events: Vec<Event>) -> Result<Self> {
        if let Some(x) = domains.iter().position(|&d| d == 0) {
            return Err(Error::InvalidParameter(format!("variable {x} has an empty domain")));
        }
        if var_host.len() != domains.len() {
            return Err(Error::InvalidParameter("one host per variable required".into()));
        }
        let mut var_events = vec![Vec::new(); domains.len()];
        for (e, ev) in events.iter().enumerate() {
            let mut sorted = ev.scope.clone();
            sorted.sort_unstable();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidParameter(format!("event {e} lists a variable twice")));
            }
            for &x in &ev.scope {
                let list = var_events
                    .get_mut(x as usize)
                    .ok_or_else(|| Error::InvalidParameter(format!("event {e} scopes unknown variable {x}")))?;
                list.push(e as u32);
            }
        }
        Ok(LllInstance { domains, var_host, events, var_events })
    }

    pub fn var_count(&self) -> usize {
        self.domains.len()
    }

    pub fn event_count(&self) -> usize {
        self.events.len()
    }

    pub fn domains(&self) -> &[u32] {
        &self.domains
    }

    pub fn var_host(&self, x: u32) -> u32 {
        self.var_host[x as usize]
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// Events whose scope contains `x`, ascending.
    pub fn var_events(&self, x: u32) -> &[u32] {
        &self.var_events[x as usize]
    }

    pub fn event_violated(&self, e: u32, assignment: &[u32], values: &mut Vec<u32>, counts: &mut Vec<u32>) -> bool {
        let ev = &self.events[e as usize];
        values.clear();
        values.extend(ev.scope.iter().map(|&x| assignment[x as usize]));
        ev.predicate.violated(values, counts)
    }

    /// Every violated event, ascending.
    pub fn violated_events(&self, assignment: &[u32]) -> Vec<u32> {
        let (mut values, mut counts) = (Vec::new(), Vec::new());
        (0..self.events.len() as u32)
            .filter(|&e| self.event_violated(e, assignment, &mut values, &mut counts))
            .collect()
    }

    /// Exact probability of an event under uniform sampling, by enumeration
    /// of its scope. `None` when the scope space exceeds `cap`.
    pub fn exact_probability(&self, e: u32, cap: u64) -> Option<f64> {
        let ev = &self.events[e as usize];
        let doms: Vec<u32> = ev.scope.iter().map(|&x| self.domains[x as usize]).collect();
        let size = doms.iter().try_fold(1u64, |acc, &d| acc.checked_mul(d as u64))?;
        if size > cap {
            return None;
        }
        let mut values = vec![0u32; doms.len()];
        let mut counts = Vec::new();
        let mut bad = 0u64;
        for _ in 0..size {
            if ev.predicate.violated(&values, &mut counts) {
                bad += 1;
            }
            for i in (0..values.len()).rev() {
                values[i] += 1;
                if values[i] < doms[i] {
                    break;
                }
                values[i] = 0;
            }
        }
        Some(bad as f64 / size as f64)
    }
}

/// One node per event; an edge iff two scopes intersect.
pub fn dependency_graph(inst: &LllInstance) -> Graph {
    let mut adj = vec![Vec::new(); inst.event_count()];
    for x in 0..inst.var_count() as u32 {
        let evs = inst.var_events(x);
        for (i, &a) in evs.iter().enumerate() {
            for &b in &evs[i + 1..] {
                adj[a as usize].push(b);
                adj[b as usize].push(a);
            }
        }
    }
    Graph::from_raw_adjacency(adj)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionReport {
    pub d: usize,
    pub p_max: f64,
    pub p_d1: f64,
    pub p_d2: f64,
    pub p_d8: f64,
    pub p_d11: f64,
    /// e·p·d
    pub epd: f64,
    pub epd_below_one: bool,
}

impl CriterionReport {
    pub fn from_parts(d: usize, p_max: f64) -> Self {
        let df = d as f64;
        let epd = std::f64::consts::E * p_max * df;
        CriterionReport {
            d,
            p_max,
            p_d1: p_max * df,
            p_d2: p_max * df.powi(2),
            p_d8: p_max * df.powi(8),
            p_d11: p_max * df.powi(11),
            epd,
            epd_below_one: epd < 1.0,
        }
    }
}

/// Requires a probability bound on every event.
pub fn criterion_report(inst: &LllInstance) -> Result<CriterionReport> {
    let mut p_max: f64 = 0.0;
    for (e, ev) in inst.events().iter().enumerate() {
        let p = ev.p.ok_or_else(|| Error::InvalidParameter(format!("event {e} has no probability bound")))?;
        p_max = p_max.max(p);
    }
    Ok(CriterionReport::from_parts(dependency_graph(inst).max_degree(), p_max))
}

/// The q-divide post-shattering criterion function `(q/2)·exp(−2√d/q)`.
pub fn qdivide_post_bound(q: f64, d: f64) -> f64 {
    (q / 2.0) * (-2.0 * d.sqrt() / q).exp()
}
