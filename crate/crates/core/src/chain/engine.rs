use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};
use std::io::Write;

use rand::Rng as _;

use super::{ChainConfig, ChainError, TrialResult};
use crate::linklayer::{retrieval_efficiency, sample_slots};
use crate::qstate::{
    apply_swap_error, depolarize, entanglement_swap, swap_outcome_probabilities, BellIndex,
    TwoQubitState,
};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Herald,
    TransferFailed,
    Transferred,
    SwapStart,
    SwapFailed,
    Swapped,
    Expired,
    Delivered,
}

impl EventKind {
    fn name(self) -> &'static str {
        match self {
            EventKind::Herald => "herald",
            EventKind::TransferFailed => "transfer_failed",
            EventKind::Transferred => "transferred",
            EventKind::SwapStart => "swap_start",
            EventKind::SwapFailed => "swap_failed",
            EventKind::Swapped => "swapped",
            EventKind::Expired => "expired",
            EventKind::Delivered => "delivered",
        }
    }
}

/// One line of the optional audit log.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub time: f64,
    /// `segment:<k>` or `node:<k>`.
    pub site: String,
    pub kind: EventKind,
    pub link: Option<usize>,
}

impl EventRecord {
    fn write_json(&self, w: &mut dyn Write) -> std::io::Result<()> {
        match self.link {
            Some(id) => writeln!(
                w,
                "{{\"time\":{:e},\"site\":\"{}\",\"event\":\"{}\",\"link\":{}}}",
                self.time,
                self.site,
                self.kind.name(),
                id
            ),
            None => writeln!(
                w,
                "{{\"time\":{:e},\"site\":\"{}\",\"event\":\"{}\"}}",
                self.time,
                self.site,
                self.kind.name()
            ),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Ev {
    Herald { seg: usize },
    SwapDone { node: usize, left: usize, right: usize },
    Expire { link: usize },
}

struct Queued {
    time: f64,
    seq: u64,
    ev: Ev,
}

impl PartialEq for Queued {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Queued {}
impl PartialOrd for Queued {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Queued {
    // Min-heap on (time, seq).
    fn cmp(&self, o: &Self) -> Ordering {
        o.time.total_cmp(&self.time).then(o.seq.cmp(&self.seq))
    }
}

/// Spin pair spanning nodes `left < right`.
struct Link {
    left: usize,
    right: usize,
    state: TwoQubitState,
    /// Depolarization has been applied up to this time.
    clock: f64,
    deadline: f64,
    busy: bool,
}

#[derive(Default)]
struct Node {
    /// Free transducers facing the segment on the left / right.
    left_free: u32,
    right_free: u32,
    /// Available links ending / starting here, oldest first.
    ending: VecDeque<usize>,
    starting: VecDeque<usize>,
}

struct Sim<'a> {
    cfg: &'a ChainConfig,
    rng: rng::Rng,
    now: f64,
    seq: u64,
    heap: BinaryHeap<Queued>,
    nodes: Vec<Node>,
    links: Vec<Option<Link>>,
    scheduled: Vec<bool>,
    n_seg: usize,
    p_att: Vec<f64>,
    slot: f64,
    transfer_p: f64,
    out: Vec<TwoQubitState>,
    latencies: Vec<f64>,
    last_success: f64,
    log: Option<&'a mut dyn Write>,
}

/// One trial on random stream `trial` of `config.seed`.
pub fn run_trial(config: &ChainConfig, trial: u64) -> Result<TrialResult, ChainError> {
    run_trial_logged(config, trial, None)
}

/// [`run_trial`] that also writes one JSON object per event to `log`.
pub fn run_trial_logged<'a>(
    config: &'a ChainConfig,
    trial: u64,
    log: Option<&'a mut dyn Write>,
) -> Result<TrialResult, ChainError> {
    config.validate()?;
    let n_seg = config.n_segments() as usize;
    let link = config.segment_link();
    let latency = link.herald_latency();
    let cap = config.n_transfer_rb;
    let nodes = (0..=n_seg)
        .map(|k| {
            let end = k == 0 || k == n_seg;
            Node {
                left_free: if end { u32::MAX } else { cap },
                right_free: if end { u32::MAX } else { cap },
                ..Node::default()
            }
        })
        .collect();
    let mut sim = Sim {
        cfg: config,
        rng: rng::stream(config.seed, trial),
        now: 0.0,
        seq: 0,
        heap: BinaryHeap::new(),
        nodes,
        links: Vec::new(),
        scheduled: vec![false; n_seg],
        n_seg,
        p_att: (0..n_seg).map(|s| config.segment_attempt_prob(s)).collect(),
        slot: config.slot_time(),
        transfer_p: config.transfer_success * retrieval_efficiency(latency, link.memory_t2),
        out: Vec::new(),
        latencies: Vec::new(),
        last_success: 0.0,
        log,
    };
    for s in 0..n_seg {
        // The first heralds also wait for the photons' round trip.
        sim.schedule_herald(s, latency);
    }
    let target = config.successes_per_trial as usize;
    let mut events = 0u64;
    while sim.out.len() < target {
        if events >= config.event_budget {
            return Ok(TrialResult {
                total_time: sim.now,
                end_to_end_states: sim.out,
                latencies: sim.latencies,
                completed: false,
                events,
            });
        }
        let Some(q) = sim.heap.pop() else {
            return Err(ChainError::Config("event queue ran dry".into()));
        };
        events += 1;
        sim.now = q.time;
        match q.ev {
            Ev::Herald { seg } => sim.on_herald(seg)?,
            Ev::SwapDone { node, left, right } => sim.on_swap_done(node, left, right)?,
            Ev::Expire { link } => sim.on_expire(link)?,
        }
    }
    Ok(TrialResult {
        total_time: sim.last_success,
        end_to_end_states: sim.out,
        latencies: sim.latencies,
        completed: true,
        events,
    })
}

impl Sim<'_> {
    fn push(&mut self, time: f64, ev: Ev) {
        self.seq += 1;
        self.heap.push(Queued {
            time,
            seq: self.seq,
            ev,
        });
    }

    fn note(&mut self, site: String, kind: EventKind, link: Option<usize>) -> Result<(), ChainError> {
        if let Some(w) = self.log.as_deref_mut() {
            EventRecord {
                time: self.now,
                site,
                kind,
                link,
            }
            .write_json(w)?;
        }
        Ok(())
    }

    fn armed(&self, seg: usize) -> bool {
        self.nodes[seg].right_free > 0 && self.nodes[seg + 1].left_free > 0
    }

    fn schedule_herald(&mut self, seg: usize, delay: f64) {
        if self.scheduled[seg] || !self.armed(seg) {
            return;
        }
        let slots = sample_slots(self.p_att[seg], &mut self.rng);
        self.scheduled[seg] = true;
        self.push(self.now + delay + slots * self.slot, Ev::Herald { seg });
    }

    fn rearm(&mut self, seg: usize) {
        self.schedule_herald(seg, 0.0);
    }

    fn is_repeater(&self, node: usize) -> bool {
        node != 0 && node != self.n_seg
    }

    fn deliver(&mut self, state: TwoQubitState, link: Option<usize>) -> Result<(), ChainError> {
        self.note(format!("node:{}", self.n_seg), EventKind::Delivered, link)?;
        self.latencies.push(self.now - self.last_success);
        self.last_success = self.now;
        self.out.push(state);
        Ok(())
    }

    fn on_herald(&mut self, seg: usize) -> Result<(), ChainError> {
        self.scheduled[seg] = false;
        self.note(format!("segment:{seg}"), EventKind::Herald, None)?;
        if self.n_seg == 1 {
            // End nodes measure or store the photons directly.
            self.deliver(self.cfg.pair_state.clone(), None)?;
            self.rearm(seg);
            return Ok(());
        }
        if self.rng.gen::<f64>() >= self.transfer_p {
            self.note(format!("segment:{seg}"), EventKind::TransferFailed, None)?;
            self.rearm(seg);
            return Ok(());
        }
        let (a, b) = (seg, seg + 1);
        self.take(a, b);
        let id = self.links.len();
        let deadline = self.now + self.cfg.cutoff;
        self.links.push(Some(Link {
            left: a,
            right: b,
            state: self.cfg.pair_state.clone(),
            clock: self.now,
            deadline,
            busy: false,
        }));
        self.note(format!("segment:{seg}"), EventKind::Transferred, Some(id))?;
        self.push(deadline, Ev::Expire { link: id });
        self.nodes[a].starting.push_back(id);
        self.nodes[b].ending.push_back(id);
        self.rearm(seg);
        self.try_swap(a)?;
        self.try_swap(b)?;
        Ok(())
    }

    /// Occupies the transducers at the two ends of a new link.
    fn take(&mut self, a: usize, b: usize) {
        if self.is_repeater(a) {
            self.nodes[a].right_free -= 1;
        }
        if self.is_repeater(b) {
            self.nodes[b].left_free -= 1;
        }
    }

    /// Frees the transducers at the ends of a link that no longer exists.
    fn release(&mut self, a: usize, b: usize) {
        if self.is_repeater(a) {
            self.nodes[a].right_free += 1;
            self.rearm(a);
        }
        if self.is_repeater(b) {
            self.nodes[b].left_free += 1;
            self.rearm(b - 1);
        }
    }

    fn repeater_ends(&self, l: &Link) -> f64 {
        (self.is_repeater(l.left) as u8 + self.is_repeater(l.right) as u8) as f64
    }

    /// Applies the storage decoherence accumulated since the link's clock.
    fn age(&mut self, id: usize) -> Result<TwoQubitState, ChainError> {
        let now = self.now;
        let coh = self.cfg.spin_coherence;
        let l = self.links[id].as_ref().expect("live link");
        let dt = (now - l.clock).max(0.0) * self.repeater_ends(l);
        let st = depolarize(&l.state, dt, coh)?;
        let l = self.links[id].as_mut().expect("live link");
        l.state = st.clone();
        l.clock = now;
        Ok(st)
    }

    fn try_swap(&mut self, node: usize) -> Result<(), ChainError> {
        if !self.is_repeater(node) {
            return Ok(());
        }
        while let (Some(&l), Some(&r)) = (
            self.nodes[node].ending.front(),
            self.nodes[node].starting.front(),
        ) {
            self.nodes[node].ending.pop_front();
            self.nodes[node].starting.pop_front();
            for id in [l, r] {
                let (a, b) = {
                    let k = self.links[id].as_mut().expect("queued link is live");
                    debug_assert!(self.now <= k.deadline, "consumed after cutoff");
                    k.busy = true;
                    (k.left, k.right)
                };
                // Withdraw from the far end so no other node can claim it.
                let far = if a == node { b } else { a };
                let q = if a == node {
                    &mut self.nodes[far].ending
                } else {
                    &mut self.nodes[far].starting
                };
                q.retain(|&x| x != id);
            }
            self.age(l)?;
            self.age(r)?;
            self.note(format!("node:{node}"), EventKind::SwapStart, Some(l))?;
            self.note(format!("node:{node}"), EventKind::SwapStart, Some(r))?;
            self.push(
                self.now + self.cfg.swap_time,
                Ev::SwapDone {
                    node,
                    left: l,
                    right: r,
                },
            );
        }
        Ok(())
    }

    fn on_swap_done(&mut self, node: usize, l: usize, r: usize) -> Result<(), ChainError> {
        let left = self.links[l].take().expect("swapping link");
        let right = self.links[r].take().expect("swapping link");
        // The inner transducers are free again.
        self.nodes[node].left_free += 1;
        self.nodes[node].right_free += 1;
        let (a, b) = (left.left, right.right);
        if self.rng.gen::<f64>() >= self.cfg.swap_success {
            self.note(format!("node:{node}"), EventKind::SwapFailed, Some(l))?;
            self.rearm(node - 1);
            self.rearm(node);
            self.release(a, b);
            return Ok(());
        }
        let probs = swap_outcome_probabilities(&left.state, &right.state);
        let total: f64 = probs.iter().sum();
        let mut u = self.rng.gen::<f64>() * total;
        let mut outcome = BellIndex::ALL[3];
        for (k, p) in probs.iter().enumerate() {
            if u < *p {
                outcome = BellIndex::ALL[k];
                break;
            }
            u -= p;
        }
        let (st, _) = entanglement_swap(&left.state, &right.state, outcome)?;
        let st = if self.cfg.swap_error > 0.0 && self.rng.gen::<f64>() < self.cfg.swap_error {
            apply_swap_error(&st, 1.0)?
        } else {
            st
        };
        self.rearm(node - 1);
        self.rearm(node);
        let id = self.links.len();
        if a == 0 && b == self.n_seg {
            self.links.push(None);
            self.deliver(st, Some(id))?;
            return Ok(());
        }
        let deadline = self.now + self.cfg.cutoff;
        self.links.push(Some(Link {
            left: a,
            right: b,
            state: st,
            clock: self.now,
            deadline,
            busy: false,
        }));
        self.note(format!("node:{node}"), EventKind::Swapped, Some(id))?;
        self.push(deadline, Ev::Expire { link: id });
        self.nodes[a].starting.push_back(id);
        self.nodes[b].ending.push_back(id);
        self.try_swap(a)?;
        self.try_swap(b)?;
        Ok(())
    }

    fn on_expire(&mut self, id: usize) -> Result<(), ChainError> {
        let Some(l) = self.links[id].as_ref() else {
            return Ok(());
        };
        if l.busy {
            return Ok(());
        }
        let (a, b) = (l.left, l.right);
        self.links[id] = None;
        self.nodes[a].starting.retain(|&x| x != id);
        self.nodes[b].ending.retain(|&x| x != id);
        self.note(format!("node:{a}"), EventKind::Expired, Some(id))?;
        self.release(a, b);
        Ok(())
    }
}
