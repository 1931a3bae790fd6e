//! Round-based message fabric with bounded random delays and Bernoulli drops.
//!
//! A message sent in round `k` with delay `t` is handed to its recipient in
//! round `k + 1 + t`, so a zero-delay fabric behaves like a synchronous
//! exchange between consecutive rounds.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digraph::{Digraph, EdgeId, NodeId};

#[derive(Debug, Error, PartialEq)]
pub enum NetError {
    #[error("drop probability {0} outside [0, 1)")]
    BadDropProbability(f64),
    #[error("retransmission bound needs 0 < q < 1 and 0 < eps < 1, got q = {q}, eps = {eps}")]
    Domain { q: f64, eps: f64 },
    #[error("expected {expected} link models, got {got}")]
    LinkCount { expected: usize, got: usize },
}

/// `Forward` runs from an edge's tail to its head, `Backward` the other way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Channel {
    pub edge: EdgeId,
    pub dir: Direction,
}

impl Channel {
    pub fn forward(edge: EdgeId) -> Self {
        Self {
            edge,
            dir: Direction::Forward,
        }
    }

    pub fn backward(edge: EdgeId) -> Self {
        Self {
            edge,
            dir: Direction::Backward,
        }
    }

    pub fn id(&self) -> usize {
        self.edge * 2 + usize::from(self.dir == Direction::Backward)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MessageKind {
    FullWeight,
    ChangeAmount,
    DesiredWeight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Message {
    pub channel: Channel,
    pub kind: MessageKind,
    pub value: i64,
    pub sent_round: u64,
    pub deliver_round: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkModel {
    pub max_delay: u64,
    pub drop_prob: f64,
}

impl LinkModel {
    pub const PERFECT: LinkModel = LinkModel {
        max_delay: 0,
        drop_prob: 0.0,
    };

    pub fn new(max_delay: u64, drop_prob: f64) -> Result<Self, NetError> {
        if !(0.0..1.0).contains(&drop_prob) {
            return Err(NetError::BadDropProbability(drop_prob));
        }
        Ok(Self { max_delay, drop_prob })
    }
}

/// How a surviving message's delay is chosen.
#[derive(Debug, Clone, Default, PartialEq)]
pub enum DelayPolicy {
    /// Uniform over `0..=max_delay`.
    #[default]
    Uniform,
    /// Always `max_delay`.
    Max,
    /// Fixed delays per `(edge, send_round)`, `default` elsewhere.
    Scripted {
        default: u64,
        overrides: HashMap<(EdgeId, u64), u64>,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct FabricStats {
    pub sent: u64,
    pub dropped: u64,
    pub delivered: u64,
}

/// Messages handed over in one round, grouped by recipient.
pub type Deliveries = BTreeMap<NodeId, Vec<Message>>;

#[derive(Debug, Clone)]
pub struct Fabric {
    endpoints: Vec<(NodeId, NodeId)>,
    links: Vec<LinkModel>,
    policy: DelayPolicy,
    seed: u64,
    streams: Vec<Option<ChaCha8Rng>>,
    pending: BTreeMap<u64, Vec<Message>>,
    in_flight: usize,
    round: u64,
    stats: FabricStats,
}

impl Fabric {
    /// One link model per channel, indexed by [`Channel::id`].
    pub fn new(g: &Digraph, links: Vec<LinkModel>, policy: DelayPolicy, seed: u64) -> Result<Self, NetError> {
        let channels = 2 * g.edge_count();
        if links.len() != channels {
            return Err(NetError::LinkCount {
                expected: channels,
                got: links.len(),
            });
        }
        for l in &links {
            LinkModel::new(l.max_delay, l.drop_prob)?;
        }
        Ok(Self {
            endpoints: g.edges().iter().map(|e| (e.from, e.to)).collect(),
            links,
            policy,
            seed,
            streams: vec![None; channels],
            pending: BTreeMap::new(),
            in_flight: 0,
            round: 0,
            stats: FabricStats::default(),
        })
    }

    pub fn uniform(g: &Digraph, link: LinkModel, policy: DelayPolicy, seed: u64) -> Result<Self, NetError> {
        Self::new(g, vec![link; 2 * g.edge_count()], policy, seed)
    }

    pub fn perfect(g: &Digraph) -> Self {
        Self::uniform(g, LinkModel::PERFECT, DelayPolicy::Uniform, 0).expect("perfect links are valid")
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn stats(&self) -> FabricStats {
        self.stats
    }

    pub fn is_empty(&self) -> bool {
        self.in_flight == 0
    }

    pub fn recipient(&self, channel: Channel) -> NodeId {
        let (tail, head) = self.endpoints[channel.edge];
        match channel.dir {
            Direction::Forward => head,
            Direction::Backward => tail,
        }
    }

    fn stream(&mut self, channel: Channel) -> &mut ChaCha8Rng {
        let seed = self.seed;
        self.streams[channel.id()].get_or_insert_with(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(channel.id() as u64);
            rng
        })
    }

    /// Send during the current round. Returns `false` if the message was dropped.
    pub fn send(&mut self, channel: Channel, kind: MessageKind, value: i64) -> bool {
        self.stats.sent += 1;
        let link = self.links[channel.id()];
        let sent_round = self.round;
        if link.drop_prob > 0.0 && self.stream(channel).gen_bool(link.drop_prob) {
            self.stats.dropped += 1;
            return false;
        }
        let delay = match &self.policy {
            DelayPolicy::Uniform if link.max_delay > 0 => {
                let max = link.max_delay;
                self.stream(channel).gen_range(0..=max)
            }
            DelayPolicy::Uniform => 0,
            DelayPolicy::Max => link.max_delay,
            DelayPolicy::Scripted { default, overrides } => {
                *overrides.get(&(channel.edge, sent_round)).unwrap_or(default)
            }
        };
        let deliver_round = sent_round + 1 + delay;
        self.pending.entry(deliver_round).or_default().push(Message {
            channel,
            kind,
            value,
            sent_round,
            deliver_round,
        });
        self.in_flight += 1;
        true
    }

    /// Everything due in `round`, grouped by recipient and ordered by
    /// `(sent_round, channel)`. Also makes `round` the current send round.
    pub fn deliver(&mut self, round: u64) -> Deliveries {
        assert!(round >= self.round, "rounds must be queried in nondecreasing order");
        self.round = round;
        let mut due: Vec<Message> = Vec::new();
        while let Some(entry) = self.pending.first_entry() {
            if *entry.key() > round {
                break;
            }
            due.extend(entry.remove());
        }
        self.in_flight -= due.len();
        self.stats.delivered += due.len() as u64;
        due.sort_by_key(|m| (m.sent_round, m.channel.id()));
        let mut out = Deliveries::new();
        for m in due {
            out.entry(self.recipient(m.channel)).or_default().push(m);
        }
        out
    }
}

/// Number of consecutive attempts after which a link with drop probability
/// `q` has failed every time with probability at most `eps`.
pub fn retransmission_bound(q: f64, eps: f64) -> Result<u64, NetError> {
    let open = |v: f64| v > 0.0 && v < 1.0;
    if !open(q) || !open(eps) {
        return Err(NetError::Domain { q, eps });
    }
    let ratio = eps.ln() / q.ln();
    let mut k = (ratio - 1e-9).ceil().max(1.0) as u64;
    while q.powi(k as i32) > eps {
        k += 1;
    }
    while k > 1 && q.powi(k as i32 - 1) <= eps {
        k -= 1;
    }
    Ok(k)
}
