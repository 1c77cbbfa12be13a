use std::collections::BTreeMap;

/// Traffic of one barrier round.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RoundStats {
    /// Bytes sent by each node.
    pub sent: Vec<u64>,
    /// Bytes received by each node.
    pub received: Vec<u64>,
    pub messages: u64,
    /// Bytes of messages whose sender and receiver are the same node.
    pub loopback_bytes: u64,
}

impl RoundStats {
    fn new(nodes: usize) -> Self {
        Self {
            sent: vec![0; nodes],
            received: vec![0; nodes],
            messages: 0,
            loopback_bytes: 0,
        }
    }

    pub fn total_bytes(&self) -> u64 {
        self.sent.iter().sum()
    }

    /// Bytes that actually cross between distinct nodes.
    pub fn network_bytes(&self) -> u64 {
        self.total_bytes() - self.loopback_bytes
    }
}

/// Per-round byte accounting, keyed by round number.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CommStats {
    nodes: usize,
    rounds: BTreeMap<u64, RoundStats>,
    /// Shutdown traffic, outside any round.
    pub control_bytes: u64,
}

impl CommStats {
    pub fn new(nodes: usize) -> Self {
        Self {
            nodes,
            rounds: BTreeMap::new(),
            control_bytes: 0,
        }
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn record(&mut self, round: u64, from: usize, to: usize, bytes: usize) {
        let nodes = self.nodes;
        let entry = self
            .rounds
            .entry(round)
            .or_insert_with(|| RoundStats::new(nodes));
        let bytes = bytes as u64;
        entry.sent[from] += bytes;
        entry.received[to] += bytes;
        entry.messages += 1;
        if from == to {
            entry.loopback_bytes += bytes;
        }
    }

    pub fn round(&self, round: u64) -> Option<&RoundStats> {
        self.rounds.get(&round)
    }

    pub fn rounds(&self) -> impl Iterator<Item = (u64, &RoundStats)> {
        self.rounds.iter().map(|(r, s)| (*r, s))
    }

    pub fn total_bytes(&self) -> u64 {
        self.rounds.values().map(RoundStats::total_bytes).sum()
    }

    pub fn network_bytes(&self) -> u64 {
        self.rounds.values().map(RoundStats::network_bytes).sum()
    }

    pub fn total_messages(&self) -> u64 {
        self.rounds.values().map(|r| r.messages).sum()
    }
}
