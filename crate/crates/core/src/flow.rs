//! Integer maximum flow via Dinic's algorithm.
//!
//! Small and self-contained: the placement oracle only needs max flow on
//! bipartite-ish networks with a few thousand nodes, where Dinic's level
//! graph + blocking flow approach is fast and exact.

/// A directed edge in the residual network. `cap` is the remaining capacity.
#[derive(Debug, Clone)]
struct Edge {
    to: usize,
    cap: u64,
    /// Index of the paired reverse edge in `edges`.
    rev: usize,
}

/// Max-flow network over nodes `0..n`.
#[derive(Debug, Clone)]
pub struct FlowNetwork {
    adj: Vec<Vec<usize>>,
    edges: Vec<Edge>,
    original_caps: Vec<u64>,
}

impl FlowNetwork {
    pub fn new(nodes: usize) -> Self {
        FlowNetwork {
            adj: vec![Vec::new(); nodes],
            edges: Vec::new(),
            original_caps: Vec::new(),
        }
    }

    pub fn nodes(&self) -> usize {
        self.adj.len()
    }

    /// Add a directed edge and return its id, usable with
    /// [`FlowNetwork::edge_flow`] after running [`FlowNetwork::max_flow`].
    pub fn add_edge(&mut self, from: usize, to: usize, cap: u64) -> usize {
        assert!(from < self.adj.len() && to < self.adj.len(), "node out of range");
        let id = self.edges.len();
        self.adj[from].push(id);
        self.edges.push(Edge { to, cap, rev: id + 1 });
        self.adj[to].push(id + 1);
        self.edges.push(Edge {
            to: from,
            cap: 0,
            rev: id,
        });
        self.original_caps.push(cap);
        self.original_caps.push(0);
        id
    }

    /// Flow currently routed through a forward edge returned by `add_edge`.
    pub fn edge_flow(&self, edge_id: usize) -> u64 {
        self.original_caps[edge_id] - self.edges[edge_id].cap
    }

    /// Compute the maximum `source -> sink` flow. May be called once per
    /// network; capacities are consumed.
    pub fn max_flow(&mut self, source: usize, sink: usize) -> u64 {
        assert!(source < self.adj.len() && sink < self.adj.len(), "node out of range");
        assert_ne!(source, sink, "source and sink must differ");
        let mut total = 0u64;
        loop {
            let levels = match self.bfs_levels(source, sink) {
                Some(l) => l,
                None => break,
            };
            let mut iter = vec![0usize; self.adj.len()];
            loop {
                let pushed = self.dfs_augment(source, sink, u64::MAX, &levels, &mut iter);
                if pushed == 0 {
                    break;
                }
                total += pushed;
            }
        }
        total
    }

    /// BFS over residual edges; returns levels if the sink is reachable.
    fn bfs_levels(&self, source: usize, sink: usize) -> Option<Vec<u32>> {
        let mut levels = vec![u32::MAX; self.adj.len()];
        levels[source] = 0;
        let mut queue = std::collections::VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            for &eid in &self.adj[u] {
                let e = &self.edges[eid];
                if e.cap > 0 && levels[e.to] == u32::MAX {
                    levels[e.to] = levels[u] + 1;
                    queue.push_back(e.to);
                }
            }
        }
        (levels[sink] != u32::MAX).then_some(levels)
    }

    /// Push one augmenting path along the level graph.
    fn dfs_augment(
        &mut self,
        u: usize,
        sink: usize,
        limit: u64,
        levels: &[u32],
        iter: &mut [usize],
    ) -> u64 {
        if u == sink {
            return limit;
        }
        while iter[u] < self.adj[u].len() {
            let eid = self.adj[u][iter[u]];
            let (to, cap) = {
                let e = &self.edges[eid];
                (e.to, e.cap)
            };
            if cap > 0 && levels[to] == levels[u] + 1 {
                let pushed = self.dfs_augment(to, sink, limit.min(cap), levels, iter);
                if pushed > 0 {
                    self.edges[eid].cap -= pushed;
                    let rev = self.edges[eid].rev;
                    self.edges[rev].cap += pushed;
                    return pushed;
                }
            }
            iter[u] += 1;
        }
        0
    }
}
