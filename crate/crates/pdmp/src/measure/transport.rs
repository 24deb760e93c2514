//! Dense transportation solver: network simplex on the bipartite graph of
//! suppliers and consumers.
//!
//! This is the exact LP engine behind the bounded-Lipschitz distance. The
//! basis is a spanning tree over all nodes (sources first, then sinks),
//! stored through parent pointers; potentials satisfy
//! pi_source - pi_sink = cost on every tree arc, so a non-basic arc prices
//! to rc = cost - pi_source + pi_sink. Entering arcs are found by block
//! pricing with a rolling start; the leaving arc is the first strict
//! minimum along the cycle, sink-endpoint side scanned first, which makes
//! every pivot deterministic.

use crate::error::{Error, Result};

pub(crate) struct TransportSolution {
    pub cost: f64,
    /// Potentials with source_pot[i] - sink_pot[j] <= cost_ij at optimality
    /// and equality on every basic arc.
    #[allow(dead_code)] // read by the duality-gap tests
    pub source_pot: Vec<f64>,
    pub sink_pot: Vec<f64>,
    /// False when the pivot cap was reached before optimality.
    pub converged: bool,
}

const PRICE_TOL: f64 = 1e-11;

struct Simplex<'a> {
    ns: usize,
    nt: usize,
    n: usize,
    cost: &'a [f64],
    /// Tree arrays indexed by node id (0..ns sources, ns..ns+nt sinks);
    /// each non-root node owns the arc to its parent.
    parent: Vec<usize>,
    tree_flow: Vec<f64>,
    depth: Vec<usize>,
    pi: Vec<f64>,
    children: Vec<Vec<usize>>,
}

const NO_NODE: usize = usize::MAX;

impl<'a> Simplex<'a> {
    fn arc_cost(&self, source: usize, sink: usize) -> f64 {
        self.cost[source * self.nt + sink]
    }

    /// Northwest-corner initial basis: walk the supply/demand staircase,
    /// entering one node per step, which yields exactly ns + nt - 1 basic
    /// arcs forming a spanning tree with real (non-artificial) arcs only.
    fn initial_basis(&mut self, supply: &[f64], demand: &[f64]) {
        let ns = self.ns;
        let mut rem_a = supply.to_vec();
        let mut rem_b = demand.to_vec();
        let mut i = 0usize;
        let mut j = 0usize;
        let f = rem_a[0].min(rem_b[0]).max(0.0);
        self.parent[ns] = 0;
        self.tree_flow[ns] = f;
        rem_a[0] -= f;
        rem_b[0] -= f;
        while !(i == ns - 1 && j == self.nt - 1) {
            if (rem_a[i] <= rem_b[j] && i < ns - 1) || j == self.nt - 1 {
                i += 1;
                let f = rem_a[i].min(rem_b[j]).max(0.0);
                self.parent[i] = ns + j;
                self.tree_flow[i] = f;
                rem_a[i] -= f;
                rem_b[j] -= f;
            } else {
                j += 1;
                let f = rem_a[i].min(rem_b[j]).max(0.0);
                self.parent[ns + j] = i;
                self.tree_flow[ns + j] = f;
                rem_a[i] -= f;
                rem_b[j] -= f;
            }
        }
    }

    /// Rebuilds children, depth, and potentials from the parent array.
    fn refresh(&mut self) {
        for list in &mut self.children {
            list.clear();
        }
        for v in 0..self.n {
            let p = self.parent[v];
            if p != NO_NODE {
                self.children[p].push(v);
            }
        }
        self.depth[0] = 0;
        self.pi[0] = 0.0;
        let mut stack = vec![0usize];
        while let Some(p) = stack.pop() {
            for k in 0..self.children[p].len() {
                let v = self.children[p][k];
                self.depth[v] = self.depth[p] + 1;
                self.pi[v] = if v < self.ns {
                    // v is the source endpoint: pi_v - pi_p = cost
                    self.pi[p] + self.arc_cost(v, p - self.ns)
                } else {
                    self.pi[p] - self.arc_cost(p, v - self.ns)
                };
                stack.push(v);
            }
        }
    }

    /// Most negative reduced cost within the first block (rolling start)
    /// that contains any negative arc.
    fn price(&self, start: &mut usize, block: usize) -> Option<(usize, usize)> {
        let total = self.ns * self.nt;
        let mut best_rc = -PRICE_TOL;
        let mut best: Option<(usize, usize)> = None;
        let mut pos = *start;
        let mut scanned = 0;
        while scanned < total {
            let chunk = block.min(total - scanned);
            for _ in 0..chunk {
                let (i, j) = (pos / self.nt, pos % self.nt);
                let rc = self.cost[pos] - self.pi[i] + self.pi[self.ns + j];
                if rc < best_rc {
                    best_rc = rc;
                    best = Some((i, j));
                }
                pos += 1;
                if pos == total {
                    pos = 0;
                }
            }
            scanned += chunk;
            if best.is_some() {
                break;
            }
        }
        *start = pos;
        best
    }

    /// One pivot on the entering arc (source si, sink tj).
    fn pivot(&mut self, si: usize, tj: usize) {
        let s_node = si;
        let t_node = self.ns + tj;

        let mut u = s_node;
        let mut v = t_node;
        while self.depth[u] > self.depth[v] {
            u = self.parent[u];
        }
        while self.depth[v] > self.depth[u] {
            v = self.parent[v];
        }
        while u != v {
            u = self.parent[u];
            v = self.parent[v];
        }
        let apex = u;

        // The cycle sends theta along the entering arc; on the sink-endpoint
        // side each source-owned tree arc gains and each sink-owned arc
        // loses, mirrored on the source-endpoint side. The first strict
        // minimum among losing arcs leaves.
        let mut theta = f64::INFINITY;
        let mut leave = NO_NODE;
        let mut leave_on_t_side = false;
        let mut w = t_node;
        while w != apex {
            if w >= self.ns && self.tree_flow[w] < theta {
                theta = self.tree_flow[w];
                leave = w;
                leave_on_t_side = true;
            }
            w = self.parent[w];
        }
        let mut w = s_node;
        while w != apex {
            if w < self.ns && self.tree_flow[w] < theta {
                theta = self.tree_flow[w];
                leave = w;
                leave_on_t_side = false;
            }
            w = self.parent[w];
        }
        debug_assert_ne!(leave, NO_NODE);

        let mut w = t_node;
        while w != apex {
            self.tree_flow[w] += if w < self.ns { theta } else { -theta };
            w = self.parent[w];
        }
        let mut w = s_node;
        while w != apex {
            self.tree_flow[w] += if w < self.ns { -theta } else { theta };
            w = self.parent[w];
        }

        // Reattach: the entering endpoint inside the cut-off component
        // becomes a child of the other endpoint; parent pointers reverse
        // along the path up to the leaving arc, each reversed arc handing
        // its flow to its new owner.
        let (enter, other) = if leave_on_t_side { (t_node, s_node) } else { (s_node, t_node) };
        let mut prev = other;
        let mut prev_flow = theta;
        let mut cur = enter;
        loop {
            let next = self.parent[cur];
            let next_flow = self.tree_flow[cur];
            self.parent[cur] = prev;
            self.tree_flow[cur] = prev_flow;
            if cur == leave {
                break;
            }
            prev = cur;
            prev_flow = next_flow;
            cur = next;
        }
        self.refresh();
    }

    fn total_cost(&self) -> f64 {
        let mut total = 0.0;
        for v in 1..self.n {
            let p = self.parent[v];
            let c = if v < self.ns {
                self.arc_cost(v, p - self.ns)
            } else {
                self.arc_cost(p, v - self.ns)
            };
            total += self.tree_flow[v] * c;
        }
        total
    }
}

/// Solves min sum_ij cost_ij x_ij subject to row sums = supply, column sums
/// = demand, x >= 0. `cost` is row-major with stride demand.len(). Supply
/// and demand must be positive and balanced to rounding dust (the caller
/// repairs dust beforehand).
pub(crate) fn solve_transport(
    supply: &[f64],
    demand: &[f64],
    cost: &[f64],
) -> Result<TransportSolution> {
    let ns = supply.len();
    let nt = demand.len();
    assert_eq!(cost.len(), ns * nt);
    assert!(ns > 0 && nt > 0);
    for &value in supply.iter().chain(demand).chain(cost) {
        if !value.is_finite() {
            return Err(Error::Numeric(format!("non-finite transport input {value}")));
        }
    }

    let mut simplex = Simplex {
        ns,
        nt,
        n: ns + nt,
        cost,
        parent: vec![NO_NODE; ns + nt],
        tree_flow: vec![0.0; ns + nt],
        depth: vec![0; ns + nt],
        pi: vec![0.0; ns + nt],
        children: vec![Vec::new(); ns + nt],
    };
    simplex.initial_basis(supply, demand);
    simplex.refresh();

    let block = 256.max(((ns * nt) as f64).sqrt() as usize);
    let pivot_cap = 100 * (ns + nt) + 10_000;
    let mut start = 0usize;
    let mut converged = false;
    for _ in 0..pivot_cap {
        match simplex.price(&mut start, block) {
            Some((i, j)) => simplex.pivot(i, j),
            None => {
                converged = true;
                break;
            }
        }
    }

    let cost_total = simplex.total_cost();
    if !cost_total.is_finite() || simplex.pi.iter().any(|p| !p.is_finite()) {
        return Err(Error::Numeric("transport solve produced non-finite values".into()));
    }
    Ok(TransportSolution {
        cost: cost_total,
        source_pot: simplex.pi[..ns].to_vec(),
        sink_pot: simplex.pi[ns..].to_vec(),
        converged,
    })
}
