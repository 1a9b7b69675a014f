//! Primal network simplex for the balanced transportation problem.
//!
//! Sources and sinks form a bipartite graph plus an artificial root joined to
//! every node by big-M arcs, which gives a strongly feasible starting tree.
//! The leaving arc is the last blocking arc met when walking the pivot cycle
//! from its apex in the direction of the entering arc, which rules out cycling
//! on degenerate pivots.

use crate::error::{Error, Result};

/// Optimal flow and the node potentials that certify it.
#[derive(Debug, Clone)]
pub(crate) struct FlowSolution {
    /// `m × n`, row-major.
    pub flow: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

const NONE: usize = usize::MAX;

struct Network<'a> {
    m: usize,
    n: usize,
    cost: &'a [f64],
    big_m: f64,
}

impl Network<'_> {
    fn real_arcs(&self) -> usize {
        self.m * self.n
    }

    fn root(&self) -> usize {
        self.m + self.n
    }

    /// (tail, head) of an arc. Real arcs run source → sink; artificial arcs run
    /// source → root and root → sink.
    fn ends(&self, arc: usize) -> (usize, usize) {
        let real = self.real_arcs();
        if arc < real {
            (arc / self.n, self.m + arc % self.n)
        } else if arc < real + self.m {
            (arc - real, self.root())
        } else {
            (self.root(), self.m + (arc - real - self.m))
        }
    }

    fn arc_cost(&self, arc: usize) -> f64 {
        let real = self.real_arcs();
        if arc < real {
            self.cost[arc]
        } else if arc < real + self.m {
            0.0
        } else {
            self.big_m
        }
    }
}

struct Tree {
    parent: Vec<usize>,
    pred: Vec<usize>,
    depth: Vec<usize>,
    pi: Vec<f64>,
    // scratch for rebuilding
    adj_start: Vec<usize>,
    adj: Vec<usize>,
    queue: Vec<usize>,
}

impl Tree {
    fn new(nodes: usize) -> Self {
        Self {
            parent: vec![NONE; nodes],
            pred: vec![NONE; nodes],
            depth: vec![0; nodes],
            pi: vec![0.0; nodes],
            adj_start: vec![0; nodes + 1],
            adj: Vec::new(),
            queue: Vec::with_capacity(nodes),
        }
    }

    /// Recomputes parents, depths and potentials from the list of basic arcs.
    fn rebuild(&mut self, net: &Network, basic: &[usize]) {
        let nodes = self.parent.len();
        self.adj_start.iter_mut().for_each(|s| *s = 0);
        for &a in basic {
            let (t, h) = net.ends(a);
            self.adj_start[t + 1] += 1;
            self.adj_start[h + 1] += 1;
        }
        for k in 0..nodes {
            self.adj_start[k + 1] += self.adj_start[k];
        }
        self.adj.clear();
        self.adj.resize(2 * basic.len(), 0);
        let mut fill = self.adj_start.clone();
        for &a in basic {
            let (t, h) = net.ends(a);
            self.adj[fill[t]] = a;
            fill[t] += 1;
            self.adj[fill[h]] = a;
            fill[h] += 1;
        }

        let root = net.root();
        self.parent.iter_mut().for_each(|p| *p = NONE);
        self.parent[root] = root;
        self.pred[root] = NONE;
        self.depth[root] = 0;
        self.pi[root] = 0.0;
        self.queue.clear();
        self.queue.push(root);
        let mut head = 0;
        while head < self.queue.len() {
            let x = self.queue[head];
            head += 1;
            for k in self.adj_start[x]..self.adj_start[x + 1] {
                let a = self.adj[k];
                let (t, h) = net.ends(a);
                let y = if t == x { h } else { t };
                if self.parent[y] != NONE {
                    continue;
                }
                self.parent[y] = x;
                self.pred[y] = a;
                self.depth[y] = self.depth[x] + 1;
                // basic arcs have zero reduced cost: c + π_tail − π_head = 0
                let c = net.arc_cost(a);
                self.pi[y] = if t == x { self.pi[x] + c } else { self.pi[x] - c };
                self.queue.push(y);
            }
        }
    }
}

/// Solves `min Σ c_ij x_ij` subject to row sums `a` and column sums `b`.
///
/// All supplies and demands must be strictly positive; the caller removes
/// zero-weight points beforehand.
pub(crate) fn solve(a: &[f64], b: &[f64], cost: &[f64]) -> Result<FlowSolution> {
    let (m, n) = (a.len(), b.len());
    debug_assert_eq!(cost.len(), m * n);
    let max_c = cost.iter().fold(0.0f64, |acc, c| acc.max(c.abs()));
    let big_m = (max_c * (m + n + 1) as f64 + 1.0) * 2.0;
    let net = Network { m, n, cost, big_m };
    let real = net.real_arcs();
    let nodes = m + n + 1;

    let mut flow = vec![0.0; real + m + n];
    let mut basic: Vec<usize> = Vec::with_capacity(m + n);
    // position of each arc in `basic`, or NONE
    let mut slot = vec![NONE; real + m + n];
    for i in 0..m {
        flow[real + i] = a[i];
        slot[real + i] = basic.len();
        basic.push(real + i);
    }
    for j in 0..n {
        flow[real + m + j] = b[j];
        slot[real + m + j] = basic.len();
        basic.push(real + m + j);
    }

    let mut tree = Tree::new(nodes);
    tree.rebuild(&net, &basic);

    let eps = 1e-12 * max_c.max(1.0);
    let flow_tol = 1e-15 * a.iter().chain(b).fold(0.0f64, |acc, &w| acc.max(w));
    let block = ((real as f64).sqrt().ceil() as usize).max(8).min(real.max(1));
    let mut cursor = 0usize;
    let max_pivots = 50 * real + 10_000;
    let mut cycle: Vec<(usize, bool)> = Vec::new();

    for _pivot in 0..max_pivots {
        // block pricing over real arcs
        let mut entering = NONE;
        let mut best = -eps;
        let mut scanned = 0;
        while scanned < real {
            let end = (scanned + block).min(real);
            for _ in scanned..end {
                let arc = cursor;
                cursor += 1;
                if cursor == real {
                    cursor = 0;
                }
                if slot[arc] != NONE {
                    continue;
                }
                let (t, h) = net.ends(arc);
                let rc = cost[arc] + tree.pi[t] - tree.pi[h];
                if rc < best {
                    best = rc;
                    entering = arc;
                }
            }
            scanned = end;
            if entering != NONE {
                break;
            }
        }
        if entering == NONE {
            return finish(&net, a, b, &flow, &tree, flow_tol);
        }

        // Pivot cycle oriented along the entering arc k → l. Walking from the
        // apex: down to k, across (k, l), up from l back to the apex.
        let (k, l) = net.ends(entering);
        let mut down: Vec<(usize, bool)> = Vec::new(); // collected upward from k, reversed later
        let mut up: Vec<(usize, bool)> = Vec::new();
        let (mut x, mut y) = (k, l);
        while x != y {
            if tree.depth[x] >= tree.depth[y] {
                // traversal goes parent → x
                let arc = tree.pred[x];
                let forward = net.ends(arc).1 == x;
                down.push((arc, forward));
                x = tree.parent[x];
            } else {
                // traversal goes y → parent
                let arc = tree.pred[y];
                let forward = net.ends(arc).0 == y;
                up.push((arc, forward));
                y = tree.parent[y];
            }
        }
        cycle.clear();
        cycle.extend(down.iter().rev().copied());
        cycle.push((entering, true));
        cycle.extend(up.iter().copied());

        let theta = cycle
            .iter()
            .filter(|(_, fwd)| !fwd)
            .map(|&(arc, _)| flow[arc])
            .fold(f64::INFINITY, f64::min);
        let theta = if theta.is_finite() { theta.max(0.0) } else { 0.0 };
        let mut leaving = NONE;
        for &(arc, fwd) in &cycle {
            if !fwd && flow[arc] <= theta + flow_tol {
                leaving = arc;
            }
        }
        if leaving == NONE {
            return Err(Error::Domain("transport problem is unbounded".into()));
        }
        for &(arc, fwd) in &cycle {
            if fwd {
                flow[arc] += theta;
            } else {
                flow[arc] = (flow[arc] - theta).max(0.0);
            }
        }
        flow[leaving] = 0.0;

        let s = slot[leaving];
        basic[s] = entering;
        slot[entering] = s;
        slot[leaving] = NONE;
        tree.rebuild(&net, &basic);
    }
    Err(Error::NonConvergence {
        iterations: max_pivots,
        residual: f64::NAN,
    })
}

fn finish(
    net: &Network,
    a: &[f64],
    b: &[f64],
    flow: &[f64],
    tree: &Tree,
    flow_tol: f64,
) -> Result<FlowSolution> {
    let (m, n) = (net.m, net.n);
    let real = net.real_arcs();
    let leftover = flow[real..].iter().fold(0.0f64, |acc, &f| acc.max(f));
    let total = a.iter().sum::<f64>().max(b.iter().sum::<f64>());
    if leftover > 1e-9 * total.max(1.0) + flow_tol {
        return Err(Error::Domain(format!(
            "artificial arcs keep {leftover:e} units of flow; marginals are unbalanced"
        )));
    }
    let u = (0..m).map(|i| -tree.pi[i]).collect();
    let v = (0..n).map(|j| tree.pi[m + j]).collect();
    Ok(FlowSolution {
        flow: flow[..real].to_vec(),
        u,
        v,
    })
}
