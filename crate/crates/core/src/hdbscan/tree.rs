//! Single-linkage hierarchy, condensed tree and excess-of-mass extraction.

use serde::{Deserialize, Serialize};

use super::MstEdge;

/// Upper bound for `λ = 1 / d`, applied also at `d = 0`.
pub const LAMBDA_CAP: f64 = 1e12;

pub fn lambda_of(distance: f64) -> f64 {
    if distance > 0.0 {
        (1.0 / distance).min(LAMBDA_CAP)
    } else {
        LAMBDA_CAP
    }
}

/// One merge of the dendrogram. Nodes below `n` are points; merge `m`
/// creates node `n + m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub distance: f64,
    pub size: usize,
}

/// Merges MST edges in ascending `(weight, a, b)` order.
pub fn single_linkage(n: usize, mst: &[MstEdge]) -> Vec<Merge> {
    let mut edges: Vec<&MstEdge> = mst.iter().collect();
    edges.sort_by(|x, y| x.weight.total_cmp(&y.weight).then(x.a.cmp(&y.a)).then(x.b.cmp(&y.b)));
    let mut parent: Vec<usize> = (0..2 * n).collect();
    let mut size = vec![1usize; 2 * n];
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for e in edges {
        let (ra, rb) = (find(&mut parent, e.a), find(&mut parent, e.b));
        debug_assert_ne!(ra, rb, "MST edges form a tree");
        let node = n + merges.len();
        let s = size[ra] + size[rb];
        parent[ra] = node;
        parent[rb] = node;
        size[node] = s;
        merges.push(Merge { left: ra.min(rb), right: ra.max(rb), distance: e.weight, size: s });
    }
    merges
}

/// Edge of the condensed tree. `child < n_points` is a point falling out of
/// `parent` at `lambda`; otherwise a child cluster born at `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CondensedEdge {
    pub parent: usize,
    pub child: usize,
    pub lambda: f64,
    pub size: usize,
}

/// Cluster node view of a condensed tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterNode {
    pub id: usize,
    pub parent: Option<usize>,
    pub lambda_birth: f64,
    /// Largest λ at which the cluster still loses points or splits.
    pub lambda_death: f64,
    pub size: usize,
    pub stability: f64,
}

/// Condensed cluster hierarchy. Cluster ids start at `n_points`, the root
/// being `n_points`; children always carry larger ids than their parent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondensedTree {
    pub n_points: usize,
    pub min_cluster_size: usize,
    pub edges: Vec<CondensedEdge>,
}

impl CondensedTree {
    pub fn root(&self) -> usize {
        self.n_points
    }

    pub fn n_clusters(&self) -> usize {
        self.edges.iter().filter(|e| e.child >= self.n_points).count() + usize::from(self.n_points > 0)
    }

    fn cluster_index(&self, id: usize) -> usize {
        id - self.n_points
    }

    /// `Σ_{x ∈ C} (λ_max(x) − λ_birth(C))`, with child clusters counted by size.
    pub fn stabilities(&self) -> Vec<f64> {
        let births = self.births();
        let mut stab = vec![0.0; self.n_clusters()];
        for e in &self.edges {
            let p = self.cluster_index(e.parent);
            stab[p] += (e.lambda - births[p]) * e.size as f64;
        }
        stab
    }

    fn births(&self) -> Vec<f64> {
        let mut births = vec![0.0; self.n_clusters()];
        for e in self.edges.iter().filter(|e| e.child >= self.n_points) {
            births[self.cluster_index(e.child)] = e.lambda;
        }
        births
    }

    pub fn nodes(&self) -> Vec<ClusterNode> {
        let k = self.n_clusters();
        let births = self.births();
        let stab = self.stabilities();
        let mut nodes: Vec<ClusterNode> = (0..k)
            .map(|c| ClusterNode {
                id: self.n_points + c,
                parent: None,
                lambda_birth: births[c],
                lambda_death: births[c],
                size: if c == 0 { self.n_points } else { 0 },
                stability: stab[c],
            })
            .collect();
        for e in &self.edges {
            let p = self.cluster_index(e.parent);
            nodes[p].lambda_death = nodes[p].lambda_death.max(e.lambda);
            if e.child >= self.n_points {
                let c = self.cluster_index(e.child);
                nodes[c].parent = Some(e.parent);
                nodes[c].size = e.size;
            }
        }
        nodes
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "n_points": self.n_points,
            "min_cluster_size": self.min_cluster_size,
            "clusters": self.nodes(),
            "edges": self.edges,
        })
    }
}

/// Condenses the dendrogram: splits leaving a side smaller than
/// `min_cluster_size` shed those points from the parent cluster instead of
/// creating a child.
pub fn condense(n: usize, merges: &[Merge], min_cluster_size: usize) -> CondensedTree {
    let mut tree = CondensedTree { n_points: n, min_cluster_size, edges: Vec::new() };
    if n < 2 {
        for p in 0..n {
            tree.edges.push(CondensedEdge { parent: n, child: p, lambda: LAMBDA_CAP, size: 1 });
        }
        return tree;
    }
    let size_of = |node: usize| if node < n { 1 } else { merges[node - n].size };
    let leaves = |node: usize, out: &mut Vec<usize>| {
        let mut stack = vec![node];
        while let Some(x) = stack.pop() {
            if x < n {
                out.push(x);
            } else {
                let m = &merges[x - n];
                stack.push(m.right);
                stack.push(m.left);
            }
        }
    };
    let root = 2 * n - 2;
    let mut next_label = n + 1;
    // (dendrogram node, condensed cluster label)
    let mut stack = vec![(root, n)];
    let mut buf = Vec::new();
    while let Some((node, label)) = stack.pop() {
        if node < n {
            continue;
        }
        let m = merges[node - n];
        let lambda = lambda_of(m.distance);
        let (ls, rs) = (size_of(m.left), size_of(m.right));
        let mut shed = |side: usize, tree: &mut CondensedTree| {
            buf.clear();
            leaves(side, &mut buf);
            buf.sort_unstable();
            for &p in &buf {
                tree.edges.push(CondensedEdge { parent: label, child: p, lambda, size: 1 });
            }
        };
        match (ls >= min_cluster_size, rs >= min_cluster_size) {
            (true, true) => {
                let (l, r) = (next_label, next_label + 1);
                next_label += 2;
                tree.edges.push(CondensedEdge { parent: label, child: l, lambda, size: ls });
                tree.edges.push(CondensedEdge { parent: label, child: r, lambda, size: rs });
                // Right pushed first so the left subtree is expanded next.
                stack.push((m.right, r));
                stack.push((m.left, l));
            }
            (false, false) => {
                shed(m.left, &mut tree);
                shed(m.right, &mut tree);
            }
            (true, false) => {
                shed(m.right, &mut tree);
                stack.push((m.left, label));
            }
            (false, true) => {
                shed(m.left, &mut tree);
                stack.push((m.right, label));
            }
        }
    }
    tree
}

/// Flat clustering read off a condensed tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterLabels {
    /// `-1` for outliers, otherwise `0..n_clusters`.
    pub labels: Vec<i32>,
    /// λ at which each labelled point leaves its cluster; 0 for outliers.
    pub membership_lambda: Vec<f64>,
    pub n_clusters: usize,
}

impl ClusterLabels {
    pub fn n_outliers(&self) -> usize {
        self.labels.iter().filter(|&&l| l < 0).count()
    }

    pub fn outlier_fraction(&self) -> f64 {
        if self.labels.is_empty() {
            0.0
        } else {
            self.n_outliers() as f64 / self.labels.len() as f64
        }
    }

    /// Document counts per cluster id.
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.n_clusters];
        for &l in &self.labels {
            if l >= 0 {
                s[l as usize] += 1;
            }
        }
        s
    }

    pub fn all_noise(n: usize) -> Self {
        ClusterLabels { labels: vec![-1; n], membership_lambda: vec![0.0; n], n_clusters: 0 }
    }
}

/// Excess-of-mass selection, bottom-up: a cluster is kept when its own
/// stability is at least the summed stability of the best selection among
/// its descendants. Ties keep the parent. The root competes only when
/// `allow_single_cluster` is set.
pub fn select_clusters(tree: &CondensedTree, allow_single_cluster: bool) -> Vec<usize> {
    let k = tree.n_clusters();
    if k == 0 {
        return Vec::new();
    }
    let n = tree.n_points;
    let own = tree.stabilities();
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); k];
    for e in tree.edges.iter().filter(|e| e.child >= n) {
        children[e.parent - n].push(e.child - n);
    }
    let mut best = own.clone();
    let mut selected = vec![false; k];
    let first = usize::from(!allow_single_cluster);
    // Children have larger ids, so descending order is bottom-up.
    for c in (first..k).rev() {
        let sub: f64 = children[c].iter().map(|&ch| best[ch]).sum();
        if children[c].is_empty() || own[c] >= sub {
            selected[c] = true;
            best[c] = own[c];
        } else {
            best[c] = sub;
        }
    }
    // Keep only the topmost selected cluster on each path.
    let mut out = Vec::new();
    let mut stack = vec![0usize];
    while let Some(c) = stack.pop() {
        if selected[c] && (c > 0 || allow_single_cluster) {
            out.push(c + n);
        } else {
            stack.extend(children[c].iter().copied());
        }
    }
    out.sort_unstable();
    out
}

/// Labels points by their nearest selected ancestor cluster.
pub fn label_points(tree: &CondensedTree, selected: &[usize]) -> ClusterLabels {
    let n = tree.n_points;
    let k = tree.n_clusters();
    let mut parent_of = vec![usize::MAX; k];
    for e in tree.edges.iter().filter(|e| e.child >= n) {
        parent_of[e.child - n] = e.parent;
    }
    let mut label_of: Vec<i32> = vec![-1; k];
    for (i, &c) in selected.iter().enumerate() {
        label_of[c - n] = i as i32;
    }
    // Resolve each cluster's selected ancestor once; parents precede children.
    let mut resolved: Vec<i32> = vec![-1; k];
    for c in 0..k {
        resolved[c] = if label_of[c] >= 0 {
            label_of[c]
        } else if parent_of[c] != usize::MAX {
            resolved[parent_of[c] - n]
        } else {
            -1
        };
    }
    let mut out = ClusterLabels::all_noise(n);
    out.n_clusters = selected.len();
    for e in tree.edges.iter().filter(|e| e.child < n) {
        let l = resolved[e.parent - n];
        if l >= 0 {
            out.labels[e.child] = l;
            out.membership_lambda[e.child] = e.lambda;
        }
    }
    out
}
