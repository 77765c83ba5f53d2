use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

/// Index of a node in the tree arena. Stable for the lifetime of the tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct NodeId(pub usize);

/// An edge addressed by its parent node and its position among the parent's
/// children.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct EdgeRef {
    pub node: NodeId,
    pub edge: usize,
}

#[derive(Debug, Clone)]
pub struct Edge {
    pub action: String,
    /// Renormalized proposal probability `p(a)`.
    pub prior: f64,
    pub visit_count: u32,
    /// Running mean of backed-up values; equals the child's `v_φ` until the
    /// first visit.
    pub mean_value: f64,
    pub child: NodeId,
}

#[derive(Debug, Clone)]
pub struct Node<S> {
    pub state: S,
    pub text: String,
    /// Absolute depth, counted from the start of the episode.
    pub depth: usize,
    pub is_terminal: bool,
    /// Cached `v_φ(s)`, or the environment reward for terminal nodes.
    pub value_eval: Option<f64>,
    pub parent: Option<EdgeRef>,
    pub children: Vec<Edge>,
    pub expanded: bool,
}

/// Per-child statistics consumed by the selection rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmStats {
    pub prior: f64,
    pub visits: u32,
    pub mean_value: f64,
    pub value_eval: f64,
}

/// Evaluator usage and generated-text volume.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostCounter {
    pub propose_calls: u64,
    pub value_calls: u64,
    /// Total characters of every proposed action text.
    pub action_chars: u64,
}

impl CostCounter {
    pub fn add(&mut self, other: &CostCounter) {
        self.propose_calls += other.propose_calls;
        self.value_calls += other.value_calls;
        self.action_chars += other.action_chars;
    }
}

#[derive(Debug, Clone)]
pub struct SearchTree<S> {
    pub(crate) nodes: Vec<Node<S>>,
    pub(crate) cost: CostCounter,
    pub(crate) nodes_expanded: usize,
    pub(crate) backup_log: Option<Vec<(EdgeRef, f64)>>,
}

impl<S> SearchTree<S> {
    pub(crate) fn with_root(root: Node<S>) -> Self {
        Self {
            nodes: vec![root],
            cost: CostCounter::default(),
            nodes_expanded: 0,
            backup_log: None,
        }
    }

    pub fn root(&self) -> NodeId {
        NodeId(0)
    }

    pub fn node(&self, id: NodeId) -> &Node<S> {
        &self.nodes[id.0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, &Node<S>)> {
        self.nodes.iter().enumerate().map(|(i, n)| (NodeId(i), n))
    }

    pub fn edge(&self, e: EdgeRef) -> &Edge {
        &self.nodes[e.node.0].children[e.edge]
    }

    pub fn cost(&self) -> CostCounter {
        self.cost
    }

    pub fn nodes_expanded(&self) -> usize {
        self.nodes_expanded
    }

    /// Start recording every `(edge, v_leaf)` backup.
    pub fn enable_backup_log(&mut self) {
        self.backup_log.get_or_insert_with(Vec::new);
    }

    pub fn backup_log(&self) -> Option<&[(EdgeRef, f64)]> {
        self.backup_log.as_deref()
    }

    pub fn arm_stats(&self, id: NodeId) -> Vec<ArmStats> {
        self.nodes[id.0]
            .children
            .iter()
            .map(|e| ArmStats {
                prior: e.prior,
                visits: e.visit_count,
                mean_value: e.mean_value,
                value_eval: self.nodes[e.child.0].value_eval.unwrap_or(e.mean_value),
            })
            .collect()
    }

    /// Running-mean update of every edge on `path` with the same `v_leaf`:
    /// `mean ← (mean · N + v) / (N + 1)`, `N ← N + 1`. No discounting.
    pub fn backpropagate(&mut self, path: &[EdgeRef], v_leaf: f64) {
        for e in path {
            let edge = &mut self.nodes[e.node.0].children[e.edge];
            let n = edge.visit_count as f64;
            edge.mean_value = (edge.mean_value * n + v_leaf) / (n + 1.0);
            edge.visit_count += 1;
            if let Some(log) = self.backup_log.as_mut() {
                log.push((*e, v_leaf));
            }
        }
    }

    /// Copies the subtree under `id` into a fresh tree rooted there.
    pub fn subtree(&self, id: NodeId) -> SearchTree<S>
    where
        S: Clone,
    {
        let mut map = vec![usize::MAX; self.nodes.len()];
        let mut order = vec![id.0];
        let mut i = 0;
        while i < order.len() {
            let cur = order[i];
            map[cur] = i;
            order.extend(self.nodes[cur].children.iter().map(|e| e.child.0));
            i += 1;
        }
        let nodes = order
            .iter()
            .map(|&old| {
                let n = &self.nodes[old];
                Node {
                    state: n.state.clone(),
                    text: n.text.clone(),
                    depth: n.depth,
                    is_terminal: n.is_terminal,
                    value_eval: n.value_eval,
                    parent: if old == id.0 {
                        None
                    } else {
                        n.parent.map(|p| EdgeRef {
                            node: NodeId(map[p.node.0]),
                            edge: p.edge,
                        })
                    },
                    children: n
                        .children
                        .iter()
                        .map(|e| Edge {
                            child: NodeId(map[e.child.0]),
                            ..e.clone()
                        })
                        .collect(),
                    expanded: n.expanded,
                }
            })
            .collect();
        SearchTree {
            nodes,
            cost: CostCounter::default(),
            nodes_expanded: 0,
            backup_log: None,
        }
    }

    /// Line-oriented dump, one node per line:
    /// `node_id parent_id action_text depth N mean_value prior value_eval terminal`
    /// (tab separated). The root has no parent edge; its `N` is the sum of its
    /// children's visits and its mean/prior are `-`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (id, node) in self.nodes() {
            let value = node.value_eval.map(|v| v.to_string()).unwrap_or_else(|| "-".into());
            match node.parent {
                Some(p) => {
                    let e = self.edge(p);
                    let _ = writeln!(
                        out,
                        "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                        id.0,
                        p.node.0,
                        escape(&e.action),
                        node.depth,
                        e.visit_count,
                        e.mean_value,
                        e.prior,
                        value,
                        node.is_terminal
                    );
                }
                None => {
                    let n: u32 = node.children.iter().map(|e| e.visit_count).sum();
                    let _ = writeln!(
                        out,
                        "{}\t-\t\t{}\t{}\t-\t-\t{}\t{}",
                        id.0, node.depth, n, value, node.is_terminal
                    );
                }
            }
        }
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('\t', "\\t").replace('\n', "\\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn two_node_tree(prior_value: f64) -> SearchTree<()> {
        let mut tree = SearchTree::with_root(Node {
            state: (),
            text: "root".into(),
            depth: 0,
            is_terminal: false,
            value_eval: None,
            parent: None,
            children: vec![Edge {
                action: "a".into(),
                prior: 1.0,
                visit_count: 0,
                mean_value: prior_value,
                child: NodeId(1),
            }],
            expanded: true,
        });
        tree.nodes.push(Node {
            state: (),
            text: "root/a".into(),
            depth: 1,
            is_terminal: false,
            value_eval: Some(prior_value),
            parent: Some(EdgeRef {
                node: NodeId(0),
                edge: 0,
            }),
            children: vec![],
            expanded: false,
        });
        tree
    }

    const E: EdgeRef = EdgeRef {
        node: NodeId(0),
        edge: 0,
    };

    #[test]
    fn first_visit_overwrites_initial_value() {
        let mut t = two_node_tree(0.3);
        t.backpropagate(&[E], 0.9);
        assert_abs_diff_eq!(t.edge(E).mean_value, 0.9, epsilon = 1e-15);
        assert_eq!(t.edge(E).visit_count, 1);
    }

    #[test]
    fn running_mean_hand_example() {
        let mut t = two_node_tree(0.0);
        t.backpropagate(&[E], 0.0);
        t.backpropagate(&[E], 1.0);
        assert_abs_diff_eq!(t.edge(E).mean_value, 0.5, epsilon = 1e-15);
        assert_eq!(t.edge(E).visit_count, 2);
    }

    #[test]
    fn running_mean_equals_arithmetic_mean() {
        let mut t = two_node_tree(0.7);
        for v in [1.0, 0.0, 0.5] {
            t.backpropagate(&[E], v);
        }
        assert_abs_diff_eq!(t.edge(E).mean_value, 0.5, epsilon = 1e-12);
        assert_eq!(t.edge(E).visit_count, 3);
    }

    #[test]
    fn dump_format() {
        let mut t = two_node_tree(0.25);
        t.backpropagate(&[E], 0.5);
        let dump = t.dump();
        let lines: Vec<&str> = dump.lines().collect();
        assert_eq!(lines[0], "0\t-\t\t0\t1\t-\t-\t-\tfalse");
        assert_eq!(lines[1], "1\t0\ta\t1\t1\t0.5\t1\t0.25\tfalse");
    }

    #[test]
    fn subtree_reindexes() {
        let t = two_node_tree(0.25);
        let s = t.subtree(NodeId(1));
        assert_eq!(s.len(), 1);
        assert!(s.node(s.root()).parent.is_none());
        assert_eq!(s.node(s.root()).text, "root/a");
    }
}
