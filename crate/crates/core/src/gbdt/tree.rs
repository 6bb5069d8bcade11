//! Regression trees grown by exact greedy search on second-order statistics.

use serde::{Deserialize, Serialize};

/// One node of a regression tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    /// Rows with `x[feature] < threshold` go left; missing values follow
    /// `default_left`.
    Split {
        feature: usize,
        threshold: f64,
        default_left: bool,
        left: usize,
        right: usize,
    },
    Leaf { weight: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn leaf(weight: f64) -> Self {
        Tree {
            nodes: vec![TreeNode::Leaf { weight }],
        }
    }

    /// Raw leaf weight reached by `x`; `is_missing` decides default routing.
    pub fn predict(&self, x: &[f64], is_missing: impl Fn(f64) -> bool) -> f64 {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                TreeNode::Leaf { weight } => return *weight,
                TreeNode::Split {
                    feature,
                    threshold,
                    default_left,
                    left,
                    right,
                } => {
                    let v = x[*feature];
                    let go_left = if is_missing(v) { *default_left } else { v < *threshold };
                    id = if go_left { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], id: usize) -> usize {
            match &nodes[id] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }
}

/// Regularisation and growth limits for one tree.
#[derive(Debug, Clone, Copy)]
pub(crate) struct GrowParams {
    pub max_depth: usize,
    pub min_child_weight: f64,
    pub lambda: f64,
    pub gamma: f64,
}

impl GrowParams {
    pub fn leaf_weight(&self, g: f64, h: f64) -> f64 {
        -g / (h + self.lambda)
    }

    fn score(&self, g: f64, h: f64) -> f64 {
        g * g / (h + self.lambda)
    }

    pub fn split_gain(&self, gl: f64, hl: f64, gr: f64, hr: f64) -> f64 {
        0.5 * (self.score(gl, hl) + self.score(gr, hr) - self.score(gl + gr, hl + hr)) - self.gamma
    }
}

/// Column-major view of the training matrix with per-feature presorted
/// row orders. Missing values are stored as NaN. Built once per model and reused for every tree.
pub(crate) struct ColumnIndex {
    pub n_rows: usize,
    pub columns: Vec<Vec<f64>>,
    /// Non-missing row ids sorted by value (ties by row id).
    pub sorted: Vec<Vec<u32>>,
    pub missing: Vec<Vec<u32>>,
}

impl ColumnIndex {
    pub fn new(rows: &[f64], n_features: usize, is_missing: impl Fn(f64) -> bool) -> Self {
        let n_rows = rows.len() / n_features;
        let mut columns = vec![Vec::with_capacity(n_rows); n_features];
        for r in 0..n_rows {
            for (f, col) in columns.iter_mut().enumerate() {
                let v = rows[r * n_features + f];
                // any missing encoding is stored as NaN
                col.push(if is_missing(v) { f64::NAN } else { v });
            }
        }
        let mut sorted = Vec::with_capacity(n_features);
        let mut missing = Vec::with_capacity(n_features);
        for col in &columns {
            let (mut present, absent): (Vec<u32>, Vec<u32>) =
                (0..n_rows as u32).partition(|&r| !col[r as usize].is_nan());
            present.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
            sorted.push(present);
            missing.push(absent);
        }
        ColumnIndex {
            n_rows,
            columns,
            sorted,
            missing,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
    default_left: bool,
}

struct OpenNode {
    id: usize,
    g: f64,
    h: f64,
}

const NOT_ACTIVE: u32 = u32::MAX;

/// Per-node scan state for one feature.
#[derive(Clone, Copy, Default)]
struct Scan {
    g: f64,
    h: f64,
    miss_g: f64,
    miss_h: f64,
    has_missing: bool,
    last: Option<f64>,
}

/// Grows one tree level by level. `rows_in` selects the rows (with
/// multiplicity one) that participate; others are ignored.
pub(crate) fn grow(
    index: &ColumnIndex,
    grad: &[f64],
    hess: &[f64],
    rows_in: &[bool],
    params: GrowParams,
) -> Tree {
    let n = index.n_rows;
    let mut nodes = vec![TreeNode::Leaf { weight: 0.0 }];
    // slot of the open node each row belongs to, or NOT_ACTIVE
    let mut slot_of = vec![NOT_ACTIVE; n];
    let (mut g0, mut h0) = (0.0, 0.0);
    for r in 0..n {
        if rows_in[r] {
            slot_of[r] = 0;
            g0 += grad[r];
            h0 += hess[r];
        }
    }
    let mut open = vec![OpenNode { id: 0, g: g0, h: h0 }];

    for depth in 0..=params.max_depth {
        if open.is_empty() {
            break;
        }
        let best: Vec<Option<Candidate>> = if depth < params.max_depth {
            find_splits(index, grad, hess, &slot_of, &open, params)
        } else {
            vec![None; open.len()]
        };

        let mut next_open = Vec::new();
        // (left slot, right slot) per current slot
        let mut child_slots: Vec<Option<(u32, u32, Candidate)>> = vec![None; open.len()];
        for (slot, node) in open.iter().enumerate() {
            match best[slot] {
                Some(c) if c.gain > 0.0 => {
                    let left = nodes.len();
                    let right = left + 1;
                    nodes.push(TreeNode::Leaf { weight: 0.0 });
                    nodes.push(TreeNode::Leaf { weight: 0.0 });
                    nodes[node.id] = TreeNode::Split {
                        feature: c.feature,
                        threshold: c.threshold,
                        default_left: c.default_left,
                        left,
                        right,
                    };
                    let ls = next_open.len() as u32;
                    next_open.push(OpenNode { id: left, g: 0.0, h: 0.0 });
                    next_open.push(OpenNode { id: right, g: 0.0, h: 0.0 });
                    child_slots[slot] = Some((ls, ls + 1, c));
                }
                _ => {
                    nodes[node.id] = TreeNode::Leaf {
                        weight: params.leaf_weight(node.g, node.h),
                    };
                }
            }
        }
        for r in 0..n {
            let s = slot_of[r];
            if s == NOT_ACTIVE {
                continue;
            }
            match child_slots[s as usize] {
                None => slot_of[r] = NOT_ACTIVE,
                Some((ls, rs, c)) => {
                    let v = index.columns[c.feature][r];
                    let go_left = if v.is_nan() {
                        c.default_left
                    } else {
                        v < c.threshold
                    };
                    let target = if go_left { ls } else { rs };
                    slot_of[r] = target;
                    let child = &mut next_open[target as usize];
                    child.g += grad[r];
                    child.h += hess[r];
                }
            }
        }
        open = next_open;
    }
    Tree { nodes }
}

fn find_splits(
    index: &ColumnIndex,
    grad: &[f64],
    hess: &[f64],
    slot_of: &[u32],
    open: &[OpenNode],
    params: GrowParams,
) -> Vec<Option<Candidate>> {
    let mut best: Vec<Option<Candidate>> = vec![None; open.len()];
    let mut scan = vec![Scan::default(); open.len()];
    for feature in 0..index.columns.len() {
        scan.iter_mut().for_each(|s| *s = Scan::default());
        for &r in &index.missing[feature] {
            let s = slot_of[r as usize];
            if s != NOT_ACTIVE {
                let st = &mut scan[s as usize];
                st.miss_g += grad[r as usize];
                st.miss_h += hess[r as usize];
                st.has_missing = true;
            }
        }
        let col = &index.columns[feature];
        for &r in &index.sorted[feature] {
            let r = r as usize;
            let s = slot_of[r];
            if s == NOT_ACTIVE {
                continue;
            }
            let s = s as usize;
            let v = col[r];
            let st = &mut scan[s];
            if let Some(prev) = st.last {
                if v > prev {
                    let node = &open[s];
                    if let Some(c) = evaluate(params, node, st, feature, prev, v) {
                        if best[s].is_none_or(|b| c.gain > b.gain) {
                            best[s] = Some(c);
                        }
                    }
                }
            }
            st.g += grad[r];
            st.h += hess[r];
            st.last = Some(v);
        }
    }
    best
}

fn evaluate(
    params: GrowParams,
    node: &OpenNode,
    st: &Scan,
    feature: usize,
    prev: f64,
    next: f64,
) -> Option<Candidate> {
    let mut threshold = prev + (next - prev) / 2.0;
    if !(prev < threshold && threshold <= next) {
        threshold = next;
    }
    let present_g = node.g - st.miss_g;
    let present_h = node.h - st.miss_h;
    let (gl, hl) = (st.g, st.h);
    let (gr, hr) = (present_g - gl, present_h - hl);
    let ok = |hl: f64, hr: f64| hl >= params.min_child_weight && hr >= params.min_child_weight;

    let right_gain = ok(hl, hr + st.miss_h)
        .then(|| params.split_gain(gl, hl, gr + st.miss_g, hr + st.miss_h));
    let left_gain = ok(hl + st.miss_h, hr)
        .then(|| params.split_gain(gl + st.miss_g, hl + st.miss_h, gr, hr));
    let default_left = match (left_gain, right_gain) {
        (None, None) => return None,
        (Some(_), None) => true,
        (None, Some(_)) => false,
        (Some(l), Some(r)) if st.has_missing => l > r,
        // nothing missing here at training time: send unseen missing values
        // to the heavier child
        (Some(_), Some(_)) => hl >= hr,
    };
    let gain = if default_left { left_gain } else { right_gain }?;
    Some(Candidate {
        gain,
        feature,
        threshold,
        default_left,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(lambda: f64) -> GrowParams {
        GrowParams {
            max_depth: 1,
            min_child_weight: 0.0,
            lambda,
            gamma: 0.0,
        }
    }

    #[test]
    fn stump_matches_closed_form() {
        // one feature, two groups with opposite gradients
        let rows = [1.0, 2.0, 3.0, 4.0];
        let grad = [1.0, 1.0, -2.0, -2.0];
        let hess = [1.0; 4];
        let index = ColumnIndex::new(&rows, 1, f64::is_nan);
        let tree = grow(&index, &grad, &hess, &[true; 4], params(1.0));
        let TreeNode::Split { threshold, .. } = tree.nodes[0] else { panic!("no split") };
        assert_eq!(threshold, 2.5);
        assert_eq!(tree.predict(&[1.0], f64::is_nan), -2.0 / 3.0);
        assert_eq!(tree.predict(&[4.0], f64::is_nan), 4.0 / 3.0);
    }

    #[test]
    fn larger_lambda_shrinks_leaf_weights() {
        let rows = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let grad = [0.8, 0.5, 0.9, -0.4, -1.2, -0.7];
        let hess = [0.3, 0.2, 0.25, 0.2, 0.24, 0.21];
        let index = ColumnIndex::new(&rows, 1, f64::is_nan);
        let mut prev: Option<Vec<f64>> = None;
        for lambda in [0.0, 0.1, 0.5, 1.0, 5.0, 50.0] {
            let tree = grow(&index, &grad, &hess, &[true; 6], params(lambda));
            let weights: Vec<f64> = [1.0, 6.0].iter().map(|&x| tree.predict(&[x], f64::is_nan).abs()).collect();
            if let Some(p) = &prev {
                for (a, b) in weights.iter().zip(p) {
                    assert!(a <= b, "lambda {lambda}: {a} > {b}");
                }
            }
            prev = Some(weights);
        }
    }

    #[test]
    fn missing_rows_pick_better_side() {
        // missing rows share the negative gradient of the right group
        let nan = f64::NAN;
        let rows = [1.0, 2.0, 3.0, 4.0, nan, nan];
        let grad = [1.0, 1.0, -1.0, -1.0, -1.0, -1.0];
        let hess = [1.0; 6];
        let index = ColumnIndex::new(&rows, 1, f64::is_nan);
        let tree = grow(&index, &grad, &hess, &[true; 6], params(0.0));
        let TreeNode::Split { default_left, .. } = tree.nodes[0] else { panic!() };
        assert!(!default_left);
        assert_eq!(tree.predict(&[nan], f64::is_nan), tree.predict(&[4.0], f64::is_nan));
    }

    #[test]
    fn depth_limit_is_respected() {
        let rows: Vec<f64> = (0..64).map(f64::from).collect();
        let grad: Vec<f64> = (0..64).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let hess = vec![1.0; 64];
        let index = ColumnIndex::new(&rows, 1, f64::is_nan);
        for max_depth in [1, 2, 3, 4] {
            let p = GrowParams { max_depth, ..params(0.0) };
            let tree = grow(&index, &grad, &hess, &[true; 64], p);
            assert!(tree.depth() <= max_depth);
        }
    }

    #[test]
    fn pure_node_stays_a_leaf() {
        let rows = [1.0, 2.0, 3.0];
        let index = ColumnIndex::new(&rows, 1, f64::is_nan);
        let tree = grow(&index, &[0.0; 3], &[1.0; 3], &[true; 3], params(1.0));
        assert_eq!(tree.nodes, vec![TreeNode::Leaf { weight: 0.0 }]);
    }
}
