//! Versioned JSON model files with a flat node table.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tree::{Tree, TreeNode};
use super::{GbdtConfig, GbdtModel, Variant};
use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;
const FORMAT_NAME: &str = "triage-gbdt";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Side {
    Left,
    Right,
}

#[derive(Debug, Serialize, Deserialize)]
struct NodeRow {
    tree: usize,
    node: usize,
    parent: Option<usize>,
    side: Option<Side>,
    feature: Option<usize>,
    threshold: Option<f64>,
    default_direction: Option<Side>,
    leaf_weight: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    variant: Variant,
    n_features: usize,
    trees_per_round: usize,
    rounds: usize,
    best_iteration: usize,
    config: GbdtConfig,
    base_score: Vec<f64>,
    nodes: Vec<NodeRow>,
}

fn flatten(trees: &[Tree]) -> Vec<NodeRow> {
    let mut rows = Vec::new();
    for (t, tree) in trees.iter().enumerate() {
        let mut parent = vec![(None, None); tree.nodes.len()];
        for (id, node) in tree.nodes.iter().enumerate() {
            if let TreeNode::Split { left, right, .. } = node {
                parent[*left] = (Some(id), Some(Side::Left));
                parent[*right] = (Some(id), Some(Side::Right));
            }
        }
        for (id, node) in tree.nodes.iter().enumerate() {
            let (p, side) = parent[id];
            let row = match node {
                TreeNode::Split {
                    feature,
                    threshold,
                    default_left,
                    ..
                } => NodeRow {
                    tree: t,
                    node: id,
                    parent: p,
                    side,
                    feature: Some(*feature),
                    threshold: Some(*threshold),
                    default_direction: Some(if *default_left { Side::Left } else { Side::Right }),
                    leaf_weight: None,
                },
                TreeNode::Leaf { weight } => NodeRow {
                    tree: t,
                    node: id,
                    parent: p,
                    side,
                    feature: None,
                    threshold: None,
                    default_direction: None,
                    leaf_weight: Some(*weight),
                },
            };
            rows.push(row);
        }
    }
    rows
}

fn rebuild(rows: &[NodeRow], n_trees: usize, n_features: usize) -> Result<Vec<Tree>> {
    let bad = |m: String| Error::ModelFormat(m);
    let mut grouped: Vec<Vec<&NodeRow>> = vec![Vec::new(); n_trees];
    for r in rows {
        grouped
            .get_mut(r.tree)
            .ok_or_else(|| bad(format!("node references tree {} of {n_trees}", r.tree)))?
            .push(r);
    }
    let mut trees = Vec::with_capacity(n_trees);
    for (t, group) in grouped.iter().enumerate() {
        let n = group.len();
        if n == 0 {
            return Err(bad(format!("tree {t} has no nodes")));
        }
        let mut children = vec![(None, None); n];
        for (i, r) in group.iter().enumerate() {
            if r.node != i {
                return Err(bad(format!("tree {t}: node ids must be dense and ordered")));
            }
            if let (Some(p), Some(side)) = (r.parent, r.side) {
                let slot = children.get_mut(p).ok_or_else(|| bad(format!("tree {t}: bad parent {p}")))?;
                match side {
                    Side::Left => slot.0 = Some(i),
                    Side::Right => slot.1 = Some(i),
                }
            }
        }
        let mut nodes = Vec::with_capacity(n);
        for (i, r) in group.iter().enumerate() {
            let node = match (r.feature, r.threshold, r.default_direction, r.leaf_weight) {
                (Some(feature), Some(threshold), Some(dir), None) => {
                    if feature >= n_features {
                        return Err(bad(format!("tree {t} node {i}: feature {feature} out of range")));
                    }
                    let (Some(left), Some(right)) = children[i] else {
                        return Err(bad(format!("tree {t} node {i}: split without two children")));
                    };
                    TreeNode::Split {
                        feature,
                        threshold,
                        default_left: dir == Side::Left,
                        left,
                        right,
                    }
                }
                (None, None, None, Some(weight)) => TreeNode::Leaf { weight },
                _ => return Err(bad(format!("tree {t} node {i}: neither split nor leaf"))),
            };
            nodes.push(node);
        }
        trees.push(Tree { nodes });
    }
    Ok(trees)
}

pub fn write_model<W: Write>(out: W, model: &GbdtModel) -> Result<()> {
    let file = ModelFile {
        format: FORMAT_NAME.into(),
        version: MODEL_FORMAT_VERSION,
        variant: model.variant,
        n_features: model.n_features,
        trees_per_round: model.trees_per_round(),
        rounds: model.rounds(),
        best_iteration: model.best_iteration,
        config: model.config.clone(),
        base_score: model.base_score.clone(),
        nodes: flatten(&model.trees),
    };
    serde_json::to_writer_pretty(out, &file)?;
    Ok(())
}

pub fn read_model<R: Read>(input: R) -> Result<GbdtModel> {
    let file: ModelFile = serde_json::from_reader(input)?;
    if file.format != FORMAT_NAME {
        return Err(Error::ModelFormat(format!("unknown format `{}`", file.format)));
    }
    if file.version != MODEL_FORMAT_VERSION {
        return Err(Error::ModelFormat(format!("unsupported version {}", file.version)));
    }
    let expected_per_round = match file.variant {
        Variant::Multiclass => crate::NUM_LEVELS,
        Variant::Ordinal => 1,
    };
    if file.trees_per_round != expected_per_round || file.base_score.len() != expected_per_round {
        return Err(Error::ModelFormat("tree or base-score count does not match the variant".into()));
    }
    if file.best_iteration > file.rounds {
        return Err(Error::ModelFormat("best_iteration exceeds trained rounds".into()));
    }
    let trees = rebuild(&file.nodes, file.rounds * file.trees_per_round, file.n_features)?;
    Ok(GbdtModel {
        variant: file.variant,
        config: file.config,
        n_features: file.n_features,
        base_score: file.base_score,
        trees,
        best_iteration: file.best_iteration,
    })
}

pub fn save_model(path: &Path, model: &GbdtModel) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_model(&mut f, model)?;
    f.flush()?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<GbdtModel> {
    read_model(std::io::BufReader::new(std::fs::File::open(path)?))
}
