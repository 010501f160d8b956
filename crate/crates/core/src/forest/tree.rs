use rand::seq::SliceRandom;
use rand::Rng;

use super::ForestParams;
use crate::dataset::EncodedMatrix;
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        proba: Vec<f64>,
    },
}

/// A tree stored as a flat node array; node 0 is the root.
#[derive(Debug, Clone)]
pub struct Tree {
    nodes: Vec<Node>,
    flat: Vec<FlatNode>,
    leaf_proba: Vec<f64>,
}

impl PartialEq for Tree {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes
    }
}

/// Prediction layout: splits carry child indices, leaves (`feature == LEAF`)
/// carry an offset into `leaf_proba` in `left`.
#[derive(Debug, Clone, Copy)]
struct FlatNode {
    threshold: f64,
    feature: u32,
    left: u32,
    right: u32,
}

const LEAF: u32 = u32::MAX;

impl Tree {
    pub fn from_nodes(nodes: Vec<Node>) -> Self {
        let mut leaf_proba = Vec::new();
        let flat = nodes
            .iter()
            .map(|node| match node {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => FlatNode {
                    threshold: *threshold,
                    feature: *feature as u32,
                    left: *left as u32,
                    right: *right as u32,
                },
                Node::Leaf { proba } => {
                    let offset = leaf_proba.len() as u32;
                    leaf_proba.extend_from_slice(proba);
                    FlatNode {
                        threshold: 0.0,
                        feature: LEAF,
                        left: offset,
                        right: proba.len() as u32,
                    }
                }
            })
            .collect();
        Tree {
            nodes,
            flat,
            leaf_proba,
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn leaf(&self, row: &[f64]) -> &[f64] {
        let mut node = self.flat[0];
        while node.feature != LEAF {
            let next = if row[node.feature as usize] <= node.threshold {
                node.left
            } else {
                node.right
            };
            node = self.flat[next as usize];
        }
        let start = node.left as usize;
        &self.leaf_proba[start..start + node.right as usize]
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }
}

/// Column-major copy of the matrix where each cell is replaced by the rank of
/// its value among the column's distinct values. Split search then reduces to
/// histogram sweeps over ranks.
pub(super) struct BinnedMatrix {
    n_rows: usize,
    values: Vec<Vec<f64>>,
    bins: Vec<Vec<u32>>,
}

impl BinnedMatrix {
    pub(super) fn new(matrix: &EncodedMatrix) -> Self {
        let n_rows = matrix.n_rows();
        let mut values = Vec::with_capacity(matrix.n_cols);
        let mut bins = Vec::with_capacity(matrix.n_cols);
        for col in 0..matrix.n_cols {
            let column: Vec<f64> = (0..n_rows).map(|r| matrix.row(r)[col]).collect();
            let mut distinct = column.clone();
            distinct.sort_by(f64::total_cmp);
            distinct.dedup();
            let ranks = column
                .iter()
                .map(|v| distinct.binary_search_by(|d| d.total_cmp(v)).unwrap() as u32)
                .collect();
            values.push(distinct);
            bins.push(ranks);
        }
        BinnedMatrix {
            n_rows,
            values,
            bins,
        }
    }

    fn n_features(&self) -> usize {
        self.values.len()
    }
}

struct Candidate {
    /// Weighted child impurity `w_l * gini_l + w_r * gini_r`.
    children: f64,
    feature: usize,
    /// Last bin that goes left.
    bin: u32,
    threshold: f64,
}

const TIE_EPS: f64 = 1e-12;

impl Candidate {
    fn beats(&self, other: &Candidate) -> bool {
        if self.children < other.children - TIE_EPS {
            return true;
        }
        if self.children > other.children + TIE_EPS {
            return false;
        }
        (self.feature, self.threshold) < (other.feature, other.threshold)
    }
}

fn gini_mass(counts: &[f64]) -> f64 {
    let total: f64 = counts.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let sq: f64 = counts.iter().map(|c| c * c).sum();
    total - sq / total
}

struct Grower<'a> {
    data: &'a BinnedMatrix,
    targets: &'a [usize],
    n_classes: usize,
    weights: Vec<f64>,
    params: &'a ForestParams,
    max_features: usize,
    hist: Vec<f64>,
    nodes: Vec<Node>,
}

pub(super) fn grow(
    data: &BinnedMatrix,
    targets: &[usize],
    n_classes: usize,
    class_weights: &[f64],
    params: &ForestParams,
    tree_index: usize,
) -> Tree {
    let mut rng = seed::stream(params.seed, tree_index as u64);
    let mut multiplicity = vec![0u32; data.n_rows];
    if params.bootstrap {
        for _ in 0..data.n_rows {
            multiplicity[rng.gen_range(0..data.n_rows)] += 1;
        }
    } else {
        multiplicity.fill(1);
    }
    let weights: Vec<f64> = multiplicity
        .iter()
        .zip(targets)
        .map(|(&m, &t)| f64::from(m) * class_weights[t])
        .collect();
    let mut rows: Vec<usize> = (0..data.n_rows).filter(|&r| multiplicity[r] > 0).collect();

    let mut grower = Grower {
        data,
        targets,
        n_classes,
        weights,
        params,
        max_features: params.max_features.count(data.n_features()),
        hist: Vec::new(),
        nodes: Vec::new(),
    };
    grower.build(&mut rows, 0, &mut rng);
    Tree::from_nodes(grower.nodes)
}

impl Grower<'_> {
    fn class_mass(&self, rows: &[usize]) -> Vec<f64> {
        let mut mass = vec![0.0; self.n_classes];
        for &r in rows {
            mass[self.targets[r]] += self.weights[r];
        }
        mass
    }

    fn leaf(&mut self, mass: &[f64]) -> usize {
        let total: f64 = mass.iter().sum();
        let proba = mass.iter().map(|m| m / total).collect();
        self.nodes.push(Node::Leaf { proba });
        self.nodes.len() - 1
    }

    fn build<R: Rng>(&mut self, rows: &mut [usize], depth: usize, rng: &mut R) -> usize {
        let mass = self.class_mass(rows);
        let present = mass.iter().filter(|&&m| m > 0.0).count();
        let depth_reached = self.params.max_depth.is_some_and(|d| depth >= d);
        if present <= 1 || rows.len() < self.params.min_samples_split || depth_reached {
            return self.leaf(&mass);
        }
        let Some(split) = self.best_split(rows, &mass, rng) else {
            return self.leaf(&mass);
        };

        let column = &self.data.bins[split.feature];
        let mut boundary = 0;
        for i in 0..rows.len() {
            if column[rows[i]] <= split.bin {
                rows.swap(i, boundary);
                boundary += 1;
            }
        }
        let index = self.nodes.len();
        self.nodes.push(Node::Leaf { proba: Vec::new() });
        let (left_rows, right_rows) = rows.split_at_mut(boundary);
        let left = self.build(left_rows, depth + 1, rng);
        let right = self.build(right_rows, depth + 1, rng);
        self.nodes[index] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        index
    }

    /// Visits features in random order until `max_features` non-constant ones
    /// have been evaluated (constant features do not count, so a split is
    /// found whenever one exists).
    fn best_split<R: Rng>(&mut self, rows: &[usize], mass: &[f64], rng: &mut R) -> Option<Candidate> {
        let mut order: Vec<usize> = (0..self.data.n_features()).collect();
        order.shuffle(rng);
        let total: f64 = mass.iter().sum();
        let k = self.n_classes;
        let mut best: Option<Candidate> = None;
        let mut evaluated = 0;
        for &feature in &order {
            if evaluated >= self.max_features {
                break;
            }
            let column = &self.data.bins[feature];
            let n_bins = self.data.values[feature].len();
            self.hist.clear();
            self.hist.resize(n_bins * k, 0.0);
            let mut lo = u32::MAX;
            let mut hi = 0;
            for &r in rows {
                let b = column[r];
                lo = lo.min(b);
                hi = hi.max(b);
                self.hist[b as usize * k + self.targets[r]] += self.weights[r];
            }
            if lo == hi {
                continue;
            }
            evaluated += 1;

            let mut left = vec![0.0; k];
            let mut left_total = 0.0;
            let mut prev: Option<u32> = None;
            for b in lo..=hi {
                let counts = &self.hist[b as usize * k..(b as usize + 1) * k];
                let bin_total: f64 = counts.iter().sum();
                // Rows in a node always carry positive weight.
                if bin_total <= 0.0 {
                    continue;
                }
                if let Some(p) = prev {
                    let right: Vec<f64> = mass.iter().zip(&left).map(|(m, l)| m - l).collect();
                    let children = gini_mass(&left) + gini_mass(&right);
                    let values = &self.data.values[feature];
                    let candidate = Candidate {
                        children,
                        feature,
                        bin: p,
                        threshold: (values[p as usize] + values[b as usize]) / 2.0,
                    };
                    debug_assert!(left_total > 0.0 && left_total < total + TIE_EPS);
                    if best.as_ref().is_none_or(|cur| candidate.beats(cur)) {
                        best = Some(candidate);
                    }
                }
                for (l, c) in left.iter_mut().zip(counts) {
                    *l += c;
                }
                left_total += bin_total;
                prev = Some(b);
            }
        }
        best
    }
}
