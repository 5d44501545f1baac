//! Exact greedy regression trees on logistic gradients.

use serde::{Deserialize, Serialize};

/// Gains at or below this are treated as no improvement.
const MIN_SPLIT_GAIN: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Node {
    Leaf {
        weight: f64,
    },
    /// Rows with `x[feature] < threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                Node::Leaf { weight } => return *weight,
                Node::Split { feature, threshold, left, right } => {
                    node = if x[*feature] < *threshold { left } else { right };
                }
            }
        }
    }

    /// Number of split levels on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub(crate) fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Node)) {
        f(self);
        if let Node::Split { left, right, .. } = self {
            left.visit(f);
            right.visit(f);
        }
    }
}

pub(crate) struct TreeParams {
    pub max_depth: usize,
    pub min_child_hessian: f64,
    pub gamma: f64,
    pub lambda: f64,
}

pub(crate) struct GrowContext<'a, R> {
    pub rows: &'a [R],
    pub grad: &'a [f64],
    pub hess: &'a [f64],
    pub features: &'a [usize],
    pub params: &'a TreeParams,
}

struct BestSplit {
    gain: f64,
    feature: usize,
    threshold: f64,
}

impl<R: AsRef<[f64]>> GrowContext<'_, R> {
    pub fn grow(&self, idx: &[usize]) -> Node {
        self.grow_at(idx, 0)
    }

    fn leaf_weight(&self, g: f64, h: f64) -> f64 {
        -g / (h + self.params.lambda)
    }

    fn score(&self, g: f64, h: f64) -> f64 {
        g * g / (h + self.params.lambda)
    }

    fn grow_at(&self, idx: &[usize], depth: usize) -> Node {
        let g: f64 = idx.iter().map(|&i| self.grad[i]).sum();
        let h: f64 = idx.iter().map(|&i| self.hess[i]).sum();
        if depth >= self.params.max_depth {
            return Node::Leaf { weight: self.leaf_weight(g, h) };
        }
        let Some(best) = self.best_split(idx, g, h) else {
            return Node::Leaf { weight: self.leaf_weight(g, h) };
        };
        let (left, right): (Vec<usize>, Vec<usize>) =
            idx.iter().partition(|&&i| self.rows[i].as_ref()[best.feature] < best.threshold);
        Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: Box::new(self.grow_at(&left, depth + 1)),
            right: Box::new(self.grow_at(&right, depth + 1)),
        }
    }

    fn best_split(&self, idx: &[usize], g: f64, h: f64) -> Option<BestSplit> {
        let p = self.params;
        let parent = self.score(g, h);
        let mut best: Option<BestSplit> = None;
        let mut sorted = idx.to_vec();
        for &f in self.features {
            let value = |i: usize| self.rows[i].as_ref()[f];
            sorted.sort_by(|&a, &b| value(a).total_cmp(&value(b)).then(a.cmp(&b)));
            let (mut gl, mut hl) = (0.0, 0.0);
            for k in 0..sorted.len().saturating_sub(1) {
                let i = sorted[k];
                gl += self.grad[i];
                hl += self.hess[i];
                let (lo, hi) = (value(i), value(sorted[k + 1]));
                if lo >= hi {
                    continue;
                }
                let (gr, hr) = (g - gl, h - hl);
                if hl < p.min_child_hessian || hr < p.min_child_hessian {
                    continue;
                }
                let gain = 0.5 * (self.score(gl, hl) + self.score(gr, hr) - parent) - p.gamma;
                if gain > MIN_SPLIT_GAIN && best.as_ref().is_none_or(|b| gain > b.gain) {
                    let mid = lo + (hi - lo) / 2.0;
                    let threshold = if mid > lo { mid } else { hi };
                    best = Some(BestSplit { gain, feature: f, threshold });
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_split_on_separable_feature() {
        let rows = vec![[0.1, 5.0], [0.2, 1.0], [0.8, 3.0], [0.9, 2.0]];
        // p = 0.5 everywhere: g = p - y, h = 0.25
        let grad = [0.5, 0.5, -0.5, -0.5];
        let hess = [0.25; 4];
        let params = TreeParams { max_depth: 1, min_child_hessian: 0.0, gamma: 0.0, lambda: 1.0 };
        let ctx = GrowContext { rows: &rows, grad: &grad, hess: &hess, features: &[0, 1], params: &params };
        match ctx.grow(&[0, 1, 2, 3]) {
            Node::Split { feature, threshold, left, right } => {
                assert_eq!(feature, 0);
                assert!((threshold - 0.5).abs() < 1e-12);
                // -G / (H + λ) = -1.0 / 1.5
                assert_eq!(*left, Node::Leaf { weight: -1.0 / 1.5 });
                assert_eq!(*right, Node::Leaf { weight: 1.0 / 1.5 });
            }
            other => panic!("expected split, got {other:?}"),
        }
    }

    #[test]
    fn min_child_hessian_blocks_split() {
        let rows = vec![[0.0], [1.0]];
        let params = TreeParams { max_depth: 3, min_child_hessian: 1.0, gamma: 0.0, lambda: 1.0 };
        let ctx = GrowContext { rows: &rows, grad: &[0.5, -0.5], hess: &[0.25, 0.25], features: &[0], params: &params };
        assert!(matches!(ctx.grow(&[0, 1]), Node::Leaf { .. }));
    }

    #[test]
    fn adjacent_floats_still_partition() {
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        let rows = vec![[a], [b]];
        let params = TreeParams { max_depth: 1, min_child_hessian: 0.0, gamma: 0.0, lambda: 1.0 };
        let ctx = GrowContext { rows: &rows, grad: &[0.5, -0.5], hess: &[0.25, 0.25], features: &[0], params: &params };
        let tree = ctx.grow(&[0, 1]);
        assert!(tree.evaluate(&[a]) < 0.0 && tree.evaluate(&[b]) > 0.0);
    }
}
