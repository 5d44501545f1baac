//! Boosted logistic model: hyperparameters, training loop, inference and the
//! `scenewatch-gbdt/1` model file.

use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{log_loss, sigmoid};
use super::tree::{GrowContext, Node, TreeParams};
use crate::error::{Error, Result};
use crate::features::FeatureVector;

pub const MODEL_SCHEMA: &str = "scenewatch-gbdt/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtHyperparams {
    pub learning_rate: f64,
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_child_hessian: f64,
    /// Minimum split gain.
    pub gamma: f64,
    pub subsample_rows: f64,
    pub subsample_features: f64,
    /// L2 penalty λ on leaf weights.
    pub l2_leaf_reg: f64,
    pub seed: u64,
}

impl Default for GbdtHyperparams {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            n_trees: 100,
            max_depth: 3,
            min_child_hessian: 1.0,
            gamma: 0.0,
            subsample_rows: 0.8,
            subsample_features: 0.8,
            l2_leaf_reg: 1.0,
            seed: 0,
        }
    }
}

impl GbdtHyperparams {
    /// Defaults with row and feature subsampling switched off.
    pub fn without_subsampling() -> Self {
        Self { subsample_rows: 1.0, subsample_features: 1.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidHyperparams(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate must lie in (0, 1]");
        }
        if self.n_trees < 1 || self.max_depth < 1 {
            return bad("n_trees and max_depth must be at least 1");
        }
        for (name, f) in [("subsample_rows", self.subsample_rows), ("subsample_features", self.subsample_features)] {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::InvalidHyperparams(format!("{name} must lie in (0, 1]")));
            }
        }
        if self.min_child_hessian < 0.0 || self.gamma < 0.0 || self.l2_leaf_reg < 0.0 {
            return bad("min_child_hessian, gamma and l2_leaf_reg must be non-negative");
        }
        Ok(())
    }

    /// `max(1, round(fraction * total))`.
    fn subsample_count(fraction: f64, total: usize) -> usize {
        ((fraction * total as f64).round() as usize).clamp(1, total)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub hyperparams: GbdtHyperparams,
    pub base_logit: f64,
    pub n_features: usize,
    pub trees: Vec<Node>,
}

impl GbdtModel {
    pub fn margin(&self, x: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.evaluate(x)).sum();
        self.base_logit + self.hyperparams.learning_rate * sum
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        sigmoid(self.margin(x))
    }

    pub fn predict_features(&self, fv: &FeatureVector) -> f64 {
        self.predict_proba(&fv.as_array())
    }

    /// Training log-loss after 0, 1, ..., n trees.
    pub fn staged_log_loss<R: AsRef<[f64]>>(&self, rows: &[R], labels: &[u8]) -> Vec<f64> {
        let mut margins = vec![self.base_logit; rows.len()];
        let mut out = Vec::with_capacity(self.trees.len() + 1);
        let probs = |m: &[f64]| m.iter().map(|&v| sigmoid(v)).collect::<Vec<_>>();
        out.push(log_loss(&probs(&margins), labels));
        for tree in &self.trees {
            for (m, r) in margins.iter_mut().zip(rows) {
                *m += self.hyperparams.learning_rate * tree.evaluate(r.as_ref());
            }
            out.push(log_loss(&probs(&margins), labels));
        }
        out
    }

    fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ModelSchemaError(m));
        self.hyperparams.validate().map_err(|e| Error::ModelSchemaError(e.to_string()))?;
        if !self.base_logit.is_finite() {
            return bad("base_logit is not finite".into());
        }
        for (t, tree) in self.trees.iter().enumerate() {
            if tree.depth() > self.hyperparams.max_depth {
                return bad(format!("tree {t} is deeper than max_depth"));
            }
            let mut err = None;
            tree.visit(&mut |n| match n {
                Node::Leaf { weight } if !weight.is_finite() => err = Some(format!("tree {t} has a non-finite leaf")),
                Node::Split { feature, threshold, .. } => {
                    if *feature >= self.n_features {
                        err = Some(format!("tree {t} splits on feature {feature} of {}", self.n_features));
                    } else if !threshold.is_finite() {
                        err = Some(format!("tree {t} has a non-finite threshold"));
                    }
                }
                _ => {}
            });
            if let Some(e) = err {
                return bad(e);
            }
        }
        Ok(())
    }
}

/// Fits a boosted logistic model. Starts from a zero margin; each round fits
/// one tree to `g = p - y`, `h = p (1 - p)` on a seeded row / feature sample.
pub fn train<R: AsRef<[f64]>>(rows: &[R], labels: &[u8], hp: &GbdtHyperparams) -> Result<GbdtModel> {
    hp.validate()?;
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if rows.len() != labels.len() {
        return Err(Error::LengthMismatch(rows.len(), labels.len()));
    }
    let n_features = rows[0].as_ref().len();
    if let Some(r) = rows.iter().find(|r| r.as_ref().len() != n_features) {
        return Err(Error::LengthMismatch(r.as_ref().len(), n_features));
    }
    if labels.iter().any(|&l| l > 1) {
        return Err(Error::InvalidHyperparams("labels must be 0 or 1".into()));
    }
    if rows.iter().any(|r| r.as_ref().iter().any(|v| !v.is_finite())) {
        return Err(Error::InvalidHyperparams("feature values must be finite".into()));
    }
    let positives = labels.iter().filter(|&&l| l == 1).count();
    if rows.len() < 2 || positives == 0 || positives == labels.len() {
        return Err(Error::SingleClassDataset);
    }

    let params = TreeParams {
        max_depth: hp.max_depth,
        min_child_hessian: hp.min_child_hessian,
        gamma: hp.gamma,
        lambda: hp.l2_leaf_reg,
    };
    let n = rows.len();
    let n_rows = GbdtHyperparams::subsample_count(hp.subsample_rows, n);
    let n_cols = GbdtHyperparams::subsample_count(hp.subsample_features, n_features);
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);

    let base_logit = 0.0;
    let mut margins = vec![base_logit; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut trees = Vec::with_capacity(hp.n_trees);
    for _ in 0..hp.n_trees {
        for i in 0..n {
            let p = sigmoid(margins[i]);
            grad[i] = p - labels[i] as f64;
            hess[i] = p * (1.0 - p);
        }
        let mut row_idx: Vec<usize> = if n_rows < n { sample(&mut rng, n, n_rows).into_vec() } else { (0..n).collect() };
        row_idx.sort_unstable();
        let mut cols: Vec<usize> =
            if n_cols < n_features { sample(&mut rng, n_features, n_cols).into_vec() } else { (0..n_features).collect() };
        cols.sort_unstable();

        let ctx = GrowContext { rows, grad: &grad, hess: &hess, features: &cols, params: &params };
        let tree = ctx.grow(&row_idx);
        for (m, r) in margins.iter_mut().zip(rows) {
            *m += hp.learning_rate * tree.evaluate(r.as_ref());
        }
        trees.push(tree);
    }
    Ok(GbdtModel { hyperparams: hp.clone(), base_logit, n_features, trees })
}

#[derive(Serialize, Deserialize)]
struct WireModel {
    schema: String,
    #[serde(flatten)]
    model: GbdtModel,
}

pub fn model_to_json(model: &GbdtModel) -> String {
    let wire = WireModel { schema: MODEL_SCHEMA.into(), model: model.clone() };
    let mut s = serde_json::to_string_pretty(&wire).expect("model serializes");
    s.push('\n');
    s
}

pub fn model_from_json(text: &str) -> Result<GbdtModel> {
    let wire: WireModel = serde_json::from_str(text).map_err(|e| Error::ModelSchemaError(e.to_string()))?;
    if wire.schema != MODEL_SCHEMA {
        return Err(Error::ModelSchemaError(format!("expected schema `{MODEL_SCHEMA}`, found `{}`", wire.schema)));
    }
    wire.model.check()?;
    Ok(wire.model)
}

pub fn save_model(model: &GbdtModel, path: &Path) -> Result<()> {
    crate::manifest::write_atomic(path, model_to_json(model).as_bytes())
}

pub fn load_model(path: &Path) -> Result<GbdtModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable() -> (Vec<[f64; 3]>, Vec<u8>) {
        let rows = vec![
            [0.05, 0.01, 0.0],
            [0.10, 0.03, 0.1],
            [0.20, 0.02, 0.0],
            [0.30, 0.05, 0.2],
            [0.60, 0.04, 1.0],
            [0.70, 0.02, 0.0],
            [0.80, 0.06, 1.0],
            [0.95, 0.01, 0.3],
        ];
        (rows, vec![0, 0, 0, 0, 1, 1, 1, 1])
    }

    #[test]
    fn zero_trees_and_single_leaf() {
        let hp = GbdtHyperparams::default();
        let empty = GbdtModel { hyperparams: hp.clone(), base_logit: 0.0, n_features: 3, trees: vec![] };
        assert_eq!(empty.predict_proba(&[0.0, 0.0, 0.0]), 0.5);
        let one = GbdtModel { trees: vec![Node::Leaf { weight: 2.0 }], ..empty };
        assert!((one.predict_proba(&[0.0; 3]) - 0.549833997312478).abs() < 1e-12);
    }

    #[test]
    fn separable_fixture_is_ranked_perfectly() {
        let (rows, labels) = separable();
        let model = train(&rows, &labels, &GbdtHyperparams::without_subsampling()).unwrap();
        let scores: Vec<f64> = rows.iter().map(|r| model.predict_proba(r)).collect();
        // brute force: every anomaly outscores every normal
        for (i, si) in scores.iter().enumerate().filter(|(i, _)| labels[*i] == 1) {
            for (_, sj) in scores.iter().enumerate().filter(|(j, _)| labels[*j] == 0) {
                assert!(si > sj, "anomaly {i} scored {si} <= {sj}");
            }
        }
        assert_eq!(super::super::roc_auc(&scores, &labels).unwrap(), 1.0);
    }

    #[test]
    fn loss_never_increases_without_subsampling() {
        let (rows, labels) = separable();
        let model = train(&rows, &labels, &GbdtHyperparams::without_subsampling()).unwrap();
        let losses = model.staged_log_loss(&rows, &labels);
        assert!(losses.windows(2).all(|w| w[1] <= w[0] + 1e-15));
        assert!(losses.last().unwrap() < &losses[0]);
    }

    #[test]
    fn input_errors() {
        let hp = GbdtHyperparams::default();
        let rows = vec![[0.0; 3], [1.0; 3]];
        assert!(matches!(train(&rows, &[1, 1], &hp), Err(Error::SingleClassDataset)));
        assert!(matches!(train(&rows, &[1], &hp), Err(Error::LengthMismatch(2, 1))));
        let empty: Vec<[f64; 3]> = vec![];
        assert!(matches!(train(&empty, &[], &hp), Err(Error::EmptyDataset)));
        let bad = GbdtHyperparams { learning_rate: 0.0, ..hp };
        assert!(matches!(train(&rows, &[0, 1], &bad), Err(Error::InvalidHyperparams(_))));
    }

    #[test]
    fn subsample_counts() {
        assert_eq!(GbdtHyperparams::subsample_count(0.8, 3), 2);
        assert_eq!(GbdtHyperparams::subsample_count(0.8, 136), 109);
        assert_eq!(GbdtHyperparams::subsample_count(0.01, 3), 1);
        assert_eq!(GbdtHyperparams::subsample_count(1.0, 3), 3);
    }

    #[test]
    fn model_file_round_trip_and_errors() {
        let (rows, labels) = separable();
        let model = train(&rows, &labels, &GbdtHyperparams::default()).unwrap();
        let text = model_to_json(&model);
        assert!(text.contains("\"schema\": \"scenewatch-gbdt/1\""));
        let back = model_from_json(&text).unwrap();
        assert_eq!(back, model);
        assert!(matches!(model_from_json(&text[..text.len() / 2]), Err(Error::ModelSchemaError(_))));
        let wrong = text.replace("scenewatch-gbdt/1", "other/2");
        assert!(matches!(model_from_json(&wrong), Err(Error::ModelSchemaError(_))));
        let bad_feature = GbdtModel {
            trees: vec![Node::Split {
                feature: 7,
                threshold: 0.5,
                left: Box::new(Node::Leaf { weight: 0.0 }),
                right: Box::new(Node::Leaf { weight: 0.0 }),
            }],
            ..model
        };
        assert!(matches!(model_from_json(&model_to_json(&bad_feature)), Err(Error::ModelSchemaError(_))));
    }
}
