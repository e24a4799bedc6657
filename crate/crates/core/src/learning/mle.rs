use std::collections::HashMap;

use super::{
    add_into, check_finite, epoch_features, greedy_select, mle_dlogits, mle_loss, shuffled_order,
    validation_score, BestCheckpoint, MetricsRecord, Optimizer, TrainConfig, TrainOutcome,
};
use crate::corpus::DocumentCluster;
use crate::error::{Error, Result};
use crate::extractor::{backward, forward, ScorerParams, SentenceFeatures};
use crate::pipeline::Pipeline;
use crate::supervision::{IndexSet, SupervisionRecord};

struct Target {
    oracle: IndexSet,
    weights: Vec<f64>,
}

fn targets(
    clusters: &[DocumentCluster],
    records: &[SupervisionRecord],
    por: bool,
) -> Result<Vec<Target>> {
    let by_id: HashMap<&str, &SupervisionRecord> =
        records.iter().map(|r| (r.id.as_str(), r)).collect();
    clusters
        .iter()
        .map(|c| {
            let r = by_id.get(c.id.as_str()).ok_or_else(|| {
                Error::Config(format!("no supervision record for cluster `{}`", c.id))
            })?;
            if r.weights.len() != c.len() {
                return Err(Error::DimensionMismatch {
                    expected: c.len(),
                    actual: r.weights.len(),
                });
            }
            if let Some(&i) = r.oracle.iter().find(|&&i| i >= c.len()) {
                return Err(Error::Config(format!(
                    "oracle index {i} out of range for cluster `{}` ({} sentences)",
                    c.id,
                    c.len()
                )));
            }
            Ok(Target {
                oracle: r.oracle_set(),
                weights: if por {
                    r.weights.clone()
                } else {
                    vec![1.0; c.len()]
                },
            })
        })
        .collect()
}

/// Loss, gradient and greedy set size for one cluster.
fn cluster_grad(
    features: &SentenceFeatures,
    params: &ScorerParams,
    t: &Target,
) -> Result<(f64, Vec<f64>, usize)> {
    let (logits, cache) = forward(features, params)?;
    let loss = mle_loss(&logits, &t.oracle, &t.weights);
    let grad = backward(
        features,
        params,
        &cache,
        &mle_dlogits(&logits, &t.oracle, &t.weights),
    );
    Ok((loss, grad, greedy_select(&logits).indices.len()))
}

/// Weighted maximum-likelihood training against pseudo oracles.
///
/// `records` must cover every training cluster; with `por_enabled` off their
/// weights are replaced by ones. After each epoch the parameters are scored on
/// `val` (ROUGE-1 F1 of abstracted greedy selections) and the best epoch is
/// returned. With zero epochs `init` comes back unchanged.
pub fn train_mle(
    pipeline: &Pipeline,
    train: &[DocumentCluster],
    records: &[SupervisionRecord],
    val: &[DocumentCluster],
    config: &TrainConfig,
    init: ScorerParams,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::NoExamples);
    }
    let targets = targets(train, records, config.por_enabled)?;
    let mut params = init;
    let mut best = BestCheckpoint::new(&params);
    let mut optimizer = Optimizer::new(config.optimizer, config.learning_rate, params.values.len());
    let mut log = Vec::new();
    let mut step = 0usize;
    let mut features = epoch_features(pipeline, train, config.sr_enabled, None)?;

    for epoch in 0..config.epochs {
        if config.sr_enabled && epoch > 0 {
            features = epoch_features(pipeline, train, true, Some(&params))?;
        }
        let order = shuffled_order(train.len(), config.seed, epoch);
        let batches: Vec<&[usize]> = order.chunks(config.batch).collect();
        for (b, batch) in batches.iter().enumerate() {
            let results =
                crate::par::map(batch, |&i| cluster_grad(&features[i], &params, &targets[i]));
            let mut grad = vec![0.0; params.values.len()];
            let mut loss = 0.0;
            let mut set_size = 0usize;
            for r in results {
                let (l, g, k) = r?;
                loss += l;
                set_size += k;
                add_into(&mut grad, &g);
            }
            let n = batch.len() as f64;
            grad.iter_mut().for_each(|g| *g /= n);
            loss /= n;
            optimizer.step(&mut params.values, &grad);
            check_finite(step, loss, &params)?;

            let last = b + 1 == batches.len();
            let val_score = if last && !val.is_empty() {
                Some(validation_score(pipeline, val, &params, config.sr_enabled)?)
            } else {
                None
            };
            log.push(MetricsRecord {
                step,
                epoch,
                loss,
                mean_reward_sample: None,
                mean_reward_greedy: None,
                mean_advantage: None,
                mean_set_size: set_size as f64 / n,
                val_rouge1_f1: val_score,
            });
            step += 1;
        }
        if val.is_empty() {
            best = BestCheckpoint::new(&params);
            best.epoch = epoch + 1;
        } else if let Some(v) = log.last().and_then(|r| r.val_rouge1_f1) {
            best.offer(&params, epoch + 1, v);
        }
        log::info!("mle epoch {} done, step {step}", epoch + 1);
    }
    Ok(best.finish(log))
}
