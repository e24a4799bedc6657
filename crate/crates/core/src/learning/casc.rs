use super::{
    add_into, casc_dlogits, casc_loss, check_finite, credit_mask, epoch_features, shuffled_order,
    validation_score, BestCheckpoint, CreditMode, MetricsRecord, Optimizer, TrainConfig,
    TrainOutcome,
};
use crate::abstractor::reward;
use crate::corpus::DocumentCluster;
use crate::error::{Error, Result};
use crate::extractor::{
    backward, forward, greedy_select, sample_select, ScorerParams, SentenceFeatures, SentenceLogits,
};
use crate::pipeline::Pipeline;
use crate::rng::Rng;
use crate::supervision::IndexSet;

/// One sampled and one greedy pull of the single-round bandit.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyRollout {
    pub outcomes: Vec<bool>,
    pub sampled: IndexSet,
    pub greedy: IndexSet,
    pub reward_sample: f64,
    pub reward_greedy: f64,
    pub advantage: f64,
    pub credit_mask: IndexSet,
    /// The sample drew nothing and the argmax sentence was substituted.
    pub fallback: bool,
}

/// Sample and greedy selections from `logits`, both scored with `reward`.
pub fn rollout<F>(
    logits: &SentenceLogits,
    mode: CreditMode,
    rng: &mut Rng,
    mut reward: F,
) -> Result<PolicyRollout>
where
    F: FnMut(&IndexSet, &str) -> Result<f64>,
{
    let sampled = sample_select(logits, rng);
    let greedy = greedy_select(logits).indices;
    let reward_sample = reward(&sampled.selection.indices, "sample")?;
    let reward_greedy = reward(&greedy, "greedy")?;
    let credit_mask = credit_mask(&sampled.selection.indices, &greedy, mode, logits.len());
    Ok(PolicyRollout {
        outcomes: sampled.outcomes,
        sampled: sampled.selection.indices,
        greedy,
        reward_sample,
        reward_greedy,
        advantage: reward_sample - reward_greedy,
        credit_mask,
        fallback: sampled.selection.fallback,
    })
}

fn rollout_grad<F>(
    features: &SentenceFeatures,
    params: &ScorerParams,
    mode: CreditMode,
    rng: &mut Rng,
    reward: F,
) -> Result<(f64, Vec<f64>, PolicyRollout)>
where
    F: FnMut(&IndexSet, &str) -> Result<f64>,
{
    let (logits, cache) = forward(features, params)?;
    let r = rollout(&logits, mode, rng, reward)?;
    let loss = casc_loss(&logits, &r);
    let grad = backward(features, params, &cache, &casc_dlogits(&logits, &r));
    Ok((loss, grad, r))
}

/// One self-critic update on a single example: roll out, score both
/// selections with `reward`, and take an optimizer step on the credited loss.
pub fn casc_step<F>(
    features: &SentenceFeatures,
    params: &mut ScorerParams,
    optimizer: &mut Optimizer,
    mode: CreditMode,
    rng: &mut Rng,
    reward: F,
) -> Result<PolicyRollout>
where
    F: FnMut(&IndexSet, &str) -> Result<f64>,
{
    let (_, grad, r) = rollout_grad(features, params, mode, rng, reward)?;
    if r.advantage != 0.0 {
        optimizer.step(&mut params.values, &grad);
    }
    Ok(r)
}

/// Self-critic training with rewards from the pipeline's training abstractor.
///
/// Each cluster draws from its own random stream keyed by seed, cluster id and
/// step. A cluster whose abstractor call fails is skipped with a warning unless
/// `abort_on_abstractor_error` is set. Model selection matches [`super::train_mle`].
pub fn train_casc(
    pipeline: &Pipeline,
    train: &[DocumentCluster],
    val: &[DocumentCluster],
    config: &TrainConfig,
    init: ScorerParams,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::NoExamples);
    }
    let golds: Vec<Vec<Vec<String>>> = train
        .iter()
        .map(|c| pipeline.gold_sentences(c))
        .collect::<Result<_>>()?;
    let mut params = init;
    let mut best = BestCheckpoint::new(&params);
    let mut optimizer = Optimizer::new(config.optimizer, config.learning_rate, params.values.len());
    let mut log = Vec::new();
    let mut step = 0usize;

    for epoch in 0..config.epochs {
        let features = epoch_features(pipeline, train, config.sr_enabled, Some(&params))?;
        let order = shuffled_order(train.len(), config.seed, epoch);
        let batches: Vec<&[usize]> = order.chunks(config.batch).collect();
        for (b, batch) in batches.iter().enumerate() {
            let results = crate::par::map(batch, |&i| {
                let cluster = &train[i];
                let mut rng = crate::rng::stream(config.seed, &cluster.id, step as u64);
                rollout_grad(
                    &features[i],
                    &params,
                    config.credit_mode,
                    &mut rng,
                    |sel, tag| {
                        reward(
                            cluster,
                            sel,
                            &golds[i],
                            &pipeline.train_abstractor,
                            &pipeline.reward,
                            &format!("{tag}{step}"),
                        )
                    },
                )
            });
            let mut grad = vec![0.0; params.values.len()];
            let (mut loss, mut rs, mut rg, mut adv, mut size) = (0.0, 0.0, 0.0, 0.0, 0.0);
            let mut n = 0usize;
            for (r, &i) in results.into_iter().zip(batch.iter()) {
                match r {
                    Ok((l, g, ro)) => {
                        loss += l;
                        rs += ro.reward_sample;
                        rg += ro.reward_greedy;
                        adv += ro.advantage;
                        size += ro.sampled.len() as f64;
                        add_into(&mut grad, &g);
                        n += 1;
                    }
                    Err(e) if e.is_external() && !config.abort_on_abstractor_error => {
                        log::warn!("casc: skipping cluster {}: {e}", train[i].id);
                    }
                    Err(e) => return Err(e),
                }
            }
            let last = b + 1 == batches.len();
            if n > 0 {
                let k = n as f64;
                grad.iter_mut().for_each(|g| *g /= k);
                optimizer.step(&mut params.values, &grad);
                check_finite(step, loss / k, &params)?;
                let val_score = if last && !val.is_empty() {
                    Some(validation_score(pipeline, val, &params, config.sr_enabled)?)
                } else {
                    None
                };
                log.push(MetricsRecord {
                    step,
                    epoch,
                    loss: loss / k,
                    mean_reward_sample: Some(rs / k),
                    mean_reward_greedy: Some(rg / k),
                    mean_advantage: Some(adv / k),
                    mean_set_size: size / k,
                    val_rouge1_f1: val_score,
                });
            }
            step += 1;
        }
        if val.is_empty() {
            best = BestCheckpoint::new(&params);
            best.epoch = epoch + 1;
        } else {
            let v = match log
                .last()
                .and_then(|r| r.val_rouge1_f1.filter(|_| r.epoch == epoch))
            {
                Some(v) => v,
                None => validation_score(pipeline, val, &params, config.sr_enabled)?,
            };
            best.offer(&params, epoch + 1, v);
        }
        log::info!("casc epoch {} done, step {step}", epoch + 1);
    }
    Ok(best.finish(log))
}
