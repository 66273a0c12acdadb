//! Losses, negative sampling and the ranking training loop with early
//! stopping on validation core-chain accuracy.

use rand::seq::index::sample as index_sample;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{clip_gradients, AdamState, Tape};
use crate::dataset::QAExample;
use crate::encoders::{rank_by_scores, PreparedChain, RankingModel};
use crate::error::{Error, Result};
use crate::kg::KnowledgeGraph;
use crate::query_graph::{ChainTokens, SurfaceForms};
use crate::scalar::{lit, Scalar};

pub use crate::autodiff::tape::{pairwise_loss_value, pointwise_loss_value};

/// Pointwise binary setting or pairwise max-margin setting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainSetting {
    Pointwise,
    Pairwise,
}

impl std::str::FromStr for TrainSetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pointwise" => Ok(TrainSetting::Pointwise),
            "pairwise" => Ok(TrainSetting::Pairwise),
            _ => Err(Error::Argument(format!("unknown training setting {s:?}"))),
        }
    }
}

/// Hyperparameters of one training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub setting: TrainSetting,
    pub lr: f64,
    pub fine_tune_lr: f64,
    /// Pairwise hinge margin.
    pub margin: f64,
    /// Negative core chains sampled per question.
    pub negatives: usize,
    pub max_epochs: usize,
    /// Epochs without validation-CCA improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    pub clip_norm: f64,
    /// Redraw negatives every epoch (seeded); otherwise epoch-0 draws are reused.
    pub resample_each_epoch: bool,
}

impl TrainConfig {
    pub fn new(setting: TrainSetting) -> Self {
        TrainConfig {
            setting,
            lr: 0.001,
            fine_tune_lr: 0.0001,
            margin: 1.0,
            negatives: 100,
            max_epochs: 300,
            patience: 20,
            seed: 0,
            clip_norm: 0.5,
            resample_each_epoch: true,
        }
    }
}

/// One ranking example: question tokens, candidate token views and the gold
/// candidate position (absent when the gold chain is outside the candidates).
#[derive(Clone, Debug)]
pub struct RankInstance {
    pub id: String,
    pub question: Vec<String>,
    pub candidates: Vec<ChainTokens>,
    pub gold: Option<usize>,
}

/// Per-epoch training statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub train_loss: f64,
    pub val_cca: f64,
}

/// Outcome of a training run. The best epoch attains the maximum validation
/// CCA and the model is restored to it on exit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub setting: TrainSetting,
    pub epochs: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_val_cca: f64,
    /// Training examples skipped because their gold chain is not in the
    /// candidate list.
    pub skipped_examples: usize,
    /// Where the final parameters were written, when they were.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<String>,
}

/// Draws up to `n` distinct non-gold candidate indices uniformly without
/// replacement. When fewer than `n` negatives exist, all of them are
/// returned in ascending order.
pub fn sample_negatives(
    n_candidates: usize,
    gold: usize,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    let pool: Vec<usize> = (0..n_candidates).filter(|&i| i != gold).collect();
    if pool.len() <= n {
        return pool;
    }
    index_sample(rng, pool.len(), n)
        .into_iter()
        .map(|i| pool[i])
        .collect()
}

/// Stable per-question RNG stream derived from (seed, epoch, example).
fn question_rng(seed: u64, epoch: u64, example: u64) -> ChaCha8Rng {
    let mut z = seed
        .wrapping_add(epoch.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(example.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    ChaCha8Rng::seed_from_u64(z ^ (z >> 31))
}

struct PreparedInstance {
    q_ids: Vec<u32>,
    candidates: Vec<PreparedChain>,
    gold: Option<usize>,
}

fn prepare<S: Scalar>(
    model: &RankingModel<S>,
    instances: &[RankInstance],
) -> Result<Vec<PreparedInstance>> {
    instances
        .iter()
        .map(|inst| {
            Ok(PreparedInstance {
                q_ids: model.prepare_question(&inst.question),
                candidates: inst
                    .candidates
                    .iter()
                    .map(|c| model.prepare_chain(c))
                    .collect::<Result<_>>()?,
                gold: inst.gold,
            })
        })
        .collect()
}

/// Fraction of instances whose gold candidate ranks first.
fn prepared_cca<S: Scalar>(model: &RankingModel<S>, set: &[PreparedInstance]) -> Result<f64> {
    if set.is_empty() {
        return Ok(0.0);
    }
    let mut hits = 0usize;
    for inst in set {
        let gold = match inst.gold {
            Some(g) => g,
            None => continue, // counted as a miss
        };
        if inst.candidates.is_empty() {
            continue;
        }
        let mut tape = Tape::new();
        let enc = model.question_encoding(&mut tape, &inst.q_ids)?;
        let mut scores = Vec::with_capacity(inst.candidates.len());
        for c in &inst.candidates {
            let node = model.candidate_score(&mut tape, &enc, c)?;
            scores.push(tape.item(node)?);
        }
        if rank_by_scores(&scores)[0] == gold {
            hits += 1;
        }
    }
    Ok(hits as f64 / set.len() as f64)
}

fn run_training<S: Scalar>(
    model: &mut RankingModel<S>,
    train_set: &[RankInstance],
    val_set: &[RankInstance],
    config: &TrainConfig,
    lr: f64,
) -> Result<TrainReport> {
    if train_set.is_empty() {
        return Err(Error::Argument("empty training split".into()));
    }
    if config.negatives == 0 {
        return Err(Error::Argument("need at least one negative sample".into()));
    }
    if config.setting == TrainSetting::Pairwise && config.margin <= 0.0 {
        return Err(Error::Argument(format!(
            "pairwise margin must be positive, got {}",
            config.margin
        )));
    }
    let prepared_train = prepare(model, train_set)?;
    let prepared_val = prepare(model, val_set)?;
    let skipped = prepared_train.iter().filter(|p| p.gold.is_none()).count();

    let mut adam = AdamState::new(model.params());
    let margin = lit::<S>(config.margin);
    let lr_s = lit::<S>(lr);

    let mut epochs: Vec<EpochStats> = Vec::new();
    let mut best_epoch = 0usize;
    let mut best_cca = f64::NEG_INFINITY;
    let mut best_params = model.params().clone();
    let mut since_best = 0usize;

    for epoch in 0..config.max_epochs {
        let mut loss_sum = 0.0f64;
        let mut loss_terms = 0usize;
        for (qi, inst) in prepared_train.iter().enumerate() {
            let gold = match inst.gold {
                Some(g) => g,
                None => continue,
            };
            let sampling_epoch = if config.resample_each_epoch { epoch as u64 } else { 0 };
            let mut rng = question_rng(config.seed, sampling_epoch, qi as u64);
            let negatives =
                sample_negatives(inst.candidates.len(), gold, config.negatives, &mut rng);

            let mut tape = Tape::new();
            let enc = model.question_encoding(&mut tape, &inst.q_ids)?;
            let gold_score = model.candidate_score(&mut tape, &enc, &inst.candidates[gold])?;
            let mut terms = Vec::with_capacity(negatives.len() + 1);
            match config.setting {
                TrainSetting::Pointwise => {
                    terms.push(tape.pointwise_loss(gold_score, true)?);
                    for &ni in &negatives {
                        let s = model.candidate_score(&mut tape, &enc, &inst.candidates[ni])?;
                        terms.push(tape.pointwise_loss(s, false)?);
                    }
                }
                TrainSetting::Pairwise => {
                    for &ni in &negatives {
                        let s = model.candidate_score(&mut tape, &enc, &inst.candidates[ni])?;
                        terms.push(tape.hinge(gold_score, s, margin)?);
                    }
                }
            }
            if terms.is_empty() {
                continue; // question without negatives contributes nothing
            }
            let total = tape.sum_rows(&terms)?;
            let loss = tape.scale(total, S::one() / lit::<S>(terms.len() as f64))?;
            let mut grads = tape.backward(loss, model.params())?;
            clip_gradients(&mut grads, lit::<S>(config.clip_norm));
            adam.step(model.params_mut(), &grads, lr_s);
            loss_sum += tape
                .item(loss)?
                .to_f64()
                .expect("finite loss");
            loss_terms += 1;
        }
        let train_loss = if loss_terms > 0 {
            loss_sum / loss_terms as f64
        } else {
            0.0
        };
        let val_cca = prepared_cca(model, &prepared_val)?;
        epochs.push(EpochStats {
            train_loss,
            val_cca,
        });
        if val_cca > best_cca {
            best_cca = val_cca;
            best_epoch = epoch;
            best_params = model.params().clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                break;
            }
        }
    }

    if !epochs.is_empty() {
        *model.params_mut() = best_params;
    }
    Ok(TrainReport {
        setting: config.setting,
        best_val_cca: if epochs.is_empty() { 0.0 } else { best_cca },
        best_epoch,
        epochs,
        skipped_examples: skipped,
        checkpoint: None,
    })
}

/// Trains a ranking model at `config.lr`. Each question is one batch: its
/// gold chain plus sampled negatives, losses averaged, gradients clipped at
/// `config.clip_norm`, one Adam step. The model is left at the parameters of
/// the best validation epoch.
pub fn train<S: Scalar>(
    model: &mut RankingModel<S>,
    train_set: &[RankInstance],
    val_set: &[RankInstance],
    config: &TrainConfig,
) -> Result<TrainReport> {
    run_training(model, train_set, val_set, config, config.lr)
}

/// Same loop as [`train`] at the reduced `config.fine_tune_lr`, for adapting
/// a pretrained model to a smaller dataset.
pub fn fine_tune<S: Scalar>(
    model: &mut RankingModel<S>,
    train_set: &[RankInstance],
    val_set: &[RankInstance],
    config: &TrainConfig,
) -> Result<TrainReport> {
    run_training(model, train_set, val_set, config, config.fine_tune_lr)
}

/// Builds the model vocabulary: question tokens of every given dataset in
/// order, then the surface forms of all graph predicates and classes.
pub fn build_vocabulary(
    datasets: &[&[QAExample]],
    kg: &KnowledgeGraph,
    surface: &SurfaceForms,
) -> crate::vocab::Vocabulary {
    let mut vocab = crate::vocab::Vocabulary::new();
    for dataset in datasets {
        for ex in dataset.iter() {
            for t in &ex.tokens {
                vocab.add(t);
            }
        }
    }
    for pred in kg.predicate_names() {
        for t in surface.tokens(pred) {
            vocab.add(&t);
        }
    }
    for &class in kg.classes() {
        for t in surface.tokens(kg.node_name(class)) {
            vocab.add(&t);
        }
    }
    vocab
}

/// Builds ranking instances for a dataset: candidate generation per question
/// plus the gold chain position. Gold chains outside their candidate list
/// leave `gold` empty; [`train`] counts and skips those.
pub fn build_rank_instances(
    dataset: &[QAExample],
    kg: &KnowledgeGraph,
    surface: &SurfaceForms,
    strict_two_entity: bool,
) -> Result<Vec<RankInstance>> {
    dataset
        .iter()
        .map(|ex| {
            let chains =
                crate::candidates::generate_candidates(kg, &ex.entities, strict_two_entity)?;
            let gold = chains.iter().position(|c| c.hops == ex.gold_chain.hops);
            Ok(RankInstance {
                id: ex.id.clone(),
                question: ex.tokens.clone(),
                candidates: chains
                    .iter()
                    .map(|c| ChainTokens::of_chain(c, kg, surface))
                    .collect(),
                gold,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::{ModelConfig, ModelKind};
    use crate::kg::PredId;
    use crate::vocab::Vocabulary;
    use rand_chacha::rand_core::SeedableRng;

    fn vocab() -> Vocabulary {
        let mut v = Vocabulary::new();
        v.extend(
            [
                "who", "flew", "the", "mission", "capital", "of", "spouse", "birth", "place",
                "astronaut", "city", "country",
            ],
        );
        v
    }

    fn chain(word: &str, pred: u32) -> ChainTokens {
        ChainTokens {
            linear: vec!["+".into(), word.to_string()],
            hop1: vec!["+".into(), word.to_string()],
            hop2: vec![crate::query_graph::NO_HOP_TOKEN.to_string()],
            predicates: vec![PredId(pred)],
        }
    }

    fn instances() -> Vec<RankInstance> {
        let cands = vec![chain("mission", 0), chain("capital", 1), chain("spouse", 2)];
        vec![
            RankInstance {
                id: "q0".into(),
                question: ["who", "flew", "the", "mission"].map(str::to_string).to_vec(),
                candidates: cands.clone(),
                gold: Some(0),
            },
            RankInstance {
                id: "q1".into(),
                question: ["capital", "of", "the", "country"].map(str::to_string).to_vec(),
                candidates: cands.clone(),
                gold: Some(1),
            },
            RankInstance {
                id: "q2".into(),
                question: ["who", "is", "the", "spouse"].map(str::to_string).to_vec(),
                candidates: cands,
                gold: Some(2),
            },
        ]
    }

    fn fresh_model(seed: u64) -> RankingModel<f64> {
        RankingModel::new(ModelConfig::desk(ModelKind::BilstmDot, 8, seed), vocab(), 3).unwrap()
    }

    #[test]
    fn negatives_are_exhaustive_when_few() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sample_negatives(5, 0, 100, &mut rng), vec![1, 2, 3, 4]);
    }

    #[test]
    fn negatives_never_include_the_gold() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let drawn = sample_negatives(30, 7, 10, &mut rng);
            assert_eq!(drawn.len(), 10);
            assert!(!drawn.contains(&7));
            let mut dedup = drawn.clone();
            dedup.sort_unstable();
            dedup.dedup();
            assert_eq!(dedup.len(), drawn.len());
        }
    }

    #[test]
    fn negative_sampling_is_seeded() {
        let a = sample_negatives(50, 3, 10, &mut ChaCha8Rng::seed_from_u64(9));
        let b = sample_negatives(50, 3, 10, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn zero_epochs_changes_nothing() {
        let mut model = fresh_model(4);
        let before = model.params().clone();
        let mut config = TrainConfig::new(TrainSetting::Pointwise);
        config.max_epochs = 0;
        let report = train(&mut model, &instances(), &instances(), &config).unwrap();
        assert!(report.epochs.is_empty());
        assert_eq!(model.params(), &before);
    }

    #[test]
    fn equal_seeds_give_identical_reports() {
        let mut config = TrainConfig::new(TrainSetting::Pairwise);
        config.max_epochs = 4;
        config.seed = 11;
        let mut m1 = fresh_model(5);
        let r1 = train(&mut m1, &instances(), &instances(), &config).unwrap();
        let mut m2 = fresh_model(5);
        let r2 = train(&mut m2, &instances(), &instances(), &config).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(m1.params(), m2.params());
    }

    #[test]
    fn a_satisfied_hinge_leaves_parameters_unchanged() {
        let model = fresh_model(6);
        let inst = &instances()[0];
        let q_ids = model.prepare_question(&inst.question);
        let a = model.prepare_chain(&inst.candidates[0]).unwrap();
        let b = model.prepare_chain(&inst.candidates[1]).unwrap();
        let mut tape = Tape::new();
        let enc = model.question_encoding(&mut tape, &q_ids).unwrap();
        let sa = model.candidate_score(&mut tape, &enc, &a).unwrap();
        let sb = model.candidate_score(&mut tape, &enc, &b).unwrap();
        let (va, vb) = (tape.item(sa).unwrap(), tape.item(sb).unwrap());
        let (pos, neg, vp, vn) = if va >= vb { (sa, sb, va, vb) } else { (sb, sa, vb, va) };
        let margin = ((vp - vn) / 2.0).max(1e-9);
        let loss = tape.hinge(pos, neg, margin).unwrap();
        assert_eq!(tape.item(loss).unwrap(), 0.0);
        let mut model = model;
        let before = model.params().clone();
        let mut grads = tape.backward(loss, model.params()).unwrap();
        crate::autodiff::clip_gradients(&mut grads, 0.5);
        let mut adam = AdamState::new(model.params());
        adam.step(model.params_mut(), &grads, 0.001);
        assert_eq!(model.params(), &before);
    }

    #[test]
    fn fine_tuning_with_zero_lr_is_a_no_op() {
        let mut model = fresh_model(7);
        let before = model.params().clone();
        let mut config = TrainConfig::new(TrainSetting::Pointwise);
        config.max_epochs = 3;
        config.fine_tune_lr = 0.0;
        fine_tune(&mut model, &instances(), &instances(), &config).unwrap();
        assert_eq!(model.params(), &before);
    }

    #[test]
    fn training_overfits_a_tiny_separable_set() {
        let mut model = fresh_model(8);
        let mut config = TrainConfig::new(TrainSetting::Pointwise);
        config.max_epochs = 120;
        config.patience = 120;
        let report = train(&mut model, &instances(), &instances(), &config).unwrap();
        assert!(
            report.best_val_cca >= 0.99,
            "expected overfit, got CCA {}",
            report.best_val_cca
        );
        assert_eq!(report.skipped_examples, 0);
        // ranking the gold chain first for every instance
        for inst in instances() {
            let ranked = model.rank(&inst.question, &inst.candidates).unwrap();
            assert_eq!(ranked[0], inst.gold.unwrap());
        }
    }

    #[test]
    fn examples_without_gold_are_counted_and_skipped() {
        let mut model = fresh_model(9);
        let mut set = instances();
        set[1].gold = None;
        let mut config = TrainConfig::new(TrainSetting::Pointwise);
        config.max_epochs = 1;
        let report = train(&mut model, &set, &set, &config).unwrap();
        assert_eq!(report.skipped_examples, 1);
    }

    #[test]
    fn empty_training_split_is_an_error() {
        let mut model = fresh_model(10);
        let config = TrainConfig::new(TrainSetting::Pointwise);
        assert!(train(&mut model, &[], &instances(), &config).is_err());
    }

    #[test]
    fn best_epoch_attains_the_maximum_validation_cca() {
        let mut model = fresh_model(12);
        let mut config = TrainConfig::new(TrainSetting::Pairwise);
        config.max_epochs = 30;
        config.patience = 30;
        let report = train(&mut model, &instances(), &instances(), &config).unwrap();
        let max = report
            .epochs
            .iter()
            .map(|e| e.val_cca)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(report.epochs[report.best_epoch].val_cca, max);
        assert_eq!(report.best_val_cca, max);
    }
}
