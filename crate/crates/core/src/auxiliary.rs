//! Auxiliary constraint prediction: question intent, class-constraint
//! existence and placement, and the constraining class itself.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::autodiff::layers::{bilstm, BiLstm};
use crate::autodiff::{clip_gradients, AdamState, ParamInit, ParamStore, Tape};
use crate::encoders::RankingModel;
use crate::error::{Error, Result};
use crate::kg::{KnowledgeGraph, NodeId};
use crate::query_graph::{
    ChainTokens, ClassConstraint, CoreChain, Intent, QueryGraph, SurfaceForms, TypePlacement,
};
use crate::scalar::{lit, Scalar};
use crate::training::{EpochStats, TrainReport, TrainSetting};
use crate::vocab::Vocabulary;

pub const INTENT_LABELS: [&str; 3] = ["set", "count", "ask"];
pub const PLACEMENT_LABELS: [&str; 3] = ["none", "lambda", "existential"];

pub fn intent_label(intent: Intent) -> usize {
    match intent {
        Intent::Set => 0,
        Intent::Count => 1,
        Intent::Ask => 2,
    }
}

pub fn intent_from_label(label: usize) -> Intent {
    match label {
        0 => Intent::Set,
        1 => Intent::Count,
        _ => Intent::Ask,
    }
}

pub fn placement_label(p: TypePlacement) -> usize {
    match p {
        TypePlacement::None => 0,
        TypePlacement::Lambda => 1,
        TypePlacement::Existential => 2,
    }
}

pub fn placement_from_label(label: usize) -> TypePlacement {
    match label {
        0 => TypePlacement::None,
        1 => TypePlacement::Lambda,
        _ => TypePlacement::Existential,
    }
}

/// Dimensions and seed of a sequence classifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub d_emb: usize,
    pub hidden: usize,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            d_emb: 300,
            hidden: 150,
            seed: 0,
        }
    }
}

/// Training hyperparameters for the classifiers; no negative sampling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierTrainConfig {
    pub lr: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub clip_norm: f64,
    /// Weight each example's loss by the inverse frequency of its label,
    /// for disproportionately distributed label sets. Off by default.
    pub class_weighting: bool,
}

impl Default for ClassifierTrainConfig {
    fn default() -> Self {
        ClassifierTrainConfig {
            lr: 0.001,
            max_epochs: 300,
            patience: 20,
            clip_norm: 0.5,
            class_weighting: false,
        }
    }
}

/// BiLSTM final state plus a linear layer and softmax: the 3-way classifier
/// used for both intent and constraint placement.
#[derive(Clone, Debug)]
pub struct SequenceClassifier<S> {
    config: ClassifierConfig,
    labels: Vec<String>,
    vocab: Vocabulary,
    params: ParamStore<S>,
    encoder: BiLstm,
    out_w: usize,
    out_b: usize,
    emb: usize,
    trained: bool,
}

impl<S: Scalar> SequenceClassifier<S> {
    pub fn new(config: ClassifierConfig, labels: Vec<String>, vocab: Vocabulary) -> Result<Self> {
        if labels.len() < 2 {
            return Err(Error::Config("classifier needs at least two labels".into()));
        }
        let mut params = ParamStore::new();
        let mut init = ParamInit::new(config.seed);
        let emb = params.register(
            "emb",
            init.glorot(&[vocab.len(), config.d_emb], config.d_emb, config.d_emb),
        )?;
        let encoder = BiLstm::register(&mut params, &mut init, "enc", config.d_emb, config.hidden)?;
        let out_w = params.register(
            "out.w",
            init.glorot(&[labels.len(), 2 * config.hidden], 2 * config.hidden, labels.len()),
        )?;
        let out_b = params.register("out.b", init.zeros(&[labels.len()]))?;
        Ok(SequenceClassifier {
            config,
            labels,
            vocab,
            params,
            encoder,
            out_w,
            out_b,
            emb,
            trained: false,
        })
    }

    /// Restores a trained classifier from checkpoint parts.
    pub fn from_parts(
        config: ClassifierConfig,
        labels: Vec<String>,
        vocab: Vocabulary,
        params: ParamStore<S>,
    ) -> Result<Self> {
        let rebuilt = Self::new(config, labels, vocab)?;
        let expect: Vec<(String, usize)> = rebuilt
            .params
            .names()
            .map(|(n, s)| (n.to_string(), s))
            .collect();
        let got: Vec<(String, usize)> = params.names().map(|(n, s)| (n.to_string(), s)).collect();
        if expect != got {
            return Err(Error::Checkpoint(
                "classifier parameter names do not match the configuration".into(),
            ));
        }
        Ok(SequenceClassifier {
            params,
            trained: true,
            ..rebuilt
        })
    }

    pub fn config(&self) -> &ClassifierConfig {
        &self.config
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn params(&self) -> &ParamStore<S> {
        &self.params
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    fn logits(&self, tape: &mut Tape<S>, tokens: &[String]) -> Result<crate::autodiff::NodeId> {
        if tokens.is_empty() {
            return Err(Error::Argument("empty token sequence".into()));
        }
        let ids = self.vocab.ids(tokens);
        let emb = tape.param(&self.params, self.emb);
        let rows: Vec<_> = ids
            .iter()
            .map(|&id| tape.row(emb, id as usize))
            .collect::<Result<_>>()?;
        let (_, last) = bilstm(tape, &self.params, &self.encoder, &rows)?;
        let w = tape.param(&self.params, self.out_w);
        let b = tape.param(&self.params, self.out_b);
        let lin = tape.matvec(w, last)?;
        tape.add(lin, b)
    }

    /// Class probabilities; they sum to one.
    pub fn probabilities(&self, tokens: &[String]) -> Result<Vec<S>> {
        let mut tape = Tape::new();
        let logits = self.logits(&mut tape, tokens)?;
        let soft = tape.softmax(logits)?;
        Ok(tape.value(soft).data().to_vec())
    }

    /// Argmax label index; exact ties go to the lower label index. Errors on
    /// an untrained model.
    pub fn predict(&self, tokens: &[String]) -> Result<usize> {
        if !self.trained {
            return Err(Error::Argument(
                "classifier has not been trained or loaded from a checkpoint".into(),
            ));
        }
        let probs = self.probabilities(tokens)?;
        let mut best = 0usize;
        for (i, &p) in probs.iter().enumerate() {
            if p > probs[best] {
                best = i;
            }
        }
        Ok(best)
    }

    fn accuracy(&self, set: &[(Vec<String>, usize)]) -> Result<f64> {
        if set.is_empty() {
            return Ok(0.0);
        }
        let mut hits = 0usize;
        for (tokens, label) in set {
            let probs = self.probabilities(tokens)?;
            let mut best = 0usize;
            for (i, &p) in probs.iter().enumerate() {
                if p > probs[best] {
                    best = i;
                }
            }
            if best == *label {
                hits += 1;
            }
        }
        Ok(hits as f64 / set.len() as f64)
    }

    /// Cross-entropy training with early stopping on validation accuracy.
    pub fn train(
        &mut self,
        train_set: &[(Vec<String>, usize)],
        val_set: &[(Vec<String>, usize)],
        config: &ClassifierTrainConfig,
    ) -> Result<TrainReport> {
        if train_set.is_empty() {
            return Err(Error::Argument("empty training split".into()));
        }
        // optional inverse-frequency weights, mean-normalized to one
        let weights: Vec<f64> = if config.class_weighting {
            let mut freq = vec![0usize; self.labels.len()];
            for (_, label) in train_set {
                freq[*label] += 1;
            }
            let raw: Vec<f64> = train_set
                .iter()
                .map(|(_, label)| 1.0 / freq[*label].max(1) as f64)
                .collect();
            let mean = raw.iter().sum::<f64>() / raw.len() as f64;
            raw.into_iter().map(|w| w / mean).collect()
        } else {
            vec![1.0; train_set.len()]
        };
        let mut adam = AdamState::new(&self.params);
        let mut epochs = Vec::new();
        let mut best_acc = f64::NEG_INFINITY;
        let mut best_epoch = 0usize;
        let mut best_params = self.params.clone();
        let mut since_best = 0usize;
        for epoch in 0..config.max_epochs {
            let mut loss_sum = 0.0f64;
            for ((tokens, label), &weight) in train_set.iter().zip(&weights) {
                let mut tape = Tape::new();
                let logits = self.logits(&mut tape, tokens)?;
                let ce = tape.cross_entropy(logits, *label)?;
                let loss = tape.scale(ce, lit::<S>(weight))?;
                let mut grads = tape.backward(loss, &self.params)?;
                clip_gradients(&mut grads, lit::<S>(config.clip_norm));
                adam.step(&mut self.params, &grads, lit::<S>(config.lr));
                loss_sum += tape.item(loss)?.to_f64().expect("finite loss");
            }
            let val_acc = self.accuracy(val_set)?;
            epochs.push(EpochStats {
                train_loss: loss_sum / train_set.len() as f64,
                val_cca: val_acc,
            });
            if val_acc > best_acc {
                best_acc = val_acc;
                best_epoch = epoch;
                best_params = self.params.clone();
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= config.patience {
                    break;
                }
            }
        }
        if !epochs.is_empty() {
            self.params = best_params;
        }
        self.trained = true;
        Ok(TrainReport {
            setting: TrainSetting::Pointwise,
            best_val_cca: if epochs.is_empty() { 0.0 } else { best_acc },
            best_epoch,
            epochs,
            skipped_examples: 0,
            checkpoint: None,
        })
    }
}

/// Classes that could constrain the designated variable of a chain: the
/// class memberships of whatever binds that variable. Falls back to every
/// class in the graph when the chain binds nothing.
pub fn candidate_classes(
    kg: &KnowledgeGraph,
    chain: &CoreChain,
    placement: TypePlacement,
) -> Result<BTreeSet<NodeId>> {
    if placement == TypePlacement::None {
        return Err(Error::Argument(
            "candidate_classes needs a lambda or existential placement".into(),
        ));
    }
    if placement == TypePlacement::Existential && chain.hops.len() != 2 {
        return Err(Error::Argument(
            "one-hop chains have no existential variable".into(),
        ));
    }
    let bindings = kg.chain_bindings_raw(chain)?;
    let mut out = BTreeSet::new();
    for (n1, n2) in bindings {
        let node = match placement {
            TypePlacement::Existential => n1,
            TypePlacement::Lambda => {
                if chain.hops.len() == 2 && chain.second_entity.is_some() {
                    n1 // projected variable sits between the hops
                } else {
                    n2.unwrap_or(n1)
                }
            }
            TypePlacement::None => unreachable!("checked above"),
        };
        if let Some(classes) = kg.classes_of(node) {
            out.extend(classes.iter().copied());
        }
    }
    if out.is_empty() {
        out = kg.classes().clone();
    }
    Ok(out)
}

/// Picks the class whose surface form the ranking model scores highest
/// against the question; exact ties go to the lower class id.
pub fn rank_classes<S: Scalar>(
    model: &RankingModel<S>,
    q_tokens: &[String],
    candidates: &BTreeSet<NodeId>,
    kg: &KnowledgeGraph,
    surface: &SurfaceForms,
) -> Result<NodeId> {
    if candidates.is_empty() {
        return Err(Error::Argument("rank_classes over no candidates".into()));
    }
    let ordered: Vec<NodeId> = candidates.iter().copied().collect();
    let views: Vec<ChainTokens> = ordered
        .iter()
        .map(|&c| ChainTokens::of_tokens(surface.tokens(kg.node_name(c))))
        .collect();
    let scores = model.scores(q_tokens, &views)?;
    let mut best = 0usize;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    Ok(ordered[best])
}

/// Result of assembling a query graph from predicted parts.
#[derive(Clone, Debug)]
pub struct Assembled {
    pub query_graph: QueryGraph,
    pub intent_demoted: bool,
    pub placement_demoted: bool,
}

/// Combines the top chain with predicted intent, placement and class into a
/// valid query graph. Predictions that contradict the grammar are demoted
/// rather than emitting an invalid graph: ask without a terminal grounding
/// becomes set, projection over a fully grounded one-hop chain becomes ask,
/// and an impossible placement becomes none.
pub fn assemble_query_graph(
    chain: CoreChain,
    intent: Intent,
    placement: TypePlacement,
    class: Option<NodeId>,
) -> Result<Assembled> {
    let mut intent = intent;
    let mut intent_demoted = false;
    if intent == Intent::Ask && chain.second_entity.is_none() {
        intent = Intent::Set;
        intent_demoted = true;
    } else if intent != Intent::Ask && chain.hops.len() == 1 && chain.second_entity.is_some() {
        intent = Intent::Ask;
        intent_demoted = true;
    }

    let probe = QueryGraph {
        chain: chain.clone(),
        intent,
        class_constraint: None,
    };
    let mut placement = placement;
    let mut placement_demoted = false;
    let placement_ok = match placement {
        TypePlacement::None => false,
        TypePlacement::Lambda => probe.has_lambda(),
        TypePlacement::Existential => probe.has_existential(),
    };
    if !placement_ok && placement != TypePlacement::None {
        placement = TypePlacement::None;
        placement_demoted = true;
    }

    let class_constraint = match (placement, class) {
        (TypePlacement::None, _) | (_, None) => None,
        (p, Some(c)) => Some(ClassConstraint {
            placement: p,
            class: c,
        }),
    };
    let query_graph = QueryGraph::new(chain, intent, class_constraint)?;
    Ok(Assembled {
        query_graph,
        intent_demoted,
        placement_demoted,
    })
}
