//! The six ranking configurations: BiLSTM dot, BiLSTM dense-dot, CNN dot,
//! slot-matching dot, decomposable-attention dot and hierarchical-residual
//! dot. Each pairs a question encoder and a chain encoder with a compare
//! function producing one scalar similarity per candidate.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autodiff::layers::{bilstm, conv_encode, dense_tanh, BiLstm, ConvBlock, Dense};
use crate::autodiff::{NodeId, ParamInit, ParamStore, Tape};
use crate::error::{Error, Result};
use crate::query_graph::ChainTokens;
use crate::scalar::{lit, Scalar};
use crate::vocab::Vocabulary;

/// Which encoder/compare configuration a model uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "bilstm-dot")]
    BilstmDot,
    #[serde(rename = "bilstm-dense-dot")]
    BilstmDenseDot,
    #[serde(rename = "cnn-dot")]
    CnnDot,
    #[serde(rename = "slot-dot")]
    SlotDot,
    #[serde(rename = "dam-dot")]
    DamDot,
    #[serde(rename = "hrm-dot")]
    HrmDot,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::BilstmDot,
        ModelKind::BilstmDenseDot,
        ModelKind::CnnDot,
        ModelKind::SlotDot,
        ModelKind::DamDot,
        ModelKind::HrmDot,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::BilstmDot => "bilstm-dot",
            ModelKind::BilstmDenseDot => "bilstm-dense-dot",
            ModelKind::CnnDot => "cnn-dot",
            ModelKind::SlotDot => "slot-dot",
            ModelKind::DamDot => "dam-dot",
            ModelKind::HrmDot => "hrm-dot",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Argument(format!("unknown model kind {s:?}")))
    }
}

/// Hyperparameters of one ranking model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    /// Word-embedding width.
    pub d_emb: usize,
    /// Per-direction LSTM hidden width; encoders output `2 * hidden`.
    pub hidden: usize,
    /// Convolution filters per window width (CNN kind).
    pub cnn_filters: usize,
    /// Alias the chain-encoder parameters onto the question encoder's.
    pub share_encoders: bool,
    /// Seed for parameter initialization.
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(kind: ModelKind) -> Self {
        ModelConfig {
            kind,
            d_emb: 300,
            hidden: 150,
            cnn_filters: 100,
            share_encoders: false,
            seed: 0,
        }
    }

    /// Shrunk dimensions for fast experiments; keeps `2*hidden == d_emb`.
    pub fn desk(kind: ModelKind, d_emb: usize, seed: u64) -> Self {
        ModelConfig {
            kind,
            d_emb,
            hidden: d_emb / 2,
            cnn_filters: 4,
            share_encoders: false,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.d_emb == 0 || self.hidden == 0 {
            return Err(Error::Config("zero model dimensions".into()));
        }
        if self.kind == ModelKind::SlotDot && 2 * self.hidden != self.d_emb {
            return Err(Error::Config(format!(
                "slot matching adds embeddings to hidden states, needs 2*hidden == d_emb, got 2*{} != {}",
                self.hidden, self.d_emb
            )));
        }
        if self.kind == ModelKind::CnnDot && self.cnn_filters == 0 {
            return Err(Error::Config("cnn needs at least one filter".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
enum Arch {
    Bilstm {
        q: BiLstm,
        c: BiLstm,
        ff: Option<Dense>,
    },
    Cnn {
        q: ConvBlock,
        c: ConvBlock,
    },
    Slot {
        q: BiLstm,
        c: BiLstm,
        k1: usize,
        k2: usize,
    },
    Dam {
        q: BiLstm,
        c: BiLstm,
        cmp: Dense,
    },
    Hrm {
        q: BiLstm,
        q2: BiLstm,
        cw: BiLstm,
        cp: BiLstm,
        pred_emb: usize,
    },
}

/// Token-id view of one candidate, precomputed so scoring loops never touch
/// strings or the graph.
#[derive(Clone, Debug)]
pub struct PreparedChain {
    pub linear: Vec<u32>,
    pub hop1: Vec<u32>,
    pub hop2: Vec<u32>,
    pub pred_rows: Vec<usize>,
}

/// Slot-matching question encoding: both slot vectors and the two attention
/// rows.
pub type SlotQuestionEncoding<S> = (Vec<S>, Vec<S>, [Vec<S>; 2]);

/// A pair of cross-attention weight matrices.
pub type AttentionMatrices<S> = (Vec<Vec<S>>, Vec<Vec<S>>);

/// Question-side encoding cached on a tape and reused for every candidate of
/// that question.
pub enum QuestionEnc {
    /// Final vector (BiLSTM, CNN, HRM; already feed-forwarded for dense-dot).
    Vector(NodeId),
    /// Slot-matching representations plus their attention rows.
    Slot {
        q1: NodeId,
        q2: NodeId,
        attn1: NodeId,
        attn2: NodeId,
    },
    /// Per-step states for cross-attention plus the final state.
    Dam { states: Vec<NodeId>, last: NodeId },
}

/// A named-parameter ranking model: one encoder pair plus a compare function.
#[derive(Clone, Debug)]
pub struct RankingModel<S> {
    config: ModelConfig,
    vocab: Vocabulary,
    n_predicates: usize,
    params: ParamStore<S>,
    emb: usize,
    arch: Arch,
}

impl<S: Scalar> RankingModel<S> {
    /// Builds a freshly initialized model.
    pub fn new(config: ModelConfig, vocab: Vocabulary, n_predicates: usize) -> Result<Self> {
        config.validate()?;
        let mut params = ParamStore::new();
        let mut init = ParamInit::new(config.seed);
        let (emb, arch) = build_arch(&config, vocab.len(), n_predicates, &mut params, &mut init)?;
        Ok(RankingModel {
            config,
            vocab,
            n_predicates,
            params,
            emb,
            arch,
        })
    }

    /// Rebuilds a model around restored parameters (checkpoint load). The
    /// parameter names must match what `new` would register.
    pub fn from_parts(
        config: ModelConfig,
        vocab: Vocabulary,
        n_predicates: usize,
        params: ParamStore<S>,
    ) -> Result<Self> {
        let rebuilt = Self::new(config, vocab, n_predicates)?;
        let expect: Vec<(String, usize)> = rebuilt
            .params
            .names()
            .map(|(n, s)| (n.to_string(), s))
            .collect();
        let got: Vec<(String, usize)> = params.names().map(|(n, s)| (n.to_string(), s)).collect();
        if expect != got {
            return Err(Error::Checkpoint(
                "parameter names do not match the model configuration".into(),
            ));
        }
        for slot in 0..params.n_slots() {
            if params.get(slot).shape() != rebuilt.params.get(slot).shape() {
                return Err(Error::Checkpoint(format!(
                    "parameter slot {slot} has shape {:?}, expected {:?}",
                    params.get(slot).shape(),
                    rebuilt.params.get(slot).shape()
                )));
            }
        }
        Ok(RankingModel { params, ..rebuilt })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn kind(&self) -> ModelKind {
        self.config.kind
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn n_predicates(&self) -> usize {
        self.n_predicates
    }

    pub fn params(&self) -> &ParamStore<S> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<S> {
        &mut self.params
    }

    /// Overwrites embedding rows with pretrained vectors.
    pub fn set_embedding_rows(&mut self, rows: &[(usize, Vec<f64>)]) -> Result<()> {
        let d = self.config.d_emb;
        let emb = self.params.get_mut(self.emb);
        for (row, values) in rows {
            if values.len() != d {
                return Err(Error::Dimension {
                    op: "set_embedding_rows",
                    lhs: vec![values.len()],
                    rhs: vec![d],
                });
            }
            let data = emb.data_mut();
            for (k, &v) in values.iter().enumerate() {
                data[row * d + k] = lit(v);
            }
        }
        Ok(())
    }

    /// Number of trainable scalars over distinct parameter slots.
    pub fn trainable_parameters(&self) -> usize {
        self.params.trainable_len()
    }

    pub fn prepare_question(&self, tokens: &[String]) -> Vec<u32> {
        self.vocab.ids(tokens)
    }

    pub fn prepare_chain(&self, tokens: &ChainTokens) -> Result<PreparedChain> {
        let mut pred_rows = Vec::with_capacity(tokens.predicates.len());
        for p in &tokens.predicates {
            let row = p.0 as usize;
            if row >= self.n_predicates.max(1) {
                return Err(Error::Argument(format!(
                    "predicate id {row} out of range for this model"
                )));
            }
            pred_rows.push(row);
        }
        Ok(PreparedChain {
            linear: self.vocab.ids(&tokens.linear),
            hop1: self.vocab.ids(&tokens.hop1),
            hop2: self.vocab.ids(&tokens.hop2),
            pred_rows,
        })
    }

    fn embed(&self, tape: &mut Tape<S>, ids: &[u32]) -> Result<Vec<NodeId>> {
        let emb = tape.param(&self.params, self.emb);
        ids.iter()
            .map(|&id| tape.row(emb, id as usize))
            .collect()
    }

    fn padded(&self, ids: &[u32], min_len: usize) -> Vec<u32> {
        let mut out = ids.to_vec();
        while out.len() < min_len {
            out.push(self.vocab.pad_id());
        }
        out
    }

    /// Encodes the question once per tape; every candidate of the question
    /// reuses the result.
    pub fn question_encoding(&self, tape: &mut Tape<S>, q_ids: &[u32]) -> Result<QuestionEnc> {
        if q_ids.is_empty() {
            return Err(Error::Argument("empty question token sequence".into()));
        }
        match &self.arch {
            Arch::Bilstm { q, ff, .. } => {
                let rows = self.embed(tape, q_ids)?;
                let (_, last) = bilstm(tape, &self.params, q, &rows)?;
                let vec = match ff {
                    Some(ff) => dense_tanh(tape, &self.params, ff, last)?,
                    None => last,
                };
                Ok(QuestionEnc::Vector(vec))
            }
            Arch::Cnn { q, .. } => {
                let ids = self.padded(q_ids, ConvBlock::WIDTHS[2]);
                let rows = self.embed(tape, &ids)?;
                let vec = conv_encode(tape, &self.params, q, &rows)?;
                Ok(QuestionEnc::Vector(vec))
            }
            Arch::Slot { q, k1, k2, .. } => {
                let rows = self.embed(tape, q_ids)?;
                let (states, _) = bilstm(tape, &self.params, q, &rows)?;
                let mixins: Vec<NodeId> = rows
                    .iter()
                    .zip(&states)
                    .map(|(&e, &h)| tape.add(e, h))
                    .collect::<Result<_>>()?;
                let slot = |k_slot: usize, tape: &mut Tape<S>| -> Result<(NodeId, NodeId)> {
                    let k = tape.param(&self.params, k_slot);
                    let scores: Vec<NodeId> = states
                        .iter()
                        .map(|&h| tape.dot(h, k))
                        .collect::<Result<_>>()?;
                    let stacked = tape.stack_scalars(&scores)?;
                    let attn = tape.softmax(stacked)?;
                    let mixed = tape.attn_mix(attn, &mixins)?;
                    Ok((mixed, attn))
                };
                let (q1, attn1) = slot(*k1, tape)?;
                let (q2, attn2) = slot(*k2, tape)?;
                Ok(QuestionEnc::Slot {
                    q1,
                    q2,
                    attn1,
                    attn2,
                })
            }
            Arch::Dam { q, .. } => {
                let rows = self.embed(tape, q_ids)?;
                let (states, last) = bilstm(tape, &self.params, q, &rows)?;
                Ok(QuestionEnc::Dam { states, last })
            }
            Arch::Hrm { q, q2, .. } => {
                let rows = self.embed(tape, q_ids)?;
                let (states, last1) = bilstm(tape, &self.params, q, &rows)?;
                let (_, last2) = bilstm(tape, &self.params, q2, &states)?;
                let sum = tape.add(last1, last2)?;
                let vec = tape.scale(sum, lit(0.5))?;
                Ok(QuestionEnc::Vector(vec))
            }
        }
    }

    /// Similarity score of one candidate against a cached question encoding.
    pub fn candidate_score(
        &self,
        tape: &mut Tape<S>,
        enc: &QuestionEnc,
        chain: &PreparedChain,
    ) -> Result<NodeId> {
        match (&self.arch, enc) {
            (Arch::Bilstm { c, ff, .. }, QuestionEnc::Vector(qv)) => {
                let rows = self.embed(tape, &chain.linear)?;
                let (_, last) = bilstm(tape, &self.params, c, &rows)?;
                let cv = match ff {
                    Some(ff) => dense_tanh(tape, &self.params, ff, last)?,
                    None => last,
                };
                tape.dot(*qv, cv)
            }
            (Arch::Cnn { c, .. }, QuestionEnc::Vector(qv)) => {
                let ids = self.padded(&chain.linear, ConvBlock::WIDTHS[2]);
                let rows = self.embed(tape, &ids)?;
                let cv = conv_encode(tape, &self.params, c, &rows)?;
                tape.dot(*qv, cv)
            }
            (Arch::Slot { c, .. }, QuestionEnc::Slot { q1, q2, .. }) => {
                let hop_vec = |ids: &[u32], tape: &mut Tape<S>| -> Result<NodeId> {
                    let rows = self.embed(tape, ids)?;
                    let (_, last) = bilstm(tape, &self.params, c, &rows)?;
                    let mean = tape.mean_rows(&rows)?;
                    tape.add(last, mean)
                };
                let c1 = hop_vec(&chain.hop1, tape)?;
                let c2 = hop_vec(&chain.hop2, tape)?;
                let qcat = tape.concat(&[*q1, *q2])?;
                let ccat = tape.concat(&[c1, c2])?;
                tape.dot(qcat, ccat)
            }
            (Arch::Dam { c, cmp, .. }, QuestionEnc::Dam { states, last }) => {
                let rows = self.embed(tape, &chain.linear)?;
                let (c_states, c_last) = bilstm(tape, &self.params, c, &rows)?;
                let (qv, cv) =
                    dam_pair(tape, &self.params, cmp, states, *last, &c_states, c_last)?;
                tape.dot(qv, cv)
            }
            (Arch::Hrm { cw, cp, pred_emb, .. }, QuestionEnc::Vector(qv)) => {
                let rows = self.embed(tape, &chain.linear)?;
                let (w_states, _) = bilstm(tape, &self.params, cw, &rows)?;
                let w_mean = tape.mean_rows(&w_states)?;
                if chain.pred_rows.is_empty() {
                    return Err(Error::Argument(
                        "hierarchical chain encoder needs predicate ids".into(),
                    ));
                }
                let table = tape.param(&self.params, *pred_emb);
                let units: Vec<NodeId> = chain
                    .pred_rows
                    .iter()
                    .map(|&r| tape.row(table, r))
                    .collect::<Result<_>>()?;
                let (p_states, _) = bilstm(tape, &self.params, cp, &units)?;
                let p_mean = tape.mean_rows(&p_states)?;
                let sum = tape.add(w_mean, p_mean)?;
                let cv = tape.scale(sum, lit(0.5))?;
                tape.dot(*qv, cv)
            }
            _ => Err(Error::Config(
                "question encoding does not match the model kind".into(),
            )),
        }
    }

    /// One-off similarity of a question and a candidate chain.
    pub fn sim(&self, q_tokens: &[String], chain: &ChainTokens) -> Result<S> {
        let mut tape = Tape::new();
        let q_ids = self.prepare_question(q_tokens);
        let enc = self.question_encoding(&mut tape, &q_ids)?;
        let prepared = self.prepare_chain(chain)?;
        let score = self.candidate_score(&mut tape, &enc, &prepared)?;
        tape.item(score)
    }

    /// Scores every candidate on one tape, reusing the question encoding.
    pub fn scores(&self, q_tokens: &[String], candidates: &[ChainTokens]) -> Result<Vec<S>> {
        let mut tape = Tape::new();
        let q_ids = self.prepare_question(q_tokens);
        let enc = self.question_encoding(&mut tape, &q_ids)?;
        let mut out = Vec::with_capacity(candidates.len());
        for chain in candidates {
            let prepared = self.prepare_chain(chain)?;
            let node = self.candidate_score(&mut tape, &enc, &prepared)?;
            out.push(tape.item(node)?);
        }
        Ok(out)
    }

    /// Candidate indices ordered by descending similarity; ties go to the
    /// lower index.
    pub fn rank(&self, q_tokens: &[String], candidates: &[ChainTokens]) -> Result<Vec<usize>> {
        if candidates.is_empty() {
            return Err(Error::Argument("rank over an empty candidate list".into()));
        }
        let scores = self.scores(q_tokens, candidates)?;
        Ok(rank_by_scores(&scores))
    }

    /// Slot-attention weights per question token: rows ordered slot 1 then
    /// slot 2, one `(slot, token, weight)` entry per column.
    pub fn export_attention(&self, q_tokens: &[String]) -> Result<Vec<(usize, String, S)>> {
        if self.config.kind != ModelKind::SlotDot {
            return Err(Error::Argument(format!(
                "attention export needs a slot-matching model, this one is {}",
                self.config.kind
            )));
        }
        let mut tape = Tape::new();
        let q_ids = self.prepare_question(q_tokens);
        let enc = self.question_encoding(&mut tape, &q_ids)?;
        let (attn1, attn2) = match enc {
            QuestionEnc::Slot { attn1, attn2, .. } => (attn1, attn2),
            _ => unreachable!("slot kind yields slot encoding"),
        };
        let mut out = Vec::with_capacity(2 * q_tokens.len());
        for (slot, attn) in [(1usize, attn1), (2usize, attn2)] {
            let weights = tape.value(attn).data();
            for (tok, &w) in q_tokens.iter().zip(weights) {
                out.push((slot, tok.clone(), w));
            }
        }
        Ok(out)
    }

    /// Clone of this model around a different parameter store (used by the
    /// finite-difference oracle).
    pub fn with_params(&self, params: ParamStore<S>) -> Self {
        RankingModel {
            params,
            ..self.clone()
        }
    }

    /// Slot-matching question encoding: the two slot representations plus
    /// their attention rows over the question tokens.
    pub fn slot_question_encoding(
        &self,
        q_tokens: &[String],
    ) -> Result<SlotQuestionEncoding<S>> {
        if self.config.kind != ModelKind::SlotDot {
            return Err(Error::Argument(
                "slot encodings need a slot-matching model".into(),
            ));
        }
        let mut tape = Tape::new();
        let ids = self.prepare_question(q_tokens);
        match self.question_encoding(&mut tape, &ids)? {
            QuestionEnc::Slot {
                q1,
                q2,
                attn1,
                attn2,
            } => Ok((
                tape.value(q1).data().to_vec(),
                tape.value(q2).data().to_vec(),
                [
                    tape.value(attn1).data().to_vec(),
                    tape.value(attn2).data().to_vec(),
                ],
            )),
            _ => unreachable!("slot kind yields slot encoding"),
        }
    }

    /// Slot-matching chain encoding: one vector per hop slot, the second
    /// falling back to the shared `NO_HOP` encoding for one-hop chains.
    pub fn slot_chain_encoding(&self, chain: &ChainTokens) -> Result<(Vec<S>, Vec<S>)> {
        let c = match &self.arch {
            Arch::Slot { c, .. } => c,
            _ => {
                return Err(Error::Argument(
                    "slot encodings need a slot-matching model".into(),
                ))
            }
        };
        let prepared = self.prepare_chain(chain)?;
        let mut tape = Tape::new();
        let hop_vec = |ids: &[u32], tape: &mut Tape<S>| -> Result<NodeId> {
            let rows = self.embed(tape, ids)?;
            let (_, last) = bilstm(tape, &self.params, c, &rows)?;
            let mean = tape.mean_rows(&rows)?;
            tape.add(last, mean)
        };
        let c1 = hop_vec(&prepared.hop1, &mut tape)?;
        let c2 = hop_vec(&prepared.hop2, &mut tape)?;
        Ok((
            tape.value(c1).data().to_vec(),
            tape.value(c2).data().to_vec(),
        ))
    }

    /// Question-side vector for single-vector kinds (diagnostics and tests).
    pub fn question_vector(&self, q_tokens: &[String]) -> Result<Vec<S>> {
        let mut tape = Tape::new();
        let q_ids = self.prepare_question(q_tokens);
        match self.question_encoding(&mut tape, &q_ids)? {
            QuestionEnc::Vector(v) => Ok(tape.value(v).data().to_vec()),
            _ => Err(Error::Argument(
                "question_vector applies to single-vector model kinds".into(),
            )),
        }
    }

    /// Chain-side vector for single-vector kinds (diagnostics and tests).
    pub fn chain_vector(&self, chain: &ChainTokens) -> Result<Vec<S>> {
        let mut tape = Tape::new();
        let prepared = self.prepare_chain(chain)?;
        match &self.arch {
            Arch::Bilstm { c, ff, .. } => {
                let rows = self.embed(&mut tape, &prepared.linear)?;
                let (_, last) = bilstm(&mut tape, &self.params, c, &rows)?;
                let cv = match ff {
                    Some(ff) => dense_tanh(&mut tape, &self.params, ff, last)?,
                    None => last,
                };
                Ok(tape.value(cv).data().to_vec())
            }
            _ => Err(Error::Argument(
                "chain_vector applies to the BiLSTM kinds".into(),
            )),
        }
    }

    /// Both cross-attention weight matrices of the decomposable-attention
    /// model: question-to-chain rows and chain-to-question rows.
    pub fn dam_attention(
        &self,
        q_tokens: &[String],
        chain: &ChainTokens,
    ) -> Result<AttentionMatrices<S>> {
        let (q, c) = match &self.arch {
            Arch::Dam { q, c, .. } => (q, c),
            _ => {
                return Err(Error::Argument(
                    "dam_attention needs a decomposable-attention model".into(),
                ))
            }
        };
        let mut tape = Tape::new();
        let q_rows = self.embed(&mut tape, &self.prepare_question(q_tokens))?;
        let (a, _) = bilstm(&mut tape, &self.params, q, &q_rows)?;
        let prepared = self.prepare_chain(chain)?;
        let c_rows = self.embed(&mut tape, &prepared.linear)?;
        let (b, _) = bilstm(&mut tape, &self.params, c, &c_rows)?;
        let scores = cross_scores(&mut tape, &a, &b)?;
        let mut q2c = Vec::with_capacity(a.len());
        for row_scores in &scores {
            let row = tape.stack_scalars(row_scores)?;
            let soft = tape.softmax(row)?;
            q2c.push(tape.value(soft).data().to_vec());
        }
        let mut c2q = Vec::with_capacity(b.len());
        for j in 0..b.len() {
            let col: Vec<NodeId> = scores.iter().map(|row| row[j]).collect();
            let stacked = tape.stack_scalars(&col)?;
            let soft = tape.softmax(stacked)?;
            c2q.push(tape.value(soft).data().to_vec());
        }
        Ok((q2c, c2q))
    }
}

fn build_arch<S: Scalar>(
    config: &ModelConfig,
    vocab_len: usize,
    n_predicates: usize,
    params: &mut ParamStore<S>,
    init: &mut ParamInit,
) -> Result<(usize, Arch)> {
    let d = config.d_emb;
    let h = config.hidden;
    let emb = params.register("emb", init.glorot(&[vocab_len, d], d, d))?;
    let arch = match config.kind {
        ModelKind::BilstmDot | ModelKind::BilstmDenseDot => {
            let q = BiLstm::register(params, init, "q_enc", d, h)?;
            let c = if config.share_encoders {
                BiLstm::alias(params, &q, "c_enc")?
            } else {
                BiLstm::register(params, init, "c_enc", d, h)?
            };
            let ff = if config.kind == ModelKind::BilstmDenseDot {
                Some(Dense::register(params, init, "ff", 2 * h, 2 * h)?)
            } else {
                None
            };
            Arch::Bilstm { q, c, ff }
        }
        ModelKind::CnnDot => {
            let q = ConvBlock::register(params, init, "q_enc", d, config.cnn_filters, 2 * h)?;
            let c = if config.share_encoders {
                ConvBlock::alias(params, &q, "c_enc")?
            } else {
                ConvBlock::register(params, init, "c_enc", d, config.cnn_filters, 2 * h)?
            };
            Arch::Cnn { q, c }
        }
        ModelKind::SlotDot => {
            let q = BiLstm::register(params, init, "q_enc", d, h)?;
            let c = if config.share_encoders {
                BiLstm::alias(params, &q, "c_enc")?
            } else {
                BiLstm::register(params, init, "c_enc", d, h)?
            };
            let k1 = params.register("slot.k1", init.glorot(&[2 * h], 2 * h, 1))?;
            let k2 = params.register("slot.k2", init.glorot(&[2 * h], 2 * h, 1))?;
            Arch::Slot { q, c, k1, k2 }
        }
        ModelKind::DamDot => {
            let q = BiLstm::register(params, init, "q_enc", d, h)?;
            let c = if config.share_encoders {
                BiLstm::alias(params, &q, "c_enc")?
            } else {
                BiLstm::register(params, init, "c_enc", d, h)?
            };
            let cmp = Dense::register(params, init, "dam.cmp", 4 * h, 2 * h)?;
            Arch::Dam { q, c, cmp }
        }
        ModelKind::HrmDot => {
            let q = BiLstm::register(params, init, "q_enc", d, h)?;
            let q2 = BiLstm::register(params, init, "hrm.q2", 2 * h, h)?;
            let cw = if config.share_encoders {
                BiLstm::alias(params, &q, "c_enc")?
            } else {
                BiLstm::register(params, init, "c_enc", d, h)?
            };
            let cp = BiLstm::register(params, init, "hrm.cp", d, h)?;
            let pred_emb = params.register(
                "hrm.pred_emb",
                init.glorot(&[n_predicates.max(1), d], d, d),
            )?;
            Arch::Hrm {
                q,
                q2,
                cw,
                cp,
                pred_emb,
            }
        }
    };
    Ok((emb, arch))
}

/// Raw alignment scores between two state sequences.
fn cross_scores<S: Scalar>(
    tape: &mut Tape<S>,
    a: &[NodeId],
    b: &[NodeId],
) -> Result<Vec<Vec<NodeId>>> {
    a.iter()
        .map(|&ai| b.iter().map(|&bj| tape.dot(ai, bj)).collect())
        .collect()
}

/// Attend-align-compare over two encoded sequences, returning the pair of
/// vectors `[last ; summed compare features]` for each side.
#[allow(clippy::too_many_arguments)]
fn dam_pair<S: Scalar>(
    tape: &mut Tape<S>,
    params: &ParamStore<S>,
    cmp: &Dense,
    a: &[NodeId],
    a_last: NodeId,
    b: &[NodeId],
    b_last: NodeId,
) -> Result<(NodeId, NodeId)> {
    let scores = cross_scores(tape, a, b)?;
    let mut compared_a = Vec::with_capacity(a.len());
    for i in 0..a.len() {
        let row = tape.stack_scalars(&scores[i])?;
        let attn = tape.softmax(row)?;
        let aligned = tape.attn_mix(attn, b)?;
        let cat = tape.concat(&[a[i], aligned])?;
        compared_a.push(dense_tanh(tape, params, cmp, cat)?);
    }
    let mut compared_b = Vec::with_capacity(b.len());
    for j in 0..b.len() {
        let col: Vec<NodeId> = (0..a.len()).map(|i| scores[i][j]).collect();
        let stacked = tape.stack_scalars(&col)?;
        let attn = tape.softmax(stacked)?;
        let aligned = tape.attn_mix(attn, a)?;
        let cat = tape.concat(&[b[j], aligned])?;
        compared_b.push(dense_tanh(tape, params, cmp, cat)?);
    }
    let sum_a = tape.sum_rows(&compared_a)?;
    let sum_b = tape.sum_rows(&compared_b)?;
    let qv = tape.concat(&[a_last, sum_a])?;
    let cv = tape.concat(&[b_last, sum_b])?;
    Ok((qv, cv))
}

/// Formats exported attention rows as TSV; weights print in the shortest
/// form that parses back to the same number.
pub fn attention_tsv<S: Scalar>(rows: &[(usize, String, S)]) -> String {
    let mut out = String::from("slot\ttoken\tweight\n");
    for (slot, token, weight) in rows {
        out.push_str(&format!("{slot}\t{token}\t{weight}\n"));
    }
    out
}

/// Indices sorted by descending score with ties broken by lower index.
pub fn rank_by_scores<S: Scalar>(scores: &[S]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    idx
}
