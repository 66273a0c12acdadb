//! End-to-end assembly: candidates, ranking, auxiliary predictions, query
//! construction and execution.

use serde::{Deserialize, Serialize};

use crate::auxiliary::{
    assemble_query_graph, candidate_classes, intent_from_label, placement_from_label,
    rank_classes, SequenceClassifier,
};
use crate::candidates::generate_candidates;
use crate::dataset::QAExample;
use crate::encoders::{rank_by_scores, RankingModel};
use crate::error::Result;
use crate::kg::{AnswerSet, KnowledgeGraph, NodeId};
use crate::metrics::{answer_prf, cca, mrr, EvalReport, QuestionReport};
use crate::query_graph::{ChainTokens, Intent, QueryGraph, SurfaceForms, TypePlacement};
use crate::scalar::Scalar;

/// The trained models the pipeline needs: the chain ranker and the three
/// independent auxiliary models.
pub struct PipelineModels<S> {
    pub ranker: RankingModel<S>,
    pub intent: SequenceClassifier<S>,
    pub placement: SequenceClassifier<S>,
    pub class_ranker: RankingModel<S>,
}

/// Pipeline knobs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub strict_two_entity: bool,
    /// How many top-scored chains to report alongside the answer.
    pub top_k: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            strict_two_entity: false,
            top_k: 5,
        }
    }
}

/// A ranked candidate in the answer report.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScoredChain {
    pub chain: String,
    pub score: f64,
}

/// Everything the pipeline produces for one question.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Answer {
    pub unanswerable: bool,
    pub answers: Option<AnswerSet>,
    pub query_text: Option<String>,
    pub intent: Option<Intent>,
    pub placement: TypePlacement,
    pub class: Option<String>,
    pub top_chains: Vec<ScoredChain>,
    #[serde(skip)]
    pub query_graph: Option<QueryGraph>,
    #[serde(skip)]
    pub ranked: Vec<usize>,
}

/// Runs the three phases for one question: generate candidates, rank them,
/// predict the auxiliary constraints, then execute the assembled query
/// graph. A question with no candidates is reported unanswerable.
pub fn answer_question<S: Scalar>(
    kg: &KnowledgeGraph,
    models: &PipelineModels<S>,
    surface: &SurfaceForms,
    tokens: &[String],
    entities: &[NodeId],
    config: &PipelineConfig,
) -> Result<Answer> {
    let chains = generate_candidates(kg, entities, config.strict_two_entity)?;
    if chains.is_empty() {
        return Ok(Answer {
            unanswerable: true,
            answers: None,
            query_text: None,
            intent: None,
            placement: TypePlacement::None,
            class: None,
            top_chains: Vec::new(),
            query_graph: None,
            ranked: Vec::new(),
        });
    }
    let views: Vec<ChainTokens> = chains
        .iter()
        .map(|c| ChainTokens::of_chain(c, kg, surface))
        .collect();
    let scores = models.ranker.scores(tokens, &views)?;
    let ranked = rank_by_scores(&scores);
    let top_chains: Vec<ScoredChain> = ranked
        .iter()
        .take(config.top_k)
        .map(|&i| ScoredChain {
            chain: views[i].linear.join(" "),
            score: scores[i].to_f64().expect("finite score"),
        })
        .collect();
    let best = chains[ranked[0]].clone();

    let intent = intent_from_label(models.intent.predict(tokens)?);
    let mut placement = placement_from_label(models.placement.predict(tokens)?);
    let mut class = None;
    if placement != TypePlacement::None {
        // check the placement against the chain before ranking classes
        if placement == TypePlacement::Existential && best.hops.len() != 2 {
            placement = TypePlacement::None;
        } else {
            let candidates = candidate_classes(kg, &best, placement)?;
            if candidates.is_empty() {
                placement = TypePlacement::None;
            } else {
                class = Some(rank_classes(
                    &models.class_ranker,
                    tokens,
                    &candidates,
                    kg,
                    surface,
                )?);
            }
        }
    }

    let assembled = assemble_query_graph(best, intent, placement, class)?;
    let qg = assembled.query_graph;
    let answers = kg.execute(&qg)?;
    Ok(Answer {
        unanswerable: false,
        answers: Some(answers),
        query_text: Some(qg.to_query_text(kg)?),
        intent: Some(qg.intent),
        placement: qg
            .class_constraint
            .map(|c| c.placement)
            .unwrap_or(TypePlacement::None),
        class: qg
            .class_constraint
            .map(|c| kg.node_name(c.class).to_string()),
        top_chains,
        query_graph: Some(qg),
        ranked,
    })
}

/// Evaluates the full pipeline over a dataset and aggregates chain-ranking
/// and answer metrics; the precision/recall/F1 aggregation is the macro
/// average over questions.
pub fn evaluate_pipeline<S: Scalar>(
    kg: &KnowledgeGraph,
    models: &PipelineModels<S>,
    surface: &SurfaceForms,
    dataset: &[QAExample],
    config: &PipelineConfig,
) -> Result<EvalReport> {
    let mut rank_lists = Vec::with_capacity(dataset.len());
    let mut gold_indices = Vec::with_capacity(dataset.len());
    let mut per_question = Vec::with_capacity(dataset.len());
    let (mut p_sum, mut r_sum, mut f_sum) = (0.0f64, 0.0f64, 0.0f64);
    let mut out_of_candidates = 0usize;
    let mut unanswerable = 0usize;

    for ex in dataset {
        let chains = generate_candidates(kg, &ex.entities, config.strict_two_entity)?;
        let gold = chains.iter().position(|c| c.hops == ex.gold_chain.hops);
        if gold.is_none() {
            out_of_candidates += 1;
        }
        let answer = answer_question(kg, models, surface, &ex.tokens, &ex.entities, config)?;
        if answer.unanswerable {
            unanswerable += 1;
        }
        let (p, r, f) = match &answer.answers {
            Some(a) => answer_prf(a, &ex.gold_answers),
            None => (0.0, 0.0, 0.0),
        };
        p_sum += p;
        r_sum += r;
        f_sum += f;
        let ranked = answer.ranked.clone();
        let gold_rank = gold.and_then(|g| ranked.iter().position(|&i| i == g).map(|x| x + 1));
        per_question.push(QuestionReport {
            id: ex.id.clone(),
            gold_rank,
            precision: p,
            recall: r,
            f1: f,
            intent: answer
                .intent
                .map(|i| format!("{i:?}").to_lowercase())
                .unwrap_or_else(|| "none".to_string()),
            placement: format!("{:?}", answer.placement).to_lowercase(),
            unanswerable: answer.unanswerable,
        });
        rank_lists.push(ranked);
        gold_indices.push(gold);
    }

    // rank lists may be empty for unanswerable questions; pad with an empty
    // list so the metric oracles see a miss
    let n = dataset.len() as f64;
    Ok(EvalReport {
        n_questions: dataset.len(),
        cca: cca(&rank_lists, &gold_indices)?,
        mrr: mrr(&rank_lists, &gold_indices)?,
        precision: p_sum / n,
        recall: r_sum / n,
        f1: f_sum / n,
        out_of_candidates,
        unanswerable,
        per_question,
    })
}
