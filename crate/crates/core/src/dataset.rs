//! Dataset ingestion: JSON-lines question records resolved against a loaded
//! knowledge graph.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{AnswerSet, KnowledgeGraph, NodeId};
use crate::query_graph::{tokenize, CoreChain, Direction, Intent, TypePlacement};

/// Serialized hop of a gold chain.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HopRecord {
    pub dir: Direction,
    pub predicate: String,
}

/// Serialized class-constraint annotation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TypeConstraintRecord {
    pub placement: TypePlacement,
    pub class: Option<String>,
}

/// One JSON-lines dataset record.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QARecord {
    pub id: String,
    pub question: String,
    pub entities: Vec<String>,
    pub gold_chain: Vec<HopRecord>,
    pub intent: Intent,
    pub type_constraint: TypeConstraintRecord,
    pub gold_answers: AnswerSet,
}

/// A question resolved against the knowledge graph: tokens, grounded entity
/// ids, gold chain, labels and gold answers.
#[derive(Clone, Debug, PartialEq)]
pub struct QAExample {
    pub id: String,
    pub question: String,
    pub tokens: Vec<String>,
    pub entities: Vec<NodeId>,
    pub gold_chain: CoreChain,
    pub intent: Intent,
    pub placement: TypePlacement,
    pub class: Option<NodeId>,
    pub gold_answers: AnswerSet,
}

fn resolve(record: QARecord, kg: &KnowledgeGraph, line: usize) -> Result<QAExample> {
    let schema = |msg: String| Error::Schema { line, msg };
    if record.entities.is_empty() || record.entities.len() > 2 {
        return Err(schema(format!(
            "entities: expected 1 or 2, got {}",
            record.entities.len()
        )));
    }
    if record.gold_chain.is_empty() || record.gold_chain.len() > 2 {
        return Err(schema(format!(
            "gold_chain: expected 1 or 2 hops, got {}",
            record.gold_chain.len()
        )));
    }
    let tokens = tokenize(&record.question);
    if tokens.is_empty() {
        return Err(schema("question: no tokens".into()));
    }
    let entities: Vec<NodeId> = record
        .entities
        .iter()
        .map(|iri| {
            kg.node_id(iri)
                .map_err(|_| schema(format!("entities: unknown iri {iri:?}")))
        })
        .collect::<Result<_>>()?;
    let hops: Vec<(Direction, crate::kg::PredId)> = record
        .gold_chain
        .iter()
        .map(|h| {
            kg.pred_id(&h.predicate)
                .map(|p| (h.dir, p))
                .map_err(|_| schema(format!("gold_chain: unknown predicate {:?}", h.predicate)))
        })
        .collect::<Result<_>>()?;
    let class = match (&record.type_constraint.placement, &record.type_constraint.class) {
        (TypePlacement::None, Some(_)) => {
            return Err(schema("type_constraint: class given with placement none".into()))
        }
        (TypePlacement::None, None) => None,
        (_, None) => {
            return Err(schema("type_constraint: placement without a class".into()))
        }
        (_, Some(iri)) => Some(
            kg.node_id(iri)
                .map_err(|_| schema(format!("type_constraint: unknown class {iri:?}")))?,
        ),
    };
    let gold_chain = CoreChain::new(entities[0], hops, entities.get(1).copied())
        .map_err(|e| schema(e.to_string()))?;
    Ok(QAExample {
        id: record.id,
        question: record.question,
        tokens,
        entities,
        gold_chain,
        intent: record.intent,
        placement: record.type_constraint.placement,
        class,
        gold_answers: record.gold_answers,
    })
}

/// Loads a JSON-lines dataset, rejecting invalid records with their line
/// number and offending field.
pub fn load_dataset(path: &Path, kg: &KnowledgeGraph) -> Result<Vec<QAExample>> {
    let text = fs::read_to_string(path)?;
    parse_dataset(&text, kg)
}

pub fn parse_dataset(text: &str, kg: &KnowledgeGraph) -> Result<Vec<QAExample>> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let record: QARecord = serde_json::from_str(trimmed).map_err(|e| Error::Schema {
            line: idx + 1,
            msg: e.to_string(),
        })?;
        out.push(resolve(record, kg, idx + 1)?);
    }
    Ok(out)
}

/// Serializes examples back to the JSON-lines record form.
pub fn to_records(examples: &[QAExample], kg: &KnowledgeGraph) -> Vec<QARecord> {
    examples
        .iter()
        .map(|ex| QARecord {
            id: ex.id.clone(),
            question: ex.question.clone(),
            entities: ex
                .entities
                .iter()
                .map(|&e| kg.node_name(e).to_string())
                .collect(),
            gold_chain: ex
                .gold_chain
                .hops
                .iter()
                .map(|&(dir, p)| HopRecord {
                    dir,
                    predicate: kg.pred_name(p).to_string(),
                })
                .collect(),
            intent: ex.intent,
            type_constraint: TypeConstraintRecord {
                placement: ex.placement,
                class: ex.class.map(|c| kg.node_name(c).to_string()),
            },
            gold_answers: ex.gold_answers.clone(),
        })
        .collect()
}

/// Writes records as JSON lines.
pub fn write_records(records: &[QARecord], path: &Path) -> Result<()> {
    let mut text = String::new();
    for r in records {
        text.push_str(&serde_json::to_string(r)?);
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

/// Deterministic seeded split into train/validation/test fractions.
pub fn split_dataset(
    examples: &[QAExample],
    fractions: (f64, f64),
    seed: u64,
) -> (Vec<QAExample>, Vec<QAExample>, Vec<QAExample>) {
    use rand::seq::SliceRandom;
    use rand_chacha::rand_core::SeedableRng;
    let mut idx: Vec<usize> = (0..examples.len()).collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let n = examples.len();
    let n_train = (n as f64 * fractions.0).round() as usize;
    let n_val = (n as f64 * fractions.1).round() as usize;
    let pick = |ids: &[usize]| ids.iter().map(|&i| examples[i].clone()).collect::<Vec<_>>();
    (
        pick(&idx[..n_train.min(n)]),
        pick(&idx[n_train.min(n)..(n_train + n_val).min(n)]),
        pick(&idx[(n_train + n_val).min(n)..]),
    )
}
