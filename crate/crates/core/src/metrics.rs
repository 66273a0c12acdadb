//! Ranking and answer metrics: core-chain accuracy, mean reciprocal rank,
//! and precision/recall/F1 of executed answers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::AnswerSet;

fn gold_rank(ranked: &[usize], gold: Option<usize>) -> Option<usize> {
    let g = gold?;
    ranked.iter().position(|&i| i == g).map(|p| p + 1)
}

fn check_aligned(rank_lists: &[Vec<usize>], gold: &[Option<usize>]) -> Result<()> {
    if rank_lists.is_empty() {
        return Err(Error::Argument("metrics over zero questions".into()));
    }
    if rank_lists.len() != gold.len() {
        return Err(Error::Argument(format!(
            "{} rank lists vs {} gold indices",
            rank_lists.len(),
            gold.len()
        )));
    }
    Ok(())
}

/// Fraction of questions whose gold candidate is ranked first. A gold chain
/// absent from its list counts as a miss.
pub fn cca(rank_lists: &[Vec<usize>], gold: &[Option<usize>]) -> Result<f64> {
    check_aligned(rank_lists, gold)?;
    let hits = rank_lists
        .iter()
        .zip(gold)
        .filter(|(ranked, &g)| gold_rank(ranked, g) == Some(1))
        .count();
    Ok(hits as f64 / rank_lists.len() as f64)
}

/// Mean reciprocal rank of the gold candidates; an absent gold contributes
/// reciprocal rank zero.
pub fn mrr(rank_lists: &[Vec<usize>], gold: &[Option<usize>]) -> Result<f64> {
    check_aligned(rank_lists, gold)?;
    let sum: f64 = rank_lists
        .iter()
        .zip(gold)
        .map(|(ranked, &g)| match gold_rank(ranked, g) {
            Some(r) => 1.0 / r as f64,
            None => 0.0,
        })
        .sum();
    Ok(sum / rank_lists.len() as f64)
}

/// Precision, recall and F1 of a predicted answer set against gold. Count
/// and boolean answers score all-or-nothing; mismatched kinds score zero;
/// two empty entity sets count as an exact match.
pub fn answer_prf(predicted: &AnswerSet, gold: &AnswerSet) -> (f64, f64, f64) {
    match (predicted, gold) {
        (AnswerSet::Entities { values: p }, AnswerSet::Entities { values: g }) => {
            if p.is_empty() && g.is_empty() {
                return (1.0, 1.0, 1.0);
            }
            if p.is_empty() || g.is_empty() {
                return (0.0, 0.0, 0.0);
            }
            let inter = p.intersection(g).count() as f64;
            let precision = inter / p.len() as f64;
            let recall = inter / g.len() as f64;
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            (precision, recall, f1)
        }
        (AnswerSet::Count { value: p }, AnswerSet::Count { value: g }) => {
            if p == g {
                (1.0, 1.0, 1.0)
            } else {
                (0.0, 0.0, 0.0)
            }
        }
        (AnswerSet::Boolean { value: p }, AnswerSet::Boolean { value: g })
            if p == g => {
                (1.0, 1.0, 1.0)
            }
        _ => (0.0, 0.0, 0.0),
    }
}

/// Per-question evaluation detail.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuestionReport {
    pub id: String,
    /// 1-based rank of the gold chain, absent when out of the candidate set.
    pub gold_rank: Option<usize>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub intent: String,
    pub placement: String,
    pub unanswerable: bool,
}

/// Aggregated pipeline evaluation: chain ranking metrics plus macro-averaged
/// execution metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_questions: usize,
    pub cca: f64,
    pub mrr: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Questions whose gold chain was not among the candidates.
    pub out_of_candidates: usize,
    /// Questions with no candidates at all.
    pub unanswerable: usize,
    pub per_question: Vec<QuestionReport>,
}
