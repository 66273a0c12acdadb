//! Core-chain candidate enumeration over the knowledge graph.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{KnowledgeGraph, NodeId};
use crate::query_graph::{CoreChain, Direction};

/// Enumerates every distinct core chain of up to two hops rooted at the
/// question's entities.
///
/// With one entity, all realized one- and two-hop chains from it are
/// returned. With two entities, chains must end at the second entity: the
/// two-hop chains leave the answer node in between, and unless
/// `strict_two_entity` is set the direct one-hop connections are kept as
/// well (boolean questions need them). Type assertions never contribute
/// hops. Output is deduplicated and sorted by (sign, predicate) sequence.
pub fn generate_candidates(
    kg: &KnowledgeGraph,
    entities: &[NodeId],
    strict_two_entity: bool,
) -> Result<Vec<CoreChain>> {
    if entities.is_empty() || entities.len() > 2 {
        return Err(Error::Argument(format!(
            "expected 1 or 2 grounded entities, got {}",
            entities.len()
        )));
    }
    let root = entities[0];
    let target = entities.get(1).copied();
    kg.check_node(root)?;
    if let Some(t) = target {
        kg.check_node(t)?;
    }
    if kg.is_literal(root) {
        return Err(Error::Argument(
            "a literal cannot root a core chain".into(),
        ));
    }

    let mut found: BTreeSet<CoreChain> = BTreeSet::new();
    let dirs = [Direction::Forward, Direction::Reverse];
    for d1 in dirs {
        for &(p1, n1) in kg.neighbors(root, d1)? {
            match target {
                None => {
                    found.insert(CoreChain::new(root, vec![(d1, p1)], None)?);
                }
                Some(t) if !strict_two_entity && n1 == t => {
                    found.insert(CoreChain::new(root, vec![(d1, p1)], Some(t))?);
                }
                Some(_) => {}
            }
            if kg.is_literal(n1) {
                continue; // literals are terminal
            }
            for d2 in dirs {
                for &(p2, n2) in kg.neighbors(n1, d2)? {
                    match target {
                        None => {
                            found.insert(CoreChain::new(
                                root,
                                vec![(d1, p1), (d2, p2)],
                                None,
                            )?);
                        }
                        Some(t) if n2 == t => {
                            found.insert(CoreChain::new(
                                root,
                                vec![(d1, p1), (d2, p2)],
                                Some(t),
                            )?);
                        }
                        Some(_) => {}
                    }
                }
            }
        }
    }
    Ok(found.into_iter().collect())
}

/// Size of the candidate space for a question's entities.
pub fn chain_count(
    kg: &KnowledgeGraph,
    entities: &[NodeId],
    strict_two_entity: bool,
) -> Result<usize> {
    Ok(generate_candidates(kg, entities, strict_two_entity)?.len())
}

/// One line of the batch candidate dump: linearized candidates for a
/// question plus the position of its gold chain, if present.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub id: String,
    pub candidates: Vec<String>,
    pub gold_index: Option<usize>,
}
