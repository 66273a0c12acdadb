//! In-memory triple store: loading, adjacency indices, class index and
//! query-graph execution.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::query_graph::{Direction, Intent, QueryGraph, TypePlacement};

/// The predicate string that carries class membership. Triples using it feed
/// the class index and never appear as core-chain hops.
pub const TYPE_PREDICATE: &str = "rdf:type";

/// Id of a graph node: an entity IRI or a literal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

/// Id of a predicate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PredId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

impl fmt::Display for PredId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

/// Result of executing a query graph.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum AnswerSet {
    /// Bindings of the lambda variable, as IRI/literal strings.
    #[serde(rename = "entity-set")]
    Entities { values: BTreeSet<String> },
    /// Cardinality of the binding set.
    #[serde(rename = "count")]
    Count { value: u64 },
    /// Whether the fully grounded pattern holds in the graph.
    #[serde(rename = "boolean")]
    Boolean { value: bool },
}

impl AnswerSet {
    pub fn entities<I: IntoIterator<Item = String>>(values: I) -> Self {
        AnswerSet::Entities {
            values: values.into_iter().collect(),
        }
    }
}

/// Immutable knowledge graph with forward/reverse adjacency and a class
/// index. Safe to share across threads once loaded.
#[derive(Clone, Debug)]
pub struct KnowledgeGraph {
    node_names: Vec<String>,
    node_ids: HashMap<String, NodeId>,
    literal: Vec<bool>,
    pred_names: Vec<String>,
    pred_ids: HashMap<String, PredId>,
    /// Hop triples only; type assertions live in `class_index`.
    triples: Vec<(NodeId, PredId, NodeId)>,
    fwd_index: HashMap<NodeId, Vec<(PredId, NodeId)>>,
    rev_index: HashMap<NodeId, Vec<(PredId, NodeId)>>,
    class_index: HashMap<NodeId, BTreeSet<NodeId>>,
    classes: BTreeSet<NodeId>,
}

impl KnowledgeGraph {
    /// Loads a tab-separated triple file: one `subject<TAB>predicate<TAB>object`
    /// per line, `#` comments and blank lines ignored, objects starting with
    /// `"` stored as literals.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut kg = KnowledgeGraph {
            node_names: Vec::new(),
            node_ids: HashMap::new(),
            literal: Vec::new(),
            pred_names: Vec::new(),
            pred_ids: HashMap::new(),
            triples: Vec::new(),
            fwd_index: HashMap::new(),
            rev_index: HashMap::new(),
            class_index: HashMap::new(),
            classes: BTreeSet::new(),
        };
        let mut n_lines = 0usize;
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let trimmed = line.trim_end_matches('\r');
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = trimmed.split('\t').collect();
            if cols.len() != 3 || cols.iter().any(|c| c.is_empty()) {
                return Err(Error::Parse {
                    path: origin.to_string(),
                    line: line_no,
                    msg: format!("expected 3 tab-separated columns, got {}", cols.len()),
                });
            }
            if cols[0].starts_with('"') {
                return Err(Error::Parse {
                    path: origin.to_string(),
                    line: line_no,
                    msg: "literal in subject position".to_string(),
                });
            }
            let s = kg.intern_node(cols[0], false);
            let p = kg.intern_pred(cols[1]);
            let o = kg.intern_node(cols[2], cols[2].starts_with('"'));
            if cols[1] == TYPE_PREDICATE {
                kg.class_index.entry(s).or_default().insert(o);
                kg.classes.insert(o);
            } else {
                kg.triples.push((s, p, o));
                kg.fwd_index.entry(s).or_default().push((p, o));
                kg.rev_index.entry(o).or_default().push((p, s));
            }
            n_lines += 1;
        }
        if n_lines == 0 {
            return Err(Error::EmptyKg(origin.to_string()));
        }
        for adj in kg.fwd_index.values_mut() {
            adj.sort_unstable();
            adj.dedup();
        }
        for adj in kg.rev_index.values_mut() {
            adj.sort_unstable();
            adj.dedup();
        }
        Ok(kg)
    }

    fn intern_node(&mut self, name: &str, is_literal: bool) -> NodeId {
        if let Some(&id) = self.node_ids.get(name) {
            return id;
        }
        let id = NodeId(self.node_names.len() as u32);
        self.node_names.push(name.to_string());
        self.node_ids.insert(name.to_string(), id);
        self.literal.push(is_literal);
        id
    }

    fn intern_pred(&mut self, name: &str) -> PredId {
        if let Some(&id) = self.pred_ids.get(name) {
            return id;
        }
        let id = PredId(self.pred_names.len() as u32);
        self.pred_names.push(name.to_string());
        self.pred_ids.insert(name.to_string(), id);
        id
    }

    pub fn n_nodes(&self) -> usize {
        self.node_names.len()
    }

    /// Number of non-literal nodes.
    pub fn n_entities(&self) -> usize {
        self.literal.iter().filter(|&&l| !l).count()
    }

    pub fn n_predicates(&self) -> usize {
        self.pred_names.len()
    }

    pub fn n_triples(&self) -> usize {
        self.triples.len()
    }

    /// Number of (entity, class) assertions.
    pub fn n_class_assertions(&self) -> usize {
        self.class_index.values().map(BTreeSet::len).sum()
    }

    /// Hop triples (type assertions excluded).
    pub fn triples(&self) -> &[(NodeId, PredId, NodeId)] {
        &self.triples
    }

    /// All (entity, class) pairs, deterministically ordered.
    pub fn class_assertions(&self) -> Vec<(NodeId, NodeId)> {
        let mut out: Vec<(NodeId, NodeId)> = self
            .class_index
            .iter()
            .flat_map(|(&e, cs)| cs.iter().map(move |&c| (e, c)))
            .collect();
        out.sort_unstable();
        out
    }

    /// Every class id in the graph.
    pub fn classes(&self) -> &BTreeSet<NodeId> {
        &self.classes
    }

    pub fn classes_of(&self, node: NodeId) -> Option<&BTreeSet<NodeId>> {
        self.class_index.get(&node)
    }

    pub fn node_id(&self, name: &str) -> Result<NodeId> {
        self.node_ids
            .get(name)
            .copied()
            .ok_or_else(|| Error::Lookup(name.to_string()))
    }

    pub fn node_name(&self, id: NodeId) -> &str {
        &self.node_names[id.0 as usize]
    }

    pub fn is_literal(&self, id: NodeId) -> bool {
        self.literal[id.0 as usize]
    }

    pub fn pred_id(&self, name: &str) -> Result<PredId> {
        self.pred_ids
            .get(name)
            .copied()
            .ok_or_else(|| Error::Lookup(name.to_string()))
    }

    pub fn pred_name(&self, id: PredId) -> &str {
        &self.pred_names[id.0 as usize]
    }

    /// Predicate names in id order.
    pub fn predicate_names(&self) -> &[String] {
        &self.pred_names
    }

    /// Errors unless `node` names a node of this graph.
    pub fn check_node(&self, node: NodeId) -> Result<()> {
        if (node.0 as usize) < self.node_names.len() {
            Ok(())
        } else {
            Err(Error::Lookup(format!("node id {}", node.0)))
        }
    }

    /// Adjacency of `node`: forward yields `(p, o)` over triples `(node, p, o)`,
    /// reverse yields `(p, s)` over triples `(s, p, node)`. Type assertions are
    /// never included.
    pub fn neighbors(&self, node: NodeId, direction: Direction) -> Result<&[(PredId, NodeId)]> {
        self.check_node(node)?;
        let index = match direction {
            Direction::Forward => &self.fwd_index,
            Direction::Reverse => &self.rev_index,
        };
        Ok(index.get(&node).map(Vec::as_slice).unwrap_or(&[]))
    }

    fn step(&self, node: NodeId, dir: Direction, pred: PredId) -> Vec<NodeId> {
        let index = match dir {
            Direction::Forward => &self.fwd_index,
            Direction::Reverse => &self.rev_index,
        };
        index
            .get(&node)
            .map(|adj| {
                adj.iter()
                    .filter(|(p, _)| *p == pred)
                    .map(|(_, n)| *n)
                    .collect()
            })
            .unwrap_or_default()
    }

    fn node_has_class(&self, node: NodeId, class: NodeId) -> bool {
        self.class_index
            .get(&node)
            .map(|cs| cs.contains(&class))
            .unwrap_or(false)
    }

    /// Joint bindings `(n1, n2)` of a chain pattern, ignoring any class
    /// constraint; `n2` is `None` for one-hop chains. Honors the terminal
    /// grounding and never continues a chain through a literal.
    pub fn chain_bindings_raw(
        &self,
        chain: &crate::query_graph::CoreChain,
    ) -> Result<Vec<(NodeId, Option<NodeId>)>> {
        self.check_node(chain.root)?;
        let mut out = BTreeSet::new();
        let (d1, p1) = chain.hops[0];
        let first = self.step(chain.root, d1, p1);
        if chain.hops.len() == 1 {
            for n1 in first {
                if let Some(second) = chain.second_entity {
                    if n1 != second {
                        continue;
                    }
                }
                out.insert((n1, None));
            }
        } else {
            let (d2, p2) = chain.hops[1];
            for n1 in first {
                if self.is_literal(n1) {
                    continue; // literals are terminal
                }
                for n2 in self.step(n1, d2, p2) {
                    if let Some(second) = chain.second_entity {
                        if n2 != second {
                            continue;
                        }
                    }
                    out.insert((n1, Some(n2)));
                }
            }
        }
        Ok(out.into_iter().collect())
    }

    /// Executes a query graph: set, count or boolean verification.
    pub fn execute(&self, qg: &QueryGraph) -> Result<AnswerSet> {
        qg.validate()?;
        let mut bindings = self.chain_bindings_raw(&qg.chain)?;
        if let Some(constraint) = &qg.class_constraint {
            let lambda_is_middle = qg.lambda_is_middle();
            bindings.retain(|&(n1, n2)| {
                let node = match constraint.placement {
                    TypePlacement::Lambda => {
                        if lambda_is_middle {
                            n1
                        } else {
                            n2.unwrap_or(n1)
                        }
                    }
                    TypePlacement::Existential => n1,
                    TypePlacement::None => return true,
                };
                self.node_has_class(node, constraint.class)
            });
        }
        match qg.intent {
            Intent::Ask => Ok(AnswerSet::Boolean {
                value: !bindings.is_empty(),
            }),
            Intent::Set | Intent::Count => {
                let lambda_is_middle = qg.lambda_is_middle();
                let values: BTreeSet<String> = bindings
                    .iter()
                    .map(|&(n1, n2)| {
                        let node = if lambda_is_middle { n1 } else { n2.unwrap_or(n1) };
                        self.node_name(node).to_string()
                    })
                    .collect();
                if qg.intent == Intent::Set {
                    Ok(AnswerSet::Entities { values })
                } else {
                    Ok(AnswerSet::Count {
                        value: values.len() as u64,
                    })
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query_graph::CoreChain;

    const ASTRONAUT: &str = include_str!("../tests/data/astronaut.tsv");

    fn toy() -> KnowledgeGraph {
        KnowledgeGraph::parse(ASTRONAUT, "astronaut.tsv").unwrap()
    }

    #[test]
    fn toy_file_counts() {
        let kg = toy();
        assert_eq!(kg.n_entities(), 6);
        assert_eq!(kg.n_predicates(), 4);
        assert_eq!(kg.n_class_assertions(), 2);
        assert_eq!(kg.n_triples(), 5); // hop triples; type assertions indexed separately
    }

    #[test]
    fn malformed_line_reports_its_number() {
        let err = KnowledgeGraph::parse("x\ty\tz\na\tb\n", "bad.tsv").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn empty_file_is_an_error() {
        assert!(matches!(
            KnowledgeGraph::parse("", "empty.tsv"),
            Err(Error::EmptyKg(_))
        ));
        assert!(matches!(
            KnowledgeGraph::parse("# only a comment\n", "empty.tsv"),
            Err(Error::EmptyKg(_))
        ));
    }

    #[test]
    fn type_only_file_fills_only_the_class_index() {
        let kg = KnowledgeGraph::parse("a\trdf:type\tC\nb\trdf:type\tC\n", "types.tsv").unwrap();
        assert_eq!(kg.n_triples(), 0);
        assert_eq!(kg.n_class_assertions(), 2);
        let a = kg.node_id("a").unwrap();
        assert!(kg.neighbors(a, Direction::Forward).unwrap().is_empty());
        assert!(kg.neighbors(a, Direction::Reverse).unwrap().is_empty());
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let kg = KnowledgeGraph::parse("# c\n\nx\tp\ty\n", "c.tsv").unwrap();
        assert_eq!(kg.n_triples(), 1);
    }

    #[test]
    fn literal_subject_is_rejected() {
        let err = KnowledgeGraph::parse("\"lit\"\tp\ty\n", "l.tsv").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn neighbors_of_vostok() {
        let kg = toy();
        let vostok = kg.node_id("Vostok_Programme").unwrap();
        let mission = kg.pred_id("mission").unwrap();
        let rev = kg.neighbors(vostok, Direction::Reverse).unwrap();
        let mut got: Vec<(PredId, &str)> =
            rev.iter().map(|&(p, n)| (p, kg.node_name(n))).collect();
        got.sort();
        assert_eq!(
            got,
            vec![(mission, "Valentina_Tereshkova"), (mission, "Yuri_Gagarin")]
        );
        assert!(kg.neighbors(vostok, Direction::Forward).unwrap().is_empty());
    }

    #[test]
    fn type_assertions_never_show_up_as_edges() {
        let kg = toy();
        let astronaut = kg.node_id("Astronaut").unwrap();
        assert!(kg.neighbors(astronaut, Direction::Forward).unwrap().is_empty());
        assert!(kg.neighbors(astronaut, Direction::Reverse).unwrap().is_empty());
    }

    #[test]
    fn unknown_node_is_a_lookup_error() {
        let kg = toy();
        assert!(matches!(
            kg.neighbors(NodeId(999), Direction::Forward),
            Err(Error::Lookup(_))
        ));
        assert!(matches!(kg.node_id("Nessie"), Err(Error::Lookup(_))));
    }

    #[test]
    fn execute_two_hop_set_over_the_toy_graph() {
        let kg = toy();
        let vostok = kg.node_id("Vostok_Programme").unwrap();
        let mission = kg.pred_id("mission").unwrap();
        let birth = kg.pred_id("birthPlace").unwrap();
        let chain = CoreChain::new(
            vostok,
            vec![(Direction::Reverse, mission), (Direction::Forward, birth)],
            None,
        )
        .unwrap();
        let qg = QueryGraph::new(chain, Intent::Set, None).unwrap();
        let answers = kg.execute(&qg).unwrap();
        assert_eq!(
            answers,
            AnswerSet::entities(["Klushino".to_string(), "Maslennikovo".to_string()])
        );
    }

    #[test]
    fn count_equals_set_cardinality() {
        let kg = toy();
        let vostok = kg.node_id("Vostok_Programme").unwrap();
        let mission = kg.pred_id("mission").unwrap();
        let birth = kg.pred_id("birthPlace").unwrap();
        let chain = CoreChain::new(
            vostok,
            vec![(Direction::Reverse, mission), (Direction::Forward, birth)],
            None,
        )
        .unwrap();
        let set = kg
            .execute(&QueryGraph::new(chain.clone(), Intent::Set, None).unwrap())
            .unwrap();
        let count = kg
            .execute(&QueryGraph::new(chain, Intent::Count, None).unwrap())
            .unwrap();
        match (set, count) {
            (AnswerSet::Entities { values }, AnswerSet::Count { value }) => {
                assert_eq!(values.len() as u64, value)
            }
            other => panic!("unexpected kinds {other:?}"),
        }
    }

    #[test]
    fn execute_with_missing_predicate_is_empty_not_an_error() {
        let kg = toy();
        let vostok = kg.node_id("Vostok_Programme").unwrap();
        let chain = CoreChain::new(vostok, vec![(Direction::Forward, PredId(99))], None).unwrap();
        let qg = QueryGraph::new(chain, Intent::Set, None).unwrap();
        assert_eq!(kg.execute(&qg).unwrap(), AnswerSet::entities([]));
    }

    #[test]
    fn loading_twice_is_deterministic() {
        let a = toy();
        let b = toy();
        assert_eq!(a.triples(), b.triples());
        assert_eq!(a.n_nodes(), b.n_nodes());
        for i in 0..a.n_nodes() {
            assert_eq!(a.node_name(NodeId(i as u32)), b.node_name(NodeId(i as u32)));
        }
        for i in 0..a.n_predicates() {
            assert_eq!(a.pred_name(PredId(i as u32)), b.pred_name(PredId(i as u32)));
        }
        let vostok = a.node_id("Vostok_Programme").unwrap();
        assert_eq!(
            a.neighbors(vostok, Direction::Reverse).unwrap(),
            b.neighbors(vostok, Direction::Reverse).unwrap()
        );
    }
}
