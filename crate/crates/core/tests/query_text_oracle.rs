//! Cross-checks query-graph execution against a naive pattern-join
//! evaluation of the emitted query text, plus pipeline edge cases.

mod common;

use std::collections::BTreeSet;

use chainrank_core::auxiliary::{ClassifierConfig, INTENT_LABELS, PLACEMENT_LABELS};
use chainrank_core::candidates::generate_candidates;
use chainrank_core::dataset::parse_dataset;
use chainrank_core::encoders::{ModelConfig, ModelKind};
use chainrank_core::kg::{AnswerSet, KnowledgeGraph, NodeId};
use chainrank_core::pipeline::{answer_question, PipelineConfig, PipelineModels};
use chainrank_core::query_graph::{
    ClassConstraint, Intent, QueryGraph, SurfaceForms, TypePlacement,
};
use chainrank_core::training::build_vocabulary;
use chainrank_core::{RankingModel, SequenceClassifier};

/// Minimal evaluator for the emitted query text: parses the pattern list and
/// joins it against the raw triple and class-assertion lists.
struct TextOracle {
    triples: Vec<(String, String, String)>,
    types: Vec<(String, String)>,
    nodes: Vec<String>,
}

#[derive(Clone, Debug)]
enum Term {
    Var(String),
    Const(String),
}

impl TextOracle {
    fn new(kg: &KnowledgeGraph) -> Self {
        let triples = kg
            .triples()
            .iter()
            .map(|&(s, p, o)| {
                (
                    kg.node_name(s).to_string(),
                    kg.pred_name(p).to_string(),
                    kg.node_name(o).to_string(),
                )
            })
            .collect();
        let types = kg
            .class_assertions()
            .iter()
            .map(|&(e, c)| (kg.node_name(e).to_string(), kg.node_name(c).to_string()))
            .collect();
        let nodes = (0..kg.n_nodes())
            .map(|i| kg.node_name(NodeId(i as u32)).to_string())
            .collect();
        TextOracle {
            triples,
            types,
            nodes,
        }
    }

    fn parse_term(t: &str) -> Term {
        if let Some(v) = t.strip_prefix('?') {
            Term::Var(v.to_string())
        } else if t.starts_with('<') && t.ends_with('>') {
            Term::Const(t[1..t.len() - 1].to_string())
        } else {
            Term::Const(t.to_string()) // literal
        }
    }

    fn parse(text: &str) -> (String, Vec<(Term, String, Term)>) {
        let (mode, rest) = if let Some(rest) = text.strip_prefix("SELECT DISTINCT ?uri WHERE {") {
            ("set".to_string(), rest)
        } else if let Some(rest) =
            text.strip_prefix("SELECT (COUNT(DISTINCT ?uri) AS ?c) WHERE {")
        {
            ("count".to_string(), rest)
        } else if let Some(rest) = text.strip_prefix("ASK WHERE {") {
            ("ask".to_string(), rest)
        } else {
            panic!("unrecognized query text: {text}");
        };
        let body = rest.strip_suffix('}').expect("closing brace").trim();
        let patterns = body
            .split(" . ")
            .map(|pat| {
                let parts: Vec<&str> = pat.split_whitespace().collect();
                assert_eq!(parts.len(), 3, "pattern {pat:?}");
                let p = parts[1].trim_start_matches('<').trim_end_matches('>');
                (
                    Self::parse_term(parts[0]),
                    p.to_string(),
                    Self::parse_term(parts[2]),
                )
            })
            .collect();
        (mode, patterns)
    }

    fn matches(&self, s: &str, p: &str, o: &str) -> bool {
        if p == "rdf:type" {
            self.types.iter().any(|(e, c)| e == s && c == o)
        } else {
            self.triples
                .iter()
                .any(|(ts, tp, to)| ts == s && tp == p && to == o)
        }
    }

    fn eval(&self, text: &str) -> AnswerSet {
        let (mode, patterns) = Self::parse(text);
        let mut vars = BTreeSet::new();
        for (s, _, o) in &patterns {
            for t in [s, o] {
                if let Term::Var(v) = t {
                    vars.insert(v.clone());
                }
            }
        }
        let vars: Vec<String> = vars.into_iter().collect();
        assert!(vars.len() <= 2, "at most two variables");
        let mut uri_bindings = BTreeSet::new();
        let mut any = false;
        let domain: Vec<&String> = self.nodes.iter().collect();
        let assignments: Vec<Vec<&String>> = match vars.len() {
            0 => vec![vec![]],
            1 => domain.iter().map(|&n| vec![n]).collect(),
            _ => domain
                .iter()
                .flat_map(|&a| domain.iter().map(move |&b| vec![a, b]))
                .collect(),
        };
        for assignment in assignments {
            let value = |term: &Term| -> String {
                match term {
                    Term::Const(c) => c.clone(),
                    Term::Var(v) => {
                        let idx = vars.iter().position(|x| x == v).expect("known var");
                        assignment[idx].clone()
                    }
                }
            };
            let sat = patterns
                .iter()
                .all(|(s, p, o)| self.matches(&value(s), p, &value(o)));
            if sat {
                any = true;
                if let Some(idx) = vars.iter().position(|v| v == "uri") {
                    uri_bindings.insert(assignment[idx].clone());
                }
            }
        }
        match mode.as_str() {
            "ask" => AnswerSet::Boolean { value: any },
            "set" => AnswerSet::Entities {
                values: uri_bindings,
            },
            _ => AnswerSet::Count {
                value: uri_bindings.len() as u64,
            },
        }
    }
}

#[test]
fn execution_matches_the_emitted_query_text() {
    let kg = KnowledgeGraph::parse(&common::kg_text(), "toyworld.tsv").unwrap();
    let oracle = TextOracle::new(&kg);
    let some_classes: Vec<NodeId> = kg.classes().iter().copied().take(3).collect();

    let mut checked = 0usize;
    let roots = [
        "Vostok_Programme",
        "Yuri_Gagarin",
        "Germany",
        "Berlin",
        "Keanu_Reeves",
        "John_Wick",
        "Solaris",
        "Moonlight_Sonata",
    ];
    for root in roots {
        let root_id = kg.node_id(root).unwrap();
        let chains = generate_candidates(&kg, &[root_id], false).unwrap();
        for chain in chains.into_iter().take(12) {
            let mut constraints: Vec<Option<ClassConstraint>> = vec![None];
            for &class in &some_classes {
                constraints.push(Some(ClassConstraint {
                    placement: TypePlacement::Lambda,
                    class,
                }));
                constraints.push(Some(ClassConstraint {
                    placement: TypePlacement::Existential,
                    class,
                }));
            }
            for intent in [Intent::Set, Intent::Count] {
                for constraint in &constraints {
                    let qg = match QueryGraph::new(chain.clone(), intent, *constraint) {
                        Ok(qg) => qg,
                        Err(_) => continue, // grammar-invalid combination
                    };
                    let text = qg.to_query_text(&kg).unwrap();
                    let executed = kg.execute(&qg).unwrap();
                    let naive = oracle.eval(&text);
                    assert_eq!(executed, naive, "mismatch for {text}");
                    checked += 1;
                }
            }
        }
    }
    // grounded ask patterns through the two-entity generator
    for (a, b) in [("Germany", "Berlin"), ("Yuri_Gagarin", "Valentina_Tereshkova")] {
        let pair = [kg.node_id(a).unwrap(), kg.node_id(b).unwrap()];
        for chain in generate_candidates(&kg, &pair, false).unwrap() {
            let qg = QueryGraph::new(chain, Intent::Ask, None).unwrap();
            let text = qg.to_query_text(&kg).unwrap();
            assert_eq!(kg.execute(&qg).unwrap(), oracle.eval(&text), "{text}");
            checked += 1;
        }
    }
    assert!(checked > 200, "only {checked} graphs checked");
    println!("checked {checked} query graphs against the text oracle");
}

#[test]
fn count_always_equals_set_cardinality() {
    let kg = KnowledgeGraph::parse(&common::kg_text(), "toyworld.tsv").unwrap();
    for root in ["Vostok_Programme", "Germany", "Keanu_Reeves", "Paris"] {
        let root_id = kg.node_id(root).unwrap();
        for chain in generate_candidates(&kg, &[root_id], false).unwrap() {
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
    }
}

#[test]
fn questions_without_candidates_are_unanswerable() {
    let kg = KnowledgeGraph::parse(&common::kg_text(), "toyworld.tsv").unwrap();
    let dataset = parse_dataset(&common::dataset_a(), &kg).unwrap();
    let surface = SurfaceForms::empty();
    let vocab = build_vocabulary(&[&dataset], &kg, &surface);
    // untrained models suffice: the unanswerable path returns before any
    // model is consulted
    let models: PipelineModels<f64> = PipelineModels {
        ranker: RankingModel::new(
            ModelConfig::desk(ModelKind::BilstmDot, 16, 0),
            vocab.clone(),
            kg.n_predicates(),
        )
        .unwrap(),
        intent: SequenceClassifier::new(
            ClassifierConfig {
                d_emb: 16,
                hidden: 8,
                seed: 0,
            },
            INTENT_LABELS.map(str::to_string).to_vec(),
            vocab.clone(),
        )
        .unwrap(),
        placement: SequenceClassifier::new(
            ClassifierConfig {
                d_emb: 16,
                hidden: 8,
                seed: 0,
            },
            PLACEMENT_LABELS.map(str::to_string).to_vec(),
            vocab.clone(),
        )
        .unwrap(),
        class_ranker: RankingModel::new(
            ModelConfig::desk(ModelKind::BilstmDot, 16, 1),
            vocab,
            kg.n_predicates(),
        )
        .unwrap(),
    };
    // the class node "Astronaut" has no hop edges at all
    let astronaut = kg.node_id("Astronaut").unwrap();
    let tokens = vec!["anything".to_string()];
    let answer = answer_question(
        &kg,
        &models,
        &SurfaceForms::empty(),
        &tokens,
        &[astronaut],
        &PipelineConfig::default(),
    )
    .unwrap();
    assert!(answer.unanswerable);
    assert!(answer.answers.is_none());
    assert!(answer.query_text.is_none());
    assert!(answer.top_chains.is_empty());
}
