//! Core chains and query graphs: the structured form a question is parsed
//! into, its token-level view for the rankers, and executable query text.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{KnowledgeGraph, NodeId, PredId, TYPE_PREDICATE};

/// Reserved token filling the second slot of one-hop chains.
pub const NO_HOP_TOKEN: &str = "NO_HOP";

/// Edge orientation of a hop: `+` follows subject to object, `-` the reverse.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "+")]
    Forward,
    #[serde(rename = "-")]
    Reverse,
}

impl Direction {
    pub fn token(self) -> &'static str {
        match self {
            Direction::Forward => "+",
            Direction::Reverse => "-",
        }
    }
}

/// What the question asks for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Intent {
    Set,
    Count,
    Ask,
}

/// Where a class constraint attaches.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TypePlacement {
    None,
    Lambda,
    Existential,
}

/// An entity-rooted path of one or two signed predicate hops, optionally
/// grounded at its terminal node by a second question entity.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CoreChain {
    pub root: NodeId,
    pub hops: Vec<(Direction, PredId)>,
    pub second_entity: Option<NodeId>,
}

impl CoreChain {
    pub fn new(
        root: NodeId,
        hops: Vec<(Direction, PredId)>,
        second_entity: Option<NodeId>,
    ) -> Result<Self> {
        if hops.is_empty() || hops.len() > 2 {
            return Err(Error::Construction(format!(
                "a core chain has 1 or 2 hops, got {}",
                hops.len()
            )));
        }
        Ok(CoreChain {
            root,
            hops,
            second_entity,
        })
    }

    /// Sign + surface-form tokens of every hop in order. Root entity tokens
    /// are not part of the linearization; the question already names them.
    pub fn linearize(&self, kg: &KnowledgeGraph, surface: &SurfaceForms) -> Vec<String> {
        let mut out = Vec::new();
        for &(dir, pred) in &self.hops {
            out.push(dir.token().to_string());
            out.extend(surface.tokens(kg.pred_name(pred)));
        }
        out
    }

    /// Tokens of hop `j` (1-based). The second slot of a one-hop chain is the
    /// reserved `NO_HOP` token.
    pub fn hop_tokens(
        &self,
        j: usize,
        kg: &KnowledgeGraph,
        surface: &SurfaceForms,
    ) -> Result<Vec<String>> {
        match j {
            1 | 2 => {}
            _ => {
                return Err(Error::Argument(format!(
                    "hop index must be 1 or 2, got {j}"
                )))
            }
        }
        match self.hops.get(j - 1) {
            Some(&(dir, pred)) => {
                let mut out = vec![dir.token().to_string()];
                out.extend(surface.tokens(kg.pred_name(pred)));
                Ok(out)
            }
            None => Ok(vec![NO_HOP_TOKEN.to_string()]),
        }
    }
}

/// Class constraint on an ungrounded node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassConstraint {
    pub placement: TypePlacement,
    pub class: NodeId,
}

/// A core chain plus intent flag and optional class constraint.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryGraph {
    pub chain: CoreChain,
    pub intent: Intent,
    pub class_constraint: Option<ClassConstraint>,
}

impl QueryGraph {
    pub fn new(
        chain: CoreChain,
        intent: Intent,
        class_constraint: Option<ClassConstraint>,
    ) -> Result<Self> {
        let qg = QueryGraph {
            chain,
            intent,
            class_constraint,
        };
        qg.validate()?;
        Ok(qg)
    }

    /// True when the lambda variable sits between the two hops, which happens
    /// for projected two-hop chains whose terminal is grounded.
    pub fn lambda_is_middle(&self) -> bool {
        self.chain.hops.len() == 2
            && self.chain.second_entity.is_some()
            && self.intent != Intent::Ask
    }

    /// True when the chain has an ungrounded intermediate node.
    pub fn has_existential(&self) -> bool {
        self.chain.hops.len() == 2
            && (self.chain.second_entity.is_none() || self.intent == Intent::Ask)
    }

    /// True when the chain has an ungrounded answer node.
    pub fn has_lambda(&self) -> bool {
        self.intent != Intent::Ask
            && !(self.chain.hops.len() == 1 && self.chain.second_entity.is_some())
    }

    /// Grammar invariants: ask needs a fully grounded pattern, projection
    /// needs a lambda variable, constraints need the variable they attach to.
    pub fn validate(&self) -> Result<()> {
        if self.intent == Intent::Ask && self.chain.second_entity.is_none() {
            return Err(Error::Construction(
                "ask verification needs a terminal grounding".into(),
            ));
        }
        if self.intent != Intent::Ask && !self.has_lambda() {
            return Err(Error::Construction(
                "set/count projection needs an ungrounded answer node".into(),
            ));
        }
        if let Some(c) = &self.class_constraint {
            match c.placement {
                TypePlacement::None => {
                    return Err(Error::Construction(
                        "class constraint with placement none".into(),
                    ))
                }
                TypePlacement::Lambda => {
                    if !self.has_lambda() {
                        return Err(Error::Construction(
                            "lambda class constraint without a lambda variable".into(),
                        ));
                    }
                }
                TypePlacement::Existential => {
                    if !self.has_existential() {
                        return Err(Error::Construction(
                            "existential class constraint without an existential variable".into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Deterministic SPARQL-style text for this query graph.
    ///
    /// The lambda variable is always printed `?uri` and the existential `?x`.
    pub fn to_query_text(&self, kg: &KnowledgeGraph) -> Result<String> {
        self.validate()?;
        let chain = &self.chain;
        let term = |node: NodeId| -> String {
            let name = kg.node_name(node);
            if name.starts_with('"') {
                name.to_string()
            } else {
                format!("<{name}>")
            }
        };
        let root = term(chain.root);
        let (n1, n2): (String, Option<String>) = if chain.hops.len() == 1 {
            let n1 = match chain.second_entity {
                Some(e) => term(e),
                None => "?uri".to_string(),
            };
            (n1, None)
        } else {
            let n1 = if self.lambda_is_middle() { "?uri" } else { "?x" }.to_string();
            let n2 = match chain.second_entity {
                Some(e) => term(e),
                None => "?uri".to_string(),
            };
            (n1, Some(n2))
        };
        let mut patterns = Vec::new();
        let hop_pattern = |from: &str, to: &str, dir: Direction, pred: PredId| -> String {
            let p = kg.pred_name(pred);
            match dir {
                Direction::Forward => format!("{from} <{p}> {to}"),
                Direction::Reverse => format!("{to} <{p}> {from}"),
            }
        };
        let (d1, p1) = chain.hops[0];
        patterns.push(hop_pattern(&root, &n1, d1, p1));
        if let Some(n2) = &n2 {
            let (d2, p2) = chain.hops[1];
            patterns.push(hop_pattern(&n1, n2, d2, p2));
        }
        if let Some(c) = &self.class_constraint {
            let var = match c.placement {
                TypePlacement::Lambda => "?uri",
                TypePlacement::Existential => "?x",
                TypePlacement::None => unreachable!("validated above"),
            };
            patterns.push(format!(
                "{var} {TYPE_PREDICATE} {}",
                term(c.class)
            ));
        }
        let body = patterns.join(" . ");
        let text = match self.intent {
            Intent::Set => format!("SELECT DISTINCT ?uri WHERE {{ {body} }}"),
            Intent::Count => format!("SELECT (COUNT(DISTINCT ?uri) AS ?c) WHERE {{ {body} }}"),
            Intent::Ask => format!("ASK WHERE {{ {body} }}"),
        };
        Ok(text)
    }
}

/// Surface-form lexicon: the default IRI-splitting rule plus optional
/// per-IRI overrides loaded from a TSV file.
#[derive(Clone, Debug, Default)]
pub struct SurfaceForms {
    overrides: HashMap<String, Vec<String>>,
}

impl SurfaceForms {
    pub fn empty() -> Self {
        SurfaceForms::default()
    }

    /// Loads `iri<TAB>space-separated tokens` lines.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut overrides = HashMap::new();
        for (idx, line) in text.lines().enumerate() {
            let trimmed = line.trim_end_matches('\r');
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (iri, toks) = trimmed.split_once('\t').ok_or_else(|| Error::Parse {
                path: path.display().to_string(),
                line: idx + 1,
                msg: "expected iri<TAB>tokens".to_string(),
            })?;
            let tokens: Vec<String> = toks.split_whitespace().map(str::to_string).collect();
            if tokens.is_empty() {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line: idx + 1,
                    msg: "empty token list".to_string(),
                });
            }
            overrides.insert(iri.to_string(), tokens);
        }
        Ok(SurfaceForms { overrides })
    }

    pub fn tokens(&self, iri: &str) -> Vec<String> {
        if let Some(t) = self.overrides.get(iri) {
            return t.clone();
        }
        surface_form(iri)
    }
}

/// Default lexicalization of an IRI: the local name after the last `/`, `#`
/// or `:`, split on camel-case boundaries and underscores, lowercased.
pub fn surface_form(iri: &str) -> Vec<String> {
    let local = match iri.rfind(['/', '#', ':']) {
        Some(pos) if pos + 1 < iri.len() => &iri[pos + 1..],
        _ => iri,
    };
    let mut tokens: Vec<String> = Vec::new();
    let mut current = String::new();
    let chars: Vec<char> = local.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        if c == '_' || c == '-' {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
            continue;
        }
        if c.is_uppercase() && !current.is_empty() {
            let prev = chars[i - 1];
            let next_lower = chars.get(i + 1).map(|n| n.is_lowercase()).unwrap_or(false);
            if prev.is_lowercase() || prev.is_numeric() || (prev.is_uppercase() && next_lower) {
                tokens.push(std::mem::take(&mut current));
            }
        }
        current.extend(c.to_lowercase());
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    if tokens.is_empty() {
        vec![local.to_lowercase()]
    } else {
        tokens
    }
}

/// Question tokenizer: whitespace split, punctuation trimmed from token
/// edges, lowercased.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter_map(|w| {
            let t = w.trim_matches(|c: char| !c.is_alphanumeric());
            if t.is_empty() {
                None
            } else {
                Some(t.to_lowercase())
            }
        })
        .collect()
}

/// Token-level view of a core chain, precomputed once per candidate so the
/// encoders never touch the graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainTokens {
    pub linear: Vec<String>,
    pub hop1: Vec<String>,
    pub hop2: Vec<String>,
    pub predicates: Vec<PredId>,
}

impl ChainTokens {
    pub fn of_chain(chain: &CoreChain, kg: &KnowledgeGraph, surface: &SurfaceForms) -> Self {
        ChainTokens {
            linear: chain.linearize(kg, surface),
            hop1: chain
                .hop_tokens(1, kg, surface)
                .expect("hop 1 always exists"),
            hop2: chain
                .hop_tokens(2, kg, surface)
                .expect("hop 2 falls back to NO_HOP"),
            predicates: chain.hops.iter().map(|&(_, p)| p).collect(),
        }
    }

    /// View of a bare token sequence (used when ranking class names with the
    /// same machinery).
    pub fn of_tokens(tokens: Vec<String>) -> Self {
        ChainTokens {
            hop1: tokens.clone(),
            hop2: vec![NO_HOP_TOKEN.to_string()],
            linear: tokens,
            predicates: Vec::new(),
        }
    }
}
