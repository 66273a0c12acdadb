//! Shared toy world for integration tests: a small knowledge graph and two
//! question sets (a 50-question training world and a 20-question transfer
//! world on fresh predicates).
//!
//! Gold answers are computed here by a plain triple scan, independent of the
//! engine's execution path.

#![allow(dead_code)]

use std::collections::BTreeSet;

use serde_json::json;

type Triple = (&'static str, &'static str, &'static str);

/// Hop triples of the toy world (type assertions listed separately).
pub fn world_triples() -> Vec<Triple> {
    vec![
        // astronauts
        ("Yuri_Gagarin", "mission", "Vostok_Programme"),
        ("Valentina_Tereshkova", "mission", "Vostok_Programme"),
        ("Yuri_Gagarin", "birthPlace", "Klushino"),
        ("Valentina_Tereshkova", "birthPlace", "Maslennikovo"),
        ("Yuri_Gagarin", "crewMate", "Valentina_Tereshkova"),
        ("Neil_Armstrong", "mission", "Apollo_11"),
        ("Buzz_Aldrin", "mission", "Apollo_11"),
        ("Michael_Collins", "mission", "Apollo_11"),
        ("Neil_Armstrong", "birthPlace", "Wapakoneta"),
        ("Buzz_Aldrin", "birthPlace", "Glen_Ridge"),
        ("Michael_Collins", "birthPlace", "Rome"),
        ("Vostok_Programme", "operatedBy", "Soviet_Space_Program"),
        ("Apollo_11", "operatedBy", "NASA"),
        // geography
        ("Germany", "capital", "Berlin"),
        ("France", "capital", "Paris"),
        ("Spain", "capital", "Madrid"),
        ("Italy", "capital", "Rome"),
        ("Austria", "capital", "Vienna"),
        ("Poland", "capital", "Warsaw"),
        ("Berlin", "locatedIn", "Germany"),
        ("Munich", "locatedIn", "Germany"),
        ("Paris", "locatedIn", "France"),
        ("Lyon", "locatedIn", "France"),
        ("Madrid", "locatedIn", "Spain"),
        ("Barcelona", "locatedIn", "Spain"),
        ("Rome", "locatedIn", "Italy"),
        ("Vienna", "locatedIn", "Austria"),
        ("Warsaw", "locatedIn", "Poland"),
        // films and television
        ("John_Wick", "starring", "Keanu_Reeves"),
        ("Bill_Ted_Show", "starring", "Keanu_Reeves"),
        ("Speed", "starring", "Sandra_Bullock"),
        ("Bird_Box", "starring", "Sandra_Bullock"),
        ("Evan_Almighty", "starring", "Steve_Carell"),
        ("The_Office", "starring", "Steve_Carell"),
        ("John_Wick", "directedBy", "Chad_Stahelski"),
        ("Speed", "directedBy", "Jan_de_Bont"),
        ("Bird_Box", "directedBy", "Susanne_Bier"),
        ("Evan_Almighty", "directedBy", "Tom_Shadyac"),
        ("Chad_Stahelski", "birthPlace", "Palmer"),
        ("Jan_de_Bont", "birthPlace", "Eindhoven"),
        ("Susanne_Bier", "birthPlace", "Copenhagen"),
        ("Tom_Shadyac", "birthPlace", "Falls_Church"),
        // books
        ("Solaris", "writtenBy", "Stanislaw_Lem"),
        ("Dune", "writtenBy", "Frank_Herbert"),
        ("Hyperion", "writtenBy", "Dan_Simmons"),
        ("Roadside_Picnic", "writtenBy", "Arkady_Strugatsky"),
        ("Stanislaw_Lem", "birthPlace", "Lviv"),
        ("Frank_Herbert", "birthPlace", "Tacoma"),
        ("Dan_Simmons", "birthPlace", "Peoria"),
        ("Arkady_Strugatsky", "birthPlace", "Batumi"),
        // transfer block: music
        ("Moonlight_Sonata", "composedBy", "Beethoven"),
        ("Fifth_Symphony", "composedBy", "Beethoven"),
        ("Nocturne_Op9", "composedBy", "Chopin"),
        ("Bolero", "composedBy", "Ravel"),
        ("Firebird", "composedBy", "Stravinsky"),
        ("Peer_Gynt", "composedBy", "Grieg"),
        ("Carmen_Suite", "composedBy", "Bizet"),
        ("Moonlight_Sonata", "premieredIn", "Vienna"),
        ("Fifth_Symphony", "premieredIn", "Vienna"),
        ("Nocturne_Op9", "premieredIn", "Paris"),
        ("Bolero", "premieredIn", "Paris"),
        ("Firebird", "premieredIn", "Paris"),
        ("Peer_Gynt", "premieredIn", "Oslo"),
        ("Carmen_Suite", "premieredIn", "Madrid"),
        ("Beethoven", "birthPlace", "Bonn"),
        ("Chopin", "birthPlace", "Warsaw"),
        // transfer block: sports
        ("Harbor_Wolves", "coachedBy", "Mara_Quinn"),
        ("Granite_Lions", "coachedBy", "Otto_Graf"),
        ("River_Hawks", "coachedBy", "Ines_Varga"),
        ("Cedar_Bears", "coachedBy", "Pavel_Novak"),
        ("Summit_Foxes", "coachedBy", "Rita_Kohl"),
        ("Delta_Sharks", "coachedBy", "Omar_Said"),
        ("Prairie_Owls", "coachedBy", "Lena_Brandt"),
        ("Harbor_Wolves", "basedIn", "Kiel"),
        ("Granite_Lions", "basedIn", "Graz"),
        ("River_Hawks", "basedIn", "Lyon"),
        ("Cedar_Bears", "basedIn", "Brno"),
        ("Summit_Foxes", "basedIn", "Innsbruck"),
        ("Delta_Sharks", "basedIn", "Alexandria"),
        ("Prairie_Owls", "basedIn", "Winnipeg"),
        // transfer block: towns and mayors
        ("Ada_Lund", "mayorOf", "Kiel"),
        ("Bo_Hart", "mayorOf", "Graz"),
        ("Cleo_Marsh", "mayorOf", "Brno"),
        ("Dev_Rana", "mayorOf", "Innsbruck"),
        ("Eve_Salo", "mayorOf", "Alexandria"),
        ("Finn_Ward", "mayorOf", "Winnipeg"),
        ("Kiel", "locatedIn", "Germany"),
        ("Graz", "locatedIn", "Austria"),
        ("Brno", "locatedIn", "Czechia"),
        ("Innsbruck", "locatedIn", "Austria"),
        ("Alexandria", "locatedIn", "Egypt"),
        ("Winnipeg", "locatedIn", "Canada"),
    ]
}

/// (entity, class) assertions of the toy world.
pub fn world_types() -> Vec<(&'static str, &'static str)> {
    let mut t = vec![
        ("Yuri_Gagarin", "Astronaut"),
        ("Valentina_Tereshkova", "Astronaut"),
        ("Neil_Armstrong", "Astronaut"),
        ("Buzz_Aldrin", "Astronaut"),
        ("Michael_Collins", "Astronaut"),
        ("John_Wick", "Film"),
        ("Speed", "Film"),
        ("Bird_Box", "Film"),
        ("Evan_Almighty", "Film"),
        ("Bill_Ted_Show", "TelevisionShow"),
        ("The_Office", "TelevisionShow"),
        ("Solaris", "Book"),
        ("Dune", "Book"),
        ("Hyperion", "Book"),
        ("Roadside_Picnic", "Book"),
        ("Keanu_Reeves", "Person"),
        ("Sandra_Bullock", "Person"),
        ("Steve_Carell", "Person"),
    ];
    for city in [
        "Berlin", "Paris", "Madrid", "Rome", "Vienna", "Warsaw", "Munich", "Lyon", "Barcelona",
    ] {
        t.push((city, "City"));
    }
    for country in ["Germany", "France", "Spain", "Italy", "Austria", "Poland"] {
        t.push((country, "Country"));
    }
    t
}

/// The knowledge-graph file contents.
pub fn kg_text() -> String {
    let mut out = String::new();
    for (s, p, o) in world_triples() {
        out.push_str(&format!("{s}\t{p}\t{o}\n"));
    }
    for (e, c) in world_types() {
        out.push_str(&format!("{e}\trdf:type\t{c}\n"));
    }
    out
}

/// Independent evaluation of a gold chain by scanning the triple list.
struct Oracle {
    triples: Vec<Triple>,
    types: Vec<(&'static str, &'static str)>,
}

impl Oracle {
    fn new() -> Self {
        Oracle {
            triples: world_triples(),
            types: world_types(),
        }
    }

    fn step(&self, node: &str, dir: char, pred: &str) -> BTreeSet<String> {
        self.triples
            .iter()
            .filter_map(|&(s, p, o)| {
                if p != pred {
                    return None;
                }
                match dir {
                    '+' if s == node => Some(o.to_string()),
                    '-' if o == node => Some(s.to_string()),
                    _ => None,
                }
            })
            .collect()
    }

    fn has_class(&self, node: &str, class: &str) -> bool {
        self.types.iter().any(|&(e, c)| e == node && c == class)
    }

    /// Bindings (middle, terminal) of a chain; middle is empty for one hop.
    fn bindings(
        &self,
        root: &str,
        hops: &[(char, &str)],
        second: Option<&str>,
    ) -> Vec<(Option<String>, String)> {
        let mut out = Vec::new();
        if hops.len() == 1 {
            for t in self.step(root, hops[0].0, hops[0].1) {
                if second.map(|s| s == t).unwrap_or(true) {
                    out.push((None, t));
                }
            }
        } else {
            for v in self.step(root, hops[0].0, hops[0].1) {
                if v.starts_with('"') {
                    continue;
                }
                for t in self.step(&v, hops[1].0, hops[1].1) {
                    if second.map(|s| s == t).unwrap_or(true) {
                        out.push((Some(v.clone()), t.clone()));
                    }
                }
            }
        }
        out
    }

    fn gold_answers(
        &self,
        root: &str,
        hops: &[(char, &str)],
        second: Option<&str>,
        intent: &str,
        placement: &str,
        class: Option<&str>,
    ) -> serde_json::Value {
        let mut bindings = self.bindings(root, hops, second);
        if let Some(class) = class {
            bindings.retain(|(middle, terminal)| {
                let node = match placement {
                    "existential" => middle.as_deref().expect("existential needs two hops"),
                    "lambda" => {
                        if hops.len() == 2 && second.is_some() {
                            middle.as_deref().expect("two hops have a middle")
                        } else {
                            terminal.as_str()
                        }
                    }
                    other => panic!("no class expected for placement {other}"),
                };
                self.has_class(node, class)
            });
        }
        match intent {
            "ask" => json!({"kind": "boolean", "value": !bindings.is_empty()}),
            "set" | "count" => {
                let lambda_mid = hops.len() == 2 && second.is_some();
                let values: BTreeSet<String> = bindings
                    .into_iter()
                    .map(|(m, t)| if lambda_mid { m.expect("middle") } else { t })
                    .collect();
                if intent == "set" {
                    json!({"kind": "entity-set", "values": values})
                } else {
                    json!({"kind": "count", "value": values.len()})
                }
            }
            other => panic!("unknown intent {other}"),
        }
    }
}

struct Q {
    id: String,
    question: String,
    entities: Vec<&'static str>,
    hops: Vec<(char, &'static str)>,
    intent: &'static str,
    placement: &'static str,
    class: Option<&'static str>,
}

fn record(oracle: &Oracle, q: &Q) -> String {
    let second = if q.entities.len() == 2 {
        Some(q.entities[1])
    } else {
        None
    };
    let gold = oracle.gold_answers(
        q.entities[0],
        &q.hops,
        second,
        q.intent,
        q.placement,
        q.class,
    );
    let value = json!({
        "id": q.id,
        "question": q.question,
        "entities": q.entities,
        "gold_chain": q.hops.iter().map(|&(d, p)| json!({"dir": d.to_string(), "predicate": p})).collect::<Vec<_>>(),
        "intent": q.intent,
        "type_constraint": {"placement": q.placement, "class": q.class},
        "gold_answers": gold,
    });
    serde_json::to_string(&value).expect("serializable record")
}

fn q(
    id: String,
    question: String,
    entities: Vec<&'static str>,
    hops: Vec<(char, &'static str)>,
    intent: &'static str,
    placement: &'static str,
    class: Option<&'static str>,
) -> Q {
    Q {
        id,
        question,
        entities,
        hops,
        intent,
        placement,
        class,
    }
}

fn spaced(iri: &str) -> String {
    iri.replace('_', " ")
}

/// The 50-question training world.
pub fn dataset_a() -> String {
    let oracle = Oracle::new();
    let mut qs: Vec<Q> = Vec::new();

    // capitals
    for c in ["Germany", "France", "Spain", "Italy", "Austria", "Poland"] {
        qs.push(q(
            format!("cap-{c}"),
            format!("What is the capital of {}?", spaced(c)),
            vec![c],
            vec![('+', "capital")],
            "set",
            "none",
            None,
        ));
    }
    // filmographies with a class constraint on the answer
    for (a, noun, class) in [
        ("Keanu_Reeves", "movies", "Film"),
        ("Sandra_Bullock", "movies", "Film"),
        ("Steve_Carell", "movies", "Film"),
    ] {
        qs.push(q(
            format!("film-{a}"),
            format!("Which {noun} has {} starred in?", spaced(a)),
            vec![a],
            vec![('-', "starring")],
            "set",
            "lambda",
            Some(class),
        ));
    }
    // casts
    for f in ["John_Wick", "Speed", "Bird_Box", "Evan_Almighty", "The_Office"] {
        qs.push(q(
            format!("cast-{f}"),
            format!("Who starred in {}?", spaced(f)),
            vec![f],
            vec![('+', "starring")],
            "set",
            "none",
            None,
        ));
    }
    // astronaut birth places through the mission (existential constraint)
    for m in ["Vostok_Programme", "Apollo_11"] {
        qs.push(q(
            format!("astro-{m}"),
            format!(
                "What is the birth place of the astronaut whose mission was the {}?",
                spaced(m).to_lowercase()
            ),
            vec![m],
            vec![('-', "mission"), ('+', "birthPlace")],
            "set",
            "existential",
            Some("Astronaut"),
        ));
    }
    // boolean capital checks
    for (country, city) in [
        ("Germany", "Berlin"),
        ("France", "Paris"),
        ("Italy", "Rome"),
        ("Austria", "Vienna"),
    ] {
        qs.push(q(
            format!("ask-{country}"),
            format!("Is {} the capital of {}?", spaced(city), spaced(country)),
            vec![country, city],
            vec![('+', "capital")],
            "ask",
            "none",
            None,
        ));
    }
    // counts
    for m in ["Vostok_Programme", "Apollo_11"] {
        qs.push(q(
            format!("count-{m}"),
            format!(
                "How many astronauts flew on the {}?",
                spaced(m).to_lowercase()
            ),
            vec![m],
            vec![('-', "mission")],
            "count",
            "lambda",
            Some("Astronaut"),
        ));
    }
    for a in ["Keanu_Reeves", "Sandra_Bullock"] {
        qs.push(q(
            format!("count-{a}"),
            format!("How many movies has {} starred in?", spaced(a)),
            vec![a],
            vec![('-', "starring")],
            "count",
            "lambda",
            Some("Film"),
        ));
    }
    // directors
    for f in ["John_Wick", "Speed", "Bird_Box", "Evan_Almighty"] {
        qs.push(q(
            format!("dir-{f}"),
            format!("Who directed {}?", spaced(f)),
            vec![f],
            vec![('+', "directedBy")],
            "set",
            "none",
            None,
        ));
    }
    // authors
    for b in ["Solaris", "Dune", "Hyperion", "Roadside_Picnic"] {
        qs.push(q(
            format!("author-{b}"),
            format!("Who wrote {}?", spaced(b)),
            vec![b],
            vec![('+', "writtenBy")],
            "set",
            "none",
            None,
        ));
    }
    // city locations
    for c in ["Berlin", "Munich", "Paris", "Lyon", "Madrid", "Rome"] {
        qs.push(q(
            format!("loc-{c}"),
            format!("Where is {} located?", spaced(c)),
            vec![c],
            vec![('+', "locatedIn")],
            "set",
            "none",
            None,
        ));
    }
    // author birth places
    for b in ["Solaris", "Dune", "Hyperion", "Roadside_Picnic"] {
        qs.push(q(
            format!("abirth-{b}"),
            format!("Where was the author of {} born?", spaced(b)),
            vec![b],
            vec![('+', "writtenBy"), ('+', "birthPlace")],
            "set",
            "none",
            None,
        ));
    }
    // director birth places
    for f in ["John_Wick", "Speed", "Bird_Box", "Evan_Almighty"] {
        qs.push(q(
            format!("dbirth-{f}"),
            format!("Where was the director of {} born?", spaced(f)),
            vec![f],
            vec![('+', "directedBy"), ('+', "birthPlace")],
            "set",
            "none",
            None,
        ));
    }
    // cities by country with a class constraint
    for c in ["Germany", "France", "Spain"] {
        qs.push(q(
            format!("cities-{c}"),
            format!("Which cities are located in {}?", spaced(c)),
            vec![c],
            vec![('-', "locatedIn")],
            "set",
            "lambda",
            Some("City"),
        ));
    }
    // one mission lookup
    qs.push(q(
        "mission-Yuri_Gagarin".to_string(),
        "What was the mission of Yuri Gagarin?".to_string(),
        vec!["Yuri_Gagarin"],
        vec![('+', "mission")],
        "set",
        "none",
        None,
    ));

    assert_eq!(qs.len(), 50, "training world must have 50 questions");
    qs.iter()
        .map(|q| record(&oracle, q) + "\n")
        .collect()
}

/// The 20-question transfer world on predicates unseen in `dataset_a`.
pub fn dataset_b() -> String {
    let oracle = Oracle::new();
    let mut qs: Vec<Q> = Vec::new();
    for piece in [
        "Moonlight_Sonata",
        "Fifth_Symphony",
        "Nocturne_Op9",
        "Bolero",
        "Firebird",
        "Peer_Gynt",
        "Carmen_Suite",
    ] {
        qs.push(q(
            format!("comp-{piece}"),
            format!("Who composed {}?", spaced(piece)),
            vec![piece],
            vec![('+', "composedBy")],
            "set",
            "none",
            None,
        ));
    }
    for team in [
        "Harbor_Wolves",
        "Granite_Lions",
        "River_Hawks",
        "Cedar_Bears",
        "Summit_Foxes",
        "Delta_Sharks",
        "Prairie_Owls",
    ] {
        qs.push(q(
            format!("coach-{team}"),
            format!("Who coaches the {}?", spaced(team)),
            vec![team],
            vec![('+', "coachedBy")],
            "set",
            "none",
            None,
        ));
    }
    for town in ["Kiel", "Graz", "Brno", "Innsbruck", "Alexandria", "Winnipeg"] {
        qs.push(q(
            format!("mayor-{town}"),
            format!("Who is the mayor of {}?", spaced(town)),
            vec![town],
            vec![('-', "mayorOf")],
            "set",
            "none",
            None,
        ));
    }
    assert_eq!(qs.len(), 20, "transfer world must have 20 questions");
    qs.iter()
        .map(|q| record(&oracle, q) + "\n")
        .collect()
}

/// The three worked questions and their hand-derived answers.
pub struct WorkedQuestion {
    pub id: &'static str,
    pub expected: serde_json::Value,
}

pub fn worked_questions() -> Vec<WorkedQuestion> {
    vec![
        WorkedQuestion {
            id: "astro-Vostok_Programme",
            expected: json!({"kind": "entity-set", "values": ["Klushino", "Maslennikovo"]}),
        },
        WorkedQuestion {
            id: "ask-Germany",
            expected: json!({"kind": "boolean", "value": true}),
        },
        WorkedQuestion {
            id: "film-Keanu_Reeves",
            expected: json!({"kind": "entity-set", "values": ["John_Wick"]}),
        },
    ]
}
