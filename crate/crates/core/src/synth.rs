//! Seeded synthetic corpus with known gold slots. Some facts carry a dataset
//! label; others are only stated in the text and need the rule annotators.

use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;

use crate::evalkbp::{generate_queries, queries_string, ProtectedGold, SlotQuery};
use crate::graph::{EdgeProvenance, PropertyGraph};
use crate::ingest::{to_tacred_json, Dataset, SentenceRecord, Span};
use crate::inventory::{relation_attribute, NO_RELATION};
use crate::numcore::rng;

pub const PERSONS: usize = 20;
pub const SENTENCES: usize = 30;
pub const HOP0_QUERIES: usize = 10;
pub const PROTECTED_KEYS: [&str; 3] = ["age", "religion", "residence"];

const FIRST: [&str; 24] = [
    "Alice", "Brenda", "Carla", "Dmitri", "Elena", "Farid", "Gloria", "Hector", "Irene", "Jonas", "Karina", "Lionel",
    "Marta", "Nadia", "Oscar", "Priya", "Quentin", "Rosa", "Samuel", "Tanya", "Ulrich", "Vera", "Walter", "Yusuf",
];
const LAST: [&str; 20] = [
    "Abbott", "Barlow", "Castillo", "Dorsey", "Eriksen", "Fontaine", "Galloway", "Hartley", "Ibsen", "Jarvis",
    "Kowalski", "Lindqvist", "Moreau", "Novak", "Okafor", "Petrov", "Quinlan", "Rinaldi", "Sandoval", "Thorne",
];
const RELIGIONS: [&str; 8] = ["Baptist", "Buddhist", "Catholic", "Hindu", "Jewish", "Methodist", "Muslim", "Quaker"];
const CITIES: [&str; 10] = [
    "Atlanta", "Boston", "Cairo", "Dublin", "Lagos", "Little Rock", "Madrid", "Mumbai", "Seattle", "Toronto",
];
const SCHOOLS: [&str; 5] = [
    "Georgetown University",
    "Harvard University",
    "Stanford University",
    "University of Michigan",
    "Wellesley College",
];
const ORGS: [&str; 5] = ["Acme Corp", "General Electric", "Microsoft", "Reuters", "World Bank"];
const TITLES: [&str; 6] = ["ambassador", "engineer", "journalist", "lawyer", "professor", "teacher"];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub records: Vec<SentenceRecord>,
    /// Every fact the text states, as a graph.
    pub gold: PropertyGraph,
    pub protected: ProtectedGold,
    pub queries: Vec<SlotQuery>,
}

struct Person {
    name: String,
    religion: &'static str,
    residence: &'static str,
    birthplace: &'static str,
    school: &'static str,
    employer: &'static str,
    title: &'static str,
    age: u32,
}

enum Piece<'a> {
    Words(&'a str),
    Ent(&'a str, &'static str),
}

/// Token positions of the labelled pair and the relation between them.
struct Sentence<'a> {
    pieces: Vec<Piece<'a>>,
    subj: usize,
    obj: usize,
    relation: &'a str,
}

fn build(id: String, s: Sentence) -> SentenceRecord {
    let mut tokens = Vec::new();
    let mut ner = Vec::new();
    let mut spans = Vec::new();
    for p in &s.pieces {
        let (text, tag) = match p {
            Piece::Words(w) => (*w, None),
            Piece::Ent(w, t) => (*w, Some(*t)),
        };
        let start = tokens.len();
        for w in text.split_whitespace() {
            tokens.push(w.to_string());
            ner.push(if tag == Some("PERSON") { "PERSON" } else { "O" }.to_string());
        }
        if let Some(t) = tag {
            spans.push((Span::new(start, tokens.len() - 1), t));
        }
    }
    let (subj_span, subj_type) = spans[s.subj];
    let (obj_span, obj_type) = spans[s.obj];
    SentenceRecord {
        id,
        tokens,
        subj_span,
        obj_span,
        subj_type: subj_type.into(),
        obj_type: obj_type.into(),
        relation: s.relation.into(),
        pos_tags: None,
        ner_tags: Some(ner),
    }
}

/// What a sentence states: person-person facts and attribute facts.
#[derive(Default)]
struct Facts {
    edges: Vec<(usize, usize, &'static str)>,
    attrs: Vec<(usize, &'static str, String)>,
}

pub fn generate_corpus(seed: u64) -> SynthCorpus {
    let mut r = rng::seeded(rng::substream(seed, "corpus"));
    let mut names: Vec<String> = Vec::new();
    while names.len() < PERSONS {
        let n = format!("{} {}", FIRST.choose(&mut r).unwrap(), LAST.choose(&mut r).unwrap());
        let taken = |x: &String| x.split(' ').any(|w| n.split(' ').any(|v| v == w));
        if !names.iter().any(taken) {
            names.push(n);
        }
    }
    let people: Vec<Person> = names
        .into_iter()
        .map(|name| Person {
            name,
            religion: RELIGIONS.choose(&mut r).unwrap(),
            residence: CITIES.choose(&mut r).unwrap(),
            birthplace: CITIES.choose(&mut r).unwrap(),
            school: SCHOOLS.choose(&mut r).unwrap(),
            employer: ORGS.choose(&mut r).unwrap(),
            title: TITLES.choose(&mut r).unwrap(),
            age: r.random_range(21..90),
        })
        .collect();
    let mut order: Vec<usize> = (0..PERSONS).collect();
    order.shuffle(&mut r);
    let p = |i: usize| &people[order[i]];
    let visit_city = *CITIES.choose(&mut r).unwrap();

    use Piece::{Ent, Words};
    let mut sentences: Vec<(Sentence, Facts)> = Vec::new();
    let edge = |a: usize, b: usize, rel: &'static str| Facts {
        edges: vec![(order[a], order[b], rel)],
        attrs: vec![],
    };
    let per = "PERSON";
    sentences.push((
        Sentence {
            pieces: vec![Ent(&p(0).name, per), Words("married"), Ent(&p(1).name, per), Words("last year .")],
            subj: 0,
            obj: 1,
            relation: "per:spouse",
        },
        edge(0, 1, "per:spouse"),
    ));
    sentences.push((
        Sentence {
            pieces: vec![Ent(&p(2).name, per), Words("and spouse"), Ent(&p(3).name, per), Words("attended the gala .")],
            subj: 0,
            obj: 1,
            relation: "per:spouse",
        },
        edge(2, 3, "per:spouse"),
    ));
    sentences.push((
        Sentence {
            pieces: vec![
                Ent(&p(4).name, per),
                Words("married"),
                Ent(&p(5).name, per),
                Ent("last spring", "DATE"),
                Words(", friends said ."),
            ],
            subj: 0,
            obj: 2,
            relation: NO_RELATION,
        },
        edge(4, 5, "per:spouse"),
    ));
    sentences.push((
        Sentence {
            pieces: vec![
                Ent(&p(6).name, per),
                Words("visited"),
                Ent(visit_city, "CITY"),
                Words("with spouse"),
                Ent(&p(7).name, per),
                Words("on Monday ."),
            ],
            subj: 0,
            obj: 1,
            relation: NO_RELATION,
        },
        edge(6, 7, "per:spouse"),
    ));
    sentences.push((
        Sentence {
            pieces: vec![Ent(&p(8).name, per), Words("and"), Ent(&p(9).name, per), Words("are siblings , the family said .")],
            subj: 0,
            obj: 1,
            relation: "per:siblings",
        },
        edge(8, 9, "per:siblings"),
    ));
    sentences.push((
        Sentence {
            pieces: vec![
                Ent(&p(10).name, per),
                Words("spoke on"),
                Ent("Tuesday", "DATE"),
                Words(", alongside sister"),
                Ent(&p(11).name, per),
                Words("."),
            ],
            subj: 0,
            obj: 1,
            relation: NO_RELATION,
        },
        edge(10, 11, "per:siblings"),
    ));
    sentences.push((
        Sentence {
            pieces: vec![Ent(&p(12).name, per), Words(", the child of"), Ent(&p(0).name, per), Words(", studied law .")],
            subj: 0,
            obj: 1,
            relation: "per:parents",
        },
        edge(12, 0, "per:parents"),
    ));
    sentences.push((
        Sentence {
            pieces: vec![
                Ent(&p(13).name, per),
                Words(", son of"),
                Ent(&p(2).name, per),
                Words(", arrived on"),
                Ent("Friday", "DATE"),
                Words("."),
            ],
            subj: 0,
            obj: 2,
            relation: NO_RELATION,
        },
        edge(13, 2, "per:parents"),
    ));

    let ages: Vec<String> = people.iter().map(|x| x.age.to_string()).collect();
    for i in 0..SENTENCES - sentences.len() {
        let k = order[i % PERSONS];
        let x = &people[k];
        let age = ages[k].as_str();
        let fact = |rel: &'static str, v: &str| (k, relation_attribute(rel).unwrap(), v.to_string());
        let (pieces, obj, relation, attrs) = match i % 6 {
            0 => (
                vec![
                    Ent(&x.name, per),
                    Words(", who is a devout"),
                    Ent(x.religion, "RELIGION"),
                    Words(", works for"),
                    Ent(x.employer, "ORGANIZATION"),
                    Words("."),
                ],
                2,
                "per:employee_of",
                vec![fact("per:employee_of", x.employer), fact("per:religion", x.religion)],
            ),
            1 => (
                vec![
                    Ent(&x.name, per),
                    Words(","),
                    Ent(age, "NUMBER"),
                    Words(", graduated from"),
                    Ent(x.school, "ORGANIZATION"),
                    Words("."),
                ],
                2,
                "per:schools_attended",
                vec![fact("per:schools_attended", x.school), fact("per:age", age)],
            ),
            2 => (
                vec![
                    Ent(&x.name, per),
                    Words("lives in"),
                    Ent(x.residence, "CITY"),
                    Words("and served as"),
                    Ent(x.title, "TITLE"),
                    Words("."),
                ],
                2,
                "per:title",
                vec![fact("per:title", x.title), fact("per:cities_of_residence", x.residence)],
            ),
            3 => (
                vec![
                    Ent(&x.name, per),
                    Words("was born in"),
                    Ent(x.birthplace, "CITY"),
                    Words("and works for"),
                    Ent(x.employer, "ORGANIZATION"),
                    Words("."),
                ],
                2,
                "per:employee_of",
                vec![fact("per:employee_of", x.employer), fact("per:city_of_birth", x.birthplace)],
            ),
            4 => (
                vec![
                    Ent(&x.name, per),
                    Words("is a"),
                    Ent(x.religion, "RELIGION"),
                    Words("and lives in"),
                    Ent(x.residence, "CITY"),
                    Words("."),
                ],
                2,
                "per:cities_of_residence",
                vec![fact("per:cities_of_residence", x.residence), fact("per:religion", x.religion)],
            ),
            _ => (
                vec![
                    Ent(&x.name, per),
                    Words(","),
                    Ent(age, "NUMBER"),
                    Words(", is a devout"),
                    Ent(x.religion, "RELIGION"),
                    Words("."),
                ],
                2,
                "per:religion",
                vec![fact("per:religion", x.religion), fact("per:age", age)],
            ),
        };
        sentences.push((
            Sentence {
                pieces,
                subj: 0,
                obj,
                relation,
            },
            Facts { edges: vec![], attrs },
        ));
    }

    let mut gold = PropertyGraph::new();
    for x in &people {
        gold.resolve_person(&x.name).expect("generated names are nonempty");
    }
    let mut protected: ProtectedGold = BTreeMap::new();
    let mut records = Vec::with_capacity(SENTENCES);
    for (i, (s, facts)) in sentences.into_iter().enumerate() {
        for (a, b, rel) in facts.edges {
            gold.add_edge(a, b, rel, EdgeProvenance::Dataset, 1.0).expect("distinct persons");
        }
        for (k, key, value) in facts.attrs {
            gold.add_attribute(k, key, &value).expect("known person");
            if PROTECTED_KEYS.contains(&key) {
                protected
                    .entry(people[k].name.clone())
                    .or_default()
                    .entry(key.to_string())
                    .or_default()
                    .insert(value);
            }
        }
        records.push(build(format!("synth-{i:02}"), s));
    }
    let queries = generate_queries(&gold, HOP0_QUERIES, rng::substream(seed, "queries"));
    SynthCorpus {
        records,
        gold,
        protected,
        queries,
    }
}

pub fn protected_gold_string(gold: &ProtectedGold) -> String {
    let mut out = String::new();
    for (person, attrs) in gold {
        for (attr, values) in attrs {
            let v: Vec<&str> = values.iter().map(String::as_str).collect();
            out.push_str(&format!("{person}\t{attr}\t{}\n", v.join("|")));
        }
    }
    out
}

/// File names and contents for a corpus: records, queries, protected gold.
pub fn corpus_files(c: &SynthCorpus) -> [(&'static str, String); 3] {
    [
        ("corpus.json", to_tacred_json(&Dataset::from_records(c.records.clone()))),
        ("queries.tsv", queries_string(&c.queries)),
        ("protected_gold.tsv", protected_gold_string(&c.protected)),
    ]
}
