//! JSON documents for spaces, measures, process laws, families and lifts.
//!
//! Spaces can be given inline or as `{"space_ref": "<id>"}`, resolved
//! against a sidecar table `{"<id>": <space>, ...}`. Emitted documents always
//! inline their spaces so they stand alone.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::adapted::LiftedMeasure;
use crate::error::{Error, Result};
use crate::measures::{DiscreteMeasure, MassKind, PairedMeasure, ProcessLaw};
use crate::spaces::{FiniteMetricSpace, Point, ProductSpace};

/// Named spaces that documents may refer to.
#[derive(Debug, Clone, Default)]
pub struct SpaceTable(BTreeMap<String, Arc<FiniteMetricSpace>>);

impl SpaceTable {
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: BTreeMap<String, RawSpace> = serde_json::from_str(text)?;
        let mut out = BTreeMap::new();
        for (id, s) in raw {
            out.insert(id, Arc::new(s.build()?));
        }
        Ok(SpaceTable(out))
    }

    pub fn insert(&mut self, id: impl Into<String>, space: Arc<FiniteMetricSpace>) {
        self.0.insert(id.into(), space);
    }

    fn get(&self, id: &str) -> Result<Arc<FiniteMetricSpace>> {
        self.0
            .get(id)
            .cloned()
            .ok_or_else(|| Error::malformed(format!("unknown space_ref {id:?}")))
    }
}

#[derive(Deserialize)]
struct RawSpace {
    #[serde(default)]
    labels: Option<Vec<String>>,
    d: Vec<Vec<f64>>,
    #[serde(default)]
    base_point: usize,
}

impl RawSpace {
    fn build(self) -> Result<FiniteMetricSpace> {
        let labels = self.labels.unwrap_or_else(|| (0..self.d.len()).map(|i| i.to_string()).collect());
        FiniteMetricSpace::new(labels, self.d, self.base_point)
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SpaceEntry {
    Ref { space_ref: String },
    Inline(RawSpace),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SpaceSpec {
    Product(Vec<SpaceEntry>),
    Single(SpaceEntry),
}

#[derive(Serialize, Deserialize)]
struct AtomDoc {
    point: Point,
    w: f64,
}

#[derive(Serialize, Deserialize)]
struct PathDoc {
    path: Point,
    w: f64,
}

fn probability() -> MassKind {
    MassKind::Probability
}

#[derive(Deserialize)]
struct MeasureIn {
    space: SpaceSpec,
    atoms: Vec<AtomDoc>,
    #[serde(default = "probability")]
    kind: MassKind,
    #[serde(default)]
    split: Option<usize>,
}

#[derive(Deserialize)]
struct ProcessIn {
    spaces: Vec<SpaceEntry>,
    paths: Vec<PathDoc>,
}

#[derive(Serialize)]
struct MeasureOut<'a> {
    space: Vec<&'a FiniteMetricSpace>,
    atoms: Vec<AtomDoc>,
    kind: MassKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    split: Option<usize>,
}

#[derive(Serialize)]
struct ProcessOut<'a> {
    spaces: Vec<&'a FiniteMetricSpace>,
    paths: Vec<PathDoc>,
}

#[derive(Serialize, Deserialize)]
struct LiftedAtomDoc {
    prefix: Point,
    law: usize,
    w: f64,
}

#[derive(Serialize, Deserialize)]
struct LiftedDoc {
    p: f64,
    prefix_spaces: Vec<FiniteMetricSpace>,
    tail_spaces: Vec<FiniteMetricSpace>,
    laws: Vec<Vec<AtomDoc>>,
    law_distances: Vec<Vec<f64>>,
    atoms: Vec<LiftedAtomDoc>,
}

/// A parsed input document.
#[derive(Debug, Clone)]
pub enum Document {
    Space(FiniteMetricSpace),
    /// A measure with its optional split into `X` and `Y` factors.
    Measure(DiscreteMeasure, Option<usize>),
    Process(ProcessLaw),
    Lifted(LiftedMeasure),
    Family(Vec<Document>),
}

impl Document {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Document::Space(_) => "space",
            Document::Measure(..) => "measure",
            Document::Process(_) => "process law",
            Document::Lifted(_) => "lifted measure",
            Document::Family(_) => "family",
        }
    }
}

fn resolve(entry: SpaceEntry, table: &SpaceTable) -> Result<Arc<FiniteMetricSpace>> {
    match entry {
        SpaceEntry::Ref { space_ref } => table.get(&space_ref),
        SpaceEntry::Inline(raw) => Ok(Arc::new(raw.build()?)),
    }
}

fn resolve_all(entries: Vec<SpaceEntry>, table: &SpaceTable) -> Result<Vec<Arc<FiniteMetricSpace>>> {
    entries.into_iter().map(|e| resolve(e, table)).collect()
}

/// Shares one `Arc` per distinct factor so repeated inline copies compare cheaply.
fn intern(factors: Vec<Arc<FiniteMetricSpace>>) -> Vec<Arc<FiniteMetricSpace>> {
    let mut seen: Vec<Arc<FiniteMetricSpace>> = Vec::new();
    factors
        .into_iter()
        .map(|f| match seen.iter().find(|s| ***s == *f) {
            Some(s) => s.clone(),
            None => {
                seen.push(f.clone());
                f
            }
        })
        .collect()
}

fn parse_value(v: Value, table: &SpaceTable) -> Result<Document> {
    if let Value::Array(items) = v {
        return Ok(Document::Family(items.into_iter().map(|x| parse_value(x, table)).collect::<Result<_>>()?));
    }
    let obj = v.as_object().ok_or_else(|| Error::malformed("expected a JSON object or array"))?;
    if obj.contains_key("members") {
        let members = match v {
            Value::Object(mut m) => m.remove("members").unwrap_or(Value::Null),
            _ => unreachable!(),
        };
        return match members {
            Value::Array(items) => parse_value(Value::Array(items), table),
            _ => Err(Error::malformed("\"members\" must be an array")),
        };
    }
    if obj.contains_key("laws") {
        let doc: LiftedDoc = serde_json::from_value(v)?;
        return Ok(Document::Lifted(lifted_from_doc(doc)?));
    }
    if obj.contains_key("paths") {
        let doc: ProcessIn = serde_json::from_value(v)?;
        let spaces = intern(resolve_all(doc.spaces, table)?);
        return Ok(Document::Process(ProcessLaw::new(spaces, doc.paths.into_iter().map(|p| (p.path, p.w)))?));
    }
    if obj.contains_key("atoms") {
        let doc: MeasureIn = serde_json::from_value(v)?;
        let factors = match doc.space {
            SpaceSpec::Product(list) => resolve_all(list, table)?,
            SpaceSpec::Single(one) => vec![resolve(one, table)?],
        };
        let space = Arc::new(ProductSpace::new(intern(factors))?);
        let m = DiscreteMeasure::new(space, doc.atoms.into_iter().map(|a| (a.point, a.w)).collect::<Vec<_>>(), doc.kind)?;
        return Ok(Document::Measure(m, doc.split));
    }
    if obj.contains_key("d") {
        let raw: RawSpace = serde_json::from_value(v)?;
        return Ok(Document::Space(raw.build()?));
    }
    Err(Error::malformed("unrecognised document: expected a space, measure, process law, family or lifted measure"))
}

pub fn parse_document(text: &str, table: &SpaceTable) -> Result<Document> {
    let v: Value = serde_json::from_str(text)?;
    parse_value(v, table)
}

fn lifted_from_doc(doc: LiftedDoc) -> Result<LiftedMeasure> {
    let wrap = |v: Vec<FiniteMetricSpace>| -> Result<Arc<ProductSpace>> {
        Ok(Arc::new(ProductSpace::new(intern(v.into_iter().map(Arc::new).collect()))?))
    };
    let x = wrap(doc.prefix_spaces)?;
    let y = wrap(doc.tail_spaces)?;
    let laws = doc
        .laws
        .into_iter()
        .map(|atoms| DiscreteMeasure::probability(y.clone(), atoms.into_iter().map(|a| (a.point, a.w)).collect::<Vec<_>>()))
        .collect::<Result<Vec<_>>>()?;
    let atoms = doc
        .atoms
        .into_iter()
        .map(|a| {
            let law = laws.get(a.law).cloned().ok_or_else(|| Error::malformed(format!("law index {} out of range", a.law)))?;
            Ok((a.prefix, law, a.w))
        })
        .collect::<Result<Vec<_>>>()?;
    LiftedMeasure::new(x, y, atoms, doc.p)
}

fn atom_docs(m: &DiscreteMeasure) -> Vec<AtomDoc> {
    m.atoms().iter().map(|a| AtomDoc { point: a.point.clone(), w: a.weight }).collect()
}

pub fn space_to_json(s: &FiniteMetricSpace) -> String {
    serde_json::to_string_pretty(s).expect("spaces serialize")
}

pub fn measure_to_json(m: &DiscreteMeasure, split: Option<usize>) -> String {
    let out = MeasureOut {
        space: m.space().factors().iter().map(|f| f.as_ref()).collect(),
        atoms: atom_docs(m),
        kind: m.kind(),
        split,
    };
    serde_json::to_string_pretty(&out).expect("measures serialize")
}

pub fn paired_to_json(m: &PairedMeasure) -> String {
    measure_to_json(m.measure(), Some(m.split()))
}

pub fn process_to_json(m: &ProcessLaw) -> String {
    let out = ProcessOut {
        spaces: m.spaces().iter().map(|f| f.as_ref()).collect(),
        paths: m.paths().iter().map(|a| PathDoc { path: a.point.clone(), w: a.weight }).collect(),
    };
    serde_json::to_string_pretty(&out).expect("process laws serialize")
}

pub fn lifted_to_json(l: &LiftedMeasure) -> String {
    let doc = LiftedDoc {
        p: l.p(),
        prefix_spaces: l.x_space().factors().iter().map(|f| (**f).clone()).collect(),
        tail_spaces: l.y_space().factors().iter().map(|f| (**f).clone()).collect(),
        laws: l.laws().iter().map(atom_docs).collect(),
        law_distances: l.law_distances().matrix().to_vec(),
        atoms: l
            .atoms()
            .iter()
            .map(|a| LiftedAtomDoc { prefix: a.x.clone(), law: a.law, w: a.weight })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("lifted measures serialize")
}

/// Reads a measure as a paired measure, taking the split from the document
/// or defaulting to one `X` factor for two-factor spaces.
pub fn as_paired(m: DiscreteMeasure, split: Option<usize>) -> Result<PairedMeasure> {
    let split = match split {
        Some(s) => s,
        None if m.space().arity() == 2 => 1,
        None => return Err(Error::malformed("a \"split\" field is required for measures on more than two factors")),
    };
    PairedMeasure::new(m, split)
}
