//! Events and rules as sets of typed key/value triples.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::BufRead;
use std::sync::RwLock;

use globset::{Glob, GlobSet, GlobSetBuilder};
use serde_json::{Map, Value};

use crate::regex::Pattern;

#[derive(Debug, thiserror::Error)]
pub enum EventError {
    #[error("event is not a JSON object")]
    NotAnObject,
    #[error("event has no modeled fields")]
    Empty,
    #[error("duplicate flattened key {0:?}")]
    DuplicateKey(String),
    #[error("invalid _label {0}; expected \"normal\" or \"anomaly\"")]
    BadLabel(String),
    #[error("no value for ({key}, {ty})")]
    Missing { key: String, ty: String },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("bad glob {0:?}: {1}")]
    Glob(String, globset::Error),
    #[error("type config: {0}")]
    Shape(String),
    #[error("type name for {0:?} is empty")]
    EmptyType(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Normal,
    Anomaly,
}

/// One `(key, value, type)` triple.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntityTriple {
    pub key: String,
    pub value: Pattern,
    pub ty: String,
}

impl EntityTriple {
    pub fn new(key: impl Into<String>, value: Pattern, ty: impl Into<String>) -> Self {
        EntityTriple {
            key: key.into(),
            value,
            ty: ty.into(),
        }
    }

    pub fn literal(key: impl Into<String>, value: &str, ty: impl Into<String>) -> Self {
        Self::new(key, Pattern::literal(value), ty)
    }
}

/// The set of `(key, type)` pairs of an event or rule, kept sorted.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Signature(pub Vec<(String, String)>);

impl Signature {
    pub fn new(mut pairs: Vec<(String, String)>) -> Self {
        pairs.sort();
        pairs.dedup();
        Signature(pairs)
    }

    pub fn pairs(&self) -> &[(String, String)] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(k, t)| format!("{k}:{t}")).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

/// A set of triples with unique keys, sorted by key.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EventRecord {
    triples: Vec<EntityTriple>,
    pub label: Option<Label>,
}

impl EventRecord {
    pub fn new(mut triples: Vec<EntityTriple>) -> Result<Self, EventError> {
        if triples.is_empty() {
            return Err(EventError::Empty);
        }
        triples.sort_by(|a, b| a.key.cmp(&b.key));
        for w in triples.windows(2) {
            if w[0].key == w[1].key {
                return Err(EventError::DuplicateKey(w[0].key.clone()));
            }
        }
        Ok(EventRecord {
            triples,
            label: None,
        })
    }

    pub fn with_label(mut self, label: Option<Label>) -> Self {
        self.label = label;
        self
    }

    pub fn triples(&self) -> &[EntityTriple] {
        &self.triples
    }

    pub fn signature(&self) -> Signature {
        Signature(
            self.triples
                .iter()
                .map(|t| (t.key.clone(), t.ty.clone()))
                .collect(),
        )
    }

    pub fn value_at(&self, key: &str, ty: &str) -> Result<&Pattern, EventError> {
        self.triples
            .binary_search_by(|t| t.key.as_str().cmp(key))
            .ok()
            .map(|i| &self.triples[i])
            .filter(|t| t.ty == ty)
            .map(|t| &t.value)
            .ok_or_else(|| EventError::Missing {
                key: key.to_string(),
                ty: ty.to_string(),
            })
    }
}

pub fn signature(e: &EventRecord) -> Signature {
    e.signature()
}

/// Key-path typing and field selection.
///
/// Type rules are tried in order and the first matching glob wins. Keys no
/// rule matches get `default_type` or, when that is unset, their own path.
/// Vertices whose type is listed in `closed_types` are never generalized.
#[derive(Debug)]
pub struct TypeConfig {
    rules: Vec<(String, String)>,
    rule_set: GlobSet,
    include: Vec<String>,
    include_set: Option<GlobSet>,
    exclude: Vec<String>,
    exclude_set: GlobSet,
    pub default_type: Option<String>,
    pub closed_types: Vec<String>,
    cache: RwLock<HashMap<String, Option<String>>>,
}

impl Clone for TypeConfig {
    fn clone(&self) -> Self {
        TypeConfig::new(
            self.rules.clone(),
            self.include.clone(),
            self.exclude.clone(),
            self.default_type.clone(),
            self.closed_types.clone(),
        )
        .expect("already validated")
    }
}

impl Default for TypeConfig {
    fn default() -> Self {
        TypeConfig::new(vec![], vec![], vec![], None, vec![]).expect("empty config")
    }
}

fn glob_set(globs: &[String]) -> Result<GlobSet, ConfigError> {
    let mut b = GlobSetBuilder::new();
    for g in globs {
        b.add(Glob::new(g).map_err(|e| ConfigError::Glob(g.clone(), e))?);
    }
    b.build().map_err(|e| ConfigError::Glob(globs.join(","), e))
}

impl TypeConfig {
    pub fn new(
        rules: Vec<(String, String)>,
        include: Vec<String>,
        exclude: Vec<String>,
        default_type: Option<String>,
        closed_types: Vec<String>,
    ) -> Result<Self, ConfigError> {
        for (g, t) in &rules {
            if t.is_empty() {
                return Err(ConfigError::EmptyType(g.clone()));
            }
        }
        if default_type.as_deref() == Some("") {
            return Err(ConfigError::EmptyType("default".into()));
        }
        let globs: Vec<String> = rules.iter().map(|(g, _)| g.clone()).collect();
        Ok(TypeConfig {
            rule_set: glob_set(&globs)?,
            include_set: if include.is_empty() {
                None
            } else {
                Some(glob_set(&include)?)
            },
            exclude_set: glob_set(&exclude)?,
            rules,
            include,
            exclude,
            default_type,
            closed_types,
            cache: RwLock::new(HashMap::new()),
        })
    }

    /// Accepts either a flat object `{glob: type}` or
    /// `{"types": {glob: type}, "include": [..], "exclude": [..],
    /// "default_type": "..", "closed_types": [..]}`.
    pub fn from_json(v: &Value) -> Result<Self, ConfigError> {
        let obj = v
            .as_object()
            .ok_or_else(|| ConfigError::Shape("expected a JSON object".into()))?;
        let structured = obj.get("types").map(Value::is_object).unwrap_or(false);
        let types = if structured { obj["types"].as_object().unwrap() } else { obj };
        let mut rules = Vec::new();
        for (g, t) in types {
            let t = t
                .as_str()
                .ok_or_else(|| ConfigError::Shape(format!("type for {g:?} must be a string")))?;
            rules.push((g.clone(), t.to_string()));
        }
        let strings = |name: &str| -> Result<Vec<String>, ConfigError> {
            if !structured {
                return Ok(vec![]);
            }
            match obj.get(name) {
                None | Some(Value::Null) => Ok(vec![]),
                Some(Value::Array(a)) => a
                    .iter()
                    .map(|x| {
                        x.as_str()
                            .map(str::to_string)
                            .ok_or_else(|| ConfigError::Shape(format!("{name} must hold strings")))
                    })
                    .collect(),
                Some(_) => Err(ConfigError::Shape(format!("{name} must be an array"))),
            }
        };
        let default_type = if structured {
            obj.get("default_type").and_then(Value::as_str).map(str::to_string)
        } else {
            None
        };
        TypeConfig::new(
            rules,
            strings("include")?,
            strings("exclude")?,
            default_type,
            strings("closed_types")?,
        )
    }

    pub fn to_json(&self) -> Value {
        let types: Map<String, Value> = self
            .rules
            .iter()
            .map(|(g, t)| (g.clone(), Value::String(t.clone())))
            .collect();
        let mut out = Map::new();
        out.insert("types".into(), Value::Object(types));
        out.insert("include".into(), self.include.clone().into());
        out.insert("exclude".into(), self.exclude.clone().into());
        if let Some(d) = &self.default_type {
            out.insert("default_type".into(), d.clone().into());
        }
        out.insert("closed_types".into(), self.closed_types.clone().into());
        Value::Object(out)
    }

    pub fn is_closed(&self, ty: &str) -> bool {
        self.closed_types.iter().any(|t| t == ty)
    }

    /// Type of a key, or `None` if the key is filtered out.
    pub fn type_of(&self, key: &str) -> Option<String> {
        if let Some(hit) = self.cache.read().unwrap().get(key) {
            return hit.clone();
        }
        let kept = self.include_set.as_ref().is_none_or(|s| s.is_match(key))
            && !self.exclude_set.is_match(key);
        let ty = kept.then(|| {
            self.rule_set
                .matches(key)
                .into_iter()
                .min()
                .map(|i| self.rules[i].1.clone())
                .or_else(|| self.default_type.clone())
                .unwrap_or_else(|| key.to_string())
        });
        self.cache.write().unwrap().insert(key.to_string(), ty.clone());
        ty
    }
}

fn leaf_string(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        Value::Bool(b) => b.to_string(),
        Value::Null => "null".to_string(),
        other => other.to_string(),
    }
}

fn walk(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let join = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match v {
        Value::Object(m) if !m.is_empty() => {
            for (k, child) in m {
                walk(&join(k), child, out);
            }
        }
        Value::Array(a) if !a.is_empty() => {
            for (i, child) in a.iter().enumerate() {
                walk(&join(&i.to_string()), child, out);
            }
        }
        leaf => out.push((prefix.to_string(), leaf_string(leaf))),
    }
}

/// Flattened `(key, type, value)` leaves plus the optional evaluation label.
pub type FlatEvent = (Vec<(String, String, String)>, Option<Label>);

/// Flattens a document to typed string leaves, sorted by key.
pub fn flatten_strings(doc: &Value, config: &TypeConfig) -> Result<FlatEvent, EventError> {
    let obj = doc.as_object().ok_or(EventError::NotAnObject)?;
    let mut label = None;
    let mut leaves = Vec::with_capacity(obj.len() * 2);
    for (k, v) in obj {
        if k == "_label" {
            label = Some(match v.as_str() {
                Some("normal") => Label::Normal,
                Some("anomaly") | Some("anomalous") => Label::Anomaly,
                _ => return Err(EventError::BadLabel(v.to_string())),
            });
            continue;
        }
        walk(k, v, &mut leaves);
    }
    let mut typed: Vec<(String, String, String)> = Vec::with_capacity(leaves.len());
    for (key, value) in leaves {
        if let Some(ty) = config.type_of(&key) {
            typed.push((key, ty, value));
        }
    }
    if typed.is_empty() {
        return Err(EventError::Empty);
    }
    typed.sort_by(|a, b| a.0.cmp(&b.0));
    for w in typed.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(EventError::DuplicateKey(w[0].0.clone()));
        }
    }
    Ok((typed, label))
}

pub fn flatten_event(doc: &Value, config: &TypeConfig) -> Result<EventRecord, EventError> {
    let (leaves, label) = flatten_strings(doc, config)?;
    let triples = leaves
        .into_iter()
        .map(|(k, t, v)| EntityTriple::new(k, Pattern::literal(v), t))
        .collect();
    Ok(EventRecord::new(triples)?.with_label(label))
}

pub fn parse_event_line(line: &str, config: &TypeConfig) -> Result<EventRecord, EventError> {
    let doc: Value = serde_json::from_str(line)?;
    flatten_event(&doc, config)
}

/// Reads a JSONL stream, skipping blank lines. Errors carry 1-based line numbers.
pub fn read_events<R: BufRead>(
    reader: R,
    config: &TypeConfig,
) -> Vec<Result<EventRecord, (usize, EventError)>> {
    reader
        .lines()
        .enumerate()
        .filter_map(|(i, line)| match line {
            Ok(l) if l.trim().is_empty() => None,
            Ok(l) => Some(parse_event_line(&l, config).map_err(|e| (i + 1, e))),
            Err(e) => Some(Err((i + 1, EventError::Json(serde_json::Error::io(e))))),
        })
        .collect()
}

/// Reads a JSONL stream, failing on the first malformed line.
pub fn read_events_strict<R: BufRead>(
    reader: R,
    config: &TypeConfig,
) -> anyhow::Result<Vec<EventRecord>> {
    read_events(reader, config)
        .into_iter()
        .map(|r| r.map_err(|(line, e)| anyhow::anyhow!("line {line}: {e}")))
        .collect()
}

/// Unflattens an event back into a nested JSON document (literal values only).
pub fn to_document(e: &EventRecord) -> Value {
    let mut root = Map::new();
    for t in e.triples() {
        let value = Value::String(t.value.as_literal().unwrap_or_default().to_string());
        let parts: Vec<&str> = t.key.split('.').collect();
        let mut node = &mut root;
        for p in &parts[..parts.len() - 1] {
            node = node
                .entry(p.to_string())
                .or_insert_with(|| Value::Object(Map::new()))
                .as_object_mut()
                .expect("key paths never collide with leaves");
        }
        node.insert(parts[parts.len() - 1].to_string(), value);
    }
    if let Some(l) = e.label {
        root.insert("_label".into(), serde_json::to_value(l).unwrap());
    }
    Value::Object(root)
}

pub fn literal_map(e: &EventRecord) -> BTreeMap<String, String> {
    e.triples()
        .iter()
        .map(|t| (t.key.clone(), t.value.to_string()))
        .collect()
}
