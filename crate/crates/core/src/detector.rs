//! Rulesets and event classification.

use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::event::{flatten_strings, EventError, EventRecord, Signature, TypeConfig};
use crate::hypergraph::RuleHypergraph;
use crate::regex::{intersects, parse, Matcher, ParseError, Pattern};
use crate::similarity::{representatives, string_distance};

pub const FORMAT_VERSION: &str = "1";

#[derive(Debug, thiserror::Error)]
pub enum RulesetError {
    #[error("ruleset JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("ruleset: {0}")]
    Shape(String),
    #[error("rule {rule}: {source}")]
    Pattern { rule: String, source: ParseError },
    #[error("rule {0}: signature and patterns disagree")]
    Keys(String),
    #[error("type config: {0}")]
    Types(#[from] crate::event::ConfigError),
}

#[derive(Clone, Debug)]
pub struct Rule {
    pub id: String,
    pub support: usize,
    pub signature: Signature,
    /// One pattern per signature entry, in signature order.
    pub patterns: Vec<Pattern>,
    matchers: Vec<Matcher>,
}

impl Rule {
    pub fn new(id: String, support: usize, signature: Signature, patterns: Vec<Pattern>) -> Self {
        let matchers = patterns.iter().map(Matcher::new).collect();
        Rule {
            id,
            support,
            signature,
            patterns,
            matchers,
        }
    }

    pub fn pattern(&self, key: &str) -> Option<&Pattern> {
        self.signature
            .pairs()
            .iter()
            .position(|(k, _)| k == key)
            .map(|i| &self.patterns[i])
    }

    /// Per signature entry, whether the value matches.
    fn check(&self, values: &[&str]) -> Vec<bool> {
        self.matchers.iter().zip(values).map(|(m, v)| m.is_match(v)).collect()
    }

    fn accepts(&self, values: &[&str]) -> bool {
        self.matchers.iter().zip(values).all(|(m, v)| m.is_match(v))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Normal,
    Anomalous,
    Malformed,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DetectionResult {
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rule_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub failed_keys: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub nearest_rules: Option<Vec<String>>,
    /// `unknown_signature` or `value_mismatch` for anomalies.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

impl DetectionResult {
    fn normal(id: &str) -> Self {
        DetectionResult {
            verdict: Verdict::Normal,
            rule_id: Some(id.to_string()),
            failed_keys: None,
            nearest_rules: None,
            reason: None,
            error: None,
        }
    }

    fn anomalous(reason: &str, nearest: Vec<String>, failed: Vec<String>) -> Self {
        DetectionResult {
            verdict: Verdict::Anomalous,
            rule_id: None,
            failed_keys: Some(failed),
            nearest_rules: Some(nearest),
            reason: Some(reason.to_string()),
            error: None,
        }
    }

    pub fn malformed(e: impl ToString) -> Self {
        DetectionResult {
            verdict: Verdict::Malformed,
            rule_id: None,
            failed_keys: None,
            nearest_rules: None,
            reason: None,
            error: Some(e.to_string()),
        }
    }

    pub fn is_anomalous(&self) -> bool {
        self.verdict == Verdict::Anomalous
    }
}

/// Rules grouped by signature, each group scanned in descending support.
#[derive(Clone, Debug)]
pub struct Ruleset {
    pub version: String,
    pub rules: Vec<Rule>,
    index: HashMap<Signature, Vec<usize>>,
    pub type_config: Option<Value>,
}

impl Ruleset {
    pub fn new(rules: Vec<Rule>, type_config: Option<Value>) -> Self {
        let mut index: HashMap<Signature, Vec<usize>> = HashMap::new();
        for (i, r) in rules.iter().enumerate() {
            index.entry(r.signature.clone()).or_default().push(i);
        }
        for bucket in index.values_mut() {
            bucket.sort_by(|a, b| rules[*b].support.cmp(&rules[*a].support).then(a.cmp(b)));
        }
        Ruleset {
            version: FORMAT_VERSION.to_string(),
            rules,
            index,
            type_config,
        }
    }

    /// Rules from the live edges of a graph, in canonical order with ids
    /// `r0, r1, ...`.
    pub fn from_graph(g: &RuleHypergraph, types: Option<&TypeConfig>) -> Self {
        let mut raw: Vec<(Signature, Vec<String>, Vec<Pattern>, usize)> = g
            .edge_ids()
            .map(|e| {
                let edge = g.edge(e).unwrap();
                let pats: Vec<Pattern> = edge.vertices().iter().map(|v| g.triple(*v).value.clone()).collect();
                let rendered = pats.iter().map(Pattern::render).collect();
                (edge.signature().clone(), rendered, pats, edge.support)
            })
            .collect();
        raw.sort_by(|a, b| (&a.0, &a.1).cmp(&(&b.0, &b.1)));
        let rules = raw
            .into_iter()
            .enumerate()
            .map(|(i, (sig, _, pats, support))| Rule::new(format!("r{i}"), support, sig, pats))
            .collect();
        Ruleset::new(rules, types.map(TypeConfig::to_json))
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn rule(&self, id: &str) -> Option<&Rule> {
        self.rules.iter().find(|r| r.id == id)
    }

    pub fn types(&self) -> Result<TypeConfig, RulesetError> {
        match &self.type_config {
            Some(v) => Ok(TypeConfig::from_json(v)?),
            None => Ok(TypeConfig::default()),
        }
    }

    pub fn to_json(&self) -> Value {
        let rules: Vec<Value> = self
            .rules
            .iter()
            .map(|r| {
                let patterns: Map<String, Value> = r
                    .signature
                    .pairs()
                    .iter()
                    .zip(&r.patterns)
                    .map(|((k, _), p)| (k.clone(), Value::String(p.render())))
                    .collect();
                json!({
                    "id": r.id,
                    "support": r.support,
                    "signature": r.signature.pairs().iter().map(|(k, t)| json!([k, t])).collect::<Vec<_>>(),
                    "patterns": patterns,
                })
            })
            .collect();
        let mut out = json!({"version": self.version, "rules": rules});
        if let Some(t) = &self.type_config {
            out["type_config"] = t.clone();
        }
        out
    }

    pub fn to_string_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("serializable") + "\n"
    }

    pub fn from_json(v: &Value) -> Result<Self, RulesetError> {
        let shape = |m: &str| RulesetError::Shape(m.to_string());
        let obj = v.as_object().ok_or_else(|| shape("expected an object"))?;
        let rules = obj
            .get("rules")
            .and_then(Value::as_array)
            .ok_or_else(|| shape("missing rules array"))?;
        let mut out = Vec::with_capacity(rules.len());
        for (i, r) in rules.iter().enumerate() {
            let id = r
                .get("id")
                .and_then(Value::as_str)
                .map(str::to_string)
                .unwrap_or_else(|| format!("r{i}"));
            let support = r.get("support").and_then(Value::as_u64).unwrap_or(0) as usize;
            let sig_arr = r
                .get("signature")
                .and_then(Value::as_array)
                .ok_or_else(|| shape(&format!("rule {id}: missing signature")))?;
            let mut pairs = Vec::new();
            for p in sig_arr {
                match p.as_array().map(|a| a.as_slice()) {
                    Some([Value::String(k), Value::String(t)]) => pairs.push((k.clone(), t.clone())),
                    _ => return Err(shape(&format!("rule {id}: signature entries are [key, type]"))),
                }
            }
            let signature = Signature::new(pairs);
            let pats = r
                .get("patterns")
                .and_then(Value::as_object)
                .ok_or_else(|| shape(&format!("rule {id}: missing patterns")))?;
            if pats.len() != signature.len() {
                return Err(RulesetError::Keys(id));
            }
            let mut patterns = Vec::with_capacity(signature.len());
            for (k, _) in signature.pairs() {
                let text = pats
                    .get(k)
                    .and_then(Value::as_str)
                    .ok_or_else(|| RulesetError::Keys(id.clone()))?;
                patterns.push(parse(text).map_err(|source| RulesetError::Pattern {
                    rule: id.clone(),
                    source,
                })?);
            }
            out.push(Rule::new(id, support, signature, patterns));
        }
        let mut rs = Ruleset::new(out, obj.get("type_config").cloned());
        if let Some(v) = obj.get("version").and_then(Value::as_str) {
            rs.version = v.to_string();
        }
        Ok(rs)
    }

    fn bucket(&self, sig: &Signature) -> &[usize] {
        self.index.get(sig).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Classifies flattened `(key, type, value)` leaves sorted by key.
    pub fn match_leaves(&self, leaves: &[(String, String, String)]) -> DetectionResult {
        let sig = Signature(leaves.iter().map(|(k, t, _)| (k.clone(), t.clone())).collect());
        let values: Vec<&str> = leaves.iter().map(|(_, _, v)| v.as_str()).collect();
        let bucket = self.bucket(&sig);
        if bucket.is_empty() {
            return DetectionResult::anomalous("unknown_signature", Vec::new(), Vec::new());
        }
        for &i in bucket {
            if self.rules[i].accepts(&values) {
                return DetectionResult::normal(&self.rules[i].id);
            }
        }
        self.explain(bucket, &values)
    }

    /// Nearest rules: most matching keys, then smallest distance between the
    /// failing values and the rule's patterns, then scan order.
    fn explain(&self, bucket: &[usize], values: &[&str]) -> DetectionResult {
        let checks: Vec<(usize, Vec<bool>)> = bucket.iter().map(|&i| (i, self.rules[i].check(values))).collect();
        let best = checks
            .iter()
            .map(|(_, c)| c.iter().filter(|b| **b).count())
            .max()
            .unwrap_or(0);
        let mut tied: Vec<(f64, usize, usize, &Vec<bool>)> = checks
            .iter()
            .enumerate()
            .filter(|(_, (_, c))| c.iter().filter(|b| **b).count() == best)
            .map(|(pos, (i, c))| {
                let rule = &self.rules[*i];
                let dist: f64 = c
                    .iter()
                    .enumerate()
                    .filter(|(_, ok)| !**ok)
                    .map(|(k, _)| {
                        representatives(&rule.patterns[k], 16, 0)
                            .iter()
                            .map(|w| string_distance(values[k], w))
                            .fold(1.0, f64::min)
                    })
                    .sum();
                (dist, pos, *i, c)
            })
            .collect();
        tied.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        tied.truncate(3);
        let first = &self.rules[tied[0].2];
        let failed = first
            .signature
            .pairs()
            .iter()
            .zip(tied[0].3)
            .filter(|(_, ok)| !**ok)
            .map(|((k, _), _)| k.clone())
            .collect();
        let nearest = tied.iter().map(|t| self.rules[t.2].id.clone()).collect();
        DetectionResult::anomalous("value_mismatch", nearest, failed)
    }

    pub fn match_event(&self, e: &EventRecord) -> DetectionResult {
        let leaves: Vec<(String, String, String)> = e
            .triples()
            .iter()
            .map(|t| {
                let v = t.value.as_literal().map(str::to_string).unwrap_or_else(|| t.value.render());
                (t.key.clone(), t.ty.clone(), v)
            })
            .collect();
        self.match_leaves(&leaves)
    }

    /// Ids of every rule accepting the event.
    pub fn all_matches(&self, e: &EventRecord) -> Vec<String> {
        let values: Vec<String> = e
            .triples()
            .iter()
            .map(|t| t.value.as_literal().map(str::to_string).unwrap_or_else(|| t.value.render()))
            .collect();
        let values: Vec<&str> = values.iter().map(String::as_str).collect();
        self.bucket(&e.signature())
            .iter()
            .filter(|i| self.rules[**i].accepts(&values))
            .map(|i| self.rules[*i].id.clone())
            .collect()
    }

    pub fn match_line(&self, line: &str, types: &TypeConfig) -> DetectionResult {
        let doc: Value = match serde_json::from_str(line) {
            Ok(d) => d,
            Err(e) => return DetectionResult::malformed(EventError::from(e)),
        };
        match flatten_strings(&doc, types) {
            Ok((leaves, _)) => self.match_leaves(&leaves),
            Err(e) => DetectionResult::malformed(e),
        }
    }
}

impl std::str::FromStr for Ruleset {
    type Err = RulesetError;

    fn from_str(s: &str) -> Result<Self, RulesetError> {
        Ruleset::from_json(&serde_json::from_str(s)?)
    }
}

/// Same-signature rule pairs whose patterns intersect at every key.
pub fn validate_ruleset(rs: &Ruleset) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let mut sigs: Vec<&Signature> = rs.index.keys().collect();
    sigs.sort();
    let mut cache: HashMap<(String, String), bool> = HashMap::new();
    for sig in sigs {
        let mut bucket = rs.index[sig].clone();
        bucket.sort();
        for (a, &i) in bucket.iter().enumerate() {
            for &j in &bucket[a + 1..] {
                let (ri, rj) = (&rs.rules[i], &rs.rules[j]);
                let all = ri.patterns.iter().zip(&rj.patterns).all(|(p, q)| {
                    let k = (p.render(), q.render());
                    *cache.entry(k).or_insert_with(|| intersects(p, q))
                });
                if all {
                    out.push((ri.id.clone(), rj.id.clone()));
                }
            }
        }
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq, serde::Serialize)]
pub struct DetectSummary {
    pub total: usize,
    pub normal: usize,
    pub anomalous: usize,
    pub malformed: usize,
    pub seconds: f64,
    pub events_per_sec: f64,
}

/// Classifies JSONL lines in input order.
pub fn detect_stream(
    rs: &Ruleset,
    types: &TypeConfig,
    lines: &[String],
    single_core: bool,
) -> (Vec<DetectionResult>, DetectSummary) {
    let start = Instant::now();
    let results: Vec<DetectionResult> = if single_core {
        lines.iter().map(|l| rs.match_line(l, types)).collect()
    } else {
        lines.par_iter().map(|l| rs.match_line(l, types)).collect()
    };
    let seconds = start.elapsed().as_secs_f64();
    let mut s = DetectSummary {
        total: results.len(),
        seconds,
        ..Default::default()
    };
    for r in &results {
        match r.verdict {
            Verdict::Normal => s.normal += 1,
            Verdict::Anomalous => s.anomalous += 1,
            Verdict::Malformed => s.malformed += 1,
        }
    }
    s.events_per_sec = if seconds > 0.0 { s.total as f64 / seconds } else { 0.0 };
    (results, s)
}

/// Training events matched by zero or several rules, with the rule ids.
pub fn generalization_check(rs: &Ruleset, events: &[EventRecord]) -> Vec<(usize, Vec<String>)> {
    events
        .iter()
        .enumerate()
        .filter_map(|(i, e)| {
            let m = rs.all_matches(e);
            (m.len() != 1).then_some((i, m))
        })
        .collect()
}

/// Rules grouped by signature, for display.
pub fn by_signature(rs: &Ruleset) -> BTreeMap<String, Vec<String>> {
    let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for r in &rs.rules {
        out.entry(r.signature.to_string()).or_default().push(r.id.clone());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::{flatten_event, EntityTriple};

    fn rule(id: &str, actor: &str, op: &str) -> Rule {
        Rule::new(
            id.into(),
            1,
            Signature::new(vec![("actor".into(), "Role".into()), ("op".into(), "Op".into())]),
            vec![parse(actor).unwrap(), Pattern::literal(op)],
        )
    }

    #[test]
    fn matches_and_explains() {
        let rs = Ruleset::new(vec![rule("a", "u[0-9]{1}", "read"), rule("b", "admin", "write")], None);
        let types = TypeConfig::from_json(&json!({"actor": "Role", "op": "Op"})).unwrap();
        let r = rs.match_line(r#"{"actor":"u1","op":"read"}"#, &types);
        assert_eq!(r.rule_id.as_deref(), Some("a"));
        let r = rs.match_line(r#"{"actor":"u1","op":"write"}"#, &types);
        assert!(r.is_anomalous());
        assert_eq!(r.reason.as_deref(), Some("value_mismatch"));
        assert!(!r.nearest_rules.as_ref().unwrap().is_empty());
        let r = rs.match_line(r#"{"actor":"u1","op":"read","x":"1"}"#, &types);
        assert_eq!(r.reason.as_deref(), Some("unknown_signature"));
        let r = rs.match_line("{not json", &types);
        assert_eq!(r.verdict, Verdict::Malformed);
    }

    #[test]
    fn json_round_trip() {
        let rs = Ruleset::new(vec![rule("a", "u[0-9]{1}", "read")], Some(json!({"actor": "Role"})));
        let back = Ruleset::from_json(&rs.to_json()).unwrap();
        assert_eq!(back.to_json(), rs.to_json());
        assert!(r#"{"version":"1","rules":[{"id":"x","support":1,"signature":[["a","A"]],"patterns":{"a":"b*"}}]}"#.parse::<Ruleset>().is_err());
    }

    #[test]
    fn overlapping_rules_are_invalid() {
        let rs = Ruleset::new(vec![rule("a", "u[0-9]{1}", "read"), rule("b", "u(?:1|x)", "read")], None);
        assert_eq!(validate_ruleset(&rs), vec![("a".to_string(), "b".to_string())]);
        assert!(validate_ruleset(&Ruleset::new(vec![], None)).is_empty());
    }

    #[test]
    fn generalization_lists_orphans() {
        let rs = Ruleset::new(vec![rule("a", "u[0-9]{1}", "read")], None);
        let types = TypeConfig::from_json(&json!({"actor": "Role", "op": "Op"})).unwrap();
        let ok = flatten_event(&json!({"actor": "u1", "op": "read"}), &types).unwrap();
        let bad = EventRecord::new(vec![
            EntityTriple::literal("actor", "u1", "Role"),
            EntityTriple::literal("op", "write", "Op"),
        ])
        .unwrap();
        assert_eq!(generalization_check(&rs, &[ok, bad]), vec![(1, vec![])]);
    }
}
