//! Seeded synthetic corpora: actor archetypes with fixed privileges, plus
//! labeled anomalies that break the generating grammar.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::event::{ConfigError, TypeConfig};
use crate::harness::motivating;

#[derive(Debug, thiserror::Error)]
pub enum GenError {
    #[error("generator spec: {0}")]
    Invalid(String),
    #[error("unknown preset {0:?}; expected motivating, benchmark or throughput")]
    Preset(String),
    #[error(transparent)]
    Types(#[from] ConfigError),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourceSpec {
    /// Flattened key, e.g. `api.request.data.instanceID`.
    pub key: String,
    pub ty: String,
    pub prefix: String,
    pub alphabet: String,
    pub len: usize,
    pub pool: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchetypeSpec {
    pub name: String,
    pub actor_prefix: String,
    pub suffix_alphabet: String,
    pub suffix_len: usize,
    pub actors: usize,
    pub operations: Vec<String>,
    pub resource: ResourceSpec,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyMode {
    /// An actor performing an operation outside its archetype.
    ForbiddenPair,
    /// A normal event with one key added or removed.
    UnseenSignature,
    /// An actor id whose suffix leaves the archetype alphabet.
    MutatedValue,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSpec {
    pub archetypes: Vec<ArchetypeSpec>,
    pub regions: Vec<String>,
    pub train_events: usize,
    pub test_events: usize,
    pub anomaly_rate: f64,
    pub anomaly_modes: Vec<AnomalyMode>,
    /// Approximate serialized size of each event; 0 for no padding.
    pub pad_bytes: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    /// Unlabeled normal events.
    pub train: Vec<Value>,
    /// Events carrying `_label`.
    pub test: Vec<Value>,
    pub types: Value,
}

fn upper() -> String {
    ('A'..='Z').collect()
}

fn lower() -> String {
    ('a'..='z').collect()
}

fn arch(name: &str, prefix: &str, alphabet: String, len: usize, actors: usize, ops: &[&str], resource: &ResourceSpec) -> ArchetypeSpec {
    ArchetypeSpec {
        name: name.into(),
        actor_prefix: prefix.into(),
        suffix_alphabet: alphabet,
        suffix_len: len,
        actors,
        operations: ops.iter().map(|s| s.to_string()).collect(),
        resource: resource.clone(),
    }
}

fn resource(key: &str, ty: &str, prefix: &str, alphabet: &str, len: usize, pool: usize) -> ResourceSpec {
    ResourceSpec {
        key: key.into(),
        ty: ty.into(),
        prefix: prefix.into(),
        alphabet: alphabet.into(),
        len,
        pool,
    }
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec::benchmark(0)
    }
}

impl GeneratorSpec {
    /// Five archetypes; two pairs share a signature and a resource pool.
    pub fn benchmark(seed: u64) -> Self {
        let instance = resource("api.request.data.instanceID", "Instance", "i-", "0123456789abcdef", 8, 5);
        let backups = resource("api.request.data.bucketName", "Bucket", "backup-", &lower(), 6, 4);
        let reports = resource("api.request.data.bucketName", "Bucket", "reports-", "0123456789", 4, 4);
        let users = resource("api.request.data.userName", "User", "svc-", &lower(), 5, 6);
        GeneratorSpec {
            archetypes: vec![
                arch(
                    "instance-admin",
                    "AttrService-InstanceRole-",
                    upper(),
                    4,
                    6,
                    &["CreateInstance", "DeleteInstance", "RebootInstance", "DescribeInstance"],
                    &instance,
                ),
                arch(
                    "instance-operator",
                    "ModelService-DataRole-",
                    upper(),
                    4,
                    6,
                    &["StartInstance", "StopInstance", "DescribeInstance"],
                    &instance,
                ),
                arch(
                    "backup",
                    "BackupJob-StorageRole-",
                    "0123456789".into(),
                    5,
                    5,
                    &["PutObject", "GetObject", "ListBucket"],
                    &backups,
                ),
                arch(
                    "reporting",
                    "ReportJob-ReaderRole-",
                    lower(),
                    3,
                    5,
                    &["GetObject", "HeadObject", "SelectObjectContent"],
                    &reports,
                ),
                arch(
                    "iam-admin",
                    "AdminConsole-OperatorRole-",
                    upper(),
                    4,
                    4,
                    &["CreateUser", "DeleteUser", "AttachUserPolicy", "ListUsers"],
                    &users,
                ),
            ],
            regions: vec!["us-east-1".into(), "eu-west-1".into()],
            train_events: 50_000,
            test_events: 5_000,
            anomaly_rate: 0.1,
            anomaly_modes: vec![
                AnomalyMode::ForbiddenPair,
                AnomalyMode::UnseenSignature,
                AnomalyMode::MutatedValue,
            ],
            pad_bytes: 0,
            seed,
        }
    }

    /// Ten operations per archetype, one resource each and one region, so
    /// training yields 50 rules; events are padded to 1 KB.
    pub fn throughput(seed: u64) -> Self {
        let mut s = GeneratorSpec::benchmark(seed);
        s.regions.truncate(1);
        for a in &mut s.archetypes {
            a.resource.pool = 1;
            let stem: String = a.name.split('-').map(capitalize).collect();
            let mut i = 0;
            while a.operations.len() < 10 {
                a.operations.push(format!("{stem}Action{i:02}"));
                i += 1;
            }
        }
        s.pad_bytes = 1024;
        s
    }

    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |m: String| Err(GenError::Invalid(m));
        if !(0.0..=1.0).contains(&self.anomaly_rate) {
            return bad(format!("anomaly_rate {} outside [0, 1]", self.anomaly_rate));
        }
        if self.train_events + self.test_events == 0 {
            return Ok(());
        }
        if self.archetypes.is_empty() {
            return bad("no archetypes".into());
        }
        let capacity = |alphabet: &str, len: usize| -> f64 {
            (alphabet.chars().collect::<BTreeSet<_>>().len() as f64).powi(len as i32)
        };
        for a in &self.archetypes {
            if a.operations.is_empty() {
                return bad(format!("{}: no operations", a.name));
            }
            if a.actors == 0 || a.resource.pool == 0 {
                return bad(format!("{}: empty actor or resource pool", a.name));
            }
            if !a.suffix_alphabet.is_ascii() || !a.resource.alphabet.is_ascii() {
                return bad(format!("{}: alphabets must be ASCII", a.name));
            }
            if capacity(&a.suffix_alphabet, a.suffix_len) < a.actors as f64 {
                return bad(format!("{}: suffix space smaller than {} actors", a.name, a.actors));
            }
            if capacity(&a.resource.alphabet, a.resource.len) < a.resource.pool as f64 {
                return bad(format!("{}: resource space smaller than pool", a.name));
            }
            let k = &a.resource.key;
            if ["actor.id", "api.operation", "region"].contains(&k.as_str()) || k.starts_with("meta.") {
                return bad(format!("{}: resource key {k:?} is reserved", a.name));
            }
        }
        for (i, a) in self.archetypes.iter().enumerate() {
            for b in &self.archetypes[i + 1..] {
                if a.actor_prefix.starts_with(&b.actor_prefix) || b.actor_prefix.starts_with(&a.actor_prefix) {
                    return bad(format!("actor prefixes of {} and {} overlap", a.name, b.name));
                }
                if a.resource.key == b.resource.key && a.resource.ty != b.resource.ty {
                    return bad(format!("{} and {} give {} two types", a.name, b.name, a.resource.key));
                }
            }
        }
        let anomalies = (self.anomaly_rate * self.test_events as f64).round() as usize;
        if anomalies > 0 && self.feasible_modes().is_empty() {
            return bad("anomalies requested but no anomaly mode applies".into());
        }
        Ok(())
    }

    fn foreign_ops(&self, a: &ArchetypeSpec) -> Vec<String> {
        let own: BTreeSet<&String> = a.operations.iter().collect();
        let all: BTreeSet<&String> = self.archetypes.iter().flat_map(|b| &b.operations).collect();
        all.difference(&own).map(|s| s.to_string()).collect()
    }

    fn feasible_modes(&self) -> Vec<AnomalyMode> {
        self.anomaly_modes
            .iter()
            .copied()
            .filter(|m| match m {
                AnomalyMode::ForbiddenPair => self.archetypes.iter().any(|a| !self.foreign_ops(a).is_empty()),
                AnomalyMode::UnseenSignature => true,
                AnomalyMode::MutatedValue => self.archetypes.iter().any(mutable),
            })
            .collect()
    }

    pub fn type_config_json(&self) -> Value {
        let mut types = BTreeMap::new();
        types.insert("actor.id".to_string(), "Role".to_string());
        types.insert("api.operation".to_string(), "EventName".to_string());
        types.insert("region".to_string(), "Region".to_string());
        for a in &self.archetypes {
            types.insert(a.resource.key.clone(), a.resource.ty.clone());
        }
        json!({"types": types, "exclude": ["meta.*"], "closed_types": ["EventName"]})
    }

    pub fn type_config(&self) -> Result<TypeConfig, GenError> {
        Ok(TypeConfig::from_json(&self.type_config_json())?)
    }

    pub fn generate(&self) -> Result<Corpus, GenError> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut taken = BTreeSet::new();
        let mut resources: BTreeMap<&ResourceSpec, Vec<String>> = BTreeMap::new();
        let mut pools = Vec::new();
        for a in &self.archetypes {
            let actors = draw_pool(&mut rng, &a.actor_prefix, &a.suffix_alphabet, a.suffix_len, a.actors, &mut taken);
            if !resources.contains_key(&a.resource) {
                let r = &a.resource;
                let pool = draw_pool(&mut rng, &r.prefix, &r.alphabet, r.len, r.pool, &mut BTreeSet::new());
                resources.insert(&a.resource, pool);
            }
            pools.push(actors);
        }
        let gen = Gen {
            spec: self,
            pools: &pools,
            resources: &resources,
        };
        let train = (0..self.train_events).map(|_| gen.normal(&mut rng)).collect();
        let anomalies = (self.anomaly_rate * self.test_events as f64).round() as usize;
        let mut flags = vec![false; self.test_events];
        for i in rand::seq::index::sample(&mut rng, self.test_events, anomalies) {
            flags[i] = true;
        }
        let modes = self.feasible_modes();
        let mut test = Vec::with_capacity(self.test_events);
        for flag in flags {
            let mut e = if flag {
                let mode = *modes.choose(&mut rng).unwrap();
                gen.anomaly(&mut rng, mode)
            } else {
                gen.normal(&mut rng)
            };
            e["_label"] = json!(if flag { "anomaly" } else { "normal" });
            test.push(e);
        }
        Ok(Corpus {
            train,
            test,
            types: self.type_config_json(),
        })
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    c.next().map(|f| f.to_ascii_uppercase().to_string() + c.as_str()).unwrap_or_default()
}

fn outside_chars(a: &ArchetypeSpec) -> Vec<char> {
    ('0'..='9')
        .chain('A'..='Z')
        .chain('a'..='z')
        .chain(['#'])
        .filter(|c| !a.suffix_alphabet.contains(*c))
        .collect()
}

fn mutable(a: &ArchetypeSpec) -> bool {
    a.suffix_len > 0 && !outside_chars(a).is_empty()
}

fn random_word(rng: &mut ChaCha8Rng, alphabet: &[char], len: usize) -> String {
    (0..len).map(|_| *alphabet.choose(rng).unwrap()).collect()
}

fn draw_pool(
    rng: &mut ChaCha8Rng,
    prefix: &str,
    alphabet: &str,
    len: usize,
    n: usize,
    taken: &mut BTreeSet<String>,
) -> Vec<String> {
    let chars: Vec<char> = alphabet.chars().collect::<BTreeSet<_>>().into_iter().collect();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let w = format!("{prefix}{}", random_word(rng, &chars, len));
        if taken.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

struct Gen<'a> {
    spec: &'a GeneratorSpec,
    pools: &'a [Vec<String>],
    resources: &'a BTreeMap<&'a ResourceSpec, Vec<String>>,
}

impl Gen<'_> {
    fn build(&self, rng: &mut ChaCha8Rng, actor: &str, op: &str, a: &ArchetypeSpec) -> Value {
        let value = self.resources[&a.resource].choose(rng).unwrap().clone();
        let mut e = json!({"actor": {"id": actor}, "api": {"operation": op}});
        insert_path(&mut e, &a.resource.key, Value::String(value));
        if let Some(r) = self.spec.regions.choose(rng) {
            e["region"] = json!(r);
        }
        let request: String = (0..16).map(|_| format!("{:x}", rng.gen_range(0..16u8))).collect();
        e["meta"] = json!({"requestId": request});
        if self.spec.pad_bytes > 0 {
            let have = serde_json::to_string(&e).map(|s| s.len()).unwrap_or(0) + 20;
            let pad = self.spec.pad_bytes.saturating_sub(have);
            e["meta"]["userAgent"] = json!("m".repeat(pad));
        }
        e
    }

    fn normal(&self, rng: &mut ChaCha8Rng) -> Value {
        let i = rng.gen_range(0..self.spec.archetypes.len());
        let a = &self.spec.archetypes[i];
        let actor = self.pools[i].choose(rng).unwrap().clone();
        let op = a.operations.choose(rng).unwrap().clone();
        self.build(rng, &actor, &op, a)
    }

    fn anomaly(&self, rng: &mut ChaCha8Rng, mode: AnomalyMode) -> Value {
        let archetypes = &self.spec.archetypes;
        match mode {
            AnomalyMode::ForbiddenPair => {
                let eligible: Vec<usize> = (0..archetypes.len())
                    .filter(|i| !self.spec.foreign_ops(&archetypes[*i]).is_empty())
                    .collect();
                let i = *eligible.choose(rng).unwrap();
                let a = &archetypes[i];
                let actor = self.pools[i].choose(rng).unwrap().clone();
                let op = self.spec.foreign_ops(a).choose(rng).unwrap().clone();
                self.build(rng, &actor, &op, a)
            }
            AnomalyMode::UnseenSignature => {
                let mut e = self.normal(rng);
                if rng.gen_bool(0.5) {
                    e["api"]["debugFlag"] = json!("true");
                } else {
                    e["api"].as_object_mut().unwrap().remove("operation");
                }
                e
            }
            AnomalyMode::MutatedValue => {
                let eligible: Vec<usize> = (0..archetypes.len()).filter(|i| mutable(&archetypes[*i])).collect();
                let i = *eligible.choose(rng).unwrap();
                let a = &archetypes[i];
                let outside = outside_chars(a);
                let actor = self.pools[i].choose(rng).unwrap();
                let mut chars: Vec<char> = actor.chars().collect();
                let at = a.actor_prefix.chars().count() + rng.gen_range(0..a.suffix_len);
                chars[at] = *outside.choose(rng).unwrap();
                let actor: String = chars.into_iter().collect();
                let op = a.operations.choose(rng).unwrap().clone();
                self.build(rng, &actor, &op, a)
            }
        }
    }
}

/// Places `v` at a dotted path, keeping `request.data` as one object key the
/// way the cloud audit records do.
fn insert_path(doc: &mut Value, key: &str, v: Value) {
    let parts: Vec<String> = match key.strip_prefix("api.request.data.") {
        Some(rest) => vec!["api".into(), "request.data".into(), rest.into()],
        None => key.split('.').map(str::to_string).collect(),
    };
    let mut cur = doc;
    for p in &parts[..parts.len() - 1] {
        if !cur.get(p).is_some_and(Value::is_object) {
            cur[p.as_str()] = json!({});
        }
        cur = cur.get_mut(p.as_str()).unwrap();
    }
    cur[parts.last().unwrap().as_str()] = v;
}

/// Train and test corpora for a named preset.
pub fn preset(name: &str, seed: u64) -> Result<Corpus, GenError> {
    match name {
        "motivating" => Ok(Corpus {
            train: motivating::training(),
            test: motivating::test_set(),
            types: motivating::type_config_json(),
        }),
        "benchmark" => GeneratorSpec::benchmark(seed).generate(),
        "throughput" => GeneratorSpec::throughput(seed).generate(),
        other => Err(GenError::Preset(other.to_string())),
    }
}
