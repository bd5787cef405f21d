//! Rule hypergraph: entity triples as vertices, rules as hyperedges.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde_json::{json, Value};

use crate::event::{EntityTriple, EventRecord, Signature};
use crate::regex::{intersects, Matcher, Pattern};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VertexId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeId(pub usize);

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GraphError {
    #[error("event {index} has a single entity; rules need at least two")]
    SingleEntity { index: usize },
    #[error("vertex {0:?} is not live")]
    DeadVertex(VertexId),
    #[error("edge {0:?} is not live")]
    DeadEdge(EdgeId),
    #[error("vertices differ in key or type")]
    KeyTypeMismatch,
    #[error("cannot merge a vertex with itself")]
    SameVertex,
    #[error("partial merge needs a non-empty subgraph")]
    EmptySubgraph,
    #[error("edge {0:?} is not incident to either merged vertex")]
    OutsideNeighborhood(EdgeId),
    #[error("merge would break edge uniqueness: {0:?}")]
    Uniqueness(Vec<(EdgeId, EdgeId)>),
}

#[derive(Clone, Debug)]
pub struct Vertex {
    pub triple: EntityTriple,
    edges: BTreeSet<EdgeId>,
}

impl Vertex {
    pub fn edges(&self) -> &BTreeSet<EdgeId> {
        &self.edges
    }
}

#[derive(Clone, Debug)]
pub struct Edge {
    /// Sorted by the key of each vertex, so positions line up across edges
    /// of one signature.
    vertices: Vec<VertexId>,
    signature: Signature,
    /// Distinct training events this rule covers.
    pub support: usize,
}

impl Edge {
    pub fn vertices(&self) -> &[VertexId] {
        &self.vertices
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
    }
}

#[derive(Clone, Debug)]
pub struct MergeOutcome {
    pub merged: VertexId,
    pub removed_edges: Vec<EdgeId>,
    pub new_edges: Vec<EdgeId>,
    /// Rewritten edges absorbed into another edge.
    pub coalesced: usize,
}

#[derive(Clone, Debug, Default)]
pub struct RuleHypergraph {
    vertices: Vec<Option<Vertex>>,
    edges: Vec<Option<Edge>>,
    by_triple: HashMap<EntityTriple, VertexId>,
    by_members: HashMap<Vec<VertexId>, EdgeId>,
    buckets: HashMap<Signature, BTreeSet<EdgeId>>,
}

impl RuleHypergraph {
    /// One vertex per distinct triple and one edge per distinct event.
    ///
    /// Events are deduplicated and sorted first, so identifiers do not depend
    /// on stream order.
    pub fn build_from_events<'a, I>(events: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = &'a EventRecord>,
    {
        let mut distinct: BTreeMap<&[EntityTriple], usize> = BTreeMap::new();
        for (index, e) in events.into_iter().enumerate() {
            if e.triples().len() < 2 {
                return Err(GraphError::SingleEntity { index });
            }
            distinct.entry(e.triples()).or_insert(index);
        }
        let mut g = RuleHypergraph::default();
        for triples in distinct.keys() {
            let vs: Vec<VertexId> = triples.iter().map(|t| g.intern(t.clone())).collect();
            g.insert_edge(vs, 1);
        }
        Ok(g)
    }

    /// Builds a graph from rules given as triple lists with their supports.
    pub fn from_rules(rules: Vec<(Vec<EntityTriple>, usize)>) -> Result<Self, GraphError> {
        let mut g = RuleHypergraph::default();
        for (index, (mut triples, support)) in rules.into_iter().enumerate() {
            if triples.len() < 2 {
                return Err(GraphError::SingleEntity { index });
            }
            triples.sort_by(|a, b| a.key.cmp(&b.key));
            let vs: Vec<VertexId> = triples.into_iter().map(|t| g.intern(t)).collect();
            match g.by_members.get(&vs) {
                Some(&e) => g.edges[e.0].as_mut().unwrap().support += support,
                None => {
                    g.insert_edge(vs, support);
                }
            }
        }
        Ok(g)
    }

    fn intern(&mut self, t: EntityTriple) -> VertexId {
        if let Some(&v) = self.by_triple.get(&t) {
            return v;
        }
        let v = VertexId(self.vertices.len());
        self.by_triple.insert(t.clone(), v);
        self.vertices.push(Some(Vertex {
            triple: t,
            edges: BTreeSet::new(),
        }));
        v
    }

    fn insert_edge(&mut self, vertices: Vec<VertexId>, support: usize) -> EdgeId {
        let id = EdgeId(self.edges.len());
        let signature = Signature(
            vertices
                .iter()
                .map(|v| {
                    let t = &self.vertices[v.0].as_ref().unwrap().triple;
                    (t.key.clone(), t.ty.clone())
                })
                .collect(),
        );
        for v in &vertices {
            self.vertices[v.0].as_mut().unwrap().edges.insert(id);
        }
        self.buckets.entry(signature.clone()).or_default().insert(id);
        self.by_members.insert(vertices.clone(), id);
        self.edges.push(Some(Edge {
            vertices,
            signature,
            support,
        }));
        id
    }

    fn remove_edge(&mut self, id: EdgeId) -> Edge {
        let edge = self.edges[id.0].take().expect("live edge");
        for v in &edge.vertices {
            if let Some(vx) = self.vertices[v.0].as_mut() {
                vx.edges.remove(&id);
            }
        }
        if let Some(b) = self.buckets.get_mut(&edge.signature) {
            b.remove(&id);
            if b.is_empty() {
                self.buckets.remove(&edge.signature);
            }
        }
        self.by_members.remove(&edge.vertices);
        edge
    }

    pub fn vertex(&self, v: VertexId) -> Result<&Vertex, GraphError> {
        self.vertices
            .get(v.0)
            .and_then(Option::as_ref)
            .ok_or(GraphError::DeadVertex(v))
    }

    pub fn edge(&self, e: EdgeId) -> Result<&Edge, GraphError> {
        self.edges
            .get(e.0)
            .and_then(Option::as_ref)
            .ok_or(GraphError::DeadEdge(e))
    }

    pub fn triple(&self, v: VertexId) -> &EntityTriple {
        &self.vertices[v.0].as_ref().expect("live vertex").triple
    }

    pub fn is_live_vertex(&self, v: VertexId) -> bool {
        matches!(self.vertices.get(v.0), Some(Some(_)))
    }

    pub fn vertex_ids(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.vertices
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_some())
            .map(|(i, _)| VertexId(i))
    }

    pub fn edge_ids(&self) -> impl Iterator<Item = EdgeId> + '_ {
        self.edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.is_some())
            .map(|(i, _)| EdgeId(i))
    }

    pub fn vertex_count(&self) -> usize {
        self.by_triple.len()
    }

    pub fn edge_count(&self) -> usize {
        self.by_members.len()
    }

    pub fn find_vertex(&self, t: &EntityTriple) -> Option<VertexId> {
        self.by_triple.get(t).copied()
    }

    /// Edges incident to `v`.
    pub fn hyperedge_neighbors(&self, v: VertexId) -> Result<&BTreeSet<EdgeId>, GraphError> {
        Ok(&self.vertex(v)?.edges)
    }

    pub fn buckets(&self) -> impl Iterator<Item = (&Signature, &BTreeSet<EdgeId>)> {
        self.buckets.iter()
    }

    fn slot_of(&self, e: &Edge, key: &str) -> Option<usize> {
        e.vertices
            .iter()
            .position(|v| self.triple(*v).key == key)
    }

    fn check_pair(&self, v1: VertexId, v2: VertexId) -> Result<(), GraphError> {
        let (a, b) = (&self.vertex(v1)?.triple, &self.vertex(v2)?.triple);
        if v1 == v2 {
            return Err(GraphError::SameVertex);
        }
        if a.key != b.key || a.ty != b.ty {
            return Err(GraphError::KeyTypeMismatch);
        }
        Ok(())
    }

    /// Values at the merge key of edges outside the neighborhood of `v1` and
    /// `v2` that share a signature with some neighborhood edge and agree
    /// with it on every other slot.
    pub fn negative_examples(&self, v1: VertexId, v2: VertexId) -> Result<Vec<Pattern>, GraphError> {
        self.check_pair(v1, v2)?;
        let key = self.triple(v1).key.clone();
        let hood: BTreeSet<EdgeId> = self.vertex(v1)?.edges.union(&self.vertex(v2)?.edges).copied().collect();
        let mut found: BTreeSet<VertexId> = BTreeSet::new();
        for &e in &hood {
            let edge = self.edge(e)?;
            let slot = self.slot_of(edge, &key).expect("edge holds the merge key");
            // scan through the rarest other vertex
            let pivot = edge
                .vertices
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != slot)
                .min_by_key(|(_, v)| self.vertices[v.0].as_ref().unwrap().edges.len())
                .map(|(_, v)| *v)
                .expect("edges have two or more vertices");
            for &f in &self.vertices[pivot.0].as_ref().unwrap().edges {
                if hood.contains(&f) {
                    continue;
                }
                let other = self.edge(f)?;
                if other.signature != edge.signature {
                    continue;
                }
                let aligned = edge
                    .vertices
                    .iter()
                    .zip(&other.vertices)
                    .enumerate()
                    .all(|(i, (a, b))| i == slot || a == b);
                if aligned {
                    found.insert(other.vertices[slot]);
                }
            }
        }
        let mut out: Vec<Pattern> = found.iter().map(|v| self.triple(*v).value.clone()).collect();
        out.sort_by_key(|p| p.render());
        Ok(out)
    }

    /// Edges of `v1` and `v2` that pair up with an edge of the other vertex:
    /// same signature and identical vertices away from the merge key.
    pub fn aligned_subgraph(&self, v1: VertexId, v2: VertexId) -> Result<BTreeSet<EdgeId>, GraphError> {
        self.check_pair(v1, v2)?;
        let key = self.triple(v1).key.clone();
        let context = |e: EdgeId| -> (Signature, Vec<VertexId>) {
            let edge = self.edges[e.0].as_ref().unwrap();
            let slot = self.slot_of(edge, &key).unwrap();
            let mut rest = edge.vertices.clone();
            rest.remove(slot);
            (edge.signature.clone(), rest)
        };
        let mut by_context: HashMap<(Signature, Vec<VertexId>), Vec<EdgeId>> = HashMap::new();
        for &e in &self.vertex(v1)?.edges {
            by_context.entry(context(e)).or_default().push(e);
        }
        let mut out = BTreeSet::new();
        for &e in &self.vertex(v2)?.edges {
            if let Some(partners) = by_context.get(&context(e)) {
                out.insert(e);
                out.extend(partners.iter().copied());
            }
        }
        Ok(out)
    }

    /// Replaces `v1` and `v2` by a vertex holding `merged` in every incident
    /// edge. Edges that become identical are coalesced. If the result would
    /// hold two distinct same-signature edges whose values intersect at every
    /// key, the graph is left unchanged and the offending pairs are returned.
    pub fn merge_vertices_full(
        &mut self,
        v1: VertexId,
        v2: VertexId,
        merged: Pattern,
    ) -> Result<MergeOutcome, GraphError> {
        self.check_pair(v1, v2)?;
        let targets: BTreeSet<EdgeId> = self.vertex(v1)?.edges.union(&self.vertex(v2)?.edges).copied().collect();
        self.rewrite(v1, v2, &targets, merged)
    }

    /// Like [`merge_vertices_full`](Self::merge_vertices_full) but rewrites only
    /// the edges in `subgraph`; `v1` and `v2` survive while they keep edges.
    pub fn merge_vertices_partial(
        &mut self,
        v1: VertexId,
        v2: VertexId,
        subgraph: &BTreeSet<EdgeId>,
        merged: Pattern,
    ) -> Result<MergeOutcome, GraphError> {
        self.check_pair(v1, v2)?;
        if subgraph.is_empty() {
            return Err(GraphError::EmptySubgraph);
        }
        for &e in subgraph {
            self.edge(e)?;
            if !self.vertex(v1)?.edges.contains(&e) && !self.vertex(v2)?.edges.contains(&e) {
                return Err(GraphError::OutsideNeighborhood(e));
            }
        }
        self.rewrite(v1, v2, subgraph, merged)
    }

    fn rewrite(
        &mut self,
        v1: VertexId,
        v2: VertexId,
        targets: &BTreeSet<EdgeId>,
        merged: Pattern,
    ) -> Result<MergeOutcome, GraphError> {
        let base = self.triple(v1).clone();
        let t3 = EntityTriple::new(base.key.clone(), merged.clone(), base.ty.clone());
        let existing = self.by_triple.get(&t3).copied();
        let v3 = existing.unwrap_or(VertexId(self.vertices.len()));

        // plan the rewritten member lists, grouping lists that coincide
        let mut planned: BTreeMap<Vec<VertexId>, (usize, Vec<EdgeId>)> = BTreeMap::new();
        for &e in targets {
            let edge = self.edge(e)?;
            let members: Vec<VertexId> = edge
                .vertices
                .iter()
                .map(|&v| if v == v1 || v == v2 { v3 } else { v })
                .collect();
            if members == edge.vertices {
                continue;
            }
            let slot = planned.entry(members).or_default();
            slot.0 += edge.support;
            slot.1.push(e);
        }
        let removed: BTreeSet<EdgeId> = planned.values().flat_map(|(_, s)| s.iter().copied()).collect();
        let mut absorbed: BTreeMap<Vec<VertexId>, EdgeId> = BTreeMap::new();
        for members in planned.keys() {
            if let Some(&f) = self.by_members.get(members) {
                if !removed.contains(&f) {
                    absorbed.insert(members.clone(), f);
                }
            }
        }

        // uniqueness of every genuinely new edge against its bucket
        let pattern = |v: VertexId| -> &Pattern {
            if v == v3 && existing.is_none() {
                &merged
            } else {
                &self.triple(v).value
            }
        };
        let mut cache: HashMap<(VertexId, VertexId), bool> = HashMap::new();
        let mut overlap = |a: VertexId, b: VertexId| -> bool {
            if a == b {
                return true;
            }
            let k = if a < b { (a, b) } else { (b, a) };
            *cache
                .entry(k)
                .or_insert_with(|| intersects(pattern(a), pattern(b)))
        };
        let fresh: Vec<&Vec<VertexId>> = planned.keys().filter(|m| !absorbed.contains_key(*m)).collect();
        let mut conflicts = Vec::new();
        for (i, members) in fresh.iter().enumerate() {
            let sig = &self.edges[planned[*members].1[0].0].as_ref().unwrap().signature;
            if let Some(bucket) = self.buckets.get(sig) {
                for &f in bucket {
                    if removed.contains(&f) {
                        continue;
                    }
                    let other = &self.edges[f.0].as_ref().unwrap().vertices;
                    if members.iter().zip(other).all(|(a, b)| overlap(*a, *b)) {
                        conflicts.push((planned[*members].1[0], f));
                    }
                }
            }
            for other in &fresh[i + 1..] {
                let osig = &self.edges[planned[*other].1[0].0].as_ref().unwrap().signature;
                if osig == sig && members.iter().zip(other.iter()).all(|(a, b)| overlap(*a, *b)) {
                    conflicts.push((planned[*members].1[0], planned[*other].1[0]));
                }
            }
        }
        if !conflicts.is_empty() {
            return Err(GraphError::Uniqueness(conflicts));
        }

        for &e in &removed {
            self.remove_edge(e);
        }
        if existing.is_none() {
            self.by_triple.insert(t3.clone(), v3);
            self.vertices.push(Some(Vertex {
                triple: t3,
                edges: BTreeSet::new(),
            }));
        }
        let mut new_edges = Vec::new();
        let mut coalesced = 0;
        for (members, (support, sources)) in planned {
            coalesced += sources.len() - 1;
            match absorbed.get(&members) {
                Some(&f) => {
                    coalesced += 1;
                    self.edges[f.0].as_mut().unwrap().support += support;
                }
                None => new_edges.push(self.insert_edge(members, support)),
            }
        }
        for v in [v1, v2] {
            if v != v3 && self.vertices[v.0].as_ref().is_some_and(|x| x.edges.is_empty()) {
                let dead = self.vertices[v.0].take().unwrap();
                self.by_triple.remove(&dead.triple);
            }
        }
        Ok(MergeOutcome {
            merged: v3,
            removed_edges: removed.into_iter().collect(),
            new_edges,
            coalesced,
        })
    }

    /// Pairs of same-signature edges whose values intersect at every key.
    pub fn check_edge_uniqueness(&self) -> Vec<(EdgeId, EdgeId)> {
        let mut out = Vec::new();
        let mut sigs: Vec<&Signature> = self.buckets.keys().collect();
        sigs.sort();
        for sig in sigs {
            let edges: Vec<EdgeId> = self.buckets[sig].iter().copied().collect();
            out.extend(self.bucket_conflicts(&edges));
        }
        out
    }

    fn bucket_conflicts(&self, edges: &[EdgeId]) -> Vec<(EdgeId, EdgeId)> {
        if edges.len() < 2 {
            return Vec::new();
        }
        let arity = self.edges[edges[0].0].as_ref().unwrap().vertices.len();
        // per slot: dense overlap matrix over the distinct vertices used there
        let mut slot_index: Vec<HashMap<VertexId, usize>> = vec![HashMap::new(); arity];
        let mut local: Vec<Vec<usize>> = Vec::with_capacity(edges.len());
        for &e in edges {
            let vs = &self.edges[e.0].as_ref().unwrap().vertices;
            local.push(
                vs.iter()
                    .enumerate()
                    .map(|(s, v)| {
                        let n = slot_index[s].len();
                        *slot_index[s].entry(*v).or_insert(n)
                    })
                    .collect(),
            );
        }
        let matrices: Vec<(usize, Vec<bool>)> = slot_index
            .iter()
            .map(|idx| {
                let n = idx.len();
                let mut ids = vec![VertexId(0); n];
                for (v, &i) in idx {
                    ids[i] = *v;
                }
                let mut m = vec![false; n * n];
                for i in 0..n {
                    m[i * n + i] = true;
                    for j in i + 1..n {
                        let hit = intersects(&self.triple(ids[i]).value, &self.triple(ids[j]).value);
                        m[i * n + j] = hit;
                        m[j * n + i] = hit;
                    }
                }
                (n, m)
            })
            .collect();
        let mut out = Vec::new();
        for i in 0..edges.len() {
            for j in i + 1..edges.len() {
                let hit = (0..arity).all(|s| {
                    let (n, m) = &matrices[s];
                    m[local[i][s] * n + local[j][s]]
                });
                if hit {
                    out.push((edges[i], edges[j]));
                }
            }
        }
        out
    }

    /// Triples of an edge, sorted by key.
    pub fn edge_triples(&self, e: EdgeId) -> Result<Vec<&EntityTriple>, GraphError> {
        Ok(self.edge(e)?.vertices.iter().map(|v| self.triple(*v)).collect())
    }

    /// Whether the rule `e` accepts the event.
    pub fn edge_matches(&self, e: EdgeId, event: &EventRecord) -> bool {
        let Ok(edge) = self.edge(e) else { return false };
        if edge.signature != event.signature() {
            return false;
        }
        edge.vertices.iter().zip(event.triples()).all(|(v, t)| {
            let value = t.value.as_literal().map(str::to_string).unwrap_or_else(|| t.value.render());
            Matcher::new(&self.triple(*v).value).is_match(&value)
        })
    }

    /// Edges accepting the event.
    pub fn matching_edges(&self, event: &EventRecord) -> Vec<EdgeId> {
        match self.buckets.get(&event.signature()) {
            Some(b) => b.iter().copied().filter(|e| self.edge_matches(*e, event)).collect(),
            None => Vec::new(),
        }
    }

    /// Incidence lists agree with the edge member lists.
    pub fn index_consistent(&self) -> bool {
        for e in self.edge_ids() {
            let edge = self.edge(e).unwrap();
            if edge.vertices.len() < 2 {
                return false;
            }
            for v in &edge.vertices {
                match self.vertex(*v) {
                    Ok(vx) if vx.edges.contains(&e) => {}
                    _ => return false,
                }
            }
            if self.by_members.get(&edge.vertices) != Some(&e) {
                return false;
            }
        }
        self.vertex_ids().all(|v| {
            let vx = self.vertex(v).unwrap();
            !vx.edges.is_empty()
                && vx.edges.iter().all(|e| self.edge(*e).is_ok_and(|x| x.vertices.contains(&v)))
        })
    }

    pub fn debug_json(&self) -> Value {
        let vertices: Vec<Value> = self
            .vertex_ids()
            .map(|v| {
                let t = self.triple(v);
                json!({"id": v.0, "key": t.key, "type": t.ty, "value": t.value.render(),
                       "degree": self.vertices[v.0].as_ref().unwrap().edges.len()})
            })
            .collect();
        let edges: Vec<Value> = self
            .edge_ids()
            .map(|e| {
                let edge = self.edge(e).unwrap();
                json!({"id": e.0, "vertices": edge.vertices.iter().map(|v| v.0).collect::<Vec<_>>(),
                       "support": edge.support})
            })
            .collect();
        json!({"vertices": vertices, "edges": edges})
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regex::parse;

    fn ev(pairs: &[(&str, &str)]) -> EventRecord {
        EventRecord::new(pairs.iter().map(|(k, v)| EntityTriple::literal(*k, v, *k)).collect()).unwrap()
    }

    #[test]
    fn duplicates_collapse_and_single_entities_fail() {
        let e = ev(&[("a", "1"), ("b", "2")]);
        let g = RuleHypergraph::build_from_events([&e, &e]).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.vertex_count(), 2);
        let lone = ev(&[("a", "1")]);
        assert!(matches!(
            RuleHypergraph::build_from_events([&e, &lone]),
            Err(GraphError::SingleEntity { index: 1 })
        ));
    }

    #[test]
    fn negatives_follow_aligned_foreign_edges() {
        let events = [
            ev(&[("id", "u1"), ("op", "read")]),
            ev(&[("id", "u2"), ("op", "read")]),
            ev(&[("id", "u3"), ("op", "read")]),
            ev(&[("id", "u3"), ("op", "write")]),
            ev(&[("id", "u4"), ("op", "write"), ("x", "1")]),
        ];
        let g = RuleHypergraph::build_from_events(events.iter()).unwrap();
        let v = |s: &str| g.find_vertex(&EntityTriple::literal("id", s, "id")).unwrap();
        let negs = g.negative_examples(v("u1"), v("u2")).unwrap();
        assert_eq!(negs, vec![Pattern::literal("u3")]);
        // the read edge of u3 aligns with u1 and u2; the 3-key edge of u4 has no peers
        assert_eq!(
            g.negative_examples(v("u3"), v("u4")).unwrap(),
            vec![Pattern::literal("u1"), Pattern::literal("u2")]
        );
        let op = g.find_vertex(&EntityTriple::literal("op", "read", "op")).unwrap();
        assert_eq!(g.negative_examples(v("u1"), op), Err(GraphError::KeyTypeMismatch));
    }

    #[test]
    fn full_merge_coalesces() {
        let events = [
            ev(&[("id", "u1"), ("op", "read")]),
            ev(&[("id", "u2"), ("op", "read")]),
            ev(&[("id", "u2"), ("op", "write")]),
        ];
        let mut g = RuleHypergraph::build_from_events(events.iter()).unwrap();
        let v = |g: &RuleHypergraph, s: &str| g.find_vertex(&EntityTriple::literal("id", s, "id")).unwrap();
        let (a, b) = (v(&g, "u1"), v(&g, "u2"));
        let out = g.merge_vertices_full(a, b, parse("u[0-9]{1}").unwrap()).unwrap();
        assert_eq!(g.edge_count(), 2);
        assert_eq!(out.coalesced, 1);
        assert!(!g.is_live_vertex(a) && !g.is_live_vertex(b));
        assert_eq!(g.hyperedge_neighbors(out.merged).unwrap().len(), 2);
        let supports: Vec<usize> = g.edge_ids().map(|e| g.edge(e).unwrap().support).collect();
        assert_eq!(supports.iter().sum::<usize>(), 3);
        assert!(g.index_consistent());
        assert!(g.check_edge_uniqueness().is_empty());
    }

    #[test]
    fn conflicting_merge_rolls_back() {
        let events = [
            ev(&[("id", "u1"), ("op", "read")]),
            ev(&[("id", "u2"), ("op", "write")]),
            ev(&[("id", "u3"), ("op", "read")]),
        ];
        let mut g = RuleHypergraph::build_from_events(events.iter()).unwrap();
        let v = |s: &str| g.find_vertex(&EntityTriple::literal("id", s, "id")).unwrap();
        let (a, b) = (v("u1"), v("u2"));
        let before = g.debug_json();
        // u[0-9] would also cover u3, which already reads
        let err = g.merge_vertices_full(a, b, parse("u[0-9]{1}").unwrap()).unwrap_err();
        assert!(matches!(err, GraphError::Uniqueness(_)));
        assert_eq!(g.debug_json(), before);
    }

    #[test]
    fn partial_merge_keeps_outside_edges() {
        let events = [
            ev(&[("id", "u1"), ("op", "read")]),
            ev(&[("id", "u2"), ("op", "read")]),
            ev(&[("id", "u1"), ("op", "write")]),
            ev(&[("id", "u2"), ("op", "delete")]),
        ];
        let mut g = RuleHypergraph::build_from_events(events.iter()).unwrap();
        let v = |g: &RuleHypergraph, s: &str| g.find_vertex(&EntityTriple::literal("id", s, "id")).unwrap();
        let (a, b) = (v(&g, "u1"), v(&g, "u2"));
        let sub = g.aligned_subgraph(a, b).unwrap();
        assert_eq!(sub.len(), 2);
        let out = g.merge_vertices_partial(a, b, &sub, parse("u(?:1|2)").unwrap()).unwrap();
        assert_eq!(g.edge_count(), 3);
        assert!(g.is_live_vertex(a) && g.is_live_vertex(b));
        assert_eq!(g.hyperedge_neighbors(out.merged).unwrap().len(), 1);
        assert_eq!(g.hyperedge_neighbors(a).unwrap().len(), 1);
        assert!(g.index_consistent());
        assert_eq!(
            g.merge_vertices_partial(a, b, &BTreeSet::new(), Pattern::literal("x")).unwrap_err(),
            GraphError::EmptySubgraph
        );
    }

    #[test]
    fn overlapping_rules_are_reported() {
        let t = |id: &str| {
            (
                vec![
                    EntityTriple::new("id", parse(id).unwrap(), "id"),
                    EntityTriple::literal("op", "read", "op"),
                ],
                1,
            )
        };
        let g = RuleHypergraph::from_rules(vec![t("u[0-9]{1}"), t("u(?:1|x)")]).unwrap();
        assert_eq!(g.check_edge_uniqueness().len(), 1);
        let g = RuleHypergraph::from_rules(vec![t("u[0-9]{1}"), t("u(?:a|x)")]).unwrap();
        assert!(g.check_edge_uniqueness().is_empty());
    }
}
