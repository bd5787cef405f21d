//! Label-aware SimRank over the star expansion of a rule hypergraph.
//!
//! The star expansion has one node per entity and one per hyperedge, joined
//! by incidence. One iteration is
//! `S' = I + c · L ∘ N ∘ (Aᵀ S A)` with `N(i,j) = 1/(|In(i)||In(j)|)` off the
//! diagonal. Entity–hyperedge pairs have label similarity 0 and so stay at 0,
//! which makes the iteration alternate between entity pairs and hyperedge
//! pairs. Hyperedge pairs carry label similarity 1; with 0 there, distinct
//! same-key entities (which never share an edge) would stay at 0 forever.
//!
//! Two routes compute the same entity scores: [`sim_matrix_dense`] iterates
//! the full `(|V|+|E|)²` matrix; [`vertex_scores`] iterates only entity pairs
//! of equal key and type through two-step profiles and scales to large graphs.

use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;

use rayon::prelude::*;

use crate::event::EntityTriple;
use crate::hypergraph::{EdgeId, RuleHypergraph, VertexId};
use crate::regex::{sample_words, Pattern};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("iterations must exceed 2 (got {0})")]
    Iterations(usize),
    #[error("decay factor must lie in [0, 1) (got {0})")]
    Decay(f64),
    #[error("merge threshold must lie in (0, 1] (got {0})")]
    Threshold(f64),
    #[error("sample count must be at least 1")]
    Samples,
    #[error("node {0} is a hyperedge, not an entity")]
    HyperedgeNode(usize),
    #[error("vertex {0:?} has no score")]
    UnknownVertex(VertexId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreMode {
    /// `S_k(u,v)` divided by the geometric mean of the scores a perfect
    /// structural twin of `u` and of `v` would get.
    Normalized,
    /// `S_k(u,v)` as iterated.
    Raw,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimParams {
    pub decay_factor: f64,
    pub iterations: usize,
    pub merge_threshold: f64,
    pub sample_count: usize,
    pub seed: u64,
    pub mode: ScoreMode,
    /// Key/type groups with more vertices are left unscored.
    pub max_group_size: usize,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            decay_factor: 0.8,
            iterations: 4,
            merge_threshold: DEFAULT_THRESHOLD,
            sample_count: 32,
            seed: 0,
            mode: ScoreMode::Normalized,
            max_group_size: 1500,
        }
    }
}

pub const DEFAULT_THRESHOLD: f64 = 0.64;

impl SimParams {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.iterations <= 2 {
            return Err(SimError::Iterations(self.iterations));
        }
        if !(0.0..1.0).contains(&self.decay_factor) {
            return Err(SimError::Decay(self.decay_factor));
        }
        if !(self.merge_threshold > 0.0 && self.merge_threshold <= 1.0) {
            return Err(SimError::Threshold(self.merge_threshold));
        }
        if self.sample_count == 0 {
            return Err(SimError::Samples);
        }
        Ok(())
    }
}

/// Levenshtein distance over characters divided by the longer length.
pub fn string_distance(a: &str, b: &str) -> f64 {
    let n = a.chars().count().max(b.chars().count());
    if n == 0 {
        return 0.0;
    }
    strsim::levenshtein(a, b) as f64 / n as f64
}

fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// The words used to stand for a pattern's language: all of them when there
/// are at most `n`, else `n` samples seeded by `seed` and the pattern text.
pub fn representatives(p: &Pattern, n: usize, seed: u64) -> Vec<String> {
    match p.words(n) {
        Some(w) => w.into_iter().collect(),
        None => sample_words(p, n, seed ^ fnv1a(&p.render())),
    }
}

/// Hausdorff distance between the two languages under [`string_distance`].
pub fn hausdorff_distance(r1: &Pattern, r2: &Pattern, samples: usize, seed: u64) -> f64 {
    let a = representatives(r1, samples, seed);
    let b = representatives(r2, samples, seed);
    hausdorff_sets(&a, &b)
}

pub fn hausdorff_sets(a: &[String], b: &[String]) -> f64 {
    let directed = |x: &[String], y: &[String]| {
        x.iter()
            .map(|s| {
                y.iter()
                    .map(|t| string_distance(s, t))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    directed(a, b).max(directed(b, a))
}

/// Memoized value-level similarity of entity triples.
#[derive(Debug, Default)]
pub struct LabelModel {
    pub samples: usize,
    pub seed: u64,
    cache: Mutex<HashMap<(String, String), f64>>,
}

impl LabelModel {
    pub fn new(samples: usize, seed: u64) -> Self {
        LabelModel {
            samples,
            seed,
            cache: Mutex::new(HashMap::new()),
        }
    }

    /// 1 on identical triples, 0 across keys or types, otherwise one minus
    /// the Hausdorff distance of the values.
    pub fn similarity(&self, a: &EntityTriple, b: &EntityTriple) -> f64 {
        if a.key != b.key || a.ty != b.ty {
            return 0.0;
        }
        if a.value == b.value {
            return 1.0;
        }
        let (ra, rb) = (a.value.render(), b.value.render());
        let k = if ra <= rb { (ra, rb) } else { (rb, ra) };
        if let Some(v) = self.cache.lock().unwrap().get(&k) {
            return *v;
        }
        let d = match (a.value.as_literal(), b.value.as_literal()) {
            (Some(x), Some(y)) => string_distance(x, y),
            _ => hausdorff_distance(&a.value, &b.value, self.samples, self.seed),
        };
        let s = (1.0 - d).clamp(0.0, 1.0);
        self.cache.lock().unwrap().insert(k, s);
        s
    }

    pub fn cached(&self) -> usize {
        self.cache.lock().unwrap().len()
    }
}

pub type LabelFn<'a> = &'a (dyn Fn(&EntityTriple, &EntityTriple) -> f64 + Sync);

/// Node layout of the star expansion: entities first, then hyperedges.
#[derive(Clone, Debug)]
pub struct StarGraph {
    pub vertices: Vec<VertexId>,
    pub edges: Vec<EdgeId>,
    /// Incident star neighbors per node, as node indices.
    pub adjacency: Vec<Vec<usize>>,
}

impl StarGraph {
    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_hyperedge(&self, node: usize) -> bool {
        node >= self.vertices.len()
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }
}

pub fn star_expand(g: &RuleHypergraph) -> StarGraph {
    let vertices: Vec<VertexId> = g.vertex_ids().collect();
    let edges: Vec<EdgeId> = g.edge_ids().collect();
    let vpos: HashMap<VertexId, usize> = vertices.iter().enumerate().map(|(i, v)| (*v, i)).collect();
    let nv = vertices.len();
    let mut adjacency = vec![Vec::new(); nv + edges.len()];
    for (j, e) in edges.iter().enumerate() {
        for v in g.edge(*e).unwrap().vertices() {
            let i = vpos[v];
            adjacency[i].push(nv + j);
            adjacency[nv + j].push(i);
        }
    }
    for a in adjacency.iter_mut() {
        a.sort_unstable();
    }
    StarGraph {
        vertices,
        edges,
        adjacency,
    }
}

/// Full similarity matrix over the star expansion.
#[derive(Clone, Debug)]
pub struct SimilarityMatrix {
    pub star: StarGraph,
    pub values: Vec<f64>,
    pub iterations: usize,
    /// `‖S_{n+1} − S_n‖_∞` for each step taken.
    pub deltas: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.star.node_count() + j]
    }

    /// Score of two entity nodes.
    pub fn entity_score(&self, i: usize, j: usize) -> Result<f64, SimError> {
        for n in [i, j] {
            if self.star.is_hyperedge(n) {
                return Err(SimError::HyperedgeNode(n));
            }
        }
        Ok(self.get(i, j))
    }

    pub fn node_of(&self, v: VertexId) -> Option<usize> {
        self.star.vertices.iter().position(|x| *x == v)
    }

    pub fn sim_score(&self, v1: VertexId, v2: VertexId) -> Result<f64, SimError> {
        let i = self.node_of(v1).ok_or(SimError::UnknownVertex(v1))?;
        let j = self.node_of(v2).ok_or(SimError::UnknownVertex(v2))?;
        self.entity_score(i, j)
    }
}

/// Iterates the full matrix `iterations` times from the identity.
pub fn sim_matrix_dense(
    g: &RuleHypergraph,
    decay: f64,
    iterations: usize,
    label: LabelFn<'_>,
) -> SimilarityMatrix {
    let star = star_expand(g);
    let n = star.node_count();
    let nv = star.vertices.len();
    let mut lab = vec![0.0; n * n];
    for i in 0..n {
        lab[i * n + i] = 1.0;
    }
    for i in 0..nv {
        for j in i + 1..nv {
            let l = label(g.triple(star.vertices[i]), g.triple(star.vertices[j]));
            lab[i * n + j] = l;
            lab[j * n + i] = l;
        }
    }
    for i in nv..n {
        for j in nv..n {
            lab[i * n + j] = 1.0;
        }
    }
    let mut s = vec![0.0; n * n];
    for i in 0..n {
        s[i * n + i] = 1.0;
    }
    let mut deltas = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        // t = S·A, then m = Aᵀ·t, each in O(n · nnz)
        let t: Vec<f64> = (0..n)
            .into_par_iter()
            .flat_map_iter(|x| {
                let row = &s[x * n..(x + 1) * n];
                let adj = &star.adjacency;
                (0..n).map(move |j| adj[j].iter().map(|y| row[*y]).sum::<f64>())
            })
            .collect();
        let mut next: Vec<f64> = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| {
                let (t, lab, star) = (&t, &lab, &star);
                (0..n).map(move |j| {
                    if i == j {
                        return 1.0;
                    }
                    let l = lab[i * n + j];
                    if l == 0.0 {
                        return 0.0;
                    }
                    let m: f64 = star.adjacency[i].iter().map(|x| t[x * n + j]).sum();
                    decay * l * m / (star.degree(i) * star.degree(j)) as f64
                })
            })
            .collect();
        for i in 0..n {
            for j in i + 1..n {
                next[j * n + i] = next[i * n + j];
            }
        }
        let delta = next
            .iter()
            .zip(&s)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        deltas.push(delta);
        s = next;
    }
    SimilarityMatrix {
        star,
        values: s,
        iterations,
        deltas,
    }
}

/// Dense matrix with the label model of `params`.
pub fn sim_matrix(g: &RuleHypergraph, params: &SimParams, labels: &LabelModel) -> SimilarityMatrix {
    let f = |a: &EntityTriple, b: &EntityTriple| labels.similarity(a, b);
    sim_matrix_dense(g, params.decay_factor, params.iterations, &f)
}

struct Group {
    members: Vec<VertexId>,
    /// Row-major scores among members; unit diagonal.
    scores: Vec<f64>,
}

/// Entity-pair scores of one similarity computation.
pub struct VertexScores {
    groups: Vec<Group>,
    place: HashMap<VertexId, (usize, usize)>,
    twin: HashMap<VertexId, f64>,
    pub mode: ScoreMode,
    pub iterations: usize,
}

impl VertexScores {
    /// `S_k(u,v)`; 0 across keys or types.
    pub fn raw(&self, u: VertexId, v: VertexId) -> Result<f64, SimError> {
        let (gu, iu) = *self.place.get(&u).ok_or(SimError::UnknownVertex(u))?;
        let (gv, iv) = *self.place.get(&v).ok_or(SimError::UnknownVertex(v))?;
        if gu != gv {
            return Ok(if u == v { 1.0 } else { 0.0 });
        }
        let g = &self.groups[gu];
        Ok(g.scores[iu * g.members.len() + iv])
    }

    /// Score a perfect structural twin of `u` would reach.
    pub fn twin_score(&self, u: VertexId) -> f64 {
        self.twin.get(&u).copied().unwrap_or(0.0)
    }

    pub fn normalized(&self, u: VertexId, v: VertexId) -> Result<f64, SimError> {
        let raw = self.raw(u, v)?;
        if u == v {
            return Ok(1.0);
        }
        let norm = (self.twin_score(u) * self.twin_score(v)).sqrt();
        Ok(if norm > 0.0 { raw / norm } else { 0.0 })
    }

    pub fn sim_score(&self, u: VertexId, v: VertexId) -> Result<f64, SimError> {
        match self.mode {
            ScoreMode::Raw => self.raw(u, v),
            ScoreMode::Normalized => self.normalized(u, v),
        }
    }

    /// Distinct same-group pairs `(u, v)` with `u < v` whose score exceeds
    /// `threshold`, restricted to groups accepted by `keep`.
    pub fn pairs_above(
        &self,
        threshold: f64,
        keep: impl Fn(VertexId) -> bool,
    ) -> Vec<(VertexId, VertexId, f64)> {
        let mut out = Vec::new();
        for g in &self.groups {
            if g.members.first().is_some_and(|v| !keep(*v)) {
                continue;
            }
            for (i, &u) in g.members.iter().enumerate() {
                for &v in &g.members[i + 1..] {
                    let s = self.sim_score(u, v).unwrap();
                    if s > threshold {
                        out.push((u, v, s));
                    }
                }
            }
        }
        out
    }

    /// All distinct same-group pairs with their scores.
    pub fn all_pairs(&self) -> Vec<(VertexId, VertexId, f64)> {
        self.pairs_above(f64::NEG_INFINITY, |_| true)
    }
}

type Profile = Vec<(usize, Vec<(usize, f64)>)>;

/// Two-step profile: for each co-occurring entity `x` (including `u`
/// itself), `Σ 1/|e|` over edges holding both.
fn profiles(g: &RuleHypergraph, place: &HashMap<VertexId, (usize, usize)>) -> HashMap<VertexId, Profile> {
    g.vertex_ids()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|u| {
            let mut acc: BTreeMap<(usize, usize), f64> = BTreeMap::new();
            for e in g.hyperedge_neighbors(u).unwrap() {
                let edge = g.edge(*e).unwrap();
                let w = 1.0 / edge.vertices().len() as f64;
                for x in edge.vertices() {
                    *acc.entry(place[x]).or_insert(0.0) += w;
                }
            }
            let mut by_group: Vec<(usize, Vec<(usize, f64)>)> = Vec::new();
            for ((grp, i), w) in acc {
                match by_group.last_mut() {
                    Some((g0, list)) if *g0 == grp => list.push((i, w)),
                    _ => by_group.push((grp, vec![(i, w)])),
                }
            }
            (u, by_group)
        })
        .collect()
}

/// Entity scores after `params.iterations` steps, computed per key/type group.
pub fn vertex_scores(g: &RuleHypergraph, params: &SimParams, label: LabelFn<'_>) -> VertexScores {
    let mut grouped: BTreeMap<(String, String), Vec<VertexId>> = BTreeMap::new();
    for v in g.vertex_ids() {
        let t = g.triple(v);
        grouped.entry((t.key.clone(), t.ty.clone())).or_default().push(v);
    }
    let mut groups = Vec::new();
    let mut place = HashMap::new();
    for (_, members) in grouped {
        let gi = groups.len();
        for (i, v) in members.iter().enumerate() {
            place.insert(*v, (gi, i));
        }
        let m = members.len();
        let mut scores = vec![0.0; m * m];
        for i in 0..m {
            scores[i * m + i] = 1.0;
        }
        groups.push(Group { members, scores });
    }
    let prof = profiles(g, &place);
    let degree: HashMap<VertexId, f64> = g
        .vertex_ids()
        .map(|v| (v, g.hyperedge_neighbors(v).unwrap().len() as f64))
        .collect();

    // label similarities of the pairs that get iterated
    let labels: Vec<Vec<f64>> = groups
        .iter()
        .map(|grp| {
            let m = grp.members.len();
            if m < 2 || m > params.max_group_size {
                return Vec::new();
            }
            let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect();
            let vals: Vec<f64> = pairs
                .par_iter()
                .map(|&(i, j)| label(g.triple(grp.members[i]), g.triple(grp.members[j])))
                .collect();
            let mut l = vec![0.0; m * m];
            for (&(i, j), v) in pairs.iter().zip(vals) {
                l[i * m + j] = v;
                l[j * m + i] = v;
            }
            l
        })
        .collect();

    let c2 = params.decay_factor * params.decay_factor;
    let mut twin: HashMap<VertexId, f64> = g.vertex_ids().map(|v| (v, 0.0)).collect();
    let bilinear = |groups: &[Group], pu: &[(usize, Vec<(usize, f64)>)], pv: &[(usize, Vec<(usize, f64)>)]| {
        let mut total = 0.0;
        let (mut a, mut b) = (0, 0);
        while a < pu.len() && b < pv.len() {
            match pu[a].0.cmp(&pv[b].0) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    let grp = &groups[pu[a].0];
                    let m = grp.members.len();
                    for &(x, wx) in &pu[a].1 {
                        let row = &grp.scores[x * m..(x + 1) * m];
                        for &(y, wy) in &pv[b].1 {
                            total += wx * wy * row[y];
                        }
                    }
                    a += 1;
                    b += 1;
                }
            }
        }
        total
    };

    for _ in 0..params.iterations / 2 {
        let updates: Vec<Vec<f64>> = groups
            .par_iter()
            .enumerate()
            .map(|(gi, grp)| {
                let m = grp.members.len();
                let l = &labels[gi];
                let mut next = vec![0.0; m * m];
                for i in 0..m {
                    next[i * m + i] = 1.0;
                }
                if l.is_empty() {
                    return next;
                }
                let cells: Vec<(usize, usize, f64)> = (0..m)
                    .flat_map(|i| (i + 1..m).map(move |j| (i, j)))
                    .filter(|&(i, j)| l[i * m + j] > 0.0)
                    .map(|(i, j)| {
                        let (u, v) = (grp.members[i], grp.members[j]);
                        let s = bilinear(&groups, &prof[&u], &prof[&v]);
                        (i, j, c2 * l[i * m + j] * s / (degree[&u] * degree[&v]))
                    })
                    .collect();
                for (i, j, s) in cells {
                    next[i * m + j] = s;
                    next[j * m + i] = s;
                }
                next
            })
            .collect();
        let next_twin: HashMap<VertexId, f64> = g
            .vertex_ids()
            .collect::<Vec<_>>()
            .par_iter()
            .map(|&u| {
                let pu = &prof[&u];
                let (gi, i) = place[&u];
                let self_w = pu
                    .iter()
                    .find(|(grp, _)| *grp == gi)
                    .and_then(|(_, list)| list.iter().find(|(x, _)| *x == i))
                    .map(|(_, w)| *w)
                    .unwrap_or(0.0);
                let quad = bilinear(&groups, pu, pu);
                let d = degree[&u];
                let t = c2 / (d * d) * (quad - self_w * self_w * (1.0 - twin[&u]));
                (u, t.max(0.0))
            })
            .collect();
        for (grp, scores) in groups.iter_mut().zip(updates) {
            grp.scores = scores;
        }
        twin = next_twin;
    }
    VertexScores {
        groups,
        place,
        twin,
        mode: params.mode,
        iterations: params.iterations,
    }
}

/// Scores with the memoized label model.
pub fn vertex_scores_with(g: &RuleHypergraph, params: &SimParams, labels: &LabelModel) -> VertexScores {
    let f = |a: &EntityTriple, b: &EntityTriple| labels.similarity(a, b);
    vertex_scores(g, params, &f)
}

/// The `m` highest-scoring distinct pairs, best first.
pub fn top_pairs(g: &RuleHypergraph, scores: &VertexScores, m: usize) -> Vec<serde_json::Value> {
    let mut pairs = scores.all_pairs();
    pairs.sort_by(|a, b| b.2.total_cmp(&a.2).then_with(|| (a.0, a.1).cmp(&(b.0, b.1))));
    pairs
        .into_iter()
        .take(m)
        .map(|(u, v, s)| {
            let (a, b) = (g.triple(u), g.triple(v));
            serde_json::json!({
                "key": a.key, "type": a.ty,
                "a": a.value.render(), "b": b.value.render(),
                "score": s, "raw": scores.raw(u, v).unwrap(),
            })
        })
        .collect()
}
