//! Edge-cover counting on black-and-white graphs.
//!
//! A bw-graph colors each node black (must be covered) or white
//! (unconstrained); an edge cover is an edge subset giving every black node
//! an incident edge. The weighted partition function is
//! `Z(G,λ) = Σ_covers λ^|C|`; `λ = 1` recovers the plain count.
//!
//! Three counting routes live here:
//! * brute force over edge subsets (small graphs, the oracle);
//! * a cubic dynamic program for **class-B** graphs — four ordered layers
//!   white/black/black/white with complete bipartite edges between
//!   consecutive layers — based on the dangling-edge recursion
//!   `Z(G) = (1+λ)·Z(G−e, u whitened) − Z(G−E(u)−u)`;
//! * a decomposition for all-black complete bipartite graphs that bottoms
//!   out in class-B instances.
//!
//! The module also finds lexicographically-least minimum edge covers of
//! complete bipartite demand sets and samples covers by Glauber dynamics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, Zero};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::model::Rational;

/// Brute-force guard: subsets of more edges than this are not enumerated.
pub const BRUTE_FORCE_EDGE_CAP: usize = 25;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Color {
    Black,
    White,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeKind {
    /// Both endpoints white.
    Free,
    /// One black endpoint, one white.
    Dangling,
    /// Both endpoints black.
    Regular,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum EdgeCoverError {
    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error("node {node} does not exist")]
    UnknownNode { node: u64 },
    #[error("edge {a}-{b} does not exist")]
    UnknownEdge { a: u64, b: u64 },
    #[error("self-loop on node {node}")]
    SelfLoop { node: u64 },
    #[error("{edges} edges exceed the brute-force cap of {cap}")]
    TooManyEdges { edges: usize, cap: usize },
    #[error("not a class-B instance: {reason}")]
    NotClassB { reason: String },
    #[error("graph shape is not supported by any exact counting route: {reason}")]
    UnsupportedShape { reason: String },
    #[error("lambda must be positive")]
    NonPositiveLambda,
    #[error("demands are uncoverable (one side of the bipartite demand is empty)")]
    Uncoverable,
    #[error("both demand sides are empty; there is nothing to cover")]
    EmptyCoverInstance,
    #[error("graph has an isolated black node; no edge cover exists")]
    UncoverableGraph,
}

/// Undirected simple graph with black/white node colors. Edges are stored
/// with endpoints ordered, so parallel edges cannot be represented.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct BwGraph {
    nodes: BTreeMap<u64, Color>,
    edges: BTreeSet<(u64, u64)>,
}

impl BwGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Add (or recolor) a node.
    pub fn add_node(&mut self, id: u64, color: Color) {
        self.nodes.insert(id, color);
    }

    /// Add an edge between existing nodes; adding an existing edge is a
    /// no-op (the graph is simple).
    pub fn add_edge(&mut self, a: u64, b: u64) -> Result<(), EdgeCoverError> {
        if a == b {
            return Err(EdgeCoverError::SelfLoop { node: a });
        }
        for n in [a, b] {
            if !self.nodes.contains_key(&n) {
                return Err(EdgeCoverError::UnknownNode { node: n });
            }
        }
        self.edges.insert((a.min(b), a.max(b)));
        Ok(())
    }

    pub fn color(&self, id: u64) -> Option<Color> {
        self.nodes.get(&id).copied()
    }

    pub fn nodes(&self) -> impl Iterator<Item = (u64, Color)> + '_ {
        self.nodes.iter().map(|(&id, &c)| (id, c))
    }

    pub fn edges(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn neighbors(&self, id: u64) -> BTreeSet<u64> {
        let mut out = BTreeSet::new();
        for &(a, b) in &self.edges {
            if a == id {
                out.insert(b);
            } else if b == id {
                out.insert(a);
            }
        }
        out
    }
}

/// Four-layer class-B instance: `v1` white, `v2` black, `v3` black, `v4`
/// white nodes, complete bipartite edges between consecutive layers.
/// `extra_free_edges` additional white–white edges (at most `v1·v4`,
/// materialized between V1 and V4) each multiply Z by `1+λ`; they appear
/// when a formula's variable universe has cells no clause mentions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClassBGraph {
    pub v1: usize,
    pub v2: usize,
    pub v3: usize,
    pub v4: usize,
    pub extra_free_edges: usize,
}

impl ClassBGraph {
    pub fn new(v1: usize, v2: usize, v3: usize, v4: usize) -> Self {
        ClassBGraph { v1, v2, v3, v4, extra_free_edges: 0 }
    }

    pub fn with_extra_free_edges(mut self, extra: usize) -> Self {
        self.extra_free_edges = extra;
        self
    }

    /// Whether the extra free edges fit between the V1 and V4 whites; only
    /// materialization needs this, counting treats each as a bare factor.
    fn check_materializable(&self) -> Result<(), EdgeCoverError> {
        if self.extra_free_edges > self.v1 * self.v4 {
            return Err(EdgeCoverError::NotClassB {
                reason: format!(
                    "{} extra free edges do not fit between {} and {} white nodes",
                    self.extra_free_edges, self.v1, self.v4
                ),
            });
        }
        Ok(())
    }

    /// Number of layer-to-layer edges, `|V1||V2| + |V2||V3| + |V3||V4|`
    /// (extra free edges not included).
    pub fn layer_edge_count(&self) -> usize {
        self.v1 * self.v2 + self.v2 * self.v3 + self.v3 * self.v4
    }

    /// Materialize as an explicit [`BwGraph`]. Nodes are numbered layer by
    /// layer from 1; extra free edges take the lexicographically first
    /// V1×V4 pairs.
    pub fn to_bwgraph(&self) -> Result<BwGraph, EdgeCoverError> {
        self.check_materializable()?;
        let mut g = BwGraph::new();
        let v1: Vec<u64> = (1..=self.v1 as u64).collect();
        let base2 = self.v1 as u64;
        let v2: Vec<u64> = (base2 + 1..=base2 + self.v2 as u64).collect();
        let base3 = base2 + self.v2 as u64;
        let v3: Vec<u64> = (base3 + 1..=base3 + self.v3 as u64).collect();
        let base4 = base3 + self.v3 as u64;
        let v4: Vec<u64> = (base4 + 1..=base4 + self.v4 as u64).collect();
        for &n in &v1 {
            g.add_node(n, Color::White);
        }
        for &n in &v2 {
            g.add_node(n, Color::Black);
        }
        for &n in &v3 {
            g.add_node(n, Color::Black);
        }
        for &n in &v4 {
            g.add_node(n, Color::White);
        }
        for (layer_a, layer_b) in [(&v1, &v2), (&v2, &v3), (&v3, &v4)] {
            for &a in layer_a.iter() {
                for &b in layer_b.iter() {
                    g.add_edge(a, b)?;
                }
            }
        }
        let mut remaining = self.extra_free_edges;
        'outer: for &a in &v1 {
            for &b in &v4 {
                if remaining == 0 {
                    break 'outer;
                }
                g.add_edge(a, b)?;
                remaining -= 1;
            }
        }
        Ok(g)
    }
}

/// Parsed `.bwg` file: an explicit graph or the class-B shorthand.
#[derive(Clone, Debug, PartialEq)]
pub enum BwgInput {
    Graph(BwGraph),
    ClassB(ClassBGraph),
}

/// Parse the `.bwg` text format: `node ID black|white` and `edge ID ID`
/// lines, `#` comments, or a single `classB k1 m n k2` shorthand line.
pub fn parse_bwg(text: &str) -> Result<BwgInput, EdgeCoverError> {
    let mut graph = BwGraph::new();
    let mut class_b: Option<ClassBGraph> = None;
    let mut saw_graph_line = false;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut parts = content.split_whitespace();
        let keyword = parts.next().unwrap();
        let fields: Vec<&str> = parts.collect();
        let fmt_err = |msg: String| EdgeCoverError::Format { line, msg };
        match keyword {
            "node" => {
                saw_graph_line = true;
                if fields.len() != 2 {
                    return Err(fmt_err("expected: node ID black|white".into()));
                }
                let id: u64 = fields[0]
                    .parse()
                    .map_err(|_| fmt_err(format!("bad node id {:?}", fields[0])))?;
                let color = match fields[1] {
                    "black" => Color::Black,
                    "white" => Color::White,
                    other => return Err(fmt_err(format!("bad color {other:?}"))),
                };
                graph.add_node(id, color);
            }
            "edge" => {
                saw_graph_line = true;
                if fields.len() != 2 {
                    return Err(fmt_err("expected: edge ID ID".into()));
                }
                let a: u64 = fields[0]
                    .parse()
                    .map_err(|_| fmt_err(format!("bad node id {:?}", fields[0])))?;
                let b: u64 = fields[1]
                    .parse()
                    .map_err(|_| fmt_err(format!("bad node id {:?}", fields[1])))?;
                graph
                    .add_edge(a, b)
                    .map_err(|e| fmt_err(e.to_string()))?;
            }
            "classB" => {
                if fields.len() != 4 {
                    return Err(fmt_err("expected: classB k1 m n k2".into()));
                }
                let mut sizes = [0usize; 4];
                for (slot, f) in sizes.iter_mut().zip(&fields) {
                    *slot = f
                        .parse()
                        .map_err(|_| fmt_err(format!("bad layer size {f:?}")))?;
                }
                if class_b.is_some() {
                    return Err(fmt_err("more than one classB line".into()));
                }
                class_b = Some(ClassBGraph::new(sizes[0], sizes[1], sizes[2], sizes[3]));
            }
            other => return Err(fmt_err(format!("unknown directive {other:?}"))),
        }
    }
    match (class_b, saw_graph_line) {
        (Some(_), true) => Err(EdgeCoverError::Format {
            line: 0,
            msg: "classB shorthand cannot be mixed with node/edge lines".into(),
        }),
        (Some(cb), false) => Ok(BwgInput::ClassB(cb)),
        (None, _) => Ok(BwgInput::Graph(graph)),
    }
}

/// Render a graph in the `.bwg` format.
pub fn render_bwg(g: &BwGraph) -> String {
    let mut out = String::new();
    for (id, color) in g.nodes() {
        out.push_str(&format!(
            "node {id} {}\n",
            if color == Color::Black { "black" } else { "white" }
        ));
    }
    for (a, b) in g.edges() {
        out.push_str(&format!("edge {a} {b}\n"));
    }
    out
}

/// Classify an edge by its endpoint colors.
pub fn classify_edge(g: &BwGraph, a: u64, b: u64) -> Result<EdgeKind, EdgeCoverError> {
    let key = (a.min(b), a.max(b));
    if !g.edges.contains(&key) {
        return Err(EdgeCoverError::UnknownEdge { a, b });
    }
    let blacks = [a, b]
        .iter()
        .filter(|&&n| g.color(n) == Some(Color::Black))
        .count();
    Ok(match blacks {
        0 => EdgeKind::Free,
        1 => EdgeKind::Dangling,
        _ => EdgeKind::Regular,
    })
}

/// Exact edge-cover count by enumerating all edge subsets. Guarded by
/// [`BRUTE_FORCE_EDGE_CAP`].
pub fn count_covers_bruteforce(g: &BwGraph) -> Result<BigUint, EdgeCoverError> {
    let edges: Vec<(u64, u64)> = g.edges().collect();
    if edges.len() > BRUTE_FORCE_EDGE_CAP {
        return Err(EdgeCoverError::TooManyEdges {
            edges: edges.len(),
            cap: BRUTE_FORCE_EDGE_CAP,
        });
    }
    // Incidence bitmask per black node; a subset covers iff it intersects
    // every one of them.
    let mut black_masks: Vec<u32> = Vec::new();
    for (id, color) in g.nodes() {
        if color == Color::Black {
            let mut mask = 0u32;
            for (i, &(a, b)) in edges.iter().enumerate() {
                if a == id || b == id {
                    mask |= 1 << i;
                }
            }
            black_masks.push(mask);
        }
    }
    let mut count = 0u64;
    for subset in 0u32..(1u32 << edges.len()) {
        if black_masks.iter().all(|m| subset & m != 0) {
            count += 1;
        }
    }
    Ok(BigUint::from(count))
}

fn rational_pow(base: &Rational, exp: usize) -> Rational {
    num_traits::pow::pow(base.clone(), exp)
}

/// The dynamic programs for class-B and all-black complete bipartite
/// instances, sharing one λ and one cache-miss counter.
struct CoverDp {
    one_plus_lambda: Rational,
    calls: u64,
    all_black_cache: BTreeMap<(usize, usize), Rational>,
}

impl CoverDp {
    fn new(lambda: &Rational) -> Self {
        CoverDp {
            one_plus_lambda: Rational::one() + lambda,
            calls: 0,
            all_black_cache: BTreeMap::new(),
        }
    }

    /// Z of the class-B instance (v1, v2, v3, v4), extra free edges not
    /// included.
    fn z_class_b(&mut self, k1: usize, m: usize, n: usize, k2: usize) -> Rational {
        let op = self.one_plus_lambda.clone();
        if m == 0 && n == 0 {
            // No black nodes, no edges: only the empty cover.
            return Rational::one();
        }
        if m == 0 {
            // V3 blacks depend only on their V4 edges, independently:
            // each picks a nonempty subset of k2 edges.
            return rational_pow(&(rational_pow(&op, k2) - Rational::one()), n);
        }
        if n == 0 {
            return rational_pow(&(rational_pow(&op, k1) - Rational::one()), m);
        }
        if k2 == 0 {
            if k1 == 0 {
                return self.z_all_black(m, n);
            }
            // Mirror the instance so the right phase has dangling edges to
            // work with.
            return self.z_class_b(0, n, m, k1);
        }
        let mut cache: BTreeMap<(usize, usize), Rational> = BTreeMap::new();
        self.right(0, 0, k1, m, n, k2, &mut cache)
    }

    /// Right phase over V3. State: `k1_r` V3 nodes removed with their
    /// edges, `k2_r` whitened (one V4 edge consumed each). Each step
    /// applies the dangling recursion to one unprocessed V3 node and one of
    /// its V4 edges.
    #[allow(clippy::too_many_arguments)]
    fn right(
        &mut self,
        k1_r: usize,
        k2_r: usize,
        k1: usize,
        m: usize,
        n: usize,
        k2: usize,
        cache: &mut BTreeMap<(usize, usize), Rational>,
    ) -> Rational {
        if let Some(v) = cache.get(&(k1_r, k2_r)) {
            return v.clone();
        }
        self.calls += 1;
        let value = if k1_r + k2_r < n {
            let whiten = self.right(k1_r, k2_r + 1, k1, m, n, k2, cache);
            let remove = self.right(k1_r + 1, k2_r, k1, m, n, k2, cache);
            self.one_plus_lambda.clone() * whiten - remove
        } else {
            // All of V3 processed. Whitened V3 nodes keep k2−1 free edges
            // into V4 each; what remains is the complete bipartite graph
            // between the V2 blacks and the a = k1 + k2_r whites that still
            // reach them.
            let free = k2_r * (k2 - 1);
            let a = k1 + k2_r;
            if a == 0 {
                Rational::zero()
            } else {
                rational_pow(&self.one_plus_lambda.clone(), free) * self.left_tree(a, m)
            }
        };
        cache.insert((k1_r, k2_r), value.clone());
        value
    }

    /// Z of the complete bipartite graph between `a` whites and `b` blacks,
    /// by the same dangling recursion over the blacks. A fresh cache per
    /// instantiation: instances with different `a` share state keys but not
    /// values.
    fn left_tree(&mut self, a: usize, b: usize) -> Rational {
        let mut cache: BTreeMap<(usize, usize), Rational> = BTreeMap::new();
        self.left(0, 0, a, b, &mut cache)
    }

    fn left(
        &mut self,
        k1_l: usize,
        k2_l: usize,
        a: usize,
        b: usize,
        cache: &mut BTreeMap<(usize, usize), Rational>,
    ) -> Rational {
        if let Some(v) = cache.get(&(k1_l, k2_l)) {
            return v.clone();
        }
        self.calls += 1;
        let value = if k1_l + k2_l < b {
            let whiten = self.left(k1_l, k2_l + 1, a, b, cache);
            let remove = self.left(k1_l + 1, k2_l, a, b, cache);
            self.one_plus_lambda.clone() * whiten - remove
        } else {
            // Whitened blacks keep a−1 edges each, now free; removed blacks
            // took their edges along; the whites end up isolated.
            rational_pow(&self.one_plus_lambda.clone(), k2_l * (a - 1))
        };
        cache.insert((k1_l, k2_l), value.clone());
        value
    }

    /// Z of the all-black complete bipartite graph K_{a,b}, by splitting on
    /// one regular edge {u,v}: taking it whitens both endpoints and leaves
    /// a class-B instance; refusing it subtracts the ways u or v would end
    /// up uncovered.
    fn z_all_black(&mut self, a: usize, b: usize) -> Rational {
        if a == 0 && b == 0 {
            return Rational::one();
        }
        if a == 0 || b == 0 {
            // Black nodes with no edges at all.
            return Rational::zero();
        }
        if let Some(v) = self.all_black_cache.get(&(a, b)) {
            return v.clone();
        }
        self.calls += 1;
        let whitened = self.z_class_b(1, a - 1, b - 1, 1);
        let value = self.one_plus_lambda.clone() * whitened
            - self.z_all_black(a, b - 1)
            - self.z_all_black(a - 1, b)
            - self.z_all_black(a - 1, b - 1);
        self.all_black_cache.insert((a, b), value.clone());
        value
    }

    fn z_with_extra(&mut self, g: &ClassBGraph) -> Rational {
        let core = self.z_class_b(g.v1, g.v2, g.v3, g.v4);
        rational_pow(&self.one_plus_lambda.clone(), g.extra_free_edges) * core
    }
}

/// Exact cover count of a class-B instance via the cubic dynamic program.
pub fn count_covers_class_b(g: &ClassBGraph) -> Result<BigUint, EdgeCoverError> {
    count_covers_class_b_with_calls(g).map(|(count, _)| count)
}

/// As [`count_covers_class_b`], also reporting the number of cache-miss
/// recursion evaluations. For an instance executed directly by the main
/// two-phase program (both black layers and V4 nonempty), the count is at
/// most `(n+1)(n+2)/2 + (n+1)(m+1)(m+2)/2` with `m = |V2|`, `n = |V3|`.
pub fn count_covers_class_b_with_calls(
    g: &ClassBGraph,
) -> Result<(BigUint, u64), EdgeCoverError> {
    let (z, calls) = partition_function_with_calls(g, &Rational::one())?;
    let count = z
        .to_integer()
        .to_biguint()
        .expect("a cover count is a non-negative integer");
    Ok((count, calls))
}

/// Exact cover count of an all-black complete bipartite graph given as an
/// explicit [`BwGraph`]; the shape is validated.
pub fn count_covers_all_black_bipartite(g: &BwGraph) -> Result<BigUint, EdgeCoverError> {
    match detect_class_b(g) {
        Some(cb) if cb.v1 == 0 && cb.v4 == 0 && cb.extra_free_edges == 0 => {
            count_covers_class_b(&cb)
        }
        _ => Err(EdgeCoverError::NotClassB {
            reason: "not an all-black complete bipartite graph".into(),
        }),
    }
}

/// Weighted partition function Z(g, λ) = Σ_covers λ^|C| of a class-B
/// instance (λ > 0 required; λ = 1 is the plain count).
pub fn partition_function(g: &ClassBGraph, lambda: &Rational) -> Result<Rational, EdgeCoverError> {
    partition_function_with_calls(g, lambda).map(|(z, _)| z)
}

/// As [`partition_function`], also reporting cache-miss recursion calls.
pub fn partition_function_with_calls(
    g: &ClassBGraph,
    lambda: &Rational,
) -> Result<(Rational, u64), EdgeCoverError> {
    if !lambda.is_positive() {
        return Err(EdgeCoverError::NonPositiveLambda);
    }
    let mut dp = CoverDp::new(lambda);
    let z = dp.z_with_extra(g);
    Ok((z, dp.calls))
}

/// How an exact count of an explicit graph was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CountRoute {
    /// An isolated black node makes the count zero outright.
    UncoverableZero,
    /// Reduced (after stripping free edges and isolated whites) to a
    /// class-B instance and counted by the dynamic program.
    ClassB,
    /// Reduced to an all-black complete bipartite instance.
    AllBlackBipartite,
    /// Enumerated edge subsets.
    BruteForce,
}

impl fmt::Display for CountRoute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CountRoute::UncoverableZero => write!(f, "uncoverable"),
            CountRoute::ClassB => write!(f, "class-b"),
            CountRoute::AllBlackBipartite => write!(f, "all-black-bipartite"),
            CountRoute::BruteForce => write!(f, "brute-force"),
        }
    }
}

/// Try to see an explicit graph as a class-B instance: strip white–white
/// edges (each contributes a factor 1+λ, recorded as extra free edges),
/// drop isolated whites, then match the four-layer shape by neighborhood
/// structure. `None` when the graph is not of this family.
pub fn detect_class_b(g: &BwGraph) -> Option<ClassBGraph> {
    // Isolated blacks are handled by the caller (count zero).
    let mut free_edges = 0usize;
    let mut core_edges: Vec<(u64, u64)> = Vec::new();
    for (a, b) in g.edges() {
        if g.color(a) == Some(Color::White) && g.color(b) == Some(Color::White) {
            free_edges += 1;
        } else {
            core_edges.push((a, b));
        }
    }
    let mut nbhd: BTreeMap<u64, BTreeSet<u64>> = BTreeMap::new();
    for &(a, b) in &core_edges {
        nbhd.entry(a).or_default().insert(b);
        nbhd.entry(b).or_default().insert(a);
    }
    let blacks: Vec<u64> = g
        .nodes()
        .filter(|&(_, c)| c == Color::Black)
        .map(|(id, _)| id)
        .collect();
    // Whites not incident to any core edge are isolated after stripping.
    let whites: Vec<u64> = g
        .nodes()
        .filter(|&(id, c)| c == Color::White && nbhd.contains_key(&id))
        .map(|(id, _)| id)
        .collect();

    let empty = BTreeSet::new();
    let nb = |id: u64| nbhd.get(&id).unwrap_or(&empty);

    // Group black nodes by neighborhood.
    let mut groups: Vec<(BTreeSet<u64>, Vec<u64>)> = Vec::new();
    for &b in &blacks {
        let n = nb(b).clone();
        match groups.iter_mut().find(|(nb, _)| *nb == n) {
            Some((_, members)) => members.push(b),
            None => groups.push((n, vec![b])),
        }
    }

    let try_layers = |v2: &[u64], v3: &[u64]| -> Option<ClassBGraph> {
        let v2set: BTreeSet<u64> = v2.iter().copied().collect();
        let v3set: BTreeSet<u64> = v3.iter().copied().collect();
        let mut v1 = 0usize;
        let mut v4 = 0usize;
        for &w in &whites {
            let n = nb(w);
            if !v2set.is_empty() && *n == v2set {
                v1 += 1;
            } else if !v3set.is_empty() && *n == v3set {
                v4 += 1;
            } else {
                return None;
            }
        }
        // Every black's neighborhood must match its layer exactly: V1∪V3
        // for V2 nodes, V2∪V4 for V3 nodes. Whites were assigned by
        // neighborhood above, so it suffices to check degrees and edge
        // membership.
        let mut expected = 0usize;
        for &b in v2 {
            let n = nb(b);
            if n.len() != v1 + v3.len() || !v3set.iter().all(|x| n.contains(x)) {
                return None;
            }
            expected += n.len();
        }
        for &b in v3 {
            let n = nb(b);
            if n.len() != v2.len() + v4 || !v2set.iter().all(|x| n.contains(x)) {
                return None;
            }
            expected += n.len();
        }
        // Each V1–V2 and V3–V4 edge was counted once above, each V2–V3
        // edge twice.
        if expected != v1 * v2.len() + 2 * v2.len() * v3.len() + v3.len() * v4 {
            return None;
        }
        if core_edges.len() != v1 * v2.len() + v2.len() * v3.len() + v3.len() * v4 {
            return None;
        }
        Some(
            ClassBGraph::new(v1, v2.len(), v3.len(), v4)
                .with_extra_free_edges(free_edges),
        )
    };

    match groups.len() {
        0 => {
            // No blacks at all: whatever non-free edges exist would touch a
            // black, so there are none, and whites carry only the stripped
            // free edges.
            if core_edges.is_empty() {
                Some(ClassBGraph::new(0, 0, 0, 0).with_extra_free_edges(free_edges))
            } else {
                None
            }
        }
        1 => {
            let (_, members) = &groups[0];
            try_layers(members, &[])
        }
        2 => {
            let (_, g0) = &groups[0];
            let (_, g1) = &groups[1];
            try_layers(g0, g1).or_else(|| try_layers(g1, g0))
        }
        _ => None,
    }
}

/// Count covers of an explicit graph, picking the best exact route:
/// class-B reduction when the shape allows, otherwise brute force under
/// the edge cap.
pub fn count_covers(g: &BwGraph) -> Result<(BigUint, CountRoute), EdgeCoverError> {
    partition_function_graph(g, &Rational::one()).map(|(z, route)| {
        (
            z.to_integer()
                .to_biguint()
                .expect("a cover count is a non-negative integer"),
            route,
        )
    })
}

/// Weighted partition function of an explicit graph, with the same routing
/// as [`count_covers`].
pub fn partition_function_graph(
    g: &BwGraph,
    lambda: &Rational,
) -> Result<(Rational, CountRoute), EdgeCoverError> {
    if !lambda.is_positive() {
        return Err(EdgeCoverError::NonPositiveLambda);
    }
    let isolated_black = g
        .nodes()
        .any(|(id, c)| c == Color::Black && g.neighbors(id).is_empty());
    if isolated_black {
        return Ok((Rational::zero(), CountRoute::UncoverableZero));
    }
    if let Some(cb) = detect_class_b(g) {
        let route = if cb.v1 == 0 && cb.v4 == 0 && cb.v2 > 0 && cb.v3 > 0 {
            CountRoute::AllBlackBipartite
        } else {
            CountRoute::ClassB
        };
        return Ok((partition_function(&cb, lambda)?, route));
    }
    if g.edge_count() <= BRUTE_FORCE_EDGE_CAP {
        let z = partition_bruteforce(g, lambda)?;
        return Ok((z, CountRoute::BruteForce));
    }
    Err(EdgeCoverError::UnsupportedShape {
        reason: format!(
            "not class-B and {} edges exceed the brute-force cap of {}",
            g.edge_count(),
            BRUTE_FORCE_EDGE_CAP
        ),
    })
}

/// Σ λ^|C| over covers by subset enumeration (guarded like
/// [`count_covers_bruteforce`]).
pub fn partition_bruteforce(g: &BwGraph, lambda: &Rational) -> Result<Rational, EdgeCoverError> {
    let edges: Vec<(u64, u64)> = g.edges().collect();
    if edges.len() > BRUTE_FORCE_EDGE_CAP {
        return Err(EdgeCoverError::TooManyEdges {
            edges: edges.len(),
            cap: BRUTE_FORCE_EDGE_CAP,
        });
    }
    let mut black_masks: Vec<u32> = Vec::new();
    for (id, color) in g.nodes() {
        if color == Color::Black {
            let mut mask = 0u32;
            for (i, &(a, b)) in edges.iter().enumerate() {
                if a == id || b == id {
                    mask |= 1 << i;
                }
            }
            black_masks.push(mask);
        }
    }
    // Collect cover sizes as integer counts per cardinality, then evaluate
    // the polynomial in λ once.
    let mut by_size = vec![0u64; edges.len() + 1];
    for subset in 0u32..(1u32 << edges.len()) {
        if black_masks.iter().all(|m| subset & m != 0) {
            by_size[subset.count_ones() as usize] += 1;
        }
    }
    let mut z = Rational::zero();
    for (size, count) in by_size.iter().enumerate() {
        if *count > 0 {
            z += rational_pow(lambda, size) * Rational::from_integer(BigInt::from(*count));
        }
    }
    Ok(z)
}

/// Lexicographically least minimum edge cover of the complete bipartite
/// demand K_{a,b}: every left index `1..=a` and right index `1..=b` must
/// meet a chosen edge. Size is `max(a,b)`; exactly one side empty is
/// uncoverable.
pub fn min_edge_cover_bipartite_complete(
    a: u32,
    b: u32,
) -> Result<Vec<(u32, u32)>, EdgeCoverError> {
    if a == 0 && b == 0 {
        return Err(EdgeCoverError::EmptyCoverInstance);
    }
    if a == 0 || b == 0 {
        return Err(EdgeCoverError::Uncoverable);
    }
    let mut cover = Vec::with_capacity(a.max(b) as usize);
    if a >= b {
        // Pair the first a−b+1 left nodes with right node 1, then walk the
        // diagonal.
        for i in 1..=(a - b + 1) {
            cover.push((i, 1));
        }
        for t in 1..b {
            cover.push((a - b + 1 + t, 1 + t));
        }
    } else {
        for j in 1..=(b - a + 1) {
            cover.push((1, j));
        }
        for t in 1..a {
            cover.push((1 + t, b - a + 1 + t));
        }
    }
    Ok(cover)
}

/// Uniform `BigUint` in `[0, bound)` by rejection sampling whole 64-bit
/// words, so acceptance probabilities stay exact rationals.
fn uniform_below(rng: &mut ChaCha12Rng, bound: &BigUint) -> BigUint {
    assert!(!bound.is_zero());
    let bits = bound.bits();
    let words = bits.div_ceil(64) as usize;
    let top_mask: u64 =
        if bits.is_multiple_of(64) { u64::MAX } else { (1u64 << (bits % 64)) - 1 };
    loop {
        let mut digits = vec![0u64; words];
        for d in digits.iter_mut() {
            *d = rng.next_u64();
        }
        if let Some(last) = digits.last_mut() {
            *last &= top_mask;
        }
        let candidate = BigUint::from_slice(
            &digits
                .iter()
                .flat_map(|d| [*d as u32, (*d >> 32) as u32])
                .collect::<Vec<_>>(),
        );
        if candidate < *bound {
            return candidate;
        }
    }
}

/// True with probability `num/den`, exactly.
fn bernoulli(rng: &mut ChaCha12Rng, num: &BigUint, den: &BigUint) -> bool {
    uniform_below(rng, den) < *num
}

/// Run Glauber dynamics on the covers of `g` and return the final state.
///
/// The chain starts at the all-edges cover. Each step picks an edge
/// uniformly; an absent edge is added with probability λ/(1+λ), a present
/// edge is removed with probability 1/(1+λ) provided every black endpoint
/// keeps another cover edge. Every visited state is a valid cover, and the
/// trajectory is a deterministic function of the seed.
pub fn glauber_sample(
    g: &BwGraph,
    lambda: &Rational,
    steps: u64,
    seed: u64,
) -> Result<BTreeSet<(u64, u64)>, EdgeCoverError> {
    glauber_with_observer(g, lambda, steps, seed, |_, _| {})
}

/// As [`glauber_sample`], invoking `observer(step, state)` after each step
/// (steps are numbered from 1).
pub fn glauber_with_observer(
    g: &BwGraph,
    lambda: &Rational,
    steps: u64,
    seed: u64,
    mut observer: impl FnMut(u64, &BTreeSet<(u64, u64)>),
) -> Result<BTreeSet<(u64, u64)>, EdgeCoverError> {
    if !lambda.is_positive() {
        return Err(EdgeCoverError::NonPositiveLambda);
    }
    let edges: Vec<(u64, u64)> = g.edges().collect();
    let blacks: BTreeSet<u64> = g
        .nodes()
        .filter(|&(_, c)| c == Color::Black)
        .map(|(id, _)| id)
        .collect();
    for &b in &blacks {
        if g.neighbors(b).is_empty() {
            return Err(EdgeCoverError::UncoverableGraph);
        }
    }
    let mut incident: BTreeMap<u64, Vec<(u64, u64)>> = BTreeMap::new();
    for &(a, b) in &edges {
        incident.entry(a).or_default().push((a, b));
        incident.entry(b).or_default().push((a, b));
    }

    let add_num = lambda.numer().to_biguint().expect("λ > 0");
    let add_den = (lambda.numer() + lambda.denom())
        .to_biguint()
        .expect("λ > 0");
    let remove_num = lambda.denom().to_biguint().expect("λ > 0");

    let mut state: BTreeSet<(u64, u64)> = edges.iter().copied().collect();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    for step in 1..=steps {
        if !edges.is_empty() {
            let e = edges[rng.gen_range(0..edges.len())];
            if state.contains(&e) {
                // Removable only if each black endpoint keeps another edge.
                let removable = [e.0, e.1].iter().all(|&endpoint| {
                    !blacks.contains(&endpoint)
                        || incident[&endpoint]
                            .iter()
                            .any(|other| *other != e && state.contains(other))
                });
                if removable && bernoulli(&mut rng, &remove_num, &add_den) {
                    state.remove(&e);
                }
            } else if bernoulli(&mut rng, &add_num, &add_den) {
                state.insert(e);
            }
        }
        observer(step, &state);
    }
    Ok(state)
}
