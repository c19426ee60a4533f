//! Path diagrams and the graph primitives behind the identification criteria:
//! ancestral sets, moralization, undirected separation, d-separation and
//! edge-deletion transforms.
//!
//! All types are immutable after construction; every operation is a pure
//! function returning a new value.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use crate::error::GraphError;

/// Name of a vertex in a path diagram. Must match `[A-Za-z_][A-Za-z0-9_]*`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VertexId(String);

impl VertexId {
    pub fn new(name: &str) -> Result<Self, GraphError> {
        let mut chars = name.chars();
        let head_ok = chars
            .next()
            .is_some_and(|c| c.is_ascii_alphabetic() || c == '_');
        if head_ok && chars.all(|c| c.is_ascii_alphanumeric() || c == '_') {
            Ok(VertexId(name.to_owned()))
        } else {
            Err(GraphError::InvalidName(name.to_owned()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for VertexId {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        VertexId::new(s)
    }
}

impl serde::Serialize for VertexId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> serde::Deserialize<'de> for VertexId {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        VertexId::new(&s).map_err(serde::de::Error::custom)
    }
}

/// Whether a vertex can be measured.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Observability {
    Observed,
    Latent,
}

/// Directed relations of a vertex. Ancestors and descendants are reflexive;
/// proper variants are obtained by set difference at the call site.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Relation {
    Parents,
    Children,
    Ancestors,
    Descendants,
}

/// A finite DAG with optional bidirected edges, each vertex tagged
/// observed or latent.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PathDiagram {
    vertices: BTreeMap<VertexId, Observability>,
    directed: BTreeSet<(VertexId, VertexId)>,
    bidirected: BTreeSet<(VertexId, VertexId)>,
}

impl PathDiagram {
    /// Builds and validates a diagram. Bidirected edges are stored with
    /// endpoints in sorted order.
    pub fn new<V, D, B>(vertices: V, directed: D, bidirected: B) -> Result<Self, GraphError>
    where
        V: IntoIterator<Item = (VertexId, Observability)>,
        D: IntoIterator<Item = (VertexId, VertexId)>,
        B: IntoIterator<Item = (VertexId, VertexId)>,
    {
        let mut vmap = BTreeMap::new();
        for (v, obs) in vertices {
            if vmap.insert(v.clone(), obs).is_some() {
                return Err(GraphError::DuplicateVertex(v.0));
            }
        }
        let mut dset = BTreeSet::new();
        for (a, b) in directed {
            if a == b {
                return Err(GraphError::SelfLoop(a.0));
            }
            for e in [&a, &b] {
                if !vmap.contains_key(e) {
                    return Err(GraphError::UnknownVertex(e.0.clone()));
                }
            }
            if !dset.insert((a.clone(), b.clone())) {
                return Err(GraphError::DuplicateEdge(a.0, b.0));
            }
        }
        let mut bset = BTreeSet::new();
        for (a, b) in bidirected {
            if a == b {
                return Err(GraphError::SelfLoop(a.0));
            }
            for e in [&a, &b] {
                if !vmap.contains_key(e) {
                    return Err(GraphError::UnknownVertex(e.0.clone()));
                }
            }
            let key = if a <= b { (a, b) } else { (b, a) };
            if !bset.insert(key.clone()) {
                return Err(GraphError::DuplicateEdge(key.0 .0, key.1 .0));
            }
        }
        let g = PathDiagram {
            vertices: vmap,
            directed: dset,
            bidirected: bset,
        };
        if g.topological_order().is_none() {
            return Err(GraphError::Cycle);
        }
        Ok(g)
    }

    pub fn contains(&self, v: &VertexId) -> bool {
        self.vertices.contains_key(v)
    }

    pub fn observability(&self, v: &VertexId) -> Result<Observability, GraphError> {
        self.vertices
            .get(v)
            .copied()
            .ok_or_else(|| GraphError::UnknownVertex(v.0.clone()))
    }

    pub fn is_latent(&self, v: &VertexId) -> bool {
        matches!(self.vertices.get(v), Some(Observability::Latent))
    }

    pub fn is_observed(&self, v: &VertexId) -> bool {
        matches!(self.vertices.get(v), Some(Observability::Observed))
    }

    pub fn vertices(&self) -> impl Iterator<Item = &VertexId> {
        self.vertices.keys()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn observed_vertices(&self) -> BTreeSet<VertexId> {
        self.vertices
            .iter()
            .filter(|(_, o)| **o == Observability::Observed)
            .map(|(v, _)| v.clone())
            .collect()
    }

    pub fn latent_vertices(&self) -> BTreeSet<VertexId> {
        self.vertices
            .iter()
            .filter(|(_, o)| **o == Observability::Latent)
            .map(|(v, _)| v.clone())
            .collect()
    }

    pub fn directed_edges(&self) -> impl Iterator<Item = &(VertexId, VertexId)> {
        self.directed.iter()
    }

    pub fn bidirected_edges(&self) -> impl Iterator<Item = &(VertexId, VertexId)> {
        self.bidirected.iter()
    }

    pub fn has_directed_edge(&self, a: &VertexId, b: &VertexId) -> bool {
        self.directed.contains(&(a.clone(), b.clone()))
    }

    pub fn has_bidirected_edge(&self, a: &VertexId, b: &VertexId) -> bool {
        let key = if a <= b {
            (a.clone(), b.clone())
        } else {
            (b.clone(), a.clone())
        };
        self.bidirected.contains(&key)
    }

    fn check_vertex(&self, v: &VertexId) -> Result<(), GraphError> {
        if self.contains(v) {
            Ok(())
        } else {
            Err(GraphError::UnknownVertex(v.0.clone()))
        }
    }

    fn check_subset(&self, s: &BTreeSet<VertexId>) -> Result<(), GraphError> {
        s.iter().try_for_each(|v| self.check_vertex(v))
    }

    /// Kahn's algorithm over directed edges; `None` on a cycle.
    /// Ties are broken by vertex name so the order is deterministic.
    pub fn topological_order(&self) -> Option<Vec<VertexId>> {
        let mut indeg: BTreeMap<&VertexId, usize> =
            self.vertices.keys().map(|v| (v, 0)).collect();
        for (_, b) in &self.directed {
            *indeg.get_mut(b).unwrap() += 1;
        }
        let mut ready: BTreeSet<&VertexId> = indeg
            .iter()
            .filter(|(_, d)| **d == 0)
            .map(|(v, _)| *v)
            .collect();
        let mut order = Vec::with_capacity(self.vertices.len());
        while let Some(v) = ready.iter().next().copied() {
            ready.remove(v);
            order.push(v.clone());
            for (a, b) in &self.directed {
                if a == v {
                    let d = indeg.get_mut(b).unwrap();
                    *d -= 1;
                    if *d == 0 {
                        ready.insert(b);
                    }
                }
            }
        }
        (order.len() == self.vertices.len()).then_some(order)
    }

    /// Standard directed relations. Ancestors and descendants include the
    /// vertex itself.
    pub fn relatives(&self, v: &VertexId, rel: Relation) -> Result<BTreeSet<VertexId>, GraphError> {
        self.check_vertex(v)?;
        Ok(match rel {
            Relation::Parents => self
                .directed
                .iter()
                .filter(|(_, b)| b == v)
                .map(|(a, _)| a.clone())
                .collect(),
            Relation::Children => self
                .directed
                .iter()
                .filter(|(a, _)| a == v)
                .map(|(_, b)| b.clone())
                .collect(),
            Relation::Ancestors => self.reach(v, |e| (e.1.clone(), e.0.clone())),
            Relation::Descendants => self.reach(v, |e| (e.0.clone(), e.1.clone())),
        })
    }

    fn reach<F>(&self, v: &VertexId, dir: F) -> BTreeSet<VertexId>
    where
        F: Fn(&(VertexId, VertexId)) -> (VertexId, VertexId),
    {
        let mut seen = BTreeSet::from([v.clone()]);
        let mut queue = VecDeque::from([v.clone()]);
        while let Some(cur) = queue.pop_front() {
            for e in &self.directed {
                let (from, to) = dir(e);
                if from == cur && seen.insert(to.clone()) {
                    queue.push_back(to);
                }
            }
        }
        seen
    }

    pub fn parents(&self, v: &VertexId) -> Result<BTreeSet<VertexId>, GraphError> {
        self.relatives(v, Relation::Parents)
    }

    pub fn children(&self, v: &VertexId) -> Result<BTreeSet<VertexId>, GraphError> {
        self.relatives(v, Relation::Children)
    }

    pub fn ancestors(&self, v: &VertexId) -> Result<BTreeSet<VertexId>, GraphError> {
        self.relatives(v, Relation::Ancestors)
    }

    pub fn descendants(&self, v: &VertexId) -> Result<BTreeSet<VertexId>, GraphError> {
        self.relatives(v, Relation::Descendants)
    }

    /// Reflexive ancestral closure of a vertex set.
    pub fn ancestors_of_set(
        &self,
        s: &BTreeSet<VertexId>,
    ) -> Result<BTreeSet<VertexId>, GraphError> {
        self.check_subset(s)?;
        let mut out = BTreeSet::new();
        for v in s {
            out.extend(self.ancestors(v)?);
        }
        Ok(out)
    }

    /// `G` with every directed edge whose tail is in `a` removed.
    /// Bidirected edges are untouched.
    pub fn delete_outgoing(&self, a: &BTreeSet<VertexId>) -> Result<PathDiagram, GraphError> {
        self.check_subset(a)?;
        let mut g = self.clone();
        g.directed.retain(|(from, _)| !a.contains(from));
        Ok(g)
    }

    /// `G` without the single directed edge `i -> j`.
    pub fn delete_edge(&self, i: &VertexId, j: &VertexId) -> Result<PathDiagram, GraphError> {
        let mut g = self.clone();
        if !g.directed.remove(&(i.clone(), j.clone())) {
            return Err(GraphError::MissingEdge(i.0.clone(), j.0.clone()));
        }
        Ok(g)
    }

    /// Rewrites every bidirected edge `A <-> B` into a fresh latent common
    /// cause `L -> A`, `L -> B`. Fresh names are `__L1, __L2, ...` assigned
    /// in edge-sorted order; names already taken are skipped.
    pub fn canonicalize_latents(&self) -> PathDiagram {
        if self.bidirected.is_empty() {
            return self.clone();
        }
        let mut g = self.clone();
        let mut counter = 0usize;
        for (a, b) in self.bidirected.iter() {
            let fresh = loop {
                counter += 1;
                let name = VertexId(format!("__L{counter}"));
                if !g.vertices.contains_key(&name) {
                    break name;
                }
            };
            g.vertices.insert(fresh.clone(), Observability::Latent);
            g.directed.insert((fresh.clone(), a.clone()));
            g.directed.insert((fresh, b.clone()));
        }
        g.bidirected.clear();
        g
    }

    /// Ancestral moral graph of `s` in the canonicalized diagram: induced
    /// subgraph on the ancestral closure of `s`, co-parents married,
    /// directions dropped.
    pub fn moralize(&self, s: &BTreeSet<VertexId>) -> Result<UndirectedGraph, GraphError> {
        let canon = self.canonicalize_latents();
        canon.check_subset(s)?;
        let anc = canon.ancestors_of_set(s)?;
        let mut edges = BTreeSet::new();
        for v in &anc {
            let parents: Vec<&VertexId> = canon
                .directed
                .iter()
                .filter(|(_, b)| b == v)
                .map(|(a, _)| a)
                .collect();
            for p in &parents {
                edges.insert(undirected_key(p, v));
            }
            for (i, p) in parents.iter().enumerate() {
                for q in &parents[i + 1..] {
                    edges.insert(undirected_key(p, q));
                }
            }
        }
        Ok(UndirectedGraph {
            vertices: anc,
            edges,
        })
    }

    /// True iff `c` blocks every path between `a` and `b` under
    /// d-separation semantics. Computed as undirected separation in the
    /// ancestral moral graph of `a ∪ b ∪ c`.
    pub fn d_separates(
        &self,
        a: &BTreeSet<VertexId>,
        b: &BTreeSet<VertexId>,
        c: &BTreeSet<VertexId>,
    ) -> Result<bool, GraphError> {
        check_disjoint(&[a, b, c])?;
        self.check_subset(a)?;
        self.check_subset(b)?;
        self.check_subset(c)?;
        if a.is_empty() || b.is_empty() {
            return Ok(true);
        }
        let query: BTreeSet<VertexId> = a.union(b).chain(c.iter()).cloned().collect();
        let moral = self.moralize(&query)?;
        moral.u_separates(a, b, c)
    }
}

fn undirected_key(a: &VertexId, b: &VertexId) -> (VertexId, VertexId) {
    if a <= b {
        (a.clone(), b.clone())
    } else {
        (b.clone(), a.clone())
    }
}

fn check_disjoint(sets: &[&BTreeSet<VertexId>]) -> Result<(), GraphError> {
    for (i, s) in sets.iter().enumerate() {
        for t in &sets[i + 1..] {
            if let Some(v) = s.intersection(t).next() {
                return Err(GraphError::OverlappingSets(v.0.clone()));
            }
        }
    }
    Ok(())
}

/// Undirected graph used for moral-graph separation queries.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct UndirectedGraph {
    vertices: BTreeSet<VertexId>,
    edges: BTreeSet<(VertexId, VertexId)>,
}

impl UndirectedGraph {
    pub fn new<V, E>(vertices: V, edges: E) -> Result<Self, GraphError>
    where
        V: IntoIterator<Item = VertexId>,
        E: IntoIterator<Item = (VertexId, VertexId)>,
    {
        let vset: BTreeSet<VertexId> = vertices.into_iter().collect();
        let mut eset = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(GraphError::SelfLoop(a.0));
            }
            for e in [&a, &b] {
                if !vset.contains(e) {
                    return Err(GraphError::UnknownVertex(e.0.clone()));
                }
            }
            eset.insert(undirected_key(&a, &b));
        }
        Ok(UndirectedGraph {
            vertices: vset,
            edges: eset,
        })
    }

    pub fn contains(&self, v: &VertexId) -> bool {
        self.vertices.contains(v)
    }

    pub fn vertices(&self) -> impl Iterator<Item = &VertexId> {
        self.vertices.iter()
    }

    pub fn has_edge(&self, a: &VertexId, b: &VertexId) -> bool {
        self.edges.contains(&undirected_key(a, b))
    }

    pub fn edges(&self) -> impl Iterator<Item = &(VertexId, VertexId)> {
        self.edges.iter()
    }

    pub fn neighbors(&self, v: &VertexId) -> BTreeSet<VertexId> {
        self.edges
            .iter()
            .filter_map(|(a, b)| {
                if a == v {
                    Some(b.clone())
                } else if b == v {
                    Some(a.clone())
                } else {
                    None
                }
            })
            .collect()
    }

    /// True iff every path from `a` to `b` intersects `c`. BFS from `a`
    /// with `c` removed. Empty `a` or `b` separates vacuously.
    pub fn u_separates(
        &self,
        a: &BTreeSet<VertexId>,
        b: &BTreeSet<VertexId>,
        c: &BTreeSet<VertexId>,
    ) -> Result<bool, GraphError> {
        check_disjoint(&[a, b, c])?;
        for s in [a, b, c] {
            for v in s {
                if !self.vertices.contains(v) {
                    return Err(GraphError::UnknownVertex(v.0.clone()));
                }
            }
        }
        if a.is_empty() || b.is_empty() {
            return Ok(true);
        }
        let mut seen: BTreeSet<VertexId> = a.clone();
        let mut queue: VecDeque<VertexId> = a.iter().cloned().collect();
        while let Some(cur) = queue.pop_front() {
            for next in self.neighbors(&cur) {
                if c.contains(&next) || !seen.insert(next.clone()) {
                    continue;
                }
                if b.contains(&next) {
                    return Ok(false);
                }
                queue.push_back(next);
            }
        }
        Ok(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(s: &str) -> VertexId {
        s.parse().unwrap()
    }

    fn vs(names: &[&str]) -> BTreeSet<VertexId> {
        names.iter().map(|s| v(s)).collect()
    }

    fn chain_abc() -> PathDiagram {
        PathDiagram::new(
            ["A", "B", "C"]
                .map(|s| (v(s), Observability::Observed)),
            [(v("A"), v("B")), (v("B"), v("C"))],
            [],
        )
        .unwrap()
    }

    fn collider_abc() -> PathDiagram {
        PathDiagram::new(
            ["A", "B", "C"]
                .map(|s| (v(s), Observability::Observed)),
            [(v("A"), v("C")), (v("B"), v("C"))],
            [],
        )
        .unwrap()
    }

    #[test]
    fn rejects_bad_names() {
        assert!(VertexId::new("X1").is_ok());
        assert!(VertexId::new("_x").is_ok());
        assert!(VertexId::new("1X").is_err());
        assert!(VertexId::new("").is_err());
        assert!(VertexId::new("a-b").is_err());
    }

    #[test]
    fn rejects_cycles_and_self_loops() {
        let err = PathDiagram::new(
            [(v("A"), Observability::Observed), (v("B"), Observability::Observed)],
            [(v("A"), v("B")), (v("B"), v("A"))],
            [],
        )
        .unwrap_err();
        assert_eq!(err, GraphError::Cycle);

        let err = PathDiagram::new(
            [(v("A"), Observability::Observed)],
            [(v("A"), v("A"))],
            [],
        )
        .unwrap_err();
        assert_eq!(err, GraphError::SelfLoop("A".into()));
    }

    #[test]
    fn relatives_on_chain() {
        let g = chain_abc();
        assert_eq!(g.parents(&v("B")).unwrap(), vs(&["A"]));
        assert_eq!(g.children(&v("B")).unwrap(), vs(&["C"]));
        assert_eq!(g.ancestors(&v("C")).unwrap(), vs(&["A", "B", "C"]));
        assert_eq!(g.descendants(&v("A")).unwrap(), vs(&["A", "B", "C"]));
        // reflexive convention: a root's ancestors are just itself
        assert_eq!(g.ancestors(&v("A")).unwrap(), vs(&["A"]));
        assert!(g.parents(&v("Z")).is_err());
    }

    #[test]
    fn delete_outgoing_identity_and_idempotence() {
        let g = chain_abc();
        assert_eq!(g.delete_outgoing(&BTreeSet::new()).unwrap(), g);
        let cut = g.delete_outgoing(&vs(&["A"])).unwrap();
        assert!(!cut.has_directed_edge(&v("A"), &v("B")));
        assert!(cut.has_directed_edge(&v("B"), &v("C")));
        assert_eq!(cut.delete_outgoing(&vs(&["A"])).unwrap(), cut);
    }

    #[test]
    fn delete_edge_removes_exactly_one() {
        let g = chain_abc();
        let cut = g.delete_edge(&v("A"), &v("B")).unwrap();
        assert!(!cut.has_directed_edge(&v("A"), &v("B")));
        assert!(cut.delete_edge(&v("A"), &v("B")).is_err());
    }

    #[test]
    fn canonicalize_single_bidirected_edge() {
        let g = PathDiagram::new(
            [(v("X"), Observability::Observed), (v("Y"), Observability::Observed)],
            [],
            [(v("X"), v("Y"))],
        )
        .unwrap();
        let canon = g.canonicalize_latents();
        assert_eq!(canon.vertex_count(), 3);
        assert!(canon.bidirected_edges().next().is_none());
        let l = v("__L1");
        assert!(canon.is_latent(&l));
        assert!(canon.has_directed_edge(&l, &v("X")));
        assert!(canon.has_directed_edge(&l, &v("Y")));
    }

    #[test]
    fn canonicalize_without_bidirected_is_identity() {
        let g = chain_abc();
        assert_eq!(g.canonicalize_latents(), g);
    }

    #[test]
    fn moralize_chain_has_no_extra_edges() {
        let g = chain_abc();
        let m = g.moralize(&vs(&["A", "B", "C"])).unwrap();
        assert!(m.has_edge(&v("A"), &v("B")));
        assert!(m.has_edge(&v("B"), &v("C")));
        assert!(!m.has_edge(&v("A"), &v("C")));
    }

    #[test]
    fn moralize_collider_marries_parents() {
        let g = collider_abc();
        let m = g.moralize(&vs(&["A", "B", "C"])).unwrap();
        assert!(m.has_edge(&v("A"), &v("B")));
        assert!(m.has_edge(&v("A"), &v("C")));
        assert!(m.has_edge(&v("B"), &v("C")));
    }

    #[test]
    fn u_separation_basics() {
        let triangle = UndirectedGraph::new(
            [v("A"), v("B"), v("C")],
            [(v("A"), v("B")), (v("B"), v("C")), (v("A"), v("C"))],
        )
        .unwrap();
        assert!(!triangle
            .u_separates(&vs(&["A"]), &vs(&["B"]), &vs(&["C"]))
            .unwrap());

        let path = UndirectedGraph::new(
            [v("A"), v("B"), v("C")],
            [(v("A"), v("C")), (v("C"), v("B"))],
        )
        .unwrap();
        assert!(path
            .u_separates(&vs(&["A"]), &vs(&["B"]), &vs(&["C"]))
            .unwrap());
        // overlapping sets are rejected
        assert!(path
            .u_separates(&vs(&["A"]), &vs(&["A"]), &vs(&["C"]))
            .is_err());
    }

    #[test]
    fn d_separation_chain_and_collider() {
        let chain = chain_abc();
        assert!(chain
            .d_separates(&vs(&["A"]), &vs(&["C"]), &vs(&["B"]))
            .unwrap());
        assert!(!chain
            .d_separates(&vs(&["A"]), &vs(&["C"]), &BTreeSet::new())
            .unwrap());

        let coll = collider_abc();
        assert!(coll
            .d_separates(&vs(&["A"]), &vs(&["B"]), &BTreeSet::new())
            .unwrap());
        assert!(!coll
            .d_separates(&vs(&["A"]), &vs(&["B"]), &vs(&["C"]))
            .unwrap());
    }

    #[test]
    fn d_separation_vacuous_on_empty_sets() {
        let g = chain_abc();
        assert!(g
            .d_separates(&BTreeSet::new(), &vs(&["C"]), &BTreeSet::new())
            .unwrap());
    }
}
