//! Undirected graphs over labelled vertices, plus the set operations used to
//! compare estimated structures.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An undirected edge `i -- j` with `i < j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: Option<f64>,
}

impl Edge {
    pub fn key(&self) -> (usize, usize) {
        (self.i, self.j)
    }
}

#[derive(Deserialize)]
struct RawGraph {
    vertices: Vec<String>,
    edges: Vec<Edge>,
}

/// Vertex labels plus a canonical (sorted, duplicate-free) edge list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGraph")]
pub struct Graph {
    vertices: Vec<String>,
    edges: Vec<Edge>,
}

impl TryFrom<RawGraph> for Graph {
    type Error = Error;

    fn try_from(raw: RawGraph) -> Result<Self> {
        let mut g = Graph::new(raw.vertices);
        for e in raw.edges {
            if g.contains(e.i, e.j) {
                return Err(Error::InvalidSpec(format!(
                    "duplicate edge ({}, {})",
                    e.i, e.j
                )));
            }
            g.add_edge(e.i, e.j, e.weight)?;
        }
        Ok(g)
    }
}

impl Graph {
    pub fn new(vertices: Vec<String>) -> Self {
        Self {
            vertices,
            edges: Vec::new(),
        }
    }

    /// Vertices labelled `X1..Xd`.
    pub fn unlabeled(d: usize) -> Self {
        Self::new((1..=d).map(|k| format!("X{k}")).collect())
    }

    pub fn from_edges(
        vertices: Vec<String>,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut g = Self::new(vertices);
        for (i, j) in edges {
            g.add_edge(i, j, None)?;
        }
        Ok(g)
    }

    /// Inserts `i -- j` (either orientation), replacing any existing weight.
    pub fn add_edge(&mut self, i: usize, j: usize, weight: Option<f64>) -> Result<()> {
        let d = self.vertices.len();
        if i == j {
            return Err(Error::InvalidSpec(format!("self-loop at vertex {i}")));
        }
        if i >= d || j >= d {
            return Err(Error::InvalidSpec(format!(
                "edge ({i}, {j}) outside {d} vertices"
            )));
        }
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        match self.edges.binary_search_by_key(&(i, j), Edge::key) {
            Ok(pos) => self.edges[pos].weight = weight,
            Err(pos) => self.edges.insert(pos, Edge { i, j, weight }),
        }
        Ok(())
    }

    pub fn vertices(&self) -> &[String] {
        &self.vertices
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        let key = if i < j { (i, j) } else { (j, i) };
        self.edges.binary_search_by_key(&key, Edge::key).is_ok()
    }

    pub fn edge_set(&self) -> BTreeSet<(usize, usize)> {
        self.edges.iter().map(Edge::key).collect()
    }

    pub fn without_weights(&self) -> Self {
        Self {
            vertices: self.vertices.clone(),
            edges: self
                .edges
                .iter()
                .map(|e| Edge { weight: None, ..*e })
                .collect(),
        }
    }

    /// Cycle check by depth-first search, independent of any union-find
    /// bookkeeping used to build the graph.
    pub fn is_acyclic(&self) -> bool {
        let d = self.n_vertices();
        let mut adj = vec![Vec::new(); d];
        for e in &self.edges {
            adj[e.i].push(e.j);
            adj[e.j].push(e.i);
        }
        let mut seen = vec![false; d];
        for root in 0..d {
            if seen[root] {
                continue;
            }
            seen[root] = true;
            let mut stack = vec![(root, usize::MAX)];
            while let Some((v, parent)) = stack.pop() {
                for &w in &adj[v] {
                    if w == parent {
                        continue;
                    }
                    if seen[w] {
                        return false;
                    }
                    seen[w] = true;
                    stack.push((w, v));
                }
            }
        }
        true
    }

    pub fn is_forest(&self) -> bool {
        self.n_edges() < self.n_vertices().max(1) && self.is_acyclic()
    }

    /// Sum of edge weights in canonical edge order; missing weights count 0.
    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight.unwrap_or(0.0)).sum()
    }
}

/// Symmetric difference and intersection of two edge sets; weights dropped.
pub fn graph_diff(a: &Graph, b: &Graph) -> Result<(Graph, Graph)> {
    if a.vertices != b.vertices {
        return Err(Error::VertexMismatch);
    }
    let (ea, eb) = (a.edge_set(), b.edge_set());
    let sym = Graph::from_edges(a.vertices.clone(), ea.symmetric_difference(&eb).copied())?;
    let common = Graph::from_edges(a.vertices.clone(), ea.intersection(&eb).copied())?;
    Ok((sym, common))
}

/// Size of the symmetric difference of two edge sets.
pub fn symmetric_difference_size(a: &Graph, b: &Graph) -> Result<usize> {
    if a.vertices != b.vertices {
        return Err(Error::VertexMismatch);
    }
    Ok(a.edge_set().symmetric_difference(&b.edge_set()).count())
}

/// Index of the path graph closest to `target` in symmetric difference;
/// ties go to the smallest index.
pub fn closest_on_path(target: &Graph, path: &[Graph]) -> Result<usize> {
    if path.is_empty() {
        return Err(Error::EmptyPath);
    }
    let mut best = (usize::MAX, 0);
    for (k, g) in path.iter().enumerate() {
        let size = symmetric_difference_size(target, g)?;
        if size < best.0 {
            best = (size, k);
        }
    }
    Ok(best.1)
}
