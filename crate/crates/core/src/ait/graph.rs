use std::collections::{BTreeMap, VecDeque};

use crate::anatomy::{AnatomySchema, LandmarkId, LANDMARK_COUNT};
use crate::error::{CephError, Result};

pub type Rgb = [f64; 3];

/// Undirected graph over nodes `0..n`.
#[derive(Debug, Clone)]
pub struct TopologyGraph {
    adjacency: Vec<Vec<usize>>,
}

impl TopologyGraph {
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(CephError::invariant("graph", format!("edge ({a}, {b}) out of range")));
            }
            if a != b {
                adjacency[a].push(b);
                adjacency[b].push(a);
            }
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self { adjacency })
    }

    pub fn from_schema(schema: &AnatomySchema) -> Self {
        Self { adjacency: schema.adjacency() }
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    /// Hop counts from `source`; `None` for unreachable nodes.
    pub fn bfs(&self, source: usize) -> Vec<Option<u32>> {
        let mut dist = vec![None; self.len()];
        dist[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(v) = queue.pop_front() {
            let next = dist[v].map(|d| d + 1);
            for &u in &self.adjacency[v] {
                if dist[u].is_none() {
                    dist[u] = next;
                    queue.push_back(u);
                }
            }
        }
        dist
    }

    /// `table[v][k]` is the hop count from node `v` to `centers[k]`.
    pub fn center_distances(&self, centers: &[usize]) -> Result<Vec<Vec<u32>>> {
        let mut table = vec![vec![0; centers.len()]; self.len()];
        for (k, &c) in centers.iter().enumerate() {
            for (v, d) in self.bfs(c).into_iter().enumerate() {
                table[v][k] = d.ok_or_else(|| {
                    CephError::invariant("graph", format!("graph disconnected: node {v} cannot reach center {c}"))
                })?;
            }
        }
        Ok(table)
    }
}

/// Colours and normalised weights for every node of a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedColors {
    pub colors: Vec<Rgb>,
    /// `weights[v][k]`: normalised reciprocal-distance weight of centre `k`.
    pub weights: Vec<Vec<f64>>,
}

/// Distance-based colouring.
///
/// Non-centre nodes get `w_k = 1 / d(v, c_k)`, normalised to sum to one, and
/// the colour `Σ ŵ_k · C(c_k)`. Centres keep their own colour exactly.
pub fn mix_colors(graph: &TopologyGraph, centers: &[(usize, Rgb)]) -> Result<MixedColors> {
    if centers.is_empty() {
        return Err(CephError::invariant("graph", "no critical centers"));
    }
    let ids: Vec<usize> = centers.iter().map(|(c, _)| *c).collect();
    let dist = graph.center_distances(&ids)?;
    let mut colors = Vec::with_capacity(graph.len());
    let mut weights = Vec::with_capacity(graph.len());
    for row in &dist {
        if let Some(k) = row.iter().position(|&d| d == 0) {
            let mut w = vec![0.0; centers.len()];
            w[k] = 1.0;
            colors.push(centers[k].1);
            weights.push(w);
            continue;
        }
        let raw: Vec<f64> = row.iter().map(|&d| 1.0 / f64::from(d)).collect();
        let total: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|r| r / total).collect();
        let mut color = [0.0; 3];
        for (wk, (_, ck)) in w.iter().zip(centers) {
            for ch in 0..3 {
                color[ch] += wk * ck[ch];
            }
        }
        colors.push(color);
        weights.push(w);
    }
    Ok(MixedColors { colors, weights })
}

/// Hop counts `d(v, L)` from every landmark to every critical centre.
pub fn graph_distances(schema: &AnatomySchema) -> Result<BTreeMap<(LandmarkId, LandmarkId), u32>> {
    let graph = TopologyGraph::from_schema(schema);
    let centers: Vec<LandmarkId> = schema.critical_centers().iter().map(|c| c.index).collect();
    let slots: Vec<usize> = centers.iter().map(|c| c.slot()).collect();
    let table = graph.center_distances(&slots)?;
    let mut out = BTreeMap::new();
    for (v, row) in table.iter().enumerate() {
        for (k, d) in row.iter().enumerate() {
            out.insert((LandmarkId(v as u8 + 1), centers[k]), *d);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeColoring {
    pub colors: BTreeMap<LandmarkId, Rgb>,
    pub weights: BTreeMap<LandmarkId, BTreeMap<LandmarkId, f64>>,
}

impl NodeColoring {
    pub fn color(&self, id: LandmarkId) -> Rgb {
        self.colors[&id]
    }
}

pub fn color_nodes(schema: &AnatomySchema) -> Result<NodeColoring> {
    let graph = TopologyGraph::from_schema(schema);
    let centers: Vec<(usize, Rgb)> = schema
        .critical_centers()
        .iter()
        .map(|c| (c.index.slot(), c.rgb.map(f64::from)))
        .collect();
    let mixed = mix_colors(&graph, &centers)?;
    let mut colors = BTreeMap::new();
    let mut weights = BTreeMap::new();
    for v in 0..LANDMARK_COUNT as usize {
        let id = LandmarkId(v as u8 + 1);
        colors.insert(id, mixed.colors[v]);
        let w = schema
            .critical_centers()
            .iter()
            .zip(&mixed.weights[v])
            .map(|(c, w)| (c.index, *w))
            .collect();
        weights.insert(id, w);
    }
    Ok(NodeColoring { colors, weights })
}

#[cfg(test)]
mod tests {
    use super::*;

    const RED: Rgb = [255.0, 0.0, 0.0];
    const BLUE: Rgb = [0.0, 0.0, 255.0];

    #[test]
    fn path_graph_distances() {
        let g = TopologyGraph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(g.bfs(0), vec![Some(0), Some(1), Some(2)]);
        assert_eq!(g.center_distances(&[0]).unwrap()[2], vec![2]);
    }

    #[test]
    fn disconnected_graph_errors() {
        let g = TopologyGraph::from_edges(3, &[(0, 1)]).unwrap();
        assert!(g.center_distances(&[0]).is_err());
    }

    #[test]
    fn symmetric_midpoint() {
        // A - v - B
        let g = TopologyGraph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let m = mix_colors(&g, &[(0, RED), (2, BLUE)]).unwrap();
        assert_eq!(m.colors[1], [127.5, 0.0, 127.5]);
        assert_eq!(m.weights[1], vec![0.5, 0.5]);
    }

    #[test]
    fn one_to_three_hops() {
        // A - v - x - y - B : d(v,A)=1, d(v,B)=3 -> w = (1, 1/3) -> ŵ = (0.75, 0.25)
        let g = TopologyGraph::from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4)]).unwrap();
        let m = mix_colors(&g, &[(0, RED), (4, BLUE)]).unwrap();
        assert!((m.weights[1][0] - 0.75).abs() < 1e-15 && (m.weights[1][1] - 0.25).abs() < 1e-15);
        let c = m.colors[1];
        assert!((c[0] - 191.25).abs() < 1e-12 && c[1] == 0.0 && (c[2] - 63.75).abs() < 1e-12);
    }

    #[test]
    fn default_schema_centers_keep_their_colors() {
        let schema = AnatomySchema::default_schema();
        let coloring = color_nodes(&schema).unwrap();
        for c in schema.critical_centers() {
            assert_eq!(coloring.color(c.index), c.rgb.map(f64::from));
        }
        assert_eq!(coloring.color(LandmarkId(2)), [255.0, 0.0, 0.0]);
    }

    #[test]
    fn default_schema_distances_finite() {
        let schema = AnatomySchema::default_schema();
        let d = graph_distances(&schema).unwrap();
        assert_eq!(d.len(), 38 * 5);
        for c in schema.critical_centers() {
            assert_eq!(d[&(c.index, c.index)], 0);
        }
    }
}
