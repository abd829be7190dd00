use std::rc::Rc;

use ndarray::{concatenate, Array2, Axis};

use crate::data::Graph;
use crate::{Error, Result};

/// Several graphs laid out as one disjoint union.
///
/// Directed edges `(node, neighbor)` are grouped by `node`. Neighbor lists may
/// repeat a node, which makes the neighborhood a multiset.
#[derive(Debug, Clone)]
pub struct GraphBatch {
    pub features: Array2<f64>,
    pub num_graphs: usize,
    pub labels: Rc<Vec<usize>>,
    pub(crate) graph_of: Rc<Vec<usize>>,
    pub(crate) degree: Vec<usize>,
    pub(crate) edge_node: Rc<Vec<usize>>,
    pub(crate) edge_nbr: Rc<Vec<usize>>,
    /// Every ordered pair of edges leaving the same node, diagonal included.
    pub(crate) pair_node: Rc<Vec<usize>>,
    pub(crate) pair_e1: Rc<Vec<usize>>,
    pub(crate) pair_e2: Rc<Vec<usize>>,
    pub(crate) pair_nbr1: Rc<Vec<usize>>,
    pub(crate) pair_nbr2: Rc<Vec<usize>>,
}

impl GraphBatch {
    pub fn new(graphs: &[&Graph]) -> Result<Self> {
        if graphs.is_empty() {
            return Err(Error::Config("empty batch".into()));
        }
        let parts: Vec<_> = graphs.iter().map(|g| g.features.view()).collect();
        let features = concatenate(Axis(0), &parts).map_err(|_| Error::Shape {
            op: "batch features",
            lhs: graphs[0].features.dim(),
            rhs: graphs.iter().map(|g| g.features.dim()).find(|d| d.1 != graphs[0].features.ncols()).unwrap_or_default(),
        })?;
        let mut neighbors = Vec::with_capacity(features.nrows());
        let mut graph_of = Vec::with_capacity(features.nrows());
        let mut offset = 0;
        for (gi, g) in graphs.iter().enumerate() {
            for nb in &g.neighbors {
                neighbors.push(nb.iter().map(|&j| j + offset).collect());
                graph_of.push(gi);
            }
            offset += g.num_nodes();
        }
        let labels = graphs.iter().map(|g| g.label).collect();
        Self::from_parts(features, &neighbors, graph_of, labels, graphs.len())
    }

    /// Builds a batch from explicit neighbor lists over all nodes.
    pub fn from_parts(
        features: Array2<f64>,
        neighbors: &[Vec<usize>],
        graph_of: Vec<usize>,
        labels: Vec<usize>,
        num_graphs: usize,
    ) -> Result<Self> {
        let n = features.nrows();
        if neighbors.len() != n || graph_of.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: neighbors.len().min(graph_of.len()),
            });
        }
        if labels.len() != num_graphs {
            return Err(Error::DimensionMismatch {
                expected: num_graphs,
                got: labels.len(),
            });
        }
        let mut sizes = vec![0usize; num_graphs];
        for &g in &graph_of {
            if g >= num_graphs {
                return Err(Error::Config(format!("node assigned to graph {g} of {num_graphs}")));
            }
            sizes[g] += 1;
        }
        if let Some(g) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::Config(format!("graph {g} in batch has no nodes")));
        }

        let (mut edge_node, mut edge_nbr) = (Vec::new(), Vec::new());
        let (mut pair_node, mut pair_e1, mut pair_e2) = (Vec::new(), Vec::new(), Vec::new());
        let (mut pair_nbr1, mut pair_nbr2) = (Vec::new(), Vec::new());
        let mut degree = Vec::with_capacity(n);
        for (i, nb) in neighbors.iter().enumerate() {
            let start = edge_node.len();
            for &j in nb {
                if j >= n {
                    return Err(Error::Config(format!("neighbor {j} of node {i} outside batch")));
                }
                edge_node.push(i);
                edge_nbr.push(j);
            }
            for (a, &ja) in nb.iter().enumerate() {
                for (b, &jb) in nb.iter().enumerate() {
                    pair_node.push(i);
                    pair_e1.push(start + a);
                    pair_e2.push(start + b);
                    pair_nbr1.push(ja);
                    pair_nbr2.push(jb);
                }
            }
            degree.push(nb.len());
        }
        Ok(Self {
            features,
            num_graphs,
            labels: Rc::new(labels),
            graph_of: Rc::new(graph_of),
            degree,
            edge_node: Rc::new(edge_node),
            edge_nbr: Rc::new(edge_nbr),
            pair_node: Rc::new(pair_node),
            pair_e1: Rc::new(pair_e1),
            pair_e2: Rc::new(pair_e2),
            pair_nbr1: Rc::new(pair_nbr1),
            pair_nbr2: Rc::new(pair_nbr2),
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.features.nrows()
    }

    pub fn num_edges(&self) -> usize {
        self.edge_node.len()
    }

    pub(crate) fn isolated_mask(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.num_nodes(), 1), |(i, _)| f64::from(self.degree[i] == 0))
    }

    /// `1/(1+|N_i|)` for nodes with neighbors, 0 for isolated ones.
    pub(crate) fn cardinality_scale(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.num_nodes(), 1), |(i, _)| match self.degree[i] {
            0 => 0.0,
            d => 1.0 / (1.0 + d as f64),
        })
    }

    pub(crate) fn uniform_weights(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.num_edges(), 1), |(e, _)| 1.0 / self.degree[self.edge_node[e]] as f64)
    }
}
