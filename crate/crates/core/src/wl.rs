//! 1-dimensional Weisfeiler-Lehman colour refinement and the bundled
//! expressivity suite.

use std::collections::BTreeMap;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::Graph;
use crate::model::Model;
use crate::Result;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColoringState {
    pub colors: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
}

fn num_colors(c: &[usize]) -> usize {
    c.iter().copied().max().map_or(0, |m| m + 1)
}

/// One refinement round; ids are assigned in sorted signature order, so
/// they are canonical across any graphs refined together.
fn refine_once(neighbors: &[Vec<usize>], colors: &[usize]) -> Vec<usize> {
    let sigs: Vec<(usize, Vec<usize>)> = neighbors
        .iter()
        .enumerate()
        .map(|(i, nb)| {
            let mut m: Vec<usize> = nb.iter().map(|&j| colors[j]).collect();
            m.sort_unstable();
            (colors[i], m)
        })
        .collect();
    let dict: BTreeMap<&(usize, Vec<usize>), usize> = {
        let mut keys: Vec<_> = sigs.iter().collect();
        keys.sort();
        keys.dedup();
        keys.into_iter().enumerate().map(|(i, k)| (k, i)).collect()
    };
    sigs.iter().map(|s| dict[s]).collect()
}

fn canonical(initial: &[usize]) -> Vec<usize> {
    let mut vals: Vec<usize> = initial.to_vec();
    vals.sort_unstable();
    vals.dedup();
    initial.iter().map(|c| vals.binary_search(c).expect("present")).collect()
}

/// Refines until the number of colour classes stops growing, or `max_iters`.
pub fn wl_refine(neighbors: &[Vec<usize>], initial: &[usize], max_iters: usize) -> ColoringState {
    let mut colors = canonical(initial);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iters.max(1) {
        let next = refine_once(neighbors, &colors);
        iterations += 1;
        let stable = num_colors(&next) == num_colors(&colors);
        colors = next;
        if stable {
            converged = true;
            break;
        }
    }
    ColoringState {
        colors,
        iterations,
        converged,
    }
}

/// Initial colours from feature rows (equal rows share a colour).
fn feature_colors(graphs: &[&Graph]) -> Vec<usize> {
    let mut dict: BTreeMap<Vec<u64>, usize> = BTreeMap::new();
    let mut out = Vec::new();
    for g in graphs {
        for row in g.features.rows() {
            let key: Vec<u64> = row.iter().map(|v| v.to_bits()).collect();
            let next = dict.len();
            out.push(*dict.entry(key).or_insert(next));
        }
    }
    out
}

/// True iff the stable colour histograms of the two graphs differ, refining
/// both on their disjoint union so colour ids are comparable.
pub fn wl_distinguishes(g1: &Graph, g2: &Graph) -> bool {
    let n1 = g1.num_nodes();
    let mut neighbors = g1.neighbors.clone();
    neighbors.extend(g2.neighbors.iter().map(|nb| nb.iter().map(|&j| j + n1).collect()));
    let init = feature_colors(&[g1, g2]);
    let state = wl_refine(&neighbors, &init, neighbors.len() + 1);
    let hist = |c: &[usize]| {
        let mut h = BTreeMap::new();
        for &x in c {
            *h.entry(x).or_insert(0usize) += 1;
        }
        h
    };
    hist(&state.colors[..n1]) != hist(&state.colors[n1..])
}

/// Euclidean distance between the readout vectors of two graphs.
pub fn embedding_separation(model: &Model, g1: &Graph, g2: &Graph) -> Result<f64> {
    let a = model.embed(g1)?;
    let b = model.embed(g2)?;
    Ok((&a - &b).mapv(|x| x * x).sum().sqrt())
}

fn constant_graph(n: usize, edges: &[(usize, usize)], dim: usize) -> Graph {
    let mut f = Array2::zeros((n, dim));
    f.column_mut(0).fill(1.0);
    Graph::from_edges(n, edges, f, 0).expect("valid suite graph")
}

pub fn path(n: usize, dim: usize) -> Graph {
    let e: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
    constant_graph(n, &e, dim)
}

pub fn star(leaves: usize, dim: usize) -> Graph {
    let e: Vec<_> = (1..=leaves).map(|i| (0, i)).collect();
    constant_graph(leaves + 1, &e, dim)
}

pub fn cycle(n: usize, dim: usize) -> Graph {
    let e: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
    constant_graph(n, &e, dim)
}

pub fn complete(n: usize, dim: usize) -> Graph {
    let e: Vec<_> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    constant_graph(n, &e, dim)
}

pub fn disjoint_union(a: &Graph, b: &Graph) -> Graph {
    let n = a.num_nodes();
    let mut neighbors = a.neighbors.clone();
    neighbors.extend(b.neighbors.iter().map(|nb| nb.iter().map(|&j| j + n).collect()));
    let features = ndarray::concatenate(ndarray::Axis(0), &[a.features.view(), b.features.view()]).expect("same width");
    Graph {
        neighbors,
        features,
        label: a.label,
        node_labels: None,
    }
}

fn erdos_renyi(n: usize, p: f64, rng: &mut ChaCha8Rng, dim: usize) -> Graph {
    let mut e = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                e.push((i, j));
            }
        }
    }
    constant_graph(n, &e, dim)
}

fn degree_sequence(g: &Graph) -> Vec<usize> {
    let mut d: Vec<usize> = (0..g.num_nodes()).map(|i| g.degree(i)).collect();
    d.sort_unstable();
    d
}

/// A named pair of graphs in the expressivity suite.
#[derive(Debug, Clone)]
pub struct GraphPair {
    pub name: String,
    pub first: Graph,
    pub second: Graph,
}

/// P4/S3, C6/2·C3, K4/C4 and two seeded G(8, 0.4) pairs with differing
/// degree sequences. Node features are constant, `dim` wide.
pub fn pair_suite(dim: usize, seed: u64) -> Vec<GraphPair> {
    let mut pairs = vec![
        GraphPair {
            name: "P4_vs_S3".into(),
            first: path(4, dim),
            second: star(3, dim),
        },
        GraphPair {
            name: "C6_vs_2C3".into(),
            first: cycle(6, dim),
            second: disjoint_union(&cycle(3, dim), &cycle(3, dim)),
        },
        GraphPair {
            name: "K4_vs_C4".into(),
            first: complete(4, dim),
            second: cycle(4, dim),
        },
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut k = 0;
    while k < 2 {
        let a = erdos_renyi(8, 0.4, &mut rng, dim);
        let b = erdos_renyi(8, 0.4, &mut rng, dim);
        if degree_sequence(&a) != degree_sequence(&b) {
            k += 1;
            pairs.push(GraphPair {
                name: format!("ER8_pair{k}"),
                first: a,
                second: b,
            });
        }
    }
    pairs
}
