//! Graph datasets: TU text format, a JSON-lines fallback, feature
//! initialisation and stratified folds.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One undirected graph. `neighbors[i]` is sorted, free of `i` and duplicates.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    pub neighbors: Vec<Vec<usize>>,
    pub features: Array2<f64>,
    pub label: usize,
    /// Raw discrete node labels as read from disk, if any.
    pub node_labels: Option<Vec<i64>>,
}

impl Graph {
    /// Builds a graph from an undirected edge list; edges are symmetrised and
    /// self-loops dropped.
    pub fn from_edges(num_nodes: usize, edges: &[(usize, usize)], features: Array2<f64>, label: usize) -> Result<Self> {
        if features.nrows() != num_nodes {
            return Err(Error::DimensionMismatch {
                expected: num_nodes,
                got: features.nrows(),
            });
        }
        let mut sets = vec![BTreeSet::new(); num_nodes];
        for &(a, b) in edges {
            if a >= num_nodes || b >= num_nodes {
                return Err(Error::Config(format!("edge ({a}, {b}) outside 0..{num_nodes}")));
            }
            if a != b {
                sets[a].insert(b);
                sets[b].insert(a);
            }
        }
        Ok(Self {
            neighbors: sets.into_iter().map(|s| s.into_iter().collect()).collect(),
            features,
            label,
            node_labels: None,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.neighbors.len()
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    /// Relabels nodes so that old node `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.num_nodes();
        let mut neighbors = vec![Vec::new(); n];
        let mut features = Array2::zeros(self.features.dim());
        for i in 0..n {
            let mut nb: Vec<usize> = self.neighbors[i].iter().map(|&j| perm[j]).collect();
            nb.sort_unstable();
            neighbors[perm[i]] = nb;
            features.row_mut(perm[i]).assign(&self.features.row(i));
        }
        let node_labels = self.node_labels.as_ref().map(|l| {
            let mut out = vec![0; n];
            for i in 0..n {
                out[perm[i]] = l[i];
            }
            out
        });
        Self {
            neighbors,
            features,
            label: self.label,
            node_labels,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    /// One-hot of the discrete node label; falls back to degrees when absent.
    NodeLabels,
    DegreeOnehot,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphDataset {
    pub name: String,
    pub graphs: Vec<Graph>,
    pub num_classes: usize,
    pub feature_dim: usize,
    /// Raw label value of each class index, ascending.
    pub label_values: Vec<i64>,
}

impl GraphDataset {
    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.graphs.iter().map(|g| g.label).collect()
    }

    pub fn avg_nodes(&self) -> f64 {
        self.graphs.iter().map(Graph::num_nodes).sum::<usize>() as f64 / self.len().max(1) as f64
    }

    /// Fraction of the most common class.
    pub fn majority_fraction(&self) -> f64 {
        let mut counts = vec![0usize; self.num_classes];
        for g in &self.graphs {
            counts[g.label] += 1;
        }
        counts.iter().copied().max().unwrap_or(0) as f64 / self.len().max(1) as f64
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            name: self.name.clone(),
            graphs: idx.iter().map(|&i| self.graphs[i].clone()).collect(),
            num_classes: self.num_classes,
            feature_dim: self.feature_dim,
            label_values: self.label_values.clone(),
        }
    }
}

fn parse_fields(path: &Path, lineno: usize, line: &str) -> Result<Vec<i64>> {
    line.split(|ch: char| ch == ',' || ch.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<i64>().or_else(|_| {
                // a few TU files store integral labels as floats
                t.parse::<f64>()
                    .ok()
                    .filter(|v| v.fract() == 0.0)
                    .map(|v| v as i64)
                    .ok_or_else(|| Error::Parse {
                        path: path.to_path_buf(),
                        line: lineno,
                        msg: format!("expected an integer, found `{t}`"),
                    })
            })
        })
        .collect()
}

/// Reads non-empty lines, each holding exactly `width` integers.
fn read_rows(path: &Path, width: usize) -> Result<Vec<(usize, Vec<i64>)>> {
    let file = fs::File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let vals = parse_fields(path, i + 1, &line)?;
        if vals.len() != width {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: format!("expected {width} value(s), found {}", vals.len()),
            });
        }
        rows.push((i + 1, vals));
    }
    Ok(rows)
}

fn tu_path(dir: &Path, name: &str, suffix: &str) -> PathBuf {
    dir.join(format!("{name}_{suffix}.txt"))
}

fn index_labels(raw: &[i64]) -> (Vec<usize>, Vec<i64>) {
    let values: Vec<i64> = raw.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let pos: BTreeMap<i64, usize> = values.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    (raw.iter().map(|v| pos[v]).collect(), values)
}

/// Loads `<dir>/<name>_{A,graph_indicator,graph_labels[,node_labels]}.txt`.
///
/// Node ids are 1-indexed. Directed edges without a reverse are symmetrised
/// with a warning; self-loops and duplicates are dropped. Features are
/// initialised with [`FeatureMode::NodeLabels`].
pub fn load_tu_dataset(dir: &Path, name: &str) -> Result<GraphDataset> {
    let ind_path = tu_path(dir, name, "graph_indicator");
    let indicator = read_rows(&ind_path, 1)?;
    let n_nodes = indicator.len();
    let labels_path = tu_path(dir, name, "graph_labels");
    let graph_labels = read_rows(&labels_path, 1)?;
    let n_graphs = graph_labels.len();

    let mut node_graph = Vec::with_capacity(n_nodes);
    let mut local = Vec::with_capacity(n_nodes);
    let mut sizes = vec![0usize; n_graphs];
    for (line, v) in &indicator {
        let g = v[0];
        if g < 1 || g as usize > n_graphs {
            return Err(Error::Parse {
                path: ind_path.clone(),
                line: *line,
                msg: format!("graph id {g} outside 1..={n_graphs} (graph label count)"),
            });
        }
        let g = g as usize - 1;
        node_graph.push(g);
        local.push(sizes[g]);
        sizes[g] += 1;
    }
    if let Some(g) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::Parse {
            path: ind_path,
            line: 0,
            msg: format!("graph {} has no nodes", g + 1),
        });
    }

    let a_path = tu_path(dir, name, "A");
    let mut directed: Vec<BTreeSet<(usize, usize)>> = vec![BTreeSet::new(); n_graphs];
    for (line, v) in read_rows(&a_path, 2)? {
        let mut ends = [0usize; 2];
        for (k, &id) in v.iter().enumerate() {
            if id < 1 || id as usize > n_nodes {
                return Err(Error::Parse {
                    path: a_path.clone(),
                    line,
                    msg: format!("edge references unknown node {id} (have {n_nodes})"),
                });
            }
            ends[k] = id as usize - 1;
        }
        let (a, b) = (ends[0], ends[1]);
        if node_graph[a] != node_graph[b] {
            return Err(Error::Parse {
                path: a_path.clone(),
                line,
                msg: format!("edge ({}, {}) joins two different graphs", a + 1, b + 1),
            });
        }
        if a != b {
            directed[node_graph[a]].insert((local[a], local[b]));
        }
    }

    let nl_path = tu_path(dir, name, "node_labels");
    let node_labels = if nl_path.exists() {
        let rows = read_rows(&nl_path, 1)?;
        if rows.len() != n_nodes {
            return Err(Error::Parse {
                path: nl_path,
                line: rows.last().map_or(0, |r| r.0),
                msg: format!("{} node labels for {n_nodes} nodes", rows.len()),
            });
        }
        let mut per_graph: Vec<Vec<i64>> = sizes.iter().map(|&s| vec![0; s]).collect();
        for (k, (_, v)) in rows.iter().enumerate() {
            per_graph[node_graph[k]][local[k]] = v[0];
        }
        Some(per_graph)
    } else {
        None
    };

    let raw_labels: Vec<i64> = graph_labels.iter().map(|(_, v)| v[0]).collect();
    let (labels, label_values) = index_labels(&raw_labels);

    let mut asymmetric = 0usize;
    let mut graphs = Vec::with_capacity(n_graphs);
    for g in 0..n_graphs {
        let edges: Vec<(usize, usize)> = directed[g].iter().copied().collect();
        asymmetric += edges.iter().filter(|&&(a, b)| !directed[g].contains(&(b, a))).count();
        let mut graph = Graph::from_edges(sizes[g], &edges, Array2::zeros((sizes[g], 0)), labels[g])?;
        graph.node_labels = node_labels.as_ref().map(|nl| nl[g].clone());
        graphs.push(graph);
    }
    if asymmetric > 0 {
        log::warn!("{name}: symmetrised {asymmetric} directed edge(s) lacking a reverse");
    }

    let mut ds = GraphDataset {
        name: name.to_string(),
        graphs,
        num_classes: label_values.len(),
        feature_dim: 0,
        label_values,
    };
    init_features(&mut ds, FeatureMode::NodeLabels);
    Ok(ds)
}

/// Writes a dataset in TU format with both edge directions listed.
pub fn write_tu_dataset(ds: &GraphDataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let name = &ds.name;
    let mut a = fs::File::create(tu_path(dir, name, "A"))?;
    let mut ind = fs::File::create(tu_path(dir, name, "graph_indicator"))?;
    let mut gl = fs::File::create(tu_path(dir, name, "graph_labels"))?;
    let mut nl = match ds.graphs.first().and_then(|g| g.node_labels.as_ref()) {
        Some(_) => Some(fs::File::create(tu_path(dir, name, "node_labels"))?),
        None => None,
    };
    let mut offset = 1;
    for (gi, g) in ds.graphs.iter().enumerate() {
        for (i, nb) in g.neighbors.iter().enumerate() {
            writeln!(ind, "{}", gi + 1)?;
            for &j in nb {
                writeln!(a, "{}, {}", offset + i, offset + j)?;
            }
        }
        if let Some(f) = nl.as_mut() {
            let labels = g.node_labels.as_ref().ok_or_else(|| {
                Error::Config(format!("graph {gi} lacks node labels while others have them"))
            })?;
            for l in labels {
                writeln!(f, "{l}")?;
            }
        }
        writeln!(gl, "{}", ds.label_values[g.label])?;
        offset += g.num_nodes();
    }
    Ok(())
}

#[derive(Deserialize)]
struct JsonGraph {
    edges: Vec<(usize, usize)>,
    features: Vec<Vec<f64>>,
    label: i64,
}

/// One graph per line: `{"edges": [[0,1],…], "features": [[…],…], "label": 1}`.
/// Node ids are 0-indexed; features are used as given.
pub fn load_jsonl_dataset(path: &Path) -> Result<GraphDataset> {
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    let mut parsed = Vec::new();
    let mut dim = None;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg,
        };
        let g: JsonGraph = serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
        let n = g.features.len();
        let d = g.features.first().map_or(0, Vec::len);
        if n == 0 || g.features.iter().any(|r| r.len() != d) || dim.is_some_and(|k| k != d) {
            return Err(parse_err("feature rows must be non-empty and of one common width".into()));
        }
        dim = Some(d);
        parsed.push((i + 1, g));
    }
    let (labels, label_values) = index_labels(&parsed.iter().map(|(_, g)| g.label).collect::<Vec<_>>());
    let mut graphs = Vec::with_capacity(parsed.len());
    for ((line, g), label) in parsed.into_iter().zip(labels) {
        let n = g.features.len();
        let d = dim.unwrap_or(0);
        let flat: Vec<f64> = g.features.into_iter().flatten().collect();
        let features = Array2::from_shape_vec((n, d), flat).expect("validated widths");
        let graph = Graph::from_edges(n, &g.edges, features, label).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg: e.to_string(),
        })?;
        graphs.push(graph);
    }
    let name = path
        .file_stem()
        .map_or_else(|| "dataset".to_string(), |s| s.to_string_lossy().into_owned());
    Ok(GraphDataset {
        name,
        graphs,
        num_classes: label_values.len(),
        feature_dim: dim.unwrap_or(0),
        label_values,
    })
}

/// Recomputes every graph's feature matrix. Returns the feature width.
pub fn init_features(ds: &mut GraphDataset, mode: FeatureMode) -> usize {
    let have_labels = ds.graphs.iter().all(|g| g.node_labels.is_some());
    if mode == FeatureMode::NodeLabels && have_labels {
        let values: BTreeSet<i64> = ds
            .graphs
            .iter()
            .flat_map(|g| g.node_labels.iter().flatten().copied())
            .collect();
        let pos: BTreeMap<i64, usize> = values.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let dim = values.len();
        for g in &mut ds.graphs {
            let labels = g.node_labels.as_ref().expect("checked above");
            let mut f = Array2::zeros((labels.len(), dim));
            for (i, l) in labels.iter().enumerate() {
                f[[i, pos[l]]] = 1.0;
            }
            g.features = f;
        }
        ds.feature_dim = dim;
    } else {
        if mode == FeatureMode::NodeLabels {
            log::warn!("{}: no node labels, using degree one-hot features", ds.name);
        }
        let max_deg = ds
            .graphs
            .iter()
            .flat_map(|g| g.neighbors.iter().map(Vec::len))
            .max()
            .unwrap_or(0);
        let dim = max_deg + 1;
        for g in &mut ds.graphs {
            let mut f = Array2::zeros((g.num_nodes(), dim));
            for i in 0..g.num_nodes() {
                f[[i, g.degree(i)]] = 1.0;
            }
            g.features = f;
        }
        ds.feature_dim = dim;
    }
    ds.feature_dim
}

/// Stratified k-fold split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub seed: u64,
    pub k: usize,
    pub test: Vec<Vec<usize>>,
}

impl FoldPlan {
    /// Training indices of fold `f`, ascending.
    pub fn train(&self, f: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .test
            .iter()
            .enumerate()
            .filter(|&(g, _)| g != f)
            .flat_map(|(_, t)| t.iter().copied())
            .collect();
        out.sort_unstable();
        out
    }
}

/// Shuffles each class with a seeded generator, then deals its members
/// round-robin over the folds, continuing the rotation across classes.
pub fn make_folds(labels: &[usize], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 || labels.len() < k {
        return Err(Error::Config(format!(
            "{k}-fold split needs k >= 2 and at least k graphs, have {}",
            labels.len()
        )));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test = vec![Vec::new(); k];
    let mut next = 0;
    for (class, mut members) in by_class {
        if members.len() < k {
            log::warn!("class {class} has {} graph(s), fewer than {k} folds", members.len());
        }
        members.shuffle(&mut rng);
        for m in members {
            test[next % k].push(m);
            next += 1;
        }
    }
    for t in &mut test {
        t.sort_unstable();
    }
    Ok(FoldPlan { seed, k, test })
}
