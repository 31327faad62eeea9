//! Generators for the four SDP test families: MaxCut relaxations,
//! Lovász theta problems, binary-quadratic (BIQ) relaxations and
//! clustering relaxations, plus plain-text graph ingestion.
//!
//! The source formulations for theta, BIQ and clustering are maximization
//! problems; every generator here emits the minimization standard form by
//! negating the cost, so one solver code path serves all families. The CLI
//! reports both signs of the objective.

use nalgebra::DVector;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{ModelError, SdpProblem, SparseSym};
use crate::sym::SymMat;

/// Errors from graph parsing and generator preconditions.
#[derive(Debug, Error)]
pub enum GeneratorError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: self-loop at vertex {v}")]
    SelfLoop { line: usize, v: usize },
    #[error("line {line}: duplicate edge ({i}, {j})")]
    DuplicateEdge { line: usize, i: usize, j: usize },
    #[error("line {line}: vertex index out of range: ({i}, {j}) with n = {n}")]
    IndexOutOfRange {
        line: usize,
        i: usize,
        j: usize,
        n: usize,
    },
    #[error("cluster count {k} out of range 1..={n}")]
    KOutOfRange { k: usize, n: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// An undirected weighted graph with 1-based vertex labels, `i < j` per edge.
#[derive(Clone, Debug)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
}

impl Graph {
    /// Validates vertex ranges, forbids self-loops and duplicate edges.
    /// Edges may be given in either orientation; they are stored with
    /// `i < j`.
    pub fn new(n: usize, edges: Vec<(usize, usize, f64)>) -> Result<Self, GeneratorError> {
        let mut seen = std::collections::HashSet::new();
        let mut normalized = Vec::with_capacity(edges.len());
        for (idx, &(a, b, w)) in edges.iter().enumerate() {
            let line = idx + 2; // matches the file layout: edges start at line 2
            if a == b {
                return Err(GeneratorError::SelfLoop { line, v: a });
            }
            if a < 1 || b < 1 || a > n || b > n {
                return Err(GeneratorError::IndexOutOfRange {
                    line,
                    i: a,
                    j: b,
                    n,
                });
            }
            let (i, j) = if a < b { (a, b) } else { (b, a) };
            if !seen.insert((i, j)) {
                return Err(GeneratorError::DuplicateEdge { line, i, j });
            }
            if !w.is_finite() {
                return Err(GeneratorError::Parse {
                    line,
                    msg: "non-finite edge weight".into(),
                });
            }
            normalized.push((i, j, w));
        }
        Ok(Graph {
            n,
            edges: normalized,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    /// Erdős–Rényi G(n, p) with unit weights and a fixed seed.
    pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> Graph {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for i in 1..=n {
            for j in (i + 1)..=n {
                if rng.random::<f64>() < p {
                    edges.push((i, j, 1.0));
                }
            }
        }
        Graph { n, edges }
    }
}

/// Parses the plain edge-list format used by the GSET collection:
/// first line `n m_edges`, then `m_edges` lines `i j w`.
pub fn read_graph(text: &str) -> Result<Graph, GeneratorError> {
    let mut lines = text.lines().enumerate();
    let (first_idx, first) = lines
        .next()
        .ok_or_else(|| GeneratorError::Parse {
            line: 1,
            msg: "empty graph file".into(),
        })?;
    let header: Vec<&str> = first.split_whitespace().collect();
    if header.len() != 2 {
        return Err(GeneratorError::Parse {
            line: first_idx + 1,
            msg: format!("expected header `n m_edges`, got `{first}`"),
        });
    }
    let n: usize = header[0].parse().map_err(|_| GeneratorError::Parse {
        line: 1,
        msg: format!("bad vertex count `{}`", header[0]),
    })?;
    let m_edges: usize = header[1].parse().map_err(|_| GeneratorError::Parse {
        line: 1,
        msg: format!("bad edge count `{}`", header[1]),
    })?;

    let mut edges = Vec::with_capacity(m_edges);
    let mut seen = std::collections::HashSet::new();
    let mut count = 0;
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        if count == m_edges {
            return Err(GeneratorError::Parse {
                line,
                msg: format!("trailing content after {m_edges} edges"),
            });
        }
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(GeneratorError::Parse {
                line,
                msg: format!("expected `i j w`, got `{raw}`"),
            });
        }
        let i: usize = toks[0].parse().map_err(|_| GeneratorError::Parse {
            line,
            msg: format!("bad vertex `{}`", toks[0]),
        })?;
        let j: usize = toks[1].parse().map_err(|_| GeneratorError::Parse {
            line,
            msg: format!("bad vertex `{}`", toks[1]),
        })?;
        let w: f64 = toks[2].parse().map_err(|_| GeneratorError::Parse {
            line,
            msg: format!("bad weight `{}`", toks[2]),
        })?;
        if i == j {
            return Err(GeneratorError::SelfLoop { line, v: i });
        }
        if i < 1 || j < 1 || i > n || j > n {
            return Err(GeneratorError::IndexOutOfRange { line, i, j, n });
        }
        let key = (i.min(j), i.max(j));
        if !seen.insert(key) {
            return Err(GeneratorError::DuplicateEdge {
                line,
                i: key.0,
                j: key.1,
            });
        }
        edges.push((key.0, key.1, w));
        count += 1;
    }
    if count != m_edges {
        return Err(GeneratorError::Parse {
            line: text.lines().count(),
            msg: format!("expected {m_edges} edges, found {count}"),
        });
    }
    Ok(Graph { n, edges })
}

/// MaxCut relaxation: `min <C, X>` with `diag(X) = e`,
/// `C = -(diag(W e) - W) / 4` for the weighted adjacency `W`.
pub fn maxcut_sdp(g: &Graph) -> SdpProblem {
    let n = g.n;
    let mut degree = vec![0.0_f64; n];
    let mut cost = Vec::with_capacity(g.edges.len() + n);
    for &(i, j, w) in &g.edges {
        degree[i - 1] += w;
        degree[j - 1] += w;
        cost.push((i - 1, j - 1, w / 4.0));
    }
    for (i, &d) in degree.iter().enumerate() {
        if d != 0.0 {
            cost.push((i, i, -d / 4.0));
        }
    }
    let constraints = (0..n)
        .map(|i| SparseSym::new(n, vec![(i, i, 1.0)]).expect("unit diagonal"))
        .collect();
    let c = SparseSym::new(n, cost).expect("validated edges");
    SdpProblem::new(n, constraints, DVector::from_element(n, 1.0), c, "maxcut")
        .expect("construction is consistent")
}

/// Lovász theta problem in minimization form: `min <-ee^T, X>` with
/// `X_ij = 0` on edges and `tr X = 1`. The theta number is the negated
/// optimal value.
pub fn theta_sdp(g: &Graph) -> SdpProblem {
    let n = g.n;
    let mut constraints: Vec<SparseSym> = g
        .edges
        .iter()
        .map(|&(i, j, _)| SparseSym::new(n, vec![(i - 1, j - 1, 1.0)]).expect("i < j"))
        .collect();
    let trace = SparseSym::new(n, (0..n).map(|i| (i, i, 1.0)).collect()).expect("diagonal");
    constraints.push(trace);
    let mut b = DVector::zeros(constraints.len());
    b[constraints.len() - 1] = 1.0;
    let mut cost = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            cost.push((i, j, -1.0));
        }
    }
    let c = SparseSym::new(n, cost).expect("dense upper triangle");
    SdpProblem::new(n, constraints, b, c, "theta").expect("construction is consistent")
}

/// SDP relaxation of `min (1/2) x^T Q x + c^T x, x in {0,1}^n` over the
/// lifted `(n+1) x (n+1)` variable with linking constraints
/// `X_ii = x_i` and corner entry fixed to one.
pub fn biq_sdp(q: &SymMat, c: &DVector<f64>) -> Result<SdpProblem, GeneratorError> {
    let n = q.n();
    if c.len() != n {
        return Err(GeneratorError::Model(ModelError::DimensionMismatch {
            expected: n,
            got: c.len(),
        }));
    }
    let dim = n + 1;
    let mut constraints = Vec::with_capacity(dim);
    for i in 0..n {
        constraints.push(
            SparseSym::new(dim, vec![(i, i, 1.0), (i, n, -0.5)]).expect("in range"),
        );
    }
    constraints.push(SparseSym::new(dim, vec![(n, n, 1.0)]).expect("corner"));
    let mut b = DVector::zeros(dim);
    b[n] = 1.0;

    let mut cost = Vec::new();
    for i in 0..n {
        for j in i..n {
            cost.push((i, j, q.get(i, j) / 2.0));
        }
        cost.push((i, n, c[i] / 2.0));
    }
    let cmat = SparseSym::new(dim, cost)?;
    Ok(SdpProblem::new(dim, constraints, b, cmat, "biq")?)
}

/// Clustering relaxation: `min <-W, X>` with unit row sums and trace `k`.
pub fn clustering_sdp(aff: &SymMat, k: usize) -> Result<SdpProblem, GeneratorError> {
    let n = aff.n();
    if k < 1 || k > n {
        return Err(GeneratorError::KOutOfRange { k, n });
    }
    let mut constraints = Vec::with_capacity(n + 1);
    for i in 0..n {
        // (e_i e^T + e e_i^T) / 2: one on the diagonal, halves across row i.
        let mut trips = vec![(i, i, 1.0)];
        for j in 0..n {
            if j != i {
                trips.push((i.min(j), i.max(j), 0.5));
            }
        }
        constraints.push(SparseSym::new(n, trips).expect("in range"));
    }
    constraints.push(SparseSym::new(n, (0..n).map(|i| (i, i, 1.0)).collect()).expect("trace"));
    let mut b = DVector::from_element(n + 1, 1.0);
    b[n] = k as f64;

    let mut cost = Vec::new();
    for i in 0..n {
        for j in i..n {
            cost.push((i, j, -aff.get(i, j)));
        }
    }
    let c = SparseSym::new(n, cost)?;
    Ok(SdpProblem::new(n, constraints, b, c, "clustering")?)
}
