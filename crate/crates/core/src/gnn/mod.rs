//! Forward inference for the interface-predicting graph network.
//!
//! The network maps the matrix graph of `A` (edge values `a_pq`, a binary node
//! feature marking subdomain boundary nodes) to one scalar per directed edge.
//! Edges outside every interface pattern are forced to zero.

mod fixture;
mod weights;

pub use fixture::{parse_fixture, GnnFixture};
pub use weights::{GnnConfig, GnnWeights, Tensor, WEIGHTS_MAGIC};

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::discretize::LinearSystem;
use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;
use crate::partition::{extract_interface, InterfacePattern, Partition};
use crate::schwarz::InterfaceMatrix;

const EDGE_CHUNK: usize = 4096;

/// Network input: the matrix graph with self-loops, node features and the output mask.
#[derive(Debug, Clone)]
pub struct GraphInput {
    /// Sparsity and values of `A`, every diagonal entry stored.
    pub graph: SparseMatrix,
    /// One per node: 1 on some subdomain boundary, 0 elsewhere.
    pub node_features: Vec<f64>,
    /// One per stored entry of `graph`, in CSR order.
    pub mask: Vec<bool>,
    pub patterns: Vec<InterfacePattern>,
}

impl GraphInput {
    pub fn n_nodes(&self) -> usize {
        self.graph.n_rows()
    }

    pub fn n_edges(&self) -> usize {
        self.graph.nnz()
    }

    /// CSR position of `(p, q)`.
    pub fn edge_index(&self, p: usize, q: usize) -> Option<usize> {
        let start = self.graph.row_offsets()[p];
        let (cols, _) = self.graph.row(p);
        cols.binary_search(&q).ok().map(|k| start + k)
    }

    /// Splits per-edge network output into one interface matrix per subdomain.
    pub fn interfaces(&self, edge_values: &[f64]) -> Result<Vec<InterfaceMatrix>> {
        if edge_values.len() != self.n_edges() {
            return Err(Error::DimensionMismatch {
                context: "edge outputs",
                expected: self.n_edges(),
                found: edge_values.len(),
            });
        }
        self.patterns
            .iter()
            .map(|pat| {
                let values = pat
                    .edges
                    .iter()
                    .map(|&(p, q)| {
                        self.edge_index(p, q).map(|e| edge_values[e]).ok_or_else(|| {
                            Error::InvalidPartition(format!("interface edge ({p}, {q}) is not in the matrix graph"))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                InterfaceMatrix::new(pat.clone(), values)
            })
            .collect()
    }
}

/// Builds the network input from an assembled system and an overlapped partition.
pub fn build_graph_input(system: &LinearSystem, partition: &Partition) -> Result<GraphInput> {
    let a = &system.matrix;
    let patterns = extract_interface(partition, a, &[])?;
    graph_input_from_patterns(a, patterns)
}

pub fn graph_input_from_patterns(a: &SparseMatrix, patterns: Vec<InterfacePattern>) -> Result<GraphInput> {
    let n = a.n_rows();
    let graph = with_diagonal(a)?;
    let mut node_features = vec![0.0; n];
    for pat in &patterns {
        for &v in &pat.boundary_nodes {
            node_features[v] = 1.0;
        }
    }
    let mut input = GraphInput {
        mask: vec![false; graph.nnz()],
        graph,
        node_features,
        patterns,
    };
    for pat in &input.patterns {
        for &(p, q) in &pat.edges {
            let e = input.edge_index(p, q).ok_or_else(|| {
                Error::InvalidPartition(format!("interface edge ({p}, {q}) is not in the matrix graph"))
            })?;
            input.mask[e] = true;
        }
    }
    Ok(input)
}

fn with_diagonal(a: &SparseMatrix) -> Result<SparseMatrix> {
    let n = a.n_rows();
    if !a.is_square() {
        return Err(Error::NotSquare {
            rows: n,
            cols: a.n_cols(),
        });
    }
    let missing: Vec<usize> = (0..n).filter(|&r| a.row(r).0.binary_search(&r).is_err()).collect();
    if missing.is_empty() {
        return Ok(a.clone());
    }
    let mut t: Vec<(usize, usize, f64)> = a.triplets().collect();
    t.extend(missing.into_iter().map(|r| (r, r, 0.0)));
    // from_triplets drops nothing, so explicit zeros survive as self-loops
    SparseMatrix::from_triplets(n, n, &t)
}

/// Per-edge outputs plus the multiply-add count of the pass.
#[derive(Debug, Clone)]
pub struct ForwardOutput {
    pub edge_values: Vec<f64>,
    pub flops: u64,
}

struct Ctx<'a> {
    w: &'a GnnWeights,
    flops: u64,
}

impl<'a> Ctx<'a> {
    fn mat(&self, name: &str) -> Result<ArrayView2<'a, f64>> {
        let w: &'a GnnWeights = self.w;
        let t = w.get(name)?;
        ArrayView2::from_shape((t.shape[0], t.shape[1]), &t.data)
            .map_err(|e| Error::Weights(format!("{name}: {e}")))
    }

    fn vec(&self, name: &str) -> Result<ArrayView1<'a, f64>> {
        let w: &'a GnnWeights = self.w;
        Ok(ArrayView1::from(&w.get(name)?.data[..]))
    }

    /// `x W^T + b`, rows of `x` are items.
    fn linear(&mut self, x: ArrayView2<f64>, prefix: &str) -> Result<Array2<f64>> {
        let w = self.mat(&format!("{prefix}.weight"))?;
        let b = self.vec(&format!("{prefix}.bias"))?;
        self.flops += (x.nrows() * w.nrows() * w.ncols()) as u64;
        Ok(x.dot(&w.t()) + b)
    }

    /// Per-channel normalization across all rows.
    fn instance_norm(&mut self, x: &mut Array2<f64>, prefix: &str, eps: f64) -> Result<()> {
        let gamma = self.vec(&format!("{prefix}.weight"))?.to_owned();
        let beta = self.vec(&format!("{prefix}.bias"))?.to_owned();
        let rows = x.nrows() as f64;
        let mean = x.sum_axis(Axis(0)) / rows;
        let var: Array1<f64> = x
            .axis_iter(Axis(1))
            .zip(mean.iter())
            .map(|(col, m)| col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / rows)
            .collect();
        let scale: Array1<f64> = var.mapv(|v| 1.0 / (v + eps).sqrt()) * &gamma;
        for mut row in x.rows_mut() {
            row.zip_mut_with(&mean, |v, m| *v -= m);
            row.zip_mut_with(&scale, |v, s| *v *= s);
            row += &beta;
        }
        self.flops += 4 * x.len() as u64;
        Ok(())
    }

    /// Per-row normalization across channels.
    fn layer_norm(&mut self, x: &mut Array2<f64>, prefix: &str, eps: f64) -> Result<()> {
        let gamma = self.vec(&format!("{prefix}.weight"))?.to_owned();
        let beta = self.vec(&format!("{prefix}.bias"))?.to_owned();
        let width = x.ncols() as f64;
        for mut row in x.rows_mut() {
            let mean = row.sum() / width;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / width;
            let inv = 1.0 / (var + eps).sqrt();
            row.zip_mut_with(&gamma, |v, g| *v = (*v - mean) * inv * g);
            row += &beta;
        }
        self.flops += 5 * x.len() as u64;
        Ok(())
    }
}

fn relu(x: &mut Array2<f64>) {
    x.mapv_inplace(|v| v.max(0.0));
}

/// `M x` with `M` the weighted adjacency stored in `graph`'s pattern.
fn propagate(graph: &SparseMatrix, weights: &[f64], x: &Array2<f64>, ctx: &mut Ctx) -> Array2<f64> {
    let mut out = Array2::zeros(x.raw_dim());
    let offsets = graph.row_offsets();
    let cols = graph.col_indices();
    for (u, mut row) in out.rows_mut().into_iter().enumerate() {
        for e in offsets[u]..offsets[u + 1] {
            row.scaled_add(weights[e], &x.row(cols[e]));
        }
    }
    ctx.flops += (graph.nnz() * x.ncols()) as u64;
    out
}

/// Runs the network on `input`.
pub fn forward(weights: &GnnWeights, input: &GraphInput) -> Result<ForwardOutput> {
    let cfg = *weights.config();
    let n = input.n_nodes();
    let n_edges = input.n_edges();
    if input.node_features.len() != n || input.mask.len() != n_edges {
        return Err(Error::DimensionMismatch {
            context: "graph input",
            expected: n,
            found: input.node_features.len(),
        });
    }
    if let Some(k) = input.graph.values().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("matrix entry {k}")));
    }
    let mut ctx = Ctx { w: weights, flops: 0 };

    // Edge preprocessing: scalar a_pq -> learned scalar edge weight.
    let raw = Array2::from_shape_vec((n_edges, 1), input.graph.values().to_vec()).expect("column shape");
    let mut h = ctx.linear(raw.view(), "edge_pre.lin0")?;
    relu(&mut h);
    ctx.instance_norm(&mut h, "edge_pre.norm", cfg.instance_norm_eps)?;
    let edge_w: Vec<f64> = ctx.linear(h.view(), "edge_pre.lin1")?.into_raw_vec_and_offset().0;
    drop(h);

    let mut x = Array2::from_shape_vec((n, 1), input.node_features.clone()).expect("column shape");
    for l in 0..cfg.tagconv_layers {
        // TAGConv: sum_j (M^j x) W_j^T + b
        let mut y: Array2<f64> = Array2::zeros((n, cfg.hidden));
        let mut power = x;
        for j in 0..=cfg.hops {
            if j > 0 {
                power = propagate(&input.graph, &edge_w, &power, &mut ctx);
            }
            let wj = ctx.mat(&format!("conv{l}.tag.weight{j}"))?;
            ctx.flops += (n * wj.nrows() * wj.ncols()) as u64;
            y += &power.dot(&wj.t());
        }
        y += &ctx.vec(&format!("conv{l}.tag.bias"))?;
        relu(&mut y);
        ctx.instance_norm(&mut y, &format!("conv{l}.norm"), cfg.instance_norm_eps)?;
        for b in 0..cfg.resnet_blocks {
            let p = format!("conv{l}.res{b}");
            let mut z = y.clone();
            ctx.layer_norm(&mut z, &format!("{p}.ln"), cfg.layer_norm_eps)?;
            let mut z = ctx.linear(z.view(), &format!("{p}.lin1"))?;
            relu(&mut z);
            let z = ctx.linear(z.view(), &format!("{p}.lin2"))?;
            y += &z;
        }
        x = y;
    }

    // Edge convolution on [x_p, x_q, w_pq], processed in chunks to bound memory.
    let offsets = input.graph.row_offsets();
    let cols = input.graph.col_indices();
    let mut rows_of = vec![0usize; n_edges];
    for u in 0..n {
        rows_of[offsets[u]..offsets[u + 1]].fill(u);
    }
    let hidden = cfg.hidden;
    let mut out = vec![0.0; n_edges];
    let mut start = 0;
    while start < n_edges {
        let end = (start + EDGE_CHUNK).min(n_edges);
        let mut stacked = Array2::zeros((end - start, cfg.edge_input()));
        for (k, e) in (start..end).enumerate() {
            let mut row = stacked.row_mut(k);
            row.slice_mut(s![..hidden]).assign(&x.row(rows_of[e]));
            row.slice_mut(s![hidden..2 * hidden]).assign(&x.row(cols[e]));
            row[2 * hidden] = edge_w[e];
        }
        let mut z = ctx.linear(stacked.view(), "edge_conv.lin0")?;
        relu(&mut z);
        ctx.layer_norm(&mut z, "edge_conv.ln0", cfg.layer_norm_eps)?;
        let mut z = ctx.linear(z.view(), "edge_conv.lin1")?;
        relu(&mut z);
        ctx.layer_norm(&mut z, "edge_conv.ln1", cfg.layer_norm_eps)?;
        let z = ctx.linear(z.view(), "edge_conv.lin2")?;
        for (k, e) in (start..end).enumerate() {
            out[e] = if input.mask[e] { z[[k, 0]] } else { 0.0 };
        }
        start = end;
    }
    Ok(ForwardOutput {
        edge_values: out,
        flops: ctx.flops,
    })
}

/// Predicts interface matrices for `partition` in one forward pass.
pub fn infer_interfaces(
    weights: &GnnWeights,
    system: &LinearSystem,
    partition: &Partition,
) -> Result<(Vec<InterfaceMatrix>, ForwardOutput)> {
    let input = build_graph_input(system, partition)?;
    let out = forward(weights, &input)?;
    Ok((input.interfaces(&out.edge_values)?, out))
}
