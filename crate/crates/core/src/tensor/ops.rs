//! Tensor operations, each with a forward value and a backward rule.
//!
//! Binary elementwise ops broadcast NumPy-style (right-aligned, size-1 dims
//! stretch). Gradients of broadcast inputs are reduced back to the input
//! shape by summation.

use rand::Rng;

use super::gemm::{gemm_nn, gemm_nt, gemm_tn};
use super::{numel, shape_err, Tensor, TensorError};

// ---------------------------------------------------------------------------
// broadcasting helpers

fn broadcast_shape(a: &[usize], b: &[usize]) -> Result<Vec<usize>, TensorError> {
    let rank = a.len().max(b.len());
    let mut out = vec![0usize; rank];
    for i in 0..rank {
        let da = a.len().checked_sub(rank - i).map_or(1, |j| a[j]);
        let db = b.len().checked_sub(rank - i).map_or(1, |j| b[j]);
        out[i] = match (da, db) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            _ => {
                return Err(shape_err(format!(
                    "cannot broadcast {a:?} with {b:?}"
                )))
            }
        };
    }
    Ok(out)
}

/// Strides of `shape` embedded (right-aligned) in `out_shape`, 0 on
/// broadcast axes.
fn broadcast_strides(shape: &[usize], out_shape: &[usize]) -> Vec<usize> {
    let rank = out_shape.len();
    let offset = rank - shape.len();
    let mut strides = vec![0usize; rank];
    let mut acc = 1usize;
    for i in (0..shape.len()).rev() {
        strides[offset + i] = if shape[i] == 1 { 0 } else { acc };
        acc *= shape[i];
    }
    strides
}

/// Walk every element of `out_shape`, calling `f(out_linear, off_a, off_b)`.
fn for_each_broadcast(
    out_shape: &[usize],
    sa: &[usize],
    sb: &[usize],
    mut f: impl FnMut(usize, usize, usize),
) {
    let total = numel(out_shape);
    if total == 0 {
        return;
    }
    let rank = out_shape.len();
    if rank == 0 {
        f(0, 0, 0);
        return;
    }
    let mut idx = vec![0usize; rank];
    let (mut off_a, mut off_b) = (0usize, 0usize);
    for lin in 0..total {
        f(lin, off_a, off_b);
        for ax in (0..rank).rev() {
            idx[ax] += 1;
            off_a += sa[ax];
            off_b += sb[ax];
            if idx[ax] < out_shape[ax] {
                break;
            }
            off_a -= sa[ax] * out_shape[ax];
            off_b -= sb[ax] * out_shape[ax];
            idx[ax] = 0;
        }
    }
}

fn binary_broadcast(
    a: &Tensor,
    b: &Tensor,
    forward: fn(f32, f32) -> f32,
    backward: impl Fn(&Tensor, &Tensor, &[usize], &[usize], &[usize], &[f32]) + 'static,
) -> Result<Tensor, TensorError> {
    let out_shape = broadcast_shape(a.shape(), b.shape())?;
    let sa = broadcast_strides(a.shape(), &out_shape);
    let sb = broadcast_strides(b.shape(), &out_shape);
    let mut data = vec![0.0f32; numel(&out_shape)];
    {
        let da = a.data();
        let db = b.data();
        if a.shape() == b.shape() {
            for ((o, &x), &y) in data.iter_mut().zip(da.iter()).zip(db.iter()) {
                *o = forward(x, y);
            }
        } else {
            for_each_broadcast(&out_shape, &sa, &sb, |lin, oa, ob| {
                data[lin] = forward(da[oa], db[ob]);
            });
        }
    }
    let (pa, pb) = (a.clone(), b.clone());
    let shape_for_bwd = out_shape.clone();
    Ok(Tensor::from_op(
        out_shape,
        data,
        vec![a.clone(), b.clone()],
        Box::new(move |g| backward(&pa, &pb, &shape_for_bwd, &sa, &sb, g)),
    ))
}

// ---------------------------------------------------------------------------
// elementwise

pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    binary_broadcast(a, b, |x, y| x + y, |pa, pb, out_shape, sa, sb, g| {
        if pa.requires_grad() {
            let mut ga = vec![0.0f32; pa.len()];
            for_each_broadcast(out_shape, sa, sb, |lin, oa, _| ga[oa] += g[lin]);
            pa.accumulate_grad(&ga);
        }
        if pb.requires_grad() {
            let mut gb = vec![0.0f32; pb.len()];
            for_each_broadcast(out_shape, sa, sb, |lin, _, ob| gb[ob] += g[lin]);
            pb.accumulate_grad(&gb);
        }
    })
}

pub fn mul(a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    binary_broadcast(a, b, |x, y| x * y, |pa, pb, out_shape, sa, sb, g| {
        let da = pa.data();
        let db = pb.data();
        if pa.requires_grad() {
            let mut ga = vec![0.0f32; pa.len()];
            for_each_broadcast(out_shape, sa, sb, |lin, oa, ob| {
                ga[oa] += g[lin] * db[ob];
            });
            pa.accumulate_grad(&ga);
        }
        if pb.requires_grad() {
            let mut gb = vec![0.0f32; pb.len()];
            for_each_broadcast(out_shape, sa, sb, |lin, oa, ob| {
                gb[ob] += g[lin] * da[oa];
            });
            pb.accumulate_grad(&gb);
        }
    })
}

/// Multiply by a compile-time-known constant.
pub fn scale(a: &Tensor, c: f32) -> Tensor {
    let data = a.data().iter().map(|&x| x * c).collect();
    let pa = a.clone();
    Tensor::from_op(
        a.shape().to_vec(),
        data,
        vec![a.clone()],
        Box::new(move |g| {
            if pa.requires_grad() {
                let ga: Vec<f32> = g.iter().map(|&v| v * c).collect();
                pa.accumulate_grad(&ga);
            }
        }),
    )
}

pub fn sub(a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    add(a, &scale(b, -1.0))
}

// ---------------------------------------------------------------------------
// matmul

/// Matrix product. Supports (…, m, k) · (k, n) with leading dims collapsed,
/// and batched (B, m, k) · (B, k, n).
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    let (ra, rb) = (a.shape().len(), b.shape().len());
    if ra >= 2 && rb == 2 {
        matmul_collapsed(a, b)
    } else if ra == 3 && rb == 3 {
        matmul_batched(a, b)
    } else {
        Err(shape_err(format!(
            "matmul undefined for shapes {:?} and {:?}",
            a.shape(),
            b.shape()
        )))
    }
}

fn matmul_collapsed(a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    let k = *a.shape().last().expect("rank >= 2");
    let (bk, n) = (b.shape()[0], b.shape()[1]);
    if k != bk {
        return Err(shape_err(format!(
            "matmul inner dims: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let m = a.len() / k;
    let mut out_shape = a.shape().to_vec();
    *out_shape.last_mut().expect("rank >= 2") = n;
    let mut data = vec![0.0f32; m * n];
    gemm_nn(&a.data(), &b.data(), &mut data, m, k, n);
    let (pa, pb) = (a.clone(), b.clone());
    Ok(Tensor::from_op(
        out_shape,
        data,
        vec![a.clone(), b.clone()],
        Box::new(move |g| {
            if pa.requires_grad() {
                let mut ga = vec![0.0f32; m * k];
                gemm_nt(g, &pb.data(), &mut ga, m, n, k);
                pa.accumulate_grad(&ga);
            }
            if pb.requires_grad() {
                let mut gb = vec![0.0f32; k * n];
                gemm_tn(&pa.data(), g, &mut gb, m, k, n);
                pb.accumulate_grad(&gb);
            }
        }),
    ))
}

fn matmul_batched(a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    let (bs, m, k) = (a.shape()[0], a.shape()[1], a.shape()[2]);
    let (bs2, k2, n) = (b.shape()[0], b.shape()[1], b.shape()[2]);
    if bs != bs2 || k != k2 {
        return Err(shape_err(format!(
            "batched matmul shapes: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let mut data = vec![0.0f32; bs * m * n];
    {
        let da = a.data();
        let db = b.data();
        for i in 0..bs {
            gemm_nn(
                &da[i * m * k..(i + 1) * m * k],
                &db[i * k * n..(i + 1) * k * n],
                &mut data[i * m * n..(i + 1) * m * n],
                m,
                k,
                n,
            );
        }
    }
    let (pa, pb) = (a.clone(), b.clone());
    Ok(Tensor::from_op(
        vec![bs, m, n],
        data,
        vec![a.clone(), b.clone()],
        Box::new(move |g| {
            if pa.requires_grad() {
                let db = pb.data();
                let mut ga = vec![0.0f32; bs * m * k];
                for i in 0..bs {
                    gemm_nt(
                        &g[i * m * n..(i + 1) * m * n],
                        &db[i * k * n..(i + 1) * k * n],
                        &mut ga[i * m * k..(i + 1) * m * k],
                        m,
                        n,
                        k,
                    );
                }
                pa.accumulate_grad(&ga);
            }
            if pb.requires_grad() {
                let da = pa.data();
                let mut gb = vec![0.0f32; bs * k * n];
                for i in 0..bs {
                    gemm_tn(
                        &da[i * m * k..(i + 1) * m * k],
                        &g[i * m * n..(i + 1) * m * n],
                        &mut gb[i * k * n..(i + 1) * k * n],
                        m,
                        k,
                        n,
                    );
                }
                pb.accumulate_grad(&gb);
            }
        }),
    ))
}

// ---------------------------------------------------------------------------
// shape manipulation

pub fn reshape(a: &Tensor, new_shape: &[usize]) -> Result<Tensor, TensorError> {
    if numel(new_shape) != a.len() {
        return Err(shape_err(format!(
            "cannot reshape {:?} to {new_shape:?}",
            a.shape()
        )));
    }
    let pa = a.clone();
    Ok(Tensor::from_op(
        new_shape.to_vec(),
        a.to_vec(),
        vec![a.clone()],
        Box::new(move |g| {
            if pa.requires_grad() {
                pa.accumulate_grad(g);
            }
        }),
    ))
}

/// Reorder axes: output axis `i` takes input axis `axes[i]`.
pub fn permute(a: &Tensor, axes: &[usize]) -> Result<Tensor, TensorError> {
    let rank = a.shape().len();
    let mut seen = vec![false; rank];
    if axes.len() != rank || axes.iter().any(|&ax| ax >= rank || std::mem::replace(&mut seen[ax], true)) {
        return Err(shape_err(format!(
            "invalid axes {axes:?} for rank {rank}"
        )));
    }
    let out_shape: Vec<usize> = axes.iter().map(|&ax| a.shape()[ax]).collect();
    let data = permute_copy(&a.data(), a.shape(), axes);
    let pa = a.clone();
    let inverse: Vec<usize> = {
        let mut inv = vec![0usize; rank];
        for (i, &ax) in axes.iter().enumerate() {
            inv[ax] = i;
        }
        inv
    };
    let out_shape_bwd = out_shape.clone();
    Ok(Tensor::from_op(
        out_shape,
        data,
        vec![a.clone()],
        Box::new(move |g| {
            if pa.requires_grad() {
                let ga = permute_copy(g, &out_shape_bwd, &inverse);
                pa.accumulate_grad(&ga);
            }
        }),
    ))
}

fn permute_copy(data: &[f32], in_shape: &[usize], axes: &[usize]) -> Vec<f32> {
    let rank = in_shape.len();
    let mut in_strides = vec![1usize; rank];
    for i in (0..rank.saturating_sub(1)).rev() {
        in_strides[i] = in_strides[i + 1] * in_shape[i + 1];
    }
    let out_shape: Vec<usize> = axes.iter().map(|&ax| in_shape[ax]).collect();
    let deltas: Vec<usize> = axes.iter().map(|&ax| in_strides[ax]).collect();
    let total = data.len();
    let mut out = vec![0.0f32; total];
    if rank == 0 {
        out.copy_from_slice(data);
        return out;
    }
    let mut idx = vec![0usize; rank];
    let mut off = 0usize;
    for item in out.iter_mut() {
        *item = data[off];
        for ax in (0..rank).rev() {
            idx[ax] += 1;
            off += deltas[ax];
            if idx[ax] < out_shape[ax] {
                break;
            }
            off -= deltas[ax] * out_shape[ax];
            idx[ax] = 0;
        }
    }
    out
}

// ---------------------------------------------------------------------------
// neural-net ops

/// Gather rows of `table` (V × D) at `ids`; output shape `prefix ⊕ [D]`.
pub fn embedding_lookup(
    table: &Tensor,
    ids: &[u32],
    prefix: &[usize],
) -> Result<Tensor, TensorError> {
    if table.shape().len() != 2 {
        return Err(shape_err("embedding table must be rank 2".to_string()));
    }
    let (v, d) = (table.shape()[0], table.shape()[1]);
    if numel(prefix) != ids.len() {
        return Err(shape_err(format!(
            "{} ids cannot fill prefix {prefix:?}",
            ids.len()
        )));
    }
    if let Some(&bad) = ids.iter().find(|&&id| id as usize >= v) {
        return Err(shape_err(format!("token id {bad} outside table of {v}")));
    }
    let mut data = vec![0.0f32; ids.len() * d];
    {
        let t = table.data();
        for (row, &id) in ids.iter().enumerate() {
            let src = &t[id as usize * d..(id as usize + 1) * d];
            data[row * d..(row + 1) * d].copy_from_slice(src);
        }
    }
    let mut out_shape = prefix.to_vec();
    out_shape.push(d);
    let pt = table.clone();
    let ids_owned = ids.to_vec();
    Ok(Tensor::from_op(
        out_shape,
        data,
        vec![table.clone()],
        Box::new(move |g| {
            if pt.requires_grad() {
                pt.with_grad_mut(|gt| {
                    for (row, &id) in ids_owned.iter().enumerate() {
                        let dst = &mut gt[id as usize * d..(id as usize + 1) * d];
                        for (x, &gv) in dst.iter_mut().zip(&g[row * d..(row + 1) * d]) {
                            *x += gv;
                        }
                    }
                });
            }
        }),
    ))
}

pub const LAYER_NORM_EPS: f32 = 1e-5;

/// Normalize over the last axis, then scale and shift.
pub fn layer_norm(x: &Tensor, gamma: &Tensor, beta: &Tensor) -> Result<Tensor, TensorError> {
    let d = *x
        .shape()
        .last()
        .ok_or_else(|| shape_err("layer_norm needs rank >= 1".to_string()))?;
    if gamma.shape() != [d] || beta.shape() != [d] {
        return Err(shape_err(format!(
            "layer_norm params must be [{d}], got {:?} and {:?}",
            gamma.shape(),
            beta.shape()
        )));
    }
    let rows = x.len() / d;
    let mut data = vec![0.0f32; x.len()];
    let mut mean = vec![0.0f32; rows];
    let mut inv_std = vec![0.0f32; rows];
    {
        let xd = x.data();
        let gd = gamma.data();
        let bd = beta.data();
        for r in 0..rows {
            let row = &xd[r * d..(r + 1) * d];
            let m = row.iter().sum::<f32>() / d as f32;
            let var = row.iter().map(|&v| (v - m) * (v - m)).sum::<f32>() / d as f32;
            let is = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            mean[r] = m;
            inv_std[r] = is;
            let out_row = &mut data[r * d..(r + 1) * d];
            for j in 0..d {
                out_row[j] = (row[j] - m) * is * gd[j] + bd[j];
            }
        }
    }
    let (px, pg, pb) = (x.clone(), gamma.clone(), beta.clone());
    Ok(Tensor::from_op(
        x.shape().to_vec(),
        data,
        vec![x.clone(), gamma.clone(), beta.clone()],
        Box::new(move |g| {
            let xd = px.data();
            let gd = pg.data();
            let mut gx = vec![0.0f32; px.len()];
            let mut ggamma = vec![0.0f32; d];
            let mut gbeta = vec![0.0f32; d];
            for r in 0..rows {
                let row = &xd[r * d..(r + 1) * d];
                let grow = &g[r * d..(r + 1) * d];
                let (m, is) = (mean[r], inv_std[r]);
                let mut sum_gg = 0.0f32;
                let mut sum_ggx = 0.0f32;
                for j in 0..d {
                    let xhat = (row[j] - m) * is;
                    let ggam = grow[j] * gd[j];
                    sum_gg += ggam;
                    sum_ggx += ggam * xhat;
                    ggamma[j] += grow[j] * xhat;
                    gbeta[j] += grow[j];
                }
                let inv_d = 1.0 / d as f32;
                let gxrow = &mut gx[r * d..(r + 1) * d];
                for j in 0..d {
                    let xhat = (row[j] - m) * is;
                    let ggam = grow[j] * gd[j];
                    gxrow[j] = is * (ggam - inv_d * sum_gg - xhat * inv_d * sum_ggx);
                }
            }
            if px.requires_grad() {
                px.accumulate_grad(&gx);
            }
            if pg.requires_grad() {
                pg.accumulate_grad(&ggamma);
            }
            if pb.requires_grad() {
                pb.accumulate_grad(&gbeta);
            }
        }),
    ))
}

/// Stable softmax along `axis`.
pub fn softmax(x: &Tensor, axis: usize) -> Result<Tensor, TensorError> {
    let rank = x.shape().len();
    if axis >= rank {
        return Err(shape_err(format!("softmax axis {axis} for rank {rank}")));
    }
    let s = x.shape()[axis];
    let inner: usize = x.shape()[axis + 1..].iter().product();
    let outer: usize = x.shape()[..axis].iter().product();
    let mut data = vec![0.0f32; x.len()];
    {
        let xd = x.data();
        for o in 0..outer {
            for i in 0..inner {
                let base = o * s * inner + i;
                let mut max = f32::NEG_INFINITY;
                for j in 0..s {
                    max = max.max(xd[base + j * inner]);
                }
                let mut total = 0.0f32;
                for j in 0..s {
                    let e = (xd[base + j * inner] - max).exp();
                    data[base + j * inner] = e;
                    total += e;
                }
                let inv = 1.0 / total;
                for j in 0..s {
                    data[base + j * inner] *= inv;
                }
            }
        }
    }
    let y_saved = data.clone();
    let px = x.clone();
    Ok(Tensor::from_op(
        x.shape().to_vec(),
        data,
        vec![x.clone()],
        Box::new(move |g| {
            if !px.requires_grad() {
                return;
            }
            let mut gx = vec![0.0f32; px.len()];
            for o in 0..outer {
                for i in 0..inner {
                    let base = o * s * inner + i;
                    let mut dot = 0.0f32;
                    for j in 0..s {
                        let p = base + j * inner;
                        dot += g[p] * y_saved[p];
                    }
                    for j in 0..s {
                        let p = base + j * inner;
                        gx[p] = y_saved[p] * (g[p] - dot);
                    }
                }
            }
            px.accumulate_grad(&gx);
        }),
    ))
}

/// Abramowitz–Stegun style rational approximation, |error| <= 1.5e-7.
fn erf(x: f64) -> f64 {
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let poly = t
        * (0.254829592
            + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    sign * (1.0 - poly * (-x * x).exp())
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// GeLU in the exact Gaussian-CDF form x·Φ(x).
pub fn gelu(x: &Tensor) -> Tensor {
    let data: Vec<f32> = x
        .data()
        .iter()
        .map(|&v| (v as f64 * std_normal_cdf(v as f64)) as f32)
        .collect();
    let px = x.clone();
    Tensor::from_op(
        x.shape().to_vec(),
        data,
        vec![x.clone()],
        Box::new(move |g| {
            if !px.requires_grad() {
                return;
            }
            let xd = px.data();
            let gx: Vec<f32> = xd
                .iter()
                .zip(g)
                .map(|(&v, &gv)| {
                    let v = v as f64;
                    let d = std_normal_cdf(v) + v * std_normal_pdf(v);
                    (d * gv as f64) as f32
                })
                .collect();
            drop(xd);
            px.accumulate_grad(&gx);
        }),
    )
}

/// Inverted dropout: kept activations are scaled by 1/(1-p). With p = 0 the
/// input tensor is returned unchanged.
pub fn dropout<R: Rng>(x: &Tensor, p: f32, rng: &mut R) -> Result<Tensor, TensorError> {
    if !(0.0..1.0).contains(&p) {
        return Err(shape_err(format!("dropout probability {p} outside [0,1)")));
    }
    if p == 0.0 {
        return Ok(x.clone());
    }
    let keep = 1.0 - p;
    let inv_keep = 1.0 / keep;
    let mask: Vec<f32> = (0..x.len())
        .map(|_| {
            if rng.gen::<f32>() < keep {
                inv_keep
            } else {
                0.0
            }
        })
        .collect();
    let data: Vec<f32> = x.data().iter().zip(&mask).map(|(&v, &m)| v * m).collect();
    let px = x.clone();
    Ok(Tensor::from_op(
        x.shape().to_vec(),
        data,
        vec![x.clone()],
        Box::new(move |g| {
            if px.requires_grad() {
                let gx: Vec<f32> = g.iter().zip(&mask).map(|(&gv, &m)| gv * m).collect();
                px.accumulate_grad(&gx);
            }
        }),
    ))
}

/// Mean cross-entropy of `logits` (N × V) against integer targets, skipping
/// positions whose target equals `ignore_id`. The total is accumulated in
/// f64. Errors with `NonFiniteInput` if any logit is not finite.
pub fn cross_entropy(
    logits: &Tensor,
    targets: &[u32],
    ignore_id: u32,
) -> Result<Tensor, TensorError> {
    if logits.shape().len() != 2 {
        return Err(shape_err(format!(
            "cross_entropy logits must be rank 2, got {:?}",
            logits.shape()
        )));
    }
    let (n, v) = (logits.shape()[0], logits.shape()[1]);
    if targets.len() != n {
        return Err(shape_err(format!(
            "{} targets for {n} logit rows",
            targets.len()
        )));
    }
    if let Some(&bad) = targets
        .iter()
        .find(|&&t| t != ignore_id && t as usize >= v)
    {
        return Err(shape_err(format!("target id {bad} outside vocab of {v}")));
    }

    let mut probs = vec![0.0f32; n * v];
    let mut total = 0.0f64;
    let mut valid = 0usize;
    {
        let xd = logits.data();
        if xd.iter().any(|x| !x.is_finite()) {
            return Err(TensorError::NonFiniteInput("cross_entropy logits"));
        }
        for (r, &t) in targets.iter().enumerate() {
            let row = &xd[r * v..(r + 1) * v];
            let prow = &mut probs[r * v..(r + 1) * v];
            let max = row.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
            let mut denom = 0.0f64;
            for (p, &x) in prow.iter_mut().zip(row) {
                let e = ((x - max) as f64).exp();
                *p = e as f32;
                denom += e;
            }
            let inv = 1.0 / denom;
            for p in prow.iter_mut() {
                *p = (*p as f64 * inv) as f32;
            }
            if t != ignore_id {
                valid += 1;
                let logp = ((row[t as usize] - max) as f64) - denom.ln();
                total -= logp;
            }
        }
    }
    let loss = if valid > 0 { total / valid as f64 } else { 0.0 };
    let targets_owned = targets.to_vec();
    let pl = logits.clone();
    Ok(Tensor::from_op(
        vec![],
        vec![loss as f32],
        vec![logits.clone()],
        Box::new(move |g| {
            if !pl.requires_grad() || valid == 0 {
                return;
            }
            let scale = g[0] / valid as f32;
            let mut gx = vec![0.0f32; n * v];
            for (r, &t) in targets_owned.iter().enumerate() {
                if t == ignore_id {
                    continue;
                }
                let prow = &probs[r * v..(r + 1) * v];
                let grow = &mut gx[r * v..(r + 1) * v];
                for (gr, &p) in grow.iter_mut().zip(prow) {
                    *gr = p * scale;
                }
                grow[t as usize] -= scale;
            }
            pl.accumulate_grad(&gx);
        }),
    ))
}
