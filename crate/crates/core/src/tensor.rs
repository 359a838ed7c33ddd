//! Dense real tensors with index contraction and truncated SVD.
//!
//! This is the only numerical kernel in the crate: shaped `f64` arrays in a
//! fixed row-major linearization, pairwise contraction, reshaping, and a
//! rank/threshold-truncated singular value decomposition. Everything upstream
//! (MPO construction, power iteration, sampling) is built on these three
//! primitives. Scalars are real only; all operators handled here are real
//! and diagonal in the computational basis.

use crate::error::{Error, Result};
use ndarray::{ArrayView2, ArrayViewD, IxDyn};

/// A dense tensor: a shape and its row-major data.
///
/// Invariants: every extent is >= 1 and `data.len() == product(shape)`.
/// The empty shape is a scalar (one element).
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.iter().any(|&e| e == 0) {
            return Err(Error::shape("tensor extents must be >= 1"));
        }
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::shape(format!(
                "shape {:?} implies {} elements, got {}",
                shape,
                len,
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len: usize = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; len],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            shape: vec![],
            data: vec![value],
        }
    }

    pub fn from_fn(shape: Vec<usize>, mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let len: usize = shape.iter().product();
        let mut data = Vec::with_capacity(len);
        let mut idx = vec![0usize; shape.len()];
        for _ in 0..len {
            data.push(f(&idx));
            for ax in (0..shape.len()).rev() {
                idx[ax] += 1;
                if idx[ax] < shape[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }
        Self { shape, data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Reinterpret with a new shape of the same total size. Data order is
    /// unchanged (row-major in, row-major out).
    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if shape.iter().any(|&e| e == 0) || len != self.data.len() {
            return Err(Error::shape(format!(
                "cannot reshape {:?} into {:?}",
                self.shape, shape
            )));
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        debug_assert_eq!(index.len(), self.shape.len());
        let mut lin = 0usize;
        for (ax, &i) in index.iter().enumerate() {
            debug_assert!(i < self.shape[ax]);
            lin = lin * self.shape[ax] + i;
        }
        self.data[lin]
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.data {
            *v *= factor;
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    fn view(&self) -> ArrayViewD<'_, f64> {
        ArrayViewD::from_shape(IxDyn(&self.shape), &self.data).expect("shape/data consistent")
    }

    /// Owned copy with axes reordered so that new axis `i` is old axis
    /// `perm[i]`; data is re-linearized row-major.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.ndim() {
            return Err(Error::shape("permutation length mismatch"));
        }
        let mut seen = vec![false; perm.len()];
        for &p in perm {
            if p >= perm.len() || seen[p] {
                return Err(Error::shape("invalid axis permutation"));
            }
            seen[p] = true;
        }
        let std = self
            .view()
            .permuted_axes(IxDyn(perm))
            .as_standard_layout()
            .into_owned();
        let shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let (data, _) = std.into_raw_vec_and_offset();
        DenseTensor::new(shape, data)
    }

    /// View the tensor as a matrix splitting axes `[0, split)` from
    /// `[split, ndim)`. Row-major data makes this a zero-copy view.
    pub fn matricize(&self, split: usize) -> Result<ArrayView2<'_, f64>> {
        if split > self.ndim() {
            return Err(Error::shape(format!(
                "split {} out of range for {}-dim tensor",
                split,
                self.ndim()
            )));
        }
        let rows: usize = self.shape[..split].iter().product();
        let cols: usize = self.shape[split..].iter().product();
        Ok(ArrayView2::from_shape((rows, cols), &self.data).expect("contiguous"))
    }
}

/// Sum over paired indices of two tensors.
///
/// `pairs` lists `(axis_a, axis_b)` index pairs to contract. The result
/// carries the unpaired axes of `a` (in order) followed by those of `b`.
pub fn contract(a: &DenseTensor, b: &DenseTensor, pairs: &[(usize, usize)]) -> Result<DenseTensor> {
    let mut seen_a = vec![false; a.ndim()];
    let mut seen_b = vec![false; b.ndim()];
    for &(ax_a, ax_b) in pairs {
        if ax_a >= a.ndim() || ax_b >= b.ndim() {
            return Err(Error::shape("contraction axis out of range"));
        }
        if seen_a[ax_a] || seen_b[ax_b] {
            return Err(Error::shape("duplicate axis in contraction pairs"));
        }
        seen_a[ax_a] = true;
        seen_b[ax_b] = true;
        if a.shape[ax_a] != b.shape[ax_b] {
            return Err(Error::shape(format!(
                "paired extents differ: {} vs {}",
                a.shape[ax_a], b.shape[ax_b]
            )));
        }
    }

    let free_a: Vec<usize> = (0..a.ndim()).filter(|&ax| !seen_a[ax]).collect();
    let free_b: Vec<usize> = (0..b.ndim()).filter(|&ax| !seen_b[ax]).collect();

    // Permute contracted axes to the tail of `a` / head of `b`, matricize,
    // multiply.
    let mut perm_a = free_a.clone();
    perm_a.extend(pairs.iter().map(|p| p.0));
    let mut perm_b: Vec<usize> = pairs.iter().map(|p| p.1).collect();
    perm_b.extend(free_b.iter().copied());

    let m: usize = free_a.iter().map(|&ax| a.shape[ax]).product();
    let k: usize = pairs.iter().map(|&(ax, _)| a.shape[ax]).product();
    let n: usize = free_b.iter().map(|&ax| b.shape[ax]).product();

    let a_std = a
        .view()
        .permuted_axes(IxDyn(&perm_a))
        .as_standard_layout()
        .into_owned();
    let b_std = b
        .view()
        .permuted_axes(IxDyn(&perm_b))
        .as_standard_layout()
        .into_owned();
    let a_mat = a_std.view().into_shape_with_order((m, k)).expect("contiguous");
    let b_mat = b_std.view().into_shape_with_order((k, n)).expect("contiguous");
    let prod = a_mat.dot(&b_mat);

    let mut shape: Vec<usize> = free_a.iter().map(|&ax| a.shape[ax]).collect();
    shape.extend(free_b.iter().map(|&ax| b.shape[ax]));
    let (data, _) = prod.into_raw_vec_and_offset();
    DenseTensor::new(shape, data)
}

/// Bond-truncation policy: keep at most `max_rank` singular values and drop
/// any below `rel_cutoff` times the largest singular value of the matrix
/// being decomposed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationPolicy {
    pub max_rank: usize,
    pub rel_cutoff: f64,
}

impl TruncationPolicy {
    pub const DEFAULT_REL_CUTOFF: f64 = 1e-15;

    pub fn new(max_rank: usize, rel_cutoff: f64) -> Result<Self> {
        if max_rank == 0 {
            return Err(Error::validation("max_rank must be >= 1"));
        }
        if !(0.0..1.0).contains(&rel_cutoff) {
            return Err(Error::validation("rel_cutoff must lie in [0, 1)"));
        }
        Ok(Self {
            max_rank,
            rel_cutoff,
        })
    }

    /// Unbounded rank with the default relative threshold; used when an MPO
    /// must be built exactly (its rank is provably small).
    pub fn exact() -> Self {
        Self {
            max_rank: usize::MAX,
            rel_cutoff: Self::DEFAULT_REL_CUTOFF,
        }
    }

    /// Unbounded rank, no thresholding at all.
    pub fn lossless() -> Self {
        Self {
            max_rank: usize::MAX,
            rel_cutoff: 0.0,
        }
    }
}

/// Truncated SVD of a matricized tensor.
///
/// `u` has isometric columns (`rows x rank`), `vt` isometric rows
/// (`rank x cols`), `s` is sorted descending. `discarded_weight` is the sum
/// of squared dropped singular values over the sum of all squared singular
/// values.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: DenseTensor,
    pub s: Vec<f64>,
    pub vt: DenseTensor,
    pub discarded_weight: f64,
}

impl SvdResult {
    pub fn rank(&self) -> usize {
        self.s.len()
    }
}

/// Compute the truncated SVD of `m` interpreted as a matrix by splitting its
/// axes at `split` (axes `[0, split)` become rows).
///
/// An all-zero matrix yields rank 1 with `s = [0]` and canonical basis
/// vectors so downstream tensor chains never collapse to rank 0.
pub fn truncated_svd(m: &DenseTensor, split: usize, policy: &TruncationPolicy) -> Result<SvdResult> {
    let mat = m.matricize(split)?;
    let (rows, cols) = (mat.nrows(), mat.ncols());
    if !m.is_finite() {
        return Err(Error::numerical("non-finite entries in SVD input"));
    }

    let (mut u, mut s, mut vt) = svd_matrix(rows, cols, m.data())?;

    // Defensive descending sort; backends do not all guarantee an order.
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&i, &j| s[j].partial_cmp(&s[i]).expect("finite singular values"));
    if order.windows(2).any(|w| w[0] > w[1]) {
        let full = s.len();
        let mut u2 = vec![0.0; rows * full];
        let mut s2 = vec![0.0; full];
        let mut vt2 = vec![0.0; full * cols];
        for (new, &old) in order.iter().enumerate() {
            s2[new] = s[old];
            for r in 0..rows {
                u2[r * full + new] = u[r * full + old];
            }
            vt2[new * cols..(new + 1) * cols].copy_from_slice(&vt[old * cols..(old + 1) * cols]);
        }
        u = u2;
        s = s2;
        vt = vt2;
    }

    let total_weight: f64 = s.iter().map(|x| x * x).sum();
    if s.is_empty() || s[0] <= 0.0 {
        // Degenerate all-zero matrix: canonical rank-1 result.
        let mut u1 = vec![0.0; rows];
        u1[0] = 1.0;
        let mut vt1 = vec![0.0; cols];
        vt1[0] = 1.0;
        return Ok(SvdResult {
            u: DenseTensor::new(vec![rows, 1], u1)?,
            s: vec![0.0],
            vt: DenseTensor::new(vec![1, cols], vt1)?,
            discarded_weight: 0.0,
        });
    }

    let threshold = policy.rel_cutoff * s[0];
    let mut keep = s
        .iter()
        .take(policy.max_rank.min(s.len()))
        .take_while(|&&x| x >= threshold)
        .count();
    keep = keep.max(1);

    let kept_weight: f64 = s[..keep].iter().map(|x| x * x).sum();
    let discarded_weight = ((total_weight - kept_weight) / total_weight).max(0.0);

    let full = s.len();
    let mut u_trunc = vec![0.0; rows * keep];
    for r in 0..rows {
        u_trunc[r * keep..(r + 1) * keep].copy_from_slice(&u[r * full..r * full + keep]);
    }
    let vt_trunc = vt[..keep * cols].to_vec();
    s.truncate(keep);

    Ok(SvdResult {
        u: DenseTensor::new(vec![rows, keep], u_trunc)?,
        s,
        vt: DenseTensor::new(vec![keep, cols], vt_trunc)?,
        discarded_weight,
    })
}

/// Thin SVD backend. Returns `(u, s, vt)` flattened row-major with
/// `u: rows x k`, `vt: k x cols`, `k = min(rows, cols)`.
fn svd_matrix(rows: usize, cols: usize, data: &[f64]) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let mat = faer::Mat::from_fn(rows, cols, |i, j| data[i * cols + j]);
    let svd = mat.thin_svd();
    let u = svd.u();
    let v = svd.v();
    let sd = svd.s_diagonal();
    let k = sd.nrows();

    let mut u_rm = vec![0.0; rows * k];
    for r in 0..rows {
        for c in 0..k {
            u_rm[r * k + c] = u[(r, c)];
        }
    }
    let mut vt_rm = vec![0.0; k * cols];
    for r in 0..k {
        for c in 0..cols {
            vt_rm[r * cols + c] = v[(c, r)];
        }
    }
    let s: Vec<f64> = (0..k).map(|i| sd[i]).collect();
    if s.iter().any(|x| !x.is_finite()) {
        return Err(Error::numerical("SVD produced non-finite singular values"));
    }
    Ok((u_rm, s, vt_rm))
}
