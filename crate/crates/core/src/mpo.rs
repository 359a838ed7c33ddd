//! Diagonal matrix product operators.
//!
//! A `DiagonalMpo` stores an operator that is diagonal in the computational
//! basis as a chain of rank-3 site tensors `W_i[alpha, z, beta]` holding, for
//! each virtual bond pair, the local diagonal entries. Because bra and ket
//! indices coincide they are stored once, which also makes the embedding into
//! a state a pure relabeling.
//!
//! Construction compiles a `PolynomialCost` by sweeping the chain once and
//! applying a truncated SVD at every bond: the still-active coefficients are
//! kept as a dense `rank x columns` block whose columns are labelled by the
//! deduplicated remaining-suffix multi-indices, so the matrices stay small
//! even though the operator lives in an exponentially large space.
//!
//! Canonical forms follow the usual MPS conventions applied to the diagonal
//! data: in mixed form sites left of the center are left-isometric, sites
//! right of it right-isometric, and the singular values on the center bond
//! are exactly the Schmidt spectrum of the embedded state, which is what the
//! entanglement diagnostics read off.

use crate::cost::{generator, PolynomialCost};
use crate::error::{Error, Result};
use crate::tensor::{contract, truncated_svd, DenseTensor, TruncationPolicy};
use std::collections::HashMap;

/// Largest dense diagonal that may be materialized (2^24 entries).
pub const DENSE_GUARD: u128 = 1 << 24;

/// One MPO site: a dense tensor of shape `[left, phys, right]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteTensor {
    data: DenseTensor,
}

impl SiteTensor {
    pub fn new(data: DenseTensor) -> Result<Self> {
        if data.ndim() != 3 {
            return Err(Error::shape("site tensor must have 3 axes"));
        }
        Ok(Self { data })
    }

    pub fn left_dim(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn phys_dim(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn right_dim(&self) -> usize {
        self.data.shape()[2]
    }

    pub fn tensor(&self) -> &DenseTensor {
        &self.data
    }

    pub fn into_tensor(self) -> DenseTensor {
        self.data
    }
}

/// Gauge bookkeeping for a `DiagonalMpo`.
///
/// `Mixed { center, lambda }` uses a 1-based bond index: `lambda` sits on the
/// bond between sites `center` and `center + 1`, sites `1..=center` are
/// left-isometric and sites `center+1..=N` right-isometric.
#[derive(Debug, Clone, PartialEq)]
pub enum CanonicalForm {
    None,
    Left,
    Right,
    Mixed { center: usize, lambda: Vec<f64> },
}

/// Requested target of `canonicalized`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetForm {
    Left,
    Right,
    Mixed(usize),
}

/// A chain of diagonal site tensors with unit boundary bonds, a canonical
/// form tag and an accumulated log normalization factor: the represented
/// operator is `exp(log_scale)` times the stored tensor contraction.
#[derive(Debug, Clone)]
pub struct DiagonalMpo {
    sites: Vec<SiteTensor>,
    canonical: CanonicalForm,
    log_scale: f64,
}

impl DiagonalMpo {
    pub(crate) fn from_sites(
        sites: Vec<SiteTensor>,
        canonical: CanonicalForm,
        log_scale: f64,
    ) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::shape("MPO needs at least one site"));
        }
        if sites.first().unwrap().left_dim() != 1 || sites.last().unwrap().right_dim() != 1 {
            return Err(Error::shape("boundary bond dimensions must be 1"));
        }
        for w in sites.windows(2) {
            if w[0].right_dim() != w[1].left_dim() {
                return Err(Error::shape("adjacent bond dimensions must match"));
            }
        }
        Ok(Self {
            sites,
            canonical,
            log_scale,
        })
    }

    /// The identity operator as a product MPO (all bonds 1).
    pub fn identity(local_dims: &[usize]) -> Result<Self> {
        let sites = local_dims
            .iter()
            .map(|&d| SiteTensor::new(DenseTensor::new(vec![1, d, 1], vec![1.0; d])?))
            .collect::<Result<Vec<_>>>()?;
        Self::from_sites(sites, CanonicalForm::None, 0.0)
    }

    pub fn num_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn local_dims(&self) -> Vec<usize> {
        self.sites.iter().map(|s| s.phys_dim()).collect()
    }

    pub fn sites(&self) -> &[SiteTensor] {
        &self.sites
    }

    pub fn canonical_form(&self) -> &CanonicalForm {
        &self.canonical
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    /// Interior bond dimensions, one entry per cut between adjacent sites.
    pub fn bond_profile(&self) -> Vec<usize> {
        self.sites[..self.sites.len() - 1]
            .iter()
            .map(|s| s.right_dim())
            .collect()
    }

    pub fn max_bond(&self) -> usize {
        self.bond_profile().into_iter().max().unwrap_or(1)
    }

    /// Fold the center singular values (if any) into the site left of the
    /// center bond, dropping the canonical tag.
    pub fn center_folded(&self) -> Self {
        match &self.canonical {
            CanonicalForm::Mixed { center, lambda } => {
                let mut sites = self.sites.clone();
                let idx = center - 1;
                let mut t = sites[idx].tensor().clone();
                let (l, d, r) = (t.shape()[0], t.shape()[1], t.shape()[2]);
                debug_assert_eq!(r, lambda.len());
                let data = t.data_mut();
                for row in 0..l * d {
                    for (b, &lam) in lambda.iter().enumerate() {
                        data[row * r + b] *= lam;
                    }
                }
                sites[idx] = SiteTensor::new(t).expect("shape preserved");
                Self {
                    sites,
                    canonical: CanonicalForm::None,
                    log_scale: self.log_scale,
                }
            }
            _ => self.clone(),
        }
    }

    /// Dense diagonal of the stored tensors only (no `exp(log_scale)`
    /// factor). Guarded to at most `DENSE_GUARD` entries.
    pub fn dense_diagonal_raw(&self) -> Result<Vec<f64>> {
        let dims = self.local_dims();
        let total = dims.iter().fold(1u128, |a, &d| a.saturating_mul(d as u128));
        if total > DENSE_GUARD {
            return Err(Error::guard(format!(
                "dense diagonal would hold {total} entries (limit {DENSE_GUARD})"
            )));
        }
        let folded = self.center_folded();
        let mut out = Vec::with_capacity(total as usize);
        let env = vec![1.0f64];
        dense_recurse(&folded.sites, 0, &env, &mut out);
        Ok(out)
    }

    /// Dense diagonal of the represented operator, including the
    /// `exp(log_scale)` normalization factor.
    pub fn dense_diagonal(&self) -> Result<Vec<f64>> {
        let factor = self.log_scale.exp();
        if !factor.is_finite() {
            return Err(Error::numerical(
                "exp(log_scale) overflows; compare normalized diagonals instead",
            ));
        }
        let mut raw = self.dense_diagonal_raw()?;
        for v in &mut raw {
            *v *= factor;
        }
        Ok(raw)
    }

    /// Bring the MPO to the requested canonical form without changing the
    /// represented operator (up to the policy's truncation threshold).
    pub fn canonicalized_with(&self, form: TargetForm, policy: &TruncationPolicy) -> Result<Self> {
        let n = self.num_sites();
        match (&self.canonical, form) {
            (CanonicalForm::Left, TargetForm::Left) => return Ok(self.clone()),
            (CanonicalForm::Right, TargetForm::Right) => return Ok(self.clone()),
            (CanonicalForm::Mixed { center, .. }, TargetForm::Mixed(c)) if *center == c => {
                return Ok(self.clone())
            }
            _ => {}
        }
        if let TargetForm::Mixed(c) = form {
            if c == 0 || c >= n {
                return Err(Error::validation(format!(
                    "mixed center {c} out of range 1..{n}"
                )));
            }
        }

        // Fold any center weights, remembering how far the left isometries
        // are already established.
        let (mut sites, left_ok) = match &self.canonical {
            CanonicalForm::Left => (self.sites.clone(), n.saturating_sub(1)),
            CanonicalForm::Mixed { center, .. } => (self.center_folded().sites, center - 1),
            _ => (self.sites.clone(), 0),
        };

        left_sweep(&mut sites, left_ok, n - 1, policy)?;
        match form {
            TargetForm::Left => Ok(Self {
                sites,
                canonical: CanonicalForm::Left,
                log_scale: self.log_scale,
            }),
            TargetForm::Right => {
                right_sweep(&mut sites, n - 1, 1, policy)?;
                Ok(Self {
                    sites,
                    canonical: CanonicalForm::Right,
                    log_scale: self.log_scale,
                })
            }
            TargetForm::Mixed(c) => {
                right_sweep(&mut sites, n - 1, c, policy)?;
                // Pull the singular values out of the bond between c-1 and c.
                let svd = truncated_svd(sites[c - 1].tensor(), 2, policy)?;
                let (l, d) = (sites[c - 1].left_dim(), sites[c - 1].phys_dim());
                let k = svd.rank();
                sites[c - 1] = SiteTensor::new(svd.u.reshape(vec![l, d, k])?)?;
                if c < n {
                    let next = sites[c].tensor().clone();
                    sites[c] = SiteTensor::new(contract(&svd.vt, &next, &[(1, 0)])?)?;
                } else {
                    unreachable!("center bond is interior");
                }
                Ok(Self {
                    sites,
                    canonical: CanonicalForm::Mixed {
                        center: c,
                        lambda: svd.s,
                    },
                    log_scale: self.log_scale,
                })
            }
        }
    }

    pub fn canonicalized(&self, form: TargetForm) -> Result<Self> {
        self.canonicalized_with(form, &TruncationPolicy::lossless())
    }

    /// Rescale the center singular values to unit 2-norm, moving the factor
    /// into `log_scale`. Requires mixed canonical form.
    pub fn normalized(&self) -> Result<Self> {
        let CanonicalForm::Mixed { center, lambda } = &self.canonical else {
            return Err(Error::validation("normalize requires mixed canonical form"));
        };
        let norm = lambda.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !norm.is_finite() {
            return Err(Error::numerical("non-finite singular values"));
        }
        if norm == 0.0 {
            return Err(Error::numerical(
                "operator vanished under truncation (zero singular spectrum)",
            ));
        }
        let lambda = lambda.iter().map(|x| x / norm).collect();
        Ok(Self {
            sites: self.sites.clone(),
            canonical: CanonicalForm::Mixed {
                center: *center,
                lambda,
            },
            log_scale: self.log_scale + norm.ln(),
        })
    }

    /// Schmidt entropies (base 2) of the embedded state at every interior
    /// cut, computed from one canonicalization sweep.
    pub fn entanglement_profile(&self) -> Result<Vec<f64>> {
        let n = self.num_sites();
        if n == 1 {
            return Ok(vec![]);
        }
        let lossless = TruncationPolicy::lossless();
        let right = self.canonicalized_with(TargetForm::Right, &lossless)?;
        let mut sites = right.sites;
        let mut entropies = Vec::with_capacity(n - 1);
        for i in 0..n - 1 {
            let svd = truncated_svd(sites[i].tensor(), 2, &lossless)?;
            let (l, d) = (sites[i].left_dim(), sites[i].phys_dim());
            let k = svd.rank();
            entropies.push(spectrum_entropy_bits(&svd.s));
            sites[i] = SiteTensor::new(svd.u.reshape(vec![l, d, k])?)?;
            let mut sv = svd.vt;
            scale_rows(&mut sv, &svd.s);
            let next = sites[i + 1].tensor().clone();
            sites[i + 1] = SiteTensor::new(contract(&sv, &next, &[(1, 0)])?)?;
        }
        Ok(entropies)
    }

    #[cfg(test)]
    pub(crate) fn is_left_isometric(&self, i: usize, tol: f64) -> bool {
        let t = self.sites[i].tensor();
        let g = contract(t, t, &[(0, 0), (1, 1)]).unwrap();
        is_identity(&g, tol)
    }

    #[cfg(test)]
    pub(crate) fn is_right_isometric(&self, i: usize, tol: f64) -> bool {
        let t = self.sites[i].tensor();
        let g = contract(t, t, &[(1, 1), (2, 2)]).unwrap();
        is_identity(&g, tol)
    }
}

#[cfg(test)]
fn is_identity(g: &DenseTensor, tol: f64) -> bool {
    let n = g.shape()[0];
    (0..n).all(|i| {
        (0..n).all(|j| {
            let expect = if i == j { 1.0 } else { 0.0 };
            (g.get(&[i, j]) - expect).abs() < tol
        })
    })
}

/// Entropy in bits of a normalized squared singular spectrum.
pub(crate) fn spectrum_entropy_bits(s: &[f64]) -> f64 {
    let total: f64 = s.iter().map(|x| x * x).sum();
    if total <= 0.0 {
        return 0.0;
    }
    -s.iter()
        .map(|x| x * x / total)
        .filter(|&p| p > 0.0)
        .map(|p| p * p.log2())
        .sum::<f64>()
}

fn dense_recurse(sites: &[SiteTensor], level: usize, env: &[f64], out: &mut Vec<f64>) {
    if level == sites.len() {
        debug_assert_eq!(env.len(), 1);
        out.push(env[0]);
        return;
    }
    let t = sites[level].tensor();
    let (l, d, r) = (t.shape()[0], t.shape()[1], t.shape()[2]);
    debug_assert_eq!(env.len(), l);
    let data = t.data();
    for z in 0..d {
        let mut next = vec![0.0f64; r];
        for (a, &e) in env.iter().enumerate() {
            if e == 0.0 {
                continue;
            }
            let base = (a * d + z) * r;
            for b in 0..r {
                next[b] += e * data[base + b];
            }
        }
        dense_recurse(sites, level + 1, &next, out);
    }
}

/// Multiply row `i` of a matrix tensor by `s[i]`.
pub(crate) fn scale_rows(m: &mut DenseTensor, s: &[f64]) {
    let cols = m.shape()[1];
    let data = m.data_mut();
    for (i, &f) in s.iter().enumerate() {
        for v in &mut data[i * cols..(i + 1) * cols] {
            *v *= f;
        }
    }
}

/// Make `sites[from..to]` left-isometric, pushing the remainder rightward.
pub(crate) fn left_sweep(
    sites: &mut [SiteTensor],
    from: usize,
    to: usize,
    policy: &TruncationPolicy,
) -> Result<()> {
    for i in from..to {
        let svd = truncated_svd(sites[i].tensor(), 2, policy)?;
        let (l, d) = (sites[i].left_dim(), sites[i].phys_dim());
        let k = svd.rank();
        sites[i] = SiteTensor::new(svd.u.reshape(vec![l, d, k])?)?;
        let mut sv = svd.vt;
        scale_rows(&mut sv, &svd.s);
        let next = sites[i + 1].tensor().clone();
        sites[i + 1] = SiteTensor::new(contract(&sv, &next, &[(1, 0)])?)?;
    }
    Ok(())
}

/// Make `sites[downto..]` right-isometric, pushing the remainder leftward.
pub(crate) fn right_sweep(
    sites: &mut [SiteTensor],
    from: usize,
    downto: usize,
    policy: &TruncationPolicy,
) -> Result<()> {
    let mut i = from;
    while i >= downto {
        let svd = truncated_svd(sites[i].tensor(), 1, policy)?;
        let (d, r) = (sites[i].phys_dim(), sites[i].right_dim());
        let k = svd.rank();
        sites[i] = SiteTensor::new(svd.vt.reshape(vec![k, d, r])?)?;
        let mut us = svd.u;
        scale_cols(&mut us, &svd.s);
        let prev = sites[i - 1].tensor().clone();
        sites[i - 1] = SiteTensor::new(contract(&prev, &us, &[(2, 0)])?)?;
        i -= 1;
    }
    Ok(())
}

/// Multiply column `j` of a matrix tensor by `s[j]`.
pub(crate) fn scale_cols(m: &mut DenseTensor, s: &[f64]) {
    let cols = m.shape()[1];
    let data = m.data_mut();
    for row in data.chunks_mut(cols) {
        for (v, &f) in row.iter_mut().zip(s) {
            *v *= f;
        }
    }
}

/// Compile a cost expansion into a diagonal MPO by one left-to-right sweep
/// of truncated SVDs.
///
/// The working state is the dense block of still-active coefficients,
/// `carry[rank x columns]`, whose columns are labelled by the distinct
/// remaining-suffix multi-indices of the expansion. At each site the block is
/// expanded into the local diagonal basis, split by SVD, and the
/// `diag(s) * vt` part re-keyed by the deduplicated tails and carried
/// forward. The returned MPO is left-canonical up to site N-1.
pub fn build_mpo(g: &PolynomialCost, policy: &TruncationPolicy) -> Result<DiagonalMpo> {
    let n = g.num_sites();
    let dims = g.local_dims().to_vec();

    // Sparse coefficients of the operator-basis expansion as multi-indices.
    let mut cols: Vec<Vec<u8>> = Vec::with_capacity(g.num_terms() + 1);
    let mut carry: Vec<f64> = Vec::with_capacity(g.num_terms() + 1);
    if g.offset() != 0.0 {
        cols.push(vec![0u8; n]);
        carry.push(g.offset());
    }
    for term in g.terms() {
        let mut idx = vec![0u8; n];
        for &(site, k) in &term.factors {
            if k > u8::MAX as usize {
                return Err(Error::validation("generator index exceeds u8 range"));
            }
            idx[site - 1] = k as u8;
        }
        cols.push(idx);
        carry.push(term.coeff);
    }
    if cols.is_empty() {
        return Err(Error::validation(
            "empty cost: no terms and zero offset has no MPO representation",
        ));
    }

    // Local change of basis: T[z][p] = diagonal entry of Z^(p) at z.
    let basis: Vec<Vec<f64>> = dims
        .iter()
        .map(|&d| {
            let mut t = vec![0.0; d * d];
            for p in 0..d {
                let diag = generator(d, p)?.diagonal;
                for z in 0..d {
                    t[z * d + p] = diag[z];
                }
            }
            Ok(t)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut left_rank = 1usize;
    let mut sites: Vec<SiteTensor> = Vec::with_capacity(n);

    for i in 0..n - 1 {
        let d = dims[i];
        let t = &basis[i];
        let ncols_old = cols.len();

        // Deduplicate remaining suffixes into the new column set.
        let mut seen: HashMap<Vec<u8>, usize> = HashMap::with_capacity(ncols_old);
        let mut new_cols: Vec<Vec<u8>> = Vec::new();
        let mut col_map: Vec<(usize, usize)> = Vec::with_capacity(ncols_old); // (head p, new col)
        for c in &cols {
            let head = c[0] as usize;
            let tail = c[1..].to_vec();
            let nc = match seen.get(&tail) {
                Some(&existing) => existing,
                None => {
                    let id = new_cols.len();
                    seen.insert(tail.clone(), id);
                    new_cols.push(tail);
                    id
                }
            };
            col_map.push((head, nc));
        }
        let ncols_new = new_cols.len();

        // Assemble the (left_rank * d) x ncols_new matrix in the z basis.
        let rows = left_rank * d;
        let mut a = vec![0.0f64; rows * ncols_new];
        for (oc, &(head, nc)) in col_map.iter().enumerate() {
            for alpha in 0..left_rank {
                let coeff = carry[alpha * ncols_old + oc];
                if coeff == 0.0 {
                    continue;
                }
                for z in 0..d {
                    a[(alpha * d + z) * ncols_new + nc] += coeff * t[z * d + head];
                }
            }
        }

        let m = DenseTensor::new(vec![rows, ncols_new], a)?;
        let svd = truncated_svd(&m, 1, policy)?;
        let k = svd.rank();
        sites.push(SiteTensor::new(svd.u.reshape(vec![left_rank, d, k])?)?);

        let mut sv = svd.vt;
        scale_rows(&mut sv, &svd.s);
        carry = sv.into_data();
        cols = new_cols;
        left_rank = k;
    }

    // Final site: remaining suffixes are single generator indices.
    let d = dims[n - 1];
    let t = &basis[n - 1];
    let ncols_old = cols.len();
    let mut last = vec![0.0f64; left_rank * d];
    for (oc, c) in cols.iter().enumerate() {
        debug_assert_eq!(c.len(), 1);
        let p = c[0] as usize;
        for alpha in 0..left_rank {
            let coeff = carry[alpha * ncols_old + oc];
            if coeff == 0.0 {
                continue;
            }
            for z in 0..d {
                last[alpha * d + z] += coeff * t[z * d + p];
            }
        }
    }
    sites.push(SiteTensor::new(DenseTensor::new(
        vec![left_rank, d, 1],
        last,
    )?)?);

    DiagonalMpo::from_sites(sites, CanonicalForm::Left, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{CostTerm, OptMode, PolynomialCost};

    fn toy_shifted() -> PolynomialCost {
        let c =
            PolynomialCost::binary(2, vec![CostTerm::new(1.0, vec![(1, 1), (2, 1)])], 0.0).unwrap();
        c.shifted(OptMode::Minimize, Some(1.0)).0
    }

    #[test]
    fn build_toy_coupling() {
        let mpo = build_mpo(&toy_shifted(), &TruncationPolicy::exact()).unwrap();
        assert_eq!(mpo.max_bond(), 2);
        let diag = mpo.dense_diagonal().unwrap();
        let expect = [0.0, 2.0, 2.0, 0.0];
        for (a, b) in diag.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-10, "{diag:?}");
        }
    }

    #[test]
    fn build_identity_string_has_unit_bonds() {
        let c = PolynomialCost::binary(4, vec![], 3.5).unwrap();
        let mpo = build_mpo(&c, &TruncationPolicy::exact()).unwrap();
        assert_eq!(mpo.bond_profile(), vec![1, 1, 1]);
        let diag = mpo.dense_diagonal().unwrap();
        assert!(diag.iter().all(|v| (v - 3.5).abs() < 1e-12));
    }

    #[test]
    fn build_rejects_empty_cost() {
        let c = PolynomialCost::binary(3, vec![], 0.0).unwrap();
        assert!(build_mpo(&c, &TruncationPolicy::exact()).is_err());
    }

    #[test]
    fn rank_one_coupling_matrix_bounds_bond() {
        // M = u u^T, couplings from the upper triangle; operator Schmidt
        // rank across any cut is at most r + 2 = 3.
        let n = 8;
        let u: Vec<f64> = (0..n).map(|i| ((i as f64) * 0.61).sin() + 1.2).collect();
        let mut terms = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                terms.push(CostTerm::new(u[i] * u[j], vec![(i + 1, 1), (j + 1, 1)]));
            }
        }
        let cost = PolynomialCost::binary(n, terms, 0.0).unwrap();
        let (g, _) = cost.shifted(OptMode::Minimize, None);
        let mpo = build_mpo(&g, &TruncationPolicy::exact()).unwrap();
        assert!(mpo.max_bond() <= 3, "bond profile {:?}", mpo.bond_profile());
    }

    fn lcg_qubo(n: usize, seed: u64) -> PolynomialCost {
        let mut state = seed;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) as f64 / (1u64 << 31) as f64) - 1.0
        };
        let mut terms = Vec::new();
        for i in 1..=n {
            for j in i + 1..=n {
                terms.push(CostTerm::new(next(), vec![(i, 1), (j, 1)]));
            }
        }
        PolynomialCost::binary(n, terms, 0.0).unwrap()
    }

    #[test]
    fn dense_diagonal_matches_evaluate_on_random_qubo() {
        let cost = lcg_qubo(10, 7);
        let (g, _) = cost.shifted(OptMode::Minimize, None);
        let mpo = build_mpo(&g, &TruncationPolicy::exact()).unwrap();
        let diag = mpo.dense_diagonal().unwrap();
        let scale = diag.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (idx, &got) in diag.iter().enumerate() {
            let z: Vec<usize> = (0..10).map(|b| (idx >> (9 - b)) & 1).collect();
            let want = g.evaluate(&z).unwrap();
            assert!((got - want).abs() <= 1e-10 * scale.max(1.0));
        }
    }

    #[test]
    fn full_graph_qubo_bond_bound() {
        let mpo = build_mpo(
            &lcg_qubo(9, 3).shifted(OptMode::Minimize, None).0,
            &TruncationPolicy::exact(),
        )
        .unwrap();
        assert!(mpo.max_bond() <= 9 / 2 + 2, "{:?}", mpo.bond_profile());
    }

    #[test]
    fn dense_diagonal_identity() {
        let mpo = DiagonalMpo::identity(&[2, 2, 2]).unwrap();
        assert_eq!(mpo.dense_diagonal().unwrap(), vec![1.0; 8]);
        assert_eq!(mpo.max_bond(), 1);
    }

    #[test]
    fn qudit_mpo_matches_evaluate() {
        let terms = vec![
            CostTerm::new(0.8, vec![(1, 1), (2, 2)]),
            CostTerm::new(-0.5, vec![(2, 1), (4, 1)]),
            CostTerm::new(0.3, vec![(1, 1), (3, 1), (4, 1)]),
        ];
        let cost = PolynomialCost::new(4, vec![2, 3, 2, 3], terms, 0.2).unwrap();
        let (g, _) = cost.shifted(OptMode::Minimize, None);
        let mpo = build_mpo(&g, &TruncationPolicy::exact()).unwrap();
        let diag = mpo.dense_diagonal().unwrap();
        let dims = [2usize, 3, 2, 3];
        let mut idx = 0usize;
        let mut z = vec![0usize; 4];
        loop {
            let want = g.evaluate(&z).unwrap();
            assert!((diag[idx] - want).abs() < 1e-10);
            idx += 1;
            let mut ax = 3i64;
            loop {
                if ax < 0 {
                    return;
                }
                z[ax as usize] += 1;
                if z[ax as usize] < dims[ax as usize] {
                    break;
                }
                z[ax as usize] = 0;
                ax -= 1;
            }
        }
    }

    #[test]
    fn canonicalize_left_idempotent() {
        let mpo = build_mpo(&toy_shifted(), &TruncationPolicy::exact()).unwrap();
        let again = mpo.canonicalized(TargetForm::Left).unwrap();
        for (a, b) in mpo.sites().iter().zip(again.sites()) {
            assert_eq!(a.tensor().data(), b.tensor().data());
        }
    }

    #[test]
    fn canonical_forms_preserve_diagonal() {
        let cost = lcg_qubo(6, 11);
        let (g, _) = cost.shifted(OptMode::Minimize, None);
        let mpo = build_mpo(&g, &TruncationPolicy::exact()).unwrap();
        let reference = mpo.dense_diagonal().unwrap();
        for form in [
            TargetForm::Left,
            TargetForm::Right,
            TargetForm::Mixed(1),
            TargetForm::Mixed(3),
            TargetForm::Mixed(5),
        ] {
            let c = mpo.canonicalized(form).unwrap();
            let diag = c.dense_diagonal().unwrap();
            let scale = reference.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (a, b) in diag.iter().zip(&reference) {
                assert!((a - b).abs() <= 1e-10 * scale, "{form:?}");
            }
            // Isometry checks.
            match form {
                TargetForm::Left => {
                    for i in 0..c.num_sites() - 1 {
                        assert!(c.is_left_isometric(i, 1e-10));
                    }
                }
                TargetForm::Right => {
                    for i in 1..c.num_sites() {
                        assert!(c.is_right_isometric(i, 1e-10));
                    }
                }
                TargetForm::Mixed(center) => {
                    for i in 0..center {
                        assert!(c.is_left_isometric(i, 1e-10));
                    }
                    for i in center..c.num_sites() {
                        assert!(c.is_right_isometric(i, 1e-10));
                    }
                }
            }
        }
    }

    #[test]
    fn mixed_center_lambda_matches_dense_schmidt() {
        let mpo = build_mpo(&toy_shifted(), &TruncationPolicy::exact()).unwrap();
        let mixed = mpo.canonicalized(TargetForm::Mixed(1)).unwrap();
        let CanonicalForm::Mixed { lambda, .. } = mixed.canonical_form() else {
            panic!("expected mixed form");
        };
        // Dense oracle: Schmidt values of the diagonal reshaped across the
        // cut, i.e. singular values of [[0, 2], [2, 0]].
        let vals = [0.0, 2.0, 2.0, 0.0];
        let m = faer::Mat::from_fn(2, 2, |i, j| vals[i * 2 + j]);
        let svd = m.thin_svd();
        let mut expect: Vec<f64> = (0..2).map(|i| svd.s_diagonal()[i]).collect();
        expect.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert_eq!(lambda.len(), expect.len());
        for (a, b) in lambda.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn product_mpo_center_is_frobenius_scale() {
        let mpo = DiagonalMpo::identity(&[2, 2]).unwrap();
        let mixed = mpo.canonicalized(TargetForm::Mixed(1)).unwrap();
        let CanonicalForm::Mixed { lambda, .. } = mixed.canonical_form() else {
            panic!()
        };
        assert_eq!(lambda.len(), 1);
        assert!((lambda[0] - 2.0).abs() < 1e-12); // ||diag(1,1,1,1)||_F
    }

    #[test]
    fn normalize_rescales_and_tracks_log() {
        let mpo = build_mpo(&toy_shifted(), &TruncationPolicy::exact()).unwrap();
        let mixed = mpo.canonicalized(TargetForm::Mixed(1)).unwrap();
        let CanonicalForm::Mixed { lambda, .. } = mixed.canonical_form() else {
            panic!()
        };
        let norm: f64 = lambda.iter().map(|x| x * x).sum::<f64>().sqrt();
        let normalized = mixed.normalized().unwrap();
        let CanonicalForm::Mixed { lambda: lam2, .. } = normalized.canonical_form() else {
            panic!()
        };
        let unit: f64 = lam2.iter().map(|x| x * x).sum();
        assert!((unit - 1.0).abs() < 1e-12);
        assert!((normalized.log_scale() - norm.ln()).abs() < 1e-12);
        // Represented operator unchanged.
        let before = mixed.dense_diagonal().unwrap();
        let after = normalized.dense_diagonal().unwrap();
        for (a, b) in before.iter().zip(&after) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn normalize_requires_mixed_form() {
        let mpo = DiagonalMpo::identity(&[2, 2]).unwrap();
        assert!(mpo.normalized().is_err());
    }

    #[test]
    fn entropy_bounded_by_log_bond() {
        let cost = lcg_qubo(8, 21);
        let (g, _) = cost.shifted(OptMode::Minimize, None);
        let mpo = build_mpo(&g, &TruncationPolicy::exact()).unwrap();
        let profile = mpo.entanglement_profile().unwrap();
        let bonds = mpo.bond_profile();
        for (s, b) in profile.iter().zip(&bonds) {
            assert!(*s <= (*b as f64).log2() + 1e-9);
        }
    }

    #[test]
    fn product_mpo_entropy_zero() {
        let mpo = DiagonalMpo::identity(&[2, 2, 2, 2]).unwrap();
        let profile = mpo.entanglement_profile().unwrap();
        assert!(profile.iter().all(|s| s.abs() < 1e-12));
    }
}
