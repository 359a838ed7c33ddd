//! Truncated power iteration on diagonal MPOs.
//!
//! `G^K` is built either by K-1 multiplications with the original operator
//! (linear schedule) or by m self-multiplications reaching `K = 2^m`
//! (doubling schedule). Each multiplication is a zip-up contraction: a single
//! left-to-right sweep that contracts the two operand sites into a growing
//! environment and truncates with an SVD at every bond as the zipper closes,
//! followed by one canonicalization sweep that restores a proper mixed gauge
//! (raw zip-up output is not a trustworthy gauge for reading off Schmidt
//! spectra) and a renormalization that keeps the stored tensors at unit
//! Frobenius norm, accumulating the extracted factor in `log_scale`.

use crate::error::{Error, Result};
use crate::mpo::{scale_rows, CanonicalForm, DiagonalMpo, SiteTensor, TargetForm};
use crate::tensor::{contract, truncated_svd, DenseTensor, TruncationPolicy};
use ndarray::ArrayView2;
use ndarray::ShapeBuilder;
use std::collections::BTreeSet;
use std::time::Instant;

/// Contraction schedule for reaching `G^K`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    /// `multiplications` products with the original operator: `K = n + 1`.
    Linear { multiplications: usize },
    /// `squarings` self-products: `K = 2^m`.
    Doubling { squarings: u32 },
}

impl Schedule {
    pub fn final_power(&self) -> u64 {
        match self {
            Schedule::Linear { multiplications } => *multiplications as u64 + 1,
            Schedule::Doubling { squarings } => 1u64 << squarings,
        }
    }
}

/// One diagnostics row recorded at a checkpoint power `K`.
#[derive(Debug, Clone)]
pub struct TraceRow {
    pub k: u64,
    /// `log2 K` when `K` is a power of two.
    pub m: Option<u32>,
    pub bond_profile: Vec<usize>,
    pub max_bond: usize,
    pub max_entropy_bits: f64,
    pub log_scale: f64,
    pub seconds: f64,
}

/// Checkpoint diagnostics collected over a power run.
#[derive(Debug, Clone, Default)]
pub struct PowerTrace {
    pub rows: Vec<TraceRow>,
}

/// Suppression factor and required-power estimate for a target success
/// probability.
#[derive(Debug, Clone, Copy)]
pub struct PowerEstimate {
    pub eta: f64,
    pub k_required: f64,
}

/// Estimate the power needed to sample an optimal configuration with
/// probability at least `p`, for a spectrum with ground value `lambda0`,
/// gap `delta`, `degeneracy` optima among `dim` configurations, under the
/// shift `lambda`.
///
/// The suppression factor is `eta = (lambda - lambda0 - delta) /
/// (lambda - lambda0)`; the estimate is
/// `K = [ln(p/(1-p)) + ln((dim-degeneracy)/degeneracy)] / (2 ln(1/eta))`.
pub fn estimate_required_power(
    lambda: f64,
    lambda0: f64,
    delta: f64,
    dim: f64,
    degeneracy: f64,
    p: f64,
) -> Result<PowerEstimate> {
    if !(lambda > lambda0) {
        return Err(Error::validation("lambda must exceed lambda0"));
    }
    if !(delta > 0.0) {
        return Err(Error::validation("gap delta must be positive"));
    }
    if !(0.0 < p && p < 1.0) {
        return Err(Error::validation("target probability must lie in (0, 1)"));
    }
    if !(degeneracy >= 1.0 && degeneracy < dim) {
        return Err(Error::validation("need 1 <= degeneracy < dim"));
    }
    let eta = (lambda - lambda0 - delta) / (lambda - lambda0);
    if eta >= 1.0 {
        return Err(Error::numerical("no spectral gap: eta >= 1"));
    }
    if eta <= 0.0 {
        return Err(Error::numerical(
            "shift is inside the excited spectrum: eta <= 0",
        ));
    }
    let k_required =
        ((p / (1.0 - p)).ln() + ((dim - degeneracy) / degeneracy).ln()) / (2.0 * (1.0 / eta).ln());
    Ok(PowerEstimate { eta, k_required })
}

/// Largest Schmidt entropy (bits) over all bipartitions.
pub fn max_entanglement_entropy(mpo: &DiagonalMpo) -> Result<f64> {
    Ok(mpo
        .entanglement_profile()?
        .into_iter()
        .fold(0.0f64, f64::max))
}

/// Zip-up product of two diagonal MPOs (pointwise product of the
/// represented diagonals), truncated by `policy`.
///
/// The result is swept into mixed canonical form with the center on the
/// first bond and normalized; the operands' log scales add, plus the
/// extracted normalization factor.
pub fn zipup_multiply(
    a: &DiagonalMpo,
    b: &DiagonalMpo,
    policy: &TruncationPolicy,
) -> Result<DiagonalMpo> {
    let n = a.num_sites();
    if n < 2 {
        return Err(Error::validation("zip-up needs at least 2 sites"));
    }
    if b.num_sites() != n || a.local_dims() != b.local_dims() {
        return Err(Error::shape("operand chains must match in length and local dims"));
    }

    let af = a.center_folded();
    let bf = b.center_folded();

    let mut sites: Vec<SiteTensor> = Vec::with_capacity(n);
    let mut carry = DenseTensor::new(vec![1, 1, 1], vec![1.0])?;
    for i in 0..n {
        let asite = af.sites()[i].tensor();
        let bsite = bf.sites()[i].tensor();
        let (la, d, ra) = (asite.shape()[0], asite.shape()[1], asite.shape()[2]);
        let (lb, rb) = (bsite.shape()[0], bsite.shape()[2]);
        let c = carry.shape()[0];
        debug_assert_eq!(carry.shape()[1], la);
        debug_assert_eq!(carry.shape()[2], lb);

        // Y[c, lb, d, ra] = sum_la carry[c, la, lb] A[la, d, ra]
        let y = contract(&carry, asite, &[(1, 0)])?;
        // Bring to [d, c, ra, lb] so each z-slice is a contiguous matrix.
        let y_perm = y.permuted(&[2, 0, 3, 1])?;

        // T[(c, z), (ra, rb)] = sum_lb Y[z][c, ra, lb] B[lb, z, rb]
        let mut t = vec![0.0f64; c * d * ra * rb];
        let zblock = c * ra * lb;
        for z in 0..d {
            let y_z = ArrayView2::from_shape(
                (c * ra, lb),
                &y_perm.data()[z * zblock..(z + 1) * zblock],
            )
            .expect("contiguous");
            let b_z = ArrayView2::from_shape(
                (lb, rb).strides((d * rb, 1)),
                &bsite.data()[z * rb..],
            )
            .expect("strided view");
            let out = y_z.dot(&b_z); // (c*ra, rb)
            for ci in 0..c {
                for rai in 0..ra {
                    let src = (ci * ra + rai) * rb;
                    let dst = (ci * d + z) * (ra * rb) + rai * rb;
                    t[dst..dst + rb].copy_from_slice(&out.as_slice().expect("std layout")[src..src + rb]);
                }
            }
        }

        if i + 1 == n {
            debug_assert_eq!(ra * rb, 1);
            sites.push(SiteTensor::new(DenseTensor::new(vec![c, d, 1], t)?)?);
        } else {
            let m = DenseTensor::new(vec![c * d, ra * rb], t)?;
            let svd = truncated_svd(&m, 1, policy)?;
            let k = svd.rank();
            sites.push(SiteTensor::new(svd.u.reshape(vec![c, d, k])?)?);
            let mut sv = svd.vt;
            scale_rows(&mut sv, &svd.s);
            carry = sv.reshape(vec![k, ra, rb])?;
        }
    }

    let product = DiagonalMpo::from_sites(sites, CanonicalForm::Left, af.log_scale() + bf.log_scale())?;
    product
        .canonicalized_with(TargetForm::Mixed(1), policy)?
        .normalized()
}

/// Raise `g` to the schedule's final power, recording diagnostics at each
/// checkpoint and invoking `observer` there with the current operator.
pub fn run_power_observed(
    g: &DiagonalMpo,
    schedule: Schedule,
    policy: &TruncationPolicy,
    checkpoints: &BTreeSet<u64>,
    mut observer: impl FnMut(u64, &DiagonalMpo) -> Result<()>,
) -> Result<(DiagonalMpo, PowerTrace)> {
    if g.num_sites() < 2 {
        return Err(Error::validation("power iteration needs at least 2 sites"));
    }
    let start = Instant::now();
    let mut trace = PowerTrace::default();

    let base = g
        .canonicalized_with(TargetForm::Mixed(1), policy)?
        .normalized()?;
    let mut acc = base.clone();
    let mut k = 1u64;
    if checkpoints.contains(&k) {
        record(&mut trace, k, &acc, &start)?;
        observer(k, &acc)?;
    }

    match schedule {
        Schedule::Linear { multiplications } => {
            for _ in 0..multiplications {
                acc = zipup_multiply(&acc, &base, policy)?;
                k += 1;
                if checkpoints.contains(&k) {
                    record(&mut trace, k, &acc, &start)?;
                    observer(k, &acc)?;
                }
            }
        }
        Schedule::Doubling { squarings } => {
            for _ in 0..squarings {
                acc = zipup_multiply(&acc, &acc, policy)?;
                k = k
                    .checked_mul(2)
                    .ok_or_else(|| Error::validation("power overflow"))?;
                if checkpoints.contains(&k) {
                    record(&mut trace, k, &acc, &start)?;
                    observer(k, &acc)?;
                }
            }
        }
    }
    Ok((acc, trace))
}

/// `run_power_observed` without an observer.
pub fn run_power(
    g: &DiagonalMpo,
    schedule: Schedule,
    policy: &TruncationPolicy,
    checkpoints: &BTreeSet<u64>,
) -> Result<(DiagonalMpo, PowerTrace)> {
    run_power_observed(g, schedule, policy, checkpoints, |_, _| Ok(()))
}

/// Checkpoint set `{1, 2, 4, ..., <= final}` plus the final power itself.
pub fn power_of_two_checkpoints(final_power: u64) -> BTreeSet<u64> {
    let mut set = BTreeSet::new();
    let mut k = 1u64;
    while k <= final_power {
        set.insert(k);
        if k > final_power / 2 {
            break;
        }
        k *= 2;
    }
    set.insert(final_power);
    set
}

fn record(trace: &mut PowerTrace, k: u64, mpo: &DiagonalMpo, start: &Instant) -> Result<()> {
    let profile = mpo.bond_profile();
    let max_bond = profile.iter().copied().max().unwrap_or(1);
    let max_entropy_bits = max_entanglement_entropy(mpo)?;
    trace.rows.push(TraceRow {
        k,
        m: if k.is_power_of_two() {
            Some(k.trailing_zeros())
        } else {
            None
        },
        bond_profile: profile,
        max_bond,
        max_entropy_bits,
        log_scale: mpo.log_scale(),
        seconds: start.elapsed().as_secs_f64(),
    });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{CostTerm, OptMode, PolynomialCost};
    use crate::mpo::build_mpo;

    fn toy_g() -> DiagonalMpo {
        let c =
            PolynomialCost::binary(2, vec![CostTerm::new(1.0, vec![(1, 1), (2, 1)])], 0.0).unwrap();
        let (g, _) = c.shifted(OptMode::Minimize, Some(1.0));
        build_mpo(&g, &TruncationPolicy::exact()).unwrap()
    }

    fn normalized_dense(mpo: &DiagonalMpo) -> Vec<f64> {
        let raw = mpo.dense_diagonal_raw().unwrap();
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        raw.iter().map(|v| v / norm).collect()
    }

    #[test]
    fn zipup_squares_toy_diagonal() {
        let g = toy_g();
        let policy = TruncationPolicy::new(4, 1e-15).unwrap();
        let sq = zipup_multiply(&g, &g, &policy).unwrap();
        let got = normalized_dense(&sq);
        let expect = [0.0, 4.0, 4.0, 0.0];
        let norm = (32.0f64).sqrt();
        for (a, b) in got.iter().zip(&expect) {
            assert!((a - b / norm).abs() < 1e-10, "{got:?}");
        }
        // log_scale reproduces the represented magnitude exactly.
        let rep = sq.dense_diagonal().unwrap();
        for (a, b) in rep.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn zipup_identity_is_neutral() {
        let g = toy_g();
        let id = DiagonalMpo::identity(&[2, 2]).unwrap();
        let policy = TruncationPolicy::new(8, 1e-15).unwrap();
        let prod = zipup_multiply(&id, &g, &policy).unwrap();
        let got = prod.dense_diagonal().unwrap();
        let expect = g.dense_diagonal().unwrap();
        for (a, b) in got.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn zipup_rejects_mismatched_chains() {
        let g = toy_g();
        let id3 = DiagonalMpo::identity(&[2, 2, 2]).unwrap();
        assert!(zipup_multiply(&g, &id3, &TruncationPolicy::exact()).is_err());
    }

    fn lcg_qubo(n: usize, seed: u64) -> PolynomialCost {
        let mut state = seed;
        let mut next = move || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
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
    fn zipup_square_matches_pointwise_square() {
        let cost = lcg_qubo(8, 5);
        let (g, _) = cost.shifted(OptMode::Minimize, None);
        let mpo = build_mpo(&g, &TruncationPolicy::exact()).unwrap();
        let policy = TruncationPolicy::new(64, 1e-15).unwrap();
        let sq = zipup_multiply(&mpo, &mpo, &policy).unwrap();
        let got = sq.dense_diagonal().unwrap();
        let mut scale = 0.0f64;
        let mut expect = Vec::with_capacity(256);
        for idx in 0..256usize {
            let z: Vec<usize> = (0..8).map(|b| (idx >> (7 - b)) & 1).collect();
            let v = g.evaluate(&z).unwrap();
            expect.push(v * v);
            scale = scale.max(v * v);
        }
        for (a, b) in got.iter().zip(&expect) {
            assert!((a - b).abs() <= 1e-8 * scale);
        }
    }

    #[test]
    fn run_power_zero_steps_returns_input() {
        let g = toy_g();
        let policy = TruncationPolicy::new(8, 1e-15).unwrap();
        let (out, trace) = run_power(
            &g,
            Schedule::Linear { multiplications: 0 },
            &policy,
            &BTreeSet::from([1]),
        )
        .unwrap();
        let got = normalized_dense(&out);
        let expect = normalized_dense(&g);
        for (a, b) in got.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(trace.rows.len(), 1);
        assert_eq!(trace.rows[0].k, 1);
    }

    #[test]
    fn doubling_two_steps_gives_fourth_power() {
        let g = toy_g();
        let policy = TruncationPolicy::new(8, 1e-15).unwrap();
        let (out, trace) = run_power(
            &g,
            Schedule::Doubling { squarings: 2 },
            &policy,
            &power_of_two_checkpoints(4),
        )
        .unwrap();
        let got = normalized_dense(&out);
        let expect = [0.0, 16.0, 16.0, 0.0];
        let norm = (2.0 * 256.0f64).sqrt();
        for (a, b) in got.iter().zip(&expect) {
            assert!((a - b / norm).abs() < 1e-10);
        }
        assert_eq!(
            trace.rows.iter().map(|r| r.k).collect::<Vec<_>>(),
            vec![1, 2, 4]
        );
        assert_eq!(trace.rows[2].m, Some(2));
    }

    #[test]
    fn linear_and_doubling_schedules_agree() {
        let cost = lcg_qubo(10, 9);
        let (g, _) = cost.shifted(OptMode::Minimize, None);
        let mpo = build_mpo(&g, &TruncationPolicy::exact()).unwrap();
        let policy = TruncationPolicy::new(64, 1e-15).unwrap();
        let (lin, _) = run_power(
            &mpo,
            Schedule::Linear { multiplications: 63 },
            &policy,
            &BTreeSet::new(),
        )
        .unwrap();
        let (dbl, _) = run_power(
            &mpo,
            Schedule::Doubling { squarings: 6 },
            &policy,
            &BTreeSet::new(),
        )
        .unwrap();
        let a = normalized_dense(&lin);
        let b = normalized_dense(&dbl);
        let peak = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (x, y) in a.iter().zip(&b) {
            if x.abs() > 1e-3 * peak {
                assert!(
                    ((x - y) / x).abs() < 1e-6,
                    "dominant entries diverged: {x} vs {y}"
                );
            }
        }
    }

    #[test]
    fn log_scale_reproduces_true_powers() {
        let cost = lcg_qubo(6, 13);
        let (g, _) = cost.shifted(OptMode::Minimize, None);
        let mpo = build_mpo(&g, &TruncationPolicy::exact()).unwrap();
        let policy = TruncationPolicy::new(64, 1e-15).unwrap();
        for k in [2u64, 4, 8, 16] {
            let (out, _) = run_power(
                &mpo,
                Schedule::Linear {
                    multiplications: (k - 1) as usize,
                },
                &policy,
                &BTreeSet::new(),
            )
            .unwrap();
            let got = out.dense_diagonal().unwrap();
            let mut scale = 0.0f64;
            let mut expect = Vec::with_capacity(64);
            for idx in 0..64usize {
                let z: Vec<usize> = (0..6).map(|b| (idx >> (5 - b)) & 1).collect();
                let v = g.evaluate(&z).unwrap().powi(k as i32);
                expect.push(v);
                scale = scale.max(v.abs());
            }
            for (a, b) in got.iter().zip(&expect) {
                assert!((a - b).abs() <= 1e-6 * scale, "K={k}");
            }
        }
    }

    #[test]
    fn trace_entropy_bounded_by_chi() {
        let cost = lcg_qubo(8, 17);
        let (g, _) = cost.shifted(OptMode::Minimize, None);
        let mpo = build_mpo(&g, &TruncationPolicy::exact()).unwrap();
        let chi = 8usize;
        let policy = TruncationPolicy::new(chi, 1e-15).unwrap();
        let (_, trace) = run_power(
            &mpo,
            Schedule::Doubling { squarings: 6 },
            &policy,
            &power_of_two_checkpoints(64),
        )
        .unwrap();
        for row in &trace.rows {
            assert!(row.max_entropy_bits <= (chi as f64).log2() + 1e-9);
            assert!(row.max_bond <= chi);
        }
    }

    #[test]
    fn estimate_eta_arithmetic() {
        let e = estimate_required_power(2.0, 0.0, 1.0, 1024.0, 1.0, 0.99).unwrap();
        assert!((e.eta - 0.5).abs() < 1e-15);
    }

    #[test]
    fn estimate_matches_closed_form_and_success_probability() {
        let e = estimate_required_power(2.0, 0.0, 1.0, 1024.0, 1.0, 0.99).unwrap();
        assert!((e.k_required - 8.314).abs() < 0.01, "{}", e.k_required);
        // Direct success-probability check at the rounded-up power.
        let k = e.k_required.ceil();
        let p = 1.0 / (1.0 + 1023.0 * 0.5f64.powf(2.0 * k));
        assert!(p >= 0.99);
    }

    #[test]
    fn estimate_degenerate_half_spectrum_needs_no_power() {
        let e = estimate_required_power(2.0, 0.0, 1.0, 1024.0, 512.0, 0.5).unwrap();
        assert!(e.k_required.abs() < 1e-12);
    }

    #[test]
    fn estimate_rejects_gapless() {
        assert!(estimate_required_power(2.0, 0.0, 0.0, 16.0, 1.0, 0.9).is_err());
        assert!(estimate_required_power(1.0, 0.0, 2.0, 16.0, 1.0, 0.9).is_err());
    }

    #[test]
    fn required_power_monotone_in_lambda_and_gap() {
        let mut prev = 0.0;
        for lambda in [2.0, 3.0, 5.0, 9.0] {
            let k = estimate_required_power(lambda, 0.0, 1.0, 4096.0, 2.0, 0.999)
                .unwrap()
                .k_required;
            assert!(k > prev, "K should grow with lambda");
            prev = k;
        }
        let mut prev = f64::INFINITY;
        for delta in [0.25, 0.5, 1.0, 2.0] {
            let k = estimate_required_power(8.0, 0.0, delta, 4096.0, 2.0, 0.999)
                .unwrap()
                .k_required;
            assert!(k < prev, "K should shrink with the gap");
            prev = k;
        }
    }

    #[test]
    fn product_state_entropy_is_zero() {
        let id = DiagonalMpo::identity(&[2, 2, 2]).unwrap();
        assert!(max_entanglement_entropy(&id).unwrap().abs() < 1e-12);
    }

    #[test]
    fn equal_pair_spectrum_is_one_bit() {
        // lambda = (1/sqrt(2), 1/sqrt(2)) at the only interior cut.
        let g = toy_g(); // diagonal (0,2,2,0): Schmidt values are equal
        let s = max_entanglement_entropy(&g).unwrap();
        assert!((s - 1.0).abs() < 1e-10);
    }

    #[test]
    fn checkpoint_helper_includes_final() {
        let c = power_of_two_checkpoints(48);
        assert!(c.contains(&1) && c.contains(&32) && c.contains(&48));
        assert!(!c.contains(&64));
    }
}
