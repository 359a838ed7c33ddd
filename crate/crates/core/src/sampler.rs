//! MPS embedding and perfect sampling.
//!
//! A diagonal MPO embeds into a pure state by relabeling each site's
//! operator-diagonal leg as a state leg and scaling by `1/sqrt(d)`: the
//! amplitude of `|z>` is then proportional to the operator's diagonal entry
//! at `z`, so sampling probabilities are the squared (power-amplified)
//! diagonal. Sampling draws exact i.i.d. configurations site by site from a
//! right-canonical MPS.
//!
//! RNG contract: every draw uses a ChaCha8 counter-based stream derived from
//! `(seed, draw index)`, so any partition of draws into parallel batches
//! reproduces bit-exactly.

use crate::cost::PolynomialCost;
use crate::error::{Error, Result};
use crate::mpo::{right_sweep, DiagonalMpo, SiteTensor, DENSE_GUARD};
use crate::tensor::TruncationPolicy;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;
use std::io::Write;

/// A matrix product state over the chain, stored as `[left, phys, right]`
/// site tensors. `log_norm` accumulates extracted scale factors; the stored
/// tensors of a right-canonical MPS contract to a unit-norm state.
#[derive(Debug, Clone)]
pub struct Mps {
    sites: Vec<SiteTensor>,
    right_canonical: bool,
    log_norm: f64,
}

impl Mps {
    /// Embed a diagonal MPO as a state: `|Psi> ∝ G |+...+>`.
    pub fn embed(mpo: &DiagonalMpo) -> Self {
        let folded = mpo.center_folded();
        let mut log_norm = folded.log_scale();
        let sites = folded
            .sites()
            .iter()
            .map(|s| {
                let mut t = s.tensor().clone();
                let d = s.phys_dim() as f64;
                t.scale(1.0 / d.sqrt());
                log_norm += d.sqrt().ln();
                SiteTensor::new(t).expect("shape preserved")
            })
            .collect();
        Self {
            sites,
            right_canonical: false,
            log_norm,
        }
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

    pub fn is_right_canonical(&self) -> bool {
        self.right_canonical
    }

    pub fn log_norm(&self) -> f64 {
        self.log_norm
    }

    /// Right-canonicalize and normalize: afterwards the stored tensors
    /// contract to a unit-norm state and sampling is well defined.
    pub fn right_canonicalized(&self) -> Result<Self> {
        let mut sites = self.sites.clone();
        let n = sites.len();
        if n > 1 {
            right_sweep(&mut sites, n - 1, 1, &TruncationPolicy::lossless())?;
        }
        let head = sites[0].tensor().clone();
        let norm = head.frobenius_norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::numerical("state has zero or non-finite norm"));
        }
        let mut head = head;
        head.scale(1.0 / norm);
        sites[0] = SiteTensor::new(head)?;
        Ok(Self {
            sites,
            right_canonical: true,
            log_norm: self.log_norm + norm.ln(),
        })
    }

    /// Amplitudes of the stored (normalized) tensors for every basis state,
    /// in row-major configuration order. Guarded like the dense diagonal.
    pub fn dense_amplitudes(&self) -> Result<Vec<f64>> {
        let total = self
            .local_dims()
            .iter()
            .fold(1u128, |a, &d| a.saturating_mul(d as u128));
        if total > DENSE_GUARD {
            return Err(Error::guard("state too large to expand densely"));
        }
        let mut out = Vec::with_capacity(total as usize);
        amp_recurse(&self.sites, 0, &[1.0], &mut out);
        Ok(out)
    }
}

fn amp_recurse(sites: &[SiteTensor], level: usize, env: &[f64], out: &mut Vec<f64>) {
    if level == sites.len() {
        out.push(env[0]);
        return;
    }
    let t = sites[level].tensor();
    let (_, d, r) = (t.shape()[0], t.shape()[1], t.shape()[2]);
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
        amp_recurse(sites, level + 1, &next, out);
    }
}

/// Sampled configurations with their energies under the original cost.
#[derive(Debug, Clone)]
pub struct SampleSet {
    pub draws: Vec<(Vec<u8>, f64)>,
    pub seed: u64,
    pub num_draws: usize,
}

impl SampleSet {
    pub fn from_configs(configs: Vec<Vec<u8>>, cost: &PolynomialCost, seed: u64) -> Result<Self> {
        let mut draws = Vec::with_capacity(configs.len());
        for z in configs {
            let zu: Vec<usize> = z.iter().map(|&v| v as usize).collect();
            let energy = cost.evaluate(&zu)?;
            draws.push((z, energy));
        }
        let num_draws = draws.len();
        Ok(Self {
            draws,
            seed,
            num_draws,
        })
    }

    pub fn min_energy(&self) -> Option<f64> {
        self.draws
            .iter()
            .map(|(_, e)| *e)
            .min_by(|a, b| a.partial_cmp(b).expect("finite energies"))
    }

    pub fn mean_energy(&self) -> Option<f64> {
        if self.draws.is_empty() {
            return None;
        }
        Some(self.draws.iter().map(|(_, e)| e).sum::<f64>() / self.draws.len() as f64)
    }

    pub fn std_energy(&self) -> Option<f64> {
        let mean = self.mean_energy()?;
        let var = self
            .draws
            .iter()
            .map(|(_, e)| (e - mean) * (e - mean))
            .sum::<f64>()
            / self.draws.len() as f64;
        Some(var.sqrt())
    }

    /// JSON-lines emission: one `{"z": "...", "energy": ...}` per draw.
    /// Configurations print as digit strings for local dimensions up to 10
    /// and comma-separated symbols otherwise.
    pub fn write_jsonl(&self, mut w: impl Write) -> Result<()> {
        for (z, energy) in &self.draws {
            let zstr = config_string(z);
            let line = serde_json::json!({ "z": zstr, "energy": energy });
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

pub fn config_string(z: &[u8]) -> String {
    if z.iter().all(|&v| v < 10) {
        z.iter().map(|&v| char::from(b'0' + v)).collect()
    } else {
        z.iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Number of distinct configurations in the set.
pub fn unique_count(samples: &SampleSet) -> usize {
    samples
        .draws
        .iter()
        .map(|(z, _)| z.as_slice())
        .collect::<HashSet<_>>()
        .len()
}

/// Approximation ratio: best sampled cost over the optimum.
pub fn approximation_ratio(samples: &SampleSet, optimum: f64) -> Result<f64> {
    if optimum == 0.0 {
        return Err(Error::validation(
            "approximation ratio undefined for zero optimum; report the energy gap instead",
        ));
    }
    let best = samples
        .min_energy()
        .ok_or_else(|| Error::validation("empty sample set"))?;
    Ok(best / optimum)
}

/// Draw `n` exact samples from `|<z|Psi>|^2`; deterministic for a given
/// seed. `psi` must be right-canonical.
pub fn perfect_sample(psi: &Mps, n: usize, seed: u64) -> Result<Vec<Vec<u8>>> {
    if !psi.right_canonical {
        return Err(Error::validation("perfect sampling needs a right-canonical MPS"));
    }
    (0..n).map(|i| sample_one(psi, seed, i as u64)).collect()
}

/// Convenience wrapper attaching energies from the original cost.
pub fn perfect_sample_set(
    psi: &Mps,
    cost: &PolynomialCost,
    n: usize,
    seed: u64,
) -> Result<SampleSet> {
    SampleSet::from_configs(perfect_sample(psi, n, seed)?, cost, seed)
}

fn sample_one(psi: &Mps, seed: u64, draw: u64) -> Result<Vec<u8>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(draw);

    let mut z = Vec::with_capacity(psi.sites.len());
    let mut env = vec![1.0f64];
    let mut weights = Vec::new();
    let mut envs: Vec<Vec<f64>> = Vec::new();
    for site in &psi.sites {
        let t = site.tensor();
        let (l, d, r) = (t.shape()[0], t.shape()[1], t.shape()[2]);
        debug_assert_eq!(env.len(), l);
        let data = t.data();
        weights.clear();
        envs.clear();
        let mut total = 0.0;
        for zi in 0..d {
            let mut next = vec![0.0f64; r];
            for (a, &e) in env.iter().enumerate() {
                if e == 0.0 {
                    continue;
                }
                let base = (a * d + zi) * r;
                for b in 0..r {
                    next[b] += e * data[base + b];
                }
            }
            let w: f64 = next.iter().map(|v| v * v).sum();
            total += w;
            weights.push(w);
            envs.push(next);
        }
        // With a right-canonical gauge and a unit-norm prefix environment
        // the conditional weights must sum to one.
        if (1.0 - total).abs() > 1e-8 {
            return Err(Error::numerical(format!(
                "conditional probabilities sum to {total}; gauge is broken"
            )));
        }
        for w in weights.iter_mut() {
            if *w < 0.0 {
                if *w < -1e-12 {
                    return Err(Error::numerical("negative conditional probability"));
                }
                *w = 0.0;
            }
        }
        let u: f64 = rng.gen::<f64>() * total;
        let mut cum = 0.0;
        let mut chosen = d - 1;
        for (zi, &w) in weights.iter().enumerate() {
            cum += w;
            if u < cum {
                chosen = zi;
                break;
            }
        }
        // Skip zero-probability tail picks caused by rounding.
        while weights[chosen] <= 0.0 {
            chosen = (chosen + d - 1) % d;
        }
        z.push(chosen as u8);
        let w = weights[chosen].sqrt();
        env = envs[chosen].iter().map(|v| v / w).collect();
    }
    Ok(z)
}
