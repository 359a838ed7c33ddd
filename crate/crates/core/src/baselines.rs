//! Reference solvers: exhaustive search and simulated annealing.
//!
//! `brute_force` is the ground-truth oracle at desk scale (guarded to 2^24
//! configurations). `simulated_annealing` is a transparent native-HUBO
//! single-spin-flip Metropolis baseline with a geometric inverse-temperature
//! ladder; it makes no attempt to reproduce any external package's defaults.

use crate::cost::{generator, PolynomialCost};
use crate::error::{Error, Result};
use crate::sampler::SampleSet;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Cap on configurations enumerated exhaustively.
pub const BRUTE_FORCE_GUARD: u128 = 1 << 24;
/// Cap on explicitly collected optimal configurations.
pub const OPTIMAL_SET_CAP: usize = 1_000_000;

#[derive(Debug, Clone)]
pub struct BruteForceResult {
    /// Exact minimum of the cost.
    pub optimum: f64,
    /// Number of optimal configurations.
    pub degeneracy: u64,
    /// The optimal configurations themselves, capped at `OPTIMAL_SET_CAP`.
    pub optimal_set: Vec<Vec<u8>>,
    pub optimal_set_truncated: bool,
}

/// Exhaustively minimize a cost over all configurations.
///
/// Ties are detected by exact float equality, which is the right notion for
/// integer-coefficient instances; continuous-coefficient instances are
/// generically non-degenerate.
pub fn brute_force(cost: &PolynomialCost) -> Result<BruteForceResult> {
    let total = cost.config_count();
    if total > BRUTE_FORCE_GUARD {
        return Err(Error::guard(format!(
            "2^{:.1} configurations exceed the exhaustive-search guard (2^24)",
            cost.log2_config_count()
        )));
    }
    let n = cost.num_sites();
    let dims = cost.local_dims().to_vec();

    // Group terms by their last factor site so each term is added exactly
    // once, as soon as all of its sites are fixed.
    let mut by_last: Vec<Vec<(f64, Vec<(usize, Vec<f64>)>)>> = vec![Vec::new(); n];
    for term in cost.terms() {
        let factors = term
            .factors
            .iter()
            .map(|&(site, k)| Ok((site - 1, generator(dims[site - 1], k)?.diagonal)))
            .collect::<Result<Vec<_>>>()?;
        let last = factors.last().expect("terms are non-constant").0;
        by_last[last].push((term.coeff, factors));
    }

    let mut best = f64::INFINITY;
    let mut degeneracy = 0u64;
    let mut optimal_set = Vec::new();
    let mut truncated = false;

    let mut z = vec![0u8; n];
    let mut partial = vec![0.0f64; n + 1];
    partial[0] = cost.offset();
    let mut level = 0usize;
    loop {
        if level == n {
            let energy = partial[n];
            if energy < best {
                best = energy;
                degeneracy = 1;
                optimal_set.clear();
                truncated = false;
                optimal_set.push(z.clone());
            } else if energy == best {
                degeneracy += 1;
                if optimal_set.len() < OPTIMAL_SET_CAP {
                    optimal_set.push(z.clone());
                } else {
                    truncated = true;
                }
            }
            // backtrack to the next configuration
            loop {
                if level == 0 {
                    return Ok(BruteForceResult {
                        optimum: best,
                        degeneracy,
                        optimal_set,
                        optimal_set_truncated: truncated,
                    });
                }
                level -= 1;
                if (z[level] as usize) + 1 < dims[level] {
                    z[level] += 1;
                    break;
                }
                z[level] = 0;
            }
        }
        // descend, accumulating the terms completed at this site
        let mut e = partial[level];
        for (coeff, factors) in &by_last[level] {
            let mut prod = *coeff;
            for (site, diag) in factors {
                prod *= diag[z[*site] as usize];
            }
            e += prod;
        }
        partial[level + 1] = e;
        level += 1;
    }
}

/// Geometric ladder from `beta_min` to `beta_max` inclusive.
pub fn geometric_beta_ladder(beta_min: f64, beta_max: f64, sweeps: usize) -> Vec<f64> {
    match sweeps {
        0 => Vec::new(),
        1 => vec![beta_min],
        _ => {
            let ratio = (beta_max / beta_min).powf(1.0 / (sweeps as f64 - 1.0));
            (0..sweeps)
                .map(|t| beta_min * ratio.powi(t as i32))
                .collect()
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SaParams {
    pub sweeps: usize,
    pub beta_min: f64,
    pub beta_max: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SaParams {
    fn default() -> Self {
        Self {
            sweeps: 1000,
            beta_min: 0.1,
            beta_max: 10.0,
            restarts: 100,
            seed: 0,
        }
    }
}

/// Single-spin-flip Metropolis annealing on a binary cost, run natively on
/// the HUBO terms (no order reduction).
///
/// Each restart draws an independent ChaCha8 stream from `(seed, restart)`,
/// starts from a uniform random configuration, performs `sweeps` full
/// sweeps along the geometric ladder, and reports the best configuration it
/// visited. Energy deltas come from the term-site incidence index: flipping
/// spin `i` negates every term product containing `i`.
pub fn simulated_annealing(cost: &PolynomialCost, params: &SaParams) -> Result<SampleSet> {
    if !cost.is_binary() {
        return Err(Error::validation(
            "simulated annealing supports binary sites only",
        ));
    }
    if params.restarts == 0 {
        return Err(Error::validation("need at least one restart"));
    }
    if !(params.beta_min > 0.0 && params.beta_max >= params.beta_min) {
        return Err(Error::validation("need 0 < beta_min <= beta_max"));
    }
    let n = cost.num_sites();
    let terms: Vec<(f64, Vec<usize>)> = cost
        .terms()
        .iter()
        .map(|t| {
            (
                t.coeff,
                t.factors.iter().map(|&(site, _)| site - 1).collect(),
            )
        })
        .collect();
    let mut incidence: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (ti, (_, sites)) in terms.iter().enumerate() {
        for &s in sites {
            incidence[s].push(ti);
        }
    }
    let ladder = geometric_beta_ladder(params.beta_min, params.beta_max, params.sweeps);

    let best_per_restart: Vec<(Vec<u8>, f64)> = (0..params.restarts)
        .into_par_iter()
        .map(|restart| run_restart(cost, &terms, &incidence, &ladder, params.seed, restart))
        .collect();

    let configs = best_per_restart.into_iter().map(|(z, _)| z).collect();
    SampleSet::from_configs(configs, cost, params.seed)
}

fn run_restart(
    cost: &PolynomialCost,
    terms: &[(f64, Vec<usize>)],
    incidence: &[Vec<usize>],
    ladder: &[f64],
    seed: u64,
    restart: usize,
) -> (Vec<u8>, f64) {
    let n = incidence.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);

    let mut spins: Vec<f64> = (0..n)
        .map(|_| if rng.next_u32() & 1 == 1 { -1.0 } else { 1.0 })
        .collect();
    let mut products: Vec<f64> = terms
        .iter()
        .map(|(h, sites)| sites.iter().fold(*h, |acc, &s| acc * spins[s]))
        .collect();
    let mut energy = cost.offset() + products.iter().sum::<f64>();

    let mut best_energy = energy;
    let mut best_spins = spins.clone();

    for &beta in ladder {
        for site in 0..n {
            let local: f64 = incidence[site].iter().map(|&t| products[t]).sum();
            let delta = -2.0 * local;
            let accept = delta <= 0.0 || rng.gen::<f64>() < (-beta * delta).exp();
            if accept {
                spins[site] = -spins[site];
                for &t in &incidence[site] {
                    products[t] = -products[t];
                }
                energy += delta;
                if energy < best_energy {
                    best_energy = energy;
                    best_spins = spins.clone();
                }
            }
        }
    }

    let z: Vec<u8> = best_spins.iter().map(|&s| if s > 0.0 { 0 } else { 1 }).collect();
    (z, best_energy)
}
