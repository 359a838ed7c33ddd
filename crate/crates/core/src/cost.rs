//! Sparse multilinear cost functions over qudit diagonal generators.
//!
//! A cost `C(z)` over a chain of qudits is stored as an expansion in the
//! traceless diagonal generator basis: a constant offset plus terms
//! `h * Z^(k_1)_{s_1} ... Z^(k_m)_{s_m}` on strictly increasing sites. For
//! binary sites the `k = 1` generator is Pauli-Z with the convention
//! `z = 0 -> +1`, `z = 1 -> -1`.

use crate::error::{Error, Result};
use std::collections::HashMap;

/// One diagonal generator of SU(d): `k = 0` is the identity, `k > 0` is
/// `sqrt(d / (k (k+1))) * diag(1, ..., 1, -k, 0, ..., 0)` with `k` ones.
///
/// The family is orthogonal under the Hilbert-Schmidt inner product with
/// `Tr(Z^(k) Z^(l)) = d delta_{k,l}` and traceless for `k > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuditGenerator {
    pub d: usize,
    pub k: usize,
    pub diagonal: Vec<f64>,
}

/// Build the generator `Z^(k)` for local dimension `d`.
pub fn generator(d: usize, k: usize) -> Result<QuditGenerator> {
    if d < 2 {
        return Err(Error::validation("local dimension must be >= 2"));
    }
    if k >= d {
        return Err(Error::validation(format!(
            "generator index {k} out of range for d={d}"
        )));
    }
    let diagonal = if k == 0 {
        vec![1.0; d]
    } else {
        let norm = (d as f64 / (k as f64 * (k as f64 + 1.0))).sqrt();
        let mut diag = vec![0.0; d];
        for entry in diag.iter_mut().take(k) {
            *entry = norm;
        }
        diag[k] = -(k as f64) * norm;
        diag
    };
    Ok(QuditGenerator { d, k, diagonal })
}

/// One expansion term: a coefficient and its non-identity factors as
/// `(site, k)` pairs with 1-based, strictly increasing sites and `k >= 1`.
/// An empty factor list is the constant term (normally folded into the
/// cost's offset instead).
#[derive(Debug, Clone, PartialEq)]
pub struct CostTerm {
    pub coeff: f64,
    pub factors: Vec<(usize, usize)>,
}

impl CostTerm {
    pub fn new(coeff: f64, mut factors: Vec<(usize, usize)>) -> Self {
        factors.sort_unstable_by_key(|&(site, _)| site);
        Self { coeff, factors }
    }
}

/// A cost function as a merged, validated term expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialCost {
    num_sites: usize,
    local_dims: Vec<usize>,
    terms: Vec<CostTerm>,
    offset: f64,
    /// Per-term factor diagonals resolved at construction: for each term the
    /// list of `(0-based site, generator diagonal)`.
    factor_tables: Vec<Vec<(usize, Vec<f64>)>>,
}

impl PolynomialCost {
    /// Validate, merge duplicate factor-sets, fold constant terms into the
    /// offset, and sort terms canonically.
    pub fn new(
        num_sites: usize,
        local_dims: Vec<usize>,
        terms: Vec<CostTerm>,
        offset: f64,
    ) -> Result<Self> {
        if num_sites == 0 {
            return Err(Error::validation("cost needs at least one site"));
        }
        if local_dims.len() != num_sites {
            return Err(Error::validation("local_dims length must equal num_sites"));
        }
        if local_dims.iter().any(|&d| d < 2) {
            return Err(Error::validation("every local dimension must be >= 2"));
        }

        let mut offset = offset;
        let mut merged: HashMap<Vec<(usize, usize)>, f64> = HashMap::new();
        let mut order: Vec<Vec<(usize, usize)>> = Vec::new();
        for term in terms {
            let t = CostTerm::new(term.coeff, term.factors);
            for w in t.factors.windows(2) {
                if w[0].0 == w[1].0 {
                    return Err(Error::validation(format!(
                        "repeated site {} within a term",
                        w[0].0
                    )));
                }
            }
            for &(site, k) in &t.factors {
                if site == 0 || site > num_sites {
                    return Err(Error::validation(format!(
                        "site {site} out of range 1..={num_sites}"
                    )));
                }
                if k == 0 || k >= local_dims[site - 1] {
                    return Err(Error::validation(format!(
                        "generator index {} invalid for site {} (d={})",
                        k,
                        site,
                        local_dims[site - 1]
                    )));
                }
            }
            if t.factors.is_empty() {
                offset += t.coeff;
                continue;
            }
            match merged.entry(t.factors.clone()) {
                std::collections::hash_map::Entry::Occupied(mut e) => *e.get_mut() += t.coeff,
                std::collections::hash_map::Entry::Vacant(e) => {
                    e.insert(t.coeff);
                    order.push(t.factors);
                }
            }
        }
        order.sort_unstable();
        let terms: Vec<CostTerm> = order
            .into_iter()
            .map(|factors| CostTerm {
                coeff: merged[&factors],
                factors,
            })
            .collect();

        let factor_tables = terms
            .iter()
            .map(|t| {
                t.factors
                    .iter()
                    .map(|&(site, k)| {
                        let diag = generator(local_dims[site - 1], k)?.diagonal;
                        Ok((site - 1, diag))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;

        Ok(Self {
            num_sites,
            local_dims,
            terms,
            offset,
            factor_tables,
        })
    }

    /// Convenience constructor for all-binary chains.
    pub fn binary(num_sites: usize, terms: Vec<CostTerm>, offset: f64) -> Result<Self> {
        Self::new(num_sites, vec![2; num_sites], terms, offset)
    }

    pub fn num_sites(&self) -> usize {
        self.num_sites
    }

    pub fn local_dims(&self) -> &[usize] {
        &self.local_dims
    }

    pub fn terms(&self) -> &[CostTerm] {
        &self.terms
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Total configuration count, saturating at `u128::MAX`.
    pub fn config_count(&self) -> u128 {
        self.local_dims
            .iter()
            .fold(1u128, |acc, &d| acc.saturating_mul(d as u128))
    }

    /// log2 of the configuration count (usable far beyond u128).
    pub fn log2_config_count(&self) -> f64 {
        self.local_dims.iter().map(|&d| (d as f64).log2()).sum()
    }

    pub fn is_binary(&self) -> bool {
        self.local_dims.iter().all(|&d| d == 2)
    }

    /// Evaluate `C(z)` for a configuration with `z[i]` in `0..local_dims[i]`.
    pub fn evaluate(&self, z: &[usize]) -> Result<f64> {
        if z.len() != self.num_sites {
            return Err(Error::validation("configuration length mismatch"));
        }
        for (i, (&zi, &d)) in z.iter().zip(&self.local_dims).enumerate() {
            if zi >= d {
                return Err(Error::validation(format!(
                    "symbol {zi} out of range at site {} (d={d})",
                    i + 1
                )));
            }
        }
        Ok(self.evaluate_unchecked(z))
    }

    pub(crate) fn evaluate_unchecked(&self, z: &[usize]) -> f64 {
        let mut total = self.offset;
        for (term, table) in self.terms.iter().zip(&self.factor_tables) {
            let mut prod = term.coeff;
            for (site0, diag) in table {
                prod *= diag[z[*site0]];
            }
            total += prod;
        }
        total
    }

    /// Conservative spectral bound `Lambda = sum_j |h_j| * prod_i
    /// max|diag of factor i| + |offset|`, guaranteeing
    /// `Lambda >= max_z |C(z)|`.
    pub fn lambda_bound(&self) -> f64 {
        let mut bound = self.offset.abs();
        for (term, table) in self.terms.iter().zip(&self.factor_tables) {
            let mut mag = term.coeff.abs();
            for (_, diag) in table {
                mag *= diag.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
            }
            bound += mag;
        }
        bound
    }

    /// The shifted/scaled expansion of `G = a H + b I` for the requested
    /// optimization direction, together with the `(a, b)` actually applied.
    ///
    /// Minimize: `(a, b) = (-1, Lambda)`, so the result evaluates to
    /// `Lambda - C(z)`. Maximize: the sign flip, evaluating to
    /// `Lambda + C(z)`. With `Lambda >= max_z |C(z)|` (the default
    /// `lambda_bound`) the result is non-negative on every configuration and
    /// the target configurations carry the largest values.
    pub fn shifted(&self, mode: OptMode, lambda: Option<f64>) -> (PolynomialCost, ShiftScale) {
        let lambda = lambda.unwrap_or_else(|| self.lambda_bound());
        let a = match mode {
            OptMode::Minimize => -1.0,
            OptMode::Maximize => 1.0,
        };
        let shift = ShiftScale { a, b: lambda, lambda };
        let terms = self
            .terms
            .iter()
            .map(|t| CostTerm {
                coeff: a * t.coeff,
                factors: t.factors.clone(),
            })
            .collect();
        let shifted = PolynomialCost::new(
            self.num_sites,
            self.local_dims.clone(),
            terms,
            a * self.offset + lambda,
        )
        .expect("shifted expansion of a valid cost is valid");
        (shifted, shift)
    }
}

/// Optimization direction for the spectral shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptMode {
    Minimize,
    Maximize,
}

/// The `(a, b)` pair of `G = a H + b I` plus the shift magnitude used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftScale {
    pub a: f64,
    pub b: f64,
    pub lambda: f64,
}
