//! Benchmark problem families and instance (de)serialization.
//!
//! Two families ship with the crate: bimodal (±J) spin glasses on open
//! D-dimensional hypercubic lattices, and cubic HUBO instances on the
//! heavy-hexagonal lattice (a honeycomb of L x L cells with an extra vertex
//! on every edge; the degree-2 vertices host the three-body terms).
//!
//! Both generators fix a 1-D site ordering chosen to keep the compiled MPO
//! bond dimension small: hypercubic lattices use the mixed-radix coordinate
//! order `n(r) = 1 + sum_nu r_nu L^(nu-1)`, heavy-hex uses a row-major snake
//! over the planar embedding. Coefficients are drawn from `{−1, +1}` in a
//! fixed traversal order from a counter-based RNG, so an instance is fully
//! reproducible from `(family, parameters, seed)`.
//!
//! On-disk format: versioned JSON with 0-based site indices (the in-memory
//! model is 1-based).

use crate::cost::{CostTerm, PolynomialCost};
use crate::error::{Error, Result};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Open,
    Periodic,
}

/// Provenance of a generated instance, including the vertex-to-chain map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum InstanceMeta {
    Hypercubic {
        dim: usize,
        size: usize,
        seed: u64,
        boundary: Boundary,
        site_order: Vec<usize>,
    },
    Heavyhex {
        size: usize,
        seed: u64,
        site_order: Vec<usize>,
    },
    Custom,
}

/// A cost function plus the metadata needed to regenerate it.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub cost: PolynomialCost,
    pub meta: InstanceMeta,
}

fn pm_one(rng: &mut ChaCha8Rng) -> f64 {
    if rng.next_u32() & 1 == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Generate a ±J spin glass on the D-dimensional hypercubic lattice of
/// linear size L with nearest-neighbor couplings.
///
/// Sites are chained in mixed-radix coordinate order (first coordinate
/// fastest), which bounds the compiled MPO bond by `L^(D-1) + 2` for open
/// boundaries. Couplings are drawn edge by edge, vertices ascending and axes
/// ascending within a vertex.
pub fn gen_hypercubic(
    dim: usize,
    size: usize,
    seed: u64,
    boundary: Boundary,
) -> Result<ProblemInstance> {
    if dim < 1 {
        return Err(Error::validation("dimension must be >= 1"));
    }
    if size < 2 {
        return Err(Error::validation("linear size must be >= 2"));
    }
    let n = (size as u128).pow(dim as u32);
    if n > 1 << 20 {
        return Err(Error::guard("lattice too large"));
    }
    let n = n as usize;

    let mut strides = vec![1usize; dim];
    for nu in 1..dim {
        strides[nu] = strides[nu - 1] * size;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut terms = Vec::new();
    for v in 0..n {
        for nu in 0..dim {
            let coord = v / strides[nu] % size;
            if coord + 1 < size {
                let u = v + strides[nu];
                terms.push(CostTerm::new(pm_one(&mut rng), vec![(v + 1, 1), (u + 1, 1)]));
            } else if boundary == Boundary::Periodic && size > 2 {
                let u = v - (size - 1) * strides[nu];
                terms.push(CostTerm::new(pm_one(&mut rng), vec![(u + 1, 1), (v + 1, 1)]));
            }
        }
    }

    Ok(ProblemInstance {
        cost: PolynomialCost::binary(n, terms, 0.0)?,
        meta: InstanceMeta::Hypercubic {
            dim,
            size,
            seed,
            boundary,
            site_order: (0..n).collect(),
        },
    })
}

/// The heavy-hexagonal lattice of `L x L` cells as an explicit graph:
/// honeycomb vertices plus one midpoint vertex per honeycomb edge.
pub struct HeavyHexGraph {
    /// Total vertex count (`5L^2 + 8L - 1`).
    pub num_vertices: usize,
    /// Edges between original vertices and midpoints (`6L^2 + 8L - 2`).
    pub edges: Vec<(usize, usize)>,
    /// Planar coordinates `(y, x)` per vertex, used for the chain ordering.
    pub coords: Vec<(usize, usize)>,
    /// Vertices inserted as edge midpoints.
    pub midpoints: Vec<bool>,
}

/// Build the heavy-hex graph in a brick-wall embedding: honeycomb rows
/// `t = 0..=L` with columns `0..=2L+1`, trimmed at two corners, rungs
/// between consecutive rows at alternating column parity.
pub fn heavyhex_graph(size: usize) -> Result<HeavyHexGraph> {
    let l = size;
    if l < 1 {
        return Err(Error::validation("heavy-hex size must be >= 1"));
    }
    if l > 64 {
        return Err(Error::guard("heavy-hex lattice too large"));
    }
    let max_col = 2 * l + 1;

    let exists = |t: usize, c: usize| -> bool {
        if c > max_col {
            return false;
        }
        if t == 0 && c == max_col {
            return false; // trimmed corner
        }
        if t == l {
            // opposite trimmed corner depends on the rung parity at the
            // bottom row
            if l % 2 == 1 && c == max_col {
                return false;
            }
            if l % 2 == 0 && c == 0 {
                return false;
            }
        }
        true
    };

    let mut id: HashMap<(usize, usize), usize> = HashMap::new();
    let mut coords = Vec::new();
    for t in 0..=l {
        for c in 0..=max_col {
            if exists(t, c) {
                id.insert((t, c), coords.len());
                coords.push((2 * t, 2 * c));
            }
        }
    }
    let honey_vertices = coords.len();

    // Honeycomb edges with the midpoint coordinate each will carry.
    let mut honey_edges: Vec<(usize, usize, (usize, usize))> = Vec::new();
    for t in 0..=l {
        for c in 0..max_col {
            if exists(t, c) && exists(t, c + 1) {
                honey_edges.push((id[&(t, c)], id[&(t, c + 1)], (2 * t, 2 * c + 1)));
            }
        }
    }
    for t in 0..l {
        for c in 0..=max_col {
            if c % 2 == t % 2 && exists(t, c) && exists(t + 1, c) {
                honey_edges.push((id[&(t, c)], id[&(t + 1, c)], (2 * t + 1, 2 * c)));
            }
        }
    }

    let mut midpoints = vec![false; honey_vertices];
    let mut edges = Vec::with_capacity(2 * honey_edges.len());
    for &(u, v, mid_coord) in &honey_edges {
        let m = coords.len();
        coords.push(mid_coord);
        midpoints.push(true);
        edges.push((u, m));
        edges.push((m, v));
    }

    Ok(HeavyHexGraph {
        num_vertices: coords.len(),
        edges,
        coords,
        midpoints,
    })
}

/// Generate a cubic HUBO on the heavy-hex lattice: ±1 linear terms on all
/// vertices, ±1 quadratic terms on all edges, and a ±1 cubic term for every
/// degree-2 vertex with its two neighbors.
///
/// The chain ordering is a row-major snake over the planar embedding, which
/// keeps the compiled MPO bond near `L + 6`.
pub fn gen_heavyhex(size: usize, seed: u64) -> Result<ProblemInstance> {
    let graph = heavyhex_graph(size)?;
    let nv = graph.num_vertices;

    // Snake ordering: rows by y ascending, x ascending on even rows and
    // descending on odd rows.
    let mut order: Vec<usize> = (0..nv).collect();
    order.sort_by_key(|&v| {
        let (y, x) = graph.coords[v];
        let xkey = if y % 2 == 0 { x as i64 } else { -(x as i64) };
        (y, xkey)
    });
    let mut site_order = vec![0usize; nv]; // vertex id -> chain position (0-based)
    for (pos, &v) in order.iter().enumerate() {
        site_order[v] = pos;
    }

    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); nv];
    for &(u, v) in &graph.edges {
        adjacency[u].push(v);
        adjacency[v].push(u);
    }

    let chain = |v: usize| site_order[v] + 1; // 1-based chain site

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut terms = Vec::new();

    // Linear terms, chain order ascending.
    for pos in 0..nv {
        let v = order[pos];
        debug_assert_eq!(chain(v), pos + 1);
        terms.push(CostTerm::new(pm_one(&mut rng), vec![(pos + 1, 1)]));
    }

    // Quadratic terms on edges, sorted by chain endpoints.
    let mut chain_edges: Vec<(usize, usize)> = graph
        .edges
        .iter()
        .map(|&(u, v)| {
            let (a, b) = (chain(u), chain(v));
            (a.min(b), a.max(b))
        })
        .collect();
    chain_edges.sort_unstable();
    for &(a, b) in &chain_edges {
        terms.push(CostTerm::new(pm_one(&mut rng), vec![(a, 1), (b, 1)]));
    }

    // Cubic terms for degree-2 vertices, by chain position of the center.
    let mut cubic: Vec<(usize, usize, usize)> = (0..nv)
        .filter(|&v| adjacency[v].len() == 2)
        .map(|v| (chain(v), chain(adjacency[v][0]), chain(adjacency[v][1])))
        .collect();
    cubic.sort_unstable();
    for &(c, n1, n2) in &cubic {
        terms.push(CostTerm::new(
            pm_one(&mut rng),
            vec![(c, 1), (n1, 1), (n2, 1)],
        ));
    }

    Ok(ProblemInstance {
        cost: PolynomialCost::binary(nv, terms, 0.0)?,
        meta: InstanceMeta::Heavyhex {
            size,
            seed,
            site_order,
        },
    })
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    version: u32,
    num_sites: usize,
    local_dims: Vec<usize>,
    offset: f64,
    terms: Vec<TermFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    metadata: Option<InstanceMeta>,
}

#[derive(Serialize, Deserialize)]
struct TermFile {
    coeff: f64,
    factors: Vec<(usize, usize)>,
}

impl ProblemInstance {
    pub fn from_cost(cost: PolynomialCost) -> Self {
        Self {
            cost,
            meta: InstanceMeta::Custom,
        }
    }

    /// Canonical JSON bytes; identical inputs serialize identically.
    pub fn to_json_bytes(&self) -> Result<Vec<u8>> {
        let file = InstanceFile {
            version: 1,
            num_sites: self.cost.num_sites(),
            local_dims: self.cost.local_dims().to_vec(),
            offset: self.cost.offset(),
            terms: self
                .cost
                .terms()
                .iter()
                .map(|t| TermFile {
                    coeff: t.coeff,
                    factors: t.factors.iter().map(|&(s, k)| (s - 1, k)).collect(),
                })
                .collect(),
            metadata: match &self.meta {
                InstanceMeta::Custom => None,
                other => Some(other.clone()),
            },
        };
        let mut bytes = serde_json::to_vec(&file)?;
        bytes.push(b'\n');
        Ok(bytes)
    }

    pub fn from_json_bytes(bytes: &[u8]) -> Result<Self> {
        let file: InstanceFile = serde_json::from_slice(bytes)?;
        if file.version != 1 {
            return Err(Error::format(format!(
                "unsupported instance version {}",
                file.version
            )));
        }
        let terms = file
            .terms
            .into_iter()
            .map(|t| {
                for &(site, _) in &t.factors {
                    if site >= file.num_sites {
                        return Err(Error::format(format!(
                            "site index {site} out of range for {} sites",
                            file.num_sites
                        )));
                    }
                }
                Ok(CostTerm::new(
                    t.coeff,
                    t.factors.into_iter().map(|(s, k)| (s + 1, k)).collect(),
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let cost = PolynomialCost::new(file.num_sites, file.local_dims, terms, file.offset)
            .map_err(|e| Error::format(e.to_string()))?;
        Ok(Self {
            cost,
            meta: file.metadata.unwrap_or(InstanceMeta::Custom),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::from_json_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hypercubic_2x3_structure() {
        let inst = gen_hypercubic(2, 3, 7, Boundary::Open).unwrap();
        assert_eq!(inst.cost.num_sites(), 9);
        assert_eq!(inst.cost.num_terms(), 12); // open 3x3 grid edges
        // chain index of (r1, r2) = (1, 2) is 1 + 1 + 2*3 = 8
        let v = 1 + 2 * 3;
        assert_eq!(v + 1, 8);
    }

    #[test]
    fn hypercubic_chain_is_path() {
        let inst = gen_hypercubic(1, 5, 1, Boundary::Open).unwrap();
        assert_eq!(inst.cost.num_sites(), 5);
        assert_eq!(inst.cost.num_terms(), 4);
    }

    #[test]
    fn hypercubic_3d_edge_count() {
        let inst = gen_hypercubic(3, 3, 9, Boundary::Open).unwrap();
        assert_eq!(inst.cost.num_sites(), 27);
        assert_eq!(inst.cost.num_terms(), 54); // 3 * L^2 * (L-1)
    }

    #[test]
    fn hypercubic_periodic_adds_wrap_edges() {
        let inst = gen_hypercubic(2, 3, 2, Boundary::Periodic).unwrap();
        assert_eq!(inst.cost.num_terms(), 18); // 2 * L^2
    }

    #[test]
    fn couplings_are_bimodal() {
        let inst = gen_hypercubic(2, 4, 3, Boundary::Open).unwrap();
        assert!(inst.cost.terms().iter().all(|t| t.coeff.abs() == 1.0));
        let heavy = gen_heavyhex(2, 3).unwrap();
        assert!(heavy.cost.terms().iter().all(|t| t.coeff.abs() == 1.0));
    }

    #[test]
    fn heavyhex_counts_match_formulas() {
        for l in [1usize, 2, 3, 4, 10] {
            let g = heavyhex_graph(l).unwrap();
            assert_eq!(g.num_vertices, 5 * l * l + 8 * l - 1, "V at L={l}");
            assert_eq!(g.edges.len(), 6 * l * l + 8 * l - 2, "E at L={l}");
        }
    }

    #[test]
    fn heavyhex_term_structure() {
        let inst = gen_heavyhex(2, 5).unwrap();
        let nv = 35;
        assert_eq!(inst.cost.num_sites(), nv);
        let mut linear = 0;
        let mut quad = 0;
        let mut cubic = 0;
        for t in inst.cost.terms() {
            match t.factors.len() {
                1 => linear += 1,
                2 => quad += 1,
                3 => cubic += 1,
                _ => panic!("unexpected term degree"),
            }
        }
        assert_eq!(linear, nv);
        assert_eq!(quad, 38);
        // 19 midpoints plus the degree-2 boundary honeycomb vertices.
        assert!(cubic >= 19, "cubic terms {cubic}");
    }

    #[test]
    fn heavyhex_cubic_centers_have_degree_two() {
        let inst = gen_heavyhex(3, 1).unwrap();
        let graph = heavyhex_graph(3).unwrap();
        let InstanceMeta::Heavyhex { site_order, .. } = &inst.meta else {
            panic!()
        };
        // degree census in chain labels
        let mut degree = vec![0usize; graph.num_vertices];
        for &(u, v) in &graph.edges {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut degree_by_chain = vec![0usize; graph.num_vertices];
        let mut midpoint_by_chain = vec![false; graph.num_vertices];
        for v in 0..graph.num_vertices {
            degree_by_chain[site_order[v]] = degree[v];
            midpoint_by_chain[site_order[v]] = graph.midpoints[v];
        }
        let mut cubic_centers = std::collections::HashSet::new();
        for t in inst.cost.terms() {
            if t.factors.len() == 3 {
                // the degree-2 center is the factor adjacent to both others
                let found = t
                    .factors
                    .iter()
                    .filter(|&&(site, _)| degree_by_chain[site - 1] == 2)
                    .count();
                assert!(found >= 1, "cubic term without degree-2 center");
                for &(site, _) in &t.factors {
                    if degree_by_chain[site - 1] == 2 {
                        cubic_centers.insert(site - 1);
                    }
                }
            }
        }
        // every midpoint appears as some cubic center
        for pos in 0..graph.num_vertices {
            if midpoint_by_chain[pos] {
                assert!(cubic_centers.contains(&pos));
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = gen_hypercubic(2, 4, 11, Boundary::Open).unwrap();
        let b = gen_hypercubic(2, 4, 11, Boundary::Open).unwrap();
        assert_eq!(a.to_json_bytes().unwrap(), b.to_json_bytes().unwrap());
        let c = gen_hypercubic(2, 4, 12, Boundary::Open).unwrap();
        assert_ne!(a.to_json_bytes().unwrap(), c.to_json_bytes().unwrap());

        let h1 = gen_heavyhex(2, 11).unwrap();
        let h2 = gen_heavyhex(2, 11).unwrap();
        assert_eq!(h1.to_json_bytes().unwrap(), h2.to_json_bytes().unwrap());
    }

    #[test]
    fn round_trip_preserves_evaluation() {
        let inst = gen_heavyhex(2, 9).unwrap();
        let bytes = inst.to_json_bytes().unwrap();
        let back = ProblemInstance::from_json_bytes(&bytes).unwrap();
        assert_eq!(inst.meta, back.meta);
        let mut state = 1u64;
        for _ in 0..100 {
            let z: Vec<usize> = (0..inst.cost.num_sites())
                .map(|_| {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
                    (state >> 60) as usize & 1
                })
                .collect();
            assert_eq!(
                inst.cost.evaluate(&z).unwrap(),
                back.cost.evaluate(&z).unwrap()
            );
        }
    }

    #[test]
    fn hand_written_file_loads() {
        let json = br#"{"version":1,"num_sites":2,"local_dims":[2,2],"offset":0.0,"terms":[{"coeff":1.0,"factors":[[0,1],[1,1]]}]}"#;
        let inst = ProblemInstance::from_json_bytes(json).unwrap();
        assert_eq!(inst.meta, InstanceMeta::Custom);
        assert_eq!(inst.cost.evaluate(&[0, 1]).unwrap(), -1.0);
    }

    #[test]
    fn rejects_out_of_range_site() {
        let json = br#"{"version":1,"num_sites":2,"local_dims":[2,2],"offset":0.0,"terms":[{"coeff":1.0,"factors":[[2,1]]}]}"#;
        assert!(ProblemInstance::from_json_bytes(json).is_err());
    }

    #[test]
    fn rejects_wrong_version() {
        let json = br#"{"version":9,"num_sites":1,"local_dims":[2],"offset":0.0,"terms":[]}"#;
        assert!(ProblemInstance::from_json_bytes(json).is_err());
    }
}
