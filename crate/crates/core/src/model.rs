//! Lattice geometry and model operators: the diagonal magnetic Hamiltonian,
//! the per-link electric Hamiltonian, Gauss-law operators, the physical-sector
//! projector, and dimension accounting.
//!
//! Geometry: periodic ladders of `n` plaquettes with `n` vertices, horizontal
//! links `0..n` and vertical self-loop links `n..2n`. Vertex `v` touches its
//! outgoing horizontal link `v`, the ingoing horizontal link `(v-1) mod n`,
//! and the vertical link `n+v` with both ends (self-loop).

use ndarray::Array2;
use num_complex::Complex64;

use crate::group::{FiniteGroup, IDENTITY};
use crate::linalg::dagger;
use crate::statevec::{full_permutation, QuditState};
use crate::{Error, Result};

/// How a link-end attaches to a vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EndTag {
    /// Outgoing: the vertex acts by left multiplication.
    Out,
    /// Ingoing: the vertex acts by right multiplication.
    In,
    /// Self-loop vertical link, both ends at the vertex: combined left and
    /// right action (conjugation).
    Both,
}

#[derive(Debug, Clone)]
pub struct LatticeGeometry {
    pub n_plaquettes: usize,
    pub n_links: usize,
    /// Per vertex: incident `(link, tag)` pairs.
    pub vertices: Vec<Vec<(usize, EndTag)>>,
    /// Per plaquette: ordered `(link, daggered)` factors, four per plaquette.
    pub plaquettes: Vec<Vec<(usize, bool)>>,
}

/// Periodic ladder with `n >= 2` plaquettes.
///
/// For `n = 2` this reproduces the two-plaquette, two-vertex geometry with
/// plaquettes `P1 = (U0, U3, U0^dag, U2^dag)` and `P2 = (U1, U2, U1^dag,
/// U3^dag)` and vertex operators
/// `Theta_{g,v1} = Theta^L (x) Theta^R (x) Theta^L Theta^R (x) 1` on
/// `(U0, U1, U2, U3)`.
pub fn ladder_geometry(n: usize) -> LatticeGeometry {
    assert!(n >= 2, "ladder needs at least two plaquettes");
    let vertices = (0..n)
        .map(|v| {
            vec![
                (v, EndTag::Out),
                ((v + n - 1) % n, EndTag::In),
                (n + v, EndTag::Both),
            ]
        })
        .collect();
    let plaquettes = (0..n)
        .map(|p| {
            vec![
                (p, false),
                (n + (p + 1) % n, false),
                (p, true),
                (n + p, true),
            ]
        })
        .collect();
    LatticeGeometry {
        n_plaquettes: n,
        n_links: 2 * n,
        vertices,
        plaquettes,
    }
}

impl LatticeGeometry {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CouplingParams {
    /// The magnetic coupling `1/g^2`; lattice spacing is fixed to 1, so all
    /// times are `t/a` and energies are in units of `1/a`.
    pub inv_g2: f64,
}

impl CouplingParams {
    pub fn new(inv_g2: f64) -> Result<CouplingParams> {
        if inv_g2 <= 0.0 {
            return Err(Error::Config("inv_g2 must be positive".into()));
        }
        Ok(CouplingParams { inv_g2 })
    }
}

/// Per-basis-index value of `Re Tr` of the plaquette product for plaquette `p`.
///
/// Every connection operator is diagonal in the group-element basis, so the
/// plaquette term reduces to the character of the product element.
pub fn plaquette_trace_table(
    geom: &LatticeGeometry,
    group: &FiniteGroup,
    irrep_label: &str,
    p: usize,
) -> Vec<f64> {
    let irrep = group.irrep(irrep_label).expect("irrep exists");
    let d = group.order;
    let dim = d.pow(geom.n_links as u32);
    let factors = &geom.plaquettes[p];
    let mut table = Vec::with_capacity(dim);
    for i in 0..dim {
        let mut digits = [0usize; 16];
        let mut rem = i;
        for digit in digits.iter_mut().take(geom.n_links) {
            *digit = rem % d;
            rem /= d;
        }
        let mut prod = IDENTITY;
        for &(link, daggered) in factors {
            let e = if daggered {
                group.inverse(digits[link])
            } else {
                digits[link]
            };
            prod = group.multiply(prod, e);
        }
        table.push(irrep.characters[prod].re);
    }
    table
}

/// The diagonal magnetic Hamiltonian as a value table over basis indices:
/// entry `i` is `-(1/g^2) sum_p Re Tr` of the plaquette product at
/// configuration `i`.
pub fn magnetic_phase_table(
    geom: &LatticeGeometry,
    coupling: CouplingParams,
    group: &FiniteGroup,
    irrep_label: &str,
) -> Vec<f64> {
    let d = group.order;
    let dim = d.pow(geom.n_links as u32);
    let mut table = vec![0.0; dim];
    for p in 0..geom.n_plaquettes {
        let tr = plaquette_trace_table(geom, group, irrep_label, p);
        for (t, v) in table.iter_mut().zip(tr.iter()) {
            *t -= coupling.inv_g2 * v;
        }
    }
    table
}

/// The per-link electric Hamiltonian `H_E = -ln T_E` derived from the Wilson
/// transfer matrix, diagonalized in the group Fourier basis.
#[derive(Debug, Clone)]
pub struct ElectricLink {
    /// Dense `|G| x |G|` Hermitian matrix in the group-element basis.
    pub matrix: Array2<Complex64>,
    /// Eigenvalues ordered by Fourier column `(j, m, n)`; columns of the same
    /// irrep share their eigenvalue (degeneracy `dim(j)^2`).
    pub eigenvalues: Vec<f64>,
    pub fourier: Array2<Complex64>,
}

impl ElectricLink {
    /// Propagator `exp(-i H_E dt)` on one link.
    pub fn propagator(&self, dt: f64) -> Array2<Complex64> {
        let n = self.matrix.nrows();
        let mut diag = Array2::zeros((n, n));
        for (k, &e) in self.eigenvalues.iter().enumerate() {
            diag[[k, k]] = Complex64::from_polar(1.0, -e * dt);
        }
        self.fourier.dot(&diag).dot(&dagger(&self.fourier))
    }
}

/// Builds the transfer-matrix kernel `K[g'][g] = exp(inv_g2 Re chi(g'^{-1} g))`
/// (a class-function kernel, hence diagonal in the Fourier basis), checks
/// positivity, and returns `H_E = -F ln(Lambda) F^dag`.
///
/// The additive constant is kept exactly as `-ln` of the transfer eigenvalues;
/// no re-zeroing.
pub fn electric_link_hamiltonian(
    coupling: CouplingParams,
    group: &FiniteGroup,
    irrep_label: &str,
) -> Result<ElectricLink> {
    let n = group.order;
    let irrep = group
        .irrep(irrep_label)
        .ok_or_else(|| Error::Config(format!("unknown irrep {irrep_label}")))?;
    let kernel = Array2::from_shape_fn((n, n), |(gp, g)| {
        let rel = group.multiply(group.inverse(gp), g);
        Complex64::new((coupling.inv_g2 * irrep.characters[rel].re).exp(), 0.0)
    });
    let fourier = group.fourier_matrix()?;
    let diag = dagger(&fourier).dot(&kernel).dot(&fourier);
    let mut eigenvalues = Vec::with_capacity(n);
    for k in 0..n {
        for l in 0..n {
            if k != l && diag[[k, l]].norm() > 1e-9 {
                return Err(Error::Numerics(format!(
                    "transfer matrix not diagonal in the Fourier basis at ({k},{l})"
                )));
            }
        }
        let lambda = diag[[k, k]].re;
        if lambda <= 0.0 {
            return Err(Error::Numerics(format!(
                "non-positive transfer-matrix eigenvalue {lambda} at column {k}; invalid coupling regime"
            )));
        }
        eigenvalues.push(-lambda.ln());
    }
    // Degeneracy dim(j)^2 per irrep: columns of one irrep share the eigenvalue.
    let cols = group.fourier_columns();
    for (c, &(j, _, _)) in cols.iter().enumerate() {
        let first = cols.iter().position(|&(jj, _, _)| jj == j).unwrap();
        if (eigenvalues[c] - eigenvalues[first]).abs() > 1e-9 {
            return Err(Error::Numerics(
                "electric eigenvalues not degenerate within an irrep".into(),
            ));
        }
    }
    let mut matrix = Array2::zeros((n, n));
    let mut diag_h = Array2::zeros((n, n));
    for (k, &e) in eigenvalues.iter().enumerate() {
        diag_h[[k, k]] = Complex64::new(e, 0.0);
    }
    matrix += &fourier.dot(&diag_h).dot(&dagger(&fourier));
    Ok(ElectricLink {
        matrix,
        eigenvalues,
        fourier,
    })
}

/// A Gauss-law operator `Theta_{g,v}`: per-link permutations on the links
/// incident to one vertex.
#[derive(Debug, Clone)]
pub struct GaussOp {
    pub vertex: usize,
    pub element: usize,
    pub links: Vec<usize>,
    /// Per entry of `links`: the local permutation `|h> -> |perm[h]>`.
    pub perms: Vec<Vec<usize>>,
}

/// Builds `Theta_{g,v}`: left multiplication on outgoing ends, right
/// multiplication on ingoing ends, conjugation on self-loop links.
pub fn gauss_operator(
    geom: &LatticeGeometry,
    vertex: usize,
    g: usize,
    group: &FiniteGroup,
) -> GaussOp {
    let mut links = Vec::new();
    let mut perms = Vec::new();
    for &(link, tag) in &geom.vertices[vertex] {
        let perm = match tag {
            EndTag::Out => group.left_perm(g),
            EndTag::In => group.right_perm(g),
            EndTag::Both => group.conj_perm(g),
        };
        links.push(link);
        perms.push(perm);
    }
    GaussOp {
        vertex,
        element: g,
        links,
        perms,
    }
}

impl GaussOp {
    /// Full-space index permutation on a register of `n_links` qudits.
    pub fn full_perm(&self, dim_local: usize, n_links: usize) -> Vec<u32> {
        let mut per_link: Vec<Option<&[usize]>> = vec![None; n_links];
        for (l, p) in self.links.iter().zip(self.perms.iter()) {
            per_link[*l] = Some(p);
        }
        full_permutation(dim_local, n_links, &per_link)
    }

    pub fn apply(&self, state: &mut QuditState) {
        for (l, p) in self.links.iter().zip(self.perms.iter()) {
            state.apply_link_perm(*l, p);
        }
    }

    pub fn expectation(&self, state: &QuditState) -> Complex64 {
        let perm = self.full_perm(state.dim_local(), state.n_links());
        state.expectation_permutation(&perm)
    }
}

/// Composes the per-link maps of a tuple of vertex transformations
/// `prod_v Theta_{g_v, v}` (contributions on a shared link commute).
pub(crate) fn tuple_link_maps(
    geom: &LatticeGeometry,
    group: &FiniteGroup,
    tuple: &[usize],
) -> Vec<Vec<usize>> {
    let d = group.order;
    let mut maps: Vec<Vec<usize>> = (0..geom.n_links).map(|_| (0..d).collect()).collect();
    for (v, &g) in tuple.iter().enumerate() {
        let op = gauss_operator(geom, v, g, group);
        for (l, p) in op.links.iter().zip(op.perms.iter()) {
            for x in 0..d {
                maps[*l][x] = p[maps[*l][x]];
            }
        }
    }
    maps
}

fn enumerate_tuples(order: usize, n_vertices: usize) -> Vec<Vec<usize>> {
    let count = order.pow(n_vertices as u32);
    (0..count)
        .map(|mut i| {
            (0..n_vertices)
                .map(|_| {
                    let g = i % order;
                    i /= order;
                    g
                })
                .collect()
        })
        .collect()
}

/// Precomputed full-space permutations for all `|G|^V` gauge-transformation
/// products; the workhorse behind the symmetric projector and PSV.
pub struct SymmetrizedOps {
    pub tuples: Vec<Vec<usize>>,
    pub perms: Vec<Vec<u32>>,
    pub dim_local: usize,
    pub n_links: usize,
}

impl SymmetrizedOps {
    pub fn build(geom: &LatticeGeometry, group: &FiniteGroup) -> SymmetrizedOps {
        let tuples = enumerate_tuples(group.order, geom.n_vertices());
        let perms = tuples
            .iter()
            .map(|t| {
                let maps = tuple_link_maps(geom, group, t);
                let refs: Vec<Option<&[usize]>> =
                    maps.iter().map(|m| Some(m.as_slice())).collect();
                full_permutation(group.order, geom.n_links, &refs)
            })
            .collect();
        SymmetrizedOps {
            tuples,
            perms,
            dim_local: group.order,
            n_links: geom.n_links,
        }
    }

    /// `<psi| Pi_s |psi>` as the average over all gauge products.
    pub fn weight(&self, state: &QuditState) -> f64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for perm in &self.perms {
            acc += state.expectation_permutation(perm);
        }
        (acc / self.perms.len() as f64).re
    }

    /// Fused `(<psi| O Pi_s |psi>, <psi| Pi_s |psi>)` for a diagonal
    /// observable `O`.
    pub fn numerator_and_weight(&self, state: &QuditState, diag: &[f64]) -> (f64, f64) {
        let mut num = Complex64::new(0.0, 0.0);
        let mut den = Complex64::new(0.0, 0.0);
        for perm in &self.perms {
            let (n, d) = state.correlator_permutation(diag, perm);
            num += n;
            den += d;
        }
        let k = self.perms.len() as f64;
        ((num / k).re, (den / k).re)
    }

    /// Fused `(<psi| A Pi_s |psi>, <psi| B Pi_s |psi>, <psi| Pi_s |psi>)`
    /// for two diagonal observables in one pass over the permutations.
    pub fn two_numerators_and_weight(
        &self,
        state: &QuditState,
        diag_a: &[f64],
        diag_b: &[f64],
    ) -> (f64, f64, f64) {
        let mut num_a = Complex64::new(0.0, 0.0);
        let mut num_b = Complex64::new(0.0, 0.0);
        let mut den = Complex64::new(0.0, 0.0);
        for perm in &self.perms {
            let (a, b, d) = state.correlator_permutation2(diag_a, diag_b, perm);
            num_a += a;
            num_b += b;
            den += d;
        }
        let k = self.perms.len() as f64;
        ((num_a / k).re, (num_b / k).re, (den / k).re)
    }

    /// All `|G|^V` correlators `<psi| O Theta_tuple |psi>`.
    pub fn correlators(&self, state: &QuditState, diag: &[f64]) -> Vec<Complex64> {
        self.perms
            .iter()
            .map(|perm| state.correlator_permutation(diag, perm).0)
            .collect()
    }

    /// Projects onto the physical sector and renormalizes. Returns the
    /// pre-normalization weight `||Pi_s psi||^2`.
    pub fn project(&self, state: &QuditState) -> (QuditState, f64) {
        let dim = state.dim();
        let mut acc = vec![Complex64::new(0.0, 0.0); dim];
        for perm in &self.perms {
            let amps = state.amplitudes();
            for (j, &img) in perm.iter().enumerate() {
                acc[img as usize] += amps[j];
            }
        }
        let k = self.perms.len() as f64;
        for a in &mut acc {
            *a /= k;
        }
        let mut out =
            QuditState::from_amplitudes(state.dim_local(), state.n_links(), acc).expect("dims");
        let norm = out.normalize();
        (out, norm * norm)
    }
}

/// Physical-sector dimension computed two ways: the character formula
/// `sum_C (|G|/|C|)^(L-V)` and fixed-point counting of `Tr Pi_s`. The two must
/// agree exactly.
pub fn physical_dimension(geom: &LatticeGeometry, group: &FiniteGroup) -> Result<usize> {
    let l = geom.n_links;
    let v = geom.n_vertices();
    let exp = (l - v) as u32;

    let formula: u128 = group
        .classes
        .iter()
        .map(|c| ((group.order / c.len()) as u128).pow(exp))
        .sum();

    // Tr Pi_s = (1/|G|^V) sum_tuples prod_links #fixed-points.
    let tuples = enumerate_tuples(group.order, v);
    let mut total: u128 = 0;
    for tuple in &tuples {
        let maps = tuple_link_maps(geom, group, tuple);
        let mut prod: u128 = 1;
        for map in &maps {
            let fixed = map.iter().enumerate().filter(|(x, &y)| *x == y).count();
            prod *= fixed as u128;
        }
        total += prod;
    }
    let denom = (group.order as u128).pow(v as u32);
    if total % denom != 0 {
        return Err(Error::Numerics(
            "fixed-point count not divisible by |G|^V".into(),
        ));
    }
    let trace = total / denom;
    if trace != formula {
        return Err(Error::Numerics(format!(
            "physical dimension mismatch: trace {trace} vs class formula {formula}"
        )));
    }
    Ok(formula as usize)
}
