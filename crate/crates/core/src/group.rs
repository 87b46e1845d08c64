//! Finite-group algebra: multiplication tables, conjugacy classes, irreducible
//! representations, and the group Fourier transform.
//!
//! The dihedral group `D3` is the main instance. Its element encoding is fixed
//! to `g = s^floor(g/3) r^g` for `g in 0..6`, so index 0 is the identity,
//! 1..=2 are the rotations, and 3..=5 are the reflections. All spectra and
//! tables downstream rely on this ordering.

use ndarray::Array2;
use num_complex::Complex64;
use serde::Deserialize;

use crate::linalg::{identity, max_abs_diff, unitarity_defect};
use crate::{Error, Result};

const ALGEBRA_TOL: f64 = 1e-12;
const COMPOSED_TOL: f64 = 1e-10;

/// One irreducible representation: per-element unitary matrices and characters.
#[derive(Debug, Clone)]
pub struct Irrep {
    pub label: String,
    pub dim: usize,
    /// `matrices[g]` is the `dim x dim` unitary `D(g)`.
    pub matrices: Vec<Array2<Complex64>>,
    /// `characters[g] = Tr D(g)`.
    pub characters: Vec<Complex64>,
}

impl Irrep {
    fn from_matrices(label: &str, matrices: Vec<Array2<Complex64>>) -> Self {
        let dim = matrices[0].nrows();
        let characters = matrices.iter().map(|m| m.diag().sum()).collect();
        Irrep {
            label: label.to_string(),
            dim,
            matrices,
            characters,
        }
    }
}

/// A finite group given by tables, together with a complete irrep set.
///
/// Immutable after construction; shared concurrent reads are safe.
#[derive(Debug, Clone)]
pub struct FiniteGroup {
    pub order: usize,
    /// `mult[a][b]` is the index of the product `a * b`.
    pub mult: Vec<Vec<usize>>,
    /// `inv[g]` is the index of `g^{-1}`.
    pub inv: Vec<usize>,
    /// Conjugacy classes as a partition of `0..order`.
    pub classes: Vec<Vec<usize>>,
    pub irreps: Vec<Irrep>,
}

pub const IDENTITY: usize = 0;

impl FiniteGroup {
    /// The dihedral group `D3`, elements encoded as `s^floor(g/3) r^g`.
    ///
    /// Irreps: trivial `e`, parity `p` (+1 on rotations, -1 on reflections),
    /// and the faithful two-dimensional `tau` generated by
    /// `D(s) = [[0,1],[1,0]]` and `D(r) = diag(e^{2pi i/3}, e^{-2pi i/3})`.
    /// The multiplication table is derived by matching products of `tau`
    /// matrices back to encoded elements.
    pub fn d3() -> Result<FiniteGroup> {
        let s = ndarray::array![
            [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
            [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]
        ];
        let omega = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
        let r = ndarray::array![
            [omega, Complex64::new(0.0, 0.0)],
            [Complex64::new(0.0, 0.0), omega.conj()]
        ];

        let mut tau: Vec<Array2<Complex64>> = Vec::with_capacity(6);
        for g in 0..6usize {
            let mut m = identity(2);
            if g / 3 == 1 {
                m = m.dot(&s);
            }
            for _ in 0..(g % 3) {
                m = m.dot(&r);
            }
            tau.push(m);
        }

        let match_element = |m: &Array2<Complex64>| -> Result<usize> {
            let mut found = None;
            for (g, t) in tau.iter().enumerate() {
                if max_abs_diff(m, t) < 1e-9 {
                    if found.is_some() {
                        return Err(Error::Group("ambiguous tau product match".into()));
                    }
                    found = Some(g);
                }
            }
            found.ok_or_else(|| Error::Group("tau product matches no element".into()))
        };

        let mut mult = vec![vec![0usize; 6]; 6];
        for a in 0..6 {
            for b in 0..6 {
                mult[a][b] = match_element(&tau[a].dot(&tau[b]))?;
            }
        }

        let trivial: Vec<Array2<Complex64>> = (0..6)
            .map(|_| Array2::from_elem((1, 1), Complex64::new(1.0, 0.0)))
            .collect();
        let parity: Vec<Array2<Complex64>> = (0..6)
            .map(|g| {
                let v = if g < 3 { 1.0 } else { -1.0 };
                Array2::from_elem((1, 1), Complex64::new(v, 0.0))
            })
            .collect();

        let irreps = vec![
            Irrep::from_matrices("e", trivial),
            Irrep::from_matrices("p", parity),
            Irrep::from_matrices("tau", tau.clone()),
        ];

        FiniteGroup::from_parts(mult, irreps)
    }

    /// The cyclic group `Z_n` with its `n` one-dimensional irreps.
    pub fn cyclic(n: usize) -> Result<FiniteGroup> {
        if n < 2 {
            return Err(Error::Group("cyclic group needs n >= 2".into()));
        }
        let mult: Vec<Vec<usize>> = (0..n).map(|a| (0..n).map(|b| (a + b) % n).collect()).collect();
        let irreps = (0..n)
            .map(|j| {
                let mats = (0..n)
                    .map(|g| {
                        let phase = 2.0 * std::f64::consts::PI * (j * g) as f64 / n as f64;
                        Array2::from_elem((1, 1), Complex64::from_polar(1.0, phase))
                    })
                    .collect();
                Irrep::from_matrices(&format!("w{j}"), mats)
            })
            .collect();
        FiniteGroup::from_parts(mult, irreps)
    }

    /// Builds inverse table and conjugacy classes from a multiplication table
    /// and validates the whole structure.
    pub fn from_parts(mult: Vec<Vec<usize>>, irreps: Vec<Irrep>) -> Result<FiniteGroup> {
        let order = mult.len();
        let mut inv = vec![usize::MAX; order];
        for g in 0..order {
            for h in 0..order {
                if mult[g][h] == IDENTITY {
                    if inv[g] != usize::MAX && inv[g] != h {
                        return Err(Error::Group(format!("element {g} has two inverses")));
                    }
                    inv[g] = h;
                }
            }
            if inv[g] == usize::MAX {
                return Err(Error::Group(format!("element {g} has no inverse")));
            }
        }

        let mut classes: Vec<Vec<usize>> = Vec::new();
        let mut seen = vec![false; order];
        for g in 0..order {
            if seen[g] {
                continue;
            }
            let mut class: Vec<usize> = (0..order)
                .map(|h| mult[mult[h][g]][inv[h]])
                .collect();
            class.sort_unstable();
            class.dedup();
            for &c in &class {
                seen[c] = true;
            }
            classes.push(class);
        }

        let group = FiniteGroup {
            order,
            mult,
            inv,
            classes,
            irreps,
        };
        group.validate()?;
        Ok(group)
    }

    /// Loads a user-supplied group from JSON: element count, multiplication
    /// table, and irrep matrices as `[re, im]` pairs.
    pub fn from_json_str(text: &str) -> Result<FiniteGroup> {
        #[derive(Deserialize)]
        struct IrrepDef {
            label: String,
            matrices: Vec<Vec<Vec<[f64; 2]>>>,
        }
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct GroupDef {
            order: usize,
            mult: Vec<Vec<usize>>,
            irreps: Vec<IrrepDef>,
        }
        let def: GroupDef = serde_json::from_str(text)?;
        if def.mult.len() != def.order {
            return Err(Error::Group("mult table size does not match order".into()));
        }
        let irreps = def
            .irreps
            .into_iter()
            .map(|d| {
                let mats: Vec<Array2<Complex64>> = d
                    .matrices
                    .iter()
                    .map(|m| {
                        let dim = m.len();
                        Array2::from_shape_fn((dim, dim), |(i, j)| {
                            Complex64::new(m[i][j][0], m[i][j][1])
                        })
                    })
                    .collect();
                Irrep::from_matrices(&d.label, mats)
            })
            .collect();
        FiniteGroup::from_parts(def.mult, irreps)
    }

    pub fn multiply(&self, a: usize, b: usize) -> usize {
        self.mult[a][b]
    }

    pub fn inverse(&self, g: usize) -> usize {
        self.inv[g]
    }

    /// Smallest `n > 0` with `g^n = e`.
    pub fn element_order(&self, g: usize) -> usize {
        let mut acc = g;
        let mut n = 1;
        while acc != IDENTITY {
            acc = self.mult[acc][g];
            n += 1;
        }
        n
    }

    pub fn class_of(&self, g: usize) -> usize {
        self.classes
            .iter()
            .position(|c| c.contains(&g))
            .expect("classes partition the group")
    }

    pub fn irrep(&self, label: &str) -> Option<&Irrep> {
        self.irreps.iter().find(|j| j.label == label)
    }

    /// Fixed column ordering of the Fourier matrix: irreps in declared order,
    /// then row-major `(m, n)` within each irrep.
    pub fn fourier_columns(&self) -> Vec<(usize, usize, usize)> {
        let mut cols = Vec::with_capacity(self.order);
        for (j, irrep) in self.irreps.iter().enumerate() {
            for m in 0..irrep.dim {
                for n in 0..irrep.dim {
                    cols.push((j, m, n));
                }
            }
        }
        cols
    }

    /// The group Fourier transform `F[g, (j,m,n)] = sqrt(dim j / |G|) D^j_{mn}(g)`.
    pub fn fourier_matrix(&self) -> Result<Array2<Complex64>> {
        let cols = self.fourier_columns();
        if cols.len() != self.order {
            return Err(Error::Group(
                "irrep dimensions do not sum-of-squares to the group order".into(),
            ));
        }
        let mut f = Array2::zeros((self.order, self.order));
        for (c, &(j, m, n)) in cols.iter().enumerate() {
            let irrep = &self.irreps[j];
            let scale = (irrep.dim as f64 / self.order as f64).sqrt();
            for g in 0..self.order {
                f[[g, c]] = irrep.matrices[g][[m, n]] * scale;
            }
        }
        let defect = unitarity_defect(&f);
        if defect > COMPOSED_TOL {
            return Err(Error::Numerics(format!(
                "group Fourier matrix is not unitary (defect {defect:.3e}); broken irrep set"
            )));
        }
        Ok(f)
    }

    /// Permutation `g -> h g` as an index map.
    pub fn left_perm(&self, h: usize) -> Vec<usize> {
        (0..self.order).map(|g| self.mult[h][g]).collect()
    }

    /// Permutation `g -> g h^{-1}` as an index map.
    pub fn right_perm(&self, h: usize) -> Vec<usize> {
        (0..self.order).map(|g| self.mult[g][self.inv[h]]).collect()
    }

    /// Permutation `g -> h g h^{-1}` (combined left and right action on a
    /// self-loop link).
    pub fn conj_perm(&self, h: usize) -> Vec<usize> {
        (0..self.order)
            .map(|g| self.mult[self.mult[h][g]][self.inv[h]])
            .collect()
    }

    /// 0/1 matrix of `Theta^L_h |g> = |hg>`.
    pub fn left_mult_operator(&self, h: usize) -> Array2<Complex64> {
        perm_matrix(&self.left_perm(h))
    }

    /// 0/1 matrix of `Theta^R_h |g> = |g h^{-1}>`.
    pub fn right_mult_operator(&self, h: usize) -> Array2<Complex64> {
        perm_matrix(&self.right_perm(h))
    }

    /// The `dim(j)^2` diagonal connection operators `U^j_{mn}`, row-major in
    /// `(m, n)`; entry `g` of diagonal `(m, n)` is `D^j_{mn}(g)`.
    pub fn connection_diagonals(&self, label: &str) -> Option<Vec<Vec<Complex64>>> {
        let irrep = self.irrep(label)?;
        let mut diags = Vec::with_capacity(irrep.dim * irrep.dim);
        for m in 0..irrep.dim {
            for n in 0..irrep.dim {
                diags.push((0..self.order).map(|g| irrep.matrices[g][[m, n]]).collect());
            }
        }
        Some(diags)
    }

    fn validate(&self) -> Result<()> {
        let n = self.order;
        // Latin square.
        for a in 0..n {
            let mut row: Vec<usize> = self.mult[a].clone();
            let mut col: Vec<usize> = (0..n).map(|b| self.mult[b][a]).collect();
            row.sort_unstable();
            col.sort_unstable();
            if row != (0..n).collect::<Vec<_>>() || col != (0..n).collect::<Vec<_>>() {
                return Err(Error::Group(format!("mult table is not a Latin square at {a}")));
            }
        }
        for g in 0..n {
            if self.mult[g][self.inv[g]] != IDENTITY || self.mult[IDENTITY][g] != g {
                return Err(Error::Group("identity/inverse axioms violated".into()));
            }
        }
        let dim_sq: usize = self.irreps.iter().map(|j| j.dim * j.dim).sum();
        if dim_sq != n {
            return Err(Error::Group(format!(
                "sum of irrep dim^2 is {dim_sq}, expected {n}"
            )));
        }
        if self.classes.iter().map(|c| c.len()).sum::<usize>() != n {
            return Err(Error::Group("conjugacy classes do not partition".into()));
        }
        if self.classes[self.class_of(IDENTITY)].len() != 1 {
            return Err(Error::Group("identity is not alone in its class".into()));
        }
        for irrep in &self.irreps {
            for g in 0..n {
                if unitarity_defect(&irrep.matrices[g]) > ALGEBRA_TOL {
                    return Err(Error::Group(format!(
                        "irrep {} matrix {g} is not unitary",
                        irrep.label
                    )));
                }
                for h in 0..n {
                    let prod = irrep.matrices[g].dot(&irrep.matrices[h]);
                    if max_abs_diff(&prod, &irrep.matrices[self.mult[g][h]]) > ALGEBRA_TOL {
                        return Err(Error::Group(format!(
                            "irrep {} is not a homomorphism at ({g},{h})",
                            irrep.label
                        )));
                    }
                }
            }
            // Characters constant on conjugacy classes.
            for class in &self.classes {
                let c0 = irrep.characters[class[0]];
                for &g in class {
                    if (irrep.characters[g] - c0).norm() > ALGEBRA_TOL {
                        return Err(Error::Group(format!(
                            "irrep {} characters vary within a class",
                            irrep.label
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

fn perm_matrix(perm: &[usize]) -> Array2<Complex64> {
    let n = perm.len();
    let mut m = Array2::zeros((n, n));
    for (g, &image) in perm.iter().enumerate() {
        m[[image, g]] = Complex64::new(1.0, 0.0);
    }
    m
}

/// Eigenvalue multiset of a permutation from its cycle structure: each cycle
/// of length `k` contributes all `k`-th roots of unity.
pub fn permutation_eigenvalues(perm: &[usize]) -> Vec<Complex64> {
    let mut seen = vec![false; perm.len()];
    let mut eigs = Vec::with_capacity(perm.len());
    for start in 0..perm.len() {
        if seen[start] {
            continue;
        }
        let mut len = 0;
        let mut cur = start;
        while !seen[cur] {
            seen[cur] = true;
            cur = perm[cur];
            len += 1;
        }
        for k in 0..len {
            let phase = 2.0 * std::f64::consts::PI * k as f64 / len as f64;
            eigs.push(Complex64::from_polar(1.0, phase));
        }
    }
    eigs
}

/// Cycle decomposition of a permutation.
pub fn permutation_cycles(perm: &[usize]) -> Vec<Vec<usize>> {
    let mut seen = vec![false; perm.len()];
    let mut cycles = Vec::new();
    for start in 0..perm.len() {
        if seen[start] {
            continue;
        }
        let mut cycle = Vec::new();
        let mut cur = start;
        while !seen[cur] {
            seen[cur] = true;
            cycle.push(cur);
            cur = perm[cur];
        }
        cycles.push(cycle);
    }
    cycles
}
