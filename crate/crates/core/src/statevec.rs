//! Dense qudit-register state vectors over link configurations.
//!
//! Basis convention: a register of `L` links with local dimension `d` is
//! indexed by `i = sum_l g_l d^l`, link 0 fastest. Every module in the crate
//! shares this convention; operator placement correctness depends on it.

use ndarray::Array2;
use num_complex::Complex64;
use serde::Serialize;

use crate::{Error, Result};

/// Dense full-space operators (noise unitaries, oracle matrices) are allowed
/// only up to this dimension. The three-plaquette register (6^6 = 46656) is
/// deliberately above the guard; operators there must be link-local, diagonal,
/// or act on at most a few links.
pub const DENSE_DIM_GUARD: usize = 10_000;

#[derive(Debug, Clone)]
pub struct QuditState {
    dim_local: usize,
    n_links: usize,
    amps: Vec<Complex64>,
}

impl QuditState {
    /// Uniform superposition over all link configurations.
    pub fn uniform(dim_local: usize, n_links: usize) -> QuditState {
        let dim = dim_local.pow(n_links as u32);
        let a = Complex64::new(1.0 / (dim as f64).sqrt(), 0.0);
        QuditState {
            dim_local,
            n_links,
            amps: vec![a; dim],
        }
    }

    /// Basis state for the given per-link configuration.
    pub fn basis(dim_local: usize, n_links: usize, config: &[usize]) -> QuditState {
        assert_eq!(config.len(), n_links);
        let dim = dim_local.pow(n_links as u32);
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        let idx: usize = config
            .iter()
            .rev()
            .fold(0usize, |acc, &g| acc * dim_local + g);
        amps[idx] = Complex64::new(1.0, 0.0);
        QuditState {
            dim_local,
            n_links,
            amps,
        }
    }

    pub fn from_amplitudes(dim_local: usize, n_links: usize, amps: Vec<Complex64>) -> Result<QuditState> {
        if amps.len() != dim_local.pow(n_links as u32) {
            return Err(Error::Dimension(format!(
                "expected {} amplitudes, got {}",
                dim_local.pow(n_links as u32),
                amps.len()
            )));
        }
        Ok(QuditState {
            dim_local,
            n_links,
            amps,
        })
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn dim_local(&self) -> usize {
        self.dim_local
    }

    pub fn n_links(&self) -> usize {
        self.n_links
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalize(&mut self) -> f64 {
        let n = self.norm();
        if n > 0.0 {
            let inv = 1.0 / n;
            for a in &mut self.amps {
                *a *= inv;
            }
        }
        n
    }

    /// Digit `g_l` of a basis index.
    pub fn link_digit(&self, index: usize, link: usize) -> usize {
        index / self.dim_local.pow(link as u32) % self.dim_local
    }

    /// Applies a `d x d` matrix on one link.
    pub fn apply_link_unitary(&mut self, link: usize, m: &Array2<Complex64>) {
        debug_assert!(
            crate::linalg::unitarity_defect(m) < 1e-9,
            "apply_link_unitary expects a unitary matrix"
        );
        self.apply_link_unitary_unchecked(link, m);
    }

    /// Same kernel without the unitarity check, for applying general (e.g.
    /// Hermitian) one-link operators.
    pub fn apply_link_unitary_unchecked(&mut self, link: usize, m: &Array2<Complex64>) {
        let d = self.dim_local;
        assert!(link < self.n_links, "link index out of range");
        assert_eq!(m.nrows(), d, "link operator dimension mismatch");
        let stride = d.pow(link as u32);
        let block = stride * d;
        let mut sub = vec![Complex64::new(0.0, 0.0); d];
        for base in (0..self.amps.len()).step_by(block) {
            for off in 0..stride {
                let start = base + off;
                for (k, s) in sub.iter_mut().enumerate() {
                    *s = self.amps[start + k * stride];
                }
                for row in 0..d {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (k, s) in sub.iter().enumerate() {
                        acc += m[[row, k]] * s;
                    }
                    self.amps[start + row * stride] = acc;
                }
            }
        }
    }

    /// Applies a per-link permutation `|g> -> |perm[g]>` on one link.
    pub fn apply_link_perm(&mut self, link: usize, perm: &[usize]) {
        let d = self.dim_local;
        assert_eq!(perm.len(), d);
        let stride = d.pow(link as u32);
        let block = stride * d;
        let mut sub = vec![Complex64::new(0.0, 0.0); d];
        for base in (0..self.amps.len()).step_by(block) {
            for off in 0..stride {
                let start = base + off;
                for (k, s) in sub.iter_mut().enumerate() {
                    *s = self.amps[start + k * stride];
                }
                for (k, &img) in perm.iter().enumerate() {
                    self.amps[start + img * stride] = sub[k];
                }
            }
        }
    }

    /// Applies a dense operator on an ordered list of links (first listed link
    /// fastest in the joint index). If `normalize` is set, the state is
    /// renormalized and the pre-normalization norm returned; a zero-norm
    /// result then signals measurement of an impossible outcome.
    pub fn apply_multilink_operator(
        &mut self,
        links: &[usize],
        m: &Array2<Complex64>,
        normalize: bool,
    ) -> Result<Option<f64>> {
        let k = links.len();
        assert!(k >= 1 && k <= 4, "multilink operators support 1..=4 links");
        let d = self.dim_local;
        let sub_dim = d.pow(k as u32);
        if m.nrows() != sub_dim || m.ncols() != sub_dim {
            return Err(Error::Dimension(format!(
                "multilink operator is {}x{}, expected {sub_dim}x{sub_dim}",
                m.nrows(),
                m.ncols()
            )));
        }
        let mut sorted = links.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != k {
            return Err(Error::Dimension("multilink links must be distinct".into()));
        }

        let strides: Vec<usize> = links.iter().map(|&l| d.pow(l as u32)).collect();
        let link_set: Vec<bool> = (0..self.n_links).map(|l| links.contains(&l)).collect();

        // Enumerate the complement subspace and gather/scatter sub-vectors.
        let mut sub = vec![Complex64::new(0.0, 0.0); sub_dim];
        let mut out = vec![Complex64::new(0.0, 0.0); sub_dim];
        let mut offsets: Vec<usize> = Vec::with_capacity(sub_dim);
        for s in 0..sub_dim {
            let mut off = 0;
            let mut rem = s;
            for stride in &strides {
                off += (rem % d) * stride;
                rem /= d;
            }
            offsets.push(off);
        }
        let n_rest = self.amps.len() / sub_dim;
        for rest in 0..n_rest {
            // Expand the complement index into a base offset.
            let mut base = 0usize;
            let mut rem = rest;
            for l in 0..self.n_links {
                if link_set[l] {
                    continue;
                }
                base += (rem % d) * d.pow(l as u32);
                rem /= d;
            }
            for (s, &off) in offsets.iter().enumerate() {
                sub[s] = self.amps[base + off];
            }
            for (row, o) in out.iter_mut().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for (col, s) in sub.iter().enumerate() {
                    acc += m[[row, col]] * s;
                }
                *o = acc;
            }
            for (s, &off) in offsets.iter().enumerate() {
                self.amps[base + off] = out[s];
            }
        }

        if normalize {
            let n = self.normalize();
            if n <= 1e-300 {
                return Err(Error::Measurement(
                    "projection annihilated the state".into(),
                ));
            }
            Ok(Some(n))
        } else {
            Ok(None)
        }
    }

    /// Multiplies amplitude `i` by `exp(-i phase[i])`.
    pub fn apply_diagonal_phase(&mut self, phase: &[f64]) {
        assert_eq!(phase.len(), self.amps.len());
        for (a, &p) in self.amps.iter_mut().zip(phase.iter()) {
            *a *= Complex64::from_polar(1.0, -p);
        }
    }

    /// `sum_i |amp_i|^2 value[i]`.
    pub fn expectation_diagonal(&self, value: &[f64]) -> f64 {
        assert_eq!(value.len(), self.amps.len());
        self.amps
            .iter()
            .zip(value.iter())
            .map(|(a, &v)| a.norm_sqr() * v)
            .sum()
    }

    /// `<psi| P |psi>` for a full-space permutation operator `P|j> = |perm[j]>`.
    pub fn expectation_permutation(&self, perm: &[u32]) -> Complex64 {
        debug_assert_eq!(perm.len(), self.amps.len());
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, &img) in perm.iter().enumerate() {
            acc += self.amps[img as usize].conj() * self.amps[j];
        }
        acc
    }

    /// Fused `(<psi| O P |psi>, <psi| P |psi>)` for diagonal `O` and a
    /// full-space permutation; one pass over the amplitudes.
    pub fn correlator_permutation(&self, diag: &[f64], perm: &[u32]) -> (Complex64, Complex64) {
        debug_assert_eq!(perm.len(), self.amps.len());
        let mut num = Complex64::new(0.0, 0.0);
        let mut den = Complex64::new(0.0, 0.0);
        for (j, &img) in perm.iter().enumerate() {
            let i = img as usize;
            let term = self.amps[i].conj() * self.amps[j];
            den += term;
            num += term * diag[i];
        }
        (num, den)
    }

    /// Like [`Self::correlator_permutation`] but for two diagonal observables
    /// sharing the permutation; still a single pass.
    pub fn correlator_permutation2(
        &self,
        diag_a: &[f64],
        diag_b: &[f64],
        perm: &[u32],
    ) -> (Complex64, Complex64, Complex64) {
        debug_assert_eq!(perm.len(), self.amps.len());
        let mut num_a = Complex64::new(0.0, 0.0);
        let mut num_b = Complex64::new(0.0, 0.0);
        let mut den = Complex64::new(0.0, 0.0);
        for (j, &img) in perm.iter().enumerate() {
            let i = img as usize;
            let term = self.amps[i].conj() * self.amps[j];
            den += term;
            num_a += term * diag_a[i];
            num_b += term * diag_b[i];
        }
        (num_a, num_b, den)
    }

    /// Applies a full-space permutation `|j> -> |perm[j]>`.
    pub fn apply_permutation(&mut self, perm: &[u32]) {
        debug_assert_eq!(perm.len(), self.amps.len());
        let mut out = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        for (j, &img) in perm.iter().enumerate() {
            out[img as usize] = self.amps[j];
        }
        self.amps = out;
    }

    pub fn inner(&self, other: &QuditState) -> Complex64 {
        self.amps
            .iter()
            .zip(other.amps.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// `<psi| M_link |psi>` for a `d x d` operator on one link.
    pub fn expectation_link_op(&self, link: usize, m: &Array2<Complex64>) -> Complex64 {
        let d = self.dim_local;
        let stride = d.pow(link as u32);
        let block = stride * d;
        let mut acc = Complex64::new(0.0, 0.0);
        let mut sub = vec![Complex64::new(0.0, 0.0); d];
        for base in (0..self.amps.len()).step_by(block) {
            for off in 0..stride {
                let start = base + off;
                for (k, s) in sub.iter_mut().enumerate() {
                    *s = self.amps[start + k * stride];
                }
                for row in 0..d {
                    let mut mv = Complex64::new(0.0, 0.0);
                    for (k, s) in sub.iter().enumerate() {
                        mv += m[[row, k]] * s;
                    }
                    acc += sub[row].conj() * mv;
                }
            }
        }
        acc
    }

    /// Debug dump: geometry header plus `[re, im]` amplitude pairs.
    pub fn dump_json(&self) -> String {
        #[derive(Serialize)]
        struct Dump {
            dim_local: usize,
            n_links: usize,
            amplitudes: Vec<[f64; 2]>,
        }
        let d = Dump {
            dim_local: self.dim_local,
            n_links: self.n_links,
            amplitudes: self.amps.iter().map(|z| [z.re, z.im]).collect(),
        };
        serde_json::to_string(&d).expect("state dump serialization")
    }
}

/// Builds the full-space index permutation for independent per-link maps
/// (`None` leaves a link untouched). Entry `j` is the image of basis index `j`.
pub fn full_permutation(dim_local: usize, n_links: usize, per_link: &[Option<&[usize]>]) -> Vec<u32> {
    assert_eq!(per_link.len(), n_links);
    let dim = dim_local.pow(n_links as u32);
    let mut out = Vec::with_capacity(dim);
    for j in 0..dim {
        let mut img = 0usize;
        let mut rem = j;
        let mut stride = 1usize;
        for map in per_link {
            let digit = rem % dim_local;
            rem /= dim_local;
            let mapped = match map {
                Some(p) => p[digit],
                None => digit,
            };
            img += mapped * stride;
            stride *= dim_local;
        }
        out.push(img as u32);
    }
    out
}
