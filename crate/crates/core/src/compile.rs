//! Gate-level compilation of the Trotter step and the DPS symmetry checks,
//! with exact unitary reconstruction (at test scale) and resource counting.
//!
//! A [`GateSequence`] acts on a register file of qudits with heterogeneous
//! dimensions; register 0 is fastest in the joint index, matching the
//! state-vector convention. Gates are listed in application order.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use ndarray::Array2;
use num_complex::Complex64;
use serde::Serialize;

use crate::group::{permutation_cycles, FiniteGroup};
use crate::model::{gauss_operator, ElectricLink, LatticeGeometry};
use crate::{Error, Result};

/// Largest joint dimension for which [`GateSequence::unitary`] will
/// materialize the dense matrix.
pub const UNITARY_DIM_GUARD: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MultSide {
    Left,
    Right,
}

/// Primitive gates of the compilation target.
#[derive(Debug, Clone)]
pub enum Gate {
    /// Group Fourier transform on one `|G|`-dimensional register.
    Qft { reg: usize, inverse: bool },
    /// Diagonal phases `exp(-i phases[x])`.
    Phase { reg: usize, phases: Vec<f64> },
    /// Diagonal plaquette phase `exp(i theta Re chi_j(x))`.
    Trace {
        reg: usize,
        theta: f64,
        irrep: String,
    },
    /// Group inversion `|g> -> |g^-1>`.
    Inversion { reg: usize },
    /// Controlled group multiplication: for control value `g`, the target is
    /// multiplied by `g` (or `g^-1`) on the given side.
    CtrlMult {
        control: usize,
        target: usize,
        side: MultSide,
        inverse: bool,
    },
    /// Permutation on the target conditioned on one control value.
    CtrlPerm {
        control: usize,
        value: usize,
        target: usize,
        perm: Vec<usize>,
    },
    /// Dense single-register unitary (eigenbasis rotations).
    BasisRot {
        reg: usize,
        matrix: Array2<Complex64>,
        inverse: bool,
    },
    /// Ancilla increment `|a> -> |a + amounts[g] mod d_a>` keyed on the
    /// control register value.
    AncillaInc {
        control: usize,
        ancilla: usize,
        amounts: Vec<usize>,
    },
}

impl Gate {
    pub fn name(&self) -> &'static str {
        match self {
            Gate::Qft { .. } => "qft",
            Gate::Phase { .. } => "phase",
            Gate::Trace { .. } => "trace",
            Gate::Inversion { .. } => "inversion",
            Gate::CtrlMult { .. } => "ctrl_mult",
            Gate::CtrlPerm { .. } => "ctrl_perm",
            Gate::BasisRot { .. } => "basis_rot",
            Gate::AncillaInc { .. } => "ancilla_inc",
        }
    }
}

/// A register file plus an ordered gate list.
#[derive(Debug, Clone)]
pub struct GateSequence {
    /// Dimension of each register, register 0 fastest.
    pub dims: Vec<usize>,
    pub gates: Vec<Gate>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResourceReport {
    pub gate_counts: BTreeMap<String, usize>,
    /// Total cost in controlled-permutation primitives: each `ctrl_mult`
    /// expands into `|G| - 1` of them, each nonzero ancilla increment is one.
    pub ctrl_perm_total: usize,
    pub n_registers: usize,
}

impl GateSequence {
    pub fn new(dims: Vec<usize>) -> GateSequence {
        GateSequence {
            dims,
            gates: Vec::new(),
        }
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    fn stride(&self, reg: usize) -> usize {
        self.dims[..reg].iter().product()
    }

    fn digit(&self, index: usize, reg: usize) -> usize {
        index / self.stride(reg) % self.dims[reg]
    }

    /// Applies the sequence to a joint-index amplitude vector.
    pub fn apply(&self, group: &FiniteGroup, amps: &mut Vec<Complex64>) -> Result<()> {
        if amps.len() != self.total_dim() {
            return Err(Error::Dimension(format!(
                "state has {} amplitudes, register file needs {}",
                amps.len(),
                self.total_dim()
            )));
        }
        for gate in &self.gates {
            self.apply_gate(group, gate, amps)?;
        }
        Ok(())
    }

    fn apply_dense_on_reg(&self, reg: usize, m: &Array2<Complex64>, amps: &mut [Complex64]) {
        let d = self.dims[reg];
        let stride = self.stride(reg);
        let block = stride * d;
        let mut sub = vec![Complex64::new(0.0, 0.0); d];
        for base in (0..amps.len()).step_by(block) {
            for off in 0..stride {
                let start = base + off;
                for (k, s) in sub.iter_mut().enumerate() {
                    *s = amps[start + k * stride];
                }
                for row in 0..d {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (k, s) in sub.iter().enumerate() {
                        acc += m[[row, k]] * s;
                    }
                    amps[start + row * stride] = acc;
                }
            }
        }
    }

    fn apply_gate(
        &self,
        group: &FiniteGroup,
        gate: &Gate,
        amps: &mut Vec<Complex64>,
    ) -> Result<()> {
        match gate {
            Gate::Qft { reg, inverse } => {
                if self.dims[*reg] != group.order {
                    return Err(Error::Dimension(
                        "qft register dimension must equal the group order".into(),
                    ));
                }
                let f = group.fourier_matrix()?;
                let m = if *inverse { crate::linalg::dagger(&f) } else { f };
                self.apply_dense_on_reg(*reg, &m, amps);
            }
            Gate::Phase { reg, phases } => {
                let stride = self.stride(*reg);
                let d = self.dims[*reg];
                for (i, a) in amps.iter_mut().enumerate() {
                    let x = i / stride % d;
                    *a *= Complex64::from_polar(1.0, -phases[x]);
                }
            }
            Gate::Trace { reg, theta, irrep } => {
                let chars = &group
                    .irrep(irrep)
                    .ok_or_else(|| Error::Config(format!("unknown irrep {irrep}")))?
                    .characters;
                let stride = self.stride(*reg);
                let d = self.dims[*reg];
                for (i, a) in amps.iter_mut().enumerate() {
                    let x = i / stride % d;
                    *a *= Complex64::from_polar(1.0, theta * chars[x].re);
                }
            }
            Gate::Inversion { reg } => {
                let perm: Vec<usize> = (0..group.order).map(|g| group.inverse(g)).collect();
                self.apply_reg_perm(*reg, &perm, amps);
            }
            Gate::CtrlMult {
                control,
                target,
                side,
                inverse,
            } => {
                let st = self.stride(*target);
                let mut out = vec![Complex64::new(0.0, 0.0); amps.len()];
                for (i, &a) in amps.iter().enumerate() {
                    let g = self.digit(i, *control);
                    let h = self.digit(i, *target);
                    let new_h = ctrl_mult_image(group, g, h, *side, *inverse);
                    out[i - h * st + new_h * st] = a;
                }
                *amps = out;
            }
            Gate::CtrlPerm {
                control,
                value,
                target,
                perm,
            } => {
                let st = self.stride(*target);
                let mut out = vec![Complex64::new(0.0, 0.0); amps.len()];
                for (i, &a) in amps.iter().enumerate() {
                    if self.digit(i, *control) == *value {
                        let h = self.digit(i, *target);
                        out[i - h * st + perm[h] * st] = a;
                    } else {
                        out[i] = a;
                    }
                }
                *amps = out;
            }
            Gate::BasisRot {
                reg,
                matrix,
                inverse,
            } => {
                let m = if *inverse {
                    crate::linalg::dagger(matrix)
                } else {
                    matrix.clone()
                };
                self.apply_dense_on_reg(*reg, &m, amps);
            }
            Gate::AncillaInc {
                control,
                ancilla,
                amounts,
            } => {
                let sa = self.stride(*ancilla);
                let da = self.dims[*ancilla];
                let mut out = vec![Complex64::new(0.0, 0.0); amps.len()];
                for (i, &a) in amps.iter().enumerate() {
                    let g = self.digit(i, *control);
                    let x = self.digit(i, *ancilla);
                    let new_x = (x + amounts[g]) % da;
                    out[i - x * sa + new_x * sa] = a;
                }
                *amps = out;
            }
        }
        Ok(())
    }

    fn apply_reg_perm(&self, reg: usize, perm: &[usize], amps: &mut Vec<Complex64>) {
        let st = self.stride(reg);
        let mut out = vec![Complex64::new(0.0, 0.0); amps.len()];
        for (i, &a) in amps.iter().enumerate() {
            let h = self.digit(i, reg);
            out[i - h * st + perm[h] * st] = a;
        }
        *amps = out;
    }

    /// Materializes the full unitary (column by column), guarded by
    /// [`UNITARY_DIM_GUARD`].
    pub fn unitary(&self, group: &FiniteGroup) -> Result<Array2<Complex64>> {
        let dim = self.total_dim();
        if dim > UNITARY_DIM_GUARD {
            return Err(Error::SizeGuard(format!(
                "dense circuit unitary of dimension {dim} exceeds the guard ({UNITARY_DIM_GUARD})"
            )));
        }
        let mut u = Array2::zeros((dim, dim));
        for col in 0..dim {
            let mut amps = vec![Complex64::new(0.0, 0.0); dim];
            amps[col] = Complex64::new(1.0, 0.0);
            self.apply(group, &mut amps)?;
            for (row, a) in amps.iter().enumerate() {
                u[[row, col]] = *a;
            }
        }
        Ok(u)
    }

    /// Rewrites every `ctrl_mult` into its `|G| - 1` controlled permutations
    /// (the identity-controlled branch is a no-op and is dropped).
    pub fn expand_ctrl_mults(&self, group: &FiniteGroup) -> GateSequence {
        let mut out = GateSequence::new(self.dims.clone());
        for gate in &self.gates {
            match gate {
                Gate::CtrlMult {
                    control,
                    target,
                    side,
                    inverse,
                } => {
                    for g in 1..group.order {
                        let perm: Vec<usize> = (0..group.order)
                            .map(|h| ctrl_mult_image(group, g, h, *side, *inverse))
                            .collect();
                        out.gates.push(Gate::CtrlPerm {
                            control: *control,
                            value: g,
                            target: *target,
                            perm,
                        });
                    }
                }
                other => out.gates.push(other.clone()),
            }
        }
        out
    }

    pub fn resource_report(&self, group: &FiniteGroup) -> ResourceReport {
        let mut gate_counts = BTreeMap::new();
        let mut ctrl_perm_total = 0;
        for gate in &self.gates {
            *gate_counts.entry(gate.name().to_string()).or_insert(0) += 1;
            match gate {
                Gate::CtrlMult { .. } => ctrl_perm_total += group.order - 1,
                Gate::CtrlPerm { .. } => ctrl_perm_total += 1,
                Gate::AncillaInc { amounts, .. } => {
                    ctrl_perm_total += amounts.iter().filter(|&&a| a != 0).count()
                }
                _ => {}
            }
        }
        ResourceReport {
            gate_counts,
            ctrl_perm_total,
            n_registers: self.dims.len(),
        }
    }

    /// One line per gate, machine-greppable.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "registers {}",
            self.dims
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join(",")
        );
        for gate in &self.gates {
            match gate {
                Gate::Qft { reg, inverse } => {
                    let _ = writeln!(s, "qft reg={reg} inverse={inverse}");
                }
                Gate::Phase { reg, phases } => {
                    let _ = writeln!(
                        s,
                        "phase reg={reg} phases={}",
                        phases
                            .iter()
                            .map(|p| format!("{p:.12}"))
                            .collect::<Vec<_>>()
                            .join(",")
                    );
                }
                Gate::Trace { reg, theta, irrep } => {
                    let _ = writeln!(s, "trace reg={reg} theta={theta:.12} irrep={irrep}");
                }
                Gate::Inversion { reg } => {
                    let _ = writeln!(s, "inversion reg={reg}");
                }
                Gate::CtrlMult {
                    control,
                    target,
                    side,
                    inverse,
                } => {
                    let side = match side {
                        MultSide::Left => "left",
                        MultSide::Right => "right",
                    };
                    let _ = writeln!(
                        s,
                        "ctrl_mult control={control} target={target} side={side} inverse={inverse}"
                    );
                }
                Gate::CtrlPerm {
                    control,
                    value,
                    target,
                    perm,
                } => {
                    let _ = writeln!(
                        s,
                        "ctrl_perm control={control} value={value} target={target} perm={}",
                        perm.iter()
                            .map(|p| p.to_string())
                            .collect::<Vec<_>>()
                            .join(",")
                    );
                }
                Gate::BasisRot { reg, inverse, .. } => {
                    let _ = writeln!(s, "basis_rot reg={reg} inverse={inverse}");
                }
                Gate::AncillaInc {
                    control,
                    ancilla,
                    amounts,
                } => {
                    let _ = writeln!(
                        s,
                        "ancilla_inc control={control} ancilla={ancilla} amounts={}",
                        amounts
                            .iter()
                            .map(|a| a.to_string())
                            .collect::<Vec<_>>()
                            .join(",")
                    );
                }
            }
        }
        s
    }
}

fn ctrl_mult_image(
    group: &FiniteGroup,
    g: usize,
    h: usize,
    side: MultSide,
    inverse: bool,
) -> usize {
    let g = if inverse { group.inverse(g) } else { g };
    match side {
        MultSide::Left => group.multiply(g, h),
        MultSide::Right => group.multiply(h, g),
    }
}

/// `exp(-i H_E dt)` on one link register: rotate into the Fourier basis,
/// apply the eigenphases, rotate back.
pub fn compile_electric_step(reg: usize, electric: &ElectricLink, dt: f64) -> Vec<Gate> {
    vec![
        Gate::Qft { reg, inverse: true },
        Gate::Phase {
            reg,
            phases: electric.eigenvalues.iter().map(|&e| e * dt).collect(),
        },
        Gate::Qft {
            reg,
            inverse: false,
        },
    ]
}

/// `exp(+i (1/g^2) dt Re Tr P_p)` for one plaquette: the group-valued product
/// is accumulated onto the register of the plaquette factor that appears only
/// once (the second), the trace phase is applied there, and the accumulation
/// is uncomputed. Costs `2 (n_factors - 1)` controlled multiplications.
pub fn compile_plaquette_step(
    geom: &LatticeGeometry,
    p: usize,
    inv_g2: f64,
    dt: f64,
    irrep: &str,
) -> Vec<Gate> {
    let factors = &geom.plaquettes[p];
    let target_pos = 1;
    let (target, target_dag) = factors[target_pos];
    assert!(
        !target_dag && factors.iter().filter(|f| f.0 == target).count() == 1,
        "accumulation target must appear exactly once and undaggered"
    );

    let mut compute: Vec<Gate> = Vec::new();
    // Right factors, applied in product order: h -> h * g_l^{+-1}.
    for &(link, dag) in &factors[target_pos + 1..] {
        compute.push(Gate::CtrlMult {
            control: link,
            target,
            side: MultSide::Right,
            inverse: dag,
        });
    }
    // Left factors, innermost first: h -> g_l^{+-1} * h.
    for &(link, dag) in factors[..target_pos].iter().rev() {
        compute.push(Gate::CtrlMult {
            control: link,
            target,
            side: MultSide::Left,
            inverse: dag,
        });
    }

    let mut gates = compute.clone();
    gates.push(Gate::Trace {
        reg: target,
        theta: inv_g2 * dt,
        irrep: irrep.to_string(),
    });
    for gate in compute.into_iter().rev() {
        if let Gate::CtrlMult {
            control,
            target,
            side,
            inverse,
        } = gate
        {
            gates.push(Gate::CtrlMult {
                control,
                target,
                side,
                inverse: !inverse,
            });
        }
    }
    gates
}

/// One full first-order Trotter step: every plaquette phase, then the
/// electric propagator on every link.
pub fn compile_trotter_step(
    geom: &LatticeGeometry,
    electric: &ElectricLink,
    inv_g2: f64,
    dt: f64,
    irrep: &str,
) -> GateSequence {
    let group_dim = electric.matrix.nrows();
    let mut seq = GateSequence::new(vec![group_dim; geom.n_links]);
    for p in 0..geom.n_plaquettes {
        seq.gates
            .extend(compile_plaquette_step(geom, p, inv_g2, dt, irrep));
    }
    for l in 0..geom.n_links {
        seq.gates.extend(compile_electric_step(l, electric, dt));
    }
    seq
}

/// Coherent DPS check of `Theta_{g,v}`: each touched link register is rotated
/// into the eigenbasis of its local permutation, the eigenphase exponent is
/// added into an order-`N` ancilla, and the rotation is undone. Measuring the
/// ancilla in the computational basis then realizes the projective Gauss
/// measurement; outcome 0 is the symmetry-preserving sector.
pub fn compile_dps_check(
    geom: &LatticeGeometry,
    group: &FiniteGroup,
    vertex: usize,
    element: usize,
) -> GateSequence {
    let op = gauss_operator(geom, vertex, element, group);
    let n = group.element_order(element);
    let mut dims = vec![group.order; geom.n_links];
    let ancilla = dims.len();
    dims.push(n);
    let mut seq = GateSequence::new(dims);

    for (link, perm) in op.links.iter().zip(op.perms.iter()) {
        let cycles = permutation_cycles(perm);
        let d = group.order;
        let mut rot = Array2::zeros((d, d));
        let mut amounts = vec![0usize; d];
        for cycle in &cycles {
            let c = cycle.len();
            assert_eq!(n % c, 0, "link cycle length must divide the element order");
            let w = 2.0 * std::f64::consts::PI / c as f64;
            for (j, &label) in cycle.iter().enumerate() {
                amounts[label] = j * (n / c) % n;
                for (t, &x) in cycle.iter().enumerate() {
                    rot[[x, label]] =
                        Complex64::from_polar(1.0 / (c as f64).sqrt(), -w * (j * t) as f64);
                }
            }
        }
        seq.gates.push(Gate::BasisRot {
            reg: *link,
            matrix: rot.clone(),
            inverse: true,
        });
        seq.gates.push(Gate::AncillaInc {
            control: *link,
            ancilla,
            amounts,
        });
        seq.gates.push(Gate::BasisRot {
            reg: *link,
            matrix: rot,
            inverse: false,
        });
    }
    seq
}
