//! Trotter stepping, stochastic noise channels, initial-state preparation,
//! and single-trajectory execution.
//!
//! Per-trajectory determinism: every trajectory owns two counter-seeded RNG
//! streams derived from `(master_seed, trajectory_index)` — one for noise
//! draws, one for measurement outcomes. Keeping the streams separate makes the
//! noise realization identical across mitigation modes (paired ensembles).

use ndarray::Array2;
use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::group::{FiniteGroup, IDENTITY};
use crate::mitigate::{dps_measure, MeasurementSchedule};
use crate::model::{
    gauss_operator, magnetic_phase_table, plaquette_trace_table, CouplingParams, ElectricLink,
    LatticeGeometry, SymmetrizedOps,
};
use crate::statevec::{QuditState, DENSE_DIM_GUARD};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct TrotterParams {
    /// Trotter step `dt/a`.
    pub dt: f64,
    pub n_steps: usize,
    pub coupling: CouplingParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    None,
    Householder,
    Dephasing,
}

#[derive(Debug, Clone, Copy)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub gamma: f64,
}

impl NoiseSpec {
    pub fn none() -> NoiseSpec {
        NoiseSpec {
            kind: NoiseKind::None,
            gamma: 0.0,
        }
    }

    pub fn validate(&self, state_dim: usize) -> Result<()> {
        if self.gamma < 0.0 {
            return Err(Error::Config("noise gamma must be >= 0".into()));
        }
        if self.kind == NoiseKind::Householder && state_dim > DENSE_DIM_GUARD {
            return Err(Error::SizeGuard(format!(
                "householder noise is a dense full-space unitary; dimension {state_dim} exceeds \
                 the guard ({DENSE_DIM_GUARD}) — use dephasing noise instead"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    Noiseless,
    Noisy,
    Dps,
    Psv,
}

impl RunMode {
    pub fn label(&self) -> &'static str {
        match self {
            RunMode::Noiseless => "noiseless",
            RunMode::Noisy => "noisy",
            RunMode::Dps => "dps",
            RunMode::Psv => "psv",
        }
    }
}

/// Strong-coupling ground state: every link in the trivial representation,
/// i.e. the uniform superposition over all link configurations.
pub fn initial_state(geom: &LatticeGeometry, group: &FiniteGroup) -> QuditState {
    QuditState::uniform(group.order, geom.n_links)
}

/// Precomputed Trotter factors: the diagonal magnetic phase and the per-link
/// electric propagator.
#[derive(Debug, Clone)]
pub struct TrotterOp {
    magnetic_phase: Vec<f64>,
    electric_prop: Array2<Complex64>,
    n_links: usize,
}

impl TrotterOp {
    pub fn build(
        geom: &LatticeGeometry,
        group: &FiniteGroup,
        coupling: CouplingParams,
        electric: &ElectricLink,
        dt: f64,
    ) -> TrotterOp {
        let hb = magnetic_phase_table(geom, coupling, group, "tau");
        TrotterOp {
            magnetic_phase: hb.iter().map(|&v| v * dt).collect(),
            electric_prop: electric.propagator(dt),
            n_links: geom.n_links,
        }
    }

    /// One first-order step `exp(-i H_E dt) exp(-i H_B dt)`: magnetic phase
    /// first, then the electric propagator on every link.
    pub fn step(&self, state: &mut QuditState) {
        state.apply_diagonal_phase(&self.magnetic_phase);
        for l in 0..self.n_links {
            state.apply_link_unitary(l, &self.electric_prop);
        }
    }
}

/// A random unitary `exp(i gamma D) (1 - 2 v v^dag)` kept in factored form;
/// the Householder vector `v` is a normalized complex Gaussian draw and `D`
/// has standard-normal real entries.
#[derive(Debug, Clone)]
pub struct HouseholderUnitary {
    pub v: Vec<Complex64>,
    pub d: Vec<f64>,
    pub gamma: f64,
}

pub fn sample_householder_unitary(
    dim: usize,
    gamma: f64,
    rng: &mut impl Rng,
) -> HouseholderUnitary {
    let mut v: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for z in &mut v {
        *z /= norm;
    }
    let d: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    HouseholderUnitary { v, d, gamma }
}

impl HouseholderUnitary {
    pub fn dim(&self) -> usize {
        self.v.len()
    }

    /// Applies the unitary in factored form: reflection, then diagonal phases.
    pub fn apply(&self, state: &mut QuditState) {
        let amps = state.amplitudes_mut();
        assert_eq!(amps.len(), self.v.len());
        let overlap: Complex64 = self.v.iter().zip(amps.iter()).map(|(v, a)| v.conj() * a).sum();
        let two_overlap = overlap * 2.0;
        for (a, v) in amps.iter_mut().zip(self.v.iter()) {
            *a -= two_overlap * v;
        }
        for (a, &d) in amps.iter_mut().zip(self.d.iter()) {
            *a *= Complex64::from_polar(1.0, self.gamma * d);
        }
    }

    /// `Tr U / dim`, evaluated from the factored form.
    pub fn normalized_trace(&self) -> Complex64 {
        let dim = self.v.len() as f64;
        self.v
            .iter()
            .zip(self.d.iter())
            .map(|(v, &d)| Complex64::from_polar(1.0, self.gamma * d) * (1.0 - 2.0 * v.norm_sqr()))
            .sum::<Complex64>()
            / dim
    }

    /// Materializes the dense matrix (guarded; test scale only).
    pub fn to_dense(&self) -> Result<Array2<Complex64>> {
        let n = self.v.len();
        if n > DENSE_DIM_GUARD {
            return Err(Error::SizeGuard(format!(
                "dense householder unitary of dimension {n} exceeds the guard"
            )));
        }
        let mut m = Array2::zeros((n, n));
        for i in 0..n {
            let phase = Complex64::from_polar(1.0, self.gamma * self.d[i]);
            for j in 0..n {
                let r = if i == j {
                    Complex64::new(1.0, 0.0) - 2.0 * self.v[i] * self.v[j].conj()
                } else {
                    -2.0 * self.v[i] * self.v[j].conj()
                };
                m[[i, j]] = phase * r;
            }
        }
        Ok(m)
    }
}

/// Global dephasing: diagonal phases `gamma * h_i` with `h_i` i.i.d. standard
/// normal, drawn fresh on every call.
pub fn apply_dephasing(state: &mut QuditState, gamma: f64, rng: &mut impl Rng) {
    for a in state.amplitudes_mut() {
        let h: f64 = rng.sample(StandardNormal);
        *a *= Complex64::from_polar(1.0, -gamma * h);
    }
}

/// Analytic mean Hilbert-Schmidt overlap `(1 - 2/dim) exp(-gamma^2/2)`.
pub fn hs_mean(gamma: f64, dim: usize) -> f64 {
    (1.0 - 2.0 / dim as f64) * (-gamma * gamma / 2.0).exp()
}

/// Effective per-step error rate `f(gamma) = 1 - hs_mean(gamma, dim)`.
pub fn f_gamma(gamma: f64, dim: usize) -> f64 {
    1.0 - hs_mean(gamma, dim)
}

/// One DPS measurement event.
#[derive(Debug, Clone, Serialize)]
pub struct DpsEvent {
    pub step: usize,
    pub vertex: usize,
    pub element: usize,
    /// Eigenvalue index; 0 means the symmetry was satisfied.
    pub outcome: usize,
}

/// Everything recorded along one trajectory. Entries are indexed by time slice
/// (`n_steps + 1` of them, slice 0 before any step). After a DPS failure with
/// early stopping, observable entries are NaN and `survived` stays false.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub traj_index: u64,
    pub times: Vec<f64>,
    pub op1: Vec<f64>,
    pub he: Vec<f64>,
    pub hb: Vec<f64>,
    /// `gv[k][t]` for monitored pair `k`.
    pub gv: Vec<Vec<f64>>,
    pub survived: Vec<bool>,
    pub dps_log: Vec<DpsEvent>,
    /// PSV numerator `<O_P1 Pi_s>` per slice (psv mode only).
    pub psv_num: Vec<f64>,
    /// PSV numerator `<H_B Pi_s>` per slice (psv mode only).
    pub psv_hb_num: Vec<f64>,
    /// Symmetry weight `<Pi_s>` per slice (psv mode only).
    pub psv_den: Vec<f64>,
}

/// Shared, immutable inputs for trajectory execution.
pub struct TrajectoryContext<'a> {
    pub geom: &'a LatticeGeometry,
    pub group: &'a FiniteGroup,
    pub trotter: &'a TrotterOp,
    pub electric: &'a ElectricLink,
    pub params: TrotterParams,
    pub noise: NoiseSpec,
    pub mode: RunMode,
    pub master_seed: u64,
    pub schedule: &'a MeasurementSchedule,
    pub sym: Option<&'a SymmetrizedOps>,
    /// Diagonal table of the observed plaquette trace.
    pub op1_table: &'a [f64],
    /// Diagonal table of H_B (with couplings).
    pub hb_table: &'a [f64],
    /// Monitored `(vertex, element)` pairs for gauge-violation tracking.
    pub monitored: &'a [(usize, usize)],
    /// Keep evolving after a failed DPS check (diagnostics only).
    pub continue_after_failure: bool,
}

/// Default monitored set: non-identity elements, keeping one generator per
/// cyclic subgroup already covered (for D3: one rotation, all reflections).
pub fn default_monitored(geom: &LatticeGeometry, group: &FiniteGroup) -> Vec<(usize, usize)> {
    let mut kept: Vec<usize> = Vec::new();
    for g in 1..group.order {
        let covered = kept.iter().any(|&k| {
            // g lies in the cyclic subgroup generated by k
            let mut acc = k;
            loop {
                if acc == g {
                    return true;
                }
                if acc == IDENTITY {
                    return false;
                }
                acc = group.multiply(acc, k);
            }
        });
        if !covered {
            kept.push(g);
        }
    }
    let mut out = Vec::new();
    for v in 0..geom.n_vertices() {
        for &g in &kept {
            out.push((v, g));
        }
    }
    out
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derives the per-trajectory RNG stream for a given purpose
/// (0 = noise, 1 = measurement outcomes).
pub fn trajectory_rng(master_seed: u64, traj_index: u64, purpose: u64) -> ChaCha12Rng {
    let mut seed = [0u8; 32];
    let mut x = splitmix64(master_seed ^ splitmix64(traj_index) ^ splitmix64(purpose.wrapping_mul(0x6a09e667f3bcc909)));
    for chunk in seed.chunks_mut(8) {
        x = splitmix64(x);
        chunk.copy_from_slice(&x.to_le_bytes());
    }
    ChaCha12Rng::from_seed(seed)
}

/// Runs one trajectory: `n_steps` of (Trotter step, noise, optional DPS
/// check), recording observables at every time slice. Fully deterministic
/// given `(master_seed, traj_index)`.
pub fn run_trajectory(ctx: &TrajectoryContext, traj_index: u64) -> Result<TrajectoryRecord> {
    let mut noise_rng = trajectory_rng(ctx.master_seed, traj_index, 0);
    let mut meas_rng = trajectory_rng(ctx.master_seed, traj_index, 1);

    let mut state = initial_state(ctx.geom, ctx.group);
    ctx.noise.validate(state.dim())?;

    let n_slices = ctx.params.n_steps + 1;
    let mut rec = TrajectoryRecord {
        traj_index,
        times: (0..n_slices).map(|t| t as f64 * ctx.params.dt).collect(),
        op1: Vec::with_capacity(n_slices),
        he: Vec::with_capacity(n_slices),
        hb: Vec::with_capacity(n_slices),
        gv: vec![Vec::with_capacity(n_slices); ctx.monitored.len()],
        survived: Vec::with_capacity(n_slices),
        dps_log: Vec::new(),
        psv_num: Vec::with_capacity(n_slices),
        psv_hb_num: Vec::with_capacity(n_slices),
        psv_den: Vec::with_capacity(n_slices),
    };

    let gauss_ops: Vec<_> = ctx
        .monitored
        .iter()
        .map(|&(v, g)| gauss_operator(ctx.geom, v, g, ctx.group))
        .collect();

    let mut alive = true;
    record_slice(ctx, &state, alive, &gauss_ops, &mut rec);

    let mut schedule_pos = 0usize;
    for step in 1..=ctx.params.n_steps {
        if alive || ctx.continue_after_failure {
            ctx.trotter.step(&mut state);
            match ctx.noise.kind {
                NoiseKind::None => {}
                NoiseKind::Householder => {
                    let u = sample_householder_unitary(state.dim(), ctx.noise.gamma, &mut noise_rng);
                    u.apply(&mut state);
                }
                NoiseKind::Dephasing => {
                    apply_dephasing(&mut state, ctx.noise.gamma, &mut noise_rng);
                }
            }
            if ctx.mode == RunMode::Dps {
                let (vertex, element) = ctx.schedule.entry(schedule_pos);
                schedule_pos += 1;
                let outcome =
                    dps_measure(&mut state, ctx.geom, ctx.group, vertex, element, &mut meas_rng)?;
                rec.dps_log.push(DpsEvent {
                    step,
                    vertex,
                    element,
                    outcome,
                });
                if outcome != 0 {
                    alive = false;
                }
            }
        }
        record_slice(ctx, &state, alive, &gauss_ops, &mut rec);
    }

    Ok(rec)
}

fn record_slice(
    ctx: &TrajectoryContext,
    state: &QuditState,
    alive: bool,
    gauss_ops: &[crate::model::GaussOp],
    rec: &mut TrajectoryRecord,
) {
    rec.survived.push(alive);
    if !alive && !ctx.continue_after_failure {
        rec.op1.push(f64::NAN);
        rec.he.push(f64::NAN);
        rec.hb.push(f64::NAN);
        for series in rec.gv.iter_mut() {
            series.push(f64::NAN);
        }
        if ctx.mode == RunMode::Psv {
            rec.psv_num.push(f64::NAN);
            rec.psv_hb_num.push(f64::NAN);
            rec.psv_den.push(f64::NAN);
        }
        return;
    }
    rec.op1.push(state.expectation_diagonal(ctx.op1_table));
    rec.hb.push(state.expectation_diagonal(ctx.hb_table));
    let he: f64 = (0..ctx.geom.n_links)
        .map(|l| state.expectation_link_op(l, &ctx.electric.matrix).re)
        .sum();
    rec.he.push(he);
    for (series, op) in rec.gv.iter_mut().zip(gauss_ops.iter()) {
        series.push(crate::analysis::gauge_violation_of_expectation(
            op.expectation(state),
            ctx.group.element_order(op.element),
        ));
    }
    if ctx.mode == RunMode::Psv {
        let sym = ctx.sym.expect("psv mode needs symmetrized operators");
        let (num, num_hb, den) =
            sym.two_numerators_and_weight(state, ctx.op1_table, ctx.hb_table);
        rec.psv_num.push(num);
        rec.psv_hb_num.push(num_hb);
        rec.psv_den.push(den);
    }
}

/// Builds the full set of model tables shared by every trajectory of a run.
pub struct ModelTables {
    pub geom: LatticeGeometry,
    pub group: FiniteGroup,
    pub electric: ElectricLink,
    pub trotter: TrotterOp,
    pub op1_table: Vec<f64>,
    pub hb_table: Vec<f64>,
    pub monitored: Vec<(usize, usize)>,
    pub schedule: MeasurementSchedule,
    pub sym: SymmetrizedOps,
}

impl ModelTables {
    pub fn build(n_plaquettes: usize, coupling: CouplingParams, dt: f64) -> Result<ModelTables> {
        let geom = crate::model::ladder_geometry(n_plaquettes);
        let group = FiniteGroup::d3()?;
        let electric = crate::model::electric_link_hamiltonian(coupling, &group, "tau")?;
        let trotter = TrotterOp::build(&geom, &group, coupling, &electric, dt);
        let op1_table = plaquette_trace_table(&geom, &group, "tau", 0);
        let hb_table = magnetic_phase_table(&geom, coupling, &group, "tau");
        let monitored = default_monitored(&geom, &group);
        let schedule = MeasurementSchedule::default_for(&geom, &group);
        let sym = SymmetrizedOps::build(&geom, &group);
        Ok(ModelTables {
            geom,
            group,
            electric,
            trotter,
            op1_table,
            hb_table,
            monitored,
            schedule,
            sym,
        })
    }

    pub fn context<'a>(
        &'a self,
        params: TrotterParams,
        noise: NoiseSpec,
        mode: RunMode,
        master_seed: u64,
    ) -> TrajectoryContext<'a> {
        TrajectoryContext {
            geom: &self.geom,
            group: &self.group,
            trotter: &self.trotter,
            electric: &self.electric,
            params,
            noise,
            mode,
            master_seed,
            schedule: &self.schedule,
            sym: Some(&self.sym),
            op1_table: &self.op1_table,
            hb_table: &self.hb_table,
            monitored: &self.monitored,
            continue_after_failure: false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{electric_link_hamiltonian, ladder_geometry};

    fn tables(n: usize, dt: f64) -> ModelTables {
        ModelTables::build(n, CouplingParams::new(0.5).unwrap(), dt).unwrap()
    }

    #[test]
    fn initial_state_properties() {
        let t = tables(2, 0.25);
        let s = initial_state(&t.geom, &t.group);
        assert!((s.norm() - 1.0).abs() < 1e-12);
        assert!((t.sym.weight(&s) - 1.0).abs() < 1e-12);
        assert!(s.expectation_diagonal(&t.op1_table).abs() < 1e-12);
        for v in 0..2 {
            for g in 1..6 {
                let op = gauss_operator(&t.geom, v, g, &t.group);
                assert!((op.expectation(&s) - Complex64::new(1.0, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn noiseless_trotter_preserves_gauss_laws() {
        let t = tables(2, 0.25);
        let mut s = initial_state(&t.geom, &t.group);
        for _ in 0..100 {
            t.trotter.step(&mut s);
        }
        assert!((s.norm() - 1.0).abs() < 1e-9);
        for v in 0..2 {
            for g in 1..6 {
                let op = gauss_operator(&t.geom, v, g, &t.group);
                let gv = crate::analysis::gauge_violation_of_expectation(
                    op.expectation(&s),
                    t.group.element_order(g),
                );
                assert!(gv < 1e-9, "GV({g},{v}) = {gv}");
            }
        }
        assert!((t.sym.weight(&s) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn small_dt_continuity_bound() {
        let t = tables(2, 1e-4);
        let s0 = initial_state(&t.geom, &t.group);
        let mut s = s0.clone();
        t.trotter.step(&mut s);
        let diff: f64 = s
            .amplitudes()
            .iter()
            .zip(s0.amplitudes().iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        // || psi(dt) - psi(0) || <= dt (||H_B|| + L ||H_E||); crude norms.
        let hb_norm = t.hb_table.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        let he_norm = t
            .electric
            .eigenvalues
            .iter()
            .fold(0.0f64, |m, &v| m.max(v.abs()));
        assert!(diff <= 1e-4 * (hb_norm + 4.0 * he_norm) + 1e-12);
    }

    /// Exact-evolution oracle: apply exp(-iHt) via scaled Taylor expansion of
    /// the dense Hamiltonian action (diagonal magnetic + per-link electric).
    fn exact_evolve(t: &ModelTables, state: &QuditState, time: f64) -> QuditState {
        let apply_h = |s: &QuditState| -> QuditState {
            let mut out_amps: Vec<Complex64> = s
                .amplitudes()
                .iter()
                .zip(t.hb_table.iter())
                .map(|(a, &v)| a * v)
                .collect();
            for l in 0..t.geom.n_links {
                let mut part = s.clone();
                part.apply_link_unitary_unchecked(l, &t.electric.matrix);
                for (o, p) in out_amps.iter_mut().zip(part.amplitudes().iter()) {
                    *o += p;
                }
            }
            QuditState::from_amplitudes(s.dim_local(), s.n_links(), out_amps).unwrap()
        };
        let n_sub = (time.abs() / 0.1).ceil().max(1.0) as usize;
        let tau = time / n_sub as f64;
        let mut psi = state.clone();
        for _ in 0..n_sub {
            let mut acc = psi.clone();
            let mut term = psi.clone();
            let mut k = 1.0;
            loop {
                let hterm = apply_h(&term);
                let coeff = Complex64::new(0.0, -tau) / k;
                let amps: Vec<Complex64> =
                    hterm.amplitudes().iter().map(|a| a * coeff).collect();
                term = QuditState::from_amplitudes(psi.dim_local(), psi.n_links(), amps).unwrap();
                let tn = term.norm();
                for (a, b) in acc.amplitudes_mut().iter_mut().zip(term.amplitudes().iter()) {
                    *a += b;
                }
                if tn < 1e-16 {
                    break;
                }
                k += 1.0;
            }
            psi = acc;
        }
        psi
    }

    #[test]
    fn trotter_error_shrinks_with_dt() {
        // First-order product formula: <O_P1> error shrinks roughly linearly
        // as dt is halved, compared with the exact dense-evolution oracle.
        let time = 2.0;
        let mut errors = Vec::new();
        for &dt in &[0.25, 0.125] {
            let t = tables(2, dt);
            let mut s = initial_state(&t.geom, &t.group);
            let steps = (time / dt).round() as usize;
            for _ in 0..steps {
                t.trotter.step(&mut s);
            }
            let exact = exact_evolve(&t, &initial_state(&t.geom, &t.group), time);
            let diff = (s.expectation_diagonal(&t.op1_table)
                - exact.expectation_diagonal(&t.op1_table))
            .abs();
            errors.push(diff);
        }
        assert!(errors[1] < 0.7 * errors[0], "errors {errors:?}");
    }

    #[test]
    fn exact_evolution_conserves_energy() {
        let t = tables(2, 0.25);
        let s0 = initial_state(&t.geom, &t.group);
        let he = |s: &QuditState| -> f64 {
            (0..4)
                .map(|l| s.expectation_link_op(l, &t.electric.matrix).re)
                .sum()
        };
        let e0 = s0.expectation_diagonal(&t.hb_table) + he(&s0);
        let s1 = exact_evolve(&t, &s0, 3.0);
        let e1 = s1.expectation_diagonal(&t.hb_table) + he(&s1);
        assert!((e0 - e1).abs() < 1e-10);
    }

    #[test]
    fn trotter_energy_drift_shrinks_with_dt() {
        let time = 5.0;
        let mut drifts = Vec::new();
        for &dt in &[0.25, 0.125] {
            let t = tables(2, dt);
            let mut s = initial_state(&t.geom, &t.group);
            let he = |s: &QuditState| -> f64 {
                (0..4)
                    .map(|l| s.expectation_link_op(l, &t.electric.matrix).re)
                    .sum()
            };
            let e0 = s.expectation_diagonal(&t.hb_table) + he(&s);
            let steps = (time / dt).round() as usize;
            let mut max_drift = 0.0f64;
            for _ in 0..steps {
                t.trotter.step(&mut s);
                let e = s.expectation_diagonal(&t.hb_table) + he(&s);
                max_drift = max_drift.max((e - e0).abs());
            }
            drifts.push(max_drift);
        }
        assert!(drifts[1] < drifts[0]);
    }

    #[test]
    fn householder_gamma_zero_is_reflection() {
        let mut rng = trajectory_rng(1, 0, 0);
        let u = sample_householder_unitary(36, 0.0, &mut rng);
        let dense = u.to_dense().unwrap();
        assert!(crate::linalg::unitarity_defect(&dense) < 1e-10);
        // A Householder reflection has a single -1 eigenvalue: R v = -v.
        let rv: Vec<Complex64> = (0..36)
            .map(|i| (0..36).map(|j| dense[[i, j]] * u.v[j]).sum())
            .collect();
        for (x, v) in rv.iter().zip(u.v.iter()) {
            assert!((x + v).norm() < 1e-10);
        }
        // Trace identity: Tr R = dim - 2.
        assert!((u.normalized_trace().re - (1.0 - 2.0 / 36.0)).abs() < 1e-10);
    }

    #[test]
    fn householder_dense_matches_factored_application() {
        let mut rng = trajectory_rng(2, 0, 0);
        let u = sample_householder_unitary(36, 0.3, &mut rng);
        let dense = u.to_dense().unwrap();
        assert!(crate::linalg::unitarity_defect(&dense) < 1e-10);
        let mut s = QuditState::uniform(6, 2);
        let amps0 = s.amplitudes().to_vec();
        u.apply(&mut s);
        for i in 0..36 {
            let expected: Complex64 = (0..36).map(|j| dense[[i, j]] * amps0[j]).sum();
            assert!((s.amplitudes()[i] - expected).norm() < 1e-12);
        }
        assert!((s.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn householder_mc_mean_matches_analytic() {
        let dim = 1296;
        let gamma = 0.2;
        let n = 2000;
        let mut rng = trajectory_rng(3, 0, 0);
        let samples: Vec<f64> = (0..n)
            .map(|_| sample_householder_unitary(dim, gamma, &mut rng).normalized_trace().re)
            .collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let se = (var / n as f64).sqrt();
        let expected = hs_mean(gamma, dim);
        assert!(
            (mean - expected).abs() < 3.0 * se.max(1e-6),
            "mean {mean} vs {expected} (se {se})"
        );
    }

    #[test]
    fn dephasing_preserves_diagonal_observables() {
        let t = tables(2, 0.25);
        let mut s = initial_state(&t.geom, &t.group);
        t.trotter.step(&mut s);
        let before = s.expectation_diagonal(&t.op1_table);
        let norm_before = s.norm();
        let mut rng = trajectory_rng(4, 0, 0);
        apply_dephasing(&mut s, 0.4, &mut rng);
        assert!((s.expectation_diagonal(&t.op1_table) - before).abs() < 1e-12);
        assert!((s.norm() - norm_before).abs() < 1e-13);
    }

    #[test]
    fn f_gamma_values() {
        assert!((f_gamma(0.2, 1296) - 0.021_314).abs() < 1e-4);
        assert!(f_gamma(0.0, 1_000_000) < 1e-5);
        assert!(hs_mean(0.0, 1296) > hs_mean(0.1, 1296));
    }

    #[test]
    fn trajectory_determinism_and_noiseless_reference() {
        let t = tables(2, 0.25);
        let params = TrotterParams {
            dt: 0.25,
            n_steps: 20,
            coupling: CouplingParams::new(0.5).unwrap(),
        };
        let ctx = t.context(params, NoiseSpec::none(), RunMode::Noiseless, 11);
        let a = run_trajectory(&ctx, 0).unwrap();
        let b = run_trajectory(&ctx, 0).unwrap();
        assert_eq!(a.op1, b.op1);
        // Noiseless with DPS is a no-op: identical observables, all survived.
        let ctx_dps = t.context(params, NoiseSpec::none(), RunMode::Dps, 11);
        let c = run_trajectory(&ctx_dps, 0).unwrap();
        assert!(c.survived.iter().all(|&s| s));
        for (x, y) in a.op1.iter().zip(c.op1.iter()) {
            assert!((x - y).abs() < 1e-9);
        }
        // Final gauge violation stays tiny without noise.
        let max_gv = a
            .gv
            .iter()
            .flat_map(|s| s.iter())
            .fold(0.0f64, |m, &v| m.max(v));
        assert!(max_gv < 1e-9);
    }

    #[test]
    fn noisy_ensemble_departs_from_noiseless() {
        let t = tables(2, 0.25);
        let params = TrotterParams {
            dt: 0.25,
            n_steps: 16,
            coupling: CouplingParams::new(0.5).unwrap(),
        };
        let noiseless = run_trajectory(
            &t.context(params, NoiseSpec::none(), RunMode::Noiseless, 5),
            0,
        )
        .unwrap();
        let noise = NoiseSpec {
            kind: NoiseKind::Householder,
            gamma: 0.2,
        };
        let m = 60;
        let ctx = t.context(params, noise, RunMode::Noisy, 5);
        let mut mean = vec![0.0; params.n_steps + 1];
        for traj in 0..m {
            let rec = run_trajectory(&ctx, traj).unwrap();
            for (acc, v) in mean.iter_mut().zip(rec.op1.iter()) {
                *acc += v / m as f64;
            }
        }
        // By t/a = 3-4 the noisy mean visibly departs from the noiseless one.
        let late = params.n_steps;
        assert!((mean[late] - noiseless.op1[late]).abs() > 0.05);
    }

    #[test]
    fn householder_rejected_at_three_plaquette_size() {
        let noise = NoiseSpec {
            kind: NoiseKind::Householder,
            gamma: 0.1,
        };
        assert!(noise.validate(46656).is_err());
        let deph = NoiseSpec {
            kind: NoiseKind::Dephasing,
            gamma: 0.1,
        };
        assert!(deph.validate(46656).is_ok());
        let geom = ladder_geometry(3);
        let g = FiniteGroup::d3().unwrap();
        assert_eq!(geom.n_links, 6);
        // Electric Hamiltonian is size-independent (per link).
        assert!(electric_link_hamiltonian(CouplingParams::new(0.5).unwrap(), &g, "tau").is_ok());
    }
}
