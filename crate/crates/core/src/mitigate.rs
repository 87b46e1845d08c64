//! Error mitigation: dynamical post-selection (DPS) measurements and
//! post-processed symmetry verification (PSV) estimators.

use num_complex::Complex64;
use rand::Rng;

use crate::evolve::TrajectoryRecord;
use crate::group::FiniteGroup;
use crate::model::{gauss_operator, tuple_link_maps, LatticeGeometry};
use crate::statevec::QuditState;
use crate::{Error, Result};

/// Cyclic DPS measurement schedule: one `(vertex, element)` check per Trotter
/// step. Elements vary in the outer loop, vertices in the inner loop, so one
/// full cycle visits every non-identity element at every vertex and has length
/// `V (|G| - 1)`.
#[derive(Debug, Clone)]
pub struct MeasurementSchedule {
    pub entries: Vec<(usize, usize)>,
}

impl MeasurementSchedule {
    pub fn default_for(geom: &LatticeGeometry, group: &FiniteGroup) -> MeasurementSchedule {
        let mut entries = Vec::new();
        for g in 1..group.order {
            for v in 0..geom.n_vertices() {
                entries.push((v, g));
            }
        }
        MeasurementSchedule { entries }
    }

    pub fn cycle_len(&self) -> usize {
        self.entries.len()
    }

    /// Entry at schedule position `pos` (wrapping around the cycle).
    pub fn entry(&self, pos: usize) -> (usize, usize) {
        self.entries[pos % self.entries.len()]
    }
}

/// Born probabilities for measuring the Gauss operator `Theta_{g,v}`.
///
/// `Theta` has order `N` (2 for reflections, 3 for rotations), so its spectral
/// projectors are `P_k = (1/N) sum_m w^{-km} Theta^m` with `w = exp(2 pi i/N)`
/// and the probabilities follow from the moments `<Theta^m>`.
pub fn dps_probabilities(
    state: &QuditState,
    geom: &LatticeGeometry,
    group: &FiniteGroup,
    vertex: usize,
    element: usize,
) -> Result<Vec<f64>> {
    let n = group.element_order(element);
    let mut moments = vec![Complex64::new(1.0, 0.0); n];
    let mut power = element;
    for m in 1..n {
        let op = gauss_operator(geom, vertex, power, group);
        moments[m] = op.expectation(state);
        power = group.multiply(power, element);
    }
    let w = 2.0 * std::f64::consts::PI / n as f64;
    let mut probs = Vec::with_capacity(n);
    for k in 0..n {
        let p: Complex64 = (0..n)
            .map(|m| Complex64::from_polar(1.0, -w * (k * m) as f64) * moments[m])
            .sum::<Complex64>()
            / n as f64;
        if p.im.abs() > 1e-9 || p.re < -1e-9 {
            return Err(Error::Measurement(format!(
                "invalid projector probability {p} for k={k}"
            )));
        }
        probs.push(p.re.max(0.0));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Measurement(format!(
            "projector probabilities sum to {total}"
        )));
    }
    Ok(probs)
}

/// Projective measurement of `Theta_{g,v}`: samples an eigenvalue sector,
/// collapses the state onto it, and returns the outcome index `k`
/// (eigenvalue `w^k`; `k = 0` means the local symmetry is intact).
pub fn dps_measure(
    state: &mut QuditState,
    geom: &LatticeGeometry,
    group: &FiniteGroup,
    vertex: usize,
    element: usize,
    rng: &mut impl Rng,
) -> Result<usize> {
    let probs = dps_probabilities(state, geom, group, vertex, element)?;
    let n = probs.len();
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut outcome = n - 1;
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            outcome = k;
            break;
        }
    }

    // Collapse: P_k psi = (1/N) sum_m w^{-km} Theta^m psi, then renormalize.
    let w = 2.0 * std::f64::consts::PI / n as f64;
    let mut acc_amps: Vec<Complex64> = state.amplitudes().to_vec();
    let mut power = element;
    for m in 1..n {
        let op = gauss_operator(geom, vertex, power, group);
        let mut rotated = state.clone();
        op.apply(&mut rotated);
        let phase = Complex64::from_polar(1.0, -w * (outcome * m) as f64);
        for (a, r) in acc_amps.iter_mut().zip(rotated.amplitudes().iter()) {
            *a += phase * r;
        }
        power = group.multiply(power, element);
    }
    let inv_n = 1.0 / n as f64;
    for a in &mut acc_amps {
        *a *= inv_n;
    }
    *state = QuditState::from_amplitudes(state.dim_local(), state.n_links(), acc_amps)?;
    let norm = state.normalize();
    if norm * norm < 1e-14 {
        return Err(Error::Measurement(
            "collapsed onto a zero-probability sector".into(),
        ));
    }
    Ok(outcome)
}

/// Per-slice summary of a post-selected ensemble.
#[derive(Debug, Clone, Copy)]
pub struct SliceStats {
    pub mean: f64,
    pub std: f64,
    pub stderr: f64,
    pub n_valid: usize,
}

fn slice_stats(values: impl Iterator<Item = f64>) -> SliceStats {
    let vals: Vec<f64> = values.filter(|v| v.is_finite()).collect();
    let n = vals.len();
    if n == 0 {
        return SliceStats {
            mean: f64::NAN,
            std: f64::NAN,
            stderr: f64::NAN,
            n_valid: 0,
        };
    }
    let mean = vals.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt()
    } else {
        0.0
    };
    SliceStats {
        mean,
        std,
        stderr: std / (n as f64).sqrt(),
        n_valid: n,
    }
}

/// Survivor-conditioned ensemble average of a per-trajectory series selected
/// by `pick`. Trajectories that have failed a DPS check by a given slice are
/// excluded there; a slice with zero survivors reports NaN.
pub fn dps_ensemble_average<F>(records: &[TrajectoryRecord], pick: F) -> Vec<SliceStats>
where
    F: Fn(&TrajectoryRecord) -> &[f64],
{
    let n_slices = records.first().map_or(0, |r| r.times.len());
    (0..n_slices)
        .map(|t| {
            slice_stats(records.iter().filter_map(|r| {
                if r.survived[t] {
                    Some(pick(r)[t])
                } else {
                    None
                }
            }))
        })
        .collect()
}

/// Fraction of trajectories that have passed every DPS check up to each slice.
pub fn survival_series(records: &[TrajectoryRecord]) -> Vec<f64> {
    let n_slices = records.first().map_or(0, |r| r.times.len());
    let m = records.len() as f64;
    (0..n_slices)
        .map(|t| records.iter().filter(|r| r.survived[t]).count() as f64 / m)
        .collect()
}

/// PSV ratio estimator per slice: the ensemble mean of the numerators divided
/// by the ensemble mean of the symmetry weights (ratio of means, not mean of
/// ratios).
pub fn psv_estimate(records: &[TrajectoryRecord]) -> Vec<f64> {
    psv_ratio_series(records, |r| &r.psv_num)
}

/// Ratio-of-means estimator for an arbitrary recorded numerator series.
pub fn psv_ratio_series<F>(records: &[TrajectoryRecord], pick: F) -> Vec<f64>
where
    F: Fn(&TrajectoryRecord) -> &[f64],
{
    let n_slices = records.first().map_or(0, |r| r.psv_den.len());
    let m = records.len() as f64;
    (0..n_slices)
        .map(|t| {
            let num: f64 = records.iter().map(|r| pick(r)[t]).sum::<f64>() / m;
            let den: f64 = records.iter().map(|r| r.psv_den[t]).sum::<f64>() / m;
            num / den
        })
        .collect()
}

/// Ensemble-mean symmetry weight `<Pi_s>` per slice.
pub fn psv_mean_weight(records: &[TrajectoryRecord]) -> Vec<f64> {
    let n_slices = records.first().map_or(0, |r| r.psv_den.len());
    let m = records.len() as f64;
    (0..n_slices)
        .map(|t| records.iter().map(|r| r.psv_den[t]).sum::<f64>() / m)
        .collect()
}

/// The `2 |G|^V` correlators a hardware run would estimate per time slice:
/// `(<O Theta_t>, <Theta_t>)` for every gauge-product tuple.
pub fn psv_correlator_decomposition(
    state: &QuditState,
    sym: &crate::model::SymmetrizedOps,
    diag: &[f64],
) -> Vec<(Complex64, Complex64)> {
    sym.perms
        .iter()
        .map(|perm| state.correlator_permutation(diag, perm))
        .collect()
}

fn maps_commute(a: &[Vec<usize>], b: &[Vec<usize>]) -> bool {
    a.iter().zip(b.iter()).all(|(pa, pb)| {
        (0..pa.len()).all(|x| pa[pb[x]] == pb[pa[x]])
    })
}

/// Greedy first-fit grouping of the `|G|^V` gauge-product operators into
/// mutually commuting cliques (simultaneously measurable on hardware). Two
/// products commute iff their per-link maps commute on every link, which is
/// checked on the `|G|`-element maps rather than the full Hilbert space.
pub fn commutation_cliques(geom: &LatticeGeometry, group: &FiniteGroup) -> Vec<Vec<usize>> {
    let v = geom.n_vertices();
    let count = group.order.pow(v as u32);
    let tuples: Vec<Vec<usize>> = (0..count)
        .map(|mut i| {
            (0..v)
                .map(|_| {
                    let g = i % group.order;
                    i /= group.order;
                    g
                })
                .collect()
        })
        .collect();
    let maps: Vec<Vec<Vec<usize>>> = tuples
        .iter()
        .map(|t| tuple_link_maps(geom, group, t))
        .collect();

    let mut cliques: Vec<Vec<usize>> = Vec::new();
    for i in 0..count {
        let slot = cliques
            .iter_mut()
            .find(|c| c.iter().all(|&j| maps_commute(&maps[i], &maps[j])));
        match slot {
            Some(c) => c.push(i),
            None => cliques.push(vec![i]),
        }
    }
    cliques
}
