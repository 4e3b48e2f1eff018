//! Sudden quench of the trap strength from `γ` to 1: initial ground state,
//! overlaps with the final eigenstates, work statistics and the closed-form
//! variances of the non-interacting and hard-core limits.
//!
//! Two routes are provided. The plain one diagonalizes the final Hamiltonian
//! on a whole truncated space. The separated one uses that the trap keeps the
//! centre of mass free: it diagonalizes only the centre-of-mass ground sector
//! and attaches the exact centre-of-mass ladder, so every level `n + ε_j`
//! carries exactly integer-spaced copies.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fmath::{abs, exp, ln, powf};
use crate::fock::{build_hamiltonian, cm_ground_basis, cm_lowering, InteractionMode, ManyBodyOperator, ManyBodySpace};
use crate::linalg::{dot, CsrMat, Mat};
use crate::spectral::{diagonalize_lowest, diagonalize_matrix, EigenSystem};
use crate::twobody::squeeze_overlaps;

pub const DEFAULT_COMPLETENESS: f64 = 0.999;

/// Weight of the squeezed centre-of-mass vacuum left beyond the ladder cutoff.
pub const DEFAULT_CM_TAIL: f64 = 1e-12;

/// Ground state of `H(g, γ)` expressed in the unit-frequency basis.
#[derive(Clone, Debug)]
pub struct InitialState {
    pub psi: Vec<f64>,
    pub energy: f64,
    /// Norm times one minus the estimated weight beyond the cutoff.
    pub completeness: f64,
}

/// Estimated completeness of a state from its weights per total-quanta shell.
///
/// Shells of the state's parity are summed in adjacent pairs, which smooths
/// the period-four oscillation of squeezed states. The weight beyond the
/// cutoff is extrapolated from the upper two thirds of these blocks, with
/// whichever of a geometric or a power-law decay fits them better in the log.
/// Cusp-bearing states decay as a power law, non-interacting ones
/// geometrically.
pub fn completeness_gauge(shell_weights: &[f64]) -> f64 {
    let total: f64 = shell_weights.iter().sum();
    // parity of the dominant shell; the other parity only carries rounding
    let parity = match shell_weights.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)) {
        Some((q, _)) => q % 2,
        None => return 0.0,
    };
    let top = match (0..shell_weights.len()).rev().find(|&q| q % 2 == parity && shell_weights[q] > 1e-300) {
        Some(t) => t,
        None => return 0.0,
    };
    if top < 2 {
        return total;
    }
    // blocks (q−2, q) counted down from the top, labelled by their midpoint
    let mut blocks: Vec<(f64, f64)> = Vec::new();
    let mut q = top;
    while q >= 2 && 3 * q >= top {
        let w = shell_weights[q] + shell_weights[q - 2];
        if w <= 1e-300 {
            break;
        }
        blocks.push(((q - 1) as f64, w));
        if q < 4 {
            break;
        }
        q -= 4;
    }
    let top_mid = (top - 1) as f64;
    let tail = if blocks.len() < 3 {
        // too few blocks for a fit: last ratio, if any
        let (last, prev) = match blocks.len() {
            2 => (blocks[0].1, blocks[1].1),
            _ => (shell_weights[top], shell_weights[top - 2]),
        };
        if prev <= 1e-300 {
            return total;
        }
        let rho = last / prev;
        if rho >= 1.0 {
            return 0.0;
        }
        last * rho / (1.0 - rho)
    } else {
        let pts: Vec<(f64, f64)> = blocks.iter().map(|&(m, w)| (m, ln(w))).collect();
        let power = line_fit(pts.iter().map(|&(m, l)| (ln(m), l)));
        let geometric = line_fit(pts.iter().copied());
        match (power, geometric) {
            ((a, b, rp), (_, _, rg)) if rp < rg => power_tail(a, b, top_mid),
            (_, (a, c, _)) => geometric_tail(a, c, top_mid),
        }
    };
    (total * (1.0 - tail)).max(0.0)
}

// Least-squares line y = a + b x; returns (a, b, residual sum of squares).
fn line_fit(pts: impl Iterator<Item = (f64, f64)> + Clone) -> (f64, f64, f64) {
    let n = pts.clone().count() as f64;
    let (sx, sy) = pts.clone().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / n, sy / n);
    let (sxx, sxy) = pts.clone().fold((0.0, 0.0), |(a, b), (x, y)| (a + (x - mx) * (x - mx), b + (x - mx) * (y - my)));
    let b = sxy / sxx;
    let a = my - b * mx;
    let res = pts.map(|(x, y)| (y - a - b * x) * (y - a - b * x)).sum();
    (a, b, res)
}

// Σ_{k≥1} exp(a) (m+4k)^b, with the remainder bounded by the integral.
fn power_tail(a: f64, b: f64, m: f64) -> f64 {
    if b >= -1.0 {
        return f64::INFINITY;
    }
    let mut sum = 0.0;
    let mut q = m;
    for _ in 0..1000 {
        q += 4.0;
        sum += exp(a + b * ln(q));
    }
    sum + exp(a) * powf(q + 2.0, b + 1.0) / (-(b + 1.0) * 4.0)
}

fn geometric_tail(a: f64, c: f64, m: f64) -> f64 {
    if c >= 0.0 {
        return f64::INFINITY;
    }
    let rho = exp(4.0 * c);
    exp(a + c * m) * rho / (1.0 - rho)
}

fn shell_weights<S: ManyBodySpace + ?Sized>(space: &S, psi: &[f64]) -> Vec<f64> {
    let mut w = vec![0.0; space.max_quanta() + 1];
    for (i, &c) in psi.iter().enumerate() {
        w[space.quanta(i)] += c * c;
    }
    w
}

/// Ground state of the initial Hamiltonian on the same space as the final one.
pub fn initial_ground_state<S: ManyBodySpace + ?Sized>(
    space: &S,
    g: f64,
    gamma: f64,
    mode: InteractionMode,
    threshold: f64,
) -> Result<InitialState> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter { name: "gamma", value: gamma });
    }
    let h = build_hamiltonian(space, g, gamma, mode)?;
    let ground = diagonalize_lowest(&h, 1)?;
    let mut psi = ground.vectors.row(0).to_vec();
    fix_sign(&mut psi);
    let completeness = completeness_gauge(&shell_weights(space, &psi));
    if completeness < threshold {
        return Err(Error::Incomplete { completeness, threshold });
    }
    Ok(InitialState { psi, energy: ground.energies[0], completeness })
}

// First entry of magnitude above 1e-8 made positive.
fn fix_sign(v: &mut [f64]) {
    if let Some(x) = v.iter().find(|x| abs(**x) > 1e-8) {
        if *x < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Overlaps of an initial state with the final eigenstates.
#[derive(Clone, Debug)]
pub struct QuenchRecord {
    pub n: usize,
    pub g: f64,
    pub gamma: f64,
    pub e_initial: f64,
    /// `c_j = ⟨ψ_j|ψ_I⟩`, global sign fixed so that `c_0 ≥ 0`.
    pub c: Vec<f64>,
    pub completeness: f64,
}

/// `c = V ψ_I` for the final eigensystem `eig`.
pub fn overlaps(eig: &EigenSystem, init: &InitialState, n: usize, g: f64, gamma: f64, threshold: f64) -> Result<QuenchRecord> {
    if eig.basis_dim() != init.psi.len() {
        return Err(Error::ShapeMismatch("initial state and eigenvectors live in different spaces"));
    }
    let mut c = eig.components(&init.psi);
    if c.first().is_some_and(|&c0| c0 < 0.0) {
        c.iter_mut().for_each(|x| *x = -*x);
    }
    let norm2: f64 = c.iter().map(|x| x * x).sum();
    let completeness = norm2 * init.completeness / init.psi.iter().map(|x| x * x).sum::<f64>();
    if completeness < threshold {
        return Err(Error::Incomplete { completeness, threshold });
    }
    Ok(QuenchRecord { n, g, gamma, e_initial: init.energy, c, completeness })
}

/// Work distribution `P(W)` with `W_j = E_j − E_I`, weight `|c_j|²`.
#[derive(Clone, Debug)]
pub struct WorkStats {
    pub distribution: Vec<(f64, f64)>,
    pub mean: f64,
    pub second_moment: f64,
    pub variance: f64,
}

/// Moments of the work distribution of a quench.
pub fn work_stats(record: &QuenchRecord, energies: &[f64]) -> Result<WorkStats> {
    if energies.len() != record.c.len() {
        return Err(Error::ShapeMismatch("energies and overlaps differ in length"));
    }
    let distribution: Vec<(f64, f64)> =
        energies.iter().zip(&record.c).map(|(e, c)| (e - record.e_initial, c * c)).collect();
    Ok(stats_from(distribution))
}

fn stats_from(distribution: Vec<(f64, f64)>) -> WorkStats {
    let total: f64 = distribution.iter().map(|d| d.1).sum();
    let mean = distribution.iter().map(|(w, p)| w * p).sum::<f64>() / total;
    let second_moment = distribution.iter().map(|(w, p)| w * w * p).sum::<f64>() / total;
    // centred sum avoids cancellation in ⟨W²⟩ − ⟨W⟩²
    let variance = distribution.iter().map(|(w, p)| (w - mean) * (w - mean) * p).sum::<f64>() / total;
    WorkStats { distribution, mean, second_moment, variance }
}

/// Interaction limits with closed-form work variance.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Limit {
    /// `g = 0`.
    G0,
    /// Tonks–Girardeau, `g → ∞`.
    Tg,
}

/// `ΔW² = N/8 (γ−1/γ)²` at `g = 0` and `N(N²+2)/24 (γ−1/γ)²` in the hard-core limit.
pub fn analytic_limit_variance(n: usize, gamma: f64, limit: Limit) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter { name: "N", value: 0.0 });
    }
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter { name: "gamma", value: gamma });
    }
    let s = (gamma - 1.0 / gamma) * (gamma - 1.0 / gamma);
    let nf = n as f64;
    Ok(match limit {
        Limit::G0 => nf / 8.0 * s,
        Limit::Tg => nf * (nf * nf + 2.0) / 24.0 * s,
    })
}

/// Quench on a whole truncated space: final eigensystem, initial state and
/// overlaps.
#[derive(Clone, Debug)]
pub struct PlainQuench {
    pub eig: EigenSystem,
    pub initial: InitialState,
    pub record: QuenchRecord,
}

impl PlainQuench {
    pub fn work_stats(&self) -> WorkStats {
        work_stats(&self.record, &self.eig.energies).expect("shapes fixed at construction")
    }
}

/// Diagonalize `H(g, 1)` fully and project the ground state of `H(g, γ)`.
pub fn plain_quench<S: ManyBodySpace + ?Sized>(
    space: &S,
    g: f64,
    gamma: f64,
    mode: InteractionMode,
    threshold: f64,
) -> Result<PlainQuench> {
    plain_quench_with(space, g, gamma, mode, threshold, &mut |h| crate::spectral::diagonalize(h))
}

/// [`plain_quench`] with the final eigensystem supplied by `solve`, for
/// instance from a cache.
pub fn plain_quench_with<S: ManyBodySpace + ?Sized>(
    space: &S,
    g: f64,
    gamma: f64,
    mode: InteractionMode,
    threshold: f64,
    solve: &mut dyn FnMut(&ManyBodyOperator) -> Result<EigenSystem>,
) -> Result<PlainQuench> {
    let h = build_hamiltonian(space, g, 1.0, mode)?;
    let eig = solve(&h)?;
    let initial = initial_ground_state(space, g, gamma, mode, threshold)?;
    let record = overlaps(&eig, &initial, space.n_particles(), g, gamma, threshold)?;
    Ok(PlainQuench { eig, initial, record })
}

/// Quench in the separated form: relative levels from the centre-of-mass
/// ground sector, centre of mass as an exact ladder.
#[derive(Clone, Debug)]
pub struct SeparatedQuench {
    pub n: usize,
    pub g: f64,
    pub gamma: f64,
    pub q_max: usize,
    /// Levels `ε_j` of the final Hamiltonian in the sector (they include the
    /// centre-of-mass zero point ½); vectors are in sector coordinates.
    pub rel: EigenSystem,
    /// Orthonormal rows spanning the sector, in lab-basis coordinates.
    pub sector: Mat,
    /// Relative overlaps `⟨ε_j|ψ_rel⟩`, sign fixed so that the first is ≥ 0.
    pub c_rel: Vec<f64>,
    /// Centre-of-mass overlaps `s_n = ⟨n|0_γ⟩` for `n = 0..=M`.
    pub cm: Vec<f64>,
    /// Relative ground energy of the initial trap.
    pub rel_initial: f64,
    pub e_initial: f64,
    pub completeness: f64,
}

/// `V M Vᵀ` for sparse `V` and sparse `M`.
fn project_sparse(v: &CsrMat, m: &CsrMat) -> Mat {
    v.matmul(m).matmul(&v.transpose()).to_dense()
}

fn op_csr(op: &ManyBodyOperator) -> CsrMat {
    op.to_csr()
}

/// Build the separated quench. `cm_tail` bounds the squeezed-vacuum weight
/// dropped beyond the ladder cutoff.
pub fn separated_quench<S: ManyBodySpace + ?Sized>(
    space: &S,
    g: f64,
    gamma: f64,
    mode: InteractionMode,
    threshold: f64,
    cm_tail: f64,
) -> Result<SeparatedQuench> {
    separated_quench_with(space, g, gamma, mode, threshold, cm_tail, &mut |_, h| diagonalize_matrix(h))
}

/// Which sector Hamiltonian a solver hook is asked to diagonalize.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    /// `H(g, 1)`; all levels are needed.
    Final,
    /// `H(g, γ)`; only the ground state is used.
    Initial,
}

/// [`separated_quench`] with the sector eigensystems supplied by `solve`.
pub fn separated_quench_with<S: ManyBodySpace + ?Sized>(
    space: &S,
    g: f64,
    gamma: f64,
    mode: InteractionMode,
    threshold: f64,
    cm_tail: f64,
    solve: &mut dyn FnMut(Stage, &Mat) -> Result<EigenSystem>,
) -> Result<SeparatedQuench> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter { name: "gamma", value: gamma });
    }
    let n = space.n_particles();
    let lowering = cm_lowering(space)?;
    let sector = cm_ground_basis(space, &lowering)?;
    let k = CsrMat::from_dense(&sector);
    let h_final = project_sparse(&k, &op_csr(&build_hamiltonian(space, g, 1.0, mode)?));
    let h_init = project_sparse(&k, &op_csr(&build_hamiltonian(space, g, gamma, mode)?));
    let rel = solve(Stage::Final, &h_final)?;
    let init = solve(Stage::Initial, &h_init)?;
    if rel.basis_dim() != h_final.rows() || init.basis_dim() != h_init.rows() || init.dim() == 0 {
        return Err(Error::ShapeMismatch("solver returned a system of the wrong size"));
    }
    let mut w = init.vectors.row(0).to_vec();
    // CM vacuum expectation of the γ-trap CM oscillator
    let rel_initial = init.energies[0] - 0.25 * (1.0 + gamma * gamma);
    let e_initial = 0.5 * gamma + rel_initial;
    let mut c_rel = rel.components(&w);
    if c_rel[0] < 0.0 {
        c_rel.iter_mut().for_each(|x| *x = -*x);
        w.iter_mut().for_each(|x| *x = -*x);
    }
    let lab = sector.t_matvec(&w);
    let rel_complete = completeness_gauge(&shell_weights(space, &lab));
    let cm = cm_ladder_overlaps(gamma, cm_tail);
    let cm_weight: f64 = cm.iter().map(|x| x * x).sum();
    let completeness = rel_complete * cm_weight;
    if completeness < threshold {
        return Err(Error::Incomplete { completeness, threshold });
    }
    Ok(SeparatedQuench {
        n,
        g,
        gamma,
        q_max: space.max_quanta(),
        rel,
        sector,
        c_rel,
        cm,
        rel_initial,
        e_initial,
        completeness,
    })
}

/// Squeezed-vacuum overlaps `s_n` up to the first even `n` beyond which the
/// remaining weight is below `tail`.
pub fn cm_ladder_overlaps(gamma: f64, tail: f64) -> Vec<f64> {
    let mut rows = 16;
    loop {
        let s = squeeze_overlaps(gamma, rows, 1).column(0);
        let total: f64 = s.iter().map(|x| x * x).sum();
        let mut acc = 0.0;
        for (m, x) in s.iter().enumerate() {
            acc += x * x;
            if 1.0 - acc < tail && (total - acc) < tail {
                return s[..=m].to_vec();
            }
        }
        rows *= 2;
        if rows > 1 << 14 {
            return s;
        }
    }
}

impl SeparatedQuench {
    /// Relative eigenvectors as rows in lab-basis coordinates.
    pub fn lab_vectors(&self) -> Mat {
        self.rel.vectors.matmul(&self.sector)
    }

    /// Highest centre-of-mass quantum kept.
    pub fn cm_cutoff(&self) -> usize {
        self.cm.len() - 1
    }

    pub fn rel_dim(&self) -> usize {
        self.rel.dim()
    }

    /// Work distribution over the product levels `(n, j)`.
    pub fn work_distribution(&self) -> Vec<(f64, f64)> {
        let mut d = Vec::with_capacity(self.cm.len() * self.rel_dim());
        for (n, s) in self.cm.iter().enumerate() {
            if *s == 0.0 {
                continue;
            }
            for (e, c) in self.rel.energies.iter().zip(&self.c_rel) {
                d.push((n as f64 + e - self.e_initial, s * s * c * c));
            }
        }
        d
    }

    /// Relative part of the work statistics (`W = ε_j − ½ − E_rel`).
    pub fn rel_work_stats(&self) -> WorkStats {
        let d = self.rel.energies.iter().zip(&self.c_rel).map(|(e, c)| (e - 0.5 - self.rel_initial, c * c)).collect();
        stats_from(d)
    }

    /// Centre-of-mass part of the work statistics.
    pub fn cm_work_stats(&self) -> WorkStats {
        let d = self.cm.iter().enumerate().map(|(n, s)| (n as f64 + 0.5 - 0.5 * self.gamma, s * s)).collect();
        stats_from(d)
    }

    /// Full statistics; the variance is the sum of the independent parts.
    pub fn work_stats(&self) -> WorkStats {
        let mut w = stats_from(self.work_distribution());
        let (cm, rel) = (self.cm_work_stats(), self.rel_work_stats());
        w.variance = cm.variance + rel.variance;
        w.second_moment = w.variance + w.mean * w.mean;
        w
    }

    /// `max_j |⟨n_cm⟩_j|` over the sector eigenvectors; flags contamination
    /// above `1e-6`.
    pub fn check_cm_quanta<S: ManyBodySpace + ?Sized>(&self, space: &S) -> Result<f64> {
        let lowering = cm_lowering(space)?;
        let vecs = self.lab_vectors();
        let mut worst: f64 = 0.0;
        for j in 0..vecs.rows() {
            let l = lowering.matvec(vecs.row(j));
            worst = worst.max(dot(&l, &l) / space.n_particles() as f64);
        }
        if worst > 1e-6 {
            return Err(Error::CmContamination { max_deviation: worst });
        }
        Ok(worst)
    }
}
