//! Eigensystems of many-body operators, resonance classes of their spectra
//! and audits of the structural conditions behind the conditioned averages:
//! (i) no degeneracies, (ii) no accidental quadruplet resonances
//! `E_k − E_j + E_n − E_m = 0`, (iii) vanishing diagonal operator elements.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fmath::abs;
use crate::fock::{ManyBodyOperator, OpStorage};
use crate::linalg::{dot, lanczos_lowest, sym_eigen, Mat, SymEigen};

/// Ascending energies with orthonormal eigenvectors stored as rows.
#[derive(Clone, Debug)]
pub struct EigenSystem {
    pub energies: Vec<f64>,
    /// Row `j` is the eigenvector of `energies[j]`.
    pub vectors: Mat,
    /// `max |VVᵀ − I|` (sampled on large systems).
    pub ortho_residual: f64,
    /// `max |HV − VE| / max|H|` (sampled on large systems).
    pub eigen_residual: f64,
}

impl EigenSystem {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// Basis dimension of the eigenvectors.
    pub fn basis_dim(&self) -> usize {
        self.vectors.cols()
    }

    /// `V M Vᵀ`: an operator's matrix in the eigenbasis.
    pub fn transform(&self, op: &ManyBodyOperator) -> Mat {
        op.project_rows(&self.vectors)
    }

    /// Components `V ψ` of a state in the eigenbasis.
    pub fn components(&self, psi: &[f64]) -> Vec<f64> {
        self.vectors.matvec(psi)
    }

    fn from_parts(eig: SymEigen, apply: &dyn Fn(&[f64]) -> Vec<f64>, scale: f64) -> Self {
        let k = eig.values.len();
        let rows = sample_rows(k);
        let mut ortho: f64 = 0.0;
        for &i in &rows {
            for j in 0..k {
                let want = if i == j { 1.0 } else { 0.0 };
                ortho = ortho.max(abs(dot(eig.vectors.row(i), eig.vectors.row(j)) - want));
            }
        }
        let mut res: f64 = 0.0;
        for &i in &rows {
            let hv = apply(eig.vectors.row(i));
            for (a, b) in hv.iter().zip(eig.vectors.row(i)) {
                res = res.max(abs(a - eig.values[i] * b));
            }
        }
        EigenSystem {
            energies: eig.values,
            vectors: eig.vectors,
            ortho_residual: ortho,
            eigen_residual: res / scale.max(1e-300),
        }
    }

    /// Check the stored residuals against the documented gates.
    pub fn validate(&self) -> Result<()> {
        if self.ortho_residual > 1e-9 {
            return Err(Error::NoConvergence { what: "eigenvector orthonormality", residual: self.ortho_residual });
        }
        if self.eigen_residual > 1e-8 {
            return Err(Error::NoConvergence { what: "eigen-equation residual", residual: self.eigen_residual });
        }
        Ok(())
    }
}

// All rows on small systems, an even stride of 64 otherwise.
fn sample_rows(k: usize) -> Vec<usize> {
    if k <= 400 {
        (0..k).collect()
    } else {
        let step = k / 64;
        (0..k).step_by(step.max(1)).collect()
    }
}

/// Full eigendecomposition of a dense symmetric matrix.
pub fn diagonalize_matrix(h: &Mat) -> Result<EigenSystem> {
    let eig = sym_eigen(h)?;
    let scale = h.max_abs();
    let es = EigenSystem::from_parts(eig, &|v| h.matvec(v), scale);
    es.validate()?;
    Ok(es)
}

/// Full decomposition of a Hermitian many-body operator.
pub fn diagonalize(op: &ManyBodyOperator) -> Result<EigenSystem> {
    if !op.hermitian || op.phase != crate::fock::Phase::Real {
        return Err(Error::ShapeMismatch("diagonalize needs a real symmetric operator"));
    }
    diagonalize_matrix(&op.to_dense())
}

/// Lowest `k` eigenpairs by Lanczos (sparse storage) or dense fallback.
pub fn diagonalize_lowest(op: &ManyBodyOperator, k: usize) -> Result<EigenSystem> {
    if !op.hermitian || op.phase != crate::fock::Phase::Real {
        return Err(Error::ShapeMismatch("diagonalize needs a real symmetric operator"));
    }
    let n = op.dim();
    let k = k.min(n);
    match &op.storage {
        OpStorage::Dense(m) => {
            let mut full = diagonalize_matrix(m)?;
            full.energies.truncate(k);
            let mut v = Mat::zeros(k, n);
            for j in 0..k {
                v.row_mut(j).copy_from_slice(full.vectors.row(j));
            }
            full.vectors = v;
            Ok(full)
        }
        OpStorage::Sparse(s) => {
            let scale = (0..n).flat_map(|i| s.row_entries(i).map(|(_, v)| abs(v))).fold(0.0, f64::max);
            let eig = lanczos_lowest(n, k, &|x, y| s.matvec_into(x, y), 1e-10, 200)?;
            let es = EigenSystem::from_parts(eig, &|v| s.matvec(v), scale);
            es.validate()?;
            Ok(es)
        }
    }
}

/// Ordered pairs `(j, k)` grouped by the value of `E_k − E_j`.
#[derive(Clone, Debug)]
pub struct ResonanceClasses {
    pub tol: f64,
    /// Pairs sorted by difference; class `c` is `pairs[bounds[c]..bounds[c+1]]`.
    pub pairs: Vec<(u32, u32)>,
    pub bounds: Vec<usize>,
    /// Mean difference of each class.
    pub values: Vec<f64>,
    /// Set when some class spans far more than `tol` (chained merging).
    pub merge_warning: bool,
}

impl ResonanceClasses {
    pub fn n_classes(&self) -> usize {
        self.values.len()
    }

    pub fn class(&self, c: usize) -> &[(u32, u32)] {
        &self.pairs[self.bounds[c]..self.bounds[c + 1]]
    }

    /// Class sizes in order of increasing difference.
    pub fn sizes(&self) -> Vec<usize> {
        self.bounds.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// Partition all ordered pairs by `E_k − E_j`, joining neighbours whose
/// differences are within `tol` (transitive closure) by sorting and sweeping.
pub fn resonance_classes(energies: &[f64], tol: f64) -> ResonanceClasses {
    resonance_classes_filtered(energies, tol, |_, _| true)
}

/// As [`resonance_classes`], restricted to pairs accepted by `keep(j, k)`.
pub fn resonance_classes_filtered(energies: &[f64], tol: f64, keep: impl Fn(usize, usize) -> bool) -> ResonanceClasses {
    let d = energies.len();
    let mut items: Vec<(f64, u32, u32)> = Vec::with_capacity(d * d);
    for j in 0..d {
        for k in 0..d {
            if keep(j, k) {
                items.push((energies[k] - energies[j], j as u32, k as u32));
            }
        }
    }
    items.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut bounds = vec![0usize];
    let mut values = Vec::new();
    let mut merge_warning = false;
    let mut start = 0;
    for i in 1..=items.len() {
        if i == items.len() || items[i].0 - items[i - 1].0 > tol {
            if i > start {
                let span = items[i - 1].0 - items[start].0;
                if span > 10.0 * tol && tol > 0.0 {
                    merge_warning = true;
                }
                let mean = items[start..i].iter().map(|x| x.0).sum::<f64>() / (i - start) as f64;
                values.push(mean);
                bounds.push(i);
            }
            start = i;
        }
    }
    let pairs = items.into_iter().map(|(_, j, k)| (j, k)).collect();
    ResonanceClasses { tol, pairs, bounds, values, merge_warning }
}

/// Groups of (near-)degenerate levels: consecutive sorted energies within `tol`.
pub fn degenerate_blocks(energies: &[f64], tol: f64) -> Vec<core::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=energies.len() {
        if i == energies.len() || energies[i] - energies[i - 1] > tol {
            out.push(start..i);
            start = i;
        }
    }
    out
}

/// Outcome of the structural-condition audit.
#[derive(Clone, Debug)]
pub struct ResonanceReport {
    pub tol: f64,
    pub degeneracy_tol: f64,
    /// Adjacent levels closer than `degeneracy_tol`: `(j, j+1, gap)`.
    pub degenerate_pairs: Vec<(usize, usize, f64)>,
    /// Unordered pairs of distinct level pairs `(j≠k)`, `(m≠n)` with
    /// `E_k − E_j = E_m − E_n` within `tol`, over the whole spectrum.
    pub quadruplet_resonances: u64,
    /// The same count restricted to index pairs that can enter the spectral
    /// sums for the given state: `j,k` in the support of `c` and `n,m`
    /// reachable from it by the first operator. `None` without a state.
    pub relevant_quadruplets: Option<u64>,
    /// `max_j |A_jj|` for each audited operator.
    pub diag_residual: Vec<f64>,
    pub merge_warning: bool,
}

impl ResonanceReport {
    /// Conditions (i)–(iii) for the spectral sums of the given state; falls
    /// back to the full-spectrum quadruplet count when no state was supplied.
    pub fn passes(&self, diag_tol: f64) -> bool {
        let quad = self.relevant_quadruplets.unwrap_or(self.quadruplet_resonances);
        self.degenerate_pairs.is_empty() && quad == 0 && self.diag_residual.iter().all(|&r| r < diag_tol)
    }
}

pub const DEFAULT_RESONANCE_TOL: f64 = 1e-8;

/// Default degeneracy tolerance `1e-9·max|E|`.
pub fn default_degeneracy_tol(energies: &[f64]) -> f64 {
    1e-9 * energies.iter().fold(1.0f64, |m, e| m.max(abs(*e)))
}

/// Audit conditions (i)–(iii). `ops` are operator matrices in the eigenbasis;
/// `state` optionally restricts the quadruplet count to relevant indices.
pub fn check_conditions(energies: &[f64], ops: &[&Mat], tol: f64, state: Option<&[f64]>) -> ResonanceReport {
    let degeneracy_tol = default_degeneracy_tol(energies);
    let degenerate_pairs = energies
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1] - w[0] <= degeneracy_tol)
        .map(|(j, w)| (j, j + 1, w[1] - w[0]))
        .collect();
    let classes = resonance_classes_filtered(energies, tol, |j, k| j != k);
    let quadruplet_resonances = classes.sizes().iter().map(|&s| (s as u64) * (s as u64 - 1) / 2).sum();
    let mut merge_warning = classes.merge_warning;
    let relevant_quadruplets = state.map(|c| {
        let d = energies.len();
        let support: Vec<bool> = c.iter().map(|x| abs(*x) > 1e-12).collect();
        let mut reach = vec![false; d];
        if let Some(a) = ops.first() {
            for n in 0..d {
                reach[n] = (0..d).any(|k| support[k] && abs(a[(n, k)]) > 1e-12);
            }
        }
        let wanted = |j: usize, k: usize| j != k && ((support[j] && support[k]) || (reach[j] && reach[k]));
        let cl = resonance_classes_filtered(energies, tol, wanted);
        merge_warning |= cl.merge_warning;
        let mut count = 0u64;
        for c in 0..cl.n_classes() {
            let (mut s1, mut s2, mut both) = (0u64, 0u64, 0u64);
            for &(j, k) in cl.class(c) {
                let (j, k) = (j as usize, k as usize);
                let a = support[j] && support[k];
                let b = reach[j] && reach[k];
                s1 += a as u64;
                s2 += b as u64;
                both += (a && b) as u64;
            }
            // (j,k) from the state side matched with (n,m) from the reachable side
            count += s1 * s2 - both;
        }
        count
    });
    let diag_residual = ops.iter().map(|a| (0..a.rows()).fold(0.0f64, |m, j| m.max(abs(a[(j, j)])))).collect();
    ResonanceReport {
        tol,
        degeneracy_tol,
        degenerate_pairs,
        quadruplet_resonances,
        relevant_quadruplets,
        diag_residual,
        merge_warning,
    }
}
