//! Squared commutators `C_AB(t) = ‖[A(t), B] ψ_I‖²` after a quench and their
//! time averages.
//!
//! With `φ₁ = A(t)Bψ` and `φ₂ = BA(t)ψ` the parts are `D = ‖φ₁‖²`,
//! `I = ‖φ₂‖²`, `F = ⟨φ₂|φ₁⟩` and `C = D + I − 2 Re F`. Everything is
//! evaluated in the eigenbasis of the final Hamiltonian, where `A(t)` only
//! picks up phases.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fmath::{abs, cos, sin, sqrt};
use crate::fock::{particle_operators, ManyBodyOperator, Phase, TaggedSpace};
use crate::linalg::{dot, sym_eigenvalues, Mat};
use crate::quench::SeparatedQuench;
use crate::spectral::{check_conditions, degenerate_blocks, resonance_classes_filtered, EigenSystem, ResonanceReport};

const PI: f64 = core::f64::consts::PI;

/// An operator in an eigenbasis: the real matrix `m` times `1` or `−i`.
#[derive(Clone, Debug)]
pub struct EigenOperator {
    pub m: Mat,
    pub phase: Phase,
}

impl EigenOperator {
    pub fn real(m: Mat) -> Self {
        EigenOperator { m, phase: Phase::Real }
    }

    /// `V O Vᵀ` for a lab operator and an eigensystem.
    pub fn from_lab(op: &ManyBodyOperator, eig: &EigenSystem) -> Self {
        EigenOperator { m: op.project_rows(&eig.vectors), phase: op.phase }
    }

    pub fn dim(&self) -> usize {
        self.m.rows()
    }

    fn factor(&self) -> Complex64 {
        match self.phase {
            Phase::Real => Complex64::new(1.0, 0.0),
            Phase::MinusI => Complex64::new(0.0, -1.0),
        }
    }

    // (factor · M) x for a complex x given as separate parts
    fn apply(&self, re: &[f64], im: &[f64], out: &mut [Complex64]) {
        let f = self.factor();
        for (i, o) in out.iter_mut().enumerate() {
            let row = self.m.row(i);
            *o = f * Complex64::new(dot(row, re), dot(row, im));
        }
    }
}

/// Energies, operators and initial-state components in one eigenbasis.
#[derive(Clone, Copy, Debug)]
pub struct OtocProblem<'a> {
    pub energies: &'a [f64],
    pub a: &'a EigenOperator,
    pub b: &'a EigenOperator,
    pub c: &'a [f64],
}

impl<'a> OtocProblem<'a> {
    pub fn new(energies: &'a [f64], a: &'a EigenOperator, b: &'a EigenOperator, c: &'a [f64]) -> Result<Self> {
        let d = energies.len();
        if a.dim() != d || b.dim() != d || c.len() != d || a.m.cols() != d || b.m.cols() != d {
            return Err(Error::ShapeMismatch("operators, energies and state must share one eigenbasis"));
        }
        Ok(OtocProblem { energies, a, b, c })
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// `B c`.
    fn b_state(&self) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim()];
        let zero = vec![0.0; self.dim()];
        self.b.apply(self.c, &zero, &mut out);
        out
    }

    /// Largest Bohr frequency of the spectrum.
    pub fn max_frequency(&self) -> f64 {
        match (self.energies.first(), self.energies.last()) {
            (Some(lo), Some(hi)) => hi - lo,
            _ => 0.0,
        }
    }
}

/// Values at one time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OtocPoint {
    pub t: f64,
    pub d: Complex64,
    pub i: Complex64,
    pub f: Complex64,
    pub c: f64,
    /// `⟨ψ|[A(t), B]|ψ⟩`.
    pub comm: Complex64,
}

/// Reusable buffers for [`otoc_point`].
pub struct Workspace {
    b: Vec<Complex64>,
    re: Vec<f64>,
    im: Vec<f64>,
    t1: Vec<Complex64>,
    t2: Vec<Complex64>,
}

impl Workspace {
    pub fn new(p: &OtocProblem) -> Self {
        let d = p.dim();
        Workspace {
            b: p.b_state(),
            re: vec![0.0; d],
            im: vec![0.0; d],
            t1: vec![Complex64::new(0.0, 0.0); d],
            t2: vec![Complex64::new(0.0, 0.0); d],
        }
    }
}

// out = A(t) x with A(t) = e^{iEt} A e^{−iEt}
fn evolve_apply(p: &OtocProblem, t: f64, x: &[Complex64], ws_re: &mut [f64], ws_im: &mut [f64], out: &mut [Complex64]) {
    for (k, xk) in x.iter().enumerate() {
        let ph = Complex64::new(cos(p.energies[k] * t), -sin(p.energies[k] * t));
        let v = ph * xk;
        ws_re[k] = v.re;
        ws_im[k] = v.im;
    }
    p.a.apply(ws_re, ws_im, out);
    for (m, o) in out.iter_mut().enumerate() {
        *o *= Complex64::new(cos(p.energies[m] * t), sin(p.energies[m] * t));
    }
}

/// `D, I, F, C` at time `t` by vector propagation, `O(d²)`.
pub fn otoc_point(p: &OtocProblem, ws: &mut Workspace, t: f64) -> OtocPoint {
    let d = p.dim();
    // φ₁ = A(t) B ψ
    let b = core::mem::take(&mut ws.b);
    let mut phi1 = core::mem::take(&mut ws.t1);
    evolve_apply(p, t, &b, &mut ws.re, &mut ws.im, &mut phi1);
    ws.b = b;
    // φ₂ = B A(t) ψ
    let cc: Vec<Complex64> = p.c.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let mut tmp = core::mem::take(&mut ws.t2);
    evolve_apply(p, t, &cc, &mut ws.re, &mut ws.im, &mut tmp);
    for k in 0..d {
        ws.re[k] = tmp[k].re;
        ws.im[k] = tmp[k].im;
    }
    let mut phi2 = vec![Complex64::new(0.0, 0.0); d];
    p.b.apply(&ws.re, &ws.im, &mut phi2);
    let (mut dd, mut ii, mut cv) = (0.0, 0.0, 0.0);
    let mut ff = Complex64::new(0.0, 0.0);
    let mut comm = Complex64::new(0.0, 0.0);
    for k in 0..d {
        dd += phi1[k].norm_sqr();
        ii += phi2[k].norm_sqr();
        ff += phi2[k].conj() * phi1[k];
        let diff = phi1[k] - phi2[k];
        cv += diff.norm_sqr();
        comm += diff * p.c[k];
    }
    ws.t1 = phi1;
    ws.t2 = tmp;
    OtocPoint { t, d: Complex64::new(dd, 0.0), i: Complex64::new(ii, 0.0), f: ff, c: cv, comm }
}

/// Time series of the correlators.
#[derive(Clone, Debug, Default)]
pub struct OtocSeries {
    pub points: Vec<OtocPoint>,
}

impl OtocSeries {
    pub fn times(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.t).collect()
    }

    pub fn c(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.c).collect()
    }

    /// Largest `|C − (D + I − 2 Re F)|` over the series.
    pub fn identity_residual(&self) -> f64 {
        self.points.iter().map(|p| abs(p.c - (p.d.re + p.i.re - 2.0 * p.f.re))).fold(0.0, f64::max)
    }
}

pub fn otoc_series(p: &OtocProblem, times: &[f64]) -> Result<OtocSeries> {
    if times.is_empty() {
        return Err(Error::EmptyTimeGrid);
    }
    let mut ws = Workspace::new(p);
    Ok(OtocSeries { points: times.iter().map(|&t| otoc_point(p, &mut ws, t)).collect() })
}

/// How a time average was obtained.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AverageMethod {
    ExactResonance { tol: f64 },
    Window { t_max: f64, dt: f64 },
    Conditioned,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeAverage {
    pub value: f64,
    pub method: AverageMethod,
    /// Set when the step does not resolve the fastest Bohr frequency, or when
    /// resonance classes merged over more than ten tolerances.
    pub warning: bool,
}

/// Uniform grid `0, dt, …, T` with `dt` shrunk so that it divides `T`.
pub fn time_grid(t_max: f64, dt: f64) -> Result<Vec<f64>> {
    if !(t_max > 0.0) || !(dt > 0.0) {
        return Err(Error::EmptyTimeGrid);
    }
    let steps = crate::fmath::ceil(t_max / dt) as usize;
    let h = t_max / steps as f64;
    Ok((0..=steps).map(|k| k as f64 * h).collect())
}

/// Default step `π/(4 E_max)` for a spectrum of width `E_max`.
pub fn default_step(p: &OtocProblem) -> f64 {
    PI / (4.0 * p.max_frequency().max(1.0))
}

/// Trapezoidal mean of a sampled function on a uniform grid.
pub fn trapezoid_mean(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return values.first().copied().unwrap_or(0.0);
    }
    let inner: f64 = values[1..n - 1].iter().sum();
    (inner + 0.5 * (values[0] + values[n - 1])) / (n - 1) as f64
}

/// Mean of `C(t)` over `[0, T]` by the trapezoidal rule.
pub fn window_average(p: &OtocProblem, t_max: f64, dt: f64) -> Result<TimeAverage> {
    let times = time_grid(t_max, dt)?;
    let h = times[1] - times[0];
    let mut ws = Workspace::new(p);
    let values: Vec<f64> = times.iter().map(|&t| otoc_point(p, &mut ws, t).c).collect();
    Ok(TimeAverage {
        value: trapezoid_mean(&values),
        method: AverageMethod::Window { t_max, dt: h },
        warning: h > PI / (4.0 * p.max_frequency().max(1e-300)),
    })
}

/// Infinite-time averages of the parts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExactAverage {
    pub d: f64,
    pub i: f64,
    pub f: Complex64,
    pub c: f64,
    pub tol: f64,
    pub merge_warning: bool,
}

impl ExactAverage {
    pub fn as_time_average(&self) -> TimeAverage {
        TimeAverage { value: self.c, method: AverageMethod::ExactResonance { tol: self.tol }, warning: self.merge_warning }
    }
}

/// Relative size below which operator elements are treated as zero when
/// collecting resonant index pairs.
pub const PAIR_CUTOFF: f64 = 1e-14;

/// Infinite-time average keeping exactly the phase-free terms of the spectral
/// sums: equal energies for `D`, equal pair differences `E_m − E_k = E_n − E_l`
/// for `I` and `F`. Pairs are grouped by difference class, so the cost is set
/// by the class sizes rather than by `d⁴`. Valid with any degeneracies or
/// resonances. Energies must be ascending.
pub fn exact_time_average(p: &OtocProblem, tol: f64) -> Result<ExactAverage> {
    let d = p.dim();
    if p.energies.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::ShapeMismatch("energies must be ascending"));
    }
    let fa = p.a.factor();
    let fb = p.b.factor();
    let b = p.b_state();
    // columns of the real matrices as rows of their transposes
    let at = p.a.m.transpose();
    let bt = p.b.m.transpose();
    let cut = PAIR_CUTOFF * p.a.m.max_abs();

    // D: within each degenerate block, ‖A b_block‖²
    let mut dbar = 0.0;
    let mut acc = vec![Complex64::new(0.0, 0.0); d];
    for blk in degenerate_blocks(p.energies, tol) {
        acc.iter_mut().for_each(|x| *x = Complex64::new(0.0, 0.0));
        let mut any = false;
        for k in blk {
            if b[k] == Complex64::new(0.0, 0.0) {
                continue;
            }
            any = true;
            for (m, &v) in at.row(k).iter().enumerate() {
                acc[m] += b[k] * v;
            }
        }
        if any {
            dbar += acc.iter().map(|x| x.norm_sqr()).sum::<f64>();
        }
    }

    // I and F: class vectors v_Δ (from c) and u_Δ (from b)
    let keep = |k: usize, m: usize| (p.c[k] != 0.0 || b[k] != Complex64::new(0.0, 0.0)) && abs(p.a.m[(m, k)]) > cut;
    let classes = resonance_classes_filtered(p.energies, tol, keep);
    let mut v = vec![Complex64::new(0.0, 0.0); d];
    let mut u = vec![Complex64::new(0.0, 0.0); d];
    let mut bv = vec![Complex64::new(0.0, 0.0); d];
    let mut touched_v: Vec<usize> = Vec::new();
    let mut touched_u: Vec<usize> = Vec::new();
    let mut mark_v = vec![false; d];
    let mut mark_u = vec![false; d];
    let mut ibar = 0.0;
    let mut fbar = Complex64::new(0.0, 0.0);
    for cl in 0..classes.n_classes() {
        for &(k, m) in classes.class(cl) {
            let (k, m) = (k as usize, m as usize);
            let a = fa * p.a.m[(m, k)];
            if p.c[k] != 0.0 {
                if !mark_v[m] {
                    mark_v[m] = true;
                    touched_v.push(m);
                }
                v[m] += a * p.c[k];
            }
            if b[k] != Complex64::new(0.0, 0.0) {
                if !mark_u[m] {
                    mark_u[m] = true;
                    touched_u.push(m);
                }
                u[m] += a * b[k];
            }
        }
        if !touched_v.is_empty() {
            // B v_Δ
            bv.iter_mut().for_each(|x| *x = Complex64::new(0.0, 0.0));
            for &m in &touched_v {
                let vm = v[m] * fb;
                for (n, &x) in bt.row(m).iter().enumerate() {
                    bv[n] += vm * x;
                }
            }
            ibar += bv.iter().map(|x| x.norm_sqr()).sum::<f64>();
            for &n in &touched_u {
                fbar += bv[n].conj() * u[n];
            }
        }
        for &m in &touched_v {
            v[m] = Complex64::new(0.0, 0.0);
            mark_v[m] = false;
        }
        for &m in &touched_u {
            u[m] = Complex64::new(0.0, 0.0);
            mark_u[m] = false;
        }
        touched_v.clear();
        touched_u.clear();
    }
    Ok(ExactAverage {
        d: dbar,
        i: ibar,
        f: fbar,
        c: dbar + ibar - 2.0 * fbar.re,
        tol,
        merge_warning: classes.merge_warning,
    })
}

/// `K^{AB}_{jk} = Σ_n (A†)_{jn} (B†B)_{nn} A_{nk}`. Real for the supported
/// phases since `|phase|² = 1`.
pub fn k_matrix(a: &EigenOperator, b: &EigenOperator) -> Mat {
    let d = a.dim();
    // (B†B)_nn = Σ_m |B_mn|²
    let mut w = vec![0.0; d];
    for m in 0..d {
        for (n, x) in b.m.row(m).iter().enumerate() {
            w[n] += x * x;
        }
    }
    let mut wa = a.m.clone();
    for n in 0..d {
        let s = sqrt(w[n]);
        wa.row_mut(n).iter_mut().for_each(|x| *x *= s);
    }
    let wat = wa.transpose();
    wat.matmul_t(&wat)
}

/// Smallest eigenvalue of a K matrix (non-negative up to rounding).
pub fn k_min_eigenvalue(k: &Mat) -> Result<f64> {
    Ok(sym_eigenvalues(k)?.first().copied().unwrap_or(0.0))
}

/// Averages in the diagonal-ensemble form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConditionedAverage {
    pub d: f64,
    pub i: f64,
    pub f: f64,
    pub c: f64,
}

/// `D̄ = Σ c_j c_k K^{BA}_{jk}`, `Ī = Σ |c_j|² K^{AB}_{jj}`, `F̄ = 0`. Refused
/// unless the audit passes; use [`exact_time_average`] otherwise.
pub fn conditioned_averages(k_ab: &Mat, k_ba: &Mat, c: &[f64], report: &ResonanceReport, diag_tol: f64) -> Result<ConditionedAverage> {
    if !report.degenerate_pairs.is_empty() {
        return Err(Error::ConditionsViolated("degenerate spectrum"));
    }
    if report.relevant_quadruplets.unwrap_or(report.quadruplet_resonances) > 0 {
        return Err(Error::ConditionsViolated("quadruplet resonances"));
    }
    if report.diag_residual.iter().any(|&r| r >= diag_tol) {
        return Err(Error::ConditionsViolated("nonzero diagonal operator elements"));
    }
    let d = dot(c, &k_ba.matvec(c));
    let i = c.iter().enumerate().map(|(j, x)| x * x * k_ab[(j, j)]).sum();
    Ok(ConditionedAverage { d, i, f: 0.0, c: d + i })
}

/// Share of a K matrix's absolute mass (restricted to the even sub-block
/// `idx`) lying off the three central diagonals.
pub fn off_tridiagonal_fraction(k: &Mat, idx: &[usize]) -> f64 {
    let (mut off, mut total) = (0.0, 0.0);
    for (a, &i) in idx.iter().enumerate() {
        for (b, &j) in idx.iter().enumerate() {
            let x = abs(k[(i, j)]);
            total += x;
            if a.abs_diff(b) > 1 {
                off += x;
            }
        }
    }
    if total == 0.0 {
        0.0
    } else {
        off / total
    }
}

/// The quench seen as a product of the centre-of-mass ladder and the relative
/// levels: states `|n, j⟩` with energies `n + ε_j`, sorted ascending.
#[derive(Clone, Debug)]
pub struct ProductSystem {
    pub energies: Vec<f64>,
    pub c: Vec<f64>,
    /// `(n, j)` of each sorted level.
    pub labels: Vec<(usize, usize)>,
    /// `x̂₁ = R/√N ⊗ 1 + 1 ⊗ Ŷ₁`.
    pub x1: EigenOperator,
}

/// Build the product system from a separated quench and `Ŷ₁` in its relative
/// eigenbasis. The ladder keeps `margin` levels beyond the squeezed vacuum's
/// cutoff so that two applications of `R` stay inside.
pub fn product_system(sep: &SeparatedQuench, y1: &Mat, margin: usize) -> ProductSystem {
    let levels = sep.cm.len() + margin;
    let dr = sep.rel_dim();
    let mut raw: Vec<(f64, usize, usize)> = Vec::with_capacity(levels * dr);
    for n in 0..levels {
        for j in 0..dr {
            raw.push((n as f64 + sep.rel.energies[j], n, j));
        }
    }
    raw.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let d = raw.len();
    let mut pos = vec![0usize; d];
    for (i, &(_, n, j)) in raw.iter().enumerate() {
        pos[n * dr + j] = i;
    }
    let inv_sqrt_n = 1.0 / sqrt(sep.n as f64);
    let mut m = Mat::zeros(d, d);
    for (i, &(_, n, j)) in raw.iter().enumerate() {
        // R = (a + a†)/√2 on the ladder
        if n + 1 < levels {
            let v = inv_sqrt_n * sqrt((n + 1) as f64 / 2.0);
            let k = pos[(n + 1) * dr + j];
            m[(i, k)] += v;
            m[(k, i)] += v;
        }
        for jj in 0..dr {
            let y = y1[(j, jj)];
            if y != 0.0 {
                m[(i, pos[n * dr + jj])] += y;
            }
        }
    }
    let c = raw
        .iter()
        .map(|&(_, n, j)| if n < sep.cm.len() { sep.cm[n] * sep.c_rel[j] } else { 0.0 })
        .collect();
    ProductSystem {
        energies: raw.iter().map(|r| r.0).collect(),
        c,
        labels: raw.iter().map(|r| (r.1, r.2)).collect(),
        x1: EigenOperator::real(m),
    }
}

/// `Ŷ₁` in the relative eigenbasis of a separated quench on a tagged space.
pub fn rel_y1(sep: &SeparatedQuench, space: &TaggedSpace) -> Result<Mat> {
    let ops = particle_operators(space)?;
    Ok(ops.y1.project_rows(&sep.lab_vectors()))
}

/// Centre-of-mass system alone: levels `n + ½`, `R` and the squeezed vacuum.
pub fn cm_system(sep: &SeparatedQuench, margin: usize) -> (Vec<f64>, EigenOperator, Vec<f64>) {
    let levels = sep.cm.len() + margin;
    let energies = (0..levels).map(|n| n as f64 + 0.5).collect();
    let r = Mat::from_fn(levels, levels, |i, j| {
        if j == i + 1 {
            sqrt(j as f64 / 2.0)
        } else if i == j + 1 {
            sqrt(i as f64 / 2.0)
        } else {
            0.0
        }
    });
    let mut c = sep.cm.clone();
    c.resize(levels, 0.0);
    (energies, EigenOperator::real(r), c)
}

/// Infinite-time averages split into centre-of-mass and relative parts.
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub n: usize,
    pub c_yy: ExactAverage,
    pub c_rr: ExactAverage,
    pub c_xx: ExactAverage,
    /// `|C̄_xx − C̄_YY − C̄_RR/N²|`.
    pub additivity_residual: f64,
    /// Largest `⟨n_cm⟩` over the relative eigenvectors.
    pub cm_deviation: f64,
    pub report: ResonanceReport,
}

/// Exact averages of `(Ŷ₁, Ŷ₁)` on the relative levels, `(R, R)` on the
/// ladder and `(x̂₁, x̂₁)` on the product system.
pub fn cm_rel_decomposition(sep: &SeparatedQuench, space: &TaggedSpace, tol: f64) -> Result<Decomposition> {
    let cm_deviation = sep.check_cm_quanta(space)?;
    let y1 = EigenOperator::real(rel_y1(sep, space)?);
    let rel = OtocProblem::new(&sep.rel.energies, &y1, &y1, &sep.c_rel)?;
    let c_yy = exact_time_average(&rel, tol)?;
    let (ecm, r, ccm) = cm_system(sep, 3);
    let cm = OtocProblem::new(&ecm, &r, &r, &ccm)?;
    let c_rr = exact_time_average(&cm, tol)?;
    let prod = product_system(sep, &y1.m, 3);
    let pp = OtocProblem::new(&prod.energies, &prod.x1, &prod.x1, &prod.c)?;
    let c_xx = exact_time_average(&pp, tol)?;
    let n2 = (sep.n * sep.n) as f64;
    let report = check_conditions(&sep.rel.energies, &[&y1.m], tol, Some(&sep.c_rel));
    Ok(Decomposition {
        n: sep.n,
        additivity_residual: abs(c_xx.c - c_yy.c - c_rr.c / n2),
        c_yy,
        c_rr,
        c_xx,
        cm_deviation,
        report,
    })
}

/// `C_xx(t)` of the full system from the relative problem alone:
/// `[x̂₁(t), x̂₁] = −i sin t / N + [Ŷ₁(t), Ŷ₁]`, so
/// `C_xx = C_YY + sin²t/N² − (2 sin t/N)·Im⟨[Ŷ₁(t), Ŷ₁]⟩`.
pub fn lab_from_rel(point: &OtocPoint, n: usize) -> f64 {
    let s = sin(point.t) / n as f64;
    point.c + s * s - 2.0 * s * point.comm.im
}

/// Window average of `C_xx` assembled from the relative problem.
pub fn lab_window_average(rel: &OtocProblem, n: usize, t_max: f64, dt: f64) -> Result<TimeAverage> {
    let times = time_grid(t_max, dt)?;
    let h = times[1] - times[0];
    let mut ws = Workspace::new(rel);
    let values: Vec<f64> = times.iter().map(|&t| lab_from_rel(&otoc_point(rel, &mut ws, t), n)).collect();
    Ok(TimeAverage {
        value: trapezoid_mean(&values),
        method: AverageMethod::Window { t_max, dt: h },
        warning: h > PI / (4.0 * rel.max_frequency().max(1.0)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{build_hamiltonian, cm_lowering, FockSpace, InteractionMode, ManyBodySpace};
    use crate::quench::{plain_quench, separated_quench};
    use crate::spectral::diagonalize;
    use proptest::prelude::*;

    fn plain_x1(n: usize, e_cut: f64, g: f64, gamma: f64) -> (crate::quench::PlainQuench, EigenOperator) {
        let s = TaggedSpace::new(n, e_cut).unwrap();
        let q = plain_quench(&s, g, gamma, InteractionMode::Effective, 0.99).unwrap();
        let x1 = EigenOperator::from_lab(&particle_operators(&s).unwrap().x1, &q.eig);
        (q, x1)
    }

    #[test]
    fn free_particle_commutator_is_sin_squared() {
        let (q, x1) = plain_x1(2, 20.0, 0.0, 0.5);
        let p = OtocProblem::new(&q.eig.energies, &x1, &x1, &q.record.c).unwrap();
        let times: Vec<f64> = (0..200).map(|k| 0.1 * k as f64).collect();
        let s = otoc_series(&p, &times).unwrap();
        for pt in &s.points {
            assert!((pt.c - sin(pt.t).powi(2)).abs() < 1e-9, "{} {}", pt.t, pt.c);
        }
        assert!(s.identity_residual() < 1e-10);
        let p0 = s.points[0];
        assert!(p0.c.abs() < 1e-12 && (p0.d.re - p0.i.re).abs() < 1e-10 && (p0.d.re - p0.f.re).abs() < 1e-10);
        let avg = exact_time_average(&p, 1e-8).unwrap();
        assert!((avg.c - 0.5).abs() < 1e-9, "{}", avg.c);
    }

    // Literal spectral sums, O(d⁴) per time.
    fn quadruple_sums(p: &OtocProblem, t: f64) -> (f64, f64, Complex64) {
        let d = p.dim();
        let a = &p.a.m;
        let b = &p.b.m;
        let e = p.energies;
        let bc = b.matvec(p.c);
        let ata = a.transpose().matmul(a);
        let btb = b.transpose().matmul(b);
        let ph = |x: f64| Complex64::new(cos(x * t), sin(x * t));
        let (mut dd, mut ii) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        let mut ff = Complex64::new(0.0, 0.0);
        for j in 0..d {
            for n in 0..d {
                for m in 0..d {
                    for k in 0..d {
                        dd += p.c[j] * p.c[k] * b[(n, j)] * ata[(n, m)] * b[(m, k)] * ph(e[n] - e[m]);
                        ii += p.c[j] * p.c[k] * a[(n, j)] * btb[(n, m)] * a[(m, k)] * ph(e[j] - e[n] + e[m] - e[k]);
                        ff += p.c[j] * a[(n, j)] * b[(m, n)] * a[(m, k)] * bc[k] * ph(e[j] - e[n] + e[m] - e[k]);
                    }
                }
            }
        }
        (dd.re, ii.re, ff)
    }

    #[test]
    fn series_matches_quadruple_sums() {
        let (q, x1) = plain_x1(2, 9.0, 5.0, 0.5);
        let p = OtocProblem::new(&q.eig.energies, &x1, &x1, &q.record.c).unwrap();
        for t in [0.0, 0.37, 1.9, 4.2, 11.3] {
            let pt = otoc_series(&p, &[t]).unwrap().points[0];
            let (d, i, f) = quadruple_sums(&p, t);
            assert!((pt.d.re - d).abs() < 1e-8 && (pt.i.re - i).abs() < 1e-8, "{t}");
            assert!((pt.f - f).norm() < 1e-8, "{t} {:?} {:?}", pt.f, f);
        }
    }

    #[test]
    fn exact_average_matches_brute_force_resonances() {
        // literal four-index sum restricted to vanishing phases
        let (q, x1) = plain_x1(2, 8.0, 5.0, 0.5);
        let p = OtocProblem::new(&q.eig.energies, &x1, &x1, &q.record.c).unwrap();
        let d = p.dim();
        let e = p.energies;
        let a = &p.a.m;
        let bc = a.matvec(p.c);
        let ata = a.transpose().matmul(a);
        let (mut dd, mut ii, mut ff) = (0.0, 0.0, 0.0);
        for j in 0..d {
            for n in 0..d {
                for m in 0..d {
                    for k in 0..d {
                        if (e[n] - e[m]).abs() < 1e-8 {
                            dd += p.c[j] * p.c[k] * a[(n, j)] * ata[(n, m)] * a[(m, k)];
                        }
                        if (e[j] - e[n] + e[m] - e[k]).abs() < 1e-8 {
                            ii += p.c[j] * p.c[k] * a[(n, j)] * ata[(n, m)] * a[(m, k)];
                            ff += p.c[j] * a[(n, j)] * a[(m, n)] * a[(m, k)] * bc[k];
                        }
                    }
                }
            }
        }
        let ex = exact_time_average(&p, 1e-8).unwrap();
        assert!((ex.d - dd).abs() < 1e-10 && (ex.i - ii).abs() < 1e-10 && (ex.f.re - ff).abs() < 1e-10);
    }

    #[test]
    fn exact_average_invariant_under_degenerate_rotations() {
        let (q, x1) = plain_x1(2, 10.0, 0.0, 0.5);
        let p = OtocProblem::new(&q.eig.energies, &x1, &x1, &q.record.c).unwrap();
        let base = exact_time_average(&p, 1e-8).unwrap();
        // rotate within each degenerate block by a Givens chain
        let d = p.dim();
        let mut rot = Mat::identity(d);
        for blk in degenerate_blocks(p.energies, 1e-8) {
            let idx: Vec<usize> = blk.collect();
            for w in idx.windows(2) {
                let (i, j) = (w[0], w[1]);
                let th = 0.3 + 0.1 * i as f64;
                let (c, s) = (cos(th), sin(th));
                for col in 0..d {
                    let (x, y) = (rot[(i, col)], rot[(j, col)]);
                    rot[(i, col)] = c * x - s * y;
                    rot[(j, col)] = s * x + c * y;
                }
            }
        }
        let m2 = rot.matmul(&p.a.m).matmul_t(&rot);
        let c2: Vec<f64> = rot.matvec(p.c).iter().map(|x| -x).collect();
        let a2 = EigenOperator::real(m2);
        let p2 = OtocProblem::new(p.energies, &a2, &a2, &c2).unwrap();
        let rotated = exact_time_average(&p2, 1e-8).unwrap();
        assert!((rotated.c - base.c).abs() < 1e-10, "{} {}", rotated.c, base.c);
    }

    #[test]
    fn momentum_pairs_are_supported() {
        let s = TaggedSpace::new(2, 14.0).unwrap();
        let q = plain_quench(&s, 0.0, 0.5, InteractionMode::Bare, 0.99).unwrap();
        let ops = particle_operators(&s).unwrap();
        let x1 = EigenOperator::from_lab(&ops.x1, &q.eig);
        let p1 = EigenOperator::from_lab(&ops.p1, &q.eig);
        let p = OtocProblem::new(&q.eig.energies, &x1, &p1, &q.record.c).unwrap();
        // [x(t), p] = i cos t at g = 0
        for pt in otoc_series(&p, &[0.0, 0.4, 1.3]).unwrap().points {
            assert!((pt.c - cos(pt.t).powi(2)).abs() < 1e-8, "{} {}", pt.t, pt.c);
        }
        assert!((exact_time_average(&p, 1e-8).unwrap().c - 0.5).abs() < 1e-8);
    }

    #[test]
    fn sin_squared_window() {
        // two levels one apart, x = σ_x: C = 4 sin²t · … reduces to sin² on the grid mean
        let values: Vec<f64> = time_grid(200.0 * PI, 0.01).unwrap().iter().map(|t| sin(*t).powi(2)).collect();
        assert!((trapezoid_mean(&values) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn k_matrix_single_state() {
        let (s, sep) = sep_n2(5.0, 12.0);
        let y1 = EigenOperator::real(rel_y1(&sep, &s).unwrap());
        let k = k_matrix(&y1, &y1);
        assert!(k_min_eigenvalue(&k).unwrap() > -1e-10);
        let mut c = vec![0.0; sep.rel_dim()];
        c[0] = 1.0;
        let r = check_conditions(&sep.rel.energies, &[&y1.m], 1e-8, Some(&c));
        let ca = conditioned_averages(&k, &k, &c, &r, 1e-10).unwrap();
        assert!((ca.d - k[(0, 0)]).abs() < 1e-14 && (ca.i - k[(0, 0)]).abs() < 1e-14);
        let p = OtocProblem::new(&sep.rel.energies, &y1, &y1, &c).unwrap();
        assert!((exact_time_average(&p, 1e-8).unwrap().c - ca.c).abs() < 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn k_matrix_is_psd(seed in 0u64..1000, d in 3usize..30) {
            let mut s = seed.wrapping_add(1);
            let mut rnd = || { s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407); (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5 };
            let a = EigenOperator::real(Mat::from_fn(d, d, |_, _| rnd()));
            let b = EigenOperator::real(Mat::from_fn(d, d, |_, _| rnd()));
            let k = k_matrix(&a, &b);
            prop_assert!(k.symmetry_residual() < 1e-12);
            prop_assert!(k_min_eigenvalue(&k).unwrap() > -1e-10);
        }
    }

    fn sep_n2(g: f64, e_cut: f64) -> (TaggedSpace, SeparatedQuench) {
        sep_n2_with(g, e_cut, InteractionMode::Effective)
    }

    fn sep_n2_with(g: f64, e_cut: f64, mode: InteractionMode) -> (TaggedSpace, SeparatedQuench) {
        let s = TaggedSpace::new(2, e_cut).unwrap();
        let sep = separated_quench(&s, g, 0.5, mode, 0.9, 1e-12).unwrap();
        (s, sep)
    }

    #[test]
    fn rel_sector_conditions_and_consistency() {
        let (s, sep) = sep_n2(5.0, 20.0);
        let y1 = EigenOperator::real(rel_y1(&sep, &s).unwrap());
        let report = check_conditions(&sep.rel.energies, &[&y1.m], 1e-8, Some(&sep.c_rel));
        assert!(report.passes(1e-10), "{report:?}");
        let p = OtocProblem::new(&sep.rel.energies, &y1, &y1, &sep.c_rel).unwrap();
        let ex = exact_time_average(&p, 1e-8).unwrap();
        let k = k_matrix(&y1, &y1);
        let ca = conditioned_averages(&k, &k, &sep.c_rel, &report, 1e-10).unwrap();
        assert!((ex.c - ca.c).abs() < 1e-10, "{} {}", ex.c, ca.c);
        assert!(ex.f.norm() < 1e-12);
    }

    #[test]
    fn cm_ladder_average_is_half() {
        let (_, sep) = sep_n2(5.0, 12.0);
        let (e, r, c) = cm_system(&sep, 3);
        let p = OtocProblem::new(&e, &r, &r, &c).unwrap();
        assert!((exact_time_average(&p, 1e-8).unwrap().c - 0.5).abs() < 1e-10);
    }

    #[test]
    fn lab_series_from_relative_problem() {
        let (s, sep) = sep_n2(5.0, 14.0);
        let y1 = EigenOperator::real(rel_y1(&sep, &s).unwrap());
        let prod = product_system(&sep, &y1.m, 3);
        let pp = OtocProblem::new(&prod.energies, &prod.x1, &prod.x1, &prod.c).unwrap();
        let rel = OtocProblem::new(&sep.rel.energies, &y1, &y1, &sep.c_rel).unwrap();
        for t in [0.3, 1.7, 6.1] {
            let full = otoc_series(&pp, &[t]).unwrap().points[0].c;
            let from_rel = lab_from_rel(&otoc_series(&rel, &[t]).unwrap().points[0], 2);
            assert!((full - from_rel).abs() < 1e-9, "{t} {full} {from_rel}");
        }
    }

    #[test]
    fn product_states_are_lab_states() {
        // |n, j⟩ = (L†)ⁿ|0, j⟩/√(Nⁿ n!) built explicitly in a larger tagged space
        let n_part = 2;
        let (small, sep) = sep_n2_with(5.0, 8.0, InteractionMode::Bare);
        let extra = 3;
        let big = TaggedSpace::new(n_part, 8.0 + extra as f64).unwrap();
        let lab0 = sep.lab_vectors();
        let embed = |v: &[f64]| {
            let mut out = vec![0.0; big.dim()];
            for (i, &x) in v.iter().enumerate() {
                let (m, occ) = small.state(i);
                let mut o = occ.to_vec();
                o.resize(big.n_orb(), 0);
                out[big.index_of(m, &o).unwrap()] = x;
            }
            out
        };
        let raise = cm_lowering(&big).unwrap().transpose();
        let h = build_hamiltonian(&big, 5.0, 1.0, InteractionMode::Bare).unwrap();
        let ops = particle_operators(&big).unwrap();
        let dr = sep.rel_dim();
        let mut states = Vec::new();
        for n in 0..=extra {
            for j in 0..dr {
                let mut v = embed(lab0.row(j));
                for _ in 0..n {
                    v = raise.matvec(&v);
                }
                let nv = dot(&v, &v).sqrt();
                v.iter_mut().for_each(|x| *x /= nv);
                assert!((h.element(&v, &v) - (n as f64 + sep.rel.energies[j])).abs() < 1e-9);
                assert!((ops.n_cm.element(&v, &v) - n as f64).abs() < 1e-9);
                states.push(((n, j), v));
            }
        }
        let y1 = rel_y1(&sep, &small).unwrap();
        let prod = product_system(&sep, &y1, extra + 1 - sep.cm.len().min(extra + 1));
        let index: alloc::collections::BTreeMap<(usize, usize), usize> =
            prod.labels.iter().enumerate().map(|(i, &l)| (l, i)).collect();
        for (la, va) in &states {
            let xa = ops.x1.matvec(va);
            for (lb, vb) in &states {
                if let (Some(&ia), Some(&ib)) = (index.get(la), index.get(lb)) {
                    assert!((dot(vb, &xa) - prod.x1.m[(ib, ia)]).abs() < 1e-10, "{la:?} {lb:?}");
                }
            }
        }
    }

    #[test]
    fn separation_identity_n2() {
        let (s, sep) = sep_n2(5.0, 16.0);
        let dec = cm_rel_decomposition(&sep, &s, 1e-8).unwrap();
        assert!((dec.c_rr.c - 0.5).abs() < 1e-10);
        assert!(dec.additivity_residual < 1e-3, "{dec:?}");
        assert!((dec.c_xx.c - dec.c_yy.c - 0.125).abs() < 1e-3);
    }

    #[test]
    fn free_system_diagonal_x1() {
        let s = TaggedSpace::new(2, 8.0).unwrap();
        let h = build_hamiltonian(&s, 5.0, 1.0, InteractionMode::Effective).unwrap();
        let eig = diagonalize(&h).unwrap();
        let x1 = EigenOperator::from_lab(&particle_operators(&s).unwrap().x1, &eig);
        let diag = (0..eig.dim()).map(|j| x1.m[(j, j)].abs()).fold(0.0, f64::max);
        assert!(diag < 1e-10);
        let _ = s.dim();
        let _ = FockSpace::new(2, 4.0).unwrap();
    }
}
