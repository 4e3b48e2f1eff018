//! Sweeps over `(N, g, γ)` and fits of the system-size scaling forms
//!
//! `ΔW² = N^{b_W} λ_W (γ − 1/γ)²` and `C̄ = N^{b_C} λ_C [(γ − 1/γ)² + k_C]`,
//!
//! plus the straight-line relation between `C̄` and `ΔW²`.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fmath::{abs, exp, ln, sqrt};
use crate::fock::{FockSpace, InteractionMode, TaggedSpace};
use crate::linalg::{sym_eigen, Mat};
use crate::otoc::{exact_time_average, rel_y1, EigenOperator, OtocProblem};
use crate::quench::separated_quench;
use crate::spectral::check_conditions;

/// One sweep point.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub n: usize,
    pub g: f64,
    pub gamma: f64,
    /// Cutoff of the symmetric space used for the work statistics.
    pub e_cut_work: f64,
    /// Cutoff of the tagged space used for `C̄`; `None` skips it.
    pub e_cut_otoc: Option<f64>,
    pub mode: InteractionMode,
    pub threshold: f64,
    pub cm_tail: f64,
    pub tol: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub g: f64,
    pub gamma: f64,
    pub e_cut_work: f64,
    pub e_cut_otoc: Option<f64>,
    pub e_initial: f64,
    pub work_variance: f64,
    pub c_bar: Option<f64>,
    /// Smallest completeness over the spaces used.
    pub completeness: f64,
    /// `exact`, or `exact+conditions` when the relative sector also passes
    /// the condition audit.
    pub method: String,
    pub error: Option<String>,
}

impl SweepRow {
    fn failed(spec: &SweepSpec, err: Error) -> Self {
        SweepRow {
            n: spec.n,
            g: spec.g,
            gamma: spec.gamma,
            e_cut_work: spec.e_cut_work,
            e_cut_otoc: spec.e_cut_otoc,
            e_initial: f64::NAN,
            work_variance: f64::NAN,
            c_bar: None,
            completeness: f64::NAN,
            method: String::new(),
            error: Some(format!("{err}")),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

/// Run one point. Failures are recorded in the row rather than returned.
pub fn sweep_point(spec: &SweepSpec) -> SweepRow {
    match try_point(spec) {
        Ok(r) => r,
        Err(e) => SweepRow::failed(spec, e),
    }
}

fn try_point(spec: &SweepSpec) -> Result<SweepRow> {
    let sym = FockSpace::new(spec.n, spec.e_cut_work)?;
    let sep = separated_quench(&sym, spec.g, spec.gamma, spec.mode, spec.threshold, spec.cm_tail)?;
    let mut completeness = sep.completeness;
    let mut c_bar = None;
    let mut method = String::from("exact");
    if let Some(e) = spec.e_cut_otoc {
        let tagged = TaggedSpace::new(spec.n, e)?;
        let ts = separated_quench(&tagged, spec.g, spec.gamma, spec.mode, spec.threshold, spec.cm_tail)?;
        ts.check_cm_quanta(&tagged)?;
        completeness = completeness.min(ts.completeness);
        let y1 = EigenOperator::real(rel_y1(&ts, &tagged)?);
        let p = OtocProblem::new(&ts.rel.energies, &y1, &y1, &ts.c_rel)?;
        let yy = exact_time_average(&p, spec.tol)?;
        let report = check_conditions(&ts.rel.energies, &[&y1.m], spec.tol, Some(&ts.c_rel));
        if report.passes(1e-10) && !yy.merge_warning {
            method = String::from("exact+conditions");
        }
        // C̄_xx = C̄_YY + C̄_RR/N² with C̄_RR = ½
        c_bar = Some(yy.c + 0.5 / (spec.n * spec.n) as f64);
    }
    Ok(SweepRow {
        n: spec.n,
        g: spec.g,
        gamma: spec.gamma,
        e_cut_work: spec.e_cut_work,
        e_cut_otoc: spec.e_cut_otoc,
        e_initial: sep.e_initial,
        work_variance: sep.work_stats().variance,
        c_bar,
        completeness,
        method,
        error: None,
    })
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn ok_rows(&self) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(|r| r.is_ok())
    }

    /// Rows at one interaction strength, in table order.
    pub fn at_g(&self, g: f64) -> Vec<&SweepRow> {
        self.ok_rows().filter(|r| r.g == g).collect()
    }
}

/// Run every spec in order.
pub fn sweep(specs: &[SweepSpec]) -> SweepTable {
    SweepTable { rows: specs.iter().map(sweep_point).collect() }
}

/// `(γ − 1/γ)²`.
pub fn quench_measure(gamma: f64) -> f64 {
    let x = gamma - 1.0 / gamma;
    x * x
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FitForm {
    Work,
    Otoc,
}

/// Per-particle-number constants with the exponent held fixed.
#[derive(Clone, Debug, PartialEq)]
pub struct PerN {
    pub n: usize,
    pub lambda: f64,
    pub k: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    pub form: FitForm,
    pub g: f64,
    pub b: f64,
    pub lambda: f64,
    /// Offset of the `C̄` form; zero for the work form.
    pub k: f64,
    /// Root mean square of `ln y − ln model`.
    pub residual_rms: f64,
    /// Parameter covariance in the order `(b, ln λ[, k])`.
    pub covariance: Mat,
    pub per_n: Vec<PerN>,
    pub iterations: usize,
    /// Set when the normal matrix became singular; the parameters are the
    /// best found so far.
    pub singular: bool,
}

impl FitResult {
    pub fn b_stderr(&self) -> f64 {
        sqrt(self.covariance[(0, 0)].max(0.0))
    }
}

/// A fit data point `(N, γ, y)`.
pub type Sample = (usize, f64, f64);

/// Samples of one form at fixed `g` from a table.
pub fn samples(table: &SweepTable, g: f64, form: FitForm) -> Vec<Sample> {
    table
        .at_g(g)
        .into_iter()
        .filter_map(|r| match form {
            FitForm::Work => Some((r.n, r.gamma, r.work_variance)),
            FitForm::Otoc => r.c_bar.map(|c| (r.n, r.gamma, c)),
        })
        .collect()
}

/// Fit a scaling form at fixed `g`: exponent, amplitude (and offset) shared
/// over `N`, then per-`N` amplitudes (and offsets) with the exponent fixed.
/// Residuals are taken in the log. Needs three distinct `N` and four
/// distinct `γ`.
pub fn fit_scaling(data: &[Sample], g: f64, form: FitForm) -> Result<FitResult> {
    let ns: BTreeSet<usize> = data.iter().map(|s| s.0).collect();
    if ns.len() < 3 {
        return Err(Error::TooFewPoints { what: "particle numbers", needed: 3, got: ns.len() });
    }
    let gammas: BTreeSet<u64> = data.iter().map(|s| s.1.to_bits()).collect();
    if gammas.len() < 4 {
        return Err(Error::TooFewPoints { what: "trap ratios", needed: 4, got: gammas.len() });
    }
    if data.iter().any(|s| !(s.2 > 0.0)) {
        return Err(Error::Degenerate("non-positive value in a log fit"));
    }
    // start: b = 2, λ from the largest-N rows, k = 0
    let n_max = *ns.iter().next_back().unwrap_or(&2);
    let top: Vec<&Sample> = data.iter().filter(|s| s.0 == n_max).collect();
    let lam0 = top.iter().map(|s| s.2 / (powi(s.0, 2.0) * quench_measure(s.1).max(1e-3))).sum::<f64>() / top.len() as f64;
    let mut p = match form {
        FitForm::Work => vec![2.0, ln(lam0)],
        FitForm::Otoc => vec![2.0, ln(lam0), 0.0],
    };
    let model = |p: &[f64], s: &Sample| -> f64 {
        let x = quench_measure(s.1) + if p.len() > 2 { p[2] } else { 0.0 };
        p[1] + p[0] * ln(s.0 as f64) + ln(x.max(1e-300))
    };
    let grad = |p: &[f64], s: &Sample| -> Vec<f64> {
        let mut gr = vec![ln(s.0 as f64), 1.0];
        if p.len() > 2 {
            gr.push(1.0 / (quench_measure(s.1) + p[2]));
        }
        gr
    };
    let out = levenberg_marquardt(data, &mut p, &model, &grad, |p| p.len() < 3 || data.iter().all(|s| quench_measure(s.1) + p[2] > 0.0));
    let residual_rms = rms(data, &p, &model);

    // per-N constants with b fixed
    let mut per_n = Vec::new();
    for &n in &ns {
        let sub: Vec<Sample> = data.iter().filter(|s| s.0 == n).copied().collect();
        let mut q = match form {
            FitForm::Work => vec![p[1]],
            FitForm::Otoc => vec![p[1], p[2]],
        };
        let b = p[0];
        let m = |q: &[f64], s: &Sample| {
            let x = quench_measure(s.1) + if q.len() > 1 { q[1] } else { 0.0 };
            q[0] + b * ln(s.0 as f64) + ln(x.max(1e-300))
        };
        let gq = |q: &[f64], s: &Sample| {
            let mut gr = vec![1.0];
            if q.len() > 1 {
                gr.push(1.0 / (quench_measure(s.1) + q[1]));
            }
            gr
        };
        levenberg_marquardt(&sub, &mut q, &m, &gq, |q| q.len() < 2 || sub.iter().all(|s| quench_measure(s.1) + q[1] > 0.0));
        per_n.push(PerN { n, lambda: exp(q[0]), k: if q.len() > 1 { q[1] } else { 0.0 } });
    }
    Ok(FitResult {
        form,
        g,
        b: p[0],
        lambda: exp(p[1]),
        k: if p.len() > 2 { p[2] } else { 0.0 },
        residual_rms,
        covariance: out.covariance,
        per_n,
        iterations: out.iterations,
        singular: out.singular,
    })
}

fn sq(x: f64) -> f64 {
    x * x
}

fn powi(n: usize, b: f64) -> f64 {
    exp(b * ln(n as f64))
}

fn rms(data: &[Sample], p: &[f64], model: &impl Fn(&[f64], &Sample) -> f64) -> f64 {
    let ss: f64 = data.iter().map(|s| sq(ln(s.2) - model(p, s))).sum();
    sqrt(ss / data.len() as f64)
}

struct LmOutcome {
    covariance: Mat,
    iterations: usize,
    singular: bool,
}

// Damped Gauss-Newton on r_i = ln y_i − model_i. Stops when the relative
// step falls below 1e-10.
fn levenberg_marquardt(
    data: &[Sample],
    p: &mut Vec<f64>,
    model: &impl Fn(&[f64], &Sample) -> f64,
    grad: &impl Fn(&[f64], &Sample) -> Vec<f64>,
    admissible: impl Fn(&[f64]) -> bool,
) -> LmOutcome {
    let np = p.len();
    let cost = |p: &[f64]| data.iter().map(|s| sq(ln(s.2) - model(p, s))).sum::<f64>();
    let mut mu = 1e-3;
    let mut c0 = cost(p);
    let mut singular = false;
    let mut iterations = 0;
    for it in 0..500 {
        iterations = it + 1;
        let mut jtj = Mat::zeros(np, np);
        let mut jtr = vec![0.0; np];
        for s in data {
            let r = ln(s.2) - model(p, s);
            let gr = grad(p, s);
            for a in 0..np {
                jtr[a] += gr[a] * r;
                for b in 0..np {
                    jtj[(a, b)] += gr[a] * gr[b];
                }
            }
        }
        let mut accepted = false;
        let mut step_rel = 0.0;
        for _ in 0..40 {
            let mut a = jtj.clone();
            for d in 0..np {
                a[(d, d)] += mu * jtj[(d, d)].max(1e-12);
            }
            let Some(delta) = solve_spd(&a, &jtr) else {
                singular = true;
                mu *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(&delta).map(|(x, d)| x + d).collect();
            if admissible(&trial) {
                let c1 = cost(&trial);
                if c1 <= c0 {
                    step_rel = delta.iter().zip(p.iter()).map(|(d, x)| abs(*d) / abs(*x).max(1.0)).fold(0.0, f64::max);
                    *p = trial;
                    c0 = c1;
                    mu = (mu * 0.3).max(1e-12);
                    accepted = true;
                    break;
                }
            }
            mu *= 10.0;
        }
        if !accepted || step_rel < 1e-10 {
            break;
        }
    }
    // covariance σ² (JᵀJ)⁻¹ at the optimum
    let mut jtj = Mat::zeros(np, np);
    for s in data {
        let gr = grad(p, s);
        for a in 0..np {
            for b in 0..np {
                jtj[(a, b)] += gr[a] * gr[b];
            }
        }
    }
    let dof = data.len().saturating_sub(np).max(1) as f64;
    let sigma2 = c0 / dof;
    let covariance = match sym_eigen(&jtj) {
        Ok(e) if e.values.iter().all(|&v| v > 1e-14 * e.values.last().copied().unwrap_or(1.0)) => {
            let mut cov = Mat::zeros(np, np);
            for k in 0..np {
                let col = e.vectors.column(k);
                for a in 0..np {
                    for b in 0..np {
                        cov[(a, b)] += sigma2 * col[a] * col[b] / e.values[k];
                    }
                }
            }
            cov
        }
        _ => {
            singular = true;
            Mat::from_fn(np, np, |_, _| f64::NAN)
        }
    };
    LmOutcome { covariance, iterations, singular }
}

// Cholesky solve for a small symmetric positive-definite system.
fn solve_spd(a: &Mat, b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut l = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[(i, i)] = sqrt(s);
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[(i, k)] * y[k]).sum();
        y[i] = (b[i] - s) / l[(i, i)];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[(k, i)] * x[k]).sum();
        x[i] = (y[i] - s) / l[(i, i)];
    }
    Some(x)
}

/// Ordinary least squares `y = slope·x + intercept`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn linear_relation(points: &[(f64, f64)]) -> Result<LinearFit> {
    if points.len() < 4 {
        return Err(Error::TooFewPoints { what: "points", needed: 4, got: points.len() });
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    if !(sxx > 1e-300 * (1.0 + mx * mx)) {
        return Err(Error::Degenerate("abscissa has no spread"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    // a constant ordinate is fitted exactly
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LinearFit { slope, intercept, r2 })
}

/// `(ΔW², C̄)` pairs of the rows at one `N` and `g`.
pub fn work_otoc_pairs(table: &SweepTable, n: usize, g: f64) -> Vec<(f64, f64)> {
    table.at_g(g).into_iter().filter(|r| r.n == n).filter_map(|r| r.c_bar.map(|c| (r.work_variance, c))).collect()
}
