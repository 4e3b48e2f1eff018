//! Finite-difference reference solver for the relative two-body problem
//! `−½∂² + ½γ²y² + κδ(y)` on a uniform grid, the delta acting as `κ/h` on the
//! centre node. Independent of the oscillator-basis machinery; used to
//! calibrate and cross-check it.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fmath::{abs, sqrt};

#[derive(Clone, Debug)]
pub struct GridRelProblem {
    pub gamma: f64,
    pub kappa: f64,
    pub half_width: f64,
    pub step: f64,
    diag: Vec<f64>,
    off: f64,
}

/// Eigenpairs on the grid; row `j` of `vectors` is normalised with `Σ ψ² h = 1`.
#[derive(Clone, Debug)]
pub struct GridStates {
    pub energies: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub nodes: Vec<f64>,
    pub step: f64,
}

impl GridRelProblem {
    pub fn new(gamma: f64, kappa: f64, half_width: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !(half_width > step) {
            return Err(Error::InvalidParameter { name: "step", value: step });
        }
        let half = crate::fmath::round(half_width / step) as usize;
        let n = 2 * half + 1;
        let off = -0.5 / (step * step);
        let diag = (0..n)
            .map(|i| {
                let y = (i as f64 - half as f64) * step;
                let mut d = 1.0 / (step * step) + 0.5 * gamma * gamma * y * y;
                if i == half {
                    d += kappa / step;
                }
                d
            })
            .collect();
        Ok(GridRelProblem { gamma, kappa, half_width: half as f64 * step, step, diag, off })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn node(&self, i: usize) -> f64 {
        (i as f64 - (self.len() / 2) as f64) * self.step
    }

    /// Number of eigenvalues strictly below `x` (Sturm sequence).
    fn count_below(&self, x: f64) -> usize {
        let b2 = self.off * self.off;
        let mut count = 0;
        let mut q = self.diag[0] - x;
        if q < 0.0 {
            count += 1;
        }
        for &d in &self.diag[1..] {
            let prev = if q == 0.0 { 1e-300 } else { q };
            q = d - x - b2 / prev;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `k`-th eigenvalue (0-based) by bisection.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        // Gershgorin bounds
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let r = 2.0 * abs(self.off);
        for &d in &self.diag {
            lo = lo.min(d - r);
            hi = hi.max(d + r);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn eigenvector(&self, lambda: f64) -> Vec<f64> {
        let n = self.len();
        let shift = lambda + 1e-10 * (1.0 + abs(lambda));
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 1e-3 * ((i * 7919) % 101) as f64).collect();
        for _ in 0..3 {
            v = solve_shifted(&self.diag, self.off, shift, &v);
            let nv = sqrt(v.iter().map(|x| x * x).sum::<f64>() * self.step);
            v.iter_mut().for_each(|x| *x /= nv);
        }
        // sign convention: first significant lobe from the left is positive
        let peak = v.iter().fold(0.0f64, |m, x| m.max(abs(*x)));
        if let Some(first) = v.iter().find(|x| abs(**x) > 1e-3 * peak) {
            if *first < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
        }
        v
    }

    /// Lowest `count` eigenpairs (both parities).
    pub fn lowest(&self, count: usize) -> GridStates {
        let mut energies = Vec::with_capacity(count);
        let mut vectors = Vec::with_capacity(count);
        for k in 0..count {
            let e = self.eigenvalue(k);
            energies.push(e);
            vectors.push(self.eigenvector(e));
        }
        let nodes = (0..self.len()).map(|i| self.node(i)).collect();
        GridStates { energies, vectors, nodes, step: self.step }
    }
}

impl GridStates {
    pub fn overlap(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() * self.step
    }

    /// `⟨ψ_a| f(y) |ψ_b⟩` on the grid.
    pub fn expectation(&self, a: usize, b: usize, f: impl Fn(f64) -> f64) -> f64 {
        let (va, vb) = (&self.vectors[a], &self.vectors[b]);
        let mut s = 0.0;
        for i in 0..va.len() {
            s += va[i] * f(self.nodes[i]) * vb[i];
        }
        s * self.step
    }

    /// Even-parity states are those symmetric about the centre node.
    pub fn is_even(&self, j: usize) -> bool {
        let v = &self.vectors[j];
        let n = v.len();
        let (a, b) = (v[n / 2 + n / 8], v[n / 2 - n / 8]);
        let c = v[n / 2];
        abs(c) > 1e-8 || (a * b > 0.0)
    }
}

// Tridiagonal solve of (T − shift)x = rhs with partial pivoting.
fn solve_shifted(diag: &[f64], off: f64, shift: f64, rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    // rows carry (d, u1, u2) after elimination
    let mut d: Vec<f64> = diag.iter().map(|x| x - shift).collect();
    let mut u1 = vec![off; n];
    let mut u2 = vec![0.0; n];
    let mut lower = vec![off; n];
    let mut b = rhs.to_vec();
    for i in 0..n - 1 {
        if abs(lower[i]) > abs(d[i]) {
            // swap rows i and i+1
            let (di, ui1, ui2, bi) = (d[i], u1[i], u2[i], b[i]);
            d[i] = lower[i];
            u1[i] = d[i + 1];
            u2[i] = if i + 1 < n - 1 { u1[i + 1] } else { 0.0 };
            b[i] = b[i + 1];
            let m = di / d[i];
            d[i + 1] = ui1 - m * u1[i];
            u1[i + 1] = ui2 - m * u2[i];
            b[i + 1] = bi - m * b[i];
        } else {
            if d[i] == 0.0 {
                d[i] = 1e-300;
            }
            let m = lower[i] / d[i];
            d[i + 1] -= m * u1[i];
            if i + 1 < n - 1 {
                u1[i + 1] -= m * u2[i];
            }
            b[i + 1] -= m * b[i];
        }
        lower[i] = 0.0;
    }
    if d[n - 1] == 0.0 {
        d[n - 1] = 1e-300;
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = b[i];
        if i + 1 < n {
            s -= u1[i] * x[i + 1];
        }
        if i + 2 < n {
            s -= u2[i] * x[i + 2];
        }
        x[i] = s / d[i];
    }
    x
}

/// Richardson extrapolation of the lowest `count` eigenvalues from grids with
/// steps `h`, `h/2` and `h/4`; the convergence order is estimated per level.
pub fn extrapolated_energies(gamma: f64, kappa: f64, half_width: f64, h: f64, count: usize) -> Result<Vec<f64>> {
    let grids = [h, 0.5 * h, 0.25 * h]
        .iter()
        .map(|&s| GridRelProblem::new(gamma, kappa, half_width, s))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let e: Vec<f64> = grids.iter().map(|g| g.eigenvalue(k)).collect();
        let d1 = e[0] - e[1];
        let d2 = e[1] - e[2];
        if abs(d2) < 1e-14 || d1 / d2 <= 1.0 {
            out.push(e[2]);
            continue;
        }
        // e_h = e* + c h^p  ⇒  ratio = 2^p
        let ratio = d1 / d2;
        out.push(e[2] - d2 / (ratio - 1.0));
    }
    Ok(out)
}
