//! Two particles with a contact interaction in a harmonic trap.
//!
//! With `R = (x₁+x₂)/√2` and `y = (x₁−x₂)/√2` the pair separates into a free
//! oscillator in `R` and the relative problem
//! `−½∂²_y + ½γ²y² + κ δ(y)`, `κ = g/√2`. Odd relative states never feel the
//! contact term. Even states solve
//!
//! ```text
//! sin(πa)·Γ(1−a)/Γ(½−a) + (κ/2)·cos(πa) = 0,   a = ¼ − E/2   (γ = 1)
//! ```
//!
//! which is the Gamma-ratio condition `Γ(a+½)/Γ(a) = −κ/2` with the pole of
//! `tan(πa)` multiplied out. Their expansion in unit oscillator states is
//! `ψ = 𝒩 Σ_n u_n(0) φ_n / (E − E_n)`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fmath::{abs, cos, exp, lgamma, sin, sqrt};
use crate::hobasis::{h_gamma_element, orbital_at_origin};
use crate::linalg::{inverse_sqrt_spd, Mat};

pub mod grid;

const PI: f64 = core::f64::consts::PI;

/// Relative-coordinate contact strength for lab-frame strength `g`.
pub fn relative_strength(g: f64) -> f64 {
    g * core::f64::consts::FRAC_1_SQRT_2
}

/// Even-channel relative energies for unit trap frequency.
#[derive(Clone, Debug, PartialEq)]
pub struct RelSpectrum {
    pub g: f64,
    pub energies: Vec<f64>,
}

impl RelSpectrum {
    /// `Δ_j = E_j − (2j + ½)`.
    pub fn shifts(&self) -> Vec<f64> {
        self.energies.iter().enumerate().map(|(j, e)| e - (2.0 * j as f64 + 0.5)).collect()
    }
}

fn even_condition(energy: f64, kappa: f64) -> f64 {
    let a = 0.25 - 0.5 * energy;
    let ratio = exp(lgamma(1.0 - a) - lgamma(0.5 - a));
    sin(PI * a) * ratio + 0.5 * kappa * cos(PI * a)
}

fn bisect_root(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, f_lo: f64) -> f64 {
    let mut s_lo = f_lo > 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == s_lo {
            lo = mid;
            s_lo = fm > 0.0;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Energy of the `j`-th even relative level for contact strength `kappa`
/// (relative frame) in a unit trap.
pub fn even_level(kappa: f64, j: usize) -> Result<f64> {
    if !(kappa >= 0.0) || !kappa.is_finite() {
        return Err(Error::InvalidParameter { name: "g", value: kappa * core::f64::consts::SQRT_2 });
    }
    let base = 2.0 * j as f64;
    if kappa == 0.0 {
        return Ok(base + 0.5);
    }
    let f = |e: f64| even_condition(e, kappa);
    // open interval (2j+½, 2j+3/2); the endpoints are where sin or cos vanish
    let lo = base + 0.5;
    let hi = base + 1.5;
    let f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::RootNotBracketed { level: j, g: kappa * core::f64::consts::SQRT_2 });
    }
    Ok(bisect_root(f, lo, hi, f_lo))
}

/// Lowest `count` even relative energies for lab-frame interaction `g`.
pub fn rel_even_energies(g: f64, count: usize) -> Result<RelSpectrum> {
    if !(g >= 0.0) {
        return Err(Error::InvalidParameter { name: "g", value: g });
    }
    let kappa = relative_strength(g);
    let energies = (0..count).map(|j| even_level(kappa, j)).collect::<Result<Vec<_>>>()?;
    Ok(RelSpectrum { g, energies })
}

/// Odd relative energies `2j + 3/2`, independent of the interaction.
pub fn rel_odd_energies(count: usize) -> Vec<f64> {
    (0..count).map(|j| 2.0 * j as f64 + 1.5).collect()
}

const NORM_TERMS: usize = 200_000;

/// An even relative eigenstate in a unit trap, known through its expansion
/// coefficients in unit oscillator states.
#[derive(Clone, Copy, Debug)]
pub struct EvenRelState {
    pub energy: f64,
    norm: f64,
}

impl EvenRelState {
    pub fn new(kappa: f64, j: usize) -> Result<Self> {
        let energy = even_level(kappa, j)?;
        if kappa == 0.0 {
            return Ok(EvenRelState { energy, norm: f64::NAN });
        }
        // Σ_k u_{2k}(0)² /(E − 2k − ½)², tail ~ ∫ dk / (4π k^{5/2})
        let mut s = 0.0;
        let mut u2 = 1.0 / sqrt(PI);
        for k in 0..NORM_TERMS {
            let den = energy - (2.0 * k as f64 + 0.5);
            s += u2 / (den * den);
            u2 *= (2.0 * k as f64 + 1.0) / (2.0 * k as f64 + 2.0);
        }
        let kk = NORM_TERMS as f64 - 0.5;
        s += 1.0 / (6.0 * PI * kk * sqrt(kk));
        Ok(EvenRelState { energy, norm: 1.0 / sqrt(s) })
    }

    /// `⟨φ_n|ψ⟩` in the unit oscillator basis; the sign is fixed so that the
    /// coefficient on the nearest unperturbed level is positive.
    pub fn coefficient(&self, n: usize) -> f64 {
        if n % 2 == 1 {
            return 0.0;
        }
        if self.norm.is_nan() {
            // κ = 0: the unperturbed level itself
            let j = ((self.energy - 0.5) / 2.0) as usize;
            return if n == 2 * j { 1.0 } else { 0.0 };
        }
        let j = crate::fmath::floor((self.energy - 0.5) / 2.0) as usize;
        let sign = if orbital_at_origin(2 * j) > 0.0 { 1.0 } else { -1.0 };
        sign * self.norm * orbital_at_origin(n) / (self.energy - (n as f64 + 0.5))
    }

    /// Coefficients on `φ_0 … φ_{len−1}`.
    pub fn coefficients(&self, len: usize) -> Vec<f64> {
        (0..len).map(|n| self.coefficient(n)).collect()
    }
}

/// Overlaps `S[n][m] = ⟨φ_n|φ^γ_m⟩` between unit-frequency oscillator states and
/// those of frequency `γ`, for `n < rows`, `m < cols`.
pub fn squeeze_overlaps(gamma: f64, rows: usize, cols: usize) -> Mat {
    let rg = sqrt(gamma);
    let mu = 0.5 * (rg + 1.0 / rg);
    let nu = 0.5 * (rg - 1.0 / rg);
    let t = abs(nu / mu);
    let margin = if t < 1e-300 { 4 } else { (80.0 / -crate::fmath::ln(t)) as usize + 40 };
    let len = rows.max(cols) + cols + margin;
    let mut s = Mat::zeros(rows, cols);
    // squeezed vacuum
    let mut v = vec![0.0; len];
    v[0] = 1.0 / sqrt(mu);
    let mut k = 1;
    while k + 1 < len {
        v[k + 1] = -(nu / mu) * sqrt(k as f64 / (k as f64 + 1.0)) * v[k - 1];
        k += 2;
    }
    let mut next = vec![0.0; len];
    for m in 0..cols {
        for n in 0..rows {
            s[(n, m)] = v[n];
        }
        if m + 1 == cols {
            break;
        }
        // |m+1⟩_γ = (μ a† + ν a)|m⟩_γ / √(m+1)
        let inv = 1.0 / sqrt(m as f64 + 1.0);
        for (i, nx) in next.iter_mut().enumerate() {
            let up = if i > 0 { mu * sqrt(i as f64) * v[i - 1] } else { 0.0 };
            let down = if i + 1 < len { nu * sqrt(i as f64 + 1.0) * v[i + 1] } else { 0.0 };
            *nx = (up + down) * inv;
        }
        core::mem::swap(&mut v, &mut next);
    }
    s
}

/// Even relative eigenstates of `−½∂² + ½γ²y² + κδ(y)` expanded in unit
/// oscillator states `φ_0 … φ_{len−1}`. Returns `(energies, coefficients)`
/// with row `j` of the matrix holding state `j`.
pub fn even_states_in_unit_basis(kappa: f64, gamma: f64, count: usize, len: usize) -> Result<(Vec<f64>, Mat)> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter { name: "gamma", value: gamma });
    }
    // scaling y = s/√γ maps onto the unit problem with strength κ/√γ
    let scaled = kappa / sqrt(gamma);
    let states = (0..count).map(|j| EvenRelState::new(scaled, j)).collect::<Result<Vec<_>>>()?;
    let energies: Vec<f64> = states.iter().map(|s| gamma * s.energy).collect();
    if (gamma - 1.0).abs() < 1e-15 {
        let m = Mat::from_fn(count, len, |j, n| states[j].coefficient(n));
        return Ok((energies, m));
    }
    let t = abs((gamma - 1.0) / (gamma + 1.0));
    let extra = if t < 1e-300 { 8 } else { (90.0 / -crate::fmath::ln(t)) as usize + 60 };
    let inner = len + 2 * count + extra;
    let s = squeeze_overlaps(gamma, len, inner);
    let mut out = Mat::zeros(count, len);
    for (j, st) in states.iter().enumerate() {
        let c: Vec<f64> = (0..inner).map(|m| st.coefficient(m)).collect();
        for n in (0..len).step_by(2) {
            out[(j, n)] = crate::linalg::dot(s.row(n), &c);
        }
    }
    Ok((energies, out))
}

/// Oscillator brackets `⟨n₁ n₂ | N n⟩` for the equal-mass 45° rotation
/// `R = (x₁+x₂)/√2`, `y = (x₁−x₂)/√2`.
#[derive(Clone, Debug)]
pub struct BracketTable {
    n_max: usize,
    offsets: Vec<usize>,
    data: Vec<f64>,
}

impl BracketTable {
    /// All brackets with `n₁ + n₂ ≤ n_max`, generated by applying
    /// `a₁† = (A† + b†)/√2` and `a₂† = (A† − b†)/√2` to the vacuum.
    pub fn new(n_max: usize) -> Self {
        let pairs = (n_max + 1) * (n_max + 2) / 2;
        let mut offsets = vec![0usize; pairs + 1];
        let mut idx = 0;
        for n1 in 0..=n_max {
            for n2 in 0..=(n_max - n1) {
                offsets[idx + 1] = offsets[idx] + n1 + n2 + 1;
                idx += 1;
            }
        }
        let mut data = vec![0.0; offsets[pairs]];
        let mut table = BracketTable { n_max, offsets, data: Vec::new() };
        let s = core::f64::consts::FRAC_1_SQRT_2;
        // shell vectors indexed by N (r = K − N)
        let raise = |v: &[f64], sign: f64| -> Vec<f64> {
            let k = v.len() - 1;
            let mut out = vec![0.0; k + 2];
            for (n_cm, &c) in v.iter().enumerate() {
                if c == 0.0 {
                    continue;
                }
                let r = k - n_cm;
                out[n_cm + 1] += s * sqrt(n_cm as f64 + 1.0) * c;
                out[n_cm] += sign * s * sqrt(r as f64 + 1.0) * c;
            }
            out
        };
        let mut column = vec![1.0];
        for n1 in 0..=n_max {
            if n1 > 0 {
                column = raise(&column, 1.0);
                let f = 1.0 / sqrt(n1 as f64);
                column.iter_mut().for_each(|c| *c *= f);
            }
            let mut v = column.clone();
            for n2 in 0..=(n_max - n1) {
                if n2 > 0 {
                    v = raise(&v, -1.0);
                    let f = 1.0 / sqrt(n2 as f64);
                    v.iter_mut().for_each(|c| *c *= f);
                }
                let at = table.pair_index(n1, n2);
                data[table.offsets[at]..table.offsets[at + 1]].copy_from_slice(&v);
            }
        }
        table.data = data;
        table
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    fn pair_index(&self, n1: usize, n2: usize) -> usize {
        // row n1 holds n2 = 0..=n_max−n1
        n1 * (self.n_max + 1) - n1 * n1.saturating_sub(1) / 2 + n2
    }

    /// `⟨n₁ n₂ | N_cm n_rel⟩`, zero off the energy shell.
    pub fn get(&self, n1: usize, n2: usize, n_cm: usize, n_rel: usize) -> f64 {
        if n1 + n2 != n_cm + n_rel || n1 + n2 > self.n_max {
            return 0.0;
        }
        let at = self.pair_index(n1, n2);
        self.data[self.offsets[at] + n_cm]
    }

    /// All brackets of one pair, indexed by `N_cm`.
    pub fn shell(&self, n1: usize, n2: usize) -> &[f64] {
        let at = self.pair_index(n1, n2);
        &self.data[self.offsets[at]..self.offsets[at + 1]]
    }
}

/// Renormalised two-body interaction in the even relative oscillator basis.
#[derive(Clone, Debug)]
pub struct EffectiveInteraction {
    pub g: f64,
    pub gamma: f64,
    /// Row/column `k` refers to the relative oscillator state `2k`.
    pub v_eff: Mat,
    /// Exact energies reproduced by `H0 + V_eff`.
    pub energies: Vec<f64>,
}

impl EffectiveInteraction {
    pub fn dim(&self) -> usize {
        self.v_eff.rows()
    }

    /// `H0 + V_eff` in the model space.
    pub fn h_eff(&self) -> Mat {
        let d = self.dim();
        let mut h = self.v_eff.clone();
        for k in 0..d {
            for l in 0..d {
                h[(k, l)] += h_gamma_element(2 * k, 2 * l, self.gamma);
            }
        }
        h
    }
}

/// Effective interaction for trap strength `gamma` on the lowest `d` even
/// relative oscillator states: project the lowest `d` exact states, orthogonalise
/// symmetrically and subtract the bare relative oscillator.
pub fn effective_interaction(g: f64, gamma: f64, d: usize) -> Result<EffectiveInteraction> {
    if d == 0 {
        return Err(Error::InvalidParameter { name: "d", value: 0.0 });
    }
    let kappa = relative_strength(g);
    if g == 0.0 {
        let energies = (0..d).map(|_| f64::NAN).collect();
        return Ok(EffectiveInteraction { g, gamma, v_eff: Mat::zeros(d, d), energies });
    }
    let (energies, coeffs) = even_states_in_unit_basis(kappa, gamma, d, 2 * d)?;
    // P[k][j] = ⟨φ_{2k}|ψ_j⟩
    let p = Mat::from_fn(d, d, |k, j| coeffs[(j, 2 * k)]);
    let ptp = p.transpose().matmul(&p);
    let inv = inverse_sqrt_spd(&ptp, 1e-10)?;
    let u = p.matmul(&inv);
    let mut scaled = u.clone();
    for k in 0..d {
        for j in 0..d {
            scaled[(k, j)] *= energies[j];
        }
    }
    let mut v_eff = scaled.matmul_t(&u);
    for k in 0..d {
        for l in 0..d {
            v_eff[(k, l)] -= h_gamma_element(2 * k, 2 * l, gamma);
        }
    }
    // symmetrise away rounding
    for k in 0..d {
        for l in (k + 1)..d {
            let m = 0.5 * (v_eff[(k, l)] + v_eff[(l, k)]);
            v_eff[(k, l)] = m;
            v_eff[(l, k)] = m;
        }
    }
    Ok(EffectiveInteraction { g, gamma, v_eff, energies })
}

/// Bare contact interaction in the even relative basis, `κ u_{2k}(0) u_{2l}(0)`.
pub fn bare_relative_interaction(g: f64, d: usize) -> Mat {
    let kappa = relative_strength(g);
    Mat::from_fn(d, d, |k, l| kappa * orbital_at_origin(2 * k) * orbital_at_origin(2 * l))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noninteracting_and_odd_levels() {
        let s = rel_even_energies(0.0, 4).unwrap();
        assert_eq!(s.energies, vec![0.5, 2.5, 4.5, 6.5]);
        assert_eq!(rel_odd_energies(3), vec![1.5, 3.5, 5.5]);
    }

    #[test]
    fn fermionization_limit() {
        let s = rel_even_energies(1e6, 4).unwrap();
        for (j, e) in s.energies.iter().enumerate() {
            assert!((e - (2.0 * j as f64 + 1.5)).abs() < 1e-3, "{j}: {e}");
        }
    }

    #[test]
    fn levels_bounded_and_shifts_decreasing() {
        let s = rel_even_energies(5.0, 30).unwrap();
        let d = s.shifts();
        for (j, e) in s.energies.iter().enumerate() {
            assert!(*e > 2.0 * j as f64 + 0.5 && *e < 2.0 * j as f64 + 1.5);
        }
        for w in d.windows(2) {
            assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn shift_increases_with_g() {
        let a = rel_even_energies(1.0, 5).unwrap().shifts();
        let b = rel_even_energies(2.0, 5).unwrap().shifts();
        for (x, y) in a.iter().zip(&b) {
            assert!(y > x);
        }
    }

    #[test]
    fn negative_g_rejected() {
        assert!(rel_even_energies(-1.0, 2).is_err());
    }

    #[test]
    fn first_order_shift() {
        // Δ_0 ≈ κ u_0(0)² = g/√(2π)
        let g = 1e-4;
        let e = rel_even_energies(g, 1).unwrap().energies[0];
        let want = g / (2.0 * PI).sqrt();
        assert!(((e - 0.5) - want).abs() < 1e-8 * 1.0 + want * 1e-3);
    }

    #[test]
    fn expansion_is_normalized_eigenvector() {
        let kappa = relative_strength(5.0);
        let st = EvenRelState::new(kappa, 1).unwrap();
        let c = st.coefficients(4000);
        let n2: f64 = c.iter().map(|x| x * x).sum();
        // slowly converging tail beyond 4000 states is ~1/(6π·2000^{3/2})
        assert!((n2 - 1.0).abs() < 1e-5, "{n2}");
        assert!(c[2] > 0.0);
        // residual of (H0 + κ|0⟩⟨0|) ψ = E ψ on low rows
        let mut v: f64 = c.iter().enumerate().map(|(n, x)| orbital_at_origin(n) * x).sum::<f64>();
        // tail: u_{2m}(0)² ≈ 1/(π√m), E − E_{2m} ≈ −2m  ⇒  Σ_{m>M} ≈ −(a/π)/√M
        let a = c[2] * (st.energy - 2.5) / orbital_at_origin(2);
        v -= a / (PI * (2000.0f64).sqrt());
        for n in (0..20).step_by(2) {
            let lhs = (n as f64 + 0.5) * c[n] + kappa * orbital_at_origin(n) * v;
            assert!((lhs - st.energy * c[n]).abs() < 1e-4, "{n} {}", lhs - st.energy * c[n]);
        }
    }

    #[test]
    fn squeeze_overlap_ground_state() {
        // ⟨0|0_γ⟩ = (2√γ/(1+γ))^{1/2}
        for &g in &[0.25, 0.5, 2.0, 4.0] {
            let s = squeeze_overlaps(g, 4, 4);
            let want = (2.0 * g.sqrt() / (1.0 + g)).sqrt();
            assert!((s[(0, 0)] - want).abs() < 1e-14);
            assert_eq!(s[(1, 0)], 0.0);
        }
    }

    #[test]
    fn squeeze_overlaps_are_orthogonal() {
        let s = squeeze_overlaps(0.5, 120, 30);
        for a in 0..30 {
            for b in 0..30 {
                let v: f64 = (0..120).map(|n| s[(n, a)] * s[(n, b)]).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((v - want).abs() < 1e-12, "{a} {b} {v}");
            }
        }
    }

    #[test]
    fn squeeze_matches_quadrature() {
        let gamma = 0.5f64;
        let s = squeeze_overlaps(gamma, 8, 8);
        let h = 2e-3;
        for &(n, m) in &[(0usize, 2usize), (3, 1), (4, 6)] {
            let mut acc = 0.0;
            let mut y = -15.0;
            while y <= 15.0 {
                acc += crate::hobasis::orbital(n, y)
                    * gamma.powf(0.25)
                    * crate::hobasis::orbital(m, gamma.sqrt() * y)
                    * h;
                y += h;
            }
            assert!((acc - s[(n, m)]).abs() < 1e-10, "{n} {m}");
        }
    }

    #[test]
    fn brackets_small_shells() {
        let b = BracketTable::new(6);
        assert_eq!(b.get(0, 0, 0, 0), 1.0);
        let s = core::f64::consts::FRAC_1_SQRT_2;
        assert!((b.get(1, 0, 1, 0) - s).abs() < 1e-15);
        assert!((b.get(1, 0, 0, 1) - s).abs() < 1e-15);
        assert!((b.get(0, 1, 1, 0) - s).abs() < 1e-15);
        assert!((b.get(0, 1, 0, 1) + s).abs() < 1e-15);
        assert_eq!(b.get(1, 1, 0, 1), 0.0);
    }

    #[test]
    fn brackets_orthogonal_per_shell() {
        let kmax = 24;
        let b = BracketTable::new(kmax);
        for k in 0..=kmax {
            for a in 0..=k {
                for c in 0..=k {
                    let v: f64 = (0..=k).map(|n1| b.get(n1, k - n1, a, k - a) * b.get(n1, k - n1, c, k - c)).sum();
                    let want = if a == c { 1.0 } else { 0.0 };
                    assert!((v - want).abs() < 1e-12, "shell {k}");
                }
            }
        }
    }

    #[test]
    fn brackets_exchange_parity() {
        // swapping particles flips y: ⟨n₂ n₁|N n⟩ = (−1)^n ⟨n₁ n₂|N n⟩
        let b = BracketTable::new(12);
        for n1 in 0..6 {
            for n2 in 0..6 {
                for n_cm in 0..=(n1 + n2) {
                    let r = n1 + n2 - n_cm;
                    let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
                    assert!((b.get(n2, n1, n_cm, r) - sign * b.get(n1, n2, n_cm, r)).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn effective_interaction_reproduces_exact_levels() {
        let vi = effective_interaction(5.0, 1.0, 10).unwrap();
        let ev = crate::linalg::sym_eigenvalues(&vi.h_eff()).unwrap();
        let exact = rel_even_energies(5.0, 10).unwrap().energies;
        for (a, b) in ev.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-10, "{a} {b}");
        }
        let zero = effective_interaction(0.0, 1.0, 5).unwrap();
        assert_eq!(zero.v_eff.max_abs(), 0.0);
        let weak = effective_interaction(1e-6, 1.0, 5).unwrap();
        assert!(weak.v_eff.max_abs() < 1e-6);
    }

    #[test]
    fn effective_interaction_in_compressed_trap() {
        let gamma = 0.5;
        let vi = effective_interaction(5.0, gamma, 8).unwrap();
        let ev = crate::linalg::sym_eigenvalues(&vi.h_eff()).unwrap();
        let unit = rel_even_energies(5.0 / gamma.sqrt(), 8).unwrap().energies;
        for (a, b) in ev.iter().zip(&unit) {
            assert!((a - gamma * b).abs() < 1e-10);
        }
    }
}
