//! Unit-frequency harmonic-oscillator orbitals, their one-body matrices and
//! the contact-interaction overlap tensor.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fmath::{abs, exp, ln, sqrt};
use crate::linalg::{tridiag_eigen, Mat};

const LN_PI: f64 = 1.144_729_885_849_400_2;
const RESCALE: f64 = 1e150;

/// Gauss–Hermite nodes with the Gaussian weight folded back in, so that
/// `∫ f(x) dx ≈ Σ_q weights[q] · f(nodes[q])` is exact for
/// `f = polynomial · e^{-x²}` of degree below `2·order`.
#[derive(Clone, Debug)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::QuadratureOrder { required: 1, given: 0 });
        }
        // Golub–Welsch on the Jacobi matrix of the Hermite recurrence
        let diag = vec![0.0; order];
        let off: Vec<f64> = (1..order).map(|k| sqrt(k as f64 / 2.0)).collect();
        let mut nodes = tridiag_eigen(&diag, &off, false)?.values;
        for x in nodes.iter_mut() {
            *x = polish_node(*x, order);
        }
        // exact symmetry about zero
        for i in 0..order / 2 {
            let j = order - 1 - i;
            let m = 0.5 * (nodes[j] - nodes[i]);
            nodes[i] = -m;
            nodes[j] = m;
        }
        if order % 2 == 1 {
            nodes[order / 2] = 0.0;
        }
        let weights = nodes
            .iter()
            .map(|&x| {
                let mut s = 0.0;
                for_each_orbital(x, order, |_, u| s += u * u);
                1.0 / s
            })
            .collect();
        Ok(GaussHermite { nodes, weights })
    }
}

// Newton iterations on the zero of H_order using normalized polynomials;
// scaling factors cancel in the ratio.
fn polish_node(mut x: f64, order: usize) -> f64 {
    for _ in 0..4 {
        let (p, pm1) = normalized_hermite_pair(x, order);
        let step = p / (sqrt(2.0 * order as f64) * pm1);
        x -= step;
        if abs(step) < 1e-16 * (1.0 + abs(x)) {
            break;
        }
    }
    x
}

// (p_n(x), p_{n-1}(x)) with a common positive scale factor.
fn normalized_hermite_pair(x: f64, n: usize) -> (f64, f64) {
    let mut prev = 0.0;
    let mut cur = 1.0;
    for k in 0..n {
        let next = sqrt(2.0 / (k as f64 + 1.0)) * x * cur - sqrt(k as f64 / (k as f64 + 1.0)) * prev;
        prev = cur;
        cur = next;
        if abs(cur) > RESCALE {
            cur /= RESCALE;
            prev /= RESCALE;
        }
    }
    (cur, prev)
}

/// Calls `f(n, u_n(x))` for `n = 0..count` using the normalized three-term
/// recurrence with a running logarithmic scale.
pub fn for_each_orbital(x: f64, count: usize, mut f: impl FnMut(usize, f64)) {
    let mut log_scale = -0.25 * LN_PI - 0.5 * x * x;
    let mut prev = 0.0;
    let mut cur = 1.0;
    for n in 0..count {
        f(n, cur * exp(log_scale));
        let next = sqrt(2.0 / (n as f64 + 1.0)) * x * cur - sqrt(n as f64 / (n as f64 + 1.0)) * prev;
        prev = cur;
        cur = next;
        if abs(cur) > RESCALE {
            cur /= RESCALE;
            prev /= RESCALE;
            log_scale += ln(RESCALE);
        }
    }
}

/// Single orbital value `u_n(x)`.
pub fn orbital(n: usize, x: f64) -> f64 {
    let mut out = 0.0;
    for_each_orbital(x, n + 1, |k, u| {
        if k == n {
            out = u;
        }
    });
    out
}

/// `u_n(0)` in closed form: zero for odd `n`, `(-1)^{n/2} π^{-1/4} √((n-1)!!/n!!)` for even `n`.
pub fn orbital_at_origin(n: usize) -> f64 {
    if n % 2 == 1 {
        return 0.0;
    }
    let mut v = exp(-0.25 * LN_PI);
    let mut k = 0;
    while k < n {
        // u_{k+2}(0) = -√((k+1)/(k+2)) u_k(0)
        v *= -sqrt((k as f64 + 1.0) / (k as f64 + 2.0));
        k += 2;
    }
    v
}

#[derive(Clone, Debug)]
pub struct OrbitalBasis {
    n_orb: usize,
    quad: GaussHermite,
    /// Row `n` holds `u_n` on the quadrature nodes.
    values: Mat,
    /// Orbitals on the nodes scaled by `1/√2`, where quartic products become
    /// polynomial times the Gauss–Hermite weight.
    contact_values: Mat,
}

impl OrbitalBasis {
    pub fn new(n_orb: usize, quad_order: usize) -> Result<Self> {
        if n_orb == 0 {
            return Err(Error::InvalidParameter { name: "n_orb", value: 0.0 });
        }
        if quad_order < 2 * n_orb {
            return Err(Error::QuadratureOrder { required: 2 * n_orb, given: quad_order });
        }
        let quad = GaussHermite::new(quad_order)?;
        let mut values = Mat::zeros(n_orb, quad_order);
        let mut contact_values = Mat::zeros(n_orb, quad_order);
        let s = core::f64::consts::FRAC_1_SQRT_2;
        for (q, &x) in quad.nodes.iter().enumerate() {
            for_each_orbital(x, n_orb, |n, u| values[(n, q)] = u);
            for_each_orbital(x * s, n_orb, |n, u| contact_values[(n, q)] = u);
        }
        Ok(OrbitalBasis { n_orb, quad, values, contact_values })
    }

    /// Basis with the default quadrature order `4·n_orb`.
    pub fn with_default_quadrature(n_orb: usize) -> Result<Self> {
        Self::new(n_orb, 4 * n_orb)
    }

    pub fn n_orb(&self) -> usize {
        self.n_orb
    }

    pub fn quad_nodes(&self) -> &[f64] {
        &self.quad.nodes
    }

    pub fn quad_weights(&self) -> &[f64] {
        &self.quad.weights
    }

    pub fn orbital_values(&self) -> &Mat {
        &self.values
    }

    /// `∫ u_m u_n dx` under the stored quadrature.
    pub fn overlap(&self, m: usize, n: usize) -> f64 {
        let (a, b) = (self.values.row(m), self.values.row(n));
        self.quad.weights.iter().zip(a.iter().zip(b)).map(|(w, (x, y))| w * x * y).sum()
    }

    pub fn one_body(&self, gamma: f64) -> Result<OneBodyMatrices> {
        OneBodyMatrices::new(self.n_orb, gamma)
    }

    pub fn interaction_tensor(&self) -> InteractionTensor {
        InteractionTensor::from_basis(self)
    }
}

/// One-body operators in the unit-frequency orbital basis, built from
/// ladder-operator algebra.
#[derive(Clone, Debug)]
pub struct OneBodyMatrices {
    pub gamma: f64,
    pub x_mat: Mat,
    /// `i·⟨m|p|n⟩`, real antisymmetric.
    pub ip_mat: Mat,
    pub x2_mat: Mat,
    pub h_gamma: Mat,
}

impl OneBodyMatrices {
    pub fn new(n_orb: usize, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidParameter { name: "gamma", value: gamma });
        }
        let mut x_mat = Mat::zeros(n_orb, n_orb);
        let mut ip_mat = Mat::zeros(n_orb, n_orb);
        for n in 0..n_orb.saturating_sub(1) {
            let s = sqrt((n as f64 + 1.0) / 2.0);
            x_mat[(n, n + 1)] = s;
            x_mat[(n + 1, n)] = s;
            ip_mat[(n, n + 1)] = s;
            ip_mat[(n + 1, n)] = -s;
        }
        let mut x2_mat = Mat::zeros(n_orb, n_orb);
        let mut h_gamma = Mat::zeros(n_orb, n_orb);
        let g2 = gamma * gamma;
        for n in 0..n_orb {
            let e = n as f64 + 0.5;
            x2_mat[(n, n)] = e;
            h_gamma[(n, n)] = 0.5 * e * (1.0 + g2);
            if n + 2 < n_orb {
                let t = 0.5 * sqrt((n as f64 + 1.0) * (n as f64 + 2.0));
                x2_mat[(n, n + 2)] = t;
                x2_mat[(n + 2, n)] = t;
                // ½p² contributes -t/2, ½γ²x² contributes γ²t/2
                let h = 0.5 * t * (g2 - 1.0);
                h_gamma[(n, n + 2)] = h;
                h_gamma[(n + 2, n)] = h;
            }
        }
        Ok(OneBodyMatrices { gamma, x_mat, ip_mat, x2_mat, h_gamma })
    }
}

/// `h_γ` matrix element between unit-frequency orbitals without building a matrix.
pub fn h_gamma_element(m: usize, n: usize, gamma: f64) -> f64 {
    let g2 = gamma * gamma;
    if m == n {
        0.5 * (n as f64 + 0.5) * (1.0 + g2)
    } else if m + 2 == n || n + 2 == m {
        let lo = m.min(n) as f64;
        0.25 * sqrt((lo + 1.0) * (lo + 2.0)) * (g2 - 1.0)
    } else {
        0.0
    }
}

/// `U_ijkl = ∫ u_i u_j u_k u_l dx`, stored once per sorted index quadruple.
#[derive(Clone, Debug)]
pub struct InteractionTensor {
    n_orb: usize,
    data: Vec<f64>,
}

#[inline]
fn binom2(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

#[inline]
fn binom3(n: usize) -> usize {
    if n < 3 {
        0
    } else {
        n * (n - 1) * (n - 2) / 6
    }
}

#[inline]
fn binom4(n: usize) -> usize {
    if n < 4 {
        0
    } else {
        n * (n - 1) * (n - 2) * (n - 3) / 24
    }
}

// rank of a sorted multiset a ≤ b ≤ c ≤ d in the combinatorial number system
#[inline]
fn canonical_index(a: usize, b: usize, c: usize, d: usize) -> usize {
    a + binom2(b + 1) + binom3(c + 2) + binom4(d + 3)
}

fn sort4(mut v: [usize; 4]) -> [usize; 4] {
    // five-comparator network
    if v[0] > v[1] {
        v.swap(0, 1);
    }
    if v[2] > v[3] {
        v.swap(2, 3);
    }
    if v[0] > v[2] {
        v.swap(0, 2);
    }
    if v[1] > v[3] {
        v.swap(1, 3);
    }
    if v[1] > v[2] {
        v.swap(1, 2);
    }
    v
}

impl InteractionTensor {
    fn from_basis(basis: &OrbitalBasis) -> Self {
        let n = basis.n_orb;
        let q = basis.quad.nodes.len();
        let w = &basis.quad.weights;
        let cv = &basis.contact_values;
        let pref = core::f64::consts::FRAC_1_SQRT_2;
        let mut data = vec![0.0; binom4(n + 3)];
        let mut pair_ab = vec![0.0; q];
        let mut pair_cd = vec![0.0; q];
        for d in 0..n {
            for c in 0..=d {
                let (rc, rd) = (cv.row(c), cv.row(d));
                for k in 0..q {
                    pair_cd[k] = w[k] * rc[k] * rd[k];
                }
                for b in 0..=c {
                    for a in 0..=b {
                        if (a + b + c + d) % 2 == 1 {
                            continue;
                        }
                        let (ra, rb) = (cv.row(a), cv.row(b));
                        for k in 0..q {
                            pair_ab[k] = ra[k] * rb[k];
                        }
                        let s = crate::linalg::dot(&pair_ab, &pair_cd);
                        data[canonical_index(a, b, c, d)] = pref * s;
                    }
                }
            }
        }
        InteractionTensor { n_orb: n, data }
    }

    pub fn n_orb(&self) -> usize {
        self.n_orb
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let [a, b, c, d] = sort4([i, j, k, l]);
        self.data[canonical_index(a, b, c, d)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ground_orbital_normalization_and_parity() {
        let pi_quarter = core::f64::consts::PI.powf(-0.25);
        assert!((orbital(0, 0.0) - pi_quarter).abs() < 1e-15);
        assert!((orbital(0, 0.0) - 0.751126).abs() < 1e-6);
        assert_eq!(orbital(1, 0.0), 0.0);
        for n in 0..20 {
            assert!((orbital(n, 0.0) - orbital_at_origin(n)).abs() < 1e-14, "n={n}");
        }
    }

    #[test]
    fn large_index_orbitals_do_not_overflow() {
        for &x in &[0.3, 5.0, 19.0, 40.0] {
            let u = orbital(200, x);
            assert!(u.is_finite());
        }
        // far beyond the turning point every orbital is tiny but representable
        assert!(orbital(150, 25.0).abs() < 1e-10);
    }

    #[test]
    fn quadrature_orthonormality() {
        let b = OrbitalBasis::new(12, 48).unwrap();
        let mut worst: f64 = 0.0;
        for m in 0..12 {
            for n in 0..12 {
                let want = if m == n { 1.0 } else { 0.0 };
                worst = worst.max((b.overlap(m, n) - want).abs());
            }
        }
        assert!(worst < 1e-12, "{worst}");
    }

    #[test]
    fn nodes_are_symmetric() {
        let g = GaussHermite::new(31).unwrap();
        for i in 0..31 {
            assert_eq!(g.nodes[i], -g.nodes[30 - i]);
        }
        let b = OrbitalBasis::new(9, 30).unwrap();
        let v = b.orbital_values();
        for n in 0..9 {
            for q in 0..30 {
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                assert_eq!(v[(n, q)], sign * v[(n, 29 - q)]);
            }
        }
    }

    #[test]
    fn rejects_short_quadrature() {
        assert_eq!(
            OrbitalBasis::new(10, 15).unwrap_err(),
            Error::QuadratureOrder { required: 20, given: 15 }
        );
    }

    #[test]
    fn one_body_elements() {
        let m = OneBodyMatrices::new(8, 1.0).unwrap();
        assert!((m.x_mat[(0, 1)] - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(m.h_gamma[(0, 0)], 0.5);
        for n in 0..8 {
            for k in 0..8 {
                let want = if n == k { n as f64 + 0.5 } else { 0.0 };
                assert!((m.h_gamma[(n, k)] - want).abs() < 1e-15);
            }
        }
        let half = OneBodyMatrices::new(8, 0.5).unwrap();
        assert!((half.h_gamma[(0, 0)] - 0.3125).abs() < 1e-15);
        assert!(OneBodyMatrices::new(3, 0.0).is_err());
    }

    #[test]
    fn truncated_commutator_is_minus_identity_inside() {
        let n = 16;
        let m = OneBodyMatrices::new(n, 1.0).unwrap();
        let xp = m.x_mat.matmul(&m.ip_mat);
        let px = m.ip_mat.matmul(&m.x_mat);
        for i in 0..n - 2 {
            for j in 0..n - 2 {
                let want = if i == j { -1.0 } else { 0.0 };
                assert!((xp[(i, j)] - px[(i, j)] - want).abs() < 1e-12);
            }
        }
        // antisymmetry
        assert!(m.ip_mat.transpose().as_slice().iter().zip(m.ip_mat.as_slice()).all(|(a, b)| *a == -*b));
    }

    #[test]
    fn x_squared_matches_product_away_from_edge() {
        let n = 10;
        let m = OneBodyMatrices::new(n, 1.0).unwrap();
        let xx = m.x_mat.matmul(&m.x_mat);
        for i in 0..n - 1 {
            for j in 0..n - 1 {
                assert!((xx[(i, j)] - m.x2_mat[(i, j)]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn contact_tensor_values() {
        let b = OrbitalBasis::with_default_quadrature(10).unwrap();
        let u = b.interaction_tensor();
        let want = 1.0 / (2.0 * core::f64::consts::PI).sqrt();
        assert!((u.get(0, 0, 0, 0) - want).abs() < 1e-14);
        assert!((u.get(0, 0, 0, 0) - 0.398942).abs() < 1e-6);
        assert_eq!(u.get(0, 0, 0, 1), 0.0);
        for n in 0..10 {
            assert!(u.get(n, n, n, n) > 0.0);
        }
        // full permutation symmetry by construction
        assert_eq!(u.get(1, 3, 2, 4), u.get(4, 2, 3, 1));
    }

    #[test]
    fn contact_tensor_stable_under_refinement() {
        let a = OrbitalBasis::new(8, 16).unwrap().interaction_tensor();
        let b = OrbitalBasis::new(8, 32).unwrap().interaction_tensor();
        assert!((a.get(0, 0, 1, 1) - b.get(0, 0, 1, 1)).abs() < 1e-10);
        let mut worst: f64 = 0.0;
        for i in 0..8 {
            for j in 0..8 {
                for k in 0..8 {
                    for l in 0..8 {
                        worst = worst.max((a.get(i, j, k, l) - b.get(i, j, k, l)).abs());
                    }
                }
            }
        }
        assert!(worst < 1e-12, "{worst}");
    }

    #[test]
    fn contact_tensor_matches_position_grid() {
        // independent check: plain Riemann sum on a fine grid
        let b = OrbitalBasis::with_default_quadrature(6).unwrap();
        let u = b.interaction_tensor();
        let h = 1e-3;
        let mut s = 0.0;
        let mut x = -12.0;
        while x <= 12.0 {
            s += orbital(0, x) * orbital(2, x) * orbital(3, x) * orbital(5, x) * h;
            x += h;
        }
        assert!((u.get(0, 2, 3, 5) - s).abs() < 1e-10);
    }
}
