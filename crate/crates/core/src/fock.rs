//! Energy-truncated bosonic occupation bases and many-body operator assembly.
//!
//! A state is kept when its non-interacting energy `Σ occ_i (i+½)` does not
//! exceed `e_cut`, i.e. when its total oscillator quanta are at most
//! `Q = ⌊e_cut − N/2⌋`. The tagged space singles out particle 1 (the
//! "impurity") so that `x̂₁` and `p̂₁` become ordinary matrices.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::fmath::{floor, sqrt};
use crate::hobasis::{InteractionTensor, OneBodyMatrices};
use crate::linalg::{sym_eigen, CsrMat, Mat};
use crate::twobody::{BracketTable, EffectiveInteraction};

/// Spaces above this dimension are assembled sparse.
pub const DENSE_LIMIT: usize = 2000;

fn max_quanta_for(n: usize, e_cut: f64) -> Result<usize> {
    let min = 0.5 * n as f64;
    if n == 0 || !(e_cut >= min - 1e-12) {
        return Err(Error::EmptySpace { n, e_cut, min });
    }
    Ok(floor(e_cut - min + 1e-9) as usize)
}

// Sorted fixed-width keys with binary-search lookup.
#[derive(Clone, Debug)]
struct ConfigTable {
    width: usize,
    keys: Vec<u8>,
    quanta: Vec<u16>,
}

impl ConfigTable {
    fn len(&self) -> usize {
        self.quanta.len()
    }

    fn key(&self, i: usize) -> &[u8] {
        &self.keys[i * self.width..(i + 1) * self.width]
    }

    fn find(&self, key: &[u8]) -> Option<usize> {
        let (mut lo, mut hi) = (0, self.len());
        while lo < hi {
            let mid = (lo + hi) / 2;
            match self.key(mid).cmp(key) {
                Ordering::Less => lo = mid + 1,
                Ordering::Greater => hi = mid,
                Ordering::Equal => return Some(mid),
            }
        }
        None
    }

    fn push(&mut self, key: &[u8], q: usize) {
        self.keys.extend_from_slice(key);
        self.quanta.push(q as u16);
    }
}

// Depth-first enumeration in lexicographic order of occupation vectors.
fn enumerate_occupations(n: usize, n_orb: usize, budget: usize, f: &mut impl FnMut(&[u8], usize)) {
    fn rec(
        occ: &mut Vec<u8>,
        orb: usize,
        left: usize,
        used: usize,
        budget: usize,
        f: &mut impl FnMut(&[u8], usize),
    ) {
        let n_orb = occ.len();
        if orb + 1 == n_orb || left == 0 {
            let cost = left * orb;
            if used + cost <= budget {
                occ[orb] = left as u8;
                f(occ, used + cost);
                occ[orb] = 0;
            }
            return;
        }
        for k in 0..=left {
            let q = used + k * orb;
            if q > budget {
                break;
            }
            occ[orb] = k as u8;
            rec(occ, orb + 1, left - k, q, budget, f);
        }
        occ[orb] = 0;
    }
    let mut occ = vec![0u8; n_orb];
    rec(&mut occ, 0, n, 0, budget, f);
}

/// Symmetric `N`-boson space with an energy cutoff.
#[derive(Clone, Debug)]
pub struct FockSpace {
    n: usize,
    e_cut: f64,
    max_quanta: usize,
    table: ConfigTable,
}

impl FockSpace {
    pub fn new(n: usize, e_cut: f64) -> Result<Self> {
        let max_quanta = max_quanta_for(n, e_cut)?;
        let n_orb = max_quanta + 1;
        let mut table = ConfigTable { width: n_orb, keys: Vec::new(), quanta: Vec::new() };
        enumerate_occupations(n, n_orb, max_quanta, &mut |occ, q| table.push(occ, q));
        Ok(FockSpace { n, e_cut, max_quanta, table })
    }

    pub fn occupation(&self, idx: usize) -> &[u8] {
        self.table.key(idx)
    }

    pub fn index_of(&self, occ: &[u8]) -> Option<usize> {
        if occ.len() != self.table.width {
            return None;
        }
        self.table.find(occ)
    }

    pub fn e_cut(&self) -> f64 {
        self.e_cut
    }

    pub fn energy(&self, idx: usize) -> f64 {
        self.table.quanta[idx] as f64 + 0.5 * self.n as f64
    }
}

/// Impurity orbital `m` times a symmetric space of `N−1` bosons, under the
/// joint cutoff `(m+½) + E_bosons ≤ e_cut`. Keys are `[m, occ…]`.
#[derive(Clone, Debug)]
pub struct TaggedSpace {
    n: usize,
    e_cut: f64,
    max_quanta: usize,
    table: ConfigTable,
}

impl TaggedSpace {
    pub fn new(n: usize, e_cut: f64) -> Result<Self> {
        let max_quanta = max_quanta_for(n, e_cut)?;
        let n_orb = max_quanta + 1;
        let mut table = ConfigTable { width: n_orb + 1, keys: Vec::new(), quanta: Vec::new() };
        let mut key = vec![0u8; n_orb + 1];
        for m in 0..=max_quanta {
            key[0] = m as u8;
            enumerate_occupations(n - 1, n_orb, max_quanta - m, &mut |occ, q| {
                key[1..].copy_from_slice(occ);
                table.push(&key, q + m);
            });
        }
        Ok(TaggedSpace { n, e_cut, max_quanta, table })
    }

    /// `(impurity orbital, boson occupations)` of a basis state.
    pub fn state(&self, idx: usize) -> (usize, &[u8]) {
        let k = self.table.key(idx);
        (k[0] as usize, &k[1..])
    }

    pub fn index_of(&self, m: usize, occ: &[u8]) -> Option<usize> {
        if occ.len() + 1 != self.table.width || m > self.max_quanta {
            return None;
        }
        let mut key = Vec::with_capacity(self.table.width);
        key.push(m as u8);
        key.extend_from_slice(occ);
        self.table.find(&key)
    }

    pub fn e_cut(&self) -> f64 {
        self.e_cut
    }
}

/// Which particles a one-body operator acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scope {
    All,
    /// Particle 1 only; identical to `All` in a symmetric space with `N = 1`.
    Impurity,
}

/// Common interface of the two bases.
pub trait ManyBodySpace {
    fn dim(&self) -> usize;
    fn n_particles(&self) -> usize;
    fn max_quanta(&self) -> usize;
    fn quanta(&self, idx: usize) -> usize;
    fn is_tagged(&self) -> bool;

    fn n_orb(&self) -> usize {
        self.max_quanta() + 1
    }

    /// Triplets of `Σ_ij o_ij a†_i a_j` restricted to `scope`.
    fn one_body_triplets(&self, o: &Mat, scope: Scope, out: &mut Vec<(usize, usize, f64)>) -> Result<()>;

    /// Triplets of `½ Σ ⟨ij|V|kl⟩ a†_i a†_j a_l a_k`.
    fn two_body_triplets(&self, v: &PairTable, out: &mut Vec<(usize, usize, f64)>);

    /// Parity `(−1)^quanta` of each basis state.
    fn parities(&self) -> Vec<i8> {
        (0..self.dim()).map(|i| if self.quanta(i) % 2 == 0 { 1 } else { -1 }).collect()
    }

    /// Basis indices grouped by total quanta.
    fn shells(&self) -> Vec<Vec<usize>> {
        let mut s = vec![Vec::new(); self.max_quanta() + 1];
        for i in 0..self.dim() {
            s[self.quanta(i)].push(i);
        }
        s
    }
}

// Nonzero entries of a one-body matrix, grouped by column.
fn columns(o: &Mat) -> Vec<Vec<(usize, f64)>> {
    let mut c = vec![Vec::new(); o.cols()];
    for i in 0..o.rows() {
        for (j, &v) in o.row(i).iter().enumerate() {
            if v != 0.0 {
                c[j].push((i, v));
            }
        }
    }
    c
}

fn check_one_body(o: &Mat, n_orb: usize) -> Result<()> {
    if o.rows() < n_orb || o.cols() < n_orb {
        return Err(Error::ShapeMismatch("one-body matrix smaller than orbital count"));
    }
    Ok(())
}

// Σ_ij o_ij a†_i a_j on a single occupation vector.
fn hop_symmetric(
    occ: &[u8],
    cols: &[Vec<(usize, f64)>],
    mut emit: impl FnMut(&[u8], f64),
) {
    let mut work = occ.to_vec();
    for (j, &nj) in occ.iter().enumerate() {
        if nj == 0 {
            continue;
        }
        for &(i, o) in &cols[j] {
            if i >= occ.len() {
                continue;
            }
            work[j] -= 1;
            let ni = work[i] as f64;
            work[i] += 1;
            emit(&work, o * sqrt(nj as f64) * sqrt(ni + 1.0));
            work[i] -= 1;
            work[j] += 1;
        }
    }
}

// ½ Σ V a†a†aa on a single occupation vector; `budget` caps the quanta of
// the created pair.
fn pair_hop_symmetric(occ: &[u8], v: &PairTable, spare: usize, mut emit: impl FnMut(&[u8], f64)) {
    let n_orb = occ.len();
    let mut work = occ.to_vec();
    for k in 0..n_orb {
        if occ[k] == 0 {
            continue;
        }
        for l in k..n_orb {
            let amp_a = if k == l {
                if occ[k] < 2 {
                    continue;
                }
                sqrt(occ[k] as f64 * (occ[k] as f64 - 1.0))
            } else {
                if occ[l] == 0 {
                    continue;
                }
                sqrt(occ[k] as f64 * occ[l] as f64)
            };
            work[k] -= 1;
            work[l] -= 1;
            let budget = spare + k + l;
            for s in ((k + l) % 2..=budget.min(v.q_max())).step_by(2) {
                for i in 0..=(s / 2) {
                    let j = s - i;
                    if j >= n_orb {
                        continue;
                    }
                    let w = v.symmetrised(i, j, k, l);
                    if w == 0.0 {
                        continue;
                    }
                    let amp_c = if i == j {
                        sqrt((work[i] as f64 + 1.0) * (work[i] as f64 + 2.0))
                    } else {
                        sqrt((work[i] as f64 + 1.0) * (work[j] as f64 + 1.0))
                    };
                    work[i] += 1;
                    work[j] += 1;
                    emit(&work, 0.5 * w * amp_a * amp_c);
                    work[i] -= 1;
                    work[j] -= 1;
                }
            }
            work[k] += 1;
            work[l] += 1;
        }
    }
}

impl ManyBodySpace for FockSpace {
    fn dim(&self) -> usize {
        self.table.len()
    }

    fn n_particles(&self) -> usize {
        self.n
    }

    fn max_quanta(&self) -> usize {
        self.max_quanta
    }

    fn quanta(&self, idx: usize) -> usize {
        self.table.quanta[idx] as usize
    }

    fn is_tagged(&self) -> bool {
        false
    }

    fn one_body_triplets(&self, o: &Mat, scope: Scope, out: &mut Vec<(usize, usize, f64)>) -> Result<()> {
        check_one_body(o, self.n_orb())?;
        if scope == Scope::Impurity && self.n != 1 {
            return Err(Error::ShapeMismatch("particle-resolved operator needs a tagged space"));
        }
        let cols = columns(o);
        for ket in 0..self.dim() {
            hop_symmetric(self.table.key(ket), &cols, |occ, a| {
                if let Some(bra) = self.table.find(occ) {
                    out.push((bra, ket, a));
                }
            });
        }
        Ok(())
    }

    fn two_body_triplets(&self, v: &PairTable, out: &mut Vec<(usize, usize, f64)>) {
        for ket in 0..self.dim() {
            let spare = self.max_quanta - self.quanta(ket);
            pair_hop_symmetric(self.table.key(ket), v, spare, |occ, a| {
                if let Some(bra) = self.table.find(occ) {
                    out.push((bra, ket, a));
                }
            });
        }
    }
}

impl ManyBodySpace for TaggedSpace {
    fn dim(&self) -> usize {
        self.table.len()
    }

    fn n_particles(&self) -> usize {
        self.n
    }

    fn max_quanta(&self) -> usize {
        self.max_quanta
    }

    fn quanta(&self, idx: usize) -> usize {
        self.table.quanta[idx] as usize
    }

    fn is_tagged(&self) -> bool {
        true
    }

    fn one_body_triplets(&self, o: &Mat, scope: Scope, out: &mut Vec<(usize, usize, f64)>) -> Result<()> {
        check_one_body(o, self.n_orb())?;
        let cols = columns(o);
        let mut key = Vec::with_capacity(self.table.width);
        for ket in 0..self.dim() {
            let k = self.table.key(ket);
            let m = k[0] as usize;
            for &(i, v) in &cols[m] {
                if i > self.max_quanta {
                    continue;
                }
                key.clear();
                key.push(i as u8);
                key.extend_from_slice(&k[1..]);
                if let Some(bra) = self.table.find(&key) {
                    out.push((bra, ket, v));
                }
            }
            if scope == Scope::All {
                hop_symmetric(&k[1..], &cols, |occ, a| {
                    key.clear();
                    key.push(m as u8);
                    key.extend_from_slice(occ);
                    if let Some(bra) = self.table.find(&key) {
                        out.push((bra, ket, a));
                    }
                });
            }
        }
        Ok(())
    }

    fn two_body_triplets(&self, v: &PairTable, out: &mut Vec<(usize, usize, f64)>) {
        let n_orb = self.n_orb();
        let mut key = vec![0u8; self.table.width];
        for ket in 0..self.dim() {
            let k = self.table.key(ket);
            let m0 = k[0] as usize;
            let spare = self.max_quanta - self.quanta(ket);
            // boson–boson
            pair_hop_symmetric(&k[1..], v, spare, |occ, a| {
                key[0] = m0 as u8;
                key[1..].copy_from_slice(occ);
                if let Some(bra) = self.table.find(&key) {
                    out.push((bra, ket, a));
                }
            });
            // impurity–boson: Σ ⟨m i|V|m0 b⟩ |m⟩⟨m0| c†_i c_b
            key.copy_from_slice(k);
            for b in 0..n_orb {
                let nb = k[1 + b];
                if nb == 0 {
                    continue;
                }
                key[1 + b] -= 1;
                let budget = (spare + m0 + b).min(v.q_max());
                for s in ((m0 + b) % 2..=budget).step_by(2) {
                    for m in 0..=s {
                        let i = s - m;
                        if i >= n_orb {
                            continue;
                        }
                        let w = v.get(m, i, m0, b);
                        if w == 0.0 {
                            continue;
                        }
                        let ni = key[1 + i] as f64;
                        key[0] = m as u8;
                        key[1 + i] += 1;
                        if let Some(bra) = self.table.find(&key) {
                            out.push((bra, ket, w * sqrt(nb as f64) * sqrt(ni + 1.0)));
                        }
                        key[1 + i] -= 1;
                    }
                }
                key[0] = m0 as u8;
                key[1 + b] += 1;
            }
        }
    }
}

/// Lab-frame two-body matrix elements `⟨ij|V|kl⟩` for ordered orbital pairs
/// with `i+j ≤ q_max` and `k+l ≤ q_max`.
#[derive(Clone, Debug)]
pub struct PairTable {
    q_max: usize,
    n_pairs: usize,
    data: Vec<f64>,
}

impl PairTable {
    #[inline]
    fn pair_index(i: usize, j: usize) -> usize {
        let s = i + j;
        s * (s + 1) / 2 + i
    }

    pub fn from_fn(q_max: usize, mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        let n_pairs = (q_max + 1) * (q_max + 2) / 2;
        let mut data = vec![0.0; n_pairs * n_pairs];
        for s in 0..=q_max {
            for i in 0..=s {
                let a = Self::pair_index(i, s - i);
                for t in (s % 2..=q_max).step_by(2) {
                    for k in 0..=t {
                        data[a * n_pairs + Self::pair_index(k, t - k)] = f(i, s - i, k, t - k);
                    }
                }
            }
        }
        PairTable { q_max, n_pairs, data }
    }

    /// Bare contact interaction `g·U_ijkl`.
    pub fn bare(g: f64, tensor: &InteractionTensor, q_max: usize) -> Result<Self> {
        if tensor.n_orb() <= q_max {
            return Err(Error::ShapeMismatch("interaction tensor has fewer orbitals than the cutoff needs"));
        }
        Ok(Self::from_fn(q_max, |i, j, k, l| g * tensor.get(i, j, k, l)))
    }

    /// Renormalised interaction acting on the pair's relative motion, moved to
    /// the lab frame with oscillator brackets.
    pub fn effective(v: &EffectiveInteraction, brackets: &BracketTable, q_max: usize) -> Result<Self> {
        if brackets.n_max() < q_max {
            return Err(Error::ShapeMismatch("bracket table smaller than the pair cutoff"));
        }
        let d = v.dim();
        let vm = &v.v_eff;
        Ok(Self::from_fn(q_max, |i, j, k, l| {
            let (s, t) = (i + j, k + l);
            let (bra, ket) = (brackets.shell(i, j), brackets.shell(k, l));
            let mut acc = 0.0;
            for n_cm in 0..=s.min(t) {
                let (r, rp) = (s - n_cm, t - n_cm);
                if r % 2 == 1 || r / 2 >= d || rp / 2 >= d {
                    continue;
                }
                acc += bra[n_cm] * ket[n_cm] * vm[(r / 2, rp / 2)];
            }
            acc
        }))
    }

    pub fn q_max(&self) -> usize {
        self.q_max
    }

    /// `⟨ij|V|kl⟩`, zero outside the stored pair range.
    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        if i + j > self.q_max || k + l > self.q_max {
            return 0.0;
        }
        self.data[Self::pair_index(i, j) * self.n_pairs + Self::pair_index(k, l)]
    }

    // Sum over the distinct orderings of the unordered pairs {i,j} and {k,l}.
    fn symmetrised(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let mut w = self.get(i, j, k, l);
        if k != l {
            w += self.get(i, j, l, k);
        }
        if i != j {
            w += self.get(j, i, k, l);
            if k != l {
                w += self.get(j, i, l, k);
            }
        }
        w
    }
}

/// Storage of a many-body matrix.
#[derive(Clone, Debug)]
pub enum OpStorage {
    Dense(Mat),
    Sparse(CsrMat),
}

/// How the stored real matrix `M` relates to the operator: `Real` means the
/// operator is `M`, `MinusI` means it is `−i·M` (e.g. `p = −i·(ip)`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Real,
    MinusI,
}

#[derive(Clone, Debug)]
pub struct ManyBodyOperator {
    pub storage: OpStorage,
    pub phase: Phase,
    pub hermitian: bool,
}

impl ManyBodyOperator {
    pub fn from_triplets(dim: usize, trip: Vec<(usize, usize, f64)>, phase: Phase) -> Self {
        let csr = CsrMat::from_triplets(dim, dim, trip);
        let storage = if dim <= DENSE_LIMIT { OpStorage::Dense(csr.to_dense()) } else { OpStorage::Sparse(csr) };
        let mut op = ManyBodyOperator { storage, phase, hermitian: false };
        op.hermitian = op.hermiticity_residual() < 1e-12;
        op
    }

    pub fn from_csr(csr: CsrMat, phase: Phase) -> Self {
        let dim = csr.n_rows();
        let storage = if dim <= DENSE_LIMIT { OpStorage::Dense(csr.to_dense()) } else { OpStorage::Sparse(csr) };
        let mut op = ManyBodyOperator { storage, phase, hermitian: false };
        op.hermitian = op.hermiticity_residual() < 1e-12;
        op
    }

    pub fn dim(&self) -> usize {
        match &self.storage {
            OpStorage::Dense(m) => m.rows(),
            OpStorage::Sparse(s) => s.n_rows(),
        }
    }

    /// Largest `|M_ij ∓ M_ji|`, with the sign set by the phase.
    pub fn hermiticity_residual(&self) -> f64 {
        let sign = if self.phase == Phase::Real { 1.0 } else { -1.0 };
        let mut r: f64 = 0.0;
        match &self.storage {
            OpStorage::Dense(m) => {
                for i in 0..m.rows() {
                    for j in 0..i + 1 {
                        r = r.max((m[(i, j)] - sign * m[(j, i)]).abs());
                    }
                }
            }
            OpStorage::Sparse(s) => {
                for i in 0..s.n_rows() {
                    for (j, v) in s.row_entries(i) {
                        r = r.max((v - sign * s.get(j, i)).abs());
                    }
                }
            }
        }
        r
    }

    /// The real matrix `M` applied to `x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        match &self.storage {
            OpStorage::Dense(m) => m.matvec(x),
            OpStorage::Sparse(s) => s.matvec(x),
        }
    }

    pub fn to_dense(&self) -> Mat {
        match &self.storage {
            OpStorage::Dense(m) => m.clone(),
            OpStorage::Sparse(s) => s.to_dense(),
        }
    }

    pub fn to_csr(&self) -> CsrMat {
        match &self.storage {
            OpStorage::Dense(m) => {
                let mut trip = Vec::new();
                for i in 0..m.rows() {
                    for (j, &v) in m.row(i).iter().enumerate() {
                        if v != 0.0 {
                            trip.push((i, j, v));
                        }
                    }
                }
                CsrMat::from_triplets(m.rows(), m.cols(), trip)
            }
            OpStorage::Sparse(s) => s.clone(),
        }
    }

    /// `V·M·Vᵀ` for basis vectors stored as the rows of `v`.
    pub fn project_rows(&self, v: &Mat) -> Mat {
        match &self.storage {
            OpStorage::Dense(m) => v.matmul(m).matmul_t(v),
            OpStorage::Sparse(s) => s.similarity_rows(v),
        }
    }

    /// `⟨a|M|b⟩`.
    pub fn element(&self, a: &[f64], b: &[f64]) -> f64 {
        crate::linalg::dot(a, &self.matvec(b))
    }
}

/// Interaction treatment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InteractionMode {
    /// `g·U_ijkl` from quadrature.
    Bare,
    /// Renormalised interaction reproducing the exact unit-trap two-body
    /// levels in the relative basis up to the pair cutoff. The same operator
    /// is used for every trap strength.
    Effective,
}

/// Pair table for `(g, mode)` matched to a space's quanta cutoff.
pub fn pair_table(q_max: usize, g: f64, mode: InteractionMode) -> Result<PairTable> {
    match mode {
        InteractionMode::Bare => {
            let basis = crate::hobasis::OrbitalBasis::with_default_quadrature(q_max + 1)?;
            PairTable::bare(g, &basis.interaction_tensor(), q_max)
        }
        InteractionMode::Effective => {
            let d = q_max / 2 + 1;
            let v = crate::twobody::effective_interaction(g, 1.0, d)?;
            PairTable::effective(&v, &BracketTable::new(q_max), q_max)
        }
    }
}

/// `Σ_n h_γ(n) + Σ_{k<j} V(x_k − x_j)` on a space, using a prepared pair table.
pub fn build_hamiltonian_with<S: ManyBodySpace + ?Sized>(space: &S, gamma: f64, pairs: &PairTable) -> Result<ManyBodyOperator> {
    if pairs.q_max() < space.max_quanta() {
        return Err(Error::ShapeMismatch("pair table cutoff below the space cutoff"));
    }
    let one = OneBodyMatrices::new(space.n_orb(), gamma)?;
    let mut trip = Vec::new();
    space.one_body_triplets(&one.h_gamma, Scope::All, &mut trip)?;
    space.two_body_triplets(pairs, &mut trip);
    let op = ManyBodyOperator::from_triplets(space.dim(), trip, Phase::Real);
    Ok(op)
}

/// Hamiltonian of `N` bosons with contact strength `g` in a trap of strength `γ`,
/// expressed in the unit-frequency orbitals.
pub fn build_hamiltonian<S: ManyBodySpace + ?Sized>(space: &S, g: f64, gamma: f64, mode: InteractionMode) -> Result<ManyBodyOperator> {
    if !(g >= 0.0) || !g.is_finite() {
        return Err(Error::InvalidParameter { name: "g", value: g });
    }
    let pairs = pair_table(space.max_quanta(), g, mode)?;
    build_hamiltonian_with(space, gamma, &pairs)
}

/// Weight of `R = N^{−1/2} Σ x_n` in `x̂₁ = R/√N + Ŷ₁`.
#[derive(Clone, Copy, Debug)]
pub struct JacobiMap {
    pub n: usize,
}

impl JacobiMap {
    /// Coefficient of `Σ_n x_n` in `R`.
    pub fn r_weight(&self) -> f64 {
        1.0 / sqrt(self.n as f64)
    }

    /// Coefficient of `Σ_n x_n` in `Ŷ₁ = x₁ − R/√N`.
    pub fn y1_sum_weight(&self) -> f64 {
        -1.0 / self.n as f64
    }
}

/// Particle-resolved and collective operators on a tagged space.
#[derive(Clone, Debug)]
pub struct ParticleOperators {
    pub x1: ManyBodyOperator,
    /// Stored as `i·p₁` (real antisymmetric) with phase `MinusI`.
    pub p1: ManyBodyOperator,
    pub r: ManyBodyOperator,
    pub y1: ManyBodyOperator,
    pub n_cm: ManyBodyOperator,
    /// `L = √N·A_cm = Σ_n a_n` restricted to the space (exact: it only lowers).
    pub lowering: CsrMat,
}

/// `L = Σ_n a_n` on a space.
pub fn cm_lowering<S: ManyBodySpace + ?Sized>(space: &S) -> Result<CsrMat> {
    let n_orb = space.n_orb();
    let lower = Mat::from_fn(n_orb, n_orb, |i, j| if j == i + 1 { sqrt(j as f64) } else { 0.0 });
    let mut trip = Vec::new();
    space.one_body_triplets(&lower, Scope::All, &mut trip)?;
    Ok(CsrMat::from_triplets(space.dim(), space.dim(), trip))
}

pub fn particle_operators(space: &TaggedSpace) -> Result<ParticleOperators> {
    let n = space.n_particles();
    let one = OneBodyMatrices::new(space.n_orb(), 1.0)?;
    let dim = space.dim();
    let mut t_x1 = Vec::new();
    space.one_body_triplets(&one.x_mat, Scope::Impurity, &mut t_x1)?;
    let mut t_ip = Vec::new();
    space.one_body_triplets(&one.ip_mat, Scope::Impurity, &mut t_ip)?;
    let mut t_all = Vec::new();
    space.one_body_triplets(&one.x_mat, Scope::All, &mut t_all)?;
    let jac = JacobiMap { n };
    let t_r: Vec<_> = t_all.iter().map(|&(i, j, v)| (i, j, v * jac.r_weight())).collect();
    let mut t_y = t_x1.clone();
    t_y.extend(t_all.iter().map(|&(i, j, v)| (i, j, v * jac.y1_sum_weight())));
    let lowering = cm_lowering(space)?;
    let mut n_cm = lowering.transpose().matmul(&lowering);
    let inv_n = 1.0 / n as f64;
    let trip: Vec<_> = (0..dim).flat_map(|i| n_cm.row_entries(i).map(move |(j, v)| (i, j, v))).collect();
    n_cm = CsrMat::from_triplets(dim, dim, trip.into_iter().map(|(i, j, v)| (i, j, v * inv_n)).collect());
    Ok(ParticleOperators {
        x1: ManyBodyOperator::from_triplets(dim, t_x1, Phase::Real),
        p1: ManyBodyOperator::from_triplets(dim, t_ip, Phase::MinusI),
        r: ManyBodyOperator::from_triplets(dim, t_r, Phase::Real),
        y1: ManyBodyOperator::from_triplets(dim, t_y, Phase::Real),
        n_cm: ManyBodyOperator::from_csr(n_cm, Phase::Real),
        lowering,
    })
}

/// Map a symmetric `N`-boson state into the tagged space:
/// `|occ⟩ ↦ Σ_m √(occ_m/N) |m⟩ ⊗ |occ − e_m⟩`.
pub fn embed_symmetric(state: &[f64], from: &FockSpace, to: &TaggedSpace) -> Result<Vec<f64>> {
    if state.len() != from.dim() || from.n_particles() != to.n_particles() {
        return Err(Error::ShapeMismatch("state does not belong to the symmetric space"));
    }
    let n = from.n_particles() as f64;
    let n_orb_to = to.n_orb();
    let mut out = vec![0.0; to.dim()];
    let mut lost = 0.0;
    let mut occ = vec![0u8; n_orb_to];
    for (idx, &c) in state.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let src = from.occupation(idx);
        let fits = src.iter().enumerate().all(|(i, &k)| k == 0 || i < n_orb_to);
        for (m, &nm) in src.iter().enumerate() {
            if nm == 0 {
                continue;
            }
            let w = c * sqrt(nm as f64 / n);
            let target = if fits {
                occ.iter_mut().for_each(|x| *x = 0);
                for (i, &k) in src.iter().enumerate() {
                    if k > 0 {
                        occ[i] = k;
                    }
                }
                occ[m] -= 1;
                to.index_of(m, &occ)
            } else {
                None
            };
            match target {
                Some(t) => out[t] += w,
                None => lost += w * w,
            }
        }
    }
    if lost > 1e-12 {
        return Err(Error::LossyEmbedding { norm_deficit: lost });
    }
    Ok(out)
}

/// Orthonormal basis (as rows) of the centre-of-mass ground sector
/// `ker L` of a space, built shell by shell.
pub fn cm_ground_basis<S: ManyBodySpace + ?Sized>(space: &S, lowering: &CsrMat) -> Result<Mat> {
    let shells = space.shells();
    // columns of L as rows of Lᵀ
    let lt = lowering.transpose();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    for q in 0..shells.len() {
        let cur = &shells[q];
        if q == 0 {
            for &i in cur {
                rows.push(vec![(i, 1.0)]);
            }
            continue;
        }
        let prev = &shells[q - 1];
        let want = cur.len() - prev.len().min(cur.len());
        if want == 0 {
            continue;
        }
        // position of each lower-shell state
        let mut pos = vec![usize::MAX; space.dim()];
        for (a, &i) in prev.iter().enumerate() {
            pos[i] = a;
        }
        let mut lq = Mat::zeros(prev.len(), cur.len());
        for (b, &j) in cur.iter().enumerate() {
            for (i, v) in lt.row_entries(j) {
                if pos[i] != usize::MAX {
                    lq[(pos[i], b)] = v;
                }
            }
        }
        let gram = lq.transpose().matmul(&lq);
        let eig = sym_eigen(&gram)?;
        if want < cur.len() && eig.values[want] < 0.5 {
            return Err(Error::NoConvergence { what: "centre-of-mass kernel gap", residual: eig.values[want] });
        }
        for k in 0..want {
            if eig.values[k] > 1e-9 {
                return Err(Error::NoConvergence { what: "centre-of-mass kernel", residual: eig.values[k] });
            }
            let v = eig.vectors.row(k);
            rows.push(cur.iter().zip(v).map(|(&i, &c)| (i, c)).collect());
        }
    }
    let mut out = Mat::zeros(rows.len(), space.dim());
    for (r, entries) in rows.iter().enumerate() {
        for &(i, c) in entries {
            out[(r, i)] = c;
        }
    }
    Ok(out)
}
