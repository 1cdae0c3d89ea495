//! Replicated transfer operators and Rényi mutual information.
//!
//! Replica vectors carry `2k` bond axes ordered `(conj₁, ket₁, …, conj_k, ket_k)`.
//! The operator for a site tensor `A` and permutation `α` is
//! `Σ_s ⊗_m conj(A^{s_α(m)}) ⊗ A^{s_m}`; with `α = C_k` (`m ↦ m+1`) it wires
//! the replicas into `Tr ρ^k`.

use std::ops::Range;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eig_general_with, inverse, kron, ComplexMatrix, Tolerances};
use crate::mps::uniform::{cp_fixed_point, left_map, right_map, FixedPointOptions, UniformCanonical};
use crate::mps::{MpsState, Tensor3};
use crate::perm::Permutation;
use crate::scalar::{cone, czero, to_c64, Real};

pub const MIN_ORDER: usize = 2;
pub const MAX_ORDER: usize = 4;
/// Default ceiling on multiply-adds for one finite-chain replica trace.
pub const DEFAULT_BUDGET: f64 = 5e10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApplyMode {
    /// Materialize the `χ^{2k}` matrix (subject to the dense cap).
    Dense,
    /// Sequential tensor contractions.
    Contraction,
}

/// `𝒯_α^{(k)}` for one site tensor.
#[derive(Clone, Debug)]
pub struct ReplicaOperator<'a, T> {
    tensor: &'a Tensor3<T>,
    alpha: Permutation,
    mode: ApplyMode,
}

impl<'a, T: Real> ReplicaOperator<'a, T> {
    pub fn new(tensor: &'a Tensor3<T>, alpha: Permutation, mode: ApplyMode) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::InvalidInput("replica count must be positive".into()));
        }
        Ok(Self { tensor, alpha, mode })
    }

    pub fn identity(tensor: &'a Tensor3<T>, k: usize, mode: ApplyMode) -> Result<Self> {
        Self::new(tensor, Permutation::identity(k), mode)
    }

    pub fn cyclic(tensor: &'a Tensor3<T>, k: usize, mode: ApplyMode) -> Result<Self> {
        Self::new(tensor, Permutation::cyclic(k), mode)
    }

    pub fn k(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &Permutation {
        &self.alpha
    }

    pub fn mode(&self) -> ApplyMode {
        self.mode
    }

    /// `(rows, cols)` = `(χ_l^{2k}, χ_r^{2k})`.
    pub fn shape(&self) -> (usize, usize) {
        let p = 2 * self.k() as u32;
        (self.tensor.left().pow(p), self.tensor.right().pow(p))
    }

    /// The dense matrix, built as a sum of Kronecker products.
    pub fn dense(&self, tol: &Tolerances) -> Result<ComplexMatrix<T>> {
        let (rows, cols) = self.shape();
        let cap = tol.dense_cap;
        if rows > cap || cols > cap {
            return Err(Error::AboveCap {
                dim: rows.max(cols),
                cap,
            });
        }
        let k = self.k();
        let d = self.tensor.d();
        let slices: Vec<ComplexMatrix<T>> = (0..d).map(|s| self.tensor.slice(s)).collect();
        let conj: Vec<ComplexMatrix<T>> = slices.iter().map(|m| m.conj()).collect();
        let mut out = ComplexMatrix::zeros(rows, cols);
        for code in 0..d.pow(k as u32) {
            let s = digits(code, d, k);
            let mut term = ComplexMatrix::identity(1);
            for m in 0..k {
                term = kron(&term, &conj[s[self.alpha.apply(m)]])?;
                term = kron(&term, &slices[s[m]])?;
            }
            out = out.add(&term)?;
        }
        Ok(out)
    }

    /// `𝒯 v` for `v` indexed by right bonds.
    pub fn apply(&self, v: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        let (rows, cols) = self.shape();
        if v.len() != cols {
            return Err(Error::DimensionMismatch(format!(
                "replica vector of length {} for an operator with {cols} columns",
                v.len()
            )));
        }
        match self.mode {
            ApplyMode::Dense => {
                let m = self.dense(&Tolerances {
                    dense_cap: rows.max(cols),
                    ..Tolerances::default()
                })?;
                m.apply(v)
            }
            ApplyMode::Contraction => Ok(contract_site(self.tensor, &self.alpha, v)),
        }
    }

    /// `vᵀ 𝒯` for `v` indexed by left bonds.
    pub fn apply_left(&self, v: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        let t = transpose_bonds(self.tensor);
        ReplicaOperator::new(&t, self.alpha.clone(), self.mode)?.apply(v)
    }
}

/// `replica_apply(op, v) = 𝒯_α^{(k)} v`.
pub fn replica_apply<T: Real>(op: &ReplicaOperator<'_, T>, v: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
    op.apply(v)
}

fn digits(mut code: usize, base: usize, len: usize) -> Vec<usize> {
    let mut out = vec![0; len];
    for slot in out.iter_mut().rev() {
        *slot = code % base;
        code /= base;
    }
    out
}

fn transpose_bonds<T: Real>(a: &Tensor3<T>) -> Tensor3<T> {
    Tensor3::from_fn(a.right(), a.d(), a.left(), |b, s, x| a.get(x, s, b))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Axis {
    Conj(usize),
    Ket(usize),
    PhysConj(usize),
    PhysKet(usize),
}

/// Flat row-major tensor with labelled axes.
struct Work<T> {
    data: Vec<Complex<T>>,
    dims: Vec<usize>,
    axes: Vec<Axis>,
}

impl<T: Real> Work<T> {
    fn position(&self, axis: Axis) -> usize {
        self.axes.iter().position(|&a| a == axis).expect("axis present")
    }

    /// Replaces axis `p` (old size `m.cols()`) by `m.rows()`, then splits the
    /// new axis into `(outer, d)` labelled `(keep, phys)`.
    fn apply_split(&mut self, p: usize, m: &ComplexMatrix<T>, outer: usize, keep: Axis, phys: Axis) {
        let old = self.dims[p];
        let new = m.rows();
        let before: usize = self.dims[..p].iter().product();
        let after: usize = self.dims[p + 1..].iter().product();
        let mut out = vec![czero::<T>(); before * new * after];
        for i in 0..before {
            let src = &self.data[i * old * after..(i + 1) * old * after];
            let dst = &mut out[i * new * after..(i + 1) * new * after];
            for n in 0..new {
                let drow = &mut dst[n * after..(n + 1) * after];
                for o in 0..old {
                    let w = m[(n, o)];
                    if w == czero() {
                        continue;
                    }
                    let srow = &src[o * after..(o + 1) * after];
                    for (x, &y) in drow.iter_mut().zip(srow) {
                        *x += w * y;
                    }
                }
            }
        }
        self.data = out;
        self.dims.splice(p..=p, [outer, new / outer]);
        self.axes.splice(p..=p, [keep, phys]);
    }

    /// Sums the diagonal of two equal-size axes and drops both.
    fn trace_pair(&mut self, a: Axis, b: Axis) {
        let (p, q) = {
            let (x, y) = (self.position(a), self.position(b));
            (x.min(y), x.max(y))
        };
        let d = self.dims[p];
        debug_assert_eq!(d, self.dims[q]);
        let d0: usize = self.dims[..p].iter().product();
        let d1: usize = self.dims[p + 1..q].iter().product();
        let d2: usize = self.dims[q + 1..].iter().product();
        let mut out = vec![czero::<T>(); d0 * d1 * d2];
        for i0 in 0..d0 {
            for s in 0..d {
                for i1 in 0..d1 {
                    let src = (((i0 * d + s) * d1 + i1) * d + s) * d2;
                    let dst = (i0 * d1 + i1) * d2;
                    for i2 in 0..d2 {
                        out[dst + i2] += self.data[src + i2];
                    }
                }
            }
        }
        self.data = out;
        self.dims.remove(q);
        self.dims.remove(p);
        self.axes.remove(q);
        self.axes.remove(p);
    }
}

/// Contraction-mode column action: for each replica `j`, absorb the ket
/// tensor of `j` and the conjugate tensor of `α⁻¹(j)`, then trace the shared
/// physical index.
fn contract_site<T: Real>(a: &Tensor3<T>, alpha: &Permutation, v: &[Complex<T>]) -> Vec<Complex<T>> {
    let k = alpha.len();
    let (l, d, r) = a.shape();
    let ket = ComplexMatrix::from_fn(l * d, r, |row, b| a.get(row / d, row % d, b));
    let conj = ket.conj();
    let mut w = Work {
        data: v.to_vec(),
        dims: vec![r; 2 * k],
        axes: (0..k).flat_map(|m| [Axis::Conj(m), Axis::Ket(m)]).collect(),
    };
    let inv = alpha.inverse();
    for j in 0..k {
        let p = w.position(Axis::Ket(j));
        w.apply_split(p, &ket, l, Axis::Ket(j), Axis::PhysKet(j));
        let m = inv.apply(j);
        let p = w.position(Axis::Conj(m));
        w.apply_split(p, &conj, l, Axis::Conj(m), Axis::PhysConj(m));
        w.trace_pair(Axis::PhysKet(j), Axis::PhysConj(m));
    }
    w.data
}

/// `vec(M)^{⊗k}` in pair order.
pub fn replicated<T: Real>(m: &ComplexMatrix<T>, k: usize) -> Vec<Complex<T>> {
    let base = m.as_slice();
    let mut out = vec![cone::<T>()];
    for _ in 0..k {
        out = out
            .iter()
            .flat_map(|&x| base.iter().map(move |&y| x * y))
            .collect();
    }
    out
}

fn dot<T: Real>(u: &[Complex<T>], v: &[Complex<T>]) -> Complex<T> {
    u.iter().zip(v).map(|(&x, &y)| x * y).sum()
}

/// Contiguous blocks `A` and `B` on an `N`-site chain, `A` left of `B`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockLayout {
    pub n: usize,
    pub a: Range<usize>,
    pub b: Range<usize>,
}

impl BlockLayout {
    pub fn new(n: usize, a: Range<usize>, b: Range<usize>) -> Result<Self> {
        if a.is_empty() || b.is_empty() || a.end > b.start || b.end > n {
            return Err(Error::InvalidInput(format!(
                "blocks {a:?} and {b:?} are not disjoint, ordered and inside {n} sites"
            )));
        }
        Ok(Self { n, a, b })
    }

    /// Largest symmetric blocks around a centered gap of `r` sites.
    pub fn centered(n: usize, r: usize) -> Result<Self> {
        if r + 2 > n {
            return Err(Error::InvalidInput(format!("gap {r} leaves no blocks on {n} sites")));
        }
        let half = (n - r) / 2;
        Self::new(n, 0..half, half + r..n)
    }

    pub fn gap(&self) -> usize {
        self.b.start - self.a.end
    }

    /// Layout under the reflection `i ↦ N − 1 − i`.
    pub fn mirrored(&self) -> Self {
        let flip = |x: &Range<usize>| self.n - x.end..self.n - x.start;
        Self {
            n: self.n,
            a: flip(&self.b),
            b: flip(&self.a),
        }
    }

    fn mask(&self, a: bool, b: bool) -> Vec<bool> {
        (0..self.n)
            .map(|i| (a && self.a.contains(&i)) || (b && self.b.contains(&i)))
            .collect()
    }
}

/// Options for finite-chain replica contractions.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ReplicaOptions {
    /// Multiply-add ceiling per trace.
    pub budget: f64,
}

impl Default for ReplicaOptions {
    fn default() -> Self {
        Self { budget: DEFAULT_BUDGET }
    }
}

fn check_order(k: usize) -> Result<()> {
    if !(MIN_ORDER..=MAX_ORDER).contains(&k) {
        return Err(Error::InvalidInput(format!("replica order {k} outside {MIN_ORDER}..={MAX_ORDER}")));
    }
    Ok(())
}

fn window_cost(bonds: &[usize], d: usize, k: usize) -> f64 {
    bonds
        .windows(2)
        .map(|w| {
            let big = w[0].max(w[1]) as f64;
            2.0 * k as f64 * d as f64 * big.powi(2 * k as i32 + 1)
        })
        .sum()
}

fn contract_window<T: Real>(
    tensors: &[Tensor3<T>],
    mask: &[bool],
    k: usize,
    left: Vec<Complex<T>>,
    right: Vec<Complex<T>>,
) -> Complex<T> {
    let cyc = Permutation::cyclic(k);
    let id = Permutation::identity(k);
    let mut v = right;
    for (a, &on) in tensors.iter().zip(mask).rev() {
        v = contract_site(a, if on { &cyc } else { &id }, &v);
    }
    dot(&left, &v)
}

/// `Tr ρ_X^k` for the site set `mask` by contracting the whole chain; the
/// state need not be canonical or normalized.
pub fn replica_trace_full<T: Real>(state: &MpsState<T>, mask: &[bool], k: usize, opts: &ReplicaOptions) -> Result<f64> {
    if mask.len() != state.len() || state.is_uniform() {
        return Err(Error::InvalidInput("mask must cover a finite chain".into()));
    }
    let mut bonds = state.bond_dims();
    bonds.insert(0, state.tensor(0).left());
    let cost = window_cost(&bonds, state.d(), k);
    if cost > opts.budget {
        return Err(Error::BudgetExceeded {
            cost,
            budget: opts.budget,
        });
    }
    let one = ComplexMatrix::identity(1);
    let tr = contract_window(
        state.tensors(),
        mask,
        k,
        replicated(&one, k),
        replicated(&one, k),
    );
    let norm = state.norm_sqr()?.as_f64();
    Ok(to_c64(tr).re / norm.powi(k as i32))
}

/// `Tr ρ_X^k` on a normalized pure state by contracting only the window
/// spanned by `X` or its complement, whichever is shorter.
pub fn replica_trace<T: Real>(state: &MpsState<T>, mask: &[bool], k: usize, opts: &ReplicaOptions) -> Result<f64> {
    if mask.len() != state.len() || state.is_uniform() {
        return Err(Error::InvalidInput("mask must cover a finite chain".into()));
    }
    let span = |want: bool| {
        let first = mask.iter().position(|&x| x == want)?;
        let last = mask.iter().rposition(|&x| x == want)?;
        Some(first..last + 1)
    };
    let choice = match (span(true), span(false)) {
        (None, _) | (_, None) => return Ok(1.0),
        (Some(x), Some(y)) if x.len() <= y.len() => (x, true),
        (_, Some(y)) => (y, false),
    };
    let (window, want) = choice;
    let mut bonds: Vec<usize> = window.clone().map(|i| state.tensor(i).left()).collect();
    bonds.push(state.tensor(window.end - 1).right());
    let cost = window_cost(&bonds, state.d(), k);
    if cost > opts.budget {
        return Err(Error::BudgetExceeded {
            cost,
            budget: opts.budget,
        });
    }
    let mut s = state.clone();
    s.move_center_to(window.start)?;
    s.normalize()?;
    let sub: Vec<bool> = window.clone().map(|i| mask[i] == want).collect();
    let left = replicated(&ComplexMatrix::identity(bonds[0]), k);
    let right = replicated(&ComplexMatrix::identity(*bonds.last().expect("nonempty")), k);
    let tr = contract_window(&s.tensors()[window], &sub, k, left, right);
    Ok(to_c64(tr).re)
}

/// The three traces entering `I_k(A:B)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicaTraces {
    pub k: usize,
    pub ab: f64,
    pub a: f64,
    pub b: f64,
}

impl ReplicaTraces {
    pub fn mutual_info(&self) -> f64 {
        mutual_info_from_traces(self.k, self.ab, self.a, self.b)
    }
}

pub fn mutual_info_from_traces(k: usize, ab: f64, a: f64, b: f64) -> f64 {
    (ab / (a * b)).ln() / (k as f64 - 1.0)
}

fn prefix_or_suffix_trace<T: Real>(state: &mut MpsState<T>, cut: usize, k: usize) -> Result<Option<f64>> {
    if cut == 0 || cut == state.len() {
        return Ok(Some(1.0));
    }
    let values = state.schmidt_values_at(cut)?.values;
    let norm: f64 = values.iter().map(|s| s.as_f64().powi(2)).sum();
    Ok(Some(
        values
            .iter()
            .map(|s| (s.as_f64().powi(2) / norm).powi(k as i32))
            .sum(),
    ))
}

pub fn replica_traces_finite<T: Real>(
    state: &MpsState<T>,
    layout: &BlockLayout,
    k: usize,
    opts: &ReplicaOptions,
) -> Result<ReplicaTraces> {
    check_order(k)?;
    if layout.n != state.len() {
        return Err(Error::DimensionMismatch(format!(
            "layout for {} sites on a {}-site state",
            layout.n,
            state.len()
        )));
    }
    let mut work = state.clone();
    if work.center().is_none() {
        work.canonicalize_mut(0)?;
    }
    let a = if layout.a.start == 0 {
        prefix_or_suffix_trace(&mut work, layout.a.end, k)?
    } else {
        None
    };
    let a = match a {
        Some(x) => x,
        None => replica_trace(&work, &layout.mask(true, false), k, opts)?,
    };
    let b = if layout.b.end == layout.n {
        prefix_or_suffix_trace(&mut work, layout.b.start, k)?
    } else {
        None
    };
    let b = match b {
        Some(x) => x,
        None => replica_trace(&work, &layout.mask(false, true), k, opts)?,
    };
    let ab = replica_trace(&work, &layout.mask(true, true), k, opts)?;
    Ok(ReplicaTraces { k, ab, a, b })
}

/// `I_k(A:B)` in nats for a finite chain.
pub fn renyi_mutual_info_finite<T: Real>(
    state: &MpsState<T>,
    layout: &BlockLayout,
    k: usize,
    opts: &ReplicaOptions,
) -> Result<f64> {
    Ok(replica_traces_finite(state, layout, k, opts)?.mutual_info())
}

/// Eigenvalues of `𝒯_α^{(k)}` (dense).
pub fn replica_eigvals<T: Real>(tensor: &Tensor3<T>, k: usize, alpha: &Permutation, tol: &Tolerances) -> Result<Vec<Complex<f64>>> {
    if alpha.len() != k {
        return Err(Error::DimensionMismatch(format!("permutation on {} elements for k = {k}", alpha.len())));
    }
    let m = ReplicaOperator::new(tensor, alpha.clone(), ApplyMode::Dense)?.dense(tol)?;
    Ok(eig_general_with(&m, false, tol)?.values.into_iter().map(to_c64).collect())
}

/// Boundary data for one uniform tensor: normalized copy, left and right
/// fixed points as row/column vectors of the single-copy transfer matrix.
struct Boundaries<T> {
    tensor: Tensor3<T>,
    left: ComplexMatrix<T>,
    right: ComplexMatrix<T>,
}

fn boundaries<T: Real>(a: &Tensor3<T>) -> Result<Boundaries<T>> {
    if a.left() != a.right() {
        return Err(Error::DimensionMismatch("uniform tensor needs square bonds".into()));
    }
    let chi = a.left();
    let opts = FixedPointOptions {
        tol: 1e-13,
        ..FixedPointOptions::default()
    };
    let (_, eta) = cp_fixed_point(ComplexMatrix::identity(chi), |x| left_map(a, x), &opts)?;
    let mut t = a.clone();
    t.scale(Complex::new(eta.sqrt().recip(), T::zero()));
    let (l, _) = cp_fixed_point(ComplexMatrix::identity(chi), |x| left_map(&t, x), &opts)?;
    let (rho, _) = cp_fixed_point(ComplexMatrix::identity(chi), |x| right_map(&t, x), &opts)?;
    Ok(Boundaries {
        tensor: t,
        left: l,
        right: rho.conj(),
    })
}

/// Both evaluations of the uniform-state `I_k`.
#[derive(Clone, Copy, Debug)]
pub struct TiPaths {
    /// Eigen-expansion over the spectrum of `𝒯_{C_k}` (absent above the cap).
    pub literal: Option<f64>,
    /// Trace ratio `⟨L|𝒯_C^r|R⟩ / lim_n ⟨L|𝒯_C^n|R⟩`.
    pub contraction: f64,
}

/// `I_k` of a one-site uniform tensor in any gauge, along both routes.
pub fn renyi_mutual_info_ti_paths<T: Real>(a: &Tensor3<T>, k: usize, r: usize, tol: &Tolerances) -> Result<TiPaths> {
    check_order(k)?;
    let bd = boundaries(a)?;
    let chi = bd.tensor.left();
    let l_vec = replicated(&bd.left, k);
    let r_vec = replicated(&bd.right, k);

    // lim_n ⟨L|𝒯_C^n|R⟩ = Tr(M^k)² / Tr(M)^k with M = W·ρ'ᵀ.
    let m = crate::linalg::matmul(&bd.left, &bd.right.transpose())?;
    let mut mk = ComplexMatrix::identity(chi);
    for _ in 0..k {
        mk = crate::linalg::matmul(&mk, &m)?;
    }
    let limit = to_c64(mk.trace()).powu(2) / to_c64(m.trace()).powu(k as u32);

    let op = ReplicaOperator::cyclic(&bd.tensor, k, ApplyMode::Contraction)?;
    let mut v = r_vec.clone();
    for _ in 0..r {
        v = op.apply(&v)?;
    }
    let contraction = (to_c64(dot(&l_vec, &v)) / limit).re.ln() / (k as f64 - 1.0);

    let dim = chi.pow(2 * k as u32);
    let literal = if dim <= tol.dense_cap {
        let t = ReplicaOperator::cyclic(&bd.tensor, k, ApplyMode::Dense)?.dense(tol)?;
        let e = eig_general_with(&t, true, tol)?;
        let rv = e.vectors.expect("vectors requested");
        let lv = inverse(&rv)?;
        let one = Complex::new(1.0, 0.0);
        let lead = e
            .values
            .iter()
            .map(|&z| (to_c64(z) - one).norm())
            .enumerate()
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .map(|(i, _)| i)
            .expect("nonempty");
        let overlap = |mm: usize| to_c64(dot(&l_vec, &rv.column(mm))) * to_c64(dot(lv.row(mm), &r_vec));
        let norm = overlap(lead);
        let mut sum = Complex::new(1.0, 0.0);
        for mm in 0..dim {
            if mm != lead {
                sum += to_c64(e.values[mm]).powu(r as u32) * overlap(mm) / norm;
            }
        }
        Some(sum.re.ln() / (k as f64 - 1.0))
    } else {
        None
    };
    Ok(TiPaths { literal, contraction })
}

/// `I_k` of a canonical uniform cell across a gap of `r` sites, averaged
/// over the gap's starting offset within the cell.
pub fn renyi_mutual_info_ti<T: Real>(cell: &UniformCanonical<T>, k: usize, r: usize) -> Result<f64> {
    check_order(k)?;
    let c = cell.state.len();
    let mut total = 0.0;
    for offset in 0..c {
        let s_left = &cell.schmidt[offset];
        let s_right = &cell.schmidt[(offset + r) % c];
        let moment = |s: &[T]| -> f64 { s.iter().map(|x| x.as_f64().powi(2 * k as i32)).sum() };
        let rho = ComplexMatrix::from_diag(
            &s_right
                .iter()
                .map(|x| Complex::new(*x * *x, T::zero()))
                .collect::<Vec<_>>(),
        );
        let mut v = replicated(&rho, k);
        let cyc = Permutation::cyclic(k);
        for j in (0..r).rev() {
            v = contract_site(cell.state.tensor((offset + j) % c), &cyc, &v);
        }
        let left = replicated(&ComplexMatrix::identity(s_left.len()), k);
        let num = to_c64(dot(&left, &v)).re;
        total += mutual_info_from_traces(k, num, moment(s_left), moment(s_right));
    }
    Ok(total / c as f64)
}
