//! Matrix product states.
//!
//! Site `i` carries a [`Tensor3`] of shape `(χ_i, d, χ_{i+1})`. Cut `c`
//! (for `1 ≤ c < N`) separates sites `[0, c)` from `[c, N)` and sits on the
//! bond of dimension `χ_c`. Amplitudes are ordered with site 0 as the most
//! significant digit.
//!
//! After a two-site gate on `(i, i+1)` the orthogonality center sits on
//! `i + 1`. Truncation keeps the `χ_max` largest Schmidt values in SVD order
//! and retains exact zeros as explicit zero directions, so bond dimensions
//! are `min(χ_max, l·d, d·r)` regardless of rank.

mod io;
mod tensor;
pub mod uniform;

pub use io::{read_mps, read_sidecar, sidecar_path, write_mps, write_mps_with_sidecar, MPS_MAGIC, MPS_VERSION};
pub use tensor::Tensor3;

use num_complex::Complex;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{matmul, qr_thin, svd, ComplexMatrix};
use crate::rng::uniform01;
use crate::scalar::{czero, Real};

/// Relative threshold below which a Schmidt value counts as a null direction.
pub const DEFAULT_NULL_TOL: f64 = 1e-10;

/// Largest Hilbert space dimension expanded by [`MpsState::to_statevector`].
pub const STATEVECTOR_CAP: usize = 1 << 24;

/// Finite or uniform matrix product state.
///
/// Uniform states hold a translation-invariant unit cell (one or two sites)
/// with periodic bond matching and no boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct MpsState<T> {
    d: usize,
    tensors: Vec<Tensor3<T>>,
    center: Option<usize>,
    uniform: bool,
}

/// Schmidt values across a cut.
#[derive(Clone, Debug, PartialEq)]
pub struct SchmidtCut<T> {
    pub bond: usize,
    /// Non-negative and descending; `Σ s² = 1` for normalized states.
    pub values: Vec<T>,
}

/// Rényi entropy of order `k` (nats) from Schmidt values; `k = 1` is the
/// von Neumann limit with `0 log 0 = 0`.
pub fn renyi_from_schmidt<T: Real>(values: &[T], k: u32) -> Result<T> {
    if k == 0 {
        return Err(Error::InvalidInput("Rényi order must be at least 1".into()));
    }
    let probs = values.iter().map(|&s| s * s);
    if k == 1 {
        Ok(-probs
            .filter(|&p| p > T::zero())
            .map(|p| p * p.ln())
            .sum::<T>())
    } else {
        let tr: T = probs.map(|p| p.powi(k as i32)).sum();
        Ok(tr.ln() / (T::one() - T::lit(k as f64)))
    }
}

impl<T: Real> MpsState<T> {
    /// Assembles a state from site tensors, checking bond compatibility.
    pub fn from_tensors(tensors: Vec<Tensor3<T>>, center: Option<usize>, uniform: bool) -> Result<Self> {
        let Some(first) = tensors.first() else {
            return Err(Error::InvalidInput("an MPS needs at least one site".into()));
        };
        let d = first.d();
        let n = tensors.len();
        for (i, t) in tensors.iter().enumerate() {
            if t.d() != d {
                return Err(Error::DimensionMismatch(format!("site {i} has d = {}, expected {d}", t.d())));
            }
            let next = if i + 1 < n {
                Some(&tensors[i + 1])
            } else if uniform {
                Some(&tensors[0])
            } else {
                None
            };
            if let Some(nx) = next {
                if t.right() != nx.left() {
                    return Err(Error::DimensionMismatch(format!(
                        "bond after site {i}: {} vs {}",
                        t.right(),
                        nx.left()
                    )));
                }
            }
        }
        if !uniform && (first.left() != 1 || tensors[n - 1].right() != 1) {
            return Err(Error::DimensionMismatch("finite MPS boundary bonds must be 1".into()));
        }
        if let Some(c) = center {
            if c >= n {
                return Err(Error::InvalidInput(format!("center {c} outside {n} sites")));
            }
        }
        Ok(Self {
            d,
            tensors,
            center,
            uniform,
        })
    }

    /// Product state from normalized local vectors (one per site).
    pub fn product_state(local_vectors: &[Vec<Complex<T>>]) -> Result<Self> {
        let tol = T::lit(1e-10);
        let mut tensors = Vec::with_capacity(local_vectors.len());
        for (i, v) in local_vectors.iter().enumerate() {
            let norm: T = v.iter().map(|z| z.norm_sqr()).sum();
            if (norm - T::one()).abs() > tol {
                return Err(Error::InvalidInput(format!(
                    "local vector at site {i} has norm² {norm}"
                )));
            }
            tensors.push(Tensor3::product(v));
        }
        Self::from_tensors(tensors, Some(0), false)
    }

    /// `|0…0⟩` on `n` sites of dimension `d`.
    pub fn zero_state(n: usize, d: usize) -> Self {
        Self {
            d,
            tensors: (0..n).map(|_| Tensor3::basis(d, 0)).collect(),
            center: Some(0),
            uniform: false,
        }
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn center(&self) -> Option<usize> {
        self.center
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    pub fn tensors(&self) -> &[Tensor3<T>] {
        &self.tensors
    }

    pub fn tensor(&self, i: usize) -> &Tensor3<T> {
        &self.tensors[i]
    }

    /// Bond dimensions `χ_0, …, χ_N` (finite states) or the cell bonds.
    pub fn bond_dims(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self.tensors.iter().map(|t| t.left()).collect();
        if !self.uniform {
            out.push(self.tensors.last().map_or(1, |t| t.right()));
        }
        out
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    fn require_finite(&self, op: &str) -> Result<()> {
        if self.uniform {
            Err(Error::InvalidInput(format!("{op} needs a finite MPS")))
        } else {
            Ok(())
        }
    }

    /// `⟨self|other⟩`.
    pub fn overlap(&self, other: &Self) -> Result<Complex<T>> {
        self.require_finite("overlap")?;
        other.require_finite("overlap")?;
        if self.len() != other.len() || self.d != other.d {
            return Err(Error::DimensionMismatch("overlap of differently sized states".into()));
        }
        let mut env = ComplexMatrix::<T>::identity(1);
        for (a, b) in self.tensors.iter().zip(&other.tensors) {
            let mut next = ComplexMatrix::zeros(a.right(), b.right());
            for s in 0..self.d {
                let left = matmul(&a.slice(s).adjoint(), &env)?;
                let term = matmul(&left, &b.slice(s))?;
                next = next.add(&term)?;
            }
            env = next;
        }
        Ok(env[(0, 0)])
    }

    pub fn norm_sqr(&self) -> Result<T> {
        Ok(self.overlap(self)?.re)
    }

    /// `|⟨a|b⟩|² / (⟨a|a⟩⟨b|b⟩)`.
    pub fn fidelity(&self, other: &Self) -> Result<T> {
        let ov = self.overlap(other)?.norm_sqr();
        Ok(ov / (self.norm_sqr()? * other.norm_sqr()?))
    }

    /// Dense amplitudes, site 0 most significant.
    pub fn to_statevector(&self) -> Result<Vec<Complex<T>>> {
        self.require_finite("to_statevector")?;
        let dim = self
            .d
            .checked_pow(self.len() as u32)
            .filter(|&x| x <= STATEVECTOR_CAP)
            .ok_or(Error::AboveCap {
                dim: usize::MAX,
                cap: STATEVECTOR_CAP,
            })?;
        // Rows: physical prefix; columns: current bond.
        let mut acc = ComplexMatrix::<T>::identity(1);
        for t in &self.tensors {
            let m = t.to_right_matrix();
            let prod = matmul(&acc, &m)?;
            acc = ComplexMatrix::from_vec_unchecked(prod.rows() * self.d, t.right(), prod.into_vec());
        }
        debug_assert_eq!(acc.rows(), dim);
        Ok(acc.into_vec())
    }

    /// Moves the orthogonality center from `i` to `i + 1` by a QR step.
    pub fn shift_center_right(&mut self) -> Result<()> {
        let i = self.center.ok_or_else(|| Error::InvalidInput("state has no center".into()))?;
        if i + 1 >= self.len() {
            return Err(Error::InvalidInput("center already at the last site".into()));
        }
        self.qr_right(i);
        self.center = Some(i + 1);
        Ok(())
    }

    /// Moves the orthogonality center from `i` to `i − 1` by an LQ step.
    pub fn shift_center_left(&mut self) -> Result<()> {
        let i = self.center.ok_or_else(|| Error::InvalidInput("state has no center".into()))?;
        if i == 0 {
            return Err(Error::InvalidInput("center already at site 0".into()));
        }
        self.lq_left(i);
        self.center = Some(i - 1);
        Ok(())
    }

    fn qr_right(&mut self, i: usize) {
        let d = self.d;
        let (q, r) = qr_thin(&self.tensors[i].to_left_matrix());
        self.tensors[i] = Tensor3::from_left_matrix(q, d);
        self.tensors[i + 1] = self.tensors[i + 1].contract_left(&r);
    }

    fn lq_left(&mut self, i: usize) {
        let d = self.d;
        let (q, r) = qr_thin(&self.tensors[i].to_right_matrix().adjoint());
        self.tensors[i] = Tensor3::from_right_matrix(q.adjoint(), d);
        self.tensors[i - 1] = self.tensors[i - 1].contract_right(&r.adjoint());
    }

    /// Brings the center to `target`, canonicalizing fully if there is none.
    pub fn move_center_to(&mut self, target: usize) -> Result<()> {
        self.require_finite("move_center_to")?;
        if target >= self.len() {
            return Err(Error::InvalidInput(format!("site {target} outside {} sites", self.len())));
        }
        match self.center {
            None => self.canonicalize_mut(target),
            Some(c) if c < target => {
                for i in c..target {
                    self.qr_right(i);
                }
                self.center = Some(target);
                Ok(())
            }
            Some(c) => {
                for i in (target + 1..=c).rev() {
                    self.lq_left(i);
                }
                self.center = Some(target);
                Ok(())
            }
        }
    }

    /// Full mixed-canonical sweep with the center at `center`.
    pub fn canonicalize_mut(&mut self, center: usize) -> Result<()> {
        self.require_finite("canonicalize")?;
        if center >= self.len() {
            return Err(Error::InvalidInput(format!("site {center} outside {} sites", self.len())));
        }
        for i in 0..center {
            self.qr_right(i);
        }
        for i in (center + 1..self.len()).rev() {
            self.lq_left(i);
        }
        self.center = Some(center);
        Ok(())
    }

    pub fn canonicalize(&self, center: usize) -> Result<Self> {
        let mut out = self.clone();
        out.canonicalize_mut(center)?;
        Ok(out)
    }

    /// Rescales the center tensor to unit norm.
    pub fn normalize(&mut self) -> Result<()> {
        let c = self.center.ok_or_else(|| Error::InvalidInput("state has no center".into()))?;
        let n = self.tensors[c].norm_sqr().sqrt();
        if !(n > T::zero()) || !n.is_finite() {
            return Err(Error::NonFinite("normalization"));
        }
        self.tensors[c].scale(Complex::new(T::one() / n, T::zero()));
        Ok(())
    }

    fn check_gate(&self, gate: &ComplexMatrix<T>) -> Result<()> {
        let dd = self.d * self.d;
        if gate.shape() != (dd, dd) {
            return Err(Error::DimensionMismatch(format!(
                "two-site gate must be {dd}x{dd}, got {:?}",
                gate.shape()
            )));
        }
        let defect = gate.isometry_defect();
        if defect.as_f64() > 1e-10 {
            return Err(Error::NonUnitary(defect.as_f64()));
        }
        Ok(())
    }

    /// Applies `gate` (row index `s1·d + s2`) on sites `(site, site+1)` and
    /// truncates the shared bond to `chi_max`. Returns the kept,
    /// renormalized Schmidt values. The center ends on `site + 1`.
    pub fn apply_two_site_gate(
        &mut self,
        gate: &ComplexMatrix<T>,
        site: usize,
        chi_max: usize,
    ) -> Result<Vec<T>> {
        self.require_finite("apply_two_site_gate")?;
        if site + 1 >= self.len() {
            return Err(Error::InvalidInput(format!(
                "gate on sites ({site}, {}) of a {}-site chain",
                site + 1,
                self.len()
            )));
        }
        if self.center != Some(site) && self.center != Some(site + 1) {
            return Err(Error::InvalidInput(format!(
                "center {:?} not on gate sites ({site}, {})",
                self.center,
                site + 1
            )));
        }
        if chi_max == 0 {
            return Err(Error::InvalidInput("chi_max must be positive".into()));
        }
        self.check_gate(gate)?;
        let d = self.d;
        let (l, r) = (self.tensors[site].left(), self.tensors[site + 1].right());
        let theta = matmul(
            &self.tensors[site].to_left_matrix(),
            &self.tensors[site + 1].to_right_matrix(),
        )?;
        let theta = apply_gate_to_theta(&theta, gate, l, d, r);
        let f = svd(&theta)?;
        let k = chi_max.min(f.s.len());
        let norm = f.s[..k].iter().map(|&s| s * s).sum::<T>().sqrt();
        if !(norm > T::zero()) {
            return Err(Error::Singular("truncation removed the whole state".into()));
        }
        let kept: Vec<T> = f.s[..k].iter().map(|&s| s / norm).collect();
        let a1 = ComplexMatrix::from_fn(l * d, k, |i, j| f.u[(i, j)]);
        let a2 = ComplexMatrix::from_fn(k, d * r, |i, j| f.v[(j, i)].conj() * kept[i]);
        self.tensors[site] = Tensor3::from_left_matrix(a1, d);
        self.tensors[site + 1] = Tensor3::from_right_matrix(a2, d);
        self.center = Some(site + 1);
        Ok(kept)
    }

    /// Left-to-right SVD sweep truncating every bond to `chi_max` (keeps
    /// explicit zeros). Ends with the center on the last site.
    pub fn truncate_sweep(&mut self, chi_max: usize) -> Result<()> {
        self.require_finite("truncate_sweep")?;
        let d = self.d;
        self.move_center_to(0)?;
        for i in 0..self.len() - 1 {
            let m = self.tensors[i].to_left_matrix();
            let f = svd(&m)?;
            let k = chi_max.min(f.s.len());
            let norm = f.s[..k].iter().map(|&s| s * s).sum::<T>().sqrt();
            if !(norm > T::zero()) {
                return Err(Error::Singular("truncation removed the whole state".into()));
            }
            let a = ComplexMatrix::from_fn(m.rows(), k, |r, c| f.u[(r, c)]);
            let sv = ComplexMatrix::from_fn(k, m.cols(), |r, c| f.v[(c, r)].conj() * (f.s[r] / norm));
            self.tensors[i] = Tensor3::from_left_matrix(a, d);
            self.tensors[i + 1] = self.tensors[i + 1].contract_left(&sv);
            self.center = Some(i + 1);
        }
        Ok(())
    }

    /// Born probabilities of the computational-basis outcomes at `site`.
    /// Requires the center on `site`.
    pub fn site_probabilities(&self, site: usize) -> Result<Vec<T>> {
        if self.center != Some(site) {
            return Err(Error::InvalidInput(format!(
                "measurement at {site} needs the center there (center {:?})",
                self.center
            )));
        }
        let t = &self.tensors[site];
        let mut p = vec![T::zero(); self.d];
        for a in 0..t.left() {
            for (s, ps) in p.iter_mut().enumerate() {
                for b in 0..t.right() {
                    *ps += t.get(a, s, b).norm_sqr();
                }
            }
        }
        let total: T = p.iter().copied().sum();
        if (total - T::one()).abs().as_f64() > 1e-8 {
            return Err(Error::ProbabilityMismatch(total.as_f64()));
        }
        Ok(p)
    }

    /// Projective computational-basis measurement driven by a uniform
    /// variate `u ∈ [0, 1)`: the outcome is the first `σ` whose cumulative
    /// probability exceeds `u`.
    pub fn measure_site_with(&mut self, site: usize, u: f64) -> Result<usize> {
        let p = self.site_probabilities(site)?;
        let outcome = born_outcome(&p, u);
        let scale = Complex::new(T::one() / p[outcome].sqrt(), T::zero());
        let t = &mut self.tensors[site];
        for a in 0..t.left() {
            for s in 0..self.d {
                for b in 0..t.right() {
                    let z = t.get_mut(a, s, b);
                    *z = if s == outcome { *z * scale } else { czero() };
                }
            }
        }
        Ok(outcome)
    }

    pub fn measure_site<R: Rng + ?Sized>(&mut self, site: usize, rng: &mut R) -> Result<usize> {
        self.measure_site_with(site, uniform01(rng))
    }

    fn check_cut(&self, cut: usize) -> Result<()> {
        self.require_finite("Schmidt values")?;
        if cut == 0 || cut >= self.len() {
            return Err(Error::InvalidInput(format!("cut {cut} outside 1..{}", self.len())));
        }
        Ok(())
    }

    /// Schmidt values at `cut`; the center must be adjacent (`cut − 1` or `cut`).
    pub fn schmidt_values(&self, cut: usize) -> Result<SchmidtCut<T>> {
        self.check_cut(cut)?;
        let values = match self.center {
            Some(c) if c + 1 == cut => svd(&self.tensors[c].to_left_matrix())?.s,
            Some(c) if c == cut => svd(&self.tensors[c].to_right_matrix())?.s,
            _ => {
                return Err(Error::InvalidInput(format!(
                    "center {:?} not adjacent to cut {cut}",
                    self.center
                )))
            }
        };
        Ok(SchmidtCut { bond: cut, values })
    }

    /// Moves the center next to `cut` and returns its Schmidt values.
    pub fn schmidt_values_at(&mut self, cut: usize) -> Result<SchmidtCut<T>> {
        self.check_cut(cut)?;
        match self.center {
            Some(c) if c + 1 == cut || c == cut => {}
            Some(c) if c < cut => self.move_center_to(cut - 1)?,
            _ => self.move_center_to(cut)?,
        }
        self.schmidt_values(cut)
    }

    /// Rényi-`k` entanglement entropy at `cut` (center must be adjacent).
    pub fn renyi_entropy(&self, cut: usize, k: u32) -> Result<T> {
        renyi_from_schmidt(&self.schmidt_values(cut)?.values, k)
    }

    /// Entropy at every cut, leaving `self` untouched.
    pub fn entropy_profile(&self, k: u32) -> Result<Vec<T>> {
        let mut s = self.clone();
        s.canonicalize_mut(0)?;
        (1..self.len())
            .map(|cut| renyi_from_schmidt(&s.schmidt_values_at(cut)?.values, k))
            .collect()
    }

    /// Left-canonical tensor of `site` with both bonds rotated into their
    /// Schmidt bases. Directions whose Schmidt value is at most
    /// `null_tol · s_max` are set exactly to zero.
    pub fn schmidt_gauge_tensor(&self, site: usize, null_tol: f64) -> Result<Tensor3<T>> {
        self.require_finite("schmidt_gauge_tensor")?;
        let mut s = self.clone();
        s.move_center_to(site)?;
        let c = s.tensors[site].clone();
        let (l, d, r) = c.shape();
        let tol = T::lit(null_tol);

        let left = svd(&c.to_right_matrix())?;
        let kl = left.s.len();
        let smax = left.s[0];
        let rot = ComplexMatrix::from_fn(l, l, |i, j| if i < kl { left.u[(j, i)].conj() } else { czero() });
        let mut cp = c.contract_left(&rot);
        let left_null: Vec<bool> = (0..l).map(|a| a >= kl || left.s[a] <= tol * smax).collect();
        zero_rows(&mut cp, &left_null);

        let right = svd(&cp.to_left_matrix())?;
        let kr = right.s.len();
        let smax_r = right.s[0];
        let mut a = Tensor3::zeros(l, d, r);
        for row in 0..l * d {
            for col in 0..kr.min(r) {
                if right.s[col] > tol * smax_r {
                    a.as_mut_slice()[row * r + col] = right.u[(row, col)];
                }
            }
        }
        zero_rows(&mut a, &left_null);
        Ok(a)
    }
}

fn zero_rows<T: Real>(t: &mut Tensor3<T>, null: &[bool]) {
    let width = t.d() * t.right();
    for (a, &n) in null.iter().enumerate() {
        if n {
            t.as_mut_slice()[a * width..(a + 1) * width].fill(czero());
        }
    }
}

/// Applies a `d² × d²` gate to `θ[(a, s1), (s2, b)]`.
pub(crate) fn apply_gate_to_theta<T: Real>(
    theta: &ComplexMatrix<T>,
    gate: &ComplexMatrix<T>,
    l: usize,
    d: usize,
    r: usize,
) -> ComplexMatrix<T> {
    let mut out = ComplexMatrix::zeros(l * d, d * r);
    let mut local = vec![czero::<T>(); d * d];
    for a in 0..l {
        for b in 0..r {
            for t1 in 0..d {
                for t2 in 0..d {
                    local[t1 * d + t2] = theta[(a * d + t1, t2 * r + b)];
                }
            }
            for s1 in 0..d {
                for s2 in 0..d {
                    let row = gate.row(s1 * d + s2);
                    let v: Complex<T> = row.iter().zip(&local).map(|(&g, &x)| g * x).sum();
                    out[(a * d + s1, s2 * r + b)] = v;
                }
            }
        }
    }
    out
}

/// First index whose cumulative probability exceeds `u`; the last index
/// with non-zero weight absorbs rounding.
pub(crate) fn born_outcome<T: Real>(p: &[T], u: f64) -> usize {
    let mut acc = 0.0;
    for (s, &ps) in p.iter().enumerate() {
        acc += ps.as_f64();
        if u < acc {
            return s;
        }
    }
    p.iter().rposition(|&x| x > T::zero()).unwrap_or(0)
}

#[cfg(test)]
mod tests;
