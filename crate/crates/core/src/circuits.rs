//! Seeded circuit ensembles: random sequential MPS, brickwork Haar circuits
//! (with and without translation invariance) and monitored brickwork.
//!
//! Layer `t` acts on the bonds `(s, s+1)` with `s ≡ t (mod 2)`. Gates are
//! drawn from the gate stream in application order; monitored runs draw one
//! coin per site per layer from the coin stream and one outcome variate per
//! performed measurement from the outcome stream. With `p = 0` no coin ever
//! fires, the center is never moved for a measurement, and the run is
//! bit-identical to the unmonitored one.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{matmul, qr_unitary, svd, ComplexMatrix};
use crate::mps::uniform::{canonicalize_uniform, FixedPointOptions, UniformCanonical};
use crate::mps::{apply_gate_to_theta, MpsState, Tensor3};
use crate::oracle::StateVector;
use crate::rng::{ginibre, substream, uniform01, CircuitRng, StreamRole};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Rmps,
    BrickworkTi,
    Brickwork,
    Monitored,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Rmps => "rmps",
            Family::BrickworkTi => "brickwork_ti",
            Family::Brickwork => "brickwork",
            Family::Monitored => "monitored",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rmps" => Ok(Family::Rmps),
            "brickwork_ti" => Ok(Family::BrickworkTi),
            "brickwork" => Ok(Family::Brickwork),
            "monitored" => Ok(Family::Monitored),
            _ => Err(Error::InvalidInput(format!("unknown family {s:?}"))),
        }
    }
}

/// When the bond cap is enforced in brickwork circuits. Both modes give the
/// same state up to rounding: Schmidt values on one bond are unaffected by
/// gates acting entirely on one side of it.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncationMode {
    PerGate,
    #[default]
    PerLayer,
}

/// How translation-invariant brickwork circuits reuse gates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TiProtocol {
    /// One fresh Haar gate per layer, shared by every bond of that layer.
    #[default]
    SharedPerLayer,
    /// A single Haar gate reused everywhere.
    SingleGate,
    /// Two Haar gates, one for even layers and one for odd layers.
    TwoGateCell,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum UniformTag {
    #[serde(rename = "uniform")]
    Uniform,
}

/// Chain length: a site count or the infinite translation-invariant limit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Sites {
    Finite(usize),
    Uniform(UniformTag),
}

impl Sites {
    pub fn finite(self) -> Option<usize> {
        match self {
            Sites::Finite(n) => Some(n),
            Sites::Uniform(_) => None,
        }
    }
}

/// Everything needed to regenerate one realization bit-exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitSpec {
    pub family: Family,
    #[serde(rename = "N")]
    pub n: Sites,
    pub d: usize,
    pub chi: usize,
    #[serde(default)]
    pub p: f64,
    pub depth: usize,
    pub seed: u64,
    #[serde(default)]
    pub realization: u64,
    #[serde(default)]
    pub truncation_mode: TruncationMode,
    #[serde(default)]
    pub ti_protocol: TiProtocol,
}

impl CircuitSpec {
    pub fn new(family: Family, n: usize, d: usize, chi: usize, depth: usize, seed: u64) -> Self {
        Self {
            family,
            n: Sites::Finite(n),
            d,
            chi,
            p: 0.0,
            depth,
            seed,
            realization: 0,
            truncation_mode: TruncationMode::default(),
            ti_protocol: TiProtocol::default(),
        }
    }

    pub fn uniform(family: Family, d: usize, chi: usize, depth: usize, seed: u64) -> Self {
        Self {
            n: Sites::Uniform(UniformTag::Uniform),
            ..Self::new(family, 0, d, chi, depth, seed)
        }
    }

    pub fn with_p(mut self, p: f64) -> Self {
        self.p = p;
        self
    }

    pub fn with_realization(mut self, r: u64) -> Self {
        self.realization = r;
        self
    }

    pub fn with_truncation(mut self, mode: TruncationMode) -> Self {
        self.truncation_mode = mode;
        self
    }

    pub fn with_ti_protocol(mut self, protocol: TiProtocol) -> Self {
        self.ti_protocol = protocol;
        self
    }

    /// Streams for this spec's `(seed, realization)`.
    pub fn rng(&self) -> CircuitRng {
        CircuitRng::new(self.seed, self.realization)
    }

    fn check_structure(&self) -> Result<()> {
        if self.chi == 0 {
            return Err(Error::InvalidInput("chi must be at least 1".into()));
        }
        if self.d < 2 {
            return Err(Error::InvalidInput("local dimension must be at least 2".into()));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::InvalidInput(format!("p = {} outside [0, 1]", self.p)));
        }
        if self.p != 0.0 && self.family != Family::Monitored {
            return Err(Error::InvalidInput("p must be 0 unless the family is monitored".into()));
        }
        match self.n {
            Sites::Finite(0) => Err(Error::InvalidInput("N must be positive".into())),
            Sites::Uniform(_) if !matches!(self.family, Family::Rmps | Family::BrickworkTi) => Err(
                Error::InvalidInput("uniform chains need the rmps or brickwork_ti family".into()),
            ),
            _ => Ok(()),
        }
    }

    /// Full validation, including `depth ≥ 1`.
    pub fn validate(&self) -> Result<()> {
        self.check_structure()?;
        if self.depth == 0 && self.family != Family::Rmps {
            return Err(Error::InvalidInput("depth must be at least 1".into()));
        }
        Ok(())
    }
}

/// Haar-random unitary: Ginibre matrix followed by a phase-fixed QR.
pub fn haar_unitary<T: Real, R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix<T> {
    loop {
        // Rank deficiency has probability zero; redraw if it ever happens.
        if let Ok(u) = qr_unitary(&ginibre(dim, dim, rng)) {
            return u;
        }
    }
}

/// Seeded source of Haar unitaries of fixed dimension.
#[derive(Clone, Debug)]
pub struct HaarSampler {
    dim: usize,
    rng: ChaCha8Rng,
}

impl HaarSampler {
    pub fn new(dim: usize, seed: u64) -> Self {
        Self {
            dim,
            rng: substream(seed, 0, StreamRole::Gates),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sample<T: Real>(&mut self) -> ComplexMatrix<T> {
        haar_unitary(self.dim, &mut self.rng)
    }
}

/// Bond dimension `min(χ, d^i, d^{N−i})` of bond `i`.
pub fn rmps_bond(chi: usize, d: usize, n: usize, i: usize) -> usize {
    let cap = |e: usize| d.checked_pow(e as u32).unwrap_or(usize::MAX);
    chi.min(cap(i)).min(cap(n - i))
}

/// Site tensor `A^σ[a, b] = U[a, σ·χ_r + b]` cut from a `(d·χ_r)`-dimensional
/// Haar unitary, keeping the first `χ_l` rows. It satisfies
/// `Σ_σ A^σ A^σ† = I`.
pub fn rmps_tensor<T: Real, R: Rng + ?Sized>(chi_l: usize, chi_r: usize, d: usize, rng: &mut R) -> Tensor3<T> {
    let u = haar_unitary::<T, R>(d * chi_r, rng);
    Tensor3::from_fn(chi_l, d, chi_r, |a, s, b| u[(a, s * chi_r + b)])
}

/// Random sequential MPS. Finite states are right-canonical with center 0;
/// the uniform variant holds one tensor of bond dimension `χ`.
pub fn build_rmps<T: Real, R: Rng + ?Sized>(
    n: usize,
    chi: usize,
    d: usize,
    rng: &mut R,
    uniform: bool,
) -> Result<MpsState<T>> {
    if chi == 0 || d == 0 {
        return Err(Error::InvalidInput("chi and d must be positive".into()));
    }
    if uniform {
        return MpsState::from_tensors(vec![rmps_tensor(chi, chi, d, rng)], None, true);
    }
    if n == 0 {
        return Err(Error::InvalidInput("N must be positive".into()));
    }
    let tensors = (0..n)
        .map(|i| rmps_tensor(rmps_bond(chi, d, n, i), rmps_bond(chi, d, n, i + 1), d, rng))
        .collect();
    MpsState::from_tensors(tensors, Some(0), false)
}

/// One projective measurement in a monitored trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub layer: usize,
    pub site: usize,
    pub outcome: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub measurements: Vec<MeasurementRecord>,
}

/// Source of gates for one layer, following the family and TI protocol.
struct GateSchedule<T> {
    fixed: Vec<ComplexMatrix<T>>,
}

impl<T: Real> GateSchedule<T> {
    fn new(spec: &CircuitSpec, rng: &mut ChaCha8Rng) -> Self {
        let dd = spec.d * spec.d;
        let fixed = match (spec.family, spec.ti_protocol) {
            (Family::BrickworkTi, TiProtocol::SingleGate) => vec![haar_unitary(dd, rng)],
            (Family::BrickworkTi, TiProtocol::TwoGateCell) => {
                vec![haar_unitary(dd, rng), haar_unitary(dd, rng)]
            }
            _ => Vec::new(),
        };
        Self { fixed }
    }

    /// Gates for the `count` bonds of layer `layer`.
    fn layer(&self, spec: &CircuitSpec, layer: usize, count: usize, rng: &mut ChaCha8Rng) -> Vec<ComplexMatrix<T>> {
        let dd = spec.d * spec.d;
        match spec.family {
            Family::BrickworkTi => {
                let g = match self.fixed.len() {
                    0 => haar_unitary(dd, rng),
                    1 => self.fixed[0].clone(),
                    _ => self.fixed[layer % 2].clone(),
                };
                vec![g; count]
            }
            _ => (0..count).map(|_| haar_unitary(dd, rng)).collect(),
        }
    }
}

fn layer_sites(n: usize, layer: usize) -> Vec<usize> {
    (layer % 2..n.saturating_sub(1)).step_by(2).collect()
}

/// Applies one brickwork layer of `gates` starting at bond `parity`,
/// enforcing `chi` according to `mode`.
pub fn apply_layer<T: Real>(
    state: &mut MpsState<T>,
    gates: &[ComplexMatrix<T>],
    parity: usize,
    chi: usize,
    mode: TruncationMode,
) -> Result<()> {
    let cap = match mode {
        TruncationMode::PerGate => chi,
        TruncationMode::PerLayer => usize::MAX,
    };
    for (gate, site) in gates.iter().zip((parity..).step_by(2)) {
        state.move_center_to(site)?;
        state.apply_two_site_gate(gate, site, cap)?;
    }
    if mode == TruncationMode::PerLayer && !gates.is_empty() {
        state.truncate_sweep(chi)?;
    }
    Ok(())
}

/// Evolves `|0…0⟩` under the finite brickwork (optionally monitored)
/// circuit of `spec`, calling `on_layer` after every layer.
pub fn evolve_finite<T: Real>(
    spec: &CircuitSpec,
    rng: &mut CircuitRng,
    mut on_layer: impl FnMut(usize, &MpsState<T>) -> Result<()>,
) -> Result<(MpsState<T>, Trajectory)> {
    spec.check_structure()?;
    let n = spec
        .n
        .finite()
        .ok_or_else(|| Error::InvalidInput("finite evolution needs a finite N".into()))?;
    if spec.family == Family::Rmps {
        return Err(Error::InvalidInput("rmps states are built, not evolved".into()));
    }
    let mut state = MpsState::zero_state(n, spec.d);
    let mut traj = Trajectory::default();
    let schedule = GateSchedule::new(spec, &mut rng.gates);
    let monitored = spec.family == Family::Monitored;
    for layer in 0..spec.depth {
        let sites = layer_sites(n, layer);
        let gates = schedule.layer(spec, layer, sites.len(), &mut rng.gates);
        apply_layer(&mut state, &gates, layer % 2, spec.chi, spec.truncation_mode)?;
        if monitored {
            for site in 0..n {
                if uniform01(&mut rng.coins) < spec.p {
                    state.move_center_to(site)?;
                    let u = uniform01(&mut rng.outcomes);
                    let outcome = state.measure_site_with(site, u)?;
                    traj.measurements.push(MeasurementRecord { layer, site, outcome });
                }
            }
        }
        on_layer(layer, &state)?;
    }
    Ok((state, traj))
}

/// Brickwork Haar circuit (TI or not) truncated to `spec.chi`.
pub fn run_brickwork<T: Real>(spec: &CircuitSpec, rng: &mut CircuitRng) -> Result<MpsState<T>> {
    if !matches!(spec.family, Family::Brickwork | Family::BrickworkTi) {
        return Err(Error::InvalidInput(format!("run_brickwork called for {}", spec.family.name())));
    }
    Ok(evolve_finite(spec, rng, |_, _| Ok(()))?.0)
}

/// Monitored brickwork circuit; returns the trajectory endpoint and record.
pub fn run_monitored<T: Real>(spec: &CircuitSpec, rng: &mut CircuitRng) -> Result<(MpsState<T>, Trajectory)> {
    if spec.family != Family::Monitored {
        return Err(Error::InvalidInput(format!("run_monitored called for {}", spec.family.name())));
    }
    evolve_finite(spec, rng, |_, _| Ok(()))
}

/// Any finite family: RMPS are built, circuits are evolved.
pub fn generate_finite<T: Real>(spec: &CircuitSpec) -> Result<(MpsState<T>, Trajectory)> {
    spec.check_structure()?;
    let mut rng = spec.rng();
    match spec.family {
        Family::Rmps => {
            let n = spec.n.finite().ok_or_else(|| Error::InvalidInput("finite N required".into()))?;
            Ok((build_rmps(n, spec.chi, spec.d, &mut rng.gates, false)?, Trajectory::default()))
        }
        _ => evolve_finite(spec, &mut rng, |_, _| Ok(())),
    }
}

/// Statevector replay of the circuit of `spec` with the identical random
/// streams (the bond cap is ignored).
pub fn run_statevector<T: Real>(spec: &CircuitSpec, rng: &mut CircuitRng) -> Result<(StateVector<T>, Trajectory)> {
    spec.check_structure()?;
    let n = spec
        .n
        .finite()
        .ok_or_else(|| Error::InvalidInput("statevector replay needs a finite N".into()))?;
    let mut psi = StateVector::zero_state(n, spec.d)?;
    let mut traj = Trajectory::default();
    let schedule = GateSchedule::new(spec, &mut rng.gates);
    for layer in 0..spec.depth {
        let sites = layer_sites(n, layer);
        let gates = schedule.layer(spec, layer, sites.len(), &mut rng.gates);
        for (g, &s) in gates.iter().zip(&sites) {
            psi.apply_two_site(g, s)?;
        }
        if spec.family == Family::Monitored {
            for site in 0..n {
                if uniform01(&mut rng.coins) < spec.p {
                    let u = uniform01(&mut rng.outcomes);
                    let outcome = psi.measure_with(site, u);
                    traj.measurements.push(MeasurementRecord { layer, site, outcome });
                }
            }
        }
    }
    Ok((psi, traj))
}

/// Two-site unit cell of an infinite chain in right-canonical form with
/// Schmidt values on both bonds. Bond 0 sits left of site A, bond 1
/// between A and B.
#[derive(Clone, Debug)]
pub struct UniformCell<T> {
    pub b: [Tensor3<T>; 2],
    pub lambda: [Vec<T>; 2],
}

impl<T: Real> UniformCell<T> {
    pub fn zero_state(d: usize) -> Self {
        Self {
            b: [Tensor3::basis(d, 0), Tensor3::basis(d, 0)],
            lambda: [vec![T::one()], vec![T::one()]],
        }
    }

    /// Applies `gate` across bond `bond` of every cell and truncates it to
    /// `chi`.
    pub fn apply_bond_gate(&mut self, gate: &ComplexMatrix<T>, bond: usize, chi: usize) -> Result<()> {
        let (first, second) = if bond == 1 { (0, 1) } else { (1, 0) };
        let outer = &self.lambda[1 - bond];
        let d = self.b[0].d();
        let (l, r) = (self.b[first].left(), self.b[second].right());
        let psi = matmul(&self.b[first].to_left_matrix(), &self.b[second].to_right_matrix())?;
        let psi = apply_gate_to_theta(&psi, gate, l, d, r);
        let theta = ComplexMatrix::from_fn(l * d, d * r, |i, j| psi[(i, j)] * outer[i / d]);
        let f = svd(&theta)?;
        let k = chi.min(f.s.len());
        let norm = f.s[..k].iter().map(|&s| s * s).sum::<T>().sqrt();
        if !(norm > T::zero()) {
            return Err(Error::Singular("truncation removed the whole state".into()));
        }
        let y = ComplexMatrix::from_fn(d * r, k, |i, j| f.v[(i, j)]);
        let new_first = matmul(&psi, &y)?.scale(num_complex::Complex::new(T::one() / norm, T::zero()));
        let new_second = ComplexMatrix::from_fn(k, d * r, |i, j| f.v[(j, i)].conj());
        self.b[first] = Tensor3::from_left_matrix(new_first, d);
        self.b[second] = Tensor3::from_right_matrix(new_second, d);
        self.lambda[bond] = f.s[..k].iter().map(|&s| s / norm).collect();
        Ok(())
    }
}

fn pad_uniform<T: Real>(can: UniformCanonical<T>, chi: usize) -> Result<UniformCanonical<T>> {
    let tensors: Vec<Tensor3<T>> = can
        .state
        .tensors()
        .iter()
        .map(|t| t.padded(chi.max(t.left()), chi.max(t.right())))
        .collect();
    let schmidt = can
        .schmidt
        .into_iter()
        .map(|mut s| {
            s.resize(chi.max(s.len()), T::zero());
            s
        })
        .collect();
    Ok(UniformCanonical {
        state: MpsState::from_tensors(tensors, None, true)?,
        schmidt,
        eta: can.eta,
    })
}

/// Translation-invariant infinite-chain ensemble member. RMPS give a
/// one-site cell; TI brickwork evolves a two-site cell layer by layer.
/// The result is canonical (left-canonical, Schmidt gauge) and its bonds
/// are padded with zeros to `spec.chi`.
pub fn run_uniform_ti<T: Real>(spec: &CircuitSpec, rng: &mut CircuitRng) -> Result<UniformCanonical<T>> {
    spec.check_structure()?;
    let opts = FixedPointOptions::default();
    match spec.family {
        Family::Rmps => {
            let st = build_rmps::<T, _>(0, spec.chi, spec.d, &mut rng.gates, true)?;
            pad_uniform(canonicalize_uniform(st.tensors(), &opts)?, spec.chi)
        }
        Family::BrickworkTi => {
            let mut cell = UniformCell::zero_state(spec.d);
            let schedule = GateSchedule::new(spec, &mut rng.gates);
            for layer in 0..spec.depth {
                let gate = schedule.layer(spec, layer, 1, &mut rng.gates).remove(0);
                cell.apply_bond_gate(&gate, 1 - layer % 2, spec.chi)?;
            }
            pad_uniform(canonicalize_uniform(&cell.b, &opts)?, spec.chi)
        }
        f => Err(Error::InvalidInput(format!("uniform evolution unsupported for {}", f.name()))),
    }
}
