//! Hamiltonian and drive families, multipolar sequences and the
//! second-order BCH effective Hamiltonian.

use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{measure_sum, BlockMatrix, BlockSpectrum, QuantumState, Space};
use crate::error::{domain, Result};
use crate::pauli::{ChainGeometry, PauliSum};
use crate::reconstruct::HamiltonianAnsatz;

/// Multipolar order of a random drive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Multipolarity {
    Order(u32),
    ThueMorse,
}

impl fmt::Display for Multipolarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Multipolarity::Order(m) => write!(f, "m={m}"),
            Multipolarity::ThueMorse => write!(f, "thue-morse"),
        }
    }
}

/// Declarative description of a Hamiltonian or drive family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProtocolSpec {
    /// `sum_i h_z Z_i + sum_{r<R} (J1 X_i X_{i+r} + J2 Y_i Y_{i+r})`
    StaticLocal { range: usize, j1: f64, j2: f64, h_z: f64 },
    /// `sum_i h_z Z_i + sum_{r<N/2} J/r^delta (X_i X_{i+r} + Y_i Y_{i+r})`
    StaticLongRange { j: f64, delta: f64, h_z: f64 },
    /// `U = e^{-i H1 T/2} e^{-i H2 T/2}`, `H1 = J ZZ + h_x X + h_z Z`, `H2 = gamma X`
    FloquetPrethermal { j: f64, h_x: f64, h_z: f64, gamma: f64, period: f64 },
    /// `U = e^{-i H1 T/4} e^{-i eps X} e^{-i H1 T/4}` with `T = 2(pi k + eps)`
    FloquetHeating { j: f64, h_x: f64, h_z: f64, epsilon: f64, k: u32 },
    /// `H± = J_x XX + J_z ZZ + (B_0 ± B_x) X + B_z Z`, blocks of duration `T`
    Rmd { multipolarity: Multipolarity, j_x: f64, j_z: f64, b0: f64, b_x: f64, b_z: f64, period: f64 },
}

impl ProtocolSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ProtocolSpec::StaticLocal { .. } => "static-local",
            ProtocolSpec::StaticLongRange { .. } => "static-long-range",
            ProtocolSpec::FloquetPrethermal { .. } => "floquet-prethermal",
            ProtocolSpec::FloquetHeating { .. } => "floquet-heating",
            ProtocolSpec::Rmd { .. } => "rmd",
        }
    }

    pub fn is_driven(&self) -> bool {
        !matches!(self, ProtocolSpec::StaticLocal { .. } | ProtocolSpec::StaticLongRange { .. })
    }

    /// Duration of one cycle (one elementary block for random drives).
    pub fn period(&self) -> Option<f64> {
        match *self {
            ProtocolSpec::FloquetPrethermal { period, .. } | ProtocolSpec::Rmd { period, .. } => Some(period),
            ProtocolSpec::FloquetHeating { epsilon, k, .. } => Some(heating_period(epsilon, k)),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let values: Vec<f64> = match *self {
            ProtocolSpec::StaticLocal { range, j1, j2, h_z } => {
                if range == 0 {
                    return domain("interaction range must be at least 1");
                }
                vec![j1, j2, h_z]
            }
            ProtocolSpec::StaticLongRange { j, delta, h_z } => vec![j, delta, h_z],
            ProtocolSpec::FloquetPrethermal { j, h_x, h_z, gamma, period } => vec![j, h_x, h_z, gamma, period],
            ProtocolSpec::FloquetHeating { j, h_x, h_z, epsilon, .. } => vec![j, h_x, h_z, epsilon],
            ProtocolSpec::Rmd { j_x, j_z, b0, b_x, b_z, period, .. } => vec![j_x, j_z, b0, b_x, b_z, period],
        };
        if values.iter().any(|v| !v.is_finite()) {
            return domain(format!("{} parameters must be finite", self.name()));
        }
        if let Some(t) = self.period() {
            if t <= 0.0 {
                return domain(format!("drive period {t} must be positive"));
            }
        }
        Ok(())
    }
}

pub fn heating_period(epsilon: f64, k: u32) -> f64 {
    2.0 * (PI * k as f64 + epsilon)
}

/// The generators of a protocol on a given chain.
#[derive(Clone, Debug)]
pub enum Generators {
    Static(PauliSum),
    Prethermal { h1: PauliSum, h2: PauliSum, period: f64 },
    Heating { h1: PauliSum, h2: PauliSum, period: f64 },
    Rmd { plus: PauliSum, minus: PauliSum, period: f64, multipolarity: Multipolarity },
}

fn chain(g: ChainGeometry, terms: &[(&str, f64)]) -> Result<PauliSum> {
    PauliSum::parse_terms(g, terms)
}

fn pair_pattern(letter: char, r: usize) -> String {
    format!("{letter}{}{letter}", "I".repeat(r - 1))
}

pub fn build_hamiltonian(spec: &ProtocolSpec, g: ChainGeometry) -> Result<Generators> {
    spec.validate()?;
    let n = g.n_sites();
    Ok(match *spec {
        ProtocolSpec::StaticLocal { range, j1, j2, h_z } => {
            if range > n {
                return domain(format!("range {range} exceeds chain length {n}"));
            }
            let mut terms = vec![("Z".to_string(), h_z)];
            for r in 1..range {
                terms.push((pair_pattern('X', r), j1));
                terms.push((pair_pattern('Y', r), j2));
            }
            let refs: Vec<(&str, f64)> = terms.iter().map(|(p, c)| (p.as_str(), *c)).collect();
            Generators::Static(chain(g, &refs)?)
        }
        ProtocolSpec::StaticLongRange { j, delta, h_z } => {
            let mut terms = vec![("Z".to_string(), h_z)];
            for r in 1..(n / 2) {
                let c = j / (r as f64).powf(delta);
                terms.push((pair_pattern('X', r), c));
                terms.push((pair_pattern('Y', r), c));
            }
            let refs: Vec<(&str, f64)> = terms.iter().map(|(p, c)| (p.as_str(), *c)).collect();
            Generators::Static(chain(g, &refs)?)
        }
        ProtocolSpec::FloquetPrethermal { j, h_x, h_z, gamma, period } => Generators::Prethermal {
            h1: chain(g, &[("ZZ", j), ("X", h_x), ("Z", h_z)])?,
            h2: chain(g, &[("X", gamma)])?,
            period,
        },
        ProtocolSpec::FloquetHeating { j, h_x, h_z, epsilon, k } => Generators::Heating {
            h1: chain(g, &[("ZZ", j), ("X", h_x), ("Z", h_z)])?,
            h2: chain(g, &[("X", epsilon)])?,
            period: heating_period(epsilon, k),
        },
        ProtocolSpec::Rmd { multipolarity, j_x, j_z, b0, b_x, b_z, period } => Generators::Rmd {
            plus: chain(g, &[("XX", j_x), ("ZZ", j_z), ("X", b0 + b_x), ("Z", b_z)])?,
            minus: chain(g, &[("XX", j_x), ("ZZ", j_z), ("X", b0 - b_x), ("Z", b_z)])?,
            period,
            multipolarity,
        },
    })
}

impl Generators {
    /// Hamiltonian whose Gibbs states seed the dynamics (the static
    /// Hamiltonian itself for static families).
    pub fn initial_hamiltonian(&self) -> Result<PauliSum> {
        match self {
            Generators::Static(h) | Generators::Prethermal { h1: h, .. } => Ok(h.clone()),
            Generators::Heating { h1, .. } => Ok(h1.scaled(0.5)),
            Generators::Rmd { plus, minus, .. } => Ok(plus.plus(minus)?.scaled(0.5)),
        }
    }
}

/// One drive cycle; for random drives the two elementary block unitaries.
#[derive(Clone, Debug)]
pub enum CycleUnitaries {
    Periodic(BlockMatrix),
    Blocks { plus: BlockMatrix, minus: BlockMatrix },
}

/// Unitary of one Floquet period, in the blocks of `space`.
pub fn floquet_cycle_unitary(spec: &ProtocolSpec, space: &Space) -> Result<BlockMatrix> {
    match cycle_unitaries(spec, space)? {
        CycleUnitaries::Periodic(u) => Ok(u),
        CycleUnitaries::Blocks { .. } => domain("random drives have no single cycle unitary"),
    }
}

pub fn cycle_unitaries(spec: &ProtocolSpec, space: &Space) -> Result<CycleUnitaries> {
    let gens = build_hamiltonian(spec, space.geometry())?;
    match &gens {
        Generators::Static(_) => domain("static protocols have no drive cycle"),
        Generators::Prethermal { h1, h2, period } => {
            let u1 = BlockSpectrum::of(space, h1)?.propagator(period / 2.0);
            let u2 = BlockSpectrum::of(space, h2)?.propagator(period / 2.0);
            Ok(CycleUnitaries::Periodic(u1.matmul(&u2)))
        }
        Generators::Heating { h1, h2, period } => {
            let outer = BlockSpectrum::of(space, h1)?.propagator(period / 4.0);
            let kick = BlockSpectrum::of(space, h2)?.propagator(1.0);
            Ok(CycleUnitaries::Periodic(outer.matmul(&kick).matmul(&outer)))
        }
        Generators::Rmd { plus, minus, period, .. } => Ok(CycleUnitaries::Blocks {
            plus: BlockSpectrum::of(space, plus)?.propagator(*period),
            minus: BlockSpectrum::of(space, minus)?.propagator(*period),
        }),
    }
}

/// Label of an elementary drive block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn flipped(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
        }
    }
}

/// Time-ordered block labels (first label acts first).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveSequence {
    pub labels: Vec<Sign>,
    pub block_period: f64,
}

impl fmt::Display for DriveSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.labels {
            write!(f, "{}", s.as_char())?;
        }
        Ok(())
    }
}

/// Order-`m` multipole `P_m^s` with `P_0^s = s` and `P_m^s = P_{m-1}^{-s} P_{m-1}^{s}`.
pub fn multipole(m: u32, sign: Sign) -> Vec<Sign> {
    if m == 0 {
        return vec![sign];
    }
    let mut out = multipole(m - 1, sign.flipped());
    out.extend(multipole(m - 1, sign));
    out
}

pub fn thue_morse(n: usize) -> Vec<Sign> {
    (0..n).map(|i| if i.count_ones() % 2 == 0 { Sign::Plus } else { Sign::Minus }).collect()
}

pub fn rmd_sequence(m: Multipolarity, n_blocks: usize, block_period: f64, seed: u64) -> Result<DriveSequence> {
    let labels = match m {
        Multipolarity::ThueMorse => thue_morse(n_blocks),
        Multipolarity::Order(order) => {
            if order > 20 {
                return domain(format!("multipolar order {order} is too large"));
            }
            let len = 1usize << order;
            if n_blocks % len != 0 {
                return domain(format!("{n_blocks} blocks are not a whole number of {len}-block multipoles"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut labels = Vec::with_capacity(n_blocks);
            for _ in 0..n_blocks / len {
                let s = if rng.random::<bool>() { Sign::Plus } else { Sign::Minus };
                labels.extend(multipole(order, s));
            }
            labels
        }
    };
    Ok(DriveSequence { labels, block_period })
}

/// Effective Hamiltonian of the prethermal square-pulse protocol, truncated at `T^order`.
pub fn bch_effective_hamiltonian(spec: &ProtocolSpec, order: u32) -> Result<HamiltonianAnsatz> {
    let ProtocolSpec::FloquetPrethermal { j, h_x, h_z, gamma: g, period: t } = *spec else {
        return domain("the BCH closed form exists only for the prethermal Floquet protocol");
    };
    if order > 2 {
        return domain(format!("BCH order {order} is not available (max 2)"));
    }
    let mut terms: Vec<(&str, f64)> = vec![("ZZ", j / 2.0), ("X", (h_x + g) / 2.0), ("Z", h_z / 2.0)];
    if order >= 1 {
        terms.extend([("YZ", g * t * j / 4.0), ("ZY", g * t * j / 4.0), ("Y", g * t * h_z / 4.0)]);
    }
    if order >= 2 {
        let t2 = t * t;
        terms.extend([
            ("X", -t2 / 24.0 * g * h_z * h_z - t2 / 12.0 * g * j * j),
            ("Z", -t2 / 24.0 * g * g * h_z + t2 / 24.0 * g * h_x * h_z),
            ("ZZ", -t2 / 12.0 * g * g * j + t2 / 12.0 * g * h_x * j),
            ("YY", t2 / 12.0 * g * g * j - t2 / 12.0 * g * h_x * j),
            ("XZ", -t2 / 12.0 * g * h_z * j),
            ("ZX", -t2 / 12.0 * g * h_z * j),
            ("ZXZ", -t2 / 12.0 * g * j * j),
        ]);
    }
    HamiltonianAnsatz::summed(terms)
}

/// Named parameter sets.
pub fn preset_spec(name: &str) -> Option<ProtocolSpec> {
    Some(match name {
        "local" => ProtocolSpec::StaticLocal { range: 2, j1: 1.0, j2: 0.7, h_z: 0.2 },
        "fig2" => ProtocolSpec::StaticLongRange { j: 1.0, delta: 3.0, h_z: 0.2 },
        "fig3" => ProtocolSpec::FloquetPrethermal { j: 1.0, h_x: 0.9045, h_z: 0.809, gamma: 0.4, period: 2.0 * PI / 10.0 },
        "fig4-floquet" => ProtocolSpec::FloquetHeating { j: 1.0, h_x: 0.9045, h_z: 0.809, epsilon: 0.08, k: 2 },
        "fig4-rmd" => ProtocolSpec::Rmd {
            multipolarity: Multipolarity::Order(1),
            j_x: 1.0,
            j_z: 0.75,
            b0: 1.0,
            b_x: 0.21,
            b_z: 0.375,
            period: 1.0 / 25.0,
        },
        _ => return None,
    })
}

pub const PRESET_NAMES: [&str; 5] = ["local", "fig2", "fig3", "fig4-floquet", "fig4-rmd"];

/// Weak translation-invariant rotation `e^{-i sum_j (t_x X_j + t_y Y_j + t_z Z_j)}`
/// with each angle uniform in `[-theta_max, theta_max]`.
pub fn random_rotation(space: &Space, theta_max: f64, seed: u64) -> Result<([f64; 3], BlockMatrix)> {
    if !(theta_max >= 0.0) {
        return domain(format!("rotation amplitude {theta_max} must be >= 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta: [f64; 3] = std::array::from_fn(|_| {
        if theta_max == 0.0 {
            0.0
        } else {
            rng.random_range(-theta_max..=theta_max)
        }
    });
    let gen = chain(space.geometry(), &[("X", theta[0]), ("Y", theta[1]), ("Z", theta[2])])?;
    let u = if gen.is_empty() { BlockMatrix::identity(space) } else { BlockSpectrum::of(space, &gen)?.propagator(1.0) };
    Ok((theta, u))
}

/// Stroboscopic driver that advances a state cycle by cycle.
pub struct Drive {
    cycle: CycleUnitaries,
    labels: Vec<Sign>,
    cache: Vec<(usize, BlockMatrix)>,
}

impl Drive {
    /// `n_cycles` bounds the random sequence length; `seed` drives it.
    pub fn new(spec: &ProtocolSpec, space: &Space, n_cycles: usize, seed: u64) -> Result<Self> {
        let cycle = cycle_unitaries(spec, space)?;
        let labels = match (spec, &cycle) {
            (ProtocolSpec::Rmd { multipolarity, period, .. }, CycleUnitaries::Blocks { .. }) => {
                let len = match multipolarity {
                    Multipolarity::Order(m) => 1usize << m,
                    Multipolarity::ThueMorse => 1,
                };
                let n = n_cycles.div_ceil(len).max(1) * len;
                rmd_sequence(*multipolarity, n, *period, seed)?.labels
            }
            _ => Vec::new(),
        };
        Ok(Self { cycle, labels, cache: Vec::new() })
    }

    pub fn labels(&self) -> &[Sign] {
        &self.labels
    }

    fn periodic_power(&mut self, steps: usize) -> &BlockMatrix {
        let CycleUnitaries::Periodic(u) = &self.cycle else { unreachable!() };
        if let Some(i) = self.cache.iter().position(|(k, _)| *k == steps) {
            return &self.cache[i].1;
        }
        let p = u.power(steps as u64);
        self.cache.push((steps, p));
        &self.cache.last().expect("just pushed").1
    }

    /// Advances `state` from cycle `from` to cycle `to`.
    pub fn advance(&mut self, state: &QuantumState, from: usize, to: usize) -> Result<QuantumState> {
        if to < from {
            return domain(format!("cannot evolve backwards from cycle {from} to {to}"));
        }
        if to == from {
            return Ok(state.clone());
        }
        match &self.cycle {
            CycleUnitaries::Periodic(_) => {
                let u = self.periodic_power(to - from).clone();
                crate::engine::evolve(state, &[&u])
            }
            CycleUnitaries::Blocks { plus, minus } => {
                if to > self.labels.len() {
                    return domain(format!("drive sequence has only {} blocks", self.labels.len()));
                }
                let steps: Vec<&BlockMatrix> = self.labels[from..to]
                    .iter()
                    .map(|s| match s {
                        Sign::Plus => plus,
                        Sign::Minus => minus,
                    })
                    .collect();
                crate::engine::evolve(state, &steps)
            }
        }
    }

    /// Calls `visit(cycle, state)` at each checkpoint (ascending).
    pub fn stroboscopic(
        &mut self,
        initial: &QuantumState,
        checkpoints: &[usize],
        mut visit: impl FnMut(usize, &QuantumState) -> Result<()>,
    ) -> Result<()> {
        if checkpoints.windows(2).any(|w| w[1] < w[0]) {
            return domain("checkpoints must be ascending");
        }
        let mut state = initial.clone();
        let mut at = 0;
        for &c in checkpoints {
            state = self.advance(&state, at, c)?;
            at = c;
            visit(c, &state)?;
        }
        Ok(())
    }
}

/// `<H0>/N` at each checkpoint, starting from the Gibbs state of the
/// initial Hamiltonian `H0` at `beta0`.
pub fn energy_trajectory(
    spec: &ProtocolSpec,
    geometry: ChainGeometry,
    beta0: f64,
    checkpoints: &[usize],
    seed: u64,
) -> Result<Vec<(usize, f64)>> {
    let space = Space::momentum(geometry);
    let h0 = build_hamiltonian(spec, geometry)?.initial_hamiltonian()?;
    let start = QuantumState::thermal(&BlockSpectrum::of(&space, &h0)?, beta0)?;
    let last = checkpoints.iter().copied().max().unwrap_or(0);
    let mut drive = Drive::new(spec, &space, last, seed)?;
    let n = geometry.n_sites() as f64;
    let mut out = Vec::with_capacity(checkpoints.len());
    drive.stroboscopic(&start, checkpoints, |c, s| {
        out.push((c, measure_sum(&space, s, &h0)? / n));
        Ok(())
    })?;
    Ok(out)
}

/// First checkpoint at which `|E|` has fallen to half of the first entry.
pub fn half_decay_cycle(trajectory: &[(usize, f64)]) -> Option<usize> {
    let (_, e0) = *trajectory.first()?;
    trajectory.iter().find(|(_, e)| e.abs() <= 0.5 * e0.abs()).map(|(c, _)| *c)
}
