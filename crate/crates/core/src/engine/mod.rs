//! Dense spectral kernels: eigendecomposition, propagators, thermal states,
//! time evolution and measurement.

mod space;
mod typicality;

pub use space::{BlockMatrix, MomentumBasis, Space};
pub use typicality::{bootstrap_standard_errors, typicality_thermal_samples, TypicalEnsemble, DEFAULT_SAMPLES};

use faer::{Mat, Side};
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{domain, Error, Result};
use crate::pauli::{ChainGeometry, OperatorClass, PauliSum};

/// Largest tolerated `max |A - A^dagger|` for input to [`eigendecompose`].
pub const HERMITIAN_TOLERANCE: f64 = 1e-8;

pub fn max_hermitian_asymmetry(a: &Mat<C64>) -> f64 {
    let mut m: f64 = 0.0;
    for j in 0..a.ncols() {
        for i in j..a.nrows() {
            m = m.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    m
}

/// `H = V diag(lambda) V^dagger` with ascending eigenvalues.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Mat<C64>,
}

pub fn eigendecompose(h: &Mat<C64>) -> Result<SpectralDecomposition> {
    if h.nrows() != h.ncols() {
        return Err(Error::DimensionMismatch { expected: h.nrows(), found: h.ncols() });
    }
    let asymmetry = max_hermitian_asymmetry(h);
    if asymmetry > HERMITIAN_TOLERANCE {
        return Err(Error::NonHermitian { asymmetry });
    }
    if h.nrows() == 0 {
        return Ok(SpectralDecomposition { eigenvalues: Vec::new(), eigenvectors: Mat::zeros(0, 0) });
    }
    let evd = h
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("eigendecomposition failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let eigenvalues = (0..h.nrows()).map(|i| s[i].re).collect();
    Ok(SpectralDecomposition { eigenvalues, eigenvectors: evd.U().to_owned() })
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `V f(lambda) V^dagger`.
    pub fn apply_function(&self, f: impl Fn(f64) -> C64) -> Mat<C64> {
        let v = &self.eigenvectors;
        let weights: Vec<C64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        let scaled = Mat::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] * weights[j]);
        scaled * v.adjoint()
    }

    pub fn reconstruct(&self) -> Mat<C64> {
        self.apply_function(|l| C64::new(l, 0.0))
    }

    /// `e^{-i H t}`.
    pub fn propagator(&self, t: f64) -> Mat<C64> {
        self.apply_function(|l| C64::from_polar(1.0, -l * t))
    }

    /// `V^dagger A V`.
    pub fn to_eigenbasis(&self, a: &Mat<C64>) -> Mat<C64> {
        self.eigenvectors.adjoint() * a * &self.eigenvectors
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }
}

/// `Tr[O e^{-beta H}] / Z` evaluated in the eigenbasis of `H`.
pub fn thermal_expectation_exact(decomp: &SpectralDecomposition, beta: f64, observable: &Mat<C64>) -> Result<f64> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return domain(format!("inverse temperature {beta} must be finite and >= 0"));
    }
    if observable.nrows() != decomp.dim() {
        return Err(Error::DimensionMismatch { expected: decomp.dim(), found: observable.nrows() });
    }
    let e0 = decomp.min_eigenvalue();
    let weights: Vec<f64> = decomp.eigenvalues.iter().map(|&l| (-beta * (l - e0)).exp()).collect();
    let z: f64 = weights.iter().sum();
    let ov = observable * &decomp.eigenvectors;
    let v = &decomp.eigenvectors;
    let mut acc = 0.0;
    for (k, w) in weights.iter().enumerate() {
        let mut diag = C64::new(0.0, 0.0);
        for i in 0..v.nrows() {
            diag += v[(i, k)].conj() * ov[(i, k)];
        }
        acc += w * diag.re;
    }
    Ok(acc / z)
}

/// Spectral decomposition of every block of a [`BlockMatrix`].
#[derive(Clone, Debug)]
pub struct BlockSpectrum {
    pub blocks: Vec<SpectralDecomposition>,
}

impl BlockSpectrum {
    pub fn new(h: &BlockMatrix) -> Result<Self> {
        Ok(Self { blocks: h.blocks.iter().map(eigendecompose).collect::<Result<_>>()? })
    }

    pub fn of(space: &Space, h: &PauliSum) -> Result<Self> {
        Self::new(&space.project(h)?)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.blocks.iter().filter(|b| b.dim() > 0).map(|b| b.min_eigenvalue()).fold(f64::INFINITY, f64::min)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.blocks
            .iter()
            .filter_map(|b| b.eigenvalues.last().copied())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn propagator(&self, t: f64) -> BlockMatrix {
        BlockMatrix { blocks: self.blocks.iter().map(|b| b.propagator(t)).collect() }
    }

    /// Boltzmann weights `e^{-beta (lambda - lambda_min)} / Z` per block.
    pub fn boltzmann_weights(&self, beta: f64) -> (Vec<Vec<f64>>, f64) {
        let e0 = self.min_eigenvalue();
        let raw: Vec<Vec<f64>> = self
            .blocks
            .iter()
            .map(|b| b.eigenvalues.iter().map(|&l| (-beta * (l - e0)).exp()).collect())
            .collect();
        let z: f64 = raw.iter().flatten().sum();
        let w = raw.into_iter().map(|b| b.into_iter().map(|x| x / z).collect()).collect();
        (w, z)
    }

    /// `e^{-beta H} / Z`.
    pub fn thermal_density(&self, beta: f64) -> Result<BlockMatrix> {
        if !(beta >= 0.0) || !beta.is_finite() {
            return domain(format!("inverse temperature {beta} must be finite and >= 0"));
        }
        let (weights, _) = self.boltzmann_weights(beta);
        let blocks = self
            .blocks
            .iter()
            .zip(&weights)
            .map(|(b, w)| {
                let v = &b.eigenvectors;
                let half = Mat::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] * w[j].sqrt());
                &half * half.adjoint()
            })
            .collect();
        Ok(BlockMatrix { blocks })
    }

    /// `e^{-beta H / 2}` without normalization, shifted by the ground energy.
    pub fn half_boltzmann(&self, beta: f64) -> BlockMatrix {
        let e0 = self.min_eigenvalue();
        BlockMatrix {
            blocks: self
                .blocks
                .iter()
                .map(|b| b.apply_function(|l| C64::new((-0.5 * beta * (l - e0)).exp(), 0.0)))
                .collect(),
        }
    }
}

/// Normalized pure state in the full Hilbert space.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<C64>,
}

impl StateVector {
    /// Normalizes `amplitudes`; rejects the zero vector.
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Numerical("cannot normalize a zero or non-finite vector".into()));
        }
        Ok(Self { amplitudes: amplitudes.into_iter().map(|a| a / norm).collect() })
    }

    /// Computational basis state `|index>`.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return domain(format!("basis index {index} outside dimension {dim}"));
        }
        let mut v = vec![C64::new(0.0, 0.0); dim];
        v[index] = C64::new(1.0, 0.0);
        Ok(Self { amplitudes: v })
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amplitudes)
    }

    pub fn overlap(&self, other: &StateVector) -> C64 {
        self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum()
    }
}

pub(crate) fn norm(v: &[C64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

pub(crate) fn mat_vec(m: &Mat<C64>, v: &[C64]) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); m.nrows()];
    for (j, &x) in v.iter().enumerate() {
        if x.norm_sqr() == 0.0 {
            continue;
        }
        let col = m.col_as_slice(j);
        for (o, &a) in out.iter_mut().zip(col) {
            *o += a * x;
        }
    }
    out
}

/// `|up..up down..down>`: the first `N/2` sites up, the rest down.
pub fn domain_wall(geometry: ChainGeometry) -> Result<StateVector> {
    let n = geometry.n_sites();
    // site 0 is the most significant bit and a set bit is spin down
    let index = (1usize << (n - n / 2)) - 1;
    StateVector::basis(geometry.dim(), index)
}

/// `<Z_j(t)>` for every site `j` at each time, evolving `initial` under `h`
/// in the full space.
pub fn magnetization_trajectory(h: &PauliSum, initial: &StateVector, times: &[f64]) -> Result<Vec<Vec<f64>>> {
    let g = h.geometry();
    if initial.dim() != g.dim() {
        return Err(Error::DimensionMismatch { expected: g.dim(), found: initial.dim() });
    }
    let decomp = eigendecompose(&h.to_dense())?;
    let v = &decomp.eigenvectors;
    let amps = initial.amplitudes();
    let coeffs: Vec<C64> = (0..v.ncols()).map(|k| (0..v.nrows()).map(|i| v[(i, k)].conj() * amps[i]).sum()).collect();
    let n = g.n_sites();
    times
        .iter()
        .map(|&t| {
            let phased: Vec<C64> =
                coeffs.iter().zip(&decomp.eigenvalues).map(|(c, &l)| c * C64::from_polar(1.0, -l * t)).collect();
            let psi = mat_vec(v, &phased);
            let mut z = vec![0.0; n];
            for (x, a) in psi.iter().enumerate() {
                let p = a.norm_sqr();
                for (j, zj) in z.iter_mut().enumerate() {
                    *zj += if x >> (n - 1 - j) & 1 == 0 { p } else { -p };
                }
            }
            Ok(z)
        })
        .collect()
}

/// Independent standard complex Gaussian amplitudes, normalized.
pub fn haar_random_state(dim: usize, seed: u64) -> Result<StateVector> {
    if dim == 0 || !dim.is_power_of_two() {
        return domain(format!("dimension {dim} is not a power of two"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    StateVector::new(gaussian_vector(dim, &mut rng))
}

pub(crate) fn gaussian_vector(dim: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
    (0..dim)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            C64::new(re, im)
        })
        .collect()
}

/// A state the engine can evolve and measure.
#[derive(Clone, Debug)]
pub enum QuantumState {
    Pure(StateVector),
    /// Exact density matrix in the blocks of some [`Space`].
    Mixed(BlockMatrix),
    Typical(TypicalEnsemble),
}

impl QuantumState {
    /// Exact Gibbs state `e^{-beta H}/Z`.
    pub fn thermal(spectrum: &BlockSpectrum, beta: f64) -> Result<Self> {
        Ok(QuantumState::Mixed(spectrum.thermal_density(beta)?))
    }
}

/// Applies `unitaries` in order (first element acts first).
pub fn evolve(state: &QuantumState, unitaries: &[&BlockMatrix]) -> Result<QuantumState> {
    let mut out = state.clone();
    for u in unitaries {
        out = match out {
            QuantumState::Pure(psi) => {
                let m = single_block(u)?;
                QuantumState::Pure(StateVector { amplitudes: mat_vec(m, psi.amplitudes()) })
            }
            QuantumState::Mixed(rho) => {
                if rho.blocks.len() != u.blocks.len() {
                    return Err(Error::DimensionMismatch { expected: rho.blocks.len(), found: u.blocks.len() });
                }
                QuantumState::Mixed(u.conjugate(&rho))
            }
            QuantumState::Typical(ens) => QuantumState::Typical(ens.evolved(single_block(u)?)),
        };
    }
    Ok(out)
}

fn single_block(u: &BlockMatrix) -> Result<&Mat<C64>> {
    match u.blocks.as_slice() {
        [m] => Ok(m),
        _ => domain("pure states and typicality ensembles evolve in the full space only"),
    }
}

/// Per-site expectation values `<O(alpha)>/N` for every class, in input order.
pub fn measure(space: &Space, state: &QuantumState, classes: &[OperatorClass]) -> Result<Vec<f64>> {
    let g = space.geometry();
    let n = g.n_sites() as f64;
    match state {
        QuantumState::Mixed(rho) => classes.iter().map(|c| space.class_expectation(rho, c)).collect(),
        QuantumState::Pure(psi) => classes
            .iter()
            .map(|c| {
                let total: C64 = c.strings(g)?.iter().map(|s| s.expectation(psi.amplitudes())).sum();
                Ok(total.re / n)
            })
            .collect(),
        QuantumState::Typical(ens) => classes.iter().map(|c| ens.class_expectation(c, g)).collect(),
    }
}

/// `<O>` for an arbitrary Pauli sum (not normalized per site).
pub fn measure_sum(space: &Space, state: &QuantumState, op: &PauliSum) -> Result<f64> {
    match state {
        QuantumState::Mixed(rho) => Ok(space.sum_expectation(rho, op)),
        QuantumState::Pure(psi) => {
            Ok(op.terms().iter().map(|(c, s)| c * s.expectation(psi.amplitudes()).re).sum())
        }
        QuantumState::Typical(ens) => Ok(ens.sum_expectation(op)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::{class_to_matrix, enumerate_classes, PauliLetter, PauliString};
    use std::f64::consts::FRAC_PI_2;

    fn geom(n: usize) -> ChainGeometry {
        ChainGeometry::new(n).unwrap()
    }

    fn max_abs_diff(a: &Mat<C64>, b: &Mat<C64>) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                m = m.max((a[(i, j)] - b[(i, j)]).norm());
            }
        }
        m
    }

    fn local_hamiltonian(n: usize) -> PauliSum {
        // R = 2 local model: h_z Z + J1 XX + J2 YY
        PauliSum::parse_terms(geom(n), &[("Z", 0.2), ("XX", 1.0), ("YY", 1.0)]).unwrap()
    }

    /// Lowest eigenvalue by power iteration on `c - H` (independent of the eigensolver).
    fn power_iteration_ground_energy(h: &Mat<C64>) -> f64 {
        let dim = h.nrows();
        let shift = (0..dim).map(|i| (0..dim).map(|j| h[(i, j)].norm()).sum::<f64>()).fold(0.0, f64::max);
        let mut v: Vec<C64> = (0..dim).map(|i| C64::new(1.0 + (i as f64 * 0.37).sin(), 0.1 * (i as f64).cos())).collect();
        let mut lambda = 0.0;
        for _ in 0..20000 {
            let hv = mat_vec(h, &v);
            let w: Vec<C64> = v.iter().zip(&hv).map(|(a, b)| a * shift - b).collect();
            let nrm = norm(&w);
            let next: Vec<C64> = w.iter().map(|a| a / nrm).collect();
            let hn = mat_vec(h, &next);
            let new_lambda: f64 = next.iter().zip(&hn).map(|(a, b)| (a.conj() * b).re).sum();
            v = next;
            if (new_lambda - lambda).abs() < 1e-14 {
                lambda = new_lambda;
                break;
            }
            lambda = new_lambda;
        }
        lambda
    }

    #[test]
    fn single_spin_spectrum() {
        let d = eigendecompose(&PauliLetter::Z.matrix()).unwrap();
        assert!((d.eigenvalues[0] + 1.0).abs() < 1e-14 && (d.eigenvalues[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn independent_spins_spectrum() {
        let h = PauliSum::parse_terms(geom(2), &[("Z", 0.2)]).unwrap().to_dense();
        let d = eigendecompose(&h).unwrap();
        let expected = [-0.4, 0.0, 0.0, 0.4];
        for (a, b) in d.eigenvalues.iter().zip(expected) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn ground_energy_matches_power_iteration() {
        let h = local_hamiltonian(6).to_dense();
        let d = eigendecompose(&h).unwrap();
        let oracle = power_iteration_ground_energy(&h);
        assert!((d.eigenvalues[0] - oracle).abs() < 1e-8, "{} vs {oracle}", d.eigenvalues[0]);
    }

    #[test]
    fn decomposition_invariants() {
        let h = local_hamiltonian(5).to_dense();
        let d = eigendecompose(&h).unwrap();
        let rel = max_abs_diff(&d.reconstruct(), &h) / h.norm_l2();
        assert!(rel < 1e-10);
        let vv = d.eigenvectors.adjoint() * &d.eigenvectors;
        assert!(max_abs_diff(&vv, &Mat::identity(32, 32)) < 1e-10);
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut m = PauliLetter::X.matrix();
        m[(0, 1)] = C64::new(2.0, 0.0);
        assert!(matches!(eigendecompose(&m), Err(Error::NonHermitian { .. })));
    }

    #[test]
    fn propagator_examples() {
        let d = eigendecompose(&PauliLetter::X.matrix()).unwrap();
        assert!(max_abs_diff(&d.propagator(0.0), &Mat::identity(2, 2)) < 1e-14);
        let minus_i_x = Mat::from_fn(2, 2, |i, j| PauliLetter::X.matrix()[(i, j)] * C64::new(0.0, -1.0));
        assert!(max_abs_diff(&d.propagator(FRAC_PI_2), &minus_i_x) < 1e-14);
    }

    #[test]
    fn propagator_group_law() {
        let d = eigendecompose(&local_hamiltonian(4).to_dense()).unwrap();
        let (t1, t2) = (0.37, 1.91);
        let lhs = d.propagator(t1) * d.propagator(t2);
        assert!(max_abs_diff(&lhs, &d.propagator(t1 + t2)) < 1e-9);
        let u = d.propagator(2.3);
        assert!(max_abs_diff(&(u.adjoint() * &u), &Mat::identity(16, 16)) < 1e-9);
    }

    #[test]
    fn thermal_expectation_examples() {
        let g = geom(4);
        let h = PauliSum::parse_terms(g, &[("Z", 0.2)]).unwrap().to_dense();
        let d = eigendecompose(&h).unwrap();
        let zc = class_to_matrix(&crate::pauli::OperatorClass::parse(0, "Z").unwrap(), g).unwrap();
        assert!(thermal_expectation_exact(&d, 0.0, &zc).unwrap().abs() < 1e-14);
        // per-site <Z> = -tanh(beta h_z)
        let per_site = thermal_expectation_exact(&d, 0.5, &zc).unwrap() / 4.0;
        assert!((per_site + (0.1f64).tanh()).abs() < 1e-12);
        assert!((per_site + 0.09967).abs() < 1e-5);
        assert!(thermal_expectation_exact(&d, -0.1, &zc).is_err());
    }

    #[test]
    fn energy_nonincreasing_in_beta() {
        let h = local_hamiltonian(6).to_dense();
        let d = eigendecompose(&h).unwrap();
        let mut last = f64::INFINITY;
        for k in 1..=10 {
            let e = thermal_expectation_exact(&d, 0.05 * k as f64, &h).unwrap();
            assert!(e <= last + 1e-12);
            last = e;
        }
    }

    #[test]
    fn block_thermal_matches_dense() {
        let g = geom(6);
        let h = local_hamiltonian(6);
        let cat = enumerate_classes(3, g).unwrap();
        let dense = eigendecompose(&h.to_dense()).unwrap();
        for space in [Space::full(g), Space::momentum(g)] {
            let spec = BlockSpectrum::of(&space, &h).unwrap();
            let state = QuantumState::thermal(&spec, 0.3).unwrap();
            let vals = measure(&space, &state, cat.classes()).unwrap();
            for (c, v) in cat.classes().iter().zip(&vals) {
                let m = class_to_matrix(c, g).unwrap();
                let exact = thermal_expectation_exact(&dense, 0.3, &m).unwrap() / 6.0;
                assert!((exact - v).abs() < 1e-12, "{c}");
            }
        }
    }

    #[test]
    fn haar_states() {
        let a = haar_random_state(16, 7).unwrap();
        assert_eq!(a, haar_random_state(16, 7).unwrap());
        assert!((a.norm() - 1.0).abs() < 1e-12);
        assert!(haar_random_state(12, 0).is_err());
    }

    #[test]
    fn haar_component_statistics() {
        // mean |<e_0|r>|^2 over seeds -> 1/dim within 5 standard errors
        let dim = 16;
        let samples: Vec<f64> = (0..1000).map(|s| haar_random_state(dim, s).unwrap().amplitudes()[0].norm_sqr()).collect();
        let (mean, se) = mean_and_se(&samples);
        assert!((mean - 1.0 / dim as f64).abs() < 5.0 * se, "{mean} +- {se}");
        let overlaps: Vec<f64> = (0..1000)
            .map(|s| {
                let a = haar_random_state(dim, 2 * s).unwrap();
                let b = haar_random_state(dim, 2 * s + 1).unwrap();
                a.overlap(&b).norm_sqr()
            })
            .collect();
        let (mean, se) = mean_and_se(&overlaps);
        assert!((mean - 1.0 / dim as f64).abs() < 5.0 * se, "{mean} +- {se}");
    }

    fn mean_and_se(x: &[f64]) -> (f64, f64) {
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, (var / n).sqrt())
    }

    #[test]
    fn evolution_examples() {
        let g = geom(4);
        let space = Space::full(g);
        let h = local_hamiltonian(4);
        let spec = BlockSpectrum::of(&space, &h).unwrap();
        let psi = QuantumState::Pure(haar_random_state(16, 3).unwrap());
        let same = evolve(&psi, &[]).unwrap();
        let (QuantumState::Pure(a), QuantumState::Pure(b)) = (&psi, &same) else { unreachable!() };
        assert_eq!(a, b);
        let u = spec.propagator(0.8);
        let ud = u.adjoint();
        let back = evolve(&psi, &[&u, &ud]).unwrap();
        let QuantumState::Pure(c) = back else { unreachable!() };
        assert!(a.amplitudes().iter().zip(c.amplitudes()).all(|(x, y)| (x - y).norm() < 1e-9));
        // energy conservation
        let e0 = measure_sum(&space, &psi, &h).unwrap();
        let moved = evolve(&psi, &[&spec.propagator(2.7)]).unwrap();
        let QuantumState::Pure(m) = &moved else { unreachable!() };
        assert!((m.norm() - 1.0).abs() < 1e-9);
        assert!((measure_sum(&space, &moved, &h).unwrap() - e0).abs() < 1e-9);
    }

    #[test]
    fn product_state_measurements() {
        let g = geom(4);
        let space = Space::full(g);
        let cat = enumerate_classes(1, g).unwrap();
        let up = QuantumState::Pure(StateVector::basis(16, 0).unwrap());
        let v = measure(&space, &up, cat.classes()).unwrap();
        assert!((v[0]).abs() < 1e-15 && (v[2] - 1.0).abs() < 1e-15);
        let spec = BlockSpectrum::of(&space, &local_hamiltonian(4)).unwrap();
        let hot = QuantumState::thermal(&spec, 0.0).unwrap();
        let v = measure(&space, &hot, cat.classes()).unwrap();
        assert!(v.iter().all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn measurements_translation_invariant_in_full_space() {
        let g = geom(6);
        let space = Space::full(g);
        let h = local_hamiltonian(6);
        let spec = BlockSpectrum::of(&space, &h).unwrap();
        let rho = spec.thermal_density(0.4).unwrap();
        // conjugate by the cyclic shift
        let dim = g.dim();
        let mut perm = Mat::<C64>::zeros(dim, dim);
        for x in 0..dim {
            perm[(g.translate(x), x)] = C64::new(1.0, 0.0);
        }
        let shifted = BlockMatrix { blocks: vec![&perm * &rho.blocks[0] * perm.adjoint()] };
        let cat = enumerate_classes(3, g).unwrap();
        let a = measure(&space, &QuantumState::Mixed(rho), cat.classes()).unwrap();
        let b = measure(&space, &QuantumState::Mixed(shifted), cat.classes()).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn domain_wall_magnetization() {
        let g = geom(6);
        let psi = domain_wall(g).unwrap();
        let z_at = |j: usize, v: &[C64]| PauliString::placed(&[PauliLetter::Z], j, g).unwrap().expectation(v).re;
        let start: Vec<f64> = (0..6).map(|j| z_at(j, psi.amplitudes())).collect();
        assert_eq!(start, vec![1.0, 1.0, 1.0, -1.0, -1.0, -1.0]);
        let h = PauliSum::parse_terms(g, &[("XX", 1.0), ("YY", 0.6), ("Z", 0.3)]).unwrap();
        let times = [0.0, 0.4, 1.3];
        let traj = magnetization_trajectory(&h, &psi, &times).unwrap();
        let decomp = eigendecompose(&h.to_dense()).unwrap();
        for (t, row) in times.iter().zip(&traj) {
            let evolved = mat_vec(&decomp.propagator(*t), psi.amplitudes());
            for (j, z) in row.iter().enumerate() {
                assert!((z - z_at(j, &evolved)).abs() < 1e-10);
            }
        }
        assert!(magnetization_trajectory(&h, &StateVector::basis(8, 0).unwrap(), &times).is_err());
    }
}
