//! Effective inverse temperature from a driven trajectory.
//!
//! With a fitted `H = sum c_alpha O(alpha)` (`c = beta a`), the quench
//! dynamics generated by `a = c / beta` at time `n T` equals the dynamics
//! generated by `c` at time `n T / beta`. One diagonalization of `c` then
//! serves every trial temperature.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::engine::{BlockMatrix, BlockSpectrum, Space};
use crate::error::{domain, Error, Result};
use crate::pauli::{Catalog, OperatorClass, PauliSum};

/// `<O>(t)` under a fixed Hamiltonian, precomputed in its eigenbasis.
#[derive(Clone, Debug)]
pub struct TrajectoryModel {
    /// Per block: `(lambda_i - lambda_j, rho_ij O_ji)`.
    terms: Vec<(f64, C64)>,
}

impl TrajectoryModel {
    /// `initial` is a density matrix in `space`; `observable` is measured per site.
    pub fn new(space: &Space, hamiltonian: &PauliSum, initial: &BlockMatrix, observable: &OperatorClass) -> Result<Self> {
        let spectrum = BlockSpectrum::of(space, hamiltonian)?;
        let g = space.geometry();
        let mut op = PauliSum::zero(g);
        op.add_class(1.0 / g.n_sites() as f64, observable)?;
        let op = space.project(&op.simplified())?;
        if initial.blocks.len() != spectrum.blocks.len() {
            return Err(Error::DimensionMismatch { expected: spectrum.blocks.len(), found: initial.blocks.len() });
        }
        let mut terms = Vec::new();
        for ((spec, rho), o) in spectrum.blocks.iter().zip(&initial.blocks).zip(&op.blocks) {
            let r = spec.to_eigenbasis(rho);
            let q = spec.to_eigenbasis(o);
            let d = spec.dim();
            for i in 0..d {
                for j in 0..d {
                    let w = r[(i, j)] * q[(j, i)];
                    if w.norm() > 1e-15 {
                        terms.push((spec.eigenvalues[i] - spec.eigenvalues[j], w));
                    }
                }
            }
        }
        Ok(Self { terms })
    }

    pub fn value(&self, t: f64) -> f64 {
        self.terms.iter().map(|&(de, w)| (w * C64::from_polar(1.0, -de * t)).re).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaEstimate {
    pub beta: f64,
    pub objective: f64,
    /// Set when the objective does not depend on the temperature.
    pub indeterminate: bool,
    /// `(beta, objective)` at every grid point.
    pub scan: Vec<(f64, f64)>,
}

/// Sum of `|exact_n - model(n T / beta)|` over the given cycles.
fn objective(model: &TrajectoryModel, cycles: &[usize], exact: &[f64], period: f64, beta: f64) -> f64 {
    cycles
        .iter()
        .zip(exact)
        .map(|(&n, &e)| (e - model.value(n as f64 * period / beta)).abs())
        .sum()
}

/// Grid search over `grid` followed by golden-section refinement between
/// the neighbours of the best grid point.
pub fn extract_beta(model: &TrajectoryModel, cycles: &[usize], exact: &[f64], period: f64, grid: &[f64]) -> Result<BetaEstimate> {
    if cycles.len() != exact.len() {
        return Err(Error::DimensionMismatch { expected: cycles.len(), found: exact.len() });
    }
    if cycles.is_empty() {
        return domain("no trajectory points");
    }
    if grid.is_empty() || grid.iter().any(|b| !(*b > 0.0) || !b.is_finite()) {
        return domain("temperature grid must be non-empty and positive");
    }
    if !(period > 0.0) {
        return domain(format!("period {period} must be positive"));
    }
    let mut grid = grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let scan: Vec<(f64, f64)> = grid.iter().map(|&b| (b, objective(model, cycles, exact, period, b))).collect();
    let (best, _) = scan
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .expect("non-empty grid");
    let hi = scan.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    let lo = scan[best].1;
    if hi - lo <= 1e-9 * (1.0 + hi) {
        return Ok(BetaEstimate { beta: grid[best], objective: lo, indeterminate: true, scan });
    }
    let mut a = grid[best.saturating_sub(1)];
    let mut b = grid[(best + 1).min(grid.len() - 1)];
    let f = |x: f64| objective(model, cycles, exact, period, x);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > 1e-6 * (1.0 + a.abs()) {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = f(x2);
        }
    }
    let (beta, obj) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    let (beta, obj) = if obj <= lo { (beta, obj) } else { (grid[best], lo) };
    Ok(BetaEstimate { beta, objective: obj, indeterminate: false, scan })
}

/// The support-1 class with the largest `|value|` in `values` (catalog order).
pub fn dominant_single_site(catalog: &Catalog, values: &[f64]) -> Option<OperatorClass> {
    catalog
        .classes()
        .iter()
        .filter(|c| c.support() == 1)
        .max_by(|a, b| values[a.id].abs().total_cmp(&values[b.id].abs()).then(b.id.cmp(&a.id)))
        .cloned()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::ChainGeometry;

    fn setup() -> (Space, PauliSum, BlockMatrix, OperatorClass) {
        let g = ChainGeometry::new(6).unwrap();
        let space = Space::momentum(g);
        let h = PauliSum::parse_terms(g, &[("XX", 1.0), ("Z", 0.7), ("X", 0.4)]).unwrap();
        let h0 = PauliSum::parse_terms(g, &[("Z", 1.0)]).unwrap();
        let rho = BlockSpectrum::of(&space, &h0).unwrap().thermal_density(0.5).unwrap();
        (space, h, rho, OperatorClass::parse(0, "Z").unwrap())
    }

    #[test]
    fn trajectory_matches_direct_evolution() {
        let (space, h, rho, z) = setup();
        let model = TrajectoryModel::new(&space, &h, &rho, &z).unwrap();
        let spec = BlockSpectrum::of(&space, &h).unwrap();
        for t in [0.0, 0.3, 1.7] {
            let u = spec.propagator(t);
            let rt = u.conjugate(&rho);
            let direct = space.class_expectation(&rt, &z).unwrap();
            assert!((model.value(t) - direct).abs() < 1e-10, "t={t}");
        }
    }

    #[test]
    fn recovers_planted_temperature() {
        let (space, h, rho, z) = setup();
        let model = TrajectoryModel::new(&space, &h, &rho, &z).unwrap();
        let cycles: Vec<usize> = (0..12).collect();
        let period = 0.4;
        let beta = 0.37;
        let exact: Vec<f64> = cycles.iter().map(|&n| model.value(n as f64 * period / beta)).collect();
        let grid: Vec<f64> = (1..=100).map(|k| 0.01 * k as f64).collect();
        let est = extract_beta(&model, &cycles, &exact, period, &grid).unwrap();
        assert!(!est.indeterminate);
        assert!((est.beta - beta).abs() < 1e-4, "{}", est.beta);
    }

    #[test]
    fn flat_objective_is_indeterminate() {
        let (space, h, rho, z) = setup();
        let model = TrajectoryModel::new(&space, &h, &rho, &z).unwrap();
        let est = extract_beta(&model, &[0], &[0.1], 0.4, &[0.1, 0.2, 0.3]).unwrap();
        assert!(est.indeterminate);
        assert!(extract_beta(&model, &[0, 1], &[0.1], 0.4, &[0.1]).is_err());
        assert!(extract_beta(&model, &[0], &[0.1], 0.4, &[-0.1]).is_err());
    }
}
