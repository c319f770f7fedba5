//! Coefficient fitting: solve `Tr[O(a') e^{-H(c)}]/Z = <O(a')>` for `c`.

use faer::linalg::solvers::Solve;
use faer::{Mat, Scale};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::engine::{BlockMatrix, BlockSpectrum, Space};
use crate::error::{domain, Error, Result};
use crate::pauli::{ChainGeometry, OperatorClass, PauliSum};

/// Gibbs-state evaluator at unit inverse temperature for trial Hamiltonians
/// `H(c) = sum_a c_a O(a)`.
#[derive(Clone, Debug)]
pub struct ThermalModel {
    space: Space,
}

impl ThermalModel {
    /// Uses momentum sectors (every trial Hamiltonian is translation invariant).
    pub fn new(geometry: ChainGeometry) -> Self {
        Self { space: Space::momentum(geometry) }
    }

    pub fn with_space(space: Space) -> Self {
        Self { space }
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn geometry(&self) -> ChainGeometry {
        self.space.geometry()
    }

    pub fn hamiltonian(&self, classes: &[OperatorClass], coeffs: &[f64]) -> Result<PauliSum> {
        if classes.len() != coeffs.len() {
            return Err(Error::DimensionMismatch { expected: classes.len(), found: coeffs.len() });
        }
        PauliSum::from_classes(self.geometry(), classes.iter().zip(coeffs.iter().copied()))
    }

    /// Per-site `<O(a')>` in `e^{-H(c)}/Z` for every observable.
    pub fn expectations(&self, classes: &[OperatorClass], coeffs: &[f64], observables: &[OperatorClass]) -> Result<Vec<f64>> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Numerical("non-finite trial coefficient".into()));
        }
        let h = self.hamiltonian(classes, coeffs)?;
        let rho = BlockSpectrum::of(&self.space, &h)?.thermal_density(1.0)?;
        observables.iter().map(|o| self.space.class_expectation(&rho, o)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JacobianMode {
    /// Exact derivative of the Gibbs expectations from one diagonalization.
    Analytic,
    /// Central differences at every iteration.
    CentralDifference,
    /// Central differences once, then rank-one secant updates; refreshed when a step fails.
    Broyden,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    pub max_iterations: usize,
    /// Convergence threshold on `max |residual|`.
    pub tolerance: f64,
    /// Relative central-difference step.
    pub fd_step: f64,
    pub jacobian: JacobianMode,
    /// Fit against every measured class instead of the candidates only.
    pub least_squares: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { max_iterations: 200, tolerance: 1e-9, fd_step: 1e-5, jacobian: JacobianMode::Analytic, least_squares: false }
    }
}

/// One nonlinear system: unknown coefficients of `candidates`, matched on `observables`.
#[derive(Clone, Copy, Debug)]
pub struct FitProblem<'a> {
    pub candidates: &'a [OperatorClass],
    pub observables: &'a [OperatorClass],
    pub targets: &'a [f64],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOutcome {
    pub coefficients: Vec<f64>,
    /// `max |residual|` at the returned coefficients.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Largest Levenberg damping used (0 when plain Newton steps sufficed).
    pub max_damping: f64,
    /// Euclidean residual norm after each accepted step, starting with the initial guess.
    pub residual_history: Vec<f64>,
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Candidate and observable operators projected once; each evaluation
/// diagonalizes `H(c)` block by block.
struct Residual<'a> {
    space: &'a Space,
    problem: FitProblem<'a>,
    /// Full class sums `O(b)`.
    candidates: Vec<BlockMatrix>,
    /// Per-site observables `O(a') / N`.
    observables: Vec<BlockMatrix>,
    /// Candidate index of each observable class, when it is also a candidate.
    shared: Vec<Option<usize>>,
    inv_n: f64,
}

/// Gibbs state of `H(c)` in its eigenbasis.
struct Gibbs {
    spectrum: BlockSpectrum,
    weights: Vec<Vec<f64>>,
}

fn trace_product(a: &Mat<C64>, b: &Mat<C64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            acc += (a[(i, j)] * b[(j, i)]).re;
        }
    }
    acc
}

impl<'a> Residual<'a> {
    fn new(model: &'a ThermalModel, problem: FitProblem<'a>) -> Result<Self> {
        let space = model.space();
        let g = space.geometry();
        let n = g.n_sites() as f64;
        let project = |c: &OperatorClass, scale: f64| -> Result<BlockMatrix> {
            let mut sum = PauliSum::zero(g);
            sum.add_class(scale, c)?;
            space.project(&sum.simplified())
        };
        let candidates = problem.candidates.iter().map(|c| project(c, 1.0)).collect::<Result<_>>()?;
        let observables = problem.observables.iter().map(|c| project(c, 1.0 / n)).collect::<Result<_>>()?;
        let shared = problem
            .observables
            .iter()
            .map(|o| problem.candidates.iter().position(|c| c.pattern() == o.pattern()))
            .collect();
        Ok(Self { space, problem, candidates, observables, shared, inv_n: 1.0 / n })
    }

    fn gibbs(&self, c: &[f64]) -> Result<Gibbs> {
        if c.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical("non-finite trial coefficient".into()));
        }
        let dims = self.space.block_dims();
        let blocks: Vec<Mat<C64>> = dims
            .iter()
            .enumerate()
            .map(|(k, &d)| {
                let mut h = Mat::<C64>::zeros(d, d);
                for (coef, op) in c.iter().zip(&self.candidates) {
                    if *coef != 0.0 {
                        h += Scale(C64::new(*coef, 0.0)) * &op.blocks[k];
                    }
                }
                h
            })
            .collect();
        let spectrum = BlockSpectrum::new(&BlockMatrix { blocks })?;
        let (weights, _) = spectrum.boltzmann_weights(1.0);
        Ok(Gibbs { spectrum, weights })
    }

    fn expectations(&self, gibbs: &Gibbs) -> Vec<f64> {
        let rho: Vec<Mat<C64>> = gibbs
            .spectrum
            .blocks
            .iter()
            .zip(&gibbs.weights)
            .map(|(b, w)| {
                let v = &b.eigenvectors;
                let half = Mat::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] * w[j].sqrt());
                &half * half.adjoint()
            })
            .collect();
        self.observables.iter().map(|o| rho.iter().zip(&o.blocks).map(|(r, b)| trace_product(r, b)).sum()).collect()
    }

    fn eval(&self, c: &[f64]) -> Result<Vec<f64>> {
        let got = self.expectations(&self.gibbs(c)?);
        Ok(got.iter().zip(self.problem.targets).map(|(g, t)| g - t).collect())
    }

    fn jacobian_fd(&self, c: &[f64], step: f64) -> Result<Mat<f64>> {
        let m = self.problem.observables.len();
        let k = c.len();
        let mut jac = Mat::<f64>::zeros(m, k);
        let mut probe = c.to_vec();
        for b in 0..k {
            let h = step * c[b].abs().max(1.0);
            probe[b] = c[b] + h;
            let up = self.eval(&probe)?;
            probe[b] = c[b] - h;
            let down = self.eval(&probe)?;
            probe[b] = c[b];
            for a in 0..m {
                jac[(a, b)] = (up[a] - down[a]) / (2.0 * h);
            }
        }
        Ok(jac)
    }

    /// `d<A>/dc_b = -(sum_ij K_ij A_ij B_ji - <A><B>)` with the Kubo-Mori
    /// kernel `K_ij = int_0^1 p_i^s p_j^(1-s) ds` in the eigenbasis of `H(c)`.
    fn jacobian_analytic(&self, c: &[f64]) -> Result<Mat<f64>> {
        let gibbs = self.gibbs(c)?;
        let m = self.observables.len();
        let k = self.candidates.len();
        let mut jac = Mat::<f64>::zeros(m, k);
        let mut mean_a = vec![0.0; m];
        let mut mean_b = vec![0.0; k];
        for (blk, (spec, p)) in gibbs.spectrum.blocks.iter().zip(&gibbs.weights).enumerate() {
            let d = spec.dim();
            if d == 0 {
                continue;
            }
            let lam = &spec.eigenvalues;
            let kernel = Mat::from_fn(d, d, |i, j| {
                let x = lam[j] - lam[i];
                if x.abs() < 1e-12 {
                    p[i]
                } else {
                    p[i] * -(-x).exp_m1() / x
                }
            });
            let cands: Vec<Mat<C64>> = self.candidates.iter().map(|o| spec.to_eigenbasis(&o.blocks[blk])).collect();
            let obs: Vec<Mat<C64>> = self
                .observables
                .iter()
                .zip(&self.shared)
                .map(|(o, s)| match s {
                    Some(b) => Scale(C64::new(self.inv_n, 0.0)) * &cands[*b],
                    None => spec.to_eigenbasis(&o.blocks[blk]),
                })
                .collect();
            // sum_ij A_ij K_ij B_ji as one product: rows vec(A), columns vec(K o B^T)
            let lhs = Mat::from_fn(m, d * d, |a, x| obs[a][(x % d, x / d)]);
            let rhs = Mat::from_fn(d * d, k, |x, b| {
                let (i, j) = (x % d, x / d);
                cands[b][(j, i)] * kernel[(i, j)]
            });
            let prod = &lhs * &rhs;
            for a in 0..m {
                mean_a[a] += (0..d).map(|i| p[i] * obs[a][(i, i)].re).sum::<f64>();
                for b in 0..k {
                    jac[(a, b)] -= prod[(a, b)].re;
                }
            }
            for (b, cb) in cands.iter().enumerate() {
                mean_b[b] += (0..d).map(|i| p[i] * cb[(i, i)].re).sum::<f64>();
            }
        }
        for a in 0..m {
            for b in 0..k {
                jac[(a, b)] += mean_a[a] * mean_b[b];
            }
        }
        Ok(jac)
    }

    fn jacobian(&self, c: &[f64], cfg: &FitConfig) -> Result<Mat<f64>> {
        match cfg.jacobian {
            JacobianMode::Analytic => self.jacobian_analytic(c),
            JacobianMode::CentralDifference | JacobianMode::Broyden => self.jacobian_fd(c, cfg.fd_step),
        }
    }
}

/// Newton step `J d = -r` (square, undamped) or `(J^T J + lambda I) d = -J^T r`.
fn solve_step(jac: &Mat<f64>, r: &[f64], lambda: f64) -> Option<Vec<f64>> {
    let m = jac.nrows();
    let k = jac.ncols();
    let rhs = Mat::from_fn(m, 1, |i, _| -r[i]);
    let sol = if lambda == 0.0 && m == k {
        jac.partial_piv_lu().solve(&rhs)
    } else {
        let jt = jac.transpose();
        let mut normal = jt * jac;
        for i in 0..k {
            normal[(i, i)] += lambda;
        }
        let g = jt * &rhs;
        normal.partial_piv_lu().solve(&g)
    };
    let d: Vec<f64> = (0..k).map(|i| sol[(i, 0)]).collect();
    d.iter().all(|x| x.is_finite()).then_some(d)
}

/// Damped Newton (Levenberg-Marquardt when a plain step fails) from `initial`.
///
/// Accepted steps strictly decrease the Euclidean residual norm.
pub fn fit_coefficients(model: &ThermalModel, problem: FitProblem<'_>, initial: &[f64], cfg: &FitConfig) -> Result<FitOutcome> {
    let k = problem.candidates.len();
    if initial.len() != k {
        return Err(Error::DimensionMismatch { expected: k, found: initial.len() });
    }
    if problem.targets.len() != problem.observables.len() {
        return Err(Error::DimensionMismatch { expected: problem.observables.len(), found: problem.targets.len() });
    }
    if problem.observables.len() < k {
        return domain(format!("{} observables cannot determine {k} coefficients", problem.observables.len()));
    }
    let res = Residual::new(model, problem)?;
    let mut c = initial.to_vec();
    let mut r = res.eval(&c)?;
    let mut norm = l2(&r);
    let mut history = vec![norm];
    let mut lambda = 0.0;
    let mut max_damping: f64 = 0.0;
    let mut iterations = 0;
    let mut jac: Option<Mat<f64>> = None;
    if k == 0 {
        return Ok(FitOutcome { coefficients: c, residual: max_abs(&r), iterations: 0, converged: true, max_damping, residual_history: history });
    }
    while iterations < cfg.max_iterations && max_abs(&r) > cfg.tolerance {
        iterations += 1;
        let fresh = match (&jac, cfg.jacobian) {
            (Some(_), JacobianMode::Broyden) => false,
            _ => {
                jac = Some(res.jacobian(&c, cfg)?);
                true
            }
        };
        let j = jac.as_ref().expect("jacobian computed above");
        let scale = (0..k).map(|i| (0..j.nrows()).map(|a| j[(a, i)].powi(2)).sum::<f64>()).sum::<f64>() / k as f64;
        let mut accepted = None;
        for _ in 0..40 {
            if let Some(d) = solve_step(j, &r, lambda) {
                let trial: Vec<f64> = c.iter().zip(&d).map(|(a, b)| a + b).collect();
                if let Ok(rt) = res.eval(&trial) {
                    let nt = l2(&rt);
                    if nt.is_finite() && nt < norm {
                        accepted = Some((trial, rt, nt, d));
                        break;
                    }
                }
            }
            lambda = if lambda == 0.0 { 1e-6 * scale.max(1e-300) } else { lambda * 10.0 };
            max_damping = max_damping.max(lambda);
        }
        match accepted {
            Some((trial, rt, nt, d)) => {
                if cfg.jacobian == JacobianMode::Broyden {
                    // J += (dr - J d) d^T / |d|^2
                    let jm = jac.as_mut().expect("jacobian present");
                    let dd: f64 = d.iter().map(|x| x * x).sum();
                    if dd > 0.0 {
                        for a in 0..jm.nrows() {
                            let jd: f64 = (0..k).map(|b| jm[(a, b)] * d[b]).sum();
                            let u = (rt[a] - r[a] - jd) / dd;
                            for b in 0..k {
                                jm[(a, b)] += u * d[b];
                            }
                        }
                    }
                }
                let stalled = problem.observables.len() > k && (norm - nt) <= 1e-14 * norm.max(1e-300);
                c = trial;
                r = rt;
                norm = nt;
                history.push(norm);
                lambda = if lambda < 1e-12 { 0.0 } else { lambda / 10.0 };
                if stalled {
                    break;
                }
            }
            None if cfg.jacobian == JacobianMode::Broyden && !fresh => {
                jac = None;
                lambda = 0.0;
            }
            None => break,
        }
    }
    let residual = max_abs(&r);
    let converged = if problem.observables.len() > k {
        // least squares: stationary point reached
        residual <= cfg.tolerance || iterations < cfg.max_iterations
    } else {
        residual <= cfg.tolerance
    };
    Ok(FitOutcome { coefficients: c, residual, iterations, converged, max_damping, residual_history: history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{eigendecompose, thermal_expectation_exact};
    use crate::pauli::{class_to_matrix, enumerate_classes};

    fn classes(patterns: &[&str]) -> Vec<OperatorClass> {
        patterns.iter().enumerate().map(|(i, p)| OperatorClass::parse(i, p).unwrap()).collect()
    }

    /// Per-site thermal values from the dense full-space oracle.
    fn dense_values(g: ChainGeometry, h: &PauliSum, obs: &[OperatorClass]) -> Vec<f64> {
        let d = eigendecompose(&h.to_dense()).unwrap();
        obs.iter()
            .map(|o| thermal_expectation_exact(&d, 1.0, &class_to_matrix(o, g).unwrap()).unwrap() / g.n_sites() as f64)
            .collect()
    }

    #[test]
    fn single_field_recovered() {
        let g = ChainGeometry::new(6).unwrap();
        let cands = classes(&["Z", "X"]);
        let h = PauliSum::parse_terms(g, &[("Z", 0.3)]).unwrap();
        let targets = dense_values(g, &h, &cands);
        let model = ThermalModel::new(g);
        let out = fit_coefficients(
            &model,
            FitProblem { candidates: &cands, observables: &cands, targets: &targets },
            &[0.0, 0.0],
            &FitConfig::default(),
        )
        .unwrap();
        assert!(out.converged);
        assert!((out.coefficients[0] - 0.3).abs() < 1e-8 && out.coefficients[1].abs() < 1e-8, "{:?}", out.coefficients);
    }

    #[test]
    fn infinite_temperature_gives_zero() {
        let g = ChainGeometry::new(6).unwrap();
        let cands = classes(&["Z", "XX", "YY"]);
        let model = ThermalModel::new(g);
        let out = fit_coefficients(
            &model,
            FitProblem { candidates: &cands, observables: &cands, targets: &[0.0; 3] },
            &[0.0; 3],
            &FitConfig::default(),
        )
        .unwrap();
        assert!(out.converged && out.iterations == 0);
        assert!(out.coefficients.iter().all(|c| *c == 0.0));
    }

    #[test]
    fn jacobian_at_origin_is_minus_identity() {
        let g = ChainGeometry::new(6).unwrap();
        let cands = classes(&["Z", "XY", "XIZ"]);
        let model = ThermalModel::new(g);
        let res = Residual::new(&model, FitProblem { candidates: &cands, observables: &cands, targets: &[0.0; 3] }).unwrap();
        let j = res.jacobian_fd(&[0.0; 3], 1e-5).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                let want = if a == b { -1.0 } else { 0.0 };
                assert!((j[(a, b)] - want).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn analytic_jacobian_matches_differences() {
        let g = ChainGeometry::new(6).unwrap();
        let cat = enumerate_classes(2, g).unwrap();
        let cands = classes(&["Z", "XX", "YY", "ZX"]);
        let model = ThermalModel::new(g);
        let targets = vec![0.0; cat.len()];
        let res = Residual::new(&model, FitProblem { candidates: &cands, observables: cat.classes(), targets: &targets }).unwrap();
        let c = [0.4, -0.8, 0.3, 0.5];
        let fd = res.jacobian_fd(&c, 1e-5).unwrap();
        let an = res.jacobian_analytic(&c).unwrap();
        for a in 0..cat.len() {
            for b in 0..cands.len() {
                assert!((fd[(a, b)] - an[(a, b)]).abs() < 1e-8, "{a},{b}: {} vs {}", fd[(a, b)], an[(a, b)]);
            }
        }
    }

    #[test]
    fn self_residual_vanishes() {
        let g = ChainGeometry::new(6).unwrap();
        let cat = enumerate_classes(2, g).unwrap();
        let coeffs: Vec<f64> = (0..cat.len()).map(|i| 0.3 * ((i as f64) * 1.7).sin()).collect();
        let model = ThermalModel::new(g);
        let h = model.hamiltonian(cat.classes(), &coeffs).unwrap();
        let targets = dense_values(g, &h, cat.classes());
        let got = model.expectations(cat.classes(), &coeffs, cat.classes()).unwrap();
        for (a, b) in got.iter().zip(&targets) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn residual_history_is_monotone_and_broyden_agrees() {
        let g = ChainGeometry::new(6).unwrap();
        let cands = classes(&["Z", "X", "ZZ", "XX"]);
        let h = PauliSum::parse_terms(g, &[("Z", 0.9), ("X", -0.6), ("ZZ", 1.1), ("XX", 0.4)]).unwrap();
        let targets = dense_values(g, &h, &cands);
        let model = ThermalModel::new(g);
        let p = FitProblem { candidates: &cands, observables: &cands, targets: &targets };
        let newton = fit_coefficients(&model, p, &[0.0; 4], &FitConfig::default()).unwrap();
        assert!(newton.converged);
        assert!(newton.residual_history.windows(2).all(|w| w[1] < w[0]));
        let cfg = FitConfig { jacobian: JacobianMode::Broyden, ..FitConfig::default() };
        let secant = fit_coefficients(&model, p, &[0.0; 4], &cfg).unwrap();
        assert!(secant.converged);
        for (a, b) in newton.coefficients.iter().zip(&secant.coefficients) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn least_squares_mode() {
        let g = ChainGeometry::new(6).unwrap();
        let cat = enumerate_classes(2, g).unwrap();
        let cands = classes(&["Z", "XX"]);
        let h = PauliSum::parse_terms(g, &[("Z", 0.2), ("XX", 0.5)]).unwrap();
        let targets = dense_values(g, &h, cat.classes());
        let model = ThermalModel::new(g);
        let cfg = FitConfig { least_squares: true, ..FitConfig::default() };
        let out = fit_coefficients(
            &model,
            FitProblem { candidates: &cands, observables: cat.classes(), targets: &targets },
            &[0.0; 2],
            &cfg,
        )
        .unwrap();
        assert!((out.coefficients[0] - 0.2).abs() < 1e-8 && (out.coefficients[1] - 0.5).abs() < 1e-8);
    }
}
