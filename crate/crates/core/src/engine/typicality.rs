//! Thermal averages from a handful of random pure states.

use faer::Mat;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{gaussian_vector, mat_vec, SpectralDecomposition};
use crate::error::{domain, Result};
use crate::pauli::{ChainGeometry, OperatorClass, PauliString, PauliSum};

/// Default number of random states.
pub const DEFAULT_SAMPLES: usize = 20;

/// Unnormalized members `|psi_n> = e^{-beta (H - E_0)/2} |r_n>`.
#[derive(Clone, Debug)]
pub struct TypicalEnsemble {
    pub beta: f64,
    members: Vec<Vec<C64>>,
    /// `ln Z_beta` estimate (with the ground-energy shift undone).
    pub log_partition: f64,
}

/// Draws `r` Gaussian states and filters them with `e^{-beta H/2}`.
pub fn typicality_thermal_samples(decomp: &SpectralDecomposition, beta: f64, r: usize, seed: u64) -> Result<TypicalEnsemble> {
    if r == 0 {
        return domain("typicality needs at least one random state");
    }
    if !(beta >= 0.0) || !beta.is_finite() {
        return domain(format!("inverse temperature {beta} must be finite and >= 0"));
    }
    let dim = decomp.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let e0 = decomp.min_eigenvalue();
    let filter = if beta == 0.0 {
        None
    } else {
        Some(decomp.apply_function(|l| C64::new((-0.5 * beta * (l - e0)).exp(), 0.0)))
    };
    let mut members = Vec::with_capacity(r);
    for _ in 0..r {
        let raw = gaussian_vector(dim, &mut rng);
        let nrm = super::norm(&raw);
        let unit: Vec<C64> = raw.into_iter().map(|a| a / nrm).collect();
        members.push(match &filter {
            Some(f) => mat_vec(f, &unit),
            None => unit,
        });
    }
    let mean_weight = members.iter().map(|m| super::norm(m).powi(2)).sum::<f64>() / r as f64;
    let log_partition = (dim as f64).ln() + mean_weight.ln() - beta * e0;
    Ok(TypicalEnsemble { beta, members, log_partition })
}

impl TypicalEnsemble {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[Vec<C64>] {
        &self.members
    }

    pub fn evolved(&self, u: &Mat<C64>) -> Self {
        Self {
            beta: self.beta,
            members: self.members.iter().map(|m| mat_vec(u, m)).collect(),
            log_partition: self.log_partition,
        }
    }

    fn weights(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.iter().map(|a| a.norm_sqr()).sum()).collect()
    }

    fn member_values(&self, strings: &[PauliString], coeffs: Option<&[f64]>) -> Vec<f64> {
        self.members
            .iter()
            .map(|m| {
                strings
                    .iter()
                    .enumerate()
                    .map(|(i, s)| coeffs.map_or(1.0, |c| c[i]) * s.expectation(m).re)
                    .sum()
            })
            .collect()
    }

    /// Ratio estimator `sum_n <psi_n|O|psi_n> / sum_n <psi_n|psi_n>`, per site.
    pub fn class_expectation(&self, class: &OperatorClass, geometry: ChainGeometry) -> Result<f64> {
        Ok(self.class_expectation_with_error(class, geometry, 0, 0)?.0)
    }

    /// Estimate plus a bootstrap standard error over members (`n_boot = 0` skips it).
    pub fn class_expectation_with_error(
        &self,
        class: &OperatorClass,
        geometry: ChainGeometry,
        n_boot: usize,
        seed: u64,
    ) -> Result<(f64, f64)> {
        let strings = class.strings(geometry)?;
        let n = geometry.n_sites() as f64;
        let num: Vec<f64> = self.member_values(&strings, None).into_iter().map(|v| v / n).collect();
        let den = self.weights();
        let value = num.iter().sum::<f64>() / den.iter().sum::<f64>();
        let se = if n_boot == 0 { 0.0 } else { bootstrap_standard_errors(&num, &den, n_boot, seed) };
        Ok((value, se))
    }

    pub fn sum_expectation(&self, op: &PauliSum) -> f64 {
        let strings: Vec<PauliString> = op.terms().iter().map(|(_, s)| *s).collect();
        let coeffs: Vec<f64> = op.terms().iter().map(|(c, _)| *c).collect();
        let num = self.member_values(&strings, Some(&coeffs));
        num.iter().sum::<f64>() / self.weights().iter().sum::<f64>()
    }
}

/// Bootstrap standard error of `sum(num)/sum(den)` resampling members with replacement.
pub fn bootstrap_standard_errors(num: &[f64], den: &[f64], n_boot: usize, seed: u64) -> f64 {
    let r = num.len();
    if r < 2 || n_boot < 2 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let estimates: Vec<f64> = (0..n_boot)
        .map(|_| {
            let (mut a, mut b) = (0.0, 0.0);
            for _ in 0..r {
                let i = rng.random_range(0..r);
                a += num[i];
                b += den[i];
            }
            a / b
        })
        .collect();
    let mean = estimates.iter().sum::<f64>() / n_boot as f64;
    (estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n_boot - 1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{eigendecompose, thermal_expectation_exact};
    use crate::pauli::{class_to_matrix, enumerate_classes};

    fn model(n: usize) -> PauliSum {
        let g = ChainGeometry::new(n).unwrap();
        PauliSum::parse_terms(g, &[("ZZ", 1.0), ("X", 0.9), ("Z", 0.8)]).unwrap()
    }

    #[test]
    fn zero_beta_keeps_random_states() {
        let h = model(4);
        let d = eigendecompose(&h.to_dense()).unwrap();
        let ens = typicality_thermal_samples(&d, 0.0, 3, 11).unwrap();
        for m in ens.members() {
            assert!((super::super::norm(m) - 1.0).abs() < 1e-12);
        }
        assert!((ens.log_partition - 16f64.ln()).abs() < 1e-12);
        assert!(typicality_thermal_samples(&d, 0.1, 0, 1).is_err());
    }

    #[test]
    fn agrees_with_exact_within_bootstrap_errors() {
        let g = ChainGeometry::new(8).unwrap();
        let h = model(8);
        let d = eigendecompose(&h.to_dense()).unwrap();
        let ens = typicality_thermal_samples(&d, 0.2, 20, 5).unwrap();
        let z = crate::pauli::OperatorClass::parse(0, "Z").unwrap();
        let (v, se) = ens.class_expectation_with_error(&z, g, 400, 1).unwrap();
        let exact = thermal_expectation_exact(&d, 0.2, &class_to_matrix(&z, g).unwrap()).unwrap() / 8.0;
        assert!((v - exact).abs() < 3.0 * se, "{v} vs {exact} (se {se})");
    }

    #[test]
    fn all_classes_agree_at_r50() {
        let g = ChainGeometry::new(8).unwrap();
        let h = model(8);
        let d = eigendecompose(&h.to_dense()).unwrap();
        let ens = typicality_thermal_samples(&d, 0.3, 50, 9).unwrap();
        let cat = enumerate_classes(3, g).unwrap();
        let mut outliers = 0;
        for c in cat.classes() {
            let (v, se) = ens.class_expectation_with_error(c, g, 200, c.id as u64).unwrap();
            let exact = thermal_expectation_exact(&d, 0.3, &class_to_matrix(c, g).unwrap()).unwrap() / 8.0;
            if (v - exact).abs() > 3.0 * se.max(1e-12) {
                outliers += 1;
            }
        }
        // 3-sigma excursions are expected in well under 5% of 48 channels
        assert!(outliers <= 2, "{outliers} outliers");
    }

    #[test]
    fn variance_shrinks_with_samples() {
        let g = ChainGeometry::new(6).unwrap();
        let h = model(6);
        let d = eigendecompose(&h.to_dense()).unwrap();
        let z = crate::pauli::OperatorClass::parse(0, "Z").unwrap();
        let variance = |r: usize| {
            let vals: Vec<f64> = (0..60)
                .map(|s| typicality_thermal_samples(&d, 0.2, r, 1000 + s).unwrap().class_expectation(&z, g).unwrap())
                .collect();
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (vals.len() - 1) as f64
        };
        let (v5, v20, v80) = (variance(5), variance(20), variance(80));
        // 1/R scaling: each quadrupling cuts the variance by ~4 (loose band for 60-seed noise)
        assert!(v5 / v20 > 2.0 && v5 / v20 < 8.0, "{v5} {v20}");
        assert!(v20 / v80 > 2.0 && v20 / v80 < 8.0, "{v20} {v80}");
    }

    #[test]
    fn evolution_preserves_weights() {
        let h = model(5);
        let d = eigendecompose(&h.to_dense()).unwrap();
        let ens = typicality_thermal_samples(&d, 0.4, 4, 2).unwrap();
        let moved = ens.evolved(&d.propagator(1.3));
        for (a, b) in ens.weights().iter().zip(moved.weights()) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!((ens.sum_expectation(&h) - moved.sum_expectation(&h)).abs() < 1e-9);
    }
}
