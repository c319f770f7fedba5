//! Candidate selection, coefficient fitting, ghost pruning, iterative
//! support growth, temperature extraction and error metrics.

mod beta;
mod fit;

pub use beta::{dominant_single_site, extract_beta, BetaEstimate, TrajectoryModel};
pub use fit::{fit_coefficients, FitConfig, FitOutcome, FitProblem, JacobianMode, ThermalModel};

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{domain, Error, Result};
use crate::pauli::{parse_pattern, ChainGeometry, OperatorClass, PauliSum};
use crate::protocols::{build_hamiltonian, Generators, ProtocolSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnsatzTerm {
    pub pattern: String,
    pub support: usize,
    pub coefficient: f64,
}

/// Map from class pattern to coefficient, ordered by support then pattern.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianAnsatz {
    terms: Vec<AnsatzTerm>,
    /// Pattern whose coefficient was used as the unit, if normalized.
    anchor: Option<String>,
}

fn sort_key(t: &AnsatzTerm) -> (usize, String) {
    (t.support, t.pattern.clone())
}

impl HamiltonianAnsatz {
    /// Rejects duplicate patterns.
    pub fn new<S: AsRef<str>>(terms: impl IntoIterator<Item = (S, f64)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (p, c) in terms {
            let class = OperatorClass::parse(0, p.as_ref())?;
            if !c.is_finite() {
                return Err(Error::Numerical(format!("coefficient of {class} is not finite")));
            }
            if map.insert(class.label(), c).is_some() {
                return domain(format!("pattern {class} appears twice"));
            }
        }
        Ok(Self::from_map(map))
    }

    /// Sums repeated patterns.
    pub fn summed<S: AsRef<str>>(terms: impl IntoIterator<Item = (S, f64)>) -> Result<Self> {
        let mut map: BTreeMap<String, f64> = BTreeMap::new();
        for (p, c) in terms {
            let class = OperatorClass::parse(0, p.as_ref())?;
            *map.entry(class.label()).or_default() += c;
        }
        Ok(Self::from_map(map))
    }

    fn from_map(map: BTreeMap<String, f64>) -> Self {
        let mut terms: Vec<AnsatzTerm> =
            map.into_iter().map(|(pattern, coefficient)| AnsatzTerm { support: pattern.len(), pattern, coefficient }).collect();
        terms.sort_by_key(sort_key);
        Self { terms, anchor: None }
    }

    pub fn from_classes(classes: &[OperatorClass], coeffs: &[f64]) -> Result<Self> {
        if classes.len() != coeffs.len() {
            return Err(Error::DimensionMismatch { expected: classes.len(), found: coeffs.len() });
        }
        Self::new(classes.iter().map(|c| c.label()).zip(coeffs.iter().copied()))
    }

    pub fn terms(&self) -> &[AnsatzTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn anchor(&self) -> Option<&str> {
        self.anchor.as_deref()
    }

    pub fn get(&self, pattern: &str) -> Option<f64> {
        let key = pattern.to_ascii_uppercase();
        self.terms.iter().find(|t| t.pattern == key).map(|t| t.coefficient)
    }

    /// Coefficient of `pattern`, zero when absent.
    pub fn coefficient(&self, pattern: &str) -> f64 {
        self.get(pattern).unwrap_or(0.0)
    }

    pub fn max_support(&self) -> usize {
        self.terms.iter().map(|t| t.support).max().unwrap_or(0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for t in &mut out.terms {
            t.coefficient *= factor;
        }
        out
    }

    /// Divides by the coefficient of `pattern` and records it as the anchor.
    pub fn normalized_by(&self, pattern: &str) -> Result<Self> {
        let a = self.get(pattern).ok_or_else(|| Error::Domain(format!("anchor {pattern} is not in the ansatz")))?;
        if a == 0.0 {
            return Err(Error::Numerical(format!("anchor {pattern} has zero coefficient")));
        }
        let mut out = self.scaled(1.0 / a);
        out.anchor = Some(pattern.to_ascii_uppercase());
        Ok(out)
    }

    pub fn with_anchor(mut self, anchor: Option<String>) -> Self {
        self.anchor = anchor;
        self
    }

    /// Classes in term order, with ids equal to their position.
    pub fn classes(&self) -> Vec<OperatorClass> {
        self.terms.iter().enumerate().map(|(i, t)| OperatorClass::parse(i, &t.pattern).expect("validated pattern")).collect()
    }

    pub fn coefficients(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.coefficient).collect()
    }

    pub fn to_pauli_sum(&self, geometry: ChainGeometry) -> Result<PauliSum> {
        let mut sum = PauliSum::zero(geometry);
        for t in &self.terms {
            sum.add_pattern(t.coefficient, &parse_pattern(&t.pattern)?)?;
        }
        Ok(sum.simplified())
    }

    /// `pattern,support,coefficient,std` rows.
    pub fn to_csv(&self, std: Option<&[f64]>) -> String {
        let mut s = String::from("pattern,support,coefficient,std\n");
        for (i, t) in self.terms.iter().enumerate() {
            let sd = std.and_then(|v| v.get(i)).copied().unwrap_or(0.0);
            let _ = writeln!(s, "{},{},{},{}", t.pattern, t.support, t.coefficient, sd);
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub class_id: usize,
    pub avg_abs_gradient: f64,
}

/// Mean `|dv/ds|` of each channel along the latent coordinate, ranked
/// descending (ties by class id). `rows[e][c]` is element `e`, class `c`.
pub fn latent_gradient_scores(rows: &[Vec<f64>], latent: &[f64], class_ids: &[usize]) -> Result<Vec<CandidateScore>> {
    if rows.len() != latent.len() {
        return Err(Error::DimensionMismatch { expected: rows.len(), found: latent.len() });
    }
    let mut order: Vec<usize> = (0..latent.len()).collect();
    order.sort_by(|&a, &b| latent[a].total_cmp(&latent[b]).then(a.cmp(&b)));
    let pairs: Vec<(usize, usize, f64)> = order
        .windows(2)
        .filter_map(|w| {
            let ds = (latent[w[1]] - latent[w[0]]).abs();
            (ds >= 1e-12).then_some((w[0], w[1], ds))
        })
        .collect();
    if pairs.is_empty() {
        return Err(Error::Numerical("all latent coordinates coincide".into()));
    }
    let mut scores: Vec<CandidateScore> = class_ids
        .iter()
        .map(|&c| {
            let total: f64 = pairs.iter().map(|&(a, b, ds)| (rows[b][c] - rows[a][c]).abs() / ds).sum();
            CandidateScore { class_id: c, avg_abs_gradient: total / pairs.len() as f64 }
        })
        .collect();
    scores.sort_by(|a, b| b.avg_abs_gradient.total_cmp(&a.avg_abs_gradient).then(a.class_id.cmp(&b.class_id)));
    Ok(scores)
}

/// Ids of the `k` best-ranked classes.
pub fn select_candidates(scores: &[CandidateScore], k: usize) -> Vec<usize> {
    scores.iter().take(k).map(|s| s.class_id).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DropReason {
    /// Relative variance across fits above the threshold.
    Unstable,
    /// Normalized coefficient below the negligibility cutoff in every fit.
    Negligible,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DroppedTerm {
    pub class_id: usize,
    pub pattern: String,
    /// `Var(c/c_0) / |E(c/c_0)|` across fits.
    pub variance_ratio: f64,
    pub reason: DropReason,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PruneOutcome {
    pub anchor: usize,
    pub retained: Vec<usize>,
    pub dropped: Vec<DroppedTerm>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PruneConfig {
    pub threshold: f64,
    /// Terms with `max |c/c_0|` below this are dropped regardless of variance.
    pub negligible: f64,
}

impl Default for PruneConfig {
    fn default() -> Self {
        Self { threshold: 1.0, negligible: 1e-6 }
    }
}

/// Drops terms whose anchor-normalized coefficients fluctuate across fits.
/// `fits[f][i]` is the coefficient of `classes[i]` in fit `f`.
pub fn prune_ghosts(classes: &[OperatorClass], fits: &[Vec<f64>], cfg: &PruneConfig) -> Result<PruneOutcome> {
    if fits.len() < 3 {
        return domain(format!("ghost pruning needs at least 3 fits, found {}", fits.len()));
    }
    if classes.is_empty() {
        return domain("no terms to prune");
    }
    if let Some(bad) = fits.iter().find(|f| f.len() != classes.len()) {
        return Err(Error::DimensionMismatch { expected: classes.len(), found: bad.len() });
    }
    let n = fits.len() as f64;
    let mean_abs: Vec<f64> = (0..classes.len()).map(|i| fits.iter().map(|f| f[i].abs()).sum::<f64>() / n).collect();
    // largest mean |c|, ties to the lower id
    let anchor = (0..classes.len())
        .max_by(|&a, &b| mean_abs[a].total_cmp(&mean_abs[b]).then(classes[b].id.cmp(&classes[a].id)))
        .expect("non-empty");
    if fits.iter().any(|f| f[anchor] == 0.0) {
        return Err(Error::Numerical(format!("anchor {} vanishes in some fit", classes[anchor])));
    }
    let mut retained = Vec::new();
    let mut dropped = Vec::new();
    for (i, class) in classes.iter().enumerate() {
        let ratios: Vec<f64> = fits.iter().map(|f| f[i] / f[anchor]).collect();
        let mean = ratios.iter().sum::<f64>() / n;
        let var = ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let ratio = if var == 0.0 { 0.0 } else { var / mean.abs() };
        let reason = if ratio > cfg.threshold {
            Some(DropReason::Unstable)
        } else if ratios.iter().all(|r| r.abs() < cfg.negligible) {
            Some(DropReason::Negligible)
        } else {
            None
        };
        match reason {
            None => retained.push(class.id),
            Some(reason) => dropped.push(DroppedTerm { class_id: class.id, pattern: class.label(), variance_ratio: ratio, reason }),
        }
    }
    Ok(PruneOutcome { anchor: classes[anchor].id, retained, dropped })
}

/// Fit of one data element.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElementFit {
    pub element_id: usize,
    pub beta0: f64,
    pub cycle_n: usize,
    /// `beta * a` per term, aligned with the candidate list of the fit.
    pub coefficients: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub max_damping: f64,
}

fn fit_elements(
    model: &ThermalModel,
    dataset: &Dataset,
    candidates: &[OperatorClass],
    observables: &[OperatorClass],
    initial: &[Vec<f64>],
    fallback: &[f64],
    cfg: &FitConfig,
) -> Result<Vec<ElementFit>> {
    dataset
        .elements
        .iter()
        .enumerate()
        .map(|(e, el)| {
            let targets: Vec<f64> = observables.iter().map(|o| el.values[o.id]).collect();
            // the model classes carry catalog ids; the solver only needs their patterns
            let problem = FitProblem { candidates, observables, targets: &targets };
            let mut out = fit_coefficients(model, problem, &initial[e], cfg)?;
            if !out.converged {
                let retry = fit_coefficients(model, problem, fallback, cfg)?;
                if retry.residual < out.residual {
                    out = retry;
                }
            }
            Ok(ElementFit {
                element_id: el.element_id,
                beta0: el.beta0,
                cycle_n: el.cycle_n,
                coefficients: out.coefficients,
                residual: out.residual,
                iterations: out.iterations,
                converged: out.converged,
                max_damping: out.max_damping,
            })
        })
        .collect()
}

/// Anchor-normalized coefficients averaged over fits (mean, sample std).
pub fn average_normalized(fits: &[Vec<f64>], anchor: usize) -> (Vec<f64>, Vec<f64>) {
    let k = fits.first().map_or(0, Vec::len);
    let n = fits.len() as f64;
    let mut mean = vec![0.0; k];
    let mut std = vec![0.0; k];
    for i in 0..k {
        let r: Vec<f64> = fits.iter().map(|f| f[i] / f[anchor]).collect();
        mean[i] = r.iter().sum::<f64>() / n;
        if fits.len() > 1 {
            std[i] = (r.iter().map(|x| (x - mean[i]).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        }
    }
    (mean, std)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefitOutcome {
    pub classes: Vec<OperatorClass>,
    pub elements: Vec<ElementFit>,
    /// Position of the anchor within `classes`.
    pub anchor: usize,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Refits the pruned ansatz on every element and averages the
/// anchor-normalized coefficients.
pub fn refit(model: &ThermalModel, dataset: &Dataset, retained: &[OperatorClass], initial: Option<&[Vec<f64>]>, cfg: &FitConfig) -> Result<RefitOutcome> {
    if retained.is_empty() {
        return domain("refit needs at least one retained class");
    }
    if dataset.is_empty() {
        return domain("refit needs at least one data element");
    }
    let zeros = vec![vec![0.0; retained.len()]; dataset.len()];
    let init = initial.unwrap_or(&zeros);
    let observables = observables_for(dataset, retained, cfg);
    let elements = fit_elements(model, dataset, retained, &observables, init, &vec![0.0; retained.len()], cfg)?;
    let fits: Vec<Vec<f64>> = elements.iter().map(|e| e.coefficients.clone()).collect();
    let n = fits.len() as f64;
    let anchor = (0..retained.len())
        .max_by(|&a, &b| {
            let ma = fits.iter().map(|f| f[a].abs()).sum::<f64>() / n;
            let mb = fits.iter().map(|f| f[b].abs()).sum::<f64>() / n;
            ma.total_cmp(&mb).then(b.cmp(&a))
        })
        .expect("non-empty");
    let (mean, std) = average_normalized(&fits, anchor);
    Ok(RefitOutcome { classes: retained.to_vec(), elements, anchor, mean, std })
}

fn observables_for(dataset: &Dataset, candidates: &[OperatorClass], cfg: &FitConfig) -> Vec<OperatorClass> {
    if cfg.least_squares {
        let s = candidates.iter().map(|c| c.support()).max().unwrap_or(1);
        dataset.catalog.classes().iter().filter(|c| c.support() <= s).cloned().collect()
    } else {
        candidates.to_vec()
    }
}

/// Which values feed the candidate ranking.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreScale {
    /// Per-class standardized values.
    Normalized,
    Raw,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stage {
    pub support: usize,
    /// Candidate count after adding new terms (survivors included).
    pub total: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReconstructConfig {
    pub s0: usize,
    pub k0: usize,
    pub steps: Vec<Stage>,
    pub fit: FitConfig,
    pub prune: PruneConfig,
    pub score_scale: ScoreScale,
}

impl Default for ReconstructConfig {
    fn default() -> Self {
        Self {
            s0: 3,
            k0: 48,
            steps: Vec::new(),
            fit: FitConfig::default(),
            prune: PruneConfig::default(),
            score_scale: ScoreScale::Raw,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub support: usize,
    pub candidates: Vec<String>,
    pub anchor: String,
    pub dropped: Vec<DroppedTerm>,
    pub converged: bool,
    pub max_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// Anchor-normalized coefficients averaged over elements.
    pub ansatz: HamiltonianAnsatz,
    /// Spread of the normalized coefficients across elements, aligned with the ansatz terms.
    pub std: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub stages: Vec<StageReport>,
    /// Final per-element fits, coefficients aligned with the ansatz terms.
    pub elements: Vec<ElementFit>,
}

impl FitReport {
    /// The averaged ansatz rescaled to element `i`'s anchor coefficient (`beta * a` units).
    pub fn element_ansatz(&self, i: usize) -> Result<HamiltonianAnsatz> {
        let e = self.elements.get(i).ok_or_else(|| Error::Domain(format!("no element {i}")))?;
        let anchor = self.ansatz.anchor().ok_or_else(|| Error::Domain("ansatz has no anchor".into()))?;
        let pos = self.ansatz.terms().iter().position(|t| t.pattern == anchor).expect("anchor is a term");
        Ok(self.ansatz.scaled(e.coefficients[pos]))
    }

    /// Element `i`'s own fit in `beta * a` units.
    pub fn element_fit_ansatz(&self, i: usize) -> Result<HamiltonianAnsatz> {
        let e = self.elements.get(i).ok_or_else(|| Error::Domain(format!("no element {i}")))?;
        HamiltonianAnsatz::from_classes(&self.ansatz.classes(), &e.coefficients)
    }

    /// The averaged ansatz in energy units, taking each element's `beta0` as
    /// its temperature: the scale is the mean of `c_anchor / beta0`.
    pub fn energy_units(&self) -> Result<HamiltonianAnsatz> {
        if self.elements.is_empty() {
            return domain("report has no elements");
        }
        let anchor = self.ansatz.anchor().ok_or_else(|| Error::Domain("ansatz has no anchor".into()))?;
        let pos = self.ansatz.terms().iter().position(|t| t.pattern == anchor).expect("anchor is a term");
        let scale = self.elements.iter().map(|e| e.coefficients[pos] / e.beta0).sum::<f64>() / self.elements.len() as f64;
        Ok(self.ansatz.scaled(scale))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn coefficients_csv(&self) -> String {
        self.ansatz.to_csv(Some(&self.std))
    }
}

fn scoring_rows(dataset: &Dataset, scale: ScoreScale) -> Result<Vec<Vec<f64>>> {
    match scale {
        ScoreScale::Normalized => dataset.normalized_matrix(),
        ScoreScale::Raw => Ok(dataset.value_matrix()),
    }
}

/// Candidate scoring, fitting and ghost pruning with iterative support growth.
///
/// `latent` holds one coordinate per element (a one-neuron embedding).
pub fn iterative_reconstruct(dataset: &Dataset, latent: &[f64], cfg: &ReconstructConfig) -> Result<FitReport> {
    if dataset.len() < 3 {
        return domain(format!("reconstruction needs at least 3 elements, found {}", dataset.len()));
    }
    let catalog = &dataset.catalog;
    if cfg.s0 == 0 || cfg.s0 > catalog.max_support() {
        return domain(format!("initial support {} outside 1..={}", cfg.s0, catalog.max_support()));
    }
    let mut last_support = cfg.s0;
    for st in &cfg.steps {
        if st.support <= last_support || st.support > catalog.max_support() {
            return domain(format!("stage support {} must grow and stay within the measured {}", st.support, catalog.max_support()));
        }
        last_support = st.support;
    }
    let rows = scoring_rows(dataset, cfg.score_scale)?;
    let model = ThermalModel::new(dataset.geometry());

    let mut stages = Vec::new();
    let mut survivors: Vec<OperatorClass> = Vec::new();
    let mut warm: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); dataset.len()];
    let schedule: Vec<(usize, usize, bool)> = std::iter::once((cfg.s0, cfg.k0, true))
        .chain(cfg.steps.iter().map(|s| (s.support, s.total, false)))
        .collect();
    for (support, count, first) in schedule {
        let pool: Vec<usize> = catalog
            .classes()
            .iter()
            .filter(|c| if first { c.support() <= support } else { c.support() == support })
            .map(|c| c.id)
            .collect();
        let scores = latent_gradient_scores(&rows, latent, &pool)?;
        let fresh = if first { count } else { count.saturating_sub(survivors.len()) };
        let mut candidates = survivors.clone();
        candidates.extend(select_candidates(&scores, fresh).into_iter().map(|id| catalog.classes()[id].clone()));
        candidates.sort_by_key(|c| c.id);
        if candidates.is_empty() {
            return domain("no candidates selected");
        }
        let score_of: BTreeMap<usize, f64> = scores.iter().map(|s| (s.class_id, s.avg_abs_gradient)).collect();
        let fallback: Vec<f64> = candidates.iter().map(|c| 0.1 * score_of.get(&c.id).copied().unwrap_or(0.0).signum()).collect();
        let initial: Vec<Vec<f64>> = warm.iter().map(|w| candidates.iter().map(|c| w.get(&c.id).copied().unwrap_or(0.0)).collect()).collect();
        let observables = observables_for(dataset, &candidates, &cfg.fit);
        let fits = fit_elements(&model, dataset, &candidates, &observables, &initial, &fallback, &cfg.fit)?;
        let coeffs: Vec<Vec<f64>> = fits.iter().map(|f| f.coefficients.clone()).collect();
        let pruned = prune_ghosts(&candidates, &coeffs, &cfg.prune)?;
        for (w, f) in warm.iter_mut().zip(&fits) {
            *w = candidates.iter().map(|c| c.id).zip(f.coefficients.iter().copied()).collect();
        }
        stages.push(StageReport {
            support,
            candidates: candidates.iter().map(|c| c.label()).collect(),
            anchor: catalog.classes()[pruned.anchor].label(),
            dropped: pruned.dropped.clone(),
            converged: fits.iter().all(|f| f.converged),
            max_residual: fits.iter().map(|f| f.residual).fold(0.0, f64::max),
        });
        survivors = pruned.retained.iter().map(|&id| catalog.classes()[id].clone()).collect();
    }

    let initial: Vec<Vec<f64>> = warm.iter().map(|w| survivors.iter().map(|c| w.get(&c.id).copied().unwrap_or(0.0)).collect()).collect();
    let refit = refit(&model, dataset, &survivors, Some(&initial), &cfg.fit)?;
    let anchor = refit.classes[refit.anchor].label();
    // reorder into ansatz term order
    let ansatz = HamiltonianAnsatz::from_classes(&refit.classes, &refit.mean)?.with_anchor(Some(anchor));
    let pos: Vec<usize> = ansatz
        .terms()
        .iter()
        .map(|t| refit.classes.iter().position(|c| c.label() == t.pattern).expect("same classes"))
        .collect();
    let std = pos.iter().map(|&p| refit.std[p]).collect();
    let elements: Vec<ElementFit> = refit
        .elements
        .into_iter()
        .map(|mut e| {
            e.coefficients = pos.iter().map(|&p| e.coefficients[p]).collect();
            e
        })
        .collect();
    Ok(FitReport {
        ansatz,
        std,
        residual: elements.iter().map(|e| e.residual).fold(0.0, f64::max),
        iterations: elements.iter().map(|e| e.iterations).max().unwrap_or(0),
        converged: elements.iter().all(|e| e.converged),
        stages,
        elements,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportError {
    pub support: usize,
    pub error: f64,
}

/// Per-support relative error against a static benchmark Hamiltonian.
///
/// `support 1` compares the field `h_z` with `a_Z`; support `l > 1` compares
/// the exchange `J_r` (`r = l - 1`, summed over the XX and YY channels) with
/// `a_{XI..IX} + a_{YI..IY}`. The ansatz must be in energy units.
pub fn relative_error(ansatz: &HamiltonianAnsatz, truth: &ProtocolSpec, geometry: ChainGeometry) -> Result<Vec<SupportError>> {
    let Generators::Static(_) = build_hamiltonian(truth, geometry)? else {
        return domain("relative errors are defined for static benchmarks only");
    };
    let max_support = ansatz.max_support().max(1);
    let (h_z, exchange): (f64, Box<dyn Fn(usize) -> f64>) = match *truth {
        ProtocolSpec::StaticLongRange { j, delta, h_z } => {
            let n = geometry.n_sites();
            (h_z, Box::new(move |r: usize| if r < n / 2 { 2.0 * j / (r as f64).powf(delta) } else { 0.0 }))
        }
        ProtocolSpec::StaticLocal { range, j1, j2, h_z } => (h_z, Box::new(move |r: usize| if r < range { j1 + j2 } else { 0.0 })),
        _ => unreachable!("static variants only"),
    };
    let mut out = Vec::new();
    if h_z != 0.0 {
        out.push(SupportError { support: 1, error: (h_z - ansatz.coefficient("Z")).abs() / h_z.abs() });
    }
    for l in 2..=max_support {
        let r = l - 1;
        let truth = exchange(r);
        if truth == 0.0 {
            continue;
        }
        let gap = "I".repeat(r - 1);
        let fitted = ansatz.coefficient(&format!("X{gap}X")) + ansatz.coefficient(&format!("Y{gap}Y"));
        out.push(SupportError { support: l, error: (truth - fitted).abs() / truth.abs() });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportWeightProfile {
    /// `mean_abs[l-1]` is the average `|c|` over terms of support `l`.
    pub mean_abs: Vec<f64>,
    /// `mean_abs[l-1] / mean_abs[0]` (NaN when `mean_abs[0] = 0`).
    pub ratios: Vec<f64>,
}

/// How to average weights within a support.
#[derive(Clone, Debug, PartialEq)]
pub enum WeightAverage {
    /// Over the terms present in the ansatz.
    Retained,
    /// Over a candidate count per support (`counts[l-1]`), pruned terms counting as zero.
    Candidates(Vec<usize>),
}

pub fn support_weight_profile(ansatz: &HamiltonianAnsatz, max_support: usize, average: &WeightAverage) -> SupportWeightProfile {
    let mut sums = vec![0.0; max_support];
    let mut counts = vec![0usize; max_support];
    for t in ansatz.terms() {
        if t.support <= max_support {
            sums[t.support - 1] += t.coefficient.abs();
            counts[t.support - 1] += 1;
        }
    }
    if let WeightAverage::Candidates(c) = average {
        for (l, n) in counts.iter_mut().enumerate() {
            *n = c.get(l).copied().unwrap_or(0).max(*n);
        }
    }
    let mean_abs: Vec<f64> = sums.iter().zip(&counts).map(|(s, &n)| if n == 0 { 0.0 } else { s / n as f64 }).collect();
    let base = mean_abs.first().copied().unwrap_or(0.0);
    let ratios = mean_abs.iter().map(|m| if base == 0.0 { f64::NAN } else { m / base }).collect();
    SupportWeightProfile { mean_abs, ratios }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_static_dataset, MeasurementMode};

    fn classes(patterns: &[&str]) -> Vec<OperatorClass> {
        patterns.iter().enumerate().map(|(i, p)| OperatorClass::parse(i, p).unwrap()).collect()
    }

    #[test]
    fn ansatz_ordering_and_lookup() {
        let a = HamiltonianAnsatz::new([("zz", 1.0), ("X", 2.0), ("XIZ", 0.5), ("Z", 0.1)]).unwrap();
        let order: Vec<&str> = a.terms().iter().map(|t| t.pattern.as_str()).collect();
        assert_eq!(order, ["X", "Z", "ZZ", "XIZ"]);
        assert_eq!(a.coefficient("Y"), 0.0);
        assert!(HamiltonianAnsatz::new([("X", 1.0), ("x", 1.0)]).is_err());
        assert!(HamiltonianAnsatz::new([("IX", 1.0)]).is_err());
        let n = a.normalized_by("X").unwrap();
        assert_eq!(n.coefficient("X"), 1.0);
        assert_eq!(n.anchor(), Some("X"));
    }

    #[test]
    fn scores_rank_field_first_and_ignore_sign() {
        // H = sum Z: only the Z channel varies (-tanh beta), X and Y stay zero
        let betas: Vec<f64> = (1..=8).map(|k| 0.05 * k as f64).collect();
        let rows: Vec<Vec<f64>> = betas.iter().map(|b| vec![0.0, 0.0, -b.tanh()]).collect();
        let s = latent_gradient_scores(&rows, &betas, &[0, 1, 2]).unwrap();
        assert_eq!(s[0].class_id, 2);
        assert_eq!(s[2].avg_abs_gradient, 0.0);
        assert_eq!((s[1].class_id, s[2].class_id), (0, 1));
        let flipped: Vec<f64> = betas.iter().map(|b| -b).collect();
        let t = latent_gradient_scores(&rows, &flipped, &[0, 1, 2]).unwrap();
        assert!((s[0].avg_abs_gradient - t[0].avg_abs_gradient).abs() < 1e-12);
        assert!(latent_gradient_scores(&rows, &[1.0; 8], &[0]).is_err());
        assert!(select_candidates(&s, 0).is_empty());
        assert_eq!(select_candidates(&s, 10).len(), 3);
    }

    #[test]
    fn prune_examples() {
        let cs = classes(&["X", "Z", "YY"]);
        let fits = vec![vec![1.0, 0.5, 0.2], vec![2.0, 1.0, -0.4], vec![1.5, 0.75, 0.3], vec![1.0, 0.5, -0.2]];
        let out = prune_ghosts(&cs, &fits, &PruneConfig::default()).unwrap();
        assert_eq!(out.anchor, 0);
        assert_eq!(out.retained, vec![0, 1]);
        assert_eq!(out.dropped[0].pattern, "YY");
        // permutation invariance
        let mut rev = fits.clone();
        rev.reverse();
        assert_eq!(prune_ghosts(&cs, &rev, &PruneConfig::default()).unwrap().retained, out.retained);
        assert!(prune_ghosts(&cs, &fits[..2], &PruneConfig::default()).is_err());
    }

    #[test]
    fn prune_negligible_terms() {
        let cs = classes(&["X", "Z"]);
        let fits = vec![vec![1.0, 1e-12], vec![2.0, 2.1e-12], vec![3.0, 2.9e-12]];
        let out = prune_ghosts(&cs, &fits, &PruneConfig::default()).unwrap();
        assert_eq!(out.retained, vec![0]);
        assert_eq!(out.dropped[0].reason, DropReason::Negligible);
    }

    #[test]
    fn support_profile() {
        let a = HamiltonianAnsatz::new([("X", 2.0), ("Z", -1.0)]).unwrap();
        let p = support_weight_profile(&a, 3, &WeightAverage::Retained);
        assert_eq!(p.mean_abs, vec![1.5, 0.0, 0.0]);
        assert_eq!(p.ratios, vec![1.0, 0.0, 0.0]);
        let q = support_weight_profile(&a, 1, &WeightAverage::Candidates(vec![3]));
        assert_eq!(q.mean_abs, vec![1.0]);
    }

    #[test]
    fn relative_error_of_perfect_ansatz() {
        let g = ChainGeometry::new(10).unwrap();
        let spec = ProtocolSpec::StaticLongRange { j: 1.0, delta: 3.0, h_z: 0.2 };
        let a = HamiltonianAnsatz::new([
            ("Z", 0.2),
            ("XX", 1.0),
            ("YY", 1.0),
            ("XIX", 0.125),
            ("YIY", 0.125),
            ("XIIX", 1.0 / 27.0),
            ("YIIY", 1.0 / 27.0),
        ])
        .unwrap();
        let errs = relative_error(&a, &spec, g).unwrap();
        assert_eq!(errs.len(), 4);
        assert!(errs.iter().all(|e| e.error < 1e-15));
    }

    #[test]
    fn pipeline_recovers_local_model() {
        let g = ChainGeometry::new(6).unwrap();
        let spec = ProtocolSpec::StaticLocal { range: 2, j1: 1.0, j2: 0.7, h_z: 0.2 };
        let betas: Vec<f64> = (1..=6).map(|k| 0.08 * k as f64).collect();
        let ds = generate_static_dataset(&spec, g, &betas, 2, MeasurementMode::Exact).unwrap().normalize(0.8, 0).unwrap();
        let cfg = ReconstructConfig { s0: 2, k0: 12, ..ReconstructConfig::default() };
        let report = iterative_reconstruct(&ds, &betas, &cfg).unwrap();
        assert!(report.converged);
        let kept: Vec<&str> = report.ansatz.terms().iter().map(|t| t.pattern.as_str()).collect();
        assert_eq!(kept, ["Z", "XX", "YY"]);
        assert_eq!(report.ansatz.anchor(), Some("XX"));
        assert!((report.ansatz.coefficient("YY") - 0.7).abs() < 1e-7);
        assert!((report.ansatz.coefficient("Z") - 0.2).abs() < 1e-7);
        let first = report.element_ansatz(0).unwrap();
        assert!((first.coefficient("XX") - betas[0]).abs() < 1e-7);
        let energy = report.energy_units().unwrap();
        assert!((energy.coefficient("XX") - 1.0).abs() < 1e-7);
    }
}
