//! Measurement datasets: generation, normalization and JSON-lines storage.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{self, eigendecompose, measure, BlockSpectrum, QuantumState, Space};
use crate::error::{domain, Error, Result};
use crate::pauli::{enumerate_classes, Catalog, ChainGeometry};
use crate::protocols::{build_hamiltonian, random_rotation, Drive, ProtocolSpec};

pub const FORMAT_VERSION: &str = "hamlearn-dataset/1";

/// One state's per-site expectation values over the whole catalog.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataElement {
    pub element_id: usize,
    pub protocol_id: String,
    pub beta0: f64,
    pub cycle_n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation_seed: Option<u64>,
    /// Indexed by class id.
    pub values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum MeasurementMode {
    Exact,
    Typicality { samples: usize, seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Split {
    Train,
    Test,
}

/// Per-class standardization computed on the training split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Normalization {
    pub train_fraction: f64,
    pub seed: u64,
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    /// Split of each element, in element order.
    pub split: Vec<Split>,
}

/// Dimension-free channels below this standard deviation are only centered.
pub const MIN_STD: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub catalog: Catalog,
    pub spec: Option<ProtocolSpec>,
    pub mode: MeasurementMode,
    pub seeds: Vec<u64>,
    pub elements: Vec<DataElement>,
    pub normalization: Option<Normalization>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    n_sites: usize,
    max_support: usize,
    classes: Vec<String>,
    #[serde(default)]
    spec: Option<ProtocolSpec>,
    mode: MeasurementMode,
    #[serde(default)]
    seeds: Vec<u64>,
    #[serde(default)]
    normalization: Option<Normalization>,
}

impl Dataset {
    pub fn empty(catalog: Catalog, spec: Option<ProtocolSpec>, mode: MeasurementMode) -> Self {
        Self { catalog, spec, mode, seeds: Vec::new(), elements: Vec::new(), normalization: None }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn geometry(&self) -> ChainGeometry {
        self.catalog.geometry()
    }

    /// Elements measured at cycle `n` (normalization is dropped).
    pub fn at_cycle(&self, n: usize) -> Dataset {
        let mut out = Self::empty(self.catalog.clone(), self.spec.clone(), self.mode);
        out.seeds = self.seeds.clone();
        out.elements = self.elements.iter().filter(|e| e.cycle_n == n).cloned().collect();
        out
    }

    pub fn cycles(&self) -> Vec<usize> {
        let mut c: Vec<usize> = self.elements.iter().map(|e| e.cycle_n).collect();
        c.sort_unstable();
        c.dedup();
        c
    }

    /// One element per initial state holding the mean over cycles in
    /// `[start, start + len)`; the result is labelled with cycle `start`.
    pub fn window_average(&self, start: usize, len: usize) -> Result<Dataset> {
        if len == 0 {
            return domain("averaging window must be at least one cycle");
        }
        let mut out = Self::empty(self.catalog.clone(), self.spec.clone(), self.mode);
        out.seeds = self.seeds.clone();
        let mut counts: Vec<usize> = Vec::new();
        for e in self.elements.iter().filter(|e| e.cycle_n >= start && e.cycle_n < start + len) {
            let slot = out.elements.iter().position(|o| o.beta0 == e.beta0 && o.perturbation_seed == e.perturbation_seed);
            match slot {
                Some(k) => {
                    out.elements[k].values.iter_mut().zip(&e.values).for_each(|(a, b)| *a += b);
                    counts[k] += 1;
                }
                None => {
                    let mut first = e.clone();
                    first.element_id = out.elements.len();
                    first.cycle_n = start;
                    out.elements.push(first);
                    counts.push(1);
                }
            }
        }
        if counts.iter().any(|&c| c != len) {
            return domain(format!("cycles {start}..{} are not all present for every initial state", start + len));
        }
        for e in &mut out.elements {
            e.values.iter_mut().for_each(|v| *v /= len as f64);
        }
        Ok(out)
    }

    /// Raw values, one row per element.
    pub fn value_matrix(&self) -> Vec<Vec<f64>> {
        self.elements.iter().map(|e| e.values.clone()).collect()
    }

    /// Standardizes every channel with statistics of a seeded training split.
    pub fn normalize(&self, train_fraction: f64, seed: u64) -> Result<Dataset> {
        let m = self.len();
        if m < 2 {
            return domain(format!("normalization needs at least 2 elements, found {m}"));
        }
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return domain(format!("train fraction {train_fraction} must lie in (0, 1)"));
        }
        let n_train = ((train_fraction * m as f64).round() as usize).clamp(1, m - 1);
        let mut order: Vec<usize> = (0..m).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut split = vec![Split::Test; m];
        for &i in &order[..n_train] {
            split[i] = Split::Train;
        }
        let d = self.catalog.len();
        let train: Vec<&DataElement> = self.elements.iter().zip(&split).filter(|(_, s)| **s == Split::Train).map(|(e, _)| e).collect();
        let mut mean = vec![0.0; d];
        let mut scale = vec![1.0; d];
        for c in 0..d {
            let mu = train.iter().map(|e| e.values[c]).sum::<f64>() / n_train as f64;
            let var = train.iter().map(|e| (e.values[c] - mu).powi(2)).sum::<f64>() / n_train as f64;
            mean[c] = mu;
            if var.sqrt() >= MIN_STD {
                scale[c] = var.sqrt();
            }
        }
        let mut out = self.clone();
        out.normalization = Some(Normalization { train_fraction, seed, mean, scale, split });
        Ok(out)
    }

    /// Standardized values (requires [`Dataset::normalize`]).
    pub fn normalized_matrix(&self) -> Result<Vec<Vec<f64>>> {
        let norm = self.normalization.as_ref().ok_or_else(|| Error::Domain("dataset is not normalized".into()))?;
        Ok(self
            .elements
            .iter()
            .map(|e| e.values.iter().zip(norm.mean.iter().zip(&norm.scale)).map(|(v, (m, s))| (v - m) / s).collect())
            .collect())
    }

    /// Normalized rows of one split.
    pub fn split_rows(&self, which: Split) -> Result<Vec<Vec<f64>>> {
        let rows = self.normalized_matrix()?;
        let split = &self.normalization.as_ref().expect("checked by normalized_matrix").split;
        Ok(rows.into_iter().zip(split).filter(|(_, s)| **s == which).map(|(r, _)| r).collect())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        let header = Header {
            format: FORMAT_VERSION.to_string(),
            n_sites: self.geometry().n_sites(),
            max_support: self.catalog.max_support(),
            classes: self.catalog.classes().iter().map(|c| c.label()).collect(),
            spec: self.spec.clone(),
            mode: self.mode,
            seeds: self.seeds.clone(),
            normalization: self.normalization.clone(),
        };
        serde_json::to_writer(&mut *w, &header)?;
        writeln!(w)?;
        for e in &self.elements {
            serde_json::to_writer(&mut *w, e)?;
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Dataset> {
        Self::read_from(BufReader::new(File::open(path)?))
    }

    pub fn read_from(r: impl BufRead) -> Result<Dataset> {
        let mut lines = r.lines();
        let first = lines.next().ok_or(Error::Format { line: 1, message: "missing header".into() })??;
        let peek: serde_json::Value =
            serde_json::from_str(&first).map_err(|e| Error::Format { line: 1, message: e.to_string() })?;
        let found = peek.get("format").and_then(|v| v.as_str()).unwrap_or("");
        if found != FORMAT_VERSION {
            return Err(Error::Version { expected: FORMAT_VERSION.into(), found: found.into() });
        }
        let header: Header = serde_json::from_value(peek).map_err(|e| Error::Format { line: 1, message: e.to_string() })?;
        let geometry = ChainGeometry::new(header.n_sites).map_err(|e| Error::Format { line: 1, message: e.to_string() })?;
        let catalog = enumerate_classes(header.max_support, geometry).map_err(|e| Error::Format { line: 1, message: e.to_string() })?;
        let expected: Vec<String> = catalog.classes().iter().map(|c| c.label()).collect();
        if expected != header.classes {
            return Err(Error::CatalogMismatch(format!(
                "header lists {} classes, the S={} catalog on {} sites has {}",
                header.classes.len(),
                header.max_support,
                header.n_sites,
                expected.len()
            )));
        }
        let mut elements = Vec::new();
        for (i, line) in lines.enumerate() {
            let line_no = i + 2;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let e: DataElement =
                serde_json::from_str(&line).map_err(|err| Error::Format { line: line_no, message: err.to_string() })?;
            if e.values.len() != catalog.len() {
                return Err(Error::CatalogMismatch(format!(
                    "line {line_no}: {} values for a catalog of {} classes",
                    e.values.len(),
                    catalog.len()
                )));
            }
            elements.push(e);
        }
        if let Some(n) = &header.normalization {
            if n.split.len() != elements.len() || n.mean.len() != catalog.len() || n.scale.len() != catalog.len() {
                return Err(Error::Format { line: 1, message: "normalization does not match the dataset".into() });
            }
        }
        Ok(Dataset {
            catalog,
            spec: header.spec,
            mode: header.mode,
            seeds: header.seeds,
            elements,
            normalization: header.normalization,
        })
    }

    /// Value matrix as CSV: `element_id,beta0,cycle_n,<class labels...>`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("element_id,beta0,cycle_n");
        for c in self.catalog.classes() {
            s.push(',');
            s.push_str(&c.label());
        }
        s.push('\n');
        for e in &self.elements {
            let _ = write!(s, "{},{},{}", e.element_id, e.beta0, e.cycle_n);
            for v in &e.values {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
        s
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return domain("temperature grid is empty");
    }
    if grid.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
        return domain("inverse temperatures must be finite and >= 0");
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return domain("temperature grid must be strictly ascending");
    }
    Ok(())
}

/// Largest chain measured with exact densities by default.
pub const EXACT_SITE_LIMIT: usize = 12;

/// One Gibbs state of the static Hamiltonian per inverse temperature.
pub fn generate_static_dataset(
    spec: &ProtocolSpec,
    geometry: ChainGeometry,
    beta_grid: &[f64],
    max_support: usize,
    mode: MeasurementMode,
) -> Result<Dataset> {
    check_grid(beta_grid)?;
    let catalog = enumerate_classes(max_support, geometry)?;
    let gens = build_hamiltonian(spec, geometry)?;
    let h = gens.initial_hamiltonian()?;
    let mut ds = Dataset::empty(catalog, Some(spec.clone()), mode);
    match mode {
        MeasurementMode::Exact => {
            let space = Space::momentum(geometry);
            let spectrum = BlockSpectrum::of(&space, &h)?;
            for (i, &beta) in beta_grid.iter().enumerate() {
                let state = QuantumState::thermal(&spectrum, beta)?;
                let values = measure(&space, &state, ds.catalog.classes())?;
                ds.elements.push(element(i, spec, beta, 0, None, values));
            }
        }
        MeasurementMode::Typicality { samples, seed } => {
            let space = Space::full(geometry);
            let decomp = eigendecompose(&h.to_dense())?;
            ds.seeds.push(seed);
            for (i, &beta) in beta_grid.iter().enumerate() {
                let ens = engine::typicality_thermal_samples(&decomp, beta, samples, seed.wrapping_add(i as u64))?;
                let values = measure(&space, &QuantumState::Typical(ens), ds.catalog.classes())?;
                ds.elements.push(element(i, spec, beta, 0, None, values));
            }
        }
    }
    Ok(ds)
}

fn element(id: usize, spec: &ProtocolSpec, beta0: f64, cycle_n: usize, seed: Option<u64>, values: Vec<f64>) -> DataElement {
    DataElement { element_id: id, protocol_id: spec.name().to_string(), beta0, cycle_n, perturbation_seed: seed, values }
}

/// Options for driven datasets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DrivenOptions {
    pub beta0_grid: Vec<f64>,
    /// Stroboscopic checkpoints (cycles, or elementary blocks for random drives).
    pub cycles: Vec<usize>,
    /// Rotation amplitude for perturbed initial states; `None` keeps them thermal.
    #[serde(default)]
    pub rotation: Option<f64>,
    /// Seeds the rotations (element `i` uses `seed + i`) and the random drive sequence.
    #[serde(default)]
    pub seed: u64,
}

/// Thermal starts (optionally rotated) evolved by the drive and measured at each checkpoint.
pub fn generate_driven_dataset(
    spec: &ProtocolSpec,
    geometry: ChainGeometry,
    options: &DrivenOptions,
    max_support: usize,
    mode: MeasurementMode,
) -> Result<Dataset> {
    check_grid(&options.beta0_grid)?;
    if !spec.is_driven() {
        return domain(format!("{} is not a driven protocol", spec.name()));
    }
    let mut cycles = options.cycles.clone();
    cycles.sort_unstable();
    cycles.dedup();
    if cycles.is_empty() {
        return domain("no measurement cycles requested");
    }
    let catalog = enumerate_classes(max_support, geometry)?;
    let h0 = build_hamiltonian(spec, geometry)?.initial_hamiltonian()?;
    let space = match mode {
        MeasurementMode::Exact => Space::momentum(geometry),
        MeasurementMode::Typicality { .. } => Space::full(geometry),
    };
    let last = *cycles.last().expect("non-empty");
    let mut drive = Drive::new(spec, &space, last, options.seed)?;
    let mut ds = Dataset::empty(catalog, Some(spec.clone()), mode);
    ds.seeds.push(options.seed);
    let spectrum = BlockSpectrum::of(&space, &h0)?;
    let decomp = match mode {
        MeasurementMode::Typicality { .. } => Some(eigendecompose(&h0.to_dense())?),
        MeasurementMode::Exact => None,
    };
    let mut next_id = 0;
    for (i, &beta0) in options.beta0_grid.iter().enumerate() {
        let mut state = match (mode, &decomp) {
            (MeasurementMode::Typicality { samples, seed }, Some(d)) => {
                QuantumState::Typical(engine::typicality_thermal_samples(d, beta0, samples, seed.wrapping_add(i as u64))?)
            }
            _ => QuantumState::thermal(&spectrum, beta0)?,
        };
        let perturbation = match options.rotation {
            Some(theta) => {
                let s = options.seed.wrapping_add(i as u64);
                let (_, u) = random_rotation(&space, theta, s)?;
                state = engine::evolve(&state, &[&u])?;
                Some(s)
            }
            None => None,
        };
        let classes = ds.catalog.classes().to_vec();
        let mut rows = Vec::new();
        drive.stroboscopic(&state, &cycles, |n, s| {
            rows.push((n, measure(&space, s, &classes)?));
            Ok(())
        })?;
        for (n, values) in rows {
            ds.elements.push(element(next_id, spec, beta0, n, perturbation, values));
            next_id += 1;
        }
    }
    Ok(ds)
}
