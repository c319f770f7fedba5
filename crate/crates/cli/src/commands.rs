use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use hamlearn::autoencoder::{bottleneck_sweep, encode, intrinsic_dimension, train_best};
use hamlearn::dataset::{generate_driven_dataset, generate_static_dataset, Dataset, DrivenOptions, MeasurementMode};
use hamlearn::engine::{domain_wall, magnetization_trajectory, measure, BlockSpectrum, QuantumState, Space};
use hamlearn::pauli::ChainGeometry;
use hamlearn::protocols::{bch_effective_hamiltonian, build_hamiltonian, energy_trajectory, Drive, ProtocolSpec};
use hamlearn::reconstruct::{
    dominant_single_site, extract_beta, iterative_reconstruct, support_weight_profile, FitReport, HamiltonianAnsatz,
    TrajectoryModel, WeightAverage,
};
use serde_json::json;

use crate::config::RunConfig;
use crate::{Failure, VERSION};

fn write(out: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<(), Failure> {
    fs::write(out.join(name), contents).map_err(|e| Failure::Runtime(format!("cannot write {name}: {e}")))
}

fn geometry(cfg: &RunConfig) -> Result<ChainGeometry, Failure> {
    ChainGeometry::new(cfg.n_sites).map_err(|e| Failure::Config(e.to_string()))
}

fn mode(cfg: &RunConfig) -> MeasurementMode {
    match cfg.dataset.typicality_samples {
        Some(samples) => MeasurementMode::Typicality { samples, seed: cfg.seed },
        None => MeasurementMode::Exact,
    }
}

fn load_dataset(path: &Path, cfg: &RunConfig) -> Result<Dataset, Failure> {
    let ds = Dataset::load(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    if ds.is_empty() {
        return Err(Failure::Config(format!("{}: dataset has no elements", path.display())));
    }
    if ds.normalization.is_some() {
        Ok(ds)
    } else {
        Ok(ds.normalize(cfg.dataset.train_fraction, cfg.seed)?)
    }
}

/// Static protocols give one Gibbs state per temperature; driven ones are
/// measured at the configured cycles.
fn build_dataset(cfg: &RunConfig) -> Result<Dataset, Failure> {
    let g = geometry(cfg)?;
    let d = &cfg.dataset;
    let ds = if cfg.protocol.is_driven() {
        let opts = DrivenOptions { beta0_grid: d.beta_grid.clone(), cycles: d.cycles.clone(), rotation: d.rotation, seed: cfg.seed };
        generate_driven_dataset(&cfg.protocol, g, &opts, d.max_support, mode(cfg))?
    } else {
        generate_static_dataset(&cfg.protocol, g, &d.beta_grid, d.max_support, mode(cfg))?
    };
    Ok(ds)
}

pub fn generate(cfg: &RunConfig, out: &Path) -> Result<(), Failure> {
    let ds = build_dataset(cfg)?.normalize(cfg.dataset.train_fraction, cfg.seed)?;
    ds.save(&out.join("dataset.jsonl"))?;
    let manifest = json!({
        "version": VERSION,
        "command": "generate",
        "preset": cfg.preset,
        "protocol": cfg.protocol.name(),
        "n_sites": cfg.n_sites,
        "max_support": ds.catalog.max_support(),
        "classes": ds.catalog.len(),
        "elements": ds.len(),
        "cycles": ds.cycles(),
        "file": "dataset.jsonl",
    });
    write(out, "manifest.json", serde_json::to_string_pretty(&manifest).expect("json") + "\n")?;
    println!("generated {} elements x {} classes", ds.len(), ds.catalog.len());
    Ok(())
}

pub fn autoencode(cfg: &RunConfig, out: &Path, dataset: &Path) -> Result<(), Failure> {
    let ds = load_dataset(dataset, cfg)?;
    let a = &cfg.autoencoder;
    let curve = bottleneck_sweep(&ds, &a.widths, a.restarts, &a.train)?;
    let d = intrinsic_dimension(&curve, a.drop_ratio, a.floor)?;
    let net = train_best(&ds, a.latent_width, a.restarts, &a.train)?;
    let embedding = encode(&net.params, &ds)?;
    write(out, "sweep.csv", curve.to_csv())?;
    write(out, "embedding.csv", embedding.to_csv())?;
    net.params.save(&out.join("params.bin"))?;
    let verdict = match d {
        Some(k) => format!("d={k}"),
        None => "undetermined".to_string(),
    };
    let summary = json!({
        "dimension": d,
        "verdict": verdict,
        "drop_ratio": a.drop_ratio,
        "floor": a.floor,
        "latent_width": a.latent_width,
        "latent_test_error": net.test_error,
    });
    write(out, "dimension.json", serde_json::to_string_pretty(&summary).expect("json") + "\n")?;
    println!("intrinsic dimension: {verdict}");
    Ok(())
}

/// First coordinate of each row of an embedding CSV.
fn read_embedding(path: &Path) -> Result<Vec<f64>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate().skip(1) {
        let value = line.split(',').nth(1).and_then(|v| v.trim().parse::<f64>().ok());
        match value {
            Some(v) => out.push(v),
            None => return Err(Failure::Config(format!("{} line {}: expected `element,s0,...`", path.display(), k + 1))),
        }
    }
    Ok(out)
}

pub fn reconstruct(cfg: &RunConfig, out: &Path, dataset: &Path, embedding: &Path) -> Result<(), Failure> {
    let ds = load_dataset(dataset, cfg)?;
    let latent = read_embedding(embedding)?;
    if latent.len() != ds.len() {
        return Err(Failure::Config(format!("embedding has {} rows for {} elements", latent.len(), ds.len())));
    }
    let report = iterative_reconstruct(&ds, &latent, &cfg.reconstruct)?;
    write(out, "fit_report.json", report.to_json()? + "\n")?;
    write(out, "coefficients.csv", report.coefficients_csv())?;
    if !report.converged {
        eprintln!("warning: fit did not converge (max residual {:.3e})", report.residual);
    }
    let spec = ds.spec.clone().unwrap_or_else(|| cfg.protocol.clone());
    if cfg.beta.enabled && spec.is_driven() {
        if ds.elements.iter().any(|e| e.perturbation_seed.is_some()) {
            eprintln!("warning: rotated initial states; skipping temperature extraction");
        } else {
            effective_temperatures(cfg, &spec, &ds, &report, out)?;
        }
    }
    println!("retained {} terms, converged {}", report.ansatz.len(), report.converged);
    Ok(())
}

/// Temperatures from the first cycles of the exact dynamics, then per-element
/// coefficients in energy units.
fn effective_temperatures(cfg: &RunConfig, spec: &ProtocolSpec, ds: &Dataset, report: &FitReport, out: &Path) -> Result<(), Failure> {
    let g = ds.geometry();
    let space = Space::momentum(g);
    let period = spec.period().expect("driven protocols have a period");
    let h0 = build_hamiltonian(spec, g)?.initial_hamiltonian()?;
    let start = BlockSpectrum::of(&space, &h0)?;
    let probe = dominant_single_site(&ds.catalog, &ds.elements[0].values)
        .ok_or_else(|| Failure::Config("the catalog has no single-site classes".into()))?;
    let cycles = &cfg.beta.cycles;
    let grid = cfg.beta_grid();
    let mut beta_csv = String::from("element,beta0,cycle,beta,objective,indeterminate\n");
    let mut coeff_csv = String::from("element,pattern,support,coefficient\n");
    for (i, e) in ds.elements.iter().enumerate() {
        let rho = start.thermal_density(e.beta0)?;
        let mut exact = Vec::new();
        let mut drive = Drive::new(spec, &space, cycles.iter().copied().max().unwrap_or(0), cfg.seed)?;
        drive.stroboscopic(&QuantumState::Mixed(rho.clone()), cycles, |_, s| {
            exact.push(measure(&space, s, std::slice::from_ref(&probe))?[0]);
            Ok(())
        })?;
        let c = report.element_ansatz(i)?;
        let model = TrajectoryModel::new(&space, &c.to_pauli_sum(g)?, &rho, &probe)?;
        let est = extract_beta(&model, cycles, &exact, period, &grid)?;
        writeln!(beta_csv, "{i},{},{},{},{},{}", e.beta0, e.cycle_n, est.beta, est.objective, est.indeterminate).expect("string");
        for t in c.scaled(1.0 / est.beta).terms() {
            writeln!(coeff_csv, "{i},{},{},{}", t.pattern, t.support, t.coefficient).expect("string");
        }
    }
    write(out, "beta.csv", beta_csv)?;
    write(out, "effective_coefficients.csv", coeff_csv)
}

pub fn bch(cfg: &RunConfig, out: &Path) -> Result<(), Failure> {
    if !matches!(cfg.protocol, ProtocolSpec::FloquetPrethermal { .. }) {
        return Err(Failure::Config(format!("bch needs the floquet-prethermal protocol, not {}", cfg.protocol.name())));
    }
    let orders: Vec<HamiltonianAnsatz> = (0..=2).map(|k| bch_effective_hamiltonian(&cfg.protocol, k)).collect::<Result<_, _>>()?;
    let mut csv = String::from("pattern,support,order0,order1,order2\n");
    for t in orders[2].terms() {
        let cols: Vec<String> = orders.iter().map(|o| o.coefficient(&t.pattern).to_string()).collect();
        writeln!(csv, "{},{},{}", t.pattern, t.support, cols.join(",")).expect("string");
    }
    write(out, "bch.csv", csv)?;
    println!("{} terms at second order", orders[2].len());
    Ok(())
}

pub fn heating_profile(cfg: &RunConfig, out: &Path) -> Result<(), Failure> {
    if !cfg.protocol.is_driven() {
        return Err(Failure::Config(format!("heating-profile needs a driven protocol, not {}", cfg.protocol.name())));
    }
    let g = geometry(cfg)?;
    let h = &cfg.heating;
    let mut starts = h.checkpoints.clone();
    starts.sort_unstable();
    starts.dedup();
    let cycles: Vec<usize> = starts.iter().flat_map(|&s| s..s + h.window).collect();
    let opts = DrivenOptions { beta0_grid: cfg.dataset.beta_grid.clone(), cycles, rotation: cfg.dataset.rotation, seed: cfg.seed };
    let ds = generate_driven_dataset(&cfg.protocol, g, &opts, h.max_support, mode(cfg))?;
    let mut csv = String::from("cycle,converged");
    for l in 1..=h.max_support {
        write!(csv, ",a{l}_over_a1").expect("string");
    }
    csv.push('\n');
    let mut reports = Vec::new();
    for &s in &starts {
        let avg = ds.window_average(s, h.window)?.normalize(cfg.dataset.train_fraction, cfg.seed)?;
        let net = train_best(&avg, 1, cfg.autoencoder.restarts, &cfg.autoencoder.train)?;
        let latent = encode(&net.params, &avg)?.first_coordinate();
        let report = iterative_reconstruct(&avg, &latent, &h.reconstruct)?;
        let p = support_weight_profile(&report.ansatz, h.max_support, &WeightAverage::Retained);
        write!(csv, "{s},{}", report.converged).expect("string");
        for r in &p.ratios {
            write!(csv, ",{r}").expect("string");
        }
        csv.push('\n');
        println!("cycle {s}: {}", p.ratios.iter().map(|r| format!("{r:.3e}")).collect::<Vec<_>>().join(" "));
        reports.push(json!({ "cycle": s, "report": report }));
    }
    write(out, "support_weights.csv", csv)?;
    write(out, "fit_reports.json", serde_json::to_string_pretty(&reports).expect("json") + "\n")?;
    write(out, "energy.csv", energy_csv(cfg, g, h.energy_until, h.energy_step)?)
}

fn energy_csv(cfg: &RunConfig, g: ChainGeometry, until: usize, step: usize) -> Result<String, Failure> {
    let checkpoints: Vec<usize> = (0..=until).step_by(step).collect();
    let mut csv = String::from("beta0,cycle,energy_per_site\n");
    for &b0 in &cfg.dataset.beta_grid {
        for (c, e) in energy_trajectory(&cfg.protocol, g, b0, &checkpoints, cfg.seed)? {
            writeln!(csv, "{b0},{c},{e}").expect("string");
        }
    }
    Ok(csv)
}

pub fn evolve(cfg: &RunConfig, out: &Path, report: Option<&Path>) -> Result<(), Failure> {
    let g = geometry(cfg)?;
    if cfg.protocol.is_driven() {
        if report.is_some() {
            return Err(Failure::Config("--report applies to static protocols only".into()));
        }
        return write(out, "energy.csv", energy_csv(cfg, g, cfg.evolve.n_cycles, cfg.evolve.cycle_step)?);
    }
    let steps = (cfg.evolve.t_max / cfg.evolve.dt).round() as usize;
    let times: Vec<f64> = (0..=steps).map(|k| k as f64 * cfg.evolve.dt).collect();
    let wall = domain_wall(g)?;
    let mut sources = vec![("exact", build_hamiltonian(&cfg.protocol, g)?.initial_hamiltonian()?)];
    if let Some(path) = report {
        let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        let fit: FitReport = serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        sources.push(("fit", fit.energy_units()?.to_pauli_sum(g)?));
    }
    let mut csv = String::from("source,t");
    for j in 0..g.n_sites() {
        write!(csv, ",z{j}").expect("string");
    }
    csv.push('\n');
    for (name, h) in &sources {
        for (t, z) in times.iter().zip(magnetization_trajectory(h, &wall, &times)?) {
            write!(csv, "{name},{t}").expect("string");
            for v in z {
                write!(csv, ",{v}").expect("string");
            }
            csv.push('\n');
        }
    }
    write(out, "magnetization.csv", csv)
}
