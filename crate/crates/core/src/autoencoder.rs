//! Bottleneck autoencoder: training, latent-width sweep, intrinsic
//! dimension and latent coordinates.
//!
//! Layers are `[D, h, h, N_L, h, h, D]` with tanh everywhere except the
//! linear read-out. The loss is the squared reconstruction error summed over
//! channels and averaged over elements.

use std::io::{BufRead, Read, Write};
use std::path::Path;

use faer::{Mat, MatRef};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Split};
use crate::error::{domain, Error, Result};

pub const PARAMS_FORMAT: &str = "hamlearn-params/1";
pub const DEFAULT_HIDDEN: usize = 400;
/// Default `err(N_L+1) / err(N_L)` above which the curve counts as flat.
pub const DEFAULT_DROP_RATIO: f64 = 0.5;

/// One affine layer; `w` is row-major `outputs x inputs`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Layer {
    fn weights(&self) -> MatRef<'_, f64> {
        MatRef::from_row_major_slice(&self.w, self.outputs, self.inputs)
    }

    fn zeros_like(&self) -> Layer {
        Layer { inputs: self.inputs, outputs: self.outputs, w: vec![0.0; self.w.len()], b: vec![0.0; self.b.len()] }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams {
    pub layers: Vec<Layer>,
}

#[derive(Serialize, Deserialize)]
struct ParamsHeader {
    format: String,
    sizes: Vec<usize>,
}

impl NetworkParams {
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].inputs];
        s.extend(self.layers.iter().map(|l| l.outputs));
        s
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    /// Width of the narrowest layer.
    pub fn latent_dim(&self) -> usize {
        self.layers[self.layers.len() / 2 - 1].outputs
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    fn zeros_like(&self) -> Self {
        Self { layers: self.layers.iter().map(Layer::zeros_like).collect() }
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.w.iter().chain(&l.b).all(|x| x.is_finite()))
    }

    /// Layer activations for a batch stored column-wise (`D x B`).
    fn forward_all(&self, x: MatRef<'_, f64>) -> Vec<Mat<f64>> {
        let last = self.layers.len() - 1;
        let mut acts = vec![x.to_owned()];
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = layer.weights() * &acts[k];
            for j in 0..z.ncols() {
                for i in 0..z.nrows() {
                    let v = z[(i, j)] + layer.b[i];
                    z[(i, j)] = if k == last { v } else { v.tanh() };
                }
            }
            acts.push(z);
        }
        acts
    }

    /// Outputs for rows of `x`.
    pub fn forward(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let x = batch(rows, self.input_dim())?;
        let y = self.forward_all(x.as_ref()).pop().expect("has layers");
        Ok(columns(&y))
    }

    /// Loss and its gradient on a batch.
    fn loss_and_gradient(&self, x: MatRef<'_, f64>) -> (f64, NetworkParams) {
        let acts = self.forward_all(x);
        let n = x.ncols() as f64;
        let out = acts.last().expect("has layers");
        let mut delta = Mat::from_fn(out.nrows(), out.ncols(), |i, j| out[(i, j)] - x[(i, j)]);
        let loss = delta.squared_norm_l2() / n;
        delta *= faer::Scale(2.0 / n);
        let mut grad = self.zeros_like();
        for k in (0..self.layers.len()).rev() {
            let a = &acts[k];
            let gw = &delta * a.transpose();
            let g = &mut grad.layers[k];
            for i in 0..g.outputs {
                for j in 0..g.inputs {
                    g.w[i * g.inputs + j] = gw[(i, j)];
                }
                g.b[i] = (0..delta.ncols()).map(|c| delta[(i, c)]).sum();
            }
            if k > 0 {
                let back = self.layers[k].weights().transpose() * &delta;
                delta = Mat::from_fn(back.nrows(), back.ncols(), |i, j| back[(i, j)] * (1.0 - a[(i, j)] * a[(i, j)]));
            }
        }
        (loss, grad)
    }

    /// Reconstruction loss of `rows` and its gradient, laid out like `self`.
    pub fn gradient(&self, rows: &[Vec<f64>]) -> Result<(f64, NetworkParams)> {
        if rows.is_empty() {
            return domain("no rows to evaluate");
        }
        let x = batch(rows, self.input_dim())?;
        Ok(self.loss_and_gradient(x.as_ref()))
    }

    /// Mean squared reconstruction error (channel sum, element mean).
    pub fn reconstruction_error(&self, rows: &[Vec<f64>]) -> Result<f64> {
        if rows.is_empty() {
            return domain("no rows to evaluate");
        }
        let x = batch(rows, self.input_dim())?;
        let y = self.forward_all(x.as_ref()).pop().expect("has layers");
        Ok((&y - &x).squared_norm_l2() / rows.len() as f64)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    /// JSON shape header line followed by little-endian f64 weights then biases, layer by layer.
    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        let header = ParamsHeader { format: PARAMS_FORMAT.into(), sizes: self.sizes() };
        writeln!(w, "{}", serde_json::to_string(&header)?)?;
        for l in &self.layers {
            for x in l.w.iter().chain(&l.b) {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    pub fn read_from(mut r: impl BufRead) -> Result<Self> {
        let mut line = String::new();
        r.read_line(&mut line)?;
        let header: ParamsHeader =
            serde_json::from_str(line.trim_end()).map_err(|e| Error::Format { line: 1, message: e.to_string() })?;
        if header.format != PARAMS_FORMAT {
            return Err(Error::Version { expected: PARAMS_FORMAT.into(), found: header.format });
        }
        if header.sizes.len() < 2 || header.sizes.contains(&0) {
            return Err(Error::Format { line: 1, message: "invalid layer sizes".into() });
        }
        let mut layers = Vec::new();
        let mut buf = [0u8; 8];
        let mut next = |r: &mut dyn Read| -> Result<f64> {
            r.read_exact(&mut buf).map_err(|_| Error::Format { line: 2, message: "truncated parameter blob".into() })?;
            Ok(f64::from_le_bytes(buf))
        };
        for pair in header.sizes.windows(2) {
            let (i, o) = (pair[0], pair[1]);
            let w = (0..i * o).map(|_| next(&mut r)).collect::<Result<Vec<_>>>()?;
            let b = (0..o).map(|_| next(&mut r)).collect::<Result<Vec<_>>>()?;
            layers.push(Layer { inputs: i, outputs: o, w, b });
        }
        let params = Self { layers };
        if !params.is_finite() {
            return Err(Error::Numerical("stored parameters are not finite".into()));
        }
        Ok(params)
    }
}

fn batch(rows: &[Vec<f64>], d: usize) -> Result<Mat<f64>> {
    if let Some(bad) = rows.iter().find(|r| r.len() != d) {
        return Err(Error::DimensionMismatch { expected: d, found: bad.len() });
    }
    Ok(Mat::from_fn(d, rows.len(), |i, j| rows[j][i]))
}

fn columns(m: &Mat<f64>) -> Vec<Vec<f64>> {
    (0..m.ncols()).map(|j| (0..m.nrows()).map(|i| m[(i, j)]).collect()).collect()
}

/// Layer sizes `[D, h, h, N_L, h, h, D]`.
pub fn layer_sizes(input_dim: usize, n_latent: usize, hidden: usize) -> Vec<usize> {
    vec![input_dim, hidden, hidden, n_latent, hidden, hidden, input_dim]
}

/// Xavier-uniform weights, zero biases.
pub fn init_params(input_dim: usize, n_latent: usize, hidden: usize, seed: u64) -> Result<NetworkParams> {
    if input_dim == 0 || n_latent == 0 || hidden == 0 {
        return domain("layer widths must be positive");
    }
    init_with_sizes(&layer_sizes(input_dim, n_latent, hidden), seed)
}

pub fn init_with_sizes(sizes: &[usize], seed: u64) -> Result<NetworkParams> {
    if sizes.len() < 2 || sizes.contains(&0) {
        return domain("need at least two positive layer sizes");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = sizes
        .windows(2)
        .map(|p| {
            let bound = (6.0 / (p[0] + p[1]) as f64).sqrt();
            Layer { inputs: p[0], outputs: p[1], w: (0..p[0] * p[1]).map(|_| rng.random_range(-bound..=bound)).collect(), b: vec![0.0; p[1]] }
        })
        .collect();
    Ok(NetworkParams { layers })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// `None` uses `min(32, train size)`.
    pub batch_size: Option<usize>,
    pub seed: u64,
    /// Epochs without test improvement before stopping; 0 disables.
    pub patience: usize,
    pub hidden: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-4, epochs: 5000, batch_size: None, seed: 0, patience: 200, hidden: DEFAULT_HIDDEN }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return domain(format!("learning rate {} must be positive", self.learning_rate));
        }
        if self.hidden == 0 {
            return domain("hidden width must be positive");
        }
        if self.batch_size == Some(0) {
            return domain("batch size must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters with the lowest test error seen.
    pub params: NetworkParams,
    pub train_error: f64,
    pub test_error: f64,
    /// Full training-split loss after every epoch.
    pub history: Vec<f64>,
    pub best_epoch: usize,
}

struct Adam {
    m: NetworkParams,
    v: NetworkParams,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn step(&mut self, params: &mut NetworkParams, grad: &NetworkParams, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for (((p, g), m), v) in params.layers.iter_mut().zip(&grad.layers).zip(&mut self.m.layers).zip(&mut self.v.layers) {
            let it = p.w.iter_mut().chain(p.b.iter_mut()).zip(g.w.iter().chain(&g.b)).zip(m.w.iter_mut().chain(m.b.iter_mut())).zip(v.w.iter_mut().chain(v.b.iter_mut()));
            for (((p, &g), m), v) in it {
                *m = Self::B1 * *m + (1.0 - Self::B1) * g;
                *v = Self::B2 * *v + (1.0 - Self::B2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
            }
        }
    }
}

/// Adam on the training rows with early stopping on the test rows.
pub fn train_rows(train: &[Vec<f64>], test: &[Vec<f64>], n_latent: usize, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() || test.is_empty() {
        return domain("training needs non-empty train and test splits");
    }
    let d = train[0].len();
    let mut params = init_params(d, n_latent, cfg.hidden, cfg.seed)?;
    let x_train = batch(train, d)?;
    let batch_size = cfg.batch_size.unwrap_or(32).min(train.len());
    let mut adam = Adam { m: params.zeros_like(), v: params.zeros_like(), t: 0 };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_ba7c);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best = (params.reconstruction_error(test)?, params.clone(), 0);
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch_size) {
            let xb = Mat::from_fn(d, chunk.len(), |i, j| x_train[(i, chunk[j])]);
            let (loss, grad) = params.loss_and_gradient(xb.as_ref());
            if !loss.is_finite() {
                return Err(Error::Numerical(format!("training diverged at epoch {epoch} (loss {loss})")));
            }
            adam.step(&mut params, &grad, cfg.learning_rate);
        }
        let train_loss = params.reconstruction_error(train)?;
        if !train_loss.is_finite() {
            return Err(Error::Numerical(format!("training diverged at epoch {epoch} (loss {train_loss})")));
        }
        history.push(train_loss);
        let test_loss = params.reconstruction_error(test)?;
        if test_loss < best.0 {
            best = (test_loss, params.clone(), epoch);
        } else if cfg.patience > 0 && epoch - best.2 >= cfg.patience {
            break;
        }
    }
    let (test_error, params, best_epoch) = best;
    let train_error = params.reconstruction_error(train)?;
    Ok(TrainOutcome { params, train_error, test_error, history, best_epoch })
}

/// Trains on the recorded split of a normalized dataset.
pub fn train(dataset: &Dataset, n_latent: usize, cfg: &TrainConfig) -> Result<TrainOutcome> {
    if dataset.is_empty() {
        return domain("dataset is empty");
    }
    let train = dataset.split_rows(Split::Train)?;
    let test = dataset.split_rows(Split::Test)?;
    train_rows(&train, &test, n_latent, cfg)
}

/// Trains with seeds `seed..seed + restarts` and keeps the lowest test error.
pub fn train_best(dataset: &Dataset, n_latent: usize, restarts: usize, cfg: &TrainConfig) -> Result<TrainOutcome> {
    if restarts == 0 {
        return domain("need at least one restart");
    }
    let mut best: Option<TrainOutcome> = None;
    for r in 0..restarts {
        let out = train(dataset, n_latent, &TrainConfig { seed: cfg.seed + r as u64, ..cfg.clone() })?;
        if best.as_ref().is_none_or(|b| out.test_error < b.test_error) {
            best = Some(out);
        }
    }
    Ok(best.expect("at least one restart"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub n_latent: usize,
    /// Median over restarts.
    pub test_error: f64,
    pub train_error: f64,
    pub runs: Vec<f64>,
}

/// Test error against latent width. `N_L = 0` is the mean predictor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCurve {
    pub points: Vec<SweepPoint>,
}

impl SweepCurve {
    /// Curve with `N_L` equal to the index.
    pub fn from_errors(errors: &[f64]) -> Self {
        let points = errors
            .iter()
            .enumerate()
            .map(|(n, &e)| SweepPoint { n_latent: n, test_error: e, train_error: e, runs: vec![e] })
            .collect();
        Self { points }
    }

    pub fn error_at(&self, n_latent: usize) -> Option<f64> {
        self.points.iter().find(|p| p.n_latent == n_latent).map(|p| p.test_error)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("n_latent,test_error,train_error\n");
        for p in &self.points {
            s.push_str(&format!("{},{},{}\n", p.n_latent, p.test_error, p.train_error));
        }
        s
    }
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Test error of predicting the training mean.
pub fn baseline_error(train: &[Vec<f64>], test: &[Vec<f64>]) -> Result<f64> {
    if train.is_empty() || test.is_empty() {
        return domain("baseline needs non-empty splits");
    }
    let d = train[0].len();
    let mean: Vec<f64> = (0..d).map(|c| train.iter().map(|r| r[c]).sum::<f64>() / train.len() as f64).collect();
    Ok(test.iter().map(|r| r.iter().zip(&mean).map(|(x, m)| (x - m).powi(2)).sum::<f64>()).sum::<f64>() / test.len() as f64)
}

/// Independent trainings for every width, with seeds `seed + 1000 N_L + r`.
pub fn bottleneck_sweep(dataset: &Dataset, widths: &[usize], restarts: usize, cfg: &TrainConfig) -> Result<SweepCurve> {
    if dataset.is_empty() {
        return domain("dataset is empty");
    }
    if restarts == 0 {
        return domain("need at least one restart");
    }
    let train = dataset.split_rows(Split::Train)?;
    let test = dataset.split_rows(Split::Test)?;
    let base = baseline_error(&train, &test)?;
    let base_train = baseline_error(&train, &train)?;
    let mut points = vec![SweepPoint { n_latent: 0, test_error: base, train_error: base_train, runs: vec![base] }];
    let mut widths: Vec<usize> = widths.iter().copied().filter(|&w| w > 0).collect();
    widths.sort_unstable();
    widths.dedup();
    for nl in widths {
        let mut tests = Vec::new();
        let mut trains = Vec::new();
        for r in 0..restarts {
            let c = TrainConfig { seed: cfg.seed + 1000 * nl as u64 + r as u64, ..cfg.clone() };
            let out = train_rows(&train, &test, nl, &c)?;
            tests.push(out.test_error);
            trains.push(out.train_error);
        }
        points.push(SweepPoint { n_latent: nl, test_error: median(&tests), train_error: median(&trains), runs: tests });
    }
    Ok(SweepCurve { points })
}

/// Smallest `N_L` whose error is below `floor` and stays flat at `N_L + 1`
/// (`err(N_L+1) / err(N_L) >= drop_ratio`). `floor` defaults to 5% of the
/// `N_L = 0` error. `None` means undetermined.
pub fn intrinsic_dimension(curve: &SweepCurve, drop_ratio: f64, floor: Option<f64>) -> Result<Option<usize>> {
    let floor = match floor {
        Some(f) => f,
        None => 0.05 * curve.error_at(0).ok_or_else(|| Error::Domain("curve lacks the N_L = 0 baseline; pass a floor".into()))?,
    };
    let mut pts: Vec<&SweepPoint> = curve.points.iter().collect();
    pts.sort_by_key(|p| p.n_latent);
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a.n_latent == 0 || b.n_latent != a.n_latent + 1 {
            continue;
        }
        let flat = a.test_error == 0.0 || b.test_error / a.test_error >= drop_ratio;
        if flat && a.test_error <= floor {
            return Ok(Some(a.n_latent));
        }
    }
    Ok(None)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentEmbedding {
    /// Bottleneck activations, one row per element.
    pub coords: Vec<Vec<f64>>,
    /// Element indices sorted by the single latent coordinate (`N_L = 1` only).
    pub order: Option<Vec<usize>>,
}

impl LatentEmbedding {
    pub fn first_coordinate(&self) -> Vec<f64> {
        self.coords.iter().map(|r| r[0]).collect()
    }

    pub fn to_csv(&self) -> String {
        let k = self.coords.first().map_or(0, Vec::len);
        let mut s = String::from("element");
        for i in 0..k {
            s.push_str(&format!(",s{i}"));
        }
        s.push('\n');
        for (e, r) in self.coords.iter().enumerate() {
            s.push_str(&e.to_string());
            for v in r {
                s.push_str(&format!(",{v}"));
            }
            s.push('\n');
        }
        s
    }
}

pub fn encode_rows(params: &NetworkParams, rows: &[Vec<f64>]) -> Result<LatentEmbedding> {
    let x = batch(rows, params.input_dim())?;
    let acts = params.forward_all(x.as_ref());
    let coords = columns(&acts[params.layers.len() / 2]);
    let order = (params.latent_dim() == 1).then(|| {
        let mut o: Vec<usize> = (0..coords.len()).collect();
        o.sort_by(|&a, &b| coords[a][0].total_cmp(&coords[b][0]).then(a.cmp(&b)));
        o
    });
    Ok(LatentEmbedding { coords, order })
}

/// Encodes every element of a normalized dataset.
pub fn encode(params: &NetworkParams, dataset: &Dataset) -> Result<LatentEmbedding> {
    encode_rows(params, &dataset.normalized_matrix()?)
}
