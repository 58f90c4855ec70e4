//! Contrastive sense encoder: a one-hidden-layer network that maps baseline
//! definition embeddings into a space where slang definitions sit close to
//! the conventional senses of their word form, trained with a max-margin
//! triplet loss and Adam.

use std::borrow::Cow;
use std::fmt::Write as _;
use std::path::Path;

use rand::distributions::{Distribution, Uniform};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, Split};
use crate::embeddings::{euclidean_distance, EmbeddingTable};
use crate::error::{Error, Result};
use crate::io;

const FORMAT_TAG: &str = "encoder-v1";

/// Ids into the baseline sentence-embedding table.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triplet {
    /// Slang definition (definition_id).
    pub anchor: String,
    /// Conventional sense of the same word (sense_id).
    pub positive: String,
    /// Sense of a different word (sense_id).
    pub negative: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub margin: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub negatives_per_positive: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Hidden width; the input width when unset.
    pub hidden_dim: Option<usize>,
    pub output_dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            margin: 1.0,
            learning_rate: 0.03125,
            epochs: 4,
            batch_size: 64,
            negatives_per_positive: 1,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            hidden_dim: None,
            output_dim: 768,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Invalid(m.to_string()));
        if !(self.margin > 0.0) {
            return bad("margin must be positive");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == 0 || self.negatives_per_positive == 0 || self.output_dim == 0 {
            return bad("batch_size, negatives_per_positive and output_dim must be positive");
        }
        if self.hidden_dim == Some(0) {
            return bad("hidden_dim must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.epsilon > 0.0) {
            return bad("adam betas must lie in [0, 1) and epsilon must be positive");
        }
        Ok(())
    }
}

/// Weights of `y = W2 tanh(W1 x + b1) + b2`, stored flat in the order
/// W1 (hidden x input, row-major), b1, W2 (output x hidden), b2.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderParams {
    input_dim: usize,
    hidden_dim: usize,
    output_dim: usize,
    params: Vec<f64>,
}

struct Forward {
    hidden: Vec<f64>,
    output: Vec<f64>,
}

impl EncoderParams {
    /// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` for weights and biases.
    pub fn init(input_dim: usize, hidden_dim: usize, output_dim: usize, rng: &mut impl Rng) -> Self {
        let layer = |fan_in: usize, n: usize, rng: &mut dyn rand::RngCore| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound);
            (0..n).map(|_| dist.sample(rng)).collect::<Vec<f64>>()
        };
        let mut params = layer(input_dim, hidden_dim * input_dim, rng);
        params.extend(layer(input_dim, hidden_dim, rng));
        params.extend(layer(hidden_dim, output_dim * hidden_dim, rng));
        params.extend(layer(hidden_dim, output_dim, rng));
        EncoderParams {
            input_dim,
            hidden_dim,
            output_dim,
            params,
        }
    }

    pub fn from_parts(
        input_dim: usize,
        hidden_dim: usize,
        output_dim: usize,
        w1: Vec<f64>,
        b1: Vec<f64>,
        w2: Vec<f64>,
        b2: Vec<f64>,
    ) -> Result<Self> {
        let expect = [
            (w1.len(), hidden_dim * input_dim),
            (b1.len(), hidden_dim),
            (w2.len(), output_dim * hidden_dim),
            (b2.len(), output_dim),
        ];
        for (found, expected) in expect {
            if found != expected {
                return Err(Error::LengthMismatch {
                    left: found,
                    right: expected,
                });
            }
        }
        let params: Vec<f64> = [w1, b1, w2, b2].concat();
        if params.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { id: "encoder".into() });
        }
        Ok(EncoderParams {
            input_dim,
            hidden_dim,
            output_dim,
            params,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    /// All parameters, flat, in W1, b1, W2, b2 order.
    pub fn as_slice(&self) -> &[f64] {
        &self.params
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Offsets of (W1, b1, W2, b2) in the flat parameter vector.
    pub fn tensor_ranges(&self) -> [std::ops::Range<usize>; 4] {
        let a = self.hidden_dim * self.input_dim;
        let b = a + self.hidden_dim;
        let c = b + self.output_dim * self.hidden_dim;
        [0..a, a..b, b..c, c..c + self.output_dim]
    }

    fn forward(&self, x: &[f64]) -> Forward {
        let [w1, b1, w2, b2] = self.tensor_ranges().map(|r| &self.params[r]);
        let hidden: Vec<f64> = (0..self.hidden_dim)
            .map(|j| {
                let row = &w1[j * self.input_dim..(j + 1) * self.input_dim];
                (dot(row, x) + b1[j]).tanh()
            })
            .collect();
        let output = (0..self.output_dim)
            .map(|o| dot(&w2[o * self.hidden_dim..(o + 1) * self.hidden_dim], &hidden) + b2[o])
            .collect();
        Forward { hidden, output }
    }

    /// Accumulates the gradient of `dy . y(x)` into `grad`.
    fn backward(&self, x: &[f64], fwd: &Forward, dy: &[f64], grad: &mut [f64]) {
        let [r1, rb1, r2, rb2] = self.tensor_ranges();
        let w2 = &self.params[r2.clone()];
        let mut dz = vec![0.0; self.hidden_dim];
        for (o, &g) in dy.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            grad[rb2.start + o] += g;
            let row = r2.start + o * self.hidden_dim;
            for j in 0..self.hidden_dim {
                grad[row + j] += g * fwd.hidden[j];
                dz[j] += g * w2[o * self.hidden_dim + j];
            }
        }
        for j in 0..self.hidden_dim {
            let h = fwd.hidden[j];
            let d = dz[j] * (1.0 - h * h);
            if d == 0.0 {
                continue;
            }
            grad[rb1.start + j] += d;
            let row = r1.start + j * self.input_dim;
            for (i, &xi) in x.iter().enumerate() {
                grad[row + i] += d * xi;
            }
        }
    }

    pub fn encode(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.input_dim {
            return Err(Error::LengthMismatch {
                left: v.len(),
                right: self.input_dim,
            });
        }
        Ok(self.forward(v).output)
    }

    pub fn encode_batch<'a, I>(&self, vs: I) -> Result<Vec<Vec<f64>>>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        vs.into_iter().map(|v| self.encode(v)).collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{FORMAT_TAG}\t{}\t{}\t{}\n",
            self.input_dim, self.hidden_dim, self.output_dim
        );
        for (name, range) in ["w1", "b1", "w2", "b2"].iter().zip(self.tensor_ranges()) {
            out.push_str(name);
            for x in &self.params[range] {
                write!(out, "\t{x}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_string(path, &self.to_text())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let lines = io::data_lines(path)?;
        let parse_err = |line: usize, m: &str| Error::parse(path, line, m);
        let (n, header) = lines.first().ok_or_else(|| parse_err(1, "empty encoder file"))?;
        let dims: Vec<&str> = header.split('\t').collect();
        if dims.len() != 4 || dims[0] != FORMAT_TAG {
            return Err(parse_err(*n, "expected `encoder-v1<TAB>in<TAB>hidden<TAB>out` header"));
        }
        let dims: Vec<usize> = dims[1..]
            .iter()
            .map(|d| d.parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| parse_err(*n, "bad dimension in header"))?;
        if lines.len() != 5 {
            return Err(parse_err(*n, "expected four parameter rows"));
        }
        let mut arrays = Vec::with_capacity(4);
        for ((n, line), name) in lines[1..].iter().zip(["w1", "b1", "w2", "b2"]) {
            let mut fields = line.split('\t');
            if fields.next() != Some(name) {
                return Err(parse_err(*n, &format!("expected `{name}` row")));
            }
            let values: Vec<f64> = fields
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| parse_err(*n, "bad float"))?;
            arrays.push(values);
        }
        let b2 = arrays.pop().unwrap();
        let w2 = arrays.pop().unwrap();
        let b1 = arrays.pop().unwrap();
        let w1 = arrays.pop().unwrap();
        EncoderParams::from_parts(dims[0], dims[1], dims[2], w1, b1, w2, b2)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `max(0, d(a, p) - d(a, n) + margin)` with Euclidean `d`.
pub fn triplet_loss(a: &[f64], p: &[f64], n: &[f64], margin: f64) -> Result<f64> {
    let ap = euclidean_distance(a, p)?;
    let an = euclidean_distance(a, n)?;
    Ok((ap - an + margin).max(0.0))
}

/// Baseline vectors of one triplet.
pub type TripletVectors<'a> = (&'a [f64], &'a [f64], &'a [f64]);

/// Mean triplet loss over encoded vectors.
pub fn batch_loss(params: &EncoderParams, batch: &[TripletVectors<'_>], margin: f64) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Empty("triplet batch"));
    }
    let mut total = 0.0;
    for &(a, p, n) in batch {
        let (ea, ep, en) = (params.encode(a)?, params.encode(p)?, params.encode(n)?);
        total += triplet_loss(&ea, &ep, &en, margin)?;
    }
    Ok(total / batch.len() as f64)
}

/// Mean triplet loss and its gradient with respect to every parameter.
/// A hinge argument of exactly zero contributes no gradient, and so does a
/// zero distance.
pub fn batch_loss_and_grad(
    params: &EncoderParams,
    batch: &[TripletVectors<'_>],
    margin: f64,
) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::Empty("triplet batch"));
    }
    let scale = 1.0 / batch.len() as f64;
    let mut grad = vec![0.0; params.params.len()];
    let mut total = 0.0;
    for &(a, p, n) in batch {
        for v in [a, p, n] {
            if v.len() != params.input_dim {
                return Err(Error::LengthMismatch {
                    left: v.len(),
                    right: params.input_dim,
                });
            }
        }
        let (fa, fp, fn_) = (params.forward(a), params.forward(p), params.forward(n));
        let dap = euclidean_distance(&fa.output, &fp.output)?;
        let dan = euclidean_distance(&fa.output, &fn_.output)?;
        let arg = dap - dan + margin;
        if arg <= 0.0 {
            continue;
        }
        total += arg;
        let unit = |x: &[f64], y: &[f64], d: f64| -> Vec<f64> {
            if d == 0.0 {
                vec![0.0; x.len()]
            } else {
                x.iter().zip(y).map(|(xi, yi)| scale * (xi - yi) / d).collect()
            }
        };
        let u_ap = unit(&fa.output, &fp.output, dap);
        let u_an = unit(&fa.output, &fn_.output, dan);
        let d_a: Vec<f64> = u_ap.iter().zip(&u_an).map(|(x, y)| x - y).collect();
        let d_p: Vec<f64> = u_ap.iter().map(|x| -x).collect();
        params.backward(a, &fa, &d_a, &mut grad);
        params.backward(p, &fp, &d_p, &mut grad);
        params.backward(n, &fn_, &u_an, &mut grad);
    }
    Ok((total * scale, grad))
}

/// Central finite-difference estimate of the batch loss gradient, one
/// parameter at a time.
pub fn numerical_gradient(
    params: &EncoderParams,
    batch: &[TripletVectors<'_>],
    margin: f64,
    step: f64,
) -> Result<Vec<f64>> {
    let mut probe = params.clone();
    let mut grad = Vec::with_capacity(params.params.len());
    for i in 0..params.params.len() {
        let orig = probe.params[i];
        probe.params[i] = orig + step;
        let up = batch_loss(&probe, batch, margin)?;
        probe.params[i] = orig - step;
        let down = batch_loss(&probe, batch, margin)?;
        probe.params[i] = orig;
        grad.push((up - down) / (2.0 * step));
    }
    Ok(grad)
}

/// Anchors, positives and the negative pool of one split; draws a fresh set
/// of negatives for every epoch.
#[derive(Clone, Debug)]
pub struct TripletSampler {
    /// (definition_id, positives) per anchor, ordered by definition_id.
    anchors: Vec<(String, Vec<String>, std::ops::Range<usize>)>,
    /// Sense ids of every inventory sense, grouped by word.
    pool: Vec<String>,
    negatives_per_positive: usize,
    seed: u64,
}

impl TripletSampler {
    pub fn new(dataset: &Dataset, split: Split, embeddings: &EmbeddingTable, config: &TrainConfig) -> Result<Self> {
        let mut pool = Vec::new();
        let mut word_ranges = std::collections::HashMap::new();
        for (word, senses) in dataset.inventory.iter() {
            let start = pool.len();
            for s in senses {
                embeddings.get(&s.sense_id)?;
                pool.push(s.sense_id.clone());
            }
            word_ranges.insert(word, start..pool.len());
        }
        let mut anchors = Vec::new();
        for def in dataset.definitions(split) {
            embeddings.get(&def.definition_id)?;
            let senses = dataset
                .inventory
                .senses(&def.word)
                .ok_or_else(|| Error::UnknownWord(def.word.clone()))?;
            let own = word_ranges[def.word.as_str()].clone();
            if own.len() == pool.len() {
                return Err(Error::PoolExhausted {
                    needed: 1,
                    available: 0,
                });
            }
            let positives = senses.iter().map(|s| s.sense_id.clone()).collect();
            anchors.push((def.definition_id, positives, own));
        }
        Ok(TripletSampler {
            anchors,
            pool,
            negatives_per_positive: config.negatives_per_positive,
            seed: config.seed,
        })
    }

    pub fn sample(&self, epoch: usize) -> Vec<Triplet> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(epoch as u64);
        let mut out = Vec::new();
        for (anchor, positives, own) in &self.anchors {
            let eligible = self.pool.len() - own.len();
            for positive in positives {
                for _ in 0..self.negatives_per_positive {
                    let mut idx = rng.gen_range(0..eligible);
                    if idx >= own.start {
                        idx += own.len();
                    }
                    out.push(Triplet {
                        anchor: anchor.clone(),
                        positive: positive.clone(),
                        negative: self.pool[idx].clone(),
                    });
                }
            }
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }
}

/// Training triplets for one epoch.
pub trait TripletSource {
    fn epoch_triplets(&self, epoch: usize) -> Cow<'_, [Triplet]>;
}

impl TripletSource for [Triplet] {
    fn epoch_triplets(&self, _epoch: usize) -> Cow<'_, [Triplet]> {
        Cow::Borrowed(self)
    }
}

impl TripletSource for Vec<Triplet> {
    fn epoch_triplets(&self, _epoch: usize) -> Cow<'_, [Triplet]> {
        Cow::Borrowed(self)
    }
}

impl TripletSource for TripletSampler {
    fn epoch_triplets(&self, epoch: usize) -> Cow<'_, [Triplet]> {
        Cow::Owned(self.sample(epoch))
    }
}

/// Training triplets of the train split with the epoch-0 negatives.
pub fn build_triplets(dataset: &Dataset, embeddings: &EmbeddingTable, config: &TrainConfig) -> Result<Vec<Triplet>> {
    Ok(TripletSampler::new(dataset, Split::Train, embeddings, config)?.sample(0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_loss: Option<f64>,
}

/// Losses per epoch; epoch 0 holds the losses at initialization.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochLog>,
}

impl TrainReport {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("epoch\ttrain_loss\tdev_loss\n");
        for e in &self.epochs {
            let dev = e.dev_loss.map(|d| d.to_string()).unwrap_or_else(|| "NA".into());
            writeln!(out, "{}\t{}\t{dev}", e.epoch, e.train_loss).unwrap();
        }
        out
    }
}

fn resolve<'a>(triplets: &[Triplet], embeddings: &'a EmbeddingTable) -> Result<Vec<TripletVectors<'a>>> {
    triplets
        .iter()
        .map(|t| {
            Ok((
                embeddings.get(&t.anchor)?,
                embeddings.get(&t.positive)?,
                embeddings.get(&t.negative)?,
            ))
        })
        .collect()
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    fn update(&mut self, params: &mut [f64], grad: &[f64], config: &TrainConfig) {
        self.step += 1;
        let c1 = 1.0 - config.beta1.powi(self.step);
        let c2 = 1.0 - config.beta2.powi(self.step);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = config.beta1 * self.m[i] + (1.0 - config.beta1) * g;
            self.v[i] = config.beta2 * self.v[i] + (1.0 - config.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
        }
    }
}

/// Mini-batch Adam on the mean triplet loss. Deterministic for a fixed
/// seed: initialization, negatives and batch order all derive from it.
pub fn train_encoder<S>(
    source: &S,
    dev: &[Triplet],
    embeddings: &EmbeddingTable,
    config: &TrainConfig,
) -> Result<(EncoderParams, TrainReport)>
where
    S: TripletSource + ?Sized,
{
    config.validate()?;
    let input_dim = embeddings.dim();
    let hidden = config.hidden_dim.unwrap_or(input_dim);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = EncoderParams::init(input_dim, hidden, config.output_dim, &mut rng);
    let mut adam = Adam::new(params.params.len());
    let dev_vectors = resolve(dev, embeddings)?;
    let dev_loss = |p: &EncoderParams| -> Result<Option<f64>> {
        if dev_vectors.is_empty() {
            Ok(None)
        } else {
            batch_loss(p, &dev_vectors, config.margin).map(Some)
        }
    };

    let mut report = TrainReport::default();
    let initial = source.epoch_triplets(0);
    if initial.is_empty() {
        return Err(Error::Empty("training triplets"));
    }
    report.epochs.push(EpochLog {
        epoch: 0,
        train_loss: batch_loss(&params, &resolve(&initial, embeddings)?, config.margin)?,
        dev_loss: dev_loss(&params)?,
    });

    for epoch in 1..=config.epochs {
        let triplets = source.epoch_triplets(epoch - 1);
        let vectors = resolve(&triplets, embeddings)?;
        if vectors.is_empty() {
            return Err(Error::Empty("training triplets"));
        }
        let mut order: Vec<usize> = (0..vectors.len()).collect();
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<TripletVectors<'_>> = chunk.iter().map(|&i| vectors[i]).collect();
            let (loss, grad) = batch_loss_and_grad(&params, &batch, config.margin)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            adam.update(&mut params.params, &grad, config);
        }
        if params.params.iter().any(|x| !x.is_finite()) {
            return Err(Error::Divergence { epoch });
        }
        let train_loss = batch_loss(&params, &vectors, config.margin)?;
        if !train_loss.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        report.epochs.push(EpochLog {
            epoch,
            train_loss,
            dev_loss: dev_loss(&params)?,
        });
    }
    Ok((params, report))
}
