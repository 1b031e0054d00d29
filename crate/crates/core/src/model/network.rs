//! The prediction network: point embedding and Transformer encoder with
//! attention pooling, the horizon-aware context generator, and the
//! differential-prompted causal decoder with a sigmoid bit predictor.

use std::sync::atomic::{AtomicUsize, Ordering};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ModelConfig, PointEmbedding, Pooling};
use super::layers::{
    sigmoid, sinusoidal_positions, softmax_in_place, Block, BlockCache, ConvEmbed, ConvEmbedCache,
    LayerNorm, LayerNormCache, Linear,
};
use super::params::{ParamBuilder, ParameterStore};
use super::tensor::{Matrix, Scalar};
use super::ModelError;
use crate::codec::{Attribute, BitWidthSpec};

/// Network input for one window: the `k` joint point codes and the `k-1`
/// differential codes of the observations, as 0/1 values.
#[derive(Debug, Clone)]
pub struct NetInput<T> {
    pub points: Matrix<T>,
    pub diffs: Matrix<T>,
}

/// Per-position encoder states and the pooled trajectory vector.
#[derive(Debug, Clone)]
pub struct TrajEmbedding<T> {
    pub hiddens: Matrix<T>,
    pub traj: Vec<T>,
    /// pooling weights over positions (all ones for sum pooling)
    pub weights: Vec<T>,
}

/// Per-horizon, per-bit probabilities, `[n x 48]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftPrediction {
    pub probs: Matrix<f64>,
}

impl SoftPrediction {
    pub fn horizons(&self) -> usize {
        self.probs.rows()
    }

    pub fn row(&self, h: usize) -> &[f64] {
        self.probs.row(h)
    }
}

#[derive(Debug, Clone)]
enum PointEmbedLayer {
    Conv(ConvEmbed),
    Linear(Vec<Linear>),
}

enum PointEmbedCache<T> {
    Conv(ConvEmbedCache<T>),
    Linear(Vec<Matrix<T>>),
}

pub struct EncoderTrace<T> {
    embed: PointEmbedCache<T>,
    embedded: Matrix<T>,
    blocks: Vec<BlockCache<T>>,
    norm: LayerNormCache<T>,
    pub embedding: TrajEmbedding<T>,
}

impl<T: Scalar> EncoderTrace<T> {
    pub fn block_caches(&self) -> &[BlockCache<T>] {
        &self.blocks
    }
}

pub struct HacgTrace<T> {
    onehot: Matrix<T>,
    joined: Matrix<T>,
    pre: Matrix<T>,
    act: Matrix<T>,
    pub contexts: Matrix<T>,
}

pub struct DecoderTrace<T> {
    diff: Option<ConvEmbedCache<T>>,
    prompt_rows: usize,
    blocks: Vec<BlockCache<T>>,
    norm: LayerNormCache<T>,
    readout: Matrix<T>,
    pub logits: Matrix<T>,
    pub probs: Matrix<T>,
}

impl<T: Scalar> DecoderTrace<T> {
    pub fn block_caches(&self) -> &[BlockCache<T>] {
        &self.blocks
    }
}

/// Everything the backward pass needs from one forward pass.
pub struct Trace<T> {
    pub encoder: EncoderTrace<T>,
    pub hacg: HacgTrace<T>,
    pub decoder: DecoderTrace<T>,
}

#[derive(Debug)]
pub struct FlightNet {
    cfg: ModelConfig,
    layout: BitWidthSpec,
    point_embed: PointEmbedLayer,
    enc_input: Linear,
    enc_blocks: Vec<Block>,
    enc_norm: LayerNorm,
    asa_score: Option<Linear>,
    horizon: Linear,
    hacg_fc1: Linear,
    hacg_fc2: Linear,
    diff_embed: Option<ConvEmbed>,
    dec_blocks: Vec<Block>,
    dec_norm: LayerNorm,
    head: Linear,
    encoder_passes: AtomicUsize,
}

impl Clone for FlightNet {
    fn clone(&self) -> Self {
        Self {
            cfg: self.cfg.clone(),
            layout: self.layout,
            point_embed: self.point_embed.clone(),
            enc_input: self.enc_input.clone(),
            enc_blocks: self.enc_blocks.clone(),
            enc_norm: self.enc_norm.clone(),
            asa_score: self.asa_score.clone(),
            horizon: self.horizon.clone(),
            hacg_fc1: self.hacg_fc1.clone(),
            hacg_fc2: self.hacg_fc2.clone(),
            diff_embed: self.diff_embed.clone(),
            dec_blocks: self.dec_blocks.clone(),
            dec_norm: self.dec_norm.clone(),
            head: self.head.clone(),
            encoder_passes: AtomicUsize::new(0),
        }
    }
}

fn column_block<T: Scalar>(m: &Matrix<T>, start: usize, width: usize) -> Matrix<T> {
    let mut out = Matrix::zeros(m.rows(), width);
    for r in 0..m.rows() {
        out.row_mut(r).copy_from_slice(&m.row(r)[start..start + width]);
    }
    out
}

impl FlightNet {
    /// Lays out every parameter and draws seeded initial values.
    pub fn new<T: Scalar>(
        cfg: &ModelConfig,
        layout: &BitWidthSpec,
    ) -> Result<(Self, ParameterStore<T>), ModelError> {
        cfg.validate()?;
        layout.validate()?;
        let mut store = ParameterStore::default();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let net = {
            let mut pb = ParamBuilder::new(&mut store, &mut rng);
            Self::build(cfg, layout, &mut pb)
        };
        Ok((net, store))
    }

    fn build<T: Scalar>(cfg: &ModelConfig, layout: &BitWidthSpec, pb: &mut ParamBuilder<T>) -> Self {
        let d = cfg.model_dim;
        let act = cfg.activation;
        let input_width = layout.input_total();
        let diff_width = layout.diff_total();

        let point_embed = match cfg.point_embedding {
            PointEmbedding::Conv => PointEmbedLayer::Conv(ConvEmbed::new(
                pb,
                "tpe",
                input_width,
                cfg.conv_channels,
                cfg.conv_kernel,
                cfg.point_embed_dim,
                act,
            )),
            PointEmbedding::Linear => {
                let mut s = pb.scope("tpe");
                PointEmbedLayer::Linear(
                    Attribute::ALL
                        .iter()
                        .map(|&a| Linear::new(&mut s, a.name(), layout.input_width(a), cfg.point_embed_dim))
                        .collect(),
                )
            }
        };

        let (enc_input, enc_blocks, enc_norm, asa_score) = {
            let mut s = pb.scope("encoder");
            let input = Linear::new(&mut s, "input", cfg.point_embed_dim, d);
            let blocks = (0..cfg.encoder_layers)
                .map(|i| {
                    Block::new(&mut s, &format!("block{i}"), d, cfg.attention_heads, cfg.ff_dim(), false, act)
                })
                .collect();
            let norm = LayerNorm::new(&mut s, "norm", d);
            let asa = match cfg.pooling {
                Pooling::Attention => Some(Linear::new(&mut s, "asa", d, 1)),
                Pooling::Sum => None,
            };
            (input, blocks, norm, asa)
        };

        let (horizon, hacg_fc1, hacg_fc2) = {
            let mut s = pb.scope("hacg");
            let horizon = Linear::new(&mut s, "horizon", cfg.max_horizons, cfg.horizon_embed_dim);
            let fc1 = Linear::new(&mut s, "fc1", d + cfg.horizon_embed_dim, d);
            let fc2 = Linear::new(&mut s, "fc2", d, d);
            (horizon, fc1, fc2)
        };

        let mut s = pb.scope("dpd");
        let diff_embed = cfg.differential_prompt.then(|| {
            ConvEmbed::new(&mut s, "diff", diff_width, cfg.conv_channels, cfg.conv_kernel, d, act)
        });
        let dec_blocks = (0..cfg.decoder_layers)
            .map(|i| Block::new(&mut s, &format!("block{i}"), d, cfg.attention_heads, cfg.ff_dim(), true, act))
            .collect();
        let dec_norm = LayerNorm::new(&mut s, "norm", d);
        let head = Linear::new(&mut s, "head", d, diff_width);

        Self {
            cfg: cfg.clone(),
            layout: *layout,
            point_embed,
            enc_input,
            enc_blocks,
            enc_norm,
            asa_score,
            horizon,
            hacg_fc1,
            hacg_fc2,
            diff_embed,
            dec_blocks,
            dec_norm,
            head,
            encoder_passes: AtomicUsize::new(0),
        }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn layout(&self) -> &BitWidthSpec {
        &self.layout
    }

    /// Number of encoder passes run since construction or the last reset.
    pub fn encoder_passes(&self) -> usize {
        self.encoder_passes.load(Ordering::Relaxed)
    }

    pub fn reset_encoder_passes(&self) {
        self.encoder_passes.store(0, Ordering::Relaxed);
    }

    fn check_shape(what: &'static str, expected: (usize, usize), actual: (usize, usize)) -> Result<(), ModelError> {
        if expected != actual {
            return Err(ModelError::ShapeMismatch {
                what,
                expected,
                actual,
            });
        }
        Ok(())
    }

    fn embed_points<T: Scalar>(&self, p: &[T], points: &Matrix<T>) -> (Matrix<T>, PointEmbedCache<T>) {
        match &self.point_embed {
            PointEmbedLayer::Conv(conv) => {
                let (y, cache) = conv.forward(p, points);
                (y, PointEmbedCache::Conv(cache))
            }
            PointEmbedLayer::Linear(layers) => {
                let offsets = self.layout.input_offsets();
                let mut out = Matrix::zeros(points.rows(), self.cfg.point_embed_dim);
                let mut inputs = Vec::with_capacity(layers.len());
                for (i, layer) in layers.iter().enumerate() {
                    let x = column_block(points, offsets[i], layer.in_dim);
                    out.add_assign(&layer.forward(p, &x));
                    inputs.push(x);
                }
                (out, PointEmbedCache::Linear(inputs))
            }
        }
    }

    /// Point embedding of each joint code, `[k x point_embed_dim]`.
    pub fn tpe_embed<T: Scalar>(&self, params: &ParameterStore<T>, points: &Matrix<T>) -> Result<Matrix<T>, ModelError> {
        Self::check_shape(
            "point codes",
            (points.rows(), self.layout.input_total()),
            points.shape(),
        )?;
        Ok(self.embed_points(params.values(), points).0)
    }

    fn run_encoder<T: Scalar>(&self, p: &[T], embedded: Matrix<T>) -> Result<(Vec<BlockCache<T>>, LayerNormCache<T>, TrajEmbedding<T>, Matrix<T>), ModelError> {
        self.encoder_passes.fetch_add(1, Ordering::Relaxed);
        let mut h = self.enc_input.forward(p, &embedded);
        h.add_assign(&sinusoidal_positions(h.rows(), self.cfg.model_dim));
        let mut caches = Vec::with_capacity(self.enc_blocks.len());
        for block in &self.enc_blocks {
            let (out, cache) = block.forward(p, &h);
            caches.push(cache);
            h = out;
        }
        let (hiddens, norm) = self.enc_norm.forward(p, &h);
        if !hiddens.all_finite() {
            return Err(ModelError::NonFinite("encoder activations"));
        }
        let embedding = self.pool(p, hiddens);
        Ok((caches, norm, embedding, embedded))
    }

    fn pool<T: Scalar>(&self, p: &[T], hiddens: Matrix<T>) -> TrajEmbedding<T> {
        let weights = match &self.asa_score {
            Some(score) => {
                let mut w = score.forward(p, &hiddens).into_data();
                softmax_in_place(&mut w);
                w
            }
            None => vec![T::one(); hiddens.rows()],
        };
        let mut traj = vec![T::zero(); hiddens.cols()];
        for (r, &wr) in weights.iter().enumerate() {
            for (t, &h) in traj.iter_mut().zip(hiddens.row(r)) {
                *t += wr * h;
            }
        }
        TrajEmbedding {
            hiddens,
            traj,
            weights,
        }
    }

    /// Transformer encoder over point embeddings, followed by pooling.
    pub fn encoder_forward<T: Scalar>(
        &self,
        params: &ParameterStore<T>,
        point_embeds: &Matrix<T>,
    ) -> Result<TrajEmbedding<T>, ModelError> {
        Self::check_shape(
            "point embeddings",
            (point_embeds.rows(), self.cfg.point_embed_dim),
            point_embeds.shape(),
        )?;
        Ok(self.run_encoder(params.values(), point_embeds.clone())?.2)
    }

    /// Attention-based sequence aggregation of `[k x model_dim]` states.
    pub fn asa<T: Scalar>(&self, params: &ParameterStore<T>, hiddens: &Matrix<T>) -> Result<TrajEmbedding<T>, ModelError> {
        Self::check_shape("encoder states", (hiddens.rows(), self.cfg.model_dim), hiddens.shape())?;
        if hiddens.rows() == 0 {
            return Err(ModelError::ShapeMismatch {
                what: "encoder states",
                expected: (1, self.cfg.model_dim),
                actual: hiddens.shape(),
            });
        }
        Ok(self.pool(params.values(), hiddens.clone()))
    }

    fn run_hacg<T: Scalar>(&self, p: &[T], traj: &[T], n: usize) -> Result<HacgTrace<T>, ModelError> {
        if n == 0 || n > self.cfg.max_horizons {
            return Err(ModelError::HorizonOutOfRange {
                n,
                max: self.cfg.max_horizons,
            });
        }
        let d = self.cfg.model_dim;
        let mut onehot = Matrix::zeros(n, self.cfg.max_horizons);
        for i in 0..n {
            onehot.row_mut(i)[i] = T::one();
        }
        let he = self.horizon.forward(p, &onehot);
        let mut joined = Matrix::zeros(n, d + self.cfg.horizon_embed_dim);
        for i in 0..n {
            let row = joined.row_mut(i);
            row[..d].copy_from_slice(traj);
            row[d..].copy_from_slice(he.row(i));
        }
        let pre = self.hacg_fc1.forward(p, &joined);
        let act = self.cfg.activation.map(&pre);
        let contexts = self.hacg_fc2.forward(p, &act);
        Ok(HacgTrace {
            onehot,
            joined,
            pre,
            act,
            contexts,
        })
    }

    /// Context rows for horizons `1..=n`, `[n x model_dim]`.
    pub fn hacg<T: Scalar>(&self, params: &ParameterStore<T>, traj: &[T], n: usize) -> Result<Matrix<T>, ModelError> {
        Self::check_shape("trajectory vector", (1, self.cfg.model_dim), (1, traj.len()))?;
        Ok(self.run_hacg(params.values(), traj, n)?.contexts)
    }

    /// Embedding of the observed differential codes, `[(k-1) x model_dim]`.
    pub fn diff_embed<T: Scalar>(&self, params: &ParameterStore<T>, diffs: &Matrix<T>) -> Result<Matrix<T>, ModelError> {
        Self::check_shape("differential codes", (diffs.rows(), self.layout.diff_total()), diffs.shape())?;
        match &self.diff_embed {
            Some(conv) => Ok(conv.forward(params.values(), diffs).0),
            None => Ok(Matrix::zeros(0, self.cfg.model_dim)),
        }
    }

    fn run_decoder<T: Scalar>(
        &self,
        p: &[T],
        diffs: Option<&Matrix<T>>,
        prompt: Option<Matrix<T>>,
        contexts: &Matrix<T>,
    ) -> Result<DecoderTrace<T>, ModelError> {
        let (prompt, diff_cache) = match (&self.diff_embed, diffs, prompt) {
            (_, _, Some(embeds)) => (embeds, None),
            (Some(conv), Some(diffs), None) => {
                let (y, cache) = conv.forward(p, diffs);
                (y, Some(cache))
            }
            _ => (Matrix::zeros(0, self.cfg.model_dim), None),
        };
        let prompt_rows = prompt.rows();
        let n = contexts.rows();
        let mut h = prompt.vstack(contexts);
        h.add_assign(&sinusoidal_positions(h.rows(), self.cfg.model_dim));
        let mut caches = Vec::with_capacity(self.dec_blocks.len());
        for block in &self.dec_blocks {
            let (out, cache) = block.forward(p, &h);
            caches.push(cache);
            h = out;
        }
        let (normed, norm) = self.dec_norm.forward(p, &h);
        let readout = normed.slice_rows(prompt_rows, n);
        let logits = self.head.forward(p, &readout);
        if !logits.all_finite() {
            return Err(ModelError::NonFinite("decoder logits"));
        }
        let probs = Matrix::from_vec(
            logits.rows(),
            logits.cols(),
            logits.data().iter().map(|&z| sigmoid(z)).collect(),
        );
        Ok(DecoderTrace {
            diff: diff_cache,
            prompt_rows,
            blocks: caches,
            norm,
            readout,
            logits,
            probs,
        })
    }

    /// Causal decoder over `[diff_embeds ; contexts]`; predictions are read
    /// from the last `n` positions.
    pub fn dpd_forward<T: Scalar>(
        &self,
        params: &ParameterStore<T>,
        diff_embeds: &Matrix<T>,
        contexts: &Matrix<T>,
    ) -> Result<SoftPrediction, ModelError> {
        Self::check_shape("contexts", (contexts.rows(), self.cfg.model_dim), contexts.shape())?;
        Self::check_shape("differential embeddings", (diff_embeds.rows(), self.cfg.model_dim), diff_embeds.shape())?;
        let trace = self.run_decoder(params.values(), None, Some(diff_embeds.clone()), contexts)?;
        Ok(SoftPrediction {
            probs: trace.probs.to_f64(),
        })
    }

    fn check_input<T: Scalar>(&self, input: &NetInput<T>) -> Result<(), ModelError> {
        let k = self.cfg.k;
        Self::check_shape("point codes", (k, self.layout.input_total()), input.points.shape())?;
        Self::check_shape("differential codes", (k - 1, self.layout.diff_total()), input.diffs.shape())
    }

    /// Full forward pass keeping every intermediate needed for `backward`.
    pub fn forward_trace<T: Scalar>(
        &self,
        params: &ParameterStore<T>,
        input: &NetInput<T>,
        n: usize,
    ) -> Result<Trace<T>, ModelError> {
        self.check_input(input)?;
        let p = params.values();
        let (embedded, embed_cache) = self.embed_points(p, &input.points);
        let (blocks, norm, embedding, embedded) = self.run_encoder(p, embedded)?;
        let hacg = self.run_hacg(p, &embedding.traj, n)?;
        let decoder = self.run_decoder(p, Some(&input.diffs), None, &hacg.contexts)?;
        Ok(Trace {
            encoder: EncoderTrace {
                embed: embed_cache,
                embedded,
                blocks,
                norm,
                embedding,
            },
            hacg,
            decoder,
        })
    }

    /// One non-autoregressive pass producing all `n` horizons.
    pub fn forward<T: Scalar>(
        &self,
        params: &ParameterStore<T>,
        input: &NetInput<T>,
        n: usize,
    ) -> Result<SoftPrediction, ModelError> {
        let trace = self.forward_trace(params, input, n)?;
        Ok(SoftPrediction {
            probs: trace.decoder.probs.to_f64(),
        })
    }

    /// Pooled trajectory vector of one window.
    pub fn trajectory_embedding<T: Scalar>(
        &self,
        params: &ParameterStore<T>,
        input: &NetInput<T>,
    ) -> Result<Vec<T>, ModelError> {
        self.check_input(input)?;
        let p = params.values();
        let (embedded, _) = self.embed_points(p, &input.points);
        Ok(self.run_encoder(p, embedded)?.2.traj)
    }

    /// Accumulates `d loss / d params` into `grads` given `d loss / d logits`.
    pub fn backward<T: Scalar>(
        &self,
        params: &ParameterStore<T>,
        grads: &mut [T],
        trace: &Trace<T>,
        dlogits: &Matrix<T>,
    ) {
        assert_eq!(grads.len(), params.len());
        let p = params.values();
        let d = self.cfg.model_dim;
        let dec = &trace.decoder;

        // decoder
        let dreadout = self.head.backward(p, grads, &dec.readout, dlogits, true).expect("dx");
        let total = dec.prompt_rows + dreadout.rows();
        let mut dnormed = Matrix::zeros(total, d);
        for r in 0..dreadout.rows() {
            dnormed.row_mut(dec.prompt_rows + r).copy_from_slice(dreadout.row(r));
        }
        let mut dh = self.dec_norm.backward(p, grads, &dec.norm, &dnormed);
        for (block, cache) in self.dec_blocks.iter().zip(&dec.blocks).rev() {
            dh = block.backward(p, grads, cache, &dh);
        }
        let dcontexts = dh.slice_rows(dec.prompt_rows, dh.rows() - dec.prompt_rows);
        if let (Some(conv), Some(cache)) = (&self.diff_embed, &dec.diff) {
            let dprompt = dh.slice_rows(0, dec.prompt_rows);
            conv.backward(p, grads, cache, &dprompt);
        }

        // context generator
        let hacg = &trace.hacg;
        let dact = self.hacg_fc2.backward(p, grads, &hacg.act, &dcontexts, true).expect("dx");
        let dpre = self.cfg.activation.backward(&hacg.pre, &dact);
        let djoined = self.hacg_fc1.backward(p, grads, &hacg.joined, &dpre, true).expect("dx");
        let mut dtraj = vec![T::zero(); d];
        let mut dhe = Matrix::zeros(djoined.rows(), self.cfg.horizon_embed_dim);
        for r in 0..djoined.rows() {
            let row = djoined.row(r);
            for (t, &v) in dtraj.iter_mut().zip(&row[..d]) {
                *t += v;
            }
            dhe.row_mut(r).copy_from_slice(&row[d..]);
        }
        self.horizon.backward(p, grads, &hacg.onehot, &dhe, false);

        // pooling
        let enc = &trace.encoder;
        let emb = &enc.embedding;
        let k = emb.hiddens.rows();
        let mut dhidden = Matrix::zeros(k, d);
        for r in 0..k {
            let wr = emb.weights[r];
            for (dh, &dt) in dhidden.row_mut(r).iter_mut().zip(&dtraj) {
                *dh = wr * dt;
            }
        }
        if let Some(score) = &self.asa_score {
            let dweights: Vec<T> = (0..k)
                .map(|r| emb.hiddens.row(r).iter().zip(&dtraj).map(|(&h, &t)| h * t).sum())
                .collect();
            let mean: T = emb.weights.iter().zip(&dweights).map(|(&w, &g)| w * g).sum();
            let dscores = Matrix::from_vec(
                k,
                1,
                emb.weights.iter().zip(&dweights).map(|(&w, &g)| w * (g - mean)).collect(),
            );
            let dh = score.backward(p, grads, &emb.hiddens, &dscores, true).expect("dx");
            dhidden.add_assign(&dh);
        }

        // encoder
        let mut dh = self.enc_norm.backward(p, grads, &enc.norm, &dhidden);
        for (block, cache) in self.enc_blocks.iter().zip(&enc.blocks).rev() {
            dh = block.backward(p, grads, cache, &dh);
        }
        let dembedded = self.enc_input.backward(p, grads, &enc.embedded, &dh, true).expect("dx");
        match (&self.point_embed, &enc.embed) {
            (PointEmbedLayer::Conv(conv), PointEmbedCache::Conv(cache)) => {
                conv.backward(p, grads, cache, &dembedded);
            }
            (PointEmbedLayer::Linear(layers), PointEmbedCache::Linear(inputs)) => {
                for (layer, x) in layers.iter().zip(inputs) {
                    layer.backward(p, grads, x, &dembedded, false);
                }
            }
            _ => unreachable!("trace built by this network"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::loss::{bce_grad, bce_loss};
    use rand::Rng;

    fn toy() -> (FlightNet, ParameterStore<f64>) {
        FlightNet::new(&ModelConfig::toy(), &BitWidthSpec::default()).unwrap()
    }

    fn random_bits(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix<f64> {
        Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(0..2) as f64).collect())
    }

    fn input(seed: u64, k: usize) -> NetInput<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        NetInput {
            points: random_bits(&mut rng, k, 78),
            diffs: random_bits(&mut rng, k - 1, 48),
        }
    }

    fn dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    }

    #[test]
    fn default_shapes() {
        let cfg = ModelConfig::default();
        let (net, p) = FlightNet::new::<f64>(&cfg, &BitWidthSpec::default()).unwrap();
        let x = input(1, 9);
        let e = net.tpe_embed(&p, &x.points).unwrap();
        assert_eq!(e.shape(), (9, 128));
        let enc = net.encoder_forward(&p, &e).unwrap();
        assert_eq!(enc.hiddens.shape(), (9, 64));
        assert_eq!(enc.traj.len(), 64);
        let c = net.hacg(&p, &enc.traj, 15).unwrap();
        assert_eq!(c.shape(), (15, 64));
        let d = net.diff_embed(&p, &x.diffs).unwrap();
        assert_eq!(d.shape(), (8, 64));
        let out = net.dpd_forward(&p, &d, &c).unwrap();
        assert_eq!(out.probs.shape(), (15, 48));
        assert!(out.probs.data().iter().all(|&v| v > 0.0 && v < 1.0));
        let full = net.forward(&p, &x, 15).unwrap();
        assert_eq!(full, out);
        assert_eq!(full, net.forward(&p, &x, 15).unwrap());
    }

    #[test]
    fn shape_errors() {
        let (net, p) = toy();
        let bad = Matrix::<f64>::zeros(4, 77);
        assert!(matches!(net.tpe_embed(&p, &bad), Err(ModelError::ShapeMismatch { .. })));
        assert!(matches!(net.diff_embed(&p, &bad), Err(ModelError::ShapeMismatch { .. })));
        let traj = vec![0.0; 16];
        assert!(matches!(net.hacg(&p, &traj, 9), Err(ModelError::HorizonOutOfRange { n: 9, max: 8 })));
        assert!(net.hacg(&p, &traj, 0).is_err());
    }

    #[test]
    fn zero_input_gives_zero_embedding() {
        let (net, p) = toy();
        let z = net.tpe_embed(&p, &Matrix::zeros(4, 78)).unwrap();
        assert!(z.data().iter().all(|&v| v == 0.0));
        let z = net.diff_embed(&p, &Matrix::zeros(3, 48)).unwrap();
        assert!(z.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn one_bit_changes_embedding() {
        let (net, p) = toy();
        let x = input(2, 4).points;
        for bit in [0, 17, 40, 77] {
            let mut y = x.clone();
            let v = &mut y.data_mut()[bit];
            *v = 1.0 - *v;
            let a = net.tpe_embed(&p, &x).unwrap();
            let b = net.tpe_embed(&p, &y).unwrap();
            assert!(dist(a.row(0), b.row(0)) > 1e-9, "bit {bit}");
        }
    }

    #[test]
    fn encoder_sees_order() {
        let (net, p) = toy();
        let e = net.tpe_embed(&p, &input(3, 4).points).unwrap();
        let mut rows: Vec<Vec<f64>> = (0..4).map(|r| e.row(r).to_vec()).collect();
        rows.swap(0, 3);
        let a = net.encoder_forward(&p, &e).unwrap();
        let b = net.encoder_forward(&p, &Matrix::from_rows(&rows)).unwrap();
        assert!(dist(&a.traj, &b.traj) > 1e-9);
    }

    #[test]
    fn pooling_is_convex() {
        let (net, p) = toy();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = Matrix::from_vec(5, 16, (0..80).map(|_| rng.gen_range(-2.0..2.0)).collect());
        let pooled = net.asa(&p, &h).unwrap();
        assert!(pooled.weights.iter().all(|&w| w >= 0.0));
        assert!((pooled.weights.iter().sum::<f64>() - 1.0).abs() < 1e-6);

        let one = h.slice_rows(2, 1);
        assert_eq!(net.asa(&p, &one).unwrap().traj, one.row(0));

        let same = Matrix::from_rows(&vec![h.row(1).to_vec(); 6]);
        let pooled = net.asa(&p, &same).unwrap();
        assert!(dist(&pooled.traj, h.row(1)) < 1e-12);
    }

    #[test]
    fn horizon_contexts() {
        let (net, p) = toy();
        let traj: Vec<f64> = (0..16).map(|i| (i as f64 * 0.3).cos()).collect();
        let c3 = net.hacg(&p, &traj, 3).unwrap();
        let c8 = net.hacg(&p, &traj, 8).unwrap();
        for i in 0..3 {
            assert_eq!(c3.row(i), c8.row(i));
        }
        for i in 0..8 {
            for j in i + 1..8 {
                assert!(dist(c8.row(i), c8.row(j)) > 1e-9);
            }
        }
    }

    #[test]
    fn decoder_is_causal() {
        let (net, p) = toy();
        let x = input(5, 4);
        let traj = net.trajectory_embedding(&p, &x).unwrap();
        let c = net.hacg(&p, &traj, 6).unwrap();
        let d = net.diff_embed(&p, &x.diffs).unwrap();
        let base = net.dpd_forward(&p, &d, &c).unwrap();
        for j in 0..6 {
            let mut c2 = c.clone();
            c2.row_mut(j)[3] += 0.5;
            let out = net.dpd_forward(&p, &d, &c2).unwrap();
            for i in 0..j {
                assert_eq!(out.row(i), base.row(i), "row {i} moved when context {j} changed");
            }
            assert_ne!(out.row(j), base.row(j));
        }
    }

    #[test]
    fn latest_observation_matters() {
        let (net, p) = toy();
        let x = input(6, 4);
        let mut y = x.clone();
        let v = &mut y.points.row_mut(3)[10];
        *v = 1.0 - *v;
        let a = net.forward(&p, &x, 3).unwrap();
        let b = net.forward(&p, &y, 3).unwrap();
        assert!(dist(a.probs.data(), b.probs.data()) > 1e-9);
    }

    #[test]
    fn one_encoder_pass_per_forward() {
        let (net, p) = toy();
        net.reset_encoder_passes();
        net.forward(&p, &input(7, 4), 8).unwrap();
        assert_eq!(net.encoder_passes(), 1);
    }

    fn loss_of(net: &FlightNet, p: &ParameterStore<f64>, x: &NetInput<f64>, t: &Matrix<f64>) -> f64 {
        let out = net.forward(p, x, t.rows()).unwrap();
        bce_loss(&out.probs, t, net.layout()).unwrap()
    }

    fn sampled_gradient_check(cfg: ModelConfig) {
        let layout = BitWidthSpec::default();
        let (net, mut p) = FlightNet::new::<f64>(&cfg, &layout).unwrap();
        let x = input(8, cfg.k);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let t = random_bits(&mut rng, cfg.n, 48);
        let trace = net.forward_trace(&p, &x, cfg.n).unwrap();
        let dl = bce_grad(&trace.decoder.probs, &t, &layout, cfg.n).unwrap();
        let mut g = p.zeros_like();
        net.backward(&p, &mut g, &trace, &dl);
        let h = 1e-5;
        for e in p.entries().to_vec() {
            for idx in [0, e.id.len / 2, e.id.len - 1] {
                let i = e.id.offset + idx;
                let orig = p.values()[i];
                p.values_mut()[i] = orig + h;
                let lp = loss_of(&net, &p, &x, &t);
                p.values_mut()[i] = orig - h;
                let lm = loss_of(&net, &p, &x, &t);
                p.values_mut()[i] = orig;
                let fd = (lp - lm) / (2.0 * h);
                let rel = (fd - g[i]).abs() / fd.abs().max(g[i].abs()).max(1e-6);
                assert!(rel < 1e-4, "{}[{idx}]: analytic {} numeric {fd}", e.name, g[i]);
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        sampled_gradient_check(ModelConfig::toy());
    }

    #[test]
    fn ablation_gradients_match_finite_differences() {
        sampled_gradient_check(ModelConfig {
            pooling: Pooling::Sum,
            point_embedding: PointEmbedding::Linear,
            differential_prompt: false,
            ..ModelConfig::toy()
        });
    }
}
