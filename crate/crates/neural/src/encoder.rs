//! Pre-norm transformer encoder over layout-aware input embeddings, with a
//! hand-written backward pass.
//!
//! Per token the input embedding is
//! `token + position + segment + x[x0] + x[x1] + y[y0] + y[y1]`: four layout
//! lookups into two coordinate tables.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, ArrayView2, Axis, Zip};
use rand::{Rng, RngCore};
use vrdie_core::GridBBox;

use crate::config::EncoderConfig;
use crate::error::{Error, Result};
use crate::params::{EncoderParameters, LayerParams, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct ModelInput {
    pub token_ids: Vec<u32>,
    pub positions: Vec<u32>,
    pub segments: Vec<u32>,
    pub bboxes: Vec<GridBBox>,
    /// `false` marks padding: never attended to, never scored.
    pub mask: Vec<bool>,
}

impl ModelInput {
    /// Positions `0..n`, segment 0, nothing masked.
    pub fn new(token_ids: Vec<u32>, bboxes: Vec<GridBBox>) -> Self {
        let n = token_ids.len();
        Self {
            token_ids,
            positions: (0..n as u32).collect(),
            segments: vec![0; n],
            bboxes,
            mask: vec![true; n],
        }
    }

    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }

    pub fn validate(&self, config: &EncoderConfig) -> Result<()> {
        let n = self.len();
        if n == 0 {
            return Err(Error::Input("empty sequence".into()));
        }
        if self.positions.len() != n || self.segments.len() != n || self.bboxes.len() != n || self.mask.len() != n {
            return Err(Error::Input("input fields differ in length".into()));
        }
        if n > config.max_seq_len {
            return Err(Error::Input(format!("sequence of {n} exceeds max_seq_len {}", config.max_seq_len)));
        }
        let check = |what: &str, ids: &[u32], limit: usize| -> Result<()> {
            match ids.iter().position(|&id| id as usize >= limit) {
                Some(i) => Err(Error::Input(format!("{what} id {} at {i} outside table of {limit}", ids[i]))),
                None => Ok(()),
            }
        };
        check("token", &self.token_ids, config.vocab_size)?;
        check("position", &self.positions, config.max_seq_len)?;
        check("segment", &self.segments, config.segment_count)?;
        if let Some(i) = self.bboxes.iter().position(|b| !b.is_valid()) {
            return Err(Error::Input(format!("bbox {:?} at {i} off the layout grid", self.bboxes[i])));
        }
        if !self.mask.iter().any(|&m| m) {
            return Err(Error::Input("every position is masked".into()));
        }
        Ok(())
    }
}

/// Summed input embeddings `[len x hidden]`.
pub fn embed(config: &EncoderConfig, params: &EncoderParameters, input: &ModelInput) -> Result<Matrix> {
    input.validate(config)?;
    let mut out = Array2::zeros((input.len(), config.hidden_size));
    for (i, mut row) in out.rows_mut().into_iter().enumerate() {
        row += &params.token.row(input.token_ids[i] as usize);
        row += &params.position.row(input.positions[i] as usize);
        row += &params.segment.row(input.segments[i] as usize);
        if config.use_layout {
            let b = input.bboxes[i];
            row += &params.x_layout.row(b.x0 as usize);
            row += &params.x_layout.row(b.x1 as usize);
            row += &params.y_layout.row(b.y0 as usize);
            row += &params.y_layout.row(b.y1 as usize);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
struct NormCache {
    xhat: Matrix,
    inv_std: Vec<f64>,
}

fn layer_norm(x: &Matrix, g: &Matrix, b: &Matrix, eps: f64) -> (Matrix, NormCache) {
    let n = x.ncols() as f64;
    let mut xhat = x.clone();
    let mut inv_std = Vec::with_capacity(x.nrows());
    for mut row in xhat.rows_mut() {
        let mean = row.sum() / n;
        row.mapv_inplace(|v| v - mean);
        let var = row.iter().map(|v| v * v).sum::<f64>() / n;
        let inv = 1.0 / (var + eps).sqrt();
        row.mapv_inplace(|v| v * inv);
        inv_std.push(inv);
    }
    let y = &xhat * g + b;
    (y, NormCache { xhat, inv_std })
}

fn layer_norm_backward(dy: &Matrix, cache: &NormCache, g: &Matrix, dg: &mut Matrix, db: &mut Matrix) -> Matrix {
    *dg += &(dy * &cache.xhat).sum_axis(Axis(0)).insert_axis(Axis(0));
    *db += &dy.sum_axis(Axis(0)).insert_axis(Axis(0));
    let n = dy.ncols() as f64;
    let mut dx = dy * g;
    for ((mut row, xhat), &inv) in dx.rows_mut().into_iter().zip(cache.xhat.rows()).zip(&cache.inv_std) {
        let mean_d = row.sum() / n;
        let mean_dx = row.iter().zip(xhat).map(|(d, x)| d * x).sum::<f64>() / n;
        Zip::from(&mut row).and(&xhat).for_each(|d, &x| *d = (*d - mean_d - x * mean_dx) * inv);
    }
    dx
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)

fn gelu(u: f64) -> f64 {
    0.5 * u * (1.0 + (GELU_C * (u + 0.044715 * u * u * u)).tanh())
}

fn gelu_grad(u: f64) -> f64 {
    let t = (GELU_C * (u + 0.044715 * u * u * u)).tanh();
    0.5 * (1.0 + t) + 0.5 * u * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * u * u)
}

fn affine(x: &Matrix, w: &Matrix, b: &Matrix) -> Matrix {
    x.dot(w) + b
}

/// `acc += a^T . b`
fn add_at_b(acc: &mut Matrix, a: &ArrayView2<f64>, b: &ArrayView2<f64>) {
    general_mat_mul(1.0, &a.t(), b, 1.0, acc);
}

fn dropout_mask(shape: (usize, usize), rate: f64, rng: &mut dyn RngCore) -> Matrix {
    let keep = 1.0 / (1.0 - rate);
    Array2::from_shape_simple_fn(shape, || if rng.random::<f64>() < rate { 0.0 } else { keep })
}

#[derive(Debug, Clone)]
struct LayerCache {
    attn_norm: NormCache,
    normed: Matrix,
    q: Matrix,
    k: Matrix,
    v: Matrix,
    probs: Vec<Matrix>,
    context: Matrix,
    attn_drop: Option<Matrix>,
    ffn_norm: NormCache,
    ffn_in: Matrix,
    pre_act: Matrix,
    act: Matrix,
    ffn_drop: Option<Matrix>,
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    embed_drop: Option<Matrix>,
    layers: Vec<LayerCache>,
    final_norm: Option<NormCache>,
    /// Contextual representation `[len x hidden]`.
    pub hidden: Matrix,
}

fn attention(
    config: &EncoderConfig,
    l: &LayerParams,
    normed: &Matrix,
    key_bias: &[f64],
) -> (Matrix, Matrix, Matrix, Vec<Matrix>, Matrix) {
    let q = affine(normed, &l.wq, &l.bq);
    let k = affine(normed, &l.wk, &l.bk);
    let v = affine(normed, &l.wv, &l.bv);
    let d = config.head_dim();
    let scale = 1.0 / (d as f64).sqrt();
    let mut context = Array2::zeros(q.raw_dim());
    let mut probs = Vec::with_capacity(config.head_count);
    for h in 0..config.head_count {
        let cols = s![.., h * d..(h + 1) * d];
        let mut scores = q.slice(cols).dot(&k.slice(cols).t());
        for mut row in scores.rows_mut() {
            Zip::from(&mut row).and(key_bias).for_each(|s, &bias| *s = *s * scale + bias);
            let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            row.mapv_inplace(|v| (v - max).exp());
            let sum = row.sum();
            row.mapv_inplace(|v| v / sum);
        }
        context.slice_mut(cols).assign(&scores.dot(&v.slice(cols)));
        probs.push(scores);
    }
    (q, k, v, probs, context)
}

/// Run the encoder stack. Dropout is applied only when `dropout_rng` is
/// given and the configured rate is positive.
pub fn forward(
    config: &EncoderConfig,
    params: &EncoderParameters,
    input: &ModelInput,
    mut dropout_rng: Option<&mut dyn RngCore>,
) -> Result<ForwardPass> {
    let mut x = embed(config, params, input)?;
    let shape = x.dim();
    let rate = config.dropout;
    let mut maybe_drop = |x: &mut Matrix| -> Option<Matrix> {
        match dropout_rng.as_deref_mut() {
            Some(rng) if rate > 0.0 => {
                let m = dropout_mask(shape, rate, rng);
                *x *= &m;
                Some(m)
            }
            _ => None,
        }
    };
    let embed_drop = maybe_drop(&mut x);
    let key_bias: Vec<f64> = input
        .mask
        .iter()
        .map(|&m| if m { 0.0 } else { f64::NEG_INFINITY })
        .collect();
    let eps = config.layer_norm_eps;

    let mut layers = Vec::with_capacity(params.layers.len());
    for (index, l) in params.layers.iter().enumerate() {
        let (normed, attn_norm) = layer_norm(&x, &l.attn_norm_g, &l.attn_norm_b, eps);
        let (q, k, v, probs, context) = attention(config, l, &normed, &key_bias);
        let mut attn_out = affine(&context, &l.wo, &l.bo);
        let attn_drop = maybe_drop(&mut attn_out);
        x += &attn_out;

        let (ffn_in, ffn_norm) = layer_norm(&x, &l.ffn_norm_g, &l.ffn_norm_b, eps);
        let pre_act = affine(&ffn_in, &l.w1, &l.b1);
        let act = pre_act.mapv(gelu);
        let mut ffn_out = affine(&act, &l.w2, &l.b2);
        let ffn_drop = maybe_drop(&mut ffn_out);
        x += &ffn_out;

        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric { layer: index });
        }
        layers.push(LayerCache {
            attn_norm,
            normed,
            q,
            k,
            v,
            probs,
            context,
            attn_drop,
            ffn_norm,
            ffn_in,
            pre_act,
            act,
            ffn_drop,
        });
    }
    let final_norm = if layers.is_empty() {
        None
    } else {
        let (normed, cache) = layer_norm(&x, &params.final_norm_g, &params.final_norm_b, eps);
        x = normed;
        Some(cache)
    };
    Ok(ForwardPass {
        embed_drop,
        layers,
        final_norm,
        hidden: x,
    })
}

/// Accumulate into `grads` the gradient of a loss whose derivative with
/// respect to `pass.hidden` is `d_hidden`.
pub fn backward(
    config: &EncoderConfig,
    params: &EncoderParameters,
    input: &ModelInput,
    pass: &ForwardPass,
    d_hidden: &Matrix,
    grads: &mut EncoderParameters,
) {
    let mut dx = match &pass.final_norm {
        Some(cache) => layer_norm_backward(
            d_hidden,
            cache,
            &params.final_norm_g,
            &mut grads.final_norm_g,
            &mut grads.final_norm_b,
        ),
        None => d_hidden.clone(),
    };
    let d = config.head_dim();
    let scale = 1.0 / (d as f64).sqrt();

    for ((l, cache), g) in params
        .layers
        .iter()
        .zip(&pass.layers)
        .zip(grads.layers.iter_mut())
        .rev()
    {
        // feed-forward branch
        let mut d_ffn = dx.clone();
        if let Some(m) = &cache.ffn_drop {
            d_ffn *= m;
        }
        add_at_b(&mut g.w2, &cache.act.view(), &d_ffn.view());
        g.b2 += &d_ffn.sum_axis(Axis(0)).insert_axis(Axis(0));
        let mut d_pre = d_ffn.dot(&l.w2.t());
        Zip::from(&mut d_pre).and(&cache.pre_act).for_each(|d, &u| *d *= gelu_grad(u));
        add_at_b(&mut g.w1, &cache.ffn_in.view(), &d_pre.view());
        g.b1 += &d_pre.sum_axis(Axis(0)).insert_axis(Axis(0));
        let d_ffn_in = d_pre.dot(&l.w1.t());
        dx += &layer_norm_backward(&d_ffn_in, &cache.ffn_norm, &l.ffn_norm_g, &mut g.ffn_norm_g, &mut g.ffn_norm_b);

        // attention branch
        let mut d_attn = dx.clone();
        if let Some(m) = &cache.attn_drop {
            d_attn *= m;
        }
        add_at_b(&mut g.wo, &cache.context.view(), &d_attn.view());
        g.bo += &d_attn.sum_axis(Axis(0)).insert_axis(Axis(0));
        let d_context = d_attn.dot(&l.wo.t());
        let mut dq = Array2::zeros(cache.q.raw_dim());
        let mut dk = Array2::zeros(cache.k.raw_dim());
        let mut dv = Array2::zeros(cache.v.raw_dim());
        for (h, p) in cache.probs.iter().enumerate() {
            let cols = s![.., h * d..(h + 1) * d];
            let d_out = d_context.slice(cols);
            dv.slice_mut(cols).assign(&p.t().dot(&d_out));
            let mut d_scores = d_out.dot(&cache.v.slice(cols).t());
            for (mut ds, pr) in d_scores.rows_mut().into_iter().zip(p.rows()) {
                let dot: f64 = ds.iter().zip(pr).map(|(a, b)| a * b).sum();
                Zip::from(&mut ds).and(&pr).for_each(|d, &p| *d = p * (*d - dot) * scale);
            }
            dq.slice_mut(cols).assign(&d_scores.dot(&cache.k.slice(cols)));
            dk.slice_mut(cols).assign(&d_scores.t().dot(&cache.q.slice(cols)));
        }
        let normed = cache.normed.view();
        add_at_b(&mut g.wq, &normed, &dq.view());
        add_at_b(&mut g.wk, &normed, &dk.view());
        add_at_b(&mut g.wv, &normed, &dv.view());
        g.bq += &dq.sum_axis(Axis(0)).insert_axis(Axis(0));
        g.bk += &dk.sum_axis(Axis(0)).insert_axis(Axis(0));
        g.bv += &dv.sum_axis(Axis(0)).insert_axis(Axis(0));
        let mut d_normed = dq.dot(&l.wq.t());
        general_mat_mul(1.0, &dk, &l.wk.t(), 1.0, &mut d_normed);
        general_mat_mul(1.0, &dv, &l.wv.t(), 1.0, &mut d_normed);
        dx += &layer_norm_backward(&d_normed, &cache.attn_norm, &l.attn_norm_g, &mut g.attn_norm_g, &mut g.attn_norm_b);
    }

    if let Some(m) = &pass.embed_drop {
        dx *= m;
    }
    for (i, row) in dx.rows().into_iter().enumerate() {
        let add = |table: &mut Matrix, id: usize| {
            let mut r = table.row_mut(id);
            r += &row;
        };
        add(&mut grads.token, input.token_ids[i] as usize);
        add(&mut grads.position, input.positions[i] as usize);
        add(&mut grads.segment, input.segments[i] as usize);
        if config.use_layout {
            let b = input.bboxes[i];
            add(&mut grads.x_layout, b.x0 as usize);
            add(&mut grads.x_layout, b.x1 as usize);
            add(&mut grads.y_layout, b.y0 as usize);
            add(&mut grads.y_layout, b.y1 as usize);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(layers: usize) -> (EncoderConfig, EncoderParameters) {
        let mut cfg = EncoderConfig::tiny(30, 5);
        cfg.hidden_size = 8;
        cfg.head_count = 2;
        cfg.ffn_size = 16;
        cfg.layer_count = layers;
        cfg.max_seq_len = 16;
        let p = EncoderParameters::init(&cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        (cfg, p)
    }

    fn input(ids: &[u32]) -> ModelInput {
        let boxes = ids
            .iter()
            .map(|&i| GridBBox::new(i as u16 * 10, 5, i as u16 * 10 + 8, 20))
            .collect();
        ModelInput::new(ids.to_vec(), boxes)
    }

    #[test]
    fn zero_tables_embed_to_zero() {
        let (cfg, p) = setup(1);
        let z = p.zeros_like();
        let e = embed(&cfg, &z, &input(&[1, 2, 3])).unwrap();
        assert!(e.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identical_tokens_embed_identically() {
        let (cfg, p) = setup(1);
        let mut inp = input(&[4, 4]);
        inp.positions = vec![3, 3];
        let e = embed(&cfg, &p, &inp).unwrap();
        assert_eq!(e.row(0), e.row(1));
    }

    #[test]
    fn both_x_corners_share_one_table() {
        let (cfg, p) = setup(1);
        let mut z = p.zeros_like();
        let v: Vec<f64> = (0..8).map(|i| i as f64 + 1.0).collect();
        z.x_layout.row_mut(5).assign(&ndarray::Array1::from(v.clone()));
        let inp = ModelInput::new(vec![0], vec![GridBBox::new(5, 0, 5, 0)]);
        let e = embed(&cfg, &z, &inp).unwrap();
        let want: Vec<f64> = v.iter().map(|x| 2.0 * x).collect();
        assert_eq!(e.row(0).to_vec(), want);
    }

    #[test]
    fn layout_disabled_ignores_boxes() {
        let (mut cfg, p) = setup(1);
        cfg.use_layout = false;
        let a = input(&[1, 2]);
        let mut b = a.clone();
        b.bboxes[0] = GridBBox::new(900, 900, 950, 950);
        assert_eq!(embed(&cfg, &p, &a).unwrap(), embed(&cfg, &p, &b).unwrap());
    }

    #[test]
    fn out_of_range_ids_rejected() {
        let (cfg, p) = setup(1);
        assert!(embed(&cfg, &p, &input(&[30])).is_err());
        let mut inp = input(&[1]);
        inp.segments = vec![2];
        assert!(embed(&cfg, &p, &inp).is_err());
        let mut inp = input(&[1]);
        inp.bboxes = vec![GridBBox::new(0, 0, 1001, 3)];
        assert!(embed(&cfg, &p, &inp).is_err());
        let mut inp = input(&[1]);
        inp.mask = vec![false];
        assert!(embed(&cfg, &p, &inp).is_err());
    }

    #[test]
    fn empty_stack_returns_embeddings() {
        let (cfg, p) = setup(0);
        let inp = input(&[1, 2, 3]);
        let pass = forward(&cfg, &p, &inp, None).unwrap();
        assert_eq!(pass.hidden, embed(&cfg, &p, &inp).unwrap());
    }

    #[test]
    fn swapping_identical_tokens_swaps_outputs() {
        let (cfg, p) = setup(2);
        let mut inp = input(&[5, 6, 5]);
        inp.positions = vec![2, 1, 2];
        let h = forward(&cfg, &p, &inp, None).unwrap().hidden;
        assert_eq!(h.row(0), h.row(2));
    }

    #[test]
    fn masked_positions_do_not_leak() {
        let (cfg, p) = setup(2);
        let mut a = input(&[1, 2, 3, 4]);
        a.mask = vec![true, true, false, true];
        let mut b = a.clone();
        b.token_ids[2] = 17;
        b.bboxes[2] = GridBBox::new(1, 1, 700, 700);
        let ha = forward(&cfg, &p, &a, None).unwrap().hidden;
        let hb = forward(&cfg, &p, &b, None).unwrap().hidden;
        for i in [0, 1, 3] {
            assert_eq!(ha.row(i), hb.row(i));
        }
    }

    #[test]
    fn nan_reports_layer() {
        let (cfg, mut p) = setup(2);
        p.layers[1].b2[[0, 0]] = f64::NAN;
        match forward(&cfg, &p, &input(&[1, 2]), None) {
            Err(Error::Numeric { layer }) => assert_eq!(layer, 1),
            other => panic!("expected numeric error, got {other:?}"),
        }
    }

    #[test]
    fn dropout_only_with_rng() {
        let (mut cfg, p) = setup(2);
        cfg.dropout = 0.5;
        let inp = input(&[1, 2, 3]);
        let a = forward(&cfg, &p, &inp, None).unwrap().hidden;
        let b = forward(&cfg, &p, &inp, None).unwrap().hidden;
        assert_eq!(a, b);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = forward(&cfg, &p, &inp, Some(&mut rng)).unwrap().hidden;
        assert_ne!(a, c);
    }
}
