use ndarray::{s, Array1, Array2, ArrayView2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::params::{FilterBank, ModelParams};
use super::{DropoutSchedule, Variant};
use crate::centrality::EIK_COLUMNS;
use crate::embedding::{embed_ids, PAD};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Probabilities are clamped to `[LOSS_CLAMP, 1 - LOSS_CLAMP]` inside the loss.
pub const LOSS_CLAMP: f64 = 1e-7;

/// One document as the network sees it. Supply exactly the inputs the
/// variant consumes.
#[derive(Clone, Copy, Debug)]
pub struct Input<'a, T> {
    /// Vocabulary ids of the document tokens (truncated to the text capacity).
    pub text: Option<&'a [usize]>,
    /// Knowledge matrix, keywords × 4.
    pub eik: Option<ArrayView2<'a, T>>,
}

pub enum Mode<'a> {
    Infer,
    Train { rng: &'a mut ChaCha8Rng, dropout: &'a DropoutSchedule },
}

/// Inverted-dropout masks: each entry is 0 or `1 / (1 - p)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DropoutMasks<T> {
    pub input: Option<Array2<T>>,
    pub text_banks: Vec<Array1<T>>,
    pub knowledge: Option<Array1<T>>,
    pub dense: Array1<T>,
}

#[derive(Clone, Debug, PartialEq)]
struct Pooled<T> {
    values: Vec<T>,
    argmax: Vec<usize>,
}

/// Everything the backward pass needs from a forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace<T> {
    variant: Variant,
    layout: Vec<usize>,
    ids: Vec<usize>,
    text: Option<Array2<T>>,
    text_pools: Vec<Pooled<T>>,
    eik: Option<Array2<T>>,
    knowledge_pool: Option<Pooled<T>>,
    features: Array1<T>,
    masks: Option<DropoutMasks<T>>,
    hidden_pre: Array1<T>,
    hidden: Array1<T>,
    pub prob: T,
}

fn relu<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        T::zero()
    }
}

fn sigmoid<T: Scalar>(x: T) -> T {
    let p = if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    };
    // Keep the output strictly inside (0, 1) even for saturated logits.
    p.max(T::min_positive_value()).min(T::one() - T::epsilon() / T::lit(2.0))
}

/// Slides every filter down `m` with stride 1, applies ReLU and max-pools.
///
/// Only the first `active_rows` rows may be nonzero. Slices lying entirely
/// in the zero tail all evaluate to the bias, so one representative (the
/// first such slice) stands in for them; pooled values and first-index
/// argmax are unchanged.
fn conv_pool<T: Scalar>(m: ArrayView2<'_, T>, bank: &FilterBank<T>, active_rows: usize) -> Result<Pooled<T>> {
    let (rows, width) = m.dim();
    let h = bank.height;
    if width != bank.width {
        return Err(Error::Shape(format!("input has {width} columns, filters expect {}", bank.width)));
    }
    if rows < h {
        return Err(Error::Shape(format!("input has {rows} rows, filter height is {h}")));
    }
    let slices = rows - h + 1;
    let computed = slices.min(active_rows);
    let pad_slice = (slices > active_rows).then_some(active_rows);

    let m = m.as_standard_layout();
    let flat = m.as_slice().expect("standard layout");
    let span = h * width;
    let patches = Array2::from_shape_fn((computed, span), |(k, j)| flat[k * width + j]);
    let z = patches.dot(&bank.weights.t());

    let filters = bank.filters();
    let mut values = Vec::with_capacity(filters);
    let mut argmax = Vec::with_capacity(filters);
    for f in 0..filters {
        let b = bank.bias[f];
        let mut best: Option<(usize, T)> = None;
        let candidates = (0..computed).map(|k| (k, relu(z[[k, f]] + b))).chain(pad_slice.map(|k| (k, relu(b))));
        for (k, v) in candidates {
            if best.is_none_or(|(_, bv)| v > bv) {
                best = Some((k, v));
            }
        }
        let (k, v) = best.expect("at least one slice");
        argmax.push(k);
        values.push(v);
    }
    Ok(Pooled { values, argmax })
}

/// Pooled feature per filter: `max_k ReLU(<F, M[k..k+h]> + b)`.
pub fn conv_branch<T: Scalar>(m: ArrayView2<'_, T>, bank: &FilterBank<T>) -> Result<Vec<T>> {
    Ok(conv_pool(m, bank, m.nrows())?.values)
}

fn keep_mask<T: Scalar>(rng: &mut ChaCha8Rng, len: usize, p: f64) -> Array1<T> {
    if p == 0.0 {
        return Array1::ones(len);
    }
    let scale = T::lit(1.0 / (1.0 - p));
    Array1::from_shape_simple_fn(len, || if rng.random::<f64>() < p { T::zero() } else { scale })
}

/// Draws masks for one forward pass. Only the first `text_len` rows of the
/// input mask are drawn; the rest are padding and stay zero anyway.
pub fn sample_masks<T: Scalar>(
    params: &ModelParams<T>,
    text_len: usize,
    dropout: &DropoutSchedule,
    rng: &mut ChaCha8Rng,
) -> Result<DropoutMasks<T>> {
    dropout.validate(&params.arch)?;
    let arch = &params.arch;
    let input = params.variant.uses_text().then(|| {
        let n = arch.embedding_dim;
        let used = text_len.min(arch.seq_len);
        let mut mask = Array2::zeros((arch.seq_len, n));
        let drawn = keep_mask::<T>(rng, used * n, dropout.input);
        mask.slice_mut(s![..used, ..]).assign(&drawn.into_shape_with_order((used, n)).expect("mask shape"));
        mask
    });
    let text_banks =
        params.text_banks.iter().zip(&dropout.text_banks).map(|(b, &p)| keep_mask(rng, b.filters(), p)).collect();
    let knowledge = params.knowledge_bank.as_ref().map(|b| keep_mask(rng, b.filters(), dropout.knowledge));
    let dense = keep_mask(rng, arch.hidden, dropout.dense);
    Ok(DropoutMasks { input, text_banks, knowledge, dense })
}

fn check_inputs<T: Scalar>(params: &ModelParams<T>, input: &Input<'_, T>) -> Result<()> {
    let variant = params.variant;
    let guard = |what: &str| Err(Error::Variant { variant: variant.to_string(), what: what.to_string() });
    match (variant.uses_text(), input.text.is_some()) {
        (true, false) => return guard("a missing text input"),
        (false, true) => return guard("a text input"),
        _ => {}
    }
    match (variant.uses_knowledge(), input.eik.is_some()) {
        (true, false) => return guard("a missing knowledge matrix"),
        (false, true) => return guard("a knowledge matrix input"),
        _ => {}
    }
    if let Some(eik) = input.eik {
        let want = (params.arch.keywords, EIK_COLUMNS);
        if eik.dim() != want {
            return Err(Error::Shape(format!("knowledge matrix is {:?}, expected {want:?}", eik.dim())));
        }
    }
    if let Some(ids) = input.text {
        let vocab = params.embedding.nrows();
        if let Some(&bad) = ids.iter().find(|&&id| id >= vocab) {
            return Err(Error::Shape(format!("token id {bad} outside vocabulary of {vocab}")));
        }
    }
    Ok(())
}

/// Forward pass with explicit masks (`None` = inference, no dropout).
pub fn forward_with_masks<T: Scalar>(
    params: &ModelParams<T>,
    input: Input<'_, T>,
    masks: Option<&DropoutMasks<T>>,
) -> Result<Trace<T>> {
    check_inputs(params, &input)?;
    let arch = &params.arch;
    let mut features = Vec::with_capacity(arch.pooled_features(params.variant));
    let mut ids = Vec::new();
    let mut text = None;
    let mut text_pools = Vec::new();
    if let Some(token_ids) = input.text {
        let embedded = embed_ids(token_ids, &params.embedding, arch.seq_len);
        let mut x = embedded.matrix;
        if let Some(mask) = masks.and_then(|m| m.input.as_ref()) {
            x *= mask;
        }
        for (i, bank) in params.text_banks.iter().enumerate() {
            let pooled = conv_pool(x.view(), bank, embedded.ids.len())?;
            let mask = masks.map(|m| &m.text_banks[i]);
            features.extend(pooled.values.iter().enumerate().map(|(f, &v)| mask.map_or(v, |m| v * m[f])));
            text_pools.push(pooled);
        }
        ids = embedded.ids;
        text = Some(x);
    }
    let mut eik = None;
    let mut knowledge_pool = None;
    if let (Some(e), Some(bank)) = (input.eik, &params.knowledge_bank) {
        let pooled = conv_pool(e, bank, e.nrows())?;
        let mask = masks.and_then(|m| m.knowledge.as_ref());
        features.extend(pooled.values.iter().enumerate().map(|(f, &v)| mask.map_or(v, |m| v * m[f])));
        knowledge_pool = Some(pooled);
        eik = Some(e.to_owned());
    }
    let features = Array1::from(features);
    let hidden_pre = params.dense_w.dot(&features) + &params.dense_b;
    let mut hidden = hidden_pre.mapv(relu);
    if let Some(m) = masks {
        hidden *= &m.dense;
    }
    let logit = params.out_w.dot(&hidden) + params.out_b[0];
    Ok(Trace {
        variant: params.variant,
        layout: params.layout(),
        ids,
        text,
        text_pools,
        eik,
        knowledge_pool,
        features,
        masks: masks.cloned(),
        hidden_pre,
        hidden,
        prob: sigmoid(logit),
    })
}

/// Forward pass. Training mode draws fresh dropout masks from the generator.
pub fn forward<T: Scalar>(params: &ModelParams<T>, input: Input<'_, T>, mode: Mode<'_>) -> Result<Trace<T>> {
    match mode {
        Mode::Infer => forward_with_masks(params, input, None),
        Mode::Train { rng, dropout } => {
            let len = input.text.map_or(0, <[usize]>::len);
            let masks = sample_masks(params, len, dropout, rng)?;
            forward_with_masks(params, input, Some(&masks))
        }
    }
}

pub fn predict_proba<T: Scalar>(params: &ModelParams<T>, input: Input<'_, T>) -> Result<T> {
    Ok(forward_with_masks(params, input, None)?.prob)
}

/// Binary cross-entropy with the probability clamped away from 0 and 1.
pub fn bce_loss<T: Scalar>(p: T, y: u8) -> T {
    let eps = T::lit(LOSS_CLAMP);
    let p = p.max(eps).min(T::one() - eps);
    if y == 1 {
        -p.ln()
    } else {
        -(T::one() - p).ln()
    }
}

/// Routes pooled-feature gradients back through one bank: filter gradients
/// into `grad_bank`, input gradients into `grad_input`.
fn conv_backward<T: Scalar>(
    x: ArrayView2<'_, T>,
    bank: &FilterBank<T>,
    pooled: &Pooled<T>,
    upstream: &[T],
    grad_bank: &mut FilterBank<T>,
    mut grad_input: Option<&mut Array2<T>>,
) {
    let width = bank.width;
    let span = bank.height * width;
    for (f, &g) in upstream.iter().enumerate() {
        if g == T::zero() || pooled.values[f] <= T::zero() {
            continue;
        }
        let k = pooled.argmax[f];
        let patch = x.slice(s![k..k + bank.height, ..]);
        let mut gw = grad_bank.weights.row_mut(f);
        for (j, (dst, &xv)) in gw.iter_mut().zip(patch.iter()).enumerate() {
            debug_assert!(j < span);
            *dst += g * xv;
        }
        grad_bank.bias[f] += g;
        if let Some(gx) = grad_input.as_deref_mut() {
            let w = bank.weights.row(f);
            let mut dst = gx.slice_mut(s![k..k + bank.height, ..]);
            for (d, &wv) in dst.iter_mut().zip(w.iter()) {
                *d += g * wv;
            }
        }
    }
}

/// Exact gradient of `bce_loss(trace.prob, y)` with respect to every
/// parameter, reusing the dropout masks of the forward pass.
///
/// The logit gradient is `p - y`, the derivative of the unclamped loss.
/// Max-pooling routes each filter's gradient to its first argmax slice only.
pub fn backward<T: Scalar>(params: &ModelParams<T>, trace: &Trace<T>, y: u8) -> Result<ModelParams<T>> {
    let mut grad = params.zeros_like();
    backward_into(params, trace, y, &mut grad)?;
    Ok(grad)
}

/// Like [`backward`] but adds the gradient into `grad`.
pub fn backward_into<T: Scalar>(
    params: &ModelParams<T>,
    trace: &Trace<T>,
    y: u8,
    grad: &mut ModelParams<T>,
) -> Result<()> {
    if trace.variant != params.variant || trace.layout != params.layout() {
        return Err(Error::Shape("trace was not produced by a forward pass of these parameters".into()));
    }
    params.check_congruent(grad)?;
    if y > 1 {
        return Err(Error::Data(format!("label must be 0 or 1, got {y}")));
    }
    let dz = trace.prob - T::from_u8(y).expect("0 or 1");
    grad.out_w.scaled_add(dz, &trace.hidden);
    grad.out_b[0] += dz;

    let mut d_hidden = params.out_w.mapv(|w| w * dz);
    if let Some(m) = &trace.masks {
        d_hidden *= &m.dense;
    }
    let d_pre =
        Array1::from_shape_fn(
            d_hidden.len(),
            |i| {
                if trace.hidden_pre[i] > T::zero() {
                    d_hidden[i]
                } else {
                    T::zero()
                }
            },
        );
    for (i, &d) in d_pre.iter().enumerate() {
        if d != T::zero() {
            grad.dense_w.row_mut(i).scaled_add(d, &trace.features);
        }
    }
    grad.dense_b += &d_pre;
    let d_features = params.dense_w.t().dot(&d_pre);

    let mut offset = 0;
    if let Some(x) = &trace.text {
        let mut d_text = Array2::zeros(x.dim());
        for (i, bank) in params.text_banks.iter().enumerate() {
            let pooled = &trace.text_pools[i];
            let n = bank.filters();
            let mut upstream = d_features.slice(s![offset..offset + n]).to_vec();
            if let Some(m) = &trace.masks {
                upstream.iter_mut().zip(m.text_banks[i].iter()).for_each(|(u, &k)| *u *= k);
            }
            conv_backward(x.view(), bank, pooled, &upstream, &mut grad.text_banks[i], Some(&mut d_text));
            offset += n;
        }
        if let Some(mask) = trace.masks.as_ref().and_then(|m| m.input.as_ref()) {
            d_text *= mask;
        }
        for (r, &id) in trace.ids.iter().enumerate() {
            if id != PAD {
                grad.embedding.row_mut(id).scaled_add(T::one(), &d_text.row(r));
            }
        }
    }
    if let (Some(e), Some(bank), Some(pooled)) = (&trace.eik, &params.knowledge_bank, &trace.knowledge_pool) {
        let n = bank.filters();
        let mut upstream = d_features.slice(s![offset..offset + n]).to_vec();
        if let Some(m) = trace.masks.as_ref().and_then(|m| m.knowledge.as_ref()) {
            upstream.iter_mut().zip(m.iter()).for_each(|(u, &k)| *u *= k);
        }
        let gb = grad.knowledge_bank.as_mut().expect("congruent gradient");
        conv_backward(e.view(), bank, pooled, &upstream, gb, None);
    }
    Ok(())
}
