//! The path-attention classifier, differentiated by hand.
//!
//! Per context i with terminal embeddings `e_l`, `e_r` and path embedding
//! `e_p`: `c_i = tanh(Wᵀ · [e_l; e_p; e_r])`, attention `α = softmax(a·c_i)`,
//! code vector `z = Σ α_i c_i`, output `softmax(V·z)`, loss `−log p[y]`.
//!
//! In token mode a terminal embeds as its row of the token table; in char
//! mode as the mean over the 12 name positions of (character embedding +
//! position embedding). Gradients with respect to parameters drive training;
//! gradients with respect to the one-hot name distribution shared by all
//! occurrences of a variable drive the attacks.

mod checkpoint;
mod tensor;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointError};
pub use tensor::{axpy, dot, softmax, Mat};

use crate::pathctx::{
    EncodedExample, NameMode, Side, TerminalCode, Vocabulary, NAME_LEN, N_CHARS,
};
use crate::rng::{derive_seed, SplitMix64};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct HyperParams {
    pub embed_dim: usize,
    pub hidden_dim: usize,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            embed_dim: 32,
            hidden_dim: 64,
        }
    }
}

/// All trainable tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub mode: NameMode,
    /// |tokens| × d token-name embeddings.
    pub token_embed: Mat,
    /// |alphabet| × d character embeddings (39 rows: UNK, a-z0-9_, PAD).
    pub char_embed: Mat,
    /// 12 × d learned position embeddings for the char encoder.
    pub pos_embed: Mat,
    /// |paths| × d path embeddings.
    pub path_embed: Mat,
    /// 3d × h combine matrix (W).
    pub combine: Mat,
    /// h attention vector (a).
    pub attention: Vec<f64>,
    /// |labels| × h output matrix (V).
    pub label_out: Mat,
}

impl ModelParams {
    pub fn embed_dim(&self) -> usize {
        self.token_embed.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.attention.len()
    }

    pub fn n_labels(&self) -> usize {
        self.label_out.rows()
    }

    pub fn is_finite(&self) -> bool {
        self.token_embed.is_finite()
            && self.char_embed.is_finite()
            && self.pos_embed.is_finite()
            && self.path_embed.is_finite()
            && self.combine.is_finite()
            && self.attention.iter().all(|v| v.is_finite())
            && self.label_out.is_finite()
    }
}

/// Uniform init in [−0.05, 0.05] from the splitmix generator; tensors are
/// filled in declaration order, so a seed pins every entry.
pub fn init_params(vocab: &Vocabulary, seed: u64, mode: NameMode, hp: HyperParams) -> ModelParams {
    let mut rng = SplitMix64::new(seed);
    let d = hp.embed_dim;
    let h = hp.hidden_dim;
    let mut draw = move || rng.uniform(-0.05, 0.05);
    ModelParams {
        mode,
        token_embed: Mat::from_fn(vocab.n_tokens(), d, &mut draw),
        char_embed: Mat::from_fn(N_CHARS, d, &mut draw),
        pos_embed: Mat::from_fn(NAME_LEN, d, &mut draw),
        path_embed: Mat::from_fn(vocab.n_paths(), d, &mut draw),
        combine: Mat::from_fn(3 * d, h, &mut draw),
        attention: (0..h).map(|_| draw()).collect(),
        label_out: Mat::from_fn(vocab.n_labels(), h, &mut draw),
    }
}

/// Terminal embedding at rest (one-hot point).
fn embed_terminal(params: &ModelParams, code: &TerminalCode, out: &mut [f64]) {
    out.fill(0.0);
    match code {
        TerminalCode::Token(idx) => {
            out.copy_from_slice(params.token_embed.row(*idx));
        }
        TerminalCode::Chars(row) => {
            let inv = 1.0 / NAME_LEN as f64;
            for (pos, &c) in row.iter().enumerate() {
                axpy(inv, params.char_embed.row(c as usize), out);
                axpy(inv, params.pos_embed.row(pos), out);
            }
        }
    }
}

/// A relaxed (or one-hot) distribution over names for one variable.
#[derive(Debug, Clone, PartialEq)]
pub enum NameDistribution {
    /// Length-|tokens| vector.
    Token(Vec<f64>),
    /// 12 × |alphabet| row-stochastic matrix.
    Char(Mat),
}

impl NameDistribution {
    pub fn one_hot_token(index: usize, n_tokens: usize) -> NameDistribution {
        let mut v = vec![0.0; n_tokens];
        v[index] = 1.0;
        NameDistribution::Token(v)
    }

    pub fn one_hot_chars(row: &[u8; NAME_LEN]) -> NameDistribution {
        let mut m = Mat::zeros(NAME_LEN, N_CHARS);
        for (pos, &c) in row.iter().enumerate() {
            m.set(pos, c as usize, 1.0);
        }
        NameDistribution::Char(m)
    }
}

/// Embedding induced by a name distribution: `distᵀ·E` in token mode, the
/// positional mean of `distᵀ·E_char + P_pos` in char mode.
pub fn distribution_embedding(params: &ModelParams, dist: &NameDistribution) -> Vec<f64> {
    let d = params.embed_dim();
    let mut e = vec![0.0; d];
    match dist {
        NameDistribution::Token(q) => {
            assert_eq!(q.len(), params.token_embed.rows());
            for (j, &w) in q.iter().enumerate() {
                if w != 0.0 {
                    axpy(w, params.token_embed.row(j), &mut e);
                }
            }
        }
        NameDistribution::Char(q) => {
            assert_eq!((q.rows(), q.cols()), (NAME_LEN, N_CHARS));
            let inv = 1.0 / NAME_LEN as f64;
            for pos in 0..NAME_LEN {
                for c in 0..N_CHARS {
                    let w = q.get(pos, c);
                    if w != 0.0 {
                        axpy(w * inv, params.char_embed.row(c), &mut e);
                    }
                }
                axpy(inv, params.pos_embed.row(pos), &mut e);
            }
        }
    }
    e
}

pub struct ForwardResult {
    pub probs: Vec<f64>,
    pub loss: f64,
    pub attention_weights: Vec<f64>,
}

struct ForwardCache {
    /// Concatenated inputs [e_l; e_p; e_r] per context.
    inputs: Vec<Vec<f64>>,
    /// tanh outputs per context.
    combined: Vec<Vec<f64>>,
    alpha: Vec<f64>,
    code_vector: Vec<f64>,
    probs: Vec<f64>,
}

/// Core forward pass. `override_slots`, when given, replaces the terminal
/// embedding at those (context, side) slots with `override_embed` — the
/// relaxed shared one-hot of a single variable.
fn forward_cached(
    params: &ModelParams,
    example: &EncodedExample,
    override_slots: Option<(&[(usize, Side)], &[f64])>,
) -> ForwardCache {
    let d = params.embed_dim();
    let h = params.hidden_dim();
    let n = example.contexts.len();
    assert!(n > 0, "encoded example must be nonempty");

    let mut inputs = Vec::with_capacity(n);
    for (i, ctx) in example.contexts.iter().enumerate() {
        let mut x = vec![0.0; 3 * d];
        embed_terminal(params, &ctx.left, &mut x[0..d]);
        x[d..2 * d].copy_from_slice(params.path_embed.row(ctx.path));
        embed_terminal(params, &ctx.right, &mut x[2 * d..3 * d]);
        if let Some((slots, e)) = override_slots {
            for (ctx_idx, side) in slots {
                if *ctx_idx == i {
                    match side {
                        Side::Left => x[0..d].copy_from_slice(e),
                        Side::Right => x[2 * d..3 * d].copy_from_slice(e),
                    }
                }
            }
        }
        inputs.push(x);
    }

    let mut combined = Vec::with_capacity(n);
    let mut scores = Vec::with_capacity(n);
    for x in &inputs {
        let mut c = vec![0.0; h];
        for (k, xk) in x.iter().enumerate() {
            if *xk != 0.0 {
                axpy(*xk, params.combine.row(k), &mut c);
            }
        }
        for v in c.iter_mut() {
            *v = v.tanh();
        }
        scores.push(dot(&params.attention, &c));
        combined.push(c);
    }

    let alpha = softmax(&scores);
    let mut code_vector = vec![0.0; h];
    for (i, c) in combined.iter().enumerate() {
        axpy(alpha[i], c, &mut code_vector);
    }

    let logits: Vec<f64> = (0..params.n_labels())
        .map(|k| dot(params.label_out.row(k), &code_vector))
        .collect();
    let probs = softmax(&logits);

    ForwardCache {
        inputs,
        combined,
        alpha,
        code_vector,
        probs,
    }
}

fn loss_of(probs: &[f64], label: usize) -> f64 {
    -probs[label].max(f64::MIN_POSITIVE).ln()
}

/// Full forward pass; loss is taken against the example's own label.
pub fn forward(params: &ModelParams, example: &EncodedExample) -> ForwardResult {
    let cache = forward_cached(params, example, None);
    ForwardResult {
        loss: loss_of(&cache.probs, example.label_index),
        probs: cache.probs,
        attention_weights: cache.alpha,
    }
}

/// Argmax of the output distribution; ties break to the lowest label index.
pub fn predict(params: &ModelParams, example: &EncodedExample) -> (usize, f64) {
    let cache = forward_cached(params, example, None);
    argmax(&cache.probs)
}

pub fn argmax(probs: &[f64]) -> (usize, f64) {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    (best, probs[best])
}

/// Gradients for every tensor; same shapes as [`ModelParams`].
pub struct Gradients {
    pub token_embed: Mat,
    pub char_embed: Mat,
    pub pos_embed: Mat,
    pub path_embed: Mat,
    pub combine: Mat,
    pub attention: Vec<f64>,
    pub label_out: Mat,
}

impl Gradients {
    pub fn zeros_like(params: &ModelParams) -> Gradients {
        Gradients {
            token_embed: Mat::zeros(params.token_embed.rows(), params.token_embed.cols()),
            char_embed: Mat::zeros(params.char_embed.rows(), params.char_embed.cols()),
            pos_embed: Mat::zeros(params.pos_embed.rows(), params.pos_embed.cols()),
            path_embed: Mat::zeros(params.path_embed.rows(), params.path_embed.cols()),
            combine: Mat::zeros(params.combine.rows(), params.combine.cols()),
            attention: vec![0.0; params.attention.len()],
            label_out: Mat::zeros(params.label_out.rows(), params.label_out.cols()),
        }
    }
}

/// Loss gradients with respect to the left/right terminal embeddings of
/// every context.
pub struct EmbeddingGrads {
    /// (d-vector for the left slot, d-vector for the right slot) per context.
    pub per_context: Vec<(Vec<f64>, Vec<f64>)>,
}

/// Backpropagation through the forward pass for an arbitrary loss label.
/// Returns the loss, parameter gradients accumulated into `grads` (when
/// given), and the per-slot embedding gradients.
pub fn backprop(
    params: &ModelParams,
    example: &EncodedExample,
    loss_label: usize,
    mut grads: Option<&mut Gradients>,
) -> (f64, EmbeddingGrads) {
    let d = params.embed_dim();
    let h = params.hidden_dim();
    let n = example.contexts.len();
    let cache = forward_cached(params, example, None);
    let loss = loss_of(&cache.probs, loss_label);

    // dJ/dlogits = p − onehot(y)
    let mut dlogits = cache.probs.clone();
    dlogits[loss_label] -= 1.0;

    // dJ/dz and dJ/dV
    let mut dz = vec![0.0; h];
    for (k, &dl) in dlogits.iter().enumerate() {
        axpy(dl, params.label_out.row(k), &mut dz);
        if let Some(g) = grads.as_deref_mut() {
            axpy(dl, &cache.code_vector, g.label_out.row_mut(k));
        }
    }

    // Attention softmax backprop.
    let dalpha: Vec<f64> = cache.combined.iter().map(|c| dot(&dz, c)).collect();
    let weighted: f64 = cache
        .alpha
        .iter()
        .zip(&dalpha)
        .map(|(a, da)| a * da)
        .sum();
    let dscores: Vec<f64> = cache
        .alpha
        .iter()
        .zip(&dalpha)
        .map(|(a, da)| a * (da - weighted))
        .collect();

    let mut embed_grads = Vec::with_capacity(n);
    let mut du = vec![0.0; h];
    let mut dx = vec![0.0; 3 * d];
    for i in 0..n {
        // dJ/dc_i through the code vector and through the attention score.
        du.fill(0.0);
        axpy(cache.alpha[i], &dz, &mut du);
        axpy(dscores[i], &params.attention, &mut du);
        if let Some(g) = grads.as_deref_mut() {
            axpy(dscores[i], &cache.combined[i], &mut g.attention);
        }
        // Through tanh.
        for (k, v) in du.iter_mut().enumerate() {
            let c = cache.combined[i][k];
            *v *= 1.0 - c * c;
        }
        // dJ/dx_i = W·du; dJ/dW += x_i ⊗ du.
        let x = &cache.inputs[i];
        for k in 0..3 * d {
            dx[k] = dot(params.combine.row(k), &du);
        }
        if let Some(g) = grads.as_deref_mut() {
            for k in 0..3 * d {
                if x[k] != 0.0 {
                    axpy(x[k], &du, g.combine.row_mut(k));
                }
            }
            axpy(1.0, &dx[d..2 * d], g.path_embed.row_mut(example.contexts[i].path));
            accumulate_terminal_grad(g, params.mode, &example.contexts[i].left, &dx[0..d]);
            accumulate_terminal_grad(g, params.mode, &example.contexts[i].right, &dx[2 * d..3 * d]);
        }
        embed_grads.push((dx[0..d].to_vec(), dx[2 * d..3 * d].to_vec()));
    }

    (
        loss,
        EmbeddingGrads {
            per_context: embed_grads,
        },
    )
}

fn accumulate_terminal_grad(g: &mut Gradients, mode: NameMode, code: &TerminalCode, de: &[f64]) {
    match (mode, code) {
        (NameMode::Token, TerminalCode::Token(idx)) => {
            axpy(1.0, de, g.token_embed.row_mut(*idx));
        }
        (NameMode::Char, TerminalCode::Chars(row)) => {
            let inv = 1.0 / NAME_LEN as f64;
            for (pos, &c) in row.iter().enumerate() {
                axpy(inv, de, g.char_embed.row_mut(c as usize));
                axpy(inv, de, g.pos_embed.row_mut(pos));
            }
        }
        _ => unreachable!("terminal code does not match the model's name mode"),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GradientError {
    #[error("variable {0:?} does not occur in this example")]
    UnknownVariable(String),
}

/// The loss derivative with respect to the one-hot name distribution shared
/// by every occurrence slot of `var`: exactly the derivative of the forward
/// pass composed with (distribution ↦ embedding) at the one-hot point.
pub fn input_gradient(
    params: &ModelParams,
    example: &EncodedExample,
    loss_label: usize,
    var: &str,
) -> Result<NameDistribution, GradientError> {
    let slots = example
        .occurrences
        .get(var)
        .ok_or_else(|| GradientError::UnknownVariable(var.to_string()))?;
    let d = params.embed_dim();
    let (_, embeds) = backprop(params, example, loss_label, None);
    let mut de_sum = vec![0.0; d];
    for (ctx, side) in slots {
        let (left, right) = &embeds.per_context[*ctx];
        match side {
            Side::Left => axpy(1.0, left, &mut de_sum),
            Side::Right => axpy(1.0, right, &mut de_sum),
        }
    }
    Ok(match params.mode {
        NameMode::Token => {
            let g = (0..params.token_embed.rows())
                .map(|j| dot(params.token_embed.row(j), &de_sum))
                .collect();
            NameDistribution::Token(g)
        }
        NameMode::Char => {
            // The positional mean makes every position's gradient row
            // E_char·(Σ de)/12; positions differ only through the character
            // they currently hold.
            let inv = 1.0 / NAME_LEN as f64;
            let mut m = Mat::zeros(NAME_LEN, N_CHARS);
            for c in 0..N_CHARS {
                let v = dot(params.char_embed.row(c), &de_sum) * inv;
                for pos in 0..NAME_LEN {
                    m.set(pos, c, v);
                }
            }
            NameDistribution::Char(m)
        }
    })
}

/// Loss at a relaxed name distribution for `var`; the finite-difference
/// counterpart of [`input_gradient`].
pub fn loss_with_name_distribution(
    params: &ModelParams,
    example: &EncodedExample,
    loss_label: usize,
    var: &str,
    dist: &NameDistribution,
) -> Result<f64, GradientError> {
    let slots = example
        .occurrences
        .get(var)
        .ok_or_else(|| GradientError::UnknownVariable(var.to_string()))?;
    let e = distribution_embedding(params, dist);
    let cache = forward_cached(params, example, Some((slots, &e)));
    Ok(loss_of(&cache.probs, loss_label))
}

// --- Training ---

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub mode: NameMode,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Adds a single-step non-targeted perturbation loss to every example.
    pub adversarial: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            mode: NameMode::Token,
            embed_dim: 32,
            hidden_dim: 64,
            // At the [−0.05, 0.05] init scale the logits start three small
            // linear maps deep, so rates below ~0.2 stall for dozens of
            // epochs before the loss moves at all.
            learning_rate: 0.5,
            epochs: 30,
            batch_size: 32,
            seed: 1,
            adversarial: false,
        }
    }
}

impl TrainConfig {
    pub fn hyper(&self) -> HyperParams {
        HyperParams {
            embed_dim: self.embed_dim,
            hidden_dim: self.hidden_dim,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("training diverged: epoch {epoch} mean loss is {loss}")]
    Divergence { epoch: usize, loss: f64 },
    #[error("training corpus is empty")]
    EmptyCorpus,
}

pub struct TrainOutcome {
    pub params: ModelParams,
    /// Mean training loss per epoch.
    pub epoch_losses: Vec<f64>,
}

/// How a perturbation callback participates in each step's loss.
pub enum Augment<'a> {
    /// Plain SGD on the given examples.
    None,
    /// Loss = J(x) + J(x′): adversarial training.
    Add(&'a mut dyn FnMut(usize, &ModelParams) -> Option<EncodedExample>),
    /// Loss = J(x′) alone: adversarial fine-tuning.
    Replace(&'a mut dyn FnMut(usize, &ModelParams) -> Option<EncodedExample>),
}

/// Mini-batch SGD with the plain update rule θ ← θ − η·∇J (no momentum),
/// batch gradients averaged, epoch order shuffled by a seeded generator.
pub fn train_from(
    mut params: ModelParams,
    examples: &[EncodedExample],
    config: &TrainConfig,
    mut augment: Augment<'_>,
) -> Result<TrainOutcome, TrainError> {
    if examples.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    let mut shuffle_rng = SplitMix64::new(derive_seed(config.seed, 0x5u64));
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        shuffle_rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        let mut terms = 0usize;
        for batch in order.chunks(config.batch_size.max(1)) {
            let mut grads = Gradients::zeros_like(&params);
            for &idx in batch {
                let ex = &examples[idx];
                match &mut augment {
                    Augment::None => {
                        let (loss, _) = backprop(&params, ex, ex.label_index, Some(&mut grads));
                        epoch_loss += loss;
                        terms += 1;
                    }
                    Augment::Add(perturb) => {
                        let (loss, _) = backprop(&params, ex, ex.label_index, Some(&mut grads));
                        epoch_loss += loss;
                        terms += 1;
                        if let Some(adv) = perturb(idx, &params) {
                            let (loss2, _) =
                                backprop(&params, &adv, adv.label_index, Some(&mut grads));
                            epoch_loss += loss2;
                            terms += 1;
                        }
                    }
                    Augment::Replace(perturb) => {
                        let chosen = perturb(idx, &params);
                        let ex2 = chosen.as_ref().unwrap_or(ex);
                        let (loss, _) = backprop(&params, ex2, ex2.label_index, Some(&mut grads));
                        epoch_loss += loss;
                        terms += 1;
                    }
                }
            }
            apply_sgd_step(&mut params, &grads, config.learning_rate / batch.len() as f64);
        }
        let mean = epoch_loss / terms.max(1) as f64;
        if !mean.is_finite() {
            return Err(TrainError::Divergence { epoch, loss: mean });
        }
        epoch_losses.push(mean);
    }
    Ok(TrainOutcome {
        params,
        epoch_losses,
    })
}

/// Initializes from the config seed and trains.
pub fn train(
    vocab: &Vocabulary,
    examples: &[EncodedExample],
    config: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    let params = init_params(vocab, config.seed, config.mode, config.hyper());
    train_from(params, examples, config, Augment::None)
}

fn apply_sgd_step(params: &mut ModelParams, grads: &Gradients, scale: f64) {
    params.token_embed.sub_scaled(&grads.token_embed, scale);
    params.char_embed.sub_scaled(&grads.char_embed, scale);
    params.pos_embed.sub_scaled(&grads.pos_embed, scale);
    params.path_embed.sub_scaled(&grads.path_embed, scale);
    params.combine.sub_scaled(&grads.combine, scale);
    for (p, g) in params.attention.iter_mut().zip(&grads.attention) {
        *p -= scale * g;
    }
    params.label_out.sub_scaled(&grads.label_out, scale);
}

/// Embedding of a concrete name text under the model's name encoder; used
/// by the outlier defense and the nearest-neighbor baseline.
pub fn name_embedding(params: &ModelParams, vocab: &Vocabulary, text: &str) -> Vec<f64> {
    match params.mode {
        NameMode::Token => params.token_embed.row(vocab.token_index(text)).to_vec(),
        NameMode::Char => {
            let mut e = vec![0.0; params.embed_dim()];
            embed_terminal(
                params,
                &TerminalCode::Chars(crate::pathctx::char_row(text)),
                &mut e,
            );
            e
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minilang::parse;
    use crate::pathctx::{encode, extract_path_contexts, ExtractionConfig, Vocabulary};

    fn fixture(mode: NameMode) -> (ModelParams, Vocabulary, EncodedExample) {
        let ast = parse(
            "int f(int[] xs, int k) { int n = 0; for (int i = 0; i < len(xs); i = i + 1) { if (xs[i] == k) { n = n + 1; } } return n; }",
        )
        .unwrap();
        let bag = extract_path_contexts(&ast, ExtractionConfig::default()).unwrap();
        let other = parse("int g(int a) { return a + 1; }").unwrap();
        let bag2 = extract_path_contexts(&other, ExtractionConfig::default()).unwrap();
        let vocab = Vocabulary::build(&[bag.clone(), bag2], 100);
        let ex = encode(&bag, &vocab, mode);
        let params = init_params(&vocab, 7, mode, HyperParams::default());
        (params, vocab, ex)
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let (_, vocab, _) = fixture(NameMode::Token);
        let a = init_params(&vocab, 1, NameMode::Token, HyperParams::default());
        let b = init_params(&vocab, 1, NameMode::Token, HyperParams::default());
        assert_eq!(a, b);
        let c = init_params(&vocab, 2, NameMode::Token, HyperParams::default());
        assert_ne!(a, c);
        assert!(a.token_embed.data().iter().all(|v| v.abs() <= 0.05));
        assert!(a.combine.data().iter().all(|v| v.abs() <= 0.05));
    }

    #[test]
    fn forward_distribution_sums_to_one() {
        for mode in [NameMode::Token, NameMode::Char] {
            let (params, _, ex) = fixture(mode);
            let out = forward(&params, &ex);
            assert!((out.probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(out.probs.iter().all(|p| *p > 0.0 && *p < 1.0));
            assert!(out.loss >= 0.0);
            assert!((out.attention_weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn single_context_attention_is_one() {
        let ast = parse("int f() { int x = 0; return 1; }").unwrap();
        let bag = extract_path_contexts(
            &ast,
            ExtractionConfig {
                max_path_length: 3,
                max_contexts: 200,
            },
        )
        .unwrap();
        assert_eq!(bag.contexts.len(), 1);
        let vocab = Vocabulary::build(std::slice::from_ref(&bag), 100);
        let ex = encode(&bag, &vocab, NameMode::Token);
        let params = init_params(&vocab, 3, NameMode::Token, HyperParams::default());
        let out = forward(&params, &ex);
        assert_eq!(out.attention_weights, vec![1.0]);
    }

    #[test]
    fn forward_is_bit_deterministic() {
        let (params, _, ex) = fixture(NameMode::Token);
        let a = forward(&params, &ex);
        let b = forward(&params, &ex);
        assert_eq!(a.loss.to_bits(), b.loss.to_bits());
    }

    #[test]
    fn predict_breaks_ties_low() {
        assert_eq!(argmax(&[0.1, 0.7, 0.2]), (1, 0.7));
        assert_eq!(argmax(&[0.5, 0.5]), (0, 0.5));
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let (params, _vocab, ex) = fixture(NameMode::Token);
        let config = TrainConfig {
            learning_rate: 0.0,
            epochs: 3,
            seed: 7,
            ..TrainConfig::default()
        };
        let out = train_from(params.clone(), &[ex], &config, Augment::None).unwrap();
        assert_eq!(out.params, params);
    }

    #[test]
    fn unknown_variable_is_rejected() {
        let (params, _, ex) = fixture(NameMode::Token);
        assert_eq!(
            input_gradient(&params, &ex, 0, "missing").unwrap_err(),
            GradientError::UnknownVariable("missing".into())
        );
    }

    #[test]
    fn identical_embedding_rows_give_identical_gradients() {
        let (mut params, _, ex) = fixture(NameMode::Token);
        let row1 = params.token_embed.row(1).to_vec();
        params.token_embed.row_mut(2).copy_from_slice(&row1);
        let g = input_gradient(&params, &ex, ex.label_index, "n").unwrap();
        match g {
            NameDistribution::Token(g) => assert!((g[1] - g[2]).abs() < 1e-15),
            _ => unreachable!(),
        }
    }

    #[test]
    fn single_example_training_drives_loss_down() {
        let (_, vocab, ex) = fixture(NameMode::Token);
        let config = TrainConfig {
            learning_rate: 0.1,
            epochs: 200,
            batch_size: 1,
            seed: 11,
            ..TrainConfig::default()
        };
        let out = train(&vocab, std::slice::from_ref(&ex), &config).unwrap();
        let losses = &out.epoch_losses;
        for w in losses.windows(2) {
            assert!(
                w[1] <= w[0] + 1e-6,
                "loss increased beyond tolerance: {} -> {}",
                w[0],
                w[1]
            );
        }
        assert!(losses.last().unwrap() < losses.first().unwrap());
        let (label, p) = predict(&out.params, &ex);
        assert_eq!(label, ex.label_index);
        assert!(p > 0.9);
    }

    #[test]
    fn training_is_bit_deterministic() {
        let (_, vocab, ex) = fixture(NameMode::Token);
        let config = TrainConfig {
            epochs: 5,
            seed: 13,
            ..TrainConfig::default()
        };
        let a = train(&vocab, std::slice::from_ref(&ex), &config).unwrap();
        let b = train(&vocab, std::slice::from_ref(&ex), &config).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.epoch_losses, b.epoch_losses);
    }

    /// Central finite differences over a scalar-perturbable closure.
    fn central_diff(mut f: impl FnMut(f64) -> f64, eps: f64) -> f64 {
        (f(eps) - f(-eps)) / (2.0 * eps)
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-3)
    }

    #[test]
    fn input_gradient_matches_finite_differences_token() {
        let (params, _, ex) = fixture(NameMode::Token);
        let var = "n";
        let label = ex.label_index;
        let g = match input_gradient(&params, &ex, label, var).unwrap() {
            NameDistribution::Token(g) => g,
            _ => unreachable!(),
        };
        let n_tokens = params.token_embed.rows();
        let base = NameDistribution::one_hot_token(
            // recover the current token index from any slot
            {
                let (ctx, side) = ex.occurrences[var][0];
                match (&ex.contexts[ctx].left, &ex.contexts[ctx].right, side) {
                    (TerminalCode::Token(t), _, Side::Left) => *t,
                    (_, TerminalCode::Token(t), Side::Right) => *t,
                    _ => unreachable!(),
                }
            },
            n_tokens,
        );
        let eps = 1e-4;
        for j in (0..n_tokens).step_by(3) {
            let fd = central_diff(
                |delta| {
                    let mut q = match &base {
                        NameDistribution::Token(q) => q.clone(),
                        _ => unreachable!(),
                    };
                    q[j] += delta;
                    loss_with_name_distribution(
                        &params,
                        &ex,
                        label,
                        var,
                        &NameDistribution::Token(q),
                    )
                    .unwrap()
                },
                eps,
            );
            assert!(
                rel_err(g[j], fd) < 1e-4,
                "token {j}: analytic {} vs fd {}",
                g[j],
                fd
            );
        }
    }

    #[test]
    fn input_gradient_matches_finite_differences_char() {
        let (params, _, ex) = fixture(NameMode::Char);
        let var = "n";
        let label = ex.label_index;
        let g = match input_gradient(&params, &ex, label, var).unwrap() {
            NameDistribution::Char(g) => g,
            _ => unreachable!(),
        };
        let base_row = crate::pathctx::char_row(var);
        let base = NameDistribution::one_hot_chars(&base_row);
        let eps = 1e-4;
        for pos in [0usize, 5, 11] {
            for c in (0..N_CHARS).step_by(7) {
                let fd = central_diff(
                    |delta| {
                        let mut q = match &base {
                            NameDistribution::Char(m) => m.clone(),
                            _ => unreachable!(),
                        };
                        q.add_at(pos, c, delta);
                        loss_with_name_distribution(
                            &params,
                            &ex,
                            label,
                            var,
                            &NameDistribution::Char(q),
                        )
                        .unwrap()
                    },
                    eps,
                );
                assert!(
                    rel_err(g.get(pos, c), fd) < 1e-4,
                    "({pos},{c}): analytic {} vs fd {}",
                    g.get(pos, c),
                    fd
                );
            }
        }
    }

    #[test]
    fn parameter_gradients_match_finite_differences() {
        let (params, _, ex) = fixture(NameMode::Token);
        let label = ex.label_index;
        let mut grads = Gradients::zeros_like(&params);
        backprop(&params, &ex, label, Some(&mut grads));
        let eps = 1e-4;
        // Probe a spread of combine-matrix coordinates.
        for (r, c) in [(0, 0), (5, 10), (50, 63), (95, 1)] {
            let fd = central_diff(
                |delta| {
                    let mut p = params.clone();
                    p.combine.add_at(r, c, delta);
                    loss_of_forward(&p, &ex, label)
                },
                eps,
            );
            assert!(
                rel_err(grads.combine.get(r, c), fd) < 1e-4,
                "W[{r},{c}]: analytic {} vs fd {}",
                grads.combine.get(r, c),
                fd
            );
        }
        for k in [0usize, 31, 63] {
            let fd = central_diff(
                |delta| {
                    let mut p = params.clone();
                    p.attention[k] += delta;
                    loss_of_forward(&p, &ex, label)
                },
                eps,
            );
            assert!(rel_err(grads.attention[k], fd) < 1e-4);
        }
        for (r, c) in [(0, 0), (2, 20)] {
            let fd = central_diff(
                |delta| {
                    let mut p = params.clone();
                    p.label_out.add_at(r, c, delta);
                    loss_of_forward(&p, &ex, label)
                },
                eps,
            );
            assert!(rel_err(grads.label_out.get(r, c), fd) < 1e-4);
        }
    }

    /// Loss under an arbitrary label via the plain forward path.
    fn loss_of_forward(params: &ModelParams, ex: &EncodedExample, label: usize) -> f64 {
        let cache = forward(params, ex);
        -cache.probs[label].ln()
    }

    #[test]
    fn gradient_is_linear_in_occurrence_slots() {
        let (params, _, ex) = fixture(NameMode::Token);
        let var = "n";
        let label = ex.label_index;
        let full = match input_gradient(&params, &ex, label, var).unwrap() {
            NameDistribution::Token(g) => g,
            _ => unreachable!(),
        };
        let slots = ex.occurrences[var].clone();
        let mut summed = vec![0.0; full.len()];
        for slot in &slots {
            let mut single = ex.clone();
            single.occurrences.insert(var.to_string(), vec![*slot]);
            let g = match input_gradient(&params, &single, label, var).unwrap() {
                NameDistribution::Token(g) => g,
                _ => unreachable!(),
            };
            for (s, v) in summed.iter_mut().zip(&g) {
                *s += v;
            }
        }
        for (a, b) in full.iter().zip(&summed) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}
