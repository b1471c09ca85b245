use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ArchSpec, Family, NetError};
use crate::tensor::{BoundParams, Graph, ParamSet, Scalar, Tensor, Var};

/// Rows per no-grad forward chunk; bounds activation memory for large batches.
const NO_GRAD_CHUNK: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq)]
enum Init {
    /// Uniform with variance `gain * scale^2 / fan_in`.
    FanIn { fan_in: usize, gain: f64, scale: f64 },
    Zero,
}

impl Init {
    /// Weights feeding a ReLU.
    fn relu(fan_in: usize) -> Self {
        Init::FanIn { fan_in, gain: 2.0, scale: 1.0 }
    }

    /// Weights feeding a linear map, gate, or residual sum.
    fn linear(fan_in: usize) -> Self {
        Init::FanIn { fan_in, gain: 1.0, scale: 1.0 }
    }

    fn variance(self) -> f64 {
        match self {
            Init::FanIn { fan_in, gain, scale } => gain * scale * scale / fan_in as f64,
            Init::Zero => 0.0,
        }
    }
}

struct Slot {
    name: String,
    shape: Vec<usize>,
    init: Init,
}

fn slot(name: impl Into<String>, shape: Vec<usize>, init: Init) -> Slot {
    Slot { name: name.into(), shape, init }
}

fn dense_slots(out: &mut Vec<Slot>, prefix: &str, fan_in: usize, fan_out: usize, init: Init) {
    out.push(slot(format!("{prefix}.w"), vec![fan_in, fan_out], init));
    out.push(slot(format!("{prefix}.b"), vec![fan_out], Init::Zero));
}

/// Parameter layout for a spec, in sampling order. Names under `head.`
/// form the classification head; everything else is the embedding stage.
fn layout(spec: &ArchSpec) -> Vec<Slot> {
    let f = spec.input_dim;
    let mut out = Vec::new();
    match &spec.family {
        Family::MsTcn { kernels, hidden, layers } => {
            let mut cin = f;
            for l in 0..*layers {
                for (b, &k) in kernels.iter().enumerate() {
                    out.push(slot(format!("tc{l}.br{b}.w"), vec![k, cin, *hidden], Init::relu(k * cin)));
                    out.push(slot(format!("tc{l}.br{b}.b"), vec![*hidden], Init::Zero));
                }
                cin = kernels.len() * hidden;
            }
            dense_slots(&mut out, "head", cin, 1, Init::linear(cin));
        }
        Family::Trsf { layers, heads, head_dim, mlp_hidden } | Family::Vit { layers, heads, head_dim, mlp_hidden } => {
            if matches!(spec.family, Family::Vit { .. }) {
                // unit variance, the scale of standardized inputs
                out.push(slot("cls", vec![f], Init::linear(1)));
            }
            let inner = heads * head_dim;
            // residual-branch outputs shrink with depth so the stack stays O(1)
            let residual = 1.0 / ((2 * layers) as f64).sqrt();
            for l in 0..*layers {
                for proj in ["q", "k", "v"] {
                    dense_slots(&mut out, &format!("enc{l}.{proj}"), f, inner, Init::linear(f));
                }
                dense_slots(&mut out, &format!("enc{l}.o"), inner, f, Init::FanIn { fan_in: inner, gain: 1.0, scale: residual });
                dense_slots(&mut out, &format!("enc{l}.ff1"), f, *mlp_hidden, Init::relu(f));
                dense_slots(&mut out, &format!("enc{l}.ff2"), *mlp_hidden, f, Init::FanIn { fan_in: *mlp_hidden, gain: 1.0, scale: residual });
            }
            dense_slots(&mut out, "head.fc1", f, *mlp_hidden, Init::relu(f));
            dense_slots(&mut out, "head.fc2", *mlp_hidden, 1, Init::linear(*mlp_hidden));
        }
        Family::Lstm { hidden } => {
            out.push(slot("lstm.wx", vec![f, 4 * hidden], Init::linear(f)));
            out.push(slot("lstm.wh", vec![*hidden, 4 * hidden], Init::linear(*hidden)));
            out.push(slot("lstm.b", vec![4 * hidden], Init::Zero));
            dense_slots(&mut out, "head", *hidden, 1, Init::linear(*hidden));
        }
        Family::Rnn { hidden } => {
            out.push(slot("rnn.wx", vec![f, *hidden], Init::linear(f)));
            out.push(slot("rnn.wh", vec![*hidden, *hidden], Init::linear(*hidden)));
            out.push(slot("rnn.b", vec![*hidden], Init::Zero));
            dense_slots(&mut out, "head", *hidden, 1, Init::linear(*hidden));
        }
    }
    out
}

/// Variance of the distribution a named parameter is drawn from
/// (0 for zero-initialized biases), `None` for names outside the layout.
pub fn init_variance(spec: &ArchSpec, name: &str) -> Option<f64> {
    layout(spec).into_iter().find(|s| s.name == name).map(|s| s.init.variance())
}

/// Draws a fresh parameter set: zero biases, and weights uniform on
/// `±sqrt(3 * gain / fan_in)` with gain 2 in front of a ReLU and 1 elsewhere.
/// Residual-branch output projections of attention blocks are further
/// scaled by `1 / sqrt(2 * layers)`.
pub fn sample_parameters<E: Scalar>(spec: &ArchSpec, seed: u64) -> ParamSet<E> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ParamSet::new();
    for s in layout(spec) {
        let n: usize = s.shape.iter().product();
        let data = match s.init {
            Init::Zero => vec![E::zero(); n],
            init @ Init::FanIn { .. } => {
                let bound = (3.0 * init.variance()).sqrt();
                (0..n).map(|_| E::from_f64_lossy(rng.random_range(-bound..bound))).collect()
            }
        };
        params.insert(s.name, Tensor::new(s.shape, data).expect("layout shape")).expect("unique layout names");
    }
    params
}

/// An architecture with concrete parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Model<E> {
    spec: ArchSpec,
    params: ParamSet<E>,
}

impl<E: Scalar> Model<E> {
    pub fn build(spec: &ArchSpec, seed: u64) -> Result<Self, NetError> {
        spec.validate()?;
        Ok(Model { spec: spec.clone(), params: sample_parameters(spec, seed) })
    }

    /// Wraps an existing parameter set after checking it against the layout.
    pub fn from_params(spec: &ArchSpec, params: ParamSet<E>) -> Result<Self, NetError> {
        spec.validate()?;
        let slots = layout(spec);
        if slots.len() != params.len() {
            return Err(NetError::BadSpec(format!("{}: expected {} parameter tensors, got {}", spec.name, slots.len(), params.len())));
        }
        for s in &slots {
            match params.get(&s.name) {
                Some(t) if t.shape() == s.shape.as_slice() => {}
                _ => return Err(NetError::BadSpec(format!("{}: parameter `{}` missing or mis-shaped", spec.name, s.name))),
            }
        }
        Ok(Model { spec: spec.clone(), params })
    }

    pub fn spec(&self) -> &ArchSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamSet<E> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet<E> {
        &mut self.params
    }

    pub fn into_params(self) -> ParamSet<E> {
        self.params
    }

    pub fn is_head_param(name: &str) -> bool {
        name.starts_with("head.")
    }

    pub fn head_param_names(&self) -> Vec<&str> {
        self.params.names().filter(|n| Self::is_head_param(n)).collect()
    }

    pub fn embedding_param_names(&self) -> Vec<&str> {
        self.params.names().filter(|n| !Self::is_head_param(n)).collect()
    }

    /// Sets every head weight and bias to zero, so `predict` returns 0.5.
    pub fn zero_head(&mut self) {
        for (name, t) in self.params.iter_mut() {
            if Self::is_head_param(name) {
                t.data_mut().iter_mut().for_each(|v| *v = E::zero());
            }
        }
    }

    pub fn bind(&self, g: &mut Graph<E>, trainable: bool) -> BoundParams {
        self.params.bind(g, trainable)
    }

    fn check_input(&self, g: &Graph<E>, x: Var) -> Result<(usize, usize), NetError> {
        let s = g.shape(x);
        if s.len() != 3 || s[2] != self.spec.input_dim {
            return Err(NetError::InputShape { arch: self.spec.name.clone(), expected_features: self.spec.input_dim, shape: s.to_vec() });
        }
        if s[1] == 0 {
            return Err(NetError::InputShape { arch: self.spec.name.clone(), expected_features: self.spec.input_dim, shape: s.to_vec() });
        }
        Ok((s[0], s[1]))
    }

    /// Penultimate representation `[B, E]` of a `[B, T, F]` batch.
    pub fn embed(&self, g: &mut Graph<E>, p: &BoundParams, x: Var) -> Result<Var, NetError> {
        let (b, t) = self.check_input(g, x)?;
        match &self.spec.family {
            Family::MsTcn { kernels, layers, .. } => {
                let mut h = x;
                for l in 0..*layers {
                    let mut branches = Vec::with_capacity(kernels.len());
                    for br in 0..kernels.len() {
                        let y = g.causal_conv1d(h, p.get(&format!("tc{l}.br{br}.w"))?)?;
                        let y = g.add_bias(y, p.get(&format!("tc{l}.br{br}.b"))?)?;
                        branches.push(g.relu(y));
                    }
                    h = if branches.len() == 1 { branches[0] } else { g.concat(&branches, 2)? };
                }
                Ok(g.mean_axis(h, 1)?)
            }
            Family::Trsf { layers, heads, head_dim, .. } => {
                let mut h = x;
                for l in 0..*layers {
                    h = encoder_block(g, p, l, h, *heads, *head_dim)?;
                }
                Ok(g.mean_axis(h, 1)?)
            }
            Family::Vit { layers, heads, head_dim, .. } => {
                let f = self.spec.input_dim;
                // broadcast the token over the batch; gather keeps the gradient path to `cls`
                let cls = p.get("cls")?;
                let cls = g.reshape(cls, &[1, 1, f])?;
                let cls = g.gather(cls, &vec![0; b])?;
                let mut h = g.concat(&[cls, x], 1)?;
                for l in 0..*layers {
                    h = encoder_block(g, p, l, h, *heads, *head_dim)?;
                }
                let tok = g.slice(h, 1, 0, 1)?;
                Ok(g.reshape(tok, &[b, f])?)
            }
            Family::Lstm { hidden } => {
                let hd = *hidden;
                let xw = g.matmul(x, p.get("lstm.wx")?)?;
                let xw = g.add_bias(xw, p.get("lstm.b")?)?;
                let wh = p.get("lstm.wh")?;
                let mut state: Option<(Var, Var)> = None;
                for step in 0..t {
                    let xt = g.slice(xw, 1, step, 1)?;
                    let mut gates = g.reshape(xt, &[b, 4 * hd])?;
                    if let Some((h, _)) = state {
                        let hw = g.matmul(h, wh)?;
                        gates = g.add(gates, hw)?;
                    }
                    let i = g.slice(gates, 1, 0, hd)?;
                    let i = g.sigmoid(i);
                    let fg = g.slice(gates, 1, hd, hd)?;
                    let fg = g.sigmoid(fg);
                    let cand = g.slice(gates, 1, 2 * hd, hd)?;
                    let cand = g.tanh(cand);
                    let o = g.slice(gates, 1, 3 * hd, hd)?;
                    let o = g.sigmoid(o);
                    let ic = g.mul(i, cand)?;
                    let c = match state {
                        Some((_, c_prev)) => {
                            let kept = g.mul(fg, c_prev)?;
                            g.add(kept, ic)?
                        }
                        None => ic,
                    };
                    let tc = g.tanh(c);
                    let h = g.mul(o, tc)?;
                    state = Some((h, c));
                }
                Ok(state.expect("t >= 1").0)
            }
            Family::Rnn { .. } => {
                let xw = g.matmul(x, p.get("rnn.wx")?)?;
                let xw = g.add_bias(xw, p.get("rnn.b")?)?;
                let hidden = g.shape(xw)[2];
                let wh = p.get("rnn.wh")?;
                let mut h: Option<Var> = None;
                for step in 0..t {
                    let xt = g.slice(xw, 1, step, 1)?;
                    let mut pre = g.reshape(xt, &[b, hidden])?;
                    if let Some(prev) = h {
                        let hw = g.matmul(prev, wh)?;
                        pre = g.add(pre, hw)?;
                    }
                    h = Some(g.tanh(pre));
                }
                Ok(h.expect("t >= 1"))
            }
        }
    }

    /// Head output before the sigmoid, shape `[B]`.
    pub fn logits(&self, g: &mut Graph<E>, p: &BoundParams, x: Var) -> Result<Var, NetError> {
        let b = g.shape(x).first().copied().unwrap_or(0);
        let e = self.embed(g, p, x)?;
        let out = match &self.spec.family {
            Family::Trsf { .. } | Family::Vit { .. } => {
                let h = dense(g, p, "head.fc1", e)?;
                let h = g.relu(h);
                dense(g, p, "head.fc2", h)?
            }
            _ => dense(g, p, "head", e)?,
        };
        Ok(g.reshape(out, &[b])?)
    }

    /// Class-1 probabilities `sigmoid(head(embed(x)))`, shape `[B]`.
    pub fn predict(&self, g: &mut Graph<E>, p: &BoundParams, x: Var) -> Result<Var, NetError> {
        let z = self.logits(g, p, x)?;
        Ok(g.sigmoid(z))
    }

    fn chunked<F>(&self, x: &Tensor<E>, width: usize, mut f: F) -> Result<Tensor<E>, NetError>
    where
        F: FnMut(&mut Graph<E>, &BoundParams, Var) -> Result<Var, NetError>,
    {
        let shape = x.shape();
        if shape.len() != 3 {
            return Err(NetError::InputShape { arch: self.spec.name.clone(), expected_features: self.spec.input_dim, shape: shape.to_vec() });
        }
        let n = shape[0];
        let mut out = Vec::with_capacity(n * width);
        let mut start = 0;
        while start < n {
            let end = (start + NO_GRAD_CHUNK).min(n);
            let idx: Vec<usize> = (start..end).collect();
            let chunk = x.select_rows(&idx)?.with_requires_grad(false);
            let mut g = Graph::no_grad();
            let p = self.bind(&mut g, false);
            let xv = g.leaf(&chunk);
            let y = f(&mut g, &p, xv)?;
            out.extend_from_slice(g.value(y));
            start = end;
        }
        let mut out_shape = vec![n];
        if width != 1 {
            out_shape.push(width);
        }
        Ok(Tensor::new(out_shape, out)?)
    }

    /// No-grad embedding of a `[N, T, F]` tensor, evaluated in chunks.
    pub fn embed_tensor(&self, x: &Tensor<E>) -> Result<Tensor<E>, NetError> {
        let width = self.spec.embedding_dim();
        self.chunked(x, width, |g, p, v| self.embed(g, p, v))
    }

    /// Mean embedding `[E]` of a `[N, T, F]` tensor without recording a tape.
    pub fn mean_embedding(&self, x: &Tensor<E>) -> Result<Vec<E>, NetError> {
        let emb = self.embed_tensor(x)?;
        let width = self.spec.embedding_dim();
        let n = emb.shape()[0];
        let mut mean = vec![E::zero(); width];
        for row in emb.data().chunks(width) {
            mean.iter_mut().zip(row).for_each(|(m, &v)| *m += v);
        }
        let denom = E::from_usize(n.max(1)).expect("count");
        mean.iter_mut().for_each(|m| *m = *m / denom);
        Ok(mean)
    }

    /// No-grad class-1 probabilities for a `[N, T, F]` tensor.
    pub fn predict_tensor(&self, x: &Tensor<E>) -> Result<Vec<E>, NetError> {
        Ok(self.chunked(x, 1, |g, p, v| self.predict(g, p, v))?.into_data())
    }
}

fn dense<E: Scalar>(g: &mut Graph<E>, p: &BoundParams, prefix: &str, x: Var) -> Result<Var, NetError> {
    let y = g.matmul(x, p.get(&format!("{prefix}.w"))?)?;
    Ok(g.add_bias(y, p.get(&format!("{prefix}.b"))?)?)
}

/// Multi-head self-attention plus a feed-forward sublayer, each with a
/// residual connection and no normalization. `x` is `[B, L, d]`.
fn encoder_block<E: Scalar>(g: &mut Graph<E>, p: &BoundParams, layer: usize, x: Var, heads: usize, head_dim: usize) -> Result<Var, NetError> {
    let s = g.shape(x).to_vec();
    let (b, len, d) = (s[0], s[1], s[2]);
    let split_heads = |g: &mut Graph<E>, v: Var| -> Result<Var, NetError> {
        let v = g.reshape(v, &[b, len, heads, head_dim])?;
        let v = g.permute(v, &[0, 2, 1, 3])?;
        Ok(g.reshape(v, &[b * heads, len, head_dim])?)
    };
    let q = dense(g, p, &format!("enc{layer}.q"), x)?;
    let q = split_heads(g, q)?;
    let k = dense(g, p, &format!("enc{layer}.k"), x)?;
    let k = split_heads(g, k)?;
    let v = dense(g, p, &format!("enc{layer}.v"), x)?;
    let v = split_heads(g, v)?;

    let scores = g.bmm(q, k, true)?;
    let scores = g.scale(scores, E::from_f64_lossy(1.0 / (head_dim as f64).sqrt()));
    let attn = g.softmax(scores)?;
    let ctx = g.bmm(attn, v, false)?;
    let ctx = g.reshape(ctx, &[b, heads, len, head_dim])?;
    let ctx = g.permute(ctx, &[0, 2, 1, 3])?;
    let ctx = g.reshape(ctx, &[b, len, heads * head_dim])?;
    let out = dense(g, p, &format!("enc{layer}.o"), ctx)?;
    let x = g.add(x, out)?;

    let h = dense(g, p, &format!("enc{layer}.ff1"), x)?;
    let h = g.relu(h);
    let h = dense(g, p, &format!("enc{layer}.ff2"), h)?;
    debug_assert_eq!(g.shape(h), &[b, len, d]);
    Ok(g.add(x, h)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_input(b: usize, t: usize, f: usize, seed: u64) -> Tensor<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..b * t * f).map(|_| rng.random_range(-1.0..1.0)).collect();
        Tensor::new(vec![b, t, f], data).unwrap()
    }

    #[test]
    fn build_is_deterministic() {
        let spec = ArchSpec::catalog("TCN-β", 5).unwrap();
        let a = Model::<f32>::build(&spec, 9).unwrap();
        let b = Model::<f32>::build(&spec, 9).unwrap();
        assert_eq!(a, b);
        let c = Model::<f32>::build(&spec, 10).unwrap();
        assert_ne!(a.params(), c.params());
    }

    #[test]
    fn lstm_param_count_closed_form() {
        let spec = ArchSpec::catalog("LSTM-α", 47).unwrap();
        let m = Model::<f32>::build(&spec, 0).unwrap();
        let recurrent = 4 * (47 + 256 + 1) * 256;
        let head = 256 + 1;
        assert_eq!(m.params().num_params(), recurrent + head);
        let enumerated: usize = m.embedding_param_names().iter().map(|n| m.params().get(n).unwrap().numel()).sum();
        assert_eq!(enumerated, recurrent);
    }

    #[test]
    fn tcn_alpha_accepts_any_length() {
        let spec = ArchSpec::catalog("TCN-α", 47).unwrap();
        let m = Model::<f64>::build(&spec, 1).unwrap();
        for t in [48, 24] {
            let e = m.embed_tensor(&random_input(2, t, 47, 3)).unwrap();
            assert_eq!(e.shape(), &[2, 192]);
        }
    }

    #[test]
    fn embedding_width_independent_of_length() {
        for spec in ArchSpec::full_catalog(3) {
            let m = Model::<f64>::build(&spec, 2).unwrap();
            for t in [7, 11] {
                let e = m.embed_tensor(&random_input(2, t, 3, 4)).unwrap();
                assert_eq!(e.shape(), &[2, spec.embedding_dim()], "{}", spec.name);
                assert!(e.all_finite(), "{}", spec.name);
            }
        }
    }

    #[test]
    fn identical_samples_identical_rows() {
        for name in ["TCN-γ", "TRSF-β", "ViT-β", "RNN-β"] {
            let spec = ArchSpec::catalog(name, 3).unwrap();
            let m = Model::<f64>::build(&spec, 5).unwrap();
            let one = random_input(1, 8, 3, 6);
            let two = one.select_rows(&[0, 0, 0]).unwrap();
            let e = m.embed_tensor(&two).unwrap();
            let w = spec.embedding_dim();
            assert_eq!(&e.data()[..w], &e.data()[w..2 * w]);
            assert_eq!(&e.data()[..w], &e.data()[2 * w..]);
        }
    }

    #[test]
    fn feature_mismatch_rejected() {
        let spec = ArchSpec::catalog("LSTM-β", 4).unwrap();
        let m = Model::<f64>::build(&spec, 0).unwrap();
        assert!(matches!(m.embed_tensor(&random_input(1, 5, 3, 0)), Err(NetError::InputShape { .. })));
    }

    #[test]
    fn predictions_in_open_unit_interval_and_zero_head() {
        for spec in ArchSpec::full_catalog(3) {
            let mut m = Model::<f64>::build(&spec, 8).unwrap();
            let x = random_input(4, 6, 3, 9);
            let p = m.predict_tensor(&x).unwrap();
            assert!(p.iter().all(|&v| v > 0.0 && v < 1.0), "{}", spec.name);
            m.zero_head();
            let p = m.predict_tensor(&x).unwrap();
            assert!(p.iter().all(|&v| v == 0.5), "{}", spec.name);
        }
    }

    #[test]
    fn prediction_permutation_equivariant() {
        let spec = ArchSpec::catalog("ViT-β", 3).unwrap();
        let m = Model::<f64>::build(&spec, 3).unwrap();
        let x = random_input(5, 6, 3, 1);
        let p = m.predict_tensor(&x).unwrap();
        let order = [3, 0, 4, 2, 1];
        let q = m.predict_tensor(&x.select_rows(&order).unwrap()).unwrap();
        for (i, &o) in order.iter().enumerate() {
            assert!((q[i] - p[o]).abs() < 1e-12);
        }
    }

    #[test]
    fn from_params_checks_layout() {
        let spec = ArchSpec::catalog("RNN-β", 3).unwrap();
        let m = Model::<f64>::build(&spec, 0).unwrap();
        assert!(Model::from_params(&spec, m.params().clone()).is_ok());
        let other = ArchSpec::catalog("RNN-α", 3).unwrap();
        assert!(Model::from_params(&other, m.into_params()).is_err());
    }
}
