//! A small multilayer perceptron for Q-value regression, with hand-written
//! backpropagation and an Adam optimizer.
//!
//! Parameters live in one flat vector; layer `l` stores its weight matrix
//! (row-major, `out × in`) followed by its bias vector. Hidden layers use
//! ReLU, the output layer is linear.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::episode::Action;
use crate::error::{invalid, Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// One replay record.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Action,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    dims: Vec<usize>,
    params: Vec<f64>,
}

/// Gradient with the same layout as [`Mlp::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<f64>);

impl Gradients {
    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, g| m.max(g.abs()))
    }
}

fn param_count(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn new<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(invalid(format!("invalid layer dims {dims:?}")));
        }
        let mut params = Vec::with_capacity(param_count(dims));
        for w in dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            params.extend((0..fan_in * fan_out).map(|_| rng.random_range(-limit..=limit)));
            params.extend(std::iter::repeat_n(0.0, fan_out));
        }
        Ok(Self { dims: dims.to_vec(), params })
    }

    pub fn from_params(dims: Vec<usize>, params: Vec<f64>) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(invalid(format!("invalid layer dims {dims:?}")));
        }
        let expected = param_count(&dims);
        if params.len() != expected {
            return Err(Error::DimensionMismatch { expected, got: params.len() });
        }
        Ok(Self { dims, params })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().expect("at least two layers")
    }

    /// `(weights, biases)` of layer `l`.
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let off: usize = param_count(&self.dims[..=l]);
        let (i, o) = (self.dims[l], self.dims[l + 1]);
        let w = &self.params[off..off + i * o];
        let b = &self.params[off + i * o..off + i * o + o];
        (w, b)
    }

    pub fn n_layers(&self) -> usize {
        self.dims.len() - 1
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), got: x.len() });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.trace(x).pop().expect("output layer"))
    }

    /// Activations of every layer, input first. Hidden entries are post-ReLU.
    fn trace(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.dims.len());
        acts.push(x.to_vec());
        let last = self.n_layers() - 1;
        for l in 0..self.n_layers() {
            let (w, b) = self.layer(l);
            let input = &acts[l];
            let mut out = b.to_vec();
            for (o, row) in out.iter_mut().zip(w.chunks_exact(input.len())) {
                *o += row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>();
                if l != last && *o < 0.0 {
                    *o = 0.0;
                }
            }
            acts.push(out);
        }
        acts
    }

    /// Accumulate into `grad` the gradient of a loss whose derivative with
    /// respect to the output is `d_out`, given the trace of the input.
    fn backward(&self, acts: &[Vec<f64>], d_out: &[f64], grad: &mut [f64]) {
        let mut delta = d_out.to_vec();
        for l in (0..self.n_layers()).rev() {
            let off = param_count(&self.dims[..=l]);
            let (i, o) = (self.dims[l], self.dims[l + 1]);
            let input = &acts[l];
            let (gw, rest) = grad[off..].split_at_mut(i * o);
            for (r, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                for (g, a) in gw[r * i..(r + 1) * i].iter_mut().zip(input) {
                    *g += d * a;
                }
                rest[r] += d;
            }
            if l == 0 {
                break;
            }
            let (w, _) = self.layer(l);
            let mut prev = vec![0.0; i];
            for (r, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                for (p, wv) in prev.iter_mut().zip(&w[r * i..(r + 1) * i]) {
                    *p += d * wv;
                }
            }
            // ReLU mask from the post-activation values
            for (p, a) in prev.iter_mut().zip(input) {
                if *a <= 0.0 {
                    *p = 0.0;
                }
            }
            delta = prev;
        }
    }
}

/// Online network with its optimizer moments.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    pub mlp: Mlp,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    steps: u64,
}

impl QNetwork {
    pub fn new<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Result<Self> {
        Ok(Self::from_mlp(Mlp::new(dims, rng)?))
    }

    pub fn from_mlp(mlp: Mlp) -> Self {
        let n = mlp.params.len();
        Self { mlp, first_moment: vec![0.0; n], second_moment: vec![0.0; n], steps: 0 }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.mlp.forward(x)
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn moments(&self) -> (&[f64], &[f64]) {
        (&self.first_moment, &self.second_moment)
    }

    /// One Adam update with bias correction.
    pub fn optimizer_step(&mut self, grads: &Gradients, lr: f64) -> Result<()> {
        let n = self.mlp.params.len();
        if grads.0.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: grads.0.len() });
        }
        self.steps += 1;
        let t = self.steps as i32;
        let c1 = 1.0 - ADAM_BETA1.powi(t);
        let c2 = 1.0 - ADAM_BETA2.powi(t);
        for (((p, m), v), g) in self
            .mlp
            .params
            .iter_mut()
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
            .zip(&grads.0)
        {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
        Ok(())
    }

    pub fn to_checkpoint(&self) -> NetworkCheckpoint {
        NetworkCheckpoint::from(&self.mlp)
    }
}

/// Frozen copy of the online network used for bootstrap targets.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetNetwork {
    pub mlp: Mlp,
    syncs: u64,
}

impl TargetNetwork {
    pub fn new(net: &QNetwork) -> Self {
        Self { mlp: net.mlp.clone(), syncs: 0 }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.mlp.forward(x)
    }

    pub fn syncs(&self) -> u64 {
        self.syncs
    }

    /// Hard copy of the online parameters.
    pub fn sync(&mut self, net: &QNetwork) {
        self.mlp.params.copy_from_slice(&net.mlp.params);
        self.syncs += 1;
    }
}

fn max_q(q: &[f64]) -> f64 {
    q.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Mean squared TD error over `batch` and its gradient with respect to the
/// online parameters. Targets `r + γ max_a' Q_target(s', a')` (or `r` on
/// terminal transitions) are held constant.
pub fn td_loss_and_grads(
    net: &QNetwork,
    target: &TargetNetwork,
    batch: &[&Transition],
    gamma: f64,
) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(invalid("empty training batch"));
    }
    let mlp = &net.mlp;
    let scale = 1.0 / batch.len() as f64;
    let mut grad = vec![0.0; mlp.params.len()];
    let mut loss = 0.0;
    let mut d_out = vec![0.0; mlp.output_dim()];
    for tr in batch {
        mlp.check_input(&tr.state)?;
        let y = if tr.done {
            tr.reward
        } else {
            tr.reward + gamma * max_q(&target.forward(&tr.next_state)?)
        };
        let acts = mlp.trace(&tr.state);
        let q = acts.last().expect("output")[tr.action.index()];
        let err = q - y;
        loss += err * err * scale;
        d_out.fill(0.0);
        d_out[tr.action.index()] = 2.0 * err * scale;
        mlp.backward(&acts, &d_out, &mut grad);
    }
    Ok((loss, Gradients(grad)))
}

/// TD loss only; used by gradient checks.
pub fn td_loss(net: &QNetwork, target: &TargetNetwork, batch: &[&Transition], gamma: f64) -> Result<f64> {
    let mut loss = 0.0;
    for tr in batch {
        let y = if tr.done {
            tr.reward
        } else {
            tr.reward + gamma * max_q(&target.forward(&tr.next_state)?)
        };
        let q = net.forward(&tr.state)?[tr.action.index()];
        loss += (q - y).powi(2);
    }
    Ok(loss / batch.len() as f64)
}

/// Largest relative error between analytic TD gradients and central finite
/// differences with step `h`, over every parameter. Relative error is
/// `|a − n| / max(|a|, |n|, floor)`.
pub fn gradient_check(
    net: &QNetwork,
    target: &TargetNetwork,
    batch: &[&Transition],
    gamma: f64,
    h: f64,
    floor: f64,
) -> Result<f64> {
    let (_, grads) = td_loss_and_grads(net, target, batch, gamma)?;
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for i in 0..grads.0.len() {
        let orig = probe.mlp.params[i];
        probe.mlp.params[i] = orig + h;
        let up = td_loss(&probe, target, batch, gamma)?;
        probe.mlp.params[i] = orig - h;
        let down = td_loss(&probe, target, batch, gamma)?;
        probe.mlp.params[i] = orig;
        let numeric = (up - down) / (2.0 * h);
        let analytic = grads.0[i];
        let denom = analytic.abs().max(numeric.abs()).max(floor);
        worst = worst.max((analytic - numeric).abs() / denom);
    }
    Ok(worst)
}

/// Gradient check on `instances` random problems for a `dims` network: fresh
/// online and target networks, a batch of `batch` transitions with inputs in
/// [-1, 1] and rewards in [0, 1]. Returns each instance's relative error.
pub fn self_test(dims: &[usize], instances: usize, batch: usize, seed: u64) -> Result<Vec<f64>> {
    use rand::SeedableRng;
    let mut rng = crate::seed::SimRng::seed_from_u64(seed);
    let dim = dims.first().copied().unwrap_or(0);
    (0..instances)
        .map(|_| {
            let net = QNetwork::new(dims, &mut rng)?;
            let target = TargetNetwork::new(&QNetwork::new(dims, &mut rng)?);
            let vec = |r: &mut crate::seed::SimRng| (0..dim).map(|_| r.random_range(-1.0..1.0)).collect();
            let trs: Vec<Transition> = (0..batch)
                .map(|k| Transition {
                    state: vec(&mut rng),
                    action: Action::ALL[rng.random_range(0..Action::ALL.len())],
                    reward: rng.random_range(0.0..1.0),
                    next_state: vec(&mut rng),
                    done: k % 7 == 0,
                })
                .collect();
            let refs: Vec<&Transition> = trs.iter().collect();
            gradient_check(&net, &target, &refs, 0.95, 1e-6, 1e-6)
        })
        .collect()
}

/// Serialized network: layer dims plus per-layer flat weight and bias arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkCheckpoint {
    pub dims: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl From<&Mlp> for NetworkCheckpoint {
    fn from(m: &Mlp) -> Self {
        let (weights, biases) = (0..m.n_layers())
            .map(|l| {
                let (w, b) = m.layer(l);
                (w.to_vec(), b.to_vec())
            })
            .unzip();
        Self { dims: m.dims.clone(), weights, biases }
    }
}

impl NetworkCheckpoint {
    pub fn to_mlp(&self) -> Result<Mlp> {
        if self.weights.len() + 1 != self.dims.len() || self.biases.len() + 1 != self.dims.len() {
            return Err(invalid("checkpoint layer count does not match dims"));
        }
        let mut params = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            params.extend_from_slice(w);
            params.extend_from_slice(b);
        }
        let mlp = Mlp::from_params(self.dims.clone(), params)?;
        for l in 0..mlp.n_layers() {
            let expected = self.dims[l] * self.dims[l + 1];
            if self.weights[l].len() != expected {
                return Err(Error::DimensionMismatch { expected, got: self.weights[l].len() });
            }
        }
        Ok(mlp)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}
