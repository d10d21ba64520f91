//! Reverse-mode gradients via an explicit operation tape.
//!
//! The tape evaluates eagerly: each `Tape` method runs the forward
//! computation, stores the output buffer, and records enough to replay the
//! chain rule in reverse. Buffers are row-major matrices whose rows are batch
//! samples; single vectors are `1 × d`. Parameters are snapshotted at
//! registration, so later mutation of the model cannot skew the backward
//! pass.

use super::gaussian::clamp_logvar;
use super::layer::DenseLayer;
use super::math::{affine_backward_input, affine_backward_params, affine_batch, Matrix};
use super::{elu_grad_from_output, elu_scalar, Real};

/// Handle to a value buffer on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Node(usize);

/// Handle to a registered parameter block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamRef {
    node: usize,
}

impl ParamRef {
    /// View the parameter block as a value buffer.
    pub fn as_node(&self) -> Node {
        Node(self.node)
    }
}

/// Weight and bias handles for one dense layer.
#[derive(Debug, Clone, Copy)]
pub struct LayerRef {
    pub weights: ParamRef,
    pub biases: ParamRef,
}

#[derive(Debug)]
enum Op<F> {
    Affine { x: usize, w: usize, b: usize, out: usize },
    Elu { x: usize, out: usize },
    Tanh { x: usize, out: usize },
    ColScaleShift { x: usize, scales: Vec<F>, out: usize },
    ClampLogvar { x: usize, out: usize },
    Reparam { mu: usize, logvar: usize, eps: Matrix<F>, out: usize },
    MeanSquaredError { pred: usize, target: Matrix<F>, out: usize },
    KlToStdNormal { mu: usize, logvar: usize, out: usize },
    LogSoftmax { x: usize, out: usize },
    SelectWeightedSum { x: usize, indices: Vec<usize>, weights: Vec<F>, out: usize },
    EntropyMean { log_probs: usize, out: usize },
    AddScaled { terms: Vec<(usize, F)>, out: usize },
}

struct Buf<F> {
    val: Matrix<F>,
    grad: Option<Matrix<F>>,
    name: Option<String>,
}

/// Ordered record of primitive forward operations over value buffers.
pub struct Tape<F> {
    bufs: Vec<Buf<F>>,
    ops: Vec<Op<F>>,
    consumed: bool,
}

impl<F: Real> Default for Tape<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Real> Tape<F> {
    pub fn new() -> Self {
        Tape { bufs: Vec::new(), ops: Vec::new(), consumed: false }
    }

    fn push(&mut self, val: Matrix<F>, name: Option<String>) -> usize {
        self.bufs.push(Buf { val, grad: None, name });
        self.bufs.len() - 1
    }

    /// Record a constant input buffer (no gradient reported).
    pub fn constant(&mut self, val: Matrix<F>) -> Node {
        Node(self.push(val, None))
    }

    pub fn constant_row(&mut self, row: &[F]) -> Node {
        self.constant(Matrix::from_vec(1, row.len(), row.to_vec()))
    }

    /// Register a named parameter block. The data is copied onto the tape.
    pub fn param(&mut self, name: &str, val: Matrix<F>) -> ParamRef {
        ParamRef { node: self.push(val, Some(name.to_string())) }
    }

    /// Register a layer's weights and biases as two parameter blocks.
    pub fn layer(&mut self, name: &str, layer: &DenseLayer<F>) -> LayerRef {
        let weights = self.param(&format!("{name}.w"), layer.weights.clone());
        let biases =
            self.param(&format!("{name}.b"), Matrix::from_vec(1, layer.biases.len(), layer.biases.clone()));
        LayerRef { weights, biases }
    }

    pub fn value(&self, node: Node) -> &Matrix<F> {
        &self.bufs[node.0].val
    }

    /// Value of a `1 × 1` buffer.
    pub fn scalar(&self, node: Node) -> F {
        let m = &self.bufs[node.0].val;
        assert_eq!((m.rows(), m.cols()), (1, 1), "scalar() on a {}x{} buffer", m.rows(), m.cols());
        m.data()[0]
    }

    // ---- recorded operations -------------------------------------------------

    /// `out = x · Wᵀ + b` over batch rows.
    pub fn affine(&mut self, x: Node, layer: LayerRef) -> Node {
        let w = &self.bufs[layer.weights.node].val;
        let b = &self.bufs[layer.biases.node].val;
        let out = affine_batch(&self.bufs[x.0].val, w, b.data());
        let out = self.push(out, None);
        self.ops.push(Op::Affine { x: x.0, w: layer.weights.node, b: layer.biases.node, out });
        Node(out)
    }

    pub fn elu(&mut self, x: Node) -> Node {
        let val = self.map_buf(x, elu_scalar);
        let out = self.push(val, None);
        self.ops.push(Op::Elu { x: x.0, out });
        Node(out)
    }

    pub fn tanh(&mut self, x: Node) -> Node {
        let val = self.map_buf(x, |v| v.tanh());
        let out = self.push(val, None);
        self.ops.push(Op::Tanh { x: x.0, out });
        Node(out)
    }

    /// Per-column affine remap: `out[:, c] = scales[c] * x[:, c] + shifts[c]`.
    pub fn col_scale_shift(&mut self, x: Node, scales: Vec<F>, shifts: Vec<F>) -> Node {
        let src = &self.bufs[x.0].val;
        assert_eq!(scales.len(), src.cols());
        assert_eq!(shifts.len(), src.cols());
        let mut val = src.clone();
        for i in 0..val.rows() {
            for (c, v) in val.row_mut(i).iter_mut().enumerate() {
                *v = scales[c] * *v + shifts[c];
            }
        }
        let out = self.push(val, None);
        self.ops.push(Op::ColScaleShift { x: x.0, scales, out });
        Node(out)
    }

    /// Clamp log-variances into the supported range; gradient passes only
    /// where the input was strictly inside the bounds.
    pub fn clamp_logvar(&mut self, x: Node) -> Node {
        let val = self.map_buf(x, clamp_logvar);
        let out = self.push(val, None);
        self.ops.push(Op::ClampLogvar { x: x.0, out });
        Node(out)
    }

    /// `z = mu + exp(0.5 · logvar) ⊙ eps` with a fixed noise matrix.
    pub fn reparam(&mut self, mu: Node, logvar: Node, eps: Matrix<F>) -> Node {
        let half = F::from_f64_lossy(0.5);
        let mu_m = &self.bufs[mu.0].val;
        let lv_m = &self.bufs[logvar.0].val;
        assert_eq!((mu_m.rows(), mu_m.cols()), (lv_m.rows(), lv_m.cols()));
        assert_eq!((mu_m.rows(), mu_m.cols()), (eps.rows(), eps.cols()));
        let mut val = mu_m.clone();
        for (v, (&lv, &e)) in val.data_mut().iter_mut().zip(lv_m.data().iter().zip(eps.data())) {
            *v = *v + (half * lv).exp() * e;
        }
        let out = self.push(val, None);
        self.ops.push(Op::Reparam { mu: mu.0, logvar: logvar.0, eps, out });
        Node(out)
    }

    /// Mean over all elements of squared differences against a constant target.
    pub fn mean_squared_error(&mut self, pred: Node, target: Matrix<F>) -> Node {
        let p = &self.bufs[pred.0].val;
        assert_eq!((p.rows(), p.cols()), (target.rows(), target.cols()), "mse target shape mismatch");
        let n = F::from_f64_lossy((p.rows() * p.cols()) as f64);
        let sum: F = p
            .data()
            .iter()
            .zip(target.data())
            .map(|(&a, &b)| {
                let d = a - b;
                d * d
            })
            .sum();
        let out = self.push(Matrix::from_vec(1, 1, vec![sum / n]), None);
        self.ops.push(Op::MeanSquaredError { pred: pred.0, target, out });
        Node(out)
    }

    /// KL against the standard normal, summed over columns and averaged over
    /// batch rows.
    pub fn kl_to_std_normal(&mut self, mu: Node, logvar: Node) -> Node {
        let half = F::from_f64_lossy(0.5);
        let mu_m = &self.bufs[mu.0].val;
        let lv_m = &self.bufs[logvar.0].val;
        assert_eq!((mu_m.rows(), mu_m.cols()), (lv_m.rows(), lv_m.cols()));
        let rows = F::from_f64_lossy(mu_m.rows() as f64);
        let sum: F = mu_m
            .data()
            .iter()
            .zip(lv_m.data())
            .map(|(&m, &lv)| half * (lv.exp() + m * m - F::one() - lv))
            .sum();
        let out = self.push(Matrix::from_vec(1, 1, vec![sum / rows]), None);
        self.ops.push(Op::KlToStdNormal { mu: mu.0, logvar: logvar.0, out });
        Node(out)
    }

    /// Row-wise numerically stable log-softmax.
    pub fn log_softmax(&mut self, x: Node) -> Node {
        let src = &self.bufs[x.0].val;
        let mut val = src.clone();
        for i in 0..val.rows() {
            let row = val.row_mut(i);
            let max = row.iter().cloned().fold(F::neg_infinity(), F::max);
            let log_sum = row.iter().map(|&v| (v - max).exp()).sum::<F>().ln() + max;
            for v in row.iter_mut() {
                *v = *v - log_sum;
            }
        }
        let out = self.push(val, None);
        self.ops.push(Op::LogSoftmax { x: x.0, out });
        Node(out)
    }

    /// `out = Σ_t weights[t] · x[t, indices[t]]`. The weights are constants:
    /// no gradient flows into them.
    pub fn select_weighted_sum(&mut self, x: Node, indices: Vec<usize>, weights: Vec<F>) -> Node {
        let src = &self.bufs[x.0].val;
        assert_eq!(indices.len(), src.rows());
        assert_eq!(weights.len(), src.rows());
        let sum: F = indices.iter().zip(&weights).enumerate().map(|(t, (&idx, &w))| w * src[(t, idx)]).sum();
        let out = self.push(Matrix::from_vec(1, 1, vec![sum]), None);
        self.ops.push(Op::SelectWeightedSum { x: x.0, indices, weights, out });
        Node(out)
    }

    /// Mean over rows of the Shannon entropy of `exp(log_probs)`.
    pub fn entropy_mean(&mut self, log_probs: Node) -> Node {
        let lp = &self.bufs[log_probs.0].val;
        let rows = F::from_f64_lossy(lp.rows() as f64);
        let sum: F = lp.data().iter().map(|&l| -(l.exp() * l)).sum();
        let out = self.push(Matrix::from_vec(1, 1, vec![sum / rows]), None);
        self.ops.push(Op::EntropyMean { log_probs: log_probs.0, out });
        Node(out)
    }

    /// Scalar combination `out = Σ coeff_i · term_i` of `1 × 1` buffers.
    pub fn add_scaled(&mut self, terms: &[(Node, F)]) -> Node {
        let sum: F = terms
            .iter()
            .map(|&(node, coeff)| {
                let m = &self.bufs[node.0].val;
                assert_eq!((m.rows(), m.cols()), (1, 1), "add_scaled term is not a scalar");
                coeff * m.data()[0]
            })
            .sum();
        let out = self.push(Matrix::from_vec(1, 1, vec![sum]), None);
        let terms = terms.iter().map(|&(n, c)| (n.0, c)).collect();
        self.ops.push(Op::AddScaled { terms, out });
        Node(out)
    }

    // ---- backward ------------------------------------------------------------

    /// Run the reverse pass from a scalar loss. Consumes the tape's gradient
    /// budget: calling it a second time is a hard error.
    pub fn backward(&mut self, loss: Node) {
        assert!(!self.consumed, "tape consumed twice: backward() already ran");
        self.consumed = true;
        {
            let m = &self.bufs[loss.0].val;
            assert_eq!((m.rows(), m.cols()), (1, 1), "backward() seed must be a scalar buffer");
        }
        self.bufs[loss.0].grad = Some(Matrix::from_vec(1, 1, vec![F::one()]));

        for idx in (0..self.ops.len()).rev() {
            self.backward_op(idx);
        }
    }

    fn grad_of(&self, buf: usize) -> Option<Matrix<F>> {
        self.bufs[buf].grad.clone()
    }

    fn accumulate(&mut self, buf: usize, delta: &Matrix<F>) {
        match &mut self.bufs[buf].grad {
            Some(g) => {
                for (gi, &di) in g.data_mut().iter_mut().zip(delta.data()) {
                    *gi += di;
                }
            }
            None => self.bufs[buf].grad = Some(delta.clone()),
        }
    }

    fn backward_op(&mut self, idx: usize) {
        // Ops are taken apart by index; buffers are cloned where aliasing with
        // the accumulator would otherwise fight the borrow checker.
        let op = &self.ops[idx];
        match op {
            Op::Affine { x, w, b, out } => {
                let (x, w, b, out) = (*x, *w, *b, *out);
                let Some(d_out) = self.grad_of(out) else { return };
                let w_val = self.bufs[w].val.clone();
                let dx = affine_backward_input(&d_out, &w_val);
                self.accumulate(x, &dx);

                let x_val = self.bufs[x].val.clone();
                let mut dw = Matrix::zeros(w_val.rows(), w_val.cols());
                let mut db = vec![F::zero(); d_out.cols()];
                affine_backward_params(&d_out, &x_val, &mut dw, &mut db);
                self.accumulate(w, &dw);
                self.accumulate(b, &Matrix::from_vec(1, db.len(), db));
            }
            Op::Elu { x, out } => {
                let (x, out) = (*x, *out);
                let Some(d_out) = self.grad_of(out) else { return };
                let mut dx = d_out;
                for (d, &y) in dx.data_mut().iter_mut().zip(self.bufs[out].val.data()) {
                    *d = *d * elu_grad_from_output(y);
                }
                self.accumulate(x, &dx);
            }
            Op::Tanh { x, out } => {
                let (x, out) = (*x, *out);
                let Some(d_out) = self.grad_of(out) else { return };
                let mut dx = d_out;
                for (d, &y) in dx.data_mut().iter_mut().zip(self.bufs[out].val.data()) {
                    *d = *d * (F::one() - y * y);
                }
                self.accumulate(x, &dx);
            }
            Op::ColScaleShift { x, scales, out } => {
                let (x, out) = (*x, *out);
                let scales = scales.clone();
                let Some(d_out) = self.grad_of(out) else { return };
                let mut dx = d_out;
                for i in 0..dx.rows() {
                    for (c, d) in dx.row_mut(i).iter_mut().enumerate() {
                        *d = *d * scales[c];
                    }
                }
                self.accumulate(x, &dx);
            }
            Op::ClampLogvar { x, out } => {
                let (x, out) = (*x, *out);
                let Some(d_out) = self.grad_of(out) else { return };
                let mut dx = d_out;
                let lo = F::from_f64_lossy(super::gaussian::LOGVAR_MIN);
                let hi = F::from_f64_lossy(super::gaussian::LOGVAR_MAX);
                for (d, &v) in dx.data_mut().iter_mut().zip(self.bufs[x].val.data()) {
                    if v <= lo || v >= hi {
                        *d = F::zero();
                    }
                }
                self.accumulate(x, &dx);
            }
            Op::Reparam { mu, logvar, eps, out } => {
                let (mu, logvar, out) = (*mu, *logvar, *out);
                let eps = eps.clone();
                let Some(d_out) = self.grad_of(out) else { return };
                self.accumulate(mu, &d_out);
                let half = F::from_f64_lossy(0.5);
                let mut dlv = d_out;
                for ((d, &lv), &e) in dlv.data_mut().iter_mut().zip(self.bufs[logvar].val.data()).zip(eps.data())
                {
                    // dz/dlogvar = 0.5 * exp(0.5*logvar) * eps
                    *d = *d * half * (half * lv).exp() * e;
                }
                self.accumulate(logvar, &dlv);
            }
            Op::MeanSquaredError { pred, target, out } => {
                let (pred, out) = (*pred, *out);
                let target = target.clone();
                let Some(d_out) = self.grad_of(out) else { return };
                let scale = d_out.data()[0]
                    * F::from_f64_lossy(2.0 / (target.rows() * target.cols()) as f64);
                let mut dp = self.bufs[pred].val.clone();
                for (d, &t) in dp.data_mut().iter_mut().zip(target.data()) {
                    *d = scale * (*d - t);
                }
                self.accumulate(pred, &dp);
            }
            Op::KlToStdNormal { mu, logvar, out } => {
                let (mu, logvar, out) = (*mu, *logvar, *out);
                let Some(d_out) = self.grad_of(out) else { return };
                let rows_inv = F::from_f64_lossy(1.0 / self.bufs[mu].val.rows() as f64);
                let scale = d_out.data()[0] * rows_inv;
                let half = F::from_f64_lossy(0.5);

                let mut dmu = self.bufs[mu].val.clone();
                for d in dmu.data_mut() {
                    *d = scale * *d;
                }
                self.accumulate(mu, &dmu);

                let mut dlv = self.bufs[logvar].val.clone();
                for d in dlv.data_mut() {
                    *d = scale * half * (d.exp() - F::one());
                }
                self.accumulate(logvar, &dlv);
            }
            Op::LogSoftmax { x, out } => {
                let (x, out) = (*x, *out);
                let Some(d_out) = self.grad_of(out) else { return };
                let mut dx = d_out;
                for i in 0..dx.rows() {
                    let row_sum: F = dx.row(i).iter().cloned().sum();
                    let probs: Vec<F> = self.bufs[out].val.row(i).iter().map(|&l| l.exp()).collect();
                    for (d, &p) in dx.row_mut(i).iter_mut().zip(&probs) {
                        *d = *d - p * row_sum;
                    }
                }
                self.accumulate(x, &dx);
            }
            Op::SelectWeightedSum { x, indices, weights, out } => {
                let (x, out) = (*x, *out);
                let (indices, weights) = (indices.clone(), weights.clone());
                let Some(d_out) = self.grad_of(out) else { return };
                let scale = d_out.data()[0];
                let src = &self.bufs[x].val;
                let mut dx = Matrix::zeros(src.rows(), src.cols());
                for (t, (&idx, &w)) in indices.iter().zip(&weights).enumerate() {
                    dx[(t, idx)] += scale * w;
                }
                self.accumulate(x, &dx);
            }
            Op::EntropyMean { log_probs, out } => {
                let (lp, out) = (*log_probs, *out);
                let Some(d_out) = self.grad_of(out) else { return };
                let rows_inv = F::from_f64_lossy(1.0 / self.bufs[lp].val.rows() as f64);
                let scale = d_out.data()[0] * rows_inv;
                let mut dlp = self.bufs[lp].val.clone();
                for d in dlp.data_mut() {
                    // d/dl of -(exp(l) * l) = -exp(l) * (l + 1)
                    *d = -scale * d.exp() * (*d + F::one());
                }
                self.accumulate(lp, &dlp);
            }
            Op::AddScaled { terms, out } => {
                let out = *out;
                let terms = terms.clone();
                let Some(d_out) = self.grad_of(out) else { return };
                let upstream = d_out.data()[0];
                for (node, coeff) in terms {
                    self.accumulate(node, &Matrix::from_vec(1, 1, vec![upstream * coeff]));
                }
            }
        }
    }

    // ---- gradient access -------------------------------------------------------

    /// Gradient of the loss w.r.t. a parameter block, flattened row-major.
    /// Parameters untouched by the forward pass report zeros.
    pub fn param_grad(&self, param: ParamRef) -> Vec<F> {
        let buf = &self.bufs[param.node];
        assert!(self.consumed, "param_grad() before backward()");
        match &buf.grad {
            Some(g) => g.data().to_vec(),
            None => vec![F::zero(); buf.val.data().len()],
        }
    }

    /// Name given at registration (parameter buffers only).
    pub fn param_name(&self, param: ParamRef) -> &str {
        self.bufs[param.node].name.as_deref().expect("param buffers are named")
    }

    fn map_buf(&self, x: Node, f: impl Fn(F) -> F) -> Matrix<F> {
        let src = &self.bufs[x.0].val;
        let mut out = src.clone();
        for v in out.data_mut() {
            *v = f(*v);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_gradient<G: Fn(&[f64]) -> f64>(f: G, at: &[f64], h: f64) -> Vec<f64> {
        let mut grad = vec![0.0; at.len()];
        let mut point = at.to_vec();
        for i in 0..at.len() {
            point[i] = at[i] + h;
            let up = f(&point);
            point[i] = at[i] - h;
            let down = f(&point);
            point[i] = at[i];
            grad[i] = (up - down) / (2.0 * h);
        }
        grad
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        let den: f64 =
            a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt()).max(1e-12);
        num / den
    }

    #[test]
    fn mse_gradient_closed_form() {
        // loss = mse(x, c) with x a parameter: gradient 2(x - c)/n.
        let x = vec![1.0f64, -2.0, 0.5, 3.0];
        let c = vec![0.0f64, 1.0, 0.5, -1.0];
        let mut tape = Tape::new();
        let p = tape.param("x", Matrix::from_vec(1, 4, x.clone()));
        let node = Node(p.node);
        let loss = tape.mean_squared_error(node, Matrix::from_vec(1, 4, c.clone()));
        tape.backward(loss);
        let grad = tape.param_grad(p);
        for i in 0..4 {
            let expected = 2.0 * (x[i] - c[i]) / 4.0;
            assert!((grad[i] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn untouched_parameter_has_zero_gradient() {
        let mut tape = Tape::new();
        let used = tape.param("used", Matrix::from_vec(1, 2, vec![1.0, 2.0]));
        let unused = tape.param("unused", Matrix::from_vec(1, 3, vec![5.0, 6.0, 7.0]));
        let loss = tape.mean_squared_error(Node(used.node), Matrix::from_vec(1, 2, vec![0.0, 0.0]));
        tape.backward(loss);
        assert_eq!(tape.param_grad(unused), vec![0.0; 3]);
    }

    #[test]
    #[should_panic(expected = "tape consumed twice")]
    fn double_backward_panics() {
        let mut tape = Tape::new();
        let p = tape.param("x", Matrix::from_vec(1, 1, vec![1.0]));
        let loss = tape.mean_squared_error(Node(p.node), Matrix::from_vec(1, 1, vec![0.0]));
        tape.backward(loss);
        tape.backward(loss);
    }

    /// Builds a two-layer ELU network with a tanh-squashed output, runs
    /// mse-against-target, and checks the tape against central differences.
    #[test]
    fn small_network_matches_finite_differences() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let (n_in, n_hidden, n_out) = (3usize, 4usize, 2usize);
            let n_params = n_hidden * n_in + n_hidden + n_out * n_hidden + n_out;
            let theta: Vec<f64> = (0..n_params).map(|_| rng.gen_range(-0.9..0.9)).collect();
            let input = vec![0.3, -0.8, 0.5];
            let target = vec![0.2, -0.1];

            let eval = |theta: &[f64]| -> (f64, Vec<f64>) {
                let mut k = 0;
                let mut take = |n: usize| {
                    let s = theta[k..k + n].to_vec();
                    k += n;
                    s
                };
                let l1 = DenseLayer {
                    weights: Matrix::from_vec(n_hidden, n_in, take(n_hidden * n_in)),
                    biases: take(n_hidden),
                };
                let l2 = DenseLayer {
                    weights: Matrix::from_vec(n_out, n_hidden, take(n_out * n_hidden)),
                    biases: take(n_out),
                };
                let mut tape = Tape::new();
                let r1 = tape.layer("l1", &l1);
                let r2 = tape.layer("l2", &l2);
                let x = tape.constant_row(&input);
                let h = tape.affine(x, r1);
                let h = tape.elu(h);
                let o = tape.affine(h, r2);
                let o = tape.tanh(o);
                let o = tape.col_scale_shift(o, vec![0.7, 0.9], vec![0.0, 0.1]);
                let loss = tape.mean_squared_error(o, Matrix::from_vec(1, n_out, target.clone()));
                let value = tape.scalar(loss);
                tape.backward(loss);
                let mut grad = Vec::new();
                for p in [r1.weights, r1.biases, r2.weights, r2.biases] {
                    grad.extend(tape.param_grad(p));
                }
                (value, grad)
            };

            let (_, analytic) = eval(&theta);
            let numeric = fd_gradient(|t| eval(t).0, &theta, 1e-5);
            let err = rel_err(&analytic, &numeric);
            assert!(err < 1e-4, "gradient mismatch: rel err {err}");
        }
    }

    #[test]
    fn policy_losses_match_finite_differences() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let (n_in, n_h) = (4usize, 5usize);
        let t_steps = 6usize;
        let n_params = n_h * n_in + n_h + 3 * n_h + 3 + n_h + 1;
        let theta: Vec<f64> = (0..n_params).map(|_| rng.gen_range(-0.8..0.8)).collect();
        let inputs: Vec<Vec<f64>> =
            (0..t_steps).map(|_| (0..n_in).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let actions: Vec<usize> = (0..t_steps).map(|_| rng.gen_range(0..3)).collect();
        let advantages: Vec<f64> = (0..t_steps).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let returns: Vec<f64> = (0..t_steps).map(|_| rng.gen_range(-1.0..1.0)).collect();

        let eval = |theta: &[f64]| -> (f64, Vec<f64>) {
            let mut k = 0;
            let mut take = |n: usize| {
                let s = theta[k..k + n].to_vec();
                k += n;
                s
            };
            let trunk =
                DenseLayer { weights: Matrix::from_vec(n_h, n_in, take(n_h * n_in)), biases: take(n_h) };
            let actor = DenseLayer { weights: Matrix::from_vec(3, n_h, take(3 * n_h)), biases: take(3) };
            let critic = DenseLayer { weights: Matrix::from_vec(1, n_h, take(n_h)), biases: take(1) };

            let mut flat = Vec::with_capacity(t_steps * n_in);
            for row in &inputs {
                flat.extend_from_slice(row);
            }
            let mut tape = Tape::new();
            let rt = tape.layer("trunk", &trunk);
            let ra = tape.layer("actor", &actor);
            let rc = tape.layer("critic", &critic);
            let x = tape.constant(Matrix::from_vec(t_steps, n_in, flat));
            let h = tape.affine(x, rt);
            let h = tape.elu(h);
            let logits = tape.affine(h, ra);
            let values = tape.affine(h, rc);
            let log_probs = tape.log_softmax(logits);
            let t_inv = 1.0 / t_steps as f64;
            let pg_weights: Vec<f64> = advantages.iter().map(|a| -a * t_inv).collect();
            let actor_loss = tape.select_weighted_sum(log_probs, actions.clone(), pg_weights);
            let critic_loss = tape.mean_squared_error(
                values,
                Matrix::from_vec(t_steps, 1, returns.clone()),
            );
            let entropy = tape.entropy_mean(log_probs);
            let loss = tape.add_scaled(&[(actor_loss, 1.0), (critic_loss, 1.0), (entropy, -0.01)]);
            let value = tape.scalar(loss);
            tape.backward(loss);
            let mut grad = Vec::new();
            for p in [rt.weights, rt.biases, ra.weights, ra.biases, rc.weights, rc.biases] {
                grad.extend(tape.param_grad(p));
            }
            (value, grad)
        };

        let (_, analytic) = eval(&theta);
        let numeric = fd_gradient(|t| eval(t).0, &theta, 1e-5);
        let err = rel_err(&analytic, &numeric);
        assert!(err < 1e-4, "policy gradient mismatch: rel err {err}");
    }

    #[test]
    fn reparam_and_kl_match_finite_differences() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(33);
        let dim = 3usize;
        let theta: Vec<f64> = (0..2 * dim).map(|_| rng.gen_range(-0.9..0.9)).collect();
        let eps: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let target = vec![0.4, -0.2, 0.9];

        let eval = |theta: &[f64]| -> (f64, Vec<f64>) {
            let mut tape = Tape::new();
            let mu = tape.param("mu", Matrix::from_vec(1, dim, theta[..dim].to_vec()));
            let lv = tape.param("lv", Matrix::from_vec(1, dim, theta[dim..].to_vec()));
            let lv_clamped = tape.clamp_logvar(Node(lv.node));
            let z = tape.reparam(Node(mu.node), lv_clamped, Matrix::from_vec(1, dim, eps.clone()));
            let recon = tape.mean_squared_error(z, Matrix::from_vec(1, dim, target.clone()));
            let kl = tape.kl_to_std_normal(Node(mu.node), lv_clamped);
            let loss = tape.add_scaled(&[(recon, 1.0), (kl, 1.0)]);
            let value = tape.scalar(loss);
            tape.backward(loss);
            let mut grad = tape.param_grad(mu);
            grad.extend(tape.param_grad(lv));
            (value, grad)
        };

        let (_, analytic) = eval(&theta);
        let numeric = fd_gradient(|t| eval(t).0, &theta, 1e-5);
        assert!(rel_err(&analytic, &numeric) < 1e-4);
    }

    #[test]
    fn forward_passes_are_bit_identical() {
        let run = || {
            let mut tape = Tape::new();
            let layer = DenseLayer {
                weights: Matrix::from_vec(2, 2, vec![0.3, -0.7, 1.1, 0.05]),
                biases: vec![0.01, -0.02],
            };
            let r = tape.layer("l", &layer);
            let x = tape.constant_row(&[0.9, -0.4]);
            let h = tape.affine(x, r);
            let h = tape.elu(h);
            tape.value(h).data().to_vec()
        };
        assert_eq!(run(), run());
    }
}
