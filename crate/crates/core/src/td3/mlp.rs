use std::fmt::Debug;

use ndarray::{Array1, Array2, ArrayView2, Axis, LinalgScalar, ScalarOperand, Zip};
use num_traits::{Float, FromPrimitive};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Numeric type a network can be built over.
pub trait Scalar:
    LinalgScalar + Float + FromPrimitive + ScalarOperand + Debug + Send + Sync + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

fn lit<S: Scalar>(x: f64) -> S {
    S::from_f64(x).expect("representable constant")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputActivation {
    Identity,
    Tanh,
}

/// Fully connected layer, `y = x W + b` with `W` stored `in x out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<S> {
    pub weight: Array2<S>,
    pub bias: Array1<S>,
}

impl<S: Scalar> Dense<S> {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Dense {
            weight: Array2::zeros((fan_in, fan_out)),
            bias: Array1::zeros(fan_out),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.weight.nrows(), self.weight.ncols())
    }

    pub fn fan_in(&self) -> usize {
        self.weight.nrows()
    }

    pub fn fan_out(&self) -> usize {
        self.weight.ncols()
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    /// Weights row-major, then biases.
    pub fn params(&self) -> impl Iterator<Item = &S> {
        self.weight.iter().chain(self.bias.iter())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut S> {
        self.weight.iter_mut().chain(self.bias.iter_mut())
    }
}

/// Multilayer perceptron with rectifier hidden units.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<S> {
    layers: Vec<Dense<S>>,
    output: OutputActivation,
}

/// Post-activation values of every layer, input first.
#[derive(Debug, Clone)]
pub struct Trace<S> {
    pub activations: Vec<Array2<S>>,
}

impl<S> Trace<S> {
    pub fn output(&self) -> &Array2<S> {
        self.activations.last().expect("trace holds the input")
    }
}

impl<S: Scalar> Mlp<S> {
    /// Zero-initialized network for layer widths `sizes` (input first).
    pub fn zeros(sizes: &[usize], output: OutputActivation) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output widths");
        Mlp {
            layers: sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
            output,
        }
    }

    /// Uniform fan-in initialization in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], output: OutputActivation, rng: &mut R) -> Self {
        let mut net = Self::zeros(sizes, output);
        for layer in &mut net.layers {
            let bound = 1.0 / (layer.fan_in() as f64).sqrt();
            for p in layer.params_mut() {
                *p = lit(rng.random_range(-bound..bound));
            }
        }
        net
    }

    pub fn from_layers(layers: Vec<Dense<S>>, output: OutputActivation) -> Result<Self, String> {
        if layers.is_empty() {
            return Err("network has no layers".into());
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.fan_out() {
                return Err(format!("layer {i}: bias length {} != {}", l.bias.len(), l.fan_out()));
            }
        }
        for (i, w) in layers.windows(2).enumerate() {
            if w[0].fan_out() != w[1].fan_in() {
                return Err(format!("layer {} output {} != layer {} input {}", i, w[0].fan_out(), i + 1, w[1].fan_in()));
            }
        }
        Ok(Mlp { layers, output })
    }

    pub fn layers(&self) -> &[Dense<S>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense<S>] {
        &mut self.layers
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output
    }

    /// Layer widths, input first.
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].fan_in()];
        s.extend(self.layers.iter().map(Dense::fan_out));
        s
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().fan_out()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Dense::param_count).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.params().all(|p| p.is_finite()))
    }

    pub fn scale_last_layer(&mut self, factor: S) {
        let last = self.layers.last_mut().unwrap();
        last.params_mut().for_each(|p| *p = *p * factor);
    }

    /// Batched evaluation; rows of `x` are samples.
    pub fn forward(&self, x: ArrayView2<S>) -> Array2<S> {
        let n = self.layers.len();
        let mut a = x.to_owned();
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = a.dot(&l.weight) + &l.bias;
            self.activate(&mut z, i + 1 == n);
            a = z;
        }
        a
    }

    pub fn forward_trace(&self, x: ArrayView2<S>) -> Trace<S> {
        let n = self.layers.len();
        let mut activations = Vec::with_capacity(n + 1);
        activations.push(x.to_owned());
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = activations[i].dot(&l.weight) + &l.bias;
            self.activate(&mut z, i + 1 == n);
            activations.push(z);
        }
        Trace { activations }
    }

    fn activate(&self, z: &mut Array2<S>, last: bool) {
        if !last {
            z.mapv_inplace(|v| v.max(S::zero()));
        } else if self.output == OutputActivation::Tanh {
            z.mapv_inplace(Float::tanh);
        }
    }

    /// Gradients of a scalar loss given `d loss / d output`. Returns parameter
    /// gradients (same layout as the layers) and the gradient w.r.t. the input.
    pub fn backward(&self, trace: &Trace<S>, grad_out: ArrayView2<S>) -> (Vec<Dense<S>>, Array2<S>) {
        let n = self.layers.len();
        let mut delta = grad_out.to_owned();
        if self.output == OutputActivation::Tanh {
            Zip::from(&mut delta)
                .and(trace.output())
                .for_each(|d, &y| *d = *d * (S::one() - y * y));
        }
        let mut grads: Vec<Dense<S>> = Vec::with_capacity(n);
        for i in (0..n).rev() {
            let input = &trace.activations[i];
            grads.push(Dense {
                weight: input.t().dot(&delta),
                bias: delta.sum_axis(Axis(0)),
            });
            let mut prev = delta.dot(&self.layers[i].weight.t());
            if i > 0 {
                Zip::from(&mut prev).and(input).for_each(|d, &a| {
                    if a <= S::zero() {
                        *d = S::zero();
                    }
                });
            }
            delta = prev;
        }
        grads.reverse();
        (grads, delta)
    }

    /// `self <- (1 - tau) self + tau other`.
    pub fn soft_update_from(&mut self, other: &Mlp<S>, tau: S) {
        let keep = S::one() - tau;
        for (t, o) in self.layers.iter_mut().zip(&other.layers) {
            Zip::from(&mut t.weight).and(&o.weight).for_each(|a, &b| *a = keep * *a + tau * b);
            Zip::from(&mut t.bias).and(&o.bias).for_each(|a, &b| *a = keep * *a + tau * b);
        }
    }

    pub fn flat_params(&self) -> Vec<S> {
        self.layers.iter().flat_map(|l| l.params().copied()).collect()
    }

    pub fn set_flat_params(&mut self, values: &[S]) -> Result<(), String> {
        if values.len() != self.param_count() {
            return Err(format!("expected {} parameters, got {}", self.param_count(), values.len()));
        }
        let mut it = values.iter();
        for l in &mut self.layers {
            for p in l.params_mut() {
                *p = *it.next().unwrap();
            }
        }
        Ok(())
    }

    pub fn cast<T: Scalar>(&self) -> Mlp<T> {
        Mlp {
            layers: self
                .layers
                .iter()
                .map(|l| Dense {
                    weight: l.weight.mapv(|v| T::from_f64(v.to_f64().unwrap()).unwrap()),
                    bias: l.bias.mapv(|v| T::from_f64(v.to_f64().unwrap()).unwrap()),
                })
                .collect(),
            output: self.output,
        }
    }
}

/// Largest relative error between backprop and central differences (step `h`)
/// for the loss `sum_ij c_ij y_ij` with fixed non-uniform weights `c`. Covers
/// every parameter and every input entry.
pub fn grad_check(net: &Mlp<f64>, input: ArrayView2<f64>, h: f64) -> f64 {
    let (rows, cols) = (input.nrows(), net.output_dim());
    let c = Array2::from_shape_fn((rows, cols), |(i, j)| 1.0 + 0.37 * i as f64 - 0.23 * j as f64);
    let loss = |n: &Mlp<f64>, x: ArrayView2<f64>| (&n.forward(x) * &c).sum();

    let trace = net.forward_trace(input);
    let (grads, grad_in) = net.backward(&trace, c.view());

    let rel = |a: f64, b: f64| {
        let scale = a.abs().max(b.abs());
        if scale < 1e-10 {
            0.0
        } else {
            (a - b).abs() / scale
        }
    };

    let mut worst: f64 = 0.0;
    let mut probe = net.clone();
    let base = net.flat_params();
    let analytic: Vec<f64> = grads.iter().flat_map(|g| g.params().copied().collect::<Vec<_>>()).collect();
    let mut values = base.clone();
    for i in 0..base.len() {
        values[i] = base[i] + h;
        probe.set_flat_params(&values).unwrap();
        let up = loss(&probe, input);
        values[i] = base[i] - h;
        probe.set_flat_params(&values).unwrap();
        let down = loss(&probe, input);
        values[i] = base[i];
        worst = worst.max(rel(analytic[i], (up - down) / (2.0 * h)));
    }
    let mut x = input.to_owned();
    for idx in 0..x.len() {
        let (r, k) = (idx / x.ncols(), idx % x.ncols());
        let orig = x[[r, k]];
        x[[r, k]] = orig + h;
        let up = loss(net, x.view());
        x[[r, k]] = orig - h;
        let down = loss(net, x.view());
        x[[r, k]] = orig;
        worst = worst.max(rel(grad_in[[r, k]], (up - down) / (2.0 * h)));
    }
    worst
}
