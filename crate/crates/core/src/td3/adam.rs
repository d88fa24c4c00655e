use ndarray::Zip;

use super::mlp::{Dense, Mlp, Scalar};

/// Adam with bias-corrected moments, one state per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<S> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<Dense<S>>,
    v: Vec<Dense<S>>,
}

impl<S: Scalar> Adam<S> {
    pub fn new(net: &Mlp<S>, lr: f64) -> Self {
        let zeros: Vec<Dense<S>> = net.layers().iter().map(Dense::zeros_like).collect();
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn moments(&self) -> (&[Dense<S>], &[Dense<S>]) {
        (&self.m, &self.v)
    }

    /// Restores saved state; shapes must match the network the optimizer was
    /// built for.
    pub fn set_state(&mut self, t: u64, m: Vec<Dense<S>>, v: Vec<Dense<S>>) -> Result<(), String> {
        let same = |a: &[Dense<S>], b: &[Dense<S>]| {
            a.len() == b.len()
                && a.iter().zip(b).all(|(x, y)| x.weight.dim() == y.weight.dim() && x.bias.dim() == y.bias.dim())
        };
        if !same(&m, &self.m) || !same(&v, &self.v) {
            return Err("optimizer moment shapes do not match the network".into());
        }
        self.t = t;
        self.m = m;
        self.v = v;
        Ok(())
    }

    pub fn step(&mut self, net: &mut Mlp<S>, grads: &[Dense<S>]) {
        assert_eq!(grads.len(), self.m.len(), "gradient/layer count mismatch");
        self.t += 1;
        let t = self.t as i32;
        let b1 = S::from_f64(self.beta1).unwrap();
        let b2 = S::from_f64(self.beta2).unwrap();
        let c1 = S::from_f64(1.0 - self.beta1.powi(t)).unwrap();
        let c2 = S::from_f64(1.0 - self.beta2.powi(t)).unwrap();
        let lr = S::from_f64(self.lr).unwrap();
        let eps = S::from_f64(self.eps).unwrap();
        let one = S::one();
        let upd = |p: &mut S, m: &mut S, v: &mut S, g: S| {
            *m = b1 * *m + (one - b1) * g;
            *v = b2 * *v + (one - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p = *p - lr * m_hat / (v_hat.sqrt() + eps);
        };
        for (((layer, g), m), v) in net.layers_mut().iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            Zip::from(&mut layer.weight)
                .and(&mut m.weight)
                .and(&mut v.weight)
                .and(&g.weight)
                .for_each(|p, m, v, &g| upd(p, m, v, g));
            Zip::from(&mut layer.bias)
                .and(&mut m.bias)
                .and(&mut v.bias)
                .and(&g.bias)
                .for_each(|p, m, v, &g| upd(p, m, v, g));
        }
    }
}
