//! First-order optimizers over a network's flat parameter arrays. All state
//! lives in the same (layer, array) order as [`crate::net::LayerParams`],
//! which is also the order checkpoints persist.

use crate::error::{Error, Result};
use crate::net::{LayerGrads, Network};
use crate::num::Real;
use serde::{Deserialize, Serialize};

/// Optimizer choice and hyperparameters; serialized into checkpoints so a
/// resumed run continues with the same rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerConfig {
    Sgd { lr: f64 },
    /// Running mean-square scaling with a hyperbolic learning-rate decay:
    /// the rate at update t (counting from 0) is lr / (1 + decay * t).
    RmsProp { lr: f64, rho: f64, eps: f64, decay: f64 },
    Adam { lr: f64, beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerConfig {
    pub fn sgd(lr: f64) -> Self {
        OptimizerConfig::Sgd { lr }
    }

    /// The classification recipe: rho 0.9, eps 1e-8, decay 1e-6.
    pub fn rmsprop(lr: f64) -> Self {
        OptimizerConfig::RmsProp { lr, rho: 0.9, eps: 1e-8, decay: 1e-6 }
    }

    /// The reconstruction recipe: beta 0.9/0.999, eps 1e-8.
    pub fn adam(lr: f64) -> Self {
        OptimizerConfig::Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    /// How many moment buffers each parameter array needs.
    pub fn buffers_per_array(&self) -> usize {
        match self {
            OptimizerConfig::Sgd { .. } => 0,
            OptimizerConfig::RmsProp { .. } => 1,
            OptimizerConfig::Adam { .. } => 2,
        }
    }

    pub fn learning_rate(&self) -> f64 {
        match *self {
            OptimizerConfig::Sgd { lr }
            | OptimizerConfig::RmsProp { lr, .. }
            | OptimizerConfig::Adam { lr, .. } => lr,
        }
    }
}

/// Optimizer state bound to one network's parameter layout.
pub struct Optimizer<F> {
    config: OptimizerConfig,
    step: u64,
    /// Per layer, per parameter array: the moment buffers.
    state: Vec<Vec<Vec<Vec<F>>>>,
}

impl<F: Real> Optimizer<F> {
    pub fn new(config: OptimizerConfig, net: &Network<F>) -> Self {
        let per = config.buffers_per_array();
        let state = net
            .layer_params()
            .iter()
            .map(|p| {
                p.arrays()
                    .iter()
                    .map(|a| (0..per).map(|_| vec![F::zero(); a.len()]).collect())
                    .collect()
            })
            .collect();
        Optimizer { config, step: 0, state }
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    /// Number of parameter updates applied so far.
    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Moment buffers flattened in the frozen (layer, array, buffer) order.
    pub fn buffers(&self) -> Vec<&Vec<F>> {
        self.state.iter().flatten().flatten().collect()
    }

    /// Rebuild from persisted state. `buffers` must be in the same flat
    /// order [`Optimizer::buffers`] produces for this config and network.
    pub fn from_state(
        config: OptimizerConfig,
        net: &Network<F>,
        step: u64,
        buffers: Vec<Vec<F>>,
    ) -> Result<Self> {
        let mut opt = Self::new(config, net);
        opt.step = step;
        let slots: Vec<&mut Vec<F>> = opt.state.iter_mut().flatten().flatten().collect();
        if slots.len() != buffers.len() {
            return Err(Error::invalid(format!(
                "optimizer state holds {} buffers, expected {}",
                buffers.len(),
                slots.len()
            )));
        }
        for (slot, buf) in slots.into_iter().zip(buffers) {
            if slot.len() != buf.len() {
                return Err(Error::invalid(format!(
                    "optimizer buffer length {} does not match parameter array {}",
                    buf.len(),
                    slot.len()
                )));
            }
            *slot = buf;
        }
        Ok(opt)
    }

    /// Apply one update from gradients shaped like the network's parameter
    /// arrays, then drop the network's rotation caches.
    pub fn apply(&mut self, net: &mut Network<F>, grads: &[LayerGrads<F>]) -> Result<()> {
        if grads.len() != net.layer_params().len() {
            return Err(Error::shape(format!(
                "gradients for {} layers, network has {}",
                grads.len(),
                net.layer_params().len()
            )));
        }
        let config = self.config;
        let t1 = self.step + 1; // 1-based, for bias correction
        for (li, layer_grads) in grads.iter().enumerate() {
            let mut arrays = net.layer_params_mut()[li].arrays_mut();
            if layer_grads.len() != arrays.len() {
                return Err(Error::shape(format!(
                    "layer {li}: {} gradient arrays for {} parameter arrays",
                    layer_grads.len(),
                    arrays.len()
                )));
            }
            for (ai, g) in layer_grads.iter().enumerate() {
                let p = &mut arrays[ai];
                if g.len() != p.len() {
                    return Err(Error::shape(format!(
                        "layer {li} array {ai}: gradient length {} vs {}",
                        g.len(),
                        p.len()
                    )));
                }
                let bufs = &mut self.state[li][ai];
                match config {
                    OptimizerConfig::Sgd { lr } => {
                        let lr = F::from_f64(lr);
                        for (pv, &gv) in p.iter_mut().zip(g) {
                            *pv -= lr * gv;
                        }
                    }
                    OptimizerConfig::RmsProp { lr, rho, eps, decay } => {
                        let lr_t = F::from_f64(lr / (1.0 + decay * self.step as f64));
                        let rho = F::from_f64(rho);
                        let one_minus = F::one() - rho;
                        let eps = F::from_f64(eps);
                        let v = &mut bufs[0];
                        for ((pv, &gv), vv) in p.iter_mut().zip(g).zip(v.iter_mut()) {
                            *vv = rho * *vv + one_minus * gv * gv;
                            *pv -= lr_t * gv / (vv.sqrt() + eps);
                        }
                    }
                    OptimizerConfig::Adam { lr, beta1, beta2, eps } => {
                        let lr = F::from_f64(lr);
                        let b1 = F::from_f64(beta1);
                        let b2 = F::from_f64(beta2);
                        let eps = F::from_f64(eps);
                        let c1 = F::from_f64(1.0 - beta1.powi(t1 as i32));
                        let c2 = F::from_f64(1.0 - beta2.powi(t1 as i32));
                        let (m, v) = bufs.split_at_mut(1);
                        let (m, v) = (&mut m[0], &mut v[0]);
                        for (((pv, &gv), mv), vv) in
                            p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut())
                        {
                            *mv = b1 * *mv + (F::one() - b1) * gv;
                            *vv = b2 * *vv + (F::one() - b2) * gv * gv;
                            let mhat = *mv / c1;
                            let vhat = *vv / c2;
                            *pv -= lr * mhat / (vhat.sqrt() + eps);
                        }
                    }
                }
            }
        }
        self.step += 1;
        net.invalidate_caches();
        Ok(())
    }
}
