//! Learnable parameters and the visitor used by optimizers and checkpoints.

use ndarray::{ArrayD, ArrayViewD};

use crate::elem::Elem;

/// Forward-pass mode. Training mode records caches for backprop and uses
/// batch statistics in normalization layers; eval mode is stateless and
/// deterministic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// A named tensor with an optional gradient buffer.
///
/// Frozen tensors (`trainable == false`) never allocate a gradient; layers
/// skip the corresponding backward GEMMs entirely. Buffers are persistent
/// non-learnable state (e.g. normalization running statistics): saved in
/// checkpoints, never optimized, excluded from parameter counts.
#[derive(Debug, Clone)]
pub struct Param<T> {
    name: String,
    pub value: ArrayD<T>,
    pub grad: Option<ArrayD<T>>,
    pub trainable: bool,
    pub buffer: bool,
}

impl<T: Elem> Param<T> {
    pub fn new(name: impl Into<String>, value: ArrayD<T>, trainable: bool) -> Self {
        Param {
            name: name.into(),
            value,
            grad: None,
            trainable,
            buffer: false,
        }
    }

    pub fn new_buffer(name: impl Into<String>, value: ArrayD<T>) -> Self {
        Param {
            name: name.into(),
            value,
            grad: None,
            trainable: false,
            buffer: true,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn count(&self) -> usize {
        self.value.len()
    }

    /// Accumulate a gradient contribution. No-op for frozen parameters.
    /// Contributions may arrive in any layout with the value's element
    /// count (layers often produce flattened views); the stored gradient
    /// always has the value's shape.
    pub fn add_grad(&mut self, g: ArrayViewD<'_, T>) {
        if !self.trainable {
            return;
        }
        let g = g
            .to_shape((self.value.raw_dim(), ndarray::Order::RowMajor))
            .expect("gradient element count must match the parameter");
        match &mut self.grad {
            Some(buf) => *buf += &g,
            None => self.grad = Some(g.to_owned()),
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad = None;
    }
}

/// Uniform access to a model's parameters, in a fixed deterministic order.
pub trait ParamSet<T: Elem> {
    fn params(&self) -> Vec<&Param<T>>;
    fn params_mut(&mut self) -> Vec<&mut Param<T>>;

    /// Learnable-tensor element count (buffers excluded).
    fn param_count(&self) -> usize {
        self.params()
            .iter()
            .filter(|p| !p.buffer)
            .map(|p| p.count())
            .sum()
    }

    fn trainable_param_count(&self) -> usize {
        self.params()
            .iter()
            .filter(|p| p.trainable && !p.buffer)
            .map(|p| p.count())
            .sum()
    }

    fn zero_grads(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }
}
