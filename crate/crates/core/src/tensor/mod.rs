//! Dense f32 tensors with reverse-mode differentiation.
//!
//! Eager ops build a graph of `Rc` nodes; [`Tensor::backward`] walks it in
//! reverse topological order and accumulates gradients into each node's grad
//! buffer. Reductions run in a fixed element order (see [`gemm`]), so forward,
//! backward, and optimizer steps are bit-reproducible run to run.

mod gemm;
pub mod ops;
pub mod optim;

pub use optim::{clip_global_norm, AdamState, LrSchedule};

use std::cell::{Ref, RefCell, RefMut};
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TensorError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite input in {0}")]
    NonFiniteInput(&'static str),
    #[error("step {step} outside 0..={total}")]
    StepOutOfRange { step: u64, total: u64 },
}

fn shape_err(msg: impl Into<String>) -> TensorError {
    TensorError::ShapeMismatch(msg.into())
}

static NEXT_ID: AtomicU64 = AtomicU64::new(0);

type BackwardFn = Box<dyn Fn(&[f32])>;

struct Inner {
    id: u64,
    shape: Vec<usize>,
    data: RefCell<Vec<f32>>,
    grad: RefCell<Option<Vec<f32>>>,
    requires_grad: bool,
    parents: Vec<Tensor>,
    backward_fn: Option<BackwardFn>,
}

/// A dense multi-dimensional array of f32, row-major.
#[derive(Clone)]
pub struct Tensor {
    inner: Rc<Inner>,
}

impl std::fmt::Debug for Tensor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.inner.shape)
            .field("requires_grad", &self.inner.requires_grad)
            .finish()
    }
}

pub fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl Tensor {
    fn from_parts(
        shape: Vec<usize>,
        data: Vec<f32>,
        requires_grad: bool,
        parents: Vec<Tensor>,
        backward_fn: Option<BackwardFn>,
    ) -> Self {
        debug_assert_eq!(numel(&shape), data.len());
        Tensor {
            inner: Rc::new(Inner {
                id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
                shape,
                data: RefCell::new(data),
                grad: RefCell::new(None),
                requires_grad,
                parents,
                backward_fn: if requires_grad { backward_fn } else { None },
            }),
        }
    }

    /// Result of an op: requires grad (and keeps the graph) iff any input does.
    pub(crate) fn from_op(
        shape: Vec<usize>,
        data: Vec<f32>,
        parents: Vec<Tensor>,
        backward_fn: BackwardFn,
    ) -> Self {
        let requires = parents.iter().any(Tensor::requires_grad);
        let parents = if requires { parents } else { Vec::new() };
        Self::from_parts(shape, data, requires, parents, Some(backward_fn))
    }

    pub fn from_vec(shape: &[usize], data: Vec<f32>) -> Result<Self, TensorError> {
        if numel(shape) != data.len() {
            return Err(shape_err(format!(
                "{} values cannot fill shape {shape:?}",
                data.len()
            )));
        }
        Ok(Self::from_parts(shape.to_vec(), data, false, Vec::new(), None))
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::from_parts(shape.to_vec(), vec![0.0; numel(shape)], false, Vec::new(), None)
    }

    pub fn scalar(value: f32) -> Self {
        Self::from_parts(vec![], vec![value], false, Vec::new(), None)
    }

    /// Normal(0, std) samples; a trainable parameter if marked afterwards.
    pub fn randn<R: Rng>(shape: &[usize], std: f32, rng: &mut R) -> Self {
        let data = (0..numel(shape))
            .map(|_| {
                let z: f32 = rng.sample(StandardNormal);
                z * std
            })
            .collect();
        Self::from_parts(shape.to_vec(), data, false, Vec::new(), None)
    }

    /// Leaf tensor that accumulates gradients.
    pub fn parameter(shape: &[usize], data: Vec<f32>) -> Result<Self, TensorError> {
        if numel(shape) != data.len() {
            return Err(shape_err(format!(
                "{} values cannot fill shape {shape:?}",
                data.len()
            )));
        }
        Ok(Self::from_parts(shape.to_vec(), data, true, Vec::new(), None))
    }

    pub fn shape(&self) -> &[usize] {
        &self.inner.shape
    }

    pub fn len(&self) -> usize {
        numel(&self.inner.shape)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn requires_grad(&self) -> bool {
        self.inner.requires_grad
    }

    pub fn data(&self) -> Ref<'_, Vec<f32>> {
        self.inner.data.borrow()
    }

    pub fn data_mut(&self) -> RefMut<'_, Vec<f32>> {
        self.inner.data.borrow_mut()
    }

    pub fn to_vec(&self) -> Vec<f32> {
        self.inner.data.borrow().clone()
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> f32 {
        debug_assert_eq!(self.len(), 1);
        self.inner.data.borrow()[0]
    }

    pub fn grad(&self) -> Option<Vec<f32>> {
        self.inner.grad.borrow().clone()
    }

    pub fn clear_grad(&self) {
        *self.inner.grad.borrow_mut() = None;
    }

    /// Mutate the gradient buffer in place (allocated zeros if absent).
    pub fn with_grad_mut<T>(&self, f: impl FnOnce(&mut [f32]) -> T) -> T {
        let mut slot = self.inner.grad.borrow_mut();
        let buf = slot.get_or_insert_with(|| vec![0.0; self.len()]);
        f(buf)
    }

    pub(crate) fn accumulate_grad(&self, contribution: &[f32]) {
        debug_assert_eq!(contribution.len(), self.len());
        self.with_grad_mut(|g| {
            for (gi, &c) in g.iter_mut().zip(contribution) {
                *gi += c;
            }
        });
    }

    pub fn is_finite(&self) -> bool {
        self.inner.data.borrow().iter().all(|v| v.is_finite())
    }

    /// Reverse-mode differentiation from a scalar output. Gradients
    /// accumulate into every reachable tensor with `requires_grad`.
    pub fn backward(&self) -> Result<(), TensorError> {
        if self.len() != 1 {
            return Err(shape_err(format!(
                "backward needs a scalar, got shape {:?}",
                self.shape()
            )));
        }
        if !self.inner.requires_grad {
            return Ok(());
        }
        let order = self.topo_order();
        self.with_grad_mut(|g| g[0] = 1.0);
        for node in order.iter().rev() {
            if let Some(f) = &node.inner.backward_fn {
                let grad = node.inner.grad.borrow();
                if let Some(g) = grad.as_ref() {
                    f(g);
                }
            }
        }
        Ok(())
    }

    /// Post-order DFS over parent edges; reversed it is a topological order
    /// with consumers before producers.
    fn topo_order(&self) -> Vec<Tensor> {
        let mut order: Vec<Tensor> = Vec::new();
        let mut visited: std::collections::HashSet<u64> = std::collections::HashSet::new();
        // (node, next child index)
        let mut stack: Vec<(Tensor, usize)> = Vec::new();
        if visited.insert(self.inner.id) {
            stack.push((self.clone(), 0));
        }
        while let Some((node, idx)) = stack.pop() {
            if idx < node.inner.parents.len() {
                let parent = node.inner.parents[idx].clone();
                stack.push((node, idx + 1));
                if parent.inner.requires_grad && visited.insert(parent.inner.id) {
                    stack.push((parent, 0));
                }
            } else {
                order.push(node);
            }
        }
        order
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_graph_backward() {
        // y = (a*b + a) ; dy/da = b + 1, dy/db = a
        let a = Tensor::parameter(&[], vec![3.0]).unwrap();
        let b = Tensor::parameter(&[], vec![5.0]).unwrap();
        let prod = ops::mul(&a, &b).unwrap();
        let y = ops::add(&prod, &a).unwrap();
        assert_eq!(y.item(), 18.0);
        y.backward().unwrap();
        assert_eq!(a.grad().unwrap(), vec![6.0]);
        assert_eq!(b.grad().unwrap(), vec![3.0]);
    }

    #[test]
    fn backward_requires_scalar() {
        let a = Tensor::parameter(&[2], vec![1.0, 2.0]).unwrap();
        assert!(a.backward().is_err());
    }

    #[test]
    fn no_graph_without_requires_grad() {
        let a = Tensor::from_vec(&[2], vec![1.0, 2.0]).unwrap();
        let b = Tensor::from_vec(&[2], vec![3.0, 4.0]).unwrap();
        let c = ops::add(&a, &b).unwrap();
        assert!(!c.requires_grad());
        assert!(c.inner.parents.is_empty());
    }

    #[test]
    fn grad_accumulates_across_uses() {
        // y = a + a ; dy/da = 2
        let a = Tensor::parameter(&[], vec![1.5]).unwrap();
        let y = ops::add(&a, &a).unwrap();
        y.backward().unwrap();
        assert_eq!(a.grad().unwrap(), vec![2.0]);
    }
}
