use std::cell::Cell;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use ndarray::{ArrayD, IxDyn};

static NEXT_ID: AtomicU64 = AtomicU64::new(0);

thread_local! {
    static GRAD_ENABLED: Cell<bool> = const { Cell::new(true) };
}

/// Returns whether operations on the current thread record a graph.
pub fn is_grad_enabled() -> bool {
    GRAD_ENABLED.with(|g| g.get())
}

pub(crate) struct GradModeGuard {
    prev: bool,
}

impl GradModeGuard {
    pub(crate) fn set(enabled: bool) -> Self {
        let prev = GRAD_ENABLED.with(|g| g.replace(enabled));
        GradModeGuard { prev }
    }
}

impl Drop for GradModeGuard {
    fn drop(&mut self) {
        GRAD_ENABLED.with(|g| g.set(self.prev));
    }
}

/// Runs `f` without recording any graph on the current thread.
pub fn no_grad<R>(f: impl FnOnce() -> R) -> R {
    let _guard = GradModeGuard::set(false);
    f()
}

/// Backward rule: `(grad_output, output, needs_grad_per_parent) -> grad per parent`.
pub(crate) type BackwardFn = Box<dyn Fn(&Tensor, &Tensor, &[bool]) -> Vec<Option<Tensor>> + Send + Sync>;

pub(crate) struct GradFn {
    pub(crate) name: &'static str,
    pub(crate) parents: Vec<Tensor>,
    pub(crate) backward: BackwardFn,
}

pub(crate) struct Node {
    pub(crate) id: u64,
    pub(crate) data: ArrayD<f64>,
    pub(crate) requires_grad: bool,
    pub(crate) grad_fn: Option<GradFn>,
}

/// An immutable n-dimensional array of `f64` that may carry a gradient graph.
///
/// Cloning is cheap (reference counted). Data is always kept in standard
/// (row-major, contiguous) layout.
#[derive(Clone)]
pub struct Tensor(pub(crate) Arc<Node>);

pub(crate) fn standard(a: ArrayD<f64>) -> ArrayD<f64> {
    if a.is_standard_layout() {
        a
    } else {
        a.as_standard_layout().into_owned()
    }
}

impl Tensor {
    fn with_node(data: ArrayD<f64>, requires_grad: bool, grad_fn: Option<GradFn>) -> Tensor {
        Tensor(Arc::new(Node {
            id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
            data: standard(data),
            requires_grad,
            grad_fn,
        }))
    }

    /// A constant tensor (no gradient tracking).
    pub fn new(data: ArrayD<f64>) -> Tensor {
        Tensor::with_node(data, false, None)
    }

    /// A leaf tensor that gradients can be taken with respect to.
    pub fn parameter(data: ArrayD<f64>) -> Tensor {
        Tensor::with_node(data, true, None)
    }

    pub fn from_vec(shape: &[usize], values: Vec<f64>) -> Tensor {
        let data = ArrayD::from_shape_vec(IxDyn(shape), values)
            .unwrap_or_else(|e| panic!("from_vec: shape {shape:?} does not fit data: {e}"));
        Tensor::new(data)
    }

    pub fn scalar(value: f64) -> Tensor {
        Tensor::new(ArrayD::from_elem(IxDyn(&[]), value))
    }

    pub fn zeros(shape: &[usize]) -> Tensor {
        Tensor::new(ArrayD::zeros(IxDyn(shape)))
    }

    pub fn ones(shape: &[usize]) -> Tensor {
        Tensor::full(shape, 1.0)
    }

    pub fn full(shape: &[usize], value: f64) -> Tensor {
        Tensor::new(ArrayD::from_elem(IxDyn(shape), value))
    }

    /// Row-wise one-hot matrix of shape `(indices.len(), classes)`.
    pub fn one_hot(indices: &[usize], classes: usize) -> Tensor {
        let mut data = ArrayD::zeros(IxDyn(&[indices.len(), classes]));
        for (row, &idx) in indices.iter().enumerate() {
            assert!(idx < classes, "one_hot: index {idx} out of range {classes}");
            data[[row, idx]] = 1.0;
        }
        Tensor::new(data)
    }

    /// Builds the result of an operation, recording a graph node when any
    /// parent requires a gradient and recording is enabled.
    pub(crate) fn from_op(data: ArrayD<f64>, name: &'static str, parents: Vec<Tensor>, backward: BackwardFn) -> Tensor {
        if is_grad_enabled() && parents.iter().any(Tensor::requires_grad) {
            Tensor::with_node(
                data,
                true,
                Some(GradFn {
                    name,
                    parents,
                    backward,
                }),
            )
        } else {
            Tensor::new(data)
        }
    }

    pub fn id(&self) -> u64 {
        self.0.id
    }

    pub fn data(&self) -> &ArrayD<f64> {
        &self.0.data
    }

    /// Raw row-major values.
    pub fn values(&self) -> &[f64] {
        self.0.data.as_slice().expect("tensor data is kept in standard layout")
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.values().to_vec()
    }

    pub fn shape(&self) -> &[usize] {
        self.0.data.shape()
    }

    pub fn ndim(&self) -> usize {
        self.0.data.ndim()
    }

    pub fn numel(&self) -> usize {
        self.0.data.len()
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> f64 {
        assert_eq!(self.numel(), 1, "item() on tensor of shape {:?}", self.shape());
        self.values()[0]
    }

    pub fn requires_grad(&self) -> bool {
        self.0.requires_grad
    }

    pub fn is_leaf(&self) -> bool {
        self.0.grad_fn.is_none()
    }

    /// Name of the operation that produced this tensor, if any.
    pub fn op_name(&self) -> Option<&'static str> {
        self.0.grad_fn.as_ref().map(|g| g.name)
    }

    /// A constant copy that is cut off from the graph.
    pub fn detach(&self) -> Tensor {
        Tensor::new(self.0.data.clone())
    }

    pub fn all_finite(&self) -> bool {
        self.values().iter().all(|v| v.is_finite())
    }
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.shape())
            .field("requires_grad", &self.requires_grad())
            .field("op", &self.op_name())
            .finish()
    }
}
