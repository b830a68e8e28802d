use std::ops::{Add, Div, Mul, Neg, Sub};

use ndarray::{ArrayD, Axis, Ix2, IxDyn, Slice, Zip};

use crate::tensor::{standard, Tensor};

/// Numpy-style broadcast of two shapes.
pub(crate) fn broadcast_shape(a: &[usize], b: &[usize]) -> Option<Vec<usize>> {
    let n = a.len().max(b.len());
    let mut out = vec![0; n];
    for i in 0..n {
        let da = if i + a.len() >= n { a[i + a.len() - n] } else { 1 };
        let db = if i + b.len() >= n { b[i + b.len() - n] } else { 1 };
        out[i] = match (da, db) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            _ => return None,
        };
    }
    Some(out)
}

fn binary_data(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> ArrayD<f64> {
    if a.shape() == b.shape() {
        return Zip::from(a.data()).and(b.data()).map_collect(|&x, &y| f(x, y));
    }
    let shape = broadcast_shape(a.shape(), b.shape())
        .unwrap_or_else(|| panic!("cannot broadcast shapes {:?} and {:?}", a.shape(), b.shape()));
    let av = a.data().broadcast(IxDyn(&shape)).expect("broadcast lhs");
    let bv = b.data().broadcast(IxDyn(&shape)).expect("broadcast rhs");
    Zip::from(&av).and(&bv).map_collect(|&x, &y| f(x, y))
}

fn unary(
    x: &Tensor,
    name: &'static str,
    f: impl Fn(f64) -> f64,
    backward: impl Fn(&Tensor, &Tensor, &Tensor) -> Tensor + Send + Sync + 'static,
) -> Tensor {
    let data = x.data().mapv(f);
    let input = x.clone();
    Tensor::from_op(
        data,
        name,
        vec![x.clone()],
        Box::new(move |g, out, _| vec![Some(backward(g, &input, out))]),
    )
}

fn signum_zero(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl Tensor {
    // ---- elementwise binary -------------------------------------------------

    pub fn add(&self, other: &Tensor) -> Tensor {
        let data = binary_data(self, other, |x, y| x + y);
        let (sa, sb) = (self.shape().to_vec(), other.shape().to_vec());
        Tensor::from_op(
            data,
            "add",
            vec![self.clone(), other.clone()],
            Box::new(move |g, _, needs| vec![needs[0].then(|| g.sum_to(&sa)), needs[1].then(|| g.sum_to(&sb))]),
        )
    }

    pub fn sub(&self, other: &Tensor) -> Tensor {
        let data = binary_data(self, other, |x, y| x - y);
        let (sa, sb) = (self.shape().to_vec(), other.shape().to_vec());
        Tensor::from_op(
            data,
            "sub",
            vec![self.clone(), other.clone()],
            Box::new(move |g, _, needs| vec![needs[0].then(|| g.sum_to(&sa)), needs[1].then(|| g.neg().sum_to(&sb))]),
        )
    }

    pub fn mul(&self, other: &Tensor) -> Tensor {
        let data = binary_data(self, other, |x, y| x * y);
        let (a, b) = (self.clone(), other.clone());
        Tensor::from_op(
            data,
            "mul",
            vec![self.clone(), other.clone()],
            Box::new(move |g, _, needs| {
                vec![
                    needs[0].then(|| g.mul(&b).sum_to(a.shape())),
                    needs[1].then(|| g.mul(&a).sum_to(b.shape())),
                ]
            }),
        )
    }

    pub fn div(&self, other: &Tensor) -> Tensor {
        let data = binary_data(self, other, |x, y| x / y);
        let (a, b) = (self.clone(), other.clone());
        Tensor::from_op(
            data,
            "div",
            vec![self.clone(), other.clone()],
            Box::new(move |g, _, needs| {
                vec![
                    needs[0].then(|| g.div(&b).sum_to(a.shape())),
                    needs[1].then(|| g.mul(&a).div(&b.square()).neg().sum_to(b.shape())),
                ]
            }),
        )
    }

    // ---- scalar and unary ---------------------------------------------------

    pub fn neg(&self) -> Tensor {
        unary(self, "neg", |v| -v, |g, _, _| g.neg())
    }

    pub fn add_scalar(&self, s: f64) -> Tensor {
        unary(self, "add_scalar", move |v| v + s, |g, _, _| g.clone())
    }

    pub fn mul_scalar(&self, s: f64) -> Tensor {
        unary(self, "mul_scalar", move |v| v * s, move |g, _, _| g.mul_scalar(s))
    }

    pub fn square(&self) -> Tensor {
        unary(self, "square", |v| v * v, |g, x, _| g.mul(x).mul_scalar(2.0))
    }

    pub fn exp(&self) -> Tensor {
        unary(self, "exp", f64::exp, |g, _, out| g.mul(out))
    }

    pub fn ln(&self) -> Tensor {
        unary(self, "ln", f64::ln, |g, x, _| g.div(x))
    }

    pub fn tanh(&self) -> Tensor {
        unary(self, "tanh", f64::tanh, |g, _, out| {
            g.mul(&out.square().neg().add_scalar(1.0))
        })
    }

    pub fn sin(&self) -> Tensor {
        unary(self, "sin", f64::sin, |g, x, _| g.mul(&x.cos()))
    }

    pub fn cos(&self) -> Tensor {
        unary(self, "cos", f64::cos, |g, x, _| g.mul(&x.sin()).neg())
    }

    /// Square root. The derivative at exactly zero is taken to be zero.
    pub fn sqrt(&self) -> Tensor {
        unary(self, "sqrt", f64::sqrt, |g, _, out| {
            g.mul(&out.safe_recip()).mul_scalar(0.5)
        })
    }

    /// `1/x`, with `1/0` defined as 0.
    pub fn safe_recip(&self) -> Tensor {
        unary(
            self,
            "safe_recip",
            |v| if v == 0.0 { 0.0 } else { 1.0 / v },
            |g, x, _| g.mul(&x.safe_recip().square()).neg(),
        )
    }

    pub fn abs(&self) -> Tensor {
        unary(self, "abs", f64::abs, |g, x, _| {
            g.mul(&Tensor::new(x.data().mapv(signum_zero)))
        })
    }

    pub fn relu(&self) -> Tensor {
        self.leaky_relu(0.0)
    }

    pub fn leaky_relu(&self, slope: f64) -> Tensor {
        unary(
            self,
            "leaky_relu",
            move |v| if v > 0.0 { v } else { slope * v },
            move |g, x, _| g.mul(&Tensor::new(x.data().mapv(|v| if v > 0.0 { 1.0 } else { slope }))),
        )
    }

    // ---- reductions ---------------------------------------------------------

    pub fn sum(&self) -> Tensor {
        let data = ArrayD::from_elem(IxDyn(&[]), self.data().sum());
        let shape = self.shape().to_vec();
        Tensor::from_op(
            data,
            "sum",
            vec![self.clone()],
            Box::new(move |g, _, _| vec![Some(g.broadcast_to(&shape))]),
        )
    }

    pub fn mean(&self) -> Tensor {
        let n = self.numel().max(1) as f64;
        self.sum().mul_scalar(1.0 / n)
    }

    /// Sums over `axes`, keeping them as size-one dimensions when `keepdim`.
    pub fn sum_axes(&self, axes: &[usize], keepdim: bool) -> Tensor {
        let shape = self.shape().to_vec();
        let mut sorted = axes.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let mut data = self.data().clone();
        for &ax in sorted.iter().rev() {
            assert!(ax < shape.len(), "sum_axes: axis {ax} out of range");
            data = data.sum_axis(Axis(ax)).insert_axis(Axis(ax));
        }
        let kept_shape: Vec<usize> = data.shape().to_vec();
        let out_shape: Vec<usize> = if keepdim {
            kept_shape.clone()
        } else {
            shape
                .iter()
                .enumerate()
                .filter(|(i, _)| !sorted.contains(i))
                .map(|(_, &d)| d)
                .collect()
        };
        let data = data.into_shape_with_order(IxDyn(&out_shape)).expect("sum_axes reshape");
        Tensor::from_op(
            data,
            "sum_axes",
            vec![self.clone()],
            Box::new(move |g, _, _| vec![Some(g.reshape(&kept_shape).broadcast_to(&shape))]),
        )
    }

    pub fn mean_axes(&self, axes: &[usize], keepdim: bool) -> Tensor {
        let count: usize = axes.iter().map(|&a| self.shape()[a]).product();
        self.sum_axes(axes, keepdim).mul_scalar(1.0 / count.max(1) as f64)
    }

    /// Row-wise maximum over `axis` (kept as size one). Not differentiable:
    /// the result is a constant, intended for numerically stable shifts.
    pub fn max_axis_detached(&self, axis: usize) -> Tensor {
        let data = self
            .data()
            .fold_axis(Axis(axis), f64::NEG_INFINITY, |&acc, &v| acc.max(v))
            .insert_axis(Axis(axis));
        Tensor::new(data)
    }

    /// Log-softmax along `axis`.
    pub fn log_softmax(&self, axis: usize) -> Tensor {
        let shifted = self.sub(&self.max_axis_detached(axis));
        let lse = shifted.exp().sum_axes(&[axis], true).ln();
        shifted.sub(&lse)
    }

    // ---- shape --------------------------------------------------------------

    pub fn reshape(&self, shape: &[usize]) -> Tensor {
        let orig = self.shape().to_vec();
        let data = self
            .data()
            .clone()
            .into_shape_with_order(IxDyn(shape))
            .unwrap_or_else(|e| panic!("reshape {orig:?} -> {shape:?}: {e}"));
        Tensor::from_op(
            data,
            "reshape",
            vec![self.clone()],
            Box::new(move |g, _, _| vec![Some(g.reshape(&orig))]),
        )
    }

    pub fn permute(&self, axes: &[usize]) -> Tensor {
        let data = standard(self.data().clone().permuted_axes(IxDyn(axes)));
        let mut inverse = vec![0; axes.len()];
        for (i, &a) in axes.iter().enumerate() {
            inverse[a] = i;
        }
        Tensor::from_op(
            data,
            "permute",
            vec![self.clone()],
            Box::new(move |g, _, _| vec![Some(g.permute(&inverse))]),
        )
    }

    /// Transpose of a 2-D tensor.
    pub fn t(&self) -> Tensor {
        assert_eq!(self.ndim(), 2, "t() needs a matrix");
        self.permute(&[1, 0])
    }

    pub fn broadcast_to(&self, shape: &[usize]) -> Tensor {
        if self.shape() == shape {
            return self.clone();
        }
        let orig = self.shape().to_vec();
        let data = self
            .data()
            .broadcast(IxDyn(shape))
            .unwrap_or_else(|| panic!("cannot broadcast {orig:?} to {shape:?}"))
            .to_owned();
        Tensor::from_op(
            data,
            "broadcast_to",
            vec![self.clone()],
            Box::new(move |g, _, _| vec![Some(g.sum_to(&orig))]),
        )
    }

    /// Sums a broadcast result back down to `shape` (adjoint of `broadcast_to`).
    pub fn sum_to(&self, shape: &[usize]) -> Tensor {
        if self.shape() == shape {
            return self.clone();
        }
        let orig = self.shape().to_vec();
        assert!(orig.len() >= shape.len(), "sum_to: {orig:?} -> {shape:?}");
        let lead = orig.len() - shape.len();
        let mut data = self.data().clone();
        for ax in (0..orig.len()).rev() {
            let reduce = ax < lead || (shape[ax - lead] == 1 && orig[ax] != 1);
            if reduce {
                data = data.sum_axis(Axis(ax));
                if ax >= lead {
                    data = data.insert_axis(Axis(ax));
                }
            } else if ax >= lead {
                assert_eq!(orig[ax], shape[ax - lead], "sum_to: {orig:?} -> {shape:?}");
            }
        }
        let target = shape.to_vec();
        Tensor::from_op(
            data,
            "sum_to",
            vec![self.clone()],
            Box::new(move |g, _, _| vec![Some(g.broadcast_to(&orig))]),
        )
        .reshape_if_needed(&target)
    }

    fn reshape_if_needed(self, shape: &[usize]) -> Tensor {
        if self.shape() == shape {
            self
        } else {
            self.reshape(shape)
        }
    }

    /// Slice `len` entries starting at `start` along `axis`.
    pub fn narrow(&self, axis: usize, start: usize, len: usize) -> Tensor {
        let total = self.shape()[axis];
        assert!(start + len <= total, "narrow out of range");
        let data = self
            .data()
            .slice_axis(Axis(axis), Slice::from(start..start + len))
            .to_owned();
        Tensor::from_op(
            data,
            "narrow",
            vec![self.clone()],
            Box::new(move |g, _, _| vec![Some(g.pad_axis(axis, start, total - start - len))]),
        )
    }

    /// Zero-pads along `axis` (adjoint of `narrow`).
    pub fn pad_axis(&self, axis: usize, before: usize, after: usize) -> Tensor {
        let mut shape = self.shape().to_vec();
        let len = shape[axis];
        shape[axis] = before + len + after;
        let mut data = ArrayD::zeros(IxDyn(&shape));
        data.slice_axis_mut(Axis(axis), Slice::from(before..before + len))
            .assign(self.data());
        Tensor::from_op(
            data,
            "pad_axis",
            vec![self.clone()],
            Box::new(move |g, _, _| vec![Some(g.narrow(axis, before, len))]),
        )
    }

    pub fn concat(tensors: &[Tensor], axis: usize) -> Tensor {
        assert!(!tensors.is_empty(), "concat of nothing");
        let views: Vec<_> = tensors.iter().map(|t| t.data().view()).collect();
        let data = ndarray::concatenate(Axis(axis), &views).expect("concat shapes");
        let lens: Vec<usize> = tensors.iter().map(|t| t.shape()[axis]).collect();
        Tensor::from_op(
            data,
            "concat",
            tensors.to_vec(),
            Box::new(move |g, _, needs| {
                let mut offset = 0;
                lens.iter()
                    .zip(needs)
                    .map(|(&len, &need)| {
                        let piece = need.then(|| g.narrow(axis, offset, len));
                        offset += len;
                        piece
                    })
                    .collect()
            }),
        )
    }

    // ---- linear algebra -----------------------------------------------------

    /// Matrix product of two 2-D tensors.
    pub fn matmul(&self, other: &Tensor) -> Tensor {
        let a = self
            .data()
            .view()
            .into_dimensionality::<Ix2>()
            .expect("matmul lhs must be 2-D");
        let b = other
            .data()
            .view()
            .into_dimensionality::<Ix2>()
            .expect("matmul rhs must be 2-D");
        assert_eq!(a.ncols(), b.nrows(), "matmul: {:?} x {:?}", self.shape(), other.shape());
        let data = a.dot(&b).into_dyn();
        let (lhs, rhs) = (self.clone(), other.clone());
        Tensor::from_op(
            data,
            "matmul",
            vec![self.clone(), other.clone()],
            Box::new(move |g, _, needs| {
                vec![
                    needs[0].then(|| g.matmul(&rhs.t())),
                    needs[1].then(|| lhs.t().matmul(g)),
                ]
            }),
        )
    }
}

macro_rules! binary_operator {
    ($trait:ident, $method:ident) => {
        impl $trait<&Tensor> for &Tensor {
            type Output = Tensor;
            fn $method(self, rhs: &Tensor) -> Tensor {
                Tensor::$method(self, rhs)
            }
        }
        impl $trait<Tensor> for Tensor {
            type Output = Tensor;
            fn $method(self, rhs: Tensor) -> Tensor {
                Tensor::$method(&self, &rhs)
            }
        }
        impl $trait<&Tensor> for Tensor {
            type Output = Tensor;
            fn $method(self, rhs: &Tensor) -> Tensor {
                Tensor::$method(&self, rhs)
            }
        }
    };
}

binary_operator!(Add, add);
binary_operator!(Sub, sub);
binary_operator!(Mul, mul);
binary_operator!(Div, div);

impl Mul<f64> for &Tensor {
    type Output = Tensor;
    fn mul(self, rhs: f64) -> Tensor {
        self.mul_scalar(rhs)
    }
}

impl Mul<f64> for Tensor {
    type Output = Tensor;
    fn mul(self, rhs: f64) -> Tensor {
        self.mul_scalar(rhs)
    }
}

impl Neg for &Tensor {
    type Output = Tensor;
    fn neg(self) -> Tensor {
        Tensor::neg(self)
    }
}

impl Neg for Tensor {
    type Output = Tensor;
    fn neg(self) -> Tensor {
        Tensor::neg(&self)
    }
}
