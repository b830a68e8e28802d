use ndarray::{ArrayD, IxDyn};

use crate::tensor::Tensor;

/// Geometry of a square-kernel 2-D convolution over an NCHW input.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub batch: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvGeometry {
    pub fn out_height(&self) -> usize {
        (self.height + 2 * self.padding - self.kernel) / self.stride + 1
    }

    pub fn out_width(&self) -> usize {
        (self.width + 2 * self.padding - self.kernel) / self.stride + 1
    }

    fn input_shape(&self) -> [usize; 4] {
        [self.batch, self.channels, self.height, self.width]
    }

    /// Shape of the unfolded column matrix: `(C*k*k, B*Ho*Wo)`.
    fn cols_shape(&self) -> [usize; 2] {
        [
            self.channels * self.kernel * self.kernel,
            self.batch * self.out_height() * self.out_width(),
        ]
    }

    /// Visits every (column index, input index) pair; input index is `None`
    /// where the kernel falls on padding.
    #[inline]
    fn for_each_tap(&self, mut f: impl FnMut(usize, Option<usize>)) {
        let (k, s, p) = (self.kernel, self.stride, self.padding as isize);
        let (ho, wo) = (self.out_height(), self.out_width());
        let (h, w) = (self.height as isize, self.width as isize);
        let ncols = self.batch * ho * wo;
        for c in 0..self.channels {
            for ki in 0..k {
                for kj in 0..k {
                    let row = (c * k + ki) * k + kj;
                    let row_base = row * ncols;
                    for b in 0..self.batch {
                        let plane = (b * self.channels + c) * self.height * self.width;
                        for oy in 0..ho {
                            let iy = (oy * s + ki) as isize - p;
                            let col_base = row_base + (b * ho + oy) * wo;
                            for ox in 0..wo {
                                let ix = (ox * s + kj) as isize - p;
                                let src = (iy >= 0 && iy < h && ix >= 0 && ix < w)
                                    .then(|| plane + iy as usize * self.width + ix as usize);
                                f(col_base + ox, src);
                            }
                        }
                    }
                }
            }
        }
    }
}

impl Tensor {
    /// Unfolds an NCHW tensor into convolution columns `(C*k*k, B*Ho*Wo)`.
    pub fn im2col(&self, geom: ConvGeometry) -> Tensor {
        assert_eq!(self.shape(), geom.input_shape(), "im2col geometry mismatch");
        let x = self.values();
        let shape = geom.cols_shape();
        let mut cols = vec![0.0; shape[0] * shape[1]];
        geom.for_each_tap(|dst, src| {
            if let Some(src) = src {
                cols[dst] = x[src];
            }
        });
        let data = ArrayD::from_shape_vec(IxDyn(&shape), cols).expect("im2col shape");
        Tensor::from_op(
            data,
            "im2col",
            vec![self.clone()],
            Box::new(move |g, _, _| vec![Some(g.col2im(geom))]),
        )
    }

    /// Folds columns back into an NCHW tensor, summing overlaps
    /// (adjoint of [`Tensor::im2col`]).
    pub fn col2im(&self, geom: ConvGeometry) -> Tensor {
        assert_eq!(self.shape(), geom.cols_shape(), "col2im geometry mismatch");
        let cols = self.values();
        let shape = geom.input_shape();
        let mut x = vec![0.0; shape.iter().product()];
        geom.for_each_tap(|src, dst| {
            if let Some(dst) = dst {
                x[dst] += cols[src];
            }
        });
        let data = ArrayD::from_shape_vec(IxDyn(&shape), x).expect("col2im shape");
        Tensor::from_op(
            data,
            "col2im",
            vec![self.clone()],
            Box::new(move |g, _, _| vec![Some(g.im2col(geom))]),
        )
    }

    /// 2-D convolution. `weight` is `(out, in, k, k)`, `bias` is `(out,)`.
    pub fn conv2d(&self, weight: &Tensor, bias: Option<&Tensor>, stride: usize, padding: usize) -> Tensor {
        let [b, c, h, w]: [usize; 4] = self.shape().try_into().expect("conv2d input must be NCHW");
        let [o, ci, k, k2]: [usize; 4] = weight.shape().try_into().expect("conv2d weight must be 4-D");
        assert_eq!(c, ci, "conv2d channel mismatch");
        assert_eq!(k, k2, "conv2d kernel must be square");
        let geom = ConvGeometry {
            batch: b,
            channels: c,
            height: h,
            width: w,
            kernel: k,
            stride,
            padding,
        };
        let (ho, wo) = (geom.out_height(), geom.out_width());
        let cols = self.im2col(geom);
        let out = weight
            .reshape(&[o, c * k * k])
            .matmul(&cols)
            .reshape(&[o, b, ho, wo])
            .permute(&[1, 0, 2, 3]);
        match bias {
            Some(bias) => out.add(&bias.reshape(&[1, o, 1, 1])),
            None => out,
        }
    }

    /// Transposed 2-D convolution. `weight` is `(in, out, k, k)`.
    pub fn conv_transpose2d(&self, weight: &Tensor, bias: Option<&Tensor>, stride: usize, padding: usize) -> Tensor {
        let [b, ci, h, w]: [usize; 4] = self.shape().try_into().expect("conv_transpose2d input must be NCHW");
        let [wi, o, k, k2]: [usize; 4] = weight.shape().try_into().expect("conv_transpose2d weight must be 4-D");
        assert_eq!(ci, wi, "conv_transpose2d channel mismatch");
        assert_eq!(k, k2, "conv_transpose2d kernel must be square");
        let geom = ConvGeometry {
            batch: b,
            channels: o,
            height: (h - 1) * stride + k - 2 * padding,
            width: (w - 1) * stride + k - 2 * padding,
            kernel: k,
            stride,
            padding,
        };
        debug_assert_eq!(geom.out_height(), h);
        let x = self.permute(&[1, 0, 2, 3]).reshape(&[ci, b * h * w]);
        let cols = weight.reshape(&[ci, o * k * k]).t().matmul(&x);
        let out = cols.col2im(geom);
        match bias {
            Some(bias) => out.add(&bias.reshape(&[1, o, 1, 1])),
            None => out,
        }
    }
}
