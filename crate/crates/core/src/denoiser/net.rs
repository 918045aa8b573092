//! Small convolutional x0-predictors with hand-written backpropagation.
//!
//! Tensors are planar (`channel, row, col`) and every convolution uses
//! replicated borders, so a tap outside the image reads the nearest edge
//! pixel and its gradient flows back to that pixel.

use crate::error::{Error, Result};
use crate::image::{ImageTensor, Shape};
use crate::scalar::Real;

use super::{DenoiserKind, DenoiserSpec};

/// Planar feature map.
#[derive(Debug, Clone)]
pub(crate) struct Planes<T> {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<T>,
}

impl<T: Real> Planes<T> {
    fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Planes {
            channels,
            height,
            width,
            data: vec![T::zero(); channels * height * width],
        }
    }

    #[inline]
    fn idx(&self, c: usize, y: usize, x: usize) -> usize {
        (c * self.height + y) * self.width + x
    }

    /// Stacks `x_t`, `y0_up` and a constant `eta` plane.
    pub fn network_input(x_t: &ImageTensor<T>, y0_up: &ImageTensor<T>, eta: T) -> Result<Self> {
        x_t.ensure_same_shape(y0_up)?;
        let Shape {
            height,
            width,
            channels,
        } = x_t.shape();
        let mut planes = Planes::zeros(2 * channels + 1, height, width);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    let i = planes.idx(c, y, x);
                    planes.data[i] = x_t.get(y, x, c);
                    let j = planes.idx(channels + c, y, x);
                    planes.data[j] = y0_up.get(y, x, c);
                }
                let k = planes.idx(2 * channels, y, x);
                planes.data[k] = eta;
            }
        }
        Ok(planes)
    }

    pub fn into_image(self) -> Result<ImageTensor<T>> {
        let shape = Shape::new(self.height, self.width, self.channels);
        ImageTensor::from_fn(shape, |y, x, c| self.data[self.idx(c, y, x)])
    }

    pub fn from_image(img: &ImageTensor<T>) -> Self {
        let mut planes = Planes::zeros(img.channels(), img.height(), img.width());
        for y in 0..img.height() {
            for x in 0..img.width() {
                for c in 0..img.channels() {
                    let i = planes.idx(c, y, x);
                    planes.data[i] = img.get(y, x, c);
                }
            }
        }
        planes
    }
}

/// View of one convolution layer inside the flat parameter vector.
#[derive(Debug, Clone, Copy)]
struct ConvLayer {
    in_ch: usize,
    out_ch: usize,
    kernel: usize,
    /// Offset of the weights; biases follow immediately.
    offset: usize,
}

impl ConvLayer {
    fn weight_count(&self) -> usize {
        self.out_ch * self.in_ch * self.kernel * self.kernel
    }

    fn param_count(&self) -> usize {
        self.weight_count() + self.out_ch
    }

    #[inline]
    fn w(&self, o: usize, i: usize, ky: usize, kx: usize) -> usize {
        self.offset + ((o * self.in_ch + i) * self.kernel + ky) * self.kernel + kx
    }

    #[inline]
    fn b(&self, o: usize) -> usize {
        self.offset + self.weight_count() + o
    }

    fn forward<T: Real>(&self, params: &[T], input: &Planes<T>) -> Planes<T> {
        let (h, w) = (input.height, input.width);
        let r = (self.kernel / 2) as isize;
        let mut out = Planes::zeros(self.out_ch, h, w);
        for o in 0..self.out_ch {
            let bias = params[self.b(o)];
            for y in 0..h {
                for x in 0..w {
                    let mut acc = bias;
                    for i in 0..self.in_ch {
                        for ky in 0..self.kernel {
                            let sy = clamp(y as isize + ky as isize - r, h);
                            for kx in 0..self.kernel {
                                let sx = clamp(x as isize + kx as isize - r, w);
                                acc += params[self.w(o, i, ky, kx)] * input.data[input.idx(i, sy, sx)];
                            }
                        }
                    }
                    let k = out.idx(o, y, x);
                    out.data[k] = acc;
                }
            }
        }
        out
    }

    /// Accumulates parameter gradients into `grad` and returns the gradient
    /// with respect to `input`.
    fn backward<T: Real>(&self, params: &[T], input: &Planes<T>, upstream: &Planes<T>, grad: &mut [T]) -> Planes<T> {
        let (h, w) = (input.height, input.width);
        let r = (self.kernel / 2) as isize;
        let mut d_input = Planes::zeros(self.in_ch, h, w);
        for o in 0..self.out_ch {
            for y in 0..h {
                for x in 0..w {
                    let g = upstream.data[upstream.idx(o, y, x)];
                    if g == T::zero() {
                        continue;
                    }
                    grad[self.b(o)] += g;
                    for i in 0..self.in_ch {
                        for ky in 0..self.kernel {
                            let sy = clamp(y as isize + ky as isize - r, h);
                            for kx in 0..self.kernel {
                                let sx = clamp(x as isize + kx as isize - r, w);
                                let src = input.idx(i, sy, sx);
                                let wi = self.w(o, i, ky, kx);
                                grad[wi] += g * input.data[src];
                                d_input.data[src] += g * params[wi];
                            }
                        }
                    }
                }
            }
        }
        d_input
    }
}

#[inline]
fn clamp(v: isize, len: usize) -> usize {
    v.clamp(0, len as isize - 1) as usize
}

fn layers(spec: &DenoiserSpec) -> Vec<ConvLayer> {
    let in_ch = spec.in_channels();
    let out_ch = spec.image_channels;
    let k = spec.kernel_size;
    match spec.kind {
        DenoiserKind::Oracle => Vec::new(),
        DenoiserKind::Affine => vec![ConvLayer {
            in_ch,
            out_ch,
            kernel: k,
            offset: 0,
        }],
        DenoiserKind::Conv2 => {
            let first = ConvLayer {
                in_ch,
                out_ch: spec.hidden_width,
                kernel: k,
                offset: 0,
            };
            let second = ConvLayer {
                in_ch: spec.hidden_width,
                out_ch,
                kernel: k,
                offset: first.param_count(),
            };
            vec![first, second]
        }
    }
}

pub(crate) fn param_count(spec: &DenoiserSpec) -> usize {
    layers(spec).iter().map(ConvLayer::param_count).sum()
}

/// Ranges of the weight blocks, in parameter order; biases are excluded.
pub(crate) fn weight_ranges(spec: &DenoiserSpec) -> Vec<std::ops::Range<usize>> {
    layers(spec)
        .iter()
        .map(|l| l.offset..l.offset + l.weight_count())
        .collect()
}

/// Network output for a stacked input.
pub(crate) fn forward<T: Real>(spec: &DenoiserSpec, params: &[T], input: &Planes<T>) -> Result<Planes<T>> {
    let ls = layers(spec);
    match ls.as_slice() {
        [only] => Ok(only.forward(params, input)),
        [first, second] => {
            let mut hidden = first.forward(params, input);
            for v in &mut hidden.data {
                *v = v.max(T::zero());
            }
            Ok(second.forward(params, &hidden))
        }
        _ => Err(Error::Unsupported("the oracle has no network".into())),
    }
}

/// Gradient of `sum(upstream * output)` with respect to every parameter.
pub(crate) fn backward<T: Real>(
    spec: &DenoiserSpec,
    params: &[T],
    input: &Planes<T>,
    upstream: &Planes<T>,
) -> Result<Vec<T>> {
    let ls = layers(spec);
    let mut grad = vec![T::zero(); params.len()];
    match ls.as_slice() {
        [only] => {
            only.backward(params, input, upstream, &mut grad);
        }
        [first, second] => {
            let pre = first.forward(params, input);
            let mut hidden = pre.clone();
            for v in &mut hidden.data {
                *v = v.max(T::zero());
            }
            let mut d_hidden = second.backward(params, &hidden, upstream, &mut grad);
            for (d, &p) in d_hidden.data.iter_mut().zip(&pre.data) {
                if p <= T::zero() {
                    *d = T::zero();
                }
            }
            first.backward(params, input, &d_hidden, &mut grad);
        }
        _ => return Err(Error::Unsupported("the oracle has no parameters".into())),
    }
    Ok(grad)
}
