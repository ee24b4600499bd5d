// SPDX-License-Identifier: Apache-2.0

//! Reverse-mode automatic differentiation over an arena tape.
//!
//! Nodes are appended in evaluation order, so the arena index order is a
//! topological order and `backward` is a single reverse sweep. Gradients for
//! one sweep are gathered in scratch buffers and then added onto each node's
//! stored gradient, which makes repeated `backward` calls accumulate.

use super::kernels::{self, ConvGeom};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Elementwise nonlinearity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    LeakyRelu(f32),
    Sigmoid,
    Tanh,
}

impl Activation {
    pub const LEAKY_RELU: Activation = Activation::LeakyRelu(0.3);

    pub fn apply(self, x: f32) -> f32 {
        match self {
            Activation::LeakyRelu(slope) => {
                if x > 0.0 {
                    x
                } else {
                    slope * x
                }
            }
            // Clamped so the output stays strictly inside (0, 1) in f32.
            Activation::Sigmoid => {
                (1.0 / (1.0 + (-x).exp())).clamp(f32::MIN_POSITIVE, 1.0 - f32::EPSILON / 2.0)
            }
            Activation::Tanh => x.tanh(),
        }
    }

    /// Local derivative given the op input `x` and output `y`.
    fn derivative(self, x: f32, y: f32) -> f32 {
        match self {
            Activation::LeakyRelu(slope) => {
                if x > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

// ln(f32::MAX) is about 88.72; saturate just below so exp stays finite.
const EXP_ARG_MAX: f32 = 88.0;

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Conv2d { input: Var, kernel: Var, geom: ConvGeom },
    AddBias(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f32),
    AddScalar(Var),
    Exp(Var),
    Square(Var),
    Act(Var, Activation),
    Sum(Var),
    Reshape(Var),
    SliceCols { src: Var, start: usize },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    grad: Option<Tensor>,
    op: Op,
    requires_grad: bool,
}

/// A recorded computation.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Differentiable input (a parameter).
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Non-differentiable input (data, noise, masks).
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.nodes[v.0].grad.as_ref()
    }

    /// Gradient of `v`, zeros if nothing has flowed into it.
    pub fn grad_or_zeros(&self, v: Var) -> Tensor {
        self.grad(v)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(self.value(v).shape()))
    }

    pub fn zero_grad(&mut self) {
        for node in &mut self.nodes {
            node.grad = None;
        }
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            grad: None,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn unary(&mut self, x: Var, op: Op, f: impl Fn(f32) -> f32) -> Var {
        let src = &self.nodes[x.0].value;
        let data = src.data().iter().map(|&v| f(v)).collect();
        let value = Tensor::from_parts(src.shape().to_vec(), data);
        let rg = self.needs(&[x]);
        self.push(value, op, rg)
    }

    fn binary(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        op: Op,
        f: impl Fn(f32, f32) -> f32,
    ) -> Result<Var> {
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if va.shape() != vb.shape() {
            return Err(Error::dim(name, va.shape(), vb.shape()));
        }
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| f(x, y)).collect();
        let value = Tensor::from_parts(va.shape().to_vec(), data);
        let rg = self.needs(&[a, b]);
        Ok(self.push(value, op, rg))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k, n) = kernels::matmul_dims(self.shape(a), self.shape(b))?;
        let mut out = vec![0.0; m * n];
        kernels::gemm(
            m,
            k,
            n,
            self.nodes[a.0].value.data(),
            false,
            self.nodes[b.0].value.data(),
            false,
            &mut out,
            false,
        );
        let rg = self.needs(&[a, b]);
        Ok(self.push(Tensor::from_parts(vec![m, n], out), Op::MatMul(a, b), rg))
    }

    /// Stride-1, zero-padded "same" cross-correlation.
    ///
    /// `input` is `[batch, c_in, h, w]` (or `[c_in, h, w]` for a single
    /// image), `kernel` is `[c_out, c_in, kh, kw]` with odd `kh`, `kw`.
    pub fn conv2d(&mut self, input: Var, kernel: Var) -> Result<Var> {
        let ishape = self.shape(input).to_vec();
        let kshape = self.shape(kernel).to_vec();
        let (batch, c_in, h, w, squeeze) = match ishape[..] {
            [b, c, h, w] => (b, c, h, w, false),
            [c, h, w] => (1, c, h, w, true),
            _ => return Err(Error::dim("conv2d", &ishape, &kshape)),
        };
        let [c_out, kc, kh, kw] = kshape[..] else {
            return Err(Error::dim("conv2d", &ishape, &kshape));
        };
        if kc != c_in {
            return Err(Error::dim("conv2d", &ishape, &kshape));
        }
        if kh % 2 == 0 || kw % 2 == 0 {
            return Err(Error::Contract(format!(
                "conv2d kernel sides must be odd for same padding, got {kh}x{kw}"
            )));
        }
        let geom = ConvGeom {
            c_in,
            c_out,
            h,
            w,
            kh,
            kw,
        };
        let (p, patch) = (geom.pixels(), geom.patch());
        let mut out = vec![0.0; batch * c_out * p];
        let mut col = vec![0.0; patch * p];
        let x = self.nodes[input.0].value.data();
        let k = self.nodes[kernel.0].value.data();
        for b in 0..batch {
            kernels::im2col(&geom, &x[b * c_in * p..(b + 1) * c_in * p], &mut col);
            let dst = &mut out[b * c_out * p..(b + 1) * c_out * p];
            kernels::gemm(c_out, patch, p, k, false, &col, false, dst, false);
        }
        let shape = if squeeze {
            vec![c_out, h, w]
        } else {
            vec![batch, c_out, h, w]
        };
        let rg = self.needs(&[input, kernel]);
        Ok(self.push(
            Tensor::from_parts(shape, out),
            Op::Conv2d {
                input,
                kernel,
                geom,
            },
            rg,
        ))
    }

    /// Add a per-channel bias along axis 1 of `x` (`[batch, channels, ...]`).
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let xs = self.shape(x);
        let bs = self.shape(bias);
        if xs.len() < 2 || bs.len() != 1 || bs[0] != xs[1] {
            return Err(Error::dim("add_bias", xs, bs));
        }
        let channels = xs[1];
        let inner: usize = xs[2..].iter().product();
        let bvals = self.nodes[bias.0].value.data();
        let src = &self.nodes[x.0].value;
        let mut data = src.data().to_vec();
        for (i, row) in data.chunks_exact_mut(inner).enumerate() {
            let b = bvals[i % channels];
            row.iter_mut().for_each(|v| *v += b);
        }
        let value = Tensor::from_parts(src.shape().to_vec(), data);
        let rg = self.needs(&[x, bias]);
        Ok(self.push(value, Op::AddBias(x, bias), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, Op::Sub(a, b), |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, Op::Mul(a, b), |x, y| x * y)
    }

    pub fn scale(&mut self, x: Var, c: f32) -> Var {
        self.unary(x, Op::Scale(x, c), |v| v * c)
    }

    pub fn add_scalar(&mut self, x: Var, c: f32) -> Var {
        self.unary(x, Op::AddScalar(x), |v| v + c)
    }

    pub fn exp(&mut self, x: Var) -> Var {
        self.unary(x, Op::Exp(x), |v| v.min(EXP_ARG_MAX).exp())
    }

    pub fn square(&mut self, x: Var) -> Var {
        self.unary(x, Op::Square(x), |v| v * v)
    }

    pub fn activation(&mut self, x: Var, kind: Activation) -> Var {
        self.unary(x, Op::Act(x, kind), |v| kind.apply(v))
    }

    /// Sum of all elements, shape `[1]`.
    pub fn sum(&mut self, x: Var) -> Var {
        // accumulate in f64 so long reductions round once
        let total = self.nodes[x.0].value.data().iter().map(|&v| v as f64).sum::<f64>() as f32;
        let rg = self.needs(&[x]);
        self.push(Tensor::scalar(total), Op::Sum(x), rg)
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let value = self.nodes[x.0].value.clone().reshape(shape)?;
        let rg = self.needs(&[x]);
        Ok(self.push(value, Op::Reshape(x), rg))
    }

    /// Columns `start..start + len` of a `[rows, cols]` tensor.
    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let [rows, cols] = shape[..] else {
            return Err(Error::dim("slice_cols", &shape, &[start, len]));
        };
        if len == 0 || start + len > cols {
            return Err(Error::dim("slice_cols", &shape, &[start, len]));
        }
        let src = self.nodes[x.0].value.data();
        let mut data = Vec::with_capacity(rows * len);
        for r in 0..rows {
            data.extend_from_slice(&src[r * cols + start..r * cols + start + len]);
        }
        let rg = self.needs(&[x]);
        Ok(self.push(
            Tensor::from_parts(vec![rows, len], data),
            Op::SliceCols { src: x, start },
            rg,
        ))
    }

    /// Back-propagate from the scalar `loss` into every node it depends on.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let lv = &self.nodes[loss.0].value;
        if lv.len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                lv.shape()
            )));
        }
        let mut scratch: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        scratch[loss.0] = Some(Tensor::full(lv.shape(), 1.0));
        for i in (0..=loss.0).rev() {
            let Some(g) = scratch[i].take() else {
                continue;
            };
            if !self.nodes[i].requires_grad {
                continue;
            }
            self.propagate(i, &g, &mut scratch);
            match &mut self.nodes[i].grad {
                Some(acc) => acc.add_assign(&g),
                slot @ None => *slot = Some(g),
            }
        }
        Ok(())
    }

    fn propagate(&self, i: usize, g: &Tensor, scratch: &mut [Option<Tensor>]) {
        let node = &self.nodes[i];
        let gd = g.data();
        let mut send = |v: Var, t: Tensor| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            match &mut scratch[v.0] {
                Some(acc) => acc.add_assign(&t),
                slot @ None => *slot = Some(t),
            }
        };
        let like = |v: Var, data: Vec<f32>| {
            Tensor::from_parts(self.nodes[v.0].value.shape().to_vec(), data)
        };
        match node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let va = &self.nodes[a.0].value;
                let vb = &self.nodes[b.0].value;
                let (m, k) = (va.shape()[0], va.shape()[1]);
                let n = vb.shape()[1];
                if self.nodes[a.0].requires_grad {
                    let mut da = vec![0.0; m * k];
                    kernels::gemm(m, n, k, gd, false, vb.data(), true, &mut da, false);
                    send(a, like(a, da));
                }
                if self.nodes[b.0].requires_grad {
                    let mut db = vec![0.0; k * n];
                    kernels::gemm(k, m, n, va.data(), true, gd, false, &mut db, false);
                    send(b, like(b, db));
                }
            }
            Op::Conv2d {
                input,
                kernel,
                geom,
            } => {
                let x = self.nodes[input.0].value.data();
                let k = self.nodes[kernel.0].value.data();
                let (p, patch) = (geom.pixels(), geom.patch());
                let batch = x.len() / (geom.c_in * p);
                let want_x = self.nodes[input.0].requires_grad;
                let want_k = self.nodes[kernel.0].requires_grad;
                let mut col = vec![0.0; patch * p];
                let mut dk = vec![0.0; geom.c_out * patch];
                let mut dx = if want_x { vec![0.0; x.len()] } else { Vec::new() };
                for b in 0..batch {
                    let gb = &gd[b * geom.c_out * p..(b + 1) * geom.c_out * p];
                    if want_k {
                        kernels::im2col(&geom, &x[b * geom.c_in * p..(b + 1) * geom.c_in * p], &mut col);
                        kernels::gemm(geom.c_out, p, patch, gb, false, &col, true, &mut dk, true);
                    }
                    if want_x {
                        kernels::gemm(patch, geom.c_out, p, k, true, gb, false, &mut col, false);
                        let dst = &mut dx[b * geom.c_in * p..(b + 1) * geom.c_in * p];
                        kernels::col2im(&geom, &col, dst);
                    }
                }
                if want_k {
                    send(kernel, like(kernel, dk));
                }
                if want_x {
                    send(input, like(input, dx));
                }
            }
            Op::AddBias(x, bias) => {
                send(x, g.clone());
                if self.nodes[bias.0].requires_grad {
                    let xs = self.nodes[x.0].value.shape();
                    let channels = xs[1];
                    let inner: usize = xs[2..].iter().product();
                    let mut db = vec![0.0; channels];
                    for (i, row) in gd.chunks_exact(inner).enumerate() {
                        db[i % channels] += row.iter().sum::<f32>();
                    }
                    send(bias, like(bias, db));
                }
            }
            Op::Add(a, b) => {
                send(a, g.clone());
                send(b, g.clone());
            }
            Op::Sub(a, b) => {
                send(a, g.clone());
                send(b, like(b, gd.iter().map(|v| -v).collect()));
            }
            Op::Mul(a, b) => {
                let va = self.nodes[a.0].value.data();
                let vb = self.nodes[b.0].value.data();
                if self.nodes[a.0].requires_grad {
                    send(a, like(a, gd.iter().zip(vb).map(|(g, y)| g * y).collect()));
                }
                if self.nodes[b.0].requires_grad {
                    send(b, like(b, gd.iter().zip(va).map(|(g, x)| g * x).collect()));
                }
            }
            Op::Scale(x, c) => send(x, like(x, gd.iter().map(|v| v * c).collect())),
            Op::AddScalar(x) => send(x, g.clone()),
            Op::Exp(x) => {
                let y = node.value.data();
                send(x, like(x, gd.iter().zip(y).map(|(g, y)| g * y).collect()));
            }
            Op::Square(x) => {
                let xv = self.nodes[x.0].value.data();
                send(x, like(x, gd.iter().zip(xv).map(|(g, x)| 2.0 * g * x).collect()));
            }
            Op::Act(x, kind) => {
                let xv = self.nodes[x.0].value.data();
                let y = node.value.data();
                let d = gd
                    .iter()
                    .zip(xv.iter().zip(y))
                    .map(|(g, (x, y))| g * kind.derivative(*x, *y))
                    .collect();
                send(x, like(x, d));
            }
            Op::Sum(x) => {
                let n = self.nodes[x.0].value.len();
                send(x, like(x, vec![gd[0]; n]));
            }
            Op::Reshape(x) => send(x, like(x, gd.to_vec())),
            Op::SliceCols { src, start } => {
                let shape = self.nodes[src.0].value.shape();
                let (rows, cols) = (shape[0], shape[1]);
                let len = node.value.shape()[1];
                let mut d = vec![0.0; rows * cols];
                for r in 0..rows {
                    d[r * cols + start..r * cols + start + len]
                        .copy_from_slice(&gd[r * len..(r + 1) * len]);
                }
                send(src, like(src, d));
            }
        }
    }
}
