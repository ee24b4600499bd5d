// SPDX-License-Identifier: Apache-2.0

//! Helpers shared by the integration tests and the acceptance run.

#![allow(dead_code)]

use std::collections::BTreeSet;

use prvnet::numerics::{Activation, Graph, Tensor, Var};
use prvnet::rng::{self, stream, Purpose};
use prvnet::Result;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Unary {
    LeakyRelu,
    Sigmoid,
    Tanh,
    Exp,
    Square,
    Scale,
    AddScalar,
}

pub const UNARY: [Unary; 7] = [
    Unary::LeakyRelu,
    Unary::Sigmoid,
    Unary::Tanh,
    Unary::Exp,
    Unary::Square,
    Unary::Scale,
    Unary::AddScalar,
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Binary {
    Add,
    Sub,
    Mul,
}

/// Leaky-ReLU inputs are shifted at least this far from the kink, so a
/// finite-difference step never straddles it.
const KINK_MARGIN: f32 = 0.15;

/// One unary step; `shift` is added first (only used before leaky ReLU).
#[derive(Clone, Copy, Debug, PartialEq)]
struct Step {
    op: Unary,
    shift: f32,
}

/// A small random graph exercising every tape op:
///
/// ```text
/// x ─conv2d─add_bias─[unary…]─reshape─matmul─add_bias─┬slice_cols─┐
///                                                     └slice_cols─┴binary─[unary…]─mul(w)─sum
/// ```
#[derive(Clone, Debug)]
pub struct RandomGraph {
    /// Differentiable inputs: image, kernel, conv bias, dense weight, dense bias.
    pub inputs: Vec<Tensor>,
    weights: Tensor,
    first: Vec<Step>,
    binary: Binary,
    second: Vec<Step>,
    half: usize,
}

impl RandomGraph {
    /// Graph number `index` of a family seeded by `seed`. Consecutive indices
    /// rotate through every unary and binary op.
    pub fn new(seed: u64, index: usize) -> Self {
        let mut r = stream(seed, Purpose::Init, index as u64);
        let mut pick = |lo: usize, hi: usize| lo + (rng::uniform(&mut r, 0.0, (hi - lo + 1) as f64) as usize).min(hi - lo);
        let (b, c, h, w) = (pick(1, 2), pick(1, 3), pick(3, 5), pick(3, 5));
        let c2 = pick(1, 3);
        let k = if pick(0, 1) == 0 { 1 } else { 3 };
        let half = pick(1, 3);
        let flat = c2 * h * w;
        let n_first = pick(0, 2);
        let n_second = pick(1, 2);
        let step = |op| Step { op, shift: 0.0 };
        let mut first = vec![step(UNARY[index % UNARY.len()])];
        first.extend((0..n_first).map(|_| step(UNARY[pick(0, UNARY.len() - 1)])));
        let second = (0..n_second).map(|_| step(UNARY[pick(0, UNARY.len() - 1)])).collect();
        let binary = [Binary::Add, Binary::Sub, Binary::Mul][index % 3];

        let mut r = stream(seed, Purpose::Dataset, index as u64);
        let mut uni = |shape: &[usize], scale: f64| {
            let n: usize = shape.iter().product();
            let data = (0..n).map(|_| rng::uniform(&mut r, -scale, scale) as f32).collect();
            Tensor::new(shape, data).unwrap()
        };
        let inputs = vec![
            uni(&[b, c, h, w], 1.0),
            uni(&[c2, c, k, k], 1.0 / ((c * k * k) as f64).sqrt()),
            uni(&[c2], 0.5),
            uni(&[flat, 2 * half], 1.0 / (flat as f64).sqrt()),
            uni(&[2 * half], 0.5),
        ];
        let weights = uni(&[b, half], 1.0);
        let mut g = RandomGraph {
            inputs,
            weights,
            first,
            binary,
            second,
            half,
        };
        g.settle_kinks();
        g
    }

    /// Names of the ops this graph records on the tape.
    pub fn ops(&self) -> BTreeSet<String> {
        let mut s: BTreeSet<String> = [
            "conv2d",
            "add_bias",
            "reshape",
            "matmul",
            "slice_cols",
            "mul",
            "sum",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        for st in self.first.iter().chain(&self.second) {
            s.insert(format!("{:?}", st.op).to_lowercase());
            if st.shift != 0.0 {
                s.insert("addscalar".into());
            }
        }
        s.insert(format!("{:?}", self.binary).to_lowercase());
        s
    }

    pub fn build(&self, g: &mut Graph, v: &[Var]) -> Result<Var> {
        self.run(g, v, None)
    }

    fn settle_kinks(&mut self) {
        let mut g = Graph::new();
        let v: Vec<Var> = self.inputs.iter().map(|t| g.constant(t.clone())).collect();
        let mut plan = (self.first.clone(), self.second.clone());
        self.run(&mut g, &v, Some(&mut plan)).unwrap();
        self.first = plan.0;
        self.second = plan.1;
    }

    fn run(&self, g: &mut Graph, v: &[Var], mut fix: Option<&mut (Vec<Step>, Vec<Step>)>) -> Result<Var> {
        let batch = g.value(v[0]).shape()[0];
        let y = g.conv2d(v[0], v[1])?;
        let mut y = g.add_bias(y, v[2])?;
        for i in 0..self.first.len() {
            let op = self.first[i];
            let op = settle(g, y, op, fix.as_deref_mut().map(|p| &mut p.0[i]));
            y = apply(g, y, op);
        }
        let flat = g.value(y).len() / batch;
        let y = g.reshape(y, &[batch, flat])?;
        let y = g.matmul(y, v[3])?;
        let y = g.add_bias(y, v[4])?;
        let a = g.slice_cols(y, 0, self.half)?;
        let b = g.slice_cols(y, self.half, self.half)?;
        let mut y = match self.binary {
            Binary::Add => g.add(a, b)?,
            Binary::Sub => g.sub(a, b)?,
            Binary::Mul => g.mul(a, b)?,
        };
        for i in 0..self.second.len() {
            let op = self.second[i];
            let op = settle(g, y, op, fix.as_deref_mut().map(|p| &mut p.1[i]));
            y = apply(g, y, op);
        }
        let w = g.constant(self.weights.clone());
        let y = g.mul(y, w)?;
        Ok(g.sum(y))
    }
}

/// On the planning pass, pick the shift that keeps leaky-ReLU inputs
/// farthest from zero; fall back to tanh if no shift clears the margin.
fn settle(g: &Graph, x: Var, step: Step, slot: Option<&mut Step>) -> Step {
    let Some(slot) = slot else { return step };
    if step.op != Unary::LeakyRelu {
        return step;
    }
    let values = g.value(x).data();
    let clearance = |c: f32| values.iter().map(|v| (v + c).abs()).fold(f32::INFINITY, f32::min);
    let best = (-200..=200)
        .map(|i| i as f32 * 0.005)
        .max_by(|a, b| clearance(*a).total_cmp(&clearance(*b)))
        .unwrap();
    *slot = if clearance(best) >= KINK_MARGIN {
        Step { op: Unary::LeakyRelu, shift: best }
    } else {
        Step { op: Unary::Tanh, shift: 0.0 }
    };
    *slot
}

fn apply(g: &mut Graph, x: Var, step: Step) -> Var {
    let x = if step.shift != 0.0 { g.add_scalar(x, step.shift) } else { x };
    match step.op {
        Unary::LeakyRelu => g.activation(x, Activation::LEAKY_RELU),
        Unary::Sigmoid => g.activation(x, Activation::Sigmoid),
        Unary::Tanh => g.activation(x, Activation::Tanh),
        Unary::Exp => {
            let s = g.scale(x, 0.5);
            g.exp(s)
        }
        Unary::Square => g.square(x),
        Unary::Scale => g.scale(x, -1.7),
        Unary::AddScalar => g.add_scalar(x, 0.3),
    }
}
