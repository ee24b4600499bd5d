// SPDX-License-Identifier: Apache-2.0

//! Central finite-difference check of reverse-mode gradients.

use super::graph::{Graph, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Disagreement between analytic and numeric gradients, measured as
/// `‖fd − analytic‖ / max(‖fd‖, ‖analytic‖)` (the absolute difference when
/// both norms are below `1e-6`).
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheck {
    /// Over the gradient of all inputs stacked into one vector.
    pub rel_error: f64,
    /// The same measure restricted to each input. An input with a tiny
    /// gradient shows f32 round-off here that the stacked measure absorbs.
    pub per_input: Vec<f64>,
    pub loss: f64,
}

fn rel(diff2: f64, fd2: f64, an2: f64) -> f64 {
    let scale = fd2.sqrt().max(an2.sqrt());
    if scale < 1e-6 {
        diff2.sqrt()
    } else {
        diff2.sqrt() / scale
    }
}

/// Build the scalar loss with `build` on fresh graphs and compare `backward`
/// against the fourth-order central difference
/// `(8(L(x+h) − L(x−h)) − (L(x+2h) − L(x−2h))) / 12h` for every element of
/// every input. The higher order lets `h` be large enough that f32 round-off
/// in the forward pass does not swamp small gradients.
///
/// `build` receives the inputs as differentiable leaves, in order.
pub fn gradcheck<F>(build: F, inputs: &[Tensor], h: f32) -> Result<GradCheck>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    if !(h > 0.0) {
        return Err(Error::Config(format!("step {h} must be positive")));
    }
    let eval = |xs: &[Tensor]| -> Result<f64> {
        let mut g = Graph::new();
        let vars: Vec<Var> = xs.iter().map(|t| g.leaf(t.clone())).collect();
        let loss = build(&mut g, &vars)?;
        Ok(g.value(loss).item() as f64)
    };

    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t.clone())).collect();
    let loss = build(&mut g, &vars)?;
    g.backward(loss)?;
    let analytic: Vec<Tensor> = vars.iter().map(|&v| g.grad_or_zeros(v)).collect();

    let mut xs = inputs.to_vec();
    let mut per_input = Vec::with_capacity(inputs.len());
    let (mut d_all, mut f_all, mut a_all) = (0.0, 0.0, 0.0);
    for (i, an) in analytic.iter().enumerate() {
        let (mut diff, mut n_fd, mut n_an) = (0.0f64, 0.0f64, 0.0f64);
        for j in 0..xs[i].len() {
            let orig = xs[i].data()[j];
            let mut at = |k: f32| -> Result<f64> {
                xs[i].data_mut()[j] = orig + k * h;
                let v = eval(&xs);
                xs[i].data_mut()[j] = orig;
                v
            };
            let (p1, m1, p2, m2) = (at(1.0)?, at(-1.0)?, at(2.0)?, at(-2.0)?);
            let fd = (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * h as f64);
            let a = an.data()[j] as f64;
            diff += (fd - a).powi(2);
            n_fd += fd * fd;
            n_an += a * a;
        }
        per_input.push(rel(diff, n_fd, n_an));
        d_all += diff;
        f_all += n_fd;
        a_all += n_an;
    }
    Ok(GradCheck {
        rel_error: rel(d_all, f_all, a_all),
        per_input,
        loss: g.value(loss).item() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule() {
        let a = Tensor::new(&[3], vec![0.5, -1.0, 2.0]).unwrap();
        let b = Tensor::new(&[3], vec![1.5, 0.25, -0.75]).unwrap();
        let r = gradcheck(
            |g, v| {
                let p = g.mul(v[0], v[1])?;
                let s = g.square(p);
                Ok(g.sum(s))
            },
            &[a, b],
            1e-2,
        )
        .unwrap();
        assert!(r.rel_error < 1e-3, "{r:?}");
    }

    #[test]
    fn catches_a_wrong_gradient() {
        // d/dx of sum(x * x) is 2x; treating one factor as constant halves it
        let x = Tensor::new(&[2], vec![1.0, 2.0]).unwrap();
        let r = gradcheck(
            |g, v| {
                let c = g.constant(g.value(v[0]).clone());
                let p = g.mul(v[0], c)?;
                Ok(g.sum(p))
            },
            &[x],
            1e-2,
        )
        .unwrap();
        assert!((r.rel_error - 0.5).abs() < 1e-3, "{r:?}");
    }
}
