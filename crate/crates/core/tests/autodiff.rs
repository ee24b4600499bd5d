// SPDX-License-Identifier: Apache-2.0

mod common;

use std::collections::BTreeSet;

use common::RandomGraph;
use proptest::prelude::*;
use prvnet::numerics::{adam_step, gradcheck, matmul, AdamConfig, AdamState, Graph, Tensor};

#[test]
fn random_graphs_match_finite_differences() {
    let mut covered = BTreeSet::new();
    for i in 0..50 {
        let rg = RandomGraph::new(7, i);
        covered.extend(rg.ops());
        let r = gradcheck(|g, v| rg.build(g, v), &rg.inputs, 5e-2).unwrap();
        assert!(r.rel_error < 1e-3, "graph {i}: {r:?}");
    }
    for op in [
        "conv2d", "add_bias", "reshape", "matmul", "slice_cols", "add", "sub", "mul", "sum",
        "leakyrelu", "sigmoid", "tanh", "exp", "square", "scale", "addscalar",
    ] {
        assert!(covered.contains(op), "op {op} never exercised");
    }
}

#[test]
fn matmul_reference_values() {
    let eye = Tensor::new(&[2, 2], vec![1., 0., 0., 1.]).unwrap();
    let col = Tensor::new(&[2, 1], vec![2., 3.]).unwrap();
    assert_eq!(matmul(&eye, &col).unwrap(), col);
    let row = Tensor::new(&[1, 2], vec![1., 2.]).unwrap();
    let c = Tensor::new(&[2, 1], vec![3., 4.]).unwrap();
    assert_eq!(matmul(&row, &c).unwrap().data(), &[11.0]);
    let err = matmul(&row, &row).unwrap_err().to_string();
    assert!(err.contains("[1, 2]"), "{err}");
}

#[test]
fn adam_moves_against_the_gradient_by_the_learning_rate() {
    let mut p = vec![Tensor::new(&[2], vec![1.0, -1.0]).unwrap()];
    let g = vec![Tensor::new(&[2], vec![0.5, -2.0]).unwrap()];
    let cfg = AdamConfig {
        weight_decay: 0.0,
        ..AdamConfig::default()
    };
    let mut st = AdamState::new(cfg, &p);
    adam_step(&mut p, &g, &mut st).unwrap();
    // the first bias-corrected step has magnitude lr in each coordinate
    assert!((p[0].data()[0] - (1.0 - 1e-3)).abs() < 1e-6);
    assert!((p[0].data()[1] - (-1.0 + 1e-3)).abs() < 1e-6);
    assert_eq!(st.step(), 1);
    let wrong = vec![Tensor::zeros(&[3])];
    assert!(adam_step(&mut p, &wrong, &mut st).is_err());
}

#[test]
fn adam_minimizes_a_quadratic() {
    let target = [0.3f32, -1.2, 2.0];
    let mut p = vec![Tensor::zeros(&[3])];
    let cfg = AdamConfig {
        learning_rate: 0.05,
        weight_decay: 0.0,
        ..AdamConfig::default()
    };
    let mut st = AdamState::new(cfg, &p);
    for _ in 0..2000 {
        let mut g = Graph::new();
        let x = g.leaf(p[0].clone());
        let t = g.constant(Tensor::new(&[3], target.to_vec()).unwrap());
        let d = g.sub(x, t).unwrap();
        let d2 = g.square(d);
        let l = g.sum(d2);
        g.backward(l).unwrap();
        let grad = vec![g.grad_or_zeros(x)];
        adam_step(&mut p, &grad, &mut st).unwrap();
    }
    for (a, b) in p[0].data().iter().zip(target) {
        assert!((a - b).abs() < 1e-3, "{a} vs {b}");
    }
}

fn tensor(shape: &'static [usize]) -> impl Strategy<Value = Tensor> {
    let n: usize = shape.iter().product();
    prop::collection::vec(-2.0f32..2.0, n).prop_map(move |d| Tensor::new(shape, d).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn one_by_one_conv_is_a_per_pixel_matmul(x in tensor(&[1, 3, 2, 2]), k in tensor(&[2, 3, 1, 1])) {
        let mut g = Graph::new();
        let xv = g.constant(x.clone());
        let kv = g.constant(k.clone());
        let y = g.conv2d(xv, kv).unwrap();
        let y = g.value(y).clone();
        for p in 0..4 {
            for o in 0..2 {
                let want: f32 = (0..3).map(|c| k.data()[o * 3 + c] * x.data()[c * 4 + p]).sum();
                prop_assert!((y.data()[o * 4 + p] - want).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn matmul_is_bilinear(a in tensor(&[3, 4]), b in tensor(&[4, 2]), c in tensor(&[4, 2])) {
        let mut bc = b.clone();
        for (x, y) in bc.data_mut().iter_mut().zip(c.data()) {
            *x += y;
        }
        let lhs = matmul(&a, &bc).unwrap();
        let r1 = matmul(&a, &b).unwrap();
        let r2 = matmul(&a, &c).unwrap();
        for i in 0..lhs.len() {
            prop_assert!((lhs.data()[i] - r1.data()[i] - r2.data()[i]).abs() < 1e-4);
        }
    }

    #[test]
    fn backward_twice_doubles_every_gradient(seed in 0u64..1000) {
        let rg = RandomGraph::new(seed, (seed % 50) as usize);
        let mut g = Graph::new();
        let v: Vec<_> = rg.inputs.iter().map(|t| g.leaf(t.clone())).collect();
        let l = rg.build(&mut g, &v).unwrap();
        g.backward(l).unwrap();
        let once: Vec<Tensor> = v.iter().map(|&x| g.grad_or_zeros(x)).collect();
        g.backward(l).unwrap();
        for (x, o) in v.iter().zip(&once) {
            let twice = g.grad_or_zeros(*x);
            for (t, s) in twice.data().iter().zip(o.data()) {
                prop_assert!((t - 2.0 * s).abs() <= 1e-6 * (1.0 + s.abs()));
            }
        }
    }
}
