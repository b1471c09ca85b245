#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tscond::nets::{ArchSpec, Model};
use tscond::tensor::{grad_check, Graph, Tensor, TensorError, Var};

pub const GRAD_STEP: f64 = 1e-6;
pub const GRAD_TOL: f64 = 1e-4;

pub type LossFn = Box<dyn Fn(&mut Graph<f64>, Var) -> Result<Var, TensorError>>;

pub fn uniform(shape: &[usize], lo: f64, hi: f64, seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

/// `sum(y * r)` for a fixed random `r`, so every output element gets a distinct weight.
pub fn weighted_sum(g: &mut Graph<f64>, y: Var, seed: u64) -> Result<Var, TensorError> {
    let shape = g.shape(y).to_vec();
    let r = uniform(&shape, -1.0, 1.0, seed ^ 0x5eed);
    let rv = g.constant(shape, r.data().to_vec());
    let p = g.mul(y, rv)?;
    Ok(g.sum(p))
}

fn constant(g: &mut Graph<f64>, shape: &[usize], seed: u64) -> Var {
    let t = uniform(shape, -1.0, 1.0, seed);
    g.constant(shape.to_vec(), t.data().to_vec())
}

/// One op-level gradient check: the op applied to `x` (the differentiated
/// operand) with any other operands held constant.
pub struct OpCase {
    pub name: &'static str,
    pub input_shape: Vec<usize>,
    pub range: (f64, f64),
    pub loss: fn(u64) -> LossFn,
}

macro_rules! case {
    ($name:expr, $shape:expr, $range:expr, |$g:ident, $x:ident, $seed:ident| $body:expr) => {
        OpCase {
            name: $name,
            input_shape: $shape,
            range: $range,
            loss: |$seed: u64| -> LossFn {
                Box::new(move |$g: &mut Graph<f64>, $x: Var| {
                    let y: Var = $body;
                    weighted_sum($g, y, $seed)
                })
            },
        }
    };
}

pub fn op_cases() -> Vec<OpCase> {
    let sym = (-1.0, 1.0);
    vec![
        case!("add.lhs", vec![2, 3], sym, |g, x, s| { let c = constant(g, &[2, 3], s); g.add(x, c)? }),
        case!("add.rhs", vec![2, 3], sym, |g, x, s| { let c = constant(g, &[2, 3], s); g.add(c, x)? }),
        case!("sub.lhs", vec![2, 3], sym, |g, x, s| { let c = constant(g, &[2, 3], s); g.sub(x, c)? }),
        case!("sub.rhs", vec![2, 3], sym, |g, x, s| { let c = constant(g, &[2, 3], s); g.sub(c, x)? }),
        case!("mul.lhs", vec![2, 3], sym, |g, x, s| { let c = constant(g, &[2, 3], s); g.mul(x, c)? }),
        case!("mul.rhs", vec![2, 3], sym, |g, x, s| { let c = constant(g, &[2, 3], s); g.mul(c, x)? }),
        case!("mul.self", vec![4], sym, |g, x, _s| g.mul(x, x)?),
        case!("add_bias.x", vec![2, 3, 4], sym, |g, x, s| { let b = constant(g, &[4], s); g.add_bias(x, b)? }),
        case!("add_bias.bias", vec![4], sym, |g, x, s| { let c = constant(g, &[2, 3, 4], s); g.add_bias(c, x)? }),
        case!("affine", vec![5], sym, |g, x, _s| g.affine(x, -1.7, 0.3)),
        case!("matmul.lhs", vec![2, 3, 4], sym, |g, x, s| { let w = constant(g, &[4, 5], s); g.matmul(x, w)? }),
        case!("matmul.rhs", vec![4, 5], sym, |g, x, s| { let a = constant(g, &[2, 3, 4], s); g.matmul(a, x)? }),
        case!("bmm.lhs", vec![2, 3, 4], sym, |g, x, s| { let b = constant(g, &[2, 4, 5], s); g.bmm(x, b, false)? }),
        case!("bmm.rhs", vec![2, 4, 5], sym, |g, x, s| { let a = constant(g, &[2, 3, 4], s); g.bmm(a, x, false)? }),
        case!("bmm_t.lhs", vec![2, 3, 4], sym, |g, x, s| { let b = constant(g, &[2, 5, 4], s); g.bmm(x, b, true)? }),
        case!("bmm_t.rhs", vec![2, 5, 4], sym, |g, x, s| { let a = constant(g, &[2, 3, 4], s); g.bmm(a, x, true)? }),
        case!("bmm.self_t", vec![2, 3, 4], sym, |g, x, _s| g.bmm(x, x, true)?),
        case!("permute", vec![2, 3, 4, 2], sym, |g, x, _s| g.permute(x, &[0, 2, 1, 3])?),
        case!("permute.full", vec![2, 3, 4], sym, |g, x, _s| g.permute(x, &[2, 0, 1])?),
        case!("reshape", vec![2, 6], sym, |g, x, _s| g.reshape(x, &[3, 4])?),
        case!("causal_conv1d.x", vec![2, 6, 3], sym, |g, x, s| { let w = constant(g, &[3, 3, 4], s); g.causal_conv1d(x, w)? }),
        case!("causal_conv1d.w", vec![3, 3, 4], sym, |g, x, s| { let c = constant(g, &[2, 6, 3], s); g.causal_conv1d(c, x)? }),
        case!("causal_conv1d.long_kernel", vec![1, 4, 2], sym, |g, x, s| { let w = constant(g, &[7, 2, 3], s); g.causal_conv1d(x, w)? }),
        case!("sigmoid", vec![6], (-3.0, 3.0), |g, x, _s| g.sigmoid(x)),
        case!("tanh", vec![6], (-3.0, 3.0), |g, x, _s| g.tanh(x)),
        case!("relu", vec![8], sym, |g, x, _s| g.relu(x)),
        case!("ln", vec![6], (0.2, 3.0), |g, x, _s| g.ln(x)),
        case!("clamp", vec![8], (-2.0, 2.0), |g, x, _s| g.clamp(x, -1.0, 1.0)),
        case!("softmax", vec![3, 5], (-2.0, 2.0), |g, x, _s| g.softmax(x)?),
        case!("mean_axis.0", vec![3, 4, 2], sym, |g, x, _s| g.mean_axis(x, 0)?),
        case!("mean_axis.1", vec![3, 4, 2], sym, |g, x, _s| g.mean_axis(x, 1)?),
        case!("mean_axis.2", vec![3, 4, 2], sym, |g, x, _s| g.mean_axis(x, 2)?),
        case!("sum", vec![2, 3], sym, |g, x, _s| g.sum(x)),
        case!("mean", vec![2, 3], sym, |g, x, _s| g.mean(x)),
        case!("concat.first", vec![2, 3, 2], sym, |g, x, s| { let c = constant(g, &[2, 4, 2], s); g.concat(&[x, c], 1)? }),
        case!("concat.second", vec![2, 4, 2], sym, |g, x, s| { let c = constant(g, &[2, 3, 2], s); g.concat(&[c, x], 1)? }),
        case!("concat.self", vec![2, 3], sym, |g, x, _s| g.concat(&[x, x], 1)?),
        case!("slice", vec![3, 5, 2], sym, |g, x, _s| g.slice(x, 1, 1, 3)?),
        case!("gather", vec![4, 3], sym, |g, x, _s| g.gather(x, &[3, 0, 3, 1])?),
    ]
}

/// Worst relative error of an op case over `trials` random inputs.
pub fn check_op(case: &OpCase, trials: u64) -> f64 {
    let mut worst = 0.0f64;
    for trial in 0..trials {
        let seed = 1000 + trial;
        let x = uniform(&case.input_shape, case.range.0, case.range.1, seed);
        let f = (case.loss)(seed);
        let r = grad_check(f, &x, GRAD_STEP).unwrap_or_else(|e| panic!("{}: {e}", case.name));
        worst = worst.max(r.max_rel_error);
    }
    worst
}

pub const ARCH_BATCH: usize = 2;
pub const ARCH_T: usize = 5;
pub const ARCH_F: usize = 3;

/// Worst relative error of `mean(predict(x))` w.r.t. `x` over `trials` random inputs.
pub fn check_arch(name: &str, trials: u64) -> f64 {
    let spec = ArchSpec::catalog(name, ARCH_F).unwrap();
    let mut worst = 0.0f64;
    for trial in 0..trials {
        let model = Model::<f64>::build(&spec, 77 + trial).unwrap();
        let x = uniform(&[ARCH_BATCH, ARCH_T, ARCH_F], -2.0, 2.0, 500 + trial);
        let f = |g: &mut Graph<f64>, xv: Var| -> Result<Var, TensorError> {
            let p = model.bind(g, false);
            let y = model.predict(g, &p, xv).map_err(|e| match e {
                tscond::nets::NetError::Tensor(t) => t,
                other => panic!("{other}"),
            })?;
            Ok(g.mean(y))
        };
        let r = grad_check(f, &x, GRAD_STEP).unwrap();
        worst = worst.max(r.max_rel_error);
    }
    worst
}
