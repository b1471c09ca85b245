mod common;

use common::*;
use tscond::nets::{ArchSpec, Model, CATALOG_NAMES};
use tscond::tensor::{grad_check, Graph, Tensor, TensorError, Var};

#[test]
fn every_op_matches_finite_differences() {
    for case in op_cases() {
        let err = check_op(&case, 3);
        assert!(err < GRAD_TOL, "{}: rel err {err:e}", case.name);
    }
}

#[test]
fn every_architecture_matches_finite_differences() {
    for name in CATALOG_NAMES {
        let err = check_arch(name, 2);
        assert!(err < GRAD_TOL, "{name}: rel err {err:e}");
    }
}

#[test]
fn embedding_mean_matches_finite_differences() {
    for name in ["TCN-α", "LSTM-α", "ViT-α"] {
        let spec = ArchSpec::catalog(name, ARCH_F).unwrap();
        let model = Model::<f64>::build(&spec, 3).unwrap();
        let x = uniform(&[2, 6, ARCH_F], -1.5, 1.5, 42);
        let f = |g: &mut Graph<f64>, xv: Var| -> Result<Var, TensorError> {
            let p = model.bind(g, false);
            let e = model.embed(g, &p, xv).map_err(|e| match e {
                tscond::nets::NetError::Tensor(t) => t,
                other => panic!("{other}"),
            })?;
            Ok(g.mean(e))
        };
        let r = grad_check(f, &x, GRAD_STEP).unwrap();
        assert!(r.max_rel_error < GRAD_TOL, "{name}: {}", r.max_rel_error);
    }
}

/// Parameter gradients, treating one weight tensor at a time as the input.
/// Errors are measured against the largest gradient entry since many weight
/// gradients sit near 1e-8, below finite-difference resolution.
#[test]
fn parameter_gradients_match_finite_differences() {
    let probes = [
        ("TCN-γ", "tc1.br1.w"),
        ("TRSF-β", "enc0.q.w"),
        ("ViT-α", "cls"),
        ("ViT-β", "enc3.ff2.b"),
        ("LSTM-β", "lstm.b"),
        ("RNN-β", "head.w"),
    ];
    for (arch, pname) in probes {
        let spec = ArchSpec::catalog(arch, ARCH_F).unwrap();
        let model = Model::<f64>::build(&spec, 12).unwrap();
        let x = uniform(&[2, 4, ARCH_F], -1.0, 1.0, 8);
        let w0: Tensor<f64> = model.params().get(pname).unwrap().clone();
        let f = |g: &mut Graph<f64>, wv: Var| -> Result<Var, TensorError> {
            let mut p = model.bind(g, false);
            p.replace(pname, wv)?;
            let xv = g.constant(x.shape().to_vec(), x.data().to_vec());
            let y = model.predict(g, &p, xv).map_err(|e| match e {
                tscond::nets::NetError::Tensor(t) => t,
                other => panic!("{other}"),
            })?;
            Ok(g.mean(y))
        };
        let r = grad_check(f, &w0, GRAD_STEP).unwrap();
        let scale = r.analytic.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let abs_err = r.analytic.iter().zip(&r.numeric).fold(0.0f64, |m, (a, n)| m.max((a - n).abs()));
        assert!(scale > 0.0, "{arch}/{pname}: zero gradient");
        assert!(abs_err <= GRAD_TOL * scale, "{arch}/{pname}: {abs_err:e} vs scale {scale:e}");
    }
}
