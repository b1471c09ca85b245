//! Builds a small computation on the tape, checks its gradient against
//! finite differences, then fits a linear model with Adam.

use tscond::tensor::{adam_step, grad_check, AdamConfig, AdamState, Graph, ParamSet, Tensor, TensorError, Var};

fn main() -> Result<(), TensorError> {
    // f(x) = sum(tanh(x @ W) * sigmoid(x))
    let w = Tensor::from_f64(vec![3, 3], &[0.5, -0.2, 0.1, 0.3, 0.8, -0.6, -0.4, 0.2, 0.9])?;
    let f = |g: &mut Graph<f64>, x: Var| -> Result<Var, TensorError> {
        let wv = g.constant(w.shape().to_vec(), w.data().to_vec());
        let h = g.matmul(x, wv)?;
        let a = g.tanh(h);
        let s = g.sigmoid(x);
        let y = g.mul(a, s)?;
        Ok(g.sum(y))
    };
    let x = Tensor::from_f64(vec![2, 3], &[0.1, -1.2, 0.7, 2.0, 0.3, -0.5])?;
    let report = grad_check(f, &x, 1e-6)?;
    println!("gradient check: max relative error {:.2e}", report.max_rel_error);

    // least squares y = 2a - 3b + 1 with Adam
    let data: Vec<[f64; 3]> = (0..32).map(|i| {
        let (a, b) = ((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos());
        [a, b, 2.0 * a - 3.0 * b + 1.0]
    }).collect();
    let xs = Tensor::from_f64(vec![32, 2], &data.iter().flat_map(|r| [r[0], r[1]]).collect::<Vec<_>>())?;
    let ys: Vec<f64> = data.iter().map(|r| r[2]).collect();
    let mut params = ParamSet::new();
    params.insert("w", Tensor::<f64>::zeros(vec![2, 1]))?;
    params.insert("b", Tensor::<f64>::zeros(vec![1]))?;
    let mut adam = AdamState::new(AdamConfig { lr: 0.05, ..AdamConfig::default() });
    for step in 1..=400 {
        let mut g = Graph::new();
        let p = params.bind(&mut g, true);
        let x = g.leaf(&xs);
        let h = g.matmul(x, p.get("w")?)?;
        let pred = g.add_bias(h, p.get("b")?)?;
        let y = g.constant(vec![32, 1], ys.clone());
        let d = g.sub(pred, y)?;
        let sq = g.mul(d, d)?;
        let loss = g.mean(sq);
        if step % 100 == 0 {
            println!("step {step}: mse {:.2e}", g.item(loss));
        }
        let grads = g.backward(loss)?;
        params.store_grads(&p, &grads)?;
        adam_step(&mut params, &mut adam)?;
        params.clear_grads();
    }
    println!("fitted w = {:?}, b = {:?}", params.get("w").unwrap().data(), params.get("b").unwrap().data());
    Ok(())
}
