use super::{Graph, Tensor, TensorError, Var};

/// Result of [`grad_check`].
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Flat index of the element with the largest error.
    pub worst_index: usize,
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
}

/// Compares the tape gradient of `f` at `x` with central finite differences.
///
/// `f` builds a scalar from the supplied input node. The relative error of
/// each element is `|a - n| / max(|a|, |n|, 1e-8)`; the maximum is reported.
pub fn grad_check<F>(f: F, x: &Tensor<f64>, step: f64) -> Result<GradCheckReport, TensorError>
where
    F: Fn(&mut Graph<f64>, Var) -> Result<Var, TensorError>,
{
    let eval = |input: &Tensor<f64>| -> Result<f64, TensorError> {
        let mut g = Graph::no_grad();
        let v = g.leaf(input);
        let out = f(&mut g, v)?;
        Ok(g.item(out))
    };

    if let Some(i) = x.data().iter().position(|v| !v.is_finite()) {
        return Err(TensorError::NonFinite { what: "grad_check input", index: i });
    }
    let mut g = Graph::new();
    let xv = g.leaf(&x.clone().with_requires_grad(true));
    let out = f(&mut g, xv)?;
    if !g.item(out).is_finite() {
        return Err(TensorError::NonFinite { what: "grad_check output", index: 0 });
    }
    let analytic = g.backward(out)?.wrt(xv);

    let mut probe = x.clone();
    let mut numeric = Vec::with_capacity(x.numel());
    for i in 0..x.numel() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + step;
        let plus = eval(&probe)?;
        probe.data_mut()[i] = orig - step;
        let minus = eval(&probe)?;
        probe.data_mut()[i] = orig;
        let d = (plus - minus) / (2.0 * step);
        if !d.is_finite() {
            return Err(TensorError::NonFinite { what: "finite difference", index: i });
        }
        numeric.push(d);
    }
    if let Some(i) = analytic.iter().position(|v| !v.is_finite()) {
        return Err(TensorError::NonFinite { what: "analytic gradient", index: i });
    }

    let (mut max_rel_error, mut worst_index) = (0.0f64, 0usize);
    for (i, (&a, &n)) in analytic.iter().zip(&numeric).enumerate() {
        let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-8);
        if rel > max_rel_error {
            max_rel_error = rel;
            worst_index = i;
        }
    }
    Ok(GradCheckReport { max_rel_error, worst_index, analytic, numeric })
}
