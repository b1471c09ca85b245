use super::CondenseError;
use crate::nets::NetError;
use crate::tensor::{Graph, Scalar, Tensor, Var};

fn check_classes<A, B>(orig: &[(u8, A)], cond: &[(u8, B)]) -> Result<(), CondenseError> {
    for (c, _) in orig {
        if !cond.iter().any(|(d, _)| d == c) {
            return Err(CondenseError::ClassMismatch(*c));
        }
    }
    for (c, _) in cond {
        if !orig.iter().any(|(d, _)| d == c) {
            return Err(CondenseError::ClassMismatch(*c));
        }
    }
    Ok(())
}

/// `Σ_s ‖ mean embed(orig_s) − mean embed(cond_s) ‖²`.
///
/// Original batches are copied into constant nodes, so only `cond` can
/// receive gradients. Every batch must be non-empty and each class must
/// appear on both sides.
pub fn mmd_loss<E, F>(g: &mut Graph<E>, orig: &[(u8, Tensor<E>)], cond: &[(u8, Var)], mut embed: F) -> Result<Var, CondenseError>
where
    E: Scalar,
    F: FnMut(&mut Graph<E>, Var) -> Result<Var, NetError>,
{
    check_classes(orig, cond)?;
    let mut total: Option<Var> = None;
    for (class, batch) in orig {
        if batch.shape().first().is_none_or(|&n| n == 0) {
            return Err(CondenseError::EmptyClass(*class));
        }
        let c = cond.iter().find(|(d, _)| d == class).map(|(_, v)| *v).expect("checked");
        if g.shape(c).first().is_none_or(|&n| n == 0) {
            return Err(CondenseError::EmptyClass(*class));
        }
        let o = g.constant(batch.shape().to_vec(), batch.data().to_vec());
        let eo = embed(g, o)?;
        let mo = g.mean_axis(eo, 0)?;
        let ec = embed(g, c)?;
        let mc = g.mean_axis(ec, 0)?;
        let term = squared_distance(g, mo, mc)?;
        total = Some(match total {
            Some(t) => g.add(t, term)?,
            None => term,
        });
    }
    total.ok_or_else(|| CondenseError::Config("no classes given".into()))
}

fn squared_distance<E: Scalar>(g: &mut Graph<E>, a: Var, b: Var) -> Result<Var, CondenseError> {
    let d = g.sub(a, b)?;
    let sq = g.mul(d, d)?;
    Ok(g.sum(sq))
}

/// Same loss given precomputed original mean embeddings and the embedding
/// `[n, E]` of every condensed sample, with `cond_rows` selecting each
/// class's rows.
pub fn matched_mean_loss<E: Scalar>(
    g: &mut Graph<E>,
    orig_means: &[(u8, Vec<E>)],
    cond_emb: Var,
    cond_rows: &[(u8, Vec<usize>)],
) -> Result<Var, CondenseError> {
    check_classes(orig_means, cond_rows)?;
    let mut total: Option<Var> = None;
    for (class, mean) in orig_means {
        let rows = &cond_rows.iter().find(|(d, _)| d == class).expect("checked").1;
        if rows.is_empty() || mean.is_empty() {
            return Err(CondenseError::EmptyClass(*class));
        }
        let mo = g.constant(vec![mean.len()], mean.clone());
        let ec = g.gather(cond_emb, rows)?;
        let mc = g.mean_axis(ec, 0)?;
        let term = squared_distance(g, mo, mc)?;
        total = Some(match total {
            Some(t) => g.add(t, term)?,
            None => term,
        });
    }
    total.ok_or_else(|| CondenseError::Config("no classes given".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::{ArchSpec, Model};

    fn identity(_: &mut Graph<f64>, x: Var) -> Result<Var, NetError> {
        Ok(x)
    }

    fn t1(vals: &[f64]) -> Tensor<f64> {
        Tensor::new(vec![vals.len(), 1], vals.to_vec()).unwrap()
    }

    #[test]
    fn hand_evaluated_fixture() {
        let mut g = Graph::new();
        let c = g.leaf(&t1(&[0.0]).with_requires_grad(true));
        let l = mmd_loss(&mut g, &[(0, t1(&[1.0, 3.0]))], &[(0, c)], identity).unwrap();
        assert_eq!(g.item(l), 4.0);
    }

    #[test]
    fn identical_batches_give_zero_and_scaling_is_quadratic() {
        let o = Tensor::new(vec![3, 2], vec![0.5, -1.0, 2.0, 0.25, 1.0, 3.0]).unwrap();
        let mut g = Graph::new();
        let c = g.leaf(&o.clone().with_requires_grad(true));
        let l = mmd_loss(&mut g, &[(1, o.clone())], &[(1, c)], identity).unwrap();
        assert_eq!(g.item(l), 0.0);

        let cv = Tensor::new(vec![1, 2], vec![0.0, 0.0]).unwrap();
        let base = {
            let mut g = Graph::new();
            let c = g.leaf(&cv);
            let l = mmd_loss(&mut g, &[(1, o.clone())], &[(1, c)], identity).unwrap();
            g.item(l)
        };
        let mut g = Graph::new();
        let c = g.leaf(&cv);
        let l = mmd_loss(&mut g, &[(1, o)], &[(1, c)], |g, x| Ok(g.scale(x, 3.0))).unwrap();
        assert!((g.item(l) - 9.0 * base).abs() < 1e-12);
    }

    #[test]
    fn one_sided_class_rejected() {
        let mut g = Graph::new();
        let c = g.leaf(&t1(&[0.0]));
        let err = mmd_loss(&mut g, &[(0, t1(&[1.0])), (1, t1(&[2.0]))], &[(0, c)], identity).unwrap_err();
        assert!(matches!(err, CondenseError::ClassMismatch(1)));
    }

    #[test]
    fn fast_path_matches_reference_loss() {
        let spec = ArchSpec::catalog("TCN-γ", 3).unwrap();
        let model = Model::<f64>::build(&spec, 4).unwrap();
        let orig0 = Tensor::new(vec![4, 6, 3], (0..72).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();
        let orig1 = Tensor::new(vec![3, 6, 3], (0..54).map(|i| (i as f64 * 0.91).cos()).collect()).unwrap();
        let cond = Tensor::new(vec![4, 5, 3], (0..60).map(|i| (i as f64 * 0.13).sin() * 2.0).collect()).unwrap();
        let rows = vec![(0u8, vec![0, 2]), (1u8, vec![1, 3])];

        let mut g = Graph::new();
        let p = model.bind(&mut g, false);
        let cv = g.leaf(&cond.clone().with_requires_grad(true));
        let c0 = g.gather(cv, &rows[0].1).unwrap();
        let c1 = g.gather(cv, &rows[1].1).unwrap();
        let reference = mmd_loss(&mut g, &[(0, orig0.clone()), (1, orig1.clone())], &[(0, c0), (1, c1)], |g, x| model.embed(g, &p, x)).unwrap();
        let ref_grad = g.backward(reference).unwrap().wrt(cv);
        let ref_val = g.item(reference);

        let means = vec![(0u8, model.mean_embedding(&orig0).unwrap()), (1u8, model.mean_embedding(&orig1).unwrap())];
        let mut g = Graph::new();
        let p = model.bind(&mut g, false);
        let cv = g.leaf(&cond.with_requires_grad(true));
        let emb = model.embed(&mut g, &p, cv).unwrap();
        let fast = matched_mean_loss(&mut g, &means, emb, &rows).unwrap();
        let fast_grad = g.backward(fast).unwrap().wrt(cv);
        assert!((g.item(fast) - ref_val).abs() < 1e-10);
        for (a, b) in fast_grad.iter().zip(&ref_grad) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}
