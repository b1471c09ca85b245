use super::EvalError;
use crate::tensor::{Graph, Scalar, TensorError, Var};

/// Clamp bound for probabilities entering the log.
pub const BCE_EPS: f64 = 1e-7;

/// Mean binary cross-entropy and the number of probabilities that had to be
/// clamped into `[ε, 1 − ε]`.
pub struct Bce {
    pub loss: Var,
    pub clamped: usize,
}

/// `−mean(y·ln p + (1−y)·ln(1−p))` with `p` clamped to `[ε, 1−ε]`.
pub fn bce_loss<E: Scalar>(g: &mut Graph<E>, probs: Var, labels: Var) -> Result<Bce, TensorError> {
    if g.shape(probs) != g.shape(labels) {
        return Err(TensorError::ShapeMismatch { op: "bce_loss", lhs: g.shape(probs).to_vec(), rhs: g.shape(labels).to_vec() });
    }
    let lo = E::from_f64_lossy(BCE_EPS);
    let hi = E::one() - lo;
    let clamped = g.value(probs).iter().filter(|&&p| !(p >= lo && p <= hi)).count();
    let p = g.clamp(probs, lo, hi);
    let ln_p = g.ln(p);
    let q = g.affine(p, -E::one(), E::one());
    let ln_q = g.ln(q);
    let not_y = g.affine(labels, -E::one(), E::one());
    let pos = g.mul(labels, ln_p)?;
    let neg = g.mul(not_y, ln_q)?;
    let ll = g.add(pos, neg)?;
    let m = g.mean(ll);
    Ok(Bce { loss: g.scale(m, -E::one()), clamped })
}

/// ROC AUC via the Mann-Whitney rank statistic with average ranks for ties.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64, EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::Config(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(EvalError::Config(format!("score {i} is NaN")));
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(EvalError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their average
        let avg = (i + j + 2) as f64 / 2.0;
        rank_sum += avg * order[i..=j].iter().filter(|&&k| labels[k] == 1).count() as f64;
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}
