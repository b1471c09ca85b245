use std::time::Instant;

use rand::seq::index;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{matched_mean_loss, CondenseConfig, CondenseError, CondensedSet, Optimizer, Provenance};
use crate::data::{SizeReport, TimeSeriesDataset};
use crate::nets::{Model, NetworkCollection};
use crate::tensor::{adam_step, sgd_step, AdamConfig, AdamState, Graph, ParamSet, Scalar, Tensor};

const SAMPLES: &str = "samples";

/// Reported after every iteration of [`condense_with`].
#[derive(Clone, Debug)]
pub struct Progress<'a> {
    pub iteration: usize,
    pub iterations: usize,
    pub loss: f64,
    pub network: &'a str,
}

fn validate(config: &CondenseConfig, n: usize, t: usize, phi: &NetworkCollection) -> Result<usize, CondenseError> {
    let bad = |msg: String| Err(CondenseError::Config(msg));
    if config.size == 0 || config.size % 2 == 1 {
        return bad(format!("condensed size must be even and positive for a 50/50 split, got {}", config.size));
    }
    if config.size > n / 4 {
        return bad(format!("condensed size {} exceeds a quarter of the {n} source samples", config.size));
    }
    if config.batch_size == 0 {
        return bad("batch size must be at least 1".into());
    }
    let lr = match config.optimizer {
        Optimizer::Adam { lr } | Optimizer::Sgd { lr } => lr,
    };
    if !(lr > 0.0 && lr.is_finite()) {
        return bad(format!("learning rate must be positive, got {lr}"));
    }
    let t_star = config.t_star.unwrap_or(t);
    if t_star < phi.max_kernel() || t_star == 0 {
        return bad(format!("T* = {t_star} is shorter than the largest kernel ({})", phi.max_kernel()));
    }
    Ok(t_star)
}

/// Standard-normal samples `[|C|, T*, F]` with labels `0, 1, 0, 1, ...`.
pub fn init_condensed<E: Scalar>(size: usize, t_star: usize, f: usize, seed: u64) -> Result<(Tensor<E>, Vec<u8>), CondenseError> {
    if size == 0 || size % 2 == 1 {
        return Err(CondenseError::Config(format!("condensed size must be even and positive, got {size}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..size * t_star * f).map(|_| E::from_f64_lossy(StandardNormal.sample(&mut rng))).collect();
    let labels = (0..size).map(|i| (i % 2) as u8).collect();
    Ok((Tensor::new(vec![size, t_star, f], data)?, labels))
}

/// Up to `size` distinct indices of `class`, uniformly without replacement.
/// When the class has at most `size` members all of them are returned in
/// ascending order.
pub fn sample_class_indices<R: Rng + ?Sized>(labels: &[u8], class: u8, size: usize, rng: &mut R) -> Result<Vec<usize>, CondenseError> {
    let members: Vec<usize> = labels.iter().enumerate().filter(|(_, &l)| l == class).map(|(i, _)| i).collect();
    if members.is_empty() {
        return Err(CondenseError::EmptyClass(class));
    }
    if members.len() <= size {
        return Ok(members);
    }
    Ok(index::sample(rng, members.len(), size).into_iter().map(|k| members[k]).collect())
}

pub fn sample_class_batch<E: Scalar, R: Rng + ?Sized>(
    ds: &TimeSeriesDataset<E>,
    class: u8,
    size: usize,
    rng: &mut R,
) -> Result<Tensor<E>, CondenseError> {
    let idx = sample_class_indices(ds.labels(), class, size, rng)?;
    Ok(ds.samples().select_rows(&idx)?)
}

pub fn condense<E: Scalar>(ds: &TimeSeriesDataset<E>, config: &CondenseConfig) -> Result<(CondensedSet<E>, Vec<f64>), CondenseError> {
    condense_with(ds, config, |_| {})
}

/// Runs the condensation loop, calling `observe` after every iteration.
///
/// Returns the learned set and the per-iteration loss trace. All randomness
/// flows from `config.seed`, so equal inputs give bitwise-equal outputs.
pub fn condense_with<E, O>(ds: &TimeSeriesDataset<E>, config: &CondenseConfig, mut observe: O) -> Result<(CondensedSet<E>, Vec<f64>), CondenseError>
where
    E: Scalar,
    O: FnMut(Progress<'_>),
{
    let started = Instant::now();
    if !ds.is_standardized() {
        return Err(CondenseError::Config("source dataset must be standardized".into()));
    }
    for class in [0u8, 1] {
        if ds.class_counts()[class as usize] == 0 {
            return Err(CondenseError::EmptyClass(class));
        }
    }
    let phi = NetworkCollection::from_names(&config.networks, ds.f())?;
    let t_star = validate(config, ds.n(), ds.t(), &phi)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (init, labels) = init_condensed::<E>(config.size, t_star, ds.f(), rng.next_u64())?;
    let mut params = ParamSet::new();
    params.insert(SAMPLES, init)?;
    let mut adam = AdamState::new(AdamConfig { lr: lr_of(config.optimizer), ..AdamConfig::default() });

    let names = phi.names();
    let mut trace = Vec::with_capacity(config.iterations);
    for iteration in 1..=config.iterations {
        let k = rng.random_range(0..phi.specs().len());
        let model = Model::<E>::build(&phi.specs()[k], rng.next_u64())?;

        let mut orig_means = Vec::with_capacity(2);
        let mut picked = Vec::new();
        let mut cond_rows = Vec::with_capacity(2);
        for class in [0u8, 1] {
            let batch = sample_class_batch(ds, class, config.batch_size, &mut rng)?;
            orig_means.push((class, model.mean_embedding(&batch)?));
            let idx = sample_class_indices(&labels, class, config.batch_size, &mut rng)?;
            cond_rows.push((class, (picked.len()..picked.len() + idx.len()).collect::<Vec<_>>()));
            picked.extend(idx);
        }

        let mut g = Graph::new();
        let p = model.bind(&mut g, false);
        let bound = params.bind(&mut g, true);
        let all = bound.get(SAMPLES)?;
        let batch = if picked.len() == labels.len() && picked.iter().enumerate().all(|(i, &j)| i == j) {
            all
        } else {
            g.gather(all, &picked)?
        };
        let emb = model.embed(&mut g, &p, batch)?;
        let loss = matched_mean_loss(&mut g, &orig_means, emb, &cond_rows)?;
        let value = g.item(loss).as_f64();
        if !value.is_finite() {
            return Err(CondenseError::NonFinite { iteration, network: names[k].clone() });
        }
        let grads = g.backward(loss)?;
        params.store_grads(&bound, &grads)?;
        match config.optimizer {
            Optimizer::Adam { .. } => adam_step(&mut params, &mut adam)?,
            Optimizer::Sgd { lr } => sgd_step(&mut params, lr)?,
        }
        params.clear_grads();
        trace.push(value);
        observe(Progress { iteration, iterations: config.iterations, loss: value, network: &names[k] });
    }

    let samples = params.get(SAMPLES).expect("inserted").clone().with_requires_grad(false);
    let provenance = Provenance {
        seed: config.seed,
        iterations: config.iterations,
        batch_size: config.batch_size,
        optimizer: config.optimizer,
        networks: names,
        source_fingerprint: ds.fingerprint(),
        source_n: ds.n(),
        source_t: ds.t(),
        size: SizeReport::new(config.size, t_star, ds.f()),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    let set = CondensedSet { samples, labels, feature_names: ds.feature_names().to_vec(), stats: ds.stats().cloned(), provenance };
    Ok((set, trace))
}

fn lr_of(opt: Optimizer) -> f64 {
    match opt {
        Optimizer::Adam { lr } | Optimizer::Sgd { lr } => lr,
    }
}
