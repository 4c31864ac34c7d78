//! Binary cross-entropy, exact reverse-mode gradients through the whole
//! network, and a deterministic Adam training loop with best-validation
//! parameter selection.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{dataset_parse, MaskTuple};
use crate::render::Mask;

use super::net::{backward_cached, forward_cached, input_from_obs, Arch, ModelParams};
use super::tensor::{ShapeError, Tensor};
use super::MaskPredError;

/// Probability clamp inside the cross-entropy logarithms.
pub const BCE_EPSILON: f64 = 1e-7;

/// Training hyperparameters. All deterministic; `seed` drives init,
/// the train/validation split, shuffling, and swap augmentation.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Peak Adam step size. Per epoch the effective rate follows a
    /// half-cosine from this peak down to a tenth of it: small batches
    /// need the early exploration and the late settling.
    pub learning_rate: f64,
    pub seed: u64,
    /// Fraction of tuples held out for validation, in (0, 0.5].
    pub validation_fraction: f64,
    /// Also present each tuple with its observations (and masks) swapped.
    pub swap_augment: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 14,
            batch_size: 4,
            learning_rate: 3e-3,
            seed: 0,
            validation_fraction: 0.1,
            swap_augment: false,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), MaskPredError> {
        if self.epochs == 0
            || self.batch_size == 0
            || !(self.learning_rate > 0.0)
            || !(self.validation_fraction > 0.0 && self.validation_fraction <= 0.5)
        {
            return Err(MaskPredError::BadConfig(format!("{self:?}")));
        }
        Ok(())
    }
}

/// The trained model plus its training record.
#[derive(Debug, Clone)]
pub struct TrainResult {
    pub params: ModelParams,
    /// `epoch,train_loss,val_loss` rows; epoch 0 is the untrained model.
    pub log_csv: String,
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

fn clamp_p(p: f64) -> f64 {
    p.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON)
}

/// Mean binary cross-entropy between a probability image and a mask.
pub fn bce_loss(prob: &Tensor, target: &Mask) -> Result<f64, ShapeError> {
    if prob.numel() != target.width * target.height {
        return Err(ShapeError::Mismatch(format!(
            "prob has {} values, mask is {}x{}",
            prob.numel(),
            target.width,
            target.height
        )));
    }
    let mut sum = 0.0;
    for (p, t) in prob.data.iter().zip(&target.bits) {
        let p = clamp_p(*p);
        let t = f64::from(*t);
        sum += -(t * p.ln() + (1.0 - t) * (1.0 - p).ln());
    }
    Ok(sum / prob.numel() as f64)
}

/// Mean BCE between tensors of equal shape (target entries in [0, 1]).
fn bce_mean(probs: &Tensor, target: &Tensor) -> f64 {
    debug_assert_eq!(probs.shape, target.shape);
    let mut sum = 0.0;
    for (p, t) in probs.data.iter().zip(&target.data) {
        let p = clamp_p(*p);
        sum += -(t * p.ln() + (1.0 - t) * (1.0 - p).ln());
    }
    sum / probs.numel() as f64
}

/// Input and target tensors of one tuple, optionally order-swapped.
pub fn tuple_tensors(t: &MaskTuple, swap: bool) -> Result<(Tensor, Tensor), ShapeError> {
    let (o1, o2, m1, m2) = if swap {
        (&t.obs2, &t.obs1, &t.mask2, &t.mask1)
    } else {
        (&t.obs1, &t.obs2, &t.mask1, &t.mask2)
    };
    let input = input_from_obs(o1, o2)?;
    let (h, w) = (o1.height, o1.width);
    if (m1.width, m1.height) != (w, h) || (m2.width, m2.height) != (w, h) {
        return Err(ShapeError::Mismatch("mask dimensions differ from observations".into()));
    }
    let mut target = Tensor::zeros(vec![2, h, w]);
    for (ch, m) in [m1, m2].into_iter().enumerate() {
        for p in 0..w * h {
            target.data[ch * w * h + p] = f64::from(m.bits[p]);
        }
    }
    Ok((input, target))
}

/// Loss and exact parameter gradients of the mean BCE over a batch of
/// (input, target) tensor pairs. Gradients are reduced in batch order.
pub fn backward(
    params: &ModelParams,
    batch: &[(Tensor, Tensor)],
) -> Result<(f64, Vec<Tensor>), MaskPredError> {
    if batch.is_empty() {
        return Err(MaskPredError::EmptyDataset);
    }
    let mut total: Option<Vec<Tensor>> = None;
    let mut loss_sum = 0.0;
    for (input, target) in batch {
        let cache = forward_cached(params, input)?;
        if cache.probs.shape != target.shape {
            return Err(MaskPredError::Shape(ShapeError::Mismatch(format!(
                "target shape {:?} vs output {:?}",
                target.shape, cache.probs.shape
            ))));
        }
        loss_sum += bce_mean(&cache.probs, target);
        // d(mean BCE)/d(logit) = (p - t) / pixel count, exactly; the clamp
        // only guards the logarithms in the reported loss.
        let n = cache.probs.numel() as f64;
        let grad_logits = Tensor::new(
            cache.probs.shape.clone(),
            cache
                .probs
                .data
                .iter()
                .zip(&target.data)
                .map(|(p, t)| (p - t) / n)
                .collect(),
        );
        let grads = backward_cached(params, &cache, &grad_logits)?;
        match &mut total {
            None => total = Some(grads),
            Some(acc) => {
                for (a, g) in acc.iter_mut().zip(&grads) {
                    for (av, gv) in a.data.iter_mut().zip(&g.data) {
                        *av += gv;
                    }
                }
            }
        }
    }
    let b = batch.len() as f64;
    let mut grads = total.expect("nonempty batch");
    for g in &mut grads {
        for v in &mut g.data {
            *v /= b;
        }
    }
    Ok((loss_sum / b, grads))
}

/// Half-cosine learning-rate decay from `base` (first epoch) to a tenth of
/// it (last epoch).
fn cosine_lr(base: f64, epoch: usize, epochs: usize) -> f64 {
    if epochs <= 1 {
        return base;
    }
    let floor = base / 10.0;
    let t = (epoch - 1) as f64 / (epochs - 1) as f64;
    floor + 0.5 * (base - floor) * (1.0 + (std::f64::consts::PI * t).cos())
}

/// Mean loss of `params` over tuples, without gradients or augmentation.
fn eval_loss(params: &ModelParams, tuples: &[&MaskTuple]) -> Result<f64, MaskPredError> {
    let mut sum = 0.0;
    for t in tuples {
        let (input, target) = tuple_tensors(t, false)?;
        let cache = forward_cached(params, &input)?;
        sum += bce_mean(&cache.probs, &target);
    }
    Ok(sum / tuples.len() as f64)
}

/// Adam with bias correction; state per parameter tensor.
struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    fn new(lr: f64, params: &ModelParams) -> Adam {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: params.tensors.iter().map(|(_, t)| vec![0.0; t.numel()]).collect(),
            v: params.tensors.iter().map(|(_, t)| vec![0.0; t.numel()]).collect(),
        }
    }

    fn step(&mut self, params: &mut ModelParams, grads: &[Tensor]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (i, (_, tensor)) in params.tensors.iter_mut().enumerate() {
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for (k, g) in grads[i].data.iter().enumerate() {
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * g;
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * g * g;
                let m_hat = m[k] / bc1;
                let v_hat = v[k] / bc2;
                tensor.data[k] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

/// Train on in-memory tuples. Splits off a validation set, runs seeded
/// shuffled mini-batches under Adam, logs one CSV row per epoch (epoch 0 is
/// the untrained model) and returns the parameters of the best-validation
/// epoch.
pub fn train_tuples(
    tuples: &[MaskTuple],
    arch: &Arch,
    cfg: &TrainConfig,
) -> Result<TrainResult, MaskPredError> {
    cfg.validate()?;
    if tuples.len() < 2 {
        return Err(MaskPredError::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = super::net::init_params(arch, rng.gen())?;

    // Seeded split: shuffle indices, earliest block becomes validation.
    let n = tuples.len();
    let mut indices: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        indices.swap(i, j);
    }
    let val_n = ((n as f64 * cfg.validation_fraction).ceil() as usize).clamp(1, n - 1);
    let val: Vec<&MaskTuple> = indices[..val_n].iter().map(|i| &tuples[*i]).collect();
    let mut train_idx: Vec<usize> = indices[val_n..].to_vec();
    let train_refs: Vec<&MaskTuple> = train_idx.iter().map(|i| &tuples[*i]).collect();

    let mut log = String::from("epoch,train_loss,val_loss\n");
    let train_loss0 = eval_loss(&params, &train_refs)?;
    let val_loss0 = eval_loss(&params, &val)?;
    log.push_str(&format!("0,{train_loss0:.6},{val_loss0:.6}\n"));
    eprintln!("epoch 0/{}: train {train_loss0:.6} val {val_loss0:.6}", cfg.epochs);
    let mut best = (params.clone(), val_loss0, 0usize);

    let mut adam = Adam::new(cfg.learning_rate, &params);
    for epoch in 1..=cfg.epochs {
        adam.lr = cosine_lr(cfg.learning_rate, epoch, cfg.epochs);
        for i in (1..train_idx.len()).rev() {
            let j = rng.gen_range(0..=i);
            train_idx.swap(i, j);
        }
        let mut epoch_loss = 0.0;
        let mut seen = 0usize;
        for chunk in train_idx.chunks(cfg.batch_size) {
            let batch: Vec<(Tensor, Tensor)> = chunk
                .iter()
                .map(|i| {
                    let swap = cfg.swap_augment && rng.gen_bool(0.5);
                    tuple_tensors(&tuples[*i], swap)
                })
                .collect::<Result<_, _>>()?;
            let (loss, grads) = backward(&params, &batch)?;
            adam.step(&mut params, &grads);
            epoch_loss += loss * chunk.len() as f64;
            seen += chunk.len();
        }
        let train_loss = epoch_loss / seen as f64;
        let val_loss = eval_loss(&params, &val)?;
        log.push_str(&format!("{epoch},{train_loss:.6},{val_loss:.6}\n"));
        eprintln!("epoch {epoch}/{}: train {train_loss:.6} val {val_loss:.6}", cfg.epochs);
        if val_loss < best.1 {
            best = (params.clone(), val_loss, epoch);
        }
    }

    Ok(TrainResult {
        params: best.0,
        log_csv: log,
        best_epoch: best.2,
        best_val_loss: best.1,
    })
}

/// Train from a dataset file with the default architecture for its camera.
pub fn train(dataset_path: &std::path::Path, cfg: &TrainConfig) -> Result<TrainResult, MaskPredError> {
    let bytes = std::fs::read(dataset_path)?;
    let (cam, tuples) = dataset_parse(&bytes)?;
    let arch = Arch::small(cam.width, cam.height);
    train_tuples(&tuples, &arch, cfg)
}
