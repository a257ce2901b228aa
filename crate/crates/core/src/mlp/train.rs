use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::adam::{AdamConfig, AdamState};
use super::network::{accumulate_backward, forward_into, loss_mse, BackwardScratch, ForwardCache, Gradients, MlpWeights, DFAOIT_DIMS};
use super::MlpError;

/// Examples per parallel work item. Fixed so gradient sums are reduced in the
/// same order whatever the thread count.
const GRAD_CHUNK: usize = 512;

/// Dense row-major input/target matrix.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingSet {
    in_dim: usize,
    out_dim: usize,
    inputs: Vec<f64>,
    targets: Vec<f64>,
}

impl TrainingSet {
    pub fn new(in_dim: usize, out_dim: usize) -> Self {
        Self { in_dim, out_dim, inputs: Vec::new(), targets: Vec::new() }
    }

    pub fn with_capacity(in_dim: usize, out_dim: usize, n: usize) -> Self {
        Self { in_dim, out_dim, inputs: Vec::with_capacity(n * in_dim), targets: Vec::with_capacity(n * out_dim) }
    }

    /// # Panics
    ///
    /// Panics if the row lengths do not match the set's dimensions.
    pub fn push(&mut self, input: &[f64], target: &[f64]) {
        assert_eq!(input.len(), self.in_dim, "input width");
        assert_eq!(target.len(), self.out_dim, "target width");
        self.inputs.extend_from_slice(input);
        self.targets.extend_from_slice(target);
    }

    pub fn len(&self) -> usize {
        if self.in_dim == 0 {
            0
        } else {
            self.inputs.len() / self.in_dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.in_dim..(i + 1) * self.in_dim]
    }

    pub fn target(&self, i: usize) -> &[f64] {
        &self.targets[i * self.out_dim..(i + 1) * self.out_dim]
    }
}

/// Arithmetic width used for training.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[non_exhaustive]
pub enum Precision {
    #[default]
    F64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub layer_dims: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    /// Seeds the per-epoch shuffle.
    pub seed: u64,
    pub shuffle: bool,
    pub precision: Precision,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            layer_dims: DFAOIT_DIMS.to_vec(),
            epochs: 300,
            batch_size: 4096,
            seed: 0,
            shuffle: true,
            precision: Precision::F64,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    /// Full-scale schedule: 3000 epochs.
    pub fn long_schedule() -> Self {
        Self { epochs: 3000, ..Self::default() }
    }

    fn validate(&self, set: &TrainingSet) -> Result<(), MlpError> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(MlpError::InvalidConfig("epochs and batch_size must be at least 1".into()));
        }
        if self.layer_dims.len() < 2 || self.layer_dims.iter().any(|&d| d == 0) {
            return Err(MlpError::InvalidConfig(format!("bad layer widths {:?}", self.layer_dims)));
        }
        let (first, last) = (self.layer_dims[0], *self.layer_dims.last().unwrap());
        if first != set.in_dim() || last != set.out_dim() {
            return Err(MlpError::DimMismatch {
                expected: self.layer_dims.clone(),
                found: vec![set.in_dim(), set.out_dim()],
            });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochStats {
    /// 1-based.
    pub epoch: usize,
    /// Mean loss over the epoch's mini-batches, measured before each update.
    pub train_mse: f64,
    pub val_mse: Option<f64>,
    pub steps: usize,
}

fn chunk_pass(net: &MlpWeights, set: &TrainingSet, indices: &[usize]) -> (Gradients, f64) {
    let mut grads = Gradients::zeros_like(net);
    let mut cache = ForwardCache::for_net(net);
    let mut scratch = BackwardScratch::for_net(net);
    let mut loss = 0.0;
    for &i in indices {
        forward_into(net, set.input(i), &mut cache);
        loss += accumulate_backward(net, &cache, set.target(i), &mut grads, &mut scratch);
    }
    (grads, loss)
}

/// Mean per-example loss of `net` over `set`.
pub fn evaluate(net: &MlpWeights, set: &TrainingSet) -> f64 {
    if set.is_empty() {
        return 0.0;
    }
    let indices: Vec<usize> = (0..set.len()).collect();
    let partials: Vec<f64> = indices
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut cache = ForwardCache::for_net(net);
            chunk
                .iter()
                .map(|&i| {
                    forward_into(net, set.input(i), &mut cache);
                    loss_mse(cache.output(), set.target(i))
                })
                .sum::<f64>()
        })
        .collect();
    partials.iter().sum::<f64>() / set.len() as f64
}

/// Mini-batch Adam on `train_set`, He-uniform initialized from `init_seed`.
///
/// Bit-reproducible for fixed inputs, independent of the rayon pool size.
pub fn train(
    train_set: &TrainingSet,
    val_set: Option<&TrainingSet>,
    config: &TrainConfig,
    init_seed: u64,
) -> Result<(MlpWeights, Vec<EpochStats>), MlpError> {
    if train_set.is_empty() {
        return Err(MlpError::EmptyDataset);
    }
    config.validate(train_set)?;
    let mut net = MlpWeights::he_uniform(&config.layer_dims, init_seed);
    let mut adam = AdamState::new(&net, config.adam);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        let mut epoch_loss = 0.0;
        let mut steps = 0;
        for batch in order.chunks(config.batch_size) {
            let partials: Vec<(Gradients, f64)> =
                batch.par_chunks(GRAD_CHUNK).map(|chunk| chunk_pass(&net, train_set, chunk)).collect();
            let mut parts = partials.into_iter();
            let (mut grads, mut loss) = parts.next().expect("non-empty batch");
            for (g, l) in parts {
                grads.add_assign(&g);
                loss += l;
            }
            grads.scale(1.0 / batch.len() as f64);
            adam.step(&mut net, &grads);
            epoch_loss += loss;
            steps += 1;
        }
        if !net.is_finite() {
            return Err(MlpError::Diverged { epoch });
        }
        history.push(EpochStats {
            epoch,
            train_mse: epoch_loss / train_set.len() as f64,
            val_mse: val_set.filter(|v| !v.is_empty()).map(|v| evaluate(&net, v)),
            steps,
        });
    }
    Ok((net, history))
}

/// `epoch,train_mse,val_mse` with one row per epoch.
pub fn history_csv(history: &[EpochStats]) -> String {
    let mut out = String::from("epoch,train_mse,val_mse\n");
    for h in history {
        let val = h.val_mse.map(|v| format!("{v:.9e}")).unwrap_or_default();
        out.push_str(&format!("{},{:.9e},{}\n", h.epoch, h.train_mse, val));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    /// Targets are a fixed affine map of the inputs squashed into (0, 1).
    fn linear_task(n: usize, seed: u64) -> TrainingSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut set = TrainingSet::new(10, 3);
        for _ in 0..n {
            let x: Vec<f64> = (0..10).map(|_| rng.gen::<f64>()).collect();
            let t = [
                0.2 + 0.05 * (x[0] + x[1] + x[2]),
                0.8 - 0.3 * x[3] + 0.1 * x[9],
                0.1 + 0.06 * x.iter().sum::<f64>(),
            ];
            set.push(&x, &t);
        }
        set
    }

    fn small_config(epochs: usize, batch: usize) -> TrainConfig {
        TrainConfig { epochs, batch_size: batch, seed: 1, ..Default::default() }
    }

    #[test]
    fn smoke_convergence() {
        let set = linear_task(1000, 2);
        let initial = evaluate(&MlpWeights::he_uniform(&DFAOIT_DIMS, 3), &set);
        let (net, history) = train(&set, None, &small_config(50, 64), 3).unwrap();
        let final_mse = evaluate(&net, &set);
        assert_eq!(history.len(), 50);
        assert!(final_mse < initial, "{final_mse} vs {initial}");
        assert!(final_mse < 0.1 * initial, "{final_mse} vs {initial}");
    }

    #[test]
    fn one_step_per_epoch_when_batch_covers_dataset() {
        let set = linear_task(100, 4);
        let (_, history) = train(&set, None, &small_config(3, 100), 0).unwrap();
        assert!(history.iter().all(|h| h.steps == 1));
        let (_, history) = train(&set, None, &small_config(2, 5000), 0).unwrap();
        assert!(history.iter().all(|h| h.steps == 1));
        let (_, history) = train(&set, None, &small_config(1, 30), 0).unwrap();
        assert_eq!(history[0].steps, 4);
    }

    #[test]
    fn training_is_reproducible() {
        let set = linear_task(700, 5);
        let val = linear_task(50, 6);
        let a = train(&set, Some(&val), &small_config(4, 128), 9).unwrap();
        let b = train(&set, Some(&val), &small_config(4, 128), 9).unwrap();
        assert_eq!(a, b);
        assert!(a.1.iter().all(|h| h.val_mse.is_some()));
    }

    #[test]
    fn thread_count_does_not_change_result() {
        // batch larger than one gradient chunk so several partial sums are reduced
        let set = linear_task(3000, 7);
        let cfg = small_config(2, 2000);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| train(&set, None, &cfg, 1).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(train(&TrainingSet::new(10, 3), None, &small_config(1, 1), 0), Err(MlpError::EmptyDataset)));
        let set = linear_task(10, 0);
        assert!(matches!(train(&set, None, &small_config(0, 1), 0), Err(MlpError::InvalidConfig(_))));
        assert!(matches!(train(&set, None, &small_config(1, 0), 0), Err(MlpError::InvalidConfig(_))));
        let cfg = TrainConfig { layer_dims: vec![4, 3], ..small_config(1, 1) };
        assert!(matches!(train(&set, None, &cfg, 0), Err(MlpError::DimMismatch { .. })));
    }

    #[test]
    fn history_csv_rows() {
        let h = [
            EpochStats { epoch: 1, train_mse: 0.5, val_mse: Some(0.25), steps: 1 },
            EpochStats { epoch: 2, train_mse: 0.125, val_mse: None, steps: 1 },
        ];
        let csv = history_csv(&h);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1], "1,5.000000000e-1,2.500000000e-1");
        assert_eq!(lines[2], "2,1.250000000e-1,");
    }
}
