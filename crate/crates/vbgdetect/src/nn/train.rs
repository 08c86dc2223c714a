//! SGD-with-momentum training loop and the epoch history file.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::Array3;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{prepare_input, CnnModel, Network};
use crate::comat::CoMatTensor;
use crate::error::{Error, Result};

/// Optimizer settings. Defaults follow the detector's training recipe:
/// learning rate 0.001, momentum 0.9, batch size 20, 50 epochs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Stop once validation accuracy reaches this value; `None` always runs
    /// the full epoch budget.
    pub stop_at_val_acc: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            momentum: 0.9,
            batch_size: 20,
            epochs: 50,
            seed: 0,
            stop_at_val_acc: Some(1.0),
        }
    }
}

/// One epoch of history. Both splits are measured in inference mode
/// (dropout off) after the epoch's updates.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

fn mix(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn prepare_set(
    model: &CnnModel,
    set: &[(CoMatTensor, bool)],
) -> Result<Vec<(Array3<f32>, f32)>> {
    set.iter()
        .map(|(t, y)| Ok((prepare_input(&model.arch, t)?, if *y { 1.0 } else { 0.0 })))
        .collect()
}

fn eval_metrics(net: &Network<f32>, set: &[(Array3<f32>, f32)]) -> Result<(f64, f64)> {
    if set.is_empty() {
        return Ok((0.0, 0.0));
    }
    let per: Vec<(f64, bool)> = set
        .par_iter()
        .map(|(x, y)| -> Result<(f64, bool)> {
            let logit = net.forward_eval(x)?;
            let loss = Network::bce_loss(logit, *y) as f64;
            let correct = (logit > 0.0) == (*y > 0.5);
            Ok((loss, correct))
        })
        .collect::<Result<_>>()?;
    let loss = per.iter().map(|(l, _)| l).sum::<f64>() / per.len() as f64;
    let acc = per.iter().filter(|(_, c)| *c).count() as f64 / per.len() as f64;
    Ok((loss, acc))
}

/// Trains `model` in place and returns the per-epoch history. The run is a
/// pure function of `(weights, data, cfg.seed)`: shuffling, dropout masks
/// and batch reductions are all fixed-order.
pub fn train(
    model: &mut CnnModel,
    train_set: &[(CoMatTensor, bool)],
    val_set: &[(CoMatTensor, bool)],
    cfg: &TrainConfig,
) -> Result<Vec<EpochStats>> {
    if train_set.is_empty() {
        return Err(Error::invalid("empty training set"));
    }
    if cfg.batch_size == 0 {
        return Err(Error::invalid("batch size must be >= 1"));
    }
    if !(cfg.learning_rate >= 0.0) {
        return Err(Error::invalid("learning rate must be >= 0"));
    }
    let pos = train_set.iter().filter(|(_, y)| *y).count();
    if pos == 0 || pos == train_set.len() {
        return Err(Error::invalid(
            "single-class dataset: training needs both labels",
        ));
    }

    let train_data = prepare_set(model, train_set)?;
    let val_data = prepare_set(model, val_set)?;

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(mix(cfg.seed, 0x5348_5546));
    let mut velocity = model.net.zero_gradients();
    let lr = cfg.learning_rate as f32;
    let momentum = cfg.momentum as f32;
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..train_data.len()).collect();
        order.shuffle(&mut shuffle_rng);

        for batch in order.chunks(cfg.batch_size) {
            // Per-sample gradients in parallel; dropout streams are keyed by
            // (epoch, dataset index) so scheduling cannot change them.
            let results: Vec<super::model::Gradients<f32>> = batch
                .par_iter()
                .map(|&idx| {
                    let (x, y) = &train_data[idx];
                    let mut rng = ChaCha8Rng::seed_from_u64(mix(
                        cfg.seed ^ 0x44_524f_50,
                        ((epoch as u64) << 32) | idx as u64,
                    ));
                    let cache = model.net.forward_train(x, &mut rng)?;
                    model.net.backward(&cache, *y)
                })
                .collect::<Result<_>>()?;

            let mut acc = model.net.zero_gradients();
            for g in &results {
                acc.add_assign(g);
            }
            acc.scale(1.0f32 / results.len() as f32);
            model.net.apply_momentum_step(&acc, &mut velocity, lr, momentum);
        }

        let (train_loss, train_acc) = eval_metrics(&model.net, &train_data)?;
        let (val_loss, val_acc) = eval_metrics(&model.net, &val_data)?;
        let stats = EpochStats {
            epoch: epoch + 1,
            train_loss,
            train_acc,
            val_loss,
            val_acc,
        };
        history.push(stats);

        if let Some(target) = cfg.stop_at_val_acc {
            if !val_data.is_empty() && val_acc >= target {
                break;
            }
        }
    }
    Ok(history)
}

/// Writes `epoch,train_loss,train_acc,val_loss,val_acc` rows.
pub fn write_history_csv(path: impl AsRef<Path>, history: &[EpochStats]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "epoch,train_loss,train_acc,val_loss,val_acc").map_err(io)?;
    for s in history {
        writeln!(
            w,
            "{},{},{},{},{}",
            s.epoch, s.train_loss, s.train_acc, s.val_loss, s.val_acc
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_history_csv(path: impl AsRef<Path>) -> Result<Vec<EpochStats>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::format(path, "empty file"))?
        .map_err(|e| Error::io(path, e))?;
    if header != "epoch,train_loss,train_acc,val_loss,val_acc" {
        return Err(Error::format(path, "unexpected header"));
    }
    let mut out = Vec::new();
    for line in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(Error::format(path, format!("bad row: {line}")));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse().map_err(|e| Error::format(path, format!("{e}")))
        };
        out.push(EpochStats {
            epoch: f[0]
                .parse()
                .map_err(|e| Error::format(path, format!("{e}")))?,
            train_loss: parse(f[1])?,
            train_acc: parse(f[2])?,
            val_loss: parse(f[3])?,
            val_acc: parse(f[4])?,
        });
    }
    Ok(out)
}
