use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::{is_training_session, DgRec, SocialContext};
use crate::eval::evaluate_model;
use crate::graphstore::SocialGraph;
use crate::ingest::{Session, SessionStore};
use crate::rng::{self, streams};
use crate::tensor::{write_checkpoint, Adam, AdamConfig, ParamGrads, ParamStore, Real, Tape};
use crate::{Error, Result};

pub const METRIC_LOG_HEADER: &str = "epoch,step,split,loss,recall@20,ndcg";

/// Sessions evaluated concurrently before their gradients are summed.
const CHUNK: usize = 16;

#[derive(Clone, Copy, Debug)]
pub struct TrainData<'a> {
    pub train: &'a SessionStore,
    pub valid: Option<&'a SessionStore>,
    pub graph: &'a SocialGraph,
    /// Where friends' recent sessions are found while training.
    pub train_history: &'a SessionStore,
    /// Where friends' recent sessions are found while validating.
    pub eval_history: &'a SessionStore,
}

#[derive(Clone, Debug, Default)]
pub struct TrainOptions {
    /// Stop after this many optimiser steps.
    pub max_steps: Option<u64>,
    /// Write `last.ckpt` each epoch and `best.ckpt` on improvement.
    pub checkpoint_dir: Option<PathBuf>,
    /// Keep the final parameters instead of the best validated ones.
    pub keep_last: bool,
}

/// One row of the metric log.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub step: u64,
    pub split: &'static str,
    pub loss: f64,
    pub recall: Option<f64>,
    pub ndcg: Option<f64>,
}

impl fmt::Display for EpochLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        write!(
            f,
            "{},{},{},{},{},{}",
            self.epoch,
            self.step,
            self.split,
            self.loss,
            opt(self.recall),
            opt(self.ndcg)
        )
    }
}

#[derive(Clone, Debug, Default)]
pub struct TrainReport {
    pub log: Vec<EpochLog>,
    pub steps: u64,
    pub epochs: usize,
    pub best_epoch: Option<usize>,
    pub best_recall: Option<f64>,
    pub stopped_early: bool,
}

impl TrainReport {
    pub fn write_log<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{METRIC_LOG_HEADER}")?;
        for row in &self.log {
            writeln!(w, "{row}")?;
        }
        w.flush()
    }

    /// Mean training loss per position of the last epoch.
    pub fn final_train_loss(&self) -> Option<f64> {
        self.log.iter().rev().find(|r| r.split == "train").map(|r| r.loss)
    }
}

/// Fits `model` on `data.train`: seeded per-epoch shuffles, minibatches of
/// whole sessions, Adam with step decay, validation after each epoch and
/// early stopping on validation Recall@20.
pub fn train<T: Real>(model: &mut DgRec<T>, data: &TrainData<'_>, opts: &TrainOptions) -> Result<TrainReport> {
    let cfg = model.arch.config.clone();
    let sessions: Vec<&Session> = data.train.iter().filter(|s| is_training_session(s)).collect();
    if sessions.is_empty() {
        return Err(Error::EmptyTrain);
    }
    let mut adam = Adam::new(
        AdamConfig {
            learning_rate: cfg.learning_rate,
            decay: cfg.decay,
            decay_interval: cfg.decay_interval,
            ..AdamConfig::default()
        },
        &model.params,
    );
    let ctx = SocialContext {
        graph: data.graph,
        history: data.train_history,
    };
    if let Some(dir) = &opts.checkpoint_dir {
        std::fs::create_dir_all(dir)?;
    }

    let mut report = TrainReport::default();
    let mut best: Option<(f64, ParamStore<T>)> = None;
    let mut stale = 0;
    let mut order: Vec<usize> = (0..sessions.len()).collect();
    'epochs: for epoch in 1..=cfg.max_epochs {
        order.sort_unstable();
        order.shuffle(&mut rng::derive(cfg.seed, streams::SHUFFLE, &[epoch as u64]));
        let mut epoch_loss = 0.0;
        let mut epoch_positions = 0usize;
        for batch in order.chunks(cfg.batch) {
            let mut grads = ParamGrads::zeros_like(&model.params);
            let mut positions = 0usize;
            for chunk in batch.chunks(CHUNK) {
                let parts: Vec<Option<(ParamGrads<T>, f64, usize)>> = chunk
                    .par_iter()
                    .map(|&sid| session_gradient(model, sessions[sid], sid, epoch, ctx))
                    .collect::<Result<_>>()?;
                for (g, loss, n) in parts.into_iter().flatten() {
                    grads.accumulate(&g);
                    epoch_loss += loss;
                    positions += n;
                }
            }
            if positions == 0 {
                continue;
            }
            epoch_positions += positions;
            grads.scale(T::of(1.0 / positions as f64));
            adam.step(&mut model.params, &grads)?;
            report.steps += 1;
            if opts.max_steps.is_some_and(|m| report.steps >= m) {
                report.epochs = epoch;
                finish_epoch(model, data, &mut report, epoch, epoch_loss, epoch_positions, &mut best, &mut stale)?;
                write_checkpoints(model, &adam, opts, &best, epoch)?;
                break 'epochs;
            }
        }
        report.epochs = epoch;
        let improved = finish_epoch(model, data, &mut report, epoch, epoch_loss, epoch_positions, &mut best, &mut stale)?;
        write_checkpoints(model, &adam, opts, &best, if improved { epoch } else { 0 })?;
        if data.valid.is_some() && stale >= cfg.patience {
            report.stopped_early = true;
            break;
        }
    }
    if let Some((recall, params)) = best {
        report.best_recall = Some(recall);
        if !opts.keep_last {
            model.params = params;
        }
    }
    Ok(report)
}

fn session_gradient<T: Real>(
    model: &DgRec<T>,
    session: &Session,
    sid: usize,
    epoch: usize,
    ctx: SocialContext<'_>,
) -> Result<Option<(ParamGrads<T>, f64, usize)>> {
    let seed = model.arch.config.seed;
    let key = [epoch as u64, sid as u64];
    let mut sample_rng = rng::derive(seed, streams::SAMPLING, &key);
    let mut dropout_rng = rng::derive(seed, streams::DROPOUT, &key);
    let mut tape = Tape::with_params(&model.params);
    let Some((loss, n)) = model
        .arch
        .session_loss(&mut tape, session, ctx, &mut sample_rng, &mut dropout_rng, true)?
    else {
        return Ok(None);
    };
    let value = tape.value(loss).item().f64();
    let grads = tape.backward(loss)?.param_grads(&model.params);
    Ok(Some((grads, value, n)))
}

#[allow(clippy::too_many_arguments)]
fn finish_epoch<T: Real>(
    model: &DgRec<T>,
    data: &TrainData<'_>,
    report: &mut TrainReport,
    epoch: usize,
    loss: f64,
    positions: usize,
    best: &mut Option<(f64, ParamStore<T>)>,
    stale: &mut usize,
) -> Result<bool> {
    report.log.push(EpochLog {
        epoch,
        step: report.steps,
        split: "train",
        loss: loss / positions.max(1) as f64,
        recall: None,
        ndcg: None,
    });
    let Some(valid) = data.valid else {
        return Ok(false);
    };
    let ctx = SocialContext {
        graph: data.graph,
        history: data.eval_history,
    };
    let summary = evaluate_model(model, valid, ctx, model.arch.config.seed)?;
    report.log.push(EpochLog {
        epoch,
        step: report.steps,
        split: "valid",
        loss: summary.loss,
        recall: Some(summary.recall),
        ndcg: Some(summary.ndcg),
    });
    if best.as_ref().map_or(true, |(r, _)| summary.recall > *r) {
        *best = Some((summary.recall, model.params.clone()));
        report.best_epoch = Some(epoch);
        *stale = 0;
        Ok(true)
    } else {
        *stale += 1;
        Ok(false)
    }
}

fn write_checkpoints<T: Real>(
    model: &DgRec<T>,
    adam: &Adam<T>,
    opts: &TrainOptions,
    best: &Option<(f64, ParamStore<T>)>,
    improved_epoch: usize,
) -> Result<()> {
    let Some(dir) = &opts.checkpoint_dir else {
        return Ok(());
    };
    let mut w = BufWriter::new(File::create(dir.join("last.ckpt"))?);
    write_checkpoint(&mut w, &model.params, Some(adam))?;
    w.flush()?;
    if improved_epoch > 0 {
        if let Some((_, params)) = best {
            let mut w = BufWriter::new(File::create(dir.join("best.ckpt"))?);
            write_checkpoint(&mut w, params, None::<&Adam<T>>)?;
            w.flush()?;
        }
    }
    Ok(())
}
