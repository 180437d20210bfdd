use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::losses::{completion_bce, completion_bce_grad, dpo_loss, dpo_loss_grad, progress_nll, progress_nll_grad};
use crate::error::{Error, Result};
use crate::grid;
use crate::nn::{centered, log_softmax, sgd_step, Mlp};
use crate::reward::RewardModality;
use crate::rng;
use crate::trajectory::{ContrastivePair, Preference, ProgressSample};

/// Contrastive answer classes, in logit order.
pub const CONTRASTIVE_ANSWERS: [Preference; 3] = [Preference::Later, Preference::Earlier, Preference::Ambiguous];

fn answer_class(p: Preference) -> usize {
    match p {
        Preference::Later => 0,
        Preference::Earlier => 1,
        Preference::Ambiguous => 2,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeadConfig {
    pub hidden_width: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// DPO temperature (contrastive heads only).
    pub beta: f64,
    pub seed: u64,
}

impl Default for HeadConfig {
    fn default() -> Self {
        Self {
            hidden_width: 32,
            learning_rate: 0.1,
            epochs: 200,
            batch_size: 32,
            beta: 0.1,
            seed: 0,
        }
    }
}

impl HeadConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_width == 0 || self.batch_size == 0 {
            return Err(Error::Config("hidden_width and batch_size must be positive".into()));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!("beta must be > 0, got {}", self.beta)));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

/// Training data for a reward head.
#[derive(Debug, Clone, PartialEq)]
pub enum HeadDataset {
    /// Progress-labelled samples, used by progress and completion heads.
    Samples(Vec<ProgressSample>),
    /// Temporal pairs, used by contrastive heads.
    Pairs(Vec<ContrastivePair>),
}

impl HeadDataset {
    pub fn len(&self) -> usize {
        match self {
            HeadDataset::Samples(s) => s.len(),
            HeadDataset::Pairs(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A one-hidden-layer reward head. Progress heads read the observation and
/// the episode's first observation (progress is relative to the start),
/// completion heads read the observation, and contrastive heads read
/// `[previous, current, anchor]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardHead {
    pub kind: RewardModality,
    pub hidden_width: usize,
    pub input_dim: usize,
    #[serde(rename = "weights")]
    params: Vec<f64>,
    pub train_loss: f64,
    pub seed: u64,
    #[serde(skip)]
    net: Option<Mlp>,
}

pub fn output_arity(kind: RewardModality) -> usize {
    match kind {
        RewardModality::Progress => grid::LEVELS,
        RewardModality::Completion => 1,
        RewardModality::Contrastive => CONTRASTIVE_ANSWERS.len(),
    }
}

/// Input dimension of a head over observations of dimension `obs_dim`.
pub fn input_dim(kind: RewardModality, obs_dim: usize) -> usize {
    match kind {
        RewardModality::Progress => 2 * obs_dim,
        RewardModality::Completion => obs_dim,
        RewardModality::Contrastive => 3 * obs_dim,
    }
}

/// Assembles a head input; anchors default to the current observation.
pub fn head_input(kind: RewardModality, current: &[f64], previous: Option<&[f64]>, anchor: Option<&[f64]>) -> Vec<f64> {
    let anchor = anchor.unwrap_or(current);
    let raw: Vec<f64> = match kind {
        RewardModality::Completion => current.to_vec(),
        RewardModality::Progress => [current, anchor].concat(),
        RewardModality::Contrastive => [previous.unwrap_or(current), current, anchor].concat(),
    };
    centered(&raw)
}

impl RewardHead {
    fn build(kind: RewardModality, hidden_width: usize, input_dim: usize, seed: u64) -> Self {
        let sizes = [input_dim, hidden_width, output_arity(kind)];
        let net = Mlp::new(&sizes, 1.0, &mut rng::stream(seed, 0x4EAD));
        Self {
            kind,
            hidden_width,
            input_dim,
            params: net.params().to_vec(),
            train_loss: f64::NAN,
            seed,
            net: Some(net),
        }
    }

    fn sizes(&self) -> [usize; 3] {
        [self.input_dim, self.hidden_width, output_arity(self.kind)]
    }

    fn net(&self) -> &Mlp {
        self.net.as_ref().expect("head network is materialised on construction and load")
    }

    pub fn weights(&self) -> &[f64] {
        &self.params
    }

    /// Raw output logits.
    pub fn logits(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_dim {
            return Err(Error::Shape(format!(
                "{} head expects {} inputs, got {}",
                self.kind,
                self.input_dim,
                input.len()
            )));
        }
        Ok(self.net().forward(input))
    }

    /// Legal reward for one input: the argmax grid value (progress), strict
    /// `sigmoid > 0.5` (completion) or the argmax answer (contrastive).
    pub fn predict(&self, input: &[f64]) -> Result<f64> {
        let z = self.logits(input)?;
        Ok(match self.kind {
            RewardModality::Progress => grid::value(argmax(&z)),
            RewardModality::Completion => {
                if z[0] > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            RewardModality::Contrastive => CONTRASTIVE_ANSWERS[argmax(&z)].value(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::io(path, e.into()))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut head: RewardHead = serde_json::from_str(text).map_err(|source| Error::Parse { line: 1, source })?;
        let net = Mlp::from_params(head.sizes().to_vec(), head.params.clone())
            .ok_or_else(|| Error::Config("checkpoint weights do not match kind, input_dim and hidden_width".into()))?;
        if !net.is_finite() {
            return Err(Error::Config("checkpoint contains non-finite weights".into()));
        }
        head.net = Some(net);
        Ok(head)
    }
}

/// First index of the maximum.
fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

enum Example {
    Progress { x: Vec<f64>, label: f64 },
    Completion { x: Vec<f64>, label: f64 },
    Contrastive { x: Vec<f64>, winner: usize, ref_logp: [f64; 3] },
}

fn examples(kind: RewardModality, data: &HeadDataset, reference: &Mlp) -> Result<Vec<Example>> {
    let mismatch = || Error::Config(format!("dataset type does not match a {kind} head"));
    match (kind, data) {
        (RewardModality::Progress, HeadDataset::Samples(s)) => s
            .iter()
            .map(|s| {
                grid::class_of(s.progress_label).ok_or(Error::Label(s.progress_label))?;
                Ok(Example::Progress {
                    x: head_input(kind, &s.observation, None, s.anchor.as_deref()),
                    label: s.progress_label,
                })
            })
            .collect(),
        (RewardModality::Completion, HeadDataset::Samples(s)) => Ok(s
            .iter()
            .map(|s| Example::Completion {
                x: head_input(kind, &s.observation, None, None),
                label: if s.progress_label >= 1.0 { 1.0 } else { 0.0 },
            })
            .collect()),
        (RewardModality::Contrastive, HeadDataset::Pairs(p)) => Ok(p
            .iter()
            .map(|p| {
                let x = head_input(kind, &p.later, Some(&p.earlier), p.anchor.as_deref());
                let lp = log_softmax(&reference.forward(&x));
                Example::Contrastive {
                    x,
                    winner: answer_class(p.preferred_label),
                    ref_logp: [lp[0], lp[1], lp[2]],
                }
            })
            .collect()),
        _ => Err(mismatch()),
    }
}

/// Dispreferred answers: the opposite sign, or both signs for ambiguous pairs.
fn losers(winner: usize) -> &'static [usize] {
    match winner {
        0 => &[1],
        1 => &[0],
        _ => &[0, 1],
    }
}

/// Loss of one example and its gradient with respect to the logits.
fn loss_and_grad(ex: &Example, z: &[f64], beta: f64) -> Result<(f64, Vec<f64>)> {
    match ex {
        Example::Progress { label, .. } => Ok((progress_nll(z, *label)?, progress_nll_grad(z, *label)?)),
        Example::Completion { label, .. } => Ok((completion_bce(z[0], *label), vec![completion_bce_grad(z[0], *label)])),
        Example::Contrastive { winner, ref_logp, .. } => {
            let lp = log_softmax(z);
            let p: Vec<f64> = lp.iter().map(|l| l.exp()).collect();
            let ls = losers(*winner);
            let scale = 1.0 / ls.len() as f64;
            let mut loss = 0.0;
            let mut d_logp = [0.0; 3];
            for &l in ls {
                loss += scale * dpo_loss(lp[*winner], lp[l], ref_logp[*winner], ref_logp[l], beta)?;
                let (gw, gl) = dpo_loss_grad(lp[*winner], lp[l], ref_logp[*winner], ref_logp[l], beta)?;
                d_logp[*winner] += scale * gw;
                d_logp[l] += scale * gl;
            }
            // d logp_c / d z_j = [c == j] - p_j
            let total: f64 = d_logp.iter().sum();
            let grad = (0..3).map(|j| d_logp[j] - p[j] * total).collect();
            Ok((loss, grad))
        }
    }
}

fn input_of(ex: &Example) -> &[f64] {
    match ex {
        Example::Progress { x, .. } | Example::Completion { x, .. } | Example::Contrastive { x, .. } => x,
    }
}

fn mean_loss(net: &Mlp, examples: &[Example], beta: f64) -> Result<f64> {
    let mut total = 0.0;
    for ex in examples {
        total += loss_and_grad(ex, &net.forward(input_of(ex)), beta)?.0;
    }
    Ok(total / examples.len() as f64)
}

/// Trains a head of `kind` with plain minibatch gradient descent. For
/// contrastive heads the frozen initialisation is the DPO reference.
pub fn train_head(kind: RewardModality, data: &HeadDataset, config: &HeadConfig) -> Result<RewardHead> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::Config("cannot train a reward head on an empty dataset".into()));
    }
    let obs_dim = match data {
        HeadDataset::Samples(s) => s[0].observation.len(),
        HeadDataset::Pairs(p) => p[0].later.len(),
    };
    let mut head = RewardHead::build(kind, config.hidden_width, input_dim(kind, obs_dim), config.seed);
    let reference = head.net().clone();
    let examples = examples(kind, data, &reference)?;
    if examples.iter().any(|e| input_of(e).len() != head.input_dim) {
        return Err(Error::Shape("observations in the dataset differ in length".into()));
    }
    let mut net = reference.clone();
    let mut grads = vec![0.0; net.num_params()];
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut shuffle = rng::stream(config.seed, 0x5E1F);
    for epoch in 0..config.epochs {
        order.shuffle(&mut shuffle);
        for batch in order.chunks(config.batch_size) {
            grads.iter_mut().for_each(|g| *g = 0.0);
            let inv = 1.0 / batch.len() as f64;
            for &i in batch {
                let cache = net.forward_cached(input_of(&examples[i]));
                let (_, g) = loss_and_grad(&examples[i], cache.output(), config.beta)?;
                let g: Vec<f64> = g.iter().map(|v| v * inv).collect();
                net.backward(&cache, &g, &mut grads);
            }
            if grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::Numeric {
                    what: format!("non-finite gradient training {kind} head"),
                    iteration: epoch,
                });
            }
            sgd_step(net.params_mut(), &grads, config.learning_rate);
        }
    }
    head.train_loss = mean_loss(&net, &examples, config.beta)?;
    head.params = net.params().to_vec();
    head.net = Some(net);
    log::info!("trained {kind} head on {} examples, loss {:.4}", examples.len(), head.train_loss);
    Ok(head)
}

/// Mean training loss of `head` on `data` (with the head's initialisation
/// as the DPO reference for contrastive heads).
pub fn head_loss(head: &RewardHead, data: &HeadDataset, beta: f64) -> Result<f64> {
    let reference = RewardHead::build(head.kind, head.hidden_width, head.input_dim, head.seed);
    let examples = examples(head.kind, data, reference.net())?;
    if examples.is_empty() {
        return Err(Error::EmptyInput("head dataset"));
    }
    mean_loss(head.net(), &examples, beta)
}
