//! Coalesced Tsetlin Machine training.
//!
//! One shared clause bank votes for every class through a signed weight
//! matrix. Per sample, the target class and one random other class receive
//! feedback: each clause is selected with probability `(T - v)/(2T)` (target)
//! or `(T + v)/(2T)` (other), where `v` is the class sum clamped to `[-T, T]`.
//! Selected clauses get Type I feedback when their weight for that class
//! agrees with the desired vote, Type II otherwise, and their weight moves by
//! one toward the desired vote when the clause fired.
//!
//! TA states are stored bit-sliced: eight planes of 64 automata per literal
//! word, so one increment or decrement touches 64 automata. The internal
//! value `v` in `[0, 255]` maps to the external state `v + 1` in `[1, 256]`;
//! plane 7 (the high bit) is the include action.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cotm::{words_for, ActionMatrix, CotmModel, LiteralVector, SignedWeightMatrix, WORD};
use crate::data::LabeledSet;
use crate::error::{Error, Result};
use crate::rng::{SeedTree, Stream};

/// Half the number of TA states (`N`); states run over `[1, 2N]`.
pub const HALF_STATES: u32 = 128;
pub const STATE_BOUND: u32 = 2 * HALF_STATES;
const PLANES: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    pub clauses: usize,
    /// Specificity `s > 1`.
    pub s: f64,
    /// Vote clamp `T >= 1`.
    pub t: u32,
    pub epochs: usize,
    pub seed: u64,
    /// Reinforce every true literal of a firing clause under Type I feedback,
    /// instead of with probability `(s - 1) / s`.
    pub boost_true_positive: bool,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            clauses: 500,
            s: 10.0,
            t: 625,
            epochs: 25,
            seed: 1,
            boost_true_positive: true,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(self.s > 1.0) || !self.s.is_finite() {
            return Err(Error::Config(format!("specificity s must be > 1, got {}", self.s)));
        }
        if self.t < 1 {
            return Err(Error::Config("vote clamp T must be >= 1".into()));
        }
        if self.clauses < 1 {
            return Err(Error::Config("clause count must be >= 1".into()));
        }
        Ok(())
    }
}

/// TA states, `K` literals by `n` clauses, each in `[1, 256]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaStateMatrix {
    literals: usize,
    clauses: usize,
    states: Vec<u16>,
}

impl TaStateMatrix {
    pub fn from_fn(literals: usize, clauses: usize, mut f: impl FnMut(usize, usize) -> u16) -> Result<Self> {
        let mut states = Vec::with_capacity(literals * clauses);
        for i in 0..literals {
            for j in 0..clauses {
                let s = f(i, j);
                if !(1..=STATE_BOUND as u16).contains(&s) {
                    return Err(Error::Config(format!("TA state {s} at ({i}, {j}) outside [1, {STATE_BOUND}]")));
                }
                states.push(s);
            }
        }
        Ok(Self {
            literals,
            clauses,
            states,
        })
    }

    pub fn literals(&self) -> usize {
        self.literals
    }

    pub fn clauses(&self) -> usize {
        self.clauses
    }

    pub fn get(&self, literal: usize, clause: usize) -> u16 {
        self.states[literal * self.clauses + clause]
    }

    pub fn values(&self) -> &[u16] {
        &self.states
    }
}

/// Include iff the state is in the upper half (`> N`).
pub fn extract_actions(ts: &TaStateMatrix) -> ActionMatrix {
    ActionMatrix::from_fn(ts.literals, ts.clauses, |i, j| u32::from(ts.get(i, j)) > HALF_STATES)
}

#[derive(Debug, Clone)]
struct ClauseBank {
    literals: usize,
    clauses: usize,
    stride: usize,
    /// `[clause][word][plane]`
    planes: Vec<u64>,
    last_mask: u64,
}

impl ClauseBank {
    fn new(literals: usize, clauses: usize) -> Self {
        let stride = words_for(literals);
        let init = (HALF_STATES - 1) as u64; // external state N, exclude side of the boundary
        let mut planes = vec![0u64; clauses * stride * PLANES];
        for word in planes.chunks_exact_mut(PLANES) {
            for (b, p) in word.iter_mut().enumerate() {
                *p = if init >> b & 1 == 1 { !0 } else { 0 };
            }
        }
        let rem = literals % WORD;
        let last_mask = if rem == 0 { !0 } else { (1u64 << rem) - 1 };
        let mut bank = Self {
            literals,
            clauses,
            stride,
            planes,
            last_mask,
        };
        bank.clear_padding();
        bank
    }

    fn clear_padding(&mut self) {
        let keep = self.last_mask;
        for j in 0..self.clauses {
            let base = (j * self.stride + self.stride - 1) * PLANES;
            for p in &mut self.planes[base..base + PLANES] {
                *p &= keep;
            }
        }
    }

    #[inline]
    fn word_mask(&self, w: usize) -> u64 {
        if w + 1 == self.stride {
            self.last_mask
        } else {
            !0
        }
    }

    #[inline]
    fn include(&self, j: usize, w: usize) -> u64 {
        self.planes[(j * self.stride + w) * PLANES + PLANES - 1]
    }

    #[inline]
    fn clause_output(&self, j: usize, x: &[u64]) -> bool {
        (0..self.stride).all(|w| self.include(j, w) & !x[w] == 0)
    }

    #[inline]
    fn inc(&mut self, j: usize, w: usize, mask: u64) {
        let base = (j * self.stride + w) * PLANES;
        let p = &mut self.planes[base..base + PLANES];
        let mut carry = mask;
        for plane in p.iter_mut() {
            if carry == 0 {
                return;
            }
            let next = *plane & carry;
            *plane ^= carry;
            carry = next;
        }
        if carry != 0 {
            for plane in p.iter_mut() {
                *plane |= carry;
            }
        }
    }

    #[inline]
    fn dec(&mut self, j: usize, w: usize, mask: u64) {
        let base = (j * self.stride + w) * PLANES;
        let p = &mut self.planes[base..base + PLANES];
        let mut borrow = mask;
        for plane in p.iter_mut() {
            if borrow == 0 {
                return;
            }
            let next = !*plane & borrow;
            *plane ^= borrow;
            borrow = next;
        }
        if borrow != 0 {
            for plane in p.iter_mut() {
                *plane &= !borrow;
            }
        }
    }

    fn state(&self, literal: usize, j: usize) -> u16 {
        let (w, bit) = (literal / WORD, literal % WORD);
        let base = (j * self.stride + w) * PLANES;
        let v = (0..PLANES).fold(0u16, |acc, b| acc | (((self.planes[base + b] >> bit) & 1) as u16) << b);
        v + 1
    }

    fn actions(&self) -> ActionMatrix {
        let mut am = ActionMatrix::new(self.literals, self.clauses);
        for j in 0..self.clauses {
            let words: Vec<u64> = (0..self.stride).map(|w| self.include(j, w)).collect();
            am.column_words_mut(j).copy_from_slice(&words);
        }
        am
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Accuracy of the pre-update prediction on each training sample.
    pub train_accuracy: f64,
    pub eval_accuracy: Option<f64>,
    pub include_fraction: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub hyperparams: Hyperparams,
    pub literals: usize,
    pub classes: usize,
    pub samples: usize,
    pub epochs: Vec<EpochLog>,
}

pub struct Trainer {
    hp: Hyperparams,
    classes: usize,
    bank: ClauseBank,
    weights: SignedWeightMatrix,
    rng: ChaCha8Rng,
    ln_keep: f64,
    feedback: Vec<u64>,
    outputs: Vec<bool>,
}

impl Trainer {
    pub fn new(literals: usize, classes: usize, hp: Hyperparams) -> Result<Self> {
        hp.validate()?;
        if classes < 2 {
            return Err(Error::Config(format!("need at least 2 classes, got {classes}")));
        }
        if literals == 0 || literals % 2 != 0 {
            return Err(Error::dim("literal count (even, positive)", literals.max(2) + literals % 2, literals));
        }
        let mut rng = SeedTree::new(hp.seed).rng(Stream::Train, 0, 0);
        let mut weights = SignedWeightMatrix::zeros(classes, hp.clauses);
        for c in 0..classes {
            for w in weights.row_mut(c) {
                *w = if rng.gen::<bool>() { 1 } else { -1 };
            }
        }
        let bank = ClauseBank::new(literals, hp.clauses);
        let stride = bank.stride;
        Ok(Self {
            ln_keep: (1.0 - 1.0 / hp.s).ln(),
            classes,
            feedback: vec![0; stride],
            outputs: vec![false; hp.clauses],
            bank,
            weights,
            rng,
            hp,
        })
    }

    pub fn weights(&self) -> &SignedWeightMatrix {
        &self.weights
    }

    pub fn states(&self) -> TaStateMatrix {
        let b = &self.bank;
        TaStateMatrix::from_fn(b.literals, b.clauses, |i, j| b.state(i, j)).expect("bank states are in range")
    }

    pub fn model(&self) -> CotmModel {
        CotmModel::new(self.bank.actions(), self.weights.clone(), STATE_BOUND).expect("trainer dimensions are consistent")
    }

    /// Bernoulli(1/s) mask over the literals, by geometric gap sampling.
    fn sample_feedback(&mut self) {
        self.feedback.iter_mut().for_each(|w| *w = 0);
        let k = self.bank.literals;
        let mut i = 0usize;
        loop {
            let u: f64 = self.rng.gen();
            let gap = ((1.0 - u).ln() / self.ln_keep).floor();
            if gap >= (k - i) as f64 {
                break;
            }
            i += gap as usize;
            self.feedback[i / WORD] |= 1 << (i % WORD);
            i += 1;
            if i >= k {
                break;
            }
        }
    }

    fn type_i(&mut self, j: usize, fired: bool, x: &[u64]) {
        self.sample_feedback();
        for w in 0..self.bank.stride {
            let r = self.feedback[w];
            if fired {
                let xw = x[w];
                let nx = !xw & self.bank.word_mask(w);
                self.bank.inc(j, w, if self.hp.boost_true_positive { xw } else { xw & !r });
                self.bank.dec(j, w, nx & r);
            } else {
                self.bank.dec(j, w, r);
            }
        }
    }

    fn type_ii(&mut self, j: usize, fired: bool, x: &[u64]) {
        if !fired {
            return;
        }
        for w in 0..self.bank.stride {
            let mask = !x[w] & !self.bank.include(j, w) & self.bank.word_mask(w);
            if mask != 0 {
                self.bank.inc(j, w, mask);
            }
        }
    }

    fn class_sum(&self, class: usize) -> i64 {
        self.weights
            .row(class)
            .iter()
            .zip(&self.outputs)
            .filter(|(_, &c)| c)
            .map(|(&w, _)| i64::from(w))
            .sum()
    }

    fn update_class(&mut self, class: usize, positive: bool, x: &[u64]) {
        let t = i64::from(self.hp.t);
        let v = self.class_sum(class).clamp(-t, t);
        let p = if positive {
            (t - v) as f64 / (2 * t) as f64
        } else {
            (t + v) as f64 / (2 * t) as f64
        };
        if p <= 0.0 {
            return;
        }
        for j in 0..self.hp.clauses {
            if self.rng.gen::<f64>() >= p {
                continue;
            }
            let fired_now = self.bank.clause_output(j, x);
            let w = self.weights.get(class, j);
            if (w >= 0) == positive {
                self.type_i(j, fired_now, x);
            } else {
                self.type_ii(j, fired_now, x);
            }
            if self.outputs[j] {
                self.weights.set(class, j, if positive { w + 1 } else { w - 1 });
            }
        }
    }

    /// One feedback step; returns whether the pre-update prediction was correct.
    pub fn fit_sample(&mut self, x: &LiteralVector, y: usize) -> bool {
        let words = x.words();
        for j in 0..self.hp.clauses {
            self.outputs[j] = self.bank.clause_output(j, words);
        }
        let scores: Vec<i64> = (0..self.classes).map(|c| self.class_sum(c)).collect();
        let correct = crate::cotm::argmax_lowest(&scores) == Some(y);

        self.update_class(y, true, words);
        let mut other = self.rng.gen_range(0..self.classes - 1);
        if other >= y {
            other += 1;
        }
        self.update_class(other, false, words);
        correct
    }

    pub fn fit_epoch(&mut self, set: &LabeledSet) -> Result<f64> {
        check_set(set, self.bank.literals, self.classes)?;
        let mut order: Vec<usize> = (0..set.len()).collect();
        order.shuffle(&mut self.rng);
        let mut hits = 0usize;
        for i in order {
            if self.fit_sample(&set.samples[i], set.labels[i]) {
                hits += 1;
            }
        }
        Ok(hits as f64 / set.len() as f64)
    }

    pub fn evaluate(&self, set: &LabeledSet) -> Result<f64> {
        check_set(set, self.bank.literals, self.classes)?;
        self.model().accuracy(&set.samples, &set.labels)
    }
}

fn check_set(set: &LabeledSet, literals: usize, classes: usize) -> Result<()> {
    if set.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if set.samples.len() != set.labels.len() {
        return Err(Error::dim("labels", set.samples.len(), set.labels.len()));
    }
    if let Some(bad) = set.samples.iter().find(|s| s.len() != literals) {
        return Err(Error::dim("literal vector length", literals, bad.len()));
    }
    if let Some((index, &label)) = set.labels.iter().enumerate().find(|(_, &l)| l >= classes) {
        return Err(Error::LabelRange { index, label, classes });
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub states: TaStateMatrix,
    pub weights: SignedWeightMatrix,
    pub model: CotmModel,
    pub log: TrainingLog,
}

/// Trains from scratch; `eval` (if given) is scored after every epoch.
pub fn train(set: &LabeledSet, hp: &Hyperparams, eval: Option<&LabeledSet>) -> Result<TrainOutcome> {
    train_with_progress(set, hp, eval, |_| {})
}

pub fn train_with_progress(
    set: &LabeledSet,
    hp: &Hyperparams,
    eval: Option<&LabeledSet>,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    if set.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let literals = set.literals();
    check_set(set, literals, set.classes)?;
    let mut trainer = Trainer::new(literals, set.classes, hp.clone())?;
    let mut epochs = Vec::with_capacity(hp.epochs);
    for epoch in 1..=hp.epochs {
        let start = Instant::now();
        let train_accuracy = trainer.fit_epoch(set)?;
        let eval_accuracy = eval.map(|e| trainer.evaluate(e)).transpose()?;
        let model = trainer.model();
        let entry = EpochLog {
            epoch,
            train_accuracy,
            eval_accuracy,
            include_fraction: model.actions.include_count() as f64 / (literals * hp.clauses) as f64,
            seconds: start.elapsed().as_secs_f64(),
        };
        on_epoch(&entry);
        epochs.push(entry);
    }
    Ok(TrainOutcome {
        states: trainer.states(),
        weights: trainer.weights.clone(),
        model: trainer.model(),
        log: TrainingLog {
            hyperparams: hp.clone(),
            literals,
            classes: set.classes,
            samples: set.len(),
            epochs,
        },
    })
}
