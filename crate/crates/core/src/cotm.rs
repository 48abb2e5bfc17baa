//! Golden pure-logic Coalesced Tsetlin Machine inference.
//!
//! Clause `j` is the conjunction over all literals `i` of
//! `literal[i] OR NOT include[i][j]`: it is false exactly when some included
//! literal is false. An empty clause (nothing included) is true. Class scores
//! are the signed weight matrix applied to the clause vector, and the
//! predicted class is the argmax with ties going to the lowest index.
//!
//! Literals and include masks are packed 64 to a word; the packed evaluation
//! is bit-identical to the per-element definition in [`compute_clause`].

use std::ops::Deref;

use crate::error::{Error, Result};

pub(crate) const WORD: usize = 64;

pub(crate) fn words_for(bits: usize) -> usize {
    bits.div_ceil(WORD)
}

/// Boolean literals: `F` features followed by their `F` negations.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LiteralVector {
    words: Vec<u64>,
    len: usize,
}

impl LiteralVector {
    /// Builds `[x, NOT x]` from raw Boolean features.
    pub fn from_features(features: &[bool]) -> Self {
        let f = features.len();
        let len = 2 * f;
        let mut words = vec![0u64; words_for(len)];
        for (i, &x) in features.iter().enumerate() {
            let lit = if x { i } else { i + f };
            words[lit / WORD] |= 1 << (lit % WORD);
        }
        Self { words, len }
    }

    /// Validates the complement structure of an explicit literal sequence.
    pub fn from_bits(bits: &[bool]) -> Result<Self> {
        if bits.len() % 2 != 0 {
            return Err(Error::dim("literal vector (even length)", bits.len() + 1, bits.len()));
        }
        let f = bits.len() / 2;
        if let Some(i) = (0..f).find(|&i| bits[i] == bits[i + f]) {
            return Err(Error::NotComplemented(i));
        }
        Ok(Self::from_features(&bits[..f]))
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn num_features(&self) -> usize {
        self.len / 2
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "literal index {i} out of range {}", self.len);
        self.words[i / WORD] >> (i % WORD) & 1 == 1
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (0..self.len).map(|i| self.get(i)).collect()
    }

    /// Indices of literals that are 0; these rows get driven at `V_R` on a clause tile.
    pub fn zero_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(move |&i| !self.get(i))
    }

    pub fn count_zeros(&self) -> usize {
        self.len - self.words.iter().map(|w| w.count_ones() as usize).sum::<usize>()
    }
}

/// Include/exclude action per (literal, clause), `K` rows by `n` columns.
///
/// Stored column-packed so one clause is a contiguous run of words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionMatrix {
    literals: usize,
    clauses: usize,
    stride: usize,
    cols: Vec<u64>,
}

impl ActionMatrix {
    pub fn new(literals: usize, clauses: usize) -> Self {
        let stride = words_for(literals);
        Self {
            literals,
            clauses,
            stride,
            cols: vec![0; stride * clauses],
        }
    }

    pub fn from_fn(literals: usize, clauses: usize, mut include: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = Self::new(literals, clauses);
        for j in 0..clauses {
            for i in 0..literals {
                if include(i, j) {
                    m.set(i, j, true);
                }
            }
        }
        m
    }

    pub fn literals(&self) -> usize {
        self.literals
    }

    pub fn clauses(&self) -> usize {
        self.clauses
    }

    #[inline]
    pub fn get(&self, literal: usize, clause: usize) -> bool {
        assert!(literal < self.literals && clause < self.clauses);
        self.cols[clause * self.stride + literal / WORD] >> (literal % WORD) & 1 == 1
    }

    pub fn set(&mut self, literal: usize, clause: usize, include: bool) {
        assert!(literal < self.literals && clause < self.clauses);
        let w = &mut self.cols[clause * self.stride + literal / WORD];
        let bit = 1u64 << (literal % WORD);
        if include {
            *w |= bit;
        } else {
            *w &= !bit;
        }
    }

    pub fn column(&self, clause: usize) -> Vec<bool> {
        (0..self.literals).map(|i| self.get(i, clause)).collect()
    }

    pub(crate) fn column_words(&self, clause: usize) -> &[u64] {
        &self.cols[clause * self.stride..(clause + 1) * self.stride]
    }

    pub(crate) fn column_words_mut(&mut self, clause: usize) -> &mut [u64] {
        &mut self.cols[clause * self.stride..(clause + 1) * self.stride]
    }

    pub fn include_count(&self) -> usize {
        self.cols.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Rows `[start, end)` as a new matrix, for row-partitioned tiles.
    pub fn row_slice(&self, start: usize, end: usize) -> Self {
        Self::from_fn(end - start, self.clauses, |i, j| self.get(start + i, j))
    }
}

/// Integer clause weights, `m` classes by `n` clauses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignedWeightMatrix {
    classes: usize,
    clauses: usize,
    w: Vec<i32>,
}

impl SignedWeightMatrix {
    pub fn zeros(classes: usize, clauses: usize) -> Self {
        Self {
            classes,
            clauses,
            w: vec![0; classes * clauses],
        }
    }

    pub fn from_rows(rows: &[Vec<i32>]) -> Result<Self> {
        let classes = rows.len();
        if classes == 0 {
            return Err(Error::Empty("weight matrix"));
        }
        let clauses = rows[0].len();
        let mut w = Vec::with_capacity(classes * clauses);
        for r in rows {
            if r.len() != clauses {
                return Err(Error::dim("weight matrix row", clauses, r.len()));
            }
            w.extend_from_slice(r);
        }
        Ok(Self { classes, clauses, w })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn clauses(&self) -> usize {
        self.clauses
    }

    #[inline]
    pub fn get(&self, class: usize, clause: usize) -> i32 {
        self.w[class * self.clauses + clause]
    }

    #[inline]
    pub fn set(&mut self, class: usize, clause: usize, v: i32) {
        self.w[class * self.clauses + clause] = v;
    }

    pub fn row(&self, class: usize) -> &[i32] {
        &self.w[class * self.clauses..(class + 1) * self.clauses]
    }

    pub(crate) fn row_mut(&mut self, class: usize) -> &mut [i32] {
        &mut self.w[class * self.clauses..(class + 1) * self.clauses]
    }

    pub fn values(&self) -> &[i32] {
        &self.w
    }

    pub fn min(&self) -> i32 {
        self.w.iter().copied().min().unwrap_or(0)
    }

    pub fn max(&self) -> i32 {
        self.w.iter().copied().max().unwrap_or(0)
    }

    /// Adds `k` to every weight.
    pub fn offset(&self, k: i32) -> Self {
        Self {
            classes: self.classes,
            clauses: self.clauses,
            w: self.w.iter().map(|&v| v + k).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ClauseVector(pub Vec<bool>);

impl Deref for ClauseVector {
    type Target = [bool];
    fn deref(&self) -> &[bool] {
        &self.0
    }
}

impl ClauseVector {
    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&c| c).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ClassScores(pub Vec<i64>);

impl Deref for ClassScores {
    type Target = [i64];
    fn deref(&self) -> &[i64] {
        &self.0
    }
}

/// `AND_i (literal[i] OR NOT include[i])`.
pub fn compute_clause(actions_col: &[bool], literals: &[bool]) -> Result<bool> {
    if actions_col.len() != literals.len() {
        return Err(Error::dim("compute_clause", actions_col.len(), literals.len()));
    }
    Ok(actions_col.iter().zip(literals).all(|(&inc, &lit)| lit || !inc))
}

#[inline]
pub(crate) fn clause_from_words(include: &[u64], literals: &[u64]) -> bool {
    include.iter().zip(literals).all(|(&inc, &lit)| inc & !lit == 0)
}

pub fn compute_clauses(am: &ActionMatrix, lit: &LiteralVector) -> Result<ClauseVector> {
    if am.literals() != lit.len() {
        return Err(Error::dim("compute_clauses", am.literals(), lit.len()));
    }
    Ok(ClauseVector(
        (0..am.clauses())
            .map(|j| clause_from_words(am.column_words(j), lit.words()))
            .collect(),
    ))
}

pub fn class_sums(w: &SignedWeightMatrix, c: &ClauseVector) -> Result<ClassScores> {
    if w.clauses() != c.len() {
        return Err(Error::dim("class_sums", w.clauses(), c.len()));
    }
    Ok(ClassScores(
        (0..w.classes())
            .map(|i| {
                w.row(i)
                    .iter()
                    .zip(c.iter())
                    .filter(|(_, &on)| on)
                    .map(|(&wij, _)| i64::from(wij))
                    .sum()
            })
            .collect(),
    ))
}

/// Index of the largest element; ties go to the lowest index.
pub fn argmax_lowest<T: PartialOrd + Copy>(xs: &[T]) -> Option<usize> {
    let mut best: Option<(usize, T)> = None;
    for (i, &x) in xs.iter().enumerate() {
        match best {
            Some((_, b)) if !(x > b) => {}
            _ => best = Some((i, x)),
        }
    }
    best.map(|(i, _)| i)
}

pub fn predict(v: &[i64]) -> Result<usize> {
    argmax_lowest(v).ok_or(Error::Empty("class scores"))
}

/// Multi-label output: class `i` is 1 iff its score is strictly positive.
pub fn threshold_output(v: &[i64]) -> Vec<bool> {
    v.iter().map(|&x| x > 0).collect()
}

/// A trained model: actions, weights and the TA state bound `2N` it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CotmModel {
    pub actions: ActionMatrix,
    pub weights: SignedWeightMatrix,
    pub state_bound: u32,
}

impl CotmModel {
    pub fn new(actions: ActionMatrix, weights: SignedWeightMatrix, state_bound: u32) -> Result<Self> {
        if actions.clauses() != weights.clauses() {
            return Err(Error::dim("model clause count", actions.clauses(), weights.clauses()));
        }
        if weights.classes() < 2 {
            return Err(Error::Config(format!("model needs at least 2 classes, got {}", weights.classes())));
        }
        Ok(Self {
            actions,
            weights,
            state_bound,
        })
    }

    pub fn literals(&self) -> usize {
        self.actions.literals()
    }

    pub fn clauses(&self) -> usize {
        self.actions.clauses()
    }

    pub fn classes(&self) -> usize {
        self.weights.classes()
    }

    pub fn scores(&self, lit: &LiteralVector) -> Result<ClassScores> {
        class_sums(&self.weights, &compute_clauses(&self.actions, lit)?)
    }

    pub fn predict(&self, lit: &LiteralVector) -> Result<usize> {
        predict(&self.scores(lit)?)
    }

    pub fn accuracy(&self, samples: &[LiteralVector], labels: &[usize]) -> Result<f64> {
        if samples.len() != labels.len() {
            return Err(Error::dim("accuracy labels", samples.len(), labels.len()));
        }
        if samples.is_empty() {
            return Err(Error::Empty("evaluation set"));
        }
        let mut hits = 0usize;
        for (x, &y) in samples.iter().zip(labels) {
            if self.predict(x)? == y {
                hits += 1;
            }
        }
        Ok(hits as f64 / samples.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lits(bits: &[u8]) -> Vec<bool> {
        bits.iter().map(|&b| b == 1).collect()
    }

    #[test]
    fn failing_include_gives_zero() {
        assert!(!compute_clause(&[true], &[false]).unwrap());
    }

    #[test]
    fn all_exclude_gives_one() {
        assert!(compute_clause(&[false; 6], &lits(&[0, 1, 0, 0, 1, 0])).unwrap());
    }

    #[test]
    fn satisfied_includes_give_one() {
        assert!(compute_clause(&[true, false, true], &lits(&[1, 0, 1])).unwrap());
    }

    #[test]
    fn clause_length_mismatch() {
        assert!(matches!(compute_clause(&[true], &[true, false]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn two_clause_toy() {
        // literals for features [1, 0]: [1, 0, 0, 1]
        let lit = LiteralVector::from_features(&[true, false]);
        let mut am = ActionMatrix::new(4, 2);
        am.set(1, 1, true); // include literal 1 (=0) in clause 1
        assert_eq!(compute_clauses(&am, &lit).unwrap().0, vec![true, false]);
    }

    #[test]
    fn clauses_dimension_error() {
        let am = ActionMatrix::new(6, 2);
        let lit = LiteralVector::from_features(&[true, false]);
        assert!(compute_clauses(&am, &lit).is_err());
    }

    #[test]
    fn class_sums_hand_example() {
        let w = SignedWeightMatrix::from_rows(&[vec![1, -2], vec![3, 0]]).unwrap();
        let v = class_sums(&w, &ClauseVector(vec![true, true])).unwrap();
        assert_eq!(v.0, vec![-1, 3]);
        let z = class_sums(&w, &ClauseVector(vec![false, false])).unwrap();
        assert_eq!(z.0, vec![0, 0]);
        assert!(class_sums(&w, &ClauseVector(vec![true])).is_err());
    }

    #[test]
    fn predict_and_threshold() {
        assert_eq!(predict(&[-1, 3]).unwrap(), 1);
        assert_eq!(predict(&[5, 5]).unwrap(), 0);
        assert!(matches!(predict(&[]), Err(Error::Empty(_))));
        assert_eq!(threshold_output(&[-1, 3]), vec![false, true]);
        assert_eq!(threshold_output(&[0]), vec![false]);
        assert_eq!(threshold_output(&[1, 7, 2]), vec![true; 3]);
    }

    #[test]
    fn literal_vector_validation() {
        assert!(LiteralVector::from_bits(&lits(&[1, 0, 0, 1])).is_ok());
        assert!(matches!(LiteralVector::from_bits(&lits(&[1, 0, 1, 1])), Err(Error::NotComplemented(0))));
        assert!(LiteralVector::from_bits(&lits(&[1, 0, 1])).is_err());
        let l = LiteralVector::from_features(&[true, false, false]);
        assert_eq!(l.to_bools(), lits(&[1, 0, 0, 0, 1, 1]));
        assert_eq!(l.count_zeros(), 3);
        assert_eq!(l.zero_indices().collect::<Vec<_>>(), vec![1, 2, 3]);
    }

    // Independent oracles: nested loops over plain vectors.
    fn naive_clause(inc: &[Vec<bool>], lit: &[bool], j: usize) -> bool {
        for (i, row) in inc.iter().enumerate() {
            if row[j] && !lit[i] {
                return false;
            }
        }
        true
    }

    fn naive_scores(w: &[Vec<i32>], c: &[bool]) -> Vec<i64> {
        let mut out = vec![0i64; w.len()];
        for i in 0..w.len() {
            for j in 0..c.len() {
                if c[j] {
                    out[i] += w[i][j] as i64;
                }
            }
        }
        out
    }

    fn naive_argmax(v: &[i64]) -> usize {
        let mut best = 0;
        for i in 1..v.len() {
            if v[i] > v[best] {
                best = i;
            }
        }
        best
    }

    fn instance() -> impl Strategy<Value = (Vec<bool>, Vec<Vec<bool>>, Vec<Vec<i32>>)> {
        (1usize..=32, 1usize..=32, 2usize..=8).prop_flat_map(|(f, n, m)| {
            (
                prop::collection::vec(any::<bool>(), f),
                prop::collection::vec(prop::collection::vec(prop::bool::weighted(0.15), n), 2 * f),
                prop::collection::vec(prop::collection::vec(-50i32..50, n), m),
            )
        })
    }

    proptest! {
        #[test]
        fn packed_matches_naive((feat, inc, w) in instance()) {
            let lit = LiteralVector::from_features(&feat);
            let bits = lit.to_bools();
            let k = bits.len();
            let n = inc[0].len();
            let am = ActionMatrix::from_fn(k, n, |i, j| inc[i][j]);
            let c = compute_clauses(&am, &lit).unwrap();
            for j in 0..n {
                prop_assert_eq!(c[j], naive_clause(&inc, &bits, j));
                prop_assert_eq!(c[j], compute_clause(&am.column(j), &bits).unwrap());
            }
            let wm = SignedWeightMatrix::from_rows(&w).unwrap();
            let v = class_sums(&wm, &c).unwrap();
            prop_assert_eq!(&v.0, &naive_scores(&w, &c.0));
            prop_assert_eq!(predict(&v).unwrap(), naive_argmax(&v));
        }

        #[test]
        fn shift_preserves_argmax((feat, inc, w) in instance(), k in 0i32..500) {
            let lit = LiteralVector::from_features(&feat);
            let am = ActionMatrix::from_fn(lit.len(), inc[0].len(), |i, j| inc[i][j]);
            let c = compute_clauses(&am, &lit).unwrap();
            let wm = SignedWeightMatrix::from_rows(&w).unwrap();
            let a = predict(&class_sums(&wm, &c).unwrap()).unwrap();
            let b = predict(&class_sums(&wm.offset(k), &c).unwrap()).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn adding_include_never_raises_clause(
            feat in prop::collection::vec(any::<bool>(), 1..40),
            inc in prop::collection::vec(prop::bool::weighted(0.1), 80),
            extra in 0usize..80,
        ) {
            let lit = LiteralVector::from_features(&feat).to_bools();
            let k = lit.len();
            let before: Vec<bool> = inc[..k].to_vec();
            let mut after = before.clone();
            after[extra % k] = true;
            let b = compute_clause(&before, &lit).unwrap();
            let a = compute_clause(&after, &lit).unwrap();
            prop_assert!(!(a && !b));
        }

        #[test]
        fn empty_clause_always_true(feat in prop::collection::vec(any::<bool>(), 1..100)) {
            let lit = LiteralVector::from_features(&feat);
            let am = ActionMatrix::new(lit.len(), 3);
            prop_assert!(compute_clauses(&am, &lit).unwrap().iter().all(|&c| c));
        }

        #[test]
        fn complement_structure(feat in prop::collection::vec(any::<bool>(), 1..200)) {
            let lit = LiteralVector::from_features(&feat);
            let f = feat.len();
            for i in 0..f {
                prop_assert_eq!(lit.get(i), feat[i]);
                prop_assert_eq!(lit.get(i + f), !feat[i]);
            }
        }
    }
}
