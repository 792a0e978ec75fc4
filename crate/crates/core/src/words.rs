//! Reduced words in the free product of two finitely generated semigroups.
//!
//! A letter is a signed integer: `k` is generator k−1 of its side and `−k` its
//! inverse (groups only). Words serialize as `[[side, l1, l2, ...], ...]`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{spectral_radius_by_powers, wedge_square, SquareMatrix, TOL};
use crate::sampling::trial_rng;

/// Enumeration refuses to produce more words than this.
pub const MAX_WORDS: u128 = 10_000_000;

/// Largest power inspected when looking for torsion.
pub const TORSION_POWERS: u32 = 12;

pub type Letter = i32;

#[derive(Clone, Debug)]
pub struct SemigroupGens {
    letters: Vec<SquareMatrix>,
    inverses: Vec<SquareMatrix>,
    wedges: Vec<SquareMatrix>,
    inv_wedges: Vec<SquareMatrix>,
    is_group: bool,
    label: u8,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GensJson {
    letters: Vec<SquareMatrix>,
    #[serde(default)]
    is_group: bool,
}

impl SemigroupGens {
    pub fn new(letters: Vec<SquareMatrix>, is_group: bool, label: u8) -> Result<Self> {
        if letters.is_empty() {
            return Err(Error::Input("a generating set needs at least one letter".into()));
        }
        if !(label == 1 || label == 2) {
            return Err(Error::Input(format!("side label {label} is not 1 or 2")));
        }
        let d = letters[0].dim();
        if d < 2 {
            return Err(Error::Dimension { expected: 2, got: d });
        }
        let mut inverses = Vec::with_capacity(letters.len());
        let mut wedges = Vec::with_capacity(letters.len());
        let mut inv_wedges = Vec::with_capacity(letters.len());
        for (i, g) in letters.iter().enumerate() {
            if g.dim() != d {
                return Err(Error::Dimension { expected: d, got: g.dim() });
            }
            if g.is_identity(TOL) {
                return Err(Error::Input(format!("letter {} of side {label} is the identity", i + 1)));
            }
            let inv = g.try_inverse()?;
            wedges.push(wedge_square(g)?);
            inv_wedges.push(wedge_square(&inv)?);
            inverses.push(inv);
        }
        Ok(SemigroupGens { letters, inverses, wedges, inv_wedges, is_group, label })
    }

    pub fn letters(&self) -> &[SquareMatrix] {
        &self.letters
    }

    pub fn is_group(&self) -> bool {
        self.is_group
    }

    pub fn label(&self) -> u8 {
        self.label
    }

    pub fn dim(&self) -> usize {
        self.letters[0].dim()
    }

    pub fn with_label(&self, label: u8) -> Result<Self> {
        Self::new(self.letters.clone(), self.is_group, label)
    }

    /// Letters in enumeration order: 1, −1, 2, −2, … for groups, 1, 2, … otherwise.
    pub fn alphabet(&self) -> Vec<Letter> {
        let mut out = Vec::new();
        for k in 1..=self.letters.len() as i32 {
            out.push(k);
            if self.is_group {
                out.push(-k);
            }
        }
        out
    }

    fn index(&self, l: Letter) -> Result<usize> {
        let k = l.unsigned_abs() as usize;
        if l == 0 || k > self.letters.len() {
            return Err(Error::Index(format!("letter {l} on side {}", self.label)));
        }
        if l < 0 && !self.is_group {
            return Err(Error::Input(format!("inverse letter {l} in semigroup side {}", self.label)));
        }
        Ok(k - 1)
    }

    /// The matrix of a letter.
    pub fn matrix(&self, l: Letter) -> Result<&SquareMatrix> {
        let i = self.index(l)?;
        Ok(if l > 0 { &self.letters[i] } else { &self.inverses[i] })
    }

    /// The inverse matrix of a letter (available for semigroups too).
    pub fn inverse_matrix(&self, l: Letter) -> Result<&SquareMatrix> {
        let i = self.index(l)?;
        Ok(if l > 0 { &self.inverses[i] } else { &self.letters[i] })
    }

    fn wedge(&self, l: Letter) -> &SquareMatrix {
        let i = l.unsigned_abs() as usize - 1;
        if l > 0 {
            &self.wedges[i]
        } else {
            &self.inv_wedges[i]
        }
    }

    /// Product of letter matrices, left to right.
    pub fn evaluate_letters(&self, letters: &[Letter]) -> Result<SquareMatrix> {
        let mut acc = SquareMatrix::identity(self.dim());
        for &l in letters {
            acc = acc.mul(self.matrix(l)?);
        }
        Ok(acc)
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(GensJson { letters: self.letters.clone(), is_group: self.is_group }).expect("serializable")
    }

    pub fn from_json_value(v: serde_json::Value, label: u8) -> Result<Self> {
        let j: GensJson = serde_json::from_value(v).map_err(|e| Error::Parse(e.to_string()))?;
        Self::new(j.letters, j.is_group, label)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Syllable {
    pub side: u8,
    pub letters: Vec<Letter>,
}

/// A symbolic word; reduced when built by `reduce` or the enumerators.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word {
    syllables: Vec<Syllable>,
}

fn free_reduce(letters: &[Letter]) -> Vec<Letter> {
    let mut out: Vec<Letter> = Vec::with_capacity(letters.len());
    for &l in letters {
        if out.last() == Some(&-l) {
            out.pop();
        } else {
            out.push(l);
        }
    }
    out
}

impl Word {
    pub fn syllables(&self) -> &[Syllable] {
        &self.syllables
    }

    /// Number of syllables n.
    pub fn syllable_count(&self) -> usize {
        self.syllables.len()
    }

    /// |w|: total letter count.
    pub fn word_length(&self) -> usize {
        self.syllables.iter().map(|s| s.letters.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.syllables.is_empty()
    }

    /// Free-product normal form: free cancellation inside syllables, merge of
    /// adjacent syllables on the same side, removal of empty syllables.
    pub fn reduce(raw: Vec<Syllable>) -> Word {
        let mut out: Vec<Syllable> = Vec::with_capacity(raw.len());
        for s in raw {
            let mut cur = s;
            loop {
                match out.last_mut() {
                    Some(prev) if prev.side == cur.side => {
                        let mut joined = std::mem::take(&mut prev.letters);
                        joined.extend_from_slice(&cur.letters);
                        out.pop();
                        cur = Syllable { side: cur.side, letters: joined };
                    }
                    _ => break,
                }
            }
            cur.letters = free_reduce(&cur.letters);
            if !cur.letters.is_empty() {
                out.push(cur);
            }
        }
        Word { syllables: out }
    }

    /// Checks the normal form without changing it.
    pub fn is_reduced(&self) -> bool {
        self.syllables.windows(2).all(|p| p[0].side != p[1].side)
            && self.syllables.iter().all(|s| !s.letters.is_empty() && free_reduce(&s.letters) == s.letters)
    }

    pub fn concat(&self, other: &Word) -> Word {
        Word::reduce(self.syllables.iter().chain(other.syllables.iter()).cloned().collect())
    }

    pub fn inverse(&self) -> Word {
        let syllables = self
            .syllables
            .iter()
            .rev()
            .map(|s| Syllable { side: s.side, letters: s.letters.iter().rev().map(|l| -l).collect() })
            .collect();
        Word { syllables }
    }

    /// Canonical nested-array form.
    pub fn canonical(&self) -> Vec<Vec<i32>> {
        self.syllables
            .iter()
            .map(|s| std::iter::once(s.side as i32).chain(s.letters.iter().copied()).collect())
            .collect()
    }

    /// Compact text id such as `1:1.1|2:-1`.
    pub fn id(&self) -> String {
        self.syllables
            .iter()
            .map(|s| {
                let ls: Vec<String> = s.letters.iter().map(|l| l.to_string()).collect();
                format!("{}:{}", s.side, ls.join("."))
            })
            .collect::<Vec<_>>()
            .join("|")
    }

    pub fn from_canonical(arr: &[Vec<i32>]) -> Result<Word> {
        let mut raw = Vec::with_capacity(arr.len());
        for s in arr {
            let (&side, letters) = s.split_first().ok_or_else(|| Error::Parse("empty syllable".into()))?;
            if !(side == 1 || side == 2) {
                return Err(Error::Parse(format!("side {side} is not 1 or 2")));
            }
            if letters.is_empty() || letters.contains(&0) {
                return Err(Error::Parse("syllable letters must be nonzero and nonempty".into()));
            }
            raw.push(Syllable { side: side as u8, letters: letters.to_vec() });
        }
        let w = Word::reduce(raw);
        if w.is_empty() {
            return Err(Error::Parse("word reduces to the identity".into()));
        }
        Ok(w)
    }
}

impl Serialize for Word {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.canonical().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Word {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let arr = Vec::<Vec<i32>>::deserialize(de)?;
        Word::from_canonical(&arr).map_err(serde::de::Error::custom)
    }
}

pub fn parse_word_json(text: &str) -> Result<Word> {
    serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

/// A reduced word with its evaluation g, the inverse g^{-1} built from
/// inverse letters, and ∧²g built letter by letter. The last two keep σ_d and
/// σ₂ accurate when g is badly conditioned.
#[derive(Clone, Debug)]
pub struct ReducedWord {
    word: Word,
    eval: SquareMatrix,
    eval_inv: SquareMatrix,
    wedge: SquareMatrix,
}

/// The two sides of a free product.
#[derive(Clone, Copy, Debug)]
pub struct Sides<'a> {
    pub g1: &'a SemigroupGens,
    pub g2: &'a SemigroupGens,
}

impl<'a> Sides<'a> {
    pub fn new(g1: &'a SemigroupGens, g2: &'a SemigroupGens) -> Result<Self> {
        if g1.dim() != g2.dim() {
            return Err(Error::Dimension { expected: g1.dim(), got: g2.dim() });
        }
        Ok(Sides { g1, g2 })
    }

    pub fn side(&self, s: u8) -> &'a SemigroupGens {
        if s == 1 {
            self.g1
        } else {
            self.g2
        }
    }

    pub fn dim(&self) -> usize {
        self.g1.dim()
    }

    pub fn evaluate(&self, word: &Word) -> Result<ReducedWord> {
        ReducedWord::build(word.clone(), *self)
    }
}

fn syllable_eval(gens: &SemigroupGens, letters: &[Letter]) -> Result<(SquareMatrix, SquareMatrix, SquareMatrix)> {
    let d = gens.dim();
    let mut g = SquareMatrix::identity(d);
    let mut gi = SquareMatrix::identity(d);
    let mut w = SquareMatrix::identity(d * (d - 1) / 2);
    for &l in letters {
        g = g.mul(gens.matrix(l)?);
        gi = gens.inverse_matrix(l)?.mul(&gi);
        w = w.mul(gens.wedge(l));
    }
    Ok((g, gi, w))
}

impl ReducedWord {
    pub fn build(word: Word, sides: Sides<'_>) -> Result<ReducedWord> {
        if word.is_empty() || !word.is_reduced() {
            return Err(Error::Input(format!("word {} is not reduced", word.id())));
        }
        let d = sides.dim();
        let mut eval = SquareMatrix::identity(d);
        let mut eval_inv = SquareMatrix::identity(d);
        let mut wedge = SquareMatrix::identity(d * (d - 1) / 2);
        for s in word.syllables() {
            let gens = sides.side(s.side);
            let (g, gi, w) = syllable_eval(gens, &s.letters)?;
            if g.is_identity(TOL) {
                return Err(Error::Input(format!("syllable {:?} evaluates to the identity", s.letters)));
            }
            eval = eval.mul(&g);
            eval_inv = gi.mul(&eval_inv);
            wedge = wedge.mul(&w);
        }
        Ok(ReducedWord { word, eval, eval_inv, wedge })
    }

    pub fn word(&self) -> &Word {
        &self.word
    }

    pub fn eval(&self) -> &SquareMatrix {
        &self.eval
    }

    pub fn eval_inv(&self) -> &SquareMatrix {
        &self.eval_inv
    }

    pub fn wedge(&self) -> &SquareMatrix {
        &self.wedge
    }

    pub fn syllable_count(&self) -> usize {
        self.word.syllable_count()
    }

    pub fn word_length(&self) -> usize {
        self.word.word_length()
    }

    pub fn first_side(&self) -> u8 {
        self.word.syllables[0].side
    }

    pub fn last_side(&self) -> u8 {
        self.word.syllables[self.word.syllables.len() - 1].side
    }
}

/// Freely reduced letter words of length 1..=max_len in enumeration order.
pub fn letter_words(gens: &SemigroupGens, max_len: usize) -> Vec<Vec<Letter>> {
    let alphabet = gens.alphabet();
    let mut out = Vec::new();
    let mut layer: Vec<Vec<Letter>> = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for w in &layer {
            for &l in &alphabet {
                if w.last() == Some(&-l) {
                    continue;
                }
                let mut v = w.clone();
                v.push(l);
                next.push(v);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

/// Syllable alphabet of a side: letter words whose evaluation is not the identity.
pub fn syllable_alphabet(gens: &SemigroupGens, max_len: usize) -> Vec<Vec<Letter>> {
    letter_words(gens, max_len)
        .into_iter()
        .filter(|w| gens.evaluate_letters(w).map(|g| !g.is_identity(TOL)).unwrap_or(false))
        .collect()
}

fn count_words(a1: u128, a2: u128, max_syllables: usize) -> u128 {
    let mut total: u128 = 0;
    for n in 1..=max_syllables {
        for start in [0, 1] {
            let mut c: u128 = 1;
            for i in 0..n {
                let a = if (start + i) % 2 == 0 { a1 } else { a2 };
                c = c.saturating_mul(a);
            }
            total = total.saturating_add(c);
        }
    }
    total
}

/// All reduced words with at most `max_syllables` syllables of at most
/// `max_syllable_len` letters each, ordered by syllable count, then starting
/// side, then syllable indices.
pub fn enumerate_symbolic(sides: Sides<'_>, max_syllables: usize, max_syllable_len: usize) -> Result<Vec<Word>> {
    if max_syllables == 0 || max_syllable_len == 0 {
        return Err(Error::Input("enumeration bounds must be at least 1".into()));
    }
    let alph = [syllable_alphabet(sides.g1, max_syllable_len), syllable_alphabet(sides.g2, max_syllable_len)];
    let total = count_words(alph[0].len() as u128, alph[1].len() as u128, max_syllables);
    if total > MAX_WORDS {
        return Err(Error::Overflow(total));
    }
    let mut out = Vec::with_capacity(total as usize);
    for n in 1..=max_syllables {
        for start in [0usize, 1] {
            let sizes: Vec<usize> = (0..n).map(|i| alph[(start + i) % 2].len()).collect();
            if sizes.contains(&0) {
                continue;
            }
            let mut idx = vec![0usize; n];
            'odometer: loop {
                let syllables = (0..n)
                    .map(|i| {
                        let side = (start + i) % 2;
                        Syllable { side: side as u8 + 1, letters: alph[side][idx[i]].clone() }
                    })
                    .collect();
                out.push(Word { syllables });
                let mut j = n;
                loop {
                    if j == 0 {
                        break 'odometer;
                    }
                    j -= 1;
                    idx[j] += 1;
                    if idx[j] < sizes[j] {
                        continue 'odometer;
                    }
                    idx[j] = 0;
                }
            }
        }
    }
    Ok(out)
}

/// Enumerates and evaluates; evaluation runs in parallel, order is kept.
pub fn enumerate_reduced(sides: Sides<'_>, max_syllables: usize, max_syllable_len: usize) -> Result<Vec<ReducedWord>> {
    let words = enumerate_symbolic(sides, max_syllables, max_syllable_len)?;
    words.into_par_iter().map(|w| ReducedWord::build(w, sides)).collect()
}

/// A random reduced word with exactly `syllables` syllables, reproducible
/// from (seed, index) alone.
pub fn sample_reduced(sides: Sides<'_>, seed: u64, index: u64, syllables: usize, syllable_len: usize) -> Result<ReducedWord> {
    if syllables == 0 || syllable_len == 0 {
        return Err(Error::Input("sampling bounds must be at least 1".into()));
    }
    let alph = [syllable_alphabet(sides.g1, syllable_len), syllable_alphabet(sides.g2, syllable_len)];
    let mut rng = trial_rng(seed, 0x776f_7264, index);
    let mut side = rng.gen_range(0..2usize);
    if alph[side].is_empty() {
        side = 1 - side;
    }
    let mut out = Vec::with_capacity(syllables);
    for _ in 0..syllables {
        let a = &alph[side];
        if a.is_empty() {
            return Err(Error::Input(format!("side {} has no nontrivial syllables", side + 1)));
        }
        out.push(Syllable { side: side as u8 + 1, letters: a[rng.gen_range(0..a.len())].clone() });
        side = 1 - side;
    }
    ReducedWord::build(Word { syllables: out }, sides)
}

/// Freely reduced words of length 1..=max_len on n_gens free generators.
pub fn free_group_words(n_gens: usize, max_len: usize) -> Vec<Vec<Letter>> {
    let alphabet: Vec<Letter> = (1..=n_gens as i32).flat_map(|k| [k, -k]).collect();
    let mut out = Vec::new();
    let mut layer: Vec<Vec<Letter>> = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for w in &layer {
            for &l in &alphabet {
                if w.last() != Some(&-l) {
                    let mut v = w.clone();
                    v.push(l);
                    next.push(v);
                }
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

/// Generators conjugated by a fixed element.
#[derive(Clone, Debug)]
pub struct Family {
    pub label: String,
    pub letters: Vec<SquareMatrix>,
}

fn check_infinite_order(g: &SquareMatrix, name: &str) -> Result<()> {
    if spectral_radius_by_powers(g, 6) > 1.0 + 1e-6 {
        return Ok(());
    }
    let mut p = g.clone();
    for k in 1..=TORSION_POWERS {
        if p.is_identity(1e-9) {
            return Err(Error::Torsion(format!("{name}^{k} is the identity")));
        }
        p = p.mul(g);
    }
    Ok(())
}

/// Generators γ₂^i Γ₁′ γ₂^{−i} (i ≤ r), γ₁^j Γ₂′ γ₁^{−j} (j ≤ s) and
/// γ₁^{s+k} γ₂ γ₁^{−s−k} (k ≤ q) of a finite-index free subgroup.
pub fn finite_index_embedding(
    gens1p: &SemigroupGens,
    gens2p: &SemigroupGens,
    gamma1: &[Letter],
    gamma2: &[Letter],
    r: u32,
    s: u32,
    q: u32,
) -> Result<Vec<Family>> {
    if !gens1p.is_group() || !gens2p.is_group() {
        return Err(Error::Input("conjugate families need group alphabets".into()));
    }
    if gens1p.dim() != gens2p.dim() {
        return Err(Error::Dimension { expected: gens1p.dim(), got: gens2p.dim() });
    }
    let g1 = gens1p.evaluate_letters(&free_reduce(gamma1))?;
    let g2 = gens2p.evaluate_letters(&free_reduce(gamma2))?;
    if gamma1.is_empty() || gamma2.is_empty() {
        return Err(Error::Input("conjugating elements must be nonempty words".into()));
    }
    check_infinite_order(&g1, "gamma1")?;
    check_infinite_order(&g2, "gamma2")?;
    let g1i = g1.try_inverse()?;
    let g2i = g2.try_inverse()?;
    let mut out = Vec::new();
    for i in 1..=r {
        let (c, ci) = (g2.pow(i), g2i.pow(i));
        out.push(Family {
            label: format!("gamma2^{i} G1 gamma2^-{i}"),
            letters: gens1p.letters().iter().map(|x| c.mul(x).mul(&ci)).collect(),
        });
    }
    for j in 1..=s {
        let (c, ci) = (g1.pow(j), g1i.pow(j));
        out.push(Family {
            label: format!("gamma1^{j} G2 gamma1^-{j}"),
            letters: gens2p.letters().iter().map(|x| c.mul(x).mul(&ci)).collect(),
        });
    }
    for k in 1..=q {
        let e = s + k;
        out.push(Family {
            label: format!("gamma1^{e} gamma2 gamma1^-{e}"),
            letters: vec![g1.pow(e).mul(&g2).mul(&g1i.pow(e))],
        });
    }
    Ok(out)
}
