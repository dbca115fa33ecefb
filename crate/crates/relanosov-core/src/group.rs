//! Marked groups with peripheral structure.
//!
//! A [`MarkedGroup`] is a finite symmetric generating set marked with
//! unit-determinant matrix images (the representation), a presentation kind
//! controlling exact element enumeration, and a list of declared peripheral
//! subgroups. Coset tables for finite-index subgroups provide the rewriting
//! `w·α_i = α_j·η′` used to build induced representations.

use std::collections::HashMap;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::scalar::Scalar;
use crate::word::Word;

#[derive(Debug, Error)]
pub enum GroupError {
    #[error("presentation kind does not support exact enumeration")]
    UnsupportedPresentation,
    #[error("peripheral subgroup {0:?} has an empty generator word")]
    EmptyPeripheral(String),
    #[error("peripheral {label:?} word uses letter {letter} outside rank {rank}")]
    InvalidLetter { label: String, letter: i32, rank: usize },
    #[error("generator {index} image is {rows}x{cols}, expected {dim}x{dim}")]
    BadShape { index: usize, rows: usize, cols: usize, dim: usize },
    #[error("generator {index} image determinant is {distance:.3e} away from 1 after normalization")]
    DeterminantNotOne { index: usize, distance: f64 },
    #[error("generator {index} image is numerically singular")]
    SingularGenerator { index: usize },
    #[error("free-product factor {index} has invalid order (must be ≥ 2 or infinite)")]
    InvalidFactorOrder { index: usize },
    #[error("inconsistent coset table: {0}")]
    InconsistentTable(String),
    #[error("word does not lie in the subgroup fixed by the coset table")]
    NotInSubgroup,
}

/// Presentation kind. Only free and free-product presentations are enumerated
/// exactly; `Opaque` marks a matrix group with unknown relations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Presentation {
    Free,
    /// Free product of cyclic groups, one factor per generator;
    /// `None` is an infinite factor, `Some(n)` a ℤ/n factor (n ≥ 2).
    FreeProduct { orders: Vec<Option<u32>> },
    Opaque,
}

/// A declared peripheral subgroup ⟨c⟩, cyclic on a nonempty reduced word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeripheralSubgroup {
    pub label: String,
    pub generator_word: Word,
}

impl PeripheralSubgroup {
    pub fn new(label: impl Into<String>, generator_word: Word) -> Self {
        PeripheralSubgroup { label: label.into(), generator_word }
    }
}

/// Powers c, c², …, c^n_max of a peripheral generator, freely reduced.
pub fn peripheral_powers(p: &PeripheralSubgroup, n_max: usize) -> Result<Vec<Word>, GroupError> {
    if p.generator_word.is_empty() {
        return Err(GroupError::EmptyPeripheral(p.label.clone()));
    }
    let mut out = Vec::with_capacity(n_max);
    let mut acc = Word::identity();
    for _ in 0..n_max {
        acc = acc.concat(&p.generator_word);
        out.push(acc.clone());
    }
    Ok(out)
}

/// Result of the exact pairwise image-separation scan (used by freeness
/// self-checks).
#[derive(Debug, Clone, Copy)]
pub struct ImageSeparation {
    pub min_distance: f64,
    pub closest: (usize, usize),
}

/// Generators with matrix images, peripheral structure, and a presentation
/// kind. Inverse generators are implicit (signed letters), never stored.
#[derive(Debug, Clone)]
pub struct MarkedGroup<T: Scalar> {
    rank: usize,
    dim: usize,
    images: Vec<DMatrix<T>>,
    inverse_images: Vec<DMatrix<T>>,
    presentation: Presentation,
    peripherals: Vec<PeripheralSubgroup>,
    generator_names: Vec<String>,
}

/// Default generator names a, b, c, ….
pub fn default_generator_names(rank: usize) -> Vec<String> {
    (0..rank)
        .map(|i| {
            if i < 26 {
                char::from(b'a' + i as u8).to_string()
            } else {
                format!("g{}", i + 1)
            }
        })
        .collect()
}

impl<T: Scalar> MarkedGroup<T> {
    /// Build a marked group. Images are normalized to |det| = 1 by scaling and
    /// must then have determinant within 1e-9 of 1.
    pub fn new(
        images: Vec<DMatrix<T>>,
        presentation: Presentation,
        peripherals: Vec<PeripheralSubgroup>,
    ) -> Result<Self, GroupError> {
        let rank = images.len();
        let names = default_generator_names(rank);
        Self::with_names(images, presentation, peripherals, names)
    }

    pub fn with_names(
        images: Vec<DMatrix<T>>,
        presentation: Presentation,
        peripherals: Vec<PeripheralSubgroup>,
        generator_names: Vec<String>,
    ) -> Result<Self, GroupError> {
        let rank = images.len();
        let dim = images.first().map_or(0, |m| m.nrows());
        if let Presentation::FreeProduct { orders } = &presentation {
            if orders.len() != rank {
                return Err(GroupError::InconsistentTable(format!(
                    "{} factor orders for rank {rank}",
                    orders.len()
                )));
            }
            for (index, o) in orders.iter().enumerate() {
                if matches!(o, Some(n) if *n < 2) {
                    return Err(GroupError::InvalidFactorOrder { index });
                }
            }
        }
        let mut normalized = Vec::with_capacity(rank);
        let mut inverses = Vec::with_capacity(rank);
        for (index, m) in images.into_iter().enumerate() {
            if m.nrows() != dim || m.ncols() != dim || dim == 0 {
                return Err(GroupError::BadShape {
                    index,
                    rows: m.nrows(),
                    cols: m.ncols(),
                    dim,
                });
            }
            let det = m.determinant();
            let modulus = det.modulus();
            if !(modulus.is_finite() && modulus > 0.0) {
                return Err(GroupError::SingularGenerator { index });
            }
            let scale = modulus.powf(1.0 / dim as f64);
            // Rescaling by a determinant that is 1 only up to LU roundoff
            // would smear that roundoff over every entry; keep exact inputs
            // (integer matrices in particular) bit-exact.
            let m = if (scale - 1.0).abs() > 1e-12 {
                m / T::from_real(scale)
            } else {
                m
            };
            let distance = (m.determinant() - T::one()).modulus();
            if distance > 1e-9 {
                return Err(GroupError::DeterminantNotOne { index, distance });
            }
            let inv = m
                .clone()
                .try_inverse()
                .ok_or(GroupError::SingularGenerator { index })?;
            normalized.push(m);
            inverses.push(inv);
        }
        for p in &peripherals {
            if p.generator_word.is_empty() {
                return Err(GroupError::EmptyPeripheral(p.label.clone()));
            }
            debug_assert!(p.generator_word.is_reduced());
            for &l in p.generator_word.letters() {
                if l.unsigned_abs() as usize > rank {
                    return Err(GroupError::InvalidLetter {
                        label: p.label.clone(),
                        letter: l,
                        rank,
                    });
                }
            }
        }
        Ok(MarkedGroup {
            rank,
            dim,
            images: normalized,
            inverse_images: inverses,
            presentation,
            peripherals,
            generator_names,
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn presentation(&self) -> &Presentation {
        &self.presentation
    }

    pub fn peripherals(&self) -> &[PeripheralSubgroup] {
        &self.peripherals
    }

    pub fn generator_names(&self) -> &[String] {
        &self.generator_names
    }

    pub fn images(&self) -> &[DMatrix<T>] {
        &self.images
    }

    /// Image of a single signed letter.
    pub fn letter_image(&self, letter: i32) -> &DMatrix<T> {
        let idx = (letter.unsigned_abs() as usize) - 1;
        if letter > 0 {
            &self.images[idx]
        } else {
            &self.inverse_images[idx]
        }
    }

    /// Plain (unscaled) product of letter images. Suitable for short words;
    /// long products should go through `matdyn::evaluate`.
    pub fn plain_evaluate(&self, w: &Word) -> DMatrix<T> {
        let mut acc = DMatrix::<T>::identity(self.dim, self.dim);
        for &l in w.letters() {
            acc = acc * self.letter_image(l);
        }
        acc
    }

    /// Same marked structure with different images (used by deformations).
    pub fn with_images(&self, images: Vec<DMatrix<T>>) -> Result<Self, GroupError> {
        Self::with_names(
            images,
            self.presentation.clone(),
            self.peripherals.clone(),
            self.generator_names.clone(),
        )
    }

    /// All freely reduced words of length exactly `r`, in shortlex order.
    ///
    /// Exact for free and free-product presentations; `Opaque` groups are not
    /// enumerable (their relations are unknown).
    pub fn enumerate_sphere(&self, r: usize) -> Result<Vec<Word>, GroupError> {
        match &self.presentation {
            Presentation::Free => {
                let caps = vec![(usize::MAX, usize::MAX); self.rank];
                Ok(self.sphere_with_caps(r, &caps))
            }
            Presentation::FreeProduct { orders } => {
                // Canonical geodesic exponents in ℤ/n: 1..⌊n/2⌋ positive and
                // 1..⌊(n-1)/2⌋ negative, so each element appears exactly once
                // at its geodesic length.
                let caps = orders
                    .iter()
                    .map(|o| match o {
                        None => (usize::MAX, usize::MAX),
                        Some(n) => ((*n as usize) / 2, ((*n as usize) - 1) / 2),
                    })
                    .collect::<Vec<_>>();
                Ok(self.sphere_with_caps(r, &caps))
            }
            Presentation::Opaque => Err(GroupError::UnsupportedPresentation),
        }
    }

    /// DFS over letter sequences with no adjacent inverse pair and per-factor
    /// run-length caps (positive cap, negative cap). Letters are tried in rank
    /// order, so the output is shortlex-sorted by construction.
    fn sphere_with_caps(&self, r: usize, caps: &[(usize, usize)]) -> Vec<Word> {
        let mut out = Vec::new();
        let mut stack: Vec<i32> = Vec::with_capacity(r);
        fn dfs(
            rank: usize,
            r: usize,
            caps: &[(usize, usize)],
            stack: &mut Vec<i32>,
            out: &mut Vec<Word>,
        ) {
            if stack.len() == r {
                out.push(Word::new(stack.clone()));
                return;
            }
            for idx in 1..=rank {
                for letter in [idx as i32, -(idx as i32)] {
                    if stack.last().is_some_and(|&p| p == -letter) {
                        continue;
                    }
                    let run = 1 + stack
                        .iter()
                        .rev()
                        .take_while(|&&p| p == letter)
                        .count();
                    let (pos_cap, neg_cap) = caps[idx - 1];
                    let cap = if letter > 0 { pos_cap } else { neg_cap };
                    if run > cap {
                        continue;
                    }
                    stack.push(letter);
                    dfs(rank, r, caps, stack, out);
                    stack.pop();
                }
            }
        }
        dfs(self.rank, r, caps, &mut stack, &mut out);
        out
    }

    /// All elements of the ball of radius `r` (spheres 0..=r concatenated).
    pub fn enumerate_ball(&self, r: usize) -> Result<Vec<Word>, GroupError> {
        let mut out = Vec::new();
        for s in 0..=r {
            out.extend(self.enumerate_sphere(s)?);
        }
        Ok(out)
    }

    /// Exact minimum pairwise Frobenius distance between the images of the
    /// given words (freeness self-checks). `None` if fewer than two words.
    pub fn image_separation(&self, words: &[Word]) -> Option<ImageSeparation> {
        if words.len() < 2 {
            return None;
        }
        let mats: Vec<DMatrix<T>> = words.iter().map(|w| self.plain_evaluate(w)).collect();
        let mut best = f64::INFINITY;
        let mut pair = (0, 0);
        for i in 0..mats.len() {
            for j in (i + 1)..mats.len() {
                let d = (&mats[i] - &mats[j]).norm();
                if d < best {
                    best = d;
                    pair = (i, j);
                }
            }
        }
        Some(ImageSeparation { min_distance: best, closest: pair })
    }

    /// Heuristic count of distinct group elements among `words`, identifying
    /// words whose images agree entrywise after quantization to `tol`.
    /// This is a hash on rounded entries, not a metric clustering: images
    /// within `tol` of a cell boundary may land in different cells.
    pub fn distinct_images(&self, words: &[Word], tol: f64) -> usize {
        let mut seen: HashMap<Vec<(i64, i64)>, ()> = HashMap::new();
        for w in words {
            let m = self.plain_evaluate(w);
            let key: Vec<(i64, i64)> = m
                .iter()
                .map(|&e| {
                    (
                        (e.re() / tol).round() as i64,
                        (e.im() / tol).round() as i64,
                    )
                })
                .collect();
            seen.entry(key).or_insert(());
        }
        seen.len()
    }
}

/// A nontrivial Schreier generator α_{x·i}⁻¹ · x · α_i of the subgroup fixed
/// by a coset table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchreierGenerator {
    pub word: Word,
    pub generator: usize,
    pub coset: usize,
}

/// Output of [`CosetTable::coset_normal_form`]: `w·α_i = α_coset·word`, with
/// `subgroup_word` the same element rewritten in Schreier letters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CosetNormalForm {
    /// 1-based target coset index j.
    pub coset: usize,
    /// η′ = α_j⁻¹ · w · α_i in the ambient letters, freely reduced.
    pub word: Word,
    /// η′ in the letters of [`CosetTable::schreier_generators`].
    pub subgroup_word: Word,
}

/// Left-coset table for a finite-index subgroup: Γ = ⊔ α_i Γ′, generators
/// acting on coset indices by left multiplication. Representative α_1 is the
/// identity.
#[derive(Debug, Clone)]
pub struct CosetTable {
    index: usize,
    /// action[g][i] = 0-based coset of (generator g+1)·α_{i+1}Γ′.
    action: Vec<Vec<usize>>,
    inverse_action: Vec<Vec<usize>>,
    representatives: Vec<Word>,
    schreier: Vec<SchreierGenerator>,
    /// (generator, coset) → index into `schreier`, None when trivial.
    schreier_lookup: Vec<Vec<Option<usize>>>,
}

impl CosetTable {
    pub fn new(action: Vec<Vec<usize>>, representatives: Vec<Word>) -> Result<Self, GroupError> {
        let index = representatives.len();
        if index == 0 {
            return Err(GroupError::InconsistentTable("empty table".into()));
        }
        if !representatives[0].is_empty() {
            return Err(GroupError::InconsistentTable(
                "first representative must be the identity".into(),
            ));
        }
        let mut inverse_action = Vec::with_capacity(action.len());
        for (g, perm) in action.iter().enumerate() {
            if perm.len() != index {
                return Err(GroupError::InconsistentTable(format!(
                    "generator {g} permutation has length {} for index {index}",
                    perm.len()
                )));
            }
            let mut inv = vec![usize::MAX; index];
            for (from, &to) in perm.iter().enumerate() {
                if to >= index || inv[to] != usize::MAX {
                    return Err(GroupError::InconsistentTable(format!(
                        "generator {g} action is not a bijection"
                    )));
                }
                inv[to] = from;
            }
            inverse_action.push(inv);
        }
        let mut table = CosetTable {
            index,
            action,
            inverse_action,
            representatives,
            schreier: Vec::new(),
            schreier_lookup: Vec::new(),
        };
        for (i, rep) in table.representatives.iter().enumerate() {
            if table.apply(rep, 0) != i {
                return Err(GroupError::InconsistentTable(format!(
                    "representative {i} does not map coset 1 to coset {}",
                    i + 1
                )));
            }
        }
        table.build_schreier();
        Ok(table)
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn representatives(&self) -> &[Word] {
        &self.representatives
    }

    pub fn action(&self) -> &[Vec<usize>] {
        &self.action
    }

    /// Apply one signed letter to a 0-based coset index.
    pub fn apply_letter(&self, letter: i32, coset: usize) -> usize {
        let g = (letter.unsigned_abs() as usize) - 1;
        if letter > 0 {
            self.action[g][coset]
        } else {
            self.inverse_action[g][coset]
        }
    }

    /// Apply a word (letters act right-to-left: w·α_i means the rightmost
    /// letter hits the coset first).
    pub fn apply(&self, w: &Word, coset: usize) -> usize {
        w.letters()
            .iter()
            .rev()
            .fold(coset, |c, &l| self.apply_letter(l, c))
    }

    fn build_schreier(&mut self) {
        let rank = self.action.len();
        let mut lookup = vec![vec![None; self.index]; rank];
        let mut gens = Vec::new();
        for g in 0..rank {
            for i in 0..self.index {
                let letter = (g + 1) as i32;
                let j = self.action[g][i];
                // α_j⁻¹ · x · α_i, freely reduced.
                let word = self.representatives[j]
                    .inverse()
                    .concat(&Word::new(vec![letter]))
                    .concat(&self.representatives[i]);
                if !word.is_empty() {
                    lookup[g][i] = Some(gens.len());
                    gens.push(SchreierGenerator { word, generator: g, coset: i });
                }
            }
        }
        self.schreier = gens;
        self.schreier_lookup = lookup;
    }

    /// The nontrivial Schreier generators, a free basis of the subgroup.
    /// Their order defines the subgroup letter indices used by
    /// [`CosetTable::rewrite`].
    pub fn schreier_generators(&self) -> &[SchreierGenerator] {
        &self.schreier
    }

    /// Reidemeister–Schreier rewriting: express `w` (which must fix `start`)
    /// as a word in the Schreier generators.
    pub fn rewrite(&self, w: &Word, start: usize) -> Result<Word, GroupError> {
        let m = w.len();
        // cosets[t] = coset after the last m−t letters have acted; so
        // cosets[m] = start and cosets[0] must return to start.
        let mut cosets = vec![0usize; m + 1];
        cosets[m] = start;
        for t in (1..=m).rev() {
            cosets[t - 1] = self.apply_letter(w.letters()[t - 1], cosets[t]);
        }
        if cosets[0] != start {
            return Err(GroupError::NotInSubgroup);
        }
        let mut letters = Vec::new();
        for t in 1..=m {
            let l = w.letters()[t - 1];
            let g = (l.unsigned_abs() as usize) - 1;
            if l > 0 {
                if let Some(idx) = self.schreier_lookup[g][cosets[t]] {
                    letters.push((idx + 1) as i32);
                }
            } else if let Some(idx) = self.schreier_lookup[g][cosets[t - 1]] {
                letters.push(-((idx + 1) as i32));
            }
        }
        Ok(Word::new(letters).reduce())
    }

    /// Rewrite `w·α_i = α_j·η′` (indices 1-based, i defaults to 1 at call
    /// sites). Returns j together with η′ in ambient and in subgroup letters.
    pub fn coset_normal_form(&self, w: &Word, i: usize) -> Result<CosetNormalForm, GroupError> {
        if i == 0 || i > self.index {
            return Err(GroupError::InconsistentTable(format!(
                "coset index {i} out of range 1..={}",
                self.index
            )));
        }
        let j = self.apply(w, i - 1) + 1;
        let word = self.representatives[j - 1]
            .inverse()
            .concat(w)
            .concat(&self.representatives[i - 1]);
        let subgroup_word = self.rewrite(&word, 0)?;
        Ok(CosetNormalForm { coset: j, word, subgroup_word })
    }
}

/// The index-2 table over a rank-2 free group where both generators swap the
/// two cosets (subgroup of even-length words), with representatives ε and a.
pub fn index_two_swap_table() -> CosetTable {
    CosetTable::new(vec![vec![1, 0], vec![1, 0]], vec![Word::identity(), Word::new(vec![1])])
        .expect("static table is consistent")
}
