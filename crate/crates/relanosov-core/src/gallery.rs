//! Named example representations with the diagnosis outcome each is expected
//! to produce: a cusped integer-matrix free group, a Schottky pair, their
//! direct sum, an induced representation over an index-2 subgroup, and the
//! trivial representation. The tests and the CLI both draw from this gallery.

use nalgebra::{dmatrix, DMatrix};
use thiserror::Error;

use crate::certify::DiagnosisTag;
use crate::group::{
    index_two_swap_table, CosetTable, GroupError, MarkedGroup, PeripheralSubgroup, Presentation,
};
use crate::matdyn::nonzero_blocks;
use crate::word::Word;

/// Absolute tolerance for the trace/eigenvalue classification of blocks.
/// Gallery matrices are integer or dyadic, so the checks are exact in
/// practice; the slack only matters for file-loaded groups.
pub const CLASSIFY_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum GalleryError {
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error("direct-sum factors have ranks {0} and {1}")]
    RankMismatch(usize, usize),
    #[error("inconsistent induction data: {0}")]
    InconsistentTable(String),
    #[error("freeness self-check failed: closest image pair at distance {min_distance:.3e}")]
    FreenessCheckFailed { min_distance: f64 },
    #[error("image of {0} does not split into blocks of dimension ≤ 2")]
    NotBlockStructured(String),
}

/// A named example and the verdict the pipeline is expected to reach on it.
#[derive(Debug, Clone)]
pub struct GalleryItem {
    pub name: String,
    pub group: MarkedGroup<f64>,
    pub expected: DiagnosisTag,
    /// The singular-gap index the expectations refer to.
    pub k: usize,
    /// What the item instantiates and why the expected tag holds.
    pub notes: String,
}

/// Rank-2 free group of integer matrices a = [[1,2],[0,1]], b = [[1,0],[2,1]]
/// with parabolic peripheral classes ⟨a⟩, ⟨b⟩, ⟨a⁻¹b⟩ (all traces exactly ±2).
pub fn make_cusped_free_group() -> GalleryItem {
    let a = dmatrix![1.0, 2.0; 0.0, 1.0];
    let b = dmatrix![1.0, 0.0; 2.0, 1.0];
    let peripherals = vec![
        PeripheralSubgroup::new("a", Word::new(vec![1])),
        PeripheralSubgroup::new("b", Word::new(vec![2])),
        PeripheralSubgroup::new("Ab", Word::new(vec![-1, 2])),
    ];
    let group = MarkedGroup::new(vec![a, b], Presentation::Free, peripherals)
        .expect("integer matrices are invertible");
    GalleryItem {
        name: "cusped".into(),
        group,
        expected: DiagnosisTag::AnosovConsistent,
        k: 1,
        notes: "Geometrically finite cusped pattern: the three peripheral classes are \
                parabolic by direct trace computation (±2 exactly, justifying the peripheral \
                list itself), every boundary fiber should be a single flag, and divergence at \
                k = 1 is exponential off the cusps."
            .into(),
    }
}

/// Convex-cocompact pair g1 = diag(λ, 1/λ), g2 = R_θ·g1·R_θ⁻¹ with a freeness
/// self-check: all reduced words of length ≤ 6 must have pairwise distinct
/// images (minimum separation recorded in the notes).
pub fn make_schottky(lambda: f64, theta: f64) -> Result<GalleryItem, GalleryError> {
    let g1 = dmatrix![lambda, 0.0; 0.0, 1.0 / lambda];
    let rot = dmatrix![theta.cos(), -theta.sin(); theta.sin(), theta.cos()];
    let g2 = &rot * &g1 * rot.transpose();
    let group = MarkedGroup::new(vec![g1, g2], Presentation::Free, vec![])?;
    let ball = group.enumerate_ball(6)?;
    let sep = group.image_separation(&ball).expect("ball of radius 6 has many words");
    if sep.min_distance < 1e-6 {
        return Err(GalleryError::FreenessCheckFailed { min_distance: sep.min_distance });
    }
    Ok(GalleryItem {
        name: "schottky".into(),
        group,
        expected: DiagnosisTag::AnosovConsistent,
        k: 1,
        notes: format!(
            "Funnel-only (convex-cocompact) case: two hyperbolic generators in general \
             position, no peripherals; freeness self-checked on all {} words of length ≤ 6 \
             (min pairwise image distance {:.3e}).",
            ball.len(),
            sep.min_distance
        ),
    })
}

/// Block-diagonal sum ρ(g) = diag(ρ_x(g), ρ_y(g)) over the same free group;
/// peripherals are the union of the factors' peripherals.
pub fn make_direct_sum(x: &GalleryItem, y: &GalleryItem) -> Result<GalleryItem, GalleryError> {
    if x.group.rank() != y.group.rank() {
        return Err(GalleryError::RankMismatch(x.group.rank(), y.group.rank()));
    }
    let (dx, dy) = (x.group.dim(), y.group.dim());
    let d = dx + dy;
    let mut images = Vec::with_capacity(x.group.rank());
    for (mx, my) in x.group.images().iter().zip(y.group.images()) {
        let mut m = DMatrix::<f64>::zeros(d, d);
        m.view_mut((0, 0), (dx, dx)).copy_from(mx);
        m.view_mut((dx, dx), (dy, dy)).copy_from(my);
        images.push(m);
    }
    let peripherals: Vec<PeripheralSubgroup> =
        x.group.peripherals().iter().chain(y.group.peripherals()).cloned().collect();
    let group = MarkedGroup::with_names(
        images,
        Presentation::Free,
        peripherals,
        x.group.generator_names().to_vec(),
    )?;
    Ok(GalleryItem {
        name: format!("{}+{}", x.name, y.name),
        group,
        expected: DiagnosisTag::NonAnosovConsistent,
        k: dx.min(dy),
        notes: format!(
            "Direct sum of `{}` and `{}`: singular values of every image are the merged \
             block singular values, so peripheral powers keep a gap at k while their flag \
             limits along n → ±∞ differ in the second factor — divergent and weakly \
             dominated but with doubled boundary fibers.",
            x.name, y.name
        ),
    })
}

/// Induced representation over the finite-index subgroup described by the
/// coset table: generator η maps to the block-permutation matrix with block
/// (j, i) = ρ₁(α_j⁻¹ η α_i) when η sends coset i to coset j. `sub_rep` is
/// marked on the table's Schreier generators, and its peripherals are carried
/// over with their words expanded to ambient letters.
pub fn make_induced(
    sub_rep: &MarkedGroup<f64>,
    table: &CosetTable,
) -> Result<GalleryItem, GalleryError> {
    let schreier = table.schreier_generators();
    if sub_rep.rank() != schreier.len() {
        return Err(GalleryError::InconsistentTable(format!(
            "sub-representation has rank {} but the table has {} Schreier generators",
            sub_rep.rank(),
            schreier.len()
        )));
    }
    let d0 = sub_rep.dim();
    let n = table.index();
    let rank = table.action().len();
    let mut images = Vec::with_capacity(rank);
    for g in 1..=rank as i32 {
        let eta = Word::new(vec![g]);
        let mut m = DMatrix::<f64>::zeros(n * d0, n * d0);
        for i in 1..=n {
            let nf = table
                .coset_normal_form(&eta, i)
                .map_err(|e| GalleryError::InconsistentTable(e.to_string()))?;
            let block = sub_rep.plain_evaluate(&nf.subgroup_word);
            m.view_mut(((nf.coset - 1) * d0, (i - 1) * d0), (d0, d0)).copy_from(&block);
        }
        images.push(m);
    }
    let peripherals: Vec<PeripheralSubgroup> = sub_rep
        .peripherals()
        .iter()
        .map(|p| {
            PeripheralSubgroup::new(p.label.clone(), expand_schreier(&p.generator_word, table))
        })
        .collect();
    let group = MarkedGroup::new(images, Presentation::Free, peripherals)?;
    Ok(GalleryItem {
        name: "induced".into(),
        group,
        // The verdict depends on the sub-representation; callers refine it.
        expected: DiagnosisTag::Inconclusive,
        k: (n * d0 / 2).max(1),
        notes: format!("Induced from a rank-{} sub-representation over {} cosets.", schreier.len(), n),
    })
}

/// Expand a word in Schreier letters to the ambient generators.
fn expand_schreier(w: &Word, table: &CosetTable) -> Word {
    let gens = table.schreier_generators();
    let mut out = Word::identity();
    for &l in w.letters() {
        let g = &gens[l.unsigned_abs() as usize - 1].word;
        out = out.concat(&if l > 0 { g.clone() } else { g.inverse() });
    }
    out.reduce()
}

/// The standard induced item: index-2 subgroup of F₂ = ⟨a, b⟩ with both
/// generators swapping the cosets, Schreier basis x = a², y = a⁻¹b, z = ba.
/// The sub-representation sends (x, y, z) to a permutation of the matrices
/// the cusped item assigns to (a², a⁻¹b, ba) — so its image is the same
/// discrete free rank-3 group and the representation stays faithful, with
/// every nontrivial element parabolic or hyperbolic — but permuted so that
/// the peripheral z lands on the parabolic a⁻¹b-image while the product yx
/// (the z-block over the second coset) lands hyperbolic. The induced image
/// of the peripheral word ba is then block-diagonal with exactly one
/// parabolic block.
pub fn make_induced_index2() -> GalleryItem {
    let table = index_two_swap_table();
    let sub = MarkedGroup::with_names(
        vec![
            dmatrix![1.0, 2.0; 2.0, 5.0],
            dmatrix![1.0, 4.0; 0.0, 1.0],
            dmatrix![-3.0, -2.0; 2.0, 1.0],
        ],
        Presentation::Free,
        vec![PeripheralSubgroup::new("p", Word::new(vec![3]))],
        vec!["x".into(), "y".into(), "z".into()],
    )
    .expect("sub-representation images are invertible");
    let mut item = make_induced(&sub, &table).expect("table and sub-representation agree");
    item.expected = DiagnosisTag::NonAnosovConsistent;
    item.k = 2;
    item.notes = "Index-2 induction with mixed peripheral type: the peripheral ba restricts \
                  to one parabolic and one hyperbolic diagonal block (trace −2 vs trace 14), \
                  so its flag limits along n → ±∞ split in the hyperbolic block and the \
                  boundary fiber has cardinality 2."
        .into();
    item
}

/// Rank-2 trivial representation: both generators map to the identity.
pub fn make_trivial() -> GalleryItem {
    let group = MarkedGroup::new(
        vec![DMatrix::<f64>::identity(2, 2), DMatrix::<f64>::identity(2, 2)],
        Presentation::Free,
        vec![],
    )
    .expect("identity images are invertible");
    GalleryItem {
        name: "trivial".into(),
        group,
        expected: DiagnosisTag::NotDivergent,
        k: 1,
        notes: "Every singular gap is identically zero, so divergence fails immediately; \
                the rest of the pipeline has nothing to certify."
            .into(),
    }
}

/// All gallery items, in the order `--list` prints them.
pub fn gallery() -> Vec<GalleryItem> {
    let cusped = make_cusped_free_group();
    let schottky = make_schottky(4.0, std::f64::consts::FRAC_PI_4)
        .expect("default Schottky parameters pass the freeness check");
    let mut direct = make_direct_sum(&cusped, &schottky).expect("factors share rank 2");
    direct.name = "direct-sum".into();
    vec![cusped, schottky, direct, make_induced_index2(), make_trivial()]
}

pub fn by_name(name: &str) -> Option<GalleryItem> {
    gallery().into_iter().find(|item| item.name == name)
}

// ---------------------------------------------------------------------------
// Peripheral block structure
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockClass {
    Parabolic,
    Hyperbolic,
    EllipticOrOther,
}

impl BlockClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            BlockClass::Parabolic => "parabolic",
            BlockClass::Hyperbolic => "hyperbolic",
            BlockClass::EllipticOrOther => "elliptic-or-other",
        }
    }
}

#[derive(Debug, Clone)]
pub struct BlockReport {
    /// Ambient coordinate indices of the block.
    pub indices: Vec<usize>,
    pub class: BlockClass,
    pub trace: f64,
}

#[derive(Debug, Clone)]
pub struct StructureEntry {
    pub label: String,
    pub word: Word,
    pub blocks: Vec<BlockReport>,
}

#[derive(Debug, Clone)]
pub struct StructureReport {
    pub entries: Vec<StructureEntry>,
    /// True when the item has no peripherals, in which case the generator
    /// images are classified instead (the informative set for funnel-only
    /// items).
    pub from_generators: bool,
}

impl StructureReport {
    pub fn parabolic_count(&self, label: &str) -> Option<usize> {
        self.entries.iter().find(|e| e.label == label).map(|e| {
            e.blocks.iter().filter(|b| b.class == BlockClass::Parabolic).count()
        })
    }
}

/// Classify a 1×1 or 2×2 block: parabolic means unimodular double eigenvalue
/// without being ±identity, hyperbolic means real eigenvalues of distinct
/// modulus (a 1×1 block is hyperbolic when it genuinely scales).
fn classify_block(m: &DMatrix<f64>) -> BlockClass {
    if m.nrows() == 1 {
        return if m[(0, 0)].abs().ln().abs() > CLASSIFY_TOL {
            BlockClass::Hyperbolic
        } else {
            BlockClass::EllipticOrOther
        };
    }
    let tr = m.trace();
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let disc = tr * tr - 4.0 * det;
    if (tr.abs() - 2.0).abs() <= CLASSIFY_TOL && disc.abs() <= 4.0 * CLASSIFY_TOL {
        let sign = if tr >= 0.0 { 1.0 } else { -1.0 };
        let off_identity = (m - DMatrix::<f64>::identity(2, 2) * sign).norm();
        return if off_identity > 1e-9 { BlockClass::Parabolic } else { BlockClass::EllipticOrOther };
    }
    if disc > 0.0 {
        let root = disc.sqrt();
        let (l1, l2) = ((tr + root) / 2.0, (tr - root) / 2.0);
        let (hi, lo) = (l1.abs().max(l2.abs()), l1.abs().min(l2.abs()));
        if lo > 0.0 && hi / lo > 1.0 + CLASSIFY_TOL {
            return BlockClass::Hyperbolic;
        }
    }
    BlockClass::EllipticOrOther
}

/// Classify each peripheral image block by block (per-image nonzero pattern).
/// Items without peripherals report their generator images instead. Blocks of
/// dimension > 2 are refused: the classification is a statement about rank-1
/// and rank-2 constituents.
pub fn peripheral_structure_report(item: &GalleryItem) -> Result<StructureReport, GalleryError> {
    let g = &item.group;
    let mut targets: Vec<(String, Word)> = g
        .peripherals()
        .iter()
        .map(|p| (p.label.clone(), p.generator_word.clone()))
        .collect();
    let from_generators = targets.is_empty();
    if from_generators {
        targets = g
            .generator_names()
            .iter()
            .enumerate()
            .map(|(i, name)| (name.clone(), Word::new(vec![(i + 1) as i32])))
            .collect();
    }
    let mut entries = Vec::with_capacity(targets.len());
    for (label, word) in targets {
        let m = g.plain_evaluate(&word);
        let mut blocks = Vec::new();
        for indices in nonzero_blocks(m.nrows(), [&m]) {
            if indices.len() > 2 {
                return Err(GalleryError::NotBlockStructured(label));
            }
            let sub = DMatrix::from_fn(indices.len(), indices.len(), |i, j| {
                m[(indices[i], indices[j])]
            });
            blocks.push(BlockReport { class: classify_block(&sub), trace: sub.trace(), indices });
        }
        entries.push(StructureEntry { label, word, blocks });
    }
    Ok(StructureReport { entries, from_generators })
}
