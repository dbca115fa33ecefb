//! Matrix dynamics: scaled products, singular data, top-k subspaces, the
//! angle bounds controlling them, and the thin-part metric primitives.
//!
//! All singular values are tracked in natural-log scale. Long products are
//! renormalized every few factors so that Schottky-type elements (singular
//! ratios ~9^r) never overflow doubles.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::flags::{angle_distance, FlagError, Subspace};
use crate::group::MarkedGroup;
use crate::scalar::Scalar;
use crate::word::Word;

/// Log gap below which U_k is considered undefined.
pub const GAP_TOL: f64 = 1e-8;

/// Renormalize after this many factors in a product.
const RENORM_PERIOD: usize = 8;

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("no singular gap at k={k} (log gap {gap:.3e})")]
    NoGap { k: usize, gap: f64 },
    #[error("gram matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("time {t} outside excursion [0, {total}]")]
    BadTime { t: f64, total: f64 },
    #[error("invalid parameter: {0}")]
    BadParameter(String),
    #[error(transparent)]
    Flag(#[from] FlagError),
}

/// A matrix stored as e^{log_scale}·entries, with entries kept at max-norm in
/// [0.5, 2] so long products stay in floating range. Exact zero entries stay
/// exact under renormalization.
#[derive(Debug, Clone)]
pub struct ScaledMatrix<T: Scalar> {
    entries: DMatrix<T>,
    log_scale: f64,
}

impl<T: Scalar> ScaledMatrix<T> {
    pub fn identity(d: usize) -> Self {
        ScaledMatrix { entries: DMatrix::identity(d, d), log_scale: 0.0 }
    }

    pub fn from_matrix(m: DMatrix<T>) -> Self {
        let mut s = ScaledMatrix { entries: m, log_scale: 0.0 };
        s.renormalize();
        s
    }

    pub fn entries(&self) -> &DMatrix<T> {
        &self.entries
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// e^{log_scale}·entries; overflows for very long products — prefer the
    /// scaled accessors.
    pub fn full_matrix(&self) -> DMatrix<T> {
        &self.entries * T::from_real(self.log_scale.exp())
    }

    fn max_norm(&self) -> f64 {
        self.entries.iter().map(|e| e.modulus()).fold(0.0, f64::max)
    }

    fn renormalize(&mut self) {
        let s = self.max_norm();
        if s.is_finite() && s > 0.0 && !(0.5..=2.0).contains(&s) {
            self.entries.iter_mut().for_each(|e| *e /= T::from_real(s));
            self.log_scale += s.ln();
        }
    }

    pub fn mul(&self, other: &ScaledMatrix<T>) -> ScaledMatrix<T> {
        let mut out = ScaledMatrix {
            entries: &self.entries * &other.entries,
            log_scale: self.log_scale + other.log_scale,
        };
        out.renormalize();
        out
    }

    pub fn inverse(&self) -> Result<ScaledMatrix<T>, MatrixError> {
        let inv = self
            .entries
            .clone()
            .try_inverse()
            .ok_or_else(|| MatrixError::NumericalFailure("matrix not invertible".into()))?;
        let mut out = ScaledMatrix { entries: inv, log_scale: -self.log_scale };
        out.renormalize();
        Ok(out)
    }

    /// Integer power by repeated squaring, so asymptotic-scale exponents stay
    /// cheap; negative exponents go through the inverse.
    ///
    /// Caveat: squaring is exponentially unstable on dense unipotent-up-to-sign
    /// matrices (the n² terms cancel since the nilpotent part squares to zero,
    /// and the surviving O(n) part shrinks relative to the intermediate
    /// products by a factor of n per squaring, amplifying rounding noise by
    /// the same factor). Use [`stable_pow`] when the base may be parabolic.
    pub fn pow(&self, n: i64) -> Result<ScaledMatrix<T>, MatrixError> {
        let base = if n < 0 { self.inverse()? } else { self.clone() };
        let mut exp = n.unsigned_abs();
        let mut acc = ScaledMatrix::identity(self.dim());
        let mut sq = base;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = acc.mul(&sq);
            }
            exp >>= 1;
            if exp > 0 {
                sq = sq.mul(&sq);
            }
        }
        Ok(acc)
    }
}

/// Relative tolerance for the nilpotency check in [`unipotent_part`].
const UNIPOTENT_TOL: f64 = 1e-9;

/// Decompose m = s·(I + N) with s = ±1 and N nilpotent, when possible.
/// Nilpotency is tested numerically: ‖N^d‖ must vanish relative to the
/// accumulated ‖N‖ powers.
fn unipotent_part<T: Scalar>(m: &DMatrix<T>) -> Option<(f64, DMatrix<T>)> {
    let d = m.nrows();
    for sign in [1.0, -1.0] {
        let nil = m * T::from_real(sign) - DMatrix::<T>::identity(d, d);
        let norm = nil.norm();
        if norm == 0.0 {
            return Some((sign, nil));
        }
        let mut p = nil.clone();
        for _ in 1..d {
            p = &p * &nil;
        }
        if p.norm() <= UNIPOTENT_TOL * norm.powi(d as i32).max(norm) {
            return Some((sign, nil));
        }
    }
    None
}

/// cⁿ with a numerically exact route for parabolic-type bases: when c is
/// unipotent up to sign, cⁿ = sⁿ·Σ_{k<d} C(n,k)·Nᵏ (generalized binomials, so
/// negative n needs no inverse). Everything else — gapped, elliptic — falls
/// through to [`ScaledMatrix::pow`], whose squaring is stable exactly in
/// those cases.
pub fn stable_pow<T: Scalar>(c: &ScaledMatrix<T>, n: i64) -> Result<ScaledMatrix<T>, MatrixError> {
    // Unipotent detection needs the unscaled matrix; peripheral-generator
    // images always fit, and anything too large to represent cannot be
    // unipotent anyway (its entries would be polynomial in the word length).
    if c.log_scale().abs() < 300.0 {
        if let Some((sign, nil)) = unipotent_part(&c.full_matrix()) {
            let d = c.dim();
            let mut sum = DMatrix::<T>::identity(d, d);
            let mut term = DMatrix::<T>::identity(d, d);
            for k in 0..d - 1 {
                // term ← term·N·(n − k)/(k + 1), i.e. C(n, k+1)·N^{k+1}.
                let factor = (n as f64 - k as f64) / (k as f64 + 1.0);
                term = &term * &nil * T::from_real(factor);
                sum += &term;
            }
            if sign < 0.0 && n & 1 == 1 {
                sum = -sum;
            }
            return Ok(ScaledMatrix::from_matrix(sum));
        }
    }
    c.pow(n)
}

/// log|det| through the scale: ln|det(entries)| + d·log_scale.
pub fn log_abs_det<T: Scalar>(m: &ScaledMatrix<T>) -> f64 {
    m.entries.determinant().modulus().ln() + m.dim() as f64 * m.log_scale
}

/// ρ(w) as a scaled product of generator images, renormalized periodically.
pub fn evaluate<T: Scalar>(group: &MarkedGroup<T>, w: &Word) -> ScaledMatrix<T> {
    let mut acc = ScaledMatrix::identity(group.dim());
    for (count, &l) in w.letters().iter().enumerate() {
        acc.entries = &acc.entries * group.letter_image(l);
        if (count + 1) % RENORM_PERIOD == 0 {
            acc.renormalize();
        }
    }
    acc.renormalize();
    acc
}

/// Full SVD in log scale: log σ_1 ≥ … ≥ log σ_d (including the scale offset)
/// with orthonormal left/right frames.
///
/// Accuracy note: a dense SVD resolves σ_k only down to ~machine-eps·σ_1, so
/// values (and frames) below that are noise. Magnitudes of extremely
/// dominated products should be read through [`log_singular_values`] /
/// [`CompoundProducts`] instead; exactly block-structured matrices (direct
/// sums, induced block permutations) are unaffected because the SVD splits
/// along the blocks.
#[derive(Debug, Clone)]
pub struct SingularData<T: Scalar> {
    pub log_sigma: Vec<f64>,
    /// Columns are left singular vectors, ordered by descending σ.
    pub left: DMatrix<T>,
    /// Columns are right singular vectors, same order.
    pub right: DMatrix<T>,
}

pub fn singular_data<T: Scalar>(m: &ScaledMatrix<T>) -> Result<SingularData<T>, MatrixError> {
    if m.entries.iter().any(|e| !e.modulus().is_finite()) {
        return Err(MatrixError::NumericalFailure("non-finite entries".into()));
    }
    let svd = m.entries.clone().svd(true, true);
    let u = svd
        .u
        .ok_or_else(|| MatrixError::NumericalFailure("SVD returned no left frame".into()))?;
    let v_t = svd
        .v_t
        .ok_or_else(|| MatrixError::NumericalFailure("SVD returned no right frame".into()))?;
    let log_sigma: Vec<f64> = svd
        .singular_values
        .iter()
        .map(|&s| s.ln() + m.log_scale)
        .collect();
    let (left, right) = polish_frames(&m.entries, &u, &v_t.adjoint());
    Ok(SingularData { log_sigma, left, right })
}

/// One subspace-iteration pass over computed singular frames: with exact
/// factors M = UΣV*, applying M to an approximate V and re-orthonormalizing
/// contracts the error of column i by σ-ratios, and likewise M* on U. The
/// library SVD can leave O(1e-2) frame error on near-rank-deficient inputs
/// (σ_d ~ eps·σ_1, routine for asymptotic parabolic powers) where the
/// polished frames are correct to machine precision.
fn polish_frames<T: Scalar>(
    m: &DMatrix<T>,
    u: &DMatrix<T>,
    v: &DMatrix<T>,
) -> (DMatrix<T>, DMatrix<T>) {
    let right = orthonormal_q(&(m.adjoint() * u), v);
    let left = orthonormal_q(&(m * &right), u);
    (left, right)
}

/// Q of the QR factorization, or `fallback` when the input is too degenerate
/// to span (a zero column makes Q's tail arbitrary, and an exactly singular
/// input deserves the frame the SVD already chose).
fn orthonormal_q<T: Scalar>(m: &DMatrix<T>, fallback: &DMatrix<T>) -> DMatrix<T> {
    let qr = m.clone().qr();
    let r = qr.r();
    let scale = (0..m.ncols()).map(|i| r[(i, i)].modulus()).fold(0.0, f64::max);
    if scale == 0.0 || (0..m.ncols()).any(|i| r[(i, i)].modulus() < f64::MIN_POSITIVE * scale) {
        return fallback.clone();
    }
    qr.q()
}

impl<T: Scalar> SingularData<T> {
    pub fn dim(&self) -> usize {
        self.log_sigma.len()
    }

    /// log(σ_k/σ_{k+1}), 1-based k in 1..d.
    pub fn log_gap(&self, k: usize) -> f64 {
        self.log_sigma[k - 1] - self.log_sigma[k]
    }

    /// log(σ_1/σ_d) = log ‖g‖‖g⁻¹‖.
    pub fn log_condition(&self) -> f64 {
        self.log_sigma[0] - self.log_sigma[self.dim() - 1]
    }

    /// Top-k left singular subspace U_k; requires a gap at k.
    pub fn uk(&self, k: usize) -> Result<Subspace<T>, MatrixError> {
        let gap = self.log_gap(k);
        if !(gap > GAP_TOL) {
            return Err(MatrixError::NoGap { k, gap });
        }
        Ok(Subspace::from_orthonormal_columns(self.left.columns(0, k).into_owned())?)
    }
}

/// U_k(g): top-k left singular subspace of a scaled matrix.
pub fn uk_subspace<T: Scalar>(m: &ScaledMatrix<T>, k: usize) -> Result<Subspace<T>, MatrixError> {
    singular_data(m)?.uk(k)
}

/// g⁻¹·(U_k(g))^⊥, orthonormalized: by the singular-value identity this is
/// U_{d−k}(g⁻¹), but it is computed here from g's left frame and an explicit
/// inverse so the identity can be verified independently.
pub fn u_dk_inverse<T: Scalar>(m: &ScaledMatrix<T>, k: usize) -> Result<Subspace<T>, MatrixError> {
    let data = singular_data(m)?;
    let gap = data.log_gap(k);
    if !(gap > GAP_TOL) {
        return Err(MatrixError::NoGap { k, gap });
    }
    let d = data.dim();
    let complement = data.left.columns(k, d - k).into_owned();
    let inv = m
        .entries
        .clone()
        .try_inverse()
        .ok_or_else(|| MatrixError::NumericalFailure("matrix not invertible".into()))?;
    Ok(Subspace::new(inv * complement)?)
}

/// Connected components of the joint nonzero pattern (exact zeros only) of a
/// family of d×d matrices: the finest coordinate partition into blocks that
/// every matrix preserves. Blocks are ordered by smallest index, indices
/// ascending within each block.
pub fn nonzero_blocks<'a, T, I>(d: usize, mats: I) -> Vec<Vec<usize>>
where
    T: Scalar,
    I: IntoIterator<Item = &'a DMatrix<T>>,
{
    let mut parent: Vec<usize> = (0..d).collect();
    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for m in mats {
        for i in 0..d {
            for j in 0..d {
                if m[(i, j)].modulus() != 0.0 {
                    let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                    parent[a] = b;
                }
            }
        }
    }
    let mut blocks: Vec<(usize, Vec<usize>)> = Vec::new();
    for i in 0..d {
        let r = root(&mut parent, i);
        match blocks.iter_mut().find(|(rep, _)| *rep == r) {
            Some((_, block)) => block.push(i),
            None => blocks.push((r, vec![i])),
        }
    }
    blocks.into_iter().map(|(_, block)| block).collect()
}

/// Coordinate blocks preserved by every generator image; a marking is
/// block-decomposable exactly when more than one block comes back.
pub fn invariant_blocks<T: Scalar>(group: &MarkedGroup<T>) -> Vec<Vec<usize>> {
    nonzero_blocks(group.dim(), group.images())
}

fn block_submatrix<T: Scalar>(m: &DMatrix<T>, block: &[usize]) -> DMatrix<T> {
    DMatrix::from_fn(block.len(), block.len(), |i, j| m[(block[i], block[j])])
}

/// ρ(w) restricted to one invariant coordinate block, as its own scaled
/// product. The point of per-block scales: a direct sum whose blocks grow at
/// different rates exhausts the f64 exponent range of a single shared scale
/// (the slow block's entries get divided down to zero once the rate gap
/// exceeds ~e^745), while each block on its own stays representable forever.
pub fn evaluate_block<T: Scalar>(
    group: &MarkedGroup<T>,
    w: &Word,
    block: &[usize],
) -> ScaledMatrix<T> {
    let mut acc = ScaledMatrix::identity(block.len());
    for (count, &l) in w.letters().iter().enumerate() {
        acc.entries = &acc.entries * block_submatrix(group.letter_image(l), block);
        if (count + 1) % RENORM_PERIOD == 0 {
            acc.renormalize();
        }
    }
    acc.renormalize();
    acc
}

/// Reassemble singular data of a block-diagonal matrix from per-block data
/// embedded at the given index sets (which must partition 0..dim). Columns are
/// ordered by descending log σ across all blocks; exact ties break by block
/// and then by position, so the result is deterministic.
pub fn merge_block_singular_data<T: Scalar>(
    dim: usize,
    parts: &[(Vec<usize>, SingularData<T>)],
) -> SingularData<T> {
    let mut order: Vec<(usize, usize)> = Vec::with_capacity(dim);
    for (b, (_, data)) in parts.iter().enumerate() {
        for c in 0..data.dim() {
            order.push((b, c));
        }
    }
    debug_assert_eq!(order.len(), dim);
    order.sort_by(|&(b1, c1), &(b2, c2)| {
        let s1 = parts[b1].1.log_sigma[c1];
        let s2 = parts[b2].1.log_sigma[c2];
        s2.total_cmp(&s1).then(b1.cmp(&b2)).then(c1.cmp(&c2))
    });
    let mut log_sigma = Vec::with_capacity(dim);
    let mut left = DMatrix::<T>::zeros(dim, dim);
    let mut right = DMatrix::<T>::zeros(dim, dim);
    for (col, &(b, c)) in order.iter().enumerate() {
        let (indices, data) = &parts[b];
        log_sigma.push(data.log_sigma[c]);
        for (r, &row) in indices.iter().enumerate() {
            left[(row, col)] = data.left[(r, c)];
            right[(row, col)] = data.right[(r, c)];
        }
    }
    SingularData { log_sigma, left, right }
}

/// Singular data of ρ(w), computed per invariant block when the marking is
/// exactly block-decomposable and densely otherwise. The blockwise path keeps
/// full relative accuracy in every block regardless of how far the block
/// scales drift apart.
pub fn blockwise_singular_data<T: Scalar>(
    group: &MarkedGroup<T>,
    w: &Word,
) -> Result<SingularData<T>, MatrixError> {
    let blocks = invariant_blocks(group);
    if blocks.len() <= 1 {
        return singular_data(&evaluate(group, w));
    }
    let mut parts = Vec::with_capacity(blocks.len());
    for block in blocks {
        let data = singular_data(&evaluate_block(group, w, &block))?;
        parts.push((block, data));
    }
    Ok(merge_block_singular_data(group.dim(), &parts))
}

/// Λʲ of a scaled matrix: the compound of the entries under j copies of the
/// scale.
fn scaled_compound<T: Scalar>(m: &ScaledMatrix<T>, j: usize) -> ScaledMatrix<T> {
    let mut c = ScaledMatrix {
        entries: compound_matrix(&m.entries, j),
        log_scale: j as f64 * m.log_scale,
    };
    c.renormalize();
    c
}

/// Singular data of ρ(γ)·ρ(c)ⁿ·ρ(γ)⁻¹ restricted to one invariant block.
///
/// The frames come from the plain scaled product, but the σ values are
/// recovered through compound powers: σ_1···σ_j of the product is the top
/// singular value of its j-th compound, each powered under its own scale.
/// This matters because a single SVD cannot resolve σ_j below ~eps·σ_1, and
/// a block whose internal spread passes that floor at asymptotic n (any
/// hyperbolic block does) would otherwise report floor values that scramble
/// the cross-block ordering of [`merge_block_singular_data`]. Frame columns
/// under the floor keep only the accuracy the entries hold; for 2-dimensional
/// blocks that is everything, the second left column being the orthogonal
/// complement of the first.
pub fn block_power_singular_data<T: Scalar>(
    group: &MarkedGroup<T>,
    conj: &Word,
    c: &Word,
    n: i64,
    block: &[usize],
) -> Result<SingularData<T>, MatrixError> {
    let conj_inv = conj.inverse();
    let cb = evaluate_block(group, c, block);
    let jb = evaluate_block(group, conj, block);
    let jbi = evaluate_block(group, &conj_inv, block);
    let m = jb.mul(&stable_pow(&cb, n)?).mul(&jbi);
    let mut data = singular_data(&m)?;
    let db = block.len();
    if db > 1 {
        let mut prev = 0.0;
        for j in 1..=db {
            let pj = scaled_compound(&jb, j)
                .mul(&stable_pow(&scaled_compound(&cb, j), n)?)
                .mul(&scaled_compound(&jbi, j));
            let top = pj.entries().clone().svd(false, false).singular_values[0];
            let t = top.ln() + pj.log_scale();
            data.log_sigma[j - 1] = t - prev;
            prev = t;
        }
    }
    Ok(data)
}

/// Both angle bounds for a product gh, each as (lhs, rhs):
/// part1: d_∠(U_k(g), U_k(gh)) ≤ ‖h‖‖h⁻¹‖·σ_{k+1}(g)/σ_k(g)
/// part2: d_∠(g·U_k(h), U_k(gh)) ≤ ‖g‖‖g⁻¹‖·σ_{k+1}(h)/σ_k(h)
/// (operator norms; ‖h‖‖h⁻¹‖ = σ_1(h)/σ_d(h)).
///
/// A part is `None` when its factor has no gap at k (e.g. part 2 for
/// h = identity); the product gh must always have one.
#[derive(Debug, Clone, Copy)]
pub struct BpsBounds {
    pub part1: Option<(f64, f64)>,
    pub part2: Option<(f64, f64)>,
}

pub fn check_bps_bounds<T: Scalar>(
    g: &ScaledMatrix<T>,
    h: &ScaledMatrix<T>,
    k: usize,
) -> Result<BpsBounds, MatrixError> {
    let gh = g.mul(h);
    let dg = singular_data(g)?;
    let dh = singular_data(h)?;
    let dgh = singular_data(&gh)?;
    let uk_gh = dgh.uk(k)?;

    let part1 = match dg.uk(k) {
        Ok(uk_g) => {
            let lhs = angle_distance(&uk_g, &uk_gh)?;
            let rhs = (dh.log_condition() - dg.log_gap(k)).exp();
            Some((lhs, rhs))
        }
        Err(MatrixError::NoGap { .. }) => None,
        Err(e) => return Err(e),
    };
    let part2 = match dh.uk(k) {
        Ok(uk_h) => {
            let g_uk_h = Subspace::new(&g.entries * uk_h.frame())?;
            let lhs = angle_distance(&g_uk_h, &uk_gh)?;
            let rhs = (dg.log_condition() - dh.log_gap(k)).exp();
            Some((lhs, rhs))
        }
        Err(MatrixError::NoGap { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(BpsBounds { part1, part2 })
}

/// Exterior-power (compound) matrix Λ^k(m): entry (I, J) is the k×k minor of
/// m on row set I and column set J, with k-subsets in lexicographic order.
pub fn compound_matrix<T: Scalar>(m: &DMatrix<T>, k: usize) -> DMatrix<T> {
    let d = m.nrows();
    let subsets = k_subsets(d, k);
    let n = subsets.len();
    DMatrix::from_fn(n, n, |a, b| {
        let sub = DMatrix::from_fn(k, k, |i, j| m[(subsets[a][i], subsets[b][j])]);
        sub.determinant()
    })
}

fn k_subsets(d: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(d: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..d {
            cur.push(i);
            rec(d, k, i + 1, cur, out);
            cur.pop();
        }
    }
    rec(d, k, 0, &mut cur, &mut out);
    out
}

/// Incremental products of the exterior powers Λ^k of a matrix sequence,
/// tracked per level in log scale. Since σ_1(Λ^k) = σ_1···σ_k exactly and
/// top singular values are computed to relative accuracy, this recovers every
/// log σ_k (and every log gap) of an arbitrarily long and arbitrarily
/// dominated product — which a single dense SVD cannot.
#[derive(Debug, Clone)]
pub struct CompoundProducts<T: Scalar> {
    dim: usize,
    accs: Vec<ScaledMatrix<T>>,
}

impl<T: Scalar> CompoundProducts<T> {
    pub fn identity(dim: usize) -> Self {
        let accs = (1..=dim)
            .map(|k| ScaledMatrix::identity(k_subsets(dim, k).len()))
            .collect();
        CompoundProducts { dim, accs }
    }

    /// Right-multiply the underlying product by `m`.
    pub fn advance(&mut self, m: &DMatrix<T>) {
        for (k, acc) in self.accs.iter_mut().enumerate() {
            let comp = compound_matrix(m, k + 1);
            *acc = acc.mul(&ScaledMatrix::from_matrix(comp));
        }
    }

    /// log(σ_1···σ_k) of the underlying product.
    pub fn log_top(&self, k: usize) -> f64 {
        if k == 0 {
            return 0.0;
        }
        let acc = &self.accs[k - 1];
        let top = acc.entries().clone().svd(false, false).singular_values[0];
        top.ln() + acc.log_scale()
    }

    /// log σ_k of the underlying product.
    pub fn log_sigma(&self, k: usize) -> f64 {
        self.log_top(k) - self.log_top(k - 1)
    }

    /// log(σ_k/σ_{k+1}) of the underlying product, 1 ≤ k < d.
    pub fn log_gap(&self, k: usize) -> f64 {
        2.0 * self.log_top(k) - self.log_top(k - 1) - self.log_top(k + 1)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// All log singular values of ρ(w) via compound tracking; accurate for any
/// word length.
pub fn log_singular_values<T: Scalar>(group: &MarkedGroup<T>, w: &Word) -> Vec<f64> {
    let mut comp = CompoundProducts::identity(group.dim());
    for &l in w.letters() {
        comp.advance(group.letter_image(l));
    }
    (1..=group.dim()).map(|k| comp.log_sigma(k)).collect()
}

/// A positive-definite hermitian form.
#[derive(Debug, Clone)]
pub struct InnerProduct<T: Scalar> {
    gram: DMatrix<T>,
}

impl<T: Scalar> InnerProduct<T> {
    pub fn new(gram: DMatrix<T>) -> Result<Self, MatrixError> {
        if gram.nrows() != gram.ncols() {
            return Err(MatrixError::BadParameter("gram matrix must be square".into()));
        }
        let asym = (&gram - gram.adjoint()).norm();
        if asym > 1e-9 * gram.norm().max(1.0) {
            return Err(MatrixError::NotPositiveDefinite);
        }
        if gram.clone().cholesky().is_none() {
            return Err(MatrixError::NotPositiveDefinite);
        }
        Ok(InnerProduct { gram })
    }

    pub fn standard(d: usize) -> Self {
        InnerProduct { gram: DMatrix::identity(d, d) }
    }

    pub fn gram(&self) -> &DMatrix<T> {
        &self.gram
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    pub fn norm(&self, v: &DVector<T>) -> f64 {
        let q = (v.adjoint() * &self.gram * v)[(0, 0)];
        q.re().max(0.0).sqrt()
    }
}

/// The interpolation m(t) between two inner products: in a basis simultaneously
/// orthogonal for A and B (whitening of A followed by an eigenbasis of the
/// transformed B), m(t) is diagonal with entries A(vᵢ,vᵢ)^{1−t}·B(vᵢ,vᵢ)^t.
/// m(0) = A and m(1) = B; the result does not depend on the choice of common
/// basis.
pub fn interpolate_inner_products<T: Scalar>(
    a: &InnerProduct<T>,
    b: &InnerProduct<T>,
    t: f64,
) -> Result<InnerProduct<T>, MatrixError> {
    if a.dim() != b.dim() {
        return Err(MatrixError::BadParameter(format!(
            "dimension mismatch {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let chol = a.gram.clone().cholesky().ok_or(MatrixError::NotPositiveDefinite)?;
    let l = chol.l();
    // M = L⁻¹ B L⁻ᴴ, hermitian positive definite.
    let x = l
        .solve_lower_triangular(&b.gram)
        .ok_or(MatrixError::NotPositiveDefinite)?;
    let m = l
        .solve_lower_triangular(&x.adjoint())
        .ok_or(MatrixError::NotPositiveDefinite)?
        .adjoint();
    let m = (&m + m.adjoint()) * T::from_real(0.5);
    let eig = m.symmetric_eigen();
    let d = a.dim();
    let mut diag = DMatrix::<T>::zeros(d, d);
    for i in 0..d {
        let lambda = eig.eigenvalues[i].max(1e-300);
        diag[(i, i)] = T::from_real(lambda.powf(t));
    }
    let q = eig.eigenvectors;
    let core = &q * diag * q.adjoint();
    let gram = &l * core * l.adjoint();
    let gram = (&gram + gram.adjoint()) * T::from_real(0.5);
    InnerProduct::new(gram)
}

/// The excursion norm at time t of a vector with components (v1, v2, v3) in
/// the three-way splitting, over an excursion of length T with rate c:
/// e^{−ct}‖v1‖ + ‖v2‖ + e^{ct}‖v3‖ on the first third, the mirrored formula
/// with T−t on the last third, and the inner-product interpolation between
/// the two seam metrics on the middle third. Block norms combine additively.
pub fn thin_metric_profile<T: Scalar>(
    v1: &DVector<T>,
    v2: &DVector<T>,
    v3: &DVector<T>,
    c: f64,
    t: f64,
    total: f64,
) -> Result<f64, MatrixError> {
    if !(c > 0.0) {
        return Err(MatrixError::BadParameter(format!("rate c must be positive, got {c}")));
    }
    if !(0.0..=total).contains(&t) || total < 0.0 {
        return Err(MatrixError::BadTime { t, total });
    }
    let norms = [v1.norm(), v2.norm(), v3.norm()];
    if t <= total / 3.0 {
        return Ok((-c * t).exp() * norms[0] + norms[1] + (c * t).exp() * norms[2]);
    }
    if t >= 2.0 * total / 3.0 {
        let r = total - t;
        return Ok((c * r).exp() * norms[0] + norms[1] + (-c * r).exp() * norms[2]);
    }
    // Middle third: per block, interpolate between the seam metrics at T/3
    // and 2T/3 (scalar multiples of the block inner product).
    let s = (3.0 * t - total) / total;
    let first_seam = [(-c * total / 3.0).exp(), 1.0, (c * total / 3.0).exp()];
    let last_seam = [(c * total / 3.0).exp(), 1.0, (-c * total / 3.0).exp()];
    let mut sum = 0.0;
    for (i, v) in [v1, v2, v3].into_iter().enumerate() {
        if v.is_empty() {
            continue;
        }
        let d = v.len();
        let ga = DMatrix::<T>::identity(d, d) * T::from_real(first_seam[i] * first_seam[i]);
        let gb = DMatrix::<T>::identity(d, d) * T::from_real(last_seam[i] * last_seam[i]);
        let m = interpolate_inner_products(&InnerProduct::new(ga)?, &InnerProduct::new(gb)?, s)?;
        sum += m.norm(v);
    }
    Ok(sum)
}
