//! Sampling-based certifiers: divergence, weak domination, flow-line probes,
//! limit-set fibers, transversality audits, dynamics preservation, and the
//! composite diagnosis.
//!
//! Every verdict here is labeled "-consistent": finite sampling can refute an
//! asymptotic condition but never prove it, so reports carry the raw records
//! alongside the tag.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cusp::{horoball_line_profile, ols, CuspError, DepthFunction};
use crate::flags::{
    angle_distance, cluster_flags, flags_transverse, transversality_margin, Flag, FlagError,
    Subspace,
};
use crate::group::{GroupError, MarkedGroup, PeripheralSubgroup, Presentation};
use crate::matdyn::{
    block_power_singular_data, blockwise_singular_data, evaluate, invariant_blocks, log_abs_det,
    merge_block_singular_data, singular_data, stable_pow, u_dk_inverse, CompoundProducts,
    MatrixError, ScaledMatrix,
};
use crate::scalar::Scalar;
use crate::word::Word;

#[derive(Debug, Error)]
pub enum CertifyError {
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Cusp(#[from] CuspError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Flag(#[from] FlagError),
    #[error("need at least two distinct fiber labels with samples, found {0}")]
    InsufficientLabels(usize),
    #[error("sample {index} is not transverse to the limit W0 (margin {margin:.3e})")]
    NotTransverse { index: usize, margin: f64 },
    #[error("invalid certifier configuration: {0}")]
    BadConfig(String),
}

/// Fitted slopes below this are treated as "no decay": the fit is marked
/// degenerate and violations are counted against this reference rate instead.
pub const MIN_DOMINATION_SLOPE: f64 = 0.05;

/// Thresholds shared by the certifiers. Defaults match the documented
/// decision table; every field is config-exposed through the CLI.
#[derive(Debug, Clone)]
pub struct CertifyConfig {
    /// Final shell minimum must exceed this for a divergent verdict.
    pub gap_threshold: f64,
    /// Transversality margins at or below this count as non-transverse.
    pub margin_tol: f64,
    /// Single-linkage radius (radians) for fiber clustering.
    pub cluster_radius: f64,
    /// Relative slack when counting domination violations.
    pub slack: f64,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        CertifyConfig {
            gap_threshold: 10.0f64.ln(),
            margin_tol: 1e-6,
            cluster_radius: 0.05,
            slack: 0.05,
        }
    }
}

/// Limit-set sampling plan.
#[derive(Debug, Clone)]
pub struct SamplerConfig {
    /// Number of conical directions (long random reduced words).
    pub conical_count: usize,
    /// Length of each conical word.
    pub conical_length: usize,
    /// Peripheral powers n; each yields a sample per peripheral per conjugator.
    pub peripheral_powers: Vec<i64>,
    /// Conjugators γ for sampling γcⁿγ⁻¹ (γ P γ⁻¹ fibers).
    pub conjugators: Vec<Word>,
    pub seed: u64,
}

impl SamplerConfig {
    /// Defaults matched to a marked group: one conical direction per signed
    /// generator, and conjugators covering the identity plus each generator
    /// (coset-normalized later, so redundant conjugators merge).
    pub fn default_for<T: Scalar>(g: &MarkedGroup<T>, seed: u64) -> Self {
        let mut conjugators = vec![Word::identity()];
        for i in 1..=g.rank() as i32 {
            conjugators.push(Word::new(vec![i]));
        }
        SamplerConfig {
            conical_count: 2 * g.rank(),
            conical_length: 12,
            peripheral_powers: vec![100_000_000, 200_000_000, -100_000_000, -200_000_000],
            conjugators,
            seed,
        }
    }
}

/// Full pipeline configuration for `diagnose`.
#[derive(Debug, Clone)]
pub struct DiagnoseConfig {
    pub certify: CertifyConfig,
    /// Enumeration radius for the divergence certifier.
    pub r_max: usize,
    /// Largest peripheral power for the weak-domination fit.
    pub n_max: usize,
    pub sampler: SamplerConfig,
}

// ---------------------------------------------------------------------------
// Divergence
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivergenceVerdict {
    DivergentConsistent,
    NotDivergent,
}

impl DivergenceVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            DivergenceVerdict::DivergentConsistent => "divergent-consistent",
            DivergenceVerdict::NotDivergent => "not-divergent",
        }
    }
}

/// Gap statistics over one sphere of the marked group.
#[derive(Debug, Clone)]
pub struct ShellRecord {
    pub radius: usize,
    pub count: usize,
    pub min_gap: f64,
    pub median_gap: f64,
    pub max_gap: f64,
}

#[derive(Debug, Clone)]
pub struct DivergenceReport {
    pub k: usize,
    pub shells: Vec<ShellRecord>,
    pub verdict: DivergenceVerdict,
}

fn check_k<T: Scalar>(g: &MarkedGroup<T>, k: usize) -> Result<(), CertifyError> {
    let d = g.dim();
    if k == 0 || 2 * k > d {
        return Err(CertifyError::BadConfig(format!(
            "k = {k} out of range for dimension {d} (need 1 <= k <= d/2)"
        )));
    }
    Ok(())
}

/// log(σ_k/σ_{k+1}) of ρ(w), via compound tracking (accurate for any length).
fn word_log_gap<T: Scalar>(g: &MarkedGroup<T>, w: &Word, k: usize) -> f64 {
    let mut cp = CompoundProducts::identity(g.dim());
    for &l in w.letters() {
        cp.advance(g.letter_image(l));
    }
    cp.log_gap(k)
}

/// Enumerate every sphere up to `r_max` and record per-shell gap statistics.
/// Verdict is divergent-consistent iff the shell minima are nondecreasing
/// from some shell on (at least the last two) and the final minimum exceeds
/// the configured threshold.
pub fn certify_divergence<T: Scalar>(
    g: &MarkedGroup<T>,
    k: usize,
    r_max: usize,
    config: &CertifyConfig,
) -> Result<DivergenceReport, CertifyError> {
    check_k(g, k)?;
    if r_max == 0 {
        return Err(CertifyError::BadConfig("r_max must be at least 1".into()));
    }
    let mut shells = Vec::with_capacity(r_max);
    for radius in 1..=r_max {
        let sphere = g.enumerate_sphere(radius)?;
        let mut gaps: Vec<f64> = sphere.iter().map(|w| word_log_gap(g, w, k)).collect();
        gaps.sort_by(f64::total_cmp);
        let count = gaps.len();
        let (min_gap, median_gap, max_gap) = if count == 0 {
            (0.0, 0.0, 0.0)
        } else {
            let median = if count % 2 == 1 {
                gaps[count / 2]
            } else {
                0.5 * (gaps[count / 2 - 1] + gaps[count / 2])
            };
            (gaps[0], median, gaps[count - 1])
        };
        shells.push(ShellRecord { radius, count, min_gap, median_gap, max_gap });
    }
    let minima: Vec<f64> = shells.iter().map(|s| s.min_gap).collect();
    let mut tail = minima.len() - 1;
    while tail > 0 && minima[tail - 1] <= minima[tail] + 1e-12 {
        tail -= 1;
    }
    let nondecreasing_tail = minima.len() == 1 || tail + 1 < minima.len();
    let final_min = *minima.last().unwrap();
    let verdict = if nondecreasing_tail && final_min > config.gap_threshold {
        DivergenceVerdict::DivergentConsistent
    } else {
        DivergenceVerdict::NotDivergent
    };
    Ok(DivergenceReport { k, shells, verdict })
}

// ---------------------------------------------------------------------------
// Weak domination
// ---------------------------------------------------------------------------

/// Least-squares certificate for σ_{k+1}/σ_k ≤ C e^{−c|γ|_X} along a
/// peripheral family.
#[derive(Debug, Clone)]
pub struct DominationFit {
    /// OLS slope of log gap against |γ|_X.
    pub slope: f64,
    /// log C of the reported bound (envelope over the samples at `check_slope`).
    pub log_c: f64,
    /// Rate the violations were counted against: max(slope, MIN_DOMINATION_SLOPE).
    pub check_slope: f64,
    pub r_squared: f64,
    /// Samples below the reported bound minus slack.
    pub violations: usize,
    pub samples: usize,
    /// Growth is superlinear in |γ|_X (log-log slope test): the family looks
    /// hyperbolic rather than weakly dominated at a linear rate.
    pub nonlinear: bool,
    /// Fitted slope below MIN_DOMINATION_SLOPE: no meaningful decay.
    pub degenerate: bool,
}

/// Fit a domination line to raw (|γ|_X, log gap) samples.
///
/// The reported bound uses the envelope intercept, so a non-degenerate fit
/// has zero violations by construction; a degenerate fit (slope below
/// MIN_DOMINATION_SLOPE) is counted against the reference line C = 1,
/// c = MIN_DOMINATION_SLOPE, which flags flat families.
pub fn fit_domination_from_samples(
    xs: &[f64],
    ys: &[f64],
    slack: f64,
) -> Result<DominationFit, CertifyError> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(CertifyError::BadConfig(format!(
            "domination fit needs matched sample vectors of length >= 2, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    if !(0.0..1.0).contains(&slack) {
        return Err(CertifyError::BadConfig(format!("slack {slack} outside [0, 1)")));
    }
    let (slope, intercept) = ols(xs, ys);
    let n = xs.len() as f64;
    let mean_y = ys.iter().sum::<f64>() / n;
    let ss_tot: f64 = ys.iter().map(|y| (y - mean_y).powi(2)).sum();
    let ss_res: f64 =
        xs.iter().zip(ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum();
    let r_squared = if ss_tot < 1e-30 { 1.0 } else { 1.0 - ss_res / ss_tot };

    let degenerate = slope < MIN_DOMINATION_SLOPE;
    let check_slope = slope.max(MIN_DOMINATION_SLOPE);
    let log_c = if degenerate {
        0.0
    } else {
        xs.iter().zip(ys).map(|(x, y)| check_slope * x - y).fold(f64::NEG_INFINITY, f64::max)
    };
    let violations = xs
        .iter()
        .zip(ys)
        .filter(|(&x, &y)| {
            let bound = check_slope * x - log_c;
            y < bound - slack * bound.abs().max(1.0)
        })
        .count();

    // Log-log probe: slope well above 1 means the gap grows superlinearly in
    // |γ|_X, which a single exponential rate cannot describe.
    let lx: Vec<f64> = xs.iter().map(|x| x.max(1e-9).ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.max(1e-9).ln()).collect();
    let (ll_slope, _) = ols(&lx, &ly);
    let nonlinear = !degenerate && (ll_slope > 1.5 || r_squared < 0.9);

    Ok(DominationFit {
        slope,
        log_c,
        check_slope,
        r_squared,
        violations,
        samples: xs.len(),
        nonlinear,
        degenerate,
    })
}

/// OLS of log gap(ρ(cⁿ)) at k against |cⁿ|_{X_f} for n ≤ n_max.
///
/// The cusped norm of a peripheral power is the distance inside the single
/// attached horoball, so one line-profile BFS serves the whole family.
pub fn fit_weak_domination<T: Scalar>(
    g: &MarkedGroup<T>,
    peripheral: &PeripheralSubgroup,
    k: usize,
    f: &DepthFunction,
    n_max: usize,
    slack: f64,
) -> Result<DominationFit, CertifyError> {
    check_k(g, k)?;
    if n_max < 2 {
        return Err(CertifyError::BadConfig("n_max must be at least 2".into()));
    }
    let profile = horoball_line_profile(f, n_max)?;
    let c_img = g.plain_evaluate(&peripheral.generator_word);
    let mut cp = CompoundProducts::identity(g.dim());
    let mut xs = Vec::with_capacity(n_max);
    let mut ys = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        cp.advance(&c_img);
        xs.push(profile[n] as f64);
        ys.push(cp.log_gap(k));
    }
    fit_domination_from_samples(&xs, &ys, slack)
}

// ---------------------------------------------------------------------------
// Flow-line probe
// ---------------------------------------------------------------------------

/// Per-prefix log gaps along one geodesic word.
#[derive(Debug, Clone)]
pub struct FlowProbe {
    pub gaps: Vec<f64>,
    pub per_letter_slope: f64,
}

pub fn probe_flow_domination<T: Scalar>(
    g: &MarkedGroup<T>,
    path: &Word,
    k: usize,
) -> Result<FlowProbe, CertifyError> {
    check_k(g, k)?;
    if !path.is_reduced() {
        return Err(CertifyError::BadConfig("flow path must be a reduced word".into()));
    }
    let mut cp = CompoundProducts::identity(g.dim());
    let mut gaps = Vec::with_capacity(path.len());
    for &l in path.letters() {
        cp.advance(g.letter_image(l));
        gaps.push(cp.log_gap(k));
    }
    let per_letter_slope = if gaps.len() < 2 {
        0.0
    } else {
        let xs: Vec<f64> = (1..=gaps.len()).map(|i| i as f64).collect();
        ols(&xs, &gaps).0
    };
    Ok(FlowProbe { gaps, per_letter_slope })
}

// ---------------------------------------------------------------------------
// Limit-set sampling
// ---------------------------------------------------------------------------

/// Combinatorial direction of one limit-set sample.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum SampleLabel {
    /// A long random reduced word standing in for a conical direction.
    Conical { word: Word },
    /// γcⁿγ⁻¹ for the peripheral with this label; γ is coset-normalized, so
    /// both signs of n share one fiber key (one parabolic point).
    Peripheral { label: String, conjugator: Word, n: i64 },
}

impl SampleLabel {
    /// Boundary-point key: conical words are their own directions; peripheral
    /// samples collapse to the conjugated subgroup.
    pub fn fiber_key(&self) -> String {
        match self {
            SampleLabel::Conical { word } => format!("conical:{word}"),
            SampleLabel::Peripheral { label, conjugator, .. } => {
                if conjugator.is_empty() {
                    format!("peripheral:{label}")
                } else {
                    format!("peripheral:{label}@{conjugator}")
                }
            }
        }
    }

    pub fn is_peripheral(&self) -> bool {
        matches!(self, SampleLabel::Peripheral { .. })
    }
}

#[derive(Debug, Clone)]
pub struct LimitSamples<T: Scalar> {
    pub samples: Vec<(Flag<T>, SampleLabel)>,
    /// Elements without a usable singular gap at k or d−k.
    pub skipped: usize,
}

fn flag_of<T: Scalar>(g: &MarkedGroup<T>, w: &Word, k: usize) -> Result<Flag<T>, CertifyError> {
    let sd = blockwise_singular_data(g, w)?;
    Ok(Flag::from_singular_data(&sd, k)?)
}

/// Flag of ρ(γcⁿγ⁻¹) at asymptotic n: powers go through binary
/// exponentiation, and when the marking is exactly block-decomposable each
/// block is powered under its own scale. That last part is load-bearing: a
/// direct sum mixing parabolic and hyperbolic blocks needs n large enough
/// that 1/n is below the transversality tolerance, and at such n the
/// hyperbolic scale would flush the parabolic block out of a single shared
/// exponent.
/// Largest |n| for which ρ(c)ⁿ stays representable under one shared scale:
/// the entries of cⁿ span e^{n·(ln λ_max − ln λ_min)} around the dominant
/// scale (up to polynomial factors), and a renormalized matrix only holds
/// ~e^±700 around its max entry. Rates are probed with scaled powers, which
/// are immune to the overflow being estimated; polynomial growth (unipotent
/// c) probes to a negligible spread and effectively no clamp.
fn dense_power_limit<T: Scalar>(c: &ScaledMatrix<T>) -> i64 {
    const PROBE: i64 = 1 << 26;
    let log_top = |m: &ScaledMatrix<T>| m.entries().norm().ln() + m.log_scale();
    let spread = match (stable_pow(c, PROBE), stable_pow(c, -PROBE)) {
        (Ok(top), Ok(bot)) => (log_top(&top) + log_top(&bot)) / PROBE as f64,
        _ => return 1,
    };
    if !(spread > 1e-9) {
        return i64::MAX;
    }
    let mut n = ((600.0 / spread) as i64).max(1);
    // Representable is not the same as resolvable: a dense SVD only sees σ's
    // down to ~eps·σ_1 unless the components live in disjoint entries (exact
    // block permutations do, genuinely dense mixed-rate matrices do not). The
    // computed log σ's of cⁿ must add up to n·log|det c|; while they do not,
    // halve.
    let target = log_abs_det(c);
    while n > 1 {
        let consistent = stable_pow(c, n)
            .ok()
            .and_then(|p| singular_data(&p).ok())
            .is_some_and(|sd| {
                let sum: f64 = sd.log_sigma.iter().sum();
                (sum - n as f64 * target).abs() <= 0.5 + 1e-9 * (n as f64 * target).abs()
            });
        if consistent {
            break;
        }
        n /= 2;
    }
    n
}

fn peripheral_flag<T: Scalar>(
    g: &MarkedGroup<T>,
    blocks: &[Vec<usize>],
    conj: &Word,
    c: &Word,
    n: i64,
    k: usize,
) -> Result<Flag<T>, CertifyError> {
    let data = if blocks.len() <= 1 {
        let conj_inv = conj.inverse();
        let m =
            evaluate(g, conj).mul(&stable_pow(&evaluate(g, c), n)?).mul(&evaluate(g, &conj_inv));
        singular_data(&m)?
    } else {
        let mut parts = Vec::with_capacity(blocks.len());
        for block in blocks {
            parts.push((block.clone(), block_power_singular_data(g, conj, c, n, block)?));
        }
        merge_block_singular_data(g.dim(), &parts)
    };
    Ok(Flag::from_singular_data(&data, k)?)
}

/// Shortlex-minimal representative of the left coset γ⟨c⟩; conjugates by
/// elements of the same coset fix the same parabolic point, so they must
/// share one fiber key. Literal tail-stripping is not enough: for c = a⁻¹b
/// the conjugators a and b = a·c lie in one coset without either reduced
/// word ending in c^±1.
fn peripheral_coset_rep(gamma: &Word, c: &Word) -> Word {
    let gamma = gamma.reduce();
    let c = c.reduce();
    if c.is_empty() {
        return gamma;
    }
    // |γcᵐ| ≥ |m| − 2|γ| in a free group, so nothing outside this range can
    // beat the m = 0 candidate.
    let range = 2 * gamma.len() as i64 + 1;
    let mut best = gamma.clone();
    for m in -range..=range {
        let cand = gamma.concat(&c.pow(m));
        if (cand.len(), cand.letters()) < (best.len(), best.letters()) {
            best = cand;
        }
    }
    best
}

/// True when the word ends with more than `max_run` copies of some peripheral
/// generator word (either sign).
fn has_long_peripheral_suffix(w: &Word, peripherals: &[PeripheralSubgroup], max_run: usize) -> bool {
    for p in peripherals {
        for c in [p.generator_word.reduce(), p.generator_word.inverse().reduce()] {
            let cl = c.len();
            if cl == 0 {
                continue;
            }
            let mut runs = 0;
            let mut end = w.len();
            while end >= cl && w.letters()[end - cl..end] == *c.letters() {
                runs += 1;
                end -= cl;
            }
            if runs > max_run {
                return true;
            }
        }
    }
    false
}

fn random_reduced_word<R: Rng>(rng: &mut R, rank: usize, first: i32, len: usize) -> Word {
    let alphabet: Vec<i32> =
        (1..=rank as i32).flat_map(|i| [i, -i]).collect();
    let mut letters = Vec::with_capacity(len);
    if len > 0 {
        letters.push(first);
    }
    while letters.len() < len {
        let cand = alphabet[rng.random_range(0..alphabet.len())];
        if cand != -letters[letters.len() - 1] {
            letters.push(cand);
        }
    }
    Word::new(letters)
}

/// Sample flags (U_k(ρ(γ)), U_{d−k}(ρ(γ))) along peripheral power families
/// and random conical directions. Elements without the needed gaps are
/// skipped and counted.
///
/// Peripheral samples ρ(γcⁿγ⁻¹) are computed through [`stable_pow`] (exact
/// binomial route for parabolic c, binary exponentiation otherwise),
/// blockwise when the marking is an exact direct sum (see [`peripheral_flag`]),
/// so asymptotic-scale powers (needed for the fiber limits to settle) cost
/// log n multiplies. Conical heuristic: reduced words of the configured
/// length with the first letter cycling through the signed generators (keeps
/// directions separated) and peripheral-power suffixes capped at 3
/// repetitions.
pub fn sample_limit_set<T: Scalar>(
    g: &MarkedGroup<T>,
    k: usize,
    sampler: &SamplerConfig,
) -> Result<LimitSamples<T>, CertifyError> {
    check_k(g, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(sampler.seed);
    let mut samples = Vec::new();
    let mut skipped = 0usize;
    let blocks = invariant_blocks(g);

    for p in g.peripherals() {
        let c = &p.generator_word;
        // Without exact blocks, asymptotic powers must stay inside the dense
        // representable range; clamped powers that coincide are deduplicated.
        let n_limit =
            if blocks.len() > 1 { i64::MAX } else { dense_power_limit(&evaluate(g, c)) };
        let mut seen: BTreeSet<(Word, i64)> = BTreeSet::new();
        for conj in &sampler.conjugators {
            let conj = peripheral_coset_rep(conj, c);
            for &n in &sampler.peripheral_powers {
                let n = n.signum() * (n.unsigned_abs().min(n_limit as u64) as i64);
                if n == 0 || !seen.insert((conj.clone(), n)) {
                    continue;
                }
                match peripheral_flag(g, &blocks, &conj, c, n, k) {
                    Ok(flag) => samples.push((
                        flag,
                        SampleLabel::Peripheral {
                            label: p.label.clone(),
                            conjugator: conj.clone(),
                            n,
                        },
                    )),
                    Err(_) => skipped += 1,
                }
            }
        }
    }

    let rank = g.rank();
    if rank > 0 {
        let firsts: Vec<i32> = (1..=rank as i32).flat_map(|i| [i, -i]).collect();
        for i in 0..sampler.conical_count {
            let first = firsts[i % firsts.len()];
            let mut w = random_reduced_word(&mut rng, rank, first, sampler.conical_length);
            for _ in 0..50 {
                if !has_long_peripheral_suffix(&w, g.peripherals(), 3) {
                    break;
                }
                w = random_reduced_word(&mut rng, rank, first, sampler.conical_length);
            }
            match flag_of(g, &w, k) {
                Ok(flag) => samples.push((flag, SampleLabel::Conical { word: w })),
                Err(_) => skipped += 1,
            }
        }
    }

    Ok(LimitSamples { samples, skipped })
}

// ---------------------------------------------------------------------------
// Fibers and transversality
// ---------------------------------------------------------------------------

/// Clustered flags over one boundary label.
#[derive(Debug, Clone)]
pub struct FiberReport<T: Scalar> {
    pub label: String,
    /// Fiber sits over a (conjugated) parabolic point.
    pub peripheral: bool,
    pub flags: Vec<Flag<T>>,
    /// Fiber cardinality estimate: number of flag clusters.
    pub cluster_count: usize,
    pub max_intra: f64,
    /// Smallest cross-cluster distance; None with fewer than two clusters.
    pub min_inter: Option<f64>,
    /// Single sample: cardinality 1 holds trivially.
    pub low_confidence: bool,
}

/// Group samples by boundary label and cluster each fiber.
///
/// Grouping uses a BTreeMap and clustering a canonical sort, so the output is
/// invariant under permutation of the samples.
pub fn analyze_fibers<T: Scalar>(
    samples: &LimitSamples<T>,
    cluster_radius: f64,
) -> Result<Vec<FiberReport<T>>, CertifyError> {
    let mut groups: BTreeMap<String, (bool, Vec<Flag<T>>)> = BTreeMap::new();
    for (flag, label) in &samples.samples {
        let entry = groups
            .entry(label.fiber_key())
            .or_insert_with(|| (label.is_peripheral(), Vec::new()));
        entry.1.push(flag.clone());
    }
    let mut reports = Vec::with_capacity(groups.len());
    for (label, (peripheral, flags)) in groups {
        let clusters = cluster_flags(&flags, cluster_radius)?;
        reports.push(FiberReport {
            label,
            peripheral,
            cluster_count: clusters.clusters.len(),
            max_intra: clusters.max_intra,
            min_inter: clusters.min_inter.is_finite().then_some(clusters.min_inter),
            low_confidence: flags.len() <= 1,
            flags,
        });
    }
    Ok(reports)
}

/// Minimum transversality margin over flag pairs with distinct labels.
#[derive(Debug, Clone)]
pub struct TransversalityAudit {
    pub min_margin: f64,
    pub offending: (String, String),
    pub pairs: usize,
}

pub fn audit_transversality<T: Scalar>(
    reports: &[FiberReport<T>],
) -> Result<TransversalityAudit, CertifyError> {
    let labeled: Vec<&FiberReport<T>> =
        reports.iter().filter(|r| !r.flags.is_empty()).collect();
    let distinct: BTreeSet<&str> = labeled.iter().map(|r| r.label.as_str()).collect();
    if distinct.len() < 2 {
        return Err(CertifyError::InsufficientLabels(distinct.len()));
    }
    let mut min_margin = f64::INFINITY;
    let mut offending = (String::new(), String::new());
    let mut pairs = 0usize;
    for i in 0..labeled.len() {
        for j in (i + 1)..labeled.len() {
            if labeled[i].label == labeled[j].label {
                continue;
            }
            for f1 in &labeled[i].flags {
                for f2 in &labeled[j].flags {
                    let (_, margin) = flags_transverse(f1, f2)?;
                    pairs += 1;
                    if margin < min_margin {
                        min_margin = margin;
                        offending = (labeled[i].label.clone(), labeled[j].label.clone());
                    }
                }
            }
        }
    }
    Ok(TransversalityAudit { min_margin, offending, pairs })
}

// ---------------------------------------------------------------------------
// Dynamics preservation
// ---------------------------------------------------------------------------

/// Per-sample attraction records for a gap-divergent sequence.
#[derive(Debug, Clone)]
pub struct DynamicsReport<T: Scalar> {
    /// d_∠(ρ(γ_n)V, V0) per n, one row per sampled V.
    pub distances: Vec<Vec<f64>>,
    pub v0: Subspace<T>,
    pub w0: Subspace<T>,
    /// Every sample ends below 1e−3 and is nonincreasing over the last half.
    pub pass: bool,
}

/// Transversality floor for the sampled V's against the limit W0.
pub const DYNAMICS_MARGIN: f64 = 0.05;

pub fn test_dynamics_preserving<T: Scalar>(
    g: &MarkedGroup<T>,
    sequence: &[Word],
    v_samples: &[Subspace<T>],
    k: usize,
) -> Result<DynamicsReport<T>, CertifyError> {
    check_k(g, k)?;
    if sequence.is_empty() || v_samples.is_empty() {
        return Err(CertifyError::BadConfig(
            "dynamics test needs a nonempty sequence and at least one sample".into(),
        ));
    }
    let last = evaluate(g, sequence.last().unwrap());
    let sd_last = singular_data(&last)?;
    let v0 = sd_last.uk(k)?;
    let w0 = u_dk_inverse(&last, k)?;

    for (index, v) in v_samples.iter().enumerate() {
        let margin = transversality_margin(v, &w0)?;
        if margin <= DYNAMICS_MARGIN {
            return Err(CertifyError::NotTransverse { index, margin });
        }
    }

    let mut distances = Vec::with_capacity(v_samples.len());
    let mut pass = true;
    for v in v_samples {
        let mut row = Vec::with_capacity(sequence.len());
        for w in sequence {
            // The scale factor is irrelevant to the image subspace, so the
            // renormalized entries avoid overflow at large powers.
            let image = Subspace::new(evaluate(g, w).entries() * v.frame())?;
            row.push(angle_distance(&image, &v0)?);
        }
        let final_ok = *row.last().unwrap() < 1e-3;
        let half = row.len() / 2;
        let tail_ok = row.windows(2).skip(half.saturating_sub(1)).all(|p| p[1] <= p[0] + 1e-12);
        pass &= final_ok && tail_ok;
        distances.push(row);
    }
    Ok(DynamicsReport { distances, v0, w0, pass })
}

// ---------------------------------------------------------------------------
// Type-preserving perturbation
// ---------------------------------------------------------------------------

fn random_matrix<T: Scalar, R: Rng>(rng: &mut R, d: usize) -> DMatrix<T> {
    DMatrix::from_fn(d, d, |_, _| T::standard_normal(rng))
}

fn unit_det_normalize<T: Scalar>(m: &mut DMatrix<T>) -> Result<(), CertifyError> {
    let det = m.determinant();
    let modulus = det.modulus();
    if !(modulus.is_finite() && modulus > 1e-12) {
        return Err(CertifyError::BadConfig("perturbed image is numerically singular".into()));
    }
    let d = m.nrows() as f64;
    let arg = det.im().atan2(det.re());
    let root_mod = modulus.powf(1.0 / d);
    let root = T::from_re_im(root_mod * (arg / d).cos(), root_mod * (arg / d).sin());
    *m = m.map(|e| e / root);
    Ok(())
}

/// Perturb within the type-preserving deformation space: every generator
/// appearing in some peripheral word is conjugated by one common h = I + E
/// with ‖E‖ = magnitude, every other generator image is perturbed additively
/// and determinant-renormalized.
///
/// A single shared conjugator is what keeps *multi-letter* peripheral words
/// type-preserved: the trace of any product of constrained letters is
/// conjugation-invariant, while independent per-letter conjugations would
/// move it. Requires a free presentation, so images may change independently.
pub fn perturb_type_preserving<T: Scalar>(
    g: &MarkedGroup<T>,
    magnitude: f64,
    seed: u64,
) -> Result<MarkedGroup<T>, CertifyError> {
    if !matches!(g.presentation(), Presentation::Free) {
        return Err(CertifyError::Group(GroupError::UnsupportedPresentation));
    }
    if !(magnitude >= 0.0 && magnitude < 1.0) {
        return Err(CertifyError::BadConfig(format!(
            "perturbation magnitude {magnitude} outside [0, 1)"
        )));
    }
    if magnitude == 0.0 {
        return Ok(g.clone());
    }
    let mut constrained = vec![false; g.rank()];
    for p in g.peripherals() {
        for &l in p.generator_word.letters() {
            constrained[l.unsigned_abs() as usize - 1] = true;
        }
    }
    let d = g.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit_noise = |rng: &mut ChaCha8Rng| {
        let noise = random_matrix::<T, _>(rng, d);
        let scale = magnitude / noise.norm().max(1e-300);
        noise.map(|e| e * T::from_re_im(scale, 0.0))
    };
    let h = DMatrix::<T>::identity(d, d) + unit_noise(&mut rng);
    let h_inv = h
        .clone()
        .try_inverse()
        .ok_or_else(|| CertifyError::BadConfig("perturbation conjugator is singular".into()))?;
    let mut images = g.images().to_vec();
    for (i, img) in images.iter_mut().enumerate() {
        if constrained[i] {
            *img = &h * &*img * &h_inv;
        } else {
            *img += unit_noise(&mut rng);
            unit_det_normalize(img)?;
        }
    }
    Ok(g.with_images(images)?)
}

// ---------------------------------------------------------------------------
// Composite diagnosis
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagnosisTag {
    NotDivergent,
    AnosovConsistent,
    NonAnosovConsistent,
    Inconclusive,
}

impl DiagnosisTag {
    /// Component tags, in canonical order.
    pub fn tag_set(&self) -> Vec<&'static str> {
        match self {
            DiagnosisTag::NotDivergent => vec!["not-divergent"],
            DiagnosisTag::AnosovConsistent => {
                vec!["divergent-consistent", "EGF-consistent", "Anosov-consistent"]
            }
            DiagnosisTag::NonAnosovConsistent => {
                vec!["divergent-consistent", "EGF-consistent", "non-Anosov-consistent"]
            }
            DiagnosisTag::Inconclusive => vec!["divergent-consistent", "inconclusive"],
        }
    }

    pub fn canonical(&self) -> String {
        self.tag_set().join(", ")
    }
}

impl std::fmt::Display for DiagnosisTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.canonical())
    }
}

/// The decision table, as a pure function of the sub-report facts:
/// not divergent → not-divergent; all parabolic fibers singletons with a
/// positive cross-label margin → Anosov-consistent; some fiber with ≥ 2
/// clusters and a positive cross-label margin → non-Anosov-consistent;
/// anything else → inconclusive.
pub fn tag_from_components(
    divergent: bool,
    parabolic_fiber_cardinalities: &[usize],
    min_cross_margin: Option<f64>,
    margin_tol: f64,
) -> DiagnosisTag {
    if !divergent {
        return DiagnosisTag::NotDivergent;
    }
    let margin_ok = min_cross_margin.is_some_and(|m| m > margin_tol);
    if margin_ok && parabolic_fiber_cardinalities.iter().all(|&c| c == 1) {
        DiagnosisTag::AnosovConsistent
    } else if margin_ok && parabolic_fiber_cardinalities.iter().any(|&c| c >= 2) {
        DiagnosisTag::NonAnosovConsistent
    } else {
        DiagnosisTag::Inconclusive
    }
}

#[derive(Debug, Clone)]
pub struct Diagnosis<T: Scalar> {
    pub divergence: DivergenceReport,
    /// Weak-domination fit per peripheral label.
    pub domination: Vec<(String, DominationFit)>,
    pub fibers: Vec<FiberReport<T>>,
    pub audit: Option<TransversalityAudit>,
    pub skipped: usize,
    pub tag: DiagnosisTag,
}

/// Run every certifier and combine through the decision table.
pub fn diagnose<T: Scalar>(
    g: &MarkedGroup<T>,
    k: usize,
    f: &DepthFunction,
    cfg: &DiagnoseConfig,
) -> Result<Diagnosis<T>, CertifyError> {
    let divergence = certify_divergence(g, k, cfg.r_max, &cfg.certify)?;
    let mut domination = Vec::new();
    for p in g.peripherals() {
        domination
            .push((p.label.clone(), fit_weak_domination(g, p, k, f, cfg.n_max, cfg.certify.slack)?));
    }
    let samples = sample_limit_set(g, k, &cfg.sampler)?;
    let skipped = samples.skipped;
    let fibers = analyze_fibers(&samples, cfg.certify.cluster_radius)?;
    let audit = audit_transversality(&fibers).ok();
    let cards: Vec<usize> =
        fibers.iter().filter(|f| f.peripheral).map(|f| f.cluster_count).collect();
    let divergent = divergence.verdict == DivergenceVerdict::DivergentConsistent;
    let tag = tag_from_components(
        divergent,
        &cards,
        audit.as_ref().map(|a| a.min_margin),
        cfg.certify.margin_tol,
    );
    Ok(Diagnosis { divergence, domination, fibers, audit, skipped, tag })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flags::flag_distance;
    use nalgebra::dmatrix;

    fn rot45() -> DMatrix<f64> {
        let t = std::f64::consts::FRAC_PI_4;
        dmatrix![t.cos(), -t.sin(); t.sin(), t.cos()]
    }

    fn schottky_pair() -> MarkedGroup<f64> {
        let g1 = dmatrix![4.0, 0.0; 0.0, 0.25];
        let g2 = &rot45() * &g1 * rot45().transpose();
        MarkedGroup::new(vec![g1, g2], Presentation::Free, vec![]).unwrap()
    }

    fn gamma2_peripheral() -> MarkedGroup<f64> {
        MarkedGroup::new(
            vec![dmatrix![1.0, 2.0; 0.0, 1.0], dmatrix![1.0, 0.0; 2.0, 1.0]],
            Presentation::Free,
            vec![PeripheralSubgroup { label: "P".into(), generator_word: Word::new(vec![1]) }],
        )
        .unwrap()
    }

    fn parabolic_rank1() -> MarkedGroup<f64> {
        MarkedGroup::new(
            vec![dmatrix![1.0, 1.0; 0.0, 1.0]],
            Presentation::Free,
            vec![PeripheralSubgroup { label: "P".into(), generator_word: Word::new(vec![1]) }],
        )
        .unwrap()
    }

    fn trivial_rank2() -> MarkedGroup<f64> {
        MarkedGroup::new(
            vec![DMatrix::identity(2, 2), DMatrix::identity(2, 2)],
            Presentation::Free,
            vec![PeripheralSubgroup { label: "P".into(), generator_word: Word::new(vec![1]) }],
        )
        .unwrap()
    }

    fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(4, 4);
        m.view_mut((0, 0), (2, 2)).copy_from(a);
        m.view_mut((2, 2), (2, 2)).copy_from(b);
        m
    }

    /// Parabolic ⊕ hyperbolic in block 1/2: divergent at k = 2, with double
    /// fibers over every parabolic point.
    fn direct_sum_4d() -> MarkedGroup<f64> {
        let h1 = dmatrix![4.0, 0.0; 0.0, 0.25];
        let h2 = &rot45() * &h1 * rot45().transpose();
        let a = block_diag(&dmatrix![1.0, 1.0; 0.0, 1.0], &h1);
        let b = block_diag(&dmatrix![1.0, 0.0; 4.0, 1.0], &h2);
        MarkedGroup::new(
            vec![a, b],
            Presentation::Free,
            vec![PeripheralSubgroup { label: "P".into(), generator_word: Word::new(vec![1]) }],
        )
        .unwrap()
    }

    fn cfg() -> CertifyConfig {
        CertifyConfig::default()
    }

    #[test]
    fn divergence_schottky_strictly_increasing() {
        let g = schottky_pair();
        let rep = certify_divergence(&g, 1, 6, &cfg()).unwrap();
        assert_eq!(rep.verdict, DivergenceVerdict::DivergentConsistent);
        for (i, s) in rep.shells.iter().enumerate() {
            assert_eq!(s.radius, i + 1);
            assert_eq!(s.count, 4 * 3usize.pow(i as u32));
        }
        for pair in rep.shells.windows(2).skip(1) {
            assert!(pair[1].min_gap > pair[0].min_gap);
        }
        assert!(rep.shells.last().unwrap().min_gap > 4.0);
    }

    #[test]
    fn divergence_trivial_rep_not_divergent() {
        let rep = certify_divergence(&trivial_rank2(), 1, 4, &cfg()).unwrap();
        assert_eq!(rep.verdict, DivergenceVerdict::NotDivergent);
        for s in &rep.shells {
            assert!(s.max_gap.abs() < 1e-12);
        }
    }

    #[test]
    fn divergence_gamma2_sublinear_but_divergent() {
        let rep = certify_divergence(&gamma2_peripheral(), 1, 5, &cfg()).unwrap();
        assert_eq!(rep.verdict, DivergenceVerdict::DivergentConsistent);
        // Parabolic directions keep shell minima sublinear: increments shrink.
        let m: Vec<f64> = rep.shells.iter().map(|s| s.min_gap).collect();
        assert!(m[4] - m[3] < m[1] - m[0]);
    }

    #[test]
    fn divergence_rejects_bad_k() {
        let g = schottky_pair();
        assert!(matches!(certify_divergence(&g, 0, 3, &cfg()), Err(CertifyError::BadConfig(_))));
        assert!(matches!(certify_divergence(&g, 2, 3, &cfg()), Err(CertifyError::BadConfig(_))));
    }

    #[test]
    fn fit_parabolic_slope_near_ln2() {
        let g = parabolic_rank1();
        let f = DepthFunction::Exp2;
        let fit = fit_weak_domination(&g, &g.peripherals()[0].clone(), 1, &f, 512, 0.05).unwrap();
        assert!(
            fit.slope > 0.54 && fit.slope < 0.84,
            "slope = {} (target ln 2 ≈ 0.693)",
            fit.slope
        );
        assert_eq!(fit.violations, 0);
        assert!(!fit.nonlinear && !fit.degenerate);
        assert!(fit.r_squared > 0.9, "r² = {}", fit.r_squared);
    }

    #[test]
    fn fit_hyperbolic_flagged_nonlinear() {
        let g = MarkedGroup::new(
            vec![dmatrix![4.0, 0.0; 0.0, 0.25]],
            Presentation::Free,
            vec![PeripheralSubgroup { label: "H".into(), generator_word: Word::new(vec![1]) }],
        )
        .unwrap();
        let fit =
            fit_weak_domination(&g, &g.peripherals()[0].clone(), 1, &DepthFunction::Exp2, 256, 0.05)
                .unwrap();
        assert!(fit.nonlinear, "slope = {}, r² = {}", fit.slope, fit.r_squared);
        assert!(!fit.degenerate);
        assert!(fit.slope > 5.0);
    }

    #[test]
    fn fit_trivial_degenerate_all_violations() {
        let g = MarkedGroup::new(
            vec![DMatrix::<f64>::identity(2, 2)],
            Presentation::Free,
            vec![PeripheralSubgroup { label: "T".into(), generator_word: Word::new(vec![1]) }],
        )
        .unwrap();
        let fit =
            fit_weak_domination(&g, &g.peripherals()[0].clone(), 1, &DepthFunction::Exp2, 128, 0.05)
                .unwrap();
        assert!(fit.degenerate);
        assert!(fit.slope.abs() < 1e-9);
        assert!(fit.violations >= fit.samples - 2, "violations = {}", fit.violations);
    }

    #[test]
    fn fit_recovers_synthetic_rates() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for c0 in [0.3, 0.7, 1.5] {
            let xs: Vec<f64> = (1..=300).map(|i| i as f64 * 0.08).collect();
            let ys: Vec<f64> =
                xs.iter().map(|x| c0 * x + rng.random_range(-0.01..0.01)).collect();
            let fit = fit_domination_from_samples(&xs, &ys, 0.05).unwrap();
            assert!((fit.slope - c0).abs() <= 0.05, "c0 = {c0}, fitted {}", fit.slope);
            assert_eq!(fit.violations, 0);
            assert!(!fit.nonlinear);
        }
    }

    #[test]
    fn probe_flow_schottky_linear() {
        let g = schottky_pair();
        let path = Word::new(vec![1, 2]).pow(8);
        let probe = probe_flow_domination(&g, &path, 1).unwrap();
        assert_eq!(probe.gaps.len(), 16);
        assert!(probe.gaps.windows(2).all(|p| p[1] > p[0]));
        assert!(
            probe.per_letter_slope > 2.0 && probe.per_letter_slope < 3.6,
            "slope = {} (expected ≈ 2 ln 4)",
            probe.per_letter_slope
        );
    }

    #[test]
    fn probe_flow_trivial_constant_zero() {
        let probe = probe_flow_domination(&trivial_rank2(), &Word::new(vec![1, 2, 1]), 1).unwrap();
        assert!(probe.gaps.iter().all(|g| g.abs() < 1e-12));
        assert!(probe.per_letter_slope.abs() < 1e-12);
    }

    #[test]
    fn probe_flow_parabolic_logarithmic() {
        let g = parabolic_rank1();
        let probe = probe_flow_domination(&g, &Word::new(vec![1]).pow(64), 1).unwrap();
        assert!(probe.gaps.windows(2).all(|p| p[1] > p[0]));
        // σ1([[1,n],[0,1]]) ≈ n for large n, so the final gap is ≈ 2 ln 64.
        let expected = 2.0 * 64.0f64.ln();
        assert!((probe.gaps.last().unwrap() - expected).abs() < 0.05);
        assert!(probe.per_letter_slope < 0.5);
    }

    #[test]
    fn limit_set_parabolic_is_single_point() {
        let g = gamma2_peripheral();
        let sampler = SamplerConfig {
            conical_count: 0,
            conical_length: 0,
            peripheral_powers: vec![100_000_000, 200_000_000, -100_000_000, -200_000_000],
            conjugators: vec![Word::identity()],
            seed: 9,
        };
        let out = sample_limit_set(&g, 1, &sampler).unwrap();
        assert_eq!(out.samples.len(), 4);
        assert_eq!(out.skipped, 0);
        for i in 0..out.samples.len() {
            for j in (i + 1)..out.samples.len() {
                let d = flag_distance(&out.samples[i].0, &out.samples[j].0).unwrap();
                assert!(d < 1e-6, "flag distance {d}");
            }
        }
        let fibers = analyze_fibers(&out, 0.05).unwrap();
        assert_eq!(fibers.len(), 1);
        assert_eq!(fibers[0].cluster_count, 1);
        assert!(fibers[0].peripheral);
        assert!(!fibers[0].low_confidence);
    }

    #[test]
    fn limit_set_trivial_all_skipped() {
        let g = trivial_rank2();
        let sampler = SamplerConfig {
            conical_count: 4,
            conical_length: 8,
            peripheral_powers: vec![10, -10],
            conjugators: vec![Word::identity()],
            seed: 1,
        };
        let out = sample_limit_set(&g, 1, &sampler).unwrap();
        assert!(out.samples.is_empty());
        assert_eq!(out.skipped, 6);
    }

    #[test]
    fn limit_set_conical_words_respect_heuristics() {
        let g = gamma2_peripheral();
        let sampler = SamplerConfig {
            conical_count: 8,
            conical_length: 12,
            peripheral_powers: vec![],
            conjugators: vec![],
            seed: 4,
        };
        let out = sample_limit_set(&g, 1, &sampler).unwrap();
        let words: Vec<&Word> = out
            .samples
            .iter()
            .map(|(_, l)| match l {
                SampleLabel::Conical { word } => word,
                _ => panic!("expected conical label"),
            })
            .collect();
        assert_eq!(words.len() + out.skipped, 8);
        let firsts: Vec<i32> = words.iter().map(|w| w.letters()[0]).collect();
        assert_eq!(&firsts[..4], &[1, -1, 2, -2]);
        for w in words {
            assert!(w.is_reduced());
            assert_eq!(w.len(), 12);
            assert!(!has_long_peripheral_suffix(w, g.peripherals(), 3));
        }
    }

    #[test]
    fn coset_rep_normalizes_conjugators() {
        let c = Word::new(vec![1]);
        assert!(peripheral_coset_rep(&Word::new(vec![1, 1, 1]), &c).is_empty());
        assert!(peripheral_coset_rep(&Word::new(vec![-1, -1]), &c).is_empty());
        assert_eq!(peripheral_coset_rep(&Word::new(vec![2, 1, 1]), &c), Word::new(vec![2]));
        assert_eq!(peripheral_coset_rep(&Word::new(vec![2]), &c), Word::new(vec![2]));
        // a and b = a·(a⁻¹b) lie in the same coset of ⟨a⁻¹b⟩ and must agree.
        let c2 = Word::new(vec![-1, 2]);
        assert_eq!(peripheral_coset_rep(&Word::new(vec![1]), &c2), Word::new(vec![1]));
        assert_eq!(peripheral_coset_rep(&Word::new(vec![2]), &c2), Word::new(vec![1]));
        assert_eq!(
            peripheral_coset_rep(&Word::new(vec![2, -1, 2, -1, 2]), &c2),
            Word::new(vec![1])
        );
    }

    #[test]
    fn fibers_direct_sum_have_cardinality_two() {
        let g = direct_sum_4d();
        let sampler = SamplerConfig {
            conical_count: 0,
            conical_length: 0,
            peripheral_powers: vec![100_000_000, 200_000_000, -100_000_000, -200_000_000],
            conjugators: vec![Word::identity(), Word::new(vec![2])],
            seed: 2,
        };
        let out = sample_limit_set(&g, 2, &sampler).unwrap();
        assert_eq!(out.skipped, 0);
        let fibers = analyze_fibers(&out, 0.05).unwrap();
        assert_eq!(fibers.len(), 2);
        for fiber in &fibers {
            assert!(fiber.peripheral);
            assert_eq!(fiber.cluster_count, 2, "fiber {}", fiber.label);
            assert!(fiber.max_intra < 0.05);
            assert!(fiber.min_inter.unwrap() > 0.1, "min_inter = {:?}", fiber.min_inter);
            // Every flag in the fiber contains the (conjugated) parabolic
            // line, so all intra-fiber pairs are non-transverse.
            for i in 0..fiber.flags.len() {
                for j in (i + 1)..fiber.flags.len() {
                    let (t, margin) =
                        flags_transverse(&fiber.flags[i], &fiber.flags[j]).unwrap();
                    assert!(!t, "intra-fiber pair unexpectedly transverse");
                    assert!(margin < 1e-6, "margin = {margin}");
                }
            }
        }
    }

    #[test]
    fn fibers_invariant_under_sample_permutation() {
        let g = direct_sum_4d();
        let sampler = SamplerConfig {
            conical_count: 2,
            conical_length: 8,
            peripheral_powers: vec![50, -50],
            conjugators: vec![Word::identity()],
            seed: 7,
        };
        let out = sample_limit_set(&g, 2, &sampler).unwrap();
        let mut reversed = out.clone();
        reversed.samples.reverse();
        let a = analyze_fibers(&out, 0.05).unwrap();
        let b = analyze_fibers(&reversed, 0.05).unwrap();
        let summary = |rs: &[FiberReport<f64>]| -> Vec<(String, usize, usize)> {
            rs.iter().map(|r| (r.label.clone(), r.flags.len(), r.cluster_count)).collect()
        };
        assert_eq!(summary(&a), summary(&b));
    }

    #[test]
    fn audit_needs_two_labels() {
        let g = gamma2_peripheral();
        let sampler = SamplerConfig {
            conical_count: 0,
            conical_length: 0,
            peripheral_powers: vec![30, -30],
            conjugators: vec![Word::identity()],
            seed: 3,
        };
        let out = sample_limit_set(&g, 1, &sampler).unwrap();
        let fibers = analyze_fibers(&out, 0.05).unwrap();
        assert!(matches!(
            audit_transversality(&fibers),
            Err(CertifyError::InsufficientLabels(1))
        ));
    }

    #[test]
    fn audit_schottky_directions_have_margin() {
        let g = schottky_pair();
        let sampler = SamplerConfig {
            conical_count: 4,
            conical_length: 10,
            peripheral_powers: vec![],
            conjugators: vec![],
            seed: 11,
        };
        let out = sample_limit_set(&g, 1, &sampler).unwrap();
        let fibers = analyze_fibers(&out, 0.05).unwrap();
        assert_eq!(fibers.len(), 4);
        let audit = audit_transversality(&fibers).unwrap();
        assert!(audit.min_margin > 0.1, "margin = {}", audit.min_margin);
        assert_eq!(audit.pairs, 6);
    }

    #[test]
    fn dynamics_diagonal_sequence_passes() {
        let g = MarkedGroup::new(
            vec![dmatrix![2.0, 0.0; 0.0, 0.5]],
            Presentation::Free,
            vec![],
        )
        .unwrap();
        let seq: Vec<Word> = (1..=16).map(|n| Word::new(vec![1]).pow(n)).collect();
        let v = Subspace::new(dmatrix![1.0; 1.0]).unwrap();
        let rep = test_dynamics_preserving(&g, &seq, &[v], 1).unwrap();
        assert!(rep.pass);
        let row = &rep.distances[0];
        // tan θ_n = 4⁻ⁿ, so successive ratios sit near 1/4 until roundoff.
        for i in 1..8 {
            let ratio = row[i] / row[i - 1];
            assert!((ratio - 0.25).abs() < 0.05, "ratio = {ratio}");
        }
        assert!(*row.last().unwrap() < 1e-9);
    }

    #[test]
    fn dynamics_rejects_non_transverse_sample() {
        let g = MarkedGroup::new(
            vec![dmatrix![2.0, 0.0; 0.0, 0.5]],
            Presentation::Free,
            vec![],
        )
        .unwrap();
        let seq: Vec<Word> = (1..=8).map(|n| Word::new(vec![1]).pow(n)).collect();
        let v = Subspace::new(dmatrix![0.0; 1.0]).unwrap();
        assert!(matches!(
            test_dynamics_preserving(&g, &seq, &[v], 1),
            Err(CertifyError::NotTransverse { index: 0, .. })
        ));
    }

    #[test]
    fn dynamics_parabolic_images_converge() {
        let g = parabolic_rank1();
        let seq: Vec<Word> = (1..=15).map(|j| Word::new(vec![1]).pow(100 * j)).collect();
        let v = Subspace::new(dmatrix![0.0; 1.0]).unwrap();
        let rep = test_dynamics_preserving(&g, &seq, &[v], 1).unwrap();
        assert!(rep.pass);
        // ρ(aⁿ)·e2 = (n, 1)ᵀ approaches span(e1) like 1/n; the reference V0
        // (from the final power) sits ≈ 1/1500 off e1, slightly shrinking
        // every distance.
        let row = &rep.distances[0];
        assert!(row[0] > 0.008 && row[0] < 0.0105, "row[0] = {}", row[0]);
        assert!(*row.last().unwrap() < 1e-3);
    }

    #[test]
    fn perturb_zero_magnitude_is_identity() {
        let g = gamma2_peripheral();
        let p = perturb_type_preserving(&g, 0.0, 42).unwrap();
        for (a, b) in g.images().iter().zip(p.images()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn perturb_preserves_peripheral_traces() {
        let g = gamma2_peripheral();
        let p = perturb_type_preserving(&g, 0.3, 5).unwrap();
        let tr = |m: &DMatrix<f64>| m[(0, 0)] + m[(1, 1)];
        assert!((tr(&p.images()[0]) - tr(&g.images()[0])).abs() < 1e-10);
        assert!((&p.images()[0] - &g.images()[0]).norm() > 1e-6);
        assert!((&p.images()[1] - &g.images()[1]).norm() > 1e-6);
        assert!((p.images()[1].determinant() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn perturb_preserves_multi_letter_peripheral_traces() {
        let g = MarkedGroup::new(
            vec![dmatrix![1.0, 2.0; 0.0, 1.0], dmatrix![1.0, 0.0; 2.0, 1.0]],
            Presentation::Free,
            vec![
                PeripheralSubgroup { label: "P".into(), generator_word: Word::new(vec![1]) },
                PeripheralSubgroup { label: "Q".into(), generator_word: Word::new(vec![-1, 2]) },
            ],
        )
        .unwrap();
        let p = perturb_type_preserving(&g, 0.01, 1).unwrap();
        let tr = |m: &DMatrix<f64>| m[(0, 0)] + m[(1, 1)];
        // Both letters are constrained by some peripheral word; the common
        // conjugation moves the images while fixing every peripheral trace,
        // including the two-letter a⁻¹b (trace −2).
        let q = Word::new(vec![-1, 2]);
        assert!((tr(&p.plain_evaluate(&q)) - tr(&g.plain_evaluate(&q))).abs() < 1e-10);
        assert!((tr(&p.images()[0]) - tr(&g.images()[0])).abs() < 1e-10);
        assert!((&p.images()[0] - &g.images()[0]).norm() > 1e-8);
        assert!((&p.images()[1] - &g.images()[1]).norm() > 1e-8);
    }

    #[test]
    fn tag_table_is_pure_and_total() {
        use DiagnosisTag::*;
        assert_eq!(tag_from_components(false, &[2], Some(0.5), 1e-6), NotDivergent);
        assert_eq!(tag_from_components(true, &[1, 1], Some(0.5), 1e-6), AnosovConsistent);
        assert_eq!(tag_from_components(true, &[], Some(0.5), 1e-6), AnosovConsistent);
        assert_eq!(tag_from_components(true, &[2, 1], Some(0.5), 1e-6), NonAnosovConsistent);
        assert_eq!(tag_from_components(true, &[1], None, 1e-6), Inconclusive);
        assert_eq!(tag_from_components(true, &[2], Some(1e-9), 1e-6), Inconclusive);
        assert_eq!(
            NonAnosovConsistent.tag_set(),
            vec!["divergent-consistent", "EGF-consistent", "non-Anosov-consistent"]
        );
        assert_eq!(NotDivergent.canonical(), "not-divergent");
    }

    #[test]
    fn diagnose_schottky_is_anosov_consistent() {
        let g = schottky_pair();
        let cfg = DiagnoseConfig {
            certify: CertifyConfig::default(),
            r_max: 5,
            n_max: 64,
            sampler: SamplerConfig {
                conical_count: 4,
                conical_length: 10,
                peripheral_powers: vec![],
                conjugators: vec![],
                seed: 13,
            },
        };
        let d1 = diagnose(&g, 1, &DepthFunction::Exp2, &cfg).unwrap();
        assert_eq!(d1.tag, DiagnosisTag::AnosovConsistent);
        assert!(d1.fibers.iter().all(|f| f.cluster_count == 1));
        // Determinism: a rerun reproduces the audit margin bit for bit.
        let d2 = diagnose(&g, 1, &DepthFunction::Exp2, &cfg).unwrap();
        assert_eq!(d2.tag, d1.tag);
        assert_eq!(
            d1.audit.as_ref().unwrap().min_margin.to_bits(),
            d2.audit.as_ref().unwrap().min_margin.to_bits()
        );
    }

    #[test]
    fn diagnose_direct_sum_is_non_anosov_consistent() {
        let g = direct_sum_4d();
        let cfg = DiagnoseConfig {
            certify: CertifyConfig::default(),
            r_max: 4,
            n_max: 64,
            sampler: SamplerConfig {
                conical_count: 4,
                conical_length: 8,
                peripheral_powers: vec![100_000_000, 200_000_000, -100_000_000, -200_000_000],
                conjugators: vec![Word::identity(), Word::new(vec![2])],
                seed: 17,
            },
        };
        let d = diagnose(&g, 2, &DepthFunction::Exp2, &cfg).unwrap();
        assert_eq!(d.tag, DiagnosisTag::NonAnosovConsistent);
        assert!(d
            .fibers
            .iter()
            .filter(|f| f.peripheral)
            .all(|f| f.cluster_count >= 2));
        let (_, fit) = &d.domination[0];
        assert!(fit.slope > 0.5 && fit.slope < 0.9, "slope = {}", fit.slope);
        assert!(!fit.nonlinear);
    }

    #[test]
    fn diagnose_trivial_is_not_divergent() {
        let cfg = DiagnoseConfig {
            certify: CertifyConfig::default(),
            r_max: 3,
            n_max: 16,
            sampler: SamplerConfig {
                conical_count: 2,
                conical_length: 6,
                peripheral_powers: vec![10, -10],
                conjugators: vec![Word::identity()],
                seed: 19,
            },
        };
        let d = diagnose(&trivial_rank2(), 1, &DepthFunction::Exp2, &cfg).unwrap();
        assert_eq!(d.tag, DiagnosisTag::NotDivergent);
        assert_eq!(d.tag.canonical(), "not-divergent");
        assert!(d.fibers.is_empty());
    }
}
