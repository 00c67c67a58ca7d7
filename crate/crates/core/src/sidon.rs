//! Single-column self-intersection analysis of spacer schedules.
//!
//! For stage `j` with columns at positions `p_j(c)`, the translate `S^m X_j`
//! with `h_j < m <= h_{j+1}` meets `X_j` inside tower `j+1` exactly where some
//! column pair `(c, c')`, `c < c'`, with displacement `d = p_j(c') - p_j(c)`
//! satisfies `|m - d| < h_j`; that pair contributes mass
//! `w_{j+1} * (h_j - |m - d|)`, confined to column `c'`. A stage passes
//! verification when for every admissible `m` the whole intersection is
//! confined to a single column.
//!
//! Two mechanisms can break this. Different-target windows can overlap, which
//! an exact sweep over the window list detects. Or mass can exit tower `j+1`
//! through the ceiling (possible once `m` exceeds the last spacer count) and
//! land back inside `X_j` after crossing stage-`j+1` spacers. If every
//! stage-`j+1` spacer count is at least `h_{j+1}`, exiting mass always lands
//! strictly inside a stage-`j+1` spacer block, never in `X_j`; this certifies
//! the exit band at zero cost. Otherwise the band is enumerated with the cell
//! engine when it is small enough, and reported as inconclusive when not.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::arith::{rat_int, serde_int, serde_rat, Int, Rat};
use crate::cells::{image_measure, CellSet};
use crate::construction::{Construction, StageParams};
use crate::error::{Error, Result};

/// Largest exit band enumerated cell by cell before giving up.
pub const BAND_ENUM_CAP: u64 = 4096;

pub const MIN_GROWTH: u32 = 3;
pub const DEFAULT_GROWTH: u32 = 10;
pub const DEFAULT_BIT_BUDGET: u64 = 4096;

/// The set of powers `m` for which the pair `(source, target)` produces
/// overlap inside tower `j+1`: the integers in `[m_lo, m_hi]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OverlapWindow {
    pub source: u32,
    pub target: u32,
    #[serde(with = "serde_int")]
    pub diff: Int,
    #[serde(with = "serde_int")]
    pub m_lo: Int,
    #[serde(with = "serde_int")]
    pub m_hi: Int,
}

impl OverlapWindow {
    /// The in-range `m` with maximal overlap for this pair.
    pub fn peak_m(&self) -> Int {
        self.diff
            .clone()
            .max(self.m_lo.clone())
            .min(self.m_hi.clone())
    }
}

/// All nonempty overlap windows of stage `j`, sorted by `m_lo`.
pub fn overlap_windows(c: &Construction, j: u32) -> Result<Vec<OverlapWindow>> {
    let params = c.stage_params(j)?;
    let starts = c.column_positions(j)?;
    let h = c.height(j);
    let h_next = c.height(j + 1);
    let one = Int::one();
    let lo_bound = h + &one;
    let mut out = Vec::new();
    for c1 in 0..params.cuts() {
        for c2 in (c1 + 1)..params.cuts() {
            let d = &starts[c2] - &starts[c1];
            let m_lo = (&d - h + &one).max(lo_bound.clone());
            let m_hi = (&d + h - &one).min(h_next.clone());
            if m_lo <= m_hi {
                out.push(OverlapWindow {
                    source: c1 as u32 + 1,
                    target: c2 as u32 + 1,
                    diff: d,
                    m_lo,
                    m_hi,
                });
            }
        }
    }
    out.sort_by(|a, b| {
        (&a.m_lo, &a.m_hi, a.target, a.source).cmp(&(&b.m_lo, &b.m_hi, b.target, b.source))
    });
    Ok(out)
}

/// Closed-form overlap `mu(X_j` &cap; `S^m X_j)` resolved inside tower `j+1`,
/// valid for `m > h_j`. When the stage's exit band is zero-certified this is
/// the exact total for all `m <= h_{j+1}`.
pub fn window_overlap_value(c: &Construction, j: u32, m: &Int) -> Result<Rat> {
    let params = c.stage_params(j)?;
    let starts = c.column_positions(j)?;
    let h = c.height(j);
    let w_next = c.width(j + 1);
    let mut units = Int::zero();
    for c1 in 0..params.cuts() {
        for c2 in (c1 + 1)..params.cuts() {
            let d = &starts[c2] - &starts[c1];
            let dist = (m - d).abs();
            if &dist < h {
                units += h - dist;
            }
        }
    }
    Ok(rat_int(&units) * w_next)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind")]
pub enum SidonVerdict {
    Verified,
    Violated {
        #[serde(with = "serde_int")]
        witness: Int,
        columns: Vec<u32>,
    },
    Inconclusive {
        #[serde(with = "serde_int")]
        band_lo: Int,
        #[serde(with = "serde_int")]
        band_hi: Int,
    },
}

impl SidonVerdict {
    pub fn is_verified(&self) -> bool {
        matches!(self, SidonVerdict::Verified)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SidonCertificate {
    pub stage: u32,
    pub verdict: SidonVerdict,
    pub windows: Vec<OverlapWindow>,
    /// Exit band `[band_lo, band_hi]`: the powers for which some orbit leaves
    /// tower `j+1` before the check completes.
    #[serde(with = "serde_int")]
    pub band_lo: Int,
    #[serde(with = "serde_int")]
    pub band_hi: Int,
    /// True when stage-`j+1` spacers certify that exiting mass never returns
    /// to `X_j` within the checked range, making window analytics exact.
    pub band_zero_certified: bool,
    /// Stage depth backing the result: `j + 2` for the certificate path,
    /// the requested resolution for engine enumeration.
    pub checked_resolution: u32,
    #[serde(with = "serde_rat")]
    pub max_unresolved: Rat,
}

fn exit_band(c: &Construction, j: u32, params: &StageParams) -> (Int, Int) {
    let h = c.height(j);
    let last_spacer = params.spacers.last().unwrap();
    let band_lo = (h + 1u32).max(last_spacer + 1u32);
    (band_lo, c.height(j + 1).clone())
}

fn band_zero_certified(c: &Construction, j: u32) -> bool {
    if j + 1 > c.stage_count() {
        return false;
    }
    let next = c.stage_params(j + 1).unwrap();
    let h_next = c.height(j + 1);
    next.spacers.iter().all(|s| s >= h_next)
}

/// Checks that every admissible power's self-overlap is confined to one
/// column of stage `j`. Exact over the window range; the exit band is
/// zero-certified from stage-`j+1` parameters when possible, enumerated with
/// the engine at `resolution` otherwise, and reported `Inconclusive` when
/// neither applies. `tol` bounds the unresolved mass tolerated per engine
/// call; a `Verified` verdict is exact whenever `max_unresolved` is zero.
pub fn verify_sidon_stage(
    c: &Construction,
    j: u32,
    resolution: u32,
    tol: &Rat,
) -> Result<SidonCertificate> {
    let params = c.stage_params(j)?.clone();
    if resolution <= j || resolution > c.max_stage() {
        return Err(Error::StageOutOfRange {
            stage: resolution,
            max: c.max_stage(),
        });
    }
    let windows = overlap_windows(c, j)?;
    let (band_lo, band_hi) = exit_band(c, j, &params);
    let zero_certified = band_zero_certified(c, j);

    let mut report = SidonCertificate {
        stage: j,
        verdict: SidonVerdict::Verified,
        windows: windows.clone(),
        band_lo: band_lo.clone(),
        band_hi: band_hi.clone(),
        band_zero_certified: zero_certified,
        checked_resolution: if zero_certified { j + 2 } else { resolution },
        max_unresolved: Rat::zero(),
    };

    // Window sweep: two windows with different targets sharing a power put
    // overlap mass in two columns at once. Since overlap counts only change
    // at window openings, the smallest violating power is some window's m_lo.
    let mut active: BinaryHeap<Reverse<(Int, u32)>> = BinaryHeap::new();
    for w in &windows {
        while active.peek().is_some_and(|Reverse((hi, _))| hi < &w.m_lo) {
            active.pop();
        }
        let clashing: BTreeSet<u32> = active
            .iter()
            .filter(|Reverse((_, t))| *t != w.target)
            .map(|Reverse((_, t))| *t)
            .collect();
        if !clashing.is_empty() {
            let mut columns: Vec<u32> = clashing.into_iter().collect();
            columns.push(w.target);
            columns.sort_unstable();
            columns.dedup();
            report.verdict = SidonVerdict::Violated {
                witness: w.m_lo.clone(),
                columns,
            };
            report.checked_resolution = j + 1;
            return Ok(report);
        }
        active.push(Reverse((w.m_hi.clone(), w.target)));
    }

    if zero_certified {
        return Ok(report);
    }

    // No certificate: enumerate the exit band if it is small enough.
    let band_size = &band_hi - &band_lo + 1u32;
    if band_size > Int::from(BAND_ENUM_CAP) {
        report.verdict = SidonVerdict::Inconclusive { band_lo, band_hi };
        return Ok(report);
    }
    let xj = CellSet::tower(c, j)?;
    let columns: Vec<CellSet> = (1..=params.cuts() as u32)
        .map(|col| CellSet::column(c, j, col))
        .collect::<Result<_>>()?;
    let mut m = band_lo.clone();
    while m <= band_hi {
        let total = image_measure(c, &m, &xj, &xj, resolution)?;
        if &total.unresolved_bound > tol {
            report.verdict = SidonVerdict::Inconclusive { band_lo, band_hi };
            report.max_unresolved = total.unresolved_bound;
            return Ok(report);
        }
        if total.unresolved_bound > report.max_unresolved {
            report.max_unresolved = total.unresolved_bound.clone();
        }
        let mut hit = Vec::new();
        for (i, col) in columns.iter().enumerate() {
            let est = image_measure(c, &m, &xj, col, resolution)?;
            if est.resolved.is_positive() {
                hit.push(i as u32 + 1);
            }
        }
        if hit.len() > 1 {
            report.verdict = SidonVerdict::Violated {
                witness: m,
                columns: hit,
            };
            return Ok(report);
        }
        m += 1u32;
    }
    Ok(report)
}

/// Cut-count rule for generated schedules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CutSchedule {
    Const(u32),
    LinearPlusOne,
}

impl CutSchedule {
    pub fn cuts(&self, j: u32) -> u32 {
        match self {
            CutSchedule::Const(n) => *n,
            CutSchedule::LinearPlusOne => j + 1,
        }
    }
}

/// One stage of the geometric spacer rule with growth factor `g`:
/// `s(1) = g * h * r + 1` and `s(i) = g * (h * r + s(1) + .. + s(i-1)) + 1`.
/// Each spacer count strictly dominates `g` times everything below it, which
/// separates all window displacements and certifies the next exit band.
pub fn generate_sidon_stage(h: &Int, cuts: u32, growth: u32) -> StageParams {
    let g = Int::from(growth);
    let mut acc = h * Int::from(cuts);
    let mut spacers = Vec::with_capacity(cuts as usize);
    for _ in 0..cuts {
        let s = &g * &acc + 1u32;
        acc += &s;
        spacers.push(s);
    }
    StageParams::new(spacers)
}

/// Builds a construction whose every stage follows the geometric spacer rule.
/// Stage `j` uses `schedule.cuts(j)` columns. Fails if `growth` is below the
/// floor of 3 or a tower height exceeds `bit_budget` bits; every stage except
/// the last is verified before returning.
pub fn generate_sidon_construction(
    base_height: Int,
    schedule: CutSchedule,
    growth: u32,
    stages: u32,
    bit_budget: u64,
) -> Result<Construction> {
    if growth < MIN_GROWTH {
        return Err(Error::GrowthTooSmall { growth });
    }
    if stages == 0 {
        return Err(Error::EmptyStageList);
    }
    if base_height < Int::one() {
        return Err(Error::NonPositiveHeight);
    }
    let mut h = base_height.clone();
    let mut params = Vec::with_capacity(stages as usize);
    for j in 1..=stages {
        let st = generate_sidon_stage(&h, schedule.cuts(j), growth);
        h = &h * Int::from(st.cuts()) + st.spacer_sum();
        if h.bits() > bit_budget {
            return Err(Error::StageBudgetExceeded { budget: bit_budget });
        }
        params.push(st);
    }
    let c = Construction::new(base_height, params)?;
    for j in 1..stages {
        let cert = verify_sidon_stage(&c, j, j + 1, &Rat::zero())?;
        assert!(
            cert.verdict.is_verified(),
            "geometric rule produced an unverifiable stage {j}"
        );
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WindowPeak {
    pub source: u32,
    pub target: u32,
    #[serde(with = "serde_int")]
    pub peak_m: Int,
    /// This pair's own contribution at its peak power.
    #[serde(with = "serde_rat")]
    pub peak_value: Rat,
}

/// Exact maxima of the self-overlap profile of a verified stage, for the
/// whole tower and for the tower-1 core, against the one-column bounds
/// `mu(X_j)/r_j` and `mu(X_1)/r_j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ColumnBoundReport {
    pub stage: u32,
    #[serde(with = "serde_rat")]
    pub bound: Rat,
    #[serde(with = "serde_rat")]
    pub max_value: Rat,
    #[serde(with = "serde_int")]
    pub max_at: Int,
    pub bound_holds: bool,
    pub peak_attains_bound: bool,
    pub window_peaks: Vec<WindowPeak>,
    #[serde(with = "serde_rat")]
    pub base_bound: Rat,
    #[serde(with = "serde_rat")]
    pub base_max_value: Rat,
    #[serde(with = "serde_int")]
    pub base_max_at: Int,
    pub base_bound_holds: bool,
    /// True when every reported value is exact rather than tol-resolved.
    pub exact: bool,
}

/// Profile maximum of a piecewise-linear sum of shifted-run overlaps.
/// `runs` are `(level, span, width)`; the value at `m` is
/// `sum max(0, min(a1+n1+m, a2+n2) - max(a1+m, a2)) * width`.
fn run_overlap_max(runs: &[(Int, Int, Rat)], range: (&Int, &Int)) -> (Rat, Int) {
    let mut candidates: BTreeSet<Int> = BTreeSet::new();
    candidates.insert(range.0.clone());
    candidates.insert(range.1.clone());
    for (a1, n1, _) in runs {
        for (a2, n2, _) in runs {
            let base = a2 - a1;
            for kink in [&base - n1, base.clone(), &base + n2 - n1, &base + n2] {
                if &kink >= range.0 && &kink <= range.1 {
                    candidates.insert(kink);
                }
            }
        }
    }
    let mut best = (Rat::zero(), range.0.clone());
    for m in candidates {
        let mut value = Rat::zero();
        for (a1, n1, w1) in runs {
            let end1 = a1 + n1 + &m;
            let start1 = a1 + &m;
            for (a2, n2, w2) in runs {
                let hi = end1.clone().min(a2 + n2);
                let lo = start1.clone().max(a2.clone());
                if lo < hi {
                    value += rat_int(&(hi - lo)) * w1.min(w2);
                }
            }
        }
        if value > best.0 {
            best = (value, m);
        }
    }
    best
}

pub fn column_bound_report(
    c: &Construction,
    j: u32,
    resolution: u32,
    tol: &Rat,
) -> Result<ColumnBoundReport> {
    let cert = verify_sidon_stage(c, j, resolution, tol)?;
    if !cert.verdict.is_verified() {
        return Err(Error::NotSidon { stage: j });
    }
    let params = c.stage_params(j)?;
    let r = rat_int(&Int::from(params.cuts()));
    let h = c.height(j);
    let w_next = c.width(j + 1);
    let range_lo = h + 1u32;
    let range_hi = c.height(j + 1).clone();

    let window_peaks: Vec<WindowPeak> = cert
        .windows
        .iter()
        .map(|w| {
            let peak_m = w.peak_m();
            let units = h - (&peak_m - &w.diff).abs();
            WindowPeak {
                source: w.source,
                target: w.target,
                peak_m,
                peak_value: rat_int(&units) * w_next,
            }
        })
        .collect();

    let mut candidates: BTreeSet<Int> = BTreeSet::new();
    candidates.insert(range_lo.clone());
    for w in &cert.windows {
        candidates.insert(w.m_lo.clone());
        candidates.insert(w.m_hi.clone());
        candidates.insert(w.peak_m());
    }
    let mut max_value = Rat::zero();
    let mut max_at = range_lo.clone();
    for m in &candidates {
        let v = window_overlap_value(c, j, m)?;
        if v > max_value {
            max_value = v;
            max_at = m.clone();
        }
    }

    let x1 = CellSet::tower(c, 1)?.refine_to(c, j + 1)?;
    let runs: Vec<(Int, Int, Rat)> = x1
        .cells()
        .iter()
        .map(|cl| (cl.level.clone(), cl.span.clone(), &cl.hi - &cl.lo))
        .collect();
    let (mut base_max_value, mut base_max_at) = run_overlap_max(&runs, (&range_lo, &range_hi));

    // Without a zero certificate the exit band carries engine-measured mass
    // that the window analytics cannot see; fold its maxima in.
    if !cert.band_zero_certified {
        let xj = CellSet::tower(c, j)?;
        let x1_set = CellSet::tower(c, 1)?;
        let mut m = cert.band_lo.clone();
        while m <= cert.band_hi {
            let est = image_measure(c, &m, &xj, &xj, resolution)?;
            if est.resolved > max_value {
                max_value = est.resolved.clone();
                max_at = m.clone();
            }
            let est1 = image_measure(c, &m, &x1_set, &x1_set, resolution)?;
            if est1.resolved > base_max_value {
                base_max_value = est1.resolved.clone();
                base_max_at = m.clone();
            }
            m += 1u32;
        }
    }

    let bound = c.tower_measure(j) / &r;
    let base_bound = c.tower_measure(1) / &r;
    Ok(ColumnBoundReport {
        stage: j,
        bound_holds: max_value <= bound,
        peak_attains_bound: max_value == bound,
        max_value,
        max_at,
        bound,
        window_peaks,
        base_bound_holds: base_max_value <= base_bound,
        base_max_value,
        base_max_at,
        base_bound,
        exact: cert.band_zero_certified || cert.max_unresolved.is_zero(),
    })
}

/// Deterministic power sampling: every power up to `exhaustive`, plus the
/// overlap windows of stages up to `window_stage_bound`, each window taken
/// whole when it has at most `per_window` members and otherwise represented
/// by its edges, its peak, and an even stride (`per_window` of 0 means no
/// cap).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SamplePlan {
    pub exhaustive: u64,
    pub window_stage_bound: u32,
    pub per_window: u64,
}

impl SamplePlan {
    pub fn new(exhaustive: u64, window_stage_bound: u32) -> Self {
        SamplePlan {
            exhaustive,
            window_stage_bound,
            per_window: 4096,
        }
    }

    pub fn powers(&self, c: &Construction) -> Result<Vec<Int>> {
        let mut set: BTreeSet<Int> = (1..=self.exhaustive).map(Int::from).collect();
        let bound = self.window_stage_bound.min(c.stage_count());
        for j in 1..=bound {
            for w in overlap_windows(c, j)? {
                set.extend(window_samples(&w, self.per_window));
            }
        }
        Ok(set.into_iter().collect())
    }
}

/// Deterministic sample powers from one overlap window: the whole window
/// when it has at most `per_window` values (or `per_window` is 0), else the
/// endpoints, the peak, and an even stride.
pub fn window_samples(w: &OverlapWindow, per_window: u64) -> Vec<Int> {
    let mut set = BTreeSet::new();
    let size = &w.m_hi - &w.m_lo + 1u32;
    if per_window == 0 || size <= Int::from(per_window) {
        let mut m = w.m_lo.clone();
        while m <= w.m_hi {
            set.insert(m.clone());
            m += 1u32;
        }
    } else {
        set.insert(w.peak_m());
        set.insert(w.m_lo.clone());
        set.insert(w.m_hi.clone());
        let steps = per_window.max(2) - 1;
        let span = &size - 1u32;
        for t in 0..=steps {
            let offset = (&span * Int::from(t)) / Int::from(steps);
            set.insert(&w.m_lo + offset);
        }
    }
    set.into_iter().collect()
}
