//! Channel selection: pick the candidate whose tightest conditional bound
//! on the current posterior is smallest.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::anneal::{anneal_max, grid_max, AnnealSchedule, Maximum};
use crate::array::{self, ArrayGeometry, ArrayMode, ChannelSelection};
use crate::bounds::{ecrb_from_context, wwb_with, BoundContext, EtaSource, PosteriorRepr, SignalModel, TestPoint};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, substream};

/// Test-point domain of the two-parameter search.
pub const S_RANGE: (f64, f64) = (0.1, 0.9);
pub const H_RANGE: (f64, f64) = (1e-4, 2.0);

/// Coarse grid fused with annealing: per axis for the (s, h) search, and
/// along h for the fixed-s searches.
pub const WWB_GRID_POINTS: usize = 16;
pub const H_GRID_POINTS: usize = 64;

/// Relative tolerance under which two candidate values count as tied.
pub const TIE_RTOL: f64 = 1e-12;

/// Which bound the controller minimises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundKind {
    /// Sup over both `s` and `h`.
    Wwb,
    /// `s = 0.5`, sup over `h`.
    WwbS05,
    /// Bobrovsky-Zakaï surrogate at `s = 0.95`, sup over `h`.
    Bzb,
    /// Expected Cramér-Rao bound, no test-point.
    Ecrb,
}

impl BoundKind {
    pub const ALL: [BoundKind; 4] = [BoundKind::Wwb, BoundKind::WwbS05, BoundKind::Bzb, BoundKind::Ecrb];

    /// The pinned `s` of the one-dimensional variants.
    pub fn fixed_s(self) -> Option<f64> {
        match self {
            BoundKind::WwbS05 => Some(0.5),
            BoundKind::Bzb => Some(0.95),
            BoundKind::Wwb | BoundKind::Ecrb => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BoundKind::Wwb => "wwb",
            BoundKind::WwbS05 => "wwb_s05",
            BoundKind::Bzb => "bzb",
            BoundKind::Ecrb => "ecrb",
        }
    }
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BoundKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BoundKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown bound `{s}` (expected wwb, wwb_s05, bzb or ecrb)")))
    }
}

/// Outcome of one controller step.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyDecision {
    pub selection: ChannelSelection,
    pub test_point: Option<TestPoint>,
    pub bound_value: f64,
    pub candidates_evaluated: usize,
}

fn combinations(pool: std::ops::RangeInclusive<usize>, k: usize) -> Vec<Vec<usize>> {
    let items: Vec<usize> = pool.collect();
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(k);
    fn rec(items: &[usize], k: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        let need = k - current.len();
        for i in 0..items.len() {
            if items.len() - i < need {
                break;
            }
            current.push(items[i]);
            rec(&items[i + 1..], k, current, out);
            current.pop();
        }
    }
    rec(&items, k, &mut current, &mut out);
    out
}

fn subsets(n: usize, k: usize, fix_first: bool) -> Vec<Vec<usize>> {
    if fix_first {
        combinations(2..=n, k - 1)
            .into_iter()
            .map(|rest| std::iter::once(1).chain(rest).collect())
            .collect()
    } else {
        combinations(1..=n, k)
    }
}

/// Every admissible selection in lexicographic `(tx, rx)` order. With
/// `fix_first`, Tx 1 and Rx 1 are always active.
pub fn enumerate_selections(
    n_rx: usize,
    n_tx: usize,
    i_rx: usize,
    i_tx: usize,
    fix_first: bool,
) -> Result<Vec<ChannelSelection>> {
    if i_rx == 0 || i_tx == 0 || i_rx > n_rx || i_tx > n_tx {
        return Err(Error::invalid(format!(
            "cannot choose {i_rx} of {n_rx} receivers and {i_tx} of {n_tx} transmitters"
        )));
    }
    let rx_sets = subsets(n_rx, i_rx, fix_first);
    let tx_sets = subsets(n_tx, i_tx, fix_first);
    tx_sets
        .iter()
        .flat_map(|tx| rx_sets.iter().map(move |rx| ChannelSelection::new(tx.clone(), rx.clone())))
        .collect()
}

/// Tightest bound of `kind` for one η supplier: annealing fused with a
/// coarse grid, keeping whichever is larger.
pub fn sup_bound<S: EtaSource + Sync>(src: &S, kind: BoundKind, sched: &AnnealSchedule) -> Result<(f64, TestPoint)> {
    let mut rng = substream(sched.rng_seed, &[]);
    let fuse = |a: Result<Maximum>, g: Result<Maximum>| -> Result<Maximum> {
        match (a, g) {
            (Ok(a), Ok(g)) => Ok(if a.value >= g.value { a } else { g }),
            (Ok(m), Err(_)) | (Err(_), Ok(m)) => Ok(m),
            (Err(e), Err(_)) => Err(e),
        }
    };
    match kind.fixed_s() {
        None => {
            let f = |x: &[f64]| wwb_with(src, x[0], x[1]).ok();
            let domain = [S_RANGE, H_RANGE];
            let best = fuse(
                anneal_max(f, &domain, sched, &mut rng),
                grid_max(f, &domain, WWB_GRID_POINTS),
            )?;
            Ok((best.value, TestPoint { s: best.point[0], h: best.point[1] }))
        }
        Some(s) => {
            let f = |x: &[f64]| wwb_with(src, s, x[0]).ok();
            let domain = [H_RANGE];
            let best = fuse(
                anneal_max(f, &domain, sched, &mut rng),
                grid_max(f, &domain, H_GRID_POINTS),
            )?;
            Ok((best.value, TestPoint { s, h: best.point[0] }))
        }
    }
}

/// Reported bound value of one candidate selection on `post`.
pub fn evaluate_candidate(
    sel: &ChannelSelection,
    post: &PosteriorRepr,
    geom: &ArrayGeometry,
    model: &SignalModel,
    kind: BoundKind,
    mode: ArrayMode,
    sched: &AnnealSchedule,
) -> Result<(f64, Option<TestPoint>)> {
    let positions = array::effective_positions(geom, sel, mode)?;
    let ctx = BoundContext::new(&positions, model, geom.wavelength(), post)?;
    match kind {
        BoundKind::Ecrb => Ok((ecrb_from_context(&ctx)?, None)),
        _ => sup_bound(&ctx, kind, sched).map(|(v, tp)| (v, Some(tp))),
    }
}

/// Per-candidate annealing seed, derived from the selection itself so the
/// result does not depend on candidate order.
fn candidate_schedule(sched: &AnnealSchedule, sel: &ChannelSelection) -> AnnealSchedule {
    let path: Vec<u64> = sel
        .tx_idx()
        .iter()
        .map(|&i| i as u64)
        .chain(std::iter::once(u64::MAX))
        .chain(sel.rx_idx().iter().map(|&i| i as u64))
        .collect();
    AnnealSchedule {
        rng_seed: derive_seed(sched.rng_seed, &path),
        ..*sched
    }
}

/// Argmin over candidates of the reported bound. Candidates without a valid
/// bound are dropped; ties (within [`TIE_RTOL`]) go to the lexicographically
/// smallest `(tx, rx)`.
pub fn select_policy(
    candidates: &[ChannelSelection],
    post: &PosteriorRepr,
    geom: &ArrayGeometry,
    model: &SignalModel,
    kind: BoundKind,
    mode: ArrayMode,
    sched: &AnnealSchedule,
) -> Result<PolicyDecision> {
    if candidates.is_empty() {
        return Err(Error::invalid("no candidate selections"));
    }
    let results: Vec<Result<(f64, Option<TestPoint>)>> = candidates
        .par_iter()
        .map(|sel| evaluate_candidate(sel, post, geom, model, kind, mode, &candidate_schedule(sched, sel)))
        .collect();

    let mut valid = Vec::with_capacity(candidates.len());
    for (sel, res) in candidates.iter().zip(results) {
        match res {
            Ok((v, tp)) => valid.push((sel, v, tp)),
            Err(Error::NoValidBound) => {}
            Err(e) => return Err(e),
        }
    }
    let min = valid.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    let (sel, value, tp) = valid
        .into_iter()
        .filter(|c| c.1 <= min + TIE_RTOL * min.abs())
        .min_by(|a, b| a.0.cmp(b.0))
        .ok_or(Error::NoPolicy)?;
    Ok(PolicyDecision {
        selection: sel.clone(),
        test_point: tp,
        bound_value: value,
        candidates_evaluated: candidates.len(),
    })
}
