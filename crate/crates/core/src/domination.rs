//! N-domination tests, restricted and quotient cocycles, and the
//! restriction/quotient branching used by the small-angle induction.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cocycle::PeriodicCocycle;
use crate::error::{Error, Result};
use crate::linalg::{complement, orthonormalize, range_basis, singular_values, Mat};
use crate::spectral::{SaddleSplitting, Subbundle};

/// The constant in ‖A^N u‖ < c·‖A^N v‖.
pub const DOMINATION_CONSTANT: f64 = 0.5;

/// Fibers visited by the worst N-step window (0-based, `last` taken mod p).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub first: usize,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DominationReport {
    pub n_tested: usize,
    pub dominated: bool,
    pub worst_ratio: f64,
    pub worst_base: usize,
    pub worst_window: Window,
    pub constant: f64,
    /// ratio of the window starting at each base point
    pub ratios: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ReportDoc {
    v: u32,
    #[serde(rename = "N_tested")]
    n_tested: usize,
    dominated: bool,
    worst_ratio: f64,
    worst_base: usize,
    worst_window: String,
    constant: f64,
    ratios: Vec<f64>,
}

impl Serialize for DominationReport {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let p = self.ratios.len().max(1);
        let last = (self.worst_window.first + self.worst_window.steps) % p;
        ReportDoc {
            v: 1,
            n_tested: self.n_tested,
            dominated: self.dominated,
            worst_ratio: self.worst_ratio,
            worst_base: self.worst_base + 1,
            worst_window: format!("A_{}..A_{} from base {} to base {}", self.worst_window.first + 1, self.worst_window.first + self.worst_window.steps, self.worst_window.first + 1, last + 1),
            constant: self.constant,
            ratios: self.ratios.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DominationReport {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let doc = ReportDoc::deserialize(d)?;
        if doc.worst_base == 0 {
            return Err(D::Error::custom("bases are 1-based"));
        }
        Ok(DominationReport {
            n_tested: doc.n_tested,
            dominated: doc.dominated,
            worst_ratio: doc.worst_ratio,
            worst_base: doc.worst_base - 1,
            worst_window: Window { first: doc.worst_base - 1, steps: doc.n_tested },
            constant: doc.constant,
            ratios: doc.ratios,
        })
    }
}

fn check_pair(c: &PeriodicCocycle, e: &Subbundle, f: &Subbundle) -> Result<()> {
    for b in [e, f] {
        if b.frames.len() != c.period() || b.ambient_dim() != c.dim() {
            return Err(Error::ShapeMismatch("subbundle does not live on this cocycle".into()));
        }
        b.require_invariant()?;
    }
    if e.dim_fiber + f.dim_fiber != c.dim() || e.dim_fiber == 0 || f.dim_fiber == 0 {
        return Err(Error::InvalidArgument(format!(
            "dimensions {} + {} do not split R^{}",
            e.dim_fiber,
            f.dim_fiber,
            c.dim()
        )));
    }
    Ok(())
}

/// log σ_max(M E_x) − log σ_min(M F_x) for the N-step product M from fiber x.
fn window_log_ratio(c: &PeriodicCocycle, e: &Mat, f: &Mat, x: usize, n: usize) -> f64 {
    let mut xe = e.clone();
    let mut yf = f.clone();
    let mut log_e = 0.0;
    let mut log_f = 0.0;
    for k in 0..n {
        let a = c.map(x + k);
        xe = a * xe;
        yf = a * yf;
        let se = xe.amax();
        let sf = yf.amax();
        xe /= se;
        yf /= sf;
        log_e += se.ln();
        log_f += sf.ln();
    }
    let top = singular_values(&xe)[0];
    let bottom = *singular_values(&yf).last().unwrap();
    log_e + top.ln() - log_f - bottom.ln()
}

pub fn is_n_dominated(c: &PeriodicCocycle, e: &Subbundle, f: &Subbundle, n: usize) -> Result<DominationReport> {
    is_n_dominated_with(c, e, f, n, DOMINATION_CONSTANT)
}

pub fn is_n_dominated_with(
    c: &PeriodicCocycle,
    e: &Subbundle,
    f: &Subbundle,
    n: usize,
    constant: f64,
) -> Result<DominationReport> {
    if n == 0 {
        return Err(Error::InvalidArgument("N must be at least 1".into()));
    }
    if !(constant > 0.0) {
        return Err(Error::InvalidArgument("domination constant must be positive".into()));
    }
    check_pair(c, e, f)?;
    let ratios: Vec<f64> = (0..c.period())
        .into_par_iter()
        .map(|x| window_log_ratio(c, &e.frames[x], &f.frames[x], x, n).exp())
        .collect();
    let mut worst_base = 0;
    for (x, r) in ratios.iter().enumerate() {
        if *r > ratios[worst_base] {
            worst_base = x;
        }
    }
    let worst_ratio = ratios[worst_base];
    Ok(DominationReport {
        n_tested: n,
        dominated: worst_ratio < constant,
        worst_ratio,
        worst_base,
        worst_window: Window { first: worst_base, steps: n },
        constant,
        ratios,
    })
}

pub fn is_split_dominated(c: &PeriodicCocycle, split: &SaddleSplitting, n: usize) -> Result<DominationReport> {
    is_n_dominated(c, &split.stable, &split.unstable, n)
}

/// Least N ≤ n_max at which the splitting is N-dominated; each N is tested on its own.
pub fn minimal_domination_n(c: &PeriodicCocycle, e: &Subbundle, f: &Subbundle, n_max: usize) -> Result<Option<usize>> {
    if n_max == 0 {
        return Err(Error::InvalidArgument("N_max must be at least 1".into()));
    }
    for n in 1..=n_max {
        if is_n_dominated(c, e, f, n)?.dominated {
            return Ok(Some(n));
        }
    }
    Ok(None)
}

/// Cocycle induced on an invariant subbundle, written in its frames.
pub fn restrict_cocycle(c: &PeriodicCocycle, h: &Subbundle) -> Result<PeriodicCocycle> {
    h.require_invariant()?;
    Ok(induced(c, &h.frames))
}

pub fn quotient_frames(f: &Subbundle) -> Vec<Mat> {
    f.frames.iter().map(complement).collect()
}

/// Cocycle induced on R^d / F, realized on the orthogonal complements of F.
pub fn quotient_cocycle(c: &PeriodicCocycle, f: &Subbundle) -> Result<PeriodicCocycle> {
    f.require_invariant()?;
    if f.dim_fiber >= c.dim() {
        return Err(Error::InvalidArgument("quotient by the whole space".into()));
    }
    Ok(induced(c, &quotient_frames(f)))
}

/// Φ_{n+1}ᵀ A_n Φ_n for per-fiber orthonormal frames Φ.
pub(crate) fn induced(c: &PeriodicCocycle, frames: &[Mat]) -> PeriodicCocycle {
    let p = c.period();
    let maps = (0..p).map(|n| frames[(n + 1) % p].transpose() * c.map(n) * &frames[n]).collect();
    PeriodicCocycle::from_maps_unchecked(maps)
}

/// Which member of the splitting contains H.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    First,
    Second,
}

/// Sub-problem produced by one branch: the induced cocycle, the frames that
/// embed it, and its own splitting.
#[derive(Debug, Clone)]
pub struct BranchProblem {
    pub cocycle: PeriodicCocycle,
    pub frames: Vec<Mat>,
    pub first: Subbundle,
    pub second: Subbundle,
}

#[derive(Debug, Clone)]
pub struct BranchDecision {
    pub side: Side,
    pub restriction_not_dominated: bool,
    pub quotient_not_dominated: bool,
    pub restriction_report: DominationReport,
    pub quotient_report: DominationReport,
    pub restriction: BranchProblem,
    pub quotient: BranchProblem,
}

fn containment(outer: &Subbundle, inner: &Subbundle) -> f64 {
    outer
        .frames
        .iter()
        .zip(&inner.frames)
        .map(|(o, i)| (i - o * (o.transpose() * i)).amax())
        .fold(0.0, f64::max)
}

/// Evaluate both alternatives for H inside one member of the splitting (F, G):
/// restriction to H ⊕ G (resp. F ⊕ H) and the quotient by H.
pub fn bdp_branch(
    c: &PeriodicCocycle,
    f: &Subbundle,
    g: &Subbundle,
    h: &Subbundle,
    n: usize,
) -> Result<BranchDecision> {
    h.require_invariant()?;
    check_pair(c, f, g)?;
    let side = if containment(f, h) < 1e-7 {
        Side::First
    } else if containment(g, h) < 1e-7 {
        Side::Second
    } else {
        return Err(Error::InvalidArgument("H lies in neither member of the splitting".into()));
    };
    let (big, other) = match side {
        Side::First => (f, g),
        Side::Second => (g, f),
    };
    if h.dim_fiber == 0 || h.dim_fiber >= big.dim_fiber {
        return Err(Error::InvalidArgument("H must be a proper nonzero subbundle".into()));
    }
    let p = c.period();

    // restriction to H ⊕ other
    let w: Vec<Mat> = (0..p)
        .map(|x| {
            let (a, b) = match side {
                Side::First => (&h.frames[x], &other.frames[x]),
                Side::Second => (&other.frames[x], &h.frames[x]),
            };
            let mut m = Mat::zeros(c.dim(), a.ncols() + b.ncols());
            m.view_mut((0, 0), (c.dim(), a.ncols())).copy_from(a);
            m.view_mut((0, a.ncols()), (c.dim(), b.ncols())).copy_from(b);
            orthonormalize(&m)
        })
        .collect();
    let rc = induced(c, &w);
    let (ra, rb) = match side {
        Side::First => (h, other),
        Side::Second => (other, h),
    };
    let r1 = Subbundle::new(&rc, (0..p).map(|x| w[x].transpose() * &ra.frames[x]).collect())?;
    let r2 = Subbundle::new(&rc, (0..p).map(|x| w[x].transpose() * &rb.frames[x]).collect())?;
    let restriction_report = is_n_dominated(&rc, &r1, &r2, n)?;

    // quotient by H
    let k = quotient_frames(h);
    let qc = induced(c, &k);
    let proj = |b: &Subbundle, r: usize| -> Vec<Mat> { (0..p).map(|x| range_basis(&(k[x].transpose() * &b.frames[x]), r)).collect() };
    let (q1, q2) = match side {
        Side::First => (proj(f, f.dim_fiber - h.dim_fiber), proj(g, g.dim_fiber)),
        Side::Second => (proj(f, f.dim_fiber), proj(g, g.dim_fiber - h.dim_fiber)),
    };
    let q1 = Subbundle::new(&qc, q1)?;
    let q2 = Subbundle::new(&qc, q2)?;
    let quotient_report = is_n_dominated(&qc, &q1, &q2, n)?;

    Ok(BranchDecision {
        side,
        restriction_not_dominated: !restriction_report.dominated,
        quotient_not_dominated: !quotient_report.dominated,
        restriction_report,
        quotient_report,
        restriction: BranchProblem { cocycle: rc, frames: w, first: r1, second: r2 },
        quotient: BranchProblem { cocycle: qc, frames: k, first: q1, second: q2 },
    })
}
