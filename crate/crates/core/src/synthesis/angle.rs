//! Closing the angle between stable and unstable bundles by small rotations
//! whose effect on the eigenvalues is undone by a diagonal correction.

use super::{SynthesisBudget, SynthesisOutcome};
use crate::cocycle::{bound_of, PeriodicCocycle};
use crate::domination::{bdp_branch, is_split_dominated, BranchProblem};
use crate::error::{Error, Result};
use crate::linalg::{rotation, Mat};
use crate::path::{CocyclePath, Segment, SegmentKind};
use crate::planar::{planar_splitting, PlanarSplitting};
use crate::spectral::{spectrum_of, stable_unstable_splitting, strong_stable_bundle, strong_unstable_bundle, GAP_TOL};
use crate::verification::Goals;

/// Terminal angle aimed for, as a fraction of ε.
const TARGET_FRACTION: f64 = 0.5;
/// Per-step rotation, as a fraction of ε / C.
const STEP_FRACTION: f64 = 0.5;

fn goals_for(c: &PeriodicCocycle, budget: &SynthesisBudget) -> Goals {
    let mut g = Goals::new(c.dim());
    g.eigen_tol = Some(budget.tol("eigen", 1e-8));
    g.terminal_angle = Some(budget.epsilon);
    g
}

/// Current minimum angle of a saddle with real eigenvalues.
fn current_angle(c: &PeriodicCocycle) -> Result<f64> {
    if !spectrum_of(c)?.is_real() {
        return Err(Error::EigenvaluesNotReal);
    }
    Ok(stable_unstable_splitting(c)?.min_angle())
}

fn ensure_not_dominated(c: &PeriodicCocycle, n: usize) -> Result<usize> {
    let split = stable_unstable_splitting(c)?;
    let report = is_split_dominated(c, &split, n)?;
    if report.dominated {
        return Err(Error::StillDominated {
            achieved_angle: split.min_angle(),
            detail: format!("splitting is {n}-dominated (worst ratio {:.4e})", report.worst_ratio),
        });
    }
    Ok(report.worst_base)
}

fn rotated(maps: &[Mat], angles: &[f64]) -> Vec<Mat> {
    maps.iter().zip(angles).map(|(a, t)| rotation(*t) * a).collect()
}

/// Real, saddle, same eigenvalue signs as the original.
fn admissible(maps: &[Mat], angles: &[f64], signs: [f64; 2]) -> Option<PlanarSplitting> {
    match planar_splitting(&rotated(maps, angles)) {
        Ok(s) if s.signs == signs && s.log_moduli[0] < -GAP_TOL && s.log_moduli[1] > GAP_TOL => Some(s),
        _ => None,
    }
}

/// Rotations of size `step` at consecutive fibers from `start`, extended
/// until the angle drops below `target`; the last rotation is shortened by
/// bisection when the full step would leave the hyperbolic regime.
fn grow_window(maps: &[Mat], start: usize, step: f64, target: f64, signs: [f64; 2]) -> (Option<Vec<f64>>, f64) {
    let p = maps.len();
    let mut angles = vec![0.0; p];
    let mut best = f64::INFINITY;
    for k in 0..p {
        let idx = (start + k) % p;
        angles[idx] = step;
        match admissible(maps, &angles, signs) {
            Some(s) => {
                let a = s.min_angle();
                best = best.min(a);
                if a < target {
                    return (Some(angles), a);
                }
            }
            None => {
                let (mut lo, mut hi) = (0.0, step);
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    angles[idx] = mid;
                    match admissible(maps, &angles, signs) {
                        Some(s) => {
                            let a = s.min_angle();
                            best = best.min(a);
                            if a < target {
                                return (Some(angles), a);
                            }
                            lo = mid;
                        }
                        None => hi = mid,
                    }
                }
                return (None, best);
            }
        }
    }
    (None, best)
}

pub fn small_angle_2d(c: &PeriodicCocycle, epsilon: f64, n: usize) -> Result<SynthesisOutcome> {
    small_angle_2d_with(c, &SynthesisBudget::new(epsilon)?.with_n(n))
}

fn small_angle_2d_with(c: &PeriodicCocycle, budget: &SynthesisBudget) -> Result<SynthesisOutcome> {
    budget.check()?;
    if c.dim() != 2 {
        return Err(Error::InvalidDim(c.dim()));
    }
    let eps = budget.epsilon;
    let n = budget.n_hint;
    let initial = current_angle(c)?;
    let goals = goals_for(c, budget);
    let target = budget.tol("angle_target", TARGET_FRACTION) * eps;
    if initial < target {
        return SynthesisOutcome::assemble(CocyclePath::constant(c), goals, budget.samples, vec!["angle already small".into()]);
    }
    let worst_base = ensure_not_dominated(c, n)?;
    let base = planar_splitting(c.maps())?;
    let step = budget.tol("step", STEP_FRACTION) * eps / bound_of(c);
    let mut best: Option<(Vec<f64>, f64, usize)> = None;
    let mut closest = initial;
    for sign in [1.0, -1.0] {
        let (found, a) = grow_window(c.maps(), worst_base, sign * step, target, base.signs);
        closest = closest.min(a);
        if let Some(angles) = found {
            let used = angles.iter().filter(|x| **x != 0.0).count();
            if best.as_ref().map_or(true, |b| used < b.2) {
                best = Some((angles, a, used));
            }
        }
    }
    let Some((angles, reached, used)) = best else {
        return Err(Error::StillDominated {
            achieved_angle: closest,
            detail: format!("rotations of size {step:.3e} along the whole orbit reach angle {closest:.4e} only"),
        });
    };
    let seg = Segment::new(SegmentKind::RotateToward { angles }, c.clone(), None)?;
    let path = CocyclePath::from_segments(c, vec![seg])?;
    let notes = vec![format!(
        "{used} rotations of size ≤ {step:.3e} from fiber {}; angle {initial:.4e} → {reached:.4e}",
        worst_base + 1
    )];
    SynthesisOutcome::assemble(path, goals, budget.samples, notes)
}

pub fn small_angle(c: &PeriodicCocycle, epsilon: f64, n: usize) -> Result<SynthesisOutcome> {
    small_angle_with(c, &SynthesisBudget::new(epsilon)?.with_n(n))
}

fn lift(problem: &BranchProblem, c: &PeriodicCocycle, inner: &CocyclePath) -> Result<CocyclePath> {
    if inner.is_trivial() {
        return Ok(CocyclePath::constant(c));
    }
    let segments = inner
        .segments()
        .iter()
        .map(|s| s.lifted(&problem.cocycle, c, &problem.frames))
        .collect::<Result<Vec<_>>>()?;
    CocyclePath::from_segments(c, segments)
}

/// Reduce dimension through an invariant line F (strongest contracted inside
/// the stable bundle, or strongest expanded inside the unstable one) by
/// restricting to F plus the other bundle or passing to the quotient by F,
/// whichever is not N-dominated, and lift the lower-dimensional path.
pub fn small_angle_with(c: &PeriodicCocycle, budget: &SynthesisBudget) -> Result<SynthesisOutcome> {
    budget.check()?;
    if c.dim() == 2 {
        return small_angle_2d_with(c, budget);
    }
    if c.dim() < 2 {
        return Err(Error::InvalidDim(c.dim()));
    }
    let n = budget.n_hint;
    let initial = current_angle(c)?;
    let goals = goals_for(c, budget);
    if initial < budget.tol("angle_target", TARGET_FRACTION) * budget.epsilon {
        return SynthesisOutcome::assemble(CocyclePath::constant(c), goals, budget.samples, vec!["angle already small".into()]);
    }
    ensure_not_dominated(c, n)?;
    let split = stable_unstable_splitting(c)?;
    let line = if split.stable.dim_fiber >= 2 { strong_stable_bundle(c, 1)? } else { strong_unstable_bundle(c, 1)? };
    let decision = bdp_branch(c, &split.stable, &split.unstable, &line, n)?;
    let mut tried = Vec::new();
    let options = [
        ("restriction", decision.restriction_not_dominated, &decision.restriction),
        ("quotient", decision.quotient_not_dominated, &decision.quotient),
    ];
    for (name, open, problem) in options {
        if !open {
            tried.push(format!("{name} is {n}-dominated"));
            continue;
        }
        match small_angle_with(&problem.cocycle, budget) {
            Ok(inner) => {
                let path = lift(problem, c, &inner.path)?;
                let mut notes = vec![format!("dimension {}: {name} branch", c.dim())];
                notes.extend(inner.notes);
                return SynthesisOutcome::assemble(path, goals, budget.samples, notes);
            }
            Err(e @ (Error::StillDominated { .. } | Error::BranchExhausted(_))) => tried.push(format!("{name}: {e}")),
            Err(e) => return Err(e),
        }
    }
    Err(Error::BranchExhausted(format!("dimension {}: {}", c.dim(), tried.join("; "))))
}
