//! Rotating complex eigenvalue pairs onto the real axis while keeping their
//! moduli.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{SynthesisBudget, SynthesisOutcome};
use crate::cocycle::{bound_of, PeriodicCocycle};
use crate::domination::induced;
use crate::error::{Error, Result};
use crate::linalg::{det2, product_2x2_dd, rotation, Mat};
use crate::path::{path_radius, CocyclePath, Segment, SegmentKind, DEFAULT_RADIUS_SAMPLES};
use crate::spectral::{strong_stable_dims, strong_unstable_dims, PeriodicSchur};
use crate::verification::Goals;

/// Relative discriminant aimed for at the crossing: large enough that the
/// double root is reliably real, small enough that moduli move < 1e−7.
const DISC_TARGET: f64 = 1e-16;
const GRID: usize = 256;
const RESTARTS: usize = 16;

/// Determinant-one form of a planar cocycle:
/// Â_n = λ_n · J_{n+1} A_n J_n⁻¹ with J_n ∈ {I, diag(1, −1)}.
#[derive(Debug, Clone)]
pub struct DetOneForm {
    pub cocycle: PeriodicCocycle,
    pub scalars: Vec<f64>,
    pub isometries: Vec<Mat>,
}

impl DetOneForm {
    /// sign of det J_n for each fiber
    fn flips(&self) -> Vec<f64> {
        self.isometries.iter().map(|j| j[(1, 1)]).collect()
    }
}

pub fn normalize_to_det_one(c: &PeriodicCocycle) -> Result<DetOneForm> {
    if c.dim() != 2 {
        return Err(Error::InvalidDim(c.dim()));
    }
    let p = c.period();
    let dets: Vec<f64> = c.maps().iter().map(det2).collect();
    if dets.iter().map(|d| d.signum()).product::<f64>() < 0.0 {
        return Err(Error::AlreadyRealizable);
    }
    let mut sigma = vec![1.0; p + 1];
    for n in 0..p {
        sigma[n + 1] = sigma[n] * dets[n].signum();
    }
    let iso = |s: f64| Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, s]);
    let isometries: Vec<Mat> = (0..p).map(|n| iso(sigma[n])).collect();
    let scalars: Vec<f64> = dets.iter().map(|d| 1.0 / d.abs().sqrt()).collect();
    let maps = (0..p)
        .map(|n| &isometries[(n + 1) % p] * c.map(n) * &isometries[n] * scalars[n])
        .collect();
    Ok(DetOneForm { cocycle: PeriodicCocycle::from_maps_unchecked(maps), scalars, isometries })
}

/// Discriminant of the first return of R(a·v_n)·A_n relative to 4·det.
fn relative_disc(maps: &[Mat], dirs: &[f64], a: f64) -> f64 {
    let factors: Vec<Mat> = maps.iter().zip(dirs).map(|(m, v)| rotation(a * v) * m).collect();
    let (m, e) = product_2x2_dd(&factors);
    let diff = m[0][0].add(m[1][1].neg());
    let disc = diff.mul(diff).add(m[0][1].mul(m[1][0]).mul_f(4.0)).value();
    let log_det: f64 = maps.iter().map(|m| det2(m).abs().ln()).sum();
    disc / (4.0 * (log_det - 2.0 * e as f64 * std::f64::consts::LN_2).exp())
}

fn bisect(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if f(mid) >= DISC_TARGET {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Golden-section maximization of f on [lo, hi], finished with a parabolic
/// vertex step so that tangential zeros are located to rounding level.
fn golden_max(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..60 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        }
    }
    let (mut x, mut fx) = if f1 > f2 { (x1, f1) } else { (x2, f2) };
    let mut h = (hi - lo).max(x.abs() * 1e-9);
    for _ in 0..4 {
        let (fl, fr) = (f(x - h), f(x + h));
        let curv = fl - 2.0 * fx + fr;
        if !(curv < 0.0) {
            break;
        }
        let cand = x + 0.5 * h * (fl - fr) / curv;
        let fc = f(cand);
        if fc >= fx {
            x = cand;
            fx = fc;
        }
        h *= 1e-3;
    }
    (x, fx)
}

/// How far below zero a tangential touch of the discriminant may stay.
const TANGENT_TOL: f64 = 1e-24;

/// Smallest |a| ≤ cap (either sign) at which the discriminant reaches the
/// target or touches zero, scanning a grid and refining. Also returns the
/// largest discriminant seen.
fn first_crossing(maps: &[Mat], dirs: &[f64], cap: f64) -> (Option<f64>, f64) {
    let f = |a: f64| relative_disc(maps, dirs, a);
    let mut best: Option<f64> = None;
    let mut largest = f(0.0);
    let offer = |hit: f64, best: &mut Option<f64>| {
        if best.map_or(true, |b| hit.abs() < b.abs()) {
            *best = Some(hit);
        }
    };
    for sign in [-1.0, 1.0] {
        let mut prev = (0.0, f(0.0));
        let mut before: Option<(f64, f64)> = None;
        for k in 1..=GRID {
            let a = sign * cap * k as f64 / GRID as f64;
            let d = f(a);
            largest = largest.max(d);
            if d >= DISC_TARGET {
                offer(bisect(&f, prev.0, a), &mut best);
                break;
            }
            if let Some(b) = before {
                if prev.1 > b.1 && prev.1 > d {
                    let (lo, hi) = if sign > 0.0 { (b.0, a) } else { (a, b.0) };
                    let (x, fx) = golden_max(&f, lo, hi);
                    largest = largest.max(fx);
                    if fx >= DISC_TARGET {
                        offer(bisect(&f, b.0, x), &mut best);
                        break;
                    }
                    if fx >= -TANGENT_TOL {
                        offer(x, &mut best);
                        break;
                    }
                }
            }
            before = Some(prev);
            prev = (a, d);
        }
    }
    (best, largest)
}

/// Per-step angles turning the complex pair of a determinant-one planar
/// cocycle into a real double eigenvalue, or None when already real.
fn realifying_angles(c: &PeriodicCocycle, cap: f64, seed: u64) -> Result<Option<Vec<f64>>> {
    let p = c.period();
    let maps = c.maps();
    let ones = vec![1.0; p];
    if relative_disc(maps, &ones, 0.0) >= 0.0 {
        return Ok(None);
    }
    let (hit, mut largest) = first_crossing(maps, &ones, cap);
    if let Some(a) = hit {
        return Ok(Some(vec![a; p]));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..RESTARTS {
        let mut dirs: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let top = dirs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        dirs.iter_mut().for_each(|v| *v /= top);
        let (hit, l) = first_crossing(maps, &dirs, cap);
        largest = largest.max(l);
        if let Some(a) = hit {
            return Ok(Some(dirs.iter().map(|v| a * v).collect()));
        }
    }
    Err(Error::PeriodTooShort(format!(
        "no rotation of size at most {cap} makes the eigenvalues real; relative discriminant deficit {:.3e}",
        -largest
    )))
}

fn check_det_one(c: &PeriodicCocycle) -> Result<()> {
    if c.dim() != 2 {
        return Err(Error::InvalidDim(c.dim()));
    }
    if let Some(n) = c.maps().iter().position(|m| (det2(m) - 1.0).abs() > 1e-9) {
        return Err(Error::InvalidArgument(format!("map {} has determinant {}", n + 1, det2(&c.maps()[n]))));
    }
    Ok(())
}

/// RotationRamp path on a determinant-one planar cocycle ending at a real
/// double eigenvalue; the constant path when the eigenvalues are real.
pub fn realify_2d(c: &PeriodicCocycle, epsilon: f64) -> Result<CocyclePath> {
    realify_2d_seeded(c, epsilon, 0)
}

pub fn realify_2d_seeded(c: &PeriodicCocycle, epsilon: f64, seed: u64) -> Result<CocyclePath> {
    check_det_one(c)?;
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument("epsilon must be positive".into()));
    }
    match realifying_angles(c, epsilon, seed)? {
        None => Ok(CocyclePath::constant(c)),
        Some(angles) => {
            let seg = Segment::new(SegmentKind::RotationRamp { angles }, c.clone(), None)?;
            CocyclePath::from_segments(c, vec![seg])
        }
    }
}

pub fn realify(c: &PeriodicCocycle, epsilon: f64) -> Result<SynthesisOutcome> {
    realify_with(c, &SynthesisBudget::new(epsilon)?)
}

/// Realify one complex block at a time, working in the periodic Schur frames
/// so that only that diagonal block of the triangular form moves.
pub fn realify_with(c: &PeriodicCocycle, budget: &SynthesisBudget) -> Result<SynthesisOutcome> {
    budget.check()?;
    let eps = budget.epsilon;
    let cap = eps / bound_of(c);
    let mut current = c.clone();
    let mut segments = Vec::new();
    let mut notes = Vec::new();
    let mut rounds = 0;
    loop {
        let schur = PeriodicSchur::new(&current)?;
        let Some(block) = schur.blocks.iter().find(|b| b.is_complex_pair()) else { break };
        rounds += 1;
        if rounds > budget.max_rounds.max(c.dim() / 2) {
            return Err(Error::NumericalFailure(format!("complex pairs remain after {} rounds", rounds - 1)));
        }
        let frames: Vec<Mat> = schur.q.iter().map(|q| q.columns(block.start, 2).into_owned()).collect();
        let core = induced(&current, &frames);
        let form = normalize_to_det_one(&core).map_err(|e| match e {
            Error::AlreadyRealizable => Error::IllConditionedGap("complex block with negative determinant".into()),
            other => other,
        })?;
        let angles = match realifying_angles(&form.cocycle, cap, budget.seed.wrapping_add(rounds as u64)) {
            Ok(Some(a)) => a,
            Ok(None) => {
                return Err(Error::IllConditionedGap(format!("block at position {} is numerically real", block.start + 1)))
            }
            Err(Error::PeriodTooShort(msg)) => {
                return Err(Error::PeriodTooShort(format!("2-plane at Schur position {}: {msg}", block.start + 1)))
            }
            Err(e) => return Err(e),
        };
        // J R(θ) J = R(−θ) for a reflection J
        let flips = form.flips();
        let p = c.period();
        let core_angles: Vec<f64> = (0..p).map(|n| flips[(n + 1) % p] * angles[n]).collect();
        notes.push(format!(
            "round {rounds}: 2-plane at Schur position {}, largest step angle {:.3e}",
            block.start + 1,
            core_angles.iter().fold(0.0f64, |m, a| m.max(a.abs()))
        ));
        let seg = Segment::new(SegmentKind::RotationRamp { angles: core_angles }, current.clone(), Some(frames))?;
        current = seg.end()?;
        segments.push(seg);
    }
    let path = CocyclePath::from_segments(c, segments)?;
    let radius = path_radius(&path, DEFAULT_RADIUS_SAMPLES)?;
    if radius.radius >= eps {
        return Err(Error::PeriodTooShort(format!("realifying path has radius {:.4e} ≥ {eps}", radius.radius)));
    }
    let mut goals = Goals::new(c.dim());
    goals.strong_stable = Some(strong_stable_dims(c)?);
    goals.strong_unstable = Some(strong_unstable_dims(c)?);
    goals.moduli_tol = Some(budget.tol("moduli", 1e-7));
    goals.radius = Some(eps);
    goals.terminal_real = true;
    SynthesisOutcome::assemble_measured(path, goals, budget.samples, notes, radius)
}
