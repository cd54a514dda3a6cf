//! Scaling the stable and unstable bundles so every modulus becomes extreme.

use super::{SynthesisBudget, SynthesisOutcome};
use crate::cocycle::{bound_of, PeriodicCocycle};
use crate::error::{Error, Result};
use crate::path::{path_radius, CocyclePath, Segment, SegmentKind, DEFAULT_RADIUS_SAMPLES};
use crate::spectral::{spectrum_of, strong_stable_bundle, strong_unstable_bundle, GAP_TOL};
use crate::verification::Goals;

const DISTINCT_GAP: f64 = 1e-6;
const DEFAULT_RHO: f64 = 0.99;

/// Bound on the radius of the two scaling phases for period p.
fn predicted_radius(bound: f64, log_down: f64, log_up: f64, p: usize) -> f64 {
    let p = p as f64;
    bound * ((-log_down / p).exp_m1() + (log_up / p).exp_m1())
}

/// Least period for which the predicted radius drops below ε.
fn least_period(bound: f64, log_down: f64, log_up: f64, eps: f64) -> usize {
    let mut hi = 1usize;
    while predicted_radius(bound, log_down, log_up, hi) >= eps {
        hi *= 2;
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if predicted_radius(bound, log_down, log_up, mid) >= eps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

pub fn push_moduli(c: &PeriodicCocycle, epsilon: f64) -> Result<SynthesisOutcome> {
    push_moduli_with(c, &SynthesisBudget::new(epsilon)?)
}

/// Stable bundle scaled by t^{1/p} per step until its largest modulus is
/// below ε, then the unstable bundle of the result scaled up until its
/// smallest modulus exceeds 1/ε.
pub fn push_moduli_with(c: &PeriodicCocycle, budget: &SynthesisBudget) -> Result<SynthesisOutcome> {
    budget.check()?;
    let eps = budget.epsilon;
    let spec = spectrum_of(c)?;
    let s = spec.log_moduli.iter().filter(|l| **l < 0.0).count();
    let d = c.dim();
    if s == 0 || s == d || spec.log_moduli.iter().any(|l| l.abs() <= GAP_TOL) {
        return Err(Error::NotSaddle(format!("moduli {:?}", spec.moduli)));
    }
    let gap = spec.min_relative_gap();
    if gap <= budget.tol("distinct", DISTINCT_GAP) {
        return Err(Error::ModuliNotDistinct(format!("smallest relative gap {gap:.3e}")));
    }
    let rho = budget.tol("rho", DEFAULT_RHO);
    let log_eps = eps.ln();
    let lm_s = spec.log_moduli[s - 1];
    let lm_u = spec.log_moduli[s];
    let log_down = if lm_s < log_eps { 0.0 } else { (rho * eps).ln() - lm_s };
    let log_up = if lm_u > -log_eps { 0.0 } else { -(rho * eps).ln() - lm_u };
    let mut goals = Goals::new(d);
    goals.moduli_separated = true;
    goals.radius = Some(eps);
    goals.terminal_extreme = Some(eps);
    if log_down == 0.0 && log_up == 0.0 {
        return SynthesisOutcome::assemble(CocyclePath::constant(c), goals, budget.samples, vec!["moduli already extreme".into()]);
    }
    let p = c.period();
    let bound = bound_of(c);
    let predicted = predicted_radius(bound, log_down, log_up, p);
    if predicted >= eps {
        let need = least_period(bound, log_down, log_up, eps);
        return Err(Error::PeriodTooShort(format!(
            "scaling radius bound {predicted:.4e} ≥ {eps}; needs period at least {need}, have {p}"
        )));
    }
    let mut notes = vec![format!("predicted radius {predicted:.4e}")];
    let mut segments = Vec::new();
    let mut current = c.clone();
    if log_down != 0.0 {
        let es = strong_stable_bundle(c, s)?;
        let seg = Segment::new(SegmentKind::BlockScaleRamp { log_rate: log_down / p as f64 }, c.clone(), Some(es.frames))?;
        current = seg.end()?;
        notes.push(format!("stable phase: moduli multiplied by {:.6e}", log_down.exp()));
        segments.push(seg);
    }
    if log_up != 0.0 {
        let eu = strong_unstable_bundle(&current, d - s)?;
        let seg = Segment::new(SegmentKind::BlockScaleRamp { log_rate: log_up / p as f64 }, current.clone(), Some(eu.frames))?;
        notes.push(format!("unstable phase: moduli multiplied by {:.6e}", log_up.exp()));
        segments.push(seg);
    }
    let path = CocyclePath::from_segments(c, segments)?;
    let radius = path_radius(&path, DEFAULT_RADIUS_SAMPLES)?;
    if radius.radius >= eps {
        return Err(Error::PeriodTooShort(format!("measured radius {:.4e} ≥ {eps}", radius.radius)));
    }
    SynthesisOutcome::assemble_measured(path, goals, budget.samples, notes, radius)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{generate, GeneratorKind, GeneratorSpec};
    use crate::linalg::Mat;
    use crate::path::sample_path;

    fn diag(v: &[f64]) -> Mat {
        Mat::from_diagonal(&nalgebra::DVector::from_column_slice(v))
    }

    #[test]
    fn diagonal_closed_form() {
        let p = 1000;
        let c = PeriodicCocycle::constant(diag(&[0.5f64.powf(1.0 / p as f64), 2f64.powf(1.0 / p as f64)]), p).unwrap();
        let o = push_moduli(&c, 0.1).unwrap();
        assert!(o.passed(), "{:?}", o.certificates);
        let end = spectrum_of(&o.end().unwrap()).unwrap();
        // stable modulus 1/2 scaled by t_end = 0.099 / 0.5
        assert!((end.moduli[0] - 0.099).abs() < 1e-12);
        assert!((end.moduli[1] - 1.0 / 0.099).abs() < 1e-9);
        assert!(o.radius_report.radius < 0.1);
    }

    #[test]
    fn extreme_input_is_trivial() {
        let c = PeriodicCocycle::constant(diag(&[0.01, 100.0]), 1).unwrap();
        let o = push_moduli(&c, 0.1).unwrap();
        assert!(o.path.is_trivial());
        assert!(o.passed());
    }

    #[test]
    fn errors() {
        let c = PeriodicCocycle::constant(diag(&[0.5, 0.8]), 3).unwrap();
        assert!(matches!(push_moduli(&c, 0.1), Err(Error::NotSaddle(_))));
        let c = PeriodicCocycle::constant(diag(&[0.5, 0.5, 2.0]), 3).unwrap();
        assert!(matches!(push_moduli(&c, 0.1), Err(Error::ModuliNotDistinct(_))));
        let c = PeriodicCocycle::constant(diag(&[0.5, 2.0]), 3).unwrap();
        match push_moduli(&c, 0.1) {
            Err(Error::PeriodTooShort(msg)) => assert!(msg.contains("needs period")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn stable_phase_scales_uniformly() {
        let spec = GeneratorSpec::new(GeneratorKind::PrescribedModuli, 3, 500, 2.0, 12).with_moduli(vec![0.4, 0.7, 2.5]);
        let c = generate(&spec).unwrap();
        let o = push_moduli(&c, 0.1).unwrap();
        assert!(o.passed(), "{:?}", o.certificates);
        let start = spectrum_of(&c).unwrap();
        let mid_t = o.path.segments()[0].t1;
        let mid = spectrum_of(&sample_path(&o.path, mid_t).unwrap()).unwrap();
        let ratio0 = mid.moduli[0] / start.moduli[0];
        let ratio1 = mid.moduli[1] / start.moduli[1];
        assert!((ratio0 / ratio1 - 1.0).abs() < 1e-8);
        assert!((0.099 / 0.7 - ratio0).abs() < 1e-8 * ratio0);
        assert!((mid.moduli[2] / start.moduli[2] - 1.0).abs() < 1e-8);
    }
}
