//! realify → separate repeated moduli → push moduli → small angle.

use super::{push_moduli_with, realify_with, small_angle_with, SynthesisBudget, SynthesisOutcome};
use crate::cocycle::PeriodicCocycle;
use crate::domination::induced;
use crate::error::{Error, Result};
use crate::linalg::{Mat, RealSchur};
use crate::path::{concat_paths, CocyclePath, Segment, SegmentKind};
use crate::spectral::PeriodicSchur;
use crate::verification::{Certificate, Goals};

/// Relative size of the separating factors, per unit of ε / d.
const SEPARATION: f64 = 1e-4;

fn scaled_product(maps: &[Mat]) -> Mat {
    let k = maps[0].nrows();
    let mut b = Mat::identity(k, k);
    for a in maps {
        b = a * b;
        let s = b.amax();
        if s > 0.0 {
            b /= s;
        }
    }
    b
}

/// Multiply one eigen-line of every repeated-modulus cluster by a factor
/// (1 + k·10⁻⁴·ε/d) over the period, k counting rounds, in a single
/// LinearBlend segment per round.
pub fn separate_moduli(c: &PeriodicCocycle, budget: &SynthesisBudget) -> Result<SynthesisOutcome> {
    budget.check()?;
    let d = c.dim();
    let p = c.period();
    let eta = SEPARATION * budget.epsilon / d as f64;
    let mut current = c.clone();
    let mut segments = Vec::new();
    let mut notes = Vec::new();
    for round in 1..=d {
        let schur = PeriodicSchur::new(&current)?;
        let clusters: Vec<_> = schur.blocks.iter().filter(|b| b.size >= 2).collect();
        if clusters.is_empty() {
            break;
        }
        if clusters.iter().any(|b| b.is_complex_pair()) {
            return Err(Error::EigenvaluesNotReal);
        }
        let factor = (1.0 + round as f64 * eta).powf(1.0 / p as f64);
        let mut target: Vec<Mat> = current.maps().to_vec();
        for block in &clusters {
            let frames: Vec<Mat> = schur.q.iter().map(|q| q.columns(block.start, block.size).into_owned()).collect();
            let core = induced(&current, &frames);
            let lead = RealSchur::new(&scaled_product(core.maps()))?;
            let mut v = lead.q.column(0).into_owned();
            for n in 0..p {
                let line = &frames[n] * &v;
                // A ↦ A (I + (f − 1) ℓℓᵀ) scales the line's diagonal entry
                let scaled = &target[n] * &line * line.transpose() * (factor - 1.0);
                target[n] += scaled;
                v = &core.maps()[n] * v;
                v /= v.norm();
            }
            notes.push(format!("round {round}: cluster at Schur position {} of size {}", block.start + 1, block.size));
        }
        let seg = Segment::new(SegmentKind::LinearBlend { target }, current.clone(), None)?;
        current = seg.end()?;
        segments.push(seg);
    }
    let path = CocyclePath::from_segments(c, segments)?;
    let mut goals = Goals::new(d);
    goals.radius = Some(SEPARATION * budget.epsilon);
    goals.moduli_tol = None;
    SynthesisOutcome::assemble(path, goals, budget.samples, notes)
}

/// A stage failed; `partial` holds the path built by the earlier stages.
#[derive(Debug, Clone)]
pub struct PipelineFailure {
    pub stage: String,
    pub error: Error,
    pub partial: CocyclePath,
    pub stages: Vec<(String, SynthesisOutcome)>,
}

impl std::fmt::Display for PipelineFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "stage {}: {}", self.stage, self.error)
    }
}

fn prefixed(stage: &str, certs: &[Certificate]) -> Vec<Certificate> {
    certs
        .iter()
        .map(|c| Certificate { name: format!("{stage}/{}", c.name), ..c.clone() })
        .collect()
}

type StageFn = fn(&PeriodicCocycle, &SynthesisBudget) -> Result<SynthesisOutcome>;

pub fn pipeline_small_angle(c: &PeriodicCocycle, budget: &SynthesisBudget) -> std::result::Result<SynthesisOutcome, Box<PipelineFailure>> {
    let stages: [(&str, StageFn); 4] = [
        ("realify", realify_with),
        ("separate", separate_moduli),
        ("push", push_moduli_with),
        ("small_angle", small_angle_with),
    ];
    let mut path = CocyclePath::constant(c);
    let mut current = c.clone();
    let mut done: Vec<(String, SynthesisOutcome)> = Vec::new();
    let fail = |stage: &str, error: Error, path: &CocyclePath, done: &[(String, SynthesisOutcome)]| {
        Box::new(PipelineFailure {
            stage: stage.to_string(),
            error: error.at_stage(stage),
            partial: path.clone(),
            stages: done.to_vec(),
        })
    };
    for (name, run) in stages {
        let outcome = run(&current, budget).map_err(|e| fail(name, e, &path, &done))?;
        path = concat_paths(&path, &outcome.path).map_err(|e| fail(name, e, &path, &done))?;
        current = outcome.end().map_err(|e| fail(name, e, &path, &done))?;
        done.push((name.to_string(), outcome));
    }
    let eps = budget.epsilon;
    let mut goals = Goals::new(c.dim());
    goals.radius = Some(4.0 * eps);
    goals.terminal_real = true;
    goals.terminal_extreme = Some(eps);
    goals.terminal_angle = Some(eps);
    let mut notes = Vec::new();
    let mut stage_certs = Vec::new();
    let mut radius_sum = 0.0;
    for (name, o) in &done {
        radius_sum += o.radius_report.radius;
        notes.push(format!("{name}: radius {:.4e}", o.radius_report.radius));
        notes.extend(o.notes.iter().map(|n| format!("{name}: {n}")));
        stage_certs.extend(prefixed(name, &o.certificates));
    }
    let mut outcome =
        SynthesisOutcome::assemble(path, goals, budget.samples, notes).map_err(|e| fail("verify", e, &CocyclePath::constant(c), &done))?;
    outcome.notes.push(format!("sum of stage radii {radius_sum:.4e}, total radius {:.4e}", outcome.radius_report.radius));
    stage_certs.append(&mut outcome.certificates);
    outcome.certificates = stage_certs;
    Ok(outcome)
}
