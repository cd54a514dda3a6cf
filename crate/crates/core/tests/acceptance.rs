//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

use std::collections::BTreeSet;
use std::io::Write;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cocycle_lab::connection::{
    build_glued, concatenate_maps, connection_size, homothety_conjugate, size_inequality_check, strong_stable_defect,
    strong_stable_membership, GluedMap, LayeredMap, Profile,
};
use cocycle_lab::domination::is_n_dominated;
use cocycle_lab::generate::{generate, GeneratorKind, GeneratorSpec};
use cocycle_lab::linalg::{orthonormalize, Mat};
use cocycle_lab::path::{path_radius, sample_path, CocyclePath};
use cocycle_lab::spectral::{min_angle, spectrum_of, stable_unstable_splitting, strong_stable_dims, strong_unstable_dims};
use cocycle_lab::synthesis::{push_moduli, realify, realify_2d, small_angle, SynthesisOutcome};
use cocycle_lab::verification::check_flag_persistence;
use cocycle_lab::{dist_cocycle, Error, PeriodicCocycle};

/// Written straight to the process stdout so the line shows without --nocapture.
fn report(criterion: &str, passed: bool, detail: &str) {
    let line = format!("[acceptance] criterion {criterion}: {} | {detail}\n", if passed { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
}

fn finish(criterion: &str, failures: &[String], detail: &str) {
    let passed = failures.is_empty();
    let detail = if passed { detail.to_string() } else { format!("{detail}; first failures: {:?}", &failures[..failures.len().min(3)]) };
    report(criterion, passed, &detail);
    assert!(passed, "criterion {criterion}: {} failures: {:?}", failures.len(), failures);
}

fn uniform_times(k: usize) -> Vec<f64> {
    (0..k).map(|i| i as f64 / (k - 1) as f64).collect()
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn random_orthogonal(d: usize, rng: &mut ChaCha8Rng) -> Mat {
    orthonormalize(&Mat::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0)))
}

fn random_unit_in(frame: &Mat, rng: &mut ChaCha8Rng) -> DVector<f64> {
    loop {
        let w = DVector::from_fn(frame.ncols(), |_, _| rng.gen_range(-1.0..1.0));
        if w.norm() > 1e-3 {
            let v = frame * w;
            return &v / v.norm();
        }
    }
}

// ---------------------------------------------------------------- criterion 1

#[test]
fn criterion_1_domination_oracle() {
    const SAMPLES: usize = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut failures = Vec::new();
    let (mut built, mut dominated, mut near_threshold) = (0, 0, 0);
    let mut seed = 0u64;
    while built < 200 {
        seed += 1;
        let d = rng.gen_range(2..=4);
        let p = rng.gen_range(1..=8);
        let n = rng.gen_range(1..=5);
        let bound = rng.gen_range(1.3..4.0);
        let Ok(c) = generate(&GeneratorSpec::new(GeneratorKind::Saddle, d, p, bound, seed)) else { continue };
        let Ok(split) = stable_unstable_splitting(&c) else { continue };
        let report = is_n_dominated(&c, &split.stable, &split.unstable, n).unwrap();
        built += 1;
        if report.dominated {
            dominated += 1;
        }
        // brute force: N-step product from every base point on sampled unit vectors
        let mut brute = 0.0f64;
        for base in 0..p {
            let mut m = Mat::identity(d, d);
            for k in 0..n {
                m = c.map((base + k) % p) * m;
            }
            let mut top = 0.0f64;
            let mut bottom = f64::INFINITY;
            for _ in 0..SAMPLES {
                let u = random_unit_in(&split.stable.frames[base], &mut rng);
                let v = random_unit_in(&split.unstable.frames[base], &mut rng);
                top = top.max((&m * u).norm());
                bottom = bottom.min((&m * v).norm());
            }
            let sampled = top / bottom;
            brute = brute.max(sampled);
            if sampled > report.ratios[base] * (1.0 + 1e-6) + 1e-6 {
                failures.push(format!("seed {seed} base {base}: sampled {sampled:.6e} above exact {:.6e}", report.ratios[base]));
            }
        }
        let brute_dominated = brute < 0.5;
        if brute_dominated != report.dominated {
            // sampling can only underestimate the supremum
            let explained = !report.dominated && report.worst_ratio - brute <= 1e-2 * report.worst_ratio;
            if explained {
                near_threshold += 1;
            } else {
                failures.push(format!("seed {seed}: verdict {} but sampled ratio {brute:.6e}", report.dominated));
            }
        }
    }
    finish(
        "1",
        &failures,
        &format!("{built} instances, {dominated} dominated, {near_threshold} within sampling resolution of 1/2, {SAMPLES} samples per bundle and base"),
    );
}

// ---------------------------------------------------------------- criteria 2, 3, 6

fn det_one_cases() -> &'static Vec<PeriodicCocycle> {
    static CASES: OnceLock<Vec<PeriodicCocycle>> = OnceLock::new();
    CASES.get_or_init(|| (0..50).map(|s| generate(&GeneratorSpec::new(GeneratorKind::DetOne2d, 2, 200, 2.0, 1000 + s)).unwrap()).collect())
}

/// Rotation block of modulus one next to a real block, conjugated by
/// frames close to the identity.
fn block_case(seed: u64) -> PeriodicCocycle {
    let p = 200;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frames: Vec<Mat> = (0..p).map(|_| Mat::identity(4, 4) + Mat::from_fn(4, 4, |_, _| 0.1 * rng.gen_range(-1.0..1.0))).collect();
    let (lo, hi) = (rng.gen_range(0.2..0.5f64), rng.gen_range(2.0..4.0f64));
    let maps = (0..p)
        .map(|n| {
            let th: f64 = rng.gen_range(-1.0..1.0);
            let mut m = Mat::zeros(4, 4);
            m[(0, 0)] = th.cos();
            m[(0, 1)] = -th.sin();
            m[(1, 0)] = th.sin();
            m[(1, 1)] = th.cos();
            m[(2, 2)] = lo.powf(1.0 / p as f64);
            m[(3, 3)] = hi.powf(1.0 / p as f64);
            m[(2, 3)] = 0.05 * rng.gen_range(-1.0..1.0);
            &frames[(n + 1) % p] * m * frames[n].clone().try_inverse().unwrap()
        })
        .collect();
    PeriodicCocycle::new(maps).unwrap()
}

fn block_cases() -> &'static Vec<PeriodicCocycle> {
    static CASES: OnceLock<Vec<PeriodicCocycle>> = OnceLock::new();
    CASES.get_or_init(|| (0..20).map(|s| block_case(2000 + s)).collect())
}

fn first_return_disc(c: &PeriodicCocycle) -> f64 {
    let m = c.first_return(0).unwrap();
    let tr = m[(0, 0)] + m[(1, 1)];
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    tr * tr - 4.0 * det
}

#[test]
fn criterion_2_realification() {
    let mut failures = Vec::new();
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    for (k, c) in det_one_cases().iter().enumerate() {
        let path = match realify_2d(c, 0.1) {
            Ok(p) => p,
            Err(e) => {
                failures.push(format!("case {k}: {e}"));
                continue;
            }
        };
        let end = path.end().unwrap();
        let disc = first_return_disc(&end).abs();
        let start = spectrum_of(c).unwrap();
        let mut moduli_dev = 0.0f64;
        for t in uniform_times(100) {
            let s = spectrum_of(&sample_path(&path, t).unwrap()).unwrap();
            for (a, b) in s.moduli.iter().zip(&start.moduli) {
                moduli_dev = moduli_dev.max(rel_err(*a, *b));
            }
        }
        let radius = path_radius(&path, 257).unwrap().radius;
        worst = (worst.0.max(disc), worst.1.max(moduli_dev), worst.2.max(radius));
        if !(disc < 1e-9 && moduli_dev <= 1e-7 && radius < 0.1) {
            failures.push(format!("case {k}: disc {disc:.3e}, moduli {moduli_dev:.3e}, radius {radius:.3e}"));
        }
    }
    finish(
        "2",
        &failures,
        &format!("50 cases; max |tr²−4det| {:.3e}, max moduli change {:.3e}, max radius {:.4e}", worst.0, worst.1, worst.2),
    );
}

#[test]
fn criterion_3_block_isolation() {
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    for (k, c) in block_cases().iter().enumerate() {
        let start = spectrum_of(c).unwrap();
        if start.is_real() {
            failures.push(format!("case {k}: no complex pair to work on"));
            continue;
        }
        // real eigenvalues away from the rotation plane sit at both ends
        let outside = [start.eigenvalues[0].re, start.eigenvalues[3].re];
        let o = match realify(c, 0.1) {
            Ok(o) => o,
            Err(e) => {
                failures.push(format!("case {k}: {e}"));
                continue;
            }
        };
        for t in uniform_times(100) {
            let s = spectrum_of(&sample_path(&o.path, t).unwrap()).unwrap();
            for x in outside {
                let near = s.eigenvalues.iter().map(|z| (z - x).norm() / x.abs()).fold(f64::INFINITY, f64::min);
                worst = worst.max(near);
                if near > 1e-10 {
                    failures.push(format!("case {k} t={t}: eigenvalue {x} moved by {near:.3e}"));
                }
            }
        }
        if !spectrum_of(&o.end().unwrap()).unwrap().is_real() {
            failures.push(format!("case {k}: terminal spectrum not real"));
        }
    }
    finish("3", &failures, &format!("20 cases in dimension 4, largest relative change outside the plane {worst:.3e}"));
}

#[test]
fn criterion_6_flag_persistence() {
    let mut failures = Vec::new();
    let mut count = 0;
    let mut least = f64::INFINITY;
    for (k, c) in det_one_cases().iter().chain(block_cases()).enumerate() {
        let o: SynthesisOutcome = match realify(c, 0.1) {
            Ok(o) => o,
            Err(e) => {
                failures.push(format!("case {k}: {e}"));
                continue;
            }
        };
        let i_set: BTreeSet<usize> = strong_stable_dims(c).unwrap();
        let j_set: BTreeSet<usize> = strong_unstable_dims(c).unwrap();
        let cert = check_flag_persistence(&o.path, &i_set, &j_set, 100);
        count += 1;
        least = least.min(cert.margin);
        if !cert.passed {
            failures.push(format!("case {k}: {}", cert.details));
        }
    }
    finish("6", &failures, &format!("{count} realify outcomes, smallest margin {least:.3e}"));
}

// ---------------------------------------------------------------- criterion 4

#[test]
fn criterion_4_moduli_push() {
    let mut failures = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let (mut worst_radius, mut least_margin) = (0.0f64, f64::INFINITY);
    for k in 0..50 {
        let d = rng.gen_range(2..=3);
        let stable = rng.gen_range(1..d);
        let mut moduli: Vec<f64> =
            (0..d).map(|i| if i < stable { rng.gen_range(0.15..0.95) } else { rng.gen_range(1.05..8.0) }).collect();
        moduli.sort_by(f64::total_cmp);
        if moduli.windows(2).any(|w| w[1] / w[0] < 1.01) {
            moduli = moduli.iter().enumerate().map(|(i, m)| m * (1.0 + 0.02 * i as f64)).collect();
        }
        let spec = GeneratorSpec::new(GeneratorKind::Saddle, d, 500, 1.05, 4000 + k).with_moduli(moduli.clone());
        let c = generate(&spec).unwrap();
        let o = match push_moduli(&c, 0.1) {
            Ok(o) => o,
            Err(e) => {
                failures.push(format!("case {k} {moduli:?}: {e}"));
                continue;
            }
        };
        let end = spectrum_of(&o.end().unwrap()).unwrap();
        if !end.moduli.iter().all(|m| *m < 0.1 || *m > 10.0) {
            failures.push(format!("case {k}: terminal moduli {:?}", end.moduli));
        }
        let Some(cert) = o.certificates.iter().find(|c| c.name == "moduli_separated").cloned() else {
            failures.push(format!("case {k}: no separation certificate"));
            continue;
        };
        if cert.samples < 100 {
            failures.push(format!("case {k}: separation checked at only {} times", cert.samples));
        }
        least_margin = least_margin.min(cert.margin);
        if !(cert.passed && cert.margin > 0.0) {
            failures.push(format!("case {k}: {}", cert.details));
        }
        for t in uniform_times(100) {
            let s = spectrum_of(&sample_path(&o.path, t).unwrap()).unwrap();
            let distinct = s.log_moduli.windows(2).all(|w| w[1] > w[0]);
            if !distinct || s.log_moduli.contains(&0.0) {
                failures.push(format!("case {k} t={t}: moduli {:?}", s.moduli));
                break;
            }
        }
        let radius = o.radius_report.radius;
        worst_radius = worst_radius.max(radius);
        if !(radius < 0.1) {
            failures.push(format!("case {k}: radius {radius}"));
        }
    }
    finish("4", &failures, &format!("50 saddles, p = 500; max radius {worst_radius:.4e}, smallest separation margin {least_margin:.3e}"));
}

// ---------------------------------------------------------------- criterion 5

#[test]
fn criterion_5_small_angle() {
    let p = 400;
    let delta = 0.01f64;
    let moduli = vec![(1.0 - delta).powi(p as i32), (1.0 + delta).powi(p as i32)];
    let mut failures = Vec::new();
    let mut worst_angle = 0.0f64;
    let mut worst_eig = 0.0f64;
    for k in 0..30 {
        let spec = GeneratorSpec::new(GeneratorKind::PrescribedModuli, 2, p, 1.1, 5000 + k).with_moduli(moduli.clone());
        let c = generate(&spec).unwrap();
        let o = match small_angle(&c, 0.1, 10) {
            Ok(o) => o,
            Err(e) => {
                failures.push(format!("case {k}: {e}"));
                continue;
            }
        };
        let end = o.end().unwrap();
        let angle = stable_unstable_splitting(&end).unwrap().min_angle();
        worst_angle = worst_angle.max(angle);
        let (s0, s1) = (spectrum_of(&c).unwrap(), spectrum_of(&end).unwrap());
        let eig = s0.eigenvalues.iter().zip(&s1.eigenvalues).map(|(a, b)| (a - b).norm() / a.norm()).fold(0.0, f64::max);
        worst_eig = worst_eig.max(eig);
        if !(angle < 0.1 && eig <= 1e-8) {
            failures.push(format!("case {k}: angle {angle:.4e}, eigenvalue change {eig:.3e}"));
        }
    }
    let control = PeriodicCocycle::constant(Mat::from_diagonal(&DVector::from_column_slice(&[0.25, 4.0])), p).unwrap();
    let control_ok = matches!(small_angle(&control, 0.1, 10), Err(Error::StillDominated { .. }));
    if !control_ok {
        failures.push("diag(1/4, 4) control was not reported as dominated".into());
    }
    finish(
        "5",
        &failures,
        &format!("30 weak saddles (δ = 0.01, p = 400); max terminal angle {worst_angle:.4e}, max eigenvalue change {worst_eig:.3e}; control dominated: {control_ok}"),
    );
}

// ---------------------------------------------------------------- criterion 7

/// Orthonormal basis of the image of `m` in the complement of `g`.
fn project_out(m: &Mat, g: &Mat) -> Mat {
    let proj = m - g * (g.transpose() * m);
    let svd = proj.svd(true, false);
    let u = svd.u.unwrap();
    let rank = svd.singular_values.iter().filter(|s| **s > 1e-10).count();
    u.columns(0, rank).into_owned()
}

#[test]
fn criterion_7_quotient_angles() {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut failures = Vec::new();
    let mut tightest = f64::INFINITY;
    for k in 0..100 {
        let d = rng.gen_range(3..=5);
        let basis = random_orthogonal(d, &mut rng);
        let delta_dim = rng.gen_range(2..d);
        let gamma_dim = rng.gen_range(1..delta_dim);
        // Δ spanned by tilted columns so that Γ is not a coordinate subspace of it
        let mix = random_orthogonal(delta_dim, &mut rng);
        let delta = orthonormalize(&(basis.columns(0, delta_dim) * mix));
        let gamma = orthonormalize(&(&delta * Mat::from_fn(delta_dim, gamma_dim, |_, _| rng.gen_range(-1.0..1.0))));
        let lambda_dim = rng.gen_range(1..d);
        let lambda = orthonormalize(&DMatrix::from_fn(d, lambda_dim, |_, _| rng.gen_range(-1.0..1.0)));
        let whole = min_angle(&delta, &lambda).unwrap();
        let dq = project_out(&delta, &gamma);
        let lq = project_out(&lambda, &gamma);
        if dq.ncols() == 0 || lq.ncols() == 0 {
            failures.push(format!("triple {k}: degenerate quotient"));
            continue;
        }
        let quotient = min_angle(&dq, &lq).unwrap();
        tightest = tightest.min(quotient - whole);
        if whole > quotient + 1e-9 {
            failures.push(format!("triple {k}: {whole:.6e} > {quotient:.6e}"));
        }
    }
    finish("7", &failures, &format!("100 triples in dimension 3..5, smallest slack {tightest:.3e}"));
}

// ---------------------------------------------------------------- criterion 8

fn random_matrix_with_singular_values(d: usize, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Mat {
    let s = DVector::from_fn(d, |_, _| rng.gen_range(lo..hi));
    random_orthogonal(d, rng) * Mat::from_diagonal(&s) * random_orthogonal(d, rng)
}

fn perturbation(d: usize, size: f64, rng: &mut ChaCha8Rng) -> Mat {
    let e = Mat::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
    let n = e.norm();
    e * (size * rng.gen_range(0.2..1.0) / n)
}

fn random_connection(rng: &mut ChaCha8Rng) -> GluedMap {
    let d = rng.gen_range(2..=3);
    let a = random_matrix_with_singular_values(d, 0.5, 2.0, rng);
    let b = &a + perturbation(d, 0.05, rng);
    let r_out = rng.gen_range(0.5..2.0);
    build_glued(a, b, r_out * rng.gen_range(0.3..0.7), r_out, Profile::Plateau).unwrap()
}

#[test]
fn criterion_8_connection_lab() {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut failures = Vec::new();

    // (a) analytic Jacobian against central differences
    let mut worst_fd = 0.0f64;
    let maps: Vec<GluedMap> = (0..10).map(|_| random_connection(&mut rng)).collect();
    for k in 0..1000 {
        let g = &maps[k % maps.len()];
        let d = g.dim();
        let (_, r_out) = g.radii();
        let x = DVector::from_fn(d, |_, _| rng.gen_range(-1.2 * r_out..1.2 * r_out));
        let j = g.jacobian(&x);
        let h = 1e-6 * r_out;
        let mut fd = Mat::zeros(d, d);
        for c in 0..d {
            let mut e = DVector::zeros(d);
            e[c] = h;
            fd.set_column(c, &((g.apply(&(&x + &e)) - g.apply(&(&x - &e))) / (2.0 * h)));
        }
        let err = (&j - &fd).amax() / j.amax().max(1.0);
        worst_fd = worst_fd.max(err);
        if err > 1e-6 {
            failures.push(format!("(a) point {k}: relative error {err:.3e}"));
        }
    }

    // (b) homothety conjugation does not increase size
    let mut worst_growth = f64::NEG_INFINITY;
    for k in 0..20 {
        let g = random_connection(&mut rng);
        let base = connection_size(&g, 48).size;
        for e in 1..=6 {
            let q = homothety_conjugate(&g, 0.5f64.powi(e)).unwrap();
            let s = connection_size(&q, 48).size;
            worst_growth = worst_growth.max(s - base);
            if s > base + 1e-9 {
                failures.push(format!("(b) connection {k}, λ = 2^-{e}: {s:.12e} > {base:.12e}"));
            }
        }
    }

    // (c) size inequalities for nearby triples
    let grid: Vec<f64> = (4..=8).map(|e| 0.5f64.powi(e)).collect();
    let mut least_margin = f64::INFINITY;
    for k in 0..20 {
        let d = rng.gen_range(2..=3);
        let a = random_matrix_with_singular_values(d, 0.5, 2.0, &mut rng);
        let b = &a + perturbation(d, 0.05, &mut rng);
        let c = &b + perturbation(d, 0.05, &mut rng);
        let c1 = build_glued(a, b.clone(), 0.5, 1.0, Profile::Plateau).unwrap();
        let c2 = build_glued(b, c, 0.5, 1.0, Profile::Plateau).unwrap();
        match size_inequality_check(&c1, &c2, &grid, 32) {
            Ok(cert) => {
                least_margin = least_margin.min(cert.margin);
                if !cert.passed {
                    failures.push(format!("(c) triple {k}: {}", cert.details));
                }
            }
            Err(e) => failures.push(format!("(c) triple {k}: {e}")),
        }
    }

    // (d) points on the strong stable line of A, with B keeping that line
    let a = {
        let frame = Mat::identity(3, 3) + Mat::from_fn(3, 3, |_, _| 0.15 * rng.gen_range(-1.0..1.0));
        &frame * Mat::from_diagonal(&DVector::from_column_slice(&[0.2, 0.5, 2.0])) * frame.clone().try_inverse().unwrap()
    };
    let line = {
        let c = PeriodicCocycle::constant(a.clone(), 1).unwrap();
        cocycle_lab::spectral::strong_stable_space(&c, 1, 0).unwrap().column(0).into_owned()
    };
    let proj = &line * line.transpose();
    let keep_line = |e: Mat| -> Mat {
        let off = (Mat::identity(3, 3) - &proj) * &e * &proj;
        e - off
    };
    let (r_in, r_out) = (0.5, 1.0);
    let mut members = 0;
    let mut generic_members = 0;
    let mut generic_defect = 0.0f64;
    for k in 0..100 {
        let e = keep_line(perturbation(3, 0.01, &mut rng));
        let e = if e.norm() > 0.01 { &e * (0.01 / e.norm()) } else { e };
        let g = build_glued(a.clone(), &a + e, r_in, r_out, Profile::Plateau).unwrap();
        let radius = r_out * rng.gen_range(2.0..10.0);
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let x = &line * (sign * radius);
        let r = strong_stable_membership(&g, &x, 1, (0.25, 0.35), 50).unwrap();
        if r.member {
            members += 1;
        } else {
            failures.push(format!("(d) point {k}: {}", r.detail));
        }
        // unconstrained perturbation, for the record only
        let free = build_glued(a.clone(), &a + perturbation(3, 0.01, &mut rng), r_in, r_out, Profile::Plateau).unwrap();
        generic_defect = generic_defect.max(strong_stable_defect(&free, 1, 16).unwrap());
        if strong_stable_membership(&free, &x, 1, (0.25, 0.35), 50).unwrap().member {
            generic_members += 1;
        }
    }
    report(
        "8 (info)",
        true,
        &format!("generic B not keeping the line: {generic_members}/100 members, invariance defect up to {generic_defect:.3e}"),
    );

    // concatenation built from the same pieces inverts layer by layer
    let g = LayeredMap::from(build_glued(a.clone(), &a + keep_line(perturbation(3, 0.01, &mut rng)), r_in, r_out, Profile::Plateau).unwrap());
    let inner = g.innermost().inner().clone();
    let h = build_glued(inner.clone(), &inner + perturbation(3, 0.01, &mut rng), 0.1, 0.4, Profile::Plateau).unwrap();
    let gh = concatenate_maps(&g, &LayeredMap::from(h)).unwrap();
    let mut worst_inverse = 0.0f64;
    for _ in 0..200 {
        let x = DVector::from_fn(3, |_, _| rng.gen_range(-1.2..1.2));
        let y = gh.apply(&x);
        let err = (gh.concat_of_inverses(&y).unwrap() - &x).amax();
        worst_inverse = worst_inverse.max(err);
        if err > 1e-9 {
            failures.push(format!("inversion identity off by {err:.3e}"));
        }
    }

    finish(
        "8",
        &failures,
        &format!(
            "(a) max FD error {worst_fd:.3e}; (b) max size change {worst_growth:.3e}; (c) smallest margin {least_margin:.3e}; (d) {members}/100 members; inversion identity {worst_inverse:.3e}"
        ),
    );
}

// ---------------------------------------------------------------- criterion 9

fn fixture_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

#[test]
fn criterion_9_metric_and_serialization() {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let mut failures = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    for k in 0..500 {
        let d = rng.gen_range(1..=4);
        let p = rng.gen_range(1..=5);
        let c = rng.gen_range(1.0..3.0);
        let mk = |s: u64| generate(&GeneratorSpec::new(GeneratorKind::Generic, d, p, c, s)).unwrap();
        let (x, y, z) = (mk(3 * k), mk(3 * k + 1), mk(3 * k + 2));
        let lhs = dist_cocycle(&x, &z).unwrap();
        let rhs = dist_cocycle(&x, &y).unwrap() + dist_cocycle(&y, &z).unwrap();
        worst = worst.max(lhs - rhs);
        if lhs - rhs >= 1e-12 {
            failures.push(format!("triple {k}: {lhs:.15e} > {rhs:.15e}"));
        }
    }

    let mut files = 0;
    let mut entries: Vec<_> = std::fs::read_dir(fixture_dir()).unwrap().map(|e| e.unwrap().path()).collect();
    entries.sort();
    for path in entries {
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        let text = std::fs::read_to_string(&path).unwrap();
        files += 1;
        let exact = if name.starts_with("cocycle_") {
            let a = PeriodicCocycle::from_json(&text).unwrap();
            let b = PeriodicCocycle::from_json(&a.to_json()).unwrap();
            a == b && a.to_json() == b.to_json()
        } else if name.starts_with("outcome_") {
            let a = SynthesisOutcome::from_json(&text).unwrap();
            let b = SynthesisOutcome::from_json(&a.to_json()).unwrap();
            let paths = CocyclePath::from_json(&a.path.to_json()).unwrap() == a.path;
            a == b && a.to_json() == b.to_json() && paths
        } else if name.starts_with("glued_") {
            let a = GluedMap::from_json(&text).unwrap();
            let b = GluedMap::from_json(&a.to_json()).unwrap();
            a == b && a.to_json() == b.to_json()
        } else if name.starts_with("layered_") {
            let a = LayeredMap::from_json(&text).unwrap();
            let b = LayeredMap::from_json(&a.to_json()).unwrap();
            a == b && a.to_json() == b.to_json()
        } else {
            failures.push(format!("unknown fixture {name}"));
            continue;
        };
        if !exact {
            failures.push(format!("{name} does not round-trip exactly"));
        }
    }
    // freshly generated documents as well
    for s in 0..20 {
        let c = generate(&GeneratorSpec::new(GeneratorKind::Generic, 3, 4, 2.0, s)).unwrap();
        if PeriodicCocycle::from_json(&c.to_json()).unwrap() != c {
            failures.push(format!("generated cocycle {s} does not round-trip"));
        }
    }
    if files < 4 {
        failures.push(format!("only {files} fixtures found"));
    }
    finish("9", &failures, &format!("500 triples, largest triangle excess {worst:.3e}; {files} fixtures round-trip bit-exact"));
}
