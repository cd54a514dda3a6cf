//! Maps of R^d equal to one linear map near the origin and another far from
//! it, joined by a radial bump; their size, homothety conjugates,
//! concatenation and strong stable sets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cocycle::PeriodicCocycle;
use crate::error::{Error, Result};
use crate::linalg::{all_finite, conorm, inverse, op_norm, Mat};
use crate::spectral::{spectrum_of, strong_stable_space};
use crate::verification::Certificate;

pub type Vector = nalgebra::DVector<f64>;

/// Outer and inner linear parts must agree to this relative accuracy.
pub const MATCH_TOL: f64 = 1e-12;
/// Default escape radius of an orbit, as a multiple of max(|x|, r_out).
pub const ESCAPE_FACTOR: f64 = 1e6;
pub const DEFAULT_SIZE_SAMPLES: usize = 64;
pub const DEFAULT_MEMBERSHIP_ITERATES: usize = 50;
const FIT_ITERATES: usize = 5;
/// Relative distance from the inner strong stable space still counted as on it.
const LINEAR_MEMBER_TOL: f64 = 1e-8;
const LIP_GRID: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// C^∞ plateau: 1 up to r_in, 0 from r_out on
    Plateau,
    /// θ ≡ 0
    Zero,
}

fn flat(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else {
        (-1.0 / s).exp()
    }
}

fn flat_prime(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else {
        flat(s) / (s * s)
    }
}

/// Smooth step on [0, 1]: 0 at 0, 1 at 1, all derivatives vanish at both ends.
fn step(s: f64) -> f64 {
    let (a, b) = (flat(s), flat(1.0 - s));
    a / (a + b)
}

fn step_prime(s: f64) -> f64 {
    if s <= 0.0 || s >= 1.0 {
        return 0.0;
    }
    let (a, b) = (flat(s), flat(1.0 - s));
    let (da, db) = (flat_prime(s), flat_prime(1.0 - s));
    (da * b + a * db) / ((a + b) * (a + b))
}

/// max |step′| on a fine grid.
fn step_lip() -> f64 {
    (0..=LIP_GRID).map(|k| step_prime(k as f64 / LIP_GRID as f64)).fold(0.0, f64::max)
}

/// C(x) = (1 − θ(|x|)) A x + θ(|x|) B x.
#[derive(Debug, Clone, PartialEq)]
pub struct GluedMap {
    outer: Mat,
    inner: Mat,
    r_in: f64,
    r_out: f64,
    profile: Profile,
    lip: f64,
}

pub fn build_glued(outer: Mat, inner: Mat, r_in: f64, r_out: f64, profile: Profile) -> Result<GluedMap> {
    let d = outer.nrows();
    if d == 0 || outer.ncols() != d || inner.shape() != (d, d) {
        return Err(Error::ShapeMismatch(format!("outer {:?}, inner {:?}", outer.shape(), inner.shape())));
    }
    if !all_finite(&outer) || !all_finite(&inner) {
        return Err(Error::InvalidMatrix("non-finite entries".into()));
    }
    if !(r_in > 0.0 && r_in < r_out && r_out.is_finite()) {
        return Err(Error::InvalidArgument(format!("radii must satisfy 0 < r_in < r_out, got {r_in}, {r_out}")));
    }
    let lip = match profile {
        Profile::Plateau => step_lip() / (r_out - r_in),
        Profile::Zero => 0.0,
    };
    let gap = op_norm(&(&inner - &outer));
    let floor = conorm(&outer);
    let lhs = match profile {
        Profile::Plateau => gap * (1.0 + r_out * lip),
        Profile::Zero => 0.0,
    };
    if !(lhs < floor) {
        return Err(Error::NotInvertible(format!("‖B − A‖(1 + r_out·Lip) = {lhs:.4e} is not below conorm(A) = {floor:.4e}")));
    }
    if profile == Profile::Plateau && conorm(&inner) == 0.0 {
        return Err(Error::NotInvertible("inner map is singular".into()));
    }
    Ok(GluedMap { outer, inner, r_in, r_out, profile, lip })
}

impl GluedMap {
    /// The linear map A restricted to nothing: a trivial connection.
    pub fn linear(a: Mat, r_in: f64, r_out: f64) -> Result<GluedMap> {
        build_glued(a.clone(), a, r_in, r_out, Profile::Plateau)
    }

    pub fn dim(&self) -> usize {
        self.outer.nrows()
    }

    pub fn outer(&self) -> &Mat {
        &self.outer
    }

    pub fn inner(&self) -> &Mat {
        &self.inner
    }

    pub fn radii(&self) -> (f64, f64) {
        (self.r_in, self.r_out)
    }

    pub fn profile(&self) -> Profile {
        self.profile
    }

    /// Lipschitz constant of θ.
    pub fn lip(&self) -> f64 {
        self.lip
    }

    /// Both linear parts coincide, so the map is linear everywhere.
    pub fn is_linear(&self) -> bool {
        self.outer == self.inner || self.profile == Profile::Zero
    }

    /// Linear part near the origin.
    pub fn near_map(&self) -> &Mat {
        match self.profile {
            Profile::Plateau => &self.inner,
            Profile::Zero => &self.outer,
        }
    }

    fn scaled_radius(&self, r: f64) -> f64 {
        (self.r_out - r) / (self.r_out - self.r_in)
    }

    pub fn theta(&self, r: f64) -> f64 {
        match self.profile {
            Profile::Zero => 0.0,
            Profile::Plateau if r <= self.r_in => 1.0,
            Profile::Plateau if r >= self.r_out => 0.0,
            Profile::Plateau => step(self.scaled_radius(r)),
        }
    }

    pub fn theta_prime(&self, r: f64) -> f64 {
        match self.profile {
            Profile::Plateau if r > self.r_in && r < self.r_out => -step_prime(self.scaled_radius(r)) / (self.r_out - self.r_in),
            _ => 0.0,
        }
    }

    pub fn apply(&self, x: &Vector) -> Vector {
        let r = x.norm();
        if self.profile == Profile::Zero || r >= self.r_out {
            return &self.outer * x;
        }
        if r <= self.r_in {
            return &self.inner * x;
        }
        let t = self.theta(r);
        (&self.outer * x) * (1.0 - t) + (&self.inner * x) * t
    }

    /// DC(x) = (1 − θ) A + θ B + θ′(|x|) (B − A) x xᵀ / |x|.
    pub fn jacobian(&self, x: &Vector) -> Mat {
        let r = x.norm();
        if self.profile == Profile::Zero || r >= self.r_out {
            return self.outer.clone();
        }
        if r <= self.r_in {
            return self.inner.clone();
        }
        let t = self.theta(r);
        let dt = self.theta_prime(r);
        let diff = &self.inner - &self.outer;
        &self.outer * (1.0 - t) + &self.inner * t + (&diff * x) * (x.transpose() * (dt / r))
    }

    /// Solve C(x) = y.
    pub fn inverse_apply(&self, y: &Vector) -> Result<Vector> {
        let x = inverse(&self.outer)? * y;
        if self.profile == Profile::Zero || x.norm() >= self.r_out {
            return Ok(x);
        }
        let z = inverse(&self.inner)? * y;
        if z.norm() <= self.r_in {
            return Ok(z);
        }
        newton(|v| self.apply(v), |v| self.jacobian(v), y, x)
    }

    /// g^λ = λ·g(·/λ): same linear parts, radii multiplied by λ.
    pub fn homothety_conjugate(&self, lambda: f64) -> Result<GluedMap> {
        homothety_conjugate(self, lambda)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&GluedDoc::from(self)).expect("glued map serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: GluedDoc = serde_json::from_str(s)?;
        doc.into_map()
    }
}

fn newton(f: impl Fn(&Vector) -> Vector, df: impl Fn(&Vector) -> Mat, y: &Vector, mut x: Vector) -> Result<Vector> {
    let scale = 1.0 + y.norm();
    let mut res = f(&x) - y;
    for _ in 0..100 {
        if res.norm() <= 1e-15 * scale {
            return Ok(x);
        }
        let step = df(&x).lu().solve(&res).ok_or_else(|| Error::NumericalFailure("singular Jacobian in inversion".into()))?;
        let mut t = 1.0;
        loop {
            let cand = &x - &step * t;
            let r = f(&cand) - y;
            if r.norm() < res.norm() || t < 1e-6 {
                x = cand;
                res = r;
                break;
            }
            t *= 0.5;
        }
    }
    if res.norm() <= 1e-12 * scale {
        Ok(x)
    } else {
        Err(Error::NumericalFailure(format!("inversion residual {:.3e}", res.norm())))
    }
}

pub fn homothety_conjugate(g: &GluedMap, lambda: f64) -> Result<GluedMap> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::InvalidArgument(format!("homothety ratio must lie in (0, 1], got {lambda}")));
    }
    if lambda == 1.0 {
        return Ok(g.clone());
    }
    Ok(GluedMap { r_in: lambda * g.r_in, r_out: lambda * g.r_out, lip: g.lip / lambda, ..g.clone() })
}

/// Glued maps nested inside one another, outermost first: layer k+1 lives
/// inside the inner linear ball of layer k and starts from its inner map.
#[derive(Debug, Clone, PartialEq)]
pub struct LayeredMap {
    layers: Vec<GluedMap>,
}

impl From<GluedMap> for LayeredMap {
    fn from(g: GluedMap) -> Self {
        LayeredMap { layers: vec![g] }
    }
}

impl LayeredMap {
    pub fn layers(&self) -> &[GluedMap] {
        &self.layers
    }

    pub fn dim(&self) -> usize {
        self.layers[0].dim()
    }

    pub fn outer(&self) -> &Mat {
        self.layers[0].outer()
    }

    pub fn innermost(&self) -> &GluedMap {
        self.layers.last().expect("at least one layer")
    }

    pub fn is_linear(&self) -> bool {
        self.layers.iter().all(|g| g.is_linear())
    }

    fn layer_at(&self, r: f64) -> &GluedMap {
        let last = self.layers.len() - 1;
        self.layers.iter().enumerate().find(|(k, g)| *k == last || r >= g.r_in).map(|(_, g)| g).expect("nonempty")
    }

    pub fn apply(&self, x: &Vector) -> Vector {
        self.layer_at(x.norm()).apply(x)
    }

    pub fn jacobian(&self, x: &Vector) -> Mat {
        self.layer_at(x.norm()).jacobian(x)
    }

    /// Solve for the preimage by Newton iteration on the whole map.
    pub fn inverse_apply(&self, y: &Vector) -> Result<Vector> {
        let x0 = inverse(self.outer())? * y;
        newton(|v| self.apply(v), |v| self.jacobian(v), y, x0)
    }

    /// The concatenation of the layer inverses: the inverse of layer k is
    /// used unless y lies in the image of its inner linear ball, where the
    /// next layer's inverse takes over.
    pub fn concat_of_inverses(&self, y: &Vector) -> Result<Vector> {
        for (k, g) in self.layers.iter().enumerate() {
            let last = k + 1 == self.layers.len();
            let pulled = inverse(g.near_map())? * y;
            if last || g.profile == Profile::Zero || pulled.norm() >= g.r_in {
                return g.inverse_apply(y);
            }
        }
        unreachable!("loop returns at the last layer")
    }

    pub fn to_json(&self) -> String {
        let doc = LayeredDoc { v: 1, layers: self.layers.iter().map(GluedDoc::from).collect() };
        serde_json::to_string_pretty(&doc).expect("layered map serializes")
    }

    /// Accepts either a layered document or a single glued map.
    pub fn from_json(s: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(s)?;
        if value.get("layers").is_some() {
            let doc: LayeredDoc = serde_json::from_value(value)?;
            check_version(doc.v)?;
            let layers = doc.layers.into_iter().map(GluedDoc::into_map).collect::<Result<Vec<_>>>()?;
            if layers.is_empty() {
                return Err(Error::Parse("no layers".into()));
            }
            let mut out = LayeredMap::from(layers[0].clone());
            for g in layers.into_iter().skip(1) {
                out = concatenate_maps(&out, &LayeredMap::from(g))?;
            }
            Ok(out)
        } else {
            Ok(GluedMap::from_json(s)?.into())
        }
    }
}

fn matrices_match(a: &Mat, b: &Mat) -> bool {
    a.shape() == b.shape() && (a - b).amax() <= MATCH_TOL * (1.0 + a.amax())
}

/// g∗h: equal to h inside the inner linear ball of g and to g elsewhere.
pub fn concatenate_maps(g: &LayeredMap, h: &LayeredMap) -> Result<LayeredMap> {
    if g.dim() != h.dim() {
        return Err(Error::IncompatibleConcatenation(format!("dimensions {} and {}", g.dim(), h.dim())));
    }
    let near = g.innermost().near_map();
    if !matrices_match(h.outer(), near) {
        return Err(Error::IncompatibleConcatenation(format!(
            "outer map of h differs from the inner map of g by {:.3e}",
            (h.outer() - near).amax()
        )));
    }
    if g.is_linear() {
        return Ok(h.clone());
    }
    let inner_h: Vec<GluedMap> = h.layers.iter().filter(|l| !l.is_linear()).cloned().collect();
    if inner_h.is_empty() {
        return Ok(g.clone());
    }
    let room = g.innermost().r_in;
    if g.innermost().profile == Profile::Zero || inner_h[0].r_out > room {
        return Err(Error::IncompatibleConcatenation(format!(
            "support radius {:.4e} of h does not fit in the linear ball of radius {room:.4e}",
            inner_h[0].r_out
        )));
    }
    let mut layers = g.layers.clone();
    layers.extend(inner_h);
    Ok(LayeredMap { layers })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeReport {
    pub size: f64,
    pub sample_count: usize,
}

/// Unit directions: a half circle in the plane, seeded points otherwise.
fn directions(d: usize, samples: usize) -> Vec<Vector> {
    if d == 1 {
        return vec![Vector::from_element(1, 1.0)];
    }
    if d == 2 {
        return (0..samples)
            .map(|k| {
                let a = std::f64::consts::PI * k as f64 / samples as f64;
                Vector::from_column_slice(&[a.cos(), a.sin()])
            })
            .collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let count = samples * (d - 1);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let v = Vector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            out.push(v / n);
        }
    }
    out
}

fn deviation(j: &Mat, a: &Mat, a_inv: &Mat) -> f64 {
    let fwd = op_norm(&(j - a));
    let bwd = match inverse(j) {
        Ok(ji) => op_norm(&(ji - a_inv)),
        Err(_) => f64::INFINITY,
    };
    fwd.max(bwd)
}

fn annulus_points(g: &GluedMap, samples: usize) -> Vec<Vector> {
    let n = samples.max(2);
    let dirs = directions(g.dim(), n);
    let mut pts = Vec::with_capacity(n * dirs.len());
    for k in 0..n {
        let r = g.r_in + (g.r_out - g.r_in) * k as f64 / (n - 1) as f64;
        for u in &dirs {
            pts.push(u * r);
        }
    }
    pts
}

/// Largest deviation of DC and DC⁻¹ from A and A⁻¹ over sampled points of
/// every annulus, plus the linear balls between them.
pub fn layered_size(g: &LayeredMap, samples: usize) -> Result<SizeReport> {
    let a = g.outer();
    let a_inv = inverse(a)?;
    let mut size = 0.0f64;
    let mut count = 0;
    for layer in &g.layers {
        size = size.max(deviation(layer.near_map(), a, &a_inv));
        count += 1;
        if layer.is_linear() {
            continue;
        }
        for x in annulus_points(layer, samples) {
            size = size.max(deviation(&g.jacobian(&x), a, &a_inv));
            count += 1;
        }
    }
    Ok(SizeReport { size, sample_count: count })
}

pub fn connection_size(g: &GluedMap, samples: usize) -> SizeReport {
    layered_size(&LayeredMap::from(g.clone()), samples).unwrap_or(SizeReport { size: f64::INFINITY, sample_count: 0 })
}

/// max(‖A − B‖, ‖A⁻¹ − B⁻¹‖)
pub fn linear_distance(a: &Mat, b: &Mat) -> Result<f64> {
    Ok(op_norm(&(a - b)).max(op_norm(&(inverse(a)? - inverse(b)?))))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipReport {
    pub member: bool,
    pub escaped: bool,
    pub entered_inner: bool,
    pub iterations: usize,
    /// constant K fitted on the first iterates
    pub fitted_k: f64,
    /// max over n of |gⁿx| / (K σⁿ |x|)
    pub worst_ratio: f64,
    pub detail: String,
}

fn moduli_of(a: &Mat) -> Result<Vec<f64>> {
    Ok(spectrum_of(&PeriodicCocycle::constant(a.clone(), 1)?)?.moduli)
}

/// Decay-rate test for the i-strong stable set of g: the orbit must stay
/// below K σ_hiⁿ |x| for n ≤ n_max and enter the inner linear ball on the
/// strong stable space of the inner map.
pub fn strong_stable_membership(g: &GluedMap, x: &Vector, i: usize, window: (f64, f64), n_max: usize) -> Result<MembershipReport> {
    let escape = ESCAPE_FACTOR * x.norm().max(g.r_out);
    strong_stable_membership_within(g, x, i, window, n_max, escape)
}

pub fn strong_stable_membership_within(
    g: &GluedMap,
    x: &Vector,
    i: usize,
    (lo, hi): (f64, f64),
    n_max: usize,
    escape_radius: f64,
) -> Result<MembershipReport> {
    let d = g.dim();
    if x.len() != d {
        return Err(Error::ShapeMismatch(format!("point of length {} in dimension {d}", x.len())));
    }
    if i == 0 || i > d {
        return Err(Error::InvalidArgument(format!("index {i} outside 1..={d}")));
    }
    let moduli = moduli_of(&g.outer)?;
    let ceiling = if i < d { moduli[i].min(1.0) } else { 1.0 };
    if !(moduli[i - 1] < lo && lo < hi && hi < ceiling) {
        return Err(Error::InvalidArgument(format!(
            "rate window ({lo}, {hi}) must sit strictly between {:.6} and {ceiling:.6}",
            moduli[i - 1]
        )));
    }
    let r0 = x.norm();
    if !(r0 > 0.0 && r0.is_finite()) {
        return Err(Error::InvalidArgument("point must be nonzero and finite".into()));
    }
    let mut radii = vec![r0];
    let mut y = x.clone();
    let mut entered = r0 <= g.r_in;
    let mut escaped = false;
    let mut off_space = None;
    while radii.len() <= n_max && !entered {
        y = g.apply(&y);
        let r = y.norm();
        radii.push(r);
        entered = r <= g.r_in;
        if !(r <= escape_radius) {
            escaped = true;
            break;
        }
        if r == 0.0 {
            break;
        }
    }
    if entered && !escaped && radii.len() <= n_max && y.norm() > 0.0 {
        // inside the ball the map is the inner linear map; follow its
        // restriction to the strong stable space so roundoff stays there
        match inner_strong_stable(g, i) {
            Some(basis) => {
                let z0 = basis.transpose() * &y;
                let defect = (&y - &basis * &z0).norm() / y.norm();
                if defect > LINEAR_MEMBER_TOL {
                    off_space = Some(defect);
                } else {
                    let restricted = basis.transpose() * &g.inner * &basis;
                    let mut z = z0;
                    while radii.len() <= n_max {
                        z = &restricted * z;
                        radii.push(z.norm());
                    }
                }
            }
            None => {
                while radii.len() <= n_max {
                    y = g.apply(&y);
                    radii.push(y.norm());
                }
            }
        }
    }
    let ratio = |n: usize, r: f64| r / (hi.powi(n as i32) * r0);
    let fitted_k = radii.iter().take(FIT_ITERATES + 1).enumerate().map(|(n, r)| ratio(n, *r)).fold(0.0, f64::max);
    let mut worst = 0.0f64;
    let mut first_bad = None;
    for (n, r) in radii.iter().enumerate() {
        let q = ratio(n, *r) / fitted_k;
        worst = worst.max(q);
        if q > 1.0 + 1e-9 && first_bad.is_none() {
            first_bad = Some(n);
        }
    }
    let member = !escaped && entered && off_space.is_none() && first_bad.is_none();
    let detail = if escaped {
        format!("orbit left the ball of radius {escape_radius:.3e} after {} iterates", radii.len() - 1)
    } else if let Some(defect) = off_space {
        format!("entered the inner ball at relative distance {defect:.3e} from the strong stable space of the inner map")
    } else if let Some(n) = first_bad {
        format!("iterate {n} exceeds K·σⁿ|x| with K = {fitted_k:.4e}")
    } else if !entered {
        format!("orbit stayed outside radius {} for {n_max} iterates", g.r_in)
    } else {
        format!("decay within rate {hi} for {} iterates", radii.len() - 1)
    };
    Ok(MembershipReport { member, escaped, entered_inner: entered, iterations: radii.len() - 1, fitted_k, worst_ratio: worst, detail })
}

/// Basis of the i-strong stable space of the inner map, when it has a gap at i.
fn inner_strong_stable(g: &GluedMap, i: usize) -> Option<Mat> {
    let moduli = moduli_of(&g.inner).ok()?;
    if i < g.dim() && !(moduli[i - 1] < moduli[i]) {
        return None;
    }
    let c = PeriodicCocycle::constant(g.inner.clone(), 1).ok()?;
    strong_stable_space(&c, i, 0).ok()
}

/// Largest relative distance of C(x) from the i-strong stable space of A,
/// over x on that space inside the annulus.
pub fn strong_stable_defect(g: &GluedMap, i: usize, samples: usize) -> Result<f64> {
    let c = PeriodicCocycle::constant(g.outer.clone(), 1)?;
    let basis = strong_stable_space(&c, i, 0)?;
    let proj = &basis * basis.transpose();
    let mut rng = ChaCha8Rng::seed_from_u64(0xdefec7);
    let mut worst = 0.0f64;
    for k in 0..samples.max(2) {
        let r = g.r_in + (g.r_out - g.r_in) * k as f64 / (samples.max(2) - 1) as f64;
        let w = Vector::from_fn(i, |_, _| rng.gen_range(-1.0..1.0));
        let v = &basis * w;
        let x = &v * (r / v.norm());
        let y = g.apply(&x);
        worst = worst.max((&y - &proj * &y).norm() / y.norm());
    }
    Ok(worst)
}

/// Both size inequalities for C1 ∗ (λ-conjugate of C2) over a grid of λ;
/// ratios too large for the concatenation to be defined are skipped.
pub fn size_inequality_check(c1: &GluedMap, c2: &GluedMap, lambdas: &[f64], samples: usize) -> Result<Certificate> {
    const TOL: f64 = 1e-6;
    if !matrices_match(c2.outer(), c1.near_map()) {
        return Err(Error::IncompatibleConcatenation("C2 does not start from the inner map of C1".into()));
    }
    let s1 = connection_size(c1, samples).size;
    let s2 = connection_size(c2, samples).size;
    let dist = linear_distance(c1.outer(), c2.outer())?;
    let base = LayeredMap::from(c1.clone());
    let mut margin = f64::INFINITY;
    let mut slack = 0.0f64;
    let mut used = Vec::new();
    let mut count = 0;
    for &lambda in lambdas {
        let scaled = homothety_conjugate(c2, lambda)?;
        let joined = match concatenate_maps(&base, &LayeredMap::from(scaled)) {
            Ok(j) => j,
            Err(Error::IncompatibleConcatenation(_)) => continue,
            Err(e) => return Err(e),
        };
        let report = layered_size(&joined, samples)?;
        count += report.sample_count;
        let first = s1.max(s2 + dist);
        let second = s1 + s2;
        slack = slack.max(report.size - first);
        margin = margin.min(first + TOL - report.size).min(second + TOL - report.size);
        used.push(lambda);
    }
    if used.is_empty() {
        return Err(Error::IncompatibleConcatenation("no ratio in the grid makes the concatenation defined".into()));
    }
    let details = format!(
        "size(C1) = {s1:.6e}, size(C2) = {s2:.6e}, dist = {dist:.6e}, λ ∈ {used:?}, measured slack {:.3e}",
        slack.max(0.0)
    );
    Ok(Certificate::new("size_inequalities", margin, details, count))
}

fn check_version(v: u32) -> Result<()> {
    if v != 1 {
        return Err(Error::Parse(format!("unsupported document version {v}")));
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct GluedDoc {
    v: u32,
    dim: usize,
    /// row-major
    outer: Vec<f64>,
    inner: Vec<f64>,
    r_in: f64,
    r_out: f64,
    profile: Profile,
}

fn row_major(m: &Mat) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

impl From<&GluedMap> for GluedDoc {
    fn from(g: &GluedMap) -> Self {
        GluedDoc { v: 1, dim: g.dim(), outer: row_major(&g.outer), inner: row_major(&g.inner), r_in: g.r_in, r_out: g.r_out, profile: g.profile }
    }
}

impl GluedDoc {
    fn into_map(self) -> Result<GluedMap> {
        check_version(self.v)?;
        let d = self.dim;
        if self.outer.len() != d * d || self.inner.len() != d * d {
            return Err(Error::Parse(format!("matrices need {} entries", d * d)));
        }
        build_glued(Mat::from_row_slice(d, d, &self.outer), Mat::from_row_slice(d, d, &self.inner), self.r_in, self.r_out, self.profile)
    }
}

#[derive(Serialize, Deserialize)]
struct LayeredDoc {
    v: u32,
    layers: Vec<GluedDoc>,
}
