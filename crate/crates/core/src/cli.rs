//! Command-line front end.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::cocycle::{bound_of, PeriodicCocycle};
use crate::connection::{
    concatenate_maps, homothety_conjugate, layered_size, strong_stable_membership, GluedMap, LayeredMap, Vector,
    DEFAULT_MEMBERSHIP_ITERATES, DEFAULT_SIZE_SAMPLES,
};
use crate::domination::{is_split_dominated, minimal_domination_n};
use crate::error::Error;
use crate::generate::{generate, GeneratorKind, GeneratorSpec};
use crate::spectral::{is_saddle, spectrum_of, stable_unstable_splitting, strong_stable_dims, strong_unstable_dims};
use crate::synthesis::{
    pipeline_small_angle, push_moduli_with, realify_with, small_angle_with, verify_outcome, SynthesisBudget, SynthesisOutcome,
};
use crate::verification::{all_passed, render_table, DEFAULT_SAMPLES};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "cocycle", about = "Periodic linear cocycles: analysis, perturbation paths, connections")]
struct Cli {
    /// Print machine-readable JSON instead of tables
    #[arg(long, global = true)]
    json: bool,
    /// Write the main JSON result to this file
    #[arg(short = 'o', long = "output", global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct BudgetArgs {
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long = "N", default_value_t = 1)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
}

impl BudgetArgs {
    fn budget(&self) -> crate::Result<SynthesisBudget> {
        Ok(SynthesisBudget::new(self.epsilon)?.with_n(self.n).with_seed(self.seed).with_samples(self.samples))
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Spectrum, strong stable/unstable dimensions and saddle flag
    Analyze { input: PathBuf },
    /// Domination of the stable/unstable splitting
    Dominate {
        input: PathBuf,
        #[arg(long = "N", default_value_t = 1)]
        n: usize,
        /// Search the least N up to this value instead
        #[arg(long = "max-N")]
        max_n: Option<usize>,
    },
    /// Path to a cocycle with real eigenvalues
    Realify {
        input: PathBuf,
        #[command(flatten)]
        budget: BudgetArgs,
    },
    /// Path making every modulus smaller than ε or larger than 1/ε
    PushModuli {
        input: PathBuf,
        #[command(flatten)]
        budget: BudgetArgs,
    },
    /// Path closing the stable/unstable angle below ε
    SmallAngle {
        input: PathBuf,
        #[command(flatten)]
        budget: BudgetArgs,
    },
    /// All synthesis stages in sequence
    Pipeline {
        input: PathBuf,
        #[command(flatten)]
        budget: BudgetArgs,
    },
    /// Re-run the certificates of a stored outcome
    Verify {
        input: PathBuf,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Validate a glued-map description and report its constants
    Glue {
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SIZE_SAMPLES)]
        samples: usize,
    },
    /// Size of a glued or layered map
    Size {
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SIZE_SAMPLES)]
        samples: usize,
    },
    /// Concatenate two maps, shrinking the second by a homothety first
    Concat {
        outer: PathBuf,
        inner: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
    },
    /// Decay-rate membership test for a strong stable set
    Member {
        input: PathBuf,
        /// Comma-separated coordinates
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        point: Vec<f64>,
        #[arg(long)]
        index: usize,
        /// Rate window lo,hi
        #[arg(long, value_delimiter = ',', num_args = 1, required = true)]
        window: Vec<f64>,
        #[arg(long = "n-max", default_value_t = DEFAULT_MEMBERSHIP_ITERATES)]
        n_max: usize,
    },
    /// Seeded random cocycle
    Gen {
        #[arg(long, value_parser = parse_kind)]
        kind: GeneratorKind,
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        period: usize,
        #[arg(long)]
        bound: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_delimiter = ',')]
        moduli: Option<Vec<f64>>,
    },
}

fn parse_kind(s: &str) -> Result<GeneratorKind, String> {
    serde_json::from_value(json!(s.replace('-', "_"))).map_err(|_| format!("unknown kind `{s}`"))
}

enum Failure {
    Usage(String),
    Domain(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse(m) => Failure::Usage(format!("parse error: {m}")),
            e => Failure::Domain(e.to_string()),
        }
    }
}

type CliResult = std::result::Result<i32, Failure>;

fn read(path: &Path) -> std::result::Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

fn load_cocycle(path: &Path) -> std::result::Result<PeriodicCocycle, Failure> {
    Ok(PeriodicCocycle::from_json(&read(path)?)?)
}

struct Ctx<'a> {
    json: bool,
    output: Option<PathBuf>,
    out: &'a mut dyn Write,
}

impl Ctx<'_> {
    fn say(&mut self, text: &str) {
        let _ = writeln!(self.out, "{text}");
    }

    /// JSON goes to the output file when given, else to stdout under --json.
    fn emit(&mut self, doc: &str, table: &str) -> std::result::Result<(), Failure> {
        if let Some(path) = &self.output {
            std::fs::write(path, format!("{doc}\n")).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))?;
        }
        if self.json {
            self.say(doc);
        } else {
            self.say(table);
        }
        Ok(())
    }
}

/// Parse `argv` (program name first) and run; returns the exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if code == EXIT_OK {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return code;
        }
    };
    let mut ctx = Ctx { json: cli.json, output: cli.output, out };
    match dispatch(cli.command, &mut ctx) {
        Ok(code) => code,
        Err(Failure::Usage(m)) => {
            let _ = writeln!(err, "error: {m}");
            EXIT_USAGE
        }
        Err(Failure::Domain(m)) => {
            let _ = writeln!(err, "error: {m}");
            EXIT_DOMAIN
        }
    }
}

fn outcome_code(o: &SynthesisOutcome) -> i32 {
    if o.passed() {
        EXIT_OK
    } else {
        EXIT_DOMAIN
    }
}

fn outcome_table(o: &SynthesisOutcome) -> String {
    let mut s = format!(
        "radius {:.6e} (t = {:.4}, fiber {}, {} samples)\n",
        o.radius_report.radius, o.radius_report.argmax_t, o.radius_report.argmax_n, o.radius_report.sample_count
    );
    for n in &o.notes {
        s.push_str(&format!("note: {n}\n"));
    }
    s.push_str(&render_table(&o.certificates));
    s
}

fn synthesis(ctx: &mut Ctx, outcome: crate::Result<SynthesisOutcome>) -> CliResult {
    let o = outcome?;
    ctx.emit(&o.to_json(), &outcome_table(&o))?;
    Ok(outcome_code(&o))
}

fn dims(set: &std::collections::BTreeSet<usize>) -> Vec<usize> {
    set.iter().copied().collect()
}

fn dispatch(cmd: Command, ctx: &mut Ctx) -> CliResult {
    match cmd {
        Command::Analyze { input } => {
            let c = load_cocycle(&input)?;
            let spec = spectrum_of(&c)?;
            let i_set = strong_stable_dims(&c)?;
            let j_set = strong_unstable_dims(&c)?;
            let saddle = is_saddle(&c, 1e-9);
            let doc = json!({
                "v": 1,
                "dim": c.dim(),
                "period": c.period(),
                "bound": bound_of(&c),
                "spectrum": spec,
                "strong_stable_dims": dims(&i_set),
                "strong_unstable_dims": dims(&j_set),
                "saddle": saddle,
            });
            let mut table = format!("dimension {}, period {}, bound {:.6}\n", c.dim(), c.period(), bound_of(&c));
            table.push_str("eigenvalues of the first return (by increasing modulus):\n");
            for (z, m) in spec.eigenvalues.iter().zip(&spec.moduli) {
                table.push_str(&format!("  {:+.10e} {:+.10e}i   |λ| = {:.10e}\n", z.re, z.im, m));
            }
            table.push_str(&format!("I = {:?}\nJ = {:?}\nsaddle: {saddle}", dims(&i_set), dims(&j_set)));
            ctx.emit(&serde_json::to_string_pretty(&doc).expect("json"), &table)?;
            Ok(EXIT_OK)
        }
        Command::Dominate { input, n, max_n } => {
            let c = load_cocycle(&input)?;
            let split = stable_unstable_splitting(&c)?;
            if let Some(max_n) = max_n {
                let found = minimal_domination_n(&c, &split.stable, &split.unstable, max_n)?;
                let doc = json!({"v": 1, "max_N": max_n, "N": found});
                let table = match found {
                    Some(k) => format!("splitting is {k}-dominated (least N up to {max_n})"),
                    None => format!("not N-dominated for any N ≤ {max_n}"),
                };
                ctx.emit(&serde_json::to_string_pretty(&doc).expect("json"), &table)?;
                return Ok(EXIT_OK);
            }
            let report = is_split_dominated(&c, &split, n)?;
            let table = format!(
                "N = {n}: {}\nworst ratio {:.6e} at base {}\nangle {:.6e}",
                if report.dominated { "dominated" } else { "not dominated" },
                report.worst_ratio,
                report.worst_base + 1,
                split.min_angle()
            );
            ctx.emit(&serde_json::to_string_pretty(&report).expect("json"), &table)?;
            Ok(EXIT_OK)
        }
        Command::Realify { input, budget } => {
            let c = load_cocycle(&input)?;
            synthesis(ctx, realify_with(&c, &budget.budget()?))
        }
        Command::PushModuli { input, budget } => {
            let c = load_cocycle(&input)?;
            synthesis(ctx, push_moduli_with(&c, &budget.budget()?))
        }
        Command::SmallAngle { input, budget } => {
            let c = load_cocycle(&input)?;
            synthesis(ctx, small_angle_with(&c, &budget.budget()?))
        }
        Command::Pipeline { input, budget } => {
            let c = load_cocycle(&input)?;
            match pipeline_small_angle(&c, &budget.budget()?) {
                Ok(o) => synthesis(ctx, Ok(o)),
                Err(f) => {
                    let done: Vec<&str> = f.stages.iter().map(|(n, _)| n.as_str()).collect();
                    Err(Failure::Domain(format!("{f} (completed stages: {done:?}; partial path has {} segments)", f.partial.segments().len())))
                }
            }
        }
        Command::Verify { input, samples } => {
            let o = SynthesisOutcome::from_json(&read(&input)?)?;
            let mut goals = o.goals.clone();
            if samples.is_some() {
                goals.samples = samples;
            }
            let certs = verify_outcome(&o, &goals)?;
            let doc = serde_json::to_string_pretty(&json!({"v": 1, "certificates": certs})).expect("json");
            ctx.emit(&doc, &render_table(&certs))?;
            Ok(if all_passed(&certs) { EXIT_OK } else { EXIT_DOMAIN })
        }
        Command::Glue { input, samples } => {
            let g = GluedMap::from_json(&read(&input)?)?;
            let size = layered_size(&LayeredMap::from(g.clone()), samples)?;
            let (r_in, r_out) = g.radii();
            let table = format!(
                "radii {r_in} < {r_out}, Lip(θ) = {:.6}, ‖B − A‖ = {:.6e}, size {:.6e} ({} samples)",
                g.lip(),
                crate::linalg::op_norm(&(g.inner() - g.outer())),
                size.size,
                size.sample_count
            );
            ctx.emit(&g.to_json(), &table)?;
            Ok(EXIT_OK)
        }
        Command::Size { input, samples } => {
            let g = LayeredMap::from_json(&read(&input)?)?;
            let size = layered_size(&g, samples)?;
            let table = format!("size {:.10e} over {} samples", size.size, size.sample_count);
            ctx.emit(&serde_json::to_string_pretty(&json!({"v": 1, "size": size})).expect("json"), &table)?;
            Ok(EXIT_OK)
        }
        Command::Concat { outer, inner, lambda } => {
            let g = LayeredMap::from_json(&read(&outer)?)?;
            let h = LayeredMap::from_json(&read(&inner)?)?;
            let scaled = h.layers().iter().map(|l| homothety_conjugate(l, lambda)).collect::<crate::Result<Vec<_>>>()?;
            let mut joined = g;
            for l in scaled {
                joined = concatenate_maps(&joined, &LayeredMap::from(l))?;
            }
            let table = format!("{} layers, outer radius {}", joined.layers().len(), joined.layers()[0].radii().1);
            ctx.emit(&joined.to_json(), &table)?;
            Ok(EXIT_OK)
        }
        Command::Member { input, point, index, window, n_max } => {
            let g = GluedMap::from_json(&read(&input)?)?;
            if window.len() != 2 {
                return Err(Failure::Usage("--window needs two values lo,hi".into()));
            }
            if point.len() != g.dim() {
                return Err(Failure::Usage(format!("--point needs {} coordinates", g.dim())));
            }
            let x = Vector::from_vec(point);
            let r = strong_stable_membership(&g, &x, index, (window[0], window[1]), n_max)?;
            let table = format!("member: {}\n{}", r.member, r.detail);
            ctx.emit(&serde_json::to_string_pretty(&r).expect("json"), &table)?;
            Ok(EXIT_OK)
        }
        Command::Gen { kind, dim, period, bound, seed, moduli } => {
            let mut spec = GeneratorSpec::new(kind, dim, period, bound, seed);
            spec.moduli = moduli;
            let c = generate(&spec)?;
            let table = format!("generated {:?} cocycle: dimension {dim}, period {period}, bound {:.6}", kind, bound_of(&c));
            if ctx.output.is_none() {
                ctx.json = true;
            }
            ctx.emit(&c.to_json(), &table)?;
            Ok(EXIT_OK)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv = std::iter::once("cocycle").chain(args.iter().copied());
        let code = run_with(argv, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors() {
        assert_eq!(call(&["frobnicate"]).0, EXIT_USAGE);
        assert_eq!(call(&[]).0, EXIT_USAGE);
        assert_eq!(call(&["analyze", "/nonexistent/file.json"]).0, EXIT_USAGE);
        assert_eq!(call(&["--help"]).0, EXIT_OK);
    }

    #[test]
    fn kinds_parse() {
        assert_eq!(parse_kind("det_one_2d").unwrap(), GeneratorKind::DetOne2d);
        assert_eq!(parse_kind("prescribed-moduli").unwrap(), GeneratorKind::PrescribedModuli);
        assert!(parse_kind("nope").is_err());
    }

    #[test]
    fn gen_prints_cocycle() {
        let (code, out, _) = call(&["gen", "--kind", "saddle", "--dim", "2", "--period", "4", "--bound", "2", "--seed", "1"]);
        assert_eq!(code, 0);
        let c = PeriodicCocycle::from_json(&out).unwrap();
        assert!(is_saddle(&c, 1e-9));
    }
}
