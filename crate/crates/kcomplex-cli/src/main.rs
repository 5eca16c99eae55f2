use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use kcomplex::absorbing::{absorb, build_absorber};
use kcomplex::barrier::{
    divisibility_barrier_search_exhaustive, space_barrier_search, verify_divisibility_barrier,
    verify_space_barrier,
};
use kcomplex::io::{read_khg, write_khg};
use kcomplex::lp::{extract_weight_disjoint, max_pair_load, verify_fractional};
use kcomplex::oracle::{brute_force_fractional, brute_force_pm, generate, GenSpec};
use kcomplex::pipeline::{
    decide, min_part_size, prepare, run_theorem711, Certificate, PipelineConfig,
};
use kcomplex::{Allocation, Error, IndexVector, KSystem, Rational, Scalar, Vertex};

const EXIT_INCONCLUSIVE: u8 = 2;
const EXIT_INPUT: u8 = 3;

/// `println!` that ignores a closed stdout.
macro_rules! out {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

#[derive(Parser)]
#[command(
    name = "kcomplex",
    version,
    about = "Perfect matchings in dense k-complexes"
)]
struct Cli {
    /// Pipeline configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Machine-readable output on stdout.
    #[arg(long, global = true)]
    json: bool,
    /// Re-verify certificates before printing them (default).
    #[arg(long, global = true, overrides_with = "no_verify")]
    verify: bool,
    #[arg(long = "no-verify", global = true, overrides_with = "verify")]
    no_verify: bool,
    /// Allocation as a JSON list of index vectors, e.g. `[[1,1,0],[0,1,1]]`.
    #[arg(long, global = true)]
    alloc: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Barrier searches, then the matching pipeline.
    Decide { file: PathBuf },
    /// The absorber / fractional / rounding / absorption pipeline.
    Match { file: PathBuf },
    /// Weight-disjoint perfect fractional matchings.
    Frac {
        file: PathBuf,
        #[arg(long)]
        ell: usize,
    },
    /// Space and divisibility barrier searches.
    Barriers { file: PathBuf },
    /// Writes a generated instance in khg format.
    Gen { spec: PathBuf },
    /// Builds an absorber and absorbs a random leftover.
    AbsorbDemo {
        file: PathBuf,
        /// Leftover size; defaults to the absorber's cap.
        #[arg(long)]
        leftover: Option<usize>,
    },
    /// Exact perfect and fractional matching checks.
    Oracle { file: PathBuf },
}

struct Input(String);

impl From<Error> for Input {
    fn from(e: Error) -> Self {
        Input(e.to_string())
    }
}

struct Ctx {
    cfg: PipelineConfig,
    alloc: Option<Allocation>,
    json: bool,
    verify: bool,
}

fn load(path: &Path) -> Result<KSystem, Input> {
    let file = read_khg(path).map_err(|e| Input(format!("{}: {e}", path.display())))?;
    Ok(file.into_complex(true)?.into_system())
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, Input> {
    let mut cfg = match &cli.config {
        Some(p) => {
            let text =
                std::fs::read_to_string(p).map_err(|e| Input(format!("{}: {e}", p.display())))?;
            PipelineConfig::from_json(&text)?
        }
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn load_alloc(path: &Path, k: usize, r: usize) -> Result<Allocation, Input> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Input(format!("{}: {e}", path.display())))?;
    let raw: Vec<Vec<i64>> =
        serde_json::from_str(&text).map_err(|e| Input(format!("allocation: {e}")))?;
    let indices: Vec<IndexVector> = raw.into_iter().map(IndexVector).collect();
    Ok(Allocation::from_index_multiset(&indices, k, r)?)
}

fn emit(ctx: &Ctx, value: &Value, human: &str) {
    if ctx.json {
        out!(
            "{}",
            serde_json::to_string_pretty(value).expect("values serialise")
        );
    } else {
        out!("{human}");
    }
}

fn certificate(ctx: &Ctx, sys: &KSystem, cert: Certificate) -> Result<u8, Input> {
    let cert = if ctx.verify && !cert.verify(sys, ctx.alloc.as_ref())? {
        cert.demote("certificate failed re-verification")
    } else {
        cert
    };
    if ctx.json {
        out!("{}", cert.to_json());
    } else {
        out!("{}", cert.tag());
        for s in &cert.diagnostics().stages {
            out!("  {}: {}", s.stage, s.outcome);
        }
        match &cert {
            Certificate::PerfectMatching(p) => {
                out!(
                    "  {} edges, alpha = {}",
                    p.matching.len(),
                    p.stats.alpha.to_text()
                );
            }
            Certificate::SpaceBarrier(p) => {
                out!(
                    "  p = {}, |S| = {}",
                    p.certificate.p,
                    p.certificate.vertices().len()
                );
            }
            Certificate::DivisibilityBarrier(p) => {
                out!(
                    "  {} parts, i(V) = {:?}",
                    p.certificate.partition.len(),
                    p.certificate.vertex_index.0
                );
            }
            Certificate::Inconclusive(_) => {}
        }
    }
    Ok(if cert.is_conclusive() {
        0
    } else {
        EXIT_INCONCLUSIVE
    })
}

fn frac(ctx: &Ctx, sys: &KSystem, ell: usize) -> Result<u8, Input> {
    let (work, f) = prepare(sys, ctx.alloc.as_ref())?;
    let ex = extract_weight_disjoint::<Rational>(&work, &f, ell)?;
    let mut perfect = true;
    if ctx.verify {
        for g in &ex.matchings {
            let rep = verify_fractional(&work, g, &f)?;
            perfect &= rep.is_perfect() && rep.is_balanced();
        }
    }
    let load = max_pair_load(&ex.matchings);
    let value = json!({
        "requested": ex.requested,
        "extracted": ex.matchings.len(),
        "stop_reason": ex.stop_reason,
        "pair_bound_holds": ex.pair_bound_holds,
        "min_pair_weight": ex.min_pair_weight.to_text(),
        "max_pair_load": load.to_text(),
        "verified": ctx.verify && perfect,
        "rounds": ex.rounds,
        "matchings": ex.matchings,
    });
    let human = format!(
        "{} of {} fractional matchings, max pair load {}{}",
        ex.matchings.len(),
        ex.requested,
        load.to_text(),
        ex.stop_reason
            .as_deref()
            .map(|r| format!(" ({r})"))
            .unwrap_or_default()
    );
    emit(ctx, &value, &human);
    if ctx.verify && !perfect {
        return Err(Input("extracted family failed verification".into()));
    }
    Ok(if ex.completed() { 0 } else { EXIT_INCONCLUSIVE })
}

fn barriers(ctx: &Ctx, sys: &KSystem) -> Result<u8, Input> {
    let h = &ctx.cfg.hierarchy;
    let space = space_barrier_search(sys, h.beta, &ctx.cfg.space_config())?;
    let min_part = min_part_size(sys, h);
    let div = divisibility_barrier_search_exhaustive(sys, h.mu, min_part)?;
    let space_ok = match &space.certificate {
        Some(c) => !ctx.verify || verify_space_barrier(sys, c)?,
        None => false,
    };
    let div_ok = match div.as_ref().and_then(|d| d.certificate.as_ref()) {
        Some(c) => {
            !c.vertex_index_in_lattice && (!ctx.verify || verify_divisibility_barrier(sys, c)?)
        }
        None => false,
    };
    let value = json!({ "space": space, "divisibility": div, "space_verified": space_ok, "divisibility_verified": div_ok });
    let human = format!(
        "space barrier: {}\ndivisibility barrier: {}",
        if space_ok { "found" } else { "none" },
        match &div {
            None => "not searched (too large)",
            Some(_) if div_ok => "found",
            Some(_) => "none",
        }
    );
    emit(ctx, &value, &human);
    Ok(if space_ok || div_ok {
        0
    } else {
        EXIT_INCONCLUSIVE
    })
}

fn gen(ctx: &Ctx, path: &Path) -> Result<u8, Input> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Input(format!("{}: {e}", path.display())))?;
    let spec: GenSpec = serde_json::from_str(&text).map_err(|e| Input(format!("spec: {e}")))?;
    let j = generate(&spec)?;
    let khg = write_khg(j.as_system(), false);
    if ctx.json {
        emit(ctx, &json!({ "spec": spec, "khg": khg }), "");
    } else {
        let _ = std::io::stdout().write_all(khg.as_bytes());
    }
    Ok(0)
}

fn absorb_demo(ctx: &Ctx, sys: &KSystem, leftover: Option<usize>) -> Result<u8, Input> {
    let (work, f) = prepare(sys, ctx.alloc.as_ref())?;
    let acfg = ctx.cfg.absorber_config();
    let state = match build_absorber(&work, &f, &acfg) {
        Ok(s) => s,
        Err(
            e @ (Error::AbsorberUnavailable { .. }
            | Error::BudgetExhausted(_)
            | Error::PreconditionFailed(_)),
        ) => {
            emit(
                ctx,
                &json!({ "absorber": Value::Null, "error": e.to_string() }),
                &format!("no absorber: {e}"),
            );
            return Ok(EXIT_INCONCLUSIVE);
        }
        Err(e) => return Err(e.into()),
    };
    let k = work.k();
    let size = leftover.unwrap_or(state.u_max).min(state.u_max) / k * k;
    let mut free: Vec<Vertex> = work
        .vertices()
        .into_iter()
        .filter(|v| state.w.binary_search(v).is_err())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(acfg.seed);
    free.shuffle(&mut rng);
    let mut u: Vec<Vertex> = free.into_iter().take(size).collect();
    u.sort_unstable();
    let summary = json!({
        "absorbers": state.family.len(),
        "w": state.w.len(),
        "u_max": state.u_max,
        "parts": state.partition.len(),
        "audit": state.audit,
    });
    match absorb(&work, &state, &u) {
        Ok(a) => {
            let verified = a.matching.is_in(&work) && {
                let mut want: Vec<Vertex> = state.w.iter().chain(&u).copied().collect();
                want.sort_unstable();
                a.matching.vertices() == want
            };
            let value = json!({
                "absorber": summary,
                "leftover": u,
                "matching": a.matching,
                "groups": a.groups,
                "verified": verified,
            });
            let human = format!(
                "absorbed {} leftover vertices into {} absorbers; matching of {} edges {}",
                u.len(),
                state.family.len(),
                a.matching.len(),
                if verified {
                    "verified"
                } else {
                    "FAILED verification"
                }
            );
            emit(ctx, &value, &human);
            Ok(if verified { 0 } else { EXIT_INCONCLUSIVE })
        }
        Err(e) => {
            emit(
                ctx,
                &json!({ "absorber": summary, "leftover": u, "error": e.to_string() }),
                &format!("absorption failed: {e}"),
            );
            Ok(EXIT_INCONCLUSIVE)
        }
    }
}

fn oracle(ctx: &Ctx, sys: &KSystem) -> Result<u8, Input> {
    let (work, _) = prepare(sys, ctx.alloc.as_ref())?;
    let pm = brute_force_pm(&work)?;
    let frac = brute_force_fractional(&work)?;
    let value = json!({ "perfect_matching": pm, "fractional_feasible": frac });
    let human = format!(
        "perfect matching: {}\nperfect fractional matching: {}",
        if pm.is_some() { "yes" } else { "no" },
        if frac { "yes" } else { "no" }
    );
    emit(ctx, &value, &human);
    Ok(0)
}

fn run(cli: Cli) -> Result<u8, Input> {
    let cfg = load_config(&cli)?;
    let mut ctx = Ctx {
        cfg,
        alloc: None,
        json: cli.json,
        verify: cli.verify || !cli.no_verify,
    };
    let sys = match &cli.cmd {
        Cmd::Gen { spec } => return gen(&ctx, spec),
        Cmd::Decide { file }
        | Cmd::Match { file }
        | Cmd::Frac { file, .. }
        | Cmd::Barriers { file }
        | Cmd::AbsorbDemo { file, .. }
        | Cmd::Oracle { file } => load(file)?,
    };
    if let Some(p) = &cli.alloc {
        let r = kcomplex::barrier::barrier_partition(&sys).len();
        ctx.alloc = Some(load_alloc(p, sys.k(), r)?);
    }
    match cli.cmd {
        Cmd::Decide { .. } => {
            let c = decide(&sys, ctx.alloc.as_ref(), &ctx.cfg);
            certificate(&ctx, &sys, c)
        }
        Cmd::Match { .. } => {
            let c = run_theorem711(&sys, ctx.alloc.as_ref(), &ctx.cfg);
            certificate(&ctx, &sys, c)
        }
        Cmd::Frac { ell, .. } => frac(&ctx, &sys, ell),
        Cmd::Barriers { .. } => barriers(&ctx, &sys),
        Cmd::AbsorbDemo { leftover, .. } => absorb_demo(&ctx, &sys, leftover),
        Cmd::Oracle { .. } => oracle(&ctx, &sys),
        Cmd::Gen { .. } => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_INPUT)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
