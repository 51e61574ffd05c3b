use std::time::Instant;

use oinv_core::isotypic::{isotypic_relation_span_with, ComponentOutcome};
use oinv_core::oracle::{
    faithfulness_check, oracle_decide, oracle_decide_isotypic, Flavor, OracleError, OracleOutcome, Verdict,
};
use oinv_core::relspace::{relation_span, Decision, RelationOptions, TraceVector};
use oinv_core::text::parse_trace_vector;
use oinv_core::{Field, PrimeField, Rationals};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::{emit, CheckArgs, Failure, Status, Strategy};

/// Resolved inputs of one check.
#[derive(Debug, Clone)]
pub struct Job {
    pub n: usize,
    pub d: usize,
    pub p: u64,
    pub flavor: Flavor,
    /// `None` means `tr(x1 ... xd)`.
    pub target: Option<String>,
    pub engine: bool,
    pub oracle: bool,
    pub strategy: Strategy,
    pub oracle_strategy: Strategy,
    pub plain_triples_only: bool,
    pub certificates: bool,
    pub seed: u64,
    pub samples: usize,
    pub max_dim: u128,
}

/// Result of [`decide`]: the JSON document and the exit status it implies.
pub struct Outcome {
    pub doc: Value,
    pub status: Status,
    pub verdict: Option<Verdict>,
}

pub fn run(args: &CheckArgs) -> Result<Status, Failure> {
    let job = resolve(args)?;
    let outcome = decide(&job)?;
    emit(&outcome.doc, args.output.as_ref())?;
    Ok(outcome.status)
}

fn resolve(args: &CheckArgs) -> Result<Job, Failure> {
    if args.n == 0 || args.d == 0 {
        return Err(Failure::usage("n and d must be positive"));
    }
    let implied = if args.target_sym {
        Some(Flavor::Symmetric)
    } else if args.target_antisym {
        Some(Flavor::Skew)
    } else {
        None
    };
    let flavor = match (args.flavor, implied) {
        (Some(f), Some(g)) if f != g => {
            return Err(Failure::usage(format!("--flavor {f} contradicts the {g} target flag")))
        }
        (Some(f), _) | (None, Some(f)) => f,
        (None, None) => Flavor::General,
    };
    let engine = if args.p == 2 {
        if !(args.unsupported_allow_p2 && args.oracle) {
            return Err(Failure::usage("characteristic 2 is not supported"));
        }
        eprintln!("warning: p = 2 is unsupported; running the oracle only");
        false
    } else {
        true
    };
    if args.d >= 7 && !args.slow {
        return Err(Failure::resource(format!(
            "degree {} needs --slow (long run)",
            args.d
        )));
    }
    Ok(Job {
        n: args.n,
        d: args.d,
        p: args.p,
        flavor,
        target: args.target.clone(),
        engine,
        oracle: args.oracle,
        strategy: args.strategy,
        oracle_strategy: args.oracle_strategy,
        plain_triples_only: args.plain_triples_only,
        certificates: !args.no_certificate,
        seed: args.seed,
        samples: args.samples,
        max_dim: args.max_dim,
    })
}

/// Runs a job over the field of characteristic `job.p`.
pub fn decide(job: &Job) -> Result<Outcome, Failure> {
    match job.p {
        0 => decide_in(&Rationals, job),
        p => {
            let field = if job.engine {
                PrimeField::new(p)
            } else {
                PrimeField::new_unsupported(p)
            }
            .map_err(|e| Failure::usage(e.to_string()))?;
            decide_in(&field, job)
        }
    }
}

fn verdict_of(decomposable: bool) -> Verdict {
    if decomposable {
        Verdict::Decomposable
    } else {
        Verdict::Indecomposable
    }
}

/// The general-flavor invariant whose decomposability matches that of the
/// target on the flavor's matrices: `x_k -> x_k + x_k^T` for symmetric and
/// `x_k -> x_k - x_k^T` for skew slots.
pub fn lift<F: Field>(target: &TraceVector<F>, flavor: Flavor) -> TraceVector<F> {
    match flavor {
        Flavor::General => target.clone(),
        Flavor::Symmetric => target.substitute_pm(1),
        Flavor::Skew => target.substitute_pm(-1),
    }
}

fn decide_in<F: Field>(field: &F, job: &Job) -> Result<Outcome, Failure> {
    let target = match &job.target {
        Some(text) => parse_trace_vector(field, job.d, text).map_err(|e| Failure::usage(format!("target: {e}")))?,
        None => TraceVector::identity(field.clone(), job.d),
    };
    let mut status = Status::Ok;
    let mut problems: Vec<String> = Vec::new();

    let mut engine_doc = Value::Null;
    let mut engine_verdict = None;
    let mut engine_ms = None;
    if job.engine {
        let start = Instant::now();
        let (verdict, doc, ok) = run_engine(field, job, &lift(&target, job.flavor));
        engine_ms = Some(start.elapsed().as_millis() as u64);
        if !ok {
            problems.push("engine certificate or witness check failed".into());
        }
        engine_verdict = Some(verdict);
        engine_doc = doc;
    }

    let mut oracle_doc = Value::Null;
    let mut faith_doc = Value::Null;
    let mut oracle_verdict = None;
    let mut oracle_ms = None;
    if job.oracle {
        let start = Instant::now();
        let isotypic = job.flavor == Flavor::General
            && match job.oracle_strategy {
                Strategy::Auto => job.d >= 6,
                Strategy::Direct => false,
                Strategy::Isotypic => true,
            };
        if job.oracle_strategy == Strategy::Isotypic && job.flavor != Flavor::General {
            return Err(Failure::usage("the isotypic oracle applies to the general flavor only"));
        }
        let outcome = if isotypic {
            oracle_decide_isotypic(field, &target, job.n, job.max_dim)
        } else {
            oracle_decide(field, &target, job.n, job.flavor, job.max_dim)
        }
        .map_err(|e| match e {
            OracleError::BudgetExceeded { .. } => Failure::resource(format!("oracle: {e}")),
            e => Failure::usage(format!("oracle: {e}")),
        })?;
        oracle_ms = Some(start.elapsed().as_millis() as u64);
        oracle_verdict = Some(outcome.verdict);
        oracle_doc = oracle_json(&outcome, job.flavor, if isotypic { "isotypic" } else { "direct" });

        let mut rng = ChaCha8Rng::seed_from_u64(job.seed);
        let report = faithfulness_check(field, &target, job.n, job.flavor, job.samples, &mut rng);
        if !report.passed() {
            problems.push("random evaluation disagrees with the coefficient vector".into());
        }
        faith_doc = json!({
            "seed": job.seed,
            "samples": report.samples,
            "mismatches": report.mismatches,
            "nonzero_samples": report.nonzero_samples,
            "vector_is_zero": report.vector_is_zero,
            "passed": report.passed(),
        });
    }

    let agreement = match (engine_verdict, oracle_verdict) {
        (Some(a), Some(b)) => {
            if a != b {
                problems.push(format!("engine says {a}, oracle says {b}"));
            }
            Value::Bool(a == b)
        }
        _ => Value::Null,
    };
    if !problems.is_empty() {
        status = Status::Verdict;
    }
    let verdict = engine_verdict.or(oracle_verdict);

    eprintln!(
        "n = {}, d = {}, p = {}, flavor = {}: {}",
        job.n,
        job.d,
        job.p,
        job.flavor,
        verdict.map_or("-".to_string(), |v| v.to_string())
    );
    for p in &problems {
        eprintln!("FAILURE: {p}");
    }

    let doc = json!({
        "tool": {"name": "oinv", "version": env!("CARGO_PKG_VERSION")},
        "parameters": {
            "n": job.n,
            "d": job.d,
            "p": job.p,
            "flavor": job.flavor.to_string(),
            "target": target.to_string(),
            "plain_triples_only": job.plain_triples_only,
            "certificates": job.certificates,
            "oracle": job.oracle,
            "seed": job.seed,
            "samples": job.samples,
        },
        "verdict": verdict.map(|v| v.to_string()),
        "engine": engine_doc,
        "oracle": oracle_doc,
        "faithfulness": faith_doc,
        "agreement": agreement,
        "problems": problems,
        "timings_ms": {"engine": engine_ms, "oracle": oracle_ms},
    });
    Ok(Outcome { doc, status, verdict })
}

pub fn oracle_json(o: &OracleOutcome, flavor: Flavor, route: &str) -> Value {
    json!({
        "route": route,
        "flavor": flavor.to_string(),
        "verdict": o.verdict.to_string(),
        "invariant_span_rank": o.invariant_span_rank,
        "decomposable_span_rank": o.decomposable_span_rank,
        "quotient_dim": o.quotient_dim(),
        "dimension": o.dimension,
    })
}

/// Decides `lifted` with the relation engine. Returns the verdict, its
/// document, and whether every check passed.
fn run_engine<F: Field>(field: &F, job: &Job, lifted: &TraceVector<F>) -> (Verdict, Value, bool) {
    let options = RelationOptions {
        plain_triples_only: job.plain_triples_only,
        track_certificates: job.certificates,
        ..RelationOptions::default()
    };
    let isotypic = match job.strategy {
        Strategy::Auto => job.d >= 7,
        Strategy::Direct => false,
        Strategy::Isotypic => true,
    };
    let sum = lifted.sum_of_coefficients();
    let gamma = lifted.gamma();
    let (decomposable, mut doc, verified) = if isotypic {
        let started = Instant::now();
        let space = isotypic_relation_span_with(field, job.n, job.d, options, |s| {
            if job.d >= 7 {
                eprintln!(
                    "  [{:>6.1}s] {} triples, rank {} of {}",
                    started.elapsed().as_secs_f64(),
                    s.triples_consumed(),
                    s.rank(),
                    s.basis_size()
                );
            }
        });
        let decision = space.decide(lifted).expect("degrees match");
        let decomposable = decision.is_decomposable();
        let verified = (job.certificates || !decomposable).then(|| space.verify(lifted, &decision));
        let absorbed = decision
            .components
            .iter()
            .filter(|(_, o)| matches!(o, ComponentOutcome::Absorbed { .. }))
            .count();
        let cited: std::collections::BTreeSet<usize> = decision
            .components
            .iter()
            .flat_map(|(_, o)| match o {
                ComponentOutcome::Absorbed { terms } => terms.iter().map(|(g, _)| *g).collect(),
                ComponentOutcome::Residue { .. } => Vec::new(),
            })
            .collect();
        let doc = json!({
            "strategy": "isotypic",
            "rank": space.rank(),
            "basis_size": space.basis_size(),
            "quotient_dim": space.quotient_dim(),
            "triples_consumed": space.triples_consumed(),
            "saturated": space.is_saturated(),
            "certificate": {
                "kind": "components",
                "characters": decision.components.len(),
                "absorbed": absorbed,
                "obstructions": decision.obstructions().collect::<Vec<_>>(),
                "generators_cited": cited.len(),
                "generators": space.generators().iter().map(|t| t.to_string()).collect::<Vec<_>>(),
            },
        });
        (decomposable, doc, verified)
    } else {
        let space = relation_span(field, job.n, job.d, options);
        let decision = space.decide(lifted).expect("degrees match");
        let decomposable = decision.is_decomposable();
        let verified = (job.certificates || !decomposable).then(|| space.verify(lifted, &decision));
        let certificate = match &decision {
            Decision::Decomposable { terms } if job.certificates => json!({
                "kind": "combination",
                "terms": terms.iter().map(|t| json!({
                    "coefficient": field.render(&t.coefficient),
                    "triple": t.triple.to_string(),
                })).collect::<Vec<_>>(),
            }),
            Decision::Decomposable { .. } => json!({"kind": "untracked"}),
            Decision::Indecomposable { residue, .. } => json!({
                "kind": "residue",
                "residue": residue.to_string(),
            }),
        };
        let doc = json!({
            "strategy": "direct",
            "rank": space.rank(),
            "basis_size": space.basis_size(),
            "quotient_dim": space.quotient_dim(),
            "triples_consumed": space.triples_consumed(),
            "saturated": space.is_saturated(),
            "certificate": certificate,
        });
        (decomposable, doc, verified)
    };

    // Nonzero functionals force indecomposability when they vanish on all
    // relations: the coefficient sum for 0 < p <= n, the uniform-decoration
    // functional for 0 < p <= n / 2.
    let p = job.p as usize;
    let sum_witness = p > 0 && p <= job.n && !field.is_zero(&sum);
    let gamma_witness = p > 0 && 2 * p <= job.n && !field.is_zero(&gamma);
    let witness_ok = !(decomposable && (sum_witness || gamma_witness));
    let obj = doc.as_object_mut().expect("object");
    obj.insert("target".into(), json!(if job.d <= 6 { Some(lifted.to_string()) } else { None }));
    obj.insert("verdict".into(), json!(verdict_of(decomposable).to_string()));
    obj.insert("verified".into(), json!(verified));
    obj.insert(
        "witnesses".into(),
        json!({
            "sum_of_coefficients": field.render(&sum),
            "gamma": field.render(&gamma),
            "sum_forces_indecomposable": sum_witness,
            "gamma_forces_indecomposable": gamma_witness,
        }),
    );
    (verdict_of(decomposable), doc, verified != Some(false) && witness_ok)
}
