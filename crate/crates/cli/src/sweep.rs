use oinv_core::oracle::{oracle_quotient, Flavor, OracleError};
use oinv_core::relspace::{functional_sweep, relation_span, RelationOptions};
use oinv_core::sigma::TripleFilter;
use oinv_core::{Field, PrimeField, Rationals};
use serde_json::{json, Value};

use crate::{emit, Failure, Status, SweepArgs};

/// One grid point of a sweep.
#[derive(Debug, Clone, Copy)]
pub struct Point {
    pub n: usize,
    pub d: usize,
    pub p: u64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SweepOptions {
    pub filter: TripleFilter,
    pub quotients: bool,
    pub max_dim: u128,
}

/// A row of the sweep table and the failures found at it.
pub struct Row {
    pub doc: Value,
    pub violations: Vec<String>,
}

pub fn run(args: &SweepArgs) -> Result<Status, Failure> {
    let options = SweepOptions {
        filter: TripleFilter { plain_only: args.plain_triples_only, sorted_labels: args.sorted_labels },
        quotients: args.oracle,
        max_dim: args.max_dim,
    };
    let mut points = Vec::new();
    for &n in &args.n {
        for &d in &args.d {
            for &p in &args.p {
                points.push(Point { n, d, p });
            }
        }
    }
    let (doc, ok) = sweep(&points, options)?;
    emit(&doc, args.output.as_ref())?;
    Ok(if ok { Status::Ok } else { Status::Verdict })
}

/// Sweeps every point; the flag is false when some expectation failed.
pub fn sweep(points: &[Point], options: SweepOptions) -> Result<(Value, bool), Failure> {
    let mut rows = Vec::new();
    let mut ok = true;
    for &pt in points {
        if pt.n == 0 || pt.d == 0 {
            return Err(Failure::usage("n and d must be positive"));
        }
        let row = match pt.p {
            0 => sweep_point(&Rationals, pt, options)?,
            p => sweep_point(&PrimeField::new(p).map_err(|e| Failure::usage(e.to_string()))?, pt, options)?,
        };
        eprintln!(
            "n = {}, d = {}, p = {}: {} generators, {} nonzero sums, {} nonzero gammas{}",
            pt.n,
            pt.d,
            pt.p,
            row.doc["generators"],
            row.doc["nonzero_sums"],
            row.doc["nonzero_gammas"],
            if row.violations.is_empty() { String::new() } else { format!("  FAILURE: {}", row.violations.join("; ")) }
        );
        ok &= row.violations.is_empty();
        rows.push(row.doc);
    }
    Ok((json!({ "tool": {"name": "oinv", "version": env!("CARGO_PKG_VERSION")}, "rows": rows, "passed": ok }), ok))
}

fn sweep_point<F: Field>(field: &F, pt: Point, options: SweepOptions) -> Result<Row, Failure> {
    let report = functional_sweep(field, pt.n, pt.d, options.filter);
    let p = pt.p as usize;
    let sum_vanishes = p > 0 && p <= pt.n;
    let gamma_vanishes = p > 0 && 2 * p <= pt.n;
    let mut violations = Vec::new();
    if sum_vanishes && report.nonzero_sums > 0 {
        violations.push(format!("{} generators with nonzero coefficient sum", report.nonzero_sums));
    }
    if gamma_vanishes && report.nonzero_gammas > 0 {
        violations.push(format!("{} generators with nonzero gamma", report.nonzero_gammas));
    }
    let first = |x: &Option<(oinv_core::sigma::MultilinearTriple, F::Elem)>| {
        x.as_ref().map(|(t, v)| json!({"triple": t.to_string(), "value": field.render(v)}))
    };
    let mut doc = json!({
        "n": pt.n,
        "d": pt.d,
        "p": pt.p,
        "generators": report.generators,
        "nonzero_sums": report.nonzero_sums,
        "nonzero_gammas": report.nonzero_gammas,
        "first_nonzero_sum": first(&report.first_nonzero_sum),
        "first_nonzero_gamma": first(&report.first_nonzero_gamma),
        "sums_must_vanish": sum_vanishes,
        "gammas_must_vanish": gamma_vanishes,
    });
    if options.quotients {
        let space = relation_span(
            field,
            pt.n,
            pt.d,
            RelationOptions {
                plain_triples_only: options.filter.plain_only,
                track_certificates: false,
                ..RelationOptions::default()
            },
        );
        let oracle = oracle_quotient(field, pt.n, pt.d, Flavor::General, options.max_dim).map_err(|e| match e {
            OracleError::BudgetExceeded { .. } => Failure::resource(format!("oracle: {e}")),
            e => Failure::usage(format!("oracle: {e}")),
        })?;
        if space.quotient_dim() != oracle.quotient_dim() {
            violations.push(format!(
                "engine quotient {} differs from oracle quotient {}",
                space.quotient_dim(),
                oracle.quotient_dim()
            ));
        }
        let obj = doc.as_object_mut().expect("object");
        obj.insert("engine_rank".into(), json!(space.rank()));
        obj.insert("engine_quotient".into(), json!(space.quotient_dim()));
        obj.insert("oracle_quotient".into(), json!(oracle.quotient_dim()));
    }
    doc.as_object_mut().expect("object").insert("violations".into(), json!(violations));
    Ok(Row { doc, violations })
}
