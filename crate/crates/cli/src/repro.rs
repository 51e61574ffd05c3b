//! Fixed reproduction runs. Each prints the claim it checks, runs it, and
//! exits nonzero unless every expectation holds.

use oinv_core::oracle::{Flavor, Verdict};
use oinv_core::sigma::TripleFilter;
use serde_json::{json, Value};

use crate::check::{decide, Job};
use crate::sweep::{sweep, Point, SweepOptions};
use crate::{emit, Failure, ReproArgs, Status, Strategy};

fn job(n: usize, d: usize, p: u64, flavor: Flavor, max_dim: u128) -> Job {
    Job {
        n,
        d,
        p,
        flavor,
        target: None,
        engine: true,
        oracle: true,
        strategy: Strategy::Auto,
        oracle_strategy: Strategy::Auto,
        plain_triples_only: false,
        certificates: true,
        seed: 0,
        samples: 20,
        max_dim,
    }
}

fn finish(claim: &str, runs: Vec<Value>, ok: bool, args: &ReproArgs) -> Result<Status, Failure> {
    eprintln!("{}: {claim}", if ok { "CONFIRMED" } else { "NOT CONFIRMED" });
    emit(&json!({ "claim": claim, "runs": runs, "passed": ok }), args.output.as_ref())?;
    Ok(if ok { Status::Ok } else { Status::Verdict })
}

/// Runs the jobs and requires each to end with `expected` and a clean status.
fn expect_all(jobs: Vec<Job>, expected: Verdict) -> Result<(Vec<Value>, bool), Failure> {
    let mut runs = Vec::new();
    let mut ok = true;
    for j in jobs {
        let outcome = decide(&j)?;
        ok &= outcome.status == Status::Ok && outcome.verdict == Some(expected);
        runs.push(outcome.doc);
    }
    Ok((runs, ok))
}

pub fn general(args: &ReproArgs) -> Result<Status, Failure> {
    let claim = "for 0 < p <= n, tr(X1...Xd) and tr(X1+...Xd+) are indecomposable (n = 3, p = 3, d = 4, 5)";
    eprintln!("claim: {claim}");
    let mut jobs = Vec::new();
    for d in [4, 5] {
        jobs.push(job(3, d, 3, Flavor::General, args.max_dim));
        jobs.push(job(3, d, 3, Flavor::Symmetric, args.max_dim));
    }
    let (runs, ok) = expect_all(jobs, Verdict::Indecomposable)?;
    finish(claim, runs, ok, args)
}

pub fn skew(args: &ReproArgs) -> Result<Status, Failure> {
    let claim = "for 0 < p <= n/2 and d even, tr(X1-...Xd-) is indecomposable, witnessed by gamma = 1 + (-1)^d (n = 6, p = 3, d = 4)";
    eprintln!("claim: {claim}");
    let (runs, mut ok) = expect_all(vec![job(6, 4, 3, Flavor::Skew, args.max_dim)], Verdict::Indecomposable)?;
    // 1 + (-1)^4 = 2, rendered as -1 in F_3
    ok &= runs[0]["engine"]["witnesses"]["gamma"] == json!("-1");
    ok &= runs[0]["oracle"]["dimension"] == json!(50625);
    finish(claim, runs, ok, args)
}

pub fn sum_sweep(args: &ReproArgs) -> Result<Status, Failure> {
    let claim = "for 0 < p <= n every relation generator has coefficient sum 0 mod p (n = 3, d <= 5, p = 3); for p = 5 > n some generator does not";
    eprintln!("claim: {claim}");
    let points3: Vec<Point> = (1..=5).map(|d| Point { n: 3, d, p: 3 }).collect();
    let points5: Vec<Point> = (1..=5).map(|d| Point { n: 3, d, p: 5 }).collect();
    let (zero, ok3) = sweep(&points3, SweepOptions::default())?;
    let (contrast, _) = sweep(&points5, SweepOptions::default())?;
    let nonzero: u64 = contrast["rows"].as_array().expect("rows").iter().map(|r| r["nonzero_sums"].as_u64().unwrap_or(0)).sum();
    finish(claim, vec![zero, contrast], ok3 && nonzero > 0, args)
}

pub fn gamma_sweep(args: &ReproArgs) -> Result<Status, Failure> {
    let claim = "for 0 < p <= n/2 every relation generator has gamma 0 mod p (n = 6, p = 3, d = 4 and d = 7)";
    eprintln!("claim: {claim}");
    // d = 4 <= n has no generators; d = 7 is swept with one letter order per
    // relabelling orbit
    let (small, ok_small) = sweep(&[Point { n: 6, d: 4, p: 3 }], SweepOptions::default())?;
    let sorted = SweepOptions {
        filter: TripleFilter { plain_only: false, sorted_labels: true },
        ..SweepOptions::default()
    };
    let (large, ok_large) = sweep(&[Point { n: 6, d: 7, p: 3 }], sorted)?;
    let nonvacuous = large["rows"][0]["generators"].as_u64().unwrap_or(0) > 0;
    finish(claim, vec![small, large], ok_small && ok_large && nonvacuous, args)
}

pub fn do3_bound(args: &ReproArgs) -> Result<Status, Failure> {
    let claim = "for p != 2, 3 every invariant of 3x3 matrices of degree above 6 is decomposable (multilinear, d = 7, p = 5)";
    eprintln!("claim: {claim}");
    let mut j = job(3, 7, 5, Flavor::General, args.max_dim);
    j.samples = 5;
    let (runs, ok) = expect_all(vec![j], Verdict::Decomposable)?;
    finish(claim, runs, ok, args)
}
