//! Command implementations. Each returns a report and an exit code.

use serde_json::{json, Value};

use super::io::{parse_problem, read_input, FarkasSystem, Input};
use super::report::{LevelValue, RunReport};
use super::{CertifyArgs, CliError, FarkasArgs, PointArgs, SolveArgs, EXIT_HYPOTHESES, EXIT_INDETERMINATE, EXIT_OK};
use crate::bilevel::{ball_robust_feasible, build_single_level, robust_feasible, BilevelProblem, UncertaintyKind};
use crate::conic::SolverSettings;
use crate::farkas::{
    certificate_residuals, check_implication_sampled, exact_certificate_status, find_certificate, verify_certificate,
    FarkasOptions, SamplingOptions,
};
use crate::lowerlevel::{is_robust_solution, solve_lower_robust};
use crate::sos::{certify_global, check_hypotheses, run_hierarchy, HierarchyOptions, LevelSolution, LevelStatus};
use crate::uncertainty::{closedness_sufficient, Closedness};

type Outcome = Result<(RunReport, i32), CliError>;

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report values serialize")
}

fn closedness_name(c: Closedness) -> &'static str {
    match c {
        Closedness::Polytope => "polytope",
        Closedness::Slater => "slater",
        Closedness::Unknown => "unknown",
    }
}

const CLOSEDNESS_CAVEAT: &str =
    "closedness unknown: without a closed characteristic cone a missing certificate does not refute the claim";

pub fn check_farkas(args: &FarkasArgs) -> Outcome {
    let input = read_input(&args.file)?;
    let sys = FarkasSystem::from_json(&input.text)?;
    let p = args
        .p
        .clone()
        .or_else(|| sys.p.clone())
        .ok_or_else(|| CliError::Parse("no inequality coefficients: give --p or a `p` field".into()))?;
    let r = args
        .r
        .or(sys.r)
        .ok_or_else(|| CliError::Parse("no right-hand side: give --r or an `r` field".into()))?;
    if p.len() != sys.n {
        return Err(CliError::Parse(format!(
            "p has length {}, expected n = {}",
            p.len(),
            sys.n
        )));
    }
    let cons = &sys.constraints;
    let mut report = RunReport::new("check-farkas");
    report.input_digest = Some(input.digest);

    let cert = find_certificate(&p, r, cons)?;
    // Without a certificate, ask the solver to refute the exact system.
    let exact_system = match cert {
        Some(_) => None,
        None => Some(exact_certificate_status(&p, r, cons, &FarkasOptions::default())?),
    };
    let closedness = closedness_sufficient(cons, &vec![0.0; cons.len()])?;
    let opts = SamplingOptions {
        seed: args.seed,
        tol: args.tol,
        ..Default::default()
    };
    let implication = check_implication_sampled(&p, r, cons, args.samples, &opts)?;

    let (cert_text, residuals, verified) = match &cert {
        Some(c) => {
            let res = certificate_residuals(c, &p, r, cons)?;
            let ok = verify_certificate(c, &p, r, cons, args.tol);
            report
                .certificates
                .push(json!({"kind": "farkas", "multipliers": c, "residuals": res, "verified": ok}));
            (
                if ok {
                    "found (verified)"
                } else {
                    "found (verification failed)"
                },
                Some(res),
                ok,
            )
        }
        None => ("none", None, false),
    };
    report.status = if cert.is_some() {
        "certificate"
    } else {
        "no_certificate"
    }
    .into();
    let imp_text = if implication.holds {
        "holds (sampled)".to_string()
    } else {
        format!("fails (witness {:?})", implication.witness.clone().unwrap_or_default())
    };
    report.summary = format!(
        "implication: {imp_text}; certificate: {cert_text}; closedness: {}",
        closedness_name(closedness)
    );
    if cert.is_none() && closedness == Closedness::Unknown {
        report.warnings.push(CLOSEDNESS_CAVEAT.into());
    }
    report.details = json!({
        "p": p,
        "r": r,
        "implication": implication,
        "certificate_found": cert.is_some(),
        "exact_system_status": exact_system,
        "verified": verified,
        "residuals": residuals,
        "closedness": closedness,
    });
    Ok((report, EXIT_OK))
}

/// The problem and the point `(x, y)` from flags, falling back to the file.
fn load_point(args: &PointArgs) -> Result<(Input, BilevelProblem, Vec<f64>), CliError> {
    let input = read_input(&args.file)?;
    let prob = parse_problem(&input.text)?;
    let point = match (&args.x, &args.y) {
        (Some(x), Some(y)) => {
            if x.len() != prob.m || y.len() != prob.n {
                return Err(CliError::Parse(format!(
                    "point dimensions ({}, {}) do not match the file ({}, {})",
                    x.len(),
                    y.len(),
                    prob.m,
                    prob.n
                )));
            }
            x.iter().chain(y).copied().collect()
        }
        (None, None) => prob
            .feasible_point
            .clone()
            .ok_or_else(|| CliError::Parse("no point: give --x and --y or a `feasible_point` field".into()))?,
        _ => return Err(CliError::Parse("--x and --y must be given together".into())),
    };
    Ok((input, prob, point))
}

fn level_values(levels: &[LevelSolution]) -> Vec<LevelValue> {
    levels
        .iter()
        .map(|l| LevelValue {
            k: l.k,
            val: if l.status.is_solved() { l.value } else { None },
            status: to_value(&l.status).as_str().unwrap_or_default().to_string(),
        })
        .collect()
}

pub fn solve(args: &SolveArgs) -> Outcome {
    let (input, prob, point) = load_point(&args.point)?;
    let mut report = RunReport::new("solve");
    report.input_digest = Some(input.digest);
    if prob.kind()? != UncertaintyKind::Box {
        return Err(CliError::Parse("the relaxation hierarchy needs box uncertainty".into()));
    }
    for (name, k) in [("kmin", args.kmin), ("kmax", args.kmax)] {
        if k.is_some_and(|k| k % 2 == 1) {
            report
                .warnings
                .push(format!("--{name} is odd and was rounded up to even"));
        }
    }

    let hyp = check_hypotheses(&prob, &point)?;
    if !hyp.hold() && !args.force {
        report.status = "hypotheses_failed".into();
        let mut failed = Vec::new();
        if !hyp.robust_feasible {
            failed.push("feasible point not confirmed");
        }
        if !hyp.lsc.holds {
            failed.push("LSC violated");
        }
        if !hyp.coercivity.asserted {
            failed.push("coercivity not asserted");
        }
        report.summary = format!("{}; rerun with --force to solve anyway", failed.join("; "));
        report.warnings.extend(hyp.warnings.iter().cloned());
        report.details = json!({ "hypotheses": hyp });
        return Ok((report, EXIT_HYPOTHESES));
    }

    let opts = HierarchyOptions {
        k_min: args.kmin,
        k_max: args.kmax,
        kappa: args.kappa,
        point: Some(point),
        tol: args.tol,
        settings: SolverSettings::default(),
        dump_dir: args.dump_sdp.clone(),
        parallel: !args.sequential,
    };
    let h = run_hierarchy(&prob, &opts)?;
    report.values = level_values(&h.levels);
    report.timings.levels_seconds = h.levels.iter().map(|l| l.seconds).collect();
    report.warnings.extend(h.warnings.iter().cloned());
    if let Some(c) = &h.certificate {
        let names = build_single_level(&prob, true)?.variable_names();
        let file = c.to_file(names.len(), names)?;
        report
            .certificates
            .push(json!({"kind": "global_optimality", "certificate": file}));
    }
    let solved: Vec<&LevelSolution> = h.levels.iter().filter(|l| l.status.is_solved()).collect();
    let code = if solved.is_empty() {
        report.status = "indeterminate".into();
        report.summary = "no relaxation level was solved".into();
        EXIT_INDETERMINATE
    } else {
        let best = h.best_bound.unwrap_or(f64::NAN);
        report.status = if h.certified.is_some() { "certified" } else { "ok" }.into();
        report.summary = match h.certified {
            Some(k) => format!("best bound {best:.6}; CERTIFIED optimal at the candidate point (k={k})"),
            None => format!("best bound {best:.6}"),
        };
        EXIT_OK
    };
    report.details = json!({
        "kappa": h.kappa,
        "point": h.hypotheses.point,
        "objective_at_point": h.hypotheses.objective,
        "monotone": h.monotone,
        "best_bound": h.best_bound,
        "certified": h.certified,
        "hypotheses": h.hypotheses,
        "levels": h.levels,
        "forced": args.force && !h.hypotheses.hold(),
    });
    Ok((report, code))
}

pub fn check_feasible(args: &PointArgs) -> Outcome {
    let (input, prob, point) = load_point(args)?;
    let (x, y) = prob.split(&point);
    let mut report = RunReport::new("check-feasible");
    report.input_digest = Some(input.digest);
    let (feasible, inconclusive, details) = match prob.kind()? {
        UncertaintyKind::Box => {
            let r = robust_feasible(&prob, x, y)?;
            (r.feasible, r.lower.inconclusive, to_value(&r))
        }
        UncertaintyKind::Ball => {
            let r = ball_robust_feasible(&prob, x, y)?;
            (r.feasible, r.lower.inconclusive, to_value(&r))
        }
    };
    report.status = if feasible { "feasible" } else { "infeasible" }.into();
    report.summary = format!("robust feasible: {feasible}");
    if inconclusive {
        report.warnings.push(CLOSEDNESS_CAVEAT.into());
    }
    report.details = json!({"x": x, "y": y, "feasible": feasible, "report": details});
    Ok((report, EXIT_OK))
}

pub fn check_lower(args: &PointArgs) -> Outcome {
    let (input, prob, point) = load_point(args)?;
    let (x, y) = prob.split(&point);
    let mut report = RunReport::new("check-lower");
    report.input_digest = Some(input.digest);
    let check = is_robust_solution(&prob.lower, x, y)?;
    let oracle = match solve_lower_robust(&prob.lower, x) {
        Ok(s) => Some(s),
        Err(e) => {
            report.warnings.push(format!("brute-force lower-level solve: {e}"));
            None
        }
    };
    report.status = if !check.feasible {
        "infeasible"
    } else if check.is_solution {
        "optimal"
    } else if check.inconclusive {
        "inconclusive"
    } else {
        "not_optimal"
    }
    .into();
    if check.inconclusive {
        report.warnings.push(CLOSEDNESS_CAVEAT.into());
    }
    if let Some(c) = &check.certificate {
        report
            .certificates
            .push(json!({"kind": "lower_level_optimality", "certificate": c}));
    }
    report.summary = format!(
        "lower-level robust solution: {}; closedness: {}",
        check.is_solution,
        closedness_name(check.closedness)
    );
    report.details = json!({
        "x": x,
        "y": y,
        "feasible": check.feasible,
        "is_solution": check.is_solution,
        "inconclusive": check.inconclusive,
        "closedness": check.closedness,
        "oracle": oracle,
    });
    Ok((report, EXIT_OK))
}

pub fn certify(args: &CertifyArgs) -> Outcome {
    let (input, prob, point) = load_point(&args.point)?;
    let mut report = RunReport::new("certify");
    report.input_digest = Some(input.digest);
    if prob.kind()? != UncertaintyKind::Box {
        return Err(CliError::Parse("certification needs box uncertainty".into()));
    }
    let c = certify_global(&prob, &point, args.kappa, args.k, &SolverSettings::default(), args.tol)?;
    report.values = level_values(std::slice::from_ref(&c.level));
    report.timings.levels_seconds = vec![c.level.seconds];
    if !c.point_robust_feasible {
        report
            .warnings
            .push("point is not confirmed robust feasible; a certificate would not apply".into());
    }
    if let Some(cert) = &c.certificate {
        let names = build_single_level(&prob, true)?.variable_names();
        let file = cert.to_file(names.len(), names)?;
        report
            .certificates
            .push(json!({"kind": "global_optimality", "certificate": file}));
    }
    let code = match c.level.status {
        LevelStatus::NumericalFailure | LevelStatus::ResidualTooLarge if !c.certified => {
            report.status = "indeterminate".into();
            EXIT_INDETERMINATE
        }
        _ => {
            report.status = if c.certified { "certified" } else { "none" }.into();
            EXIT_OK
        }
    };
    report.summary = format!(
        "certificate: {}; {}",
        if c.certified { "found" } else { "none" },
        c.explanation
    );
    report.details = to_value(&c);
    Ok((report, code))
}
