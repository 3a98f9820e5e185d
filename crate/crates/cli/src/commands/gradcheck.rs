//! `qcnn gradcheck`: run the finite-difference suite and report each check.
//! Exits nonzero if any check fails so CI can gate on it.

use crate::opts::GradcheckArgs;
use crate::CmdResult;
use qcnn_core::gradcheck;

pub fn run(args: GradcheckArgs) -> CmdResult {
    let reports = gradcheck::run_all(args.seed)?;
    let mut failed = 0;
    for r in &reports {
        let verdict = if r.passed { "PASS" } else { "FAIL" };
        println!(
            "{verdict} {} (max err {:.3e}, tolerance {:.0e}, {} values)",
            r.name, r.max_err, r.tolerance, r.compared
        );
        if !r.passed {
            failed += 1;
        }
    }
    println!("{} of {} checks passed", reports.len() - failed, reports.len());
    Ok(if failed == 0 { 0 } else { 1 })
}
