//! All acceptance criteria, one PASS/FAIL line each. Runs without the test
//! harness so the lines come out in order and unfiltered.

use std::process::ExitCode;

use ddft::verify::{verify, CRITERIA};

fn main() -> ExitCode {
    let report = verify();
    print!("{}", report.to_text());
    assert_eq!(report.criteria.len(), CRITERIA);
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
