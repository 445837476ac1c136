//! Runs every acceptance criterion at its stated size and limits.
//!
//! Prints one PASS/FAIL line per criterion. Criteria listed in `KNOWN_RED`
//! are reported but do not fail the target; see the README.

use std::process::ExitCode;

use proxvr_bench::verify::{run_suite, RateFns, Suite};

const KNOWN_RED: &[u32] = &[7];

fn main() -> ExitCode {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let scratch = tempfile::tempdir().expect("scratch dir");
    let results = run_suite(&Suite::full(workers), RateFns::default(), scratch.path());
    let mut unexpected = 0;
    for r in &results {
        let known = KNOWN_RED.contains(&r.id);
        let note = match (r.passed, known) {
            (false, true) => " [known red]",
            (true, true) => " [known red now passes]",
            _ => "",
        };
        println!("{}{note}", r.line());
        if !r.passed && !known {
            unexpected += 1;
        }
    }
    let passed = results.iter().filter(|r| r.passed).count();
    println!("acceptance: {passed}/{} criteria pass, {unexpected} unexpected failures", results.len());
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
