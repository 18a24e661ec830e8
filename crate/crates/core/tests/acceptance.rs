//! Runs every reference scenario at its stated tolerance and prints one
//! PASS/FAIL line per criterion. Exits nonzero if any check fails.

use std::process::ExitCode;
use std::time::Instant;

use poolsim_core::validation::CHECKS;

fn main() -> ExitCode {
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for check in CHECKS.iter().filter(|c| only.is_empty() || only.iter().any(|o| c.name.contains(o.as_str()))) {
        let start = Instant::now();
        match check.run() {
            Ok(report) => {
                failed += usize::from(!report.passed);
                println!("{report} ({:.1}s)", start.elapsed().as_secs_f64());
            }
            Err(e) => {
                failed += 1;
                println!("FAIL [{:>2}] {}: error {e}", check.id, check.name);
            }
        }
    }
    if failed == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}
