//! Full acceptance suite: one pass/fail line per criterion.

use std::process::ExitCode;

use walkplan_core::pipeline::repro::{run_suite, SuiteConfig};

fn main() -> ExitCode {
    let cfg = SuiteConfig::default();
    let (results, _) = match run_suite(&cfg, |r| println!("{r}")) {
        Ok(out) => out,
        Err(e) => {
            println!("acceptance suite aborted: {e}");
            return ExitCode::FAILURE;
        }
    };
    let passed = results.iter().filter(|r| r.passed).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
