//! Runs every acceptance criterion and prints one line per criterion.

use std::process::ExitCode;

fn main() -> ExitCode {
    let results = phk_lab::acceptance::run_all();
    for c in &results {
        println!("{}", c.line());
    }
    let passed = results.iter().filter(|c| c.pass).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
