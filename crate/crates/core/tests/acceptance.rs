//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Run a subset with `cargo test --test acceptance -- 4 7`.

use std::process::ExitCode;
use std::time::Instant;

use bcc_tree::verify::{run_criterion, CRITERIA};

fn main() -> ExitCode {
    let selected: Vec<u8> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let ids: Vec<u8> = CRITERIA
        .iter()
        .map(|c| c.0)
        .filter(|id| selected.is_empty() || selected.contains(id))
        .collect();

    let mut failed = Vec::new();
    for id in ids {
        let start = Instant::now();
        match run_criterion(id) {
            Ok(report) => {
                println!("{report} ({:.1}s)", start.elapsed().as_secs_f64());
                for d in &report.details {
                    println!("      {d}");
                }
                if !report.pass {
                    failed.push(id);
                }
            }
            Err(e) => {
                println!("criterion {id:>2} [FAIL] error: {e}");
                failed.push(id);
            }
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
