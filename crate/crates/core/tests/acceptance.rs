//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use std::process::ExitCode;

use lmsz_core::validation::{run_check, ValidationConfig};

const CRITERIA: [(u8, &str); 12] = [
    (1, "lmsz_4d"),
    (2, "lmsz_5d"),
    (3, "exact_solution"),
    (4, "unitarity_symmetry"),
    (5, "tensor_factorization"),
    (6, "negativity_maxima"),
    (7, "negativity_closed_forms"),
    (8, "dark_states"),
    (9, "selection_rule"),
    (10, "constant_entanglement"),
    (11, "noise"),
    (12, "decay"),
];

const DIAGNOSTICS: [&str; 2] = ["nominal_b_defect", "noise_4d_uniform"];

fn main() -> ExitCode {
    let cfg = ValidationConfig::default();
    let mut failed = Vec::new();
    println!("acceptance: {} criteria, seed {}", CRITERIA.len(), cfg.seed);
    for (n, id) in CRITERIA {
        let r = run_check(id, &cfg);
        let verdict = if r.passed { "PASS" } else { "FAIL" };
        println!("{verdict} C{n:02} {} [{:.1} s]: {}", r.name, r.elapsed_s, r.detail);
        if !r.passed {
            failed.push(format!("C{n:02}"));
        }
    }
    for id in DIAGNOSTICS {
        let r = run_check(id, &cfg);
        println!("INFO {}: {}", r.name, r.detail);
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed {}", failed.join(", "));
        ExitCode::FAILURE
    }
}
