//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Run with `cargo test -p ganmut-core --test acceptance`.

mod checkpoint;
mod emotion_space;
mod fed;
mod fixture;
mod gradients;
mod mask;
mod penalty;
mod smoke;
mod smoothness;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

pub type Outcome = Result<String, String>;

/// Returns early from a criterion with a failure message.
#[macro_export]
macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($msg)+));
        }
    };
}

/// State shared between criteria.
#[derive(Default)]
pub struct Context {
    pub smoke: Option<smoke::SmokeRun>,
}

type Check = fn(&mut Context) -> Outcome;

fn main() {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [(&str, &str, Check); 10] = [
        ("1", "FED oracle suite", fed::run),
        ("2", "gradient checks", gradients::run),
        ("3", "gradient penalty exactness", penalty::run),
        ("4", "interpolation-loss mask", mask::run),
        ("5", "smoothness oracle", smoothness::run),
        ("6", "emotion-space suite", emotion_space::run),
        ("7", "smoke training", smoke::run_smoke),
        ("8", "determinism", smoke::run_determinism),
        ("9", "data pipeline fixture", fixture::run),
        ("10", "checkpoint roundtrip", checkpoint::run),
    ];

    let mut ctx = Context::default();
    let mut failed = Vec::new();
    let mut ran = 0;
    for (id, name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| f == id) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(|| check(&mut ctx)))
            .unwrap_or_else(|p| Err(format!("panicked: {}", panic_message(&p))));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  criterion {id:>2} {name}: {detail} ({secs:.1}s)"),
            Err(reason) => {
                println!("FAIL  criterion {id:>2} {name}: {reason} ({secs:.1}s)");
                failed.push(id);
            }
        }
    }
    println!("acceptance: {}/{} criteria passed", ran - failed.len(), ran);
    if !failed.is_empty() {
        std::process::exit(1);
    }
}

fn panic_message(p: &Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<String>()
        .cloned()
        .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "unknown panic".to_string())
}
