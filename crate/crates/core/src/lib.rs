//! Fault localization for small loop-free integer programs.
//!
//! Given a function annotated with a postcondition and a counterexample
//! (inputs that violate it), the pipeline lowers the function to a CFG in
//! dynamic single assignment form, then explores the counterexample path
//! and paths that deviate from it at up to `b_cond` decisions. Each path
//! whose constraints contradict the postcondition yields bounded minimal
//! correction sets: small groups of assignments that, if wrong, explain the
//! failure.
//!
//! ```
//! use locfaults::{analyze, Counterexample, ExplorerConfig};
//!
//! let src = "/*@ ensures \\result == x + 1; */
//! int inc(int x) {
//!   int y = x + 2;
//!   return y;
//! }";
//! let ce = Counterexample::from_pairs([("x", 0)]);
//! let report = analyze(src, &ce, &ExplorerConfig::default()).unwrap();
//! assert_eq!(report.diagnoses[0].mcs[0][0].loc.line, 3);
//! ```

pub mod cfg;
pub mod explorer;
pub mod frontend;
pub mod interp;
pub mod ir;
pub mod mcs;
pub mod report;
pub mod solver;

pub use explorer::{analyze, run_locfaults, AnalysisError, Counterexample, ExplorerConfig, LocFaultsReport};
pub use report::{render_json, render_text, ReportDocument};
