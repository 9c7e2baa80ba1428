//! Text and JSON renderings of an exploration report.
//!
//! Both go through [`ReportDocument`], a plain serializable view with stable
//! field names. JSON output re-parses to an equal document and re-renders to
//! the same bytes.

use crate::cfg::Branch;
use crate::explorer::{DiagnosisKind, LocFaultsReport};
use crate::ir::{Constraint, ConstraintKind};
use crate::mcs::McsStatus;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write;

pub const SCHEMA_VERSION: u32 = 1;

const MISSING_ASSIGNMENT: &str = "possible missing assignment in this branch";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportDocument {
    pub schema_version: u32,
    pub program: String,
    pub counterexample: BTreeMap<String, i64>,
    pub config: ConfigDoc,
    pub diagnoses: Vec<DiagnosisDoc>,
    pub statistics: StatisticsDoc,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDoc {
    pub b_cond: usize,
    pub b_mcs: usize,
    pub k_max: usize,
    pub domain_lo: i64,
    pub domain_hi: i64,
    pub incremental: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McsStatusDoc {
    Conflict,
    AlreadySat,
    HardUnsat,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosisDoc {
    pub kind: DiagnosisKind,
    pub deviated: Vec<DeviationDoc>,
    pub path: Vec<StepDoc>,
    pub result: i64,
    pub postcondition_holds: bool,
    pub mcs_status: McsStatusDoc,
    pub mcs: Vec<Vec<ConstraintDoc>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviationDoc {
    pub decision: usize,
    pub line: u32,
    pub column: u32,
    pub taken: Branch,
    pub guard: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepDoc {
    pub decision: usize,
    pub line: u32,
    pub taken: Branch,
    pub deviated: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintDoc {
    pub id: u32,
    pub line: u32,
    pub kind: ConstraintKind,
    pub formula: String,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatisticsDoc {
    pub paths_explored: u64,
    pub paths_ignored: u64,
    pub rejected_marked: u64,
    pub rejected_prefix: u64,
    pub deviations_unreached: u64,
    pub abandoned_overflow: u64,
    pub solver_checks: u64,
    pub solver_assertions: u64,
    pub solver_propagations: u64,
}

fn constraint_doc(c: &Constraint) -> ConstraintDoc {
    ConstraintDoc {
        id: c.id.0,
        line: c.loc.line,
        kind: c.kind,
        formula: c.formula.to_string(),
        text: c.to_string(),
    }
}

impl ReportDocument {
    pub fn from_report(r: &LocFaultsReport) -> Self {
        let diagnoses = r
            .diagnoses
            .iter()
            .map(|d| DiagnosisDoc {
                kind: d.kind,
                deviated: d
                    .deviated
                    .iter()
                    .map(|v| DeviationDoc {
                        decision: v.decision.0,
                        line: v.loc.line,
                        column: v.loc.column,
                        taken: v.taken,
                        guard: v.guard.to_string(),
                    })
                    .collect(),
                path: d
                    .path
                    .iter()
                    .map(|s| StepDoc {
                        decision: s.decision.0,
                        line: s.loc.line,
                        taken: s.taken,
                        deviated: s.deviated,
                    })
                    .collect(),
                result: d.result,
                postcondition_holds: d.kind == DiagnosisKind::DeviationCorrects,
                mcs_status: match d.status {
                    McsStatus::Conflict => McsStatusDoc::Conflict,
                    McsStatus::AlreadySat => McsStatusDoc::AlreadySat,
                    McsStatus::HardUnsat => McsStatusDoc::HardUnsat,
                },
                mcs: d.mcs.iter().map(|s| s.iter().map(constraint_doc).collect()).collect(),
            })
            .collect();
        let s = &r.stats;
        ReportDocument {
            schema_version: SCHEMA_VERSION,
            program: r.program.clone(),
            counterexample: r.counterexample.inputs.clone(),
            config: ConfigDoc {
                b_cond: r.config.b_cond,
                b_mcs: r.config.mcs.b_mcs,
                k_max: r.config.mcs.k_max,
                domain_lo: r.config.domain.lo,
                domain_hi: r.config.domain.hi,
                incremental: r.config.incremental,
            },
            diagnoses,
            statistics: StatisticsDoc {
                paths_explored: s.paths_explored,
                paths_ignored: s.paths_ignored,
                rejected_marked: s.rejected_marked,
                rejected_prefix: s.rejected_prefix,
                deviations_unreached: s.deviations_unreached,
                abandoned_overflow: s.abandoned_overflow,
                solver_checks: s.solver_checks,
                solver_assertions: s.solver_assertions,
                solver_propagations: s.solver_propagations,
            },
        }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Pretty-printed JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("document is always serializable");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = self.write_text(&mut out);
        out
    }

    fn write_text(&self, out: &mut String) -> std::fmt::Result {
        let ce: Vec<String> = self.counterexample.iter().map(|(k, v)| format!("{k} = {v}")).collect();
        let c = &self.config;
        writeln!(out, "program: {}", self.program)?;
        writeln!(out, "counterexample: {}", ce.join(", "))?;
        writeln!(
            out,
            "bounds: b_cond = {}, b_mcs = {}, k_max = {}, domain = [{}, {}]",
            c.b_cond, c.b_mcs, c.k_max, c.domain_lo, c.domain_hi
        )?;
        for (i, d) in self.diagnoses.iter().enumerate() {
            writeln!(out)?;
            match d.kind {
                DiagnosisKind::InitialPath => writeln!(out, "[{}] failing path", i + 1)?,
                DiagnosisKind::DeviationCorrects => {
                    let n = d.deviated.len();
                    let plural = if n == 1 { "" } else { "s" };
                    writeln!(out, "[{}] corrected by {n} deviation{plural}", i + 1)?
                }
            }
            let path: Vec<String> = d
                .path
                .iter()
                .map(|s| format!("line {} {}{}", s.line, s.taken.as_str(), if s.deviated { "*" } else { "" }))
                .collect();
            if path.is_empty() {
                writeln!(out, "  path: straight line")?;
            } else {
                writeln!(out, "  path: {}", path.join(", "))?;
            }
            let verdict = if d.postcondition_holds {
                "satisfies"
            } else {
                "violates"
            };
            writeln!(out, "  result: {} ({verdict} postcondition)", d.result)?;
            for v in &d.deviated {
                writeln!(
                    out,
                    "  suspect: condition at line {} ({}), forced {}",
                    v.line,
                    v.guard,
                    v.taken.as_str()
                )?;
            }
            match d.mcs_status {
                McsStatusDoc::Conflict if d.mcs.is_empty() => {
                    writeln!(out, "  no correction set within k_max")?
                }
                McsStatusDoc::Conflict => {}
                McsStatusDoc::AlreadySat => writeln!(out, "  no conflicting assignments")?,
                McsStatusDoc::HardUnsat => writeln!(out, "  no assignment can be corrected")?,
            }
            for (j, set) in d.mcs.iter().enumerate() {
                writeln!(out, "  MCS {}:", j + 1)?;
                for c in set {
                    if c.kind == ConstraintKind::SyntheticCopy {
                        writeln!(out, "    suspect: line {} ({}), {MISSING_ASSIGNMENT}", c.line, c.formula)?;
                    } else {
                        writeln!(out, "    suspect: line {} ({})", c.line, c.formula)?;
                    }
                }
            }
        }
        let s = &self.statistics;
        writeln!(out)?;
        writeln!(out, "statistics:")?;
        writeln!(out, "  paths explored: {}", s.paths_explored)?;
        writeln!(out, "  paths ignored (still failing): {}", s.paths_ignored)?;
        writeln!(out, "  rejected by marking: {}", s.rejected_marked)?;
        writeln!(out, "  rejected by prefix: {}", s.rejected_prefix)?;
        writeln!(out, "  deviations not reached: {}", s.deviations_unreached)?;
        writeln!(out, "  abandoned (out of domain): {}", s.abandoned_overflow)?;
        writeln!(
            out,
            "  solver: {} checks, {} assertions, {} propagations",
            s.solver_checks, s.solver_assertions, s.solver_propagations
        )
    }
}

pub fn render_text(r: &LocFaultsReport) -> String {
    ReportDocument::from_report(r).to_text()
}

pub fn render_json(r: &LocFaultsReport) -> String {
    ReportDocument::from_report(r).to_json()
}
