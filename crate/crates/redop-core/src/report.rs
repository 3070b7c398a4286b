//! Analysis reports: verdicts with provenance, rendered expressions and
//! their JSON and plain-text forms.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::symbolic::{Expr, ExprTree, Names, TriBool};

pub const REPORT_VERSION: &str = "1";

/// How a verdict was reached.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    /// Decided in exact arithmetic on the normal form.
    Proved,
    /// Supported only by evaluation at sample points.
    Sampled,
    Failed,
    /// A proof was required but only sampled evidence is available.
    Undecidable,
}

impl Status {
    /// Status of a claim of the form `e ≡ 0`.
    pub fn vanishes(t: TriBool) -> Status {
        match t {
            TriBool::ProvenZero => Status::Proved,
            TriBool::ProbablyZero => Status::Sampled,
            TriBool::ProvenNonZero | TriBool::ProbablyNonZero => Status::Failed,
        }
    }

    /// Status of a claim `e ≠ 0` that must be proved.
    pub fn nonzero_required(t: TriBool) -> Status {
        match t {
            TriBool::ProvenNonZero => Status::Proved,
            TriBool::ProbablyNonZero => Status::Undecidable,
            TriBool::ProvenZero | TriBool::ProbablyZero => Status::Failed,
        }
    }

    /// Status of a genericity condition `e ≠ 0`, where sampled evidence
    /// is acceptable.
    pub fn nonzero_generic(t: TriBool) -> Status {
        match t {
            TriBool::ProvenNonZero => Status::Proved,
            TriBool::ProbablyNonZero => Status::Sampled,
            TriBool::ProvenZero | TriBool::ProbablyZero => Status::Failed,
        }
    }

    pub fn from_bool(ok: bool) -> Status {
        if ok {
            Status::Proved
        } else {
            Status::Failed
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Status::Proved => "proved",
            Status::Sampled => "sampled",
            Status::Failed => "failed",
            Status::Undecidable => "undecidable",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub claim: String,
    pub status: Status,
    pub detail: String,
}

/// An expression in the input notation together with its tree.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedExpr {
    pub text: String,
    pub tree: ExprTree,
}

impl RenderedExpr {
    pub fn new(e: &Expr, names: &Names) -> Self {
        RenderedExpr {
            text: e.render(names),
            tree: e.to_tree(),
        }
    }

    /// Same tree, but with the text given explicitly (used for equations
    /// rendered as `lhs = rhs`).
    pub fn with_text(e: &Expr, text: String) -> Self {
        RenderedExpr { text, tree: e.to_tree() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Analyze,
    Coorder,
    Detsys,
    Verify,
    Reduce,
    Bijection,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Analyze,
        Command::Coorder,
        Command::Detsys,
        Command::Verify,
        Command::Reduce,
        Command::Bijection,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Command::Analyze => "analyze",
            Command::Coorder => "coorder",
            Command::Detsys => "detsys",
            Command::Verify => "verify",
            Command::Reduce => "reduce",
            Command::Bijection => "bijection",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Command::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown command {s:?}"))
    }
}

/// Output of one command on one problem.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommandResult {
    pub command: Command,
    pub inputs: BTreeMap<String, String>,
    pub verdicts: Vec<Verdict>,
    pub expressions: BTreeMap<String, RenderedExpr>,
    pub timing_ms: u64,
}

impl CommandResult {
    pub fn new(command: Command) -> Self {
        CommandResult {
            command,
            inputs: BTreeMap::new(),
            verdicts: Vec::new(),
            expressions: BTreeMap::new(),
            timing_ms: 0,
        }
    }

    pub fn input(&mut self, key: &str, value: impl Into<String>) {
        self.inputs.insert(key.to_string(), value.into());
    }

    pub fn verdict(&mut self, claim: impl Into<String>, status: Status, detail: impl Into<String>) {
        self.verdicts.push(Verdict {
            claim: claim.into(),
            status,
            detail: detail.into(),
        });
    }

    pub fn expression(&mut self, key: &str, e: &Expr, names: &Names) {
        self.expressions.insert(key.to_string(), RenderedExpr::new(e, names));
    }

    pub fn integer(&mut self, key: &str, n: i64) {
        let e = Expr::int(n);
        self.expressions.insert(
            key.to_string(),
            RenderedExpr {
                text: n.to_string(),
                tree: e.to_tree(),
            },
        );
    }

    pub fn find(&self, claim_prefix: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.claim.starts_with(claim_prefix))
    }

    pub fn text(&self, key: &str) -> Option<&str> {
        self.expressions.get(key).map(|e| e.text.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub version: String,
    /// The problem file, re-rendered in the input grammar.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<String>,
    pub results: Vec<CommandResult>,
}

impl Default for AnalysisReport {
    fn default() -> Self {
        AnalysisReport {
            version: REPORT_VERSION.to_string(),
            problem: None,
            results: Vec::new(),
        }
    }
}

impl AnalysisReport {
    pub fn statuses(&self) -> impl Iterator<Item = Status> + '_ {
        self.results.iter().flat_map(|r| r.verdicts.iter().map(|v| v.status))
    }

    /// 0 when every verdict holds, 1 when one failed, 3 when none failed
    /// but a required proof is missing.
    pub fn exit_code(&self) -> i32 {
        let statuses: Vec<Status> = self.statuses().collect();
        if statuses.contains(&Status::Failed) {
            1
        } else if statuses.contains(&Status::Undecidable) {
            3
        } else {
            0
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Text,
    Json,
}

/// JSON with keys in lexicographic order at every level.
pub fn to_json(report: &AnalysisReport) -> String {
    // serde_json::Value keeps object keys sorted.
    let value = serde_json::to_value(report).expect("reports serialize");
    serde_json::to_string_pretty(&value).expect("values serialize")
}

pub fn from_json(text: &str) -> Result<AnalysisReport, serde_json::Error> {
    serde_json::from_str(text)
}

pub fn emit_report(report: &AnalysisReport, format: Format) -> String {
    match format {
        Format::Json => to_json(report),
        Format::Text => to_text(report),
    }
}

fn to_text(report: &AnalysisReport) -> String {
    let mut out = String::new();
    if let Some(p) = &report.problem {
        out.push_str("problem:\n");
        for line in p.lines() {
            let _ = writeln!(out, "  {line}");
        }
    }
    for r in &report.results {
        let inputs: Vec<String> = r.inputs.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let _ = writeln!(out, "\n== {} {} ({} ms)", r.command, inputs.join(" "), r.timing_ms);
        for (k, e) in &r.expressions {
            let _ = writeln!(out, "  {k}: {}", e.text);
        }
        for v in &r.verdicts {
            let _ = write!(out, "  [{:<11}] {}", v.status.as_str(), v.claim);
            if !v.detail.is_empty() {
                let _ = write!(out, " ({})", v.detail);
            }
            out.push('\n');
        }
    }
    out
}
