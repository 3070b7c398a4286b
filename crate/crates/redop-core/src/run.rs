//! Dispatch of the report commands onto the analyses.

use thiserror::Error;

use crate::correspondence::{
    adjoint_operator, backlund_verify, verify_bijection, CoorderBranch, CorrespondenceError,
    SurfaceSampling,
};
use crate::jet::{swap_axes, Axis, DifferentialFunction, JetError};
use crate::problem::Problem;
use crate::reduction::{
    determining_regular, determining_singular, invariance_check, reduce_with_ansatz, same_equation,
    wave_rhs, CaseLabel, DeterminingSystem, ReductionError,
};
use crate::report::{AnalysisReport, Command, CommandResult, RenderedExpr, Status};
use crate::singularity::{
    analyze_reduced_set, elimination_axis, reduced_field, representation_check, weak_coorder,
    zeta_function, CoorderReport, ReducedXi, SingularityError,
};
use crate::symbolic::{
    is_zero_with, render_equation, Application, Expr, Names, SampleConfig, SymbolicError, TriBool,
};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{command} needs --{argument}")]
    MissingArgument { command: Command, argument: &'static str },
    #[error("no {kind} named {name:?} in the problem file")]
    UnknownName { kind: &'static str, name: String },
    #[error("{command}: {source}")]
    Analysis {
        command: Command,
        source: AnalysisError,
    },
}

/// Failure of an underlying analysis.
#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Singularity(#[from] SingularityError),
    #[error(transparent)]
    Reduction(#[from] ReductionError),
    #[error(transparent)]
    Correspondence(#[from] CorrespondenceError),
    #[error(transparent)]
    Symbolic(#[from] SymbolicError),
    #[error(transparent)]
    Jet(#[from] JetError),
}

impl AnalysisError {
    fn exhausted(&self) -> bool {
        let sym = match self {
            AnalysisError::Symbolic(s) => Some(s),
            AnalysisError::Singularity(SingularityError::Symbolic(s)) => Some(s),
            AnalysisError::Reduction(ReductionError::Symbolic(s)) => Some(s),
            AnalysisError::Correspondence(CorrespondenceError::Symbolic(s)) => Some(s),
            _ => None,
        };
        matches!(sym, Some(SymbolicError::EvaluationExhausted { .. }))
    }
}

impl RunError {
    /// 2 for bad input, 3 when zero testing could not decide, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::MissingArgument { .. } | RunError::UnknownName { .. } => 2,
            RunError::Analysis { source, .. } if source.exhausted() => 3,
            RunError::Analysis { .. } => 1,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub field: Option<String>,
    pub family: Option<String>,
    pub ansatz: Option<String>,
    pub xi: Option<ReducedXi>,
    pub samples: Option<u32>,
    pub seed: Option<u64>,
}

impl RunOptions {
    fn config(&self, problem: &Problem) -> SampleConfig {
        let mut cfg = problem.settings.apply(SampleConfig::default());
        if let Some(n) = self.samples {
            cfg.samples = n;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg
    }
}

struct Ctx<'a> {
    command: Command,
    problem: &'a Problem,
    l: DifferentialFunction,
    cfg: SampleConfig,
    out: CommandResult,
}

impl Ctx<'_> {
    fn names(&self) -> &Names {
        &self.problem.names
    }

    fn expr(&mut self, key: &str, e: &Expr) {
        let names = self.problem.names.clone();
        self.out.expression(key, e, &names);
    }

    fn wrap<T, E: Into<AnalysisError>>(&self, r: Result<T, E>) -> Result<T, RunError> {
        r.map_err(|e| RunError::Analysis {
            command: self.command,
            source: e.into(),
        })
    }

    fn required<'n>(&self, value: &'n Option<String>, argument: &'static str) -> Result<&'n str, RunError> {
        value.as_deref().ok_or(RunError::MissingArgument {
            command: self.command,
            argument,
        })
    }

    fn assumptions(&mut self, assumptions: &[Expr]) {
        for a in assumptions {
            let text = a.render(self.names());
            self.out.verdict(
                format!("divisor {text} is nonzero"),
                Status::Sampled,
                "nonzero at every sample point; assumed generic",
            );
        }
    }
}

/// Runs one command and times it.
pub fn run(command: Command, problem: &Problem, opts: &RunOptions) -> Result<CommandResult, RunError> {
    let start = clock::now();
    let mut ctx = Ctx {
        command,
        problem,
        l: problem.differential_function(),
        cfg: opts.config(problem),
        out: CommandResult::new(command),
    };
    match command {
        Command::Analyze => analyze(&mut ctx)?,
        Command::Coorder => coorder(&mut ctx, opts)?,
        Command::Detsys => detsys(&mut ctx, opts)?,
        Command::Verify => verify(&mut ctx, opts)?,
        Command::Reduce => reduce(&mut ctx, opts)?,
        Command::Bijection => bijection(&mut ctx, opts)?,
    }
    ctx.out.timing_ms = clock::elapsed_ms(start);
    Ok(ctx.out)
}

/// Runs several commands on one problem and collects the report.
pub fn run_report(problem: &Problem, commands: &[Command], opts: &RunOptions) -> Result<AnalysisReport, RunError> {
    let mut report = AnalysisReport {
        problem: Some(problem.render()),
        ..AnalysisReport::default()
    };
    for c in commands {
        report.results.push(run(*c, problem, opts)?);
    }
    Ok(report)
}

fn analyze(ctx: &mut Ctx<'_>) -> Result<(), RunError> {
    let order = ctx.l.ord();
    ctx.out.integer("order", order as i64);
    let orientations = [
        (ctx.names().x[1].to_string(), ctx.l.clone()),
        (ctx.names().x[0].to_string(), swap_axes(&ctx.l)),
    ];
    for (label, l) in orientations {
        for xi in [ReducedXi::Zero, ReducedXi::U] {
            let set = ctx.wrap(analyze_reduced_set(&l, xi, &ctx.cfg))?;
            let key = format!("{label}-orientation xi={}", xi.label());
            let kind = if set.regular {
                format!("regular, k = ord L = {}", set.k)
            } else if set.k < 0 {
                "ultra-singular, k = -1".to_string()
            } else {
                format!("singular, k = {}", set.k)
            };
            ctx.out.verdict(format!("{key}: set co-order"), Status::Proved, kind);
            ctx.out
                .expressions
                .insert(format!("{key}: associated"), RenderedExpr::new(&set.associated, l.names()));
            if let Some(ineq) = &set.inequality {
                ctx.out
                    .expressions
                    .insert(format!("{key}: regular-value condition"), RenderedExpr::new(ineq, l.names()));
            }
            if let Some(atom) = &set.split_obstruction {
                ctx.out.verdict(
                    format!("{key}: split systems"),
                    Status::Undecidable,
                    format!("associated function is not polynomial in {atom}"),
                );
            }
            for (name, system) in [("co-order 0", &set.zero_coorder), ("ultra-singular", &set.ultra_singular)] {
                let Some(system) = system else { continue };
                if let crate::singularity::Consistency::Inconsistent { witness } = &system.consistency {
                    ctx.out.verdict(
                        format!("{key}: {name} subset is empty"),
                        Status::Proved,
                        format!("contradiction {} = 0", witness.render(l.names())),
                    );
                }
                for (i, eq) in system.equations.iter().enumerate() {
                    ctx.out.expressions.insert(
                        format!("{key}: {name} system {:02}", i + 1),
                        RenderedExpr::new(eq, l.names()),
                    );
                }
            }
            if !set.regular && set.k >= 0 {
                let (status, detail) = match representation_check(&l, xi, set.k as u32) {
                    Ok(_) => (Status::Proved, "every omega atom has first index at most k".to_string()),
                    Err(e) => (Status::Failed, e.to_string()),
                };
                ctx.out
                    .verdict(format!("{key}: representation matches the co-order"), status, detail);
            }
        }
    }
    Ok(())
}

fn field_input(ctx: &mut Ctx<'_>, opts: &RunOptions) -> Result<crate::jet::VectorField, RunError> {
    let name = ctx.required(&opts.field, "field")?;
    let field = ctx.problem.field(name).cloned().ok_or_else(|| RunError::UnknownName {
        kind: "field",
        name: name.to_string(),
    })?;
    ctx.out.input("field", name);
    ctx.out.input("field_value", field.render(ctx.names()));
    Ok(field)
}

fn coorder_entries(ctx: &mut Ctx<'_>, report: &CoorderReport, prefix: &str) {
    ctx.expr(&format!("{prefix}associated"), report.elimination.associated.body());
    ctx.expr(&format!("{prefix}multiplier"), &report.multiplier);
    ctx.expr(&format!("{prefix}residual"), report.residual.body());
    ctx.out.integer(&format!("{prefix}strong"), report.strong as i64);
    ctx.out.integer(&format!("{prefix}weak_lower"), report.weak_lower as i64);
    ctx.out.integer(&format!("{prefix}weak_upper"), report.weak_upper as i64);
}

fn weak_exactness(report: &CoorderReport) -> (Status, String) {
    if report.weak_is_exact() {
        (Status::Proved, format!("weak co-order = {}", report.weak_lower))
    } else {
        let status = if report.maximal_rank == TriBool::ProbablyNonZero {
            Status::Undecidable
        } else {
            Status::Sampled
        };
        (
            status,
            format!("{} <= weak co-order <= {}", report.weak_lower, report.weak_upper),
        )
    }
}

fn coorder(ctx: &mut Ctx<'_>, opts: &RunOptions) -> Result<(), RunError> {
    let q = field_input(ctx, opts)?;
    let axis = ctx.wrap(elimination_axis(&q, &ctx.cfg))?;
    let coefficient = q.xi(axis).clone();
    let nonzero = ctx.wrap(is_zero_with(&coefficient, &ctx.cfg))?;
    ctx.out.input("axis", ctx.names().x[axis.index()].to_string());
    ctx.out.verdict(
        format!("coefficient {} of the elimination axis is nonzero", coefficient.render(ctx.names())),
        Status::nonzero_generic(nonzero),
        "",
    );
    let report = ctx.wrap(weak_coorder(&ctx.l, &q, &ctx.cfg))?;
    coorder_entries(ctx, &report, "");
    let kind = match report.strong {
        k if k < 0 => "ultra-singular".to_string(),
        k if k >= ctx.l.ord() => format!("regular, strong co-order = {k}"),
        k => format!("singular, strong co-order = {k}"),
    };
    ctx.out.verdict("strong co-order", Status::Proved, kind);
    let (status, detail) = weak_exactness(&report);
    ctx.out.verdict("weak co-order", status, detail);
    Ok(())
}

fn xi_input(ctx: &mut Ctx<'_>, opts: &RunOptions) -> ReducedXi {
    let xi = opts.xi.unwrap_or(ReducedXi::Zero);
    ctx.out.input("xi", xi.label());
    xi
}

/// Prefers the lowest-order derivative of ζ as left-hand side, with
/// derivatives in the first variable winning ties.
fn lhs_preference(app: &std::sync::Arc<Application>) -> (u32, u32) {
    let order: u32 = app.index.iter().sum();
    (u32::MAX - order, app.index.first().copied().unwrap_or(0))
}

fn equation_entries(ctx: &mut Ctx<'_>, system: &DeterminingSystem) {
    let names = ctx.names().clone();
    for (i, eq) in system.equations.iter().enumerate() {
        let key = if system.equations.len() == 1 {
            "equation".to_string()
        } else {
            format!("equation {:02}", i + 1)
        };
        let text = render_equation(eq, &names, &lhs_preference);
        ctx.out.expressions.insert(key, RenderedExpr::with_text(eq, text));
    }
}

fn detsys(ctx: &mut Ctx<'_>, opts: &RunOptions) -> Result<(), RunError> {
    let xi = xi_input(ctx, opts);
    match determining_singular(&ctx.l, xi, &ctx.cfg) {
        Ok(system) => {
            ctx.out.input("case", system.label.to_string());
            equation_entries(ctx, &system);
            if let Some(g) = &system.g {
                ctx.expr("G", g);
            }
            ctx.out.verdict(
                "single determining equation of the singular set",
                Status::Proved,
                format!("{} form", system.label),
            );
            if matches!(system.label, CaseLabel::Evolution | CaseLabel::Wave) {
                ctx.out.verdict(
                    "specialized equation equals the general singular-set equation",
                    Status::Proved,
                    "monic numerators coincide",
                );
            }
            ctx.assumptions(&system.assumptions);
        }
        Err(ReductionError::SetNotFirstCoorder { k }) => {
            let zeta = zeta_function(ctx.names());
            let template = reduced_field(xi, &zeta.formal_symbol());
            let system = ctx.wrap(determining_regular(&ctx.l, &template, &ctx.cfg))?;
            ctx.out.input("case", system.label.to_string());
            ctx.out.integer("set co-order", k as i64);
            equation_entries(ctx, &system);
            ctx.out.verdict(
                "determining system by splitting in the free jet variables",
                Status::Proved,
                format!("{} equations", system.equations.len()),
            );
            ctx.assumptions(&system.assumptions);
        }
        Err(e) => return ctx.wrap(Err(e)),
    }
    Ok(())
}

fn verify(ctx: &mut Ctx<'_>, opts: &RunOptions) -> Result<(), RunError> {
    let q = field_input(ctx, opts)?;
    let check = ctx.wrap(invariance_check(&ctx.l, &q, &ctx.cfg))?;
    ctx.out.input("axis", ctx.names().x[check.axis.index()].to_string());
    ctx.expr("associated", &check.associated);
    ctx.expr("residual", &check.residual);
    if let Some((leader, value)) = &check.leader {
        let names = ctx.names().clone();
        let text = format!(
            "{} = {}",
            crate::symbolic::render_atom(leader, &names),
            value.render(&names)
        );
        ctx.out.expressions.insert("leader".into(), RenderedExpr::with_text(value, text));
    }
    ctx.out.verdict(
        "conditional invariance criterion holds",
        Status::vanishes(check.verdict),
        format!("{:?}", check.verdict),
    );
    ctx.assumptions(&check.assumptions);
    Ok(())
}

fn reduce(ctx: &mut Ctx<'_>, opts: &RunOptions) -> Result<(), RunError> {
    let q = field_input(ctx, opts)?;
    let name = ctx.required(&opts.ansatz, "ansatz")?;
    let ansatz = ctx.problem.ansatz(name).cloned().ok_or_else(|| RunError::UnknownName {
        kind: "ansatz",
        name: name.to_string(),
    })?;
    ctx.out.input("ansatz", name);
    let reduction = ctx.wrap(reduce_with_ansatz(&ctx.l, &q, &ansatz, &ctx.cfg))?;
    let weak = ctx.wrap(weak_coorder(&ctx.l, &q, &ctx.cfg))?;
    ctx.expr("multiplier", &reduction.multiplier);
    ctx.expr("reduced", &reduction.body);
    ctx.out.integer("essential_order", reduction.essential_order as i64);
    coorder_entries(ctx, &weak, "coorder ");
    ctx.out.verdict(
        "ansatz reduces the equation to an equation in the invariant",
        Status::Proved,
        format!("essential order {}", reduction.essential_order),
    );
    if reduction.body.is_zero() {
        ctx.out
            .verdict("reduced equation is an identity", Status::Proved, "ultra-singular reduction");
    }
    let (status, detail) = if reduction.exact && weak.weak_is_exact() {
        (
            Status::from_bool(reduction.essential_order == weak.weak_lower),
            format!("{} vs {}", reduction.essential_order, weak.weak_lower),
        )
    } else {
        (Status::Undecidable, "order not certified minimal".to_string())
    };
    ctx.out
        .verdict("essential order equals the weak co-order", status, detail);
    Ok(())
}

fn bijection(ctx: &mut Ctx<'_>, opts: &RunOptions) -> Result<(), RunError> {
    let name = ctx.required(&opts.family, "family")?;
    let family = ctx.problem.family(name).cloned().ok_or_else(|| RunError::UnknownName {
        kind: "family",
        name: name.to_string(),
    })?;
    ctx.out.input("family", name);
    let xi = xi_input(ctx, opts);
    ctx.wrap(family.validate(&ctx.cfg))?;
    let essential = ctx.wrap(family.parameter_derivative(&ctx.cfg))?;
    ctx.out.verdict(
        format!("parameter {} is essential", family.param),
        Status::nonzero_generic(essential),
        "inverse is consistent with the family",
    );
    let rep = ctx.wrap(verify_bijection(&ctx.l, &family, xi, &ctx.cfg))?;
    ctx.expr("zeta", &rep.zeta);
    ctx.out
        .verdict("family solves the equation", Status::vanishes(rep.family_solves), "");
    ctx.out.verdict(
        "family is invariant under the associated operator",
        Status::vanishes(rep.invariance),
        "",
    );
    ctx.out.verdict(
        "zeta satisfies the determining equation",
        Status::vanishes(rep.determining),
        "",
    );
    if let Some(star) = &rep.zeta_star {
        ctx.expr("zeta_star", star);
        if let Some(f) = wave_rhs(&ctx.l) {
            let back = adjoint_operator(star, &f, CoorderBranch::One, Axis::One, ctx.names(), &ctx.cfg);
            let ok = back.as_ref().is_ok_and(|b| same_equation(b, &rep.zeta));
            ctx.out.verdict("adjoint map is an involution", Status::from_bool(ok), "");
        }
    }
    let q = reduced_field(xi, &rep.zeta);
    let weak = ctx.wrap(weak_coorder(&ctx.l, &q, &ctx.cfg))?;
    let (status, detail) = if weak.weak_is_exact() {
        (
            Status::from_bool(weak.weak_lower == 1),
            format!("weak co-order {}", weak.weak_lower),
        )
    } else {
        weak_exactness(&weak)
    };
    ctx.out
        .verdict("weak co-order equals the number of parameters (1)", status, detail);

    let sampling = SurfaceSampling::default();
    let back = ctx.wrap(backlund_verify(&ctx.l, &rep.zeta, &family.inverse, xi, &sampling, &ctx.cfg))?;
    ctx.expr("G", &back.g);
    ctx.out.verdict(
        "inverse is annihilated by the operator",
        Status::vanishes(back.first),
        "",
    );
    ctx.out.verdict(
        "inverse is annihilated by the companion field",
        Status::vanishes(back.second),
        "",
    );
    ctx.out.verdict(
        "equation holds on every level surface of the inverse",
        Status::vanishes(back.surface_identity),
        "",
    );
    let worst = back.samples.iter().map(|s| s.residual.abs()).fold(0.0, f64::max);
    ctx.out.verdict(
        format!("residual vanishes at {} surface points", back.samples.len()),
        if back.all_samples_zero() && !back.samples.is_empty() {
            Status::Sampled
        } else {
            Status::Failed
        },
        format!("max |residual| = {worst:e}"),
    );
    Ok(())
}

#[cfg(not(target_arch = "wasm32"))]
mod clock {
    pub type Instant = std::time::Instant;

    pub fn now() -> Instant {
        Instant::now()
    }

    pub fn elapsed_ms(start: Instant) -> u64 {
        start.elapsed().as_millis() as u64
    }
}

// std::time::Instant is unavailable in the browser.
#[cfg(target_arch = "wasm32")]
mod clock {
    pub type Instant = ();

    pub fn now() -> Instant {}

    pub fn elapsed_ms(_: Instant) -> u64 {
        0
    }
}
