//! Subcommands of the `aps-dirac` binary.
//!
//! Every subcommand reads a TOML run configuration, writes its artifacts into
//! an output directory together with `manifest.json`, and reports a list of
//! assertions. Errors carry the exit code given by [`Error::exit_code`];
//! failed assertions exit with [`ASSERTION_EXIT`].

use std::fs;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use aps_dirac_core::boundary::{adapted_operator_unchecked, kernel_check, KernelReport};
use aps_dirac_core::data::{Bump, BumpSource, NoSource, Source, SupportDescriptor};
use aps_dirac_core::diagnostics::{
    continuity_study, convergence_study, energy_sampled, support_mass, weak_identity, DataMember, Region, Resolution,
    StudyTemplate, SupportBound,
};
use aps_dirac_core::dirac::assemble_spatial_dirac;
use aps_dirac_core::evolution::{green_minus, green_plus, solve_cauchy, Scheme, SolveResult};
use aps_dirac_core::geometry::{conformal_reduce, validate_assumptions};
use aps_dirac_core::io::config::Diagnostic;
use aps_dirac_core::io::report::{energy_rows, study_rows, support_rows, Assertion, Manifest};
use aps_dirac_core::io::{export_snapshot, parse_config, write_csv, write_json, RunConfig};
use aps_dirac_core::{BoundaryCondition, CauchySurface, Error, FoliatedSpacetime, Result, Side, SpinorField, C64};

pub const ASSERTION_EXIT: i32 = 6;
pub const SEED_VAR: &str = "APS_DIRAC_SEED";

/// Flux limit relative to the largest energy.
pub const FLUX_LIMIT: f64 = 1e-11;
/// Relative reduced-norm drift allowed without a source.
pub const NORM_LIMIT: f64 = 1e-10;
pub const LEAKAGE_LIMIT: f64 = 1e-6;
pub const WEAK_LIMIT: f64 = 1e-3;
pub const GREEN_LIMIT: f64 = 0.05;
pub const ORDER_RANGE: (f64, f64) = (1.8, 2.2);
const WEAK_FIELDS: usize = 20;

#[derive(Debug, Parser)]
#[command(name = "aps-dirac", version, about = "Dirac evolution with APS and MIT boundary conditions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the Cauchy problem and write records, snapshots and diagnostics.
    Solve(CommonArgs),
    /// Apply the retarded and advanced Green operators to the configured source.
    Green(CommonArgs),
    /// Self-convergence study over halved resolutions, plus an optional continuity family.
    Study(CommonArgs),
    /// Check the config, the standing assumptions and the boundary kernel condition.
    Validate(CommonArgs),
    /// Spectrum of the adapted boundary operator on each boundary component.
    Spectrum {
        #[command(flatten)]
        common: CommonArgs,
        /// Slice time.
        #[arg(long, default_value_t = 0.0)]
        time: f64,
    },
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Disable all internal parallelism.
    #[arg(long)]
    pub serial: bool,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Solve(_) => "solve",
            Command::Green(_) => "green",
            Command::Study(_) => "study",
            Command::Validate(_) => "validate",
            Command::Spectrum { .. } => "spectrum",
        }
    }

    fn common(&self) -> &CommonArgs {
        match self {
            Command::Solve(c) | Command::Green(c) | Command::Study(c) | Command::Validate(c) => c,
            Command::Spectrum { common, .. } => common,
        }
    }
}

/// Result of a completed subcommand.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub out_dir: PathBuf,
    pub assertions: Vec<Assertion>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            ASSERTION_EXIT
        }
    }
}

/// Seed from `APS_DIRAC_SEED`, zero when unset.
pub fn seed_from_env() -> Result<u64> {
    match std::env::var(SEED_VAR) {
        Ok(v) => v.trim().parse().map_err(|_| Error::Config(format!("{SEED_VAR} must be an unsigned integer, got {v:?}"))),
        Err(_) => Ok(0),
    }
}

struct Run {
    config: RunConfig,
    out: PathBuf,
    manifest: Manifest,
    assertions: Vec<Assertion>,
    enforce: bool,
}

impl Run {
    fn start(command: &Command) -> Result<Run> {
        let args = command.common();
        let text = fs::read_to_string(&args.config)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", args.config.display())))?;
        let mut config = parse_config(&text)?;
        if args.serial {
            config.scheme.parallel = false;
        }
        let seed = seed_from_env()?;
        let out = args.out.clone().unwrap_or_else(|| PathBuf::from(&config.output.dir));
        fs::create_dir_all(&out)?;
        let manifest = Manifest::new(command.name(), &text, seed, !config.scheme.parallel);
        let enforce = config.output.assertions;
        Ok(Run { config, out, manifest, assertions: Vec::new(), enforce })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.manifest.files.push(name.to_string());
        self.out.join(name)
    }

    fn csv(&self) -> bool {
        self.config.output.formats.contains(&aps_dirac_core::io::config::Format::Csv)
    }

    fn json(&self) -> bool {
        self.config.output.formats.contains(&aps_dirac_core::io::config::Format::Json)
    }

    fn assert(&mut self, a: Assertion) {
        self.assertions.push(a);
    }

    fn finish(mut self, summary: serde_json::Value) -> Result<Outcome> {
        if self.json() {
            let mut summary = summary;
            summary["assertions"] = serde_json::to_value(&self.assertions).expect("assertions serialize");
            let p = self.path("summary.json");
            write_json(p, &summary)?;
        }
        let p = self.out.join("manifest.json");
        self.manifest.files.push("manifest.json".into());
        write_json(p, &self.manifest)?;
        let assertions = if self.enforce { self.assertions } else { self.assertions.into_iter().map(|a| Assertion { passed: true, ..a }).collect() };
        Ok(Outcome { out_dir: self.out, assertions })
    }
}

/// Runs a parsed command line.
pub fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        c @ Command::Solve(_) => solve(c),
        c @ Command::Green(_) => green(c),
        c @ Command::Study(_) => study(c),
        c @ Command::Validate(_) => validate(c),
        c @ Command::Spectrum { time, .. } => spectrum(c, *time),
    }
}

fn source_of(bs: &Option<BumpSource>) -> &dyn Source {
    match bs {
        Some(s) => s,
        None => &NoSource,
    }
}

fn initial_field(config: &RunConfig, st: &FoliatedSpacetime, mesh: &Arc<aps_dirac_core::Mesh>) -> Result<SpinorField> {
    Ok(match config.initial_bump(st)? {
        Some((b, a)) => b.field(mesh, 0.0).scaled(a),
        None => SpinorField::zeros(mesh.clone(), 0.0),
    })
}

fn write_snapshots(run: &mut Run, prefix: &str, fields: &[SpinorField]) -> Result<()> {
    if !run.config.output.snapshots {
        return Ok(());
    }
    let dir = run.out.join("snapshots");
    fs::create_dir_all(&dir)?;
    for (i, f) in fields.iter().enumerate() {
        let name = format!("snapshots/{prefix}_{i:05}.bin");
        let p = run.path(&name);
        export_snapshot(f, p)?;
    }
    Ok(())
}

fn record_diagnostics(run: &mut Run, st: &FoliatedSpacetime, result: &SolveResult, source: &Option<BumpSource>, rep: &aps_dirac_core::CliffordRep) -> Result<serde_json::Value> {
    let diags = run.config.output.diagnostics.clone();
    let mut summary = json!({});
    let max_f = result.max_energy();
    if diags.contains(&Diagnostic::Flux) {
        let flux = result.max_abs_flux();
        summary["max_abs_flux"] = json!(flux);
        run.assert(Assertion::at_most("boundary_flux", flux, FLUX_LIMIT * max_f.max(f64::MIN_POSITIVE)));
    }
    if diags.contains(&Diagnostic::Norm) {
        let drift = result.norm_drift();
        summary["norm_drift"] = json!(drift);
        if source.is_none() {
            run.assert(Assertion::at_most("norm_drift", drift, NORM_LIMIT));
        }
    }
    if diags.contains(&Diagnostic::Energy) {
        let e = energy_sampled(result, st, Region::All, 200)?;
        summary["energy"] = json!({ "fitted_c": e.fitted_c, "feasible": e.feasible() });
        run.assert(Assertion { name: "energy_inequality".into(), value: e.fitted_c, limit: f64::INFINITY, passed: e.feasible() });
        if run.csv() {
            let p = run.path("energy.csv");
            write_csv(p, energy_rows(&e))?;
        }
    }
    if diags.contains(&Diagnostic::Support) {
        let mut supports: Vec<SupportDescriptor> = Vec::new();
        if let Some((b, _)) = run.config.initial_bump(st)? {
            supports.push(b.support());
        }
        if let Some(s) = source {
            supports.extend(s.spatial_support());
        }
        let bound = if BoundaryCondition::Mit == st.condition(Side::Lower) || BoundaryCondition::Mit == st.condition(Side::Upper) {
            SupportBound::Improved
        } else {
            SupportBound::Full
        };
        let s = support_mass(result, st, &supports, bound)?;
        summary["support"] = json!({ "bound": s.bound, "max_leakage": s.max_leakage(), "margin": s.margin });
        run.assert(Assertion::at_most("support_leakage", s.max_leakage(), LEAKAGE_LIMIT));
        if run.csv() {
            let p = run.path("support.csv");
            write_csv(p, support_rows(&s))?;
        }
    }
    if diags.contains(&Diagnostic::Weak) {
        let w = weak_identity(result, st, rep, source_of(source), WEAK_FIELDS, run.manifest.seed)?;
        summary["weak_identity"] = json!({ "max_residual": w.max_residual, "residuals": w.residuals });
        run.assert(Assertion::at_most("weak_identity", w.max_residual, WEAK_LIMIT));
    }
    Ok(summary)
}

fn solve(command: &Command) -> Result<Outcome> {
    let mut run = Run::start(command)?;
    let st = run.config.spacetime()?;
    let rep = run.config.rep()?;
    let mesh = run.config.mesh(&st)?;
    let psi0 = initial_field(&run.config, &st, &mesh)?;
    let source = run.config.source(&st)?;
    let mut evo = run.config.evolution();
    if run.config.output.diagnostics.contains(&Diagnostic::Weak) {
        evo.snapshot_stride = 1;
    }
    let result = solve_cauchy(&st, &rep, &mesh, &psi0, source_of(&source), &evo)?;
    if run.csv() {
        let p = run.path("records.csv");
        write_csv(p, &result.records)?;
    }
    write_snapshots(&mut run, "psi", &result.physical)?;
    let mut summary = record_diagnostics(&mut run, &st, &result, &source, &rep)?;
    summary["steps"] = json!(result.step_count());
    summary["snapshot_times"] = json!(result.snapshot_times());
    summary["scheme"] = json!(result.meta);
    summary["max_energy"] = json!(result.max_energy());
    run.finish(summary)
}

fn green(command: &Command) -> Result<Outcome> {
    let mut run = Run::start(command)?;
    let st = run.config.spacetime()?;
    let rep = run.config.rep()?;
    let mesh = run.config.mesh(&st)?;
    let source = run
        .config
        .source(&st)?
        .ok_or_else(|| Error::Config("the green subcommand needs a [data.source] block".into()))?;
    let mut evo = run.config.evolution();
    evo.scheme = Scheme::Midpoint;
    evo.snapshot_stride = 1;
    let plus = green_plus(&st, &rep, &mesh, &source, &evo)?;
    let minus = green_minus(&st, &rep, &mesh, &source, &evo)?;
    let (rp, rm) = (plus.equation_residual(&source)?, minus.equation_residual(&source)?);
    run.assert(Assertion::at_most("green_plus_residual", rp, GREEN_LIMIT));
    run.assert(Assertion::at_most("green_minus_residual", rm, GREEN_LIMIT));
    write_snapshots(&mut run, "green_plus", plus.physical())?;
    write_snapshots(&mut run, "green_minus", minus.physical())?;
    let summary = json!({
        "green_plus": { "t0": plus.t0, "residual": rp, "steps": plus.times().len() - 1 },
        "green_minus": { "t0": minus.t0, "residual": rm, "steps": minus.times().len() - 1 },
    });
    run.finish(summary)
}

fn study(command: &Command) -> Result<Outcome> {
    let mut run = Run::start(command)?;
    let st = run.config.spacetime()?;
    let rep = run.config.rep()?;
    let datum = run.config.initial_bump(&st)?;
    let source = run.config.source(&st)?;
    let (datum, amplitude) = match datum {
        Some((b, a)) => (Some(b), a),
        None => (None, C64::new(1.0, 0.0)),
    };
    let data = DataMember { datum, amplitude, source };
    let template = StudyTemplate { spacetime: st.clone(), rep, data: data.clone(), config: run.config.evolution() };
    let g = &run.config.geometry;
    let mut res = vec![Resolution { radial: g.radial_nodes, angular: g.angular_nodes.unwrap_or(1), dt: run.config.dt() }];
    while res.len() < run.config.study.levels {
        let next = res[res.len() - 1].refined(st.surface());
        res.push(next);
    }
    let report = convergence_study(&template, &res)?;
    if let (Some(&l2), Some(&mx)) = (report.orders_l2.last(), report.orders_max.last()) {
        run.assert(Assertion { name: "order_l2".into(), value: l2, limit: ORDER_RANGE.0, passed: (ORDER_RANGE.0..=ORDER_RANGE.1).contains(&l2) });
        run.assert(Assertion { name: "order_max".into(), value: mx, limit: ORDER_RANGE.0, passed: (ORDER_RANGE.0..=ORDER_RANGE.1).contains(&mx) });
    }
    if run.csv() {
        let p = run.path("study.csv");
        write_csv(p, study_rows(&report))?;
    }
    let mut summary = json!({ "convergence": report });
    let members = run.config.study.continuity_members;
    if members >= 2 {
        let family = continuity_family(&st, &data, members, run.manifest.seed)?;
        let c = continuity_study(&template, &family, res[0])?;
        run.assert(Assertion::at_most("continuity_ratio", c.max_ratio, c.bound));
        summary["continuity"] = json!(c);
    }
    run.finish(summary)
}

/// Members `(1 + u) d + v i d` with `u, v` uniform in `[-0.5, 0.5]`, each bump
/// centre shifted by up to a fifth of its width per coordinate.
fn continuity_family(st: &FoliatedSpacetime, data: &DataMember, members: usize, seed: u64) -> Result<Vec<DataMember>> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let shift = |b: &Bump, rng: &mut rand_chacha::ChaCha8Rng| -> Result<Bump> {
        let center: Vec<f64> = b
            .center
            .iter()
            .enumerate()
            .map(|(i, &c)| c + rng.gen_range(-0.2..0.2) * b.width / if i == 1 { b.arc_scale } else { 1.0 })
            .collect();
        Bump::new(st, &center, b.width, b.shape, b.polarization)
    };
    (0..members)
        .map(|_| {
            let mut m = data.scaled(C64::new(1.0 + rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)));
            if let Some(b) = &m.datum {
                m.datum = Some(shift(b, &mut rng)?);
            }
            if let Some(s) = &mut m.source {
                s.bump = shift(&s.bump, &mut rng)?;
            }
            Ok(m)
        })
        .collect()
}

fn kernel_reports(st: &FoliatedSpacetime, mesh: &Arc<aps_dirac_core::Mesh>, t: f64) -> Result<(Vec<KernelReport>, Vec<aps_dirac_core::boundary::AdaptedBoundaryOperator>)> {
    let (reduced, _) = conformal_reduce(st)?;
    let rep = aps_dirac_core::CliffordRep::build(st.spatial_dim())?;
    let assembly = assemble_spatial_dirac(&reduced, &rep, mesh, t)?;
    let ops = Side::BOTH.iter().map(|&s| adapted_operator_unchecked(&assembly, s)).collect::<Result<Vec<_>>>()?;
    Ok((ops.iter().map(kernel_check).collect(), ops))
}

fn kernel_error(r: &KernelReport) -> Error {
    Error::BoundaryKernel { component: r.component.clone(), min_abs: r.min_abs, threshold: r.threshold }
}

fn validate(command: &Command) -> Result<Outcome> {
    let run = Run::start(command)?;
    let st = run.config.spacetime()?;
    let mesh = run.config.mesh(&st)?;
    let report = validate_assumptions(&st);
    let mut failure = report.clone().into_result().err();
    let mut kernels = Vec::new();
    if failure.is_none() {
        let (ta, tb) = st.window();
        for t in [ta, 0.0, tb] {
            let (reports, _) = kernel_reports(&st, &mesh, t)?;
            for r in reports {
                if !r.passed && failure.is_none() {
                    failure = Some(kernel_error(&r));
                }
                kernels.push(json!({ "t": t, "report": r }));
            }
        }
    }
    let summary = json!({ "assumptions": report, "kernel": kernels, "passed": failure.is_none() });
    let outcome = run.finish(summary)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(outcome),
    }
}

#[derive(serde::Serialize)]
struct SpectrumRow {
    component: &'static str,
    mode: f64,
    eigenvalue: f64,
}

fn spectrum(command: &Command, t: f64) -> Result<Outcome> {
    let mut run = Run::start(command)?;
    let st = run.config.spacetime()?;
    st.require_in_window(t)?;
    let mesh = run.config.mesh(&st)?;
    let (reports, ops) = kernel_reports(&st, &mesh, t)?;
    let rep = aps_dirac_core::CliffordRep::build(st.spatial_dim())?;
    let (reduced, _) = conformal_reduce(&st)?;
    let assembly = assemble_spatial_dirac(&reduced, &rep, &mesh, t)?;
    let mut rows = Vec::new();
    for op in &ops {
        let modes = match st.surface() {
            CauchySurface::Annulus { .. } => op.mode_spectrum(assembly.transform()),
            CauchySurface::Interval { .. } => op.eigenvalues().iter().map(|&l| (0.0, l)).collect(),
        };
        rows.extend(modes.into_iter().map(|(mode, eigenvalue)| SpectrumRow { component: op.component(), mode, eigenvalue }));
    }
    if run.csv() {
        let p = run.path("spectrum.csv");
        write_csv(p, &rows)?;
    }
    let summary = json!({ "t": t, "kernel": reports });
    let outcome = run.finish(summary)?;
    if let Some(bad) = reports.iter().find(|r| !r.passed) {
        return Err(kernel_error(bad));
    }
    Ok(outcome)
}
