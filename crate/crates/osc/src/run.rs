//! Command pipelines. Each command writes its CSV files and a manifest into
//! the output directory.

use std::collections::BTreeMap;
use std::fmt;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use osc_core::error::Error;
use osc_core::fock::{particle_operators, FockSpace, ManyBodySpace, TaggedSpace};
use osc_core::linalg::Mat;
use osc_core::otoc::{
    conditioned_averages, cm_rel_decomposition, default_step, exact_time_average, k_matrix, k_min_eigenvalue,
    lab_from_rel, otoc_point, otoc_series, product_system, rel_y1, time_grid, trapezoid_mean, EigenOperator,
    OtocPoint, OtocProblem, Workspace,
};
use osc_core::quench::{
    analytic_limit_variance, plain_quench_with, separated_quench_with, Limit, PlainQuench, SeparatedQuench, Stage,
};
use osc_core::scaling::{
    fit_scaling, linear_relation, samples, sweep_point, work_otoc_pairs, FitForm, SweepRow, SweepSpec, SweepTable,
};
use osc_core::spectral::{check_conditions, diagonalize, diagonalize_matrix, EigenSystem, ResonanceReport};

use crate::cache::{Cache, CODE_VERSION};
use crate::config::{AvgMethod, Operator, Route, RunConfig, SpaceKind};
use crate::output::{num, write_plot_script, Manifest, Table};
use crate::pool::{chunks, par_map};

#[derive(Clone, Debug, PartialEq)]
pub enum Command {
    Spectrum,
    Quench,
    Work,
    Otoc,
    Avg,
    Check,
    Sweep,
    /// Fit a sweep table; defaults to `sweep.csv` in the output directory.
    Fit { input: Option<PathBuf> },
    Limits { limit: Limit },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Quench => "quench",
            Command::Work => "work",
            Command::Otoc => "otoc",
            Command::Avg => "avg",
            Command::Check => "check",
            Command::Sweep => "sweep",
            Command::Fit { .. } => "fit",
            Command::Limits { .. } => "limits",
        }
    }
}

#[derive(Debug)]
pub enum Failure {
    /// Bad input: exit code 2.
    Validation(String),
    /// A numerical gate refused the result: exit code 3.
    Gate(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Gate(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Validation(m) => write!(f, "invalid input: {m}"),
            Failure::Gate(m) => write!(f, "numerical gate failed: {m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Incomplete { .. }
            | Error::ConditionsViolated(_)
            | Error::CmContamination { .. }
            | Error::NoConvergence { .. }
            | Error::RankDeficient { .. }
            | Error::LossyEmbedding { .. }
            | Error::RootNotBracketed { .. } => Failure::Gate(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Validation(e.to_string())
    }
}

pub struct Context {
    pub cfg: RunConfig,
    pub cache: Cache,
    pub jobs: usize,
    pub plot: bool,
}

/// What a command produced.
#[derive(Default)]
pub struct Report {
    pub outputs: Vec<PathBuf>,
    pub results: BTreeMap<String, String>,
    /// Lines for standard output.
    pub stdout: Vec<String>,
    /// Set when the outputs were written but a gate failed.
    pub gate: Option<String>,
}

impl Report {
    fn put(&mut self, key: &str, value: impl ToString) {
        self.results.insert(key.to_string(), value.to_string());
    }

    fn table(&mut self, ctx: &Context, name: &str, t: &Table, plot: Option<(&str, &[&str])>) -> Result<(), Failure> {
        let path = ctx.cfg.output_dir.join(name);
        t.write(&path)?;
        self.outputs.push(path.clone());
        if let (true, Some((x, ys))) = (ctx.plot, plot) {
            self.outputs.push(write_plot_script(&path, x, ys, &t.header)?);
        }
        Ok(())
    }

    fn report_conditions(&mut self, r: &ResonanceReport, diag_tol: f64) {
        self.put("conditions.degenerate_pairs", r.degenerate_pairs.len());
        self.put("conditions.quadruplet_resonances", r.quadruplet_resonances);
        if let Some(q) = r.relevant_quadruplets {
            self.put("conditions.relevant_quadruplets", q);
        }
        let diag = r.diag_residual.iter().copied().fold(0.0, f64::max);
        self.put("conditions.diag_residual", num(diag));
        self.put("conditions.merge_warning", r.merge_warning);
        self.put("conditions.passes", r.passes(diag_tol));
    }
}

/// Run a command, write its manifest and return the exit code. Diagnostics
/// go to standard error.
pub fn run(cmd: &Command, ctx: &Context) -> i32 {
    let start = Instant::now();
    if let Err(e) = ctx.cfg.validate() {
        eprintln!("error: invalid input: {e}");
        return 2;
    }
    let report = match execute(cmd, ctx) {
        Ok(r) => r,
        Err(f) => {
            eprintln!("error: {f}");
            return f.exit_code();
        }
    };
    for line in &report.stdout {
        println!("{line}");
    }
    let manifest = Manifest {
        command: cmd.name().to_string(),
        code_version: CODE_VERSION.to_string(),
        outputs: report.outputs.iter().map(|p| p.display().to_string()).collect(),
        results: report.results.clone(),
        wall_time_s: start.elapsed().as_secs_f64(),
        config: ctx.cfg.clone(),
    };
    let path = ctx.cfg.output_dir.join(format!("{}.manifest.toml", cmd.name()));
    if let Err(e) = std::fs::create_dir_all(&ctx.cfg.output_dir).and_then(|_| manifest.write(&path)) {
        eprintln!("error: cannot write manifest {}: {e}", path.display());
        return 2;
    }
    match report.gate {
        Some(msg) => {
            eprintln!("error: numerical gate failed: {msg}");
            3
        }
        None => 0,
    }
}

pub fn execute(cmd: &Command, ctx: &Context) -> Result<Report, Failure> {
    match cmd {
        Command::Spectrum => spectrum(ctx),
        Command::Quench => quench(ctx),
        Command::Work => work(ctx),
        Command::Otoc => otoc(ctx),
        Command::Avg => avg(ctx),
        Command::Check => check(ctx),
        Command::Sweep => sweep(ctx),
        Command::Fit { input } => fit(ctx, input.as_deref()),
        Command::Limits { limit } => limits(ctx, *limit),
    }
}

enum Space {
    Symmetric(FockSpace),
    Tagged(TaggedSpace),
}

macro_rules! on_space {
    ($sp:expr, $s:ident => $body:expr) => {
        match $sp {
            Space::Symmetric($s) => $body,
            Space::Tagged($s) => $body,
        }
    };
}

fn build_space(cfg: &RunConfig) -> Result<Space, Failure> {
    let e = cfg.effective_e_cut();
    Ok(match cfg.space {
        SpaceKind::Symmetric => Space::Symmetric(FockSpace::new(cfg.n, e)?),
        SpaceKind::Tagged => Space::Tagged(TaggedSpace::new(cfg.n, e)?),
    })
}

fn tagged_space(cfg: &RunConfig) -> Result<TaggedSpace, Failure> {
    if cfg.space != SpaceKind::Tagged {
        return Err(Failure::Validation("single-particle operators need space = \"tagged\"".into()));
    }
    Ok(TaggedSpace::new(cfg.n, cfg.effective_e_cut())?)
}

/// Cache descriptor of one Hamiltonian; `trap` is the frequency it is built with.
fn descriptor(cfg: &RunConfig, trap: f64, stage: &str) -> String {
    format!(
        "N={};g={:016x};gamma={:016x};e_cut={:016x};n_orb={};mode={:?};space={:?};route={:?};stage={stage}",
        cfg.n,
        cfg.g.to_bits(),
        trap.to_bits(),
        cfg.effective_e_cut().to_bits(),
        cfg.n_orb.map_or_else(|| "-".to_string(), |k| k.to_string()),
        cfg.mode,
        cfg.space,
        cfg.route,
    )
}

fn ground_only(es: EigenSystem) -> EigenSystem {
    let d = es.basis_dim();
    EigenSystem {
        energies: es.energies[..1].to_vec(),
        vectors: Mat::from_rows(1, d, es.vectors.row(0).to_vec()),
        ortho_residual: es.ortho_residual,
        eigen_residual: es.eigen_residual,
    }
}

fn separated<S: ManyBodySpace>(ctx: &Context, space: &S, threshold: f64, report: &mut Report) -> Result<SeparatedQuench, Failure> {
    let cfg = &ctx.cfg;
    let mut hits = 0;
    let sep = separated_quench_with(space, cfg.g, cfg.gamma, cfg.mode.into(), threshold, cfg.tol.cm_tail, &mut |stage, h| {
        let (trap, name) = match stage {
            Stage::Final => (1.0, "final"),
            Stage::Initial => (cfg.gamma, "initial"),
        };
        let (es, hit) = ctx.cache.get_or_compute(&descriptor(cfg, trap, name), || {
            let es = diagonalize_matrix(h)?;
            Ok::<_, Error>(if stage == Stage::Initial { ground_only(es) } else { es })
        })?;
        hits += usize::from(hit);
        Ok(es)
    })?;
    report.put("cache_hits", hits);
    report.put("completeness", num(sep.completeness));
    report.put("rel_dim", sep.rel_dim());
    report.put("cm_levels", sep.cm.len());
    report.put("eigen_residual", num(sep.rel.eigen_residual));
    Ok(sep)
}

fn plain<S: ManyBodySpace>(ctx: &Context, space: &S, threshold: f64, report: &mut Report) -> Result<PlainQuench, Failure> {
    let cfg = &ctx.cfg;
    let mut hits = 0;
    let q = plain_quench_with(space, cfg.g, cfg.gamma, cfg.mode.into(), threshold, &mut |h| {
        let (es, hit) = ctx.cache.get_or_compute(&descriptor(cfg, 1.0, "final"), || diagonalize(h))?;
        hits += usize::from(hit);
        Ok(es)
    })?;
    report.put("cache_hits", hits);
    report.put("completeness", num(q.record.completeness));
    report.put("dim", q.eig.dim());
    report.put("eigen_residual", num(q.eig.eigen_residual));
    Ok(q)
}

fn spectrum(ctx: &Context) -> Result<Report, Failure> {
    let mut r = Report::default();
    let space = build_space(&ctx.cfg)?;
    let energies = match ctx.cfg.route {
        // the spectrum alone needs no completeness gate
        Route::Separated => on_space!(&space, s => separated(ctx, s, 0.0, &mut r))?.rel.energies,
        Route::Plain => on_space!(&space, s => plain(ctx, s, 0.0, &mut r))?.eig.energies,
    };
    let mut t = Table::new(&["j", "E"]);
    for (j, e) in energies.iter().enumerate() {
        t.push(vec![j.to_string(), num(*e)]);
    }
    r.put("ground_energy", num(energies[0]));
    r.table(ctx, "spectrum.csv", &t, Some(("j", &["E"])))?;
    Ok(r)
}

fn quench(ctx: &Context) -> Result<Report, Failure> {
    let mut r = Report::default();
    let space = build_space(&ctx.cfg)?;
    let th = ctx.cfg.tol.completeness;
    let mut t = Table::new(&["j", "E", "c"]);
    match ctx.cfg.route {
        Route::Separated => {
            let sep = on_space!(&space, s => separated(ctx, s, th, &mut r))?;
            for (j, (e, c)) in sep.rel.energies.iter().zip(&sep.c_rel).enumerate() {
                t.push(vec![j.to_string(), num(*e), num(*c)]);
            }
            let mut cm = Table::new(&["n", "s"]);
            for (n, s) in sep.cm.iter().enumerate() {
                cm.push(vec![n.to_string(), num(*s)]);
            }
            r.put("e_initial", num(sep.e_initial));
            r.put("rel_initial", num(sep.rel_initial));
            r.table(ctx, "cm.csv", &cm, Some(("n", &["s"])))?;
        }
        Route::Plain => {
            let q = on_space!(&space, s => plain(ctx, s, th, &mut r))?;
            for (j, (e, c)) in q.eig.energies.iter().zip(&q.record.c).enumerate() {
                t.push(vec![j.to_string(), num(*e), num(*c)]);
            }
            r.put("e_initial", num(q.record.e_initial));
        }
    }
    r.table(ctx, "quench.csv", &t, Some(("E", &["c"])))?;
    Ok(r)
}

fn work(ctx: &Context) -> Result<Report, Failure> {
    let mut r = Report::default();
    let space = build_space(&ctx.cfg)?;
    let th = ctx.cfg.tol.completeness;
    let stats = match ctx.cfg.route {
        Route::Separated => on_space!(&space, s => separated(ctx, s, th, &mut r))?.work_stats(),
        Route::Plain => on_space!(&space, s => plain(ctx, s, th, &mut r))?.work_stats(),
    };
    let mut t = Table::new(&["W", "P"]);
    for (w, p) in &stats.distribution {
        t.push(vec![num(*w), num(*p)]);
    }
    r.put("mean", num(stats.mean));
    r.put("second_moment", num(stats.second_moment));
    r.put("variance", num(stats.variance));
    r.put("limit_g0", num(analytic_limit_variance(ctx.cfg.n, ctx.cfg.gamma, Limit::G0)?));
    r.put("limit_tg", num(analytic_limit_variance(ctx.cfg.n, ctx.cfg.gamma, Limit::Tg)?));
    r.table(ctx, "work.csv", &t, Some(("W", &["P"])))?;
    Ok(r)
}

/// Energies, operator pair and initial components in a common eigenbasis.
struct Problem {
    energies: Vec<f64>,
    a: EigenOperator,
    b: EigenOperator,
    c: Vec<f64>,
    /// Separated route: the relative sector, for averages and audits.
    rel: Option<RelPart>,
}

struct RelPart {
    sep: SeparatedQuench,
    y1: EigenOperator,
    space: TaggedSpace,
}

impl Problem {
    fn view(&self) -> Result<OtocProblem<'_>, Failure> {
        Ok(OtocProblem::new(&self.energies, &self.a, &self.b, &self.c)?)
    }
}

fn problem(ctx: &Context, report: &mut Report) -> Result<Problem, Failure> {
    let cfg = &ctx.cfg;
    let space = tagged_space(cfg)?;
    let th = cfg.tol.completeness;
    match cfg.route {
        Route::Separated => {
            if cfg.ops != [Operator::X1, Operator::X1] {
                return Err(Failure::Validation("the separated route supports ops = [\"x1\", \"x1\"] only; use route = \"plain\"".into()));
            }
            let sep = separated(ctx, &space, th, report)?;
            report.put("cm_deviation", num(sep.check_cm_quanta(&space)?));
            let y1 = EigenOperator::real(rel_y1(&sep, &space)?);
            let prod = product_system(&sep, &y1.m, 3);
            report.put("product_dim", prod.energies.len());
            Ok(Problem {
                energies: prod.energies,
                a: prod.x1.clone(),
                b: prod.x1,
                c: prod.c,
                rel: Some(RelPart { sep, y1, space }),
            })
        }
        Route::Plain => {
            let q = plain(ctx, &space, th, report)?;
            let ops = particle_operators(&space)?;
            let pick = |o: Operator| match o {
                Operator::X1 => EigenOperator::from_lab(&ops.x1, &q.eig),
                Operator::P1 => EigenOperator::from_lab(&ops.p1, &q.eig),
            };
            Ok(Problem { a: pick(cfg.ops[0]), b: pick(cfg.ops[1]), energies: q.eig.energies, c: q.record.c, rel: None })
        }
    }
}

/// Points at `times`, computed in contiguous chunks across `jobs` threads.
fn points_parallel(p: &OtocProblem, times: &[f64], jobs: usize) -> Vec<OtocPoint> {
    let parts = chunks(times.len(), jobs);
    par_map(&parts, jobs, |range| {
        let mut ws = Workspace::new(p);
        times[range.clone()].iter().map(|&t| otoc_point(p, &mut ws, t)).collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect()
}

fn series_times(cfg: &RunConfig) -> Vec<f64> {
    let w = &cfg.window;
    if w.n_times == 1 {
        return vec![0.0];
    }
    let h = w.t_end / (w.n_times - 1) as f64;
    (0..w.n_times).map(|k| k as f64 * h).collect()
}

fn otoc(ctx: &Context) -> Result<Report, Failure> {
    let mut r = Report::default();
    let prob = problem(ctx, &mut r)?;
    let p = prob.view()?;
    let times = series_times(&ctx.cfg);
    let points = if ctx.jobs <= 1 { otoc_series(&p, &times)?.points } else { points_parallel(&p, &times, ctx.jobs) };
    let mut t = Table::new(&["t", "ReD", "ImD", "ReI", "ImI", "ReF", "ImF", "C"]);
    let mut identity: f64 = 0.0;
    for q in &points {
        identity = identity.max((q.c - (q.d.re + q.i.re - 2.0 * q.f.re)).abs());
        t.push(vec![num(q.t), num(q.d.re), num(q.d.im), num(q.i.re), num(q.i.im), num(q.f.re), num(q.f.im), num(q.c)]);
    }
    r.put("dim", p.dim());
    r.put("identity_residual", num(identity));
    r.table(ctx, "otoc.csv", &t, Some(("t", &["C"])))?;
    Ok(r)
}

fn avg(ctx: &Context) -> Result<Report, Failure> {
    let cfg = &ctx.cfg;
    let mut r = Report::default();
    let prob = problem(ctx, &mut r)?;
    let mut t = Table::new(&["quantity", "value"]);
    let row = |t: &mut Table, k: &str, v: f64| t.push(vec![k.to_string(), num(v)]);
    let value = match (cfg.method, &prob.rel) {
        (AvgMethod::Exact, Some(rel)) => {
            let dec = cm_rel_decomposition(&rel.sep, &rel.space, cfg.tol.resonance)?;
            row(&mut t, "D", dec.c_xx.d);
            row(&mut t, "I", dec.c_xx.i);
            row(&mut t, "ReF", dec.c_xx.f.re);
            row(&mut t, "ImF", dec.c_xx.f.im);
            row(&mut t, "C_YY", dec.c_yy.c);
            row(&mut t, "C_RR", dec.c_rr.c);
            row(&mut t, "additivity_residual", dec.additivity_residual);
            r.put("merge_warning", dec.c_xx.merge_warning || dec.c_yy.merge_warning);
            r.report_conditions(&dec.report, cfg.tol.diag);
            dec.c_xx.c
        }
        (AvgMethod::Exact, None) => {
            let e = exact_time_average(&prob.view()?, cfg.tol.resonance)?;
            row(&mut t, "D", e.d);
            row(&mut t, "I", e.i);
            row(&mut t, "ReF", e.f.re);
            row(&mut t, "ImF", e.f.im);
            r.put("merge_warning", e.merge_warning);
            e.c
        }
        (AvgMethod::Window, rel) => {
            // the separated route assembles C_xx from the relative problem
            let (p, n) = match rel {
                Some(rel) => (OtocProblem::new(&rel.sep.rel.energies, &rel.y1, &rel.y1, &rel.sep.c_rel)?, Some(rel.sep.n)),
                None => (prob.view()?, None),
            };
            let dt = cfg.window.dt.unwrap_or_else(|| default_step(&p));
            let times = time_grid(cfg.window.t_max, dt)?;
            let pts = points_parallel(&p, &times, ctx.jobs);
            let values: Vec<f64> = pts.iter().map(|q| n.map_or(q.c, |n| lab_from_rel(q, n))).collect();
            row(&mut t, "t_max", cfg.window.t_max);
            row(&mut t, "dt", times[1] - times[0]);
            trapezoid_mean(&values)
        }
        (AvgMethod::Conditioned, rel) => {
            let (view, extra) = match rel {
                Some(rel) => (OtocProblem::new(&rel.sep.rel.energies, &rel.y1, &rel.y1, &rel.sep.c_rel)?, Some(rel.sep.n)),
                None => (prob.view()?, None),
            };
            let report = check_conditions(view.energies, &[&view.a.m, &view.b.m], cfg.tol.resonance, Some(view.c));
            r.report_conditions(&report, cfg.tol.diag);
            let k_ab = k_matrix(view.a, view.b);
            let k_ba = k_matrix(view.b, view.a);
            r.put("k_min_eigenvalue", num(k_min_eigenvalue(&k_ab)?.min(k_min_eigenvalue(&k_ba)?)));
            let ca = conditioned_averages(&k_ab, &k_ba, view.c, &report, cfg.tol.diag)?;
            row(&mut t, "D", ca.d);
            row(&mut t, "I", ca.i);
            row(&mut t, "ReF", ca.f);
            // C̄_xx = C̄_YY + C̄_RR/N² with C̄_RR = ½
            ca.c + extra.map_or(0.0, |n| 0.5 / (n * n) as f64)
        }
    };
    row(&mut t, "C", value);
    r.put("C", num(value));
    r.put("method", format!("{:?}", cfg.method).to_lowercase());
    r.table(ctx, "avg.csv", &t, None)?;
    Ok(r)
}

fn check(ctx: &Context) -> Result<Report, Failure> {
    let cfg = &ctx.cfg;
    let mut r = Report::default();
    let prob = problem(ctx, &mut r)?;
    let view = match &prob.rel {
        Some(rel) => OtocProblem::new(&rel.sep.rel.energies, &rel.y1, &rel.y1, &rel.sep.c_rel)?,
        None => prob.view()?,
    };
    let report = check_conditions(view.energies, &[&view.a.m, &view.b.m], cfg.tol.resonance, Some(view.c));
    let k_min = k_min_eigenvalue(&k_matrix(view.a, view.b))?;
    r.report_conditions(&report, cfg.tol.diag);
    r.put("k_min_eigenvalue", num(k_min));
    let diag = report.diag_residual.iter().copied().fold(0.0, f64::max);
    let mut t = Table::new(&["quantity", "value"]);
    t.push(vec!["sector".into(), if prob.rel.is_some() { "relative".into() } else { "lab".into() }]);
    t.push(vec!["dim".into(), view.dim().to_string()]);
    t.push(vec!["degenerate_pairs".into(), report.degenerate_pairs.len().to_string()]);
    t.push(vec!["quadruplet_resonances".into(), report.quadruplet_resonances.to_string()]);
    t.push(vec!["relevant_quadruplets".into(), report.relevant_quadruplets.map_or("-".into(), |q| q.to_string())]);
    t.push(vec!["diag_residual".into(), num(diag)]);
    t.push(vec!["merge_warning".into(), report.merge_warning.to_string()]);
    t.push(vec!["k_min_eigenvalue".into(), num(k_min)]);
    t.push(vec!["passes".into(), report.passes(cfg.tol.diag).to_string()]);
    r.table(ctx, "check.csv", &t, None)?;
    if !report.passes(cfg.tol.diag) {
        r.gate = Some("spectral conditions violated".into());
    }
    Ok(r)
}

fn sweep_specs(cfg: &RunConfig) -> Result<Vec<SweepSpec>, Failure> {
    let s = &cfg.sweep;
    if s.n.is_empty() || s.g.is_empty() || s.gamma.is_empty() {
        return Err(Failure::Validation("sweep needs non-empty sweep.n, sweep.g and sweep.gamma".into()));
    }
    let mut specs = Vec::new();
    for &g in &s.g {
        for (i, &n) in s.n.iter().enumerate() {
            for &gamma in &s.gamma {
                specs.push(SweepSpec {
                    n,
                    g,
                    gamma,
                    e_cut_work: s.e_cut_work[i],
                    e_cut_otoc: s.e_cut_otoc.get(i).copied(),
                    mode: cfg.mode.into(),
                    threshold: cfg.tol.completeness,
                    cm_tail: cfg.tol.cm_tail,
                    tol: cfg.tol.resonance,
                });
            }
        }
    }
    Ok(specs)
}

pub const SWEEP_HEADER: [&str; 11] =
    ["N", "g", "gamma", "e_cut_work", "e_cut_otoc", "E_I", "dW2", "C_bar", "completeness", "method", "error"];

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, num)
}

pub fn sweep_table(table: &SweepTable) -> Table {
    let mut t = Table::new(&SWEEP_HEADER);
    for r in &table.rows {
        t.push(vec![
            r.n.to_string(),
            num(r.g),
            num(r.gamma),
            num(r.e_cut_work),
            opt(r.e_cut_otoc),
            num(r.e_initial),
            num(r.work_variance),
            opt(r.c_bar),
            num(r.completeness),
            r.method.clone(),
            r.error.clone().unwrap_or_default(),
        ]);
    }
    t
}

/// Parse a table written by [`sweep_table`].
pub fn parse_sweep(t: &Table) -> Result<SweepTable, Failure> {
    let col = |name: &str| t.column(name).ok_or_else(|| Failure::Validation(format!("sweep table lacks column {name}")));
    let idx: Vec<usize> = SWEEP_HEADER.iter().map(|h| col(h)).collect::<Result<_, _>>()?;
    let bad = |what: &str, line: usize| Failure::Validation(format!("sweep table row {line}: bad {what}"));
    let mut rows = Vec::with_capacity(t.rows.len());
    for (line, rec) in t.rows.iter().enumerate() {
        let f = |k: usize| rec[idx[k]].parse::<f64>().map_err(|_| bad(SWEEP_HEADER[k], line + 1));
        let of = |k: usize| if rec[idx[k]].is_empty() { Ok(None) } else { f(k).map(Some) };
        let error = &rec[idx[10]];
        rows.push(SweepRow {
            n: rec[idx[0]].parse().map_err(|_| bad("N", line + 1))?,
            g: f(1)?,
            gamma: f(2)?,
            e_cut_work: f(3)?,
            e_cut_otoc: of(4)?,
            e_initial: f(5)?,
            work_variance: f(6)?,
            c_bar: of(7)?,
            completeness: f(8)?,
            method: rec[idx[9]].clone(),
            error: (!error.is_empty()).then(|| error.clone()),
        });
    }
    Ok(SweepTable { rows })
}

fn sweep(ctx: &Context) -> Result<Report, Failure> {
    let mut r = Report::default();
    let specs = sweep_specs(&ctx.cfg)?;
    let table = SweepTable { rows: par_map(&specs, ctx.jobs, sweep_point) };
    let failed = table.rows.iter().filter(|x| !x.is_ok()).count();
    for row in table.rows.iter().filter(|x| !x.is_ok()) {
        eprintln!("warning: N={} g={} gamma={}: {}", row.n, row.g, row.gamma, row.error.as_deref().unwrap_or(""));
    }
    r.put("points", table.rows.len());
    r.put("failed_points", failed);
    let min_c = table.ok_rows().map(|x| x.completeness).fold(f64::INFINITY, f64::min);
    if min_c.is_finite() {
        r.put("completeness", num(min_c));
    }
    r.table(ctx, "sweep.csv", &sweep_table(&table), Some(("gamma", &["dW2", "C_bar"])))?;
    Ok(r)
}

fn fit(ctx: &Context, input: Option<&Path>) -> Result<Report, Failure> {
    let mut r = Report::default();
    let path = input.map_or_else(|| ctx.cfg.output_dir.join("sweep.csv"), Path::to_path_buf);
    let table = parse_sweep(&Table::read(&path).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?)?;
    let mut gs: Vec<f64> = Vec::new();
    for row in table.ok_rows() {
        if !gs.contains(&row.g) {
            gs.push(row.g);
        }
    }
    let mut fits = Table::new(&["g", "form", "variant", "b", "b_stderr", "lambda", "k", "residual_rms", "iterations", "singular", "error"]);
    let mut per_n = Table::new(&["g", "form", "variant", "N", "lambda", "k"]);
    let mut lin = Table::new(&["g", "N", "slope", "intercept", "r2", "error"]);
    for &g in &gs {
        for (form, fname) in [(FitForm::Work, "work"), (FitForm::Otoc, "otoc")] {
            let all = samples(&table, g, form);
            let variants: [(&str, Vec<_>); 2] = [("all", all.clone()), ("n>=3", all.into_iter().filter(|s| s.0 >= 3).collect())];
            for (variant, data) in variants {
                let key = format!("{fname}.{variant}.g={g}");
                match fit_scaling(&data, g, form) {
                    Ok(f) => {
                        fits.push(vec![
                            num(g),
                            fname.into(),
                            variant.into(),
                            num(f.b),
                            num(f.b_stderr()),
                            num(f.lambda),
                            num(f.k),
                            num(f.residual_rms),
                            f.iterations.to_string(),
                            f.singular.to_string(),
                            String::new(),
                        ]);
                        for p in &f.per_n {
                            per_n.push(vec![num(g), fname.into(), variant.into(), p.n.to_string(), num(p.lambda), num(p.k)]);
                        }
                        r.put(&format!("{key}.b"), num(f.b));
                    }
                    Err(e) => {
                        let mut row = vec![num(g), fname.into(), variant.into()];
                        row.extend((0..7).map(|_| String::new()));
                        row.push(e.to_string());
                        fits.push(row);
                    }
                }
            }
        }
        let mut ns: Vec<usize> = table.at_g(g).iter().map(|x| x.n).collect();
        ns.dedup();
        for n in ns {
            match linear_relation(&work_otoc_pairs(&table, n, g)) {
                Ok(l) => lin.push(vec![num(g), n.to_string(), num(l.slope), num(l.intercept), num(l.r2), String::new()]),
                Err(e) => lin.push(vec![num(g), n.to_string(), String::new(), String::new(), String::new(), e.to_string()]),
            }
        }
    }
    r.put("input", path.display());
    r.table(ctx, "fit.csv", &fits, None)?;
    r.table(ctx, "fit_per_n.csv", &per_n, None)?;
    r.table(ctx, "linear.csv", &lin, None)?;
    Ok(r)
}

fn limits(ctx: &Context, limit: Limit) -> Result<Report, Failure> {
    let mut r = Report::default();
    let v = analytic_limit_variance(ctx.cfg.n, ctx.cfg.gamma, limit)?;
    r.put("variance", num(v));
    r.stdout.push(format!("{v}"));
    Ok(r)
}
