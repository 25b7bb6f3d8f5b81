//! Experiment presets, the check runner and the files a run writes.
//!
//! A run writes into one directory:
//!
//! ```text
//! preset.json          the full configuration
//! graph.json           the generated graph
//! profile.json         E(x, R) at the centre, with the fitted exponent
//! profile.csv          R,E columns
//! reports/NN_name.json one file per check (config and version embedded)
//! reports/NN_name.csv  grid columns of estimate checks
//! summary.csv          check,statistic,constants,pass,error
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use heatlab_core::estimates::{
    check_dg, check_due, check_exit_tail, check_lvv, check_mv, check_pmv, check_tc, check_two_step, check_ue,
    DgConfig, DueConfig, EstimateReport, MvConfig, PmvConfig, ProfileBook, TailConfig, TcConfig, TwoStepConfig,
    UeConfig,
};
use heatlab_core::generators::GeneratorSpec;
use heatlab_core::graph::P0Report;
use heatlab_core::io::write_graph;
use heatlab_core::isoperimetry::{
    check_e, check_fk, check_lebar, check_llrv, check_rho, default_delta_grid, subset_families, FamilyBudget,
    InequalityReport, InnerBudget, LemmaReport,
};
use heatlab_core::kernel::{kernel_sanity, KernelSanity, SanityConfig};
use heatlab_core::potential::{ser_report, ExitCache, ExitProfile, SerReport};
use heatlab_core::volume::{volume_regularity_report, VolumeReport};
use heatlab_core::{VertexId, VertexSet, WeightedGraph};

pub mod presets;

pub const VERSION: &str = concat!("heatlab ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("unknown preset `{0}` (known: {1})")]
    UnknownPreset(String, String),
    #[error(transparent)]
    Core(#[from] heatlab_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// A vertex named relative to the run's centre.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// The smallest-id vertex at this distance from the centre.
    Distance(usize),
    /// Entry of `meta.cut_vertices`.
    CutVertex(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IsoKind {
    E,
    Fk,
    Rho,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case")]
pub enum CheckSpec {
    P0,
    Volume {
        radii: Vec<usize>,
    },
    /// Local dyadic slopes of `E(x, R)`; drift ≥ 0.1 marks a walk with no
    /// single exponent.
    Profile {
        r_max: usize,
    },
    ExitScales {
        radii: Vec<usize>,
    },
    Isoperimetry {
        kind: IsoKind,
        radius: usize,
        budget: FamilyBudget,
    },
    Lemmas {
        radius: usize,
        budget: FamilyBudget,
    },
    KernelSanity {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        graph: Option<GeneratorSpec>,
        config: SanityConfig,
    },
    Due {
        config: DueConfig,
    },
    Ue {
        targets: Vec<Target>,
        n_grid: Vec<usize>,
        config: UeConfig,
    },
    /// Balls of `ball_radius` at set distance `d` for each `d`, with
    /// `n ∈ {d, d²/4, d²}`.
    Dg {
        ball_radius: usize,
        distances: Vec<usize>,
        config: DgConfig,
    },
    ExitTail {
        radii: Vec<usize>,
        config: TailConfig,
    },
    Pmv {
        radius: usize,
        config: PmvConfig,
    },
    Mv {
        radius: usize,
        config: MvConfig,
    },
    Tc {
        radii: Vec<usize>,
        config: TcConfig,
    },
    Lvv {
        targets: Vec<Target>,
        n_grid: Vec<usize>,
        eps_grid: Vec<f64>,
    },
    TwoStep {
        radii: Vec<usize>,
        config: TwoStepConfig,
    },
}

impl CheckSpec {
    pub fn label(&self) -> String {
        match self {
            CheckSpec::P0 => "p0".into(),
            CheckSpec::Volume { .. } => "volume".into(),
            CheckSpec::Profile { .. } => "profile".into(),
            CheckSpec::ExitScales { .. } => "exit_scales".into(),
            CheckSpec::Isoperimetry { kind, radius, .. } => {
                let k = match kind {
                    IsoKind::E => "e",
                    IsoKind::Fk => "fk",
                    IsoKind::Rho => "rho",
                };
                format!("{k}_r{radius}")
            }
            CheckSpec::Lemmas { .. } => "lemmas".into(),
            CheckSpec::KernelSanity { .. } => "kernel_sanity".into(),
            CheckSpec::Due { .. } => "due".into(),
            CheckSpec::Ue { .. } => "ue".into(),
            CheckSpec::Dg { .. } => "dg".into(),
            CheckSpec::ExitTail { .. } => "exit_tail".into(),
            CheckSpec::Pmv { .. } => "pmv".into(),
            CheckSpec::Mv { .. } => "mv".into(),
            CheckSpec::Tc { .. } => "tc".into(),
            CheckSpec::Lvv { .. } => "lvv".into(),
            CheckSpec::TwoStep { .. } => "two_step".into(),
        }
    }

    /// Replaces every seed inside the check config.
    fn reseed(&mut self, seed: u64) {
        match self {
            CheckSpec::Isoperimetry { budget, .. } | CheckSpec::Lemmas { budget, .. } => budget.seed = seed,
            CheckSpec::KernelSanity { config, .. } => config.seed = seed,
            CheckSpec::Pmv { config, .. } => config.seed = seed,
            CheckSpec::Mv { config, .. } => config.seed = seed,
            CheckSpec::TwoStep { config, .. } => config.seed = seed,
            _ => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPreset {
    pub name: String,
    pub graph: GeneratorSpec,
    /// Defaults to the graph's root.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<VertexId>,
    /// Radius up to which exit profiles are tabulated (capped by the horizon).
    pub profile_radius: usize,
    pub q: f64,
    pub ball_factor: usize,
    pub seed: u64,
    pub checks: Vec<CheckSpec>,
}

impl ExperimentPreset {
    /// Applies the global overrides of the command line.
    pub fn with_overrides(mut self, seed: Option<u64>, q: Option<f64>, ball_factor: Option<usize>) -> Self {
        if let Some(s) = seed {
            self.seed = s;
        }
        if let Some(q) = q {
            self.q = q;
        }
        if let Some(f) = ball_factor {
            self.ball_factor = f;
        }
        let seed = self.seed;
        for c in &mut self.checks {
            c.reseed(seed);
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSummary {
    pub center: VertexId,
    pub r_max: usize,
    pub beta: f64,
    pub beta_prime: f64,
    pub local_slopes: Vec<(usize, f64)>,
    /// Largest minus smallest local slope.
    pub slope_drift: f64,
    pub no_single_exponent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum CheckOutput {
    P0(P0Report),
    Volume(VolumeReport),
    Profile(ProfileSummary),
    ExitScales(SerReport),
    Inequality(InequalityReport),
    Lemmas(Vec<LemmaReport>),
    Sanity(KernelSanity),
    Estimate(EstimateReport),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub check: String,
    pub statistic: f64,
    pub constants: String,
    pub pass: bool,
    pub error: String,
}

fn coverage_total(r: &InequalityReport) -> usize {
    let c = &r.coverage;
    c.exhaustive + c.subballs + c.annuli + c.random
}

fn fmt(v: f64) -> String {
    format!("{v:.6e}")
}

/// Largest over smallest entry.
pub fn spread(values: &[f64]) -> f64 {
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    hi / lo
}

impl CheckOutput {
    pub fn summary(&self, label: &str) -> SummaryRow {
        let (statistic, constants, pass) = match self {
            CheckOutput::P0(r) => (
                r.p0,
                format!("max_degree={};degree_bound={}", r.max_degree, r.degree_bound),
                r.p0 > 0.0 && r.degree_ok && r.comparison_violations == 0,
            ),
            CheckOutput::Volume(r) => {
                let d: Vec<f64> = r.rows.iter().map(|row| row.doubling).collect();
                (
                    r.doubling_constant,
                    format!(
                        "pd2v={};alpha={};stability={};vbound={}",
                        fmt(r.pd2v_constant),
                        fmt(r.alpha),
                        fmt(spread(&d)),
                        fmt(r.vbound_fitted)
                    ),
                    r.vbound_violations == 0 && !r.doubling_unbounded_trend,
                )
            }
            CheckOutput::Profile(p) => (
                p.slope_drift,
                format!("beta={};beta_prime={}", fmt(p.beta), fmt(p.beta_prime)),
                p.beta.is_finite(),
            ),
            CheckOutput::ExitScales(r) => (r.constant, String::new(), r.constant.is_finite()),
            CheckOutput::Inequality(r) => {
                let worst = r.worst_constant.iter().copied().fold(0.0, f64::max);
                (worst, format!("beta={};sets={}", fmt(r.beta), coverage_total(r)), r.pass)
            }
            CheckOutput::Lemmas(rs) => (
                rs.iter().map(|r| r.worst_ratio).fold(f64::NEG_INFINITY, f64::max),
                rs.iter()
                    .map(|r| format!("{}:{}/{}", r.check_name, r.violations, r.tested))
                    .collect::<Vec<_>>()
                    .join(";"),
                rs.iter().all(|r| r.violations == 0),
            ),
            CheckOutput::Sanity(s) => (
                s.mass_error.max(s.symmetry_error).max(s.ck_error),
                format!(
                    "even={};semigroup={}/{};first_exit={}/{}",
                    s.even_monotone_violations,
                    s.semigroup_violations,
                    s.semigroup_tested,
                    s.first_exit_violations,
                    s.first_exit_tested
                ),
                s.pass(),
            ),
            CheckOutput::Estimate(r) => (
                r.sup_statistic,
                format!(
                    "C={};c={};beta={}",
                    fmt(r.fitted.big_c),
                    fmt(r.fitted.c),
                    fmt(r.fitted.beta_used)
                ),
                r.pass,
            ),
        };
        SummaryRow {
            check: label.into(),
            statistic,
            constants,
            pass,
            error: String::new(),
        }
    }
}

/// Shared state for running checks on one graph.
pub struct Lab<'g> {
    pub graph: &'g WeightedGraph,
    pub center: VertexId,
    pub profile_radius: usize,
    pub q: f64,
    pub ball_factor: usize,
    cache: ExitCache<'g>,
}

impl<'g> Lab<'g> {
    pub fn new(graph: &'g WeightedGraph, center: VertexId, profile_radius: usize, q: f64, ball_factor: usize) -> Self {
        Lab {
            graph,
            center,
            profile_radius,
            q,
            ball_factor,
            cache: ExitCache::new(graph, q),
        }
    }

    pub fn target(&self, t: Target) -> CliResult<VertexId> {
        let g = self.graph;
        match t {
            Target::Distance(d) => {
                let dist = g.distances(self.center);
                (0..g.vertex_count()).find(|&y| dist[y] as usize == d).ok_or_else(|| {
                    heatlab_core::Error::InvalidParameter(format!("no vertex at distance {d} from {}", self.center))
                        .into()
                })
            }
            Target::CutVertex(i) => g.meta().cut_vertices.get(i).copied().ok_or_else(|| {
                heatlab_core::Error::InvalidParameter(format!("graph has no cut vertex {i}")).into()
            }),
        }
    }

    pub fn book(&self, centers: &[VertexId]) -> CliResult<ProfileBook> {
        Ok(ProfileBook::build(self.graph, centers, self.profile_radius, self.q)?)
    }

    pub fn run(&self, spec: &CheckSpec) -> CliResult<CheckOutput> {
        let g = self.graph;
        let x = self.center;
        let out = match spec {
            CheckSpec::P0 => CheckOutput::P0(g.check_p0()),
            CheckSpec::Volume { radii } => CheckOutput::Volume(volume_regularity_report(g, &[x], radii)?),
            CheckSpec::Profile { r_max } => {
                let p = heatlab_core::potential::exit_profile(g, x, *r_max, self.q)?;
                let slopes: Vec<f64> = p.local_slopes.iter().map(|s| s.1).collect();
                let drift = slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                    - slopes.iter().copied().fold(f64::INFINITY, f64::min);
                CheckOutput::Profile(ProfileSummary {
                    center: x,
                    r_max: *r_max,
                    beta: p.beta,
                    beta_prime: p.beta_prime,
                    local_slopes: p.local_slopes.clone(),
                    slope_drift: drift,
                    no_single_exponent: drift >= 0.1,
                })
            }
            CheckSpec::ExitScales { radii } => CheckOutput::ExitScales(ser_report(g, &[x], radii)?),
            CheckSpec::Isoperimetry { kind, radius, budget } => {
                let family = subset_families(g, x, *radius, self.ball_factor, budget)?;
                let book = self.book(&[x])?;
                let profile = book.get(x)?;
                let deltas = default_delta_grid();
                CheckOutput::Inequality(match kind {
                    IsoKind::E => check_e(g, &family, profile, &deltas)?,
                    IsoKind::Fk => check_fk(g, &family, profile, &deltas)?,
                    IsoKind::Rho => check_rho(g, &family, profile, &deltas, &InnerBudget::default())?,
                })
            }
            CheckSpec::Lemmas { radius, budget } => {
                let family = subset_families(g, x, *radius, self.ball_factor, budget)?;
                let outer = g.ball(x, self.ball_factor * radius);
                let pairs: Vec<(VertexSet, VertexSet)> =
                    family.members.iter().map(|a| (a.clone(), outer.clone())).collect();
                CheckOutput::Lemmas(vec![check_llrv(g, &pairs)?, check_lebar(g, &family.members)?])
            }
            CheckSpec::KernelSanity { graph, config } => match graph {
                Some(spec) => CheckOutput::Sanity(kernel_sanity(&spec.build()?, config)?),
                None => CheckOutput::Sanity(kernel_sanity(g, config)?),
            },
            CheckSpec::Due { config } => CheckOutput::Estimate(check_due(g, &[x], &self.book(&[x])?, config)?),
            CheckSpec::Ue { targets, n_grid, config } => {
                let pairs = targets
                    .iter()
                    .map(|&t| Ok((x, self.target(t)?)))
                    .collect::<CliResult<Vec<_>>>()?;
                CheckOutput::Estimate(check_ue(g, &pairs, n_grid, &self.book(&[x])?, config)?)
            }
            CheckSpec::Dg {
                ball_radius,
                distances,
                config,
            } => {
                let mut pairs = Vec::new();
                let mut times = Vec::new();
                for &d in distances {
                    let (a, b) = ball_pair(g, x, *ball_radius, d)?;
                    pairs.push((a, b));
                    times.extend([d, d * d / 4, d * d]);
                }
                times.sort_unstable();
                times.dedup();
                CheckOutput::Estimate(check_dg(&self.cache, &pairs, &times, config)?)
            }
            CheckSpec::ExitTail { radii, config } => {
                CheckOutput::Estimate(check_exit_tail(&self.cache, &[x], radii, config)?)
            }
            CheckSpec::Pmv { radius, config } => CheckOutput::Estimate(check_pmv(g, x, *radius, config)?),
            CheckSpec::Mv { radius, config } => CheckOutput::Estimate(check_mv(g, x, *radius, config)?),
            CheckSpec::Tc { radii, config } => CheckOutput::Estimate(check_tc(&self.cache, &[x], radii, config)?),
            CheckSpec::Lvv {
                targets,
                n_grid,
                eps_grid,
            } => {
                let ys = targets.iter().map(|&t| self.target(t)).collect::<CliResult<Vec<_>>>()?;
                let mut centers = vec![x];
                centers.extend(&ys);
                let pairs: Vec<(VertexId, VertexId)> = ys.iter().map(|&y| (x, y)).collect();
                CheckOutput::Estimate(check_lvv(g, &pairs, n_grid, eps_grid, &self.book(&centers)?)?)
            }
            CheckSpec::TwoStep { radii, config } => {
                let samples: Vec<(VertexId, usize)> = radii.iter().map(|&r| (x, r)).collect();
                CheckOutput::Estimate(check_two_step(g, &samples, config)?)
            }
        };
        Ok(out)
    }
}

/// Two balls of radius `r` whose set distance is exactly `d`: one around
/// `x`, the other around the first vertex at distance `d + 2(r − 1)` from `x`
/// along a geodesic.
pub fn ball_pair(g: &WeightedGraph, x: VertexId, r: usize, d: usize) -> CliResult<(VertexSet, VertexSet)> {
    let a = g.ball(x, r);
    let dist = g.distances_from_set(&a);
    for (y, &dy) in dist.iter().enumerate() {
        if dy as usize == d + r - 1 {
            let b = g.ball(y, r);
            if g.set_distance(&a, &b) == d {
                return Ok((a, b));
            }
        }
    }
    Err(heatlab_core::Error::NoSeparation.into())
}

#[derive(Debug, Serialize)]
struct ReportFile<'a> {
    version: &'a str,
    preset: &'a ExperimentPreset,
    check: &'a CheckSpec,
    report: &'a CheckOutput,
}

#[derive(Debug, Serialize)]
struct GridRow {
    x: VertexId,
    y: Option<VertexId>,
    n: Option<usize>,
    r: Option<usize>,
    value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub rows: Vec<SummaryRow>,
    pub out_dir: PathBuf,
}

impl RunOutcome {
    pub fn errors(&self) -> usize {
        self.rows.iter().filter(|r| !r.error.is_empty()).count()
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| !r.pass).count()
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(io_err(path))
}

pub fn write_profile_files(dir: &Path, profile: &ExitProfile) -> CliResult<()> {
    write_json(&dir.join("profile.json"), profile)?;
    let path = dir.join("profile.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["R", "E"])?;
    for (r, e) in profile.table.iter().enumerate() {
        w.write_record([r.to_string(), format!("{e:?}")])?;
    }
    w.flush().map_err(io_err(&path))
}

/// Runs every check of a preset and writes the output files. Check errors are
/// recorded in the summary rather than aborting the run.
pub fn run_preset(preset: &ExperimentPreset, out_dir: &Path) -> CliResult<RunOutcome> {
    let reports = out_dir.join("reports");
    fs::create_dir_all(&reports).map_err(io_err(&reports))?;
    write_json(&out_dir.join("preset.json"), preset)?;

    let g = preset.graph.build()?;
    write_graph(&g, &out_dir.join("graph.json"))?;
    let center = preset.center.or(g.root()).unwrap_or(0);
    let lab = Lab::new(&g, center, preset.profile_radius, preset.q, preset.ball_factor);
    let book = lab.book(&[center])?;
    write_profile_files(out_dir, book.get(center)?)?;

    let mut rows = Vec::new();
    for (i, spec) in preset.checks.iter().enumerate() {
        let label = spec.label();
        let stem = format!("{:02}_{label}", i + 1);
        match lab.run(spec) {
            Ok(output) => {
                write_json(
                    &reports.join(format!("{stem}.json")),
                    &ReportFile {
                        version: VERSION,
                        preset,
                        check: spec,
                        report: &output,
                    },
                )?;
                if let CheckOutput::Estimate(r) = &output {
                    let path = reports.join(format!("{stem}.csv"));
                    let mut w = csv::Writer::from_path(&path)?;
                    for p in &r.grid {
                        w.serialize(GridRow {
                            x: p.x,
                            y: p.y,
                            n: p.n,
                            r: p.r,
                            value: p.value,
                        })?;
                    }
                    w.flush().map_err(io_err(&path))?;
                }
                rows.push(output.summary(&label));
            }
            Err(e) => rows.push(SummaryRow {
                check: label,
                statistic: f64::NAN,
                constants: String::new(),
                pass: false,
                error: e.to_string(),
            }),
        }
    }

    let path = out_dir.join("summary.csv");
    let mut w = csv::Writer::from_path(&path)?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush().map_err(io_err(&path))?;
    Ok(RunOutcome {
        rows,
        out_dir: out_dir.to_path_buf(),
    })
}

/// Runs one check on an already loaded graph and writes its report.
pub fn run_single(
    g: &WeightedGraph,
    center: VertexId,
    profile_radius: usize,
    q: f64,
    ball_factor: usize,
    spec: &CheckSpec,
    out: &Path,
) -> CliResult<SummaryRow> {
    let lab = Lab::new(g, center, profile_radius, q, ball_factor);
    let output = lab.run(spec)?;
    #[derive(Serialize)]
    struct Single<'a> {
        version: &'a str,
        graph_family: &'a str,
        center: VertexId,
        profile_radius: usize,
        q: f64,
        ball_factor: usize,
        check: &'a CheckSpec,
        report: &'a CheckOutput,
    }
    write_json(
        out,
        &Single {
            version: VERSION,
            graph_family: &g.meta().family,
            center,
            profile_radius,
            q,
            ball_factor,
            check: spec,
            report: &output,
        },
    )?;
    Ok(output.summary(&spec.label()))
}
