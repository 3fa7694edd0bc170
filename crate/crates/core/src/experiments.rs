//! Batch experiments: solves, refinement studies, sharpness tables, oracle
//! checks and stability probes, driven by a JSON config.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Forcing, PiecewisePolynomial, Profile, TimeProfile};
use crate::error::{Error, Result};
use crate::grid::{self, energy_norm_pair, GridFn, MeshSpec, SpaceNorm};
use crate::operators::MassInverse;
use crate::oracle::{self, choose_k_h, sharpness_prediction, DiscreteHarmonic, HarmonicDataKind};
use crate::reference::{DAlembertReference, HarmonicReference, SpectralReference, TailEstimate};
use crate::scheme::{evolve_with, grid_data, ErrorAccumulator, ErrorMode, ErrorReport, ExactSolution, GridForcing, V0Mode};
use crate::{evolve_grid, DataSpec, U1Variant};

/// Relative deviation accepted by the oracle check.
pub const ORACLE_TOL: f64 = 1e-9;
/// Relative slack of the stability inequalities.
pub const STABILITY_SLACK: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Solve,
    Converge,
    Sharpness,
    OracleCheck,
    StabilityProbe,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Solve => "solve",
            ExperimentKind::Converge => "converge",
            ExperimentKind::Sharpness => "sharpness",
            ExperimentKind::OracleCheck => "oracle_check",
            ExperimentKind::StabilityProbe => "stability_probe",
        }
    }
}

fn default_len() -> f64 {
    PI
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    #[serde(rename = "X", default = "default_len")]
    pub x_len: f64,
    #[serde(rename = "T", default = "default_len")]
    pub t_final: f64,
    #[serde(rename = "N", default)]
    pub n: Option<usize>,
    #[serde(rename = "M", default)]
    pub m: Option<usize>,
    /// Number of halvings of `h` after the base rung.
    #[serde(default)]
    pub refinements: usize,
    /// Used to derive `M` when it is not given; default 1/2.
    #[serde(default)]
    pub tau_over_h: Option<f64>,
    #[serde(default = "one")]
    pub a: f64,
    #[serde(default = "one")]
    pub eps0: f64,
    /// Explicit `(N, M)` rungs; overrides `N`, `M` and `refinements`.
    #[serde(default)]
    pub ladder: Option<Vec<(usize, usize)>>,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self {
            x_len: PI,
            t_final: PI,
            n: None,
            m: None,
            refinements: 0,
            tau_over_h: None,
            a: 1.0,
            eps0: 1.0,
            ladder: None,
        }
    }
}

impl MeshConfig {
    /// Base pair plus refinements (both counts doubled per rung), or the
    /// explicit ladder.
    pub fn ladder(&self) -> Result<Vec<MeshSpec>> {
        let pairs = match &self.ladder {
            Some(l) if l.is_empty() => return Err(Error::config("mesh ladder is empty")),
            Some(l) => l.clone(),
            None => {
                let n = self.n.ok_or_else(|| Error::config("mesh needs N or a ladder"))?;
                let m = match (self.m, self.tau_over_h) {
                    (Some(m), _) => m,
                    (None, r) => self.steps_for(n, r.unwrap_or(0.5))?,
                };
                (0..=self.refinements).map(|r| (n << r, m << r)).collect()
            }
        };
        pairs
            .into_iter()
            .map(|(n, m)| MeshSpec::build(self.x_len, self.t_final, n, m, self.a, self.eps0))
            .collect()
    }

    /// Smallest `M` with `tau <= ratio * h`.
    fn steps_for(&self, n: usize, ratio: f64) -> Result<usize> {
        if !(ratio > 0.0) || !ratio.is_finite() {
            return Err(Error::config(format!("tau_over_h must be positive, got {ratio}")));
        }
        let exact = self.t_final * n as f64 / (self.x_len * ratio);
        Ok(((exact - 1e-9 * exact).ceil() as usize).max(1))
    }
}

/// Named data sets used by the refinement studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Hat `u0 = min(x, X - x)`, step `u1 = 1` on `(0, X/2)`.
    #[serde(rename = "lambda_3_2")]
    Lambda32,
    /// Quadratic B-spline `u0` on knots `0, X/3, 2X/3, X`, hat `u1`.
    #[serde(rename = "lambda_5_2")]
    Lambda52,
    /// `u = sin t sin x` for `X = T = pi`, `a = 1`.
    Manufactured,
}

pub fn hat_profile(x_len: f64) -> Profile {
    let c = x_len / 2.0;
    Profile::PiecewisePolynomial(PiecewisePolynomial::new(vec![0.0, c, x_len], vec![vec![0.0, 1.0], vec![c, -1.0]]))
}

pub fn step_profile(x_len: f64) -> Profile {
    Profile::PiecewisePolynomial(PiecewisePolynomial::new(vec![0.0, x_len / 2.0, x_len], vec![vec![1.0], vec![0.0]]))
}

pub fn bspline_profile(x_len: f64) -> Profile {
    let d = x_len / 3.0;
    let d2 = d * d;
    Profile::PiecewisePolynomial(PiecewisePolynomial::new(
        vec![0.0, d, 2.0 * d, x_len],
        vec![vec![0.0, 0.0, 0.5 / d2], vec![0.5, 1.0 / d, -1.0 / d2], vec![0.5, -1.0 / d, 0.5 / d2]],
    ))
}

impl Preset {
    pub fn data(self, mesh: &MeshConfig) -> Result<DataConfig> {
        let x = mesh.x_len;
        Ok(match self {
            Preset::Lambda32 => DataConfig::Spec(DataSpec { u0: hat_profile(x), u1: step_profile(x), f: None }),
            Preset::Lambda52 => DataConfig::Spec(DataSpec { u0: bspline_profile(x), u1: hat_profile(x), f: None }),
            Preset::Manufactured => {
                if (mesh.x_len - PI).abs() > 1e-12 || (mesh.t_final - PI).abs() > 1e-12 || mesh.a != 1.0 {
                    return Err(Error::config("the manufactured preset needs X = T = pi and a = 1"));
                }
                DataConfig::Harmonic { harmonic: HarmonicDataKind::new(1, 1)? }
            }
        })
    }
}

/// `data` entry of the config.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DataConfig {
    Harmonic { harmonic: HarmonicDataKind },
    Preset { preset: Preset },
    Spec(DataSpec),
}

/// Which reference solution errors are measured against.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceKind {
    /// Harmonic closed form, else the exact reference when `f = 0` and the
    /// data are piecewise polynomial, else the spectral reference.
    #[default]
    Auto,
    Harmonic,
    Spectral,
    Exact,
    None,
}

/// Error norm used for fitted orders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorNorm {
    Energy,
    Dx,
    H1,
    L1,
    L1Dx,
}

impl ErrorNorm {
    pub fn of(self, r: &ErrorReport) -> f64 {
        match self {
            ErrorNorm::Energy => r.max_energy_error,
            ErrorNorm::Dx => r.max_dx_error,
            ErrorNorm::H1 => r.max_h1_error,
            ErrorNorm::L1 => r.l1_spacetime_error,
            ErrorNorm::L1Dx => r.l1_spacetime_dx_error,
        }
    }
}

fn default_norms() -> Vec<ErrorNorm> {
    vec![ErrorNorm::Energy]
}

fn default_discard() -> usize {
    1
}

fn default_modes_factor() -> usize {
    8
}

fn default_samples() -> usize {
    20
}

fn default_pairs() -> usize {
    100
}

fn default_decimate() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Checked against the subcommand when present.
    #[serde(default)]
    pub kind: Option<ExperimentKind>,
    #[serde(default)]
    pub mesh: MeshConfig,
    #[serde(default)]
    pub data: Option<DataConfig>,
    #[serde(default)]
    pub variant: U1Variant,
    /// Oracle check only; defaults to `[variant]`.
    #[serde(default)]
    pub variants: Option<Vec<U1Variant>>,
    #[serde(default)]
    pub v0_mode: V0Mode,
    /// The first entry is the fitted norm.
    #[serde(default = "default_norms")]
    pub norms: Vec<ErrorNorm>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub mode: ErrorMode,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Sharpness data family.
    #[serde(default)]
    pub j: Option<u8>,
    /// Sharpness derivative order (0 or 1).
    #[serde(default)]
    pub l: u8,
    #[serde(default)]
    pub reference: ReferenceKind,
    /// Spectral reference uses `factor * N_max` modes.
    #[serde(default = "default_modes_factor")]
    pub spectral_modes_factor: usize,
    /// Rungs dropped from the start of the order fit.
    #[serde(default = "default_discard")]
    pub discard_coarsest: usize,
    /// Solve: write every `decimate`-th time level (and the last).
    #[serde(default = "default_decimate")]
    pub decimate: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_pairs")]
    pub pairs: usize,
    #[serde(default)]
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, mesh: MeshConfig) -> Self {
        Self {
            kind: Some(kind),
            mesh,
            data: None,
            variant: U1Variant::default(),
            variants: None,
            v0_mode: V0Mode::default(),
            norms: default_norms(),
            alpha: None,
            mode: ErrorMode::default(),
            out_dir: None,
            j: None,
            l: 0,
            reference: ReferenceKind::default(),
            spectral_modes_factor: default_modes_factor(),
            discard_coarsest: default_discard(),
            decimate: default_decimate(),
            samples: default_samples(),
            pairs: default_pairs(),
            seed: 0,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config(format!("config: {e}")))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn require_kind(&self, kind: ExperimentKind) -> Result<()> {
        match self.kind {
            Some(k) if k != kind => {
                Err(Error::config(format!("config kind is {} but {} was requested", k.name(), kind.name())))
            }
            _ => Ok(()),
        }
    }

    /// All rungs, each checked against the stability condition.
    pub fn stable_ladder(&self) -> Result<Vec<MeshSpec>> {
        let ladder = self.mesh.ladder()?;
        for mesh in &ladder {
            mesh.require_stable()?;
        }
        Ok(ladder)
    }

    fn resolved_data(&self) -> Result<ResolvedData> {
        let data = match &self.data {
            None => return Err(Error::config("config has no data")),
            Some(DataConfig::Preset { preset }) => preset.data(&self.mesh)?,
            Some(d) => d.clone(),
        };
        match data {
            DataConfig::Harmonic { harmonic } => {
                harmonic.validate()?;
                Ok(ResolvedData::Harmonic(harmonic))
            }
            DataConfig::Spec(spec) => {
                spec.validate(self.mesh.x_len)?;
                Ok(ResolvedData::Spec(spec))
            }
            DataConfig::Preset { .. } => unreachable!("presets resolve to data"),
        }
    }
}

#[derive(Debug, Clone)]
enum ResolvedData {
    Harmonic(HarmonicDataKind),
    Spec(DataSpec),
}

impl ResolvedData {
    fn spec(&self, mesh: &MeshSpec) -> Result<DataSpec> {
        match self {
            ResolvedData::Harmonic(kind) => kind.to_data_spec(mesh),
            ResolvedData::Spec(s) => Ok(s.clone()),
        }
    }
}

/// A reference usable on every rung of a ladder.
enum Reference {
    Harmonic(HarmonicDataKind),
    Spectral(SpectralReference),
    Exact(DAlembertReference),
}

impl Reference {
    fn label(&self) -> &'static str {
        match self {
            Reference::Harmonic(_) => "harmonic",
            Reference::Spectral(_) => "spectral",
            Reference::Exact(_) => "exact",
        }
    }

    fn for_mesh(&self, mesh: &MeshSpec) -> Result<Box<dyn ExactSolution + '_>> {
        Ok(match self {
            Reference::Harmonic(kind) => Box::new(HarmonicReference::new(*kind, mesh)?),
            Reference::Spectral(s) => Box::new(SpectralRef(s)),
            Reference::Exact(e) => Box::new(ExactRef(e)),
        })
    }
}

struct SpectralRef<'a>(&'a SpectralReference);
struct ExactRef<'a>(&'a DAlembertReference);

impl ExactSolution for SpectralRef<'_> {
    fn eval(&self, x: f64, t: f64) -> Result<f64> {
        self.0.eval(x, t)
    }
    fn node_slice(&self, mesh: &MeshSpec, m: usize) -> Result<GridFn> {
        self.0.node_slice(mesh, m)
    }
    fn q2h_slice(&self, mesh: &MeshSpec, m: usize) -> Result<GridFn> {
        self.0.q2h_slice(mesh, m)
    }
}

impl ExactSolution for ExactRef<'_> {
    fn eval(&self, x: f64, t: f64) -> Result<f64> {
        self.0.eval(x, t)
    }
    fn node_slice(&self, mesh: &MeshSpec, m: usize) -> Result<GridFn> {
        self.0.node_slice(mesh, m)
    }
    fn q2h_slice(&self, mesh: &MeshSpec, m: usize) -> Result<GridFn> {
        self.0.q2h_slice(mesh, m)
    }
}

fn exact_capable(spec: &DataSpec) -> bool {
    let pp = |p: &Profile| matches!(p, Profile::Zero | Profile::PiecewisePolynomial(_));
    spec.f.is_none() && pp(&spec.u0) && pp(&spec.u1)
}

fn build_reference(config: &ExperimentConfig, data: &ResolvedData, ladder: &[MeshSpec]) -> Result<Option<Reference>> {
    let base = &ladder[0];
    let n_max = ladder.iter().map(MeshSpec::n).max().unwrap_or(base.n());
    let spectral = |spec: &DataSpec| -> Result<Reference> {
        let modes = config.spectral_modes_factor.max(1) * n_max;
        Ok(Reference::Spectral(SpectralReference::new(spec, config.mesh.x_len, config.mesh.a, modes)?))
    };
    Ok(match (config.reference, data) {
        (ReferenceKind::None, _) => None,
        (ReferenceKind::Auto | ReferenceKind::Harmonic, ResolvedData::Harmonic(k)) => Some(Reference::Harmonic(*k)),
        (ReferenceKind::Harmonic, ResolvedData::Spec(_)) => {
            return Err(Error::config("harmonic reference needs harmonic data"));
        }
        (ReferenceKind::Auto, ResolvedData::Spec(s)) if exact_capable(s) => {
            Some(Reference::Exact(DAlembertReference::new(s, config.mesh.x_len, config.mesh.a)?))
        }
        (ReferenceKind::Exact, d) => {
            Some(Reference::Exact(DAlembertReference::new(&d.spec(base)?, config.mesh.x_len, config.mesh.a)?))
        }
        (ReferenceKind::Auto | ReferenceKind::Spectral, d) => Some(spectral(&d.spec(base)?)?),
    })
}

fn thread_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return Err(Error::config("--jobs must be positive"));
        }
        b = b.num_threads(j);
    }
    b.build().map_err(|e| Error::config(format!("thread pool: {e}")))
}

/// Streams one run and measures it against `reference`.
fn measure(
    mesh: &MeshSpec,
    data: &DataSpec,
    config: &ExperimentConfig,
    reference: &dyn ExactSolution,
    mut on_slice: impl FnMut(usize, &GridFn) -> Result<()>,
) -> Result<ErrorReport> {
    let mut acc = ErrorAccumulator::new(mesh, config.mode)?;
    evolve_with(mesh, data, config.variant, config.v0_mode, |m, _, v| {
        let u = reference.node_slice(mesh, m)?;
        let uf = match config.mode {
            ErrorMode::NodeSampled => None,
            ErrorMode::Q2hFiltered => Some(reference.q2h_slice(mesh, m)?),
        };
        acc.push(m, v, &u, uf.as_ref())?;
        on_slice(m, v)
    })?;
    acc.finish()
}

/// Least-squares fit of `log e = p log h + c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderFit {
    pub slope: f64,
    pub intercept: f64,
    /// Euclidean norm of the log residuals.
    pub residual: f64,
}

pub fn fit_order(points: &[(f64, f64)]) -> Result<OrderFit> {
    if points.len() < 2 {
        return Err(Error::contract("order fit needs at least two points"));
    }
    if let Some((h, e)) = points.iter().find(|(h, e)| !(*h > 0.0 && *e > 0.0 && h.is_finite() && e.is_finite())) {
        return Err(Error::contract(format!("order fit needs positive finite entries, got ({h}, {e})")));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::contract("order fit needs distinct h values"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = xs.iter().zip(&ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum::<f64>().sqrt();
    Ok(OrderFit { slope, intercept, residual })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub h: f64,
    pub tau: f64,
    pub err_energy: f64,
    pub err_dx: f64,
    pub err_l1: f64,
    /// `log2(e_coarse / e_fine)` against the previous rung.
    pub order_energy: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormFit {
    pub norm: ErrorNorm,
    pub fit: OrderFit,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceResult {
    pub reference: String,
    pub rows: Vec<ConvergenceRow>,
    pub reports: Vec<ErrorReport>,
    /// One fit per requested norm over the retained rungs.
    pub fits: Vec<NormFit>,
    pub tail: Option<TailEstimate>,
}

impl ConvergenceResult {
    pub fn fitted_order(&self) -> f64 {
        self.fits[0].fit.slope
    }
}

pub fn run_convergence(config: &ExperimentConfig, jobs: Option<usize>) -> Result<ConvergenceResult> {
    config.require_kind(ExperimentKind::Converge)?;
    let ladder = config.stable_ladder()?;
    if ladder.len() < 3 {
        return Err(Error::config("a refinement study needs at least three rungs"));
    }
    if config.norms.is_empty() {
        return Err(Error::config("norms must name at least one error norm"));
    }
    if config.discard_coarsest + 2 > ladder.len() {
        return Err(Error::config("discard_coarsest leaves fewer than two rungs to fit"));
    }
    let data = config.resolved_data()?;
    let reference = build_reference(config, &data, &ladder)?.ok_or_else(|| Error::config("a refinement study needs a reference"))?;
    let pool = thread_pool(jobs)?;
    let reports: Vec<ErrorReport> = pool.install(|| {
        ladder
            .par_iter()
            .map(|mesh| {
                let spec = data.spec(mesh)?;
                let r = reference.for_mesh(mesh)?;
                measure(mesh, &spec, config, r.as_ref(), |_, _| Ok(()))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(ladder.len());
    for (mesh, rep) in ladder.iter().zip(&reports) {
        let order = rows.last().map(|p: &ConvergenceRow| (p.err_energy / rep.max_energy_error).log2());
        rows.push(ConvergenceRow {
            n: mesh.n(),
            m: mesh.m(),
            h: mesh.h(),
            tau: mesh.tau(),
            err_energy: rep.max_energy_error,
            err_dx: rep.max_dx_error,
            err_l1: rep.l1_spacetime_error,
            order_energy: order,
        });
    }
    let fits = config
        .norms
        .iter()
        .map(|&norm| {
            let pts: Vec<(f64, f64)> =
                ladder.iter().zip(&reports).skip(config.discard_coarsest).map(|(m, r)| (m.h(), norm.of(r))).collect();
            Ok(NormFit { norm, fit: fit_order(&pts)? })
        })
        .collect::<Result<Vec<_>>>()?;
    let tail = match &reference {
        Reference::Spectral(s) => Some(s.tail_estimate(config.mesh.t_final)?),
        _ => None,
    };
    Ok(ConvergenceResult { reference: reference.label().into(), rows, reports, fits, tail })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpnessRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub k_h: usize,
    pub measured: f64,
    pub predicted: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SharpnessResult {
    pub j: u8,
    pub l: u8,
    pub alpha: f64,
    pub rows: Vec<SharpnessRow>,
    /// `|ratio - 1|` is nonincreasing down the ladder.
    pub monotone: bool,
    pub final_ratio: f64,
}

pub fn run_sharpness(config: &ExperimentConfig, jobs: Option<usize>) -> Result<SharpnessResult> {
    config.require_kind(ExperimentKind::Sharpness)?;
    let j = config.j.ok_or_else(|| Error::config("sharpness needs j"))?;
    if j > 2 {
        return Err(Error::config(format!("j must be 0, 1 or 2, got {j}")));
    }
    if config.l > 1 {
        return Err(Error::config(format!("l must be 0 or 1, got {}", config.l)));
    }
    let alpha = config.alpha.ok_or_else(|| Error::config("sharpness needs alpha"))?;
    if !(alpha > 0.0) {
        return Err(Error::config(format!("alpha must be positive, got {alpha}")));
    }
    if (config.mesh.x_len - PI).abs() > 1e-12 || config.mesh.a != 1.0 {
        return Err(Error::config("sharpness constants are stated for X = pi and a = 1"));
    }
    let ladder = config.stable_ladder()?;
    let choices = ladder.iter().map(|m| choose_k_h(alpha, m)).collect::<Result<Vec<_>>>()?;
    let pool = thread_pool(jobs)?;
    let rows: Vec<SharpnessRow> = pool.install(|| {
        ladder
            .par_iter()
            .zip(&choices)
            .map(|(mesh, choice)| {
                let kind = HarmonicDataKind::new(j, choice.k_h)?;
                let spec = kind.to_data_spec(mesh)?;
                let reference = HarmonicReference::new(kind, mesh)?;
                let mut local = config.clone();
                local.mode = ErrorMode::NodeSampled;
                let rep = measure(mesh, &spec, &local, &reference, |_, _| Ok(()))?;
                let measured = if config.l == 0 { rep.l1_spacetime_error } else { rep.l1_spacetime_dx_error };
                let predicted = sharpness_prediction(j, config.l, choice.k_h, mesh.t_final())?;
                Ok(SharpnessRow { n: mesh.n(), k_h: choice.k_h, measured, predicted, ratio: measured / predicted })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let monotone = rows.windows(2).all(|w| (w[1].ratio - 1.0).abs() <= (w[0].ratio - 1.0).abs());
    let final_ratio = rows.last().map(|r| r.ratio).unwrap_or(f64::NAN);
    Ok(SharpnessResult { j, l: config.l, alpha, rows, monotone, final_ratio })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub variant: U1Variant,
    pub max_abs_deviation: f64,
    /// Divided by the largest oracle value over the space-time mesh.
    pub max_rel_deviation: f64,
    pub pass: bool,
}

/// Compares the stepper with the discrete closed form on every rung.
pub fn run_oracle_check(config: &ExperimentConfig, jobs: Option<usize>) -> Result<Vec<OracleRow>> {
    config.require_kind(ExperimentKind::OracleCheck)?;
    let kind = match config.resolved_data()? {
        ResolvedData::Harmonic(k) => k,
        ResolvedData::Spec(_) => return Err(Error::config("oracle check needs harmonic data")),
    };
    let ladder = config.stable_ladder()?;
    let variants = config.variants.clone().unwrap_or_else(|| vec![config.variant]);
    let cases: Vec<(&MeshSpec, U1Variant)> = ladder.iter().flat_map(|m| variants.iter().map(move |v| (m, *v))).collect();
    thread_pool(jobs)?.install(|| {
        cases.par_iter().map(|&(mesh, variant)| oracle_deviation(kind, mesh, variant)).collect::<Result<Vec<_>>>()
    })
}

pub fn oracle_deviation(kind: HarmonicDataKind, mesh: &MeshSpec, variant: U1Variant) -> Result<OracleRow> {
    let oracle = DiscreteHarmonic::new(kind, mesh, variant)?;
    let spec = kind.to_data_spec(mesh)?;
    let (mut dev, mut scale) = (0.0f64, 0.0f64);
    evolve_with(mesh, &spec, variant, V0Mode::NodeSamples, |m, _, v| {
        for (i, x) in v.values().iter().enumerate() {
            let o = oracle.value(i, m);
            dev = dev.max((x - o).abs());
            scale = scale.max(o.abs());
        }
        Ok(())
    })?;
    let rel = if scale > 0.0 { dev / scale } else { dev };
    Ok(OracleRow { n: mesh.n(), m: mesh.m(), variant, max_abs_deviation: dev, max_rel_deviation: rel, pass: rel <= ORACLE_TOL })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub sample: usize,
    pub energy_lhs: f64,
    pub energy_rhs: f64,
    pub data_lhs: f64,
    pub data_rhs: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub pair: usize,
    pub energy_sq: f64,
    /// `eps0^2 ||dbar_t v||_B^2 + a^2 ||sbar_t v||_{-Lambda}^2`.
    pub bound1: f64,
    /// `(eps0^2 / 3) a^2 (||v_prev||_{-Lambda}^2 + ||v||_{-Lambda}^2) / 2`.
    pub bound2: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityResult {
    pub runs: Vec<StabilityRow>,
    pub pairs: Vec<LowerBoundRow>,
}

impl StabilityResult {
    pub fn violations(&self) -> usize {
        self.runs.iter().filter(|r| !r.pass).count() + self.pairs.iter().filter(|r| !r.pass).count()
    }
}

fn random_pieces(rng: &mut ChaCha8Rng, x_len: f64) -> Vec<f64> {
    let k = rng.random_range(1..=4usize);
    let mut cuts: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..0.95) * x_len).collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-3 * x_len);
    let mut b = vec![0.0];
    b.extend(cuts);
    b.push(x_len);
    b
}

/// Random piecewise polynomial, possibly discontinuous, degree <= 3.
pub fn random_piecewise(rng: &mut ChaCha8Rng, x_len: f64) -> PiecewisePolynomial {
    let b = random_pieces(rng, x_len);
    let pieces = b
        .windows(2)
        .map(|w| {
            let len = w[1] - w[0];
            let deg = rng.random_range(0..=3usize);
            (0..=deg).map(|p| rng.random_range(-1.0..1.0) / len.powi(p as i32)).collect()
        })
        .collect();
    PiecewisePolynomial::new(b, pieces)
}

/// Random continuous piecewise polynomial vanishing at both ends: a
/// piecewise-linear interpolant plus cubic bubbles on each piece.
pub fn random_h10(rng: &mut ChaCha8Rng, x_len: f64) -> PiecewisePolynomial {
    let b = random_pieces(rng, x_len);
    let mut values: Vec<f64> = b.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
    let last = values.len() - 1;
    values[0] = 0.0;
    values[last] = 0.0;
    let pieces = b
        .windows(2)
        .zip(values.windows(2))
        .map(|(w, v)| {
            let len = w[1] - w[0];
            let slope = (v[1] - v[0]) / len;
            // c s (len - s) (1 + d s)
            let c = rng.random_range(-1.0..1.0) / (len * len);
            let d = rng.random_range(-1.0..1.0) / len;
            vec![v[0], slope + c * len, c * (len * d - 1.0), -c * d]
        })
        .collect();
    PiecewisePolynomial::new(b, pieces)
}

/// Random data with `u0` in `H^1_0`, `u1` in `L^2` and separable `f`.
pub fn random_data(rng: &mut ChaCha8Rng, x_len: f64) -> DataSpec {
    let time = if rng.random_bool(0.5) {
        TimeProfile::Polynomial { coeffs: (0..rng.random_range(1..=3usize)).map(|_| rng.random_range(-1.0..1.0)).collect() }
    } else {
        TimeProfile::HarmonicSin { omega: rng.random_range(0.2..6.0) }
    };
    let f = rng
        .random_bool(0.75)
        .then(|| Forcing { space: Profile::PiecewisePolynomial(random_piecewise(rng, x_len)), time });
    DataSpec {
        u0: Profile::PiecewisePolynomial(random_h10(rng, x_len)),
        u1: Profile::PiecewisePolynomial(random_piecewise(rng, x_len)),
        f,
    }
}

fn forcing_slice(forcing: &GridForcing, m: usize, n: usize) -> GridFn {
    forcing.slice(m, n)
}

/// Energy bound and data-norm bound for one run.
pub fn stability_check(mesh: &MeshSpec, data: &DataSpec, variant: U1Variant) -> Result<(f64, f64, f64, f64)> {
    let (h, tau, a, eps0) = (mesh.h(), mesh.tau(), mesh.speed(), mesh.eps0());
    let (v0, u1h, forcing) = grid_data(mesh, data, variant, V0Mode::NodeSamples)?;
    let binv = MassInverse::new(mesh.n())?;
    let lap_v0 = grid::space_norm(&v0, SpaceNorm::NegLambda, mesh)?;
    let f_norm = |m: usize| binv.inverse_norm(&forcing_slice(&forcing, m, mesh.n()), h);
    let mut f_sum = 0.0;
    for m in 1..mesh.m() {
        f_sum += f_norm(m)?;
    }
    let energy_rhs = (a * a * lap_v0 * lap_v0 + (binv.inverse_norm(&u1h, h)? / eps0).powi(2)).sqrt()
        + (f_norm(0)? * tau + 2.0 * tau * f_sum) / eps0;
    let f_l21 = match &data.f {
        Some(f) => f.l21_norm(mesh.x_len(), mesh.t_final())?,
        None => 0.0,
    };
    let data_rhs = (a * a * data.u0.h1_seminorm(mesh.x_len())?.powi(2) + (data.u1.l2_norm(mesh.x_len())? / eps0).powi(2))
        .sqrt()
        + 2.0 * f_l21 / eps0;

    let (mut energy, mut dt_b, mut dx) = (0.0f64, 0.0f64, 0.0f64);
    evolve_grid(mesh, &v0, &u1h, &forcing, |_, prev, v| {
        dx = dx.max(grid::space_norm(v, SpaceNorm::DxL2, mesh)?);
        if let Some(p) = prev {
            energy = energy.max(energy_norm_pair(p, v, mesh)?);
            dt_b = dt_b.max(grid::space_norm(&v.sub(p).scale(1.0 / tau), SpaceNorm::B, mesh)?);
        }
        Ok(())
    })?;
    let data_lhs = eps0 * dt_b.max(a * dx / 6f64.sqrt());
    Ok((energy, energy_rhs, data_lhs, data_rhs))
}

/// Lower bounds of the energy norm for one pair.
pub fn lower_bounds(prev: &GridFn, curr: &GridFn, mesh: &MeshSpec) -> Result<LowerBoundRow> {
    let (tau, a, eps0) = (mesh.tau(), mesh.speed(), mesh.eps0());
    let e = energy_norm_pair(prev, curr, mesh)?.powi(2);
    let dt = curr.sub(prev).scale(1.0 / tau);
    let st = curr.add(prev).scale(0.5);
    let nl = |w: &GridFn| grid::space_norm(w, SpaceNorm::NegLambda, mesh).map(|v| v * v);
    let bound1 = eps0 * eps0 * grid::space_norm(&dt, SpaceNorm::B, mesh)?.powi(2) + a * a * nl(&st)?;
    let bound2 = eps0 * eps0 / 3.0 * a * a * 0.5 * (nl(prev)? + nl(curr)?);
    let pass = bound1 <= e * (1.0 + STABILITY_SLACK) && bound2 <= e * (1.0 + STABILITY_SLACK);
    Ok(LowerBoundRow { n: mesh.n(), pair: 0, energy_sq: e, bound1, bound2, pass })
}

fn random_grid(rng: &mut ChaCha8Rng, n: usize) -> GridFn {
    let mut v: Vec<f64> = (0..=n).map(|_| rng.random_range(-1.0..1.0)).collect();
    v[0] = 0.0;
    v[n] = 0.0;
    GridFn::from_values(v).expect("n >= 2")
}

pub fn run_stability_probe(config: &ExperimentConfig, jobs: Option<usize>) -> Result<StabilityResult> {
    config.require_kind(ExperimentKind::StabilityProbe)?;
    let ladder = config.stable_ladder()?;
    let x_len = config.mesh.x_len;
    let pool = thread_pool(jobs)?;
    let cases: Vec<(usize, usize)> = (0..ladder.len()).flat_map(|r| (0..config.samples).map(move |s| (r, s))).collect();
    let runs = pool.install(|| {
        cases
            .par_iter()
            .map(|&(r, s)| {
                let mesh = &ladder[r];
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ ((r as u64) << 32) ^ s as u64);
                let data = random_data(&mut rng, x_len);
                let (tl, tr, cl, cr) = stability_check(mesh, &data, U1Variant::V2)?;
                let pass = tl <= tr * (1.0 + STABILITY_SLACK) && cl <= cr * (1.0 + STABILITY_SLACK);
                Ok(StabilityRow { n: mesh.n(), sample: s, energy_lhs: tl, energy_rhs: tr, data_lhs: cl, data_rhs: cr, pass })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut pairs = Vec::new();
    for (r, mesh) in ladder.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x9e37_79b9) ^ r as u64);
        for p in 0..config.pairs {
            let prev = random_grid(&mut rng, mesh.n());
            // Mix nearby and unrelated pairs so both time-difference regimes occur.
            let curr = if p % 2 == 0 { random_grid(&mut rng, mesh.n()) } else { prev.add(&random_grid(&mut rng, mesh.n()).scale(mesh.tau())) };
            let mut row = lower_bounds(&prev, &curr, mesh)?;
            row.pair = p;
            pairs.push(row);
        }
    }
    Ok(StabilityResult { runs, pairs })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveResult {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub reference: Option<String>,
    pub error: Option<ErrorReport>,
    pub max_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
struct TrajectoryRecord {
    m: usize,
    t: f64,
    i: usize,
    x: f64,
    v: f64,
}

/// Single run on the first rung; writes `trajectory.csv` and, with a
/// reference, `error_report.json`.
pub fn run_solve(config: &ExperimentConfig, out_dir: Option<&Path>) -> Result<SolveResult> {
    config.require_kind(ExperimentKind::Solve)?;
    if config.decimate == 0 {
        return Err(Error::config("decimate must be positive"));
    }
    let ladder = config.stable_ladder()?;
    let mesh = &ladder[0];
    let data = config.resolved_data()?;
    let spec = data.spec(mesh)?;
    let reference = build_reference(config, &data, &ladder[..1])?;
    let mut writer = match out_dir {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            Some(csv::Writer::from_path(dir.join("trajectory.csv"))?)
        }
        None => None,
    };
    let last = mesh.m();
    let mut write = |m: usize, v: &GridFn| -> Result<()> {
        if let Some(w) = writer.as_mut() {
            if m.is_multiple_of(config.decimate) || m == last {
                for (i, val) in v.values().iter().enumerate() {
                    w.serialize(TrajectoryRecord { m, t: mesh.t(m), i, x: mesh.x(i), v: *val })?;
                }
            }
        }
        Ok(())
    };
    let (error, max_residual) = match &reference {
        Some(r) => {
            let sol = r.for_mesh(mesh)?;
            let mut acc = ErrorAccumulator::new(mesh, config.mode)?;
            let diag = evolve_with(mesh, &spec, config.variant, config.v0_mode, |m, _, v| {
                let u = sol.node_slice(mesh, m)?;
                let uf = match config.mode {
                    ErrorMode::NodeSampled => None,
                    ErrorMode::Q2hFiltered => Some(sol.q2h_slice(mesh, m)?),
                };
                acc.push(m, v, &u, uf.as_ref())?;
                write(m, v)
            })?;
            (Some(acc.finish()?), diag.max_residual())
        }
        None => {
            let diag = evolve_with(mesh, &spec, config.variant, config.v0_mode, |m, _, v| write(m, v))?;
            (None, diag.max_residual())
        }
    };
    if let Some(w) = writer.as_mut() {
        w.flush()?;
    }
    if let (Some(dir), Some(e)) = (out_dir, &error) {
        fs::write(dir.join("error_report.json"), serde_json::to_string_pretty(e)?)?;
    }
    Ok(SolveResult { n: mesh.n(), m: mesh.m(), reference: reference.map(|r| r.label().to_string()), error, max_residual })
}

/// Summary written next to the tables.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub kind: ExperimentKind,
    pub version: &'static str,
    pub wall_time_seconds: f64,
    pub passed: bool,
    pub config: ExperimentConfig,
    pub result: serde_json::Value,
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Runs `kind`, writing tables and `summary.json` under `out_dir`. Every
/// rung is checked for stability before anything is written.
pub fn run(kind: ExperimentKind, config: &ExperimentConfig, out_dir: &Path, jobs: Option<usize>) -> Result<RunSummary> {
    config.require_kind(kind)?;
    config.stable_ladder()?;
    if jobs == Some(0) {
        return Err(Error::config("jobs must be positive"));
    }
    let start = Instant::now();
    let (passed, result) = match kind {
        ExperimentKind::Solve => {
            let r = run_solve(config, Some(out_dir))?;
            (true, serde_json::to_value(r)?)
        }
        ExperimentKind::Converge => {
            let r = run_convergence(config, jobs)?;
            fs::create_dir_all(out_dir)?;
            write_csv(&out_dir.join("converge.csv"), &r.rows)?;
            (true, serde_json::to_value(r)?)
        }
        ExperimentKind::Sharpness => {
            let r = run_sharpness(config, jobs)?;
            fs::create_dir_all(out_dir)?;
            write_csv(&out_dir.join("sharpness.csv"), &r.rows)?;
            (true, serde_json::to_value(r)?)
        }
        ExperimentKind::OracleCheck => {
            let rows = run_oracle_check(config, jobs)?;
            fs::create_dir_all(out_dir)?;
            write_csv(&out_dir.join("oracle_check.csv"), &rows)?;
            (rows.iter().all(|r| r.pass), serde_json::to_value(rows)?)
        }
        ExperimentKind::StabilityProbe => {
            let r = run_stability_probe(config, jobs)?;
            fs::create_dir_all(out_dir)?;
            write_csv(&out_dir.join("stability_probe.csv"), &r.runs)?;
            write_csv(&out_dir.join("lower_bounds.csv"), &r.pairs)?;
            (r.violations() == 0, serde_json::to_value(r)?)
        }
    };
    let summary = RunSummary {
        kind,
        version: env!("CARGO_PKG_VERSION"),
        wall_time_seconds: start.elapsed().as_secs_f64(),
        passed,
        config: config.clone(),
        result,
    };
    fs::write(out_dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}

/// Harmonic oracle values for a whole run, exposed for golden files.
pub fn oracle_trajectory(kind: HarmonicDataKind, mesh: &MeshSpec, variant: U1Variant) -> Result<crate::Trajectory> {
    Ok(DiscreteHarmonic::new(kind, mesh, variant)?.trajectory())
}

/// `(h', tau')` in oracle units for reporting.
pub fn oracle_units(mesh: &MeshSpec) -> (f64, f64) {
    oracle::oracle_steps(mesh)
}
