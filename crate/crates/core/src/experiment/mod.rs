//! Monte Carlo comparison of the noisy equation with its deterministic limit as the noise
//! coefficients flatten.
//!
//! Each replica reports `D = sup_t |X^N(t) - Xbar(t)|_{H^-1}` over the sample instants,
//! together with `sup_t |S(t)|^2` for the realised stochastic integral
//! `S(t) = sum_k int alpha_k (sigma_k Gamma(X), grad e_j) dbeta_k`. Replicas are independent
//! jobs; results are collected in `(N, replica)` order so reports do not depend on the
//! number of worker threads.

use std::io::Write;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{AbortedReplica, Error, Result};
use crate::noise::{make_family, sigma, ModeIndex, NoiseSpec};
use crate::solver::{basis_gradient, Integrator, LimitConfig, SolverConfig};
use crate::spectral::{h_norm, h_norm_bins, ScalarField};

/// Parameters of the increment-moment fit `E|X(t) - X(s)|^r_{H^-beta} ~ |t - s|^slope`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HolderParams {
    pub beta: f64,
    pub r: f64,
    /// Pairs per dyadic lag and trajectory.
    pub pairs: usize,
    /// How many replicas per `N` keep their trajectory for the fit.
    pub trajectories: usize,
}

impl Default for HolderParams {
    fn default() -> Self {
        Self {
            beta: 5.0,
            r: 4.0,
            pairs: 32,
            trajectories: 4,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentPlan {
    /// Truncation radii, strictly increasing.
    pub radii: Vec<u32>,
    pub replicas: usize,
    pub base_seed: u64,
    /// Grid, time step, horizon, phase and forcing shared by every run; `stride` sets the
    /// sample instants.
    pub base: LimitConfig,
    pub initial: ScalarField,
    pub holder: HolderParams,
    /// Test mode `e_j` of the martingale probe.
    pub probe_mode: ModeIndex,
    pub max_abort_fraction: f64,
    /// Replicas whose state leaves `[-bound, bound]` are aborted like non-finite ones.
    pub state_bound: Option<f64>,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl ExperimentPlan {
    pub fn new(base: LimitConfig, initial: ScalarField, radii: Vec<u32>, replicas: usize) -> Self {
        Self {
            radii,
            replicas,
            base_seed: 0,
            base,
            initial,
            holder: HolderParams::default(),
            probe_mode: ModeIndex::new(1, 0).expect("nonzero"),
            max_abort_fraction: 0.01,
            state_bound: None,
            threads: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.radii.is_empty() || self.radii.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("experiment.radii", "must be nonempty and strictly increasing"));
        }
        if self.replicas < 2 {
            return Err(Error::invalid("experiment.replicas", "need at least 2"));
        }
        if !(0.0..=1.0).contains(&self.max_abort_fraction) {
            return Err(Error::invalid("experiment.max_abort_fraction", "must lie in [0, 1]"));
        }
        if matches!(self.state_bound, Some(b) if b.is_nan() || b <= 0.0) {
            return Err(Error::invalid("experiment.state_bound", "must be positive"));
        }
        if self.threads == Some(0) {
            return Err(Error::invalid("experiment.threads", "must be positive"));
        }
        self.base.validate()?;
        self.base.grid.check_same(self.initial.grid())?;
        if !self.initial.is_finite() {
            return Err(Error::NonFinite("initial condition"));
        }
        for &n in &self.radii {
            self.solver_config(n)?.validate()?;
        }
        Ok(())
    }

    pub fn solver_config(&self, radius: u32) -> Result<SolverConfig> {
        let noise = NoiseSpec::new(make_family(radius)?, &self.base.grid, self.base_seed)?;
        Ok(SolverConfig::new(self.base.clone(), noise))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    #[serde(rename = "N")]
    pub radius: u32,
    pub c_n: f64,
    /// Mean over replicas of `sup_t |X^N - Xbar|_{H^-1}`.
    pub mean_distance: f64,
    pub max_distance: f64,
    pub std_error: f64,
    /// Mean of `min(D, 1)`.
    pub truncated_mean: f64,
    pub aborted_paths: usize,
    pub holder_exponent: Option<f64>,
    /// Mean over replicas of `sup_t |S(t)|^2`.
    pub martingale_decay: f64,
    pub martingale_std_error: f64,
    /// Per-replica `D`, in replica order (aborted replicas omitted).
    pub replica_distances: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    pub aborted: Vec<AbortedReplica>,
}

impl ConvergenceReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_rows_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "N,c_N,mean_distance,max_distance,std_error,truncated_mean,aborted_paths,holder_exponent,martingale_decay,martingale_std_error"
        )?;
        for r in &self.rows {
            let holder = r.holder_exponent.map_or(String::new(), |h| format!("{h:e}"));
            writeln!(
                w,
                "{},{:e},{:e},{:e},{:e},{:e},{},{},{:e},{:e}",
                r.radius,
                r.c_n,
                r.mean_distance,
                r.max_distance,
                r.std_error,
                r.truncated_mean,
                r.aborted_paths,
                holder,
                r.martingale_decay,
                r.martingale_std_error
            )?;
        }
        Ok(())
    }

    pub fn write_plot_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "N,c_N,d_N,std_error")?;
        for r in &self.rows {
            writeln!(w, "{},{:e},{:e},{:e}", r.radius, r.c_n, r.mean_distance, r.std_error)?;
        }
        Ok(())
    }

    /// For consecutive rows, `(S_{N'} / S_N) / (c_{N'}^2 / c_N^2)`.
    pub fn martingale_scaling_ratios(&self) -> Vec<f64> {
        self.rows
            .windows(2)
            .map(|w| {
                let observed = w[1].martingale_decay / w[0].martingale_decay;
                let expected = (w[1].c_n / w[0].c_n).powi(2);
                observed / expected
            })
            .collect()
    }
}

/// Result of [`holder_increment_estimate`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderFit {
    /// Least-squares slope of `log E|X(t)-X(s)|^r` against `log |t-s|`; `None` when every
    /// increment vanishes.
    pub slope: Option<f64>,
    pub lags: Vec<f64>,
    pub moments: Vec<f64>,
}

/// Fits the increment moments of the given trajectories over dyadic lags.
///
/// Every trajectory must hold the same number (at least 64) of equally spaced samples,
/// `spacing` apart.
pub fn holder_increment_estimate(
    trajectories: &[Vec<ScalarField>],
    spacing: f64,
    beta: f64,
    r: f64,
    pairs: usize,
) -> Result<HolderFit> {
    let len = trajectories.first().map_or(0, Vec::len);
    if len < 64 || trajectories.iter().any(|t| t.len() != len) {
        return Err(Error::Precondition(format!(
            "need at least 64 equally many samples per trajectory, got {len}"
        )));
    }
    if pairs < 2 {
        return Err(Error::invalid("holder.pairs", "need at least 2"));
    }
    let mut lags = Vec::new();
    let mut moments = Vec::new();
    let mut lag = 1;
    while 4 * lag < len {
        let span = len - 1 - lag;
        let count = pairs.min(span + 1);
        let mut acc = 0.0;
        for t in trajectories {
            for i in 0..count {
                let s = i * span / (count - 1).max(1);
                let d = t[s + lag].sub(&t[s])?;
                acc += h_norm(&d, -beta)?.powf(r);
            }
        }
        lags.push(lag as f64 * spacing);
        moments.push(acc / (count * trajectories.len()) as f64);
        lag *= 2;
    }
    let points: Vec<(f64, f64)> = lags
        .iter()
        .zip(&moments)
        .filter(|(_, &m)| m > 0.0)
        .map(|(l, m)| (l.ln(), m.ln()))
        .collect();
    let slope = (points.len() >= 2).then(|| {
        let n = points.len() as f64;
        let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
        let my = points.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    });
    Ok(HolderFit {
        slope,
        lags,
        moments,
    })
}

/// Sparse spectrum of `sigma_k . grad e_j` for each noise mode, conjugated.
type Probe = Vec<Vec<(usize, Complex64)>>;

struct RadiusContext {
    cfg: SolverConfig,
    probe: Probe,
}

impl RadiusContext {
    fn new(plan: &ExperimentPlan, radius: u32) -> Result<Self> {
        let cfg = plan.solver_config(radius)?;
        let grid = &cfg.base.grid;
        let j = plan.probe_mode;
        let probe = cfg
            .noise
            .modes()
            .iter()
            .map(|m| {
                let h = ScalarField::from_fn(grid, |x| {
                    let s = sigma(&m.index, x);
                    let g = basis_gradient(&j, x);
                    s[0] * g[0] + s[1] * g[1]
                });
                h.bins()
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| c.norm() > 1e-13)
                    .map(|(q, c)| (q, c.conj()))
                    .collect()
            })
            .collect();
        Ok(Self { cfg, probe })
    }
}

struct ReplicaOutcome {
    distance: f64,
    martingale_sup: f64,
    trajectory: Option<Vec<ScalarField>>,
}

fn run_replica(
    ctx: &RadiusContext,
    initial: &ScalarField,
    reference: &[ScalarField],
    replica: u64,
    keep: bool,
    bound: Option<f64>,
) -> std::result::Result<ReplicaOutcome, AbortedReplica> {
    let base = &ctx.cfg.base;
    let grid = &base.grid;
    let steps = base.steps().expect("validated plan");
    let mut integ = Integrator::stochastic(&ctx.cfg).expect("validated plan");
    let modes = ctx.cfg.noise.modes();
    let mut x = initial.values().to_vec();
    let mut diff = vec![0.0; x.len()];
    let (mut distance, mut s, mut s_sup) = (0.0f64, 0.0f64, 0.0f64);
    let mut trajectory = keep.then(|| vec![initial.clone()]);
    for step in 0..steps {
        let abort = |_: Error| AbortedReplica {
            radius: ctx.cfg.noise.family().radius(),
            replica,
            step: step + 1,
            time: (step + 1) as f64 * base.dt,
        };
        integ.step(&mut x, step as u64, replica).map_err(abort)?;
        if let Some(b) = bound {
            if x.iter().any(|v| v.abs() > b) {
                return Err(abort(Error::NonFinite("state")));
            }
        }
        if let Some(g_hat) = integ.pre_step_transport_bins() {
            for ((m, probe), db) in modes.iter().zip(&ctx.probe).zip(integ.increments()) {
                let inner: f64 = probe.iter().map(|(q, c)| (g_hat[*q] * c).re).sum();
                s += m.alpha * inner * db;
            }
            s_sup = s_sup.max(s * s);
        }
        if (step + 1) % base.stride == 0 {
            let target = &reference[(step + 1) / base.stride];
            for ((d, a), b) in diff.iter_mut().zip(&x).zip(target.values()) {
                *d = a - b;
            }
            let field = ScalarField::from_values(grid, diff.clone()).expect("sized");
            distance = distance.max(h_norm_bins(grid, field.bins(), -1.0));
            if let Some(t) = trajectory.as_mut() {
                t.push(ScalarField::from_values(grid, x.clone()).expect("sized"));
            }
        }
    }
    Ok(ReplicaOutcome {
        distance,
        martingale_sup: s_sup,
        trajectory,
    })
}

fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(feature = "parallel")]
pub(crate) fn map_jobs<T, R, F>(jobs: Vec<T>, threads: Option<usize>, f: F) -> Result<Vec<R>>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    let run = || jobs.into_par_iter().map(&f).collect();
    match threads {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::Precondition(format!("thread pool: {e}")))
            .map(|pool| pool.install(run)),
        None => Ok(run()),
    }
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_jobs<T, R, F>(jobs: Vec<T>, _threads: Option<usize>, f: F) -> Result<Vec<R>>
where
    F: Fn(T) -> R,
{
    Ok(jobs.into_iter().map(f).collect())
}

/// Solves the limit equation once and returns its states at the sample instants.
pub fn reference_solution(plan: &ExperimentPlan) -> Result<Vec<ScalarField>> {
    Ok(crate::solver::solve_limit(&plan.initial, &plan.base)?.0.states)
}

pub fn run_convergence(plan: &ExperimentPlan) -> Result<ConvergenceReport> {
    plan.validate()?;
    let reference = reference_solution(plan)?;
    let contexts = plan
        .radii
        .iter()
        .map(|&n| RadiusContext::new(plan, n))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, u64)> = (0..contexts.len())
        .flat_map(|c| (0..plan.replicas as u64).map(move |r| (c, r)))
        .collect();
    let keep = plan.holder.trajectories as u64;
    let outcomes = map_jobs(jobs, plan.threads, |(c, r)| {
        run_replica(&contexts[c], &plan.initial, &reference, r, r < keep, plan.state_bound)
    })?;

    let spacing = plan.base.dt * plan.base.stride as f64;
    let mut rows = Vec::with_capacity(contexts.len());
    let mut aborted = Vec::new();
    for (ctx, chunk) in contexts.iter().zip(outcomes.chunks(plan.replicas)) {
        let mut distances = Vec::new();
        let mut sups = Vec::new();
        let mut kept = Vec::new();
        let mut lost = 0;
        for outcome in chunk {
            match outcome {
                Ok(o) => {
                    distances.push(o.distance);
                    sups.push(o.martingale_sup);
                    if let Some(t) = &o.trajectory {
                        kept.push(t.clone());
                    }
                }
                Err(a) => {
                    lost += 1;
                    aborted.push(a.clone());
                }
            }
        }
        let (mean_distance, std_error) = mean_and_se(&distances);
        let (martingale_decay, martingale_std_error) = mean_and_se(&sups);
        let truncated: Vec<f64> = distances.iter().map(|d| d.min(1.0)).collect();
        let holder_exponent = if kept.is_empty() {
            None
        } else {
            holder_increment_estimate(&kept, spacing, plan.holder.beta, plan.holder.r, plan.holder.pairs)
                .ok()
                .and_then(|f| f.slope)
        };
        rows.push(ConvergenceRow {
            radius: ctx.cfg.noise.family().radius(),
            c_n: ctx.cfg.noise.family().sup_norm(),
            mean_distance,
            max_distance: distances.iter().copied().fold(0.0, f64::max),
            std_error,
            truncated_mean: mean_and_se(&truncated).0,
            aborted_paths: lost,
            holder_exponent,
            martingale_decay,
            martingale_std_error,
            replica_distances: distances,
        });
    }
    let total = plan.replicas * plan.radii.len();
    if aborted.len() as f64 > plan.max_abort_fraction * total as f64 {
        return Err(Error::TooManyAborted {
            aborted: aborted.len(),
            total,
            allowed: plan.max_abort_fraction,
            failures: aborted,
        });
    }
    Ok(ConvergenceReport { rows, aborted })
}

/// Per-`N` mean of `sup_t |S(t)|^2` and its standard error.
pub fn martingale_decay_probe(plan: &ExperimentPlan) -> Result<Vec<(u32, f64, f64)>> {
    Ok(run_convergence(plan)?
        .rows
        .iter()
        .map(|r| (r.radius, r.martingale_decay, r.martingale_std_error))
        .collect())
}
