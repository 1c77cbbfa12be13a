use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::config::{Experiment, ExperimentConfig, TransportKind};
use super::gradcheck::{check_case, GradCase};
use super::ratings::{load_ratings, RatingsData, SplitOptions};
use super::vmf::{random_mean_direction, sample_vmf};
use crate::comm::{decode, encode, InProcTransport, Message, MessageKind, SocketTransport, Transport};
use crate::engine::{inner_minimize_tolerant, run_ilea, InnerConfig, IterationRecord, Objective};
use crate::error::{IleaError, Result};
use crate::grassmann::Grassmann;
use crate::losses::{extrinsic_mean_closed_form, FrechetMetric, FrechetShard, LocalLoss, RatingsShard};
use crate::manifold::{Manifold, Point};
use crate::rng::substream;
use crate::sphere::Sphere;

pub const CSV_HEADER: &str = "trial,iter,wallclock_s,rmse,grad_norm,comm_bytes";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsRow {
    pub trial: usize,
    pub iter: usize,
    pub wallclock_s: f64,
    pub rmse: f64,
    pub grad_norm: f64,
    pub comm_bytes: u64,
}

/// CSV sink that flushes after every row.
pub struct MetricsWriter<W: Write> {
    inner: W,
}

impl<W: Write> MetricsWriter<W> {
    pub fn new(mut inner: W) -> Result<Self> {
        writeln!(inner, "{CSV_HEADER}")?;
        inner.flush()?;
        Ok(Self { inner })
    }

    pub fn write_row(&mut self, row: &MetricsRow) -> Result<()> {
        writeln!(
            self.inner,
            "{},{},{:.6},{:.12e},{:.12e},{}",
            row.trial, row.iter, row.wallclock_s, row.rmse, row.grad_norm, row.comm_bytes
        )?;
        self.inner.flush()?;
        Ok(())
    }
}

pub fn save_checkpoint(path: &Path, point: &Point, round: u64) -> Result<()> {
    std::fs::write(path, encode(&Message::iterate(point, round, 0)))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Point> {
    let msg = decode(&std::fs::read(path)?)?;
    if msg.kind != MessageKind::Iterate {
        return Err(IleaError::Protocol(format!("checkpoint holds a {:?} message", msg.kind)));
    }
    Ok(Point::from_matrix(msg.to_matrix()?))
}

/// The starting estimate: a single-machine solve of shard 0's loss from
/// `warm_start`.
pub fn initialize_estimator(
    manifold: &dyn Manifold,
    shard0: &dyn LocalLoss,
    warm_start: &Point,
    inner: &InnerConfig,
) -> Result<Point> {
    let (out, _) = inner_minimize_tolerant(manifold, shard0, warm_start, inner)?;
    Ok(out.point)
}

/// Column ranges `[j N / m, (j + 1) N / m)`.
pub fn even_ranges(n: usize, m: usize) -> Vec<std::ops::Range<usize>> {
    (0..m).map(|j| j * n / m..(j + 1) * n / m).collect()
}

/// Data of one sphere trial: the vMF mean direction and the samples.
pub fn frechet_trial_data(cfg: &ExperimentConfig, trial: usize) -> Result<(Point, DMatrix<f64>)> {
    let mut rng = substream(cfg.seed, trial as u64);
    let mu = random_mean_direction(cfg.d + 1, &mut rng);
    let data = sample_vmf(&mu, cfg.kappa, cfg.n, &mut rng)?;
    Ok((mu, data))
}

pub fn frechet_shards(
    sphere: &Sphere,
    metric: FrechetMetric,
    data: &DMatrix<f64>,
    workers: usize,
) -> Result<Vec<Arc<dyn LocalLoss>>> {
    even_ranges(data.ncols(), workers)
        .into_iter()
        .map(|r| {
            let block = data.columns(r.start, r.len()).into_owned();
            Ok(Arc::new(FrechetShard::new(sphere.clone(), metric, block)?) as Arc<dyn LocalLoss>)
        })
        .collect()
}

/// The full-data minimizer: closed form for the extrinsic loss, a tight
/// single-machine solve from the extrinsic mean for the intrinsic one.
pub fn frechet_oracle(sphere: &Sphere, metric: FrechetMetric, data: &DMatrix<f64>) -> Result<Point> {
    let closed = extrinsic_mean_closed_form(sphere, data)?;
    if metric == FrechetMetric::Extrinsic {
        return Ok(closed);
    }
    let full = FrechetShard::new(sphere.clone(), metric, data.clone())?;
    let tight = InnerConfig {
        max_steps: 5_000,
        grad_tol: 1e-14,
        ..InnerConfig::default()
    };
    let (out, _) = inner_minimize_tolerant(sphere, &full, &closed, &tight)?;
    polish(sphere, &full, &out.point, 1e-14, 2_000)
}

/// Barzilai–Borwein gradient steps without a line search, for driving the
/// gradient norm below where value comparisons can resolve progress.
/// Returns the iterate with the smallest gradient norm seen.
pub fn polish<F: Objective + ?Sized>(
    manifold: &dyn Manifold,
    f: &F,
    start: &Point,
    grad_tol: f64,
    max_iters: usize,
) -> Result<Point> {
    let mut theta = start.clone();
    let mut g = f.value_grad(&theta)?.grad;
    let mut best = (g.norm(), theta.clone());
    let mut step = 1.0;
    let mut since_best = 0;
    for _ in 0..max_iters {
        if best.0 <= grad_tol || since_best >= 50 {
            break;
        }
        let next = manifold.retract(&theta, &g.scaled(-step))?;
        let g_next = f.value_grad(&next)?.grad;
        let s = next.coords() - theta.coords();
        let y = g_next.vec() - g.vec();
        let sy = s.dot(&y).abs();
        if sy > 0.0 {
            step = (s.norm_squared() / sy).clamp(1e-3, 1e3);
        }
        theta = next;
        g = g_next;
        if g.norm() < best.0 {
            best = (g.norm(), theta.clone());
            since_best = 0;
        } else {
            since_best += 1;
        }
    }
    Ok(best.1)
}

/// A full trial's outcome.
#[derive(Clone, Debug)]
pub struct TrialResult {
    pub trial: usize,
    pub point: Point,
    pub oracle: Option<Point>,
    pub final_rmse: f64,
    pub records: Vec<IterationRecord>,
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub experiment: Experiment,
    pub trials: Vec<TrialResult>,
    /// Gradient-check rows, `(case, instance, relative error)`.
    pub gradcheck: Vec<(GradCase, usize, f64)>,
}

impl ExperimentReport {
    /// `sqrt(mean_t rmse_t^2)` over trials.
    pub fn aggregate_rmse(&self) -> f64 {
        if self.trials.is_empty() {
            return f64::NAN;
        }
        let s: f64 = self.trials.iter().map(|t| t.final_rmse.powi(2)).sum();
        (s / self.trials.len() as f64).sqrt()
    }
}

pub fn make_transport(cfg: &ExperimentConfig, shards: &[Arc<dyn LocalLoss>]) -> Result<Box<dyn Transport>> {
    Ok(match cfg.transport {
        TransportKind::InProc => Box::new(InProcTransport::spawn(shards, cfg.round_timeout)),
        TransportKind::Socket => Box::new(SocketTransport::spawn_local(
            shards,
            cfg.socket_addr.as_str(),
            cfg.round_timeout,
        )?),
    })
}

pub type RowSink<'a> = Option<&'a mut MetricsWriter<Box<dyn Write>>>;

#[allow(clippy::too_many_arguments)]
fn drive(
    cfg: &ExperimentConfig,
    trial: usize,
    manifold: &dyn Manifold,
    shards: &[Arc<dyn LocalLoss>],
    start: &Point,
    oracle: Option<&Point>,
    rmse_of: &dyn Fn(&Point) -> Result<f64>,
    sink: &mut RowSink<'_>,
) -> Result<TrialResult> {
    let mut transport = make_transport(cfg, shards)?;
    let mut last_rmse = f64::NAN;
    let mut observer = |rec: &IterationRecord| -> Result<()> {
        last_rmse = rmse_of(&rec.iterate)?;
        if let Some(w) = sink.as_deref_mut() {
            w.write_row(&MetricsRow {
                trial,
                iter: rec.iter,
                wallclock_s: if cfg.wallclock { rec.wall.as_secs_f64() } else { 0.0 },
                rmse: last_rmse,
                grad_norm: rec.grad_norm,
                comm_bytes: rec.comm_bytes,
            })?;
        }
        Ok(())
    };
    let out = run_ilea(manifold, shards, start, &cfg.ilea, transport.as_mut(), oracle, &mut observer)?;
    transport.shutdown()?;
    Ok(TrialResult {
        trial,
        point: out.point,
        oracle: oracle.cloned(),
        final_rmse: last_rmse,
        records: out.records,
    })
}

/// One sphere trial on pre-drawn data.
pub fn run_frechet_trial(
    cfg: &ExperimentConfig,
    trial: usize,
    data: &DMatrix<f64>,
    sink: &mut RowSink<'_>,
) -> Result<TrialResult> {
    let metric = match cfg.experiment {
        Experiment::FrechetExtrinsic => FrechetMetric::Extrinsic,
        Experiment::FrechetIntrinsic => FrechetMetric::Intrinsic,
        other => return Err(IleaError::Config(format!("{other} is not a sphere experiment"))),
    };
    let sphere = Sphere::new(cfg.d)?;
    let oracle = frechet_oracle(&sphere, metric, data)?;
    let shards = frechet_shards(&sphere, metric, data, cfg.workers)?;
    let r0 = &even_ranges(data.ncols(), cfg.workers)[0];
    let warm = extrinsic_mean_closed_form(&sphere, &data.columns(r0.start, r0.len()).into_owned())?;
    let start = initialize_estimator(&sphere, shards[0].as_ref(), &warm, &cfg.ilea.inner)?;
    let rmse_of = |p: &Point| -> Result<f64> { Ok((p.coords() - oracle.coords()).norm()) };
    drive(cfg, trial, &sphere, &shards, &start, Some(&oracle), &rmse_of, sink)
}

/// Top-`r` left singular vectors of shard 0's zero-filled ratings matrix,
/// or a random subspace when that matrix is rank deficient.
pub fn completion_warm_start(shard: &RatingsShard, seed: u64) -> Result<Point> {
    let gr = shard.grassmann();
    let mut dense = DMatrix::zeros(shard.n_items(), shard.users().len());
    for (k, u) in shard.users().iter().enumerate() {
        for &(item, rating) in &u.entries {
            dense[(item as usize, k)] = rating;
        }
    }
    let svd = dense.svd(true, false);
    let u = svd.u.expect("requested U");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let r = shard.rank();
    if order.len() >= r && svd.singular_values[order[r - 1]] > 1e-10 {
        let cols: Vec<_> = order[..r].iter().map(|&k| u.column(k).into_owned()).collect();
        return gr.orthonormalize(&DMatrix::from_columns(&cols));
    }
    Ok(gr.random_point(&mut substream(seed, u64::MAX)))
}

/// One matrix-completion trial on pre-split data.
pub fn run_completion_trial(
    cfg: &ExperimentConfig,
    trial: usize,
    data: &RatingsData,
    sink: &mut RowSink<'_>,
) -> Result<TrialResult> {
    let gr: Grassmann = data.shards[0].grassmann().clone();
    let shards: Vec<Arc<dyn LocalLoss>> = data
        .shards
        .iter()
        .map(|s| Arc::new(s.clone()) as Arc<dyn LocalLoss>)
        .collect();
    let warm = completion_warm_start(&data.shards[0], cfg.seed)?;
    let start = initialize_estimator(&gr, shards[0].as_ref(), &warm, &cfg.ilea.inner)?;
    let rmse_of = |p: &Point| data.test_rmse(p);
    drive(cfg, trial, &gr, &shards, &start, None, &rmse_of, sink)
}

pub fn completion_data(cfg: &ExperimentConfig, trial: usize) -> Result<RatingsData> {
    let path = cfg
        .ratings
        .as_ref()
        .ok_or_else(|| IleaError::Config("matrix completion needs a ratings file".into()))?;
    load_ratings(
        path,
        &SplitOptions {
            workers: cfg.workers,
            rank: cfg.r,
            lambda: cfg.lambda,
            seed: cfg.seed.wrapping_add(trial as u64),
            center: cfg.center_ratings,
        },
    )
}

/// Runs every trial of `cfg`, writing metrics to `cfg.out` and the last
/// trial's final iterate to `cfg.checkpoint` when those are set.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut writer = match &cfg.out {
        Some(path) => {
            let file: Box<dyn Write> = Box::new(BufWriter::new(File::create(path)?));
            Some(MetricsWriter::new(file)?)
        }
        None => None,
    };
    let mut report = ExperimentReport {
        experiment: cfg.experiment,
        trials: Vec::new(),
        gradcheck: Vec::new(),
    };
    for trial in 0..cfg.trials {
        let mut sink = writer.as_mut();
        match cfg.experiment {
            Experiment::FrechetExtrinsic | Experiment::FrechetIntrinsic => {
                let (_, data) = frechet_trial_data(cfg, trial)?;
                let res = run_frechet_trial(cfg, trial, &data, &mut sink)?;
                log::info!("trial {trial}: rmse {:.3e}", res.final_rmse);
                report.trials.push(res);
            }
            Experiment::MatrixCompletion => {
                let data = completion_data(cfg, trial)?;
                let res = run_completion_trial(cfg, trial, &data, &mut sink)?;
                log::info!("trial {trial}: test rmse {:.4}", res.final_rmse);
                report.trials.push(res);
            }
            Experiment::GradCheck => {
                let mut rng = substream(cfg.seed, trial as u64);
                for (iter, case) in GradCase::ALL.into_iter().enumerate() {
                    let (err, norm) = check_case(case, &mut rng)?;
                    report.gradcheck.push((case, trial, err));
                    if let Some(w) = sink.as_deref_mut() {
                        w.write_row(&MetricsRow {
                            trial,
                            iter,
                            wallclock_s: 0.0,
                            rmse: err,
                            grad_norm: norm,
                            comm_bytes: 0,
                        })?;
                    }
                }
            }
        }
    }
    if let (Some(path), Some(last)) = (&cfg.checkpoint, report.trials.last()) {
        save_checkpoint(path, &last.point, cfg.ilea.outer_iters as u64)?;
    }
    Ok(report)
}
