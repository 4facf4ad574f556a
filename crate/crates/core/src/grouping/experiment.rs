//! Grouping accuracy of several distances on synthetic random-walk volumes.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{
    analytic_table, check_structure, evaluate_grouping, fast_marching_table, keypoints_from_raster,
    perceptual_group, Accuracy, KeyPoint, KeyPointPipeline, PairTable,
};
use crate::error::Result;
use crate::grid::{LiftedGrid, OrientationSampling};
use crate::lifting::{lift_mask, max_project, LiftParams, OrientationVolume, DEFAULT_N_BETA};
use crate::metrics::{CostField, Manifold, MetricSpec};
use crate::synthesis::{generate_volume, volume_seeds, SynthConfig, SyntheticVolume};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    /// Fast marching on ℝ³.
    Euclidean,
    /// Fast marching on ℝ³×S² with the ξ-isotropic Riemannian metric.
    Riemannian,
    /// Fast marching on ℝ³×S² with the relaxed sub-Riemannian metric.
    SubRiemannian,
    /// Gauge norm of the logarithm in the nilpotent approximation.
    Analytic,
}

impl BackendKind {
    pub const ALL: [BackendKind; 4] = [
        BackendKind::Euclidean,
        BackendKind::Riemannian,
        BackendKind::SubRiemannian,
        BackendKind::Analytic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BackendKind::Euclidean => "euclidean",
            BackendKind::Riemannian => "riemannian",
            BackendKind::SubRiemannian => "subriemannian",
            BackendKind::Analytic => "analytic",
        }
    }

    pub fn is_lifted(self) -> bool {
        !matches!(self, BackendKind::Euclidean)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Volume parameters; `seed` is the master seed.
    pub synth: SynthConfig,
    pub n_volumes: usize,
    pub l_max: f64,
    pub s_max: f64,
    pub xi: f64,
    pub epsilon: f64,
    pub zeta: f64,
    pub lambda: f64,
    pub p: f64,
    pub lift: LiftParams,
    /// Sphere resolution for orientation estimation.
    pub lift_n_beta: usize,
    /// Sphere resolution of the fast-marching grids.
    pub march_n_beta: usize,
    pub backends: Vec<BackendKind>,
    /// Which cost settings to run: `false` for `C = 1`, `true` for the
    /// data-driven cost. The analytic backend only runs with `C = 1`.
    pub data_adaptive: Vec<bool>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            synth: SynthConfig::default(),
            n_volumes: 5,
            l_max: 5.0,
            s_max: super::DEFAULT_S_MAX_3D,
            xi: super::DEFAULT_XI_3D,
            epsilon: 0.1,
            zeta: crate::se3::DEFAULT_ZETA,
            lambda: 100.0,
            p: 1.0,
            lift: LiftParams::default(),
            lift_n_beta: DEFAULT_N_BETA,
            march_n_beta: DEFAULT_N_BETA,
            backends: BackendKind::ALL.to_vec(),
            data_adaptive: vec![false, true],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BackendScore {
    pub backend: BackendKind,
    pub data_adaptive: bool,
    pub per_volume: Vec<Accuracy>,
    /// Mean of the per-volume percentages.
    pub mean_percent: f64,
    /// Correct edges over all edges of all volumes, in percent.
    pub pooled_percent: f64,
    pub false_connections: usize,
    /// Every run produced a forest of degree ≤ 2 within `s_max`.
    pub structure_ok: bool,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub volume_seeds: Vec<u64>,
    pub keypoints_per_volume: Vec<usize>,
    pub scores: Vec<BackendScore>,
}

impl ExperimentReport {
    pub fn score(&self, backend: BackendKind, data_adaptive: bool) -> Option<&BackendScore> {
        self.scores
            .iter()
            .find(|s| s.backend == backend && s.data_adaptive == data_adaptive)
    }
}

struct Prepared {
    points: Vec<KeyPoint>,
    projected: Vec<f32>,
    march_volume: OrientationVolume,
    volume: SyntheticVolume,
}

fn prepare(cfg: &ExperimentConfig, seed: u64) -> Result<Prepared> {
    let volume = generate_volume(&SynthConfig { seed, ..cfg.synth })?;
    let sp = &volume.raster.grid;
    let lift_sampling = OrientationSampling::sphere(cfg.lift_n_beta)?;
    let lifted = lift_mask(&volume.raster.mask, sp, &lift_sampling, &cfg.lift)?;
    let points = keypoints_from_raster(
        &volume.raster,
        &lifted,
        &KeyPointPipeline {
            l_max: cfg.l_max,
            lambda: cfg.lambda,
            p: cfg.p,
        },
    )?;
    let march_volume = if cfg.march_n_beta == cfg.lift_n_beta {
        lifted
    } else {
        lift_mask(
            &volume.raster.mask,
            sp,
            &OrientationSampling::sphere(cfg.march_n_beta)?,
            &cfg.lift,
        )?
    };
    let projected = max_project(&march_volume);
    Ok(Prepared {
        points,
        projected,
        march_volume,
        volume,
    })
}

fn table(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    backend: BackendKind,
    adaptive: bool,
) -> Result<PairTable> {
    let sp = prep.volume.raster.grid.clone();
    match backend {
        BackendKind::Analytic => analytic_table(&prep.points, Manifold::SE3, cfg.xi, cfg.zeta),
        BackendKind::Euclidean => {
            let grid = LiftedGrid::new(sp, OrientationSampling::None)?;
            let cost = if adaptive {
                Some(CostField::from_vesselness(
                    grid.clone(),
                    &prep.projected,
                    cfg.lambda,
                    cfg.p,
                )?)
            } else {
                None
            };
            let metric = MetricSpec::euclidean(Manifold::R3);
            fast_marching_table(&prep.points, &grid, &metric, cost.as_ref(), Some(cfg.s_max))
        }
        BackendKind::Riemannian | BackendKind::SubRiemannian => {
            let grid = prep.march_volume.grid.clone();
            let cost = if adaptive {
                Some(CostField::from_vesselness(
                    grid.clone(),
                    &prep.march_volume.values,
                    cfg.lambda,
                    cfg.p,
                )?)
            } else {
                None
            };
            let metric = if backend == BackendKind::Riemannian {
                MetricSpec::riemannian(Manifold::SE3, cfg.xi)
            } else {
                MetricSpec::sub_riemannian(Manifold::SE3, cfg.xi, cfg.epsilon)
            };
            fast_marching_table(&prep.points, &grid, &metric, cost.as_ref(), Some(cfg.s_max))
        }
    }
}

/// Runs every configured backend and cost setting on `n_volumes` volumes.
/// `progress` receives one line per finished (volume, backend, cost) run.
pub fn run_synthetic_experiment(
    cfg: &ExperimentConfig,
    mut progress: impl FnMut(&str),
) -> Result<ExperimentReport> {
    let seeds = volume_seeds(cfg.synth.seed, cfg.n_volumes);
    let mut runs: Vec<(BackendKind, bool)> = Vec::new();
    for &adaptive in &cfg.data_adaptive {
        for &b in &cfg.backends {
            if !(adaptive && b == BackendKind::Analytic) {
                runs.push((b, adaptive));
            }
        }
    }
    let mut results: Vec<(Vec<Accuracy>, bool, f64)> = vec![(Vec::new(), true, 0.0); runs.len()];
    let mut keypoints = Vec::new();
    for (v, &seed) in seeds.iter().enumerate() {
        let prep = prepare(cfg, seed)?;
        keypoints.push(prep.points.len());
        let labels: Vec<Vec<usize>> = prep.points.iter().map(|p| p.labels.clone()).collect();
        for (r, &(backend, adaptive)) in runs.iter().enumerate() {
            let t0 = Instant::now();
            let t = table(cfg, &prep, backend, adaptive)?;
            let g = perceptual_group(&t, cfg.s_max);
            let secs = t0.elapsed().as_secs_f64();
            let acc = evaluate_grouping(&g.edges, &labels)?;
            let ok = check_structure(prep.points.len(), &g.edges, cfg.s_max).is_ok();
            progress(&format!(
                "volume {v}: {} (C{}1): {:.2}% of {} edges, {:.1}s",
                backend.name(),
                if adaptive { "≠" } else { "=" },
                acc.percent,
                acc.edges,
                secs
            ));
            let slot = &mut results[r];
            slot.0.push(acc);
            slot.1 &= ok;
            slot.2 += secs;
        }
    }
    let scores = runs
        .iter()
        .zip(results)
        .map(
            |(&(backend, data_adaptive), (per_volume, structure_ok, seconds))| {
                let n = per_volume.len().max(1) as f64;
                let edges: usize = per_volume.iter().map(|a| a.edges).sum();
                let correct: usize = per_volume.iter().map(|a| a.correct).sum();
                BackendScore {
                    backend,
                    data_adaptive,
                    mean_percent: per_volume.iter().map(|a| a.percent).sum::<f64>() / n,
                    pooled_percent: if edges == 0 {
                        100.0
                    } else {
                        100.0 * correct as f64 / edges as f64
                    },
                    false_connections: edges - correct,
                    per_volume,
                    structure_ok,
                    seconds,
                }
            },
        )
        .collect();
    Ok(ExperimentReport {
        config: cfg.clone(),
        volume_seeds: seeds,
        keypoints_per_volume: keypoints,
        scores,
    })
}
