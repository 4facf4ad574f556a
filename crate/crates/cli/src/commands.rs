use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, ValueEnum};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use nilgroup::eikonal::{solve_eikonal, MarchOptions};
use nilgroup::grid::{LiftedGrid, OrientationSampling, SpatialGrid};
use nilgroup::grouping::{
    analytic_table, check_structure, evaluate_grouping, fast_marching_table, keypoints_from_mask,
    perceptual_group, GraphRecord, KeyPoint, KeyPointPipeline, DEFAULT_S_MAX_2D, DEFAULT_S_MAX_3D,
    DEFAULT_XI_2D, DEFAULT_XI_3D,
};
use nilgroup::io::{read_json, write_csv_grid, write_json, write_pgm, FieldFile};
use nilgroup::lifting::{
    binary_mask, lift_mask, max_project, LiftParams, OrientationVolume, DEFAULT_N_BETA,
    DEFAULT_N_THETA,
};
use nilgroup::metrics::{CostField, Manifold, MetricMode, MetricSpec};
use nilgroup::se2::Se2;
use nilgroup::se3::OrientedPoint3;
use nilgroup::synthesis::{generate_dataset, SynthConfig};
use nilgroup::validation::{run_sweep, Group, ReferenceGrid, SweepSpec};

use crate::{metadata, CliError, CliResult, OUTPUT_DIR_ENV};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupArg {
    Se2,
    Se3,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum ManifoldArg {
    #[value(name = "r2", alias = "R2")]
    R2,
    #[value(name = "r3", alias = "R3")]
    R3,
    #[value(name = "se2", alias = "SE2")]
    SE2,
    #[value(name = "se3", alias = "SE3")]
    SE3,
}

impl From<ManifoldArg> for Manifold {
    fn from(m: ManifoldArg) -> Manifold {
        match m {
            ManifoldArg::R2 => Manifold::R2,
            ManifoldArg::R3 => Manifold::R3,
            ManifoldArg::SE2 => Manifold::SE2,
            ManifoldArg::SE3 => Manifold::SE3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Euclidean,
    Riemannian,
    Subriemannian,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendArg {
    Euclid,
    Riemann,
    Subriemann,
    Analytic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostArg {
    None,
    Mask,
}

fn output_dir() -> PathBuf {
    std::env::var_os(OUTPUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."))
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn print_json(v: &Value) {
    use std::io::Write;
    let _ = writeln!(
        std::io::stdout(),
        "{}",
        serde_json::to_string_pretty(v).unwrap_or_default()
    );
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn meta_path(path: &Path) -> PathBuf {
    with_suffix(&path.with_extension(""), ".meta.json")
}

fn write_meta(path: &Path, meta: &Value) -> CliResult<()> {
    write_json(path, meta)?;
    Ok(())
}

fn spatial_dim(manifold: Manifold) -> usize {
    match manifold {
        Manifold::R2 | Manifold::SE2 => 2,
        Manifold::R3 | Manifold::SE3 => 3,
    }
}

fn sampling_for(manifold: Manifold, count: Option<usize>) -> CliResult<OrientationSampling> {
    Ok(match manifold {
        Manifold::R2 | Manifold::R3 => OrientationSampling::None,
        Manifold::SE2 => OrientationSampling::circle(count.unwrap_or(DEFAULT_N_THETA))?,
        Manifold::SE3 => OrientationSampling::sphere(count.unwrap_or(DEFAULT_N_BETA))?,
    })
}

/// Circle or sphere sampling matching the spatial dimension of a mask.
fn lift_sampling(d: usize, count: Option<usize>) -> CliResult<OrientationSampling> {
    sampling_for(if d == 2 { Manifold::SE2 } else { Manifold::SE3 }, count)
}

// ---------------------------------------------------------------- dist

#[derive(Args, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct DistArgs {
    /// Group of the poses.
    #[arg(long, value_enum)]
    pub group: Option<GroupArg>,
    #[arg(long)]
    pub xi: Option<f64>,
    /// Gauge weight; defaults to 44 on SE(2) and 100 on SE(3).
    #[arg(long)]
    pub zeta: Option<f64>,
    /// Start pose: `x,y,θ` on SE(2), `x,y,z,nx,ny,nz` on SE(3).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub from: Option<Vec<f64>>,
    /// End pose, same layout as `--from`.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub to: Option<Vec<f64>>,
    /// Minimize over both signs of the end orientation.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub projective: Option<bool>,
}

pub fn dist(a: DistArgs) -> CliResult<()> {
    let group = a.group.ok_or_else(|| config_err("--group is required"))?;
    let xi = a.xi.unwrap_or(1.0);
    let from = a
        .from
        .as_deref()
        .ok_or_else(|| config_err("--from is required"))?;
    let to =
        a.to.as_deref()
            .ok_or_else(|| config_err("--to is required"))?;
    let projective = a.projective.unwrap_or(false);
    if !(xi > 0.0) {
        return Err(config_err("--xi must be positive"));
    }
    let (zeta, distance, log, near_cut) = match group {
        GroupArg::Se2 => {
            let zeta = a.zeta.unwrap_or(nilgroup::se2::DEFAULT_ZETA);
            if from.len() != 3 || to.len() != 3 {
                return Err(config_err("SE(2) poses take three values x,y,θ"));
            }
            let g = Se2::new(from[0], from[1], from[2]);
            let mut h = Se2::new(to[0], to[1], to[2]);
            let norm = |h: &Se2| g.inverse().compose(h).log().gauge_norm(xi, zeta);
            if projective && norm(&h.antipode()) < norm(&h) {
                h = h.antipode();
            }
            let l = g.inverse().compose(&h).log_flagged();
            (
                zeta,
                l.coords.gauge_norm(xi, zeta),
                l.coords.to_array().to_vec(),
                l.near_cut_locus,
            )
        }
        GroupArg::Se3 => {
            let zeta = a.zeta.unwrap_or(nilgroup::se3::DEFAULT_ZETA);
            if from.len() != 6 || to.len() != 6 {
                return Err(config_err("SE(3) poses take six values x,y,z,nx,ny,nz"));
            }
            let p = OrientedPoint3::new(
                Vector3::new(from[0], from[1], from[2]),
                Vector3::new(from[3], from[4], from[5]),
            )?;
            let mut q = OrientedPoint3::new(
                Vector3::new(to[0], to[1], to[2]),
                Vector3::new(to[3], to[4], to[5]),
            )?;
            let norm = |q: &OrientedPoint3| {
                p.lift()
                    .inverse()
                    .compose(&q.lift())
                    .log()
                    .gauge_norm(xi, zeta)
            };
            if projective && norm(&q.antipode()) < norm(&q) {
                q = q.antipode();
            }
            let l = p.lift().inverse().compose(&q.lift()).log_flagged();
            (
                zeta,
                l.coords.gauge_norm(xi, zeta),
                l.coords.0.to_vec(),
                l.near_cut_locus,
            )
        }
    };
    if !(zeta > 0.0) {
        return Err(config_err("--zeta must be positive"));
    }
    if !distance.is_finite() {
        return Err(CliError::Numerical("distance is not finite".into()));
    }
    print_json(&json!({
        "distance": distance,
        "log": log,
        "nearCutLocus": near_cut,
        "metadata": metadata("dist", &a, Map::new()),
    }));
    Ok(())
}

// ---------------------------------------------------------------- fastmarch

#[derive(Args, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct FastMarchArgs {
    #[arg(long, value_enum)]
    pub manifold: Option<ManifoldArg>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long)]
    pub xi: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Spatial samples per axis, fastest axis first (x,y[,z]).
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    #[arg(long)]
    pub spacing: Option<f64>,
    /// Physical position of the first sample; defaults to centering the grid.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub origin: Option<Vec<f64>>,
    /// Angles on the circle, or polar rows on the sphere.
    #[arg(long)]
    pub orientations: Option<usize>,
    /// Source poses, repeatable: `x,y` / `x,y,z` / `x,y,θ` / `x,y,z,nx,ny,nz`.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub source: Option<Vec<f64>>,
    /// Vesselness field; the cost is `1/(1 + λ V^p)`. Its grid is used when
    /// `--dims` is omitted.
    #[arg(long)]
    pub vesselness: Option<PathBuf>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    /// Fronts are not expanded past this spatial arc length.
    #[arg(long)]
    pub length_limit: Option<f64>,
    /// Output prefix; writes `<prefix>_U.f32`, `<prefix>_Ul.f32`, and sidecars.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn metric_from(manifold: Manifold, mode: ModeArg, xi: f64, epsilon: f64) -> MetricSpec {
    let m = MetricSpec {
        manifold,
        mode: match mode {
            ModeArg::Euclidean => MetricMode::Euclidean,
            ModeArg::Riemannian => MetricMode::Riemannian,
            ModeArg::Subriemannian => MetricMode::SubRiemannian,
        },
        ..MetricSpec::euclidean(manifold)
    };
    MetricSpec { xi, epsilon, ..m }
}

pub fn fastmarch(a: FastMarchArgs) -> CliResult<()> {
    let t0 = Instant::now();
    let manifold: Manifold = a
        .manifold
        .ok_or_else(|| config_err("--manifold is required"))?
        .into();
    let mode = a
        .mode
        .unwrap_or(if matches!(manifold, Manifold::R2 | Manifold::R3) {
            ModeArg::Euclidean
        } else {
            ModeArg::Subriemannian
        });
    let metric = metric_from(
        manifold,
        mode,
        a.xi.unwrap_or(1.0),
        a.epsilon.unwrap_or(0.1),
    );
    metric.validate()?;
    let d = spatial_dim(manifold);
    let vesselness = a.vesselness.as_deref().map(FieldFile::read).transpose()?;
    let grid = match (&a.dims, &vesselness) {
        (Some(dims), _) => {
            if dims.len() != d {
                return Err(config_err(format!("--dims needs {d} values")));
            }
            let h = a.spacing.unwrap_or(1.0);
            let origin = match &a.origin {
                Some(o) => o.clone(),
                None => dims.iter().map(|&n| -0.5 * (n as f64 - 1.0) * h).collect(),
            };
            let spatial = SpatialGrid::new(dims.clone(), vec![h; d], origin)?;
            LiftedGrid::new(spatial, sampling_for(manifold, a.orientations)?)?
        }
        (None, Some(v)) => v.grid.clone(),
        (None, None) => return Err(config_err("--dims or --vesselness is required")),
    };
    metric.check_grid(&grid)?;
    let cost = match &vesselness {
        Some(v) => {
            if v.grid != grid {
                return Err(config_err("vesselness field lives on a different grid"));
            }
            Some(CostField::from_vesselness(
                grid.clone(),
                &v.data,
                a.lambda.unwrap_or(100.0),
                a.p.unwrap_or(1.0),
            )?)
        }
        None => None,
    };
    let per = d + match manifold {
        Manifold::R2 | Manifold::R3 => 0,
        Manifold::SE2 => 1,
        Manifold::SE3 => 3,
    };
    let flat = a
        .source
        .as_deref()
        .ok_or_else(|| config_err("--source is required"))?;
    if flat.is_empty() || flat.len() % per != 0 {
        return Err(config_err(format!("each source takes {per} values")));
    }
    let mut sources = Vec::new();
    for s in flat.chunks(per) {
        let dir = match manifold {
            Manifold::SE2 => Some(vec![s[2].cos(), s[2].sin()]),
            Manifold::SE3 => Some(s[3..6].to_vec()),
            _ => None,
        };
        let node = grid
            .locate(&s[..d], dir.as_deref())
            .ok_or_else(|| config_err(format!("source {s:?} lies outside the grid")))?;
        sources.push(node);
    }
    let options = MarchOptions {
        length_limit: a.length_limit,
        value_limit: None,
    };
    let field = solve_eikonal(&grid, &metric, cost.as_ref(), &sources, options)?;
    let prefix = a
        .out
        .clone()
        .unwrap_or_else(|| output_dir().join("distance"));
    let u_path =
        FieldFile::from_f64(grid.clone(), &field.values)?.write(&with_suffix(&prefix, "_U.f32"))?;
    let l_path = FieldFile::from_f64(grid.clone(), &field.lengths)?
        .write(&with_suffix(&prefix, "_Ul.f32"))?;
    let reached = field.values.iter().filter(|v| v.is_finite()).count();
    let mut extra = Map::new();
    extra.insert(
        "metric".into(),
        serde_json::to_value(metric).unwrap_or(Value::Null),
    );
    extra.insert("sourceNodes".into(), json!(sources));
    extra.insert("reachedNodes".into(), json!(reached));
    extra.insert("outputs".into(), json!([u_path, l_path]));
    extra.insert("seconds".into(), json!(t0.elapsed().as_secs_f64()));
    let meta = metadata("fastmarch", &a, extra);
    write_meta(&with_suffix(&prefix, ".meta.json"), &meta)?;
    print_json(&meta);
    Ok(())
}

// ---------------------------------------------------------------- keypoints

#[derive(Args, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct KeyPointsArgs {
    /// Binary centerline mask (2D or 3D field without orientations).
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Integer label field on the mask grid (−1 for background).
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Arc length between key points, in grid units.
    #[arg(long)]
    pub l_max: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    /// Angles (2D) or polar rows (3D) for orientation estimation.
    #[arg(long)]
    pub orientations: Option<usize>,
    #[arg(long)]
    pub kernel_length: Option<f64>,
    #[arg(long)]
    pub kernel_width: Option<f64>,
    /// Output graph JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

struct Detected {
    points: Vec<KeyPoint>,
    mask: Vec<bool>,
    spatial: SpatialGrid,
    lifted: OrientationVolume,
}

fn load_mask(path: Option<&Path>) -> CliResult<(FieldFile, Vec<bool>)> {
    let path = path.ok_or_else(|| config_err("--mask is required"))?;
    let f = FieldFile::read(path)?;
    if f.grid.orientations != OrientationSampling::None {
        return Err(config_err("mask must not have an orientation axis"));
    }
    let d = f.grid.spatial.ndim();
    if !(d == 2 || d == 3) {
        return Err(config_err(format!("{d}D masks are not supported")));
    }
    let m = binary_mask(&f.data)?;
    Ok((f, m))
}

fn attach_labels(
    points: &mut [KeyPoint],
    spatial: &SpatialGrid,
    path: Option<&Path>,
) -> CliResult<bool> {
    let Some(path) = path else { return Ok(false) };
    let f = FieldFile::read(path)?;
    if f.grid.spatial != *spatial {
        return Err(config_err("label field lives on a different grid"));
    }
    for p in points.iter_mut() {
        let s = spatial
            .nearest(&p.position)
            .ok_or_else(|| CliError::Numerical("key point left the grid".into()))?;
        let l = f.data[s];
        p.labels = if l >= 0.0 {
            vec![l as usize]
        } else {
            Vec::new()
        };
    }
    Ok(true)
}

fn detect(a: &KeyPointsArgs) -> CliResult<Detected> {
    let (field, mask) = load_mask(a.mask.as_deref())?;
    let spatial = field.grid.spatial.clone();
    let params = LiftParams {
        kernel_length: a
            .kernel_length
            .unwrap_or(LiftParams::default().kernel_length),
        kernel_width: a.kernel_width.unwrap_or(LiftParams::default().kernel_width),
    };
    let sampling = lift_sampling(spatial.ndim(), a.orientations)?;
    let lifted = lift_mask(&mask, &spatial, &sampling, &params)?;
    let pipeline = KeyPointPipeline {
        l_max: a.l_max.unwrap_or(5.0),
        lambda: a.lambda.unwrap_or(100.0),
        p: a.p.unwrap_or(1.0),
    };
    let mut points = keypoints_from_mask(&mask, &spatial, &lifted, &pipeline)?;
    attach_labels(&mut points, &spatial, a.labels.as_deref())?;
    Ok(Detected {
        points,
        mask,
        spatial,
        lifted,
    })
}

pub fn keypoints(a: KeyPointsArgs) -> CliResult<()> {
    let t0 = Instant::now();
    let det = detect(&a)?;
    let out = a
        .out
        .clone()
        .unwrap_or_else(|| output_dir().join("keypoints.json"));
    write_json(&out, &GraphRecord::new(&det.points, &[]))?;
    let mut extra = Map::new();
    extra.insert("keypoints".into(), json!(det.points.len()));
    extra.insert(
        "maskVoxels".into(),
        json!(det.mask.iter().filter(|&&m| m).count()),
    );
    extra.insert("outputs".into(), json!([out]));
    extra.insert("seconds".into(), json!(t0.elapsed().as_secs_f64()));
    let meta = metadata("keypoints", &a, extra);
    write_meta(&meta_path(&out), &meta)?;
    print_json(&meta);
    Ok(())
}

// ---------------------------------------------------------------- group

#[derive(Args, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GroupArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub detection: KeyPointsArgs,
    /// Key-point graph JSON to group instead of detecting key points.
    #[arg(long)]
    pub keypoints: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub backend: Option<BackendArg>,
    /// `mask` makes fast-marching backends data-adaptive.
    #[arg(long, value_enum)]
    pub cost: Option<CostArg>,
    /// Maximal spatial length of an edge.
    #[arg(long)]
    pub s_max: Option<f64>,
    #[arg(long)]
    pub xi: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub zeta: Option<f64>,
    /// Orientation resolution of the fast-marching grid; defaults to `--orientations`.
    #[arg(long)]
    pub march_orientations: Option<usize>,
}

pub fn group(a: GroupArgs) -> CliResult<()> {
    let t0 = Instant::now();
    let backend = a.backend.unwrap_or(BackendArg::Analytic);
    let cost_kind = a.cost.unwrap_or(CostArg::None);
    let (points, context) = match &a.keypoints {
        Some(path) => {
            let rec: GraphRecord = read_json(path)?;
            let mut pts = rec.points();
            let ctx = match &a.detection.mask {
                Some(_) => {
                    let (f, m) = load_mask(a.detection.mask.as_deref())?;
                    let sampling = lift_sampling(f.grid.spatial.ndim(), a.detection.orientations)?;
                    let lifted = lift_mask(&m, &f.grid.spatial, &sampling, &LiftParams::default())?;
                    attach_labels(&mut pts, &f.grid.spatial, a.detection.labels.as_deref())?;
                    Some((m, f.grid.spatial.clone(), lifted))
                }
                None => None,
            };
            (pts, ctx)
        }
        None => {
            let det = detect(&a.detection)?;
            (det.points, Some((det.mask, det.spatial, det.lifted)))
        }
    };
    if points.len() < 2 {
        return Err(CliError::Numerical(format!(
            "found {} key points; grouping needs two",
            points.len()
        )));
    }
    let d = points[0].position.len();
    let three = d == 3;
    let s_max = a.s_max.unwrap_or(if three {
        DEFAULT_S_MAX_3D
    } else {
        DEFAULT_S_MAX_2D
    });
    let xi =
        a.xi.unwrap_or(if three { DEFAULT_XI_3D } else { DEFAULT_XI_2D });
    let epsilon = a.epsilon.unwrap_or(0.1);
    let lambda = a.detection.lambda.unwrap_or(100.0);
    let p = a.detection.p.unwrap_or(1.0);
    let (se, r) = if three {
        (Manifold::SE3, Manifold::R3)
    } else {
        (Manifold::SE2, Manifold::R2)
    };
    let table = match backend {
        BackendArg::Analytic => {
            if cost_kind == CostArg::Mask {
                return Err(config_err(
                    "the analytic backend has no cost; use --cost none",
                ));
            }
            let zeta = a.zeta.unwrap_or(if three {
                nilgroup::se3::DEFAULT_ZETA
            } else {
                nilgroup::se2::DEFAULT_ZETA
            });
            analytic_table(&points, se, xi, zeta)?
        }
        BackendArg::Euclid | BackendArg::Riemann | BackendArg::Subriemann => {
            let (mask, spatial, lifted) = context
                .as_ref()
                .ok_or_else(|| config_err("fast-marching backends need --mask"))?;
            if backend == BackendArg::Euclid {
                let grid = LiftedGrid::new(spatial.clone(), OrientationSampling::None)?;
                let cost = match cost_kind {
                    CostArg::None => None,
                    CostArg::Mask => Some(CostField::from_vesselness(
                        grid.clone(),
                        &max_project(lifted),
                        lambda,
                        p,
                    )?),
                };
                fast_marching_table(
                    &points,
                    &grid,
                    &MetricSpec::euclidean(r),
                    cost.as_ref(),
                    Some(s_max),
                )?
            } else {
                let march = match a.march_orientations {
                    Some(n) if Some(n) != a.detection.orientations => {
                        let params = LiftParams {
                            kernel_length: a
                                .detection
                                .kernel_length
                                .unwrap_or(LiftParams::default().kernel_length),
                            kernel_width: a
                                .detection
                                .kernel_width
                                .unwrap_or(LiftParams::default().kernel_width),
                        };
                        lift_mask(mask, spatial, &lift_sampling(d, Some(n))?, &params)?
                    }
                    _ => lifted.clone(),
                };
                let cost = match cost_kind {
                    CostArg::None => None,
                    CostArg::Mask => Some(CostField::from_vesselness(
                        march.grid.clone(),
                        &march.values,
                        lambda,
                        p,
                    )?),
                };
                let metric = if backend == BackendArg::Riemann {
                    MetricSpec::riemannian(se, xi)
                } else {
                    MetricSpec::sub_riemannian(se, xi, epsilon)
                };
                fast_marching_table(&points, &march.grid, &metric, cost.as_ref(), Some(s_max))?
            }
        }
    };
    let grouping = perceptual_group(&table, s_max);
    check_structure(points.len(), &grouping.edges, s_max).map_err(CliError::Numerical)?;
    let out = a
        .detection
        .out
        .clone()
        .unwrap_or_else(|| output_dir().join("graph.json"));
    write_json(&out, &GraphRecord::new(&points, &grouping.edges))?;
    let mut extra = Map::new();
    extra.insert("keypoints".into(), json!(points.len()));
    extra.insert("edges".into(), json!(grouping.edges.len()));
    extra.insert("candidates".into(), json!(grouping.candidates.len()));
    if points.iter().all(|p| !p.labels.is_empty()) {
        let labels: Vec<Vec<usize>> = points.iter().map(|p| p.labels.clone()).collect();
        let acc = evaluate_grouping(&grouping.edges, &labels)?;
        extra.insert(
            "accuracy".into(),
            serde_json::to_value(acc).unwrap_or(Value::Null),
        );
    }
    extra.insert("outputs".into(), json!([out]));
    extra.insert("seconds".into(), json!(t0.elapsed().as_secs_f64()));
    let meta = metadata("group", &a, extra);
    write_meta(&meta_path(&out), &meta)?;
    print_json(&meta);
    Ok(())
}

// ---------------------------------------------------------------- synth

#[derive(Args, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SynthArgs {
    #[arg(long)]
    pub volumes: Option<usize>,
    /// Samples per axis of each cubic volume.
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub step: Option<f64>,
    /// Standard deviation of each turning angle per step, in radians.
    #[arg(long)]
    pub angular_std: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Dataset directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn synth(a: SynthArgs) -> CliResult<()> {
    let t0 = Instant::now();
    let def = SynthConfig::default();
    let cfg = SynthConfig {
        volume_size: a.size.unwrap_or(def.volume_size),
        paths_per_volume: a.paths.unwrap_or(def.paths_per_volume),
        step_length: a.step.unwrap_or(def.step_length),
        angular_std_dev: a.angular_std.unwrap_or(def.angular_std_dev),
        seed: a.seed.unwrap_or(def.seed),
    };
    cfg.validate()?;
    let n = a.volumes.unwrap_or(5);
    if n == 0 {
        return Err(config_err("--volumes must be at least 1"));
    }
    let dir = a
        .out
        .clone()
        .unwrap_or_else(|| output_dir().join("synthetic"));
    let manifest = generate_dataset(&cfg, n, &dir)?;
    let mut extra = Map::new();
    extra.insert(
        "seeds".into(),
        json!(manifest.volumes.iter().map(|v| v.seed).collect::<Vec<_>>()),
    );
    extra.insert("outputs".into(), json!([dir]));
    extra.insert("seconds".into(), json!(t0.elapsed().as_secs_f64()));
    let meta = metadata("synth", &a, extra);
    write_meta(&dir.join("synth.meta.json"), &meta)?;
    print_json(&meta);
    Ok(())
}

// ---------------------------------------------------------------- validate-zeta

#[derive(Args, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ValidateArgs {
    #[arg(long, value_enum)]
    pub group: Option<GroupArg>,
    /// Reference grid samples per spatial axis.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub half_width: Option<f64>,
    /// Angles (SE(2)) or polar rows (SE(3)) of the reference grid.
    #[arg(long)]
    pub orientations: Option<usize>,
    #[arg(long)]
    pub xi: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub zetas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub ranges: Option<Vec<f64>>,
    /// Evaluation samples per axis within each range.
    #[arg(long)]
    pub sweep_samples: Option<usize>,
    /// Refuse reference grids with more nodes than this.
    #[arg(long)]
    pub max_nodes: Option<usize>,
    /// CSV output; metadata goes to a `.meta.json` next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn validate_zeta(a: ValidateArgs) -> CliResult<()> {
    let group = a.group.ok_or_else(|| config_err("--group is required"))?;
    let (mut reference, mut sweep) = match group {
        GroupArg::Se2 => (ReferenceGrid::se2_desk(), SweepSpec::se2_default()),
        GroupArg::Se3 => (ReferenceGrid::se3_desk(), SweepSpec::se3_default()),
    };
    if let Some(v) = a.samples {
        reference.samples_per_axis = v;
    }
    if let Some(v) = a.half_width {
        reference.half_width = v;
    }
    if let Some(v) = a.orientations {
        reference.orientations = v;
    }
    if let Some(v) = a.xi {
        reference.xi = v;
    }
    if let Some(v) = a.epsilon {
        reference.epsilon = v;
    }
    if let Some(v) = a.max_nodes {
        reference.max_nodes = v;
    }
    if let Some(v) = &a.zetas {
        sweep.zetas = v.clone();
    }
    if let Some(v) = &a.ranges {
        sweep.ranges = v.clone();
    }
    if let Some(v) = a.sweep_samples {
        sweep.samples_per_axis = v;
    }
    let (result, sweep_meta) = run_sweep(&reference, &sweep)?;
    let csv = result.to_csv();
    let name = match group {
        GroupArg::Se2 => "zeta_se2.csv",
        GroupArg::Se3 => "zeta_se3.csv",
    };
    let out = a.out.clone().unwrap_or_else(|| output_dir().join(name));
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)
            .map_err(|e| CliError::Io(format!("{}: {e}", parent.display())))?;
    }
    std::fs::write(&out, &csv).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    let best: Vec<f64> = (0..result.ranges.len())
        .map(|r| result.zetas[result.best_zeta(r)])
        .collect();
    let mut extra = Map::new();
    extra.insert("group".into(), json!(Group::from(group).name()));
    extra.insert(
        "sweep".into(),
        serde_json::to_value(&sweep_meta).unwrap_or(Value::Null),
    );
    extra.insert("bestZetaPerRange".into(), json!(best));
    extra.insert("outputs".into(), json!([out]));
    write_meta(&meta_path(&out), &metadata("validate-zeta", &a, extra))?;
    use std::io::Write;
    let _ = write!(std::io::stdout(), "{csv}");
    Ok(())
}

impl From<GroupArg> for Group {
    fn from(g: GroupArg) -> Group {
        match g {
            GroupArg::Se2 => Group::SE2,
            GroupArg::Se3 => Group::SE3,
        }
    }
}

// ---------------------------------------------------------------- project

#[derive(Args, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ProjectArgs {
    /// Field to project.
    #[arg(long)]
    pub field: Option<PathBuf>,
    /// Output image; `.csv` writes a table, anything else a binary PGM.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Minimum over orientations and, on volumes, over z.
fn min_project(f: &FieldFile) -> (usize, usize, Vec<f64>) {
    let sp = &f.grid.spatial;
    let [nx, ny, _] = sp.dims3();
    let ns = sp.len();
    let mut img = vec![f64::INFINITY; nx * ny];
    for (node, &v) in f.data.iter().enumerate() {
        let s = node % ns;
        let pixel = s % (nx * ny);
        let v = if v.is_finite() {
            v as f64
        } else {
            f64::INFINITY
        };
        if v < img[pixel] {
            img[pixel] = v;
        }
    }
    (nx, ny, img)
}

pub fn project(a: ProjectArgs) -> CliResult<()> {
    let path = a
        .field
        .as_deref()
        .ok_or_else(|| config_err("--field is required"))?;
    let f = FieldFile::read(path)?;
    let (w, h, img) = min_project(&f);
    let out = a
        .out
        .clone()
        .unwrap_or_else(|| output_dir().join("projection.pgm"));
    if out
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
    {
        write_csv_grid(&out, w, h, &img)?;
    } else {
        write_pgm(&out, w, h, &img)?;
    }
    let finite: Vec<f64> = img.iter().copied().filter(|v| v.is_finite()).collect();
    let mut extra = Map::new();
    extra.insert("width".into(), json!(w));
    extra.insert("height".into(), json!(h));
    extra.insert(
        "min".into(),
        json!(finite.iter().copied().fold(f64::INFINITY, f64::min)),
    );
    extra.insert(
        "max".into(),
        json!(finite.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
    );
    extra.insert("outputs".into(), json!([out]));
    let meta = metadata("project", &a, extra);
    write_meta(&meta_path(&out), &meta)?;
    print_json(&meta);
    Ok(())
}
