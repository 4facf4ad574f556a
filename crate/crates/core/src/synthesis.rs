//! Synthetic volumes of random-walk centerlines with ground-truth labels.
//!
//! A path starts at a uniformly random interior point with a uniformly
//! random heading and walks in both directions until it leaves the volume.
//! Each step advances along the current heading, then turns the frame by
//! Gaussian angles about its two axes orthogonal to the heading.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{LiftedGrid, OrientationSampling, SpatialGrid};
use crate::io::{write_json, FieldFile};
use crate::se3::{orientation_frame, rot_exp, rot_y, Se3};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SynthConfig {
    pub volume_size: usize,
    pub paths_per_volume: usize,
    pub step_length: f64,
    /// Standard deviation of each of the two turning angles per step.
    pub angular_std_dev: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            volume_size: 51,
            paths_per_volume: 6,
            step_length: 1.0,
            angular_std_dev: 0.15,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.volume_size < 16 {
            return Err(Error::param("volume_size", "must be at least 16"));
        }
        if self.paths_per_volume == 0 {
            return Err(Error::param("paths_per_volume", "must be at least 1"));
        }
        if !(self.step_length.is_finite() && self.step_length > 0.0) {
            return Err(Error::param("step_length", "must be positive"));
        }
        if !(self.angular_std_dev.is_finite() && self.angular_std_dev >= 0.0) {
            return Err(Error::param("angular_std_dev", "must be nonnegative"));
        }
        Ok(())
    }

    fn inside(&self, p: &Vector3<f64>) -> bool {
        let hi = (self.volume_size - 1) as f64;
        p.iter().all(|&c| (0.0..=hi).contains(&c))
    }

    /// Upper bound on the steps taken in one direction.
    fn max_steps(&self) -> usize {
        (4.0 * self.volume_size as f64 / self.step_length).ceil() as usize
    }
}

fn path_rng(seed: u64, path_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_index as u64);
    rng
}

fn walk(config: &SynthConfig, start: &Se3, rng: &mut ChaCha8Rng) -> Vec<Se3> {
    let sigma = config.angular_std_dev;
    let mut out = Vec::new();
    let mut g = *start;
    for _ in 0..config.max_steps() {
        let heading = g.rotation * Vector3::z();
        let next = g.translation + heading * config.step_length;
        if !config.inside(&next) {
            break;
        }
        let a: f64 = sigma * Distribution::<f64>::sample(&StandardNormal, rng);
        let b: f64 = sigma * Distribution::<f64>::sample(&StandardNormal, rng);
        g = Se3 {
            translation: next,
            rotation: g.rotation * rot_exp(&Vector3::new(a, b, 0.0)),
        };
        out.push(g);
    }
    out
}

/// One random-walk path of the volume described by `config`, ordered from
/// one end to the other with headings along the direction of travel.
pub fn random_walk_se3(config: &SynthConfig, path_index: usize) -> Result<Vec<Se3>> {
    config.validate()?;
    let mut rng = path_rng(config.seed, path_index);
    let n = config.volume_size as f64;
    let (lo, hi) = (0.0, n - 1.0);
    let start = Vector3::new(
        rng.random_range(lo..=hi),
        rng.random_range(lo..=hi),
        rng.random_range(lo..=hi),
    );
    let heading = loop {
        let v = Vector3::new(
            StandardNormal.sample(&mut rng),
            StandardNormal.sample(&mut rng),
            StandardNormal.sample(&mut rng),
        );
        let norm: f64 = v.norm();
        if norm > 1e-6 {
            break v / norm;
        }
    };
    let g0 = Se3 {
        translation: start,
        rotation: orientation_frame(&heading),
    };
    let flip: Matrix3<f64> = rot_y(std::f64::consts::PI);
    let back_start = Se3 {
        translation: start,
        rotation: g0.rotation * flip,
    };
    let forward = walk(config, &g0, &mut rng);
    let backward = walk(config, &back_start, &mut rng);
    let mut path: Vec<Se3> = backward
        .into_iter()
        .rev()
        .map(|g| Se3 {
            translation: g.translation,
            rotation: g.rotation * flip,
        })
        .collect();
    path.push(g0);
    path.extend(forward);
    Ok(path)
}

/// Binary centerline mask with per-voxel labels. Voxels visited by several
/// paths keep their smallest label in `labels` and all labels in `overflow`.
#[derive(Clone, Debug, PartialEq)]
pub struct Raster {
    pub grid: SpatialGrid,
    pub mask: Vec<bool>,
    /// Path index per voxel, −1 for background.
    pub labels: Vec<i32>,
    pub overflow: BTreeMap<usize, BTreeSet<usize>>,
}

impl Raster {
    /// Every label carried by a voxel, in increasing order.
    pub fn labels_at(&self, voxel: usize) -> Vec<usize> {
        if let Some(set) = self.overflow.get(&voxel) {
            return set.iter().copied().collect();
        }
        match self.labels[voxel] {
            l if l >= 0 => vec![l as usize],
            _ => Vec::new(),
        }
    }
}

/// Voxelizes polylines by nearest-voxel sampling at most half a voxel apart.
pub fn rasterize_centerlines(paths: &[Vec<Se3>], volume_size: usize) -> Result<Raster> {
    let grid = SpatialGrid::unit(vec![volume_size; 3])?;
    let mut mask = vec![false; grid.len()];
    let mut labels = vec![-1i32; grid.len()];
    let mut overflow: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for (label, path) in paths.iter().enumerate() {
        let mut mark = |p: Vector3<f64>| {
            if let Some(v) = grid.nearest(&[p.x, p.y, p.z]) {
                mask[v] = true;
                let cur = labels[v];
                if cur < 0 {
                    labels[v] = label as i32;
                } else if cur as usize != label {
                    let set = overflow.entry(v).or_default();
                    set.insert(cur as usize);
                    set.insert(label);
                }
            }
        };
        if let Some(first) = path.first() {
            mark(first.translation);
        }
        for w in path.windows(2) {
            let (a, b) = (w[0].translation, w[1].translation);
            let m = ((b - a).norm() / 0.5).ceil().max(1.0) as usize;
            for k in 1..=m {
                mark(a + (b - a) * (k as f64 / m as f64));
            }
        }
    }
    Ok(Raster {
        grid,
        mask,
        labels,
        overflow,
    })
}

/// Paths and raster of one synthetic volume.
#[derive(Clone, Debug)]
pub struct SyntheticVolume {
    pub config: SynthConfig,
    pub paths: Vec<Vec<Se3>>,
    pub raster: Raster,
}

pub fn generate_volume(config: &SynthConfig) -> Result<SyntheticVolume> {
    config.validate()?;
    let paths = (0..config.paths_per_volume)
        .map(|k| random_walk_se3(config, k))
        .collect::<Result<Vec<_>>>()?;
    let raster = rasterize_centerlines(&paths, config.volume_size)?;
    Ok(SyntheticVolume {
        config: *config,
        paths,
        raster,
    })
}

/// Seeds of `n` volumes derived from a master seed.
pub fn volume_seeds(master: u64, n: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    (0..n).map(|_| rng.next_u64()).collect()
}

/// Generates `n_volumes` volumes in parallel; `config.seed` is the master seed.
pub fn generate_volumes(config: &SynthConfig, n_volumes: usize) -> Result<Vec<SyntheticVolume>> {
    config.validate()?;
    volume_seeds(config.seed, n_volumes)
        .into_par_iter()
        .map(|seed| generate_volume(&SynthConfig { seed, ..*config }))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ManifestEntry {
    pub mask: String,
    pub labels: String,
    pub paths: String,
    pub seed: u64,
    pub params: SynthConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Manifest {
    pub master_seed: u64,
    pub volumes: Vec<ManifestEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct PathsFile {
    /// Positions per path.
    paths: Vec<Vec<[f64; 3]>>,
    /// Voxel index and labels of every voxel shared by several paths.
    overflow: Vec<(usize, Vec<usize>)>,
}

/// Generates and writes a dataset: per volume a mask field, a label field
/// (−1 background), and a JSON file with the paths and shared voxels, plus
/// `manifest.json`.
pub fn generate_dataset(config: &SynthConfig, n_volumes: usize, dir: &Path) -> Result<Manifest> {
    let volumes = generate_volumes(config, n_volumes)?;
    let mut entries = Vec::new();
    for (k, vol) in volumes.iter().enumerate() {
        let grid = LiftedGrid::new(vol.raster.grid.clone(), OrientationSampling::None)?;
        let mask_name = format!("volume_{k:03}_mask.f32");
        let label_name = format!("volume_{k:03}_labels.f32");
        let paths_name = format!("volume_{k:03}_paths.json");
        let mask = vol
            .raster
            .mask
            .iter()
            .map(|&b| if b { 1.0 } else { 0.0 })
            .collect();
        FieldFile::new(grid.clone(), mask)?.write(&dir.join(&mask_name))?;
        let labels = vol.raster.labels.iter().map(|&l| l as f32).collect();
        FieldFile::new(grid, labels)?.write(&dir.join(&label_name))?;
        let pf = PathsFile {
            paths: vol
                .paths
                .iter()
                .map(|p| {
                    p.iter()
                        .map(|g| [g.translation.x, g.translation.y, g.translation.z])
                        .collect()
                })
                .collect(),
            overflow: vol
                .raster
                .overflow
                .iter()
                .map(|(v, s)| (*v, s.iter().copied().collect()))
                .collect(),
        };
        write_json(&dir.join(&paths_name), &pf)?;
        entries.push(ManifestEntry {
            mask: mask_name,
            labels: label_name,
            paths: paths_name,
            seed: vol.config.seed,
            params: vol.config,
        });
    }
    let manifest = Manifest {
        master_seed: config.seed,
        volumes: entries,
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

/// Loads the raster of a dataset entry written by [`generate_dataset`].
pub fn load_raster(dir: &Path, entry: &ManifestEntry) -> Result<Raster> {
    let mask = FieldFile::read(&dir.join(&entry.mask))?;
    let labels = FieldFile::read(&dir.join(&entry.labels))?;
    if mask.grid != labels.grid {
        return Err(Error::Format(
            "mask and labels live on different grids".into(),
        ));
    }
    let pf: PathsFile = crate::io::read_json(&dir.join(&entry.paths))?;
    Ok(Raster {
        grid: mask.grid.spatial.clone(),
        mask: crate::lifting::binary_mask(&mask.data)?,
        labels: labels.data.iter().map(|&v| v as i32).collect(),
        overflow: pf
            .overflow
            .into_iter()
            .map(|(v, s)| (v, s.into_iter().collect()))
            .collect(),
    })
}

/// Path of the manifest inside a dataset directory.
pub fn manifest_path(dir: &Path) -> PathBuf {
    dir.join("manifest.json")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn straight_without_noise() {
        let cfg = SynthConfig {
            angular_std_dev: 0.0,
            seed: 3,
            ..Default::default()
        };
        let p = random_walk_se3(&cfg, 0).unwrap();
        let dir = p[1].translation - p[0].translation;
        for w in p.windows(2) {
            let d = w[1].translation - w[0].translation;
            assert!((d.norm() - 1.0).abs() < 1e-12);
            assert!((d - dir).norm() < 1e-9);
        }
        assert!(p.len() > 25);
    }

    #[test]
    fn axis_path_rasterizes_to_thin_line() {
        let path: Vec<Se3> = (2..20)
            .map(|k| Se3::from_translation(Vector3::new(5.0, 7.0, k as f64)))
            .collect();
        let r = rasterize_centerlines(&[path], 24).unwrap();
        assert_eq!(r.mask.iter().filter(|&&b| b).count(), 18);
        for k in 2..20 {
            let v = r.grid.index([5, 7, k]);
            assert!(r.mask[v]);
            assert_eq!(r.labels[v], 0);
        }
    }

    #[test]
    fn crossing_voxel_keeps_both_labels() {
        let a: Vec<Se3> = (0..10)
            .map(|k| Se3::from_translation(Vector3::new(k as f64, 5.0, 5.0)))
            .collect();
        let b: Vec<Se3> = (0..10)
            .map(|k| Se3::from_translation(Vector3::new(5.0, k as f64, 5.0)))
            .collect();
        let r = rasterize_centerlines(&[a, b], 16).unwrap();
        let v = r.grid.index([5, 5, 5]);
        assert_eq!(r.labels_at(v), vec![0, 1]);
        assert_eq!(r.labels_at(r.grid.index([1, 5, 5])), vec![0]);
        assert_eq!(r.labels_at(r.grid.index([5, 1, 5])), vec![1]);
        assert!(r.labels_at(r.grid.index([0, 0, 0])).is_empty());
    }

    #[test]
    fn rejects_small_volumes() {
        let cfg = SynthConfig {
            volume_size: 8,
            ..Default::default()
        };
        assert!(generate_volume(&cfg).is_err());
    }
}
