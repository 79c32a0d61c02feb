//! On-disk datasets of generated scenes.
//!
//! Layout under the dataset root:
//!
//! ```text
//! manifest.txt
//! <scene_id>/image.iidf      I
//! <scene_id>/albedo.iidf     A_d
//! <scene_id>/shading.iidf    S_d
//! <scene_id>/residual.iidf   R
//! <scene_id>/masks.iidf      channel 0 specular, channel 1 clipped
//! ```
//!
//! The manifest is a key-value document: the generator parameters, then one
//! `scene = <id> <seed> <split> <relative path>` line per scene.

use std::fs;
use std::path::{Path, PathBuf};

use super::{gen_scene, SceneParams};
use crate::error::{Error, Result};
use crate::formation::IntrinsicComponents;
use crate::image::{read_iidf, write_iidf, ColorSpace, LinearImage};
use crate::kv::KvDoc;

pub const DATASET_MANIFEST: &str = "manifest.txt";
const MASKS_FILE: &str = "masks.iidf";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split `{other}`"))),
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of the `index`-th scene of a dataset.
pub fn scene_seed(base: u64, index: usize) -> u64 {
    splitmix64(base ^ splitmix64(index as u64))
}

/// 80/10/10 train/val/test split from a hash of the scene seed.
pub fn split_for_seed(seed: u64) -> Split {
    match splitmix64(seed ^ 0x5EED_5EED) % 10 {
        0..=7 => Split::Train,
        8 => Split::Val,
        _ => Split::Test,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneEntry {
    pub id: String,
    pub seed: u64,
    pub split: Split,
    pub path: PathBuf,
}

/// A scene read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneRecord {
    pub id: String,
    pub seed: u64,
    pub components: IntrinsicComponents,
    pub specular_mask: LinearImage,
    pub clipped_mask: LinearImage,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    root: PathBuf,
    params: SceneParams,
    entries: Vec<SceneEntry>,
}

impl Dataset {
    pub fn load(manifest: &Path) -> Result<Self> {
        let doc = KvDoc::load(manifest)?;
        let params = SceneParams::from_kv(&doc)?;
        let root = manifest.parent().unwrap_or(Path::new(".")).to_path_buf();
        let mut entries = Vec::new();
        for line in doc.get_all("scene") {
            let parts: Vec<_> = line.split_whitespace().collect();
            let [id, seed, split, path] = parts.as_slice() else {
                return Err(Error::format(manifest, format!("bad scene line `{line}`")));
            };
            let seed = seed
                .parse()
                .map_err(|_| Error::format(manifest, format!("bad seed `{seed}`")))?;
            entries.push(SceneEntry {
                id: id.to_string(),
                seed,
                split: Split::parse(split).map_err(|e| Error::format(manifest, e.to_string()))?,
                path: PathBuf::from(path),
            });
        }
        if entries.is_empty() {
            return Err(Error::format(manifest, "dataset lists no scenes"));
        }
        entries.sort_by(|a, b| a.id.cmp(&b.id));
        Ok(Self { root, params, entries })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn params(&self) -> &SceneParams {
        &self.params
    }

    pub fn entries(&self) -> &[SceneEntry] {
        &self.entries
    }

    /// Entries of one split, in scene-id order.
    pub fn split(&self, split: Split) -> impl Iterator<Item = &SceneEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    pub fn scene_dir(&self, entry: &SceneEntry) -> PathBuf {
        self.root.join(&entry.path)
    }

    pub fn load_scene(&self, entry: &SceneEntry) -> Result<SceneRecord> {
        let dir = self.scene_dir(entry);
        let components = IntrinsicComponents::load(&dir)?;
        let masks = read_iidf(&dir.join(MASKS_FILE))?;
        masks.ensure_channels(2, "scene masks")?;
        components.image.ensure_dims(&masks, "scene masks")?;
        let (w, h) = (masks.width(), masks.height());
        let plane = |c| LinearImage::from_vec(w, h, 1, ColorSpace::Data, masks.plane(c).to_vec());
        Ok(SceneRecord {
            id: entry.id.clone(),
            seed: entry.seed,
            components,
            specular_mask: plane(0)?,
            clipped_mask: plane(1)?,
        })
    }
}

/// Generates `count` scenes under `out_dir` and writes the manifest.
pub fn gen_dataset(params: &SceneParams, count: usize, out_dir: &Path) -> Result<Dataset> {
    params.validate()?;
    if count == 0 {
        return Err(Error::Config("dataset needs at least one scene".into()));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut doc = KvDoc::new();
    doc.set("format", "intrinsic-dataset-1").set("count", count);
    params.to_kv(&mut doc);
    for index in 0..count {
        let seed = scene_seed(params.seed, index);
        let scene = gen_scene(params, seed)?;
        let id = format!("scene_{index:05}");
        let dir = out_dir.join(&id);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let c = &scene.components;
        write_iidf(&c.image, &dir.join("image.iidf"))?;
        write_iidf(&c.albedo, &dir.join("albedo.iidf"))?;
        write_iidf(&c.shading, &dir.join("shading.iidf"))?;
        write_iidf(&c.residual, &dir.join("residual.iidf"))?;
        let (masks, _) = LinearImage::stack(&[&scene.specular_mask, &scene.clipped_mask])?;
        let masks = LinearImage::from_vec(c.width(), c.height(), 2, ColorSpace::Data, masks)?;
        write_iidf(&masks, &dir.join(MASKS_FILE))?;
        doc.push("scene", format!("{id} {seed} {} {id}", split_for_seed(seed).name()));
    }
    let manifest = out_dir.join(DATASET_MANIFEST);
    doc.save(
        &manifest,
        "procedural intrinsic dataset\nscene = <id> <seed> <split> <path>",
    )?;
    Dataset::load(&manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::gen_scene;

    #[test]
    fn split_proportions() {
        let mut counts = [0usize; 3];
        for i in 0..10_000 {
            counts[split_for_seed(scene_seed(3, i)) as usize] += 1;
        }
        assert!((7600..8400).contains(&counts[0]), "{counts:?}");
        assert!((800..1200).contains(&counts[1]));
        assert!((800..1200).contains(&counts[2]));
    }

    #[test]
    fn write_and_reload() {
        let dir = tempfile::tempdir().unwrap();
        let params = SceneParams {
            resolution: 32,
            seed: 9,
            ..SceneParams::default()
        };
        let ds = gen_dataset(&params, 6, dir.path()).unwrap();
        assert_eq!(ds.entries().len(), 6);
        assert_eq!(ds.params(), &params);
        for name in ["image", "albedo", "shading", "residual", "masks"] {
            assert!(dir.path().join("scene_00003").join(format!("{name}.iidf")).exists());
        }
        let e = &ds.entries()[2];
        let rec = ds.load_scene(e).unwrap();
        let fresh = gen_scene(&params, e.seed).unwrap();
        assert_eq!(rec.components, fresh.components);
        assert_eq!(rec.specular_mask, fresh.specular_mask);
        assert_eq!(rec.clipped_mask, fresh.clipped_mask);
        assert_eq!(e.split, split_for_seed(e.seed));
    }
}
