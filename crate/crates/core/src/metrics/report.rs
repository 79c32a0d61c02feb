use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{albedo_masks, intensity_chroma_error, lmse, lmse_window, rmse, si_rmse, ssim};
use super::{SSIM_K1, SSIM_K2, SSIM_SIGMA, SSIM_WINDOW};
use crate::error::{Error, Result};
use crate::formation::IntrinsicComponents;
use crate::image::LinearImage;
use crate::synth::{Dataset, Split};

pub const CSV_HEADER: &str = "scene_id,lmse,rmse,si_rmse,ssim,intensity,chromaticity";

#[derive(Debug, Clone, PartialEq)]
pub struct MetricConfig {
    /// LMSE window; `None` picks [`lmse_window`] per image.
    pub lmse_window: Option<usize>,
    /// Smallest albedo region used for intensity/chromaticity.
    pub mask_min_pixels: usize,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            lmse_window: None,
            mask_min_pixels: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub scene_id: String,
    pub lmse: f64,
    pub rmse: f64,
    pub si_rmse: f64,
    pub ssim: f64,
    pub intensity: f64,
    pub chromaticity: f64,
}

impl MetricRow {
    fn values(&self) -> [f64; 6] {
        [
            self.lmse,
            self.rmse,
            self.si_rmse,
            self.ssim,
            self.intensity,
            self.chromaticity,
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub config: MetricConfig,
    pub rows: Vec<MetricRow>,
}

/// Albedo metrics of one prediction against ground truth.
pub fn evaluate_scene(id: &str, pred: &LinearImage, gt: &LinearImage, config: &MetricConfig) -> Result<MetricRow> {
    let window = config
        .lmse_window
        .unwrap_or_else(|| lmse_window(gt.width(), gt.height()));
    let masks = albedo_masks(gt, config.mask_min_pixels)?;
    let (intensity, chromaticity) = intensity_chroma_error(pred, gt, &masks)?;
    Ok(MetricRow {
        scene_id: id.to_string(),
        lmse: lmse(pred, gt, window)?,
        rmse: rmse(pred, gt)?,
        si_rmse: si_rmse(pred, gt)?,
        ssim: ssim(pred, gt)?,
        intensity,
        chromaticity,
    })
}

/// Scores predicted albedos stored as `<components_dir>/<scene_id>/` (as
/// written by [`IntrinsicComponents::save`]) against the dataset's ground
/// truth, for one split or all scenes, in scene-id order.
pub fn evaluate_dataset(
    manifest: &Path,
    components_dir: &Path,
    split: Option<Split>,
    config: &MetricConfig,
) -> Result<MetricReport> {
    let dataset = Dataset::load(manifest)?;
    let mut rows = Vec::new();
    for entry in dataset.entries().iter().filter(|e| split.is_none_or(|s| e.split == s)) {
        let dir = components_dir.join(&entry.id);
        if !dir.is_dir() {
            return Err(Error::format(&dir, format!("no prediction for scene `{}`", entry.id)));
        }
        let pred = IntrinsicComponents::load(&dir)?;
        let gt = dataset.load_scene(entry)?;
        rows.push(evaluate_scene(&entry.id, &pred.albedo, &gt.components.albedo, config)?);
    }
    rows.sort_by(|a, b| a.scene_id.cmp(&b.scene_id));
    Ok(MetricReport {
        config: config.clone(),
        rows,
    })
}

impl MetricReport {
    /// Arithmetic means of the columns, in CSV order.
    pub fn means(&self) -> [f64; 6] {
        let mut m = [0.0; 6];
        for r in &self.rows {
            for (a, v) in m.iter_mut().zip(r.values()) {
                *a += v;
            }
        }
        let n = self.rows.len().max(1) as f64;
        m.map(|v| v / n)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.scene_id);
            for v in r.values() {
                write!(out, ",{v:.6}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        writeln!(s, "# Albedo metrics on procedural scenes.").unwrap();
        writeln!(
            s,
            "# These numbers are internal to this toolkit and are not comparable with published benchmark values."
        )
        .unwrap();
        writeln!(s, "scenes = {}", self.rows.len()).unwrap();
        let window = self
            .config
            .lmse_window
            .map_or("auto (min side / 8, at least 2)".to_string(), |w| w.to_string());
        writeln!(s, "lmse.window = {window}").unwrap();
        writeln!(s, "lmse.stride = window / 2").unwrap();
        writeln!(s, "ssim.window = {SSIM_WINDOW}").unwrap();
        writeln!(s, "ssim.sigma = {SSIM_SIGMA}").unwrap();
        writeln!(s, "ssim.k1 = {SSIM_K1}").unwrap();
        writeln!(s, "ssim.k2 = {SSIM_K2}").unwrap();
        writeln!(s, "masks.min_pixels = {}", self.config.mask_min_pixels).unwrap();
        let names = [
            "lmse",
            "rmse (not scale-invariant)",
            "si_rmse",
            "ssim",
            "intensity_x100",
            "chromaticity_deg",
        ];
        for (name, v) in names.iter().zip(self.means()) {
            writeln!(s, "mean {name} = {v:.6}").unwrap();
        }
        s
    }

    /// Writes `metrics.csv` and `summary.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv = dir.join("metrics.csv");
        fs::write(&csv, self.to_csv()).map_err(|e| Error::io(&csv, e))?;
        let summary = dir.join("summary.txt");
        fs::write(&summary, self.summary()).map_err(|e| Error::io(&summary, e))
    }
}
