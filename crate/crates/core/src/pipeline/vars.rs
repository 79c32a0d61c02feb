use super::align::ls_scale_align_luminance;
use super::infer::{infer_albedo, infer_chroma, infer_gray};
use super::stage::{InputVar, StageSpec, TargetVar};
use crate::error::Result;
use crate::formation::{
    albedo_from_chroma, divide, grayscale_oracle, inverse_shading, shading_to_chroma, ChromaMap, IntrinsicComponents,
};
use crate::image::{downsample2, ColorSpace, LinearImage};
use crate::nn::{Network, Tensor};
use crate::EPS;

/// Upstream networks that replace ground-truth inputs when present.
#[derive(Debug, Clone, Default)]
pub struct Upstream {
    pub gray: Option<Network>,
    pub chroma: Option<Network>,
    pub albedo: Option<Network>,
}

/// Downsamples by `2^level`.
pub fn downsample_level(img: &LinearImage, level: usize) -> Result<LinearImage> {
    let mut out = img.clone();
    for _ in 0..level {
        out = downsample2(&out)?;
    }
    Ok(out)
}

/// Every per-pixel variable a network of the pipeline can consume, for one
/// scene, together with the ground truth it was derived from.
#[derive(Debug, Clone)]
pub struct SceneVars {
    pub image: LinearImage,
    /// Ground-truth diffuse albedo.
    pub gt_albedo: LinearImage,
    /// Ground-truth diffuse shading.
    pub gt_shading: LinearImage,
    /// Ground-truth chroma of `I / A_d` at full resolution.
    pub gt_chroma: ChromaMap,
    pub gray_shading: LinearImage,
    pub gray_albedo: LinearImage,
    /// Chroma at 1/4 resolution.
    pub chroma_low: ChromaMap,
    pub approx_albedo: LinearImage,
    pub approx_shading: LinearImage,
    /// Albedo fed to the diffuse stage.
    pub albedo: LinearImage,
    /// `S_c = I / A_d` with that albedo.
    pub rgb_shading: LinearImage,
}

/// Level of the low-resolution chroma.
pub const CHROMA_LEVEL: usize = 2;

impl SceneVars {
    /// Builds the variables from ground truth, replacing each stage output
    /// by its network's prediction where `upstream` provides one.
    pub fn build(gt: &IntrinsicComponents, upstream: &Upstream) -> Result<Self> {
        let image = &gt.image;
        let (gray_albedo, gray_shading) = match &upstream.gray {
            Some(net) => infer_gray(net, image)?,
            None => grayscale_oracle(image, &gt.albedo, EPS)?,
        };
        let (_, gt_chroma) = shading_to_chroma(&divide(image, &gt.albedo, EPS)?, EPS)?;
        let chroma_low = match &upstream.chroma {
            Some(net) => infer_chroma(net, image, &gray_shading, &gray_albedo)?,
            None => ChromaMap::new(downsample_level(gt_chroma.image(), CHROMA_LEVEL)?)?,
        };
        let (approx_albedo, approx_shading) = albedo_from_chroma(image, &gray_shading, &chroma_low, EPS)?;
        let albedo = match &upstream.albedo {
            Some(net) => infer_albedo(net, image, &approx_albedo, &approx_shading)?,
            None => gt.albedo.clone(),
        };
        let rgb_shading = divide(image, &albedo, EPS)?.with_color_space(ColorSpace::Linear)?;
        Ok(Self {
            image: image.clone(),
            gt_albedo: gt.albedo.clone(),
            gt_shading: gt.shading.clone(),
            gt_chroma,
            gray_shading,
            gray_albedo,
            chroma_low,
            approx_albedo,
            approx_shading,
            albedo,
            rgb_shading,
        })
    }

    pub fn input(&self, v: InputVar) -> &LinearImage {
        match v {
            InputVar::Image => &self.image,
            InputVar::GrayShading => &self.gray_shading,
            InputVar::GrayAlbedo => &self.gray_albedo,
            InputVar::ApproxAlbedo => &self.approx_albedo,
            InputVar::ApproxShading => &self.approx_shading,
            InputVar::Albedo => &self.albedo,
            InputVar::RgbShading => &self.rgb_shading,
        }
    }

    /// Network input for `spec`, shape `[1, C, H, W]`.
    pub fn stage_input(&self, spec: &StageSpec) -> Result<Tensor> {
        let images: Vec<&LinearImage> = spec.inputs.iter().map(|&v| self.input(v)).collect();
        Tensor::from_images(&images)
    }

    /// Shading scale fitted to the stage's reference input (1 when the
    /// stage has none).
    pub fn target_scale(&self, spec: &StageSpec) -> Result<f64> {
        match spec.align_reference() {
            Some(r) => ls_scale_align_luminance(&self.gt_shading, self.input(r)),
            None => Ok(1.0),
        }
    }

    /// Training target for `spec` at the network's output resolution.
    pub fn stage_target(&self, spec: &StageSpec) -> Result<LinearImage> {
        let full = match spec.target {
            TargetVar::InverseGrayShading => {
                let (_, s_g) = grayscale_oracle(&self.image, &self.gt_albedo, EPS)?;
                inverse_shading(&s_g)?
            }
            TargetVar::Chroma => self.gt_chroma.image().clone(),
            TargetVar::Albedo => self.gt_albedo.clone(),
            TargetVar::InverseShading => {
                let alpha = self.target_scale(spec)? as f32;
                inverse_shading(&self.gt_shading.map(ColorSpace::Linear, |s| alpha * s)?)?
            }
        };
        downsample_level(&full, spec.out_level)
    }
}
