use std::path::Path;

use super::config::{net_spec, variant_net_spec};
use super::stage::{StageId, StageSpec};
use crate::error::{Error, Result};
use crate::formation::{
    albedo_from_chroma, compute_residual, divide, shading_from_inverse, ChromaMap, IntrinsicComponents,
};
use crate::image::{ColorSpace, LinearImage};
use crate::kv::KvDoc;
use crate::nn::{Checkpoint, Network, Tensor};
use crate::EPS;

/// Runs `net` on the channel concatenation of `inputs`.
pub fn run_network(net: &Network, inputs: &[&LinearImage]) -> Result<Tensor> {
    let x = Tensor::from_images(inputs)?;
    net.predict(&x)
}

fn output(t: &Tensor, color_space: ColorSpace) -> Result<LinearImage> {
    t.to_image(0, 0, t.channels(), color_space)
}

/// Grayscale decomposition `(A_g, S_g)` from the stage-0 network.
pub fn infer_gray(net: &Network, image: &LinearImage) -> Result<(LinearImage, LinearImage)> {
    let d = output(&run_network(net, &[image])?, ColorSpace::Data)?;
    let gray_shading = shading_from_inverse(&d)?;
    let gray_albedo = divide(image, &gray_shading, EPS)?.with_color_space(ColorSpace::Linear)?;
    Ok((gray_albedo, gray_shading))
}

/// Low-resolution shading chroma from the image and its grayscale
/// decomposition.
pub fn infer_chroma(
    net: &Network,
    image: &LinearImage,
    gray_shading: &LinearImage,
    gray_albedo: &LinearImage,
) -> Result<ChromaMap> {
    let c = run_network(net, &[image, gray_shading, gray_albedo])?;
    ChromaMap::new(output(&c, ColorSpace::Data)?)
}

/// Diffuse albedo from the image and the chroma-based decomposition.
pub fn infer_albedo(
    net: &Network,
    image: &LinearImage,
    approx_albedo: &LinearImage,
    approx_shading: &LinearImage,
) -> Result<LinearImage> {
    output(
        &run_network(net, &[image, approx_albedo, approx_shading])?,
        ColorSpace::Linear,
    )
}

/// Diffuse shading and residual. The network predicts `D`; the residual is
/// whatever `A_d * S_d` leaves of the image.
pub fn infer_diffuse(
    net: &Network,
    image: &LinearImage,
    albedo: &LinearImage,
    rgb_shading: &LinearImage,
) -> Result<(LinearImage, LinearImage)> {
    let d = output(&run_network(net, &[image, albedo, rgb_shading])?, ColorSpace::Data)?;
    let shading = shading_from_inverse(&d)?;
    let residual = compute_residual(image, albedo, &shading)?;
    Ok((shading, residual))
}

/// Albedo straight from the image.
pub fn infer_baseline(net: &Network, image: &LinearImage) -> Result<LinearImage> {
    output(&run_network(net, &[image])?, ColorSpace::Linear)
}

/// Where the grayscale decomposition at the start of the chain comes from.
#[derive(Debug, Clone, Copy)]
pub enum GrayInput<'a> {
    /// A known `(A_g, S_g)` pair, e.g. the oracle one.
    Given {
        gray_albedo: &'a LinearImage,
        gray_shading: &'a LinearImage,
    },
    /// The stage-0 network.
    Network,
}

/// Loads a network for `spec` from `<run_dir>/checkpoints/<name>.iidc`,
/// with its architecture from the run config.
pub fn load_network(run_dir: &Path, doc: &KvDoc, spec: &StageSpec) -> Result<Network> {
    let path = run_dir.join("checkpoints").join(format!("{}.iidc", spec.name));
    load_network_from(&path, doc, spec)
}

pub fn load_network_from(path: &Path, doc: &KvDoc, spec: &StageSpec) -> Result<Network> {
    let mut net = Network::new(variant_net_spec(doc, spec)?, 0)?;
    Checkpoint::load(path)?.apply(&mut net)?;
    Ok(net)
}

/// The trained networks of a run.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub gray: Option<Network>,
    pub chroma: Network,
    pub albedo: Network,
    pub diffuse: Network,
}

impl Pipeline {
    /// Loads chroma, albedo and diffuse checkpoints (and gray0 if present)
    /// from a run directory.
    pub fn load(run_dir: &Path) -> Result<Self> {
        let doc = KvDoc::load(&run_dir.join("config"))?;
        let load = |s: StageId| load_network(run_dir, &doc, &StageSpec::for_stage(s));
        let gray_spec = StageSpec::for_stage(StageId::Gray0);
        let gray_path = run_dir.join("checkpoints").join("gray0.iidc");
        let gray = if gray_path.exists() {
            net_spec(&doc, &gray_spec)?;
            Some(load_network_from(&gray_path, &doc, &gray_spec)?)
        } else {
            None
        };
        Ok(Self {
            gray,
            chroma: load(StageId::Chroma)?,
            albedo: load(StageId::Albedo)?,
            diffuse: load(StageId::Diffuse)?,
        })
    }

    pub fn param_count(&self) -> usize {
        self.gray.as_ref().map_or(0, |n| n.param_count())
            + self.chroma.param_count()
            + self.albedo.param_count()
            + self.diffuse.param_count()
    }

    /// Runs the whole chain: grayscale decomposition, chroma, `(Â_c, Ŝ_c)`,
    /// albedo, `S_c = I / A_d`, diffuse shading and residual. All
    /// intermediates are kept in the result.
    pub fn decompose(&self, image: &LinearImage, gray: GrayInput<'_>) -> Result<IntrinsicComponents> {
        image.ensure_channels(3, "decompose input")?;
        let (gray_albedo, gray_shading) = match gray {
            GrayInput::Given {
                gray_albedo,
                gray_shading,
            } => (gray_albedo.clone(), gray_shading.clone()),
            GrayInput::Network => {
                let net = self
                    .gray
                    .as_ref()
                    .ok_or_else(|| Error::Config("no gray0 network in this run; use oracle gray input".into()))?;
                infer_gray(net, image)?
            }
        };
        let chroma = infer_chroma(&self.chroma, image, &gray_shading, &gray_albedo)?;
        let (approx_albedo, approx_shading) = albedo_from_chroma(image, &gray_shading, &chroma, EPS)?;
        let albedo = infer_albedo(&self.albedo, image, &approx_albedo, &approx_shading)?;
        let rgb_shading = divide(image, &albedo, EPS)?.with_color_space(ColorSpace::Linear)?;
        let (shading, _) = infer_diffuse(&self.diffuse, image, &albedo, &rgb_shading)?;
        let inverse = crate::formation::inverse_shading(&shading)?;
        let mut out = IntrinsicComponents::from_diffuse(image.clone(), albedo, shading)?;
        out.gray_albedo = Some(gray_albedo);
        out.gray_shading = Some(gray_shading);
        out.chroma = Some(chroma);
        out.approx_albedo = Some(approx_albedo);
        out.approx_shading = Some(approx_shading);
        out.rgb_shading = Some(rgb_shading);
        out.inverse_shading = Some(inverse);
        Ok(out)
    }
}
