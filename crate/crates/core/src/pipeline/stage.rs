use crate::error::{Error, Result};
use crate::nn::NetSpec;

/// The networks of the pipeline plus the single-network baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StageId {
    /// Image to inverse grayscale shading, standing in for an external
    /// grayscale decomposition.
    Gray0,
    Chroma,
    Albedo,
    Diffuse,
    Baseline,
}

impl StageId {
    pub const ALL: [StageId; 5] = [
        StageId::Gray0,
        StageId::Chroma,
        StageId::Albedo,
        StageId::Diffuse,
        StageId::Baseline,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StageId::Gray0 => "gray0",
            StageId::Chroma => "chroma",
            StageId::Albedo => "albedo",
            StageId::Diffuse => "diffuse",
            StageId::Baseline => "baseline",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown stage `{s}`")))
    }
}

/// A per-pixel variable fed to a network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputVar {
    Image,
    GrayShading,
    GrayAlbedo,
    /// `Â_c`, from grayscale shading and low-resolution chroma.
    ApproxAlbedo,
    /// `Ŝ_c`.
    ApproxShading,
    /// Diffuse albedo `A_d`.
    Albedo,
    /// `S_c = I / A_d`.
    RgbShading,
}

impl InputVar {
    pub fn channels(self) -> usize {
        match self {
            InputVar::GrayShading => 1,
            _ => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            InputVar::Image => "image",
            InputVar::GrayShading => "gray_shading",
            InputVar::GrayAlbedo => "gray_albedo",
            InputVar::ApproxAlbedo => "approx_albedo",
            InputVar::ApproxShading => "approx_shading",
            InputVar::Albedo => "albedo",
            InputVar::RgbShading => "rgb_shading",
        }
    }

    fn is_shading(self) -> bool {
        matches!(
            self,
            InputVar::GrayShading | InputVar::ApproxShading | InputVar::RgbShading
        )
    }
}

/// The variable a network predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetVar {
    /// `1 / (S_g + 1)`.
    InverseGrayShading,
    /// Bounded shading chroma `C`.
    Chroma,
    /// Diffuse albedo `A_d`.
    Albedo,
    /// `D = 1 / (S_d + 1)`.
    InverseShading,
}

impl TargetVar {
    pub fn channels(self) -> usize {
        match self {
            TargetVar::InverseGrayShading => 1,
            TargetVar::Chroma => 2,
            TargetVar::Albedo | TargetVar::InverseShading => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TargetVar::InverseGrayShading => "inverse_gray_shading",
            TargetVar::Chroma => "chroma",
            TargetVar::Albedo => "albedo",
            TargetVar::InverseShading => "inverse_shading",
        }
    }
}

/// Input/output contract of one trainable network.
#[derive(Debug, Clone, PartialEq)]
pub struct StageSpec {
    /// Variant name; also the checkpoint file stem.
    pub name: String,
    pub stage: StageId,
    pub inputs: Vec<InputVar>,
    pub target: TargetVar,
    /// Output resolution is `1/2^out_level` of the input.
    pub out_level: usize,
    pub w_mse: f32,
    pub w_msg: f32,
}

/// Network width used unless a config overrides it.
pub const DEFAULT_CHANNELS: [usize; 4] = [8, 16, 32, 64];

impl StageSpec {
    fn new(name: &str, stage: StageId, inputs: &[InputVar], target: TargetVar, out_level: usize) -> Self {
        Self {
            name: name.to_string(),
            stage,
            inputs: inputs.to_vec(),
            target,
            out_level,
            w_mse: 1.0,
            w_msg: 1.0,
        }
    }

    /// The standard contract of a pipeline stage or the baseline.
    pub fn for_stage(stage: StageId) -> Self {
        use InputVar::*;
        match stage {
            StageId::Gray0 => Self::new("gray0", stage, &[Image], TargetVar::InverseGrayShading, 0),
            StageId::Chroma => Self::new("chroma", stage, &[Image, GrayShading, GrayAlbedo], TargetVar::Chroma, 2),
            StageId::Albedo => Self::new(
                "albedo",
                stage,
                &[Image, ApproxAlbedo, ApproxShading],
                TargetVar::Albedo,
                0,
            ),
            StageId::Diffuse => Self::new(
                "diffuse",
                stage,
                &[Image, Albedo, RgbShading],
                TargetVar::InverseShading,
                0,
            ),
            StageId::Baseline => Self::new("baseline", stage, &[Image], TargetVar::Albedo, 0),
        }
    }

    pub fn in_channels(&self) -> usize {
        self.inputs.iter().map(|v| v.channels()).sum()
    }

    pub fn out_channels(&self) -> usize {
        self.target.channels()
    }

    pub fn out_factor(&self) -> usize {
        1 << self.out_level
    }

    /// Shading input that the ground-truth shading scale is fitted to, for
    /// shading-space targets. `None` means the target is used as is.
    pub fn align_reference(&self) -> Option<InputVar> {
        if self.target != TargetVar::InverseShading {
            return None;
        }
        self.inputs.iter().copied().find(|v| v.is_shading())
    }

    /// Default architecture for this contract.
    pub fn default_net(&self) -> NetSpec {
        let levels = DEFAULT_CHANNELS.len().max(self.out_level + 1);
        let channels: Vec<usize> = (0..levels).map(|l| DEFAULT_CHANNELS[0] << l).collect();
        NetSpec::new(self.in_channels(), self.out_channels(), &channels).with_out_level(self.out_level)
    }

    pub fn validate(&self) -> Result<()> {
        if self.inputs.is_empty() {
            return Err(Error::Config(format!("stage `{}` has no inputs", self.name)));
        }
        if self.w_mse < 0.0 || self.w_msg < 0.0 || self.w_mse + self.w_msg <= 0.0 {
            return Err(Error::Config(format!(
                "stage `{}` needs non-negative, non-zero loss weights",
                self.name
            )));
        }
        Ok(())
    }
}

/// Variant names accepted by [`ablation_variants`].
pub const ABLATION_VARIANTS: [&str; 10] = [
    "chroma",
    "direct_albedo",
    "albedo",
    "albedo_image_only",
    "albedo_gray_input",
    "albedo_shading_estimation",
    "diffuse",
    "diffuse_image_only",
    "diffuse_gray_input",
    "baseline",
];

/// Input/output variants compared in the ablations:
///
/// - chroma stage: `chroma` (2-channel chroma) against `direct_albedo`
///   (albedo at the same low resolution, same 7-channel input);
/// - albedo stage: `albedo` (`I, Â_c, Ŝ_c`), `albedo_image_only`,
///   `albedo_gray_input` (`I, S_g, A_g`) and `albedo_shading_estimation`
///   (predicts inverse shading from `I, Â_c, Ŝ_c`; albedo is `I / S`);
/// - diffuse stage: `diffuse` (`I, A_d, S_c`), `diffuse_image_only` and
///   `diffuse_gray_input` (`I, A_g, S_g`).
pub fn ablation_variants(name: &str) -> Result<StageSpec> {
    use InputVar::*;
    let gray = [Image, GrayShading, GrayAlbedo];
    Ok(match name {
        "chroma" => StageSpec::for_stage(StageId::Chroma),
        "direct_albedo" => StageSpec::new(name, StageId::Chroma, &gray, TargetVar::Albedo, 2),
        "albedo" => StageSpec::for_stage(StageId::Albedo),
        "albedo_image_only" => StageSpec::new(name, StageId::Albedo, &[Image], TargetVar::Albedo, 0),
        "albedo_gray_input" => StageSpec::new(name, StageId::Albedo, &gray, TargetVar::Albedo, 0),
        "albedo_shading_estimation" => StageSpec::new(
            name,
            StageId::Albedo,
            &[Image, ApproxAlbedo, ApproxShading],
            TargetVar::InverseShading,
            0,
        ),
        "diffuse" => StageSpec::for_stage(StageId::Diffuse),
        "diffuse_image_only" => StageSpec::new(name, StageId::Diffuse, &[Image], TargetVar::InverseShading, 0),
        "diffuse_gray_input" => StageSpec::new(
            name,
            StageId::Diffuse,
            &[Image, GrayAlbedo, GrayShading],
            TargetVar::InverseShading,
            0,
        ),
        "baseline" => StageSpec::for_stage(StageId::Baseline),
        "gray0" => StageSpec::for_stage(StageId::Gray0),
        _ => return Err(Error::Config(format!("unknown variant `{name}`"))),
    })
}
