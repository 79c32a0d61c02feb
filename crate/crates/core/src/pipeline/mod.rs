//! The staged decomposition: grayscale decomposition (oracle or a small
//! stage-0 network), low-resolution shading chroma, diffuse albedo and
//! diffuse shading in the inverse space, plus the single-network baseline
//! and the ablation variants.

mod ablation;
mod align;
mod config;
mod infer;
mod stage;
mod train;
mod vars;

pub use ablation::{
    run_ablation, score_variant, scored_quantity, variant_estimate, variant_reference, AblationReport, AblationRow,
    TrendPair, TrendResult, TRENDS, TREND_VARIANTS,
};
pub use align::{ls_scale_align, ls_scale_align_luminance, scale_align};
pub use config::{
    baseline_net_spec, is_path_key, net_spec, pipeline_param_count, resolve_paths, variant_net_spec, TrainConfig,
};
pub use infer::{
    infer_albedo, infer_baseline, infer_chroma, infer_diffuse, infer_gray, load_network, load_network_from,
    run_network, GrayInput, Pipeline,
};
pub use stage::{ablation_variants, InputVar, StageId, StageSpec, TargetVar, ABLATION_VARIANTS, DEFAULT_CHANNELS};
pub use train::{
    load_examples, load_upstream, read_curves, train_baseline, train_stage, CurvePoint, Examples, TrainOutcome,
    CURVES_HEADER,
};
pub use vars::{downsample_level, SceneVars, Upstream, CHROMA_LEVEL};
