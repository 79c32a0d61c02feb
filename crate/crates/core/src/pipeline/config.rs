use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::stage::{StageId, StageSpec};
use crate::error::{Error, Result};
use crate::kv::KvDoc;
use crate::nn::{NetSpec, DEFAULT_LR, DEFAULT_MSG_SCALES};

/// Training settings for one network.
///
/// Every key may be given globally (`iterations = 500`) or for one variant
/// (`chroma.iterations = 800`); the scoped value wins.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Dataset manifest.
    pub dataset: PathBuf,
    pub iterations: usize,
    pub batch_size: usize,
    pub lr: f32,
    pub seed: u64,
    pub w_mse: f32,
    pub w_msg: f32,
    pub msg_scales: usize,
    /// Validation every this many iterations (and at the end).
    pub eval_interval: usize,
    /// Validation scenes used; 0 means all.
    pub val_limit: usize,
    /// Validation predictions written as PNGs.
    pub samples: usize,
    /// Trained upstream networks replacing oracle inputs.
    pub gray_checkpoint: Option<PathBuf>,
    pub chroma_checkpoint: Option<PathBuf>,
    pub albedo_checkpoint: Option<PathBuf>,
}

fn scoped<'a>(doc: &'a KvDoc, scope: &str, key: &str) -> Option<&'a str> {
    doc.get(&format!("{scope}.{key}")).or_else(|| doc.get(key))
}

fn parse_scoped<T: FromStr>(doc: &KvDoc, scope: &str, key: &str, default: Option<T>) -> Result<T> {
    match scoped(doc, scope, key) {
        Some(v) => v
            .parse()
            .map_err(|_| Error::Config(format!("bad value `{v}` for `{key}`"))),
        None => default.ok_or_else(|| Error::Config(format!("missing required key `{key}`"))),
    }
}

impl TrainConfig {
    /// Defaults for everything except the dataset and seed.
    pub fn new(dataset: impl Into<PathBuf>, seed: u64) -> Self {
        Self {
            dataset: dataset.into(),
            iterations: 2000,
            batch_size: 8,
            lr: DEFAULT_LR,
            seed,
            w_mse: 1.0,
            w_msg: 1.0,
            msg_scales: DEFAULT_MSG_SCALES,
            eval_interval: 100,
            val_limit: 0,
            samples: 2,
            gray_checkpoint: None,
            chroma_checkpoint: None,
            albedo_checkpoint: None,
        }
    }

    /// Reads the settings for variant `scope`. Relative paths are resolved
    /// against `base_dir`.
    pub fn from_kv(doc: &KvDoc, scope: &str, base_dir: &Path) -> Result<Self> {
        let d = Self::new("", 0);
        let path = |key: &str| scoped(doc, scope, key).map(|p| base_dir.join(p));
        let cfg = Self {
            dataset: path("dataset").ok_or_else(|| Error::Config("missing required key `dataset`".into()))?,
            iterations: parse_scoped(doc, scope, "iterations", Some(d.iterations))?,
            batch_size: parse_scoped(doc, scope, "batch_size", Some(d.batch_size))?,
            lr: parse_scoped(doc, scope, "lr", Some(d.lr))?,
            seed: parse_scoped(doc, scope, "seed", None)?,
            w_mse: parse_scoped(doc, scope, "w_mse", Some(d.w_mse))?,
            w_msg: parse_scoped(doc, scope, "w_msg", Some(d.w_msg))?,
            msg_scales: parse_scoped(doc, scope, "msg_scales", Some(d.msg_scales))?,
            eval_interval: parse_scoped(doc, scope, "eval_interval", Some(d.eval_interval))?,
            val_limit: parse_scoped(doc, scope, "val_limit", Some(d.val_limit))?,
            samples: parse_scoped(doc, scope, "samples", Some(d.samples))?,
            gray_checkpoint: path("gray_checkpoint"),
            chroma_checkpoint: path("chroma_checkpoint"),
            albedo_checkpoint: path("albedo_checkpoint"),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Writes the settings as unscoped keys.
    pub fn to_kv(&self, doc: &mut KvDoc) {
        doc.set("dataset", self.dataset.display());
        doc.set("iterations", self.iterations);
        doc.set("batch_size", self.batch_size);
        doc.set("lr", self.lr);
        doc.set("seed", self.seed);
        doc.set("w_mse", self.w_mse);
        doc.set("w_msg", self.w_msg);
        doc.set("msg_scales", self.msg_scales);
        doc.set("eval_interval", self.eval_interval);
        doc.set("val_limit", self.val_limit);
        doc.set("samples", self.samples);
        for (key, p) in [
            ("gray_checkpoint", &self.gray_checkpoint),
            ("chroma_checkpoint", &self.chroma_checkpoint),
            ("albedo_checkpoint", &self.albedo_checkpoint),
        ] {
            if let Some(p) = p {
                doc.set(key, p.display());
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.batch_size == 0 || self.eval_interval == 0 || self.msg_scales == 0 {
            return Err(Error::Config(
                "iterations, batch_size, eval_interval and msg_scales must be positive".into(),
            ));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.lr)));
        }
        if self.w_mse < 0.0 || self.w_msg < 0.0 || self.w_mse + self.w_msg <= 0.0 {
            return Err(Error::Config(
                "loss weights must be non-negative and not both zero".into(),
            ));
        }
        Ok(())
    }
}

/// Keys whose values are file paths.
pub fn is_path_key(key: &str) -> bool {
    let last = key.rsplit('.').next().unwrap_or(key);
    last == "dataset" || last.ends_with("_checkpoint")
}

/// Copy of `doc` with relative path values joined to `base_dir`, so the
/// result can be stored anywhere.
pub fn resolve_paths(doc: &KvDoc, base_dir: &Path) -> KvDoc {
    let mut out = KvDoc::new();
    for (k, v) in doc.entries() {
        if is_path_key(k) {
            out.push(k, base_dir.join(v).display());
        } else {
            out.push(k, v);
        }
    }
    out
}

/// Architecture of a variant: the default for its contract, overridden by
/// `<variant>.net.*` keys. The contract (channels in/out, output level)
/// cannot be overridden.
pub fn net_spec(doc: &KvDoc, spec: &StageSpec) -> Result<NetSpec> {
    let base = spec.default_net();
    let net = NetSpec::from_kv(&format!("{}.net", spec.name), doc, &base)?;
    if net.in_channels != base.in_channels || net.out_channels != base.out_channels || net.out_level != base.out_level {
        return Err(Error::Config(format!(
            "`{}.net` must keep {} inputs, {} outputs and output level {}",
            spec.name, base.in_channels, base.out_channels, base.out_level
        )));
    }
    Ok(net)
}

/// Total parameters of the four pipeline networks under `doc`.
pub fn pipeline_param_count(doc: &KvDoc) -> Result<usize> {
    [StageId::Gray0, StageId::Chroma, StageId::Albedo, StageId::Diffuse]
        .into_iter()
        .map(|s| net_spec(doc, &StageSpec::for_stage(s)).map(|n| n.param_count()))
        .sum()
}

/// Baseline architecture: explicit `baseline.net.channels` if given,
/// otherwise the narrowest `[k, 2k, 4k, ...]` network (default depth) with
/// at least as many parameters as the whole pipeline.
pub fn baseline_net_spec(doc: &KvDoc) -> Result<NetSpec> {
    let spec = StageSpec::for_stage(StageId::Baseline);
    let explicit = net_spec(doc, &spec)?;
    if doc.get("baseline.net.channels").is_some() {
        return Ok(explicit);
    }
    let target = pipeline_param_count(doc)?;
    let mut k = 1;
    loop {
        let mut net = explicit.clone();
        net.channels = (0..explicit.channels.len()).map(|l| k << l).collect();
        if net.param_count() >= target {
            return Ok(net);
        }
        k += 1;
    }
}

/// Architecture for any variant, routing the baseline through
/// [`baseline_net_spec`].
pub fn variant_net_spec(doc: &KvDoc, spec: &StageSpec) -> Result<NetSpec> {
    if spec.stage == StageId::Baseline {
        baseline_net_spec(doc)
    } else {
        net_spec(doc, spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scoped_keys_override_global_ones() {
        let doc =
            KvDoc::parse("dataset = d/manifest.txt\nseed = 3\niterations = 10\nchroma.iterations = 20\n").unwrap();
        let a = TrainConfig::from_kv(&doc, "albedo", Path::new("/base")).unwrap();
        let c = TrainConfig::from_kv(&doc, "chroma", Path::new("/base")).unwrap();
        assert_eq!(a.iterations, 10);
        assert_eq!(c.iterations, 20);
        assert_eq!(a.dataset, PathBuf::from("/base/d/manifest.txt"));
        assert_eq!(a.lr, DEFAULT_LR);
    }

    #[test]
    fn seed_and_dataset_are_required() {
        assert!(TrainConfig::from_kv(&KvDoc::parse("dataset = x\n").unwrap(), "chroma", Path::new(".")).is_err());
        assert!(TrainConfig::from_kv(&KvDoc::parse("seed = 1\n").unwrap(), "chroma", Path::new(".")).is_err());
        assert!(TrainConfig::from_kv(
            &KvDoc::parse("seed = 1\ndataset = x\nlr = -1\n").unwrap(),
            "c",
            Path::new(".")
        )
        .is_err());
    }

    #[test]
    fn round_trip() {
        let mut cfg = TrainConfig::new("/data/manifest.txt", 9);
        cfg.chroma_checkpoint = Some(PathBuf::from("/runs/a/checkpoints/chroma.iidc"));
        let mut doc = KvDoc::new();
        cfg.to_kv(&mut doc);
        assert_eq!(TrainConfig::from_kv(&doc, "x", Path::new("/")).unwrap(), cfg);
    }

    #[test]
    fn baseline_is_at_least_as_large_as_the_pipeline() {
        let doc = KvDoc::new();
        let total = pipeline_param_count(&doc).unwrap();
        let base = baseline_net_spec(&doc).unwrap();
        assert!(base.param_count() >= total);
        let mut smaller = base.clone();
        smaller.channels = smaller.channels.iter().map(|c| c - c / smaller.channels[0]).collect();
        assert!(smaller.param_count() < total);
    }

    #[test]
    fn paths_are_resolved() {
        let doc = KvDoc::parse("dataset = d/m.txt\nalbedo.chroma_checkpoint = c.iidc\nseed = 1\n").unwrap();
        let r = resolve_paths(&doc, Path::new("/w"));
        assert_eq!(r.get("dataset"), Some("/w/d/m.txt"));
        assert_eq!(r.get("albedo.chroma_checkpoint"), Some("/w/c.iidc"));
        assert_eq!(r.get("seed"), Some("1"));
    }

    #[test]
    fn contract_cannot_be_overridden() {
        let doc = KvDoc::parse("chroma.net.out_level = 0\n").unwrap();
        assert!(net_spec(&doc, &StageSpec::for_stage(StageId::Chroma)).is_err());
        let doc = KvDoc::parse("chroma.net.channels = 4,8,16,32\n").unwrap();
        assert_eq!(
            net_spec(&doc, &StageSpec::for_stage(StageId::Chroma))
                .unwrap()
                .channels
                .len(),
            4
        );
    }
}
