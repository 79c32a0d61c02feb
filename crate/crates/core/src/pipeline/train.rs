use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{net_spec, variant_net_spec, TrainConfig};
use super::infer::load_network_from;
use super::stage::{StageId, StageSpec};
use super::vars::{SceneVars, Upstream};
use crate::error::{Error, Result};
use crate::image::{write_png, ColorSpace, LinearImage};
use crate::kv::KvDoc;
use crate::nn::{combined_loss, mse, msg, Adam, Checkpoint, Graph, Network, Tensor};
use crate::synth::{scene_seed, Dataset, Split};

pub const CURVES_HEADER: &str = "stage,iteration,train_loss,val_loss,val_mse";

/// One row of `curves.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub iteration: usize,
    /// Mean training loss since the previous point; `None` before training.
    pub train_loss: Option<f64>,
    pub val_loss: f64,
    pub val_mse: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub network: Network,
    pub curve: Vec<CurvePoint>,
    pub checkpoint: PathBuf,
}

impl TrainOutcome {
    pub fn initial_val_mse(&self) -> f64 {
        self.curve.first().map_or(f64::NAN, |p| p.val_mse)
    }

    pub fn final_val_mse(&self) -> f64 {
        self.curve.last().map_or(f64::NAN, |p| p.val_mse)
    }
}

/// Inputs and targets of one stage for a set of scenes, kept flat.
#[derive(Debug, Clone)]
pub struct Examples {
    pub ids: Vec<String>,
    pub inputs: Vec<Vec<f32>>,
    pub targets: Vec<Vec<f32>>,
    pub in_shape: [usize; 3],
    pub out_shape: [usize; 3],
}

impl Examples {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    fn batch(&self, idx: &[usize]) -> Result<(Tensor, Tensor)> {
        let [c, h, w] = self.in_shape;
        let xs: Vec<&[f32]> = idx.iter().map(|&i| self.inputs[i].as_slice()).collect();
        let x = Tensor::stack(&xs, c, h, w)?;
        let [c, h, w] = self.out_shape;
        let ts: Vec<&[f32]> = idx.iter().map(|&i| self.targets[i].as_slice()).collect();
        Ok((x, Tensor::stack(&ts, c, h, w)?))
    }
}

/// Upstream networks named by the config, with architectures taken from
/// the same config.
pub fn load_upstream(cfg: &TrainConfig, doc: &KvDoc) -> Result<Upstream> {
    let load = |path: &Option<PathBuf>, id: StageId| -> Result<Option<Network>> {
        match path {
            Some(p) => {
                let spec = StageSpec::for_stage(id);
                net_spec(doc, &spec)?;
                Ok(Some(load_network_from(p, doc, &spec)?))
            }
            None => Ok(None),
        }
    };
    Ok(Upstream {
        gray: load(&cfg.gray_checkpoint, StageId::Gray0)?,
        chroma: load(&cfg.chroma_checkpoint, StageId::Chroma)?,
        albedo: load(&cfg.albedo_checkpoint, StageId::Albedo)?,
    })
}

/// Builds the examples of `spec` for the scenes of `split`, at most
/// `limit` of them (0 means all).
pub fn load_examples(
    dataset: &Dataset,
    split: Split,
    limit: usize,
    spec: &StageSpec,
    upstream: &Upstream,
) -> Result<Examples> {
    let mut ex = Examples {
        ids: Vec::new(),
        inputs: Vec::new(),
        targets: Vec::new(),
        in_shape: [0; 3],
        out_shape: [0; 3],
    };
    let entries = dataset.split(split);
    let entries: Vec<_> = if limit > 0 {
        entries.take(limit).collect()
    } else {
        entries.collect()
    };
    for entry in entries {
        let scene = dataset.load_scene(entry)?;
        let vars = SceneVars::build(&scene.components, upstream)?;
        let x = vars.stage_input(spec)?;
        let t = vars.stage_target(spec)?;
        ex.in_shape = [x.channels(), x.height(), x.width()];
        ex.out_shape = [t.channels(), t.height(), t.width()];
        ex.ids.push(entry.id.clone());
        ex.inputs.push(x.into_data());
        ex.targets.push(t.into_data());
    }
    Ok(ex)
}

const EVAL_CHUNK: usize = 8;

/// Mean validation `(loss, mse)` over scenes, plus the predictions.
fn evaluate(net: &Network, ex: &Examples, w: (f32, f32), scales: usize) -> Result<(f64, f64, Vec<Tensor>)> {
    let (mut loss, mut err) = (0.0f64, 0.0f64);
    let mut preds = Vec::new();
    let idx: Vec<usize> = (0..ex.len()).collect();
    for chunk in idx.chunks(EVAL_CHUNK) {
        let (x, t) = ex.batch(chunk)?;
        let y = net.predict(&x)?;
        for n in 0..chunk.len() {
            let [c, h, w_] = ex.out_shape;
            let p = Tensor::from_vec([1, c, h, w_], y.sample(n).to_vec())?;
            let g = Tensor::from_vec([1, c, h, w_], t.sample(n).to_vec())?;
            let m = mse(&p, &g) as f64;
            err += m;
            loss += w.0 as f64 * m + w.1 as f64 * msg(&p, &g, scales) as f64;
            preds.push(p);
        }
    }
    let n = ex.len().max(1) as f64;
    Ok((loss / n, err / n, preds))
}

fn curve_rows(name: &str, curve: &[CurvePoint]) -> String {
    let mut s = String::new();
    for p in curve {
        let train = p.train_loss.map_or(String::new(), |v| v.to_string());
        writeln!(s, "{name},{},{train},{},{}", p.iteration, p.val_loss, p.val_mse).unwrap();
    }
    s
}

/// Writes this variant's rows into `curves.csv`, keeping other variants'.
fn write_curves(run_dir: &Path, name: &str, curve: &[CurvePoint]) -> Result<()> {
    let path = run_dir.join("curves.csv");
    let mut out = String::from(CURVES_HEADER);
    out.push('\n');
    if path.exists() {
        let old = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        for line in old.lines().skip(1) {
            if line.split(',').next() != Some(name) && !line.is_empty() {
                out.push_str(line);
                out.push('\n');
            }
        }
    }
    out.push_str(&curve_rows(name, curve));
    fs::write(&path, out).map_err(|e| Error::io(&path, e))
}

/// Reads `curves.csv` rows of one variant.
pub fn read_curves(run_dir: &Path, name: &str) -> Result<Vec<CurvePoint>> {
    let path = run_dir.join("curves.csv");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let bad = |l: &str| Error::format(&path, format!("bad curve row `{l}`"));
    let mut out = Vec::new();
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(bad(line));
        }
        if f[0] != name {
            continue;
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(line));
        out.push(CurvePoint {
            iteration: f[1].parse().map_err(|_| bad(line))?,
            train_loss: if f[2].is_empty() { None } else { Some(num(f[2])?) },
            val_loss: num(f[3])?,
            val_mse: num(f[4])?,
        });
    }
    Ok(out)
}

/// 2-channel maps are shown with a neutral third channel.
fn displayable(t: &Tensor) -> Result<LinearImage> {
    let img = t.to_image(0, 0, t.channels(), ColorSpace::Data)?;
    if img.channels() != 2 {
        return Ok(img);
    }
    let (w, h) = (img.width(), img.height());
    LinearImage::from_fn(
        w,
        h,
        3,
        ColorSpace::Data,
        |c, x, y| if c < 2 { img.get(c, x, y) } else { 0.5 },
    )
}

fn write_samples(dir: &Path, name: &str, ex: &Examples, preds: &[Tensor], count: usize) -> Result<()> {
    if count == 0 {
        return Ok(());
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let [c, h, w] = ex.out_shape;
    for (i, pred) in preds.iter().enumerate().take(count) {
        let target = Tensor::from_vec([1, c, h, w], ex.targets[i].clone())?;
        write_png(&displayable(pred)?, &dir.join(format!("{name}_{}_pred.png", ex.ids[i])))?;
        write_png(
            &displayable(&target)?,
            &dir.join(format!("{name}_{}_target.png", ex.ids[i])),
        )?;
    }
    Ok(())
}

/// Adds `doc` and the resolved architecture to `<run_dir>/config`.
fn update_run_config(run_dir: &Path, doc: &KvDoc, spec: &StageSpec, net: &Network) -> Result<()> {
    let path = run_dir.join("config");
    let mut run = if path.exists() {
        KvDoc::load(&path)?
    } else {
        KvDoc::new()
    };
    for (k, v) in doc.entries() {
        run.set(k, v);
    }
    net.spec().to_kv(&format!("{}.net", spec.name), &mut run);
    run.save(&path, "run configuration")
}

fn dump_nan(run_dir: &Path, name: &str, iteration: usize, batch_seed: u64, ids: &[&str]) -> Result<PathBuf> {
    let path = run_dir.join(format!("{name}_nan_dump.txt"));
    let mut s = String::new();
    writeln!(s, "variant = {name}").unwrap();
    writeln!(s, "iteration = {iteration}").unwrap();
    writeln!(s, "batch_seed = {batch_seed}").unwrap();
    for id in ids {
        writeln!(s, "scene = {id}").unwrap();
    }
    fs::write(&path, s).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Trains the network of `spec` with the settings in `doc` (scoped by the
/// variant name), writing the checkpoint, curves, samples and config into
/// `run_dir`. Path values in `doc` should already be absolute (see
/// [`super::resolve_paths`]).
pub fn train_stage(spec: &StageSpec, doc: &KvDoc, run_dir: &Path) -> Result<TrainOutcome> {
    spec.validate()?;
    let cfg = TrainConfig::from_kv(doc, &spec.name, Path::new("."))?;
    let arch = variant_net_spec(doc, spec)?;
    let dataset = Dataset::load(&cfg.dataset)?;
    let upstream = load_upstream(&cfg, doc)?;
    let train = load_examples(&dataset, Split::Train, 0, spec, &upstream)?;
    let val = load_examples(&dataset, Split::Val, cfg.val_limit, spec, &upstream)?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::Config(
            "dataset needs scenes in both the train and val splits".into(),
        ));
    }
    let mut net = Network::new(arch, cfg.seed)?;
    net.check_input([1, train.in_shape[0], train.in_shape[1], train.in_shape[2]])?;

    for sub in ["checkpoints", "samples"] {
        let d = run_dir.join(sub);
        fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    let weights = (cfg.w_mse * spec.w_mse, cfg.w_msg * spec.w_msg);
    let mut adam = Adam::new(cfg.lr);
    let (val_loss, val_mse, _) = evaluate(&net, &val, weights, cfg.msg_scales)?;
    let mut curve = vec![CurvePoint {
        iteration: 0,
        train_loss: None,
        val_loss,
        val_mse,
    }];
    log::info!(
        "{}: {} train / {} val scenes, val mse {val_mse:.6}",
        spec.name,
        train.len(),
        val.len()
    );

    let (mut running, mut count) = (0.0f64, 0usize);
    let batch = cfg.batch_size.min(train.len());
    let mut preds = Vec::new();
    for it in 1..=cfg.iterations {
        let batch_seed = scene_seed(cfg.seed, it);
        let mut rng = ChaCha8Rng::seed_from_u64(batch_seed);
        let mut idx = sample(&mut rng, train.len(), batch).into_vec();
        idx.sort_unstable();
        let (x, t) = train.batch(&idx)?;

        let mut g = Graph::new();
        let params = net.bind(&mut g, true);
        let (xv, tv) = (g.input(x), g.input(t));
        let y = net.forward(&mut g, &params, xv);
        let loss = combined_loss(&mut g, y, tv, weights.0, weights.1, cfg.msg_scales);
        let lv = g.value(loss).item();
        let grads_ok = {
            if lv.is_finite() {
                g.backward(loss);
                params
                    .iter()
                    .all(|&p| g.grad(p).is_none_or(|d| d.iter().all(|v| v.is_finite())))
            } else {
                false
            }
        };
        if !grads_ok {
            let ids: Vec<&str> = idx.iter().map(|&i| train.ids[i].as_str()).collect();
            let dump = dump_nan(run_dir, &spec.name, it, batch_seed, &ids)?;
            return Err(Error::Numerical(format!(
                "non-finite loss or gradient in `{}` at iteration {it} (batch seed {batch_seed}, scenes {}); see {}",
                spec.name,
                ids.join(" "),
                dump.display()
            )));
        }
        let grads: Vec<Vec<f32>> = params
            .iter()
            .zip(net.params())
            .map(|(&v, p)| g.grad(v).map_or_else(|| vec![0.0; p.value.len()], <[f32]>::to_vec))
            .collect();
        adam.step(
            net.params_mut()
                .iter_mut()
                .zip(&grads)
                .map(|(p, d)| (p.value.data_mut(), d.as_slice())),
        );
        running += lv as f64;
        count += 1;

        if it % cfg.eval_interval == 0 || it == cfg.iterations {
            let (val_loss, val_mse, p) = evaluate(&net, &val, weights, cfg.msg_scales)?;
            preds = p;
            curve.push(CurvePoint {
                iteration: it,
                train_loss: Some(running / count as f64),
                val_loss,
                val_mse,
            });
            log::info!(
                "{} it {it}: train {:.6} val mse {val_mse:.6}",
                spec.name,
                running / count as f64
            );
            (running, count) = (0.0, 0);
        }
    }

    let checkpoint = run_dir.join("checkpoints").join(format!("{}.iidc", spec.name));
    Checkpoint::from_network(&net, Some(&adam)).save(&checkpoint)?;
    write_curves(run_dir, &spec.name, &curve)?;
    write_samples(&run_dir.join("samples"), &spec.name, &val, &preds, cfg.samples)?;
    update_run_config(run_dir, doc, spec, &net)?;
    Ok(TrainOutcome {
        network: net,
        curve,
        checkpoint,
    })
}

/// Trains the single image-to-albedo network.
pub fn train_baseline(doc: &KvDoc, run_dir: &Path) -> Result<TrainOutcome> {
    train_stage(&StageSpec::for_stage(StageId::Baseline), doc, run_dir)
}
