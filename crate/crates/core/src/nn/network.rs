use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::graph::{Activation, Graph, Ops, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::kv::KvDoc;

/// Architecture of a small encoder-decoder.
///
/// Level `l` runs at resolution `1/2^l`. The encoder has one block of
/// `convs_per_block` 3×3 convolutions per entry of `channels`, separated by
/// 2× average pooling. The decoder upsamples bilinearly, concatenates the
/// encoder skip at the same level and runs another block, stopping at
/// `out_level`. A 3×3 convolution with a sigmoid produces the output.
#[derive(Debug, Clone, PartialEq)]
pub struct NetSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub channels: Vec<usize>,
    pub convs_per_block: usize,
    pub out_level: usize,
    pub activation: Activation,
}

impl NetSpec {
    pub fn new(in_channels: usize, out_channels: usize, channels: &[usize]) -> Self {
        Self {
            in_channels,
            out_channels,
            channels: channels.to_vec(),
            convs_per_block: 1,
            out_level: 0,
            activation: Activation::Elu,
        }
    }

    pub fn with_out_level(mut self, level: usize) -> Self {
        self.out_level = level;
        self
    }

    pub fn with_convs_per_block(mut self, n: usize) -> Self {
        self.convs_per_block = n;
        self
    }

    pub fn with_activation(mut self, a: Activation) -> Self {
        self.activation = a;
        self
    }

    pub fn depth(&self) -> usize {
        self.channels.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::Config(
                "network needs at least one input and output channel".into(),
            ));
        }
        if self.channels.is_empty() || self.channels.contains(&0) {
            return Err(Error::Config(format!("bad channel list {:?}", self.channels)));
        }
        if self.convs_per_block == 0 {
            return Err(Error::Config("convs_per_block must be positive".into()));
        }
        if self.out_level >= self.channels.len() {
            return Err(Error::Config(format!(
                "out_level {} needs more than {} levels",
                self.out_level,
                self.channels.len()
            )));
        }
        Ok(())
    }

    /// Input sizes must be divisible by this.
    pub fn size_multiple(&self) -> usize {
        1 << (self.channels.len() - 1)
    }

    /// Output resolution divisor.
    pub fn out_factor(&self) -> usize {
        1 << self.out_level
    }

    /// Parameter names and shapes in a fixed order.
    pub fn layout(&self) -> Vec<(String, [usize; 4])> {
        let mut out = Vec::new();
        let block = |prefix: String, cin: usize, cout: usize, out: &mut Vec<(String, [usize; 4])>| {
            let mut c = cin;
            for j in 0..self.convs_per_block {
                out.push((format!("{prefix}.conv{j}.weight"), [cout, c, 3, 3]));
                out.push((format!("{prefix}.conv{j}.bias"), [1, cout, 1, 1]));
                c = cout;
            }
        };
        let mut cin = self.in_channels;
        for (l, &c) in self.channels.iter().enumerate() {
            block(format!("enc{l}"), cin, c, &mut out);
            cin = c;
        }
        for l in (self.out_level..self.channels.len() - 1).rev() {
            block(format!("dec{l}"), cin + self.channels[l], self.channels[l], &mut out);
            cin = self.channels[l];
        }
        out.push(("head.weight".into(), [self.out_channels, cin, 3, 3]));
        out.push(("head.bias".into(), [1, self.out_channels, 1, 1]));
        out
    }

    pub fn param_count(&self) -> usize {
        self.layout().iter().map(|(_, s)| s.iter().product::<usize>()).sum()
    }

    /// Writes `<prefix>.<field> = value` entries.
    pub fn to_kv(&self, prefix: &str, doc: &mut KvDoc) {
        let list: Vec<String> = self.channels.iter().map(|c| c.to_string()).collect();
        doc.set(&format!("{prefix}.in_channels"), self.in_channels);
        doc.set(&format!("{prefix}.out_channels"), self.out_channels);
        doc.set(&format!("{prefix}.channels"), list.join(","));
        doc.set(&format!("{prefix}.convs_per_block"), self.convs_per_block);
        doc.set(&format!("{prefix}.out_level"), self.out_level);
        doc.set(&format!("{prefix}.activation"), self.activation.name());
    }

    /// Reads the fields written by [`NetSpec::to_kv`]; absent keys keep the
    /// values of `base`.
    pub fn from_kv(prefix: &str, doc: &KvDoc, base: &NetSpec) -> Result<Self> {
        let key = |f: &str| format!("{prefix}.{f}");
        let mut spec = base.clone();
        spec.in_channels = doc.parse_or(&key("in_channels"), spec.in_channels)?;
        spec.out_channels = doc.parse_or(&key("out_channels"), spec.out_channels)?;
        if let Some(list) = doc.get(&key("channels")) {
            spec.channels = list
                .split(',')
                .map(|s| s.trim().parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Config(format!("{}: bad channel list `{list}`", key("channels"))))?;
        }
        spec.convs_per_block = doc.parse_or(&key("convs_per_block"), spec.convs_per_block)?;
        spec.out_level = doc.parse_or(&key("out_level"), spec.out_level)?;
        if let Some(a) = doc.get(&key("activation")) {
            spec.activation = Activation::parse(a).ok_or_else(|| Error::Config(format!("unknown activation `{a}`")))?;
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
}

/// An initialised [`NetSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    spec: NetSpec,
    params: Vec<Param>,
}

impl Network {
    /// He-normal hidden weights, a narrower head (std `1/sqrt(fan_in)`) and
    /// zero biases, drawn from `seed`.
    pub fn new(spec: NetSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = spec
            .layout()
            .into_iter()
            .map(|(name, shape)| {
                let mut value = Tensor::zeros(shape);
                if name.ends_with("weight") {
                    let fan_in = (shape[1] * shape[2] * shape[3]) as f32;
                    let gain = if name.starts_with("head") { 1.0 } else { 2.0 };
                    let dist = Normal::new(0.0, (gain / fan_in).sqrt()).unwrap();
                    value.data_mut().iter_mut().for_each(|w| *w = dist.sample(&mut rng));
                }
                Param { name, value }
            })
            .collect();
        Ok(Self { spec, params })
    }

    pub fn spec(&self) -> &NetSpec {
        &self.spec
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Replaces all parameters; names and shapes must match the layout.
    pub fn set_params(&mut self, params: Vec<(String, Tensor)>) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::Shape(format!(
                "expected {} parameter tensors, got {}",
                self.params.len(),
                params.len()
            )));
        }
        for (p, (name, t)) in self.params.iter().zip(&params) {
            if &p.name != name || p.value.shape() != t.shape() {
                return Err(Error::Shape(format!(
                    "parameter `{name}` {:?} does not match `{}` {:?}",
                    t.shape(),
                    p.name,
                    p.value.shape()
                )));
            }
        }
        for (p, (_, t)) in self.params.iter_mut().zip(params) {
            p.value = t;
        }
        Ok(())
    }

    /// Adds the parameters to `g`, as trainable leaves if `trainable`.
    pub fn bind(&self, g: &mut Graph, trainable: bool) -> Vec<Var> {
        self.params
            .iter()
            .map(|p| {
                if trainable {
                    g.param(p.value.clone())
                } else {
                    g.input(p.value.clone())
                }
            })
            .collect()
    }

    pub fn check_input(&self, shape: [usize; 4]) -> Result<()> {
        let m = self.spec.size_multiple();
        if shape[1] != self.spec.in_channels {
            return Err(Error::Shape(format!(
                "network expects {} input channels, got {}",
                self.spec.in_channels, shape[1]
            )));
        }
        if !shape[2].is_multiple_of(m) || !shape[3].is_multiple_of(m) || shape[2] == 0 || shape[3] == 0 {
            return Err(Error::Shape(format!(
                "input {}x{} is not a positive multiple of {m}",
                shape[3], shape[2]
            )));
        }
        Ok(())
    }

    /// Builds the forward pass on bound parameters.
    pub fn forward(&self, g: &mut dyn Ops, params: &[Var], x: Var) -> Var {
        let spec = &self.spec;
        let act = spec.activation;
        let mut it = params.iter().copied();
        let mut block = |g: &mut dyn Ops, mut h: Var| {
            for _ in 0..spec.convs_per_block {
                let (w, b) = (it.next().unwrap(), it.next().unwrap());
                h = g.conv2d(h, w, b);
                h = g.activation(h, act);
            }
            h
        };
        let mut skips = Vec::with_capacity(spec.depth());
        let mut h = x;
        for l in 0..spec.depth() {
            if l > 0 {
                h = g.avg_pool2(h);
            }
            h = block(g, h);
            skips.push(h);
        }
        for l in (spec.out_level..spec.depth() - 1).rev() {
            let up = g.upsample2(h);
            let cat = g.concat(&[up, skips[l]]);
            h = block(g, cat);
        }
        let (w, b) = (it.next().unwrap(), it.next().unwrap());
        let y = g.conv2d(h, w, b);
        g.sigmoid(y)
    }

    /// Inference without gradient bookkeeping.
    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x.shape())?;
        let mut g = Graph::new();
        let params = self.bind(&mut g, false);
        let xv = g.input(x.clone());
        let y = self.forward(&mut g, &params, xv);
        Ok(g.value(y).clone())
    }
}
