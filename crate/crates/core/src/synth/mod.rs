//! Procedural ground-truth scenes.
//!
//! A scene is a Voronoi partition of constant albedo colors laid over a
//! smooth height field, lit by one to three colored directional lights plus
//! a neutral ambient term. Shiny regions add a Phong lobe on top of the
//! Lambertian image. Clipping to [0, 1] is the only source of negative
//! residual.

mod dataset;

pub use dataset::{gen_dataset, scene_seed, split_for_seed, Dataset, SceneEntry, SceneRecord, Split, DATASET_MANIFEST};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::formation::{divide, grayscale_oracle, inverse_shading, shading_to_chroma, ChromaMap, IntrinsicComponents};
use crate::image::{ColorSpace, LinearImage};
use crate::kv::KvDoc;
use crate::EPS;

/// Knobs of the procedural generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneParams {
    /// Square image side; a power of two ≥ 32.
    pub resolution: usize,
    /// Inclusive range for the number of albedo regions.
    pub albedo_regions: (usize, usize),
    /// Inclusive range for the number of lights, within [1, 3].
    pub lights: (usize, usize),
    /// 0 gives white lights, 1 fully saturated random hues.
    pub light_chroma_strength: f32,
    /// Scale of the Phong lobe; 0 disables specularities.
    pub specular_strength: f32,
    pub shininess: f32,
    /// Probability that a scene is over-exposed so the diffuse image clips.
    pub clip_probability: f32,
    pub ambient: f32,
    /// Base seed for datasets; per-scene seeds are derived from it.
    pub seed: u64,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            resolution: 64,
            albedo_regions: (3, 8),
            lights: (1, 3),
            light_chroma_strength: 0.6,
            specular_strength: 0.5,
            shininess: 24.0,
            clip_probability: 0.1,
            ambient: 0.15,
            seed: 0,
        }
    }
}

impl SceneParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.resolution < 32 || !self.resolution.is_power_of_two() {
            return bad(format!("resolution {} must be a power of two >= 32", self.resolution));
        }
        if self.albedo_regions.0 == 0 || self.albedo_regions.0 > self.albedo_regions.1 {
            return bad(format!("empty albedo region range {:?}", self.albedo_regions));
        }
        if self.lights.0 == 0 || self.lights.0 > self.lights.1 || self.lights.1 > 3 {
            return bad(format!("light range {:?} must lie in [1, 3]", self.lights));
        }
        for (name, v) in [
            ("light_chroma_strength", self.light_chroma_strength),
            ("specular_strength", self.specular_strength),
            ("clip_probability", self.clip_probability),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} = {v} outside [0, 1]"));
            }
        }
        if !(self.shininess >= 1.0 && self.shininess.is_finite()) {
            return bad(format!("shininess {} must be >= 1", self.shininess));
        }
        if !(self.ambient >= 0.0 && self.ambient.is_finite()) {
            return bad(format!("ambient {} must be >= 0", self.ambient));
        }
        Ok(())
    }

    pub fn to_kv(&self, doc: &mut KvDoc) {
        doc.set("resolution", self.resolution)
            .set(
                "albedo_regions",
                format!("{},{}", self.albedo_regions.0, self.albedo_regions.1),
            )
            .set("lights", format!("{},{}", self.lights.0, self.lights.1))
            .set("light_chroma_strength", self.light_chroma_strength)
            .set("specular_strength", self.specular_strength)
            .set("shininess", self.shininess)
            .set("clip_probability", self.clip_probability)
            .set("ambient", self.ambient)
            .set("seed", self.seed);
    }

    /// Reads parameters from a key-value document; absent keys keep defaults.
    pub fn from_kv(doc: &KvDoc) -> Result<Self> {
        let d = Self::default();
        let range = |key: &str, default: (usize, usize)| -> Result<(usize, usize)> {
            match doc.get(key) {
                None => Ok(default),
                Some(v) => {
                    let parts: Vec<_> = v.split(',').map(|p| p.trim().parse::<usize>()).collect();
                    match parts.as_slice() {
                        [Ok(a)] => Ok((*a, *a)),
                        [Ok(a), Ok(b)] => Ok((*a, *b)),
                        _ => Err(Error::Config(format!("bad range `{v}` for `{key}`"))),
                    }
                }
            }
        };
        let p = Self {
            resolution: doc.parse_or("resolution", d.resolution)?,
            albedo_regions: range("albedo_regions", d.albedo_regions)?,
            lights: range("lights", d.lights)?,
            light_chroma_strength: doc.parse_or("light_chroma_strength", d.light_chroma_strength)?,
            specular_strength: doc.parse_or("specular_strength", d.specular_strength)?,
            shininess: doc.parse_or("shininess", d.shininess)?,
            clip_probability: doc.parse_or("clip_probability", d.clip_probability)?,
            ambient: doc.parse_or("ambient", d.ambient)?,
            seed: doc.parse_or("seed", d.seed)?,
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Light {
    /// Unit vector towards the light.
    pub direction: [f32; 3],
    /// Linear RGB radiance, after exposure scaling.
    pub color: [f32; 3],
}

/// A generated scene with its exact decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneGT {
    pub components: IntrinsicComponents,
    /// 1 where the Phong lobe is non-zero.
    pub specular_mask: LinearImage,
    /// 1 where the diffuse image exceeds 1 in some channel before clipping.
    pub clipped_mask: LinearImage,
    pub lights: Vec<Light>,
    pub seed: u64,
}

/// Derived training targets for one scene.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneTargets {
    /// Full-resolution shading chroma of `I / A_d`.
    pub chroma: ChromaMap,
    /// `D = 1/(S_d + 1)`.
    pub inverse_diffuse: LinearImage,
    pub gray_shading: LinearImage,
    pub gray_albedo: LinearImage,
}

struct Bump {
    cx: f32,
    cy: f32,
    sigma: f32,
    amp: f32,
}

fn unit_hue<R: Rng>(rng: &mut R) -> [f32; 3] {
    let raw = [
        rng.random_range(0.05f32..1.0),
        rng.random_range(0.05f32..1.0),
        rng.random_range(0.05f32..1.0),
    ];
    let lum = 0.2126 * raw[0] + 0.7152 * raw[1] + 0.0722 * raw[2];
    raw.map(|v| v / lum)
}

/// Generates one scene. Identical `(params, seed)` give bit-identical output.
pub fn gen_scene(params: &SceneParams, seed: u64) -> Result<SceneGT> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = params.resolution;
    let npx = n * n;
    let nf = n as f32;

    // Albedo: Voronoi regions of constant color.
    let regions = rng.random_range(params.albedo_regions.0..=params.albedo_regions.1);
    let sites: Vec<(f32, f32)> = (0..regions)
        .map(|_| (rng.random_range(0.0..nf), rng.random_range(0.0..nf)))
        .collect();
    let colors: Vec<[f32; 3]> = (0..regions)
        .map(|_| std::array::from_fn(|_| rng.random_range(0.1f32..=0.9)))
        .collect();
    let shiny: Vec<bool> = (0..regions)
        .map(|_| params.specular_strength > 0.0 && rng.random_bool(0.4))
        .collect();
    let mut region_of = vec![0usize; npx];
    for y in 0..n {
        for x in 0..n {
            let (px, py) = (x as f32 + 0.5, y as f32 + 0.5);
            let mut best = (f32::INFINITY, 0);
            for (k, &(sx, sy)) in sites.iter().enumerate() {
                let d = (px - sx).powi(2) + (py - sy).powi(2);
                if d < best.0 {
                    best = (d, k);
                }
            }
            region_of[y * n + x] = best.1;
        }
    }

    // Geometry: sum of Gaussian bumps, analytic normals.
    let bumps: Vec<Bump> = (0..rng.random_range(3..=7))
        .map(|_| {
            let sigma = nf * rng.random_range(0.08f32..0.3);
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            Bump {
                cx: rng.random_range(0.0..nf),
                cy: rng.random_range(0.0..nf),
                sigma,
                amp: sign * sigma * rng.random_range(0.3f32..1.5),
            }
        })
        .collect();
    let normals: Vec<[f32; 3]> = (0..npx)
        .map(|i| {
            let (px, py) = ((i % n) as f32 + 0.5, (i / n) as f32 + 0.5);
            let (mut hx, mut hy) = (0.0f32, 0.0f32);
            for b in &bumps {
                let (dx, dy) = (px - b.cx, py - b.cy);
                let s2 = b.sigma * b.sigma;
                let g = b.amp * (-(dx * dx + dy * dy) / (2.0 * s2)).exp();
                hx -= g * dx / s2;
                hy -= g * dy / s2;
            }
            let norm = (hx * hx + hy * hy + 1.0).sqrt();
            [-hx / norm, -hy / norm, 1.0 / norm]
        })
        .collect();

    // Lights.
    let count = rng.random_range(params.lights.0..=params.lights.1);
    let s = params.light_chroma_strength;
    let mut lights: Vec<Light> = (0..count)
        .map(|_| {
            let az = rng.random_range(0.0f32..std::f32::consts::TAU);
            let el = rng.random_range(20f32..80.0).to_radians();
            let intensity = rng.random_range(0.5f32..1.0);
            let hue = unit_hue(&mut rng);
            Light {
                direction: [el.cos() * az.cos(), el.cos() * az.sin(), el.sin()],
                color: hue.map(|h| intensity * ((1.0 - s) + s * h)),
            }
        })
        .collect();

    // Unexposed diffuse shading and specular lobe.
    let mut shading = vec![0.0f32; 3 * npx];
    let mut spec = vec![0.0f32; 3 * npx];
    for i in 0..npx {
        let nrm = normals[i];
        let mut acc = [params.ambient; 3];
        let mut lobe = [0.0f32; 3];
        for l in &lights {
            let ndl = nrm[0] * l.direction[0] + nrm[1] * l.direction[1] + nrm[2] * l.direction[2];
            if ndl <= 0.0 {
                continue;
            }
            for c in 0..3 {
                acc[c] += l.color[c] * ndl;
            }
            if shiny[region_of[i]] {
                let rdv = (2.0 * ndl * nrm[2] - l.direction[2]).max(0.0);
                let p = params.specular_strength * rdv.powf(params.shininess);
                for c in 0..3 {
                    lobe[c] += l.color[c] * p;
                }
            }
        }
        for c in 0..3 {
            shading[c * npx + i] = acc[c];
            spec[c * npx + i] = lobe[c];
        }
    }
    let mut albedo = vec![0.0f32; 3 * npx];
    for i in 0..npx {
        for c in 0..3 {
            albedo[c * npx + i] = colors[region_of[i]][c];
        }
    }

    // Exposure: keep the image below 1 unless this scene is forced to clip,
    // in which case the diffuse peak lands in [1.2, 1.8].
    let forced = rng.random::<f32>() < params.clip_probability;
    let peak_diffuse = (0..3 * npx).map(|j| albedo[j] * shading[j]).fold(0.0f32, f32::max);
    let peak_total = (0..3 * npx)
        .map(|j| albedo[j] * shading[j] + spec[j])
        .fold(0.0f32, f32::max);
    let gain = if forced {
        rng.random_range(1.2f32..1.8) / peak_diffuse
    } else {
        rng.random_range(0.6f32..0.95) / peak_total
    };
    for v in shading.iter_mut().chain(spec.iter_mut()) {
        *v *= gain;
    }
    for l in &mut lights {
        l.color = l.color.map(|c| c * gain);
    }

    let albedo = LinearImage::from_vec(n, n, 3, ColorSpace::Linear, albedo)?;
    let shading = LinearImage::from_vec(n, n, 3, ColorSpace::Linear, shading)?;
    let mut image = vec![0.0f32; 3 * npx];
    let mut specular_mask = vec![0.0f32; npx];
    let mut clipped_mask = vec![0.0f32; npx];
    for j in 0..3 * npx {
        let diffuse = albedo.data()[j] * shading.data()[j];
        image[j] = (diffuse + spec[j]).clamp(0.0, 1.0);
        if spec[j] > 0.0 {
            specular_mask[j % npx] = 1.0;
        }
        if diffuse > 1.0 {
            clipped_mask[j % npx] = 1.0;
        }
    }
    let image = LinearImage::from_vec(n, n, 3, ColorSpace::Linear, image)?;
    let components = IntrinsicComponents::from_diffuse(image, albedo, shading)?;
    Ok(SceneGT {
        components,
        specular_mask: LinearImage::from_vec(n, n, 1, ColorSpace::Data, specular_mask)?,
        clipped_mask: LinearImage::from_vec(n, n, 1, ColorSpace::Data, clipped_mask)?,
        lights,
        seed,
    })
}

/// Ground-truth targets of every pipeline stage for one decomposition.
pub fn make_targets(components: &IntrinsicComponents) -> Result<SceneTargets> {
    let rgb_shading = divide(&components.image, &components.albedo, EPS)?;
    let (_, chroma) = shading_to_chroma(&rgb_shading, EPS)?;
    let inverse_diffuse = inverse_shading(&components.shading)?;
    let (gray_albedo, gray_shading) = grayscale_oracle(&components.image, &components.albedo, EPS)?;
    Ok(SceneTargets {
        chroma,
        inverse_diffuse,
        gray_shading,
        gray_albedo,
    })
}
