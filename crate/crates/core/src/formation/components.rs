use std::fs;
use std::path::Path;

use super::{compute_residual, diffuse_image, inverse_shading, ChromaMap};
use crate::error::{Error, Result};
use crate::image::{read_iidf, write_iidf, ColorSpace, LinearImage};
use crate::kv::KvDoc;

/// File listing the components of a saved decomposition.
pub const COMPONENTS_MANIFEST: &str = "components.txt";

/// Role of one saved component map; doubles as its default file stem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComponentRole {
    Image,
    Albedo,
    Shading,
    Residual,
    GrayShading,
    GrayAlbedo,
    Chroma,
    ApproxAlbedo,
    ApproxShading,
    RgbShading,
    InverseShading,
}

impl ComponentRole {
    pub const ALL: [ComponentRole; 11] = [
        ComponentRole::Image,
        ComponentRole::Albedo,
        ComponentRole::Shading,
        ComponentRole::Residual,
        ComponentRole::GrayShading,
        ComponentRole::GrayAlbedo,
        ComponentRole::Chroma,
        ComponentRole::ApproxAlbedo,
        ComponentRole::ApproxShading,
        ComponentRole::RgbShading,
        ComponentRole::InverseShading,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ComponentRole::Image => "image",
            ComponentRole::Albedo => "albedo",
            ComponentRole::Shading => "shading",
            ComponentRole::Residual => "residual",
            ComponentRole::GrayShading => "gray_shading",
            ComponentRole::GrayAlbedo => "gray_albedo",
            ComponentRole::Chroma => "chroma",
            ComponentRole::ApproxAlbedo => "approx_albedo",
            ComponentRole::ApproxShading => "approx_shading",
            ComponentRole::RgbShading => "rgb_shading",
            ComponentRole::InverseShading => "inverse_shading",
        }
    }

    pub fn default_file(self) -> String {
        format!("{}.iidf", self.name())
    }
}

/// A decomposition `I = A_d * S_d + R` with optional pipeline intermediates.
#[derive(Debug, Clone, PartialEq)]
pub struct IntrinsicComponents {
    pub image: LinearImage,
    pub albedo: LinearImage,
    pub shading: LinearImage,
    pub residual: LinearImage,
    pub gray_shading: Option<LinearImage>,
    pub gray_albedo: Option<LinearImage>,
    /// Chroma at whatever resolution it was estimated.
    pub chroma: Option<ChromaMap>,
    pub approx_albedo: Option<LinearImage>,
    pub approx_shading: Option<LinearImage>,
    pub rgb_shading: Option<LinearImage>,
    pub inverse_shading: Option<LinearImage>,
}

impl IntrinsicComponents {
    /// Builds the triple, defining the residual as the remainder.
    pub fn from_diffuse(image: LinearImage, albedo: LinearImage, shading: LinearImage) -> Result<Self> {
        image.ensure_channels(3, "image")?;
        albedo.ensure_channels(3, "albedo")?;
        shading.ensure_channels(3, "shading")?;
        let residual = compute_residual(&image, &albedo, &shading)?;
        Ok(Self {
            image,
            albedo,
            shading,
            residual,
            gray_shading: None,
            gray_albedo: None,
            chroma: None,
            approx_albedo: None,
            approx_shading: None,
            rgb_shading: None,
            inverse_shading: None,
        })
    }

    pub fn width(&self) -> usize {
        self.image.width()
    }

    pub fn height(&self) -> usize {
        self.image.height()
    }

    pub fn diffuse(&self) -> Result<LinearImage> {
        diffuse_image(&self.albedo, &self.shading)
    }

    /// Largest violation of `I = A_d * S_d + R`.
    pub fn residual_identity_error(&self) -> Result<f32> {
        let d = self.diffuse()?;
        let recon = d.zip_map(&self.residual, ColorSpace::Data, |a, b| a + b)?;
        Ok(recon.max_abs_diff(&self.image))
    }

    /// Checks the formation identities that the present maps must satisfy.
    /// Product identities are only checked where the divisor is at least `eps`.
    pub fn validate(&self, tol: f32, eps: f32) -> Result<()> {
        let err = self.residual_identity_error()?;
        if err > tol {
            return Err(Error::Domain(format!("I != A_d*S_d + R (max error {err})")));
        }
        let check_product = |a: &LinearImage, s: &LinearImage, what: &str| -> Result<()> {
            let p = diffuse_image(a, s)?;
            let sp = |c: usize| if s.channels() == 1 { 0 } else { c };
            for c in 0..3 {
                for i in 0..p.pixels() {
                    if s.plane(sp(c))[i] >= eps && (p.plane(c)[i] - self.image.plane(c)[i]).abs() > tol.max(1e-5) {
                        return Err(Error::Domain(format!("{what} identity violated at pixel {i}")));
                    }
                }
            }
            Ok(())
        };
        if let (Some(a), Some(s)) = (&self.gray_albedo, &self.gray_shading) {
            check_product(a, s, "grayscale")?;
        }
        if let (Some(a), Some(s)) = (&self.approx_albedo, &self.approx_shading) {
            check_product(a, s, "rgb")?;
        }
        if let Some(d) = &self.inverse_shading {
            let expected = inverse_shading(&self.shading)?;
            let e = expected.max_abs_diff(d);
            if e > tol {
                return Err(Error::Domain(format!("D != 1/(S_d+1) (max error {e})")));
            }
        }
        Ok(())
    }

    fn maps(&self) -> Vec<(ComponentRole, &LinearImage)> {
        let mut out = vec![
            (ComponentRole::Image, &self.image),
            (ComponentRole::Albedo, &self.albedo),
            (ComponentRole::Shading, &self.shading),
            (ComponentRole::Residual, &self.residual),
        ];
        let optional = [
            (ComponentRole::GrayShading, self.gray_shading.as_ref()),
            (ComponentRole::GrayAlbedo, self.gray_albedo.as_ref()),
            (ComponentRole::Chroma, self.chroma.as_ref().map(|c| c.image())),
            (ComponentRole::ApproxAlbedo, self.approx_albedo.as_ref()),
            (ComponentRole::ApproxShading, self.approx_shading.as_ref()),
            (ComponentRole::RgbShading, self.rgb_shading.as_ref()),
            (ComponentRole::InverseShading, self.inverse_shading.as_ref()),
        ];
        out.extend(optional.into_iter().filter_map(|(r, m)| m.map(|m| (r, m))));
        out
    }

    /// Writes every present map as `<role>.iidf` plus a `components.txt`
    /// manifest of `role = file` lines.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut doc = KvDoc::new();
        for (role, map) in self.maps() {
            let file = role.default_file();
            write_iidf(map, &dir.join(&file))?;
            doc.push(role.name(), file);
        }
        doc.save(&dir.join(COMPONENTS_MANIFEST), "intrinsic components: role = file")
    }

    /// Loads a component directory. Without a manifest, default file names
    /// are used; image, albedo and shading are required. A missing residual
    /// is recomputed as the remainder.
    pub fn load(dir: &Path) -> Result<Self> {
        let manifest = dir.join(COMPONENTS_MANIFEST);
        let doc = if manifest.exists() {
            Some(KvDoc::load(&manifest)?)
        } else {
            None
        };
        let load = |role: ComponentRole| -> Result<Option<LinearImage>> {
            let file = match &doc {
                Some(d) => match d.get(role.name()) {
                    Some(f) => f.to_string(),
                    None => return Ok(None),
                },
                None => role.default_file(),
            };
            let path = dir.join(file);
            if doc.is_none() && !path.exists() {
                return Ok(None);
            }
            read_iidf(&path).map(Some)
        };
        let need = |role: ComponentRole| -> Result<LinearImage> {
            load(role)?.ok_or_else(|| Error::format(dir, format!("missing required component `{}`", role.name())))
        };
        let image = need(ComponentRole::Image)?;
        let albedo = need(ComponentRole::Albedo)?;
        let shading = need(ComponentRole::Shading)?;
        let mut comps = Self::from_diffuse(image, albedo, shading)?;
        if let Some(r) = load(ComponentRole::Residual)? {
            comps.image.ensure_dims(&r, "residual")?;
            comps.residual = r;
        }
        comps.gray_shading = load(ComponentRole::GrayShading)?;
        comps.gray_albedo = load(ComponentRole::GrayAlbedo)?;
        comps.chroma = load(ComponentRole::Chroma)?.map(ChromaMap::new).transpose()?;
        comps.approx_albedo = load(ComponentRole::ApproxAlbedo)?;
        comps.approx_shading = load(ComponentRole::ApproxShading)?;
        comps.rgb_shading = load(ComponentRole::RgbShading)?;
        comps.inverse_shading = load(ComponentRole::InverseShading)?;
        Ok(comps)
    }
}
