//! Grayscale rasters, bilinear resampling, lattice warping and the SAD
//! objective.

use crate::error::{Error, Result};
use crate::ffd::{map_point, ControlLattice, FieldEvaluator};
use crate::genome::{decode_genome, EncodingSpec, Genome};
use crate::Vec2;

/// Row-major grayscale raster with intensities in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    w: usize,
    h: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(w: usize, h: usize, data: Vec<f64>) -> Result<Self> {
        if w == 0 || h == 0 {
            return Err(Error::Dimension(format!("image size {w}x{h} must be positive")));
        }
        if data.len() != w * h {
            return Err(Error::Dimension(format!(
                "{w}x{h} image needs {} values, got {}",
                w * h,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Dimension(format!("intensity {bad} outside [0, 1]")));
        }
        Ok(GrayImage { w, h, data })
    }

    pub fn filled(w: usize, h: usize, value: f64) -> Result<Self> {
        GrayImage::new(w, h, vec![value; w * h])
    }

    /// From 8-bit samples, scaled by 1/255.
    pub fn from_u8(w: usize, h: usize, bytes: &[u8]) -> Result<Self> {
        GrayImage::new(w, h, bytes.iter().map(|&b| b as f64 / 255.0).collect())
    }

    pub fn to_u8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect()
    }

    pub fn from_fn<F: FnMut(usize, usize) -> f64>(w: usize, h: usize, mut f: F) -> Result<Self> {
        let mut data = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                data.push(f(x, y));
            }
        }
        GrayImage::new(w, h, data)
    }

    pub fn width(&self) -> usize {
        self.w
    }

    pub fn height(&self) -> usize {
        self.h
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.w + x]
    }

    fn same_dims(&self, other: &GrayImage) -> Result<()> {
        if self.w != other.w || self.h != other.h {
            return Err(Error::Dimension(format!(
                "{}x{} vs {}x{}",
                self.w, self.h, other.w, other.h
            )));
        }
        Ok(())
    }
}

/// Bilinear interpolation with clamp-to-edge addressing.
#[inline]
pub fn sample_bilinear(img: &GrayImage, p: Vec2) -> f64 {
    let max_x = (img.w - 1) as f64;
    let max_y = (img.h - 1) as f64;
    // NaN clamps to NaN; treat it as the origin.
    let x = if p[0].is_nan() { 0.0 } else { p[0].clamp(0.0, max_x) };
    let y = if p[1].is_nan() { 0.0 } else { p[1].clamp(0.0, max_y) };
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let (x0, y0) = (x0 as usize, y0 as usize);
    let x1 = (x0 + 1).min(img.w - 1);
    let y1 = (y0 + 1).min(img.h - 1);
    let top = img.get(x0, y0) * (1.0 - fx) + img.get(x1, y0) * fx;
    let bottom = img.get(x0, y1) * (1.0 - fx) + img.get(x1, y1) * fx;
    top * (1.0 - fy) + bottom * fy
}

fn check_lattice(source: &GrayImage, lat: &ControlLattice) -> Result<()> {
    let s = lat.spec();
    if s.w != source.w || s.h != source.h {
        return Err(Error::Dimension(format!(
            "lattice covers {}x{} but image is {}x{}",
            s.w, s.h, source.w, source.h
        )));
    }
    Ok(())
}

/// Backward warp: every output pixel `x` takes the source value at
/// `map_point(x)`.
pub fn warp(source: &GrayImage, lat: &ControlLattice) -> Result<GrayImage> {
    check_lattice(source, lat)?;
    let eval = FieldEvaluator::new(*lat.spec(), source.w, source.h);
    let mut data = Vec::with_capacity(source.w * source.h);
    eval.for_each(lat.displacements(), |x, y, d| {
        data.push(sample_bilinear(source, [x as f64 + d[0], y as f64 + d[1]]));
    });
    Ok(GrayImage {
        w: source.w,
        h: source.h,
        data,
    })
}

/// Reference warp through [`map_point`], one pixel at a time.
pub fn warp_pointwise(source: &GrayImage, lat: &ControlLattice) -> Result<GrayImage> {
    check_lattice(source, lat)?;
    GrayImage::from_fn(source.w, source.h, |x, y| {
        let q = map_point([x as f64, y as f64], lat).expect("pixel centers lie inside the domain");
        sample_bilinear(source, q)
    })
}

pub fn sad(a: &GrayImage, b: &GrayImage) -> Result<f64> {
    a.same_dims(b)?;
    Ok(a.data.iter().zip(&b.data).map(|(x, y)| (x - y).abs()).sum())
}

/// SAD between the target and the source warped by `baseline + decode(genome)`.
pub fn objective(
    genome: &Genome,
    source: &GrayImage,
    target: &GrayImage,
    enc: &EncodingSpec,
    baseline: &ControlLattice,
) -> Result<f64> {
    RegistrationObjective::new(source, target, baseline.clone(), *enc)?.eval(genome)
}

/// The SAD objective with its warp weights precomputed, for repeated
/// evaluation over one pyramid level.
#[derive(Clone, Debug)]
pub struct RegistrationObjective<'a> {
    source: &'a GrayImage,
    target: &'a GrayImage,
    baseline: ControlLattice,
    enc: EncodingSpec,
    evaluator: FieldEvaluator,
}

impl<'a> RegistrationObjective<'a> {
    pub fn new(
        source: &'a GrayImage,
        target: &'a GrayImage,
        baseline: ControlLattice,
        enc: EncodingSpec,
    ) -> Result<Self> {
        source.same_dims(target)?;
        check_lattice(source, &baseline)?;
        let evaluator = FieldEvaluator::new(*baseline.spec(), source.w, source.h);
        Ok(RegistrationObjective {
            source,
            target,
            baseline,
            enc,
            evaluator,
        })
    }

    pub fn baseline(&self) -> &ControlLattice {
        &self.baseline
    }

    /// `baseline + decode(genome)`.
    pub fn lattice(&self, genome: &Genome) -> Result<ControlLattice> {
        let residual = decode_genome(genome, &self.enc, self.baseline.spec().node_count())?;
        self.baseline.add(&residual)
    }

    pub fn eval(&self, genome: &Genome) -> Result<f64> {
        let lat = self.lattice(genome)?;
        Ok(self.eval_lattice(&lat))
    }

    /// SAD of the warp by `lat`, which must share the baseline's spec.
    pub fn eval_lattice(&self, lat: &ControlLattice) -> f64 {
        let mut total = 0.0;
        let target = &self.target.data;
        let w = self.source.w;
        self.evaluator.for_each(lat.displacements(), |x, y, d| {
            let v = sample_bilinear(self.source, [x as f64 + d[0], y as f64 + d[1]]);
            total += (v - target[y * w + x]).abs();
        });
        total
    }
}
