//! Procedural ground-truth-factor dataset.
//!
//! Images are rendered on demand from a factor tuple; rendering is a pure
//! function of `(DatasetSpec, FactorTuple)`, so the dataset needs no storage
//! and every metric can rely on exact factor labels. The default space has
//! five independent discrete factors:
//!
//! | factor      | cardinality | realization                          |
//! |-------------|-------------|--------------------------------------|
//! | shape       | 3           | ellipse, triangle, blob              |
//! | scale       | 6           | half-extent 0.55..1.0 of the base    |
//! | orientation | 8           | 0..160 degrees in equal steps        |
//! | pos_x       | 16          | horizontal center position           |
//! | pos_y       | 16          | vertical center position             |
//!
//! Orientation deliberately stops short of 180 degrees and none of the
//! shapes has a rotational self-symmetry inside that range, so every factor
//! tuple renders to a distinct image.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FACTOR_NAMES: [&str; 5] = ["shape", "scale", "orientation", "pos_x", "pos_y"];
pub const DEFAULT_CARDINALITIES: [usize; 5] = [3, 6, 8, 16, 16];

/// Names and cardinalities of the ground-truth generative factors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorSpace {
    pub names: Vec<String>,
    pub cardinalities: Vec<usize>,
}

impl FactorSpace {
    pub fn new(names: Vec<String>, cardinalities: Vec<usize>) -> Result<Self> {
        if names.len() != cardinalities.len() {
            return Err(Error::Config(format!(
                "factor space has {} names but {} cardinalities",
                names.len(),
                cardinalities.len()
            )));
        }
        if names.len() < 2 {
            return Err(Error::Config("factor space needs at least 2 factors".into()));
        }
        if let Some(c) = cardinalities.iter().find(|&&c| c < 2) {
            return Err(Error::Config(format!("factor cardinality {c} < 2")));
        }
        Ok(Self { names, cardinalities })
    }

    /// Number of factors.
    pub fn num_factors(&self) -> usize {
        self.names.len()
    }

    /// Total number of factor configurations (product of cardinalities).
    pub fn num_configurations(&self) -> usize {
        self.cardinalities.iter().product()
    }

    /// Entropy of a uniform factor in nats.
    pub fn factor_entropy(&self, k: usize) -> f64 {
        (self.cardinalities[k] as f64).ln()
    }
}

impl Default for FactorSpace {
    fn default() -> Self {
        Self {
            names: FACTOR_NAMES.iter().map(|s| s.to_string()).collect(),
            cardinalities: DEFAULT_CARDINALITIES.to_vec(),
        }
    }
}

/// One concrete factor configuration.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FactorTuple {
    pub values: Vec<usize>,
}

impl FactorTuple {
    pub fn new(values: Vec<usize>) -> Self {
        Self { values }
    }

    pub fn validate(&self, space: &FactorSpace) -> Result<()> {
        if self.values.len() != space.num_factors() {
            return Err(Error::Domain(format!(
                "factor tuple has {} entries, space has {} factors",
                self.values.len(),
                space.num_factors()
            )));
        }
        for (k, (&v, &c)) in self.values.iter().zip(&space.cardinalities).enumerate() {
            if v >= c {
                return Err(Error::Domain(format!(
                    "factor {k} value {v} out of range 0..{c}"
                )));
            }
        }
        Ok(())
    }
}

/// A single rendered grayscale image with intensities in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<f32>,
}

impl Observation {
    pub fn num_pixels(&self) -> usize {
        self.pixels.len()
    }
}

/// Static description of a dataset: image size, factor space, and the seed
/// for the fixed procedural rendering constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    #[serde(default = "default_image_size")]
    pub image_size: usize,
    #[serde(default)]
    pub factor_space: FactorSpace,
    #[serde(default)]
    pub render_seed: u64,
}

fn default_image_size() -> usize {
    32
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            image_size: 32,
            factor_space: FactorSpace::default(),
            render_seed: 0,
        }
    }
}

const NUM_SHAPES: usize = 3;
const ORIENTATION_SPAN_DEG: f64 = 160.0;

/// Fixed rendering constants derived from the render seed. The seed jitters
/// the shape proportions slightly; it never introduces per-call randomness.
#[derive(Debug, Clone)]
struct RenderConstants {
    ellipse_aspect: f64,
    tri_apex: f64,
    tri_base: f64,
    tri_half_width: f64,
    blob_core: f64,
    blob_bulge: f64,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

impl RenderConstants {
    fn from_seed(seed: u64) -> Self {
        let mut s = seed;
        // jitter in [-1, 1], scaled to keep shapes well inside safe ranges
        let mut jitter = |scale: f64| {
            let u = (splitmix64(&mut s) >> 11) as f64 / (1u64 << 53) as f64;
            (2.0 * u - 1.0) * scale
        };
        Self {
            ellipse_aspect: 0.60 + jitter(0.05),
            tri_apex: 1.00 + jitter(0.05),
            tri_base: 0.72 + jitter(0.04),
            tri_half_width: 0.88 + jitter(0.05),
            blob_core: 0.65 + jitter(0.04),
            blob_bulge: 0.35 + jitter(0.03),
        }
    }
}

/// Immutable dataset handle. Rendering and sampling are safe to call from
/// multiple threads; callers supply their own rng streams.
#[derive(Debug, Clone)]
pub struct GroundTruthDataset {
    spec: DatasetSpec,
    consts: RenderConstants,
    base_radius: f64,
    margin: f64,
}

/// Validates the spec and builds a dataset handle. Rendering is pure, so the
/// handle holds only the derived constants.
pub fn build_dataset(spec: DatasetSpec) -> Result<GroundTruthDataset> {
    if spec.image_size != 32 && spec.image_size != 64 {
        return Err(Error::Config(format!(
            "image_size must be 32 or 64, got {}",
            spec.image_size
        )));
    }
    let space = FactorSpace::new(spec.factor_space.names.clone(), spec.factor_space.cardinalities.clone())?;
    if space.num_factors() != 5 {
        return Err(Error::Config(format!(
            "the shapes renderer expects the 5-factor space {FACTOR_NAMES:?}, got {} factors",
            space.num_factors()
        )));
    }
    if space.cardinalities[0] > NUM_SHAPES {
        return Err(Error::Config(format!(
            "shape cardinality {} exceeds the {} available shapes",
            space.cardinalities[0], NUM_SHAPES
        )));
    }
    let h = spec.image_size as f64;
    let base_radius = 0.14 * h;
    let margin = base_radius + 1.5;
    Ok(GroundTruthDataset {
        consts: RenderConstants::from_seed(spec.render_seed),
        spec,
        base_radius,
        margin,
    })
}

impl GroundTruthDataset {
    pub fn spec(&self) -> &DatasetSpec {
        &self.spec
    }

    pub fn factor_space(&self) -> &FactorSpace {
        &self.spec.factor_space
    }

    pub fn image_size(&self) -> usize {
        self.spec.image_size
    }

    pub fn num_configurations(&self) -> usize {
        self.spec.factor_space.num_configurations()
    }

    /// Renders the observation for one factor tuple. Deterministic; distinct
    /// tuples yield distinct images on the default grid.
    pub fn render(&self, factors: &FactorTuple) -> Result<Observation> {
        factors.validate(&self.spec.factor_space)?;
        let size = self.spec.image_size;
        let cards = &self.spec.factor_space.cardinalities;
        let v = &factors.values;

        let sigma = 0.55 + 0.45 * frac(v[1], cards[1]);
        let theta = (v[2] as f64) * (ORIENTATION_SPAN_DEG / cards[2] as f64) * std::f64::consts::PI / 180.0;
        let span = size as f64 - 2.0 * self.margin;
        let cx = self.margin + frac(v[3], cards[3]) * span;
        let cy = self.margin + frac(v[4], cards[4]) * span;

        let radius = self.base_radius * sigma;
        let (sin_t, cos_t) = theta.sin_cos();

        let mut pixels = vec![0.0f32; size * size];
        for py in 0..size {
            let dy = (py as f64 + 0.5) - cy;
            for px in 0..size {
                let dx = (px as f64 + 0.5) - cx;
                // rotate into shape coordinates and normalize by the radius
                let xr = (cos_t * dx + sin_t * dy) / radius;
                let yr = (-sin_t * dx + cos_t * dy) / radius;
                let d_unit = self.shape_distance(v[0], xr, yr);
                let d_px = d_unit * radius;
                pixels[py * size + px] = (0.5 - d_px).clamp(0.0, 1.0) as f32;
            }
        }
        Ok(Observation {
            height: size,
            width: size,
            pixels,
        })
    }

    /// Approximate signed distance (negative inside) in unit shape
    /// coordinates, half-extent about 1.
    fn shape_distance(&self, shape: usize, x: f64, y: f64) -> f64 {
        let c = &self.consts;
        match shape {
            0 => {
                // ellipse, semi-axes (1, aspect); scaled implicit distance
                let q = (x * x + (y / c.ellipse_aspect) * (y / c.ellipse_aspect)).sqrt();
                (q - 1.0) * c.ellipse_aspect
            }
            1 => sd_triangle(
                x,
                y,
                (0.0, -c.tri_apex),
                (c.tri_half_width, c.tri_base),
                (-c.tri_half_width, c.tri_base),
            ),
            2 => {
                // limacon blob r(phi) = core + bulge*cos(phi)
                let rho = (x * x + y * y).sqrt();
                let phi = y.atan2(x);
                rho - (c.blob_core + c.blob_bulge * phi.cos())
            }
            _ => f64::INFINITY,
        }
    }

    /// Samples `n` factor tuples i.i.d. uniform over the configuration grid.
    pub fn sample_factors<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<FactorTuple> {
        let cards = &self.spec.factor_space.cardinalities;
        (0..n)
            .map(|_| FactorTuple::new(cards.iter().map(|&c| rng.gen_range(0..c)).collect()))
            .collect()
    }

    /// Samples `n` factor tuples that all share one uniformly chosen value of
    /// factor `k`; the other factors stay i.i.d. uniform.
    pub fn sample_fixed_factor<R: Rng>(
        &self,
        k: usize,
        n: usize,
        rng: &mut R,
    ) -> Result<(usize, Vec<FactorTuple>)> {
        let cards = &self.spec.factor_space.cardinalities;
        if k >= cards.len() {
            return Err(Error::Domain(format!(
                "factor index {k} out of range for {} factors",
                cards.len()
            )));
        }
        let value = rng.gen_range(0..cards[k]);
        let tuples = (0..n)
            .map(|_| {
                let values = cards
                    .iter()
                    .enumerate()
                    .map(|(i, &c)| if i == k { value } else { rng.gen_range(0..c) })
                    .collect();
                FactorTuple::new(values)
            })
            .collect();
        Ok((value, tuples))
    }

    /// Iterates the full configuration grid in lexicographic order.
    pub fn iter_grid(&self) -> GridIter<'_> {
        GridIter {
            cards: &self.spec.factor_space.cardinalities,
            next: Some(vec![0; self.spec.factor_space.num_factors()]),
        }
    }

    /// Writes one PNG per factor tuple plus a `factors.csv` index.
    pub fn dump_pngs(&self, out_dir: &Path) -> Result<usize> {
        std::fs::create_dir_all(out_dir)?;
        let mut index = std::io::BufWriter::new(std::fs::File::create(out_dir.join("factors.csv"))?);
        write!(index, "filename")?;
        for k in 0..self.factor_space().num_factors() {
            write!(index, ",f{k}")?;
        }
        writeln!(index)?;

        let size = self.spec.image_size as u32;
        let mut count = 0usize;
        for tuple in self.iter_grid() {
            let obs = self.render(&tuple)?;
            let buf: Vec<u8> = obs
                .pixels
                .iter()
                .map(|&p| (p * 255.0).round().clamp(0.0, 255.0) as u8)
                .collect();
            let img = image::GrayImage::from_raw(size, size, buf)
                .expect("pixel buffer matches image dimensions");
            let name = format!(
                "obs_{}.png",
                tuple
                    .values
                    .iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join("_")
            );
            img.save(out_dir.join(&name))
                .map_err(|e| Error::Io(std::io::Error::other(e)))?;
            write!(index, "{name}")?;
            for v in &tuple.values {
                write!(index, ",{v}")?;
            }
            writeln!(index)?;
            count += 1;
        }
        index.flush()?;
        Ok(count)
    }
}

fn frac(i: usize, card: usize) -> f64 {
    if card <= 1 {
        0.0
    } else {
        i as f64 / (card - 1) as f64
    }
}

/// Exact signed distance to a triangle (negative inside).
fn sd_triangle(px: f64, py: f64, a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    let e0 = (b.0 - a.0, b.1 - a.1);
    let e1 = (c.0 - b.0, c.1 - b.1);
    let e2 = (a.0 - c.0, a.1 - c.1);
    let v0 = (px - a.0, py - a.1);
    let v1 = (px - b.0, py - b.1);
    let v2 = (px - c.0, py - c.1);

    let seg = |v: (f64, f64), e: (f64, f64)| {
        let t = ((v.0 * e.0 + v.1 * e.1) / (e.0 * e.0 + e.1 * e.1)).clamp(0.0, 1.0);
        let d = (v.0 - e.0 * t, v.1 - e.1 * t);
        d.0 * d.0 + d.1 * d.1
    };
    let d0 = seg(v0, e0);
    let d1 = seg(v1, e1);
    let d2 = seg(v2, e2);

    let cross = |u: (f64, f64), w: (f64, f64)| u.0 * w.1 - u.1 * w.0;
    let s = cross(e0, e2).signum();
    let inside = s * cross(v0, e0) >= 0.0 && s * cross(v1, e1) >= 0.0 && s * cross(v2, e2) >= 0.0;
    let dist = d0.min(d1).min(d2).sqrt();
    if inside {
        -dist
    } else {
        dist
    }
}

pub struct GridIter<'a> {
    cards: &'a [usize],
    next: Option<Vec<usize>>,
}

impl Iterator for GridIter<'_> {
    type Item = FactorTuple;

    fn next(&mut self) -> Option<FactorTuple> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut k = self.cards.len();
        loop {
            if k == 0 {
                break; // wrapped past the most significant digit: done
            }
            k -= 1;
            succ[k] += 1;
            if succ[k] < self.cards[k] {
                self.next = Some(succ);
                break;
            }
            succ[k] = 0;
        }
        Some(FactorTuple::new(current))
    }
}
