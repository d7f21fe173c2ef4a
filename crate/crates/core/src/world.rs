//! Synthetic world with planted dimensional roles.
//!
//! Continents are lon/lat rectangles split into a grid of cells, each cell
//! holding a mixture over the 11 classes. Every embedding dimension has one
//! planted role: a specialist for one class, shared by a set of classes, or
//! pure noise. Feature `j` of a sample is `shift + N(0, sigma)` where the
//! shift is `signal_strength * sigma` if the sample's class is in the role's
//! class set and zero otherwise.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::data::{DimensionId, EmbeddingSample, LandCoverClass, N_CLASSES, N_DIMS};
use crate::error::{Error, Result};
use crate::rng::{self, Stream};

pub const MIN_ROI_SIDE: f64 = 0.1;
pub const MAX_ROI_SIDE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoleKind {
    Specialist,
    Shared,
    Noise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantedRole {
    pub dimension: DimensionId,
    pub role: RoleKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub classes: Vec<LandCoverClass>,
    /// Mean shift in units of the noise standard deviation.
    #[serde(default)]
    pub signal_strength: f64,
}

impl PlantedRole {
    pub fn specialist(dim: usize, class: LandCoverClass, signal_strength: f64) -> Self {
        PlantedRole {
            dimension: DimensionId::new(dim).expect("dimension in range"),
            role: RoleKind::Specialist,
            classes: vec![class],
            signal_strength,
        }
    }

    pub fn shared(dim: usize, classes: &[LandCoverClass], signal_strength: f64) -> Self {
        PlantedRole {
            dimension: DimensionId::new(dim).expect("dimension in range"),
            role: RoleKind::Shared,
            classes: classes.to_vec(),
            signal_strength,
        }
    }

    pub fn noise(dim: usize) -> Self {
        PlantedRole {
            dimension: DimensionId::new(dim).expect("dimension in range"),
            role: RoleKind::Noise,
            classes: Vec::new(),
            signal_strength: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        let dim = self.dimension;
        let distinct: BTreeSet<_> = self.classes.iter().collect();
        if distinct.len() != self.classes.len() {
            return Err(Error::config(format!("{dim}: duplicate classes in role")));
        }
        match self.role {
            RoleKind::Specialist if self.classes.len() != 1 => {
                Err(Error::config(format!("{dim}: a specialist needs exactly one class")))
            }
            RoleKind::Shared if self.classes.len() < 2 => {
                Err(Error::config(format!("{dim}: a shared role needs at least two classes")))
            }
            RoleKind::Noise if !self.classes.is_empty() => {
                Err(Error::config(format!("{dim}: a noise role takes no classes")))
            }
            RoleKind::Specialist | RoleKind::Shared
                if !(self.signal_strength > 0.0 && self.signal_strength.is_finite()) =>
            {
                Err(Error::config(format!("{dim}: signal_strength must be positive")))
            }
            _ => Ok(()),
        }
    }

    fn class_mask(&self) -> u16 {
        self.classes.iter().fold(0, |m, c| m | c.bit())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Continent {
    pub name: String,
    pub lon_min: f64,
    pub lon_max: f64,
    pub lat_min: f64,
    pub lat_max: f64,
    pub grid_cols: usize,
    pub grid_rows: usize,
    /// Row-major cell mixtures, `grid_rows * grid_cols` entries, each a
    /// weight per class in canonical class order.
    pub cells: Vec<[f64; N_CLASSES]>,
}

impl Continent {
    fn cell_width(&self) -> f64 {
        (self.lon_max - self.lon_min) / self.grid_cols as f64
    }

    fn cell_height(&self) -> f64 {
        (self.lat_max - self.lat_min) / self.grid_rows as f64
    }

    /// Bounds of cell `(row, col)` as `(lon_min, lon_max, lat_min, lat_max)`.
    fn cell_bounds(&self, row: usize, col: usize) -> (f64, f64, f64, f64) {
        let (w, h) = (self.cell_width(), self.cell_height());
        let lon0 = self.lon_min + col as f64 * w;
        let lat0 = self.lat_min + row as f64 * h;
        (lon0, lon0 + w, lat0, lat0 + h)
    }

    fn validate(&self) -> Result<()> {
        let name = &self.name;
        let in_range = (-180.0..=180.0).contains(&self.lon_min)
            && (-180.0..=180.0).contains(&self.lon_max)
            && (-90.0..=90.0).contains(&self.lat_min)
            && (-90.0..=90.0).contains(&self.lat_max);
        if !in_range || self.lon_min >= self.lon_max || self.lat_min >= self.lat_max {
            return Err(Error::config(format!("continent {name}: bounds outside [-180,180]x[-90,90] or empty")));
        }
        if self.grid_cols == 0 || self.grid_rows == 0 {
            return Err(Error::config(format!("continent {name}: grid must be at least 1x1")));
        }
        if self.cells.len() != self.grid_cols * self.grid_rows {
            return Err(Error::config(format!(
                "continent {name}: expected {} cells, found {}",
                self.grid_cols * self.grid_rows,
                self.cells.len()
            )));
        }
        for (i, cell) in self.cells.iter().enumerate() {
            if cell.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
                return Err(Error::config(format!("continent {name} cell {i}: negative or non-finite weight")));
            }
            let sum: f64 = cell.iter().sum();
            if (sum - 1.0).abs() > 1e-6 {
                return Err(Error::config(format!("continent {name} cell {i}: weights sum to {sum}, not 1")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldConfig {
    pub seed: u64,
    pub noise_sigma: f64,
    pub continents: Vec<Continent>,
    pub roles: Vec<PlantedRole>,
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_sigma > 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::config("noise_sigma must be positive"));
        }
        if self.continents.is_empty() {
            return Err(Error::config("world has no continents"));
        }
        for c in &self.continents {
            c.validate()?;
        }
        validate_roles(&self.roles)
    }

    /// Role of every dimension, indexed by dimension.
    pub fn role_table(&self) -> Vec<&PlantedRole> {
        let mut table: Vec<Option<&PlantedRole>> = vec![None; N_DIMS];
        for r in &self.roles {
            table[r.dimension.index()] = Some(r);
        }
        table.into_iter().map(|r| r.expect("validated world covers every dimension")).collect()
    }

    pub fn planted_dimensions(&self, kind: RoleKind) -> Vec<DimensionId> {
        let mut dims: Vec<_> = self.roles.iter().filter(|r| r.role == kind).map(|r| r.dimension).collect();
        dims.sort();
        dims
    }

    /// Class-weight average over every cell of every continent.
    pub fn global_prior(&self) -> [f64; N_CLASSES] {
        let mut prior = [0.0; N_CLASSES];
        let mut n = 0.0;
        for c in &self.continents {
            for cell in &c.cells {
                for (p, w) in prior.iter_mut().zip(cell) {
                    *p += w;
                }
                n += 1.0;
            }
        }
        prior.iter_mut().for_each(|p| *p /= n);
        prior
    }

    /// The stock world: two easy classes with one strong specialist each,
    /// eight typical classes with two specialists each, Shrubland as the
    /// hard class with twelve weak specialists, five shared dimensions and
    /// the remaining dimensions as noise.
    pub fn default_world(seed: u64) -> Self {
        WorldConfig {
            seed,
            noise_sigma: 1.0,
            continents: default_continents(rng::derive(seed, rng::WORLD)),
            roles: default_roles(),
        }
    }
}

pub fn validate_roles(roles: &[PlantedRole]) -> Result<()> {
    let mut seen = [false; N_DIMS];
    for r in roles {
        r.validate()?;
        let i = r.dimension.index();
        if seen[i] {
            return Err(Error::config(format!("dimension {} has more than one role", r.dimension)));
        }
        seen[i] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::config(format!(
            "no planted role for dimension {}",
            DimensionId::new(missing).expect("index in range")
        )));
    }
    Ok(())
}

/// Class-specific signal strengths of the stock world.
pub const EASY_SIGNAL: f64 = 5.0;
pub const TYPICAL_SIGNAL: f64 = 2.5;
pub const HARD_SIGNAL: f64 = 0.8;
pub const SHARED_SIGNAL: f64 = 2.0;

pub const EASY_CLASSES: [LandCoverClass; 2] = [LandCoverClass::PermanentWater, LandCoverClass::SnowIce];
pub const HARD_CLASS: LandCoverClass = LandCoverClass::Shrubland;

fn default_roles() -> Vec<PlantedRole> {
    use LandCoverClass::*;
    // 1-based labels for readability
    let specialists: &[(usize, LandCoverClass, f64)] = &[
        (64, PermanentWater, EASY_SIGNAL),
        (41, SnowIce, EASY_SIGNAL),
        (12, TreeCover, TYPICAL_SIGNAL),
        (50, TreeCover, TYPICAL_SIGNAL),
        (17, Grassland, TYPICAL_SIGNAL),
        (33, Grassland, TYPICAL_SIGNAL),
        (5, Cropland, TYPICAL_SIGNAL),
        (58, Cropland, TYPICAL_SIGNAL),
        (9, BuiltUp, TYPICAL_SIGNAL),
        (35, BuiltUp, TYPICAL_SIGNAL),
        (21, BareSparse, TYPICAL_SIGNAL),
        (46, BareSparse, TYPICAL_SIGNAL),
        (4, HerbaceousWetland, TYPICAL_SIGNAL),
        (27, HerbaceousWetland, TYPICAL_SIGNAL),
        (1, Mangroves, TYPICAL_SIGNAL),
        (39, Mangroves, TYPICAL_SIGNAL),
        (14, MossLichen, TYPICAL_SIGNAL),
        (55, MossLichen, TYPICAL_SIGNAL),
    ];
    let hard = [6, 10, 15, 19, 24, 29, 31, 37, 43, 48, 52, 60];
    let shared: &[(usize, &[LandCoverClass])] = &[
        (7, &[Grassland, Cropland]),
        (2, &[BuiltUp, BareSparse]),
        (23, &[HerbaceousWetland, Mangroves]),
        (44, &[TreeCover, Mangroves, HerbaceousWetland]),
        (3, &[TreeCover, Grassland, Cropland, BareSparse]),
    ];

    let mut roles: Vec<Option<PlantedRole>> = vec![None; N_DIMS];
    for &(label, class, s) in specialists {
        roles[label - 1] = Some(PlantedRole::specialist(label - 1, class, s));
    }
    for label in hard {
        roles[label - 1] = Some(PlantedRole::specialist(label - 1, HARD_CLASS, HARD_SIGNAL));
    }
    for &(label, classes) in shared {
        roles[label - 1] = Some(PlantedRole::shared(label - 1, classes, SHARED_SIGNAL));
    }
    roles
        .into_iter()
        .enumerate()
        .map(|(i, r)| r.unwrap_or_else(|| PlantedRole::noise(i)))
        .collect()
}

fn default_continents(seed: u64) -> Vec<Continent> {
    use LandCoverClass::*;
    // (name, bounds, classes that never occur there)
    let specs: [(&str, [f64; 4], &[LandCoverClass]); 6] = [
        ("North America", [-130.0, -60.0, 15.0, 70.0], &[]),
        ("South America", [-80.0, -35.0, -55.0, 12.0], &[MossLichen]),
        ("Europe", [-10.0, 40.0, 36.0, 70.0], &[Mangroves]),
        ("Africa", [-18.0, 50.0, -35.0, 35.0], &[MossLichen, SnowIce]),
        ("Asia", [60.0, 150.0, 5.0, 70.0], &[]),
        ("Oceania", [113.0, 154.0, -44.0, -10.0], &[SnowIce, MossLichen]),
    ];
    let mut stream = rng::stream(seed);
    specs
        .iter()
        .map(|(name, b, absent)| {
            let (cols, rows) = (4, 4);
            let cells = (0..cols * rows)
                .map(|_| {
                    let mut w = [0.0; N_CLASSES];
                    for (c, weight) in w.iter_mut().enumerate() {
                        let class = LandCoverClass::ALL[c];
                        if absent.contains(&class) || stream.random_bool(0.2) {
                            continue;
                        }
                        *weight = stream.random_range(0.2..1.0);
                    }
                    if w.iter().all(|&x| x == 0.0) {
                        w[TreeCover.id()] = 1.0;
                    }
                    let sum: f64 = w.iter().sum();
                    w.iter_mut().for_each(|x| *x /= sum);
                    w
                })
                .collect();
            Continent {
                name: name.to_string(),
                lon_min: b[0],
                lon_max: b[1],
                lat_min: b[2],
                lat_max: b[3],
                grid_cols: cols,
                grid_rows: rows,
                cells,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Roi {
    pub center_lon: f64,
    pub center_lat: f64,
    pub width: f64,
    pub height: f64,
    pub target_class: LandCoverClass,
    pub continent: usize,
    pub fallback_used: bool,
}

impl Roi {
    fn bounds(&self) -> (f64, f64, f64, f64) {
        (
            self.center_lon - self.width / 2.0,
            self.center_lon + self.width / 2.0,
            self.center_lat - self.height / 2.0,
            self.center_lat + self.height / 2.0,
        )
    }
}

/// Class-presence-guided region selection.
///
/// Picks a continent uniformly, then a cell where `target` has positive
/// weight (weighted by that weight) and a uniform point inside it. When the
/// continent has no such cell the point is uniform over the continent and
/// `fallback_used` is set. Side lengths are uniform in `[0.1, 1.0]` degrees.
pub fn sample_roi(world: &WorldConfig, target: LandCoverClass, stream: &mut Stream) -> Result<Roi> {
    if world.continents.is_empty() {
        return Err(Error::config("world has no continents"));
    }
    let ci = stream.random_range(0..world.continents.len());
    let continent = &world.continents[ci];
    let weights: Vec<f64> = continent.cells.iter().map(|c| c[target.id()]).collect();

    let (center_lon, center_lat, fallback_used) = match WeightedIndex::new(&weights) {
        Ok(dist) => {
            let cell = dist.sample(stream);
            let (lon0, lon1, lat0, lat1) = continent.cell_bounds(cell / continent.grid_cols, cell % continent.grid_cols);
            (uniform_in(stream, lon0, lon1), uniform_in(stream, lat0, lat1), false)
        }
        Err(_) => (
            uniform_in(stream, continent.lon_min, continent.lon_max),
            uniform_in(stream, continent.lat_min, continent.lat_max),
            true,
        ),
    };
    let width = stream.random_range(MIN_ROI_SIDE..=MAX_ROI_SIDE);
    let height = stream.random_range(MIN_ROI_SIDE..=MAX_ROI_SIDE);
    Ok(Roi { center_lon, center_lat, width, height, target_class: target, continent: ci, fallback_used })
}

fn uniform_in(stream: &mut Stream, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        stream.random_range(lo..hi)
    } else {
        lo
    }
}

/// Class mixture under the ROI: overlap-area-weighted mean of the
/// continent cells it covers.
pub fn local_mixture(world: &WorldConfig, roi: &Roi) -> [f64; N_CLASSES] {
    let continent = &world.continents[roi.continent];
    let (a0, a1, b0, b1) = roi.bounds();
    let mut mix = [0.0; N_CLASSES];
    let mut total = 0.0;
    for row in 0..continent.grid_rows {
        for col in 0..continent.grid_cols {
            let (lon0, lon1, lat0, lat1) = continent.cell_bounds(row, col);
            let dx = (a1.min(lon1) - a0.max(lon0)).max(0.0);
            let dy = (b1.min(lat1) - b0.max(lat0)).max(0.0);
            let area = dx * dy;
            if area > 0.0 {
                for (m, w) in mix.iter_mut().zip(&continent.cells[row * continent.grid_cols + col]) {
                    *m += area * w;
                }
                total += area;
            }
        }
    }
    if total > 0.0 {
        mix.iter_mut().for_each(|m| *m /= total);
        mix
    } else {
        // ROI center on the continent edge with a zero-area overlap
        let col = (((roi.center_lon - continent.lon_min) / continent.cell_width()) as usize).min(continent.grid_cols - 1);
        let row = (((roi.center_lat - continent.lat_min) / continent.cell_height()) as usize).min(continent.grid_rows - 1);
        continent.cells[row * continent.grid_cols + col]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SampleProvenance {
    /// Target absent under the ROI; the target half follows the global prior.
    pub target_from_prior: bool,
    /// No other class present under the ROI; the rest is uniform over the
    /// other classes.
    pub rest_from_prior: bool,
}

#[derive(Debug, Clone)]
pub struct SampleDraw {
    pub samples: Vec<EmbeddingSample>,
    pub provenance: SampleProvenance,
}

/// Stratified draw: `n / 2` target samples followed by `n / 2` samples from
/// the other classes in proportion to the ROI's local mixture.
pub fn draw_samples(
    world: &WorldConfig,
    roi: &Roi,
    n: usize,
    target: LandCoverClass,
    stream: &mut Stream,
) -> Result<SampleDraw> {
    if n < 2 || n % 2 != 0 {
        return Err(Error::invalid(format!("sample count must be even and at least 2, got {n}")));
    }
    if roi.continent >= world.continents.len() {
        return Err(Error::invalid("ROI refers to a missing continent"));
    }
    let mix = local_mixture(world, roi);
    let mut provenance = SampleProvenance { target_from_prior: mix[target.id()] <= 0.0, ..Default::default() };

    let mut rest_weights: Vec<f64> = LandCoverClass::ALL
        .iter()
        .map(|c| if *c == target { 0.0 } else { mix[c.id()] })
        .collect();
    if rest_weights.iter().all(|&w| w <= 0.0) {
        provenance.rest_from_prior = true;
        rest_weights = LandCoverClass::ALL.iter().map(|c| if *c == target { 0.0 } else { 1.0 }).collect();
    }
    let rest = WeightedIndex::new(&rest_weights).map_err(|e| Error::invalid(format!("rest mixture: {e}")))?;

    let roles = world.role_table();
    let shifts: Vec<(u16, f64)> = roles
        .iter()
        .map(|r| (r.class_mask(), r.signal_strength * world.noise_sigma))
        .collect();
    let noise = Normal::new(0.0, world.noise_sigma).map_err(|e| Error::config(e.to_string()))?;

    let half = n / 2;
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let label = if i < half { target } else { LandCoverClass::ALL[rest.sample(stream)] };
        let bit = label.bit();
        let mut features = [0.0; N_DIMS];
        for (f, &(mask, shift)) in features.iter_mut().zip(&shifts) {
            let mean = if mask & bit != 0 { shift } else { 0.0 };
            *f = mean + noise.sample(stream);
        }
        samples.push(EmbeddingSample { features, label });
    }
    Ok(SampleDraw { samples, provenance })
}

/// `n` samples for a quick look at a world: one ROI per class in turn,
/// ten samples from each (five of the class, five of the rest).
pub fn preview_samples(world: &WorldConfig, n: usize) -> Result<Vec<EmbeddingSample>> {
    world.validate()?;
    let mut stream = rng::stream(rng::derive(world.seed, rng::PREVIEW));
    let mut out = Vec::with_capacity(n);
    for class in LandCoverClass::ALL.iter().cycle() {
        if out.len() >= n {
            break;
        }
        let roi = sample_roi(world, *class, &mut stream)?;
        let draw = draw_samples(world, &roi, 10, *class, &mut stream)?;
        out.extend(draw.samples.into_iter().take(n - out.len()));
    }
    Ok(out)
}

/// Read samples from a CSV with a header row and 65 columns: `A01`..`A64`
/// followed by the class name.
pub fn import_samples(path: &Path) -> Result<Vec<EmbeddingSample>> {
    let file = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
    read_samples(file)
}

pub fn read_samples<R: std::io::Read>(reader: R) -> Result<Vec<EmbeddingSample>> {
    let mut csv = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let mut out = Vec::new();
    let mut values = [0.0f64; N_DIMS];
    for (i, record) in csv.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Parse { row, message: e.to_string() })?;
        if record.len() != N_DIMS + 1 {
            return Err(Error::Parse {
                row,
                message: format!("expected {} columns, found {}", N_DIMS + 1, record.len()),
            });
        }
        for (j, v) in values.iter_mut().enumerate() {
            let field = record[j].trim();
            *v = field.parse().map_err(|_| Error::Parse {
                row,
                message: format!("column A{:02}: {field:?} is not a number", j + 1),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse { row, message: format!("column A{:02}: non-finite value", j + 1) });
            }
        }
        let label: LandCoverClass = record[N_DIMS]
            .parse()
            .map_err(|e: Error| Error::Parse { row, message: e.to_string() })?;
        out.push(EmbeddingSample { features: values, label });
    }
    Ok(out)
}

pub fn write_samples<W: Write>(writer: W, samples: &[EmbeddingSample]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = DimensionId::all().map(|d| d.label()).collect();
    header.push("class".to_string());
    csv.write_record(&header)?;
    for s in samples {
        let mut rec: Vec<String> = s.features.iter().map(|v| v.to_string()).collect();
        rec.push(s.label.name().to_string());
        csv.write_record(&rec)?;
    }
    csv.flush()?;
    Ok(())
}
