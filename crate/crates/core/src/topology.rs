//! The sampled city: Poisson base stations over a square area and a square
//! lattice of equal-footprint buildings with Rayleigh heights.
//!
//! Coordinates are meters with the origin at the area center. The lattice is
//! anchored at the origin: building centers sit at `(i * pitch, j * pitch)`
//! for `i, j` in `-n..=n`, where `n = floor(side / 2 / pitch)`.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::seed::{label, substream};

/// Height of every base station, meters.
pub const BS_HEIGHT_M: f64 = 30.0;

/// Minimum distance from the flight path to each edge of the area.
pub const PATH_MARGIN_M: f64 = 500.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }
}

/// Square simulation area of `side_m × side_m`, centered on the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreaSpec {
    pub side_m: f64,
}

impl AreaSpec {
    pub fn new(side_m: f64) -> Result<Self> {
        if !(side_m.is_finite() && side_m > 0.0) {
            return Err(invalid(format!("area side must be positive, got {side_m}")));
        }
        Ok(Self { side_m })
    }

    pub fn half_side(&self) -> f64 {
        self.side_m / 2.0
    }

    pub fn area_km2(&self) -> f64 {
        self.side_m * self.side_m / 1e6
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let h = self.half_side();
        (-h..=h).contains(&x) && (-h..=h).contains(&y)
    }

    /// Checks that a path along the x axis from `x0` to `x1` keeps
    /// [`PATH_MARGIN_M`] clearance to every edge.
    pub fn check_path(&self, x0: f64, x1: f64) -> Result<()> {
        let h = self.half_side();
        let reach = x0.abs().max(x1.abs());
        if reach + PATH_MARGIN_M > h || PATH_MARGIN_M > h {
            return Err(invalid(format!(
                "flight path [{x0}, {x1}] needs {PATH_MARGIN_M} m margin inside an area of side {} m",
                self.side_m
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaseStation {
    #[serde(rename = "x")]
    pub x_m: f64,
    #[serde(rename = "y")]
    pub y_m: f64,
    #[serde(rename = "h")]
    pub height_m: f64,
}

/// Square lattice of buildings. Heights are stored row-major, rows along y.
#[derive(Debug, Clone, PartialEq)]
pub struct BuildingGrid {
    pitch_m: f64,
    footprint_side_m: f64,
    half_count: i64,
    heights_m: Vec<f64>,
}

impl BuildingGrid {
    /// A grid with explicit heights; `heights_m.len()` must be `(2n+1)²` for
    /// some `n ≥ 0`.
    pub fn new(pitch_m: f64, footprint_side_m: f64, heights_m: Vec<f64>) -> Result<Self> {
        if !(pitch_m.is_finite() && pitch_m > 0.0) {
            return Err(invalid(format!("building pitch must be positive, got {pitch_m}")));
        }
        if !(footprint_side_m.is_finite() && footprint_side_m > 0.0) {
            return Err(invalid("building footprint must be positive"));
        }
        if footprint_side_m > pitch_m {
            return Err(invalid(format!(
                "building footprints overlap: side {footprint_side_m} m exceeds pitch {pitch_m} m"
            )));
        }
        let per_axis = (heights_m.len() as f64).sqrt().round() as usize;
        if per_axis * per_axis != heights_m.len() || per_axis.is_multiple_of(2) {
            return Err(invalid(format!(
                "building count {} is not an odd square",
                heights_m.len()
            )));
        }
        if heights_m.iter().any(|h| !(h.is_finite() && *h >= 0.0)) {
            return Err(invalid("building heights must be finite and non-negative"));
        }
        Ok(Self {
            pitch_m,
            footprint_side_m,
            half_count: (per_axis as i64 - 1) / 2,
            heights_m,
        })
    }

    pub fn pitch_m(&self) -> f64 {
        self.pitch_m
    }

    pub fn footprint_side_m(&self) -> f64 {
        self.footprint_side_m
    }

    pub fn heights_m(&self) -> &[f64] {
        &self.heights_m
    }

    pub fn len(&self) -> usize {
        self.heights_m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heights_m.is_empty()
    }

    /// Buildings per axis.
    pub fn per_axis(&self) -> usize {
        (2 * self.half_count + 1) as usize
    }

    /// Lattice coordinates `(i, j)` in `-n..=n` of building `idx`.
    pub fn lattice_coords(&self, idx: usize) -> (i64, i64) {
        let per = self.per_axis();
        let row = (idx / per) as i64;
        let col = (idx % per) as i64;
        (col - self.half_count, row - self.half_count)
    }

    pub fn index_of(&self, i: i64, j: i64) -> Option<usize> {
        let n = self.half_count;
        if i.abs() > n || j.abs() > n {
            return None;
        }
        Some(((j + n) as usize) * self.per_axis() + (i + n) as usize)
    }

    pub fn center(&self, idx: usize) -> (f64, f64) {
        let (i, j) = self.lattice_coords(idx);
        (i as f64 * self.pitch_m, j as f64 * self.pitch_m)
    }

    pub fn height(&self, idx: usize) -> f64 {
        self.heights_m[idx]
    }

    /// Footprint of building `idx` as `(x_min, x_max, y_min, y_max)`.
    pub fn footprint(&self, idx: usize) -> (f64, f64, f64, f64) {
        let (cx, cy) = self.center(idx);
        let h = self.footprint_side_m / 2.0;
        (cx - h, cx + h, cy - h, cy + h)
    }

    /// Candidate buildings whose footprint may meet the horizontal projection
    /// of `p0 → p1`.
    ///
    /// Each footprint lies inside its lattice cell (the square of side `pitch`
    /// around its center). The segment is swept row by row: for each row band
    /// it overlaps, the x-extent of the segment inside that band selects a run
    /// of cells. The cost is proportional to the segment length over the pitch.
    pub fn buildings_near_segment(&self, p0: Point3, p1: Point3) -> Vec<usize> {
        let mut out = Vec::new();
        self.visit_near_segment(p0, p1, |idx| {
            out.push(idx);
            true
        });
        out
    }

    /// Calls `f` on each candidate until it returns `false`. Returns whether
    /// the sweep ran to completion.
    pub(crate) fn visit_near_segment(&self, p0: Point3, p1: Point3, mut f: impl FnMut(usize) -> bool) -> bool {
        let p = self.pitch_m;
        let n = self.half_count;
        // Slack so cells touched only at a shared boundary are still visited.
        let slack = 1e-9 * p;
        let to_cell = |v: f64| (v / p + 0.5).floor() as i64;

        let (ya, yb) = (p0.y.min(p1.y), p0.y.max(p1.y));
        let j_lo = to_cell(ya - slack).max(-n);
        let j_hi = to_cell(yb + slack).min(n);
        let dy = p1.y - p0.y;
        let dx = p1.x - p0.x;
        for j in j_lo..=j_hi {
            // Parameter range of the segment inside row band j.
            let band_lo = (j as f64 - 0.5) * p - slack;
            let band_hi = (j as f64 + 0.5) * p + slack;
            let (t0, t1) = if dy.abs() < 1e-300 {
                (0.0, 1.0)
            } else {
                let ta = (band_lo - p0.y) / dy;
                let tb = (band_hi - p0.y) / dy;
                (ta.min(tb).max(0.0), ta.max(tb).min(1.0))
            };
            if t0 > t1 {
                continue;
            }
            let xa = p0.x + dx * t0;
            let xb = p0.x + dx * t1;
            let i_lo = to_cell(xa.min(xb) - slack).max(-n);
            let i_hi = to_cell(xa.max(xb) + slack).min(n);
            for i in i_lo..=i_hi {
                if let Some(idx) = self.index_of(i, j) {
                    if !f(idx) {
                        return false;
                    }
                }
            }
        }
        true
    }
}

/// Grid pitch for `density_km2` buildings per square kilometer.
pub fn building_pitch_m(density_km2: f64) -> f64 {
    (1e6 / density_km2).sqrt()
}

/// Sample a Poisson base-station process of `density_km2` over `area`.
pub fn sample_base_stations<R: Rng + ?Sized>(
    density_km2: f64,
    area: AreaSpec,
    rng: &mut R,
) -> Result<Vec<BaseStation>> {
    if !(density_km2.is_finite() && density_km2 > 0.0) {
        return Err(invalid(format!("BS density must be positive, got {density_km2}")));
    }
    if !(area.side_m.is_finite() && area.side_m > 0.0) {
        return Err(invalid("degenerate area"));
    }
    let mean = density_km2 * area.area_km2();
    let poisson = Poisson::new(mean).map_err(|e| invalid(format!("poisson mean {mean}: {e}")))?;
    let count = poisson.sample(rng) as usize;
    let h = area.half_side();
    Ok((0..count)
        .map(|_| BaseStation {
            x_m: rng.random_range(-h..h),
            y_m: rng.random_range(-h..h),
            height_m: BS_HEIGHT_M,
        })
        .collect())
}

/// Rayleigh sample by inversion: `scale · √(−2 ln(1 − u))`.
pub fn rayleigh<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    scale * (-2.0 * (-u).ln_1p()).sqrt()
}

/// Sample a building lattice of `density_km2` covering `area`.
pub fn sample_buildings<R: Rng + ?Sized>(
    density_km2: f64,
    building_area_m2: f64,
    height_scale_m: f64,
    area: AreaSpec,
    rng: &mut R,
) -> Result<BuildingGrid> {
    if !(density_km2.is_finite() && density_km2 > 0.0) {
        return Err(invalid(format!("building density must be positive, got {density_km2}")));
    }
    if !(building_area_m2.is_finite() && building_area_m2 > 0.0) {
        return Err(invalid("building area must be positive"));
    }
    if !(height_scale_m.is_finite() && height_scale_m > 0.0) {
        return Err(invalid("building height scale must be positive"));
    }
    let pitch = building_pitch_m(density_km2);
    let side = building_area_m2.sqrt();
    if side > pitch {
        return Err(invalid(format!(
            "building footprints overlap: side {side} m exceeds pitch {pitch} m"
        )));
    }
    let n = (area.half_side() / pitch).floor() as usize;
    let count = (2 * n + 1) * (2 * n + 1);
    let heights = (0..count).map(|_| rayleigh(height_scale_m, rng)).collect();
    BuildingGrid::new(pitch, side, heights)
}

/// Everything needed to regenerate a city.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TopologyParams {
    pub area_side_m: f64,
    pub bs_density_km2: f64,
    pub build_density_km2: f64,
    pub building_area_m2: f64,
    pub height_scale_m: f64,
}

impl Default for TopologyParams {
    fn default() -> Self {
        Self {
            area_side_m: 5000.0,
            bs_density_km2: 5.0,
            build_density_km2: 500.0,
            building_area_m2: 40.0,
            height_scale_m: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CityTopology {
    pub area: AreaSpec,
    pub bss: Vec<BaseStation>,
    pub buildings: BuildingGrid,
    pub bs_density_km2: f64,
    pub build_density_km2: f64,
    pub seed: u64,
}

impl CityTopology {
    /// Generate a city from `params`; base stations and building heights use
    /// independent substreams of `seed`.
    pub fn generate(params: &TopologyParams, seed: u64) -> Result<Self> {
        let area = AreaSpec::new(params.area_side_m)?;
        let bss = sample_base_stations(
            params.bs_density_km2,
            area,
            &mut substream(seed, label::BS_POSITIONS),
        )?;
        let buildings = sample_buildings(
            params.build_density_km2,
            params.building_area_m2,
            params.height_scale_m,
            area,
            &mut substream(seed, label::BUILDING_HEIGHTS),
        )?;
        Ok(Self {
            area,
            bss,
            buildings,
            bs_density_km2: params.bs_density_km2,
            build_density_km2: params.build_density_km2,
            seed,
        })
    }

    /// A hand-built city, mostly for tests and foreign callers.
    pub fn from_parts(area: AreaSpec, bss: Vec<BaseStation>, buildings: BuildingGrid) -> Self {
        let km2 = area.area_km2();
        Self {
            area,
            bs_density_km2: bss.len() as f64 / km2,
            build_density_km2: 1e6 / (buildings.pitch_m() * buildings.pitch_m()),
            bss,
            buildings,
            seed: 0,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&TopologyDoc::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: TopologyDoc = serde_json::from_str(s)?;
        doc.try_into()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct BuildingsDoc {
    pitch: f64,
    side: f64,
    heights: Vec<f64>,
}

/// On-disk topology document.
#[derive(Debug, Serialize, Deserialize)]
struct TopologyDoc {
    seed: u64,
    bs_density_km2: f64,
    build_density_km2: f64,
    area_side_m: f64,
    bss: Vec<BaseStation>,
    buildings: BuildingsDoc,
}

impl From<&CityTopology> for TopologyDoc {
    fn from(t: &CityTopology) -> Self {
        Self {
            seed: t.seed,
            bs_density_km2: t.bs_density_km2,
            build_density_km2: t.build_density_km2,
            area_side_m: t.area.side_m,
            bss: t.bss.clone(),
            buildings: BuildingsDoc {
                pitch: t.buildings.pitch_m,
                side: t.buildings.footprint_side_m,
                heights: t.buildings.heights_m.clone(),
            },
        }
    }
}

impl TryFrom<TopologyDoc> for CityTopology {
    type Error = crate::Error;

    fn try_from(d: TopologyDoc) -> Result<Self> {
        let area = AreaSpec::new(d.area_side_m)?;
        if let Some(bs) = d.bss.iter().find(|b| !area.contains(b.x_m, b.y_m)) {
            return Err(invalid(format!("base station ({}, {}) outside area", bs.x_m, bs.y_m)));
        }
        let buildings = BuildingGrid::new(d.buildings.pitch, d.buildings.side, d.buildings.heights)?;
        Ok(Self {
            area,
            bss: d.bss,
            buildings,
            bs_density_km2: d.bs_density_km2,
            build_density_km2: d.build_density_km2,
            seed: d.seed,
        })
    }
}
