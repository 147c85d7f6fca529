//! Downlink channel between the UAV and the base stations.
//!
//! The UAV carries a directional antenna with a rectangular pattern of
//! beamwidth ω aimed at its serving BS: gain 16π/ω² inside the main lobe and
//! zero outside. Each BS has a vertical uniform linear array with a fixed
//! downtilt and is omnidirectional in azimuth. Pathloss is `c · d^(−α)`
//! with the exponent picked by line-of-sight state.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::topology::{BaseStation, CityTopology, Point3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadioParams {
    /// BS transmit power, watts.
    pub tx_power_w: f64,
    /// Near-field pathloss at the 1 m reference distance.
    pub near_field_c: f64,
    pub alpha_los: f64,
    pub alpha_nlos: f64,
    /// Noise power, watts.
    pub noise_w: f64,
    /// UAV antenna beamwidth, horizontal and vertical.
    pub beamwidth_rad: f64,
    pub bs_downtilt_rad: f64,
    pub n_elements: u32,
    /// Element spacing in wavelengths.
    pub element_spacing_wl: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        let wavelength = 299_792_458.0 / 2.0e9;
        Self {
            tx_power_w: 40.0,
            near_field_c: (wavelength / (4.0 * PI)).powi(2),
            alpha_los: 2.1,
            alpha_nlos: 4.0,
            noise_w: 8e-13,
            beamwidth_rad: PI / 3.0,
            bs_downtilt_rad: 10f64.to_radians(),
            n_elements: 8,
            element_spacing_wl: 0.5,
        }
    }
}

impl RadioParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tx_power_w", self.tx_power_w),
            ("near_field_c", self.near_field_c),
            ("noise_w", self.noise_w),
            ("bs_downtilt_rad", self.bs_downtilt_rad),
            ("element_spacing_wl", self.element_spacing_wl),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.beamwidth_rad > 0.0 && self.beamwidth_rad < PI) {
            return Err(invalid(format!("beamwidth must lie in (0, π), got {}", self.beamwidth_rad)));
        }
        if !(self.alpha_los >= 2.0 && self.alpha_nlos >= self.alpha_los) {
            return Err(invalid("pathloss exponents must satisfy 2 ≤ α_LoS ≤ α_NLoS"));
        }
        if self.n_elements == 0 {
            return Err(invalid("BS array needs at least one element"));
        }
        Ok(())
    }
}

/// Geometry of one UAV–BS link, seen from the UAV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry {
    pub r_horiz_m: f64,
    /// UAV height minus BS height.
    pub dh_m: f64,
    pub dist3d_m: f64,
    /// Vertical angle between the UAV and the BS; positive when the UAV is above.
    pub elev_angle_rad: f64,
    /// Horizontal bearing from the UAV toward the BS.
    pub azimuth_rad: f64,
}

pub fn link_geometry(uav: Point3, bs: &BaseStation) -> LinkGeometry {
    let dx = bs.x_m - uav.x;
    let dy = bs.y_m - uav.y;
    let r = dx.hypot(dy);
    let dh = uav.z - bs.height_m;
    LinkGeometry {
        r_horiz_m: r,
        dh_m: dh,
        dist3d_m: r.hypot(dh),
        elev_angle_rad: dh.atan2(r),
        azimuth_rad: dy.atan2(dx),
    }
}

/// Whether any building obstructs the straight segment from `uav` to `bs`.
///
/// Per candidate footprint the segment's horizontal projection is clipped to
/// the footprint square, giving `[t_in, t_out]`; the segment height is linear
/// in `t`, so its minimum over the clip is at one of the ends. The link is
/// blocked when a building is at least that tall.
pub fn is_blocked(topology: &CityTopology, uav: Point3, bs: &BaseStation) -> bool {
    let p1 = Point3::new(bs.x_m, bs.y_m, bs.height_m);
    let grid = &topology.buildings;
    let clear = grid.visit_near_segment(uav, p1, |idx| {
        let h = grid.height(idx);
        if h < uav.z.min(p1.z) {
            return true;
        }
        match clip_to_footprint(grid.footprint(idx), uav, p1) {
            Some((t_in, t_out)) => {
                let z_in = uav.z + (p1.z - uav.z) * t_in;
                let z_out = uav.z + (p1.z - uav.z) * t_out;
                h < z_in.min(z_out)
            }
            None => true,
        }
    });
    !clear
}

/// Parameter interval of `p0 → p1` (horizontal projection) inside a closed
/// axis-aligned rectangle, if any.
fn clip_to_footprint(fp: (f64, f64, f64, f64), p0: Point3, p1: Point3) -> Option<(f64, f64)> {
    let (x0, x1, y0, y1) = fp;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for (d, start, a, b) in [(p1.x - p0.x, p0.x, x0, x1), (p1.y - p0.y, p0.y, y0, y1)] {
        if d == 0.0 {
            if start < a || start > b {
                return None;
            }
        } else {
            let ta = (a - start) / d;
            let tb = (b - start) / d;
            lo = lo.max(ta.min(tb));
            hi = hi.min(ta.max(tb));
            if lo > hi {
                return None;
            }
        }
    }
    Some((lo, hi))
}

/// Reference blockage test by dense sampling of the 3D segment every
/// `step_m` meters. Slow; meant for cross-checking [`is_blocked`].
pub fn is_blocked_oracle(topology: &CityTopology, uav: Point3, bs: &BaseStation, step_m: f64) -> bool {
    let grid = &topology.buildings;
    let pitch = grid.pitch_m();
    let half = grid.footprint_side_m() / 2.0;
    let (dx, dy, dz) = (bs.x_m - uav.x, bs.y_m - uav.y, bs.height_m - uav.z);
    let len = (dx * dx + dy * dy + dz * dz).sqrt();
    let n = (len / step_m).ceil().max(1.0) as usize;
    (0..=n).any(|k| {
        let t = k as f64 / n as f64;
        let (x, y, z) = (uav.x + dx * t, uav.y + dy * t, uav.z + dz * t);
        let (i, j) = ((x / pitch).round() as i64, (y / pitch).round() as i64);
        grid.index_of(i, j).is_some_and(|idx| {
            let (cx, cy) = (i as f64 * pitch, j as f64 * pitch);
            (x - cx).abs() <= half && (y - cy).abs() <= half && z < grid.height(idx)
        })
    })
}

/// Main-lobe gain of the UAV's rectangular-pattern antenna.
pub fn uav_antenna_gain(beamwidth_rad: f64) -> f64 {
    16.0 * PI / (beamwidth_rad * beamwidth_rad)
}

/// Wrap an angle difference into `[-π, π]`.
fn wrap_angle(a: f64) -> f64 {
    let r = (a + PI).rem_euclid(2.0 * PI) - PI;
    if r == -PI {
        PI
    } else {
        r
    }
}

/// Whether `other` falls inside the UAV beam aimed at `serving`. Both angular
/// windows are closed at ω/2.
pub fn in_beam(serving: &LinkGeometry, other: &LinkGeometry, beamwidth_rad: f64) -> bool {
    let half = beamwidth_rad / 2.0;
    (other.elev_angle_rad - serving.elev_angle_rad).abs() <= half
        && wrap_angle(other.azimuth_rad - serving.azimuth_rad).abs() <= half
}

/// Vertical array factor of the BS toward a link at `elev_angle_rad`.
///
/// `sin²(N u) / (N sin² u)` with `u = π s (sin θ − sin φ_tilt)`, which peaks
/// at `N` on boresight.
pub fn bs_vertical_gain(elev_angle_rad: f64, params: &RadioParams) -> f64 {
    let n = params.n_elements as f64;
    let u = PI * params.element_spacing_wl * (elev_angle_rad.sin() - params.bs_downtilt_rad.sin());
    let su = u.sin();
    if su.abs() < 1e-12 {
        return n;
    }
    let snu = (n * u).sin();
    (snu * snu / (n * su * su)).min(n)
}

/// Received power in watts over one link; distances under 1 m are clamped.
pub fn received_power(geom: &LinkGeometry, blocked: bool, gain_uav: f64, params: &RadioParams) -> f64 {
    let alpha = if blocked { params.alpha_nlos } else { params.alpha_los };
    let d = geom.dist3d_m.max(1.0);
    params.tx_power_w
        * gain_uav
        * bs_vertical_gain(geom.elev_angle_rad, params)
        * params.near_field_c
        * d.powf(-alpha)
}

/// The terms of one SINR evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinrTerms {
    pub signal_w: f64,
    pub interference_los_w: f64,
    pub interference_nlos_w: f64,
    pub noise_w: f64,
    pub serving_blocked: bool,
    /// Interferers inside the beam.
    pub in_beam: usize,
}

impl SinrTerms {
    pub fn ratio(&self) -> f64 {
        self.signal_w / (self.interference_los_w + self.interference_nlos_w + self.noise_w)
    }
}

/// Full breakdown of the SINR at `uav` served by `serving_idx`.
pub fn sinr_terms(
    topology: &CityTopology,
    uav: Point3,
    serving_idx: usize,
    params: &RadioParams,
) -> Result<SinrTerms> {
    let serving = topology.bss.get(serving_idx).ok_or(Error::BsIndexOutOfRange {
        index: serving_idx,
        count: topology.bss.len(),
    })?;
    let gain = uav_antenna_gain(params.beamwidth_rad);
    let sgeom = link_geometry(uav, serving);
    let serving_blocked = is_blocked(topology, uav, serving);
    let mut terms = SinrTerms {
        signal_w: received_power(&sgeom, serving_blocked, gain, params),
        interference_los_w: 0.0,
        interference_nlos_w: 0.0,
        noise_w: params.noise_w,
        serving_blocked,
        in_beam: 0,
    };
    for (j, bs) in topology.bss.iter().enumerate() {
        if j == serving_idx {
            continue;
        }
        let g = link_geometry(uav, bs);
        if !in_beam(&sgeom, &g, params.beamwidth_rad) {
            continue;
        }
        terms.in_beam += 1;
        let blocked = is_blocked(topology, uav, bs);
        let p = received_power(&g, blocked, gain, params);
        if blocked {
            terms.interference_nlos_w += p;
        } else {
            terms.interference_los_w += p;
        }
    }
    Ok(terms)
}

/// Linear SINR at `uav` served by `serving_idx`.
pub fn sinr(topology: &CityTopology, uav: Point3, serving_idx: usize, params: &RadioParams) -> Result<f64> {
    sinr_terms(topology, uav, serving_idx, params).map(|t| t.ratio())
}

/// Shannon spectral efficiency, bits/s/Hz.
pub fn spectral_efficiency(sinr_linear: f64) -> f64 {
    (1.0 + sinr_linear).log2()
}

pub fn to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Index of the horizontally nearest BS to `(x, y)`; ties go to the lowest index.
pub fn nearest_bs(topology: &CityTopology, x: f64, y: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, bs) in topology.bss.iter().enumerate() {
        let d2 = (bs.x_m - x).powi(2) + (bs.y_m - y).powi(2);
        if best.is_none_or(|(_, b)| d2 < b) {
            best = Some((i, d2));
        }
    }
    best.map(|(i, _)| i)
}
