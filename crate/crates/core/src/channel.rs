//! Saleh–Valenzuela mmWave channels for the multi-RIS downlink.
//!
//! Three link classes are synthesized per realization:
//!
//! * direct BS→UE rows `h_{t,k}` (1×M), NLOS clusters only by default;
//! * BS→RIS matrices `H_{t,ℓ}` (N×M), with a zeroth LOS cluster;
//! * RIS→UE rows `h_{ℓ,k}` (1×N) for every (surface, UE) pair, with a LOS cluster.
//!
//! Each link is a sum over clusters and rays of `CN(0,1)` gains times array
//! responses, normalized by the number of summed rays. The LOS cluster takes its
//! centre angles from the deployment geometry and uses the LOS path-loss
//! exponent; NLOS clusters draw uniform centre angles and use the NLOS exponent.
//!
//! Geometry: the BS sits at the origin with its ULA broadside along the bisector
//! of the first quadrant. The `L` surfaces are spaced uniformly on a quarter
//! circle of radius `bs_ris_distance`, each tilted [`RIS_TILT`] away from facing
//! the BS. UE slot `j` of a surface sits `ris_ue_distance` in front of it, the
//! slots fanned over ±60° of the surface normal.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, PI};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::complexlin::CMatrix;
use crate::error::{Error, Result};

/// Rotation of each surface's normal away from the direction of the BS.
pub const RIS_TILT: f64 = PI / 8.0;

/// Direction the BS array faces, measured from the x axis.
pub const BS_BROADSIDE: f64 = FRAC_PI_4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Topology {
    /// `M`
    pub bs_antennas: usize,
    /// `L`
    pub num_ris: usize,
    /// `N_x`
    pub ris_rows: usize,
    /// `N_y`
    pub ris_cols: usize,
    /// UE slots attached to each surface; `K = L · ue_slots_per_ris`.
    pub ue_slots_per_ris: usize,
    pub bs_ris_distance: f64,
    pub ris_ue_distance: f64,
}

impl Default for Topology {
    fn default() -> Self {
        Topology {
            bs_antennas: 16,
            num_ris: 4,
            ris_rows: 4,
            ris_cols: 4,
            ue_slots_per_ris: 4,
            bs_ris_distance: 100.0,
            ris_ue_distance: 2.0,
        }
    }
}

impl Topology {
    /// `N = N_x · N_y`
    pub fn elements(&self) -> usize {
        self.ris_rows * self.ris_cols
    }

    /// `K`, the number of UE slots the system is dimensioned for.
    pub fn num_ues(&self) -> usize {
        self.num_ris * self.ue_slots_per_ris
    }

    /// Index of the surface that serves UE slot `k`.
    pub fn serving_ris(&self, k: usize) -> usize {
        k / self.ue_slots_per_ris
    }

    pub fn validate(&self, prefix: &str) -> Result<()> {
        let counts = [
            ("bs_antennas", self.bs_antennas),
            ("num_ris", self.num_ris),
            ("ris_rows", self.ris_rows),
            ("ris_cols", self.ris_cols),
            ("ue_slots_per_ris", self.ue_slots_per_ris),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::config(format!("{prefix}.{name}"), "must be >= 1"));
            }
        }
        for (name, v) in [
            ("bs_ris_distance", self.bs_ris_distance),
            ("ris_ue_distance", self.ris_ue_distance),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{prefix}.{name}"), "must be a positive distance"));
            }
        }
        Ok(())
    }

    /// Angular position of surface `l` on the quarter circle around the BS.
    fn ris_bearing(&self, l: usize) -> f64 {
        (l as f64 + 0.5) * FRAC_PI_2 / self.num_ris as f64
    }

    /// Planar coordinates of every surface, in metres.
    pub fn ris_positions(&self) -> Vec<[f64; 2]> {
        (0..self.num_ris)
            .map(|l| {
                let b = self.ris_bearing(l);
                [self.bs_ris_distance * b.cos(), self.bs_ris_distance * b.sin()]
            })
            .collect()
    }

    /// Direction of surface `l`'s normal.
    pub fn ris_normal(&self, l: usize) -> f64 {
        self.ris_bearing(l) + PI + RIS_TILT
    }

    /// Planar coordinates of every UE slot, in metres.
    pub fn ue_positions(&self) -> Vec<[f64; 2]> {
        let ris = self.ris_positions();
        (0..self.num_ues())
            .map(|k| {
                let l = self.serving_ris(k);
                let j = k % self.ue_slots_per_ris;
                let g = self.ue_slots_per_ris as f64;
                let offset = -FRAC_PI_3 + 2.0 * FRAC_PI_3 * (j as f64 + 0.5) / g;
                let dir = self.ris_normal(l) + offset;
                [
                    ris[l][0] + self.ris_ue_distance * dir.cos(),
                    ris[l][1] + self.ris_ue_distance * dir.sin(),
                ]
            })
            .collect()
    }
}

/// Cluster structure of one link class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterParams {
    /// NLOS clusters.
    pub clusters: usize,
    pub paths_per_cluster: usize,
    /// Adds the zeroth (LOS) cluster.
    pub los: bool,
}

impl ClusterParams {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        if self.clusters == 0 {
            return Err(Error::config(format!("{prefix}.clusters"), "must be >= 1"));
        }
        if self.paths_per_cluster == 0 {
            return Err(Error::config(format!("{prefix}.paths_per_cluster"), "must be >= 1"));
        }
        Ok(())
    }

    fn total_clusters(&self) -> usize {
        self.clusters + usize::from(self.los)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathLossModel {
    /// Loss at 1 m, in dB.
    pub reference_loss_db: f64,
    pub exponent_los: f64,
    pub exponent_nlos: f64,
    /// Carrier wavelength `λ` in metres.
    pub wavelength: f64,
    /// Element spacing `d` in metres, shared by the BS array and the surfaces.
    pub antenna_spacing: f64,
    /// Linear gain compensation `G_RIS` applied to both hops of every surface.
    pub ris_gain: f64,
}

impl Default for PathLossModel {
    fn default() -> Self {
        let wavelength = 299_792_458.0 / 28e9;
        PathLossModel {
            reference_loss_db: 61.34,
            exponent_los: 2.0,
            exponent_nlos: 2.92,
            wavelength,
            antenna_spacing: wavelength / 2.0,
            ris_gain: 1.0,
        }
    }
}

impl PathLossModel {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        let checks = [
            ("exponent_los", self.exponent_los),
            ("exponent_nlos", self.exponent_nlos),
            ("wavelength", self.wavelength),
            ("antenna_spacing", self.antenna_spacing),
            ("ris_gain", self.ris_gain),
        ];
        for (name, v) in checks {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{prefix}.{name}"), "must be positive"));
            }
        }
        if !self.reference_loss_db.is_finite() {
            return Err(Error::config(format!("{prefix}.reference_loss_db"), "must be finite"));
        }
        Ok(())
    }

    pub fn spacing_ratio(&self) -> f64 {
        self.antenna_spacing / self.wavelength
    }

    /// Linear channel power gain `10^(−(PL₀ + 10·n·log10 d)/10)`.
    pub fn path_loss(&self, distance: f64, los: bool) -> Result<f64> {
        if distance.is_nan() || distance <= 0.0 {
            return Err(Error::Domain(format!("distance must be positive, got {distance}")));
        }
        let exponent = if los { self.exponent_los } else { self.exponent_nlos };
        let loss_db = self.reference_loss_db + 10.0 * exponent * distance.log10();
        Ok(10f64.powf(-loss_db / 10.0))
    }
}

/// Full description of how channels are synthesized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelParams {
    pub direct: ClusterParams,
    pub bs_ris: ClusterParams,
    pub ris_ue: ClusterParams,
    pub path_loss: PathLossModel,
    /// Standard deviation of per-ray angles around their cluster centre, degrees.
    pub angle_spread_deg: f64,
    pub noise_power_dbm: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        let nlos = ClusterParams {
            clusters: 4,
            paths_per_cluster: 5,
            los: true,
        };
        ChannelParams {
            direct: ClusterParams { los: false, ..nlos },
            bs_ris: nlos,
            ris_ue: nlos,
            path_loss: PathLossModel::default(),
            angle_spread_deg: 7.5,
            noise_power_dbm: -94.0,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        self.direct.validate(&format!("{prefix}.direct"))?;
        self.bs_ris.validate(&format!("{prefix}.bs_ris"))?;
        self.ris_ue.validate(&format!("{prefix}.ris_ue"))?;
        self.path_loss.validate(&format!("{prefix}.path_loss"))?;
        if !(self.angle_spread_deg >= 0.0 && self.angle_spread_deg.is_finite()) {
            return Err(Error::config(format!("{prefix}.angle_spread_deg"), "must be >= 0"));
        }
        if !self.noise_power_dbm.is_finite() {
            return Err(Error::config(format!("{prefix}.noise_power_dbm"), "must be finite"));
        }
        Ok(())
    }

    pub fn noise_power_watts(&self) -> f64 {
        dbm_to_watts(self.noise_power_dbm)
    }
}

/// `P[W] = 10^((dBm − 30)/10)`
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

/// ULA response `[1, e^{j2π(d/λ)sinθ}, …, e^{j2π(d/λ)(M−1)sinθ}]`.
pub fn ula_response(m: usize, theta: f64, spacing_ratio: f64) -> Vec<Complex64> {
    let step = 2.0 * PI * spacing_ratio * theta.sin();
    (0..m).map(|i| Complex64::from_polar(1.0, step * i as f64)).collect()
}

/// UPA response; entry `(p, q)` at flat index `p·N_y + q` is
/// `e^{j2π(d/λ)(p sinφ sinθ + q cosθ)}`.
pub fn upa_response(nx: usize, ny: usize, azimuth: f64, elevation: f64, spacing_ratio: f64) -> Vec<Complex64> {
    let kx = 2.0 * PI * spacing_ratio * azimuth.sin() * elevation.sin();
    let ky = 2.0 * PI * spacing_ratio * elevation.cos();
    let mut out = Vec::with_capacity(nx * ny);
    for p in 0..nx {
        for q in 0..ny {
            out.push(Complex64::from_polar(1.0, kx * p as f64 + ky * q as f64));
        }
    }
    out
}

/// Direction of a ray at a planar array: azimuth and elevation in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarAngle {
    pub azimuth: f64,
    pub elevation: f64,
}

/// One propagation ray of a BS→RIS link.
#[derive(Debug, Clone, Copy)]
pub struct BsRisRay {
    pub gain: Complex64,
    pub path_loss: f64,
    pub departure: f64,
    pub arrival: PlanarAngle,
}

/// One propagation ray of a link with a single array end (BS→UE or RIS→UE).
#[derive(Debug, Clone, Copy)]
pub struct RowRay<A> {
    pub gain: Complex64,
    pub path_loss: f64,
    pub departure: A,
}

/// Direct BS→UE row `Σ √(PL_r/R) α_r a_Mᴴ(θ_r)` over `R` rays.
pub fn synthesize_direct(rays: &[RowRay<f64>], m: usize, spacing_ratio: f64) -> Vec<Complex64> {
    let norm = 1.0 / rays.len() as f64;
    let mut row = vec![Complex64::new(0.0, 0.0); m];
    for ray in rays {
        let coeff = ray.gain * (ray.path_loss * norm).sqrt();
        for (h, a) in row.iter_mut().zip(ula_response(m, ray.departure, spacing_ratio)) {
            *h += coeff * a.conj();
        }
    }
    row
}

/// BS→RIS matrix `√G Σ √(PL_r/R) α_r a_N(φ_r, θ_r) a_Mᴴ(θ_r^D)`.
pub fn synthesize_bs_ris(
    rays: &[BsRisRay],
    topo: &Topology,
    ris_gain: f64,
    spacing_ratio: f64,
) -> CMatrix {
    let (m, n) = (topo.bs_antennas, topo.elements());
    let norm = ris_gain / rays.len() as f64;
    let mut h = CMatrix::zeros(n, m);
    for ray in rays {
        let coeff = ray.gain * (ray.path_loss * norm).sqrt();
        let at_ris = upa_response(
            topo.ris_rows,
            topo.ris_cols,
            ray.arrival.azimuth,
            ray.arrival.elevation,
            spacing_ratio,
        );
        let at_bs = ula_response(m, ray.departure, spacing_ratio);
        for (i, a) in at_ris.iter().enumerate() {
            let ca = coeff * a;
            for (j, b) in at_bs.iter().enumerate() {
                h[(i, j)] += ca * b.conj();
            }
        }
    }
    h
}

/// RIS→UE row `√G Σ √(PL_r/R) α̃_r a_Nᴴ(φ_r, θ_r)`.
pub fn synthesize_ris_ue(
    rays: &[RowRay<PlanarAngle>],
    topo: &Topology,
    ris_gain: f64,
    spacing_ratio: f64,
) -> Vec<Complex64> {
    let norm = ris_gain / rays.len() as f64;
    let mut row = vec![Complex64::new(0.0, 0.0); topo.elements()];
    for ray in rays {
        let coeff = ray.gain * (ray.path_loss * norm).sqrt();
        let a = upa_response(
            topo.ris_rows,
            topo.ris_cols,
            ray.departure.azimuth,
            ray.departure.elevation,
            spacing_ratio,
        );
        for (h, a) in row.iter_mut().zip(a) {
            *h += coeff * a.conj();
        }
    }
    row
}

/// One draw of every link for a fixed topology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    /// `h_{t,k}`, one 1×M row per UE slot.
    pub direct: Vec<Vec<Complex64>>,
    /// `H_{t,ℓ}`, one N×M matrix per surface.
    pub bs_to_ris: Vec<CMatrix>,
    /// `h_{ℓ,k}` indexed `[ℓ][k]`, each 1×N.
    pub ris_to_ue: Vec<Vec<Vec<Complex64>>>,
}

impl ChannelRealization {
    pub fn num_ues(&self) -> usize {
        self.direct.len()
    }
}

pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = (a + PI).rem_euclid(2.0 * PI) - PI;
    if a == -PI {
        a = PI;
    }
    a
}

fn bearing(from: [f64; 2], to: [f64; 2]) -> f64 {
    (to[1] - from[1]).atan2(to[0] - from[0])
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Draws ray angles and gains for every link class.
struct RaySampler<'a, R: Rng + ?Sized> {
    rng: &'a mut R,
    spread: f64,
}

impl<R: Rng + ?Sized> RaySampler<'_, R> {
    fn jitter(&mut self, centre: f64) -> f64 {
        let z: f64 = StandardNormal.sample(self.rng);
        centre + self.spread * z
    }

    fn ula_centre(&mut self) -> f64 {
        self.rng.random_range(-FRAC_PI_2..=FRAC_PI_2)
    }

    fn upa_centre(&mut self) -> PlanarAngle {
        PlanarAngle {
            azimuth: self.rng.random_range(-FRAC_PI_2..=FRAC_PI_2),
            elevation: self.rng.random_range(0.0..=PI),
        }
    }

    fn jitter_planar(&mut self, centre: PlanarAngle) -> PlanarAngle {
        PlanarAngle {
            azimuth: self.jitter(centre.azimuth),
            elevation: self.jitter(centre.elevation),
        }
    }
}

/// Geometry of the zeroth cluster of a link: path length and centre angles.
struct LosGeometry<D, A> {
    distance: f64,
    departure: D,
    arrival: A,
}

fn check_ue(topo: &Topology, k: usize) -> Result<()> {
    if k >= topo.num_ues() {
        return Err(Error::Domain(format!("UE index {k} out of range for K = {}", topo.num_ues())));
    }
    Ok(())
}

fn planar_in_plane(azimuth: f64) -> PlanarAngle {
    PlanarAngle {
        azimuth: wrap_angle(azimuth),
        elevation: FRAC_PI_2,
    }
}

fn bs_ris_geometry(topo: &Topology, l: usize) -> LosGeometry<f64, PlanarAngle> {
    let ris = topo.ris_positions()[l];
    LosGeometry {
        distance: distance([0.0, 0.0], ris),
        departure: wrap_angle(bearing([0.0, 0.0], ris) - BS_BROADSIDE),
        arrival: planar_in_plane(bearing(ris, [0.0, 0.0]) - topo.ris_normal(l)),
    }
}

fn ris_ue_geometry(topo: &Topology, l: usize, k: usize) -> LosGeometry<PlanarAngle, ()> {
    let ris = topo.ris_positions()[l];
    let ue = topo.ue_positions()[k];
    LosGeometry {
        distance: distance(ris, ue),
        departure: planar_in_plane(bearing(ris, ue) - topo.ris_normal(l)),
        arrival: (),
    }
}

fn bs_ue_geometry(topo: &Topology, k: usize) -> LosGeometry<f64, ()> {
    let ue = topo.ue_positions()[k];
    LosGeometry {
        distance: distance([0.0, 0.0], ue),
        departure: wrap_angle(bearing([0.0, 0.0], ue) - BS_BROADSIDE),
        arrival: (),
    }
}

/// Draws the direct row `h_{t,k}` for UE slot `k`.
pub fn draw_direct_channel<R: Rng + ?Sized>(
    rng: &mut R,
    topo: &Topology,
    params: &ChannelParams,
    k: usize,
) -> Result<Vec<Complex64>> {
    check_ue(topo, k)?;
    params.direct.validate("channel.direct")?;
    let geo = bs_ue_geometry(topo, k);
    let pl = &params.path_loss;
    let mut sampler = RaySampler {
        rng,
        spread: params.angle_spread_deg.to_radians(),
    };
    let mut rays = Vec::new();
    for cluster in 0..params.direct.total_clusters() {
        let los = params.direct.los && cluster == 0;
        let centre = if los { geo.departure } else { sampler.ula_centre() };
        let path_loss = pl.path_loss(geo.distance, los)?;
        for _ in 0..params.direct.paths_per_cluster {
            let departure = sampler.jitter(centre);
            rays.push(RowRay {
                gain: complex_gaussian(sampler.rng),
                path_loss,
                departure,
            });
        }
    }
    Ok(synthesize_direct(&rays, topo.bs_antennas, pl.spacing_ratio()))
}

/// Draws `H_{t,ℓ}` for surface `l`.
pub fn draw_bs_ris_channel<R: Rng + ?Sized>(
    rng: &mut R,
    topo: &Topology,
    params: &ChannelParams,
    l: usize,
) -> Result<CMatrix> {
    params.bs_ris.validate("channel.bs_ris")?;
    let geo = bs_ris_geometry(topo, l);
    let pl = &params.path_loss;
    let mut sampler = RaySampler {
        rng,
        spread: params.angle_spread_deg.to_radians(),
    };
    let mut rays = Vec::new();
    for cluster in 0..params.bs_ris.total_clusters() {
        let los = params.bs_ris.los && cluster == 0;
        let (dep, arr) = if los {
            (geo.departure, geo.arrival)
        } else {
            (sampler.ula_centre(), sampler.upa_centre())
        };
        let path_loss = pl.path_loss(geo.distance, los)?;
        for _ in 0..params.bs_ris.paths_per_cluster {
            let departure = sampler.jitter(dep);
            let arrival = sampler.jitter_planar(arr);
            rays.push(BsRisRay {
                gain: complex_gaussian(sampler.rng),
                path_loss,
                departure,
                arrival,
            });
        }
    }
    Ok(synthesize_bs_ris(&rays, topo, pl.ris_gain, pl.spacing_ratio()))
}

/// Draws `h_{ℓ,k}` from surface `l` to UE slot `k`.
pub fn draw_ris_ue_channel<R: Rng + ?Sized>(
    rng: &mut R,
    topo: &Topology,
    params: &ChannelParams,
    l: usize,
    k: usize,
) -> Result<Vec<Complex64>> {
    check_ue(topo, k)?;
    params.ris_ue.validate("channel.ris_ue")?;
    let geo = ris_ue_geometry(topo, l, k);
    let pl = &params.path_loss;
    let mut sampler = RaySampler {
        rng,
        spread: params.angle_spread_deg.to_radians(),
    };
    let mut rays = Vec::new();
    for cluster in 0..params.ris_ue.total_clusters() {
        let los = params.ris_ue.los && cluster == 0;
        let centre = if los { geo.departure } else { sampler.upa_centre() };
        let path_loss = pl.path_loss(geo.distance, los)?;
        for _ in 0..params.ris_ue.paths_per_cluster {
            let departure = sampler.jitter_planar(centre);
            rays.push(RowRay {
                gain: complex_gaussian(sampler.rng),
                path_loss,
                departure,
            });
        }
    }
    Ok(synthesize_ris_ue(&rays, topo, pl.ris_gain, pl.spacing_ratio()))
}

/// `h_{ℓ,k}` rows indexed `[ℓ][k]`.
pub type RisUeLinks = Vec<Vec<Vec<Complex64>>>;

/// Draws the surface links: every `H_{t,ℓ}` and every `h_{ℓ,k}`.
pub fn draw_ris_channels<R: Rng + ?Sized>(
    rng: &mut R,
    topo: &Topology,
    params: &ChannelParams,
) -> Result<(Vec<CMatrix>, RisUeLinks)> {
    let bs_to_ris = (0..topo.num_ris)
        .map(|l| draw_bs_ris_channel(rng, topo, params, l))
        .collect::<Result<Vec<_>>>()?;
    let ris_to_ue = (0..topo.num_ris)
        .map(|l| {
            (0..topo.num_ues())
                .map(|k| draw_ris_ue_channel(rng, topo, params, l, k))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((bs_to_ris, ris_to_ue))
}

/// Draws a complete realization: direct rows first, then the surface links.
pub fn draw_realization<R: Rng + ?Sized>(
    rng: &mut R,
    topo: &Topology,
    params: &ChannelParams,
) -> Result<ChannelRealization> {
    topo.validate("topology")?;
    let direct = (0..topo.num_ues())
        .map(|k| draw_direct_channel(rng, topo, params, k))
        .collect::<Result<Vec<_>>>()?;
    let (bs_to_ris, ris_to_ue) = draw_ris_channels(rng, topo, params)?;
    Ok(ChannelRealization {
        direct,
        bs_to_ris,
        ris_to_ue,
    })
}

/// Effective rows `h_k = h_{t,k} + Σ_ℓ h_{ℓ,k} Θ_ℓ H_{t,ℓ}` for every UE slot.
///
/// `reflections[ℓ]` holds the diagonal of `Θ_ℓ`.
pub fn effective_channel(real: &ChannelRealization, reflections: &[Vec<Complex64>]) -> Result<Vec<Vec<Complex64>>> {
    let l_count = real.bs_to_ris.len();
    if reflections.len() != l_count {
        return Err(Error::Shape(format!(
            "{} reflection diagonals for {l_count} surfaces",
            reflections.len()
        )));
    }
    for (l, (theta, h)) in reflections.iter().zip(&real.bs_to_ris).enumerate() {
        if theta.len() != h.rows() {
            return Err(Error::Shape(format!(
                "surface {l}: diagonal of length {} for {} elements",
                theta.len(),
                h.rows()
            )));
        }
    }
    let mut out = real.direct.clone();
    for (k, row) in out.iter_mut().enumerate() {
        for ((links, h_tl), theta) in real.ris_to_ue.iter().zip(&real.bs_to_ris).zip(reflections) {
            let h_lk = &links[k];
            for (n, (&g, &t)) in h_lk.iter().zip(theta).enumerate() {
                let c = g * t;
                if c == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for (o, &v) in row.iter_mut().zip(h_tl.row_slice(n)) {
                    *o += c * v;
                }
            }
        }
    }
    Ok(out)
}
