//! Random 3D deployment of IoT devices, UAVs, the MEC server and the
//! eavesdropper, plus nearest-UAV association.

use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// A point in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }
}

/// A processing node that can receive offloaded work.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Node {
    Uav(usize),
    Mec,
}

/// Axis-aligned box `[0, x] × [0, y] × [0, z]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Bounds {
    pub const fn cube(side: f64) -> Self {
        Self { x: side, y: side, z: side }
    }

    pub fn contains(&self, p: &Position3) -> bool {
        (0.0..=self.x).contains(&p.x) && (0.0..=self.y).contains(&p.y) && (0.0..=self.z).contains(&p.z)
    }
}

impl Default for Bounds {
    fn default() -> Self {
        Self::cube(100.0)
    }
}

/// Euclidean distance in meters.
pub fn distance(a: &Position3, b: &Position3) -> f64 {
    let (dx, dy, dz) = (a.x - b.x, a.y - b.y, a.z - b.z);
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Elevation angle in degrees of `air` as seen from `ground`.
pub fn elevation_angle(ground: &Position3, air: &Position3) -> Result<f64> {
    let d = distance(ground, air);
    if d == 0.0 {
        return Err(Error::ZeroDistance);
    }
    let s = ((air.z - ground.z) / d).clamp(-1.0, 1.0);
    Ok(s.asin().to_degrees())
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkTopology {
    devices: Vec<Position3>,
    uavs: Vec<Position3>,
    mec: Position3,
    eve: Position3,
    association: Vec<usize>,
    devices_per_uav: Vec<usize>,
}

impl NetworkTopology {
    /// Builds a topology from explicit positions and associates every device
    /// with its nearest UAV.
    pub fn from_positions(
        devices: Vec<Position3>,
        uavs: Vec<Position3>,
        mec: Position3,
        eve: Position3,
    ) -> Result<Self> {
        if devices.is_empty() {
            return Err(Error::InvalidArgument("topology needs at least one device".into()));
        }
        if uavs.is_empty() {
            return Err(Error::InvalidArgument("topology needs at least one uav".into()));
        }
        let mut topo = Self {
            devices,
            uavs,
            mec,
            eve,
            association: Vec::new(),
            devices_per_uav: Vec::new(),
        };
        topo.associate();
        Ok(topo)
    }

    /// Recomputes the nearest-UAV association; ties go to the lowest UAV index.
    pub fn associate(&mut self) {
        self.association = self
            .devices
            .iter()
            .map(|d| {
                let mut best = 0;
                let mut best_d = f64::INFINITY;
                for (m, u) in self.uavs.iter().enumerate() {
                    let dist = distance(d, u);
                    if dist < best_d {
                        best = m;
                        best_d = dist;
                    }
                }
                best
            })
            .collect();
        let mut counts = vec![0; self.uavs.len()];
        for &m in &self.association {
            counts[m] += 1;
        }
        self.devices_per_uav = counts;
    }

    pub fn devices(&self) -> &[Position3] {
        &self.devices
    }

    pub fn uavs(&self) -> &[Position3] {
        &self.uavs
    }

    pub fn mec(&self) -> &Position3 {
        &self.mec
    }

    pub fn eve(&self) -> &Position3 {
        &self.eve
    }

    pub fn n_devices(&self) -> usize {
        self.devices.len()
    }

    pub fn n_uavs(&self) -> usize {
        self.uavs.len()
    }

    /// UAV serving device `n`.
    pub fn uav_of(&self, device: usize) -> usize {
        self.association[device]
    }

    pub fn association(&self) -> &[usize] {
        &self.association
    }

    /// `N_m`: number of devices served by each UAV.
    pub fn devices_per_uav(&self) -> &[usize] {
        &self.devices_per_uav
    }

    /// Devices served by `uav`, in increasing index order.
    pub fn devices_of(&self, uav: usize) -> impl Iterator<Item = usize> + '_ {
        self.association
            .iter()
            .enumerate()
            .filter(move |(_, &m)| m == uav)
            .map(|(n, _)| n)
    }

    pub fn set_mec_position(&mut self, mec: Position3) {
        self.mec = mec;
    }

    /// Plain-text export, one node per line: `kind index x y z`.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# topology v1: kind index x y z (meters)\n");
        let mut line = |kind: &str, i: usize, p: &Position3| {
            let _ = writeln!(out, "{kind} {i} {} {} {}", p.x, p.y, p.z);
        };
        for (i, p) in self.devices.iter().enumerate() {
            line("device", i, p);
        }
        for (i, p) in self.uavs.iter().enumerate() {
            line("uav", i, p);
        }
        line("mec", 0, &self.mec);
        line("eve", 0, &self.eve);
        out
    }

    /// Parses the format written by [`NetworkTopology::to_text`]. Device and
    /// UAV indices must be contiguous from zero; association is recomputed.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut devices: Vec<(usize, Position3)> = Vec::new();
        let mut uavs: Vec<(usize, Position3)> = Vec::new();
        let mut mec = None;
        let mut eve = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let bad = |what: &str| Error::Parse(format!("line {}: {what}: {line:?}", lineno + 1));
            if fields.len() != 5 {
                return Err(bad("expected 5 fields"));
            }
            let index: usize = fields[1].parse().map_err(|_| bad("bad index"))?;
            let mut coords = [0.0; 3];
            for (c, f) in coords.iter_mut().zip(&fields[2..]) {
                *c = f.parse().map_err(|_| bad("bad coordinate"))?;
            }
            let p = Position3::new(coords[0], coords[1], coords[2]);
            match fields[0] {
                "device" => devices.push((index, p)),
                "uav" => uavs.push((index, p)),
                "mec" => mec = Some(p),
                "eve" => eve = Some(p),
                _ => return Err(bad("unknown node kind")),
            }
        }
        let ordered = |mut v: Vec<(usize, Position3)>, kind: &str| -> Result<Vec<Position3>> {
            v.sort_by_key(|(i, _)| *i);
            if v.iter().enumerate().any(|(k, (i, _))| k != *i) {
                return Err(Error::Parse(format!("{kind} indices must be 0..n without gaps")));
            }
            Ok(v.into_iter().map(|(_, p)| p).collect())
        };
        let devices = ordered(devices, "device")?;
        let uavs = ordered(uavs, "uav")?;
        let mec = mec.ok_or_else(|| Error::Parse("missing mec line".into()))?;
        let eve = eve.ok_or_else(|| Error::Parse("missing eve line".into()))?;
        Self::from_positions(devices, uavs, mec, eve)
    }
}

/// Samples a deployment. Airborne nodes (UAVs, MEC, Eve) are drawn first with
/// `z` uniform in `(0, bounds.z]`; devices follow on the ground plane. Drawing
/// the airborne layout first keeps it identical across device counts for the
/// same seed.
pub fn generate_topology(
    seed: u64,
    n_devices: usize,
    n_uavs: usize,
    bounds: Bounds,
) -> Result<NetworkTopology> {
    if n_devices == 0 || n_uavs == 0 {
        return Err(Error::InvalidArgument(format!(
            "need at least one device and one uav (got {n_devices}, {n_uavs})"
        )));
    }
    if !(bounds.x > 0.0 && bounds.y > 0.0 && bounds.z > 0.0) {
        return Err(Error::InvalidArgument("bounds must be positive".into()));
    }
    let mut rng = rng_from_seed(seed);
    let airborne = |rng: &mut crate::rng::SimRng| {
        let x = rng.random::<f64>() * bounds.x;
        let y = rng.random::<f64>() * bounds.y;
        let z = (1.0 - rng.random::<f64>()) * bounds.z;
        Position3::new(x, y, z)
    };
    let uavs: Vec<_> = (0..n_uavs).map(|_| airborne(&mut rng)).collect();
    let mec = airborne(&mut rng);
    let eve = airborne(&mut rng);
    let devices = (0..n_devices)
        .map(|_| {
            let x = rng.random::<f64>() * bounds.x;
            let y = rng.random::<f64>() * bounds.y;
            Position3::new(x, y, 0.0)
        })
        .collect();
    NetworkTopology::from_positions(devices, uavs, mec, eve)
}
