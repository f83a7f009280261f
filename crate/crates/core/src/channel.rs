//! Air-to-ground propagation, link rates and physical-layer secrecy.
//!
//! All quantities are SI: meters, Hz, watts, bits, seconds, joules. The
//! elevation angle fed to [`los_probability`] is in degrees because the
//! environment constants `a`, `b` are calibrated in degrees.

use crate::error::{Error, Result};
use crate::topology::{distance, elevation_angle, Position3};

/// Speed of light used in the free-space constant `K0 = 4π f_c / c`.
pub const SPEED_OF_LIGHT: f64 = 2.998e8;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    /// Environment constant `a` of the LoS model (also the angle offset, degrees).
    pub a: f64,
    /// Environment constant `b` of the LoS model (1/degree).
    pub b: f64,
    /// Excess loss multiplier under LoS.
    pub eta_los: f64,
    /// Excess loss multiplier under NLoS.
    pub eta_nlos: f64,
    pub carrier_freq: f64,
    pub path_loss_exp: f64,
    pub bandwidth: f64,
    /// Noise power over the allocated channel, watts.
    pub noise_power: f64,
    pub p_device: f64,
    pub p_uav: f64,
}

impl ChannelParams {
    /// Rural air-to-ground defaults: 20 MHz, -96 dBm noise, 2.4 GHz,
    /// exponent 3, 15/23 dBm transmit powers, a = 11.25, b = 0.06.
    pub fn rural() -> Self {
        Self {
            a: 11.25,
            b: 0.06,
            eta_los: 1.0,
            eta_nlos: 10.0,
            carrier_freq: 2.4e9,
            path_loss_exp: 3.0,
            bandwidth: 20e6,
            noise_power: dbm_to_watts(-96.0),
            p_device: dbm_to_watts(15.0),
            p_uav: dbm_to_watts(23.0),
        }
    }

    /// `K0 = 4π f_c / c` in 1/m.
    pub fn k0(&self) -> f64 {
        4.0 * std::f64::consts::PI * self.carrier_freq / SPEED_OF_LIGHT
    }

    /// Returns the name of the first field that breaks an invariant.
    pub fn invalid_field(&self) -> Option<(&'static str, &'static str)> {
        let checks: [(&str, bool, &str); 9] = [
            ("los_a", self.a > 0.0, "must be positive"),
            ("los_b", self.b > 0.0, "must be positive"),
            ("eta_los", self.eta_los > 0.0, "must be positive"),
            ("eta_nlos", self.eta_nlos >= self.eta_los, "must be at least eta_los"),
            ("carrier_freq", self.carrier_freq > 0.0, "must be positive"),
            ("path_loss_exponent", self.path_loss_exp >= 2.0, "must be at least 2"),
            ("bandwidth", self.bandwidth > 0.0, "must be positive"),
            ("noise_power", self.noise_power > 0.0, "must be positive"),
            ("transmit_power", self.p_device > 0.0 && self.p_uav > 0.0, "must be positive"),
        ];
        checks
            .into_iter()
            .find(|(_, ok, _)| !ok)
            .map(|(name, _, why)| (name, why))
    }
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self::rural()
    }
}

/// Probability of a line-of-sight path at elevation `theta` degrees.
pub fn los_probability(theta: f64, params: &ChannelParams) -> f64 {
    1.0 / (1.0 + params.a * (-params.b * (theta - params.a)).exp())
}

/// Mean path loss (linear). With `los_only` the LoS probability is taken as
/// one, so the loss is `η_LoS (K0 d)^ι`.
pub fn mean_path_loss(p_los: f64, dist: f64, params: &ChannelParams, los_only: bool) -> Result<f64> {
    if dist == 0.0 {
        return Err(Error::ZeroDistance);
    }
    let spreading = (params.k0() * dist).powf(params.path_loss_exp);
    let excess = if los_only {
        params.eta_los
    } else {
        params.eta_los * p_los + params.eta_nlos * (1.0 - p_los)
    };
    Ok(excess * spreading)
}

/// Shannon rate on a `1/share_count` slice of `bandwidth`.
pub fn link_rate(bandwidth: f64, share_count: usize, tx_power: f64, gain: f64, noise: f64) -> f64 {
    debug_assert!(share_count >= 1);
    (bandwidth / share_count as f64) * (1.0 + tx_power * gain / noise).log2()
}

pub fn secrecy_rate(legit: f64, eavesdrop: f64) -> f64 {
    (legit - eavesdrop).max(0.0)
}

/// Time to push `data_bits` through a link of the given secrecy rate.
pub fn secure_tx_time(data_bits: f64, secrecy: f64) -> Result<f64> {
    if data_bits == 0.0 {
        return Ok(0.0);
    }
    if secrecy <= 0.0 {
        return Err(Error::InfeasibleSecrecy);
    }
    Ok(data_bits / secrecy)
}

pub fn tx_energy(tx_power: f64, time: f64) -> f64 {
    tx_power * time
}

/// Legitimate and eavesdropper rates of one hop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecrecyLink {
    pub legit_rate: f64,
    pub eve_rate: f64,
    pub secrecy_rate: f64,
}

impl SecrecyLink {
    pub fn new(legit_rate: f64, eve_rate: f64) -> Self {
        Self {
            legit_rate,
            eve_rate,
            secrecy_rate: secrecy_rate(legit_rate, eve_rate),
        }
    }
}

fn ground_to_air_gain(ground: &Position3, air: &Position3, params: &ChannelParams) -> Result<f64> {
    let theta = elevation_angle(ground, air)?;
    let p_los = los_probability(theta, params);
    Ok(1.0 / mean_path_loss(p_los, distance(ground, air), params, false)?)
}

fn los_gain(from: &Position3, to: &Position3, params: &ChannelParams) -> Result<f64> {
    Ok(1.0 / mean_path_loss(1.0, distance(from, to), params, true)?)
}

/// First hop: device to its UAV, overheard by Eve. Both links use the
/// probabilistic LoS/NLoS loss and the `1/N_m` bandwidth share.
pub fn n2m_link(
    device: &Position3,
    uav: &Position3,
    eve: &Position3,
    share: usize,
    params: &ChannelParams,
) -> Result<SecrecyLink> {
    let legit_gain = ground_to_air_gain(device, uav, params)?;
    let eve_gain = ground_to_air_gain(device, eve, params)?;
    let legit = link_rate(params.bandwidth, share, params.p_device, legit_gain, params.noise_power);
    let eve_rate = link_rate(params.bandwidth, share, params.p_device, eve_gain, params.noise_power);
    Ok(SecrecyLink::new(legit, eve_rate))
}

/// Second hop: UAV to an offload target, overheard by Eve. LoS-only loss on
/// both links, `1/N_q` bandwidth share.
pub fn m2q_link(
    uav: &Position3,
    target: &Position3,
    eve: &Position3,
    share: usize,
    params: &ChannelParams,
) -> Result<SecrecyLink> {
    let legit_gain = los_gain(uav, target, params)?;
    let eve_gain = los_gain(uav, eve, params)?;
    let legit = link_rate(params.bandwidth, share, params.p_uav, legit_gain, params.noise_power);
    let eve_rate = link_rate(params.bandwidth, share, params.p_uav, eve_gain, params.noise_power);
    Ok(SecrecyLink::new(legit, eve_rate))
}
