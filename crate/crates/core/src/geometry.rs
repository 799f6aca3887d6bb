//! Orbit and link geometry: orbital period, balloon visibility windows, the
//! nested relay time segments, log-distance path loss, and the closed-form
//! transmit powers of the three radio hops.

use std::f64::consts::{FRAC_PI_2, LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boltzmann constant (J/K).
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Receiver noise temperature assumed for the default noise density (K).
pub const NOISE_TEMPERATURE_K: f64 = 260.0;

/// Slack allowed on the arccos argument before a geometry is rejected.
const ACOS_TOLERANCE: f64 = 1e-12;

/// Raw scenario inputs with the reference defaults. Angles are in degrees here and
/// converted to radians when the [`Scenario`] is built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub satellites: usize,
    pub altitude_km: f64,
    pub earth_radius_km: f64,
    pub kepler_mu: f64,
    pub height_min_km: f64,
    pub height_max_km: f64,
    pub elevation_min_deg: f64,
    pub elevation_max_deg: f64,
    /// Explicit balloon heights; overrides the even spacing when set.
    pub heights_km: Option<Vec<f64>>,
    /// Explicit minimum elevations (degrees), paired with `heights_km`.
    pub elevations_deg: Option<Vec<f64>>,
    pub bandwidth_ground_hz: f64,
    pub bandwidth_uplink_hz: f64,
    pub bandwidth_downlink_hz: f64,
    /// Noise power spectral density (W/Hz); `None` means k_B * 260 K.
    pub noise_psd: Option<f64>,
    pub antenna_gain_db: f64,
    pub light_speed_km_s: f64,
    pub carrier_ghz: f64,
    pub isl_capacity_bps: f64,
    pub caching_power: f64,
    pub computing_power: f64,
    pub compute_load: f64,
    pub pool_capacity: f64,
    pub laser_static: f64,
    pub laser_dynamic: f64,
    pub laser_launch: f64,
    pub align_delay_s: f64,
    /// Longest routing distance between satellites; `None` means half the
    /// orbit circumference.
    pub max_route_km: Option<f64>,
    pub n_max: u32,
    pub m_max: f64,
    /// Loss constant `c` (dB) in the transmit power formulas, which carry the
    /// factor `10^(c/10) * d^2` with `d` in km.
    pub link_loss_db: f64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            satellites: 5,
            altitude_km: 550.0,
            earth_radius_km: 6371.0,
            kepler_mu: 398_601.58,
            height_min_km: 20.0,
            height_max_km: 75.0,
            elevation_min_deg: 5.0,
            elevation_max_deg: 45.0,
            heights_km: None,
            elevations_deg: None,
            bandwidth_ground_hz: 1e8,
            bandwidth_uplink_hz: 1e8,
            bandwidth_downlink_hz: 1e8,
            noise_psd: None,
            antenna_gain_db: 15.0,
            light_speed_km_s: 3e5,
            carrier_ghz: 3.0,
            isl_capacity_bps: 1e9,
            caching_power: 1e-10,
            computing_power: 1e-6,
            compute_load: 1e10,
            pool_capacity: 1e12,
            laser_static: 1e-15,
            laser_dynamic: 1e-15,
            laser_launch: 1e-3,
            align_delay_s: 1.0,
            max_route_km: None,
            n_max: 20,
            m_max: 50.0,
            link_loss_db: 114.4,
        }
    }
}

/// A fully derived scenario. Satellites are indexed by descending window
/// length, so `windows_s[0]` is the widest window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub satellites: usize,
    pub altitude_km: f64,
    pub earth_radius_km: f64,
    pub kepler_mu: f64,
    pub heights_km: Vec<f64>,
    pub elevations_rad: Vec<f64>,
    pub bandwidth_ground_hz: f64,
    pub bandwidth_uplink_hz: f64,
    pub bandwidth_downlink_hz: f64,
    pub noise_psd: f64,
    /// Linear antenna gain.
    pub antenna_gain: f64,
    pub light_speed_km_s: f64,
    pub carrier_ghz: f64,
    pub isl_capacity_bps: f64,
    pub caching_power: f64,
    pub computing_power: f64,
    pub compute_load: f64,
    pub pool_capacity: f64,
    pub laser_static: f64,
    pub laser_dynamic: f64,
    pub laser_launch: f64,
    pub align_delay_s: f64,
    pub max_route_km: f64,
    pub n_max: u32,
    pub m_max: f64,
    pub link_loss_db: f64,
    pub period_s: f64,
    pub windows_s: Vec<f64>,
}

impl ScenarioParams {
    /// Balloon heights and elevations (degrees) in deployment order, before
    /// sorting by window. Even spacing puts the highest balloon on the
    /// smallest elevation.
    pub fn layout(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let s = self.satellites;
        let heights = match &self.heights_km {
            Some(h) => {
                if h.len() != s {
                    return Err(Error::config(
                        "heights_km",
                        format!("expected {s} values, got {}", h.len()),
                    ));
                }
                h.clone()
            }
            None => even_spacing(self.height_min_km, self.height_max_km, s),
        };
        let elevations = match &self.elevations_deg {
            Some(e) => {
                if e.len() != s {
                    return Err(Error::config(
                        "elevations_deg",
                        format!("expected {s} values, got {}", e.len()),
                    ));
                }
                e.clone()
            }
            None => {
                let mut e = even_spacing(self.elevation_min_deg, self.elevation_max_deg, s);
                e.reverse();
                e
            }
        };
        Ok((heights, elevations))
    }

    pub fn build(&self) -> Result<Scenario> {
        self.validate()?;
        let (heights, elevations_deg) = self.layout()?;
        let period = orbital_period(self.altitude_km, self.earth_radius_km, self.kepler_mu)?;

        let mut sats = Vec::with_capacity(self.satellites);
        for (idx, (&h, &e)) in heights.iter().zip(&elevations_deg).enumerate() {
            if !(h > 0.0 && h < self.altitude_km) {
                return Err(Error::config(
                    "heights_km",
                    format!("balloon {} height {h} km must lie in (0, {})", idx + 1, self.altitude_km),
                ));
            }
            if !(e > 0.0 && e < 90.0) {
                return Err(Error::config(
                    "elevations_deg",
                    format!("balloon {} elevation {e} deg must lie in (0, 90)", idx + 1),
                ));
            }
            let beta = e.to_radians();
            let w = time_window(h, beta, self.altitude_km, self.earth_radius_km, self.kepler_mu)?;
            sats.push((w, h, beta));
        }
        // stable: equal windows keep deployment order
        sats.sort_by(|a, b| b.0.total_cmp(&a.0));

        let noise_psd = self
            .noise_psd
            .unwrap_or(BOLTZMANN * NOISE_TEMPERATURE_K);
        let max_route_km = self
            .max_route_km
            .unwrap_or(PI * (self.altitude_km + self.earth_radius_km));

        Ok(Scenario {
            satellites: self.satellites,
            altitude_km: self.altitude_km,
            earth_radius_km: self.earth_radius_km,
            kepler_mu: self.kepler_mu,
            heights_km: sats.iter().map(|s| s.1).collect(),
            elevations_rad: sats.iter().map(|s| s.2).collect(),
            bandwidth_ground_hz: self.bandwidth_ground_hz,
            bandwidth_uplink_hz: self.bandwidth_uplink_hz,
            bandwidth_downlink_hz: self.bandwidth_downlink_hz,
            noise_psd,
            antenna_gain: 10f64.powf(self.antenna_gain_db / 10.0),
            light_speed_km_s: self.light_speed_km_s,
            carrier_ghz: self.carrier_ghz,
            isl_capacity_bps: self.isl_capacity_bps,
            caching_power: self.caching_power,
            computing_power: self.computing_power,
            compute_load: self.compute_load,
            pool_capacity: self.pool_capacity,
            laser_static: self.laser_static,
            laser_dynamic: self.laser_dynamic,
            laser_launch: self.laser_launch,
            align_delay_s: self.align_delay_s,
            max_route_km,
            n_max: self.n_max,
            m_max: self.m_max,
            link_loss_db: self.link_loss_db,
            period_s: period,
            windows_s: sats.iter().map(|s| s.0).collect(),
        })
    }

    fn validate(&self) -> Result<()> {
        if self.satellites == 0 {
            return Err(Error::config("satellites", "must be at least 1"));
        }
        let positive = [
            ("altitude_km", self.altitude_km),
            ("earth_radius_km", self.earth_radius_km),
            ("kepler_mu", self.kepler_mu),
            ("height_min_km", self.height_min_km),
            ("height_max_km", self.height_max_km),
            ("elevation_min_deg", self.elevation_min_deg),
            ("elevation_max_deg", self.elevation_max_deg),
            ("bandwidth_ground_hz", self.bandwidth_ground_hz),
            ("bandwidth_uplink_hz", self.bandwidth_uplink_hz),
            ("bandwidth_downlink_hz", self.bandwidth_downlink_hz),
            ("light_speed_km_s", self.light_speed_km_s),
            ("carrier_ghz", self.carrier_ghz),
            ("isl_capacity_bps", self.isl_capacity_bps),
            ("caching_power", self.caching_power),
            ("computing_power", self.computing_power),
            ("compute_load", self.compute_load),
            ("pool_capacity", self.pool_capacity),
            ("laser_static", self.laser_static),
            ("laser_dynamic", self.laser_dynamic),
            ("laser_launch", self.laser_launch),
            ("align_delay_s", self.align_delay_s),
            ("m_max", self.m_max),
        ];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(key, format!("must be finite and positive, got {v}")));
            }
        }
        if let Some(v) = self.noise_psd {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config("noise_psd", format!("must be positive, got {v}")));
            }
        }
        if let Some(v) = self.max_route_km {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config("max_route_km", format!("must be positive, got {v}")));
            }
        }
        if !self.antenna_gain_db.is_finite() {
            return Err(Error::config("antenna_gain_db", "must be finite"));
        }
        if !self.link_loss_db.is_finite() {
            return Err(Error::config("link_loss_db", "must be finite"));
        }
        if self.n_max == 0 {
            return Err(Error::config("n_max", "must be at least 1"));
        }
        if self.height_min_km > self.height_max_km {
            return Err(Error::config("height_min_km", "exceeds height_max_km"));
        }
        if self.heights_km.is_none() && self.height_max_km >= self.altitude_km {
            return Err(Error::config(
                "height_max_km",
                format!("{} km is not below the satellite altitude {} km", self.height_max_km, self.altitude_km),
            ));
        }
        if self.elevation_min_deg > self.elevation_max_deg {
            return Err(Error::config("elevation_min_deg", "exceeds elevation_max_deg"));
        }
        if self.elevations_deg.is_none() && self.elevation_max_deg >= 90.0 {
            return Err(Error::config("elevation_max_deg", "must be below 90 degrees"));
        }
        Ok(())
    }
}

fn even_spacing(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

impl Scenario {
    /// Reference scenario with all defaults.
    pub fn table_one() -> Scenario {
        ScenarioParams::default()
            .build()
            .expect("default scenario is valid")
    }

    /// Worst-case inter-satellite propagation time `Omega / V` (s).
    pub fn route_delay_s(&self) -> f64 {
        self.max_route_km / self.light_speed_km_s
    }

    /// Fixed overhead before each schedule: alignment plus worst-case routing.
    pub fn schedule_overhead_s(&self) -> f64 {
        self.align_delay_s + self.route_delay_s()
    }

    /// Time to move one bit over a laser link (s/bit).
    pub fn bit_time_s(&self) -> f64 {
        1.0 / self.isl_capacity_bps
    }

    /// Balloon-to-satellite distance for satellite `i` (km).
    pub fn slant_km(&self, i: usize) -> f64 {
        self.altitude_km - self.heights_km[i]
    }

    pub fn path_loss_db(&self, distance_km: f64) -> Result<f64> {
        path_loss_gain(distance_km, self.carrier_ghz).map(|(db, _)| db)
    }
}

/// Circular-orbit period `2*pi*sqrt((L + rE)^3 / mu)` in seconds.
pub fn orbital_period(altitude_km: f64, earth_radius_km: f64, mu: f64) -> Result<f64> {
    for (name, v) in [("altitude", altitude_km), ("earth radius", earth_radius_km)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::invalid(format!("{name} must be finite and non-negative, got {v}")));
        }
    }
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::invalid(format!("Kepler constant must be positive, got {mu}")));
    }
    let r = altitude_km + earth_radius_km;
    Ok(2.0 * PI * (r * r * r / mu).sqrt())
}

/// Visibility window of a balloon at `height_km` with minimum elevation
/// `elevation_rad` towards a satellite at `altitude_km`.
pub fn time_window(
    height_km: f64,
    elevation_rad: f64,
    altitude_km: f64,
    earth_radius_km: f64,
    mu: f64,
) -> Result<f64> {
    if !(height_km.is_finite() && height_km >= 0.0 && height_km <= altitude_km) {
        return Err(Error::invalid(format!(
            "balloon height {height_km} km outside [0, {altitude_km}]"
        )));
    }
    if !(elevation_rad.is_finite() && (0.0..=FRAC_PI_2).contains(&elevation_rad)) {
        return Err(Error::invalid(format!("elevation {elevation_rad} rad outside [0, pi/2]")));
    }
    let r = altitude_km + earth_radius_km;
    let arg = (earth_radius_km + height_km) / r * elevation_rad.cos();
    if arg > 1.0 + ACOS_TOLERANCE {
        return Err(Error::invalid(format!("arccos argument {arg} exceeds 1")));
    }
    let geocentric = arg.min(1.0).acos() - elevation_rad;
    let scale = (r * r * r / mu).sqrt();
    Ok((2.0 * geocentric * scale).max(0.0))
}

/// Nested relay segments of the widest used window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentLayout {
    /// 1-based index of the widest window used for relaying.
    pub k_star: usize,
    pub alpha: f64,
    /// Segment lengths at `alpha = 1` (s).
    pub tau: Vec<f64>,
    /// Scaled lengths `alpha * tau` (s).
    pub widths: Vec<f64>,
}

impl SegmentLayout {
    /// Relay budget `alpha * T~_{k*}`, equal to the sum of used widths.
    pub fn relay_budget(&self) -> f64 {
        self.widths[self.k_star - 1..].iter().sum()
    }

    /// Widths with the segments before `k*` zeroed, as fed to T-GWF.
    pub fn relay_widths(&self) -> Vec<f64> {
        self.widths
            .iter()
            .enumerate()
            .map(|(v, &w)| if v + 1 < self.k_star { 0.0 } else { w })
            .collect()
    }
}

/// Segment lengths from windows sorted in non-increasing order:
/// `tau_v = T~_v - T~_{v+1}` and `tau_S = T~_S`.
pub fn segment_lengths(windows: &[f64]) -> Result<Vec<f64>> {
    if windows.windows(2).any(|p| p[0] < p[1]) {
        return Err(Error::invalid("time windows must be sorted in non-increasing order"));
    }
    if windows.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::invalid("time windows must be finite and non-negative"));
    }
    let n = windows.len();
    Ok((0..n)
        .map(|v| if v + 1 < n { windows[v] - windows[v + 1] } else { windows[v] })
        .collect())
}

pub fn segment_layout(windows: &[f64], k_star: usize, alpha: f64) -> Result<SegmentLayout> {
    let tau = segment_lengths(windows)?;
    if k_star < 1 || k_star > windows.len() {
        return Err(Error::invalid(format!("k* = {k_star} outside 1..={}", windows.len())));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha = {alpha} outside (0, 1)")));
    }
    let widths = tau.iter().map(|t| alpha * t).collect();
    Ok(SegmentLayout {
        k_star,
        alpha,
        tau,
        widths,
    })
}

/// Log-distance path loss `92.44 + 20 log10(d) + 20 log10(f)` (dB) and the
/// matching power gain.
pub fn path_loss_gain(distance_km: f64, carrier_ghz: f64) -> Result<(f64, f64)> {
    if !(distance_km.is_finite() && distance_km > 0.0) {
        return Err(Error::invalid(format!("distance must be positive, got {distance_km}")));
    }
    if !(carrier_ghz.is_finite() && carrier_ghz > 0.0) {
        return Err(Error::invalid(format!("frequency must be positive, got {carrier_ghz}")));
    }
    let loss = 92.44 + 20.0 * distance_km.log10() + 20.0 * carrier_ghz.log10();
    Ok((loss, 10f64.powf(-loss / 10.0)))
}

/// Transmit power needed to push `bits` over a link of `distance_km` in
/// `time_s`: `B sigma^2 d^2 10^(c/10) (2^(bits / (B T)) - 1) / G_T`.
pub fn link_power(
    scenario: &Scenario,
    bandwidth_hz: f64,
    distance_km: f64,
    bits: f64,
    time_s: f64,
) -> Result<f64> {
    if !(time_s > 0.0) {
        return Err(Error::invalid(format!("transmission time must be positive, got {time_s}")));
    }
    if !(bits >= 0.0) {
        return Err(Error::invalid(format!("data amount must be non-negative, got {bits}")));
    }
    let growth = (LN_2 * bits / (bandwidth_hz * time_s)).exp_m1();
    let scale = bandwidth_hz * scenario.noise_psd * distance_km * distance_km
        * 10f64.powf(scenario.link_loss_db / 10.0)
        / scenario.antenna_gain;
    Ok(scale * growth)
}

/// Powers of the three radio hops of satellite `i` (0-based).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TxPowers {
    /// Ground station to balloon (W).
    pub ground: f64,
    /// Balloon to satellite (W).
    pub balloon: f64,
    /// Satellite to balloon (W).
    pub satellite: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn tx_powers(
    scenario: &Scenario,
    i: usize,
    n0: f64,
    ground_time_s: f64,
    balloon_time_s: f64,
    satellite_time_s: f64,
    lambda: f64,
    mu: f64,
) -> Result<TxPowers> {
    if i >= scenario.satellites {
        return Err(Error::invalid(format!("satellite index {i} out of range")));
    }
    if !(n0 >= 1.0) {
        return Err(Error::invalid(format!("n0 must be at least 1, got {n0}")));
    }
    if !(lambda >= 0.0 && mu >= 0.0) {
        return Err(Error::invalid("arrival rates must be non-negative"));
    }
    let up_bits = n0 * scenario.period_s * lambda;
    let down_bits = n0 * scenario.period_s * mu;
    let slant = scenario.slant_km(i);
    Ok(TxPowers {
        ground: link_power(
            scenario,
            scenario.bandwidth_ground_hz,
            scenario.heights_km[i],
            up_bits,
            ground_time_s,
        )?,
        balloon: link_power(scenario, scenario.bandwidth_uplink_hz, slant, up_bits, balloon_time_s)?,
        satellite: link_power(
            scenario,
            scenario.bandwidth_downlink_hz,
            slant,
            down_bits,
            satellite_time_s,
        )?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const RE: f64 = 6371.0;
    const MU: f64 = 398_601.58;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn period_at_starlink_altitude() {
        // 40-digit evaluation: 5730.118908188775754...
        let t = orbital_period(550.0, RE, MU).unwrap();
        assert!((t - 5730.118908188776).abs() < 1e-8);
        assert!((t - 5731.0).abs() < 1.0);
    }

    #[test]
    fn period_scales_with_three_halves_power() {
        let base = orbital_period(100.0, 900.0, MU).unwrap();
        let quad = orbital_period(400.0, 3600.0, MU).unwrap();
        assert!(rel(quad, 8.0 * base) < 1e-14);
    }

    #[test]
    fn period_unit_radicand() {
        let r = MU.cbrt();
        let t = orbital_period(r - 10.0, 10.0, MU).unwrap();
        assert!(rel(t, 2.0 * PI) < 1e-12);
    }

    #[test]
    fn period_rejects_bad_input() {
        assert!(orbital_period(-1.0, RE, MU).is_err());
        assert!(orbital_period(f64::NAN, RE, MU).is_err());
        assert!(orbital_period(1.0, RE, 0.0).is_err());
    }

    #[test]
    fn window_edge_cases() {
        assert_eq!(time_window(20.0, FRAC_PI_2, 550.0, RE, MU).unwrap(), 0.0);
        let w = time_window(550.0, 0.3, 550.0, RE, MU).unwrap();
        assert!(w.abs() < 1e-9);
        assert!(time_window(600.0, 0.3, 550.0, RE, MU).is_err());
    }

    #[test]
    fn window_matches_high_precision_value() {
        // 40-digit evaluations of the window formula
        let w = time_window(20.0, 45f64.to_radians(), 550.0, RE, MU).unwrap();
        assert!(rel(w, 134.818_111_054_652_3) < 1e-10);
        let w = time_window(75.0, 5f64.to_radians(), 550.0, RE, MU).unwrap();
        assert!(rel(w, 538.053_626_814_802_1) < 1e-10);
    }

    #[test]
    fn window_monotone_in_elevation_and_height() {
        let mut prev = f64::INFINITY;
        for deg in (1..89).map(f64::from) {
            let w = time_window(30.0, deg.to_radians(), 550.0, RE, MU).unwrap();
            assert!(w < prev);
            prev = w;
        }
        let mut prev = f64::INFINITY;
        for h in (0..54).map(|k| 1.0 + 10.0 * k as f64) {
            let w = time_window(h, 0.2, 550.0, RE, MU).unwrap();
            assert!(w < prev);
            prev = w;
        }
    }

    #[test]
    fn layout_telescopes() {
        let lay = segment_layout(&[10.0, 6.0, 2.0], 1, 0.5).unwrap();
        assert_eq!(lay.tau, vec![4.0, 4.0, 2.0]);
        assert_eq!(lay.widths, vec![2.0, 2.0, 1.0]);
        assert_eq!(lay.relay_budget(), 5.0);

        let lay = segment_layout(&[7.0, 7.0, 7.0, 7.0], 2, 0.3).unwrap();
        assert_eq!(lay.tau, vec![0.0, 0.0, 0.0, 7.0]);

        let lay = segment_layout(&[10.0, 6.0, 2.0], 3, 0.5).unwrap();
        assert_eq!(lay.relay_widths(), vec![0.0, 0.0, 1.0]);
        assert_eq!(lay.relay_budget(), 1.0);
    }

    #[test]
    fn layout_rejects_unsorted_and_bad_args() {
        assert!(segment_layout(&[1.0, 2.0], 1, 0.5).is_err());
        assert!(segment_layout(&[2.0, 1.0], 0, 0.5).is_err());
        assert!(segment_layout(&[2.0, 1.0], 3, 0.5).is_err());
        assert!(segment_layout(&[2.0, 1.0], 1, 1.0).is_err());
    }

    #[test]
    fn path_loss_anchors() {
        let (db, g) = path_loss_gain(1.0, 1.0).unwrap();
        assert!((db - 92.44).abs() < 1e-12);
        assert!(rel(g, 10f64.powf(-9.244)) < 1e-12);
        let (db3, _) = path_loss_gain(1.0, 3.0).unwrap();
        assert!((db3 - 101.982_425_094_393_2).abs() < 1e-10);
        let (db10, g10) = path_loss_gain(10.0, 3.0).unwrap();
        let (_, g1) = path_loss_gain(1.0, 3.0).unwrap();
        assert!((db10 - db3 - 20.0).abs() < 1e-10);
        assert!(rel(g10, g1 * 1e-2) < 1e-12);
        assert!(path_loss_gain(0.0, 3.0).is_err());
        assert!(path_loss_gain(-5.0, 3.0).is_err());
    }

    #[test]
    fn route_delay_anchor() {
        let sc = Scenario::table_one();
        assert!(rel(sc.max_route_km, 2.17e4) < 5e-3);
        assert!(rel(sc.route_delay_s(), 7.25e-2) < 5e-3);
    }

    #[test]
    fn default_layout_pairs_high_balloon_with_low_elevation() {
        let p = ScenarioParams {
            satellites: 2,
            ..ScenarioParams::default()
        };
        let (h, e) = p.layout().unwrap();
        assert_eq!(h, vec![20.0, 75.0]);
        assert_eq!(e, vec![45.0, 5.0]);
        let sc = p.build().unwrap();
        // the 75 km / 5 deg balloon has the wider window
        assert_eq!(sc.heights_km, vec![75.0, 20.0]);
        assert!(sc.windows_s[0] > sc.windows_s[1]);
    }

    #[test]
    fn default_noise_density() {
        let sc = Scenario::table_one();
        assert!(rel(sc.noise_psd, 3.589_687_4e-21) < 1e-12);
    }

    #[test]
    fn zero_rate_needs_no_power() {
        let sc = Scenario::table_one();
        let p = tx_powers(&sc, 0, 1.0, 10.0, 10.0, 10.0, 0.0, 0.0).unwrap();
        assert_eq!(p.ground, 0.0);
        assert_eq!(p.balloon, 0.0);
        assert_eq!(p.satellite, 0.0);
        assert!(tx_powers(&sc, 0, 1.0, 0.0, 10.0, 10.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn longer_time_needs_less_power() {
        let sc = Scenario::table_one();
        let a = tx_powers(&sc, 1, 2.0, 1.0, 1.0, 1.0, 3.0, 3.0).unwrap();
        let b = tx_powers(&sc, 1, 2.0, 2.0, 2.0, 2.0, 3.0, 3.0).unwrap();
        assert!(b.ground < a.ground);
        assert!(b.balloon < a.balloon);
        assert!(b.satellite < a.satellite);
    }
}
