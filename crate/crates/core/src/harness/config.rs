//! Flat `key = value` scenario files.
//!
//! Blank lines and lines starting with `#` are ignored. Arrays are comma
//! lists. Every key is optional; absent keys keep their defaults.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{Scenario, ScenarioParams};

/// Recognised scenario keys.
pub const SCENARIO_KEYS: &[&str] = &[
    "satellites",
    "altitude_km",
    "earth_radius_km",
    "kepler_mu",
    "height_min_km",
    "height_max_km",
    "elevation_min_deg",
    "elevation_max_deg",
    "heights_km",
    "elevations_deg",
    "bandwidth_ground_hz",
    "bandwidth_uplink_hz",
    "bandwidth_downlink_hz",
    "noise_psd",
    "antenna_gain_db",
    "light_speed_km_s",
    "carrier_ghz",
    "isl_capacity_bps",
    "caching_power",
    "computing_power",
    "compute_load",
    "pool_capacity",
    "laser_static",
    "laser_dynamic",
    "laser_launch",
    "align_delay_s",
    "max_route_km",
    "n_max",
    "m_max",
    "link_loss_db",
];

/// Splits text into a key map. Duplicate keys and lines without `=` are
/// rejected.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::config(
                format!("line {}", n + 1),
                "expected `key = value`",
            ));
        };
        let key = key.trim().to_string();
        if key.is_empty() {
            return Err(Error::config(format!("line {}", n + 1), "empty key"));
        }
        if map.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(Error::config(key, "given more than once"));
        }
    }
    Ok(map)
}

pub fn parse_f64(key: &str, value: &str) -> Result<f64> {
    let x: f64 = value
        .parse()
        .map_err(|_| Error::config(key, format!("`{value}` is not a number")))?;
    if !x.is_finite() {
        return Err(Error::config(key, "must be finite"));
    }
    Ok(x)
}

fn count(key: &str, value: &str) -> Result<u64> {
    let n: u64 = value
        .parse()
        .map_err(|_| Error::config(key, format!("`{value}` is not a positive integer")))?;
    if n == 0 {
        return Err(Error::config(key, "must be positive"));
    }
    Ok(n)
}

fn list(key: &str, value: &str) -> Result<Vec<f64>> {
    value.split(',').map(|v| parse_f64(key, v.trim())).collect()
}

/// Applies a key map over the defaults. Ranges are checked when the
/// scenario is built.
pub fn params_from_kv(map: &BTreeMap<String, String>) -> Result<ScenarioParams> {
    let mut p = ScenarioParams::default();
    for (key, value) in map {
        let k = key.as_str();
        let v = value.as_str();
        match k {
            "satellites" => {
                p.satellites = usize::try_from(count(k, v)?)
                    .map_err(|_| Error::config(k, "too large"))?
            }
            "altitude_km" => p.altitude_km = parse_f64(k, v)?,
            "earth_radius_km" => p.earth_radius_km = parse_f64(k, v)?,
            "kepler_mu" => p.kepler_mu = parse_f64(k, v)?,
            "height_min_km" => p.height_min_km = parse_f64(k, v)?,
            "height_max_km" => p.height_max_km = parse_f64(k, v)?,
            "elevation_min_deg" => p.elevation_min_deg = parse_f64(k, v)?,
            "elevation_max_deg" => p.elevation_max_deg = parse_f64(k, v)?,
            "heights_km" => p.heights_km = Some(list(k, v)?),
            "elevations_deg" => p.elevations_deg = Some(list(k, v)?),
            "bandwidth_ground_hz" => p.bandwidth_ground_hz = parse_f64(k, v)?,
            "bandwidth_uplink_hz" => p.bandwidth_uplink_hz = parse_f64(k, v)?,
            "bandwidth_downlink_hz" => p.bandwidth_downlink_hz = parse_f64(k, v)?,
            "noise_psd" => p.noise_psd = Some(parse_f64(k, v)?),
            "antenna_gain_db" => p.antenna_gain_db = parse_f64(k, v)?,
            "light_speed_km_s" => p.light_speed_km_s = parse_f64(k, v)?,
            "carrier_ghz" => p.carrier_ghz = parse_f64(k, v)?,
            "isl_capacity_bps" => p.isl_capacity_bps = parse_f64(k, v)?,
            "caching_power" => p.caching_power = parse_f64(k, v)?,
            "computing_power" => p.computing_power = parse_f64(k, v)?,
            "compute_load" => p.compute_load = parse_f64(k, v)?,
            "pool_capacity" => p.pool_capacity = parse_f64(k, v)?,
            "laser_static" => p.laser_static = parse_f64(k, v)?,
            "laser_dynamic" => p.laser_dynamic = parse_f64(k, v)?,
            "laser_launch" => p.laser_launch = parse_f64(k, v)?,
            "align_delay_s" => p.align_delay_s = parse_f64(k, v)?,
            "max_route_km" => p.max_route_km = Some(parse_f64(k, v)?),
            "n_max" => {
                p.n_max = u32::try_from(count(k, v)?).map_err(|_| Error::config(k, "too large"))?
            }
            "m_max" => p.m_max = parse_f64(k, v)?,
            "link_loss_db" => p.link_loss_db = parse_f64(k, v)?,
            _ => return Err(Error::config(k, "unknown key")),
        }
    }
    Ok(p)
}

pub fn load_params(path: &Path) -> Result<ScenarioParams> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    params_from_kv(&parse_kv(&text)?)
}

/// Reads a scenario file over the defaults and derives windows.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    load_params(path)?.build()
}

/// Renders parameters back into the file format, one key per line.
pub fn params_to_text(p: &ScenarioParams) -> String {
    fn list(v: &[f64]) -> String {
        v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
    }
    let mut out = String::new();
    let mut put = |k: &str, v: String| {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(&v);
        out.push('\n');
    };
    put("satellites", p.satellites.to_string());
    put("altitude_km", p.altitude_km.to_string());
    put("earth_radius_km", p.earth_radius_km.to_string());
    put("kepler_mu", p.kepler_mu.to_string());
    put("height_min_km", p.height_min_km.to_string());
    put("height_max_km", p.height_max_km.to_string());
    put("elevation_min_deg", p.elevation_min_deg.to_string());
    put("elevation_max_deg", p.elevation_max_deg.to_string());
    if let Some(h) = &p.heights_km {
        put("heights_km", list(h));
    }
    if let Some(e) = &p.elevations_deg {
        put("elevations_deg", list(e));
    }
    put("bandwidth_ground_hz", p.bandwidth_ground_hz.to_string());
    put("bandwidth_uplink_hz", p.bandwidth_uplink_hz.to_string());
    put("bandwidth_downlink_hz", p.bandwidth_downlink_hz.to_string());
    if let Some(n) = p.noise_psd {
        put("noise_psd", n.to_string());
    }
    put("antenna_gain_db", p.antenna_gain_db.to_string());
    put("light_speed_km_s", p.light_speed_km_s.to_string());
    put("carrier_ghz", p.carrier_ghz.to_string());
    put("isl_capacity_bps", p.isl_capacity_bps.to_string());
    put("caching_power", p.caching_power.to_string());
    put("computing_power", p.computing_power.to_string());
    put("compute_load", p.compute_load.to_string());
    put("pool_capacity", p.pool_capacity.to_string());
    put("laser_static", p.laser_static.to_string());
    put("laser_dynamic", p.laser_dynamic.to_string());
    put("laser_launch", p.laser_launch.to_string());
    put("align_delay_s", p.align_delay_s.to_string());
    if let Some(r) = p.max_route_km {
        put("max_route_km", r.to_string());
    }
    put("n_max", p.n_max.to_string());
    put("m_max", p.m_max.to_string());
    put("link_loss_db", p.link_loss_db.to_string());
    out
}
