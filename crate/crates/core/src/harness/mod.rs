//! Experiment harness: scenario files, seeded traffic, sweeps and result
//! files.

pub mod cli;
pub mod config;
pub mod traffic;

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Scenario, ScenarioParams};
use crate::optimizer::{scheme, Scheme};

pub use config::{load_params, load_scenario, params_from_kv, parse_kv};
pub use traffic::{gen_traffic, replication_seed, PRNG_ID};

/// Default traffic scale (bits).
pub const DEFAULT_THETA: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    NMax,
    S,
    Theta,
    BetaMax,
    None,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::NMax => "n_max",
            Axis::S => "S",
            Axis::Theta => "theta",
            Axis::BetaMax => "beta_max",
            Axis::None => "none",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "n_max" => Ok(Axis::NMax),
            "S" | "s" => Ok(Axis::S),
            "theta" => Ok(Axis::Theta),
            "beta_max" => Ok(Axis::BetaMax),
            "none" => Ok(Axis::None),
            _ => Err(Error::config(
                "axis",
                format!("unknown axis `{s}`; expected n_max, S, theta, beta_max or none"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::config("format", format!("unknown format `{s}`; expected csv or json"))),
        }
    }
}

/// Parses a comma list whose items are numbers or inclusive integer ranges
/// `a..b`.
pub fn parse_values(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if let Some((a, b)) = item.split_once("..") {
            let parse = |s: &str| {
                s.trim()
                    .parse::<i64>()
                    .map_err(|_| Error::config("values", format!("bad range bound `{s}` in `{item}`")))
            };
            let (a, b) = (parse(a)?, parse(b)?);
            if a > b {
                return Err(Error::config("values", format!("empty range `{item}`")));
            }
            out.extend((a..=b).map(|v| v as f64));
        } else {
            out.push(config::parse_f64("values", item)?);
        }
    }
    Ok(out)
}

pub fn parse_schemes(text: &str) -> Result<Vec<Scheme>> {
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let id: u8 = item
            .parse()
            .map_err(|_| Error::config("schemes", format!("`{item}` is not a scheme id")))?;
        let s = Scheme::from_id(id).map_err(|e| Error::config("schemes", e.to_string()))?;
        if out.contains(&s) {
            return Err(Error::config("schemes", format!("scheme {id} listed twice")));
        }
        out.push(s);
    }
    if out.is_empty() {
        return Err(Error::config("schemes", "no schemes given"));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    /// Scenario file; `None` means the built-in defaults.
    pub scenario: Option<PathBuf>,
    pub axis: Axis,
    pub values: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub seed: u64,
    pub reps: usize,
    /// Traffic scale when the axis is not `theta`.
    pub theta: f64,
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            scenario: None,
            axis: Axis::None,
            values: Vec::new(),
            schemes: Scheme::ALL.to_vec(),
            seed: 0,
            reps: 1,
            theta: DEFAULT_THETA,
            out: None,
            format: Format::Csv,
        }
    }
}

impl ExperimentSpec {
    /// Reads a spec file with keys `scenario`, `axis`, `values`, `schemes`,
    /// `seed`, `reps`, `theta`, `out` and `format`.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut spec = Self::default();
        for (key, value) in parse_kv(&text)? {
            spec.set(&key, &value)?;
        }
        Ok(spec)
    }

    /// Sets one field from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "scenario" => self.scenario = Some(PathBuf::from(value)),
            "axis" => self.axis = value.parse()?,
            "values" => self.values = parse_values(value)?,
            "schemes" => self.schemes = parse_schemes(value)?,
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| Error::config(key, format!("`{value}` is not an unsigned integer")))?
            }
            "reps" => {
                self.reps = value
                    .parse()
                    .map_err(|_| Error::config(key, format!("`{value}` is not an unsigned integer")))?
            }
            "theta" => self.theta = config::parse_f64(key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            "format" => self.format = value.parse()?,
            _ => return Err(Error::config(key, "unknown key")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::config("reps", "must be at least 1"));
        }
        if self.schemes.is_empty() {
            return Err(Error::config("schemes", "no schemes given"));
        }
        if !(self.theta.is_finite() && self.theta >= 0.0) {
            return Err(Error::config("theta", "must be finite and non-negative"));
        }
        if self.axis == Axis::None {
            if !self.values.is_empty() {
                return Err(Error::config("values", "axis `none` takes no values"));
            }
            return Ok(());
        }
        if self.values.is_empty() {
            return Err(Error::config("values", format!("axis {} needs values", self.axis)));
        }
        for w in self.values.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::config("values", "must be strictly increasing"));
            }
        }
        if let Some(v) = self.values.iter().find(|v| !(**v > 0.0)) {
            return Err(Error::config("values", format!("must be positive, got {v}")));
        }
        if matches!(self.axis, Axis::NMax | Axis::S) {
            if let Some(v) = self.values.iter().find(|v| v.fract() != 0.0) {
                return Err(Error::config("values", format!("axis {} needs integers, got {v}", self.axis)));
            }
        }
        Ok(())
    }
}

/// One sweep cell outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub axis_name: String,
    pub axis_value: Option<f64>,
    pub scheme: u8,
    pub rep: usize,
    #[serde(rename = "efficiency_bits_per_J")]
    pub efficiency: Option<f64>,
    pub n0: Option<f64>,
    pub m_bar: Option<f64>,
    pub alpha: Option<f64>,
    pub k_star: Option<usize>,
    pub feasible: bool,
    pub walltime_s: f64,
    /// Reason a cell has no solution.
    #[serde(skip)]
    pub note: Option<String>,
}

/// Scenario and traffic scale of one axis value.
pub fn cell_setup(base: &ScenarioParams, axis: Axis, value: f64, theta: f64) -> Result<(Scenario, f64)> {
    let mut p = base.clone();
    let mut theta = theta;
    match axis {
        Axis::None => {}
        Axis::NMax => {
            p.n_max = u32::try_from(value as u64).map_err(|_| Error::config("values", "n_max too large"))?
        }
        Axis::S => {
            // re-spaced evenly for every S
            if p.heights_km.is_some() || p.elevations_deg.is_some() {
                return Err(Error::config(
                    "axis",
                    "an S sweep needs evenly spaced balloons; drop heights_km and elevations_deg",
                ));
            }
            p.satellites = value as usize;
        }
        Axis::BetaMax => {
            if p.elevations_deg.is_some() {
                return Err(Error::config("axis", "a beta_max sweep needs evenly spaced elevations; drop elevations_deg"));
            }
            p.elevation_max_deg = value;
        }
        Axis::Theta => theta = value,
    }
    Ok((p.build()?, theta))
}

/// Runs every (axis value, scheme, replication) cell. Cells run in
/// parallel; rows come back ordered by axis value, then scheme, then
/// replication. Solver failures mark the row infeasible.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let base = match &spec.scenario {
        Some(path) => load_params(path)?,
        None => ScenarioParams::default(),
    };
    let axis_values: Vec<Option<f64>> = match spec.axis {
        Axis::None => vec![None],
        _ => spec.values.iter().map(|&v| Some(v)).collect(),
    };
    let mut setups = Vec::with_capacity(axis_values.len());
    for &v in &axis_values {
        setups.push(cell_setup(&base, spec.axis, v.unwrap_or(0.0), spec.theta)?);
    }
    let mut cells = Vec::new();
    for (a, value) in axis_values.iter().enumerate() {
        for &s in &spec.schemes {
            for rep in 0..spec.reps {
                cells.push((a, *value, s, rep));
            }
        }
    }
    let rows = cells
        .par_iter()
        .map(|&(a, value, s, rep)| {
            let (scenario, theta) = &setups[a];
            run_cell(spec, scenario, *theta, value, s, rep)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rows)
}

fn run_cell(
    spec: &ExperimentSpec,
    scenario: &Scenario,
    theta: f64,
    value: Option<f64>,
    s: Scheme,
    rep: usize,
) -> Result<ResultRow> {
    let traffic = gen_traffic(scenario.satellites, theta, replication_seed(spec.seed, rep))?;
    let start = Instant::now();
    let outcome = scheme(scenario, &traffic, s);
    let walltime_s = start.elapsed().as_secs_f64();
    let mut row = ResultRow {
        axis_name: spec.axis.name().to_string(),
        axis_value: value,
        scheme: s.id(),
        rep,
        efficiency: None,
        n0: None,
        m_bar: None,
        alpha: None,
        k_star: None,
        feasible: false,
        walltime_s,
        note: None,
    };
    match outcome {
        Ok(r) => {
            row.efficiency = Some(r.efficiency);
            row.n0 = Some(r.vars.n0);
            row.m_bar = Some(r.m_bar);
            row.alpha = Some(r.vars.alpha);
            row.k_star = Some(r.vars.k_star);
            row.feasible = true;
        }
        Err(e) => row.note = Some(e.to_string()),
    }
    Ok(row)
}

/// Run description written ahead of the rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub artifact: String,
    pub version: String,
    pub prng: String,
    pub seed: u64,
    pub reps: usize,
    pub axis: String,
    pub schemes: Vec<u8>,
    pub theta: f64,
    pub scenario: String,
}

impl Metadata {
    pub fn for_spec(spec: &ExperimentSpec) -> Self {
        Self {
            artifact: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            prng: PRNG_ID.to_string(),
            seed: spec.seed,
            reps: spec.reps,
            axis: spec.axis.name().to_string(),
            schemes: spec.schemes.iter().map(|s| s.id()).collect(),
            theta: spec.theta,
            scenario: spec
                .scenario
                .as_ref()
                .map_or_else(|| "defaults".to_string(), |p| p.display().to_string()),
        }
    }
}

/// CSV with `# key=value` metadata lines ahead of the column header.
pub fn to_csv(meta: &Metadata, rows: &[ResultRow]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    let schemes: Vec<String> = meta.schemes.iter().map(|s| s.to_string()).collect();
    let lines = [
        ("artifact", meta.artifact.clone()),
        ("version", meta.version.clone()),
        ("prng", meta.prng.clone()),
        ("seed", meta.seed.to_string()),
        ("reps", meta.reps.to_string()),
        ("axis", meta.axis.clone()),
        ("schemes", schemes.join(" ")),
        ("theta", meta.theta.to_string()),
        ("scenario", meta.scenario.clone()),
    ];
    for (k, v) in lines {
        writeln!(buf, "# {k}={v}").expect("writing to a Vec cannot fail");
    }
    let mut w = csv::Writer::from_writer(buf);
    for row in rows {
        w.serialize(row)?;
    }
    w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))
}

pub fn to_json(meta: &Metadata, rows: &[ResultRow]) -> Result<Vec<u8>> {
    #[derive(Serialize)]
    struct Doc<'a> {
        metadata: &'a Metadata,
        rows: &'a [ResultRow],
    }
    let mut out = serde_json::to_vec_pretty(&Doc { metadata: meta, rows })?;
    out.push(b'\n');
    Ok(out)
}

pub fn render(format: Format, meta: &Metadata, rows: &[ResultRow]) -> Result<Vec<u8>> {
    match format {
        Format::Csv => to_csv(meta, rows),
        Format::Json => to_json(meta, rows),
    }
}

/// Replaces `path` in one rename so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_accept_ranges_and_lists() {
        assert_eq!(parse_values("1..4").unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(parse_values("10, 20,1e3").unwrap(), vec![10.0, 20.0, 1000.0]);
        assert_eq!(parse_values("1,3..4,9").unwrap(), vec![1.0, 3.0, 4.0, 9.0]);
        assert!(parse_values("4..1").is_err());
        assert!(parse_values("1..x").is_err());
        assert!(parse_values("abc").is_err());
    }

    #[test]
    fn schemes_parse() {
        assert_eq!(parse_schemes("1,3").unwrap(), vec![Scheme::Joint, Scheme::SingleOrbit]);
        assert!(parse_schemes("4").is_err());
        assert!(parse_schemes("1,1").is_err());
        assert!(parse_schemes("").is_err());
    }

    #[test]
    fn spec_validation() {
        let mut spec = ExperimentSpec::default();
        spec.validate().unwrap();
        spec.values = vec![1.0];
        assert!(spec.validate().is_err());
        spec.axis = Axis::NMax;
        spec.validate().unwrap();
        spec.values = vec![2.0, 1.0];
        assert!(spec.validate().is_err());
        spec.values = vec![1.5];
        assert!(spec.validate().is_err());
        spec.axis = Axis::Theta;
        spec.validate().unwrap();
        spec.values = vec![0.0, 1.0];
        assert!(spec.validate().is_err());
        spec.values = vec![1.0];
        spec.reps = 0;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn axis_setup_changes_the_right_input() {
        let base = ScenarioParams::default();
        let (sc, th) = cell_setup(&base, Axis::NMax, 7.0, 5.0).unwrap();
        assert_eq!((sc.n_max, th), (7, 5.0));
        let (sc, _) = cell_setup(&base, Axis::S, 3.0, 5.0).unwrap();
        assert_eq!(sc.satellites, 3);
        let mut h = sc.heights_km.clone();
        h.sort_by(f64::total_cmp);
        assert_eq!(h, vec![20.0, 47.5, 75.0]);
        let (sc, _) = cell_setup(&base, Axis::BetaMax, 30.0, 5.0).unwrap();
        let max = sc.elevations_rad.iter().cloned().fold(0.0, f64::max);
        assert!((max - 30f64.to_radians()).abs() < 1e-15);
        let (_, th) = cell_setup(&base, Axis::Theta, 123.0, 5.0).unwrap();
        assert_eq!(th, 123.0);
        let mut fixed = base.clone();
        fixed.heights_km = Some(vec![20.0, 30.0, 40.0, 50.0, 60.0]);
        assert!(cell_setup(&fixed, Axis::S, 3.0, 1.0).is_err());
    }

    #[test]
    fn csv_has_metadata_and_columns() {
        let spec = ExperimentSpec::default();
        let meta = Metadata::for_spec(&spec);
        let row = ResultRow {
            axis_name: "none".into(),
            axis_value: None,
            scheme: 1,
            rep: 0,
            efficiency: Some(2.5),
            n0: Some(3.0),
            m_bar: Some(0.1),
            alpha: Some(0.5),
            k_star: Some(1),
            feasible: true,
            walltime_s: 0.25,
            note: None,
        };
        let text = String::from_utf8(to_csv(&meta, std::slice::from_ref(&row)).unwrap()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines.contains(&"# prng=splitmix64/v1"));
        assert!(lines.contains(&"# seed=0"));
        let header = lines.iter().find(|l| !l.starts_with('#')).unwrap();
        assert_eq!(
            *header,
            "axis_name,axis_value,scheme,rep,efficiency_bits_per_J,n0,m_bar,alpha,k_star,feasible,walltime_s"
        );
        assert_eq!(*lines.last().unwrap(), "none,,1,0,2.5,3.0,0.1,0.5,1,true,0.25");
        let json: serde_json::Value = serde_json::from_slice(&to_json(&meta, &[row]).unwrap()).unwrap();
        assert_eq!(json["metadata"]["prng"], "splitmix64/v1");
        assert_eq!(json["rows"][0]["k_star"], 1);
        assert!(json["rows"][0]["axis_value"].is_null());
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
