//! Geometric water-filling and the tapped variant that splits the
//! inter-satellite traffic matrix into one sub-traffic-matrix (STM) per
//! relay segment.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Square matrix of bits to relay between satellites over one base period.
/// Row `i`, column `j` holds traffic from source `i` to target `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficMatrix {
    size: usize,
    data: Vec<f64>,
}

impl TrafficMatrix {
    pub fn zeros(size: usize) -> Self {
        Self {
            size,
            data: vec![0.0; size * size],
        }
    }

    /// Builds a traffic matrix, rejecting negative or non-finite entries and
    /// a non-zero diagonal.
    pub fn new(size: usize, data: Vec<f64>) -> Result<Self> {
        let m = Self::from_raw(size, data)?;
        if (0..size).any(|i| m.get(i, i) != 0.0) {
            return Err(Error::invalid("traffic matrix diagonal must be zero"));
        }
        Ok(m)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let size = rows.len();
        if rows.iter().any(|r| r.len() != size) {
            return Err(Error::invalid("traffic matrix must be square"));
        }
        Self::new(size, rows.concat())
    }

    /// Like [`TrafficMatrix::new`] but allows a non-zero diagonal. Used for
    /// per-segment matrices handed to the schedule generator.
    pub fn from_raw(size: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != size * size {
            return Err(Error::invalid(format!(
                "expected {} entries for a {size}x{size} matrix, got {}",
                size * size,
                data.len()
            )));
        }
        if data.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("traffic entries must be finite and non-negative"));
        }
        Ok(Self { size, data })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.size + j]
    }

    #[inline]
    fn add(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.size + j] += v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.data[i * self.size..(i + 1) * self.size].iter().sum()
    }

    pub fn col_sum(&self, j: usize) -> f64 {
        (0..self.size).map(|i| self.get(i, j)).sum()
    }

    pub fn total(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.size.max(1))
    }
}

/// Result of one water-filling call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaterLevels {
    pub widths: Vec<f64>,
    pub heights: Vec<f64>,
    pub volume: f64,
    pub level: f64,
    /// Added density per step, `max(0, level - height)`.
    pub added: Vec<f64>,
}

impl WaterLevels {
    /// Volume actually placed, `sum(w * x)`.
    pub fn placed(&self) -> f64 {
        self.widths.iter().zip(&self.added).map(|(w, x)| w * x).sum()
    }
}

/// Pours `volume` over steps of the given widths and heights and returns the
/// common water level.
///
/// Zero-width steps take no volume and do not influence the level. Steps at
/// or above the level receive nothing. With `volume == 0` nothing is added
/// and the level is reported as the lowest positive-width step.
pub fn gwf(widths: &[f64], heights: &[f64], volume: f64) -> Result<WaterLevels> {
    if widths.len() != heights.len() {
        return Err(Error::invalid("widths and heights differ in length"));
    }
    if widths.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::invalid("step widths must be finite and non-negative"));
    }
    if heights.iter().any(|h| !(h.is_finite() && *h >= 0.0)) {
        return Err(Error::invalid("step heights must be finite and non-negative"));
    }
    if !(volume.is_finite() && volume >= 0.0) {
        return Err(Error::invalid(format!("volume must be non-negative, got {volume}")));
    }

    let mut order: Vec<usize> = (0..widths.len()).filter(|&i| widths[i] > 0.0).collect();
    if order.is_empty() {
        if volume > 0.0 {
            return Err(Error::Infeasible(format!(
                "cannot place {volume} over steps of zero total width"
            )));
        }
        return Ok(WaterLevels {
            widths: widths.to_vec(),
            heights: heights.to_vec(),
            volume,
            level: 0.0,
            added: vec![0.0; widths.len()],
        });
    }
    order.sort_by(|&a, &b| heights[a].total_cmp(&heights[b]));

    let level = if volume == 0.0 {
        heights[order[0]]
    } else {
        // level over the lowest k steps: (D + sum w h) / sum w, valid while it
        // stays at or below the next step
        let mut width_sum = 0.0;
        let mut mass = volume;
        let mut level = f64::NAN;
        for (k, &i) in order.iter().enumerate() {
            width_sum += widths[i];
            mass += widths[i] * heights[i];
            level = mass / width_sum;
            match order.get(k + 1) {
                Some(&next) if level > heights[next] => continue,
                _ => break,
            }
        }
        level
    };

    let added = if volume == 0.0 {
        vec![0.0; widths.len()]
    } else {
        heights.iter().map(|&h| (level - h).max(0.0)).collect()
    };
    Ok(WaterLevels {
        widths: widths.to_vec(),
        heights: heights.to_vec(),
        volume,
        level,
        added,
    })
}

/// Per-segment traffic produced by tapped water-filling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StmSet {
    /// 1-based relay anchor index.
    pub k_star: usize,
    /// One matrix per segment; segments before `k*` stay zero.
    pub stms: Vec<TrafficMatrix>,
    /// Final traffic density per segment.
    pub heights: Vec<f64>,
    /// Every water-filling round, from segment `S` down to `k*`.
    pub rounds: Vec<WaterLevels>,
}

impl StmSet {
    pub fn sum(&self) -> TrafficMatrix {
        let n = self.stms.first().map_or(0, TrafficMatrix::size);
        let mut total = TrafficMatrix::zeros(n);
        for m in &self.stms {
            for (t, v) in total.data.iter_mut().zip(&m.data) {
                *t += v;
            }
        }
        total
    }
}

/// Tapped geometric water-filling.
///
/// Runs one water-filling round per segment `m = S, ..., k*`. Rounds above
/// `k*` pour row `m` and column `m` of the traffic matrix over segments
/// `m..S`, each segment receiving the share `w_v x_v / D` of that slice.
/// The final round pours the leftover top-left `k* x k*` block over
/// `k*..S`. Heights accumulate between rounds, so earlier allocations act as
/// the step profile for later ones.
///
/// `widths` has one entry per segment; entries before `k*` are ignored.
pub fn tgwf(traffic: &TrafficMatrix, k_star: usize, widths: &[f64]) -> Result<StmSet> {
    let s = traffic.size();
    if widths.len() != s {
        return Err(Error::invalid(format!(
            "expected {s} segment widths, got {}",
            widths.len()
        )));
    }
    if k_star < 1 || k_star > s {
        return Err(Error::invalid(format!("k* = {k_star} outside 1..={s}")));
    }
    let k = k_star - 1;
    let mut w = widths.to_vec();
    for x in &mut w[..k] {
        *x = 0.0;
    }

    let mut stms = vec![TrafficMatrix::zeros(s); s];
    let mut heights = vec![0.0; s];
    let mut rounds = Vec::with_capacity(s - k);
    let total = traffic.total();
    let mut allocated = 0.0;

    for m in (k..s).rev() {
        let volume = if m > k {
            let row: f64 = (0..=m).map(|j| traffic.get(m, j)).sum();
            let col: f64 = (0..m).map(|i| traffic.get(i, m)).sum();
            allocated += row + col;
            row + col
        } else {
            (total - allocated).max(0.0)
        };

        let round = gwf(&w[m..], &heights[m..], volume)?;
        for (h, x) in heights[m..].iter_mut().zip(&round.added) {
            *h += x;
        }

        if volume > 0.0 {
            for (off, (wv, xv)) in round.widths.iter().zip(&round.added).enumerate() {
                let share = wv * xv / volume;
                if share == 0.0 {
                    continue;
                }
                let stm = &mut stms[m + off];
                if m > k {
                    for j in 0..=m {
                        stm.add(m, j, share * traffic.get(m, j));
                    }
                    // the corner a_mm belongs to the row slice only
                    for i in 0..m {
                        stm.add(i, m, share * traffic.get(i, m));
                    }
                } else {
                    for i in 0..=k {
                        for j in 0..=k {
                            stm.add(i, j, share * traffic.get(i, j));
                        }
                    }
                }
            }
        }
        rounds.push(round);
    }

    Ok(StmSet {
        k_star,
        stms,
        heights,
        rounds,
    })
}
