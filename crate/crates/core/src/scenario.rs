//! Scenario generation: RRH/user geometry and synthetic per-user RSS data.
//!
//! Training RSS is generated noise-free; test RSS carries log-normal
//! shadowing (additive zero-mean Gaussian in dB) and is thresholded against
//! the receiver sensitivity before prediction.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::config::{PathlossMode, ScenarioConfig, TrainLayout};
use crate::error::{Error, Result};
use crate::rng::{stream, StreamKind};

/// A point in the service area, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Location2D {
    pub x: f64,
    pub y: f64,
}

impl Location2D {
    pub fn new(x: f64, y: f64) -> Self {
        Location2D { x, y }
    }

    pub fn distance_to(&self, other: &Location2D) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        (dx * dx + dy * dy).sqrt()
    }
}

/// Users x antennas matrix of RSS values in dBm, stored row-major so that
/// row `l` is the RSS vector of user `l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RssMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RssMatrix {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::domain(format!(
                "RSS matrix expects {}x{}={} entries, got {}",
                rows,
                cols,
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("RSS matrix entries must be finite"));
        }
        Ok(RssMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::domain("RSS rows must all have the same length"));
        }
        let data = rows.iter().flatten().copied().collect();
        Self::from_vec(nrows, ncols, data)
    }

    pub fn num_users(&self) -> usize {
        self.rows
    }

    pub fn num_antennas(&self) -> usize {
        self.cols
    }

    pub fn get(&self, user: usize, antenna: usize) -> f64 {
        self.data[user * self.cols + antenna]
    }

    /// RSS vector of one user.
    pub fn row(&self, user: usize) -> &[f64] {
        &self.data[user * self.cols..(user + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Restrict to the first `m` antennas (nested antenna subsets for the
    /// M-sweep).
    pub fn take_antennas(&self, m: usize) -> Result<RssMatrix> {
        if m == 0 || m > self.cols {
            return Err(Error::domain(format!(
                "cannot take {m} antennas from a matrix with {} columns",
                self.cols
            )));
        }
        let mut data = Vec::with_capacity(self.rows * m);
        for l in 0..self.rows {
            data.extend_from_slice(&self.row(l)[..m]);
        }
        Ok(RssMatrix {
            rows: self.rows,
            cols: m,
            data,
        })
    }

    /// Write as CSV with a header row of antenna indices, one row per user.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        let header: Vec<String> = (0..self.cols).map(|m| m.to_string()).collect();
        writeln!(out, "{}", header.join(","))?;
        for l in 0..self.rows {
            let row: Vec<String> = self.row(l).iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())?;
        let mut lines = BufReader::new(file).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty RSS CSV".into()))??;
        let cols = header.split(',').count();
        let mut data = Vec::new();
        let mut rows = 0;
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut n = 0;
            for field in line.split(',') {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|e| Error::Parse(format!("bad RSS value {field:?}: {e}")))?;
                data.push(v);
                n += 1;
            }
            if n != cols {
                return Err(Error::Parse(format!(
                    "row {rows} has {n} fields, expected {cols}"
                )));
            }
            rows += 1;
        }
        RssMatrix::from_vec(rows, cols, data)
    }
}

/// Write placements as CSV (`x,y` header, one row per point).
pub fn write_locations_csv(points: &[Location2D], path: impl AsRef<Path>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "x,y")?;
    for p in points {
        writeln!(out, "{},{}", p.x, p.y)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_locations_csv(path: impl AsRef<Path>) -> Result<Vec<Location2D>> {
    let file = std::fs::File::open(path.as_ref())?;
    let mut points = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let mut it = line.split(',');
        let x: f64 = it
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad location row {i}")))?;
        let y: f64 = it
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad location row {i}")))?;
        points.push(Location2D::new(x, y));
    }
    Ok(points)
}

fn uniform_points(n: usize, width: f64, height: f64, rng: &mut impl Rng) -> Vec<Location2D> {
    (0..n)
        .map(|_| {
            let x = rng.random::<f64>() * width;
            let y = rng.random::<f64>() * height;
            Location2D::new(x, y)
        })
        .collect()
}

/// Cell-centered square grid of `n = s*s` points over the area.
fn grid_points(n: usize, width: f64, height: f64) -> Result<Vec<Location2D>> {
    let side = (n as f64).sqrt().round() as usize;
    if side * side != n {
        return Err(Error::config(format!(
            "grid training layout requires a perfect-square user count, got {n}"
        )));
    }
    let pitch_x = width / side as f64;
    let pitch_y = height / side as f64;
    let mut pts = Vec::with_capacity(n);
    for iy in 0..side {
        for ix in 0..side {
            pts.push(Location2D::new(
                (ix as f64 + 0.5) * pitch_x,
                (iy as f64 + 0.5) * pitch_y,
            ));
        }
    }
    Ok(pts)
}

/// Place RRHs, training users, and test users. Deterministic per seed; the
/// three point sets come from independent streams so the choice of training
/// layout never shifts the other placements.
pub fn place_rrh_and_users(
    config: &ScenarioConfig,
    seed: u64,
) -> Result<(Vec<Location2D>, Vec<Location2D>, Vec<Location2D>)> {
    config.validate()?;
    let (w, h) = (config.area_width_m, config.area_height_m);
    let rrh = uniform_points(
        config.num_rrh,
        w,
        h,
        &mut stream(seed, StreamKind::RrhPlacement, 0, 0),
    );
    let train = match config.train_layout {
        TrainLayout::Grid => grid_points(config.num_train, w, h)?,
        TrainLayout::UniformRandom => uniform_points(
            config.num_train,
            w,
            h,
            &mut stream(seed, StreamKind::TrainLayout, 0, 0),
        ),
    };
    let test = uniform_points(
        config.num_test,
        w,
        h,
        &mut stream(seed, StreamKind::TestLayout, 0, 0),
    );
    Ok((rrh, train, test))
}

/// Noise-free received power at distance `d`, in dBm.
///
/// Literal mode applies the active segment's exponent directly:
/// `p0 - 10*eta(d)*log10(d)`. Continuous mode anchors the curve to the first
/// sloped segment and chains the remaining segments so the value is
/// continuous across every breakpoint.
pub fn path_loss_rss_db(d: f64, config: &ScenarioConfig) -> Result<f64> {
    if d.is_nan() || d <= 0.0 {
        return Err(Error::domain(format!("distance must be positive, got {d}")));
    }
    let p0 = config.p0_dbm();
    let segs = &config.pathloss_breakpoints;
    match config.pathloss_mode {
        PathlossMode::Literal => {
            let eta = segment_exponent(segs, d);
            Ok(p0 - 10.0 * eta * d.log10())
        }
        PathlossMode::Continuous => Ok(continuous_rss(segs, p0, d)),
    }
}

/// Exponent of the segment containing `d`. The first segment covers
/// d < bound; later segments include their bound.
fn segment_exponent(segs: &[crate::config::PathlossSegment], d: f64) -> f64 {
    segs[locate_segment(segs, d)].exponent
}

fn continuous_rss(segs: &[crate::config::PathlossSegment], p0: f64, d: f64) -> f64 {
    // Anchor on the first sloped segment: there the curve equals the literal
    // expression p0 - 10*eta*log10(d). The remaining segments chain outward
    // from the anchor so the curve is continuous at every breakpoint.
    let anchor = segs
        .iter()
        .position(|s| s.exponent != 0.0)
        .unwrap_or(segs.len() - 1);
    let idx = locate_segment(segs, d);
    let upper = |k: usize| segs[k].max_distance_m.expect("inner segment is bounded");

    if idx == anchor {
        p0 - 10.0 * segs[anchor].exponent * d.log10()
    } else if idx > anchor {
        let mut b = upper(anchor);
        let mut v = p0 - 10.0 * segs[anchor].exponent * b.log10();
        for seg in &segs[anchor + 1..idx] {
            let nb = seg.max_distance_m.expect("inner segment is bounded");
            v -= 10.0 * seg.exponent * (nb / b).log10();
            b = nb;
        }
        v - 10.0 * segs[idx].exponent * (d / b).log10()
    } else {
        // Walk downward: v holds the curve value at the upper bound of
        // segment k, starting from the anchor's lower edge.
        let mut k = anchor - 1;
        let mut v = p0 - 10.0 * segs[anchor].exponent * upper(k).log10();
        while k > idx {
            v += 10.0 * segs[k].exponent * (upper(k) / upper(k - 1)).log10();
            k -= 1;
        }
        v + 10.0 * segs[idx].exponent * (upper(idx) / d).log10()
    }
}

/// Index of the segment containing `d`, with the literal-mode boundary
/// convention.
fn locate_segment(segs: &[crate::config::PathlossSegment], d: f64) -> usize {
    for (i, seg) in segs.iter().enumerate() {
        if let Some(bound) = seg.max_distance_m {
            let inside = if i == 0 { d < bound } else { d <= bound };
            if inside {
                return i;
            }
        }
    }
    segs.len() - 1
}

/// Synthetic RSS matrix for `locations` against `rrh`: path loss plus
/// i.i.d. zero-mean Gaussian shadowing of variance `sigma_z_sq` (dB^2).
/// `sigma_z_sq = 0` yields the noise-free matrix without consuming any
/// randomness. Deterministic per seed; row `l` draws from its own stream.
pub fn generate_rss(
    locations: &[Location2D],
    rrh: &[Location2D],
    sigma_z_sq: f64,
    config: &ScenarioConfig,
    seed: u64,
) -> Result<RssMatrix> {
    if sigma_z_sq.is_nan() || sigma_z_sq < 0.0 {
        return Err(Error::domain("shadowing variance must be >= 0"));
    }
    let m = rrh.len();
    let sigma = sigma_z_sq.sqrt();
    let mut data = Vec::with_capacity(locations.len() * m);
    for (l, loc) in locations.iter().enumerate() {
        let mut rng = (sigma_z_sq > 0.0).then(|| stream(seed, StreamKind::RssUser, l as u64, 0));
        for antenna in rrh {
            let d = loc.distance_to(antenna);
            if d == 0.0 {
                return Err(Error::domain(format!(
                    "user {l} is co-located with an RRH; RSS is undefined at zero distance"
                )));
            }
            let clean = path_loss_rss_db(d, config)?;
            let z = match rng.as_mut() {
                Some(r) => sigma * r.sample::<f64, _>(StandardNormal),
                None => 0.0,
            };
            data.push(clean + z);
        }
    }
    RssMatrix::from_vec(locations.len(), m, data)
}

/// Replace every entry strictly below the receiver sensitivity with the
/// system noise power. Idempotent.
pub fn apply_sensitivity_threshold(rss: &RssMatrix, config: &ScenarioConfig) -> RssMatrix {
    let data = rss
        .data
        .iter()
        .map(|&v| {
            if v < config.rx_sensitivity {
                config.noise_power
            } else {
                v
            }
        })
        .collect();
    RssMatrix {
        rows: rss.rows,
        cols: rss.cols,
        data,
    }
}
