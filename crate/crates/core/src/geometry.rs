//! Base-station and mobile point processes, serving-station association and
//! the reference sector.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::propagation::{wrap_angle, ChannelParams};
use crate::Point;

/// Default number of hit-or-miss samples for [`sector_area`].
pub const DEFAULT_AREA_SAMPLES: usize = 100_000;
/// Default proposal budget per base station for [`sample_ucp`].
pub const DEFAULT_RETRY_BUDGET: usize = 1_000;

/// Disc (`inner == 0`) or annulus centred on the reference base station.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    inner: f64,
    outer: f64,
}

impl Region {
    pub fn annulus(inner: f64, outer: f64) -> Result<Self> {
        if !(inner >= 0.0 && outer > inner && outer.is_finite()) {
            return Err(Error::Domain(format!(
                "region needs 0 <= inner < outer, got inner = {inner}, outer = {outer}"
            )));
        }
        Ok(Self { inner, outer })
    }

    pub fn disc(radius: f64) -> Result<Self> {
        Self::annulus(0.0, radius)
    }

    pub fn inner(&self) -> f64 {
        self.inner
    }

    pub fn outer(&self) -> f64 {
        self.outer
    }

    pub fn area(&self) -> f64 {
        PI * (self.outer * self.outer - self.inner * self.inner)
    }

    pub fn contains(&self, p: Point) -> bool {
        let d = p.norm();
        d >= self.inner && d <= self.outer
    }

    /// One point uniform over the region.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let (a, b) = (self.inner * self.inner, self.outer * self.outer);
        let r = (a + rng.random::<f64>() * (b - a)).sqrt();
        let phi = PI * (2.0 * rng.random::<f64>() - 1.0);
        Point::from_polar(r, phi)
    }
}

/// Shape of the reference sector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SectorModel {
    /// Reference Voronoi cell intersected with the beam wedge.
    VoronoiWedge,
    /// Circular sector of the LOS disc.
    DiscWedge,
}

impl std::str::FromStr for SectorModel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "voronoi_wedge" => Ok(SectorModel::VoronoiWedge),
            "disc_wedge" => Ok(SectorModel::DiscWedge),
            other => Err(format!(
                "expected voronoi_wedge or disc_wedge, got `{other}`"
            )),
        }
    }
}

impl std::fmt::Display for SectorModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SectorModel::VoronoiWedge => "voronoi_wedge",
            SectorModel::DiscWedge => "disc_wedge",
        })
    }
}

/// Fixed sector beams shared by all base stations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectorLayout {
    /// Pointing direction of the reference sector, in `[0, 2pi)`.
    pub offset: f64,
    pub sectors_per_bs: u32,
    pub model: SectorModel,
    /// Radius of the disc used by [`SectorModel::DiscWedge`].
    pub disc_radius: f64,
}

impl SectorLayout {
    pub fn beamwidth(&self) -> f64 {
        2.0 * PI / self.sectors_per_bs as f64
    }

    fn in_wedge(&self, p: Point) -> bool {
        wrap_angle(p.arg() - self.offset).abs() <= self.beamwidth() / 2.0
    }

    /// One point uniform over the part of `region` inside the wedge.
    fn sample_wedge<R: Rng + ?Sized>(&self, region: &Region, rng: &mut R) -> Point {
        let (a, b) = (region.inner * region.inner, region.outer * region.outer);
        let r = (a + rng.random::<f64>() * (b - a)).sqrt();
        let phi = self.offset + self.beamwidth() * (rng.random::<f64>() - 0.5);
        Point::from_polar(r, phi)
    }

    fn wedge_area(&self, region: &Region) -> f64 {
        region.area() / self.sectors_per_bs as f64
    }
}

/// Uniform grid over the base stations for nearest-station queries.
#[derive(Debug, Clone)]
struct GridIndex {
    x0: f64,
    y0: f64,
    cell: f64,
    nx: i64,
    ny: i64,
    /// Cell `c` holds `members[starts[c]..starts[c + 1]]`.
    starts: Vec<u32>,
    members: Vec<(Point, u32)>,
}

impl GridIndex {
    fn build(points: &[Point]) -> Self {
        let (mut xmin, mut xmax, mut ymin, mut ymax) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for p in points {
            xmin = xmin.min(p.re);
            xmax = xmax.max(p.re);
            ymin = ymin.min(p.im);
            ymax = ymax.max(p.im);
        }
        let span = (xmax - xmin).max(ymax - ymin).max(1e-9);
        // about one station per cell
        let cell = ((xmax - xmin).max(1e-9) * (ymax - ymin).max(1e-9) / points.len() as f64)
            .sqrt()
            .clamp(span / 256.0, span);
        let nx = ((xmax - xmin) / cell).floor() as i64 + 1;
        let ny = ((ymax - ymin) / cell).floor() as i64 + 1;
        let cell_of = |p: &Point| {
            let cx = (((p.re - xmin) / cell).floor() as i64).clamp(0, nx - 1);
            let cy = (((p.im - ymin) / cell).floor() as i64).clamp(0, ny - 1);
            (cy * nx + cx) as usize
        };
        let mut counts = vec![0u32; (nx * ny) as usize + 1];
        for p in points {
            counts[cell_of(p) + 1] += 1;
        }
        for c in 1..counts.len() {
            counts[c] += counts[c - 1];
        }
        let mut fill = counts.clone();
        let mut members = vec![(Point::new(0.0, 0.0), 0u32); points.len()];
        for (i, p) in points.iter().enumerate() {
            let c = cell_of(p);
            members[fill[c] as usize] = (*p, i as u32);
            fill[c] += 1;
        }
        Self {
            x0: xmin,
            y0: ymin,
            cell,
            nx,
            ny,
            starts: counts,
            members,
        }
    }

    /// Index minimizing `max(|p - x|, floor)`, lowest index on ties.
    fn nearest(&self, x: Point, floor: f64) -> usize {
        let floor_sq = floor * floor;
        let cx = (((x.re - self.x0) / self.cell).floor() as i64).clamp(0, self.nx - 1);
        let cy = (((x.im - self.y0) / self.cell).floor() as i64).clamp(0, self.ny - 1);
        let mut best = (f64::INFINITY, u32::MAX);
        let scan = |c: i64, best: &mut (f64, u32)| {
            let c = c as usize;
            let range = self.starts[c] as usize..self.starts[c + 1] as usize;
            for &(p, j) in &self.members[range] {
                let key = (p - x).norm_sqr().max(floor_sq);
                if key < best.0 || (key == best.0 && j < best.1) {
                    *best = (key, j);
                }
            }
        };
        let mut k = 0i64;
        loop {
            for gy in (cy - k).max(0)..=(cy + k).min(self.ny - 1) {
                let row = gy * self.nx;
                if gy == cy - k || gy == cy + k {
                    for gx in (cx - k).max(0)..=(cx + k).min(self.nx - 1) {
                        scan(row + gx, &mut best);
                    }
                } else {
                    // interior of the ring was searched already
                    if cx - k >= 0 {
                        scan(row + cx - k, &mut best);
                    }
                    if k > 0 && cx + k < self.nx {
                        scan(row + cx + k, &mut best);
                    }
                }
            }
            let covers_all =
                cx - k <= 0 && cy - k <= 0 && cx + k >= self.nx - 1 && cy + k >= self.ny - 1;
            if covers_all {
                return best.1 as usize;
            }
            let left = x.re - (self.x0 + (cx - k) as f64 * self.cell);
            let right = self.x0 + (cx + k + 1) as f64 * self.cell - x.re;
            let bottom = x.im - (self.y0 + (cy - k) as f64 * self.cell);
            let top = self.y0 + (cy + k + 1) as f64 * self.cell - x.im;
            let bound = left.min(right).min(bottom).min(top).max(0.0);
            if best.0 < bound * bound {
                return best.1 as usize;
            }
            k += 1;
        }
    }
}

/// Base-station layout with the reference station at the origin.
#[derive(Debug, Clone)]
pub struct NetworkTopology {
    bs_positions: Vec<Point>,
    reference_index: usize,
    sectors: SectorLayout,
    index: GridIndex,
    cell: ReferenceCell,
}

/// Voronoi cell of the reference station, clipped to a square.
#[derive(Debug, Clone)]
struct ReferenceCell {
    half_width: f64,
    /// Stations whose bisectors bound the clipped cell.
    neighbors: Vec<usize>,
}

impl ReferenceCell {
    fn build(points: &[Point], reference: usize) -> Self {
        let reach = points.iter().map(|p| p.norm()).fold(1.0, f64::max);
        let h = 2.0 * reach;
        // vertex with the label of the edge leaving it
        let mut poly: Vec<(Point, Option<usize>)> = [(h, h), (-h, h), (-h, -h), (h, -h)]
            .iter()
            .map(|&(x, y)| (Point::new(x, y), None))
            .collect();
        for (j, y) in points.iter().enumerate() {
            if j == reference || y.norm() > 2.0 * h * std::f64::consts::SQRT_2 {
                continue;
            }
            let half = y.norm_sqr() / 2.0;
            let side = |p: Point| p.re * y.re + p.im * y.im - half;
            let mut next = Vec::with_capacity(poly.len() + 1);
            for i in 0..poly.len() {
                let (a, la) = poly[i];
                let (b, _) = poly[(i + 1) % poly.len()];
                let (sa, sb) = (side(a), side(b));
                if sa < 0.0 {
                    next.push((a, la));
                }
                if (sa < 0.0) != (sb < 0.0) {
                    let p = a + (b - a) * (sa / (sa - sb));
                    next.push((p, if sa < 0.0 { Some(j) } else { la }));
                }
            }
            poly = next;
        }
        let mut neighbors: Vec<usize> = poly.iter().filter_map(|v| v.1).collect();
        neighbors.sort_unstable();
        neighbors.dedup();
        Self {
            half_width: h,
            neighbors,
        }
    }
}

impl NetworkTopology {
    pub fn new(
        bs_positions: Vec<Point>,
        reference_index: usize,
        sectors: SectorLayout,
    ) -> Result<Self> {
        match bs_positions.get(reference_index) {
            Some(p) if p.norm_sqr() == 0.0 => {}
            _ => {
                return Err(Error::Domain(
                    "reference base station must exist and sit at the origin".into(),
                ))
            }
        }
        if !(0.0..2.0 * PI).contains(&sectors.offset) || sectors.sectors_per_bs == 0 {
            return Err(Error::Domain(format!(
                "sector offset must lie in [0, 2pi) and sectors_per_bs >= 1 (offset = {}, sectors = {})",
                sectors.offset, sectors.sectors_per_bs
            )));
        }
        let index = GridIndex::build(&bs_positions);
        let cell = ReferenceCell::build(&bs_positions, reference_index);
        Ok(Self {
            bs_positions,
            reference_index,
            sectors,
            index,
            cell,
        })
    }

    pub fn bs_positions(&self) -> &[Point] {
        &self.bs_positions
    }

    pub fn reference_index(&self) -> usize {
        self.reference_index
    }

    pub fn sectors(&self) -> &SectorLayout {
        &self.sectors
    }

    pub fn len(&self) -> usize {
        self.bs_positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bs_positions.is_empty()
    }

    /// Voronoi owner of `x` (nearest station, lowest index on ties).
    pub fn nearest(&self, x: Point) -> usize {
        self.index.nearest(x, 0.0)
    }

    /// Whether the reference station is the Voronoi owner of `x`.
    pub fn owned_by_reference(&self, x: Point) -> bool {
        let h = self.cell.half_width;
        if x.re.abs() >= h || x.im.abs() >= h {
            return self.nearest(x) == self.reference_index;
        }
        let own = x.norm_sqr();
        self.cell.neighbors.iter().all(|&j| {
            let d = (self.bs_positions[j] - x).norm_sqr();
            d > own || (d == own && j > self.reference_index)
        })
    }

    /// Serving station under `channel`'s path law. Equivalent to
    /// [`serving_bs`] with `channel.gain`, but uses the grid when the law is
    /// monotone.
    pub fn serving_index(&self, x: Point, channel: &ChannelParams) -> usize {
        if channel.is_monotone() {
            // gain is flat below d0, so distances there tie
            self.index.nearest(x, channel.d0)
        } else {
            serving_bs(x, self, |d| channel.gain(d))
        }
    }
}

/// Mobiles of one hop.
#[derive(Debug, Clone, PartialEq)]
pub struct MobileSet {
    pub positions: Vec<Point>,
    pub hop_index: u32,
    /// Candidates discarded because they fell in the reference sector.
    pub thinned: usize,
}

/// Hard-core base-station process by sequential inhibition.
///
/// The reference station is placed at the origin first; a Poisson number of
/// further stations with mean `intensity * region.area()` is then placed
/// one at a time, each from uniform proposals that are rejected while they
/// fall within `r_min` of an accepted station.
pub fn sample_ucp<R: Rng + ?Sized>(
    intensity: f64,
    r_min: f64,
    region: &Region,
    retry_budget: usize,
    sectors: SectorLayout,
    rng: &mut R,
) -> Result<NetworkTopology> {
    if !(intensity >= 0.0 && r_min >= 0.0) {
        return Err(Error::Domain(format!(
            "need intensity >= 0 and r_min >= 0, got {intensity} and {r_min}"
        )));
    }
    let target = poisson_count(intensity * region.area(), rng)?;
    let mut accepted = Vec::with_capacity(target + 1);
    accepted.push(Point::new(0.0, 0.0));
    let r2 = r_min * r_min;
    for placed in 0..target {
        let mut ok = false;
        for _ in 0..retry_budget.max(1) {
            let cand = region.sample(rng);
            if accepted.iter().all(|p: &Point| (p - cand).norm_sqr() >= r2) {
                accepted.push(cand);
                ok = true;
                break;
            }
        }
        if !ok {
            return Err(Error::PackingFailure {
                placed,
                target,
                budget: retry_budget,
            });
        }
    }
    NetworkTopology::new(accepted, 0, sectors)
}

fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> Result<usize> {
    if mean == 0.0 {
        return Ok(0);
    }
    let dist =
        Poisson::new(mean).map_err(|e| Error::Domain(format!("bad Poisson mean {mean}: {e}")))?;
    Ok(dist.sample(rng) as usize)
}

/// Mobile PPP over `region`, thinned to zero intensity inside the reference
/// sector of `exclusion` when given.
pub fn sample_ppp<R: Rng + ?Sized>(
    intensity: f64,
    region: &Region,
    exclusion: Option<&NetworkTopology>,
    hop_index: u32,
    rng: &mut R,
) -> Result<MobileSet> {
    if !(intensity >= 0.0) {
        return Err(Error::Domain(format!(
            "intensity must be >= 0, got {intensity}"
        )));
    }
    let n = poisson_count(intensity * region.area(), rng)?;
    let mut positions = Vec::with_capacity(n);
    let mut thinned = 0;
    for _ in 0..n {
        let p = region.sample(rng);
        if exclusion.is_some_and(|t| in_reference_sector(p, t)) {
            thinned += 1;
        } else {
            positions.push(p);
        }
    }
    Ok(MobileSet {
        positions,
        hop_index,
        thinned,
    })
}

/// Index of the station maximizing `path_loss(|Y_j - x|)`, lowest index on
/// ties.
pub fn serving_bs<F: Fn(f64) -> f64>(x: Point, topology: &NetworkTopology, path_loss: F) -> usize {
    let mut best = (f64::NEG_INFINITY, 0usize);
    for (j, y) in topology.bs_positions.iter().enumerate() {
        let g = path_loss((y - x).norm());
        if g > best.0 {
            best = (g, j);
        }
    }
    best.1
}

/// Membership in the reference sector.
pub fn in_reference_sector(x: Point, topology: &NetworkTopology) -> bool {
    topology.sectors.in_wedge(x) && in_sector_given_wedge(x, topology)
}

fn in_sector_given_wedge(x: Point, topology: &NetworkTopology) -> bool {
    let s = &topology.sectors;
    match s.model {
        SectorModel::VoronoiWedge => topology.owned_by_reference(x),
        SectorModel::DiscWedge => x.norm() <= s.disc_radius,
    }
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

fn hit_fraction(hits: usize, n: usize, area: f64) -> Estimate {
    let frac = hits as f64 / n as f64;
    Estimate {
        value: area * frac,
        stderr: area * (frac * (1.0 - frac) / n as f64).sqrt(),
    }
}

/// Hit-or-miss estimate of the reference-sector area inside `region`.
///
/// Samples are drawn from the wedge part of `region` only, since the sector
/// never leaves its wedge.
pub fn sector_area<R: Rng + ?Sized>(
    topology: &NetworkTopology,
    region: &Region,
    samples: usize,
    rng: &mut R,
) -> Estimate {
    let n = samples.max(1);
    let s = &topology.sectors;
    let hits = (0..n)
        .filter(|_| in_sector_given_wedge(s.sample_wedge(region, rng), topology))
        .count();
    hit_fraction(hits, n, s.wedge_area(region))
}

/// Sector area inside `region`, split at radius `split` into the inner and
/// outer parts, from one shared set of samples.
pub fn split_sector_area<R: Rng + ?Sized>(
    topology: &NetworkTopology,
    region: &Region,
    split: f64,
    samples: usize,
    rng: &mut R,
) -> (Estimate, Estimate) {
    let n = samples.max(1);
    let s = &topology.sectors;
    let (mut inner, mut outer) = (0, 0);
    for _ in 0..n {
        let x = s.sample_wedge(region, rng);
        if in_sector_given_wedge(x, topology) {
            if x.norm() <= split {
                inner += 1;
            } else {
                outer += 1;
            }
        }
    }
    let area = s.wedge_area(region);
    (hit_fraction(inner, n, area), hit_fraction(outer, n, area))
}
