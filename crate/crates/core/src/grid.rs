//! Hexagonal tessellation of a macrocell, reuse-slot assignment and the
//! link budget (SINR and normalized capacity) of a relaying hop.
//!
//! Subcells are addressed in axial coordinates `(q, r)` with a flat-top
//! layout. Ids are assigned ring by ring starting from the center subcell,
//! so id `0` is always the center (the base station by default).

use std::collections::HashMap;
use std::f64::consts::PI;

use crate::error::{check_positive, Error, Result};

/// The six axial unit steps, counterclockwise starting east.
pub const DIRECTIONS: [Axial; 6] = [
    Axial { q: 1, r: 0 },
    Axial { q: 1, r: -1 },
    Axial { q: 0, r: -1 },
    Axial { q: -1, r: 0 },
    Axial { q: -1, r: 1 },
    Axial { q: 0, r: 1 },
];

/// Smallest reuse factor for which co-slot transmissions are collision free.
pub const MIN_REUSE_FACTOR: u32 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Axial {
    pub q: i32,
    pub r: i32,
}

impl Axial {
    pub const ORIGIN: Axial = Axial { q: 0, r: 0 };

    pub fn new(q: i32, r: i32) -> Self {
        Axial { q, r }
    }

    /// Hex distance (number of steps) from the origin.
    pub fn ring(self) -> u32 {
        ((self.q.abs() + self.r.abs() + (self.q + self.r).abs()) / 2) as u32
    }

    pub fn scale(self, k: i32) -> Axial {
        Axial::new(self.q * k, self.r * k)
    }

    /// Rotation by 60 degrees counterclockwise about the origin.
    pub fn rotate_ccw(self) -> Axial {
        Axial::new(-self.r, self.q + self.r)
    }

    fn det(self, other: Axial) -> i64 {
        self.q as i64 * other.r as i64 - self.r as i64 * other.q as i64
    }
}

impl std::ops::Add for Axial {
    type Output = Axial;

    fn add(self, other: Axial) -> Axial {
        Axial::new(self.q + other.q, self.r + other.r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Physical-layer parameters shared by every relay in the cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioParams {
    /// Transmit power `P` in watts.
    pub transmit_power: f64,
    /// Receiver sensitivity in watts.
    pub sensitivity: f64,
    /// Path-loss exponent, at least 2.
    pub path_loss_exponent: f64,
    /// Background noise power in watts.
    pub noise_power: f64,
    /// Subcell radius `r` in meters.
    pub subcell_radius: f64,
}

impl RadioParams {
    pub fn new(
        transmit_power: f64,
        sensitivity: f64,
        path_loss_exponent: f64,
        noise_power: f64,
        subcell_radius: f64,
    ) -> Result<Self> {
        let radio = RadioParams {
            transmit_power,
            sensitivity,
            path_loss_exponent,
            noise_power,
            subcell_radius,
        };
        radio.validate()?;
        Ok(radio)
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("transmit_power", self.transmit_power)?;
        check_positive("sensitivity", self.sensitivity)?;
        check_positive("noise_power", self.noise_power)?;
        check_positive("subcell_radius", self.subcell_radius)?;
        if !(self.path_loss_exponent >= 2.0 && self.path_loss_exponent.is_finite()) {
            return Err(Error::invalid(
                "path_loss_exponent",
                format!("{} must be >= 2", self.path_loss_exponent),
            ));
        }
        let p_min = self.min_transmit_power();
        if self.transmit_power < p_min {
            return Err(Error::invalid(
                "transmit_power",
                format!(
                    "{} W is below the minimum {p_min} W needed to reach an adjacent relay",
                    self.transmit_power
                ),
            ));
        }
        Ok(())
    }

    /// Distance between centers of adjacent subcells, `sqrt(3) * r`.
    pub fn relaying_distance(&self) -> f64 {
        3f64.sqrt() * self.subcell_radius
    }

    /// Power at which the received signal at an adjacent relay equals the sensitivity.
    pub fn min_transmit_power(&self) -> f64 {
        self.sensitivity * self.relaying_distance().powf(self.path_loss_exponent)
    }

    /// Noise-to-signal term `N_r * d_r^alpha / P`.
    pub fn noise_term(&self) -> f64 {
        self.noise_power * self.relaying_distance().powf(self.path_loss_exponent)
            / self.transmit_power
    }
}

/// Co-channel interferer layout used in the SINR evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interference {
    /// Number of first-tier co-slot transmitters, 0 to 6.
    pub count: usize,
    /// Angular offset in radians added to every interferer angle.
    pub angle_offset: f64,
}

impl Interference {
    pub fn first_tier(count: usize) -> Self {
        Interference {
            count,
            angle_offset: 0.0,
        }
    }

    /// Separation angles `theta_i = 2 pi (i - 1) / 6 + offset`.
    pub fn angles(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.count).map(move |i| 2.0 * PI * i as f64 / 6.0 + self.angle_offset)
    }
}

/// Signal to interference plus noise ratio (linear) at a relay.
pub fn sinr(radio: &RadioParams, reuse_factor: u32, interference: Interference) -> Result<f64> {
    if reuse_factor < MIN_REUSE_FACTOR {
        return Err(Error::invalid(
            "reuse_factor",
            format!("{reuse_factor} < {MIN_REUSE_FACTOR}"),
        ));
    }
    if interference.count > 6 {
        return Err(Error::invalid(
            "interferer_count",
            format!("{} exceeds the 6 first-tier positions", interference.count),
        ));
    }
    let k = reuse_factor as f64;
    let half_alpha = radio.path_loss_exponent / 2.0;
    let interference_sum: f64 = interference
        .angles()
        .map(|theta| (1.0 + k - 2.0 * k.sqrt() * theta.cos()).powf(-half_alpha))
        .sum();
    Ok(1.0 / (radio.noise_term() + interference_sum))
}

/// Shannon capacity `log2(1 + SINR)` of one link, in bits/s/Hz.
pub fn link_capacity(sinr: f64) -> f64 {
    (1.0 + sinr).log2()
}

/// Normalized route capacity: the bottleneck link capacity divided by the
/// number of channels used on the route.
pub fn route_capacity(link_sinrs: &[f64], channels: u32) -> Result<f64> {
    if channels == 0 {
        return Err(Error::invalid(
            "channels",
            "at least one channel is required",
        ));
    }
    let bottleneck = link_sinrs
        .iter()
        .map(|&s| link_capacity(s))
        .reduce(f64::min)
        .ok_or(Error::EmptyRoute)?;
    Ok(bottleneck / channels as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subcell {
    pub id: usize,
    pub coord: Axial,
    pub center: Point,
}

/// A tessellated macrocell with its reuse-slot pattern.
#[derive(Debug, Clone)]
pub struct HexGrid {
    rings: u32,
    subcell_radius: f64,
    reuse_factor: u32,
    cells: Vec<Subcell>,
    slots: Vec<u32>,
    index: HashMap<Axial, usize>,
    destination: usize,
}

/// Number of subcells in a tessellation with `rings` rings around the center.
pub fn subcell_count(rings: u32) -> usize {
    let h = rings as usize;
    1 + 3 * h * (h + 1)
}

impl HexGrid {
    /// Builds the tessellation. The destination defaults to the center subcell.
    pub fn build(rings: u32, subcell_radius: f64, reuse_factor: u32) -> Result<Self> {
        if rings < 1 {
            return Err(Error::invalid("rings", "at least one ring is required"));
        }
        check_positive("subcell_radius", subcell_radius)?;
        let pattern = ReusePattern::new(reuse_factor)?;

        let mut cells = Vec::with_capacity(subcell_count(rings));
        let mut push = |coord: Axial| {
            let id = cells.len();
            cells.push(Subcell {
                id,
                coord,
                center: axial_to_point(coord, subcell_radius),
            });
        };
        push(Axial::ORIGIN);
        for k in 1..=rings as i32 {
            let mut cursor = DIRECTIONS[4].scale(k);
            for dir in DIRECTIONS {
                for _ in 0..k {
                    push(cursor);
                    cursor = cursor + dir;
                }
            }
        }

        let index = cells.iter().map(|c| (c.coord, c.id)).collect();
        let slots = cells.iter().map(|c| pattern.slot(c.coord)).collect();
        let grid = HexGrid {
            rings,
            subcell_radius,
            reuse_factor,
            cells,
            slots,
            index,
            destination: 0,
        };
        grid.check_slot_separation()?;
        Ok(grid)
    }

    /// Returns a copy of the grid routing toward `destination`.
    pub fn with_destination(mut self, destination: usize) -> Result<Self> {
        self.check_id(destination)?;
        self.destination = destination;
        Ok(self)
    }

    pub fn rings(&self) -> u32 {
        self.rings
    }

    pub fn reuse_factor(&self) -> u32 {
        self.reuse_factor
    }

    pub fn subcell_radius(&self) -> f64 {
        self.subcell_radius
    }

    pub fn relaying_distance(&self) -> f64 {
        3f64.sqrt() * self.subcell_radius
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn destination(&self) -> usize {
        self.destination
    }

    pub fn subcells(&self) -> &[Subcell] {
        &self.cells
    }

    pub fn subcell(&self, id: usize) -> Result<&Subcell> {
        self.cells.get(id).ok_or(Error::UnknownSubcell(id))
    }

    pub fn id_of(&self, coord: Axial) -> Option<usize> {
        self.index.get(&coord).copied()
    }

    /// Reuse slot `1..=K` of a subcell.
    pub fn slot_of(&self, id: usize) -> Result<u32> {
        self.slots.get(id).copied().ok_or(Error::UnknownSubcell(id))
    }

    pub fn distance(&self, a: usize, b: usize) -> Result<f64> {
        Ok(self.subcell(a)?.center.distance(self.subcell(b)?.center))
    }

    /// Ids of the subcells adjacent to `id`, in counterclockwise direction order.
    pub fn neighbors(&self, id: usize) -> Result<Vec<usize>> {
        let coord = self.subcell(id)?.coord;
        Ok(DIRECTIONS
            .iter()
            .filter_map(|d| self.id_of(coord + *d))
            .collect())
    }

    pub fn degree(&self, id: usize) -> Result<usize> {
        Ok(self.neighbors(id)?.len())
    }

    pub fn is_boundary(&self, id: usize) -> Result<bool> {
        Ok(self.subcell(id)?.coord.ring() == self.rings)
    }

    /// Neighbors of `source` ranked by relay priority toward `destination`.
    ///
    /// Primary key is the Euclidean distance from the neighbor's center to the
    /// destination's center. Equal distances are ordered by the
    /// counterclockwise angle, in `[0, 2 pi)`, between the source-to-destination
    /// ray and the source-to-neighbor ray. Position `m` of a neighbor is its
    /// index in the returned list plus one.
    pub fn neighbor_priority(&self, source: usize, destination: usize) -> Result<Vec<usize>> {
        self.check_id(destination)?;
        if source == destination {
            return Err(Error::invalid(
                "source",
                "source and destination must differ",
            ));
        }
        let src = self.subcell(source)?.center;
        let dst = self.subcell(destination)?.center;
        let ray = (dst.x - src.x, dst.y - src.y);
        let tol = 1e-9 * self.relaying_distance();

        let mut ranked: Vec<(usize, f64, f64)> = self
            .neighbors(source)?
            .into_iter()
            .map(|n| {
                let c = self.cells[n].center;
                let v = (c.x - src.x, c.y - src.y);
                let cross = ray.0 * v.1 - ray.1 * v.0;
                let dot = ray.0 * v.0 + ray.1 * v.1;
                let mut angle = cross.atan2(dot);
                if angle < -1e-12 {
                    angle += 2.0 * PI;
                }
                (n, c.distance(dst), angle.max(0.0))
            })
            .collect();
        ranked.sort_by(|a, b| {
            if (a.1 - b.1).abs() <= tol {
                a.2.total_cmp(&b.2)
            } else {
                a.1.total_cmp(&b.1)
            }
        });
        Ok(ranked.into_iter().map(|(n, _, _)| n).collect())
    }

    /// Smallest distance between two distinct subcells sharing a reuse slot,
    /// or `None` when every slot is used at most once.
    pub fn min_co_slot_distance(&self) -> Option<f64> {
        let mut best: Option<f64> = None;
        for i in 0..self.cells.len() {
            for j in (i + 1)..self.cells.len() {
                if self.slots[i] == self.slots[j] {
                    let d = self.cells[i].center.distance(self.cells[j].center);
                    best = Some(best.map_or(d, |b: f64| b.min(d)));
                }
            }
        }
        best
    }

    fn check_slot_separation(&self) -> Result<()> {
        let limit = 2.0 * self.relaying_distance();
        match self.min_co_slot_distance() {
            Some(d) if d <= limit * (1.0 + 1e-12) => Err(Error::invalid(
                "reuse_factor",
                format!("co-slot subcells only {d:.3} m apart, need > {limit:.3} m"),
            )),
            _ => Ok(()),
        }
    }

    fn check_id(&self, id: usize) -> Result<()> {
        if id < self.cells.len() {
            Ok(())
        } else {
            Err(Error::UnknownSubcell(id))
        }
    }
}

fn axial_to_point(coord: Axial, radius: f64) -> Point {
    let q = coord.q as f64;
    let r = coord.r as f64;
    Point {
        x: radius * 1.5 * q,
        y: radius * 3f64.sqrt() * (r + q / 2.0),
    }
}

/// Cluster tiling for a reuse factor `K = i^2 + i*j + j^2`.
///
/// Co-slot subcells form the lattice spanned by the shift `(i, j)` and its
/// 60 degree rotation. Two cells share a slot exactly when their difference
/// lies on that lattice, which is tested with integer determinants mod `K`.
#[derive(Debug, Clone)]
struct ReusePattern {
    k: i64,
    shift: Axial,
    shift_rot: Axial,
    labels: HashMap<(i64, i64), u32>,
}

impl ReusePattern {
    fn new(reuse_factor: u32) -> Result<Self> {
        if reuse_factor < MIN_REUSE_FACTOR {
            return Err(Error::invalid(
                "reuse_factor",
                format!("{reuse_factor} < {MIN_REUSE_FACTOR}: co-slot transmissions would collide"),
            ));
        }
        let k = reuse_factor as i64;
        let shift = (1..=reuse_factor as i32)
            .flat_map(|i| (0..=i).map(move |j| Axial::new(i, j)))
            .find(|a| {
                let (i, j) = (a.q as i64, a.r as i64);
                i * i + i * j + j * j == k
            })
            .ok_or_else(|| {
                Error::invalid(
                    "reuse_factor",
                    format!("{reuse_factor} is not of the form i^2 + i*j + j^2"),
                )
            })?;
        let mut pattern = ReusePattern {
            k,
            shift,
            shift_rot: shift.rotate_ccw(),
            labels: HashMap::new(),
        };
        let mut keys: Vec<(i64, i64)> = (0..reuse_factor as i32)
            .flat_map(|q| (0..reuse_factor as i32).map(move |r| Axial::new(q, r)))
            .map(|a| pattern.key(a))
            .collect();
        keys.sort_unstable();
        keys.dedup();
        debug_assert_eq!(keys.len() as i64, k);
        pattern.labels = keys
            .into_iter()
            .enumerate()
            .map(|(i, key)| (key, i as u32 + 1))
            .collect();
        Ok(pattern)
    }

    fn key(&self, a: Axial) -> (i64, i64) {
        (
            a.det(self.shift_rot).rem_euclid(self.k),
            self.shift.det(a).rem_euclid(self.k),
        )
    }

    fn slot(&self, a: Axial) -> u32 {
        self.labels[&self.key(a)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn default_radio() -> RadioParams {
        // d_r = 250 m
        RadioParams::new(0.75, 1e-5, 2.0, 1e-4, 250.0 / 3f64.sqrt()).unwrap()
    }

    #[test]
    fn smallest_grid() {
        let g = HexGrid::build(1, 100.0, 7).unwrap();
        assert_eq!(g.len(), 7);
        assert_eq!(g.degree(0).unwrap(), 6);
        assert_eq!(g.destination(), 0);
    }

    #[test]
    fn three_rings_has_37_subcells() {
        assert_eq!(HexGrid::build(3, 100.0, 7).unwrap().len(), 37);
    }

    #[test]
    fn count_matches_closed_form() {
        for h in 1..=10 {
            assert_eq!(HexGrid::build(h, 50.0, 7).unwrap().len(), subcell_count(h));
        }
    }

    #[test]
    fn co_slot_pairs_are_far_apart_brute_force() {
        let g = HexGrid::build(4, 100.0, 7).unwrap();
        assert_eq!(g.len(), 61);
        let limit = 2.0 * g.relaying_distance();
        let mut pairs = 0;
        for a in g.subcells() {
            for b in g.subcells() {
                if a.id != b.id && g.slot_of(a.id).unwrap() == g.slot_of(b.id).unwrap() {
                    assert!(a.center.distance(b.center) > limit);
                    pairs += 1;
                }
            }
        }
        assert!(pairs > 0);
        assert_relative_eq!(
            g.min_co_slot_distance().unwrap(),
            7f64.sqrt() * g.relaying_distance(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn k7_cluster_uses_every_slot_once() {
        let g = HexGrid::build(1, 100.0, 7).unwrap();
        let mut slots: Vec<u32> = (0..7).map(|i| g.slot_of(i).unwrap()).collect();
        slots.sort_unstable();
        assert_eq!(slots, (1..=7).collect::<Vec<_>>());
        assert_eq!(g.slot_of(0).unwrap(), 1);
    }

    #[test]
    fn larger_reuse_factors() {
        for k in [9, 12, 13, 19] {
            let g = HexGrid::build(4, 100.0, k).unwrap();
            let d = g.min_co_slot_distance().unwrap();
            assert_relative_eq!(
                d,
                (k as f64).sqrt() * g.relaying_distance(),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(HexGrid::build(0, 100.0, 7).is_err());
        assert!(HexGrid::build(2, 100.0, 3).is_err());
        assert!(HexGrid::build(2, 100.0, 4).is_err());
        assert!(HexGrid::build(2, 100.0, 8).is_err());
        assert!(HexGrid::build(2, -1.0, 7).is_err());
    }

    #[test]
    fn degrees_interior_and_boundary() {
        let g = HexGrid::build(3, 100.0, 7).unwrap();
        for c in g.subcells() {
            let deg = g.degree(c.id).unwrap();
            if g.is_boundary(c.id).unwrap() {
                assert!((3..=5).contains(&deg), "boundary degree {deg}");
            } else {
                assert_eq!(deg, 6);
            }
        }
    }

    #[test]
    fn ring_one_routes_straight_to_center() {
        let g = HexGrid::build(1, 100.0, 7).unwrap();
        for src in 1..7 {
            let ranked = g.neighbor_priority(src, 0).unwrap();
            assert_eq!(ranked[0], 0);
            assert_eq!(ranked.len(), 3);
        }
    }

    #[test]
    fn collinear_source_ties_follow_angle_rule() {
        let g = HexGrid::build(3, 100.0, 7).unwrap();
        let src = g.id_of(Axial::new(3, 0)).unwrap();
        let ranked = g.neighbor_priority(src, 0).unwrap();
        // On-axis neighbor first.
        assert_eq!(g.subcell(ranked[0]).unwrap().coord, Axial::new(2, 0));
        // The two flanking neighbors are equidistant from the center; the one
        // a small counterclockwise turn away from the ray comes first.
        let d1 = g.distance(ranked[1], 0).unwrap();
        let d2 = g.distance(ranked[2], 0).unwrap();
        assert_relative_eq!(d1, d2, max_relative = 1e-12);
        // Ray (3,0)->(0,0) has direction (-4.5, -2.598)·r. Neighbor (3,-1) sits at
        // offset (0, -1.732)·r: cross product +7.79 r^2, a counterclockwise turn.
        // Neighbor (2,1) sits at (-1.5, 0.866)·r: cross product -7.79 r^2.
        assert_eq!(g.subcell(ranked[1]).unwrap().coord, Axial::new(3, -1));
        assert_eq!(g.subcell(ranked[2]).unwrap().coord, Axial::new(2, 1));
    }

    #[test]
    fn corner_has_three_neighbors() {
        let g = HexGrid::build(4, 100.0, 7).unwrap();
        let corner = g.id_of(Axial::new(4, 0)).unwrap();
        assert_eq!(g.neighbor_priority(corner, 0).unwrap().len(), 3);
    }

    #[test]
    fn priority_rejects_same_endpoints() {
        let g = HexGrid::build(2, 100.0, 7).unwrap();
        assert!(g.neighbor_priority(3, 3).is_err());
        assert!(g.neighbor_priority(3, 999).is_err());
    }

    #[test]
    fn sinr_noise_only() {
        let r = default_radio();
        assert_relative_eq!(r.noise_term(), 8.333_333_333, max_relative = 1e-9);
        let s = sinr(&r, 7, Interference::first_tier(0)).unwrap();
        assert_relative_eq!(s, 0.12, max_relative = 1e-9);
    }

    #[test]
    fn sinr_full_first_tier() {
        // Six cosine terms evaluated by hand.
        let sq7 = 7f64.sqrt();
        let terms = [
            1.0 / (8.0 - 2.0 * sq7),
            1.0 / (8.0 - sq7),
            1.0 / (8.0 + sq7),
            1.0 / (8.0 + 2.0 * sq7),
            1.0 / (8.0 + sq7),
            1.0 / (8.0 - sq7),
        ];
        let sum: f64 = terms.iter().sum();
        assert!((sum - 1.006).abs() < 5e-4);
        let r = default_radio();
        let s = sinr(&r, 7, Interference::first_tier(6)).unwrap();
        assert_relative_eq!(s, 1.0 / (r.noise_term() + sum), max_relative = 1e-12);
        assert!((s - 0.107).abs() < 5e-4);
    }

    #[test]
    fn sinr_rejects_small_k() {
        assert!(sinr(&default_radio(), 4, Interference::first_tier(1)).is_err());
        assert!(sinr(&default_radio(), 7, Interference::first_tier(7)).is_err());
    }

    #[test]
    fn radio_minimum_power() {
        assert!(RadioParams::new(0.1, 1e-5, 2.0, 1e-4, 250.0 / 3f64.sqrt()).is_err());
        assert!(RadioParams::new(0.75, 1e-5, 1.5, 1e-4, 100.0).is_err());
    }

    #[test]
    fn capacity_examples() {
        assert_relative_eq!(route_capacity(&[1.0], 1).unwrap(), 1.0);
        assert_relative_eq!(route_capacity(&[1.0, 3.0], 1).unwrap(), 1.0);
        let c = route_capacity(&[0.107], 4).unwrap();
        assert!((c - 0.0366).abs() < 1e-4);
        assert_eq!(route_capacity(&[], 1), Err(Error::EmptyRoute));
        assert!(route_capacity(&[1.0], 0).is_err());
    }
}
