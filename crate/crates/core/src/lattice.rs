//! Triangular lattice, bonds, cells, the hexagonal dual graph and the
//! cell-shift maps.
//!
//! Sites carry integer indices `(n, m)` with position
//! `(1/2 + n + m/2, sqrt(3)/6 + m sqrt(3)/2)`. Internally most geometry is done
//! in "third" coordinates `(P, Q)`, the integer coefficients of `x = (P a1 + Q a2) / 3`
//! relative to the origin. Sites have `P = Q = 1 (mod 3)`, up-cell barycentres
//! `2 (mod 3)` and down-cell barycentres `0 (mod 3)`.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Index-space offsets of the lattice directions a_1..a_6.
pub const DIRS: [(i64, i64); 6] = [(1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)];

/// Lattice direction, stored 0-based; `a_{k+1}` in one-based notation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Dir(u8);

impl Dir {
    pub const ALL: [Dir; 6] = [Dir(0), Dir(1), Dir(2), Dir(3), Dir(4), Dir(5)];

    /// Direction from a 0-based index, taken mod 6.
    pub fn new(k: i64) -> Dir {
        Dir(k.rem_euclid(6) as u8)
    }

    /// Direction from the one-based label `i in 1..=6`.
    pub fn from_label(i: u8) -> Result<Dir> {
        if (1..=6).contains(&i) {
            Ok(Dir(i - 1))
        } else {
            Err(Error::InvalidParameter(format!("direction label {i} not in 1..6")))
        }
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// One-based label.
    pub fn label(self) -> u8 {
        self.0 + 1
    }

    pub fn offset(self) -> (i64, i64) {
        DIRS[self.index()]
    }

    pub fn rotate(self, k: i64) -> Dir {
        Dir::new(self.0 as i64 + k)
    }

    pub fn reverse(self) -> Dir {
        self.rotate(3)
    }

    pub fn vector(self) -> [f64; 2] {
        let t = std::f64::consts::FRAC_PI_3 * self.0 as f64;
        match self.0 {
            0 => [1.0, 0.0],
            3 => [-1.0, 0.0],
            _ => [t.cos(), t.sin()],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Site {
    pub n: i64,
    pub m: i64,
}

impl Site {
    pub fn new(n: i64, m: i64) -> Site {
        Site { n, m }
    }

    pub fn position(self) -> [f64; 2] {
        let (n, m) = (self.n as f64, self.m as f64);
        [0.5 + n + 0.5 * m, SQRT3 * (1.0 / 6.0 + 0.5 * m)]
    }

    pub fn step(self, d: Dir) -> Site {
        let (dn, dm) = d.offset();
        Site::new(self.n + dn, self.m + dm)
    }

    pub fn norm(self) -> f64 {
        let p = self.position();
        p[0].hypot(p[1])
    }

    fn third(self) -> (i64, i64) {
        (3 * self.n + 1, 3 * self.m + 1)
    }

    fn from_third(p: i64, q: i64) -> Site {
        debug_assert!(p.rem_euclid(3) == 1 && q.rem_euclid(3) == 1);
        Site::new((p - 1).div_euclid(3), (q - 1).div_euclid(3))
    }
}

/// Oriented nearest-neighbour bond `(tail, tail + a_dir)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Bond {
    pub tail: Site,
    pub dir: Dir,
}

impl Bond {
    pub fn new(tail: Site, dir: Dir) -> Bond {
        Bond { tail, dir }
    }

    pub fn head(self) -> Site {
        self.tail.step(self.dir)
    }

    pub fn reverse(self) -> Bond {
        Bond::new(self.head(), self.dir.reverse())
    }

    /// Canonical representative (direction a_1, a_2 or a_3) and the sign relating them.
    pub fn canonical(self) -> (Bond, f64) {
        if self.dir.index() < 3 {
            (self, 1.0)
        } else {
            (self.reverse(), -1.0)
        }
    }

    pub fn is_canonical(self) -> bool {
        self.dir.index() < 3
    }

    pub fn midpoint(self) -> [f64; 2] {
        let (t, h) = (self.tail.position(), self.head().position());
        [0.5 * (t[0] + h[0]), 0.5 * (t[1] + h[1])]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Orientation {
    Up,
    Down,
}

/// Triangular 2-cell. `Up(n, m)` has vertices `(n,m), (n+1,m), (n,m+1)`;
/// `Down(n, m)` has vertices `(n+1,m), (n+1,m+1), (n,m+1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub n: i64,
    pub m: i64,
    pub orientation: Orientation,
}

/// Third-coordinate offsets from a down cell to the cell hit by `H_k`.
const HOP_DOWN: [(i64, i64); 6] = [(2, -1), (-1, 2), (-1, 2), (-1, -1), (-1, -1), (2, -1)];
/// Third-coordinate offsets from an up cell to the cell hit by `H_k`.
const HOP_UP: [(i64, i64); 6] = [(1, 1), (1, 1), (-2, 1), (-2, 1), (1, -2), (1, -2)];

impl Cell {
    /// The cell with barycentre 0.
    pub const C0: Cell = Cell { n: -1, m: -1, orientation: Orientation::Down };

    pub fn up(n: i64, m: i64) -> Cell {
        Cell { n, m, orientation: Orientation::Up }
    }

    pub fn down(n: i64, m: i64) -> Cell {
        Cell { n, m, orientation: Orientation::Down }
    }

    fn third(self) -> (i64, i64) {
        match self.orientation {
            Orientation::Up => (3 * self.n + 2, 3 * self.m + 2),
            Orientation::Down => (3 * self.n + 3, 3 * self.m + 3),
        }
    }

    fn from_third(p: i64, q: i64) -> Cell {
        match p.rem_euclid(3) {
            2 => Cell::up((p - 2).div_euclid(3), (q - 2).div_euclid(3)),
            0 => Cell::down(p.div_euclid(3) - 1, q.div_euclid(3) - 1),
            _ => panic!("third coordinates ({p}, {q}) are a site, not a cell"),
        }
    }

    /// Vertices in positive (counter-clockwise) order.
    pub fn vertices(self) -> [Site; 3] {
        let (n, m) = (self.n, self.m);
        match self.orientation {
            Orientation::Up => [Site::new(n, m), Site::new(n + 1, m), Site::new(n, m + 1)],
            Orientation::Down => [Site::new(n + 1, m), Site::new(n + 1, m + 1), Site::new(n, m + 1)],
        }
    }

    /// Positively oriented boundary bonds.
    pub fn boundary(self) -> [Bond; 3] {
        let v = self.vertices();
        match self.orientation {
            Orientation::Up => [Bond::new(v[0], Dir(0)), Bond::new(v[1], Dir(2)), Bond::new(v[2], Dir(4))],
            Orientation::Down => [Bond::new(v[0], Dir(1)), Bond::new(v[1], Dir(3)), Bond::new(v[2], Dir(5))],
        }
    }

    pub fn barycentre(self) -> [f64; 2] {
        third_position(self.third())
    }

    /// The three cells sharing an edge with this one.
    pub fn neighbours(self) -> [Cell; 3] {
        let (p, q) = self.third();
        let offs = match self.orientation {
            Orientation::Up => [(1, 1), (-2, 1), (1, -2)],
            Orientation::Down => [(-1, -1), (2, -1), (-1, 2)],
        };
        offs.map(|(dp, dq)| Cell::from_third(p + dp, q + dq))
    }

    /// Hop operator `H_{d}`: the adjacent cell in the direction of `a_d`, i.e. the cell
    /// containing `x^C + a_d / 2`.
    pub fn hop(self, d: Dir) -> Cell {
        let (p, q) = self.third();
        let (dp, dq) = match self.orientation {
            Orientation::Up => HOP_UP[d.index()],
            Orientation::Down => HOP_DOWN[d.index()],
        };
        Cell::from_third(p + dp, q + dq)
    }

    /// The oriented bond shared with an adjacent cell, oriented positively around `self`.
    pub fn shared_bond(self, other: Cell) -> Option<Bond> {
        let theirs = other.boundary();
        self.boundary().into_iter().find(|b| theirs.contains(&b.reverse()))
    }

    pub fn is_adjacent(self, other: Cell) -> bool {
        self.neighbours().contains(&other)
    }

    pub fn contains_point(self, x: [f64; 2]) -> bool {
        let v = self.vertices().map(Site::position);
        (0..3).all(|k| {
            let (a, b) = (v[k], v[(k + 1) % 3]);
            (b[0] - a[0]) * (x[1] - a[1]) - (b[1] - a[1]) * (x[0] - a[0]) >= -1e-12
        })
    }
}

fn third_position((p, q): (i64, i64)) -> [f64; 2] {
    let (p, q) = (p as f64, q as f64);
    [(p + 0.5 * q) / 3.0, q * SQRT3 / 6.0]
}

/// The cell containing a point (ties on edges resolved towards the up cell).
pub fn locate_cell(x: [f64; 2]) -> Cell {
    let t = (x[1] - SQRT3 / 6.0) / (0.5 * SQRT3);
    let s = x[0] - 0.5 - 0.5 * t;
    let (n, m) = (s.floor(), t.floor());
    if (s - n) + (t - m) < 1.0 {
        Cell::up(n as i64, m as i64)
    } else {
        Cell::down(n as i64, m as i64)
    }
}

fn seg_dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let t = (-(a[0] * d[0] + a[1] * d[1]) / (d[0] * d[0] + d[1] * d[1])).clamp(0.0, 1.0);
    (a[0] + t * d[0]).hypot(a[1] + t * d[1])
}

/// Distance from the origin to a site, bond or cell.
pub trait DistToOrigin {
    fn dist_to_origin(&self) -> f64;
}

impl DistToOrigin for Site {
    fn dist_to_origin(&self) -> f64 {
        self.norm()
    }
}

impl DistToOrigin for Bond {
    fn dist_to_origin(&self) -> f64 {
        seg_dist(self.tail.position(), self.head().position())
    }
}

impl DistToOrigin for Cell {
    fn dist_to_origin(&self) -> f64 {
        if self.contains_point([0.0, 0.0]) {
            return 0.0;
        }
        self.boundary().iter().map(|b| b.dist_to_origin()).fold(f64::INFINITY, f64::min)
    }
}

pub fn dist_to_origin<T: DistToOrigin>(x: &T) -> f64 {
    x.dist_to_origin()
}

/// Reference site pinned at `(0, -sqrt(3)/3)`, the bottom vertex of C0.
pub const XI_REF: Site = Site { n: 0, m: -1 };

/// Two-leg path from `XI_REF` to `xi`: `n` bonds along `a_i`, then `m` along `a_{i+1}`.
pub fn gamma_path(xi: Site) -> Vec<Bond> {
    let d = (xi.n - XI_REF.n, xi.m - XI_REF.m);
    if d == (0, 0) {
        return Vec::new();
    }
    let cross = |u: (i64, i64), v: (i64, i64)| u.0 * v.1 - u.1 * v.0;
    for i in Dir::ALL {
        let (a, b) = (i.offset(), i.rotate(1).offset());
        let n = cross(d, b);
        let m = cross(a, d);
        if n > 0 && m >= 0 {
            let mut path = Vec::with_capacity((n + m) as usize);
            let mut s = XI_REF;
            for _ in 0..n {
                path.push(Bond::new(s, i));
                s = s.step(i);
            }
            for _ in 0..m {
                path.push(Bond::new(s, i.rotate(1)));
                s = s.step(i.rotate(1));
            }
            return path;
        }
    }
    unreachable!("every lattice vector lies in a closed sextant cone")
}

/// Affine lattice symmetry `F^C` with `F^C(C0) = C`: a translation by `x^C` when `C`
/// is a down cell, otherwise a rotation by pi/3 about the origin followed by it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellShift {
    rotate: bool,
    shift: (i64, i64),
}

impl CellShift {
    pub fn identity() -> CellShift {
        CellShift { rotate: false, shift: (0, 0) }
    }

    pub fn is_rotation(&self) -> bool {
        self.rotate
    }

    pub fn translation(&self) -> [f64; 2] {
        third_position(self.shift)
    }

    fn apply_third(&self, (p, q): (i64, i64)) -> (i64, i64) {
        let (p, q) = if self.rotate { (-q, p + q) } else { (p, q) };
        (p + self.shift.0, q + self.shift.1)
    }

    fn invert_third(&self, (p, q): (i64, i64)) -> (i64, i64) {
        let (p, q) = (p - self.shift.0, q - self.shift.1);
        if self.rotate {
            (p + q, -p)
        } else {
            (p, q)
        }
    }

    pub fn site(&self, s: Site) -> Site {
        let (p, q) = self.apply_third(s.third());
        Site::from_third(p, q)
    }

    pub fn site_inv(&self, s: Site) -> Site {
        let (p, q) = self.invert_third(s.third());
        Site::from_third(p, q)
    }

    pub fn cell(&self, c: Cell) -> Cell {
        let (p, q) = self.apply_third(c.third());
        Cell::from_third(p, q)
    }

    pub fn cell_inv(&self, c: Cell) -> Cell {
        let (p, q) = self.invert_third(c.third());
        Cell::from_third(p, q)
    }

    pub fn bond(&self, b: Bond) -> Bond {
        Bond::new(self.site(b.tail), if self.rotate { b.dir.rotate(1) } else { b.dir })
    }

    pub fn point(&self, x: [f64; 2]) -> [f64; 2] {
        let y = if self.rotate {
            let (c, s) = (0.5, 0.5 * SQRT3);
            [c * x[0] - s * x[1], s * x[0] + c * x[1]]
        } else {
            x
        };
        let t = self.translation();
        [y[0] + t[0], y[1] + t[1]]
    }
}

pub fn cell_shift_map(c: Cell) -> CellShift {
    let f = CellShift { rotate: c.orientation == Orientation::Up, shift: c.third() };
    assert_eq!(f.cell(Cell::C0), c, "cell shift must map C0 onto the target cell");
    f
}

/// Indices of the strips between consecutive lattice lines of constant `n`, `m` and
/// `n + m` containing the cell.
fn strip_indices(c: Cell) -> [i64; 3] {
    let s = c.n + c.m + matches!(c.orientation, Orientation::Down) as i64;
    [c.n, c.m, s]
}

/// Dual-graph distance between two cells on the infinite lattice: the number of lattice
/// lines separating them.
pub fn hop_distance(a: Cell, b: Cell) -> usize {
    let (x, y) = (strip_indices(a), strip_indices(b));
    (0..3).map(|k| (x[k] - y[k]).unsigned_abs() as usize).sum()
}

/// Breadth-first reference for [`hop_distance`].
pub fn hop_distance_bfs(a: Cell, b: Cell) -> usize {
    if a == b {
        return 0;
    }
    let mut dist: HashMap<Cell, usize> = HashMap::from([(a, 0)]);
    let mut queue = VecDeque::from([a]);
    while let Some(c) = queue.pop_front() {
        let d = dist[&c];
        for nb in c.neighbours() {
            if nb == b {
                return d + 1;
            }
            if !dist.contains_key(&nb) {
                dist.insert(nb, d + 1);
                queue.push_back(nb);
            }
        }
    }
    unreachable!()
}

/// Dual-graph distances from `a` to every cell within `max` hops.
pub fn hop_ball(a: Cell, max: usize) -> HashMap<Cell, usize> {
    let mut dist: HashMap<Cell, usize> = HashMap::from([(a, 0)]);
    let mut queue = VecDeque::from([a]);
    while let Some(c) = queue.pop_front() {
        let d = dist[&c];
        if d == max {
            continue;
        }
        for nb in c.neighbours() {
            if !dist.contains_key(&nb) {
                dist.insert(nb, d + 1);
                queue.push_back(nb);
            }
        }
    }
    dist
}

#[derive(Clone, Copy, Debug)]
pub struct StarEntry {
    pub bond: usize,
    /// +1 when the outward bond is the canonical orientation.
    pub sign: f64,
    pub neighbour: usize,
}

/// Finite disk-shaped patch of the lattice.
#[derive(Clone, Debug)]
pub struct LatticeDomain {
    radius: f64,
    sites: Vec<Site>,
    site_index: HashMap<Site, usize>,
    bonds: Vec<Bond>,
    bond_index: HashMap<Bond, usize>,
    cells: Vec<Cell>,
    cell_index: HashMap<Cell, usize>,
    stars: Vec<[Option<StarEntry>; 6]>,
    cell_bonds: Vec<[(usize, f64); 3]>,
    cell_adjacent: Vec<Vec<usize>>,
    bond_cells: Vec<[Option<usize>; 2]>,
}

pub const MIN_RADIUS: f64 = 3.0;

impl LatticeDomain {
    pub fn new(radius: f64) -> Result<LatticeDomain> {
        if !(radius >= MIN_RADIUS) || !radius.is_finite() {
            return Err(Error::InvalidParameter(format!("domain radius {radius} below minimum {MIN_RADIUS}")));
        }
        let k = (2.0 * radius / SQRT3).ceil() as i64 + 2;
        let mut sites = Vec::new();
        for m in -k..=k {
            for n in -2 * k..=2 * k {
                let s = Site::new(n, m);
                if s.norm() <= radius {
                    sites.push(s);
                }
            }
        }
        Ok(Self::from_sites(radius, sites))
    }

    fn from_sites(radius: f64, sites: Vec<Site>) -> LatticeDomain {
        let site_index: HashMap<Site, usize> = sites.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        let mut bonds = Vec::new();
        for &s in &sites {
            for d in &Dir::ALL[..3] {
                let b = Bond::new(s, *d);
                if site_index.contains_key(&b.head()) {
                    bonds.push(b);
                }
            }
        }
        let bond_index: HashMap<Bond, usize> = bonds.iter().enumerate().map(|(i, &b)| (b, i)).collect();
        let stars = sites
            .iter()
            .map(|&s| {
                Dir::ALL.map(|d| {
                    let (c, sign) = Bond::new(s, d).canonical();
                    bond_index.get(&c).map(|&bond| StarEntry { bond, sign, neighbour: site_index[&s.step(d)] })
                })
            })
            .collect();
        let mut cells = Vec::new();
        for &s in &sites {
            for c in [Cell::up(s.n, s.m), Cell::down(s.n, s.m)] {
                if c.vertices().iter().all(|v| site_index.contains_key(v)) {
                    cells.push(c);
                }
            }
        }
        let cell_index: HashMap<Cell, usize> = cells.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        let cell_bonds: Vec<[(usize, f64); 3]> = cells
            .iter()
            .map(|c| {
                c.boundary().map(|b| {
                    let (cb, sign) = b.canonical();
                    (bond_index[&cb], sign)
                })
            })
            .collect();
        let cell_adjacent = cells
            .iter()
            .map(|c| c.neighbours().iter().filter_map(|nb| cell_index.get(nb).copied()).collect())
            .collect();
        let mut bond_cells = vec![[None, None]; bonds.len()];
        for (ci, cb) in cell_bonds.iter().enumerate() {
            for &(b, sign) in cb.iter() {
                bond_cells[b][if sign > 0.0 { 0 } else { 1 }] = Some(ci);
            }
        }
        LatticeDomain {
            radius,
            sites,
            site_index,
            bonds,
            bond_index,
            cells,
            cell_index,
            stars,
            cell_bonds,
            cell_adjacent,
            bond_cells,
        }
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    /// Canonical bonds (directions a_1, a_2, a_3).
    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn num_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn num_bonds(&self) -> usize {
        self.bonds.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn site_id(&self, s: Site) -> Option<usize> {
        self.site_index.get(&s).copied()
    }

    pub fn cell_id(&self, c: Cell) -> Option<usize> {
        self.cell_index.get(&c).copied()
    }

    /// Index of the canonical bond and the sign relating it to `b`.
    pub fn bond_id(&self, b: Bond) -> Option<(usize, f64)> {
        let (c, sign) = b.canonical();
        self.bond_index.get(&c).map(|&i| (i, sign))
    }

    pub fn require_site(&self, s: Site) -> Result<usize> {
        self.site_id(s).ok_or_else(|| Error::OutsideDomain(format!("site ({}, {})", s.n, s.m)))
    }

    pub fn require_cell(&self, c: Cell) -> Result<usize> {
        self.cell_id(c).ok_or_else(|| Error::OutsideDomain(format!("cell {c:?}")))
    }

    pub fn require_bond(&self, b: Bond) -> Result<(usize, f64)> {
        self.bond_id(b)
            .ok_or_else(|| Error::OutsideDomain(format!("bond ({}, {}) dir {}", b.tail.n, b.tail.m, b.dir.label())))
    }

    /// Outward bonds of a site in direction order; `None` where the neighbour is missing.
    pub fn star(&self, site: usize) -> &[Option<StarEntry>; 6] {
        &self.stars[site]
    }

    pub fn has_full_star(&self, site: usize) -> bool {
        self.stars[site].iter().all(Option::is_some)
    }

    /// Canonical bond ids and signs of the positively oriented boundary of a cell.
    pub fn cell_boundary(&self, cell: usize) -> &[(usize, f64); 3] {
        &self.cell_bonds[cell]
    }

    /// Cells on either side of a canonical bond: `[left, right]`, where the bond is
    /// positively oriented around `left`.
    pub fn bond_cells(&self, bond: usize) -> [Option<usize>; 2] {
        self.bond_cells[bond]
    }

    /// Dual-graph neighbours present in the domain.
    pub fn cell_neighbours(&self, cell: usize) -> &[usize] {
        &self.cell_adjacent[cell]
    }

    pub fn c0(&self) -> usize {
        self.cell_index[&Cell::C0]
    }

    pub fn xi_ref(&self) -> usize {
        self.site_index[&XI_REF]
    }

    /// Endpoint site ids of a canonical bond.
    pub fn bond_ends(&self, bond: usize) -> (usize, usize) {
        let b = self.bonds[bond];
        (self.site_index[&b.tail], self.site_index[&b.head()])
    }

    pub fn hop2(&self, a: Cell, b: Cell) -> Result<usize> {
        self.require_cell(a)?;
        self.require_cell(b)?;
        Ok(hop_distance(a, b))
    }

    pub fn hop_op(&self, c: Cell, d: Dir) -> Result<Cell> {
        self.require_cell(c)?;
        let h = c.hop(d);
        self.require_cell(h)?;
        Ok(h)
    }

    /// Oriented bonds on the boundary of the union of all domain cells, each
    /// oriented positively with respect to that union.
    pub fn boundary_chain(&self) -> Vec<Bond> {
        let mut out = Vec::new();
        for &c in &self.cells {
            for nb in c.neighbours() {
                if !self.cell_index.contains_key(&nb) {
                    out.push(c.shared_bond(nb).expect("neighbours share an edge"));
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        let doc = DomainDoc {
            schema_version: crate::SCHEMA_VERSION,
            radius: self.radius,
            sites: self.sites.iter().map(|s| [s.n, s.m]).collect(),
        };
        serde_json::to_string(&doc).expect("domain serializes")
    }

    pub fn from_json(text: &str) -> Result<LatticeDomain> {
        let doc: DomainDoc = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        let built = LatticeDomain::new(doc.radius)?;
        let listed: Vec<Site> = doc.sites.iter().map(|p| Site::new(p[0], p[1])).collect();
        if listed != built.sites {
            return Err(Error::Format("site list does not match the disk of the stated radius".into()));
        }
        Ok(built)
    }
}

#[derive(Serialize, Deserialize)]
struct DomainDoc {
    schema_version: u32,
    radius: f64,
    sites: Vec<[i64; 2]>,
}
