//! Dislocation cores, Burgers vectors, branch cuts and their minimal connections.

use serde::{Deserialize, Serialize};

use crate::elastic::{alpha_hat, yhat};
use crate::error::{Error, Result};
use crate::forms::{
    cell_circulation, cleanup_adjacent_cores, difference, integrate, wrap, Displacement, IntegerForm, OneForm,
    CIRCULATION_TOL,
};
use crate::lattice::{cell_shift_map, hop_distance, Bond, Cell, CellShift, Dir, DistToOrigin, LatticeDomain};
use crate::potential::Potential;

/// Signed dislocation cores. A cell of circulation `+-k` appears `k` times.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoreSet {
    pub positive: Vec<Cell>,
    pub negative: Vec<Cell>,
}

impl CoreSet {
    pub fn is_empty(&self) -> bool {
        self.positive.is_empty() && self.negative.is_empty()
    }

    /// `#C^+ + #C^-`.
    pub fn count(&self) -> usize {
        self.positive.len() + self.negative.len()
    }

    pub fn net(&self) -> i64 {
        self.positive.len() as i64 - self.negative.len() as i64
    }

    pub fn circulation(&self, c: Cell) -> i64 {
        let n = |v: &Vec<Cell>| v.iter().filter(|&&x| x == c).count() as i64;
        n(&self.positive) - n(&self.negative)
    }
}

fn scan_cores(domain: &LatticeDomain, w: &OneForm, mask: Option<&[bool]>, max_mult: i64) -> Result<CoreSet> {
    let mut set = CoreSet::default();
    for (ci, &cell) in domain.cells().iter().enumerate() {
        if mask.is_some_and(|m| !m[ci]) {
            continue;
        }
        let c = cell_circulation(domain, w, ci);
        let k = c.round();
        if (c - k).abs() > CIRCULATION_TOL {
            return Err(Error::Internal(format!("circulation {c} around {cell:?} is not an integer")));
        }
        let k = k as i64;
        if k.abs() > max_mult {
            return Err(Error::Internal(format!("circulation {k} around {cell:?} exceeds {max_mult} in magnitude")));
        }
        let list = if k > 0 { &mut set.positive } else { &mut set.negative };
        for _ in 0..k.abs() {
            list.push(cell);
        }
    }
    Ok(set)
}

/// Cells with nonzero circulation of a wrapped bond-length form, in domain cell order.
pub fn detect_cores(domain: &LatticeDomain, alpha: &OneForm) -> Result<CoreSet> {
    scan_cores(domain, alpha, None, 1)
}

/// As [`detect_cores`], over the cells selected by `mask`.
pub fn detect_cores_masked(domain: &LatticeDomain, alpha: &OneForm, mask: &[bool]) -> Result<CoreSet> {
    scan_cores(domain, alpha, Some(mask), 1)
}

/// Cores of `beta = alpha - alpha_hat`. Removing the necessary core can leave a
/// circulation of `-2` at C0, which is recorded with multiplicity.
pub fn beta_cores(domain: &LatticeDomain, beta: &OneForm) -> Result<CoreSet> {
    scan_cores(domain, beta, None, 2)
}

/// `alpha = cleanup(wrap(alpha_hat + Du))` for a corrector of the `yhat` reference.
pub fn bond_length_form(domain: &LatticeDomain, u: &Displacement) -> Result<OneForm> {
    let strain = OneForm::from_fn(domain, alpha_hat).add(&difference(domain, u));
    cleanup_adjacent_cores(domain, &wrap(&strain))
}

/// `beta = alpha - alpha_hat`.
pub fn beta_form(domain: &LatticeDomain, alpha: &OneForm) -> OneForm {
    alpha.sub(&OneForm::from_fn(domain, alpha_hat))
}

/// Largest `|alpha_b|` admitted on the outer annulus by [`net_burgers`].
pub const FAR_FIELD_MAX: f64 = 0.4;
/// Width of the outer annulus checked by [`net_burgers`].
pub const FAR_FIELD_WIDTH: f64 = 2.5;

/// Net Burgers vector: the sum of core signs, cross-checked against the loop integral
/// of `alpha` around the domain boundary.
pub fn net_burgers(domain: &LatticeDomain, alpha: &OneForm) -> Result<i64> {
    let far = domain.radius() - FAR_FIELD_WIDTH;
    let max = domain
        .bonds()
        .iter()
        .enumerate()
        .filter(|(_, b)| b.dist_to_origin() >= far)
        .map(|(i, _)| alpha[i].abs())
        .fold(0.0, f64::max);
    if max >= FAR_FIELD_MAX {
        return Err(Error::FarField { max });
    }
    let cores = detect_cores(domain, alpha)?;
    let loop_integral = integrate(domain, alpha, &domain.boundary_chain())?;
    if (loop_integral - cores.net() as f64).abs() > 1e-6 {
        return Err(Error::Internal(format!(
            "loop integral {loop_integral} disagrees with core count {}",
            cores.net()
        )));
    }
    Ok(cores.net())
}

/// Minimum-cost perfect assignment (Hungarian method with potentials). Returns the
/// column matched to each row and the total cost. Ties resolve deterministically.
pub fn min_cost_assignment(cost: &[Vec<i64>]) -> (Vec<usize>, i64) {
    let n = cost.len();
    if n == 0 {
        return (Vec::new(), 0);
    }
    const INF: i64 = i64::MAX / 4;
    // 1-based arrays; column 0 is a virtual start.
    let mut pot_r = vec![0i64; n + 1];
    let mut pot_c = vec![0i64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0;
        let mut min_v = vec![INF; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = INF;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - pot_r[i0] - pot_c[j];
                if cur < min_v[j] {
                    min_v[j] = cur;
                    way[j] = j0;
                }
                if min_v[j] < delta {
                    delta = min_v[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    pot_r[owner[j]] += delta;
                    pot_c[j] -= delta;
                } else {
                    min_v[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        assign[owner[j] - 1] = j - 1;
    }
    let total = (0..n).map(|i| cost[i][assign[i]]).sum();
    (assign, total)
}

/// Minimal `sum hop2(C+_m, C-_sigma(m))` over pairings, with the pairing.
pub fn min_cost_matching(positive: &[Cell], negative: &[Cell]) -> Result<(Vec<(Cell, Cell)>, usize)> {
    if positive.len() != negative.len() {
        return Err(Error::UnbalancedCores { positive: positive.len(), negative: negative.len() });
    }
    let cost: Vec<Vec<i64>> =
        positive.iter().map(|&p| negative.iter().map(|&q| hop_distance(p, q) as i64).collect()).collect();
    let (assign, total) = min_cost_assignment(&cost);
    let pairs = positive.iter().zip(&assign).map(|(&p, &j)| (p, negative[j])).collect();
    Ok((pairs, total as usize))
}

/// A maximal run of hops in one direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    /// Direction label in `1..=6`.
    pub dir: u8,
    pub len: usize,
}

/// Dual-lattice path as its sequence of cells, with its straight-segment annotation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DualPath {
    pub cells: Vec<Cell>,
    pub segments: Vec<Segment>,
}

impl DualPath {
    pub fn len(&self) -> usize {
        self.cells.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn start(&self) -> Cell {
        self.cells[0]
    }

    pub fn end(&self) -> Cell {
        *self.cells.last().expect("paths have at least one cell")
    }

    /// Crossed bonds, each oriented positively around the cell it enters.
    pub fn bonds(&self) -> Vec<Bond> {
        self.cells.windows(2).map(|w| w[1].shared_bond(w[0]).expect("consecutive cells are adjacent")).collect()
    }
}

/// Cells visited by applying `H_i` `k` times and then `H_{i+1}` `n - k` times.
pub fn word_cells(start: Cell, i: Dir, k: usize, n: usize) -> Vec<Cell> {
    let mut cells = Vec::with_capacity(n + 1);
    let mut c = start;
    cells.push(c);
    for step in 0..n {
        c = c.hop(if step < k { i } else { i.rotate(1) });
        cells.push(c);
    }
    cells
}

/// Greedy decomposition of a cell path into maximal straight runs; minimal in the
/// number of runs since every sub-run of a straight run is straight.
pub fn segments(cells: &[Cell]) -> Vec<Segment> {
    let mut out = Vec::new();
    let mut pos = 0;
    while pos + 1 < cells.len() {
        let mut best: Option<(Dir, usize)> = None;
        for d in Dir::ALL {
            let run = cells[pos..].windows(2).take_while(|w| w[0].hop(d) == w[1]).count();
            if run > 0 && best.map_or(true, |(_, r)| run > r) {
                best = Some((d, run));
            }
        }
        let (d, run) = best.unwrap_or_else(|| panic!("cells {:?} and {:?} are not hop-adjacent", cells[pos], cells[pos + 1]));
        out.push(Segment { dir: d.label(), len: run });
        pos += run;
    }
    out
}

/// The geodesic `H_{i+1}^{N-k} H_i^k` from `a` to `b`, smallest `i` then smallest `k`.
pub fn canonical_geodesic(a: Cell, b: Cell) -> Result<DualPath> {
    let n = hop_distance(a, b);
    for i in Dir::ALL {
        for k in 0..=n {
            let cells = word_cells(a, i, k, n);
            if cells[n] == b {
                let segments = segments(&cells);
                return Ok(DualPath { cells, segments });
            }
        }
    }
    Err(Error::Internal(format!("no two-letter geodesic word from {a:?} to {b:?}")))
}

/// Rewrites a dual geodesic into at most two straight segments with the same endpoints.
pub fn straighten(cells: &[Cell]) -> Result<DualPath> {
    let (Some(&a), Some(&b)) = (cells.first(), cells.last()) else {
        return Err(Error::NotGeodesic("empty path".into()));
    };
    if let Some(w) = cells.windows(2).find(|w| !w[0].is_adjacent(w[1])) {
        return Err(Error::NotGeodesic(format!("{:?} and {:?} are not adjacent", w[0], w[1])));
    }
    let n = hop_distance(a, b);
    if cells.len() - 1 != n {
        return Err(Error::NotGeodesic(format!("length {} exceeds hop distance {n}", cells.len() - 1)));
    }
    let segs = segments(cells);
    if segs.len() <= 2 {
        return Ok(DualPath { cells: cells.to_vec(), segments: segs });
    }
    canonical_geodesic(a, b)
}

/// A minimal cut connecting one positive core to one negative core.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CutPath {
    pub positive: Cell,
    pub negative: Cell,
    pub path: DualPath,
}

#[derive(Clone, Debug)]
pub struct CutDecomposition {
    /// `z = Du' - beta` for the shifted corrector `u' = u + U`.
    pub z: IntegerForm,
    pub paths: Vec<CutPath>,
    /// Integer vertical shift `U`, one value per site.
    pub shift: Vec<i64>,
    /// `||z||_1` before the minimal connection was imposed.
    pub initial_length: i64,
}

impl CutDecomposition {
    pub fn length(&self) -> i64 {
        self.z.norm_l1()
    }

    /// `u + U`.
    pub fn apply(&self, u: &Displacement) -> Displacement {
        Displacement::from_values(u.values().iter().zip(&self.shift).map(|(v, &k)| v + k as f64).collect())
    }

    /// The form `z^m` of a single cut.
    pub fn path_form(&self, domain: &LatticeDomain, m: usize) -> Result<IntegerForm> {
        let mut z = IntegerForm::zeros(domain);
        for b in self.paths[m].path.bonds() {
            z.add_to(domain, b, 1)?;
        }
        Ok(z)
    }

    pub fn summary(&self) -> CutSummary {
        CutSummary {
            length: self.length(),
            initial_length: self.initial_length,
            cuts: self
                .paths
                .iter()
                .map(|c| CutRecord {
                    positive: c.positive,
                    negative: c.negative,
                    length: c.path.len(),
                    segments: c.path.segments.clone(),
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CutRecord {
    pub positive: Cell,
    pub negative: Cell,
    pub length: usize,
    pub segments: Vec<Segment>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CutSummary {
    pub length: i64,
    pub initial_length: i64,
    pub cuts: Vec<CutRecord>,
}

/// Replaces the branch cut `z = Du - beta` by a minimal one: cores of `beta` are paired
/// by a minimum-cost matching under `hop2`, each pair is joined by its canonical
/// geodesic, and the integer shift `U` with `D(u + U) = beta + z_new` is returned.
pub fn dmcp(domain: &LatticeDomain, u: &Displacement, beta: &OneForm) -> Result<CutDecomposition> {
    let z_old = IntegerForm::from_real(&difference(domain, u).sub(beta), 1e-6)?;
    let cores = beta_cores(domain, beta)?;
    let (pairs, _) = min_cost_matching(&cores.positive, &cores.negative)?;
    let mut z = IntegerForm::zeros(domain);
    let mut paths = Vec::with_capacity(pairs.len());
    for (p, q) in pairs {
        let path = canonical_geodesic(p, q)?;
        for c in &path.cells {
            domain.require_cell(*c)?;
        }
        for b in path.bonds() {
            z.add_to(domain, b, 1)?;
        }
        paths.push(CutPath { positive: p, negative: q, path });
    }
    let delta: Vec<i64> = z.values().iter().zip(z_old.values()).map(|(a, b)| a - b).collect();
    let shift = integrate_exact(domain, &delta)?;
    Ok(CutDecomposition { z, paths, shift, initial_length: z_old.norm_l1() })
}

/// Integrates an exact integer form from the outermost site, where `U = 0`.
fn integrate_exact(domain: &LatticeDomain, w: &[i64]) -> Result<Vec<i64>> {
    let n = domain.num_sites();
    let start = (0..n)
        .max_by(|&a, &b| domain.sites()[a].norm().total_cmp(&domain.sites()[b].norm()).then(b.cmp(&a)))
        .expect("domain has sites");
    let mut val: Vec<Option<i64>> = vec![None; n];
    val[start] = Some(0);
    let mut stack = vec![start];
    while let Some(i) = stack.pop() {
        let vi = val[i].expect("visited");
        for e in domain.star(i).iter().flatten() {
            let step = if e.sign > 0.0 { w[e.bond] } else { -w[e.bond] };
            match val[e.neighbour] {
                None => {
                    val[e.neighbour] = Some(vi + step);
                    stack.push(e.neighbour);
                }
                Some(v) if v != vi + step => {
                    return Err(Error::Internal("cut difference is not exact".into()));
                }
                Some(_) => {}
            }
        }
    }
    Ok(val.into_iter().map(|v| v.unwrap_or(0)).collect())
}

/// Hop-minimality of a cut decomposition relative to the origin cell.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct HopMinimality {
    /// `hop2(C0, C-_m) >= hop2(C+_m, C-_m)` for every cut.
    pub weak: bool,
    /// `hop2(C0, C) >= hop2(C+_m, C)` for every cell `C` on every cut.
    pub strong: bool,
}

pub fn hop_minimality(cut: &CutDecomposition) -> HopMinimality {
    let weak = cut.paths.iter().all(|c| hop_distance(Cell::C0, c.negative) >= hop_distance(c.positive, c.negative));
    let strong = cut
        .paths
        .iter()
        .all(|c| c.path.cells.iter().all(|&d| hop_distance(Cell::C0, d) >= hop_distance(c.positive, d)));
    HopMinimality { weak, strong }
}

/// Result of shifting the optimal positive core to the origin.
#[derive(Clone, Debug)]
pub struct DocpShift {
    pub chosen: Cell,
    pub map: CellShift,
    /// Candidate positive cores of the input with their matching costs.
    pub candidates: Vec<(Cell, usize)>,
    /// The shifted, minimally connected corrector.
    pub u: Displacement,
    pub cut: CutDecomposition,
    pub hop_minimality: HopMinimality,
    /// `sum_b [psi(alpha_hat_b + Du_b) - psi(alpha_hat_b)]` over the domain.
    pub energy_before: f64,
    /// The shifted energy resummed against the transported reference.
    pub energy_transported: f64,
    /// The shifted energy truncated to the domain; differs by far-field terms.
    pub energy_truncated: f64,
    /// Whether every strained bond of `u` has a preimage in the domain, in which case
    /// `energy_transported` equals `energy_before`.
    pub support_inside: bool,
}

const DOCP_ENERGY_TOL: f64 = 1e-8;

/// Chooses the positive core `C` with the shortest minimal connection after moving
/// `C` to the origin (ties by distance to the origin, then cell order), builds
/// `u^C = (yhat + u) o F^C - yhat` and imposes the minimal connection on it.
pub fn docp_shift(domain: &LatticeDomain, p: &dyn Potential, u: &Displacement) -> Result<DocpShift> {
    let alpha = bond_length_form(domain, u)?;
    let cores = detect_cores(domain, &alpha)?;
    if cores.positive.is_empty() {
        return Err(Error::NoPositiveCore);
    }
    let mut candidates = Vec::new();
    for (k, &c) in cores.positive.iter().enumerate() {
        let rest: Vec<Cell> = cores.positive.iter().enumerate().filter(|&(j, _)| j != k).map(|(_, &x)| x).collect();
        let (_, cost) = min_cost_matching(&rest, &cores.negative)?;
        candidates.push((c, cost));
    }
    let &(chosen, _) = candidates
        .iter()
        .min_by(|a, b| {
            a.1.cmp(&b.1)
                .then(a.0.dist_to_origin().total_cmp(&b.0.dist_to_origin()))
                .then(domain.cell_id(a.0).cmp(&domain.cell_id(b.0)))
        })
        .expect("at least one candidate");
    let map = cell_shift_map(chosen);

    let du = difference(domain, u);
    let energy_before: f64 =
        domain.bonds().iter().enumerate().map(|(i, &b)| p.psi_diff(alpha_hat(b) + du[i], alpha_hat(b))).sum();

    let u_c = if chosen == Cell::C0 {
        u.clone()
    } else {
        let mut values = Vec::with_capacity(domain.num_sites());
        for &s in domain.sites() {
            let fs = map.site(s);
            let moved = domain.site_id(fs).map_or(0.0, |j| u[j]);
            values.push(yhat(fs.position())? + moved - yhat(s.position())?);
        }
        Displacement::from_values(values)
    };
    let alpha_c = bond_length_form(domain, &u_c)?;
    let beta_c = beta_form(domain, &alpha_c);
    let cut = dmcp(domain, &u_c, &beta_c)?;
    let shifted = cut.apply(&u_c);

    let du_c = difference(domain, &shifted);
    let mut energy_transported = 0.0;
    let mut energy_truncated = 0.0;
    for (i, &b) in domain.bonds().iter().enumerate() {
        let s = alpha_hat(b) + du_c[i];
        energy_transported += p.psi_diff(s, alpha_hat(map.bond(b)));
        energy_truncated += p.psi_diff(s, alpha_hat(b));
    }
    let support_inside = (0..domain.num_bonds()).filter(|&i| du[i] != 0.0).all(|i| {
        let b = domain.bonds()[i];
        let pre = Bond::new(map.site_inv(b.tail), b.dir.rotate(if map.is_rotation() { -1 } else { 0 }));
        domain.bond_id(pre).is_some()
    });
    if support_inside && (energy_transported - energy_before).abs() > DOCP_ENERGY_TOL {
        return Err(Error::EnergyMismatch(format!(
            "shifted energy {energy_transported} differs from {energy_before}"
        )));
    }
    let hop_minimality = hop_minimality(&cut);
    Ok(DocpShift {
        chosen,
        map,
        candidates,
        u: shifted,
        cut,
        hop_minimality,
        energy_before,
        energy_transported,
        energy_truncated,
        support_inside,
    })
}
