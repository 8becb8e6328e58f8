//! Energy difference functional, its gradient and Hessian, and the ellipticity check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::elastic::{alpha_hat, alpha_hat_about};
use crate::error::{Error, Result};
use crate::forms::{cleanup_adjacent_cores_masked, difference, wrap, wrap_value, Displacement, OneForm};
use crate::lattice::{LatticeDomain, Site};
use crate::potential::{Potential, PotentialSpec};

/// `E(y; y~) = sum_b [psi(Dy_b) - psi(Dy~_b)]` over bonds touching the support of `y - y~`.
pub fn energy_diff(domain: &LatticeDomain, p: &dyn Potential, y: &Displacement, y_ref: &Displacement) -> Result<f64> {
    let mut touched = vec![false; domain.num_bonds()];
    for i in 0..domain.num_sites() {
        if y[i] == y_ref[i] {
            continue;
        }
        if !domain.has_full_star(i) {
            return Err(Error::OutsideDomain(format!("perturbation support reaches boundary site {i}")));
        }
        for e in domain.star(i).iter().flatten() {
            touched[e.bond] = true;
        }
    }
    let mut sum = 0.0;
    for b in (0..domain.num_bonds()).filter(|&b| touched[b]) {
        let (t, h) = domain.bond_ends(b);
        sum += p.psi_diff(y[h] - y[t], y_ref[h] - y_ref[t]);
    }
    Ok(sum)
}

/// Reference configuration a corrector is measured against: its strain on every bond
/// and the set of bonds that carry energy.
#[derive(Clone, Debug)]
pub struct Reference {
    pub strain: OneForm,
    pub bond_mask: Vec<bool>,
}

impl Reference {
    /// `yhat` centred at the origin.
    pub fn yhat(domain: &LatticeDomain) -> Reference {
        Reference { strain: OneForm::from_fn(domain, alpha_hat), bond_mask: vec![true; domain.num_bonds()] }
    }

    /// `yhat(. - centre)`.
    pub fn yhat_about(domain: &LatticeDomain, centre: [f64; 2]) -> Reference {
        Reference {
            strain: OneForm::from_fn(domain, |b| alpha_hat_about(b, centre)),
            bond_mask: vec![true; domain.num_bonds()],
        }
    }

    pub fn flat(domain: &LatticeDomain) -> Reference {
        Reference { strain: OneForm::zeros(domain), bond_mask: vec![true; domain.num_bonds()] }
    }

    /// Adds the homogeneous field `x -> g . x` to the reference.
    pub fn with_linear(mut self, domain: &LatticeDomain, g: [f64; 2]) -> Reference {
        for (v, b) in self.strain.values_mut().iter_mut().zip(domain.bonds()) {
            let a = b.dir.vector();
            *v += g[0] * a[0] + g[1] * a[1];
        }
        self
    }

    /// Keeps only bonds whose two endpoints satisfy `keep`.
    pub fn restricted(mut self, domain: &LatticeDomain, keep: impl Fn(Site) -> bool) -> Reference {
        for (m, b) in self.bond_mask.iter_mut().zip(domain.bonds()) {
            *m = *m && keep(b.tail) && keep(b.head());
        }
        for (v, m) in self.strain.values_mut().iter_mut().zip(&self.bond_mask) {
            if !m {
                *v = 0.0;
            }
        }
        self
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EllipticityReport {
    /// Minimum over energy bonds of `dist(r_b + Du_b, 1/2 + Z)`.
    pub min_half_integer_distance: f64,
    pub closest_bond: usize,
    /// Smallest Ritz value of the Hessian quadratic form per unit `l2` norm of sites.
    pub ritz_min: f64,
    pub lanczos_steps: usize,
}

/// Energy functional of a corrector `u` on a finite domain, with `u` clamped to zero
/// outside the active region.
#[derive(Clone, Debug)]
pub struct EnergyState<'d> {
    domain: &'d LatticeDomain,
    potential: PotentialSpec,
    reference: Reference,
    active_radius: f64,
    free: Vec<bool>,
    free_sites: Vec<usize>,
    energy_bonds: Vec<usize>,
    ref_force: Vec<f64>,
}

const HALF_INTEGER_TOL: f64 = 1e-12;

impl<'d> EnergyState<'d> {
    /// Standard setting: `yhat` reference, all bonds, active radius `R - 2`.
    pub fn standard(domain: &'d LatticeDomain, potential: PotentialSpec) -> Result<EnergyState<'d>> {
        Self::new(domain, potential, Reference::yhat(domain), domain.radius() - 2.0)
    }

    pub fn new(
        domain: &'d LatticeDomain,
        potential: PotentialSpec,
        reference: Reference,
        active_radius: f64,
    ) -> Result<EnergyState<'d>> {
        potential.validate()?;
        if !(active_radius > 0.0) || active_radius > domain.radius() - 1.0 {
            return Err(Error::InvalidParameter(format!(
                "active radius {active_radius} must lie in (0, R - 1] for R = {}",
                domain.radius()
            )));
        }
        if reference.strain.len() != domain.num_bonds() || reference.bond_mask.len() != domain.num_bonds() {
            return Err(Error::InvalidParameter("reference does not match the domain".into()));
        }
        let free: Vec<bool> = (0..domain.num_sites())
            .map(|i| {
                domain.has_full_star(i)
                    && domain.sites()[i].norm() <= active_radius
                    && domain.star(i).iter().flatten().any(|e| reference.bond_mask[e.bond])
            })
            .collect();
        let free_sites = (0..domain.num_sites()).filter(|&i| free[i]).collect();
        let energy_bonds = (0..domain.num_bonds())
            .filter(|&b| {
                let (t, h) = domain.bond_ends(b);
                reference.bond_mask[b] && (free[t] || free[h])
            })
            .collect();
        let ref_force = (0..domain.num_sites())
            .map(|i| {
                if !free[i] {
                    return 0.0;
                }
                domain
                    .star(i)
                    .iter()
                    .flatten()
                    .filter(|e| reference.bond_mask[e.bond])
                    .map(|e| potential.dpsi(e.sign * reference.strain[e.bond]))
                    .sum()
            })
            .collect();
        Ok(EnergyState { domain, potential, reference, active_radius, free, free_sites, energy_bonds, ref_force })
    }

    pub fn domain(&self) -> &'d LatticeDomain {
        self.domain
    }

    pub fn potential(&self) -> &PotentialSpec {
        &self.potential
    }

    pub fn reference(&self) -> &Reference {
        &self.reference
    }

    pub fn active_radius(&self) -> f64 {
        self.active_radius
    }

    pub fn is_free(&self, site: usize) -> bool {
        self.free[site]
    }

    pub fn free_sites(&self) -> &[usize] {
        &self.free_sites
    }

    /// Bonds that carry energy and touch a free site.
    pub fn energy_bonds(&self) -> &[usize] {
        &self.energy_bonds
    }

    /// Reference residual force at a site (zero off the free set).
    pub fn reference_force(&self, site: usize) -> f64 {
        self.ref_force[site]
    }

    /// Zeroes `u` outside the active region.
    pub fn clamp(&self, u: &Displacement) -> Displacement {
        Displacement::from_values((0..u.len()).map(|i| if self.free[i] { u[i] } else { 0.0 }).collect())
    }

    fn check_support(&self, u: &Displacement) -> Result<()> {
        if u.len() != self.domain.num_sites() {
            return Err(Error::InvalidParameter("displacement does not match the domain".into()));
        }
        match (0..u.len()).find(|&i| !self.free[i] && u[i] != 0.0) {
            Some(i) => Err(Error::InvalidParameter(format!("displacement nonzero at clamped site {i}"))),
            None => Ok(()),
        }
    }

    /// Total strain `r_b + Du_b` on every bond.
    pub fn strain(&self, u: &Displacement) -> OneForm {
        self.reference.strain.add(&difference(self.domain, u))
    }

    /// Bond-length form `wrap(r + Du)` after the adjacent-core cleanup; zero off the mask.
    pub fn alpha(&self, u: &Displacement) -> Result<OneForm> {
        let mut a = wrap(&self.strain(u));
        for (v, m) in a.values_mut().iter_mut().zip(&self.reference.bond_mask) {
            if !m {
                *v = 0.0;
            }
        }
        cleanup_adjacent_cores_masked(self.domain, &a, &self.cell_mask())
    }

    /// Cells all of whose bonds carry energy.
    pub fn cell_mask(&self) -> Vec<bool> {
        (0..self.domain.num_cells())
            .map(|c| self.domain.cell_boundary(c).iter().all(|&(b, _)| self.reference.bond_mask[b]))
            .collect()
    }

    /// `sum_b [psi(r+Du) - psi(r) - psi'(r) Du] - sum_xi f(xi) u(xi)`.
    pub fn e_extended(&self, u: &Displacement) -> Result<f64> {
        self.check_support(u)?;
        let p = &self.potential;
        let mut bonds = 0.0;
        for &b in &self.energy_bonds {
            let (t, h) = self.domain.bond_ends(b);
            let du = u[h] - u[t];
            let r = self.reference.strain[b];
            bonds += p.psi_diff(r + du, r) - p.dpsi(r) * du;
        }
        let linear: f64 = self.free_sites.iter().map(|&i| self.ref_force[i] * u[i]).sum();
        Ok(bonds - linear)
    }

    /// The same functional assembled bondwise, `sum_b [psi(r+Du) - psi(r)]`.
    pub fn energy(&self, u: &Displacement) -> f64 {
        let p = &self.potential;
        self.energy_bonds
            .iter()
            .map(|&b| {
                let (t, h) = self.domain.bond_ends(b);
                let r = self.reference.strain[b];
                p.psi_diff(r + u[h] - u[t], r)
            })
            .sum()
    }

    /// `E(u + t d) - E(u)`, summed bondwise for accuracy.
    pub fn energy_delta(&self, u: &Displacement, d: &Displacement, t: f64) -> f64 {
        let p = &self.potential;
        self.energy_bonds
            .iter()
            .map(|&b| {
                let (tl, h) = self.domain.bond_ends(b);
                let dd = d[h] - d[tl];
                if dd == 0.0 {
                    return 0.0;
                }
                let s = self.reference.strain[b] + u[h] - u[tl];
                p.psi_diff(s + t * dd, s)
            })
            .sum()
    }

    /// Residual force `sum_{b in R_xi} psi'(r_b + Du_b)` at free sites, zero elsewhere.
    pub fn forces(&self, u: &Displacement) -> Displacement {
        let p = &self.potential;
        let mut out = Displacement::zeros(self.domain);
        for &i in &self.free_sites {
            out[i] = self
                .domain
                .star(i)
                .iter()
                .flatten()
                .filter(|e| self.reference.bond_mask[e.bond])
                .map(|e| p.dpsi(e.sign * self.reference.strain[e.bond] + u[e.neighbour] - u[i]))
                .sum();
        }
        out
    }

    /// `dE/du(xi)`, the negated residual.
    pub fn gradient(&self, u: &Displacement) -> Displacement {
        let mut g = self.forces(u);
        for v in g.values_mut() {
            *v = -*v;
        }
        g
    }

    fn check_half_integers(&self, s: &OneForm) -> Result<()> {
        if self.potential.has_constant_curvature() {
            for &b in &self.energy_bonds {
                if 0.5 - wrap_value(s[b]).abs() < HALF_INTEGER_TOL {
                    return Err(Error::HalfIntegerBond { bond: b });
                }
            }
        }
        Ok(())
    }

    /// `sum_b psi''(r_b + Du_b) (Dv_b)^2`.
    pub fn hessian_apply(&self, u: &Displacement, v: &Displacement) -> Result<f64> {
        let s = self.strain(u);
        self.check_half_integers(&s)?;
        let dv = difference(self.domain, &self.clamp(v));
        Ok(self.energy_bonds.iter().map(|&b| self.potential.d2psi(s[b]) * dv[b] * dv[b]).sum())
    }

    /// Hessian-vector product on the free sites.
    pub fn hessian_vec(&self, u: &Displacement, v: &Displacement) -> Result<Displacement> {
        let s = self.strain(u);
        self.check_half_integers(&s)?;
        Ok(self.hessian_vec_with(&s, v))
    }

    fn hessian_vec_with(&self, s: &OneForm, v: &Displacement) -> Displacement {
        let mut out = Displacement::zeros(self.domain);
        for &i in &self.free_sites {
            let mut acc = 0.0;
            for e in self.domain.star(i).iter().flatten() {
                if !self.reference.bond_mask[e.bond] {
                    continue;
                }
                let vn = if self.free[e.neighbour] { v[e.neighbour] } else { 0.0 };
                acc += self.potential.d2psi(s[e.bond]) * (v[i] - vn);
            }
            out[i] = acc;
        }
        out
    }

    /// Distance of every energy bond's strain from `1/2 + Z`, and a Lanczos estimate of
    /// the smallest eigenvalue of the Hessian restricted to the free sites.
    pub fn ellipticity_check(&self, u: &Displacement, lanczos_steps: usize) -> Result<EllipticityReport> {
        let s = self.strain(u);
        let mut min = f64::INFINITY;
        let mut closest = 0;
        for &b in &self.energy_bonds {
            let d = 0.5 - wrap_value(s[b]).abs();
            if d < min {
                min = d;
                closest = b;
            }
        }
        if self.potential.has_constant_curvature() && min < HALF_INTEGER_TOL {
            return Err(Error::HalfIntegerBond { bond: closest });
        }
        let (ritz_min, steps) = self.lanczos_min(&s, lanczos_steps);
        Ok(EllipticityReport { min_half_integer_distance: min, closest_bond: closest, ritz_min, lanczos_steps: steps })
    }

    fn lanczos_min(&self, s: &OneForm, max_steps: usize) -> (f64, usize) {
        let n = self.free_sites.len();
        if n == 0 {
            return (f64::NAN, 0);
        }
        let k = max_steps.clamp(1, n);
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut q = Displacement::zeros(self.domain);
        for &i in &self.free_sites {
            q[i] = rng.gen_range(-1.0..1.0);
        }
        let norm = q.dot(&q).sqrt();
        q = q.axpy(1.0 / norm - 1.0, &q);
        let mut basis: Vec<Displacement> = Vec::with_capacity(k);
        let (mut alphas, mut betas): (Vec<f64>, Vec<f64>) = (Vec::with_capacity(k), Vec::with_capacity(k));
        for j in 0..k {
            let mut w = self.hessian_vec_with(s, &q);
            let a = w.dot(&q);
            alphas.push(a);
            w = w.axpy(-a, &q);
            if let (Some(prev), Some(&b)) = (basis.last(), betas.last()) {
                w = w.axpy(-b, prev);
            }
            // Full reorthogonalisation keeps the Ritz values free of ghosts.
            for v in basis.iter().chain(std::iter::once(&q)) {
                let c = w.dot(v);
                w = w.axpy(-c, v);
            }
            let b = w.dot(&w).sqrt();
            basis.push(q);
            if j + 1 == k || b < 1e-12 {
                break;
            }
            betas.push(b);
            q = w.axpy(1.0 / b - 1.0, &w);
        }
        let m = alphas.len();
        (tridiagonal_min_eigenvalue(&alphas, &betas[..m - 1]), m)
    }
}

/// Smallest eigenvalue of a symmetric tridiagonal matrix by Sturm-sequence bisection.
pub fn tridiagonal_min_eigenvalue(diag: &[f64], off: &[f64]) -> f64 {
    let n = diag.len();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..n {
        let r = if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    let pivot_floor = f64::EPSILON * (hi - lo).abs().max(1.0);
    // Number of eigenvalues strictly below x.
    let count_below = |x: f64| {
        let mut c = 0;
        let mut d = 1.0;
        for i in 0..n {
            let o = if i > 0 { off[i - 1] * off[i - 1] } else { 0.0 };
            d = diag[i] - x - if i > 0 { o / d } else { 0.0 };
            if d == 0.0 {
                d = -pivot_floor;
            }
            if d < 0.0 {
                c += 1;
            }
        }
        c
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if count_below(mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::psi_lin;

    #[test]
    fn zero_corrector_has_zero_energy() {
        let d = LatticeDomain::new(8.0).unwrap();
        let e = EnergyState::standard(&d, psi_lin(1.0).unwrap()).unwrap();
        let u = Displacement::zeros(&d);
        assert_eq!(e.e_extended(&u).unwrap(), 0.0);
        assert_eq!(e.energy(&u), 0.0);
    }

    #[test]
    fn clamped_support_enforced() {
        let d = LatticeDomain::new(6.0).unwrap();
        let e = EnergyState::standard(&d, psi_lin(1.0).unwrap()).unwrap();
        let mut u = Displacement::zeros(&d);
        let far = (0..d.num_sites()).find(|&i| !e.is_free(i)).unwrap();
        u[far] = 0.1;
        assert!(e.e_extended(&u).is_err());
    }

    #[test]
    fn tridiagonal_min() {
        // 2x2: [[2, 1], [1, 2]] has eigenvalues 1 and 3.
        assert!((tridiagonal_min_eigenvalue(&[2.0, 2.0], &[1.0]) - 1.0).abs() < 1e-12);
        assert!((tridiagonal_min_eigenvalue(&[5.0], &[]) - 5.0).abs() < 1e-12);
    }
}
