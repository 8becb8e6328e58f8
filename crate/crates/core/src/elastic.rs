//! The continuum screw-dislocation field, its bond-length form and residual forces.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::forms::{Displacement, OneForm};
use crate::lattice::{Bond, LatticeDomain};
use crate::potential::Potential;

/// Branch convention of [`yhat`]: values in `[0, 1)`, cut along the positive x1-axis.
pub const BRANCH_CUT: &str = "arg in [0, 2pi), cut on the positive x1-axis";

/// `arg(x) / 2 pi` in `[0, 1)`.
pub fn yhat(x: [f64; 2]) -> Result<f64> {
    if x == [0.0, 0.0] {
        return Err(Error::InvalidParameter("yhat is singular at the origin".into()));
    }
    let t = x[1].atan2(x[0]);
    let v = if t < 0.0 { t + 2.0 * PI } else { t } / (2.0 * PI);
    Ok(if v >= 1.0 { 0.0 } else { v })
}

pub fn grad_yhat(x: [f64; 2]) -> Result<[f64; 2]> {
    let r2 = x[0] * x[0] + x[1] * x[1];
    if r2 == 0.0 {
        return Err(Error::InvalidParameter("grad yhat is singular at the origin".into()));
    }
    let c = 1.0 / (2.0 * PI * r2);
    Ok([-x[1] * c, x[0] * c])
}

/// Signed angle subtended at `centre` by the segment tail -> head, over 2 pi.
pub fn alpha_hat_about(b: Bond, centre: [f64; 2]) -> f64 {
    let (t, h) = (b.tail.position(), b.head().position());
    let (t, h) = ([t[0] - centre[0], t[1] - centre[1]], [h[0] - centre[0], h[1] - centre[1]]);
    let cross = t[0] * h[1] - t[1] * h[0];
    let dot = t[0] * h[0] + t[1] * h[1];
    cross.atan2(dot) / (2.0 * PI)
}

/// The bond-length form of `yhat` on an oriented bond.
pub fn alpha_hat(b: Bond) -> f64 {
    alpha_hat_about(b, [0.0, 0.0])
}

/// `sum_{b in R_xi} psi'(w_b)` over the six outward bonds; `None` for an incomplete star.
pub fn site_force(domain: &LatticeDomain, w: &OneForm, site: usize, p: &dyn Potential) -> Option<f64> {
    let mut f = 0.0;
    for e in domain.star(site) {
        let e = e.as_ref()?;
        f += p.dpsi(e.sign * w[e.bond]);
    }
    Some(f)
}

/// Cached `alpha_hat` on every bond and the residual force at every complete-star site.
#[derive(Clone, Debug)]
pub struct ReferenceField {
    pub alpha_hat: OneForm,
    pub forces: Vec<Option<f64>>,
}

impl ReferenceField {
    pub fn new(domain: &LatticeDomain, p: &dyn Potential) -> ReferenceField {
        let alpha_hat = OneForm::from_fn(domain, alpha_hat);
        let forces = (0..domain.num_sites()).map(|i| site_force(domain, &alpha_hat, i, p)).collect();
        ReferenceField { alpha_hat, forces }
    }

    pub fn force(&self, site: usize) -> Option<f64> {
        self.forces[site]
    }
}

/// `yhat` sampled at the domain sites.
pub fn yhat_displacement(domain: &LatticeDomain) -> Displacement {
    Displacement::from_fn(domain, |s| yhat(s.position()).expect("sites avoid the origin"))
}
