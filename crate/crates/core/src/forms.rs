//! Displacements (0-forms), bond 1-forms, wrapping, integration and circulation.

use std::io::{Read, Write};
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::lattice::{Bond, Dir, LatticeDomain, Site};

/// Real value per domain site, indexed like `LatticeDomain::sites`.
#[derive(Clone, Debug, PartialEq)]
pub struct Displacement {
    values: Vec<f64>,
}

impl Displacement {
    pub fn zeros(domain: &LatticeDomain) -> Displacement {
        Displacement { values: vec![0.0; domain.num_sites()] }
    }

    pub fn from_values(values: Vec<f64>) -> Displacement {
        Displacement { values }
    }

    pub fn from_fn(domain: &LatticeDomain, f: impl Fn(Site) -> f64) -> Displacement {
        Displacement { values: domain.sites().iter().map(|&s| f(s)).collect() }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `self + t * other`.
    pub fn axpy(&self, t: f64, other: &Displacement) -> Displacement {
        Displacement { values: self.values.iter().zip(&other.values).map(|(a, b)| a + t * b).collect() }
    }

    pub fn sub(&self, other: &Displacement) -> Displacement {
        self.axpy(-1.0, other)
    }

    /// Site ids where the value is nonzero.
    pub fn support(&self) -> Vec<usize> {
        (0..self.values.len()).filter(|&i| self.values[i] != 0.0).collect()
    }

    pub fn dot(&self, other: &Displacement) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Index<usize> for Displacement {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

impl IndexMut<usize> for Displacement {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.values[i]
    }
}

/// Antisymmetric real bond field, one value per canonical bond.
#[derive(Clone, Debug, PartialEq)]
pub struct OneForm {
    values: Vec<f64>,
}

impl OneForm {
    pub fn zeros(domain: &LatticeDomain) -> OneForm {
        OneForm { values: vec![0.0; domain.num_bonds()] }
    }

    pub fn from_values(values: Vec<f64>) -> OneForm {
        OneForm { values }
    }

    pub fn from_fn(domain: &LatticeDomain, f: impl Fn(Bond) -> f64) -> OneForm {
        OneForm { values: domain.bonds().iter().map(|&b| f(b)).collect() }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value on an oriented bond; the reversed bond gives the negation.
    pub fn eval(&self, domain: &LatticeDomain, b: Bond) -> Option<f64> {
        domain.bond_id(b).map(|(i, s)| s * self.values[i])
    }

    pub fn add(&self, other: &OneForm) -> OneForm {
        OneForm { values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, other: &OneForm) -> OneForm {
        OneForm { values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect() }
    }

    pub fn scale(&self, t: f64) -> OneForm {
        OneForm { values: self.values.iter().map(|a| t * a).collect() }
    }

    pub fn norm_l1(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }

    pub fn norm_l2_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn norm_linf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Index<usize> for OneForm {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

/// Integer-valued antisymmetric bond field.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntegerForm {
    values: Vec<i64>,
}

impl IntegerForm {
    pub fn zeros(domain: &LatticeDomain) -> IntegerForm {
        IntegerForm { values: vec![0; domain.num_bonds()] }
    }

    pub fn from_values(values: Vec<i64>) -> IntegerForm {
        IntegerForm { values }
    }

    pub fn values(&self) -> &[i64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [i64] {
        &mut self.values
    }

    /// Adds `k` to the oriented bond `b`.
    pub fn add_to(&mut self, domain: &LatticeDomain, b: Bond, k: i64) -> Result<()> {
        let (i, s) = domain.require_bond(b)?;
        self.values[i] += if s > 0.0 { k } else { -k };
        Ok(())
    }

    pub fn eval(&self, domain: &LatticeDomain, b: Bond) -> Option<i64> {
        domain.bond_id(b).map(|(i, s)| if s > 0.0 { self.values[i] } else { -self.values[i] })
    }

    pub fn norm_l1(&self) -> i64 {
        self.values.iter().map(|v| v.abs()).sum()
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.values.len()).filter(|&i| self.values[i] != 0).collect()
    }

    pub fn to_real(&self) -> OneForm {
        OneForm::from_values(self.values.iter().map(|&v| v as f64).collect())
    }

    /// Rounds a form that is integer-valued up to `tol`.
    pub fn from_real(w: &OneForm, tol: f64) -> Result<IntegerForm> {
        let mut values = Vec::with_capacity(w.len());
        for (i, &v) in w.values().iter().enumerate() {
            let r = v.round();
            if (v - r).abs() > tol {
                return Err(Error::Internal(format!("bond {i} value {v} is not an integer")));
            }
            values.push(r as i64);
        }
        Ok(IntegerForm { values })
    }
}

/// `(Du)_b = u(head) - u(tail)` on every canonical bond.
pub fn difference(domain: &LatticeDomain, u: &Displacement) -> OneForm {
    OneForm::from_values(
        (0..domain.num_bonds())
            .map(|b| {
                let (t, h) = domain.bond_ends(b);
                u[h] - u[t]
            })
            .collect(),
    )
}

/// `w - round(w)` in `(-1/2, 1/2]`.
pub fn wrap_value(w: f64) -> f64 {
    w - (w - 0.5).ceil()
}

pub fn wrap(w: &OneForm) -> OneForm {
    OneForm::from_values(w.values().iter().map(|&v| wrap_value(v)).collect())
}

/// Tolerance used to read a circulation as an integer.
pub const CIRCULATION_TOL: f64 = 1e-8;

pub fn cell_circulation(domain: &LatticeDomain, w: &OneForm, cell: usize) -> f64 {
    domain.cell_boundary(cell).iter().map(|&(b, s)| s * w[b]).sum()
}

/// Circulation rounded to an integer; errors if it is not one.
pub fn cell_circulation_int(domain: &LatticeDomain, w: &OneForm, cell: usize) -> Result<i64> {
    let c = cell_circulation(domain, w, cell);
    let r = c.round();
    if (c - r).abs() > CIRCULATION_TOL {
        return Err(Error::Internal(format!("circulation {c} around cell {cell} is not an integer")));
    }
    Ok(r as i64)
}

/// Flips `alpha_b = +-1/2` on bonds shared by two opposite-sign cores, which removes both.
pub fn cleanup_adjacent_cores(domain: &LatticeDomain, alpha: &OneForm) -> Result<OneForm> {
    cleanup_adjacent_cores_masked(domain, alpha, &vec![true; domain.num_cells()])
}

/// As [`cleanup_adjacent_cores`], considering only the cells selected by `mask`.
pub fn cleanup_adjacent_cores_masked(domain: &LatticeDomain, alpha: &OneForm, mask: &[bool]) -> Result<OneForm> {
    let mut out = alpha.clone();
    let mut circ = (0..domain.num_cells())
        .map(|c| if mask[c] { cell_circulation_int(domain, alpha, c) } else { Ok(0) })
        .collect::<Result<Vec<_>>>()?;
    for b in 0..domain.num_bonds() {
        let [Some(left), Some(right)] = domain.bond_cells(b) else { continue };
        let v = out[b];
        if (v.abs() - 0.5).abs() > 1e-12 {
            continue;
        }
        let s = if v > 0.0 { 1 } else { -1 };
        if circ[left] == s && circ[right] == -s {
            out.values_mut()[b] = -v;
            circ[left] = 0;
            circ[right] = 0;
        }
    }
    Ok(out)
}

/// Sum of `w` over the oriented bonds of a path.
pub fn integrate(domain: &LatticeDomain, w: &OneForm, path: &[Bond]) -> Result<f64> {
    let mut sum = 0.0;
    for &b in path {
        let (i, s) = domain.require_bond(b)?;
        sum += s * w[i];
    }
    Ok(sum)
}

pub fn integrate_int(domain: &LatticeDomain, z: &IntegerForm, path: &[Bond]) -> Result<i64> {
    let mut sum = 0;
    for &b in path {
        sum += z.eval(domain, b).ok_or_else(|| Error::OutsideDomain(format!("bond {b:?}")))?;
    }
    Ok(sum)
}

/// Writes a form as CSV rows `tail_n,tail_m,dir_i,value` over canonical bonds.
pub fn write_form_csv<W: Write>(domain: &LatticeDomain, w: &OneForm, out: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    wr.write_record(["tail_n", "tail_m", "dir_i", "value"]).map_err(csv_err)?;
    for (b, v) in domain.bonds().iter().zip(w.values()) {
        wr.write_record([b.tail.n.to_string(), b.tail.m.to_string(), b.dir.label().to_string(), fmt_f64(*v)])
            .map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_integer_form_csv<W: Write>(domain: &LatticeDomain, z: &IntegerForm, out: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    wr.write_record(["tail_n", "tail_m", "dir_i", "value"]).map_err(csv_err)?;
    for (b, v) in domain.bonds().iter().zip(z.values()) {
        wr.write_record([b.tail.n.to_string(), b.tail.m.to_string(), b.dir.label().to_string(), v.to_string()])
            .map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

/// Reads a form written by [`write_form_csv`]. Bonds not listed are zero; reversed
/// orientations are accepted and negated.
pub fn read_form_csv<R: Read>(domain: &LatticeDomain, input: R) -> Result<OneForm> {
    let mut w = OneForm::zeros(domain);
    let mut rd = csv::Reader::from_reader(input);
    for rec in rd.records() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() != 4 {
            return Err(Error::Format(format!("expected 4 columns, got {}", rec.len())));
        }
        let n: i64 = parse(&rec[0])?;
        let m: i64 = parse(&rec[1])?;
        let d: u8 = parse(&rec[2])?;
        let v: f64 = parse(&rec[3])?;
        let (i, s) = domain.require_bond(Bond::new(Site::new(n, m), Dir::from_label(d)?))?;
        w.values_mut()[i] = s * v;
    }
    Ok(w)
}

/// Writes a displacement as CSV rows `n,m,value`.
pub fn write_displacement_csv<W: Write>(domain: &LatticeDomain, u: &Displacement, out: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    wr.write_record(["n", "m", "value"]).map_err(csv_err)?;
    for (s, v) in domain.sites().iter().zip(u.values()) {
        wr.write_record([s.n.to_string(), s.m.to_string(), fmt_f64(*v)]).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_displacement_csv<R: Read>(domain: &LatticeDomain, input: R) -> Result<Displacement> {
    let mut u = Displacement::zeros(domain);
    let mut rd = csv::Reader::from_reader(input);
    for rec in rd.records() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() != 3 {
            return Err(Error::Format(format!("expected 3 columns, got {}", rec.len())));
        }
        let i = domain.require_site(Site::new(parse(&rec[0])?, parse(&rec[1])?))?;
        u[i] = parse(&rec[2])?;
    }
    Ok(u)
}

/// 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.trim().parse().map_err(|_| Error::Format(format!("cannot parse {s:?}")))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_examples() {
        assert!((wrap_value(0.7) + 0.3).abs() < 1e-15);
        assert!((wrap_value(-1.2) + 0.2).abs() < 1e-15);
        assert_eq!(wrap_value(0.5), 0.5);
        assert_eq!(wrap_value(-0.5), 0.5);
        assert_eq!(wrap_value(0.0), 0.0);
    }

    #[test]
    fn difference_of_constant_is_zero() {
        let d = LatticeDomain::new(4.0).unwrap();
        let u = Displacement::from_values(vec![2.5; d.num_sites()]);
        assert_eq!(difference(&d, &u).norm_linf(), 0.0);
    }

    #[test]
    fn linear_displacement() {
        let d = LatticeDomain::new(5.0).unwrap();
        let g = [0.3, -0.7];
        let u = Displacement::from_fn(&d, |s| {
            let p = s.position();
            g[0] * p[0] + g[1] * p[1]
        });
        let du = difference(&d, &u);
        for (b, v) in d.bonds().iter().zip(du.values()) {
            let a = b.dir.vector();
            assert!((v - (g[0] * a[0] + g[1] * a[1])).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_path_integrates_to_zero() {
        let d = LatticeDomain::new(4.0).unwrap();
        assert_eq!(integrate(&d, &OneForm::zeros(&d), &[]).unwrap(), 0.0);
    }

    #[test]
    fn path_outside_domain_rejected() {
        let d = LatticeDomain::new(4.0).unwrap();
        let far = Bond::new(Site::new(40, 0), Dir::new(0));
        assert!(integrate(&d, &OneForm::zeros(&d), &[far]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let d = LatticeDomain::new(4.0).unwrap();
        let w = OneForm::from_fn(&d, |b| (b.tail.n as f64 * 0.1 + b.tail.m as f64).sin() / 3.0);
        let mut buf = Vec::new();
        write_form_csv(&d, &w, &mut buf).unwrap();
        assert_eq!(read_form_csv(&d, buf.as_slice()).unwrap(), w);
        let u = Displacement::from_fn(&d, |s| (s.n * 7 + s.m) as f64 / 13.0);
        let mut buf = Vec::new();
        write_displacement_csv(&d, &u, &mut buf).unwrap();
        assert_eq!(read_displacement_csv(&d, buf.as_slice()).unwrap(), u);
    }
}
