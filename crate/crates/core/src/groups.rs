//! Model groups: the Heisenberg group ℍ¹, SU(2), and their finite products.
//!
//! ℍ¹ is written in exponential coordinates of the first kind, so
//! `exp(aX + bY + cZ) = (a, b, c)` and the group law is
//! `(x,y,z)⋆(x',y',z') = (x+x', y+y', z+z' + ½(xy' − x'y))`.
//!
//! An SU(2) element is stored as the first row `(z1, z2)` of
//! `[[z1, z2], [−z̄2, z̄1]]`. Its Lie algebra uses the Pauli basis
//! `X = [[0,1],[−1,0]]`, `Y = [[0,i],[i,0]]`, `Z = [[i,0],[0,−i]]`, and the
//! horizontal frame is `{X, Y}`. Writing `z1 = a + ib`, `z2 = c + id` the
//! matrix equals `a·I + c·X + d·Y + b·Z`, and X, Y, Z multiply like the
//! quaternion units i, j, k.

use num_complex::Complex64;

use crate::error::{check_dim, Error, Result};
use crate::lie::{hormander_flag, HorizontalFrame, StructureConstants};
use crate::testfn::{Domain, TestFunction};

/// Default finite-difference step for directional derivatives.
pub const DEFAULT_EPS: f64 = 1e-5;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct HeisenbergPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl HeisenbergPoint {
    pub const IDENTITY: HeisenbergPoint = HeisenbergPoint {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        HeisenbergPoint { x, y, z }
    }

    #[inline]
    pub fn mul(&self, o: &HeisenbergPoint) -> HeisenbergPoint {
        HeisenbergPoint {
            x: self.x + o.x,
            y: self.y + o.y,
            z: self.z + o.z + 0.5 * (self.x * o.y - o.x * self.y),
        }
    }

    #[inline]
    pub fn inv(&self) -> HeisenbergPoint {
        HeisenbergPoint {
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    /// Right multiplication by `exp(aX + bY)`, in place.
    #[inline]
    pub fn step(&mut self, a: f64, b: f64) {
        self.z += 0.5 * (self.x * b - a * self.y);
        self.x += a;
        self.y += b;
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Su2Point {
    pub z1: Complex64,
    pub z2: Complex64,
}

impl Default for Su2Point {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Su2Point {
    pub const IDENTITY: Su2Point = Su2Point {
        z1: Complex64::new(1.0, 0.0),
        z2: Complex64::new(0.0, 0.0),
    };

    /// Builds a point from an arbitrary nonzero pair, projecting onto the
    /// unit sphere.
    pub fn new(z1: Complex64, z2: Complex64) -> Result<Self> {
        let n = (z1.norm_sqr() + z2.norm_sqr()).sqrt();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::InvalidInput("SU(2) row must be finite and nonzero".into()));
        }
        Ok(Su2Point {
            z1: z1 / n,
            z2: z2 / n,
        })
    }

    /// Builds a point from quaternion components `w + x·X + y·Y + z·Z`.
    pub fn from_quaternion(q: [f64; 4]) -> Result<Self> {
        Self::new(Complex64::new(q[0], q[3]), Complex64::new(q[1], q[2]))
    }

    /// Quaternion components `(w, x, y, z)` with `g = w·I + x·X + y·Y + z·Z`.
    #[inline]
    pub fn quaternion(&self) -> [f64; 4] {
        [self.z1.re, self.z2.re, self.z2.im, self.z1.im]
    }

    #[inline]
    pub fn norm_sqr(&self) -> f64 {
        self.z1.norm_sqr() + self.z2.norm_sqr()
    }

    #[inline]
    fn renormalize(&mut self) {
        let n = self.norm_sqr().sqrt();
        self.z1 /= n;
        self.z2 /= n;
    }

    /// Matrix product followed by renormalization.
    #[inline]
    pub fn mul(&self, o: &Su2Point) -> Su2Point {
        let mut p = Su2Point {
            z1: self.z1 * o.z1 - self.z2 * o.z2.conj(),
            z2: self.z1 * o.z2 + self.z2 * o.z1.conj(),
        };
        p.renormalize();
        p
    }

    /// Conjugate transpose.
    #[inline]
    pub fn inv(&self) -> Su2Point {
        Su2Point {
            z1: self.z1.conj(),
            z2: -self.z2,
        }
    }

    /// `−g`, the other preimage under the double covers onto SO(3)/SO(4).
    pub fn neg(&self) -> Su2Point {
        Su2Point {
            z1: -self.z1,
            z2: -self.z2,
        }
    }

    /// `exp(aX + bY + cZ) = cos r·I + (sin r / r)·V`, `r = √(a²+b²+c²)`.
    pub fn exp_algebra(a: f64, b: f64, c: f64) -> Su2Point {
        let r = (a * a + b * b + c * c).sqrt();
        let (s, co) = if r == 0.0 { (1.0, 1.0) } else { (r.sin() / r, r.cos()) };
        Su2Point {
            z1: Complex64::new(co, c * s),
            z2: Complex64::new(a * s, b * s),
        }
    }

    /// Right multiplication by `exp(aX + bY)`, in place.
    #[inline]
    pub fn step(&mut self, a: f64, b: f64) {
        *self = self.mul(&Su2Point::exp_algebra(a, b, 0.0));
    }

    /// Real part of the matrix trace, `2·Re z1`.
    pub fn re_trace(&self) -> f64 {
        2.0 * self.z1.re
    }

    pub fn is_finite(&self) -> bool {
        self.z1.re.is_finite() && self.z1.im.is_finite() && self.z2.re.is_finite() && self.z2.im.is_finite()
    }
}

/// Homogeneous list of factors of a product group.
#[derive(Clone, Debug, PartialEq)]
pub enum ProductPoint {
    Heisenberg(Vec<HeisenbergPoint>),
    Su2(Vec<Su2Point>),
}

impl ProductPoint {
    pub fn len(&self) -> usize {
        match self {
            ProductPoint::Heisenberg(v) => v.len(),
            ProductPoint::Su2(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum GroupPoint {
    Heisenberg(HeisenbergPoint),
    Su2(Su2Point),
    Product(ProductPoint),
}

impl From<HeisenbergPoint> for GroupPoint {
    fn from(p: HeisenbergPoint) -> Self {
        GroupPoint::Heisenberg(p)
    }
}

impl From<Su2Point> for GroupPoint {
    fn from(p: Su2Point) -> Self {
        GroupPoint::Su2(p)
    }
}

impl GroupPoint {
    /// Flat coordinates: `(x, y, z)` per Heisenberg factor and
    /// `(Re z1, Im z1, Re z2, Im z2)` per SU(2) factor, concatenated.
    pub fn coords(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.write_coords(&mut out);
        out
    }

    pub fn write_coords(&self, out: &mut Vec<f64>) {
        out.clear();
        let push_h = |out: &mut Vec<f64>, p: &HeisenbergPoint| out.extend_from_slice(&[p.x, p.y, p.z]);
        let push_s = |out: &mut Vec<f64>, p: &Su2Point| out.extend_from_slice(&[p.z1.re, p.z1.im, p.z2.re, p.z2.im]);
        match self {
            GroupPoint::Heisenberg(p) => push_h(out, p),
            GroupPoint::Su2(p) => push_s(out, p),
            GroupPoint::Product(ProductPoint::Heisenberg(v)) => v.iter().for_each(|p| push_h(out, p)),
            GroupPoint::Product(ProductPoint::Su2(v)) => v.iter().for_each(|p| push_s(out, p)),
        }
    }

    pub fn as_heisenberg(&self) -> Option<&HeisenbergPoint> {
        match self {
            GroupPoint::Heisenberg(p) => Some(p),
            _ => None,
        }
    }

    pub fn as_su2(&self) -> Option<&Su2Point> {
        match self {
            GroupPoint::Su2(p) => Some(p),
            _ => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            GroupPoint::Heisenberg(p) => p.is_finite(),
            GroupPoint::Su2(p) => p.is_finite(),
            GroupPoint::Product(ProductPoint::Heisenberg(v)) => v.iter().all(|p| p.is_finite()),
            GroupPoint::Product(ProductPoint::Su2(v)) => v.iter().all(|p| p.is_finite()),
        }
    }

    /// In-place right multiplication by `exp(Σ coeffs_i X_i)` over the
    /// horizontal frame. Caller guarantees `coeffs` matches the frame.
    #[inline]
    pub(crate) fn step_in_place(&mut self, coeffs: &[f64]) {
        match self {
            GroupPoint::Heisenberg(p) => p.step(coeffs[0], coeffs[1]),
            GroupPoint::Su2(p) => p.step(coeffs[0], coeffs[1]),
            GroupPoint::Product(ProductPoint::Heisenberg(v)) => {
                for (p, c) in v.iter_mut().zip(coeffs.chunks_exact(2)) {
                    p.step(c[0], c[1]);
                }
            }
            GroupPoint::Product(ProductPoint::Su2(v)) => {
                for (p, c) in v.iter_mut().zip(coeffs.chunks_exact(2)) {
                    p.step(c[0], c[1]);
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GroupKind {
    Heisenberg,
    HeisenbergProduct(usize),
    Su2,
    Su2Product(usize),
}

impl GroupKind {
    /// Number of factors.
    pub fn factors(&self) -> usize {
        match *self {
            GroupKind::Heisenberg | GroupKind::Su2 => 1,
            GroupKind::HeisenbergProduct(n) | GroupKind::Su2Product(n) => n,
        }
    }

    pub fn is_heisenberg_type(&self) -> bool {
        matches!(self, GroupKind::Heisenberg | GroupKind::HeisenbergProduct(_))
    }

    /// Coordinates per factor in [`GroupPoint::coords`].
    pub fn coords_per_factor(&self) -> usize {
        if self.is_heisenberg_type() {
            3
        } else {
            4
        }
    }

    pub fn name(&self) -> String {
        match *self {
            GroupKind::Heisenberg => "heisenberg".into(),
            GroupKind::HeisenbergProduct(n) => format!("heis_product:{n}"),
            GroupKind::Su2 => "su2".into(),
            GroupKind::Su2Product(n) => format!("su2_product:{n}"),
        }
    }
}

/// A model group with its left-invariant sub-Riemannian structure.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupModel {
    kind: GroupKind,
    frame: HorizontalFrame,
    sc: StructureConstants,
}

impl GroupModel {
    pub fn new(kind: GroupKind) -> Result<Self> {
        let n = kind.factors();
        if n == 0 {
            return Err(Error::InvalidInput("product groups need at least one factor".into()));
        }
        let base = if kind.is_heisenberg_type() {
            StructureConstants::heisenberg()
        } else {
            StructureConstants::su2()
        };
        let sc = if n == 1 { base } else { base.power(n) };
        let mut indices = Vec::with_capacity(2 * n);
        let mut labels = Vec::with_capacity(2 * n);
        for f in 0..n {
            indices.extend([3 * f, 3 * f + 1]);
            if n == 1 {
                labels.extend(["X".to_string(), "Y".to_string()]);
            } else {
                labels.extend([format!("X{}", f + 1), format!("Y{}", f + 1)]);
            }
        }
        let label_refs: Vec<&str> = labels.iter().map(String::as_str).collect();
        let frame = HorizontalFrame::from_basis(3 * n, &indices, &label_refs)?;
        let flag = hormander_flag(&frame, &sc, 4)?;
        if flag.satisfied_at.is_none() {
            return Err(Error::InvalidInput(format!("{} frame is not bracket generating", kind.name())));
        }
        Ok(GroupModel { kind, frame, sc })
    }

    pub fn heisenberg() -> Self {
        Self::new(GroupKind::Heisenberg).expect("shipped model")
    }

    pub fn su2() -> Self {
        Self::new(GroupKind::Su2).expect("shipped model")
    }

    pub fn heisenberg_product(n: usize) -> Result<Self> {
        Self::new(GroupKind::HeisenbergProduct(n))
    }

    pub fn su2_product(n: usize) -> Result<Self> {
        Self::new(GroupKind::Su2Product(n))
    }

    pub fn kind(&self) -> GroupKind {
        self.kind
    }

    pub fn frame(&self) -> &HorizontalFrame {
        &self.frame
    }

    pub fn structure_constants(&self) -> &StructureConstants {
        &self.sc
    }

    pub fn frame_size(&self) -> usize {
        self.frame.len()
    }

    pub fn coord_dim(&self) -> usize {
        self.kind.factors() * self.kind.coords_per_factor()
    }

    pub fn identity(&self) -> GroupPoint {
        let n = self.kind.factors();
        match self.kind {
            GroupKind::Heisenberg => HeisenbergPoint::IDENTITY.into(),
            GroupKind::Su2 => Su2Point::IDENTITY.into(),
            GroupKind::HeisenbergProduct(_) => {
                GroupPoint::Product(ProductPoint::Heisenberg(vec![HeisenbergPoint::IDENTITY; n]))
            }
            GroupKind::Su2Product(_) => GroupPoint::Product(ProductPoint::Su2(vec![Su2Point::IDENTITY; n])),
        }
    }

    pub fn contains(&self, g: &GroupPoint) -> bool {
        match (self.kind, g) {
            (GroupKind::Heisenberg, GroupPoint::Heisenberg(_)) => true,
            (GroupKind::Su2, GroupPoint::Su2(_)) => true,
            (GroupKind::HeisenbergProduct(n), GroupPoint::Product(ProductPoint::Heisenberg(v))) => v.len() == n,
            (GroupKind::Su2Product(n), GroupPoint::Product(ProductPoint::Su2(v))) => v.len() == n,
            _ => false,
        }
    }

    pub(crate) fn expect(&self, g: &GroupPoint) -> Result<()> {
        if self.contains(g) {
            Ok(())
        } else {
            Err(Error::KindMismatch(format!("point {g:?} does not belong to {}", self.kind.name())))
        }
    }

    /// Inverse of [`GroupPoint::coords`]. SU(2) factors are renormalized.
    pub fn point_from_coords(&self, coords: &[f64]) -> Result<GroupPoint> {
        check_dim(self.coord_dim(), coords.len())?;
        let heis = |c: &[f64]| HeisenbergPoint::new(c[0], c[1], c[2]);
        let su2 = |c: &[f64]| Su2Point::new(Complex64::new(c[0], c[1]), Complex64::new(c[2], c[3]));
        Ok(match self.kind {
            GroupKind::Heisenberg => heis(coords).into(),
            GroupKind::Su2 => su2(coords)?.into(),
            GroupKind::HeisenbergProduct(_) => {
                GroupPoint::Product(ProductPoint::Heisenberg(coords.chunks_exact(3).map(heis).collect()))
            }
            GroupKind::Su2Product(_) => GroupPoint::Product(ProductPoint::Su2(
                coords.chunks_exact(4).map(su2).collect::<Result<_>>()?,
            )),
        })
    }

    /// Like [`point_from_coords`](Self::point_from_coords) but copies SU(2)
    /// rows verbatim, so `coords → point → coords` is bit-exact.
    pub(crate) fn point_from_coords_raw(&self, coords: &[f64]) -> GroupPoint {
        let heis = |c: &[f64]| HeisenbergPoint::new(c[0], c[1], c[2]);
        let su2 = |c: &[f64]| Su2Point {
            z1: Complex64::new(c[0], c[1]),
            z2: Complex64::new(c[2], c[3]),
        };
        match self.kind {
            GroupKind::Heisenberg => heis(coords).into(),
            GroupKind::Su2 => su2(coords).into(),
            GroupKind::HeisenbergProduct(_) => {
                GroupPoint::Product(ProductPoint::Heisenberg(coords.chunks_exact(3).map(heis).collect()))
            }
            GroupKind::Su2Product(_) => GroupPoint::Product(ProductPoint::Su2(coords.chunks_exact(4).map(su2).collect())),
        }
    }

    pub fn domain(&self) -> Domain {
        Domain::Group(self.kind)
    }
}

/// Group product `g·h`.
pub fn multiply(model: &GroupModel, g: &GroupPoint, h: &GroupPoint) -> Result<GroupPoint> {
    model.expect(g)?;
    model.expect(h)?;
    Ok(match (g, h) {
        (GroupPoint::Heisenberg(a), GroupPoint::Heisenberg(b)) => a.mul(b).into(),
        (GroupPoint::Su2(a), GroupPoint::Su2(b)) => a.mul(b).into(),
        (GroupPoint::Product(ProductPoint::Heisenberg(a)), GroupPoint::Product(ProductPoint::Heisenberg(b))) => {
            GroupPoint::Product(ProductPoint::Heisenberg(a.iter().zip(b).map(|(p, q)| p.mul(q)).collect()))
        }
        (GroupPoint::Product(ProductPoint::Su2(a)), GroupPoint::Product(ProductPoint::Su2(b))) => {
            GroupPoint::Product(ProductPoint::Su2(a.iter().zip(b).map(|(p, q)| p.mul(q)).collect()))
        }
        _ => unreachable!("membership checked above"),
    })
}

pub fn inverse(model: &GroupModel, g: &GroupPoint) -> Result<GroupPoint> {
    model.expect(g)?;
    Ok(match g {
        GroupPoint::Heisenberg(a) => a.inv().into(),
        GroupPoint::Su2(a) => a.inv().into(),
        GroupPoint::Product(ProductPoint::Heisenberg(v)) => {
            GroupPoint::Product(ProductPoint::Heisenberg(v.iter().map(|p| p.inv()).collect()))
        }
        GroupPoint::Product(ProductPoint::Su2(v)) => {
            GroupPoint::Product(ProductPoint::Su2(v.iter().map(|p| p.inv()).collect()))
        }
    })
}

/// `g·exp(Σᵢ coeffsᵢ Xᵢ)` over the horizontal frame.
pub fn exp_step(model: &GroupModel, g: &GroupPoint, coeffs: &[f64]) -> Result<GroupPoint> {
    model.expect(g)?;
    check_dim(model.frame_size(), coeffs.len())?;
    let mut out = g.clone();
    out.step_in_place(coeffs);
    Ok(out)
}

/// `exp(v)` for a full algebra element given in the model's basis
/// (three coefficients X, Y, Z per factor).
pub fn exp_algebra(model: &GroupModel, v: &[f64]) -> Result<GroupPoint> {
    check_dim(model.structure_constants().dim(), v.len())?;
    let n = model.kind().factors();
    let heis = |c: &[f64]| HeisenbergPoint::new(c[0], c[1], c[2]);
    let su2 = |c: &[f64]| Su2Point::exp_algebra(c[0], c[1], c[2]);
    Ok(match model.kind() {
        GroupKind::Heisenberg => heis(v).into(),
        GroupKind::Su2 => su2(v).into(),
        GroupKind::HeisenbergProduct(_) => {
            GroupPoint::Product(ProductPoint::Heisenberg(v.chunks_exact(3).take(n).map(heis).collect()))
        }
        GroupKind::Su2Product(_) => GroupPoint::Product(ProductPoint::Su2(v.chunks_exact(3).take(n).map(su2).collect())),
    })
}

/// `(X̃ᵢ f)(g) = d/dt|₀ f(g·exp(tXᵢ))`.
///
/// Uses `f`'s analytic gradient when it has one, otherwise a central
/// difference with step `eps`.
pub fn directional_derivative(
    model: &GroupModel,
    f: &TestFunction,
    g: &GroupPoint,
    frame_index: usize,
    eps: f64,
) -> Result<f64> {
    model.expect(g)?;
    f.expect_domain(model.domain())?;
    if frame_index >= model.frame_size() {
        return Err(Error::InvalidInput(format!(
            "frame index {frame_index} out of range for {} fields",
            model.frame_size()
        )));
    }
    let coords = g.coords();
    if let Some(grad) = f.analytic_grad(&coords) {
        check_dim(model.frame_size(), grad.len())?;
        let d = grad[frame_index];
        return finite_or_err(d, f.id());
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidInput("finite-difference step must be positive".into()));
    }
    let eval = |p: &GroupPoint| f.eval(&p.coords());
    lifted_central_difference(g, frame_index, model.frame_size(), eps, eval, f.id())
}

pub(crate) fn lifted_central_difference<F: Fn(&GroupPoint) -> f64>(
    g: &GroupPoint,
    frame_index: usize,
    frame_size: usize,
    eps: f64,
    eval: F,
    id: &str,
) -> Result<f64> {
    let mut coeffs = vec![0.0; frame_size];
    coeffs[frame_index] = eps;
    let mut plus = g.clone();
    plus.step_in_place(&coeffs);
    coeffs[frame_index] = -eps;
    let mut minus = g.clone();
    minus.step_in_place(&coeffs);
    let (fp, fm) = (eval(&plus), eval(&minus));
    if !(fp.is_finite() && fm.is_finite()) {
        return Err(Error::NumericalDomain(format!("`{id}` is not finite near the evaluation point")));
    }
    finite_or_err((fp - fm) / (2.0 * eps), id)
}

fn finite_or_err(d: f64, id: &str) -> Result<f64> {
    if d.is_finite() {
        Ok(d)
    } else {
        Err(Error::NumericalDomain(format!("derivative of `{id}` is not finite")))
    }
}
