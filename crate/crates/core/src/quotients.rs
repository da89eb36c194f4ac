//! Homogeneous quotients `M = H\G` of the model groups.
//!
//! Each [`QuotientKind`] fixes a closed subgroup `H` and an explicit map
//! `π: G → M` that is constant on right cosets `Hg`:
//!
//! | kind | G | H | π |
//! |------|---|---|---|
//! | real_line | ℍ¹ | {(x,0,z)} | y |
//! | grushin | ℍ¹ | {(0,y,0)} | (x, z + ½xy) |
//! | nonisotropic(α) | (ℍ¹)ⁿ | {(0,0,zᵢ): Σαᵢzᵢ = 0} | (x₁,y₁,…,xₙ,yₙ, Σαᵢzᵢ) |
//! | heis_like(A) | (ℍ¹)ⁿ | {(0,0,zᵢ): Az = 0} | (x₁,y₁,…,xₙ,yₙ, Az) |
//! | compact_heis(r) | ℍ¹ | Γ_r = {(ra, rb, r²c/2)} | fundamental-domain representative |
//! | hopf | SU(2) | {diag(e^{iθ}, e^{−iθ})} | (2z₁z̄₂, \|z₁\|²−\|z₂\|²) ∈ S² |
//! | so3 | SU(2) | {±I} | adjoint rotation on span{X,Y,Z} |
//! | so4 | SU(2)² | {±(I,I)} | q ↦ g·q·h̄ on quaternions |

use crate::error::{check_dim, Error, Result};
use crate::groups::{
    inverse, lifted_central_difference, multiply, GroupKind, GroupModel, GroupPoint, HeisenbergPoint, ProductPoint,
    Su2Point,
};
use crate::testfn::{Domain, TestFunction};

#[derive(Clone, Debug, PartialEq)]
pub enum QuotientKind {
    RealLine,
    Grushin,
    /// Weights `0 < α₁ ≤ … ≤ αₙ`.
    Nonisotropic(Vec<f64>),
    /// `m × n` matrix of nonzero weights, one row per central coordinate.
    HeisLike(Vec<Vec<f64>>),
    CompactHeis { r: f64 },
    Hopf,
    So3,
    So4,
}

/// Fieldless discriminant of [`QuotientKind`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum QuotientTag {
    RealLine,
    Grushin,
    Nonisotropic,
    HeisLike,
    CompactHeis,
    Hopf,
    So3,
    So4,
}

impl QuotientKind {
    pub fn tag(&self) -> QuotientTag {
        match self {
            QuotientKind::RealLine => QuotientTag::RealLine,
            QuotientKind::Grushin => QuotientTag::Grushin,
            QuotientKind::Nonisotropic(_) => QuotientTag::Nonisotropic,
            QuotientKind::HeisLike(_) => QuotientTag::HeisLike,
            QuotientKind::CompactHeis { .. } => QuotientTag::CompactHeis,
            QuotientKind::Hopf => QuotientTag::Hopf,
            QuotientKind::So3 => QuotientTag::So3,
            QuotientKind::So4 => QuotientTag::So4,
        }
    }
}

/// A point of a quotient, in the coordinates listed on [`QuotientModel::coord_dim`].
#[derive(Clone, Debug, PartialEq)]
pub struct QuotientPoint {
    pub coords: Vec<f64>,
}

impl QuotientPoint {
    pub fn new(coords: Vec<f64>) -> Self {
        QuotientPoint { coords }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuotientModel {
    kind: QuotientKind,
    base: GroupModel,
    quotient_dim: usize,
}

impl QuotientModel {
    pub fn new(kind: QuotientKind, base: GroupModel) -> Result<Self> {
        let bk = base.kind();
        let mismatch = || Error::KindMismatch(format!("{:?} cannot be built over {}", kind.tag(), bk.name()));
        let quotient_dim = match &kind {
            QuotientKind::RealLine => {
                (bk == GroupKind::Heisenberg).then_some(1).ok_or_else(mismatch)?
            }
            QuotientKind::Grushin => (bk == GroupKind::Heisenberg).then_some(2).ok_or_else(mismatch)?,
            QuotientKind::CompactHeis { r } => {
                if !(r.is_finite() && *r > 0.0) {
                    return Err(Error::InvalidInput("lattice scale r must be positive".into()));
                }
                (bk == GroupKind::Heisenberg).then_some(3).ok_or_else(mismatch)?
            }
            QuotientKind::Nonisotropic(alpha) => {
                let n = heis_factors(bk).ok_or_else(mismatch)?;
                check_dim(n, alpha.len())?;
                if alpha.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
                    return Err(Error::InvalidInput("nonisotropic weights must be positive".into()));
                }
                if alpha.windows(2).any(|w| w[0] > w[1]) {
                    return Err(Error::InvalidInput("nonisotropic weights must be nondecreasing".into()));
                }
                2 * n + 1
            }
            QuotientKind::HeisLike(rows) => {
                let n = heis_factors(bk).ok_or_else(mismatch)?;
                if rows.is_empty() {
                    return Err(Error::InvalidInput("heis_like needs at least one weight row".into()));
                }
                for row in rows {
                    check_dim(n, row.len())?;
                    if row.iter().any(|a| !a.is_finite() || *a == 0.0) {
                        return Err(Error::InvalidInput("heis_like weights must be finite and nonzero".into()));
                    }
                }
                2 * n + rows.len()
            }
            QuotientKind::Hopf => (bk == GroupKind::Su2).then_some(2).ok_or_else(mismatch)?,
            QuotientKind::So3 => (bk == GroupKind::Su2).then_some(3).ok_or_else(mismatch)?,
            QuotientKind::So4 => (bk == GroupKind::Su2Product(2)).then_some(6).ok_or_else(mismatch)?,
        };
        Ok(QuotientModel {
            kind,
            base,
            quotient_dim,
        })
    }

    pub fn real_line() -> Self {
        Self::new(QuotientKind::RealLine, GroupModel::heisenberg()).expect("shipped model")
    }

    pub fn grushin() -> Self {
        Self::new(QuotientKind::Grushin, GroupModel::heisenberg()).expect("shipped model")
    }

    pub fn nonisotropic(alpha: Vec<f64>) -> Result<Self> {
        let base = GroupModel::heisenberg_product(alpha.len())?;
        Self::new(QuotientKind::Nonisotropic(alpha), base)
    }

    pub fn heis_like(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        let base = GroupModel::heisenberg_product(n)?;
        Self::new(QuotientKind::HeisLike(rows), base)
    }

    pub fn compact_heis(r: f64) -> Result<Self> {
        Self::new(QuotientKind::CompactHeis { r }, GroupModel::heisenberg())
    }

    pub fn hopf() -> Self {
        Self::new(QuotientKind::Hopf, GroupModel::su2()).expect("shipped model")
    }

    pub fn so3() -> Self {
        Self::new(QuotientKind::So3, GroupModel::su2()).expect("shipped model")
    }

    pub fn so4() -> Self {
        Self::new(QuotientKind::So4, GroupModel::su2_product(2).expect("shipped model")).expect("shipped model")
    }

    pub fn kind(&self) -> &QuotientKind {
        &self.kind
    }

    pub fn tag(&self) -> QuotientTag {
        self.kind.tag()
    }

    pub fn base(&self) -> &GroupModel {
        &self.base
    }

    /// Manifold dimension of `M`.
    pub fn quotient_dim(&self) -> usize {
        self.quotient_dim
    }

    /// Length of [`QuotientPoint::coords`]: the manifold dimension, except
    /// hopf (3, a unit vector), so3 (9) and so4 (16), which store row-major
    /// rotation matrices.
    pub fn coord_dim(&self) -> usize {
        match self.kind {
            QuotientKind::Hopf => 3,
            QuotientKind::So3 => 9,
            QuotientKind::So4 => 16,
            _ => self.quotient_dim,
        }
    }

    pub fn domain(&self) -> Domain {
        Domain::Quotient(self.tag())
    }

    pub fn name(&self) -> String {
        match &self.kind {
            QuotientKind::RealLine => "real_line".into(),
            QuotientKind::Grushin => "grushin".into(),
            QuotientKind::Nonisotropic(a) => format!(
                "nonisotropic:{}",
                a.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
            ),
            QuotientKind::HeisLike(rows) => format!("heis_like:{}x{}", rows.len(), rows[0].len()),
            QuotientKind::CompactHeis { r } => format!("compact_heis:{r}"),
            QuotientKind::Hopf => "hopf".into(),
            QuotientKind::So3 => "so3".into(),
            QuotientKind::So4 => "so4".into(),
        }
    }

    /// True when an intrinsic coordinate description of the induced frame is
    /// available (see [`intrinsic_vector_field`]).
    pub fn has_intrinsic_frame(&self) -> bool {
        matches!(self.kind, QuotientKind::RealLine | QuotientKind::Grushin)
    }
}

fn heis_factors(kind: GroupKind) -> Option<usize> {
    match kind {
        GroupKind::Heisenberg => Some(1),
        GroupKind::HeisenbergProduct(n) => Some(n),
        _ => None,
    }
}

fn heis_factors_of(g: &GroupPoint) -> &[HeisenbergPoint] {
    match g {
        GroupPoint::Heisenberg(p) => std::slice::from_ref(p),
        GroupPoint::Product(ProductPoint::Heisenberg(v)) => v,
        _ => unreachable!("caller checked the base kind"),
    }
}

/// Hamilton product of quaternions `(w, x, y, z)`.
#[inline]
pub(crate) fn qmul(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    [
        a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
        a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
        a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
        a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
    ]
}

#[inline]
fn qconj(a: [f64; 4]) -> [f64; 4] {
    [a[0], -a[1], -a[2], -a[3]]
}

/// Rotation matrix of `v ↦ q v q̄`, row-major. Quadratic in `q`, so `q` and
/// `−q` give bit-identical output.
fn rotation_matrix(q: [f64; 4]) -> [f64; 9] {
    let [w, x, y, z] = q;
    [
        w * w + x * x - y * y - z * z,
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        w * w - x * x + y * y - z * z,
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        w * w - x * x - y * y + z * z,
    ]
}

/// Matrix of `q ↦ a·q·b̄` on ℝ⁴ ≅ ℍ, row-major.
fn left_right_matrix(a: [f64; 4], b: [f64; 4]) -> [f64; 16] {
    let bc = qconj(b);
    let mut out = [0.0; 16];
    for col in 0..4 {
        let mut unit = [0.0; 4];
        unit[col] = 1.0;
        let image = qmul(qmul(a, unit), bc);
        for row in 0..4 {
            out[row * 4 + col] = image[row];
        }
    }
    out
}

/// Rotation matrix of the SU(2) element in the adjoint representation.
pub fn so3_matrix(g: &Su2Point) -> [f64; 9] {
    rotation_matrix(g.quaternion())
}

/// `π(g)`.
pub fn project(qm: &QuotientModel, g: &GroupPoint) -> Result<QuotientPoint> {
    qm.base.expect(g)?;
    Ok(QuotientPoint::new(project_unchecked(qm, g)))
}

pub(crate) fn project_unchecked(qm: &QuotientModel, g: &GroupPoint) -> Vec<f64> {
    match &qm.kind {
        QuotientKind::RealLine => {
            let p = heis_factors_of(g)[0];
            vec![p.y]
        }
        QuotientKind::Grushin => {
            let p = heis_factors_of(g)[0];
            vec![p.x, p.z + 0.5 * p.x * p.y]
        }
        QuotientKind::Nonisotropic(alpha) => {
            let f = heis_factors_of(g);
            let mut out: Vec<f64> = f.iter().flat_map(|p| [p.x, p.y]).collect();
            out.push(f.iter().zip(alpha).map(|(p, a)| a * p.z).sum());
            out
        }
        QuotientKind::HeisLike(rows) => {
            let f = heis_factors_of(g);
            let mut out: Vec<f64> = f.iter().flat_map(|p| [p.x, p.y]).collect();
            out.extend(rows.iter().map(|row| f.iter().zip(row).map(|(p, a)| a * p.z).sum::<f64>()));
            out
        }
        QuotientKind::CompactHeis { r } => {
            let p = heis_factors_of(g)[0];
            let red = reduce_point(*r, &p);
            vec![red.x, red.y, red.z]
        }
        QuotientKind::Hopf => {
            let p = g.as_su2().expect("base checked");
            let w = 2.0 * p.z1 * p.z2.conj();
            vec![w.re, w.im, p.z1.norm_sqr() - p.z2.norm_sqr()]
        }
        QuotientKind::So3 => so3_matrix(g.as_su2().expect("base checked")).to_vec(),
        QuotientKind::So4 => {
            let GroupPoint::Product(ProductPoint::Su2(v)) = g else {
                unreachable!("base checked")
            };
            left_right_matrix(v[0].quaternion(), v[1].quaternion()).to_vec()
        }
    }
}

/// Distance from `v` to the nearest integer.
fn frac_dist(v: f64) -> f64 {
    (v - v.round()).abs()
}

/// True iff `Hg = Hh`, i.e. `h·g⁻¹ ∈ H` to within `tol`.
pub fn coset_equal(qm: &QuotientModel, g: &GroupPoint, h: &GroupPoint, tol: f64) -> Result<bool> {
    let base = &qm.base;
    let k = multiply(base, h, &inverse(base, g)?)?;
    Ok(match &qm.kind {
        QuotientKind::RealLine => heis_factors_of(&k)[0].y.abs() <= tol,
        QuotientKind::Grushin => {
            let p = heis_factors_of(&k)[0];
            p.x.abs() <= tol && p.z.abs() <= tol
        }
        QuotientKind::Nonisotropic(alpha) => {
            let f = heis_factors_of(&k);
            let central: f64 = f.iter().zip(alpha).map(|(p, a)| a * p.z).sum();
            f.iter().all(|p| p.x.abs() <= tol && p.y.abs() <= tol) && central.abs() <= tol
        }
        QuotientKind::HeisLike(rows) => {
            let f = heis_factors_of(&k);
            f.iter().all(|p| p.x.abs() <= tol && p.y.abs() <= tol)
                && rows
                    .iter()
                    .all(|row| f.iter().zip(row).map(|(p, a)| a * p.z).sum::<f64>().abs() <= tol)
        }
        QuotientKind::CompactHeis { r } => {
            let p = heis_factors_of(&k)[0];
            frac_dist(p.x / r) <= tol && frac_dist(p.y / r) <= tol && frac_dist(p.z / (0.5 * r * r)) <= tol
        }
        QuotientKind::Hopf => k.as_su2().expect("base checked").z2.norm() <= tol,
        QuotientKind::So3 => {
            let p = k.as_su2().expect("base checked");
            p.z2.norm() <= tol && p.z1.im.abs() <= tol
        }
        QuotientKind::So4 => {
            let GroupPoint::Product(ProductPoint::Su2(v)) = &k else {
                unreachable!("base checked")
            };
            let near = |p: &Su2Point, s: f64| (p.z1.re - s).abs() <= tol && p.z1.im.abs() <= tol && p.z2.norm() <= tol;
            (near(&v[0], 1.0) && near(&v[1], 1.0)) || (near(&v[0], -1.0) && near(&v[1], -1.0))
        }
    })
}

/// `v − kp ∈ [0, p)` together with `k`.
fn wrap(v: f64, p: f64) -> (f64, f64) {
    let k = (v / p).floor();
    let mut w = v - k * p;
    let mut k = k;
    if w >= p {
        w -= p;
        k += 1.0;
    }
    if w < 0.0 {
        w += p;
        k -= 1.0;
    }
    if w >= p {
        w = 0.0;
    }
    (w, k)
}

fn reduce_point(r: f64, g: &HeisenbergPoint) -> HeisenbergPoint {
    let (x, a) = wrap(g.x, r);
    let (y, b) = wrap(g.y, r);
    // γ = (−ra, −rb, 0) on the left; x and y are already reduced.
    let gamma = HeisenbergPoint::new(-r * a, -r * b, 0.0);
    let shifted = gamma.mul(g);
    let (z, _) = wrap(shifted.z, 0.5 * r * r);
    HeisenbergPoint::new(x, y, z)
}

/// Representative of `Γ_r g` in `[0,r) × [0,r) × [0,r²/2)`.
pub fn reduce_fundamental(qm: &QuotientModel, g: &HeisenbergPoint) -> Result<QuotientPoint> {
    let QuotientKind::CompactHeis { r } = qm.kind else {
        return Err(Error::KindMismatch("reduce_fundamental needs a compact_heis quotient".into()));
    };
    let p = reduce_point(r, g);
    Ok(QuotientPoint::new(vec![p.x, p.y, p.z]))
}

/// Derivative of `f` on `M` along the pushforward `dπ(X̃ᵢ)`, computed by
/// differentiating `f∘π` at `g` along the group flow.
pub fn quotient_horizontal_derivative(
    qm: &QuotientModel,
    f: &TestFunction,
    g: &GroupPoint,
    frame_index: usize,
    eps: f64,
) -> Result<f64> {
    qm.base.expect(g)?;
    f.expect_domain(qm.domain())?;
    let n = qm.base.frame_size();
    if frame_index >= n {
        return Err(Error::InvalidInput(format!("frame index {frame_index} out of range for {n} fields")));
    }
    if f.has_analytic_grad() {
        let m = project_unchecked(qm, g);
        let grad = f.analytic_grad(&m).expect("checked");
        check_dim(n, grad.len())?;
        let d = grad[frame_index];
        return if d.is_finite() {
            Ok(d)
        } else {
            Err(Error::NumericalDomain(format!("derivative of `{}` is not finite", f.id())))
        };
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidInput("finite-difference step must be positive".into()));
    }
    lifted_central_difference(g, frame_index, n, eps, |p| f.eval(&project_unchecked(qm, p)), f.id())
}

/// Coordinate expression of `dπ(X̃ᵢ)` at `m`, where it depends on `m` only:
/// real_line `{0, ∂u}`, grushin `{∂u, u∂v}`.
pub fn intrinsic_vector_field(qm: &QuotientModel, m: &[f64], frame_index: usize) -> Result<Vec<f64>> {
    check_dim(qm.coord_dim(), m.len())?;
    match (&qm.kind, frame_index) {
        (QuotientKind::RealLine, 0) => Ok(vec![0.0]),
        (QuotientKind::RealLine, 1) => Ok(vec![1.0]),
        (QuotientKind::Grushin, 0) => Ok(vec![1.0, 0.0]),
        (QuotientKind::Grushin, 1) => Ok(vec![0.0, m[0]]),
        (QuotientKind::RealLine | QuotientKind::Grushin, i) => {
            Err(Error::InvalidInput(format!("frame index {i} out of range for 2 fields")))
        }
        _ => Err(Error::UnsupportedMode(format!("{} has no intrinsic frame", qm.name()))),
    }
}

/// Derivative of `f` along `dπ(X̃ᵢ)` evaluated from the point of `M` alone.
pub fn intrinsic_derivative(qm: &QuotientModel, f: &TestFunction, m: &[f64], frame_index: usize, eps: f64) -> Result<f64> {
    f.expect_domain(qm.domain())?;
    let field = intrinsic_vector_field(qm, m, frame_index)?;
    let d = if let Some(grad) = f.analytic_grad(m) {
        check_dim(qm.base.frame_size(), grad.len())?;
        grad[frame_index]
    } else {
        if !(eps > 0.0) {
            return Err(Error::InvalidInput("finite-difference step must be positive".into()));
        }
        if field.iter().all(|&v| v == 0.0) {
            return Ok(0.0);
        }
        let plus: Vec<f64> = m.iter().zip(&field).map(|(a, v)| a + eps * v).collect();
        let minus: Vec<f64> = m.iter().zip(&field).map(|(a, v)| a - eps * v).collect();
        let (fp, fm) = (f.eval(&plus), f.eval(&minus));
        (fp - fm) / (2.0 * eps)
    };
    if d.is_finite() {
        Ok(d)
    } else {
        Err(Error::NumericalDomain(format!("derivative of `{}` is not finite", f.id())))
    }
}
