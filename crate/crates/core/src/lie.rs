//! Finite-dimensional Lie algebra arithmetic over a fixed basis.
//!
//! An algebra is described by its structure constants `c[i][j][k]`, meaning
//! `[e_i, e_j] = Σ_k c[i][j][k] e_k`. On top of that this module computes
//! brackets, the bracket-generating rank flag of a horizontal frame, and the
//! closure check `[V1, V1] ⊆ V2` used to classify closed subgroups of
//! step-two groups.

use std::fmt;

use crate::error::{check_dim, Error, Result};

/// Pivot threshold for rank computations.
pub const RANK_TOL: f64 = 1e-10;

/// Tolerance used when validating antisymmetry and the Jacobi identity.
pub const JACOBI_TOL: f64 = 1e-12;

/// Dense table of structure constants.
#[derive(Clone, PartialEq)]
pub struct StructureConstants {
    dim: usize,
    c: Vec<f64>,
}

impl fmt::Debug for StructureConstants {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let nonzero: Vec<_> = self
            .entries()
            .filter(|&(_, _, _, v)| v != 0.0)
            .collect();
        f.debug_struct("StructureConstants")
            .field("dim", &self.dim)
            .field("nonzero", &nonzero)
            .finish()
    }
}

impl StructureConstants {
    /// Builds a table from a row-major `dim³` vector and validates it.
    pub fn new(dim: usize, c: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("algebra dimension must be positive".into()));
        }
        check_dim(dim * dim * dim, c.len())?;
        let sc = StructureConstants { dim, c };
        sc.validate()?;
        Ok(sc)
    }

    /// The abelian algebra of dimension `dim`.
    pub fn abelian(dim: usize) -> Self {
        StructureConstants {
            dim,
            c: vec![0.0; dim * dim * dim],
        }
    }

    /// Heisenberg algebra with basis (X, Y, Z) and `[X, Y] = Z`.
    pub fn heisenberg() -> Self {
        let mut sc = Self::abelian(3);
        sc.set_antisym(0, 1, 2, 1.0);
        sc
    }

    /// 𝔰𝔲(2) in the Pauli basis (X, Y, Z): `[X,Y]=2Z`, `[Y,Z]=2X`, `[Z,X]=2Y`.
    pub fn su2() -> Self {
        let mut sc = Self::abelian(3);
        sc.set_antisym(0, 1, 2, 2.0);
        sc.set_antisym(1, 2, 0, 2.0);
        sc.set_antisym(2, 0, 1, 2.0);
        sc
    }

    /// Direct sum of `n` copies of `self`; factor `f` occupies indices
    /// `f*dim .. (f+1)*dim`.
    pub fn power(&self, n: usize) -> Self {
        let d = self.dim;
        let mut out = Self::abelian(d * n);
        for f in 0..n {
            for (i, j, k, v) in self.entries() {
                if v != 0.0 {
                    let idx = out.index(f * d + i, f * d + j, f * d + k);
                    out.c[idx] = v;
                }
            }
        }
        out
    }

    /// Parses the plain-text table format: one `i j k value` entry per line,
    /// 1-based indices, omitted entries zero. Blank lines and `#` comments
    /// are ignored. The dimension is the largest index seen unless given.
    pub fn from_table_str(text: &str, dim: Option<usize>) -> Result<Self> {
        let mut entries = Vec::new();
        let mut max_index = 0usize;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            let parse_err = |msg: String| Error::Parse {
                line: lineno + 1,
                msg,
            };
            if parts.len() != 4 {
                return Err(parse_err(format!("expected `i j k value`, got {line:?}")));
            }
            let mut idx = [0usize; 3];
            for (slot, p) in idx.iter_mut().zip(&parts[..3]) {
                let v: usize = p
                    .parse()
                    .map_err(|_| parse_err(format!("bad index {p:?}")))?;
                if v == 0 {
                    return Err(parse_err("indices are 1-based".into()));
                }
                *slot = v;
            }
            let value: f64 = parts[3]
                .parse()
                .map_err(|_| parse_err(format!("bad value {:?}", parts[3])))?;
            max_index = max_index.max(idx[0]).max(idx[1]).max(idx[2]);
            entries.push((idx, value));
        }
        let dim = match dim {
            Some(d) if d < max_index => {
                return Err(Error::InvalidInput(format!(
                    "index {max_index} exceeds declared dimension {d}"
                )))
            }
            Some(d) => d,
            None => max_index,
        };
        if dim == 0 {
            return Err(Error::InvalidInput("empty structure-constant table".into()));
        }
        let mut c = vec![0.0; dim * dim * dim];
        for ([i, j, k], v) in entries {
            c[((i - 1) * dim + (j - 1)) * dim + (k - 1)] = v;
        }
        Self::new(dim, c)
    }

    /// Writes the nonzero entries in the table format read by
    /// [`from_table_str`](Self::from_table_str).
    pub fn to_table_string(&self) -> String {
        let mut out = String::new();
        for (i, j, k, v) in self.entries() {
            if v != 0.0 {
                out.push_str(&format!("{} {} {} {}\n", i + 1, j + 1, k + 1, v));
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dim + j) * self.dim + k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.c[self.index(i, j, k)]
    }

    fn set_antisym(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let a = self.index(i, j, k);
        let b = self.index(j, i, k);
        self.c[a] = v;
        self.c[b] = -v;
    }

    fn entries(&self) -> impl Iterator<Item = (usize, usize, usize, f64)> + '_ {
        let d = self.dim;
        (0..d).flat_map(move |i| {
            (0..d).flat_map(move |j| (0..d).map(move |k| (i, j, k, self.get(i, j, k))))
        })
    }

    /// Largest violation of antisymmetry over all index triples.
    pub fn antisymmetry_defect(&self) -> f64 {
        self.entries()
            .map(|(i, j, k, v)| (v + self.get(j, i, k)).abs())
            .fold(0.0, f64::max)
    }

    /// Largest Jacobi-identity residual over all basis triples.
    pub fn jacobi_defect(&self) -> f64 {
        let d = self.dim;
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for m in 0..d {
                        let mut s = 0.0;
                        for l in 0..d {
                            s += self.get(j, k, l) * self.get(i, l, m)
                                + self.get(k, i, l) * self.get(j, l, m)
                                + self.get(i, j, l) * self.get(k, l, m);
                        }
                        worst = worst.max(s.abs());
                    }
                }
            }
        }
        worst
    }

    fn validate(&self) -> Result<()> {
        let anti = self.antisymmetry_defect();
        if anti > JACOBI_TOL {
            return Err(Error::InvalidInput(format!(
                "structure constants are not antisymmetric (defect {anti:e})"
            )));
        }
        let jac = self.jacobi_defect();
        if jac > JACOBI_TOL {
            return Err(Error::InvalidInput(format!(
                "structure constants violate the Jacobi identity (defect {jac:e})"
            )));
        }
        Ok(())
    }

    /// True when every bracket of a bracket vanishes to `tol`.
    pub fn is_step_two(&self, tol: f64) -> bool {
        let d = self.dim;
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for m in 0..d {
                        // [[e_i, e_j], e_k] component m
                        let s: f64 = (0..d).map(|l| self.get(i, j, l) * self.get(l, k, m)).sum();
                        if s.abs() > tol {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }
}

/// Coordinates of an algebra element in the basis of a [`StructureConstants`].
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraVector(Vec<f64>);

impl AlgebraVector {
    pub fn new(coeffs: Vec<f64>) -> Self {
        AlgebraVector(coeffs)
    }

    pub fn zero(dim: usize) -> Self {
        AlgebraVector(vec![0.0; dim])
    }

    /// The `i`-th basis vector (0-based).
    pub fn basis(dim: usize, i: usize) -> Self {
        let mut v = vec![0.0; dim];
        v[i] = 1.0;
        AlgebraVector(v)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn add(&self, other: &AlgebraVector) -> AlgebraVector {
        AlgebraVector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn scale(&self, s: f64) -> AlgebraVector {
        AlgebraVector(self.0.iter().map(|a| a * s).collect())
    }
}

impl From<Vec<f64>> for AlgebraVector {
    fn from(v: Vec<f64>) -> Self {
        AlgebraVector(v)
    }
}

/// `[a, b]` computed from the structure constants.
pub fn bracket(a: &AlgebraVector, b: &AlgebraVector, sc: &StructureConstants) -> Result<AlgebraVector> {
    let d = sc.dim();
    check_dim(d, a.dim())?;
    check_dim(d, b.dim())?;
    let mut out = vec![0.0; d];
    for (i, &ai) in a.coeffs().iter().enumerate() {
        if ai == 0.0 {
            continue;
        }
        for (j, &bj) in b.coeffs().iter().enumerate() {
            if bj == 0.0 {
                continue;
            }
            let w = ai * bj;
            for (k, o) in out.iter_mut().enumerate() {
                *o += w * sc.get(i, j, k);
            }
        }
    }
    Ok(AlgebraVector(out))
}

/// Numerical rank of a set of vectors by fully pivoted elimination.
pub fn rank(vectors: &[AlgebraVector], tol: f64) -> usize {
    if vectors.is_empty() {
        return 0;
    }
    let cols = vectors[0].dim();
    let mut m: Vec<Vec<f64>> = vectors.iter().map(|v| v.coeffs().to_vec()).collect();
    let rows = m.len();
    let mut r = 0;
    while r < rows.min(cols) {
        let (mut pi, mut pj, mut best) = (r, r, 0.0f64);
        for (i, row) in m.iter().enumerate().skip(r) {
            for (j, &v) in row.iter().enumerate().skip(r) {
                if v.abs() > best {
                    best = v.abs();
                    pi = i;
                    pj = j;
                }
            }
        }
        if best <= tol {
            break;
        }
        m.swap(r, pi);
        for row in m.iter_mut() {
            row.swap(r, pj);
        }
        let pivot_row = m[r].clone();
        for row in m.iter_mut().skip(r + 1) {
            let f = row[r] / pivot_row[r];
            if f != 0.0 {
                for (x, p) in row.iter_mut().zip(&pivot_row).skip(r) {
                    *x -= f * p;
                }
            }
        }
        r += 1;
    }
    r
}

/// Orthonormal basis of `span(vectors)` by twice-iterated modified Gram–Schmidt.
fn orthonormal_basis(vectors: &[AlgebraVector], tol: f64) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in vectors {
        let mut w = v.coeffs().to_vec();
        for _ in 0..2 {
            for q in &basis {
                let p: f64 = w.iter().zip(q).map(|(a, b)| a * b).sum();
                for (x, qi) in w.iter_mut().zip(q) {
                    *x -= p * qi;
                }
            }
        }
        let n = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > tol {
            basis.push(w.into_iter().map(|x| x / n).collect());
        }
    }
    basis
}

fn residual_norm(w: &AlgebraVector, basis: &[Vec<f64>]) -> f64 {
    let mut r = w.coeffs().to_vec();
    for _ in 0..2 {
        for q in basis {
            let p: f64 = r.iter().zip(q).map(|(a, b)| a * b).sum();
            for (x, qi) in r.iter_mut().zip(q) {
                *x -= p * qi;
            }
        }
    }
    r.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// The generators X₁,…,X_n of a horizontal space.
#[derive(Clone, Debug, PartialEq)]
pub struct HorizontalFrame {
    generators: Vec<AlgebraVector>,
    labels: Vec<String>,
}

impl HorizontalFrame {
    pub fn new(generators: Vec<AlgebraVector>, labels: Vec<String>) -> Result<Self> {
        if generators.is_empty() {
            return Err(Error::InvalidInput("horizontal frame is empty".into()));
        }
        check_dim(generators.len(), labels.len())?;
        let d = generators[0].dim();
        for g in &generators {
            check_dim(d, g.dim())?;
        }
        if rank(&generators, RANK_TOL) != generators.len() {
            return Err(Error::InvalidInput(
                "horizontal frame generators are linearly dependent".into(),
            ));
        }
        Ok(HorizontalFrame { generators, labels })
    }

    /// Frame made of the listed basis vectors of a `dim`-dimensional algebra.
    pub fn from_basis(dim: usize, indices: &[usize], labels: &[&str]) -> Result<Self> {
        Self::new(
            indices.iter().map(|&i| AlgebraVector::basis(dim, i)).collect(),
            labels.iter().map(|s| s.to_string()).collect(),
        )
    }

    pub fn generators(&self) -> &[AlgebraVector] {
        &self.generators
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn algebra_dim(&self) -> usize {
        self.generators[0].dim()
    }
}

/// Dimensions of the iterated-bracket spans of a frame.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize)]
pub struct RankFlag {
    /// `ranks[d-1]` is the dimension of the span of brackets of depth ≤ d.
    pub ranks: Vec<usize>,
    /// Depth at which the span becomes the whole algebra, if reached.
    pub satisfied_at: Option<usize>,
}

/// Computes the rank flag of `frame`, stopping early once the full algebra
/// is spanned. Depth 1 is the frame itself; each further depth adds brackets
/// of the previous layer against the frame.
pub fn hormander_flag(frame: &HorizontalFrame, sc: &StructureConstants, max_depth: usize) -> Result<RankFlag> {
    if max_depth == 0 {
        return Err(Error::Precondition("max_depth must be at least 1".into()));
    }
    check_dim(sc.dim(), frame.algebra_dim())?;
    let dim = sc.dim();
    let mut span: Vec<AlgebraVector> = frame.generators().to_vec();
    let mut layer = span.clone();
    let mut ranks = vec![rank(&span, RANK_TOL)];
    let mut satisfied_at = (ranks[0] == dim).then_some(1);
    let mut depth = 1;
    while satisfied_at.is_none() && depth < max_depth {
        let mut next = Vec::new();
        for a in &layer {
            for x in frame.generators() {
                let b = bracket(a, x, sc)?;
                let mut candidate = span.clone();
                candidate.push(b.clone());
                if rank(&candidate, RANK_TOL) > rank(&span, RANK_TOL) {
                    span.push(b.clone());
                }
                next.push(b);
            }
        }
        layer = next;
        depth += 1;
        let r = rank(&span, RANK_TOL);
        ranks.push(r);
        if r == dim {
            satisfied_at = Some(depth);
        }
    }
    Ok(RankFlag { ranks, satisfied_at })
}

/// Checks `[v1, v1] ⊆ span(v2)` in a step-two algebra.
pub fn check_step_two_subalgebra(v1: &[AlgebraVector], v2: &[AlgebraVector], sc: &StructureConstants) -> Result<bool> {
    for v in v1.iter().chain(v2) {
        check_dim(sc.dim(), v.dim())?;
    }
    if !sc.is_step_two(RANK_TOL) {
        return Err(Error::Precondition("algebra is not step-two".into()));
    }
    let basis = orthonormal_basis(v2, RANK_TOL);
    for (i, a) in v1.iter().enumerate() {
        for b in &v1[i + 1..] {
            let w = bracket(a, b, sc)?;
            if residual_norm(&w, &basis) > RANK_TOL {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(dim: usize, i: usize) -> AlgebraVector {
        AlgebraVector::basis(dim, i)
    }

    #[test]
    fn heisenberg_bracket_xy_is_z() {
        let sc = StructureConstants::heisenberg();
        assert_eq!(bracket(&e(3, 0), &e(3, 1), &sc).unwrap(), e(3, 2));
        assert_eq!(bracket(&e(3, 1), &e(3, 0), &sc).unwrap(), e(3, 2).scale(-1.0));
    }

    #[test]
    fn su2_bracket_table() {
        let sc = StructureConstants::su2();
        assert_eq!(bracket(&e(3, 0), &e(3, 1), &sc).unwrap(), e(3, 2).scale(2.0));
        assert_eq!(bracket(&e(3, 1), &e(3, 2), &sc).unwrap(), e(3, 0).scale(2.0));
        assert_eq!(bracket(&e(3, 2), &e(3, 0), &sc).unwrap(), e(3, 1).scale(2.0));
    }

    #[test]
    fn self_bracket_vanishes() {
        let sc = StructureConstants::su2();
        let a = AlgebraVector::new(vec![0.3, -1.2, 2.5]);
        assert!(bracket(&a, &a, &sc).unwrap().norm() == 0.0);
    }

    #[test]
    fn bracket_dimension_mismatch() {
        let sc = StructureConstants::heisenberg();
        let err = bracket(&e(2, 0), &e(3, 1), &sc).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn shipped_tables_are_exact_lie_algebras() {
        for sc in [
            StructureConstants::heisenberg(),
            StructureConstants::su2(),
            StructureConstants::heisenberg().power(3),
            StructureConstants::su2().power(2),
        ] {
            assert_eq!(sc.antisymmetry_defect(), 0.0);
            assert_eq!(sc.jacobi_defect(), 0.0);
        }
    }

    #[test]
    fn rejects_non_jacobi_table() {
        // [e1,e2]=e3, [e2,e3]=e1, [e3,e1]=e3 breaks Jacobi
        let text = "1 2 3 1\n2 1 3 -1\n2 3 1 1\n3 2 1 -1\n3 1 3 1\n1 3 3 -1\n";
        assert!(StructureConstants::from_table_str(text, None).is_err());
    }

    #[test]
    fn rejects_non_antisymmetric_table() {
        assert!(StructureConstants::from_table_str("1 2 3 1\n", None).is_err());
    }

    #[test]
    fn table_round_trip() {
        let sc = StructureConstants::su2();
        let back = StructureConstants::from_table_str(&sc.to_table_string(), Some(3)).unwrap();
        assert_eq!(back, sc);
        let with_comments = "# heisenberg\n1 2 3 1.0\n\n2 1 3 -1.0 # antisym\n";
        assert_eq!(
            StructureConstants::from_table_str(with_comments, None).unwrap(),
            StructureConstants::heisenberg()
        );
    }

    #[test]
    fn table_parse_errors() {
        assert!(matches!(
            StructureConstants::from_table_str("0 1 2 1", None),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            StructureConstants::from_table_str("1 2 3", None),
            Err(Error::Parse { .. })
        ));
        assert!(StructureConstants::from_table_str("1 2 4 1\n2 1 4 -1", Some(3)).is_err());
    }

    #[test]
    fn hormander_heisenberg() {
        let sc = StructureConstants::heisenberg();
        let frame = HorizontalFrame::from_basis(3, &[0, 1], &["X", "Y"]).unwrap();
        let flag = hormander_flag(&frame, &sc, 3).unwrap();
        assert_eq!(flag.ranks, vec![2, 3]);
        assert_eq!(flag.satisfied_at, Some(2));
    }

    #[test]
    fn hormander_su2() {
        let sc = StructureConstants::su2();
        let frame = HorizontalFrame::from_basis(3, &[0, 1], &["X", "Y"]).unwrap();
        let flag = hormander_flag(&frame, &sc, 3).unwrap();
        assert_eq!(flag.ranks, vec![2, 3]);
        assert_eq!(flag.satisfied_at, Some(2));
    }

    #[test]
    fn hormander_abelian_never_satisfied() {
        let sc = StructureConstants::abelian(3);
        let frame = HorizontalFrame::from_basis(3, &[0, 1], &["e1", "e2"]).unwrap();
        let flag = hormander_flag(&frame, &sc, 3).unwrap();
        assert_eq!(flag.ranks, vec![2, 2, 2]);
        assert_eq!(flag.satisfied_at, None);
    }

    #[test]
    fn hormander_needs_positive_depth() {
        let sc = StructureConstants::heisenberg();
        let frame = HorizontalFrame::from_basis(3, &[0, 1], &["X", "Y"]).unwrap();
        assert!(matches!(hormander_flag(&frame, &sc, 0), Err(Error::Precondition(_))));
    }

    #[test]
    fn frame_rejects_dependent_generators() {
        let g = vec![e(3, 0), e(3, 0).scale(2.0)];
        assert!(HorizontalFrame::new(g, vec!["a".into(), "b".into()]).is_err());
    }

    #[test]
    fn step_two_subalgebra_verdicts() {
        let sc = StructureConstants::heisenberg();
        let (x, y, z) = (e(3, 0), e(3, 1), e(3, 2));
        assert!(check_step_two_subalgebra(&[], std::slice::from_ref(&z), &sc).unwrap());
        assert!(check_step_two_subalgebra(std::slice::from_ref(&x), &[], &sc).unwrap());
        assert!(!check_step_two_subalgebra(&[x.clone(), y.clone()], &[], &sc).unwrap());
        assert!(check_step_two_subalgebra(&[x, y], &[z], &sc).unwrap());
    }

    #[test]
    fn step_two_check_rejects_su2() {
        let sc = StructureConstants::su2();
        assert!(matches!(
            check_step_two_subalgebra(&[e(3, 0)], &[], &sc),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn rank_basics() {
        assert_eq!(rank(&[], RANK_TOL), 0);
        let v = vec![
            AlgebraVector::new(vec![1.0, 2.0, 3.0]),
            AlgebraVector::new(vec![2.0, 4.0, 6.0]),
            AlgebraVector::new(vec![0.0, 1.0, 0.0]),
        ];
        assert_eq!(rank(&v, RANK_TOL), 2);
    }
}
