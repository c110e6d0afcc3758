//! Quiver data model: lattices `N` and `M`, the Euler form and its
//! skew-symmetrization, attractor points, divisibility, and the wall and
//! chamber analysis on `gamma^perp`.

use std::fmt;

use num_integer::Integer;
use num_traits::Zero;
use thiserror::Error;

use crate::{Int, Rat};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum QuiverError {
    #[error("quiver must have at least one vertex")]
    EmptyQuiver,
    #[error("arrow matrix must be {expected}x{expected}, got row of length {got}")]
    BadArrowMatrix { expected: usize, got: usize },
    #[error("negative arrow multiplicity at ({i},{j})")]
    NegativeMultiplicity { i: usize, j: usize },
    #[error("dimension mismatch: expected length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("zero dimension vector")]
    ZeroVector,
    #[error("dimension vector has a negative coordinate")]
    NegativeCoordinate,
    #[error("theta is not a stability parameter for gamma: theta(gamma) = {value} != 0")]
    NotAStabilityParameter { value: String },
}

/// A finite quiver given by its vertex count and arrow multiplicity matrix:
/// `arrows[i][j]` is the number of arrows from vertex `i` to vertex `j`.
///
/// Loops are allowed in the data model; they contribute zero to the
/// skew-symmetrized form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Quiver {
    d: usize,
    arrows: Vec<Vec<i64>>,
}

impl Quiver {
    pub fn new(arrows: Vec<Vec<i64>>) -> Result<Self, QuiverError> {
        let d = arrows.len();
        if d == 0 {
            return Err(QuiverError::EmptyQuiver);
        }
        for row in &arrows {
            if row.len() != d {
                return Err(QuiverError::BadArrowMatrix {
                    expected: d,
                    got: row.len(),
                });
            }
        }
        for (i, row) in arrows.iter().enumerate() {
            for (j, &a) in row.iter().enumerate() {
                if a < 0 {
                    return Err(QuiverError::NegativeMultiplicity { i, j });
                }
            }
        }
        Ok(Quiver { d, arrows })
    }

    /// The `n`-Kronecker quiver: two vertices joined by `n` arrows `1 -> 2`.
    pub fn kronecker(n: i64) -> Self {
        Quiver::new(vec![vec![0, n], vec![0, 0]]).unwrap()
    }

    /// Number of vertices.
    pub fn vertex_count(&self) -> usize {
        self.d
    }

    /// Arrow multiplicity `a_{ij}`.
    pub fn arrows(&self, i: usize, j: usize) -> i64 {
        self.arrows[i][j]
    }

    /// True iff the directed graph with an edge `i -> j` whenever
    /// `a_{ij} > 0` has no directed cycle.
    pub fn is_acyclic(&self) -> bool {
        // Kahn's algorithm on the support digraph.
        let mut indeg = vec![0usize; self.d];
        for i in 0..self.d {
            for j in 0..self.d {
                if self.arrows[i][j] > 0 {
                    indeg[j] += 1;
                }
            }
        }
        let mut queue: Vec<usize> = (0..self.d).filter(|&v| indeg[v] == 0).collect();
        let mut seen = 0;
        while let Some(v) = queue.pop() {
            seen += 1;
            for j in 0..self.d {
                if self.arrows[v][j] > 0 {
                    indeg[j] -= 1;
                    if indeg[j] == 0 {
                        queue.push(j);
                    }
                }
            }
        }
        seen == self.d
    }

    fn check_len(&self, len: usize) -> Result<(), QuiverError> {
        if len != self.d {
            Err(QuiverError::DimensionMismatch {
                expected: self.d,
                got: len,
            })
        } else {
            Ok(())
        }
    }

    /// Euler form `chi(x,y) = sum_i x_i y_i - sum_{i,j} a_{ij} x_i y_j`.
    pub fn euler_form(&self, x: &DimVector, y: &DimVector) -> Result<i64, QuiverError> {
        self.check_len(x.len())?;
        self.check_len(y.len())?;
        let mut s: i64 = 0;
        for i in 0..self.d {
            s += x[i] * y[i];
            for j in 0..self.d {
                s -= self.arrows[i][j] * x[i] * y[j];
            }
        }
        Ok(s)
    }

    /// Skew-symmetrized Euler form `<x,y>`, with `<e_i,e_j> = a_{ij} - a_{ji}`.
    pub fn skew_form(&self, x: &DimVector, y: &DimVector) -> Result<i64, QuiverError> {
        self.check_len(x.len())?;
        self.check_len(y.len())?;
        let mut s: i64 = 0;
        for i in 0..self.d {
            for j in 0..self.d {
                s += x[i] * y[j] * (self.arrows[i][j] - self.arrows[j][i]);
            }
        }
        Ok(s)
    }

    /// The covector `<x,->` as an integer vector: `j |-> <x, e_j>`.
    pub fn skew_covector(&self, x: &DimVector) -> Result<Vec<i64>, QuiverError> {
        self.check_len(x.len())?;
        Ok((0..self.d)
            .map(|j| {
                (0..self.d)
                    .map(|i| x[i] * (self.arrows[i][j] - self.arrows[j][i]))
                    .sum()
            })
            .collect())
    }

    /// `<x,y>` for rational vectors (perturbed charges).
    pub fn skew_form_rat(&self, x: &[Rat], y: &[Rat]) -> Result<Rat, QuiverError> {
        self.check_len(x.len())?;
        self.check_len(y.len())?;
        let mut s = Rat::zero();
        for i in 0..self.d {
            for j in 0..self.d {
                let c = self.arrows[i][j] - self.arrows[j][i];
                if c != 0 {
                    s += &x[i] * &y[j] * Rat::from_integer(Int::from(c));
                }
            }
        }
        Ok(s)
    }

    /// The covector `<x,->` for a rational vector `x`.
    pub fn skew_covector_rat(&self, x: &[Rat]) -> Result<Vec<Rat>, QuiverError> {
        self.check_len(x.len())?;
        Ok((0..self.d)
            .map(|j| {
                let mut s = Rat::zero();
                for i in 0..self.d {
                    let c = self.arrows[i][j] - self.arrows[j][i];
                    if c != 0 {
                        s += &x[i] * Rat::from_integer(Int::from(c));
                    }
                }
                s
            })
            .collect())
    }

    /// The attractor point `<g,->` of a charge `g`, as a stability covector.
    /// It evaluates to zero on `g` itself.
    pub fn attractor_point(&self, g: &DimVector) -> Result<StabilityPoint, QuiverError> {
        let cov = self.skew_covector(g)?;
        Ok(StabilityPoint::from_integers(&cov))
    }
}

/// A dimension vector `gamma` in `N = Z^{Q_0}`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DimVector(pub Vec<i64>);

impl DimVector {
    pub fn zero(d: usize) -> Self {
        DimVector(vec![0; d])
    }

    /// Standard basis vector `e_i`.
    pub fn unit(d: usize, i: usize) -> Self {
        let mut v = vec![0; d];
        v[i] = 1;
        DimVector(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.0.iter().all(|&c| c >= 0)
    }

    pub fn coord_sum(&self) -> i64 {
        self.0.iter().sum()
    }

    pub fn add(&self, other: &DimVector) -> DimVector {
        DimVector(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    pub fn sub(&self, other: &DimVector) -> DimVector {
        DimVector(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }

    pub fn scale(&self, k: i64) -> DimVector {
        DimVector(self.0.iter().map(|c| c * k).collect())
    }

    /// Componentwise `self <= other`.
    pub fn leq(&self, other: &DimVector) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    /// Strictly between 0 and `g` in the coordinatewise partial order:
    /// nonzero, `<= g`, and different from `g`.
    pub fn strictly_between_zero_and(&self, g: &DimVector) -> bool {
        !self.is_zero() && self.leq(g) && self != g
    }

    /// Exact division by a positive integer; `None` if any coordinate is not
    /// divisible.
    pub fn div_exact(&self, k: i64) -> Option<DimVector> {
        let mut out = Vec::with_capacity(self.0.len());
        for &c in &self.0 {
            if c % k != 0 {
                return None;
            }
            out.push(c / k);
        }
        Some(DimVector(out))
    }

    pub fn to_rat(&self) -> Vec<Rat> {
        self.0
            .iter()
            .map(|&c| Rat::from_integer(Int::from(c)))
            .collect()
    }
}

impl std::ops::Index<usize> for DimVector {
    type Output = i64;
    fn index(&self, i: usize) -> &i64 {
        &self.0[i]
    }
}

impl fmt::Display for DimVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, c) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// The divisibility `|g|` of a nonzero lattice vector: the gcd of its
/// coordinates. `g / |g|` is primitive.
pub fn divisibility(g: &DimVector) -> Result<i64, QuiverError> {
    if g.is_zero() {
        return Err(QuiverError::ZeroVector);
    }
    Ok(g.0.iter().fold(0i64, |acc, &c| acc.gcd(&c.abs())))
}

/// Divide out the gcd; sign convention: first nonzero coordinate positive.
fn primitive_normalized(v: &[i64]) -> Vec<i64> {
    let g = v.iter().fold(0i64, |acc, &c| acc.gcd(&c.abs()));
    debug_assert!(g > 0);
    let mut out: Vec<i64> = v.iter().map(|c| c / g).collect();
    if let Some(first) = out.iter().find(|&&c| c != 0) {
        if *first < 0 {
            for c in &mut out {
                *c = -*c;
            }
        }
    }
    out
}

/// A stability covector `theta` in `M_Q = Hom(N, Q)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct StabilityPoint(pub Vec<Rat>);

impl StabilityPoint {
    pub fn from_integers(v: &[i64]) -> Self {
        StabilityPoint(v.iter().map(|&c| Rat::from_integer(Int::from(c))).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `theta(g) = sum_i theta_i g_i`.
    pub fn eval(&self, g: &DimVector) -> Rat {
        self.0
            .iter()
            .zip(&g.0)
            .map(|(t, &c)| t * Rat::from_integer(Int::from(c)))
            .sum()
    }

    /// Evaluation on a rational vector.
    pub fn eval_rat(&self, g: &[Rat]) -> Rat {
        self.0.iter().zip(g).map(|(t, c)| t * c).sum()
    }
}

/// A wall locus `gamma'^perp  cap  gamma^perp` inside `gamma^perp`.
///
/// `normals` lists all primitive sub-dimension vectors cutting out this
/// locus; `key` is the canonical reduction of the normals modulo `gamma`
/// (primitive, first nonzero coordinate positive), which identifies the
/// locus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Wall {
    pub key: Vec<i64>,
    pub normals: Vec<DimVector>,
}

/// Wall list and genericity verdict for `theta` relative to `gamma`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChamberReport {
    pub walls: Vec<Wall>,
    pub generic: bool,
    /// For a generic `theta`: the sign of `theta` on each wall's canonical
    /// key covector, identifying the chamber. Zero entries mark the walls
    /// `theta` lies on.
    pub signs: Vec<i32>,
}

impl ChamberReport {
    /// First wall normal on which `theta` vanishes, if any.
    pub fn violated_normal(&self, theta: &StabilityPoint) -> Option<&DimVector> {
        self.walls
            .iter()
            .flat_map(|w| &w.normals)
            .find(|n| theta.eval(n).is_zero())
    }
}

/// Enumerate all nonzero `g'` with `0 <= g' <= g` coordinatewise,
/// excluding `g` itself.
fn proper_subvectors(g: &DimVector) -> Vec<DimVector> {
    let mut out = Vec::new();
    let mut cur = vec![0i64; g.len()];
    loop {
        // advance mixed-radix counter
        let mut i = 0;
        loop {
            if i == g.len() {
                return out;
            }
            if cur[i] < g[i] {
                cur[i] += 1;
                for c in cur.iter_mut().take(i) {
                    *c = 0;
                }
                break;
            }
            i += 1;
        }
        let v = DimVector(cur.clone());
        if v != *g {
            out.push(v);
        }
    }
}

/// Wall and chamber analysis on `gamma^perp`.
///
/// Walls are indexed by the sub-dimension vectors `0 < gamma' < gamma`,
/// reduced to primitive normals and deduplicated by their locus within
/// `gamma^perp`: two normals are identified when they agree modulo
/// `Q gamma` up to a nonzero rational factor. Normals proportional to
/// `gamma` restrict to the zero functional on `gamma^perp`, cut out no
/// wall, and are omitted.
///
/// The verdict is generic iff `theta` is nonzero on every listed normal.
pub fn walls_and_chamber(
    q: &Quiver,
    g: &DimVector,
    theta: &StabilityPoint,
) -> Result<ChamberReport, QuiverError> {
    if g.len() != q.vertex_count() || theta.len() != q.vertex_count() {
        return Err(QuiverError::DimensionMismatch {
            expected: q.vertex_count(),
            got: g.len().max(theta.len()),
        });
    }
    if g.is_zero() {
        return Err(QuiverError::ZeroVector);
    }
    if !g.is_nonnegative() {
        return Err(QuiverError::NegativeCoordinate);
    }
    let tg = theta.eval(g);
    if !tg.is_zero() {
        return Err(QuiverError::NotAStabilityParameter {
            value: crate::rational::fmt_rat(&tg),
        });
    }

    let pivot = (0..g.len()).find(|&i| g[i] != 0).expect("g nonzero");
    let mut by_key: std::collections::BTreeMap<Vec<i64>, std::collections::BTreeSet<DimVector>> =
        Default::default();
    for sub in proper_subvectors(g) {
        let prim = DimVector(primitive_normalized(&sub.0));
        // Reduce modulo gamma: the class of `prim` in N_Q / Q*gamma, as a
        // primitive integer vector with fixed sign. Zero means the normal
        // is proportional to gamma and restricts to 0 on gamma^perp.
        let rep: Vec<i64> = (0..g.len())
            .map(|i| g[pivot] * prim[i] - prim[pivot] * g[i])
            .collect();
        if rep.iter().all(|&c| c == 0) {
            continue;
        }
        by_key
            .entry(primitive_normalized(&rep))
            .or_default()
            .insert(prim);
    }

    let walls: Vec<Wall> = by_key
        .into_iter()
        .map(|(key, normals)| Wall {
            key,
            normals: normals.into_iter().collect(),
        })
        .collect();
    let generic = walls
        .iter()
        .flat_map(|w| &w.normals)
        .all(|n| !theta.eval(n).is_zero());
    let signs = walls
        .iter()
        .map(|w| {
            let key_vec = DimVector(w.key.clone());
            crate::rational::sign(&theta.eval(&key_vec))
        })
        .collect();
    Ok(ChamberReport {
        walls,
        generic,
        signs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    fn dv(v: &[i64]) -> DimVector {
        DimVector(v.to_vec())
    }

    fn sp(v: &[i64]) -> StabilityPoint {
        StabilityPoint::from_integers(v)
    }

    /// Acyclic triangle: single arrows 1->2, 1->3, 2->3.
    fn triangle() -> Quiver {
        Quiver::new(vec![vec![0, 1, 1], vec![0, 0, 1], vec![0, 0, 0]]).unwrap()
    }

    #[test]
    fn skew_form_examples() {
        let q = Quiver::kronecker(3);
        let e1 = DimVector::unit(2, 0);
        let e2 = DimVector::unit(2, 1);
        assert_eq!(q.skew_form(&e1, &e2).unwrap(), 3);
        let g = dv(&[2, 5]);
        assert_eq!(q.skew_form(&g, &g).unwrap(), 0);
        let t = triangle();
        assert_eq!(t.skew_form(&dv(&[1, 1, 0]), &dv(&[0, 0, 1])).unwrap(), 2);
    }

    #[test]
    fn skew_form_dimension_mismatch() {
        let q = Quiver::kronecker(2);
        assert!(matches!(
            q.skew_form(&dv(&[1, 1, 1]), &dv(&[1, 1])),
            Err(QuiverError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn euler_form_examples() {
        let q = Quiver::kronecker(3);
        assert_eq!(q.euler_form(&dv(&[1, 1]), &dv(&[1, 1])).unwrap(), -1);
        let none = Quiver::new(vec![vec![0, 0], vec![0, 0]]).unwrap();
        assert_eq!(none.euler_form(&dv(&[2, 3]), &dv(&[4, 5])).unwrap(), 23);
        let q2 = Quiver::kronecker(2);
        assert_eq!(q2.euler_form(&dv(&[1, 2]), &dv(&[1, 2])).unwrap(), 1);
    }

    #[test]
    fn attractor_point_examples() {
        let q = Quiver::kronecker(3);
        let ap = q.attractor_point(&dv(&[1, 1])).unwrap();
        assert_eq!(ap.0, vec![rat(-3), rat(3)]);
        assert!(ap.eval(&dv(&[1, 1])).is_zero());
        for n in 1..=5 {
            let qn = Quiver::kronecker(n);
            let ap = qn.attractor_point(&DimVector::unit(2, 0)).unwrap();
            assert_eq!(ap.0, vec![rat(0), rat(n)]);
        }
        let z = q.attractor_point(&dv(&[0, 0])).unwrap();
        assert_eq!(z.0, vec![rat(0), rat(0)]);
    }

    #[test]
    fn divisibility_examples() {
        assert_eq!(divisibility(&dv(&[2, 4])).unwrap(), 2);
        assert_eq!(divisibility(&dv(&[1, 1])).unwrap(), 1);
        assert_eq!(divisibility(&dv(&[0, 3])).unwrap(), 3);
        assert!(matches!(
            divisibility(&dv(&[0, 0])),
            Err(QuiverError::ZeroVector)
        ));
    }

    #[test]
    fn acyclicity() {
        assert!(Quiver::kronecker(3).is_acyclic());
        assert!(triangle().is_acyclic());
        let two_cycle = Quiver::new(vec![vec![0, 1], vec![1, 0]]).unwrap();
        assert!(!two_cycle.is_acyclic());
        let loop_q = Quiver::new(vec![vec![1]]).unwrap();
        assert!(!loop_q.is_acyclic());
    }

    #[test]
    fn walls_kronecker_1_1() {
        for n in 1..=4 {
            let q = Quiver::kronecker(n);
            let rep = walls_and_chamber(&q, &dv(&[1, 1]), &sp(&[1, -1])).unwrap();
            assert_eq!(rep.walls.len(), 1);
            assert!(rep.generic);
            assert_eq!(rep.signs.len(), 1);
        }
    }

    #[test]
    fn walls_unit_vector_trivial() {
        let q = Quiver::kronecker(3);
        let rep = walls_and_chamber(&q, &DimVector::unit(2, 0), &sp(&[0, 5])).unwrap();
        assert!(rep.walls.is_empty());
        assert!(rep.generic);
    }

    #[test]
    fn walls_kronecker_2_2_single_locus() {
        let q = Quiver::kronecker(3);
        let rep = walls_and_chamber(&q, &dv(&[2, 2]), &sp(&[1, -1])).unwrap();
        assert_eq!(rep.walls.len(), 1);
        assert!(rep.generic);
        // all listed normals are primitive and strictly between 0 and gamma
        for nrm in &rep.walls[0].normals {
            assert_eq!(divisibility(nrm).unwrap(), 1);
            assert!(nrm.strictly_between_zero_and(&dv(&[2, 2])));
        }
    }

    #[test]
    fn walls_reject_bad_theta() {
        let q = Quiver::kronecker(3);
        assert!(matches!(
            walls_and_chamber(&q, &dv(&[1, 1]), &sp(&[1, 0])),
            Err(QuiverError::NotAStabilityParameter { .. })
        ));
    }

    #[test]
    fn wall_on_locus_not_generic() {
        let q = Quiver::kronecker(3);
        let rep = walls_and_chamber(&q, &dv(&[1, 1]), &sp(&[0, 0])).unwrap();
        assert!(!rep.generic);
        assert!(rep.violated_normal(&sp(&[0, 0])).is_some());
    }
}
