//! DT invariant tables, the integer/rational multicover repackaging, and the
//! assembly of `Omega_gamma^{+,theta}` from attractor data via the flow tree
//! expansion
//! `Obar_gamma^theta = sum_{gamma = gamma_1 + ... + gamma_r} (1/|Aut|) F_r^theta prod_i Obar*_{gamma_i}`.

use std::collections::{BTreeMap, HashMap};

use num_traits::{One, Zero};
use thiserror::Error;

use crate::quiver::{
    divisibility, walls_and_chamber, ChamberReport, DimVector, Quiver, QuiverError, StabilityPoint,
};
use crate::rational::{fmt_rat, to_int};
use crate::trees::{f_coefficient, TreeError};
use crate::{Int, Rat, RunConfig};

#[derive(Debug, Error)]
pub enum DtError {
    #[error(transparent)]
    Quiver(#[from] QuiverError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("table kind mismatch: expected {expected:?}, got {got:?}")]
    KindMismatch { expected: TableKind, got: TableKind },
    #[error("support vector must be nonzero with nonnegative coordinates: {0}")]
    BadSupportVector(DimVector),
    #[error("integer-kind table has non-integer value {value} at {at}")]
    NonIntegerEntry { at: DimVector, value: String },
    #[error("missing divisor entry at {0}")]
    MissingDivisorEntry(DimVector),
    #[error("quiver is not acyclic; supply an attractor table")]
    NotAcyclic,
    #[error("theta is not generic for gamma: theta vanishes on wall normal {0}")]
    NonGenericTheta(DimVector),
    #[error("non-integer DT invariant Omega = {value}: consistency failure")]
    IntegralityFailure { value: String },
}

/// What a finitely supported table holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableKind {
    /// Integer DT invariants `Omega`.
    IntegerOmega,
    /// Rational DT invariants `Obar`.
    RationalOmega,
    /// Attractor DT invariants `Omega*` (integer-valued).
    AttractorOmega,
    /// Rational attractor DT invariants `Obar*`.
    RationalAttractorOmega,
}

impl TableKind {
    fn integer_valued(self) -> bool {
        matches!(self, TableKind::IntegerOmega | TableKind::AttractorOmega)
    }
}

/// A finitely supported map `DimVector -> Q`; absent entries read as zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DTTable {
    kind: TableKind,
    entries: BTreeMap<DimVector, Rat>,
}

impl DTTable {
    pub fn new(kind: TableKind) -> Self {
        DTTable {
            kind,
            entries: BTreeMap::new(),
        }
    }

    pub fn from_entries(
        kind: TableKind,
        entries: impl IntoIterator<Item = (DimVector, Rat)>,
    ) -> Result<Self, DtError> {
        let mut t = DTTable::new(kind);
        for (g, v) in entries {
            t.insert(g, v)?;
        }
        Ok(t)
    }

    pub fn kind(&self) -> TableKind {
        self.kind
    }

    pub fn insert(&mut self, g: DimVector, v: Rat) -> Result<(), DtError> {
        if g.is_zero() || !g.is_nonnegative() {
            return Err(DtError::BadSupportVector(g));
        }
        if self.kind.integer_valued() && !v.denom().is_one() {
            return Err(DtError::NonIntegerEntry {
                at: g,
                value: fmt_rat(&v),
            });
        }
        // explicit zeros are kept: presence means "defined", which the
        // multicover inversion checks on every divisor
        self.entries.insert(g, v);
        Ok(())
    }

    /// Table value, zero when absent.
    pub fn get(&self, g: &DimVector) -> Rat {
        self.entries.get(g).cloned().unwrap_or_else(Rat::zero)
    }

    pub fn contains(&self, g: &DimVector) -> bool {
        self.entries.contains_key(g)
    }

    pub fn support(&self) -> impl Iterator<Item = &DimVector> {
        self.entries.keys()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// The default attractor table rule for acyclic quivers:
/// `Omega* = 1` at the unit vectors `e_i` and `0` elsewhere.
pub fn default_attractor_acyclic(q: &Quiver, g: &DimVector) -> Result<i64, DtError> {
    if !q.is_acyclic() {
        return Err(DtError::NotAcyclic);
    }
    let is_unit = g.len() == q.vertex_count()
        && g.coord_sum() == 1
        && g.is_nonnegative();
    Ok(if is_unit { 1 } else { 0 })
}

/// Materialize the acyclic default attractor table for a quiver.
pub fn acyclic_attractor_table(q: &Quiver) -> Result<DTTable, DtError> {
    if !q.is_acyclic() {
        return Err(DtError::NotAcyclic);
    }
    let d = q.vertex_count();
    DTTable::from_entries(
        TableKind::AttractorOmega,
        (0..d).map(|i| (DimVector::unit(d, i), Rat::one())),
    )
}

/// Multicover repackaging of an integer table into the rational invariant
/// on a single charge:
/// `Obar(g) = sum_{k >= 1, k | |g|} (-1)^{k-1} / k^2 * Omega(g/k)`.
pub fn rational_from_integer_dt(table: &DTTable, g: &DimVector) -> Result<Rat, DtError> {
    let div = divisibility(g)?;
    let mut sum = Rat::zero();
    for k in 1..=div {
        if div % k != 0 {
            continue;
        }
        let sub = g.div_exact(k).expect("k divides the divisibility");
        let v = table.get(&sub);
        if v.is_zero() {
            continue;
        }
        let sign = if k % 2 == 1 { 1 } else { -1 };
        sum += v * Rat::new(Int::from(sign), Int::from(k * k));
    }
    Ok(sum)
}

/// Invert the multicover repackaging along the ray `Q_{>0} g`: the unique
/// integer-kind value `Omega(g)` such that the forward sum reproduces the
/// rational table on every divisor. Returns the value and an integrality
/// flag. Requires the rational table to be defined on every divisor `g/k`.
pub fn integer_from_rational_dt(table: &DTTable, g: &DimVector) -> Result<(Rat, bool), DtError> {
    let div = divisibility(g)?;
    // solve bottom-up along the ray through g
    let prim = g.div_exact(div).expect("divisibility divides");
    let mut omega: HashMap<i64, Rat> = HashMap::new();
    let mut divisors: Vec<i64> = (1..=div).filter(|m| div % m == 0).collect();
    divisors.sort_unstable();
    for &m in &divisors {
        let gm = prim.scale(m);
        if !table.contains(&gm) {
            return Err(DtError::MissingDivisorEntry(gm));
        }
        let mut v = table.get(&gm);
        // subtract the k >= 2 multicover terms
        for k in 2..=m {
            if m % k != 0 {
                continue;
            }
            let sign = if k % 2 == 1 { 1 } else { -1 };
            let w = omega.get(&(m / k)).expect("computed in order");
            v -= w * Rat::new(Int::from(sign), Int::from(k * k));
        }
        omega.insert(m, v);
    }
    let value = omega.remove(&div).expect("top divisor computed");
    let integral = value.denom().is_one();
    Ok((value, integral))
}

/// An unordered decomposition `gamma = gamma_1 + ... + gamma_r` as a sorted
/// multiset of parts with multiplicities.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Decomposition {
    /// Distinct parts with multiplicities, in canonical order.
    pub parts: Vec<(DimVector, u32)>,
}

impl Decomposition {
    /// Number of parts counted with multiplicity.
    pub fn r(&self) -> usize {
        self.parts.iter().map(|(_, m)| *m as usize).sum()
    }

    /// `|Aut|`: product of factorials of the part multiplicities.
    pub fn aut_order(&self) -> Int {
        let mut a = Int::one();
        for (_, m) in &self.parts {
            for k in 2..=*m {
                a *= Int::from(k);
            }
        }
        a
    }

    /// Parts repeated with multiplicity, as a labeled tuple.
    pub fn labeled(&self) -> Vec<DimVector> {
        let mut out = Vec::new();
        for (g, m) in &self.parts {
            for _ in 0..*m {
                out.push(g.clone());
            }
        }
        out
    }

    pub fn total(&self) -> DimVector {
        self.labeled()
            .into_iter()
            .reduce(|a, b| a.add(&b))
            .expect("nonempty decomposition")
    }
}

/// All multisets of support elements summing to `g`, in canonical order.
/// Includes the trivial decomposition when `g` itself is in the support.
pub fn decompositions(g: &DimVector, support: &[DimVector]) -> Vec<Decomposition> {
    let mut sorted: Vec<DimVector> = support.to_vec();
    sorted.sort();
    sorted.dedup();
    sorted.retain(|s| !s.is_zero() && s.is_nonnegative() && s.leq(g));
    let mut out = Vec::new();
    let mut current: Vec<(DimVector, u32)> = Vec::new();
    search(g.clone(), &sorted, 0, &mut current, &mut out);
    out.sort();
    return out;

    fn search(
        remaining: DimVector,
        support: &[DimVector],
        idx: usize,
        current: &mut Vec<(DimVector, u32)>,
        out: &mut Vec<Decomposition>,
    ) {
        if remaining.is_zero() {
            if !current.is_empty() {
                out.push(Decomposition {
                    parts: current.clone(),
                });
            }
            return;
        }
        if idx == support.len() {
            return;
        }
        // skip this support element
        search(remaining.clone(), support, idx + 1, current, out);
        // or take it 1..max times
        let s = &support[idx];
        let mut left = remaining;
        let mut count = 0u32;
        while s.leq(&left) {
            left = left.sub(s);
            count += 1;
            current.push((s.clone(), count));
            search(left.clone(), support, idx + 1, current, out);
            current.pop();
        }
    }
}

/// One decomposition's contribution to the expansion.
#[derive(Debug, Clone)]
pub struct BreakdownEntry {
    pub decomposition: Decomposition,
    pub aut_order: Int,
    /// Flow tree coefficient `F_r^theta` for this parts tuple.
    pub f: Int,
    /// Product of rational attractor invariants over the parts.
    pub attractor_product: Rat,
    /// `(F / |Aut|) * attractor_product`.
    pub contribution: Rat,
}

/// Full result of the DT invariant assembly.
#[derive(Debug, Clone)]
pub struct OmegaReport {
    pub gamma: DimVector,
    pub theta: StabilityPoint,
    /// The integer DT invariant `Omega_gamma^{+,theta}`.
    pub omega: Int,
    /// The rational DT invariant `Obar_gamma^{+,theta}`.
    pub omega_bar: Rat,
    pub chamber: ChamberReport,
    /// Per-decomposition breakdown for `gamma` itself.
    pub breakdown: Vec<BreakdownEntry>,
    /// Rational invariants of the proper divisors `gamma/k`, `k >= 2`.
    pub divisor_omega_bar: Vec<(DimVector, Rat)>,
    /// Human-readable notes (pruned decompositions, flagged inputs).
    pub notes: Vec<String>,
}

/// Compute `Omega_gamma^{+,theta}` from an attractor table.
///
/// The rational invariant is assembled for every divisor `gamma/k` via the
/// decomposition expansion, then inverted to the integer invariant along the
/// ray. A non-integer final value is a hard consistency failure.
pub fn omega_theta(
    q: &Quiver,
    g: &DimVector,
    theta: &StabilityPoint,
    attractor: &DTTable,
    cfg: &RunConfig,
) -> Result<OmegaReport, DtError> {
    if attractor.kind() != TableKind::AttractorOmega {
        return Err(DtError::KindMismatch {
            expected: TableKind::AttractorOmega,
            got: attractor.kind(),
        });
    }
    let chamber = walls_and_chamber(q, g, theta)?;
    if !chamber.generic {
        let normal = chamber
            .violated_normal(theta)
            .expect("non-generic theta vanishes on some wall normal")
            .clone();
        return Err(DtError::NonGenericTheta(normal));
    }
    let mut notes = Vec::new();
    {
        let signs: Vec<i32> = attractor
            .support()
            .flat_map(|g| g.0.iter())
            .map(|&c| c.signum() as i32)
            .collect();
        if signs.contains(&1) && signs.contains(&-1) {
            notes.push("attractor table support has mixed coordinate signs".to_string());
        }
    }

    // Rational attractor invariants on the box 0 < g' <= g; decomposition
    // parts with Obar* = 0 contribute nothing and are pruned up front.
    let mut obar_star = DTTable::new(TableKind::RationalAttractorOmega);
    for sub in box_vectors(g) {
        let v = rational_from_integer_dt(attractor, &sub)?;
        if !v.is_zero() {
            obar_star.insert(sub, v)?;
        }
    }
    let support: Vec<DimVector> = obar_star.support().cloned().collect();

    let mut memo: HashMap<Vec<DimVector>, Int> = HashMap::new();
    let div = divisibility(g)?;
    let prim = g.div_exact(div).expect("divisibility divides");
    let mut ray = DTTable::new(TableKind::RationalOmega);
    let mut breakdown = Vec::new();
    let mut divisor_omega_bar = Vec::new();
    for m in 1..=div {
        if div % m != 0 {
            continue;
        }
        let target = prim.scale(m);
        let mut obar = Rat::zero();
        for dec in decompositions(&target, &support) {
            let r = dec.r();
            if r >= 2 {
                if let Some((p, _)) = dec
                    .parts
                    .iter()
                    .find(|(p, _)| q.skew_covector(p).map(|c| c.iter().all(|&x| x == 0)).unwrap_or(false))
                {
                    notes.push(format!(
                        "pruned decomposition {:?}: part {} has zero attractor covector",
                        dec.parts, p
                    ));
                    continue;
                }
            }
            let labeled = dec.labeled();
            let f = match memo.get(&labeled) {
                Some(f) => f.clone(),
                None => {
                    let f = if r == 1 {
                        Int::one()
                    } else {
                        f_coefficient(q, &labeled, theta, cfg)?
                    };
                    memo.insert(labeled.clone(), f.clone());
                    f
                }
            };
            let mut product = Rat::one();
            for (p, mult) in &dec.parts {
                for _ in 0..*mult {
                    product *= obar_star.get(p);
                }
            }
            let contribution =
                Rat::from_integer(f.clone()) / Rat::from_integer(dec.aut_order()) * &product;
            obar += &contribution;
            if target == *g {
                breakdown.push(BreakdownEntry {
                    aut_order: dec.aut_order(),
                    decomposition: dec,
                    f,
                    attractor_product: product,
                    contribution,
                });
            }
        }
        if target != *g {
            divisor_omega_bar.push((target.clone(), obar.clone()));
        }
        ray.insert(target, obar)?;
    }

    let omega_bar = ray.get(g);
    let (omega, integral) = integer_from_rational_dt(&ray, g)?;
    if !integral {
        return Err(DtError::IntegralityFailure {
            value: fmt_rat(&omega),
        });
    }
    Ok(OmegaReport {
        gamma: g.clone(),
        theta: theta.clone(),
        omega: to_int(&omega).expect("integrality checked"),
        omega_bar,
        chamber,
        breakdown,
        divisor_omega_bar,
        notes,
    })
}

/// Nonzero vectors `0 < v <= g` coordinatewise.
fn box_vectors(g: &DimVector) -> Vec<DimVector> {
    let mut out = Vec::new();
    let mut cur = vec![0i64; g.len()];
    'outer: loop {
        let mut i = 0;
        loop {
            if i == g.len() {
                break 'outer;
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
        out.push(DimVector(cur.clone()));
    }
    out
}
