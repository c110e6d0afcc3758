//! Tropical realization of attractor flow trees.
//!
//! An independent geometric path to the tree coefficients: instead of
//! running the flow recursion, each binary tree is realized as a tropical
//! curve by solving the linear system "root leg through theta_hat, edge
//! directions `<gamma_hat_v, ->`, leaf i constrained to `gamma_hat_i`-perp"
//! with exact Gaussian elimination. The perturbed system lives in the same
//! leaf coordinates as the flow (see `trees::perturb`); the unperturbed
//! limit system, used for grouping and figures, lives in `Q^d`. A tree
//! contributes iff the system has a unique solution with all edge lengths
//! positive, and the realized vertex positions must coincide with the flow
//! points.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::quiver::{DimVector, Quiver, QuiverError, StabilityPoint};
use crate::rational::fmt_rat;
use crate::trees::{
    contract_to_limit, enumerate_trees, perturb, validate_parts, BinaryTree, LimitNode,
    PerturbationData, TreeError, TreeNode,
};
use crate::{Int, Rat, RunConfig};

#[derive(Debug, Error)]
pub enum TropicalError {
    #[error(transparent)]
    Quiver(#[from] QuiverError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("part count mismatch: tree has {tree} leaves, {parts} parts given")]
    PartCountMismatch { tree: usize, parts: usize },
    #[error("degenerate linear system for tree {tree}: {reason}")]
    DegenerateSystem { tree: String, reason: String },
    #[error("type is not balanced at vertex {vertex}")]
    Unbalanced { vertex: usize },
    #[error("persistent degeneracy: no generic perturbation found after {attempts} attempts")]
    PersistentDegeneracy { attempts: u32 },
    #[error("seed disagreement: N = {first} (seed {first_seed}) vs {second} (seed {second_seed})")]
    SeedDisagreement {
        first: Int,
        first_seed: u64,
        second: Int,
        second_seed: u64,
    },
}

// ---------------------------------------------------------------------------
// Exact linear algebra
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LinSolve {
    Unique(Vec<Rat>),
    /// Consistent but with free parameters; rank of the coefficient matrix.
    Underdetermined { rank: usize },
    Inconsistent,
}

/// Gaussian elimination over `Q` on `a x = b`; `a` is `rows x cols`.
pub fn solve_linear(mut a: Vec<Vec<Rat>>, mut b: Vec<Rat>, cols: usize) -> LinSolve {
    let rows = a.len();
    assert_eq!(b.len(), rows);
    let mut pivot_of_col: Vec<Option<usize>> = vec![None; cols];
    let mut row = 0;
    for col in 0..cols {
        let Some(p) = (row..rows).find(|&r| !a[r][col].is_zero()) else {
            continue;
        };
        a.swap(row, p);
        b.swap(row, p);
        let inv = Rat::one() / &a[row][col];
        for c in col..cols {
            a[row][c] = &a[row][c] * &inv;
        }
        b[row] = &b[row] * &inv;
        for r in 0..rows {
            if r == row || a[r][col].is_zero() {
                continue;
            }
            let f = a[r][col].clone();
            for c in col..cols {
                let t = &f * &a[row][c];
                a[r][c] -= t;
            }
            let t = &f * &b[row];
            b[r] -= t;
        }
        pivot_of_col[col] = Some(row);
        row += 1;
        if row == rows {
            break;
        }
    }
    let rank = row;
    for r in rank..rows {
        if !b[r].is_zero() {
            return LinSolve::Inconsistent;
        }
    }
    if rank < cols {
        return LinSolve::Underdetermined { rank };
    }
    let mut x = vec![Rat::zero(); cols];
    for (col, p) in pivot_of_col.iter().enumerate() {
        x[col] = b[p.expect("full column rank")].clone();
    }
    LinSolve::Unique(x)
}

/// Rank of a rational matrix (used by the family-dimension computation).
pub fn matrix_rank(a: Vec<Vec<Rat>>, cols: usize) -> usize {
    let rows = a.len();
    match solve_linear(a, vec![Rat::zero(); rows], cols) {
        LinSolve::Unique(_) => cols,
        LinSolve::Underdetermined { rank } => rank,
        LinSolve::Inconsistent => unreachable!("homogeneous system"),
    }
}

// ---------------------------------------------------------------------------
// Realization of a single binary tree
// ---------------------------------------------------------------------------

/// A realized tropical curve: exact vertex data for one contributing tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Realization {
    /// Edge lengths (flow times) per internal vertex, preorder.
    pub times: Vec<Rat>,
    /// Vertex positions in leaf coordinates, preorder.
    pub positions: Vec<Vec<Rat>>,
    /// Free parameters of the solution space (0 for a generic perturbation).
    pub free_parameters: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RealizeOutcome {
    Realized(Realization),
    /// No realization with positive edge lengths exists.
    Infeasible { reason: String },
}

/// Realize a binary tree on the given perturbed data by solving the leaf
/// constraint system in leaf coordinates. Unknowns are the edge times (one
/// per internal vertex, the root edge starting at `theta_hat`); each leaf
/// `i` imposes `pos_{parent(i)}(gamma_hat_i) = 0`, i.e. coordinate `i` of
/// its parent position vanishes. Degenerate systems (free parameters or a
/// zero edge length) are errors, mirroring flow degeneracy; a negative edge
/// length is an infeasibility.
pub fn realize_tree(tree: &BinaryTree, p: &PerturbationData) -> Result<RealizeOutcome, TropicalError> {
    realize_tree_scaled(tree, p, None)
}

/// `realize_tree` with optional positive scalings of the edge direction
/// data: direction `scale_v * <gamma_hat_v, ->` instead of
/// `<gamma_hat_v, ->`. Positions are invariant under such rescaling (edge
/// lengths absorb it); exposed for exactly that structural test.
pub fn realize_tree_scaled(
    tree: &BinaryTree,
    p: &PerturbationData,
    scales: Option<&[i64]>,
) -> Result<RealizeOutcome, TropicalError> {
    let r = tree.leaf_count();
    if r != p.parts.len() {
        return Err(TropicalError::PartCountMismatch {
            tree: r,
            parts: p.parts.len(),
        });
    }
    if r == 1 {
        // single leg through theta_hat; theta_hat(gamma_hat) = 0 is
        // theta(gamma) = 0, checked by part validation
        return Ok(RealizeOutcome::Realized(Realization {
            times: vec![],
            positions: vec![],
            free_parameters: 0,
        }));
    }
    let m = r - 1; // internal vertices = unknown edge times
    if let Some(s) = scales {
        assert_eq!(s.len(), m, "one scale per internal vertex");
        assert!(s.iter().all(|&x| x > 0), "scales must be positive");
    }

    // Preorder walk collecting, per internal vertex: its subtree direction
    // and, per leaf, the set of internal vertices on its root path.
    let mut edge_cov: Vec<Vec<Rat>> = Vec::with_capacity(m);
    let mut parent_of: Vec<Option<usize>> = Vec::with_capacity(m);
    let mut leaf_paths: Vec<(usize, Vec<usize>)> = Vec::with_capacity(r);
    collect(
        &tree.root,
        None,
        &mut Vec::new(),
        &mut edge_cov,
        &mut parent_of,
        &mut leaf_paths,
        p,
        scales,
    );
    debug_assert_eq!(edge_cov.len(), m);

    // leaf constraints: theta_hat(g_i) + sum_{v on path} t_v cov_v(g_i) = 0
    let mut a = Vec::with_capacity(r);
    let mut b = Vec::with_capacity(r);
    for (leaf, path) in &leaf_paths {
        let mut row = vec![Rat::zero(); m];
        for &v in path {
            row[v] = edge_cov[v][*leaf - 1].clone();
        }
        a.push(row);
        b.push(-&p.theta[*leaf - 1]);
    }

    let times = match solve_linear(a, b, m) {
        LinSolve::Unique(t) => t,
        LinSolve::Underdetermined { rank } => {
            return Err(TropicalError::DegenerateSystem {
                tree: tree.encode(),
                reason: format!("underdetermined (rank {rank} of {m})"),
            })
        }
        LinSolve::Inconsistent => {
            return Ok(RealizeOutcome::Infeasible {
                reason: "inconsistent leaf constraints".to_string(),
            })
        }
    };
    if let Some(v) = times.iter().position(|t| t.is_zero()) {
        return Err(TropicalError::DegenerateSystem {
            tree: tree.encode(),
            reason: format!("zero edge length at vertex {v}"),
        });
    }
    if let Some(v) = times.iter().position(|t| t.is_negative()) {
        return Ok(RealizeOutcome::Infeasible {
            reason: format!("negative edge length at vertex {v}"),
        });
    }
    let positions = positions_from_times(&p.theta, &edge_cov, &parent_of, &times, r);
    return Ok(RealizeOutcome::Realized(Realization {
        times,
        positions,
        free_parameters: 0,
    }));

    #[allow(clippy::too_many_arguments)]
    fn collect(
        node: &TreeNode,
        parent: Option<usize>,
        path: &mut Vec<usize>,
        edge_cov: &mut Vec<Vec<Rat>>,
        parent_of: &mut Vec<Option<usize>>,
        leaf_paths: &mut Vec<(usize, Vec<usize>)>,
        p: &PerturbationData,
        scales: Option<&[i64]>,
    ) {
        match node {
            TreeNode::Leaf(l) => leaf_paths.push((*l, path.clone())),
            TreeNode::Node(x, y) => {
                let v = edge_cov.len();
                let mut cov = p.direction(&node.leaf_labels());
                if let Some(s) = scales {
                    let f = Rat::from_integer(Int::from(s[v]));
                    for c in &mut cov {
                        *c *= &f;
                    }
                }
                edge_cov.push(cov);
                parent_of.push(parent);
                path.push(v);
                collect(x, Some(v), path, edge_cov, parent_of, leaf_paths, p, scales);
                collect(y, Some(v), path, edge_cov, parent_of, leaf_paths, p, scales);
                path.pop();
            }
        }
    }
}

fn positions_from_times(
    theta: &[Rat],
    edge_cov: &[Vec<Rat>],
    parent_of: &[Option<usize>],
    times: &[Rat],
    d: usize,
) -> Vec<Vec<Rat>> {
    let mut positions: Vec<Vec<Rat>> = Vec::with_capacity(times.len());
    for v in 0..times.len() {
        let base: Vec<Rat> = match parent_of[v] {
            None => theta.to_vec(),
            Some(u) => positions[u].clone(),
        };
        let pos: Vec<Rat> = (0..d)
            .map(|i| &base[i] + &times[v] * &edge_cov[v][i])
            .collect();
        positions.push(pos);
    }
    positions
}

// ---------------------------------------------------------------------------
// Tropical types and balancing
// ---------------------------------------------------------------------------

/// One vertex of a tropical type with its explicit outgoing weighted
/// directions (parent edge, child edges, leaf legs; the root also carries
/// the root leg `-<gamma,->`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeVertex {
    pub parent: Option<usize>,
    /// Total charge hanging below this vertex.
    pub charge: DimVector,
    /// Labeled outgoing weighted directions; their sum must vanish.
    pub outgoing: Vec<(String, Vec<i64>)>,
    /// Leaf labels attached directly to this vertex.
    pub leaves: Vec<usize>,
}

/// Combinatorial type of a tropical curve from an attractor tree: the tree
/// shape with explicit weighted direction data. Directions are stored, not
/// recomputed, so corruption is observable by `balancing_check`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TropicalType {
    pub gamma: DimVector,
    pub parts: Vec<DimVector>,
    /// Internal vertices, root first, children after parents.
    pub vertices: Vec<TypeVertex>,
    /// Contact order of each leaf leg: divisibility of `<gamma_i,->`.
    pub contact_orders: Vec<i64>,
}

impl TropicalType {
    /// Build the type of a (possibly contracted, higher-valent) limit tree.
    pub fn from_limit_tree(
        q: &Quiver,
        tree: &LimitNode,
        parts: &[DimVector],
    ) -> Result<Self, TropicalError> {
        let gamma = total_charge(parts)?;
        let mut vertices = Vec::new();
        build(q, tree, None, parts, &gamma, &mut vertices)?;
        let contact_orders = leg_contact_orders(q, parts)?;
        return Ok(TropicalType {
            gamma,
            parts: parts.to_vec(),
            vertices,
            contact_orders,
        });

        fn build(
            q: &Quiver,
            node: &LimitNode,
            parent: Option<usize>,
            parts: &[DimVector],
            gamma: &DimVector,
            vertices: &mut Vec<TypeVertex>,
        ) -> Result<DimVector, TropicalError> {
            match node {
                LimitNode::Leaf(l) => Ok(parts[*l - 1].clone()),
                LimitNode::Vertex { children, .. } => {
                    let v = vertices.len();
                    vertices.push(TypeVertex {
                        parent,
                        charge: DimVector::zero(gamma.len()),
                        outgoing: Vec::new(),
                        leaves: Vec::new(),
                    });
                    let mut charge = DimVector::zero(gamma.len());
                    let mut outgoing = Vec::new();
                    let mut leaves = Vec::new();
                    for child in children {
                        let c = build(q, child, Some(v), parts, gamma, vertices)?;
                        let label = match child {
                            LimitNode::Leaf(l) => {
                                leaves.push(*l);
                                format!("leg {l}")
                            }
                            LimitNode::Vertex { .. } => "edge".to_string(),
                        };
                        outgoing.push((label, q.skew_covector(&c)?));
                        charge = charge.add(&c);
                    }
                    let up_label = if parent.is_none() { "root leg" } else { "parent edge" };
                    let up: Vec<i64> = q
                        .skew_covector(&charge)?
                        .iter()
                        .map(|c| -c)
                        .collect();
                    outgoing.push((up_label.to_string(), up));
                    vertices[v].charge = charge.clone();
                    vertices[v].outgoing = outgoing;
                    vertices[v].leaves = leaves;
                    Ok(charge)
                }
            }
        }
    }

    /// Build the type of an uncontracted binary tree.
    pub fn from_binary_tree(
        q: &Quiver,
        tree: &BinaryTree,
        parts: &[DimVector],
    ) -> Result<Self, TropicalError> {
        let limit = binary_as_limit(&tree.root);
        TropicalType::from_limit_tree(q, &limit, parts)
    }
}

/// View a binary tree as a limit tree with no contracted edges.
fn binary_as_limit(node: &TreeNode) -> LimitNode {
    match node {
        TreeNode::Leaf(l) => LimitNode::Leaf(*l),
        TreeNode::Node(a, b) => LimitNode::Vertex {
            point: vec![],
            children: vec![binary_as_limit(a), binary_as_limit(b)],
        },
    }
}

fn total_charge(parts: &[DimVector]) -> Result<DimVector, TropicalError> {
    parts
        .iter()
        .cloned()
        .reduce(|a, b| a.add(&b))
        .ok_or_else(|| TropicalError::Quiver(QuiverError::ZeroVector))
}

/// Contact orders: divisibility of `<gamma_i,->` as a lattice covector
/// (0 when the covector vanishes).
fn leg_contact_orders(q: &Quiver, parts: &[DimVector]) -> Result<Vec<i64>, TropicalError> {
    parts
        .iter()
        .map(|g| {
            let cov = q.skew_covector(g)?;
            let mut gcd: i64 = 0;
            for c in cov {
                gcd = num_integer::gcd(gcd, c.abs());
            }
            Ok(gcd)
        })
        .collect()
}

/// Per-vertex balancing report.
#[derive(Debug, Clone)]
pub struct BalancingReport {
    pub balanced: bool,
    /// Residual covector per vertex (all zero iff balanced).
    pub residuals: Vec<Vec<i64>>,
}

/// Check that the stored weighted directions sum to zero at every vertex.
pub fn balancing_check(t: &TropicalType) -> BalancingReport {
    let d = t.gamma.len();
    let mut residuals = Vec::with_capacity(t.vertices.len());
    let mut balanced = true;
    for v in &t.vertices {
        let mut sum = vec![0i64; d];
        for (_, dir) in &v.outgoing {
            for (s, x) in sum.iter_mut().zip(dir) {
                *s += x;
            }
        }
        if sum.iter().any(|&x| x != 0) {
            balanced = false;
        }
        residuals.push(sum);
    }
    BalancingReport {
        balanced,
        residuals,
    }
}

// ---------------------------------------------------------------------------
// Family dimension
// ---------------------------------------------------------------------------

/// How the root of the family is constrained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootMode {
    /// Root vertex position free in `gamma`-perp (the moduli statement);
    /// expected dimension `d - 2` for generic attractor-tree types.
    FreeInPerp,
    /// Root leg pinned through a fixed stability point; expected dimension
    /// 0 after perturbation.
    Pinned,
}

/// Dimension of the family of tropical curves of the given type: solution
/// space of the unperturbed (through-the-origin) leaf constraints with the
/// root moving per `mode`. Unbalanced types are rejected.
pub fn family_dimension(
    q: &Quiver,
    t: &TropicalType,
    mode: RootMode,
) -> Result<usize, TropicalError> {
    let rep = balancing_check(t);
    if !rep.balanced {
        let vertex = rep
            .residuals
            .iter()
            .position(|r| r.iter().any(|&x| x != 0))
            .unwrap();
        return Err(TropicalError::Unbalanced { vertex });
    }
    let d = t.gamma.len();
    let m = t.vertices.len();
    // unknowns: root position (d coords) + one edge time per non-root
    // vertex; in pinned mode the root position is theta + t_0 <gamma,->,
    // i.e. one unknown time for every vertex including the root.
    let (pos_unknowns, time_unknowns): (usize, Vec<usize>) = match mode {
        RootMode::FreeInPerp => (d, (1..m).collect()),
        RootMode::Pinned => (0, (0..m).collect()),
    };
    let cols = pos_unknowns + time_unknowns.len();
    let time_col: BTreeMap<usize, usize> = time_unknowns
        .iter()
        .enumerate()
        .map(|(i, &v)| (v, pos_unknowns + i))
        .collect();

    let mut rows: Vec<Vec<Rat>> = Vec::new();
    if mode == RootMode::FreeInPerp {
        // root constraint: pos_0(gamma) = 0
        let mut row = vec![Rat::zero(); cols];
        for i in 0..d {
            row[i] = Rat::from_integer(Int::from(t.gamma[i]));
        }
        rows.push(row);
    }
    // leaf constraints: pos_{v}(gamma_i) = 0 with pos_v expanded along the
    // root path
    for (v_idx, v) in t.vertices.iter().enumerate() {
        for &leaf in &v.leaves {
            let gi = &t.parts[leaf - 1];
            let mut row = vec![Rat::zero(); cols];
            if mode == RootMode::FreeInPerp {
                for i in 0..d {
                    row[i] = Rat::from_integer(Int::from(gi[i]));
                }
            }
            // walk up from v to the root accumulating edge coefficients
            let mut u = Some(v_idx);
            while let Some(w) = u {
                if let Some(&col) = time_col.get(&w) {
                    let charge = if t.vertices[w].parent.is_none() {
                        &t.gamma
                    } else {
                        &t.vertices[w].charge
                    };
                    row[col] = Rat::from_integer(Int::from(q.skew_form(charge, gi)?));
                }
                u = t.vertices[w].parent;
            }
            rows.push(row);
        }
    }
    let rank = matrix_rank(rows, cols);
    Ok(cols - rank)
}

// ---------------------------------------------------------------------------
// Tropical counting
// ---------------------------------------------------------------------------

/// Multiplicity of a binary tree: product of `|<gamma_{v'},gamma_{v''}>|`
/// over internal vertices, unperturbed integer charges.
pub fn tree_multiplicity(
    q: &Quiver,
    tree: &BinaryTree,
    parts: &[DimVector],
) -> Result<Int, TropicalError> {
    fn walk(q: &Quiver, node: &TreeNode, parts: &[DimVector]) -> Result<Int, TropicalError> {
        match node {
            TreeNode::Leaf(_) => Ok(Int::one()),
            TreeNode::Node(a, b) => {
                let ga = a.charge(parts);
                let gb = b.charge(parts);
                let here = Int::from(q.skew_form(&ga, &gb)?.abs());
                Ok(here * walk(q, a, parts)? * walk(q, b, parts)?)
            }
        }
    }
    walk(q, &tree.root, parts)
}

/// One realized contributing tree.
#[derive(Debug, Clone)]
pub struct RealizedTree {
    pub tree: BinaryTree,
    pub multiplicity: Int,
    pub realization: Realization,
}

/// Result of the geometric count.
#[derive(Debug, Clone)]
pub struct TropicalCount {
    pub perturbation: PerturbationData,
    pub realized: Vec<RealizedTree>,
    /// `sum_T N_{rho_T}` grouped by limit tree.
    pub by_limit_tree: Vec<(LimitNode, Int)>,
    /// Multiplicity that could not be assigned a limit tree.
    pub unresolved: Int,
    /// `N = sum of multiplicities` over realized trees (= `F_r^theta`).
    pub total: Int,
}

/// Count realizable trees geometrically: enumerate all binary trees on the
/// parts, realize each by the linear solve, and sum multiplicities, grouped
/// by limit tree (limit positions from the linear solve at zero
/// perturbation). Retry ladder and triple-seed verification mirror the flow
/// engine but share none of its recursion.
pub fn tropical_count(
    q: &Quiver,
    parts: &[DimVector],
    theta: &StabilityPoint,
    cfg: &RunConfig,
) -> Result<TropicalCount, TropicalError> {
    validate_parts(q, parts, theta)?;
    let r = parts.len();
    if r == 1 {
        let p = perturb(q, parts, theta, cfg.seed, cfg.bound);
        return Ok(TropicalCount {
            perturbation: p,
            realized: vec![RealizedTree {
                tree: BinaryTree {
                    root: TreeNode::Leaf(1),
                },
                multiplicity: Int::one(),
                realization: Realization {
                    times: vec![],
                    positions: vec![],
                    free_parameters: 0,
                },
            }],
            by_limit_tree: vec![(LimitNode::Leaf(1), Int::one())],
            unresolved: Int::zero(),
            total: Int::one(),
        });
    }

    // trees with zero multiplicity contribute nothing and are skipped
    let candidates: Vec<(BinaryTree, Int)> = enumerate_trees(r)
        .into_iter()
        .map(|t| {
            let m = tree_multiplicity(q, &t, parts)?;
            Ok((t, m))
        })
        .collect::<Result<Vec<_>, TropicalError>>()?
        .into_iter()
        .filter(|(_, m)| !m.is_zero())
        .collect();

    let needed = if cfg.verify { 3 } else { 1 };
    let mut successes: Vec<(u64, PerturbationData, Vec<RealizedTree>)> = Vec::new();
    let mut seed = cfg.seed;
    let mut bound = cfg.bound.max(1);
    let mut total_attempts = 0u32;
    for _escalation in 0..cfg.escalations.max(1) {
        let mut failures = 0u32;
        while failures < cfg.seed_retries.max(1) && successes.len() < needed {
            let p = perturb(q, parts, theta, seed, bound);
            total_attempts += 1;
            match realize_all(&candidates, &p) {
                Ok(realized) => successes.push((seed, p, realized)),
                Err(TropicalError::DegenerateSystem { .. }) => failures += 1,
                Err(e) => return Err(e),
            }
            seed += 1;
        }
        if successes.len() >= needed {
            break;
        }
        bound = bound.saturating_mul(100);
    }
    if successes.len() < needed {
        return Err(TropicalError::PersistentDegeneracy {
            attempts: total_attempts,
        });
    }
    let total: Int = successes[0]
        .2
        .iter()
        .map(|t| t.multiplicity.clone())
        .sum();
    for (s, _, realized) in &successes[1..] {
        let t: Int = realized.iter().map(|t| t.multiplicity.clone()).sum();
        if t != total {
            return Err(TropicalError::SeedDisagreement {
                first: total,
                first_seed: successes[0].0,
                second: t,
                second_seed: *s,
            });
        }
    }
    let (_, perturbation, realized) = successes.into_iter().next().unwrap();

    // group by limit tree, limit positions from the unperturbed Q^d solve
    let mut groups: BTreeMap<LimitNode, Int> = BTreeMap::new();
    let mut unresolved = Int::zero();
    for rt in &realized {
        match limit_positions(q, &rt.tree, parts, theta) {
            Some(points) => {
                let key = contract_to_limit(&rt.tree, &points);
                *groups.entry(key).or_insert_with(Int::zero) += &rt.multiplicity;
            }
            None => unresolved += &rt.multiplicity,
        }
    }
    Ok(TropicalCount {
        perturbation,
        realized,
        by_limit_tree: groups.into_iter().collect(),
        unresolved,
        total,
    })
}

fn realize_all(
    candidates: &[(BinaryTree, Int)],
    p: &PerturbationData,
) -> Result<Vec<RealizedTree>, TropicalError> {
    let mut out = Vec::new();
    for (tree, mult) in candidates {
        match realize_tree(tree, p)? {
            RealizeOutcome::Realized(realization) => out.push(RealizedTree {
                tree: tree.clone(),
                multiplicity: mult.clone(),
                realization,
            }),
            RealizeOutcome::Infeasible { .. } => {}
        }
    }
    Ok(out)
}

/// Limit vertex positions via the unperturbed linear solve; `None` when the
/// limit system is not uniquely solvable or has a negative time (the limit
/// then carries no usable position data).
fn limit_positions(
    q: &Quiver,
    tree: &BinaryTree,
    parts: &[DimVector],
    theta: &StabilityPoint,
) -> Option<Vec<Vec<Rat>>> {
    match limit_realization(q, tree, parts, theta) {
        Some((times, positions)) if !times.iter().any(|t| t.is_negative()) => Some(positions),
        _ => None,
    }
}

/// Solve the unperturbed leaf system in `Q^d`, allowing zero edge lengths
/// (contracted edges in the limit). Returns `(times, positions)` in
/// preorder, or `None` when the system is not uniquely solvable.
pub fn limit_realization(
    q: &Quiver,
    tree: &BinaryTree,
    parts: &[DimVector],
    theta: &StabilityPoint,
) -> Option<(Vec<Rat>, Vec<Vec<Rat>>)> {
    let r = tree.leaf_count();
    if r != parts.len() {
        return None;
    }
    let m = r - 1;
    let d = theta.len();
    if m == 0 {
        return Some((vec![], vec![]));
    }
    let mut edge_cov: Vec<Vec<Rat>> = Vec::new();
    let mut parent_of: Vec<Option<usize>> = Vec::new();
    let mut leaf_paths: Vec<(usize, Vec<usize>)> = Vec::new();
    collect0(q, &tree.root, None, &mut Vec::new(), &mut edge_cov, &mut parent_of, &mut leaf_paths, parts)?;
    let mut a = Vec::with_capacity(r);
    let mut b = Vec::with_capacity(r);
    for (leaf, path) in &leaf_paths {
        let gi = &parts[*leaf - 1];
        let mut row = vec![Rat::zero(); m];
        for &v in path {
            row[v] = edge_cov[v]
                .iter()
                .zip(&gi.0)
                .map(|(c, &g)| c * Rat::from_integer(Int::from(g)))
                .sum();
        }
        a.push(row);
        b.push(-theta.eval(gi));
    }
    let times = match solve_linear(a, b, m) {
        LinSolve::Unique(t) => t,
        _ => return None,
    };
    let positions = positions_from_times(&theta.0, &edge_cov, &parent_of, &times, d);
    return Some((times, positions));

    #[allow(clippy::too_many_arguments)]
    fn collect0(
        q: &Quiver,
        node: &TreeNode,
        parent: Option<usize>,
        path: &mut Vec<usize>,
        edge_cov: &mut Vec<Vec<Rat>>,
        parent_of: &mut Vec<Option<usize>>,
        leaf_paths: &mut Vec<(usize, Vec<usize>)>,
        parts: &[DimVector],
    ) -> Option<()> {
        match node {
            TreeNode::Leaf(l) => {
                leaf_paths.push((*l, path.clone()));
                Some(())
            }
            TreeNode::Node(x, y) => {
                let v = edge_cov.len();
                let charge = node.charge(parts);
                let cov: Vec<Rat> = q
                    .skew_covector(&charge)
                    .ok()?
                    .into_iter()
                    .map(|c| Rat::from_integer(Int::from(c)))
                    .collect();
                edge_cov.push(cov);
                parent_of.push(parent);
                path.push(v);
                collect0(q, x, Some(v), path, edge_cov, parent_of, leaf_paths, parts)?;
                collect0(q, y, Some(v), path, edge_cov, parent_of, leaf_paths, parts)?;
                path.pop();
                Some(())
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Figure data
// ---------------------------------------------------------------------------

/// One drawable piece of a realized tropical curve: a bounded segment
/// (`to` set) or an unbounded ray (`dir` set).
#[derive(Debug, Clone)]
pub struct Segment {
    pub from: Vec<Rat>,
    pub to: Option<Vec<Rat>>,
    pub dir: Option<Vec<Rat>>,
    pub label: String,
}

/// Plot data in `Q^d` for a tree with its unperturbed limit positions: the
/// root leg from `theta`, the internal edges, and the unbounded leaf legs.
pub fn plot_segments(
    q: &Quiver,
    tree: &BinaryTree,
    parts: &[DimVector],
    theta: &StabilityPoint,
    positions: &[Vec<Rat>],
) -> Result<Vec<Segment>, TropicalError> {
    let leg_dir = |l: usize| -> Result<Vec<Rat>, TropicalError> {
        Ok(q.skew_covector(&parts[l - 1])?
            .into_iter()
            .map(|c| Rat::from_integer(Int::from(c)))
            .collect())
    };
    let mut segs = Vec::new();
    if positions.is_empty() {
        // single leg through theta
        segs.push(Segment {
            from: theta.0.clone(),
            to: None,
            dir: Some(leg_dir(1)?),
            label: "leg 1".to_string(),
        });
        return Ok(segs);
    }
    segs.push(Segment {
        from: theta.0.clone(),
        to: Some(positions[0].clone()),
        label: "root leg".to_string(),
        dir: None,
    });
    return walk(&tree.root, 0, &mut 0, positions, &leg_dir, &mut segs).map(|()| segs);

    fn walk(
        node: &TreeNode,
        my_idx: usize,
        counter: &mut usize,
        positions: &[Vec<Rat>],
        leg_dir: &dyn Fn(usize) -> Result<Vec<Rat>, TropicalError>,
        segs: &mut Vec<Segment>,
    ) -> Result<(), TropicalError> {
        let (a, b) = match node {
            TreeNode::Leaf(_) => return Ok(()),
            TreeNode::Node(a, b) => (a, b),
        };
        *counter += 1;
        for child in [a, b] {
            match child.as_ref() {
                TreeNode::Leaf(l) => {
                    segs.push(Segment {
                        from: positions[my_idx].clone(),
                        to: None,
                        dir: Some(leg_dir(*l)?),
                        label: format!("leg {l}"),
                    });
                }
                TreeNode::Node(..) => {
                    let child_idx = *counter;
                    segs.push(Segment {
                        from: positions[my_idx].clone(),
                        to: Some(positions[child_idx].clone()),
                        dir: None,
                        label: "edge".to_string(),
                    });
                    walk(child, child_idx, counter, positions, leg_dir, segs)?;
                }
            }
        }
        Ok(())
    }
}

/// Rendered DOT with positions attached to vertex labels.
pub fn realization_dot(tree: &BinaryTree, positions: &[Vec<Rat>]) -> String {
    let mut out = String::from("graph tropical {\n");
    let mut counter = 0usize;
    emit(&tree.root, None, &mut counter, positions, &mut out);
    out.push_str("}\n");
    return out;

    fn emit(
        node: &TreeNode,
        parent: Option<usize>,
        counter: &mut usize,
        positions: &[Vec<Rat>],
        out: &mut String,
    ) {
        match node {
            TreeNode::Leaf(l) => {
                let id = format!("leaf{l}");
                out.push_str(&format!("  {id} [label=\"{l}\"];\n"));
                if let Some(p) = parent {
                    out.push_str(&format!("  v{p} -- {id};\n"));
                }
            }
            TreeNode::Node(a, b) => {
                let v = *counter;
                *counter += 1;
                let pos: Vec<String> = positions[v].iter().map(fmt_rat).collect();
                out.push_str(&format!("  v{v} [label=\"({})\"];\n", pos.join(",")));
                if let Some(p) = parent {
                    out.push_str(&format!("  v{p} -- v{v};\n"));
                }
                emit(a, Some(v), counter, positions, out);
                emit(b, Some(v), counter, positions, out);
            }
        }
    }
}
