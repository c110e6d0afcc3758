//! Rooted binary trees with labeled leaves, the perturbed discrete attractor
//! flow, and the coefficients `F_r^theta(gamma_1,...,gamma_r)` together with
//! their grouping by limit attractor tree.
//!
//! A tree with `r` leaves carries charges `gamma_v` (sums of leaf charges
//! below each vertex). The flow starts at the stability point and walks each
//! internal vertex `v` along the attractor direction `<gamma_v,->` of its
//! subtree charge until the splitting constraint `theta_v(gamma_{v'}) = 0`
//! is met; a tree contributes iff every splitting time is positive, with
//! multiplicity the product of `|<gamma_{v'},gamma_{v''}>|` over its
//! trivalent vertices (unperturbed charges).
//!
//! The perturbed flow runs in leaf coordinates: a point is recorded by its
//! values on the leaf charges, and genericity is achieved by perturbing the
//! skew pairing on the leaf lattice rather than the charges themselves (see
//! [`perturb`]). The unperturbed limit flow, used for grouping and figures,
//! runs in `Q^d` as written above.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::quiver::{DimVector, Quiver, QuiverError, StabilityPoint};
use crate::rational::fmt_rat;
use crate::{Int, Rat, RunConfig};

/// Fixed large prime entering perturbation denominators; keeps distinct
/// perturbation coordinates from colliding accidentally.
const PERTURBATION_PRIME: u64 = 2_147_483_647;

#[derive(Debug, Error)]
pub enum TreeError {
    #[error(transparent)]
    Quiver(#[from] QuiverError),
    #[error("part count mismatch: tree has {tree} leaves, {parts} parts given")]
    PartCountMismatch { tree: usize, parts: usize },
    #[error("theta does not annihilate the total charge: theta(gamma) = {0}")]
    ThetaNotOnPerp(String),
    #[error("a part has zero attractor covector <gamma_i,-> = 0: {0}")]
    ZeroSkewPart(DimVector),
    #[error("persistent degeneracy: no generic perturbation found after {attempts} attempts")]
    PersistentDegeneracy { attempts: u32 },
    #[error("seed disagreement: F = {first} (seed {first_seed}) vs {second} (seed {second_seed})")]
    SeedDisagreement {
        first: Int,
        first_seed: u64,
        second: Int,
        second_seed: u64,
    },
}

// ---------------------------------------------------------------------------
// Binary trees
// ---------------------------------------------------------------------------

/// Node of a rooted binary tree; children are unordered and kept in
/// canonical order (smaller minimal leaf label first).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TreeNode {
    Leaf(usize),
    Node(Box<TreeNode>, Box<TreeNode>),
}

impl TreeNode {
    pub fn min_leaf(&self) -> usize {
        match self {
            TreeNode::Leaf(l) => *l,
            TreeNode::Node(a, b) => a.min_leaf().min(b.min_leaf()),
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            TreeNode::Leaf(_) => 1,
            TreeNode::Node(a, b) => a.leaf_count() + b.leaf_count(),
        }
    }

    /// Canonical constructor for an internal node.
    pub fn join(a: TreeNode, b: TreeNode) -> TreeNode {
        if a.min_leaf() <= b.min_leaf() {
            TreeNode::Node(Box::new(a), Box::new(b))
        } else {
            TreeNode::Node(Box::new(b), Box::new(a))
        }
    }

    /// Subtree charge: sum of leaf charges below this node.
    pub fn charge(&self, parts: &[DimVector]) -> DimVector {
        match self {
            TreeNode::Leaf(l) => parts[*l - 1].clone(),
            TreeNode::Node(a, b) => a.charge(parts).add(&b.charge(parts)),
        }
    }

    /// Leaf labels below this node, in tree order.
    pub fn leaf_labels(&self) -> Vec<usize> {
        fn walk(n: &TreeNode, out: &mut Vec<usize>) {
            match n {
                TreeNode::Leaf(l) => out.push(*l),
                TreeNode::Node(a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out
    }

    /// Nested-parentheses leaf-label encoding, e.g. `((1,2),3)`.
    pub fn encode(&self) -> String {
        match self {
            TreeNode::Leaf(l) => l.to_string(),
            TreeNode::Node(a, b) => format!("({},{})", a.encode(), b.encode()),
        }
    }
}

/// A rooted binary tree with `r` labeled leaves in canonical form.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BinaryTree {
    pub root: TreeNode,
}

impl BinaryTree {
    pub fn leaf_count(&self) -> usize {
        self.root.leaf_count()
    }

    pub fn encode(&self) -> String {
        self.root.encode()
    }

    /// Graphviz DOT rendering of the tree shape.
    pub fn to_dot(&self) -> String {
        fn walk(n: &TreeNode, next_id: &mut usize, out: &mut String) -> usize {
            let id = *next_id;
            *next_id += 1;
            match n {
                TreeNode::Leaf(l) => {
                    out.push_str(&format!("  n{id} [label=\"{l}\", shape=circle];\n"));
                }
                TreeNode::Node(a, b) => {
                    out.push_str(&format!("  n{id} [label=\"\", shape=point];\n"));
                    let ia = walk(a, next_id, out);
                    out.push_str(&format!("  n{id} -- n{ia};\n"));
                    let ib = walk(b, next_id, out);
                    out.push_str(&format!("  n{id} -- n{ib};\n"));
                }
            }
            id
        }
        let mut out = String::from("graph tree {\n");
        let mut id = 0;
        walk(&self.root, &mut id, &mut out);
        out.push_str("}\n");
        out
    }
}

/// All rooted binary trees with `r` labeled leaves, each exactly once in
/// canonical form. The count is `(2r-3)!!` for `r >= 2`.
pub fn enumerate_trees(r: usize) -> Vec<BinaryTree> {
    assert!(r >= 1);
    if r == 1 {
        return vec![BinaryTree {
            root: TreeNode::Leaf(1),
        }];
    }
    // Grow by inserting leaf k into every node position (2m-1 of them).
    let mut trees = vec![TreeNode::join(TreeNode::Leaf(1), TreeNode::Leaf(2))];
    for k in 3..=r {
        let mut next = Vec::new();
        for t in &trees {
            let positions = 2 * (k - 1) - 1;
            for pos in 0..positions {
                let mut counter = 0;
                let grown = insert_at(t, k, pos, &mut counter);
                next.push(grown.expect("insertion position in range"));
            }
        }
        trees = next;
    }
    trees
        .into_iter()
        .map(|root| BinaryTree { root })
        .collect()
}

/// Replace the `pos`-th node (preorder) by a join of it with a new leaf.
fn insert_at(n: &TreeNode, leaf: usize, pos: usize, counter: &mut usize) -> Option<TreeNode> {
    let here = *counter;
    *counter += 1;
    if here == pos {
        return Some(TreeNode::join(n.clone(), TreeNode::Leaf(leaf)));
    }
    match n {
        TreeNode::Leaf(_) => None,
        TreeNode::Node(a, b) => {
            if let Some(na) = insert_at(a, leaf, pos, counter) {
                return Some(TreeNode::join(na, (**b).clone()));
            }
            if let Some(nb) = insert_at(b, leaf, pos, counter) {
                return Some(TreeNode::join((**a).clone(), nb));
            }
            None
        }
    }
}

// ---------------------------------------------------------------------------
// Perturbation
// ---------------------------------------------------------------------------

/// Deterministic perturbation of the skew pairing on the leaf lattice.
///
/// Perturbing the charges inside `Q^d` cannot make the flow generic: the
/// constraint `theta_hat(gamma_hat) = 0` forces the root flow point to kill
/// two independent covectors, which for `d = 2` pins every second-level
/// splitting time at exactly zero. The pairing itself is perturbed instead,
/// `m[i][j] = <gamma_i, gamma_j> + eps_ij` with `eps` antisymmetric and
/// entries `k / (B * P)`, `k` drawn uniformly from `[-B, B]` by a seeded
/// generator and `P` a fixed large prime. The flow then runs in leaf
/// coordinates (a point is its tuple of values on the leaf charges),
/// starting from `(theta(gamma_1), ..., theta(gamma_r))`; at `eps = 0` this
/// is exactly the image of the `Q^d` flow. `bound = 0` yields the exact
/// pairing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PerturbationData {
    pub seed: u64,
    pub bound: u64,
    /// Unperturbed integer leaf charges.
    pub parts: Vec<DimVector>,
    /// Perturbed antisymmetric pairing `m[i][j] = <gamma_i, gamma_j> + eps_ij`.
    pub pairing: Vec<Vec<Rat>>,
    /// Stability values `theta(gamma_i)` on the leaf charges (exact).
    pub theta: Vec<Rat>,
}

impl PerturbationData {
    /// `<gamma_hat_S, gamma_hat_T>` for leaf-label sets `S`, `T`.
    pub fn pair(&self, s: &[usize], t: &[usize]) -> Rat {
        let mut acc = Rat::zero();
        for &i in s {
            for &j in t {
                acc += &self.pairing[i - 1][j - 1];
            }
        }
        acc
    }

    /// Flow direction `<gamma_hat_S, ->` in leaf coordinates.
    pub fn direction(&self, s: &[usize]) -> Vec<Rat> {
        let r = self.parts.len();
        let mut dir = vec![Rat::zero(); r];
        for &i in s {
            for (d, m) in dir.iter_mut().zip(&self.pairing[i - 1]) {
                *d += m;
            }
        }
        dir
    }
}

/// Value of a leaf-coordinate point on `gamma_hat_S`.
fn eval_on(point: &[Rat], s: &[usize]) -> Rat {
    s.iter().map(|&l| point[l - 1].clone()).sum()
}

pub fn perturb(
    q: &Quiver,
    parts: &[DimVector],
    theta: &StabilityPoint,
    seed: u64,
    bound: u64,
) -> PerturbationData {
    let r = parts.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairing = vec![vec![Rat::zero(); r]; r];
    for i in 0..r {
        for j in (i + 1)..r {
            let base = q
                .skew_form(&parts[i], &parts[j])
                .expect("parts validated against the quiver");
            let mut m = Rat::from_integer(Int::from(base));
            if bound > 0 {
                let k: i64 = rng.gen_range(-(bound as i64)..=(bound as i64));
                m += Rat::new(
                    Int::from(k),
                    Int::from(bound) * Int::from(PERTURBATION_PRIME),
                );
            }
            pairing[j][i] = -&m;
            pairing[i][j] = m;
        }
    }
    let theta_hat: Vec<Rat> = parts.iter().map(|g| theta.eval(g)).collect();
    PerturbationData {
        seed,
        bound,
        parts: parts.to_vec(),
        pairing,
        theta: theta_hat,
    }
}

// ---------------------------------------------------------------------------
// Discrete flow
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FlowStatus {
    /// All splitting times positive.
    Valid,
    /// A nonpositive splitting time at the given vertex (preorder index).
    Invalid { vertex: usize },
    /// Zero denominator or zero time: the perturbation must be retried.
    Degenerate { vertex: usize, reason: DegenReason },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DegenReason {
    ZeroDenominator,
    ZeroTime,
}

/// Flow data per internal vertex, in preorder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowResult {
    pub times: Vec<Rat>,
    pub points: Vec<Vec<Rat>>,
    pub status: FlowStatus,
}

/// Run the discrete attractor flow on a tree with the given perturbed
/// pairing, in leaf coordinates. Vertices are processed from the root down;
/// at vertex `v` with parent point `theta_p` and child charges `c'`, `c''`:
/// `t_v = -theta_p(c') / <c'', c'>` and the flow point is
/// `theta_v = theta_p + t_v * <c_v, ->`. The two child choices give the same
/// time; this is asserted. Stops at the first nonpositive time or zero
/// denominator.
pub fn discrete_flow(tree: &BinaryTree, p: &PerturbationData) -> Result<FlowResult, TreeError> {
    if tree.leaf_count() != p.parts.len() {
        return Err(TreeError::PartCountMismatch {
            tree: tree.leaf_count(),
            parts: p.parts.len(),
        });
    }
    let mut res = FlowResult {
        times: Vec::new(),
        points: Vec::new(),
        status: FlowStatus::Valid,
    };
    flow_walk(&tree.root, &p.theta, p, &mut res);
    Ok(res)
}

fn flow_walk(node: &TreeNode, parent_point: &[Rat], p: &PerturbationData, res: &mut FlowResult) {
    let (a, b) = match node {
        TreeNode::Leaf(_) => return,
        TreeNode::Node(a, b) => (a, b),
    };
    let vertex = res.times.len();
    let la = a.leaf_labels();
    let lb = b.leaf_labels();
    let denom = p.pair(&lb, &la);
    if denom.is_zero() {
        res.status = FlowStatus::Degenerate {
            vertex,
            reason: DegenReason::ZeroDenominator,
        };
        return;
    }
    let theta_a = eval_on(parent_point, &la);
    let t_v = -&theta_a / &denom;
    // same time via the other child (exact identity given the parent
    // constraint theta_p(c_v) = 0)
    let theta_b = eval_on(parent_point, &lb);
    let t_v_alt = -theta_b / -denom;
    assert_eq!(t_v, t_v_alt, "flow time must not depend on the child choice");
    let all: Vec<usize> = la.iter().chain(&lb).copied().collect();
    let dir = p.direction(&all);
    let point: Vec<Rat> = parent_point
        .iter()
        .zip(&dir)
        .map(|(t, d)| t + &t_v * d)
        .collect();
    let anomaly = if t_v.is_zero() {
        Some(FlowStatus::Degenerate {
            vertex,
            reason: DegenReason::ZeroTime,
        })
    } else if t_v.is_negative() {
        Some(FlowStatus::Invalid { vertex })
    } else {
        None
    };
    res.times.push(t_v);
    res.points.push(point.clone());
    if let Some(status) = anomaly {
        res.status = status;
        return;
    }
    flow_walk(a, &point, p, res);
    if res.status != FlowStatus::Valid {
        return;
    }
    flow_walk(b, &point, p, res);
}

/// Unperturbed flow in `Q^d`, used for limit-tree grouping and figures.
/// Zero and negative times are recorded and the walk continues, so every
/// internal vertex gets a limit point; only a zero denominator stops the
/// walk. The reported status reflects the first anomaly.
pub fn limit_flow(
    q: &Quiver,
    tree: &BinaryTree,
    parts: &[DimVector],
    theta: &StabilityPoint,
) -> Result<FlowResult, TreeError> {
    if tree.leaf_count() != parts.len() {
        return Err(TreeError::PartCountMismatch {
            tree: tree.leaf_count(),
            parts: parts.len(),
        });
    }
    let mut res = FlowResult {
        times: Vec::new(),
        points: Vec::new(),
        status: FlowStatus::Valid,
    };
    limit_walk(q, &tree.root, &theta.0, parts, &mut res)?;
    Ok(res)
}

fn limit_walk(
    q: &Quiver,
    node: &TreeNode,
    parent_point: &[Rat],
    parts: &[DimVector],
    res: &mut FlowResult,
) -> Result<(), TreeError> {
    let (a, b) = match node {
        TreeNode::Leaf(_) => return Ok(()),
        TreeNode::Node(a, b) => (a, b),
    };
    let vertex = res.times.len();
    let ga = a.charge(parts);
    let gb = b.charge(parts);
    let denom = q.skew_form(&gb, &ga)?;
    if denom == 0 {
        if res.status == FlowStatus::Valid {
            res.status = FlowStatus::Degenerate {
                vertex,
                reason: DegenReason::ZeroDenominator,
            };
        }
        return Ok(());
    }
    let theta_a: Rat = parent_point
        .iter()
        .zip(&ga.0)
        .map(|(t, &c)| t * Rat::from_integer(Int::from(c)))
        .sum();
    let t_v = -theta_a / Rat::from_integer(Int::from(denom));
    let dir = q.skew_covector(&ga.add(&gb))?;
    let point: Vec<Rat> = parent_point
        .iter()
        .zip(&dir)
        .map(|(t, &d)| t + &t_v * Rat::from_integer(Int::from(d)))
        .collect();
    if res.status == FlowStatus::Valid {
        if t_v.is_zero() {
            res.status = FlowStatus::Degenerate {
                vertex,
                reason: DegenReason::ZeroTime,
            };
        } else if t_v.is_negative() {
            res.status = FlowStatus::Invalid { vertex };
        }
    }
    res.times.push(t_v);
    res.points.push(point.clone());
    limit_walk(q, a, &point, parts, res)?;
    limit_walk(q, b, &point, parts, res)
}

// ---------------------------------------------------------------------------
// F coefficients: fused enumeration + flow
// ---------------------------------------------------------------------------

/// A binary tree with valid flow, its tropical multiplicity (product of
/// `|<gamma_{v'},gamma_{v''}>|` over trivalent vertices, unperturbed
/// charges), and its flow data.
#[derive(Debug, Clone)]
pub struct TreeContribution {
    pub tree: BinaryTree,
    pub multiplicity: Int,
    pub flow: FlowResult,
}

/// Signals that the current perturbation hit a zero denominator or zero
/// splitting time and must be retried.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Degeneracy;

/// Enumerate contributing trees top-down by recursively splitting the leaf
/// set at the root, abandoning a branch as soon as its vertex multiplicity
/// is zero or its splitting time is negative. Sound because the flow at a
/// vertex depends only on the path from the root.
fn split_search(
    q: &Quiver,
    labels: &[usize],
    parent_point: &[Rat],
    p: &PerturbationData,
) -> Result<Vec<(TreeNode, Int)>, Degeneracy> {
    if labels.len() == 1 {
        return Ok(vec![(TreeNode::Leaf(labels[0]), Int::one())]);
    }
    let mut out = Vec::new();
    // splits (L', L'') with the smallest label pinned to L'
    let rest = &labels[1..];
    let m = rest.len();
    for mask in 0..(1u32 << m) {
        if mask == (1 << m) - 1 {
            continue; // L'' must be nonempty
        }
        let mut left = vec![labels[0]];
        let mut right = Vec::new();
        for (i, &l) in rest.iter().enumerate() {
            if mask & (1 << i) != 0 {
                left.push(l);
            } else {
                right.push(l);
            }
        }
        let sum_int = |ls: &[usize]| -> DimVector {
            ls.iter()
                .map(|&l| p.parts[l - 1].clone())
                .reduce(|a, b| a.add(&b))
                .unwrap()
        };
        let ga = sum_int(&left);
        let gb = sum_int(&right);
        let mult = q.skew_form(&ga, &gb).expect("validated dimensions").abs();
        if mult == 0 {
            continue;
        }
        let denom = p.pair(&right, &left);
        if denom.is_zero() {
            return Err(Degeneracy);
        }
        let theta_a = eval_on(parent_point, &left);
        let t_v = -theta_a / denom;
        if t_v.is_zero() {
            return Err(Degeneracy);
        }
        if t_v.is_negative() {
            continue;
        }
        let dir = p.direction(labels);
        let point: Vec<Rat> = parent_point
            .iter()
            .zip(&dir)
            .map(|(t, d)| t + &t_v * d)
            .collect();
        let subs_left = split_search(q, &left, &point, p)?;
        let subs_right = split_search(q, &right, &point, p)?;
        let mult = Int::from(mult);
        for (lt, lm) in &subs_left {
            for (rt, rm) in &subs_right {
                out.push((
                    TreeNode::join(lt.clone(), rt.clone()),
                    &mult * lm * rm,
                ));
            }
        }
    }
    Ok(out)
}

pub(crate) fn validate_parts(
    q: &Quiver,
    parts: &[DimVector],
    theta: &StabilityPoint,
) -> Result<(), TreeError> {
    let total = parts
        .iter()
        .cloned()
        .reduce(|a, b| a.add(&b))
        .ok_or(QuiverError::ZeroVector)?;
    let tg = theta.eval(&total);
    if !tg.is_zero() {
        return Err(TreeError::ThetaNotOnPerp(fmt_rat(&tg)));
    }
    if parts.len() >= 2 {
        for g in parts {
            if q.skew_covector(g)?.iter().all(|&c| c == 0) {
                return Err(TreeError::ZeroSkewPart(g.clone()));
            }
        }
    }
    Ok(())
}

fn contributions_once(
    q: &Quiver,
    p: &PerturbationData,
) -> Result<Vec<TreeContribution>, Degeneracy> {
    let labels: Vec<usize> = (1..=p.parts.len()).collect();
    let mut list = split_search(q, &labels, &p.theta, p)?;
    list.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(list
        .into_iter()
        .map(|(root, multiplicity)| {
            let tree = BinaryTree { root };
            let flow = discrete_flow(&tree, p).expect("validated parts");
            debug_assert_eq!(flow.status, FlowStatus::Valid);
            TreeContribution {
                tree,
                multiplicity,
                flow,
            }
        })
        .collect())
}

/// Outcome of the perturbed flow computation for one parts tuple.
#[derive(Debug, Clone)]
pub struct FlowComputation {
    /// The perturbation that produced the accepted run.
    pub perturbation: PerturbationData,
    /// Contributing trees with valid flow, canonically ordered.
    pub contributions: Vec<TreeContribution>,
    /// `F_r^theta` = sum of the multiplicities.
    pub total: Int,
}

/// Run the retry ladder: on degeneracy advance the seed; after
/// `seed_retries` failures multiply the bound by 100; after `escalations`
/// escalations give up. In verification mode the total is recomputed with
/// three distinct successful seeds and must agree exactly.
pub fn flow_computation(
    q: &Quiver,
    parts: &[DimVector],
    theta: &StabilityPoint,
    cfg: &RunConfig,
) -> Result<FlowComputation, TreeError> {
    validate_parts(q, parts, theta)?;
    if parts.len() == 1 {
        // single leaf: empty product, F_1 = 1
        let p = perturb(q, parts, theta, cfg.seed, cfg.bound);
        return Ok(FlowComputation {
            perturbation: p,
            contributions: vec![TreeContribution {
                tree: BinaryTree {
                    root: TreeNode::Leaf(1),
                },
                multiplicity: Int::one(),
                flow: FlowResult {
                    times: vec![],
                    points: vec![],
                    status: FlowStatus::Valid,
                },
            }],
            total: Int::one(),
        });
    }

    let needed = if cfg.verify { 3 } else { 1 };
    let mut successes: Vec<(u64, PerturbationData, Vec<TreeContribution>)> = Vec::new();
    let mut seed = cfg.seed;
    let mut bound = cfg.bound.max(1);
    let mut total_attempts = 0u32;
    for _escalation in 0..cfg.escalations.max(1) {
        let mut failures = 0u32;
        while failures < cfg.seed_retries.max(1) && successes.len() < needed {
            let p = perturb(q, parts, theta, seed, bound);
            total_attempts += 1;
            match contributions_once(q, &p) {
                Ok(contribs) => successes.push((seed, p, contribs)),
                Err(Degeneracy) => failures += 1,
            }
            seed += 1;
        }
        if successes.len() >= needed {
            break;
        }
        bound = bound.saturating_mul(100);
    }
    if successes.len() < needed {
        return Err(TreeError::PersistentDegeneracy {
            attempts: total_attempts,
        });
    }

    let total: Int = successes[0]
        .2
        .iter()
        .map(|c| c.multiplicity.clone())
        .sum();
    for (s, _, contribs) in &successes[1..] {
        let t: Int = contribs.iter().map(|c| c.multiplicity.clone()).sum();
        if t != total {
            return Err(TreeError::SeedDisagreement {
                first: total,
                first_seed: successes[0].0,
                second: t,
                second_seed: *s,
            });
        }
    }
    let (_, perturbation, contributions) = successes.into_iter().next().unwrap();
    Ok(FlowComputation {
        perturbation,
        contributions,
        total,
    })
}

/// The flow tree coefficient `F_r^theta(gamma_1,...,gamma_r)`: sum over
/// binary trees with valid flow of the product of vertex multiplicities.
/// `F_1 = 1` (empty product).
pub fn f_coefficient(
    q: &Quiver,
    parts: &[DimVector],
    theta: &StabilityPoint,
    cfg: &RunConfig,
) -> Result<Int, TreeError> {
    Ok(flow_computation(q, parts, theta, cfg)?.total)
}

// ---------------------------------------------------------------------------
// Limit-tree grouping
// ---------------------------------------------------------------------------

/// A limit attractor tree: the contraction of a contributing binary tree at
/// zero perturbation, with internal vertices merged when their limit flow
/// points coincide (producing higher-valent vertices).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum LimitNode {
    Leaf(usize),
    Vertex {
        point: Vec<Rat>,
        children: Vec<LimitNode>,
    },
}

impl LimitNode {
    fn min_leaf(&self) -> usize {
        match self {
            LimitNode::Leaf(l) => *l,
            LimitNode::Vertex { children, .. } => {
                children.iter().map(|c| c.min_leaf()).min().unwrap()
            }
        }
    }

    /// Encoding like `{(0,0): 1, 2, 3}` with vertex positions.
    pub fn encode(&self) -> String {
        match self {
            LimitNode::Leaf(l) => l.to_string(),
            LimitNode::Vertex { point, children } => {
                let pt: Vec<String> = point.iter().map(fmt_rat).collect();
                let ch: Vec<String> = children.iter().map(|c| c.encode()).collect();
                format!("{{({}): {}}}", pt.join(","), ch.join(", "))
            }
        }
    }
}

/// Grouping of the tree coefficient by limit attractor tree.
#[derive(Debug, Clone)]
pub struct LimitGrouping {
    /// `F_{r,T}^theta` per limit tree `T`, canonically ordered.
    pub groups: Vec<(LimitNode, Int)>,
    /// Contributions whose limit could not be resolved; kept in the total.
    pub unresolved: Int,
    /// `F_r^theta` (equals the sum over groups plus unresolved).
    pub total: Int,
}

/// Contract a contributed binary tree against per-vertex limit points
/// (computed at zero perturbation), merging each internal vertex into its
/// parent when their points agree.
pub fn contract_to_limit(tree: &BinaryTree, limit_points: &[Vec<Rat>]) -> LimitNode {
    fn walk(
        node: &TreeNode,
        points: &[Vec<Rat>],
        idx: &mut usize,
        parent_point: &[Rat],
    ) -> Vec<LimitNode> {
        match node {
            TreeNode::Leaf(l) => vec![LimitNode::Leaf(*l)],
            TreeNode::Node(a, b) => {
                let point = points[*idx].clone();
                *idx += 1;
                let mut children = walk(a, points, idx, &point);
                children.extend(walk(b, points, idx, &point));
                if point == parent_point {
                    children
                } else {
                    children.sort_by_key(|c| c.min_leaf());
                    vec![LimitNode::Vertex { point, children }]
                }
            }
        }
    }
    let mut idx = 0;
    // The root vertex is never spliced away: even when its limit point is
    // theta itself, the first branching happens at theta.
    match &tree.root {
        TreeNode::Leaf(l) => LimitNode::Leaf(*l),
        TreeNode::Node(a, b) => {
            let point = limit_points[0].clone();
            idx += 1;
            let mut children = walk(a, limit_points, &mut idx, &point);
            children.extend(walk(b, limit_points, &mut idx, &point));
            children.sort_by_key(|c| c.min_leaf());
            LimitNode::Vertex { point, children }
        }
    }
}

/// Group the coefficient by limit attractor tree: rerun the unperturbed
/// `Q^d` flow for each contributing tree and merge vertices whose limit
/// points coincide. The grouped sums add up to `F_r^theta`.
pub fn f_by_limit_tree(
    q: &Quiver,
    parts: &[DimVector],
    theta: &StabilityPoint,
    cfg: &RunConfig,
) -> Result<LimitGrouping, TreeError> {
    let comp = flow_computation(q, parts, theta, cfg)?;
    Ok(group_contributions(q, parts, theta, &comp.contributions))
}

/// Grouping of an explicit contribution list (shared with the tropical
/// counting path).
pub fn group_contributions(
    q: &Quiver,
    parts: &[DimVector],
    theta: &StabilityPoint,
    contributions: &[TreeContribution],
) -> LimitGrouping {
    let mut groups: BTreeMap<LimitNode, Int> = BTreeMap::new();
    let mut unresolved = Int::zero();
    let mut total = Int::zero();
    for c in contributions {
        total += &c.multiplicity;
        let flow0 = limit_flow(q, &c.tree, parts, theta).expect("validated parts");
        // zero limit times are the merge case; a zero denominator or a
        // negative limit time leaves the grouping unresolved
        let resolved = flow0.times.len() == count_internal(&c.tree.root)
            && !flow0.times.iter().any(|t| t.is_negative());
        if !resolved {
            unresolved += &c.multiplicity;
            continue;
        }
        let limit = contract_to_limit(&c.tree, &flow0.points);
        *groups.entry(limit).or_insert_with(Int::zero) += &c.multiplicity;
    }
    LimitGrouping {
        groups: groups.into_iter().collect(),
        unresolved,
        total,
    }
}

fn count_internal(n: &TreeNode) -> usize {
    match n {
        TreeNode::Leaf(_) => 0,
        TreeNode::Node(a, b) => 1 + count_internal(a) + count_internal(b),
    }
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

    #[test]
    fn tree_counts_match_double_factorial() {
        assert_eq!(enumerate_trees(1).len(), 1);
        assert_eq!(enumerate_trees(2).len(), 1);
        assert_eq!(enumerate_trees(3).len(), 3);
        assert_eq!(enumerate_trees(4).len(), 15);
        assert_eq!(enumerate_trees(5).len(), 105);
    }

    #[test]
    fn trees_are_distinct_and_canonical() {
        for r in 2..=5 {
            let trees = enumerate_trees(r);
            let set: std::collections::BTreeSet<_> = trees.iter().cloned().collect();
            assert_eq!(set.len(), trees.len());
            for t in &trees {
                assert_eq!(t.leaf_count(), r);
            }
        }
    }

    #[test]
    fn perturb_bound_zero_is_exact() {
        let q = Quiver::kronecker(3);
        let parts = vec![dv(&[1, 0]), dv(&[0, 1])];
        let theta = sp(&[1, -1]);
        let p = perturb(&q, &parts, &theta, 7, 0);
        assert_eq!(p.pairing, vec![vec![rat(0), rat(3)], vec![rat(-3), rat(0)]]);
        assert_eq!(p.theta, vec![rat(1), rat(-1)]);
    }

    #[test]
    fn perturb_pairing_invariants() {
        let q = Quiver::kronecker(3);
        let parts = vec![dv(&[1, 0]), dv(&[0, 1]), dv(&[0, 1])];
        let theta = sp(&[2, -1]);
        for seed in [1u64, 2, 99] {
            let p = perturb(&q, &parts, &theta, seed, 1000);
            // theta values are exact, so theta(gamma) = 0 survives
            assert_eq!(p.theta, vec![rat(2), rat(-1), rat(-1)]);
            assert!(p.theta.iter().sum::<Rat>().is_zero());
            for i in 0..3 {
                assert!(p.pairing[i][i].is_zero());
                for j in 0..3 {
                    assert_eq!(p.pairing[i][j], -&p.pairing[j][i]);
                    let base = q.skew_form(&parts[i], &parts[j]).unwrap();
                    let eps = &p.pairing[i][j] - Rat::from_integer(Int::from(base));
                    assert!(eps.abs() <= Rat::new(Int::one(), Int::from(PERTURBATION_PRIME)));
                }
            }
        }
    }

    #[test]
    fn kronecker_flow_hand_values() {
        for n in 1..=4i64 {
            let q = Quiver::kronecker(n);
            let parts = vec![dv(&[1, 0]), dv(&[0, 1])];
            let tree = enumerate_trees(2).pop().unwrap();
            let p = perturb(&q, &parts, &sp(&[1, -1]), 1, 0);
            let f = discrete_flow(&tree, &p).unwrap();
            assert_eq!(f.status, FlowStatus::Valid);
            assert_eq!(f.times, vec![Rat::new(Int::from(1), Int::from(n))]);
            assert_eq!(f.points, vec![vec![rat(0), rat(0)]]);

            let p = perturb(&q, &parts, &sp(&[-1, 1]), 1, 0);
            let f = discrete_flow(&tree, &p).unwrap();
            assert!(matches!(f.status, FlowStatus::Invalid { .. }));

            let p = perturb(&q, &parts, &sp(&[0, 0]), 1, 0);
            let f = discrete_flow(&tree, &p).unwrap();
            assert!(matches!(
                f.status,
                FlowStatus::Degenerate {
                    reason: DegenReason::ZeroTime,
                    ..
                }
            ));

            // unperturbed Q^d limit flow matches the leaf-coordinate run
            let f0 = limit_flow(&q, &tree, &parts, &sp(&[1, -1])).unwrap();
            assert_eq!(f0.times, vec![Rat::new(Int::from(1), Int::from(n))]);
            assert_eq!(f0.points, vec![vec![rat(0), rat(0)]]);
        }
    }

    #[test]
    fn f_coefficient_single_part() {
        let q = Quiver::kronecker(3);
        let f = f_coefficient(&q, &[dv(&[1, 1])], &sp(&[1, -1]), &RunConfig::default()).unwrap();
        assert_eq!(f, Int::from(1));
    }

    #[test]
    fn f_coefficient_kronecker_two_parts() {
        for n in 1..=5i64 {
            let q = Quiver::kronecker(n);
            let parts = [dv(&[1, 0]), dv(&[0, 1])];
            let cfg = RunConfig::default();
            let f = f_coefficient(&q, &parts, &sp(&[1, -1]), &cfg).unwrap();
            assert_eq!(f, Int::from(n));
            let f = f_coefficient(&q, &parts, &sp(&[-1, 1]), &cfg).unwrap();
            assert_eq!(f, Int::from(0));
        }
    }

    #[test]
    fn f_coefficient_kronecker_1_2_parts() {
        // 3-Kronecker, parts (e1, e2, e2): forced to 9 by the oracle value
        // Omega_{(1,2)} = 3 through the expansion (1/2)*F3 - (1/4)*F2(e1,2e2)
        // with F2(e1,2e2) = 6.
        let q = Quiver::kronecker(3);
        let cfg = RunConfig::default();
        let theta = sp(&[2, -1]);
        let f2 = f_coefficient(&q, &[dv(&[1, 0]), dv(&[0, 2])], &theta, &cfg).unwrap();
        assert_eq!(f2, Int::from(6));
        let f3 = f_coefficient(
            &q,
            &[dv(&[1, 0]), dv(&[0, 1]), dv(&[0, 1])],
            &theta,
            &cfg,
        )
        .unwrap();
        assert_eq!(f3, Int::from(9));
    }

    #[test]
    fn f_symmetric_under_part_permutation() {
        let q = Quiver::kronecker(3);
        let cfg = RunConfig::default();
        let theta = sp(&[2, -1]);
        let a = f_coefficient(&q, &[dv(&[1, 0]), dv(&[0, 1]), dv(&[0, 1])], &theta, &cfg).unwrap();
        let b = f_coefficient(&q, &[dv(&[0, 1]), dv(&[1, 0]), dv(&[0, 1])], &theta, &cfg).unwrap();
        let c = f_coefficient(&q, &[dv(&[0, 1]), dv(&[0, 1]), dv(&[1, 0])], &theta, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(b, c);
    }

    #[test]
    fn limit_grouping_sums_to_total() {
        let q = Quiver::kronecker(3);
        let cfg = RunConfig::default();
        let theta = sp(&[2, -1]);
        let g = f_by_limit_tree(
            &q,
            &[dv(&[1, 0]), dv(&[0, 1]), dv(&[0, 1])],
            &theta,
            &cfg,
        )
        .unwrap();
        let sum: Int = g.groups.iter().map(|(_, v)| v.clone()).sum::<Int>() + &g.unresolved;
        assert_eq!(sum, g.total);
        assert_eq!(g.total, Int::from(9));
    }

    #[test]
    fn limit_grouping_kronecker_single_vertex() {
        let q = Quiver::kronecker(4);
        let cfg = RunConfig::default();
        let g = f_by_limit_tree(&q, &[dv(&[1, 0]), dv(&[0, 1])], &sp(&[1, -1]), &cfg).unwrap();
        assert_eq!(g.groups.len(), 1);
        assert_eq!(g.groups[0].1, Int::from(4));
        match &g.groups[0].0 {
            LimitNode::Vertex { point, children } => {
                assert_eq!(point, &vec![rat(0), rat(0)]);
                assert_eq!(children.len(), 2);
            }
            _ => panic!("expected a vertex"),
        }
    }

    #[test]
    fn zero_skew_part_rejected() {
        // triangle kernel vector (1,-1,1) has zero skew covector, but parts
        // must be nonnegative in practice; use a 2-cycle quiver where e.g.
        // (1,1) is in the kernel.
        let q = Quiver::new(vec![vec![0, 1], vec![1, 0]]).unwrap();
        let parts = [dv(&[1, 1]), dv(&[1, 1])];
        let err = f_coefficient(&q, &parts, &sp(&[0, 0]), &RunConfig::default());
        assert!(matches!(err, Err(TreeError::ZeroSkewPart(_))));
    }
}
