//! Depth-3 binary decision trees with two constant-action oracles.
//!
//! Base state `s` at time `t` is the node index within level `t` (its path
//! bits, left = 0), so leaf `4 a0 + 2 a1 + a2` is reached by actions
//! `(a0, a1, a2)`. Terminal rewards are paid on the last action.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::dp::policies::{max_aggregation_policy, max_following_policy};
use crate::dp::tables::TabularPolicy;
use crate::dp::values::{fmax_baseline, optimal_value, policy_value};
use crate::env::mdp::{deterministic_mdp, TabularMdp};
use crate::error::{MambaError, Result};
use crate::scalar::{argmax, Scalar};

pub const TREE_DEPTH: usize = 3;
pub const NUM_LEAVES: usize = 8;
const LEVEL_WIDTH: usize = 4;

/// A tree MDP together with its always-left and always-right oracles.
#[derive(Debug, Clone)]
pub struct TreeInstance<S> {
    pub mdp: TabularMdp<S>,
    pub left: TabularPolicy<S>,
    pub right: TabularPolicy<S>,
    pub leaf_rewards: [S; NUM_LEAVES],
}

impl<S: Scalar> TreeInstance<S> {
    pub fn oracles(&self) -> Vec<TabularPolicy<S>> {
        vec![self.left.clone(), self.right.clone()]
    }
}

/// Leaf index of a path such as `"LRL"`.
pub fn leaf_index(path: &str) -> usize {
    path.chars()
        .fold(0, |acc, c| 2 * acc + usize::from(c == 'R' || c == 'r'))
}

pub fn tree_from_leaves<S: Scalar>(leaf_rewards: [S; NUM_LEAVES]) -> Result<TreeInstance<S>> {
    let last = TREE_DEPTH - 1;
    let mdp = deterministic_mdp(
        LEVEL_WIDTH,
        2,
        TREE_DEPTH,
        0,
        |t, s, a| if t < last { (2 * s + a) % LEVEL_WIDTH } else { 0 },
        |t, s, a| if t == last { leaf_rewards[2 * s + a] } else { S::zero() },
    )?;
    Ok(TreeInstance {
        left: TabularPolicy::deterministic(TREE_DEPTH, LEVEL_WIDTH, 2, |_, _| 0),
        right: TabularPolicy::deterministic(TREE_DEPTH, LEVEL_WIDTH, 2, |_, _| 1),
        mdp,
        leaf_rewards,
    })
}

/// Tree where each oracle alone earns 1/2, one switch earns 3/4 and two
/// switches (left, right, left) earn the optimal 1.
pub fn make_switching_tree<S: Scalar>() -> Result<TreeInstance<S>> {
    let mut leaves = [S::zero(); NUM_LEAVES];
    leaves[leaf_index("LLL")] = S::lit(0.5);
    leaves[leaf_index("RRR")] = S::lit(0.5);
    leaves[leaf_index("LRR")] = S::lit(0.75);
    leaves[leaf_index("RLL")] = S::lit(0.75);
    leaves[leaf_index("LRL")] = S::one();
    tree_from_leaves(leaves)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OrderingVariant {
    A,
    B,
    C,
}

/// Exact-DP facts about a tree instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeFacts<S> {
    pub fmax_left_child: S,
    pub fmax_right_child: S,
    pub follow_value: S,
    pub aggregation_value: S,
    pub optimal_value: S,
    pub follow_root_action: usize,
    pub aggregation_root_action: usize,
}

pub fn tree_facts<S: Scalar>(tree: &TreeInstance<S>) -> Result<TreeFacts<S>> {
    let mdp = &tree.mdp;
    let oracles = tree.oracles();
    let values = vec![policy_value(mdp, &tree.left)?, policy_value(mdp, &tree.right)?];
    let fmax = fmax_baseline(&values)?;
    let follow = max_following_policy(mdp, &oracles, &values)?;
    let aggregation = max_aggregation_policy(mdp, &fmax)?;
    Ok(TreeFacts {
        fmax_left_child: fmax.get(1, 0),
        fmax_right_child: fmax.get(1, 1),
        follow_value: policy_value(mdp, &follow)?.get(0, 0),
        aggregation_value: policy_value(mdp, &aggregation)?.get(0, 0),
        optimal_value: optimal_value(mdp).get(0, 0),
        follow_root_action: argmax(follow.row(0, 0)),
        aggregation_root_action: argmax(aggregation.row(0, 0)),
    })
}

/// Terminal reward values the ordering trees are built from.
pub const ORDERING_REWARD_SET: [f64; 6] = [0.0, 0.6, 0.65, 0.7, 0.75, 1.0];

const TOL: f64 = 1e-12;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL
}

fn certify_a(f: &TreeFacts<f64>) -> bool {
    close(f.fmax_left_child, 0.7)
        && close(f.fmax_right_child, 0.75)
        && close(f.optimal_value, 1.0)
        && close(f.follow_value, f.optimal_value)
        && close(f.aggregation_value, 0.75)
        && f.follow_root_action == 0
}

fn certify_b(f: &TreeFacts<f64>) -> bool {
    f.follow_value < f.optimal_value - TOL && f.follow_root_action == 1
}

fn certify_c(f: &TreeFacts<f64>) -> bool {
    close(f.aggregation_value, f.optimal_value)
        && f.aggregation_value > f.follow_value + TOL
        && f.aggregation_root_action == 0
}

/// Leaf assignments of the three ordering variants plus the two swaps.
#[derive(Debug, Clone)]
pub struct OrderingSearch {
    pub leaves: [[f64; NUM_LEAVES]; 3],
    pub swaps: [(usize, usize); 2],
    pub searched: usize,
}

fn swapped(leaves: &[f64; NUM_LEAVES], (i, j): (usize, usize)) -> [f64; NUM_LEAVES] {
    let mut out = *leaves;
    out.swap(i, j);
    out
}

/// Exhaustive search over reward assignments, lexicographic in leaf order,
/// for the first variant A admitting a certified B (one swap) and C (one
/// further swap).
pub fn search_ordering_trees() -> Result<OrderingSearch> {
    let k = ORDERING_REWARD_SET.len();
    let total = k.pow(NUM_LEAVES as u32);
    let pairs: Vec<(usize, usize)> = (0..NUM_LEAVES)
        .flat_map(|i| (i + 1..NUM_LEAVES).map(move |j| (i, j)))
        .collect();
    let left_child = [leaf_index("LLL"), leaf_index("LRR")];
    let right_child = [leaf_index("RLL"), leaf_index("RRR")];
    for code in 0..total {
        let mut leaves = [0.0; NUM_LEAVES];
        let mut rest = code;
        for slot in (0..NUM_LEAVES).rev() {
            leaves[slot] = ORDERING_REWARD_SET[rest % k];
            rest /= k;
        }
        // constant-action oracles from a depth-1 node end at these two leaves
        if !close(leaves[left_child[0]].max(leaves[left_child[1]]), 0.7)
            || !close(leaves[right_child[0]].max(leaves[right_child[1]]), 0.75)
        {
            continue;
        }
        if !certify_a(&tree_facts(&tree_from_leaves(leaves)?)?) {
            continue;
        }
        for &p in &pairs {
            if leaves[p.0] == leaves[p.1] {
                continue;
            }
            let b = swapped(&leaves, p);
            if !certify_b(&tree_facts(&tree_from_leaves(b)?)?) {
                continue;
            }
            for &q in &pairs {
                if b[q.0] == b[q.1] {
                    continue;
                }
                let c = swapped(&b, q);
                if certify_c(&tree_facts(&tree_from_leaves(c)?)?) {
                    return Ok(OrderingSearch {
                        leaves: [leaves, b, c],
                        swaps: [p, q],
                        searched: code + 1,
                    });
                }
            }
        }
    }
    Err(MambaError::ConstructionInfeasible {
        searched: total,
        reason: format!(
            "no assignment of {:?} to {NUM_LEAVES} leaves satisfies the A/B/C certificates",
            ORDERING_REWARD_SET
        ),
    })
}

fn cached_search() -> Result<&'static OrderingSearch> {
    static SEARCH: OnceLock<std::result::Result<OrderingSearch, (usize, String)>> = OnceLock::new();
    match SEARCH.get_or_init(|| {
        search_ordering_trees().map_err(|e| match e {
            MambaError::ConstructionInfeasible { searched, reason } => (searched, reason),
            other => (0, other.to_string()),
        })
    }) {
        Ok(found) => Ok(found),
        Err((searched, reason)) => Err(MambaError::ConstructionInfeasible {
            searched: *searched,
            reason: reason.clone(),
        }),
    }
}

/// One of three trees that differ only by swapping terminal rewards:
/// in A max-following beats max-aggregation, in B max-following is
/// suboptimal, and in C max-aggregation is optimal and beats max-following.
pub fn make_ordering_tree<S: Scalar>(variant: OrderingVariant) -> Result<TreeInstance<S>> {
    let found = cached_search()?;
    let leaves = found.leaves[variant as usize];
    let tree = tree_from_leaves(leaves.map(S::lit))?;
    let facts = tree_facts(&tree)?;
    let as_f64 = TreeFacts {
        fmax_left_child: facts.fmax_left_child.to_f64_lossy(),
        fmax_right_child: facts.fmax_right_child.to_f64_lossy(),
        follow_value: facts.follow_value.to_f64_lossy(),
        aggregation_value: facts.aggregation_value.to_f64_lossy(),
        optimal_value: facts.optimal_value.to_f64_lossy(),
        follow_root_action: facts.follow_root_action,
        aggregation_root_action: facts.aggregation_root_action,
    };
    let ok = match variant {
        OrderingVariant::A => certify_a(&as_f64),
        OrderingVariant::B => certify_b(&as_f64),
        OrderingVariant::C => certify_c(&as_f64),
    };
    if !ok && std::any::TypeId::of::<S>() == std::any::TypeId::of::<f64>() {
        return Err(MambaError::ConstructionInfeasible {
            searched: found.searched,
            reason: format!("variant {variant:?} failed re-certification"),
        });
    }
    Ok(tree)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn switching_tree_certificates() {
        let tree = make_switching_tree::<f64>().unwrap();
        let v_left = policy_value(&tree.mdp, &tree.left).unwrap();
        let v_right = policy_value(&tree.mdp, &tree.right).unwrap();
        assert!((v_left.get(0, 0) - 0.5).abs() < 1e-12);
        assert!((v_right.get(0, 0) - 0.5).abs() < 1e-12);
        let facts = tree_facts(&tree).unwrap();
        assert!((facts.optimal_value - 1.0).abs() < 1e-12);
        assert!((facts.aggregation_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn leaf_indexing() {
        assert_eq!(leaf_index("LLL"), 0);
        assert_eq!(leaf_index("LRL"), 2);
        assert_eq!(leaf_index("RRR"), 7);
    }

    #[test]
    fn ordering_variants_are_certified_and_related_by_swaps() {
        let a = make_ordering_tree::<f64>(OrderingVariant::A).unwrap();
        let b = make_ordering_tree::<f64>(OrderingVariant::B).unwrap();
        let c = make_ordering_tree::<f64>(OrderingVariant::C).unwrap();
        let fa = tree_facts(&a).unwrap();
        assert!((fa.fmax_left_child - 0.7).abs() < 1e-12);
        assert!((fa.fmax_right_child - 0.75).abs() < 1e-12);
        assert!(fa.follow_value > fa.aggregation_value);
        assert!((fa.aggregation_value - 0.75).abs() < 1e-12);
        let fb = tree_facts(&b).unwrap();
        assert!(fb.follow_value < fb.optimal_value);
        let fc = tree_facts(&c).unwrap();
        assert!((fc.aggregation_value - fc.optimal_value).abs() < 1e-12);
        assert!(fc.aggregation_value > fc.follow_value);

        let mut sa = a.leaf_rewards.to_vec();
        let mut sc = c.leaf_rewards.to_vec();
        sa.sort_by(f64::total_cmp);
        sc.sort_by(f64::total_cmp);
        assert_eq!(sa, sc);
        let diff = |x: &[f64; 8], y: &[f64; 8]| x.iter().zip(y).filter(|(p, q)| p != q).count();
        assert_eq!(diff(&a.leaf_rewards, &b.leaf_rewards), 2);
        assert_eq!(diff(&b.leaf_rewards, &c.leaf_rewards), 2);
    }
}
