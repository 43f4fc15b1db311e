//! Brute-force ground truth for the analytical layer.
//!
//! Enumerates every valid chain state `w = {x, (b_k, a_k)}` of a tiny
//! instance, builds the exact one-slot transition kernel, solves for the
//! stationary distribution directly, and checks it against the product
//! form, the near-reversibility balance relation, and the on-off marginal.
//! Instances are capped hard: this module exists to certify the formulas,
//! not to scale.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::graph::{classify, ConflictGraph, OnOffState};
use crate::linalg::solve_dense;
use crate::stationary::onoff_distribution_from_means;

/// Largest admissible transmission length.
pub const DEFAULT_BMAX_CAP: u32 = 8;
/// Largest admissible link count.
pub const MAX_ORACLE_LINKS: usize = 3;
/// Guard on the enumerated state count (dense solves beyond this are not
/// worth waiting for).
pub const MAX_ORACLE_STATES: usize = 3000;

/// Finite-support distribution of a link's total transmission length.
#[derive(Debug, Clone, PartialEq)]
pub struct PayloadPmf {
    entries: Vec<(u32, f64)>,
}

impl PayloadPmf {
    /// Entries are (length, probability); lengths positive and distinct,
    /// probabilities positive and summing to one.
    pub fn new(mut entries: Vec<(u32, f64)>) -> Result<Self> {
        entries.retain(|&(_, p)| p != 0.0);
        entries.sort_by_key(|&(b, _)| b);
        if entries.is_empty() {
            return Err(Error::Domain("length pmf needs support".into()));
        }
        let mut total = 0.0;
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::Domain(format!("duplicate length {}", w[0].0)));
            }
        }
        for &(b, p) in &entries {
            if b == 0 {
                return Err(Error::Domain("transmission lengths must be >= 1".into()));
            }
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::Domain(format!("probability {p} out of range")));
            }
            total += p;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("pmf sums to {total}, not 1")));
        }
        Ok(Self { entries })
    }

    pub fn deterministic(length: u32) -> Self {
        Self {
            entries: vec![(length, 1.0)],
        }
    }

    /// The two-point length law the simulator realizes for a successful
    /// transmission: overhead plus the floor/ceiling randomization of the
    /// mean payload.
    pub fn two_point_for_mean(tau_prime: u32, payload_mean: f64) -> Result<Self> {
        if !(payload_mean >= 1.0) {
            return Err(Error::Domain(format!(
                "mean payload {payload_mean} must be at least one slot"
            )));
        }
        let floor = payload_mean.floor();
        let frac = payload_mean - floor;
        let lo = tau_prime + floor as u32;
        if frac == 0.0 {
            Ok(Self::deterministic(lo))
        } else {
            Self::new(vec![(lo, 1.0 - frac), (lo + 1, frac)])
        }
    }

    pub fn support(&self) -> impl Iterator<Item = u32> + '_ {
        self.entries.iter().map(|&(b, _)| b)
    }

    pub fn prob(&self, length: u32) -> f64 {
        self.entries
            .iter()
            .find(|&&(b, _)| b == length)
            .map_or(0.0, |&(_, p)| p)
    }

    pub fn mean(&self) -> f64 {
        self.entries.iter().map(|&(b, p)| b as f64 * p).sum()
    }

    pub fn max_length(&self) -> u32 {
        self.entries.last().map_or(0, |&(b, _)| b)
    }
}

/// A valid chain state: the phases `(b, a)` of every active link, sorted
/// by link index. Collision members carry `b = gamma` and synchronized
/// `a` by construction.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ChainState {
    pub links: Vec<(usize, u32, u32)>,
}

impl ChainState {
    pub fn idle() -> Self {
        Self { links: Vec::new() }
    }

    pub fn onoff_mask(&self) -> u64 {
        self.links.iter().map(|&(k, _, _)| 1u64 << k).sum()
    }

    pub fn phase(&self, link: usize) -> Option<(u32, u32)> {
        self.links
            .iter()
            .find(|&&(k, _, _)| k == link)
            .map(|&(_, b, a)| (b, a))
    }
}

/// Relabel remaining times in reverse: `(b, a) -> (b, b - a + 1)`. An
/// involution on valid states.
pub fn reverse_state(w: &ChainState) -> ChainState {
    ChainState {
        links: w
            .links
            .iter()
            .map(|&(k, b, a)| (k, b, b - a + 1))
            .collect(),
    }
}

fn check_caps(g: &ConflictGraph, pmfs: &[PayloadPmf]) -> Result<()> {
    if g.num_links() > MAX_ORACLE_LINKS {
        return Err(Error::CapacityExceeded {
            what: "oracle links",
            cap: MAX_ORACLE_LINKS,
            requested: g.num_links(),
        });
    }
    if pmfs.len() != g.num_links() {
        return Err(Error::DimensionMismatch {
            what: "length pmfs",
            expected: g.num_links(),
            got: pmfs.len(),
        });
    }
    for pmf in pmfs {
        if pmf.max_length() > DEFAULT_BMAX_CAP {
            return Err(Error::CapacityExceeded {
                what: "oracle transmission length",
                cap: DEFAULT_BMAX_CAP as usize,
                requested: pmf.max_length() as usize,
            });
        }
    }
    Ok(())
}

/// Enumerate every valid state: for each on-off pattern, successful links
/// range over their length support with any remaining time, and each
/// collision component shares one phase in `1..=gamma`.
pub fn enumerate_states(
    g: &ConflictGraph,
    gamma: u32,
    pmfs: &[PayloadPmf],
) -> Result<Vec<ChainState>> {
    check_caps(g, pmfs)?;
    let k = g.num_links();
    let mut states = Vec::new();
    for mask in 0u64..(1 << k) {
        let x = OnOffState::from_mask(mask, k)?;
        let cls = classify(g, &x)?;
        // Option lists per "slot": one per successful link, one per
        // collision component.
        let mut option_sets: Vec<Vec<Vec<(usize, u32, u32)>>> = Vec::new();
        for &s in &cls.successful {
            let mut opts = Vec::new();
            for b in pmfs[s].support() {
                for a in 1..=b {
                    opts.push(vec![(s, b, a)]);
                }
            }
            option_sets.push(opts);
        }
        for comp in cls.components.iter().filter(|c| c.len() > 1) {
            let mut opts = Vec::new();
            for a in 1..=gamma {
                opts.push(comp.iter().map(|&m| (m, gamma, a)).collect());
            }
            option_sets.push(opts);
        }
        let mut partial: Vec<Vec<(usize, u32, u32)>> = vec![Vec::new()];
        for opts in &option_sets {
            let mut next = Vec::with_capacity(partial.len() * opts.len());
            for base in &partial {
                for opt in opts {
                    let mut links = base.clone();
                    links.extend_from_slice(opt);
                    next.push(links);
                }
            }
            partial = next;
        }
        for mut links in partial {
            links.sort_by_key(|&(k, _, _)| k);
            states.push(ChainState { links });
        }
        if states.len() > MAX_ORACLE_STATES {
            return Err(Error::CapacityExceeded {
                what: "oracle states",
                cap: MAX_ORACLE_STATES,
                requested: states.len(),
            });
        }
    }
    states.sort();
    Ok(states)
}

/// Sparse one-slot transition kernel over `states`.
pub struct Kernel {
    pub states: Vec<ChainState>,
    index: HashMap<ChainState, usize>,
    /// `rows[i]` holds `(j, Q(i, j))` with positive probabilities.
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl Kernel {
    pub fn index_of(&self, w: &ChainState) -> Option<usize> {
        self.index.get(w).copied()
    }

    pub fn prob(&self, from: usize, to: usize) -> f64 {
        self.rows[from]
            .iter()
            .find(|&&(j, _)| j == to)
            .map_or(0.0, |&(_, q)| q)
    }
}

/// Build the exact kernel: links mid-transmission continue, their idle
/// neighbors stay blocked, and every other link attempts independently;
/// simultaneous conflicting attempts form probe-length collisions.
pub fn transition_kernel(
    g: &ConflictGraph,
    p: &[f64],
    gamma: u32,
    pmfs: &[PayloadPmf],
    states: Vec<ChainState>,
) -> Result<Kernel> {
    check_caps(g, pmfs)?;
    if p.len() != g.num_links() {
        return Err(Error::DimensionMismatch {
            what: "attempt probabilities",
            expected: g.num_links(),
            got: p.len(),
        });
    }
    let k = g.num_links();
    let index: HashMap<ChainState, usize> = states
        .iter()
        .cloned()
        .enumerate()
        .map(|(i, s)| (s, i))
        .collect();
    let mut rows = Vec::with_capacity(states.len());
    for w in &states {
        // Continuing links and the frozen part of the successor.
        let mut continuing: Vec<(usize, u32, u32)> = Vec::new();
        let mut cont_mask = 0u64;
        for &(link, b, a) in &w.links {
            if a > 1 {
                continuing.push((link, b, a - 1));
                cont_mask |= 1 << link;
            }
        }
        // Free links: not continuing and not blocked by a continuer.
        let free: Vec<usize> = (0..k)
            .filter(|&i| {
                cont_mask & (1 << i) == 0 && g.neighbors_mask(i) & cont_mask == 0
            })
            .collect();
        let mut row: HashMap<usize, f64> = HashMap::new();
        // All attempt patterns over the free links.
        for pattern in 0u64..(1 << free.len()) {
            let mut prob = 1.0f64;
            let mut attempt_mask = 0u64;
            for (pos, &link) in free.iter().enumerate() {
                if pattern & (1 << pos) != 0 {
                    prob *= p[link];
                    attempt_mask |= 1 << link;
                } else {
                    prob *= 1.0 - p[link];
                }
            }
            // Split attempts into lone successes and collision components.
            let mut new_fixed: Vec<(usize, u32, u32)> = Vec::new();
            let mut lone: Vec<usize> = Vec::new();
            let mut mm = attempt_mask;
            while mm != 0 {
                let link = mm.trailing_zeros() as usize;
                mm &= mm - 1;
                if g.neighbors_mask(link) & attempt_mask != 0 {
                    new_fixed.push((link, gamma, gamma));
                } else {
                    lone.push(link);
                }
            }
            // Every choice of lengths for the lone attempts.
            let mut variants: Vec<(Vec<(usize, u32, u32)>, f64)> = vec![(new_fixed, prob)];
            for &link in &lone {
                let mut next = Vec::new();
                for &(b, pb) in &pmfs[link].entries {
                    for (base, q) in &variants {
                        let mut links = base.clone();
                        links.push((link, b, b));
                        next.push((links, q * pb));
                    }
                }
                variants = next;
            }
            for (mut extra, q) in variants {
                let mut links = continuing.clone();
                links.append(&mut extra);
                links.sort_by_key(|&(l, _, _)| l);
                let succ = ChainState { links };
                let j = index.get(&succ).ok_or_else(|| {
                    Error::Solver(format!("successor state not enumerated: {succ:?}"))
                })?;
                *row.entry(*j).or_insert(0.0) += q;
            }
        }
        let total: f64 = row.values().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Solver(format!(
                "kernel row sums to {total}, not 1"
            )));
        }
        let mut entries: Vec<(usize, f64)> = row.into_iter().collect();
        entries.sort_by_key(|&(j, _)| j);
        rows.push(entries);
    }
    Ok(Kernel {
        states,
        index,
        rows,
    })
}

/// Exact stationary distribution of the kernel by dense linear solve,
/// verified to satisfy `pi Q = pi` to 1e-12.
pub fn stationary_exact(kernel: &Kernel) -> Result<Vec<f64>> {
    let n = kernel.states.len();
    // (Q^T - I) pi = 0 with the first equation replaced by normalization.
    let mut a = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for &(j, q) in &kernel.rows[i] {
            a[j][i] += q;
        }
        a[i][i] -= 1.0;
    }
    for j in 0..n {
        a[0][j] = 1.0;
    }
    let mut rhs = vec![0.0f64; n];
    rhs[0] = 1.0;
    let pi = solve_dense(a, rhs)?;
    if pi.iter().any(|&v| v < -1e-12) {
        return Err(Error::Solver("negative stationary probability".into()));
    }
    // Residual check.
    let mut residual = 0.0f64;
    let mut flow = vec![0.0f64; n];
    for i in 0..n {
        for &(j, q) in &kernel.rows[i] {
            flow[j] += pi[i] * q;
        }
    }
    for j in 0..n {
        residual = residual.max((flow[j] - pi[j]).abs());
    }
    if residual > 1e-12 {
        return Err(Error::NoConvergence {
            iterations: 1,
            residual,
            best: pi,
        });
    }
    Ok(pi)
}

/// Normalized product-form weights: idle links contribute `q_i`, active
/// links `p_j`, and successful links additionally the probability of
/// their drawn length. Remaining times do not enter.
pub fn product_form(
    g: &ConflictGraph,
    p: &[f64],
    pmfs: &[PayloadPmf],
    states: &[ChainState],
) -> Result<Vec<f64>> {
    let k = g.num_links();
    let mut weights = Vec::with_capacity(states.len());
    for w in states {
        let mask = w.onoff_mask();
        let x = OnOffState::from_mask(mask, k)?;
        let cls = classify(g, &x)?;
        let mut weight = 1.0f64;
        for i in 0..k {
            if mask & (1 << i) == 0 {
                weight *= 1.0 - p[i];
            } else {
                weight *= p[i];
            }
        }
        for &s in &cls.successful {
            let (b, _) = w.phase(s).expect("successful link is active");
            weight *= pmfs[s].prob(b);
        }
        weights.push(weight);
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    Ok(weights)
}

/// Outcome of the full oracle cross-validation of one instance.
#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub num_states: usize,
    /// Max row-sum deviation of the kernel from 1.
    pub max_row_sum_dev: f64,
    /// Max per-state gap between the solved stationary distribution and
    /// the product form.
    pub max_product_form_dev: f64,
    /// Max per-pattern gap between the solved on-off marginal and the
    /// mean-length product form.
    pub max_marginal_dev: f64,
    /// Max violation of `p(w) Q(w,w') = p(w') Q(g(w'), g(w))`.
    pub max_balance_dev: f64,
    /// Max violation of the per-pattern phase-sum identity
    /// `sum_B(x) prod P_j(b_j) = gamma^h prod T_j`.
    pub max_phase_sum_dev: f64,
    /// Reversal is an involution mapping valid states to valid states.
    pub reversal_involution_ok: bool,
    /// Transitions exist exactly in reversed pairs.
    pub reversed_support_ok: bool,
}

impl VerifyReport {
    /// The acceptance thresholds used throughout: 1e-9 for distribution
    /// comparisons, 1e-12 for structural identities.
    pub fn pass(&self) -> bool {
        self.max_row_sum_dev < 1e-12
            && self.max_product_form_dev < 1e-9
            && self.max_marginal_dev < 1e-9
            && self.max_balance_dev < 1e-12
            && self.max_phase_sum_dev < 1e-9
            && self.reversal_involution_ok
            && self.reversed_support_ok
    }
}

/// Enumerate, solve, and compare against all analytical predictions.
pub fn verify_instance(
    g: &ConflictGraph,
    p: &[f64],
    gamma: u32,
    pmfs: &[PayloadPmf],
) -> Result<VerifyReport> {
    let states = enumerate_states(g, gamma, pmfs)?;
    let kernel = transition_kernel(g, p, gamma, pmfs, states)?;
    let pi = stationary_exact(&kernel)?;
    let pf = product_form(g, p, pmfs, &kernel.states)?;
    let n = kernel.states.len();

    let mut max_row_sum_dev = 0.0f64;
    for row in &kernel.rows {
        let total: f64 = row.iter().map(|&(_, q)| q).sum();
        max_row_sum_dev = max_row_sum_dev.max((total - 1.0).abs());
    }

    let mut max_product_form_dev = 0.0f64;
    for i in 0..n {
        max_product_form_dev = max_product_form_dev.max((pi[i] - pf[i]).abs());
    }

    // On-off marginal against the mean-length product form.
    let k = g.num_links();
    let means: Vec<f64> = pmfs.iter().map(|pmf| pmf.mean()).collect();
    let analytical = onoff_distribution_from_means(g, p, gamma, &means)?;
    let mut marginal = vec![0.0f64; 1 << k];
    for (i, w) in kernel.states.iter().enumerate() {
        marginal[w.onoff_mask() as usize] += pi[i];
    }
    let mut max_marginal_dev = 0.0f64;
    for mask in 0..(1usize << k) {
        max_marginal_dev =
            max_marginal_dev.max((marginal[mask] - analytical.prob(mask as u64)).abs());
    }

    // Reversal structure.
    let mut reversal_involution_ok = true;
    let mut reversed_support_ok = true;
    let mut max_balance_dev = 0.0f64;
    for (i, w) in kernel.states.iter().enumerate() {
        let rev = reverse_state(w);
        if reverse_state(&rev) != *w || kernel.index_of(&rev).is_none() {
            reversal_involution_ok = false;
            continue;
        }
        for &(j, q) in &kernel.rows[i] {
            let w_next = &kernel.states[j];
            let from = kernel.index_of(&reverse_state(w_next));
            let to = kernel.index_of(&rev);
            match (from, to) {
                (Some(from), Some(to)) => {
                    let q_rev = kernel.prob(from, to);
                    if q_rev == 0.0 {
                        reversed_support_ok = false;
                    }
                    max_balance_dev = max_balance_dev.max((pf[i] * q - pf[j] * q_rev).abs());
                }
                _ => reversal_involution_ok = false,
            }
        }
    }
    // The reverse direction of the support equivalence: any transition
    // between reversed states must come from a forward transition.
    for (i, w) in kernel.states.iter().enumerate() {
        for &(j, _) in &kernel.rows[i] {
            // Q(g(w'), g(w)) > 0 => Q(w, w') > 0 with w := g(g(w)) etc.;
            // covered by checking the involution image of each edge.
            let gi = kernel.index_of(&reverse_state(&kernel.states[j]));
            let gj = kernel.index_of(&reverse_state(w));
            if let (Some(gi), Some(gj)) = (gi, gj) {
                if kernel.prob(gi, gj) == 0.0 {
                    reversed_support_ok = false;
                }
            }
        }
    }

    // Phase-sum identity per on-off pattern.
    let mut max_phase_sum_dev = 0.0f64;
    for mask in 0u64..(1 << k) {
        let x = OnOffState::from_mask(mask, k)?;
        let cls = classify(g, &x)?;
        let mut lhs = 0.0f64;
        for w in kernel
            .states
            .iter()
            .filter(|w| w.onoff_mask() == mask)
        {
            let mut term = 1.0f64;
            for &s in &cls.successful {
                let (b, _) = w.phase(s).expect("successful link is active");
                term *= pmfs[s].prob(b);
            }
            lhs += term;
        }
        let mut rhs = (gamma as f64).powi(cls.collision_number as i32);
        for &s in &cls.successful {
            rhs *= means[s];
        }
        max_phase_sum_dev = max_phase_sum_dev.max((lhs - rhs).abs() / rhs.max(1.0));
    }

    Ok(VerifyReport {
        num_states: n,
        max_row_sum_dev,
        max_product_form_dev,
        max_marginal_dev,
        max_balance_dev,
        max_phase_sum_dev,
        reversal_involution_ok,
        reversed_support_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_link_fixed_length_has_three_states() {
        let g = ConflictGraph::edgeless(1).unwrap();
        let pmfs = vec![PayloadPmf::deterministic(2)];
        let states = enumerate_states(&g, 1, &pmfs).unwrap();
        assert_eq!(states.len(), 3);
        assert!(states.contains(&ChainState::idle()));
        assert!(states.contains(&ChainState {
            links: vec![(0, 2, 1)]
        }));
        assert!(states.contains(&ChainState {
            links: vec![(0, 2, 2)]
        }));
    }

    #[test]
    fn two_link_complete_graph_has_seven_states() {
        // Idle, two phases per lone success on each link, and a collision
        // component with two shared phases.
        let g = ConflictGraph::complete(2).unwrap();
        let pmfs = vec![PayloadPmf::deterministic(2), PayloadPmf::deterministic(2)];
        let states = enumerate_states(&g, 2, &pmfs).unwrap();
        assert_eq!(states.len(), 7);
        let collisions: Vec<_> = states
            .iter()
            .filter(|w| w.links.len() == 2)
            .collect();
        assert_eq!(collisions.len(), 2);
        for w in collisions {
            let (b0, a0) = w.phase(0).unwrap();
            let (b1, a1) = w.phase(1).unwrap();
            assert_eq!((b0, b1), (2, 2));
            assert_eq!(a0, a1);
        }
    }

    #[test]
    fn invalid_phases_are_never_enumerated() {
        let g = ConflictGraph::complete(2).unwrap();
        let pmfs = vec![PayloadPmf::deterministic(3), PayloadPmf::deterministic(3)];
        let states = enumerate_states(&g, 2, &pmfs).unwrap();
        for w in &states {
            for &(_, b, a) in &w.links {
                assert!(1 <= a && a <= b, "state {w:?} violates 1 <= a <= b");
            }
        }
    }

    #[test]
    fn caps_are_enforced() {
        let g = ConflictGraph::edgeless(4).unwrap();
        let pmfs = vec![PayloadPmf::deterministic(2); 4];
        assert!(matches!(
            enumerate_states(&g, 1, &pmfs),
            Err(Error::CapacityExceeded { .. })
        ));
        let g = ConflictGraph::edgeless(1).unwrap();
        let pmfs = vec![PayloadPmf::deterministic(9)];
        assert!(matches!(
            enumerate_states(&g, 1, &pmfs),
            Err(Error::CapacityExceeded { .. })
        ));
    }

    #[test]
    fn blocked_state_transitions_deterministically() {
        // K = 1 mid-transmission: A2 empty, single successor with prob 1.
        let g = ConflictGraph::edgeless(1).unwrap();
        let pmfs = vec![PayloadPmf::deterministic(3)];
        let states = enumerate_states(&g, 1, &pmfs).unwrap();
        let kernel = transition_kernel(&g, &[0.25], 1, &pmfs, states).unwrap();
        let from = kernel
            .index_of(&ChainState {
                links: vec![(0, 3, 3)],
            })
            .unwrap();
        let to = kernel
            .index_of(&ChainState {
                links: vec![(0, 3, 2)],
            })
            .unwrap();
        assert_eq!(kernel.rows[from], vec![(to, 1.0)]);
    }

    #[test]
    fn idle_single_link_stays_idle_with_q() {
        let g = ConflictGraph::edgeless(1).unwrap();
        let pmfs = vec![PayloadPmf::deterministic(2)];
        let states = enumerate_states(&g, 1, &pmfs).unwrap();
        let kernel = transition_kernel(&g, &[1.0 / 16.0], 1, &pmfs, states).unwrap();
        let idle = kernel.index_of(&ChainState::idle()).unwrap();
        assert!((kernel.prob(idle, idle) - 15.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn two_idle_links_collide_with_product_probability() {
        let g = ConflictGraph::complete(2).unwrap();
        let pmfs = vec![PayloadPmf::deterministic(2), PayloadPmf::deterministic(2)];
        let states = enumerate_states(&g, 2, &pmfs).unwrap();
        let kernel = transition_kernel(&g, &[0.5, 0.5], 2, &pmfs, states).unwrap();
        let idle = kernel.index_of(&ChainState::idle()).unwrap();
        let collision = kernel
            .index_of(&ChainState {
                links: vec![(0, 2, 2), (1, 2, 2)],
            })
            .unwrap();
        assert!((kernel.prob(idle, collision) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn reversal_is_an_involution() {
        let w = ChainState {
            links: vec![(0, 5, 2), (2, 3, 1)],
        };
        let rev = reverse_state(&w);
        assert_eq!(rev.phase(0), Some((5, 4)));
        assert_eq!(rev.phase(2), Some((3, 3)));
        assert_eq!(reverse_state(&rev), w);
    }

    #[test]
    fn verify_two_link_complete_instance() {
        let g = ConflictGraph::complete(2).unwrap();
        let pmfs = vec![PayloadPmf::deterministic(4), PayloadPmf::deterministic(4)];
        let report = verify_instance(&g, &[0.5, 0.5], 2, &pmfs).unwrap();
        assert!(report.pass(), "{report:?}");
        // Idle, four phases per lone success, two shared collision phases.
        assert_eq!(report.num_states, 11);
    }

    #[test]
    fn verify_random_length_instance() {
        let g = ConflictGraph::path(3).unwrap();
        let pmfs = vec![
            PayloadPmf::new(vec![(2, 0.5), (5, 0.5)]).unwrap(),
            PayloadPmf::deterministic(3),
            PayloadPmf::new(vec![(1, 0.25), (4, 0.75)]).unwrap(),
        ];
        let report = verify_instance(&g, &[0.2, 0.35, 0.15], 3, &pmfs).unwrap();
        assert!(report.pass(), "{report:?}");
    }

    #[test]
    fn marginal_matches_two_link_worked_example() {
        // p1 = p2 = 1/2, gamma = 2, lengths fixed at 4: the active-pair
        // probability is 2/11 and the normalizer 2.75.
        let g = ConflictGraph::complete(2).unwrap();
        let pmfs = vec![PayloadPmf::deterministic(4), PayloadPmf::deterministic(4)];
        let states = enumerate_states(&g, 2, &pmfs).unwrap();
        let kernel = transition_kernel(&g, &[0.5, 0.5], 2, &pmfs, states).unwrap();
        let pi = stationary_exact(&kernel).unwrap();
        let both: f64 = kernel
            .states
            .iter()
            .zip(&pi)
            .filter(|(w, _)| w.onoff_mask() == 0b11)
            .map(|(_, &p)| p)
            .sum();
        assert!((both - 2.0 / 11.0).abs() < 1e-12);
    }

    #[test]
    fn pmf_constructors_validate() {
        assert!(PayloadPmf::new(vec![(0, 1.0)]).is_err());
        assert!(PayloadPmf::new(vec![(2, 0.5), (2, 0.5)]).is_err());
        assert!(PayloadPmf::new(vec![(2, 0.4)]).is_err());
        let two = PayloadPmf::two_point_for_mean(10, 17.5).unwrap();
        assert_eq!(two.support().collect::<Vec<_>>(), vec![27, 28]);
        assert!((two.mean() - 27.5).abs() < 1e-12);
        let det = PayloadPmf::two_point_for_mean(10, 30.0).unwrap();
        assert_eq!(det.support().collect::<Vec<_>>(), vec![40]);
    }
}
