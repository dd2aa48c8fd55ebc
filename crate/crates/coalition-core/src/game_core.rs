//! Exact finite-game machinery: Shapley, Aumann-Drèze, and χ values, core
//! membership, blocking coalitions, and axiom checking — all in exact
//! arbitrary-precision rational arithmetic. No tolerances anywhere: payoff
//! tables and stability conclusions are decided by exact comparison.

use crate::{CoreError, Result};
use num_traits::Zero;
use rayon::prelude::*;
use std::fmt;
use std::ops::Index;

/// Exact rational number used by every finite-game computation.
pub type Rational = num::BigRational;

/// Default cap on the number of players (Shapley is Θ(2^n · n)).
pub const DEFAULT_MAX_PLAYERS: usize = 20;

/// Hard cap imposed by the `u32` bitmask representation.
pub const ABSOLUTE_MAX_PLAYERS: usize = 30;

/// Player role: content provider or peer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    Provider,
    Peer,
}

/// A set of players as a bitmask over player indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct PlayerSet(pub u32);

impl PlayerSet {
    pub const EMPTY: PlayerSet = PlayerSet(0);

    pub fn singleton(i: usize) -> Self {
        PlayerSet(1 << i)
    }

    pub fn full(n: usize) -> Self {
        if n == 0 {
            PlayerSet(0)
        } else {
            PlayerSet(u32::MAX >> (32 - n))
        }
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut mask = 0u32;
        for i in iter {
            mask |= 1 << i;
        }
        PlayerSet(mask)
    }

    pub fn contains(self, i: usize) -> bool {
        self.0 & (1 << i) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn with(self, i: usize) -> Self {
        PlayerSet(self.0 | (1 << i))
    }

    pub fn without(self, i: usize) -> Self {
        PlayerSet(self.0 & !(1 << i))
    }

    pub fn union(self, other: Self) -> Self {
        PlayerSet(self.0 | other.0)
    }

    pub fn intersection(self, other: Self) -> Self {
        PlayerSet(self.0 & other.0)
    }

    pub fn difference(self, other: Self) -> Self {
        PlayerSet(self.0 & !other.0)
    }

    pub fn is_subset_of(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_disjoint_from(self, other: Self) -> bool {
        self.0 & other.0 == 0
    }

    /// Member indices in ascending order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut rest = self.0;
        std::iter::from_fn(move || {
            if rest == 0 {
                None
            } else {
                let i = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(i)
            }
        })
    }

    /// The smallest member, if any.
    pub fn least(self) -> Option<usize> {
        if self.0 == 0 {
            None
        } else {
            Some(self.0.trailing_zeros() as usize)
        }
    }

    /// All subsets of this set (including ∅ and itself), ascending by mask.
    pub fn subsets(self) -> impl Iterator<Item = PlayerSet> {
        let mask = self.0;
        let mut next = Some(0u32);
        std::iter::from_fn(move || {
            let cur = next?;
            next = if cur == mask {
                None
            } else {
                Some(cur.wrapping_sub(mask) & mask)
            };
            Some(PlayerSet(cur))
        })
    }
}

impl FromIterator<usize> for PlayerSet {
    fn from_iter<T: IntoIterator<Item = usize>>(iter: T) -> Self {
        PlayerSet::from_indices(iter)
    }
}

/// Iterate all subsets of `mask` ascending by bitmask value.
pub fn subsets_of(mask: PlayerSet) -> Vec<PlayerSet> {
    let m = mask.0;
    let mut out = Vec::with_capacity(1 << mask.len());
    let mut s = 0u32;
    loop {
        out.push(PlayerSet(s));
        if s == m {
            break;
        }
        s = (s.wrapping_sub(m)) & m;
    }
    out
}

/// A transferable-utility game: player names, roles, and a dense worth table
/// indexed by subset bitmask. `v(∅) = 0` always.
#[derive(Clone, Debug, PartialEq)]
pub struct WorthFunction {
    names: Vec<String>,
    roles: Vec<Role>,
    values: Vec<Rational>,
}

impl WorthFunction {
    /// Build from a dense table of length `2^n` (default capacity limit).
    pub fn new(
        names: Vec<String>,
        roles: Vec<Role>,
        values: Vec<Rational>,
    ) -> Result<Self> {
        Self::with_limit(names, roles, values, DEFAULT_MAX_PLAYERS)
    }

    /// Build with an explicit player-count limit (absolute bitmask cap: 30).
    pub fn with_limit(
        names: Vec<String>,
        roles: Vec<Role>,
        values: Vec<Rational>,
        limit: usize,
    ) -> Result<Self> {
        let n = names.len();
        check_capacity(n, limit)?;
        if roles.len() != n {
            return Err(CoreError::invalid(format!(
                "{} roles for {} players",
                roles.len(),
                n
            )));
        }
        if values.len() != 1usize << n {
            return Err(CoreError::invalid(format!(
                "worth table has {} entries, expected 2^{} = {}",
                values.len(),
                n,
                1usize << n
            )));
        }
        if !values[0].is_zero() {
            return Err(CoreError::invalid("v(∅) must be 0"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for name in &names {
            if !seen.insert(name.clone()) {
                return Err(CoreError::invalid(format!("duplicate player name `{name}`")));
            }
        }
        Ok(WorthFunction {
            names,
            roles,
            values,
        })
    }

    /// Build by evaluating `f` on every subset (capacity checked first).
    pub fn from_fn(
        names: Vec<String>,
        roles: Vec<Role>,
        f: impl Fn(PlayerSet) -> Rational,
    ) -> Result<Self> {
        Self::from_fn_with_limit(names, roles, f, DEFAULT_MAX_PLAYERS)
    }

    pub fn from_fn_with_limit(
        names: Vec<String>,
        roles: Vec<Role>,
        f: impl Fn(PlayerSet) -> Rational,
        limit: usize,
    ) -> Result<Self> {
        check_capacity(names.len(), limit)?;
        let n = names.len();
        let values: Vec<Rational> = (0u32..1 << n).map(|m| f(PlayerSet(m))).collect();
        Self::with_limit(names, roles, values, limit)
    }

    pub fn n(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn roles(&self) -> &[Role] {
        &self.roles
    }

    pub fn player_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// All providers as a set.
    pub fn providers(&self) -> PlayerSet {
        PlayerSet::from_indices(
            (0..self.n()).filter(|&i| self.roles[i] == Role::Provider),
        )
    }

    /// All peers as a set.
    pub fn peers(&self) -> PlayerSet {
        PlayerSet::from_indices((0..self.n()).filter(|&i| self.roles[i] == Role::Peer))
    }

    pub fn worth(&self, s: PlayerSet) -> &Rational {
        &self.values[s.0 as usize]
    }

    /// Pointwise sum of two games over the same universe (for additivity).
    pub fn add(&self, other: &WorthFunction) -> Result<WorthFunction> {
        if self.names != other.names || self.roles != other.roles {
            return Err(CoreError::invalid(
                "cannot add games over different player universes",
            ));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + b)
            .collect();
        WorthFunction::with_limit(
            self.names.clone(),
            self.roles.clone(),
            values,
            ABSOLUTE_MAX_PLAYERS,
        )
    }
}

fn check_capacity(n: usize, limit: usize) -> Result<()> {
    let limit = limit.min(ABSOLUTE_MAX_PLAYERS);
    if n == 0 {
        return Err(CoreError::invalid("game must have at least one player"));
    }
    if n > limit {
        return Err(CoreError::capacity(format!(
            "{n} players exceeds the limit of {limit}"
        )));
    }
    Ok(())
}

/// A coalition structure: disjoint nonempty blocks covering all players,
/// canonically ordered by least member.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition {
    blocks: Vec<PlayerSet>,
    n: usize,
}

impl Partition {
    pub fn new(blocks: Vec<PlayerSet>, n: usize) -> Result<Self> {
        let mut union = PlayerSet::EMPTY;
        for b in &blocks {
            if b.is_empty() {
                return Err(CoreError::invalid("partition has an empty block"));
            }
            if !union.is_disjoint_from(*b) {
                return Err(CoreError::invalid("partition blocks overlap"));
            }
            union = union.union(*b);
        }
        if union != PlayerSet::full(n) {
            return Err(CoreError::invalid(format!(
                "partition does not cover all {n} players"
            )));
        }
        let mut blocks = blocks;
        blocks.sort_by_key(|b| b.least());
        Ok(Partition { blocks, n })
    }

    pub fn grand(n: usize) -> Self {
        Partition {
            blocks: vec![PlayerSet::full(n)],
            n,
        }
    }

    pub fn singletons(n: usize) -> Self {
        Partition {
            blocks: (0..n).map(PlayerSet::singleton).collect(),
            n,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn blocks(&self) -> &[PlayerSet] {
        &self.blocks
    }

    pub fn is_grand(&self) -> bool {
        self.blocks.len() == 1
    }

    /// The block containing player `i`.
    pub fn block_of(&self, i: usize) -> PlayerSet {
        *self
            .blocks
            .iter()
            .find(|b| b.contains(i))
            .expect("player index outside partition universe")
    }

    /// Every block of `self` lies inside a block of `other`.
    pub fn is_finer_than(&self, other: &Partition) -> bool {
        self.n == other.n
            && self
                .blocks
                .iter()
                .all(|b| b.is_subset_of(other.block_of(b.least().unwrap())))
    }
}

/// A payoff per player, indexed by player index.
#[derive(Clone, Debug, PartialEq)]
pub struct PayoffVector(pub Vec<Rational>);

impl PayoffVector {
    pub fn zeros(n: usize) -> Self {
        PayoffVector(vec![Rational::zero(); n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Rational> {
        self.0.iter()
    }

    /// Σ_{i ∈ s} φ_i.
    pub fn sum_over(&self, s: PlayerSet) -> Rational {
        s.iter().map(|i| self.0[i].clone()).sum()
    }

    pub fn total(&self) -> Rational {
        self.0.iter().sum()
    }
}

impl Index<usize> for PayoffVector {
    type Output = Rational;
    fn index(&self, i: usize) -> &Rational {
        &self.0[i]
    }
}

/// Strictly positive player weights (for the χ value and WSP).
#[derive(Clone, Debug, PartialEq)]
pub struct WeightVector(Vec<Rational>);

impl WeightVector {
    pub fn new(weights: Vec<Rational>) -> Result<Self> {
        if weights.iter().any(|w| *w <= Rational::zero()) {
            return Err(CoreError::invalid("weights must be strictly positive"));
        }
        Ok(WeightVector(weights))
    }

    pub fn uniform(n: usize) -> Self {
        WeightVector(vec![Rational::from_integer(1.into()); n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> &Rational {
        &self.0[i]
    }

    pub fn sum_over(&self, s: PlayerSet) -> Rational {
        s.iter().map(|i| self.0[i].clone()).sum()
    }
}

/// Which payoff rule to apply to a partitioned game.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ValueKind {
    /// Shapley value of the unpartitioned game (grand coalition only).
    Shapley,
    /// Shapley value within each block's reduced game.
    AumannDreze,
    /// Shapley value plus a weight-proportional share of the block surplus.
    Chi,
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ValueKind::Shapley => "shapley",
            ValueKind::AumannDreze => "ad",
            ValueKind::Chi => "chi",
        })
    }
}

// ---------------------------------------------------------------------------
// Values
// ---------------------------------------------------------------------------

/// Shapley subset weights `|S|!(n−1−|S|)!/n!` for a game of `n` players,
/// built incrementally in exact rationals.
fn subset_weights(n: usize) -> Vec<Rational> {
    // w[0] = (n-1)!/n! = 1/n; w[s+1] = w[s] * (s+1)/(n-1-s)
    let mut w = Vec::with_capacity(n);
    let mut cur = Rational::new(1.into(), (n as i64).into());
    w.push(cur.clone());
    for s in 0..n.saturating_sub(1) {
        cur *= Rational::new(((s + 1) as i64).into(), ((n - 1 - s) as i64).into());
        w.push(cur.clone());
    }
    w
}

/// Shapley value of the unpartitioned game.
pub fn shapley(v: &WorthFunction) -> Result<PayoffVector> {
    let n = v.n();
    let weights = subset_weights(n);
    let full = PlayerSet::full(n);
    let payoffs: Vec<Rational> = (0..n)
        .into_par_iter()
        .map(|i| {
            let comp = full.without(i);
            let mut acc = Rational::zero();
            let m = comp.0;
            let mut s = 0u32;
            loop {
                let set = PlayerSet(s);
                let marginal = v.worth(set.with(i)) - v.worth(set);
                if !marginal.is_zero() {
                    acc += &weights[set.len()] * marginal;
                }
                if s == m {
                    break;
                }
                s = s.wrapping_sub(m) & m;
            }
            acc
        })
        .collect();
    Ok(PayoffVector(payoffs))
}

/// Shapley value of the reduced game on `block`, as (player, payoff) pairs
/// in ascending player order.
pub fn shapley_of_block(v: &WorthFunction, block: PlayerSet) -> Vec<(usize, Rational)> {
    let nb = block.len();
    if nb == 0 {
        return Vec::new();
    }
    let weights = subset_weights(nb);
    block
        .iter()
        .map(|i| {
            let comp = block.without(i);
            let mut acc = Rational::zero();
            let m = comp.0;
            let mut s = 0u32;
            loop {
                let set = PlayerSet(s);
                let marginal = v.worth(set.with(i)) - v.worth(set);
                if !marginal.is_zero() {
                    acc += &weights[set.len()] * marginal;
                }
                if s == m {
                    break;
                }
                s = s.wrapping_sub(m) & m;
            }
            (i, acc)
        })
        .collect()
}

/// Aumann-Drèze value: Shapley of each block's reduced game.
pub fn ad_value(v: &WorthFunction, p: &Partition) -> Result<PayoffVector> {
    check_partition(v, p)?;
    let mut out = PayoffVector::zeros(v.n());
    for block in p.blocks() {
        for (i, payoff) in shapley_of_block(v, *block) {
            out.0[i] = payoff;
        }
    }
    Ok(out)
}

/// χ value: `χ_i = φ_i + w_i / w(C(i)) · (v(C(i)) − φ_{C(i)})` with φ the
/// Shapley value of the unpartitioned game.
pub fn chi_value(v: &WorthFunction, p: &Partition, w: &WeightVector) -> Result<PayoffVector> {
    check_partition(v, p)?;
    check_weights(v, w)?;
    let phi = shapley(v)?;
    Ok(chi_from_shapley(v, p, w, &phi))
}

fn chi_from_shapley(
    v: &WorthFunction,
    p: &Partition,
    w: &WeightVector,
    phi: &PayoffVector,
) -> PayoffVector {
    let mut out = PayoffVector::zeros(v.n());
    for block in p.blocks() {
        let surplus = v.worth(*block) - phi.sum_over(*block);
        let wsum = w.sum_over(*block);
        for i in block.iter() {
            out.0[i] = &phi[i] + w.get(i) / &wsum * &surplus;
        }
    }
    out
}

/// Payoffs of the members of `block` if it forms, under `kind`
/// (coalition independence: only the block itself matters).
pub fn payoffs_in_block(
    v: &WorthFunction,
    block: PlayerSet,
    kind: ValueKind,
    w: &WeightVector,
    grand_shapley: Option<&PayoffVector>,
) -> Result<Vec<(usize, Rational)>> {
    match kind {
        ValueKind::Shapley => Err(CoreError::invalid(
            "blocking analysis requires a partition value (ad or chi)",
        )),
        ValueKind::AumannDreze => Ok(shapley_of_block(v, block)),
        ValueKind::Chi => {
            let owned;
            let phi = match grand_shapley {
                Some(p) => p,
                None => {
                    owned = shapley(v)?;
                    &owned
                }
            };
            let surplus = v.worth(block) - phi.sum_over(block);
            let wsum = w.sum_over(block);
            Ok(block
                .iter()
                .map(|i| (i, &phi[i] + w.get(i) / &wsum * &surplus))
                .collect())
        }
    }
}

/// Dispatch: compute the payoff vector for a partition under `kind`.
pub fn value_for(
    v: &WorthFunction,
    p: &Partition,
    kind: ValueKind,
    w: &WeightVector,
) -> Result<PayoffVector> {
    match kind {
        ValueKind::Shapley => shapley(v),
        ValueKind::AumannDreze => ad_value(v, p),
        ValueKind::Chi => chi_value(v, p, w),
    }
}

fn check_partition(v: &WorthFunction, p: &Partition) -> Result<()> {
    if p.n() != v.n() {
        return Err(CoreError::invalid(format!(
            "partition over {} players but game has {}",
            p.n(),
            v.n()
        )));
    }
    Ok(())
}

fn check_weights(v: &WorthFunction, w: &WeightVector) -> Result<()> {
    if w.len() != v.n() {
        return Err(CoreError::invalid(format!(
            "{} weights for {} players",
            w.len(),
            v.n()
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Core and blocking
// ---------------------------------------------------------------------------

/// Every coalition `K` whose worth exceeds its payoff: `v(K) > Σ_{i∈K} φ_i`
/// (exact comparison). Empty result together with `Σφ = v(N)` certifies that
/// `φ` lies in the core.
pub fn core_violations(v: &WorthFunction, phi: &PayoffVector) -> Result<Vec<PlayerSet>> {
    if phi.len() != v.n() {
        return Err(CoreError::invalid("payoff vector length mismatch"));
    }
    let n = v.n();
    let mut out = Vec::new();
    for m in 1u32..1 << n {
        let s = PlayerSet(m);
        if *v.worth(s) > phi.sum_over(s) {
            out.push(s);
        }
    }
    Ok(out)
}

/// Every coalition `C` that blocks partition `p` under `kind`: all members
/// of `C` strictly improve over their current payoff when `C` forms
/// (Definition 5; ties never block). Candidates are scanned in ascending
/// bitmask order, which is also the "first-choice" trajectory order.
pub fn blocking_coalitions(
    v: &WorthFunction,
    p: &Partition,
    kind: ValueKind,
    w: &WeightVector,
) -> Result<Vec<PlayerSet>> {
    let current = value_for(v, p, kind, w)?;
    blocking_coalitions_against(v, &current, kind, w)
}

/// Blocking scan against a precomputed current payoff vector.
pub fn blocking_coalitions_against(
    v: &WorthFunction,
    current: &PayoffVector,
    kind: ValueKind,
    w: &WeightVector,
) -> Result<Vec<PlayerSet>> {
    check_weights(v, w)?;
    let grand = match kind {
        ValueKind::Chi => Some(shapley(v)?),
        _ => None,
    };
    let n = v.n();
    let mut out = Vec::new();
    for m in 1u32..1 << n {
        let c = PlayerSet(m);
        let new = payoffs_in_block(v, c, kind, w, grand.as_ref())?;
        if new.iter().all(|(i, pay)| *pay > current[*i]) {
            out.push(c);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Axioms
// ---------------------------------------------------------------------------

/// Is `i` a null player of the full game: `v(K ∪ {i}) = v(K)` for all `K`?
pub fn is_global_null(v: &WorthFunction, i: usize) -> bool {
    let comp = PlayerSet::full(v.n()).without(i);
    let m = comp.0;
    let mut s = 0u32;
    loop {
        let set = PlayerSet(s);
        if v.worth(set.with(i)) != v.worth(set) {
            return false;
        }
        if s == m {
            return true;
        }
        s = s.wrapping_sub(m) & m;
    }
}

/// Is `i` a null player within the reduced game on `block` (which must
/// contain `i`): `v(K ∪ {i}) = v(K)` for all `K ⊆ block∖{i}`?
pub fn is_block_null(v: &WorthFunction, block: PlayerSet, i: usize) -> bool {
    debug_assert!(block.contains(i));
    let comp = block.without(i);
    let m = comp.0;
    let mut s = 0u32;
    loop {
        let set = PlayerSet(s);
        if v.worth(set.with(i)) != v.worth(set) {
            return false;
        }
        if s == m {
            return true;
        }
        s = s.wrapping_sub(m) & m;
    }
}

/// Are `i` and `j` symmetric in the full game:
/// `v(K ∪ {i}) = v(K ∪ {j})` for all `K ⊆ N∖{i,j}`?
pub fn are_symmetric(v: &WorthFunction, i: usize, j: usize) -> bool {
    let comp = PlayerSet::full(v.n()).without(i).without(j);
    let m = comp.0;
    let mut s = 0u32;
    loop {
        let set = PlayerSet(s);
        if v.worth(set.with(i)) != v.worth(set.with(j)) {
            return false;
        }
        if s == m {
            return true;
        }
        s = s.wrapping_sub(m) & m;
    }
}

/// Per-axiom verdicts for a payoff vector on a partitioned game.
///
/// * **CE** — coalition efficiency: `Σ_{i∈C} φ_i = v(C)` per block.
/// * **CS** — coalition-restricted symmetry: players of the same block that
///   are symmetric in the full game receive equal payoffs.
/// * **NP** — null player: a player that is null *within its block's reduced
///   game* receives 0. (A-D always satisfies this; χ may not — a player can
///   be paid for outside options.)
/// * **GNP** — grand-coalition null player: when the partition is `{N}`,
///   players null in the full game receive 0; vacuous otherwise.
#[derive(Clone, Debug, Default)]
pub struct AxiomReport {
    /// (block, payoff sum, worth) for each failing block.
    pub ce_violations: Vec<(PlayerSet, Rational, Rational)>,
    /// (i, j) same-block symmetric pairs with unequal payoffs.
    pub cs_violations: Vec<(usize, usize)>,
    /// (i, payoff) block-null players paid nonzero.
    pub np_violations: Vec<(usize, Rational)>,
    /// (i, payoff) global-null players paid nonzero at the grand partition.
    pub gnp_violations: Vec<(usize, Rational)>,
}

impl AxiomReport {
    pub fn ce(&self) -> bool {
        self.ce_violations.is_empty()
    }
    pub fn cs(&self) -> bool {
        self.cs_violations.is_empty()
    }
    pub fn np(&self) -> bool {
        self.np_violations.is_empty()
    }
    pub fn gnp(&self) -> bool {
        self.gnp_violations.is_empty()
    }
    pub fn all_pass(&self) -> bool {
        self.ce() && self.cs() && self.np() && self.gnp()
    }
}

/// Check CE, CS, NP, and GNP for a payoff vector on `(v, p)`.
///
/// Additivity and weighted splitting need extra inputs; see
/// [`check_additivity`] and [`check_wsp`].
pub fn check_axioms(v: &WorthFunction, p: &Partition, phi: &PayoffVector) -> Result<AxiomReport> {
    check_partition(v, p)?;
    if phi.len() != v.n() {
        return Err(CoreError::invalid("payoff vector length mismatch"));
    }
    let mut report = AxiomReport::default();
    for block in p.blocks() {
        let sum = phi.sum_over(*block);
        let worth = v.worth(*block).clone();
        if sum != worth {
            report.ce_violations.push((*block, sum, worth));
        }
        let members: Vec<usize> = block.iter().collect();
        for (a, &i) in members.iter().enumerate() {
            for &j in &members[a + 1..] {
                if are_symmetric(v, i, j) && phi[i] != phi[j] {
                    report.cs_violations.push((i, j));
                }
            }
        }
        for &i in &members {
            if is_block_null(v, *block, i) && !phi[i].is_zero() {
                report.np_violations.push((i, phi[i].clone()));
            }
        }
    }
    if p.is_grand() {
        for i in 0..v.n() {
            if is_global_null(v, i) && !phi[i].is_zero() {
                report.gnp_violations.push((i, phi[i].clone()));
            }
        }
    }
    Ok(report)
}

/// ADD checker: `value(v + v') = value(v) + value(v')` pointwise, exactly.
pub fn check_additivity(
    v1: &WorthFunction,
    v2: &WorthFunction,
    p: &Partition,
    kind: ValueKind,
    w: &WeightVector,
) -> Result<bool> {
    let sum_game = v1.add(v2)?;
    let lhs = value_for(&sum_game, p, kind, w)?;
    let a = value_for(v1, p, kind, w)?;
    let b = value_for(v2, p, kind, w)?;
    Ok((0..v1.n()).all(|i| lhs[i] == &a[i] + &b[i]))
}

/// One WSP violation: members `i, j` of the same block of the finer
/// partition whose payoff-difference-to-weight ratios differ.
#[derive(Clone, Debug)]
pub struct WspViolation {
    pub i: usize,
    pub j: usize,
    pub ratio_i: Rational,
    pub ratio_j: Rational,
}

/// WSP checker for the χ value: if `fine` refines `coarse`, then for all
/// `i, j` in the same block of `fine`,
/// `(χ_i(coarse) − χ_i(fine))/w_i = (χ_j(coarse) − χ_j(fine))/w_j`.
pub fn check_wsp(
    v: &WorthFunction,
    coarse: &Partition,
    fine: &Partition,
    w: &WeightVector,
) -> Result<Vec<WspViolation>> {
    if !fine.is_finer_than(coarse) {
        return Err(CoreError::invalid(
            "WSP requires the second partition to refine the first",
        ));
    }
    let phi = shapley(v)?;
    let at_coarse = chi_from_shapley(v, coarse, w, &phi);
    let at_fine = chi_from_shapley(v, fine, w, &phi);
    let mut out = Vec::new();
    for block in fine.blocks() {
        let members: Vec<usize> = block.iter().collect();
        for (a, &i) in members.iter().enumerate() {
            let ratio_i = (&at_coarse[i] - &at_fine[i]) / w.get(i);
            for &j in &members[a + 1..] {
                let ratio_j = (&at_coarse[j] - &at_fine[j]) / w.get(j);
                if ratio_i != ratio_j {
                    out.push(WspViolation {
                        i,
                        j,
                        ratio_i: ratio_i.clone(),
                        ratio_j,
                    });
                }
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Formatting helpers (names supplied externally)
// ---------------------------------------------------------------------------

/// `"p1 n1"` — members of a set by name, ascending index, space-separated.
pub fn format_player_set(names: &[String], s: PlayerSet) -> String {
    s.iter()
        .map(|i| names[i].as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

/// `"{p1 n1 | p2 n2}"` — canonical bracket notation for a partition.
pub fn format_partition(names: &[String], p: &Partition) -> String {
    let inner = p
        .blocks()
        .iter()
        .map(|b| format_player_set(names, *b))
        .collect::<Vec<_>>()
        .join(" | ");
    format!("{{{inner}}}")
}
