//! Worth-function construction for peer-assisted service games.
//!
//! Two input modes:
//!
//! * **Cost curves** ([`PeerGameSpec`]): each provider `p` has a cost curve
//!   `Ω_p^η` on `[0,1]`; a coalition of provider `p` with `k` of the `η`
//!   peers is worth the cost reduction `Ω_p^η(0) − Ω_p^η(k/η)`, and
//!   multi-provider coalitions take the best assignment of their peers to
//!   their providers. Peers are interchangeable, so the optimum is a
//!   dynamic program over peer *counts* ([`AllocationTable`]).
//! * **Explicit worth table** ([`WorthTableSpec`]): the single-provider
//!   worths `v̂` are listed directly (peers need not be interchangeable);
//!   multi-provider worths are completed by enumerating peer-to-provider
//!   assignments.
//!
//! In both modes every peer of a coalition is attached to exactly one of the
//! coalition's providers (providers may sit idle); coalitions without a
//! provider are worth 0.

use crate::expr::CostCurve;
use crate::game_core::{PlayerSet, Rational, Role, WorthFunction};
use crate::{rat, rational_from_f64_sig, CoreError, Result};
use num_traits::{Signed, Zero};
use std::collections::BTreeMap;

/// Guard for the table-mode assignment enumeration (`m^k` assignments).
const MAX_ASSIGNMENTS: u64 = 10_000_000;

/// A finite peer-assisted game: providers with cost curves and η peers.
///
/// Player universe of the derived [`WorthFunction`]: providers first (in the
/// order given), then peers `n1..nη`.
#[derive(Clone, Debug)]
pub struct PeerGameSpec {
    providers: Vec<(String, CostCurve)>,
    eta: usize,
    sig_digits: u32,
    warnings: Vec<String>,
}

impl PeerGameSpec {
    /// Validate and build. Hard errors: no providers, `eta == 0`, unbound
    /// curve parameters, curves not evaluable or negative on the grid
    /// `{0, 1/η, …, 1}`. Increasing stretches only *warn* (see
    /// [`PeerGameSpec::warnings`]): worth tables like the worked example
    /// implicitly contain maintenance offsets that break monotonicity.
    pub fn new(providers: Vec<(String, CostCurve)>, eta: usize) -> Result<Self> {
        if providers.is_empty() {
            return Err(CoreError::invalid("at least one provider is required"));
        }
        if eta == 0 {
            return Err(CoreError::invalid("eta must be at least 1"));
        }
        for (id, curve) in &providers {
            if let Some(name) = curve.free_params().into_iter().next() {
                return Err(CoreError::invalid(format!(
                    "provider `{id}`: unbound parameter `{name}` in cost curve"
                )));
            }
            curve.validate_unit_domain().map_err(|e| {
                CoreError::invalid(format!("provider `{id}`: {e}"))
            })?;
        }
        let mut spec = PeerGameSpec {
            providers,
            eta,
            sig_digits: 12,
            warnings: Vec::new(),
        };
        let mut warnings = Vec::new();
        for p in 0..spec.providers.len() {
            let mut prev = spec.omega(p, 0)?;
            if prev.is_negative() {
                return Err(CoreError::invalid(format!(
                    "provider `{}`: cost is negative at x = 0",
                    spec.providers[p].0
                )));
            }
            for k in 1..=eta {
                let cur = spec.omega(p, k)?;
                if cur.is_negative() {
                    return Err(CoreError::invalid(format!(
                        "provider `{}`: cost is negative at x = {k}/{eta}",
                        spec.providers[p].0
                    )));
                }
                if cur > prev {
                    warnings.push(format!(
                        "provider `{}`: cost increases between x = {}/{eta} and x = {k}/{eta}",
                        spec.providers[p].0,
                        k - 1
                    ));
                }
                prev = cur;
            }
        }
        spec.warnings = warnings;
        Ok(spec)
    }

    /// Override the significant digits used when a curve value is not an
    /// exact rational (default 12).
    pub fn with_sig_digits(mut self, sig: u32) -> Self {
        self.sig_digits = sig;
        self
    }

    pub fn provider_count(&self) -> usize {
        self.providers.len()
    }

    pub fn provider_ids(&self) -> Vec<&str> {
        self.providers.iter().map(|(id, _)| id.as_str()).collect()
    }

    pub fn eta(&self) -> usize {
        self.eta
    }

    /// Nonincreasing-cost grid violations found at construction.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Total players in the derived game.
    pub fn player_count(&self) -> usize {
        self.providers.len() + self.eta
    }

    /// `Ω_p^η(k/η)` as a rational: exact when the expression evaluates
    /// rationally, else the double rounded to `sig_digits` significant
    /// digits.
    pub fn omega(&self, provider: usize, k: usize) -> Result<Rational> {
        let curve = &self.providers[provider].1;
        let x = rat(k as i64, self.eta as i64);
        if let Some(exact) = curve.eval_exact(&x) {
            return Ok(exact);
        }
        let value = curve.eval(k as f64 / self.eta as f64)?;
        rational_from_f64_sig(value, self.sig_digits)
    }

    /// `v̂` of provider `p` with `k` assisting peers:
    /// `Ω_p^η(0) − Ω_p^η(k/η)`.
    pub fn provider_gain(&self, provider: usize, k: usize) -> Result<Rational> {
        Ok(self.omega(provider, 0)? - self.omega(provider, k)?)
    }

    /// Providers occupy indices `0..m`, peers `m..m+η`.
    fn split(&self, s: PlayerSet) -> (Vec<usize>, usize) {
        let m = self.providers.len();
        let provs: Vec<usize> = s.iter().filter(|&i| i < m).collect();
        let peers = s.iter().filter(|&i| i >= m).count();
        (provs, peers)
    }
}

/// Single-provider worth `v̂(S)`: the cost reduction the peers of
/// `S` produce for its provider; 0 without a provider.
///
/// Errors if `S` contains more than one provider — use [`coalescent_worth`].
pub fn hat_worth(spec: &PeerGameSpec, s: PlayerSet) -> Result<Rational> {
    let (provs, peers) = spec.split(s);
    match provs.len() {
        0 => Ok(Rational::zero()),
        1 => spec.provider_gain(provs[0], peers),
        _ => Err(CoreError::invalid(
            "hat_worth requires at most one provider; use coalescent_worth",
        )),
    }
}

/// Coalescent worth `v(S)`: the best assignment of the peers of `S`
/// to the providers of `S` (each peer to exactly one provider), by dynamic
/// programming over peer counts. Equals [`hat_worth`] when `|S∩Z| ≤ 1`.
pub fn coalescent_worth(spec: &PeerGameSpec, s: PlayerSet) -> Result<Rational> {
    let (provs, peers) = spec.split(s);
    if provs.is_empty() {
        return Ok(Rational::zero());
    }
    // gains[j][c]: v̂ of the j-th provider of S with c peers
    let mut gains = Vec::with_capacity(provs.len());
    for &p in &provs {
        let row: Result<Vec<Rational>> =
            (0..=peers).map(|c| spec.provider_gain(p, c)).collect();
        gains.push(row?);
    }
    Ok(assign_exactly(&gains, peers)
        .expect("exact assignment always feasible with ≥1 provider"))
}

/// Maximum of `Σ_j gains[j][c_j]` over `Σ c_j = k` (every peer assigned).
/// `None` iff `k > 0` and there are no providers.
fn assign_exactly(gains: &[Vec<Rational>], k: usize) -> Option<Rational> {
    let mut best: Vec<Option<Rational>> = vec![None; k + 1];
    best[0] = Some(Rational::zero());
    for row in gains {
        let mut next: Vec<Option<Rational>> = vec![None; k + 1];
        for used in 0..=k {
            let Some(prev) = &best[used] else { continue };
            for c in 0..=k - used {
                let cand = prev + &row[c];
                let slot = &mut next[used + c];
                if slot.as_ref().is_none_or(|cur| cand > *cur) {
                    *slot = Some(cand);
                }
            }
        }
        best = next;
    }
    best.pop().unwrap()
}

/// One row of an [`AllocationTable`]: the optimal peer split for a provider
/// subset and peer count.
#[derive(Clone, Debug, PartialEq)]
pub struct AllocationEntry {
    /// `(provider index, peers assigned)` for each provider of the subset,
    /// ascending by provider index. Lexicographically smallest among optima.
    pub counts: Vec<(usize, usize)>,
    pub worth: Rational,
}

/// Optimal allocations for every provider subset and every peer count
/// `k ∈ {0..η}` — the `𝒫*` table behind the coalescent worth.
#[derive(Clone, Debug)]
pub struct AllocationTable {
    providers: Vec<String>,
    eta: usize,
    /// `entries[pmask][k]`, `pmask` a bitmask over provider indices.
    entries: Vec<Vec<AllocationEntry>>,
}

impl AllocationTable {
    pub fn providers(&self) -> &[String] {
        &self.providers
    }

    pub fn eta(&self) -> usize {
        self.eta
    }

    /// Entry for a subset of providers (bitmask over provider indices,
    /// *not* the full player universe) and a peer count.
    pub fn entry(&self, provider_subset: PlayerSet, k: usize) -> Result<&AllocationEntry> {
        if provider_subset.0 as usize >= self.entries.len() {
            return Err(CoreError::invalid("provider subset out of range"));
        }
        if k > self.eta {
            return Err(CoreError::invalid(format!(
                "peer count {k} exceeds eta = {}",
                self.eta
            )));
        }
        Ok(&self.entries[provider_subset.0 as usize][k])
    }

    pub fn worth(&self, provider_subset: PlayerSet, k: usize) -> Result<&Rational> {
        Ok(&self.entry(provider_subset, k)?.worth)
    }
}

/// Tabulate the optimal allocation for every provider subset and peer count.
///
/// Ties prefer the lexicographically smallest peer-count vector (by provider
/// index), found by a suffix DP plus forward reconstruction that takes the
/// smallest count at each provider.
pub fn allocation_table(spec: &PeerGameSpec) -> Result<AllocationTable> {
    let m = spec.provider_count();
    let eta = spec.eta();
    // gains[p][c] for every provider of the spec
    let mut gains = Vec::with_capacity(m);
    for p in 0..m {
        let row: Result<Vec<Rational>> = (0..=eta).map(|c| spec.provider_gain(p, c)).collect();
        gains.push(row?);
    }
    let mut entries = Vec::with_capacity(1 << m);
    for pmask in 0u32..1 << m {
        let members: Vec<usize> = PlayerSet(pmask).iter().collect();
        let mut per_k = Vec::with_capacity(eta + 1);
        for k in 0..=eta {
            per_k.push(optimal_allocation(&gains, &members, k));
        }
        entries.push(per_k);
    }
    Ok(AllocationTable {
        providers: spec.provider_ids().iter().map(|s| s.to_string()).collect(),
        eta,
        entries,
    })
}

/// Lexicographically-smallest optimal split of exactly `k` peers among
/// `members` (provider indices into `gains`). Empty member list: worth 0
/// (peers stand alone).
fn optimal_allocation(gains: &[Vec<Rational>], members: &[usize], k: usize) -> AllocationEntry {
    if members.is_empty() {
        return AllocationEntry {
            counts: Vec::new(),
            worth: Rational::zero(),
        };
    }
    let m = members.len();
    // suffix[j][r]: best worth of assigning exactly r peers to members[j..]
    let mut suffix: Vec<Vec<Option<Rational>>> = vec![vec![None; k + 1]; m + 1];
    suffix[m][0] = Some(Rational::zero());
    for j in (0..m).rev() {
        let row = &gains[members[j]];
        for r in 0..=k {
            let mut best: Option<Rational> = None;
            for c in 0..=r {
                if let Some(rest) = &suffix[j + 1][r - c] {
                    let cand = &row[c] + rest;
                    if best.as_ref().is_none_or(|b| cand > *b) {
                        best = Some(cand);
                    }
                }
            }
            suffix[j][r] = best;
        }
    }
    let worth = suffix[0][k].clone().expect("k peers always assignable");
    // forward reconstruction: smallest count at each provider
    let mut counts = Vec::with_capacity(m);
    let mut remaining = k;
    for j in 0..m {
        let row = &gains[members[j]];
        let target = suffix[j][remaining].as_ref().unwrap();
        let mut chosen = remaining;
        for c in 0..=remaining {
            if let Some(rest) = &suffix[j + 1][remaining - c] {
                if &row[c] + rest == *target {
                    chosen = c;
                    break;
                }
            }
        }
        counts.push((members[j], chosen));
        remaining -= chosen;
    }
    AllocationEntry { counts, worth }
}

/// Dense worth function over providers-then-peers with
/// `v(S) = coalescent_worth(S)` for every subset (via the allocation
/// table — peers are interchangeable here by construction).
pub fn build_worth_function(spec: &PeerGameSpec) -> Result<WorthFunction> {
    let m = spec.provider_count();
    let n = spec.player_count();
    if n > crate::game_core::DEFAULT_MAX_PLAYERS {
        return Err(CoreError::capacity(format!(
            "{m} providers + {} peers exceeds the {}-player limit",
            spec.eta(),
            crate::game_core::DEFAULT_MAX_PLAYERS
        )));
    }
    let table = allocation_table(spec)?;
    let mut names: Vec<String> = spec.provider_ids().iter().map(|s| s.to_string()).collect();
    names.extend((1..=spec.eta()).map(|i| format!("n{i}")));
    let mut roles = vec![Role::Provider; m];
    roles.extend(vec![Role::Peer; spec.eta()]);
    let provider_bits = (1u32 << m) - 1;
    let values: Result<Vec<Rational>> = (0u32..1 << n)
        .map(|mask| {
            let pmask = PlayerSet(mask & provider_bits);
            let k = (mask >> m).count_ones() as usize;
            Ok(table.worth(pmask, k)?.clone())
        })
        .collect();
    WorthFunction::new(names, roles, values?)
}

/// Explicit worth-table input: named providers and peers plus the
/// single-provider worths `v̂` (coalitions written as space-separated player
/// names). Multi-provider worths are *not* accepted — they follow from the
/// optimal assignment and are completed by
/// [`build_worth_from_table`].
#[derive(Clone, Debug)]
pub struct WorthTableSpec {
    providers: Vec<String>,
    peers: Vec<String>,
    /// single-provider worths keyed by subset mask over the full universe
    vhat: BTreeMap<u32, Rational>,
}

impl WorthTableSpec {
    pub fn new<P, Q, K>(
        providers: impl IntoIterator<Item = P>,
        peers: impl IntoIterator<Item = Q>,
        entries: impl IntoIterator<Item = (K, Rational)>,
    ) -> Result<Self>
    where
        P: Into<String>,
        Q: Into<String>,
        K: AsRef<str>,
    {
        let providers: Vec<String> = providers.into_iter().map(Into::into).collect();
        let peers: Vec<String> = peers.into_iter().map(Into::into).collect();
        if providers.is_empty() {
            return Err(CoreError::invalid("at least one provider is required"));
        }
        let mut index = BTreeMap::new();
        for (i, name) in providers.iter().chain(peers.iter()).enumerate() {
            if name.is_empty() {
                return Err(CoreError::invalid("empty player name"));
            }
            if index.insert(name.clone(), i).is_some() {
                return Err(CoreError::invalid(format!("duplicate player name `{name}`")));
            }
        }
        let m = providers.len();
        let mut vhat = BTreeMap::new();
        for (key, value) in entries {
            let key = key.as_ref();
            let mut mask = PlayerSet::EMPTY;
            for token in key.split_whitespace() {
                let &i = index.get(token).ok_or_else(|| CoreError::UnknownIdentifier {
                    name: token.to_string(),
                })?;
                if mask.contains(i) {
                    return Err(CoreError::invalid(format!(
                        "coalition `{key}`: player `{token}` listed twice"
                    )));
                }
                mask = mask.with(i);
            }
            if mask.is_empty() {
                return Err(CoreError::invalid("empty coalition key"));
            }
            let n_prov = mask.iter().filter(|&i| i < m).count();
            if n_prov > 1 {
                return Err(CoreError::invalid(format!(
                    "coalition `{key}` has {n_prov} providers; only single-provider \
                     worths may be listed — multi-provider worths follow from the \
                     optimal assignment"
                )));
            }
            let peer_count = mask.len() - n_prov;
            if (n_prov == 0 || peer_count == 0) && !value.is_zero() {
                return Err(CoreError::invalid(format!(
                    "coalition `{key}` must have worth 0 (a provider and at least \
                     one peer are needed for any cost reduction)"
                )));
            }
            if value.is_zero() {
                continue; // implied default
            }
            if vhat.insert(mask.0, value).is_some() {
                return Err(CoreError::invalid(format!(
                    "coalition `{key}` listed twice"
                )));
            }
        }
        Ok(WorthTableSpec {
            providers,
            peers,
            vhat,
        })
    }

    pub fn provider_count(&self) -> usize {
        self.providers.len()
    }

    pub fn peer_count(&self) -> usize {
        self.peers.len()
    }

    /// `v̂(S)` for a single-provider (or provider-free) subset.
    fn vhat(&self, mask: u32) -> Rational {
        self.vhat.get(&mask).cloned().unwrap_or_else(Rational::zero)
    }
}

/// Complete a [`WorthTableSpec`] into a dense [`WorthFunction`]: listed `v̂`
/// for single-provider coalitions, assignment-enumeration optimum
/// for multi-provider ones, 0 without a provider. Peers here need *not* be
/// interchangeable, so every peer-to-provider assignment is enumerated
/// (guarded: at most 10^7 assignments per coalition).
pub fn build_worth_from_table(spec: &WorthTableSpec) -> Result<WorthFunction> {
    let m = spec.provider_count();
    let n = m + spec.peer_count();
    if n > crate::game_core::DEFAULT_MAX_PLAYERS {
        return Err(CoreError::capacity(format!(
            "{n} players exceeds the {}-player limit",
            crate::game_core::DEFAULT_MAX_PLAYERS
        )));
    }
    let mut values = Vec::with_capacity(1 << n);
    for mask in 0u32..1 << n {
        let s = PlayerSet(mask);
        let provs: Vec<usize> = s.iter().filter(|&i| i < m).collect();
        let peers: Vec<usize> = s.iter().filter(|&i| i >= m).collect();
        let worth = match provs.len() {
            0 => Rational::zero(),
            1 => spec.vhat(mask),
            np => {
                let combos = (np as u64).checked_pow(peers.len() as u32);
                if combos.is_none_or(|c| c > MAX_ASSIGNMENTS) {
                    return Err(CoreError::capacity(format!(
                        "coalition with {np} providers and {} peers needs more than \
                         {MAX_ASSIGNMENTS} assignments",
                        peers.len()
                    )));
                }
                best_assignment(spec, &provs, &peers)
            }
        };
        values.push(worth);
    }
    let names: Vec<String> = spec
        .providers
        .iter()
        .chain(spec.peers.iter())
        .cloned()
        .collect();
    let mut roles = vec![Role::Provider; m];
    roles.extend(vec![Role::Peer; spec.peer_count()]);
    WorthFunction::new(names, roles, values)
}

/// Max over assignments of every peer to exactly one provider of
/// `Σ_p v̂({p} ∪ assigned(p))`.
fn best_assignment(spec: &WorthTableSpec, provs: &[usize], peers: &[usize]) -> Rational {
    let np = provs.len();
    let k = peers.len();
    let mut best: Option<Rational> = None;
    let mut digits = vec![0usize; k];
    loop {
        let mut masks = vec![0u32; np];
        for (peer_pos, &d) in digits.iter().enumerate() {
            masks[d] |= 1 << peers[peer_pos];
        }
        let total: Rational = provs
            .iter()
            .zip(&masks)
            .map(|(&p, &pm)| spec.vhat(pm | (1 << p)))
            .sum();
        if best.as_ref().is_none_or(|b| total > *b) {
            best = Some(total);
        }
        // next assignment in mixed-radix order
        let mut pos = 0;
        loop {
            if pos == k {
                return best.unwrap();
            }
            digits[pos] += 1;
            if digits[pos] < np {
                break;
            }
            digits[pos] = 0;
            pos += 1;
        }
    }
}

/// Verdict of the superadditivity scan (Definition 4).
#[derive(Clone, Debug, PartialEq)]
pub enum Superadditivity {
    Holds,
    /// First disjoint pair found with `v(S∪T) < v(S) + v(T)`.
    Fails { s: PlayerSet, t: PlayerSet },
}

impl Superadditivity {
    pub fn holds(&self) -> bool {
        matches!(self, Superadditivity::Holds)
    }
}

/// Exhaustive superadditivity check: `v(S∪T) ≥ v(S) + v(T)` for all
/// disjoint nonempty `S`, `T`. Exponential (3^n subset pairs) — intended
/// for the small games this crate builds.
pub fn is_superadditive(v: &WorthFunction) -> Superadditivity {
    let n = v.n();
    for smask in 1u32..1 << n {
        let s = PlayerSet(smask);
        let comp = PlayerSet::full(n).difference(s);
        let cm = comp.0;
        let mut tmask = 0u32;
        loop {
            if tmask != 0 {
                let t = PlayerSet(tmask);
                if *v.worth(s.union(t)) < v.worth(s) + v.worth(t) {
                    return Superadditivity::Fails { s, t };
                }
            }
            if tmask == cm {
                break;
            }
            tmask = tmask.wrapping_sub(cm) & cm;
        }
    }
    Superadditivity::Holds
}
