//! The proposal game equivalent to the matching market.
//!
//! Each CU either proposes to one D2D pair at its bargained allocation or
//! abstains (`None`, the b0 action). Every D2D pair accepts the proposer
//! offering the largest `alpha + bias`. An accepted CU earns its bargained
//! utility minus the negotiation cost `theta`, a rejected one pays `theta`,
//! and abstaining is worth zero. Pure equilibria of this game induce exactly
//! the stable matchings.

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::channel::SystemParams;
use crate::error::{Error, Result};
use crate::matching::{is_blocking, Matching, PreferenceProfile};

/// Largest `(N + 1)^M` accepted by [`enumerate_pne`].
pub const MAX_PROFILES: u64 = 1_000_000;

/// Joint D2D selection; `None` is the abstain action b0.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionProfile {
    actions: Vec<Option<usize>>,
}

impl ActionProfile {
    pub fn new(actions: Vec<Option<usize>>, num_d2d: usize) -> Result<Self> {
        if let Some(bad) = actions.iter().flatten().find(|&&n| n >= num_d2d) {
            return Err(Error::Structural(format!("action targets D2D {bad} of {num_d2d}")));
        }
        Ok(ActionProfile { actions })
    }

    pub fn all_abstain(num_cus: usize) -> Self {
        ActionProfile {
            actions: vec![None; num_cus],
        }
    }

    /// Matched CUs propose to their partners, the rest abstain.
    pub fn from_matching(mu: &Matching) -> Self {
        ActionProfile {
            actions: (0..mu.num_cus()).map(|m| mu.cu_partner(m)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn get(&self, m: usize) -> Option<usize> {
        self.actions[m]
    }

    pub fn set(&mut self, m: usize, action: Option<usize>) {
        self.actions[m] = action;
    }

    pub fn actions(&self) -> &[Option<usize>] {
        &self.actions
    }
}

impl fmt::Display for ActionProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, a) in self.actions.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            match a {
                Some(n) => write!(f, "D{}", n + 1)?,
                None => write!(f, "b0")?,
            }
        }
        write!(f, ")")
    }
}

/// A proposal announced to D2D pair `target` with time allocation `alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Proposal {
    pub target: usize,
    pub alpha: f64,
}

/// Per-CU bias added to offered allocations when a D2D pair chooses.
///
/// The bias must never reorder two distinct bargained allocations at the
/// same D2D pair; it only separates exact ties.
#[derive(Debug, Clone, PartialEq)]
pub struct TieBreakRule {
    bias: Vec<f64>,
}

impl TieBreakRule {
    pub fn from_bias(bias: Vec<f64>) -> Self {
        TieBreakRule { bias }
    }

    /// `w_m = kappa * (M - rank(m))`, where `rank` is the position of m in
    /// `order` and `kappa` is small enough that the largest bias spread stays
    /// below half the smallest gap between distinct allocations.
    pub fn from_order(alphas: &[Vec<f64>], order: &[usize]) -> Result<Self> {
        let num_cus = alphas.len();
        let mut seen = vec![false; num_cus];
        if order.len() != num_cus || order.iter().any(|&m| m >= num_cus || std::mem::replace(&mut seen[m], true)) {
            return Err(Error::Structural(format!("tie-break order must permute 0..{num_cus}")));
        }
        let kappa = tie_break_scale(alphas);
        let mut bias = vec![0.0; num_cus];
        for (rank, &m) in order.iter().enumerate() {
            bias[m] = kappa * (num_cus - rank) as f64;
        }
        Ok(TieBreakRule { bias })
    }

    /// Lower CU index wins exact ties.
    pub fn lower_index(alphas: &[Vec<f64>]) -> Self {
        let order: Vec<usize> = (0..alphas.len()).collect();
        Self::from_order(alphas, &order).expect("identity is a permutation")
    }

    /// Tie priority from a uniformly random permutation.
    pub fn seeded<R: Rng + ?Sized>(alphas: &[Vec<f64>], rng: &mut R) -> Self {
        let mut order: Vec<usize> = (0..alphas.len()).collect();
        order.shuffle(rng);
        Self::from_order(alphas, &order).expect("shuffle is a permutation")
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    /// Whether the bias keeps every strict allocation order at every D2D pair.
    pub fn is_order_preserving(&self, alphas: &[Vec<f64>]) -> bool {
        let num_d2d = alphas.first().map_or(0, Vec::len);
        (0..num_d2d).all(|n| {
            alphas.iter().enumerate().all(|(m, row_m)| {
                alphas.iter().enumerate().all(|(k, row_k)| {
                    row_m[n] <= row_k[n] || row_m[n] + self.bias[m] > row_k[n] + self.bias[k]
                })
            })
        })
    }
}

fn tie_break_scale(alphas: &[Vec<f64>]) -> f64 {
    let mut values: Vec<f64> = alphas.iter().flatten().copied().collect();
    values.sort_by(f64::total_cmp);
    let min_gap = values
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|&g| g > 0.0)
        .min_by(f64::total_cmp);
    match min_gap {
        Some(gap) => gap / (2.0 * alphas.len().max(1) as f64),
        None => 1e-12,
    }
}

/// The CU D2D pair n accepts: the largest `alpha + bias` among those
/// proposing to n, lower index on an exact tie.
pub fn choice(n: usize, proposals: &[Option<Proposal>], bias: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (m, p) in proposals.iter().enumerate() {
        let Some(p) = p else { continue };
        if p.target != n {
            continue;
        }
        let key = p.alpha + bias[m];
        if best.is_none_or(|(_, k)| key > k) {
            best = Some((m, key));
        }
    }
    best.map(|(m, _)| m)
}

/// Matching produced when every D2D pair applies [`choice`].
pub fn matching_from_proposals(proposals: &[Option<Proposal>], num_d2d: usize, bias: &[f64]) -> Matching {
    let mut d2d_partner = vec![None; num_d2d];
    let mut cu_partner = vec![None; proposals.len()];
    for (n, slot) in d2d_partner.iter_mut().enumerate() {
        if let Some(m) = choice(n, proposals, bias) {
            *slot = Some(m);
            cu_partner[m] = Some(n);
        }
    }
    Matching::from_partner_maps(cu_partner, d2d_partner).expect("each CU proposes to at most one pair")
}

/// Proposals at the true bargained allocations.
pub fn true_proposals(b: &ActionProfile, prefs: &PreferenceProfile) -> Vec<Option<Proposal>> {
    b.actions()
        .iter()
        .enumerate()
        .map(|(m, a)| {
            a.map(|n| Proposal {
                target: n,
                alpha: prefs.alpha(m, n),
            })
        })
        .collect()
}

/// The matching associated with action profile `b`.
pub fn induced_matching(b: &ActionProfile, prefs: &PreferenceProfile) -> Matching {
    matching_from_proposals(&true_proposals(b, prefs), prefs.num_d2d(), prefs.bias())
}

/// Payoff of CU m under profile `b`.
pub fn game_utility(m: usize, b: &ActionProfile, prefs: &PreferenceProfile, sys: &SystemParams) -> f64 {
    match b.get(m) {
        None => 0.0,
        Some(n) => {
            if choice(n, &true_proposals(b, prefs), prefs.bias()) == Some(m) {
                prefs.cu_score(m, n) - sys.theta
            } else {
                -sys.theta
            }
        }
    }
}

/// The negotiation cost must be below every positive bargained utility, or
/// acceptable pairs stop looking profitable in the game.
pub fn validate_theta(prefs: &PreferenceProfile, sys: &SystemParams) -> Result<()> {
    if let Some(min) = prefs.min_positive_score() {
        if sys.theta >= min {
            return Err(Error::Config(format!(
                "theta = {} must be below the smallest positive CU utility {min}",
                sys.theta
            )));
        }
    }
    Ok(())
}

/// Whether CU m can strictly gain by switching to some other action.
pub fn has_better_reply(m: usize, b: &ActionProfile, prefs: &PreferenceProfile, sys: &SystemParams) -> bool {
    let current = game_utility(m, b, prefs, sys);
    let mut alt = b.clone();
    std::iter::once(None)
        .chain((0..prefs.num_d2d()).map(Some))
        .filter(|&a| a != b.get(m))
        .any(|a| {
            alt.set(m, a);
            game_utility(m, &alt, prefs, sys) > current
        })
}

pub fn is_pne(b: &ActionProfile, prefs: &PreferenceProfile, sys: &SystemParams) -> bool {
    (0..b.len()).all(|m| !has_better_reply(m, b, prefs, sys))
}

/// Exhaustive list of pure Nash equilibria.
pub fn enumerate_pne(prefs: &PreferenceProfile, sys: &SystemParams) -> Result<Vec<ActionProfile>> {
    validate_theta(prefs, sys)?;
    let (num_cus, num_d2d) = (prefs.num_cus(), prefs.num_d2d());
    let radix = num_d2d as u64 + 1;
    let total = (0..num_cus).try_fold(1u64, |acc, _| acc.checked_mul(radix).filter(|&t| t <= MAX_PROFILES));
    let Some(total) = total else {
        return Err(Error::Capacity(format!(
            "(N + 1)^M = {radix}^{num_cus} exceeds {MAX_PROFILES} profiles"
        )));
    };
    let mut out = Vec::new();
    for code in 0..total {
        let mut rest = code;
        let actions = (0..num_cus)
            .map(|_| {
                let digit = (rest % radix) as usize;
                rest /= radix;
                digit.checked_sub(1)
            })
            .collect();
        let b = ActionProfile { actions };
        if is_pne(&b, prefs, sys) {
            out.push(b);
        }
    }
    Ok(out)
}

struct PathBuilder<'a> {
    prefs: &'a PreferenceProfile,
    sys: &'a SystemParams,
    profile: ActionProfile,
    path: Vec<ActionProfile>,
    cap: usize,
}

impl PathBuilder<'_> {
    fn step(&mut self, m: usize, action: Option<usize>) {
        let before = game_utility(m, &self.profile, self.prefs, self.sys);
        self.profile.set(m, action);
        let after = game_utility(m, &self.profile, self.prefs, self.sys);
        assert!(after > before, "CU {m} move to {action:?} is not a better reply ({before} -> {after})");
        self.path.push(self.profile.clone());
        assert!(
            self.path.len() <= self.cap + 1,
            "better-reply path exceeded {} steps",
            self.cap
        );
    }

    fn matching(&self) -> Matching {
        induced_matching(&self.profile, self.prefs)
    }

    /// Rejected CUs and CUs held by unacceptable pairs withdraw to b0.
    fn withdraw_losers(&mut self) {
        loop {
            let proposals = true_proposals(&self.profile, self.prefs);
            let loser = (0..self.profile.len()).find(|&m| {
                self.profile.get(m).is_some_and(|n| {
                    choice(n, &proposals, self.prefs.bias()) != Some(m) || !self.prefs.is_acceptable(m, n)
                })
            });
            match loser {
                Some(m) => self.step(m, None),
                None => return,
            }
        }
    }

    /// Single CUs in turn satisfy their best blocking pair inside the
    /// sub-market; each displaced CU withdraws and continues the chain.
    fn cu_chain(&mut self, start: usize, cu_in: &[bool], d2d_in: &[bool]) {
        let mut current = Some(start);
        while let Some(c) = current {
            let mu = self.matching();
            let best = (0..self.prefs.num_d2d())
                .filter(|&n| d2d_in[n] && is_blocking(&mu, self.prefs, c, n))
                .max_by(|&a, &b| self.prefs.cu_score(c, a).total_cmp(&self.prefs.cu_score(c, b)).then(b.cmp(&a)));
            let Some(n) = best else { return };
            let displaced = mu.d2d_partner(n);
            self.step(c, Some(n));
            if let Some(d) = displaced {
                self.step(d, None);
            }
            current = displaced.filter(|&d| cu_in[d]);
        }
    }

    /// Single D2D pairs in turn attract their favourite blocking CU inside
    /// the sub-market; the pair that CU abandoned continues the chain.
    fn d2d_chain(&mut self, start: usize, cu_in: &[bool], d2d_in: &[bool]) {
        let mut current = Some(start);
        while let Some(d) = current {
            let mu = self.matching();
            let prefs = self.prefs;
            let best = (0..prefs.num_cus())
                .filter(|&m| cu_in[m] && is_blocking(&mu, prefs, m, d))
                .max_by(|&a, &b| {
                    (prefs.alpha(a, d) + prefs.bias()[a])
                        .total_cmp(&(prefs.alpha(b, d) + prefs.bias()[b]))
                        .then(b.cmp(&a))
                });
            let Some(c) = best else { return };
            let abandoned = mu.cu_partner(c);
            let rejected = mu.d2d_partner(d);
            self.step(c, Some(d));
            if let Some(r) = rejected {
                self.step(r, None);
            }
            current = abandoned.filter(|&n| d2d_in[n]);
        }
    }
}

/// Number of matchings of an `m x n` market (saturating).
fn count_matchings(num_cus: usize, num_d2d: usize) -> usize {
    let mut total: usize = 0;
    // sum_k C(M, k) C(N, k) k!
    for k in 0..=num_cus.min(num_d2d) {
        let mut term: usize = 1;
        for i in 0..k {
            term = term.saturating_mul(num_cus - i).saturating_mul(num_d2d - i) / (i + 1);
        }
        total = total.saturating_add(term);
    }
    total
}

/// Builds a better-reply path from `start` to a pure equilibrium.
///
/// Rejected CUs first withdraw. Then a set of agents on which the current
/// matching is stable grows one agent at a time; each newcomer's blocking
/// pairs are resolved by a deferred-acceptance chain inside the set. Every
/// step moves exactly one CU and strictly raises its payoff. The returned
/// path starts with `start`.
///
/// # Panics
///
/// If a step is not a strict improvement or the path exceeds
/// `M * (N + 1) * #matchings` steps; either would contradict weak acyclicity.
pub fn better_reply_path(start: &ActionProfile, prefs: &PreferenceProfile, sys: &SystemParams) -> Result<Vec<ActionProfile>> {
    validate_theta(prefs, sys)?;
    let (num_cus, num_d2d) = (prefs.num_cus(), prefs.num_d2d());
    if start.len() != num_cus {
        return Err(Error::Structural(format!("profile has {} actions for {num_cus} CUs", start.len())));
    }
    ActionProfile::new(start.actions.clone(), num_d2d)?;
    let cap = num_cus
        .saturating_mul(num_d2d + 1)
        .saturating_mul(count_matchings(num_cus, num_d2d));
    let mut builder = PathBuilder {
        prefs,
        sys,
        profile: start.clone(),
        path: vec![start.clone()],
        cap,
    };
    builder.withdraw_losers();

    let mut cu_in = vec![false; num_cus];
    let mut d2d_in = vec![false; num_d2d];
    loop {
        let mu = builder.matching();
        let blocking: Vec<(usize, usize)> = (0..num_cus)
            .flat_map(|m| (0..num_d2d).map(move |n| (m, n)))
            .filter(|&(m, n)| is_blocking(&mu, prefs, m, n))
            .collect();
        if blocking.is_empty() {
            break;
        }
        if let Some(&(m, n)) = blocking.iter().find(|&&(m, n)| cu_in[m] != d2d_in[n]) {
            if cu_in[m] {
                d2d_in[n] = true;
                builder.d2d_chain(n, &cu_in, &d2d_in);
            } else {
                cu_in[m] = true;
                builder.cu_chain(m, &cu_in, &d2d_in);
            }
        } else if let Some(&(m, _)) = blocking.iter().find(|&&(m, n)| !cu_in[m] && !d2d_in[n]) {
            // No blocking pair touches the set: absorb m with its partner.
            cu_in[m] = true;
            if let Some(p) = mu.cu_partner(m) {
                d2d_in[p] = true;
            }
        } else {
            let (m, _) = blocking[0];
            builder.cu_chain(m, &cu_in, &d2d_in);
        }
    }
    debug_assert!(is_pne(&builder.profile, prefs, sys));
    Ok(builder.path)
}
