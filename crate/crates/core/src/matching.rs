//! One-to-one matchings between CUs and D2D pairs, two-sided preferences
//! derived from bargaining outcomes, stability checks and the
//! complete-information deferred-acceptance oracle.

use std::fmt;

use crate::bargaining::nbs_alpha;
use crate::channel::{RateTable, SystemParams};
use crate::error::{Error, Result};
use crate::game::TieBreakRule;

/// Largest `M + N` accepted by [`enumerate_stable_matchings`].
pub const MAX_ENUMERATION_AGENTS: usize = 12;

/// A partial one-to-one pairing. `None` marks an unmatched agent.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Matching {
    cu_partner: Vec<Option<usize>>,
    d2d_partner: Vec<Option<usize>>,
}

impl Matching {
    pub fn empty(num_cus: usize, num_d2d: usize) -> Self {
        Matching {
            cu_partner: vec![None; num_cus],
            d2d_partner: vec![None; num_d2d],
        }
    }

    /// Builds a matching from `(cu, d2d)` pairs; every agent may appear once.
    pub fn from_pairs(num_cus: usize, num_d2d: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut mu = Matching::empty(num_cus, num_d2d);
        for &(m, n) in pairs {
            if m >= num_cus || n >= num_d2d {
                return Err(Error::Structural(format!("pair ({m}, {n}) out of range")));
            }
            if mu.cu_partner[m].is_some() || mu.d2d_partner[n].is_some() {
                return Err(Error::Structural(format!("pair ({m}, {n}) reuses a matched agent")));
            }
            mu.cu_partner[m] = Some(n);
            mu.d2d_partner[n] = Some(m);
        }
        Ok(mu)
    }

    /// Builds a matching from both partner maps, checking mutual consistency.
    pub fn from_partner_maps(cu_partner: Vec<Option<usize>>, d2d_partner: Vec<Option<usize>>) -> Result<Self> {
        for (m, p) in cu_partner.iter().enumerate() {
            if let Some(n) = *p {
                if d2d_partner.get(n).copied().flatten() != Some(m) {
                    return Err(Error::Structural(format!("CU {m} points to D2D {n} but not back")));
                }
            }
        }
        for (n, p) in d2d_partner.iter().enumerate() {
            if let Some(m) = *p {
                if cu_partner.get(m).copied().flatten() != Some(n) {
                    return Err(Error::Structural(format!("D2D {n} points to CU {m} but not back")));
                }
            }
        }
        Ok(Matching {
            cu_partner,
            d2d_partner,
        })
    }

    pub fn num_cus(&self) -> usize {
        self.cu_partner.len()
    }

    pub fn num_d2d(&self) -> usize {
        self.d2d_partner.len()
    }

    pub fn cu_partner(&self, m: usize) -> Option<usize> {
        self.cu_partner[m]
    }

    pub fn d2d_partner(&self, n: usize) -> Option<usize> {
        self.d2d_partner[n]
    }

    /// Matched `(cu, d2d)` pairs in CU order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.cu_partner
            .iter()
            .enumerate()
            .filter_map(|(m, p)| p.map(|n| (m, n)))
    }

    pub fn len(&self) -> usize {
        self.pairs().count()
    }

    pub fn is_empty(&self) -> bool {
        self.cu_partner.iter().all(Option::is_none)
    }

    /// Matches m with n, releasing whoever either was matched to.
    pub(crate) fn pair(&mut self, m: usize, n: usize) {
        if let Some(old) = self.cu_partner[m] {
            self.d2d_partner[old] = None;
        }
        if let Some(old) = self.d2d_partner[n] {
            self.cu_partner[old] = None;
        }
        self.cu_partner[m] = Some(n);
        self.d2d_partner[n] = Some(m);
    }
}

impl fmt::Display for Matching {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (m, n)) in self.pairs().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "(CU{},D{})", m + 1, n + 1)?;
        }
        write!(f, "}}")
    }
}

/// Complete-information preferences of both sides.
///
/// CU m ranks D2D pairs by its bargained utility `cu_scores[m][n]`; D2D pair
/// n ranks CUs by the bargained allocation `alphas[m][n]` offered to it,
/// with exact ties resolved by the per-CU bias of a [`TieBreakRule`].
#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceProfile {
    cu_scores: Vec<Vec<f64>>,
    alphas: Vec<Vec<f64>>,
    acceptability: Vec<Vec<bool>>,
    bias: Vec<f64>,
}

impl PreferenceProfile {
    /// Builds a profile from raw score tables; ties on the D2D side go to the
    /// lower CU index.
    pub fn from_scores(cu_scores: Vec<Vec<f64>>, alphas: Vec<Vec<f64>>) -> Result<Self> {
        let num_d2d = cu_scores.first().map_or(0, Vec::len);
        if cu_scores.is_empty()
            || num_d2d == 0
            || alphas.len() != cu_scores.len()
            || cu_scores.iter().chain(alphas.iter()).any(|row| row.len() != num_d2d)
        {
            return Err(Error::Structural("score tables must be non-empty and both M x N".into()));
        }
        let acceptability = cu_scores
            .iter()
            .map(|row| row.iter().map(|&s| s > 0.0).collect())
            .collect();
        let bias = TieBreakRule::lower_index(&alphas).bias().to_vec();
        Ok(PreferenceProfile {
            cu_scores,
            alphas,
            acceptability,
            bias,
        })
    }

    /// Replaces the D2D tie-break bias.
    pub fn with_tie_break(mut self, rule: &TieBreakRule) -> Result<Self> {
        if rule.bias().len() != self.num_cus() {
            return Err(Error::Structural(format!(
                "tie-break rule has {} biases for {} CUs",
                rule.bias().len(),
                self.num_cus()
            )));
        }
        self.bias = rule.bias().to_vec();
        Ok(self)
    }

    pub fn num_cus(&self) -> usize {
        self.cu_scores.len()
    }

    pub fn num_d2d(&self) -> usize {
        self.cu_scores[0].len()
    }

    pub fn cu_score(&self, m: usize, n: usize) -> f64 {
        self.cu_scores[m][n]
    }

    /// Bargained allocation `alpha*_mn`.
    pub fn alpha(&self, m: usize, n: usize) -> f64 {
        self.alphas[m][n]
    }

    pub fn alphas(&self) -> &[Vec<f64>] {
        &self.alphas
    }

    pub fn is_acceptable(&self, m: usize, n: usize) -> bool {
        self.acceptability[m][n]
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    /// Smallest strictly positive CU score, if any pair is acceptable.
    pub fn min_positive_score(&self) -> Option<f64> {
        self.cu_scores
            .iter()
            .flatten()
            .copied()
            .filter(|&s| s > 0.0)
            .min_by(f64::total_cmp)
    }

    /// `n` strictly preferred by CU m over `current` (`None`: unmatched).
    pub fn cu_prefers(&self, m: usize, n: usize, current: Option<usize>) -> bool {
        match current {
            None => self.acceptability[m][n],
            Some(c) => self.cu_scores[m][n] > self.cu_scores[m][c],
        }
    }

    /// `m` strictly preferred by D2D pair n over `current`. Every CU beats
    /// being unmatched.
    pub fn d2d_prefers(&self, n: usize, m: usize, current: Option<usize>) -> bool {
        match current {
            None => true,
            Some(c) => self.alphas[m][n] + self.bias[m] > self.alphas[c][n] + self.bias[c],
        }
    }

    /// Acceptable D2D pairs of CU m, best first, ties to the lower index.
    pub fn cu_ranking(&self, m: usize) -> Vec<usize> {
        let mut ranked: Vec<usize> = (0..self.num_d2d()).filter(|&n| self.acceptability[m][n]).collect();
        ranked.sort_by(|&a, &b| self.cu_scores[m][b].total_cmp(&self.cu_scores[m][a]).then(a.cmp(&b)));
        ranked
    }
}

/// Preferences induced by true rates through the bargaining solution.
pub fn build_preferences(rates: &RateTable, sys: &SystemParams) -> Result<PreferenceProfile> {
    sys.validate()?;
    let (num_cus, num_d2d) = (rates.num_cus(), rates.num_d2d());
    let mut cu_scores = vec![vec![0.0; num_d2d]; num_cus];
    let mut alphas = vec![vec![0.0; num_d2d]; num_cus];
    for m in 0..num_cus {
        for n in 0..num_d2d {
            let outcome = nbs_alpha(rates.relay(m, n), rates.direct(m), sys)?;
            cu_scores[m][n] = outcome.cu_utility;
            alphas[m][n] = outcome.alpha_star;
        }
    }
    PreferenceProfile::from_scores(cu_scores, alphas)
}

fn check_dims(mu: &Matching, prefs: &PreferenceProfile) -> Result<()> {
    if mu.num_cus() != prefs.num_cus() || mu.num_d2d() != prefs.num_d2d() {
        return Err(Error::Structural(format!(
            "matching is {}x{} but preferences are {}x{}",
            mu.num_cus(),
            mu.num_d2d(),
            prefs.num_cus(),
            prefs.num_d2d()
        )));
    }
    Ok(())
}

pub(crate) fn is_blocking(mu: &Matching, prefs: &PreferenceProfile, m: usize, n: usize) -> bool {
    mu.cu_partner(m) != Some(n) && prefs.cu_prefers(m, n, mu.cu_partner(m)) && prefs.d2d_prefers(n, m, mu.d2d_partner(n))
}

/// All pairs `(m, n)` that would both rather be matched to each other.
pub fn find_blocking_pairs(mu: &Matching, prefs: &PreferenceProfile) -> Result<Vec<(usize, usize)>> {
    check_dims(mu, prefs)?;
    let mut blocking = Vec::new();
    for m in 0..prefs.num_cus() {
        for n in 0..prefs.num_d2d() {
            if is_blocking(mu, prefs, m, n) {
                blocking.push((m, n));
            }
        }
    }
    Ok(blocking)
}

/// Every matched CU is with an acceptable pair.
pub fn is_individually_rational(mu: &Matching, prefs: &PreferenceProfile) -> bool {
    mu.pairs().all(|(m, n)| prefs.is_acceptable(m, n))
}

/// Individually rational with no blocking pair. A matching whose shape does
/// not fit the profile is never stable.
pub fn is_stable(mu: &Matching, prefs: &PreferenceProfile) -> bool {
    if check_dims(mu, prefs).is_err() || !is_individually_rational(mu, prefs) {
        return false;
    }
    (0..prefs.num_cus()).all(|m| (0..prefs.num_d2d()).all(|n| !is_blocking(mu, prefs, m, n)))
}

/// CU-proposing deferred acceptance over acceptable pairs only.
pub fn gale_shapley(prefs: &PreferenceProfile) -> Matching {
    let num_cus = prefs.num_cus();
    let rankings: Vec<Vec<usize>> = (0..num_cus).map(|m| prefs.cu_ranking(m)).collect();
    let mut next = vec![0usize; num_cus];
    let mut mu = Matching::empty(num_cus, prefs.num_d2d());
    let mut free: Vec<usize> = (0..num_cus).rev().collect();
    while let Some(m) = free.pop() {
        let Some(&n) = rankings[m].get(next[m]) else {
            continue;
        };
        next[m] += 1;
        let holder = mu.d2d_partner(n);
        if prefs.d2d_prefers(n, m, holder) {
            mu.pair(m, n);
            if let Some(loser) = holder {
                free.push(loser);
            }
        } else {
            free.push(m);
        }
    }
    mu
}

/// Every matching of an `num_cus x num_d2d` market, including the empty one.
pub fn enumerate_matchings(num_cus: usize, num_d2d: usize) -> Result<Vec<Matching>> {
    if num_cus + num_d2d > MAX_ENUMERATION_AGENTS {
        return Err(Error::Capacity(format!(
            "enumerating matchings needs M + N <= {MAX_ENUMERATION_AGENTS}, got {}",
            num_cus + num_d2d
        )));
    }
    fn extend(m: usize, current: &mut Matching, out: &mut Vec<Matching>) {
        if m == current.num_cus() {
            out.push(current.clone());
            return;
        }
        extend(m + 1, current, out);
        for n in 0..current.num_d2d() {
            if current.d2d_partner(n).is_none() {
                current.pair(m, n);
                extend(m + 1, current, out);
                current.cu_partner[m] = None;
                current.d2d_partner[n] = None;
            }
        }
    }
    let mut out = Vec::new();
    extend(0, &mut Matching::empty(num_cus, num_d2d), &mut out);
    Ok(out)
}

/// Exhaustive list of stable matchings.
pub fn enumerate_stable_matchings(prefs: &PreferenceProfile) -> Result<Vec<Matching>> {
    Ok(enumerate_matchings(prefs.num_cus(), prefs.num_d2d())?
        .into_iter()
        .filter(|mu| is_stable(mu, prefs))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn instance_a() -> PreferenceProfile {
        let rates = RateTable::new(vec![1.0, 1.0], vec![vec![2.0, 3.0], vec![2.5, 2.2]], vec![1.0, 1.0]).unwrap();
        build_preferences(&rates, &SystemParams::default()).unwrap()
    }

    #[test]
    fn instance_a_scores() {
        let p = instance_a();
        let expected_scores = [[0.5, 1.0], [0.75, 0.6]];
        let expected_alphas = [[0.25, 1.0 / 3.0], [0.3, 3.0 / 11.0]];
        for m in 0..2 {
            for n in 0..2 {
                assert!((p.cu_score(m, n) - expected_scores[m][n]).abs() < 1e-12);
                assert!((p.alpha(m, n) - expected_alphas[m][n]).abs() < 1e-12);
                assert!(p.is_acceptable(m, n));
            }
        }
    }

    #[test]
    fn instance_a_stability() {
        let p = instance_a();
        let crossed = Matching::from_pairs(2, 2, &[(0, 1), (1, 0)]).unwrap();
        let straight = Matching::from_pairs(2, 2, &[(0, 0), (1, 1)]).unwrap();
        assert!(find_blocking_pairs(&crossed, &p).unwrap().is_empty());
        assert!(is_stable(&crossed, &p));
        let blocking = find_blocking_pairs(&straight, &p).unwrap();
        assert!(blocking.contains(&(0, 1)) && blocking.contains(&(1, 0)));
        assert!(!is_stable(&straight, &p));
        assert_eq!(find_blocking_pairs(&Matching::empty(2, 2), &p).unwrap().len(), 4);
        assert_eq!(gale_shapley(&p), crossed);
        assert_eq!(enumerate_matchings(2, 2).unwrap().len(), 7);
        assert_eq!(enumerate_stable_matchings(&p).unwrap(), vec![crossed]);
    }

    #[test]
    fn unacceptable_pair_is_unstable() {
        let p = PreferenceProfile::from_scores(vec![vec![-0.1]], vec![vec![0.1]]).unwrap();
        let mu = Matching::from_pairs(1, 1, &[(0, 0)]).unwrap();
        assert!(!is_stable(&mu, &p));
        assert!(gale_shapley(&p).is_empty());
        assert_eq!(enumerate_stable_matchings(&p).unwrap(), vec![Matching::empty(1, 1)]);
    }

    #[test]
    fn equal_rates_leave_nothing_acceptable() {
        let rates = RateTable::new(vec![1.0, 2.0], vec![vec![1.0, 1.0], vec![2.0, 2.0]], vec![1.0, 1.0]).unwrap();
        let p = build_preferences(&rates, &SystemParams::default()).unwrap();
        assert!((0..2).all(|m| (0..2).all(|n| !p.is_acceptable(m, n))));
        assert!(gale_shapley(&p).is_empty());
    }

    #[test]
    fn single_acceptable_pair_is_matched() {
        let p = PreferenceProfile::from_scores(vec![vec![0.4]], vec![vec![0.2]]).unwrap();
        assert_eq!(gale_shapley(&p), Matching::from_pairs(1, 1, &[(0, 0)]).unwrap());
    }

    #[test]
    fn scaling_rates_keeps_alphas() {
        let base = instance_a();
        let scaled = RateTable::new(vec![3.0, 3.0], vec![vec![6.0, 9.0], vec![7.5, 6.6]], vec![1.0, 1.0]).unwrap();
        let p = build_preferences(&scaled, &SystemParams::default()).unwrap();
        for m in 0..2 {
            for n in 0..2 {
                assert!((p.alpha(m, n) - base.alpha(m, n)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn inconsistent_structures_are_rejected() {
        assert!(Matching::from_pairs(2, 2, &[(0, 0), (1, 0)]).is_err());
        assert!(Matching::from_partner_maps(vec![Some(0), None], vec![Some(1), None]).is_err());
        let p = instance_a();
        assert!(matches!(
            find_blocking_pairs(&Matching::empty(3, 2), &p),
            Err(Error::Structural(_))
        ));
        assert!(!is_stable(&Matching::empty(3, 2), &p));
    }

    #[test]
    fn enumeration_guard() {
        assert!(matches!(enumerate_matchings(7, 6), Err(Error::Capacity(_))));
        assert_eq!(enumerate_matchings(1, 3).unwrap().len(), 4);
    }
}
