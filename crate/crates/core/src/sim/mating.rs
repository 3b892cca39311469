//! Monogamous pair formation within one generation.
//!
//! Pairing is a single seeded pass: individuals are visited in random order,
//! and each still-unmatched visitor draws whether to court across demes
//! (with its deme's cross-mating probability) or within its own, then picks
//! a uniformly random eligible candidate from that pool, falling back once
//! to the other pool — but only if the draw could have selected that pool
//! in the first place, so a probability of exactly 0 or 1 stays strictly
//! endogamous or exogamous. Visitors that find no eligible partner stay
//! unmatched for the generation — eligibility is symmetric and pools only
//! shrink, so such an individual can never be chosen later either.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

use super::pedigree::{mate_eligibility_scratch, IndivId, Pedigree, Sex};

/// A formed union. The two members come from the generation being paired.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct Couple {
    pub female: IndivId,
    pub male: IndivId,
}

const REMOVED: u32 = u32::MAX;

fn sex_slot(sex: Sex) -> usize {
    match sex {
        Sex::Female => 0,
        Sex::Male => 1,
    }
}

/// Unmatched members of one generation, bucketed by deme and sex, with O(1)
/// removal and uniform sampling across arbitrary deme subsets.
struct Pools<'p> {
    ped: &'p Pedigree,
    /// `by_deme[d][s]` holds the unmatched ids of deme `d` and sex slot `s`.
    by_deme: Vec<[Vec<IndivId>; 2]>,
    /// Position of each member in its bucket, indexed by id relative to the
    /// generation's first id; `REMOVED` once matched or retired.
    pos: Vec<u32>,
    base: usize,
    /// Visit stamps marking candidates already tried for the current probe.
    stamp: Vec<u32>,
    stamp_counter: u32,
}

impl<'p> Pools<'p> {
    fn new(ped: &'p Pedigree, generation: u16) -> Self {
        let members: Vec<IndivId> = ped.generation_members(generation).collect();
        let base = members.first().map_or(0, |id| id.index());
        let mut by_deme = vec![[Vec::new(), Vec::new()]; ped.demes().len()];
        let mut pos = vec![REMOVED; members.len()];
        for &id in &members {
            let ind = ped.get(id);
            let bucket: &mut Vec<IndivId> = &mut by_deme[ind.deme as usize][sex_slot(ind.sex)];
            pos[id.index() - base] = bucket.len() as u32;
            bucket.push(id);
        }
        Pools {
            ped,
            by_deme,
            pos,
            base,
            stamp: vec![0; members.len()],
            stamp_counter: 0,
        }
    }

    fn contains(&self, id: IndivId) -> bool {
        self.pos[id.index() - self.base] != REMOVED
    }

    fn remove(&mut self, id: IndivId) {
        let rel = id.index() - self.base;
        let at = self.pos[rel] as usize;
        debug_assert_ne!(self.pos[rel], REMOVED);
        let ind = self.ped.get(id);
        let bucket = &mut self.by_deme[ind.deme as usize][sex_slot(ind.sex)];
        bucket.swap_remove(at);
        if let Some(&moved) = bucket.get(at) {
            self.pos[moved.index() - self.base] = at as u32;
        }
        self.pos[rel] = REMOVED;
    }

    /// Picks a uniformly random eligible candidate of sex slot `slot` from
    /// the given demes, or `None` if no eligible candidate exists there.
    /// Candidates are probed in a uniform random order without replacement,
    /// so the first eligible hit is uniform over all eligible ones.
    fn pick_eligible<R: Rng + ?Sized>(
        &mut self,
        visitor: IndivId,
        slot: usize,
        demes: &[usize],
        rng: &mut R,
        memo: &mut HashMap<(u32, u32), f64>,
    ) -> Option<IndivId> {
        let total: usize = demes.iter().map(|&d| self.by_deme[d][slot].len()).sum();
        if total == 0 {
            return None;
        }
        self.stamp_counter += 1;
        let mut tried = 0usize;
        loop {
            let mut r = rng.random_range(0..total);
            let mut candidate = None;
            for &d in demes {
                let bucket = &self.by_deme[d][slot];
                if r < bucket.len() {
                    candidate = Some(bucket[r]);
                    break;
                }
                r -= bucket.len();
            }
            let c = candidate.expect("index within summed bucket lengths");
            let s = &mut self.stamp[c.index() - self.base];
            if *s == self.stamp_counter {
                continue;
            }
            *s = self.stamp_counter;
            tried += 1;
            if mate_eligibility_scratch(self.ped, visitor, c, memo).is_eligible() {
                return Some(c);
            }
            if tried == total {
                return None;
            }
        }
    }
}

/// Forms monogamous couples within generation `generation`. `rho[d]` is the
/// probability that a visiting member of deme `d` courts outside its deme
/// first. Couples are returned in formation order.
pub fn pair_generation<R: Rng + ?Sized>(
    ped: &Pedigree,
    generation: u16,
    rho: &[f64],
    rng: &mut R,
) -> Result<Vec<Couple>> {
    let n_demes = ped.demes().len();
    if rho.len() != n_demes {
        return Err(Error::Config(format!(
            "got {} cross-mating probabilities for {} demes",
            rho.len(),
            n_demes
        )));
    }
    for (d, &p) in rho.iter().enumerate() {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Config(format!(
                "cross-mating probability for deme {:?} is {p}, outside [0, 1]",
                ped.deme_name(d as u16)
            )));
        }
    }
    if generation >= ped.n_generations() {
        return Err(Error::Config(format!(
            "generation {generation} has not been created"
        )));
    }

    let mut order: Vec<IndivId> = ped.generation_members(generation).collect();
    order.shuffle(rng);

    let mut pools = Pools::new(ped, generation);
    let mut memo = HashMap::new();
    let all_demes: Vec<usize> = (0..n_demes).collect();
    let mut couples = Vec::new();

    for v in order {
        if !pools.contains(v) {
            continue;
        }
        let ind = ped.get(v);
        let home = ind.deme as usize;
        let want = sex_slot(ind.sex.other());
        let away: Vec<usize> = all_demes.iter().copied().filter(|&d| d != home).collect();
        let p_cross = rho[home];
        let cross_first = rng.random_bool(p_cross);
        // The fallback pool is only "tried once" when the visitor's draw
        // could have selected it at all: a deterministic policy (0 or 1)
        // keeps strict endogamy or exogamy even when the preferred pool
        // runs out of eligible partners.
        let (first, second): (&[usize], Option<&[usize]>) = if cross_first {
            (&away, (p_cross < 1.0).then(|| std::slice::from_ref(&home)))
        } else {
            (std::slice::from_ref(&home), (p_cross > 0.0).then_some(&away[..]))
        };
        let partner = pools
            .pick_eligible(v, want, first, rng, &mut memo)
            .or_else(|| second.and_then(|s| pools.pick_eligible(v, want, s, rng, &mut memo)));
        match partner {
            Some(p) => {
                pools.remove(v);
                pools.remove(p);
                let (female, male) = match ind.sex {
                    Sex::Female => (v, p),
                    Sex::Male => (p, v),
                };
                couples.push(Couple { female, male });
            }
            None => {
                // No eligible partner exists among the unmatched now, and
                // eligibility is symmetric, so none will appear later.
                pools.remove(v);
            }
        }
    }
    Ok(couples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, StreamPurpose};
    use crate::sim::pedigree::mate_eligibility;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64, g: u32) -> ChaCha8Rng {
        stream_rng(seed, StreamPurpose::Pairing, g, 0)
    }

    /// Founders only: `counts[d] = (n_female, n_male)` per deme.
    fn founder_ped(demes: &[&str], counts: &[(usize, usize)]) -> Pedigree {
        let mut ped = Pedigree::new(demes.iter().map(|s| s.to_string()).collect()).unwrap();
        for (d, &(nf, nm)) in counts.iter().enumerate() {
            for _ in 0..nf {
                ped.push_founder(Sex::Female, d as u16).unwrap();
            }
            for _ in 0..nm {
                ped.push_founder(Sex::Male, d as u16).unwrap();
            }
        }
        ped
    }

    fn deme_of(ped: &Pedigree, id: IndivId) -> u16 {
        ped.get(id).deme
    }

    #[test]
    fn rho_zero_keeps_unions_within_demes() {
        let ped = founder_ped(&["EA", "WA"], &[(12, 12), (9, 9)]);
        let couples = pair_generation(&ped, 0, &[0.0, 0.0], &mut rng(11, 0)).unwrap();
        assert_eq!(couples.len(), 12 + 9, "everyone is unrelated, all match");
        for c in &couples {
            assert_eq!(deme_of(&ped, c.female), deme_of(&ped, c.male));
        }
    }

    #[test]
    fn rho_one_crosses_demes_whenever_possible() {
        let ped = founder_ped(&["EA", "WA"], &[(10, 10), (10, 10)]);
        let couples = pair_generation(&ped, 0, &[1.0, 1.0], &mut rng(12, 0)).unwrap();
        assert_eq!(couples.len(), 20);
        for c in &couples {
            assert_ne!(
                deme_of(&ped, c.female),
                deme_of(&ped, c.male),
                "with rho = 1 and balanced demes every union crosses"
            );
        }
    }

    #[test]
    fn single_deme_falls_back_to_within_pool() {
        let ped = founder_ped(&["D"], &[(8, 8)]);
        let couples = pair_generation(&ped, 0, &[0.7], &mut rng(13, 0)).unwrap();
        assert_eq!(couples.len(), 8, "the empty cross pool must not block pairing");
    }

    #[test]
    fn deterministic_draws_never_use_the_excluded_pool() {
        // Surplus females in one deme, surplus males in the other: only a
        // cross-deme fallback could pair them, and rho = 0 forbids it.
        let ped = founder_ped(&["EA", "WA"], &[(6, 2), (2, 6)]);
        let couples = pair_generation(&ped, 0, &[0.0, 0.0], &mut rng(18, 0)).unwrap();
        assert_eq!(couples.len(), 4, "two within-deme couples per deme");
        for c in &couples {
            assert_eq!(deme_of(&ped, c.female), deme_of(&ped, c.male));
        }
        // The mirror image: rho = 1 leaves the surplus unmatched rather
        // than letting it fall back to its own deme.
        let ped = founder_ped(&["EA", "WA"], &[(5, 5), (2, 2)]);
        let couples = pair_generation(&ped, 0, &[1.0, 1.0], &mut rng(19, 0)).unwrap();
        assert_eq!(couples.len(), 4, "cross-deme capacity is two each way");
        for c in &couples {
            assert_ne!(deme_of(&ped, c.female), deme_of(&ped, c.male));
        }
    }

    #[test]
    fn surplus_sex_stays_unmatched() {
        let ped = founder_ped(&["D"], &[(5, 2)]);
        let couples = pair_generation(&ped, 0, &[0.0], &mut rng(14, 0)).unwrap();
        assert_eq!(couples.len(), 2);
    }

    #[test]
    fn members_appear_in_at_most_one_couple() {
        let ped = founder_ped(&["EA", "WA", "CSN"], &[(7, 5), (4, 8), (6, 6)]);
        let couples = pair_generation(&ped, 0, &[0.4, 0.4, 0.4], &mut rng(15, 0)).unwrap();
        let mut seen = std::collections::HashSet::new();
        for c in &couples {
            assert!(seen.insert(c.female), "female paired twice");
            assert!(seen.insert(c.male), "male paired twice");
            assert_eq!(ped.get(c.female).sex, Sex::Female);
            assert_eq!(ped.get(c.male).sex, Sex::Male);
        }
    }

    #[test]
    fn sibling_only_generation_forms_no_unions() {
        let mut ped = founder_ped(&["D"], &[(1, 1)]);
        let (f, m) = (
            ped.generation_members(0).next().unwrap(),
            ped.generation_members(0).nth(1).unwrap(),
        );
        ped.next_generation().unwrap();
        for sex in [Sex::Female, Sex::Male, Sex::Female, Sex::Male] {
            ped.push_child(sex, f, m).unwrap();
        }
        let couples = pair_generation(&ped, 1, &[0.5], &mut rng(16, 1)).unwrap();
        assert!(couples.is_empty(), "full siblings may not pair");
    }

    #[test]
    fn every_formed_union_is_eligible() {
        // Two founder families per deme so that generation 1 contains both
        // eligible pairs and refusable sibling pairs.
        let mut ped = founder_ped(&["EA", "WA"], &[(2, 2), (2, 2)]);
        let g0: Vec<IndivId> = ped.generation_members(0).collect();
        ped.next_generation().unwrap();
        // Deme EA founders: f0 f1 m2 m3; deme WA: f4 f5 m6 m7.
        let unions = [(0, 2), (1, 3), (4, 6), (5, 7)];
        for &(mo, fa) in &unions {
            for _ in 0..3 {
                let sex = if ped.len() % 2 == 0 { Sex::Female } else { Sex::Male };
                ped.push_child(sex, g0[mo], g0[fa]).unwrap();
            }
        }
        let couples = pair_generation(&ped, 1, &[0.5, 0.5], &mut rng(17, 1)).unwrap();
        assert!(!couples.is_empty());
        for c in &couples {
            assert!(
                mate_eligibility(&ped, c.female, c.male).is_eligible(),
                "paired an ineligible couple"
            );
        }
    }

    #[test]
    fn pairing_is_deterministic_in_the_stream() {
        let ped = founder_ped(&["EA", "WA"], &[(15, 14), (13, 16)]);
        let a = pair_generation(&ped, 0, &[0.3, 0.6], &mut rng(21, 0)).unwrap();
        let b = pair_generation(&ped, 0, &[0.3, 0.6], &mut rng(21, 0)).unwrap();
        assert_eq!(a, b);
        let c = pair_generation(&ped, 0, &[0.3, 0.6], &mut rng(22, 0)).unwrap();
        assert_ne!(a, c, "a different seed should reshuffle the pairing");
    }

    #[test]
    fn rejects_bad_rho() {
        let ped = founder_ped(&["EA", "WA"], &[(2, 2), (2, 2)]);
        assert!(pair_generation(&ped, 0, &[0.5], &mut rng(1, 0)).is_err());
        assert!(pair_generation(&ped, 0, &[0.5, 1.5], &mut rng(1, 0)).is_err());
        assert!(pair_generation(&ped, 0, &[0.5, f64::NAN], &mut rng(1, 0)).is_err());
    }
}
