//! Append-only pedigree with kinship computation and mate-eligibility rules.
//!
//! Individuals are stored generation by generation; ids are dense indices in
//! insertion order, so each generation occupies a contiguous id range. The
//! pedigree records ancestry only; genomes live elsewhere.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};

/// Biological sex of a simulated individual.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Sex {
    Female,
    Male,
}

impl Sex {
    /// The opposite sex.
    pub fn other(self) -> Sex {
        match self {
            Sex::Female => Sex::Male,
            Sex::Male => Sex::Female,
        }
    }
}

/// Dense identifier of an individual within one [`Pedigree`].
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IndivId(u32);

impl IndivId {
    /// Position of this individual in the pedigree's storage order.
    pub fn index(self) -> usize {
        self.0 as usize
    }

    fn raw(self) -> u32 {
        self.0
    }
}

/// Builds an id directly from its storage index, bypassing the pedigree.
/// Only for tests that exercise id-indexed containers in isolation.
#[cfg(test)]
pub(crate) fn test_id(raw: u32) -> IndivId {
    IndivId(raw)
}

impl fmt::Display for IndivId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One pedigree record.
#[derive(Clone, Debug)]
pub struct Individual {
    pub id: IndivId,
    pub sex: Sex,
    /// Index into [`Pedigree::demes`].
    pub deme: u16,
    pub generation: u16,
    /// `(mother, father)`; `None` for founders.
    pub parents: Option<(IndivId, IndivId)>,
}

/// How many generations above a candidate pair the eligibility check walks
/// when computing kinship. Ancestors further back are treated as unrelated
/// founders. The window covers every refusable relationship class (siblings,
/// avuncular pairs, first cousins, first cousins once removed) with one
/// generation to spare, so close inbreeding within the window still raises
/// the coefficient, while the check stays O(1) in pedigree depth.
pub const ELIGIBILITY_WINDOW: u16 = 4;

/// Kinship threshold at or above which a pair is always refused.
const PHI_CLOSE: f64 = 0.125;
/// Kinship of outbred first cousins; the only permitted value above zero
/// that needs a relationship-class tiebreak.
const PHI_COUSIN: f64 = 0.0625;

/// Outcome of a mate-eligibility check.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Eligibility {
    Eligible,
    Refused(RefusalReason),
}

impl Eligibility {
    pub fn is_eligible(self) -> bool {
        matches!(self, Eligibility::Eligible)
    }
}

/// Why a candidate pair was refused.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum RefusalReason {
    /// Same-sex pair (unions are heterosexual in this model).
    SameSex,
    /// Kinship at or above the refusal threshold, or an unpermitted value
    /// between the cousin and sibling levels.
    CloseKin,
    /// First cousins whose connecting siblings share a sex.
    ParallelFirstCousins,
    /// First cousins once removed, refused regardless of kinship value.
    FirstCousinsOnceRemoved,
}

/// Append-only pedigree over a fixed set of demes.
#[derive(Clone, Debug)]
pub struct Pedigree {
    demes: Vec<String>,
    individuals: Vec<Individual>,
    /// `gen_starts[g]` is the id of the first individual in generation `g`;
    /// the last entry marks the currently open generation.
    gen_starts: Vec<u32>,
}

impl Pedigree {
    /// Starts a pedigree over the given demes with generation 0 open for
    /// founders. Deme names must be nonempty and unique.
    pub fn new(demes: Vec<String>) -> Result<Self> {
        if demes.is_empty() {
            return Err(Error::Config("pedigree needs at least one deme".into()));
        }
        if demes.len() > u16::MAX as usize {
            return Err(Error::Config("too many demes".into()));
        }
        for (i, name) in demes.iter().enumerate() {
            if name.is_empty() {
                return Err(Error::Config("deme names must be nonempty".into()));
            }
            if demes[..i].contains(name) {
                return Err(Error::Config(format!("duplicate deme name {name:?}")));
            }
        }
        Ok(Pedigree {
            demes,
            individuals: Vec::new(),
            gen_starts: vec![0],
        })
    }

    /// Deme names in the order used by deme indices.
    pub fn demes(&self) -> &[String] {
        &self.demes
    }

    /// Name of the deme with the given index.
    pub fn deme_name(&self, deme: u16) -> &str {
        &self.demes[deme as usize]
    }

    /// Total number of individuals recorded so far.
    pub fn len(&self) -> usize {
        self.individuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.individuals.is_empty()
    }

    /// Number of generations started so far (including the open one).
    pub fn n_generations(&self) -> u16 {
        (self.gen_starts.len() - 1) as u16 + 1
    }

    fn open_generation(&self) -> u16 {
        (self.gen_starts.len() - 1) as u16
    }

    /// The record for `id`.
    pub fn get(&self, id: IndivId) -> &Individual {
        &self.individuals[id.index()]
    }

    /// All recorded individuals in id order.
    pub fn individuals(&self) -> &[Individual] {
        &self.individuals
    }

    /// Ids belonging to generation `g`, as a contiguous range.
    pub fn generation_members(&self, g: u16) -> impl ExactSizeIterator<Item = IndivId> + Clone {
        let g = g as usize;
        let start = self.gen_starts[g];
        let end = self
            .gen_starts
            .get(g + 1)
            .copied()
            .unwrap_or(self.individuals.len() as u32);
        (start..end).map(IndivId)
    }

    /// Per-deme individual counts within generation `g`.
    pub fn census(&self, g: u16) -> Vec<u32> {
        let mut counts = vec![0u32; self.demes.len()];
        for id in self.generation_members(g) {
            counts[self.get(id).deme as usize] += 1;
        }
        counts
    }

    fn next_id(&self) -> Result<IndivId> {
        let n = self.individuals.len();
        if n >= u32::MAX as usize {
            return Err(Error::Config("pedigree exceeds the id capacity".into()));
        }
        Ok(IndivId(n as u32))
    }

    /// Appends a founder to generation 0.
    pub fn push_founder(&mut self, sex: Sex, deme: u16) -> Result<IndivId> {
        if self.open_generation() != 0 {
            return Err(Error::Config(
                "founders can only be added to generation 0".into(),
            ));
        }
        if deme as usize >= self.demes.len() {
            return Err(Error::Config(format!("deme index {deme} out of range")));
        }
        let id = self.next_id()?;
        self.individuals.push(Individual {
            id,
            sex,
            deme,
            generation: 0,
            parents: None,
        });
        Ok(id)
    }

    /// Seals the open generation and opens the next one. The sealed
    /// generation must be nonempty.
    pub fn next_generation(&mut self) -> Result<()> {
        if self.individuals.len() as u32 == *self.gen_starts.last().unwrap() {
            return Err(Error::Config(
                "cannot start a new generation while the current one is empty".into(),
            ));
        }
        if self.open_generation() == u16::MAX - 1 {
            return Err(Error::Config("generation counter overflow".into()));
        }
        self.gen_starts.push(self.individuals.len() as u32);
        Ok(())
    }

    /// Appends a child of `mother` and `father` to the open generation.
    /// Parents must belong to the immediately preceding generation and have
    /// the expected sexes; the child inherits the mother's deme.
    pub fn push_child(&mut self, sex: Sex, mother: IndivId, father: IndivId) -> Result<IndivId> {
        let open = self.open_generation();
        if open == 0 {
            return Err(Error::Config(
                "generation 0 holds founders; seal it before adding children".into(),
            ));
        }
        for (role, pid, want) in [("mother", mother, Sex::Female), ("father", father, Sex::Male)] {
            let p = self
                .individuals
                .get(pid.index())
                .ok_or_else(|| Error::Config(format!("unknown {role} id {pid}")))?;
            if p.sex != want {
                return Err(Error::Config(format!(
                    "{role} {pid} has the wrong sex for that role"
                )));
            }
            if p.generation + 1 != open {
                return Err(Error::Config(format!(
                    "{role} {pid} is from generation {}, expected {}",
                    p.generation,
                    open - 1
                )));
            }
        }
        let deme = self.get(mother).deme;
        let id = self.next_id()?;
        self.individuals.push(Individual {
            id,
            sex,
            deme,
            generation: open,
            parents: Some((mother, father)),
        });
        Ok(id)
    }

    /// Re-checks the structural invariants over the whole pedigree: ids are
    /// dense and ordered by generation, founders are exactly the records
    /// without parents, and every child's parents are an opposite-sex pair
    /// from the previous generation with the child in the mother's deme.
    pub fn validate(&self) -> Result<()> {
        for (i, ind) in self.individuals.iter().enumerate() {
            if ind.id.index() != i {
                return Err(Error::Config(format!("id {} stored at index {i}", ind.id)));
            }
            let g = ind.generation as usize;
            let lo = self.gen_starts[g];
            let hi = self
                .gen_starts
                .get(g + 1)
                .copied()
                .unwrap_or(self.individuals.len() as u32);
            if !(lo..hi).contains(&ind.id.raw()) {
                return Err(Error::Config(format!(
                    "id {} outside its generation's id range",
                    ind.id
                )));
            }
            match ind.parents {
                None => {
                    if ind.generation != 0 {
                        return Err(Error::Config(format!(
                            "non-founder {} lacks parents",
                            ind.id
                        )));
                    }
                }
                Some((m, f)) => {
                    let mo = self.get(m);
                    let fa = self.get(f);
                    if mo.sex != Sex::Female || fa.sex != Sex::Male {
                        return Err(Error::Config(format!("parents of {} misordered", ind.id)));
                    }
                    if mo.generation + 1 != ind.generation || fa.generation + 1 != ind.generation {
                        return Err(Error::Config(format!(
                            "parents of {} are not from the previous generation",
                            ind.id
                        )));
                    }
                    if mo.deme != ind.deme {
                        return Err(Error::Config(format!(
                            "{} is not in its mother's deme",
                            ind.id
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Kinship coefficient between `a` and `b`: the probability that one
    /// allele sampled from each is identical by descent, with founders
    /// treated as unrelated and non-inbred. `phi(x, x)` is `(1 + F_x) / 2`
    /// where `F_x` is the kinship of x's parents. Values are exact dyadic
    /// rationals, so comparisons against constants like `0.0625` are exact.
    pub fn kinship_coefficient(&self, a: IndivId, b: IndivId) -> f64 {
        let mut memo = HashMap::new();
        self.kinship_rec(a.raw(), b.raw(), -1, &mut memo)
    }

    /// Kinship with the ancestor walk cut off `window` generations above the
    /// later-generation member of the pair; individuals at or beyond the
    /// cutoff are treated as founders.
    pub fn kinship_within(&self, a: IndivId, b: IndivId, window: u16) -> f64 {
        let mut memo = HashMap::new();
        self.kinship_within_scratch(a, b, window, &mut memo)
    }

    /// As [`kinship_within`](Self::kinship_within), reusing a caller-provided
    /// memo table. The table is cleared on entry.
    pub(crate) fn kinship_within_scratch(
        &self,
        a: IndivId,
        b: IndivId,
        window: u16,
        memo: &mut HashMap<(u32, u32), f64>,
    ) -> f64 {
        memo.clear();
        let top = self.get(a).generation.max(self.get(b).generation);
        let floor = top as i32 - window as i32;
        self.kinship_rec(a.raw(), b.raw(), floor, &mut *memo)
    }

    /// Parents of `x` unless `x` sits at or below the generation floor, in
    /// which case it is treated as a founder.
    fn parents_above(&self, x: u32, floor: i32) -> Option<(u32, u32)> {
        let ind = &self.individuals[x as usize];
        if (ind.generation as i32) <= floor {
            return None;
        }
        ind.parents.map(|(m, f)| (m.raw(), f.raw()))
    }

    fn kinship_rec(&self, a: u32, b: u32, floor: i32, memo: &mut HashMap<(u32, u32), f64>) -> f64 {
        let key = (a.min(b), a.max(b));
        if let Some(&v) = memo.get(&key) {
            return v;
        }
        let v = if a == b {
            match self.parents_above(a, floor) {
                Some((m, f)) => 0.5 * (1.0 + self.kinship_rec(m, f, floor, memo)),
                None => 0.5,
            }
        } else {
            // Expand the member from the later generation so the recursion
            // walks upward; on ties expand whichever still has parents.
            let (ga, gb) = (
                self.individuals[a as usize].generation,
                self.individuals[b as usize].generation,
            );
            let (x, y) = if ga > gb { (a, b) } else { (b, a) };
            match self.parents_above(x, floor) {
                Some((m, f)) => 0.5 * (self.kinship_rec(m, y, floor, memo) + self.kinship_rec(f, y, floor, memo)),
                None => match (ga == gb).then(|| self.parents_above(y, floor)).flatten() {
                    Some((m, f)) => {
                        0.5 * (self.kinship_rec(m, x, floor, memo) + self.kinship_rec(f, x, floor, memo))
                    }
                    None => 0.0,
                },
            }
        };
        memo.insert(key, v);
        v
    }

    fn full_siblings(&self, x: IndivId, y: IndivId) -> bool {
        if x == y {
            return false;
        }
        match (self.get(x).parents, self.get(y).parents) {
            (Some(px), Some(py)) => px == py,
            _ => false,
        }
    }

    /// Parent pairs `(pa, pb)` with `pa` a parent of `a`, `pb` a parent of
    /// `b`, and `pa`, `pb` full siblings — the links that make `a` and `b`
    /// first cousins.
    fn connecting_sibling_pairs(&self, a: IndivId, b: IndivId) -> Vec<(IndivId, IndivId)> {
        let mut pairs = Vec::new();
        if let (Some((ma, fa)), Some((mb, fb))) = (self.get(a).parents, self.get(b).parents) {
            for pa in [ma, fa] {
                for pb in [mb, fb] {
                    if self.full_siblings(pa, pb) {
                        pairs.push((pa, pb));
                    }
                }
            }
        }
        pairs
    }

    fn is_first_cousins(&self, a: IndivId, b: IndivId) -> bool {
        a != b && !self.connecting_sibling_pairs(a, b).is_empty()
    }

    /// First cousins once removed: one member is a child of the other's
    /// first cousin.
    fn is_first_cousins_once_removed(&self, a: IndivId, b: IndivId) -> bool {
        let (ga, gb) = (self.get(a).generation, self.get(b).generation);
        let (younger, elder) = match ga.cmp(&gb) {
            std::cmp::Ordering::Greater => (a, b),
            std::cmp::Ordering::Less => (b, a),
            std::cmp::Ordering::Equal => return false,
        };
        if self.get(younger).generation - self.get(elder).generation != 1 {
            return false;
        }
        match self.get(younger).parents {
            Some((m, f)) => self.is_first_cousins(m, elder) || self.is_first_cousins(f, elder),
            None => false,
        }
    }
}

/// Decides whether `a` and `b` may form a union. A pair is eligible only if
/// the sexes differ, the pair is not first cousins once removed, and the
/// kinship coefficient (computed over the last [`ELIGIBILITY_WINDOW`]
/// generations) is below the first-cousin level — except that exactly the
/// first-cousin level is allowed when the pair are first cousins through an
/// opposite-sex sibling pair (cross cousins). Second cousins and anything
/// more distant pass; avuncular pairs, half siblings, and closer kin exceed
/// the threshold and are refused.
pub fn mate_eligibility(ped: &Pedigree, a: IndivId, b: IndivId) -> Eligibility {
    let mut memo = HashMap::new();
    mate_eligibility_scratch(ped, a, b, &mut memo)
}

/// As [`mate_eligibility`], reusing a caller-provided memo table.
pub(crate) fn mate_eligibility_scratch(
    ped: &Pedigree,
    a: IndivId,
    b: IndivId,
    memo: &mut HashMap<(u32, u32), f64>,
) -> Eligibility {
    if ped.get(a).sex == ped.get(b).sex {
        return Eligibility::Refused(RefusalReason::SameSex);
    }
    if ped.is_first_cousins_once_removed(a, b) {
        return Eligibility::Refused(RefusalReason::FirstCousinsOnceRemoved);
    }
    let phi = ped.kinship_within_scratch(a, b, ELIGIBILITY_WINDOW, memo);
    if phi >= PHI_CLOSE {
        return Eligibility::Refused(RefusalReason::CloseKin);
    }
    if phi > PHI_COUSIN {
        return Eligibility::Refused(RefusalReason::CloseKin);
    }
    if phi == PHI_COUSIN {
        let pairs = ped.connecting_sibling_pairs(a, b);
        if pairs.is_empty() {
            // Cousin-level kinship through some other constellation
            // (e.g. a half-sibling of a parent).
            return Eligibility::Refused(RefusalReason::CloseKin);
        }
        if pairs
            .iter()
            .all(|&(pa, pb)| ped.get(pa).sex != ped.get(pb).sex)
        {
            return Eligibility::Eligible;
        }
        return Eligibility::Refused(RefusalReason::ParallelFirstCousins);
    }
    Eligibility::Eligible
}
