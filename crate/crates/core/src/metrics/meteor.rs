use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::tokenize;

/// Node budget for the chunk-minimizing search. Inputs that exhaust it keep
/// the best alignment found so far and report `exact = false`.
const SEARCH_BUDGET: u64 = 500_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Alignment {
    pub matches: usize,
    pub chunks: usize,
    /// Whether the chunk count is proven minimal.
    pub exact: bool,
}

struct Search {
    cand: Vec<usize>,
    reference: Vec<usize>,
    positions: Vec<Vec<usize>>,
    need: Vec<usize>,
    left: Vec<usize>,
    used: Vec<bool>,
    total_need: usize,
    best: usize,
    floor: usize,
    nodes: u64,
    exhausted: bool,
}

impl Search {
    fn continuation(&self, i: usize, prev: Option<usize>) -> Option<usize> {
        let p = prev? + 1;
        let w = self.cand[i];
        (p < self.reference.len() && self.reference[p] == w && !self.used[p] && self.need[w] > 0).then_some(p)
    }

    fn done(&self) -> bool {
        self.exhausted || self.best <= self.floor
    }

    fn dfs(&mut self, i: usize, prev: Option<usize>, chunks: usize) {
        self.nodes += 1;
        if self.nodes > SEARCH_BUDGET {
            self.exhausted = true;
            return;
        }
        if i == self.cand.len() {
            if self.total_need == 0 && chunks < self.best {
                self.best = chunks;
            }
            return;
        }
        let cont = self.continuation(i, prev);
        let bound = usize::from(self.total_need > 0 && cont.is_none());
        if chunks + bound >= self.best {
            return;
        }

        let w = self.cand[i];
        let available = self.left[w];
        self.left[w] -= 1;
        if self.need[w] > 0 {
            if let Some(j) = cont {
                self.take(i, j, chunks);
            }
            for k in 0..self.positions[w].len() {
                if self.done() {
                    break;
                }
                let j = self.positions[w][k];
                if !self.used[j] && Some(j) != cont {
                    self.take(i, j, chunks + 1);
                }
            }
        }
        if self.need[w] < available && !self.done() {
            self.dfs(i + 1, None, chunks);
        }
        self.left[w] += 1;
    }

    fn take(&mut self, i: usize, j: usize, chunks: usize) {
        let w = self.cand[i];
        self.used[j] = true;
        self.need[w] -= 1;
        self.total_need -= 1;
        self.dfs(i + 1, Some(j), chunks);
        self.used[j] = false;
        self.need[w] += 1;
        self.total_need += 1;
    }
}

/// Exact-match unigram alignment with the maximum number of matches and, among
/// those, the fewest chunks.
pub fn meteor_alignment(cand: &[String], reference: &[String]) -> Alignment {
    let mut ids: BTreeMap<&str, usize> = BTreeMap::new();
    for t in cand.iter().chain(reference) {
        let next = ids.len();
        ids.entry(t.as_str()).or_insert(next);
    }
    let cand_ids: Vec<usize> = cand.iter().map(|t| ids[t.as_str()]).collect();
    let ref_ids: Vec<usize> = reference.iter().map(|t| ids[t.as_str()]).collect();

    let mut positions = vec![Vec::new(); ids.len()];
    for (j, &w) in ref_ids.iter().enumerate() {
        positions[w].push(j);
    }
    let mut left = vec![0usize; ids.len()];
    for &w in &cand_ids {
        left[w] += 1;
    }
    let need: Vec<usize> = (0..ids.len()).map(|w| left[w].min(positions[w].len())).collect();
    let matches: usize = need.iter().sum();
    if matches == 0 {
        return Alignment { matches: 0, chunks: 0, exact: true };
    }

    let mut search = Search {
        cand: cand_ids,
        reference: ref_ids,
        positions,
        need,
        left,
        used: vec![false; reference.len()],
        total_need: matches,
        // every maximum alignment has at most one chunk per match
        best: matches,
        floor: 1,
        nodes: 0,
        exhausted: false,
    };
    search.dfs(0, None, 0);
    Alignment { matches, chunks: search.best, exact: !search.exhausted }
}

/// METEOR with exact matching only: `Fmean = 10PR / (R + 9P)`,
/// `penalty = 0.5 * (chunks / m)^3`.
pub fn meteor_tokens(cand: &[String], reference: &[String]) -> f64 {
    let a = meteor_alignment(cand, reference);
    if a.matches == 0 {
        return 0.0;
    }
    let m = a.matches as f64;
    let p = m / cand.len() as f64;
    let r = m / reference.len() as f64;
    let fmean = 10.0 * p * r / (r + 9.0 * p);
    let frag = a.chunks as f64 / m;
    fmean * (1.0 - 0.5 * frag * frag * frag)
}

pub fn meteor(candidate: &str, reference: &str) -> f64 {
    meteor_tokens(&tokenize(candidate), &tokenize(reference))
}
