//! Brute-force reference implementations used by the oracle tests and the
//! acceptance target. Deliberately naive: list scans, subset enumeration and
//! full alignment enumeration instead of the library's counting and search.

#![allow(dead_code)]

use std::cmp::Ordering;

pub const VOCAB: [&str; 4] = ["the", "cat", "sat", "mat"];

/// Every (candidate, reference) pair of length <= `max_len` over `vocab_size`
/// symbols, up to renaming of the vocabulary. Each pair is written as a
/// restricted growth string over the concatenation, so a symbol first appears
/// after all smaller symbols. The metrics only compare tokens for equality,
/// which makes them invariant under renaming; this enumeration therefore
/// covers every pair of the full space.
pub fn canonical_pairs(max_len: usize, vocab_size: usize) -> Vec<(Vec<u8>, Vec<u8>)> {
    let mut out = Vec::new();
    for a in 0..=max_len {
        for b in 0..=max_len {
            let mut buf = vec![0u8; a + b];
            rgs(&mut buf, 0, 0, vocab_size as u8, &mut |s| out.push((s[..a].to_vec(), s[a..].to_vec())));
        }
    }
    out
}

fn rgs(buf: &mut [u8], i: usize, used: u8, k: u8, emit: &mut impl FnMut(&[u8])) {
    if i == buf.len() {
        emit(buf);
        return;
    }
    for s in 0..=used.min(k - 1) {
        buf[i] = s;
        rgs(buf, i + 1, used.max(s + 1), k, emit);
    }
}

pub fn words(seq: &[u8]) -> Vec<String> {
    seq.iter().map(|&s| VOCAB[s as usize].to_string()).collect()
}

fn grams<T: Clone>(t: &[T], n: usize) -> Vec<Vec<T>> {
    if t.len() < n {
        return Vec::new();
    }
    (0..=t.len() - n).map(|i| t[i..i + n].to_vec()).collect()
}

/// Multiset intersection size by repeated removal.
pub fn overlap<T: Clone + PartialEq>(cand: &[T], reference: &[T], n: usize) -> usize {
    let mut pool = grams(reference, n);
    let mut hit = 0;
    for g in grams(cand, n) {
        if let Some(p) = pool.iter().position(|x| *x == g) {
            pool.swap_remove(p);
            hit += 1;
        }
    }
    hit
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// (precision, recall, f)
pub fn rouge_n<T: Clone + PartialEq>(cand: &[T], reference: &[T], n: usize) -> (f64, f64, f64) {
    if cand.len() < n || reference.len() < n {
        return (0.0, 0.0, 0.0);
    }
    let o = overlap(cand, reference, n) as f64;
    let p = o / (cand.len() - n + 1) as f64;
    let r = o / (reference.len() - n + 1) as f64;
    (p, r, f1(p, r))
}

/// Longest common subsequence by trying every subsequence of `a`.
pub fn lcs<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut best = 0;
    for mask in 0u32..(1 << a.len()) {
        let sub: Vec<&T> = (0..a.len()).filter(|i| mask >> i & 1 == 1).map(|i| &a[i]).collect();
        if sub.len() <= best {
            continue;
        }
        let mut it = b.iter();
        if sub.iter().all(|w| it.any(|x| x == *w)) {
            best = sub.len();
        }
    }
    best
}

pub fn rouge_l<T: PartialEq>(cand: &[T], reference: &[T]) -> (f64, f64, f64) {
    if cand.is_empty() || reference.is_empty() {
        return (0.0, 0.0, 0.0);
    }
    let l = lcs(cand, reference) as f64;
    let p = l / cand.len() as f64;
    let r = l / reference.len() as f64;
    (p, r, f1(p, r))
}

/// Corpus BLEU per Papineni with the order clamped to the shortest
/// non-empty candidate.
pub fn bleu<T: Clone + PartialEq>(cands: &[Vec<T>], refs: &[Vec<T>], max_n: usize) -> f64 {
    let Some(shortest) = cands.iter().map(|c| c.len()).filter(|&l| l > 0).min() else {
        return 0.0;
    };
    let order = max_n.min(shortest);
    let mut precisions = Vec::new();
    for n in 1..=order {
        let hit: usize = cands.iter().zip(refs).map(|(c, r)| overlap(c, r, n)).sum();
        let total: usize = cands.iter().map(|c| grams(c, n).len()).sum();
        precisions.push(hit as f64 / total as f64);
    }
    if precisions.contains(&0.0) {
        return 0.0;
    }
    let geo = precisions.iter().product::<f64>().powf(1.0 / order as f64);
    let c: usize = cands.iter().map(Vec::len).sum();
    let r: usize = refs.iter().map(Vec::len).sum();
    let bp = if c < r { (1.0 - r as f64 / c as f64).exp() } else { 1.0 };
    bp * geo
}

fn enumerate_alignments<T: PartialEq>(
    cand: &[T],
    reference: &[T],
    i: usize,
    used: &mut Vec<bool>,
    current: &mut Vec<Option<usize>>,
    best: &mut (usize, usize),
) {
    if i == cand.len() {
        let m = current.iter().flatten().count();
        let mut chunks = 0;
        for k in 0..current.len() {
            if let Some(j) = current[k] {
                let continues = k > 0 && current[k - 1].is_some_and(|p| p + 1 == j);
                if !continues {
                    chunks += 1;
                }
            }
        }
        if m > best.0 || (m == best.0 && chunks < best.1) {
            *best = (m, chunks);
        }
        return;
    }
    current.push(None);
    enumerate_alignments(cand, reference, i + 1, used, current, best);
    current.pop();
    for j in 0..reference.len() {
        if !used[j] && reference[j] == cand[i] {
            used[j] = true;
            current.push(Some(j));
            enumerate_alignments(cand, reference, i + 1, used, current, best);
            current.pop();
            used[j] = false;
        }
    }
}

/// (matches, chunks) over every one-to-one exact alignment.
pub fn meteor_alignment<T: PartialEq>(cand: &[T], reference: &[T]) -> (usize, usize) {
    let mut best = (0, usize::MAX);
    enumerate_alignments(cand, reference, 0, &mut vec![false; reference.len()], &mut Vec::new(), &mut best);
    if best.0 == 0 {
        (0, 0)
    } else {
        best
    }
}

pub fn meteor<T: PartialEq>(cand: &[T], reference: &[T]) -> f64 {
    let (m, chunks) = meteor_alignment(cand, reference);
    if m == 0 {
        return 0.0;
    }
    let p = m as f64 / cand.len() as f64;
    let r = m as f64 / reference.len() as f64;
    let fmean = 10.0 * p * r / (r + 9.0 * p);
    fmean * (1.0 - 0.5 * (chunks as f64 / m as f64).powi(3))
}

/// Greedy BERTScore from raw (unnormalized) vectors: every cosine computed
/// as dot / (|a| |b|), then max over each row and column.
pub fn bertscore(cand: &[Vec<f64>], reference: &[Vec<f64>]) -> (f64, f64, f64) {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let sim: Vec<Vec<f64>> = cand
        .iter()
        .map(|a| {
            reference
                .iter()
                .map(|b| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (norm(a) * norm(b)))
                .collect()
        })
        .collect();
    let p = sim.iter().map(|row| row.iter().cloned().fold(f64::MIN, f64::max)).sum::<f64>() / cand.len() as f64;
    let r = (0..reference.len())
        .map(|j| sim.iter().map(|row| row[j]).fold(f64::MIN, f64::max))
        .sum::<f64>()
        / reference.len() as f64;
    (p, r, f1(p, r))
}

/// Exact fraction `num / den` with cross-multiplied comparison.
#[derive(Debug, Clone, Copy)]
pub struct Frac {
    pub num: u128,
    pub den: u128,
}

impl Frac {
    fn cmp(&self, other: &Frac) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

/// Largest-remainder apportionment of `budget` batches for tasks given as
/// `(family index, size)`. Shares are `size / (n_families * family total)`
/// (or `1 / (n_families * tasks in family)` when `equal`). Ties on the
/// remainder go to the earlier task.
pub fn largest_remainder(tasks: &[(usize, u64)], budget: u64, equal: bool) -> Vec<u64> {
    let mut fams: Vec<usize> = tasks.iter().map(|t| t.0).collect();
    fams.sort();
    fams.dedup();
    let quotas: Vec<Frac> = tasks
        .iter()
        .map(|&(f, size)| {
            let in_family: Vec<u64> = tasks.iter().filter(|t| t.0 == f).map(|t| t.1).collect();
            let (num, den) = if equal {
                (1u128, in_family.len() as u128)
            } else {
                (size as u128, in_family.iter().sum::<u64>() as u128)
            };
            Frac { num: budget as u128 * num, den: fams.len() as u128 * den }
        })
        .collect();
    let mut counts: Vec<u64> = quotas.iter().map(|q| (q.num / q.den) as u64).collect();
    let rems: Vec<Frac> = quotas.iter().map(|q| Frac { num: q.num % q.den, den: q.den }).collect();
    let mut left = budget - counts.iter().sum::<u64>();
    let mut idx: Vec<usize> = (0..tasks.len()).collect();
    idx.sort_by(|&a, &b| rems[b].cmp(&rems[a]).then(a.cmp(&b)));
    for &i in &idx {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

/// Compares every library metric against the oracles above on all pairs of
/// length <= `max_len` over the 4-word vocabulary. Returns the number of pairs
/// checked or the first disagreement.
pub fn exhaustive_metric_check(max_len: usize, tol: f64) -> Result<usize, String> {
    use mtlforge_core::metrics::{bleu_tokens, meteor_tokens, rouge_l_tokens, rouge_n_tokens};

    let pairs = canonical_pairs(max_len, VOCAB.len());
    let threads = std::thread::available_parallelism().map_or(4, |n| n.get());
    let chunk = pairs.len().div_ceil(threads);
    let close = |a: f64, b: f64| (a - b).abs() <= tol;
    let results: Vec<Result<(), String>> = std::thread::scope(|s| {
        let handles: Vec<_> = pairs
            .chunks(chunk.max(1))
            .map(|part| {
                s.spawn(move || {
                    for (cs, rs) in part {
                        let (c, r) = (words(cs), words(rs));
                        let label = || format!("cand {:?} ref {:?}", c.join(" "), r.join(" "));
                        for n in 1..=2 {
                            let got = rouge_n_tokens(&c, &r, n);
                            let (p, rc, f) = rouge_n(cs, rs, n);
                            if !(close(got.precision, p) && close(got.recall, rc) && close(got.f_score, f)) {
                                return Err(format!("ROUGE-{n} {}: {got:?} vs ({p}, {rc}, {f})", label()));
                            }
                        }
                        let got = rouge_l_tokens(&c, &r);
                        let (p, rc, f) = rouge_l(cs, rs);
                        if !(close(got.precision, p) && close(got.recall, rc) && close(got.f_score, f)) {
                            return Err(format!("ROUGE-L {}: {got:?} vs ({p}, {rc}, {f})", label()));
                        }
                        let got = bleu_tokens(std::slice::from_ref(&c), std::slice::from_ref(&r), 4).map_err(|e| e.to_string())?;
                        let want = bleu(std::slice::from_ref(cs), std::slice::from_ref(rs), 4);
                        if !close(got, want) {
                            return Err(format!("BLEU {}: {got} vs {want}", label()));
                        }
                        let got = meteor_tokens(&c, &r);
                        let want = meteor(cs, rs);
                        if !close(got, want) {
                            return Err(format!("METEOR {}: {got} vs {want}", label()));
                        }
                    }
                    Ok(())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("oracle worker panicked")).collect()
    });
    results.into_iter().collect::<Result<Vec<()>, String>>()?;
    Ok(pairs.len())
}
