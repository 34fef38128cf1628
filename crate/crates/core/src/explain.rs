//! Inconsistency diagnosis: the smallest sets of constraints whose removal
//! lets propagation succeed, and a difficulty ranking from failure counts.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::interval::IntervalBox;
use crate::model::Constraint;
use crate::propagate::{Propagator, ReviseStats, DEFAULT_TOL};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintStats {
    pub checked: u64,
    pub violated: u64,
}

impl ConstraintStats {
    pub fn rate(&self) -> Option<f64> {
        (self.checked > 0).then(|| self.violated as f64 / self.checked as f64)
    }

    pub fn merge(&mut self, o: &ConstraintStats) {
        self.checked += o.checked;
        self.violated += o.violated;
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConflictReport {
    /// Removal sets of the smallest size, sorted by size then ids.
    pub minimal_sets: Vec<Vec<String>>,
    pub stats: BTreeMap<String, ConstraintStats>,
    /// Enumeration stopped at `max_sets` or at the check budget.
    pub truncated: bool,
}

impl ConflictReport {
    pub fn is_empty(&self) -> bool {
        self.minimal_sets.is_empty()
    }

    pub fn mentions(&self, id: &str) -> bool {
        self.minimal_sets.iter().any(|s| s.iter().any(|x| x == id))
    }

    /// Plain-text table for terminals.
    pub fn table(&self) -> String {
        let mut out = String::new();
        if self.minimal_sets.is_empty() {
            out.push_str("no conflict: propagation succeeds\n");
            return out;
        }
        out.push_str("removal sets restoring consistency:\n");
        for (k, s) in self.minimal_sets.iter().enumerate() {
            out.push_str(&format!("  {:>3}  {{{}}}\n", k + 1, s.join(", ")));
        }
        if self.truncated {
            out.push_str("  (enumeration truncated)\n");
        }
        let w = self.stats.keys().map(String::len).max().unwrap_or(10).max(10);
        out.push_str(&format!("\n{:<w$}  {:>9}  {:>9}\n", "constraint", "checked", "violated"));
        for (id, s) in &self.stats {
            out.push_str(&format!("{id:<w$}  {:>9}  {:>9}\n", s.checked, s.violated));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExplainOptions {
    pub max_sets: usize,
    pub tol: f64,
    /// Tolerance of the quick filter run before each confirming check.
    pub coarse_tol: f64,
    /// Upper bound on consistency checks.
    pub max_checks: usize,
}

impl Default for ExplainOptions {
    fn default() -> Self {
        ExplainOptions {
            max_sets: 16,
            tol: DEFAULT_TOL,
            coarse_tol: 1e-2,
            max_checks: 20_000,
        }
    }
}

struct Checker<'a> {
    prop: Propagator,
    b: &'a IntervalBox,
    opts: &'a ExplainOptions,
}

impl Checker<'_> {
    fn consistent(&self, active: &[bool], stats: &mut ReviseStats) -> bool {
        let mut dims = self.b.dims().to_vec();
        if !self.prop.fixpoint(&mut dims, self.opts.coarse_tol, Some(active), Some(stats)) {
            return false;
        }
        let mut dims = self.b.dims().to_vec();
        self.prop.fixpoint(&mut dims, self.opts.tol, Some(active), Some(stats))
    }

    fn mask(&self, on: impl IntoIterator<Item = usize>) -> Vec<bool> {
        let mut m = vec![false; self.prop.len()];
        for k in on {
            m[k] = true;
        }
        m
    }

    fn without(&self, removed: &[usize]) -> Vec<bool> {
        let mut m = vec![true; self.prop.len()];
        for &k in removed {
            m[k] = false;
        }
        m
    }

    /// Tests removal candidates in parallel; returns the consistent ones in input order.
    fn sweep(&self, cands: &[Vec<usize>], stats: &mut ReviseStats) -> Vec<Vec<usize>> {
        let results: Vec<(bool, ReviseStats)> = cands
            .par_iter()
            .map(|r| {
                let mut s = ReviseStats::new(self.prop.len());
                let ok = self.consistent(&self.without(r), &mut s);
                (ok, s)
            })
            .collect();
        let mut out = Vec::new();
        for (r, (ok, s)) in cands.iter().zip(results) {
            merge(stats, &s);
            if ok {
                out.push(r.clone());
            }
        }
        out
    }

    /// QuickXplain: a minimal inconsistent subset of `c` given consistent-so-far `bg`.
    fn quickxplain(&self, bg: &[usize], delta: bool, c: &[usize], stats: &mut ReviseStats, checks: &mut usize) -> Vec<usize> {
        if delta {
            *checks += 1;
            if !self.consistent(&self.mask(bg.iter().copied()), stats) {
                return Vec::new();
            }
        }
        if c.len() == 1 {
            return c.to_vec();
        }
        let (c1, c2) = c.split_at(c.len() / 2);
        let bg1: Vec<usize> = bg.iter().chain(c1).copied().collect();
        let d2 = self.quickxplain(&bg1, !c1.is_empty(), c2, stats, checks);
        let bg2: Vec<usize> = bg.iter().chain(&d2).copied().collect();
        let d1 = self.quickxplain(&bg2, !d2.is_empty(), c1, stats, checks);
        let mut out = d1;
        out.extend(d2);
        out
    }
}

fn merge(into: &mut ReviseStats, from: &ReviseStats) {
    for k in 0..into.checked.len() {
        into.checked[k] += from.checked[k];
        into.violated[k] += from.violated[k];
    }
}

/// Calls `f` on every `k`-subset of `items` (lexicographic), stopping when it returns false.
fn for_each_subset(items: &[usize], k: usize, f: &mut impl FnMut(&[usize]) -> bool) {
    fn rec(items: &[usize], k: usize, start: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize]) -> bool) -> bool {
        if cur.len() == k {
            return f(cur);
        }
        let need = k - cur.len();
        for i in start..=items.len().saturating_sub(need) {
            if i >= items.len() {
                break;
            }
            cur.push(items[i]);
            let go = rec(items, k, i + 1, cur, f);
            cur.pop();
            if !go {
                return false;
            }
        }
        true
    }
    let mut cur = Vec::with_capacity(k);
    rec(items, k, 0, &mut cur, f);
}

/// Finds every smallest set of constraints whose removal makes
/// [`crate::propagate::propagate_fixpoint`] non-empty on `b`. A consistent
/// system yields an empty report.
pub fn min_conflict_sets(cs: &[Constraint], b: &IntervalBox, opts: &ExplainOptions) -> ConflictReport {
    let n = cs.len();
    let checker = Checker {
        prop: Propagator::new(cs, b.len()),
        b,
        opts,
    };
    let mut stats = ReviseStats::new(n);
    let mut checks = 1usize;
    let mut report = ConflictReport::default();
    let finish = |stats: ReviseStats, mut report: ConflictReport| {
        report.stats = cs
            .iter()
            .enumerate()
            .map(|(k, c)| {
                (
                    c.id.clone(),
                    ConstraintStats {
                        checked: stats.checked[k],
                        violated: stats.violated[k],
                    },
                )
            })
            .collect();
        report
    };
    if checker.consistent(&vec![true; n], &mut stats) {
        return finish(stats, report);
    }

    let mut found: Vec<Vec<usize>> = Vec::new();
    // Sweeps of size 1 and 2 over all constraints.
    for k in 1..=2.min(n) {
        let mut cands = Vec::new();
        for_each_subset(&(0..n).collect::<Vec<_>>(), k, &mut |s| {
            cands.push(s.to_vec());
            true
        });
        checks += cands.len();
        found = checker.sweep(&cands, &mut stats);
        if !found.is_empty() {
            break;
        }
    }

    if found.is_empty() && n > 2 {
        // Implicit hitting sets over conflicts found by QuickXplain.
        let mut conflicts: Vec<BTreeSet<usize>> = Vec::new();
        let all: Vec<usize> = (0..n).collect();
        let first = checker.quickxplain(&[], false, &all, &mut stats, &mut checks);
        conflicts.push(first.into_iter().collect());
        'sizes: for k in 3..=n {
            loop {
                let pool: Vec<usize> = conflicts.iter().flatten().copied().collect::<BTreeSet<_>>().into_iter().collect();
                let mut hitting: Vec<Vec<usize>> = Vec::new();
                for_each_subset(&pool, k.min(pool.len()), &mut |s| {
                    if conflicts.iter().all(|c| s.iter().any(|x| c.contains(x))) {
                        hitting.push(s.to_vec());
                    }
                    true
                });
                let mut new_conflict = false;
                let mut size_found = Vec::new();
                for h in hitting {
                    if checks >= opts.max_checks {
                        report.truncated = true;
                        found = size_found;
                        break 'sizes;
                    }
                    checks += 1;
                    let active = checker.without(&h);
                    if checker.consistent(&active, &mut stats) {
                        size_found.push(h);
                    } else {
                        let rest: Vec<usize> = (0..n).filter(|x| active[*x]).collect();
                        let c = checker.quickxplain(&[], false, &rest, &mut stats, &mut checks);
                        conflicts.push(c.into_iter().collect());
                        new_conflict = true;
                        break;
                    }
                }
                if new_conflict {
                    continue;
                }
                if !size_found.is_empty() {
                    found = size_found;
                    break 'sizes;
                }
                if pool.len() < k {
                    break 'sizes;
                }
                break;
            }
        }
    }

    let mut sets: Vec<Vec<String>> = found
        .into_iter()
        .map(|s| {
            let mut ids: Vec<String> = s.iter().map(|&k| cs[k].id.clone()).collect();
            ids.sort();
            ids
        })
        .collect();
    sets.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    if sets.len() > opts.max_sets {
        sets.truncate(opts.max_sets);
        report.truncated = true;
    }
    report.minimal_sets = sets;
    finish(stats, report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub id: String,
    /// `violated / checked`; `None` when never checked.
    pub rate: Option<f64>,
    pub checked: u64,
    pub violated: u64,
}

/// Orders constraints by violation rate (descending), then by check count
/// (descending); never-checked constraints come last.
pub fn difficulty_ranking(stats: &BTreeMap<String, ConstraintStats>) -> Vec<RankEntry> {
    let mut v: Vec<RankEntry> = stats
        .iter()
        .map(|(id, s)| RankEntry {
            id: id.clone(),
            rate: s.rate(),
            checked: s.checked,
            violated: s.violated,
        })
        .collect();
    v.sort_by(|a, b| match (a.rate, b.rate) {
        (Some(x), Some(y)) => y.total_cmp(&x).then(b.checked.cmp(&a.checked)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    v
}
