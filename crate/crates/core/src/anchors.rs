//! Anchor discovery: the usability indicator `B` for a target entry, all-ones
//! submatrix (biclique) search over it, and the row partition into subgroups.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{EntryQuery, ObservedPanel, Treatment};

/// Default node budget for exact biclique search.
pub const DEFAULT_EXACT_BUDGET: u64 = 1_000_000;

/// Which validity predicate the anchors must satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnchorMode {
    /// Anchor block, anchor column entries of row `i` and anchor row entries
    /// of column `j` all at the target level.
    Strict,
    /// Each anchor column `b` may carry its own level `d(b) = D_ib ≠ 0`, shared
    /// by every anchor row; column `j` stays at the target level.
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BicliqueMode {
    /// Branch and bound for a maximum-area biclique, with a node budget.
    Exact { budget: u64 },
    /// Column-seeded greedy search returning a maximal biclique.
    Greedy,
}

impl BicliqueMode {
    pub fn exact() -> Self {
        BicliqueMode::Exact {
            budget: DEFAULT_EXACT_BUDGET,
        }
    }
}

mod bits {
    #[inline]
    pub fn words(len: usize) -> usize {
        len.div_ceil(64).max(1)
    }

    #[inline]
    pub fn set(w: &mut [u64], k: usize) {
        w[k / 64] |= 1u64 << (k % 64);
    }

    #[inline]
    pub fn get(w: &[u64], k: usize) -> bool {
        w[k / 64] >> (k % 64) & 1 == 1
    }

    #[inline]
    pub fn count(w: &[u64]) -> u32 {
        w.iter().map(|x| x.count_ones()).sum()
    }

    #[inline]
    pub fn and_count(a: &[u64], b: &[u64]) -> u32 {
        a.iter().zip(b).map(|(x, y)| (x & y).count_ones()).sum()
    }

    #[inline]
    pub fn and_into(dst: &mut [u64], a: &[u64], b: &[u64]) {
        for ((d, x), y) in dst.iter_mut().zip(a).zip(b) {
            *d = x & y;
        }
    }

    #[inline]
    pub fn is_subset(sub: &[u64], sup: &[u64]) -> bool {
        sub.iter().zip(sup).all(|(x, y)| x & !y == 0)
    }

    pub fn ones(w: &[u64], len: usize) -> impl Iterator<Item = usize> + '_ {
        (0..len).filter(move |&k| get(w, k))
    }

    pub fn full(len: usize) -> Vec<u64> {
        let mut w = vec![0u64; words(len)];
        for k in 0..len {
            set(&mut w, k);
        }
        w
    }
}

/// The `m x n` usability matrix for one target entry.
///
/// Only rows `a ≠ i` with `D_aj = d` and columns `b ≠ j` with `D_ib` admissible
/// can hold ones, so the matrix is stored as column bitsets over those
/// candidate rows.
#[derive(Debug, Clone)]
pub struct IndicatorMatrix {
    m: usize,
    n: usize,
    target: Option<EntryQuery>,
    mode: Option<AnchorMode>,
    rows: Vec<usize>,
    cols: Vec<usize>,
    words: usize,
    patterns: Vec<u64>,
}

impl IndicatorMatrix {
    /// Wraps an arbitrary dense 0/1 matrix (row-major) with no target entry.
    pub fn from_dense(m: usize, n: usize, cells: &[bool]) -> Self {
        assert_eq!(cells.len(), m * n);
        let words = bits::words(m);
        let mut patterns = vec![0u64; words * n];
        for a in 0..m {
            for b in 0..n {
                if cells[a * n + b] {
                    bits::set(&mut patterns[b * words..(b + 1) * words], a);
                }
            }
        }
        IndicatorMatrix {
            m,
            n,
            target: None,
            mode: None,
            rows: (0..m).collect(),
            cols: (0..n).collect(),
            words,
            patterns,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.m, self.n)
    }

    pub fn target(&self) -> Option<EntryQuery> {
        self.target
    }

    pub fn mode(&self) -> Option<AnchorMode> {
        self.mode
    }

    /// Rows that may hold ones.
    pub fn candidate_rows(&self) -> &[usize] {
        &self.rows
    }

    /// Columns that may hold ones.
    pub fn candidate_cols(&self) -> &[usize] {
        &self.cols
    }

    fn pattern(&self, c: usize) -> &[u64] {
        &self.patterns[c * self.words..(c + 1) * self.words]
    }

    pub fn get(&self, a: usize, b: usize) -> bool {
        match (self.rows.binary_search(&a), self.cols.binary_search(&b)) {
            (Ok(r), Ok(c)) => bits::get(self.pattern(c), r),
            _ => false,
        }
    }

    pub fn ones(&self) -> usize {
        (0..self.cols.len()).map(|c| bits::count(self.pattern(c)) as usize).sum()
    }

    pub fn to_dense(&self) -> Vec<bool> {
        let mut out = vec![false; self.m * self.n];
        for (c, &b) in self.cols.iter().enumerate() {
            for r in bits::ones(self.pattern(c), self.rows.len()) {
                out[self.rows[r] * self.n + b] = true;
            }
        }
        out
    }

    /// Transposed view as row bitsets over candidate columns.
    fn row_patterns(&self) -> (usize, Vec<u64>) {
        let words = bits::words(self.cols.len());
        let mut out = vec![0u64; words * self.rows.len()];
        for c in 0..self.cols.len() {
            for r in bits::ones(self.pattern(c), self.rows.len()) {
                bits::set(&mut out[r * words..(r + 1) * words], c);
            }
        }
        (words, out)
    }
}

/// `B_ab = 1{D_ab = D_ib ≠ 0, D_aj = d, a ≠ i, b ≠ j}` in mixed mode; strict mode
/// additionally requires `D_ib = d`.
pub fn build_indicator(panel: &ObservedPanel, query: &EntryQuery, mode: AnchorMode) -> IndicatorMatrix {
    let (m, n) = (panel.rows(), panel.cols());
    let (i, j, d) = (query.row, query.col, query.level);
    let rows: Vec<usize> = (0..m).filter(|&a| a != i && panel.treatment(a, j) == d).collect();
    let cols: Vec<usize> = (0..n)
        .filter(|&b| {
            let t = panel.treatment(i, b);
            b != j
                && match mode {
                    AnchorMode::Strict => t == d,
                    AnchorMode::Mixed => t.is_observed(),
                }
        })
        .collect();
    let words = bits::words(rows.len());
    let mut patterns = vec![0u64; words * cols.len()];
    for (c, &b) in cols.iter().enumerate() {
        let want = panel.treatment(i, b);
        let pat = &mut patterns[c * words..(c + 1) * words];
        for (r, &a) in rows.iter().enumerate() {
            if panel.treatment(a, b) == want {
                bits::set(pat, r);
            }
        }
    }
    IndicatorMatrix {
        m,
        n,
        target: Some(*query),
        mode: Some(mode),
        rows,
        cols,
        words,
        patterns,
    }
}

/// An all-ones submatrix, in panel indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Biclique {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
}

impl Biclique {
    pub fn area(&self) -> usize {
        self.rows.len() * self.cols.len()
    }

    pub fn is_all_ones(&self, b: &IndicatorMatrix) -> bool {
        self.rows.iter().all(|&a| self.cols.iter().all(|&c| b.get(a, c)))
    }

    /// No row or column of `b` can be added while staying all-ones.
    pub fn is_maximal(&self, b: &IndicatorMatrix) -> bool {
        let (m, n) = b.shape();
        let row_ok = (0..m)
            .filter(|a| !self.rows.contains(a))
            .all(|a| !self.cols.iter().all(|&c| b.get(a, c)));
        let col_ok = (0..n)
            .filter(|c| !self.cols.contains(c))
            .all(|c| !self.rows.iter().all(|&a| b.get(a, c)));
        row_ok && col_ok
    }
}

/// Searches `b` for an all-ones submatrix with at least `min_rows x min_cols`.
///
/// Exact mode maximizes the area and fails with a budget error when the
/// search tree grows past the node budget. Greedy mode returns a maximal
/// biclique. `Ok(None)` means no admissible biclique exists (exact) or none was
/// found (greedy).
pub fn max_biclique(
    b: &IndicatorMatrix,
    min_rows: usize,
    min_cols: usize,
    mode: BicliqueMode,
) -> Result<Option<Biclique>> {
    if min_rows == 0 || min_cols == 0 {
        return Err(Error::Domain("minimum biclique sides must be >= 1".into()));
    }
    let found = match mode {
        BicliqueMode::Greedy => greedy(b, min_rows, min_cols),
        BicliqueMode::Exact { budget } => exact(b, min_rows, min_cols, budget)?,
    };
    Ok(found.map(|(row_bits, col_idx)| {
        let rows = bits::ones(&row_bits, b.rows.len()).map(|r| b.rows[r]).collect();
        let cols = col_idx.into_iter().map(|c| b.cols[c]).collect();
        Biclique { rows, cols }
    }))
}

/// Candidate-column indices whose pattern contains `rows`.
fn closure_cols(b: &IndicatorMatrix, rows: &[u64]) -> Vec<usize> {
    (0..b.cols.len()).filter(|&c| bits::is_subset(rows, b.pattern(c))).collect()
}

fn greedy(b: &IndicatorMatrix, min_rows: usize, min_cols: usize) -> Option<(Vec<u64>, Vec<usize>)> {
    let w = b.words;
    // Distinct usable column patterns, in order of their lowest column, with multiplicity.
    let mut distinct: Vec<(usize, usize)> = Vec::new(); // (representative column, multiplicity)
    {
        let mut seen: std::collections::HashMap<&[u64], usize> = std::collections::HashMap::new();
        for c in 0..b.cols.len() {
            let p = b.pattern(c);
            if (bits::count(p) as usize) < min_rows {
                continue;
            }
            match seen.get(p) {
                Some(&k) => distinct[k].1 += 1,
                None => {
                    seen.insert(p, distinct.len());
                    distinct.push((c, 1));
                }
            }
        }
    }
    let total_cols: usize = distinct.iter().map(|d| d.1).sum();
    if total_cols < min_cols {
        return None;
    }

    let mut best_area = 0usize;
    let mut best: Option<Vec<u64>> = None;
    let mut cur = vec![0u64; w];
    let mut next = vec![0u64; w];
    for &(seed, _) in &distinct {
        cur.copy_from_slice(b.pattern(seed));
        loop {
            let rows = bits::count(&cur) as usize;
            if rows < min_rows || rows * total_cols <= best_area {
                break;
            }
            let mut contained = 0usize;
            let mut pick: Option<(usize, u32)> = None;
            for &(c, mult) in &distinct {
                let inter = bits::and_count(&cur, b.pattern(c));
                if inter as usize == rows {
                    contained += mult;
                } else if inter as usize >= min_rows && pick.is_none_or(|(_, bestc)| inter > bestc) {
                    pick = Some((c, inter));
                }
            }
            if contained >= min_cols && rows * contained > best_area {
                best_area = rows * contained;
                best = Some(cur.clone());
            }
            match pick {
                Some((c, _)) => {
                    bits::and_into(&mut next, &cur, b.pattern(c));
                    std::mem::swap(&mut cur, &mut next);
                }
                None => break,
            }
        }
    }
    best.map(|rows| {
        let cols = closure_cols(b, &rows);
        (rows, cols)
    })
}

struct Exact<'a> {
    patterns: &'a [u64],
    words: usize,
    items: Vec<usize>,
    min_items: usize,
    min_other: usize,
    budget: u64,
    nodes: u64,
    best_area: usize,
    best: Option<(Vec<usize>, Vec<u64>)>,
}

impl Exact<'_> {
    fn pat(&self, k: usize) -> &[u64] {
        &self.patterns[k * self.words..(k + 1) * self.words]
    }

    fn dfs(&mut self, pos: usize, chosen: &mut Vec<usize>, inter: &[u64], inter_cnt: usize) -> Result<()> {
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(Error::Budget(format!(
                "exact biclique search exceeded {} nodes",
                self.budget
            )));
        }
        if chosen.len() >= self.min_items && inter_cnt >= self.min_other {
            let area = chosen.len() * inter_cnt;
            if area > self.best_area {
                self.best_area = area;
                self.best = Some((chosen.clone(), inter.to_vec()));
            }
        }
        let compatible: Vec<(usize, usize)> = self.items[pos..]
            .iter()
            .enumerate()
            .filter_map(|(off, &k)| {
                let cnt = bits::and_count(inter, self.pat(k)) as usize;
                (cnt >= self.min_other).then_some((pos + off, cnt))
            })
            .collect();
        if (chosen.len() + compatible.len()) * inter_cnt <= self.best_area {
            return Ok(());
        }
        let mut next = vec![0u64; self.words];
        for (idx, &(slot, cnt)) in compatible.iter().enumerate() {
            // Even taking every remaining compatible item cannot beat the incumbent.
            if (chosen.len() + compatible.len() - idx) * cnt.min(inter_cnt) <= self.best_area {
                continue;
            }
            let k = self.items[slot];
            bits::and_into(&mut next, inter, self.pat(k));
            chosen.push(k);
            self.dfs(slot + 1, chosen, &next, cnt)?;
            chosen.pop();
        }
        Ok(())
    }
}

fn exact(
    b: &IndicatorMatrix,
    min_rows: usize,
    min_cols: usize,
    budget: u64,
) -> Result<Option<(Vec<u64>, Vec<usize>)>> {
    let (nr, nc) = (b.rows.len(), b.cols.len());
    if nr == 0 || nc == 0 {
        return Ok(None);
    }
    // Branch over the shorter side.
    let branch_on_rows = nr < nc;
    let (words, patterns, n_items, n_other, min_items, min_other) = if branch_on_rows {
        let (w, p) = b.row_patterns();
        (w, p, nr, nc, min_rows, min_cols)
    } else {
        (b.words, b.patterns.clone(), nc, nr, min_cols, min_rows)
    };
    let mut items: Vec<usize> = (0..n_items)
        .filter(|&k| bits::count(&patterns[k * words..(k + 1) * words]) as usize >= min_other)
        .collect();
    items.sort_by_key(|&k| std::cmp::Reverse(bits::count(&patterns[k * words..(k + 1) * words])));
    let mut search = Exact {
        patterns: &patterns,
        words,
        items,
        min_items,
        min_other,
        budget,
        nodes: 0,
        best_area: 0,
        best: None,
    };
    let full = bits::full(n_other);
    search.dfs(0, &mut Vec::new(), &full, n_other)?;
    let Some((_, other)) = search.best else {
        return Ok(None);
    };
    Ok(Some(if branch_on_rows {
        // `other` is a column set; close it to the full row set.
        let cols: Vec<usize> = bits::ones(&other, nc).collect();
        let (rw, rp) = (words, &patterns);
        let mut rows = vec![0u64; b.words];
        for r in 0..nr {
            if bits::is_subset(&other, &rp[r * rw..(r + 1) * rw]) {
                bits::set(&mut rows, r);
            }
        }
        (rows, cols)
    } else {
        let cols = closure_cols(b, &other);
        (other, cols)
    }))
}

/// A validated anchor block for one target entry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnchorSet {
    pub query: EntryQuery,
    pub mode: AnchorMode,
    /// Sorted anchor rows (excluding the target row).
    pub rows: Vec<usize>,
    /// Sorted anchor columns (excluding the target column).
    pub cols: Vec<usize>,
    /// `d(b)` for each anchor column, parallel to `cols`.
    pub col_treatments: Vec<Treatment>,
}

impl AnchorSet {
    pub fn from_biclique(panel: &ObservedPanel, query: EntryQuery, mode: AnchorMode, b: Biclique) -> Self {
        let col_treatments = b.cols.iter().map(|&c| panel.treatment(query.row, c)).collect();
        AnchorSet {
            query,
            mode,
            rows: b.rows,
            cols: b.cols,
            col_treatments,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows.len(), self.cols.len())
    }

    /// Re-checks the treatment conditions against the panel.
    pub fn is_valid(&self, panel: &ObservedPanel) -> bool {
        let EntryQuery { row: i, col: j, level: d } = self.query;
        if self.rows.contains(&i) || self.cols.contains(&j) || self.col_treatments.len() != self.cols.len() {
            return false;
        }
        let rows_ok = self.rows.iter().all(|&a| panel.treatment(a, j) == d);
        let cols_ok = self.cols.iter().zip(&self.col_treatments).all(|(&b, &db)| {
            db.is_observed()
                && panel.treatment(i, b) == db
                && (self.mode == AnchorMode::Mixed || db == d)
                && self.rows.iter().all(|&a| panel.treatment(a, b) == db)
        });
        rows_ok && cols_ok
    }
}

/// Indicator, biclique search and conversion to an [`AnchorSet`].
pub fn find_anchor(
    panel: &ObservedPanel,
    query: &EntryQuery,
    mode: AnchorMode,
    min_rows: usize,
    min_cols: usize,
    search: BicliqueMode,
) -> Result<Option<AnchorSet>> {
    let b = build_indicator(panel, query, mode);
    Ok(max_biclique(&b, min_rows, min_cols, search)?.map(|bc| AnchorSet::from_biclique(panel, *query, mode, bc)))
}

/// `K` anchor blocks sharing the anchor columns, with disjoint row sets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubgroupPlan {
    pub subgroups: Vec<AnchorSet>,
    pub seed: u64,
}

impl SubgroupPlan {
    pub fn mode(&self) -> Option<AnchorMode> {
        self.subgroups.first().map(|s| s.mode)
    }
}

/// Shuffles the anchor rows with `seed` and splits them into `k` groups whose
/// sizes differ by at most one.
pub fn partition_subgroups(anchor: &AnchorSet, k: usize, seed: u64) -> Result<SubgroupPlan> {
    if k == 0 {
        return Err(Error::Domain("K must be >= 1".into()));
    }
    if k > anchor.rows.len() {
        return Err(Error::Infeasible(format!(
            "cannot split {} anchor rows into {k} subgroups",
            anchor.rows.len()
        )));
    }
    let mut rows = anchor.rows.clone();
    if k > 1 {
        rows.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let (base, extra) = (rows.len() / k, rows.len() % k);
    let mut start = 0;
    let subgroups = (0..k)
        .map(|g| {
            let len = base + usize::from(g < extra);
            let mut part = rows[start..start + len].to_vec();
            start += len;
            part.sort_unstable();
            AnchorSet {
                rows: part,
                ..anchor.clone()
            }
        })
        .collect();
    Ok(SubgroupPlan { subgroups, seed })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn panel(m: usize, n: usize, labels: &[u16]) -> ObservedPanel {
        let t = labels.iter().map(|&l| Treatment(l)).collect();
        let levels = *labels.iter().max().unwrap();
        ObservedPanel::new(m, n, levels.max(1), t, vec![1.0; m * n]).unwrap()
    }

    #[test]
    fn fully_treated_indicator() {
        let p = panel(3, 3, &[1; 9]);
        let b = build_indicator(&p, &EntryQuery::new(0, 0, 1), AnchorMode::Mixed);
        let dense = b.to_dense();
        for a in 0..3 {
            for c in 0..3 {
                assert_eq!(dense[a * 3 + c], a > 0 && c > 0, "({a},{c})");
            }
        }
    }

    #[test]
    fn zero_treatment_column_excluded() {
        #[rustfmt::skip]
        let p = panel(3, 3, &[
            1, 2, 0,
            1, 2, 0,
            1, 2, 0,
        ]);
        let b = build_indicator(&p, &EntryQuery::new(0, 0, 1), AnchorMode::Mixed);
        assert!(b.get(1, 1) && b.get(2, 1));
        assert!((0..3).all(|a| !b.get(a, 2)));
        let strict = build_indicator(&p, &EntryQuery::new(0, 0, 1), AnchorMode::Strict);
        assert_eq!(strict.ones(), 0);
    }

    #[test]
    fn full_and_diagonal_bicliques() {
        let full = IndicatorMatrix::from_dense(3, 3, &[true; 9]);
        for mode in [BicliqueMode::exact(), BicliqueMode::Greedy] {
            let bc = max_biclique(&full, 1, 1, mode).unwrap().unwrap();
            assert_eq!(bc.area(), 9);
        }
        let diag = IndicatorMatrix::from_dense(2, 2, &[true, false, false, true]);
        let bc = max_biclique(&diag, 1, 1, BicliqueMode::exact()).unwrap().unwrap();
        assert_eq!(bc.area(), 1);
        assert!(max_biclique(&diag, 2, 1, BicliqueMode::exact()).unwrap().is_none());
        assert!(max_biclique(&diag, 1, 2, BicliqueMode::Greedy).unwrap().is_none());
    }

    #[test]
    fn exact_budget() {
        let cells: Vec<bool> = (0..400).map(|k| (k * 7919 % 13) < 9).collect();
        let b = IndicatorMatrix::from_dense(20, 20, &cells);
        let err = max_biclique(&b, 1, 1, BicliqueMode::Exact { budget: 10 }).unwrap_err();
        assert!(matches!(err, Error::Budget(_)));
    }

    #[test]
    fn partition_sizes() {
        let anchor = AnchorSet {
            query: EntryQuery::new(0, 0, 1),
            mode: AnchorMode::Mixed,
            rows: (1..=6).collect(),
            cols: vec![1, 2],
            col_treatments: vec![Treatment(1); 2],
        };
        let plan = partition_subgroups(&anchor, 2, 7).unwrap();
        assert_eq!(plan.subgroups.iter().map(|s| s.rows.len()).collect::<Vec<_>>(), [3, 3]);
        let mut all: Vec<usize> = plan.subgroups.iter().flat_map(|s| s.rows.clone()).collect();
        all.sort();
        assert_eq!(all, anchor.rows);
        assert_eq!(plan, partition_subgroups(&anchor, 2, 7).unwrap());

        let five = AnchorSet {
            rows: (1..=5).collect(),
            ..anchor.clone()
        };
        let plan = partition_subgroups(&five, 2, 1).unwrap();
        assert_eq!(plan.subgroups.iter().map(|s| s.rows.len()).collect::<Vec<_>>(), [3, 2]);
        assert!(matches!(partition_subgroups(&five, 6, 1), Err(Error::Infeasible(_))));
    }
}
