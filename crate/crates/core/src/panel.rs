//! Observation model: per-entry treatment labels and the single outcome
//! observed under the assigned label.

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A treatment level. `0` means the entry was not exposed and its outcome is
/// missing; `1..=l` are the exposure levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Treatment(pub u16);

impl Treatment {
    pub const MISSING: Treatment = Treatment(0);

    pub fn is_observed(self) -> bool {
        self.0 != 0
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for Treatment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Target of a single estimation: the potential outcome of `(row, col)`
/// under level `level`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EntryQuery {
    pub row: usize,
    pub col: usize,
    pub level: Treatment,
}

impl EntryQuery {
    pub fn new(row: usize, col: usize, level: u16) -> Self {
        EntryQuery {
            row,
            col,
            level: Treatment(level),
        }
    }
}

/// The `m x n` observed panel.
///
/// Outcomes are stored only for entries with a nonzero label. Reading a
/// missing entry through [`ObservedPanel::outcome`] is an error unless the
/// panel was switched to zero-fill mode.
#[derive(Debug, Clone)]
pub struct ObservedPanel {
    m: usize,
    n: usize,
    levels: u16,
    treatments: Vec<Treatment>,
    outcomes: Vec<f64>,
    row_ids: Vec<String>,
    col_ids: Vec<String>,
    zero_fill: bool,
}

impl ObservedPanel {
    /// Builds a panel from row-major treatment labels and outcomes. Outcomes at
    /// missing entries are ignored.
    pub fn new(
        m: usize,
        n: usize,
        levels: u16,
        treatments: Vec<Treatment>,
        outcomes: Vec<f64>,
    ) -> Result<Self> {
        if treatments.len() != m * n || outcomes.len() != m * n {
            return Err(Error::Domain(format!(
                "expected {} cells, got {} labels and {} outcomes",
                m * n,
                treatments.len(),
                outcomes.len()
            )));
        }
        if let Some(t) = treatments.iter().find(|t| t.0 > levels) {
            return Err(Error::Domain(format!(
                "treatment label {} outside 0..={levels}",
                t.0
            )));
        }
        let outcomes = treatments
            .iter()
            .zip(outcomes)
            .map(|(t, y)| if t.is_observed() { y } else { f64::NAN })
            .collect();
        Ok(ObservedPanel {
            m,
            n,
            levels,
            treatments,
            outcomes,
            row_ids: (0..m).map(|i| i.to_string()).collect(),
            col_ids: (0..n).map(|j| j.to_string()).collect(),
            zero_fill: false,
        })
    }

    /// Replaces the default `0..m` / `0..n` ids.
    pub fn with_ids(mut self, row_ids: Vec<String>, col_ids: Vec<String>) -> Result<Self> {
        if row_ids.len() != self.m || col_ids.len() != self.n {
            return Err(Error::Domain("id list length mismatch".into()));
        }
        self.row_ids = row_ids;
        self.col_ids = col_ids;
        Ok(self)
    }

    /// Treat missing entries as structural zeros when read through
    /// [`ObservedPanel::outcome`]. Anchor search is unaffected.
    pub fn with_zero_fill(mut self, zero_fill: bool) -> Self {
        self.zero_fill = zero_fill;
        self
    }

    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn cols(&self) -> usize {
        self.n
    }

    pub fn levels(&self) -> u16 {
        self.levels
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn col_ids(&self) -> &[String] {
        &self.col_ids
    }

    #[inline]
    pub fn treatment(&self, i: usize, j: usize) -> Treatment {
        self.treatments[i * self.n + j]
    }

    /// Row-major label grid.
    pub fn treatments(&self) -> &[Treatment] {
        &self.treatments
    }

    pub fn outcome(&self, i: usize, j: usize) -> Result<f64> {
        if self.treatment(i, j).is_observed() {
            Ok(self.outcomes[i * self.n + j])
        } else if self.zero_fill {
            Ok(0.0)
        } else {
            Err(Error::MissingEntry { row: i, col: j })
        }
    }

    /// Outcome of an entry already known to be observed.
    #[inline]
    pub(crate) fn observed_unchecked(&self, i: usize, j: usize) -> f64 {
        debug_assert!(self.treatment(i, j).is_observed());
        self.outcomes[i * self.n + j]
    }

    pub fn observed_count(&self) -> usize {
        self.treatments.iter().filter(|t| t.is_observed()).count()
    }

    pub fn check_query(&self, q: &EntryQuery) -> Result<()> {
        if q.row >= self.m || q.col >= self.n {
            return Err(Error::Domain(format!(
                "query ({}, {}) outside {}x{} panel",
                q.row, q.col, self.m, self.n
            )));
        }
        if q.level.0 == 0 || q.level.0 > self.levels {
            return Err(Error::Domain(format!(
                "target level {} outside 1..={}",
                q.level, self.levels
            )));
        }
        Ok(())
    }

    /// Copy of the panel with every observed outcome at `level` multiplied by
    /// `factor`.
    pub fn scale_level(&self, level: Treatment, factor: f64) -> ObservedPanel {
        let mut out = self.clone();
        for (t, y) in out.treatments.iter().zip(out.outcomes.iter_mut()) {
            if *t == level {
                *y *= factor;
            }
        }
        out
    }
}

/// Fraction of the `m * n` entries carrying label `level`.
///
/// Nonzero levels return the correctly rounded `count / (m n)`. The missing
/// share (level 0) is the complement, adjusted by a few ulps so that the
/// compensated sum over all levels is exactly 1.
pub fn observed_fraction(panel: &ObservedPanel, level: Treatment) -> f64 {
    let total = panel.rows() * panel.cols();
    if total == 0 {
        return 0.0;
    }
    let mut counts = vec![0usize; panel.levels() as usize + 1];
    for t in panel.treatments() {
        counts[t.index()] += 1;
    }
    let frac = |c: usize| c as f64 / total as f64;
    if level.is_observed() {
        return counts.get(level.index()).map_or(0.0, |&c| frac(c));
    }
    let rest: Vec<f64> = counts[1..].iter().map(|&c| frac(c)).collect();
    let mut f0 = frac(counts[0]);
    for _ in 0..16 {
        let s = crate::harness::compensated_sum(std::iter::once(f0).chain(rest.iter().copied()));
        if s == 1.0 {
            break;
        }
        f0 = if s < 1.0 { f0.next_up() } else { f0.next_down() };
    }
    f0
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PanelCsvOptions {
    /// Declared number of nonzero levels. Inferred from the largest label when
    /// absent.
    pub levels: Option<u16>,
}

pub const PANEL_CSV_HEADER: [&str; 4] = ["row_id", "col_id", "treatment", "outcome"];

pub fn load_panel_csv(path: impl AsRef<Path>, opts: PanelCsvOptions) -> Result<ObservedPanel> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_panel_csv(file, path, opts)
}

pub fn read_panel_csv<R: Read>(
    reader: R,
    path: &Path,
    opts: PanelCsvOptions,
) -> Result<ObservedPanel> {
    let parse_err = |line: u64, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    if header.iter().collect::<Vec<_>>() != PANEL_CSV_HEADER {
        return Err(parse_err(
            1,
            format!("expected header {:?}", PANEL_CSV_HEADER.join(",")),
        ));
    }

    let mut row_index: HashMap<String, usize> = HashMap::new();
    let mut col_index: HashMap<String, usize> = HashMap::new();
    let mut row_ids = Vec::new();
    let mut col_ids = Vec::new();
    let mut cells: HashMap<(usize, usize), (u16, f64, u64)> = HashMap::new();
    let mut max_label = 0u16;

    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 4 {
            return Err(parse_err(line, format!("expected 4 fields, got {}", rec.len())));
        }
        let label: u16 = rec[2]
            .parse()
            .map_err(|_| parse_err(line, format!("bad treatment {:?}", &rec[2])))?;
        if let Some(l) = opts.levels {
            if label > l {
                return Err(Error::Domain(format!(
                    "line {line}: treatment {label} outside 0..={l}"
                )));
            }
        }
        let outcome = match (label, rec[3].is_empty()) {
            (0, true) => f64::NAN,
            (0, false) => {
                return Err(parse_err(line, "outcome given for treatment 0".into()));
            }
            (_, true) => return Err(parse_err(line, "missing outcome".into())),
            (_, false) => rec[3]
                .parse::<f64>()
                .ok()
                .filter(|y| y.is_finite())
                .ok_or_else(|| parse_err(line, format!("bad outcome {:?}", &rec[3])))?,
        };
        max_label = max_label.max(label);

        let i = intern(&mut row_index, &mut row_ids, &rec[0]);
        let j = intern(&mut col_index, &mut col_ids, &rec[1]);
        match cells.entry((i, j)) {
            Entry::Occupied(_) => {
                return Err(Error::DuplicateCell {
                    row: rec[0].to_string(),
                    col: rec[1].to_string(),
                    line,
                })
            }
            Entry::Vacant(v) => {
                v.insert((label, outcome, line));
            }
        }
    }

    let levels = opts.levels.unwrap_or(max_label.max(1));
    let (m, n) = (row_ids.len(), col_ids.len());
    let mut treatments = vec![Treatment::MISSING; m * n];
    let mut outcomes = vec![f64::NAN; m * n];
    for ((i, j), (label, y, _)) in cells {
        treatments[i * n + j] = Treatment(label);
        outcomes[i * n + j] = y;
    }
    ObservedPanel::new(m, n, levels, treatments, outcomes)?.with_ids(row_ids, col_ids)
}

fn intern(index: &mut HashMap<String, usize>, ids: &mut Vec<String>, id: &str) -> usize {
    if let Some(&k) = index.get(id) {
        return k;
    }
    ids.push(id.to_string());
    index.insert(id.to_string(), ids.len() - 1);
    ids.len() - 1
}

/// Writes every cell of the panel, missing ones included, in row-major order.
pub fn write_panel_csv(panel: &ObservedPanel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_panel_to(panel, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_panel_to<W: Write>(panel: &ObservedPanel, w: &mut W) -> std::io::Result<()> {
    writeln!(w, "{}", PANEL_CSV_HEADER.join(","))?;
    for i in 0..panel.rows() {
        for j in 0..panel.cols() {
            let t = panel.treatment(i, j);
            let (ri, cj) = (&panel.row_ids()[i], &panel.col_ids()[j]);
            if t.is_observed() {
                writeln!(w, "{},{},{},{}", ri, cj, t, panel.observed_unchecked(i, j))?;
            } else {
                writeln!(w, "{ri},{cj},0,")?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, levels: Option<u16>) -> Result<ObservedPanel> {
        read_panel_csv(text.as_bytes(), Path::new("mem.csv"), PanelCsvOptions { levels })
    }

    const FOUR: &str = "row_id,col_id,treatment,outcome\n0,0,1,2.0\n0,1,2,3.0\n1,0,0,\n1,1,1,5.0\n";

    #[test]
    fn loads_small_panel() {
        let p = parse(FOUR, None).unwrap();
        assert_eq!((p.rows(), p.cols()), (2, 2));
        assert_eq!(p.observed_count(), 3);
        assert_eq!(p.levels(), 2);
        assert_eq!(p.outcome(0, 1).unwrap(), 3.0);
        assert!(matches!(p.outcome(1, 0), Err(Error::MissingEntry { .. })));
        assert_eq!(p.clone().with_zero_fill(true).outcome(1, 0).unwrap(), 0.0);
    }

    #[test]
    fn duplicate_cell_is_conflict() {
        let text = format!("{FOUR}0,0,1,9.0\n");
        assert!(matches!(parse(&text, None), Err(Error::DuplicateCell { line: 6, .. })));
    }

    #[test]
    fn label_above_declared_levels() {
        let text = "row_id,col_id,treatment,outcome\na,b,7,1.0\n";
        assert!(matches!(parse(text, Some(4)), Err(Error::Domain(_))));
    }

    #[test]
    fn malformed_row_names_line() {
        let text = "row_id,col_id,treatment,outcome\na,b,1,1.0\na,c,x,1.0\n";
        match parse(text, None) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(parse("r,c,t,y\n", None).is_err());
        assert!(parse("row_id,col_id,treatment,outcome\na,b,1,\n", None).is_err());
    }

    #[test]
    fn string_ids_keep_first_appearance_order() {
        let text = "row_id,col_id,treatment,outcome\nCA,1988,1,90.1\nAZ,1988,2,80\nCA,1989,0,\n";
        let p = parse(text, None).unwrap();
        assert_eq!(p.row_ids(), ["CA", "AZ"]);
        assert_eq!(p.col_ids(), ["1988", "1989"]);
        assert_eq!(p.treatment(1, 1), Treatment::MISSING);
    }

    #[test]
    fn fractions() {
        let p = parse(FOUR, None).unwrap();
        assert_eq!(observed_fraction(&p, Treatment(2)), 0.25);
        let total: f64 = (0..=2).map(|d| observed_fraction(&p, Treatment(d))).sum();
        assert_eq!(total, 1.0);

        let empty = ObservedPanel::new(2, 3, 2, vec![Treatment(0); 6], vec![0.0; 6]).unwrap();
        assert_eq!(observed_fraction(&empty, Treatment(1)), 0.0);
        assert_eq!(observed_fraction(&empty, Treatment(2)), 0.0);
    }

    #[test]
    fn round_trip_bits() {
        let p = parse(FOUR, None).unwrap().scale_level(Treatment(1), 1.0 / 3.0);
        let mut buf = Vec::new();
        write_panel_to(&p, &mut buf).unwrap();
        let q = read_panel_csv(buf.as_slice(), Path::new("x"), PanelCsvOptions::default()).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(p.treatment(i, j), q.treatment(i, j));
                if p.treatment(i, j).is_observed() {
                    assert_eq!(p.outcome(i, j).unwrap().to_bits(), q.outcome(i, j).unwrap().to_bits());
                }
            }
        }
    }
}
