use std::fmt;

use thiserror::Error;

/// 802.11n rate-1/2, n = 648, Z = 27 base matrix in base-matrix text format.
pub const WLAN_648_R12_BASE: &str = include_str!("../../assets/wlan_n648_r12.base");

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LdpcCodeError {
    #[error("empty input")]
    Empty,
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("line {line}: expected {expected} entries, found {found}")]
    CountMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("base entry ({row}, {col}) = {shift} outside 0..{z}")]
    ShiftOutOfRange {
        row: usize,
        col: usize,
        shift: i64,
        z: usize,
    },
    #[error("index {index} out of range 1..={limit} ({context})")]
    IndexOutOfRange {
        index: usize,
        limit: usize,
        context: String,
    },
    #[error("duplicate column {col} in row {row}")]
    DuplicateEntry { row: usize, col: usize },
    #[error("row and column sections disagree: {0}")]
    Inconsistent(String),
}

fn parse_err(line: usize, reason: impl Into<String>) -> LdpcCodeError {
    LdpcCodeError::Parse {
        line,
        reason: reason.into(),
    }
}

/// Grid of cyclic shifts; `None` is the all-zero block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaseMatrix {
    rows: usize,
    cols: usize,
    z: usize,
    entries: Vec<Option<usize>>,
}

impl BaseMatrix {
    /// `entries` is row-major; `-1` marks an empty block.
    pub fn new(rows: usize, cols: usize, z: usize, entries: &[i64]) -> Result<Self, LdpcCodeError> {
        if rows == 0 || cols == 0 || z == 0 {
            return Err(LdpcCodeError::Empty);
        }
        if entries.len() != rows * cols {
            return Err(LdpcCodeError::CountMismatch {
                line: 0,
                expected: rows * cols,
                found: entries.len(),
            });
        }
        let entries = entries
            .iter()
            .enumerate()
            .map(|(i, &s)| match s {
                -1 => Ok(None),
                s if s >= 0 && (s as usize) < z => Ok(Some(s as usize)),
                s => Err(LdpcCodeError::ShiftOutOfRange {
                    row: i / cols,
                    col: i % cols,
                    shift: s,
                    z,
                }),
            })
            .collect::<Result<_, _>>()?;
        Ok(Self {
            rows,
            cols,
            z,
            entries,
        })
    }

    /// Header `rows cols Z`, then one line of shifts per base row.
    pub fn parse(text: &str) -> Result<Self, LdpcCodeError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hline, header) = lines.next().ok_or(LdpcCodeError::Empty)?;
        let dims = parse_ints::<usize>(hline, header)?;
        let [rows, cols, z] = dims[..] else {
            return Err(parse_err(hline, "header must be `rows cols Z`"));
        };
        let mut entries = Vec::with_capacity(rows * cols);
        let mut seen = 0;
        for (n, line) in lines {
            let row = parse_ints::<i64>(n, line)?;
            if row.len() != cols {
                return Err(LdpcCodeError::CountMismatch {
                    line: n,
                    expected: cols,
                    found: row.len(),
                });
            }
            entries.extend(row);
            seen += 1;
        }
        if seen != rows {
            return Err(parse_err(0, format!("expected {rows} base rows, found {seen}")));
        }
        Self::new(rows, cols, z, &entries)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn lift(&self) -> usize {
        self.z
    }

    pub fn shift(&self, row: usize, col: usize) -> Option<usize> {
        self.entries[row * self.cols + col]
    }

    pub fn nonempty_blocks(&self) -> usize {
        self.entries.iter().filter(|e| e.is_some()).count()
    }
}

fn parse_ints<T: std::str::FromStr>(line: usize, text: &str) -> Result<Vec<T>, LdpcCodeError>
where
    T::Err: fmt::Display,
{
    text.split_whitespace()
        .map(|t| t.parse::<T>().map_err(|e| parse_err(line, format!("`{t}`: {e}"))))
        .collect()
}

/// Sparse parity-check matrix with ascending column order in every row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParityCheckMatrix {
    n: usize,
    rows: Vec<Vec<usize>>,
    cols: Vec<Vec<usize>>,
    row_offsets: Vec<usize>,
    base: Option<BaseMatrix>,
}

impl ParityCheckMatrix {
    /// Builds from row adjacency; columns within a row are sorted.
    pub fn from_rows(n: usize, mut rows: Vec<Vec<usize>>) -> Result<Self, LdpcCodeError> {
        if n == 0 || rows.is_empty() {
            return Err(LdpcCodeError::Empty);
        }
        let mut cols = vec![Vec::new(); n];
        for (j, row) in rows.iter_mut().enumerate() {
            row.sort_unstable();
            for w in row.windows(2) {
                if w[0] == w[1] {
                    return Err(LdpcCodeError::DuplicateEntry { row: j, col: w[0] });
                }
            }
            for &c in row.iter() {
                if c >= n {
                    return Err(LdpcCodeError::IndexOutOfRange {
                        index: c + 1,
                        limit: n,
                        context: format!("row {j}"),
                    });
                }
                cols[c].push(j);
            }
        }
        let mut row_offsets = Vec::with_capacity(rows.len() + 1);
        row_offsets.push(0);
        for row in &rows {
            row_offsets.push(row_offsets.last().unwrap() + row.len());
        }
        Ok(Self {
            n,
            rows,
            cols,
            row_offsets,
            base: None,
        })
    }

    /// Number of checks.
    pub fn m(&self) -> usize {
        self.rows.len()
    }

    /// Code length.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, j: usize) -> &[usize] {
        &self.rows[j]
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    pub fn col(&self, c: usize) -> &[usize] {
        &self.cols[c]
    }

    /// Index of the first edge of row `j` in row-major edge order.
    pub fn row_offset(&self, j: usize) -> usize {
        self.row_offsets[j]
    }

    pub fn edges(&self) -> usize {
        *self.row_offsets.last().unwrap()
    }

    pub fn base_matrix(&self) -> Option<&BaseMatrix> {
        self.base.as_ref()
    }

    /// Serializes to alist, padding short lines with zeros.
    pub fn to_alist(&self) -> String {
        let max_col = self.cols.iter().map(Vec::len).max().unwrap_or(0);
        let max_row = self.rows.iter().map(Vec::len).max().unwrap_or(0);
        let join = |v: &[usize], pad: usize| {
            let mut parts: Vec<String> = v.iter().map(|x| (x + 1).to_string()).collect();
            parts.resize(pad, "0".into());
            parts.join(" ")
        };
        let mut out = format!("{} {}\n{} {}\n", self.n, self.m(), max_col, max_row);
        let degs = |lists: &[Vec<usize>]| {
            lists.iter().map(|l| l.len().to_string()).collect::<Vec<_>>().join(" ")
        };
        out.push_str(&degs(&self.cols));
        out.push('\n');
        out.push_str(&degs(&self.rows));
        out.push('\n');
        for c in &self.cols {
            out.push_str(&join(c, max_col));
            out.push('\n');
        }
        for r in &self.rows {
            out.push_str(&join(r, max_row));
            out.push('\n');
        }
        out
    }
}

/// Replaces every base entry with a `Z x Z` zero block or a right-shifted
/// identity: shift `s` puts row `i` of the block at column `(i + s) mod Z`.
pub fn expand_base_matrix(b: &BaseMatrix) -> ParityCheckMatrix {
    let z = b.z;
    let mut rows = vec![Vec::new(); b.rows * z];
    for r in 0..b.rows {
        for c in 0..b.cols {
            if let Some(s) = b.shift(r, c) {
                for i in 0..z {
                    rows[r * z + i].push(c * z + (i + s) % z);
                }
            }
        }
    }
    let mut h = ParityCheckMatrix::from_rows(b.cols * z, rows)
        .expect("expansion of a validated base matrix is well formed");
    h.base = Some(b.clone());
    h
}

/// Parses the alist interchange format.
pub fn parse_alist(text: &str) -> Result<ParityCheckMatrix, LdpcCodeError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| parse_err(0, format!("missing {what}")))
            .and_then(|(n, l)| Ok((n, parse_ints::<usize>(n, l)?)))
    };
    let first = next("dimensions");
    let (n1, dims) = match first {
        Err(_) if text.trim().is_empty() => return Err(LdpcCodeError::Empty),
        r => r?,
    };
    let [n, m] = dims[..] else {
        return Err(LdpcCodeError::CountMismatch {
            line: n1,
            expected: 2,
            found: dims.len(),
        });
    };
    let (n2, maxes) = next("maximum degrees")?;
    let [max_col, max_row] = maxes[..] else {
        return Err(LdpcCodeError::CountMismatch {
            line: n2,
            expected: 2,
            found: maxes.len(),
        });
    };
    let (n3, col_deg) = next("column degrees")?;
    if col_deg.len() != n {
        return Err(LdpcCodeError::CountMismatch {
            line: n3,
            expected: n,
            found: col_deg.len(),
        });
    }
    let (n4, row_deg) = next("row degrees")?;
    if row_deg.len() != m {
        return Err(LdpcCodeError::CountMismatch {
            line: n4,
            expected: m,
            found: row_deg.len(),
        });
    }
    for (line, degs, max) in [(n3, &col_deg, max_col), (n4, &row_deg, max_row)] {
        if let Some(&d) = degs.iter().find(|&&d| d > max) {
            return Err(parse_err(line, format!("degree {d} exceeds declared maximum {max}")));
        }
    }

    let mut read_lists = |count: usize, degs: &[usize], limit: usize, what: &str| {
        let mut lists = Vec::with_capacity(count);
        for (i, &deg) in degs.iter().enumerate().take(count) {
            let (line, vals) = next(what)?;
            let entries: Vec<usize> = vals.into_iter().filter(|&v| v != 0).collect();
            if entries.len() != deg {
                return Err(LdpcCodeError::CountMismatch {
                    line,
                    expected: deg,
                    found: entries.len(),
                });
            }
            let mut list = Vec::with_capacity(deg);
            for v in entries {
                if v > limit {
                    return Err(LdpcCodeError::IndexOutOfRange {
                        index: v,
                        limit,
                        context: format!("{what} {}", i + 1),
                    });
                }
                list.push(v - 1);
            }
            lists.push(list);
        }
        Ok(lists)
    };
    let col_lists = read_lists(n, &col_deg, m, "column")?;
    let row_lists = read_lists(m, &row_deg, n, "row")?;

    let h = ParityCheckMatrix::from_rows(n, row_lists)?;
    for (c, list) in col_lists.into_iter().enumerate() {
        let mut list = list;
        list.sort_unstable();
        if list != h.cols[c] {
            return Err(LdpcCodeError::Inconsistent(format!(
                "column {} lists rows {:?}, row section implies {:?}",
                c + 1,
                list.iter().map(|r| r + 1).collect::<Vec<_>>(),
                h.cols[c].iter().map(|r| r + 1).collect::<Vec<_>>()
            )));
        }
    }
    Ok(h)
}

/// The bundled 802.11n rate-1/2, n = 648 code.
pub fn wlan_648_r12() -> ParityCheckMatrix {
    let b = BaseMatrix::parse(WLAN_648_R12_BASE).expect("bundled base matrix parses");
    expand_base_matrix(&b)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodeStats {
    pub m: usize,
    pub n: usize,
    pub edges: usize,
    pub min_row_weight: usize,
    pub max_row_weight: usize,
    pub min_col_weight: usize,
    pub max_col_weight: usize,
    /// `(N - M) / N`, assuming full-rank checks.
    pub rate: f64,
    /// Rows of weight below 2, which the decoder rejects.
    pub degenerate_rows: Vec<usize>,
}

pub fn code_stats(h: &ParityCheckMatrix) -> CodeStats {
    let rw = h.rows.iter().map(Vec::len);
    let cw = h.cols.iter().map(Vec::len);
    CodeStats {
        m: h.m(),
        n: h.n(),
        edges: h.edges(),
        min_row_weight: rw.clone().min().unwrap_or(0),
        max_row_weight: rw.max().unwrap_or(0),
        min_col_weight: cw.clone().min().unwrap_or(0),
        max_col_weight: cw.max().unwrap_or(0),
        rate: (h.n() as f64 - h.m() as f64) / h.n() as f64,
        degenerate_rows: (0..h.m()).filter(|&j| h.row(j).len() < 2).collect(),
    }
}

impl fmt::Display for CodeStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "M: {}", self.m)?;
        writeln!(f, "N: {}", self.n)?;
        writeln!(f, "edges: {}", self.edges)?;
        writeln!(f, "row weight: {}..{}", self.min_row_weight, self.max_row_weight)?;
        writeln!(f, "column weight: {}..{}", self.min_col_weight, self.max_col_weight)?;
        writeln!(f, "rate estimate: {:.4}", self.rate)?;
        if !self.degenerate_rows.is_empty() {
            writeln!(
                f,
                "WARNING: {} row(s) of weight < 2 cannot be decoded (first: {})",
                self.degenerate_rows.len(),
                self.degenerate_rows[0]
            )?;
        }
        Ok(())
    }
}
