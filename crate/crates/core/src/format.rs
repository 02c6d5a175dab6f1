//! Line-oriented stream files.
//!
//! ```text
//! n=3 model=insertion_only
//! 1
//! 2
//! ```
//!
//! The header is `n=<int> model=<name>` with optional `W=<int>` (window) and
//! `d=<int>` (matrix width). Update lines are `<coord>`, `<coord> <delta>`, or
//! `<row> <col> <delta>` when `d` is present. Blank lines and `#` comments are
//! skipped.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::stream::{validate_stream, Model, StreamConfig, Update, Violation};

/// One matrix update `(row, col, delta)`, 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MatrixUpdate {
    pub row: u64,
    pub col: u64,
    pub delta: i64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Body {
    Vector(Vec<Update>),
    Matrix { d: u64, entries: Vec<MatrixUpdate> },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StreamFile {
    pub config: StreamConfig,
    pub body: Body,
}

impl StreamFile {
    pub fn vector(config: StreamConfig, updates: Vec<Update>) -> Self {
        Self { config, body: Body::Vector(updates) }
    }

    pub fn from_coords(config: StreamConfig, coords: &[u64]) -> Self {
        Self::vector(config, crate::stream::unit_updates(coords))
    }

    pub fn updates(&self) -> Option<&[Update]> {
        match &self.body {
            Body::Vector(u) => Some(u),
            Body::Matrix { .. } => None,
        }
    }

    /// Coordinates of a unit-insertion stream.
    pub fn coords(&self) -> Option<Vec<u64>> {
        let u = self.updates()?;
        u.iter().all(|x| x.delta == 1).then(|| u.iter().map(|x| x.coord).collect())
    }

    pub fn len(&self) -> usize {
        match &self.body {
            Body::Vector(u) => u.len(),
            Body::Matrix { entries, .. } => entries.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        match &self.body {
            Body::Vector(u) => validate_stream(&self.config, u),
            Body::Matrix { d, entries } => {
                self.config.check()?;
                for (k, e) in entries.iter().enumerate() {
                    let fail = |violation| Err(Error::InvalidStream { position: k + 1, violation });
                    if e.row == 0 || e.row > self.config.n {
                        return fail(Violation::CoordOutOfRange { coord: e.row });
                    }
                    if e.col == 0 || e.col > *d {
                        return fail(Violation::CoordOutOfRange { coord: e.col });
                    }
                    if e.delta != 1 {
                        return fail(Violation::NonUnitDelta { delta: e.delta });
                    }
                }
                Ok(())
            }
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter_map(|(k, l)| {
            let l = l.split('#').next().unwrap().trim();
            (!l.is_empty()).then_some((k + 1, l))
        });
        let (hline, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "missing header".into() })?;
        let perr = |line: usize, msg: String| Error::Parse { line, msg };
        let (mut n, mut model, mut window, mut d) = (None, None, None, None);
        for field in header.split_whitespace() {
            let (key, value) = field.split_once('=').ok_or_else(|| perr(hline, format!("expected key=value, got `{field}`")))?;
            let int = || value.parse::<u64>().map_err(|_| perr(hline, format!("`{key}` needs an integer, got `{value}`")));
            match key {
                "n" => n = Some(int()?),
                "model" => model = Some(value.parse::<Model>().map_err(|e| perr(hline, e.to_string()))?),
                "W" => window = Some(int()?),
                "d" => d = Some(int()?),
                _ => return Err(perr(hline, format!("unknown header field `{key}`"))),
            }
        }
        let config = StreamConfig {
            n: n.ok_or_else(|| perr(hline, "header lacks n=".into()))?,
            model: model.ok_or_else(|| perr(hline, "header lacks model=".into()))?,
            window,
            seed: 0,
        };
        config.check().map_err(|e| perr(hline, e.to_string()))?;
        let mut vector = Vec::new();
        let mut entries = Vec::new();
        for (line, l) in lines {
            let nums: Vec<i64> = l
                .split_whitespace()
                .map(|t| t.parse::<i64>().map_err(|_| perr(line, format!("not an integer: `{t}`"))))
                .collect::<Result<_>>()?;
            let pos = |v: i64| u64::try_from(v).map_err(|_| perr(line, format!("negative index {v}")));
            match (d, nums.as_slice()) {
                (None, [c]) => vector.push(Update { coord: pos(*c)?, delta: 1, time: vector.len() as u64 + 1 }),
                (None, [c, delta]) => vector.push(Update { coord: pos(*c)?, delta: *delta, time: vector.len() as u64 + 1 }),
                (Some(_), [r, c, delta]) => entries.push(MatrixUpdate { row: pos(*r)?, col: pos(*c)?, delta: *delta }),
                (Some(_), _) => return Err(perr(line, "matrix lines are `<row> <col> <delta>`".into())),
                (None, _) => return Err(perr(line, "expected `<coord>` or `<coord> <delta>`".into())),
            }
        }
        let body = match d {
            None => Body::Vector(vector),
            Some(d) => Body::Matrix { d, entries },
        };
        Ok(Self { config, body })
    }

    /// Canonical text; unit deltas use the one-column shorthand.
    pub fn render(&self) -> String {
        let mut out = format!("n={} model={}", self.config.n, self.config.model);
        if let Some(w) = self.config.window {
            write!(out, " W={w}").unwrap();
        }
        if let Body::Matrix { d, .. } = &self.body {
            write!(out, " d={d}").unwrap();
        }
        out.push('\n');
        match &self.body {
            Body::Vector(u) => {
                for x in u {
                    if x.delta == 1 {
                        writeln!(out, "{}", x.coord).unwrap();
                    } else {
                        writeln!(out, "{} {}", x.coord, x.delta).unwrap();
                    }
                }
            }
            Body::Matrix { entries, .. } => {
                for e in entries {
                    writeln!(out, "{} {} {}", e.row, e.col, e.delta).unwrap();
                }
            }
        }
        out
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        Self::parse(&text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render()).map_err(|e| io_error(path, e))
    }
}

pub fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io { path: path.display().to_string(), msg: e.to_string() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_all_line_forms() {
        let f = StreamFile::parse("# demo\nn=3 model=strict_turnstile\n1\n2 3\n\n2 -1 # undo\n").unwrap();
        assert_eq!(f.config.n, 3);
        let u = f.updates().unwrap();
        assert_eq!(u.len(), 3);
        assert_eq!(u[1], Update { coord: 2, delta: 3, time: 2 });
        assert_eq!(u[2].delta, -1);
        f.validate().unwrap();
    }

    #[test]
    fn matrix_and_window_headers() {
        let f = StreamFile::parse("n=2 model=insertion_only d=3\n1 3 1\n2 1 1\n").unwrap();
        assert!(matches!(f.body, Body::Matrix { d: 3, ref entries } if entries.len() == 2));
        f.validate().unwrap();
        let g = StreamFile::parse("n=2 model=sliding_window W=4\n1\n").unwrap();
        assert_eq!(g.config.window, Some(4));
    }

    #[test]
    fn reports_line_numbers() {
        assert_eq!(StreamFile::parse("n=2 model=insertion_only\n1\nx\n").unwrap_err(), Error::Parse { line: 3, msg: "not an integer: `x`".into() });
        assert!(matches!(StreamFile::parse("model=insertion_only\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(StreamFile::parse("n=2 model=sliding_window\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(StreamFile::parse(""), Err(Error::Parse { .. })));
    }

    #[test]
    fn validation_flags_bad_updates() {
        let f = StreamFile::parse("n=2 model=insertion_only\n1\n3\n").unwrap();
        assert!(matches!(f.validate(), Err(Error::InvalidStream { position: 2, .. })));
        let g = StreamFile::parse("n=2 model=strict_turnstile\n1 1\n1 -2\n").unwrap();
        assert!(matches!(g.validate(), Err(Error::InvalidStream { position: 2, .. })));
    }

    #[test]
    fn missing_file_names_the_path() {
        let e = StreamFile::read(Path::new("/nonexistent/s.txt")).unwrap_err();
        assert!(e.to_string().starts_with("/nonexistent/s.txt"));
    }

    proptest! {
        #[test]
        fn render_parse_round_trip(ops in proptest::collection::vec((1u64..6, -3i64..4), 0..40)) {
            let updates: Vec<Update> = ops.iter().enumerate().map(|(k, &(coord, delta))| Update { coord, delta, time: k as u64 + 1 }).collect();
            let f = StreamFile::vector(StreamConfig::new(5, Model::StrictTurnstile).unwrap(), updates);
            prop_assert_eq!(StreamFile::parse(&f.render()).unwrap(), f);
        }
    }
}
