//! Plain-text serialization of grid signals: CSV for data, 16-bit ASCII PGM
//! (P2) for 2D images.
//!
//! Values are written with Rust's shortest round-trip float formatting, so a
//! write/read cycle is lossless and repeated writes are byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridSignal};

/// CSV text: one value per line in 1D, `N` comma-separated rows in 2D.
pub fn signal_to_csv(x: &GridSignal) -> String {
    let mut out = String::new();
    let n = x.grid().size();
    match x.grid().dim() {
        1 => {
            for v in x.values() {
                writeln!(out, "{v}").unwrap();
            }
        }
        _ => {
            for row in x.values().chunks(n) {
                let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                writeln!(out, "{}", line.join(",")).unwrap();
            }
        }
    }
    out
}

/// Parses CSV text written by [`signal_to_csv`]; the dimension is inferred
/// from the row width and `fc` supplied by the caller.
pub fn signal_from_csv(text: &str, fc: usize) -> Result<GridSignal> {
    let rows: Vec<Vec<f64>> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|e| Error::Parse(format!("{t:?}: {e}"))))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    if rows.is_empty() {
        return Err(Error::Parse("empty CSV".into()));
    }
    let width = rows[0].len();
    if width == 1 {
        let grid = Grid::one_d(rows.len(), fc)?;
        GridSignal::new(grid, rows.into_iter().map(|r| r[0]).collect())
    } else {
        if rows.len() != width || rows.iter().any(|r| r.len() != width) {
            return Err(Error::Parse(format!("2D CSV must be square, got {} rows of width {width}", rows.len())));
        }
        let grid = Grid::two_d(width, fc)?;
        GridSignal::new(grid, rows.into_iter().flatten().collect())
    }
}

/// Linear intensity map recorded next to a PGM image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PgmScaling {
    /// Data value mapped to 0.
    pub min: f64,
    /// Data value mapped to `maxval`.
    pub max: f64,
    pub maxval: u16,
}

impl PgmScaling {
    /// Grey level for a data value (clamped into range).
    pub fn level(&self, v: f64) -> u16 {
        if self.max <= self.min {
            return 0;
        }
        let t = ((v - self.min) / (self.max - self.min)).clamp(0.0, 1.0);
        (t * self.maxval as f64).round() as u16
    }

    pub fn value(&self, level: u16) -> f64 {
        self.min + (self.max - self.min) * level as f64 / self.maxval as f64
    }
}

/// P2 image of a 2D signal with `[0, max]` mapped linearly onto `[0, 65535]`.
pub fn signal_to_pgm(x: &GridSignal) -> Result<(String, PgmScaling)> {
    if x.grid().dim() != 2 {
        return Err(Error::InvalidArgument("PGM output needs a 2D signal".into()));
    }
    let n = x.grid().size();
    let scaling = PgmScaling { min: 0.0, max: x.max().max(0.0), maxval: u16::MAX };
    let mut out = format!("P2\n{n} {n}\n{}\n", scaling.maxval);
    for row in x.values().chunks(n) {
        let line: Vec<String> = row.iter().map(|&v| scaling.level(v).to_string()).collect();
        writeln!(out, "{}", line.join(" ")).unwrap();
    }
    Ok((out, scaling))
}

/// Reads back grey levels of a P2 image as data values via `scaling`.
pub fn signal_from_pgm(text: &str, scaling: &PgmScaling, fc: usize) -> Result<GridSignal> {
    let mut tokens = text
        .lines()
        .filter(|l| !l.trim_start().starts_with('#'))
        .flat_map(str::split_whitespace);
    if tokens.next() != Some("P2") {
        return Err(Error::Parse("not a P2 image".into()));
    }
    let mut num = || -> Result<usize> {
        tokens
            .next()
            .ok_or_else(|| Error::Parse("truncated PGM".into()))?
            .parse::<usize>()
            .map_err(|e| Error::Parse(e.to_string()))
    };
    let (w, h, _maxval) = (num()?, num()?, num()?);
    if w != h {
        return Err(Error::Parse("PGM must be square".into()));
    }
    let values = (0..w * h).map(|_| num().map(|l| scaling.value(l as u16))).collect::<Result<Vec<_>>>()?;
    GridSignal::new(Grid::two_d(w, fc)?, values)
}

/// Writes `contents` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().ok_or_else(|| Error::InvalidArgument(format!("bad path {path:?}")))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn csv_layouts() {
        let g1 = Grid::one_d(4, 1).unwrap();
        let x = GridSignal::new(g1, vec![0.0, 1.5, -2.0, 1e-17]).unwrap();
        assert_eq!(signal_to_csv(&x), "0\n1.5\n-2\n0.00000000000000001\n");
        let g2 = Grid::two_d(2, 0).unwrap();
        let y = GridSignal::new(g2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(signal_to_csv(&y), "1,2\n3,4\n");
        assert_eq!(signal_from_csv("1,2\n3,4\n", 0).unwrap(), y);
        assert!(signal_from_csv("1,2\n3\n", 0).is_err());
        assert!(signal_from_csv("", 0).is_err());
    }

    #[test]
    fn pgm_scaling_and_header() {
        let g = Grid::two_d(2, 0).unwrap();
        let y = GridSignal::new(g, vec![0.0, 5.0, 10.0, -1.0]).unwrap();
        let (text, sc) = signal_to_pgm(&y).unwrap();
        assert!(text.starts_with("P2\n2 2\n65535\n"));
        assert_eq!(sc.max, 10.0);
        assert!(text.contains("0 32768\n65535 0\n"));
        let back = signal_from_pgm(&text, &sc, 0).unwrap();
        assert!((back.values()[1] - 5.0).abs() < 1e-3);
        assert!(signal_to_pgm(&GridSignal::zeros(Grid::one_d(4, 1).unwrap())).is_err());
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = std::env::temp_dir().join(format!("superres-io-{}", std::process::id()));
        let p = dir.join("a.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "two");
        fs::remove_dir_all(dir).unwrap();
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_lossless(vals in prop::collection::vec(-1e6f64..1e6, 16)) {
            let g = Grid::two_d(4, 1).unwrap();
            let x = GridSignal::new(g, vals).unwrap();
            prop_assert_eq!(signal_from_csv(&signal_to_csv(&x), 1).unwrap(), x);
        }
    }
}
