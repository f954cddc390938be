//! Matrix Market coordinate I/O (`real`, `general` or `symmetric`).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<CsrMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_matrix_market(BufReader::new(file), path)
}

/// Parses Matrix Market text from any reader; `origin` only labels errors.
pub fn parse_matrix_market<R: Read>(reader: R, origin: &Path) -> Result<CsrMatrix> {
    let err = |line: usize, message: String| Error::Parse {
        path: origin.to_owned(),
        line,
        message,
    };
    let mut lines = BufReader::new(reader).lines().enumerate();

    let (_, header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let header = header.map_err(|e| err(1, e.to_string()))?;
    let tokens: Vec<String> = header.split_whitespace().map(str::to_lowercase).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(err(1, format!("malformed header `{header}`")));
    }
    if tokens[2] != "coordinate" {
        return Err(err(1, format!("unsupported format `{}`", tokens[2])));
    }
    if tokens[3] != "real" && tokens[3] != "integer" {
        return Err(err(1, format!("unsupported field `{}`", tokens[3])));
    }
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        other => return Err(err(1, format!("unsupported symmetry `{other}`"))),
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    let mut seen = std::collections::HashSet::new();

    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line.map_err(|e| err(lineno, e.to_string()))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        match size {
            None => {
                if fields.len() != 3 {
                    return Err(err(
                        lineno,
                        format!("expected `rows cols nnz`, got `{trimmed}`"),
                    ));
                }
                let parse = |s: &str| {
                    s.parse::<usize>()
                        .map_err(|_| err(lineno, format!("invalid size field `{s}`")))
                };
                let dims = (parse(fields[0])?, parse(fields[1])?, parse(fields[2])?);
                if symmetry == Symmetry::Symmetric && dims.0 != dims.1 {
                    return Err(err(lineno, "symmetric matrix must be square".into()));
                }
                triplets.reserve(dims.2);
                size = Some(dims);
            }
            Some((rows, cols, nnz)) => {
                if fields.len() != 3 {
                    return Err(err(
                        lineno,
                        format!("expected `i j value`, got `{trimmed}`"),
                    ));
                }
                let index = |s: &str, bound: usize| -> Result<usize> {
                    let v = s
                        .parse::<usize>()
                        .map_err(|_| err(lineno, format!("invalid index `{s}`")))?;
                    if v == 0 || v > bound {
                        return Err(err(lineno, format!("index {v} out of bounds 1..={bound}")));
                    }
                    Ok(v - 1)
                };
                let i = index(fields[0], rows)?;
                let j = index(fields[1], cols)?;
                let v: f64 = fields[2]
                    .parse()
                    .map_err(|_| err(lineno, format!("invalid value `{}`", fields[2])))?;
                if symmetry == Symmetry::Symmetric && j > i {
                    return Err(err(
                        lineno,
                        "symmetric file stores an upper-triangle entry".into(),
                    ));
                }
                if !seen.insert((i, j)) {
                    return Err(err(
                        lineno,
                        format!("duplicate entry ({}, {})", i + 1, j + 1),
                    ));
                }
                if seen.len() > nnz {
                    return Err(err(lineno, format!("more than the declared {nnz} entries")));
                }
                triplets.push((i, j, v));
                if symmetry == Symmetry::Symmetric && i != j {
                    triplets.push((j, i, v));
                }
            }
        }
    }

    let (rows, cols, nnz) = size.ok_or_else(|| err(1, "missing size line".into()))?;
    if seen.len() != nnz {
        return Err(err(
            0,
            format!("declared {nnz} entries, found {}", seen.len()),
        ));
    }
    CsrMatrix::from_triplets(rows, cols, &triplets)
}

pub fn write_matrix_market(a: &CsrMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| Error::Io {
        path: path.to_owned(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    format_matrix_market(a, &mut w).map_err(io_err)?;
    w.flush().map_err(io_err)
}

/// Writes `a` in `general` coordinate form. Values use Rust's shortest
/// round-trip formatting, so reading back reproduces every bit.
pub fn format_matrix_market<W: Write>(a: &CsrMatrix, w: &mut W) -> std::io::Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.rows(), a.cols(), a.nnz())?;
    for (i, j, v) in a.triplets() {
        writeln!(w, "{} {} {:e}", i + 1, j + 1, v)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn parse(text: &str) -> Result<CsrMatrix> {
        parse_matrix_market(text.as_bytes(), Path::new("mem.mtx"))
    }

    #[test]
    fn single_entry() {
        let m = parse("%%MatrixMarket matrix coordinate real general\n1 1 1\n1 1 2.0\n").unwrap();
        assert_eq!(m.shape(), (1, 1));
        assert_eq!(m.get(0, 0), 2.0);
    }

    #[test]
    fn symmetric_expansion() {
        let m = parse(
            "%%MatrixMarket matrix coordinate real symmetric\n% comment\n2 2 2\n1 1 4\n2 1 -1\n",
        )
        .unwrap();
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.get(0, 1), -1.0);
        assert_eq!(m.get(1, 0), -1.0);
    }

    #[test]
    fn errors_name_the_line() {
        let e = parse("%%MatrixMarket matrix array real general\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }));

        let e =
            parse("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e}");

        let e = parse("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n1 1 2.0\n")
            .unwrap_err();
        assert!(matches!(e, Error::Parse { line: 4, .. }), "{e}");

        let e = parse("garbage\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn file_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut t = Vec::new();
        while t.len() < 20 {
            let (i, j) = (rng.gen_range(0..10), rng.gen_range(0..7));
            if !t.iter().any(|&(a, b, _)| (a, b) == (i, j)) {
                t.push((i, j, rng.gen_range(-1e3..1e3) / 7.0));
            }
        }
        let a = CsrMatrix::from_triplets(10, 7, &t).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.mtx");
        write_matrix_market(&a, &path).unwrap();
        let b = read_matrix_market(&path).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            read_matrix_market("/nonexistent/x.mtx"),
            Err(Error::Io { .. })
        ));
    }
}
