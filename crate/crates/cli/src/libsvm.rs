//! Sparse `label idx:val …` text format with 1-based feature indices.

use std::io::BufRead;
use std::path::Path;

use decprox::costs::{Dataset, Sample};
use decprox::Error;

/// Parses libsvm text. `label_map` names the raw labels mapped to `+1` and
/// `-1`; `dim` fixes the dimension, otherwise the largest index is used.
pub fn parse_libsvm<R: BufRead>(
    reader: R,
    normalize: bool,
    label_map: (f64, f64),
    dim: Option<usize>,
) -> Result<Dataset, Error> {
    let mut samples = Vec::new();
    let mut max_index = 0usize;
    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line.map_err(|e| Error::Parse { line: line_no, msg: e.to_string() })?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let raw_label = tokens.next().expect("non-empty line has a token");
        let raw: f64 = raw_label
            .parse()
            .map_err(|_| Error::Parse { line: line_no, msg: format!("bad label {raw_label:?}") })?;
        let label = if raw == label_map.0 {
            1.0
        } else if raw == label_map.1 {
            -1.0
        } else {
            return Err(Error::Parse { line: line_no, msg: format!("label {raw_label} is not in the label map") });
        };
        let mut features = Vec::new();
        let mut last = 0usize;
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| Error::Parse { line: line_no, msg: format!("expected index:value, got {tok:?}") })?;
            let idx: usize =
                idx.parse().map_err(|_| Error::Parse { line: line_no, msg: format!("bad feature index {idx:?}") })?;
            let val: f64 =
                val.parse().map_err(|_| Error::Parse { line: line_no, msg: format!("bad feature value {val:?}") })?;
            if idx == 0 || idx <= last {
                return Err(Error::Parse { line: line_no, msg: format!("feature indices must increase from 1, got {idx}") });
            }
            last = idx;
            max_index = max_index.max(idx);
            features.push((idx - 1, val));
        }
        samples.push(Sample { features, label });
    }
    let dim = match dim {
        Some(d) if d < max_index => {
            return Err(Error::InvalidData(format!("feature index {max_index} exceeds dimension {d}")));
        }
        Some(d) => d,
        None => max_index,
    };
    let mut data = Dataset::new(samples, dim)?;
    if normalize {
        data.normalize();
    }
    Ok(data)
}

pub fn read_libsvm(path: &Path, normalize: bool, label_map: (f64, f64), dim: Option<usize>) -> Result<Dataset, Error> {
    let file = std::fs::File::open(path).map_err(|e| Error::InvalidData(format!("{}: {e}", path.display())))?;
    parse_libsvm(std::io::BufReader::new(file), normalize, label_map, dim)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_one_line() {
        let d = parse_libsvm("1 3:0.5 7:1.0\n".as_bytes(), false, (1.0, 0.0), None).unwrap();
        assert_eq!(d.dim, 7);
        assert_eq!(d.samples[0].label, 1.0);
        assert_eq!(d.samples[0].features, vec![(2, 0.5), (6, 1.0)]);
    }

    #[test]
    fn normalizes_samples() {
        let d = parse_libsvm("-1 1:3 2:4\n".as_bytes(), true, (1.0, -1.0), None).unwrap();
        assert_eq!(d.samples[0].features, vec![(0, 0.6), (1, 0.8)]);
        assert_eq!(d.samples[0].label, -1.0);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text = "1 1:1\n\n# note\n2 1:1\n";
        let err = parse_libsvm(text.as_bytes(), false, (1.0, 0.0), None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }), "{err}");
        let err = parse_libsvm("1 1:1\n0 x:1\n".as_bytes(), false, (1.0, 0.0), None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse_libsvm("1 2:1 1:1\n".as_bytes(), false, (1.0, 0.0), None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
    }
}
