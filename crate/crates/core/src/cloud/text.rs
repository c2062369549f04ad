use std::io::Write;

use super::{CloudError, Point, PointCloud, RecordLocation, SourceKind, NEUTRAL_GRAY};
use crate::scalar::Scalar;

struct Record<S> {
    line: usize,
    position: [S; 3],
    color: Option<[S; 3]>,
}

/// Parses `x y z [r g b]` lines. Blank lines and `#` comments are skipped.
///
/// Colors are either all unit floats or all 0-255 values; the scale is
/// decided once per file, and any channel above 1 selects the 0-255 scale.
pub fn parse_xyzrgb<S: Scalar>(bytes: &[u8]) -> Result<PointCloud<S>, CloudError> {
    let text = std::str::from_utf8(bytes).map_err(|e| {
        CloudError::malformed(RecordLocation::Offset(e.valid_up_to()), "invalid utf-8")
    })?;

    let mut records = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 3 && fields.len() != 6 {
            return Err(CloudError::malformed(
                RecordLocation::Line(line),
                format!("expected 3 or 6 fields, found {}", fields.len()),
            ));
        }
        let mut values = [S::zero(); 6];
        for (slot, field) in values.iter_mut().zip(&fields) {
            *slot = field.parse::<S>().map_err(|_| {
                CloudError::malformed(RecordLocation::Line(line), format!("not a number: `{field}`"))
            })?;
            if !slot.is_finite() {
                return Err(CloudError::malformed(
                    RecordLocation::Line(line),
                    format!("non-finite value `{field}`"),
                ));
            }
        }
        let color = (fields.len() == 6).then(|| [values[3], values[4], values[5]]);
        if let Some(c) = color {
            if c.iter().any(|&v| v < S::zero()) {
                return Err(CloudError::malformed(
                    RecordLocation::Line(line),
                    "negative color channel",
                ));
            }
        }
        records.push(Record {
            line,
            position: [values[0], values[1], values[2]],
            color,
        });
    }
    if records.is_empty() {
        return Err(CloudError::EmptyCloud);
    }

    let byte_scale = records
        .iter()
        .filter_map(|r| r.color)
        .any(|c| c.iter().any(|&v| v > S::one()));
    let full = S::lit(255.0);
    let gray = S::lit(NEUTRAL_GRAY);

    let mut points = Vec::with_capacity(records.len());
    for record in records {
        let color = match record.color {
            None => [gray; 3],
            Some(c) if byte_scale => {
                if c.iter().any(|&v| v > full) {
                    return Err(CloudError::malformed(
                        RecordLocation::Line(record.line),
                        "color channel above 255",
                    ));
                }
                c.map(|v| v / full)
            }
            Some(c) => c,
        };
        points.push(Point::new(record.position, color));
    }
    PointCloud::new(points, SourceKind::Unknown)
}

/// Writes one `x y z r g b` line per point with unit-range colors.
///
/// Values use the shortest representation that parses back to the same
/// scalar, so a write/parse cycle is lossless.
pub fn write_xyzrgb<S: Scalar, W: Write>(cloud: &PointCloud<S>, mut out: W) -> std::io::Result<()> {
    for p in cloud.points() {
        let [x, y, z] = p.position;
        let [r, g, b] = p.color;
        writeln!(out, "{x} {y} {z} {r} {g} {b}")?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn byte_scale_colors_are_divided() {
        let cloud: PointCloud<f64> = parse_xyzrgb(b"0.1 0.2 0.3 255 0 0\n").unwrap();
        let p = cloud.points()[0];
        assert_eq!(p.position, [0.1, 0.2, 0.3]);
        assert_eq!(p.color, [1.0, 0.0, 0.0]);
    }

    #[test]
    fn unit_colors_are_kept() {
        let cloud: PointCloud<f32> = parse_xyzrgb(b"0 0 0 0.5 1 0.25\n1 1 1 1 1 1\n").unwrap();
        assert_eq!(cloud.points()[0].color, [0.5, 1.0, 0.25]);
    }

    #[test]
    fn scale_detection_is_per_file() {
        // The 1 on the first line is 1/255 because another line forces byte scale.
        let cloud: PointCloud<f64> = parse_xyzrgb(b"0 0 0 1 1 1\n1 1 1 255 128 0\n").unwrap();
        assert_eq!(cloud.points()[0].color, [1.0 / 255.0; 3]);
    }

    #[test]
    fn colorless_lines_are_gray() {
        let cloud: PointCloud<f64> = parse_xyzrgb(b"# header\n\n1 2 3\n").unwrap();
        assert_eq!(cloud.points()[0].color, [0.5; 3]);
    }

    #[test]
    fn empty_input_is_empty_cloud() {
        assert!(matches!(parse_xyzrgb::<f64>(b""), Err(CloudError::EmptyCloud)));
        assert!(matches!(parse_xyzrgb::<f64>(b"\n# nothing\n"), Err(CloudError::EmptyCloud)));
    }

    #[test]
    fn malformed_record_reports_line() {
        let err = parse_xyzrgb::<f64>(b"0 0 0 1 1 1\n0 0 zero 1 1 1\n").unwrap_err();
        match err {
            CloudError::MalformedRecord { location, .. } => {
                assert_eq!(location, RecordLocation::Line(2))
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_xyzrgb::<f64>(b"0 0 0 1 1\n").is_err());
        assert!(parse_xyzrgb::<f64>(b"0 0 0 300 0 0\n").is_err());
        assert!(parse_xyzrgb::<f64>(b"0 0 inf 0 0 0\n").is_err());
    }

    #[test]
    fn write_then_parse_is_lossless() {
        let points = vec![
            Point::new([0.1_f64, -2.5e-7, 1234.5678], [0.0, 0.333333333333, 1.0]),
            Point::new([1.0 / 3.0, 2.0 / 7.0, -0.0], [0.1, 0.2, 0.3]),
        ];
        let cloud = PointCloud::new(points, SourceKind::Unknown).unwrap();
        let mut buf = Vec::new();
        write_xyzrgb(&cloud, &mut buf).unwrap();
        let back: PointCloud<f64> = parse_xyzrgb(&buf).unwrap();
        assert_eq!(back.points(), cloud.points());
    }
}
