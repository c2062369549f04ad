//! Minimal PLY reader/writer: ascii and binary little-endian, vertex
//! positions as float/double, colors as uchar or float/double.

use std::io::Write;

use super::{CloudError, Point, PointCloud, RecordLocation, SourceKind, NEUTRAL_GRAY};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Encoding {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ScalarType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarType {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => ScalarType::I8,
            "uchar" | "uint8" => ScalarType::U8,
            "short" | "int16" => ScalarType::I16,
            "ushort" | "uint16" => ScalarType::U16,
            "int" | "int32" => ScalarType::I32,
            "uint" | "uint32" => ScalarType::U32,
            "float" | "float32" => ScalarType::F32,
            "double" | "float64" => ScalarType::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            ScalarType::I8 | ScalarType::U8 => 1,
            ScalarType::I16 | ScalarType::U16 => 2,
            ScalarType::I32 | ScalarType::U32 | ScalarType::F32 => 4,
            ScalarType::F64 => 8,
        }
    }

    fn is_float(self) -> bool {
        matches!(self, ScalarType::F32 | ScalarType::F64)
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            ScalarType::I8 => b[0] as i8 as f64,
            ScalarType::U8 => b[0] as f64,
            ScalarType::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            ScalarType::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            ScalarType::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            ScalarType::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            ScalarType::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            ScalarType::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum PropertyKind {
    Scalar(ScalarType),
    List { count: ScalarType, item: ScalarType },
}

#[derive(Debug, Clone)]
struct Property {
    name: String,
    kind: PropertyKind,
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

struct Header {
    encoding: Encoding,
    elements: Vec<Element>,
    body_offset: usize,
    body_line: usize,
}

fn unsupported(msg: impl Into<String>) -> CloudError {
    CloudError::UnsupportedPlyFeature(msg.into())
}

fn parse_header(bytes: &[u8]) -> Result<Header, CloudError> {
    let mut offset = 0;
    let mut line_no = 0;
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();

    loop {
        let rest = &bytes[offset..];
        let Some(end) = rest.iter().position(|&b| b == b'\n') else {
            return Err(CloudError::malformed(
                RecordLocation::Line(line_no + 1),
                "header is not terminated by end_header",
            ));
        };
        let line = std::str::from_utf8(&rest[..end])
            .map_err(|_| CloudError::malformed(RecordLocation::Line(line_no + 1), "non-utf-8 header"))?
            .trim_end_matches('\r')
            .trim();
        offset += end + 1;
        line_no += 1;
        let loc = RecordLocation::Line(line_no);

        let mut tokens = line.split_whitespace();
        let keyword = tokens.next().unwrap_or("");
        if line_no == 1 {
            if line != "ply" {
                return Err(CloudError::malformed(loc, "missing `ply` magic"));
            }
            continue;
        }
        match keyword {
            "format" => {
                encoding = Some(match tokens.next() {
                    Some("ascii") => Encoding::Ascii,
                    Some("binary_little_endian") => Encoding::BinaryLittleEndian,
                    Some(other) => return Err(unsupported(format!("format `{other}`"))),
                    None => return Err(CloudError::malformed(loc, "format line without encoding")),
                });
            }
            "comment" | "obj_info" | "" => {}
            "element" => {
                let name = tokens
                    .next()
                    .ok_or_else(|| CloudError::malformed(loc, "element without name"))?;
                let count = tokens
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| CloudError::malformed(loc, "element without valid count"))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            "property" => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| CloudError::malformed(loc, "property before any element"))?;
                let ty = tokens
                    .next()
                    .ok_or_else(|| CloudError::malformed(loc, "property without type"))?;
                let kind = if ty == "list" {
                    let count = tokens.next().and_then(ScalarType::parse);
                    let item = tokens.next().and_then(ScalarType::parse);
                    match (count, item) {
                        (Some(count), Some(item)) if !count.is_float() => {
                            PropertyKind::List { count, item }
                        }
                        _ => return Err(unsupported(format!("list property `{line}`"))),
                    }
                } else {
                    PropertyKind::Scalar(
                        ScalarType::parse(ty)
                            .ok_or_else(|| unsupported(format!("property type `{ty}`")))?,
                    )
                };
                let name = tokens
                    .next()
                    .ok_or_else(|| CloudError::malformed(loc, "property without name"))?;
                element.properties.push(Property {
                    name: name.to_string(),
                    kind,
                });
            }
            "end_header" => break,
            other => return Err(unsupported(format!("header keyword `{other}`"))),
        }
    }

    let encoding = encoding.ok_or_else(|| {
        CloudError::malformed(RecordLocation::Line(2), "missing format line")
    })?;
    Ok(Header {
        encoding,
        elements,
        body_offset: offset,
        body_line: line_no,
    })
}

/// Column indices of the properties a vertex needs.
struct VertexLayout {
    position: [usize; 3],
    color: Option<([usize; 3], bool)>,
}

fn vertex_layout(element: &Element) -> Result<VertexLayout, CloudError> {
    let find = |names: &[&str]| {
        element
            .properties
            .iter()
            .position(|p| names.contains(&p.name.as_str()))
    };
    let scalar_type = |idx: usize| match element.properties[idx].kind {
        PropertyKind::Scalar(t) => Some(t),
        PropertyKind::List { .. } => None,
    };

    let mut position = [0; 3];
    for (slot, name) in position.iter_mut().zip(["x", "y", "z"]) {
        let idx = find(&[name]).ok_or_else(|| unsupported(format!("vertex without `{name}`")))?;
        match scalar_type(idx) {
            Some(t) if t.is_float() => *slot = idx,
            _ => return Err(unsupported(format!("non-float vertex position `{name}`"))),
        }
    }

    let channels = [
        find(&["red", "r", "diffuse_red"]),
        find(&["green", "g", "diffuse_green"]),
        find(&["blue", "b", "diffuse_blue"]),
    ];
    let color = match channels {
        [None, None, None] => None,
        [Some(r), Some(g), Some(b)] => {
            let types = [r, g, b].map(scalar_type);
            let byte_scale = match types {
                [Some(ScalarType::U8), Some(ScalarType::U8), Some(ScalarType::U8)] => true,
                [Some(a), Some(b), Some(c)] if a.is_float() && b.is_float() && c.is_float() => false,
                _ => return Err(unsupported("color channels must all be uchar or all float")),
            };
            Some(([r, g, b], byte_scale))
        }
        _ => return Err(unsupported("incomplete rgb color channels")),
    };
    Ok(VertexLayout { position, color })
}

/// Parses an ascii or binary little-endian PLY with a `vertex` element.
pub fn parse_ply<S: Scalar>(bytes: &[u8]) -> Result<PointCloud<S>, CloudError> {
    if bytes.is_empty() {
        return Err(CloudError::EmptyCloud);
    }
    let header = parse_header(bytes)?;
    let vertex_idx = header
        .elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| unsupported("no vertex element"))?;
    let vertex = &header.elements[vertex_idx];
    if vertex.count == 0 {
        return Err(CloudError::EmptyCloud);
    }
    let layout = vertex_layout(vertex)?;
    let body = &bytes[header.body_offset..];

    let rows = match header.encoding {
        Encoding::Ascii => read_ascii(body, header.body_line, &header.elements, vertex_idx)?,
        Encoding::BinaryLittleEndian => {
            read_binary(body, header.body_offset, &header.elements, vertex_idx)?
        }
    };

    let gray = S::lit(NEUTRAL_GRAY);
    let mut points = Vec::with_capacity(rows.len());
    for (idx, row) in rows.iter().enumerate() {
        let position = layout.position.map(|c| S::lit(row[c]));
        if position.iter().any(|c| !c.is_finite()) {
            return Err(CloudError::InvalidPoint {
                index: idx,
                reason: "non-finite coordinate".into(),
            });
        }
        let color = match layout.color {
            None => [gray; 3],
            Some((cols, true)) => cols.map(|c| S::lit(row[c] / 255.0)),
            Some((cols, false)) => cols.map(|c| S::lit(row[c])),
        };
        points.push(Point::new(position, color));
    }
    PointCloud::new(points, SourceKind::Unknown)
}

/// Reads the vertex rows (scalar properties only, lists read as NaN).
fn read_ascii(
    body: &[u8],
    first_line: usize,
    elements: &[Element],
    vertex_idx: usize,
) -> Result<Vec<Vec<f64>>, CloudError> {
    let text = std::str::from_utf8(body)
        .map_err(|_| CloudError::malformed(RecordLocation::Line(first_line + 1), "non-utf-8 body"))?;
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (first_line + 1 + i, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let mut rows = Vec::new();
    for (element_idx, element) in elements.iter().enumerate().take(vertex_idx + 1) {
        for _ in 0..element.count {
            let Some((line_no, line)) = lines.next() else {
                return Err(CloudError::malformed(
                    RecordLocation::Line(first_line + 1),
                    format!("body ends before all `{}` records", element.name),
                ));
            };
            if element_idx != vertex_idx {
                continue;
            }
            let loc = RecordLocation::Line(line_no);
            let mut tokens = line.split_whitespace();
            let mut next = || -> Result<f64, CloudError> {
                let tok = tokens
                    .next()
                    .ok_or_else(|| CloudError::malformed(loc, "too few values"))?;
                tok.parse::<f64>()
                    .map_err(|_| CloudError::malformed(loc, format!("not a number: `{tok}`")))
            };
            let mut row = Vec::with_capacity(element.properties.len());
            for prop in &element.properties {
                match prop.kind {
                    PropertyKind::Scalar(_) => row.push(next()?),
                    PropertyKind::List { .. } => {
                        let n = next()? as usize;
                        for _ in 0..n {
                            next()?;
                        }
                        row.push(f64::NAN);
                    }
                }
            }
            rows.push(row);
        }
    }
    Ok(rows)
}

fn read_binary(
    body: &[u8],
    base_offset: usize,
    elements: &[Element],
    vertex_idx: usize,
) -> Result<Vec<Vec<f64>>, CloudError> {
    let mut cursor = 0usize;
    let mut take = |size: usize| -> Result<(usize, &[u8]), CloudError> {
        let start = cursor;
        let end = start + size;
        if end > body.len() {
            return Err(CloudError::malformed(
                RecordLocation::Offset(base_offset + start),
                "binary body truncated",
            ));
        }
        cursor = end;
        Ok((start, &body[start..end]))
    };

    let mut rows = Vec::new();
    for (element_idx, element) in elements.iter().enumerate().take(vertex_idx + 1) {
        let keep = element_idx == vertex_idx;
        for _ in 0..element.count {
            let mut row = Vec::with_capacity(if keep { element.properties.len() } else { 0 });
            for prop in &element.properties {
                match prop.kind {
                    PropertyKind::Scalar(t) => {
                        let (_, raw) = take(t.size())?;
                        if keep {
                            row.push(t.read_le(raw));
                        }
                    }
                    PropertyKind::List { count, item } => {
                        let (start, raw) = take(count.size())?;
                        let n = count.read_le(raw);
                        if n < 0.0 {
                            return Err(CloudError::malformed(
                                RecordLocation::Offset(base_offset + start),
                                "negative list length",
                            ));
                        }
                        take(n as usize * item.size())?;
                        if keep {
                            row.push(f64::NAN);
                        }
                    }
                }
            }
            if keep {
                rows.push(row);
            }
        }
    }
    Ok(rows)
}

/// Writes a binary little-endian PLY with positions and colors stored in
/// the scalar's own width (`float` for f32, `double` for f64).
pub fn write_ply<S: Scalar, W: Write>(cloud: &PointCloud<S>, mut out: W) -> std::io::Result<()> {
    let wide = std::mem::size_of::<S>() > 4;
    let ty = if wide { "double" } else { "float" };
    writeln!(out, "ply")?;
    writeln!(out, "format binary_little_endian 1.0")?;
    writeln!(out, "element vertex {}", cloud.len())?;
    for name in ["x", "y", "z", "red", "green", "blue"] {
        writeln!(out, "property {ty} {name}")?;
    }
    writeln!(out, "end_header")?;
    for p in cloud.points() {
        for v in p.position.iter().chain(&p.color) {
            if wide {
                out.write_all(&v.to_f64_lossy().to_le_bytes())?;
            } else {
                out.write_all(&(v.to_f64_lossy() as f32).to_le_bytes())?;
            }
        }
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    const ASCII: &str = "ply\nformat ascii 1.0\ncomment test\nelement vertex 2\n\
        property float x\nproperty float y\nproperty float z\n\
        property uchar red\nproperty uchar green\nproperty uchar blue\n\
        element face 1\nproperty list uchar int vertex_indices\nend_header\n\
        0 0 0 255 0 0\n1 0.5 0.25 0 0 255\n3 0 1 1\n";

    #[test]
    fn ascii_with_uchar_colors() {
        let cloud: PointCloud<f64> = parse_ply(ASCII.as_bytes()).unwrap();
        assert_eq!(cloud.len(), 2);
        assert_eq!(cloud.points()[0].color, [1.0, 0.0, 0.0]);
        assert_eq!(cloud.points()[1].position, [1.0, 0.5, 0.25]);
        assert_eq!(cloud.points()[1].color, [0.0, 0.0, 1.0]);
    }

    #[test]
    fn binary_skips_leading_elements_and_extra_properties() {
        let mut bytes = b"ply\nformat binary_little_endian 1.0\n\
            element camera 1\nproperty list uchar float params\n\
            element vertex 1\nproperty float x\nproperty float y\nproperty float z\n\
            property float intensity\nend_header\n"
            .to_vec();
        bytes.push(2);
        bytes.extend(9.0f32.to_le_bytes());
        bytes.extend(8.0f32.to_le_bytes());
        for v in [0.25f32, 0.5, 0.75, 0.9] {
            bytes.extend(v.to_le_bytes());
        }
        let cloud: PointCloud<f32> = parse_ply(&bytes).unwrap();
        assert_eq!(cloud.points()[0].position, [0.25, 0.5, 0.75]);
        assert_eq!(cloud.points()[0].color, [0.5; 3]);
    }

    #[test]
    fn unsupported_features() {
        let big = "ply\nformat binary_big_endian 1.0\nelement vertex 1\nproperty float x\nend_header\n";
        assert!(matches!(parse_ply::<f64>(big.as_bytes()), Err(CloudError::UnsupportedPlyFeature(_))));
        let int_pos = "ply\nformat ascii 1.0\nelement vertex 1\nproperty int x\n\
            property int y\nproperty int z\nend_header\n1 2 3\n";
        assert!(matches!(parse_ply::<f64>(int_pos.as_bytes()), Err(CloudError::UnsupportedPlyFeature(_))));
        let short_color = "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\n\
            property float y\nproperty float z\nproperty ushort red\nproperty ushort green\n\
            property ushort blue\nend_header\n1 2 3 4 5 6\n";
        assert!(matches!(parse_ply::<f64>(short_color.as_bytes()), Err(CloudError::UnsupportedPlyFeature(_))));
    }

    #[test]
    fn truncated_binary_reports_offset() {
        let mut bytes = b"ply\nformat binary_little_endian 1.0\nelement vertex 2\n\
            property float x\nproperty float y\nproperty float z\nend_header\n"
            .to_vec();
        let header_len = bytes.len();
        bytes.extend([0u8; 12 + 6]);
        match parse_ply::<f64>(&bytes) {
            Err(CloudError::MalformedRecord { location, .. }) => {
                assert_eq!(location, RecordLocation::Offset(header_len + 16))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn binary_round_trip_is_bit_exact() {
        let points = vec![
            Point::new([0.1_f64, 1.0 / 3.0, -7.5], [0.2, 0.4, 1.0]),
            Point::new([1e-12, 2.0, 3.0], [0.0, 0.123456789, 0.5]),
        ];
        let cloud = PointCloud::new(points, SourceKind::Unknown).unwrap();
        let mut buf = Vec::new();
        write_ply(&cloud, &mut buf).unwrap();
        let back: PointCloud<f64> = parse_ply(&buf).unwrap();
        assert_eq!(back.points(), cloud.points());
    }
}
