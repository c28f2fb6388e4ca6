//! CLOI-PTS text format.
//!
//! ```text
//! cloi-pts v1 n=<N>
//! x y z class_id gt_instance_id [pred_instance_id [boundary]]
//! ```
//!
//! Ids are integers and `-1` means absent (ground truth) or noise
//! (prediction). The optional 7th column is a 0/1 boundary flag; when it is
//! written the prediction column is always present.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{ClassLabel, LabeledPointCloud, Point3, PointRecord, Prediction};
use crate::error::{Error, Result};

const MAGIC: &str = "cloi-pts";
const VERSION: &str = "v1";

/// Which optional columns to write.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PtsColumns {
    pub predictions: bool,
    pub boundary: bool,
}

pub fn load_pts(path: impl AsRef<Path>) -> Result<LabeledPointCloud> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_pts(BufReader::new(file), path)
}

/// Parses CLOI-PTS from any reader; `origin` is only used in error messages.
pub fn parse_pts(reader: impl BufRead, origin: impl AsRef<Path>) -> Result<LabeledPointCloud> {
    let origin = origin.as_ref();
    let err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut lines = reader.lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| err(1, "missing header".into()))?;
    let header = header.map_err(|e| Error::io(origin, e))?;
    let expected = parse_header(&header).map_err(|m| err(1, m))?;

    let mut points = Vec::with_capacity(expected);
    let mut columns = None;
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(origin, e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if !(5..=7).contains(&fields.len()) {
            return Err(err(
                lineno,
                format!("expected 5 to 7 columns, found {}", fields.len()),
            ));
        }
        match columns {
            None => columns = Some(fields.len()),
            Some(n) if n != fields.len() => {
                return Err(err(
                    lineno,
                    format!("expected {n} columns like the first point, found {}", fields.len()),
                ))
            }
            _ => {}
        }
        let record = parse_record(&fields).map_err(|m| err(lineno, m))?;
        points.push(record);
    }
    if points.len() != expected {
        return Err(err(
            1,
            format!("header declares n={expected} but {} points follow", points.len()),
        ));
    }
    LabeledPointCloud::new(points).map_err(|e| match e {
        Error::InvalidArgument(m) => {
            // the offending point index is in the message; map it to a line
            let line = first_point_index(&m).map_or(1, |i| i + 2);
            err(line, m)
        }
        other => other,
    })
}

fn first_point_index(msg: &str) -> Option<usize> {
    // messages of the form "... (point 12)" or "point 12 ..."
    let pos = msg.rfind("point ")?;
    msg[pos + 6..]
        .chars()
        .take_while(char::is_ascii_digit)
        .collect::<String>()
        .parse()
        .ok()
}

fn parse_header(header: &str) -> std::result::Result<usize, String> {
    let mut parts = header.split_whitespace();
    if parts.next() != Some(MAGIC) {
        return Err(format!("expected header `{MAGIC} {VERSION} n=<N>`"));
    }
    match parts.next() {
        Some(VERSION) => {}
        Some(v) => return Err(format!("unsupported version `{v}`")),
        None => return Err("missing version".into()),
    }
    let n = parts
        .next()
        .and_then(|s| s.strip_prefix("n="))
        .ok_or("missing `n=<N>` in header")?;
    if parts.next().is_some() {
        return Err("trailing text in header".into());
    }
    n.parse().map_err(|_| format!("bad point count `{n}`"))
}

fn parse_record(fields: &[&str]) -> std::result::Result<PointRecord, String> {
    let coord = |s: &str, axis: &str| -> std::result::Result<f64, String> {
        let v: f64 = s.parse().map_err(|_| format!("bad {axis} coordinate `{s}`"))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("non-finite {axis} coordinate `{s}`"))
        }
    };
    let int = |s: &str, what: &str| -> std::result::Result<i64, String> {
        s.parse().map_err(|_| format!("bad {what} `{s}`"))
    };
    let position = Point3::new(
        coord(fields[0], "x")?,
        coord(fields[1], "y")?,
        coord(fields[2], "z")?,
    );
    let code = int(fields[3], "class id")?;
    let class_label =
        ClassLabel::from_code(code).ok_or_else(|| format!("class id {code} outside [0,7]"))?;
    let gt_instance = optional_id(int(fields[4], "instance id")?, "ground-truth instance id")?;
    let pred_instance = match fields.get(5) {
        Some(s) => Some(
            optional_id(int(s, "predicted instance id")?, "predicted instance id")?
                .map_or(Prediction::Noise, Prediction::Instance),
        ),
        None => None,
    };
    let boundary = match fields.get(6) {
        None | Some(&"0") => false,
        Some(&"1") => true,
        Some(s) => return Err(format!("bad boundary flag `{s}`, expected 0 or 1")),
    };
    Ok(PointRecord {
        position,
        class_label,
        gt_instance,
        boundary,
        pred_instance,
    })
}

fn optional_id(v: i64, what: &str) -> std::result::Result<Option<u32>, String> {
    match v {
        -1 => Ok(None),
        v if v < -1 => Err(format!("negative {what} {v}")),
        v => u32::try_from(v)
            .map(Some)
            .map_err(|_| format!("{what} {v} too large")),
    }
}

/// Writes `cloud` to `path`; with `include_predictions` a 6th column holds
/// the predicted instance (noise as -1).
pub fn save_pts(
    cloud: &LabeledPointCloud,
    path: impl AsRef<Path>,
    include_predictions: bool,
) -> Result<()> {
    save_pts_with(
        cloud,
        path,
        PtsColumns {
            predictions: include_predictions,
            boundary: false,
        },
    )
}

pub fn save_pts_with(
    cloud: &LabeledPointCloud,
    path: impl AsRef<Path>,
    columns: PtsColumns,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_pts(cloud, &mut out, columns)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

/// Serializes with shortest round-trip float formatting, so parsing the
/// output reproduces every coordinate bit for bit.
pub fn write_pts(
    cloud: &LabeledPointCloud,
    out: &mut impl Write,
    columns: PtsColumns,
) -> std::io::Result<()> {
    writeln!(out, "{MAGIC} {VERSION} n={}", cloud.len())?;
    let with_pred = columns.predictions || columns.boundary;
    for p in cloud.points() {
        let gt = p.gt_instance.map_or(-1, i64::from);
        write!(
            out,
            "{} {} {} {} {}",
            p.position.x,
            p.position.y,
            p.position.z,
            p.class_label.code(),
            gt
        )?;
        if with_pred {
            let pred = p
                .pred_instance
                .and_then(Prediction::instance)
                .map_or(-1, i64::from);
            write!(out, " {pred}")?;
        }
        if columns.boundary {
            write!(out, " {}", u8::from(p.boundary))?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<LabeledPointCloud> {
        parse_pts(text.as_bytes(), "test.pts")
    }

    fn to_string(cloud: &LabeledPointCloud, columns: PtsColumns) -> String {
        let mut buf = Vec::new();
        write_pts(cloud, &mut buf, columns).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn three_lines_keep_order() {
        let cloud = parse(
            "cloi-pts v1 n=3\n0.5 0 0 3 0\n1 2 3 4 1\n-0.25 1e-3 7 3 0\n",
        )
        .unwrap();
        assert_eq!(cloud.len(), 3);
        assert_eq!(cloud.points()[0].position, Point3::new(0.5, 0.0, 0.0));
        assert_eq!(cloud.points()[1].class_label, ClassLabel::Elbow);
        assert_eq!(cloud.points()[2].position, Point3::new(-0.25, 0.001, 7.0));
        assert!(cloud.points().iter().all(|p| p.pred_instance.is_none()));
    }

    #[test]
    fn header_only_is_empty_cloud() {
        let cloud = parse("cloi-pts v1 n=0\n").unwrap();
        assert!(cloud.is_empty());
    }

    #[test]
    fn nan_coordinate_names_line() {
        let err = parse("cloi-pts v1 n=2\n0 0 0 3 1\n0 0 nan 3 1\n").unwrap_err();
        match err {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 3);
                assert!(message.contains("non-finite"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_class_and_counts_are_errors() {
        let err = parse("cloi-pts v1 n=1\n0 0 0 8 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        assert!(parse("cloi-pts v1 n=2\n0 0 0 1 1\n").is_err());
        assert!(parse("cloi-pts v2 n=0\n").is_err());
        assert!(parse("0 0 0 1 1\n").is_err());
        assert!(parse("cloi-pts v1 n=1\n0 0 0 1\n").is_err());
        assert!(parse("cloi-pts v1 n=1\n0 0 0 1 -2\n").is_err());
    }

    #[test]
    fn mixed_class_instance_reports_line() {
        let err = parse("cloi-pts v1 n=3\n0 0 0 3 5\n1 0 0 3 5\n2 0 0 4 5\n").unwrap_err();
        match err {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 4);
                assert!(message.contains("mixes classes"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn prediction_column_and_noise() {
        let cloud = parse("cloi-pts v1 n=2\n0 0 0 3 0\n1 0 0 3 0\n").unwrap();
        let pred = cloud.with_predictions(&[Some(4), None]).unwrap();
        let text = to_string(&pred, PtsColumns { predictions: true, boundary: false });
        assert_eq!(text, "cloi-pts v1 n=2\n0 0 0 3 0 0\n1 0 0 3 0 -1\n");
        let back = parse(&text).unwrap();
        assert_eq!(back, pred);
        assert_eq!(back.points()[1].pred_instance, Some(Prediction::Noise));
    }

    #[test]
    fn boundary_column_round_trips() {
        let cloud = parse("cloi-pts v1 n=2\n0 0 0 3 0\n1 0 0 2 1\n").unwrap();
        let flagged = cloud.with_boundary_flags(&[true, false]).unwrap();
        let text = to_string(&flagged, PtsColumns { predictions: false, boundary: true });
        assert_eq!(text, "cloi-pts v1 n=2\n0 0 0 3 0 -1 1\n1 0 0 2 1 -1 0\n");
        let back = parse(&text).unwrap();
        assert!(back.points()[0].boundary);
        assert!(!back.points()[1].boundary);
    }

    #[test]
    fn full_precision_coordinates() {
        let x = 0.1 + 0.2;
        let cloud = LabeledPointCloud::new(vec![PointRecord::new(
            Point3::new(x, std::f64::consts::PI, -1.0e-300),
            ClassLabel::Other,
            Some(0),
        )])
        .unwrap();
        let back = parse(&to_string(&cloud, PtsColumns::default())).unwrap();
        assert_eq!(back.points()[0].position.x.to_bits(), x.to_bits());
        assert_eq!(back, cloud);
    }
}
