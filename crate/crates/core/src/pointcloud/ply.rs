//! ASCII PLY importer.
//!
//! Reads the `vertex` element and maps properties `x`, `y`, `z`, `class`
//! and (optionally) `instance` onto the point model. Other properties and
//! elements are skipped.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::{ClassLabel, LabeledPointCloud, Point3, PointRecord};
use crate::error::{Error, Result};

struct Element {
    name: String,
    count: usize,
    properties: Vec<String>,
}

pub fn load_ascii_ply(path: impl AsRef<Path>) -> Result<LabeledPointCloud> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_ascii_ply(BufReader::new(file), path)
}

pub fn parse_ascii_ply(reader: impl BufRead, origin: &Path) -> Result<LabeledPointCloud> {
    let err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut next_line = || -> Result<Option<(usize, String)>> {
        match lines.next() {
            Some((n, Ok(l))) => Ok(Some((n, l))),
            Some((_, Err(e))) => Err(Error::io(origin, e)),
            None => Ok(None),
        }
    };

    match next_line()? {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(err(1, "missing `ply` magic".into())),
    }

    let mut elements: Vec<Element> = Vec::new();
    let mut lineno = 1;
    loop {
        let (n, line) = next_line()?.ok_or_else(|| err(lineno, "unterminated header".into()))?;
        lineno = n;
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("format") => {
                if parts.next() != Some("ascii") {
                    return Err(err(n, "only ASCII PLY is supported".into()));
                }
            }
            Some("comment") | Some("obj_info") | None => {}
            Some("element") => {
                let name = parts.next().unwrap_or_default().to_string();
                let count = parts
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| err(n, "bad element count".into()))?;
                elements.push(Element {
                    name,
                    count,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| err(n, "property before element".into()))?;
                let tokens: Vec<&str> = parts.collect();
                if tokens.first() == Some(&"list") {
                    if el.name == "vertex" {
                        return Err(err(n, "list properties on vertices are not supported".into()));
                    }
                    el.properties.push("<list>".into());
                } else if let Some(name) = tokens.last() {
                    el.properties.push((*name).to_string());
                }
            }
            Some("end_header") => break,
            Some(other) => return Err(err(n, format!("unexpected header keyword `{other}`"))),
        }
    }

    let mut points = Vec::new();
    for el in &elements {
        if el.name != "vertex" {
            for _ in 0..el.count {
                next_line()?.ok_or_else(|| err(lineno, format!("truncated `{}` element", el.name)))?;
            }
            continue;
        }
        let find = |name: &str| el.properties.iter().position(|p| p == name);
        let (ix, iy, iz) = match (find("x"), find("y"), find("z")) {
            (Some(x), Some(y), Some(z)) => (x, y, z),
            _ => return Err(err(1, "vertex element lacks x/y/z".into())),
        };
        let iclass = find("class").ok_or_else(|| err(1, "vertex element lacks `class`".into()))?;
        let iinst = find("instance");
        points.reserve(el.count);
        for _ in 0..el.count {
            let (n, line) = next_line()?.ok_or_else(|| err(lineno, "truncated vertex list".into()))?;
            lineno = n;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() < el.properties.len() {
                return Err(err(n, format!("expected {} values", el.properties.len())));
            }
            let num = |i: usize| -> Result<f64> {
                fields[i]
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| err(n, format!("bad number `{}`", fields[i])))
            };
            let position = Point3::new(num(ix)?, num(iy)?, num(iz)?);
            let code = num(iclass)?;
            let class = (code.fract() == 0.0)
                .then(|| ClassLabel::from_code(code as i64))
                .flatten()
                .ok_or_else(|| err(n, format!("class id {code} outside [0,7]")))?;
            let gt = match iinst {
                Some(i) => {
                    let v = num(i)?;
                    if v == -1.0 {
                        None
                    } else if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                        Some(v as u32)
                    } else {
                        return Err(err(n, format!("bad instance id {v}")));
                    }
                }
                None => None,
            };
            points.push(PointRecord::new(position, class, gt));
        }
        break;
    }
    LabeledPointCloud::new(points)
}
