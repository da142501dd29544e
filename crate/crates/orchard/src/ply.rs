//! PLY reader/writer: ASCII and binary little-endian, vertices with float
//! x/y/z, uchar red/green/blue and optional int semlabel/treeid scalars.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::Point3;

use crate::cloud::ColorPointCloud;
use crate::error::{OrchardError, Result};

/// Cloud plus the optional per-vertex scalars this pipeline exchanges.
#[derive(Debug, Clone)]
pub struct PlyCloud {
    pub cloud: ColorPointCloud,
    pub semlabel: Option<Vec<i32>>,
    pub treeid: Option<Vec<i32>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum PropType {
    F32,
    F64,
    U8,
    I32,
    U32,
}

impl PropType {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "float" | "float32" => Some(Self::F32),
            "double" | "float64" => Some(Self::F64),
            "uchar" | "uint8" => Some(Self::U8),
            "int" | "int32" => Some(Self::I32),
            "uint" | "uint32" => Some(Self::U32),
            _ => None,
        }
    }

    fn size(&self) -> usize {
        match self {
            Self::U8 => 1,
            Self::F64 => 8,
            _ => 4,
        }
    }
}

fn parse_err(location: impl Into<String>, message: impl Into<String>) -> OrchardError {
    OrchardError::ParseError {
        location: location.into(),
        message: message.into(),
    }
}

/// Read a point cloud from a PLY file.
pub fn read_ply(path: impl AsRef<Path>) -> Result<PlyCloud> {
    let path = path.as_ref();
    let file = File::open(path)?;
    let mut reader = BufReader::new(file);

    let mut line = String::new();
    let mut line_no = 0usize;
    let next_line = |reader: &mut BufReader<File>, line: &mut String| -> Result<usize> {
        line.clear();
        let n = reader.read_line(line)?;
        Ok(n)
    };

    next_line(&mut reader, &mut line)?;
    line_no += 1;
    if line.trim_end() != "ply" {
        return Err(parse_err("line 1", "missing 'ply' magic"));
    }

    let mut ascii = true;
    let mut vertex_count: Option<usize> = None;
    let mut props: Vec<(String, PropType)> = Vec::new();
    let mut in_vertex_element = false;
    loop {
        if next_line(&mut reader, &mut line)? == 0 {
            return Err(parse_err(format!("line {line_no}"), "unexpected EOF in header"));
        }
        line_no += 1;
        let l = line.trim_end();
        let mut tok = l.split_whitespace();
        match tok.next() {
            Some("format") => match tok.next() {
                Some("ascii") => ascii = true,
                Some("binary_little_endian") => ascii = false,
                other => {
                    return Err(parse_err(
                        format!("line {line_no}"),
                        format!("unsupported format {other:?}"),
                    ))
                }
            },
            Some("comment") | Some("obj_info") => {}
            Some("element") => {
                let name = tok.next().unwrap_or("");
                let count: usize = tok
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| parse_err(format!("line {line_no}"), "bad element count"))?;
                if name == "vertex" {
                    vertex_count = Some(count);
                    in_vertex_element = true;
                } else {
                    if count != 0 {
                        return Err(parse_err(
                            format!("line {line_no}"),
                            format!("unsupported element '{name}' with {count} entries"),
                        ));
                    }
                    in_vertex_element = false;
                }
            }
            Some("property") => {
                if !in_vertex_element {
                    continue;
                }
                let ty = tok.next().unwrap_or("");
                if ty == "list" {
                    return Err(parse_err(
                        format!("line {line_no}"),
                        "list properties unsupported on vertices",
                    ));
                }
                let pt = PropType::parse(ty).ok_or_else(|| {
                    parse_err(format!("line {line_no}"), format!("unsupported type '{ty}'"))
                })?;
                let name = tok
                    .next()
                    .ok_or_else(|| parse_err(format!("line {line_no}"), "property missing name"))?;
                props.push((name.to_string(), pt));
            }
            Some("end_header") => break,
            other => {
                return Err(parse_err(
                    format!("line {line_no}"),
                    format!("unexpected header token {other:?}"),
                ))
            }
        }
    }

    let n = vertex_count.ok_or_else(|| parse_err("header", "no vertex element"))?;
    for req in ["x", "y", "z"] {
        if !props.iter().any(|(name, _)| name == req) {
            return Err(parse_err("header", format!("missing property '{req}'")));
        }
    }
    let find = |name: &str| props.iter().position(|(n, _)| n == name);
    let has_color = find("red").is_some() && find("green").is_some() && find("blue").is_some();
    let has_sem = find("semlabel").is_some();
    let has_tree = find("treeid").is_some();

    let mut values = vec![0.0f64; props.len()];
    let mut points = Vec::with_capacity(n);
    let mut colors = Vec::with_capacity(n);
    let mut semlabel = if has_sem { Some(Vec::with_capacity(n)) } else { None };
    let mut treeid = if has_tree { Some(Vec::with_capacity(n)) } else { None };

    if ascii {
        for v in 0..n {
            if next_line(&mut reader, &mut line)? == 0 {
                return Err(parse_err(
                    format!("vertex {v}"),
                    format!("expected {n} vertices, file ends after {v}"),
                ));
            }
            line_no += 1;
            let mut tok = line.split_whitespace();
            for (slot, val) in values.iter_mut().enumerate() {
                let s = tok.next().ok_or_else(|| {
                    parse_err(format!("line {line_no}"), format!("missing field {slot}"))
                })?;
                *val = s.parse::<f64>().map_err(|_| {
                    parse_err(format!("line {line_no}"), format!("bad number '{s}'"))
                })?;
            }
            push_vertex(
                &props, &values, &mut points, &mut colors, &mut semlabel, &mut treeid, has_color,
            );
        }
    } else {
        let row_size: usize = props.iter().map(|(_, t)| t.size()).sum();
        let mut body = Vec::new();
        reader.read_to_end(&mut body)?;
        if body.len() < n * row_size {
            return Err(parse_err(
                "binary body",
                format!("expected {} bytes, found {}", n * row_size, body.len()),
            ));
        }
        let mut cur = &body[..];
        for _ in 0..n {
            for (slot, (_, ty)) in props.iter().enumerate() {
                values[slot] = match ty {
                    PropType::F32 => cur.read_f32::<LittleEndian>()? as f64,
                    PropType::F64 => cur.read_f64::<LittleEndian>()?,
                    PropType::U8 => cur.read_u8()? as f64,
                    PropType::I32 => cur.read_i32::<LittleEndian>()? as f64,
                    PropType::U32 => cur.read_u32::<LittleEndian>()? as f64,
                };
            }
            push_vertex(
                &props, &values, &mut points, &mut colors, &mut semlabel, &mut treeid, has_color,
            );
        }
    }

    Ok(PlyCloud {
        cloud: ColorPointCloud { points, colors },
        semlabel,
        treeid,
    })
}

#[allow(clippy::too_many_arguments)]
fn push_vertex(
    props: &[(String, PropType)],
    values: &[f64],
    points: &mut Vec<Point3<f64>>,
    colors: &mut Vec<[u8; 3]>,
    semlabel: &mut Option<Vec<i32>>,
    treeid: &mut Option<Vec<i32>>,
    has_color: bool,
) {
    let get = |name: &str| {
        props
            .iter()
            .position(|(n, _)| n == name)
            .map(|i| values[i])
    };
    points.push(Point3::new(
        get("x").unwrap(),
        get("y").unwrap(),
        get("z").unwrap(),
    ));
    if has_color {
        colors.push([
            get("red").unwrap() as u8,
            get("green").unwrap() as u8,
            get("blue").unwrap() as u8,
        ]);
    } else {
        colors.push([128, 128, 128]);
    }
    if let Some(v) = semlabel.as_mut() {
        v.push(get("semlabel").unwrap() as i32);
    }
    if let Some(v) = treeid.as_mut() {
        v.push(get("treeid").unwrap() as i32);
    }
}

/// Write a point cloud to a PLY file. Coordinates are stored as float32.
pub fn write_ply(
    path: impl AsRef<Path>,
    cloud: &ColorPointCloud,
    semlabel: Option<&[i32]>,
    treeid: Option<&[i32]>,
    ascii: bool,
) -> Result<()> {
    if let Some(s) = semlabel {
        if s.len() != cloud.len() {
            return Err(OrchardError::ShapeError(s.len(), cloud.len()));
        }
    }
    if let Some(t) = treeid {
        if t.len() != cloud.len() {
            return Err(OrchardError::ShapeError(t.len(), cloud.len()));
        }
    }
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "ply")?;
    writeln!(
        w,
        "format {} 1.0",
        if ascii { "ascii" } else { "binary_little_endian" }
    )?;
    writeln!(w, "element vertex {}", cloud.len())?;
    writeln!(w, "property float x")?;
    writeln!(w, "property float y")?;
    writeln!(w, "property float z")?;
    writeln!(w, "property uchar red")?;
    writeln!(w, "property uchar green")?;
    writeln!(w, "property uchar blue")?;
    if semlabel.is_some() {
        writeln!(w, "property int semlabel")?;
    }
    if treeid.is_some() {
        writeln!(w, "property int treeid")?;
    }
    writeln!(w, "end_header")?;
    for i in 0..cloud.len() {
        let p = cloud.points[i];
        let c = cloud.colors[i];
        if ascii {
            write!(w, "{} {} {} {} {} {}", p.x as f32, p.y as f32, p.z as f32, c[0], c[1], c[2])?;
            if let Some(s) = semlabel {
                write!(w, " {}", s[i])?;
            }
            if let Some(t) = treeid {
                write!(w, " {}", t[i])?;
            }
            writeln!(w)?;
        } else {
            w.write_f32::<LittleEndian>(p.x as f32)?;
            w.write_f32::<LittleEndian>(p.y as f32)?;
            w.write_f32::<LittleEndian>(p.z as f32)?;
            w.write_u8(c[0])?;
            w.write_u8(c[1])?;
            w.write_u8(c[2])?;
            if let Some(s) = semlabel {
                w.write_i32::<LittleEndian>(s[i])?;
            }
            if let Some(t) = treeid {
                w.write_i32::<LittleEndian>(t[i])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
