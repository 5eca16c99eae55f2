//! The `khg` text format.
//!
//! ```text
//! khg 1
//! k 3
//! parts 2
//! part A 2: a1 a2
//! part B 2: b1 b2
//! edge a1 b1 b2
//! edge@2 a1 a2      # optional explicit lower-level edge
//! ```

use std::fmt::Write as _;
use std::path::Path;

use crate::complex::{Edge, KComplex, KSystem, Vertex, VertexUniverse};
use crate::error::{Error, Result};

/// Parsed file contents before closure is decided.
#[derive(Clone, Debug)]
pub struct KhgFile {
    pub universe: VertexUniverse,
    pub k: usize,
    pub levels: Vec<Vec<Edge>>,
    /// Whether any `edge@<level>` line was present.
    pub explicit_lower: bool,
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

pub fn parse_khg(text: &str) -> Result<KhgFile> {
    let mut header = false;
    let mut k: Option<usize> = None;
    let mut declared_parts: Option<usize> = None;
    let mut parts: Vec<(String, Vec<String>)> = Vec::new();
    let mut raw_edges: Vec<(usize, usize, Vec<String>)> = Vec::new();
    let mut explicit_lower = false;

    for (no, raw) in text.lines().enumerate() {
        let line_no = no + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut toks = line.split_whitespace();
        let head = toks.next().unwrap_or_default();
        if !header {
            if head != "khg" || toks.next() != Some("1") {
                return Err(perr(line_no, "expected header `khg 1`"));
            }
            header = true;
            continue;
        }
        match head {
            "k" => {
                let v = toks
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| perr(line_no, "bad k"))?;
                k = Some(v);
            }
            "parts" => {
                let v = toks
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| perr(line_no, "bad part count"))?;
                declared_parts = Some(v);
            }
            "part" => {
                let (decl, names) = line["part".len()..]
                    .split_once(':')
                    .ok_or_else(|| perr(line_no, "part line needs `:`"))?;
                let mut d = decl.split_whitespace();
                let name = d.next().ok_or_else(|| perr(line_no, "missing part name"))?;
                let size: usize = d
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| perr(line_no, "missing part size"))?;
                let vs: Vec<String> = names.split_whitespace().map(str::to_string).collect();
                if vs.len() != size {
                    return Err(perr(
                        line_no,
                        format!(
                            "part {name} declares {size} vertices but lists {}",
                            vs.len()
                        ),
                    ));
                }
                parts.push((name.to_string(), vs));
            }
            h if h == "edge" || h.starts_with("edge@") => {
                let vs: Vec<String> = toks.map(str::to_string).collect();
                let level = if h == "edge" {
                    None
                } else {
                    explicit_lower = true;
                    Some(
                        h["edge@".len()..]
                            .parse::<usize>()
                            .map_err(|_| perr(line_no, "bad edge level"))?,
                    )
                };
                raw_edges.push((line_no, level.unwrap_or(usize::MAX), vs));
            }
            other => return Err(perr(line_no, format!("unknown directive `{other}`"))),
        }
    }
    if !header {
        return Err(perr(1, "empty file"));
    }
    let k = k.ok_or_else(|| perr(0, "missing `k` line"))?;
    if let Some(r) = declared_parts {
        if r != parts.len() {
            return Err(perr(
                0,
                format!("declared {r} parts, found {}", parts.len()),
            ));
        }
    }
    let universe = VertexUniverse::new(parts)?;
    let mut levels = vec![Vec::new(); k + 1];
    levels[0].push(Edge::EMPTY);
    for (line_no, level, names) in raw_edges {
        let level = if level == usize::MAX { k } else { level };
        if level > k || names.len() != level {
            return Err(perr(
                line_no,
                format!("edge of size {} on level {level}", names.len()),
            ));
        }
        let ids = names
            .iter()
            .map(|n| {
                universe
                    .vertex_by_name(n)
                    .ok_or_else(|| Error::BadVertex(n.clone()))
            })
            .collect::<Result<Vec<Vertex>>>()?;
        let e = Edge::new(ids).ok_or_else(|| perr(line_no, "repeated vertex in edge"))?;
        levels[level].push(e);
    }
    Ok(KhgFile {
        universe,
        k,
        levels,
        explicit_lower,
    })
}

impl KhgFile {
    pub fn into_system(self) -> Result<KSystem> {
        KSystem::new(self.universe, self.k, self.levels)
    }

    /// With `close`, lower levels are completed; otherwise closure is validated.
    pub fn into_complex(self, close: bool) -> Result<KComplex> {
        crate::complex::build_complex(self.levels, self.universe, self.k, close)
    }
}

pub fn read_khg(path: impl AsRef<Path>) -> Result<KhgFile> {
    parse_khg(&std::fs::read_to_string(path)?)
}

/// Writes the top level, plus every lower level when `lower` is set.
pub fn write_khg(sys: &KSystem, lower: bool) -> String {
    let u = sys.universe();
    let mut out = String::new();
    let _ = writeln!(out, "khg 1");
    let _ = writeln!(out, "k {}", sys.k());
    let _ = writeln!(out, "parts {}", u.r());
    for (j, block) in u.partition().blocks().iter().enumerate() {
        let _ = write!(out, "part {} {}:", u.part_name(j), block.len());
        for &v in block {
            let _ = write!(out, " {}", u.name(v));
        }
        out.push('\n');
    }
    let mut edge_line = |tag: &str, e: Edge| {
        out.push_str(tag);
        for v in e.iter() {
            out.push(' ');
            out.push_str(u.name(v));
        }
        out.push('\n');
    };
    if lower {
        for i in 1..sys.k() {
            let tag = format!("edge@{i}");
            for &e in sys.level(i) {
                edge_line(&tag, e);
            }
        }
    }
    for &e in sys.top() {
        edge_line("edge", e);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
khg 1
# two parts
k 3
parts 2
part A 2: a1 a2
part B 2: b1 b2
edge a1 b1 b2
edge a2 b1 b2   # trailing comment
";

    #[test]
    fn parse_and_close() {
        let f = parse_khg(SAMPLE).unwrap();
        assert_eq!(f.k, 3);
        assert_eq!(f.universe.r(), 2);
        let j = f.into_complex(true).unwrap();
        assert_eq!(j.top().len(), 2);
        assert_eq!(j.level(2).len(), 5);
    }

    #[test]
    fn round_trip() {
        let j = parse_khg(SAMPLE).unwrap().into_complex(true).unwrap();
        let text = write_khg(&j, true);
        let back = parse_khg(&text).unwrap().into_complex(false).unwrap();
        for i in 0..=3 {
            assert_eq!(back.level(i), j.level(i));
        }
    }

    #[test]
    fn unknown_vertex() {
        let bad = SAMPLE.replace("edge a1 b1 b2", "edge a1 b1 zz");
        assert!(matches!(parse_khg(&bad), Err(Error::BadVertex(_))));
    }

    #[test]
    fn missing_lower_level_without_closure() {
        let err = parse_khg(SAMPLE).unwrap().into_complex(false).unwrap_err();
        assert!(matches!(err, Error::ClosureViolation { .. }));
    }

    #[test]
    fn size_mismatch() {
        let bad = SAMPLE.replace("part A 2:", "part A 3:");
        assert!(matches!(parse_khg(&bad), Err(Error::Parse { .. })));
    }
}
