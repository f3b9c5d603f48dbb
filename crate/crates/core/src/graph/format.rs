//! Line-oriented graph file.
//!
//! ```text
//! bcgraph-graph 1
//! vertices <n> interior <ni> boundary <nb>
//! edges <ne>
//! v <id> I|B <mu> [<x> <y>]
//! e <a> <b> <w>
//! ```
//! Blank lines and lines starting with `#` are ignored. Reals are written
//! with 17 significant digits so the file round-trips exactly.

use std::io::{BufRead, Write};

use super::{build_graph, RawGraph, RawVertex, VertexKind, WeightedGraph};
use crate::error::{Error, Result};

const MAGIC: &str = "bcgraph-graph 1";

pub fn write_graph<W: Write>(g: &WeightedGraph, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "vertices {} interior {} boundary {}", g.n_vertices(), g.n_interior(), g.n_boundary())?;
    writeln!(out, "edges {}", g.edges().len())?;
    for v in 0..g.n_vertices() {
        let flag = if g.is_interior(v) { 'I' } else { 'B' };
        write!(out, "v {v} {flag} {:.16e}", g.mu()[v])?;
        if let Some([x, y]) = g.coords(v) {
            write!(out, " {x:.16e} {y:.16e}")?;
        }
        writeln!(out)?;
    }
    for e in g.edges() {
        writeln!(out, "e {} {} {:.16e}", e.a, e.b, e.w)?;
    }
    Ok(())
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn num<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| perr(line, format!("missing {what}")))?;
    tok.parse().map_err(|_| perr(line, format!("bad {what} `{tok}`")))
}

pub fn read_graph<R: BufRead>(input: R) -> Result<WeightedGraph> {
    let mut lines = input
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| l.as_ref().map(|s| !s.trim().is_empty() && !s.trim_start().starts_with('#')).unwrap_or(true));
    let mut next = |what: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((i, Ok(l))) => Ok((i, l)),
            Some((i, Err(e))) => Err(perr(i, e.to_string())),
            None => Err(perr(0, format!("unexpected end of file, expected {what}"))),
        }
    };

    let (i, l) = next("header")?;
    if l.trim() != MAGIC {
        return Err(perr(i, format!("expected `{MAGIC}`")));
    }
    let (i, l) = next("vertex counts")?;
    let t: Vec<&str> = l.split_whitespace().collect();
    if t.len() != 6 || t[0] != "vertices" || t[2] != "interior" || t[4] != "boundary" {
        return Err(perr(i, "expected `vertices <n> interior <ni> boundary <nb>`"));
    }
    let n: usize = num(Some(t[1]), i, "vertex count")?;
    let ni: usize = num(Some(t[3]), i, "interior count")?;
    let nb: usize = num(Some(t[5]), i, "boundary count")?;
    if ni + nb != n {
        return Err(perr(i, "interior + boundary != vertices"));
    }
    let (i, l) = next("edge count")?;
    let ne: usize = match l.split_whitespace().collect::<Vec<_>>()[..] {
        ["edges", k] => num(Some(k), i, "edge count")?,
        _ => return Err(perr(i, "expected `edges <count>`")),
    };

    let mut raw = RawGraph::default();
    let mut seen = vec![false; n];
    let mut slots: Vec<Option<RawVertex>> = vec![None; n];
    for _ in 0..n {
        let (i, l) = next("vertex record")?;
        let mut t = l.split_whitespace();
        if t.next() != Some("v") {
            return Err(perr(i, "expected vertex record"));
        }
        let id: usize = num(t.next(), i, "vertex id")?;
        if id >= n || seen[id] {
            return Err(perr(i, format!("vertex id {id} out of range or repeated")));
        }
        seen[id] = true;
        let kind = match t.next() {
            Some("I") => VertexKind::Interior,
            Some("B") => VertexKind::Boundary,
            _ => return Err(perr(i, "vertex flag must be I or B")),
        };
        let mu: f64 = num(t.next(), i, "mu")?;
        let rest: Vec<&str> = t.collect();
        let coords = match rest[..] {
            [] => None,
            [x, y] => Some([num(Some(x), i, "x")?, num(Some(y), i, "y")?]),
            _ => return Err(perr(i, "expected 0 or 2 coordinates")),
        };
        slots[id] = Some(RawVertex { kind, mu, coords });
    }
    raw.vertices = slots.into_iter().map(|v| v.expect("all ids seen")).collect();
    if raw.vertices.iter().filter(|v| v.kind == VertexKind::Interior).count() != ni {
        return Err(perr(0, "interior count does not match vertex flags"));
    }
    for _ in 0..ne {
        let (i, l) = next("edge record")?;
        let mut t = l.split_whitespace();
        if t.next() != Some("e") {
            return Err(perr(i, "expected edge record"));
        }
        let a = num(t.next(), i, "edge endpoint")?;
        let b = num(t.next(), i, "edge endpoint")?;
        let w = num(t.next(), i, "edge weight")?;
        if t.next().is_some() {
            return Err(perr(i, "trailing tokens"));
        }
        raw.add_edge(a, b, w);
    }
    if let Ok((i, _)) = next("") {
        return Err(perr(i, "trailing content after the declared records"));
    }
    build_graph(&raw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_hex, EdgeRule, VertexRule};

    fn round_trip(g: &WeightedGraph) -> WeightedGraph {
        let mut buf = Vec::new();
        write_graph(g, &mut buf).unwrap();
        read_graph(buf.as_slice()).unwrap()
    }

    #[test]
    fn hex_round_trips_exactly() {
        let g = generate_hex(3, 2, EdgeRule::MeanDegree, VertexRule::Trig).unwrap();
        assert_eq!(round_trip(&g), g);
    }

    #[test]
    fn renumbers_boundary_first_files() {
        let text = "bcgraph-graph 1\nvertices 3 interior 1 boundary 2\nedges 2\n\
                    v 0 B 1\nv 1 I 2.5\nv 2 B 1\ne 0 1 1\ne 1 2 3\n";
        let g = read_graph(text.as_bytes()).unwrap();
        assert_eq!(g.mu(), &[2.5, 1.0, 1.0]);
        assert_eq!(g.weight(0, 2), Some(3.0));
    }

    #[test]
    fn parse_errors_carry_lines() {
        let text = "bcgraph-graph 1\nvertices 3 interior 1 boundary 2\nedges 1\nv 0 I 1\nv 1 X 1\n";
        assert!(matches!(read_graph(text.as_bytes()), Err(Error::Parse { line: 5, .. })));
        assert!(matches!(read_graph("nope\n".as_bytes()), Err(Error::Parse { line: 1, .. })));
    }
}
