//! Graph file formats: tab-separated edge lists, Graphviz DOT and JSON.
//! Every writer has a matching parser and `parse(write(g)) == g`.

use std::fmt::Write as _;
use std::path::Path;

use clap::ValueEnum;
use npforest_core::{Edge, Error, Graph, Result};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphFormat {
    Tsv,
    Dot,
    Json,
}

impl GraphFormat {
    pub fn extension(self) -> &'static str {
        match self {
            GraphFormat::Tsv => "tsv",
            GraphFormat::Dot => "dot",
            GraphFormat::Json => "json",
        }
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("tsv") => Ok(GraphFormat::Tsv),
            Some("dot") | Some("gv") => Ok(GraphFormat::Dot),
            Some("json") => Ok(GraphFormat::Json),
            _ => Err(Error::InvalidSpec(format!(
                "cannot infer graph format of {}",
                path.display()
            ))),
        }
    }
}

pub fn write_graph(g: &Graph, format: GraphFormat) -> Result<String> {
    match format {
        GraphFormat::Tsv => write_tsv(g),
        GraphFormat::Dot => Ok(write_dot(g)),
        GraphFormat::Json => write_json(g),
    }
}

pub fn parse_graph(text: &str, format: GraphFormat) -> Result<Graph> {
    match format {
        GraphFormat::Tsv => parse_tsv(text),
        GraphFormat::Dot => parse_dot(text),
        GraphFormat::Json => parse_json(text),
    }
}

pub fn read_graph(path: &Path) -> Result<Graph> {
    let text = std::fs::read_to_string(path)?;
    parse_graph(&text, GraphFormat::from_path(path)?)
}

/// Shortest decimal form that parses back to the same bits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn fmt_weight(w: Option<f64>) -> String {
    w.map_or_else(|| "NA".to_owned(), fmt_f64)
}

fn parse_weight(s: &str, line: usize) -> Result<Option<f64>> {
    if s == "NA" {
        return Ok(None);
    }
    s.parse::<f64>().map(Some).map_err(|_| Error::Parse {
        row: line,
        col: 3,
        message: format!("bad weight {s:?}"),
    })
}

fn check_label(label: &str) -> Result<()> {
    if label.is_empty() || label.contains([',', '\t', '\n', '\r']) {
        return Err(Error::InvalidSpec(format!(
            "vertex label {label:?} is empty or contains a comma, tab or newline"
        )));
    }
    Ok(())
}

fn index_of(g: &Graph, label: &str, line: usize) -> Result<usize> {
    g.vertices()
        .iter()
        .position(|v| v == label)
        .ok_or_else(|| Error::Parse {
            row: line,
            col: 1,
            message: format!("unknown vertex {label:?}"),
        })
}

fn insert_unique(g: &mut Graph, i: usize, j: usize, w: Option<f64>, line: usize) -> Result<()> {
    if g.contains(i, j) {
        return Err(Error::Parse {
            row: line,
            col: 1,
            message: format!("duplicate edge {i} -- {j}"),
        });
    }
    g.add_edge(i, j, w)
}

/// `# vertices: a,b,c` then one `a<TAB>b<TAB>weight` line per edge, ordered by
/// vertex index. Missing weights are written as `NA`.
pub fn write_tsv(g: &Graph) -> Result<String> {
    for v in g.vertices() {
        check_label(v)?;
    }
    let mut out = format!("# vertices: {}\n", g.vertices().join(","));
    for e in g.edges() {
        let (a, b) = (&g.vertices()[e.i], &g.vertices()[e.j]);
        writeln!(out, "{a}\t{b}\t{}", fmt_weight(e.weight)).unwrap();
    }
    Ok(out)
}

pub fn parse_tsv(text: &str) -> Result<Graph> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::Parse {
        row: 1,
        col: 1,
        message: "empty graph file".into(),
    })?;
    let labels = header
        .strip_prefix("# vertices:")
        .ok_or_else(|| Error::Parse {
            row: 1,
            col: 1,
            message: "missing '# vertices:' header".into(),
        })?;
    let labels = labels.strip_prefix(' ').unwrap_or(labels);
    let vertices: Vec<String> = if labels.is_empty() {
        Vec::new()
    } else {
        labels.split(',').map(str::to_owned).collect()
    };
    let mut g = Graph::new(vertices);
    for (k, line) in lines {
        let row = k + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                row,
                col: fields.len().min(3),
                message: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        }
        let i = index_of(&g, fields[0], row)?;
        let j = index_of(&g, fields[1], row)?;
        let w = parse_weight(fields[2], row)?;
        insert_unique(&mut g, i, j, w, row)?;
    }
    Ok(g)
}

fn quote(label: &str) -> String {
    let mut s = String::with_capacity(label.len() + 2);
    s.push('"');
    for c in label.chars() {
        if c == '"' || c == '\\' {
            s.push('\\');
        }
        s.push(c);
    }
    s.push('"');
    s
}

/// Reads one quoted identifier from the front of `s`, returning it and the
/// remainder.
fn unquote(s: &str, line: usize) -> Result<(String, &str)> {
    let bad = || Error::Parse {
        row: line,
        col: 1,
        message: format!("expected a quoted label in {s:?}"),
    };
    let rest = s.trim_start().strip_prefix('"').ok_or_else(bad)?;
    let mut out = String::new();
    let mut chars = rest.char_indices();
    while let Some((k, c)) = chars.next() {
        match c {
            '\\' => out.push(chars.next().ok_or_else(bad)?.1),
            '"' => return Ok((out, &rest[k + 1..])),
            c => out.push(c),
        }
    }
    Err(bad())
}

/// Undirected DOT: every vertex declared, then `"a" -- "b"` per edge with the
/// weight as an attribute when present.
pub fn write_dot(g: &Graph) -> String {
    let mut out = String::from("graph G {\n");
    for v in g.vertices() {
        writeln!(out, "  {};", quote(v)).unwrap();
    }
    for e in g.edges() {
        let (a, b) = (quote(&g.vertices()[e.i]), quote(&g.vertices()[e.j]));
        match e.weight {
            Some(w) => writeln!(out, "  {a} -- {b} [weight={}];", fmt_f64(w)).unwrap(),
            None => writeln!(out, "  {a} -- {b};").unwrap(),
        }
    }
    out.push_str("}\n");
    out
}

/// Parses the subset of DOT produced by [`write_dot`].
pub fn parse_dot(text: &str) -> Result<Graph> {
    let mut vertices = Vec::new();
    let mut edges: Vec<(String, String, Option<f64>, usize)> = Vec::new();
    let mut opened = false;
    for (k, raw) in text.lines().enumerate() {
        let row = k + 1;
        let line = raw.trim();
        if line.is_empty() || line == "}" {
            continue;
        }
        if !opened {
            if line.starts_with("graph") && line.ends_with('{') {
                opened = true;
                continue;
            }
            return Err(Error::Parse {
                row,
                col: 1,
                message: "expected 'graph ... {'".into(),
            });
        }
        let body = line.strip_suffix(';').unwrap_or(line);
        let (a, rest) = unquote(body, row)?;
        let rest = rest.trim();
        if rest.is_empty() {
            vertices.push(a);
            continue;
        }
        let rest = rest.strip_prefix("--").ok_or_else(|| Error::Parse {
            row,
            col: 1,
            message: format!("expected '--' in {line:?}"),
        })?;
        let (b, rest) = unquote(rest, row)?;
        let rest = rest.trim();
        let weight = if rest.is_empty() {
            None
        } else {
            let w = rest
                .strip_prefix("[weight=")
                .and_then(|r| r.strip_suffix(']'))
                .ok_or_else(|| Error::Parse {
                    row,
                    col: 3,
                    message: format!("unsupported attributes {rest:?}"),
                })?;
            parse_weight(w, row)?
        };
        edges.push((a, b, weight, row));
    }
    let mut g = Graph::new(vertices);
    for (a, b, w, row) in edges {
        let i = index_of(&g, &a, row)?;
        let j = index_of(&g, &b, row)?;
        insert_unique(&mut g, i, j, w, row)?;
    }
    Ok(g)
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    schema_version: u32,
    vertices: Vec<String>,
    edges: Vec<Edge>,
}

pub fn write_json(g: &Graph) -> Result<String> {
    let file = GraphFile {
        schema_version: SCHEMA_VERSION,
        vertices: g.vertices().to_vec(),
        edges: g.edges().to_vec(),
    };
    let mut s = serde_json::to_string_pretty(&file).map_err(|e| Error::Internal(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn parse_json(text: &str) -> Result<Graph> {
    let file: GraphFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        row: e.line(),
        col: e.column(),
        message: e.to_string(),
    })?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(Error::InvalidSpec(format!(
            "unsupported schema_version {}",
            file.schema_version
        )));
    }
    let mut g = Graph::new(file.vertices);
    for e in file.edges {
        insert_unique(&mut g, e.i, e.j, e.weight, 0)?;
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Graph {
        let mut g = Graph::new(vec!["a".into(), "b b".into(), "c\"q".into(), "d".into()]);
        g.add_edge(2, 0, Some(-0.125)).unwrap();
        g.add_edge(1, 3, None).unwrap();
        g.add_edge(0, 1, Some(1.0 / 3.0)).unwrap();
        g
    }

    #[test]
    fn tsv_layout() {
        let mut g = Graph::new(vec!["x".into(), "y".into(), "z".into()]);
        g.add_edge(1, 2, Some(0.5)).unwrap();
        g.add_edge(0, 2, None).unwrap();
        assert_eq!(
            write_tsv(&g).unwrap(),
            "# vertices: x,y,z\nx\tz\tNA\ny\tz\t0.5\n"
        );
    }

    #[test]
    fn dot_layout() {
        let g = Graph::from_edges(vec!["x".into(), "y".into()], [(0, 1)]).unwrap();
        assert_eq!(
            write_dot(&g),
            "graph G {\n  \"x\";\n  \"y\";\n  \"x\" -- \"y\";\n}\n"
        );
    }

    #[test]
    fn roundtrips() {
        let g = sample();
        let mut plain = g.clone();
        plain = Graph::from_edges(
            vec!["a".into(), "b".into(), "c".into(), "d".into()],
            plain.edges().iter().map(|e| (e.i, e.j)),
        )
        .unwrap();
        for f in [GraphFormat::Tsv, GraphFormat::Dot, GraphFormat::Json] {
            assert_eq!(
                parse_graph(&write_graph(&plain, f).unwrap(), f).unwrap(),
                plain,
                "{f:?}"
            );
        }
        for f in [GraphFormat::Dot, GraphFormat::Json] {
            assert_eq!(
                parse_graph(&write_graph(&g, f).unwrap(), f).unwrap(),
                g,
                "{f:?}"
            );
        }
        let empty = Graph::new(vec![]);
        assert_eq!(parse_tsv(&write_tsv(&empty).unwrap()).unwrap(), empty);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(write_tsv(&Graph::new(vec!["a,b".into()])).is_err());
        assert!(parse_tsv("x\ty\t1\n").is_err());
        assert!(parse_tsv("# vertices: x,y\nx\tq\t1\n").is_err());
        assert!(parse_tsv("# vertices: x,y\nx\ty\t1\ny\tx\t2\n").is_err());
        assert!(parse_json("{\"schema_version\":2,\"vertices\":[],\"edges\":[]}").is_err());
    }
}
