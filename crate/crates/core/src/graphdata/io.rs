//! Line-oriented dataset text format.
//!
//! ```text
//! #graphs N #classes C #featdim D
//! g <n> <label>
//! x <f1> ... <fD>     (n lines)
//! e <u> <v> <truth:0|1>
//!                     (blank line separates graphs)
//! ```
//!
//! The writer emits exactly this; the reader is strict. Floats are printed
//! with Rust's shortest round-trip formatting, so save(load(x)) is
//! byte-identical and values survive losslessly.

use std::fmt::Write as _;
use std::path::Path;

use super::{Dataset, Graph, GraphError, Metadata};

pub fn format_graphs(ds: &Dataset) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "#graphs {} #classes {} #featdim {}",
        ds.graphs.len(),
        ds.num_classes,
        ds.feature_dim
    );
    for (i, g) in ds.graphs.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "g {} {}", g.n, g.label);
        for v in 0..g.n {
            out.push('x');
            for f in g.feature_row(v) {
                let _ = write!(out, " {f}");
            }
            out.push('\n');
        }
        for (e, &(u, v)) in g.edges.iter().enumerate() {
            let t = g.truth_edges.as_ref().map(|t| t[e]).unwrap_or(false);
            let _ = writeln!(out, "e {u} {v} {}", u8::from(t));
        }
    }
    out
}

pub fn save_graphs(path: impl AsRef<Path>, ds: &Dataset) -> Result<(), GraphError> {
    std::fs::write(path, format_graphs(ds))?;
    Ok(())
}

pub fn load_graphs(path: impl AsRef<Path>) -> Result<Dataset, GraphError> {
    let text = std::fs::read_to_string(&path)?;
    let mut ds = parse_graphs(&text)?;
    ds.metadata.params = path.as_ref().display().to_string();
    Ok(ds)
}

struct Lines<'a> {
    lines: Vec<&'a str>,
    pos: usize,
}

impl<'a> Lines<'a> {
    /// 1-based number of the line about to be read.
    fn lineno(&self) -> usize {
        self.pos + 1
    }

    fn next(&mut self) -> Option<&'a str> {
        let l = self.lines.get(self.pos).copied();
        if l.is_some() {
            self.pos += 1;
        }
        l
    }

    fn peek(&self) -> Option<&'a str> {
        self.lines.get(self.pos).copied()
    }

    fn err(&self, msg: impl Into<String>) -> GraphError {
        GraphError::Parse { line: self.lineno(), msg: msg.into() }
    }
}

fn parse_int(l: &Lines, tok: &str, what: &str) -> Result<usize, GraphError> {
    tok.parse::<usize>().map_err(|_| l.err(format!("invalid {what}: {tok:?}")))
}

/// Strict parser for the format above; errors carry 1-based line numbers,
/// and graph-invariant violations name the graph index.
pub fn parse_graphs(text: &str) -> Result<Dataset, GraphError> {
    let mut lines = Lines { lines: text.lines().collect(), pos: 0 };

    let header = lines.next().ok_or_else(|| lines.err("missing header"))?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() != 6 || toks[0] != "#graphs" || toks[2] != "#classes" || toks[4] != "#featdim" {
        return Err(GraphError::Parse {
            line: 1,
            msg: format!("malformed header: {header:?}"),
        });
    }
    let n_graphs = parse_int(&lines, toks[1], "graph count")?;
    let n_classes = parse_int(&lines, toks[3], "class count")?;
    let feat_dim = parse_int(&lines, toks[5], "feature dim")?;
    if n_graphs == 0 || n_classes == 0 || feat_dim == 0 {
        return Err(GraphError::Parse { line: 1, msg: "zero counts in header".into() });
    }

    let mut graphs = Vec::with_capacity(n_graphs);
    for gi in 0..n_graphs {
        if gi > 0 {
            match lines.next() {
                Some("") => {}
                Some(other) => {
                    return Err(GraphError::Parse {
                        line: lines.lineno() - 1,
                        msg: format!("expected blank separator line, got {other:?}"),
                    })
                }
                None => return Err(lines.err(format!("expected graph {gi}, found end of file"))),
            }
        }
        let gline = lines.next().ok_or_else(|| lines.err("expected 'g <n> <label>'"))?;
        let gl = lines.lineno() - 1;
        let toks: Vec<&str> = gline.split_whitespace().collect();
        if toks.len() != 3 || toks[0] != "g" {
            return Err(GraphError::Parse {
                line: gl,
                msg: format!("expected 'g <n> <label>', got {gline:?}"),
            });
        }
        let n = parse_int(&lines, toks[1], "node count")?;
        let label = parse_int(&lines, toks[2], "label")?;

        let mut features = Vec::with_capacity(n * feat_dim);
        for _ in 0..n {
            let xline = lines.next().ok_or_else(|| lines.err("expected feature line"))?;
            let xl = lines.lineno() - 1;
            let mut toks = xline.split_whitespace();
            if toks.next() != Some("x") {
                return Err(GraphError::Parse {
                    line: xl,
                    msg: format!("expected 'x <{feat_dim} floats>', got {xline:?}"),
                });
            }
            let vals: Result<Vec<f64>, _> = toks.map(str::parse::<f64>).collect();
            let vals = vals.map_err(|e| GraphError::Parse {
                line: xl,
                msg: format!("invalid feature value: {e}"),
            })?;
            if vals.len() != feat_dim {
                return Err(GraphError::Parse {
                    line: xl,
                    msg: format!("{} feature values, expected {feat_dim}", vals.len()),
                });
            }
            features.extend(vals);
        }

        let mut edges = Vec::new();
        let mut truth = Vec::new();
        let mut seen = std::collections::HashSet::new();
        while let Some(line) = lines.peek() {
            if !line.starts_with('e') {
                break;
            }
            lines.next();
            let el = lines.lineno() - 1;
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != 4 || toks[0] != "e" {
                return Err(GraphError::Parse {
                    line: el,
                    msg: format!("expected 'e <u> <v> <0|1>', got {line:?}"),
                });
            }
            let u = parse_int(&lines, toks[1], "endpoint")?;
            let v = parse_int(&lines, toks[2], "endpoint")?;
            let t = match toks[3] {
                "0" => false,
                "1" => true,
                other => {
                    return Err(GraphError::Parse {
                        line: el,
                        msg: format!("truth flag must be 0 or 1, got {other:?}"),
                    })
                }
            };
            if u >= v {
                return Err(GraphError::Parse {
                    line: el,
                    msg: format!("edge ({u},{v}) must satisfy u < v"),
                });
            }
            if v >= n {
                return Err(GraphError::Parse {
                    line: el,
                    msg: format!("edge ({u},{v}) endpoint out of range for n={n}"),
                });
            }
            if !seen.insert((u, v)) {
                return Err(GraphError::Parse {
                    line: el,
                    msg: format!("duplicate edge ({u},{v})"),
                });
            }
            edges.push((u, v));
            truth.push(t);
        }

        let g = Graph::new(n, edges, feat_dim, features, label, Some(truth))
            .map_err(|msg| GraphError::InvalidGraph { graph: gi, msg })?;
        graphs.push(g);
    }

    while let Some(line) = lines.next() {
        if !line.trim().is_empty() {
            return Err(GraphError::Parse {
                line: lines.lineno() - 1,
                msg: format!("trailing content after {n_graphs} graphs: {line:?}"),
            });
        }
    }

    Dataset::new(
        graphs,
        n_classes,
        Metadata { generator: "file".into(), params: String::new(), seed: 0, test_pool: None },
    )
}
