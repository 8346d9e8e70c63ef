//! Edge lists, problem files and trace CSVs.

use std::io::{BufRead, Write};
use std::path::Path;

use sched_core::costs::{BaseCost, CompositeCost, Penalty, Problem};
use sched_core::graph::Topology;
use sched_core::protocol::Trace;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Writes `n <count>` followed by one `i j w` line per edge.
pub fn write_edge_list<W: Write>(mut out: W, t: &Topology) -> std::io::Result<()> {
    writeln!(out, "n {}", t.n())?;
    for e in t.edges() {
        writeln!(out, "{} {} {}", e.i, e.j, e.weight)?;
    }
    Ok(())
}

/// Parses the edge-list format. Blank lines and `#` comments are ignored;
/// the weight column defaults to 1.
pub fn read_edge_list<R: BufRead>(input: R, origin: &str) -> Result<Topology> {
    let err = |line: usize, msg: String| Error::Parse { path: origin.to_owned(), line, msg };
    let mut n = None;
    let mut edges = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| err(lineno, e.to_string()))?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let fields: Vec<&str> = body.split_whitespace().collect();
        if n.is_none() {
            match fields.as_slice() {
                ["n", count] => {
                    n = Some(
                        count
                            .parse::<usize>()
                            .map_err(|e| err(lineno, format!("bad node count: {e}")))?,
                    )
                }
                _ => return Err(err(lineno, "expected header `n <count>`".into())),
            }
            continue;
        }
        let (i, j, w) = match fields.as_slice() {
            [i, j] => (*i, *j, "1"),
            [i, j, w] => (*i, *j, *w),
            _ => return Err(err(lineno, "expected `i j [w]`".into())),
        };
        let node = |s: &str| s.parse::<usize>().map_err(|e| err(lineno, format!("bad node id `{s}`: {e}")));
        let w = w.parse::<f64>().map_err(|e| err(lineno, format!("bad weight `{w}`: {e}")))?;
        edges.push((node(i)?, node(j)?, w, lineno));
    }
    let n = n.ok_or_else(|| err(0, "missing header `n <count>`".into()))?;
    // validate edge by edge so the error points at a line
    let mut seen = Vec::with_capacity(edges.len());
    for &(i, j, w, lineno) in &edges {
        Topology::new(n, [(i, j, w)]).map_err(|e| err(lineno, e.to_string()))?;
        let key = (i.min(j), i.max(j));
        if seen.contains(&key) {
            return Err(err(lineno, format!("duplicate edge {i}-{j}")));
        }
        seen.push(key);
    }
    Topology::new(n, edges.into_iter().map(|(i, j, w, _)| (i, j, w)))
        .map_err(|e| err(0, e.to_string()))
}

pub fn load_edge_list(path: &Path) -> Result<Topology> {
    let f = std::fs::File::open(path).map_err(|source| Error::Input { path: path.to_owned(), source })?;
    read_edge_list(std::io::BufReader::new(f), &path.display().to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    agent: Vec<AgentEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AgentEntry {
    b: f64,
    base: BaseCost,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    penalty: Option<Penalty>,
    #[serde(default = "unit", skip_serializing_if = "is_unit")]
    input_scale: f64,
}

fn unit() -> f64 {
    1.0
}

fn is_unit(v: &f64) -> bool {
    *v == 1.0
}

/// TOML with one `[[agent]]` table per agent:
///
/// ```toml
/// [[agent]]
/// b = 50.0
/// base = { type = "quadratic", g = 0.1, d = 2.0, a = 1.0 }
/// penalty = { type = "hard", lower = 10.0, upper = 110.0, sigma = 1.0, exponent = 2 }
/// ```
pub fn problem_to_toml(p: &Problem) -> String {
    let file = ProblemFile {
        agent: p
            .costs()
            .iter()
            .zip(p.demands())
            .map(|(c, &b)| AgentEntry {
                b,
                base: c.base,
                penalty: c.penalty,
                input_scale: c.input_scale,
            })
            .collect(),
    };
    toml::to_string(&file).expect("problem serializes to TOML")
}

pub fn problem_from_toml(text: &str) -> Result<Problem> {
    let file: ProblemFile = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
    let mut costs = Vec::with_capacity(file.agent.len());
    let mut demands = Vec::with_capacity(file.agent.len());
    for (i, a) in file.agent.into_iter().enumerate() {
        if !(a.input_scale.is_finite() && a.input_scale > 0.0) {
            return Err(Error::config(format!("agent {i}: input_scale must be positive")));
        }
        // re-run the constructors' checks on deserialized parameters
        let checked = match a.base {
            BaseCost::Quadratic(q) => CompositeCost::quadratic(q.g, q.d, q.a),
            BaseCost::Cpu(c) => CompositeCost::cpu(c.pi_max, c.rho),
        }
        .and_then(|c| match a.penalty {
            None => Ok(c),
            Some(Penalty::Hard(h)) => sched_core::costs::HardBoxPenalty::new(
                h.lower, h.upper, h.sigma, h.exponent,
            )
            .map(|h| c.with_penalty(Penalty::Hard(h))),
            Some(Penalty::SmoothLog(s)) => {
                sched_core::costs::SmoothLogPenalty::new(s.lower, s.upper, s.sigma, s.alpha)
                    .map(|s| c.with_penalty(Penalty::SmoothLog(s)))
            }
        })
        .map_err(|e| Error::config(format!("agent {i}: {e}")))?;
        costs.push(CompositeCost { input_scale: a.input_scale, ..checked });
        demands.push(a.b);
    }
    Problem::new(costs, demands).map_err(|e| Error::config(e.to_string()))
}

pub fn load_problem(path: &Path) -> Result<Problem> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| Error::Input { path: path.to_owned(), source })?;
    problem_from_toml(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
}

/// 17 significant digits, enough to parse back to the same `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn trace_header(n: usize) -> Vec<String> {
    let mut h: Vec<String> = ["k", "F", "residual", "feas_gap", "edges", "msgs"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend((0..n).map(|i| format!("x_{i}")));
    h.extend((0..n).map(|i| format!("y_{i}")));
    h
}

/// Writes `k,F,residual,feas_gap,edges,msgs,x_0..,y_0..`, one row per round.
pub fn write_trace_csv<W: Write>(out: W, trace: &Trace, residual: &[f64]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trace_header(trace.n))?;
    let mut rec = Vec::with_capacity(6 + 2 * trace.n);
    for (row, r) in trace.rows.iter().zip(residual) {
        rec.clear();
        rec.push(row.k.to_string());
        rec.push(format_float(row.cost));
        rec.push(format_float(*r));
        rec.push(format_float(row.feas_gap));
        rec.push(row.edges.to_string());
        rec.push(row.msgs.to_string());
        rec.extend(row.x.iter().map(|v| format_float(*v)));
        rec.extend(row.y.iter().map(|v| format_float(*v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// A trace CSV read back as named numeric columns.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl TraceTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.headers.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    /// Columns whose name starts with `prefix_`, in index order.
    pub fn family(&self, prefix: &str) -> Vec<Vec<f64>> {
        let mut cols: Vec<(usize, usize)> = self
            .headers
            .iter()
            .enumerate()
            .filter_map(|(i, h)| {
                h.strip_prefix(prefix)
                    .and_then(|s| s.strip_prefix('_'))
                    .and_then(|s| s.parse::<usize>().ok())
                    .map(|n| (n, i))
            })
            .collect();
        cols.sort_unstable();
        cols.into_iter()
            .map(|(_, i)| self.rows.iter().map(|r| r[i]).collect())
            .collect()
    }
}

pub fn read_trace_csv<R: std::io::Read>(input: R, origin: &str) -> Result<TraceTable> {
    let mut r = csv::Reader::from_reader(input);
    let err = |line: usize, msg: String| Error::Parse { path: origin.to_owned(), line, msg };
    let headers: Vec<String> = r
        .headers()
        .map_err(|e| err(1, e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    for required in ["k", "F", "residual", "feas_gap"] {
        if !headers.iter().any(|h| h == required) {
            return Err(err(1, format!("missing column `{required}`")));
        }
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| err(line, e.to_string()))?;
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>().map_err(|e| err(line, format!("bad number `{f}`: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(TraceTable { headers, rows })
}

pub fn load_trace_csv(path: &Path) -> Result<TraceTable> {
    let f = std::fs::File::open(path).map_err(|source| Error::Input { path: path.to_owned(), source })?;
    read_trace_csv(std::io::BufReader::new(f), &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use sched_core::costs::sample_academic_costs;

    #[test]
    fn edge_list_round_trip() {
        let t = Topology::new(4, [(0, 1, 1.0), (1, 2, 0.5), (0, 3, 2.25)]).unwrap();
        let mut buf = Vec::new();
        write_edge_list(&mut buf, &t).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "n 4\n0 1 1\n0 3 2.25\n1 2 0.5\n");
        assert_eq!(read_edge_list(&buf[..], "mem").unwrap(), t);
    }

    #[test]
    fn edge_list_errors_point_at_lines() {
        let e = read_edge_list("n 3\n# comment\n0 1\n1 1 2\n".as_bytes(), "g.txt").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 4, .. }), "{e}");
        let e = read_edge_list("0 1 1\n".as_bytes(), "g.txt").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }), "{e}");
        let e = read_edge_list("n 3\n0 1\n1 0\n".as_bytes(), "g.txt").unwrap_err();
        assert!(e.to_string().contains("duplicate"), "{e}");
        let e = read_edge_list("n 3\n0 5\n".as_bytes(), "g.txt").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }), "{e}");
    }

    #[test]
    fn problem_file_round_trip() {
        let p = sample_academic_costs(4, 11).unwrap();
        let text = problem_to_toml(&p);
        assert!(text.contains("[[agent]]"));
        assert_eq!(problem_from_toml(&text).unwrap(), p);
    }

    #[test]
    fn problem_file_rejects_bad_parameters() {
        let text = "[[agent]]\nb = 1.0\nbase = { type = \"quadratic\", g = -1.0, d = 0.0, a = 0.0 }\n";
        let e = problem_from_toml(text).unwrap_err().to_string();
        assert!(e.contains("agent 0"), "{e}");
    }

    #[test]
    fn csv_floats_round_trip_exactly() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 123456789.12345679, f64::MIN_POSITIVE] {
            assert_eq!(format_float(v).parse::<f64>().unwrap(), v);
        }
    }
}
