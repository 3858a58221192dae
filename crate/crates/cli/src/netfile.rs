//! Line-oriented network files.
//!
//! ```text
//! # comment
//! kappa 1
//! eta 2
//! node 1 0 0 1 1      # id x y transmit_power noise_power
//! node 2 0.418 0 1 1
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use dfroute::{Network, NetworkError, NodeSpec};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid network: {0}")]
    Validation(#[from] NetworkError),
}

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> LoadError {
    LoadError::Parse {
        line,
        column,
        message: message.into(),
    }
}

/// Whitespace-separated tokens with their 1-based columns.
fn tokens(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in line.char_indices() {
        match (c.is_whitespace(), start) {
            (false, None) => start = Some(i),
            (true, Some(s)) => {
                out.push((s, &line[s..i]));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, &line[s..]));
    }
    out.into_iter()
        .map(|(byte, tok)| (line[..byte].chars().count() + 1, tok))
        .collect()
}

fn number<T: std::str::FromStr>(line: usize, (col, tok): (usize, &str), what: &str) -> Result<T, LoadError> {
    tok.parse()
        .map_err(|_| parse_err(line, col, format!("expected {what}, found `{tok}`")))
}

pub fn parse_network(text: &str) -> Result<Network, LoadError> {
    let mut kappa: Option<f64> = None;
    let mut eta: Option<f64> = None;
    let mut nodes = Vec::new();
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let content = raw.split('#').next().unwrap_or("");
        let toks = tokens(content);
        let Some(&(col, keyword)) = toks.first() else {
            continue;
        };
        let arity = match keyword {
            "kappa" | "eta" => 1,
            "node" => 5,
            _ => return Err(parse_err(line_no, col, format!("unknown keyword `{keyword}`"))),
        };
        if toks.len() != arity + 1 {
            let at = toks.get(arity + 1).map_or(col, |t| t.0);
            return Err(parse_err(
                line_no,
                at,
                format!("`{keyword}` takes {arity} value(s), found {}", toks.len() - 1),
            ));
        }
        match keyword {
            "kappa" | "eta" => {
                let slot = if keyword == "kappa" { &mut kappa } else { &mut eta };
                if slot.is_some() {
                    return Err(parse_err(line_no, col, format!("`{keyword}` given twice")));
                }
                *slot = Some(number(line_no, toks[1], "a number")?);
            }
            _ => nodes.push(NodeSpec {
                id: number(line_no, toks[1], "a node id")?,
                x: number(line_no, toks[2], "a number")?,
                y: number(line_no, toks[3], "a number")?,
                transmit_power: number(line_no, toks[4], "a number")?,
                noise_power: number(line_no, toks[5], "a number")?,
            }),
        }
    }
    let end = last_line + 1;
    let kappa = kappa.ok_or_else(|| parse_err(end, 1, "missing `kappa`"))?;
    let eta = eta.ok_or_else(|| parse_err(end, 1, "missing `eta`"))?;
    if nodes.is_empty() {
        return Err(parse_err(end, 1, "no `node` lines"));
    }
    Ok(Network::new(nodes, kappa, eta)?)
}

pub fn load_network(path: &Path) -> Result<Network, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_network(&text)
}

/// Serializes `net` so that [`parse_network`] reproduces it exactly.
pub fn write_network(net: &Network) -> String {
    let mut out = String::new();
    writeln!(out, "kappa {}", net.kappa()).unwrap();
    writeln!(out, "eta {}", net.eta()).unwrap();
    for n in net.nodes() {
        writeln!(
            out,
            "node {} {} {} {} {}",
            n.id, n.x, n.y, n.transmit_power, n.noise_power
        )
        .unwrap();
    }
    out
}
