//! Text edge-list format.
//!
//! ```text
//! bigraph v1 n=<n> m=<m> mu=<mu> alpha=<alpha|inf> seed=<seed>
//! g <j> tau0=<initial popularity>      (one per group)
//! e <user> <group>                     (one per edge)
//! ```
//!
//! Indices are 1-based. Blank lines and lines starting with `#` are skipped.

use std::io::{BufRead, Write};

use super::{BigraphParams, BipartiteGraph, GraphError};

pub fn format_alpha(alpha: f64) -> String {
    if alpha.is_infinite() {
        "inf".to_string()
    } else {
        format!("{alpha}")
    }
}

pub fn parse_alpha(s: &str) -> Option<f64> {
    match s {
        "inf" | "infinity" | "INF" => Some(f64::INFINITY),
        _ => s.parse::<f64>().ok().filter(|a| a.is_finite()),
    }
}

pub fn save_edge_list<W: Write>(graph: &BipartiteGraph, sink: &mut W) -> std::io::Result<()> {
    let p = graph.params();
    writeln!(
        sink,
        "bigraph v1 n={} m={} mu={} alpha={} seed={}",
        p.n,
        p.m,
        p.mu,
        format_alpha(p.alpha),
        p.seed
    )?;
    for (j, tau) in graph.initial_popularity().iter().enumerate() {
        writeln!(sink, "g {} tau0={}", j + 1, tau)?;
    }
    for j in 0..graph.n() {
        for &u in graph.members(j) {
            writeln!(sink, "e {} {}", u + 1, j + 1)?;
        }
    }
    Ok(())
}

fn parse_err(line: usize, msg: impl Into<String>) -> GraphError {
    GraphError::Parse {
        line,
        msg: msg.into(),
    }
}

fn keyed<'a>(token: Option<&'a str>, key: &str, line: usize) -> Result<&'a str, GraphError> {
    let token = token.ok_or_else(|| parse_err(line, format!("missing `{key}=`")))?;
    token
        .strip_prefix(key)
        .and_then(|rest| rest.strip_prefix('='))
        .ok_or_else(|| parse_err(line, format!("expected `{key}=...`, found `{token}`")))
}

fn number<T: std::str::FromStr>(s: &str, what: &str, line: usize) -> Result<T, GraphError> {
    s.parse()
        .map_err(|_| parse_err(line, format!("bad {what} `{s}`")))
}

fn parse_header(text: &str, line: usize) -> Result<BigraphParams, GraphError> {
    let mut tokens = text.split_whitespace();
    if tokens.next() != Some("bigraph") || tokens.next() != Some("v1") {
        return Err(parse_err(line, "expected header `bigraph v1 ...`"));
    }
    let n = number(keyed(tokens.next(), "n", line)?, "n", line)?;
    let m = number(keyed(tokens.next(), "m", line)?, "m", line)?;
    let mu = number(keyed(tokens.next(), "mu", line)?, "mu", line)?;
    let alpha_text = keyed(tokens.next(), "alpha", line)?;
    let alpha =
        parse_alpha(alpha_text).ok_or_else(|| parse_err(line, format!("bad alpha `{alpha_text}`")))?;
    let seed = number(keyed(tokens.next(), "seed", line)?, "seed", line)?;
    if let Some(extra) = tokens.next() {
        return Err(parse_err(line, format!("unexpected token `{extra}`")));
    }
    if n == 0 || m == 0 {
        return Err(parse_err(line, "n and m must be positive"));
    }
    Ok(BigraphParams {
        n,
        m,
        mu,
        alpha,
        seed,
    })
}

/// Reads a graph written by [`save_edge_list`].
///
/// The header's `mu` is taken as recorded; the edge count is not required to
/// equal `mu * n`, so hand-written fixtures load as-is.
pub fn load_edge_list<R: BufRead>(source: R) -> Result<BipartiteGraph, GraphError> {
    let mut params: Option<BigraphParams> = None;
    let mut tau: Vec<Option<u64>> = Vec::new();
    let mut members: Vec<Vec<u32>> = Vec::new();

    for (idx, text) in source.lines().enumerate() {
        let line = idx + 1;
        let text = text?;
        let trimmed = text.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some(p) = params else {
            let p = parse_header(trimmed, line)?;
            tau = vec![None; p.n];
            members = vec![Vec::new(); p.n];
            params = Some(p);
            continue;
        };
        let mut tokens = trimmed.split_whitespace();
        match tokens.next() {
            Some("g") => {
                let j: usize = number(tokens.next().unwrap_or(""), "group index", line)?;
                let t: u64 = number(keyed(tokens.next(), "tau0", line)?, "tau0", line)?;
                if j == 0 || j > p.n {
                    return Err(GraphError::Consistency(format!(
                        "line {line}: group {j} outside 1..={}",
                        p.n
                    )));
                }
                if tau[j - 1].replace(t).is_some() {
                    return Err(GraphError::Consistency(format!(
                        "line {line}: group {j} declared twice"
                    )));
                }
            }
            Some("e") => {
                let u: usize = number(tokens.next().unwrap_or(""), "user index", line)?;
                let j: usize = number(tokens.next().unwrap_or(""), "group index", line)?;
                if u == 0 || u > p.m {
                    return Err(GraphError::Consistency(format!(
                        "line {line}: user {u} outside 1..={}",
                        p.m
                    )));
                }
                if j == 0 || j > p.n {
                    return Err(GraphError::Consistency(format!(
                        "line {line}: group {j} outside 1..={}",
                        p.n
                    )));
                }
                members[j - 1].push((u - 1) as u32);
            }
            Some(other) => return Err(parse_err(line, format!("unknown record `{other}`"))),
            None => unreachable!(),
        }
        if let Some(extra) = tokens.next() {
            return Err(parse_err(line, format!("unexpected token `{extra}`")));
        }
    }

    let params = params.ok_or_else(|| parse_err(1, "missing header"))?;
    let missing = tau.iter().filter(|t| t.is_none()).count();
    if missing > 0 {
        return Err(GraphError::Consistency(format!(
            "header declares n = {} groups but {} have no `g` record",
            params.n, missing
        )));
    }
    let tau = tau.into_iter().map(|t| t.unwrap_or(0)).collect();
    BipartiteGraph::from_parts(params, members, tau)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str) -> Result<BipartiteGraph, GraphError> {
        load_edge_list(text.as_bytes())
    }

    #[test]
    fn hand_written_three_edges() {
        let g = load(
            "bigraph v1 n=2 m=3 mu=1 alpha=3 seed=0\n\
             g 1 tau0=1\n\
             g 2 tau0=2\n\
             e 1 1\n\
             e 3 1\n\
             e 2 2\n",
        )
        .unwrap();
        assert_eq!(g.degrees(), vec![2, 1]);
        assert_eq!(g.members(0), &[0, 2]);
        assert_eq!(g.initial_popularity(), &[1, 2]);
    }

    #[test]
    fn empty_edge_set() {
        let g = load("bigraph v1 n=3 m=4 mu=0 alpha=inf seed=9\ng 1 tau0=1\ng 2 tau0=1\ng 3 tau0=1\n")
            .unwrap();
        assert_eq!(g.degrees(), vec![0, 0, 0]);
        assert!(g.params().alpha.is_infinite());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = load("bigraph v1 n=1 m=2 mu=1 alpha=3 seed=0\ng 1 tau0=1\ne 1 x\n").unwrap_err();
        assert!(matches!(err, GraphError::Parse { line: 3, .. }), "{err}");
        let err = load("bigraph v2 n=1\n").unwrap_err();
        assert!(matches!(err, GraphError::Parse { line: 1, .. }));
        let err = load("bigraph v1 n=1 m=2 mu=1 alpha=3 seed=0\ng 1 tau0=1\nz 1\n").unwrap_err();
        assert!(matches!(err, GraphError::Parse { line: 3, .. }));
    }

    #[test]
    fn consistency_errors() {
        // Missing group record.
        let err = load("bigraph v1 n=2 m=2 mu=1 alpha=3 seed=0\ng 1 tau0=1\n").unwrap_err();
        assert!(matches!(err, GraphError::Consistency(_)));
        // Edge to a group beyond n.
        let err = load("bigraph v1 n=1 m=2 mu=1 alpha=3 seed=0\ng 1 tau0=1\ne 1 2\n").unwrap_err();
        assert!(matches!(err, GraphError::Consistency(_)));
        // User beyond m.
        let err = load("bigraph v1 n=1 m=2 mu=1 alpha=3 seed=0\ng 1 tau0=1\ne 3 1\n").unwrap_err();
        assert!(matches!(err, GraphError::Consistency(_)));
        // Duplicate edge.
        let err =
            load("bigraph v1 n=1 m=2 mu=1 alpha=3 seed=0\ng 1 tau0=1\ne 1 1\ne 1 1\n").unwrap_err();
        assert!(matches!(err, GraphError::Consistency(_)));
    }

    #[test]
    fn alpha_text_round_trips() {
        for a in [3.0, 2.5, 10.0, 2.000_000_000_1, f64::INFINITY] {
            assert_eq!(parse_alpha(&format_alpha(a)).unwrap().to_bits(), a.to_bits());
        }
    }
}
