//! Line-oriented network file format.
//!
//! ```text
//! network <name>
//! node <id> states <s1> <s2> ...
//! parents <id> <p1> <p2> ...
//! cpt <id>
//! <v1> ... <vK>        # one line per parent configuration
//! evidence <id> <state>
//! ```
//!
//! `#` starts a comment. Parent lists may only reference nodes declared
//! earlier. CPT rows enumerate parent configurations with the last parent
//! varying fastest.

use std::fmt::Write;

use super::{BeliefNetwork, NetworkBuilder, NetworkError, NodeId};

fn syntax(line: usize, message: impl Into<String>) -> NetworkError {
    NetworkError::Syntax { line, message: message.into() }
}

struct PendingCpt {
    node: NodeId,
    rows_left: usize,
    values: Vec<f64>,
}

pub fn parse_network(text: &str) -> Result<BeliefNetwork, NetworkError> {
    let mut builder: Option<NetworkBuilder> = None;
    let mut pending: Option<PendingCpt> = None;
    let mut has_cpt: Vec<bool> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }

        if let Some(p) = pending.as_mut() {
            let b = builder.as_mut().unwrap();
            let k = b.state_count(p.node);
            if tokens.len() != k {
                return Err(syntax(
                    line_no,
                    format!("expected {k} probabilities in CPT row, found {}", tokens.len()),
                ));
            }
            for t in &tokens {
                let v: f64 =
                    t.parse().map_err(|_| syntax(line_no, format!("invalid number `{t}`")))?;
                p.values.push(v);
            }
            p.rows_left -= 1;
            if p.rows_left == 0 {
                let done = pending.take().unwrap();
                b.set_cpt(done.node, done.values)?;
            }
            continue;
        }

        let keyword = tokens[0];
        if keyword == "network" {
            if builder.is_some() {
                return Err(syntax(line_no, "duplicate `network` declaration"));
            }
            if tokens.len() != 2 {
                return Err(syntax(line_no, "expected `network <name>`"));
            }
            builder = Some(NetworkBuilder::new(tokens[1]));
            continue;
        }
        let b = builder
            .as_mut()
            .ok_or_else(|| syntax(line_no, "file must start with `network <name>`"))?;

        match keyword {
            "node" => {
                if tokens.len() < 3 || tokens[2] != "states" {
                    return Err(syntax(line_no, "expected `node <id> states <s1> <s2> ...`"));
                }
                let states = &tokens[3..];
                for (j, s) in states.iter().enumerate() {
                    if states[..j].contains(s) {
                        return Err(syntax(line_no, format!("duplicate state `{s}`")));
                    }
                }
                b.add_node(tokens[1], states)?;
                has_cpt.push(false);
            }
            "parents" => {
                if tokens.len() < 2 {
                    return Err(syntax(line_no, "expected `parents <id> [<p1> ...]`"));
                }
                let child = lookup(b, tokens[1])?;
                if has_cpt[child.0] {
                    return Err(syntax(line_no, "parents must be declared before the CPT"));
                }
                let parents =
                    tokens[2..].iter().map(|t| lookup(b, t)).collect::<Result<Vec<_>, _>>()?;
                b.set_parents(child, &parents)?;
            }
            "cpt" => {
                if tokens.len() != 2 {
                    return Err(syntax(line_no, "expected `cpt <id>`"));
                }
                let node = lookup(b, tokens[1])?;
                if has_cpt[node.0] {
                    return Err(syntax(line_no, format!("second CPT for `{}`", tokens[1])));
                }
                has_cpt[node.0] = true;
                pending = Some(PendingCpt {
                    node,
                    rows_left: b.row_count(node),
                    values: Vec::new(),
                });
            }
            "evidence" => {
                if tokens.len() != 3 {
                    return Err(syntax(line_no, "expected `evidence <id> <state>`"));
                }
                let node = lookup(b, tokens[1])?;
                let state = state_index(b, node, tokens[1], tokens[2])?;
                b.observe(node, state)?;
            }
            other => return Err(syntax(line_no, format!("unknown declaration `{other}`"))),
        }
    }

    if pending.is_some() {
        return Err(syntax(text.lines().count(), "file ends inside a CPT block"));
    }
    builder.ok_or_else(|| syntax(1, "empty network file"))?.build()
}

fn lookup(b: &NetworkBuilder, name: &str) -> Result<NodeId, NetworkError> {
    b.id(name).ok_or_else(|| NetworkError::UnknownNode(name.to_string()))
}

fn state_index(
    b: &NetworkBuilder,
    node: NodeId,
    node_name: &str,
    state: &str,
) -> Result<usize, NetworkError> {
    b.state_names(node).iter().position(|s| s == state).ok_or_else(|| {
        NetworkError::UnknownState { node: node_name.to_string(), state: state.to_string() }
    })
}

/// Plain decimal rendering that parses back to the identical binary64 value.
pub(crate) fn format_real(v: f64) -> String {
    // Shortest digits that round-trip, never in exponent form.
    format!("{v}")
}

pub fn serialize_network(net: &BeliefNetwork) -> String {
    let mut out = String::new();
    writeln!(out, "network {}", net.name()).unwrap();
    for node in net.nodes() {
        writeln!(out, "node {} states {}", node.name(), node.states().join(" ")).unwrap();
    }
    for node in net.nodes() {
        if !node.parents().is_empty() {
            let ps: Vec<&str> = node.parents().iter().map(|p| net.node(*p).name()).collect();
            writeln!(out, "parents {} {}", node.name(), ps.join(" ")).unwrap();
        }
    }
    for node in net.nodes() {
        writeln!(out, "cpt {}", node.name()).unwrap();
        for r in 0..node.row_count() {
            let row: Vec<String> = node.row(r).iter().map(|&v| format_real(v)).collect();
            writeln!(out, "{}", row.join(" ")).unwrap();
        }
    }
    for (n, s) in net.evidence().iter() {
        let node = net.node(n);
        writeln!(out, "evidence {} {}", node.name(), node.states()[s]).unwrap();
    }
    out
}
