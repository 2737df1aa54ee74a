//! Native text format: one line per node or arc, lexicographically sorted,
//! so fixtures diff cleanly and output is byte-deterministic.
//!
//! ```text
//! defuse-net 1 occurrence|pnet
//! place <name> [marked]
//! pplace <name> [marked]
//! trans <name>
//! arc <src> <dst>
//! ```

use crate::net::{Bag, Count, NodeId, NodeSet, OccurrenceNet, PNet};

use super::{IoError, NetDocument};

pub fn write_occurrence(net: &OccurrenceNet) -> String {
    let mut out = String::from("defuse-net 1 occurrence\n");
    for p in net.places() {
        out.push_str("place ");
        out.push_str(p.as_str());
        if net.initial().contains(p) {
            out.push_str(" marked");
        }
        out.push('\n');
    }
    for t in net.transitions() {
        out.push_str("trans ");
        out.push_str(t.as_str());
        out.push('\n');
    }
    for (src, dst) in net.arcs() {
        out.push_str(&format!("arc {src} {dst}\n"));
    }
    out
}

pub fn write_pnet(net: &PNet) -> String {
    let mut out = String::from("defuse-net 1 pnet\n");
    for p in net.regular() {
        out.push_str("place ");
        out.push_str(p.as_str());
        if net.initial().contains(p) {
            out.push_str(" marked");
        }
        out.push('\n');
    }
    for p in net.persistent() {
        out.push_str("pplace ");
        out.push_str(p.as_str());
        if net.initial().contains(p) {
            out.push_str(" marked");
        }
        out.push('\n');
    }
    for (t, _) in net.transitions() {
        out.push_str("trans ");
        out.push_str(t.as_str());
        out.push('\n');
    }
    for (t, tr) in net.transitions() {
        for p in &tr.preset {
            out.push_str(&format!("arc {p} {t}\n"));
        }
        for (p, _) in tr.postset.iter() {
            out.push_str(&format!("arc {t} {p}\n"));
        }
    }
    out
}

pub fn write(doc: &NetDocument) -> String {
    match doc {
        NetDocument::Occurrence(net) => write_occurrence(net),
        NetDocument::Persistent(net) => write_pnet(net),
    }
}

pub fn parse(text: &str) -> Result<NetDocument, IoError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| IoError::malformed("line 1", "empty document"))?;
    let mut head = header.split_whitespace();
    if head.next() != Some("defuse-net") || head.next() != Some("1") {
        return Err(IoError::malformed("line 1", "expected `defuse-net 1 <kind>`"));
    }
    let kind = head
        .next()
        .ok_or_else(|| IoError::malformed("line 1", "missing net kind"))?;

    struct Raw {
        regular: Vec<(NodeId, bool)>,
        persistent: Vec<(NodeId, bool)>,
        transitions: Vec<NodeId>,
        arcs: Vec<(NodeId, NodeId)>,
    }
    let mut raw = Raw {
        regular: Vec::new(),
        persistent: Vec::new(),
        transitions: Vec::new(),
        arcs: Vec::new(),
    };
    for (i, line) in lines {
        let context = format!("line {}", i + 1);
        let mut words = line.split_whitespace();
        let Some(tag) = words.next() else { continue };
        let rest: Vec<&str> = words.collect();
        match (tag, rest.as_slice()) {
            ("place", [name]) => raw.regular.push(((*name).into(), false)),
            ("place", [name, "marked"]) => raw.regular.push(((*name).into(), true)),
            ("pplace", [name]) => raw.persistent.push(((*name).into(), false)),
            ("pplace", [name, "marked"]) => raw.persistent.push(((*name).into(), true)),
            ("trans", [name]) => raw.transitions.push((*name).into()),
            ("arc", [src, dst]) => raw.arcs.push(((*src).into(), (*dst).into())),
            ("#", _) => {}
            _ => return Err(IoError::malformed(context, format!("bad line `{line}`"))),
        }
    }

    match kind {
        "occurrence" => {
            if !raw.persistent.is_empty() {
                return Err(IoError::malformed(
                    "document",
                    "occurrence nets cannot have persistent places",
                ));
            }
            let mut net = OccurrenceNet::new();
            let mut marked = NodeSet::new();
            for (p, m) in raw.regular {
                net.add_place(p.clone());
                if m {
                    marked.insert(p);
                }
            }
            let transitions: NodeSet = raw.transitions.iter().cloned().collect();
            for t in &raw.transitions {
                let pre: Vec<NodeId> = raw
                    .arcs
                    .iter()
                    .filter(|(_, dst)| dst == t)
                    .map(|(src, _)| src.clone())
                    .collect();
                let post: Vec<NodeId> = raw
                    .arcs
                    .iter()
                    .filter(|(src, _)| src == t)
                    .map(|(_, dst)| dst.clone())
                    .collect();
                net.add_transition(t.clone(), pre, post);
            }
            for (src, dst) in &raw.arcs {
                if !transitions.contains(src) && !transitions.contains(dst) {
                    return Err(IoError::malformed(
                        "document",
                        format!("arc {src} {dst} connects two places"),
                    ));
                }
            }
            net.mark(marked);
            Ok(NetDocument::Occurrence(net))
        }
        "pnet" => {
            let mut net = PNet::new();
            let mut initial = Bag::new();
            for (p, m) in raw.regular {
                net.add_regular(p.clone());
                if m {
                    initial.insert(p, Count::Finite(1));
                }
            }
            for (p, m) in raw.persistent {
                net.add_persistent(p.clone());
                if m {
                    initial.insert(p, Count::Omega);
                }
            }
            for t in &raw.transitions {
                let pre: Vec<NodeId> = raw
                    .arcs
                    .iter()
                    .filter(|(_, dst)| dst == t)
                    .map(|(src, _)| src.clone())
                    .collect();
                let post: Vec<NodeId> = raw
                    .arcs
                    .iter()
                    .filter(|(src, _)| src == t)
                    .map(|(_, dst)| dst.clone())
                    .collect();
                net.add_transition(t.clone(), pre, post);
            }
            net.set_initial(initial);
            Ok(NetDocument::Persistent(net))
        }
        other => Err(IoError::malformed(
            "line 1",
            format!("unknown net kind `{other}`"),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encode::Compilation;
    use crate::fixtures;

    #[test]
    fn occurrence_roundtrip() {
        for (_, net) in fixtures::all() {
            let text = write_occurrence(&net);
            match parse(&text).unwrap() {
                NetDocument::Occurrence(back) => assert_eq!(back, net),
                _ => panic!("wrong kind"),
            }
        }
    }

    #[test]
    fn pnet_roundtrip() {
        let c = Compilation::compile(&fixtures::or_causes()).unwrap();
        for net in [&c.flat, &c.pruned] {
            let text = write_pnet(net);
            match parse(&text).unwrap() {
                NetDocument::Persistent(back) => assert_eq!(&back, net),
                _ => panic!("wrong kind"),
            }
        }
    }

    #[test]
    fn write_is_stable_under_reparse() {
        let net = fixtures::or_causes();
        let once = write_occurrence(&net);
        let again = write(&parse(&once).unwrap());
        assert_eq!(once, again);
    }

    #[test]
    fn bad_documents_are_rejected() {
        assert!(parse("").is_err());
        assert!(parse("defuse-net 2 occurrence\n").is_err());
        assert!(parse("defuse-net 1 occurrence\nplace p\nnonsense q\n").is_err());
        assert!(parse("defuse-net 1 occurrence\nplace p\nplace q\narc p q\n").is_err());
    }
}
