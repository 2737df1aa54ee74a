//! PNML core subset: place, transition, arc, initialMarking.
//!
//! Persistent places carry a tool-specific annotation and are wired with
//! self-loops so that standard tools simulate the net faithfully; guard
//! places (marked, one per persistent transition) materialize the
//! fires-at-most-once rule. Parsing strips both conventions, so writing
//! and re-parsing is the identity. Element ids are sanitized sequential
//! names; the real node names live in the name labels.

use std::collections::BTreeMap;

use crate::net::{Bag, Count, NodeId, NodeSet, OccurrenceNet, PNet};

use super::{IoError, NetDocument};

pub const TOOL_NAME: &str = "defuse";
pub const TOOL_VERSION: &str = "1";
const GUARD_PREFIX: &str = "guard:";

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Writer {
    out: String,
    ids: BTreeMap<NodeId, String>,
}

impl Writer {
    fn new() -> Writer {
        Writer {
            out: String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"),
            ids: BTreeMap::new(),
        }
    }

    fn id_of(&mut self, node: &NodeId) -> String {
        let next = format!("n{}", self.ids.len());
        self.ids.entry(node.clone()).or_insert(next).clone()
    }

    fn place(&mut self, name: &NodeId, marking: u64, annotation: Option<&str>) {
        let id = self.id_of(name);
        self.out.push_str(&format!("    <place id=\"{id}\">\n"));
        self.out.push_str(&format!(
            "      <name><text>{}</text></name>\n",
            escape(name.as_str())
        ));
        if marking > 0 {
            self.out.push_str(&format!(
                "      <initialMarking><text>{marking}</text></initialMarking>\n"
            ));
        }
        if let Some(kind) = annotation {
            self.out.push_str(&format!(
                "      <toolspecific tool=\"{TOOL_NAME}\" version=\"{TOOL_VERSION}\"><{kind}/></toolspecific>\n"
            ));
        }
        self.out.push_str("    </place>\n");
    }

    fn transition(&mut self, name: &NodeId) {
        let id = self.id_of(name);
        self.out.push_str(&format!("    <transition id=\"{id}\">\n"));
        self.out.push_str(&format!(
            "      <name><text>{}</text></name>\n",
            escape(name.as_str())
        ));
        self.out.push_str("    </transition>\n");
    }

    fn arcs(&mut self, arcs: &[(NodeId, NodeId)]) {
        for (i, (src, dst)) in arcs.iter().enumerate() {
            let s = self.id_of(src);
            let d = self.id_of(dst);
            self.out.push_str(&format!(
                "    <arc id=\"a{i}\" source=\"{s}\" target=\"{d}\"/>\n"
            ));
        }
    }
}

fn open(kind: &str) -> String {
    format!(
        "<pnml xmlns=\"http://www.pnml.org/version-2009/grammar/pnml\">\n  <net id=\"{kind}\" type=\"http://www.pnml.org/version-2009/grammar/ptnet\">\n  <page id=\"page0\">\n"
    )
}

const CLOSE: &str = "  </page>\n  </net>\n</pnml>\n";

pub fn write_occurrence(net: &OccurrenceNet) -> String {
    let mut w = Writer::new();
    w.out.push_str(&open("occurrence"));
    for p in net.places() {
        let marking = u64::from(net.initial().contains(p));
        w.place(p, marking, None);
    }
    for t in net.transitions() {
        w.transition(t);
    }
    let arcs = net.arcs();
    w.arcs(&arcs);
    w.out.push_str(CLOSE);
    w.out
}

pub fn write_pnet(net: &PNet) -> String {
    let mut w = Writer::new();
    w.out.push_str(&open("pnet"));
    for p in net.regular() {
        let marking = match net.initial().count(p) {
            Count::Finite(n) => n,
            Count::Omega => unreachable!("regular places carry finite counts"),
        };
        w.place(p, marking, None);
    }
    for p in net.persistent() {
        let marking = u64::from(net.initial().contains(p));
        w.place(p, marking, Some("persistent"));
    }
    // Guard places: one marked regular place per persistent transition.
    let guards: Vec<NodeId> = net
        .transitions()
        .filter(|(t, _)| net.is_persistent_transition(t))
        .map(|(t, _)| NodeId::new(format!("{GUARD_PREFIX}{t}")))
        .collect();
    for g in &guards {
        w.place(g, 1, Some("guard"));
    }
    for (t, _) in net.transitions() {
        w.transition(t);
    }
    let mut arcs: Vec<(NodeId, NodeId)> = Vec::new();
    for (t, tr) in net.transitions() {
        for p in &tr.preset {
            arcs.push((p.clone(), t.clone()));
            // Self-loop: tokens in persistent places are read, not spent.
            if net.is_persistent_place(p) {
                arcs.push((t.clone(), p.clone()));
            }
        }
        for (p, _) in tr.postset.iter() {
            arcs.push((t.clone(), p.clone()));
        }
        if net.is_persistent_transition(t) {
            arcs.push((NodeId::new(format!("{GUARD_PREFIX}{t}")), t.clone()));
        }
    }
    arcs.sort();
    arcs.dedup();
    w.arcs(&arcs);
    w.out.push_str(CLOSE);
    w.out
}

pub fn write(doc: &NetDocument) -> String {
    match doc {
        NetDocument::Occurrence(net) => write_occurrence(net),
        NetDocument::Persistent(net) => write_pnet(net),
    }
}

struct RawPlace {
    name: NodeId,
    marking: u64,
    persistent: bool,
    guard: bool,
}

/// Parses the PNML core subset. Nets with persistent-marked places come
/// back as p-nets with the self-loop and guard conventions undone;
/// everything else is an occurrence net.
pub fn parse(text: &str) -> Result<NetDocument, IoError> {
    let doc = roxmltree::Document::parse(text).map_err(|e| IoError::Xml(e.to_string()))?;
    let mut places: BTreeMap<String, RawPlace> = BTreeMap::new();
    let mut transitions: BTreeMap<String, NodeId> = BTreeMap::new();
    let mut arcs: Vec<(String, String)> = Vec::new();

    let name_of = |node: roxmltree::Node| -> Option<String> {
        node.children()
            .find(|c| c.has_tag_name("name"))
            .and_then(|n| n.children().find(|c| c.has_tag_name("text")))
            .and_then(|t| t.text())
            .map(|s| s.trim().to_string())
    };

    for node in doc.descendants() {
        if node.has_tag_name("place") {
            let id = node
                .attribute("id")
                .ok_or_else(|| IoError::malformed("place", "missing id"))?
                .to_string();
            let name = name_of(node).unwrap_or_else(|| id.clone());
            let marking = node
                .children()
                .find(|c| c.has_tag_name("initialMarking"))
                .and_then(|n| n.children().find(|c| c.has_tag_name("text")))
                .and_then(|t| t.text())
                .map(|t| {
                    t.trim().parse::<u64>().map_err(|_| {
                        IoError::malformed(format!("place {id}"), "bad initialMarking")
                    })
                })
                .transpose()?
                .unwrap_or(0);
            let tool = node.children().find(|c| {
                c.has_tag_name("toolspecific") && c.attribute("tool") == Some(TOOL_NAME)
            });
            let has = |tag: &str| {
                tool.map(|n| n.children().any(|c| c.has_tag_name(tag)))
                    .unwrap_or(false)
            };
            places.insert(
                id,
                RawPlace {
                    name: NodeId::new(name),
                    marking,
                    persistent: has("persistent"),
                    guard: has("guard"),
                },
            );
        } else if node.has_tag_name("transition") {
            let id = node
                .attribute("id")
                .ok_or_else(|| IoError::malformed("transition", "missing id"))?
                .to_string();
            let name = name_of(node).unwrap_or_else(|| id.clone());
            transitions.insert(id, NodeId::new(name));
        } else if node.has_tag_name("arc") {
            let id = node.attribute("id").unwrap_or("?");
            let source = node
                .attribute("source")
                .ok_or_else(|| IoError::malformed(format!("arc {id}"), "missing source"))?;
            let target = node
                .attribute("target")
                .ok_or_else(|| IoError::malformed(format!("arc {id}"), "missing target"))?;
            arcs.push((source.to_string(), target.to_string()));
        }
    }
    if places.is_empty() && transitions.is_empty() {
        return Err(IoError::malformed("document", "no net content found"));
    }
    for (src, dst) in &arcs {
        let known = |x: &String| places.contains_key(x) || transitions.contains_key(x);
        if !known(src) || !known(dst) {
            return Err(IoError::malformed(
                "arc",
                format!("arc references unknown element {src} -> {dst}"),
            ));
        }
        if transitions.contains_key(src) == transitions.contains_key(dst) {
            return Err(IoError::malformed(
                "arc",
                format!("arc must connect a place and a transition: {src} -> {dst}"),
            ));
        }
    }

    let any_persistent = places.values().any(|p| p.persistent);
    if !any_persistent {
        let mut net = OccurrenceNet::new();
        let mut marked = NodeSet::new();
        for place in places.values() {
            net.add_place(place.name.clone());
            if place.marking > 0 {
                marked.insert(place.name.clone());
            }
        }
        for (tid, tname) in &transitions {
            let pre: Vec<NodeId> = arcs
                .iter()
                .filter(|(_, dst)| dst == tid)
                .filter_map(|(src, _)| places.get(src).map(|p| p.name.clone()))
                .collect();
            let post: Vec<NodeId> = arcs
                .iter()
                .filter(|(src, _)| src == tid)
                .filter_map(|(_, dst)| places.get(dst).map(|p| p.name.clone()))
                .collect();
            net.add_transition(tname.clone(), pre, post);
        }
        net.mark(marked);
        return Ok(NetDocument::Occurrence(net));
    }

    let mut net = PNet::new();
    let mut initial = Bag::new();
    for place in places.values().filter(|p| !p.guard) {
        if place.persistent {
            net.add_persistent(place.name.clone());
            if place.marking > 0 {
                initial.insert(place.name.clone(), Count::Omega);
            }
        } else {
            net.add_regular(place.name.clone());
            if place.marking > 0 {
                initial.insert(place.name.clone(), Count::Finite(place.marking));
            }
        }
    }
    for (tid, tname) in &transitions {
        let mut pre = NodeSet::new();
        let mut post_candidates = NodeSet::new();
        for (src, dst) in &arcs {
            if dst == tid {
                if let Some(p) = places.get(src) {
                    if !p.guard {
                        pre.insert(p.name.clone());
                    }
                }
            }
            if src == tid {
                if let Some(p) = places.get(dst) {
                    post_candidates.insert(p.name.clone());
                }
            }
        }
        // A back-arc to a consumed persistent place is the self-loop
        // convention, not production.
        let post: Vec<NodeId> = post_candidates
            .into_iter()
            .filter(|p| !(net.is_persistent_place(p) && pre.contains(p)))
            .collect();
        net.add_transition(tname.clone(), pre, post);
    }
    net.set_initial(initial);
    Ok(NetDocument::Persistent(net))
}
