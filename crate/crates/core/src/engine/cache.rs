//! Message cache for iterated propagation.
//!
//! Every stored value carries a version that only changes when the value
//! changes bit for bit, together with the versions of the inputs it was
//! computed from. A computation whose inputs all kept their versions can be
//! skipped, so unchanged messages stop re-propagation along their path.

use std::collections::HashMap;

use crate::interval::IntervalVector;
use crate::network::{Arc, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MessageKind {
    Pi,
    Lambda,
}

/// A directed message over an arc: π flows parent to child, λ child to
/// parent.
#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub kind: MessageKind,
    pub arc: Arc,
    pub value: IntervalVector,
    pub vacuous: bool,
}

impl Message {
    pub fn new(kind: MessageKind, arc: Arc, value: IntervalVector) -> Self {
        let vacuous = value.is_vacuous();
        Message { kind, arc, value, vacuous }
    }

    pub fn source(&self) -> NodeId {
        match self.kind {
            MessageKind::Pi => self.arc.parent,
            MessageKind::Lambda => self.arc.child,
        }
    }

    pub fn target(&self) -> NodeId {
        self.arc.other(self.source())
    }
}

/// Where a cached value lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub(crate) enum Slot {
    Msg { kind: MessageKind, arc: Arc },
    Bel(NodeId),
}

/// One input of a cached computation, as seen when it was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Dep {
    Vacuous(NodeId),
    Uniform(NodeId),
    Version(NodeId, u64),
    KnotArc(Arc),
    Cut(NodeId),
}

#[derive(Debug, Clone)]
struct Entry {
    value: IntervalVector,
    version: u64,
    deps: Vec<Dep>,
}

fn bit_equal(a: &IntervalVector, b: &IntervalVector) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b.iter())
            .all(|(x, y)| x.lo().to_bits() == y.lo().to_bits() && x.hi().to_bits() == y.hi().to_bits())
}

#[derive(Debug, Clone, Default)]
pub struct MessageCache {
    entries: HashMap<Slot, Entry>,
    next_version: u64,
}

impl MessageCache {
    pub fn new() -> Self {
        MessageCache::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    /// Stores `msg` under its arc and kind. Returns whether the stored
    /// value differs (bitwise) from what was there before.
    pub fn update(&mut self, msg: Message) -> bool {
        self.store(Slot::Msg { kind: msg.kind, arc: msg.arc }, msg.value, Vec::new()).1
    }

    pub fn get(&self, kind: MessageKind, arc: Arc) -> Option<&IntervalVector> {
        self.entries.get(&Slot::Msg { kind, arc }).map(|e| &e.value)
    }

    /// The cached value and version if it was computed from exactly `deps`.
    pub(crate) fn lookup(&self, slot: Slot, deps: &[Dep]) -> Option<(IntervalVector, u64)> {
        self.entries.get(&slot).filter(|e| e.deps == deps).map(|e| (e.value.clone(), e.version))
    }

    /// Stores a freshly computed value; returns its version and whether it
    /// changed. An unchanged value keeps its old version.
    pub(crate) fn store(&mut self, slot: Slot, value: IntervalVector, deps: Vec<Dep>) -> (u64, bool) {
        if let Some(e) = self.entries.get_mut(&slot) {
            e.deps = deps;
            if bit_equal(&e.value, &value) {
                return (e.version, false);
            }
            self.next_version += 1;
            e.value = value;
            e.version = self.next_version;
            return (e.version, true);
        }
        self.next_version += 1;
        self.entries.insert(slot, Entry { value, version: self.next_version, deps });
        (self.next_version, true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interval::Interval;

    fn msg(lo: f64) -> Message {
        let v = IntervalVector::new(vec![Interval::new(lo, 0.6).unwrap(), Interval::new(0.4, 1.0 - lo).unwrap()])
            .unwrap();
        Message::new(MessageKind::Pi, Arc::new(NodeId(0), NodeId(1)), v)
    }

    #[test]
    fn first_store_changes() {
        let mut c = MessageCache::new();
        assert!(c.update(msg(0.2)));
        assert_eq!(c.len(), 1);
    }

    #[test]
    fn identical_store_is_unchanged() {
        let mut c = MessageCache::new();
        c.update(msg(0.2));
        assert!(!c.update(msg(0.2)));
    }

    #[test]
    fn narrowed_store_changes() {
        let mut c = MessageCache::new();
        c.update(msg(0.2));
        assert!(c.update(msg(0.3)));
        assert_eq!(c.get(MessageKind::Pi, Arc::new(NodeId(0), NodeId(1))).unwrap()[0].lo(), 0.3);
    }

    #[test]
    fn versions_follow_values() {
        let mut c = MessageCache::new();
        let slot = Slot::Bel(NodeId(4));
        let v = msg(0.2).value;
        let (v1, _) = c.store(slot, v.clone(), vec![Dep::Vacuous(NodeId(1))]);
        let (v2, changed) = c.store(slot, v.clone(), vec![Dep::Version(NodeId(1), 7)]);
        assert_eq!(v1, v2);
        assert!(!changed);
        assert!(c.lookup(slot, &[Dep::Vacuous(NodeId(1))]).is_none());
        assert_eq!(c.lookup(slot, &[Dep::Version(NodeId(1), 7)]).unwrap().1, v1);
    }

    #[test]
    fn message_endpoints() {
        let m = Message::new(MessageKind::Lambda, Arc::new(NodeId(2), NodeId(5)), IntervalVector::vacuous(2).unwrap());
        assert!(m.vacuous);
        assert_eq!(m.source(), NodeId(5));
        assert_eq!(m.target(), NodeId(2));
    }
}
