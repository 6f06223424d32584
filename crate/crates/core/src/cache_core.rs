//! Single-space eviction machinery.
//!
//! A [`CacheSpace`] never evicts on its own: policies look at the would-be
//! victim with [`CacheSpace::peek_victim`], decide, and then call
//! [`CacheSpace::remove`] / [`CacheSpace::insert`] explicitly. Inserting a
//! duplicate key, inserting into a full space, or touching/removing an
//! absent key are policy bugs and panic.

use crate::{FxMap, ItemKey};

const NIL: usize = usize::MAX;

/// Internal replacement policy of a space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpaceKind {
    Lru,
    /// Segmented LRU; the value is the protected share of the capacity.
    Slru {
        protected_fraction: f64,
    },
}

impl SpaceKind {
    pub const DEFAULT_PROTECTED_FRACTION: f64 = 0.8;

    pub fn slru() -> Self {
        SpaceKind::Slru {
            protected_fraction: Self::DEFAULT_PROTECTED_FRACTION,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Segment {
    /// The only segment of an LRU space, or SLRU's probation segment.
    Probation,
    Protected,
}

#[derive(Debug, Clone)]
struct Node {
    key: ItemKey,
    prev: usize,
    next: usize,
    segment: Segment,
}

/// Head is the LRU end, tail the MRU end.
#[derive(Debug, Clone, Copy)]
struct List {
    head: usize,
    tail: usize,
    len: usize,
}

impl List {
    const EMPTY: List = List {
        head: NIL,
        tail: NIL,
        len: 0,
    };
}

/// One managed region of a cache level.
#[derive(Debug, Clone)]
pub struct CacheSpace {
    kind: SpaceKind,
    capacity: usize,
    protected_cap: usize,
    nodes: Vec<Node>,
    free: Vec<usize>,
    index: FxMap<ItemKey, usize>,
    probation: List,
    protected: List,
    inserts: u64,
}

impl CacheSpace {
    pub fn new(kind: SpaceKind, capacity: usize) -> Self {
        let protected_cap = match kind {
            SpaceKind::Lru => 0,
            SpaceKind::Slru { protected_fraction } => {
                assert!(
                    (0.0..=1.0).contains(&protected_fraction),
                    "protected fraction {protected_fraction} outside [0, 1]"
                );
                (protected_fraction * capacity as f64).ceil() as usize
            }
        };
        CacheSpace {
            kind,
            capacity,
            protected_cap,
            nodes: Vec::with_capacity(capacity.min(1 << 20)),
            free: Vec::new(),
            index: FxMap::default(),
            probation: List::EMPTY,
            protected: List::EMPTY,
            inserts: 0,
        }
    }

    pub fn lru(capacity: usize) -> Self {
        Self::new(SpaceKind::Lru, capacity)
    }

    pub fn slru(capacity: usize) -> Self {
        Self::new(SpaceKind::slru(), capacity)
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.len() >= self.capacity
    }

    pub fn contains(&self, key: ItemKey) -> bool {
        self.index.contains_key(&key)
    }

    /// Total number of successful [`insert`](Self::insert) calls so far.
    pub fn inserts(&self) -> u64 {
        self.inserts
    }

    pub fn protected_len(&self) -> usize {
        self.protected.len
    }

    pub fn protected_capacity(&self) -> usize {
        self.protected_cap
    }

    pub fn segment_of(&self, key: ItemKey) -> Option<Segment> {
        self.index.get(&key).map(|&i| self.nodes[i].segment)
    }

    /// Adds `key` at the MRU end (of probation, for SLRU).
    pub fn insert(&mut self, key: ItemKey) {
        assert!(
            self.len() < self.capacity,
            "insert of {key:?} into a full space (capacity {})",
            self.capacity
        );
        let node = Node {
            key,
            prev: NIL,
            next: NIL,
            segment: Segment::Probation,
        };
        let idx = match self.free.pop() {
            Some(i) => {
                self.nodes[i] = node;
                i
            }
            None => {
                self.nodes.push(node);
                self.nodes.len() - 1
            }
        };
        let prev = self.index.insert(key, idx);
        assert!(prev.is_none(), "duplicate insert of {key:?}");
        self.push_back(idx, Segment::Probation);
        self.inserts += 1;
    }

    /// Registers a hit on `key` within this space.
    pub fn touch(&mut self, key: ItemKey) {
        let idx = self.slot(key);
        match self.kind {
            SpaceKind::Lru => {
                self.unlink(idx);
                self.push_back(idx, Segment::Probation);
            }
            SpaceKind::Slru { .. } => {
                self.unlink(idx);
                self.push_back(idx, Segment::Protected);
                if self.protected.len > self.protected_cap {
                    let demoted = self.protected.head;
                    self.unlink(demoted);
                    self.push_back(demoted, Segment::Probation);
                }
            }
        }
    }

    /// The key [`remove_victim`](Self::remove_victim) would evict.
    pub fn peek_victim(&self) -> Option<ItemKey> {
        let idx = if self.probation.head != NIL {
            self.probation.head
        } else {
            self.protected.head
        };
        (idx != NIL).then(|| self.nodes[idx].key)
    }

    pub fn remove(&mut self, key: ItemKey) {
        let idx = self
            .index
            .remove(&key)
            .unwrap_or_else(|| panic!("remove of absent key {key:?}"));
        self.unlink(idx);
        self.free.push(idx);
    }

    pub fn remove_victim(&mut self) -> Option<ItemKey> {
        let victim = self.peek_victim()?;
        self.remove(victim);
        Some(victim)
    }

    /// Keys from eviction end to MRU end (probation first, then protected).
    pub fn keys(&self) -> impl Iterator<Item = ItemKey> + '_ {
        let walk = move |mut i: usize| {
            std::iter::from_fn(move || {
                if i == NIL {
                    return None;
                }
                let n = &self.nodes[i];
                i = n.next;
                Some(n.key)
            })
        };
        walk(self.probation.head).chain(walk(self.protected.head))
    }

    fn slot(&self, key: ItemKey) -> usize {
        *self
            .index
            .get(&key)
            .unwrap_or_else(|| panic!("touch of absent key {key:?}"))
    }

    fn list_mut(&mut self, segment: Segment) -> &mut List {
        match segment {
            Segment::Probation => &mut self.probation,
            Segment::Protected => &mut self.protected,
        }
    }

    fn push_back(&mut self, idx: usize, segment: Segment) {
        let tail = self.list_mut(segment).tail;
        {
            let n = &mut self.nodes[idx];
            n.segment = segment;
            n.prev = tail;
            n.next = NIL;
        }
        if tail != NIL {
            self.nodes[tail].next = idx;
        }
        let list = self.list_mut(segment);
        if list.head == NIL {
            list.head = idx;
        }
        list.tail = idx;
        list.len += 1;
    }

    fn unlink(&mut self, idx: usize) {
        let Node {
            prev,
            next,
            segment,
            ..
        } = self.nodes[idx];
        if prev != NIL {
            self.nodes[prev].next = next;
        }
        if next != NIL {
            self.nodes[next].prev = prev;
        }
        let list = self.list_mut(segment);
        if list.head == idx {
            list.head = next;
        }
        if list.tail == idx {
            list.tail = prev;
        }
        list.len -= 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn k(v: u64) -> ItemKey {
        ItemKey(v)
    }

    fn order(s: &CacheSpace) -> Vec<u64> {
        s.keys().map(|k| k.0).collect()
    }

    #[test]
    fn lru_insert_order() {
        let mut s = CacheSpace::lru(2);
        s.insert(k(1));
        assert_eq!(order(&s), [1]);
        s.insert(k(2));
        assert_eq!(order(&s), [1, 2]);
        assert!(s.is_full());
    }

    #[test]
    fn lru_touch_moves_to_mru() {
        let mut s = CacheSpace::lru(3);
        for v in 1..=3 {
            s.insert(k(v));
        }
        s.touch(k(1));
        assert_eq!(order(&s), [2, 3, 1]);
        assert_eq!(s.peek_victim(), Some(k(2)));
    }

    #[test]
    fn lru_victim_and_remove() {
        let mut s = CacheSpace::lru(3);
        assert_eq!(s.peek_victim(), None);
        for v in 1..=3 {
            s.insert(k(v));
        }
        assert_eq!(s.peek_victim(), Some(k(1)));
        s.remove(k(1));
        assert_eq!(order(&s), [2, 3]);
        s.remove(k(2));
        s.remove(k(3));
        assert!(s.is_empty());
        assert_eq!(s.peek_victim(), None);
    }

    #[test]
    fn slru_new_entries_start_in_probation() {
        let mut s = CacheSpace::slru(10);
        s.insert(k(1));
        assert_eq!(s.segment_of(k(1)), Some(Segment::Probation));
        s.touch(k(1));
        assert_eq!(s.segment_of(k(1)), Some(Segment::Protected));
    }

    #[test]
    fn slru_victim_prefers_probation() {
        let mut s = CacheSpace::slru(10);
        for v in [10, 11, 12] {
            s.insert(k(v));
        }
        s.touch(k(11));
        s.touch(k(12));
        assert_eq!(s.peek_victim(), Some(k(10)));
        s.remove(k(10));
        // probation empty: fall back to protected LRU end
        assert_eq!(s.peek_victim(), Some(k(11)));
    }

    #[test]
    fn slru_protected_overflow_demotes() {
        // capacity 5 -> protected quota ceil(4.0) = 4
        let mut s = CacheSpace::slru(5);
        assert_eq!(s.protected_capacity(), 4);
        for v in 1..=5 {
            s.insert(k(v));
        }
        for v in 1..=4 {
            s.touch(k(v));
        }
        assert_eq!(s.protected_len(), 4);
        s.touch(k(5));
        assert_eq!(s.len(), 5);
        assert_eq!(s.protected_len(), 4);
        assert_eq!(s.segment_of(k(5)), Some(Segment::Protected));
        assert_eq!(s.segment_of(k(1)), Some(Segment::Probation));
        assert_eq!(s.peek_victim(), Some(k(1)));
    }

    #[test]
    fn slru_remove_from_protected() {
        let mut s = CacheSpace::slru(10);
        s.insert(k(1));
        s.insert(k(2));
        s.touch(k(1));
        s.remove(k(1));
        assert_eq!(s.protected_len(), 0);
        assert_eq!(order(&s), [2]);
    }

    #[test]
    #[should_panic(expected = "duplicate")]
    fn duplicate_insert_panics() {
        let mut s = CacheSpace::lru(2);
        s.insert(k(1));
        s.insert(k(1));
    }

    #[test]
    #[should_panic(expected = "full")]
    fn over_capacity_insert_panics() {
        let mut s = CacheSpace::lru(1);
        s.insert(k(1));
        s.insert(k(2));
    }

    #[test]
    #[should_panic(expected = "absent")]
    fn touch_absent_panics() {
        CacheSpace::slru(2).touch(k(1));
    }

    #[test]
    #[should_panic(expected = "absent")]
    fn remove_absent_panics() {
        CacheSpace::lru(2).remove(k(1));
    }

    #[derive(Debug, Clone)]
    enum Op {
        Access(u8),
        Remove(u8),
    }

    fn op() -> impl Strategy<Value = Op> {
        prop_oneof![
            4 => (0u8..24).prop_map(Op::Access),
            1 => (0u8..24).prop_map(Op::Remove),
        ]
    }

    proptest! {
        #[test]
        fn space_invariants(slru in any::<bool>(), cap in 1usize..12, ops in prop::collection::vec(op(), 0..300)) {
            let mut s = if slru { CacheSpace::slru(cap) } else { CacheSpace::lru(cap) };
            let mut inserts = 0u64;
            for o in ops {
                let before = s.len();
                match o {
                    Op::Access(v) if s.contains(k(v.into())) => {
                        s.touch(k(v.into()));
                        prop_assert_eq!(s.len(), before);
                    }
                    Op::Access(v) => {
                        if s.is_full() {
                            let peeked = s.peek_victim().unwrap();
                            let mut twin = s.clone();
                            s.remove(peeked);
                            prop_assert_eq!(twin.remove_victim(), Some(peeked));
                            prop_assert_eq!(order(&twin), order(&s));
                        }
                        let mid = s.len();
                        s.insert(k(v.into()));
                        inserts += 1;
                        prop_assert_eq!(s.len(), mid + 1);
                    }
                    Op::Remove(v) if s.contains(k(v.into())) => {
                        s.remove(k(v.into()));
                        prop_assert_eq!(s.len(), before - 1);
                    }
                    Op::Remove(_) => {}
                }
                prop_assert!(s.len() <= cap);
                prop_assert!(s.protected_len() <= s.protected_capacity());
                let mut keys: Vec<_> = s.keys().collect();
                prop_assert_eq!(keys.len(), s.len());
                keys.sort();
                keys.dedup();
                prop_assert_eq!(keys.len(), s.len());
            }
            prop_assert_eq!(s.inserts(), inserts);
        }
    }
}
