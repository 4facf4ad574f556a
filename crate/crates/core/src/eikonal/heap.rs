//! Indexed binary min-heap with decrease-key, keyed by `(value, sequence)`.
//!
//! The sequence number makes equal values pop in insertion order.

const ABSENT: u32 = u32::MAX;

#[derive(Clone, Debug, Default)]
pub struct IndexedHeap {
    items: Vec<(f64, u64, u32)>,
    pos: Vec<u32>,
    seq: u64,
}

impl IndexedHeap {
    pub fn new(capacity: usize) -> Self {
        IndexedHeap {
            items: Vec::new(),
            pos: vec![ABSENT; capacity],
            seq: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn contains(&self, id: usize) -> bool {
        self.pos[id] != ABSENT
    }

    pub fn peek(&self) -> Option<(usize, f64)> {
        self.items.first().map(|&(v, _, id)| (id as usize, v))
    }

    /// Inserts `id` or lowers its key. Raising a key is ignored.
    pub fn push_or_decrease(&mut self, id: usize, value: f64) {
        let p = self.pos[id];
        if p == ABSENT {
            self.seq += 1;
            self.items.push((value, self.seq, id as u32));
            let i = self.items.len() - 1;
            self.pos[id] = i as u32;
            self.sift_up(i);
        } else if value < self.items[p as usize].0 {
            self.seq += 1;
            self.items[p as usize].0 = value;
            self.items[p as usize].1 = self.seq;
            self.sift_up(p as usize);
        }
    }

    pub fn pop(&mut self) -> Option<(usize, f64)> {
        if self.items.is_empty() {
            return None;
        }
        let last = self.items.len() - 1;
        self.items.swap(0, last);
        let (v, _, id) = self.items.pop()?;
        self.pos[id as usize] = ABSENT;
        if !self.items.is_empty() {
            self.pos[self.items[0].2 as usize] = 0;
            self.sift_down(0);
        }
        Some((id as usize, v))
    }

    pub fn clear(&mut self) {
        for &(_, _, id) in &self.items {
            self.pos[id as usize] = ABSENT;
        }
        self.items.clear();
    }

    fn less(&self, a: usize, b: usize) -> bool {
        let (x, y) = (&self.items[a], &self.items[b]);
        x.0 < y.0 || (x.0 == y.0 && x.1 < y.1)
    }

    fn swap(&mut self, a: usize, b: usize) {
        self.items.swap(a, b);
        self.pos[self.items[a].2 as usize] = a as u32;
        self.pos[self.items[b].2 as usize] = b as u32;
    }

    fn sift_up(&mut self, mut i: usize) {
        while i > 0 {
            let parent = (i - 1) / 2;
            if self.less(i, parent) {
                self.swap(i, parent);
                i = parent;
            } else {
                break;
            }
        }
    }

    fn sift_down(&mut self, mut i: usize) {
        let n = self.items.len();
        loop {
            let (l, r) = (2 * i + 1, 2 * i + 2);
            let mut m = i;
            if l < n && self.less(l, m) {
                m = l;
            }
            if r < n && self.less(r, m) {
                m = r;
            }
            if m == i {
                break;
            }
            self.swap(i, m);
            i = m;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ties_pop_in_insertion_order() {
        let mut h = IndexedHeap::new(10);
        for id in [4, 2, 7] {
            h.push_or_decrease(id, 1.0);
        }
        assert_eq!(h.pop().map(|p| p.0), Some(4));
        assert_eq!(h.pop().map(|p| p.0), Some(2));
        assert_eq!(h.pop().map(|p| p.0), Some(7));
        assert!(h.pop().is_none());
    }

    proptest! {
        #[test]
        fn pops_sorted(ops in prop::collection::vec((0usize..50, 0.0f64..100.0), 1..200)) {
            let mut h = IndexedHeap::new(50);
            let mut best = vec![f64::INFINITY; 50];
            for (id, v) in ops {
                h.push_or_decrease(id, v);
                best[id] = best[id].min(v);
            }
            let mut last = f64::NEG_INFINITY;
            let mut seen = 0;
            while let Some((id, v)) = h.pop() {
                prop_assert!(v >= last);
                prop_assert_eq!(v, best[id]);
                last = v;
                seen += 1;
            }
            prop_assert_eq!(seen, best.iter().filter(|b| b.is_finite()).count());
        }
    }
}
