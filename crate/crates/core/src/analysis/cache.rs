//! Fully associative LRU cache simulation over element addresses.

use crate::analysis::trace::{AccessKind, AccessTrace, TraceSink};
use crate::error::{MmError, Result};

const NIL: u32 = u32::MAX;

/// One fully associative LRU cache of `M / B` lines.
#[derive(Debug, Clone)]
pub struct LruCache {
    line_shift: u32,
    capacity: usize,
    /// Line number to slot, or `NIL`.
    slot_of: Vec<u32>,
    line_in: Vec<u64>,
    prev: Vec<u32>,
    next: Vec<u32>,
    head: u32,
    tail: u32,
    misses: u64,
    accesses: u64,
}

impl LruCache {
    /// `m` and `line` are in elements and must be powers of two with
    /// `m >= line^2`.
    pub fn new(m: usize, line: usize) -> Result<Self> {
        if !m.is_power_of_two() || !line.is_power_of_two() || m < line * line {
            return Err(MmError::InvalidConfig(format!("cache M={m}, B={line} must be powers of two with M >= B^2")));
        }
        Ok(LruCache {
            line_shift: line.trailing_zeros(),
            capacity: m / line,
            slot_of: Vec::new(),
            line_in: Vec::new(),
            prev: Vec::new(),
            next: Vec::new(),
            head: NIL,
            tail: NIL,
            misses: 0,
            accesses: 0,
        })
    }

    pub fn misses(&self) -> u64 {
        self.misses
    }

    pub fn accesses(&self) -> u64 {
        self.accesses
    }

    fn unlink(&mut self, s: u32) {
        let (p, n) = (self.prev[s as usize], self.next[s as usize]);
        if p != NIL { self.next[p as usize] = n } else { self.head = n }
        if n != NIL { self.prev[n as usize] = p } else { self.tail = p }
    }

    fn push_front(&mut self, s: u32) {
        self.prev[s as usize] = NIL;
        self.next[s as usize] = self.head;
        if self.head != NIL {
            self.prev[self.head as usize] = s;
        }
        self.head = s;
        if self.tail == NIL {
            self.tail = s;
        }
    }

    /// Touches `addr`; returns whether it missed.
    #[inline]
    pub fn access(&mut self, addr: u64) -> bool {
        self.accesses += 1;
        let line = addr >> self.line_shift;
        let li = line as usize;
        if li >= self.slot_of.len() {
            self.slot_of.resize((li + 1).next_power_of_two(), NIL);
        }
        let s = self.slot_of[li];
        if s != NIL {
            if s != self.head {
                self.unlink(s);
                self.push_front(s);
            }
            return false;
        }
        self.misses += 1;
        let s = if self.line_in.len() < self.capacity {
            self.line_in.push(line);
            self.prev.push(NIL);
            self.next.push(NIL);
            (self.line_in.len() - 1) as u32
        } else {
            let victim = self.tail;
            self.unlink(victim);
            self.slot_of[self.line_in[victim as usize] as usize] = NIL;
            self.line_in[victim as usize] = line;
            victim
        };
        self.slot_of[li] = s;
        self.push_front(s);
        true
    }
}

/// Several caches fed from one trace pass.
#[derive(Debug, Clone)]
pub struct MultiLru {
    caches: Vec<LruCache>,
    last_line: u64,
    line_shift: u32,
}

impl MultiLru {
    /// One cache per size in `ms`, all with line size `line`.
    pub fn new(ms: &[usize], line: usize) -> Result<Self> {
        let caches = ms.iter().map(|&m| LruCache::new(m, line)).collect::<Result<Vec<_>>>()?;
        Ok(MultiLru { caches, last_line: u64::MAX, line_shift: line.trailing_zeros() })
    }

    pub fn misses(&self) -> Vec<u64> {
        self.caches.iter().map(LruCache::misses).collect()
    }
}

impl TraceSink for MultiLru {
    #[inline]
    fn access(&mut self, addr: u64, _kind: AccessKind) {
        let line = addr >> self.line_shift;
        if line == self.last_line {
            // Already most recently used everywhere: a hit with no reordering.
            for c in &mut self.caches {
                c.accesses += 1;
            }
            return;
        }
        self.last_line = line;
        for c in &mut self.caches {
            c.access(addr);
        }
    }
}

/// Line transfers of `t` through an LRU cache of `m` elements with lines of
/// `line` elements.
pub fn simulate_cache(t: &AccessTrace, m: usize, line: usize) -> Result<u64> {
    let mut c = LruCache::new(m, line)?;
    for &(addr, _) in &t.records {
        c.access(addr);
    }
    Ok(c.misses())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scan(len: u64, passes: usize) -> AccessTrace {
        let mut t = AccessTrace::default();
        for _ in 0..passes {
            for a in 0..len {
                t.access(a, AccessKind::Read);
            }
        }
        t
    }

    #[test]
    fn cold_scan() {
        assert_eq!(simulate_cache(&scan(64, 1), 64, 8).unwrap(), 8);
        assert_eq!(simulate_cache(&scan(64, 1), 1024, 8).unwrap(), 8);
    }

    #[test]
    fn second_pass_hits() {
        assert_eq!(simulate_cache(&scan(64, 2), 64, 8).unwrap(), 8);
    }

    #[test]
    fn lru_thrashes_one_line_over_capacity() {
        assert_eq!(simulate_cache(&scan(72, 2), 64, 8).unwrap(), 18);
    }

    #[test]
    fn rejects_short_cache() {
        assert!(LruCache::new(32, 8).is_err());
        assert!(LruCache::new(96, 8).is_err());
    }

    #[test]
    fn multi_matches_single() {
        let mut t = AccessTrace::default();
        let mut x: u64 = 12345;
        for _ in 0..20_000 {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            t.access((x >> 33) % 4096, AccessKind::Read);
        }
        let ms = [64usize, 256, 1024];
        let mut multi = MultiLru::new(&ms, 8).unwrap();
        for &(a, k) in &t.records {
            multi.access(a, k);
        }
        let single: Vec<u64> = ms.iter().map(|&m| simulate_cache(&t, m, 8).unwrap()).collect();
        assert_eq!(multi.misses(), single);
        assert!(single.windows(2).all(|w| w[0] >= w[1]));
    }
}
