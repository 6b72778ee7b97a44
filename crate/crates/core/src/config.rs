use serde::{Deserialize, Serialize};

use crate::error::{MmError, Result};

/// Machine and recursion parameters shared by execution and analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Config {
    /// Base-case dimension `b`; recursion stops at `b x b` blocks.
    pub base_dim: usize,
    /// Worker count `p`.
    pub workers: usize,
    /// Cache size `M` in elements.
    pub cache_size: usize,
    /// Cache line size `B` in elements.
    pub line_size: usize,
    /// Fraction of the cache usable before a recursion is considered resident.
    pub epsilon: f64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            base_dim: 32,
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            cache_size: 1 << 15,
            line_size: 8,
            epsilon: 1.0 / 3.0,
        }
    }
}

impl Config {
    pub fn with_base(mut self, b: usize) -> Self {
        self.base_dim = b;
        self
    }

    pub fn with_workers(mut self, p: usize) -> Self {
        self.workers = p;
        self
    }

    pub fn with_cache(mut self, m: usize, line: usize) -> Self {
        self.cache_size = m;
        self.line_size = line;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.base_dim == 0 || !self.base_dim.is_power_of_two() {
            return Err(MmError::InvalidConfig(format!("base dimension {} is not a power of two", self.base_dim)));
        }
        if self.workers == 0 {
            return Err(MmError::InvalidConfig("worker count must be at least 1".into()));
        }
        if self.line_size == 0 || self.cache_size < self.line_size * self.line_size {
            return Err(MmError::InvalidConfig(format!(
                "cache of {} elements is not tall for lines of {}",
                self.cache_size, self.line_size
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(MmError::InvalidConfig(format!("epsilon {} outside (0, 1]", self.epsilon)));
        }
        Ok(())
    }

    /// Switch depth of the hybrid schedules: the smallest `k` with `4^k >= p`,
    /// i.e. `ceil(log2(p) / 2)`.
    pub fn switch_depth(&self) -> u32 {
        switch_depth(self.workers)
    }
}

pub fn switch_depth(p: usize) -> u32 {
    let mut k = 0u32;
    while 4usize.saturating_pow(k) < p {
        k += 1;
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn switch_depth_is_ceiling_of_half_log() {
        assert_eq!(switch_depth(1), 0);
        assert_eq!(switch_depth(2), 1);
        assert_eq!(switch_depth(4), 1);
        assert_eq!(switch_depth(5), 2);
        assert_eq!(switch_depth(8), 2);
        assert_eq!(switch_depth(16), 2);
        assert_eq!(switch_depth(17), 3);
        for p in 1..=1024usize {
            let exact = ((p as f64).log2() / 2.0).ceil() as u32;
            assert_eq!(switch_depth(p), exact, "p = {p}");
        }
    }

    #[test]
    fn validation() {
        assert!(Config::default().validate().is_ok());
        assert!(Config::default().with_base(3).validate().is_err());
        assert!(Config::default().with_workers(0).validate().is_err());
        assert!(Config::default().with_cache(32, 8).validate().is_err());
        let mut c = Config::default();
        c.epsilon = 0.0;
        assert!(c.validate().is_err());
    }
}
