use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rooted K-ary tree of depth R in breadth-first order.
///
/// Node 0 is the root, the children of `i` are `K·i+1 ..= K·i+K` and the
/// nodes at depth `d` occupy `level_start(d) .. level_start(d+1)`. Every
/// tree of smaller depth is a prefix of this indexing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeTopology {
    branching: usize,
    depth: usize,
    node_count: usize,
}

impl TreeTopology {
    pub fn new(branching: usize, depth: usize) -> Result<Self> {
        if branching < 2 {
            return Err(Error::Config(format!("branching K must be >= 2, got {branching}")));
        }
        let node_count = Self::count(branching, depth).ok_or_else(|| {
            Error::Size(format!("tree with K={branching}, R={depth} overflows the node index"))
        })?;
        Ok(Self {
            branching,
            depth,
            node_count,
        })
    }

    /// `(K^(R+1) - 1)/(K - 1)` with overflow detection.
    fn count(k: usize, depth: usize) -> Option<usize> {
        let mut total: usize = 1;
        let mut level: usize = 1;
        for _ in 0..depth {
            level = level.checked_mul(k)?;
            total = total.checked_add(level)?;
        }
        Some(total)
    }

    pub fn branching(&self) -> usize {
        self.branching
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Index of the first node at depth `d`.
    pub fn level_start(&self, d: usize) -> usize {
        Self::count(self.branching, d)
            .map(|c| c - self.branching.pow(d as u32))
            .unwrap_or(usize::MAX)
    }

    /// Node index range of depth `d`.
    pub fn level(&self, d: usize) -> std::ops::Range<usize> {
        assert!(d <= self.depth, "depth {d} beyond tree depth {}", self.depth);
        self.level_start(d)..self.level_start(d) + self.branching.pow(d as u32)
    }

    pub fn children(&self, i: usize) -> std::ops::Range<usize> {
        let first = self.branching * i + 1;
        if first >= self.node_count {
            self.node_count..self.node_count
        } else {
            first..first + self.branching
        }
    }

    pub fn parent(&self, i: usize) -> Option<usize> {
        (i > 0).then(|| (i - 1) / self.branching)
    }

    pub fn is_leaf(&self, i: usize) -> bool {
        self.branching * i + 1 >= self.node_count
    }

    /// Distance `|x|` from the root.
    pub fn node_depth(&self, i: usize) -> usize {
        let mut d = 0;
        let mut j = i;
        while j > 0 {
            j = (j - 1) / self.branching;
            d += 1;
        }
        d
    }

    /// Root-to-node path, root first.
    pub fn path_to(&self, i: usize) -> Vec<usize> {
        let mut path = vec![i];
        let mut j = i;
        while let Some(p) = self.parent(j) {
            path.push(p);
            j = p;
        }
        path.reverse();
        path
    }

    /// Node `K·j + 1` chain from the root: the leftmost node at depth `d`.
    pub fn leftmost(&self, d: usize) -> usize {
        self.level_start(d)
    }

    /// The same tree cut at a smaller depth.
    pub fn truncated(&self, depth: usize) -> Result<Self> {
        Self::new(self.branching, depth.min(self.depth))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn build_examples() {
        assert_eq!(TreeTopology::new(2, 0).unwrap().node_count(), 1);
        assert_eq!(TreeTopology::new(2, 3).unwrap().node_count(), 15);
        let t = TreeTopology::new(3, 2).unwrap();
        assert_eq!(t.node_count(), 13);
        assert_eq!(t.children(1), 4..7);
        assert!(TreeTopology::new(1, 3).is_err());
        assert!(matches!(TreeTopology::new(2, 200), Err(Error::Size(_))));
    }

    #[test]
    fn indexing_invariants() {
        for k in 2..5 {
            for r in 0..5 {
                let t = TreeTopology::new(k, r).unwrap();
                assert_eq!(t.node_count(), (k.pow(r as u32 + 1) - 1) / (k - 1));
                for i in 0..t.node_count() {
                    let d = t.node_depth(i);
                    assert!(t.level(d).contains(&i));
                    assert_eq!(t.is_leaf(i), d == r);
                    if !t.is_leaf(i) {
                        assert_eq!(t.children(i).len(), k);
                        for c in t.children(i) {
                            assert_eq!(t.parent(c), Some(i));
                        }
                    } else {
                        assert!(t.children(i).is_empty());
                    }
                }
                assert_eq!(t.path_to(t.leftmost(r)).len(), r + 1);
            }
        }
    }
}
