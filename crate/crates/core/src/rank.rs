//! Per-depth ranking of cells by decreasing score, with exact cumulative
//! rank sums.
//!
//! Cells are kept in a treap ordered by `(score desc, index asc)`; cells with
//! a `-inf` score therefore trail every finite one in index order. Moving a
//! cell shifts the rank of a contiguous block of other cells by one, so the
//! running sum `sum_{s<=t} rank_s` of every cell is maintained lazily: each
//! node carries `G = sum over rank changes of delta * (tau - 1)`, where `tau`
//! is the first round using the new rank, and block shifts are pushed down
//! the tree as range additions. Then `sum_{s=1}^t rank_s = rank_t * t - G`.

const NIL: u32 = u32::MAX;

#[derive(Debug, Clone)]
struct Node {
    left: u32,
    right: u32,
    parent: u32,
    size: u32,
    priority: u64,
    /// Rank-change correction for this cell, exact once every strict
    /// ancestor's `lazy` is added.
    correction: i64,
    /// Pending addition for both subtrees.
    lazy: i64,
}

/// Ranking of the `K^h` cells of one depth.
#[derive(Debug, Clone)]
pub struct RankTable {
    scores: Vec<f64>,
    nodes: Vec<Node>,
    root: u32,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RankTable {
    /// A table over `cells` cells, all unscored and ranked in index order.
    pub fn new(cells: usize) -> Self {
        assert!(
            cells > 0 && cells < NIL as usize,
            "unsupported table size {cells}"
        );
        let mut nodes: Vec<Node> = (0..cells)
            .map(|i| Node {
                left: NIL,
                right: NIL,
                parent: NIL,
                size: 1,
                priority: splitmix(i as u64),
                correction: 0,
                lazy: 0,
            })
            .collect();
        // Cartesian-tree construction over the index order.
        let mut spine: Vec<u32> = Vec::new();
        for i in 0..cells as u32 {
            let mut last = NIL;
            while let Some(&top) = spine.last() {
                if nodes[top as usize].priority < nodes[i as usize].priority {
                    last = spine.pop().unwrap();
                } else {
                    break;
                }
            }
            nodes[i as usize].left = last;
            if last != NIL {
                nodes[last as usize].parent = i;
            }
            if let Some(&top) = spine.last() {
                nodes[top as usize].right = i;
                nodes[i as usize].parent = top;
            }
            spine.push(i);
        }
        let root = spine[0];
        let mut table = Self {
            scores: vec![f64::NEG_INFINITY; cells],
            nodes,
            root,
        };
        table.recompute_sizes(root);
        table
    }

    fn recompute_sizes(&mut self, root: u32) {
        // Post-order without recursion: the tree may be deep before balancing.
        let mut stack = vec![(root, false)];
        while let Some((x, done)) = stack.pop() {
            if x == NIL {
                continue;
            }
            if done {
                self.pull(x);
            } else {
                stack.push((x, true));
                stack.push((self.nodes[x as usize].left, false));
                stack.push((self.nodes[x as usize].right, false));
            }
        }
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn score(&self, cell: usize) -> f64 {
        self.scores[cell]
    }

    fn size(&self, x: u32) -> u32 {
        if x == NIL {
            0
        } else {
            self.nodes[x as usize].size
        }
    }

    fn pull(&mut self, x: u32) {
        let (l, r) = (self.nodes[x as usize].left, self.nodes[x as usize].right);
        self.nodes[x as usize].size = 1 + self.size(l) + self.size(r);
        if l != NIL {
            self.nodes[l as usize].parent = x;
        }
        if r != NIL {
            self.nodes[r as usize].parent = x;
        }
    }

    fn apply(&mut self, x: u32, delta: i64) {
        if x != NIL && delta != 0 {
            let node = &mut self.nodes[x as usize];
            node.correction += delta;
            node.lazy += delta;
        }
    }

    fn push(&mut self, x: u32) {
        let lazy = std::mem::take(&mut self.nodes[x as usize].lazy);
        if lazy != 0 {
            let (l, r) = (self.nodes[x as usize].left, self.nodes[x as usize].right);
            self.apply(l, lazy);
            self.apply(r, lazy);
        }
    }

    /// True when cell `a` with `score_a` ranks ahead of cell `b`.
    fn ahead(score_a: f64, a: usize, score_b: f64, b: usize) -> bool {
        score_a > score_b || (score_a == score_b && a < b)
    }

    /// Splits off the first `k` nodes in rank order.
    fn split_at(&mut self, x: u32, k: u32) -> (u32, u32) {
        if x == NIL {
            return (NIL, NIL);
        }
        self.push(x);
        let left = self.nodes[x as usize].left;
        let left_size = self.size(left);
        if k <= left_size {
            let (a, b) = self.split_at(left, k);
            self.nodes[x as usize].left = b;
            self.pull(x);
            if a != NIL {
                self.nodes[a as usize].parent = NIL;
            }
            self.nodes[x as usize].parent = NIL;
            (a, x)
        } else {
            let right = self.nodes[x as usize].right;
            let (a, b) = self.split_at(right, k - left_size - 1);
            self.nodes[x as usize].right = a;
            self.pull(x);
            if b != NIL {
                self.nodes[b as usize].parent = NIL;
            }
            self.nodes[x as usize].parent = NIL;
            (x, b)
        }
    }

    /// Splits into the nodes ranked ahead of `(score, cell)` and the rest.
    fn split_by_key(&mut self, x: u32, score: f64, cell: usize) -> (u32, u32) {
        if x == NIL {
            return (NIL, NIL);
        }
        self.push(x);
        if Self::ahead(self.scores[x as usize], x as usize, score, cell) {
            let right = self.nodes[x as usize].right;
            let (a, b) = self.split_by_key(right, score, cell);
            self.nodes[x as usize].right = a;
            self.pull(x);
            if b != NIL {
                self.nodes[b as usize].parent = NIL;
            }
            self.nodes[x as usize].parent = NIL;
            (x, b)
        } else {
            let left = self.nodes[x as usize].left;
            let (a, b) = self.split_by_key(left, score, cell);
            self.nodes[x as usize].left = b;
            self.pull(x);
            if a != NIL {
                self.nodes[a as usize].parent = NIL;
            }
            self.nodes[x as usize].parent = NIL;
            (a, x)
        }
    }

    fn merge(&mut self, a: u32, b: u32) -> u32 {
        if a == NIL {
            return b;
        }
        if b == NIL {
            return a;
        }
        if self.nodes[a as usize].priority > self.nodes[b as usize].priority {
            self.push(a);
            let right = self.nodes[a as usize].right;
            let merged = self.merge(right, b);
            self.nodes[a as usize].right = merged;
            self.pull(a);
            self.nodes[a as usize].parent = NIL;
            a
        } else {
            self.push(b);
            let left = self.nodes[b as usize].left;
            let merged = self.merge(a, left);
            self.nodes[b as usize].left = merged;
            self.pull(b);
            self.nodes[b as usize].parent = NIL;
            b
        }
    }

    /// 1-based rank of `cell`.
    pub fn rank_of(&self, cell: usize) -> usize {
        let mut x = cell as u32;
        let mut rank = self.size(self.nodes[cell].left) as usize + 1;
        loop {
            let p = self.nodes[x as usize].parent;
            if p == NIL {
                return rank;
            }
            if self.nodes[p as usize].right == x {
                rank += self.size(self.nodes[p as usize].left) as usize + 1;
            }
            x = p;
        }
    }

    /// Cell holding the 1-based `rank`.
    pub fn cell_at(&self, rank: usize) -> usize {
        assert!(rank >= 1 && rank <= self.len(), "rank {rank} out of range");
        let mut k = rank as u32;
        let mut x = self.root;
        loop {
            let left = self.nodes[x as usize].left;
            let ls = self.size(left);
            if k <= ls {
                x = left;
            } else if k == ls + 1 {
                return x as usize;
            } else {
                k -= ls + 1;
                x = self.nodes[x as usize].right;
            }
        }
    }

    /// Sets a cell's score. The resulting ranks are the ones in force from
    /// round `effective_round` onwards.
    pub fn set_score(&mut self, cell: usize, score: f64, effective_round: u64) {
        assert!(!score.is_nan(), "NaN score for cell {cell}");
        assert!(effective_round >= 1);
        let stamp = (effective_round - 1) as i64;
        let old_rank = self.rank_of(cell) as u32;
        let (left, rest) = self.split_at(self.root, old_rank - 1);
        let (me, right) = self.split_at(rest, 1);
        debug_assert_eq!(me as usize, cell);
        // Everyone behind the cell moves up by one...
        self.apply(right, -stamp);
        let without = self.merge(left, right);
        self.scores[cell] = score;
        let (ahead, behind) = self.split_by_key(without, score, cell);
        // ...and everyone behind its new slot moves down by one.
        self.apply(behind, stamp);
        let new_rank = self.size(ahead) + 1;
        self.nodes[cell].correction += (new_rank as i64 - old_rank as i64) * stamp;
        let front = self.merge(ahead, me);
        self.root = self.merge(front, behind);
        self.nodes[self.root as usize].parent = NIL;
    }

    fn correction_of(&self, cell: usize) -> i64 {
        let mut total = self.nodes[cell].correction;
        let mut p = self.nodes[cell].parent;
        while p != NIL {
            total += self.nodes[p as usize].lazy;
            p = self.nodes[p as usize].parent;
        }
        total
    }

    /// `sum_{s=1}^t rank_s(cell)`, valid once every score change effective
    /// at or before round `t + 1` has been applied.
    pub fn rank_sum(&self, cell: usize, t: u64) -> u64 {
        let value = self.rank_of(cell) as i64 * t as i64 - self.correction_of(cell);
        debug_assert!(value >= 0);
        value as u64
    }

    /// Ranks and rank sums of every cell, by cell index.
    pub fn snapshot(&self, t: u64) -> Vec<(usize, u64)> {
        let mut out = vec![(0usize, 0u64); self.len()];
        let mut rank = 0usize;
        // In-order walk carrying the pending additions of the ancestors.
        let mut stack: Vec<(u32, i64)> = Vec::new();
        let mut x = self.root;
        let mut carried = 0i64;
        loop {
            while x != NIL {
                stack.push((x, carried));
                carried += self.nodes[x as usize].lazy;
                x = self.nodes[x as usize].left;
            }
            let Some((node, above)) = stack.pop() else {
                break;
            };
            rank += 1;
            let correction = self.nodes[node as usize].correction + above;
            out[node as usize] = (rank, (rank as i64 * t as i64 - correction) as u64);
            carried = above + self.nodes[node as usize].lazy;
            x = self.nodes[node as usize].right;
        }
        out
    }

    /// Cells in rank order.
    pub fn order(&self) -> Vec<usize> {
        let mut out = vec![0; self.len()];
        for (cell, (rank, _)) in self.snapshot(0).into_iter().enumerate() {
            out[rank - 1] = cell;
        }
        out
    }
}
