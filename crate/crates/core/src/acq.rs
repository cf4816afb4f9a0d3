//! Acquisition structures: summaries of the lock behaviour of a (sub)run.
//!
//! A structure `(R, RH, U, AH, A, X)` records, for the tree of local runs it
//! annotates: the locks with an initial release (`R`, a release not preceded
//! by a matching acquisition), the release graph (`RH`), the locks with a
//! matched acquire/release pair (`U`), the acquisition graph (`AH`), the locks
//! with a final acquisition (`A`, an acquisition never released), and the
//! locks held when the tree starts (`X`).
//!
//! Locks are indices below [`MAX_LOCKS`]; sets and graphs are bit masks, so
//! structures are small `Copy` values and the algebra is allocation-free.

use std::fmt;

use thiserror::Error;

/// Hard cap on the lock universe imposed by the bit-packed representation.
pub const MAX_LOCKS: usize = 5;

/// Default cap on |locks| for [`enumerate_all`]; the structure count grows as
/// `13^n * dags(n)^2` and is already above a million at three locks.
pub const DEFAULT_ENUMERATION_CAP: usize = 3;

pub type LockId = usize;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AcqError {
    #[error("lock universe of size {0} exceeds enumeration cap {1}")]
    TooManyLocks(usize, usize),
    #[error("spawn-side structure must have empty R and X components")]
    SpawnSideNotEmpty,
    #[error("structures are not compatible")]
    NotCompatible,
}

/// A set of locks as a bit mask.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct LockSet(pub u32);

impl LockSet {
    pub const EMPTY: LockSet = LockSet(0);

    pub fn singleton(l: LockId) -> Self {
        LockSet(1 << l)
    }

    pub fn from_iter<I: IntoIterator<Item = LockId>>(it: I) -> Self {
        let mut s = LockSet::EMPTY;
        for l in it {
            s = s.insert(l);
        }
        s
    }

    pub fn contains(self, l: LockId) -> bool {
        self.0 & (1 << l) != 0
    }

    #[must_use]
    pub fn insert(self, l: LockId) -> Self {
        LockSet(self.0 | (1 << l))
    }

    #[must_use]
    pub fn remove(self, l: LockId) -> Self {
        LockSet(self.0 & !(1 << l))
    }

    #[must_use]
    pub fn union(self, other: Self) -> Self {
        LockSet(self.0 | other.0)
    }

    #[must_use]
    pub fn inter(self, other: Self) -> Self {
        LockSet(self.0 & other.0)
    }

    #[must_use]
    pub fn minus(self, other: Self) -> Self {
        LockSet(self.0 & !other.0)
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_disjoint(self, other: Self) -> bool {
        self.0 & other.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = LockId> {
        (0..32).filter(move |l| self.contains(*l))
    }

    pub fn render(self, names: &[String]) -> String {
        let items: Vec<&str> = self.iter().map(|l| names[l].as_str()).collect();
        format!("{{{}}}", items.join(","))
    }
}

impl fmt::Debug for LockSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items: Vec<String> = self.iter().map(|l| format!("l{l}")).collect();
        write!(f, "{{{}}}", items.join(","))
    }
}

/// A directed graph over the lock universe as a bit mask of edges.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct LockGraph(pub u32);

impl LockGraph {
    pub const EMPTY: LockGraph = LockGraph(0);

    fn bit(from: LockId, to: LockId) -> u32 {
        1 << (from * MAX_LOCKS + to)
    }

    pub fn from_edges<I: IntoIterator<Item = (LockId, LockId)>>(it: I) -> Self {
        let mut g = LockGraph::EMPTY;
        for (a, b) in it {
            g = g.add(a, b);
        }
        g
    }

    pub fn contains(self, from: LockId, to: LockId) -> bool {
        self.0 & Self::bit(from, to) != 0
    }

    #[must_use]
    pub fn add(self, from: LockId, to: LockId) -> Self {
        LockGraph(self.0 | Self::bit(from, to))
    }

    #[must_use]
    pub fn union(self, other: Self) -> Self {
        LockGraph(self.0 | other.0)
    }

    /// Removes every edge whose target is `l`.
    #[must_use]
    pub fn without_edges_into(self, l: LockId) -> Self {
        let mut mask = 0;
        for from in 0..MAX_LOCKS {
            mask |= Self::bit(from, l);
        }
        LockGraph(self.0 & !mask)
    }

    /// Adds the edges `{from} x targets`.
    #[must_use]
    pub fn with_edges_from(self, from: LockId, targets: LockSet) -> Self {
        let mut g = self;
        for t in targets.iter() {
            g = g.add(from, t);
        }
        g
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn edges(self) -> impl Iterator<Item = (LockId, LockId)> {
        (0..MAX_LOCKS).flat_map(move |a| {
            (0..MAX_LOCKS).filter_map(move |b| if self.contains(a, b) { Some((a, b)) } else { None })
        })
    }

    /// Cycle detection by an iterative three-colour DFS over the edge set.
    pub fn is_acyclic(self) -> bool {
        const WHITE: u8 = 0;
        const GREY: u8 = 1;
        const BLACK: u8 = 2;
        let mut color = [WHITE; MAX_LOCKS];
        for start in 0..MAX_LOCKS {
            if color[start] != WHITE {
                continue;
            }
            // Stack entries: (node, next successor to try).
            let mut stack = vec![(start, 0usize)];
            color[start] = GREY;
            while let Some(&mut (node, ref mut next)) = stack.last_mut() {
                let mut advanced = false;
                while *next < MAX_LOCKS {
                    let succ = *next;
                    *next += 1;
                    if !self.contains(node, succ) {
                        continue;
                    }
                    match color[succ] {
                        GREY => return false,
                        WHITE => {
                            color[succ] = GREY;
                            stack.push((succ, 0));
                            advanced = true;
                            break;
                        }
                        _ => {}
                    }
                }
                if !advanced && *next >= MAX_LOCKS {
                    color[node] = BLACK;
                    stack.pop();
                }
            }
        }
        true
    }

    pub fn render(self, names: &[String]) -> String {
        let items: Vec<String> = self
            .edges()
            .map(|(a, b)| format!("({},{})", names[a], names[b]))
            .collect();
        format!("{{{}}}", items.join(","))
    }
}

impl fmt::Debug for LockGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items: Vec<String> = self.edges().map(|(a, b)| format!("(l{a},l{b})")).collect();
        write!(f, "{{{}}}", items.join(","))
    }
}

/// The six-tuple `(R, RH, U, AH, A, X)`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct AcquisitionStructure {
    pub r: LockSet,
    pub rh: LockGraph,
    pub u: LockSet,
    pub ah: LockGraph,
    pub a: LockSet,
    pub x: LockSet,
}

impl fmt::Debug for AcquisitionStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(R={:?}, RH={:?}, U={:?}, AH={:?}, A={:?}, X={:?})",
            self.r, self.rh, self.u, self.ah, self.a, self.x
        )
    }
}

impl AcquisitionStructure {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Consistency: both graphs acyclic and `(X \ R)` disjoint from `U ∪ A`.
    /// Locks held at the start and never released cannot be used or finally
    /// acquired by anyone.
    pub fn is_consistent(&self) -> bool {
        self.rh.is_acyclic()
            && self.ah.is_acyclic()
            && self.x.minus(self.r).is_disjoint(self.u.union(self.a))
    }

    /// Sorted textual rendering, used for golden tests, hashing of reduced
    /// control names, and CLI diagnostics.
    pub fn render(&self, lock_names: &[String]) -> String {
        format!(
            "R={} RH={} U={} AH={} A={} X={}",
            self.r.render(lock_names),
            self.rh.render(lock_names),
            self.u.render(lock_names),
            self.ah.render(lock_names),
            self.a.render(lock_names),
            self.x.render(lock_names)
        )
    }
}

/// The two-structure compatibility test: decides whether two sibling subtrees
/// can hang below one node of a global run without deadlocking on locks.
pub fn compatible(s1: &AcquisitionStructure, s2: &AcquisitionStructure) -> bool {
    debug_assert!(s1.is_consistent() && s2.is_consistent());
    let held1 = s1.x.minus(s1.r);
    let held2 = s2.x.minus(s2.r);
    s1.x.is_disjoint(s2.x)
        && s1.a.union(held1).is_disjoint(s2.a.union(held2))
        && s1.rh.union(s2.rh).is_acyclic()
        && s1.ah.union(s2.ah).is_acyclic()
        && s1.a.union(s1.u).is_disjoint(held2)
        && s2.a.union(s2.u).is_disjoint(held1)
}

/// Component-wise union of a continuation structure with a spawned subtree's
/// structure. The spawned side starts with no locks, so its `R` and `X` must
/// be empty.
pub fn merge(
    cont: &AcquisitionStructure,
    spawned: &AcquisitionStructure,
) -> Result<AcquisitionStructure, AcqError> {
    if !(spawned.r.is_empty() && spawned.x.is_empty()) {
        return Err(AcqError::SpawnSideNotEmpty);
    }
    if !compatible(cont, spawned) {
        return Err(AcqError::NotCompatible);
    }
    Ok(AcquisitionStructure {
        r: cont.r.union(spawned.r),
        rh: cont.rh.union(spawned.rh),
        u: cont.u.union(spawned.u),
        ah: cont.ah.union(spawned.ah),
        a: cont.a.union(spawned.a),
        x: cont.x.union(spawned.x),
    })
}

impl AcquisitionStructure {
    /// Backward transformer for a `rel(l)` step: `self` annotates the subtree
    /// after the release, the result annotates the subtree starting with it.
    /// The release is an initial release for the enlarged subtree, so it is
    /// undefined when the suffix already initially releases or holds `l`.
    pub fn rel_update(&self, l: LockId) -> Option<AcquisitionStructure> {
        if self.x.contains(l) || self.r.contains(l) {
            return None;
        }
        Some(AcquisitionStructure {
            r: self.r.insert(l),
            x: self.x.insert(l),
            ..*self
        })
    }

    /// Backward transformer for an `acq(l)` step.
    ///
    /// Case one (the suffix initially releases `l`): the acquisition matches
    /// that release and becomes a usage; edges into `l` leave the release
    /// graph and the new usage precedes the remaining initial releases.
    /// Case two (the suffix holds `l` and never finally acquires it): the
    /// acquisition is final and precedes every usage of the suffix.
    pub fn acq_update(&self, l: LockId) -> Option<AcquisitionStructure> {
        if self.r.contains(l) && self.x.contains(l) {
            let rest = self.r.remove(l);
            Some(AcquisitionStructure {
                r: rest,
                rh: self.rh.without_edges_into(l).with_edges_from(l, rest),
                u: self.u.insert(l),
                ah: self.ah,
                a: self.a,
                x: self.x.remove(l),
            })
        } else if !self.a.contains(l) && self.x.contains(l) {
            Some(AcquisitionStructure {
                r: self.r,
                rh: self.rh,
                u: self.u,
                ah: self.ah.with_edges_from(l, self.u),
                a: self.a.insert(l),
                x: self.x.remove(l),
            })
        } else {
            None
        }
    }
}

/// All acyclic graph masks over `n` locks, ascending.
fn acyclic_graphs(n: usize) -> Vec<LockGraph> {
    assert!(n <= MAX_LOCKS);
    // Graph candidates use only edge bits between the first n locks.
    let mut bits = Vec::new();
    for a in 0..n {
        for b in 0..n {
            bits.push(a * MAX_LOCKS + b);
        }
    }
    let mut out = Vec::new();
    for combo in 0..(1u32 << bits.len()) {
        let mut mask = 0u32;
        for (i, bit) in bits.iter().enumerate() {
            if combo & (1 << i) != 0 {
                mask |= 1 << bit;
            }
        }
        let g = LockGraph(mask);
        if g.is_acyclic() {
            out.push(g);
        }
    }
    out.sort();
    out
}

/// Enumerates every consistent acquisition structure over `n_locks` locks,
/// each exactly once, in ascending order. Guarded: the count explodes with
/// the lock count, so universes larger than `cap` are refused.
pub fn enumerate_all(n_locks: usize, cap: usize) -> Result<Vec<AcquisitionStructure>, AcqError> {
    if n_locks > cap.min(MAX_LOCKS) {
        return Err(AcqError::TooManyLocks(n_locks, cap.min(MAX_LOCKS)));
    }
    let graphs = acyclic_graphs(n_locks);
    let sets: Vec<LockSet> = (0..(1u32 << n_locks)).map(LockSet).collect();
    let mut out = Vec::new();
    for &r in &sets {
        for &u in &sets {
            for &a in &sets {
                for &x in &sets {
                    if !x.minus(r).is_disjoint(u.union(a)) {
                        continue;
                    }
                    for &rh in &graphs {
                        for &ah in &graphs {
                            out.push(AcquisitionStructure { r, rh, u, ah, a, x });
                        }
                    }
                }
            }
        }
    }
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ls(locks: &[LockId]) -> LockSet {
        LockSet::from_iter(locks.iter().copied())
    }

    #[test]
    fn empty_structure_is_consistent() {
        assert!(AcquisitionStructure::empty().is_consistent());
    }

    #[test]
    fn release_graph_cycle_is_inconsistent() {
        let s = AcquisitionStructure {
            rh: LockGraph::from_edges([(0, 1), (1, 0)]),
            ..Default::default()
        };
        assert!(!s.is_consistent());
    }

    #[test]
    fn self_loop_counts_as_cycle() {
        let s = AcquisitionStructure {
            ah: LockGraph::from_edges([(0, 0)]),
            ..Default::default()
        };
        assert!(!s.is_consistent());
    }

    #[test]
    fn held_forever_lock_cannot_be_used() {
        let s = AcquisitionStructure {
            x: ls(&[0]),
            u: ls(&[0]),
            ..Default::default()
        };
        assert!(!s.is_consistent());
    }

    #[test]
    fn compatible_rejects_shared_initial_locks() {
        let s1 = AcquisitionStructure { x: ls(&[0]), r: ls(&[0]), ..Default::default() };
        let s2 = s1;
        assert!(!compatible(&s1, &s2));
    }

    #[test]
    fn compatible_rejects_acquisition_graph_cycle() {
        let s1 = AcquisitionStructure {
            ah: LockGraph::from_edges([(0, 1)]),
            ..Default::default()
        };
        let s2 = AcquisitionStructure {
            ah: LockGraph::from_edges([(1, 0)]),
            ..Default::default()
        };
        assert!(!compatible(&s1, &s2));
    }

    #[test]
    fn compatible_rejects_shared_final_acquisitions() {
        let s1 = AcquisitionStructure { a: ls(&[0]), ..Default::default() };
        let s2 = s1;
        assert!(!compatible(&s1, &s2));
    }

    #[test]
    fn compatible_accepts_empty_pair() {
        assert!(compatible(&AcquisitionStructure::empty(), &AcquisitionStructure::empty()));
    }

    #[test]
    fn merge_with_empty_is_identity() {
        let s = AcquisitionStructure {
            r: ls(&[0]),
            u: ls(&[1]),
            x: ls(&[0]),
            ..Default::default()
        };
        assert_eq!(merge(&s, &AcquisitionStructure::empty()).unwrap(), s);
    }

    #[test]
    fn merge_rejects_spawn_side_with_initial_locks() {
        let spawned = AcquisitionStructure { x: ls(&[1]), ..Default::default() };
        assert_eq!(
            merge(&AcquisitionStructure::empty(), &spawned),
            Err(AcqError::SpawnSideNotEmpty)
        );
    }

    #[test]
    fn rel_update_on_empty() {
        let got = AcquisitionStructure::empty().rel_update(0).unwrap();
        let want = AcquisitionStructure { r: ls(&[0]), x: ls(&[0]), ..Default::default() };
        assert_eq!(got, want);
    }

    #[test]
    fn rel_update_undefined_when_lock_already_held() {
        let s = AcquisitionStructure { x: ls(&[0]), ..Default::default() };
        assert_eq!(s.rel_update(0), None);
    }

    #[test]
    fn acq_update_matches_initial_release() {
        let s = AcquisitionStructure { r: ls(&[0]), x: ls(&[0]), ..Default::default() };
        let got = s.acq_update(0).unwrap();
        let want = AcquisitionStructure { u: ls(&[0]), ..Default::default() };
        assert_eq!(got, want);
        assert!(got.is_consistent());
    }

    /// The structure at the root of the first figure's run: acquiring `l1`
    /// in front of a suffix that uses `l2` and `l3` is a final acquisition
    /// preceding both usages.
    #[test]
    fn acq_update_final_acquisition_records_usages() {
        let s = AcquisitionStructure {
            u: ls(&[1, 2]),
            x: ls(&[0]),
            ..Default::default()
        };
        let got = s.acq_update(0).unwrap();
        let want = AcquisitionStructure {
            u: ls(&[1, 2]),
            ah: LockGraph::from_edges([(0, 1), (0, 2)]),
            a: ls(&[0]),
            ..Default::default()
        };
        assert_eq!(got, want);
    }

    #[test]
    fn acq_update_undefined_when_already_final() {
        let s = AcquisitionStructure { a: ls(&[0]), x: ls(&[0]), ..Default::default() };
        assert_eq!(s.acq_update(0), None);
    }

    #[test]
    fn enumerate_empty_universe() {
        let all = enumerate_all(0, DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(all, vec![AcquisitionStructure::empty()]);
    }

    #[test]
    fn enumerate_refuses_large_universe() {
        assert!(matches!(
            enumerate_all(4, DEFAULT_ENUMERATION_CAP),
            Err(AcqError::TooManyLocks(4, _))
        ));
    }

    #[test]
    fn enumeration_count_invariant_under_renaming() {
        // |AS| depends only on the universe size, so any renaming fixes it.
        let one = enumerate_all(1, DEFAULT_ENUMERATION_CAP).unwrap().len();
        assert_eq!(one, 13);
    }

    #[test]
    fn rendering_is_sorted_and_total() {
        let names: Vec<String> = ["a", "b"].iter().map(|s| s.to_string()).collect();
        let s = AcquisitionStructure {
            r: ls(&[1]),
            rh: LockGraph::from_edges([(0, 1)]),
            u: ls(&[0]),
            x: ls(&[1]),
            ..Default::default()
        };
        assert_eq!(s.render(&names), "R={b} RH={(a,b)} U={a} AH={} A={} X={b}");
    }
}
