//! Permutations on `[n]` and on the signed domain `[±n]`, pairings, set
//! partitions, non-crossing partitions and Möbius weights.
//!
//! Points are always the literal integers `1..=n` (and `-n..=-1` on a signed
//! domain); there is no offset encoding in the public interface. All values
//! are immutable once built.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};

/// Largest domain accepted by [`enumerate_pairings`].
pub const PAIRING_CAP: usize = 12;
/// Largest ground set accepted by [`enumerate_partitions`].
pub const PARTITION_CAP: usize = 10;

/// Ordering key for leaders: smaller magnitude first, positive before negative.
fn leader_key(k: i32) -> (u32, bool) {
    (k.unsigned_abs(), k < 0)
}

fn leader_cmp(a: i32, b: i32) -> Ordering {
    leader_key(a).cmp(&leader_key(b))
}

/// A bijection on `[n]`, or on `[±n]` when `signed`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Permutation {
    n: usize,
    signed: bool,
    images: Vec<i32>,
}

impl Permutation {
    fn slot_of(n: usize, k: i32) -> usize {
        if k > 0 {
            k as usize - 1
        } else {
            n + (-k) as usize - 1
        }
    }

    fn slot(&self, k: i32) -> usize {
        Self::slot_of(self.n, k)
    }

    fn point_at(&self, slot: usize) -> i32 {
        if slot < self.n {
            slot as i32 + 1
        } else {
            -((slot - self.n) as i32 + 1)
        }
    }

    pub fn identity(n: usize) -> Self {
        Permutation {
            n,
            signed: false,
            images: (1..=n as i32).collect(),
        }
    }

    pub fn identity_signed(n: usize) -> Self {
        Permutation::identity(n).to_signed()
    }

    /// The involution `k ↦ -k` on `[±n]`.
    pub fn delta(n: usize) -> Self {
        let mut images: Vec<i32> = (1..=n as i32).map(|k| -k).collect();
        images.extend(1..=n as i32);
        Permutation {
            n,
            signed: true,
            images,
        }
    }

    /// Builds a permutation of `[n]` from the images of `1, …, n`.
    pub fn from_images(images: Vec<i32>) -> Result<Self> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &k in &images {
            if k < 1 || k as usize > n || seen[k as usize - 1] {
                return Err(Error::InvalidInput(format!(
                    "{images:?} is not a bijection on [{n}]"
                )));
            }
            seen[k as usize - 1] = true;
        }
        Ok(Permutation {
            n,
            signed: false,
            images,
        })
    }

    /// Builds a permutation from disjoint cycles; unlisted points are fixed.
    pub fn from_cycles(n: usize, signed: bool, cycles: &[Vec<i32>]) -> Result<Self> {
        let mut perm = if signed {
            Permutation::identity_signed(n)
        } else {
            Permutation::identity(n)
        };
        let mut touched = vec![false; perm.images.len()];
        for cycle in cycles {
            for (idx, &k) in cycle.iter().enumerate() {
                if !perm.contains(k) {
                    return Err(Error::InvalidInput(format!(
                        "point {k} outside the domain"
                    )));
                }
                let s = perm.slot(k);
                if touched[s] {
                    return Err(Error::InvalidInput(format!("point {k} repeated in cycles")));
                }
                touched[s] = true;
                perm.images[s] = cycle[(idx + 1) % cycle.len()];
            }
        }
        Ok(perm)
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn is_signed(&self) -> bool {
        self.signed
    }

    pub fn contains(&self, k: i32) -> bool {
        let m = k.unsigned_abs() as usize;
        k != 0 && m <= self.n && (k > 0 || self.signed)
    }

    /// Domain points in the order `1..=n` then `-1..=-n`.
    pub fn points(&self) -> impl Iterator<Item = i32> + '_ {
        (0..self.images.len()).map(move |s| self.point_at(s))
    }

    pub fn apply(&self, k: i32) -> i32 {
        debug_assert!(self.contains(k), "{k} not in domain");
        self.images[self.slot(k)]
    }

    /// Extends a permutation of `[n]` to `[±n]` by fixing every negative point.
    pub fn to_signed(&self) -> Self {
        if self.signed {
            return self.clone();
        }
        let mut images = self.images.clone();
        images.extend((1..=self.n as i32).map(|k| -k));
        Permutation {
            n: self.n,
            signed: true,
            images,
        }
    }

    /// Restricts a signed permutation that preserves `[n]` back to `[n]`.
    pub fn to_unsigned(&self) -> Option<Self> {
        if !self.signed {
            return Some(self.clone());
        }
        let images = self.images[..self.n].to_vec();
        if images.iter().any(|&k| k < 0) {
            return None;
        }
        Some(Permutation {
            n: self.n,
            signed: false,
            images,
        })
    }

    fn lift_to(&self, signed: bool) -> Self {
        if signed {
            self.to_signed()
        } else {
            self.clone()
        }
    }

    /// Composition `self ∘ other` (apply `other` first). Mixed signedness is
    /// resolved by extending the unsigned factor to `[±n]`.
    pub fn compose(&self, other: &Permutation) -> Permutation {
        assert_eq!(self.n, other.n, "composition of permutations of different sizes");
        let signed = self.signed || other.signed;
        let a = self.lift_to(signed);
        let b = other.lift_to(signed);
        let images = b.images.iter().map(|&k| a.apply(k)).collect();
        Permutation {
            n: self.n,
            signed,
            images,
        }
    }

    pub fn inverse(&self) -> Permutation {
        let mut images = vec![0; self.images.len()];
        for s in 0..self.images.len() {
            images[self.slot(self.images[s])] = self.point_at(s);
        }
        Permutation {
            n: self.n,
            signed: self.signed,
            images,
        }
    }

    /// `σ⁻¹ ∘ self ∘ σ`.
    pub fn conjugate_by(&self, sigma: &Permutation) -> Permutation {
        sigma.inverse().compose(self).compose(sigma)
    }

    pub fn is_identity(&self) -> bool {
        self.points().all(|k| self.apply(k) == k)
    }

    /// Cycles, each rotated to start at its leader, sorted by leader.
    pub fn cycles(&self) -> Vec<Vec<i32>> {
        let mut seen = vec![false; self.images.len()];
        let mut cycles = Vec::new();
        for s in 0..self.images.len() {
            if seen[s] {
                continue;
            }
            let start = self.point_at(s);
            let mut cycle = Vec::new();
            let mut k = start;
            loop {
                seen[self.slot(k)] = true;
                cycle.push(k);
                k = self.apply(k);
                if k == start {
                    break;
                }
            }
            cycles.push(canonical_cycle(cycle));
        }
        cycles.sort_by(|a, b| leader_cmp(a[0], b[0]));
        cycles
    }

    pub fn count_cycles(&self) -> usize {
        self.cycles().len()
    }

    pub fn cycle_type(&self) -> CycleType {
        CycleType::new(self.cycles().iter().map(Vec::len).collect())
    }
}

impl fmt::Debug for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in self.cycles() {
            let parts: Vec<String> = c.iter().map(i32::to_string).collect();
            write!(f, "({})", parts.join(","))?;
        }
        Ok(())
    }
}

/// Rotates a cycle so its leader comes first.
pub fn canonical_cycle(mut cycle: Vec<i32>) -> Vec<i32> {
    if let Some(pos) = (0..cycle.len()).min_by(|&a, &b| leader_cmp(cycle[a], cycle[b])) {
        cycle.rotate_left(pos);
    }
    cycle
}

pub fn cycle_decomposition(sigma: &Permutation) -> Vec<Vec<i32>> {
    sigma.cycles()
}

pub fn count_cycles(sigma: &Permutation) -> usize {
    sigma.count_cycles()
}

/// An integer partition of `n`, stored with parts in non-increasing order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CycleType(Vec<usize>);

impl CycleType {
    pub fn new(mut parts: Vec<usize>) -> Self {
        parts.retain(|&p| p > 0);
        parts.sort_unstable_by(|a, b| b.cmp(a));
        CycleType(parts)
    }

    pub fn parts(&self) -> &[usize] {
        &self.0
    }

    pub fn order(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn num_cycles(&self) -> usize {
        self.0.len()
    }

    /// A permutation of `[n]` with this cycle type: consecutive blocks as cycles.
    pub fn representative(&self) -> Permutation {
        let mut cycles = Vec::new();
        let mut next = 1;
        for &len in &self.0 {
            cycles.push((next..next + len as i32).collect());
            next += len as i32;
        }
        Permutation::from_cycles(self.order(), false, &cycles).expect("valid cycles")
    }

    /// All integer partitions of `n`, in reverse lexicographic order.
    pub fn all(n: usize) -> Vec<CycleType> {
        fn rec(rem: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<CycleType>) {
            if rem == 0 {
                out.push(CycleType(cur.clone()));
                return;
            }
            for p in (1..=rem.min(max)).rev() {
                cur.push(p);
                rec(rem - p, p, cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        rec(n, n, &mut Vec::new(), &mut out);
        out
    }
}

impl fmt::Display for CycleType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(usize::to_string).collect();
        write!(f, "<{}>", parts.join(","))
    }
}

pub fn catalan(n: usize) -> u64 {
    let mut c: u64 = 1;
    for k in 0..n as u64 {
        c = c * 2 * (2 * k + 1) / (k + 2);
    }
    c
}

fn factorial(n: usize) -> i64 {
    (1..=n as i64).product()
}

/// `Möb(σ) = ∏_c (-1)^{|c|-1} Cat(|c|-1)` over the cycles of `σ`.
pub fn moebius_perm(sigma: &Permutation) -> i64 {
    moebius_cycle_type(&sigma.cycle_type())
}

pub fn moebius_cycle_type(ct: &CycleType) -> i64 {
    ct.parts()
        .iter()
        .map(|&len| {
            let c = catalan(len - 1) as i64;
            if len % 2 == 0 {
                -c
            } else {
                c
            }
        })
        .product()
}

/// `µ(π, 1_R)` on the lattice of all set partitions: `(-1)^{#π-1} (#π-1)!`.
pub fn moebius_partition_to_top(pi: &SetPartition) -> i64 {
    let b = pi.num_blocks();
    if b == 0 {
        return 1;
    }
    let f = factorial(b - 1);
    if (b - 1).is_multiple_of(2) {
        f
    } else {
        -f
    }
}

/// A perfect matching of `[n]` or `[±n]`, held both as sorted blocks and as
/// the corresponding fixed-point-free involution.
#[derive(Clone)]
pub struct Pairing {
    blocks: Vec<(i32, i32)>,
    perm: Permutation,
}

impl PartialEq for Pairing {
    fn eq(&self, other: &Self) -> bool {
        self.blocks == other.blocks && self.perm.signed == other.perm.signed
    }
}

impl Eq for Pairing {}

impl std::hash::Hash for Pairing {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.blocks.hash(state);
        self.perm.signed.hash(state);
    }
}

impl fmt::Debug for Pairing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Pairing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (a, b)) in self.blocks.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "({a},{b})")?;
        }
        write!(f, "}}")
    }
}

impl Pairing {
    pub fn new(n: usize, signed: bool, pairs: &[(i32, i32)]) -> Result<Self> {
        let cycles: Vec<Vec<i32>> = pairs.iter().map(|&(a, b)| vec![a, b]).collect();
        let perm = Permutation::from_cycles(n, signed, &cycles)?;
        Self::from_involution(perm)
    }

    pub fn from_involution(perm: Permutation) -> Result<Self> {
        let mut blocks = Vec::new();
        for k in perm.points() {
            let l = perm.apply(k);
            if l == k || perm.apply(l) != k {
                return Err(Error::InvalidInput(format!(
                    "{perm} is not a fixed-point-free involution"
                )));
            }
            if leader_cmp(k, l) == Ordering::Less {
                blocks.push((k, l));
            }
        }
        blocks.sort_by(|a, b| leader_cmp(a.0, b.0));
        Ok(Pairing { blocks, perm })
    }

    /// The pairing `δ: k ↦ -k` on `[±n]`.
    pub fn delta(n: usize) -> Self {
        Self::from_involution(Permutation::delta(n)).expect("delta is a pairing")
    }

    pub fn blocks(&self) -> &[(i32, i32)] {
        &self.blocks
    }

    pub fn as_permutation(&self) -> &Permutation {
        &self.perm
    }

    pub fn size(&self) -> usize {
        self.perm.n
    }

    pub fn is_signed(&self) -> bool {
        self.perm.signed
    }

    pub fn partner(&self, k: i32) -> i32 {
        self.perm.apply(k)
    }

    pub fn is_alpha_compatible(&self, alpha: &[i8]) -> bool {
        !self.perm.signed
            && alpha.len() == self.perm.n
            && self
                .blocks
                .iter()
                .all(|&(a, b)| alpha[a as usize - 1] == -alpha[b as usize - 1])
    }

    pub fn to_set_partition(&self) -> Option<SetPartition> {
        if self.perm.signed {
            return None;
        }
        let blocks = self
            .blocks
            .iter()
            .map(|&(a, b)| vec![a as usize, b as usize])
            .collect();
        SetPartition::new(self.perm.n, blocks).ok()
    }
}

fn pair_up(points: &[i32], compatible: &dyn Fn(i32, i32) -> bool) -> Vec<Vec<(i32, i32)>> {
    if points.is_empty() {
        return vec![Vec::new()];
    }
    let first = points[0];
    let mut out = Vec::new();
    for j in 1..points.len() {
        if !compatible(first, points[j]) {
            continue;
        }
        let rest: Vec<i32> = points[1..]
            .iter()
            .enumerate()
            .filter(|&(idx, _)| idx + 1 != j)
            .map(|(_, &k)| k)
            .collect();
        for mut tail in pair_up(&rest, compatible) {
            tail.insert(0, (first, points[j]));
            out.push(tail);
        }
    }
    out
}

/// All pairings of `[n]` (or `[±n]` when `signed`); empty when the domain is odd.
pub fn enumerate_pairings(n: usize, signed: bool) -> Result<Vec<Pairing>> {
    let size = if signed { 2 * n } else { n };
    if size > PAIRING_CAP {
        return Err(Error::Capacity {
            what: "pairing enumeration",
            size,
            cap: PAIRING_CAP,
        });
    }
    if size % 2 == 1 {
        return Ok(Vec::new());
    }
    let points: Vec<i32> = if signed {
        Permutation::identity_signed(n).points().collect()
    } else {
        (1..=n as i32).collect()
    };
    pair_up(&points, &|_, _| true)
        .into_iter()
        .map(|pairs| Pairing::new(n, signed, &pairs))
        .collect()
}

/// Pairings `p` of `[n]` with `α_k = -α_l` whenever `p(k) = l`.
pub fn enumerate_alpha_pairings(alpha: &[i8]) -> Result<Vec<Pairing>> {
    let n = alpha.len();
    if n > PAIRING_CAP {
        return Err(Error::Capacity {
            what: "pairing enumeration",
            size: n,
            cap: PAIRING_CAP,
        });
    }
    if alpha.iter().any(|&a| a != 1 && a != -1) {
        return Err(Error::InvalidInput("sign sequence must be ±1".into()));
    }
    let plus = alpha.iter().filter(|&&a| a == 1).count();
    if 2 * plus != n {
        return Ok(Vec::new());
    }
    let points: Vec<i32> = (1..=n as i32).collect();
    let compat = |a: i32, b: i32| alpha[a as usize - 1] == -alpha[b as usize - 1];
    pair_up(&points, &compat)
        .into_iter()
        .map(|pairs| Pairing::new(n, false, &pairs))
        .collect()
}

/// The cycles of `p ∘ q` grouped into mate pairs `(c, c')` with
/// `c' = q c⁻¹ q`. The first entry of each pair is the cycle holding the
/// pair's leader.
pub fn pq_cycle_pairs(p: &Pairing, q: &Pairing) -> Result<Vec<(Vec<i32>, Vec<i32>)>> {
    if p.size() != q.size() || p.is_signed() != q.is_signed() {
        return Err(Error::DimensionMismatch {
            expected: p.size(),
            found: q.size(),
        });
    }
    let pq = p.perm.compose(&q.perm);
    let cycles = pq.cycles();
    let index: HashMap<Vec<i32>, usize> = cycles
        .iter()
        .enumerate()
        .map(|(i, c)| (c.clone(), i))
        .collect();
    let mut used = vec![false; cycles.len()];
    let mut out = Vec::new();
    for (i, c) in cycles.iter().enumerate() {
        if used[i] {
            continue;
        }
        let mate: Vec<i32> = canonical_cycle(c.iter().rev().map(|&k| q.partner(k)).collect());
        let j = *index.get(&mate).ok_or_else(|| {
            Error::Internal(format!("mate {mate:?} of {c:?} is not a cycle of pq"))
        })?;
        if j == i || used[j] {
            return Err(Error::Internal(format!("cycle {c:?} has no distinct mate")));
        }
        // The mate law must be symmetric: q c'^{-1} q = c.
        let back = canonical_cycle(mate.iter().rev().map(|&k| q.partner(k)).collect());
        if &back != c {
            return Err(Error::Internal(format!("mate law fails for {c:?}")));
        }
        used[i] = true;
        used[j] = true;
        // cycles are sorted by leader, so `c` already holds the smaller leader
        out.push((c.clone(), mate));
    }
    Ok(out)
}

/// For a pairing `p` of `[±n]`, the permutation `π(p) ∈ S_n` and sign vector
/// `ε` read off the representative cycles of `p δ`.
pub fn pi_epsilon(p: &Pairing) -> Result<(Permutation, Vec<i8>)> {
    if !p.is_signed() {
        return Err(Error::InvalidInput("pi_epsilon needs a pairing of [±n]".into()));
    }
    let n = p.size();
    let pairs = pq_cycle_pairs(p, &Pairing::delta(n))?;
    let mut eps = vec![0i8; n];
    let mut cycles = Vec::with_capacity(pairs.len());
    for (rep, _) in pairs {
        let mut cyc = Vec::with_capacity(rep.len());
        for l in rep {
            let j = l.unsigned_abs() as usize;
            eps[j - 1] = if l > 0 { 1 } else { -1 };
            cyc.push(j as i32);
        }
        cycles.push(cyc);
    }
    if eps.contains(&0) {
        return Err(Error::Internal("representatives do not cover [n]".into()));
    }
    Ok((Permutation::from_cycles(n, false, &cycles)?, eps))
}

/// `σ̂(i) = 2n + 1 - σ(i)`: a pairing of `[2n]` matching `[n]` with `[n+1, 2n]`.
pub fn hat(sigma: &Permutation) -> Pairing {
    assert!(!sigma.is_signed(), "hat takes a permutation of [n]");
    let n = sigma.size() as i32;
    let pairs: Vec<(i32, i32)> = (1..=n).map(|i| (i, 2 * n + 1 - sigma.apply(i))).collect();
    Pairing::new(2 * n as usize, false, &pairs).expect("hat is a pairing")
}

/// A partition of `[n]` into nonempty blocks; blocks sorted internally and by
/// their minimum.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SetPartition {
    n: usize,
    blocks: Vec<Vec<usize>>,
}

impl fmt::Debug for SetPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for SetPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for b in &self.blocks {
            let parts: Vec<String> = b.iter().map(usize::to_string).collect();
            write!(f, "({})", parts.join(","))?;
        }
        write!(f, "}}")
    }
}

impl SetPartition {
    pub fn new(n: usize, mut blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; n];
        for b in &mut blocks {
            if b.is_empty() {
                return Err(Error::InvalidInput("empty block".into()));
            }
            b.sort_unstable();
            for &k in b.iter() {
                if k == 0 || k > n || seen[k - 1] {
                    return Err(Error::InvalidInput(format!("bad or repeated point {k}")));
                }
                seen[k - 1] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidInput("blocks do not cover the ground set".into()));
        }
        blocks.sort();
        Ok(SetPartition { n, blocks })
    }

    /// `1_n`, the one-block partition.
    pub fn top(n: usize) -> Self {
        let blocks = if n == 0 { Vec::new() } else { vec![(1..=n).collect()] };
        SetPartition { n, blocks }
    }

    /// `0_n`, all singletons.
    pub fn bottom(n: usize) -> Self {
        SetPartition {
            n,
            blocks: (1..=n).map(|k| vec![k]).collect(),
        }
    }

    /// From a restricted growth string (`labels[k]` is the block of point `k+1`).
    pub fn from_labels(labels: &[usize]) -> Self {
        let count = labels.iter().copied().max().map_or(0, |m| m + 1);
        let mut blocks = vec![Vec::new(); count];
        for (k, &l) in labels.iter().enumerate() {
            blocks[l].push(k + 1);
        }
        blocks.retain(|b| !b.is_empty());
        blocks.sort();
        SetPartition {
            n: labels.len(),
            blocks,
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Block label for each point `1..=n`.
    pub fn labels(&self) -> Vec<usize> {
        let mut labels = vec![0; self.n];
        for (i, b) in self.blocks.iter().enumerate() {
            for &k in b {
                labels[k - 1] = i;
            }
        }
        labels
    }

    pub fn is_finer_than(&self, other: &SetPartition) -> bool {
        let lab = other.labels();
        self.blocks
            .iter()
            .all(|b| b.iter().all(|&k| lab[k - 1] == lab[b[0] - 1]))
    }

    pub fn is_non_crossing(&self) -> bool {
        let lab = self.labels();
        let n = self.n;
        for a in 0..n {
            for b in a + 1..n {
                for c in b + 1..n {
                    for d in c + 1..n {
                        if lab[a] == lab[c] && lab[b] == lab[d] && lab[a] != lab[b] {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }
}

/// Finest common coarsening of two partitions of the same ground set.
pub fn join(pi: &SetPartition, rho: &SetPartition) -> Result<SetPartition> {
    if pi.n != rho.n {
        return Err(Error::DimensionMismatch {
            expected: pi.n,
            found: rho.n,
        });
    }
    let mut parent: Vec<usize> = (0..pi.n).collect();
    fn find(parent: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while parent[r] != r {
            r = parent[r];
        }
        let mut y = x;
        while parent[y] != r {
            let next = parent[y];
            parent[y] = r;
            y = next;
        }
        r
    }
    for b in pi.blocks.iter().chain(rho.blocks.iter()) {
        for w in b.windows(2) {
            let (ra, rb) = (find(&mut parent, w[0] - 1), find(&mut parent, w[1] - 1));
            if ra != rb {
                parent[ra] = rb;
            }
        }
    }
    let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
    for k in 0..pi.n {
        let r = find(&mut parent, k);
        groups.entry(r).or_default().push(k + 1);
    }
    SetPartition::new(pi.n, groups.into_values().collect())
}

/// Restriction of `pi` to the points in `subset`, relabelled as the same
/// integers (the result lives on `subset`, given as sorted blocks).
pub fn restrict(pi: &SetPartition, subset: &[usize]) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = pi
        .blocks
        .iter()
        .map(|b| b.iter().copied().filter(|k| subset.contains(k)).collect::<Vec<_>>())
        .filter(|b: &Vec<usize>| !b.is_empty())
        .collect();
    out.sort();
    out
}

fn growth_strings(n: usize, max_block: Option<usize>) -> Vec<SetPartition> {
    fn rec(
        labels: &mut Vec<usize>,
        sizes: &mut Vec<usize>,
        n: usize,
        max_block: Option<usize>,
        out: &mut Vec<SetPartition>,
    ) {
        if labels.len() == n {
            out.push(SetPartition::from_labels(labels));
            return;
        }
        for l in 0..=sizes.len() {
            if l == sizes.len() {
                sizes.push(0);
            }
            if max_block.is_some_and(|m| sizes[l] >= m) {
                continue;
            }
            sizes[l] += 1;
            labels.push(l);
            rec(labels, sizes, n, max_block, out);
            labels.pop();
            sizes[l] -= 1;
            if sizes[l] == 0 {
                sizes.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut Vec::new(), n, max_block, &mut out);
    out
}

fn check_partition_cap(n: usize) -> Result<()> {
    if n > PARTITION_CAP {
        return Err(Error::Capacity {
            what: "set partition enumeration",
            size: n,
            cap: PARTITION_CAP,
        });
    }
    Ok(())
}

/// All `Bell(n)` partitions of `[n]`.
pub fn enumerate_partitions(n: usize) -> Result<Vec<SetPartition>> {
    check_partition_cap(n)?;
    Ok(growth_strings(n, None))
}

/// Partitions of `[n]` whose blocks have at most two elements.
pub fn enumerate_partitions_max2(n: usize) -> Result<Vec<SetPartition>> {
    check_partition_cap(n)?;
    Ok(growth_strings(n, Some(2)))
}

/// Non-crossing partitions of `[n]`; `n = 0` yields the empty partition.
pub fn enumerate_nc_partitions(n: usize) -> Result<Vec<SetPartition>> {
    Ok(enumerate_partitions(n)?
        .into_iter()
        .filter(SetPartition::is_non_crossing)
        .collect())
}

/// Non-crossing pairings of `[n]`.
pub fn enumerate_nc_pair_partitions(n: usize) -> Result<Vec<SetPartition>> {
    Ok(enumerate_pairings(n, false)?
        .iter()
        .filter_map(Pairing::to_set_partition)
        .filter(SetPartition::is_non_crossing)
        .collect())
}

/// Every permutation of `[n]`, in lexicographic order of image vectors.
pub fn all_permutations(n: usize) -> Vec<Permutation> {
    fn rec(cur: &mut Vec<i32>, used: &mut Vec<bool>, out: &mut Vec<Permutation>) {
        let n = used.len();
        if cur.len() == n {
            out.push(Permutation::from_images(cur.clone()).expect("bijection"));
            return;
        }
        for k in 0..n {
            if !used[k] {
                used[k] = true;
                cur.push(k as i32 + 1);
                rec(cur, used, out);
                cur.pop();
                used[k] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}
