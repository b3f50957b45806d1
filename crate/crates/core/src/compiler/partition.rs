//! Kernighan-Lin graph partitioning, extended to k parts by recursive
//! bisection.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::circuit::QuantumCircuit;
use crate::error::{Error, Result};

/// Restarts of the full recursive partition; the lowest cut is kept.
pub const RESTARTS: usize = 10;

/// Dense symmetric weight matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightMatrix {
    n: usize,
    w: Vec<u32>,
}

impl WeightMatrix {
    pub fn new(n: usize) -> Self {
        Self { n, w: vec![0; n * n] }
    }

    /// Two-qubit gate counts between logical qubits.
    pub fn from_circuit(circuit: &QuantumCircuit) -> Self {
        let mut m = Self::new(circuit.n_qubits());
        for ((a, b), c) in circuit.interaction_weights() {
            m.add(a, b, c);
        }
        m
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.w[i * self.n + j]
    }

    pub fn add(&mut self, i: usize, j: usize, c: u32) {
        if i != j {
            self.w[i * self.n + j] += c;
            self.w[j * self.n + i] += c;
        }
    }

    /// Aggregates vertex weights into part weights.
    pub fn quotient(&self, part: &[usize], parts: usize) -> WeightMatrix {
        let mut q = WeightMatrix::new(parts);
        for i in 0..self.n {
            for j in i + 1..self.n {
                let c = self.get(i, j);
                if c > 0 && part[i] != part[j] {
                    q.add(part[i], part[j], c);
                }
            }
        }
        q
    }
}

/// Total weight of edges whose endpoints lie in different parts.
pub fn cut_weight(w: &WeightMatrix, part: &[usize]) -> u64 {
    let mut cut = 0u64;
    for i in 0..w.n {
        for j in i + 1..w.n {
            if part[i] != part[j] {
                cut += u64::from(w.get(i, j));
            }
        }
    }
    cut
}

/// Refines a two-way split of `verts` in place (`side[v]` is `false` for
/// part A, `true` for part B). Each pass performs tentative swaps of the
/// best unlocked pair and keeps the best positive-gain prefix; passes stop
/// once no prefix gains. Returns the cut weight after every pass, starting
/// with the initial cut.
pub fn kl_refine(w: &WeightMatrix, verts: &[usize], side: &mut [bool]) -> Vec<u64> {
    let local_cut = |side: &[bool]| -> u64 {
        let mut c = 0u64;
        for (x, &i) in verts.iter().enumerate() {
            for &j in &verts[x + 1..] {
                if side[i] != side[j] {
                    c += u64::from(w.get(i, j));
                }
            }
        }
        c
    };
    let mut history = vec![local_cut(side)];
    loop {
        // D(v) = external - internal weight within `verts`.
        let mut d: Vec<i64> = verts
            .iter()
            .map(|&v| {
                verts
                    .iter()
                    .map(|&u| {
                        let c = i64::from(w.get(v, u));
                        if side[u] == side[v] {
                            -c
                        } else {
                            c
                        }
                    })
                    .sum()
            })
            .collect();
        let mut locked = vec![false; verts.len()];
        let mut swaps = Vec::new();
        let mut gains = Vec::new();
        let mut trial = side.to_vec();
        loop {
            let mut best: Option<(i64, usize, usize)> = None;
            for (x, &a) in verts.iter().enumerate() {
                if locked[x] || trial[a] {
                    continue;
                }
                for (y, &b) in verts.iter().enumerate() {
                    if locked[y] || !trial[b] {
                        continue;
                    }
                    let g = d[x] + d[y] - 2 * i64::from(w.get(a, b));
                    if best.is_none_or(|(bg, _, _)| g > bg) {
                        best = Some((g, x, y));
                    }
                }
            }
            let Some((g, x, y)) = best else { break };
            let (a, b) = (verts[x], verts[y]);
            locked[x] = true;
            locked[y] = true;
            trial[a] = true;
            trial[b] = false;
            for (z, &v) in verts.iter().enumerate() {
                if locked[z] {
                    continue;
                }
                let wa = i64::from(w.get(v, a));
                let wb = i64::from(w.get(v, b));
                // a moved to B, b moved to A.
                if trial[v] {
                    d[z] += -2 * wa + 2 * wb;
                } else {
                    d[z] += 2 * wa - 2 * wb;
                }
            }
            swaps.push((a, b));
            gains.push(g);
        }
        let mut best_k = 0;
        let mut best_sum = 0i64;
        let mut sum = 0i64;
        for (k, g) in gains.iter().enumerate() {
            sum += g;
            if sum > best_sum {
                best_sum = sum;
                best_k = k + 1;
            }
        }
        if best_k == 0 {
            return history;
        }
        for &(a, b) in &swaps[..best_k] {
            side[a] = true;
            side[b] = false;
        }
        history.push(local_cut(side));
    }
}

fn part_sizes(n: usize, k: usize) -> Vec<usize> {
    (0..k).map(|i| n / k + usize::from(i < n % k)).collect()
}

fn bisect_into<R: Rng + ?Sized>(
    w: &WeightMatrix,
    verts: &mut [usize],
    sizes: &[usize],
    first_label: usize,
    part: &mut [usize],
    side: &mut [bool],
    rng: &mut R,
) {
    if sizes.len() == 1 {
        for &v in verts.iter() {
            part[v] = first_label;
        }
        return;
    }
    let k1 = sizes.len() / 2;
    let left: usize = sizes[..k1].iter().sum();
    verts.shuffle(rng);
    for (x, &v) in verts.iter().enumerate() {
        side[v] = x >= left;
    }
    kl_refine(w, verts, side);
    verts.sort_by_key(|&v| (side[v], v));
    let (a, b) = verts.split_at_mut(left);
    bisect_into(w, a, &sizes[..k1], first_label, part, side, rng);
    bisect_into(w, b, &sizes[k1..], first_label + k1, part, side, rng);
}

/// Relabels parts in order of their smallest member.
fn canonical(part: &[usize], k: usize) -> Vec<usize> {
    let mut map = vec![usize::MAX; k];
    let mut next = 0;
    for &p in part {
        if map[p] == usize::MAX {
            map[p] = next;
            next += 1;
        }
    }
    part.iter().map(|&p| map[p]).collect()
}

/// Splits the weighted vertex set into `k` balanced parts (sizes differ by
/// at most one), minimizing cut weight over [`RESTARTS`] randomized runs.
pub fn partition_graph<R: Rng + ?Sized>(w: &WeightMatrix, k: usize, rng: &mut R) -> Vec<usize> {
    let n = w.size();
    if k <= 1 || n == 0 {
        return vec![0; n];
    }
    let sizes = part_sizes(n, k);
    let mut best: Option<(u64, Vec<usize>)> = None;
    for _ in 0..RESTARTS {
        let mut verts: Vec<usize> = (0..n).collect();
        let mut part = vec![0; n];
        let mut side = vec![false; n];
        bisect_into(w, &mut verts, &sizes, 0, &mut part, &mut side, rng);
        let part = canonical(&part, k);
        let cut = cut_weight(w, &part);
        if best.as_ref().is_none_or(|(c, p)| cut < *c || (cut == *c && part < *p)) {
            best = Some((cut, part));
        }
    }
    best.unwrap().1
}

/// Maps logical qubits to `ceil(n / capacity)` QPUs, labelled in order of
/// their smallest qubit.
pub fn partition_circuit<R: Rng + ?Sized>(
    circuit: &QuantumCircuit,
    qpu_capacity: usize,
    qpu_count: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let n = circuit.n_qubits();
    if qpu_capacity == 0 {
        return Err(Error::param("qpu_capacity", "must be at least 1"));
    }
    let k = n.div_ceil(qpu_capacity);
    if k > qpu_count {
        return Err(Error::Capacity {
            needed: n,
            available: qpu_count * qpu_capacity,
        });
    }
    Ok(partition_graph(&WeightMatrix::from_circuit(circuit), k, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{random_matching_circuit, Gate};
    use crate::rng::stream;
    use proptest::prelude::*;

    fn brute_bisection(w: &WeightMatrix) -> u64 {
        let n = w.size();
        let mut best = u64::MAX;
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != n / 2 {
                continue;
            }
            let part: Vec<usize> = (0..n).map(|i| ((mask >> i) & 1) as usize).collect();
            best = best.min(cut_weight(w, &part));
        }
        best
    }

    #[test]
    fn disjoint_clusters_zero_cut() {
        let mut c = QuantumCircuit::new(4);
        for _ in 0..10 {
            c.two(0, 1).unwrap();
            c.two(2, 3).unwrap();
        }
        let mut rng = stream(1, "partition", 0);
        let p = partition_circuit(&c, 2, 2, &mut rng).unwrap();
        assert_eq!(p, vec![0, 0, 1, 1]);
    }

    #[test]
    fn capacity_one_is_identity() {
        let c = QuantumCircuit::from_gates(
            6,
            [(0, 1), (3, 2), (5, 4), (0, 3), (1, 4), (2, 0)]
                .into_iter()
                .map(|(control, target)| Gate::Two { control, target })
                .collect(),
        )
        .unwrap();
        let mut rng = stream(1, "partition", 0);
        let p = partition_circuit(&c, 1, 6, &mut rng).unwrap();
        assert_eq!(p, (0..6).collect::<Vec<_>>());
        assert_eq!(cut_weight(&WeightMatrix::from_circuit(&c), &p), 6);
    }

    #[test]
    fn insufficient_capacity() {
        let c = QuantumCircuit::new(9);
        let mut rng = stream(1, "partition", 0);
        assert_eq!(
            partition_circuit(&c, 4, 2, &mut rng),
            Err(Error::Capacity {
                needed: 9,
                available: 8
            })
        );
    }

    #[test]
    fn matches_brute_force_on_small_circuits() {
        let mut hits = 0;
        for seed in 0..100 {
            let mut rng = stream(seed, "circuit", 0);
            let c = random_matching_circuit(8, 5, &mut rng);
            let w = WeightMatrix::from_circuit(&c);
            let opt = brute_bisection(&w);
            let mut rng = stream(seed, "partition", 0);
            let p = partition_circuit(&c, 4, 2, &mut rng).unwrap();
            let cut = cut_weight(&w, &p);
            assert!(cut >= opt);
            hits += usize::from(cut == opt);
        }
        assert!(hits >= 90, "{hits}");
    }

    #[test]
    fn k_way_is_balanced() {
        let mut rng = stream(4, "circuit", 0);
        let c = random_matching_circuit(23, 6, &mut rng);
        let p = partition_circuit(&c, 5, 8, &mut rng).unwrap();
        let mut sizes = [0usize; 5];
        for &x in &p {
            sizes[x] += 1;
        }
        assert_eq!(p.iter().max(), Some(&4));
        assert!(sizes.iter().all(|&s| s == 4 || s == 5));
        assert_eq!(p[0], 0);
    }

    proptest! {
        #[test]
        fn refinement_never_increases_cut(seed in any::<u64>(), n in 4usize..14) {
            let mut rng = stream(seed, "kl", 0);
            let c = random_matching_circuit(n, 4, &mut rng);
            let w = WeightMatrix::from_circuit(&c);
            let verts: Vec<usize> = (0..n).collect();
            let mut side: Vec<bool> = (0..n).map(|i| i >= n / 2).collect();
            let history = kl_refine(&w, &verts, &mut side);
            for pair in history.windows(2) {
                prop_assert!(pair[1] < pair[0]);
            }
            let part: Vec<usize> = side.iter().map(|&s| usize::from(s)).collect();
            prop_assert_eq!(*history.last().unwrap(), cut_weight(&w, &part));
            prop_assert_eq!(side.iter().filter(|&&s| s).count(), n - n / 2);
        }
    }
}
