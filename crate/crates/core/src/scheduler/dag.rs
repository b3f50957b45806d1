use serde::{Deserialize, Serialize};

use crate::circuit::QuantumCircuit;

/// Gate dependency graph: an edge runs from each gate to the next gate on
/// every qubit it touches.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircuitDag {
    n_qubits: usize,
    /// Qubits of each gate; the second is `None` for one-qubit gates.
    operands: Vec<(usize, Option<usize>)>,
    succ: Vec<Vec<u32>>,
    pred_count: Vec<u32>,
    descendants: Vec<u32>,
}

/// Working-set budget for descendant counting, in 64-bit words.
const BITSET_BUDGET: usize = 1 << 23;

impl CircuitDag {
    pub fn build(circuit: &QuantumCircuit) -> Self {
        let n = circuit.gates().len();
        let mut last: Vec<Option<u32>> = vec![None; circuit.n_qubits()];
        let mut succ = vec![Vec::new(); n];
        let mut pred_count = vec![0u32; n];
        let mut operands = Vec::with_capacity(n);
        for (g, gate) in circuit.gates().iter().enumerate() {
            let qs: Vec<usize> = gate.qubits().collect();
            operands.push((qs[0], qs.get(1).copied()));
            let mut preds: Vec<u32> = qs.iter().filter_map(|&q| last[q]).collect();
            preds.dedup();
            for p in preds {
                succ[p as usize].push(g as u32);
                pred_count[g] += 1;
            }
            for q in qs {
                last[q] = Some(g as u32);
            }
        }
        let descendants = count_descendants(&succ, BITSET_BUDGET);
        Self {
            n_qubits: circuit.n_qubits(),
            operands,
            succ,
            pred_count,
            descendants,
        }
    }

    pub fn len(&self) -> usize {
        self.operands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operands.is_empty()
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn operands(&self, gate: usize) -> (usize, Option<usize>) {
        self.operands[gate]
    }

    pub fn successors(&self, gate: usize) -> &[u32] {
        &self.succ[gate]
    }

    pub fn in_degree(&self, gate: usize) -> u32 {
        self.pred_count[gate]
    }

    /// Number of gates reachable from `gate`.
    pub fn descendants(&self, gate: usize) -> u32 {
        self.descendants[gate]
    }

    /// Gates with no predecessors, ascending.
    pub fn frontier(&self) -> Vec<usize> {
        (0..self.len()).filter(|&g| self.pred_count[g] == 0).collect()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.succ
            .iter()
            .enumerate()
            .flat_map(|(g, s)| s.iter().map(move |&t| (g, t as usize)))
    }

    /// Kahn's algorithm, smallest ready gate first.
    pub fn topological_order(&self) -> Vec<usize> {
        let mut indeg = self.pred_count.clone();
        let mut ready: std::collections::BinaryHeap<std::cmp::Reverse<usize>> =
            self.frontier().into_iter().map(std::cmp::Reverse).collect();
        let mut order = Vec::with_capacity(self.len());
        while let Some(std::cmp::Reverse(g)) = ready.pop() {
            order.push(g);
            for &s in &self.succ[g] {
                indeg[s as usize] -= 1;
                if indeg[s as usize] == 0 {
                    ready.push(std::cmp::Reverse(s as usize));
                }
            }
        }
        order
    }
}

/// Reachability counts. Gate ids are already a topological order, so each
/// block of target gates is handled by one backward sweep with bitsets
/// restricted to that block.
fn count_descendants(succ: &[Vec<u32>], budget: usize) -> Vec<u32> {
    let n = succ.len();
    let mut counts = vec![0u32; n];
    if n == 0 {
        return counts;
    }
    let total_words = n.div_ceil(64);
    let words = total_words.min((budget / n).max(1));
    let block = words * 64;
    let mut bits = vec![0u64; n * words];
    let mut start = 0;
    while start < n {
        let end = (start + block).min(n);
        bits[..end * words].fill(0);
        for g in (0..end).rev() {
            let (head, tail) = bits.split_at_mut((g + 1) * words);
            let row = &mut head[g * words..];
            for &s in &succ[g] {
                let s = s as usize;
                if s >= end {
                    continue;
                }
                let srow = &tail[(s - g - 1) * words..(s - g) * words];
                for (a, b) in row.iter_mut().zip(srow) {
                    *a |= *b;
                }
                if s >= start {
                    let off = s - start;
                    row[off / 64] |= 1 << (off % 64);
                }
            }
            counts[g] += row.iter().map(|w| w.count_ones()).sum::<u32>();
        }
        start = end;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::random_matching_circuit;
    use crate::rng::stream;
    use proptest::prelude::*;
    use std::collections::{BTreeSet, VecDeque};

    fn six_qubit_example() -> QuantumCircuit {
        let mut c = QuantumCircuit::new(6);
        for (a, b) in [(1, 2), (4, 3), (6, 5), (1, 4), (2, 5), (3, 1)] {
            c.two(a - 1, b - 1).unwrap();
        }
        c
    }

    fn reach_bfs(dag: &CircuitDag, g: usize) -> usize {
        let mut seen = BTreeSet::new();
        let mut queue: VecDeque<usize> = dag.successors(g).iter().map(|&s| s as usize).collect();
        while let Some(x) = queue.pop_front() {
            if seen.insert(x) {
                queue.extend(dag.successors(x).iter().map(|&s| s as usize));
            }
        }
        seen.len()
    }

    #[test]
    fn example_frontier_and_edges() {
        let dag = CircuitDag::build(&six_qubit_example());
        assert_eq!(dag.frontier(), vec![0, 1, 2]);
        let edges: Vec<_> = dag.edges().collect();
        assert_eq!(edges, vec![(0, 3), (0, 4), (1, 3), (1, 5), (2, 4), (3, 5)]);
        assert_eq!(
            (0..6).map(|g| dag.descendants(g)).collect::<Vec<_>>(),
            vec![3, 2, 1, 1, 0, 0]
        );
    }

    #[test]
    fn one_qubit_chains() {
        let mut c = QuantumCircuit::new(3);
        for q in [0, 1, 2, 0, 1, 0] {
            c.one(q).unwrap();
        }
        let dag = CircuitDag::build(&c);
        assert_eq!(dag.frontier(), vec![0, 1, 2]);
        assert_eq!(dag.edges().collect::<Vec<_>>(), vec![(0, 3), (1, 4), (3, 5)]);
    }

    #[test]
    fn repeated_pair_single_edge() {
        let mut c = QuantumCircuit::new(2);
        c.two(0, 1).unwrap();
        c.two(1, 0).unwrap();
        let dag = CircuitDag::build(&c);
        assert_eq!(dag.in_degree(1), 1);
        assert_eq!(dag.successors(0), &[1]);
    }

    #[test]
    fn blocked_counts_match_bfs_on_large_dag() {
        let mut rng = stream(9, "circuit", 0);
        let c = random_matching_circuit(60, 60, &mut rng);
        let dag = CircuitDag::build(&c);
        for g in (0..dag.len()).step_by(97) {
            assert_eq!(dag.descendants(g) as usize, reach_bfs(&dag, g));
        }
        // Many narrow blocks give the same counts.
        assert_eq!(count_descendants(&dag.succ, 1), dag.descendants);
        assert_eq!(count_descendants(&dag.succ, 3 * dag.len()), dag.descendants);
    }

    /// Independent Kahn sort that only checks edges against positions.
    fn valid_order(dag: &CircuitDag, order: &[usize]) -> bool {
        let mut pos = vec![usize::MAX; dag.len()];
        for (i, &g) in order.iter().enumerate() {
            pos[g] = i;
        }
        order.len() == dag.len() && dag.edges().all(|(a, b)| pos[a] < pos[b])
    }

    proptest! {
        #[test]
        fn topological_order_is_valid(seed in any::<u64>(), n in 2usize..12, depth in 1usize..8) {
            let mut rng = stream(seed, "circuit", 0);
            let c = random_matching_circuit(n, depth, &mut rng);
            let dag = CircuitDag::build(&c);
            prop_assert!(valid_order(&dag, &dag.topological_order()));
            for g in 0..dag.len() {
                prop_assert_eq!(dag.descendants(g) as usize, reach_bfs(&dag, g));
            }
            // Every qubit's gates form a chain.
            for q in 0..n {
                let on_q: Vec<usize> = (0..dag.len())
                    .filter(|&g| { let (a, b) = dag.operands(g); a == q || b == Some(q) })
                    .collect();
                for w in on_q.windows(2) {
                    prop_assert!(dag.successors(w[0]).contains(&(w[1] as u32)));
                }
            }
        }
    }
}
