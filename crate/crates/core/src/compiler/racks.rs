//! QPU-to-rack assignment as a binary program, solved exactly by branch
//! and bound.
//!
//! Variables are one-hot `x_ir` (QPU `i` in rack `r`) with
//! `Σ_r x_ir = 1` and `Σ_i x_ir ≤ cap_r`. The pair indicator
//! `y_ijr = x_ir ⊕ x_jr` is linearized by
//! `y ≥ x_i - x_j, y ≥ x_j - x_i, y ≤ x_i + x_j, y ≤ 2 - x_i - x_j`;
//! a pair shares a rack exactly when `Σ_r y_ijr = 0`. The objective is
//! `Σ_{i<j} e_ij · (w_intra if same rack else w_inter)`.

use serde::{Deserialize, Serialize};

use super::cost::FidelityTable;
use super::partition::WeightMatrix;
use crate::error::{Error, Result};

/// Instances with at most this many `x` variables are enumerated outright.
pub const EXHAUSTIVE_VARIABLES: usize = 24;
pub const DEFAULT_NODE_LIMIT: u64 = 5_000_000;

const EPS: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RackAssignment {
    pub rack_of: Vec<usize>,
    pub objective: f64,
    /// False when the node limit stopped the search early.
    pub optimal: bool,
    pub nodes: u64,
}

pub fn rack_objective(e: &WeightMatrix, rack_of: &[usize], w_intra: f64, w_inter: f64) -> f64 {
    let mut obj = 0.0;
    for i in 0..rack_of.len() {
        for j in i + 1..rack_of.len() {
            let c = e.get(i, j);
            if c > 0 {
                obj += f64::from(c) * if rack_of[i] == rack_of[j] { w_intra } else { w_inter };
            }
        }
    }
    obj
}

impl RackAssignment {
    /// Checks one-hot rows, rack capacities, and that the XOR variables
    /// derived from `x` satisfy their linearization and reproduce the
    /// objective.
    pub fn verify(&self, e: &WeightMatrix, capacities: &[usize], w_intra: f64, w_inter: f64) -> Result<()> {
        let n = self.rack_of.len();
        let r = capacities.len();
        let x: Vec<Vec<i32>> = self
            .rack_of
            .iter()
            .map(|&k| (0..r).map(|s| i32::from(s == k)).collect())
            .collect();
        for (i, row) in x.iter().enumerate() {
            if row.iter().sum::<i32>() != 1 {
                return Err(Error::param(
                    "x",
                    format!("QPU {i} is not assigned to exactly one rack"),
                ));
            }
        }
        for (s, &cap) in capacities.iter().enumerate() {
            let used = x.iter().filter(|row| row[s] == 1).count();
            if used > cap {
                return Err(Error::Capacity {
                    needed: used,
                    available: cap,
                });
            }
        }
        let mut obj = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                let mut split = 0;
                for (s, (&a, &b)) in x[i].iter().zip(&x[j]).enumerate() {
                    let y = a ^ b;
                    if y < a - b || y < b - a || y > a + b || y > 2 - a - b {
                        return Err(Error::param("y", format!("linearization violated for ({i}, {j}, {s})")));
                    }
                    split += y;
                }
                obj += f64::from(e.get(i, j)) * if split == 0 { w_intra } else { w_inter };
            }
        }
        if (obj - self.objective).abs() > 1e-6 * obj.abs().max(1.0) {
            return Err(Error::param(
                "objective",
                format!("{} != recomputed {obj}", self.objective),
            ));
        }
        Ok(())
    }
}

/// Exhaustive search over all `R^N` assignments.
pub fn brute_force_racks(e: &WeightMatrix, capacities: &[usize], w_intra: f64, w_inter: f64) -> Result<RackAssignment> {
    let n = e.size();
    let r = capacities.len();
    check_capacity(n, capacities)?;
    let mut rack_of = vec![0usize; n];
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut nodes = 0u64;
    loop {
        nodes += 1;
        let mut used = vec![0usize; r];
        for &k in &rack_of {
            used[k] += 1;
        }
        if used.iter().zip(capacities).all(|(u, c)| u <= c) {
            let obj = rack_objective(e, &rack_of, w_intra, w_inter);
            if best.as_ref().is_none_or(|(b, _)| obj < *b - EPS) {
                best = Some((obj, rack_of.clone()));
            }
        }
        // Odometer increment.
        let mut i = 0;
        loop {
            if i == n {
                let (objective, rack_of) = best.expect("capacity checked");
                return Ok(RackAssignment {
                    rack_of,
                    objective,
                    optimal: true,
                    nodes,
                });
            }
            rack_of[i] += 1;
            if rack_of[i] < r {
                break;
            }
            rack_of[i] = 0;
            i += 1;
        }
    }
}

fn check_capacity(n: usize, capacities: &[usize]) -> Result<()> {
    let total: usize = capacities.iter().sum();
    if n > total {
        return Err(Error::Capacity {
            needed: n,
            available: total,
        });
    }
    Ok(())
}

struct Search<'a> {
    e: &'a WeightMatrix,
    caps: &'a [usize],
    w_intra: f64,
    w_inter: f64,
    w_min: f64,
    order: Vec<usize>,
    rack_of: Vec<usize>,
    used: Vec<usize>,
    /// `t[j][r]`: weight from `j` to assigned QPUs in rack `r`.
    t: Vec<Vec<f64>>,
    /// Weight from `j` to all assigned QPUs.
    s: Vec<f64>,
    /// Σ e over pairs of unassigned QPUs.
    free_pairs: f64,
    best: f64,
    best_assign: Vec<usize>,
    nodes: u64,
    limit: u64,
}

impl Search<'_> {
    fn incremental(&self, j: usize, r: usize) -> f64 {
        self.w_inter * self.s[j] + (self.w_intra - self.w_inter) * self.t[j][r]
    }

    fn bound(&self, depth: usize, partial: f64) -> f64 {
        let mut b = partial + self.free_pairs * self.w_min;
        for &j in &self.order[depth..] {
            let mut m = f64::INFINITY;
            for r in 0..self.caps.len() {
                if self.used[r] < self.caps[r] {
                    m = m.min(self.incremental(j, r));
                }
            }
            b += m;
        }
        b
    }

    fn place(&mut self, j: usize, r: usize, sign: f64) {
        for v in 0..self.e.size() {
            let c = f64::from(self.e.get(j, v));
            if c > 0.0 {
                self.t[v][r] += sign * c;
                self.s[v] += sign * c;
            }
        }
    }

    fn free_weight(&self, depth: usize, j: usize) -> f64 {
        self.order[depth + 1..]
            .iter()
            .map(|&v| f64::from(self.e.get(j, v)))
            .sum()
    }

    fn dfs(&mut self, depth: usize, partial: f64) {
        self.nodes += 1;
        if self.nodes > self.limit {
            return;
        }
        if depth == self.order.len() {
            if partial < self.best - EPS {
                self.best = partial;
                self.best_assign = self.rack_of.clone();
            }
            return;
        }
        if self.bound(depth, partial) >= self.best - EPS {
            return;
        }
        let j = self.order[depth];
        let mut options: Vec<(f64, usize)> = Vec::new();
        let mut empty_seen: Vec<usize> = Vec::new();
        for r in 0..self.caps.len() {
            if self.used[r] >= self.caps[r] {
                continue;
            }
            // Empty racks of equal capacity are interchangeable.
            if self.used[r] == 0 {
                if empty_seen.contains(&self.caps[r]) {
                    continue;
                }
                empty_seen.push(self.caps[r]);
            }
            options.push((self.incremental(j, r), r));
        }
        options.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let fw = self.free_weight(depth, j);
        self.free_pairs -= fw;
        for (inc, r) in options {
            self.rack_of[j] = r;
            self.used[r] += 1;
            self.place(j, r, 1.0);
            self.dfs(depth + 1, partial + inc);
            self.place(j, r, -1.0);
            self.used[r] -= 1;
        }
        self.free_pairs += fw;
    }
}

fn greedy(e: &WeightMatrix, order: &[usize], caps: &[usize], w_intra: f64, w_inter: f64) -> Vec<usize> {
    let mut rack_of = vec![usize::MAX; e.size()];
    let mut used = vec![0usize; caps.len()];
    for &j in order {
        let mut best: Option<(f64, usize)> = None;
        for r in 0..caps.len() {
            if used[r] >= caps[r] {
                continue;
            }
            let inc: f64 = order
                .iter()
                .filter(|&&i| rack_of[i] != usize::MAX)
                .map(|&i| f64::from(e.get(i, j)) * if rack_of[i] == r { w_intra } else { w_inter })
                .sum();
            if best.is_none_or(|(b, _)| inc < b - EPS) {
                best = Some((inc, r));
            }
        }
        let r = best.expect("capacity checked").1;
        rack_of[j] = r;
        used[r] += 1;
    }
    rack_of
}

/// Exact minimum of the rack objective for general per-rack capacities.
pub fn solve_rack_assignment(
    e: &WeightMatrix,
    capacities: &[usize],
    w_intra: f64,
    w_inter: f64,
    node_limit: u64,
) -> Result<RackAssignment> {
    let n = e.size();
    check_capacity(n, capacities)?;
    if n * capacities.len() <= EXHAUSTIVE_VARIABLES {
        return brute_force_racks(e, capacities, w_intra, w_inter);
    }
    let mut order: Vec<usize> = (0..n).collect();
    let strength = |i: usize| -> u64 { (0..n).map(|j| u64::from(e.get(i, j))).sum() };
    order.sort_by_key(|&i| (std::cmp::Reverse(strength(i)), i));
    let incumbent = greedy(e, &order, capacities, w_intra, w_inter);
    let best = rack_objective(e, &incumbent, w_intra, w_inter);
    let mut free_pairs = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            free_pairs += f64::from(e.get(i, j));
        }
    }
    let mut s = Search {
        e,
        caps: capacities,
        w_intra,
        w_inter,
        w_min: w_intra.min(w_inter),
        order,
        rack_of: vec![usize::MAX; n],
        used: vec![0; capacities.len()],
        t: vec![vec![0.0; capacities.len()]; n],
        s: vec![0.0; n],
        free_pairs,
        best,
        best_assign: incumbent,
        nodes: 0,
        limit: node_limit,
    };
    s.dfs(0, 0.0);
    Ok(RackAssignment {
        objective: rack_objective(e, &s.best_assign, w_intra, w_inter),
        rack_of: s.best_assign,
        optimal: s.nodes <= node_limit,
        nodes: s.nodes,
    })
}

/// `R` racks of `n_tor` slots each, weights from the fidelity table.
pub fn assign_racks_ilp(e: &WeightMatrix, racks: usize, n_tor: usize, table: &FidelityTable) -> Result<RackAssignment> {
    table.validate()?;
    solve_rack_assignment(
        e,
        &vec![n_tor; racks],
        table.intra_weight(),
        table.inter_weight(),
        DEFAULT_NODE_LIMIT,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand::Rng;

    fn random_instance(seed: u64, n: usize) -> WeightMatrix {
        let mut rng = stream(seed, "racks", 0);
        let mut e = WeightMatrix::new(n);
        for i in 0..n {
            for j in i + 1..n {
                if rng.random_bool(0.6) {
                    e.add(i, j, rng.random_range(1..6));
                }
            }
        }
        e
    }

    #[test]
    fn clustered_pairs() {
        let mut e = WeightMatrix::new(4);
        e.add(0, 1, 10);
        e.add(2, 3, 10);
        e.add(0, 2, 1);
        e.add(1, 3, 1);
        let a = assign_racks_ilp(&e, 2, 2, &FidelityTable::default()).unwrap();
        assert_eq!(a.rack_of[0], a.rack_of[1]);
        assert_eq!(a.rack_of[2], a.rack_of[3]);
        assert_ne!(a.rack_of[0], a.rack_of[2]);
    }

    #[test]
    fn all_to_all_balanced() {
        let mut e = WeightMatrix::new(6);
        for i in 0..6 {
            for j in i + 1..6 {
                e.add(i, j, 1);
            }
        }
        let t = FidelityTable::default();
        let a = assign_racks_ilp(&e, 3, 2, &t).unwrap();
        let b = brute_force_racks(&e, &[2, 2, 2], t.intra_weight(), t.inter_weight()).unwrap();
        assert!((a.objective - b.objective).abs() < 1e-9);
        assert!((a.objective - (3.0 * t.intra_weight() + 12.0 * t.inter_weight())).abs() < 1e-9);
    }

    #[test]
    fn infeasible() {
        let e = WeightMatrix::new(5);
        assert_eq!(
            assign_racks_ilp(&e, 2, 2, &FidelityTable::default()),
            Err(Error::Capacity {
                needed: 5,
                available: 4
            })
        );
    }

    #[test]
    fn branch_and_bound_matches_brute_force() {
        let t = FidelityTable::default();
        for seed in 0..60 {
            let n = 5 + (seed as usize % 6);
            let e = random_instance(seed, n);
            let caps = [3, 3, 2, 2];
            let (wi, we) = (t.intra_weight(), t.inter_weight());
            let bb = solve_rack_assignment(&e, &caps, wi, we, u64::MAX).unwrap();
            let bf = brute_force_racks(&e, &caps, wi, we).unwrap();
            assert!(bb.optimal);
            assert!((bb.objective - bf.objective).abs() < 1e-6, "seed {seed}");
            bb.verify(&e, &caps, wi, we).unwrap();
        }
    }

    #[test]
    fn verify_catches_overfull_rack() {
        let e = random_instance(1, 4);
        let a = RackAssignment {
            rack_of: vec![0, 0, 0, 1],
            objective: rack_objective(&e, &[0, 0, 0, 1], 1.0, 2.0),
            optimal: true,
            nodes: 0,
        };
        assert!(a.verify(&e, &[2, 2], 1.0, 2.0).is_err());
        assert!(a.verify(&e, &[3, 2], 1.0, 2.0).is_ok());
    }

    #[test]
    fn node_limit_returns_incumbent() {
        let e = random_instance(7, 12);
        let a = solve_rack_assignment(&e, &[3; 4], 50.0, 100.0, 3).unwrap();
        assert!(!a.optimal);
        a.verify(&e, &[3; 4], 50.0, 100.0).unwrap();
    }
}
