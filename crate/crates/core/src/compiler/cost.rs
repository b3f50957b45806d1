use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gate fidelities by where a two-qubit gate runs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityTable {
    pub f_loc: f64,
    pub f_intra: f64,
    pub f_inter: f64,
}

impl Default for FidelityTable {
    /// Local 0.999, inter-rack 0.9, intra-rack the default emitter-emitter
    /// Fock fidelity.
    fn default() -> Self {
        Self {
            f_loc: 0.999,
            f_intra: crate::protocols::ProtocolModel::default_intra().fidelity(),
            f_inter: 0.9,
        }
    }
}

impl FidelityTable {
    pub fn validate(&self) -> Result<()> {
        for (name, f) in [
            ("f_loc", self.f_loc),
            ("f_intra", self.f_intra),
            ("f_inter", self.f_inter),
        ] {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::param(name, format!("{f} is outside (0, 1]")));
            }
        }
        if self.f_loc == 1.0 {
            return Err(Error::param("f_loc", "must be below 1 to weight the other gate types"));
        }
        Ok(())
    }

    /// `log F_intra / log F_loc`.
    pub fn intra_weight(&self) -> f64 {
        self.f_intra.ln() / self.f_loc.ln()
    }

    /// `log F_inter / log F_loc`.
    pub fn inter_weight(&self) -> f64 {
        self.f_inter.ln() / self.f_loc.ln()
    }
}

/// Two-qubit gates split by where they execute.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateCounts {
    pub n_loc: usize,
    pub n_intra: usize,
    pub n_inter: usize,
}

impl GateCounts {
    pub fn total(&self) -> usize {
        self.n_loc + self.n_intra + self.n_inter
    }

    pub fn remote(&self) -> usize {
        self.n_intra + self.n_inter
    }
}

/// `C = n_loc + n_intra·log F_intra/log F_loc + n_inter·log F_inter/log F_loc`.
pub fn fidelity_cost(counts: &GateCounts, table: &FidelityTable) -> Result<f64> {
    table.validate()?;
    Ok(counts.n_loc as f64
        + counts.n_intra as f64 * table.intra_weight()
        + counts.n_inter as f64 * table.inter_weight())
}

/// First-order form of [`fidelity_cost`] using infidelities `ε = 1 - F`.
pub fn approx_fidelity_cost(counts: &GateCounts, table: &FidelityTable) -> Result<f64> {
    table.validate()?;
    let e_loc = 1.0 - table.f_loc;
    Ok(counts.n_loc as f64
        + counts.n_intra as f64 * (1.0 - table.f_intra) / e_loc
        + counts.n_inter as f64 * (1.0 - table.f_inter) / e_loc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_evaluated_cost() {
        let t = FidelityTable {
            f_loc: 0.999,
            f_intra: 0.95,
            f_inter: 0.9,
        };
        let c = GateCounts {
            n_loc: 10,
            n_intra: 2,
            n_inter: 1,
        };
        let v = fidelity_cost(&c, &t).unwrap();
        assert!((v - 217.843_113_5).abs() < 1e-6, "{v}");
        let base10 = 10.0 + 2.0 * 0.95f64.log10() / 0.999f64.log10() + 0.9f64.log10() / 0.999f64.log10();
        assert!((v - base10).abs() < 1e-9);
    }

    #[test]
    fn local_only_cost_is_count() {
        let c = GateCounts {
            n_loc: 7,
            ..Default::default()
        };
        assert_eq!(fidelity_cost(&c, &FidelityTable::default()).unwrap(), 7.0);
    }

    #[test]
    fn perfect_local_rejected() {
        let t = FidelityTable {
            f_loc: 1.0,
            ..Default::default()
        };
        assert!(matches!(
            fidelity_cost(&GateCounts::default(), &t),
            Err(Error::Parameter { name: "f_loc", .. })
        ));
    }

    proptest! {
        #[test]
        fn base_invariant(fl in 0.9f64..0.99999, fi in 0.5f64..0.99999, fe in 0.5f64..0.99999,
                          a in 0usize..1000, b in 0usize..1000, c in 0usize..1000) {
            let t = FidelityTable { f_loc: fl, f_intra: fi, f_inter: fe };
            let n = GateCounts { n_loc: a, n_intra: b, n_inter: c };
            let ln = fidelity_cost(&n, &t).unwrap();
            let log2 = a as f64 + b as f64 * fi.log2() / fl.log2() + c as f64 * fe.log2() / fl.log2();
            prop_assert!((ln - log2).abs() <= 1e-12 * ln.abs().max(1.0));
        }

        #[test]
        fn approximation_close_for_small_infidelity(el in 1e-4f64..0.01, ei in 1e-4f64..0.01, ee in 1e-4f64..0.01,
                                                     a in 0usize..100, b in 0usize..100, c in 0usize..100) {
            let t = FidelityTable { f_loc: 1.0 - el, f_intra: 1.0 - ei, f_inter: 1.0 - ee };
            let n = GateCounts { n_loc: a, n_intra: b, n_inter: c };
            let exact = fidelity_cost(&n, &t).unwrap();
            let approx = approx_fidelity_cost(&n, &t).unwrap();
            prop_assert!((exact - approx).abs() <= 0.05 * exact.max(1e-12));
        }
    }
}
