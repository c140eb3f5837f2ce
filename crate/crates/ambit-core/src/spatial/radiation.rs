use serde::{Deserialize, Serialize};

use crate::od::{ImpedanceMatrix, MassVector};

/// Intervening-opportunity mass: for each (i, j), the total mass of zones
/// strictly closer to i than j is, excluding both endpoints.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OpportunityField {
    n: usize,
    s: Vec<f64>,
}

impl OpportunityField {
    pub fn build(mass: &MassVector, impedance: &ImpedanceMatrix) -> Self {
        let n = mass.len();
        let mut s = vec![0.0; n * n];
        for i in 0..n {
            // zones sorted by distance from i, with prefix sums of mass
            let mut order: Vec<usize> = (0..n).filter(|&k| k != i).collect();
            order.sort_by(|&a, &b| {
                impedance
                    .get(i, a)
                    .total_cmp(&impedance.get(i, b))
                    .then(a.cmp(&b))
            });
            for j in 0..n {
                if j == i {
                    continue;
                }
                let d_ij = impedance.get(i, j);
                let mut total = 0.0;
                for &k in &order {
                    if impedance.get(i, k) >= d_ij {
                        break;
                    }
                    if k != j {
                        total += mass.get(k);
                    }
                }
                s[i * n + j] = total;
            }
        }
        Self { n, s }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.s[i * self.n + j]
    }

    pub fn n_zones(&self) -> usize {
        self.n
    }
}

/// Radiation model: `T_ij = O_i * m_i m_j / ((m_i + s_ij)(m_i + m_j + s_ij))`.
///
/// Intra-zone cells predict 0 (the model allocates to other zones only) and
/// no finite-size correction is applied.
pub fn predict_radiation(
    mass: &MassVector,
    opportunity: &OpportunityField,
    origin_outflow: &[f64],
    pairs: impl Iterator<Item = (usize, usize)>,
) -> Vec<f64> {
    pairs
        .map(|(i, j)| {
            if i == j {
                return 0.0;
            }
            let (m_i, m_j, s) = (mass.get(i), mass.get(j), opportunity.get(i, j));
            origin_outflow[i] * m_i * m_j / ((m_i + s) * (m_i + m_j + s))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpportunityVariant {
    /// Schneider form with absorption rate L:
    /// share ~ exp(-L s_ij) - exp(-L (s_ij + m_j)).
    InterveningOpportunities,
    /// Opportunity-share form: share ~ m_j / (m_i + s_ij + m_j).
    Ops,
}

/// Opportunity-based allocation of the origin outflow over destinations
/// `j != i`, normalized so each origin's shares sum to one.
pub fn predict_opportunity(
    variant: OpportunityVariant,
    opportunity: &OpportunityField,
    mass: &MassVector,
    origin_outflow: &[f64],
    absorption: f64,
    pairs: impl Iterator<Item = (usize, usize)>,
) -> Vec<f64> {
    let n = mass.len();
    let weight = |i: usize, j: usize| -> f64 {
        let (m_i, m_j, s) = (mass.get(i), mass.get(j), opportunity.get(i, j));
        match variant {
            OpportunityVariant::InterveningOpportunities => {
                (-absorption * s).exp() - (-absorption * (s + m_j)).exp()
            }
            OpportunityVariant::Ops => m_j / (m_i + s + m_j),
        }
    };
    // per-origin normalizers are cached lazily
    let mut denom: Vec<Option<f64>> = vec![None; n];
    let mut denom_of = |i: usize| -> f64 {
        if let Some(d) = denom[i] {
            return d;
        }
        let d: f64 = (0..n).filter(|&k| k != i).map(|k| weight(i, k)).sum();
        denom[i] = Some(d);
        d
    };
    pairs
        .map(|(i, j)| {
            if i == j {
                return 0.0;
            }
            let d = denom_of(i);
            if d > 0.0 {
                origin_outflow[i] * weight(i, j) / d
            } else {
                0.0
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::od::{build_impedance, ImpedanceSource, MassDefinition, PoiCounts, Zone, ZoneId, ZoneTable};

    fn line_zones(n: usize, spacing_m: f64) -> ZoneTable {
        ZoneTable::new(
            (0..n)
                .map(|i| Zone {
                    id: ZoneId(i as u32 + 1),
                    centroid_x_m: i as f64 * spacing_m,
                    centroid_y_m: 0.0,
                    area_km2: 1.0,
                    borough: "B0".into(),
                    poi: PoiCounts::default(),
                })
                .collect(),
        )
        .unwrap()
    }

    fn mass(values: Vec<f64>) -> MassVector {
        MassVector::from_values(MassDefinition::PoiTotal, values, true)
    }

    #[test]
    fn opportunity_mass_counts_strictly_closer_zones() {
        let z = line_zones(4, 1000.0);
        let imp = build_impedance(&z, ImpedanceSource::EuclideanCentroid, None).unwrap();
        let m = mass(vec![1.0, 10.0, 100.0, 1000.0]);
        let s = OpportunityField::build(&m, &imp);
        assert_eq!(s.get(0, 1), 0.0);
        assert_eq!(s.get(0, 2), 10.0);
        assert_eq!(s.get(0, 3), 110.0);
        assert_eq!(s.get(3, 0), 110.0); // zones 2,1 closer to 3 than 0 is
    }

    #[test]
    fn opportunity_mass_is_monotone_in_distance() {
        let z = line_zones(8, 1300.0);
        let imp = build_impedance(&z, ImpedanceSource::EuclideanCentroid, None).unwrap();
        let m = mass((1..=8).map(f64::from).collect());
        let s = OpportunityField::build(&m, &imp);
        for i in 0..8 {
            let mut by_distance: Vec<usize> = (0..8).filter(|&j| j != i).collect();
            by_distance.sort_by(|&a, &b| imp.get(i, a).total_cmp(&imp.get(i, b)));
            for w in by_distance.windows(2) {
                assert!(s.get(i, w[0]) <= s.get(i, w[1]) + 1e-12);
            }
        }
    }

    #[test]
    fn radiation_plug_in_value() {
        let z = line_zones(2, 1000.0);
        let imp = build_impedance(&z, ImpedanceSource::EuclideanCentroid, None).unwrap();
        let m = mass(vec![1.0, 1.0]);
        let s = OpportunityField::build(&m, &imp);
        let pred = predict_radiation(&m, &s, &[1.0, 1.0], [(0usize, 1usize)].into_iter());
        assert!((pred[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn radiation_vanishes_for_huge_intervening_mass() {
        let z = line_zones(3, 1000.0);
        let imp = build_impedance(&z, ImpedanceSource::EuclideanCentroid, None).unwrap();
        // middle zone has enormous mass, so s for the far pair is ~1e9
        let m = mass(vec![1.0, 1e9, 1.0]);
        let s = OpportunityField::build(&m, &imp);
        let pred = predict_radiation(&m, &s, &[1.0, 1.0, 1.0], [(0usize, 2usize)].into_iter());
        assert!(pred[0] < 1e-9, "prediction {}", pred[0]);
    }

    #[test]
    fn radiation_matches_bruteforce_on_ten_zones() {
        let z = ZoneTable::new(
            (0..10)
                .map(|i| Zone {
                    id: ZoneId(i + 1),
                    centroid_x_m: f64::from((i * 37) % 11) * 900.0,
                    centroid_y_m: f64::from((i * 53) % 13) * 1100.0,
                    area_km2: 1.0,
                    borough: "B0".into(),
                    poi: PoiCounts::default(),
                })
                .collect(),
        )
        .unwrap();
        let imp = build_impedance(&z, ImpedanceSource::EuclideanCentroid, None).unwrap();
        let masses: Vec<f64> = (0..10).map(|i| 1.0 + f64::from((i * 29) % 7)).collect();
        let m = mass(masses.clone());
        let s = OpportunityField::build(&m, &imp);
        let outflow: Vec<f64> = (0..10).map(|i| 3.0 + i as f64).collect();
        let pairs: Vec<(usize, usize)> = (0..10)
            .flat_map(|i| (0..10).map(move |j| (i, j)))
            .collect();
        let pred = predict_radiation(&m, &s, &outflow, pairs.iter().copied());
        for (idx, &(i, j)) in pairs.iter().enumerate() {
            if i == j {
                assert_eq!(pred[idx], 0.0);
                continue;
            }
            // independent evaluation with a from-scratch s computation
            let mut s_oracle = 0.0;
            for k in 0..10 {
                if k != i && k != j && imp.get(i, k) < imp.get(i, j) {
                    s_oracle += masses[k];
                }
            }
            let expect = outflow[i] * masses[i] * masses[j]
                / ((masses[i] + s_oracle) * (masses[i] + masses[j] + s_oracle));
            assert!((pred[idx] - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn single_destination_returns_full_outflow() {
        let z = line_zones(2, 2000.0);
        let imp = build_impedance(&z, ImpedanceSource::EuclideanCentroid, None).unwrap();
        let m = mass(vec![4.0, 9.0]);
        let s = OpportunityField::build(&m, &imp);
        for variant in [
            OpportunityVariant::InterveningOpportunities,
            OpportunityVariant::Ops,
        ] {
            let pred = predict_opportunity(
                variant,
                &s,
                &m,
                &[7.0, 2.0],
                0.01,
                [(0usize, 1usize)].into_iter(),
            );
            assert!((pred[0] - 7.0).abs() < 1e-12, "{variant:?}");
        }
    }

    #[test]
    fn io_small_absorption_allocates_by_mass() {
        let z = line_zones(4, 1500.0);
        let imp = build_impedance(&z, ImpedanceSource::EuclideanCentroid, None).unwrap();
        let masses = vec![1.0, 2.0, 3.0, 4.0];
        let m = mass(masses.clone());
        let s = OpportunityField::build(&m, &imp);
        let pred = predict_opportunity(
            OpportunityVariant::InterveningOpportunities,
            &s,
            &m,
            &[1.0, 1.0, 1.0, 1.0],
            1e-9,
            (1..4).map(|j| (0usize, j)),
        );
        let mass_sum: f64 = masses[1..].iter().sum();
        for (idx, j) in (1..4).enumerate() {
            assert!(
                (pred[idx] - masses[j] / mass_sum).abs() < 1e-6,
                "j={j} pred={}",
                pred[idx]
            );
        }
    }

    #[test]
    fn opportunity_models_match_hand_evaluation_on_eight_zones() {
        let z = line_zones(8, 800.0);
        let imp = build_impedance(&z, ImpedanceSource::EuclideanCentroid, None).unwrap();
        let masses: Vec<f64> = (0..8).map(|i| 1.5 + f64::from((i * 13) % 5)).collect();
        let m = mass(masses.clone());
        let s = OpportunityField::build(&m, &imp);
        let outflow: Vec<f64> = (0..8).map(|i| 2.0 + i as f64).collect();
        let l = 0.07;
        let pairs: Vec<(usize, usize)> =
            (0..8).flat_map(|i| (0..8).map(move |j| (i, j))).collect();
        for variant in [
            OpportunityVariant::InterveningOpportunities,
            OpportunityVariant::Ops,
        ] {
            let pred =
                predict_opportunity(variant, &s, &m, &outflow, l, pairs.iter().copied());
            for (idx, &(i, j)) in pairs.iter().enumerate() {
                if i == j {
                    continue;
                }
                let w = |jj: usize| match variant {
                    OpportunityVariant::InterveningOpportunities => {
                        (-l * s.get(i, jj)).exp() - (-l * (s.get(i, jj) + masses[jj])).exp()
                    }
                    OpportunityVariant::Ops => {
                        masses[jj] / (masses[i] + s.get(i, jj) + masses[jj])
                    }
                };
                let denom: f64 = (0..8).filter(|&k| k != i).map(w).sum();
                let expect = outflow[i] * w(j) / denom;
                assert!((pred[idx] - expect).abs() < 1e-10, "{variant:?} ({i},{j})");
            }
        }
    }
}
