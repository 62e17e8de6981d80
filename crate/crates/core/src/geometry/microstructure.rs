use super::{GeometryError, Rect};
use crate::Vec2;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Circular stiff inclusion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Inclusion {
    pub center: Vec2,
    pub diameter: f64,
}

impl Inclusion {
    pub fn radius(&self) -> f64 {
        0.5 * self.diameter
    }

    /// Closed-disk membership.
    pub fn contains(&self, p: Vec2) -> bool {
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        let r = self.radius();
        dx * dx + dy * dy <= r * r
    }
}

/// Random sequential addition settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PackingOptions {
    /// Total number of candidate centres drawn before giving up.
    pub max_attempts: usize,
}

impl Default for PackingOptions {
    fn default() -> Self {
        PackingOptions {
            max_attempts: 200_000,
        }
    }
}

/// Matrix domain `[0, w] x [0, h]` with non-overlapping circular inclusions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Microstructure {
    pub domain_size: [f64; 2],
    pub inclusions: Vec<Inclusion>,
    pub min_gap: f64,
    pub seed: u64,
}

impl Microstructure {
    /// Places `count` inclusions of equal `diameter` by random sequential
    /// addition with rejection. Centres are uniform over the positions that
    /// keep the disk inside the domain.
    pub fn generate(
        domain_size: [f64; 2],
        count: usize,
        diameter: f64,
        min_gap: f64,
        seed: u64,
        packing: PackingOptions,
    ) -> Result<Self, GeometryError> {
        if !(diameter > 0.0) || !(min_gap >= 0.0) {
            return Err(GeometryError::InvalidParameters(format!(
                "diameter {diameter} and min_gap {min_gap} must be positive"
            )));
        }
        if !(domain_size[0] >= diameter && domain_size[1] >= diameter) && count > 0 {
            return Err(GeometryError::InvalidParameters(format!(
                "domain {domain_size:?} cannot hold an inclusion of diameter {diameter}"
            )));
        }
        let r = 0.5 * diameter;
        let min_dist = diameter + min_gap;
        let mut rng = crate::seed::stream(seed, "microstructure", 0);
        let mut inclusions: Vec<Inclusion> = Vec::with_capacity(count);
        let mut attempts = 0;
        while inclusions.len() < count {
            if attempts >= packing.max_attempts {
                return Err(GeometryError::PackingInfeasible {
                    placed: inclusions.len(),
                    requested: count,
                    attempts,
                });
            }
            attempts += 1;
            let c = [
                rng.random_range(r..=domain_size[0] - r),
                rng.random_range(r..=domain_size[1] - r),
            ];
            let clear = inclusions.iter().all(|o| {
                let dx = o.center[0] - c[0];
                let dy = o.center[1] - c[1];
                dx * dx + dy * dy >= min_dist * min_dist
            });
            if clear {
                inclusions.push(Inclusion {
                    center: c,
                    diameter,
                });
            }
        }
        Ok(Microstructure {
            domain_size,
            inclusions,
            min_gap,
            seed,
        })
    }

    pub fn domain(&self) -> Rect {
        Rect::new(0.0, 0.0, self.domain_size[0], self.domain_size[1])
    }

    /// Inclusion indicator: 1 on the closed disks, 0 in the matrix.
    pub fn indicator(&self, p: Vec2) -> u8 {
        u8::from(self.inclusions.iter().any(|inc| inc.contains(p)))
    }

    /// Area fraction of the inclusions.
    pub fn volume_fraction(&self) -> f64 {
        let a: f64 = self
            .inclusions
            .iter()
            .map(|i| std::f64::consts::PI * i.radius() * i.radius())
            .sum();
        a / (self.domain_size[0] * self.domain_size[1])
    }

    /// Number of pairs violating the separation bound or inclusions leaving
    /// the domain. Brute force, used as an audit.
    pub fn violations(&self) -> usize {
        let mut bad = 0;
        for (i, a) in self.inclusions.iter().enumerate() {
            let r = a.radius();
            if a.center[0] - r < -1e-12
                || a.center[1] - r < -1e-12
                || a.center[0] + r > self.domain_size[0] + 1e-12
                || a.center[1] + r > self.domain_size[1] + 1e-12
            {
                bad += 1;
            }
            for b in &self.inclusions[i + 1..] {
                let d = ((a.center[0] - b.center[0]).powi(2) + (a.center[1] - b.center[1]).powi(2)).sqrt();
                if d < 0.5 * (a.diameter + b.diameter) + self.min_gap - 1e-12 {
                    bad += 1;
                }
            }
        }
        bad
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_structure_is_matrix_everywhere() {
        let m = Microstructure::generate([4.0, 4.0], 0, 1.0, 0.05, 1, PackingOptions::default()).unwrap();
        assert!(m.inclusions.is_empty());
        assert_eq!(m.indicator([2.0, 2.0]), 0);
    }

    #[test]
    fn reference_size_domain_is_valid() {
        let m = Microstructure::generate([20.0, 20.0], 100, 1.0, 0.05, 7, PackingOptions::default()).unwrap();
        assert_eq!(m.inclusions.len(), 100);
        assert_eq!(m.violations(), 0);
    }

    #[test]
    fn indicator_closed_disk() {
        let m = Microstructure {
            domain_size: [4.0, 4.0],
            inclusions: vec![Inclusion {
                center: [2.0, 2.0],
                diameter: 1.0,
            }],
            min_gap: 0.05,
            seed: 0,
        };
        assert_eq!(m.indicator([2.0, 2.0]), 1);
        assert_eq!(m.indicator([2.5, 2.0]), 1);
        assert_eq!(m.indicator([2.0, 1.5]), 1);
        assert_eq!(m.indicator([2.6, 2.0]), 0);
        assert_eq!(m.indicator([0.5, 0.5]), 0);
    }

    #[test]
    fn infeasible_packing_is_reported() {
        let err = Microstructure::generate(
            [2.0, 2.0],
            50,
            1.0,
            0.05,
            3,
            PackingOptions { max_attempts: 1000 },
        )
        .unwrap_err();
        assert!(matches!(err, GeometryError::PackingInfeasible { .. }));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn packing_never_violates_bounds(seed in any::<u64>(), count in 0usize..40) {
            let m = Microstructure::generate([10.0, 10.0], count, 1.0, 0.05, seed, PackingOptions::default()).unwrap();
            prop_assert_eq!(m.violations(), 0);
            let again = Microstructure::generate([10.0, 10.0], count, 1.0, 0.05, seed, PackingOptions::default()).unwrap();
            prop_assert_eq!(m, again);
        }
    }
}
