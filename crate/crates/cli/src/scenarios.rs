//! Built-in scenarios, compiled into the binary.

use crate::spec::{Spec, SpecError, SpecResult};

pub struct Scenario {
    pub name: &'static str,
    pub summary: &'static str,
    pub text: &'static str,
}

pub const SCENARIOS: &[Scenario] = &[
    Scenario {
        name: "example1",
        summary: "planar field (1, y) constrained to y = a with force x∂x + ∂y",
        text: include_str!("../scenarios/example1.lss"),
    },
    Scenario {
        name: "rosenberg",
        summary: "free particle in R³ with the nonholonomic constraint ż = yẋ",
        text: include_str!("../scenarios/rosenberg.lss"),
    },
    Scenario {
        name: "relparticle-L1",
        summary: "relativistic charged particle, square-root Lagrangian (singular)",
        text: include_str!("../scenarios/relparticle-L1.lss"),
    },
    Scenario {
        name: "relparticle-L2",
        summary: "relativistic charged particle, quadratic Lagrangian on the mass shell",
        text: include_str!("../scenarios/relparticle-L2.lss"),
    },
];

pub fn find(name: &str) -> Option<&'static Scenario> {
    SCENARIOS.iter().find(|s| s.name == name)
}

pub fn load(name: &str, overrides: &[(String, String)]) -> SpecResult<Spec> {
    let sc = find(name).ok_or_else(|| {
        let known: Vec<_> = SCENARIOS.iter().map(|s| s.name).collect();
        SpecError::Invalid(format!("unknown scenario `{name}` (known: {})", known.join(", ")))
    })?;
    Spec::parse(sc.name, sc.text, overrides)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::Dynamics;

    #[test]
    fn every_scenario_parses() {
        for sc in SCENARIOS {
            let spec = load(sc.name, &[]).unwrap_or_else(|e| panic!("{}: {e}", sc.name));
            assert!(spec.nonholonomic.is_some(), "{}", sc.name);
        }
    }

    #[test]
    fn rosenberg_is_lagrangian_with_one_constraint() {
        let spec = load("rosenberg", &[]).unwrap();
        let Dynamics::Lagrangian(model) = &spec.dynamics else { panic!("expected a Lagrangian") };
        assert_eq!(model.nq(), 3);
        let x = [0.3, -1.2, 0.7, 2.0, 3.0, -0.5];
        let l = model.lagrangian().eval_scalar(&x).unwrap();
        assert!((l - 0.5 * (4.0 + 9.0 + 0.25)).abs() < 1e-15);
        let phi = spec.manifold().unwrap();
        assert_eq!(phi.count(), 1);
        assert!((phi.values(&x).unwrap()[0] - (-0.5 + 1.2 * 2.0)).abs() < 1e-15);
    }

    #[test]
    fn unknown_scenario_lists_known_ones() {
        let err = load("nope", &[]).unwrap_err().to_string();
        assert!(err.contains("rosenberg"), "{err}");
    }
}
