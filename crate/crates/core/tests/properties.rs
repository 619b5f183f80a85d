//! Randomized checks of structural invariants: discrete integration by parts,
//! boundary conditions, the step map, weight maps and the snapshot format.

use std::sync::Arc;

use aps_dirac_core::boundary::{boundary_spec, constrain_operator, Coords};
use aps_dirac_core::dirac::{assemble_spatial_dirac, DiracAssembly};
use aps_dirac_core::evolution::CayleyFactors;
use aps_dirac_core::geometry::conformal_reduce;
use aps_dirac_core::io::{parse_config, snapshot};
use aps_dirac_core::{BoundaryCondition, CliffordRep, FoliatedSpacetime, MaxNorm, Mesh, Profile, Side, SpinorField, C64};
use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_values(rng: &mut ChaCha8Rng, n: usize) -> DVector<C64> {
    DVector::from_fn(n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

fn condition(aps: bool) -> BoundaryCondition {
    if aps {
        BoundaryCondition::Aps
    } else {
        BoundaryCondition::Mit
    }
}

#[derive(Debug, Clone)]
struct Setup {
    spacetime: FoliatedSpacetime,
    radial: usize,
    angular: usize,
    t: f64,
}

impl Setup {
    fn assemble(&self) -> DiracAssembly {
        let rep = CliffordRep::build(self.spacetime.spatial_dim()).unwrap();
        let mesh = Arc::new(Mesh::build(&self.spacetime, self.radial, self.angular).unwrap());
        assemble_spatial_dirac(&self.spacetime, &rep, &mesh, self.t).unwrap()
    }
}

fn annulus_setup() -> impl Strategy<Value = Setup> {
    (4usize..20, 4usize..12, 1.5f64..4.0, 0.0f64..0.3, -0.5f64..0.5, any::<bool>(), any::<bool>()).prop_map(
        |(radial, half_k, r_out, rate, t, lo, hi)| {
            let warp = Profile::product(Profile::ExpTime { rate }, Profile::Affine { c0: 0.2, c1: 1.0 });
            let spacetime = FoliatedSpacetime::annulus(1.0, r_out, warp, (-0.5, 0.5))
                .unwrap()
                .with_boundary(condition(lo), condition(hi));
            Setup { spacetime, radial, angular: 2 * half_k, t }
        },
    )
}

fn interval_setup() -> impl Strategy<Value = Setup> {
    (4usize..40, 0.5f64..3.0, 0.0f64..0.4, any::<bool>(), any::<bool>()).prop_map(|(radial, length, coef, lo, hi)| {
        let scale = Profile::Bilinear { coef };
        let spacetime = FoliatedSpacetime::interval(length, scale, (0.0, 1.0)).unwrap().with_boundary(condition(lo), condition(hi));
        Setup { spacetime, radial, angular: 1, t: 0.5 }
    })
}

fn any_setup() -> impl Strategy<Value = Setup> {
    prop_oneof![annulus_setup(), interval_setup()]
}

fn random_coords(rng: &mut ChaCha8Rng, dims: &[usize]) -> Coords {
    dims.iter().map(|&d| random_values(rng, d)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn summation_by_parts_leaves_only_the_boundary_term(setup in any_setup(), seed in any::<u64>()) {
        let a = setup.assemble();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 2 * a.mesh().node_count();
        let (psi, phi) = (random_values(&mut rng, n), random_values(&mut rng, n));
        let (dpsi, dphi) = (a.apply(&psi), a.apply(&phi));
        let lhs = a.inner(&psi, &dphi) - a.inner(&dpsi, &phi);
        let scale = a.norm(&psi) * a.norm(&dphi) + a.norm(&dpsi) * a.norm(&phi);
        prop_assert!((lhs - a.boundary_term(&psi, &phi)).norm() <= 1e-12 * scale);
    }

    #[test]
    fn symmetric_on_fields_vanishing_at_the_boundary(setup in any_setup(), seed in any::<u64>()) {
        let a = setup.assemble();
        let mesh = a.mesh().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fields = [random_values(&mut rng, 2 * mesh.node_count()), random_values(&mut rng, 2 * mesh.node_count())];
        for f in &mut fields {
            for node in (0..mesh.node_count()).filter(|&v| mesh.is_boundary(v)) {
                f[2 * node] = C64::new(0.0, 0.0);
                f[2 * node + 1] = C64::new(0.0, 0.0);
            }
        }
        let [psi, phi] = fields;
        let (dpsi, dphi) = (a.apply(&psi), a.apply(&phi));
        let scale = a.norm(&psi) * a.norm(&dphi) + a.norm(&dpsi) * a.norm(&phi);
        prop_assert!((a.inner(&psi, &dphi) - a.inner(&dpsi, &phi)).norm() <= 1e-12 * scale);
    }

    #[test]
    fn constrained_fields_carry_no_boundary_flux(setup in any_setup(), seed in any::<u64>()) {
        let a = setup.assemble();
        let specs: Vec<_> = Side::BOTH.iter().map(|&s| boundary_spec(&a, s, setup.spacetime.condition(s)).unwrap()).collect();
        let dc = constrain_operator(&a, &specs).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let psi = dc.lift(&random_coords(&mut rng, &dc.mode_dims()));
        let phi = dc.lift(&random_coords(&mut rng, &dc.mode_dims()));
        let flux = a.boundary_term(&psi, &phi).norm();
        prop_assert!(flux <= 1e-12 * a.norm(&psi) * a.norm(&phi), "flux {flux:e}");
        // The lift is an isometry of the weighted product onto the constrained subspace.
        let back = dc.project(&psi);
        let diff: f64 = back.iter().zip(dc.project(&dc.lift(&back))).map(|(x, y)| (x - y).norm_squared()).sum();
        prop_assert!(diff.sqrt() <= 1e-12 * a.norm(&psi));
    }

    #[test]
    fn midpoint_step_is_an_isometry(setup in annulus_setup(), seed in any::<u64>(), dt in 1e-3f64..0.5) {
        let a = setup.assemble();
        let specs: Vec<_> = Side::BOTH.iter().map(|&s| boundary_spec(&a, s, setup.spacetime.condition(s)).unwrap()).collect();
        let dc = constrain_operator(&a, &specs).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = random_coords(&mut rng, &dc.mode_dims());
        let stepped = CayleyFactors::new(dc.operators(), dt, false).unwrap().step(&c, None, false);
        let norm = |c: &Coords| c.iter().map(|v| v.norm_squared()).sum::<f64>().sqrt();
        prop_assert!((norm(&stepped) - norm(&c)).abs() <= 1e-12 * norm(&c));
    }

    #[test]
    fn mode_blocks_reassemble_the_node_operator(setup in annulus_setup()) {
        let a = setup.assemble();
        let dense = a.dense().unwrap();
        let rebuilt = DiracAssembly::reassemble(a.mesh(), &a.fourier_block_decompose().unwrap());
        prop_assert!((rebuilt - &dense).max_norm() <= 1e-12 * dense.max_norm());
    }

    #[test]
    fn conformal_weights_round_trip(amp in -0.4f64..0.4, r_out in 1.5f64..4.0, seed in any::<u64>(), t in -0.5f64..0.5) {
        let lapse = Profile::SinSqSpace { c0: 1.0, amp, x0: 1.0, x1: r_out };
        let st = FoliatedSpacetime::annulus(1.0, r_out, Profile::Affine { c0: 0.0, c1: 1.0 }, (-0.5, 0.5))
            .unwrap()
            .with_lapse(lapse)
            .unwrap();
        let (_, maps) = conformal_reduce(&st).unwrap();
        let mesh = Arc::new(Mesh::build(&st, 12, 8).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let field = SpinorField::from_values(mesh.clone(), t, random_values(&mut rng, 2 * mesh.node_count()));
        let spinor = maps.spinor_backward(&maps.spinor_forward(&field)).sub(&field).max_abs();
        let source = maps.source_backward(&maps.source_forward(&field)).sub(&field).max_abs();
        prop_assert!(spinor <= 1e-14 * field.max_abs() && source <= 1e-14 * field.max_abs());
    }

    #[test]
    fn snapshots_round_trip_bit_exactly(seed in any::<u64>(), radial in 4usize..16, half_k in 4usize..8, t in -10.0f64..10.0) {
        let st = FoliatedSpacetime::annulus(1.0, 2.0, Profile::one(), (-10.0, 10.0)).unwrap();
        let mesh = Arc::new(Mesh::build(&st, radial, 2 * half_k).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let field = SpinorField::from_values(mesh.clone(), t, random_values(&mut rng, 2 * mesh.node_count()).map(|v| v * 1e3));
        let back = snapshot::decode_snapshot(&snapshot::encode_snapshot(&field), &mesh).unwrap();
        prop_assert_eq!(back.t().to_bits(), t.to_bits());
        prop_assert_eq!(back.values(), field.values());
    }

    #[test]
    fn windows_excluding_the_initial_slice_are_rejected(a in -5.0f64..5.0, len in 0.01f64..5.0) {
        prop_assume!(a > 0.0 || a + len < 0.0);
        let text = include_str!("../../../configs/smoke.toml").replace("window = [0.0, 0.5]", &format!("window = [{a:?}, {:?}]", a + len));
        let errors = parse_config(&text).unwrap_err();
        prop_assert!(errors.0.iter().any(|e| e.message.contains("must contain 0")));
    }
}
