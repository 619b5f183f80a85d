//! On the flat interval the Dirac equation splits into two transport equations
//! with speeds +1 and -1. Before the data reach the boundary the discrete
//! solution must match that closed form.

use std::sync::Arc;

use aps_dirac_core::data::{Bump, BumpShape, NoSource};
use aps_dirac_core::dirac::assemble_spatial_dirac;
use aps_dirac_core::evolution::{solve_cauchy, EvolutionConfig};
use aps_dirac_core::{CliffordRep, FoliatedSpacetime, Mesh, Profile, Spinor, SpinorField, C64};
use nalgebra::{Matrix2, Vector2};

const NODES: usize = 401;
const CENTER: f64 = 0.5;

fn setup() -> (FoliatedSpacetime, CliffordRep, Arc<Mesh>) {
    let st = FoliatedSpacetime::interval(1.0, Profile::one(), (0.0, 0.15)).unwrap();
    let rep = CliffordRep::build(1).unwrap();
    let mesh = Arc::new(Mesh::build(&st, NODES, 1).unwrap());
    (st, rep, mesh)
}

/// The matrix `M` with `D psi = M d_x psi`, read off from linear fields where
/// the difference operator is exact.
fn symbol(st: &FoliatedSpacetime, rep: &CliffordRep, mesh: &Arc<Mesh>) -> Matrix2<C64> {
    let a = assemble_spatial_dirac(st, rep, mesh, 0.0).unwrap();
    let mid = NODES / 2;
    let mut m = Matrix2::zeros();
    for j in 0..2 {
        let field = SpinorField::from_fn(mesh.clone(), 0.0, |_, x| {
            let mut s = Spinor::zeros();
            s[j] = C64::new(x[0], 0.0);
            s
        });
        let d = a.apply_field(&field).get(mid);
        m.set_column(j, &d);
    }
    m
}

#[test]
fn interior_pulse_splits_into_characteristics() {
    let (st, rep, mesh) = setup();
    let pol = Spinor::new(C64::new(1.0, 0.0), C64::new(-0.4, 0.7));
    let bump = Bump::new(&st, &[CENTER], 0.05, BumpShape::Gaussian { cutoff: 6.0 }, pol).unwrap();
    let psi0 = bump.field(&mesh, 0.0);
    let p = psi0.get(NODES / 2);
    assert_eq!(mesh.coords(NODES / 2)[0], CENTER);

    // d_t psi = B d_x psi with B = -i M; B is Hermitian with eigenvalues +1 and -1.
    let b = symbol(&st, &rep, &mesh) * C64::new(0.0, -1.0);
    assert!((b - b.adjoint()).norm() < 1e-12);
    let eig = b.symmetric_eigen();
    let mut speeds = [eig.eigenvalues[0], eig.eigenvalues[1]];
    speeds.sort_by(f64::total_cmp);
    assert!((speeds[0] + 1.0).abs() < 1e-12 && (speeds[1] - 1.0).abs() < 1e-12, "speeds {speeds:?}");
    let w0 = eig.eigenvectors.adjoint() * p;

    let steps = 300;
    let r = solve_cauchy(&st, &rep, &mesh, &psi0, &NoSource, &EvolutionConfig::midpoint(0.15 / steps as f64)).unwrap();
    let last = r.physical.last().unwrap();
    let t = last.t();
    assert!((t - 0.15).abs() < 1e-12);

    let mut worst: f64 = 0.0;
    for node in 0..mesh.node_count() {
        let x = mesh.coords(node)[0];
        let w = Vector2::from_fn(|k, _| w0[k] * bump.profile((x + eig.eigenvalues[k] * t - CENTER).abs()));
        let exact = eig.eigenvectors * w;
        worst = worst.max((last.get(node) - exact).norm());
    }
    assert!(worst < 2e-3 * p.norm(), "max error {worst:e}");
}

#[test]
fn error_shrinks_at_second_order() {
    let st = FoliatedSpacetime::interval(1.0, Profile::one(), (0.0, 0.1)).unwrap();
    let rep = CliffordRep::build(1).unwrap();
    let errors: Vec<f64> = [(101, 50), (201, 100), (401, 200)]
        .iter()
        .map(|&(nodes, steps)| {
            let mesh = Arc::new(Mesh::build(&st, nodes, 1).unwrap());
            let pol = Spinor::new(C64::new(1.0, 0.0), C64::new(0.0, 1.0));
            let bump = Bump::new(&st, &[CENTER], 0.08, BumpShape::Gaussian { cutoff: 4.5 }, pol).unwrap();
            let r = solve_cauchy(&st, &rep, &mesh, &bump.field(&mesh, 0.0), &NoSource, &EvolutionConfig::midpoint(0.1 / steps as f64)).unwrap();
            // Compare at the node shared by all three meshes.
            r.physical.last().unwrap().get((nodes - 1) / 2 + (nodes - 1) / 20)
        })
        .collect::<Vec<Spinor>>()
        .windows(2)
        .map(|w| (w[0] - w[1]).norm())
        .collect();
    let order = (errors[0] / errors[1]).log2();
    assert!((1.7..2.3).contains(&order), "observed order {order} from {errors:?}");
}

#[test]
fn interior_lapse_goes_through_the_conformal_reduction() {
    let base = FoliatedSpacetime::interval(1.0, Profile::one(), (0.0, 0.1)).unwrap();
    let rep = CliffordRep::build(1).unwrap();
    let mesh = Arc::new(Mesh::build(&base, 32, 1).unwrap());
    let pol = Spinor::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0));
    let psi0 = Bump::new(&base, &[CENTER], 0.1, BumpShape::Gaussian { cutoff: 3.0 }, pol).unwrap().field(&mesh, 0.0);
    let cfg = EvolutionConfig::midpoint(0.01);

    let lapsed = base.clone().with_lapse(Profile::SinSqSpace { c0: 1.0, amp: 0.2, x0: 0.0, x1: 1.0 }).unwrap();
    let r = solve_cauchy(&lapsed, &rep, &mesh, &psi0, &NoSource, &cfg).unwrap();
    assert!(r.norm_drift() < 1e-12);
    assert!(r.physical[0].sub(&psi0).max_abs() < 1e-14);

    let boundary_lapse = base.with_lapse(Profile::Const(1.3)).unwrap();
    let err = solve_cauchy(&boundary_lapse, &rep, &mesh, &psi0, &NoSource, &cfg).unwrap_err();
    assert_eq!(err.exit_code(), 3, "{err}");
}
