//! Shared fixtures for the benchmarks in `benches/`.

use std::f64::consts::PI;
use std::sync::Arc;

use aps_dirac_core::data::{Bump, BumpShape};
use aps_dirac_core::{BoundaryCondition, CliffordRep, FoliatedSpacetime, Mesh, Profile, Spinor, SpinorField, C64};

/// Warped annulus `r in [1, 3]` with `f = e^{0.1 t} r`, MIT inside and APS outside.
pub struct Fixture {
    pub spacetime: FoliatedSpacetime,
    pub rep: CliffordRep,
    pub mesh: Arc<Mesh>,
    pub datum: SpinorField,
}

impl Fixture {
    pub fn annulus(radial: usize, angular: usize, time_dependent: bool) -> Self {
        let r = Profile::Affine { c0: 0.0, c1: 1.0 };
        let warp = if time_dependent { Profile::product(Profile::ExpTime { rate: 0.1 }, r) } else { r };
        let spacetime = FoliatedSpacetime::annulus(1.0, 3.0, warp, (0.0, 1.0))
            .expect("valid annulus")
            .with_boundary(BoundaryCondition::Mit, BoundaryCondition::Aps);
        let rep = CliffordRep::build(2).expect("n = 2 is supported");
        let mesh = Arc::new(Mesh::build(&spacetime, radial, angular).expect("valid mesh"));
        let pol = Spinor::new(C64::new(1.0, 0.0), C64::new(0.3, 0.5));
        let bump = Bump::new(&spacetime, &[2.0, PI], 0.2, BumpShape::Gaussian { cutoff: 3.0 }, pol).expect("interior bump");
        let datum = bump.field(&mesh, 0.0);
        Fixture { spacetime, rep, mesh, datum }
    }
}
