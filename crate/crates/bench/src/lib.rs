//! Fixed inputs shared by the benchmarks.

use vdt_core::datafusion::emulator::{scenario, Scenario};
use vdt_core::vehicle::{BodyState, ForcesMoments};

/// A tumbling, side-slipping state away from every singularity.
pub fn sample_state() -> BodyState {
    BodyState {
        u: 18.0,
        v: -1.5,
        w: 2.0,
        p: 0.3,
        q: -0.2,
        r: 0.6,
        phi: 0.2,
        theta: 0.1,
        psi: 1.0,
        pos_n: 10.0,
        pos_e: -4.0,
        pos_d: -30.0,
    }
}

pub fn sample_loads() -> ForcesMoments {
    ForcesMoments {
        fx: 40.0,
        fy: -5.0,
        fz: -210.0,
        l_mom: 1.5,
        m_mom: -2.0,
        n_mom: 0.4,
    }
}

/// A reduced fusion campaign sized for repeated timing.
pub fn small_campaign() -> Scenario {
    scenario(25, 200, 2024).expect("emulated campaign")
}
