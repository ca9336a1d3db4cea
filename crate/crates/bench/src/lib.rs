//! Fixtures shared by the benchmarks.

use rsma_satcom::harness::draw_instance;
use rsma_satcom::optimizer::{init, ScaState};
use rsma_satcom::{ChannelRealization, CsitStatistics, ObjectiveMode, Scenario, SicMode};

pub struct Instance {
    pub scenario: Scenario,
    pub channel: ChannelRealization,
    pub stats: CsitStatistics,
}

/// One desk-profile draw at 20 dB.
pub fn desk_instance(seed: u64) -> Instance {
    let mut scenario = Scenario::desk();
    scenario.snr_db = 20.0;
    let (_, channel, stats) = draw_instance(&scenario, seed, 0, false);
    Instance {
        scenario,
        channel,
        stats,
    }
}

pub fn initial_state(inst: &Instance, sic: SicMode) -> ScaState {
    init(&inst.scenario, &inst.stats, sic, ObjectiveMode::Ee)
        .expect("desk draws admit a feasible start")
}
