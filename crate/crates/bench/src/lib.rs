//! Fixed inputs shared by the benchmarks.

use qdmd_core::dmd::{assemble_snapshots_with, SnapshotSet};
use qdmd_core::experiments::{Example1, Example2};
use qdmd_core::floquet::reshape_stroboscopic;
use qdmd_core::simulator::BlochTrajectory;

/// Noisy driven-qubit trajectory and its snapshot pairs.
pub fn resonance_data() -> (Example1, BlochTrajectory, SnapshotSet) {
    let p = Example1::default();
    let (_, noisy) = p.simulate().expect("simulation");
    let snap = assemble_snapshots_with(&noisy, p.pairing).expect("snapshots");
    (p, noisy, snap)
}

/// Stacked stroboscopic snapshots of the training periods.
pub fn floquet_data() -> (Example2, SnapshotSet) {
    let p = Example2::default();
    let run = p.run().expect("example 2");
    let snap =
        reshape_stroboscopic(&run.training, p.period(), p.samples_per_period).expect("stacking");
    (p, snap)
}
