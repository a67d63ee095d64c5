#![no_main]

use libfuzzer_sys::fuzz_target;
use survcorn::model::TrainConfig;
use survcorn::timegrid::TimeGrid;

fuzz_target!(|data: &[u8]| {
    if let Ok(cfg) = serde_json::from_slice::<TrainConfig>(data) {
        let _ = cfg.validate();
    }
    if let Ok(grid) = serde_json::from_slice::<TimeGrid>(data) {
        assert!(grid.num_bins() >= 2);
        assert!(grid.edges().windows(2).all(|w| w[0] < w[1]));
        let _ = grid.discretize(grid.t_max());
    }
});
