#![no_main]

use libfuzzer_sys::fuzz_target;
use survcorn::model::Checkpoint;

fuzz_target!(|data: &[u8]| {
    let Ok(model) = Checkpoint::from_bytes(data) else {
        return;
    };
    let bytes = Checkpoint::to_bytes(&model).unwrap();
    let reread = Checkpoint::from_bytes(&bytes).unwrap();
    assert_eq!(Checkpoint::to_bytes(&reread).unwrap(), bytes);
});
