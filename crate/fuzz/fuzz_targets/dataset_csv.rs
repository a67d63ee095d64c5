#![no_main]

use libfuzzer_sys::fuzz_target;
use survcorn::data::Dataset;

fuzz_target!(|data: &[u8]| {
    let Ok(ds) = Dataset::from_reader(data) else {
        return;
    };
    // anything accepted must survive a write/read cycle unchanged
    let mut buf = Vec::new();
    ds.write_csv(&mut buf).unwrap();
    let again = Dataset::from_reader(buf.as_slice()).unwrap();
    assert_eq!(again, ds);
});
