#![no_main]

use landau_lab::dist::GridDistribution;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if data.len() > 1 << 16 {
        return;
    }
    if let Ok(grid) = GridDistribution::read_csv(data) {
        let mut buf = Vec::new();
        grid.write_csv(&mut buf).unwrap();
        let back = GridDistribution::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.values(), grid.values());
    }
});
