#![no_main]

use landau_lab::config::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = RunConfig::parse(text) {
        // Accepted configs reserialize to a fixed point.
        let once = toml::to_string(&cfg).expect("serialize accepted config");
        let twice = toml::to_string(&RunConfig::parse(&once).expect("reparse")).unwrap();
        assert_eq!(once, twice);
    }
});
