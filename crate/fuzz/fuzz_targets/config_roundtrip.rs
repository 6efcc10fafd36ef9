#![no_main]

use libfuzzer_sys::fuzz_target;
use qwscatter::config::FieldConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(cfg) = FieldConfig::from_json(text) else { return };
    let back = FieldConfig::from_json(&cfg.to_json()).expect("serialised config parses");
    // NaN never survives JSON, so equality holds for every parsed config
    assert_eq!(back, cfg);
    assert_eq!(back.build().ok(), cfg.build().ok());
});
