#![no_main]

use decon_core::experiment::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(config) = ExperimentConfig::from_toml(text) else {
        return;
    };
    if config.validate().is_ok() {
        let again =
            ExperimentConfig::from_toml(&config.to_toml().expect("valid configs serialize"))
                .expect("serialized configs parse");
        assert_eq!(again, config);
    }
});
