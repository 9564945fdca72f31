mod common;

use common::{check_golden, GOLDEN_CASES};

#[test]
fn presets_match_golden_files() {
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    let failures: Vec<String> =
        GOLDEN_CASES.iter().filter_map(|(name, preset, cmd)| check_golden(name, preset, cmd, update).err()).collect();
    assert!(failures.is_empty(), "{failures:#?}");
}
