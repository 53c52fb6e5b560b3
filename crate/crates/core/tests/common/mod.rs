#![allow(dead_code)]

use std::path::PathBuf;

use relaytrail_core::formats::{read_json, ConfigFile};
use relaytrail_core::trail::VirtualTrail;

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

pub fn calibrated() -> ConfigFile {
    ConfigFile::load(&data_path("calibrated.json")).unwrap()
}

pub fn degenerate() -> ConfigFile {
    ConfigFile::load(&data_path("degenerate.json")).unwrap()
}

pub fn reference_trail() -> VirtualTrail {
    VirtualTrail::from_file(&read_json(&data_path("reference_trail.json")).unwrap()).unwrap()
}
