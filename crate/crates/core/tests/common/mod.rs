#![allow(dead_code)]

use image::RgbImage;
use puzzlegen::dataset::{Assets, DatasetConfig};
use puzzlegen::pools::scene::synthesize_scene;
use puzzlegen::{OptionMode, RandomStream};

pub fn rng(seed: u64) -> RandomStream {
    RandomStream::from_seed_u64(seed)
}

pub fn bundled_assets() -> Assets {
    Assets::load(&DatasetConfig::new(0, OptionMode::FixedOption)).expect("bundled assets load")
}

pub fn scene(seed: u64, size: u32) -> RgbImage {
    synthesize_scene(&mut rng(seed), size)
}
