#![allow(dead_code)]

use std::sync::OnceLock;

use arplace::pipeline::{train, TrainConfig};
use arplace::shapemodel::GsmModel;
use arplace::simworld::{default_object_grid, generate_dataset, WorldConfig};

/// Default world and the model trained on its default grids, built once per test binary.
pub fn trained() -> &'static (WorldConfig, GsmModel<f64>) {
    static CELL: OnceLock<(WorldConfig, GsmModel<f64>)> = OnceLock::new();
    CELL.get_or_init(|| {
        let world = WorldConfig::default();
        let ds = generate_dataset(&world, &default_object_grid(), &world.robot_grid(11, 17), 0, true).unwrap();
        let out = train(&ds, &TrainConfig::default()).unwrap();
        (world, out.gsm)
    })
}
