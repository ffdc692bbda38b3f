//! The bundled maps must stay usable at both their native 32x32 scale and
//! the 16x16 downscale the small-map experiments run on: one connected
//! passable component and at least 55% passable cells at each scale.

use goalrec::gridworld::{reachable_set, GridMap};
use goalrec::harness::{MapRegistry, MapSplit};
use std::path::PathBuf;

fn maps_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../assets/maps")
}

fn check_scale(m: &GridMap) {
    let passable = m.passable_cells();
    let ratio = passable.len() as f64 / m.cells() as f64;
    assert!(ratio >= 0.55, "{} at {}x{}: only {ratio:.2} passable", m.name(), m.height(), m.width());
    let reach = reachable_set(m, passable[0]);
    for c in &passable {
        assert!(reach[m.index(*c)], "{} at {}x{}: {c} is disconnected", m.name(), m.height(), m.width());
    }
}

#[test]
fn bundled_maps_are_connected_and_open_at_both_scales() {
    let reg = MapRegistry::load_dir(&maps_dir()).unwrap();
    assert_eq!(reg.len(), 10);
    let split = MapSplit::from_registry(&reg).unwrap();
    assert_eq!(split.train.len(), 6);
    assert_eq!(split.test.len(), 4);
    for m in reg.maps() {
        assert_eq!((m.height(), m.width()), (32, 32));
        check_scale(m);
    }
    let coarse = reg.downscaled(2).unwrap();
    for m in coarse.maps() {
        assert_eq!((m.height(), m.width()), (16, 16));
        check_scale(m);
    }
}
