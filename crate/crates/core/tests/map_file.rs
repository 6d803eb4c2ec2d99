use cmm_core::lanemap::LaneMap;
use nalgebra::Vector2;

fn shipped() -> LaneMap<f64> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../maps/intersection.map");
    LaneMap::parse(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn shipped_map_is_the_builtin_intersection() {
    assert_eq!(shipped().to_text(), LaneMap::<f64>::intersection(3.5, 1000.0).to_text());
}

#[test]
fn shipped_map_geometry() {
    let map = shipped();
    assert_eq!(map.lanes().len(), 4);
    assert!(map.in_lane(&Vector2::new(-600.0, -1.75)));
    assert!(map.in_lane(&Vector2::new(0.0, 0.0)));
    assert!(!map.in_lane(&Vector2::new(-600.0, 3.6)));
    assert!(!map.in_lane(&Vector2::new(5.0, 5.0)));
    for lane in map.lanes() {
        assert_eq!(lane.width, 3.5);
        assert!((lane.length() - 2000.0).abs() < 1e-9);
    }
}
