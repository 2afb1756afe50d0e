use causal_choice_web::{choice_curve, d_separation, flow_grid, LAYER_WIDTH};

const PEDESTRIANS: &str = "\
age -> stress_level
age -> wait_time
gender -> stress_level
gender -> wait_time
cars -> stress_level
stress_level -> wait_time
stress_level -> density_perception
wait_time -> density_perception
";

#[test]
fn conditioning_on_a_collider_opens_the_path() {
    assert!(d_separation(PEDESTRIANS, "cars", "wait_time", "stress_level, age, gender").unwrap());
    assert!(!d_separation(PEDESTRIANS, "cars", "age", "density_perception").unwrap());
    assert!(!d_separation(PEDESTRIANS, "cars", "wait_time", "").unwrap());
    assert!(d_separation(PEDESTRIANS, "cars", "gender", "").unwrap());
    assert!(!d_separation(PEDESTRIANS, "cars", "gender", "stress_level").unwrap());
}

#[test]
fn unknown_variable_is_an_error() {
    assert!(d_separation(PEDESTRIANS, "cars", "weather", "").is_err());
    assert!(d_separation("a -> b\nb -> a\n", "a", "b", "").is_err());
}

#[test]
fn identity_flow_gives_standard_normal_density() {
    let grid = flow_grid(&[0.0, 0.0, 1.0, -1.0, 0.3], 5, 2.0).unwrap();
    assert_eq!(grid.len(), 3 * 25);
    for p in grid.chunks(3) {
        let want = -(p[0] * p[0] + p[1] * p[1]) / 2.0 - (2.0 * std::f64::consts::PI).ln();
        assert!((p[2] - want).abs() < 1e-12);
    }
}

#[test]
fn flow_density_integrates_to_about_one() {
    // Sum q(g) |det J| dA over the base grid equals the base mass on the grid.
    let params = [1.5, 0.0, 1.0, 0.5, 0.0, -0.5, 1.0, 0.0, 2.0, 0.2];
    let (n, extent) = (121, 6.0);
    let grid = flow_grid(&params, n, extent).unwrap();
    let base = flow_grid(&[], n, extent).unwrap();
    let area = (2.0 * extent / (n - 1) as f64).powi(2);
    let mass: f64 = base.chunks(3).map(|p| p[2].exp() * area).sum();
    assert!((mass - 1.0).abs() < 1e-3, "{mass}");
    assert_eq!(grid.len(), base.len());
    assert!(grid.chunks(3).zip(base.chunks(3)).any(|(a, b)| (a[0] - b[0]).abs() > 1e-3));
}

#[test]
fn flow_rejects_ragged_parameters() {
    assert!(flow_grid(&[1.0; LAYER_WIDTH + 1], 4, 1.0).is_err());
    assert!(flow_grid(&[], 1, 1.0).is_err());
}

#[test]
fn choice_curve_matches_closed_form_logit() {
    let (asc_bus, asc_car, beta) = (0.4, 1.2, -0.8);
    let curve = choice_curve(asc_bus, asc_car, beta, 0.0, 5.0, 11).unwrap();
    assert_eq!(curve.len(), 44);
    let mut last_car = f64::INFINITY;
    for row in curve.chunks(4) {
        let v = [0.0, asc_bus, asc_car + beta * row[0]];
        let z: f64 = v.iter().map(|x| x.exp()).sum();
        for a in 0..3 {
            assert!((row[1 + a] - v[a].exp() / z).abs() < 1e-12);
        }
        assert!(row[3] < last_car);
        last_car = row[3];
    }
}
