use trajcast::baselines::{kf_fit, KalmanConfig};
use trajcast::codec::*;
use trajcast::data::*;
use trajcast::geo::*;
use trajcast::model::*;

const HAVERSINE_REL_TOL: f64 = 5e-3;
const INVERSE_LATLON_TOL_DEG: f64 = 1e-6;
const INVERSE_ALT_TOL_M: f64 = 1e-3;

fn pt(t: i64, lon: f64, lat: f64, alt: f64) -> TrajectoryPoint {
    TrajectoryPoint {
        timestamp: t,
        callsign: "TEST1".into(),
        lon,
        lat,
        alt,
        vx: 0.0,
        vy: 0.0,
        vz: 0.0,
    }
}

/// Bowring's closed-form ECEF to geodetic inverse, with one refinement.
fn bowring_inverse(p: &EcefPoint) -> (f64, f64, f64) {
    let a = WGS84_A;
    let b = a * (1.0 - WGS84_F);
    let e2 = 1.0 - (b * b) / (a * a);
    let ep2 = (a * a) / (b * b) - 1.0;
    let r = p.x.hypot(p.y);
    let lon = p.y.atan2(p.x);
    let mut beta = (a * p.z).atan2(b * r);
    let mut lat = 0.0;
    for _ in 0..3 {
        lat = (p.z + ep2 * b * beta.sin().powi(3)).atan2(r - e2 * a * beta.cos().powi(3));
        beta = ((1.0 - WGS84_F) * lat.tan()).atan();
    }
    let n = a / (1.0 - e2 * lat.sin().powi(2)).sqrt();
    let alt = r / lat.cos() - n;
    (lon.to_degrees(), lat.to_degrees(), alt)
}

#[test]
fn ecef_inverts_through_independent_oracle() {
    for lon in [94.6, 100.0, 113.7, -75.0, 0.0] {
        for lat in [-60.0, -5.0, 0.0, 19.3, 28.0, 37.3, 70.0] {
            for alt in [0.0, 600.0, 11_000.0] {
                let (l, b, h) = bowring_inverse(&wgs84_to_ecef(lon, lat, alt));
                assert!((l - lon).abs() < INVERSE_LATLON_TOL_DEG, "lon {lon} -> {l}");
                assert!((b - lat).abs() < INVERSE_LATLON_TOL_DEG, "lat {lat} -> {b}");
                assert!((h - alt).abs() < INVERSE_ALT_TOL_M, "alt {alt} -> {h}");
            }
        }
    }
}

#[test]
fn short_deviations_agree_with_haversine() {
    for lat in [19.5, 25.0, 30.0, 37.0] {
        for (dlon, dlat) in [(0.005, 0.0), (0.0, 0.005), (0.004, -0.003), (0.001, 0.001)] {
            let a = pt(0, 100.0, lat, 0.0);
            let b = pt(0, 100.0 + dlon, lat + dlat, 0.0);
            let d = deviation_m(&a, &b);
            let h = haversine_m(a.lon, a.lat, b.lon, b.lat);
            assert!(d < 1000.0);
            assert!((d - h).abs() <= HAVERSINE_REL_TOL * h, "lat {lat}: ecef {d} m, haversine {h} m");
        }
    }
}

#[test]
fn kalman_covariance_trace_never_grows_without_process_noise() {
    let obs: Vec<TrajectoryPoint> = (0..12)
        .map(|i| pt(i * 20, 100.0 + 0.002 * i as f64, 30.0 - 0.001 * i as f64, 9000.0 + 3.0 * i as f64))
        .collect();
    let config = KalmanConfig {
        q_horizontal: 0.0,
        q_vertical: 0.0,
        ..KalmanConfig::default()
    };
    let traces: Vec<f64> = (2..=obs.len())
        .map(|m| kf_fit(&obs[..m], 20.0, config).unwrap().trace())
        .collect();
    for pair in traces.windows(2) {
        assert!(pair[1] <= pair[0] * (1.0 + 1e-9), "{traces:?}");
    }
}

#[test]
fn synthetic_speeds_match_displacements() {
    let cfg = SynthConfig {
        flights: 12,
        ..SynthConfig::default()
    };
    for track in synth_generate(&cfg).unwrap() {
        for pair in track.points.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            let reported = a.vx.hypot(a.vy) / 3.6 * 20.0;
            if reported < 1000.0 {
                continue;
            }
            let moved = haversine_m(a.lon, a.lat, b.lon, b.lat);
            // turns bend the leg, so allow a little more than straight legs need
            assert!((moved - reported).abs() <= 0.02 * reported, "{}: {moved} m vs {reported} m", track.callsign);
        }
    }
}

fn toy_windows(count: usize) -> Vec<EncodedWindow> {
    let cfg = ModelConfig::toy();
    let q = QuantizationSpec::default();
    let w = BitWidthSpec::default();
    let tracks = synth_generate(&SynthConfig {
        flights: 6,
        ..SynthConfig::default()
    })
    .unwrap();
    let (windows, _) = make_all_windows(&tracks, cfg.k, cfg.n, 7, &q, &w);
    windows
        .iter()
        .take(count)
        .map(|s| EncodedWindow::encode(&s.observations, &s.targets, &q, &w, Representation::Gray).unwrap())
        .collect()
}

#[test]
fn zero_learning_rate_leaves_parameters_unchanged() {
    let windows = toy_windows(8);
    let batch: Vec<&EncodedWindow> = windows.iter().collect();
    let adam = AdamConfig {
        lr: 0.0,
        ..AdamConfig::default()
    };
    let mut trainer = Trainer::<f64>::new(&ModelConfig::toy(), &BitWidthSpec::default(), adam).unwrap();
    let before = trainer.params.values().to_vec();
    let first = trainer.train_step(&batch).unwrap();
    for _ in 0..4 {
        trainer.train_step(&batch).unwrap();
    }
    assert_eq!(trainer.params.values(), &before[..]);
    assert_eq!(trainer.loss(&batch).unwrap(), first);
    assert_eq!(trainer.step, 5);
}

#[test]
fn full_batch_loss_decreases_across_seeds() {
    let windows = toy_windows(16);
    let batch: Vec<&EncodedWindow> = windows.iter().collect();
    let adam = AdamConfig {
        lr: 1e-3,
        ..AdamConfig::default()
    };
    let mut mostly_monotone = 0;
    for seed in 0..10 {
        let cfg = ModelConfig {
            seed,
            ..ModelConfig::toy()
        };
        let mut trainer = Trainer::<f64>::new(&cfg, &BitWidthSpec::default(), adam).unwrap();
        let mut losses = vec![trainer.loss(&batch).unwrap()];
        for _ in 0..50 {
            trainer.train_step(&batch).unwrap();
            losses.push(trainer.loss(&batch).unwrap());
        }
        assert!(losses[50] < losses[0], "seed {seed}: {} -> {}", losses[0], losses[50]);
        let rises = losses.windows(2).filter(|p| p[1] > p[0]).count();
        if rises <= 5 {
            mostly_monotone += 1;
        }
    }
    assert!(mostly_monotone >= 9, "{mostly_monotone}/10 seeds descend in at least 45 of 50 steps");
}

#[test]
fn f32_and_f64_networks_agree() {
    let windows = toy_windows(2);
    let cfg = ModelConfig::toy();
    let w = BitWidthSpec::default();
    let a = Trainer::<f64>::new(&cfg, &w, AdamConfig::default()).unwrap();
    let b = Trainer::<f32>::new(&cfg, &w, AdamConfig::default()).unwrap();
    let batch: Vec<&EncodedWindow> = windows.iter().collect();
    let (la, lb) = (a.loss(&batch).unwrap(), b.loss(&batch).unwrap());
    assert!((la - lb).abs() < 1e-4 * la.abs(), "{la} vs {lb}");
}
