use luxappraise::embedding::{kmeans, triplet_satisfaction, tste_fit, IndexTriplet, TsteConfig};
use luxappraise::evaluation::{
    predict_prices, run_ablation, train_photo_models, train_valuation, train_view, LabelSource, PipelineConfig,
};
use luxappraise::model::{Dataset, MetadataVector, Split};
use luxappraise::rng::rng;
use luxappraise::synth::{generate_world, WorldConfig};
use luxappraise::valuation::{fit_normalizer, tune_hyperparams, Mode, ParamGrid};
use rand::Rng;

fn small_world(seed: u64) -> Dataset {
    generate_world(&WorldConfig {
        n_houses: 300,
        seed,
        ..WorldConfig::default()
    })
    .unwrap()
}

fn small_config() -> PipelineConfig {
    PipelineConfig {
        grid_tasks_per_room: 20,
        labels_per_room: 120,
        ..PipelineConfig::default()
    }
}

#[test]
fn kmeans_separates_blobs() {
    let centers = [[0.0, 0.0], [10.0, 0.0], [0.0, 10.0], [10.0, 10.0]];
    let mut r = rng(5);
    let mut points = Vec::new();
    let mut truth = Vec::new();
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..40 {
            points.push(vec![
                center[0] + r.random_range(-1.0..1.0),
                center[1] + r.random_range(-1.0..1.0),
            ]);
            truth.push(c);
        }
    }
    let km = kmeans(&points, 4, 11, 100).unwrap();
    assert!(km.converged);
    for c in 0..4 {
        let labels: Vec<usize> = (0..points.len())
            .filter(|&i| truth[i] == c)
            .map(|i| km.assignments[i])
            .collect();
        assert!(labels.iter().all(|&l| l == labels[0]), "blob {c} split across clusters");
    }
    let mut firsts: Vec<usize> = (0..4).map(|c| km.assignments[c * 40]).collect();
    firsts.sort();
    firsts.dedup();
    assert_eq!(firsts.len(), 4);
}

#[test]
fn tste_recovers_planted_groups() {
    let n = 60;
    let group = |i: usize| i % 3;
    let mut r = rng(3);
    let mut triplets: Vec<IndexTriplet> = Vec::new();
    while triplets.len() < 500 {
        let (i, j, k) = (r.random_range(0..n), r.random_range(0..n), r.random_range(0..n));
        if i != j && group(i) == group(j) && group(i) != group(k) {
            triplets.push((i, j, k));
        }
    }
    let fit = tste_fit(&triplets, n, 2, 1.0, &TsteConfig { seed: 9, ..TsteConfig::default() }).unwrap();
    assert!(fit.final_loss < fit.initial_loss);
    assert!(triplet_satisfaction(&fit.points, &triplets).unwrap() >= 0.97);
}

#[test]
fn normalizer_round_trips_training_rows() {
    let world = small_world(2);
    let rows: Vec<MetadataVector> = world.houses().map(|h| h.metadata).collect();
    let norm = fit_normalizer(&rows).unwrap();
    for (f, name) in MetadataVector::FIELD_NAMES.iter().enumerate() {
        let z: Vec<f64> = rows.iter().map(|m| norm.normalize(m)[f]).collect();
        let mean = z.iter().sum::<f64>() / z.len() as f64;
        let var = z.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / z.len() as f64;
        assert!(mean.abs() < 1e-9, "{name} mean {mean}");
        assert!((var - 1.0).abs() < 1e-9, "{name} variance {var}");
        for (m, zi) in rows.iter().zip(&z) {
            let back = zi * norm.stds[f] + norm.means[f];
            assert!((back - m.to_array()[f]).abs() < 1e-6 * m.to_array()[f].abs().max(1.0));
        }
    }
}

#[test]
fn test_houses_do_not_influence_training() {
    let world = small_world(4);
    let config = small_config();
    // Scramble everything a test house carries: price and photo features.
    let (mut photos, mut houses) = world.clone().into_parts();
    let test_ids: Vec<String> = houses.iter().filter(|h| h.split == Split::Test).map(|h| h.id.clone()).collect();
    for h in houses.iter_mut().filter(|h| h.split == Split::Test) {
        h.purchase_price = Some(1.0);
    }
    for p in photos.iter_mut() {
        if p.house_id.as_ref().is_some_and(|h| test_ids.contains(h)) {
            p.features.iter_mut().for_each(|v| *v = -*v);
        }
    }
    let scrambled = Dataset::new(photos, houses).unwrap();

    let fit = |d: &Dataset| {
        let view = train_view(d).unwrap();
        assert!(view.houses().all(|h| h.split == Split::Train));
        let models = train_photo_models(&view, &LabelSource::Simulated, &config, 1).unwrap();
        let val = train_valuation(&view, Mode::Full, Some(&models), &config, 1).unwrap();
        (models, val)
    };
    let (m1, v1) = fit(&world);
    let (m2, v2) = fit(&scrambled);
    assert_eq!(m1, m2);
    assert_eq!(v1, v2);

    let test: Vec<_> = world.houses_in(Split::Test).collect();
    let p1 = predict_prices(&world, &test, &v1, Some(&m1)).unwrap();
    let p2 = predict_prices(&world, &test, &v2, Some(&m2)).unwrap();
    assert_eq!(p1, p2);
}

#[test]
fn ablation_is_deterministic() {
    let world = small_world(6);
    let config = small_config();
    let modes = [Mode::MetadataOnly, Mode::Full];
    let a = run_ablation(&world, &modes, &config, &LabelSource::Simulated, &[1, 2]).unwrap();
    let b = run_ablation(&world, &modes, &config, &LabelSource::Simulated, &[1, 2]).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.rows.len(), 2);
    assert_eq!(a.rows[0].per_seed.len(), 2);
}

#[test]
fn grid_search_prefers_the_matching_width() {
    // A narrow bump is only representable with a wide kernel.
    let mut r = rng(8);
    let x: Vec<Vec<f64>> = (0..80).map(|_| vec![r.random_range(-3.0..3.0)]).collect();
    let y: Vec<f64> = x.iter().map(|v| 100.0 + 40.0 * (-4.0 * v[0] * v[0]).exp()).collect();
    let grid = ParamGrid {
        c: vec![10.0],
        epsilon: vec![0.01],
        gamma_per_dim: vec![0.01, 5.0],
    };
    let result = tune_hyperparams(&x, &y, &grid, 4, 1).unwrap();
    assert_eq!(result.scores.len(), 2);
    assert_eq!(result.best.gamma, 5.0);
    assert!(result.scores[1].1 < result.scores[0].1);
}

#[test]
fn tuned_model_is_no_worse_than_the_worst_grid_point() {
    use luxappraise::evaluation::{house_vectors, median_error_rate};
    use luxappraise::valuation::{svr_fit, svr_predict};

    let world = small_world(10);
    let train: Vec<_> = world.houses_in(Split::Train).collect();
    let test: Vec<_> = world.houses_in(Split::Test).collect();
    let metadata: Vec<MetadataVector> = train.iter().map(|h| h.metadata).collect();
    let norm = fit_normalizer(&metadata).unwrap();
    let x = house_vectors(&world, &train, Mode::MetadataOnly, &norm, None).unwrap();
    let y: Vec<f64> = train.iter().map(|h| h.purchase_price.unwrap()).collect();
    let tx = house_vectors(&world, &test, Mode::MetadataOnly, &norm, None).unwrap();
    let ty: Vec<f64> = test.iter().map(|h| h.purchase_price.unwrap()).collect();

    let grid = ParamGrid::default();
    let test_error = |p: &_| {
        let m = svr_fit(&x, &y, p).unwrap();
        let preds: Vec<f64> = tx.iter().map(|r| svr_predict(&m, r).unwrap()).collect();
        median_error_rate(&preds, &ty).unwrap()
    };
    let tuned = tune_hyperparams(&x, &y, &grid, 5, 0).unwrap();
    assert_eq!(tuned, tune_hyperparams(&x, &y, &grid, 5, 0).unwrap());
    let worst = grid
        .points(x[0].len())
        .iter()
        .map(|p| test_error(p))
        .fold(f64::MIN, f64::max);
    assert!(test_error(&tuned.best) <= worst);
}
