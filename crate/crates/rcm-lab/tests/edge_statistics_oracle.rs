//! Cross-checks edge sampling against two independent oracles.
//!
//! First: with the node count Poisson distributed, the expected number of
//! edges is `rho^2 / 2` times the mean pair probability, which is estimated
//! here directly from independent uniform pairs rather than from any graph
//! code. Second: freezing the geometry makes the edge count a sum of
//! independent Bernoulli draws, so its mean over many edge seeds must match
//! the sum of the pair probabilities to Poisson-binomial accuracy.

use rand::Rng;
use rcm_lab::connfn::{ConnectionModel, ScaledModel};
use rcm_lab::geometry::{sample_poisson_process, Domain, Point, PointSet};
use rcm_lab::{graph, stream};

#[test]
fn mean_edge_count_matches_the_pair_probability_integral() {
    let rho = 100.0;
    let scaled = ScaledModel::new(ConnectionModel::Exponential, 0.05).unwrap();

    // oracle: mean link probability of a uniform torus pair
    let pairs = 2_000_000usize;
    let mut rng = stream::keyed_rng(&[991]);
    let (mut sum, mut sumsq) = (0.0f64, 0.0f64);
    for _ in 0..pairs {
        let u = Point::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
        let v = Point::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
        let p = scaled.eval_at_distance(Domain::Torus.distance(u, v));
        sum += p;
        sumsq += p * p;
    }
    let np = pairs as f64;
    let p_bar = sum / np;
    let p_var = (sumsq - sum * sum / np) / (np - 1.0);
    let predicted = 0.5 * rho * rho * p_bar;
    let predicted_se = 0.5 * rho * rho * (p_var / np).sqrt();

    // simulation: fresh Poisson clouds, one edge draw each
    let instances = 1_500usize;
    let (mut esum, mut esumsq) = (0.0f64, 0.0f64);
    for t in 0..instances {
        let mut prng = stream::keyed_rng(&[7, t as u64, stream::hash_bytes(b"points")]);
        let points = sample_poisson_process(rho, &mut prng).unwrap();
        let eseed = stream::key_hash(&[7, t as u64, stream::hash_bytes(b"edges")]);
        let net = graph::build_exact(&points, &scaled, Domain::Torus, eseed);
        let e = net.edge_count() as f64;
        esum += e;
        esumsq += e * e;
    }
    let ni = instances as f64;
    let sim_mean = esum / ni;
    let sim_var = (esumsq - esum * esum / ni) / (ni - 1.0);
    let sim_se = (sim_var / ni).sqrt();

    let gap = (sim_mean - predicted).abs();
    let band = 3.0 * predicted_se.hypot(sim_se);
    assert!(
        gap <= band,
        "simulated {sim_mean} +- {sim_se} vs predicted {predicted} +- {predicted_se}"
    );
}

#[test]
fn frozen_geometry_edge_counts_follow_the_poisson_binomial_mean() {
    let scaled = ScaledModel::new(ConnectionModel::Exponential, 0.08).unwrap();
    let n = 200usize;
    let mut rng = stream::keyed_rng(&[5150]);
    let pts: Vec<Point> = (0..n)
        .map(|_| Point::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)))
        .collect();
    let points = PointSet::new(pts).unwrap();

    let mut expected = 0.0f64;
    let mut variance = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let p = scaled.eval_at_distance(Domain::Torus.distance(points.get(i), points.get(j)));
            expected += p;
            variance += p * (1.0 - p);
        }
    }

    let draws = 10_000usize;
    let mut total = 0.0f64;
    for t in 0..draws {
        let net = graph::build_exact(
            &points,
            &scaled,
            Domain::Torus,
            stream::key_hash(&[4242, t as u64]),
        );
        total += net.edge_count() as f64;
    }
    let mean = total / draws as f64;
    let se = (variance / draws as f64).sqrt();
    assert!(
        (mean - expected).abs() <= 3.0 * se,
        "mean {mean} vs expected {expected} (se {se})"
    );
}
