use urtu_core::graph::{generate_random, generate_scale_free, generate_small_world};
use urtu_core::DirectedNetwork;

/// Log-likelihoods of continuous power-law and exponential fits to the
/// degree tail above `k_min`, with the usual half-integer correction.
fn tail_log_likelihoods(degrees: &[usize], k_min: usize) -> (f64, f64) {
    let x_min = k_min as f64 - 0.5;
    let tail: Vec<f64> = degrees.iter().filter(|&&k| k >= k_min).map(|&k| k as f64).collect();
    let n = tail.len() as f64;

    let log_sum: f64 = tail.iter().map(|x| (x / x_min).ln()).sum();
    let alpha = 1.0 + n / log_sum;
    let power = n * ((alpha - 1.0) / x_min).ln() - alpha * log_sum;

    let excess: f64 = tail.iter().map(|x| x - x_min).sum();
    let lambda = n / excess;
    let exponential = n * lambda.ln() - lambda * excess;
    (power, exponential)
}

#[test]
fn scale_free_tail_prefers_power_law() {
    for seed in [1, 2, 3] {
        let net = generate_scale_free(1000, 3, seed).unwrap();
        let degrees: Vec<usize> = (0..net.n()).map(|i| net.in_degree(i)).collect();
        let (power, exponential) = tail_log_likelihoods(&degrees, 3);
        assert!(power > exponential, "seed {seed}: power {power} vs exponential {exponential}");
    }
}

#[test]
fn lattice_degrees_do_not_look_scale_free() {
    // Sanity check of the oracle itself: a narrow degree distribution should
    // not favour the power law.
    let net = generate_small_world(1000, 6, 0.5, 4).unwrap();
    let degrees: Vec<usize> = (0..net.n()).map(|i| net.in_degree(i)).collect();
    let (power, exponential) = tail_log_likelihoods(&degrees, 3);
    assert!(exponential > power);
}

#[test]
fn generators_are_deterministic() {
    assert_eq!(generate_scale_free(200, 3, 11).unwrap(), generate_scale_free(200, 3, 11).unwrap());
    assert_eq!(
        generate_small_world(200, 4, 0.1, 11).unwrap(),
        generate_small_world(200, 4, 0.1, 11).unwrap()
    );
    assert_eq!(generate_random(50, 0.1, 11).unwrap(), generate_random(50, 0.1, 11).unwrap());
    assert_ne!(generate_scale_free(200, 3, 11).unwrap(), generate_scale_free(200, 3, 12).unwrap());
}

#[test]
fn generated_networks_are_symmetric_and_connected() {
    let nets = [
        generate_scale_free(150, 2, 5).unwrap(),
        generate_small_world(150, 4, 0.3, 5).unwrap(),
        generate_random(40, 0.08, 5).unwrap(),
    ];
    for net in &nets {
        assert!(net.is_symmetric());
        assert!(net.is_strongly_connected());
        assert!((0..net.n()).all(|j| net.out_degree(j) >= 1));
    }
}

#[test]
fn connectivity_is_invariant_under_relabeling() {
    let cycle = DirectedNetwork::directed_cycle(6).unwrap();
    let chain = DirectedNetwork::new(6, (0..5).map(|k| (k, k + 1))).unwrap();
    let perms: [[usize; 6]; 3] = [[5, 4, 3, 2, 1, 0], [1, 3, 5, 0, 2, 4], [2, 0, 1, 5, 3, 4]];
    for perm in &perms {
        assert!(cycle.relabel(perm).unwrap().is_strongly_connected());
        assert!(!chain.relabel(perm).unwrap().is_strongly_connected());
    }
}

#[test]
fn edge_list_roundtrip_of_generated_network() {
    let net = generate_small_world(30, 4, 0.2, 9).unwrap();
    let text = net.to_edge_list();
    let back = DirectedNetwork::parse_edge_list(&text).unwrap();
    assert_eq!(back, net);
    assert_eq!(back.to_edge_list(), text);
}
