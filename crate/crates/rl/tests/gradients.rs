//! Analytic gradients and forward passes against independent recomputation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rlcache_rl::{Mlp, MlpSpec};

/// Central differences of L(params) = sum_k c_k * y_k(params).
fn numeric_gradient(net: &Mlp, input: &[f64], coeffs: &[f64], h: f64) -> Vec<f64> {
    let loss = |n: &Mlp| -> f64 {
        n.forward(input)
            .unwrap()
            .iter()
            .zip(coeffs)
            .map(|(y, c)| y * c)
            .sum()
    };
    let mut probe = net.clone();
    (0..net.num_params())
        .map(|i| {
            let p = net.params()[i];
            probe.params_mut()[i] = p + h;
            let up = loss(&probe);
            probe.params_mut()[i] = p - h;
            let down = loss(&probe);
            probe.params_mut()[i] = p;
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-4))
        .fold(0.0, f64::max)
}

fn random_spec(rng: &mut ChaCha8Rng, with_embedding: bool) -> MlpSpec {
    let input_dim = rng.gen_range(2..7);
    let depth = rng.gen_range(1..3);
    let hidden: Vec<usize> = (0..depth).map(|_| rng.gen_range(3..17)).collect();
    let out = rng.gen_range(1..4);
    let spec = MlpSpec::new(input_dim, &hidden, out);
    if with_embedding {
        spec.with_embedding(rng.gen_range(3..9), rng.gen_range(2..5), &[0])
    } else {
        spec
    }
}

#[test]
fn analytic_gradients_match_finite_differences_on_20_nets() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..20 {
        let spec = random_spec(&mut rng, case % 2 == 1);
        let vocab = spec.embedding.as_ref().map(|e| e.vocab);
        let net = Mlp::new(spec.clone(), &mut rng).unwrap();
        let mut input: Vec<f64> = (0..spec.input_dim).map(|_| rng.gen_range(-1.5..1.5)).collect();
        if let Some(v) = vocab {
            input[0] = rng.gen_range(0..v) as f64;
        }
        let coeffs: Vec<f64> = (0..spec.output_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();

        let trace = net.forward_trace(&input).unwrap();
        let mut analytic = vec![0.0; net.num_params()];
        net.backward(&trace, &coeffs, Some(&mut analytic)).unwrap();
        let numeric = numeric_gradient(&net, &input, &coeffs, 1e-6);
        let err = max_relative_error(&analytic, &numeric);
        assert!(err <= 1e-4, "case {case}: relative error {err}");
    }
}

#[test]
fn input_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let net = Mlp::new(MlpSpec::new(6, &[16], 1), &mut rng).unwrap();
    let input: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let trace = net.forward_trace(&input).unwrap();
    let dx = net.backward(&trace, &[1.0], None).unwrap();
    let h = 1e-6;
    for i in 0..6 {
        let mut up = input.clone();
        up[i] += h;
        let mut down = input.clone();
        down[i] -= h;
        let fd = (net.forward(&up).unwrap()[0] - net.forward(&down).unwrap()[0]) / (2.0 * h);
        assert!((fd - dx[i]).abs() / fd.abs().max(dx[i].abs()).max(1e-4) <= 1e-4);
    }
}

/// Straight-line matrix arithmetic for an 8 -> 64 -> 64 -> 2 ReLU network
/// reading weights out of the flat parameter layout.
fn recompute(params: &[f64], input: &[f64]) -> Vec<f64> {
    let dims = [(8usize, 64usize), (64, 64), (64, 2)];
    let mut x = input.to_vec();
    let mut offset = 0;
    for (layer, &(fan_in, fan_out)) in dims.iter().enumerate() {
        let w = &params[offset..offset + fan_in * fan_out];
        let b = &params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
        offset += fan_in * fan_out + fan_out;
        let mut y = vec![0.0; fan_out];
        for o in 0..fan_out {
            let mut s = b[o];
            for i in 0..fan_in {
                s += w[o * fan_in + i] * x[i];
            }
            y[o] = if layer < 2 { s.max(0.0) } else { s };
        }
        x = y;
    }
    x
}

#[test]
fn forward_matches_straight_line_recompute() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let net = Mlp::new(MlpSpec::new(8, &[64, 64], 2), &mut rng).unwrap();
    for _ in 0..25 {
        let input: Vec<f64> = (0..8).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let got = net.forward(&input).unwrap();
        let want = recompute(net.params(), &input);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() <= 1e-6, "{g} vs {w}");
        }
    }
}
