//! Manual throughput probe for the convolution core; run with
//! `cargo test -p skyrm-core --test perf_probe -- --ignored --nocapture`.

use std::time::Instant;

use skyrm_core::conv::{conv2d_backward, conv2d_forward, ConvKernel, Padding};
use skyrm_core::tensor::{Shape, Tensor};

fn random_tensor(shape: Shape, seed: u64) -> Tensor<f32> {
    use rand::Rng;
    let mut rng = skyrm_core::seeds::rng(seed);
    let data = (0..shape.len())
        .map(|_| rng.random_range(-1.0f32..1.0))
        .collect();
    Tensor::from_vec(shape, data).unwrap()
}

#[test]
#[ignore]
fn conv_throughput() {
    for &(c, oc, h) in &[(8usize, 8usize, 128usize), (16, 16, 64), (32, 32, 32), (16, 8, 128)] {
        let input = random_tensor(Shape::new(1, c, h, h), 1);
        let k = ConvKernel::new(random_tensor(Shape::new(oc, c, 3, 3), 2), vec![0.0; oc]).unwrap();
        let reps = (200_000_000 / (h * h * c * oc * 9)).max(3);
        let start = Instant::now();
        for _ in 0..reps {
            let out = conv2d_forward(&input, &k, Padding::Same).unwrap();
            std::hint::black_box(out.data()[0]);
        }
        let dt = start.elapsed().as_secs_f64();
        let flops = 2.0 * (h * h * c * oc * 9 * reps) as f64;
        println!(
            "fwd  c={c:3} oc={oc:3} {h}x{h}: {:6.2} GFLOP/s",
            flops / dt / 1e9
        );

        let grad = random_tensor(Shape::new(1, oc, h, h), 3);
        let start = Instant::now();
        for _ in 0..reps {
            let (gi, _) = conv2d_backward(&input, &k, &grad, Padding::Same).unwrap();
            std::hint::black_box(gi.data()[0]);
        }
        let dt = start.elapsed().as_secs_f64();
        let flops = 2.0 * 2.0 * (h * h * c * oc * 9 * reps) as f64;
        println!(
            "bwd  c={c:3} oc={oc:3} {h}x{h}: {:6.2} GFLOP/s",
            flops / dt / 1e9
        );
    }
}
