//! Manual GEMM kernel probe; run with
//! `cargo test -p skyrm-core --test gemm_probe -- --ignored --nocapture`.

use std::time::Instant;

use skyrm_core::gemm::{gemm_a_bt, gemm_at_b, gemm_nn};

fn bench(name: &str, flops_per_call: usize, mut f: impl FnMut()) {
    // Warm up, then take the best of three.
    f();
    let mut best = f64::MAX;
    for _ in 0..3 {
        let reps = (400_000_000 / flops_per_call).max(2);
        let start = Instant::now();
        for _ in 0..reps {
            f();
        }
        let dt = start.elapsed().as_secs_f64() / reps as f64;
        best = best.min(dt);
    }
    println!(
        "{name}: {:7.2} GFLOP/s",
        flops_per_call as f64 / best / 1e9
    );
}

#[test]
#[ignore]
fn kernels() {
    for &(m, k, n) in &[(8usize, 144usize, 16384usize), (16, 144, 4096), (32, 288, 1024)] {
        let a = vec![0.5f32; m * k];
        let b = vec![0.25f32; k * n];
        let mut c = vec![0.0f32; m * n];
        bench(&format!("nn   m={m:3} k={k:3} n={n:5}"), 2 * m * k * n, || {
            c[0] = 0.0;
            gemm_nn(m, k, n, &a, &b, &mut c);
            std::hint::black_box(&c[0]);
        });

        let g = vec![0.5f32; m * n];
        let mut gc = vec![0.0f32; k * n];
        bench(&format!("at_b m={m:3} k={k:3} n={n:5}"), 2 * m * k * n, || {
            gc[0] = 0.0;
            gemm_at_b(m, k, n, &a, &g, &mut gc);
            std::hint::black_box(&gc[0]);
        });

        let cols = vec![0.3f32; k * n];
        let mut gw = vec![0.0f32; m * k];
        bench(&format!("a_bt m={m:3} k={k:3} n={n:5}"), 2 * m * k * n, || {
            gw[0] = 0.0;
            gemm_a_bt(m, k, n, &g, &cols, &mut gw);
            std::hint::black_box(&gw[0]);
        });
    }
}
