use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spectrust_core::consensus::{mine_with, MiningTarget};
use spectrust_core::crypto::{ring_sign, ring_verify_with, KeyPair, Location, PublicKey, SensingPacket};
use spectrust_core::par::Execution;
use spectrust_core::simnet::experiments::sensing_sweep;
use spectrust_core::simnet::{SelectionScheme, WorldConfig};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn nonce_search(c: &mut Criterion) {
    let mut g = c.benchmark_group("nonce_search_8x_z14");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                for i in 0u8..8 {
                    black_box(mine_with(exec, &[b'h', i], MiningTarget(14), 0, u64::MAX).unwrap());
                }
            })
        });
    }
    g.finish();
}

fn ring_verify(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let keys: Vec<KeyPair> = (0..8).map(|_| KeyPair::generate(512, &mut rng).unwrap()).collect();
    let ring: Vec<PublicKey> = keys.iter().map(|k| k.public.clone()).collect();
    let packet = SensingPacket::new(b"bench", true, 1, Location::from_degrees(40.0, -74.0));
    let sig = ring_sign(&packet, 3, &keys[3], &ring, &mut rng).unwrap();
    let mut g = c.benchmark_group("ring_verify_8x512");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| assert!(ring_verify_with(exec, black_box(&packet), &sig)))
        });
    }
    g.finish();
}

fn sweep(c: &mut Criterion) {
    let cfg = WorldConfig::default();
    let mut g = c.benchmark_group("sensing_sweep_3x4x100");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| sensing_sweep(&cfg, &SelectionScheme::ALL, &[1, 3, 5, 7], 100, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, nonce_search, ring_verify, sweep);
criterion_main!(benches);
