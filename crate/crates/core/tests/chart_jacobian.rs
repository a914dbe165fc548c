mod common;

use common::{max_error, sorted, target_symbol};
use horndeski_core::chart::{jacobian_block, Block};
use horndeski_core::expr::{lv, JetSymbol};
use horndeski_core::numeric::random_point;

#[test]
fn all_eight_blocks_match_finite_differences() {
    for seed in [3, 4] {
        let jp = random_point(seed).unwrap();
        for block in Block::ALL {
            let (err, scale) = max_error(block, &jp, 1e-5);
            assert!(err < 1e-6 * scale, "{} seed {seed}: {err:e}", block.id());
        }
    }
}

#[test]
fn nonlinear_blocks_converge_at_second_order() {
    let jp = random_point(5).unwrap();
    // The other blocks are at most quadratic in their source, where central differences are exact.
    for block in [Block::Cov2Metric, Block::Cov3Metric] {
        let (e1, _) = max_error(block, &jp, 4e-2);
        let (e2, _) = max_error(block, &jp, 2e-2);
        let order = (e1 / e2).log2();
        assert!(order >= 1.9, "{}: observed order {order:.3}", block.id());
    }
}

#[test]
fn second_covariant_derivative_matches_christoffel_oracle() {
    let jp = random_point(6).unwrap();
    let g = |a: usize, b: usize, d: &[usize]| jp.get(&JetSymbol::metric(lv(a.min(b)), lv(a.max(b)), &d.iter().map(|i| lv(*i)).collect::<Vec<_>>())).unwrap();
    let phi = |d: &[usize]| jp.get(&JetSymbol::phi(&sorted(d).iter().map(|i| lv(*i)).collect::<Vec<_>>())).unwrap();
    let ginv = nalgebra::Matrix4::from_fn(|a, b| g(a, b, &[])).try_inverse().unwrap();
    for m in 0..4 {
        for n in m..4 {
            let mut want = phi(&[m, n]);
            for l in 0..4 {
                let gamma: f64 = (0..4).map(|s| 0.5 * ginv[(l, s)] * (g(s, m, &[n]) + g(s, n, &[m]) - g(m, n, &[s]))).sum();
                want -= gamma * phi(&[l]);
            }
            let got = jp.get(&target_symbol(&[m, n])).unwrap();
            assert!((got - want).abs() < 1e-12 * want.abs().max(1.0), "{m}{n}: {got} vs {want}");
        }
    }
}

#[test]
fn malformed_block_requests_are_rejected() {
    assert!(Block::parse("cov4/g").is_err());
    assert!(jacobian_block(Block::Cov2Metric, &[0, 1, 2], &[0, 1]).is_err());
    assert!(jacobian_block(Block::Cov3Phi2, &[0, 1, 2], &[0, 4]).is_err());
}
