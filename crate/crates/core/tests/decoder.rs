mod common;

use hmlfc::lfcore::{ChromaSubsampling, ColorConfig, ColorTransform};
use hmlfc::{encode, DecodeError, DecoderState, EncodeParams, LightField, MvPolicy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn lossy_state(field: &LightField, params: &EncodeParams) -> DecoderState {
    DecoderState::open(encode(field, params).unwrap()).unwrap()
}

fn check_random_blocks(field: &LightField, params: &EncodeParams, pairs: usize, seed: u64) {
    let state = lossy_state(field, params);
    let full = state.decode_full().unwrap();
    let (gs, gt) = state.grid();
    let (w, h) = state.view_dims();
    let bs = params.block_size;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf = vec![[0u8; 3]; bs * bs];
    for _ in 0..pairs {
        let (s, t) = (rng.gen_range(0..gs), rng.gen_range(0..gt));
        let (bx, by) = (rng.gen_range(0..w.div_ceil(bs)), rng.gen_range(0..h.div_ceil(bs)));
        let rect = state.decode_rgb_block((s, t), (bx, by), &mut buf);
        for row in 0..rect.h {
            for col in 0..rect.w {
                assert_eq!(buf[row * bs + col], full.pixel(s, t, rect.x + col, rect.y + row), "view {s},{t} block {bx},{by} px {col},{row} {params:?}");
            }
        }
    }
}

#[test]
fn random_blocks_match_full_decode() {
    let field = common::quads(6, 30, 1);
    for policy in [MvPolicy::All, MvPolicy::DropInsignificant, MvPolicy::Adaptive] {
        let params = EncodeParams { tree_height: 2, window: 4, mv_policy: policy, ..EncodeParams::default() };
        check_random_blocks(&field, &params, 300, 2);
    }
    let half = EncodeParams {
        tree_height: 2,
        window: 4,
        color: ColorConfig::new(ColorTransform::YcocgR, ChromaSubsampling::Half),
        ..EncodeParams::default()
    };
    check_random_blocks(&field, &half, 300, 3);
    check_random_blocks(&common::quads(5, 23, 4), &EncodeParams { tree_height: 2, block_size: 8, window: 3, ..EncodeParams::default() }, 300, 5);
}

#[test]
fn channel_blocks_match_planes_after_clamping() {
    let field = common::quads(4, 24, 7);
    for policy in [MvPolicy::All, MvPolicy::DropInsignificant, MvPolicy::Adaptive] {
    let state = lossy_state(&field, &EncodeParams { tree_height: 2, window: 3, mv_policy: policy, ..EncodeParams::default() }.with_tau(150));
    for c in 0..3 {
        let range = state.channel(c).range;
        for (s, t) in [(0, 0), (3, 1), (2, 3)] {
            let plane = state.decode_plane(c, s, t).unwrap();
            for by in 0..6 {
                for bx in 0..6 {
                    let block = state.decode_block((s, t), (bx, by), c).unwrap();
                    for (k, v) in block.iter().enumerate() {
                        let (x, y) = (bx * 4 + k % 4, by * 4 + k / 4);
                        assert_eq!(v.clamp(&range.min, &range.max), &plane.get(x, y), "{policy:?} c{c} view {s},{t} block {bx},{by}");
                    }
                }
            }
        }
    }
    }
}

#[test]
fn decode_view_matches_full_decode() {
    let field = common::quads(4, 20, 9);
    let state = lossy_state(&field, &EncodeParams { tree_height: 2, window: 2, ..EncodeParams::default() });
    let full = state.decode_full().unwrap();
    for t in 0..4 {
        for s in 0..4 {
            assert_eq!(state.decode_view(s, t).unwrap(), full.view_rgb(s, t));
        }
    }
}

#[test]
fn single_block_reads_a_small_part_of_the_stream() {
    let field = common::quads(8, 64, 11);
    let state = lossy_state(&field, &EncodeParams { window: 4, ..EncodeParams::default() });
    state.reset_stats();
    let mut buf = vec![[0u8; 3]; 16];
    state.decode_rgb_block((5, 2), (7, 9), &mut buf);
    let stats = state.stats();
    assert_eq!(stats.blocks_decoded, 3);
    assert!(stats.payload_reads <= 3 * 3, "{stats:?}");
    assert!(stats.payload_bytes_read * 100 < state.stream_len() as u64, "{stats:?} of {}", state.stream_len());
    state.reset_stats();
    state.decode_full().unwrap();
    let full = state.stats();
    assert_eq!(full.blocks_decoded, 3 * 64 * 16 * 16);
    assert!(full.cache_bytes > 0 && full.cache_bytes == stats.cache_bytes);
}

#[test]
fn full_decode_is_thread_count_independent() {
    let field = common::quads(4, 32, 12);
    let bytes = encode(&field, &EncodeParams { tree_height: 2, window: 4, ..EncodeParams::default() }).unwrap();
    let run = |n| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
        pool.install(|| DecoderState::open(bytes.clone()).unwrap().decode_full().unwrap())
    };
    let one = run(1);
    for n in [2, 4] {
        assert!(run(n) == one);
    }
}

#[test]
fn out_of_range_requests_are_errors() {
    let field = common::quads(4, 16, 13);
    let state = lossy_state(&field, &EncodeParams { tree_height: 2, window: 1, ..EncodeParams::default() });
    assert!(matches!(state.decode_block((4, 0), (0, 0), 0), Err(DecodeError::OutOfRange { .. })));
    assert!(matches!(state.decode_block((0, 0), (4, 0), 0), Err(DecodeError::OutOfRange { .. })));
    assert!(matches!(state.decode_block((0, 0), (0, 0), 3), Err(DecodeError::OutOfRange { .. })));
    assert!(state.decode_plane(0, 0, 4).is_err());
    assert!(state.decode_block((3, 3), (3, 3), 2).is_ok());
}
