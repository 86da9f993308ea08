//! Property tests for the invariants that span modules.

mod common;

use hmlfc::blocks::BlockGrid;
use hmlfc::hierarchy::{build_tree, max_height};
use hmlfc::lfcore::{
    load_light_field, psnr, rgb_to_ycocg, save_light_field, ycocg_to_rgb, ChromaSubsampling, ColorConfig, ColorTransform,
};
use hmlfc::motion::{block_residuals, compensate_level, McConfig, McPlane};
use hmlfc::renderer::{render, Camera, LfGeometry};
use hmlfc::{encode, DecoderState, EncodeParams, LightField, MvPolicy, Plane, PlaneGrid, ValueRange};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Views that share structure: a base image shifted per view plus noise,
/// so motion, thresholds and clusters all have something to do.
fn coherent_field(gs: usize, gt: usize, w: usize, h: usize, noise: u8, seed: u64) -> LightField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (bw, bh) = (w + 2 * gs, h + 2 * gt);
    let base: Vec<u8> = (0..bw * bh * 3).map(|_| rng.gen()).collect();
    let views: Vec<Vec<u8>> = (0..gs * gt)
        .map(|i| {
            let (s, t) = (i % gs, i / gs);
            let mut v = Vec::with_capacity(w * h * 3);
            for y in 0..h {
                for x in 0..w {
                    for c in 0..3 {
                        let b = base[((y + t) * bw + x + s) * 3 + c];
                        v.push(b.saturating_add(rng.gen_range(0..=noise)));
                    }
                }
            }
            v
        })
        .collect();
    LightField::from_rgb_views(gs, gt, w, h, &views)
}

fn field_strategy() -> impl Strategy<Value = LightField> {
    (1usize..6, 1usize..6, 1usize..14, 1usize..14, 0u8..20, any::<u64>())
        .prop_map(|(gs, gt, w, h, noise, seed)| coherent_field(gs, gt, w, h, noise, seed))
}

fn params_strategy() -> impl Strategy<Value = EncodeParams> {
    (
        1usize..4,
        prop::sample::select(vec![2usize, 4, 8]),
        0usize..4,
        any::<bool>(),
        any::<bool>(),
        any::<bool>(),
        prop::sample::select(vec![MvPolicy::All, MvPolicy::DropInsignificant, MvPolicy::Adaptive]),
        any::<bool>(),
    )
        .prop_map(|(height, bs, window, ycocg, motion, phase, policy, closed)| EncodeParams {
            tree_height: height,
            block_size: bs,
            window,
            color: if ycocg { ColorConfig::default() } else { ColorConfig::new(ColorTransform::Identity, ChromaSubsampling::None) },
            motion,
            phase_shift: phase,
            mv_policy: policy,
            closed_loop: closed,
            ..EncodeParams::lossless()
        })
}

fn fit_height(field: &LightField, p: EncodeParams) -> EncodeParams {
    let h = p.tree_height.min(max_height(field.grid_s(), field.grid_t())).max(1);
    EncodeParams { tree_height: h, ..p }
}

/// Fields whose grid admits at least one cluster level.
fn clustered_field() -> impl Strategy<Value = LightField> {
    (2usize..6, 2usize..6, 1usize..12, 1usize..12, 0u8..20, any::<u64>())
        .prop_map(|(gs, gt, w, h, noise, seed)| coherent_field(gs, gt, w, h, noise, seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn color_transform_round_trips(r in 0i32..256, g in 0i32..256, b in 0i32..256) {
        let (y, co, cg) = rgb_to_ycocg(r, g, b);
        prop_assert!((0..=255).contains(&y) && (-255..=255).contains(&co) && (-255..=255).contains(&cg));
        prop_assert_eq!(ycocg_to_rgb(y, co, cg).unwrap(), (r as u8, g as u8, b as u8));
    }

    #[test]
    fn psnr_is_symmetric_and_falls_with_error(seed in any::<u64>(), e in 1u8..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let views: Vec<Vec<u8>> = (0..4).map(|_| (0..5 * 4 * 3).map(|_| rng.gen_range(0..200)).collect()).collect();
        let shifted = |d: u8| views.iter().map(|v| v.iter().map(|x| x + d).collect()).collect::<Vec<Vec<u8>>>();
        let a = LightField::from_rgb_views(2, 2, 5, 4, &views);
        let b = LightField::from_rgb_views(2, 2, 5, 4, &shifted(e));
        let c = LightField::from_rgb_views(2, 2, 5, 4, &shifted(e + 1));
        let ab = psnr(&a, &b).unwrap();
        prop_assert_eq!(ab, psnr(&b, &a).unwrap());
        prop_assert!(psnr(&a, &c).unwrap() < ab);
    }

    #[test]
    fn saved_fields_reload_identically(field in field_strategy()) {
        let dir = tempfile::tempdir().unwrap();
        save_light_field(&field, dir.path()).unwrap();
        prop_assert_eq!(load_light_field(dir.path()).unwrap(), field);
    }

    #[test]
    fn hierarchy_reconstructs_every_leaf(field in clustered_field(), height in 1usize..4) {
        let h = height.min(max_height(field.grid_s(), field.grid_t()));
        for grid in field.channels() {
            let tree = build_tree(grid, h).unwrap();
            prop_assert_eq!(&build_tree(grid, h).unwrap(), &tree);
            for t in 0..grid.grid_t() {
                for s in 0..grid.grid_s() {
                    prop_assert_eq!(&tree.reconstruct(s, t), grid.plane(s, t));
                }
            }
        }
    }

    #[test]
    fn identical_views_give_zero_srvs(seed in any::<u64>(), gs in 2usize..6, gt in 2usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let view: Vec<u8> = (0..6 * 5 * 3).map(|_| rng.gen()).collect();
        let field = LightField::from_rgb_views(gs, gt, 6, 5, &vec![view; gs * gt]);
        for grid in field.channels() {
            let tree = build_tree(grid, max_height(gs, gt)).unwrap();
            for level in tree.levels() {
                for c in &level.clusters {
                    prop_assert!(c.members.iter().all(|m| m.plane.samples().iter().all(|&v| v == 0)));
                }
            }
        }
    }

    #[test]
    fn compensation_inverts_and_never_loses_to_colocated(
        field in clustered_field(),
        bs in prop::sample::select(vec![2usize, 4]),
        window in 0usize..4,
        phase in any::<bool>(),
    ) {
        let tree = build_tree(field.channel(0), 1).unwrap();
        let level = &tree.levels()[0];
        let mut cfg = McConfig::new(bs, window);
        cfg.phase_shift = phase;
        let mc = compensate_level(level, &cfg);
        let back = mc.recompensate();
        for (ci, cluster) in level.clusters.iter().enumerate() {
            let reference = cluster.members.iter().zip(&mc.clusters[ci]).find_map(|(m, p)| {
                matches!(p, McPlane::Reference(_)).then_some(&m.plane)
            }).unwrap();
            for (mi, member) in cluster.members.iter().enumerate() {
                prop_assert_eq!(&back[ci][mi], &member.plane);
                if let McPlane::Residual { matches, .. } = &mc.clusters[ci][mi] {
                    let grid = BlockGrid::for_plane(&member.plane, bs);
                    for (i, m) in matches.iter().enumerate() {
                        let colocated = block_residuals(&member.plane, reference, grid.rect_at(i), 0, 0).0;
                        prop_assert!(m.cost <= colocated);
                    }
                }
            }
        }
    }

    #[test]
    fn phase_shift_helps_on_negated_srvs(seed in any::<u64>(), w in 2usize..12, h in 2usize..12) {
        // With two distinct views per row, the right-hand SRVs negate the left.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let range = ValueRange::U8;
        let a = Plane::from_fn(w, h, range, |_, _| rng.gen_range(0..128) * 2).unwrap();
        let b = Plane::from_fn(w, h, range, |_, _| rng.gen_range(0..128) * 2).unwrap();
        prop_assume!(a != b);
        let grid = PlaneGrid::new(2, 2, vec![a.clone(), b.clone(), a, b]);
        let tree = build_tree(&grid, 1).unwrap();
        let energy = |phase: bool| {
            let mut cfg = McConfig::new(2, 1);
            cfg.phase_shift = phase;
            compensate_level(&tree.levels()[0], &cfg).clusters[0]
                .iter()
                .filter(|p| matches!(p, McPlane::Residual { .. }))
                .map(|p| p.plane().samples().iter().map(|v| v.unsigned_abs() as u64).sum::<u64>())
                .sum::<u64>()
        };
        prop_assert!(energy(true) < energy(false));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lossless_settings_round_trip(field in clustered_field(), params in params_strategy()) {
        let params = fit_height(&field, params);
        let state = DecoderState::open(encode(&field, &params).unwrap()).unwrap();
        prop_assert_eq!(state.decode_full().unwrap(), field);
    }

    #[test]
    fn raising_thresholds_never_grows_the_stream(
        field in clustered_field(),
        params in params_strategy(),
        taus in prop::array::uniform4(0u32..400),
    ) {
        let params = EncodeParams { closed_loop: false, ..fit_height(&field, params) };
        let (lo_ref, hi_ref) = (taus[0].min(taus[1]), taus[0].max(taus[1]));
        let (lo_res, hi_res) = (taus[2].min(taus[3]), taus[2].max(taus[3]));
        let small = encode(&field, &EncodeParams { tau_ref: hi_ref, tau_res: hi_res, ..params }).unwrap();
        let large = encode(&field, &EncodeParams { tau_ref: lo_ref, tau_res: lo_res, ..params }).unwrap();
        prop_assert!(small.len() <= large.len(), "{} > {}", small.len(), large.len());
    }

    #[test]
    fn block_decodes_agree_with_full_decode(
        field in clustered_field(),
        params in params_strategy(),
        tau in 0u32..200,
        half in any::<bool>(),
    ) {
        let mut params = fit_height(&field, params).with_tau(tau);
        if half {
            params.color = ColorConfig::new(ColorTransform::YcocgR, ChromaSubsampling::Half);
        }
        let state = DecoderState::open(encode(&field, &params).unwrap()).unwrap();
        let full = state.decode_full().unwrap();
        let bs = params.block_size;
        let grid = BlockGrid::new(field.width(), field.height(), bs);
        let jobs: Vec<(usize, usize, usize, usize)> = (0..field.grid_t())
            .flat_map(|t| (0..field.grid_s()).flat_map(move |s| {
                (0..grid.blocks_y()).flat_map(move |by| (0..grid.blocks_x()).map(move |bx| (s, t, bx, by)))
            }))
            .collect();
        let decode = |&(s, t, bx, by): &(usize, usize, usize, usize)| {
            let mut buf = vec![[0u8; 3]; bs * bs];
            let rect = state.decode_rgb_block((s, t), (bx, by), &mut buf);
            (rect, buf)
        };
        let serial: Vec<_> = jobs.iter().map(decode).collect();
        let parallel: Vec<_> = jobs.par_iter().map(decode).collect();
        prop_assert_eq!(&serial, &parallel);
        for (&(s, t, _, _), (rect, buf)) in jobs.iter().zip(&serial) {
            for row in 0..rect.h {
                for col in 0..rect.w {
                    prop_assert_eq!(buf[row * bs + col], full.pixel(s, t, rect.x + col, rect.y + row));
                }
            }
        }
    }

    #[test]
    fn one_block_reads_at_most_one_payload_per_level(
        field in clustered_field(),
        params in params_strategy(),
        tau in 0u32..200,
        pick in any::<prop::sample::Index>(),
    ) {
        let params = fit_height(&field, params).with_tau(tau);
        let state = DecoderState::open(encode(&field, &params).unwrap()).unwrap();
        let grid = BlockGrid::new(field.width(), field.height(), params.block_size);
        let i = pick.index(field.view_count() * grid.count());
        let (view, block) = (i / grid.count(), i % grid.count());
        state.reset_stats();
        state.decode_block((view % field.grid_s(), view / field.grid_s()), (block % grid.blocks_x(), block / grid.blocks_x()), 0).unwrap();
        let stats = state.stats();
        prop_assert_eq!(stats.blocks_decoded, 1);
        prop_assert!(stats.payload_reads <= params.tree_height as u64 + 1, "{stats:?}");
    }

    #[test]
    fn stream_render_matches_dense_render(
        field in clustered_field(),
        tau in 0u32..200,
        cam in (-1.0f64..1.0, -1.0f64..1.0, -0.3f64..0.3, -0.2f64..0.2, -0.2f64..0.2, 10.0f64..80.0),
    ) {
        let params = fit_height(&field, EncodeParams { window: 2, ..EncodeParams::default() }).with_tau(tau);
        let state = DecoderState::open(encode(&field, &params).unwrap()).unwrap();
        let decoded = state.decode_full().unwrap();
        let g = LfGeometry::default_for(field.grid_s(), field.grid_t(), field.width(), field.height());
        let (ex, ey) = g.camera_extent();
        let camera = Camera {
            position: [cam.0 * ex, cam.1 * ey, cam.2],
            yaw: cam.3,
            pitch: cam.4,
            fov: cam.5,
            width: 24,
            height: 17,
        };
        prop_assert_eq!(render(&state, &camera, &g), render(&decoded, &camera, &g));
    }
}
