use std::collections::BTreeMap;

use rand_chacha::rand_core::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use winovis_core::attribution::{
    aggregate_all, aggregate_token_heatmap, normalize_for_display, AttentionSlice, AttentionStack, Pathway, SliceKey,
};
use winovis_core::disambiguation::{evaluate_batch, BatchItem, Entity, PipelineConfig, RoleHeatmaps, Status};
use winovis_core::fixtures::{synth_bundle, synth_suite, Branch};
use winovis_core::grid::{bicubic_upscale, Heatmap2D};

/// Frozen output of a standalone cubic resampler (a = -0.5, pixel-centre
/// mapping, clamped edges) on the ramp `x + 2y`, 4x4 to 8x8.
const RAMP_8X8: [[f64; 8]; 8] = [
    [0.0, 0.0390625, 0.5859375, 1.109375, 1.609375, 2.1328125, 2.6796875, 2.9296875],
    [0.2890625, 0.5390625, 1.0859375, 1.609375, 2.109375, 2.6328125, 3.1796875, 3.4296875],
    [1.3828125, 1.6328125, 2.1796875, 2.703125, 3.203125, 3.7265625, 4.2734375, 4.5234375],
    [2.4296875, 2.6796875, 3.2265625, 3.75, 4.25, 4.7734375, 5.3203125, 5.5703125],
    [3.4296875, 3.6796875, 4.2265625, 4.75, 5.25, 5.7734375, 6.3203125, 6.5703125],
    [4.4765625, 4.7265625, 5.2734375, 5.796875, 6.296875, 6.8203125, 7.3671875, 7.6171875],
    [5.5703125, 5.8203125, 6.3671875, 6.890625, 7.390625, 7.9140625, 8.4609375, 8.7109375],
    [6.0703125, 6.3203125, 6.8671875, 7.390625, 7.890625, 8.4140625, 8.9609375, 9.2109375],
];

#[test]
fn ramp_matches_golden() {
    let ramp = Heatmap2D::from_fn(4, 4, |x, y| (x + 2 * y) as f64).unwrap();
    let up = bicubic_upscale(&ramp, 8, 8).unwrap();
    for (y, row) in RAMP_8X8.iter().enumerate() {
        for (x, want) in row.iter().enumerate() {
            assert!((up.get(x, y) - want).abs() < 1e-6, "({x}, {y}): {} vs {want}", up.get(x, y));
        }
    }
}

fn random_grid(rng: &mut ChaCha8Rng, side: usize) -> Heatmap2D {
    Heatmap2D::from_fn(side, side, |_, _| f64::from(rng.next_u32() % 10_000) / 1000.0).unwrap()
}

fn random_stack(seed: u64, tokens: usize) -> AttentionStack {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keys = [
        (Pathway::Up, 5, 1, 0),
        (Pathway::Down, 5, 0, 1),
        (Pathway::Up, 0, 2, 3),
        (Pathway::Down, 0, 0, 0),
    ];
    let slices = keys
        .iter()
        .map(|&(pathway, timestep, layer, head)| AttentionSlice {
            key: SliceKey { pathway, timestep, layer, head },
            grids: (0..tokens).map(|_| random_grid(&mut rng, 8)).collect(),
        })
        .collect();
    AttentionStack::new((0..tokens).map(|k| format!("tok{k}")).collect(), slices).unwrap()
}

#[test]
fn aggregation_matches_slice_loop() {
    for seed in 0..5 {
        let stack = random_stack(seed, 1);
        // Oracle: upscale each slice on its own, then add.
        let mut want = vec![0.0; 16 * 16];
        for slice in stack.slices() {
            let up = bicubic_upscale(&slice.grids[0], 16, 16).unwrap();
            for (w, v) in want.iter_mut().zip(up.values()) {
                *w += v;
            }
        }
        let got = aggregate_token_heatmap(&stack, 0, 16, 16).unwrap();
        for (g, w) in got.values().iter().zip(&want) {
            assert!((g - w).abs() < 1e-9);
        }
    }
}

#[test]
fn aggregate_all_matches_individual_calls() {
    let stack = random_stack(99, 3);
    let set = aggregate_all(&stack, 16, 16).unwrap();
    assert_eq!(set.tokens(), stack.tokens());
    for k in 0..3 {
        assert_eq!(set.heatmaps()[k], aggregate_token_heatmap(&stack, k, 16, 16).unwrap());
    }
}

#[test]
fn normalized_random_grid_spans_unit_interval() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let n = normalize_for_display(&random_grid(&mut rng, 9));
        let min = n.values().iter().copied().fold(f64::INFINITY, f64::min);
        let max = n.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!((min, max), (0.0, 1.0));
    }
}

#[test]
fn suite_covers_every_status_and_branch() {
    let cfg = PipelineConfig::default();
    let mut statuses: BTreeMap<Status, usize> = BTreeMap::new();
    let mut branches: BTreeMap<Branch, usize> = BTreeMap::new();
    for spec in synth_suite(100, 7) {
        let b = synth_bundle(&spec, &cfg).unwrap();
        *statuses.entry(b.expected.status).or_default() += 1;
        *branches.entry(b.branch).or_default() += 1;
    }
    for s in Status::ALL {
        assert!(statuses.get(&s).copied().unwrap_or(0) >= 5, "{s}: {statuses:?}");
    }
    assert!(branches[&Branch::Both] >= 5 && branches[&Branch::Tie] >= 5);
}

#[test]
fn batch_of_fifty_reproduces_planted_statuses() {
    let cfg = PipelineConfig::default();
    let bundles: Vec<_> = synth_suite(50, 2024).iter().map(|s| synth_bundle(s, &cfg).unwrap()).collect();
    let heatmaps: Vec<Vec<Heatmap2D>> = bundles
        .iter()
        .map(|b| b.grids.iter().map(|g| Heatmap2D::from_f32(b.width, b.height, g).unwrap()).collect())
        .collect();
    let items: Vec<BatchItem> = bundles
        .iter()
        .zip(&heatmaps)
        .map(|(b, h)| BatchItem {
            instance_id: &b.instance.id,
            heatmaps: RoleHeatmaps { entity1: &h[0], entity2: &h[1], pronoun: &h[2] },
            caption_flag: b.caption_flag,
        })
        .collect();
    let golds: BTreeMap<String, Entity> = bundles
        .iter()
        .map(|b| (b.instance.id.clone(), Entity::from_answer(b.instance.answer).unwrap()))
        .collect();
    let verdicts = evaluate_batch(&items, &golds, &cfg).unwrap();
    for (v, b) in verdicts.iter().zip(&bundles) {
        assert_eq!(v, &b.expected, "scenario {}", b.instance.statement);
    }
}

/// A 500-instance corpus tagged at the declared proportions reproduces them.
#[test]
fn tagged_corpus_distribution() {
    use winovis_core::corpus::{corpus_distribution, ContextType, EntityClass, WinoVisInstance};
    let classes = [
        (EntityClass::Disparate, 421),
        (EntityClass::DistinctAge, 30),
        (EntityClass::DistinctRole, 35),
        (EntityClass::DistinctOther, 14),
    ];
    let contexts = [193, 75, 146, 86];
    let class_of = classes.iter().flat_map(|&(c, n)| std::iter::repeat_n(c, n));
    let context_of = ContextType::ALL.iter().zip(contexts).flat_map(|(&c, n)| std::iter::repeat_n(c, n));
    let corpus: Vec<WinoVisInstance> = class_of
        .zip(context_of)
        .enumerate()
        .map(|(i, (class, ctx))| {
            WinoVisInstance::new(format!("the cat {i} saw it"), "it", "saw it", ["cat", "dog"], 0, "").with_tags(class, ctx)
        })
        .collect();
    assert_eq!(corpus.len(), 500);
    let d = corpus_distribution(&corpus);
    assert!((d.disparate - 84.2).abs() <= 0.2 && (d.distinct - 15.8).abs() <= 0.2, "{d:?}");
    for (got, want) in d.context.iter().zip([38.6, 15.0, 29.2, 17.2]) {
        assert!((got - want).abs() <= 0.2, "{d:?}");
    }
    assert_eq!(d.untagged, 0);
}
