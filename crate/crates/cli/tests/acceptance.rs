//! Acceptance suite: one test per release criterion, each ending in a single
//! PASS line with the measured numbers. Oracles here are independent of the
//! library code paths they check: gradients come from the raw definition,
//! transport costs from an integer min-cost-flow, and λ hits from a grid
//! search.

use std::time::Instant;

use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semff::pipeline::{self, RunOptions};
use semff::synth::{self, SynthKind, SynthSpec};
use semff_core::features::{FeatureMatrix, DESCRIPTOR_LEN};
use semff_core::sampler::{
    adjust_lambda_traced, num_of_frames, sample_segment, solve_weighted_llc, SegmentDictionary,
};
use semff_core::sft::{smooth_transitions, FeatureCost, SelectionTimeline};
use semff_core::{metrics, Params};

fn gauss<R: Rng>(rng: &mut R) -> f64 {
    let u1 = rng.random::<f64>().max(1e-300);
    let u2 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn random_matrix<R: Rng>(f: usize, n: usize, rng: &mut R) -> FeatureMatrix {
    let data: Vec<f32> = (0..f * n).map(|_| gauss(rng) as f32).collect();
    FeatureMatrix::new(f, n, data).unwrap()
}

// ---------------------------------------------------------------------------
// 1. Solver correctness: first-order condition and finite differences.

/// Objective J(α) = ‖v − Dα‖² + λ‖q ⊙ α‖², computed from raw column data.
fn objective(d: &[Vec<f64>], v: &[f64], q2: &[f64], lambda: f64, alpha: &[f64]) -> f64 {
    let f = v.len();
    let mut resid = 0.0;
    for r in 0..f {
        let mut dr = 0.0;
        for (j, col) in d.iter().enumerate() {
            dr += col[r] * alpha[j];
        }
        let e = v[r] - dr;
        resid += e * e;
    }
    let penalty: f64 = alpha
        .iter()
        .zip(q2)
        .map(|(a, q2)| lambda * q2 * a * a)
        .sum();
    resid + penalty
}

/// ∇J(α) = 2Dᵀ(Dα − v) + 2λ q² ⊙ α, from raw column data.
fn gradient(d: &[Vec<f64>], v: &[f64], q2: &[f64], lambda: f64, alpha: &[f64]) -> Vec<f64> {
    let f = v.len();
    let mut resid = vec![0.0; f];
    for r in 0..f {
        let mut dr = 0.0;
        for (j, col) in d.iter().enumerate() {
            dr += col[r] * alpha[j];
        }
        resid[r] = dr - v[r];
    }
    d.iter()
        .enumerate()
        .map(|(j, col)| {
            let mut dot = 0.0;
            for r in 0..f {
                dot += col[r] * resid[r];
            }
            2.0 * dot + 2.0 * lambda * q2[j] * alpha[j]
        })
        .collect()
}

#[test]
fn criterion_1_solver_first_order_and_finite_difference() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let lambdas = [0.0, 0.1, 1.0, 10.0];
    let mut worst_first_order = 0.0f64;
    let mut worst_fd = 0.0f64;

    for trial in 0..200 {
        let f = rng.random_range(2..=64);
        let n = rng.random_range(2..=128);
        let m = random_matrix(f, n, &mut rng);
        let weights: Vec<f64> = (0..n).map(|_| 0.1 + 0.9 * rng.random::<f64>()).collect();

        // Raw copies for the oracle, rebuilt exactly as the dictionary does.
        let cols: Vec<Vec<f64>> = (0..n)
            .map(|j| m.column(j).iter().map(|x| *x as f64).collect())
            .collect();
        let mut v = vec![0.0f64; f];
        for col in &cols {
            for (r, x) in col.iter().enumerate() {
                v[r] += x;
            }
        }
        let q2: Vec<f64> = cols
            .iter()
            .zip(&weights)
            .map(|(col, w)| {
                let g2: f64 = col.iter().zip(&v).map(|(d, v)| (d - v) * (d - v)).sum();
                w * w * g2
            })
            .collect();
        let dtv_norm = {
            let s: f64 = cols
                .iter()
                .map(|col| {
                    let dot: f64 = col.iter().zip(&v).map(|(d, v)| d * v).sum();
                    dot * dot
                })
                .sum();
            s.sqrt()
        };

        let dict = SegmentDictionary::build(&m, &weights).unwrap();
        let lambda = lambdas[trial % lambdas.len()];
        let alpha = solve_weighted_llc(&dict, lambda).unwrap();
        let alpha: Vec<f64> = alpha.iter().copied().collect();

        // First-order condition at the returned solution.
        let grad = gradient(&cols, &v, &q2, lambda, &alpha);
        let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        let bound = 1e-6 * (1.0 + dtv_norm);
        assert!(
            grad_norm <= bound,
            "trial {trial}: first-order residual {grad_norm:.3e} exceeds {bound:.3e} \
             (f={f}, n={n}, lambda={lambda})"
        );
        worst_first_order = worst_first_order.max(grad_norm / bound);

        // The analytic gradient matches central differences; J is quadratic,
        // so the comparison is checked both at the solution and at a point
        // pushed away from it.
        let scale = 1.0 + alpha.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        for shift in [0.0, 0.5] {
            let point: Vec<f64> = alpha
                .iter()
                .enumerate()
                .map(|(j, a)| a + shift * scale * if j % 2 == 0 { 1.0 } else { -1.0 })
                .collect();
            let grad = gradient(&cols, &v, &q2, lambda, &point);
            let h = 1e-5 * scale;
            for j in 0..n {
                let mut plus = point.clone();
                plus[j] += h;
                let mut minus = point.clone();
                minus[j] -= h;
                let fd = (objective(&cols, &v, &q2, lambda, &plus)
                    - objective(&cols, &v, &q2, lambda, &minus))
                    / (2.0 * h);
                let err = (grad[j] - fd).abs() / (1.0 + grad[j].abs());
                assert!(
                    err <= 1e-4,
                    "trial {trial}: finite-difference mismatch {err:.3e} at coordinate {j} \
                     (shift {shift}, f={f}, n={n}, lambda={lambda})"
                );
                worst_fd = worst_fd.max(err);
            }
        }
    }

    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 10.0, "criterion 1 took {elapsed:.2} s (budget 10 s)");
    println!(
        "criterion 1 PASS: 200 dictionaries, worst first-order residual {:.2e} of bound, \
         worst finite-difference error {:.2e}, {:.2} s",
        worst_first_order, worst_fd, elapsed
    );
}

// ---------------------------------------------------------------------------
// 2. 1-D EMD equals an integer min-cost-flow oracle.

/// Min-cost flow on the transport network of two equal-mass integer
/// histograms: successive shortest augmenting paths with Bellman-Ford on the
/// bipartite bins graph, cost |i − j| per unit. Exact in integers.
fn min_cost_flow_emd(h1: &[u64], h2: &[u64]) -> u64 {
    let b = h1.len();
    let mut supply: Vec<u64> = h1.to_vec();
    let mut demand: Vec<u64> = h2.to_vec();
    let mut cost = 0u64;
    // With cost |i − j| on a line, successive shortest paths reduce to
    // repeatedly matching the leftmost remaining supply to the leftmost
    // remaining demand; implemented as the standard two-pointer sweep, which
    // is the exact min-cost solution for 1-D transport (the flow network has
    // no negative cycles and this greedy is its optimal basis).
    let (mut i, mut j) = (0usize, 0usize);
    loop {
        while i < b && supply[i] == 0 {
            i += 1;
        }
        while j < b && demand[j] == 0 {
            j += 1;
        }
        if i == b || j == b {
            break;
        }
        let moved = supply[i].min(demand[j]);
        cost += moved * (i.abs_diff(j) as u64);
        supply[i] -= moved;
        demand[j] -= moved;
    }
    cost
}

/// Brute-force check of the oracle itself on tiny instances: enumerate all
/// monotone transport plans is overkill, so instead verify the classic CDF
/// identity on u64 data with exact arithmetic.
fn cdf_emd_u64(h1: &[u64], h2: &[u64]) -> u64 {
    let mut c1 = 0i64;
    let mut c2 = 0i64;
    let mut total = 0u64;
    for (a, b) in h1.iter().zip(h2) {
        c1 += *a as i64;
        c2 += *b as i64;
        total += c1.abs_diff(c2);
    }
    total
}

#[test]
fn criterion_2_emd_matches_min_cost_flow() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = 0.0f64;
    for trial in 0..1000 {
        let b = rng.random_range(2..=8);
        let grains = rng.random_range(1..=16u64);
        let mut h1 = vec![0u64; b];
        let mut h2 = vec![0u64; b];
        for _ in 0..grains {
            h1[rng.random_range(0..b)] += 1;
            h2[rng.random_range(0..b)] += 1;
        }
        let oracle = min_cost_flow_emd(&h1, &h2);
        assert_eq!(oracle, cdf_emd_u64(&h1, &h2), "oracle self-check, trial {trial}");

        // Compare against the implementation on the same masses, both raw
        // and rescaled to unit mass.
        let f1: Vec<f64> = h1.iter().map(|x| *x as f64).collect();
        let f2: Vec<f64> = h2.iter().map(|x| *x as f64).collect();
        let got = semff_core::sft::emd_1d(&f1, &f2).unwrap();
        let diff = (got - oracle as f64).abs();
        assert!(
            diff <= 1e-9,
            "trial {trial}: emd {got} vs oracle {oracle} on {h1:?} / {h2:?}"
        );
        worst = worst.max(diff);

        let scale = 1.0 / grains as f64;
        let s1: Vec<f64> = f1.iter().map(|x| x * scale).collect();
        let s2: Vec<f64> = f2.iter().map(|x| x * scale).collect();
        let got = semff_core::sft::emd_1d(&s1, &s2).unwrap();
        let want = oracle as f64 * scale;
        let diff = (got - want).abs();
        assert!(diff <= 1e-9, "trial {trial} (scaled): {got} vs {want}");
        worst = worst.max(diff);
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 5.0, "criterion 2 took {elapsed:.2} s (budget 5 s)");
    println!(
        "criterion 2 PASS: 1000 histogram pairs (plus rescaled), worst gap {worst:.2e}, {elapsed:.2} s"
    );
}

// ---------------------------------------------------------------------------
// 3. λ search hits exact counts whenever a grid search finds one, and falls
//    back within the probe budget on unreachable targets.

#[test]
fn criterion_3_lambda_search_fidelity() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let tau = Params::default().tau_rel;

    // Reachable: planted dictionaries whose activation count steps from n
    // down to the anchor count. A λ grid certifies the target is attainable,
    // then the search must report an exact hit.
    let mut hits = 0;
    for trial in 0..12 {
        let f = 16 + 4 * (trial % 4);
        let n = 32 + 8 * trial;
        let k = 3 + trial % 5;
        let anchors = synth::pick_positions(n, k, &mut rng);
        let m = synth::planted_features(f, n, &anchors, &mut rng);
        let weights = vec![1.0; n];
        let dict = SegmentDictionary::build(&m, &weights).unwrap();

        let grid_hit = (0..=2000)
            .map(|s| s as f64 * 1e-3)
            .find(|&l| num_of_frames(&dict, l, tau).unwrap() == k);
        assert!(
            grid_hit.is_some(),
            "trial {trial}: grid search found no λ with count {k} — instance not usable"
        );

        let mut trace = Vec::new();
        let result = adjust_lambda_traced(&dict, k, tau, &mut trace).unwrap();
        assert!(
            result.target_hit && result.selected.len() == k,
            "trial {trial}: grid found λ={:?} with count {k}, search returned count {} \
             (hit={})",
            grid_hit,
            result.selected.len(),
            result.target_hit
        );
        assert_eq!(
            num_of_frames(&dict, result.lambda, tau).unwrap(),
            k,
            "trial {trial}: returned λ does not reproduce the count"
        );
        hits += 1;
    }

    // Unreachable: near-identical columns keep every coefficient active at
    // every λ, so no λ reaches the target and the safeguard must trigger.
    let mut fallbacks = 0;
    for trial in 0..6 {
        let f = 12;
        let n = 16 + 2 * trial;
        let base: Vec<f64> = (0..f).map(|_| gauss(&mut rng)).collect();
        let data: Vec<f32> = (0..n)
            .flat_map(|_| {
                base.iter()
                    .map(|x| (x + 1e-9 * gauss(&mut rng)) as f32)
                    .collect::<Vec<_>>()
            })
            .collect();
        let m = FeatureMatrix::new(f, n, data).unwrap();
        let dict = SegmentDictionary::build(&m, &vec![1.0; n]).unwrap();
        let target = 5;

        let mut trace = Vec::new();
        let result = adjust_lambda_traced(&dict, target, tau, &mut trace).unwrap();
        assert!(
            !result.target_hit,
            "trial {trial}: near-identical columns unexpectedly hit target {target}"
        );
        assert!(
            trace.len() <= 10_000,
            "trial {trial}: {} probes exceed the 10^4 budget",
            trace.len()
        );
        // The fallback must return the closest achievable count seen.
        let best = trace
            .iter()
            .map(|(_, c)| c.abs_diff(target))
            .min()
            .unwrap();
        assert_eq!(
            result.selected.len().abs_diff(target),
            best,
            "trial {trial}: fallback did not pick the closest probed count"
        );
        fallbacks += 1;
    }

    println!(
        "criterion 3 PASS: {hits}/12 grid-certified targets hit exactly, \
         {fallbacks}/6 unreachable instances fell back within the probe budget"
    );
}

// ---------------------------------------------------------------------------
// 4. End-to-end speed-up accuracy on 20 corpora.

#[test]
fn criterion_4_speedup_accuracy() {
    let sizes = [
        1000, 1250, 1600, 2000, 2500, 3200, 4000, 5000, 6300, 8000, 10000, 12500, 16000, 20000,
        1100, 1700, 2700, 4300, 6800, 10800,
    ];
    let start = Instant::now();
    let mut deviations = Vec::new();
    for (i, &n) in sizes.iter().enumerate() {
        let kind = if i % 2 == 0 { SynthKind::Flat } else { SynthKind::Burst };
        let dim = if i % 7 == 3 { 446 } else { 64 };
        let spec = SynthSpec {
            kind,
            num_frames: n,
            feature_dim: dim,
            seed: 400 + i as u64,
            speedup: 10.0,
            spf: 2,
        };
        let dir = tempfile::tempdir().unwrap();
        let corpus = synth::generate(&spec).unwrap();
        let has_detections = !corpus.detection_lines.is_empty();
        synth::write_corpus(dir.path(), &corpus).unwrap();

        let opts = RunOptions {
            features: Some(dir.path().join("features.sffm")),
            detections: has_detections.then(|| dir.path().join("detections.jsonl")),
            frame_dims: Some((synth::SYNTH_FRAME_WIDTH, synth::SYNTH_FRAME_HEIGHT)),
            params: Params {
                speedup: 10.0,
                spf: 2,
                ..Params::default()
            },
            ..RunOptions::default()
        };
        let result = pipeline::run(&opts).unwrap();
        let dev = (result.report.pipeline.speedup_achieved - 10.0).abs();
        assert!(
            dev <= 0.5,
            "corpus {i} ({kind:?}, n={n}, dim={dim}): |achieved − 10| = {dev:.4} > 0.5"
        );
        deviations.push(dev);
    }
    deviations.sort_by(f64::total_cmp);
    let median = (deviations[9] + deviations[10]) / 2.0;
    assert!(median <= 0.1, "median deviation {median:.4} > 0.1");
    let elapsed = start.elapsed().as_secs_f64();
    println!(
        "criterion 4 PASS: 20 corpora (n 1000..20000), max |achieved − 10| = {:.4}, \
         median {median:.4}, {elapsed:.1} s",
        deviations[19]
    );
}

// ---------------------------------------------------------------------------
// 5. Low weights inside a planted abrupt-motion interval pull in strictly
//    more in-interval frames than uniform weights.

#[test]
fn criterion_5_weighted_sampling_ablation() {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let n = 1000;
    let f = 64;
    let interval = 400..600;
    let trials = 50;
    let mut strictly_more = 0;
    let mut weighted_total = 0usize;
    let mut uniform_total = 0usize;

    for trial in 0..trials {
        // Half the threshold-band frames sit inside the interval, half
        // outside; anchors stay outside so the contest is over the band.
        let top: Vec<usize> = synth::pick_positions(400, 50, &mut rng);
        let mid_in: Vec<usize> = synth::pick_positions(200, 25, &mut rng)
            .into_iter()
            .map(|p| p + 400)
            .collect();
        let mid_out: Vec<usize> = synth::pick_positions(400, 25, &mut rng)
            .into_iter()
            .map(|p| p + 600)
            .collect();
        let mut mids = mid_in.clone();
        mids.extend_from_slice(&mid_out);
        let m = synth::threshold_band_features(f, n, &top, &mids, &mut rng);

        let target = top.len() + mid_in.len();
        let uniform_w = vec![1.0; n];
        let mut low_w = vec![1.0; n];
        for w in &mut low_w[interval.clone()] {
            *w = 0.1;
        }

        let uniform_run = sample_segment(&m, &uniform_w, target, 1e-3).unwrap();
        let weighted_run = sample_segment(&m, &low_w, target, 1e-3).unwrap();
        let in_interval =
            |sel: &[usize]| sel.iter().filter(|i| interval.contains(*i)).count();
        let u = in_interval(&uniform_run.selected);
        let w = in_interval(&weighted_run.selected);
        if w > u {
            strictly_more += 1;
        }
        weighted_total += w;
        uniform_total += u;
        // The λ staircase may skip a count and settle one off; the
        // comparison stays fair as long as both budgets are essentially
        // equal.
        assert!(
            weighted_run.selected.len().abs_diff(target) <= 2
                && uniform_run.selected.len().abs_diff(target) <= 2,
            "trial {trial}: budgets diverged ({} vs {} at target {target})",
            weighted_run.selected.len(),
            uniform_run.selected.len()
        );
    }

    let share = strictly_more as f64 / trials as f64;
    let ratio = weighted_total as f64 / uniform_total.max(1) as f64;
    assert!(
        share >= 0.9,
        "weighted run beat uniform on only {strictly_more}/{trials} trials"
    );
    assert!(ratio >= 1.5, "mean in-interval ratio {ratio:.2} < 1.5");
    println!(
        "criterion 5 PASS: weighted > uniform on {strictly_more}/{trials} trials, \
         in-interval ratio {ratio:.2}"
    );
}

// ---------------------------------------------------------------------------
// 6. Transition smoothing reduces the appearance-cost CV.

#[test]
fn criterion_6_smoothing_reduces_cv() {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let n = 1000;
    let trials = 50;
    let features = synth::drift_features(8, n, 0.01);
    let cost = FeatureCost::new(&features);
    let mut reduced = 0;
    let mut reductions = Vec::new();

    for trial in 0..trials {
        // An uneven oversampling pattern: clusters with big jumps between
        // them, the shape smoothing is built to fix.
        let mut picks = synth::pick_positions(n, 50, &mut rng);
        picks[0] = 0;
        picks.dedup();
        let before = SelectionTimeline::new(picks, 10.0, &cost).unwrap();
        let cv_before = metrics::appearance_cost_cv(&before).unwrap();
        let after = smooth_transitions(&before, 100, &cost).unwrap();
        let cv_after = metrics::appearance_cost_cv(&after).unwrap();
        assert_eq!(after.len(), 100, "trial {trial}: top-up missed its count");
        if cv_after < cv_before {
            reduced += 1;
        }
        reductions.push(1.0 - cv_after / cv_before);
    }

    let share = reduced as f64 / trials as f64;
    let mean_reduction = reductions.iter().sum::<f64>() / trials as f64;
    assert!(
        share >= 0.95,
        "CV fell on only {reduced}/{trials} trials"
    );
    assert!(
        mean_reduction >= 0.30,
        "mean CV reduction {:.1}% < 30%",
        mean_reduction * 100.0
    );
    println!(
        "criterion 6 PASS: CV fell on {reduced}/{trials} trials, mean reduction {:.1}%",
        mean_reduction * 100.0
    );
}

// ---------------------------------------------------------------------------
// 7. Semantic retention dominates uniform sampling, with equality at 1.0
//    when the burst fills the segment budget.

#[test]
fn criterion_7_semantic_retention_dominance() {
    for (i, seed) in (0..8).map(|i| (i, 700 + i as u64)) {
        let spec = SynthSpec {
            kind: SynthKind::Burst,
            num_frames: 1000 + 500 * i,
            feature_dim: 64,
            seed,
            speedup: 10.0,
            spf: 2,
        };
        let dir = tempfile::tempdir().unwrap();
        let corpus = synth::generate(&spec).unwrap();
        synth::write_corpus(dir.path(), &corpus).unwrap();
        let opts = RunOptions {
            features: Some(dir.path().join("features.sffm")),
            detections: Some(dir.path().join("detections.jsonl")),
            frame_dims: Some((synth::SYNTH_FRAME_WIDTH, synth::SYNTH_FRAME_HEIGHT)),
            params: Params {
                speedup: 10.0,
                spf: 2,
                ..Params::default()
            },
            ..RunOptions::default()
        };
        let result = pipeline::run(&opts).unwrap();
        let ours = result.report.pipeline.semantic_retention;
        let theirs = result.report.uniform.semantic_retention;
        assert!(
            ours >= theirs,
            "burst trial {i}: retention {ours:.4} < uniform {theirs:.4}"
        );
    }

    // Constant semantic content: the budget equals the expected frame count,
    // every frame scores the same, so the kept mass is exactly the maximum.
    let spec = SynthSpec {
        kind: SynthKind::FullBurst,
        num_frames: 2000,
        feature_dim: 64,
        seed: 777,
        speedup: 10.0,
        spf: 2,
    };
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth::generate(&spec).unwrap();
    synth::write_corpus(dir.path(), &corpus).unwrap();
    let opts = RunOptions {
        features: Some(dir.path().join("features.sffm")),
        detections: Some(dir.path().join("detections.jsonl")),
        frame_dims: Some((synth::SYNTH_FRAME_WIDTH, synth::SYNTH_FRAME_HEIGHT)),
        params: Params {
            speedup: 10.0,
            spf: 2,
            ..Params::default()
        },
        ..RunOptions::default()
    };
    let result = pipeline::run(&opts).unwrap();
    let retention = result.report.pipeline.semantic_retention;
    assert_eq!(
        retention, 1.0,
        "budget-filling burst should retain exactly 1.0, got {retention}"
    );
    println!(
        "criterion 7 PASS: retention ≥ uniform on 8/8 burst corpora, \
         = 1.0 exactly on the budget-filling corpus"
    );
}

// ---------------------------------------------------------------------------
// 8. λ = 0 activates every frame on full-column-rank dictionaries.

#[test]
fn criterion_8_zero_lambda_full_activation() {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let tau = Params::default().tau_rel;
    for trial in 0..20 {
        let n = rng.random_range(2..=32);
        let f = n + rng.random_range(0..=32);
        let m = random_matrix(f, n, &mut rng);
        let dict = SegmentDictionary::build(&m, &vec![1.0; n]).unwrap();
        let count = num_of_frames(&dict, 0.0, tau).unwrap();
        assert_eq!(count, n, "trial {trial}: λ=0 activated {count} of {n}");
    }
    println!("criterion 8 PASS: λ = 0 activates all frames on 20 full-rank dictionaries");
}

// ---------------------------------------------------------------------------
// 9. Descriptor length, block order, and bit-identical re-extraction.

#[test]
fn criterion_9_descriptor_shape_and_determinism() {
    use semff_core::descriptor::describe_frame;
    use semff_core::detect::{BBox, Detection};
    use semff_core::features::{
        APPEARANCE_LEN, CONTENT_LEN, HOF_MAG_BINS, HOF_ORI_BINS, SEQUENCE_LEN,
    };
    use semff_core::flow::FlowField;
    use semff_core::frame::Frame;

    assert_eq!(DESCRIPTOR_LEN, 446);
    assert_eq!(
        HOF_MAG_BINS + HOF_ORI_BINS + APPEARANCE_LEN + CONTENT_LEN + SEQUENCE_LEN,
        DESCRIPTOR_LEN
    );

    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let (w, h) = (64usize, 48usize);
    for trial in 0..10 {
        let data: Vec<u8> = (0..w * h * 3).map(|_| rng.random::<u8>()).collect();
        let frame = Frame::from_rgb8(w, h, data).unwrap();
        let cells = (w / 8, h / 8);
        let nc = cells.0 * cells.1;
        let dx: Vec<f32> = (0..nc).map(|_| gauss(&mut rng) as f32).collect();
        let dy: Vec<f32> = (0..nc).map(|_| gauss(&mut rng) as f32).collect();
        let flow = FlowField::from_vectors(cells.0, cells.1, dx, dy).unwrap();
        let class = 7 + trial % 3;
        let det = Detection::new(
            class,
            0.8,
            BBox::new(10.0, 10.0, 20.0, 15.0).unwrap(),
        )
        .unwrap();
        let frame_index = 3 + trial;

        let d1 = describe_frame(&frame, &flow, std::slice::from_ref(&det), frame_index, false)
            .unwrap();
        let d2 = describe_frame(&frame, &flow, std::slice::from_ref(&det), frame_index, false)
            .unwrap();

        let m = FeatureMatrix::from_descriptors(std::slice::from_ref(&d1)).unwrap();
        assert_eq!(m.rows(), 446, "concatenated descriptor length");

        // Blocks land at their advertised offsets: the content block carries
        // the detection's class bin, the sequence block its frame position.
        let col = m.column(0);
        let content_off = HOF_MAG_BINS + HOF_ORI_BINS + APPEARANCE_LEN;
        let seq_off = content_off + CONTENT_LEN;
        assert!(
            col[content_off + class] > 0.0,
            "content block missing class {class}"
        );
        assert_eq!(col[seq_off + frame_index % SEQUENCE_LEN], 1.0);

        // Bit-identical re-extraction.
        let bits = |d: &semff_core::features::FrameDescriptor| {
            let m = FeatureMatrix::from_descriptors(std::slice::from_ref(d)).unwrap();
            m.data().iter().map(|x| x.to_bits()).collect::<Vec<u32>>()
        };
        assert_eq!(bits(&d1), bits(&d2), "trial {trial}: re-extraction differs");
    }
    println!(
        "criterion 9 PASS: 10 random frames, descriptors 446-long, blocks in order, \
         re-extraction bit-identical"
    );
}

// ---------------------------------------------------------------------------
// 10. Sampling + smoothing throughput on a 446×3000 segment.

#[test]
fn criterion_10_sampling_throughput() {
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let n = 3000;
    let f = 446;
    let params = Params::default();
    let target = 300;
    let sparse = semff_core::select::sparse_target(target, params.spf, n);
    let anchors = synth::pick_positions(n, sparse, &mut rng);
    let m = synth::planted_features(f, n, &anchors, &mut rng);
    let scores = vec![0.0; n];
    let plan = pipeline::plan_from_scores(&scores, &params).unwrap();
    let weights = vec![1.0; n];
    let cost = FeatureCost::new(&m);

    let start = Instant::now();
    let selection = semff_core::select::select_frames(&m, &weights, &plan, &params, &cost).unwrap();
    let elapsed = start.elapsed().as_secs_f64();

    assert_eq!(selection.len(), target);
    let fps = n as f64 / elapsed;
    assert!(
        fps >= 200.0,
        "sampling + smoothing ran at {fps:.0} frames/s (< 200) on {n} frames ({elapsed:.2} s)"
    );
    println!(
        "criterion 10 PASS: sampling + smoothing at {fps:.0} frames/s on a {f}x{n} segment \
         ({elapsed:.3} s)"
    );
}
