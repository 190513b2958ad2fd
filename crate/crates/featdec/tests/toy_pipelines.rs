//! End-to-end checks of the decomposition pipelines on the synthetic
//! benchmarks, using the cheap fixed-split and PCA transforms.

use featdec::decomp::{pca_apply, pca_fit};
use featdec::density::{self, Variant};
use featdec::featstore::{gen_toy128, split_dims, FeatureSet, ToySpec};
use featdec::metrics::{
    auroc, combined_score_normalized, dataset_distance, normalize_scores, ScoreVector,
};
use featdec::DEFAULT_SEED;

fn pooled(a: &ScoreVector, b: &ScoreVector) -> ScoreVector {
    ScoreVector::new(a.values.iter().chain(&b.values).cloned().collect())
}

struct SplitScores {
    train: ScoreVector,
    test: ScoreVector,
    ood_dis: ScoreVector,
    ood_nondis: ScoreVector,
}

fn score_subspace(
    train: &FeatureSet,
    test: &FeatureSet,
    ood_dis: &FeatureSet,
    ood_nondis: &FeatureSet,
) -> SplitScores {
    let model = density::fit(train, Variant::SharedMaha, None).unwrap();
    SplitScores {
        train: density::score(&model, train).unwrap(),
        test: density::score(&model, test).unwrap(),
        ood_dis: density::score(&model, ood_dis).unwrap(),
        ood_nondis: density::score(&model, ood_nondis).unwrap(),
    }
}

#[test]
fn toy128_split_pipeline_distances_and_combination() {
    let data = gen_toy128(&ToySpec::toy128(DEFAULT_SEED)).unwrap();
    let split = |fs: &FeatureSet| split_dims(fs, 10).unwrap();
    let (train_d, train_n) = split(&data.train);
    let (test_d, test_n) = split(&data.test_in);
    let (oodd_d, oodd_n) = split(&data.ood_dis);
    let (oodn_d, oodn_n) = split(&data.ood_nondis);

    let dis = score_subspace(&train_d, &test_d, &oodd_d, &oodn_d);
    let nondis = score_subspace(&train_n, &test_n, &oodd_n, &oodn_n);

    // distances separate by construction: discriminative OoD is far in the
    // dis channel, non-discriminative OoD in the nondis channel
    let report_ood_dis = dataset_distance(
        &dis.train,
        &dis.test,
        &dis.ood_dis,
        &nondis.train,
        &nondis.test,
        &nondis.ood_dis,
        1,
        false,
    )
    .unwrap();
    let report_ood_nondis = dataset_distance(
        &dis.train,
        &dis.test,
        &dis.ood_nondis,
        &nondis.train,
        &nondis.test,
        &nondis.ood_nondis,
        1,
        false,
    )
    .unwrap();
    println!(
        "ood_dis: d_dis = {:.3}, d_nondis = {:.3}; ood_nondis: d_dis = {:.3}, d_nondis = {:.3}",
        report_ood_dis.d_dis,
        report_ood_dis.d_nondis,
        report_ood_nondis.d_dis,
        report_ood_nondis.d_nondis
    );
    assert!(report_ood_dis.d_dis > report_ood_dis.d_nondis);
    assert!(report_ood_nondis.d_nondis > report_ood_nondis.d_dis);

    // scaling every raw score leaves the normalized distances unchanged
    let scale = |s: &ScoreVector| {
        let mut out = s.clone();
        for v in &mut out.values {
            *v *= 10.0;
        }
        out
    };
    let scaled = dataset_distance(
        &scale(&dis.train),
        &scale(&dis.test),
        &scale(&dis.ood_dis),
        &scale(&nondis.train),
        &scale(&nondis.test),
        &scale(&nondis.ood_dis),
        1,
        false,
    )
    .unwrap();
    assert!((scaled.d_dis - report_ood_dis.d_dis).abs() < 1e-6);
    assert!((scaled.d_nondis - report_ood_dis.d_nondis).abs() < 1e-6);

    // the combined score keeps (almost) the best of both channels on the
    // pooled benchmark
    let comb_test =
        combined_score_normalized(&dis.test, &dis.train, &nondis.test, &nondis.train).unwrap();
    let comb_ood = pooled(
        &combined_score_normalized(&dis.ood_dis, &dis.train, &nondis.ood_dis, &nondis.train)
            .unwrap(),
        &combined_score_normalized(&dis.ood_nondis, &dis.train, &nondis.ood_nondis, &nondis.train)
            .unwrap(),
    );
    let auroc_comb = auroc(&comb_test, &comb_ood).unwrap();
    let auroc_dis = auroc(&dis.test, &pooled(&dis.ood_dis, &dis.ood_nondis)).unwrap();
    let auroc_nondis = auroc(&nondis.test, &pooled(&nondis.ood_dis, &nondis.ood_nondis)).unwrap();
    println!(
        "pooled AUROC: combined = {auroc_comb:.4}, dis = {auroc_dis:.4}, nondis = {auroc_nondis:.4}"
    );
    assert!(auroc_comb >= auroc_dis.max(auroc_nondis) - 0.01);
}

#[test]
fn toy128_pca_keeps_class_separation_in_leading_block() {
    let mut spec = ToySpec::toy128(DEFAULT_SEED);
    spec.ood_per_set = 10;
    let data = gen_toy128(&spec).unwrap();
    let transform = pca_fit(&data.train, 10).unwrap();
    let (zd, zn) = pca_apply(&transform, &data.train).unwrap();

    let class_means = |fs: &FeatureSet| -> Vec<Vec<f64>> {
        (0..10u32)
            .map(|c| {
                let idx = fs.class_indices(c);
                let mut mean = vec![0.0; fs.dim()];
                for &i in &idx {
                    for (m, v) in mean.iter_mut().zip(fs.sample(i)) {
                        *m += v;
                    }
                }
                for m in &mut mean {
                    *m /= idx.len() as f64;
                }
                mean
            })
            .collect()
    };
    let pairwise_sum = |means: &[Vec<f64>]| -> f64 {
        let mut total = 0.0;
        for i in 0..means.len() {
            for j in (i + 1)..means.len() {
                let d2: f64 = means[i]
                    .iter()
                    .zip(&means[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                total += d2.sqrt();
            }
        }
        total
    };
    let sep_d = pairwise_sum(&class_means(&zd));
    let sep_n = pairwise_sum(&class_means(&zn));
    let ratio = sep_d / (sep_d + sep_n);
    println!("between-class separation carried by z_d: {:.1}%", 100.0 * ratio);
    assert!(ratio >= 0.95, "ratio {ratio}");
}

#[test]
fn toy128_classwise_rows_match_aggregate_aurocs() {
    let mut spec = ToySpec::toy128(DEFAULT_SEED);
    spec.ood_per_set = 800;
    spec.train_per_class = 300;
    spec.test_per_class = 200;
    let data = gen_toy128(&spec).unwrap();
    let split = |fs: &FeatureSet| split_dims(fs, 10).unwrap();
    let (train_d, train_n) = split(&data.train);
    let (test_d, test_n) = split(&data.test_in);
    let (oodd_d, oodd_n) = split(&data.ood_dis);
    let (oodn_d, oodn_n) = split(&data.ood_nondis);
    let dis = score_subspace(&train_d, &test_d, &oodd_d, &oodn_d);
    let nondis = score_subspace(&train_n, &test_n, &oodd_n, &oodn_n);

    // treat each OoD population as one class
    let out_dis = pooled(&dis.ood_dis, &dis.ood_nondis);
    let out_nondis = pooled(&nondis.ood_dis, &nondis.ood_nondis);
    let labels: Vec<i32> = std::iter::repeat(0)
        .take(800)
        .chain(std::iter::repeat(1).take(800))
        .collect();
    let rows = featdec::metrics::classwise_report(
        &dis.test,
        &nondis.test,
        &dis.train,
        &nondis.train,
        &out_dis,
        &out_nondis,
        &labels,
        1,
        false,
    )
    .unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].samples, 800);
    // rows reproduce the aggregate AUROCs of each population
    assert_eq!(rows[0].dis_auroc, auroc(&dis.test, &dis.ood_dis).unwrap());
    assert_eq!(
        rows[1].nondis_auroc,
        auroc(&nondis.test, &nondis.ood_nondis).unwrap()
    );
    // and per-class mean normalized scores are finite summaries
    assert!(rows.iter().all(|r| r.mean_norm_dis.is_finite()));

    // sanity: a population identical to the in-distribution sample sits at
    // chance in both channels
    let self_rows = featdec::metrics::classwise_report(
        &dis.test,
        &nondis.test,
        &dis.train,
        &nondis.train,
        &dis.test,
        &nondis.test,
        &vec![3; dis.test.len()],
        1,
        false,
    )
    .unwrap();
    assert_eq!(self_rows[0].dis_auroc, 0.5);
    assert_eq!(self_rows[0].nondis_auroc, 0.5);

    // normalized in-distribution scores are standardized against train
    let norm = normalize_scores(&dis.train, &dis.train).unwrap();
    assert!(norm.mean().abs() < 1e-10);
}
