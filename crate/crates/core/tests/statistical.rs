//! Distributional checks on the synthetic generator and the detection model:
//! KS self-tests of the generated length law, subsampling stability, benign
//! false-positive control, and injected-burst detection.

use burrscan_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

fn true_cdf(x: f64) -> f64 {
    // Normal(15, 5) with the integer continuity correction; the clipped,
    // rounded draw law matches this exactly on [4, 60)
    let z = (x + 0.5 - 15.0) / 5.0;
    0.5 * libm::erfc(-z / core::f64::consts::SQRT_2)
}

fn dnss_model(seed: u64, names: u32) -> BenignModel {
    BenignModel { unique_names: names, max_visits: 1, seed, ..BenignModel::default() }
}

#[test]
fn dnss_length_law_passes_ks_self_test() {
    let records = generate_benign(&dnss_model(1, 50_000)).unwrap();
    let space = build_space(records.iter(), SpaceKind::Dnss);
    let hist = length_histogram(&space);
    let (lo, hi) = hist.hull().unwrap();
    let cdf = empirical_cdf(&hist).unwrap();
    let ks = ks_statistic(&cdf, true_cdf, lo..=hi);
    let crit = ks_critical_value(50_000, 0.05).unwrap();
    assert!(ks.d_stat < crit, "D = {} at {} vs {}", ks.d_stat, ks.at_length, crit);
}

#[test]
fn adnss_preserves_the_length_law() {
    // replicating each name uniformly 1..M leaves the length law intact;
    // the critical value uses the effective (Kish) sample size
    let model = BenignModel { unique_names: 50_000, seed: 1, ..BenignModel::default() };
    let records = generate_benign(&model).unwrap();
    let space = build_space(records.iter(), SpaceKind::Adnss);
    let hist = length_histogram(&space);
    let (lo, hi) = hist.hull().unwrap();
    let cdf = empirical_cdf(&hist).unwrap();
    let ks = ks_statistic(&cdf, true_cdf, lo..=hi);
    let crit = ks_critical_value(hist.effective_n().round() as u64, 0.05).unwrap();
    assert!(ks.d_stat < crit, "D = {} vs {}", ks.d_stat, crit);
}

#[test]
fn subsample_matches_full_sample_fit() {
    // a 10% uniform subsample of a 100k-name space stays consistent with
    // the full-sample fit in at least 90% of seeds
    let records = generate_benign(&dnss_model(7, 100_000)).unwrap();
    let space = build_space(records.iter(), SpaceKind::Dnss);
    let names: Vec<&str> = space.entries().map(|(n, _)| n).collect();
    let full_fit = fit_gaussian(&length_histogram(&space)).unwrap();

    let mut passes = 0;
    for seed in 0..50u64 {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut counts = std::collections::BTreeMap::new();
        let sub_n = names.len() / 10;
        for _ in 0..sub_n {
            let name = names[rng.gen_range(0..names.len())];
            *counts.entry(name.len() as u32).or_insert(0u64) += 1;
        }
        let lo = *counts.keys().next().unwrap();
        let hi = *counts.keys().next_back().unwrap();
        let cdf = EmpiricalCdf::from_counts(counts).unwrap();
        let ks = ks_statistic(&cdf, |x| theoretical_cdf(&full_fit, x), lo..=hi);
        if ks.d_stat < ks_critical_value(sub_n as u64, 0.05).unwrap() {
            passes += 1;
        }
    }
    assert!(passes >= 45, "only {passes}/50 subsamples consistent");
}

#[test]
fn fit_recovers_the_generating_parameters() {
    let mut mus = Vec::new();
    let mut sigmas = Vec::new();
    for seed in 0..20u64 {
        let records = generate_benign(&dnss_model(seed, 50_000)).unwrap();
        let space = build_space(records.iter(), SpaceKind::Dnss);
        let fit = fit_gaussian(&length_histogram(&space)).unwrap();
        assert!(fit.converged);
        mus.push(fit.mu);
        sigmas.push(fit.sigma);
    }
    for (&mu, &sigma) in mus.iter().zip(&sigmas) {
        assert!((14.8..=15.2).contains(&mu), "mu = {mu}");
        assert!((4.6..=5.4).contains(&sigma), "sigma = {sigma}");
    }
}

#[test]
fn fit_gradient_vanishes_at_optimum() {
    // RSS gradient at the reported optimum, cross-checked against central
    // finite differences, over the fit's own (masked) domain
    for seed in [3u64, 11, 27] {
        let records = generate_benign(&dnss_model(seed, 50_000)).unwrap();
        let space = build_space(records.iter(), SpaceKind::Dnss);
        let hist = length_histogram(&space);
        let fit = fit_gaussian(&hist).unwrap();

        let (lo, hi) = hist.hull().unwrap();
        let points: Vec<(f64, f64)> = (lo..=hi)
            .filter(|x| !fit.masked_lengths.contains(x))
            .map(|x| (x as f64, hist.count(x) as f64))
            .collect();
        let rss = |mu: f64, sigma: f64, amp: f64| -> f64 {
            points
                .iter()
                .map(|&(x, y)| {
                    let z = (x - mu) / sigma;
                    let r = y - amp * (-0.5 * z * z).exp();
                    r * r
                })
                .sum()
        };
        let grad = {
            let mut g = [0.0f64; 3];
            for &(x, y) in &points {
                let z = (x - fit.mu) / fit.sigma;
                let m = fit.amplitude * (-0.5 * z * z).exp();
                let r = y - m;
                g[0] += -2.0 * r * m * (x - fit.mu) / (fit.sigma * fit.sigma);
                g[1] += -2.0 * r * m * (x - fit.mu) * (x - fit.mu)
                    / (fit.sigma * fit.sigma * fit.sigma);
                g[2] += -2.0 * r * m / fit.amplitude;
            }
            g
        };
        let norm = (grad[0] * grad[0] + grad[1] * grad[1] + grad[2] * grad[2]).sqrt();
        assert!(
            norm < 1e-6 * fit.amplitude,
            "seed {seed}: |grad| = {norm:.3e} vs amp {}",
            fit.amplitude
        );

        // steps small enough that the h^2 truncation term stays below the
        // comparison tolerance despite the large RSS curvatures
        let (h_mu, h_sigma, h_amp) = (1e-6 * fit.mu.abs(), 1e-6 * fit.sigma, 1e-6 * fit.amplitude);
        let fd = [
            (rss(fit.mu + h_mu, fit.sigma, fit.amplitude)
                - rss(fit.mu - h_mu, fit.sigma, fit.amplitude))
                / (2.0 * h_mu),
            (rss(fit.mu, fit.sigma + h_sigma, fit.amplitude)
                - rss(fit.mu, fit.sigma - h_sigma, fit.amplitude))
                / (2.0 * h_sigma),
            (rss(fit.mu, fit.sigma, fit.amplitude + h_amp)
                - rss(fit.mu, fit.sigma, fit.amplitude - h_amp))
                / (2.0 * h_amp),
        ];
        for i in 0..3 {
            assert!(
                (grad[i] - fd[i]).abs() < 1e-3 * fit.amplitude.max(1.0),
                "seed {seed} component {i}: analytic {} vs fd {}",
                grad[i],
                fd[i]
            );
        }
    }
}

#[test]
fn benign_histograms_have_no_burrs() {
    let mut zero = 0;
    for seed in 0..50u64 {
        let records = generate_benign(&dnss_model(100 + seed, 20_000)).unwrap();
        let space = build_space(records.iter(), SpaceKind::Dnss);
        let hist = length_histogram(&space);
        let fit = fit_gaussian(&hist).unwrap();
        let band = delineation_band(&hist, &fit, 0.05).unwrap();
        if detect_burrs(&hist, &band, BurrMode::UpperOnly).is_empty() {
            zero += 1;
        }
    }
    assert!(zero >= 45, "only {zero}/50 benign histograms were burr-free");
}

#[test]
fn injected_family_always_burrs_at_its_length() {
    for seed in 0..50u64 {
        let model = BenignModel { unique_names: 5_000, seed: 200 + seed, ..BenignModel::default() };
        let records = generate_benign(&model).unwrap();
        let tunnel = TunnelModel {
            qname_len: 67,
            query_count: 5_000,
            seed: 900 + seed,
            burst_span_us: model.span_us,
            ..TunnelModel::default()
        };
        let merged = inject_tunnel(records, &tunnel).unwrap();
        let space = build_space(merged.iter(), SpaceKind::Adnss);
        let hist = length_histogram(&space);
        let fit = fit_gaussian(&hist).unwrap();
        let band = delineation_band(&hist, &fit, 0.05).unwrap();
        let burrs = detect_burrs(&hist, &band, BurrMode::UpperOnly);
        assert!(!burrs.is_empty(), "seed {seed}: no burrs");
        assert_eq!(burrs[0].length, 67, "seed {seed}: largest excess not at 67");
    }
}

#[test]
fn benign_windows_mostly_clean() {
    let mut clean = 0;
    for seed in 0..25u64 {
        let model = BenignModel { unique_names: 4_762, seed: 300 + seed, ..BenignModel::default() };
        let records = generate_benign(&model).unwrap();
        let w = TimeWindow { index: 0, start_us: 0, end_us: model.span_us };
        let res = analyze_window(w, &records, &AnalysisParams::default());
        assert!(!res.unfit, "seed {seed} unfit");
        if res.burrs.is_empty() {
            clean += 1;
        }
    }
    assert!(clean >= 22, "only {clean}/25 benign windows clean");
}

#[test]
fn injected_window_detects_and_collects_domains() {
    let model = BenignModel { unique_names: 4_762, seed: 42, ..BenignModel::default() };
    let records = generate_benign(&model).unwrap();
    let tunnel = TunnelModel {
        qname_len: 67,
        query_count: 5_000,
        burst_start_us: model.span_us / 3,
        burst_span_us: model.span_us / 10,
        seed: 43,
        ..TunnelModel::default()
    };
    let merged = inject_tunnel(records, &tunnel).unwrap();
    let w = TimeWindow { index: 0, start_us: 0, end_us: model.span_us };
    let res = analyze_window(w, &merged, &AnalysisParams::default());
    assert!(res.has_burr_at(67));
    let domains = &res.domains_at[&67];
    assert!(!domains.is_empty());
    assert!(domains.iter().all(|(n, _)| n.ends_with(".b.tunnel.com")));
    assert!(res.space_sizes.1 > res.space_sizes.0);
}

#[test]
fn window_with_too_few_lengths_is_unfit() {
    let records: Vec<QueryRecord> = (0..100)
        .map(|i| QueryRecord::new(i, "fixed.example.com", 1, None))
        .collect();
    let w = TimeWindow { index: 0, start_us: 0, end_us: 1_000 };
    let res = analyze_window(w, &records, &AnalysisParams::default());
    assert!(res.unfit);
}

#[test]
fn recurring_hot_domain_never_in_sudden_reports() {
    // a hot domain forcing a burr at its length in every window must never
    // surface in any difference set
    let hot = "telemetry.fleet.example.com"; // length 27
    let day = 86_400_000_000i64;
    let mut results = Vec::new();
    for win in 0..3usize {
        let start = win as i64 * 30 * day;
        let model = BenignModel {
            unique_names: 3_000,
            start_us: start,
            span_us: 30 * day,
            seed: 500 + win as u64,
            ..BenignModel::default()
        };
        let mut records = generate_benign(&model).unwrap();
        for k in 0..5_000i64 {
            records.push(QueryRecord::new(start + k * 400_000, hot, 1, None));
        }
        records.sort_by_key(|r| r.timestamp_us);
        let w = TimeWindow { index: win, start_us: start, end_us: start + 30 * day };
        results.push(analyze_window(w, &records, &AnalysisParams::default()));
    }
    for r in &results {
        assert!(r.has_burr_at(27), "window {} lost the hot burr", r.window.index);
    }
    for pair in results.windows(2) {
        let rep = sudden_burrs(&pair[0], &pair[1]).unwrap();
        for entry in &rep.entries {
            assert!(
                entry.new_domains.iter().all(|(n, _)| n != hot),
                "hot domain leaked into window {} report",
                rep.to_window
            );
        }
    }
}
