use burrscan_core::*;
use std::time::Instant;

fn main() {
    for m in [1u32, 5, 20, 100] {
        let t0 = Instant::now();
        let model = BenignModel {
            unique_names: 50_000,
            max_visits: m,
            seed: 1,
            ..BenignModel::default()
        };
        let records = generate_benign(&model).unwrap();
        let t_gen = t0.elapsed();
        let t1 = Instant::now();
        let dnss = build_space(records.iter(), SpaceKind::Dnss);
        let adnss = build_space(records.iter(), SpaceKind::Adnss);
        let t_build = t1.elapsed();
        let t2 = Instant::now();
        let hist = length_histogram(&dnss);
        let fit = fit_gaussian(&hist).unwrap();
        let t_fit = t2.elapsed();
        println!(
            "M={m:3}: {} records, gen {:?}, spaces {:?}, fit {:?} (iters {}), adnss_n {}",
            records.len(), t_gen, t_build, t_fit, fit.iterations, adnss.capacity()
        );
    }
}
