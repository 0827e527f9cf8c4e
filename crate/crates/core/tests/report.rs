use fedbandit::graph::make_complete;
use fedbandit::report::{
    emit_plot, read_regret_csv, regret_rows, write_regret_csv, RegretRow, Series,
};
use fedbandit::sim::{aggregate, Algorithm, EnvSeed, EnvironmentSpec, SimConfig};
use proptest::prelude::*;

proptest! {
    #[test]
    fn any_finite_value_round_trips(
        values in proptest::collection::vec((any::<f64>(), any::<f64>()), 1..40),
        name in "[a-z0-9@().-]{1,12}",
    ) {
        let rows: Vec<RegretRow> = values
            .iter()
            .filter(|(m, s)| m.is_finite() && s.is_finite())
            .enumerate()
            .map(|(t, &(m, s))| RegretRow { algorithm: name.clone(), t: t + 1, mean_avg_regret: m, sd_avg_regret: s })
            .collect();
        let mut buf = Vec::new();
        write_regret_csv(&mut buf, &rows).unwrap();
        let back = read_regret_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.len(), rows.len());
        for (a, b) in back.iter().zip(&rows) {
            prop_assert_eq!(a.mean_avg_regret.to_bits(), b.mean_avg_regret.to_bits());
            prop_assert_eq!(a.sd_avg_regret.to_bits(), b.sd_avg_regret.to_bits());
        }
    }

    #[test]
    fn plots_are_deterministic(ys in proptest::collection::vec(-1e6f64..1e6, 1..50)) {
        let pts: Vec<(f64, f64)> = ys.iter().enumerate().map(|(i, &y)| (i as f64, y)).collect();
        let s = [Series::new("a", pts.clone()), Series::new("b & <c>", pts)];
        let one = emit_plot(&s, "title", "x", "y").unwrap();
        prop_assert_eq!(&one, &emit_plot(&s, "title", "x", "y").unwrap());
        prop_assert!(one.contains("b &amp; &lt;c&gt;"));
    }
}

#[test]
fn aggregate_table_round_trips() {
    let mut cfg = SimConfig::new(
        make_complete(4).unwrap(),
        EnvironmentSpec::ActivatedBernoulli {
            seed: EnvSeed::PerRun,
        },
        Algorithm::FedExp3,
        3,
        120,
    )
    .unwrap();
    cfg.runs = 3;
    let agg = aggregate(&cfg).unwrap();
    let rows = regret_rows("fedexp3", &agg);
    assert_eq!(rows.len(), 120);
    assert_eq!(rows[0].t, 1);
    let mut buf = Vec::new();
    write_regret_csv(&mut buf, &rows).unwrap();
    let back = read_regret_csv(buf.as_slice()).unwrap();
    assert_eq!(back, rows);
    for r in &back {
        assert_eq!(r.mean_avg_regret, agg.mean[r.t]);
        assert_eq!(r.sd_avg_regret, agg.sd[r.t]);
    }
}
