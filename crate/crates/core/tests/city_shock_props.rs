use bankrun_core::panel::{city_shocks, BankYearRow, Rescale};
use proptest::prelude::*;

fn bank() -> impl Strategy<Value = (u8, Option<f64>, Option<usize>, bool, bool)> {
    (0u8..3, prop::option::weighted(0.9, 1.0f64..1e6), prop::option::weighted(0.8, 0usize..3), any::<bool>(), any::<bool>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn tercile_shocks_are_run_shares_within_tercile(banks in proptest::collection::vec(bank(), 1..30)) {
        let mut rows = Vec::new();
        let mut terciles = Vec::new();
        for (i, (city, assets, t, run, fail)) in banks.iter().enumerate() {
            rows.push(BankYearRow {
                bank_id: format!("b{i}"),
                year: 1900,
                city_key: format!("36:c{city}"),
                assets: *assets,
                run: *run,
                run_no_failure: *run && !*fail,
                failure: *fail,
                failure_with_run: *run && *fail,
                ..Default::default()
            });
            terciles.push(*t);
        }
        let out = city_shocks(&rows, &terciles, Rescale::TercileWeight);
        for c in &out {
            let members: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].city_key == c.city_key && rows[i].assets.is_some()).collect();
            prop_assert_eq!(c.n_banks, members.len());
            let total: f64 = members.iter().map(|&i| rows[i].assets.unwrap()).sum();
            for (j, got) in [(0, c.run_weak), (1, c.run_intermediate), (2, c.run_strong)] {
                let inside: Vec<usize> = members.iter().copied().filter(|&i| terciles[i] == Some(j)).collect();
                let share: f64 = inside.iter().map(|&i| rows[i].assets.unwrap() / total).sum();
                let ran: f64 = inside.iter().filter(|&&i| rows[i].run).map(|&i| rows[i].assets.unwrap() / total).sum();
                let want = if share > 0.0 { ran / share } else { 0.0 };
                prop_assert!((got - want).abs() < 1e-12, "{} vs {}", got, want);
                prop_assert!((0.0..=1.0).contains(&got));
                if !inside.is_empty() && inside.iter().all(|&i| rows[i].run) {
                    prop_assert_eq!(got, 1.0);
                }
            }
            for s in c.shocks() {
                prop_assert!((0.0..=1.0).contains(&s));
            }
        }
    }
}
