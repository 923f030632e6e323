mod common;

use std::collections::BTreeSet;

use common::*;
use ehmec::domain::{comm_delay_mdcs, est_all, MdcId, ServerId};
use ehmec::energy::{battery_step, EhDevice};
use ehmec::scheduler::{best_mig_target, critical_path, deficit_policy, CpReference, DsmConfig, Planner, Snapshot};
use proptest::prelude::*;

const TIME_TOL: f64 = 1e-9;
const ENERGY_TOL: f64 = 1e-6;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIME_TOL * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn est_matches_path_enumeration(seed in any::<u64>()) {
        let s = random_setup(&mut rng(seed), 10);
        let est = est_all(&s.app, &s.placement, &s.net, &s.tenancy, &s.cost).unwrap();
        for i in 0..s.app.len() {
            prop_assert!(close(est.module(i), oracle_est(&s, i)), "module {i}");
        }
        prop_assert!(close(est.user(), oracle_latency(&s)));
    }

    #[test]
    fn critical_path_is_heaviest(seed in any::<u64>()) {
        let app = random_app(&mut rng(seed), 12);
        let r = CpReference::default();
        let cp = critical_path(&app, &r);
        let (ids, w) = oracle_critical_path(&app, &r);
        prop_assert!(close(cp.length, w));
        let idx: Vec<usize> = cp.modules.iter().map(|&m| app.index_of(m).unwrap()).collect();
        prop_assert!(close(path_weight(&app, &idx, &r), w));
        prop_assert_eq!(cp.modules, ids);
    }

    #[test]
    fn multi_hop_delay_is_the_sum_of_hops(seed in any::<u64>(), size in 0.0f64..100.0) {
        let s = random_setup(&mut rng(seed), 3);
        let n = s.net.mdcs().len() as u32;
        for a in 0..n {
            for b in 0..n {
                let (a, b) = (MdcId(a), MdcId(b));
                let d = comm_delay_mdcs(size, a, b, &s.net, &s.cost.units).unwrap();
                prop_assert!(close(d, hop_delay(&s.net, size, a, b, &s.cost)));
                prop_assert!(close(d, comm_delay_mdcs(size, b, a, &s.net, &s.cost.units).unwrap()));
            }
        }
    }

    #[test]
    fn latency_grows_with_workload(seed in any::<u64>(), bump in 0.0f64..10.0) {
        let s = random_setup(&mut rng(seed), 8);
        let before = oracle_latency(&s);
        let docs = ehmec::workload::DagDocument::from_app(&s.app);
        let mut heavier = docs.clone();
        for m in &mut heavier.modules {
            m.wl += bump;
        }
        let app = heavier.to_app().unwrap();
        let est = est_all(&app, &s.placement, &s.net, &s.tenancy, &s.cost).unwrap();
        prop_assert!(est.user() >= before - TIME_TOL);
    }

    #[test]
    fn battery_stays_in_bounds(
        cap in 1.0f64..5000.0,
        level in 0.0f64..1.0,
        harvest in 0.0f64..500.0,
        draw in 0.0f64..1.0,
    ) {
        let d = EhDevice::new(MdcId(0), cap, level * cap, 0.1);
        let consumed = draw * (d.battery + harvest);
        let step = battery_step(&d, harvest, consumed).unwrap();
        prop_assert!(step.device.battery >= 0.0 && step.device.battery <= cap);
        let balance = d.battery + harvest - consumed - step.overflow - step.device.battery;
        prop_assert!(balance.abs() <= ENERGY_TOL);
    }

    #[test]
    fn deficit_scaling_fits_supply(seed in any::<u64>(), ratio in 1e-4f64..1.0) {
        let s = random_setup(&mut rng(seed), 10);
        let cp = critical_path(&s.app, &CpReference::default());
        let tasks = 50.0;
        let n_mdcs = s.net.mdcs().len();
        let demand: Vec<f64> = (0..n_mdcs)
            .map(|m| oracle_demand(&s.app, &s.net, &s.placement, &s.cost, tasks, MdcId(m as u32)))
            .collect();
        let supply: Vec<f64> = demand.iter().map(|d| d * ratio).collect();
        let snap = Snapshot { app: &s.app, cp: &cp, net: &s.net, placement: &s.placement, supply: supply.clone(), predicted_tasks: tasks };
        let cfg = DsmConfig { cost: s.cost, ..DsmConfig::default() };
        let mut p = Planner::new(&snap, &cfg);
        let cls = p.classify();
        deficit_policy(&mut p, &cls).unwrap();
        for m in &cls.deficit {
            let after = oracle_demand(&s.app, &p.net, &p.placement, &s.cost, tasks, *m);
            prop_assert!(after <= supply[m.index()] + ENERGY_TOL, "MDC {m}: {after} > {}", supply[m.index()]);
        }
    }

    #[test]
    fn migration_target_matches_exhaustive_search(seed in any::<u64>()) {
        let mut r = rng(seed);
        let s = random_setup(&mut r, 8);
        let cp = critical_path(&s.app, &CpReference::default());
        let tasks = 20.0;
        let n_mdcs = s.net.mdcs().len();
        let supply: Vec<f64> = (0..n_mdcs).map(|_| rand::Rng::random_range(&mut r, 0.0..20_000.0)).collect();
        let snap = Snapshot { app: &s.app, cp: &cp, net: &s.net, placement: &s.placement, supply: supply.clone(), predicted_tasks: tasks };
        let cfg = DsmConfig { cost: s.cost, ..DsmConfig::default() };
        let mut p = Planner::new(&snap, &cfg);
        let surplus: BTreeSet<MdcId> = p.classify().surplus;
        let idx = cp.modules.iter().map(|&m| s.app.index_of(m).unwrap()).next().unwrap();
        let got = best_mig_target(&mut p, idx, &surplus).unwrap();

        let from = s.placement.host(idx);
        let before = oracle_latency(&s);
        let mut best: Option<(f64, ServerId)> = None;
        for srv in s.net.servers() {
            if srv.id == from || !surplus.contains(&srv.mdc) {
                continue;
            }
            let mut hosts = s.placement.hosts().to_vec();
            hosts[idx] = srv.id;
            let moved = ehmec::domain::Placement::from_hosts(hosts);
            let demand = oracle_demand(&s.app, &s.net, &moved, &s.cost, tasks, srv.mdc);
            let lat = oracle_latency_of(&s.app, &s.net, &moved, &s.cost);
            if supply[srv.mdc.index()] > demand && lat < before - cfg.min_latency_gain
                && best.is_none_or(|(b, _)| lat < b) {
                best = Some((lat, srv.id));
            }
        }
        match (got, best) {
            (None, None) => {}
            (Some(c), Some((lat, _))) => prop_assert!(close(c.latency, lat)),
            (g, b) => prop_assert!(false, "library {g:?} vs oracle {b:?}"),
        }
    }
}
