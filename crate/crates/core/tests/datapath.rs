//! Agreement between the fast path, the slow path and the ASIC-resident
//! VM-NC resolution of the ASIC-only gateway.

mod common;

use std::collections::BTreeMap;

use gwsim::control::GatewayVariant;
use gwsim::dpu::{fast_path, offload_install, slow_path, FastPathResult, FlowCache, MissReason};
use gwsim::packet::{PacketDescriptor, PathFlags};
use gwsim::sim::config::{FabricSpec, Locality, Popularity, ScenarioConfig};
use gwsim::sim::workload::generate_workload;
use gwsim::sim::Gateway;
use gwsim::verdict::PathKind;
use proptest::prelude::*;

fn config(variant: GatewayVariant, seed: u64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::new(variant, 4_000, 400);
    cfg.seed = seed;
    cfg.fabric = FabricSpec { tenants: 3, vms_per_tenant: 200, hosts: 40, vteps: 4, remote_nexthops: 4 };
    cfg.workload.distribution = Popularity::Zipf(1.1);
    cfg.workload.locality = Locality { local: 0.7, cross_region: 0.2, control: 0.1 };
    cfg
}

fn packets(cfg: &ScenarioConfig) -> Vec<PacketDescriptor> {
    let w = generate_workload(&cfg.workload, &cfg.fabric, cfg.packet_count, cfg.send_rate_pps, cfg.seed).unwrap();
    w.iter().collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn hybrid_and_asic_only_forward_identically(seed in any::<u64>()) {
        let cfg_h = config(GatewayVariant::AsicDpu, seed);
        let cfg_a = config(GatewayVariant::AsicOnly, seed);
        let mut h = Gateway::from_config(&cfg_h).unwrap();
        let mut a = Gateway::from_config(&cfg_a).unwrap();
        for p in packets(&cfg_h) {
            let (oh, _) = h.process(&p, false);
            let (oa, _) = a.process(&p, false);
            prop_assert_eq!(oh.egress, oa.egress);
            prop_assert_eq!(oh.drop, oa.drop);
            let local = matches!(oh.path, PathKind::FastHit | PathKind::SlowPath);
            prop_assert_eq!(local || oh.path == oa.path, true);
            if local {
                prop_assert_eq!(oa.path, PathKind::AsicOnly);
            }
        }
    }

    #[test]
    fn fast_hit_equals_slow_recompute(seed in any::<u64>()) {
        let cfg = config(GatewayVariant::AsicDpu, seed);
        let g = Gateway::from_config(&cfg).unwrap();
        let dp = g.control.dataplane();
        let mut cache = FlowCache::new(10_000);
        for p in packets(&cfg) {
            let (m0, _) = dp.asic.pre_dpu_process(&p, &dp.services, &dp.mode);
            if !m0.path_flags.contains(PathFlags::TO_DPU) {
                continue;
            }
            let mut slow_meta = m0;
            let decision = slow_path(&p, &mut slow_meta, &dp.slow).unwrap();
            let mut fast_meta = m0;
            match fast_path(&p, &mut fast_meta, &mut cache, &dp.services).unwrap() {
                FastPathResult::Hit(nh) => prop_assert_eq!(nh, decision.nexthop_index),
                FastPathResult::MissToSlowPath(r) => {
                    prop_assert_eq!(r, MissReason::NoEntry);
                    let key = gwsim::dpu::flow_key(&p);
                    offload_install(&mut cache, key, &decision, &dp.services, p.arrival_ns).unwrap();
                }
            }
            // The egress each path resolves to is the same too.
            let mut hit_meta = m0;
            if let FastPathResult::Hit(_) = fast_path(&p, &mut hit_meta, &mut cache, &dp.services).unwrap() {
                prop_assert_eq!(dp.asic.post_dpu_process(&hit_meta), dp.asic.post_dpu_process(&slow_meta));
            }
        }
    }
}

#[test]
fn ecmp_and_dpu_choice_are_stable() {
    let cfg = config(GatewayVariant::AsicDpu, 9);
    let mut g = Gateway::from_config(&cfg).unwrap();
    let mut seen: BTreeMap<_, (Option<u8>, Option<u32>)> = BTreeMap::new();
    for p in packets(&cfg) {
        let (o, _) = g.process(&p, false);
        let got = (o.dpu, o.egress.map(|e| e.nexthop.get()));
        let prev = seen.entry((p.encap.map(|e| e.vni.get()), p.inner)).or_insert(got);
        assert_eq!(*prev, got);
    }
}

#[test]
fn tenants_with_overlapping_addresses_stay_apart() {
    let cfg = config(GatewayVariant::AsicDpu, 4);
    let g = Gateway::from_config(&cfg).unwrap();
    let dp = g.control.dataplane();
    use gwsim::dpu::vm_nc_lookup;
    use gwsim::sim::fabric::{host_ip, host_of, tenant_table, vm_ip};
    for i in 0..cfg.fabric.vms_per_tenant {
        for t in 0..cfg.fabric.tenants {
            let got = vm_nc_lookup(&dp.slow.vm_nc, tenant_table(t), vm_ip(i)).unwrap();
            assert_eq!(got, host_ip(host_of(&cfg.fabric, t, i)));
        }
    }
    assert!(vm_nc_lookup(&dp.slow.vm_nc, 99, vm_ip(0)).is_err());
}
