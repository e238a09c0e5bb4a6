use std::collections::BTreeMap;

use qkdnet_core::keymgmt::StatsReport;
use qkdnet_core::kms::{
    select_route, AlarmCause, Demand, Graph, Kms, KmsAction, KmsCommand, KmsConfig, LinkInfo, LinkStatus,
    RoutePolicy,
};
use qkdnet_core::Error;

fn link(id: &str, a: &str, b: &str, km: f64) -> LinkInfo {
    LinkInfo { id: id.into(), a: a.into(), b: b.into(), distance_km: km }
}

fn tokyo_links() -> Vec<LinkInfo> {
    vec![
        link("L1", "Otemachi-1", "Otemachi-2", 24.0),
        link("L2", "Koganei-1", "Otemachi-1", 45.0),
        link("L3", "Koganei-1", "Koganei-2", 90.0),
        link("L4", "Koganei-2", "Koganei-3", 1.0),
        link("L5", "Koganei-2", "Otemachi-2", 45.0),
        link("L6", "Otemachi-1", "Hongo", 13.0),
    ]
}

fn nodes(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn demand() -> Demand {
    Demand {
        id: "d".into(),
        src: "Koganei-1".into(),
        dst: "Otemachi-2".into(),
        priority: vec![
            nodes(&["Koganei-1", "Koganei-2", "Otemachi-2"]),
            nodes(&["Koganei-1", "Otemachi-1", "Otemachi-2"]),
        ],
    }
}

fn kms() -> Kms {
    Kms::new(tokyo_links(), vec![demand()], KmsConfig::default()).unwrap()
}

fn report(link: &str, t: f64, qber: f64) -> StatsReport {
    StatsReport {
        link_id: link.into(),
        timestamp_s: t,
        qber,
        sifted_bps: 9000.0,
        secure_bps: 2000.0,
        buffer_bits: 1 << 20,
    }
}

#[test]
fn static_priority_prefers_the_135_km_route() {
    let k = kms();
    let r = k.route("d").unwrap();
    assert_eq!(r.nodes, nodes(&["Koganei-1", "Koganei-2", "Otemachi-2"]));
    assert_eq!(r.links, ["L3", "L5"]);
    assert_eq!(r.total_distance_km, 135.0);
}

#[test]
fn route_avoids_a_link_in_alarm() {
    let graph = Graph::new(tokyo_links()).unwrap();
    let status = BTreeMap::from([("L3".to_string(), LinkStatus::Alarm)]);
    let r = select_route(
        &graph,
        &status,
        &BTreeMap::new(),
        "Koganei-1",
        "Otemachi-2",
        &demand().priority,
        RoutePolicy::StaticPriority,
    )
    .unwrap();
    assert_eq!(r.total_distance_km, 69.0);
}

#[test]
fn single_link_down_leaves_no_route() {
    let graph = Graph::new(vec![link("L", "A", "B", 5.0)]).unwrap();
    let status = BTreeMap::from([("L".to_string(), LinkStatus::Down)]);
    let err = select_route(&graph, &status, &BTreeMap::new(), "A", "B", &[], RoutePolicy::StaticPriority).unwrap_err();
    assert!(matches!(err, Error::NoRoute { .. }));
}

#[test]
fn max_min_buffer_picks_the_fullest_bottleneck() {
    let graph = Graph::new(tokyo_links()).unwrap();
    let buffers = BTreeMap::from([
        ("L1".to_string(), 100),
        ("L2".to_string(), 5000),
        ("L3".to_string(), 900),
        ("L5".to_string(), 800),
    ]);
    let r = select_route(&graph, &BTreeMap::new(), &buffers, "Koganei-1", "Otemachi-2", &[], RoutePolicy::MaxMinBuffer)
        .unwrap();
    assert_eq!(r.links, ["L3", "L5"]);
    // Equal bottlenecks fall back to the shorter route.
    let even = BTreeMap::from([("L1", 500), ("L2", 500), ("L3", 500), ("L5", 500)].map(|(k, v)| (k.to_string(), v)));
    let r = select_route(&graph, &BTreeMap::new(), &even, "Koganei-1", "Otemachi-2", &[], RoutePolicy::MaxMinBuffer).unwrap();
    assert_eq!(r.total_distance_km, 69.0);
}

#[test]
fn attack_on_the_90_km_link_switches_to_the_69_km_route() {
    let mut k = kms();
    for t in 1..=10 {
        assert!(k.ingest_stats(report("L3", t as f64, 0.022)).unwrap().is_empty());
    }
    let actions = k.ingest_stats(report("L3", 11.0, 0.25)).unwrap();
    let alarm = actions.iter().find_map(|a| match a {
        KmsAction::RaiseAlarm(al) => Some(al.clone()),
        _ => None,
    });
    assert_eq!(alarm.map(|a| a.cause), Some(AlarmCause::QberJump));
    assert!(actions.contains(&KmsAction::StopLink { link_id: "L3".into() }));
    let to = actions.iter().find_map(|a| match a {
        KmsAction::SwitchRoute { to, .. } => Some(to.clone()),
        _ => None,
    });
    assert_eq!(to.map(|r| r.total_distance_km), Some(69.0));
    assert_eq!(k.status("L3"), Some(LinkStatus::Alarm));
}

#[test]
fn alarm_on_an_unused_link_changes_only_status() {
    let mut k = kms();
    for t in 1..=3 {
        k.ingest_stats(report("L6", t as f64, 0.02)).unwrap();
    }
    let actions = k.ingest_stats(report("L6", 4.0, 0.2)).unwrap();
    assert!(!actions.is_empty());
    assert!(!actions.iter().any(|a| matches!(a, KmsAction::SwitchRoute { .. })));
    assert_eq!(k.status("L6"), Some(LinkStatus::Alarm));
}

#[test]
fn cleared_alarm_restores_the_primary_route() {
    let mut k = kms();
    k.ingest_stats(report("L3", 1.0, 0.02)).unwrap();
    k.ingest_stats(report("L3", 2.0, 0.3)).unwrap();
    assert_eq!(k.route("d").unwrap().total_distance_km, 69.0);
    let actions = k.apply(&KmsCommand::ClearAlarm { link_id: "L3".into() }, 3.0).unwrap();
    assert!(actions.contains(&KmsAction::ResumeLink { link_id: "L3".into() }));
    assert_eq!(k.status("L3"), Some(LinkStatus::Up));
    assert_eq!(k.route("d").unwrap().total_distance_km, 135.0);
    assert!(k.apply(&KmsCommand::ClearAlarm { link_id: "L3".into() }, 4.0).is_err());
}

#[test]
fn steady_and_drifting_links_raise_no_alarm() {
    let mut k = kms();
    for t in 1..=60 {
        let wobble = if t % 2 == 0 { 0.003 } else { -0.003 };
        assert!(k.ingest_stats(report("L3", t as f64, 0.022 + wobble)).unwrap().is_empty());
        // Vienna-style slow drift between 5% and 7%.
        let drift = 0.05 + 0.02 * (t as f64 / 60.0);
        assert!(k.ingest_stats(report("L4", t as f64, drift)).unwrap().is_empty());
    }
    assert_eq!(k.open_alarms().count(), 0);
}

#[test]
fn history_is_a_ring_of_3600_reports() {
    let mut k = kms();
    k.ingest_stats(report("L1", 0.0, 0.03)).unwrap();
    assert_eq!(k.history_json("L1", None).unwrap()["history"].as_array().unwrap().len(), 1);
    for t in 1..3601 {
        k.ingest_stats(report("L1", t as f64, 0.03)).unwrap();
    }
    let h = k.history_json("L1", None).unwrap();
    let rows = h["history"].as_array().unwrap();
    assert_eq!(rows.len(), 3600);
    assert_eq!(rows[0]["timestamp_s"], 1.0);
    assert_eq!(k.history_json("L1", Some(5)).unwrap()["history"].as_array().unwrap().len(), 5);
}

#[test]
fn bad_reports_are_rejected() {
    let mut k = kms();
    assert!(matches!(k.ingest_stats(report("L9", 1.0, 0.0)), Err(Error::UnknownLink(_))));
    k.ingest_stats(report("L1", 5.0, 0.03)).unwrap();
    assert!(k.ingest_stats(report("L1", 4.0, 0.03)).is_err(), "history must stay monotone");
}

#[test]
fn forced_route_must_be_valid_and_up() {
    let mut k = kms();
    let via_otemachi = nodes(&["Koganei-1", "Otemachi-1", "Otemachi-2"]);
    let actions = k.apply(&KmsCommand::ForceRoute { demand: "d".into(), nodes: via_otemachi.clone() }, 1.0).unwrap();
    assert_eq!(actions.len(), 1);
    assert_eq!(k.route("d").unwrap().nodes, via_otemachi);
    let bad = nodes(&["Koganei-1", "Otemachi-2"]);
    assert!(k.apply(&KmsCommand::ForceRoute { demand: "d".into(), nodes: bad }, 1.0).is_err());
    k.set_link_up("L2", false, 2.0).unwrap();
    assert!(k.apply(&KmsCommand::ForceRoute { demand: "d".into(), nodes: via_otemachi }, 3.0).is_err());
}

#[test]
fn identical_report_streams_give_identical_logs() {
    let run = || {
        let mut k = kms();
        for t in 1..=40 {
            let q = if t > 20 { 0.2 } else { 0.02 };
            k.ingest_stats(report("L3", t as f64, q)).unwrap();
            k.ingest_stats(report("L2", t as f64, 0.03)).unwrap();
        }
        (k.alarm_log().to_vec(), k.action_log().to_vec())
    };
    assert_eq!(run(), run());
}
