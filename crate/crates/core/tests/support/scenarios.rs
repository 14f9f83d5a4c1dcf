//! Scenario documents built in code.

use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::{json, Value as Json};

/// Five sites behind two routers plus a few direct links, twenty fragments
/// of one capacity unit spread four per site, capacity five per site and
/// demand skewed towards sites 1 and 2 so that capacity limits some moves.
pub fn cluster_scenario(rng: &mut impl Rng, rounds: u64, sync_period: u64) -> Json {
    let sites: Vec<u32> = (1..=5).collect();
    let mut edges = vec![
        json!({"a": "r1", "b": "r2", "delay": 1, "bandwidth": 8}),
    ];
    for &s in &sites {
        let router = if s <= 3 { "r1" } else { "r2" };
        edges.push(json!({
            "a": s, "b": router,
            "delay": rng.gen_range(1..=3),
            "bandwidth": *[8, 16, 32].choose(rng).unwrap(),
        }));
    }
    for (a, b) in [(1, 2), (2, 4), (3, 5)] {
        edges.push(json!({"a": a, "b": b, "delay": rng.gen_range(1..=4), "bandwidth": 2}));
    }

    let fragments: Vec<Json> = (1..=20)
        .map(|j| json!({"id": 100 + j, "size": *[0.25, 0.5, 1.0].choose(rng).unwrap(), "units": 1}))
        .collect();
    let mut placement = serde_json::Map::new();
    for j in 1..=20u32 {
        placement.insert((100 + j).to_string(), json!(sites[(j as usize - 1) % 5]));
    }

    let skew = [1, 1, 1, 2, 2, 3, 4, 5];
    let mut workload = Vec::new();
    for j in 1..=20u32 {
        let holder = sites[(j as usize - 1) % 5];
        let mut demanders: Vec<u32> = Vec::new();
        for _ in 0..rng.gen_range(1..=2) {
            let d = *skew.choose(rng).unwrap();
            if !demanders.contains(&d) {
                demanders.push(d);
            }
        }
        if rng.gen_bool(0.15) && !demanders.contains(&holder) {
            demanders.push(holder);
        }
        for d in demanders {
            workload.push(json!({
                "node": d,
                "fragment": 100 + j,
                "type": *["se", "up", "de"].choose(rng).unwrap(),
                "rate": *[0.25, 0.5, 1.0, 2.0, 3.0].choose(rng).unwrap(),
            }));
        }
    }

    json!({
        "topology": {
            "sites": sites.iter().map(|s| json!({"id": s})).collect::<Vec<_>>(),
            "routers": [{"id": "r1", "delay": 1}, {"id": "r2", "delay": 2}],
            "edges": edges,
        },
        "fragments": fragments,
        "placement": placement,
        "capacities": sites.iter().map(|s| (s.to_string(), json!(5))).collect::<serde_json::Map<_, _>>(),
        "workload": workload,
        "policy": "threshold",
        "rounds": rounds,
        "sync_period": sync_period,
    })
}
